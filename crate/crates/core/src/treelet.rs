//! Single-view treelet transform.
//!
//! Each level finds the most correlated pair of active variables, applies
//! the Jacobi rotation that decorrelates them, and retires the rotated
//! variable with the smaller variance (the "difference" variable). The
//! accumulated rotations form a sparse orthonormal basis.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    apply_rotation_symmetric_in_place, compute_correlation, correlation_entry,
    rotate_columns_in_place, Matrix, RotationPair,
};

pub use crate::linalg::JacobiRotation;

/// Relative asymmetry tolerated on input covariances before symmetrizing.
pub(crate) const SYMMETRY_TOL: f64 = 1e-9;

/// Working state of a transform at one level.
#[derive(Debug, Clone)]
pub struct TreeletState {
    pub sigma: Matrix,
    pub rho: Matrix,
    /// Active sum variables, ascending.
    pub active: Vec<usize>,
    pub level: usize,
}

impl TreeletState {
    pub fn new(sigma0: &Matrix) -> Result<Self> {
        let sigma = validated_covariance(sigma0)?;
        let rho = compute_correlation(&sigma)?;
        let active = (0..sigma.rows()).collect();
        Ok(Self {
            sigma,
            rho,
            active,
            level: 1,
        })
    }

    /// Recomputes the correlation entries that a rotation on `pair` changed.
    pub(crate) fn refresh_correlations(&mut self, pair: RotationPair) {
        refresh_correlation_rows(&self.sigma, &mut self.rho, pair);
    }
}

/// Output of a (multi-view) treelet transform.
#[derive(Debug, Clone, Serialize)]
pub struct TreeletBasis {
    /// Orthonormal basis; column `i` is the `i`-th basis vector.
    #[serde(skip)]
    pub basis: Matrix,
    pub rotations: Vec<JacobiRotation>,
    /// Active indices at termination (ascending) followed by retired indices in retirement order.
    pub survivor_order: Vec<usize>,
    pub levels: usize,
}

impl TreeletBasis {
    /// Wraps an orthonormal column basis that was not built by rotations.
    pub fn from_matrix(basis: Matrix) -> Self {
        let cols = basis.cols();
        Self {
            basis,
            rotations: Vec::new(),
            survivor_order: (0..cols).collect(),
            levels: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    /// `BᵀΣB`.
    pub fn conjugate(&self, sigma: &Matrix) -> Result<Matrix> {
        self.basis.tr_matmul(&sigma.matmul(&self.basis)?)
    }

    /// `‖BᵀB − I‖_F`.
    pub fn orthogonality_error(&self) -> f64 {
        let gram = self
            .basis
            .tr_matmul(&self.basis)
            .expect("basis is square");
        gram.sub(&Matrix::identity(self.dim()))
            .expect("same shape")
            .frobenius_norm()
    }
}

pub(crate) fn validated_covariance(sigma: &Matrix) -> Result<Matrix> {
    if !sigma.is_square() {
        return Err(Error::Dimension(format!(
            "covariance must be square, got {}x{}",
            sigma.rows(),
            sigma.cols()
        )));
    }
    if sigma.rows() < 2 {
        return Err(Error::Dimension("covariance must be at least 2x2".into()));
    }
    let scale = sigma
        .as_slice()
        .iter()
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    if sigma.max_asymmetry() > SYMMETRY_TOL * scale {
        return Err(Error::Dimension("covariance is not symmetric".into()));
    }
    Ok(sigma.symmetrized())
}

pub(crate) fn check_levels(p: usize, levels: usize) -> Result<()> {
    if levels == 0 || levels >= p {
        return Err(Error::Parameter(format!(
            "levels must be in 1..={} for dimension {p}, got {levels}",
            p - 1
        )));
    }
    Ok(())
}

pub(crate) fn refresh_correlation_rows(sigma: &Matrix, rho: &mut Matrix, pair: RotationPair) {
    for idx in [pair.j, pair.k] {
        for m in 0..sigma.rows() {
            let r = correlation_entry(sigma, idx, m);
            rho[(idx, m)] = r;
            rho[(m, idx)] = r;
        }
    }
}

/// Best `|ρ[j,k]|` over pairs of a sorted active set, ties to the smallest
/// `(j, k)`. Returns `None` when fewer than two indices are active.
pub(crate) fn scan_active_pairs(rho: &Matrix, active: &[usize]) -> Option<(RotationPair, f64)> {
    let mut best: Option<(RotationPair, f64)> = None;
    for (a, &j) in active.iter().enumerate() {
        let row = rho.row(j);
        for &k in &active[a + 1..] {
            let score = row[k].abs();
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((RotationPair { j, k }, score));
            }
        }
    }
    best
}

pub(crate) fn sorted_active(active: &[usize], p: usize) -> Result<Vec<usize>> {
    let mut sorted = active.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 active indices, got {}",
            sorted.len()
        )));
    }
    if let Some(&bad) = sorted.iter().find(|&&i| i >= p) {
        return Err(Error::Index(format!("active index {bad} out of range for dimension {p}")));
    }
    Ok(sorted)
}

/// Active pair with the largest absolute correlation.
pub fn find_max_correlation_pair(rho: &Matrix, active: &[usize]) -> Result<RotationPair> {
    let active = sorted_active(active, rho.rows())?;
    let (pair, _) = scan_active_pairs(rho, &active).expect("at least two active indices");
    Ok(pair)
}

/// Rotation whose `2θ` points along `(x, y)`, with `θ ∈ (−π/4, π/4]`.
pub(crate) fn rotation_from_direction(x: f64, y: f64, pair: RotationPair) -> JacobiRotation {
    let (x, y) = if x < 0.0 || (x == 0.0 && y < 0.0) {
        (-x, -y)
    } else {
        (x, y)
    };
    let r = x.hypot(y);
    if r == 0.0 {
        return JacobiRotation::identity(pair, 0);
    }
    let c = ((x + r) / (2.0 * r)).sqrt();
    let s = y / (2.0 * r * (x + r)).sqrt();
    JacobiRotation {
        j: pair.j,
        k: pair.k,
        c,
        s,
        level: 0,
    }
}

/// Jacobi rotation that zeroes `Σ[j,k]` under conjugation.
pub fn single_view_rotation(sigma: &Matrix, pair: RotationPair) -> Result<JacobiRotation> {
    if !sigma.is_square() {
        return Err(Error::Dimension("rotation needs a square covariance".into()));
    }
    pair.check_bounds(sigma.rows())?;
    let (j, k) = (pair.j, pair.k);
    let b = 0.5 * (sigma[(j, k)] + sigma[(k, j)]);
    if b == 0.0 {
        return Ok(JacobiRotation::identity(pair, 0));
    }
    Ok(rotation_from_direction(sigma[(j, j)] - sigma[(k, k)], 2.0 * b, pair))
}

/// Index of the rotated pair to retire given post-rotation variances.
/// Ties retire the larger index.
pub(crate) fn difference_index(pair: RotationPair, var_j: f64, var_k: f64) -> usize {
    if var_j < var_k {
        pair.j
    } else {
        pair.k
    }
}

/// Runs `levels` treelet rotations on a covariance matrix.
pub fn treelet_transform(sigma0: &Matrix, levels: usize) -> Result<TreeletBasis> {
    let mut state = TreeletState::new(sigma0)?;
    let p = state.sigma.rows();
    check_levels(p, levels)?;

    let mut basis = Matrix::identity(p);
    let mut rotations = Vec::with_capacity(levels);
    let mut dropped = Vec::with_capacity(levels);

    while state.level <= levels {
        let (pair, _) = scan_active_pairs(&state.rho, &state.active)
            .expect("active set never shrinks below p - levels >= 1 + 1");
        let mut rot = single_view_rotation(&state.sigma, pair)?;
        rot.level = state.level;

        rotate_columns_in_place(&mut basis, &rot)?;
        apply_rotation_symmetric_in_place(&mut state.sigma, &rot)?;

        let retire = difference_index(pair, state.sigma[(pair.j, pair.j)], state.sigma[(pair.k, pair.k)]);
        state.active.retain(|&i| i != retire);
        dropped.push(retire);
        state.refresh_correlations(pair);

        rotations.push(rot);
        state.level += 1;
    }

    let mut survivor_order = state.active.clone();
    survivor_order.extend(dropped);
    Ok(TreeletBasis {
        basis,
        rotations,
        survivor_order,
        levels,
    })
}

/// `⌊p/2⌋`, the level count used throughout the experiments.
pub fn default_levels(p: usize) -> usize {
    p / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{apply_rotation_symmetric, off_diagonal_norm};

    fn spd(p: usize, seed: u64) -> Matrix {
        // deterministic SPD: AᵀA + p·I with a tiny LCG fill
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let a = Matrix::from_fn(p, p, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .unwrap();
        a.tr_matmul(&a)
            .unwrap()
            .add(&Matrix::identity(p).scale(0.1))
            .unwrap()
            .symmetrized()
    }

    #[test]
    fn argmax_unique() {
        let mut rho = Matrix::identity(5);
        for (j, k, v) in [(0, 1, 0.2), (1, 3, -0.9), (2, 4, 0.5)] {
            rho[(j, k)] = v;
            rho[(k, j)] = v;
        }
        let pair = find_max_correlation_pair(&rho, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(pair, RotationPair { j: 1, k: 3 });
    }

    #[test]
    fn argmax_all_ties_uses_first_pair() {
        let rho = Matrix::identity(4);
        let pair = find_max_correlation_pair(&rho, &[3, 1, 2]).unwrap();
        assert_eq!(pair, RotationPair { j: 1, k: 2 });
    }

    #[test]
    fn argmax_respects_active_set() {
        let mut rho = Matrix::identity(3);
        rho[(0, 2)] = 0.9;
        rho[(2, 0)] = 0.9;
        rho[(0, 1)] = 0.5;
        rho[(1, 0)] = 0.5;
        let active = [0, 1];
        // exhaustive oracle over active pairs
        let mut best = (0, 0, -1.0);
        for &a in &active {
            for &b in &active {
                if a < b && rho[(a, b)].abs() > best.2 {
                    best = (a, b, rho[(a, b)].abs());
                }
            }
        }
        let pair = find_max_correlation_pair(&rho, &active).unwrap();
        assert_eq!((pair.j, pair.k), (best.0, best.1));
        assert_eq!((pair.j, pair.k), (0, 1));
    }

    #[test]
    fn argmax_needs_two_active() {
        let rho = Matrix::identity(3);
        assert!(find_max_correlation_pair(&rho, &[1]).is_err());
    }

    #[test]
    fn zero_covariance_gives_identity_rotation() {
        let s = Matrix::from_diagonal(&[1.0, 2.0, 3.0]).unwrap();
        let r = single_view_rotation(&s, RotationPair { j: 0, k: 2 }).unwrap();
        assert_eq!((r.c, r.s), (1.0, 0.0));
    }

    #[test]
    fn rotation_on_equal_variances_is_quarter_turn() {
        let s = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let r = single_view_rotation(&s, RotationPair { j: 0, k: 1 }).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.c - h).abs() < 1e-15 && (r.s - h).abs() < 1e-15);
        let out = apply_rotation_symmetric(&s, &r).unwrap();
        assert!((out[(0, 0)] - 3.0).abs() < 1e-12);
        assert!((out[(1, 1)] - 1.0).abs() < 1e-12);
        assert!(out[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn rotation_zeroes_target_on_random_matrix() {
        let s = spd(5, 7);
        for j in 0..5 {
            for k in (j + 1)..5 {
                let pair = RotationPair { j, k };
                let r = single_view_rotation(&s, pair).unwrap();
                assert!((r.c * r.c + r.s * r.s - 1.0).abs() < 1e-12);
                let theta = r.s.atan2(r.c);
                assert!(theta > -std::f64::consts::FRAC_PI_4 - 1e-15);
                assert!(theta <= std::f64::consts::FRAC_PI_4 + 1e-15);
                let out = apply_rotation_symmetric(&s, &r).unwrap();
                assert!(out[(j, k)].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn one_level_on_block_matrix() {
        let s = Matrix::from_rows(&[[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]]).unwrap();
        let t = treelet_transform(&s, 1).unwrap();
        assert_eq!(t.rotations.len(), 1);
        let r = t.rotations[0];
        assert_eq!((r.j, r.k, r.level), (0, 1, 1));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.c - h).abs() < 1e-15 && (r.s - h).abs() < 1e-15);
        // post-rotation variances are 3 (index 0) and 1 (index 1)
        assert_eq!(t.survivor_order, vec![0, 2, 1]);
    }

    #[test]
    fn diagonal_input_keeps_identity_basis() {
        let s = Matrix::from_diagonal(&[1.0, 4.0, 2.0, 3.0, 5.0]).unwrap();
        let t = treelet_transform(&s, 4).unwrap();
        assert!(t.rotations.iter().all(|r| r.c == 1.0 && r.s == 0.0));
        assert_eq!(t.basis, Matrix::identity(5));
    }

    #[test]
    fn each_level_shrinks_rotated_entry() {
        let s0 = spd(8, 3);
        let t = treelet_transform(&s0, 4).unwrap();
        let mut sigma = s0.clone();
        for rot in &t.rotations {
            let before = sigma[(rot.j, rot.k)];
            let next = apply_rotation_symmetric(&sigma, rot).unwrap();
            assert!(next[(rot.j, rot.k)].abs() < 1e-10);
            assert!(before.abs() > 0.0);
            assert!(off_diagonal_norm(&next) < off_diagonal_norm(&sigma));
            sigma = next;
        }
        assert!(t.orthogonality_error() < 1e-10);
    }

    #[test]
    fn level_bounds() {
        let s = spd(4, 1);
        assert!(matches!(treelet_transform(&s, 0), Err(Error::Parameter(_))));
        assert!(matches!(treelet_transform(&s, 4), Err(Error::Parameter(_))));
        assert!(treelet_transform(&s, 3).is_ok());
    }

    #[test]
    fn default_level_counts() {
        assert_eq!(default_levels(81), 40);
        assert_eq!(default_levels(2), 1);
        assert_eq!(default_levels(9), 4);
    }
}
