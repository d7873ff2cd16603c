//! Multi-view treelet transform.
//!
//! Every level picks the single most correlated pair across all views and
//! applies one shared Givens rotation to every view. The angle is the
//! joint-diagonalization closed form: with `h_i = [Σ_i[j,j] − Σ_i[k,k],
//! Σ_i[j,k] + Σ_i[k,j]]` and `G = Σ_i h_i h_iᵀ`, the top eigenvector
//! `[x, y]` of `G` gives `c = √((x + r)/2r)` and `s = y/√(2r(x + r))`,
//! which minimizes `Σ_i off(JᵀΣ_iJ)` over the rotation angle.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    apply_rotation_symmetric_in_place, compute_correlation, rotate_columns_in_place, JacobiRotation,
    Matrix, RotationPair,
};
use crate::treelet::{
    check_levels, difference_index, refresh_correlation_rows, rotation_from_direction,
    scan_active_pairs, sorted_active, validated_covariance, TreeletBasis,
};

/// Below this magnitude of `√λ_max(G)` every view is already diagonal on the pair.
pub const JOINT_DEGENERATE_TOL: f64 = 1e-14;

/// An ordered collection of equally sized symmetric matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    views: Vec<Matrix>,
}

impl ViewSet {
    pub fn new(views: Vec<Matrix>) -> Result<Self> {
        let first = views
            .first()
            .ok_or_else(|| Error::Parameter("a view set needs at least one view".into()))?;
        let p = first.rows();
        let mut checked = Vec::with_capacity(views.len());
        for (i, v) in views.iter().enumerate() {
            if v.shape() != (p, p) {
                return Err(Error::Dimension(format!(
                    "view {i} is {}x{}, expected {p}x{p}",
                    v.rows(),
                    v.cols()
                )));
            }
            checked.push(validated_covariance(v)?);
        }
        Ok(Self { views: checked })
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.views[0].rows()
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn get(&self, i: usize) -> Option<&Matrix> {
        self.views.get(i)
    }

    pub fn into_views(self) -> Vec<Matrix> {
        self.views
    }

    /// Subset in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let views = indices
            .iter()
            .map(|&i| {
                self.views
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Index(format!("view {i} out of range ({} views)", self.len())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(views)
    }

    /// Entrywise mean of all views.
    pub fn mean(&self) -> Matrix {
        let mut acc = Matrix::zeros(self.dim(), self.dim());
        for v in &self.views {
            acc = acc.add(v).expect("views share a shape");
        }
        acc.scale(1.0 / self.len() as f64)
    }
}

/// The `(view, j, k)` argmax of a joint selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointSelection {
    pub view: usize,
    pub pair: RotationPair,
    pub score: f64,
}

/// Maximizes `|ρ_i[j,k]|` over views and active pairs; ties go to the
/// smallest view, then smallest `j`, then smallest `k`.
pub fn find_max_correlation_triple(rhos: &[Matrix], active: &[usize]) -> Result<JointSelection> {
    let first = rhos
        .first()
        .ok_or_else(|| Error::Parameter("need at least one correlation matrix".into()))?;
    let active = sorted_active(active, first.rows())?;
    select_triple(rhos, &active)
}

fn select_triple(rhos: &[Matrix], active: &[usize]) -> Result<JointSelection> {
    let mut best: Option<JointSelection> = None;
    for (view, rho) in rhos.iter().enumerate() {
        if let Some((pair, score)) = scan_active_pairs(rho, active) {
            if best.is_none_or(|b| score > b.score) {
                best = Some(JointSelection { view, pair, score });
            }
        }
    }
    best.ok_or_else(|| Error::Parameter("need at least 2 active indices".into()))
}

fn h_vector(sigma: &Matrix, pair: RotationPair) -> [f64; 2] {
    let (j, k) = (pair.j, pair.k);
    [sigma[(j, j)] - sigma[(k, k)], sigma[(j, k)] + sigma[(k, j)]]
}

/// Eigenvector of the largest eigenvalue of a symmetric 2×2 matrix,
/// together with that eigenvalue.
fn top_eigenvector(g11: f64, g12: f64, g22: f64) -> ([f64; 2], f64) {
    let half_diff = 0.5 * (g11 - g22);
    let lambda = 0.5 * (g11 + g22) + half_diff.hypot(g12);
    let v1 = [g12, lambda - g11];
    let v2 = [lambda - g22, g12];
    let n1 = v1[0].hypot(v1[1]);
    let n2 = v2[0].hypot(v2[1]);
    let v = if n1 == 0.0 && n2 == 0.0 {
        // G is a multiple of the identity
        [1.0, 0.0]
    } else if n1 > n2 {
        [v1[0] / n1, v1[1] / n1]
    } else {
        [v2[0] / n2, v2[1] / n2]
    };
    (v, lambda)
}

/// Shared rotation minimizing the summed off-diagonal norm at `pair`.
pub fn joint_rotation(sigmas: &[Matrix], pair: RotationPair) -> Result<JacobiRotation> {
    let first = sigmas
        .first()
        .ok_or_else(|| Error::Parameter("joint rotation needs at least one view".into()))?;
    let p = first.rows();
    pair.check_bounds(p)?;
    if let Some(bad) = sigmas.iter().position(|s| s.shape() != (p, p)) {
        return Err(Error::Dimension(format!("view {bad} has a different shape")));
    }

    let hs: Vec<[f64; 2]> = sigmas.iter().map(|s| h_vector(s, pair)).collect();

    // Rank-one G: the top eigenvector is h itself. This also makes a single
    // view (or identical views) reproduce the single-view rotation exactly.
    if hs.iter().all(|h| *h == hs[0]) {
        let [x, y] = hs[0];
        if y == 0.0 {
            return Ok(JacobiRotation::identity(pair, 0));
        }
        return Ok(rotation_from_direction(x, y, pair));
    }

    let (mut g11, mut g12, mut g22) = (0.0, 0.0, 0.0);
    for [a, b] in &hs {
        g11 += a * a;
        g12 += a * b;
        g22 += b * b;
    }
    let ([x, y], lambda) = top_eigenvector(g11, g12, g22);
    if lambda.max(0.0).sqrt() < JOINT_DEGENERATE_TOL {
        return Ok(JacobiRotation::identity(pair, 0));
    }
    Ok(rotation_from_direction(x, y, pair))
}

/// Runs `levels` joint treelet rotations over all views.
pub fn mvtt_transform(views: &ViewSet, levels: usize) -> Result<TreeletBasis> {
    let p = views.dim();
    check_levels(p, levels)?;

    let mut sigmas: Vec<Matrix> = views.views().to_vec();
    let mut rhos = sigmas
        .iter()
        .map(compute_correlation)
        .collect::<Result<Vec<_>>>()?;
    let mut active: Vec<usize> = (0..p).collect();
    let mut basis = Matrix::identity(p);
    let mut rotations = Vec::with_capacity(levels);
    let mut dropped = Vec::with_capacity(levels);

    for level in 1..=levels {
        let selection = select_triple(&rhos, &active)?;
        let pair = selection.pair;
        let mut rot = joint_rotation(&sigmas, pair)?;
        rot.level = level;

        rotate_columns_in_place(&mut basis, &rot)?;
        for sigma in sigmas.iter_mut() {
            apply_rotation_symmetric_in_place(sigma, &rot)?;
        }

        let (mut var_j, mut var_k) = (0.0, 0.0);
        for sigma in &sigmas {
            var_j += sigma[(pair.j, pair.j)];
            var_k += sigma[(pair.k, pair.k)];
        }
        let retire = difference_index(pair, var_j, var_k);
        active.retain(|&i| i != retire);
        dropped.push(retire);

        for (sigma, rho) in sigmas.iter().zip(rhos.iter_mut()) {
            refresh_correlation_rows(sigma, rho, pair);
        }
        rotations.push(rot);
    }

    let mut survivor_order = active;
    survivor_order.extend(dropped);
    Ok(TreeletBasis {
        basis,
        rotations,
        survivor_order,
        levels,
    })
}
