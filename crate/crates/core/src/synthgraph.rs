//! Kronecker graphs with additive Gaussian edge noise, block-mean
//! coarsening, and simple graph summaries.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mvtt::ViewSet;
use crate::seed::stream_rng;

/// Largest Kronecker power dimension we agree to materialize.
pub const MAX_KRONECKER_DIM: usize = 10_000;

/// Hierarchical, diagonally dominant default initiator.
pub fn default_initiator() -> Matrix {
    Matrix::from_rows(&[[0.9, 0.5, 0.1], [0.5, 0.9, 0.5], [0.1, 0.5, 0.9]]).expect("finite literal")
}

/// Generator parameters for a family of noisy Kronecker graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerSpec {
    pub initiator: Matrix,
    /// Number of Kronecker products; the graph has `n^(power+1)` nodes.
    pub power: usize,
    pub noise_level: f64,
    pub seed: u64,
}

impl KroneckerSpec {
    pub fn new(initiator: Matrix, power: usize, noise_level: f64, seed: u64) -> Result<Self> {
        if !initiator.is_square() || initiator.rows() == 0 {
            return Err(Error::Dimension("initiator must be a non-empty square matrix".into()));
        }
        if !initiator.is_symmetric(0.0) {
            return Err(Error::Parameter("initiator must be symmetric".into()));
        }
        if initiator.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Parameter("initiator entries must lie in [0, 1]".into()));
        }
        if power == 0 {
            return Err(Error::Parameter("Kronecker power must be at least 1".into()));
        }
        if !(noise_level >= 0.0) || !noise_level.is_finite() {
            return Err(Error::Parameter(format!("noise level must be finite and >= 0, got {noise_level}")));
        }
        Ok(Self {
            initiator,
            power,
            noise_level,
            seed,
        })
    }

    /// Default initiator, power 3 (81 nodes).
    pub fn default_with(noise_level: f64, seed: u64) -> Result<Self> {
        Self::new(default_initiator(), 3, noise_level, seed)
    }

    pub fn truth(&self) -> Result<Matrix> {
        kronecker_power(&self.initiator, self.power)
    }
}

/// A true graph and one noisy realization of it.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyGraph {
    pub truth: Matrix,
    pub noisy: Matrix,
    pub epsilon: f64,
}

pub fn kronecker_product(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    Matrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// `A ⊗ A ⊗ … ⊗ A` with `k` products (`k + 1` factors).
pub fn kronecker_power(a: &Matrix, k: usize) -> Result<Matrix> {
    if k == 0 {
        return Err(Error::Parameter("Kronecker power must be at least 1".into()));
    }
    let rows = a.rows().checked_pow(k as u32 + 1);
    let cols = a.cols().checked_pow(k as u32 + 1);
    match (rows, cols) {
        (Some(r), Some(c)) if r <= MAX_KRONECKER_DIM && c <= MAX_KRONECKER_DIM => {}
        _ => {
            return Err(Error::SizeOverflow(format!(
                "{}x{} to the power {k} exceeds {MAX_KRONECKER_DIM} rows",
                a.rows(),
                a.cols()
            )))
        }
    }
    let mut out = a.clone();
    for _ in 0..k {
        out = kronecker_product(&out, a)?;
    }
    Ok(out)
}

fn noise_into(truth: &Matrix, epsilon: f64, rng: &mut impl Rng) -> Matrix {
    let p = truth.rows();
    let mut noisy = truth.clone();
    if epsilon == 0.0 {
        return noisy;
    }
    for j in 0..p {
        for k in j..p {
            let g: f64 = rng.sample(StandardNormal);
            let w = truth[(j, k)] + epsilon * g;
            noisy[(j, k)] = w;
            noisy[(k, j)] = w;
        }
    }
    noisy
}

fn check_noise_input(truth: &Matrix, epsilon: f64) -> Result<()> {
    if !truth.is_square() {
        return Err(Error::Dimension("graph must be square".into()));
    }
    if !truth.is_symmetric(0.0) {
        return Err(Error::Parameter("graph must be symmetric".into()));
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::Parameter(format!("noise level must be finite and >= 0, got {epsilon}")));
    }
    Ok(())
}

/// `w_n = w_t + ε·N(0,1)`, drawn on the upper triangle (diagonal included)
/// and mirrored.
pub fn add_noise(truth: &Matrix, epsilon: f64, seed: u64) -> Result<NoisyGraph> {
    check_noise_input(truth, epsilon)?;
    let mut rng = stream_rng(seed, 0);
    Ok(NoisyGraph {
        truth: truth.clone(),
        noisy: noise_into(truth, epsilon, &mut rng),
        epsilon,
    })
}

/// `m` independently noised copies of the spec's graph. View `i` draws
/// from stream `i` of `spec.seed`.
pub fn generate_views(spec: &KroneckerSpec, m: usize) -> Result<ViewSet> {
    if m == 0 {
        return Err(Error::Parameter("need at least one view".into()));
    }
    let truth = spec.truth()?;
    generate_views_from(&truth, spec.noise_level, spec.seed, m)
}

/// As [`generate_views`], for an arbitrary true graph.
pub fn generate_views_from(truth: &Matrix, epsilon: f64, seed: u64, m: usize) -> Result<ViewSet> {
    check_noise_input(truth, epsilon)?;
    let views = (0..m)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            noise_into(truth, epsilon, &mut rng)
        })
        .collect();
    ViewSet::new(views)
}

/// Mean of each contiguous 3×3 block.
pub fn box_filter_coarsen(a: &Matrix) -> Result<Matrix> {
    let (r, c) = a.shape();
    if r == 0 || r % 3 != 0 || c % 3 != 0 || c == 0 {
        return Err(Error::Dimension(format!(
            "coarsening needs dimensions divisible by 3, got {r}x{c}"
        )));
    }
    Matrix::from_fn(r / 3, c / 3, |bi, bj| {
        let mut sum = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                sum += a[(3 * bi + i, 3 * bj + j)];
            }
        }
        sum / 9.0
    })
}

/// Fraction of off-diagonal upper-triangle entries with `|w| > threshold`.
pub fn connection_density(a: &Matrix, edge_threshold: f64) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension("graph must be square".into()));
    }
    let p = a.rows();
    if p < 2 {
        return Ok(0.0);
    }
    let mut edges = 0usize;
    for j in 0..p {
        for k in (j + 1)..p {
            if a[(j, k)].abs() > edge_threshold {
                edges += 1;
            }
        }
    }
    Ok(edges as f64 / (p * (p - 1) / 2) as f64)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Connected components of the graph with edges `|w| > threshold`.
pub fn connected_components(a: &Matrix, edge_threshold: f64) -> Result<usize> {
    if !a.is_square() {
        return Err(Error::Dimension("graph must be square".into()));
    }
    let p = a.rows();
    let mut parent: Vec<usize> = (0..p).collect();
    let mut components = p;
    for j in 0..p {
        for k in (j + 1)..p {
            if a[(j, k)].abs() > edge_threshold {
                let rj = find(&mut parent, j);
                let rk = find(&mut parent, k);
                if rj != rk {
                    parent[rj.max(rk)] = rj.min(rk);
                    components -= 1;
                }
            }
        }
    }
    Ok(components)
}

/// Summary metrics of one graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphMetrics {
    pub connection_density: f64,
    pub connected_components: usize,
}

pub fn graph_metrics(a: &Matrix, edge_threshold: f64) -> Result<GraphMetrics> {
    Ok(GraphMetrics {
        connection_density: connection_density(a, edge_threshold)?,
        connected_components: connected_components(a, edge_threshold)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_power_is_identity() {
        let out = kronecker_power(&Matrix::identity(2), 2).unwrap();
        assert_eq!(out, Matrix::identity(8));
    }

    #[test]
    fn upper_triangular_product_by_hand() {
        let a = Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap();
        let expected = Matrix::from_rows(&[
            [1.0, 1.0, 1.0, 1.0],
            [0.0, 1.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 1.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(kronecker_power(&a, 1).unwrap(), expected);
    }

    #[test]
    fn power_guards() {
        assert!(matches!(kronecker_power(&Matrix::identity(3), 0), Err(Error::Parameter(_))));
        assert!(matches!(
            kronecker_power(&Matrix::identity(3), 9),
            Err(Error::SizeOverflow(_))
        ));
    }

    #[test]
    fn zero_noise_is_exact() {
        let t = kronecker_power(&default_initiator(), 2).unwrap();
        let g = add_noise(&t, 0.0, 99).unwrap();
        assert_eq!(g.noisy, g.truth);
    }

    #[test]
    fn noise_is_symmetric_and_seeded() {
        let t = kronecker_power(&default_initiator(), 1).unwrap();
        let a = add_noise(&t, 0.3, 5).unwrap();
        let b = add_noise(&t, 0.3, 5).unwrap();
        let c = add_noise(&t, 0.3, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.noisy, c.noisy);
        assert!(a.noisy.is_symmetric(0.0));
    }

    #[test]
    fn noise_rejects_negative_epsilon() {
        assert!(add_noise(&Matrix::identity(3), -0.1, 0).is_err());
    }

    #[test]
    fn single_noise_free_view_is_truth() {
        let spec = KroneckerSpec::default_with(0.0, 1).unwrap();
        let v = generate_views(&spec, 1).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.views()[0], spec.truth().unwrap());
    }

    #[test]
    fn coarsen_constant_and_shape_errors() {
        let a = Matrix::from_fn(9, 9, |_, _| 0.25).unwrap();
        let c = box_filter_coarsen(&a).unwrap();
        assert_eq!(c.shape(), (3, 3));
        assert!(c.as_slice().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!(box_filter_coarsen(&Matrix::identity(4)).is_err());
    }

    #[test]
    fn density_examples() {
        assert_eq!(connection_density(&Matrix::zeros(4, 4), 0.0).unwrap(), 0.0);
        let ones = Matrix::from_fn(5, 5, |_, _| 1.0).unwrap();
        assert_eq!(connection_density(&ones, 0.5).unwrap(), 1.0);
        let mut a = Matrix::zeros(4, 4);
        for (j, k) in [(0, 1), (1, 2), (2, 3)] {
            a[(j, k)] = 0.9;
            a[(k, j)] = 0.9;
        }
        a[(0, 3)] = 0.1;
        a[(3, 0)] = 0.1;
        assert_eq!(connection_density(&a, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn component_examples() {
        assert_eq!(connected_components(&Matrix::zeros(6, 6), 0.0).unwrap(), 6);
        let ones = Matrix::from_fn(5, 5, |_, _| 1.0).unwrap();
        assert_eq!(connected_components(&ones, 0.5).unwrap(), 1);
        let blocks = Matrix::from_fn(6, 6, |i, j| if (i < 3) == (j < 3) { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(connected_components(&blocks, 0.0).unwrap(), 2);
    }
}
