//! Non-probabilistic shared response model.
//!
//! Minimizes `Σ_i ‖X_i − W_i S‖_F²` subject to `W_iᵀW_i = I_K` by block
//! coordinate descent: the shared response is the mean of the per-view
//! projections, and each view basis is the Procrustes solution against the
//! current shared response.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mvtt::ViewSet;

pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-8;

/// Fitted model.
#[derive(Debug, Clone, Serialize)]
pub struct SrmModel {
    /// Per-view `p×K` orthonormal bases.
    #[serde(skip)]
    pub bases: Vec<Matrix>,
    /// `K×p` shared response.
    #[serde(skip)]
    pub shared: Matrix,
    pub k: usize,
    /// Squared objective after each iteration.
    pub objective_trace: Vec<f64>,
    /// `Σ_i ‖X_i − W_i S‖_F` at termination.
    pub final_unsquared_objective: f64,
    pub seed: u64,
}

/// Thin SVD with singular triplets in descending order.
fn sorted_svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let svd = m.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Degenerate("SVD did not produce singular vectors".into())),
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let u_sorted = DMatrix::from_fn(u.nrows(), order.len(), |i, c| u[(i, order[c])]);
    let vt_sorted = DMatrix::from_fn(order.len(), v_t.ncols(), |r, j| v_t[(order[r], j)]);
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    Ok((u_sorted, values, vt_sorted))
}

/// Leading `k` left singular vectors of `x` as a `p×k` matrix.
pub fn top_left_singular_vectors(x: &Matrix, k: usize) -> Result<Matrix> {
    let (u, _, _) = sorted_svd(&x.to_dmatrix())?;
    if k > u.ncols() {
        return Err(Error::Parameter(format!("rank {k} exceeds {}", u.ncols())));
    }
    Matrix::from_dmatrix(&u.columns(0, k).into_owned())
}

/// `W = UVᵀ` from the SVD of `X Sᵀ`: the orthonormal `p×K` maximizing `tr(Wᵀ X Sᵀ)`.
fn procrustes_basis(x: &Matrix, shared: &Matrix) -> Result<Matrix> {
    let cross = x.matmul(&shared.transpose())?.to_dmatrix();
    let (u, _, v_t) = sorted_svd(&cross)?;
    Matrix::from_dmatrix(&(u * v_t))
}

fn objective(views: &[Matrix], bases: &[Matrix], shared: &Matrix) -> Result<(f64, f64)> {
    let mut squared = 0.0;
    let mut unsquared = 0.0;
    for (x, w) in views.iter().zip(bases) {
        let r = x.sub(&w.matmul(shared)?)?.frobenius_norm_sq();
        squared += r;
        unsquared += r.sqrt();
    }
    Ok((squared, unsquared))
}

fn shared_response(views: &[Matrix], bases: &[Matrix]) -> Result<Matrix> {
    let mut acc: Option<Matrix> = None;
    for (x, w) in views.iter().zip(bases) {
        let proj = w.tr_matmul(x)?;
        acc = Some(match acc {
            None => proj,
            Some(a) => a.add(&proj)?,
        });
    }
    Ok(acc.expect("at least one view").scale(1.0 / views.len() as f64))
}

/// Fits the model with `k` shared components.
///
/// Bases start from each view's top-`k` left singular vectors, so the fit is
/// deterministic; `seed` is recorded with the model but does not drive the
/// initialization.
pub fn srm_fit(views: &ViewSet, k: usize, max_iters: usize, tol: f64, seed: u64) -> Result<SrmModel> {
    srm_fit_matrices(views.views(), k, max_iters, tol, seed)
}

/// As [`srm_fit`] for arbitrary equally shaped (not necessarily square) views.
pub fn srm_fit_matrices(views: &[Matrix], k: usize, max_iters: usize, tol: f64, seed: u64) -> Result<SrmModel> {
    let first = views
        .first()
        .ok_or_else(|| Error::Parameter("SRM needs at least one view".into()))?;
    let (p, n) = first.shape();
    if views.iter().any(|v| v.shape() != (p, n)) {
        return Err(Error::Dimension("all SRM views must share a shape".into()));
    }
    if k == 0 || k > p || k > n {
        return Err(Error::Parameter(format!(
            "SRM rank must lie in 1..={}, got {k}",
            p.min(n)
        )));
    }
    if max_iters == 0 {
        return Err(Error::Parameter("max_iters must be at least 1".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::Parameter(format!("tolerance must be >= 0, got {tol}")));
    }

    let mut bases = views
        .iter()
        .map(|x| top_left_singular_vectors(x, k))
        .collect::<Result<Vec<_>>>()?;
    let mut shared = Matrix::zeros(k, n);
    let mut trace: Vec<f64> = Vec::new();
    let mut unsquared = 0.0;

    for _ in 0..max_iters {
        shared = shared_response(views, &bases)?;
        for (w, x) in bases.iter_mut().zip(views) {
            *w = procrustes_basis(x, &shared)?;
        }
        let (obj, obj_unsq) = objective(views, &bases, &shared)?;
        unsquared = obj_unsq;
        let converged = match trace.last() {
            _ if obj == 0.0 => true,
            Some(&prev) => (prev - obj).abs() <= tol * prev.abs(),
            None => false,
        };
        trace.push(obj);
        if converged {
            break;
        }
    }

    Ok(SrmModel {
        bases,
        shared,
        k,
        objective_trace: trace,
        final_unsquared_objective: unsquared,
        seed,
    })
}

/// `W_i · S`.
pub fn srm_reconstruct(model: &SrmModel, view_index: usize) -> Result<Matrix> {
    let w = model.bases.get(view_index).ok_or_else(|| {
        Error::Index(format!(
            "view {view_index} out of range ({} views)",
            model.bases.len()
        ))
    })?;
    w.matmul(&model.shared)
}
