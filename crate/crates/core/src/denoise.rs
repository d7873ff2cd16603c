//! Basis-coefficient denoising.
//!
//! A data matrix is expanded in an orthonormal treelet basis, each
//! coefficient gets a two-tailed p-value under a zero-mean Gaussian null
//! whose variance is pooled over all coefficients, and the
//! Benjamini–Hochberg boundary at level `q` becomes a hard threshold.

use serde::Serialize;
use libm::erfc;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::treelet::TreeletBasis;

/// Coefficients of a data matrix in a treelet basis; column `j` expands `X_j`.
#[derive(Debug, Clone)]
pub struct CoefficientSet<'a> {
    pub coeffs: Matrix,
    pub basis: &'a TreeletBasis,
}

impl CoefficientSet<'_> {
    /// `B · coeffs`.
    pub fn reconstruct(&self) -> Matrix {
        self.basis
            .basis
            .matmul(&self.coeffs)
            .expect("coefficients match the basis dimension")
    }
}

/// Outcome of the FDR boundary search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdrResult {
    pub q: f64,
    #[serde(skip)]
    pub p_values: Vec<f64>,
    /// Hard threshold `|c_f|`; infinite when nothing is significant.
    #[serde(serialize_with = "serialize_threshold")]
    pub threshold: f64,
    pub rejected_count: usize,
}

fn serialize_threshold<S: serde::Serializer>(t: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if t.is_finite() {
        s.serialize_some(t)
    } else {
        s.serialize_none()
    }
}

impl FdrResult {
    pub fn nothing_significant(&self) -> bool {
        self.rejected_count == 0
    }
}

/// `coeffs = Bᵀ·X`.
pub fn expand<'a>(x: &Matrix, basis: &'a TreeletBasis) -> Result<CoefficientSet<'a>> {
    if x.rows() != basis.dim() {
        return Err(Error::Dimension(format!(
            "data has {} rows but the basis has dimension {}",
            x.rows(),
            basis.dim()
        )));
    }
    Ok(CoefficientSet {
        coeffs: basis.basis.tr_matmul(x)?,
        basis,
    })
}

/// Two-tailed p-values `2(1 − Φ(|c|/σ̂))` under the pooled Gaussian null.
pub fn coefficient_p_values(coeffs: &CoefficientSet<'_>) -> Result<Vec<f64>> {
    p_values_of(coeffs.coeffs.as_slice())
}

pub(crate) fn p_values_of(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::Degenerate("need at least 2 coefficients".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::Degenerate("all coefficients are equal".into()));
    }
    let scale = (2.0 * var).sqrt();
    Ok(values
        .iter()
        .map(|c| erfc(c.abs() / scale).clamp(0.0, 1.0))
        .collect())
}

/// Benjamini–Hochberg step-up boundary converted to a coefficient threshold.
pub fn fdr_threshold(p_values: &[f64], coeffs: &[f64], q: f64) -> Result<FdrResult> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Parameter(format!("FDR level must lie in (0, 1), got {q}")));
    }
    if p_values.len() != coeffs.len() {
        return Err(Error::Dimension(format!(
            "{} p-values for {} coefficients",
            p_values.len(),
            coeffs.len()
        )));
    }
    let n = p_values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));

    let rejected_count = order
        .iter()
        .enumerate()
        .rev()
        .find(|&(rank0, &idx)| p_values[idx] <= (rank0 + 1) as f64 * q / n as f64)
        .map_or(0, |(rank0, _)| rank0 + 1);
    // smallest magnitude among the rejected hypotheses, so all of them survive
    let threshold = order[..rejected_count]
        .iter()
        .map(|&idx| coeffs[idx].abs())
        .reduce(f64::min)
        .unwrap_or(f64::INFINITY);
    Ok(FdrResult {
        q,
        p_values: p_values.to_vec(),
        threshold,
        rejected_count,
    })
}

/// Zeroes coefficients with `|c| < threshold`.
pub fn hard_threshold<'a>(coeffs: &CoefficientSet<'a>, threshold: f64) -> Result<CoefficientSet<'a>> {
    if !(threshold >= 0.0) {
        return Err(Error::Parameter(format!("threshold must be >= 0, got {threshold}")));
    }
    Ok(CoefficientSet {
        coeffs: coeffs.coeffs.map(|c| if c.abs() < threshold { 0.0 } else { c }),
        basis: coeffs.basis,
    })
}

/// Denoised matrix together with its thresholding coefficients and FDR outcome.
#[derive(Debug, Clone)]
pub struct DenoiseOutcome {
    pub denoised: Matrix,
    pub coefficients: Matrix,
    pub fdr: FdrResult,
}

/// Full pipeline, keeping the intermediate results.
pub fn denoise_detailed(x: &Matrix, basis: &TreeletBasis, q: f64) -> Result<DenoiseOutcome> {
    let expanded = expand(x, basis)?;
    let p_values = coefficient_p_values(&expanded)?;
    let fdr = fdr_threshold(&p_values, expanded.coeffs.as_slice(), q)?;
    let kept = hard_threshold(&expanded, fdr.threshold)?;
    Ok(DenoiseOutcome {
        denoised: kept.reconstruct(),
        coefficients: kept.coeffs,
        fdr,
    })
}

/// Expand, threshold at the FDR boundary, reconstruct.
pub fn denoise(x: &Matrix, basis: &TreeletBasis, q: f64) -> Result<Matrix> {
    Ok(denoise_detailed(x, basis, q)?.denoised)
}

/// `‖X_t − X_d‖_F²`.
pub fn denoise_error(truth: &Matrix, denoised: &Matrix) -> Result<f64> {
    Ok(truth.sub(denoised)?.frobenius_norm_sq())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treelet::treelet_transform;

    fn identity_basis(p: usize) -> TreeletBasis {
        TreeletBasis {
            basis: Matrix::identity(p),
            rotations: vec![],
            survivor_order: (0..p).collect(),
            levels: 0,
        }
    }

    #[test]
    fn identity_basis_expansion_is_noop() {
        let b = identity_basis(3);
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.5]]).unwrap();
        assert_eq!(expand(&x, &b).unwrap().coeffs, x);
    }

    #[test]
    fn basis_column_expands_to_indicator() {
        let s = Matrix::from_rows(&[
            [3.0, 1.0, 0.5, 0.0],
            [1.0, 2.0, 0.3, 0.2],
            [0.5, 0.3, 4.0, 1.0],
            [0.0, 0.2, 1.0, 1.0],
        ])
        .unwrap();
        let t = treelet_transform(&s, 3).unwrap();
        let tau = Matrix::new(4, 1, t.basis.column(3)).unwrap();
        let c = expand(&tau, &t).unwrap().coeffs;
        for i in 0..4 {
            let expected = if i == 3 { 1.0 } else { 0.0 };
            assert!((c[(i, 0)] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn expand_rejects_wrong_rows() {
        let b = identity_basis(3);
        assert!(expand(&Matrix::zeros(4, 4), &b).is_err());
    }

    #[test]
    fn p_value_reference_points() {
        // values ±1 have mean 0 and population variance 1
        let p = p_values_of(&[1.0, -1.0, 1.0, -1.0, 0.0, 0.0]).unwrap();
        let sigma = (4.0f64 / 6.0).sqrt();
        let expected = erfc(1.0 / sigma / 2f64.sqrt());
        assert!((p[0] - expected).abs() < 1e-15);
        assert_eq!(p[4], 1.0);

        // |c| = σ̂ gives 2(1 − Φ(1)) = 0.31731050786291415
        let v = [1.0, -1.0];
        let p = p_values_of(&v).unwrap();
        assert!((p[0] - 0.317_310_507_862_914_15).abs() < 1e-12);
    }

    #[test]
    fn p_values_monotone_in_magnitude() {
        let v = [0.1, -2.0, 0.5, 3.0, -0.2];
        let p = p_values_of(&v).unwrap();
        for a in 0..v.len() {
            for b in 0..v.len() {
                if v[a].abs() > v[b].abs() {
                    assert!(p[a] < p[b]);
                }
            }
        }
    }

    #[test]
    fn p_values_degenerate() {
        assert!(matches!(p_values_of(&[2.0; 5]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn bh_hand_example() {
        let r = fdr_threshold(&[0.001, 0.2, 0.8], &[5.0, -1.0, 0.1], 0.05).unwrap();
        assert_eq!(r.rejected_count, 1);
        assert_eq!(r.threshold, 5.0);
    }

    #[test]
    fn bh_no_rejection_and_all_rejected() {
        let r = fdr_threshold(&[1.0; 4], &[0.0; 4], 0.2).unwrap();
        assert_eq!(r.rejected_count, 0);
        assert!(r.threshold.is_infinite());

        let r = fdr_threshold(&[1e-9; 3], &[4.0, -2.5, 3.0], 0.05).unwrap();
        assert_eq!(r.rejected_count, 3);
        assert_eq!(r.threshold, 2.5);
    }

    #[test]
    fn bh_rejects_bad_q() {
        assert!(fdr_threshold(&[0.1], &[1.0], 0.0).is_err());
        assert!(fdr_threshold(&[0.1], &[1.0], 1.0).is_err());
        assert!(fdr_threshold(&[0.1, 0.2], &[1.0], 0.1).is_err());
    }

    #[test]
    fn hard_threshold_rules() {
        let b = identity_basis(3);
        let cs = CoefficientSet {
            coeffs: Matrix::new(3, 1, vec![3.0, -1.0, 0.5]).unwrap(),
            basis: &b,
        };
        assert_eq!(hard_threshold(&cs, 0.0).unwrap().coeffs, cs.coeffs);
        let kept = hard_threshold(&cs, 1.0).unwrap();
        assert_eq!(kept.coeffs.as_slice(), &[3.0, -1.0, 0.0]);
        let none = hard_threshold(&cs, f64::INFINITY).unwrap();
        assert!(none.coeffs.as_slice().iter().all(|&c| c == 0.0));
        assert_eq!(none.reconstruct(), Matrix::zeros(3, 1));
    }

    #[test]
    fn zero_input_is_degenerate() {
        let b = identity_basis(4);
        assert!(matches!(denoise(&Matrix::zeros(4, 4), &b, 0.05), Err(Error::Degenerate(_))));
    }

    #[test]
    fn error_definition() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.5, 2.0], [2.0, 4.0]]).unwrap();
        assert_eq!(denoise_error(&a, &a).unwrap(), 0.0);
        assert_eq!(denoise_error(&a, &b).unwrap(), 0.25 + 1.0);
        let e = Matrix::from_rows(&[[2.0, 0.0], [0.0, 0.0]]).unwrap();
        assert_eq!(denoise_error(&a, &a.add(&e).unwrap()).unwrap(), 4.0);
        assert!(denoise_error(&a, &Matrix::zeros(3, 3)).is_err());
    }
}
