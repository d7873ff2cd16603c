//! Convergence, stability, rate, denoising and shared-response studies.
//!
//! Every randomized quantity is drawn from a seed derived from the
//! configuration's master seed and the position of the quantity in the
//! run (noise level, view count, collection, trial, partition), so runs
//! are reproducible and independent units can execute in parallel.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::denoise::{denoise_detailed, denoise_error};
use crate::error::{Error, Result};
use crate::linalg::{orthogonal_procrustes, pearson_correlation, Matrix};
use crate::mvtt::{mvtt_transform, ViewSet};
use crate::seed::{derive_seed, stream_rng};
use crate::srm::{srm_fit, srm_fit_matrices, srm_reconstruct, DEFAULT_TOL};
use crate::synthgraph::{generate_views_from, KroneckerSpec};
use crate::treelet::{treelet_transform, TreeletBasis};

/// Values of `E_M − bias` at or below this are excluded from the rate fit.
pub const RATE_FLOOR: f64 = 1e-12;

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (divisor `n − 1`); zero for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension("spearman needs equal-length inputs".into()));
    }
    let rx = Matrix::new(1, x.len(), ranks(x))?;
    let ry = Matrix::new(1, y.len(), ranks(y))?;
    pearson_correlation(&rx, &ry)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = avg;
        }
        i = j + 1;
    }
    out
}

// ---------------------------------------------------------------------------
// Convergence

/// `T^l(Σ)`: the true covariance in its own treelet basis.
fn treelet_reference(truth: &Matrix, levels: usize) -> Result<Matrix> {
    let basis = treelet_transform(truth, levels)?;
    basis.conjugate(truth)
}

fn e_m_against(views: &ViewSet, reference: &Matrix, levels: usize) -> Result<f64> {
    let joint = mvtt_transform(views, levels)?;
    let mut acc = Matrix::zeros(views.dim(), views.dim());
    for v in views.views() {
        acc = acc.add(&joint.conjugate(v)?)?;
    }
    let estimate = acc.scale(1.0 / views.len() as f64);
    Ok(estimate.sub(reference)?.frobenius_norm_sq())
}

/// `E_M = ‖(1/M) Σ_i B_mvᵀ Σ̂_i B_mv − B_tᵀ Σ B_t‖_F²`, where `B_mv` is the
/// joint basis of the views and `B_t` the treelet basis of the truth.
pub fn compute_e_m(views: &ViewSet, truth: &Matrix, levels: usize) -> Result<f64> {
    if truth.shape() != (views.dim(), views.dim()) {
        return Err(Error::Dimension(format!(
            "truth is {}x{} but views are {}x{}",
            truth.rows(),
            truth.cols(),
            views.dim(),
            views.dim()
        )));
    }
    let reference = treelet_reference(truth, levels)?;
    e_m_against(views, &reference, levels)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceConfig {
    /// Graph family; its `noise_level` and `seed` are ignored here.
    #[serde(skip)]
    pub spec: KroneckerSpec,
    pub m_values: Vec<usize>,
    pub epsilon_values: Vec<f64>,
    pub collections: usize,
    pub levels: usize,
    pub master_seed: u64,
}

impl ConvergenceConfig {
    fn validate(&self) -> Result<()> {
        if self.collections < 2 {
            return Err(Error::Parameter("need at least 2 collections".into()));
        }
        if self.m_values.is_empty() || self.m_values.contains(&0) {
            return Err(Error::Parameter("view counts must be non-empty and positive".into()));
        }
        if self.epsilon_values.is_empty() || self.epsilon_values.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::Parameter("noise levels must be non-empty, finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub epsilon: f64,
    pub m: usize,
    pub e_m_mean: f64,
    /// Standard deviation across collections (the stability statistic).
    pub e_m_std: f64,
    pub per_collection_e_m: Vec<f64>,
}

/// Bootstrap `E_M` over independent collections for every `(ε, M)`.
pub fn convergence_experiment(config: &ConvergenceConfig) -> Result<Vec<ConvergenceRecord>> {
    config.validate()?;
    let truth = config.spec.truth()?;
    let reference = treelet_reference(&truth, config.levels)?;

    let mut records = Vec::new();
    for (ei, &eps) in config.epsilon_values.iter().enumerate() {
        for (mi, &m) in config.m_values.iter().enumerate() {
            let per_collection = (0..config.collections)
                .into_par_iter()
                .map(|c| {
                    let seed = derive_seed(config.master_seed, &[ei as u64, mi as u64, c as u64]);
                    let views = generate_views_from(&truth, eps, seed, m)?;
                    e_m_against(&views, &reference, config.levels)
                })
                .collect::<Result<Vec<_>>>()?;
            records.push(ConvergenceRecord {
                epsilon: eps,
                m,
                e_m_mean: mean(&per_collection),
                e_m_std: sample_std(&per_collection),
                per_collection_e_m: per_collection,
            });
        }
    }
    Ok(records)
}

/// Records grouped by noise level, in order of first appearance.
fn group_by_epsilon(records: &[ConvergenceRecord]) -> Vec<(f64, Vec<&ConvergenceRecord>)> {
    let mut groups: Vec<(f64, Vec<&ConvergenceRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(e, _)| *e == r.epsilon) {
            Some((_, g)) => g.push(r),
            None => groups.push((r.epsilon, vec![r])),
        }
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub epsilon: f64,
    /// `(M, std of E_M across collections)`.
    pub per_m_std: Vec<(usize, f64)>,
    /// Mean of the per-M standard deviations.
    pub stability: f64,
    /// Sample standard deviation of the per-M standard deviations.
    pub std_dev: f64,
}

pub fn stability_table(records: &[ConvergenceRecord]) -> Result<Vec<StabilityRow>> {
    if records.is_empty() {
        return Err(Error::Parameter("stability needs at least one record".into()));
    }
    Ok(group_by_epsilon(records)
        .into_iter()
        .map(|(epsilon, group)| {
            let per_m_std: Vec<(usize, f64)> = group.iter().map(|r| (r.m, r.e_m_std)).collect();
            let stds: Vec<f64> = per_m_std.iter().map(|&(_, s)| s).collect();
            StabilityRow {
                epsilon,
                per_m_std,
                stability: mean(&stds),
                std_dev: sample_std(&stds),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub epsilon: f64,
    pub rate: f64,
    pub bias: f64,
    /// RMS residual of the log-linear fit.
    pub fit_residual: f64,
    pub points_used: usize,
}

/// Fits `E_M ≈ A·e^{rM} + bias`.
///
/// The bias is the mean of the last quarter of the series; `r` is the
/// least-squares slope of `ln(E_M − bias)` against `M` over the remaining
/// points with `E_M − bias > RATE_FLOOR`. With fewer than two usable points
/// the rate is zero.
pub fn fit_rate(series: &[(f64, f64)], epsilon: f64) -> Result<RateFit> {
    if series.len() < 4 {
        return Err(Error::Parameter(format!(
            "rate fit needs at least 4 points, got {}",
            series.len()
        )));
    }
    if series.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Parameter("view counts must be strictly increasing".into()));
    }
    let tail = (series.len() / 4).max(1);
    let head = series.len() - tail;
    let bias = mean(&series[head..].iter().map(|&(_, e)| e).collect::<Vec<_>>()).max(0.0);

    let points: Vec<(f64, f64)> = series[..head]
        .iter()
        .filter(|&&(_, e)| e - bias > RATE_FLOOR)
        .map(|&(m, e)| (m, (e - bias).ln()))
        .collect();
    if points.len() < 2 {
        return Ok(RateFit {
            epsilon,
            rate: 0.0,
            bias,
            fit_residual: 0.0,
            points_used: points.len(),
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let rate = sxy / sxx;
    let intercept = my - rate * mx;
    let rss: f64 = points
        .iter()
        .map(|p| (p.1 - (intercept + rate * p.0)).powi(2))
        .sum();
    Ok(RateFit {
        epsilon,
        rate,
        bias,
        fit_residual: (rss / n).sqrt(),
        points_used: points.len(),
    })
}

/// One rate fit per noise level of a convergence run.
pub fn fit_rates(records: &[ConvergenceRecord]) -> Result<Vec<RateFit>> {
    group_by_epsilon(records)
        .into_iter()
        .map(|(eps, group)| {
            let series: Vec<(f64, f64)> = group.iter().map(|r| (r.m as f64, r.e_m_mean)).collect();
            fit_rate(&series, eps)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Single- versus multi-view denoising

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenoiseTrial {
    pub trial: usize,
    pub mean_single_error: f64,
    pub mean_multi_error: f64,
    /// `mean_single_error − mean_multi_error`; positive when the joint basis wins.
    pub difference: f64,
    /// Views for which nothing was significant, single / multi.
    pub empty_single: usize,
    pub empty_multi: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenoiseComparison {
    pub trials: Vec<DenoiseTrial>,
    pub mean_difference: f64,
}

/// Per trial: denoise each view with its own treelet basis and with the
/// joint basis of all views, and compare the mean errors against the truth.
pub fn single_vs_multi_denoise(
    spec: &KroneckerSpec,
    m: usize,
    trials: usize,
    q: f64,
    levels: usize,
) -> Result<DenoiseComparison> {
    if m < 2 {
        return Err(Error::Parameter("comparison needs at least 2 views".into()));
    }
    if trials == 0 {
        return Err(Error::Parameter("need at least one trial".into()));
    }
    let truth = spec.truth()?;
    let rows = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<DenoiseTrial> {
            let seed = derive_seed(spec.seed, &[trial as u64]);
            let views = generate_views_from(&truth, spec.noise_level, seed, m)?;
            let joint = mvtt_transform(&views, levels)?;
            let (mut single, mut multi) = (Vec::with_capacity(m), Vec::with_capacity(m));
            let (mut empty_single, mut empty_multi) = (0, 0);
            for v in views.views() {
                let own = treelet_transform(v, levels)?;
                let s = denoise_detailed(v, &own, q)?;
                let j = denoise_detailed(v, &joint, q)?;
                empty_single += usize::from(s.fdr.nothing_significant());
                empty_multi += usize::from(j.fdr.nothing_significant());
                single.push(denoise_error(&truth, &s.denoised)?);
                multi.push(denoise_error(&truth, &j.denoised)?);
            }
            let (ms, mm) = (mean(&single), mean(&multi));
            Ok(DenoiseTrial {
                trial,
                mean_single_error: ms,
                mean_multi_error: mm,
                difference: ms - mm,
                empty_single,
                empty_multi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let diffs: Vec<f64> = rows.iter().map(|r| r.difference).collect();
    Ok(DenoiseComparison {
        mean_difference: mean(&diffs),
        trials: rows,
    })
}

// ---------------------------------------------------------------------------
// SRM reconstruction sweep

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: usize,
    /// `‖X − W₁S‖_F²` for the first copy.
    pub error: f64,
    pub relative_error: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SrmSweep {
    pub rows: Vec<SweepRow>,
    /// Reconstruction of the first copy at each `K`.
    pub reconstructions: Vec<Matrix>,
}

/// Fits the shared response model on `copies` copies of `truth` at each rank.
pub fn srm_reconstruction_sweep(
    truth: &Matrix,
    k_values: &[usize],
    copies: usize,
    max_iters: usize,
) -> Result<SrmSweep> {
    if copies == 0 {
        return Err(Error::Parameter("need at least one copy".into()));
    }
    if let Some(&bad) = k_values.iter().find(|&&k| k == 0 || k > truth.rows()) {
        return Err(Error::Parameter(format!(
            "rank {bad} outside 1..={}",
            truth.rows()
        )));
    }
    let views = vec![truth.clone(); copies];
    let norm = truth.frobenius_norm_sq();
    let fits = k_values
        .par_iter()
        .map(|&k| -> Result<(SweepRow, Matrix)> {
            let model = srm_fit_matrices(&views, k, max_iters, DEFAULT_TOL, 0)?;
            let recon = srm_reconstruct(&model, 0)?;
            let error = truth.sub(&recon)?.frobenius_norm_sq();
            Ok((
                SweepRow {
                    k,
                    error,
                    relative_error: if norm > 0.0 { (error / norm).sqrt() } else { 0.0 },
                    iterations: model.objective_trace.len(),
                },
                recon,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, reconstructions) = fits.into_iter().unzip();
    Ok(SrmSweep { rows, reconstructions })
}

// ---------------------------------------------------------------------------
// Shared response

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseSpace {
    /// Correlate group means of denoised reconstructions.
    Feature,
    /// Correlate group means of thresholded basis coefficients.
    Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseMethod {
    Mvtt,
    Srm,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharedResponseConfig {
    pub group_split_seed: u64,
    pub partitions: usize,
    pub fdr_q: f64,
    pub space: ResponseSpace,
    pub method: ResponseMethod,
    pub levels: usize,
    /// SRM rank; `None` means the full dimension.
    pub srm_rank: Option<usize>,
    pub srm_max_iters: usize,
}

impl SharedResponseConfig {
    pub fn new(method: ResponseMethod, space: ResponseSpace, group_split_seed: u64, levels: usize) -> Self {
        Self {
            group_split_seed,
            partitions: 5,
            fdr_q: 0.01,
            space,
            method,
            levels,
            srm_rank: None,
            srm_max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharedResponseResult {
    pub method: ResponseMethod,
    pub space: ResponseSpace,
    /// `None` where a group representation was constant (typically because
    /// every test view in the group denoised to zero).
    pub per_partition: Vec<Option<f64>>,
    /// Mean over the defined partitions; `None` if there are none.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Views (over all partitions) whose denoising kept nothing.
    pub empty_denoise_count: usize,
}

/// Group-level representation of the test views: (feature, label) means.
struct GroupRepresentation {
    feature: Matrix,
    label: Matrix,
    empty: usize,
}

fn mean_of(mats: &[Matrix]) -> Result<Matrix> {
    let mut acc = Matrix::zeros(mats[0].rows(), mats[0].cols());
    for m in mats {
        acc = acc.add(m)?;
    }
    Ok(acc.scale(1.0 / mats.len() as f64))
}

/// Denoises each test view in its own basis and averages within the group.
fn represent(tests: &[&Matrix], bases: &[TreeletBasis], q: f64) -> Result<GroupRepresentation> {
    let mut features = Vec::with_capacity(tests.len());
    let mut labels = Vec::with_capacity(tests.len());
    let mut empty = 0;
    for (x, b) in tests.iter().zip(bases) {
        let out = denoise_detailed(x, b, q)?;
        empty += usize::from(out.fdr.nothing_significant());
        features.push(out.denoised);
        labels.push(out.coefficients);
    }
    Ok(GroupRepresentation {
        feature: mean_of(&features)?,
        label: mean_of(&labels)?,
        empty,
    })
}

fn partition_groups(m: usize, seed: u64, partition: usize) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = stream_rng(derive_seed(seed, &[partition as u64]), 0);
    order.shuffle(&mut rng);
    let g2 = order.split_off(m / 2);
    let mut g1 = order;
    g1.sort_unstable();
    let mut g2 = g2;
    g2.sort_unstable();
    (g1, g2)
}

/// Cross-group correlation of registered, denoised test representations.
///
/// Subject `i` contributes `train.views()[i]` to basis fitting and
/// `test.views()[i]` to the correlation.
pub fn shared_response(train: &ViewSet, test: &ViewSet, config: &SharedResponseConfig) -> Result<SharedResponseResult> {
    let m = train.len();
    if m < 4 {
        return Err(Error::Parameter(format!("shared response needs at least 4 subjects, got {m}")));
    }
    if test.len() != m || test.dim() != train.dim() {
        return Err(Error::Dimension("train and test sets must have matching subjects and shapes".into()));
    }
    if config.partitions == 0 {
        return Err(Error::Parameter("need at least one partition".into()));
    }
    let p = train.dim();

    let outcomes = (0..config.partitions)
        .into_par_iter()
        .map(|part| -> Result<(Option<f64>, usize)> {
            let (g1, g2) = partition_groups(m, config.group_split_seed, part);
            let tests1: Vec<&Matrix> = g1.iter().map(|&i| &test.views()[i]).collect();
            let tests2: Vec<&Matrix> = g2.iter().map(|&i| &test.views()[i]).collect();

            let (rep1, rep2) = match config.method {
                ResponseMethod::None => {
                    let a = mean_of(&tests1.iter().map(|&x| x.clone()).collect::<Vec<_>>())?;
                    let b = mean_of(&tests2.iter().map(|&x| x.clone()).collect::<Vec<_>>())?;
                    (
                        GroupRepresentation { feature: a.clone(), label: a, empty: 0 },
                        GroupRepresentation { feature: b.clone(), label: b, empty: 0 },
                    )
                }
                ResponseMethod::Mvtt => {
                    let q1 = mvtt_transform(&train.select(&g1)?, config.levels)?;
                    let q2 = mvtt_transform(&train.select(&g2)?, config.levels)?;
                    let r = orthogonal_procrustes(&q2.basis, &q1.basis)?;
                    let q2 = TreeletBasis {
                        basis: r.matmul(&q2.basis)?,
                        ..q2
                    };
                    (
                        represent(&tests1, &vec![q1; g1.len()], config.fdr_q)?,
                        represent(&tests2, &vec![q2; g2.len()], config.fdr_q)?,
                    )
                }
                ResponseMethod::Srm => {
                    let k = config.srm_rank.unwrap_or(p);
                    let m1 = srm_fit(&train.select(&g1)?, k, config.srm_max_iters, DEFAULT_TOL, config.group_split_seed)?;
                    let m2 = srm_fit(&train.select(&g2)?, k, config.srm_max_iters, DEFAULT_TOL, config.group_split_seed)?;
                    // R·S₂ ≈ S₁; W₂ᵢ·Rᵀ keeps W₂ᵢS₂ unchanged after registration.
                    let r = orthogonal_procrustes(&m2.shared, &m1.shared)?;
                    let b1: Vec<TreeletBasis> = m1.bases.iter().cloned().map(TreeletBasis::from_matrix).collect();
                    let b2 = m2
                        .bases
                        .iter()
                        .map(|w| Ok(TreeletBasis::from_matrix(w.matmul(&r.transpose())?)))
                        .collect::<Result<Vec<_>>>()?;
                    (
                        represent(&tests1, &b1, config.fdr_q)?,
                        represent(&tests2, &b2, config.fdr_q)?,
                    )
                }
            };
            let corr = match config.space {
                ResponseSpace::Feature => pearson_correlation(&rep1.feature, &rep2.feature),
                ResponseSpace::Label => pearson_correlation(&rep1.label, &rep2.label),
            };
            let corr = match corr {
                Ok(c) => Some(c),
                Err(Error::UndefinedCorrelation(_)) => None,
                Err(e) => return Err(e),
            };
            Ok((corr, rep1.empty + rep2.empty))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_partition: Vec<Option<f64>> = outcomes.iter().map(|o| o.0).collect();
    let defined: Vec<f64> = per_partition.iter().flatten().copied().collect();
    Ok(SharedResponseResult {
        method: config.method,
        space: config.space,
        mean: (!defined.is_empty()).then(|| mean(&defined)),
        std: (!defined.is_empty()).then(|| sample_std(&defined)),
        empty_denoise_count: outcomes.iter().map(|o| o.1).sum(),
        per_partition,
    })
}
