//! End-to-end acceptance checks, one test per criterion.
//!
//! Each test prints a single `criterion N [PASS|FAIL]` line straight to the
//! process stdout (bypassing libtest capture) before asserting.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use mvtreelet::experiments::{
    compute_e_m, convergence_experiment, fit_rate, fit_rates, shared_response, single_vs_multi_denoise, spearman,
    srm_reconstruction_sweep, ConvergenceConfig, ConvergenceRecord, ResponseMethod, ResponseSpace,
    SharedResponseConfig,
};
use mvtreelet::linalg::JacobiRotation;
use mvtreelet::seed::{derive_seed, stream_rng};
use mvtreelet::synthgraph::{default_initiator, generate_views_from, kronecker_power};
use mvtreelet::{
    apply_rotation_symmetric, box_filter_coarsen, denoise_detailed, expand, fdr_threshold,
    generate_views, hard_threshold, mvtt_transform, off_diagonal_norm, srm_fit, srm_reconstruct,
    treelet_transform, KroneckerSpec, Matrix, ViewSet,
};
use rand::Rng;
use rand_distr::StandardNormal;

fn report(id: u32, title: &str, pass: bool, elapsed: Duration, detail: &str) {
    let line = format!(
        "criterion {id:>2} [{}] {title} ({:.2}s): {detail}\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal)).unwrap()
}

fn random_spd(p: usize, rng: &mut impl Rng) -> Matrix {
    let g = gaussian(p, p, rng);
    g.matmul(&g.transpose()).unwrap().add(&Matrix::identity(p).scale(0.1)).unwrap().symmetrized()
}

#[test]
fn criterion_01_single_view_reduction() {
    let start = Instant::now();
    let mut rng = stream_rng(101, 0);
    let mut mismatches = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = random_spd(12, &mut rng);
        let single = treelet_transform(&s, 6).unwrap();
        let joint = mvtt_transform(&ViewSet::new(vec![s]).unwrap(), 6).unwrap();
        if single.rotations.len() != joint.rotations.len() {
            mismatches += 1;
            continue;
        }
        for (a, b) in single.rotations.iter().zip(&joint.rotations) {
            if (a.level, a.j, a.k) != (b.level, b.j, b.k) {
                mismatches += 1;
            }
            worst = worst.max((a.c - b.c).abs()).max((a.s - b.s).abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && worst <= 1e-10 && elapsed < Duration::from_secs(5);
    report(
        1,
        "M=1 reduction oracle",
        pass,
        elapsed,
        &format!("log mismatches {mismatches}, max |Δc|,|Δs| {worst:.2e}"),
    );
    assert!(pass);
}

/// Summed off-norm after rotating every view at `(j, k)` by angle `theta`.
fn summed_off(views: &[Matrix], j: usize, k: usize, c: f64, s: f64) -> f64 {
    let rot = JacobiRotation { j, k, c, s, level: 0 };
    views
        .iter()
        .map(|v| off_diagonal_norm(&apply_rotation_symmetric(v, &rot).unwrap()))
        .sum()
}

#[test]
fn criterion_02_joint_angle_optimality() {
    let start = Instant::now();
    let mut rng = stream_rng(202, 0);
    let grid: Vec<(f64, f64)> = (0..10_000)
        .map(|n| {
            let theta = -FRAC_PI_4 + (n + 1) as f64 * (2.0 * FRAC_PI_4) / 10_000.0;
            (theta.cos(), theta.sin())
        })
        .collect();
    let mut violations = 0;
    let mut checks = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for inst in 0..200 {
        let m = [2, 3, 5][inst % 3];
        let p = [4, 8][(inst / 3) % 2];
        let mut views: Vec<Matrix> = (0..m).map(|_| random_spd(p, &mut rng)).collect();
        let basis = mvtt_transform(&ViewSet::new(views.clone()).unwrap(), p - 1).unwrap();
        // replay the levels, checking each chosen rotation against the grid
        for rot in &basis.rotations {
            let closed = summed_off(&views, rot.j, rot.k, rot.c, rot.s);
            let best = grid
                .iter()
                .map(|&(c, s)| summed_off(&views, rot.j, rot.k, c, s))
                .fold(f64::INFINITY, f64::min);
            let excess = (closed - best) / best.max(f64::MIN_POSITIVE);
            worst_excess = worst_excess.max(excess);
            if closed > best + 1e-8 * best {
                violations += 1;
            }
            checks += 1;
            for v in views.iter_mut() {
                *v = apply_rotation_symmetric(v, rot).unwrap();
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = violations == 0 && elapsed < Duration::from_secs(30);
    report(
        2,
        "joint-angle optimality",
        pass,
        elapsed,
        &format!("{checks} levels checked, {violations} above grid minimum, worst relative excess {worst_excess:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_noise_free_convergence() {
    let start = Instant::now();
    let spec = KroneckerSpec::default_with(0.0, 303).unwrap();
    let truth = spec.truth().unwrap();
    let values: Vec<(usize, f64)> = [1, 5, 20]
        .iter()
        .map(|&m| (m, compute_e_m(&generate_views(&spec, m).unwrap(), &truth, 40).unwrap()))
        .collect();
    let elapsed = start.elapsed();
    let pass = values.iter().all(|&(_, e)| e < 1e-10) && elapsed < Duration::from_secs(20);
    report(3, "noise-free convergence", pass, elapsed, &format!("E_M by M: {values:?}"));
    assert!(pass);
}

struct ConvergenceRun {
    records: Vec<ConvergenceRecord>,
    elapsed: Duration,
}

fn convergence_run() -> &'static ConvergenceRun {
    static RUN: OnceLock<ConvergenceRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let config = ConvergenceConfig {
            spec: KroneckerSpec::default_with(0.0, 0).unwrap(),
            m_values: vec![1, 2, 5, 10, 25],
            epsilon_values: vec![0.1, 0.3, 0.5],
            collections: 10,
            levels: 40,
            master_seed: 404,
        };
        let records = convergence_experiment(&config).unwrap();
        ConvergenceRun { records, elapsed: start.elapsed() }
    })
}

#[test]
fn criterion_04_convergence_trend() {
    let run = convergence_run();
    let mut by_eps: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &run.records {
        by_eps.entry(format!("{}", r.epsilon)).or_default().push((r.m as f64, r.e_m_mean));
    }
    let mut pass = run.elapsed < Duration::from_secs(600);
    let mut detail = Vec::new();
    for (eps, series) in &by_eps {
        let (ms, es): (Vec<f64>, Vec<f64>) = series.iter().copied().unzip();
        let rho = spearman(&ms, &es).unwrap();
        let first = es[0];
        let last = *es.last().unwrap();
        pass &= rho <= -0.8 && last < first;
        detail.push(format!("ε={eps}: ρ={rho:.3}, E(1)={first:.2}, E(25)={last:.2}"));
    }
    report(4, "convergence trend", pass, run.elapsed, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_05_rate_fit() {
    let start = Instant::now();
    let series: Vec<(f64, f64)> = (1..=40).map(|m| (m as f64, (-0.2 * m as f64).exp() + 0.05)).collect();
    let fit = fit_rate(&series, 0.0).unwrap();
    let synthetic_ok = (-0.22..=-0.18).contains(&fit.rate) && (0.04..=0.06).contains(&fit.bias);

    let rates = fit_rates(&convergence_run().records).unwrap();
    let decreasing = rates.windows(2).all(|w| w[1].rate < w[0].rate);
    let elapsed = start.elapsed();
    let pass = synthetic_ok && decreasing && elapsed < Duration::from_secs(1);
    let fitted: Vec<String> = rates.iter().map(|r| format!("r({})={:.4}", r.epsilon, r.rate)).collect();
    report(
        5,
        "rate-fit recovery",
        pass,
        elapsed,
        &format!("synthetic r={:.4} bias={:.4}; {}", fit.rate, fit.bias, fitted.join(", ")),
    );
    assert!(pass);
}

#[test]
fn criterion_06_kronecker_identities() {
    let start = Instant::now();
    let a0 = default_initiator();
    let big = kronecker_power(&a0, 3).unwrap();
    let mut worst: f64 = 0.0;
    for r in 0..81 {
        for c in 0..81 {
            let digits = |x: usize| [x / 27, (x / 9) % 3, (x / 3) % 3, x % 3];
            let (dr, dc) = (digits(r), digits(c));
            let expected: f64 = (0..4).map(|i| a0[(dr[i], dc[i])]).product();
            worst = worst.max((big[(r, c)] - expected).abs());
        }
    }
    let coarse = box_filter_coarsen(&big).unwrap();
    let expected = kronecker_power(&a0, 2).unwrap().scale(a0.mean());
    let coarse_err = coarse
        .as_slice()
        .iter()
        .zip(expected.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let pass = big.shape() == (81, 81) && worst < 1e-12 && coarse_err < 1e-12 && elapsed < Duration::from_secs(1);
    report(
        6,
        "Kronecker and coarsening identities",
        pass,
        elapsed,
        &format!("index oracle max error {worst:.1e}, coarsening max error {coarse_err:.1e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_fdr_behavior() {
    let start = Instant::now();
    let bh = fdr_threshold(&[0.001, 0.2, 0.8], &[5.0, -1.0, 0.1], 0.05).unwrap();
    let bh_ok = bh.rejected_count == 1 && bh.threshold == 5.0;

    let mut rng = stream_rng(707, 0);
    let s = random_spd(16, &mut rng);
    let basis = treelet_transform(&s, 10).unwrap();
    let x = gaussian(16, 16, &mut rng);
    let coeffs = expand(&x, &basis).unwrap();
    let round_trip = hard_threshold(&coeffs, 0.0).unwrap().reconstruct().sub(&x).unwrap().frobenius_norm();

    let spec = KroneckerSpec::default_with(0.0, 707).unwrap();
    let truth = spec.truth().unwrap();
    let own = mvtt_transform(&ViewSet::new(vec![truth.clone()]).unwrap(), 40).unwrap();
    let out = denoise_detailed(&truth, &own, 0.015).unwrap();
    let relative = out.denoised.sub(&truth).unwrap().frobenius_norm() / truth.frobenius_norm();

    let elapsed = start.elapsed();
    let pass = bh_ok && round_trip < 1e-10 && relative < 0.05 && elapsed < Duration::from_secs(5);
    report(
        7,
        "FDR unit behavior",
        pass,
        elapsed,
        &format!(
            "BH example ok={bh_ok}; threshold-0 round trip {round_trip:.1e}; noise-free relative error {relative:.4} ({} of {} coefficients kept)",
            out.fdr.rejected_count,
            truth.rows() * truth.cols()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_multi_view_denoising() {
    let start = Instant::now();
    let spec = KroneckerSpec::default_with(0.4, 808).unwrap();
    let cmp = single_vs_multi_denoise(&spec, 20, 5, 0.015, 40).unwrap();
    let wins = cmp.trials.iter().filter(|t| t.difference > 0.0).count();
    let elapsed = start.elapsed();
    let pass = wins >= 4 && elapsed < Duration::from_secs(300);
    let diffs: Vec<String> = cmp.trials.iter().map(|t| format!("{:.3}", t.difference)).collect();
    report(
        8,
        "multi-view beats single-view denoising",
        pass,
        elapsed,
        &format!("{wins}/5 trials positive, differences [{}]", diffs.join(", ")),
    );
    assert!(pass);
}

#[test]
fn criterion_09_srm_baseline() {
    let start = Instant::now();
    let mut rng = stream_rng(909, 0);
    let mut bad_traces = 0;
    for _ in 0..50 {
        let m = rng.random_range(1..=4);
        let p = rng.random_range(3..=10);
        let k = rng.random_range(1..=p);
        let views: Vec<Matrix> = (0..m).map(|_| gaussian(p, p, &mut rng).symmetrized()).collect();
        let model = srm_fit(&ViewSet::new(views).unwrap(), k, 200, 1e-10, 0).unwrap();
        if model.objective_trace.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12) + 1e-12) {
            bad_traces += 1;
        }
    }

    let x = gaussian(10, 10, &mut rng).symmetrized();
    let model = srm_fit(&ViewSet::new(vec![x.clone()]).unwrap(), 10, 100, 1e-12, 0).unwrap();
    let full_err = srm_reconstruct(&model, 0).unwrap().sub(&x).unwrap().frobenius_norm_sq();

    let truth = KroneckerSpec::default_with(0.0, 0).unwrap().truth().unwrap();
    let ks: Vec<usize> = (1..=9).map(|i| 9 * i).collect();
    let sweep = srm_reconstruction_sweep(&truth, &ks, 1, 500).unwrap();
    let errors: Vec<f64> = sweep.rows.iter().map(|r| r.error).collect();
    let sweep_ok = errors.windows(2).all(|w| w[1] <= w[0] + 1e-9);

    let elapsed = start.elapsed();
    let pass = bad_traces == 0 && full_err < 1e-8 && sweep_ok && elapsed < Duration::from_secs(120);
    report(
        9,
        "SRM baseline",
        pass,
        elapsed,
        &format!(
            "{bad_traces}/50 traces increased; full-rank error {full_err:.1e}; sweep errors {:?}",
            errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_shared_response_ordering() {
    let start = Instant::now();
    let seed = 1010;
    let truth = KroneckerSpec::default_with(0.3, seed).unwrap().truth().unwrap();
    let train = generate_views_from(&truth, 0.3, derive_seed(seed, &[0]), 20).unwrap();
    let test = generate_views_from(&truth, 0.3, derive_seed(seed, &[1]), 20).unwrap();
    let run = |method| {
        let mut cfg = SharedResponseConfig::new(method, ResponseSpace::Feature, seed, 40);
        cfg.partitions = 5;
        cfg.fdr_q = 0.01;
        shared_response(&train, &test, &cfg).unwrap()
    };
    let mvtt = run(ResponseMethod::Mvtt);
    let none = run(ResponseMethod::None);
    let wins = mvtt
        .per_partition
        .iter()
        .zip(&none.per_partition)
        .filter(|(a, b)| matches!((a, b), (Some(a), Some(b)) if a > b))
        .count();
    let elapsed = start.elapsed();
    let pass = wins >= 4 && elapsed < Duration::from_secs(300);
    let fmt = |v: &[Option<f64>]| {
        v.iter()
            .map(|c| c.map_or("undefined".to_string(), |c| format!("{c:.3}")))
            .collect::<Vec<_>>()
            .join(", ")
    };
    report(
        10,
        "shared-response ordering",
        pass,
        elapsed,
        &format!(
            "mvtt > none in {wins}/5 partitions; mvtt [{}], none [{}], {} empty denoisings",
            fmt(&mvtt.per_partition),
            fmt(&none.per_partition),
            mvtt.empty_denoise_count
        ),
    );
    assert!(pass);
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mvtreelet")
}

/// Runs the CLI in `dir` and returns every output file keyed by name.
fn run_in(dir: &Path, args: &[String]) -> BTreeMap<String, Vec<u8>> {
    let status = Command::new(bin())
        .args(args)
        .args(["--output", "out"])
        .current_dir(dir)
        .env("MVTREELET_THREADS", "2")
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir.join("out")).unwrap() {
        let path = entry.unwrap().path();
        files.insert(
            path.file_name().unwrap().to_string_lossy().into_owned(),
            std::fs::read(&path).unwrap(),
        );
    }
    files
}

#[test]
fn criterion_11_cli_determinism() {
    let start = Instant::now();
    let shared = tempfile::tempdir().unwrap();
    let input: PathBuf = shared.path().join("graph.csv");
    let graph = kronecker_power(&default_initiator(), 2).unwrap();
    std::fs::write(&input, mvtreelet_cli::io::render_matrix(&graph).unwrap()).unwrap();
    let input = input.display().to_string();

    let commands: Vec<Vec<&str>> = vec![
        vec!["generate", "--seed", "5", "--power", "2", "--epsilon", "0.3", "--views", "3"],
        vec!["treelet", "--input", &input],
        vec!["mvtt", "--seed", "5", "--power", "2", "--views", "3"],
        vec!["denoise", "--seed", "5", "--power", "2", "--views", "3", "--epsilon", "0.1"],
        vec!["denoise", "--seed", "5", "--power", "2", "--views", "2", "--basis", "treelet"],
        vec!["srm", "--seed", "5", "--power", "2", "--views", "3", "--rank", "9"],
        vec!["convergence", "--seed", "5", "--power", "2", "--views", "1,2,3,4", "--collections", "3"],
        vec!["stability", "--seed", "5", "--power", "2", "--views", "1,2,3,4", "--collections", "3"],
        vec!["rate", "--seed", "5", "--power", "2", "--views", "1,2,3,4", "--collections", "3"],
        vec!["compare-denoise", "--seed", "5", "--power", "2", "--views", "3", "--trials", "2"],
        vec!["srm-sweep", "--power", "2", "--rank", "3,9,27"],
        vec!["shared-response", "--seed", "5", "--power", "2", "--views", "6", "--partitions", "2"],
        vec!["coarsen", "--input", &input, "--steps", "2"],
        vec!["metrics", "--input", &input, "--edge-threshold", "0.05"],
    ];
    let mut differing = Vec::new();
    let mut total_files = 0;
    for cmd in &commands {
        let args: Vec<String> = cmd.iter().map(|s| s.to_string()).collect();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let first = run_in(a.path(), &args);
        let second = run_in(b.path(), &args);
        total_files += first.len();
        if first != second || !first.contains_key("result.json") {
            differing.push(cmd[0]);
        }
    }
    let elapsed = start.elapsed();
    let pass = differing.is_empty();
    report(
        11,
        "CLI determinism",
        pass,
        elapsed,
        &format!("{} invocations, {total_files} files compared, differing: {differing:?}", commands.len()),
    );
    assert!(pass);
}
