use std::fs;
use std::path::{Path, PathBuf};

use mvtreelet::experiments::{
    convergence_experiment, fit_rates, shared_response, single_vs_multi_denoise, srm_reconstruction_sweep,
    stability_table, ConvergenceConfig, ConvergenceRecord, ResponseMethod, ResponseSpace, SharedResponseConfig,
};
use mvtreelet::seed::derive_seed;
use mvtreelet::synthgraph::{default_initiator, generate_views_from, graph_metrics};
use mvtreelet::{
    box_filter_coarsen, default_levels, denoise_detailed, denoise_error, generate_views, mvtt_transform,
    off_diagonal_norm, srm_fit, srm_reconstruct, treelet_transform, KroneckerSpec, Matrix, TreeletBasis, ViewSet,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::io::{expand_inputs, heatmap_bytes, read_matrix, render_matrix};

/// Everything a command produces, assembled in memory before anything is written.
#[derive(Debug)]
pub struct Report {
    pub command: &'static str,
    pub output: PathBuf,
    pub config: Value,
    pub results: Value,
    pub warnings: Vec<String>,
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl Report {
    fn new(command: &'static str, output: &Path) -> Self {
        Self {
            command,
            output: output.to_path_buf(),
            config: Value::Null,
            results: Value::Null,
            warnings: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn matrix(&mut self, stem: &str, m: &Matrix) -> CliResult<()> {
        self.artifacts.push((format!("{stem}.csv"), render_matrix(m)?.into_bytes()));
        self.artifacts.push((format!("{stem}.pgm"), heatmap_bytes(m)?));
        Ok(())
    }

    fn csv_only(&mut self, stem: &str, m: &Matrix) -> CliResult<()> {
        self.artifacts.push((format!("{stem}.csv"), render_matrix(m)?.into_bytes()));
        Ok(())
    }

    fn table(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.artifacts.push((name.to_string(), text.into_bytes()));
    }

    pub fn to_json(&self) -> Value {
        json!({
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "warnings": self.warnings,
            "artifacts": self.artifacts.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        })
    }

    /// Writes the artifacts and `result.json` into the output directory.
    pub fn write(&self) -> CliResult<()> {
        fs::create_dir_all(&self.output).map_err(|e| CliError::io(&self.output, e))?;
        for (name, bytes) in &self.artifacts {
            let path = self.output.join(name);
            fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        }
        let path = self.output.join("result.json");
        let mut text = serde_json::to_string_pretty(&self.to_json()).expect("json values serialize");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result types serialize")
}

fn require_seed(command: &'static str, seed: Option<u64>) -> CliResult<u64> {
    seed.ok_or(CliError::MissingSeed(command))
}

fn paths_json(paths: &[PathBuf]) -> Value {
    json!(paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>())
}

fn matrix_rows(m: &Matrix) -> Value {
    json!((0..m.rows()).map(|r| m.row(r).to_vec()).collect::<Vec<_>>())
}

fn initiator(g: &GraphArgs) -> CliResult<Matrix> {
    match &g.initiator {
        Some(path) => read_matrix(path),
        None => Ok(default_initiator()),
    }
}

fn graph_spec(g: &GraphArgs, epsilon: f64, seed: u64) -> CliResult<(KroneckerSpec, Value)> {
    let init = initiator(g)?;
    let echo = json!({
        "initiator": g.initiator.as_ref().map(|p| p.display().to_string()),
        "initiator_matrix": matrix_rows(&init),
        "power": g.power,
    });
    Ok((KroneckerSpec::new(init, g.power, epsilon, seed)?, echo))
}

fn read_all(paths: &[PathBuf]) -> CliResult<(Vec<Matrix>, Vec<PathBuf>)> {
    let files = expand_inputs(paths)?;
    let mats = files.iter().map(|f| read_matrix(f)).collect::<CliResult<Vec<_>>>()?;
    Ok((mats, files))
}

fn levels_for(levels: Option<usize>, p: usize) -> usize {
    levels.unwrap_or_else(|| default_levels(p))
}

/// Views from files, or generated noisy copies of the Kronecker graph (with its truth).
fn load_views(command: &'static str, a: &ViewArgs) -> CliResult<(ViewSet, Option<Matrix>, Value)> {
    if !a.input.is_empty() {
        let (mats, files) = read_all(&a.input)?;
        let views = ViewSet::new(mats)?;
        let echo = json!({ "source": "files", "input": paths_json(&files), "seed": a.seed });
        return Ok((views, None, echo));
    }
    let seed = require_seed(command, a.seed)?;
    let (spec, graph) = graph_spec(&a.graph, a.epsilon, seed)?;
    let views = generate_views(&spec, a.views)?;
    let echo = json!({
        "source": "generated",
        "graph": graph,
        "seed": seed,
        "epsilon": a.epsilon,
        "views": a.views,
    });
    Ok((views, Some(spec.truth()?), echo))
}

fn upper_noise_std(noisy: &Matrix, truth: &Matrix) -> f64 {
    let p = truth.rows();
    let diffs: Vec<f64> = (0..p)
        .flat_map(|j| (j..p).map(move |k| (j, k)))
        .map(|(j, k)| noisy[(j, k)] - truth[(j, k)])
        .collect();
    mvtreelet::experiments::sample_std(&diffs)
}

pub fn run(cli: &Cli) -> CliResult<Report> {
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Treelet(a) => treelet(a),
        Command::Mvtt(a) => mvtt(a),
        Command::Denoise(a) => denoise(a),
        Command::Srm(a) => srm(a),
        Command::Convergence(a) => convergence(a, "convergence"),
        Command::Stability(a) => convergence(a, "stability"),
        Command::Rate(a) => convergence(a, "rate"),
        Command::CompareDenoise(a) => compare_denoise(a),
        Command::SrmSweep(a) => srm_sweep(a),
        Command::SharedResponse(a) => shared(a),
        Command::Coarsen(a) => coarsen(a),
        Command::Metrics(a) => metrics(a),
    }
}

fn generate(a: &GenerateArgs) -> CliResult<Report> {
    let mut r = Report::new("generate", &a.output.output);
    let seed = require_seed("generate", a.seed)?;
    let (spec, graph) = graph_spec(&a.graph, a.epsilon, seed)?;
    let truth = spec.truth()?;
    let views = generate_views(&spec, a.views)?;
    r.config = json!({
        "output": a.output.output.display().to_string(),
        "graph": graph,
        "seed": seed,
        "epsilon": a.epsilon,
        "views": a.views,
        "edge_threshold": a.edge_threshold,
    });
    r.matrix("truth", &truth)?;
    let mut per_view = Vec::new();
    for (i, v) in views.views().iter().enumerate() {
        r.matrix(&format!("view_{i:03}"), v)?;
        per_view.push(json!({
            "index": i,
            "metrics": to_value(&graph_metrics(v, a.edge_threshold)?),
            "noise_std": upper_noise_std(v, &truth),
        }));
    }
    r.results = json!({
        "dimension": truth.rows(),
        "truth_metrics": to_value(&graph_metrics(&truth, a.edge_threshold)?),
        "views": per_view,
    });
    Ok(r)
}

fn basis_summary(b: &TreeletBasis) -> Value {
    let mut v = to_value(b);
    v["orthogonality_error"] = json!(b.orthogonality_error());
    v
}

fn treelet(a: &TreeletArgs) -> CliResult<Report> {
    let mut r = Report::new("treelet", &a.output.output);
    let sigma = read_matrix(&a.input)?;
    let levels = levels_for(a.levels, sigma.rows());
    r.config = json!({
        "output": a.output.output.display().to_string(),
        "input": a.input.display().to_string(),
        "levels": levels,
    });
    let b = treelet_transform(&sigma, levels)?;
    let rotated = b.conjugate(&sigma)?;
    r.matrix("basis", &b.basis)?;
    r.matrix("rotated", &rotated)?;
    r.results = json!({
        "basis": basis_summary(&b),
        "off_diagonal_norm_before": off_diagonal_norm(&sigma),
        "off_diagonal_norm_after": off_diagonal_norm(&rotated),
    });
    Ok(r)
}

fn mvtt(a: &ViewArgs) -> CliResult<Report> {
    let mut r = Report::new("mvtt", &a.output.output);
    let (views, truth, source) = load_views("mvtt", a)?;
    let levels = levels_for(a.levels, views.dim());
    r.config = json!({
        "output": a.output.output.display().to_string(),
        "views": source,
        "levels": levels,
    });
    let b = mvtt_transform(&views, levels)?;
    r.matrix("basis", &b.basis)?;
    let off: Vec<f64> = views
        .views()
        .iter()
        .map(|v| Ok(off_diagonal_norm(&b.conjugate(v)?)))
        .collect::<CliResult<_>>()?;
    let e_m = match &truth {
        Some(t) => Some(mvtreelet::experiments::compute_e_m(&views, t, levels)?),
        None => None,
    };
    r.results = json!({
        "basis": basis_summary(&b),
        "off_diagonal_norms": off,
        "e_m": e_m,
    });
    Ok(r)
}

fn denoise(a: &DenoiseArgs) -> CliResult<Report> {
    let mut r = Report::new("denoise", &a.views.output.output);
    let (views, truth, source) = load_views("denoise", &a.views)?;
    let reference = match &a.reference {
        Some(p) => Some(read_matrix(p)?),
        None => truth,
    };
    let levels = levels_for(a.views.levels, views.dim());
    r.config = json!({
        "output": a.views.output.output.display().to_string(),
        "views": source,
        "levels": levels,
        "fdr": a.fdr,
        "basis": match a.basis { BasisKind::Mvtt => "mvtt", BasisKind::Treelet => "treelet" },
        "reference": a.reference.as_ref().map(|p| p.display().to_string()),
        "edge_threshold": a.edge_threshold,
    });
    let joint = match a.basis {
        BasisKind::Mvtt => Some(mvtt_transform(&views, levels)?),
        BasisKind::Treelet => None,
    };
    let mut rows = Vec::new();
    for (i, x) in views.views().iter().enumerate() {
        let own;
        let basis = match &joint {
            Some(b) => b,
            None => {
                own = treelet_transform(x, levels)?;
                &own
            }
        };
        let out = denoise_detailed(x, basis, a.fdr)?;
        if out.fdr.nothing_significant() {
            r.warnings.push(format!("view {i}: no coefficient was significant; output is the zero matrix"));
        }
        r.matrix(&format!("denoised_{i:03}"), &out.denoised)?;
        let error = match &reference {
            Some(t) => Some(denoise_error(t, &out.denoised)?),
            None => None,
        };
        rows.push(json!({
            "index": i,
            "fdr": to_value(&out.fdr),
            "metrics": to_value(&graph_metrics(&out.denoised, a.edge_threshold)?),
            "error": error,
        }));
    }
    r.results = json!({ "views": rows });
    Ok(r)
}

fn srm(a: &SrmArgs) -> CliResult<Report> {
    let mut r = Report::new("srm", &a.views.output.output);
    let (views, _, source) = load_views("srm", &a.views)?;
    let k = a.rank.unwrap_or(views.dim());
    let seed = a.views.seed.unwrap_or(0);
    r.config = json!({
        "output": a.views.output.output.display().to_string(),
        "views": source,
        "rank": k,
        "max_iters": a.max_iters,
        "tol": a.tol,
    });
    let model = srm_fit(&views, k, a.max_iters, a.tol, seed)?;
    r.csv_only("shared", &model.shared)?;
    let mut errors = Vec::new();
    for (i, x) in views.views().iter().enumerate() {
        let recon = srm_reconstruct(&model, i)?;
        errors.push(x.sub(&recon)?.frobenius_norm_sq());
        r.csv_only(&format!("basis_{i:03}"), &model.bases[i])?;
        r.matrix(&format!("reconstruction_{i:03}"), &recon)?;
    }
    if model.objective_trace.len() == a.max_iters {
        r.warnings.push(format!("stopped after max_iters = {} without meeting the tolerance", a.max_iters));
    }
    r.results = json!({ "model": to_value(&model), "reconstruction_errors": errors });
    Ok(r)
}

fn run_convergence(a: &ConvergenceArgs, command: &'static str) -> CliResult<(Vec<ConvergenceRecord>, Value)> {
    let seed = require_seed(command, a.seed)?;
    let (spec, graph) = graph_spec(&a.graph, 0.0, seed)?;
    let p = spec.truth()?.rows();
    let config = ConvergenceConfig {
        spec,
        m_values: a.views.clone(),
        epsilon_values: a.epsilon.clone(),
        collections: a.collections,
        levels: levels_for(a.levels, p),
        master_seed: seed,
    };
    let echo = json!({
        "output": a.output.output.display().to_string(),
        "graph": graph,
        "seed": seed,
        "epsilon": a.epsilon,
        "views": a.views,
        "collections": a.collections,
        "levels": config.levels,
    });
    Ok((convergence_experiment(&config)?, echo))
}

fn convergence(a: &ConvergenceArgs, command: &'static str) -> CliResult<Report> {
    let mut r = Report::new(command, &a.output.output);
    let (records, echo) = run_convergence(a, command)?;
    r.config = echo;
    r.table(
        "convergence.csv",
        &["epsilon", "m", "e_m_mean", "e_m_std"],
        records
            .iter()
            .map(|x| vec![num(x.epsilon), x.m.to_string(), num(x.e_m_mean), num(x.e_m_std)])
            .collect(),
    );
    let mut results = json!({ "records": to_value(&records) });
    match command {
        "stability" => {
            let rows = stability_table(&records)?;
            r.table(
                "stability.csv",
                &["epsilon", "stability", "std_dev"],
                rows.iter().map(|s| vec![num(s.epsilon), num(s.stability), num(s.std_dev)]).collect(),
            );
            results["stability"] = to_value(&rows);
        }
        "rate" => {
            let fits = fit_rates(&records)?;
            for f in &fits {
                if f.points_used < 2 {
                    r.warnings.push(format!("epsilon {}: too few points above the bias; rate set to 0", f.epsilon));
                }
            }
            r.table(
                "rate.csv",
                &["epsilon", "rate", "bias", "fit_residual", "points_used"],
                fits.iter()
                    .map(|f| vec![num(f.epsilon), num(f.rate), num(f.bias), num(f.fit_residual), f.points_used.to_string()])
                    .collect(),
            );
            results["rates"] = to_value(&fits);
        }
        _ => {}
    }
    r.results = results;
    Ok(r)
}

fn compare_denoise(a: &CompareArgs) -> CliResult<Report> {
    let mut r = Report::new("compare-denoise", &a.output.output);
    let seed = require_seed("compare-denoise", a.seed)?;
    let (spec, graph) = graph_spec(&a.graph, a.epsilon, seed)?;
    let levels = levels_for(a.levels, spec.truth()?.rows());
    r.config = json!({
        "output": a.output.output.display().to_string(),
        "graph": graph,
        "seed": seed,
        "epsilon": a.epsilon,
        "views": a.views,
        "trials": a.trials,
        "fdr": a.fdr,
        "levels": levels,
    });
    let cmp = single_vs_multi_denoise(&spec, a.views, a.trials, a.fdr, levels)?;
    for t in &cmp.trials {
        if t.empty_single + t.empty_multi > 0 {
            r.warnings.push(format!(
                "trial {}: {} single-view and {} multi-view denoisings kept no coefficient",
                t.trial, t.empty_single, t.empty_multi
            ));
        }
    }
    r.table(
        "compare_denoise.csv",
        &["trial", "mean_single_error", "mean_multi_error", "difference"],
        cmp.trials
            .iter()
            .map(|t| vec![t.trial.to_string(), num(t.mean_single_error), num(t.mean_multi_error), num(t.difference)])
            .collect(),
    );
    r.results = to_value(&cmp);
    Ok(r)
}

fn default_ranks(p: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = (1..=9).map(|i| (i * p).div_ceil(9)).filter(|&k| k > 0).collect();
    ks.dedup();
    ks
}

fn srm_sweep(a: &SweepArgs) -> CliResult<Report> {
    let mut r = Report::new("srm-sweep", &a.output.output);
    let (truth, source) = match &a.input {
        Some(p) => (read_matrix(p)?, json!({ "source": "file", "input": p.display().to_string() })),
        None => {
            let (spec, graph) = graph_spec(&a.graph, 0.0, 0)?;
            (spec.truth()?, json!({ "source": "generated", "graph": graph }))
        }
    };
    let ranks = if a.rank.is_empty() { default_ranks(truth.rows()) } else { a.rank.clone() };
    r.config = json!({
        "output": a.output.output.display().to_string(),
        "matrix": source,
        "rank": ranks,
        "views": a.views,
        "max_iters": a.max_iters,
    });
    let sweep = srm_reconstruction_sweep(&truth, &ranks, a.views, a.max_iters)?;
    for (row, recon) in sweep.rows.iter().zip(&sweep.reconstructions) {
        r.matrix(&format!("reconstruction_k{:03}", row.k), recon)?;
    }
    r.table(
        "srm_sweep.csv",
        &["k", "error", "relative_error", "iterations"],
        sweep
            .rows
            .iter()
            .map(|x| vec![x.k.to_string(), num(x.error), num(x.relative_error), x.iterations.to_string()])
            .collect(),
    );
    r.results = json!({ "rows": to_value(&sweep.rows) });
    Ok(r)
}

fn shared(a: &SharedResponseArgs) -> CliResult<Report> {
    let mut r = Report::new("shared-response", &a.output.output);
    let seed = require_seed("shared-response", a.seed)?;
    let (train, test, source) = if a.input.is_empty() && a.test_input.is_empty() {
        let (spec, graph) = graph_spec(&a.graph, a.epsilon, seed)?;
        let truth = spec.truth()?;
        let train = generate_views_from(&truth, a.epsilon, derive_seed(seed, &[0]), a.views)?;
        let test = generate_views_from(&truth, a.epsilon, derive_seed(seed, &[1]), a.views)?;
        let echo = json!({ "source": "generated", "graph": graph, "epsilon": a.epsilon, "views": a.views });
        (train, test, echo)
    } else {
        if a.input.is_empty() || a.test_input.is_empty() {
            return Err(CliError::Usage("--input and --test-input must be given together".into()));
        }
        let (train, train_files) = read_all(&a.input)?;
        let (test, test_files) = read_all(&a.test_input)?;
        let echo = json!({ "source": "files", "input": paths_json(&train_files), "test_input": paths_json(&test_files) });
        (ViewSet::new(train)?, ViewSet::new(test)?, echo)
    };
    let levels = levels_for(a.levels, train.dim());
    let methods: Vec<&str> = a.method.iter().map(|m| match m {
        MethodArg::Mvtt => "mvtt",
        MethodArg::Srm => "srm",
        MethodArg::None => "none",
    }).collect();
    let spaces: Vec<&str> = a.space.iter().map(|s| match s {
        SpaceArg::Feature => "feature",
        SpaceArg::Label => "label",
    }).collect();
    r.config = json!({
        "output": a.output.output.display().to_string(),
        "views": source,
        "seed": seed,
        "partitions": a.partitions,
        "fdr": a.fdr,
        "levels": levels,
        "method": methods,
        "space": spaces,
        "rank": a.rank,
        "max_iters": a.max_iters,
        "space_note": "feature = correlation of denoised reconstructions; label = correlation of thresholded coefficients",
    });

    let mut rows = Vec::new();
    let mut table = Vec::new();
    for &method in &a.method {
        for &space in &a.space {
            let mut cfg = SharedResponseConfig::new(
                match method {
                    MethodArg::Mvtt => ResponseMethod::Mvtt,
                    MethodArg::Srm => ResponseMethod::Srm,
                    MethodArg::None => ResponseMethod::None,
                },
                match space {
                    SpaceArg::Feature => ResponseSpace::Feature,
                    SpaceArg::Label => ResponseSpace::Label,
                },
                seed,
                levels,
            );
            cfg.partitions = a.partitions;
            cfg.fdr_q = a.fdr;
            cfg.srm_rank = a.rank;
            cfg.srm_max_iters = a.max_iters;
            let res = shared_response(&train, &test, &cfg)?;
            let label = format!("{}/{}", to_value(&res.method).as_str().unwrap_or(""), to_value(&res.space).as_str().unwrap_or(""));
            let undefined = res.per_partition.iter().filter(|c| c.is_none()).count();
            if undefined > 0 {
                r.warnings.push(format!(
                    "{label}: correlation undefined in {undefined} of {} partitions (a group representation was constant)",
                    a.partitions
                ));
            }
            if res.empty_denoise_count > 0 {
                r.warnings.push(format!("{label}: {} test views denoised to zero", res.empty_denoise_count));
            }
            let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
            table.push(vec![
                to_value(&res.method).as_str().unwrap_or("").to_string(),
                to_value(&res.space).as_str().unwrap_or("").to_string(),
                opt(res.mean),
                opt(res.std),
            ]);
            rows.push(to_value(&res));
        }
    }
    r.table("shared_response.csv", &["method", "space", "mean", "std"], table);
    r.results = json!({ "rows": rows });
    Ok(r)
}

fn coarsen(a: &CoarsenArgs) -> CliResult<Report> {
    let mut r = Report::new("coarsen", &a.output.output);
    let (mats, files) = read_all(&a.input)?;
    r.config = json!({
        "output": a.output.output.display().to_string(),
        "input": paths_json(&files),
        "steps": a.steps,
    });
    let mut rows = Vec::new();
    for (i, m) in mats.into_iter().enumerate() {
        let mut cur = m;
        for _ in 0..a.steps {
            cur = box_filter_coarsen(&cur)?;
        }
        r.matrix(&format!("coarsened_{i:03}"), &cur)?;
        rows.push(json!({ "index": i, "rows": cur.rows(), "cols": cur.cols(), "mean": cur.mean() }));
    }
    r.results = json!({ "matrices": rows });
    Ok(r)
}

fn metrics(a: &MetricsArgs) -> CliResult<Report> {
    let mut r = Report::new("metrics", &a.output.output);
    let (mats, files) = read_all(&a.input)?;
    r.config = json!({
        "output": a.output.output.display().to_string(),
        "input": paths_json(&files),
        "edge_threshold": a.edge_threshold,
    });
    let rows = mats
        .iter()
        .zip(&files)
        .map(|(m, f)| {
            Ok(json!({
                "input": f.display().to_string(),
                "metrics": to_value(&graph_metrics(m, a.edge_threshold)?),
            }))
        })
        .collect::<CliResult<Vec<_>>>()?;
    r.results = json!({ "graphs": rows });
    Ok(r)
}
