use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;
use uec_core::convolution::{convolve_ensemble, CoefficientConfig};
use uec_core::eval::{
    ablation_suite, baseline_suite, classify_stores, coefficient_profile, evaluate_run, render_table, sts_spearman,
    synth_generate, MetricReport, MetricSpec, PipelineConfig, ProbeConfig, RetrievalData, SynthSpec,
};
use uec_core::io::{self, read_dataset, read_ensemble, read_store, write_dataset, write_json, write_store, write_text};
use uec_core::laplace::{pair_examples, LaplaceFitConfig, LaplacePosterior};
use uec_core::retrieval::Index;
use uec_core::similarity::SimilarityConfig;

use crate::args::{
    AblateArgs, Command, ConvolveArgs, EvalArgs, FitArgs, ProbabilizeArgs, ProfileArgs, SearchArgs, SynthArgs, Task,
};

/// Invalid flag values or combinations; reported with exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn check_usage(r: uec_core::Result<()>) -> Result<()> {
    r.map_err(|e| usage(e.to_string()))
}

/// Echoes the resolved configuration as one JSON line on stderr.
fn echo(command: &str, config: impl Serialize) {
    eprintln!("{}", json!({ "command": command, "config": config }));
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == Some(0) {
        return Err(usage("--workers must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.unwrap_or(0)).build()?;
    Ok(pool.install(f))
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit(a) => fit(a),
        Command::Probabilize(a) => probabilize(a),
        Command::Convolve(a) => convolve(a),
        Command::Search(a) => search(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
        Command::Ablate(a) => ablate(a),
        Command::Profile(a) => profile(a),
    }
}

fn fit(a: FitArgs) -> Result<()> {
    let defaults = LaplaceFitConfig::default();
    let cfg = LaplaceFitConfig {
        prior_precision: a.prior_precision,
        max_iterations: a.max_iterations.unwrap_or(defaults.max_iterations),
        gradient_tolerance: a.gradient_tolerance.unwrap_or(defaults.gradient_tolerance),
    };
    check_usage(cfg.validate())?;
    echo(
        "fit",
        json!({
            "pairs": path_str(&a.pairs),
            "store": path_str(&a.store),
            "query_store": a.query_store.as_deref().map(path_str),
            "fit": cfg,
            "out": path_str(&a.out),
        }),
    );
    let pairs = io::read_pairs(&a.pairs)?;
    let docs = read_store(&a.store)?;
    let queries = match &a.query_store {
        Some(p) => read_store(p)?,
        None => docs.clone(),
    };
    let examples = pair_examples(&pairs, &queries, &docs)?;
    let posterior = LaplacePosterior::fit(docs.model_name(), docs.dim(), &examples, &cfg)?;
    write_json(&posterior, &a.out)?;
    eprintln!("fitted `{}` on {} pairs (dim {})", posterior.model_name, posterior.n_examples, posterior.dim);
    Ok(())
}

fn probabilize(a: ProbabilizeArgs) -> Result<()> {
    echo(
        "probabilize",
        json!({ "store": path_str(&a.store), "posterior": path_str(&a.posterior), "out": path_str(&a.out) }),
    );
    let posterior: LaplacePosterior = io::read_json(&a.posterior).context("reading posterior")?;
    posterior.validate()?;
    let store = read_store(&a.store)?;
    write_store(&posterior.probabilize_store(&store)?, &a.out)?;
    eprintln!("probabilized {} records with lambda {}", store.len(), posterior.prior_precision);
    Ok(())
}

fn convolve(a: ConvolveArgs) -> Result<()> {
    let cfg = a.coefficients.config();
    check_usage(cfg.validate())?;
    if let Some(w) = &cfg.fixed_weights {
        if w.len() != a.stores.len() {
            return Err(usage(format!("{} weights given for {} stores", w.len(), a.stores.len())));
        }
    }
    echo(
        "convolve",
        json!({
            "stores": a.stores.iter().map(|p| path_str(p)).collect::<Vec<_>>(),
            "coefficients": cfg,
            "name": a.name,
            "out": path_str(&a.out),
        }),
    );
    let input = read_ensemble(&a.stores)?;
    let (store, pis) = convolve_ensemble(&input, &cfg, &a.name)?;
    write_store(&store, &a.out)?;
    if let Some(path) = &a.coefficients_out {
        write_text(&io::format_coefficients(&input, &pis)?, path)?;
    }
    eprintln!("convolved {} models over {} records", input.n_models(), store.len());
    Ok(())
}

fn similarity_config(sim: SimilarityConfig) -> Result<SimilarityConfig> {
    check_usage(sim.validate())?;
    Ok(sim)
}

fn search(a: SearchArgs) -> Result<()> {
    let sim = similarity_config(a.similarity.config())?;
    if a.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    echo(
        "search",
        json!({
            "index": path_str(&a.index),
            "queries": path_str(&a.queries),
            "k": a.k,
            "similarity": sim,
            "workers": a.workers,
            "run": path_str(&a.run),
        }),
    );
    let docs = read_store(&a.index)?;
    let queries = read_store(&a.queries)?;
    let index = Index::build(&docs, sim)?;
    let results = with_workers(a.workers, || index.search_batch(&queries, a.k))??;
    io::write_run(&results, &a.run)?;
    eprintln!("searched {} queries against {} documents", results.len(), index.len());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let report = match a.task {
        Task::Retrieval => eval_retrieval(&a)?,
        Task::Sts => eval_sts(&a)?,
        Task::Classification => eval_classification(&a)?,
    };
    print!("{}", render_table(std::slice::from_ref(&report)));
    if let Some(out) = &a.out {
        write_json(&report, out)?;
    }
    Ok(())
}

fn required<'a, T>(value: &'a Option<T>, flag: &str, task: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| usage(format!("--task {task} requires {flag}")))
}

/// Metric names for tasks whose metrics take no cutoff.
fn plain_metrics(requested: &Option<String>, allowed: &[&str], task: &str) -> Result<Vec<String>> {
    let Some(list) = requested else {
        return Ok(allowed.iter().map(|s| (*s).to_owned()).collect());
    };
    list.split(',')
        .map(|m| {
            let m = m.trim().to_ascii_lowercase();
            if allowed.contains(&m.as_str()) {
                Ok(m)
            } else {
                Err(usage(format!("metric `{m}` is not available for --task {task}; choose from {}", allowed.join(","))))
            }
        })
        .collect()
}

fn eval_retrieval(a: &EvalArgs) -> Result<MetricReport> {
    let run_path = required(&a.run, "--run", "retrieval")?;
    let qrels_path = required(&a.qrels, "--qrels", "retrieval")?;
    let metrics = match &a.metrics {
        Some(list) => MetricSpec::parse_list(list).map_err(|e| usage(e.to_string()))?,
        None => MetricSpec::DEFAULT.to_vec(),
    };
    echo(
        "eval",
        json!({
            "task": "retrieval",
            "run": path_str(run_path),
            "qrels": path_str(qrels_path),
            "metrics": metrics.iter().map(ToString::to_string).collect::<Vec<_>>(),
        }),
    );
    let run = io::read_run(run_path)?;
    let qrels = io::read_qrels(qrels_path)?;
    let label = path_str(run_path);
    Ok(with_workers(a.workers, || evaluate_run(&label, &run, &qrels, &metrics))??)
}

fn eval_sts(a: &EvalArgs) -> Result<MetricReport> {
    let pairs_path = required(&a.pairs, "--pairs", "sts")?;
    let store_path = required(&a.store, "--store", "sts")?;
    let metrics = plain_metrics(&a.metrics, &["spearman"], "sts")?;
    let sim = similarity_config(a.similarity.config())?;
    echo(
        "eval",
        json!({
            "task": "sts",
            "pairs": path_str(pairs_path),
            "store": path_str(store_path),
            "similarity": sim,
            "metrics": metrics,
        }),
    );
    let pairs = io::read_scored_pairs(pairs_path)?;
    let store = read_store(store_path)?;
    let mut report = MetricReport::new(path_str(store_path));
    report.insert("spearman", sts_spearman(&pairs, &store, &sim)?);
    Ok(report)
}

fn eval_classification(a: &EvalArgs) -> Result<MetricReport> {
    let train_path = required(&a.train, "--train", "classification")?;
    let test_path = required(&a.test, "--test", "classification")?;
    let labels_path = required(&a.labels, "--labels", "classification")?;
    let metrics = plain_metrics(&a.metrics, &["accuracy", "macro_f1"], "classification")?;
    if !(a.l2 > 0.0 && a.l2.is_finite()) {
        return Err(usage("--l2 must be positive"));
    }
    let cfg = ProbeConfig {
        l2: a.l2,
        ..ProbeConfig::default()
    };
    echo(
        "eval",
        json!({
            "task": "classification",
            "train": path_str(train_path),
            "test": path_str(test_path),
            "labels": path_str(labels_path),
            "probe": cfg,
            "metrics": metrics,
        }),
    );
    let scores = classify_stores(&read_store(train_path)?, &read_store(test_path)?, &io::read_labels(labels_path)?, &cfg)?;
    let mut report = MetricReport::new(path_str(test_path));
    for m in &metrics {
        report.insert(m.as_str(), if m == "accuracy" { scores.accuracy } else { scores.macro_f1 });
    }
    Ok(report)
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec: SynthSpec = match &a.spec {
        Some(p) => io::read_json(p).with_context(|| format!("reading spec {}", p.display()))?,
        None => SynthSpec::default(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    check_usage(spec.validate())?;
    echo("synth", json!({ "spec": spec, "out": path_str(&a.out) }));
    let data = RetrievalData::from(synth_generate(&spec)?);
    write_dataset(&data, &a.out)?;
    write_json(&spec, a.out.join("spec.json"))?;
    eprintln!(
        "wrote {} models, {} documents and {} queries to {}",
        data.docs.n_models(),
        data.docs.len(),
        data.queries.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct AblationReport {
    config: PipelineConfig,
    ablation: Vec<MetricReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    baselines: Vec<MetricReport>,
}

fn ablate(a: AblateArgs) -> Result<()> {
    let cfg = PipelineConfig {
        coefficients: CoefficientConfig::bayes(a.temperature),
        similarity: SimilarityConfig::probit(a.beta),
        k: a.k,
    };
    check_usage(cfg.coefficients.validate())?;
    check_usage(cfg.similarity.validate())?;
    if a.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    echo(
        "ablate",
        json!({
            "data": path_str(&a.data),
            "pipeline": cfg,
            "baselines": !a.no_baselines,
            "workers": a.workers,
            "out": path_str(&a.out),
        }),
    );
    let data = read_dataset(&a.data)?;
    let (ablation, baselines) = with_workers(a.workers, || -> uec_core::Result<_> {
        let ablation = ablation_suite(&data, &cfg)?;
        let baselines = if a.no_baselines { Vec::new() } else { baseline_suite(&data, &cfg)? };
        Ok((ablation, baselines))
    })??;
    print!("{}", render_table(&ablation));
    if !baselines.is_empty() {
        println!();
        print!("{}", render_table(&baselines));
    }
    write_json(
        &AblationReport {
            config: cfg,
            ablation,
            baselines,
        },
        &a.out,
    )?;
    Ok(())
}

fn profile(a: ProfileArgs) -> Result<()> {
    let cfg = a.coefficients.config();
    check_usage(cfg.validate())?;
    echo(
        "profile",
        json!({
            "queries": a.queries.iter().map(|p| path_str(p)).collect::<Vec<_>>(),
            "coefficients": cfg,
            "out": path_str(&a.out),
        }),
    );
    let input = read_ensemble(&a.queries)?;
    let profile = coefficient_profile(&input, &cfg)?;
    write_text(&profile.to_csv(), &a.out)?;
    eprintln!("profiled {} queries over {} domains", input.len(), profile.rows.len());
    Ok(())
}
