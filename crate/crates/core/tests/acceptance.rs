//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report is always shown:
//! `cargo test -p uec-core --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use uec_core::convolution::{bayes_coefficients, quadratic_simplex_oracle, surrogate_loss, CoefficientConfig};
use uec_core::eval::abstention::{nauc_abstention, AbstentionItem};
use uec_core::eval::metrics::{ndcg_at_k, recall_at_k, Qrels};
use uec_core::eval::synth::domain_name;
use uec_core::eval::{ablation_suite, coefficient_profile, run_retrieval, spearman, synth_generate, PipelineConfig, RetrievalData, SynthSpec};
use uec_core::io::{decode_store, encode_store};
use uec_core::laplace::{diag_posterior_variance, fit_map, LaplaceFitConfig, LaplacePosterior, PairExample};
use uec_core::retrieval::{Hit, Index, RunRanking};
use uec_core::similarity::{dot_moments, mc_dot_summary, probit_score, DotMoments, SimilarityConfig};
use uec_core::types::{EmbeddingRecord, EmbeddingStore, GaussianEmbedding};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, format!("took {elapsed:.2?}, limit {limit:.0?}"))
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_gaussian(rng: &mut ChaCha8Rng, dim: usize, max_var: f64) -> GaussianEmbedding {
    let mean = (0..dim).map(|_| normal(rng)).collect();
    let var = (0..dim).map(|_| rng.random_range(0.0..max_var)).collect();
    GaussianEmbedding::new(mean, var).unwrap()
}

fn coefficient_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = rng.random_range(2..=8);
        let traces: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..10.0)).collect();
        let closed = bayes_coefficients(&traces, 1.0).map_err(|e| e.to_string())?;
        let oracle = quadratic_simplex_oracle(&traces, 1e-7);
        for (a, b) in closed.pi().iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    check(worst <= 1e-4, format!("max |Δπ| = {worst:e}"))?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("100 instances, max |Δπ|∞ = {worst:.1e}, {elapsed:.2?}"))
}

fn moment_oracle() -> Outcome {
    let start = Instant::now();
    let dims = [2, 8, 64];
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_z = 0.0f64;
    let mut misses = Vec::new();
    for i in 0..50 {
        let dim = dims[i % dims.len()];
        let q = random_gaussian(&mut rng, dim, 0.5);
        let c = random_gaussian(&mut rng, dim, 0.5);
        let exact = dot_moments(&q, &c).map_err(|e| e.to_string())?;
        let mc = mc_dot_summary(&q, &c, 1_000_000, 1_000 + i as u64).map_err(|e| e.to_string())?;
        let z_mean = (mc.mean - exact.mu_s).abs() / mc.se_mean();
        let z_var = (mc.variance - exact.sigma_s_sq).abs() / mc.se_variance();
        worst_z = worst_z.max(z_mean).max(z_var);
        if z_mean > 3.0 || z_var > 3.0 {
            misses.push(format!("instance {i} (D={dim}): z_mean={z_mean:.2}, z_var={z_var:.2}"));
        }
    }
    let elapsed = start.elapsed();
    check(misses.is_empty(), misses.join("; "))?;
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!("50 instances × 10⁶ samples, max deviation {worst_z:.2} SE, {elapsed:.2?}"))
}

fn probit_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let n = 400_000;
    let mut worst = 0.0f64;
    for i in 0..=8 {
        let mu = -2.0 + 0.5 * i as f64;
        for j in 0..=8 {
            let var = 0.5 * j as f64;
            let sd = var.sqrt();
            let mut acc = 0.0;
            for _ in 0..n {
                acc += logistic(mu + sd * normal(&mut rng));
            }
            let mc = acc / n as f64;
            let approx = logistic(probit_score(DotMoments { mu_s: mu, sigma_s_sq: var }, 1.0));
            worst = worst.max((mc - approx).abs());
        }
    }
    check(worst <= 0.02, format!("max gap {worst:.4}"))?;
    Ok(format!("9×9 grid, max |E[σ(s)] − σ(ŝ)| = {worst:.4}"))
}

fn surrogate_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let n = 200_000;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let dim = rng.random_range(2..=32);
        let x = random_gaussian(&mut rng, dim, 1.0);
        let xp = random_gaussian(&mut rng, dim, 1.0);
        let closed = surrogate_loss(&[1.0], &[&x], &[&xp]).map_err(|e| e.to_string())?;
        let (sx, sp): (Vec<f64>, Vec<f64>) = (
            x.var().iter().map(|v| v.sqrt()).collect(),
            xp.var().iter().map(|v| v.sqrt()).collect(),
        );
        let mut acc = 0.0;
        for _ in 0..n {
            let mut d2 = 0.0;
            for d in 0..dim {
                let z = x.mean()[d] + sx[d] * normal(&mut rng);
                let zp = xp.mean()[d] + sp[d] * normal(&mut rng);
                d2 += (z - zp) * (z - zp);
            }
            acc += d2;
        }
        let mc = acc / n as f64;
        worst = worst.max((mc - closed).abs() / closed);
    }
    check(worst <= 0.01, format!("max relative gap {worst:.4}"))?;
    Ok(format!("20 instances, max relative gap {:.3}%", 100.0 * worst))
}

fn laplace_correctness() -> Outcome {
    let e1 = |y| PairExample::new(vec![1.0, 0.0], vec![1.0, 1.0], y).unwrap();

    let v = diag_posterior_variance(&[], &[0.0, 0.0], 2.0).map_err(|e| e.to_string())?;
    check(v == [0.5, 0.5], format!("prior only: {v:?}"))?;
    let v = diag_posterior_variance(&[e1(true)], &[0.0, 0.0], 1.0).map_err(|e| e.to_string())?;
    check(v == [0.8, 1.0], format!("one example: {v:?}"))?;
    let four = vec![e1(true), e1(false), e1(true), e1(false)];
    let v = diag_posterior_variance(&four, &[0.0, 0.0], 1.0).map_err(|e| e.to_string())?;
    check(v == [0.5, 1.0], format!("four copies: {v:?}"))?;

    let posterior = LaplacePosterior {
        model_name: "m".into(),
        dim: 2,
        prior_precision: 2.0,
        map_weights: vec![0.0; 2],
        post_var: vec![0.5, 0.5],
        n_examples: 0,
    };
    let g = posterior.embed_to_gaussian(&[2.0, 0.0]).map_err(|e| e.to_string())?;
    check(g.var() == [2.0, 0.0], format!("embedding variance {:?}", g.var()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut tightest = f64::INFINITY;
    for _ in 0..1000 {
        let dim = rng.random_range(1..=6);
        let n = rng.random_range(0..=20);
        let lambda = rng.random_range(0.05..5.0);
        let data: Vec<PairExample> = (0..n)
            .map(|_| {
                let q = (0..dim).map(|_| normal(&mut rng)).collect();
                let p = (0..dim).map(|_| if rng.random_bool(0.2) { 0.0 } else { normal(&mut rng) }).collect();
                PairExample::new(q, p, rng.random_bool(0.5)).unwrap()
            })
            .collect();
        let cfg = LaplaceFitConfig {
            prior_precision: lambda,
            ..LaplaceFitConfig::default()
        };
        let post = LaplacePosterior::fit("m", dim, &data, &cfg).map_err(|e| e.to_string())?;
        for v in &post.post_var {
            check(*v > 0.0 && *v <= 1.0 / lambda, format!("v = {v} with λ = {lambda}"))?;
            tightest = tightest.min(1.0 / lambda - v);
        }
    }

    // Scalar MAP for a single positive, against a bisection on λw = σ(−w).
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid - logistic(-mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let w = fit_map(1, &[PairExample::new(vec![1.0], vec![1.0], true).unwrap()], &LaplaceFitConfig::default())
        .map_err(|e| e.to_string())?;
    check((w[0] - 0.5 * (lo + hi)).abs() < 1e-8, format!("scalar MAP {} vs bisection {}", w[0], 0.5 * (lo + hi)))?;
    Ok(format!(
        "hand examples exact; 1000 random fits satisfy v ≤ 1/λ (min slack {tightest:.1e}); scalar MAP {:.6}",
        w[0]
    ))
}

fn specialist_benchmark() -> Outcome {
    let start = Instant::now();
    let spec = SynthSpec::default();
    let data = synth_generate(&spec).map_err(|e| e.to_string())?;
    let profile = coefficient_profile(&data.queries, &CoefficientConfig::default()).map_err(|e| e.to_string())?;
    let data = RetrievalData::from(data);
    let uec = run_retrieval(&data, &PipelineConfig::default(), "uec").map_err(|e| e.to_string())?.report;
    let uniform_cfg = PipelineConfig {
        coefficients: CoefficientConfig::uniform(),
        ..PipelineConfig::default()
    };
    let uniform = run_retrieval(&data, &uniform_cfg, "uniform").map_err(|e| e.to_string())?.report;
    let elapsed = start.elapsed();

    let (un, uu) = (uec.get("ndcg@10").unwrap(), uniform.get("ndcg@10").unwrap());
    let (an, au) = (uec.get("nauc@10").unwrap(), uniform.get("nauc@10").unwrap());
    check(un > uu, format!("NDCG@10 uec {un:.4} vs uniform {uu:.4}"))?;
    check(an - au >= 0.2, format!("nAUC@10 uec {an:.4} vs uniform {au:.4}"))?;
    for l in 0..spec.n_domains {
        let row = profile.row(&domain_name(l)).ok_or(format!("no profile row for {}", domain_name(l)))?;
        let best = (0..row.mean_pi.len()).fold(0, |b, k| if row.mean_pi[k] > row.mean_pi[b] { k } else { b });
        check(best == spec.specialist(l), format!("domain {} row maximum at model {best}", row.domain))?;
    }
    within(elapsed, Duration::from_secs(10))?;
    Ok(format!(
        "NDCG@10 {un:.4} vs {uu:.4}; nAUC@10 {an:.4} vs {au:.4} (gap {:.4}); specialist row maxima on {} domains; {elapsed:.2?}",
        an - au,
        spec.n_domains
    ))
}

fn ablation_ordering() -> Outcome {
    let data = RetrievalData::from(synth_generate(&SynthSpec::default()).map_err(|e| e.to_string())?);
    let rows = ablation_suite(&data, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    let labels: Vec<&str> = rows.iter().map(|r| r.label.as_str()).collect();
    check(labels == ["full", "-UncSim", "-UncConv", "-UncSim,-UncConv"], format!("rows {labels:?}"))?;
    let n: Vec<f64> = rows.iter().map(|r| r.get("ndcg@10").unwrap()).collect();
    check(n[0] >= n[1], format!("full {:.4} < -UncSim {:.4}", n[0], n[1]))?;
    check(n[1] >= n[3], format!("-UncSim {:.4} < -both {:.4}", n[1], n[3]))?;
    check(n[0] >= n[2], format!("full {:.4} < -UncConv {:.4}", n[0], n[2]))?;
    Ok(format!(
        "NDCG@10 full {:.4} ≥ -UncSim {:.4} ≥ -both {:.4}; full ≥ -UncConv {:.4}",
        n[0], n[1], n[3], n[2]
    ))
}

fn metric_suite() -> Outcome {
    let tol = 1e-9;
    let run_of = |docs: &[&str]| {
        let mut run = RunRanking::new();
        run.insert(
            "q",
            docs.iter()
                .enumerate()
                .map(|(i, d)| Hit {
                    doc_id: (*d).into(),
                    score: 1.0 - i as f64 * 0.1,
                })
                .collect(),
        );
        run
    };
    let qrels_of = |rel: &[&str]| {
        let mut q = Qrels::new();
        for d in rel {
            q.insert("q", *d, 1);
        }
        q
    };
    let err = |e: uec_core::Error| e.to_string();

    let one = qrels_of(&["a"]);
    let cases = [
        ("ndcg rank 1", ndcg_at_k(&run_of(&["a", "b"]), &one, 10).map_err(err)?.mean, 1.0),
        ("ndcg rank 2", ndcg_at_k(&run_of(&["b", "a"]), &one, 10).map_err(err)?.mean, 1.0 / 3f64.log2()),
        ("ndcg none", ndcg_at_k(&run_of(&["b", "c"]), &one, 10).map_err(err)?.mean, 0.0),
    ];
    let two = qrels_of(&["a", "b"]);
    let more = [
        ("recall all", recall_at_k(&run_of(&["b", "a", "c"]), &two, 10).map_err(err)?.mean, 1.0),
        ("recall half", recall_at_k(&run_of(&["a", "c"]), &two, 10).map_err(err)?.mean, 0.5),
        ("recall none", recall_at_k(&run_of(&["c", "d"]), &two, 10).map_err(err)?.mean, 0.0),
        ("spearman same", spearman(&[1.0, 2.0, 3.0], &[2.0, 4.0, 9.0]).map_err(err)?, 1.0),
        ("spearman reversed", spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).map_err(err)?, -1.0),
        ("spearman swap", spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).map_err(err)?, 0.8),
    ];
    let items = |m: &[f64], c: &[f64]| -> Vec<AbstentionItem> {
        m.iter()
            .zip(c)
            .enumerate()
            .map(|(i, (m, c))| AbstentionItem::new(format!("q{i}"), *m, *c))
            .collect()
    };
    let metrics = [0.3, 1.0, 0.0, 0.63, 0.5, 0.9];
    let nauc = [
        ("nauc oracle order", nauc_abstention(&items(&metrics, &metrics)).map_err(err)?, 1.0),
        ("nauc constant", nauc_abstention(&items(&metrics, &[0.5; 6])).map_err(err)?, 0.0),
    ];
    let anti = nauc_abstention(&items(&[0.2, 0.5, 0.9, 1.0], &[4.0, 3.0, 2.0, 1.0])).map_err(err)?;
    for (name, got, want) in cases.iter().chain(&more).chain(&nauc) {
        check((got - want).abs() <= tol, format!("{name}: {got} vs {want}"))?;
    }
    check(anti < 0.0, format!("anti-correlated nAUC {anti}"))?;
    Ok(format!("{} exact examples within 1e-9; anti-correlated nAUC {anti:.4}", cases.len() + more.len() + nauc.len()))
}

fn random_store(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmbeddingStore {
    let mut s = EmbeddingStore::new(format!("model-{}", rng.random_range(0..1000)), dim).unwrap();
    for i in 0..n {
        let mean = (0..dim).map(|_| normal(rng) as f32 as f64).collect();
        let var = (0..dim).map(|_| rng.random_range(0.0f32..2.0) as f64).collect();
        s.push(EmbeddingRecord::new(format!("doc-{i}"), GaussianEmbedding::new(mean, var).unwrap()))
            .unwrap();
    }
    s
}

fn efficiency() -> Outcome {
    let (n_docs, dim, reps) = (10_000, 384, 101);
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let store = random_store(&mut rng, n_docs, dim);
    let query = random_gaussian(&mut rng, dim, 0.01);
    let probit = Index::build(&store, SimilarityConfig::default()).map_err(|e| e.to_string())?;
    let dot = Index::build(&store, SimilarityConfig::mean_dot()).map_err(|e| e.to_string())?;
    let time = |index: &Index| {
        let t = Instant::now();
        std::hint::black_box(index.score_all(&query).unwrap());
        t.elapsed().as_secs_f64()
    };
    for _ in 0..5 {
        time(&probit);
        time(&dot);
    }
    // Adjacent pairs share machine conditions; the median ratio absorbs drift.
    let (mut tp, mut td, mut ratios) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..reps {
        let (p, d) = (time(&probit), time(&dot));
        tp.push(p);
        td.push(d);
        ratios.push(p / d);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (mp, md, ratio) = (median(&mut tp), median(&mut td), median(&mut ratios));
    let summary = format!("{n_docs} docs, D={dim}: probit {:.2}ms vs dot {:.2}ms, median paired ratio ×{ratio:.2}", 1e3 * mp, 1e3 * md);
    check(ratio <= 1.5, summary.clone())?;
    Ok(summary)
}

fn format_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for i in 0..500 {
        let (n, dim) = (rng.random_range(0..12), rng.random_range(1..40));
        let s = random_store(&mut rng, n, dim);
        let back = decode_store(&encode_store(&s).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        check(back == s, format!("store {i} did not round-trip"))?;
    }
    // Every alternative value of every fixed header byte, plus non-UTF-8
    // bytes in the model name.
    let mut mutations = 0;
    for _ in 0..20 {
        let (n, dim) = (rng.random_range(1..6), rng.random_range(1..12));
        let s = random_store(&mut rng, n, dim);
        let bytes = encode_store(&s).map_err(|e| e.to_string())?;
        let name_end = 24 + s.model_name().len();
        for pos in 0..name_end {
            let values: Vec<u8> = if pos < 24 { (0..=255).collect() } else { (0x80..=0xFF).collect() };
            for v in values {
                if v == bytes[pos] {
                    continue;
                }
                let mut m = bytes.clone();
                m[pos] = v;
                mutations += 1;
                check(decode_store(&m).is_err(), format!("byte {pos} set to {v:#04x} was accepted"))?;
            }
        }
    }
    Ok(format!("500 random stores round-trip; {mutations} single-byte header mutations rejected"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("coefficient oracle", coefficient_oracle),
        ("moment oracle", moment_oracle),
        ("probit calibration", probit_calibration),
        ("surrogate identity", surrogate_identity),
        ("laplace correctness", laplace_correctness),
        ("synthetic specialist benchmark", specialist_benchmark),
        ("ablation ordering", ablation_ordering),
        ("metric unit suite", metric_suite),
        ("efficiency", efficiency),
        ("format suite", format_suite),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
