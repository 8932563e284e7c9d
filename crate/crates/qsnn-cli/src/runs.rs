//! Subcommand implementations: train, eval, hopfield, grover, encode.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use qsnn::circuitry::ModelDocument;
use qsnn::models::{hopfield_recall, RecallMode};
use qsnn::optimizer::{train, TrainConfig, TrainingTrace};
use qsnn::sampler::{
    classification_accuracy, confusion_counts, evaluate_metric, network_loss, EvalMetric,
};
use qsnn::{NetworkTopology, ParameterTable};

use crate::config::ExperimentConfig;
use crate::data::{self, one_bit_corruptions, PreparedData};

/// Per-seed training result.
#[derive(Debug, Serialize)]
struct SeedReport {
    seed: u64,
    final_loss: f64,
    best_loss: f64,
    metric: f64,
}

#[derive(Debug, Serialize)]
struct TrainMetrics {
    metric: EvalMetric,
    per_seed: Vec<SeedReport>,
    metric_mean: f64,
    metric_std: f64,
    elapsed_seconds: f64,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn ensure_out(config: &ExperimentConfig, out_flag: Option<&Path>) -> anyhow::Result<PathBuf> {
    let out = out_flag
        .map(Path::to_path_buf)
        .or_else(|| config.out.clone())
        .context("no output directory: set `out` in the config or pass --out")?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn train_config(config: &ExperimentConfig, metric: EvalMetric, seed: u64) -> TrainConfig {
    TrainConfig {
        budget: config.optimizer.budget,
        subset: config.optimizer.subset,
        mode: config.optimizer.mode,
        backend: config.backend.to_backend(seed),
        init: (config.optimizer.init_low, config.optimizer.init_high),
        eval_cadence: config.optimizer.eval_cadence,
        eval_metric: metric,
    }
}

/// Train one seed end to end: data preparation, optimization, final metric.
pub fn train_one_seed(
    config: &ExperimentConfig,
    topology: &NetworkTopology,
    seed: u64,
) -> anyhow::Result<(ParameterTable, TrainingTrace, PreparedData, f64)> {
    let prepared = data::prepare(&config.dataset, &config.model, seed)?;
    let cfg = train_config(config, prepared.metric, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (params, trace) = train(
        topology,
        &prepared.train,
        Some(&prepared.eval),
        &config.optimizer.kw(),
        &config.optimizer.anneal(),
        &cfg,
        &mut rng,
    )?;
    let metric = evaluate_metric(topology, &params, &prepared.eval, prepared.metric, cfg.backend)?;
    Ok((params, trace, prepared, metric))
}

pub fn run_train(config: &ExperimentConfig, out_flag: Option<&Path>) -> anyhow::Result<()> {
    let out = ensure_out(config, out_flag)?;
    let start = Instant::now();
    let topology = config.model.build()?;
    write_text(&out.join("resolved_config.json"), &config.resolved_json())?;

    let results: Vec<anyhow::Result<_>> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let (params, trace, prepared, metric) = train_one_seed(config, &topology, seed)?;
            Ok((seed, params, trace, prepared.metric, metric))
        })
        .collect();

    let mut per_seed = Vec::new();
    let mut metric_kind = EvalMetric::Accuracy;
    for result in results {
        let (seed, params, trace, kind, metric) = result?;
        metric_kind = kind;
        let doc = ModelDocument::from_model(&topology, &params);
        write_text(&out.join(format!("model_seed{seed}.json")), &doc.to_json())?;
        let mut csv = Vec::new();
        trace.write_csv(&mut csv)?;
        fs::write(out.join(format!("trace_seed{seed}.csv")), &csv)?;
        per_seed.push(SeedReport {
            seed,
            final_loss: trace.final_loss().unwrap_or(f64::NAN),
            best_loss: trace.best_loss().unwrap_or(f64::NAN),
            metric,
        });
    }
    let values: Vec<f64> = per_seed.iter().map(|r| r.metric).collect();
    let (mean, std) = mean_std(&values);
    let metrics = TrainMetrics {
        metric: metric_kind,
        per_seed,
        metric_mean: mean,
        metric_std: std,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    write_text(
        &out.join("metrics.json"),
        &serde_json::to_string_pretty(&metrics)?,
    )?;
    println!(
        "trained {} seed(s): {} mean {:.4} (std {:.4}) -> {}",
        config.seeds.len(),
        match metric_kind {
            EvalMetric::Accuracy => "accuracy",
            EvalMetric::ReconstructionMse => "reconstruction mse",
        },
        mean,
        std,
        out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalReport {
    test_loss: f64,
    test_accuracy: f64,
    train_accuracy: f64,
    confusion: Vec<Vec<u64>>,
}

pub fn run_eval(
    model_path: &Path,
    config: &ExperimentConfig,
    out_flag: Option<&Path>,
) -> anyhow::Result<()> {
    let text = fs::read_to_string(model_path)
        .with_context(|| format!("cannot read model {}", model_path.display()))?;
    let (topology, params) = ModelDocument::from_json(&text)?.into_model()?;
    let seed = config.seeds.first().copied().unwrap_or(0);
    let prepared = data::prepare(&config.dataset, &config.model, seed)?;
    let backend = config.backend.to_backend(seed);

    let report = EvalReport {
        test_loss: network_loss(&topology, &params, &prepared.eval, backend)?,
        test_accuracy: classification_accuracy(&topology, &params, &prepared.eval, backend)?,
        train_accuracy: classification_accuracy(&topology, &params, &prepared.train, backend)?,
        confusion: confusion_counts(&topology, &params, &prepared.eval, backend)?,
    };
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Ok(out) = ensure_out(config, out_flag) {
        write_text(&out.join("eval_metrics.json"), &json)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ProbeSummary {
    probe: String,
    kind: &'static str,
    source: String,
    runs: usize,
    converged_to_source: usize,
    mean_iterations: f64,
}

#[derive(Debug, Serialize)]
struct HopfieldReport {
    stored_fixpoint_ok: Vec<bool>,
    probes: Vec<ProbeSummary>,
}

fn bits_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn run_hopfield(config: &ExperimentConfig, out_flag: Option<&Path>) -> anyhow::Result<()> {
    let out = ensure_out(config, out_flag)?;
    write_text(&out.join("resolved_config.json"), &config.resolved_json())?;
    let topology = config.model.build()?;
    if !topology.recurrent() {
        bail!("hopfield command needs a recurrent model");
    }
    let seed = config.seeds.first().copied().unwrap_or(0);
    let prepared = data::prepare(&config.dataset, &config.model, seed)?;
    let params = match &config.model_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read model {}", path.display()))?;
            let (loaded, params) = ModelDocument::from_json(&text)?.into_model()?;
            if loaded.total_qubits() != topology.total_qubits() {
                bail!("loaded model does not match the configured topology");
            }
            params
        }
        None => {
            let (params, trace, _, _) = train_one_seed(config, &topology, seed)?;
            let doc = ModelDocument::from_model(&topology, &params);
            write_text(&out.join(format!("model_seed{seed}.json")), &doc.to_json())?;
            let mut csv = Vec::new();
            trace.write_csv(&mut csv)?;
            fs::write(out.join(format!("trace_seed{seed}.csv")), &csv)?;
            params
        }
    };

    let stored = if prepared.stored_patterns.is_empty() {
        prepared.train.iter().map(|(p, _)| p.clone()).collect()
    } else {
        prepared.stored_patterns.clone()
    };

    let mut trajectories = Vec::new();
    writeln!(trajectories, "probe,kind,run,iteration,pattern,converged")?;
    let mut report = HopfieldReport {
        stored_fixpoint_ok: Vec::new(),
        probes: Vec::new(),
    };

    // Stored patterns: fixpoint check on exact marginals after one step.
    for pattern in &stored {
        let marginals = qsnn::sampler::output_marginals(&topology, &params, pattern)?;
        let ok = marginals
            .iter()
            .zip(pattern)
            .all(|(&p, &bit)| if bit { p >= 0.9 } else { p <= 0.1 });
        report.stored_fixpoint_ok.push(ok);
    }

    // Probe set: stored patterns plus their one-bit corruptions.
    let mut probes: Vec<(Vec<bool>, &'static str, Vec<bool>)> = stored
        .iter()
        .map(|p| (p.clone(), "stored", p.clone()))
        .collect();
    if config.recall.corrupted_probes {
        for pattern in &stored {
            for probe in one_bit_corruptions(pattern) {
                probes.push((probe, "corrupted", pattern.clone()));
            }
        }
    }

    for (pi, (probe, kind, source)) in probes.iter().enumerate() {
        let runs = match config.recall.mode {
            RecallMode::Sample => config.recall.runs,
            RecallMode::Argmax => 1,
        };
        let mut reached = 0usize;
        let mut iter_sum = 0usize;
        for run in 0..runs {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((pi as u64) << 32) ^ run as u64);
            let trajectory = hopfield_recall(
                &topology,
                &params,
                probe,
                config.recall.max_iters,
                config.recall.mode,
                &mut rng,
            )?;
            for (it, pattern) in trajectory.patterns.iter().enumerate() {
                writeln!(
                    trajectories,
                    "{pi},{kind},{run},{it},{},{}",
                    bits_string(pattern),
                    trajectory.converged
                )?;
            }
            if trajectory.converged && trajectory.last() == source.as_slice() {
                reached += 1;
            }
            iter_sum += trajectory.iterations();
        }
        report.probes.push(ProbeSummary {
            probe: bits_string(probe),
            kind,
            source: bits_string(source),
            runs,
            converged_to_source: reached,
            mean_iterations: iter_sum as f64 / runs.max(1) as f64,
        });
    }

    fs::write(out.join("trajectories.csv"), &trajectories)?;
    write_text(
        &out.join("hopfield_summary.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "hopfield recall: {}/{} stored fixpoints ok, {} probes -> {}",
        report.stored_fixpoint_ok.iter().filter(|&&b| b).count(),
        report.stored_fixpoint_ok.len(),
        report.probes.len(),
        out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct GroverReport {
    iterations: usize,
    shots: usize,
    top_patterns: Vec<(String, f64)>,
}

pub fn run_grover(config: &ExperimentConfig, out_flag: Option<&Path>) -> anyhow::Result<()> {
    let out = ensure_out(config, out_flag)?;
    write_text(&out.join("resolved_config.json"), &config.resolved_json())?;
    let seed = config.seeds.first().copied().unwrap_or(0);
    let (topology, params) = match &config.model_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read model {}", path.display()))?;
            ModelDocument::from_json(&text)?.into_model()?
        }
        None => {
            let topology = config.model.build()?;
            let (params, trace, _, _) = train_one_seed(config, &topology, seed)?;
            let doc = ModelDocument::from_model(&topology, &params);
            write_text(&out.join(format!("model_seed{seed}.json")), &doc.to_json())?;
            let mut csv = Vec::new();
            trace.write_csv(&mut csv)?;
            fs::write(out.join(format!("trace_seed{seed}.csv")), &csv)?;
            (topology, params)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let histogram = qsnn::grover::generative_sample(
        &topology,
        &params,
        config.grover.iterations,
        config.grover.marked,
        config.grover.shots,
        &mut rng,
    )?;
    let mut csv = Vec::new();
    histogram.write_csv(&mut csv)?;
    fs::write(out.join("histogram.csv"), &csv)?;

    let k = histogram.exact.len().trailing_zeros() as usize;
    let mut ranked: Vec<(String, f64)> = histogram
        .exact
        .iter()
        .enumerate()
        .map(|(y, &p)| (qsnn::statevector::outcome_bitstring(y, k), p))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    ranked.truncate(8);
    let report = GroverReport {
        iterations: config.grover.iterations,
        shots: config.grover.shots,
        top_patterns: ranked,
    };
    write_text(
        &out.join("grover_summary.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "grover sampling done ({} iterations, {} shots) -> {}",
        config.grover.iterations,
        config.grover.shots,
        out.display()
    );
    Ok(())
}

pub fn run_encode(config: &ExperimentConfig, out_flag: Option<&Path>) -> anyhow::Result<()> {
    let out = ensure_out(config, out_flag)?;
    write_text(&out.join("resolved_config.json"), &config.resolved_json())?;
    let seed = config.seeds.first().copied().unwrap_or(0);
    let (train, test) = data::encode_only(&config.dataset, seed)?;
    for (name, split) in [("train", &train), ("test", &test)] {
        write_text(
            &out.join(format!("encoded_{name}.json")),
            &serde_json::to_string_pretty(split)?,
        )?;
        let mut csv = Vec::new();
        writeln!(csv, "bits,target")?;
        for (bits, target) in &split.samples {
            writeln!(csv, "{},{}", bits_string(bits), bits_string(target))?;
        }
        fs::write(out.join(format!("encoded_{name}.csv")), &csv)?;
    }
    println!(
        "encoded {} train / {} test samples -> {}",
        train.len(),
        test.len(),
        out.display()
    );
    Ok(())
}
