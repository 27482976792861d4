//! The subcommands. Each returns a [`Fail`] carrying its exit code.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use a3tgcn::csvio::write_matrix;
use a3tgcn::data::{
    load_speed_matrix, synth_traffic, FeatureMatrix, NoiseKind, NoiseScaling, WindowedDataset,
};
use a3tgcn::gradcheck::{self, TOLERANCE};
use a3tgcn::graph::load_adjacency;
use a3tgcn::model::{Checkpoint, ModelKind, ModelParams};
use a3tgcn::tensor::OpKind;
use a3tgcn::train_eval::{
    compare_models, evaluate_model, perturbation_sweep, predict_dataset, train, SplitDataset,
    TrainConfig,
};
use a3tgcn::{ExecMode, RoadGraph};

use crate::config::{resolve, ConfigFile, DataSource, Overrides, RunConfig};
use crate::fail::{CmdResult, Fail, OrFail, EXIT_CONFIG, EXIT_DATA, EXIT_OTHER};
use crate::manifest::{Fingerprint, Manifest};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.txt";
pub const SYNTH_GRAPH_FILE: &str = "synth_adjacency.csv";
pub const SYNTH_SPEEDS_FILE: &str = "synth_speeds.csv";
pub const EVAL_FILE: &str = "eval_metrics.csv";
pub const PREDICTIONS_FILE: &str = "test_predictions.csv";

fn write_text(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| Fail::other(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(|e| Fail::other(format!("{}: {e}", dir.display())))
}

/// Denormalized test predictions: one row per (window, step), one column per node.
fn write_predictions(
    path: &Path,
    graph: &RoadGraph,
    params: &ModelParams,
    test: &WindowedDataset,
    chunk_size: usize,
    exec: ExecMode,
) -> CmdResult {
    let (_, pred) = predict_dataset(graph, params, test, chunk_size, exec).or_fail(EXIT_OTHER)?;
    let n = graph.n_nodes();
    let mut s = String::from("sample,step");
    for i in 0..n {
        s.push_str(&format!(",node_{i}"));
    }
    s.push('\n');
    for sample in 0..test.len() {
        for t in 0..pred.cols() {
            s.push_str(&format!("{sample},{}", t + 1));
            for i in 0..n {
                s.push_str(&format!(",{}", pred.get(sample * n + i, t) * test.scale));
            }
            s.push('\n');
        }
    }
    write_text(path, &s)
}

fn load_files(graph: &Path, speeds: &Path) -> CmdResult<(RoadGraph, FeatureMatrix)> {
    let g = load_adjacency(graph).or_fail(EXIT_DATA)?;
    let s = load_speed_matrix(speeds, &g).or_fail(EXIT_DATA)?;
    Ok((g, s))
}

/// Loads or generates the raw data. Generated data is written to `out_dir`
/// so later commands can read it like any other input.
fn load_source(
    run: &RunConfig,
) -> CmdResult<(RoadGraph, FeatureMatrix, BTreeMap<String, Fingerprint>)> {
    let (graph_path, speeds_path) = match &run.source {
        DataSource::Files { graph, speeds } => (graph.clone(), speeds.clone()),
        DataSource::Synth { nodes, steps } => {
            let (g, s) = synth_traffic(*nodes, *steps, run.train.seed).or_fail(EXIT_CONFIG)?;
            let gp = run.out_dir.join(SYNTH_GRAPH_FILE);
            let sp = run.out_dir.join(SYNTH_SPEEDS_FILE);
            write_matrix(&gp, g.adjacency()).or_fail(EXIT_OTHER)?;
            write_matrix(&sp, s.values()).or_fail(EXIT_OTHER)?;
            (gp, sp)
        }
    };
    let (graph, speeds) = load_files(&graph_path, &speeds_path)?;
    let fingerprints = BTreeMap::from([
        ("graph".to_string(), Fingerprint::of(&graph_path)?),
        ("speeds".to_string(), Fingerprint::of(&speeds_path)?),
    ]);
    Ok((graph, speeds, fingerprints))
}

fn prepare_run(
    flags: &Overrides,
    config: Option<&Path>,
    env_seed: Option<&str>,
) -> CmdResult<RunConfig> {
    let file = match config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let mut run = resolve(flags, &file, env_seed)?;
    create_dir(&run.out_dir)?;
    // recorded paths must survive a change of working directory
    if let Ok(abs) = std::fs::canonicalize(&run.out_dir) {
        run.out_dir = abs;
    }
    Ok(run)
}

pub struct TrainArgs<'a> {
    pub flags: Overrides,
    pub config: Option<&'a Path>,
    pub env_seed: Option<&'a str>,
}

pub fn train_cmd(args: TrainArgs<'_>) -> CmdResult {
    let started = Instant::now();
    let run = prepare_run(&args.flags, args.config, args.env_seed)?;
    let cfg = &run.train;
    let (graph, raw, data_fp) = load_source(&run)?;
    let normalized = raw.normalize().or_fail(EXIT_DATA)?;
    let scale = normalized.scale_max().expect("normalized data has a scale");
    let data = SplitDataset::prepare(&normalized, cfg).or_fail(EXIT_DATA)?;
    println!(
        "training {} on {} nodes x {} steps: {} train / {} test windows",
        cfg.model_kind,
        graph.n_nodes(),
        raw.n_steps(),
        data.train.len(),
        data.test.len()
    );

    let outcome = train(cfg, &graph, &data).or_fail(EXIT_CONFIG)?;

    let out = &run.out_dir;
    let ckpt_path = out.join(CHECKPOINT_FILE);
    Checkpoint::new(outcome.params.clone())
        .with_meta("scale_max", scale)
        .with_meta("train_fraction", cfg.train_fraction)
        .with_meta("purge_split", cfg.purge_split)
        .with_meta("chunk_size", cfg.chunk_size)
        .with_meta("seed", cfg.seed)
        .with_meta("weighted_graph", graph.is_weighted())
        .save(&ckpt_path)
        .or_fail(EXIT_OTHER)?;
    let history_path = out.join(HISTORY_FILE);
    write_text(&history_path, &outcome.history.to_csv())?;
    let config_path = out.join(EFFECTIVE_CONFIG_FILE);
    write_text(&config_path, &run.to_config_text())?;
    let predictions_path = out.join(PREDICTIONS_FILE);
    write_predictions(
        &predictions_path,
        &graph,
        &outcome.params,
        &data.test,
        cfg.chunk_size,
        cfg.exec,
    )?;

    if let Some(best) = outcome.history.best() {
        println!("best epoch {}: {}", best.epoch, best.metrics);
    }
    let mut artifacts = BTreeMap::from([
        ("checkpoint".to_string(), ckpt_path),
        ("history".to_string(), history_path),
        ("effective_config".to_string(), config_path),
        ("predictions".to_string(), predictions_path),
    ]);
    if let DataSource::Synth { .. } = run.source {
        artifacts.insert("synth_graph".into(), data_fp["graph"].path.clone());
        artifacts.insert("synth_speeds".into(), data_fp["speeds"].path.clone());
    }
    let manifest_path = out.join(MANIFEST_FILE);
    Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: "train".into(),
        seed: cfg.seed,
        config: run.pairs(),
        data: data_fp,
        artifacts,
        duration_secs: started.elapsed().as_secs_f64(),
    }
    .save(&manifest_path)?;
    println!("wrote {}", manifest_path.display());
    Ok(())
}

/// Where a trained model and its data live.
#[derive(Clone, Debug, Default)]
pub struct ModelInputs {
    pub checkpoint: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub speeds: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

struct Loaded {
    ckpt_path: PathBuf,
    ckpt: Checkpoint,
    graph: RoadGraph,
    normalized: FeatureMatrix,
    config: TrainConfig,
}

fn load_model(inputs: &ModelInputs) -> CmdResult<Loaded> {
    let manifest = inputs.manifest.as_deref().map(Manifest::load).transpose()?;
    let from_manifest = |key: &str, file: bool| -> CmdResult<Option<PathBuf>> {
        let Some(m) = &manifest else { return Ok(None) };
        if file {
            let fp = m.input(key)?;
            if !fp.matches() {
                eprintln!("warning: {} changed since training", fp.path.display());
            }
            Ok(Some(fp.path.clone()))
        } else {
            Ok(Some(m.artifact(key)?.to_path_buf()))
        }
    };
    let ckpt_path = match &inputs.checkpoint {
        Some(p) => p.clone(),
        None => from_manifest("checkpoint", false)?
            .ok_or_else(|| Fail::config("missing --checkpoint (or --manifest)"))?,
    };
    let graph_path = match &inputs.graph {
        Some(p) => p.clone(),
        None => from_manifest("graph", true)?
            .ok_or_else(|| Fail::config("missing --graph (or --manifest)"))?,
    };
    let speeds_path = match &inputs.speeds {
        Some(p) => p.clone(),
        None => from_manifest("speeds", true)?
            .ok_or_else(|| Fail::config("missing --speeds (or --manifest)"))?,
    };

    let ckpt = Checkpoint::load(&ckpt_path).or_fail(EXIT_DATA)?;
    let graph = load_adjacency(&graph_path).or_fail(EXIT_DATA)?;
    let dims = ckpt.params.dims().clone();
    if graph.n_nodes() != dims.nodes {
        return Err(Fail::config(format!(
            "checkpoint {} was trained on {} nodes but {} has {}",
            ckpt_path.display(),
            dims.nodes,
            graph_path.display(),
            graph.n_nodes()
        )));
    }
    let raw = load_speed_matrix(&speeds_path, &graph).or_fail(EXIT_DATA)?;
    let normalized = match ckpt.meta_f64("scale_max") {
        Some(s) => raw.normalize_with(s),
        None => raw.normalize(),
    }
    .or_fail(EXIT_DATA)?;

    let defaults = TrainConfig::default();
    let meta_bool = |k: &str, d: bool| ckpt.meta.get(k).and_then(|v| v.parse().ok()).unwrap_or(d);
    let config = TrainConfig {
        model_kind: ckpt.params.kind(),
        history_n: dims.history,
        horizon_t: dims.horizon,
        hidden_units: dims.hidden,
        scorer_width: dims.scorer_width,
        per_gate_gc: dims.per_gate_gc,
        attn_tanh: dims.attn_tanh,
        train_fraction: ckpt
            .meta_f64("train_fraction")
            .unwrap_or(defaults.train_fraction),
        purge_split: meta_bool("purge_split", defaults.purge_split),
        chunk_size: ckpt
            .meta
            .get("chunk_size")
            .and_then(|v| v.parse().ok())
            .unwrap_or(defaults.chunk_size),
        seed: ckpt
            .meta
            .get("seed")
            .and_then(|v| v.parse().ok())
            .unwrap_or(0),
        ..defaults
    };
    Ok(Loaded {
        ckpt_path,
        ckpt,
        graph,
        normalized,
        config,
    })
}

fn default_dir(ckpt: &Path) -> PathBuf {
    ckpt.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub struct EvalArgs {
    pub inputs: ModelInputs,
    pub out_dir: Option<PathBuf>,
    pub dump_predictions: Option<PathBuf>,
    pub exec: ExecMode,
}

pub fn eval_cmd(args: EvalArgs) -> CmdResult {
    let m = load_model(&args.inputs)?;
    let data = SplitDataset::prepare(&m.normalized, &m.config).or_fail(EXIT_DATA)?;
    let params = &m.ckpt.params;
    let metrics = evaluate_model(&m.graph, params, &data.test, m.config.chunk_size, args.exec)
        .or_fail(EXIT_OTHER)?;
    println!(
        "{} on {} test windows: {metrics}",
        params.kind(),
        data.test.len()
    );

    let out_dir = args.out_dir.unwrap_or_else(|| default_dir(&m.ckpt_path));
    create_dir(&out_dir)?;
    let csv = format!(
        "rmse,mae,accuracy,r2,var\n{}\n",
        metrics.csv_fields().join(",")
    );
    let path = out_dir.join(EVAL_FILE);
    write_text(&path, &csv)?;
    println!("wrote {}", path.display());

    if let Some(dump) = args.dump_predictions {
        write_predictions(
            &dump,
            &m.graph,
            params,
            &data.test,
            m.config.chunk_size,
            args.exec,
        )?;
        println!("wrote {}", dump.display());
    }
    Ok(())
}

pub struct PerturbArgs {
    pub inputs: ModelInputs,
    pub kind: String,
    pub scaling: String,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub exec: ExecMode,
}

pub fn perturb_cmd(args: PerturbArgs) -> CmdResult {
    let kind: NoiseKind = args.kind.parse().or_fail(EXIT_CONFIG)?;
    let scaling = match args.scaling.to_ascii_lowercase().as_str() {
        "data" => NoiseScaling::DataScale,
        "minmax" => NoiseScaling::MinMax,
        other => {
            return Err(Fail::config(format!(
                "unknown scaling {other:?}, expected data or minmax"
            )))
        }
    };
    let m = load_model(&args.inputs)?;
    let report = perturbation_sweep(
        &m.graph,
        &m.ckpt.params,
        &m.normalized,
        &m.config,
        kind,
        scaling,
        args.seed,
        args.exec,
    )
    .or_fail(EXIT_DATA)?;

    println!("clean: {}", report.clean);
    for r in &report.rows {
        println!("{} {:>5}: {}", r.kind.name(), r.param, r.metrics);
    }
    if let Some(change) = report.max_relative_accuracy_change() {
        println!("largest relative accuracy change: {:.2}%", 100.0 * change);
    }
    let path = args
        .out
        .unwrap_or_else(|| default_dir(&m.ckpt_path).join(format!("perturb_{}.csv", kind.name())));
    write_text(&path, &report.to_csv())?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn gradcheck_cmd(trials: usize, seed: u64, corrupt_op: Option<&str>) -> CmdResult {
    let fault = corrupt_op
        .map(|name| {
            OpKind::from_name(name).ok_or_else(|| Fail::config(format!("unknown op {name:?}")))
        })
        .transpose()?;
    let results = gradcheck::run_suite(trials, seed, fault).or_fail(EXIT_OTHER)?;
    let mut failed = Vec::new();
    for r in &results {
        let verdict = if r.passed() { "ok  " } else { "FAIL" };
        println!(
            "{verdict} {:<12} runs {:>3}  worst rel error {:.3e} at {}",
            r.name, r.runs, r.worst_rel_error, r.worst_at
        );
        if !r.passed() {
            failed.push(format!("{} ({})", r.name, r.worst_at));
        }
    }
    if failed.is_empty() {
        println!("all {} checks below {TOLERANCE:e}", results.len());
        Ok(())
    } else {
        Err(Fail::other(format!(
            "gradient check failed above {TOLERANCE:e}: {}",
            failed.join(", ")
        )))
    }
}

pub struct CompareArgs<'a> {
    pub train: TrainArgs<'a>,
    pub models: Vec<ModelKind>,
    pub horizons: Vec<usize>,
    pub out: Option<PathBuf>,
}

pub fn compare_cmd(args: CompareArgs<'_>) -> CmdResult {
    let started = Instant::now();
    let run = prepare_run(&args.train.flags, args.train.config, args.train.env_seed)?;
    if args.models.is_empty() {
        return Err(Fail::config("no models to compare"));
    }
    let (graph, raw, data_fp) = load_source(&run)?;
    let normalized = raw.normalize().or_fail(EXIT_DATA)?;
    let horizons = if args.horizons.is_empty() {
        vec![run.train.horizon_t]
    } else {
        args.horizons
    };
    let configs: Vec<TrainConfig> = horizons
        .iter()
        .flat_map(|&h| args.models.iter().map(move |&kind| (h, kind)))
        .map(|(h, kind)| TrainConfig {
            model_kind: kind,
            horizon_t: h,
            ..run.train.clone()
        })
        .collect();
    for c in &configs {
        c.validate().or_fail(EXIT_CONFIG)?;
    }
    let (table, _) =
        compare_models(&configs, &graph, &normalized, run.train.exec).or_fail(EXIT_DATA)?;
    print!("{table}");

    let path = args
        .out
        .unwrap_or_else(|| run.out_dir.join("comparison.csv"));
    write_text(&path, &table.to_csv())?;
    println!("wrote {}", path.display());
    let mut config = run.pairs();
    config.insert(
        "models".into(),
        args.models
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join(","),
    );
    config.insert(
        "horizons".into(),
        horizons
            .iter()
            .map(|h| h.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: "compare".into(),
        seed: run.train.seed,
        config,
        data: data_fp,
        artifacts: BTreeMap::from([("comparison".to_string(), path)]),
        duration_secs: started.elapsed().as_secs_f64(),
    }
    .save(&run.out_dir.join(MANIFEST_FILE))
}
