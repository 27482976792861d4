//! Flat `key = value` run configuration and its merge with flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use a3tgcn::model::ModelKind;
use a3tgcn::train_eval::TrainConfig;
use a3tgcn::ExecMode;

use crate::fail::Fail;

/// Keys accepted in a config file. Every key can also be given as a flag.
pub const KEYS: [&str; 21] = [
    "graph",
    "speeds",
    "synth",
    "out_dir",
    "model",
    "horizon",
    "history",
    "epochs",
    "lr",
    "hidden",
    "seed",
    "batch_size",
    "lambda",
    "eval_every",
    "train_fraction",
    "purge_split",
    "scorer_width",
    "attn_tanh",
    "per_gate_gc",
    "chunk_size",
    "exec",
];

/// Parsed `key = value` pairs. Blank lines and `#` comments are skipped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(format!("line {}: expected key = value, got {raw:?}", i + 1));
            };
            let key = k.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key {key:?}", i + 1));
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(format!("line {}: duplicate key {key:?}", i + 1));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, Fail> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Fail::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Fail::config(format!("{}: {e}", path.display())))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Values given on the command line; `None` means "not given".
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub graph: Option<PathBuf>,
    pub speeds: Option<PathBuf>,
    pub synth: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub model: Option<String>,
    pub horizon: Option<usize>,
    pub history: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub hidden: Option<usize>,
    pub seed: Option<u64>,
    pub batch_size: Option<usize>,
    pub lambda: Option<f64>,
    pub eval_every: Option<usize>,
    pub train_fraction: Option<f64>,
    pub purge_split: Option<bool>,
    pub scorer_width: Option<usize>,
    pub attn_tanh: Option<bool>,
    pub per_gate_gc: Option<bool>,
    pub chunk_size: Option<usize>,
    pub exec: Option<String>,
}

/// Where the speeds come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Files { graph: PathBuf, speeds: PathBuf },
    Synth { nodes: usize, steps: usize },
}

/// The fully resolved configuration of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub source: DataSource,
    pub out_dir: PathBuf,
    pub train: TrainConfig,
}

pub fn parse_synth(s: &str) -> Result<(usize, usize), String> {
    let (n, m) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("--synth expects NODESxSTEPS, got {s:?}"))?;
    let n = n
        .trim()
        .parse()
        .map_err(|_| format!("bad node count in {s:?}"))?;
    let m = m
        .trim()
        .parse()
        .map_err(|_| format!("bad step count in {s:?}"))?;
    Ok((n, m))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("{key}: expected a boolean, got {v:?}")),
    }
}

fn parse_exec(v: &str) -> Result<ExecMode, String> {
    match v.to_ascii_lowercase().as_str() {
        "sequential" => Ok(ExecMode::Sequential),
        "parallel" => Ok(ExecMode::Parallel),
        _ => Err(format!("exec: expected sequential or parallel, got {v:?}")),
    }
}

/// Flag value, else config file value, else `None`.
fn pick<T: std::str::FromStr>(
    flag: Option<T>,
    file: &ConfigFile,
    key: &str,
) -> Result<Option<T>, String> {
    if flag.is_some() {
        return Ok(flag);
    }
    match file.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| format!("{key}: cannot parse {v:?}")),
    }
}

fn pick_bool(flag: Option<bool>, file: &ConfigFile, key: &str) -> Result<Option<bool>, String> {
    match flag {
        Some(b) => Ok(Some(b)),
        None => file.get(key).map(|v| parse_bool(key, v)).transpose(),
    }
}

/// Resolves flags over the config file over `env_seed` over defaults.
pub fn resolve(
    flags: &Overrides,
    file: &ConfigFile,
    env_seed: Option<&str>,
) -> Result<RunConfig, Fail> {
    resolve_inner(flags, file, env_seed).map_err(Fail::config)
}

fn resolve_inner(
    flags: &Overrides,
    file: &ConfigFile,
    env_seed: Option<&str>,
) -> Result<RunConfig, String> {
    let graph: Option<PathBuf> = pick(flags.graph.clone(), file, "graph")?;
    let speeds: Option<PathBuf> = pick(flags.speeds.clone(), file, "speeds")?;
    let synth: Option<String> = pick(flags.synth.clone(), file, "synth")?;
    let source = match (graph, speeds, synth) {
        (_, _, Some(s)) if flags.graph.is_none() && flags.speeds.is_none() => {
            let (nodes, steps) = parse_synth(&s)?;
            DataSource::Synth { nodes, steps }
        }
        (Some(graph), Some(speeds), _) => DataSource::Files { graph, speeds },
        (None, _, None) => return Err("missing --graph (or use --synth NODESxSTEPS)".into()),
        (_, None, None) => return Err("missing --speeds (or use --synth NODESxSTEPS)".into()),
        _ => return Err("give either --graph with --speeds, or --synth".into()),
    };

    let mut t = TrainConfig::default();
    if let Some(m) = pick::<String>(flags.model.clone(), file, "model")? {
        t.model_kind = m.parse::<ModelKind>().map_err(|e| e.to_string())?;
    }
    macro_rules! set {
        ($field:ident, $flag:ident, $key:literal) => {
            if let Some(v) = pick(flags.$flag, file, $key)? {
                t.$field = v;
            }
        };
    }
    set!(horizon_t, horizon, "horizon");
    set!(history_n, history, "history");
    set!(epochs, epochs, "epochs");
    set!(learning_rate, lr, "lr");
    set!(hidden_units, hidden, "hidden");
    set!(batch_size, batch_size, "batch_size");
    set!(lambda_reg, lambda, "lambda");
    set!(eval_every, eval_every, "eval_every");
    set!(train_fraction, train_fraction, "train_fraction");
    set!(scorer_width, scorer_width, "scorer_width");
    set!(chunk_size, chunk_size, "chunk_size");
    if let Some(b) = pick_bool(flags.purge_split, file, "purge_split")? {
        t.purge_split = b;
    }
    if let Some(b) = pick_bool(flags.attn_tanh, file, "attn_tanh")? {
        t.attn_tanh = b;
    }
    if let Some(b) = pick_bool(flags.per_gate_gc, file, "per_gate_gc")? {
        t.per_gate_gc = b;
    }
    if let Some(e) = pick::<String>(flags.exec.clone(), file, "exec")? {
        t.exec = parse_exec(&e)?;
    }
    t.seed = match pick(flags.seed, file, "seed")? {
        Some(s) => s,
        None => match env_seed {
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| format!("A3T_SEED: cannot parse {v:?}"))?,
            None => 0,
        },
    };
    t.validate().map_err(|e| e.to_string())?;

    let out_dir =
        pick(flags.out_dir.clone(), file, "out_dir")?.unwrap_or_else(|| PathBuf::from("runs"));
    Ok(RunConfig {
        source,
        out_dir,
        train: t,
    })
}

impl RunConfig {
    /// `key = value` text that [`ConfigFile::parse`] reads back to the same run.
    pub fn to_config_text(&self) -> String {
        let t = &self.train;
        let mut lines = Vec::new();
        match &self.source {
            DataSource::Files { graph, speeds } => {
                lines.push(format!("graph = {}", graph.display()));
                lines.push(format!("speeds = {}", speeds.display()));
            }
            DataSource::Synth { nodes, steps } => lines.push(format!("synth = {nodes}x{steps}")),
        }
        lines.push(format!("out_dir = {}", self.out_dir.display()));
        lines.push(format!("model = {}", t.model_kind));
        lines.push(format!("horizon = {}", t.horizon_t));
        lines.push(format!("history = {}", t.history_n));
        lines.push(format!("epochs = {}", t.epochs));
        lines.push(format!("lr = {}", t.learning_rate));
        lines.push(format!("hidden = {}", t.hidden_units));
        lines.push(format!("seed = {}", t.seed));
        lines.push(format!("batch_size = {}", t.batch_size));
        lines.push(format!("lambda = {}", t.lambda_reg));
        lines.push(format!("eval_every = {}", t.eval_every));
        lines.push(format!("train_fraction = {}", t.train_fraction));
        lines.push(format!("purge_split = {}", t.purge_split));
        lines.push(format!("scorer_width = {}", t.scorer_width));
        lines.push(format!("attn_tanh = {}", t.attn_tanh));
        lines.push(format!("per_gate_gc = {}", t.per_gate_gc));
        lines.push(format!("chunk_size = {}", t.chunk_size));
        lines.push(format!("exec = {}", t.exec.name()));
        lines.join("\n") + "\n"
    }

    /// The same settings as ordered JSON-ready pairs.
    pub fn pairs(&self) -> BTreeMap<String, String> {
        ConfigFile::parse(&self.to_config_text())
            .expect("rendered config parses")
            .values
    }
}
