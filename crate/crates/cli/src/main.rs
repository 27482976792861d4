use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use a3tgcn::model::ModelKind;
use a3tgcn::ExecMode;

mod commands;
mod config;
mod fail;
mod manifest;

use commands::{CompareArgs, EvalArgs, ModelInputs, PerturbArgs, TrainArgs};
use config::Overrides;
use fail::{Fail, EXIT_CONFIG};

/// Traffic speed forecasting with attention temporal graph convolution.
#[derive(Parser)]
#[command(name = "a3tgcn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write a checkpoint, its history and a manifest.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// ha, gcn, gru, tgcn or a3tgcn.
        #[arg(long)]
        model: Option<String>,
    },
    /// Evaluate a checkpoint on the test split of its data.
    Eval {
        #[command(flatten)]
        inputs: InputArgs,
        /// Directory for eval_metrics.csv (default: next to the checkpoint).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also write denormalized test predictions to this CSV.
        #[arg(long)]
        dump_predictions: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Evaluate a checkpoint on noisy copies of its data.
    Perturb {
        #[command(flatten)]
        inputs: InputArgs,
        /// gaussian or poisson.
        #[arg(long)]
        kind: String,
        /// data (noise in speed units) or minmax (noise rescaled on its own).
        #[arg(long, default_value = "data")]
        scaling: String,
        /// Noise seed (default: $A3T_SEED, else 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV (default: perturb_KIND.csv next to the checkpoint).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Compare analytic gradients with finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scale the backward pass of one op, to see the check catch it.
        #[arg(long, hide = true)]
        corrupt_op: Option<String>,
    },
    /// Train several models on the same data and tabulate their test metrics.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated model names.
        #[arg(long, value_delimiter = ',', default_value = "ha,gcn,gru,tgcn,a3tgcn")]
        models: Vec<String>,
        /// Comma-separated horizons (default: the configured horizon).
        #[arg(long, value_delimiter = ',')]
        horizons: Vec<usize>,
        /// Output CSV (default: OUT_DIR/comparison.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Data and hyperparameters shared by `train` and `compare`. Flags override
/// the config file, which overrides the defaults.
#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Adjacency matrix CSV.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Speed matrix CSV, one row per time step and one column per node.
    #[arg(long)]
    speeds: Option<PathBuf>,
    /// Generate NODESxSTEPS synthetic data instead of reading files.
    #[arg(long, value_name = "NODESxSTEPS")]
    synth: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    history: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Default: config file, then $A3T_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// L2 weight penalty.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Keep test windows that overlap the last training target.
    #[arg(long)]
    no_purge: bool,
    #[arg(long)]
    scorer_width: Option<usize>,
    /// tanh inside the attention scorer.
    #[arg(long)]
    attn_tanh: bool,
    /// Separate graph-convolution weights per gate.
    #[arg(long)]
    per_gate_gc: bool,
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn overrides(self, model: Option<String>) -> (Overrides, Option<PathBuf>) {
        let flags = Overrides {
            graph: self.graph,
            speeds: self.speeds,
            synth: self.synth,
            out_dir: self.out_dir,
            model,
            horizon: self.horizon,
            history: self.history,
            epochs: self.epochs,
            lr: self.lr,
            hidden: self.hidden,
            seed: self.seed,
            batch_size: self.batch_size,
            lambda: self.lambda,
            eval_every: self.eval_every,
            train_fraction: self.train_fraction,
            purge_split: self.no_purge.then_some(false),
            scorer_width: self.scorer_width,
            attn_tanh: self.attn_tanh.then_some(true),
            per_gate_gc: self.per_gate_gc.then_some(true),
            chunk_size: self.chunk_size,
            exec: self.sequential.then(|| "sequential".to_string()),
        };
        (flags, self.config)
    }
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    speeds: Option<PathBuf>,
    /// Take the checkpoint and data paths from a training manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl From<InputArgs> for ModelInputs {
    fn from(a: InputArgs) -> Self {
        Self {
            checkpoint: a.checkpoint,
            graph: a.graph,
            speeds: a.speeds,
            manifest: a.manifest,
        }
    }
}

fn exec(sequential: bool) -> ExecMode {
    if sequential {
        ExecMode::Sequential
    } else {
        ExecMode::default()
    }
}

fn env_seed() -> Option<String> {
    std::env::var("A3T_SEED").ok()
}

fn run(command: Command) -> Result<(), Fail> {
    let env_seed = env_seed();
    match command {
        Command::Train { run, model } => {
            let (flags, config) = run.overrides(model);
            commands::train_cmd(TrainArgs {
                flags,
                config: config.as_deref(),
                env_seed: env_seed.as_deref(),
            })
        }
        Command::Eval {
            inputs,
            out_dir,
            dump_predictions,
            sequential,
        } => commands::eval_cmd(EvalArgs {
            inputs: inputs.into(),
            out_dir,
            dump_predictions,
            exec: exec(sequential),
        }),
        Command::Perturb {
            inputs,
            kind,
            scaling,
            seed,
            out,
            sequential,
        } => {
            let seed = match seed {
                Some(s) => s,
                None => match env_seed {
                    Some(v) => v
                        .trim()
                        .parse()
                        .map_err(|_| Fail::config(format!("A3T_SEED: cannot parse {v:?}")))?,
                    None => 0,
                },
            };
            commands::perturb_cmd(PerturbArgs {
                inputs: inputs.into(),
                kind,
                scaling,
                seed,
                out,
                exec: exec(sequential),
            })
        }
        Command::Gradcheck {
            trials,
            seed,
            corrupt_op,
        } => commands::gradcheck_cmd(trials, seed, corrupt_op.as_deref()),
        Command::Compare {
            run,
            models,
            horizons,
            out,
        } => {
            let models = models
                .iter()
                .map(|m| m.trim().parse::<ModelKind>())
                .collect::<a3tgcn::Result<Vec<_>>>()
                .map_err(|e| Fail::config(e.to_string()))?;
            let (flags, config) = run.overrides(None);
            commands::compare_cmd(CompareArgs {
                train: TrainArgs {
                    flags,
                    config: config.as_deref(),
                    env_seed: env_seed.as_deref(),
                },
                models,
                horizons,
                out,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = match &cli.command {
        Command::Train { .. } => "train",
        Command::Eval { .. } => "eval",
        Command::Perturb { .. } => "perturb",
        Command::Gradcheck { .. } => "gradcheck",
        Command::Compare { .. } => "compare",
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(fail) => {
            eprintln!("error: {fail}");
            if fail.code == EXIT_CONFIG {
                let mut cmd = Cli::command();
                cmd.build();
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    eprintln!("\n{}", sub.render_usage());
                }
            }
            ExitCode::from(fail.code)
        }
    }
}
