use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{evaluate, MetricsReport};
use super::optim::{adam_step, AdamState};
use crate::data::{
    make_windows, split_train_test, split_train_test_purged, FeatureMatrix, WindowedDataset,
};
use crate::error::{Error, Result};
use crate::exec::{map_ordered, ExecMode};
use crate::graph::RoadGraph;
use crate::model::{forward, ModelDims, ModelKind, ModelParams};
use crate::tensor::{Tape, Tensor};

/// Hyperparameters of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model_kind: ModelKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub hidden_units: usize,
    pub history_n: usize,
    pub horizon_t: usize,
    pub lambda_reg: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Test metrics are computed every `eval_every` epochs and after the last one.
    pub eval_every: usize,
    pub train_fraction: f64,
    /// Drop test windows that overlap the last training target.
    pub purge_split: bool,
    pub scorer_width: usize,
    pub attn_tanh: bool,
    pub per_gate_gc: bool,
    /// Samples per tape. Fixed chunking keeps results independent of `exec`.
    pub chunk_size: usize,
    pub exec: ExecMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model_kind: ModelKind::A3tgcn,
            learning_rate: 0.001,
            epochs: 5000,
            hidden_units: 64,
            history_n: 12,
            horizon_t: 1,
            lambda_reg: 0.0015,
            batch_size: 32,
            seed: 0,
            eval_every: 10,
            train_fraction: 0.8,
            purge_split: true,
            scorer_width: 32,
            attn_tanh: false,
            per_gate_gc: false,
            chunk_size: 8,
            exec: ExecMode::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden_units", self.hidden_units),
            ("history_n", self.history_n),
            ("horizon_t", self.horizon_t),
            ("batch_size", self.batch_size),
            ("eval_every", self.eval_every),
            ("scorer_width", self.scorer_width),
            ("chunk_size", self.chunk_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Contract(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Contract(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.lambda_reg.is_finite() && self.lambda_reg >= 0.0) {
            return Err(Error::Contract(format!(
                "lambda_reg must be non-negative, got {}",
                self.lambda_reg
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Contract(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    pub fn dims(&self, nodes: usize) -> ModelDims {
        ModelDims {
            nodes,
            history: self.history_n,
            hidden: self.hidden_units,
            horizon: self.horizon_t,
            scorer_width: self.scorer_width,
            per_gate_gc: self.per_gate_gc,
            attn_tanh: self.attn_tanh,
        }
    }

    /// Seeded initial parameters for this configuration.
    pub fn init_params(&self, nodes: usize) -> Result<ModelParams> {
        ModelParams::init(self.model_kind, self.dims(nodes), self.seed)
    }
}

/// Chronologically split windows of one normalized matrix.
#[derive(Clone, Debug)]
pub struct SplitDataset {
    pub train: WindowedDataset,
    pub test: WindowedDataset,
}

impl SplitDataset {
    /// Windows `fm` with the config's history and horizon, then splits it.
    pub fn prepare(fm: &FeatureMatrix, config: &TrainConfig) -> Result<Self> {
        let ds = make_windows(fm, config.history_n, config.horizon_t)?;
        let (train, test) = if config.purge_split {
            split_train_test_purged(&ds, config.train_fraction)?
        } else {
            split_train_test(&ds, config.train_fraction)?
        };
        Ok(Self { train, test })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    /// Mean batch loss of every epoch.
    pub epoch_losses: Vec<f64>,
    pub evals: Vec<EvalRecord>,
    /// Epoch whose parameters were kept (lowest test RMSE).
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    /// `epoch,train_loss,test_rmse,test_mae,test_accuracy,test_r2,test_var`
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("epoch,train_loss,test_rmse,test_mae,test_accuracy,test_r2,test_var\n");
        for r in &self.evals {
            s.push_str(&format!("{},{}", r.epoch, r.train_loss));
            for f in r.metrics.csv_fields() {
                s.push(',');
                s.push_str(&f);
            }
            s.push('\n');
        }
        s
    }

    pub fn best(&self) -> Option<&EvalRecord> {
        let epoch = self.best_epoch?;
        self.evals.iter().find(|r| r.epoch == epoch)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the best test RMSE seen (initial ones if never evaluated).
    pub params: ModelParams,
    pub history: TrainHistory,
}

/// Loss and per-parameter gradients over the selected samples.
///
/// The batch is cut into fixed chunks of `chunk_size` samples, each chunk is
/// differentiated on its own tape, and gradients are summed in chunk order.
/// The loss is the mean squared error over the whole batch plus
/// `lambda_reg · Σ‖W‖²`.
pub fn batch_gradient(
    graph: &RoadGraph,
    params: &ModelParams,
    data: &WindowedDataset,
    indices: &[usize],
    lambda_reg: f64,
    chunk_size: usize,
    mode: ExecMode,
) -> Result<(f64, Vec<Tensor>)> {
    if indices.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let entries = (indices.len() * data.nodes * data.horizon) as f64;
    let chunks: Vec<(usize, &[usize])> = indices.chunks(chunk_size.max(1)).enumerate().collect();

    let per_chunk = map_ordered(mode, &chunks, |&(ci, idx)| -> Result<(f64, Vec<Tensor>)> {
        let (x, y) = data.batch(idx);
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let x = tape.constant(x);
        let y = tape.constant(y);
        let pred = forward(&mut tape, graph, x, params, &bound)?;
        let diff = tape.sub(pred, y)?;
        let sse = tape.sum_squares(diff);
        let mut total = tape.scale(sse, 1.0 / entries);
        if ci == 0 && lambda_reg > 0.0 {
            for w in bound.weight_vars() {
                let sq = tape.sum_squares(w);
                let term = tape.scale(sq, lambda_reg);
                total = tape.add(total, term)?;
            }
        }
        let loss = tape.value(total).get(0, 0);
        let mut grads = tape.backward(total)?;
        let g = bound.vars().iter().map(|&v| grads.take(v)).collect();
        Ok((loss, g))
    });

    let mut loss = 0.0;
    let mut sum: Option<Vec<Tensor>> = None;
    for r in per_chunk {
        let (l, g) = r?;
        loss += l;
        match &mut sum {
            None => sum = Some(g),
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| a.add_assign(b)),
        }
    }
    Ok((loss, sum.expect("non-empty batch")))
}

/// Predictions for every sample, stacked as `(S·N) x T`, in normalized units.
pub fn predict_dataset(
    graph: &RoadGraph,
    params: &ModelParams,
    data: &WindowedDataset,
    chunk_size: usize,
    mode: ExecMode,
) -> Result<(Tensor, Tensor)> {
    let indices: Vec<usize> = (0..data.len()).collect();
    let chunks: Vec<&[usize]> = indices.chunks(chunk_size.max(1)).collect();
    let parts = map_ordered(mode, &chunks, |idx| -> Result<(Tensor, Tensor)> {
        let (x, y) = data.batch(idx);
        let mut tape = Tape::new();
        let bound = params.bind_frozen(&mut tape);
        let x = tape.constant(x);
        let pred = forward(&mut tape, graph, x, params, &bound)?;
        Ok((y, tape.value(pred).clone()))
    });
    let parts: Vec<(Tensor, Tensor)> = parts.into_iter().collect::<Result<_>>()?;
    let truth: Vec<&Tensor> = parts.iter().map(|p| &p.0).collect();
    let pred: Vec<&Tensor> = parts.iter().map(|p| &p.1).collect();
    Ok((Tensor::vstack(&truth)?, Tensor::vstack(&pred)?))
}

/// Metrics on the original speed scale, jointly over all horizon steps.
pub fn evaluate_model(
    graph: &RoadGraph,
    params: &ModelParams,
    data: &WindowedDataset,
    chunk_size: usize,
    mode: ExecMode,
) -> Result<MetricsReport> {
    let (truth, pred) = predict_dataset(graph, params, data, chunk_size, mode)?;
    let s = data.scale;
    evaluate(&truth.map(|v| v * s), &pred.map(|v| v * s))
}

/// Mini-batch Adam training with periodic test evaluation.
pub fn train(config: &TrainConfig, graph: &RoadGraph, data: &SplitDataset) -> Result<TrainOutcome> {
    config.validate()?;
    let nodes = graph.n_nodes();
    for (name, ds) in [("train", &data.train), ("test", &data.test)] {
        if ds.nodes != nodes || ds.history != config.history_n || ds.horizon != config.horizon_t {
            return Err(Error::Contract(format!(
                "{name} set windows ({} nodes, n={}, T={}) do not match the config ({nodes} nodes, n={}, T={})",
                ds.nodes, ds.history, ds.horizon, config.history_n, config.horizon_t
            )));
        }
        if ds.is_empty() {
            return Err(Error::Contract(format!("{name} set is empty")));
        }
    }

    let mut params = config.init_params(nodes)?;
    let mut history = TrainHistory::default();

    if !config.model_kind.is_trainable() {
        let all: Vec<usize> = (0..data.train.len()).collect();
        let (train_loss, _) = batch_gradient(
            graph,
            &params,
            &data.train,
            &all,
            0.0,
            config.chunk_size,
            config.exec,
        )?;
        let metrics = evaluate_model(graph, &params, &data.test, config.chunk_size, config.exec)?;
        history.evals.push(EvalRecord {
            epoch: 0,
            train_loss,
            metrics,
        });
        history.best_epoch = Some(0);
        return Ok(TrainOutcome { params, history });
    }

    let mut state = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut best: Option<(f64, ModelParams)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let (loss, grads) = batch_gradient(
                graph,
                &params,
                &data.train,
                idx,
                config.lambda_reg,
                config.chunk_size,
                config.exec,
            )?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite { epoch, batch: b });
            }
            adam_step(&mut params, &grads, &mut state, config.learning_rate)?;
            loss_sum += loss;
            batches += 1;
        }
        let epoch_loss = loss_sum / batches as f64;
        history.epoch_losses.push(epoch_loss);

        if epoch % config.eval_every == 0 || epoch == config.epochs {
            let metrics =
                evaluate_model(graph, &params, &data.test, config.chunk_size, config.exec)?;
            history.evals.push(EvalRecord {
                epoch,
                train_loss: epoch_loss,
                metrics,
            });
            if best.as_ref().is_none_or(|(rmse, _)| metrics.rmse < *rmse) {
                best = Some((metrics.rmse, params.clone()));
                history.best_epoch = Some(epoch);
            }
        }
    }

    let params = best.map_or(params, |(_, p)| p);
    Ok(TrainOutcome { params, history })
}

/// Windows an already normalized matrix per `config` and trains.
pub fn train_on_matrix(
    config: &TrainConfig,
    graph: &RoadGraph,
    normalized: &FeatureMatrix,
) -> Result<TrainOutcome> {
    let data = SplitDataset::prepare(normalized, config)?;
    train(config, graph, &data)
}
