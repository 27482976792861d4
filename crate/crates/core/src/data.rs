//! Speed matrices, scaling, sliding windows, train/test splits, noise
//! perturbation and a synthetic road-network generator.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::csvio::read_matrix;
use crate::error::{Error, Result};
use crate::graph::RoadGraph;
use crate::tensor::Tensor;

/// Time-by-node speed observations (`M x N`).
///
/// `scale` is `None` for raw speeds and holds the divisor after
/// [`FeatureMatrix::normalize`].
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    values: Tensor,
    scale: Option<f64>,
}

impl FeatureMatrix {
    /// Raw speeds; all entries must be finite and non-negative.
    pub fn from_raw(values: Tensor) -> Result<Self> {
        if let Some((i, v)) = values
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            let (r, c) = (i / values.cols(), i % values.cols());
            return Err(Error::Domain(format!(
                "speed at step {r}, node {c} is {v}; speeds must be finite and non-negative"
            )));
        }
        Ok(Self {
            values,
            scale: None,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.values.rows()
    }

    pub fn n_nodes(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    /// Divisor recorded by normalization, if normalized.
    pub fn scale_max(&self) -> Option<f64> {
        self.scale
    }

    pub fn is_normalized(&self) -> bool {
        self.scale.is_some()
    }

    /// Divides by the global maximum.
    pub fn normalize(&self) -> Result<Self> {
        if self.scale.is_some() {
            return Err(Error::Contract("matrix is already normalized".into()));
        }
        let max = self.values.max_value();
        if !(max.is_finite() && max > 0.0) {
            return Err(Error::Domain(
                "cannot normalize an all-zero speed matrix".into(),
            ));
        }
        self.normalize_with(max)
    }

    /// Divides by an externally fixed scale (e.g. the one a model was trained with).
    pub fn normalize_with(&self, scale: f64) -> Result<Self> {
        if self.scale.is_some() {
            return Err(Error::Contract("matrix is already normalized".into()));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Domain(format!(
                "scale must be positive, got {scale}"
            )));
        }
        Ok(Self {
            values: self.values.map(|v| v / scale),
            scale: Some(scale),
        })
    }

    pub fn denormalize(&self) -> Self {
        match self.scale {
            Some(s) => Self {
                values: self.values.map(|v| v * s),
                scale: None,
            },
            None => self.clone(),
        }
    }
}

/// Loads an `M x N` speed CSV and checks `N` against the graph.
pub fn load_speed_matrix(path: impl AsRef<Path>, graph: &RoadGraph) -> Result<FeatureMatrix> {
    let m = read_matrix(path.as_ref())?;
    if m.cols() != graph.n_nodes() {
        return Err(Error::Contract(format!(
            "speed matrix has {} nodes but the graph has {}",
            m.cols(),
            graph.n_nodes()
        )));
    }
    FeatureMatrix::from_raw(m)
}

/// One supervised example: `N x n` history and `N x T` future.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// Index of the first input row in the source matrix.
    pub start: usize,
    pub input: Tensor,
    pub target: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset {
    pub samples: Vec<Sample>,
    pub history: usize,
    pub horizon: usize,
    pub nodes: usize,
    /// Scale of the source matrix (1 for raw data).
    pub scale: f64,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Stacks the selected samples into `(B·N) x n` inputs and `(B·N) x T` targets.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Tensor) {
        let inputs: Vec<&Tensor> = indices.iter().map(|&i| &self.samples[i].input).collect();
        let targets: Vec<&Tensor> = indices.iter().map(|&i| &self.samples[i].target).collect();
        (
            Tensor::vstack(&inputs).expect("uniform sample shapes"),
            Tensor::vstack(&targets).expect("uniform sample shapes"),
        )
    }

    fn subset(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            samples: self.samples[range].to_vec(),
            history: self.history,
            horizon: self.horizon,
            nodes: self.nodes,
            scale: self.scale,
        }
    }
}

/// Stride-1 windows: sample `k` reads rows `[k, k+n)` and predicts `[k+n, k+n+T)`.
pub fn make_windows(fm: &FeatureMatrix, history: usize, horizon: usize) -> Result<WindowedDataset> {
    let m = fm.n_steps();
    if history == 0 || horizon == 0 {
        return Err(Error::Contract(
            "history and horizon must be positive".into(),
        ));
    }
    if m < history + horizon {
        return Err(Error::Contract(format!(
            "{m} time steps cannot hold a window of {history} + {horizon}"
        )));
    }
    let nodes = fm.n_nodes();
    let x = fm.values();
    let samples = (0..=m - history - horizon)
        .map(|k| {
            let mut input = Tensor::zeros(nodes, history);
            let mut target = Tensor::zeros(nodes, horizon);
            for node in 0..nodes {
                for j in 0..history {
                    input.set(node, j, x.get(k + j, node));
                }
                for t in 0..horizon {
                    target.set(node, t, x.get(k + history + t, node));
                }
            }
            Sample {
                start: k,
                input,
                target,
            }
        })
        .collect();
    Ok(WindowedDataset {
        samples,
        history,
        horizon,
        nodes,
        scale: fm.scale_max().unwrap_or(1.0),
    })
}

fn split_point(count: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Contract(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let k = (count as f64 * train_fraction).floor() as usize;
    if k == 0 || k >= count {
        return Err(Error::Contract(format!(
            "splitting {count} samples at {train_fraction} leaves one side empty"
        )));
    }
    Ok(k)
}

/// Chronological split: the first `⌊count·fraction⌋` samples train, the rest test.
pub fn split_train_test(
    ds: &WindowedDataset,
    train_fraction: f64,
) -> Result<(WindowedDataset, WindowedDataset)> {
    let k = split_point(ds.len(), train_fraction)?;
    Ok((ds.subset(0..k), ds.subset(k..ds.len())))
}

/// Like [`split_train_test`], but also drops the `n + T − 1` test samples
/// whose rows overlap the last training target, so no test input row was
/// ever seen as a training target.
pub fn split_train_test_purged(
    ds: &WindowedDataset,
    train_fraction: f64,
) -> Result<(WindowedDataset, WindowedDataset)> {
    let k = split_point(ds.len(), train_fraction)?;
    let first_test = k + ds.history + ds.horizon - 1;
    if first_test >= ds.len() {
        return Err(Error::Contract(format!(
            "no test samples remain after purging {} overlapping windows",
            ds.history + ds.horizon - 1
        )));
    }
    Ok((ds.subset(0..k), ds.subset(first_test..ds.len())))
}

/// σ values of the Gaussian perturbation grid.
pub const GAUSSIAN_SIGMAS: [f64; 5] = [0.2, 0.4, 0.8, 1.0, 2.0];
/// λ values of the Poisson perturbation grid.
pub const POISSON_LAMBDAS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    Poisson,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Poisson => "poisson",
        }
    }

    /// The standard parameter grid for this kind.
    pub fn grid(self) -> [f64; 5] {
        match self {
            NoiseKind::Gaussian => GAUSSIAN_SIGMAS,
            NoiseKind::Poisson => POISSON_LAMBDAS,
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(NoiseKind::Gaussian),
            "poisson" => Ok(NoiseKind::Poisson),
            other => Err(Error::Contract(format!("unknown noise kind {other:?}"))),
        }
    }
}

/// How a drawn noise matrix is brought onto the `[0, 1]` data scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseScaling {
    /// Noise is drawn in raw speed units and divided by the data's scale.
    DataScale,
    /// Noise matrix min-max rescaled to `[0, 1]` on its own. Location-scale
    /// families (Gaussian) then lose their dependence on σ.
    MinMax,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// σ for Gaussian, λ for Poisson.
    pub param: f64,
    pub seed: u64,
    /// Set when `param` is deliberately off the standard grid.
    pub custom: bool,
    pub scaling: NoiseScaling,
}

impl NoiseSpec {
    /// A grid point; off-grid values are rejected unless built with [`NoiseSpec::custom`].
    pub fn new(kind: NoiseKind, param: f64, seed: u64) -> Result<Self> {
        if !kind.grid().contains(&param) {
            return Err(Error::Domain(format!(
                "{} parameter {param} is not on the grid {:?}",
                kind.name(),
                kind.grid()
            )));
        }
        Ok(Self {
            kind,
            param,
            seed,
            custom: false,
            scaling: NoiseScaling::DataScale,
        })
    }

    pub fn custom(kind: NoiseKind, param: f64, seed: u64) -> Self {
        Self {
            kind,
            param,
            seed,
            custom: true,
            scaling: NoiseScaling::DataScale,
        }
    }

    pub fn with_scaling(mut self, scaling: NoiseScaling) -> Self {
        self.scaling = scaling;
        self
    }
}

/// Adds seeded noise to a normalized matrix and clips the result to `[0, 1]`.
pub fn add_noise(fm: &FeatureMatrix, spec: &NoiseSpec) -> Result<FeatureMatrix> {
    let Some(scale) = fm.scale_max() else {
        return Err(Error::Contract("noise is added to normalized data".into()));
    };
    if !(spec.param.is_finite() && spec.param > 0.0) {
        return Err(Error::Domain(format!(
            "{} parameter must be positive, got {}",
            spec.kind.name(),
            spec.param
        )));
    }
    if !spec.custom && !spec.kind.grid().contains(&spec.param) {
        return Err(Error::Domain(format!(
            "{} parameter {} is off-grid and not flagged custom",
            spec.kind.name(),
            spec.param
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let count = fm.values().len();
    let mut noise: Vec<f64> = match spec.kind {
        NoiseKind::Gaussian => {
            let d = Normal::new(0.0, spec.param).map_err(|e| Error::Domain(e.to_string()))?;
            (0..count).map(|_| d.sample(&mut rng)).collect()
        }
        NoiseKind::Poisson => {
            let d = Poisson::new(spec.param).map_err(|e| Error::Domain(e.to_string()))?;
            (0..count).map(|_| d.sample(&mut rng)).collect()
        }
    };

    match spec.scaling {
        NoiseScaling::DataScale => noise.iter_mut().for_each(|v| *v /= scale),
        NoiseScaling::MinMax => {
            let lo = noise.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = noise.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            noise
                .iter_mut()
                .for_each(|v| *v = if span > 0.0 { (*v - lo) / span } else { 0.0 });
        }
    }

    let mut values = fm.values().clone();
    for (v, n) in values.as_mut_slice().iter_mut().zip(&noise) {
        *v = (*v + n).clamp(0.0, 1.0);
    }
    Ok(FeatureMatrix {
        values,
        scale: fm.scale,
    })
}

/// Mean free-flow speed of the synthetic generator.
pub const FREE_FLOW_BASE: f64 = 45.0;
/// Daily swing around [`FREE_FLOW_BASE`].
pub const FREE_FLOW_AMPLITUDE: f64 = 10.0;

/// Parameters of the synthetic traffic generator.
///
/// Every node follows the same free-flow daily profile `s(t)` minus a congestion
/// depth `c_i(t) ≥ 0`. Congestion spreads along the road graph and
/// dissipates: `c(t+1) = max(0, ρ·[(1−κ)·c(t) + κ·Â·c(t)] + ε(t))` with
/// seeded Gaussian `ε`. On a ring `Â` is row-stochastic, so `Â·c` is the
/// neighbourhood mean.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub nodes: usize,
    pub steps: usize,
    pub seed: u64,
    /// κ: share of the carried-over congestion taken from the neighbourhood.
    pub coupling: f64,
    /// ρ: persistence of congestion.
    pub persistence: f64,
    /// Mean of the per-step innovation; negative values make congestion
    /// sparse and bursty.
    pub noise_mean: f64,
    /// Std-dev of the per-step innovation, in speed units.
    pub noise_std: f64,
    /// Steps per daily cycle (96 = 15-minute bins).
    pub period: f64,
}

impl SynthConfig {
    pub fn new(nodes: usize, steps: usize, seed: u64) -> Self {
        Self {
            nodes,
            steps,
            seed,
            coupling: 1.0,
            persistence: 0.9,
            noise_mean: -1.0,
            noise_std: 2.0,
            period: 96.0,
        }
    }
}

/// Ring road `0 – 1 – … – (N−1) – 0`.
pub fn ring_road(nodes: usize) -> Result<RoadGraph> {
    if nodes < 2 {
        return Err(Error::Domain(format!(
            "a road ring needs at least 2 nodes, got {nodes}"
        )));
    }
    let mut a = Tensor::zeros(nodes, nodes);
    for i in 0..nodes {
        let j = (i + 1) % nodes;
        if i != j {
            a.set(i, j, 1.0);
            a.set(j, i, 1.0);
        }
    }
    RoadGraph::new(a)
}

/// Default synthetic dataset: ring graph and raw speeds.
pub fn synth_traffic(nodes: usize, steps: usize, seed: u64) -> Result<(RoadGraph, FeatureMatrix)> {
    synth_with(&SynthConfig::new(nodes, steps, seed))
}

pub fn synth_with(cfg: &SynthConfig) -> Result<(RoadGraph, FeatureMatrix)> {
    if cfg.steps < 100 {
        return Err(Error::Domain(format!(
            "synthetic series needs at least 100 steps, got {}",
            cfg.steps
        )));
    }
    if !(0.0..=1.0).contains(&cfg.coupling)
        || !(0.0..1.0).contains(&cfg.persistence)
        || cfg.noise_std < 0.0
        || !(cfg.period.is_finite() && cfg.period > 0.0)
    {
        return Err(Error::Domain(
            "invalid synthetic generator parameters".into(),
        ));
    }
    let graph = ring_road(cfg.nodes)?;
    let n = cfg.nodes;
    let a_hat = graph.a_hat();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let phase = rng.random_range(0.0..2.0 * PI);
    let profile = |t: usize| {
        FREE_FLOW_BASE + FREE_FLOW_AMPLITUDE * (2.0 * PI * t as f64 / cfg.period + phase).sin()
    };
    let innovation =
        Normal::new(cfg.noise_mean, cfg.noise_std).map_err(|e| Error::Domain(e.to_string()))?;

    let mut values = Tensor::zeros(cfg.steps, n);
    let mut c = vec![0.0; n];
    for t in 0..cfg.steps {
        for (i, &ci) in c.iter().enumerate() {
            values.set(t, i, (profile(t) - ci).max(0.0));
        }
        let mixed: Vec<f64> = (0..n)
            .map(|i| a_hat.row(i).iter().zip(&c).map(|(w, x)| w * x).sum())
            .collect();
        for i in 0..n {
            let carried = (1.0 - cfg.coupling) * c[i] + cfg.coupling * mixed[i];
            c[i] = (cfg.persistence * carried + innovation.sample(&mut rng)).max(0.0);
        }
    }
    Ok((graph, FeatureMatrix::from_raw(values)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn ramp(m: usize, n: usize) -> FeatureMatrix {
        let mut t = Tensor::zeros(m, n);
        for r in 0..m {
            for c in 0..n {
                t.set(r, c, r as f64);
            }
        }
        FeatureMatrix::from_raw(t).unwrap()
    }

    fn csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_examples() {
        let graph = RoadGraph::new(Tensor::zeros(3, 3)).unwrap();
        let f = csv(&"0,0,0\n".repeat(5));
        let fm = load_speed_matrix(f.path(), &graph).unwrap();
        assert_eq!((fm.n_steps(), fm.n_nodes()), (5, 3));

        let f = csv(&"0,0,0,0\n".repeat(5));
        assert!(matches!(
            load_speed_matrix(f.path(), &graph),
            Err(Error::Contract(_))
        ));

        let f = csv("1,2,3\n4,abc,6\n");
        assert!(matches!(
            load_speed_matrix(f.path(), &graph),
            Err(Error::Parse { row: 2, col: 2, .. })
        ));

        let f = csv("1,-2,3\n");
        assert!(matches!(
            load_speed_matrix(f.path(), &graph),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn normalization_examples() {
        let fm = FeatureMatrix::from_raw(Tensor::from_rows(&[[70.0, 35.0], [0.0, 14.0]])).unwrap();
        let norm = fm.normalize().unwrap();
        assert_eq!(norm.scale_max(), Some(70.0));
        assert_eq!(norm.values().get(0, 1), 0.5);
        let back = norm.denormalize();
        for (a, b) in back.values().as_slice().iter().zip(fm.values().as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }

        let constant = FeatureMatrix::from_raw(Tensor::filled(3, 2, 12.5)).unwrap();
        assert_eq!(
            constant.normalize().unwrap().values(),
            &Tensor::filled(3, 2, 1.0)
        );

        let zeros = FeatureMatrix::from_raw(Tensor::zeros(3, 2)).unwrap();
        assert!(matches!(zeros.normalize(), Err(Error::Domain(_))));
    }

    #[test]
    fn window_counts_and_contents() {
        let ds = make_windows(&ramp(5, 2), 2, 1).unwrap();
        assert_eq!(ds.len(), 3);
        let first = &ds.samples[0];
        for node in 0..2 {
            assert_eq!(first.input.row(node), &[0.0, 1.0]);
            assert_eq!(first.target.row(node), &[2.0]);
        }
        assert!(matches!(
            make_windows(&ramp(3, 2), 2, 2),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn split_examples() {
        let ds = make_windows(&ramp(12, 1), 2, 1).unwrap();
        assert_eq!(ds.len(), 10);
        let (train, test) = split_train_test(&ds, 0.8).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let (train, test) = split_train_test(&ds, 0.99).unwrap();
        assert_eq!((train.len(), test.len()), (9, 1));
        assert!(train.samples.last().unwrap().start < test.samples[0].start);
        assert!(split_train_test(&ds, 0.01).is_err());
        assert!(split_train_test(&ds, 1.0).is_err());
    }

    #[test]
    fn purged_split_is_leakage_free() {
        let ds = make_windows(&ramp(60, 1), 4, 3).unwrap();
        let (train, test) = split_train_test_purged(&ds, 0.8).unwrap();
        let last_target = train
            .samples
            .iter()
            .map(|s| s.start + ds.history + ds.horizon - 1)
            .max()
            .unwrap();
        let first_input = test.samples.iter().map(|s| s.start).min().unwrap();
        assert!(last_target < first_input);
        assert_eq!(
            train.len() + test.len() + ds.history + ds.horizon - 1,
            ds.len()
        );
    }

    #[test]
    fn noise_examples() {
        let (_, raw) = synth_traffic(4, 200, 3).unwrap();
        let fm = raw.normalize().unwrap();
        let a = add_noise(&fm, &NoiseSpec::new(NoiseKind::Gaussian, 0.2, 9).unwrap()).unwrap();
        let b = add_noise(&fm, &NoiseSpec::new(NoiseKind::Gaussian, 0.2, 9).unwrap()).unwrap();
        let c = add_noise(&fm, &NoiseSpec::new(NoiseKind::Gaussian, 2.0, 9).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for spec in [
            NoiseSpec::new(NoiseKind::Poisson, 16.0, 1).unwrap(),
            NoiseSpec::new(NoiseKind::Gaussian, 2.0, 1)
                .unwrap()
                .with_scaling(NoiseScaling::MinMax),
        ] {
            let out = add_noise(&fm, &spec).unwrap();
            assert!(out
                .values()
                .as_slice()
                .iter()
                .all(|v| (0.0..=1.0).contains(v)));
        }
        assert!(NoiseSpec::new(NoiseKind::Gaussian, 0.3, 1).is_err());
        assert!(add_noise(&fm, &NoiseSpec::custom(NoiseKind::Poisson, 0.0, 1)).is_err());
        assert!(add_noise(&raw, &NoiseSpec::new(NoiseKind::Gaussian, 1.0, 1).unwrap()).is_err());
    }

    #[test]
    fn min_max_gaussian_noise_ignores_sigma() {
        let (_, raw) = synth_traffic(4, 200, 3).unwrap();
        let fm = raw.normalize().unwrap();
        let lo = NoiseSpec::new(NoiseKind::Gaussian, 0.2, 5)
            .unwrap()
            .with_scaling(NoiseScaling::MinMax);
        let hi = NoiseSpec::new(NoiseKind::Gaussian, 2.0, 5)
            .unwrap()
            .with_scaling(NoiseScaling::MinMax);
        let a = add_noise(&fm, &lo).unwrap();
        let b = add_noise(&fm, &hi).unwrap();
        let diff = a
            .values()
            .zip_map(b.values(), |x, y| (x - y).abs())
            .max_value();
        assert!(diff < 1e-12);
    }

    #[test]
    fn vanishing_noise_is_identity() {
        let (_, raw) = synth_traffic(3, 150, 2).unwrap();
        let fm = raw.normalize().unwrap();
        let out = add_noise(&fm, &NoiseSpec::custom(NoiseKind::Gaussian, 1e-12, 4)).unwrap();
        let diff = out
            .values()
            .zip_map(fm.values(), |x, y| (x - y).abs())
            .max_value();
        assert!(diff < 1e-12);
    }

    #[test]
    fn noiseless_synth_is_the_daily_profile() {
        let mut cfg = SynthConfig::new(5, 300, 8);
        cfg.noise_std = 0.0;
        let (_, fm) = synth_with(&cfg).unwrap();
        let p = cfg.period as usize;
        for t in 0..300 {
            let row = fm.values().row(t);
            assert!(row.iter().all(|&v| v == row[0]));
        }
        for node in 0..5 {
            let x = |t: usize| fm.values().get(t, node);
            for t in 0..100 {
                assert!((x(t) - x(t + p)).abs() < 1e-9);
                // half a period apart the sinusoid mirrors around its base
                let mid = (x(t) + x(t + p / 2)) / 2.0;
                assert!((mid - (x(t + 1) + x(t + 1 + p / 2)) / 2.0).abs() < 1e-9);
            }
        }
    }

    fn lagged_correlation(cfg: &SynthConfig, lag: usize) -> f64 {
        let (_, noisy) = synth_with(cfg).unwrap();
        let clean_cfg = SynthConfig {
            noise_std: 0.0,
            ..cfg.clone()
        };
        let (_, clean) = synth_with(&clean_cfg).unwrap();
        let mut d = noisy.values().zip_map(clean.values(), |a, b| a - b);
        let (m, n) = d.shape();
        for i in 0..n {
            let mean = (0..m).map(|t| d.get(t, i)).sum::<f64>() / m as f64;
            for t in 0..m {
                d.set(t, i, d.get(t, i) - mean);
            }
        }
        // node i one step ahead against node i + lag now
        let (mut xy, mut xx) = (0.0, 0.0);
        for t in 0..m - 1 {
            for i in 0..n {
                xy += d.get(t + 1, i) * d.get(t, (i + lag) % n);
                xx += d.get(t, i) * d.get(t, i);
            }
        }
        xy / xx
    }

    #[test]
    fn coupling_correlates_neighbours() {
        let mut cfg = SynthConfig::new(10, 3000, 4);
        let near = lagged_correlation(&cfg, 1);
        let far = lagged_correlation(&cfg, 5);
        assert!(near > 0.15 && far.abs() < 0.05, "near {near}, far {far}");
        cfg.coupling = 0.0;
        assert!(lagged_correlation(&cfg, 1).abs() < 0.05);
        assert!(lagged_correlation(&cfg, 0) > 0.3);
    }

    #[test]
    fn synth_contract() {
        assert_eq!(
            synth_traffic(10, 400, 1).unwrap().1,
            synth_traffic(10, 400, 1).unwrap().1
        );
        assert_ne!(
            synth_traffic(10, 400, 1).unwrap().1,
            synth_traffic(10, 400, 2).unwrap().1
        );
        assert!(synth_traffic(1, 400, 1).is_err());
        assert!(synth_traffic(4, 99, 1).is_err());
        let mut cfg = SynthConfig::new(4, 200, 1);
        cfg.persistence = 1.0;
        assert!(synth_with(&cfg).is_err());
    }

    #[test]
    fn ring_graph_shape() {
        let g = ring_road(10).unwrap();
        let a = g.adjacency();
        for i in 0..10 {
            assert_eq!(a.row(i).iter().sum::<f64>(), 2.0);
            // regular ring: every row of the propagation matrix sums to one
            assert!((g.a_hat().row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(ring_road(2).unwrap().adjacency().get(0, 1), 1.0);
    }

    proptest! {
        #[test]
        fn windows_reconstruct_the_series(m in 4usize..40, n in 1usize..4, h in 1usize..3, nodes in 1usize..4) {
            prop_assume!(m >= n + h);
            let mut t = Tensor::zeros(m, nodes);
            for r in 0..m {
                for c in 0..nodes {
                    t.set(r, c, (r * 7 + c * 3) as f64);
                }
            }
            let fm = FeatureMatrix::from_raw(t.clone()).unwrap();
            let ds = make_windows(&fm, n, h).unwrap();
            prop_assert_eq!(ds.len(), m - n - h + 1);
            // first column of every input, then the tail of the last window and its target
            let mut rebuilt: Vec<Vec<f64>> = ds.samples.iter().map(|s| (0..nodes).map(|c| s.input.get(c, 0)).collect()).collect();
            let last = ds.samples.last().unwrap();
            for j in 1..n {
                rebuilt.push((0..nodes).map(|c| last.input.get(c, j)).collect());
            }
            for j in 0..h {
                rebuilt.push((0..nodes).map(|c| last.target.get(c, j)).collect());
            }
            for (r, row) in rebuilt.iter().enumerate() {
                prop_assert_eq!(row.as_slice(), t.row(r));
            }
        }
    }
}
