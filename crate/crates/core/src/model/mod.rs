//! Forecasting networks and the training objective.
//!
//! Every layer works on batches: `B` samples of an `N`-node graph are stacked
//! into `B·N` rows, so a window is `(B·N) x n` and a hidden state is
//! `(B·N) x H`. With `B = 1` the shapes reduce to the single-graph case.

mod checkpoint;
mod layers;
mod params;

use std::fmt;
use std::str::FromStr;

pub use checkpoint::Checkpoint;
pub use layers::{
    attention, forward, gated_update, gcn_forward, graph_conv, gru_cell, ha_forward, loss, predict,
    recurrent_states, tgcn_cell, AttentionParams, GateParams, GcWeights,
};
pub use params::{layout, param_count, BoundParams, ModelParams, Param, ParamRole, ParamSpec};

use crate::error::{Error, Result};

/// Forecaster family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Per-node mean of the input window.
    Ha,
    /// Two-layer graph convolution over the whole window.
    Gcn,
    /// Gated recurrent sweep without spatial mixing.
    Gru,
    /// Recurrent sweep with graph-convolved inputs, last state to the head.
    Tgcn,
    /// T-GCN sweep followed by soft attention over all hidden states.
    A3tgcn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Ha,
        ModelKind::Gcn,
        ModelKind::Gru,
        ModelKind::Tgcn,
        ModelKind::A3tgcn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ha => "ha",
            ModelKind::Gcn => "gcn",
            ModelKind::Gru => "gru",
            ModelKind::Tgcn => "tgcn",
            ModelKind::A3tgcn => "a3tgcn",
        }
    }

    pub fn is_trainable(self) -> bool {
        self != ModelKind::Ha
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Contract(format!(
                    "unknown model kind {s:?} (expected one of ha, gcn, gru, tgcn, a3tgcn)"
                ))
            })
    }
}

/// Sizes that fix every parameter shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelDims {
    /// Graph size `N`.
    pub nodes: usize,
    /// Input window length `n`.
    pub history: usize,
    /// Hidden units `H`.
    pub hidden: usize,
    /// Forecast horizon `T`.
    pub horizon: usize,
    /// Width of the attention scorer's hidden layer.
    pub scorer_width: usize,
    /// Separate graph-convolution weights for the three gates.
    pub per_gate_gc: bool,
    /// `tanh` between the two scorer layers.
    pub attn_tanh: bool,
}

impl ModelDims {
    pub fn new(nodes: usize, history: usize, hidden: usize, horizon: usize) -> Self {
        Self {
            nodes,
            history,
            hidden,
            horizon,
            scorer_width: 32,
            per_gate_gc: false,
            attn_tanh: false,
        }
    }

    pub fn validate(&self, kind: ModelKind) -> Result<()> {
        let mut fields = vec![
            ("nodes", self.nodes),
            ("history", self.history),
            ("horizon", self.horizon),
        ];
        if kind.is_trainable() {
            fields.push(("hidden", self.hidden));
        }
        if kind == ModelKind::A3tgcn {
            fields.push(("scorer_width", self.scorer_width));
        }
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::Contract(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ModelDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={} n={} H={} T={} S={}",
            self.nodes, self.history, self.hidden, self.horizon, self.scorer_width
        )?;
        if self.per_gate_gc {
            f.write_str(" per-gate-gc")?;
        }
        if self.attn_tanh {
            f.write_str(" attn-tanh")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_parsing() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("lstm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn param_count_is_pure_in_dims() {
        let dims = ModelDims::new(5, 4, 6, 2);
        // gc 1x1, three gates (7x6 + 1x6), attention 30x32 + 32 + 32 + 1, head 6x2 + 2
        let expected = 1 + 3 * (42 + 6) + (30 * 32 + 32 + 32 + 1) + (12 + 2);
        assert_eq!(param_count(ModelKind::A3tgcn, &dims), expected);
        let p = ModelParams::init(ModelKind::A3tgcn, dims.clone(), 3).unwrap();
        assert_eq!(p.param_count(), expected);
        assert!(p.describe().contains(&format!("total {expected}")));
        assert_eq!(param_count(ModelKind::Gcn, &dims), 4 * 6 + 6 * 2);
        assert_eq!(param_count(ModelKind::Ha, &dims), 0);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let dims = ModelDims::new(3, 4, 8, 1);
        let a = ModelParams::init(ModelKind::Tgcn, dims.clone(), 11).unwrap();
        let b = ModelParams::init(ModelKind::Tgcn, dims.clone(), 11).unwrap();
        let c = ModelParams::init(ModelKind::Tgcn, dims, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for p in a.entries() {
            let bound = 1.0 / (p.value.rows() as f64).sqrt();
            match p.role {
                ParamRole::Bias => assert!(p.value.as_slice().iter().all(|&v| v == 0.0)),
                ParamRole::Weight => {
                    assert!(p.value.as_slice().iter().all(|v| v.abs() <= bound))
                }
            }
        }
    }

    #[test]
    fn from_entries_validates_shapes() {
        let dims = ModelDims::new(3, 4, 8, 1);
        let p = ModelParams::zeros(ModelKind::Gru, dims.clone()).unwrap();
        let mut entries = p.entries().to_vec();
        entries[0].value = crate::tensor::Tensor::zeros(2, 2);
        assert!(ModelParams::from_entries(ModelKind::Gru, dims.clone(), entries).is_err());
        let ok = ModelParams::from_entries(ModelKind::Gru, dims, p.entries().to_vec()).unwrap();
        assert_eq!(ok, p);
    }

    #[test]
    fn zero_dims_rejected() {
        let mut dims = ModelDims::new(3, 4, 8, 1);
        dims.hidden = 0;
        assert!(ModelParams::zeros(ModelKind::Gru, dims.clone()).is_err());
        // HA has no hidden layer
        assert!(ModelParams::zeros(ModelKind::Ha, dims).is_ok());
    }
}
