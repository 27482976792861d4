use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelDims, ModelKind};
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Weights enter the regularizer; biases do not.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    Weight,
    Bias,
}

impl ParamRole {
    pub fn name(self) -> &'static str {
        match self {
            ParamRole::Weight => "weight",
            ParamRole::Bias => "bias",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub role: ParamRole,
    pub value: Tensor,
}

/// Shape of one learnable tensor in a model layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub role: ParamRole,
    pub rows: usize,
    pub cols: usize,
}

impl ParamSpec {
    fn new(name: &'static str, role: ParamRole, rows: usize, cols: usize) -> Self {
        Self {
            name,
            role,
            rows,
            cols,
        }
    }
}

/// Ordered parameter layout for `kind` at `dims`.
pub fn layout(kind: ModelKind, dims: &ModelDims) -> Vec<ParamSpec> {
    use ParamRole::{Bias, Weight};
    let h = dims.hidden;
    let t = dims.horizon;
    let mut specs = Vec::new();

    let gates = |specs: &mut Vec<ParamSpec>, input_width: usize| {
        for (w, b) in [("w_u", "b_u"), ("w_r", "b_r"), ("w_c", "b_c")] {
            specs.push(ParamSpec::new(w, Weight, input_width + h, h));
            specs.push(ParamSpec::new(b, Bias, 1, h));
        }
    };
    let head = |specs: &mut Vec<ParamSpec>| {
        specs.push(ParamSpec::new("out_w", Weight, h, t));
        specs.push(ParamSpec::new("out_b", Bias, 1, t));
    };

    match kind {
        ModelKind::Ha => {}
        ModelKind::Gcn => {
            specs.push(ParamSpec::new("gcn_w0", Weight, dims.history, h));
            specs.push(ParamSpec::new("gcn_w1", Weight, h, t));
        }
        ModelKind::Gru => {
            gates(&mut specs, 1);
            head(&mut specs);
        }
        ModelKind::Tgcn | ModelKind::A3tgcn => {
            if dims.per_gate_gc {
                for name in ["gc_weight_u", "gc_weight_r", "gc_weight_c"] {
                    specs.push(ParamSpec::new(name, Weight, 1, 1));
                }
            } else {
                specs.push(ParamSpec::new("gc_weight", Weight, 1, 1));
            }
            gates(&mut specs, 1);
            if kind == ModelKind::A3tgcn {
                let s = dims.scorer_width;
                specs.push(ParamSpec::new("attn_w1", Weight, dims.nodes * h, s));
                specs.push(ParamSpec::new("attn_b1", Bias, 1, s));
                specs.push(ParamSpec::new("attn_w2", Weight, s, 1));
                specs.push(ParamSpec::new("attn_b2", Bias, 1, 1));
            }
            head(&mut specs);
        }
    }
    specs
}

/// Total learnable scalar count; a pure function of kind and dims.
pub fn param_count(kind: ModelKind, dims: &ModelDims) -> usize {
    layout(kind, dims).iter().map(|s| s.rows * s.cols).sum()
}

/// Every learnable tensor of one model, in layout order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    kind: ModelKind,
    dims: ModelDims,
    entries: Vec<Param>,
}

impl ModelParams {
    /// All-zero parameters.
    pub fn zeros(kind: ModelKind, dims: ModelDims) -> Result<Self> {
        dims.validate(kind)?;
        let entries = layout(kind, &dims)
            .into_iter()
            .map(|s| Param {
                name: s.name.to_string(),
                role: s.role,
                value: Tensor::zeros(s.rows, s.cols),
            })
            .collect();
        Ok(Self {
            kind,
            dims,
            entries,
        })
    }

    /// Weights uniform in `[-1/√fan_in, 1/√fan_in]`, biases zero.
    pub fn init(kind: ModelKind, dims: ModelDims, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(kind, dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut params.entries {
            if p.role == ParamRole::Weight {
                let bound = 1.0 / (p.value.rows() as f64).sqrt();
                for v in p.value.as_mut_slice() {
                    *v = rng.random_range(-bound..=bound);
                }
            }
        }
        Ok(params)
    }

    /// Rebuilds parameters from named tensors, validating the full layout.
    pub fn from_entries(kind: ModelKind, dims: ModelDims, entries: Vec<Param>) -> Result<Self> {
        dims.validate(kind)?;
        let specs = layout(kind, &dims);
        if specs.len() != entries.len() {
            return Err(Error::Contract(format!(
                "{kind} at {dims} has {} parameter tensors, got {}",
                specs.len(),
                entries.len()
            )));
        }
        for (s, e) in specs.iter().zip(&entries) {
            if s.name != e.name || s.role != e.role {
                return Err(Error::Contract(format!(
                    "expected parameter {} ({}), got {} ({})",
                    s.name,
                    s.role.name(),
                    e.name,
                    e.role.name()
                )));
            }
            if e.value.shape() != (s.rows, s.cols) {
                return Err(Error::shape(s.name, (s.rows, s.cols), e.value.shape()));
            }
        }
        Ok(Self {
            kind,
            dims,
            entries,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn entries(&self) -> &[Param] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.value)
    }

    /// Replaces one tensor; the shape must stay the same.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let p = self
            .entries
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Contract(format!("no parameter named {name}")))?;
        if p.value.shape() != value.shape() {
            return Err(Error::shape("set_param", p.value.shape(), value.shape()));
        }
        p.value = value;
        Ok(())
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.iter_mut().map(|p| &mut p.value)
    }

    pub fn param_count(&self) -> usize {
        self.entries.iter().map(|p| p.value.len()).sum()
    }

    /// Sum of squared weight entries (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.entries
            .iter()
            .filter(|p| p.role == ParamRole::Weight)
            .map(|p| p.value.sum_squares())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|p| p.value.is_finite())
    }

    /// Human-readable shape table.
    pub fn describe(&self) -> String {
        let mut s = format!("{} at {}\n", self.kind, self.dims);
        for p in &self.entries {
            let _ = writeln!(
                s,
                "  {:<12} {:>5} x {:<5} {}",
                p.name,
                p.value.rows(),
                p.value.cols(),
                p.role.name()
            );
        }
        let _ = write!(s, "  total {} parameters", self.param_count());
        s
    }

    /// Registers every tensor as a trainable leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams<'_> {
        let vars = self
            .entries
            .iter()
            .map(|p| tape.param(p.value.clone()))
            .collect();
        BoundParams { params: self, vars }
    }

    /// Registers every tensor as a constant (inference only).
    pub fn bind_frozen(&self, tape: &mut Tape) -> BoundParams<'_> {
        let vars = self
            .entries
            .iter()
            .map(|p| tape.constant(p.value.clone()))
            .collect();
        BoundParams { params: self, vars }
    }
}

/// Parameters registered on a tape, addressable by name.
pub struct BoundParams<'a> {
    params: &'a ModelParams,
    vars: Vec<Var>,
}

impl<'a> BoundParams<'a> {
    /// Pairs existing tape vars with `params` entries, in layout order.
    pub(crate) fn from_vars(params: &'a ModelParams, vars: Vec<Var>) -> Self {
        assert_eq!(params.entries.len(), vars.len());
        BoundParams { params, vars }
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        self.params
            .entries
            .iter()
            .position(|p| p.name == name)
            .map(|i| self.vars[i])
            .ok_or_else(|| Error::Contract(format!("model has no parameter {name}")))
    }

    /// Vars in layout order.
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn weight_vars(&self) -> Vec<Var> {
        self.params
            .entries
            .iter()
            .zip(&self.vars)
            .filter(|(p, _)| p.role == ParamRole::Weight)
            .map(|(_, &v)| v)
            .collect()
    }
}
