//! Plain-text parameter checkpoints.
//!
//! ```text
//! a3tgcn-checkpoint 1
//! kind a3tgcn
//! dims 10 4 16 1 32 0 0
//! meta scale_max 71.25
//! manifest 2
//! gc_weight 1 16 weight
//! b_u 1 16 bias
//! values
//! gc_weight
//! 1.25e-1 -3e-2 ...
//! ```
//!
//! Values are written in shortest round-trip exponent form, so a
//! save/load cycle reproduces every bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{ModelDims, ModelKind, ModelParams, Param, ParamRole};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &str = "a3tgcn-checkpoint 1";

/// Parameters plus free-form string metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta.get(key).and_then(|v| v.parse().ok())
    }

    pub fn to_text(&self) -> String {
        let p = &self.params;
        let d = p.dims();
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "kind {}", p.kind());
        let _ = writeln!(
            s,
            "dims {} {} {} {} {} {} {}",
            d.nodes,
            d.history,
            d.hidden,
            d.horizon,
            d.scorer_width,
            u8::from(d.per_gate_gc),
            u8::from(d.attn_tanh)
        );
        for (k, v) in &self.meta {
            let _ = writeln!(s, "meta {k} {v}");
        }
        let _ = writeln!(s, "manifest {}", p.len());
        for e in p.entries() {
            let _ = writeln!(
                s,
                "{} {} {} {}",
                e.name,
                e.value.rows(),
                e.value.cols(),
                e.role.name()
            );
        }
        s.push_str("values\n");
        for e in p.entries() {
            let _ = writeln!(s, "{}", e.name);
            for r in 0..e.value.rows() {
                let row: Vec<String> = e.value.row(r).iter().map(|v| format!("{v:e}")).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Contract(format!("checkpoint truncated before {what}")))
        };
        let bad =
            |line: usize, msg: String| Error::Contract(format!("checkpoint line {line}: {msg}"));

        let (n, magic) = next("header")?;
        if magic != MAGIC {
            return Err(bad(n, format!("unrecognized header {magic:?}")));
        }

        let (n, kind_line) = next("kind")?;
        let kind: ModelKind = kind_line
            .strip_prefix("kind ")
            .ok_or_else(|| bad(n, "expected `kind`".into()))?
            .parse()?;

        let (n, dims_line) = next("dims")?;
        let nums: Vec<usize> = dims_line
            .strip_prefix("dims ")
            .ok_or_else(|| bad(n, "expected `dims`".into()))?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| bad(n, format!("bad dimension {t:?}")))
            })
            .collect::<Result<_>>()?;
        let [nodes, history, hidden, horizon, scorer_width, per_gate, tanh] = nums[..] else {
            return Err(bad(n, "dims needs 7 fields".into()));
        };
        let dims = ModelDims {
            nodes,
            history,
            hidden,
            horizon,
            scorer_width,
            per_gate_gc: per_gate != 0,
            attn_tanh: tanh != 0,
        };

        let mut meta = BTreeMap::new();
        let count = loop {
            let (n, line) = next("manifest")?;
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest
                    .split_once(' ')
                    .ok_or_else(|| bad(n, "meta needs key and value".into()))?;
                meta.insert(k.to_string(), v.to_string());
            } else if let Some(rest) = line.strip_prefix("manifest ") {
                break rest
                    .parse::<usize>()
                    .map_err(|_| bad(n, "bad manifest count".into()))?;
            } else {
                return Err(bad(n, format!("unexpected line {line:?}")));
            }
        };

        let mut manifest = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) = next("manifest entry")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [name, rows, cols, role] = parts[..] else {
                return Err(bad(n, "manifest entry needs name rows cols role".into()));
            };
            let rows: usize = rows.parse().map_err(|_| bad(n, "bad rows".into()))?;
            let cols: usize = cols.parse().map_err(|_| bad(n, "bad cols".into()))?;
            let role = match role {
                "weight" => ParamRole::Weight,
                "bias" => ParamRole::Bias,
                other => return Err(bad(n, format!("unknown role {other:?}"))),
            };
            manifest.push((name.to_string(), rows, cols, role));
        }

        let (n, line) = next("values")?;
        if line != "values" {
            return Err(bad(n, "expected `values`".into()));
        }
        let mut entries = Vec::with_capacity(count);
        for (name, rows, cols, role) in manifest {
            let (n, line) = next("value block")?;
            if line != name {
                return Err(bad(n, format!("expected block {name}, found {line:?}")));
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (n, line) = next("value row")?;
                let before = data.len();
                for tok in line.split_whitespace() {
                    data.push(
                        tok.parse::<f64>()
                            .map_err(|_| bad(n, format!("bad value {tok:?}")))?,
                    );
                }
                if data.len() - before != cols {
                    return Err(bad(n, format!("{name} row needs {cols} values")));
                }
            }
            entries.push(Param {
                name,
                role,
                value: Tensor::new(rows, cols, data)?,
            });
        }

        Ok(Self {
            params: ModelParams::from_entries(kind, dims, entries)?,
            meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::RoadGraph;
    use crate::model::predict;
    use proptest::prelude::*;

    #[test]
    fn save_load_gives_identical_forward() {
        let graph = RoadGraph::new(Tensor::from_rows(&[[0.0, 1.0], [1.0, 0.0]])).unwrap();
        let mut dims = ModelDims::new(2, 3, 4, 2);
        dims.per_gate_gc = true;
        dims.attn_tanh = true;
        let params = ModelParams::init(ModelKind::A3tgcn, dims, 17).unwrap();
        let ckpt = Checkpoint::new(params).with_meta("scale_max", 71.25);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, ckpt);
        assert_eq!(loaded.meta_f64("scale_max"), Some(71.25));

        let window = Tensor::from_rows(&[[0.3, 0.1, 0.9], [0.2, 0.5, 0.4]]);
        let a = predict(&graph, &ckpt.params, &window).unwrap();
        let b = predict(&graph, &loaded.params, &window).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn rejects_tampered_shapes() {
        let params = ModelParams::init(ModelKind::Gcn, ModelDims::new(2, 3, 4, 1), 1).unwrap();
        let text = Checkpoint::new(params).to_text();
        let broken = text.replacen("gcn_w0 3 4", "gcn_w0 4 3", 1);
        assert!(Checkpoint::from_text(&broken).is_err());
        assert!(Checkpoint::from_text("garbage").is_err());
    }

    proptest! {
        #[test]
        fn any_finite_values_round_trip(values in proptest::collection::vec(-1e300f64..1e300, 8)) {
            let dims = ModelDims::new(1, 2, 2, 1);
            let mut params = ModelParams::zeros(ModelKind::Gcn, dims).unwrap();
            params.set("gcn_w0", Tensor::new(2, 2, values[..4].to_vec()).unwrap()).unwrap();
            params.set("gcn_w1", Tensor::new(2, 1, values[4..6].to_vec()).unwrap()).unwrap();
            let ckpt = Checkpoint::new(params);
            let back = Checkpoint::from_text(&ckpt.to_text()).unwrap();
            prop_assert_eq!(back, ckpt);
        }
    }
}
