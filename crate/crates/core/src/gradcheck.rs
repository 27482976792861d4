//! Central finite-difference checks of the tape's analytic gradients.
//!
//! Each check builds a scalar function of a list of parameter tensors on a
//! fresh tape, differentiates it once with [`Tape::backward`], and compares
//! every entry against `(f(p + h) − f(p − h)) / 2h`. Errors are relative with
//! denominator `max(1, |fd|)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::RoadGraph;
use crate::model::{forward, loss, BoundParams, ModelDims, ModelKind, ModelParams};
use crate::tensor::{Axis, OpKind, Tape, Tensor, Var};

pub const FD_STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// Worst disagreement found by one check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub worst_rel_error: f64,
    /// `tensor[row, col]` where the worst error occurred.
    pub worst_at: String,
    /// How many checks were folded into this result.
    pub runs: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst_rel_error < TOLERANCE
    }
}

/// Compares the tape gradient of `build` against central differences.
///
/// `build` records a scalar on the tape from the given parameter vars.
pub fn check_function<F>(
    name: &str,
    labels: &[String],
    params: &[Tensor],
    fault: Option<OpKind>,
    build: F,
) -> Result<CheckResult>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.param(p.clone())).collect();
        let root = build(&mut tape, &vars)?;
        Ok(tape.value(root).get(0, 0))
    };

    let mut tape = Tape::new();
    if let Some(op) = fault {
        tape.inject_fault(op, 1.5);
    }
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let root = build(&mut tape, &vars)?;
    let grads = tape.backward(root)?;

    let mut worst = CheckResult {
        name: name.to_string(),
        worst_rel_error: 0.0,
        worst_at: String::new(),
        runs: 1,
    };
    let mut probe = params.to_vec();
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var);
        let cols = probe[pi].cols();
        for k in 0..probe[pi].len() {
            let orig = probe[pi].as_slice()[k];
            probe[pi].as_mut_slice()[k] = orig + FD_STEP;
            let up = eval(&probe)?;
            probe[pi].as_mut_slice()[k] = orig - FD_STEP;
            let down = eval(&probe)?;
            probe[pi].as_mut_slice()[k] = orig;
            let fd = (up - down) / (2.0 * FD_STEP);
            let err = (analytic.as_slice()[k] - fd).abs() / fd.abs().max(1.0);
            if err > worst.worst_rel_error || worst.worst_at.is_empty() {
                worst.worst_rel_error = err;
                worst.worst_at =
                    format!("{}[{}, {}]", labels[pi], k / cols.max(1), k % cols.max(1));
            }
        }
    }
    Ok(worst)
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    Tensor::new(rows, cols, data).expect("shape")
}

/// Random symmetric weighted adjacency with zero diagonal.
pub fn random_graph(rng: &mut ChaCha8Rng, nodes: usize) -> RoadGraph {
    let mut a = Tensor::zeros(nodes, nodes);
    for i in 0..nodes {
        for j in i + 1..nodes {
            if rng.random_bool(0.6) {
                let w = rng.random_range(0.2..1.5);
                a.set(i, j, w);
                a.set(j, i, w);
            }
        }
    }
    RoadGraph::new(a).expect("valid adjacency")
}

/// Gradient check of the training loss of one model variant at a random tiny
/// configuration (`N ≤ 5`, `n ≤ 4`, `H ≤ 6`, `T ≤ 2`, one or two samples).
pub fn check_model(kind: ModelKind, seed: u64, fault: Option<OpKind>) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = rng.random_range(2..=5);
    let mut dims = ModelDims::new(
        nodes,
        rng.random_range(1..=4),
        rng.random_range(1..=6),
        rng.random_range(1..=2),
    );
    dims.scorer_width = rng.random_range(2..=5);
    dims.per_gate_gc = rng.random_bool(0.5);
    dims.attn_tanh = rng.random_bool(0.5);
    let batch = rng.random_range(1..=2);
    let graph = random_graph(&mut rng, nodes);

    let mut params = ModelParams::init(kind, dims.clone(), rng.random())?;
    let names: Vec<String> = params.entries().iter().map(|p| p.name.clone()).collect();
    for name in &names {
        let (r, c) = params.get(name).expect("layout").shape();
        params.set(name, random_tensor(&mut rng, r, c, 0.8))?;
    }
    let window = random_tensor(&mut rng, batch * nodes, dims.history, 1.0).map(f64::abs);
    let target = random_tensor(&mut rng, batch * nodes, dims.horizon, 1.0);
    let lambda = rng.random_range(0.0..0.01);

    let template = params.clone();
    let values: Vec<Tensor> = params.entries().iter().map(|p| p.value.clone()).collect();
    check_function(kind.name(), &names, &values, fault, |tape, vars| {
        let bound = BoundParams::from_vars(&template, vars.to_vec());
        let x = tape.constant(window.clone());
        let y = tape.constant(target.clone());
        let pred = forward(tape, &graph, x, &template, &bound)?;
        loss(tape, y, pred, &bound.weight_vars(), lambda)
    })
}

/// A random chain of tape operations on shapes up to `6 x 6`, closed by a
/// weighted sum so every entry gets a distinct gradient.
pub fn check_random_composite(seed: u64, fault: Option<OpKind>) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(1..=6);
    let cols = rng.random_range(1..=6);
    let steps = rng.random_range(3..=6);
    // pre-draw the plan so every evaluation builds the same graph
    let plan: Vec<(u8, usize)> = (0..steps)
        .map(|_| (rng.random_range(0..12u8), rng.random_range(1..=6)))
        .collect();

    let mut params = vec![random_tensor(&mut rng, rows, cols, 1.0)];
    let mut shapes = (rows, cols);
    let mut consts = Vec::new();
    let mut ops = Vec::new();
    for &(op, k) in &plan {
        let (r, c) = shapes;
        match op {
            0 => {
                params.push(random_tensor(&mut rng, c, k, 1.0));
                shapes = (r, k);
            }
            1..=3 => params.push(random_tensor(&mut rng, r, c, 1.0)),
            7 => params.push(random_tensor(&mut rng, 1, c, 1.0)),
            8 => params.push(random_tensor(&mut rng, r, 1, 1.0)),
            9 => {
                params.push(random_tensor(&mut rng, r, k, 1.0));
                shapes = (r, c + k);
            }
            10 => shapes = (c, r),
            11 => {
                let p = random_tensor(&mut rng, r, r, 1.0);
                consts.push(Arc::new(p));
            }
            _ => {}
        }
        ops.push(op);
    }
    let weights = random_tensor(&mut rng, shapes.0, shapes.1, 1.0);
    let labels: Vec<String> = (0..params.len()).map(|i| format!("p{i}")).collect();

    check_function("composite", &labels, &params, fault, |tape, vars| {
        let mut cur = vars[0];
        let mut next_param = 1;
        let mut next_const = 0;
        let mut take = || {
            let v = vars[next_param];
            next_param += 1;
            v
        };
        for &op in &ops {
            cur = match op {
                0 => tape.matmul(cur, take())?,
                1 => tape.add(cur, take())?,
                2 => tape.sub(cur, take())?,
                3 => tape.hadamard(cur, take())?,
                4 => tape.sigmoid(cur),
                5 => tape.tanh(cur),
                6 => tape.softmax(cur, Axis::Rows)?,
                7 => tape.add_row(cur, take())?,
                8 => tape.scale_rows(cur, take())?,
                9 => tape.concat_cols(&[cur, take()])?,
                10 => tape.transpose(cur),
                _ => {
                    let p = &consts[next_const];
                    next_const += 1;
                    tape.propagate(p, cur)?
                }
            };
        }
        let w = tape.constant(weights.clone());
        let weighted = tape.hadamard(cur, w)?;
        Ok(tape.sum(weighted))
    })
}

/// One targeted check per differentiable operation.
pub fn check_ops(seed: u64, fault: Option<OpKind>) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let a = random_tensor(&mut rng, 3, 4, 1.0);
    let b = random_tensor(&mut rng, 3, 4, 1.0);
    let m = random_tensor(&mut rng, 4, 2, 1.0);
    let w34 = random_tensor(&mut rng, 3, 4, 1.0);
    let w32 = random_tensor(&mut rng, 3, 2, 1.0);
    let w43 = random_tensor(&mut rng, 4, 3, 1.0);
    let w62 = random_tensor(&mut rng, 6, 2, 1.0);
    let row = random_tensor(&mut rng, 1, 4, 1.0);
    let col = random_tensor(&mut rng, 3, 1, 1.0);
    let prop = Arc::new(random_tensor(&mut rng, 3, 3, 1.0));
    // keep ReLU inputs away from the kink
    let relu_in = a.map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });

    let labels2 = |x: &str, y: &str| vec![x.to_string(), y.to_string()];
    let labels1 = |x: &str| vec![x.to_string()];

    macro_rules! weighted_sum {
        ($tape:expr, $v:expr, $w:expr) => {{
            let wv = $tape.constant($w.clone());
            let h = $tape.hadamard($v, wv)?;
            Ok($tape.sum(h))
        }};
    }

    out.push(check_function(
        "matmul",
        &labels2("a", "m"),
        &[a.clone(), m.clone()],
        fault,
        |t, v| {
            let p = t.matmul(v[0], v[1])?;
            weighted_sum!(t, p, w32)
        },
    )?);
    out.push(check_function(
        "add",
        &labels2("a", "b"),
        &[a.clone(), b.clone()],
        fault,
        |t, v| {
            let p = t.add(v[0], v[1])?;
            let s = t.sigmoid(p);
            weighted_sum!(t, s, w34)
        },
    )?);
    out.push(check_function(
        "sub",
        &labels2("a", "b"),
        &[a.clone(), b.clone()],
        fault,
        |t, v| {
            let p = t.sub(v[0], v[1])?;
            let s = t.tanh(p);
            weighted_sum!(t, s, w34)
        },
    )?);
    out.push(check_function(
        "hadamard",
        &labels2("a", "b"),
        &[a.clone(), b.clone()],
        fault,
        |t, v| {
            let p = t.hadamard(v[0], v[1])?;
            weighted_sum!(t, p, w34)
        },
    )?);
    out.push(check_function(
        "sigmoid",
        &labels1("a"),
        std::slice::from_ref(&a),
        fault,
        |t, v| {
            let p = t.sigmoid(v[0]);
            weighted_sum!(t, p, w34)
        },
    )?);
    out.push(check_function(
        "tanh",
        &labels1("a"),
        std::slice::from_ref(&a),
        fault,
        |t, v| {
            let p = t.tanh(v[0]);
            weighted_sum!(t, p, w34)
        },
    )?);
    out.push(check_function(
        "relu",
        &labels1("a"),
        &[relu_in],
        fault,
        |t, v| {
            let p = t.relu(v[0]);
            weighted_sum!(t, p, w34)
        },
    )?);
    out.push(check_function(
        "scale",
        &labels1("a"),
        std::slice::from_ref(&a),
        fault,
        |t, v| {
            let p = t.scale(v[0], -2.5);
            weighted_sum!(t, p, w34)
        },
    )?);
    out.push(check_function(
        "add_row",
        &labels2("a", "row"),
        &[a.clone(), row],
        fault,
        |t, v| {
            let p = t.add_row(v[0], v[1])?;
            let s = t.tanh(p);
            weighted_sum!(t, s, w34)
        },
    )?);
    out.push(check_function(
        "scale_rows",
        &labels2("a", "col"),
        &[a.clone(), col],
        fault,
        |t, v| {
            let p = t.scale_rows(v[0], v[1])?;
            weighted_sum!(t, p, w34)
        },
    )?);
    out.push(check_function(
        "softmax",
        &labels1("a"),
        std::slice::from_ref(&a),
        fault,
        |t, v| {
            let r = t.softmax(v[0], Axis::Rows)?;
            let c = t.softmax(v[0], Axis::Cols)?;
            let p = t.add(r, c)?;
            weighted_sum!(t, p, w34)
        },
    )?);
    out.push(check_function(
        "concat_cols",
        &labels2("a", "b"),
        &[a.clone(), b.clone()],
        fault,
        |t, v| {
            let p = t.concat_cols(&[v[0], v[1]])?;
            let s = t.slice_cols(p, 2, 4)?;
            weighted_sum!(t, s, w34)
        },
    )?);
    out.push(check_function(
        "slice_cols",
        &labels1("a"),
        std::slice::from_ref(&a),
        fault,
        |t, v| {
            let s = t.slice_cols(v[0], 1, 2)?;
            weighted_sum!(t, s, w32)
        },
    )?);
    out.push(check_function(
        "transpose",
        &labels1("a"),
        std::slice::from_ref(&a),
        fault,
        |t, v| {
            let p = t.transpose(v[0]);
            weighted_sum!(t, p, w43)
        },
    )?);
    out.push(check_function(
        "reshape",
        &labels1("a"),
        std::slice::from_ref(&a),
        fault,
        |t, v| {
            let p = t.reshape(v[0], 6, 2)?;
            weighted_sum!(t, p, w62)
        },
    )?);
    out.push(check_function(
        "propagate",
        &labels1("a"),
        std::slice::from_ref(&a),
        fault,
        |t, v| {
            let p = t.propagate(&prop, v[0])?;
            weighted_sum!(t, p, w34)
        },
    )?);
    out.push(check_function(
        "sum",
        &labels1("a"),
        std::slice::from_ref(&a),
        fault,
        |t, v| {
            let s = t.sigmoid(v[0]);
            Ok(t.sum(s))
        },
    )?);
    out.push(check_function(
        "sum_squares",
        &labels1("a"),
        &[a],
        fault,
        |t, v| Ok(t.sum_squares(v[0])),
    )?);
    Ok(out)
}

/// The four trainable variants covered by [`check_model`].
pub const MODEL_VARIANTS: [ModelKind; 4] = [
    ModelKind::Gcn,
    ModelKind::Gru,
    ModelKind::Tgcn,
    ModelKind::A3tgcn,
];

/// Per-op checks, `trials` random composites, and `trials` loss checks per
/// model variant. Results are reduced to the worst per name.
pub fn run_suite(trials: usize, seed: u64, fault: Option<OpKind>) -> Result<Vec<CheckResult>> {
    let mut worst: Vec<CheckResult> = check_ops(seed, fault)?;
    let mut merge = |r: CheckResult| match worst.iter_mut().find(|w| w.name == r.name) {
        Some(w) => {
            let runs = w.runs + r.runs;
            if r.worst_rel_error > w.worst_rel_error {
                *w = r;
            }
            w.runs = runs;
        }
        None => worst.push(r),
    };
    for trial in 0..trials as u64 {
        merge(check_random_composite(seed.wrapping_add(trial), fault)?);
        for kind in MODEL_VARIANTS {
            merge(check_model(
                kind,
                seed.wrapping_mul(31).wrapping_add(trial),
                fault,
            )?);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_runs_one_composite_and_model_check_per_trial() {
        for trials in [1, 3] {
            let results = run_suite(trials, 4, None).unwrap();
            for name in ["composite", "gcn", "gru", "tgcn", "a3tgcn"] {
                let r = results.iter().find(|r| r.name == name).unwrap();
                assert_eq!(r.runs, trials, "{name}");
            }
            assert!(results
                .iter()
                .filter(|r| r.name == "matmul")
                .all(|r| r.runs == 1));
        }
    }

    #[test]
    fn every_op_passes() {
        for r in check_ops(1, None).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn hundred_random_composites() {
        for seed in 0..100 {
            let r = check_random_composite(seed, None).unwrap();
            assert!(r.passed(), "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn model_losses_match_finite_differences() {
        for kind in MODEL_VARIANTS {
            for seed in 0..6 {
                let r = check_model(kind, seed, None).unwrap();
                assert!(r.passed(), "{kind} seed {seed}: {r:?}");
            }
        }
    }

    #[test]
    fn fault_in_attention_softmax_fails_a3tgcn() {
        let r = check_model(ModelKind::A3tgcn, 3, Some(OpKind::Softmax)).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn injected_fault_is_caught_and_named() {
        let results = check_ops(1, Some(OpKind::Tanh)).unwrap();
        let failing: Vec<&str> = results
            .iter()
            .filter(|r| !r.passed())
            .map(|r| r.name.as_str())
            .collect();
        assert!(failing.contains(&"tanh"), "{failing:?}");
        assert!(!failing.contains(&"matmul"));
    }
}
