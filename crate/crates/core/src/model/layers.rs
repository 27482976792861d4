use crate::error::{Error, Result};
use crate::graph::RoadGraph;
use crate::tensor::{Axis, Tape, Tensor, Var};

use super::{BoundParams, ModelKind, ModelParams};

/// Weights of the update, reset and candidate gates.
#[derive(Clone, Copy, Debug)]
pub struct GateParams {
    pub w_u: Var,
    pub b_u: Var,
    pub w_r: Var,
    pub b_r: Var,
    pub w_c: Var,
    pub b_c: Var,
}

impl GateParams {
    pub fn from_bound(p: &BoundParams<'_>) -> Result<Self> {
        Ok(Self {
            w_u: p.var("w_u")?,
            b_u: p.var("b_u")?,
            w_r: p.var("w_r")?,
            b_r: p.var("b_r")?,
            w_c: p.var("w_c")?,
            b_c: p.var("b_c")?,
        })
    }
}

/// Graph-convolution input transform of a T-GCN cell.
#[derive(Clone, Copy, Debug)]
pub enum GcWeights {
    Shared(Var),
    PerGate { u: Var, r: Var, c: Var },
}

impl GcWeights {
    pub fn from_bound(p: &BoundParams<'_>, per_gate: bool) -> Result<Self> {
        if per_gate {
            Ok(GcWeights::PerGate {
                u: p.var("gc_weight_u")?,
                r: p.var("gc_weight_r")?,
                c: p.var("gc_weight_c")?,
            })
        } else {
            Ok(GcWeights::Shared(p.var("gc_weight")?))
        }
    }
}

/// Two-layer attention scorer.
#[derive(Clone, Copy, Debug)]
pub struct AttentionParams {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
    pub tanh_between: bool,
}

impl AttentionParams {
    pub fn from_bound(p: &BoundParams<'_>, tanh_between: bool) -> Result<Self> {
        Ok(Self {
            w1: p.var("attn_w1")?,
            b1: p.var("attn_b1")?,
            w2: p.var("attn_w2")?,
            b2: p.var("attn_b2")?,
            tanh_between,
        })
    }
}

/// `Â · x · weight`.
pub fn graph_conv(tape: &mut Tape, graph: &RoadGraph, x: Var, weight: Var) -> Result<Var> {
    let ax = tape.propagate(graph.a_hat(), x)?;
    tape.matmul(ax, weight)
}

/// `Â · ReLU(Â · X · W₀) · W₁`, identity on the output layer.
pub fn gcn_forward(tape: &mut Tape, graph: &RoadGraph, x: Var, w0: Var, w1: Var) -> Result<Var> {
    let hidden = graph_conv(tape, graph, x, w0)?;
    let hidden = tape.relu(hidden);
    graph_conv(tape, graph, hidden, w1)
}

/// One gated update given the (already transformed) input for each gate.
///
/// `u = σ([in_u, h]·W_u + b_u)`, `r = σ([in_r, h]·W_r + b_r)`,
/// `c = tanh([in_c, r⊙h]·W_c + b_c)`, `h' = u⊙h + (1−u)⊙c`.
pub fn gated_update(
    tape: &mut Tape,
    inputs: [Var; 3],
    h_prev: Var,
    gates: &GateParams,
) -> Result<Var> {
    let [in_u, in_r, in_c] = inputs;

    let xu = tape.concat_cols(&[in_u, h_prev])?;
    let u = tape.matmul(xu, gates.w_u)?;
    let u = tape.add_row(u, gates.b_u)?;
    let u = tape.sigmoid(u);

    let xr = tape.concat_cols(&[in_r, h_prev])?;
    let r = tape.matmul(xr, gates.w_r)?;
    let r = tape.add_row(r, gates.b_r)?;
    let r = tape.sigmoid(r);

    let rh = tape.hadamard(r, h_prev)?;
    let xc = tape.concat_cols(&[in_c, rh])?;
    let c = tape.matmul(xc, gates.w_c)?;
    let c = tape.add_row(c, gates.b_c)?;
    let c = tape.tanh(c);

    // u⊙h + (1−u)⊙c written as c + u⊙(h − c)
    let diff = tape.sub(h_prev, c)?;
    let kept = tape.hadamard(u, diff)?;
    tape.add(c, kept)
}

/// Plain GRU step on raw speeds `x_t` (`(B·N) x 1`).
pub fn gru_cell(tape: &mut Tape, x_t: Var, h_prev: Var, gates: &GateParams) -> Result<Var> {
    gated_update(tape, [x_t; 3], h_prev, gates)
}

/// GRU step whose input is the graph convolution of `x_t`.
pub fn tgcn_cell(
    tape: &mut Tape,
    graph: &RoadGraph,
    x_t: Var,
    h_prev: Var,
    gc: &GcWeights,
    gates: &GateParams,
) -> Result<Var> {
    let inputs = match *gc {
        GcWeights::Shared(w) => [graph_conv(tape, graph, x_t, w)?; 3],
        GcWeights::PerGate { u, r, c } => {
            let ax = tape.propagate(graph.a_hat(), x_t)?;
            [
                tape.matmul(ax, u)?,
                tape.matmul(ax, r)?,
                tape.matmul(ax, c)?,
            ]
        }
    };
    gated_update(tape, inputs, h_prev, gates)
}

/// Soft attention over hidden states `(B·N) x H`.
///
/// Each state is flattened per sample to `1 x (N·H)`, scored by
/// `e = (vec(h)·W₁ + b₁)·W₂ + b₂`, the scores of one sample are softmax
/// normalized, and the context is `Σ αᵢ hᵢ`. Returns `α` as `B x n` and the
/// context as `(B·N) x H`.
pub fn attention(
    tape: &mut Tape,
    states: &[Var],
    nodes: usize,
    attn: &AttentionParams,
) -> Result<(Var, Var)> {
    let Some(&first) = states.first() else {
        return Err(Error::Contract("attention over an empty sequence".into()));
    };
    let (rows, hidden) = tape.shape(first);
    if nodes == 0 || rows % nodes != 0 {
        return Err(Error::shape("attention", (rows, hidden), (nodes, hidden)));
    }
    let batch = rows / nodes;

    let mut flat = Vec::with_capacity(states.len());
    let mut scores = Vec::with_capacity(states.len());
    for &h in states {
        let f = tape.reshape(h, batch, nodes * hidden)?;
        let z = tape.matmul(f, attn.w1)?;
        let mut z = tape.add_row(z, attn.b1)?;
        if attn.tanh_between {
            z = tape.tanh(z);
        }
        let e = tape.matmul(z, attn.w2)?;
        let e = tape.add_row(e, attn.b2)?;
        flat.push(f);
        scores.push(e);
    }
    let e = tape.concat_cols(&scores)?;
    let alpha = tape.softmax(e, Axis::Rows)?;

    let mut context = None;
    for (i, &f) in flat.iter().enumerate() {
        let a_i = tape.slice_cols(alpha, i, 1)?;
        let weighted = tape.scale_rows(f, a_i)?;
        context = Some(match context {
            None => weighted,
            Some(acc) => tape.add(acc, weighted)?,
        });
    }
    let context = tape.reshape(context.expect("non-empty"), rows, hidden)?;
    Ok((alpha, context))
}

fn check_window(tape: &Tape, graph: &RoadGraph, window: Var, params: &ModelParams) -> Result<()> {
    let dims = params.dims();
    let (rows, cols) = tape.shape(window);
    let n = graph.n_nodes();
    if dims.nodes != n {
        return Err(Error::Contract(format!(
            "model built for {} nodes, graph has {n}",
            dims.nodes
        )));
    }
    if cols != dims.history || cols == 0 || rows == 0 || rows % n != 0 {
        return Err(Error::shape("window", (rows, cols), (n, dims.history)));
    }
    Ok(())
}

/// Hidden states of the recurrent sweep from `h₀ = 0`, oldest first.
pub fn recurrent_states(
    tape: &mut Tape,
    graph: &RoadGraph,
    window: Var,
    params: &ModelParams,
    bound: &BoundParams<'_>,
) -> Result<Vec<Var>> {
    check_window(tape, graph, window, params)?;
    let dims = params.dims();
    let (rows, steps) = tape.shape(window);
    let gates = GateParams::from_bound(bound)?;
    let gc = match params.kind() {
        ModelKind::Tgcn | ModelKind::A3tgcn => {
            Some(GcWeights::from_bound(bound, dims.per_gate_gc)?)
        }
        ModelKind::Gru => None,
        other => {
            return Err(Error::Contract(format!("{other} has no recurrent sweep")));
        }
    };
    let mut h = tape.constant(Tensor::zeros(rows, dims.hidden));
    let mut states = Vec::with_capacity(steps);
    for t in 0..steps {
        let x_t = tape.slice_cols(window, t, 1)?;
        h = match &gc {
            Some(gc) => tgcn_cell(tape, graph, x_t, h, gc, &gates)?,
            None => gru_cell(tape, x_t, h, &gates)?,
        };
        states.push(h);
    }
    Ok(states)
}

/// Historical-average prediction: the per-row mean of the window, repeated
/// `horizon` times.
pub fn ha_forward(window: &Tensor, horizon: usize) -> Tensor {
    let (rows, cols) = window.shape();
    let mut out = Tensor::zeros(rows, horizon);
    for r in 0..rows {
        let mean = window.row(r).iter().sum::<f64>() / cols as f64;
        for t in 0..horizon {
            out.set(r, t, mean);
        }
    }
    out
}

/// Full forward pass for any model kind: `(B·N) x n` window to `(B·N) x T`.
pub fn forward(
    tape: &mut Tape,
    graph: &RoadGraph,
    window: Var,
    params: &ModelParams,
    bound: &BoundParams<'_>,
) -> Result<Var> {
    check_window(tape, graph, window, params)?;
    let dims = params.dims();
    match params.kind() {
        ModelKind::Ha => {
            let pred = ha_forward(tape.value(window), dims.horizon);
            Ok(tape.constant(pred))
        }
        ModelKind::Gcn => gcn_forward(
            tape,
            graph,
            window,
            bound.var("gcn_w0")?,
            bound.var("gcn_w1")?,
        ),
        ModelKind::Gru | ModelKind::Tgcn | ModelKind::A3tgcn => {
            let states = recurrent_states(tape, graph, window, params, bound)?;
            let summary = if params.kind() == ModelKind::A3tgcn {
                let attn = AttentionParams::from_bound(bound, dims.attn_tanh)?;
                attention(tape, &states, dims.nodes, &attn)?.1
            } else {
                *states.last().expect("history > 0")
            };
            let out = tape.matmul(summary, bound.var("out_w")?)?;
            tape.add_row(out, bound.var("out_b")?)
        }
    }
}

/// Inference on plain tensors: `(B·N) x n` window to `(B·N) x T` prediction.
pub fn predict(graph: &RoadGraph, params: &ModelParams, window: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let bound = params.bind_frozen(&mut tape);
    let w = tape.constant(window.clone());
    let out = forward(&mut tape, graph, w, params, &bound)?;
    Ok(tape.value(out).clone())
}

/// Mean squared error over all entries plus `lambda_reg · Σ‖W‖²` over `weights`.
pub fn loss(
    tape: &mut Tape,
    y_true: Var,
    y_pred: Var,
    weights: &[Var],
    lambda_reg: f64,
) -> Result<Var> {
    if !(lambda_reg.is_finite() && lambda_reg >= 0.0) {
        return Err(Error::Domain(format!(
            "lambda_reg must be finite and non-negative, got {lambda_reg}"
        )));
    }
    let count = tape.value(y_true).len();
    let diff = tape.sub(y_true, y_pred)?;
    let sse = tape.sum_squares(diff);
    let mut total = tape.scale(sse, 1.0 / count.max(1) as f64);
    if lambda_reg > 0.0 {
        for &w in weights {
            let sq = tape.sum_squares(w);
            let term = tape.scale(sq, lambda_reg);
            total = tape.add(total, term)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelDims;

    fn k2() -> RoadGraph {
        RoadGraph::new(Tensor::from_rows(&[[0.0, 1.0], [1.0, 0.0]])).unwrap()
    }

    fn isolated(n: usize) -> RoadGraph {
        RoadGraph::new(Tensor::zeros(n, n)).unwrap()
    }

    fn zero_gates(tape: &mut Tape, input_width: usize, hidden: usize) -> GateParams {
        let mut z = |r, c| tape.param(Tensor::zeros(r, c));
        GateParams {
            w_u: z(input_width + hidden, hidden),
            b_u: z(1, hidden),
            w_r: z(input_width + hidden, hidden),
            b_r: z(1, hidden),
            w_c: z(input_width + hidden, hidden),
            b_c: z(1, hidden),
        }
    }

    #[test]
    fn gcn_zero_weights_give_zero() {
        let g = k2();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]));
        let w0 = tape.param(Tensor::zeros(3, 4));
        let w1 = tape.param(Tensor::zeros(4, 2));
        let y = gcn_forward(&mut tape, &g, x, w0, w1).unwrap();
        assert_eq!(tape.value(y), &Tensor::zeros(2, 2));
    }

    #[test]
    fn gcn_scalar_hand_case() {
        let g = isolated(1);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(5.0));
        let w0 = tape.param(Tensor::scalar(2.0));
        let w1 = tape.param(Tensor::scalar(3.0));
        let y = gcn_forward(&mut tape, &g, x, w0, w1).unwrap();
        assert_eq!(tape.value(y).get(0, 0), 30.0);
    }

    #[test]
    fn graph_conv_cases() {
        let g = k2();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::column(&[2.0, 4.0]));
        let w = tape.param(Tensor::scalar(1.0));
        let y = graph_conv(&mut tape, &g, x, w).unwrap();
        for &v in tape.value(y).as_slice() {
            assert!((v - 3.0).abs() < 1e-12);
        }

        let iso = isolated(3);
        let x = tape.constant(Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]));
        let eye = tape.param(Tensor::identity(2));
        let y = graph_conv(&mut tape, &iso, x, eye).unwrap();
        assert_eq!(tape.value(y), tape.value(x));

        let zero = tape.constant(Tensor::zeros(2, 1));
        let y = graph_conv(&mut tape, &g, zero, w).unwrap();
        assert_eq!(tape.value(y), &Tensor::zeros(2, 1));
    }

    #[test]
    fn zero_parameter_cells_halve_the_state() {
        let g = k2();
        let hidden = 3;
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::column(&[0.7, -1.3]));
        let h = tape.constant(Tensor::from_rows(&[[1.0, -2.0, 0.5], [4.0, 0.0, -8.0]]));
        let gates = zero_gates(&mut tape, 1, hidden);
        let out = gru_cell(&mut tape, x, h, &gates).unwrap();
        let expected = tape.value(h).map(|v| 0.5 * v);
        assert_eq!(tape.value(out), &expected);

        let gc = GcWeights::Shared(tape.param(Tensor::zeros(1, 1)));
        let out = tgcn_cell(&mut tape, &g, x, h, &gc, &gates).unwrap();
        assert_eq!(tape.value(out), &expected);
    }

    proptest::proptest! {
        #[test]
        fn tgcn_on_isolated_nodes_matches_gru(seed in 0u64..1000, per_gate in proptest::bool::ANY) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (nodes, hidden) = (3, 4);
            let mut rand_t = |r, c| {
                Tensor::new(r, c, (0..r * c).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
            };
            let x_val = rand_t(nodes, 1);
            let h_val = rand_t(nodes, hidden);
            let gate_vals: Vec<Tensor> = (0..6)
                .map(|i| if i % 2 == 0 { rand_t(1 + hidden, hidden) } else { rand_t(1, hidden) })
                .collect();
            let mut tape = Tape::new();
            let x = tape.constant(x_val);
            let h = tape.constant(h_val);
            let v: Vec<Var> = gate_vals.into_iter().map(|t| tape.param(t)).collect();
            let gates = GateParams { w_u: v[0], b_u: v[1], w_r: v[2], b_r: v[3], w_c: v[4], b_c: v[5] };
            let mut one = || tape.param(Tensor::identity(1));
            let gc = if per_gate {
                GcWeights::PerGate { u: one(), r: one(), c: one() }
            } else {
                GcWeights::Shared(one())
            };
            let gru = gru_cell(&mut tape, x, h, &gates).unwrap();
            let tgcn = tgcn_cell(&mut tape, &isolated(nodes), x, h, &gc, &gates).unwrap();
            for (a, b) in tape.value(gru).as_slice().iter().zip(tape.value(tgcn).as_slice()) {
                proptest::prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn origin_is_a_fixed_point_when_candidate_vanishes() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::column(&[3.0, -2.0]));
        let h = tape.constant(Tensor::zeros(2, 2));
        let gates = GateParams {
            w_u: tape.param(Tensor::filled(3, 2, 0.4)),
            b_u: tape.param(Tensor::filled(1, 2, -0.1)),
            w_r: tape.param(Tensor::filled(3, 2, 0.9)),
            b_r: tape.param(Tensor::filled(1, 2, 0.3)),
            w_c: tape.param(Tensor::zeros(3, 2)),
            b_c: tape.param(Tensor::zeros(1, 2)),
        };
        let out = gru_cell(&mut tape, x, h, &gates).unwrap();
        assert_eq!(tape.value(out), &Tensor::zeros(2, 2));
    }

    #[test]
    fn attention_singleton_and_equal_states() {
        let mut tape = Tape::new();
        let attn = AttentionParams {
            w1: tape.param(Tensor::filled(4, 3, 0.2)),
            b1: tape.param(Tensor::filled(1, 3, 0.1)),
            w2: tape.param(Tensor::filled(3, 1, -0.5)),
            b2: tape.param(Tensor::scalar(0.3)),
            tanh_between: false,
        };
        let h1 = tape.constant(Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
        let (alpha, ctx) = attention(&mut tape, &[h1], 2, &attn).unwrap();
        assert_eq!(tape.value(alpha), &Tensor::scalar(1.0));
        assert_eq!(tape.value(ctx), tape.value(h1));

        let states = [h1, h1, h1];
        let (alpha, ctx) = attention(&mut tape, &states, 2, &attn).unwrap();
        for &a in tape.value(alpha).as_slice() {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
        let diff = tape
            .value(ctx)
            .zip_map(tape.value(h1), |a, b| (a - b).abs())
            .max_value();
        assert!(diff < 1e-12);
        assert!(attention(&mut tape, &[], 2, &attn).is_err());
    }

    #[test]
    fn attention_forced_scores() {
        // N·H = 1 and a unit first layer make e = (h₁·ln3, h₂·ln3) = (0, ln 3)
        let mut tape = Tape::new();
        let attn = AttentionParams {
            w1: tape.param(Tensor::scalar(1.0)),
            b1: tape.param(Tensor::scalar(0.0)),
            w2: tape.param(Tensor::scalar(3f64.ln())),
            b2: tape.param(Tensor::scalar(0.0)),
            tanh_between: false,
        };
        let h1 = tape.constant(Tensor::scalar(0.0));
        let h2 = tape.constant(Tensor::scalar(1.0));
        let (alpha, ctx) = attention(&mut tape, &[h1, h2], 1, &attn).unwrap();
        let a = tape.value(alpha);
        assert!((a.get(0, 0) - 0.25).abs() < 1e-12);
        assert!((a.get(0, 1) - 0.75).abs() < 1e-12);
        assert!((tape.value(ctx).get(0, 0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn a3tgcn_zero_params_predict_bias() {
        let g = k2();
        let dims = ModelDims::new(2, 3, 4, 2);
        let mut params = ModelParams::zeros(ModelKind::A3tgcn, dims).unwrap();
        let window = Tensor::from_rows(&[[1.0, 2.0, 3.0], [0.5, 0.1, 0.9]]);
        assert_eq!(predict(&g, &params, &window).unwrap(), Tensor::zeros(2, 2));

        params
            .set("out_b", Tensor::from_rows(&[[1.5, -2.0]]))
            .unwrap();
        let y = predict(&g, &params, &window).unwrap();
        assert_eq!(y, Tensor::from_rows(&[[1.5, -2.0], [1.5, -2.0]]));
    }

    #[test]
    fn constant_head_ignores_inputs() {
        let g = k2();
        let dims = ModelDims::new(2, 3, 4, 1);
        let mut params = ModelParams::init(ModelKind::A3tgcn, dims, 9).unwrap();
        params.set("out_w", Tensor::zeros(4, 1)).unwrap();
        params.set("out_b", Tensor::scalar(42.0)).unwrap();
        let window = Tensor::from_rows(&[[1.0, 2.0, 3.0], [0.5, 0.1, 0.9]]);
        assert_eq!(
            predict(&g, &params, &window).unwrap(),
            Tensor::filled(2, 1, 42.0)
        );
    }

    #[test]
    fn forward_shape_and_determinism() {
        let g = k2();
        for kind in [
            ModelKind::Gcn,
            ModelKind::Gru,
            ModelKind::Tgcn,
            ModelKind::A3tgcn,
        ] {
            let params = ModelParams::init(kind, ModelDims::new(2, 4, 5, 3), 1).unwrap();
            let window = Tensor::from_rows(&[[0.1, 0.2, 0.3, 0.4], [0.9, 0.8, 0.7, 0.6]]);
            let a = predict(&g, &params, &window).unwrap();
            let b = predict(&g, &params, &window).unwrap();
            assert_eq!(a.shape(), (2, 3), "{kind}");
            assert_eq!(a, b);
            assert!(predict(&g, &params, &Tensor::zeros(2, 3)).is_err());
        }
    }

    #[test]
    fn batched_forward_matches_per_sample() {
        let g = RoadGraph::new(Tensor::from_rows(&[
            [0.0, 1.0, 0.0],
            [1.0, 0.0, 2.0],
            [0.0, 2.0, 0.0],
        ]))
        .unwrap();
        let w1 = Tensor::from_rows(&[[0.1, 0.5], [0.3, 0.2], [0.9, 0.4]]);
        let w2 = Tensor::from_rows(&[[0.6, 0.7], [0.8, 0.1], [0.2, 0.3]]);
        let both = Tensor::vstack(&[&w1, &w2]).unwrap();
        for kind in [
            ModelKind::Gcn,
            ModelKind::Gru,
            ModelKind::Tgcn,
            ModelKind::A3tgcn,
        ] {
            let params = ModelParams::init(kind, ModelDims::new(3, 2, 4, 2), 5).unwrap();
            let batched = predict(&g, &params, &both).unwrap();
            let single = Tensor::vstack(&[
                &predict(&g, &params, &w1).unwrap(),
                &predict(&g, &params, &w2).unwrap(),
            ])
            .unwrap();
            let diff = batched.zip_map(&single, |a, b| (a - b).abs()).max_value();
            assert!(diff < 1e-14, "{kind}: {diff}");
        }
    }

    #[test]
    fn loss_examples() {
        let mut tape = Tape::new();
        let y = tape.constant(Tensor::from_rows(&[[1.0, 2.0]]));
        let l = loss(&mut tape, y, y, &[], 0.0).unwrap();
        assert_eq!(tape.value(l).get(0, 0), 0.0);

        let t = tape.constant(Tensor::scalar(1.0));
        let p = tape.constant(Tensor::scalar(3.0));
        let l = loss(&mut tape, t, p, &[], 0.0).unwrap();
        assert_eq!(tape.value(l).get(0, 0), 4.0);

        let zero = tape.constant(Tensor::zeros(1, 1));
        let w = tape.param(Tensor::scalar(2.0));
        let l = loss(&mut tape, zero, zero, &[w], 1.0).unwrap();
        assert_eq!(tape.value(l).get(0, 0), 4.0);

        assert!(matches!(
            loss(&mut tape, zero, zero, &[w], -0.1),
            Err(Error::Domain(_))
        ));
        assert!(loss(&mut tape, y, t, &[], 0.0).is_err());
    }

    #[test]
    fn ha_examples() {
        let w = Tensor::from_rows(&[[2.0, 4.0], [7.0, 7.0]]);
        assert_eq!(
            ha_forward(&w, 2),
            Tensor::from_rows(&[[3.0, 3.0], [7.0, 7.0]])
        );
    }
}
