//! Task-relation-aware fusion policy.
//!
//! A ReLU encoder maps state features to a hidden vector `h`. Each task `i`
//! gets base bin logits `z_i = head_i(h)`, an embedding `u_i = W_u^(i) h` and
//! a gate `gate_i = σ(g_i(h))`. Tasks attend to each other through
//! `e_ij = ⟨u_i, u_j⟩`, and the refined logits are
//!
//! ```text
//! z̃_i = gate_i · z_i + Σ_j softmax_j(e_ij) · z_j
//! ```
//!
//! mixed as whole length-`B` vectors. Each task then draws a bin from
//! `softmax(z̃_i)`. With the relation module disabled, `z̃_i = z_i`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fusion::ActionSpace;
use crate::nn::{log_softmax, logistic, relu_in_place, softmax, Dense};
use crate::rng::SeededRng;
use crate::types::FusionAction;

/// Layer sizes of a policy network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyShape {
    pub input_dim: usize,
    /// Encoder width `d_h`.
    pub hidden: usize,
    /// Encoder depth, at least one layer.
    pub layers: usize,
    /// Task count `k`.
    pub tasks: usize,
    /// Bins per task `B`.
    pub bins: usize,
    /// Relation embedding width `d`.
    pub relation_dim: usize,
    /// Whether task-relation mixing is active.
    pub relation: bool,
}

impl PolicyShape {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("policy.input_dim", self.input_dim),
            ("policy.hidden", self.hidden),
            ("policy.layers", self.layers),
            ("policy.tasks", self.tasks),
            ("policy.bins", self.bins),
            ("policy.relation_dim", self.relation_dim),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, v, ">= 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub shape: PolicyShape,
    pub encoder: Vec<Dense>,
    /// Per task, `d_h → B`.
    pub heads: Vec<Dense>,
    /// Per task, `d_h → d`, no bias.
    pub relations: Vec<Dense>,
    /// Per task, `d_h → 1`.
    pub gates: Vec<Dense>,
}

impl PolicyParams {
    pub fn init(shape: PolicyShape, rng: &mut SeededRng) -> Result<Self> {
        shape.validate()?;
        let mut encoder = Vec::with_capacity(shape.layers);
        for l in 0..shape.layers {
            let inputs = if l == 0 { shape.input_dim } else { shape.hidden };
            encoder.push(Dense::init(inputs, shape.hidden, true, rng));
        }
        let heads = (0..shape.tasks)
            .map(|_| Dense::init(shape.hidden, shape.bins, true, rng))
            .collect();
        let relations = (0..shape.tasks)
            .map(|_| Dense::init(shape.hidden, shape.relation_dim, false, rng))
            .collect();
        let gates = (0..shape.tasks)
            .map(|_| Dense::init(shape.hidden, 1, true, rng))
            .collect();
        Ok(Self {
            shape,
            encoder,
            heads,
            relations,
            gates,
        })
    }

    /// All-zero parameters of the given shape.
    pub fn zeros(shape: PolicyShape) -> Self {
        let encoder = (0..shape.layers)
            .map(|l| Dense::zeros(if l == 0 { shape.input_dim } else { shape.hidden }, shape.hidden, true))
            .collect();
        let per_task = |outputs, bias| (0..shape.tasks).map(|_| Dense::zeros(shape.hidden, outputs, bias)).collect();
        Self {
            shape,
            encoder,
            heads: per_task(shape.bins, true),
            relations: per_task(shape.relation_dim, false),
            gates: per_task(1, true),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |v: &Vec<Dense>| v.iter().map(Dense::zeros_like).collect();
        Self {
            shape: self.shape,
            encoder: z(&self.encoder),
            heads: z(&self.heads),
            relations: z(&self.relations),
            gates: z(&self.gates),
        }
    }

    /// Every layer with its name, in checkpoint order.
    pub fn layers(&self) -> Vec<(String, &Dense)> {
        let mut out = Vec::new();
        for (l, d) in self.encoder.iter().enumerate() {
            out.push((format!("encoder.{l}"), d));
        }
        for (group, layers) in [("head", &self.heads), ("relation", &self.relations), ("gate", &self.gates)] {
            for (i, d) in layers.iter().enumerate() {
                out.push((format!("{group}.{i}"), d));
            }
        }
        out
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Dense> {
        self.encoder
            .iter_mut()
            .chain(self.heads.iter_mut())
            .chain(self.relations.iter_mut())
            .chain(self.gates.iter_mut())
            .collect()
    }

    /// Named parameter blocks (weight and bias separately).
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (name, d) in self.layers() {
            out.push((format!("{name}.weight"), d.weight.as_slice()));
            if d.has_bias() {
                out.push((format!("{name}.bias"), d.bias.as_slice()));
            }
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for d in self.layers_mut() {
            out.push(&mut d.weight);
            if !d.bias.is_empty() {
                out.push(&mut d.bias);
            }
        }
        out
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.layers_mut().into_iter().zip(other.layers()) {
            a.axpy(alpha, b.1);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for d in self.layers_mut() {
            d.scale(alpha);
        }
    }

    pub fn norm(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|(_, b)| b.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Name of the first block holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.blocks()
            .into_iter()
            .find(|(_, b)| b.iter().any(|v| !v.is_finite()))
            .map(|(n, _)| n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutput {
    /// Refined logits `z̃_i`, one length-`B` vector per task.
    pub logits: Vec<Vec<f64>>,
    pub probs: Vec<Vec<f64>>,
    pub log_probs: Vec<Vec<f64>>,
    /// Row-stochastic `k × k` task attention.
    pub attention: Vec<Vec<f64>>,
    pub gates: Vec<f64>,
}

impl PolicyOutput {
    pub fn tasks(&self) -> usize {
        self.probs.len()
    }

    pub fn bins(&self) -> usize {
        self.probs[0].len()
    }

    /// Builds an output directly from refined logits, with identity attention.
    pub fn from_logits(logits: Vec<Vec<f64>>) -> Self {
        let k = logits.len();
        let probs = logits.iter().map(|z| softmax(z)).collect();
        let log_probs = logits.iter().map(|z| log_softmax(z)).collect();
        let attention = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            logits,
            probs,
            log_probs,
            attention,
            gates: vec![0.0; k],
        }
    }
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    input: Vec<f64>,
    /// Pre-activations of each encoder layer.
    pre: Vec<Vec<f64>>,
    /// Post-ReLU activations; the last one is `h`.
    act: Vec<Vec<f64>>,
    base_logits: Vec<Vec<f64>>,
    embeddings: Vec<Vec<f64>>,
    pub output: PolicyOutput,
}

fn check_finite(values: &[f64], location: impl FnOnce() -> String) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(location()))
    }
}

pub fn forward(params: &PolicyParams, state_features: &[f64]) -> Result<PolicyOutput> {
    Ok(forward_trace(params, state_features)?.output)
}

pub fn forward_trace(params: &PolicyParams, state_features: &[f64]) -> Result<ForwardTrace> {
    let shape = params.shape;
    check_dim("policy state features", shape.input_dim, state_features.len())?;
    let mut pre = Vec::with_capacity(shape.layers);
    let mut act: Vec<Vec<f64>> = Vec::with_capacity(shape.layers);
    for (l, layer) in params.encoder.iter().enumerate() {
        let x = if l == 0 { state_features } else { &act[l - 1] };
        let p = layer.forward(x);
        check_finite(&p, || format!("encoder layer {l}"))?;
        let mut a = p.clone();
        relu_in_place(&mut a);
        pre.push(p);
        act.push(a);
    }
    let h = act.last().expect("at least one encoder layer");
    let k = shape.tasks;
    let base_logits: Vec<Vec<f64>> = params.heads.iter().map(|d| d.forward(h)).collect();
    for (i, z) in base_logits.iter().enumerate() {
        check_finite(z, || format!("base logits of task {i}"))?;
    }

    let (embeddings, attention, gates, logits) = if shape.relation {
        let embeddings: Vec<Vec<f64>> = params.relations.iter().map(|d| d.forward(h)).collect();
        let attention: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let scores: Vec<f64> = (0..k)
                    .map(|j| dot(&embeddings[i], &embeddings[j]))
                    .collect();
                softmax(&scores)
            })
            .collect();
        for (i, row) in attention.iter().enumerate() {
            check_finite(row, || format!("task attention row {i}"))?;
        }
        let gates: Vec<f64> = params.gates.iter().map(|d| logistic(d.forward(h)[0])).collect();
        let logits: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                (0..shape.bins)
                    .map(|b| {
                        let mixed: f64 = (0..k).map(|j| attention[i][j] * base_logits[j][b]).sum();
                        gates[i] * base_logits[i][b] + mixed
                    })
                    .collect()
            })
            .collect();
        (embeddings, attention, gates, logits)
    } else {
        let identity = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        (Vec::new(), identity, vec![0.0; k], base_logits.clone())
    };
    for (i, z) in logits.iter().enumerate() {
        check_finite(z, || format!("refined logits of task {i}"))?;
    }
    let probs = logits.iter().map(|z| softmax(z)).collect();
    let log_probs = logits.iter().map(|z| log_softmax(z)).collect();
    Ok(ForwardTrace {
        input: state_features.to_vec(),
        pre,
        act,
        base_logits,
        embeddings,
        output: PolicyOutput {
            logits,
            probs,
            log_probs,
            attention,
            gates,
        },
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// How a joint action distribution is formed from the per-task softmaxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum ActionMode {
    /// Independent per-task categoricals over the full grid.
    #[default]
    Factorized,
    /// The product distribution renormalized over the listed bin-index
    /// tuples (the feasible set).
    Masked(Vec<Vec<usize>>),
}

impl ActionMode {
    /// Mask over every feasible action of `space`.
    pub fn masked(space: &ActionSpace) -> Result<Self> {
        let feasible = crate::fusion::enumerate_feasible(space)?;
        if feasible.is_empty() {
            return Err(Error::Empty("feasible action set"));
        }
        Ok(ActionMode::Masked(feasible.into_iter().map(|a| a.bin_indices).collect()))
    }
}

fn joint_unnormalized(out: &PolicyOutput, bins: &[usize]) -> f64 {
    bins.iter().enumerate().map(|(i, &b)| out.log_probs[i][b]).sum()
}

/// Log-probabilities of every masked action, normalized.
fn masked_log_probs(out: &PolicyOutput, mask: &[Vec<usize>]) -> Vec<f64> {
    let raw: Vec<f64> = mask.iter().map(|a| joint_unnormalized(out, a)).collect();
    log_softmax(&raw)
}

fn check_bins(out: &PolicyOutput, bins: &[usize]) -> Result<()> {
    check_dim("action bins", out.tasks(), bins.len())?;
    for (task, &index) in bins.iter().enumerate() {
        if index >= out.bins() {
            return Err(Error::BinOutOfRange {
                task,
                index,
                bins: out.bins(),
            });
        }
    }
    Ok(())
}

/// Joint log-probability under independent per-task categoricals.
pub fn log_prob(out: &PolicyOutput, a: &FusionAction) -> Result<f64> {
    log_prob_with(out, &a.bin_indices, &ActionMode::Factorized)
}

pub fn log_prob_with(out: &PolicyOutput, bins: &[usize], mode: &ActionMode) -> Result<f64> {
    check_bins(out, bins)?;
    match mode {
        ActionMode::Factorized => Ok(joint_unnormalized(out, bins)),
        ActionMode::Masked(mask) => {
            let lps = masked_log_probs(out, mask);
            Ok(mask
                .iter()
                .position(|m| m.as_slice() == bins)
                .map_or(f64::NEG_INFINITY, |p| lps[p]))
        }
    }
}

/// `Σ_i H(π_i)`, the entropy of the factorized joint distribution.
pub fn entropy(out: &PolicyOutput) -> f64 {
    out.probs
        .iter()
        .zip(&out.log_probs)
        .map(|(p, lp)| categorical_entropy(p, lp))
        .sum()
}

fn categorical_entropy(p: &[f64], lp: &[f64]) -> f64 {
    -p.iter()
        .zip(lp)
        .map(|(&pb, &lb)| if pb > 0.0 { pb * lb } else { 0.0 })
        .sum::<f64>()
}

pub fn entropy_with(out: &PolicyOutput, mode: &ActionMode) -> f64 {
    match mode {
        ActionMode::Factorized => entropy(out),
        ActionMode::Masked(mask) => {
            let lps = masked_log_probs(out, mask);
            let ps: Vec<f64> = lps.iter().map(|l| l.exp()).collect();
            categorical_entropy(&ps, &lps)
        }
    }
}

/// Samples one bin per task and returns the action with its log-probability.
pub fn sample_action(out: &PolicyOutput, space: &ActionSpace, rng: &mut SeededRng) -> Result<(FusionAction, f64)> {
    sample_action_with(out, space, &ActionMode::Factorized, rng)
}

pub fn sample_action_with(
    out: &PolicyOutput,
    space: &ActionSpace,
    mode: &ActionMode,
    rng: &mut SeededRng,
) -> Result<(FusionAction, f64)> {
    check_dim("action space tasks", space.tasks(), out.tasks())?;
    check_dim("action space bins", space.bins_per_task(), out.bins())?;
    match mode {
        ActionMode::Factorized => {
            let bins: Vec<usize> = out.probs.iter().map(|p| rng.categorical(p)).collect();
            let lp = joint_unnormalized(out, &bins);
            Ok((space.action(bins)?, lp))
        }
        ActionMode::Masked(mask) => {
            let lps = masked_log_probs(out, mask);
            let ps: Vec<f64> = lps.iter().map(|l| l.exp()).collect();
            let pick = rng.categorical(&ps);
            Ok((space.action(mask[pick].clone())?, lps[pick]))
        }
    }
}

/// Mode of the distribution: per-task argmax, or the most probable masked
/// action. Ties go to the lower index.
pub fn greedy_action(out: &PolicyOutput, space: &ActionSpace, mode: &ActionMode) -> Result<FusionAction> {
    let argmax = |v: &[f64]| {
        let mut best = 0;
        for (i, x) in v.iter().enumerate() {
            if *x > v[best] {
                best = i;
            }
        }
        best
    };
    match mode {
        ActionMode::Factorized => space.action(out.logits.iter().map(|z| argmax(z)).collect()),
        ActionMode::Masked(mask) => {
            let raw: Vec<f64> = mask.iter().map(|a| joint_unnormalized(out, a)).collect();
            space.action(mask[argmax(&raw)].clone())
        }
    }
}

/// `∂(c_lp · log π(a) + c_ent · H) / ∂z̃`, one vector per task.
pub fn logit_gradient(
    out: &PolicyOutput,
    bins: &[usize],
    c_lp: f64,
    c_ent: f64,
    mode: &ActionMode,
) -> Result<Vec<Vec<f64>>> {
    check_bins(out, bins)?;
    let k = out.tasks();
    let nb = out.bins();
    let mut grad = vec![vec![0.0; nb]; k];
    match mode {
        ActionMode::Factorized => {
            for i in 0..k {
                let h = categorical_entropy(&out.probs[i], &out.log_probs[i]);
                for b in 0..nb {
                    let p = out.probs[i][b];
                    let one_hot = if bins[i] == b { 1.0 } else { 0.0 };
                    let d_ent = if p > 0.0 { -p * (out.log_probs[i][b] + h) } else { 0.0 };
                    grad[i][b] = c_lp * (one_hot - p) + c_ent * d_ent;
                }
            }
        }
        ActionMode::Masked(mask) => {
            let lps = masked_log_probs(out, mask);
            let ps: Vec<f64> = lps.iter().map(|l| l.exp()).collect();
            // Marginals under the masked joint, and Σ_a p ln p · 1[a_i = b].
            let mut marg = vec![vec![0.0; nb]; k];
            let mut plogp = vec![vec![0.0; nb]; k];
            let mut total_plogp = 0.0;
            for (a, (&p, &lp)) in mask.iter().zip(ps.iter().zip(&lps)) {
                let t = if p > 0.0 { p * lp } else { 0.0 };
                total_plogp += t;
                for (i, &b) in a.iter().enumerate() {
                    marg[i][b] += p;
                    plogp[i][b] += t;
                }
            }
            let in_mask = mask.iter().any(|m| m.as_slice() == bins);
            for i in 0..k {
                for b in 0..nb {
                    let one_hot = if bins[i] == b { 1.0 } else { 0.0 };
                    let d_lp = if in_mask { one_hot - marg[i][b] } else { 0.0 };
                    let d_ent = -(plogp[i][b] - total_plogp * marg[i][b]);
                    grad[i][b] = c_lp * d_lp + c_ent * d_ent;
                }
            }
        }
    }
    Ok(grad)
}

/// Backpropagates refined-logit gradients into `grad`.
pub fn backprop_into(params: &PolicyParams, trace: &ForwardTrace, d_logits: &[Vec<f64>], grad: &mut PolicyParams) {
    let shape = params.shape;
    let k = shape.tasks;
    let h = trace.act.last().expect("encoder output");
    let out = &trace.output;
    let z = &trace.base_logits;
    let mut dh = vec![0.0; shape.hidden];
    let add = |dh: &mut Vec<f64>, v: Vec<f64>| {
        for (a, b) in dh.iter_mut().zip(v) {
            *a += b;
        }
    };

    let dz: Vec<Vec<f64>> = if shape.relation {
        let att = &out.attention;
        let gates = &out.gates;
        let dz: Vec<Vec<f64>> = (0..k)
            .map(|j| {
                (0..shape.bins)
                    .map(|b| gates[j] * d_logits[j][b] + (0..k).map(|i| att[i][j] * d_logits[i][b]).sum::<f64>())
                    .collect()
            })
            .collect();
        // Gates.
        for i in 0..k {
            let d_gate = dot(&d_logits[i], &z[i]);
            let d_pre = d_gate * gates[i] * (1.0 - gates[i]);
            add(&mut dh, params.gates[i].backward(h, &[d_pre], &mut grad.gates[i]));
        }
        // Attention scores.
        let mut d_scores = vec![vec![0.0; k]; k];
        for i in 0..k {
            let d_att: Vec<f64> = (0..k).map(|j| dot(&d_logits[i], &z[j])).collect();
            let centered: f64 = (0..k).map(|m| att[i][m] * d_att[m]).sum();
            for j in 0..k {
                d_scores[i][j] = att[i][j] * (d_att[j] - centered);
            }
        }
        let u = &trace.embeddings;
        for i in 0..k {
            let mut du = vec![0.0; shape.relation_dim];
            for j in 0..k {
                let c = d_scores[i][j] + d_scores[j][i];
                for (d, uj) in du.iter_mut().zip(&u[j]) {
                    *d += c * uj;
                }
            }
            add(&mut dh, params.relations[i].backward(h, &du, &mut grad.relations[i]));
        }
        dz
    } else {
        d_logits.to_vec()
    };
    for i in 0..k {
        add(&mut dh, params.heads[i].backward(h, &dz[i], &mut grad.heads[i]));
    }

    let mut d_act = dh;
    for l in (0..params.encoder.len()).rev() {
        let mut d_pre = d_act;
        for (d, p) in d_pre.iter_mut().zip(&trace.pre[l]) {
            if *p <= 0.0 {
                *d = 0.0;
            }
        }
        let x = if l == 0 { &trace.input } else { &trace.act[l - 1] };
        d_act = params.encoder[l].backward(x, &d_pre, &mut grad.encoder[l]);
    }
}

/// Gradient of `c_lp · log π(a | x) + c_ent · H[π(· | x)]` with respect to
/// every parameter, for the factorized distribution.
pub fn backward(params: &PolicyParams, state_features: &[f64], a: &FusionAction, c_lp: f64, c_ent: f64) -> Result<PolicyParams> {
    backward_with(params, state_features, &a.bin_indices, c_lp, c_ent, &ActionMode::Factorized)
}

pub fn backward_with(
    params: &PolicyParams,
    state_features: &[f64],
    bins: &[usize],
    c_lp: f64,
    c_ent: f64,
    mode: &ActionMode,
) -> Result<PolicyParams> {
    let trace = forward_trace(params, state_features)?;
    let d_logits = logit_gradient(&trace.output, bins, c_lp, c_ent, mode)?;
    let mut grad = params.zeros_like();
    backprop_into(params, &trace, &d_logits, &mut grad);
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(k: usize, b: usize) -> PolicyShape {
        PolicyShape {
            input_dim: 5,
            hidden: 8,
            layers: 2,
            tasks: k,
            bins: b,
            relation_dim: 4,
            relation: true,
        }
    }

    fn random_input(rng: &mut SeededRng, n: usize) -> Vec<f64> {
        (0..n).map(|_| 2.0 * rng.uniform() - 1.0).collect()
    }

    fn all_actions(k: usize, b: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..k {
            out = out
                .into_iter()
                .flat_map(|p| (0..b).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                }))
                .collect();
        }
        out
    }

    #[test]
    fn zero_relations_give_uniform_attention() {
        let mut rng = SeededRng::new(1);
        let mut params = PolicyParams::init(shape(3, 4), &mut rng).unwrap();
        for r in &mut params.relations {
            r.scale(0.0);
        }
        let out = forward(&params, &random_input(&mut rng, 5)).unwrap();
        for row in &out.attention {
            for &a in row {
                assert!((a - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_task_mixing_degenerates() {
        let mut rng = SeededRng::new(2);
        let params = PolicyParams::init(shape(1, 4), &mut rng).unwrap();
        let x = random_input(&mut rng, 5);
        let trace = forward_trace(&params, &x).unwrap();
        let g = trace.output.gates[0];
        assert_eq!(trace.output.attention, vec![vec![1.0]]);
        for (zt, z) in trace.output.logits[0].iter().zip(&trace.base_logits[0]) {
            assert!((zt - (g * z + z)).abs() < 1e-14);
        }
    }

    #[test]
    fn forward_is_reproducible_and_normalized() {
        let make = || {
            let mut rng = SeededRng::new(99);
            let params = PolicyParams::init(shape(3, 5), &mut rng).unwrap();
            forward(&params, &random_input(&mut rng, 5)).unwrap()
        };
        let a = make();
        assert_eq!(a, make());
        for p in &a.probs {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for row in &a.attention {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(a.gates.iter().all(|&g| g > 0.0 && g < 1.0));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let params = PolicyParams::init(shape(2, 3), &mut SeededRng::new(0)).unwrap();
        assert!(matches!(forward(&params, &[0.0; 4]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn shift_of_base_logits_leaves_probs_unchanged() {
        let mut rng = SeededRng::new(5);
        let params = PolicyParams::init(shape(3, 4), &mut rng).unwrap();
        let x = random_input(&mut rng, 5);
        let mut shifted = params.clone();
        for head in &mut shifted.heads {
            for b in &mut head.bias {
                *b += 3.7;
            }
        }
        let a = forward(&params, &x).unwrap();
        let b = forward(&shifted, &x).unwrap();
        for (p, q) in a.probs.iter().flatten().zip(b.probs.iter().flatten()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_uniform_log_probs() {
        let space = ActionSpace::uniform_grid(3, 0.0, 1.0, 4, 0.01).unwrap();
        let uniform = PolicyOutput::from_logits(vec![vec![0.0; 4]; 3]);
        let mut rng = SeededRng::new(3);
        for _ in 0..20 {
            let (a, lp) = sample_action(&uniform, &space, &mut rng).unwrap();
            assert!((lp + 3.0 * 4f64.ln()).abs() < 1e-12);
            assert_eq!(log_prob(&uniform, &a).unwrap(), lp);
        }
        assert!((entropy(&uniform) - 3.0 * 4f64.ln()).abs() < 1e-12);

        let peaked = PolicyOutput::from_logits(vec![vec![0.0, 60.0, 0.0, 0.0]; 3]);
        for _ in 0..20 {
            let (a, lp) = sample_action(&peaked, &space, &mut rng).unwrap();
            assert_eq!(a.bin_indices, vec![1, 1, 1]);
            assert!(lp.abs() < 1e-20);
        }
        assert!(entropy(&peaked) < 1e-20);
    }

    #[test]
    fn out_of_range_bin_is_rejected() {
        let out = PolicyOutput::from_logits(vec![vec![0.0; 3]; 2]);
        assert!(matches!(log_prob_with(&out, &[0, 3], &ActionMode::Factorized), Err(Error::BinOutOfRange { task: 1, .. })));
    }

    #[test]
    fn sampling_frequencies_match_probabilities() {
        let mut rng = SeededRng::new(8);
        let params = PolicyParams::init(shape(2, 4), &mut rng).unwrap();
        let out = forward(&params, &random_input(&mut rng, 5)).unwrap();
        let space = ActionSpace::uniform_grid(2, 0.0, 1.0, 4, 0.01).unwrap();
        let n = 100_000;
        let mut counts = vec![vec![0usize; 4]; 2];
        for _ in 0..n {
            let (a, _) = sample_action(&out, &space, &mut rng).unwrap();
            for (i, &b) in a.bin_indices.iter().enumerate() {
                counts[i][b] += 1;
            }
        }
        for i in 0..2 {
            for b in 0..4 {
                let p = out.probs[i][b];
                let freq = counts[i][b] as f64 / n as f64;
                let se = (p * (1.0 - p) / n as f64).sqrt();
                assert!((freq - p).abs() <= 3.0 * se, "task {i} bin {b}: {freq} vs {p}");
            }
        }
    }

    #[test]
    fn exhaustive_mass_and_entropy() {
        let mut rng = SeededRng::new(12);
        let params = PolicyParams::init(shape(3, 4), &mut rng).unwrap();
        let out = forward(&params, &random_input(&mut rng, 5)).unwrap();
        let actions = all_actions(3, 4);
        let mut mass = 0.0;
        let mut joint_h = 0.0;
        for a in &actions {
            let lp = log_prob_with(&out, a, &ActionMode::Factorized).unwrap();
            mass += lp.exp();
            joint_h -= lp.exp() * lp;
        }
        assert!((mass - 1.0).abs() < 1e-12);
        assert!((joint_h - entropy(&out)).abs() < 1e-12);

        let space = ActionSpace::uniform_grid(3, 0.0, 1.0, 4, 0.01).unwrap();
        let mode = ActionMode::masked(&space).unwrap();
        let mut masked_mass = 0.0;
        let mut masked_h = 0.0;
        for a in &actions {
            let lp = log_prob_with(&out, a, &mode).unwrap();
            if lp.is_finite() {
                masked_mass += lp.exp();
                masked_h -= lp.exp() * lp;
            }
        }
        assert!((masked_mass - 1.0).abs() < 1e-12);
        assert!((masked_h - entropy_with(&out, &mode)).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficients_give_zero_gradient() {
        let mut rng = SeededRng::new(4);
        let params = PolicyParams::init(shape(3, 4), &mut rng).unwrap();
        let space = ActionSpace::uniform_grid(3, 0.0, 1.0, 4, 0.01).unwrap();
        let a = space.action(vec![0, 2, 3]).unwrap();
        let g = backward(&params, &random_input(&mut rng, 5), &a, 0.0, 0.0).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    fn objective(params: &PolicyParams, x: &[f64], bins: &[usize], c1: f64, c2: f64, mode: &ActionMode) -> f64 {
        let out = forward(params, x).unwrap();
        c1 * log_prob_with(&out, bins, mode).unwrap() + c2 * entropy_with(&out, mode)
    }

    fn fd_check(relation: bool, mode: ActionMode, seed: u64) {
        let mut rng = SeededRng::new(seed);
        let sh = PolicyShape { relation, ..shape(3, 4) };
        let params = PolicyParams::init(sh, &mut rng).unwrap();
        let x = random_input(&mut rng, 5);
        let bins = match &mode {
            ActionMode::Factorized => vec![1, 3, 0],
            ActionMode::Masked(m) => m[m.len() / 2].clone(),
        };
        let (c1, c2) = (0.7, -0.3);
        let grad = backward_with(&params, &x, &bins, c1, c2, &mode).unwrap();
        let h = 1e-6;
        let names: Vec<String> = params.blocks().into_iter().map(|(n, _)| n).collect();
        let analytic: Vec<Vec<f64>> = grad.blocks().into_iter().map(|(_, b)| b.to_vec()).collect();
        for (bi, name) in names.iter().enumerate() {
            let len = analytic[bi].len();
            let mut fd = Vec::with_capacity(len);
            for e in 0..len {
                let mut p = params.clone();
                p.blocks_mut()[bi][e] += h;
                let up = objective(&p, &x, &bins, c1, c2, &mode);
                let mut m = params.clone();
                m.blocks_mut()[bi][e] -= h;
                let down = objective(&m, &x, &bins, c1, c2, &mode);
                fd.push((up - down) / (2.0 * h));
            }
            let diff: f64 = fd.iter().zip(&analytic[bi]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(analytic[bi].iter().map(|v| v * v).sum::<f64>().sqrt());
            if scale > 1e-9 {
                assert!(diff / scale < 1e-4, "{name}: relative error {}", diff / scale);
            } else {
                assert!(diff < 1e-8, "{name}: absolute error {diff}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        fd_check(true, ActionMode::Factorized, 21);
        fd_check(false, ActionMode::Factorized, 22);
        let space = ActionSpace::uniform_grid(3, 0.0, 1.0, 4, 0.01).unwrap();
        fd_check(true, ActionMode::masked(&space).unwrap(), 23);
    }

    #[test]
    fn logit_gradient_is_one_hot_minus_probs() {
        let out = PolicyOutput::from_logits(vec![vec![0.3, -1.0, 2.0], vec![1.0, 1.0, 0.0]]);
        let g = logit_gradient(&out, &[2, 0], 1.0, 0.0, &ActionMode::Factorized).unwrap();
        for i in 0..2 {
            for b in 0..3 {
                let one_hot = if [2, 0][i] == b { 1.0 } else { 0.0 };
                assert!((g[i][b] - (one_hot - out.probs[i][b])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn greedy_picks_mode() {
        let space = ActionSpace::uniform_grid(2, 0.0, 1.0, 3, 0.01).unwrap();
        let out = PolicyOutput::from_logits(vec![vec![0.0, 2.0, 1.0], vec![3.0, 0.0, 0.0]]);
        assert_eq!(greedy_action(&out, &space, &ActionMode::Factorized).unwrap().bin_indices, vec![1, 0]);
        // (0.5, 0.0) is infeasible, so the mask picks the best tuple summing to 1.
        let mode = ActionMode::masked(&space).unwrap();
        let a = greedy_action(&out, &space, &mode).unwrap();
        assert!(crate::fusion::is_feasible(&a, 0.01));
        assert_eq!(a.bin_indices, vec![2, 0]);
    }
}
