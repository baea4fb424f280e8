//! Query-level satisfaction: the ground-truth `r_sat` built from reformulation,
//! normalized session gap and retention, and a list-level regressor trained
//! on it with confidence-weighted squared error.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fusion::RankedList;
use crate::nn::{relu_in_place, Dense};
use crate::rng::SeededRng;
use crate::types::{Candidate, QueryEpisode};

/// Ranked positions summarized in the list features.
pub const LIST_POSITIONS: usize = 10;

/// Length of [`list_features`] for `tasks` score columns: relevance and
/// `ln(1 + s_j)` per position, then mean fused score, max fused score and
/// `ln(1 + length)`.
pub fn list_feature_dim(tasks: usize) -> usize {
    (1 + tasks) * LIST_POSITIONS + 3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SatConfig {
    /// Quantile of the user's gap history used as the personal baseline.
    pub beta_q: f64,
    /// Stability term added to the baseline, seconds.
    pub delta: f64,
    pub temperature: f64,
    /// Weight of the gap term against retention.
    pub alpha: f64,
}

impl Default for SatConfig {
    fn default() -> Self {
        Self {
            beta_q: 0.6,
            delta: 60.0,
            temperature: 1.0,
            alpha: 0.5,
        }
    }
}

impl SatConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_q > 0.0 && self.beta_q < 1.0) {
            return Err(Error::invalid("satisfaction.beta_q", self.beta_q, "in (0, 1)"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::invalid("satisfaction.delta", self.delta, "> 0"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::invalid("satisfaction.temperature", self.temperature, "> 0"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("satisfaction.alpha", self.alpha, "in (0, 1)"));
        }
        Ok(())
    }
}

/// Empirical `beta_q` quantile with linear interpolation between order
/// statistics (position `(n − 1)·beta_q`).
pub fn gap_baseline(historical_gaps: &[f64], beta_q: f64) -> Result<f64> {
    if historical_gaps.is_empty() {
        return Err(Error::Empty("gap history"));
    }
    if !(0.0..=1.0).contains(&beta_q) {
        return Err(Error::invalid("beta_q", beta_q, "in [0, 1]"));
    }
    let mut sorted = historical_gaps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * beta_q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// `exp(−gap / ((μ_u + δ)·T))`
pub fn gap_score(session_gap: f64, baseline: f64, delta: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::invalid("temperature", temperature, "> 0"));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", delta, "> 0"));
    }
    if !(baseline > 0.0) {
        return Err(Error::invalid("user_gap_baseline", baseline, "> 0"));
    }
    if !(session_gap >= 0.0) {
        return Err(Error::invalid("session_gap", session_gap, ">= 0"));
    }
    Ok((-session_gap / ((baseline + delta) * temperature)).exp())
}

/// `(1 − I_reform)·[α·gap_score + (1 − α)·I_ret]`, in `[0, 1]`.
///
/// Accepts any `alpha` in `[0, 1]` so sweeps can include the endpoints.
pub fn satisfaction_reward(
    reformulated: bool,
    session_gap: f64,
    retained: bool,
    baseline: f64,
    cfg: &SatConfig,
) -> Result<f64> {
    let score = gap_score(session_gap, baseline, cfg.delta, cfg.temperature)?;
    if reformulated {
        return Ok(0.0);
    }
    let ret = if retained { 1.0 } else { 0.0 };
    Ok(cfg.alpha * score + (1.0 - cfg.alpha) * ret)
}

pub fn r_sat(episode: &QueryEpisode, cfg: &SatConfig) -> Result<f64> {
    satisfaction_reward(
        episode.reformulated,
        episode.session_gap,
        episode.retained,
        episode.user_gap_baseline,
        cfg,
    )
}

/// Confidence weight `ln(1 + clicks + long_plays)` from follow-up activity.
pub fn confidence(future_clicks: f64, future_long_plays: f64) -> Result<f64> {
    if !(future_clicks >= 0.0) {
        return Err(Error::invalid("future_clicks", future_clicks, ">= 0"));
    }
    if !(future_long_plays >= 0.0) {
        return Err(Error::invalid("future_long_plays", future_long_plays, ">= 0"));
    }
    Ok((future_clicks + future_long_plays).ln_1p())
}

pub fn episode_confidence(episode: &QueryEpisode) -> f64 {
    (f64::from(episode.future_clicks) + f64::from(episode.future_long_plays)).ln_1p()
}

/// Features of a ranked list: per top position the relevance label and
/// `ln(1 + s_j)` for every task, followed by mean and max fused score and
/// `ln(1 + length)`. Positions past the end of the list are zero.
pub fn list_features(candidates: &[Candidate], list: &RankedList) -> Vec<f64> {
    let shown: Vec<&Candidate> = list.order.iter().map(|&i| &candidates[i]).collect();
    let fused: Vec<f64> = list.order.iter().map(|&i| list.fused_scores[i]).collect();
    features_in_display_order(&shown, &fused)
}

/// List features of a logged episode, whose candidates are already in
/// display order.
pub fn episode_list_features(episode: &QueryEpisode) -> Vec<f64> {
    let shown: Vec<&Candidate> = episode.candidates.iter().collect();
    features_in_display_order(&shown, &episode.fused_scores)
}

fn features_in_display_order(shown: &[&Candidate], fused: &[f64]) -> Vec<f64> {
    let tasks = shown.first().map_or(0, |c| c.scores.len());
    let width = 1 + tasks;
    let mut out = vec![0.0; list_feature_dim(tasks)];
    for (p, c) in shown.iter().take(LIST_POSITIONS).enumerate() {
        out[width * p] = c.relevance;
        for (j, s) in c.scores.values().iter().enumerate() {
            out[width * p + 1 + j] = s.ln_1p();
        }
    }
    let tail = width * LIST_POSITIONS;
    let n = fused.len().max(1) as f64;
    out[tail] = fused.iter().sum::<f64>() / n;
    out[tail + 1] = if fused.is_empty() {
        0.0
    } else {
        fused.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    out[tail + 2] = (shown.len() as f64).ln_1p();
    out
}

/// One-hidden-layer regressor `(context, list) → ℝ`. Inputs are
/// standardized as `(x − input_shift)·input_scale` before the first layer;
/// the standardization is fixed, not trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModelParams {
    pub context_dim: usize,
    pub list_dim: usize,
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub hidden: Dense,
    pub output: Dense,
}

impl RewardModelParams {
    pub fn init(context_dim: usize, list_dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let input = context_dim + list_dim;
        Self {
            context_dim,
            list_dim,
            input_shift: vec![0.0; input],
            input_scale: vec![1.0; input],
            hidden: Dense::init(input, hidden, true, rng),
            output: Dense::init(hidden, 1, true, rng),
        }
    }

    pub fn zeros(context_dim: usize, list_dim: usize, hidden: usize) -> Self {
        let input = context_dim + list_dim;
        Self {
            context_dim,
            list_dim,
            input_shift: vec![0.0; input],
            input_scale: vec![1.0; input],
            hidden: Dense::zeros(input, hidden, true),
            output: Dense::zeros(hidden, 1, true),
        }
    }

    /// Zero weights with this model's standardization.
    pub fn zeros_like(&self) -> Self {
        Self {
            context_dim: self.context_dim,
            list_dim: self.list_dim,
            input_shift: self.input_shift.clone(),
            input_scale: self.input_scale.clone(),
            hidden: self.hidden.zeros_like(),
            output: self.output.zeros_like(),
        }
    }

    /// Sets the input standardization to the per-feature mean and inverse
    /// standard deviation of `data`. Constant features get scale 1.
    pub fn standardize_on(&mut self, data: &[SatSample]) -> Result<()> {
        if data.is_empty() {
            return Err(Error::Empty("reward model dataset"));
        }
        let dim = self.context_dim + self.list_dim;
        let n = data.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in data {
            for (m, x) in mean.iter_mut().zip(self.input_raw(&s.context, &s.list)?) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; dim];
        for s in data {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(self.input_raw(&s.context, &s.list)?) {
                *v += (x - m).powi(2) / n;
            }
        }
        self.input_shift = mean;
        self.input_scale = var.iter().map(|v| if *v > 1e-12 { 1.0 / v.sqrt() } else { 1.0 }).collect();
        Ok(())
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden.outputs
    }

    pub fn layers(&self) -> [&Dense; 2] {
        [&self.hidden, &self.output]
    }

    pub fn layers_mut(&mut self) -> [&mut Dense; 2] {
        [&mut self.hidden, &mut self.output]
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        self.hidden.axpy(alpha, &other.hidden);
        self.output.axpy(alpha, &other.output);
    }

    pub fn is_finite(&self) -> bool {
        self.hidden.is_finite() && self.output.is_finite()
    }

    fn input_raw(&self, context: &[f64], list: &[f64]) -> Result<Vec<f64>> {
        check_dim("reward model context", self.context_dim, context.len())?;
        check_dim("reward model list features", self.list_dim, list.len())?;
        Ok(context.iter().chain(list).copied().collect())
    }

    fn input(&self, context: &[f64], list: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.input_raw(context, list)?;
        for ((v, m), s) in x.iter_mut().zip(&self.input_shift).zip(&self.input_scale) {
            *v = (*v - m) * s;
        }
        Ok(x)
    }

    /// Unclamped regressor output.
    pub fn raw_output(&self, context: &[f64], list: &[f64]) -> Result<f64> {
        let x = self.input(context, list)?;
        let mut h = self.hidden.forward(&x);
        relu_in_place(&mut h);
        Ok(self.output.forward(&h)[0])
    }
}

/// Predicted satisfaction, clamped to `[0, 1]`.
pub fn predict_satisfaction(params: &RewardModelParams, context: &[f64], list: &[f64]) -> Result<f64> {
    Ok(params.raw_output(context, list)?.clamp(0.0, 1.0))
}

/// One reward-model training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatSample {
    pub context: Vec<f64>,
    pub list: Vec<f64>,
    pub target: f64,
    pub confidence: f64,
}

impl SatSample {
    pub fn from_episode(episode: &QueryEpisode, cfg: &SatConfig) -> Result<Self> {
        Ok(Self {
            context: episode.state_features.clone(),
            list: episode_list_features(episode),
            target: r_sat(episode, cfg)?,
            confidence: episode_confidence(episode),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardModelHyper {
    pub hidden: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for RewardModelHyper {
    fn default() -> Self {
        Self {
            hidden: 32,
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 60,
            batch_size: 64,
        }
    }
}

impl RewardModelHyper {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::invalid("reward_model.hidden", self.hidden, ">= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("reward_model.learning_rate", self.learning_rate, "> 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("reward_model.momentum", self.momentum, "in [0, 1)"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid(
                "reward_model.epochs/batch_size",
                format!("{}/{}", self.epochs, self.batch_size),
                ">= 1",
            ));
        }
        Ok(())
    }
}

/// `(1/Σc) Σ c_i (R(x_i) − y_i)²` over the raw regressor output.
pub fn weighted_mse(params: &RewardModelParams, data: &[SatSample]) -> Result<f64> {
    let total: f64 = data.iter().map(|s| s.confidence).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroConfidence);
    }
    let mut acc = 0.0;
    for s in data {
        let err = params.raw_output(&s.context, &s.list)? - s.target;
        acc += s.confidence * err * err;
    }
    Ok(acc / total)
}

/// Gradient of [`weighted_mse`] with respect to every parameter.
pub fn weighted_mse_gradient(params: &RewardModelParams, data: &[SatSample]) -> Result<RewardModelParams> {
    let total: f64 = data.iter().map(|s| s.confidence).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroConfidence);
    }
    let mut grad = params.zeros_like();
    for s in data {
        if s.confidence == 0.0 {
            continue;
        }
        let x = params.input(&s.context, &s.list)?;
        let pre = params.hidden.forward(&x);
        let mut h = pre.clone();
        relu_in_place(&mut h);
        let y = params.output.forward(&h)[0];
        let dy = 2.0 * s.confidence * (y - s.target) / total;
        let mut dh = params.output.backward(&h, &[dy], &mut grad.output);
        for (d, p) in dh.iter_mut().zip(&pre) {
            if *p <= 0.0 {
                *d = 0.0;
            }
        }
        params.hidden.backward(&x, &dh, &mut grad.hidden);
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedRewardModel {
    pub params: RewardModelParams,
    /// Full-dataset weighted MSE after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Fits a fresh regressor by mini-batch gradient descent with momentum.
pub fn train_reward_model(
    data: &[SatSample],
    hyper: &RewardModelHyper,
    rng: &SeededRng,
) -> Result<TrainedRewardModel> {
    let first = data.first().ok_or(Error::Empty("reward model dataset"))?;
    let mut init_rng = rng.split("reward-model-init");
    let mut params = RewardModelParams::init(first.context.len(), first.list.len(), hyper.hidden, &mut init_rng);
    params.standardize_on(data)?;
    fit_reward_model(params, data, hyper, rng)
}

/// Continues training from `params`.
pub fn fit_reward_model(
    mut params: RewardModelParams,
    data: &[SatSample],
    hyper: &RewardModelHyper,
    rng: &SeededRng,
) -> Result<TrainedRewardModel> {
    hyper.validate()?;
    let total: f64 = data.iter().map(|s| s.confidence).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroConfidence);
    }
    let mut shuffle_rng = rng.split("reward-model-shuffle");
    let mut velocity = params.zeros_like();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_trace = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, shuffle_rng.below(i + 1));
        }
        for chunk in order.chunks(hyper.batch_size) {
            let batch: Vec<SatSample> = chunk.iter().map(|&i| data[i].clone()).collect();
            if batch.iter().map(|s| s.confidence).sum::<f64>() <= 0.0 {
                continue;
            }
            let grad = weighted_mse_gradient(&params, &batch)?;
            velocity.hidden.scale(hyper.momentum);
            velocity.output.scale(hyper.momentum);
            velocity.axpy(1.0, &grad);
            params.axpy(-hyper.learning_rate, &velocity);
        }
        if !params.is_finite() {
            return Err(Error::NonFinite(format!("reward model parameters after epoch {epoch}")));
        }
        loss_trace.push(weighted_mse(&params, data)?);
    }
    Ok(TrainedRewardModel { params, loss_trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn baseline_quantiles() {
        assert_eq!(gap_baseline(&[10.0, 10.0, 10.0], 0.37).unwrap(), 10.0);
        assert_eq!(gap_baseline(&[3.0, 1.0, 2.0], 0.5).unwrap(), 2.0);
        // Sort-and-interpolate oracle: position 99·0.6 = 59.4 in 1..=100.
        let hist: Vec<f64> = (1..=100).map(f64::from).collect();
        let got = gap_baseline(&hist, 0.6).unwrap();
        assert!((got - 60.4).abs() < 1e-12, "{got}");
        assert!(matches!(gap_baseline(&[], 0.6), Err(Error::Empty(_))));
    }

    #[test]
    fn gap_score_anchor_points() {
        assert_eq!(gap_score(0.0, 100.0, 5.0, 2.0).unwrap(), 1.0);
        let unit = (100.0 + 5.0) * 2.0;
        assert!((gap_score(unit, 100.0, 5.0, 2.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(gap_score(1e9, 100.0, 5.0, 2.0).unwrap() < 1e-300);
        assert!(gap_score(1.0, 100.0, 5.0, 0.0).is_err());
        assert!(gap_score(1.0, 100.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn r_sat_examples() {
        let cfg = SatConfig::default();
        assert_eq!(satisfaction_reward(true, 0.0, true, 50.0, &cfg).unwrap(), 0.0);
        assert_eq!(satisfaction_reward(false, 0.0, true, 50.0, &cfg).unwrap(), 1.0);
        assert!(satisfaction_reward(false, 1e12, false, 50.0, &cfg).unwrap() < 1e-300);
        let a0 = SatConfig { alpha: 0.0, ..cfg };
        assert_eq!(satisfaction_reward(false, 30.0, true, 50.0, &a0).unwrap(), 1.0);
        assert_eq!(satisfaction_reward(false, 30.0, false, 50.0, &a0).unwrap(), 0.0);
    }

    #[test]
    fn confidence_examples() {
        assert_eq!(confidence(0.0, 0.0).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((confidence(e - 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(confidence(5.0, 5.0).unwrap() > confidence(1.0, 1.0).unwrap());
        assert!(confidence(-1.0, 0.0).is_err());
    }

    #[test]
    fn sat_config_validation() {
        assert!(SatConfig::default().validate().is_ok());
        assert!(SatConfig { beta_q: 1.0, ..Default::default() }.validate().is_err());
        assert!(SatConfig { alpha: 0.0, ..Default::default() }.validate().is_err());
        assert!(SatConfig { temperature: -1.0, ..Default::default() }.validate().is_err());
    }

    fn synthetic_linear(n: usize, seed: u64) -> Vec<SatSample> {
        let mut rng = SeededRng::new(seed);
        (0..n)
            .map(|_| {
                let context: Vec<f64> = (0..3).map(|_| rng.uniform()).collect();
                let list: Vec<f64> = (0..2).map(|_| rng.uniform()).collect();
                let target = 0.1 + 0.3 * context[0] + 0.2 * context[2] + 0.3 * list[1];
                SatSample {
                    context,
                    list,
                    target,
                    confidence: 0.2 + rng.uniform(),
                }
            })
            .collect()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let data = synthetic_linear(40, 9);
        let mut rng = SeededRng::new(5);
        let params = RewardModelParams::init(3, 2, 6, &mut rng);
        let grad = weighted_mse_gradient(&params, &data).unwrap();
        let h = 1e-6;
        for layer in 0..2 {
            let n_w = params.layers()[layer].weight.len();
            let n_b = params.layers()[layer].bias.len();
            for (is_bias, count) in [(false, n_w), (true, n_b)] {
                let mut an = Vec::new();
                let mut fd = Vec::new();
                for i in 0..count {
                    let bump = |delta: f64| {
                        let mut p = params.clone();
                        let l = &mut p.layers_mut()[layer];
                        if is_bias { l.bias[i] += delta } else { l.weight[i] += delta }
                        weighted_mse(&p, &data).unwrap()
                    };
                    fd.push((bump(h) - bump(-h)) / (2.0 * h));
                    let l = grad.layers()[layer];
                    an.push(if is_bias { l.bias[i] } else { l.weight[i] });
                }
                let diff: f64 = an.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let scale: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                assert!(diff / scale < 1e-4, "layer {layer} bias={is_bias}: {}", diff / scale);
            }
        }
    }

    #[test]
    fn exact_fit_leaves_parameters_unchanged() {
        let mut rng = SeededRng::new(1);
        let params = RewardModelParams::init(2, 1, 4, &mut rng);
        let data: Vec<SatSample> = (0..20)
            .map(|_| {
                let context = vec![rng.uniform(), rng.uniform()];
                let list = vec![rng.uniform()];
                let target = params.raw_output(&context, &list).unwrap();
                SatSample { context, list, target, confidence: 1.0 }
            })
            .collect();
        let hyper = RewardModelHyper { hidden: 4, epochs: 5, batch_size: 8, ..Default::default() };
        let trained = fit_reward_model(params.clone(), &data, &hyper, &SeededRng::new(2)).unwrap();
        assert!(trained.loss_trace.iter().all(|&l| l < 1e-24));
        assert_eq!(trained.params, params);
    }

    #[test]
    fn zero_confidence_samples_do_not_change_objective() {
        let mut data = synthetic_linear(10, 4);
        let params = RewardModelParams::init(3, 2, 5, &mut SeededRng::new(3));
        let before = weighted_mse(&params, &data).unwrap();
        data.push(SatSample { context: vec![9.0; 3], list: vec![-4.0; 2], target: 1.0, confidence: 0.0 });
        assert_eq!(weighted_mse(&params, &data).unwrap(), before);
        let all_zero: Vec<SatSample> = data.iter().map(|s| SatSample { confidence: 0.0, ..s.clone() }).collect();
        assert!(matches!(
            train_reward_model(&all_zero, &RewardModelHyper::default(), &SeededRng::new(0)),
            Err(Error::ZeroConfidence)
        ));
    }

    #[test]
    fn fits_linear_targets() {
        let data = synthetic_linear(400, 21);
        let hyper = RewardModelHyper {
            hidden: 16,
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 200,
            batch_size: 32,
        };
        let trained = train_reward_model(&data, &hyper, &SeededRng::new(8)).unwrap();
        let last = *trained.loss_trace.last().unwrap();
        assert!(last < 1e-3, "final weighted MSE {last}");
    }

    #[test]
    fn standardization_centers_and_scales() {
        let data = synthetic_linear(200, 3);
        let mut params = RewardModelParams::init(3, 2, 4, &mut SeededRng::new(1));
        params.standardize_on(&data).unwrap();
        for k in 0..5 {
            let xs: Vec<f64> = data.iter().map(|s| params.input(&s.context, &s.list).unwrap()[k]).collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
            assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-9, "feature {k}: mean {m}, var {v}");
        }
        let constant: Vec<SatSample> = data.iter().map(|s| SatSample { context: vec![2.0; 3], ..s.clone() }).collect();
        params.standardize_on(&constant).unwrap();
        assert_eq!(&params.input_scale[..3], &[1.0; 3]);
        assert!(params.input(&[2.0; 3], &[0.0, 0.0]).unwrap()[..3].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn prediction_clamps() {
        let mut params = RewardModelParams::zeros(2, 1, 3);
        assert_eq!(predict_satisfaction(&params, &[0.3, 0.1], &[0.2]).unwrap(), 0.0);
        params.output.bias[0] = 1.7;
        assert_eq!(predict_satisfaction(&params, &[0.3, 0.1], &[0.2]).unwrap(), 1.0);
        params.output.bias[0] = 0.42;
        assert_eq!(predict_satisfaction(&params, &[0.3, 0.1], &[0.2]).unwrap(), 0.42);
        assert!(matches!(
            predict_satisfaction(&params, &[0.3], &[0.2]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn r_sat_bounded_and_monotone(
            gap in 0.0f64..1e6, extra in 0.0f64..1e6, base in 1.0f64..1e5,
            delta in 0.1f64..1e3, temp in 0.05f64..10.0, alpha in 0.0f64..=1.0,
            reform in any::<bool>(), ret in any::<bool>(),
        ) {
            let cfg = SatConfig { beta_q: 0.6, delta, temperature: temp, alpha };
            let r = satisfaction_reward(reform, gap, ret, base, &cfg).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            let later = satisfaction_reward(reform, gap + extra, ret, base, &cfg).unwrap();
            prop_assert!(later <= r);
            if !reform {
                let lo = satisfaction_reward(false, gap, false, base, &cfg).unwrap();
                let hi = satisfaction_reward(false, gap, true, base, &cfg).unwrap();
                prop_assert!(hi >= lo);
            }
        }

        #[test]
        fn gap_score_depends_only_on_normalized_gap(
            gap in 0.0f64..1e4, base in 1.0f64..1e3, delta in 0.1f64..100.0,
            temp in 0.1f64..5.0, factor in 0.1f64..10.0,
        ) {
            let a = gap_score(gap, base, delta, temp).unwrap();
            let b = gap_score(gap * factor, base * factor, delta * factor, temp).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
