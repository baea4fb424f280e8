//! Minimal dense layers with hand-written backprop.

use serde::{Deserialize, Serialize};

use crate::rng::SeededRng;

/// `y = W x + b`, with `W` stored row-major as `outputs × inputs`.
/// An empty `bias` means the layer has no bias term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize, with_bias: bool) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: if with_bias { vec![0.0; outputs] } else { Vec::new() },
        }
    }

    /// Uniform in `±1/√fan_in` for weights and biases.
    pub fn init(inputs: usize, outputs: usize, with_bias: bool, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let mut layer = Self::zeros(inputs, outputs, with_bias);
        for w in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
            *w = (2.0 * rng.uniform() - 1.0) * bound;
        }
        layer
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.inputs, self.outputs, self.has_bias())
    }

    pub fn has_bias(&self) -> bool {
        !self.bias.is_empty()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        (0..self.outputs)
            .map(|o| {
                let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
                let dot: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum();
                dot + self.bias.get(o).copied().unwrap_or(0.0)
            })
            .collect()
    }

    /// Accumulates `∂/∂W` and `∂/∂b` into `grad` and returns `∂/∂x`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dx = vec![0.0; self.inputs];
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = o * self.inputs;
            for i in 0..self.inputs {
                grad.weight[row + i] += g * x[i];
                dx[i] += g * self.weight[row + i];
            }
            if let Some(b) = grad.bias.get_mut(o) {
                *b += g;
            }
        }
        dx
    }

    /// `self += alpha · other`
    pub fn axpy(&mut self, alpha: f64, other: &Dense) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += alpha * b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for w in self.weight.iter_mut().chain(self.bias.iter_mut()) {
            *w *= alpha;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weight.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    /// Tensor shapes in checkpoint order: weight then (optional) bias.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let mut s = vec![vec![self.outputs, self.inputs]];
        if self.has_bias() {
            s.push(vec![self.outputs]);
        }
        s
    }
}

pub fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Max-shifted log-softmax.
pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_is_shift_invariant_and_normalized() {
        let z = [1.0, 2.0, 3.0];
        let p = softmax(&z);
        let q = softmax(&[1001.0, 1002.0, 1003.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-15);
        }
        let lp = log_softmax(&z);
        for (a, b) in p.iter().zip(&lp) {
            assert!((a.ln() - b).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_backward_matches_finite_difference() {
        let mut rng = SeededRng::new(2);
        let layer = Dense::init(3, 2, true, &mut rng);
        let x = [0.3, -1.2, 0.7];
        let dy = [0.5, -2.0];
        let mut grad = layer.zeros_like();
        let dx = layer.backward(&x, &dy, &mut grad);
        let f = |l: &Dense, x: &[f64]| -> f64 {
            l.forward(x).iter().zip(&dy).map(|(y, g)| y * g).sum()
        };
        let h = 1e-6;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (f(&layer, &xp) - f(&layer, &xm)) / (2.0 * h);
            assert!((fd - dx[i]).abs() < 1e-8);
        }
        for w in 0..layer.weight.len() {
            let mut lp = layer.clone();
            let mut lm = layer.clone();
            lp.weight[w] += h;
            lm.weight[w] -= h;
            let fd = (f(&lp, &x) - f(&lm, &x)) / (2.0 * h);
            assert!((fd - grad.weight[w]).abs() < 1e-8);
        }
        assert_eq!(grad.bias, dy.to_vec());
    }

    #[test]
    fn logistic_is_stable() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0);
        assert_eq!(logistic(800.0), 1.0);
    }
}
