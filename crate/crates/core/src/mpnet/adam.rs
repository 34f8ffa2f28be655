use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// Adam with a stepwise exponential learning-rate decay:
/// `lr = learning_rate · decay^⌊t / decay_interval⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub decay: f64,
    /// In minibatches (optimizer steps).
    pub decay_interval: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            decay: 0.9,
            decay_interval: 200,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.decay > 0.0
            && self.decay <= 1.0
            && self.decay_interval > 0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid optimizer settings {self:?}"
            )))
        }
    }
}

/// Moments over the real parametrization: the real and imaginary part of
/// each weight are independent coordinates, so `second.re` holds the moment
/// of `∂/∂Re` and `second.im` the moment of `∂/∂Im`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Complex64>,
    second: Vec<Complex64>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, rows: usize, cols: usize) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            config,
            first: vec![zero; rows * cols],
            second: vec![zero; rows * cols],
            step: 0,
        }
    }

    pub(crate) fn from_parts(
        config: AdamConfig,
        first: Vec<Complex64>,
        second: Vec<Complex64>,
        step: u64,
    ) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::Shape("moment buffers differ in length".into()));
        }
        Ok(Self {
            config,
            first,
            second,
            step,
        })
    }

    /// Updates applied so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[Complex64] {
        &self.first
    }

    pub fn second_moment(&self) -> &[Complex64] {
        &self.second
    }

    /// Rate the next update will use.
    pub fn learning_rate(&self) -> f64 {
        let c = &self.config;
        let periods = (self.step / c.decay_interval) as i32;
        c.learning_rate * c.decay.powi(periods)
    }

    pub fn step(&mut self, weights: &mut ComplexMatrix, grad: &ComplexMatrix) -> Result<()> {
        let len = weights.as_slice().len();
        if grad.rows() != weights.rows() || grad.cols() != weights.cols() || self.first.len() != len
        {
            return Err(Error::Shape(
                "optimizer state, weights and gradient differ in shape".into(),
            ));
        }
        let lr = self.learning_rate();
        self.step += 1;
        let AdamConfig {
            beta1, beta2, eps, ..
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let update = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (((w, g), m), v) in weights
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            update(&mut w.re, &mut m.re, &mut v.re, g.re);
            update(&mut w.im, &mut m.im, &mut v.im, g.im);
        }
        Ok(())
    }
}
