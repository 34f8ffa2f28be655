use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{accumulate_gradient, estimate_with_trace, AdamConfig, AdamState, MpNetModel};
use crate::channel::ChannelSample;
use crate::error::{Error, Result};
use crate::estimators::Estimate;
use crate::linalg::{norm_sqr, ComplexMatrix};
use crate::metrics::{rmse, to_db};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 200,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config(
                "training.batch_size must be at least 1".into(),
            ));
        }
        self.adam.validate()
    }
}

/// Drives online unsupervised training one observation at a time.
///
/// Each observation is estimated with the current weights, then its
/// gradient is accumulated; every `batch_size` observations the optimizer
/// applies the averaged gradient of
/// `C = 1/(2B) Σ ‖x − ĥ‖² / ‖x‖²`.
#[derive(Debug, Clone)]
pub struct OnlineTrainer {
    model: MpNetModel,
    adam: AdamState,
    batch_size: usize,
    grad: ComplexMatrix,
    touched: Vec<usize>,
    is_touched: Vec<bool>,
    pending: usize,
    cost: f64,
    last_cost: Option<f64>,
}

impl OnlineTrainer {
    pub fn new(model: MpNetModel, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let (n, a) = (model.n_antennas(), model.n_atoms());
        Ok(Self {
            adam: AdamState::new(cfg.adam, n, a),
            batch_size: cfg.batch_size,
            grad: ComplexMatrix::zeros(n, a),
            touched: Vec::new(),
            is_touched: vec![false; a],
            pending: 0,
            cost: 0.0,
            last_cost: None,
            model,
        })
    }

    /// Resumes from a checkpointed optimizer state.
    pub fn with_state(model: MpNetModel, adam: AdamState, batch_size: usize) -> Result<Self> {
        let cfg = TrainConfig {
            batch_size,
            adam: adam.config,
        };
        let mut t = Self::new(model, &cfg)?;
        if adam.first_moment().len() != t.grad.as_slice().len() {
            return Err(Error::Shape(
                "optimizer state does not match the weights".into(),
            ));
        }
        t.adam = adam;
        Ok(t)
    }

    pub fn model(&self) -> &MpNetModel {
        &self.model
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn into_parts(self) -> (MpNetModel, AdamState) {
        (self.model, self.adam)
    }

    /// Cost of the most recently completed minibatch.
    pub fn last_cost(&self) -> Option<f64> {
        self.last_cost
    }

    /// Estimates the channel behind `x` and learns from it. Returns the
    /// estimate produced before any weight update triggered by this sample.
    pub fn process(&mut self, x: &[Complex64], sigma2: f64) -> Result<Estimate> {
        let (est, x_unit, trace) = estimate_with_trace(&self.model, x, sigma2)?;
        let b = self.batch_size as f64;
        self.cost += norm_sqr(&trace.final_residual) / (2.0 * b);
        accumulate_gradient(&self.model, &trace, &x_unit, 1.0 / b, &mut self.grad)?;
        for s in trace.support() {
            if !self.is_touched[s] {
                self.is_touched[s] = true;
                self.touched.push(s);
            }
        }
        self.pending += 1;
        if self.pending == self.batch_size {
            self.apply_update()?;
        }
        Ok(est)
    }

    fn apply_update(&mut self) -> Result<()> {
        self.adam.step(self.model.weights_mut(), &self.grad)?;
        for &j in &self.touched {
            self.grad.column_mut(j).fill(Complex64::new(0.0, 0.0));
            self.is_touched[j] = false;
        }
        self.touched.clear();
        self.last_cost = Some(self.cost);
        self.cost = 0.0;
        self.pending = 0;
        if !self.model.weights().is_finite() {
            return Err(Error::InvalidArgument(
                "weights diverged to non-finite values".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinibatchReport {
    pub minibatch: usize,
    /// Training cost of the minibatch (what the optimizer minimized).
    pub cost: f64,
    /// Mean rMSE against ground truth, for monitoring only.
    pub rmse: f64,
    pub rmse_db: f64,
    pub mean_depth: f64,
}

/// Trains `model` on `stream` and reports once per completed minibatch.
/// A trailing partial minibatch is estimated but does not update weights.
pub fn train_online<I, F>(
    model: MpNetModel,
    stream: I,
    cfg: &TrainConfig,
    mut eval_hook: F,
) -> Result<(MpNetModel, Vec<MinibatchReport>)>
where
    I: IntoIterator<Item = Result<ChannelSample>>,
    F: FnMut(&MinibatchReport),
{
    let mut trainer = OnlineTrainer::new(model, cfg)?;
    let mut reports = Vec::new();
    let (mut err_acc, mut depth_acc, mut count) = (0.0, 0usize, 0usize);
    for sample in stream {
        let sample = sample?;
        let est = trainer.process(&sample.x, sample.sigma2)?;
        err_acc += rmse(&est.h_hat, &sample.h)?;
        depth_acc += est.depth;
        count += 1;
        if count == cfg.batch_size {
            let mean = err_acc / count as f64;
            let report = MinibatchReport {
                minibatch: reports.len(),
                cost: trainer.last_cost().unwrap_or(0.0),
                rmse: mean,
                rmse_db: to_db(mean),
                mean_depth: depth_acc as f64 / count as f64,
            };
            eval_hook(&report);
            reports.push(report);
            err_acc = 0.0;
            depth_acc = 0;
            count = 0;
        }
    }
    let (model, _) = trainer.into_parts();
    Ok((model, reports))
}
