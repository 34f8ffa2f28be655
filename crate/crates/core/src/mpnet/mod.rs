//! The unfolded matching-pursuit network.
//!
//! A layer computes `r ← r − W HT₁(Wᴴ r)`; layers repeat until the stopping
//! rule fires, so depth varies per input. The weights start from a steering
//! vector dictionary (or a random draw) and are refined online by minimizing
//! the reconstruction error of normalized observations, without clean
//! channels.
//!
//! Differentiation treats the selected indices as constants: within a region
//! where no selection flips the cost is smooth in `W`, and the gradient of a
//! depth-`K` pass touches only the `K` selected columns.

mod adam;
mod checkpoint;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{train_online, MinibatchReport, OnlineTrainer, TrainConfig};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array::Dictionary;
use crate::error::{Error, Result};
use crate::estimators::{normalized_noise, Estimate, Stopper, StoppingRule};
use crate::linalg::{argmax_modulus, dot_h, norm, norm_sqr, sub, sub_scaled, CVec, ComplexMatrix};
use crate::rng::complex_normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitTag {
    Nominal,
    Xavier,
}

impl InitTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            InitTag::Nominal => "nominal",
            InitTag::Xavier => "xavier",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpNetModel {
    weights: ComplexMatrix,
    init: InitTag,
    rule: StoppingRule,
}

impl MpNetModel {
    pub fn new(weights: ComplexMatrix, init: InitTag, rule: StoppingRule) -> Result<Self> {
        rule.validate()?;
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::Shape("weight matrix must be non-empty".into()));
        }
        if !weights.is_finite() {
            return Err(Error::InvalidArgument("weights must be finite".into()));
        }
        Ok(Self {
            weights,
            init,
            rule,
        })
    }

    /// Network initialized with a (normalized) nominal dictionary.
    pub fn from_dictionary(d: &Dictionary, rule: StoppingRule) -> Result<Self> {
        Self::new(d.atoms().clone(), InitTag::Nominal, rule)
    }

    pub fn xavier<R: Rng + ?Sized>(
        n: usize,
        a: usize,
        rule: StoppingRule,
        rng: &mut R,
    ) -> Result<Self> {
        Self::new(xavier_init(n, a, rng)?, InitTag::Xavier, rule)
    }

    pub fn weights(&self) -> &ComplexMatrix {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut ComplexMatrix {
        &mut self.weights
    }

    pub fn init(&self) -> InitTag {
        self.init
    }

    pub fn rule(&self) -> &StoppingRule {
        &self.rule
    }

    pub fn n_antennas(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_atoms(&self) -> usize {
        self.weights.cols()
    }
}

/// Keeps the entry of largest modulus (lowest index on ties), zeroes the rest.
pub fn ht1(v: &[Complex64]) -> CVec {
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    if let Some(i) = argmax_modulus(v) {
        out[i] = v[i];
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub index: usize,
    /// `w_sᴴ r` before the update.
    pub coeff: Complex64,
    pub residual_before: CVec,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub steps: Vec<TraceStep>,
    pub final_residual: CVec,
    /// Complex multiply-adds spent in the forward pass.
    pub macs: u64,
}

impl ForwardTrace {
    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    pub fn support(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.index).collect()
    }
}

const UNIT_TOL: f64 = 1e-9;

/// Runs the network on a unit-norm input. `sigma2_norm` is the noise
/// variance relative to the input energy.
pub fn forward(
    model: &MpNetModel,
    x_unit: &[Complex64],
    sigma2_norm: f64,
) -> Result<(CVec, ForwardTrace)> {
    let w = &model.weights;
    if x_unit.len() != w.rows() {
        return Err(Error::Shape(format!(
            "input has {} entries, weights have {} rows",
            x_unit.len(),
            w.rows()
        )));
    }
    let nrm = norm(x_unit);
    if (nrm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnitNorm(nrm));
    }
    let (n, a) = (w.rows(), w.cols());
    let stopper = Stopper::new(&model.rule, sigma2_norm, n)?;
    let mut r = x_unit.to_vec();
    let mut corr = vec![Complex64::new(0.0, 0.0); a];
    let mut steps: Vec<TraceStep> = Vec::new();
    let mut macs = 0u64;
    let mut r2 = norm_sqr(&r);
    while !stopper.stop(r2, steps.len()) {
        w.adjoint_mul_into(&r, &mut corr);
        macs += (n * a) as u64;
        let s = argmax_modulus(&corr).expect("weights have columns");
        let c = corr[s];
        if c.norm_sqr() == 0.0 {
            break;
        }
        let before = r.clone();
        sub_scaled(&mut r, c, w.column(s));
        macs += n as u64;
        steps.push(TraceStep {
            index: s,
            coeff: c,
            residual_before: before,
        });
        r2 = norm_sqr(&r);
    }
    let out = sub(x_unit, &r);
    Ok((
        out,
        ForwardTrace {
            steps,
            final_residual: r,
            macs,
        },
    ))
}

fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Checks that `trace` was produced from `x_unit` with the current weights.
fn check_trace(w: &ComplexMatrix, trace: &ForwardTrace, x_unit: &[Complex64]) -> Result<()> {
    let mut worst = 0.0f64;
    let mut expected: &[Complex64] = x_unit;
    let mut replay = CVec::new();
    for step in &trace.steps {
        worst = worst.max(max_abs_diff(&step.residual_before, expected));
        let col = w.column(step.index);
        let c = dot_h(col, &step.residual_before);
        worst = worst.max((c - step.coeff).norm());
        replay.clear();
        replay.extend_from_slice(&step.residual_before);
        sub_scaled(&mut replay, c, col);
        expected = &replay;
        if worst > UNIT_TOL {
            return Err(Error::StaleTrace(worst));
        }
    }
    worst = worst.max(max_abs_diff(&trace.final_residual, expected));
    if worst > UNIT_TOL {
        return Err(Error::StaleTrace(worst));
    }
    Ok(())
}

/// Adds `scale · ∂(½‖r_K‖²)/∂W` into `grad` and returns the multiply-adds
/// spent. Entries are `∂/∂Re + j ∂/∂Im` of each weight.
pub fn accumulate_gradient(
    model: &MpNetModel,
    trace: &ForwardTrace,
    x_unit: &[Complex64],
    scale: f64,
    grad: &mut ComplexMatrix,
) -> Result<u64> {
    let w = &model.weights;
    if grad.rows() != w.rows() || grad.cols() != w.cols() {
        return Err(Error::Shape("gradient and weights differ in shape".into()));
    }
    check_trace(w, trace, x_unit)?;
    let n = w.rows();
    let mut macs = 0u64;
    // adjoint of the residual, starting from ∂/∂r̄ of ½‖r_K‖²
    let mut g = trace.final_residual.clone();
    for step in trace.steps.iter().rev() {
        let col = w.column(step.index);
        let t = dot_h(col, &g);
        let a_conj = step.coeff.conj();
        let t_conj = t.conj();
        let gcol = grad.column_mut(step.index);
        for ((gi, ri), gv) in gcol.iter_mut().zip(&step.residual_before).zip(&g) {
            *gi -= (a_conj * gv + t_conj * ri) * scale;
        }
        sub_scaled(&mut g, t, col);
        macs += 4 * n as u64;
    }
    Ok(macs)
}

/// Dense gradient of the per-sample cost `½‖r_K‖²`.
pub fn backward(
    model: &MpNetModel,
    trace: &ForwardTrace,
    x_unit: &[Complex64],
) -> Result<ComplexMatrix> {
    let mut grad = ComplexMatrix::zeros(model.n_antennas(), model.n_atoms());
    accumulate_gradient(model, trace, x_unit, 1.0, &mut grad)?;
    Ok(grad)
}

/// Raw Xavier draw: i.i.d. `CN(0, 2/(N+A))` entries.
pub fn xavier_raw<R: Rng + ?Sized>(n: usize, a: usize, rng: &mut R) -> Result<ComplexMatrix> {
    if n == 0 || a == 0 {
        return Err(Error::InvalidArgument("xavier init needs N, A >= 1".into()));
    }
    let var = 2.0 / (n + a) as f64;
    let data = (0..n * a).map(|_| complex_normal(rng, var)).collect();
    ComplexMatrix::from_col_major(n, a, data)
}

/// Xavier draw with unit-norm columns.
pub fn xavier_init<R: Rng + ?Sized>(n: usize, a: usize, rng: &mut R) -> Result<ComplexMatrix> {
    let mut w = xavier_raw(n, a, rng)?;
    for j in 0..a {
        let col = w.column_mut(j);
        let nrm = norm(col);
        if nrm == 0.0 {
            return Err(Error::ZeroAtom(j));
        }
        col.iter_mut().for_each(|z| *z /= nrm);
    }
    Ok(w)
}

/// Inference on an unnormalized observation: normalize, run, rescale.
pub fn estimate(model: &MpNetModel, x: &[Complex64], sigma2: f64) -> Result<Estimate> {
    estimate_with_trace(model, x, sigma2).map(|(e, _, _)| e)
}

/// As [`estimate`], also returning the unit-scale input and trace.
pub(crate) fn estimate_with_trace(
    model: &MpNetModel,
    x: &[Complex64],
    sigma2: f64,
) -> Result<(Estimate, CVec, ForwardTrace)> {
    let x2 = norm_sqr(x);
    if x2 == 0.0 {
        return Err(Error::ZeroInput);
    }
    let sigma2_norm = normalized_noise(&model.rule, x, sigma2)?;
    let xn = x2.sqrt();
    let x_unit: CVec = x.iter().map(|z| z / xn).collect();
    let (out, trace) = forward(model, &x_unit, sigma2_norm)?;
    let est = Estimate {
        h_hat: out.iter().map(|z| z * xn).collect(),
        support: trace.support(),
        depth: trace.depth(),
        residual_norm2: x2 * norm_sqr(&trace.final_residual),
    };
    Ok((est, x_unit, trace))
}
