//! Classical channel estimators and the shared stopping rules.
//!
//! All greedy estimators run on column-normalized dictionaries and evaluate
//! residual-energy criteria on the unit-normalized input scale, i.e. against
//! `‖r‖² / ‖x‖²` with `σ̃² = σ² / ‖x‖²`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{argmax_modulus, dot_h, norm, norm_sqr, sub, sub_scaled, CVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StopCriterion {
    FixedDepth {
        depth: usize,
    },
    /// `‖r‖² ≤ σ̃² (N + 2 sqrt(N ln N))`
    Sc1,
    /// `‖r‖² ≤ σ̃² N`
    Sc2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub criterion: StopCriterion,
    pub max_depth: usize,
}

impl StoppingRule {
    pub fn fixed(depth: usize) -> Self {
        Self {
            criterion: StopCriterion::FixedDepth { depth },
            max_depth: depth,
        }
    }

    pub fn sc1(max_depth: usize) -> Self {
        Self {
            criterion: StopCriterion::Sc1,
            max_depth,
        }
    }

    pub fn sc2(max_depth: usize) -> Self {
        Self {
            criterion: StopCriterion::Sc2,
            max_depth,
        }
    }

    /// Safety cap used when none is configured: `N / 4`, at least 1.
    pub fn default_max_depth(n: usize) -> usize {
        (n / 4).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::InvalidArgument(
                "max_depth must be at least 1".into(),
            ));
        }
        if let StopCriterion::FixedDepth { depth: 0 } = self.criterion {
            return Err(Error::InvalidArgument(
                "fixed depth must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn uses_noise_level(&self) -> bool {
        !matches!(self.criterion, StopCriterion::FixedDepth { .. })
    }

    /// Short label such as `sc2` or `fixed8`.
    pub fn label(&self) -> String {
        match self.criterion {
            StopCriterion::FixedDepth { depth } => format!("fixed{depth}"),
            StopCriterion::Sc1 => "sc1".into(),
            StopCriterion::Sc2 => "sc2".into(),
        }
    }
}

/// Residual-energy threshold on the unit-normalized scale.
pub fn sc_threshold(rule: &StoppingRule, sigma2_norm: f64, n: usize) -> Result<f64> {
    if !(sigma2_norm >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "normalized noise variance must be non-negative, got {sigma2_norm}"
        )));
    }
    match rule.criterion {
        StopCriterion::FixedDepth { .. } => Ok(0.0),
        StopCriterion::Sc2 => Ok(sigma2_norm * n as f64),
        StopCriterion::Sc1 => {
            if n < 2 {
                return Err(Error::InvalidArgument("SC1 needs N >= 2".into()));
            }
            let nf = n as f64;
            Ok(sigma2_norm * (nf + 2.0 * (nf * nf.ln()).sqrt()))
        }
    }
}

/// Whether to stop before iteration `depth + 1`. An SC1 rule with `N < 2`
/// falls back to the depth cap only.
pub fn should_stop(
    rule: &StoppingRule,
    residual_norm2: f64,
    depth: usize,
    sigma2_norm: f64,
    n: usize,
) -> bool {
    let threshold = sc_threshold(rule, sigma2_norm, n).unwrap_or(0.0);
    Stopper {
        rule: *rule,
        threshold,
    }
    .stop(residual_norm2, depth)
}

/// A rule with its threshold already evaluated for one input.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stopper {
    rule: StoppingRule,
    threshold: f64,
}

impl Stopper {
    pub(crate) fn new(rule: &StoppingRule, sigma2_norm: f64, n: usize) -> Result<Self> {
        rule.validate()?;
        Ok(Self {
            rule: *rule,
            threshold: sc_threshold(rule, sigma2_norm, n)?,
        })
    }

    #[inline]
    pub(crate) fn stop(&self, residual_norm2: f64, depth: usize) -> bool {
        if depth >= self.rule.max_depth || residual_norm2 == 0.0 {
            return true;
        }
        match self.rule.criterion {
            StopCriterion::FixedDepth { depth: k } => depth >= k,
            StopCriterion::Sc1 | StopCriterion::Sc2 => residual_norm2 <= self.threshold,
        }
    }
}

/// `σ² / ‖x‖²`, or an error for a zero input when the rule needs it.
pub(crate) fn normalized_noise(rule: &StoppingRule, x: &[Complex64], sigma2: f64) -> Result<f64> {
    let x2 = norm_sqr(x);
    if x2 == 0.0 {
        return if rule.uses_noise_level() {
            Err(Error::ZeroInput)
        } else {
            Ok(0.0)
        };
    }
    Ok(sigma2 / x2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub h_hat: CVec,
    /// Selected atoms in visiting order (MP may repeat an atom).
    pub support: Vec<usize>,
    pub depth: usize,
    /// `‖x − h_hat‖²`
    pub residual_norm2: f64,
}

/// The observation itself.
pub fn ls_estimate(x: &[Complex64]) -> Estimate {
    Estimate {
        h_hat: x.to_vec(),
        support: Vec::new(),
        depth: 0,
        residual_norm2: 0.0,
    }
}

fn check_dictionary(d: &Dictionary, x: &[Complex64]) -> Result<()> {
    if !d.is_normalized() {
        return Err(Error::InvalidArgument(
            "greedy estimators need a normalized dictionary".into(),
        ));
    }
    if x.len() != d.n_antennas() {
        return Err(Error::Shape(format!(
            "observation has {} entries, dictionary atoms have {}",
            x.len(),
            d.n_antennas()
        )));
    }
    Ok(())
}

/// Matching pursuit: repeatedly subtract the projection on the atom most
/// correlated with the residual.
pub fn matching_pursuit(
    d: &Dictionary,
    x: &[Complex64],
    rule: &StoppingRule,
    sigma2: f64,
) -> Result<Estimate> {
    check_dictionary(d, x)?;
    let n = x.len();
    let x2 = norm_sqr(x);
    let stopper = Stopper::new(rule, normalized_noise(rule, x, sigma2)?, n)?;
    let atoms = d.atoms();
    let mut r = x.to_vec();
    let mut corr = vec![Complex64::new(0.0, 0.0); atoms.cols()];
    let mut support = Vec::new();
    let mut r2 = x2;
    while !stopper.stop(if x2 > 0.0 { r2 / x2 } else { 0.0 }, support.len()) {
        atoms.adjoint_mul_into(&r, &mut corr);
        let s = argmax_modulus(&corr).expect("dictionary has atoms");
        let c = corr[s];
        if c.norm_sqr() == 0.0 {
            break;
        }
        sub_scaled(&mut r, c, atoms.column(s));
        support.push(s);
        r2 = norm_sqr(&r);
    }
    Ok(Estimate {
        h_hat: sub(x, &r),
        depth: support.len(),
        support,
        residual_norm2: r2,
    })
}

/// Orthogonal matching pursuit with an incrementally re-orthogonalized
/// basis of the selected atoms.
pub fn omp(d: &Dictionary, x: &[Complex64], rule: &StoppingRule, sigma2: f64) -> Result<Estimate> {
    check_dictionary(d, x)?;
    let n = x.len();
    let x2 = norm_sqr(x);
    let stopper = Stopper::new(rule, normalized_noise(rule, x, sigma2)?, n)?;
    let atoms = d.atoms();
    let mut r = x.to_vec();
    let mut corr = vec![Complex64::new(0.0, 0.0); atoms.cols()];
    let mut selected = vec![false; atoms.cols()];
    let mut basis: Vec<CVec> = Vec::new();
    let mut support = Vec::new();
    let mut r2 = x2;
    while !stopper.stop(if x2 > 0.0 { r2 / x2 } else { 0.0 }, support.len()) {
        if support.len() == atoms.cols() || support.len() == n {
            break;
        }
        atoms.adjoint_mul_into(&r, &mut corr);
        for (c, sel) in corr.iter_mut().zip(&selected) {
            if *sel {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        let s = argmax_modulus(&corr).expect("dictionary has atoms");
        if corr[s].norm_sqr() == 0.0 {
            break;
        }
        let e = atoms.column(s);
        let mut q = e.to_vec();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let p = dot_h(b, &q);
                sub_scaled(&mut q, p, b);
            }
        }
        let qn = norm(&q);
        if qn <= 1e-10 * norm(e) {
            return Err(Error::RankDeficient(s));
        }
        q.iter_mut().for_each(|z| *z /= qn);
        let p = dot_h(&q, &r);
        sub_scaled(&mut r, p, &q);
        basis.push(q);
        selected[s] = true;
        support.push(s);
        r2 = norm_sqr(&r);
    }
    Ok(Estimate {
        h_hat: sub(x, &r),
        depth: support.len(),
        support,
        residual_norm2: r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{build_dictionary, doa_grid_ula, make_ula};
    use crate::linalg::ComplexMatrix;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ula_dict(n: usize, a: usize) -> Dictionary {
        build_dictionary(&make_ula(n, 0.5).unwrap(), &doa_grid_ula(a), true).unwrap()
    }

    #[test]
    fn thresholds() {
        let sc2 = StoppingRule::sc2(16);
        assert_abs_diff_eq!(sc_threshold(&sc2, 0.01, 64).unwrap(), 0.64, epsilon = 1e-15);
        let sc1 = StoppingRule::sc1(16);
        let expected = 0.01 * (64.0 + 2.0 * (64.0 * 64f64.ln()).sqrt());
        assert_abs_diff_eq!(
            sc_threshold(&sc1, 0.01, 64).unwrap(),
            expected,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(expected, 0.966_293_4, epsilon = 1e-7);
        assert_eq!(sc_threshold(&sc1, 0.0, 64).unwrap(), 0.0);
        assert_eq!(sc_threshold(&sc2, 0.0, 64).unwrap(), 0.0);
        assert_eq!(sc_threshold(&StoppingRule::fixed(3), 0.5, 64).unwrap(), 0.0);
        assert!(sc_threshold(&sc1, 0.01, 1).is_err());
        assert!(sc_threshold(&sc2, -0.01, 8).is_err());
    }

    #[test]
    fn stop_decisions() {
        let fixed = StoppingRule::fixed(6);
        assert!(should_stop(&fixed, 0.9, 6, 0.0, 64));
        assert!(!should_stop(&fixed, 0.9, 5, 0.0, 64));
        let sc2 = StoppingRule::sc2(16);
        assert!(should_stop(&sc2, 0.5, 2, 0.01, 64));
        assert!(!should_stop(&sc2, 0.7, 2, 0.01, 64));
        assert!(should_stop(&sc2, 0.99, 16, 0.01, 64));
        assert!(should_stop(&sc2, 0.0, 0, 0.01, 64));
    }

    #[test]
    fn ls_is_identity() {
        let x = vec![c(1.0, -2.0), c(0.5, 0.0)];
        let e = ls_estimate(&x);
        assert_eq!(e.h_hat, x);
        assert_eq!(e.residual_norm2, 0.0);
        assert_eq!(e.depth, 0);
        assert_eq!(ls_estimate(&[c(0.0, 0.0)]).h_hat, vec![c(0.0, 0.0)]);
    }

    #[test]
    fn mp_recovers_single_atom() {
        let d = ula_dict(16, 64);
        let x = d.atom(17).to_vec();
        for rule in [
            StoppingRule::sc1(4),
            StoppingRule::sc2(4),
            StoppingRule::fixed(1),
        ] {
            let e = matching_pursuit(&d, &x, &rule, 0.0).unwrap();
            assert_eq!(e.support, vec![17]);
            assert_eq!(e.depth, 1);
            for (a, b) in e.h_hat.iter().zip(&x) {
                assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
            }
        }
        let o = omp(&d, &x, &StoppingRule::sc2(4), 0.0).unwrap();
        assert_eq!(o.support, vec![17]);
    }

    #[test]
    fn mp_orthogonal_input_returns_zero() {
        // atoms live on the first two coordinates only
        let cols = vec![
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        ];
        let d = Dictionary::from_matrix(ComplexMatrix::from_columns(3, &cols).unwrap(), true);
        let x = vec![c(0.0, 0.0), c(0.0, 0.0), c(2.0, 1.0)];
        let e = matching_pursuit(&d, &x, &StoppingRule::fixed(3), 0.0).unwrap();
        assert!(e.h_hat.iter().all(|z| z.norm() == 0.0));
        assert_abs_diff_eq!(e.residual_norm2, 5.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_input_with_noise_rules() {
        let d = ula_dict(8, 16);
        let x = vec![c(0.0, 0.0); 8];
        assert!(matches!(
            matching_pursuit(&d, &x, &StoppingRule::sc2(4), 0.1),
            Err(Error::ZeroInput)
        ));
        assert!(matches!(
            omp(&d, &x, &StoppingRule::sc1(4), 0.1),
            Err(Error::ZeroInput)
        ));
        let e = matching_pursuit(&d, &x, &StoppingRule::fixed(2), 0.1).unwrap();
        assert_eq!(e.depth, 0);
    }

    #[test]
    fn omp_rejects_rank_deficient_support() {
        // two copies of the same atom, followed by an orthogonal one
        let a = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let cols = vec![a.clone(), vec![c(0.0, 0.0), c(1.0, 0.0)]];
        let d = Dictionary::from_matrix(ComplexMatrix::from_columns(2, &cols).unwrap(), true);
        let x = vec![c(1.0, 0.0), c(1.0, 0.0)];
        let e = omp(&d, &x, &StoppingRule::fixed(2), 0.0).unwrap();
        assert_eq!(e.depth, 2);
        assert!(e.residual_norm2 < 1e-20);

        // duplicated atoms: after selecting one copy the other is in the span
        let cols = vec![a.clone(), a];
        let d = Dictionary::from_matrix(ComplexMatrix::from_columns(2, &cols).unwrap(), true);
        let x = vec![c(1.0, 0.0), c(1e-3, 0.0)];
        // the residual after one step is orthogonal to both copies
        let e = omp(&d, &x, &StoppingRule::fixed(2), 0.0).unwrap();
        assert_eq!(e.depth, 1);

        // force the degenerate pick: a third atom nearly parallel to the first
        let cols = vec![
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(1.0, 0.0), c(1e-12, 0.0), c(0.0, 0.0)],
        ];
        let d = Dictionary::from_matrix(ComplexMatrix::from_columns(3, &cols).unwrap(), true);
        let x = vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        assert!(matches!(
            omp(&d, &x, &StoppingRule::fixed(2), 0.0),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn rejects_unnormalized_dictionary() {
        let d = build_dictionary(&make_ula(4, 0.5).unwrap(), &doa_grid_ula(8), false).unwrap();
        let x = vec![c(1.0, 0.0); 4];
        assert!(matching_pursuit(&d, &x, &StoppingRule::fixed(1), 0.0).is_err());
    }
}
