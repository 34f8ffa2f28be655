//! SNR lost by estimating with a nominal dictionary instead of the one built
//! from the true array.

use super::config::{ArraySpec, SnrLossSpec};
use crate::array::{build_dictionary, doa_grid_for, perturb_array, steering_vector};
use crate::channel::{observe_vector, uniform_direction};
use crate::error::Result;
use crate::estimators::{matching_pursuit, StoppingRule};
use crate::linalg::{norm_sqr, sub};
use crate::metrics::to_db;
use crate::rng::{rng_for_indexed, Purpose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrLossCell {
    pub sigma_p: f64,
    pub sigma_g: f64,
    /// `10 log10(Σ‖ĥ_nominal − h‖² / Σ‖ĥ_ideal − h‖²)` over all trials.
    pub loss_db: f64,
}

/// Sweeps the `(sigma_p, sigma_g)` grid. Each trial observes a single-path
/// channel `h = e(u)` with `u` uniform, then recovers it with one step of
/// matching pursuit on both dictionaries.
///
/// Array realization `a` and its channels use the same random draws in every
/// cell, so neighbouring cells differ only through the uncertainty levels.
pub fn run_snr_loss(array: &ArraySpec, spec: &SnrLossSpec, seed: u64) -> Result<Vec<SnrLossCell>> {
    let nominal = array.nominal()?;
    let n = nominal.len();
    let atoms = spec.atoms.unwrap_or(32 * n);
    let grid = doa_grid_for(nominal.geometry(), atoms);
    let nominal_dict = build_dictionary(&nominal, &grid, true)?;
    let rule = StoppingRule::fixed(1);
    let mut cells = Vec::with_capacity(spec.sigma_p.len() * spec.sigma_g.len());
    for &sigma_p in &spec.sigma_p {
        for &sigma_g in &spec.sigma_g {
            let (mut err_nominal, mut err_ideal) = (0.0, 0.0);
            for a in 0..spec.arrays {
                let mut rng_a = rng_for_indexed(seed, Purpose::Array, a as u64);
                let truth = perturb_array(
                    &nominal,
                    sigma_g,
                    sigma_p,
                    array.perturbation_axes(),
                    &mut rng_a,
                )?;
                let ideal_dict = build_dictionary(&truth, &grid, true)?;
                let mut rng = rng_for_indexed(seed, Purpose::SnrLoss, a as u64);
                for _ in 0..spec.channels {
                    let u = uniform_direction(nominal.geometry(), &mut rng);
                    let h = steering_vector(&truth, &u);
                    let s = observe_vector(&h, spec.snr_db, &mut rng);
                    let e_nom = matching_pursuit(&nominal_dict, &s.x, &rule, s.sigma2)?;
                    let e_id = matching_pursuit(&ideal_dict, &s.x, &rule, s.sigma2)?;
                    err_nominal += norm_sqr(&sub(&e_nom.h_hat, &h));
                    err_ideal += norm_sqr(&sub(&e_id.h_hat, &h));
                }
            }
            let loss_db = to_db(err_nominal / err_ideal);
            log::info!("sigma_p={sigma_p} sigma_g={sigma_g}: loss {loss_db:.3} dB");
            cells.push(SnrLossCell {
                sigma_p,
                sigma_g,
                loss_db,
            });
        }
    }
    Ok(cells)
}
