//! Error measures and histograms.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::norm_sqr;

/// `‖h_hat − h‖² / ‖h‖²`.
pub fn rmse(h_hat: &[Complex64], h: &[Complex64]) -> Result<f64> {
    let h2 = norm_sqr(h);
    if h2 == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let e: f64 = h_hat.iter().zip(h).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(e / h2)
}

pub fn to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// Mean channel energy over mean squared error, in dB. Perfect estimates
/// give `+∞`.
pub fn snr_out<'a, I>(pairs: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a [Complex64], &'a [Complex64])>,
{
    let (mut sig, mut err, mut count) = (0.0, 0.0, 0usize);
    for (h_hat, h) in pairs {
        sig += norm_sqr(h);
        err += h_hat
            .iter()
            .zip(h)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>();
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidArgument(
            "snr_out needs at least one sample".into(),
        ));
    }
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(to_db(sig / err))
}

/// Exact count per depth value.
pub fn depth_histogram(depths: &[usize]) -> BTreeMap<usize, u64> {
    let mut h = BTreeMap::new();
    for &d in depths {
        *h.entry(d).or_insert(0) += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrBin {
    pub lo_db: f64,
    pub hi_db: f64,
    pub count: u64,
}

/// Counts per 1-dB bin `[k, k+1)`, covering the occupied range.
pub fn snr_histogram(samples_db: &[f64]) -> Result<Vec<SnrBin>> {
    if samples_db.is_empty() {
        return Err(Error::InvalidArgument("snr histogram needs samples".into()));
    }
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for &s in samples_db {
        if !s.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite SNR {s}")));
        }
        *counts.entry(s.floor() as i64).or_insert(0) += 1;
    }
    let lo = *counts.keys().next().expect("nonempty");
    let hi = *counts.keys().next_back().expect("nonempty");
    Ok((lo..=hi)
        .map(|k| SnrBin {
            lo_db: k as f64,
            hi_db: (k + 1) as f64,
            count: counts.get(&k).copied().unwrap_or(0),
        })
        .collect())
}
