//! Sparse multipath channels, noisy observations and array anomalies.
//!
//! Channels follow `h = Σ β_p e(u_p)` with unnormalized steering vectors of
//! the true array. The generator is a compact stand-in for a full
//! statistical channel model: a random number of paths, complex Gaussian path
//! gains with geometrically decaying power and random directions.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array::{grid_direction, steering_vector, AntennaArray, Direction, Geometry};
use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, CVec};
use crate::rng::{complex_normal, normal, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum DoaModel {
    /// Uniform over the array's half-plane (linear arrays) or half-space.
    Uniform,
    /// Uniformly chosen point of the `atoms`-direction grid.
    OnGrid { atoms: usize },
    /// Paths scattered around `clusters` uniformly drawn centres with a
    /// Gaussian angular spread.
    Clustered { clusters: usize, spread_deg: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelGenConfig {
    pub paths_min: usize,
    pub paths_max: usize,
    /// Power ratio between consecutive paths.
    pub decay: f64,
    pub doa: DoaModel,
}

impl Default for ChannelGenConfig {
    fn default() -> Self {
        Self {
            paths_min: 1,
            paths_max: 10,
            decay: 0.7,
            doa: DoaModel::Uniform,
        }
    }
}

impl ChannelGenConfig {
    pub fn single_path(doa: DoaModel) -> Self {
        Self {
            paths_min: 1,
            paths_max: 1,
            decay: 1.0,
            doa,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths_min == 0 {
            return Err(Error::Config("channel.paths_min must be at least 1".into()));
        }
        if self.paths_max < self.paths_min {
            return Err(Error::Config(format!(
                "channel.paths_max ({}) is below channel.paths_min ({})",
                self.paths_max, self.paths_min
            )));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Config(format!(
                "channel.decay must lie in (0, 1], got {}",
                self.decay
            )));
        }
        match self.doa {
            DoaModel::OnGrid { atoms: 0 } => {
                Err(Error::Config("channel.doa.atoms must be positive".into()))
            }
            DoaModel::Clustered {
                clusters,
                spread_deg,
            } if clusters == 0 || !(spread_deg >= 0.0) => Err(Error::Config(
                "channel.doa needs clusters >= 1 and spread_deg >= 0".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Expected path powers `E|β_p|²`, before any normalization.
    pub fn path_powers(&self, paths: usize) -> Vec<f64> {
        (0..paths).map(|p| self.decay.powi(p as i32)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum SnrModel {
    Fixed {
        db: f64,
    },
    /// Gaussian in dB, redrawn until the value reaches `cutoff`.
    TruncatedGaussian {
        mean: f64,
        std: f64,
        cutoff: f64,
    },
}

impl SnrModel {
    /// Defaults used for the varying-SNR scenario.
    pub fn default_varying() -> Self {
        SnrModel::TruncatedGaussian {
            mean: 10.0,
            std: 4.0,
            cutoff: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SnrModel::Fixed { db } if db.is_nan() => Err(Error::Config("snr.db is NaN".into())),
            SnrModel::Fixed { .. } => Ok(()),
            SnrModel::TruncatedGaussian { mean, std, cutoff } => {
                if !mean.is_finite() || !cutoff.is_finite() || !(std >= 0.0) || !std.is_finite() {
                    return Err(Error::Config(
                        "snr needs finite mean/cutoff and a non-negative std".into(),
                    ));
                }
                let p = acceptance_probability(mean, std, cutoff);
                if p < 1e-6 {
                    return Err(Error::Config(format!(
                        "snr.cutoff {cutoff} dB leaves acceptance probability {p:e}"
                    )));
                }
                Ok(())
            }
        }
    }
}

fn acceptance_probability(mean: f64, std: f64, cutoff: f64) -> f64 {
    if std == 0.0 {
        return if mean >= cutoff { 1.0 } else { 0.0 };
    }
    let alpha = (cutoff - mean) / std;
    0.5 * statrs::function::erf::erfc(alpha / 2f64.sqrt())
}

/// Draws one SNR value in dB.
pub fn sample_snr(model: &SnrModel, rng: &mut SimRng) -> Result<f64> {
    model.validate()?;
    match *model {
        SnrModel::Fixed { db } => Ok(db),
        SnrModel::TruncatedGaussian { mean, std, cutoff } => loop {
            let v = mean + std * normal(rng);
            if v >= cutoff {
                return Ok(v);
            }
        },
    }
}

#[derive(Debug, Clone)]
pub struct MultipathChannel {
    paths: Vec<(Complex64, Direction)>,
    h: CVec,
}

impl MultipathChannel {
    /// Synthesizes `h` from explicit paths on `array`.
    pub fn from_paths(array: &AntennaArray, paths: Vec<(Complex64, Direction)>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidArgument(
                "channel needs at least one path".into(),
            ));
        }
        let mut h = vec![Complex64::new(0.0, 0.0); array.len()];
        for (beta, u) in &paths {
            for (hi, ei) in h.iter_mut().zip(steering_vector(array, u)) {
                *hi += beta * ei;
            }
        }
        if norm_sqr(&h) == 0.0 {
            return Err(Error::ZeroChannel);
        }
        Ok(Self { paths, h })
    }

    pub fn paths(&self) -> &[(Complex64, Direction)] {
        &self.paths
    }

    pub fn h(&self) -> &[Complex64] {
        &self.h
    }
}

pub(crate) fn uniform_direction(geometry: Geometry, rng: &mut SimRng) -> Direction {
    match geometry {
        Geometry::Ula => Direction::from_azimuth(rng.gen_range(-PI / 2.0..PI / 2.0)),
        Geometry::Upa | Geometry::Custom => {
            // uniform y on (0, 1] is uniform area on the half sphere
            let y: f64 = 1.0 - rng.gen::<f64>();
            let r = (1.0 - y * y).max(0.0).sqrt();
            let theta = rng.gen_range(0.0..2.0 * PI);
            Direction::new([r * theta.cos(), y, r * theta.sin()]).expect("unit vector")
        }
    }
}

fn jitter_direction(
    center: Direction,
    geometry: Geometry,
    spread: f64,
    rng: &mut SimRng,
) -> Direction {
    let c = center.as_array();
    match geometry {
        Geometry::Ula => {
            let phi = c[0].atan2(c[1]) + spread * normal(rng);
            // fold back into the front half-plane
            let phi = phi.clamp(-PI / 2.0, PI / 2.0 - 1e-12);
            Direction::from_azimuth(phi)
        }
        Geometry::Upa | Geometry::Custom => {
            let v = [
                c[0] + spread * normal(rng),
                c[1] + spread * normal(rng),
                c[2] + spread * normal(rng),
            ];
            let v = [v[0], v[1].abs().max(1e-12), v[2]];
            Direction::new(v).unwrap_or(center)
        }
    }
}

/// Draws one sparse multipath channel on `true_array`.
pub fn generate_channel(
    cfg: &ChannelGenConfig,
    true_array: &AntennaArray,
    rng: &mut SimRng,
) -> Result<MultipathChannel> {
    cfg.validate()?;
    let geometry = true_array.geometry();
    let p = rng.gen_range(cfg.paths_min..=cfg.paths_max);
    let centers: Vec<Direction> = match cfg.doa {
        DoaModel::Clustered { clusters, .. } => (0..clusters)
            .map(|_| uniform_direction(geometry, rng))
            .collect(),
        _ => Vec::new(),
    };
    let mut paths = Vec::with_capacity(p);
    for power in cfg.path_powers(p) {
        let beta = complex_normal(rng, power);
        let u = match cfg.doa {
            DoaModel::Uniform => uniform_direction(geometry, rng),
            DoaModel::OnGrid { atoms } => grid_direction(geometry, atoms, rng.gen_range(0..atoms)),
            DoaModel::Clustered { spread_deg, .. } => {
                let c = centers[rng.gen_range(0..centers.len())];
                jitter_direction(c, geometry, spread_deg.to_radians(), rng)
            }
        };
        paths.push((beta, u));
    }
    MultipathChannel::from_paths(true_array, paths)
}

/// One noisy observation of a ground-truth channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub index: usize,
    pub h: CVec,
    pub x: CVec,
    /// Noise variance per complex entry.
    pub sigma2: f64,
    pub snr_db: f64,
}

impl ChannelSample {
    /// `‖h‖² / (N σ²)` in dB, recomputed from the stored vectors.
    pub fn snr_in_db(&self) -> f64 {
        10.0 * (norm_sqr(&self.h) / (self.h.len() as f64 * self.sigma2)).log10()
    }

    pub fn n_antennas(&self) -> usize {
        self.h.len()
    }
}

/// `x = h + n` with `n ~ CN(0, σ² I)` and `σ² = ‖h‖² / (N 10^(snr/10))`.
/// An infinite SNR gives `σ² = 0` and `x = h`.
pub fn observe(channel: &MultipathChannel, snr_db: f64, rng: &mut SimRng) -> ChannelSample {
    observe_vector(channel.h(), snr_db, rng)
}

pub fn observe_vector(h: &[Complex64], snr_db: f64, rng: &mut SimRng) -> ChannelSample {
    let n = h.len() as f64;
    let sigma2 = norm_sqr(h) / (n * 10f64.powf(snr_db / 10.0));
    let x = h
        .iter()
        .map(|hi| hi + complex_normal(rng, sigma2))
        .collect();
    ChannelSample {
        index: 0,
        h: h.to_vec(),
        x,
        sigma2,
        snr_db,
    }
}

/// Number of antennas a break of `fraction` disables: nearest integer,
/// halves rounded down.
pub fn broken_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) - 0.5).ceil().max(0.0) as usize
}

/// Zeroes the gains of `round(fraction · N)` antennas picked uniformly.
pub fn break_antennas(
    array: &AntennaArray,
    fraction: f64,
    rng: &mut SimRng,
) -> Result<AntennaArray> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "broken fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let n = array.len();
    let k = broken_count(fraction, n).min(n);
    let mut gains = array.gains().to_vec();
    for i in sample_indices(rng, n, k) {
        gains[i] = Complex64::new(0.0, 0.0);
    }
    Ok(array.with_gains(gains))
}

/// One aging step: `g ← g + CN(0, sigma_a²)` on every antenna.
pub fn age_antennas(array: &AntennaArray, sigma_a: f64, rng: &mut SimRng) -> Result<AntennaArray> {
    if !(sigma_a >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "aging std must be non-negative, got {sigma_a}"
        )));
    }
    let gains = array
        .gains()
        .iter()
        .map(|g| g + complex_normal(rng, sigma_a * sigma_a))
        .collect();
    Ok(array.with_gains(gains))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnomalyKind {
    Break { fraction: f64 },
    Age { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalyEvent {
    /// First sample index observed through the modified array.
    pub at: usize,
    pub kind: AnomalyKind,
}

/// The sequence of true arrays over a stream: epoch 0 is the initial array,
/// epoch `k` the array after the `k`-th event.
#[derive(Debug, Clone)]
pub struct AnomalySchedule {
    events: Vec<AnomalyEvent>,
    arrays: Vec<AntennaArray>,
}

impl AnomalySchedule {
    pub fn none(initial: AntennaArray) -> Self {
        Self {
            events: Vec::new(),
            arrays: vec![initial],
        }
    }

    /// Applies `events` in index order. Uses only `rng`, so the arrays do not
    /// depend on how many channels are drawn.
    pub fn realize(
        initial: AntennaArray,
        mut events: Vec<AnomalyEvent>,
        rng: &mut SimRng,
    ) -> Result<Self> {
        events.sort_by_key(|e| e.at);
        let mut arrays = vec![initial];
        for e in &events {
            let prev = arrays.last().expect("initial array");
            let next = match e.kind {
                AnomalyKind::Break { fraction } => break_antennas(prev, fraction, rng)?,
                AnomalyKind::Age { sigma } => age_antennas(prev, sigma, rng)?,
            };
            arrays.push(next);
        }
        Ok(Self { events, arrays })
    }

    pub fn events(&self) -> &[AnomalyEvent] {
        &self.events
    }

    pub fn arrays(&self) -> &[AntennaArray] {
        &self.arrays
    }

    pub fn epoch_at(&self, index: usize) -> usize {
        self.events.iter().take_while(|e| e.at <= index).count()
    }

    pub fn array_at(&self, index: usize) -> &AntennaArray {
        &self.arrays[self.epoch_at(index)]
    }

    pub fn initial(&self) -> &AntennaArray {
        &self.arrays[0]
    }
}

/// Deterministic stream of observations. Yields samples `0..len`; the true
/// array switches at the schedule's event indices.
#[derive(Debug, Clone)]
pub struct ObservationStream {
    channel: ChannelGenConfig,
    snr: SnrModel,
    schedule: AnomalySchedule,
    rng: SimRng,
    next: usize,
    len: usize,
}

pub fn make_stream(
    channel: ChannelGenConfig,
    snr: SnrModel,
    schedule: AnomalySchedule,
    rng: SimRng,
    len: usize,
) -> Result<ObservationStream> {
    channel.validate()?;
    snr.validate()?;
    Ok(ObservationStream {
        channel,
        snr,
        schedule,
        rng,
        next: 0,
        len,
    })
}

impl ObservationStream {
    pub fn schedule(&self) -> &AnomalySchedule {
        &self.schedule
    }

    fn draw(&mut self, index: usize) -> Result<ChannelSample> {
        let array = self.schedule.array_at(index);
        let ch = generate_channel(&self.channel, array, &mut self.rng)?;
        let snr_db = sample_snr(&self.snr, &mut self.rng)?;
        let mut s = observe(&ch, snr_db, &mut self.rng);
        s.index = index;
        Ok(s)
    }
}

impl Iterator for ObservationStream {
    type Item = Result<ChannelSample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.len {
            return None;
        }
        let i = self.next;
        self.next += 1;
        Some(self.draw(i))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rem = self.len - self.next;
        (rem, Some(rem))
    }
}
