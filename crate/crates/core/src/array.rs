//! Antenna arrays, steering vectors and steering-vector dictionaries.
//!
//! Positions are stored in units of the carrier wavelength, so the phase of
//! antenna `i` for direction `u` is simply `2π pᵢ·u`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm, CVec, ComplexMatrix};
use crate::rng::{complex_normal, normal};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Ula,
    Upa,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Base-station array: antenna positions (in wavelengths) and complex gains.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaArray {
    positions: Vec<Vec3>,
    gains: Vec<Complex64>,
    geometry: Geometry,
}

impl AntennaArray {
    pub fn new(positions: Vec<Vec3>, gains: Vec<Complex64>, geometry: Geometry) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument(
                "array needs at least one antenna".into(),
            ));
        }
        if positions.len() != gains.len() {
            return Err(Error::Shape(format!(
                "{} positions but {} gains",
                positions.len(),
                gains.len()
            )));
        }
        Ok(Self {
            positions,
            gains,
            geometry,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub(crate) fn with_gains(&self, gains: Vec<Complex64>) -> Self {
        debug_assert_eq!(gains.len(), self.gains.len());
        Self {
            positions: self.positions.clone(),
            gains,
            geometry: self.geometry,
        }
    }
}

/// Direction of arrival, a unit 3-vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction([f64; 3]);

impl Direction {
    /// Normalizes `v`; rejects the zero vector.
    pub fn new(v: Vec3) -> Result<Self> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "direction {v:?} has no length"
            )));
        }
        Ok(Self([v[0] / n, v[1] / n, v[2] / n]))
    }

    /// Direction in the xy half-plane at azimuth `phi` from broadside (+y).
    pub fn from_azimuth(phi: f64) -> Self {
        Self([phi.sin(), phi.cos(), 0.0])
    }

    pub fn as_array(&self) -> Vec3 {
        self.0
    }

    pub fn dot(&self, p: &Vec3) -> f64 {
        self.0[0] * p[0] + self.0[1] * p[1] + self.0[2] * p[2]
    }
}

/// Steering-vector atoms over a direction grid, one column per direction.
#[derive(Debug, Clone)]
pub struct Dictionary {
    atoms: ComplexMatrix,
    directions: Vec<Direction>,
    normalized: bool,
}

impl Dictionary {
    pub fn atoms(&self) -> &ComplexMatrix {
        &self.atoms
    }

    pub fn into_atoms(self) -> ComplexMatrix {
        self.atoms
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn n_antennas(&self) -> usize {
        self.atoms.rows()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.cols()
    }

    pub fn atom(&self, j: usize) -> &[Complex64] {
        self.atoms.column(j)
    }

    /// Wraps an arbitrary matrix, e.g. a learned weight matrix. Directions are
    /// unknown for such matrices and left empty.
    pub fn from_matrix(atoms: ComplexMatrix, normalized: bool) -> Self {
        Self {
            atoms,
            directions: Vec::new(),
            normalized,
        }
    }
}

fn check_spacing(spacing: f64) -> Result<()> {
    if spacing > 0.0 && spacing.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "antenna spacing must be positive, got {spacing}"
        )))
    }
}

/// Uniform linear array along the x-axis, centred on the origin, unit gains.
pub fn make_ula(n: usize, spacing: f64) -> Result<AntennaArray> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "ULA needs at least one antenna".into(),
        ));
    }
    check_spacing(spacing)?;
    let mid = (n as f64 - 1.0) / 2.0;
    let positions = (0..n)
        .map(|i| [(i as f64 - mid) * spacing, 0.0, 0.0])
        .collect();
    AntennaArray::new(positions, vec![Complex64::new(1.0, 0.0); n], Geometry::Ula)
}

/// Uniform planar array on the xz-plane, centred on the origin, unit gains.
/// Antenna `iz * nx + ix` sits at column `ix`, row `iz`.
pub fn make_upa(nx: usize, nz: usize, spacing: f64) -> Result<AntennaArray> {
    if nx == 0 || nz == 0 {
        return Err(Error::InvalidArgument(format!(
            "UPA dimensions must be positive, got {nx}x{nz}"
        )));
    }
    check_spacing(spacing)?;
    let (mx, mz) = ((nx as f64 - 1.0) / 2.0, (nz as f64 - 1.0) / 2.0);
    let mut positions = Vec::with_capacity(nx * nz);
    for iz in 0..nz {
        for ix in 0..nx {
            positions.push([(ix as f64 - mx) * spacing, 0.0, (iz as f64 - mz) * spacing]);
        }
    }
    AntennaArray::new(
        positions,
        vec![Complex64::new(1.0, 0.0); nx * nz],
        Geometry::Upa,
    )
}

/// Draws a "true" array around a nominal one: every gain receives
/// `CN(0, sigma_g²)` noise and every position is jittered by `N(0, sigma_p²)`
/// independently on each requested axis.
pub fn perturb_array<R: Rng + ?Sized>(
    array: &AntennaArray,
    sigma_g: f64,
    sigma_p: f64,
    axes: &[Axis],
    rng: &mut R,
) -> Result<AntennaArray> {
    if !(sigma_g >= 0.0) || !(sigma_p >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "perturbation stds must be non-negative, got sigma_g={sigma_g}, sigma_p={sigma_p}"
        )));
    }
    let mut positions = array.positions.clone();
    let mut gains = array.gains.clone();
    for (g, p) in gains.iter_mut().zip(positions.iter_mut()) {
        *g += complex_normal(rng, sigma_g * sigma_g);
        for axis in axes {
            p[axis.index()] += sigma_p * normal(rng);
        }
    }
    AntennaArray::new(positions, gains, array.geometry)
}

/// Unnormalized steering vector `gᵢ exp(-j 2π pᵢ·u)`.
pub fn steering_vector(array: &AntennaArray, u: &Direction) -> CVec {
    array
        .positions
        .iter()
        .zip(&array.gains)
        .map(|(p, g)| g * Complex64::from_polar(1.0, -2.0 * PI * u.dot(p)))
        .collect()
}

/// `a` directions with azimuth evenly spaced over `[-π/2, π/2)`, each at the
/// midpoint of its cell (so `a = 1` gives broadside).
pub fn doa_grid_ula(a: usize) -> Vec<Direction> {
    (0..a)
        .map(|k| grid_direction(Geometry::Ula, a, k))
        .collect()
}

/// `a` near-uniform directions on the half sphere facing +y (Fibonacci
/// lattice; equal-area bands in y).
pub fn doa_grid_upa(a: usize) -> Vec<Direction> {
    (0..a)
        .map(|k| grid_direction(Geometry::Upa, a, k))
        .collect()
}

/// Direction `k` of the `a`-point grid for `geometry`, without building the
/// whole grid.
pub fn grid_direction(geometry: Geometry, a: usize, k: usize) -> Direction {
    match geometry {
        Geometry::Ula => Direction::from_azimuth(-PI / 2.0 + PI * (k as f64 + 0.5) / a as f64),
        Geometry::Upa | Geometry::Custom => {
            let golden = PI * (3.0 - 5f64.sqrt());
            let y = (k as f64 + 0.5) / a as f64;
            let r = (1.0 - y * y).sqrt();
            let theta = golden * k as f64;
            Direction([r * theta.cos(), y, r * theta.sin()])
        }
    }
}

/// Grid matching the array geometry: azimuth half-plane for linear arrays,
/// half sphere otherwise.
pub fn doa_grid_for(geometry: Geometry, a: usize) -> Vec<Direction> {
    match geometry {
        Geometry::Ula => doa_grid_ula(a),
        Geometry::Upa | Geometry::Custom => doa_grid_upa(a),
    }
}

pub fn build_dictionary(
    array: &AntennaArray,
    directions: &[Direction],
    normalize: bool,
) -> Result<Dictionary> {
    if directions.is_empty() {
        return Err(Error::InvalidArgument(
            "dictionary needs at least one direction".into(),
        ));
    }
    let n = array.len();
    let mut atoms = ComplexMatrix::zeros(n, directions.len());
    for (j, u) in directions.iter().enumerate() {
        let mut col = steering_vector(array, u);
        if normalize {
            let nrm = norm(&col);
            if nrm == 0.0 {
                return Err(Error::ZeroAtom(j));
            }
            col.iter_mut().for_each(|z| *z /= nrm);
        }
        atoms.column_mut(j).copy_from_slice(&col);
    }
    Ok(Dictionary {
        atoms,
        directions: directions.to_vec(),
        normalized: normalize,
    })
}
