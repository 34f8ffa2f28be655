//! Test-only oracles, written independently of the library kernels.

#![allow(dead_code)]

use mpnet_core::array::Dictionary;
use mpnet_core::linalg::ComplexMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn cn<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) / 2f64.sqrt()
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| cn(rng)).collect()
}

pub fn unit(v: &[Complex64]) -> Vec<Complex64> {
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter().map(|z| z / nrm).collect()
}

pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, a: usize) -> ComplexMatrix {
    ComplexMatrix::from_col_major(n, a, random_vec(rng, n * a)).unwrap()
}

/// Random dictionary with unit-norm atoms.
pub fn random_dictionary<R: Rng>(rng: &mut R, n: usize, a: usize) -> Dictionary {
    let cols: Vec<Vec<Complex64>> = (0..a).map(|_| unit(&random_vec(rng, n))).collect();
    let data: Vec<Complex64> = cols.into_iter().flatten().collect();
    Dictionary::from_matrix(ComplexMatrix::from_col_major(n, a, data).unwrap(), true)
}

/// `aᴴ b`, plain loop.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn dist2(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

pub fn energy(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Column `j` of a column-major `n × a` weight buffer.
fn col(w: &[Complex64], n: usize, j: usize) -> &[Complex64] {
    &w[j * n..(j + 1) * n]
}

/// Residual after peeling the given atoms in order: `r ← r − w (wᴴ r)`.
pub fn peel(w: &[Complex64], n: usize, x: &[Complex64], indices: &[usize]) -> Vec<Complex64> {
    let mut r = x.to_vec();
    for &j in indices {
        let c = col(w, n, j);
        let coef = inner(c, &r);
        for (ri, ci) in r.iter_mut().zip(c) {
            *ri -= ci * coef;
        }
    }
    r
}

/// Greedy index sequence of matching pursuit with a fixed depth.
pub fn greedy_indices(w: &[Complex64], n: usize, x: &[Complex64], depth: usize) -> Vec<usize> {
    let a = w.len() / n;
    let mut r = x.to_vec();
    let mut out = Vec::new();
    for _ in 0..depth {
        let mut best = (0, -1.0);
        for j in 0..a {
            let m = inner(col(w, n, j), &r).norm();
            if m > best.1 {
                best = (j, m);
            }
        }
        if best.1 == 0.0 {
            break;
        }
        out.push(best.0);
        r = peel(w, n, &r, &[best.0]);
    }
    out
}

/// Margin between the best and second-best correlation at every greedy
/// step; small margins mean a finite-difference step may flip a selection.
pub fn selection_margin(w: &[Complex64], n: usize, x: &[Complex64], indices: &[usize]) -> f64 {
    let a = w.len() / n;
    let mut r = x.to_vec();
    let mut margin = f64::INFINITY;
    for &s in indices {
        let mut mags: Vec<f64> = (0..a).map(|j| inner(col(w, n, j), &r).norm()).collect();
        let top = mags[s];
        mags[s] = f64::NEG_INFINITY;
        let second = mags.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        margin = margin.min(top - second);
        r = peel(w, n, &r, &[s]);
    }
    margin
}

/// `½‖r_K‖²` with the atom sequence held fixed.
pub fn fixed_path_cost(w: &[Complex64], n: usize, x: &[Complex64], indices: &[usize]) -> f64 {
    0.5 * energy(&peel(w, n, x, indices))
}

/// Central-difference gradient `∂/∂Re + j ∂/∂Im` of [`fixed_path_cost`].
pub fn numeric_gradient(
    w: &[Complex64],
    n: usize,
    x: &[Complex64],
    indices: &[usize],
    step: f64,
) -> Vec<Complex64> {
    let mut wp = w.to_vec();
    let mut g = vec![Complex64::new(0.0, 0.0); w.len()];
    for k in 0..w.len() {
        let orig = wp[k];
        let mut parts = [0.0; 2];
        for (p, d) in [Complex64::new(step, 0.0), Complex64::new(0.0, step)]
            .into_iter()
            .enumerate()
        {
            wp[k] = orig + d;
            let up = fixed_path_cost(&wp, n, x, indices);
            wp[k] = orig - d;
            let down = fixed_path_cost(&wp, n, x, indices);
            parts[p] = (up - down) / (2.0 * step);
        }
        wp[k] = orig;
        g[k] = Complex64::new(parts[0], parts[1]);
    }
    g
}

/// Least-squares residual energy of `x` on the span of `cols` (normal
/// equations solved by Gaussian elimination with partial pivoting).
pub fn ls_residual(cols: &[&[Complex64]], x: &[Complex64]) -> f64 {
    let k = cols.len();
    let mut m = vec![vec![Complex64::new(0.0, 0.0); k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            m[i][j] = inner(cols[i], cols[j]);
        }
        m[i][k] = inner(cols[i], x);
    }
    for p in 0..k {
        let piv = (p..k)
            .max_by(|&a, &b| m[a][p].norm().total_cmp(&m[b][p].norm()))
            .unwrap();
        m.swap(p, piv);
        if m[p][p].norm() < 1e-14 {
            return f64::NAN;
        }
        let pivot_row = m[p].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != p {
                let f = row[p] / pivot_row[p];
                for (x, v) in row.iter_mut().zip(&pivot_row).skip(p) {
                    *x -= f * v;
                }
            }
        }
    }
    let coef: Vec<Complex64> = (0..k).map(|i| m[i][k] / m[i][i]).collect();
    let mut r = x.to_vec();
    for (c, a) in cols.iter().zip(&coef) {
        for (ri, ci) in r.iter_mut().zip(c.iter()) {
            *ri -= ci * a;
        }
    }
    energy(&r)
}

/// Mean of a normal `N(mean, std²)` conditioned on exceeding `cutoff`.
pub fn truncated_normal_mean(mean: f64, std: f64, cutoff: f64) -> f64 {
    use statrs::distribution::{Continuous, ContinuousCDF, Normal};
    let z = Normal::new(0.0, 1.0).unwrap();
    let alpha = (cutoff - mean) / std;
    mean + std * z.pdf(alpha) / (1.0 - z.cdf(alpha))
}
