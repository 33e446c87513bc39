//! Exact quadratic-time reference computations.
//!
//! These evaluate the Student-t kernel sums, the KL objective, and both
//! gradient terms by direct pairwise summation. They verify the grid
//! pipeline and drive small instances when exact gradients are requested.
//!
//! Coordinates are flat row-major arrays: point i occupies
//! `y[i*d .. (i+1)*d]`.

use thiserror::Error;

use crate::graph::JointDistribution;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("coordinate array length {len} is not a multiple of dimension {d}")]
    BadShape { len: usize, d: usize },
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("dense kernel matrix for n = {n} exceeds the cap of {cap}")]
    DenseCapExceeded { n: usize, cap: usize },
    #[error("distribution is over {p_n} vertices but coordinates hold {y_n} points")]
    SizeMismatch { p_n: usize, y_n: usize },
}

/// Attractive and repulsive gradient terms plus the kernel normalization.
/// The KL gradient is `attractive - repulsive`.
#[derive(Debug, Clone)]
pub struct GradientTerms {
    pub attractive: Vec<f64>,
    pub repulsive: Vec<f64>,
    pub z: f64,
}

pub(crate) fn check_coords(y: &[f64], d: usize) -> Result<usize, ExactError> {
    if d == 0 || y.len() % d != 0 {
        return Err(ExactError::BadShape { len: y.len(), d });
    }
    let n = y.len() / d;
    if n < 2 {
        return Err(ExactError::TooFewPoints(n));
    }
    if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
        return Err(ExactError::NonFinite(bad / d));
    }
    Ok(n)
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        s += t * t;
    }
    s
}

/// Z = Σ_{k≠l} (1 + ‖y_k − y_l‖²)^{-1} over all ordered pairs.
pub fn exact_z(y: &[f64], d: usize) -> Result<f64, ExactError> {
    let n = check_coords(y, d)?;
    let mut z = 0.0;
    for i in 0..n {
        let yi = &y[i * d..(i + 1) * d];
        for j in i + 1..n {
            let yj = &y[j * d..(j + 1) * d];
            z += 2.0 / (1.0 + dist2(yi, yj));
        }
    }
    Ok(z)
}

/// Dense matrix of pairwise similarities q_ij = w_ij / Z with zero
/// diagonal, returned row-major together with Z. Capped because the
/// result is O(n²) memory.
pub fn exact_q_dense(y: &[f64], d: usize, cap: usize) -> Result<(Vec<f64>, f64), ExactError> {
    let n = check_coords(y, d)?;
    if n > cap {
        return Err(ExactError::DenseCapExceeded { n, cap });
    }
    let mut w = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        let yi = &y[i * d..(i + 1) * d];
        for j in i + 1..n {
            let yj = &y[j * d..(j + 1) * d];
            let wij = 1.0 / (1.0 + dist2(yi, yj));
            w[i * n + j] = wij;
            w[j * n + i] = wij;
            z += 2.0 * wij;
        }
    }
    for v in &mut w {
        *v /= z;
    }
    Ok((w, z))
}

/// Repulsive term (4/Z)·Σ_{j≠i} w_ij² (y_i − y_j) for every point, plus Z,
/// both by direct summation.
pub fn exact_repulsive(y: &[f64], d: usize) -> Result<(Vec<f64>, f64), ExactError> {
    let n = check_coords(y, d)?;
    let mut frep = vec![0.0; n * d];
    let mut z = 0.0;
    for i in 0..n {
        let yi = &y[i * d..(i + 1) * d];
        for j in i + 1..n {
            let yj = &y[j * d..(j + 1) * d];
            let w = 1.0 / (1.0 + dist2(yi, yj));
            z += 2.0 * w;
            let w2 = w * w;
            for k in 0..d {
                let f = w2 * (yi[k] - yj[k]);
                frep[i * d + k] += f;
                frep[j * d + k] -= f;
            }
        }
    }
    let s = 4.0 / z;
    for v in &mut frep {
        *v *= s;
    }
    Ok((frep, z))
}

/// Both gradient terms of the KL objective at the current coordinates.
pub fn exact_gradient(p: &JointDistribution, y: &[f64], d: usize) -> Result<GradientTerms, ExactError> {
    let n = check_coords(y, d)?;
    if p.n() != n {
        return Err(ExactError::SizeMismatch { p_n: p.n(), y_n: n });
    }
    let (repulsive, z) = exact_repulsive(y, d)?;
    let mut attractive = vec![0.0; n * d];
    for i in 0..n {
        let yi = &y[i * d..(i + 1) * d];
        let (cols, vals) = p.row(i);
        let out = &mut attractive[i * d..(i + 1) * d];
        for (&j, &pij) in cols.iter().zip(vals) {
            let yj = &y[j as usize * d..(j as usize + 1) * d];
            let w = 1.0 / (1.0 + dist2(yi, yj));
            let c = 4.0 * pij * w;
            for k in 0..d {
                out[k] += c * (yi[k] - yj[k]);
            }
        }
    }
    Ok(GradientTerms {
        attractive,
        repulsive,
        z,
    })
}

/// KL(P ‖ Q) = Σ_{stored ij} p_ij log(p_ij / q_ij) with q_ij = w_ij / Z.
pub fn kl_divergence(p: &JointDistribution, y: &[f64], d: usize) -> Result<f64, ExactError> {
    let n = check_coords(y, d)?;
    if p.n() != n {
        return Err(ExactError::SizeMismatch { p_n: p.n(), y_n: n });
    }
    let z = exact_z(y, d)?;
    Ok(kl_with_z(p, y, d, z))
}

/// KL evaluated against a caller-supplied normalization. Splitting this
/// out lets the optimizer reuse the grid estimate of Z at large n.
pub fn kl_with_z(p: &JointDistribution, y: &[f64], d: usize, z: f64) -> f64 {
    let ln_z = z.ln();
    let mut kl = 0.0;
    for i in 0..p.n() {
        let yi = &y[i * d..(i + 1) * d];
        let (cols, vals) = p.row(i);
        for (&j, &pij) in cols.iter().zip(vals) {
            let yj = &y[j as usize * d..(j as usize + 1) * d];
            let ln_w = -(1.0 + dist2(yi, yj)).ln();
            kl += pij * (pij.ln() - ln_w + ln_z);
        }
    }
    kl
}
