//! Conditioning of the input graph before embedding: either per-row
//! rescaling of an arbitrary stochastic matrix so every row's kernel sum
//! equals a target λ, or Gaussian perplexity equalization of kNN squared
//! distances.
//!
//! Both paths solve one monotone scalar equation per row by bracketed
//! bisection. The bracket is narrowed to near machine width rather than
//! stopping at the residual tolerance: the λ=1 identity and the exact
//! uniform special cases then hold to full precision, and the residual
//! tolerance becomes a final sanity check instead of a stopping rule.

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::SparseGraph;

/// Monotone kernel applied to the exponentiated weights inside the
/// row-sum equation. Only the identity is shipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RescaleKernel {
    #[default]
    Identity,
}

impl RescaleKernel {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            RescaleKernel::Identity => x,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RescalingConfig {
    pub lambda: f64,
    pub kernel: RescaleKernel,
    /// Ceiling on the final residual |Σ φ(p^γ) − λ|.
    pub tol: f64,
    pub max_iter: usize,
}

impl RescalingConfig {
    pub fn new(lambda: f64) -> Self {
        RescalingConfig {
            lambda,
            kernel: RescaleKernel::Identity,
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PerplexityConfig {
    pub perplexity: f64,
    /// Ceiling on the final entropy residual |H − log u|.
    pub tol: f64,
    pub max_iter: usize,
}

impl PerplexityConfig {
    pub fn new(perplexity: f64) -> Self {
        PerplexityConfig {
            perplexity,
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConditioningError {
    #[error("lambda must be positive, got {0}")]
    BadLambda(f64),
    #[error("perplexity must be positive, got {0}")]
    BadPerplexity(f64),
    #[error("{}", format_infeasible(op, rows))]
    Infeasible {
        op: &'static str,
        /// Every infeasible vertex with a reason, in vertex order.
        rows: Vec<(usize, String)>,
    },
    #[error("vertex {0}: root finder did not converge within {1} iterations")]
    NoConvergence(usize, usize),
}

fn format_infeasible(op: &str, rows: &[(usize, String)]) -> String {
    let mut s = format!("{op} infeasible at {} vertices:", rows.len());
    for (v, why) in rows.iter().take(8) {
        s.push_str(&format!(" [vertex {v}: {why}]"));
    }
    if rows.len() > 8 {
        s.push_str(&format!(" ... and {} more", rows.len() - 8));
    }
    s
}

/// Per-vertex outputs of [`rescale`] kept for diagnostics.
#[derive(Debug, Clone)]
pub struct RescaleDiagnostics {
    pub gammas: Vec<f64>,
    /// Rows with a single neighbor carry no freedom; they are passed
    /// through unchanged and counted here when λ ≠ 1 made that lossy.
    pub degree1_rows_unchanged: usize,
}

#[derive(Debug, Clone)]
pub struct PerplexityDiagnostics {
    /// Solved bandwidths; +∞ marks rows with all-equal distances, which
    /// are uniform at every bandwidth.
    pub sigmas: Vec<f64>,
}

/// Solves Σ_j φ(p_j^γ) = λ for γ ≥ 0 on one stochastic row.
///
/// The sum is strictly decreasing in γ (all p_j < 1 when the row has two
/// or more entries), from the degree at γ=0 toward 0, so a solution
/// exists exactly when 0 < λ ≤ degree.
pub fn solve_gamma(row_values: &[f64], cfg: &RescalingConfig) -> Result<f64, ConditioningError> {
    if !(cfg.lambda > 0.0) {
        return Err(ConditioningError::BadLambda(cfg.lambda));
    }
    solve_gamma_row(row_values, cfg).map_err(|why| ConditioningError::Infeasible {
        op: "rescaling",
        rows: vec![(0, why)],
    })
}

fn solve_gamma_row(row_values: &[f64], cfg: &RescalingConfig) -> Result<f64, String> {
    let k = row_values.len();
    debug_assert!(row_values.iter().all(|&p| p > 0.0 && p <= 1.0));
    if k == 1 {
        // single neighbor: the sum is φ(1) = 1 for every γ
        return if cfg.lambda == 1.0 {
            Ok(1.0)
        } else {
            Err(format!(
                "single-neighbor row admits only λ = 1, got λ = {}",
                cfg.lambda
            ))
        };
    }
    let ln_p: Vec<f64> = row_values.iter().map(|&p| p.ln()).collect();
    let residual = |gamma: f64| -> f64 {
        let mut s = 0.0;
        for &lp in &ln_p {
            s += cfg.kernel.apply((gamma * lp).exp());
        }
        s - cfg.lambda
    };

    // γ = 0 gives the degree; λ above it is unattainable
    let at_zero = k as f64 - cfg.lambda;
    if at_zero < 0.0 {
        return Err(format!(
            "λ = {} exceeds the row degree {k} reachable at γ = 0",
            cfg.lambda
        ));
    }
    if at_zero == 0.0 {
        return Ok(0.0);
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let at_one = residual(1.0);
    if at_one == 0.0 {
        return Ok(1.0);
    }
    if at_one > 0.0 {
        // λ below the row sum: the root lies beyond 1
        lo = 1.0;
        let mut iters = 0;
        hi = 2.0;
        while residual(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            iters += 1;
            if iters > cfg.max_iter {
                return Err(format!("no sign change while bracketing up to γ = {hi:e}"));
            }
        }
    }

    for _ in 0..cfg.max_iter {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * (1.0 + hi) {
            break;
        }
    }
    let gamma = 0.5 * (lo + hi);
    let res = residual(gamma).abs();
    if res > cfg.tol {
        return Err(format!(
            "residual {res:e} above tolerance {:e} after bisection",
            cfg.tol
        ));
    }
    Ok(gamma)
}

/// Rescales every row of a stochastic matrix to p_j^γ_i / λ with the
/// per-row exponent solving the kernel-sum equation. The sparsity mask is
/// untouched; only values change.
pub fn rescale(
    pc: &SparseGraph,
    cfg: &RescalingConfig,
) -> Result<(SparseGraph, RescaleDiagnostics), ConditioningError> {
    if !(cfg.lambda > 0.0) {
        return Err(ConditioningError::BadLambda(cfg.lambda));
    }
    let n = pc.n();
    let outcomes: Vec<Result<f64, String>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (_, vals) = pc.row(i);
            if vals.len() == 1 {
                // handled by the pass-through rule below, never an error
                Ok(1.0)
            } else {
                solve_gamma_row(vals, cfg)
            }
        })
        .collect();

    let mut infeasible: Vec<(usize, String)> = Vec::new();
    for (i, r) in outcomes.iter().enumerate() {
        if let Err(why) = r {
            infeasible.push((i, why.clone()));
        }
    }
    if !infeasible.is_empty() {
        return Err(ConditioningError::Infeasible {
            op: "rescaling",
            rows: infeasible,
        });
    }

    let mut out = pc.clone();
    let mut gammas = vec![0.0; n];
    let mut degree1_rows_unchanged = 0usize;
    for i in 0..n {
        let gamma = *outcomes[i].as_ref().unwrap();
        gammas[i] = gamma;
        let start = pc.row_starts()[i];
        let end = pc.row_starts()[i + 1];
        if end - start == 1 {
            if cfg.lambda != 1.0 {
                degree1_rows_unchanged += 1;
            }
            continue;
        }
        let vals = &mut out.values_mut()[start..end];
        for v in vals {
            let powed = if gamma == 1.0 {
                *v
            } else if gamma == 0.0 {
                1.0
            } else {
                (gamma * v.ln()).exp()
            };
            *v = cfg.kernel.apply(powed) / cfg.lambda;
        }
    }
    Ok((
        out,
        RescaleDiagnostics {
            gammas,
            degree1_rows_unchanged,
        },
    ))
}

/// Replaces kNN squared distances with Gaussian conditional probabilities
/// whose per-row entropy equals log(perplexity).
pub fn perplexity_equalize(
    knn: &SparseGraph,
    cfg: &PerplexityConfig,
) -> Result<(SparseGraph, PerplexityDiagnostics), ConditioningError> {
    let u = cfg.perplexity;
    if !(u > 0.0) {
        return Err(ConditioningError::BadPerplexity(u));
    }
    let n = knn.n();
    let target = u.ln();

    let outcomes: Vec<Result<(f64, Vec<f64>), String>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (_, dists) = knn.row(i);
            solve_perplexity_row(dists, target, u, cfg)
        })
        .collect();

    let mut infeasible: Vec<(usize, String)> = Vec::new();
    for (i, r) in outcomes.iter().enumerate() {
        if let Err(why) = r {
            infeasible.push((i, why.clone()));
        }
    }
    if !infeasible.is_empty() {
        return Err(ConditioningError::Infeasible {
            op: "perplexity equalization",
            rows: infeasible,
        });
    }

    let mut out = knn.clone();
    let mut sigmas = vec![0.0; n];
    for (i, r) in outcomes.into_iter().enumerate() {
        let (sigma, probs) = r.unwrap();
        sigmas[i] = sigma;
        let start = knn.row_starts()[i];
        out.values_mut()[start..start + probs.len()].copy_from_slice(&probs);
    }
    Ok((out, PerplexityDiagnostics { sigmas }))
}

/// Entropy of the Gaussian conditional at bandwidth σ over centered
/// squared distances, together with the probabilities.
fn gaussian_row(deltas: &[f64], sigma: f64, probs: &mut [f64]) -> f64 {
    let beta = 1.0 / (2.0 * sigma * sigma);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (p, &dl) in probs.iter_mut().zip(deltas) {
        let e = (-beta * dl).exp();
        *p = e;
        sum += e;
        weighted += e * dl;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    sum.ln() + beta * weighted / sum
}

fn solve_perplexity_row(
    dists: &[f64],
    target: f64,
    u: f64,
    cfg: &PerplexityConfig,
) -> Result<(f64, Vec<f64>), String> {
    let k = dists.len();
    if u >= k as f64 {
        return Err(format!(
            "perplexity {u} not below the row degree {k}; the entropy cannot reach log({u})"
        ));
    }
    let dmin = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let deltas: Vec<f64> = dists.iter().map(|&d| d - dmin).collect();
    let spread = deltas.iter().copied().fold(0.0, f64::max);
    let mut probs = vec![0.0; k];
    if spread == 0.0 {
        // equal distances are uniform at every bandwidth
        probs.fill(1.0 / k as f64);
        return Ok((f64::INFINITY, probs));
    }

    let mut lo = 1e-20;
    if gaussian_row(&deltas, lo, &mut probs) >= target {
        return Err(format!(
            "entropy floor {:.6} (tied nearest neighbors) already at or above log({u})",
            gaussian_row(&deltas, lo, &mut probs)
        ));
    }
    let mut hi = 1.0;
    let mut iters = 0;
    while gaussian_row(&deltas, hi, &mut probs) < target {
        lo = hi;
        hi *= 2.0;
        iters += 1;
        if iters > cfg.max_iter {
            return Err(format!("no sign change while bracketing up to σ = {hi:e}"));
        }
    }

    for _ in 0..cfg.max_iter {
        let mid = 0.5 * (lo + hi);
        if gaussian_row(&deltas, mid, &mut probs) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let sigma = 0.5 * (lo + hi);
    let entropy = gaussian_row(&deltas, sigma, &mut probs);
    if (entropy - target).abs() > cfg.tol {
        return Err(format!(
            "entropy residual {:e} above tolerance {:e} after bisection",
            (entropy - target).abs(),
            cfg.tol
        ));
    }
    Ok((sigma, probs))
}
