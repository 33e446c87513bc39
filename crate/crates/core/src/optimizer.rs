//! Gradient-descent driver.
//!
//! Minimizes the divergence between the sparse joint distribution and
//! the embedding's kernel similarities. Attractive forces come from the
//! blocked sparse kernel, repulsive forces from the grid factorization
//! (or the direct all-pairs sum when `exact` is set). Per-component
//! adaptive gains with momentum, early exaggeration of the attractive
//! term, and recentering every iteration.
//!
//! All coordinate state lives in matrix order (the row order of the
//! reordered joint distribution); points are gathered into grid order
//! around each repulsive evaluation and results scattered back. Output
//! coordinates are returned in the caller's original vertex order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::attractive::{attractive_term, AttractiveError, ReorderStrategy, ReorderedMatrix};
use crate::exact::{exact_repulsive, exact_z, kl_with_z, ExactError};
use crate::graph::JointDistribution;
use crate::nuconv::{GridConfig, GridWorkspace, NuconvError};

const GAIN_UP: f64 = 0.2;
const GAIN_DOWN: f64 = 0.8;
const GAIN_FLOOR: f64 = 0.01;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding dimension must be 1, 2, or 3, got {0}")]
    BadDim(usize),
    #[error("coordinate buffer length {got}, expected {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("gradient diverged at iteration {iter}; max finite |gradient| = {max_grad}")]
    Diverged { iter: usize, max_grad: f64 },
    #[error(transparent)]
    Attractive(#[from] AttractiveError),
    #[error(transparent)]
    Grid(#[from] NuconvError),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// Initial coordinate distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Uniform on [-scale/2, scale/2] per coordinate.
    Uniform,
    /// Centered normal with standard deviation `scale`.
    Gaussian,
}

#[derive(Debug, Clone)]
pub struct EmbedConfig {
    pub dim: usize,
    pub max_iter: usize,
    /// Iterations during which the attractive term is multiplied by
    /// `exaggeration`.
    pub early_exag_iter: usize,
    pub exaggeration: f64,
    pub eta: f64,
    pub momentum_init: f64,
    pub momentum_final: f64,
    /// Iteration at which momentum switches from init to final.
    pub momentum_switch_iter: usize,
    pub init: InitKind,
    pub init_scale: f64,
    pub seed: u64,
    /// Record the divergence every this many iterations (0 = record
    /// nothing mid-run). The final iterate is always recorded.
    pub kl_log_every: usize,
    pub grid: GridConfig,
    pub reorder: ReorderStrategy,
    pub block_size: usize,
    /// All-pairs repulsive sums instead of the grid factorization.
    pub exact: bool,
    /// Largest n for which trace entries use the exact normalization;
    /// beyond it the grid estimate is used and entries are flagged.
    pub exact_kl_cap: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 2,
            max_iter: 1000,
            early_exag_iter: 250,
            exaggeration: 12.0,
            eta: 200.0,
            momentum_init: 0.5,
            momentum_final: 0.8,
            momentum_switch_iter: 250,
            init: InitKind::Uniform,
            init_scale: 1.0,
            seed: 0,
            kl_log_every: 50,
            grid: GridConfig::default(),
            reorder: ReorderStrategy::BfsRcm,
            block_size: 256,
            exact: false,
            exact_kl_cap: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlTracePoint {
    pub iter: usize,
    pub kl: f64,
    /// True when the normalization came from the grid instead of the
    /// exact all-pairs sum.
    pub estimated: bool,
}

#[derive(Debug, Clone)]
pub struct EmbedResult {
    /// Coordinates in the caller's vertex order, n·dim interleaved.
    pub y: Vec<f64>,
    pub trace: Vec<KlTracePoint>,
    pub iters: usize,
    pub final_kl: f64,
    pub final_kl_estimated: bool,
}

/// Stepwise embedding state; [`embed`] drives it start to finish.
pub struct EmbeddingRun {
    cfg: EmbedConfig,
    matrix: ReorderedMatrix,
    ws: GridWorkspace,
    n: usize,
    /// Coordinates, velocity, gains: matrix order, n·dim interleaved.
    y: Vec<f64>,
    vel: Vec<f64>,
    gains: Vec<f64>,
    iter: usize,
    trace: Vec<KlTracePoint>,
    fattr: Vec<f64>,
    frep: Vec<f64>,
    y_grid: Vec<f64>,
    f_grid: Vec<f64>,
}

impl EmbeddingRun {
    pub fn new(p: &JointDistribution, cfg: EmbedConfig) -> Result<Self, EmbedError> {
        if !(1..=3).contains(&cfg.dim) {
            return Err(EmbedError::BadDim(cfg.dim));
        }
        let n = p.n();
        let d = cfg.dim;
        let matrix = ReorderedMatrix::build(p, &cfg.reorder, cfg.block_size)?;

        // draw in original vertex order so the reordering strategy does
        // not change which point gets which start
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut y_orig = vec![0.0f64; n * d];
        match cfg.init {
            InitKind::Uniform => {
                for v in y_orig.iter_mut() {
                    *v = (rng.gen::<f64>() - 0.5) * cfg.init_scale;
                }
            }
            InitKind::Gaussian => {
                let normal = Normal::new(0.0, cfg.init_scale.abs().max(f64::MIN_POSITIVE))
                    .expect("finite std dev");
                for v in y_orig.iter_mut() {
                    *v = normal.sample(&mut rng);
                }
            }
        }
        let mut y = vec![0.0f64; n * d];
        for (rank, &old) in matrix.perm().iter().enumerate() {
            let o = old as usize;
            y[rank * d..rank * d + d].copy_from_slice(&y_orig[o * d..o * d + d]);
        }

        Ok(EmbeddingRun {
            ws: GridWorkspace::new(cfg.grid.clone()),
            cfg,
            matrix,
            n,
            y,
            vel: vec![0.0; n * d],
            gains: vec![1.0; n * d],
            iter: 0,
            trace: Vec::new(),
            fattr: vec![0.0; n * d],
            frep: vec![0.0; n * d],
            y_grid: vec![0.0; n * d],
            f_grid: vec![0.0; n * d],
        })
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    pub fn config(&self) -> &EmbedConfig {
        &self.cfg
    }

    /// Matrix rank → original vertex id.
    pub fn matrix_perm(&self) -> &[u32] {
        self.matrix.perm()
    }

    pub fn grid_workspace(&self) -> &GridWorkspace {
        &self.ws
    }

    /// Current coordinates in matrix order.
    pub fn coords_matrix_order(&self) -> &[f64] {
        &self.y
    }

    /// Current coordinates in the caller's vertex order.
    pub fn coords_original_order(&self) -> Vec<f64> {
        let d = self.cfg.dim;
        let mut out = vec![0.0; self.n * d];
        for (rank, &old) in self.matrix.perm().iter().enumerate() {
            let o = old as usize;
            out[o * d..o * d + d].copy_from_slice(&self.y[rank * d..rank * d + d]);
        }
        out
    }

    /// Replaces the coordinates (caller's vertex order); velocity and
    /// gains are reset.
    pub fn seed_coords(&mut self, y: &[f64]) -> Result<(), EmbedError> {
        let d = self.cfg.dim;
        if y.len() != self.n * d {
            return Err(EmbedError::SizeMismatch {
                got: y.len(),
                want: self.n * d,
            });
        }
        for (rank, &old) in self.matrix.perm().iter().enumerate() {
            let o = old as usize;
            self.y[rank * d..rank * d + d].copy_from_slice(&y[o * d..o * d + d]);
        }
        self.vel.fill(0.0);
        self.gains.fill(1.0);
        Ok(())
    }

    fn exact_z_trace(&self) -> bool {
        self.cfg.exact || self.n <= self.cfg.exact_kl_cap
    }

    /// Divergence of the current iterate; `estimated` when the
    /// normalization came from the grid.
    pub fn kl_now(&mut self) -> Result<(f64, bool), EmbedError> {
        let d = self.cfg.dim;
        let (z, estimated) = if self.exact_z_trace() {
            (exact_z(&self.y, d)?, false)
        } else {
            (self.ws.normalization(&self.y, d)?, true)
        };
        Ok((kl_with_z(self.matrix.permuted(), &self.y, d, z), estimated))
    }

    /// One gradient-descent iteration.
    pub fn step(&mut self) -> Result<(), EmbedError> {
        let d = self.cfg.dim;
        let n = self.n;
        let iter = self.iter;
        let alpha = if iter < self.cfg.early_exag_iter {
            self.cfg.exaggeration
        } else {
            1.0
        };
        let momentum = if iter < self.cfg.momentum_switch_iter {
            self.cfg.momentum_init
        } else {
            self.cfg.momentum_final
        };

        let z = if self.cfg.exact {
            let (frep, z) = exact_repulsive(&self.y, d)?;
            self.frep.copy_from_slice(&frep);
            z
        } else {
            self.ws.bin_points(&self.y, d)?;
            for (rank, &src) in self.ws.perm().iter().enumerate() {
                let s = src as usize;
                self.y_grid[rank * d..rank * d + d].copy_from_slice(&self.y[s * d..s * d + d]);
            }
            let z = {
                let EmbeddingRun { ws, y_grid, f_grid, .. } = self;
                ws.repulsive_from_grid_order(y_grid, f_grid)?
            };
            for (rank, &src) in self.ws.perm().iter().enumerate() {
                let s = src as usize;
                self.frep[s * d..s * d + d].copy_from_slice(&self.f_grid[rank * d..rank * d + d]);
            }
            z
        };

        attractive_term(&self.matrix, &self.y, d, alpha, &mut self.fattr)?;

        if self.cfg.kl_log_every > 0 && iter % self.cfg.kl_log_every == 0 {
            let (kl, estimated) = if self.exact_z_trace() {
                let z_exact = if self.cfg.exact { z } else { exact_z(&self.y, d)? };
                (kl_with_z(self.matrix.permuted(), &self.y, d, z_exact), false)
            } else {
                (kl_with_z(self.matrix.permuted(), &self.y, d, z), true)
            };
            self.trace.push(KlTracePoint { iter, kl, estimated });
        }

        let mut max_grad = 0.0f64;
        let mut diverged = false;
        for idx in 0..n * d {
            let g = self.fattr[idx] - self.frep[idx];
            if g.is_finite() {
                max_grad = max_grad.max(g.abs());
            } else {
                diverged = true;
            }
        }
        if diverged {
            return Err(EmbedError::Diverged { iter, max_grad });
        }

        for idx in 0..n * d {
            let g = self.fattr[idx] - self.frep[idx];
            let gain = &mut self.gains[idx];
            if (g > 0.0) == (self.vel[idx] > 0.0) {
                *gain *= GAIN_DOWN;
            } else {
                *gain += GAIN_UP;
            }
            if *gain < GAIN_FLOOR {
                *gain = GAIN_FLOOR;
            }
            self.vel[idx] = momentum * self.vel[idx] - self.cfg.eta * *gain * g;
            self.y[idx] += self.vel[idx];
        }

        for k in 0..d {
            let mut mean = 0.0;
            for i in 0..n {
                mean += self.y[i * d + k];
            }
            mean /= n as f64;
            for i in 0..n {
                self.y[i * d + k] -= mean;
            }
        }

        self.iter += 1;
        Ok(())
    }

    /// Records the final divergence and hands back the embedding in the
    /// caller's vertex order.
    pub fn finish(mut self) -> Result<EmbedResult, EmbedError> {
        let (kl, estimated) = self.kl_now()?;
        self.trace.push(KlTracePoint {
            iter: self.iter,
            kl,
            estimated,
        });
        Ok(EmbedResult {
            y: self.coords_original_order(),
            trace: self.trace,
            iters: self.iter,
            final_kl: kl,
            final_kl_estimated: estimated,
        })
    }
}

/// Runs the full schedule defined by `cfg`.
pub fn embed(p: &JointDistribution, cfg: EmbedConfig) -> Result<EmbedResult, EmbedError> {
    let mut run = EmbeddingRun::new(p, cfg)?;
    while run.iter() < run.cfg.max_iter {
        run.step()?;
    }
    run.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{SparseGraph, ValueKind};

    /// Path 0-1-2. Joint entries: p01 = p10 = p12 = p21 = 1/4.
    fn path3_joint() -> JointDistribution {
        let mut g = SparseGraph::from_entries(
            3,
            vec![(0u32, 1u32, 1.0f64), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)],
            ValueKind::Weights,
        )
        .unwrap()
        .0;
        g.normalize_rows().unwrap();
        g.symmetrize()
    }

    fn small_ring(n: usize) -> JointDistribution {
        let mut edges = Vec::new();
        for i in 0..n as u32 {
            let j = (i + 1) % n as u32;
            edges.push((i, j, 1.0));
            edges.push((j, i, 1.0));
        }
        let mut g = SparseGraph::from_entries(n, edges, ValueKind::Weights).unwrap().0;
        g.normalize_rows().unwrap();
        g.symmetrize()
    }

    fn hand_step_config(eta: f64, alpha: f64) -> EmbedConfig {
        EmbedConfig {
            dim: 2,
            max_iter: 1,
            early_exag_iter: 1,
            exaggeration: alpha,
            eta,
            momentum_init: 0.5,
            momentum_switch_iter: 250,
            exact: true,
            reorder: ReorderStrategy::Identity,
            kl_log_every: 0,
            ..EmbedConfig::default()
        }
    }

    #[test]
    fn single_step_matches_hand_computation() {
        // Path at x = (0, 1, 3): w = (1/2, 1/5, 1/10) over the three pairs,
        // Z = 1.6, fattr = (-0.5, 0.1, 0.4), frep = (-0.7, 0.425, 0.275),
        // grad = (0.2, -0.325, 0.125). From rest the gain rule is
        // sign-asymmetric: positive grad against zero velocity reads as a
        // sign flip (gain 1.2), negative as agreement (0.8), so
        // vel = -0.1·(1.2·0.2, 0.8·(-0.325), 1.2·0.125)
        //     = (-0.024, +0.026, -0.015).
        // Recentring shifts all x equally; the gaps are invariant:
        // y1-y0 = 1 + 0.026 + 0.024 = 1.05, y2-y1 = 2 - 0.015 - 0.026 = 1.959.
        let p = path3_joint();
        let mut run = EmbeddingRun::new(&p, hand_step_config(0.1, 1.0)).unwrap();
        run.seed_coords(&[0.0, 0.0, 1.0, 0.0, 3.0, 0.0]).unwrap();
        run.step().unwrap();
        let y = run.coords_original_order();
        assert!((y[2] - y[0] - 1.05).abs() < 1e-12, "y = {y:?}");
        assert!((y[4] - y[2] - 1.959).abs() < 1e-12, "y = {y:?}");
        let mean = (y[0] + y[2] + y[4]) / 3.0;
        assert!(mean.abs() < 1e-14);
        assert_eq!(y[1], 0.0);
        assert_eq!(y[3], 0.0);
        assert_eq!(y[5], 0.0);
    }

    #[test]
    fn single_step_applies_exaggeration() {
        // Same instance with alpha = 12: fattr scales to (-6, 1.2, 4.8),
        // grad = (-5.3, 0.775, 4.525), gains (0.8, 1.2, 1.2),
        // vel = (+0.424, -0.093, -0.543), so the gaps contract to
        // y1-y0 = 1 - 0.093 - 0.424 = 0.483 and y2-y1 = 2 - 0.543 + 0.093 = 1.55
        // instead of the plain-step expansion to 1.05 and 1.959.
        let p = path3_joint();
        let mut run = EmbeddingRun::new(&p, hand_step_config(0.1, 12.0)).unwrap();
        run.seed_coords(&[0.0, 0.0, 1.0, 0.0, 3.0, 0.0]).unwrap();
        run.step().unwrap();
        let y = run.coords_original_order();
        assert!((y[2] - y[0] - 0.483).abs() < 1e-12, "y = {y:?}");
        assert!((y[4] - y[2] - 1.55).abs() < 1e-12, "y = {y:?}");
    }

    #[test]
    fn same_seed_is_bitwise_reproducible() {
        let p = small_ring(40);
        let cfg = EmbedConfig {
            max_iter: 30,
            early_exag_iter: 10,
            eta: 50.0,
            seed: 7,
            kl_log_every: 10,
            ..EmbedConfig::default()
        };
        let a = embed(&p, cfg.clone()).unwrap();
        let b = embed(&p, cfg.clone()).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.trace, b.trace);
        let c = embed(&p, EmbedConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn zero_iterations_still_reports_divergence() {
        let p = small_ring(12);
        let cfg = EmbedConfig {
            max_iter: 0,
            ..EmbedConfig::default()
        };
        let out = embed(&p, cfg).unwrap();
        assert_eq!(out.iters, 0);
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.trace[0].iter, 0);
        assert!(out.trace[0].kl.is_finite());
        assert!(!out.trace[0].estimated);
    }

    #[test]
    fn iterates_stay_centered() {
        let p = small_ring(30);
        let cfg = EmbedConfig {
            max_iter: 25,
            early_exag_iter: 5,
            eta: 80.0,
            seed: 3,
            ..EmbedConfig::default()
        };
        let out = embed(&p, cfg).unwrap();
        for k in 0..2 {
            let mean: f64 = (0..30).map(|i| out.y[i * 2 + k]).sum::<f64>() / 30.0;
            assert!(mean.abs() < 1e-10, "axis {k} mean {mean}");
        }
    }

    #[test]
    fn divergence_improves_over_run() {
        let p = small_ring(60);
        let cfg = EmbedConfig {
            max_iter: 150,
            early_exag_iter: 40,
            eta: 100.0,
            seed: 1,
            kl_log_every: 150,
            ..EmbedConfig::default()
        };
        let out = embed(&p, cfg).unwrap();
        let first = out.trace.first().unwrap().kl;
        let last = out.trace.last().unwrap().kl;
        assert!(last < first, "kl went {first} -> {last}");
    }

    #[test]
    fn gaussian_init_spread_tracks_scale() {
        let p = small_ring(400);
        let cfg = EmbedConfig {
            init: InitKind::Gaussian,
            init_scale: 1e-2,
            max_iter: 0,
            seed: 11,
            ..EmbedConfig::default()
        };
        let run = EmbeddingRun::new(&p, cfg).unwrap();
        let y = run.coords_original_order();
        let var: f64 = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        let sd = var.sqrt();
        assert!((sd - 1e-2).abs() < 2e-3, "sd = {sd}");
    }
}
