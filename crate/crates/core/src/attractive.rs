//! Sparsity-aware attractive term.
//!
//! The attractive force only touches stored entries of the joint
//! distribution, so its cost and memory traffic are governed by the
//! sparsity pattern. Rows are permuted once up front to pull the pattern
//! toward the diagonal (reverse Cuthill-McKee, or a caller-supplied
//! cluster hint), then the kernel walks fixed-size row blocks against
//! column tiles so the coordinates a block touches stay cache-resident.
//!
//! Per row the accumulation order is ascending column regardless of
//! blocking, and row blocks write disjoint outputs, so results are
//! bitwise reproducible for a given ordering, parallel or not.

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::JointDistribution;
use crate::nuconv::GridWorkspace;

#[derive(Debug, Error)]
pub enum AttractiveError {
    #[error("buffer length {got}, expected {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("cluster hint has {got} labels for {want} vertices")]
    BadLabels { got: usize, want: usize },
    #[error("block size must be positive")]
    BadBlockSize,
    #[error("grid order changed since this plan was built (epoch {plan} vs {current})")]
    StaleGridOrder { plan: u64, current: u64 },
}

/// How to order rows before blocking.
#[derive(Debug, Clone)]
pub enum ReorderStrategy {
    /// Keep the input order.
    Identity,
    /// Reverse Cuthill-McKee over the sparsity pattern: breadth-first
    /// from a minimum-degree vertex, neighbors by ascending degree,
    /// order reversed. Concentrates neighbors into nearby rows.
    BfsRcm,
    /// Stable sort by the given per-vertex labels; useful when cluster
    /// structure is known out of band.
    ClusterHint(Vec<u32>),
}

fn rcm_order(p: &JointDistribution) -> Vec<u32> {
    let n = p.n();
    let degree = |v: usize| p.row(v).0.len();
    // global visit order for component seeds: min degree first
    let mut seeds: Vec<u32> = (0..n as u32).collect();
    seeds.sort_by_key(|&v| (degree(v as usize), v));
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    let mut nbrs: Vec<u32> = Vec::new();
    let mut seed_cursor = 0usize;
    while order.len() < n {
        while visited[seeds[seed_cursor] as usize] {
            seed_cursor += 1;
        }
        let start = seeds[seed_cursor];
        visited[start as usize] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            let (cols, _) = p.row(v as usize);
            for &c in cols {
                if !visited[c as usize] {
                    visited[c as usize] = true;
                    nbrs.push(c);
                }
            }
            nbrs.sort_by_key(|&u| (degree(u as usize), u));
            for &u in &nbrs {
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Joint distribution with rows and columns relabeled by a locality
/// permutation, plus the blocking width the kernel will use.
pub struct ReorderedMatrix {
    p: JointDistribution,
    /// Matrix rank → original vertex id.
    perm: Vec<u32>,
    /// Original vertex id → matrix rank.
    inv_perm: Vec<u32>,
    block_size: usize,
}

impl ReorderedMatrix {
    pub fn build(
        p: &JointDistribution,
        strategy: &ReorderStrategy,
        block_size: usize,
    ) -> Result<Self, AttractiveError> {
        if block_size == 0 {
            return Err(AttractiveError::BadBlockSize);
        }
        let n = p.n();
        let perm: Vec<u32> = match strategy {
            ReorderStrategy::Identity => (0..n as u32).collect(),
            ReorderStrategy::BfsRcm => rcm_order(p),
            ReorderStrategy::ClusterHint(labels) => {
                if labels.len() != n {
                    return Err(AttractiveError::BadLabels {
                        got: labels.len(),
                        want: n,
                    });
                }
                let mut ids: Vec<u32> = (0..n as u32).collect();
                ids.sort_by_key(|&v| (labels[v as usize], v));
                ids
            }
        };
        let mut inv_perm = vec![0u32; n];
        for (rank, &old) in perm.iter().enumerate() {
            inv_perm[old as usize] = rank as u32;
        }

        let mut row_starts = Vec::with_capacity(n + 1);
        row_starts.push(0usize);
        for &old in &perm {
            let len = p.row(old as usize).0.len();
            row_starts.push(row_starts.last().unwrap() + len);
        }
        let nnz = *row_starts.last().unwrap();
        let mut col_indices = vec![0u32; nnz];
        let mut values = vec![0.0f64; nnz];
        let mut entry: Vec<(u32, f64)> = Vec::new();
        for (rank, &old) in perm.iter().enumerate() {
            let (cols, vals) = p.row(old as usize);
            entry.clear();
            entry.extend(
                cols.iter()
                    .zip(vals)
                    .map(|(&c, &v)| (inv_perm[c as usize], v)),
            );
            entry.sort_unstable_by_key(|e| e.0);
            let start = row_starts[rank];
            for (t, &(c, v)) in entry.iter().enumerate() {
                col_indices[start + t] = c;
                values[start + t] = v;
            }
        }

        Ok(ReorderedMatrix {
            p: JointDistribution {
                n,
                row_starts,
                col_indices,
                values,
            },
            perm,
            inv_perm,
            block_size,
        })
    }

    pub fn n(&self) -> usize {
        self.p.n()
    }

    pub fn permuted(&self) -> &JointDistribution {
        &self.p
    }

    /// Matrix rank → original vertex id.
    pub fn perm(&self) -> &[u32] {
        &self.perm
    }

    /// Original vertex id → matrix rank.
    pub fn inv_perm(&self) -> &[u32] {
        &self.inv_perm
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Fraction of stored entries whose row and column fall in the same
    /// block; how well the ordering localized the pattern.
    pub fn diagonal_block_fraction(&self) -> f64 {
        let bs = self.block_size;
        let mut diag = 0usize;
        let mut total = 0usize;
        for r in 0..self.p.n() {
            let (cols, _) = self.p.row(r);
            total += cols.len();
            let rb = r / bs;
            diag += cols.iter().filter(|&&c| c as usize / bs == rb).count();
        }
        if total == 0 {
            0.0
        } else {
            diag as f64 / total as f64
        }
    }
}

/// Attractive force in matrix order:
/// out_i = 4·alpha · Σ_j p_ij (1+‖y_i−y_j‖²)^{-1} (y_i − y_j).
///
/// `alpha` scales the final per-coordinate sums, so results are exactly
/// linear in it.
pub fn attractive_term(
    m: &ReorderedMatrix,
    y: &[f64],
    d: usize,
    alpha: f64,
    out: &mut [f64],
) -> Result<(), AttractiveError> {
    let n = m.p.n();
    if y.len() != n * d {
        return Err(AttractiveError::SizeMismatch {
            got: y.len(),
            want: n * d,
        });
    }
    if out.len() != n * d {
        return Err(AttractiveError::SizeMismatch {
            got: out.len(),
            want: n * d,
        });
    }
    let bs = m.block_size;
    let p = &m.p;
    let scale = 4.0 * alpha;

    out.par_chunks_mut(bs * d).enumerate().for_each(|(b, chunk)| {
        let r0 = b * bs;
        let r1 = (r0 + bs).min(n);
        chunk.fill(0.0);
        let mut cursor: Vec<usize> = (r0..r1).map(|r| p.row_starts()[r]).collect();
        let mut tile = 0usize;
        while tile < n {
            let tend = (tile + bs).min(n);
            for r in r0..r1 {
                let lr = r - r0;
                let end = p.row_starts()[r + 1];
                let cols = p.col_indices();
                let vals = p.values();
                let mut cur = cursor[lr];
                let yi = &y[r * d..r * d + d];
                let acc = &mut chunk[lr * d..lr * d + d];
                while cur < end && (cols[cur] as usize) < tend {
                    let j = cols[cur] as usize;
                    let yj = &y[j * d..j * d + d];
                    let mut r2 = 0.0;
                    for k in 0..d {
                        let dk = yi[k] - yj[k];
                        r2 += dk * dk;
                    }
                    let pw = vals[cur] / (1.0 + r2);
                    for k in 0..d {
                        acc[k] += pw * (yi[k] - yj[k]);
                    }
                    cur += 1;
                }
                cursor[lr] = cur;
            }
            tile = tend;
        }
        for v in chunk.iter_mut() {
            *v *= scale;
        }
    });
    Ok(())
}

/// The orderings point data moves between during optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointOrder {
    /// The caller's vertex numbering.
    Original,
    /// Rows of the reordered joint distribution.
    Matrix,
    /// Grid-major cell order from the last binning.
    Grid,
}

/// Precomposed gathers between the three point orders. Built against one
/// grid binning; moves that involve [`PointOrder::Grid`] refuse to run
/// once the workspace has re-binned.
pub struct TranslocationPlan {
    n: usize,
    epoch: u64,
    /// Matrix rank → original id.
    matrix_from_original: Vec<u32>,
    /// Grid rank → matrix rank.
    grid_from_matrix: Vec<u32>,
    /// Grid rank → original id.
    grid_from_original: Vec<u32>,
}

impl TranslocationPlan {
    /// `matrix_perm` is matrix rank → original id; the workspace must
    /// have binned the points in matrix order.
    pub fn build(matrix_perm: &[u32], ws: &GridWorkspace) -> Result<Self, AttractiveError> {
        let n = matrix_perm.len();
        if ws.n() != n {
            return Err(AttractiveError::SizeMismatch {
                got: ws.n(),
                want: n,
            });
        }
        let grid_from_matrix = ws.perm().to_vec();
        let grid_from_original: Vec<u32> = grid_from_matrix
            .iter()
            .map(|&g| matrix_perm[g as usize])
            .collect();
        Ok(TranslocationPlan {
            n,
            epoch: ws.epoch(),
            matrix_from_original: matrix_perm.to_vec(),
            grid_from_matrix,
            grid_from_original,
        })
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Moves `d` interleaved components per point from one order to
    /// another. `current_grid_epoch` is checked whenever the move
    /// touches the grid order.
    pub fn translocate(
        &self,
        src: &[f64],
        dst: &mut [f64],
        d: usize,
        from: PointOrder,
        to: PointOrder,
        current_grid_epoch: u64,
    ) -> Result<(), AttractiveError> {
        let want = self.n * d;
        if src.len() != want {
            return Err(AttractiveError::SizeMismatch {
                got: src.len(),
                want,
            });
        }
        if dst.len() != want {
            return Err(AttractiveError::SizeMismatch {
                got: dst.len(),
                want,
            });
        }
        if (from == PointOrder::Grid || to == PointOrder::Grid) && current_grid_epoch != self.epoch
        {
            return Err(AttractiveError::StaleGridOrder {
                plan: self.epoch,
                current: current_grid_epoch,
            });
        }
        let gather = |map: &[u32], src: &[f64], dst: &mut [f64]| {
            for (t, &s) in map.iter().enumerate() {
                let s = s as usize;
                dst[t * d..t * d + d].copy_from_slice(&src[s * d..s * d + d]);
            }
        };
        let scatter = |map: &[u32], src: &[f64], dst: &mut [f64]| {
            for (t, &s) in map.iter().enumerate() {
                let s = s as usize;
                dst[s * d..s * d + d].copy_from_slice(&src[t * d..t * d + d]);
            }
        };
        use PointOrder::*;
        match (from, to) {
            (Original, Matrix) => gather(&self.matrix_from_original, src, dst),
            (Matrix, Original) => scatter(&self.matrix_from_original, src, dst),
            (Matrix, Grid) => gather(&self.grid_from_matrix, src, dst),
            (Grid, Matrix) => scatter(&self.grid_from_matrix, src, dst),
            (Original, Grid) => gather(&self.grid_from_original, src, dst),
            (Grid, Original) => scatter(&self.grid_from_original, src, dst),
            _ => dst.copy_from_slice(src),
        }
        Ok(())
    }
}
