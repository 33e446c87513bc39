//! Sparse graph storage in compressed sparse row form.
//!
//! [`SparseGraph`] holds a directed weighted graph whose rows are the
//! out-neighborhoods of each vertex. After [`SparseGraph::normalize_rows`]
//! the values form a row-stochastic conditional matrix; a distance-valued
//! graph (squared distances on a kNN mask) uses the same container.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has no vertices")]
    Empty,
    #[error("vertex count {0} exceeds u32 index space")]
    TooManyVertices(usize),
    #[error("vertex {0} has no outgoing edges")]
    IsolatedVertex(usize),
    #[error("edge ({row}, {col}) out of range for {n} vertices")]
    IndexOutOfRange { row: u64, col: u64, n: usize },
    #[error("edge ({row}, {col}) has invalid weight {value} ({reason})")]
    BadValue {
        row: u32,
        col: u32,
        value: f64,
        reason: &'static str,
    },
    #[error("row {0} has nonpositive sum {1}")]
    NonpositiveRowSum(usize, f64),
}

/// How stored values are interpreted when assembling a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    /// Edge affinities. Must be positive; explicit zeros are dropped from
    /// the mask rather than stored.
    Weights,
    /// Squared distances on a kNN mask. Zero is meaningful (coincident
    /// points) and kept; negative values are rejected.
    SquaredDistances,
}

/// Counts of entries cleaned up during assembly.
#[derive(Debug, Default, Clone, Copy)]
pub struct AssemblyStats {
    pub self_loops_dropped: usize,
    pub zeros_dropped: usize,
    pub duplicates_merged: usize,
}

/// Directed sparse graph in CSR layout. Rows are sorted by column index
/// and contain no duplicates or self-loops; every vertex has at least one
/// out-edge.
#[derive(Debug, Clone)]
pub struct SparseGraph {
    n: usize,
    row_starts: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseGraph {
    /// Assembles a graph from (row, col, value) triplets. Duplicate edges
    /// are summed, self-loops dropped with a count, and zeros handled per
    /// `kind`. Errors if any vertex ends up with an empty row.
    pub fn from_entries(
        n: usize,
        entries: Vec<(u32, u32, f64)>,
        kind: ValueKind,
    ) -> Result<(Self, AssemblyStats), GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if n > u32::MAX as usize {
            return Err(GraphError::TooManyVertices(n));
        }
        let mut stats = AssemblyStats::default();
        let mut kept: Vec<(u32, u32, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            if r as usize >= n || c as usize >= n {
                return Err(GraphError::IndexOutOfRange {
                    row: r as u64,
                    col: c as u64,
                    n,
                });
            }
            if !v.is_finite() {
                return Err(GraphError::BadValue {
                    row: r,
                    col: c,
                    value: v,
                    reason: "non-finite",
                });
            }
            if v < 0.0 {
                return Err(GraphError::BadValue {
                    row: r,
                    col: c,
                    value: v,
                    reason: "negative",
                });
            }
            if r == c {
                stats.self_loops_dropped += 1;
                continue;
            }
            if v == 0.0 && kind == ValueKind::Weights {
                stats.zeros_dropped += 1;
                continue;
            }
            kept.push((r, c, v));
        }
        kept.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_starts = vec![0usize; n + 1];
        let mut col_indices = Vec::with_capacity(kept.len());
        let mut values = Vec::with_capacity(kept.len());
        let mut cur_row = 0usize;
        for (r, c, v) in kept {
            while cur_row < r as usize {
                row_starts[cur_row + 1] = col_indices.len();
                cur_row += 1;
            }
            if col_indices.len() > row_starts[cur_row] && *col_indices.last().unwrap() == c {
                *values.last_mut().unwrap() += v;
                stats.duplicates_merged += 1;
            } else {
                col_indices.push(c);
                values.push(v);
            }
        }
        while cur_row < n {
            row_starts[cur_row + 1] = col_indices.len();
            cur_row += 1;
        }

        let graph = SparseGraph {
            n,
            row_starts,
            col_indices,
            values,
        };
        for i in 0..n {
            if graph.degree(i) == 0 {
                return Err(GraphError::IsolatedVertex(i));
            }
        }
        Ok((graph, stats))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_starts[i + 1] - self.row_starts[i]
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.row_starts[i]..self.row_starts[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    pub fn row_starts(&self) -> &[usize] {
        &self.row_starts
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Divides every row by its sum, making the matrix row-stochastic.
    pub fn normalize_rows(&mut self) -> Result<(), GraphError> {
        for i in 0..self.n {
            let r = self.row_starts[i]..self.row_starts[i + 1];
            let sum: f64 = self.values[r.clone()].iter().sum();
            if !(sum > 0.0) {
                return Err(GraphError::NonpositiveRowSum(i, sum));
            }
            for v in &mut self.values[r] {
                *v /= sum;
            }
        }
        Ok(())
    }

    /// Largest deviation of any row sum from 1.
    pub fn max_row_sum_deviation(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let (_, vals) = self.row(i);
                (vals.iter().sum::<f64>() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Symmetrizes the conditional matrix into the joint distribution
    /// p_ij = (p_j|i + p_i|j) / (2n) on the pattern A ∪ Aᵀ.
    pub fn symmetrize(&self) -> JointDistribution {
        let scale = 1.0 / (2.0 * self.n as f64);
        let mut entries: Vec<(u32, u32, f64)> = Vec::with_capacity(2 * self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                entries.push((i as u32, j, v * scale));
                entries.push((j, i as u32, v * scale));
            }
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_starts = vec![0usize; self.n + 1];
        let mut col_indices: Vec<u32> = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut cur_row = 0usize;
        for (r, c, v) in entries {
            while cur_row < r as usize {
                row_starts[cur_row + 1] = col_indices.len();
                cur_row += 1;
            }
            if col_indices.len() > row_starts[cur_row] && *col_indices.last().unwrap() == c {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
            }
        }
        while cur_row < self.n {
            row_starts[cur_row + 1] = col_indices.len();
            cur_row += 1;
        }

        JointDistribution {
            n: self.n,
            row_starts,
            col_indices,
            values,
        }
    }
}

/// Symmetric joint distribution over vertex pairs: p_ij = p_ji, total mass 1.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    pub(crate) n: usize,
    pub(crate) row_starts: Vec<usize>,
    pub(crate) col_indices: Vec<u32>,
    pub(crate) values: Vec<f64>,
}

impl JointDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.row_starts[i]..self.row_starts[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    pub fn row_starts(&self) -> &[usize] {
        &self.row_starts
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Checks that the stored pattern and values are exactly symmetric.
    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let (jc, jv) = self.row(j as usize);
                match jc.binary_search(&(i as u32)) {
                    Ok(pos) => {
                        if jv[pos] != v {
                            return false;
                        }
                    }
                    Err(_) => return false,
                }
            }
        }
        true
    }

    /// Scales all values so the total mass is exactly the given target.
    /// Used by tests constructing distributions directly.
    pub fn rescale_mass(&mut self, target: f64) {
        let mass = self.total_mass();
        let f = target / mass;
        for v in &mut self.values {
            *v *= f;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assembly_sums_duplicates_and_drops() {
        let entries = vec![
            (0u32, 1u32, 0.3),
            (0, 1, 0.2),
            (1, 0, 1.0),
            (0, 0, 5.0),
            (1, 2, 0.0),
            (2, 0, 0.7),
        ];
        let (g, stats) = SparseGraph::from_entries(3, entries, ValueKind::Weights).unwrap();
        assert_eq!(stats.duplicates_merged, 1);
        assert_eq!(stats.self_loops_dropped, 1);
        assert_eq!(stats.zeros_dropped, 1);
        assert_eq!(g.nnz(), 3);
        let (cols, vals) = g.row(0);
        assert_eq!(cols, &[1]);
        assert_eq!(vals, &[0.5]);
    }

    #[test]
    fn isolated_vertex_is_an_error() {
        let entries = vec![(0u32, 1u32, 1.0), (1, 0, 1.0)];
        let err = SparseGraph::from_entries(3, entries, ValueKind::Weights).unwrap_err();
        match err {
            GraphError::IsolatedVertex(v) => assert_eq!(v, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn distance_mode_keeps_zeros() {
        let entries = vec![(0u32, 1u32, 0.0), (1, 0, 2.0)];
        let (g, stats) = SparseGraph::from_entries(2, entries, ValueKind::SquaredDistances).unwrap();
        assert_eq!(stats.zeros_dropped, 0);
        assert_eq!(g.row(0).1, &[0.0]);
    }

    #[test]
    fn normalize_handles_tiny_rows() {
        let entries = vec![(0u32, 1u32, 1e-300), (0, 2, 1e-300), (1, 0, 1.0), (2, 0, 1.0)];
        let (mut g, _) = SparseGraph::from_entries(3, entries, ValueKind::Weights).unwrap();
        g.normalize_rows().unwrap();
        assert_eq!(g.row(0).1, &[0.5, 0.5]);
    }

    #[test]
    fn normalize_is_idempotent_on_exact_rows() {
        let entries = vec![(0u32, 1u32, 0.25), (0, 2, 0.75), (1, 0, 1.0), (2, 0, 1.0)];
        let (mut g, _) = SparseGraph::from_entries(3, entries, ValueKind::Weights).unwrap();
        g.normalize_rows().unwrap();
        assert_eq!(g.row(0).1, &[0.25, 0.75]);
    }

    #[test]
    fn symmetrize_directed_star() {
        // 1-indexed star from the format docs, stored 0-based: 0→1, 0→2 at
        // 0.5 each; 1→0 and 2→0 at 1. p_01 = (0.5 + 1)/6 = 0.25.
        let entries = vec![
            (0u32, 1u32, 0.5),
            (0, 2, 0.5),
            (1, 0, 1.0),
            (2, 0, 1.0),
        ];
        let (g, _) = SparseGraph::from_entries(3, entries, ValueKind::Weights).unwrap();
        let p = g.symmetrize();
        assert!(p.is_symmetric());
        assert!((p.total_mass() - 1.0).abs() < 1e-12);
        let (cols, vals) = p.row(0);
        assert_eq!(cols, &[1, 2]);
        assert!((vals[0] - 0.25).abs() < 1e-15);
        assert!((vals[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn symmetrize_fills_missing_reverse_edges() {
        let entries = vec![(0u32, 1u32, 1.0), (1, 2, 1.0), (2, 1, 1.0)];
        let (g, _) = SparseGraph::from_entries(3, entries, ValueKind::Weights).unwrap();
        let p = g.symmetrize();
        // edge 0→1 has no reverse; both (0,1) and (1,0) must appear at 1/6
        let (c0, v0) = p.row(0);
        assert_eq!(c0, &[1]);
        assert!((v0[0] - 1.0 / 6.0).abs() < 1e-15);
        let (c1, _) = p.row(1);
        assert_eq!(c1, &[0, 2]);
        assert!(p.is_symmetric());
    }

    #[test]
    fn three_cycle_normalizes_uniform() {
        let entries = vec![
            (0u32, 1u32, 1.0),
            (0, 2, 1.0),
            (1, 0, 1.0),
            (1, 2, 1.0),
            (2, 0, 1.0),
            (2, 1, 1.0),
        ];
        let (mut g, _) = SparseGraph::from_entries(3, entries, ValueKind::Weights).unwrap();
        g.normalize_rows().unwrap();
        for i in 0..3 {
            assert_eq!(g.row(i).1, &[0.5, 0.5]);
        }
    }
}
