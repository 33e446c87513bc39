//! Run plumbing for the `sg-embed` binary: the flat run record, TSV
//! writers, and the stochastic-neighbor recall diagnostic.

use std::fs::File;
use std::io::{BufWriter, Result as IoResult, Write};
use std::path::Path;

use anyhow::ensure;
use sgtsne::optimizer::KlTracePoint;
use sgtsne::SparseGraph;

/// Ordered `key = value` run record. Together with the input file it
/// pins down a reproducible run, so two runs with identical records and
/// one worker thread write byte-identical outputs.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn write_to(&self, path: &Path) -> IoResult<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for (k, v) in &self.entries {
            writeln!(w, "{k} = {v}")?;
        }
        w.flush()
    }
}

/// One `id<TAB>coordinates` line per vertex, in the caller's vertex
/// order. Floats print in shortest round-trip form, so the file parses
/// back to the in-memory values exactly.
pub fn write_embedding(path: &Path, y: &[f64], d: usize) -> IoResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, p) in y.chunks_exact(d).enumerate() {
        write!(w, "{i}")?;
        for c in p {
            write!(w, "\t{c:e}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

pub fn write_kl_trace(path: &Path, trace: &[KlTracePoint]) -> IoResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# iter\tkl\testimated")?;
    for t in trace {
        writeln!(w, "{}\t{:e}\t{}", t.iter, t.kl, t.estimated as u8)?;
    }
    w.flush()
}

pub const RECALL_BINS: usize = 20;

/// How much of each vertex's conditional probability mass lands on its
/// `k_eval` nearest embedding neighbors.
#[derive(Debug, Clone)]
pub struct RecallReport {
    pub per_vertex: Vec<f64>,
    /// Counts over [0,1] in bins of width 0.05; the top edge is closed,
    /// so the counts always sum to n.
    pub hist: [usize; RECALL_BINS],
    pub mean: f64,
}

/// recall(i) = Σ_j p(j|i) over the k_eval nearest neighbors j of y_i.
/// `p` must be the row-stochastic conditional matrix, not the
/// symmetrized joint.
pub fn recall_report(
    p: &SparseGraph,
    y: &[f64],
    d: usize,
    k_eval: usize,
) -> anyhow::Result<RecallReport> {
    let n = p.n();
    ensure!(
        y.len() == n * d,
        "embedding has {} coordinates, expected {} vertices in {} dimensions",
        y.len(),
        n,
        d
    );
    ensure!(
        k_eval >= 1 && k_eval < n,
        "recall neighbor count must lie in 1..n (n = {n}, got {k_eval})"
    );
    let nbrs = embedding_knn(y, d, k_eval);

    let mut per_vertex = vec![0.0; n];
    // stamp i+1 marks vertex i's neighbor set; no per-row clearing
    let mut mark = vec![0u32; n];
    for i in 0..n {
        let stamp = i as u32 + 1;
        for &j in &nbrs[i * k_eval..(i + 1) * k_eval] {
            mark[j as usize] = stamp;
        }
        let (cols, vals) = p.row(i);
        let mut r = 0.0;
        for (&j, &pj) in cols.iter().zip(vals) {
            if mark[j as usize] == stamp {
                r += pj;
            }
        }
        // rows are stochastic to rounding; keep the report inside [0,1]
        per_vertex[i] = r.clamp(0.0, 1.0);
    }

    let mut hist = [0usize; RECALL_BINS];
    for &r in &per_vertex {
        let b = ((r * RECALL_BINS as f64) as usize).min(RECALL_BINS - 1);
        hist[b] += 1;
    }
    let mean = per_vertex.iter().sum::<f64>() / n as f64;
    Ok(RecallReport {
        per_vertex,
        hist,
        mean,
    })
}

/// Leading comment lines carry the mean and the histogram; data lines
/// are `id<TAB>recall`.
pub fn write_recall(path: &Path, rep: &RecallReport) -> IoResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# mean_recall\t{:e}", rep.mean)?;
    for (b, count) in rep.hist.iter().enumerate() {
        let lo = b as f64 * 0.05;
        writeln!(w, "# bin\t{lo:.2}\t{:.2}\t{count}", lo + 0.05)?;
    }
    for (i, r) in rep.per_vertex.iter().enumerate() {
        writeln!(w, "{i}\t{r:e}")?;
    }
    w.flush()
}

const BRUTE_KNN_CAP: usize = 50_000;

/// Flat n·k table of each point's k nearest neighbors, rows sorted by
/// ascending distance. Direct all-pairs scan up to 50 000 points, cell
/// lists beyond; both are exact, the cell list only prunes.
pub fn embedding_knn(y: &[f64], d: usize, k: usize) -> Vec<u32> {
    let n = y.len() / d;
    assert!(y.len() % d == 0 && k >= 1 && k < n);
    if n <= BRUTE_KNN_CAP {
        sgtsne::synth::knn_indices(y, d, k)
    } else {
        knn_cells(y, d, k)
    }
}

/// Exact kNN via a uniform bucket grid, scanned outward ring by ring.
/// Every point in a cell at Chebyshev cell distance above m sits at
/// Euclidean distance >= m·cell from the query, so the scan stops once
/// the running k-th best is within that bound.
fn knn_cells(y: &[f64], d: usize, k: usize) -> Vec<u32> {
    let n = y.len() / d;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in y.chunks_exact(d) {
        for t in 0..d {
            lo[t] = lo[t].min(p[t]);
            hi[t] = hi[t].max(p[t]);
        }
    }
    // target ~2 points per cell; degenerate or anisotropic boxes can
    // explode the cell count, so coarsen until it stays near n
    let mut vol = 1.0;
    for t in 0..d {
        vol *= (hi[t] - lo[t]).max(1e-12);
    }
    let mut cell = (vol * 2.0 / n as f64).powf(1.0 / d as f64).max(1e-12);
    let dims = loop {
        let dims: Vec<usize> = (0..d)
            .map(|t| ((hi[t] - lo[t]) / cell) as usize + 1)
            .collect();
        if dims.iter().product::<usize>() <= 2 * n {
            break dims;
        }
        cell *= 2.0;
    };
    let ncells: usize = dims.iter().product();
    let cell_of = |p: &[f64]| -> usize {
        let mut idx = 0;
        for t in 0..d {
            let c = (((p[t] - lo[t]) / cell) as usize).min(dims[t] - 1);
            idx = idx * dims[t] + c;
        }
        idx
    };

    // counting sort of point ids into cells
    let mut starts = vec![0usize; ncells + 1];
    for p in y.chunks_exact(d) {
        starts[cell_of(p) + 1] += 1;
    }
    for c in 0..ncells {
        starts[c + 1] += starts[c];
    }
    let mut bucket = vec![0u32; n];
    let mut cursor = starts.clone();
    for (i, p) in y.chunks_exact(d).enumerate() {
        let c = cell_of(p);
        bucket[cursor[c]] = i as u32;
        cursor[c] += 1;
    }

    let mut out = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, u32)> = Vec::new();
    for i in 0..n {
        let q = &y[i * d..(i + 1) * d];
        let mut qc = [0isize; 3];
        for t in 0..d {
            qc[t] = (((q[t] - lo[t]) / cell) as usize).min(dims[t] - 1) as isize;
        }
        cand.clear();
        let scan_cell = |c: usize, cand: &mut Vec<(f64, u32)>| {
            for &j in &bucket[starts[c]..starts[c + 1]] {
                if j as usize == i {
                    continue;
                }
                let p = &y[j as usize * d..(j as usize + 1) * d];
                let mut r2 = 0.0;
                for t in 0..d {
                    let dt = q[t] - p[t];
                    r2 += dt * dt;
                }
                cand.push((r2, j));
            }
        };
        let max_ring = (0..d)
            .map(|t| (qc[t].max(dims[t] as isize - 1 - qc[t])) as usize)
            .max()
            .unwrap();
        for m in 0..=max_ring {
            for_each_ring_cell(&qc, m as isize, &dims, |c| scan_cell(c, &mut cand));
            if cand.len() >= k {
                cand.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
                cand.truncate(k);
                if cand[k - 1].0.sqrt() <= m as f64 * cell {
                    break;
                }
            }
        }
        debug_assert!(cand.len() >= k);
        cand.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
        cand[..k].sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        out.extend(cand[..k].iter().map(|&(_, j)| j));
    }
    out
}

/// Visits every in-bounds cell whose Chebyshev offset from `qc` is
/// exactly `m`, decomposed into disjoint faces: axis a is pinned at ±m,
/// axes before a range over |off| <= m-1, axes after a over |off| <= m.
fn for_each_ring_cell(qc: &[isize; 3], m: isize, dims: &[usize], mut visit: impl FnMut(usize)) {
    let d = dims.len();
    let flat = |c: &[isize; 3]| -> Option<usize> {
        let mut idx = 0usize;
        for t in 0..d {
            if c[t] < 0 || c[t] >= dims[t] as isize {
                return None;
            }
            idx = idx * dims[t] + c[t] as usize;
        }
        Some(idx)
    };
    if m == 0 {
        if let Some(c) = flat(qc) {
            visit(c);
        }
        return;
    }
    let mut c = [0isize; 3];
    for a in 0..d {
        for s in [-m, m] {
            c[a] = qc[a] + s;
            let lo = |t: usize| qc[t] - if t < a { m - 1 } else { m };
            let hi = |t: usize| qc[t] + if t < a { m - 1 } else { m };
            match d {
                1 => {
                    if let Some(f) = flat(&c) {
                        visit(f);
                    }
                }
                2 => {
                    let o = 1 - a;
                    for v in lo(o)..=hi(o) {
                        c[o] = v;
                        if let Some(f) = flat(&c) {
                            visit(f);
                        }
                    }
                }
                _ => {
                    let (o1, o2) = match a {
                        0 => (1, 2),
                        1 => (0, 2),
                        _ => (0, 1),
                    };
                    for v1 in lo(o1)..=hi(o1) {
                        c[o1] = v1;
                        for v2 in lo(o2)..=hi(o2) {
                            c[o2] = v2;
                            if let Some(f) = flat(&c) {
                                visit(f);
                            }
                        }
                    }
                }
            }
        }
    }
}
