//! Synthetic point clouds and graphs with known structure, for tests,
//! benchmarks, and examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{SparseGraph, ValueKind};

/// Regular lattice on a Möbius band in 3-space: `nu` steps around the
/// ring, `nv` across the strip. Half-twist, ring radius 2, half-width
/// 0.5. Nonorientable, so any faithful planar layout must shear
/// somewhere; useful as an embedding stress case with a known manifold.
pub fn moebius_lattice(nu: usize, nv: usize) -> Vec<f64> {
    assert!(nu >= 3 && nv >= 2);
    const R: f64 = 2.0;
    const W: f64 = 0.5;
    let mut pts = Vec::with_capacity(nu * nv * 3);
    for iu in 0..nu {
        let u = 2.0 * std::f64::consts::PI * iu as f64 / nu as f64;
        let (su, cu) = u.sin_cos();
        let (sh, ch) = (0.5 * u).sin_cos();
        for iv in 0..nv {
            let v = -W + 2.0 * W * iv as f64 / (nv - 1) as f64;
            let rad = R + v * ch;
            pts.push(rad * cu);
            pts.push(rad * su);
            pts.push(v * sh);
        }
    }
    pts
}

/// Flat n·k row-major table of the k nearest neighbors of every point
/// (self excluded), each row sorted by ascending distance. Brute force.
pub fn knn_indices(points: &[f64], d: usize, k: usize) -> Vec<u32> {
    let n = points.len() / d;
    assert!(points.len() % d == 0 && k >= 1 && k < n);
    let mut out = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, u32)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        cand.clear();
        let yi = &points[i * d..(i + 1) * d];
        for j in 0..n {
            if j == i {
                continue;
            }
            let yj = &points[j * d..(j + 1) * d];
            let mut r2 = 0.0;
            for t in 0..d {
                let dt = yi[t] - yj[t];
                r2 += dt * dt;
            }
            cand.push((r2, j as u32));
        }
        cand.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
        cand[..k].sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        out.extend(cand[..k].iter().map(|&(_, j)| j));
    }
    out
}

/// k-nearest-neighbor graph with squared Euclidean distances as values.
pub fn knn_graph(points: &[f64], d: usize, k: usize) -> SparseGraph {
    let n = points.len() / d;
    let nbrs = knn_indices(points, d, k);
    let entries: Vec<(u32, u32, f64)> = (0..n)
        .flat_map(|i| {
            let yi = &points[i * d..(i + 1) * d];
            nbrs[i * k..(i + 1) * k].iter().map(move |&j| {
                let yj = &points[j as usize * d..(j as usize + 1) * d];
                let mut r2 = 0.0;
                for t in 0..d {
                    let dt = yi[t] - yj[t];
                    r2 += dt * dt;
                }
                (i as u32, j, r2)
            })
        })
        .collect();
    SparseGraph::from_entries(n, entries, ValueKind::SquaredDistances)
        .unwrap()
        .0
}

/// Turns a squared-distance graph into a row-stochastic affinity graph
/// with a Gaussian per row, bandwidth set to the row's mean squared
/// distance.
pub fn stochastic_from_knn_distances(g: &SparseGraph) -> SparseGraph {
    let n = g.n();
    let mut entries = Vec::with_capacity(g.nnz());
    for i in 0..n {
        let (cols, vals) = g.row(i);
        let sigma2 = vals.iter().sum::<f64>() / vals.len() as f64;
        for (&j, &d2) in cols.iter().zip(vals) {
            let w = if sigma2 > 0.0 { (-d2 / sigma2).exp() } else { 1.0 };
            entries.push((i as u32, j, w));
        }
    }
    let mut out = SparseGraph::from_entries(n, entries, ValueKind::Weights).unwrap().0;
    out.normalize_rows().unwrap();
    out
}

fn distinct_neighbors(rng: &mut ChaCha8Rng, n: usize, i: usize, deg: usize) -> Vec<usize> {
    let mut picked = rand::seq::index::sample(rng, n, deg + 1).into_vec();
    if let Some(pos) = picked.iter().position(|&v| v == i) {
        picked.swap_remove(pos);
    } else {
        picked.truncate(deg);
    }
    picked
}

/// Row-stochastic graph with per-row degree drawn uniformly from
/// `deg_lo..=deg_hi`, random distinct neighbors, random positive
/// weights.
pub fn random_stochastic_graph(n: usize, deg_lo: usize, deg_hi: usize, seed: u64) -> SparseGraph {
    assert!(deg_lo >= 1 && deg_lo <= deg_hi && deg_hi < n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for i in 0..n {
        let deg = rng.gen_range(deg_lo..=deg_hi);
        for j in distinct_neighbors(&mut rng, n, i, deg) {
            entries.push((i as u32, j as u32, rng.gen_range(0.1..1.0)));
        }
    }
    let mut g = SparseGraph::from_entries(n, entries, ValueKind::Weights).unwrap().0;
    g.normalize_rows().unwrap();
    g
}

/// k-regular graph with every stored weight equal; row-normalized, so
/// each row is k entries of 1/k.
pub fn k_regular_uniform_graph(n: usize, k: usize, seed: u64) -> SparseGraph {
    assert!(k >= 1 && k < n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(n * k);
    for i in 0..n {
        for j in distinct_neighbors(&mut rng, n, i, k) {
            entries.push((i as u32, j as u32, 1.0));
        }
    }
    let mut g = SparseGraph::from_entries(n, entries, ValueKind::Weights).unwrap().0;
    g.normalize_rows().unwrap();
    g
}

/// Rows of `k` random squared distances to distinct neighbors, values
/// uniform in [0.25, 9).
pub fn random_knn_distance_rows(n: usize, k: usize, seed: u64) -> SparseGraph {
    assert!(k >= 1 && k < n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(n * k);
    for i in 0..n {
        for j in distinct_neighbors(&mut rng, n, i, k) {
            entries.push((i as u32, j as u32, rng.gen_range(0.25..9.0)));
        }
    }
    SparseGraph::from_entries(n, entries, ValueKind::SquaredDistances)
        .unwrap()
        .0
}

/// `num_cliques` complete graphs of `clique_size` vertices each, with
/// memberships interleaved: vertex v belongs to clique v mod
/// `num_cliques`. Returns the row-normalized graph and the labels. In
/// input order each clique's entries scatter far from the diagonal;
/// grouping by label makes the pattern block diagonal.
pub fn interleaved_cliques(num_cliques: usize, clique_size: usize) -> (SparseGraph, Vec<u32>) {
    assert!(num_cliques >= 2 && clique_size >= 2);
    let n = num_cliques * clique_size;
    let mut entries = Vec::with_capacity(num_cliques * clique_size * (clique_size - 1));
    for q in 0..num_cliques {
        for a in 0..clique_size {
            let va = (q + a * num_cliques) as u32;
            for b in 0..clique_size {
                if a == b {
                    continue;
                }
                let vb = (q + b * num_cliques) as u32;
                entries.push((va, vb, 1.0));
            }
        }
    }
    let mut g = SparseGraph::from_entries(n, entries, ValueKind::Weights).unwrap().0;
    g.normalize_rows().unwrap();
    let labels = (0..n as u32).map(|v| v % num_cliques as u32).collect();
    (g, labels)
}

/// Uniform points in [-scale/2, scale/2]^d.
pub fn random_points(n: usize, d: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * d).map(|_| (rng.gen::<f64>() - 0.5) * scale).collect()
}
