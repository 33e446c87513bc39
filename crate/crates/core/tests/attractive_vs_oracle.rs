//! Blocked attractive kernel against the all-pairs oracle, and the
//! block-localizing effect of the reorderings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgtsne::exact::exact_gradient;
use sgtsne::synth::{interleaved_cliques, random_points, random_stochastic_graph};
use sgtsne::{attractive_term, JointDistribution, ReorderStrategy, ReorderedMatrix};

fn unpermuted_forces(
    p: &JointDistribution,
    y: &[f64],
    d: usize,
    strategy: &ReorderStrategy,
    block_size: usize,
) -> Vec<f64> {
    let n = p.n();
    let m = ReorderedMatrix::build(p, strategy, block_size).unwrap();
    let mut ym = vec![0.0; n * d];
    for (rank, &old) in m.perm().iter().enumerate() {
        let old = old as usize;
        ym[rank * d..(rank + 1) * d].copy_from_slice(&y[old * d..(old + 1) * d]);
    }
    let mut out = vec![0.0; n * d];
    attractive_term(&m, &ym, d, 1.0, &mut out).unwrap();
    let mut back = vec![0.0; n * d];
    for (rank, &old) in m.perm().iter().enumerate() {
        let old = old as usize;
        back[old * d..(old + 1) * d].copy_from_slice(&out[rank * d..(rank + 1) * d]);
    }
    back
}

#[test]
fn blocked_kernel_matches_the_oracle_under_every_order() {
    let n = 300;
    let d = 2;
    let mut g = random_stochastic_graph(n, 2, 12, 77);
    g.normalize_rows().unwrap();
    let p = g.symmetrize();
    let y = random_points(n, d, 9.0, 5);
    let want = exact_gradient(&p, &y, d).unwrap().attractive;
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..5u32)).collect();
    for strategy in [
        ReorderStrategy::Identity,
        ReorderStrategy::BfsRcm,
        ReorderStrategy::ClusterHint(labels),
    ] {
        let got = unpermuted_forces(&p, &y, d, &strategy, 64);
        for c in 0..n * d {
            assert!(
                (got[c] - want[c]).abs() <= 1e-12 * scale,
                "{strategy:?} coord {c}: {} vs {}",
                got[c],
                want[c]
            );
        }
    }
}

#[test]
fn rcm_and_identity_agree_after_unpermuting() {
    let n = 500;
    let d = 3;
    let mut g = random_stochastic_graph(n, 3, 9, 123);
    g.normalize_rows().unwrap();
    let p = g.symmetrize();
    let y = random_points(n, d, 14.0, 99);
    let a = unpermuted_forces(&p, &y, d, &ReorderStrategy::Identity, 256);
    let b = unpermuted_forces(&p, &y, d, &ReorderStrategy::BfsRcm, 256);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for c in 0..n * d {
        assert!((a[c] - b[c]).abs() <= 1e-12 * scale, "coord {c}");
    }
}

#[test]
fn rcm_gathers_interleaved_cliques_into_diagonal_blocks() {
    let (mut g, _) = interleaved_cliques(2, 128);
    g.normalize_rows().unwrap();
    let p = g.symmetrize();

    let identity = ReorderedMatrix::build(&p, &ReorderStrategy::Identity, 128).unwrap();
    let rcm = ReorderedMatrix::build(&p, &ReorderStrategy::BfsRcm, 128).unwrap();
    let before = identity.diagonal_block_fraction();
    let after = rcm.diagonal_block_fraction();
    assert!(before < 0.6, "interleaving already blocked? {before}");
    assert!(after >= 0.95, "rcm fraction {after}");
}

#[test]
fn cluster_hints_behave_like_rcm_on_cliques() {
    let (mut g, labels) = interleaved_cliques(4, 64);
    g.normalize_rows().unwrap();
    let p = g.symmetrize();
    let m = ReorderedMatrix::build(&p, &ReorderStrategy::ClusterHint(labels), 64).unwrap();
    assert!(m.diagonal_block_fraction() >= 0.95);
}
