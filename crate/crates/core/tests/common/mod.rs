#![allow(dead_code)]

use murraynet_core::network::{EdgeSpec, Network};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected graph with `3..=max_nodes` nodes: a random spanning tree plus a
/// few chords, `C ∈ [0.1, 10]`, `L ∈ [0.5, 2]`, zero-sum random sources.
pub fn random_network(rng: &mut ChaCha8Rng, max_nodes: usize) -> Network {
    let n = rng.gen_range(3..=max_nodes);
    let mut pairs = Vec::new();
    for v in 1..n {
        pairs.push((rng.gen_range(0..v), v));
    }
    for _ in 0..rng.gen_range(0..=n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let (a, b) = (a.min(b), a.max(b));
        if a != b && !pairs.contains(&(a, b)) {
            pairs.push((a, b));
        }
    }
    let edges: Vec<EdgeSpec> = pairs
        .iter()
        .map(|&(a, b)| EdgeSpec::new(a, b, rng.gen_range(0.5..2.0), rng.gen_range(0.1..10.0)))
        .collect();
    let mut s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mean = s.iter().sum::<f64>() / n as f64;
    for v in &mut s {
        *v -= mean;
    }
    Network::new(n, &edges, s).unwrap()
}

/// Y-junction: source 2 at the root, sinks of 1 at both leaves.
pub fn y_junction() -> Network {
    let edges = [
        EdgeSpec::new(0, 1, 1.0, 1.0),
        EdgeSpec::new(1, 2, 1.0, 1.0),
        EdgeSpec::new(1, 3, 1.0, 1.0),
    ];
    Network::new(4, &edges, vec![2.0, 0.0, -1.0, -1.0]).unwrap()
}

/// Rooted binary tree of depth 3 with the source at the root and unit
/// sinks at the eight leaves.
pub fn binary_tree() -> Network {
    let mut edges = Vec::new();
    for v in 1..15usize {
        edges.push(EdgeSpec::new((v - 1) / 2, v, 1.0 + 0.1 * v as f64, 1.0));
    }
    let mut s = vec![0.0; 15];
    s[0] = 8.0;
    for leaf in s.iter_mut().skip(7) {
        *leaf = -1.0;
    }
    Network::new(15, &edges, s).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
