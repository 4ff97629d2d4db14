//! Bundled example networks and a seeded random-graph generator.

use murraynet_core::network::{EdgeSpec, Network};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Root source 2 feeding two unit sinks; all lengths and conductivities 1.
pub fn y_junction() -> Network {
    let edges = [
        EdgeSpec::new(0, 1, 1.0, 1.0),
        EdgeSpec::new(1, 2, 1.0, 1.0),
        EdgeSpec::new(1, 3, 1.0, 1.0),
    ];
    Network::new(4, &edges, vec![2.0, 0.0, -1.0, -1.0]).expect("valid fixture")
}

/// Depth-3 binary tree: root 0 with source 4 feeds node 1, which splits
/// twice down to four unit sinks.
pub fn binary_tree() -> Network {
    let pairs = [(0, 1), (1, 2), (1, 3), (2, 4), (2, 5), (3, 6), (3, 7)];
    let edges: Vec<EdgeSpec> = pairs
        .iter()
        .map(|&(a, b)| EdgeSpec::new(a, b, 1.0, 1.0))
        .collect();
    Network::new(8, &edges, vec![4.0, 0.0, 0.0, 0.0, -1.0, -1.0, -1.0, -1.0])
        .expect("valid fixture")
}

/// `k × k` lattice with unit edges, a unit source at one corner and the
/// matching sink at the opposite one.
pub fn grid_graph(k: usize) -> Network {
    let id = |i: usize, j: usize| i + k * j;
    let mut edges = Vec::new();
    for j in 0..k {
        for i in 0..k {
            if i + 1 < k {
                edges.push(EdgeSpec::new(id(i, j), id(i + 1, j), 1.0, 1.0));
            }
            if j + 1 < k {
                edges.push(EdgeSpec::new(id(i, j), id(i, j + 1), 1.0, 1.0));
            }
        }
    }
    let mut s = vec![0.0; k * k];
    s[0] = 1.0;
    s[k * k - 1] = -1.0;
    let positions = (0..k * k)
        .map(|v| Some(vec![(v % k) as f64, (v / k) as f64]))
        .collect();
    Network::new(k * k, &edges, s)
        .and_then(|n| n.with_positions(positions))
        .expect("valid fixture")
}

/// Connected graph with `3..=max_nodes` nodes: a random spanning tree plus
/// chords, `C ∈ [0.1, 10]`, `L ∈ [0.5, 2]`, zero-sum sources.
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
    s.iter_mut().for_each(|v| *v -= mean);
    Network::new(n, &edges, s).expect("generated graph is valid")
}
