use netspline_core::{EdgeInput, Network, NetworkPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Connected random network in the unit square: a random spanning tree plus
/// extra edges, some of them bent polylines, at most `max_edges` in total.
pub fn random_network(seed: u64, max_edges: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nv = rng.random_range(2..=(max_edges / 2 + 1).max(2));
    let vertices: Vec<Vec<f64>> = (0..nv).map(|_| vec![rng.random(), rng.random()]).collect();
    let mut edges = Vec::new();
    for v in 1..nv {
        let parent = rng.random_range(0..v);
        edges.push(edge(&mut rng, &vertices, parent, v));
    }
    let extra = rng.random_range(0..=max_edges - edges.len());
    for _ in 0..extra {
        let a = rng.random_range(0..nv);
        let b = rng.random_range(0..nv);
        if a != b {
            edges.push(edge(&mut rng, &vertices, a, b));
        }
    }
    Network::new(vertices, edges).unwrap()
}

fn edge(rng: &mut ChaCha8Rng, vertices: &[Vec<f64>], a: usize, b: usize) -> EdgeInput {
    if rng.random_bool(0.3) {
        let mid = vec![rng.random(), rng.random()];
        EdgeInput::with_polyline(a, b, vec![vertices[a].clone(), mid, vertices[b].clone()])
    } else {
        EdgeInput::straight(a, b)
    }
}

pub fn random_points(net: &Network, count: usize, seed: u64) -> Vec<NetworkPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let m = rng.random_range(0..net.edge_count());
            let u: f64 = rng.random();
            NetworkPoint::new(m, u * net.edge(m).length())
        })
        .collect()
}
