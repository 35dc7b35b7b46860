//! Built-in test network.

use alloc::vec;
use alloc::vec::Vec;

use crate::network::{EdgeInput, Network};

const VERTICES: [[f64; 2]; 10] = [
    [0.1, 0.1],
    [0.5, 0.1],
    [0.5, 0.4],
    [0.1, 0.4],
    [0.8, 0.5],
    [0.8, 0.8],
    [0.35, 0.6],
    [0.35, 0.8],
    [0.2, 0.6],
    [0.8, 0.905],
];

const EDGES: [(usize, usize); 10] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 0),
    (1, 4),
    (4, 5),
    (2, 6),
    (6, 7),
    (6, 8),
    (5, 9),
];

/// Connected 10-vertex, 10-edge network of straight segments inside the unit
/// square with total length 2.905.
pub fn simple_network() -> Network {
    let vertices: Vec<Vec<f64>> = VERTICES.iter().map(|v| vec![v[0], v[1]]).collect();
    let edges = EDGES.iter().map(|&(a, b)| EdgeInput::straight(a, b)).collect();
    Network::new(vertices, edges).expect("built-in network is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape() {
        let net = simple_network();
        assert_eq!(net.vertex_count(), 10);
        assert_eq!(net.edge_count(), 10);
        assert_eq!(net.component_count(), 1);
        assert!((net.total_length() - 2.905).abs() < 1e-12);
        for v in net.vertices() {
            assert!((0.0..=1.0).contains(&v[0]) && (0.0..=1.0).contains(&v[1]));
        }
    }
}
