mod common;

use common::{random_network, random_points};
use netspline_core::penalty::{difference_matrices, shortest_path_matrix, Adjacency, ShortestPaths};
use netspline_core::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn network_metric_axioms(seed in any::<u64>()) {
        let net = random_network(seed, 12);
        let pts = random_points(&net, 6, seed ^ 1);
        for a in &pts {
            prop_assert!(net.distance(a, a).abs() < 1e-12);
            for b in &pts {
                let ab = net.distance(a, b);
                prop_assert!(ab >= 0.0);
                prop_assert!((ab - net.distance(b, a)).abs() < 1e-12);
                if a.edge == b.edge {
                    prop_assert!(ab <= (a.offset - b.offset).abs() + 1e-12);
                }
                for c in &pts {
                    prop_assert!(ab <= net.distance(a, c) + net.distance(c, b) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn basis_is_a_partition_of_unity(seed in any::<u64>(), delta in 0.02f64..0.5) {
        let net = random_network(seed, 20);
        let basis = NetworkBasis::new(&net, delta);
        for z in random_points(&net, 200, seed ^ 2) {
            let row = basis.evaluate(&z);
            let total: f64 = row.to_dense(basis.dim()).iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn penalty_ignores_constant_shifts(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let net = random_network(seed, 10);
        let basis = NetworkBasis::new(&net, 0.1);
        let penalty = PenaltySet::new(&basis);
        let gamma: Vec<f64> = (0..basis.dim()).map(|j| ((j as f64) * 0.37 + seed as f64 * 1e-19).sin()).collect();
        let shifted: Vec<f64> = gamma.iter().map(|g| g + shift).collect();
        for order in [PenaltyOrder::First, PenaltyOrder::Second] {
            let (a, b) = (penalty.value(order, &gamma), penalty.value(order, &shifted));
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }
}

#[test]
fn vertex_values_agree_across_incident_edges() {
    for seed in 0..5 {
        let net = random_network(seed, 15);
        let basis = NetworkBasis::new(&net, 0.07);
        let gamma: Vec<f64> = (0..basis.dim()).map(|j| (j as f64).cos()).collect();
        for v in 0..net.vertex_count() {
            let values: Vec<f64> = net
                .incident(v)
                .iter()
                .map(|&(m, end)| {
                    let offset = match end {
                        netspline_core::network::End::Start => 0.0,
                        netspline_core::network::End::End => net.edge(m).length(),
                    };
                    basis.predict(&NetworkPoint::new(m, offset), &gamma)
                })
                .collect();
            for w in values.windows(2) {
                assert!((w[0] - w[1]).abs() < 1e-12);
            }
        }
    }
}

fn floyd_warshall(adj: &Adjacency) -> Vec<Vec<u32>> {
    let n = adj.n();
    let inf = u32::MAX;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
        for &j in adj.neighbors(i) {
            row[j] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] != inf && d[k][j] != inf && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

#[test]
fn bfs_paths_match_floyd_warshall() {
    for seed in 0..20u64 {
        let net = random_network(100 + seed, 12);
        let mut delta = 0.05;
        let mut basis = NetworkBasis::new(&net, delta);
        while basis.dim() > 50 {
            delta *= 1.3;
            basis = NetworkBasis::new(&net, delta);
        }
        let adj = Adjacency::from_basis(&basis);
        assert_eq!(shortest_path_matrix(&adj).to_dense(), floyd_warshall(&adj), "seed {seed}");
    }
}

#[test]
fn truncated_paths_agree_up_to_the_cutoff() {
    let net = random_network(7, 15);
    let adj = Adjacency::from_basis(&NetworkBasis::new(&net, 0.1));
    let full = shortest_path_matrix(&adj).to_dense();
    let cut = ShortestPaths::bfs(&adj, Some(2));
    for (i, row) in full.iter().enumerate() {
        for (j, &d) in row.iter().enumerate() {
            assert_eq!(cut.get(i, j), (d <= 2).then_some(d));
        }
    }
}

fn sorted_rows(rows: Vec<Vec<i32>>) -> Vec<Vec<i32>> {
    let mut rows = rows;
    rows.sort();
    rows
}

#[test]
fn star_fixture_difference_matrices() {
    // Path 1-2-3 with splines 4 and 5 both attached to 3.
    let adj = Adjacency::from_pairs(5, &[(0, 1), (1, 2), (2, 3), (2, 4)]);
    let (d1, d2) = difference_matrices(&shortest_path_matrix(&adj));
    let want_d1 = vec![
        vec![1, -1, 0, 0, 0],
        vec![0, 1, -1, 0, 0],
        vec![0, 0, 1, -1, 0],
        vec![0, 0, 1, 0, -1],
    ];
    let want_d2 = vec![
        vec![1, -2, 1, 0, 0],
        vec![0, 1, -2, 1, 0],
        vec![0, 1, -2, 0, 1],
        vec![0, 0, -2, 1, 1],
    ];
    assert_eq!(sorted_rows(d1.to_dense()), sorted_rows(want_d1.clone()));
    assert_eq!(sorted_rows(d2.to_dense()), sorted_rows(want_d2.clone()));

    let set = PenaltySet::from_adjacency(adj);
    for (order, d) in [(PenaltyOrder::First, want_d1), (PenaltyOrder::Second, want_d2)] {
        let k = set.matrix(order).to_dense();
        for i in 0..5 {
            for j in 0..5 {
                let dtd: i32 = d.iter().map(|r| r[i] * r[j]).sum();
                assert_eq!(k[i][j], dtd as f64, "order {order:?} ({i},{j})");
            }
        }
    }
    assert_eq!(set.rank(PenaltyOrder::First), 4);
    assert_eq!(set.rank(PenaltyOrder::Second), 4);
}
