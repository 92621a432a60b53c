use geognn::graph::{
    build_epsilon_graph_with, eigendecompose, epsilon_schedule, sparse_matvec, KernelScale,
};
use geognn::manifold::{make_manifold, sample_points, ManifoldKind};
use proptest::prelude::*;

fn kind(sphere: bool) -> ManifoldKind {
    if sphere {
        ManifoldKind::Sphere
    } else {
        ManifoldKind::Circle
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn epsilon_graph_invariants(n in 20usize..120, seed in any::<u64>(), sphere in any::<bool>()) {
        let m = make_manifold(kind(sphere), 4).unwrap();
        let pts = sample_points(&m, n, seed).unwrap();
        let eps = epsilon_schedule(n, m.dim(), 1.5).unwrap();
        let g = build_epsilon_graph_with(&pts, m.dim(), eps, KernelScale::LimitMatched).unwrap();
        let g = g.graph();

        // Brute-force edge oracle.
        let mut expected = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let d2: f64 = pts.point(i).iter().zip(pts.point(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2.sqrt() <= eps {
                    expected.push((i, j));
                }
            }
        }
        let got: Vec<(usize, usize)> = g.edges().iter().map(|&(i, j, _)| (i, j)).collect();
        prop_assert_eq!(got, expected);

        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(g.weight(i, j), g.weight(j, i));
            }
        }
        let mut out = vec![0.0; n];
        sparse_matvec(g.laplacian(), &vec![1.0; n], &mut out);
        prop_assert!(out.iter().all(|v| v.abs() <= 1e-10 * g.max_degree().max(1.0)));

        let spec = eigendecompose(g.laplacian(), n.min(10)).unwrap();
        prop_assert!(spec.eigenvalues()[0] >= -1e-8);
        prop_assert!(spec.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn relabelling_points_permutes_the_spectrum_only(n in 20usize..80, seed in any::<u64>()) {
        let m = make_manifold(ManifoldKind::Circle, 4).unwrap();
        let pts = sample_points(&m, n, seed).unwrap();
        let perm: Vec<usize> = (0..n).rev().collect();
        let eps = epsilon_schedule(n, 1, 1.5).unwrap();
        let a = build_epsilon_graph_with(&pts, 1, eps, KernelScale::LimitMatched).unwrap();
        let b = build_epsilon_graph_with(&pts.permuted(&perm), 1, eps, KernelScale::LimitMatched).unwrap();
        let (la, lb) = (eigendecompose(a.graph().laplacian(), 6).unwrap(), eigendecompose(b.graph().laplacian(), 6).unwrap());
        for (x, y) in la.eigenvalues().iter().zip(lb.eigenvalues()) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }
}
