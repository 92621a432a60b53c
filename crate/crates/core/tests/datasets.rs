use faer::Mat;
use geognn::datasets::{
    induced_subgraph, load_cora, load_cora_dir, write_cora_surrogate, SurrogateSpec,
};
use geognn::nn::{loss_value, LossKind, Targets};
use proptest::prelude::*;
use std::collections::HashSet;
use std::path::Path;

fn surrogate(dir: &Path) {
    let spec = SurrogateSpec {
        classes: vec![("a".into(), 120), ("b".into(), 90), ("c".into(), 70)],
        n_features: 100,
        citations: 700,
        topic_words: 20,
        words: (3, 9),
        ..SurrogateSpec::default()
    };
    write_cora_surrogate(dir, &spec).unwrap();
}

#[test]
fn hand_written_files_load() {
    let dir = tempfile::tempdir().unwrap();
    let content = dir.path().join("c.content");
    let cites = dir.path().join("c.cites");
    std::fs::write(&content, "10\t1\t0\t1\tA\n20\t0\t0\t1\tB\n30\t1\t1\t0\tA\n").unwrap();
    std::fs::write(&cites, "10\t20\n20\t10\n30\t30\n99\t10\n30\t20\n").unwrap();
    let d = load_cora(&content, &cites).unwrap();
    assert_eq!(d.n_nodes(), 3);
    assert_eq!(d.n_features, 3);
    assert_eq!(d.class_names, vec!["A", "B"]);
    assert_eq!(d.labels, vec![0, 1, 0]);
    assert_eq!(d.edges, vec![(0, 1), (1, 2)]);
    assert_eq!(d.stats.citation_rows, 5);
    assert_eq!(d.stats.self_loops_removed, 1);
    assert_eq!(d.stats.duplicate_edges_removed, 1);
    assert_eq!(d.stats.unknown_ids_skipped, 1);

    // Nodes 0 and 2 share no citation.
    let sub = induced_subgraph(&d, &[0, 2]).unwrap();
    assert_eq!(sub.graph.edge_count(), 0);
    assert_eq!(sub.labels, vec![0, 0]);
}

#[test]
fn loading_is_deterministic_and_full_selection_keeps_every_edge() {
    let dir = tempfile::tempdir().unwrap();
    surrogate(dir.path());
    let a = load_cora_dir(dir.path()).unwrap();
    let b = load_cora_dir(dir.path()).unwrap();
    assert_eq!(a, b);
    let all: Vec<usize> = (0..a.n_nodes()).collect();
    let sub = induced_subgraph(&a, &all).unwrap();
    assert_eq!(sub.graph.edge_count(), a.edges.len());
}

#[test]
fn cross_entropy_matches_direct_sum() {
    let y = Mat::from_fn(4, 3, |i, j| ((i * 3 + j) as f64 * 0.7).sin() * 2.0);
    let labels = [2usize, 0, 1, 1];
    let mut total = 0.0;
    for (i, &c) in labels.iter().enumerate() {
        let z: f64 = (0..3).map(|j| y[(i, j)].exp()).sum();
        total += z.ln() - y[(i, c)];
    }
    let got = loss_value(LossKind::CrossEntropy, &y, &Targets::classes(&labels)).unwrap();
    assert!((got - total / 4.0).abs() < 1e-12);

    // Unlabelled rows drop out of the mean.
    let masked = Targets::Classes(vec![Some(2), None, None, Some(1)]);
    let z0: f64 = (0..3).map(|j| y[(0, j)].exp()).sum::<f64>().ln() - y[(0, 2)];
    let z3: f64 = (0..3).map(|j| y[(3, j)].exp()).sum::<f64>().ln() - y[(3, 1)];
    let got = loss_value(LossKind::CrossEntropy, &y, &masked).unwrap();
    assert!((got - (z0 + z3) / 2.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn induced_edges_match_brute_force(seed in any::<u64>(), k in 2usize..150) {
        let dir = tempfile::tempdir().unwrap();
        surrogate(dir.path());
        let d = load_cora_dir(dir.path()).unwrap();
        let mut rng = geognn::seed::rng(seed);
        let mut nodes = rand::seq::index::sample(&mut rng, d.n_nodes(), k).into_vec();
        nodes.sort_unstable();
        let sub = induced_subgraph(&d, &nodes).unwrap();

        let chosen: HashSet<usize> = nodes.iter().copied().collect();
        let pos = |g: usize| nodes.iter().position(|&x| x == g).unwrap();
        let mut expected: Vec<(usize, usize)> = d
            .edges
            .iter()
            .filter(|(i, j)| chosen.contains(i) && chosen.contains(j))
            .map(|&(i, j)| {
                let (a, b) = (pos(i), pos(j));
                (a.min(b), a.max(b))
            })
            .collect();
        expected.sort_unstable();
        let got: Vec<(usize, usize)> = sub.graph.edges().iter().map(|&(i, j, _)| (i, j)).collect();
        prop_assert_eq!(got, expected);
        let labels: Vec<usize> = nodes.iter().map(|&i| d.labels[i]).collect();
        prop_assert_eq!(sub.labels, labels);
    }
}
