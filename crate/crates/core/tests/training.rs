use clenshaw_core::data::{generate_sbm, homophily, random_split, SbmSpec};
use clenshaw_core::graph::Graph;
use clenshaw_core::models::{ModelConfig, Variant};
use clenshaw_core::train::{fit, train};
use proptest::prelude::*;

fn quick(variant: Variant, k: usize, seed: u64) -> ModelConfig {
    ModelConfig { variant, k, hidden: 16, seed, max_epochs: 200, patience: 50, ..ModelConfig::default() }
}

fn two_cliques(seed: u64) -> SbmSpec {
    SbmSpec { n_per_block: 30, p_in: 1.0, p_out: 0.0, ..SbmSpec::heterophilic(seed) }
}

#[test]
fn gcn_separates_two_cliques() {
    let data = generate_sbm(&two_cliques(3)).unwrap();
    let split = random_split(data.node_count(), (0.6, 0.2, 0.2), 3).unwrap();
    let result = train(&data, &split, &quick(Variant::Gcn, 2, 3)).unwrap();
    assert!(result.test_acc >= 0.95, "test accuracy {}", result.test_acc);
}

#[test]
fn training_is_bitwise_reproducible() {
    let data = generate_sbm(&SbmSpec { n_per_block: 40, ..SbmSpec::heterophilic(9) }).unwrap();
    let split = random_split(data.node_count(), (0.6, 0.2, 0.2), 9).unwrap();
    let config = ModelConfig { max_epochs: 40, ..quick(Variant::Clenshaw, 4, 9) };
    let a = fit(&data, &split, &config).unwrap();
    let b = fit(&data, &split, &config).unwrap();
    assert_eq!(a.result, b.result);
    assert_eq!(serde_json::to_string(&a.result).unwrap(), serde_json::to_string(&b.result).unwrap());
}

#[test]
fn early_stopping_respects_patience() {
    let data = generate_sbm(&SbmSpec { n_per_block: 40, ..SbmSpec::homophilic(2) }).unwrap();
    let split = random_split(data.node_count(), (0.6, 0.2, 0.2), 2).unwrap();
    for patience in [1, 5, 20] {
        let r = train(&data, &split, &ModelConfig { patience, ..quick(Variant::Horner, 3, 2) }).unwrap();
        assert!(r.epochs <= r.best_epoch + patience + 1, "{} > {} + {patience} + 1", r.epochs, r.best_epoch);
        assert!(r.epochs <= 200);
    }
}

#[test]
fn learned_alphas_are_reported_per_variant() {
    let data = generate_sbm(&SbmSpec { n_per_block: 20, ..SbmSpec::heterophilic(4) }).unwrap();
    let split = random_split(data.node_count(), (0.6, 0.2, 0.2), 4).unwrap();
    for variant in Variant::ALL {
        let r = train(&data, &split, &ModelConfig { max_epochs: 5, ..quick(variant, 3, 4) }).unwrap();
        assert_eq!(r.filter.is_some(), variant.learns_alphas() || variant == Variant::FixedParam, "{}", variant.name());
        assert_eq!(r.loss_curve.len(), r.epochs);
    }
}

#[test]
fn split_examples() {
    let s = random_split(10, (0.6, 0.2, 0.2), 17).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (6, 2, 2));
    assert_eq!(s, random_split(10, (0.6, 0.2, 0.2), 17).unwrap());
    let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..10).collect::<Vec<_>>());

    let splits: Vec<_> = (0..5).map(|seed| random_split(1000, (0.6, 0.2, 0.2), seed).unwrap()).collect();
    for i in 0..5 {
        for j in i + 1..5 {
            assert_ne!(splits[i].train, splits[j].train);
        }
    }
    assert!(random_split(2, (0.6, 0.2, 0.2), 0).is_err());
}

#[test]
fn block_model_extremes() {
    let cliques = generate_sbm(&two_cliques(0)).unwrap();
    assert_eq!(cliques.graph.edge_count(), 2 * 30 * 29 / 2);
    assert_eq!(homophily(&cliques.graph, &cliques.labels).unwrap(), 1.0);

    let bipartite =
        generate_sbm(&SbmSpec { n_per_block: 25, p_in: 0.0, p_out: 1.0, ..SbmSpec::heterophilic(0) }).unwrap();
    assert_eq!(bipartite.graph.edge_count(), 25 * 25);
    assert_eq!(homophily(&bipartite.graph, &bipartite.labels).unwrap(), 0.0);

    let hetero = generate_sbm(&SbmSpec::heterophilic(1)).unwrap();
    assert!(homophily(&hetero.graph, &hetero.labels).unwrap() < 0.2);
    let homo = generate_sbm(&SbmSpec::homophilic(1)).unwrap();
    assert!(homophily(&homo.graph, &homo.labels).unwrap() > 0.8);
}

#[test]
fn block_model_is_seeded() {
    let spec = SbmSpec { n_per_block: 30, ..SbmSpec::heterophilic(8) };
    let a = generate_sbm(&spec).unwrap();
    assert_eq!(a.graph, generate_sbm(&spec).unwrap().graph);
    assert_eq!(a.features, generate_sbm(&spec).unwrap().features);
    assert_ne!(a.graph, generate_sbm(&SbmSpec { seed: 9, ..spec }).unwrap().graph);
}

#[test]
fn homophily_needs_an_edge() {
    let g = Graph::from_pairs(&[], 4).unwrap();
    assert!(homophily(&g, &[0, 1, 0, 1]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homophily_is_a_fraction_invariant_under_class_renaming(
        n in 2usize..30,
        pairs in proptest::collection::vec((0usize..30, 0usize..30), 1..80),
        raw in proptest::collection::vec(0usize..4, 30),
        shift in 1usize..4,
    ) {
        let pairs: Vec<(usize, usize)> = pairs.into_iter().map(|(u, v)| (u % n, v % n)).filter(|(u, v)| u != v).collect();
        prop_assume!(!pairs.is_empty());
        let g = Graph::from_pairs(&pairs, n).unwrap();
        let labels = &raw[..n];
        let renamed: Vec<usize> = labels.iter().map(|c| (c + shift) % 4).collect();
        let h = homophily(&g, labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert_eq!(h, homophily(&g, &renamed).unwrap());
    }
}
