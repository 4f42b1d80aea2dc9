use clenshaw_core::autograd::{ParamStore, Tape};
use clenshaw_core::filters::layer_to_basis_order;
use clenshaw_core::graph::normalized_adjacency;
use clenshaw_core::matrix::Matrix;
use clenshaw_core::models::{Checkpoint, ForwardMode, Model, ModelConfig, Variant};
use clenshaw_core::poly::Basis;
use clenshaw_core::spectral::{apply_filter_exact, eig_sym};
use clenshaw_core::verify::{gaussian_matrix, random_graph};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(variant: Variant, k: usize, seed: u64) -> ModelConfig {
    ModelConfig { variant, k, hidden: 8, seed, ..ModelConfig::default() }
}

fn randomize_alphas(model: &Model, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Vec<f64> {
    model
        .alpha_params()
        .iter()
        .map(|&id| {
            let a = rng.random_range(-1.0..1.0);
            store.get_mut(id).value = Matrix::scalar(a);
            a
        })
        .collect()
}

fn variant_strategy() -> impl Strategy<Value = Variant> {
    proptest::sample::select(Variant::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn relabeling_nodes_permutes_logits(variant in variant_strategy(), k in 0usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(8..30);
        let g = random_graph(&mut rng, n, 0.2).unwrap();
        let x = gaussian_matrix(&mut rng, n, 4);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let gp = g.permuted(&perm).unwrap();
        let mut xp = Matrix::zeros(n, 4);
        for (u, &pu) in perm.iter().enumerate() {
            for j in 0..4 {
                xp.set(pu, j, x.get(u, j));
            }
        }
        let (model, mut store) = Model::init(config(variant, k, seed), 4, 3).unwrap();
        randomize_alphas(&model, &mut store, &mut rng);

        let p = normalized_adjacency(&g);
        let pp = normalized_adjacency(&gp);
        let mut t1 = Tape::new();
        let a = model.forward(&mut t1, &store, &p, &x, ForwardMode::eval()).unwrap();
        let mut t2 = Tape::new();
        let b = model.forward(&mut t2, &store, &pp, &xp, ForwardMode::eval()).unwrap();
        let (la, lb) = (t1.value(a.logits), t2.value(b.logits));
        for (u, &pu) in perm.iter().enumerate() {
            for c in 0..3 {
                prop_assert!((la.get(u, c) - lb.get(pu, c)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn linear_mode_is_the_learned_filter(k in 1usize..8, seed in any::<u64>(), horner in any::<bool>()) {
        let variant = if horner { Variant::Horner } else { Variant::Clenshaw };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(10..30);
        let p = normalized_adjacency(&random_graph(&mut rng, n, 0.25).unwrap());
        let x = gaussian_matrix(&mut rng, n, 3);
        let (model, mut store) = Model::init(config(variant, k, seed), 3, 2).unwrap();
        let alphas = randomize_alphas(&model, &mut store, &mut rng);

        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &store, &p, &x, ForwardMode::linear()).unwrap();
        let basis = if horner { Basis::Monomial } else { Basis::ChebyshevU };
        let d = eig_sym(&p.to_dense()).unwrap();
        let want = apply_filter_exact(&d, &layer_to_basis_order(&alphas, basis).unwrap(), &x).unwrap();
        prop_assert!(tape.value(out.logits).rel_frobenius_error(&want) <= 1e-9);

        // the reported filter is the same polynomial
        let reported = model.filter_coefficients(&store).unwrap().unwrap();
        let via = apply_filter_exact(&d, &reported, &x).unwrap();
        prop_assert!(via.rel_frobenius_error(&want) <= 1e-9);
    }
}

#[test]
fn fresh_models_pass_the_signal_through() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = normalized_adjacency(&random_graph(&mut rng, 25, 0.2).unwrap());
    let x = gaussian_matrix(&mut rng, 25, 5);
    for variant in [Variant::Clenshaw, Variant::Horner] {
        for k in [1, 4, 10] {
            let (model, store) = Model::init(config(variant, k, 0), 5, 2).unwrap();
            let mut tape = Tape::new();
            let out = model.forward(&mut tape, &store, &p, &x, ForwardMode::linear()).unwrap();
            assert!(tape.value(out.logits).max_abs_diff(&x) <= 1e-12, "{} K={k}", variant.name());
        }
    }
}

#[test]
fn checkpoint_file_round_trip_preserves_logits() {
    let dir = std::env::temp_dir().join(format!("clenshaw-core-ckpt-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("model.json");

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = normalized_adjacency(&random_graph(&mut rng, 15, 0.3).unwrap());
    let x = gaussian_matrix(&mut rng, 15, 4);
    let (model, mut store) = Model::init(config(Variant::Clenshaw, 5, 3), 4, 3).unwrap();
    randomize_alphas(&model, &mut store, &mut rng);
    Checkpoint::capture(&model, &store).save(&path).unwrap();
    let (model2, store2) = Checkpoint::load(&path).unwrap().restore().unwrap();

    let logits = |m: &Model, s: &ParamStore| {
        let mut tape = Tape::new();
        let out = m.forward(&mut tape, s, &p, &x, ForwardMode::eval()).unwrap();
        tape.value(out.logits).clone()
    };
    assert_eq!(logits(&model, &store), logits(&model2, &store2));
    assert_eq!(model.filter_coefficients(&store).unwrap(), model2.filter_coefficients(&store2).unwrap());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn wrong_feature_width_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = normalized_adjacency(&random_graph(&mut rng, 10, 0.3).unwrap());
    let (model, store) = Model::init(config(Variant::Clenshaw, 2, 0), 4, 2).unwrap();
    let mut tape = Tape::new();
    assert!(model.forward(&mut tape, &store, &p, &Matrix::zeros(10, 3), ForwardMode::eval()).is_err());
    let mut tape = Tape::new();
    assert!(model.forward(&mut tape, &store, &p, &Matrix::zeros(9, 4), ForwardMode::eval()).is_err());
}
