//! Full-graph training with early stopping on validation accuracy.

use serde::{Deserialize, Serialize};

use crate::autograd::{Adam, ParamStore, SgdMomentum, Tape};
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, PropagationOperator};
use crate::matrix::Matrix;
use crate::models::{predict, ForwardMode, Model, ModelConfig};
use crate::poly::CoeffVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub config: ModelConfig,
    pub seed: u64,
    pub best_val_acc: f64,
    /// Test accuracy at the epoch of best validation accuracy.
    pub test_acc: f64,
    pub best_epoch: usize,
    pub epochs: usize,
    pub loss_curve: Vec<f64>,
    /// Residues in layer order at the best epoch.
    pub alphas: Vec<f64>,
    /// Filter realized by `alphas`, in basis-degree order.
    pub filter: Option<CoeffVector>,
}

/// A finished run together with the best-validation parameters.
#[derive(Debug, Clone)]
pub struct Trained {
    pub result: TrainResult,
    pub model: Model,
    pub store: ParamStore,
}

/// Fraction of `mask` nodes whose argmax prediction equals the label.
pub fn evaluate(logits: &Matrix, labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let pred = predict(logits);
    let correct = mask.iter().filter(|&&u| pred[u] == labels[u]).count();
    Ok(correct as f64 / mask.len() as f64)
}

pub fn train(dataset: &Dataset, split: &Split, config: &ModelConfig) -> Result<TrainResult> {
    fit(dataset, split, config).map(|t| t.result)
}

fn eval_logits(model: &Model, store: &ParamStore, p: &PropagationOperator, x: &Matrix) -> Result<Matrix> {
    let mut tape = Tape::new();
    let out = model.forward(&mut tape, store, p, x, ForwardMode::eval())?;
    Ok(tape.value(out.logits).clone())
}

/// Trains `config` on `dataset`: per epoch one train-mode forward/backward,
/// an SGD-momentum step on the residues, an Adam step on everything else and
/// an eval-mode validation pass. Stops after `patience` epochs without a
/// strict validation improvement or at `max_epochs`.
pub fn fit(dataset: &Dataset, split: &Split, config: &ModelConfig) -> Result<Trained> {
    if split.train.is_empty() || split.val.is_empty() || split.test.is_empty() {
        return Err(Error::EmptyMask);
    }
    let p = normalized_adjacency(&dataset.graph);
    let x = &dataset.features;
    let labels = &dataset.labels;
    let (model, mut store) = Model::init(config.clone(), x.cols(), dataset.classes)?;
    let mut sgd = SgdMomentum::new(config.lr_alpha, config.momentum);
    let mut adam = Adam::new(config.lr_weights, config.weight_decay);

    let logits = eval_logits(&model, &store, &p, x)?;
    let mut best_val = evaluate(&logits, labels, &split.val)?;
    let mut best_test = evaluate(&logits, labels, &split.test)?;
    let mut best_epoch = 0;
    let mut best_store = store.clone();
    let mut loss_curve = Vec::new();
    let mut epochs = 0;

    for epoch in 1..=config.max_epochs {
        epochs = epoch;
        store.zero_grad();
        let loss = {
            let mut tape = Tape::new();
            let out = model.forward(&mut tape, &store, &p, x, ForwardMode::train(epoch as u32))?;
            let logp = tape.log_softmax_rows(out.logits);
            let loss = tape.nll_loss(logp, labels, &split.train)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            tape.backward(loss, &mut store)?;
            value
        };
        loss_curve.push(loss);
        sgd.step(&mut store);
        adam.step(&mut store);

        let logits = eval_logits(&model, &store, &p, x)?;
        let val = evaluate(&logits, labels, &split.val)?;
        if val > best_val {
            best_val = val;
            best_test = evaluate(&logits, labels, &split.test)?;
            best_epoch = epoch;
            best_store = store.clone();
        } else if epoch - best_epoch >= config.patience {
            break;
        }
    }

    let alphas = model.layer_alphas(&best_store)?;
    let filter = model.filter_coefficients(&best_store)?;
    Ok(Trained {
        result: TrainResult {
            config: config.clone(),
            seed: config.seed,
            best_val_acc: best_val,
            test_acc: best_test,
            best_epoch,
            epochs,
            loss_curve,
            alphas,
            filter,
        },
        model,
        store: best_store,
    })
}

/// Runs `job` for every seed on its own thread; results keep seed order.
pub fn for_each_seed<T, F>(seeds: &[u64], job: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    std::thread::scope(|scope| {
        let job = &job;
        let handles: Vec<_> = seeds.iter().map(|&s| scope.spawn(move || job(s))).collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_sbm, random_split, SbmSpec};
    use crate::models::Variant;

    #[test]
    fn evaluate_examples() {
        let logits = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(evaluate(&logits, &[0, 1, 0, 1], &[0, 1, 2, 3]).unwrap(), 1.0);
        assert_eq!(evaluate(&logits, &[1, 0, 1, 0], &[0, 1, 2, 3]).unwrap(), 0.0);
        assert_eq!(evaluate(&logits, &[0, 0, 1, 1], &[0, 1, 2, 3]).unwrap(), 0.5);
        assert!(matches!(evaluate(&logits, &[0, 0, 1, 1], &[]), Err(Error::EmptyMask)));
    }

    #[test]
    fn mean_and_sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    fn small_problem() -> (Dataset, Split) {
        let spec = SbmSpec { n_per_block: 30, blocks: 2, p_in: 0.3, p_out: 0.03, feature_dim: 4, noise: 1.0, seed: 1 };
        let d = generate_sbm(&spec).unwrap();
        let s = random_split(d.node_count(), (0.6, 0.2, 0.2), 1).unwrap();
        (d, s)
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let (d, s) = small_problem();
        let config = ModelConfig {
            k: 3,
            hidden: 8,
            lr_alpha: 0.0,
            lr_weights: 0.0,
            weight_decay: 0.0,
            max_epochs: 5,
            ..ModelConfig::default()
        };
        let trained = fit(&d, &s, &config).unwrap();
        let (_, fresh) = Model::init(config.clone(), 4, 2).unwrap();
        for (id, p) in fresh.iter() {
            assert_eq!(&p.value, trained.store.value(id));
        }
        assert_eq!(trained.result.best_epoch, 0);
    }

    #[test]
    fn early_stopping_bound_and_reproducibility() {
        let (d, s) = small_problem();
        let config = ModelConfig { k: 2, hidden: 8, patience: 5, max_epochs: 200, ..ModelConfig::default() };
        let a = train(&d, &s, &config).unwrap();
        assert!(a.epochs <= a.best_epoch + config.patience + 1);
        let b = train(&d, &s, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_param_reports_frozen_residues() {
        let (d, s) = small_problem();
        let config = ModelConfig {
            variant: Variant::FixedParam,
            k: 2,
            hidden: 8,
            fixed_alpha: 0.5,
            max_epochs: 3,
            ..ModelConfig::default()
        };
        let r = train(&d, &s, &config).unwrap();
        assert_eq!(r.alphas, vec![0.25, 0.25, 0.5]);
    }
}
