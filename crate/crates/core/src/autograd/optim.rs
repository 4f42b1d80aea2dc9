use std::collections::BTreeMap;

use super::params::{Group, ParamId, ParamStore};
use crate::matrix::Matrix;

/// SGD with (heavy-ball) momentum over the alpha group:
/// `v ← m·v + g`, `θ ← θ − lr·v`.
#[derive(Debug, Clone)]
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    velocity: BTreeMap<ParamId, Matrix>,
}

impl SgdMomentum {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Self { lr, momentum, velocity: BTreeMap::new() }
    }

    /// Parameters this optimizer has state for.
    pub fn tracked(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.velocity.keys().copied()
    }

    pub fn step(&mut self, store: &mut ParamStore) {
        for id in store.ids().collect::<Vec<_>>() {
            let p = store.get_mut(id);
            if p.group != Group::Alpha {
                continue;
            }
            let v = self.velocity.entry(id).or_insert_with(|| Matrix::zeros(p.value.rows(), p.value.cols()));
            for (vel, &g) in v.as_mut_slice().iter_mut().zip(p.grad.as_slice()) {
                *vel = self.momentum * *vel + g;
            }
            p.value.axpy(-self.lr, v);
        }
    }
}

/// Adam with decoupled weight decay over the weight group.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step_count: u64,
    moments: BTreeMap<ParamId, (Matrix, Matrix)>,
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, step_count: 0, moments: BTreeMap::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn tracked(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.moments.keys().copied()
    }

    pub fn step(&mut self, store: &mut ParamStore) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let decay = 1.0 - self.lr * self.weight_decay;
        for id in store.ids().collect::<Vec<_>>() {
            let p = store.get_mut(id);
            if p.group != Group::Weight {
                continue;
            }
            let (m, v) = self.moments.entry(id).or_insert_with(|| {
                let (r, c) = p.value.shape();
                (Matrix::zeros(r, c), Matrix::zeros(r, c))
            });
            let values = p.value.as_mut_slice();
            let grads = p.grad.as_slice();
            for (((x, &g), mi), vi) in values.iter_mut().zip(grads).zip(m.as_mut_slice()).zip(v.as_mut_slice()) {
                *x *= decay;
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *x -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(group: Group, value: f64, grad: f64) -> (ParamStore, ParamId) {
        let mut store = ParamStore::new();
        let id = store.add("p", Matrix::scalar(value), group);
        store.get_mut(id).grad = Matrix::scalar(grad);
        (store, id)
    }

    #[test]
    fn plain_sgd_step() {
        let (mut store, id) = store_with(Group::Alpha, 1.0, 1.0);
        SgdMomentum::new(0.1, 0.0).step(&mut store);
        assert!((store.value(id).item() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn momentum_accumulates() {
        let (mut store, id) = store_with(Group::Alpha, 0.0, 2.0);
        let mut opt = SgdMomentum::new(0.1, 0.9);
        opt.step(&mut store);
        let after_first = store.value(id).item();
        opt.step(&mut store);
        let second = after_first - store.value(id).item();
        assert!((second - 0.1 * 1.9 * 2.0).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_sign_scaled() {
        for g in [3.7, -0.02] {
            let (mut store, id) = store_with(Group::Weight, 0.5, g);
            let mut opt = Adam::new(0.01, 0.0);
            opt.step(&mut store);
            let delta = store.value(id).item() - 0.5;
            assert!((delta + 0.01 * g.signum()).abs() < 1e-8, "delta {delta}");
            assert_eq!(opt.step_count(), 1);
        }
    }

    #[test]
    fn adam_decoupled_decay() {
        let (mut store, id) = store_with(Group::Weight, 2.0, 0.0);
        Adam::new(0.1, 0.5).step(&mut store);
        // zero gradient: only the (1 − lr·wd) multiplier acts
        assert!((store.value(id).item() - 2.0 * 0.95).abs() < 1e-15);
    }

    #[test]
    fn groups_are_disjoint() {
        let mut store = ParamStore::new();
        let a = store.add("alpha", Matrix::scalar(1.0), Group::Alpha);
        let w = store.add("w", Matrix::scalar(1.0), Group::Weight);
        store.get_mut(a).grad = Matrix::scalar(1.0);
        store.get_mut(w).grad = Matrix::scalar(1.0);
        let mut sgd = SgdMomentum::new(0.1, 0.9);
        let mut adam = Adam::new(0.1, 0.0);
        sgd.step(&mut store);
        adam.step(&mut store);
        assert_eq!(sgd.tracked().collect::<Vec<_>>(), vec![a]);
        assert_eq!(adam.tracked().collect::<Vec<_>>(), vec![w]);
    }
}
