//! ClenshawGCN and the ablations and baselines compared against it.
//!
//! Every variant shares the same bracket: `H* = relu(dropout(X)·W* + b*)`
//! before the propagation stack and `logits = dropout(H^(K))·W_out + b_out`
//! after it. With `layer_dropout` the input of every `T_ℓ` (or `W^(ℓ)`) is
//! dropped out as well. The stacks differ:
//!
//! ```text
//! clenshaw     H^(ℓ) = σ((2P̃H^(ℓ−1) − H^(ℓ−2) + α_ℓH*)·T_ℓ),  ℓ = 0..=K
//! horner       H^(ℓ) = σ((P̃H^(ℓ−1) + α_ℓH*)·T_ℓ),             ℓ = 0..=K
//! fixed-param  clenshaw with α frozen to the APPNP-style residues
//! gcn          H^(ℓ) = σ(P̃H^(ℓ−1)·W^(ℓ)),                    ℓ = 1..=K, H^(0) = H*
//! gcnii        H^(ℓ) = σ(((1−α)P̃H^(ℓ−1) + αH*)·T_ℓ),         ℓ = 1..=K, H^(0) = H*
//! ```
//!
//! with identity mapping `T_ℓ = (1−β_ℓ)I + β_ℓW^(ℓ)`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{DropoutKey, Group, Mode, NodeId, ParamId, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::filters::{fixed_param_coefficients, layer_to_basis_order};
use crate::graph::PropagationOperator;
use crate::matrix::Matrix;
use crate::poly::{Basis, CoeffVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Clenshaw,
    Horner,
    FixedParam,
    Gcn,
    Gcnii,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::Clenshaw, Variant::Horner, Variant::FixedParam, Variant::Gcn, Variant::Gcnii];

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Clenshaw => "clenshaw",
            Self::Horner => "horner",
            Self::FixedParam => "fixed-param",
            Self::Gcn => "gcn",
            Self::Gcnii => "gcnii",
        }
    }

    /// Whether the residue coefficients are trainable parameters.
    pub fn learns_alphas(self) -> bool {
        matches!(self, Self::Clenshaw | Self::Horner)
    }
}

fn default_momentum() -> f64 {
    0.9
}

fn default_max_epochs() -> usize {
    2000
}

fn default_patience() -> usize {
    300
}

fn default_layer_dropout() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Propagation order.
    pub k: usize,
    pub hidden: usize,
    /// Identity-mapping strength λ in `β_ℓ = ln(λ/(ℓ+1) + 1)`.
    pub lambda: f64,
    pub dropout: f64,
    /// Also drop out the input of each propagation-layer transformation.
    #[serde(default = "default_layer_dropout")]
    pub layer_dropout: bool,
    pub lr_alpha: f64,
    pub lr_weights: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    pub weight_decay: f64,
    /// Teleport weight for `fixed-param` and `gcnii`.
    pub fixed_alpha: f64,
    pub seed: u64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Clenshaw,
            k: 16,
            hidden: 64,
            lambda: 0.5,
            dropout: 0.5,
            layer_dropout: true,
            lr_alpha: 0.1,
            lr_weights: 0.01,
            momentum: default_momentum(),
            weight_decay: 1e-5,
            fixed_alpha: 0.1,
            seed: 0,
            max_epochs: default_max_epochs(),
            patience: default_patience(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::InvalidConfig("hidden width must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::OutOfRange { name: "dropout", value: self.dropout, range: "[0, 1)" });
        }
        if !(0.0..=1.0).contains(&self.fixed_alpha) {
            return Err(Error::OutOfRange { name: "fixed_alpha", value: self.fixed_alpha, range: "[0, 1]" });
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::OutOfRange { name: "lambda", value: self.lambda, range: "[0, ∞)" });
        }
        Ok(())
    }

    /// `β_ℓ = ln(λ/(ℓ+1) + 1)`, with `ℓ` counted from 0.
    pub fn beta(&self, layer: usize) -> f64 {
        (self.lambda / (layer as f64 + 1.0) + 1.0).ln()
    }
}

/// How a forward pass is run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardMode {
    pub mode: Mode,
    /// σ = identity, every `W^(ℓ)` treated as `I`, no dropout and identity
    /// pre/post transforms: the setting in which each stack is exactly a
    /// polynomial filter of `X`.
    pub linear: bool,
    /// Selects the dropout stream.
    pub epoch: u32,
}

impl ForwardMode {
    pub fn train(epoch: u32) -> Self {
        Self { mode: Mode::Train, linear: false, epoch }
    }

    pub fn eval() -> Self {
        Self { mode: Mode::Eval, linear: false, epoch: 0 }
    }

    pub fn linear() -> Self {
        Self { mode: Mode::Eval, linear: true, epoch: 0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardNodes {
    pub h_star: NodeId,
    pub propagated: NodeId,
    pub logits: NodeId,
}

/// Architecture and parameter handles; the values live in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub in_dim: usize,
    pub classes: usize,
    pre_w: ParamId,
    pre_b: ParamId,
    layer_w: Vec<ParamId>,
    alphas: Vec<ParamId>,
    post_w: ParamId,
    post_b: ParamId,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Matrix {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized buffer")
}

impl Model {
    /// Fresh parameters: seeded uniform(±1/√fan_in) weights and residues
    /// `α = (0, …, 0, 1)`, i.e. the all-pass filter `h ≡ 1`.
    pub fn init(config: ModelConfig, in_dim: usize, classes: usize) -> Result<(Self, ParamStore)> {
        config.validate()?;
        if in_dim == 0 || classes == 0 {
            return Err(Error::InvalidConfig("input width and class count must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let h = config.hidden;
        let mut store = ParamStore::new();
        let pre_w = store.add("pre.weight", uniform(&mut rng, in_dim, h, in_dim), Group::Weight);
        let pre_b = store.add("pre.bias", uniform(&mut rng, 1, h, in_dim), Group::Weight);
        let layer_w = (0..Self::layer_count(&config))
            .map(|l| store.add(format!("layer{l}.weight"), uniform(&mut rng, h, h, h), Group::Weight))
            .collect();
        let alphas = if config.variant.learns_alphas() {
            (0..=config.k)
                .map(|l| {
                    let init = if l == config.k { 1.0 } else { 0.0 };
                    store.add(format!("alpha{l}"), Matrix::scalar(init), Group::Alpha)
                })
                .collect()
        } else {
            Vec::new()
        };
        let post_w = store.add("post.weight", uniform(&mut rng, h, classes, h), Group::Weight);
        let post_b = store.add("post.bias", uniform(&mut rng, 1, classes, h), Group::Weight);
        Ok((Self { config, in_dim, classes, pre_w, pre_b, layer_w, alphas, post_w, post_b }, store))
    }

    fn layer_count(config: &ModelConfig) -> usize {
        match config.variant {
            Variant::Clenshaw | Variant::Horner | Variant::FixedParam => config.k + 1,
            Variant::Gcn | Variant::Gcnii => config.k,
        }
    }

    pub fn alpha_params(&self) -> &[ParamId] {
        &self.alphas
    }

    pub fn layer_weights(&self) -> &[ParamId] {
        &self.layer_w
    }

    /// Residues in layer order (`α_0` feeds layer 0), whether learned or fixed.
    pub fn layer_alphas(&self, store: &ParamStore) -> Result<Vec<f64>> {
        match self.config.variant {
            Variant::Clenshaw | Variant::Horner => Ok(self.alphas.iter().map(|&id| store.value(id).item()).collect()),
            Variant::FixedParam => fixed_param_coefficients(self.config.fixed_alpha, self.config.k),
            Variant::Gcn | Variant::Gcnii => Ok(Vec::new()),
        }
    }

    /// The polynomial the stack realizes in linear mode, in basis-degree
    /// order, for the residue-based variants.
    pub fn filter_coefficients(&self, store: &ParamStore) -> Result<Option<CoeffVector>> {
        let alphas = self.layer_alphas(store)?;
        let basis = match self.config.variant {
            Variant::Clenshaw | Variant::FixedParam => Basis::ChebyshevU,
            Variant::Horner => Basis::Monomial,
            Variant::Gcn | Variant::Gcnii => return Ok(None),
        };
        layer_to_basis_order(&alphas, basis).map(Some)
    }

    fn check_input(&self, p: &PropagationOperator, x: &Matrix, linear: bool) -> Result<()> {
        if x.rows() != p.size() {
            return Err(Error::DimensionMismatch(format!("{} feature rows for {} nodes", x.rows(), p.size())));
        }
        if !linear && x.cols() != self.in_dim {
            return Err(Error::DimensionMismatch(format!(
                "{} feature columns, model expects {}",
                x.cols(),
                self.in_dim
            )));
        }
        Ok(())
    }

    /// Records the full forward pass.
    pub fn forward<'g>(
        &self,
        tape: &mut Tape<'g>,
        store: &ParamStore,
        p: &'g PropagationOperator,
        x: &Matrix,
        fm: ForwardMode,
    ) -> Result<ForwardNodes> {
        self.check_input(p, x, fm.linear)?;
        let xn = tape.constant(x.clone());
        let h_star = if fm.linear {
            xn
        } else {
            let d = tape.dropout(xn, self.config.dropout, self.dropout_key(0, fm), fm.mode)?;
            let w = tape.param(store, self.pre_w);
            let b = tape.param(store, self.pre_b);
            let h = tape.matmul(d, w)?;
            let h = tape.add_bias(h, b)?;
            tape.relu(h)
        };
        let propagated = self.propagate(tape, store, p, h_star, fm)?;
        let logits = if fm.linear {
            propagated
        } else {
            let d = tape.dropout(propagated, self.config.dropout, self.dropout_key(1, fm), fm.mode)?;
            let w = tape.param(store, self.post_w);
            let b = tape.param(store, self.post_b);
            let o = tape.matmul(d, w)?;
            tape.add_bias(o, b)?
        };
        Ok(ForwardNodes { h_star, propagated, logits })
    }

    fn dropout_key(&self, layer: u32, fm: ForwardMode) -> DropoutKey {
        DropoutKey { seed: self.config.seed, layer, epoch: fm.epoch }
    }

    /// The propagation stack applied to an already computed `H*`.
    pub fn propagate<'g>(
        &self,
        tape: &mut Tape<'g>,
        store: &ParamStore,
        p: &'g PropagationOperator,
        h_star: NodeId,
        fm: ForwardMode,
    ) -> Result<NodeId> {
        match self.config.variant {
            Variant::Clenshaw | Variant::FixedParam => self.residue_stack(tape, store, p, h_star, fm, true),
            Variant::Horner => self.residue_stack(tape, store, p, h_star, fm, false),
            Variant::Gcn => self.gcn_stack(tape, store, p, h_star, fm),
            Variant::Gcnii => self.gcnii_stack(tape, store, p, h_star, fm),
        }
    }

    /// `σ(h·T_ℓ)` with `T_ℓ = (1−β)I + βW`, computed as `(1−β)h + β(hW)`.
    fn transform<'g>(
        &self,
        tape: &mut Tape<'g>,
        store: &ParamStore,
        h: NodeId,
        layer: usize,
        fm: ForwardMode,
    ) -> Result<NodeId> {
        if fm.linear {
            return Ok(h);
        }
        let h = self.layer_dropout(tape, h, layer, fm)?;
        let w = tape.param(store, self.layer_w[layer]);
        let mapped = identity_mapping(tape, h, w, self.config.beta(layer))?;
        Ok(tape.relu(mapped))
    }

    // keys 0 and 1 belong to the input and output layers
    fn layer_dropout(&self, tape: &mut Tape<'_>, h: NodeId, layer: usize, fm: ForwardMode) -> Result<NodeId> {
        if !self.config.layer_dropout {
            return Ok(h);
        }
        tape.dropout(h, self.config.dropout, self.dropout_key(layer as u32 + 2, fm), fm.mode)
    }

    fn residue<'g>(
        &self,
        tape: &mut Tape<'g>,
        store: &ParamStore,
        h_star: NodeId,
        layer: usize,
        fixed: Option<&[f64]>,
    ) -> Result<NodeId> {
        match fixed {
            Some(alphas) => Ok(tape.scale_const(h_star, alphas[layer])),
            None => {
                let a = tape.param(store, self.alphas[layer]);
                tape.scale(h_star, a)
            }
        }
    }

    fn residue_stack<'g>(
        &self,
        tape: &mut Tape<'g>,
        store: &ParamStore,
        p: &'g PropagationOperator,
        h_star: NodeId,
        fm: ForwardMode,
        second_order: bool,
    ) -> Result<NodeId> {
        let fixed = match self.config.variant {
            Variant::FixedParam => Some(fixed_param_coefficients(self.config.fixed_alpha, self.config.k)?),
            _ => None,
        };
        // H^(ℓ−1), H^(ℓ−2); None stands for the zero back-states
        let mut prev: Option<NodeId> = None;
        let mut prev2: Option<NodeId> = None;
        for layer in 0..=self.config.k {
            let res = self.residue(tape, store, h_star, layer, fixed.as_deref())?;
            let pre = match (prev, second_order) {
                (None, _) => res,
                (Some(h1), false) => {
                    let ph = tape.spmm_const(p, h1)?;
                    tape.add(ph, res)?
                }
                (Some(h1), true) => {
                    let ph = tape.spmm_const(p, h1)?;
                    let two = tape.scale_const(ph, 2.0);
                    let diff = match prev2 {
                        Some(h2) => tape.sub(two, h2)?,
                        None => two,
                    };
                    tape.add(diff, res)?
                }
            };
            let h = self.transform(tape, store, pre, layer, fm)?;
            prev2 = prev;
            prev = Some(h);
        }
        Ok(prev.expect("at least one layer"))
    }

    fn gcn_stack<'g>(
        &self,
        tape: &mut Tape<'g>,
        store: &ParamStore,
        p: &'g PropagationOperator,
        h_star: NodeId,
        fm: ForwardMode,
    ) -> Result<NodeId> {
        let mut h = h_star;
        for layer in 0..self.config.k {
            let ph = tape.spmm_const(p, h)?;
            h = if fm.linear {
                ph
            } else {
                let ph = self.layer_dropout(tape, ph, layer, fm)?;
                let w = tape.param(store, self.layer_w[layer]);
                let z = tape.matmul(ph, w)?;
                tape.relu(z)
            };
        }
        Ok(h)
    }

    fn gcnii_stack<'g>(
        &self,
        tape: &mut Tape<'g>,
        store: &ParamStore,
        p: &'g PropagationOperator,
        h_star: NodeId,
        fm: ForwardMode,
    ) -> Result<NodeId> {
        let alpha = self.config.fixed_alpha;
        let mut h = h_star;
        for layer in 0..self.config.k {
            let ph = tape.spmm_const(p, h)?;
            let damped = tape.scale_const(ph, 1.0 - alpha);
            let res = tape.scale_const(h_star, alpha);
            let pre = tape.add(damped, res)?;
            h = self.transform(tape, store, pre, layer, fm)?;
        }
        Ok(h)
    }
}

/// `h·((1−β)I + βW)` as `(1−β)h + β(hW)`.
pub fn identity_mapping(tape: &mut Tape<'_>, h: NodeId, w: NodeId, beta: f64) -> Result<NodeId> {
    let (r, c) = tape.value(w).shape();
    if r != c {
        return Err(Error::DimensionMismatch(format!("identity mapping with {r}x{c} weight")));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::OutOfRange { name: "beta", value: beta, range: "[0, 1]" });
    }
    let keep = tape.scale_const(h, 1.0 - beta);
    let hw = tape.matmul(h, w)?;
    let mixed = tape.scale_const(hw, beta);
    tape.add(keep, mixed)
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn predict(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamArray {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// On-disk parameter checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub in_dim: usize,
    pub classes: usize,
    pub seed: u64,
    pub params: BTreeMap<String, ParamArray>,
}

impl Checkpoint {
    pub fn capture(model: &Model, store: &ParamStore) -> Self {
        let params = store
            .iter()
            .map(|(_, p)| {
                let (rows, cols) = p.value.shape();
                (p.name.clone(), ParamArray { rows, cols, data: p.value.as_slice().to_vec() })
            })
            .collect();
        Self {
            config: model.config.clone(),
            in_dim: model.in_dim,
            classes: model.classes,
            seed: model.config.seed,
            params,
        }
    }

    /// Rebuilds the model and overwrites every parameter with the stored values.
    pub fn restore(&self) -> Result<(Model, ParamStore)> {
        let (model, mut store) = Model::init(self.config.clone(), self.in_dim, self.classes)?;
        for id in store.ids().collect::<Vec<_>>() {
            let name = store.get(id).name.clone();
            let arr = self
                .params
                .get(&name)
                .ok_or_else(|| Error::InvalidConfig(format!("checkpoint lacks parameter {name}")))?;
            let value = Matrix::from_vec(arr.rows, arr.cols, arr.data.clone())?;
            if value.shape() != store.value(id).shape() {
                return Err(Error::DimensionMismatch(format!("checkpoint parameter {name}")));
            }
            store.get_mut(id).value = value;
        }
        Ok((model, store))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{clenshaw_propagate_linear, horner_propagate_linear};
    use crate::graph::{normalized_adjacency, Graph};

    fn toy() -> (PropagationOperator, Matrix) {
        let g = Graph::from_pairs(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)], 5).unwrap();
        let x = Matrix::from_vec(5, 3, (0..15).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        (normalized_adjacency(&g), x)
    }

    fn cfg(variant: Variant, k: usize) -> ModelConfig {
        ModelConfig { variant, k, hidden: 4, ..ModelConfig::default() }
    }

    fn run_linear(model: &Model, store: &ParamStore, p: &PropagationOperator, x: &Matrix) -> Matrix {
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, store, p, x, ForwardMode::linear()).unwrap();
        tape.value(out.logits).clone()
    }

    #[test]
    fn fresh_clenshaw_is_all_pass() {
        let (p, x) = toy();
        let (model, store) = Model::init(cfg(Variant::Clenshaw, 6), 3, 2).unwrap();
        assert!(run_linear(&model, &store, &p, &x).max_abs_diff(&x) <= 1e-12);
    }

    #[test]
    fn linear_mode_matches_linear_filters() {
        let (p, x) = toy();
        let alphas = [0.3, -0.5, 0.2, 0.9];
        for variant in [Variant::Clenshaw, Variant::Horner] {
            let (model, mut store) = Model::init(cfg(variant, 3), 3, 2).unwrap();
            for (&id, &a) in model.alpha_params().iter().zip(&alphas) {
                store.get_mut(id).value = Matrix::scalar(a);
            }
            let want = match variant {
                Variant::Clenshaw => clenshaw_propagate_linear(&p, &x, &alphas, 3).unwrap(),
                _ => horner_propagate_linear(&p, &x, &alphas, 3).unwrap(),
            };
            assert!(run_linear(&model, &store, &p, &x).max_abs_diff(want.output()) <= 1e-12);
        }
    }

    #[test]
    fn horner_k1_unit_first_residue_is_one_hop() {
        let (p, x) = toy();
        let (model, mut store) = Model::init(cfg(Variant::Horner, 1), 3, 2).unwrap();
        store.get_mut(model.alpha_params()[0]).value = Matrix::scalar(1.0);
        store.get_mut(model.alpha_params()[1]).value = Matrix::scalar(0.0);
        assert!(run_linear(&model, &store, &p, &x).max_abs_diff(&p.spmm(&x).unwrap()) <= 1e-15);
    }

    #[test]
    fn fixed_param_has_no_alpha_parameters() {
        let (p, x) = toy();
        let config = ModelConfig { fixed_alpha: 1.0, ..cfg(Variant::FixedParam, 4) };
        let (model, store) = Model::init(config, 3, 2).unwrap();
        assert!(model.alpha_params().is_empty());
        assert!(store.iter().all(|(_, p)| p.group == Group::Weight));
        assert!(run_linear(&model, &store, &p, &x).max_abs_diff(&x) <= 1e-12);
    }

    #[test]
    fn gcn_and_gcnii_linear_cases() {
        let (p, x) = toy();
        let (model, store) = Model::init(cfg(Variant::Gcn, 1), 3, 2).unwrap();
        assert_eq!(run_linear(&model, &store, &p, &x), p.spmm(&x).unwrap());
        let config = ModelConfig { fixed_alpha: 1.0, ..cfg(Variant::Gcnii, 7) };
        let (model, store) = Model::init(config, 3, 2).unwrap();
        assert!(run_linear(&model, &store, &p, &x).max_abs_diff(&x) <= 1e-15);
    }

    #[test]
    fn zero_order_runs_and_logit_shapes() {
        let (p, x) = toy();
        for variant in Variant::ALL {
            let (model, store) = Model::init(cfg(variant, 0), 3, 4).unwrap();
            let mut tape = Tape::new();
            let out = model.forward(&mut tape, &store, &p, &x, ForwardMode::eval()).unwrap();
            assert_eq!(tape.value(out.logits).shape(), (5, 4));
        }
    }

    #[test]
    fn layer_dropout_only_acts_in_training() {
        let (p, x) = toy();
        let logits = |layer_dropout: bool, fm: ForwardMode| {
            let config = ModelConfig { layer_dropout, dropout: 0.5, ..cfg(Variant::Clenshaw, 3) };
            let (model, store) = Model::init(config, 3, 2).unwrap();
            let mut tape = Tape::new();
            let out = model.forward(&mut tape, &store, &p, &x, fm).unwrap();
            tape.value(out.logits).clone()
        };
        assert_eq!(logits(true, ForwardMode::eval()), logits(false, ForwardMode::eval()));
        assert_ne!(logits(true, ForwardMode::train(2)), logits(false, ForwardMode::train(2)));
    }

    #[test]
    fn identity_mapping_edges() {
        let h = Matrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap();
        let w = Matrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]]).unwrap();
        let mut tape = Tape::new();
        let hn = tape.constant(h.clone());
        let wn = tape.constant(w.clone());
        let b0 = identity_mapping(&mut tape, hn, wn, 0.0).unwrap();
        assert_eq!(tape.value(b0), &h);
        let b1 = identity_mapping(&mut tape, hn, wn, 1.0).unwrap();
        assert_eq!(tape.value(b1), &h.matmul(&w).unwrap());
        let id = tape.constant(Matrix::identity(2));
        let half = identity_mapping(&mut tape, hn, id, 0.5).unwrap();
        assert_eq!(tape.value(half), &h);
        let rect = tape.constant(Matrix::zeros(2, 3));
        assert!(identity_mapping(&mut tape, hn, rect, 0.5).is_err());
    }

    #[test]
    fn beta_schedule() {
        let c = ModelConfig { lambda: 0.5, ..ModelConfig::default() };
        assert!((c.beta(0) - 1.5f64.ln()).abs() < 1e-15);
        assert!((c.beta(4) - 1.1f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn predict_ties_go_low() {
        let logits = Matrix::from_rows(&[vec![0.2, 0.9, 0.1], vec![0.5, 0.5, 0.1]]).unwrap();
        assert_eq!(predict(&logits), vec![1, 0]);
    }

    #[test]
    fn checkpoint_round_trip() {
        let (p, x) = toy();
        let (model, store) = Model::init(cfg(Variant::Clenshaw, 3), 3, 2).unwrap();
        let ck = Checkpoint::capture(&model, &store);
        let text = serde_json::to_string(&ck).unwrap();
        let back: Checkpoint = serde_json::from_str(&text).unwrap();
        let (m2, s2) = back.restore().unwrap();
        let eval = |m: &Model, s: &ParamStore| {
            let mut tape = Tape::new();
            let out = m.forward(&mut tape, s, &p, &x, ForwardMode::eval()).unwrap();
            tape.value(out.logits).clone()
        };
        assert_eq!(eval(&model, &store), eval(&m2, &s2));
    }
}
