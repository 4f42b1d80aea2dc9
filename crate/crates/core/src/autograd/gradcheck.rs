use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::params::ParamStore;
use super::tape::{NodeId, Tape};
use crate::error::Result;

/// Gradients below this magnitude are compared absolutely rather than
/// relatively. A central difference with `h = 1e-6` on an O(1) loss carries
/// roughly 1e-10 of rounding noise, which would dominate any smaller scale.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckEntry {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    /// The ±step probe changed which ReLUs are active, so the difference
    /// quotient straddles a kink and says nothing about the derivative.
    pub kink: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    /// Over entries without a kink.
    pub max_rel_error: f64,
    pub kinks: usize,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&GradCheckEntry> {
        self.entries.iter().filter(|e| !e.kink).max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Compares reverse-mode gradients against central finite differences on up
/// to `per_param` randomly sampled coordinates of every parameter.
///
/// `build` records the forward pass for the given parameter values and
/// returns the scalar loss node.
pub fn finite_difference_check<'g, F>(
    store: &ParamStore,
    per_param: usize,
    step: f64,
    seed: u64,
    build: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'g>, &ParamStore) -> Result<NodeId>,
{
    let mut analytic = store.clone();
    analytic.zero_grad();
    let base = {
        let mut tape = Tape::new();
        let loss = build(&mut tape, &analytic)?;
        tape.backward(loss, &mut analytic)?;
        tape.relu_signature()
    };

    let eval = |s: &ParamStore| -> Result<(f64, bool)> {
        let mut tape = Tape::new();
        let loss = build(&mut tape, s)?;
        Ok((tape.value(loss).item(), tape.relu_signature() != base))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    let mut probe = store.clone();
    for (id, p) in store.iter() {
        let len = p.value.as_slice().len();
        let mut coords = sample(&mut rng, len, per_param.min(len)).into_vec();
        coords.sort_unstable();
        for index in coords {
            let orig = p.value.as_slice()[index];
            probe.get_mut(id).value.as_mut_slice()[index] = orig + step;
            let (plus, kink_plus) = eval(&probe)?;
            probe.get_mut(id).value.as_mut_slice()[index] = orig - step;
            let (minus, kink_minus) = eval(&probe)?;
            probe.get_mut(id).value.as_mut_slice()[index] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.grad(id).as_slice()[index];
            entries.push(GradCheckEntry {
                param: p.name.clone(),
                index,
                analytic: a,
                numeric,
                rel_error: rel_error(a, numeric),
                kink: kink_plus || kink_minus,
            });
        }
    }
    let max_rel_error = entries.iter().filter(|e| !e.kink).fold(0.0f64, |m, e| m.max(e.rel_error));
    let kinks = entries.iter().filter(|e| e.kink).count();
    Ok(GradCheckReport { entries, max_rel_error, kinks })
}
