//! Central finite-difference checks for analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::Parameter;
use crate::error::{Error, Result};

/// Anything that owns a fixed, ordered set of [`Parameter`]s.
pub trait Parameterized {
    fn parameters(&self) -> Vec<&Parameter>;
    fn parameters_mut(&mut self) -> Vec<&mut Parameter>;

    fn zero_grad(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.value.as_slice().len()).sum()
    }
}

impl Parameterized for Vec<Parameter> {
    fn parameters(&self) -> Vec<&Parameter> {
        self.iter().collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.iter_mut().collect()
    }
}

/// `(f(h) − f(−h)) / 2h`.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Gradients smaller than this in magnitude are compared absolutely.
    pub floor: f64,
    /// Check at most this many entries per parameter (seeded sample).
    pub max_entries_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            floor: 1e-6,
            max_entries_per_param: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// (parameter index, entry index, analytic, numeric) at the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
    pub checked: usize,
}

/// Compares analytic gradients against central differences.
///
/// `loss(model, backward)` must return the scalar loss and, when `backward`
/// is true, accumulate gradients into the model's parameters. Gradients are
/// zeroed before the analytic pass; parameter values are restored exactly.
pub fn grad_check<M, L>(model: &mut M, mut loss: L, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    M: Parameterized,
    L: FnMut(&mut M, bool) -> Result<f64>,
{
    model.zero_grad();
    let base = loss(model, true)?;
    if !base.is_finite() {
        return Err(Error::NonFinite(format!("grad_check: base loss is {base}")));
    }
    let analytic: Vec<Vec<f64>> = model
        .parameters()
        .iter()
        .map(|p| p.grad.as_slice().to_vec())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (pi, grads) in analytic.iter().enumerate() {
        let len = grads.len();
        let entries: Vec<usize> = match opts.max_entries_per_param {
            Some(limit) if limit < len => {
                let mut idx = sample(&mut rng, len, limit).into_vec();
                idx.sort_unstable();
                idx
            }
            _ => (0..len).collect(),
        };
        for idx in entries {
            let original = model.parameters()[pi].value.as_slice()[idx];
            let mut eval = |delta: f64, model: &mut M| -> Result<f64> {
                model.parameters_mut()[pi].value.as_mut_slice()[idx] = original + delta;
                let l = loss(model, false)?;
                if !l.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "grad_check: loss {l} at parameter {pi}, entry {idx}"
                    )));
                }
                Ok(l)
            };
            let plus = eval(opts.step, model)?;
            let minus = eval(-opts.step, model)?;
            model.parameters_mut()[pi].value.as_mut_slice()[idx] = original;

            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = grads[idx];
            let denom = a.abs().max(numeric.abs()).max(opts.floor);
            let rel = (a - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = rel;
                report.worst = Some((pi, idx, a, numeric));
            }
        }
    }
    Ok(report)
}
