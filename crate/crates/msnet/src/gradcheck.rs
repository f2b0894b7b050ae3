//! Central-difference check of the full-model backward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureVolume;
use crate::error::{Error, Result};
use crate::label::DiagnosisLabel;
use crate::loss::{cce_grad_logits, weighted_cce, ClassWeights, LOG_CLAMP};
use crate::model::{ForwardCache, MsNetModel};

pub const DEFAULT_STEP: f64 = 3e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;
/// Denominator floor for the relative error. Rounding in the loss is about
/// `ε·|logits|`, which after dividing by the step leaves ~1e-10 of absolute
/// noise in each difference quotient; components below the floor are
/// therefore held to an absolute error of `tolerance × floor`.
pub const RELATIVE_FLOOR: f64 = 1e-5;
/// How many times the step is divided by ten when the stencil straddles a
/// ReLU sign change or a max-pool argmax switch.
pub const MAX_STEP_REDUCTIONS: usize = 3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub n_params: usize,
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    /// Parameters whose stencil crossed a kink at the initial step and
    /// needed a smaller one.
    pub reduced_steps: usize,
    /// Parameters still crossing a kink at the smallest step; not compared.
    pub skipped: usize,
}

impl GradCheckReport {
    /// Every parameter compared, all below `tolerance`.
    pub fn passes(&self, tolerance: f64) -> bool {
        self.skipped == 0 && self.max_relative_error < tolerance
    }
}

fn loss_at(
    model: &MsNetModel,
    volume: &FeatureVolume,
    label: DiagnosisLabel,
    w: &ClassWeights,
) -> Result<(f64, ForwardCache)> {
    let (probs, cache) = model.forward(volume)?;
    Ok((weighted_cce(&probs, label.index(), w)?, cache))
}

/// Compares the analytic gradient of `weighted_cce(softmax(net(volume)))`
/// against the fourth-order central difference
/// `(8(L(θ+h) − L(θ−h)) − (L(θ+2h) − L(θ−2h))) / 12h`, one parameter at a
/// time.
///
/// The loss is only piecewise smooth (ReLU, max-pool). When any stencil
/// point lands in a different branch than the unperturbed pass, the step is
/// divided by ten, up to [`MAX_STEP_REDUCTIONS`] times; parameters that
/// still straddle a kink are counted in [`GradCheckReport::skipped`].
///
/// Rejects points where the target probability is below the loss's log
/// clamp: the clamped loss is flat there while the training gradient is not.
pub fn check_model_gradients(
    model: &MsNetModel,
    volume: &FeatureVolume,
    label: DiagnosisLabel,
    weights: &ClassWeights,
    step: f64,
) -> Result<GradCheckReport> {
    let (probs, cache) = model.forward(volume)?;
    if probs[label.index()] < LOG_CLAMP {
        return Err(Error::InvalidConfig(format!(
            "probability of {label} is {:e}, inside the log clamp; pick another model or volume",
            probs[label.index()]
        )));
    }
    let d_logits = cce_grad_logits(&probs, label.index(), weights)?;
    let analytic = model.backward(&cache, &d_logits)?;

    let mut probe = model.clone();
    let mut worst = (0, 0.0f64, 0.0, 0.0);
    let (mut reduced_steps, mut skipped) = (0, 0);
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe.params()[i];
        let mut numeric = None;
        let mut h = step;
        for attempt in 0..=MAX_STEP_REDUCTIONS {
            let mut losses = [0.0; 4];
            let mut smooth = true;
            for (slot, offset) in losses.iter_mut().zip([h, -h, 2.0 * h, -2.0 * h]) {
                probe.params_mut()[i] = orig + offset;
                let (l, c) = loss_at(&probe, volume, label, weights)?;
                *slot = l;
                smooth &= c.same_regime(&cache);
            }
            if smooth {
                if attempt > 0 {
                    reduced_steps += 1;
                }
                let [up, down, up2, down2] = losses;
                numeric = Some((8.0 * (up - down) - (up2 - down2)) / (12.0 * h));
                break;
            }
            h /= 10.0;
        }
        probe.params_mut()[i] = orig;
        let Some(n) = numeric else {
            skipped += 1;
            continue;
        };
        let e = relative_error(a, n);
        if e > worst.1 {
            worst = (i, e, a, n);
        }
    }
    Ok(GradCheckReport {
        n_params: analytic.len(),
        max_relative_error: worst.1,
        worst_index: worst.0,
        analytic_at_worst: worst.2,
        numeric_at_worst: worst.3,
        reduced_steps,
        skipped,
    })
}

/// Volume with entries uniform in `[-1, 1)`.
pub fn random_volume(len: usize, dim: usize, seed: u64) -> Result<FeatureVolume> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = (0..len * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    FeatureVolume::new(format!("random_{seed}"), len, dim, f)
}
