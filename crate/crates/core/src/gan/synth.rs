use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{GanModel, Phase};
use super::train::{generate, noise};
use crate::data::{PreprocessPlan, Provenance, RawDataset};
use crate::error::{Error, Result};

const CHUNK: usize = 512;

/// Default top-up for a minority class: `⌊n_normal / γ⌋ − n_class`, or 0.
pub fn default_synthesis_count(n_normal: usize, n_class: usize, gamma: f64) -> usize {
    ((n_normal as f64 / gamma).floor() as usize).saturating_sub(n_class)
}

/// `n` generator outputs clamped to `[0, 1]`, row-major.
pub fn synthesize_encoded(model: &GanModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    model.expect_phase(matches!(model.phase, Phase::Finetuned { .. }), "finetuned")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n * model.feature_dim);
    let mut left = n;
    while left > 0 {
        let rows = left.min(CHUNK);
        let z = noise(rows, model.noise_dim, &mut rng)?;
        out.extend(generate(model, &z)?.data().iter().map(|v| v.clamp(0.0, 1.0)));
        left -= rows;
    }
    Ok(out)
}

/// Draw `n` rows of the fine-tuned class and map them back to raw values.
pub fn synthesize(model: &GanModel, n: usize, plan: &PreprocessPlan, seed: u64) -> Result<RawDataset> {
    let Phase::Finetuned { class, .. } = model.phase else {
        return Err(Error::WrongPhase {
            expected: "finetuned".into(),
            found: model.phase.to_string(),
        });
    };
    if plan.encoded_width() != model.feature_dim {
        return Err(Error::PlanMismatch(format!(
            "plan width {} for generator width {}",
            plan.encoded_width(),
            model.feature_dim
        )));
    }
    let rows = synthesize_encoded(model, n, seed)?;
    plan.inverse(
        &rows,
        vec![class; n],
        model.class_names.clone(),
        model.normal_class,
        Provenance::Synthetic,
    )
}
