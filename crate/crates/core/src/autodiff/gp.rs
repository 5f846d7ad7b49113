//! Critic objective with gradient penalty.

use crate::error::{Error, Result};

use super::graph::{Graph, Var};
use super::network::{bind_params, collect_grads, record_forward, DropoutMasks, NetworkSpec, ParamSet};
use super::tensor::Tensor;

/// Records `λ/B Σ_i (‖∇_x D(x_i)‖₂ − 1)²` for the batch bound to `x`.
fn record_penalty(
    g: &mut Graph,
    spec: &NetworkSpec,
    params: &[Var],
    x: Var,
    masks: &DropoutMasks,
    lambda: f64,
) -> Result<Var> {
    let rows = g.value(x).rows();
    let out = record_forward(g, spec, params, x, masks)?;
    let total = g.sum(out)?;
    let gx = g.backward(total, 1.0, &[x])?[0];
    let norms = g.row_norm(gx)?;
    let centered = g.add_scalar(norms, -1.0)?;
    let sq = g.square(centered)?;
    let s = g.sum(sq)?;
    g.scale(s, lambda / rows as f64)
}

/// Gradient penalty of the critic at `x_hat` and its exact parameter
/// gradient (reverse over reverse). A zero input gradient is not an error:
/// it contributes `λ` for that sample.
pub fn gp_double_backward(
    spec: &NetworkSpec,
    params: &ParamSet,
    x_hat: &Tensor,
    lambda: f64,
    masks: &DropoutMasks,
) -> Result<(f64, ParamSet)> {
    if lambda < 0.0 || x_hat.rows() == 0 {
        return Err(Error::InvalidDimension(
            "penalty needs lambda >= 0 and a non-empty batch".into(),
        ));
    }
    let mut g = Graph::new();
    let pv = bind_params(&mut g, params, true)?;
    let x = g.leaf(x_hat.clone())?;
    let penalty = record_penalty(&mut g, spec, &pv, x, masks, lambda)?;
    let grads = g.backward(penalty, 1.0, &pv)?;
    Ok((g.value(penalty).data()[0], collect_grads(&g, params, &grads)))
}

/// Critic loss terms of one batch.
#[derive(Debug, Clone)]
pub struct CriticLoss {
    /// `mean D(fake) − mean D(real) + penalty`
    pub loss: f64,
    /// `mean D(real) − mean D(fake)`
    pub wasserstein: f64,
    pub penalty: f64,
    pub grads: ParamSet,
}

/// Interpolates `eps_i·real_i + (1 − eps_i)·fake_i`.
pub fn interpolate(real: &Tensor, fake: &Tensor, eps: &[f64]) -> Result<Tensor> {
    if real.shape() != fake.shape() || eps.len() != real.rows() {
        return Err(Error::ShapeMismatch(format!(
            "interpolate {:?} / {:?} with {} weights",
            real.shape(),
            fake.shape(),
            eps.len()
        )));
    }
    let w = real.row_width();
    let mut out = real.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let e = eps[i / w];
        *v = e * *v + (1.0 - e) * fake.data()[i];
    }
    Ok(out)
}

/// Full critic loss and its parameter gradient. `masks` are per-sample and
/// reused for the real, fake and interpolated passes.
pub fn critic_loss(
    spec: &NetworkSpec,
    params: &ParamSet,
    real: &Tensor,
    fake: &Tensor,
    eps: &[f64],
    lambda: f64,
    masks: &DropoutMasks,
) -> Result<CriticLoss> {
    let x_hat = interpolate(real, fake, eps)?;
    let b = real.rows();
    let mut g = Graph::new();
    let pv = bind_params(&mut g, params, true)?;

    let both = g.constant(Tensor::concat_rows(&[real, fake])?)?;
    let out = record_forward(&mut g, spec, &pv, both, &masks.tiled(2)?)?;
    let weights: Vec<f64> = (0..2 * b)
        .map(|i| if i < b { -1.0 } else { 1.0 } / b as f64)
        .collect();
    let weights = Tensor::new(vec![2 * b, 1], weights)?;
    let out = g.reshape(out, vec![2 * b, 1])?;
    let weighted = g.mul_const(out, weights)?;
    let wass_term = g.sum(weighted)?;

    let x = g.leaf(x_hat)?;
    let penalty = if lambda > 0.0 {
        Some(record_penalty(&mut g, spec, &pv, x, masks, lambda)?)
    } else {
        None
    };
    let loss = match penalty {
        Some(p) => g.add(wass_term, p)?,
        None => wass_term,
    };
    let grads = g.backward(loss, 1.0, &pv)?;
    let wasserstein = -g.value(wass_term).data()[0];
    Ok(CriticLoss {
        loss: g.value(loss).data()[0],
        wasserstein,
        penalty: penalty.map_or(0.0, |p| g.value(p).data()[0]),
        grads: collect_grads(&g, params, &grads),
    })
}

/// Generator loss `−mean D(G(z))` and its gradient for the generator
/// parameters; the critic is held fixed.
pub fn generator_loss(
    gen_spec: &NetworkSpec,
    gen_params: &ParamSet,
    critic_spec: &NetworkSpec,
    critic_params: &ParamSet,
    noise: &Tensor,
    critic_masks: &DropoutMasks,
) -> Result<(f64, ParamSet)> {
    let b = noise.rows();
    let mut g = Graph::new();
    let gv = bind_params(&mut g, gen_params, true)?;
    let dv = bind_params(&mut g, critic_params, false)?;
    let z = g.constant(noise.clone())?;
    let fake = record_forward(&mut g, gen_spec, &gv, z, &DropoutMasks::none())?;
    let out = record_forward(&mut g, critic_spec, &dv, fake, critic_masks)?;
    let s = g.sum(out)?;
    let loss = g.scale(s, -1.0 / b as f64)?;
    let grads = g.backward(loss, 1.0, &gv)?;
    Ok((g.value(loss).data()[0], collect_grads(&g, gen_params, &grads)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Layer, LayerParams};

    fn linear_critic(w: &[f64], b: f64) -> (NetworkSpec, ParamSet) {
        let spec = NetworkSpec {
            input_width: w.len(),
            layers: vec![Layer::Dense { out: 1 }],
        };
        let params = ParamSet {
            entries: vec![LayerParams {
                layer: 0,
                weight: Tensor::new(vec![1, w.len()], w.to_vec()).unwrap(),
                bias: Tensor::new(vec![1], vec![b]).unwrap(),
            }],
        };
        (spec, params)
    }

    #[test]
    fn linear_critic_closed_form() {
        let (spec, params) = linear_critic(&[3.0, 4.0], 0.0);
        let x = Tensor::new(vec![3, 2], vec![0.1, -2.0, 5.0, 0.3, 0.0, 0.0]).unwrap();
        let (p, grads) = gp_double_backward(&spec, &params, &x, 10.0, &DropoutMasks::none()).unwrap();
        assert!((p - 160.0).abs() < 1e-12);
        let gw = grads.entries[0].weight.data();
        assert!((gw[0] - 48.0).abs() < 1e-12 && (gw[1] - 64.0).abs() < 1e-12);
        assert_eq!(grads.entries[0].bias.data(), &[0.0]);
    }

    #[test]
    fn constant_critic_penalty_is_lambda() {
        let (spec, params) = linear_critic(&[0.0, 0.0], 0.7);
        let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (p, grads) = gp_double_backward(&spec, &params, &x, 10.0, &DropoutMasks::none()).unwrap();
        assert_eq!(p, 10.0);
        assert_eq!(grads.entries[0].bias.data(), &[0.0]);
        assert!(grads.entries[0].weight.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn critic_loss_closed_form() {
        let (spec, params) = linear_critic(&[3.0, 4.0], 0.0);
        let real = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let fake = Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap();
        let l = critic_loss(&spec, &params, &real, &fake, &[0.5], 10.0, &DropoutMasks::none()).unwrap();
        assert!((l.loss - 161.0).abs() < 1e-12);
        assert!((l.wasserstein + 1.0).abs() < 1e-12);
        assert!((l.penalty - 160.0).abs() < 1e-12);
    }

    #[test]
    fn identical_batches_without_penalty_give_zero_loss() {
        let spec = NetworkSpec::critic(5);
        let params = ParamSet::init(&spec, 4).unwrap();
        let real = Tensor::new(vec![3, 5], (0..15).map(|i| (i as f64).sin()).collect()).unwrap();
        let l = critic_loss(&spec, &params, &real, &real, &[0.2, 0.5, 0.9], 0.0, &DropoutMasks::none())
            .unwrap();
        assert!(l.loss.abs() < 1e-15);
        assert_eq!(l.penalty, 0.0);
    }
}
