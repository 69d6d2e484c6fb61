use super::layers::{batch_gradient_layout, batch_loss_layout};
use super::{NetConfig, NetParams};
use crate::error::Result;

/// Central differences `(L(θ + eps) - L(θ - eps)) / (2 eps)` of the mean
/// batch loss, parameter by parameter.
pub fn numeric_gradient(
    config: &NetConfig,
    params: &NetParams,
    batch: &[(&[f64], usize)],
    eps: f64,
) -> Result<NetParams> {
    let layout = config.layout()?;
    params.check(&layout)?;
    let mut probe = params.clone();
    let mut grad = NetParams::zeros(&layout);
    for k in 0..params.len() {
        let original = params.get_flat(k);
        probe.set_flat(k, original + eps);
        let up = batch_loss_layout(&layout, &probe, batch)?;
        probe.set_flat(k, original - eps);
        let down = batch_loss_layout(&layout, &probe, batch)?;
        probe.set_flat(k, original);
        grad.set_flat(k, (up - down) / (2.0 * eps));
    }
    Ok(grad)
}

/// Largest `|analytic - numeric| / max(|analytic| + |numeric|, 1e-12)` over
/// all parameters.
pub fn gradient_check(config: &NetConfig, params: &NetParams, batch: &[(&[f64], usize)], eps: f64) -> Result<f64> {
    gradient_check_with(config, params, batch, eps, |_| {})
}

/// [`gradient_check`] with a hook that may alter the analytic gradient
/// before comparison (fault injection).
pub fn gradient_check_with<F>(
    config: &NetConfig,
    params: &NetParams,
    batch: &[(&[f64], usize)],
    eps: f64,
    tamper: F,
) -> Result<f64>
where
    F: FnOnce(&mut NetParams),
{
    let layout = config.layout()?;
    params.check(&layout)?;
    let (mut analytic, _, _) = batch_gradient_layout(&layout, params, batch)?;
    tamper(&mut analytic);
    let numeric = numeric_gradient(config, params, batch, eps)?;
    Ok(analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-12))
        .fold(0.0, f64::max))
}
