//! Generalized advantage estimation over one contiguous trajectory segment.

use super::LearnerError;

/// Advantages and bootstrapped returns (`advantage + value`).
///
/// `dones[t]` marks that the transition at `t` ended an episode, so nothing
/// beyond it is bootstrapped. `last_value` is the critic's estimate for the
/// state after the final transition and is ignored when that transition is
/// terminal.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), LearnerError> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(LearnerError::DimensionMismatch {
            what: "gae inputs",
            expected: n,
            got: values.len().min(dones.len()),
        });
    }
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { last_value };
        let cont = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * cont - values[t];
        running = delta + gamma * lambda * cont * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Zero-mean, unit-variance rescaling in place. Returns the pre-scaling mean
/// and standard deviation.
pub fn normalize(xs: &mut [f64], eps: f64) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    for x in xs.iter_mut() {
        *x = (*x - mean) / (std + eps);
    }
    (mean, std)
}
