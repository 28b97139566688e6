//! Generalized advantage estimation over a single trajectory slice.

/// Computes advantages and returns for one trajectory.
///
/// `dones[t]` marks that the episode ended at step t, cutting bootstrap flow
/// into t from t+1. `bootstrap_value` is v(s_{T}) for a trajectory cut off
/// mid-episode; it is ignored past a terminal step.
///
/// Returns (advantages, returns) with returns[t] = advantages[t] + values[t].
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), values.len());
    assert_eq!(rewards.len(), dones.len());
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let nonterminal = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap_value };
        let delta = rewards[t] + gamma * next_value * nonterminal - values[t];
        acc = delta + gamma * lambda * nonterminal * acc;
        adv[t] = acc;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}
