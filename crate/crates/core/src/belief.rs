//! Discrete Bayes filtering over joint actions and joint observations, and
//! the belief-dependent reward ρ(b,a) = Σ_s R(s,a) b(s) − α g(b).

use thiserror::Error;

use crate::model::{Belief, RhoDecPomdp, Uncertainty};
use crate::policy::JointHistory;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum FilterError {
    /// The observation has zero prior probability under (b, a).
    #[error("observation {observation} has zero probability after joint action {action}{}",
        step.map(|s| format!(" at history step {s}")).unwrap_or_default())]
    ImpossibleObservation {
        action: usize,
        observation: usize,
        step: Option<usize>,
    },
}

/// Posterior belief together with the normalizer η(z|b,a).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub posterior: Belief,
    pub normalizer: f64,
}

/// Predicted state distribution Σ_s T(s'|s,a) b(s).
pub fn predict(model: &RhoDecPomdp, b: &Belief, a: usize) -> Vec<f64> {
    let n = model.n_states();
    let mut out = vec![0.0; n];
    for (s, &mass) in b.probs().iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for (o, &t) in out.iter_mut().zip(model.transition_row(s, a)) {
            *o += t * mass;
        }
    }
    out
}

/// Correction step on a predicted distribution. Returns `None` when η = 0.
pub fn correct(model: &RhoDecPomdp, predicted: &[f64], a: usize, z: usize) -> Option<FilterResult> {
    let likelihood = model.observation_likelihood(a, z);
    let mut post: Vec<f64> = likelihood.iter().zip(predicted).map(|(l, p)| l * p).collect();
    let eta: f64 = post.iter().sum();
    if !(eta > 0.0) {
        return None;
    }
    post.iter_mut().for_each(|p| *p /= eta);
    Some(FilterResult {
        posterior: Belief::from_raw(post),
        normalizer: eta,
    })
}

/// τ(b,a,z) and η(z|b,a).
pub fn belief_update(
    model: &RhoDecPomdp,
    b: &Belief,
    a: usize,
    z: usize,
) -> Result<FilterResult, FilterError> {
    let predicted = predict(model, b, a);
    correct(model, &predicted, a, z).ok_or(FilterError::ImpossibleObservation {
        action: a,
        observation: z,
        step: None,
    })
}

/// Every joint observation with positive probability after (b, a), in
/// ascending joint-observation order, with its posterior.
pub fn successors(model: &RhoDecPomdp, b: &Belief, a: usize) -> Vec<(usize, FilterResult)> {
    let predicted = predict(model, b, a);
    (0..model.n_joint_observations())
        .filter_map(|z| correct(model, &predicted, a, z).map(|r| (z, r)))
        .collect()
}

/// Left fold of [`belief_update`] over the steps of a joint history.
pub fn belief_from_history(
    model: &RhoDecPomdp,
    b0: &Belief,
    theta: &JointHistory,
) -> Result<Belief, FilterError> {
    let mut b = b0.clone();
    for (step, s) in theta.steps().iter().enumerate() {
        b = belief_update(model, &b, s.action, s.observation)
            .map_err(|e| match e {
                FilterError::ImpossibleObservation { action, observation, .. } => {
                    FilterError::ImpossibleObservation { action, observation, step: Some(step) }
                }
            })?
            .posterior;
    }
    Ok(b)
}

/// Shannon entropy in bits, with 0·log 0 = 0.
pub fn shannon_entropy(b: &Belief) -> f64 {
    entropy_bits(b.probs())
}

pub(crate) fn entropy_bits(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

/// g(b) for the model's uncertainty function.
pub fn uncertainty(kind: Uncertainty, b: &Belief) -> f64 {
    match kind {
        Uncertainty::None => 0.0,
        Uncertainty::ShannonEntropy => shannon_entropy(b),
    }
}

/// Σ_s R(s,a) b(s).
pub fn expected_state_reward(model: &RhoDecPomdp, b: &Belief, a: usize) -> f64 {
    b.probs()
        .iter()
        .enumerate()
        .map(|(s, &p)| model.reward(s, a) * p)
        .sum()
}

/// ρ(b,a) = Σ_s R(s,a) b(s) − α g(b).
pub fn rho_reward(model: &RhoDecPomdp, b: &Belief, a: usize) -> f64 {
    let state_term = expected_state_reward(model, b, a);
    match model.uncertainty() {
        Uncertainty::None => state_term,
        kind => state_term - model.alpha() * uncertainty(kind, b),
    }
}
