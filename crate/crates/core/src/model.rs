//! Discrete ρDec-POMDP model: index spaces, dense probability tables and
//! structural validation.
//!
//! Tables are stored dense. Joint actions and joint observations are flat
//! indices in row-major order with agent 0 as the most significant digit.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for row sums of stochastic tables and beliefs.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

/// Negative mass above this magnitude is an error; below it is rounding noise.
const NEGATIVE_NOISE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("belief is empty")]
    Empty,
    #[error("belief entry {index} is invalid ({value})")]
    InvalidEntry { index: usize, value: f64 },
    #[error("belief mass sums to {0}, expected 1")]
    NotNormalized(f64),
}

/// Probability mass over the states of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Validates `probs`; entries in `[-1e-12, 0)` are treated as rounding
    /// noise, clamped to zero, and the vector renormalized.
    pub fn new(mut probs: Vec<f64>) -> Result<Self, BeliefError> {
        if probs.is_empty() {
            return Err(BeliefError::Empty);
        }
        let mut clamped = false;
        for (index, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < -NEGATIVE_NOISE || *p > 1.0 + STOCHASTIC_TOLERANCE {
                return Err(BeliefError::InvalidEntry { index, value: *p });
            }
            if *p < 0.0 {
                *p = 0.0;
                clamped = true;
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(BeliefError::NotNormalized(sum));
        }
        if clamped {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(Belief(probs))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform belief over an empty state space");
        Belief(vec![1.0 / n as f64; n])
    }

    /// All mass on `state`.
    pub fn degenerate(n: usize, state: usize) -> Self {
        assert!(state < n);
        let mut probs = vec![0.0; n];
        probs[state] = 1.0;
        Belief(probs)
    }

    /// Normalizes nonnegative weights. Returns `None` when the total mass is
    /// zero or not finite.
    pub fn from_weights(mut weights: Vec<f64>) -> Option<Self> {
        let mut total = 0.0;
        for w in weights.iter_mut() {
            if *w < 0.0 {
                *w = 0.0;
            }
            total += *w;
        }
        if !(total > 0.0 && total.is_finite()) {
            return None;
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Some(Belief(weights))
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Belief(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Belief) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Mixed-radix index space for joint actions or joint observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointSpace {
    sizes: Vec<usize>,
    total: usize,
}

impl JointSpace {
    pub fn new(sizes: Vec<usize>) -> Self {
        let total = sizes.iter().product();
        JointSpace { sizes, total }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn flatten(&self, components: &[usize]) -> usize {
        debug_assert_eq!(components.len(), self.sizes.len());
        components
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&c, &size)| {
                debug_assert!(c < size);
                acc * size + c
            })
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        for (slot, &size) in out.iter_mut().zip(&self.sizes).rev() {
            *slot = flat % size;
            flat /= size;
        }
        out
    }

    /// Component of `flat` belonging to `agent`.
    pub fn component(&self, flat: usize, agent: usize) -> usize {
        let stride: usize = self.sizes[agent + 1..].iter().product();
        (flat / stride) % self.sizes[agent]
    }
}

/// Uncertainty function `g` in ρ(b,a) = Σ R(s,a) b(s) − α g(b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Uncertainty {
    /// Plain Dec-POMDP reward.
    None,
    /// Shannon entropy in bits.
    ShannonEntropy,
}

impl Uncertainty {
    pub fn as_str(self) -> &'static str {
        match self {
            Uncertainty::None => "none",
            Uncertainty::ShannonEntropy => "shannon-entropy",
        }
    }
}

impl fmt::Display for Uncertainty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Uncertainty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Uncertainty::None),
            "shannon-entropy" | "entropy" => Ok(Uncertainty::ShannonEntropy),
            other => Err(format!("unknown uncertainty function `{other}`")),
        }
    }
}

/// A discrete ρDec-POMDP.
///
/// Immutable once built; construct through [`ModelBuilder`].
#[derive(Debug, Clone, PartialEq)]
pub struct RhoDecPomdp {
    states: Vec<String>,
    actions: Vec<Vec<String>>,
    observations: Vec<Vec<String>>,
    joint_actions: JointSpace,
    joint_observations: JointSpace,
    /// `[a][s][s']`
    transition: Vec<f64>,
    /// `[a][s'][z]`
    observation: Vec<f64>,
    /// `[a][z][s']`, transposed copy of `observation` for filtering.
    observation_by_z: Vec<f64>,
    /// `[a][s]`
    reward: Vec<f64>,
    alpha: f64,
    uncertainty: Uncertainty,
    initial_belief: Belief,
}

impl RhoDecPomdp {
    pub fn n_agents(&self) -> usize {
        self.actions.len()
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self, agent: usize) -> &[String] {
        &self.actions[agent]
    }

    pub fn observations(&self, agent: usize) -> &[String] {
        &self.observations[agent]
    }

    pub fn joint_actions(&self) -> &JointSpace {
        &self.joint_actions
    }

    pub fn joint_observations(&self) -> &JointSpace {
        &self.joint_observations
    }

    pub fn n_joint_actions(&self) -> usize {
        self.joint_actions.len()
    }

    pub fn n_joint_observations(&self) -> usize {
        self.joint_observations.len()
    }

    /// T(s'|s,a).
    #[inline]
    pub fn transition(&self, s: usize, a: usize, next: usize) -> f64 {
        let n = self.n_states();
        self.transition[(a * n + s) * n + next]
    }

    /// Row T(·|s,a).
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let n = self.n_states();
        let start = (a * n + s) * n;
        &self.transition[start..start + n]
    }

    /// O(z|s',a).
    #[inline]
    pub fn observation(&self, a: usize, next: usize, z: usize) -> f64 {
        let nz = self.n_joint_observations();
        self.observation[(a * self.n_states() + next) * nz + z]
    }

    /// Row O(·|s',a).
    #[inline]
    pub fn observation_row(&self, a: usize, next: usize) -> &[f64] {
        let nz = self.n_joint_observations();
        let start = (a * self.n_states() + next) * nz;
        &self.observation[start..start + nz]
    }

    /// O(z|·,a) as a vector over s'.
    #[inline]
    pub fn observation_likelihood(&self, a: usize, z: usize) -> &[f64] {
        let n = self.n_states();
        let start = (a * self.n_joint_observations() + z) * n;
        &self.observation_by_z[start..start + n]
    }

    /// R(s,a).
    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[a * self.n_states() + s]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn uncertainty(&self) -> Uncertainty {
        self.uncertainty
    }

    pub fn initial_belief(&self) -> &Belief {
        &self.initial_belief
    }

    /// Same model with a different initial belief.
    pub fn with_initial_belief(&self, belief: Belief) -> Self {
        assert_eq!(belief.len(), self.n_states());
        RhoDecPomdp {
            initial_belief: belief,
            ..self.clone()
        }
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_model(self)
    }
}

/// Mutable construction site for a [`RhoDecPomdp`]. All tables start at zero.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    states: Vec<String>,
    actions: Vec<Vec<String>>,
    observations: Vec<Vec<String>>,
    joint_actions: JointSpace,
    joint_observations: JointSpace,
    transition: Vec<f64>,
    observation: Vec<f64>,
    reward: Vec<f64>,
    alpha: f64,
    uncertainty: Uncertainty,
    initial_belief: Belief,
}

impl ModelBuilder {
    pub fn new(
        states: Vec<String>,
        actions: Vec<Vec<String>>,
        observations: Vec<Vec<String>>,
    ) -> Self {
        assert!(!states.is_empty(), "model needs at least one state");
        assert!(!actions.is_empty(), "model needs at least one agent");
        assert_eq!(actions.len(), observations.len());
        let joint_actions = JointSpace::new(actions.iter().map(Vec::len).collect());
        let joint_observations = JointSpace::new(observations.iter().map(Vec::len).collect());
        let n = states.len();
        let na = joint_actions.len();
        let nz = joint_observations.len();
        ModelBuilder {
            transition: vec![0.0; na * n * n],
            observation: vec![0.0; na * n * nz],
            reward: vec![0.0; na * n],
            initial_belief: Belief::uniform(n),
            alpha: 0.0,
            uncertainty: Uncertainty::None,
            states,
            actions,
            observations,
            joint_actions,
            joint_observations,
        }
    }

    /// Builder with labels generated from sizes (`s0..`, `a0..`, `o0..`).
    pub fn with_sizes(n_states: usize, actions: &[usize], observations: &[usize]) -> Self {
        let labels = |prefix: &str, n: usize| (0..n).map(|i| format!("{prefix}{i}")).collect();
        ModelBuilder::new(
            labels("s", n_states),
            actions.iter().map(|&n| labels("a", n)).collect(),
            observations.iter().map(|&n| labels("o", n)).collect(),
        )
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn joint_actions(&self) -> &JointSpace {
        &self.joint_actions
    }

    pub fn joint_observations(&self) -> &JointSpace {
        &self.joint_observations
    }

    pub fn set_transition(&mut self, s: usize, a: usize, next: usize, p: f64) -> &mut Self {
        let n = self.n_states();
        self.transition[(a * n + s) * n + next] = p;
        self
    }

    pub fn transition(&self, s: usize, a: usize, next: usize) -> f64 {
        let n = self.n_states();
        self.transition[(a * n + s) * n + next]
    }

    pub fn set_observation(&mut self, a: usize, next: usize, z: usize, p: f64) -> &mut Self {
        let (n, nz) = (self.n_states(), self.joint_observations.len());
        self.observation[(a * n + next) * nz + z] = p;
        self
    }

    pub fn observation(&self, a: usize, next: usize, z: usize) -> f64 {
        let nz = self.joint_observations.len();
        self.observation[(a * self.n_states() + next) * nz + z]
    }

    pub fn set_reward(&mut self, s: usize, a: usize, r: f64) -> &mut Self {
        let n = self.n_states();
        self.reward[a * n + s] = r;
        self
    }

    pub fn set_alpha(&mut self, alpha: f64) -> &mut Self {
        self.alpha = alpha;
        self
    }

    pub fn set_uncertainty(&mut self, uncertainty: Uncertainty) -> &mut Self {
        self.uncertainty = uncertainty;
        self
    }

    pub fn set_initial_belief(&mut self, belief: Belief) -> &mut Self {
        assert_eq!(belief.len(), self.n_states());
        self.initial_belief = belief;
        self
    }

    /// Divides every T row and O row by its sum when the sum is within
    /// `tolerance` of one. Rows already within 1e-12 are left untouched.
    pub(crate) fn normalize_rows(&mut self, tolerance: f64) {
        let n = self.n_states();
        let nz = self.joint_observations.len();
        for row in self.transition.chunks_mut(n).chain(self.observation.chunks_mut(nz)) {
            let sum: f64 = row.iter().sum();
            let residual = (sum - 1.0).abs();
            if residual > 1e-12 && residual < tolerance && sum > 0.0 {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
    }

    pub fn build(self) -> RhoDecPomdp {
        let n = self.states.len();
        let na = self.joint_actions.len();
        let nz = self.joint_observations.len();
        let mut observation_by_z = vec![0.0; na * nz * n];
        for a in 0..na {
            for next in 0..n {
                for z in 0..nz {
                    observation_by_z[(a * nz + z) * n + next] = self.observation[(a * n + next) * nz + z];
                }
            }
        }
        RhoDecPomdp {
            states: self.states,
            actions: self.actions,
            observations: self.observations,
            joint_actions: self.joint_actions,
            joint_observations: self.joint_observations,
            transition: self.transition,
            observation: self.observation,
            observation_by_z,
            reward: self.reward,
            alpha: self.alpha,
            uncertainty: self.uncertainty,
            initial_belief: self.initial_belief,
        }
    }
}

/// Which table row a violation refers to.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "table", rename_all = "snake_case")]
pub enum ViolationKind {
    /// Σ_{s'} T(s'|s,a) ≠ 1.
    TransitionRow { state: usize, joint_action: usize },
    /// Σ_z O(z|s',a) ≠ 1.
    ObservationRow { next_state: usize, joint_action: usize },
    TransitionEntry { state: usize, joint_action: usize, next_state: usize },
    ObservationEntry { next_state: usize, joint_action: usize, joint_observation: usize },
    RewardEntry { state: usize, joint_action: usize },
    InitialBelief,
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    #[serde(flatten)]
    pub kind: ViolationKind,
    /// Row-sum residual (`sum − 1`) for row violations, the offending value
    /// otherwise.
    pub residual: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::TransitionRow { state, joint_action } => write!(
                f,
                "T row (s={state}, a={joint_action}) sums to 1{:+e}",
                self.residual
            ),
            ViolationKind::ObservationRow { next_state, joint_action } => write!(
                f,
                "O row (s'={next_state}, a={joint_action}) sums to 1{:+e}",
                self.residual
            ),
            ViolationKind::TransitionEntry { state, joint_action, next_state } => write!(
                f,
                "T(s'={next_state}|s={state}, a={joint_action}) = {} is not a probability",
                self.residual
            ),
            ViolationKind::ObservationEntry { next_state, joint_action, joint_observation } => write!(
                f,
                "O(z={joint_observation}|s'={next_state}, a={joint_action}) = {} is not a probability",
                self.residual
            ),
            ViolationKind::RewardEntry { state, joint_action } => {
                write!(f, "R(s={state}, a={joint_action}) = {} is not finite", self.residual)
            }
            ViolationKind::InitialBelief => {
                write!(f, "initial belief is invalid (mass residual {:e})", self.residual)
            }
            ViolationKind::Alpha => write!(f, "alpha = {} must be finite and nonnegative", self.residual),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn is_probability(p: f64) -> bool {
    p.is_finite() && (-NEGATIVE_NOISE..=1.0 + STOCHASTIC_TOLERANCE).contains(&p)
}

/// Checks every structural invariant of the model. Violations are data:
/// an empty report means the model is well formed.
pub fn validate_model(model: &RhoDecPomdp) -> ValidationReport {
    let mut violations = Vec::new();
    let n = model.n_states();
    let na = model.n_joint_actions();
    let nz = model.n_joint_observations();

    for a in 0..na {
        for s in 0..n {
            let row = model.transition_row(s, a);
            for (next, &p) in row.iter().enumerate() {
                if !is_probability(p) {
                    violations.push(Violation {
                        kind: ViolationKind::TransitionEntry { state: s, joint_action: a, next_state: next },
                        residual: p,
                    });
                }
            }
            let residual = row.iter().sum::<f64>() - 1.0;
            if !(residual.abs() <= STOCHASTIC_TOLERANCE) {
                violations.push(Violation {
                    kind: ViolationKind::TransitionRow { state: s, joint_action: a },
                    residual,
                });
            }
        }
    }

    for a in 0..na {
        for next in 0..n {
            let row = model.observation_row(a, next);
            for (z, &p) in row.iter().enumerate() {
                if !is_probability(p) {
                    violations.push(Violation {
                        kind: ViolationKind::ObservationEntry {
                            next_state: next,
                            joint_action: a,
                            joint_observation: z,
                        },
                        residual: p,
                    });
                }
            }
            let residual = row.iter().sum::<f64>() - 1.0;
            if !(residual.abs() <= STOCHASTIC_TOLERANCE) {
                violations.push(Violation {
                    kind: ViolationKind::ObservationRow { next_state: next, joint_action: a },
                    residual,
                });
            }
        }
    }
    debug_assert_eq!(model.observation.len(), na * n * nz);

    for a in 0..na {
        for s in 0..n {
            let r = model.reward(s, a);
            if !r.is_finite() {
                violations.push(Violation {
                    kind: ViolationKind::RewardEntry { state: s, joint_action: a },
                    residual: r,
                });
            }
        }
    }

    let b0 = model.initial_belief().probs();
    let b0_residual = b0.iter().sum::<f64>() - 1.0;
    if b0.len() != n || b0.iter().any(|&p| !is_probability(p)) || !(b0_residual.abs() <= STOCHASTIC_TOLERANCE) {
        violations.push(Violation { kind: ViolationKind::InitialBelief, residual: b0_residual });
    }

    if !(model.alpha().is_finite() && model.alpha() >= 0.0) {
        violations.push(Violation { kind: ViolationKind::Alpha, residual: model.alpha() });
    }

    ValidationReport { violations }
}
