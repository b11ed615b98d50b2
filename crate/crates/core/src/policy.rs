//! Histories, decision rules, deterministic joint policies and their exact
//! evaluation.
//!
//! A local policy is stored as an observation-history tree: level `t` holds
//! one action per observation sequence of length `t`, indexed in base
//! `|Z_i|` with the earliest observation as the most significant digit. For
//! deterministic policies past actions are implied by the tree, so this is
//! behaviorally the same as a mapping from full action-observation histories.

use std::sync::Arc;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{rho_reward, successors};
use crate::model::{Belief, RhoDecPomdp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("{count} decision rules exceed the configured cap of {cap}")]
    CombinatorialLimit { count: BigUint, cap: u64 },
    #[error("malformed policy tree: {0}")]
    MalformedTree(String),
    #[error("unknown {kind} label `{label}` for agent {agent}")]
    UnknownLabel { kind: &'static str, agent: usize, label: String },
    #[error("policy has {found} agents, model has {expected}")]
    AgentCount { expected: usize, found: usize },
    #[error("malformed history: {0}")]
    MalformedHistory(String),
}

/// One agent's own action/observation sequence (a_0, z_1, …, a_{t−1}, z_t).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LocalHistory {
    actions: Vec<usize>,
    observations: Vec<usize>,
}

impl LocalHistory {
    pub fn new(actions: Vec<usize>, observations: Vec<usize>) -> Result<Self, PolicyError> {
        if actions.len() != observations.len() {
            return Err(PolicyError::MalformedHistory(format!(
                "{} actions but {} observations",
                actions.len(),
                observations.len()
            )));
        }
        Ok(LocalHistory { actions, observations })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn observations(&self) -> &[usize] {
        &self.observations
    }
}

/// One step of a joint history: flat joint action, then the flat joint
/// observation it produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JointStep {
    pub action: usize,
    pub observation: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct JointHistory {
    steps: Vec<JointStep>,
}

impl JointHistory {
    pub fn new(steps: Vec<JointStep>) -> Self {
        JointHistory { steps }
    }

    pub fn empty() -> Self {
        JointHistory::default()
    }

    pub fn steps(&self) -> &[JointStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, step: JointStep) {
        self.steps.push(step);
    }

    /// Zips per-agent local histories of equal length into a joint history.
    pub fn from_local(model: &RhoDecPomdp, locals: &[LocalHistory]) -> Result<Self, PolicyError> {
        if locals.len() != model.n_agents() {
            return Err(PolicyError::AgentCount { expected: model.n_agents(), found: locals.len() });
        }
        let t = locals.first().map_or(0, LocalHistory::len);
        if locals.iter().any(|h| h.len() != t) {
            return Err(PolicyError::MalformedHistory("local histories differ in length".into()));
        }
        for (i, h) in locals.iter().enumerate() {
            if h.actions.iter().any(|&a| a >= model.actions(i).len())
                || h.observations.iter().any(|&z| z >= model.observations(i).len())
            {
                return Err(PolicyError::MalformedHistory(format!("index out of range for agent {i}")));
            }
        }
        let steps = (0..t)
            .map(|k| {
                let a: Vec<usize> = locals.iter().map(|h| h.actions[k]).collect();
                let z: Vec<usize> = locals.iter().map(|h| h.observations[k]).collect();
                JointStep {
                    action: model.joint_actions().flatten(&a),
                    observation: model.joint_observations().flatten(&z),
                }
            })
            .collect();
        Ok(JointHistory { steps })
    }

    /// The local history of `agent`.
    pub fn local(&self, model: &RhoDecPomdp, agent: usize) -> LocalHistory {
        LocalHistory {
            actions: self.steps.iter().map(|s| model.joint_actions().component(s.action, agent)).collect(),
            observations: self
                .steps
                .iter()
                .map(|s| model.joint_observations().component(s.observation, agent))
                .collect(),
        }
    }
}

/// Index of an observation sequence within its tree level.
pub fn observation_sequence_index(observations: &[usize], n_observations: usize) -> usize {
    observations.iter().fold(0, |acc, &z| acc * n_observations + z)
}

/// Deterministic local policy as an observation-history tree.
///
/// The derived ordering is the lexicographic order of the level-by-level
/// action encoding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalPolicyTree {
    n_observations: usize,
    levels: Vec<Vec<usize>>,
}

impl LocalPolicyTree {
    /// Level `t` must hold `n_observations^t` actions.
    pub fn new(n_observations: usize, levels: Vec<Vec<usize>>) -> Result<Self, PolicyError> {
        if n_observations == 0 {
            return Err(PolicyError::MalformedTree("zero observations".into()));
        }
        let mut width = 1usize;
        for (t, level) in levels.iter().enumerate() {
            if level.len() != width {
                return Err(PolicyError::MalformedTree(format!(
                    "level {t} has {} nodes, expected {width}",
                    level.len()
                )));
            }
            width = width.saturating_mul(n_observations);
        }
        Ok(LocalPolicyTree { n_observations, levels })
    }

    pub fn empty(n_observations: usize) -> Self {
        LocalPolicyTree { n_observations, levels: Vec::new() }
    }

    /// Tree that plays `schedule[t]` at depth `t` regardless of observations.
    pub fn open_loop(n_observations: usize, schedule: &[usize]) -> Self {
        let mut width = 1;
        let levels = schedule
            .iter()
            .map(|&a| {
                let level = vec![a; width];
                width *= n_observations;
                level
            })
            .collect();
        LocalPolicyTree { n_observations, levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn n_observations(&self) -> usize {
        self.n_observations
    }

    /// δ_t: the actions of level `t`.
    pub fn rule(&self, t: usize) -> &[usize] {
        &self.levels[t]
    }

    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    #[inline]
    pub fn action(&self, t: usize, sequence: usize) -> usize {
        self.levels[t][sequence]
    }

    /// Action prescribed after observing `observations`.
    pub fn action_after(&self, observations: &[usize]) -> usize {
        self.levels[observations.len()][observation_sequence_index(observations, self.n_observations)]
    }

    /// Appends a decision rule for the next level.
    pub fn push_rule(&mut self, rule: Vec<usize>) {
        debug_assert_eq!(rule.len(), self.n_observations.pow(self.levels.len() as u32));
        self.levels.push(rule);
    }

    pub fn truncated(&self, depth: usize) -> Self {
        LocalPolicyTree {
            n_observations: self.n_observations,
            levels: self.levels[..depth.min(self.levels.len())].to_vec(),
        }
    }
}

/// One local policy tree per agent, all of the same depth.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointPolicy {
    trees: Vec<LocalPolicyTree>,
}

/// A joint policy for the first `t < h` steps (φ_t).
pub type PartialJointPolicy = JointPolicy;

impl JointPolicy {
    pub fn new(trees: Vec<LocalPolicyTree>) -> Result<Self, PolicyError> {
        if let Some(first) = trees.first() {
            if trees.iter().any(|t| t.depth() != first.depth()) {
                return Err(PolicyError::MalformedTree("agent trees differ in depth".into()));
            }
        }
        Ok(JointPolicy { trees })
    }

    /// Depth-0 policy for `model` (nothing decided yet).
    pub fn empty(model: &RhoDecPomdp) -> Self {
        JointPolicy {
            trees: (0..model.n_agents())
                .map(|i| LocalPolicyTree::empty(model.observations(i).len()))
                .collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.trees.first().map_or(0, LocalPolicyTree::depth)
    }

    pub fn trees(&self) -> &[LocalPolicyTree] {
        &self.trees
    }

    pub fn tree(&self, agent: usize) -> &LocalPolicyTree {
        &self.trees[agent]
    }

    /// Flat joint action at depth `t` given each agent's observation
    /// sequence index.
    pub fn joint_action(&self, model: &RhoDecPomdp, t: usize, sequences: &[usize]) -> usize {
        let sizes = model.joint_actions().sizes();
        self.trees
            .iter()
            .zip(sequences)
            .zip(sizes)
            .fold(0, |acc, ((tree, &seq), &size)| acc * size + tree.action(t, seq))
    }

    /// φ_{t+1} = (φ_t, δ_t).
    pub fn extended(&self, rules: &[Vec<usize>]) -> Self {
        let mut next = self.clone();
        for (tree, rule) in next.trees.iter_mut().zip(rules) {
            tree.push_rule(rule.clone());
        }
        next
    }

    pub fn truncated(&self, depth: usize) -> Self {
        JointPolicy { trees: self.trees.iter().map(|t| t.truncated(depth)).collect() }
    }

    /// Checks agent count, branching factors and action ranges against the model.
    pub fn check_against(&self, model: &RhoDecPomdp) -> Result<(), PolicyError> {
        if self.trees.len() != model.n_agents() {
            return Err(PolicyError::AgentCount { expected: model.n_agents(), found: self.trees.len() });
        }
        for (i, tree) in self.trees.iter().enumerate() {
            if tree.n_observations != model.observations(i).len() {
                return Err(PolicyError::MalformedTree(format!("agent {i} branching factor mismatch")));
            }
            let n_actions = model.actions(i).len();
            if tree.levels.iter().flatten().any(|&a| a >= n_actions) {
                return Err(PolicyError::MalformedTree(format!("agent {i} action out of range")));
            }
        }
        Ok(())
    }
}

/// P(θ_t | π, b0). Zero for histories whose actions deviate from the policy.
pub fn history_probability(model: &RhoDecPomdp, policy: &JointPolicy, theta: &JointHistory) -> f64 {
    assert!(theta.len() <= policy.depth(), "history longer than the policy");
    let n = model.n_agents();
    let mut sequences = vec![0usize; n];
    let mut belief = model.initial_belief().clone();
    let mut probability = 1.0;
    for (t, step) in theta.steps().iter().enumerate() {
        if policy.joint_action(model, t, &sequences) != step.action {
            return 0.0;
        }
        match crate::belief::belief_update(model, &belief, step.action, step.observation) {
            Ok(r) => {
                probability *= r.normalizer;
                belief = r.posterior;
            }
            Err(_) => return 0.0,
        }
        for (i, seq) in sequences.iter_mut().enumerate() {
            let z = model.joint_observations().component(step.observation, i);
            *seq = *seq * model.observations(i).len() + z;
        }
    }
    probability
}

/// V(π) over the first `horizon` steps, by depth-first traversal of the
/// reachable joint-observation branches in ascending order.
pub fn policy_value(model: &RhoDecPomdp, policy: &JointPolicy, horizon: usize) -> f64 {
    assert!(policy.depth() >= horizon, "policy shallower than the horizon");
    if horizon == 0 {
        return 0.0;
    }
    let sequences = vec![0usize; model.n_agents()];
    value_below(model, policy, horizon, 0, model.initial_belief(), &sequences)
}

/// Expected ρ-reward collected from depth `t` onwards, conditional on the
/// branch having been reached.
fn value_below(
    model: &RhoDecPomdp,
    policy: &JointPolicy,
    horizon: usize,
    t: usize,
    belief: &Belief,
    sequences: &[usize],
) -> f64 {
    let a = policy.joint_action(model, t, sequences);
    let mut value = rho_reward(model, belief, a);
    if t + 1 == horizon {
        return value;
    }
    let mut child = sequences.to_vec();
    for (z, r) in successors(model, belief, a) {
        for (i, seq) in child.iter_mut().enumerate() {
            *seq = sequences[i] * model.observations(i).len() + model.joint_observations().component(z, i);
        }
        value += r.normalizer * value_below(model, policy, horizon, t + 1, &r.posterior, &child);
    }
    value
}

/// Policy-space sizes for one agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyCounts {
    /// Mappings from full action-observation histories to actions:
    /// |A|^(((|A||Z|)^h − 1)/(|A||Z| − 1)).
    pub full_history: BigUint,
    /// Observation-history trees: |A|^(Σ_{t<h} |Z|^t).
    pub observation_tree: BigUint,
}

pub fn count_local_policies(action_count: u64, observation_count: u64, horizon: u32) -> PolicyCounts {
    assert!(action_count >= 1 && observation_count >= 1 && horizon >= 1);
    let geometric = |ratio: u64| -> BigUint {
        (0..horizon).fold(BigUint::from(0u32), |acc, t| acc + BigUint::from(ratio).pow(t))
    };
    let base = BigUint::from(action_count);
    let full_exponent = geometric(action_count * observation_count);
    let tree_exponent = geometric(observation_count);
    PolicyCounts {
        full_history: big_pow(&base, &full_exponent),
        observation_tree: big_pow(&base, &tree_exponent),
    }
}

fn big_pow(base: &BigUint, exponent: &BigUint) -> BigUint {
    let exponent = u32::try_from(exponent).expect("policy count exponent exceeds u32");
    base.pow(exponent)
}

/// Number of local decision rules at depth `t`: |A|^(|Z|^t).
pub fn decision_rule_count(action_count: usize, observation_count: usize, depth: usize) -> BigUint {
    let nodes = BigUint::from(observation_count).pow(depth as u32);
    big_pow(&BigUint::from(action_count), &nodes)
}

/// Lexicographic odometer over all local decision rules at one depth.
#[derive(Debug, Clone)]
pub struct DecisionRules {
    action_count: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for DecisionRules {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let mut digits = self.current.take().unwrap();
        let mut carried_out = true;
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < self.action_count {
                carried_out = false;
                break;
            }
            *d = 0;
        }
        if !carried_out {
            self.current = Some(digits);
        }
        Some(out)
    }
}

/// Every assignment of actions to the `|Z|^t` observation sequences of
/// length `t`, in lexicographic order. Refuses when the count exceeds `cap`.
pub fn enumerate_decision_rules(
    action_count: usize,
    observation_count: usize,
    depth: usize,
    cap: u64,
) -> Result<DecisionRules, PolicyError> {
    assert!(action_count >= 1 && observation_count >= 1);
    let count = decision_rule_count(action_count, observation_count, depth);
    if count > BigUint::from(cap) {
        return Err(PolicyError::CombinatorialLimit { count, cap });
    }
    let width = observation_count.pow(depth as u32);
    Ok(DecisionRules { action_count, current: Some(vec![0; width]) })
}

/// A reachable joint history at the frontier of a partial policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    /// P(θ_t | φ, b0).
    pub probability: f64,
    /// τ(θ_t, b0).
    pub belief: Arc<Belief>,
    /// Per-agent observation sequence index of θ_t.
    pub sequences: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialEvaluation {
    /// V(φ_t): expected ρ-reward of steps 0..t.
    pub prefix_value: f64,
    /// Positive-probability joint histories of length t, ordered by joint
    /// observation path.
    pub leaves: Vec<Leaf>,
}

/// Exact value of φ_t and its frontier, breadth first.
pub fn evaluate_partial_policy(model: &RhoDecPomdp, phi: &PartialJointPolicy) -> PartialEvaluation {
    let mut leaves = vec![Leaf {
        probability: 1.0,
        belief: Arc::new(model.initial_belief().clone()),
        sequences: vec![0; model.n_agents()],
    }];
    let mut prefix_value = 0.0;
    for t in 0..phi.depth() {
        let mut next = Vec::new();
        for leaf in &leaves {
            let a = phi.joint_action(model, t, &leaf.sequences);
            prefix_value += leaf.probability * rho_reward(model, &leaf.belief, a);
            for (z, r) in successors(model, &leaf.belief, a) {
                next.push(Leaf {
                    probability: leaf.probability * r.normalizer,
                    belief: Arc::new(r.posterior),
                    sequences: child_sequences(model, &leaf.sequences, z),
                });
            }
        }
        leaves = next;
    }
    PartialEvaluation { prefix_value, leaves }
}

pub(crate) fn child_sequences(model: &RhoDecPomdp, parent: &[usize], z: usize) -> Vec<usize> {
    parent
        .iter()
        .enumerate()
        .map(|(i, &seq)| seq * model.observations(i).len() + model.joint_observations().component(z, i))
        .collect()
}

/// Serialized form of a joint policy: one nested action/children record per
/// agent. Children are listed in observation order and carry the label of
/// the observation that leads to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub horizon: usize,
    pub agents: Vec<AgentPolicyRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPolicyRecord {
    pub agent: usize,
    pub root: PolicyNodeRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNodeRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<String>,
    pub action: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<PolicyNodeRecord>,
}

impl JointPolicy {
    pub fn to_document(&self, model: &RhoDecPomdp) -> PolicyDocument {
        fn node(
            model: &RhoDecPomdp,
            agent: usize,
            tree: &LocalPolicyTree,
            t: usize,
            seq: usize,
            observation: Option<String>,
        ) -> PolicyNodeRecord {
            let children = if t + 1 < tree.depth() {
                (0..tree.n_observations)
                    .map(|z| {
                        let label = model.observations(agent)[z].clone();
                        node(model, agent, tree, t + 1, seq * tree.n_observations + z, Some(label))
                    })
                    .collect()
            } else {
                Vec::new()
            };
            PolicyNodeRecord {
                observation,
                action: model.actions(agent)[tree.action(t, seq)].clone(),
                children,
            }
        }
        assert!(self.depth() >= 1, "cannot serialize an empty policy");
        PolicyDocument {
            horizon: self.depth(),
            agents: self
                .trees
                .iter()
                .enumerate()
                .map(|(i, tree)| AgentPolicyRecord { agent: i, root: node(model, i, tree, 0, 0, None) })
                .collect(),
        }
    }

    pub fn from_document(model: &RhoDecPomdp, doc: &PolicyDocument) -> Result<Self, PolicyError> {
        if doc.agents.len() != model.n_agents() {
            return Err(PolicyError::AgentCount { expected: model.n_agents(), found: doc.agents.len() });
        }
        let mut trees = Vec::with_capacity(doc.agents.len());
        for (i, record) in doc.agents.iter().enumerate() {
            if record.agent != i {
                return Err(PolicyError::MalformedTree(format!("agent records out of order at {i}")));
            }
            let nz = model.observations(i).len();
            let mut levels: Vec<Vec<usize>> = (0..doc.horizon).map(|t| vec![usize::MAX; nz.pow(t as u32)]).collect();
            fill_levels(model, i, &record.root, 0, 0, doc.horizon, &mut levels)?;
            trees.push(LocalPolicyTree::new(nz, levels)?);
        }
        let policy = JointPolicy::new(trees)?;
        policy.check_against(model)?;
        Ok(policy)
    }
}

fn fill_levels(
    model: &RhoDecPomdp,
    agent: usize,
    node: &PolicyNodeRecord,
    t: usize,
    seq: usize,
    horizon: usize,
    levels: &mut [Vec<usize>],
) -> Result<(), PolicyError> {
    let action = model
        .actions(agent)
        .iter()
        .position(|a| *a == node.action)
        .ok_or_else(|| PolicyError::UnknownLabel { kind: "action", agent, label: node.action.clone() })?;
    levels[t][seq] = action;
    let nz = model.observations(agent).len();
    if t + 1 == horizon {
        if !node.children.is_empty() {
            return Err(PolicyError::MalformedTree(format!("agent {agent}: children below the horizon")));
        }
        return Ok(());
    }
    if node.children.len() != nz {
        return Err(PolicyError::MalformedTree(format!(
            "agent {agent}: node at depth {t} has {} children, expected {nz}",
            node.children.len()
        )));
    }
    for (z, child) in node.children.iter().enumerate() {
        if let Some(label) = &child.observation {
            if model.observations(agent)[z] != *label {
                return Err(PolicyError::UnknownLabel { kind: "observation", agent, label: label.clone() });
            }
        }
        fill_levels(model, agent, child, t + 1, seq * nz + z, horizon, levels)?;
    }
    Ok(())
}
