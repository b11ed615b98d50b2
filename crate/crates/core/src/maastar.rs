//! Multi-agent A*: best-first search over partial joint policies.
//!
//! A node holds φ_t, its exact prefix value V(φ_t) and a completion bound
//! H_{h−t}(φ_t); nodes are expanded in order of V(φ_t) + H_{h−t}(φ_t).
//! Children append one joint decision rule. The last decision rule of a
//! policy is chosen by solving the induced one-shot team game exactly
//! (enumerate the rules of all but the last agent, best-respond with the
//! last), so only the best complete child is materialized.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{entropy_bits, expected_state_reward, rho_reward, successors};
use crate::model::{Belief, RhoDecPomdp, Uncertainty};
use crate::policy::{child_sequences, JointPolicy, Leaf, PartialJointPolicy, PolicyError};

/// Nodes whose priority falls this far below the incumbent are discarded.
const PRUNE_MARGIN: f64 = 1e-12;
const TIE_EPS: f64 = 1e-12;
const BELIEF_QUANTUM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeuristicKind {
    /// Optimal value of the centralized, fully communicating ρPOMDP.
    #[default]
    CentralizedPomdp,
    /// Optimal value of the underlying MDP with state rewards only.
    Mdp,
}

impl std::str::FromStr for HeuristicKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pomdp" | "centralized-pomdp" => Ok(HeuristicKind::CentralizedPomdp),
            "mdp" => Ok(HeuristicKind::Mdp),
            other => Err(format!("unknown heuristic `{other}` (expected pomdp or mdp)")),
        }
    }
}

/// A partial joint policy in the search tree.
#[derive(Debug, Clone)]
pub struct SearchNode {
    pub phi: PartialJointPolicy,
    /// V(φ_t).
    pub exact_value: f64,
    /// H_{h−t}(φ_t).
    pub heuristic_value: f64,
    /// exact_value + heuristic_value.
    pub priority: f64,
    pub leaves: Arc<Vec<Leaf>>,
}

impl SearchNode {
    pub fn depth(&self) -> usize {
        self.phi.depth()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveStats {
    pub nodes_expanded: u64,
    pub nodes_generated: u64,
    pub wall_time_secs: f64,
    /// Priority of the root node (an upper bound on the optimum).
    pub root_bound: f64,
    /// Best remaining upper bound minus incumbent value; zero when solved.
    pub bound_gap: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub policy: JointPolicy,
    pub value: f64,
    pub nodes_expanded: u64,
    pub nodes_generated: u64,
    pub wall_time: Duration,
    pub root_bound: f64,
    /// Priorities of expanded nodes in expansion order, when tracing is on.
    pub expanded_priorities: Vec<f64>,
}

impl SolveResult {
    pub fn stats(&self) -> SolveStats {
        SolveStats {
            nodes_expanded: self.nodes_expanded,
            nodes_generated: self.nodes_generated,
            wall_time_secs: self.wall_time.as_secs_f64(),
            root_bound: self.root_bound,
            bound_gap: 0.0,
        }
    }
}

/// State of a search stopped by its expansion cap.
#[derive(Debug, Clone)]
pub struct Exhausted {
    pub incumbent: Option<(JointPolicy, f64)>,
    /// Largest priority left in the open list.
    pub upper_bound: f64,
    pub bound_gap: f64,
    pub nodes_expanded: u64,
    pub nodes_generated: u64,
}

#[derive(Debug, Error, Clone)]
pub enum SolveError {
    #[error("expansion cap hit after {} expansions (bound gap {})", .0.nodes_expanded, .0.bound_gap)]
    ResourceExhausted(Box<Exhausted>),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
}

/// Memoized optimal values of the centralized ρPOMDP by exact expectimax
/// over joint actions and joint observations.
#[derive(Debug)]
pub struct PomdpBound<'m> {
    model: &'m RhoDecPomdp,
    memo: HashMap<(Vec<i64>, usize), f64>,
}

impl<'m> PomdpBound<'m> {
    pub fn new(model: &'m RhoDecPomdp) -> Self {
        PomdpBound { model, memo: HashMap::new() }
    }

    /// V*_POMDP(b, k).
    pub fn value(&mut self, b: &Belief, remaining: usize) -> f64 {
        match remaining {
            0 => 0.0,
            1 => self.myopic(b),
            _ => {
                let key = (quantize(b), remaining);
                if let Some(&v) = self.memo.get(&key) {
                    return v;
                }
                let model = self.model;
                let penalty = self.penalty(b);
                let mut best = f64::NEG_INFINITY;
                for a in 0..model.n_joint_actions() {
                    let mut q = expected_state_reward(model, b, a) - penalty;
                    for (_, r) in successors(model, b, a) {
                        q += r.normalizer * self.value(&r.posterior, remaining - 1);
                    }
                    best = best.max(q);
                }
                self.memo.insert(key, best);
                best
            }
        }
    }

    /// Σ over leaves of probability × V*_POMDP(belief, remaining).
    pub fn leaves_bound(&mut self, leaves: &[Leaf], remaining: usize) -> f64 {
        if remaining == 0 {
            return 0.0;
        }
        leaves.iter().map(|l| l.probability * self.value(&l.belief, remaining)).sum()
    }

    fn penalty(&self, b: &Belief) -> f64 {
        match self.model.uncertainty() {
            Uncertainty::None => 0.0,
            Uncertainty::ShannonEntropy => self.model.alpha() * entropy_bits(b.probs()),
        }
    }

    fn myopic(&self, b: &Belief) -> f64 {
        let best = (0..self.model.n_joint_actions())
            .map(|a| expected_state_reward(self.model, b, a))
            .fold(f64::NEG_INFINITY, f64::max);
        best - self.penalty(b)
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }
}

fn quantize(b: &Belief) -> Vec<i64> {
    b.probs().iter().map(|p| (p * BELIEF_QUANTUM).round() as i64).collect()
}

/// H_{h−t} from the centralized ρPOMDP relaxation.
pub fn centralized_pomdp_bound(model: &RhoDecPomdp, leaves: &[Leaf], remaining_steps: usize) -> f64 {
    PomdpBound::new(model).leaves_bound(leaves, remaining_steps)
}

/// Finite-horizon optimal values of the underlying MDP with rewards R(s,a).
#[derive(Debug, Clone)]
pub struct MdpBound {
    /// `values[k][s]` = V*_MDP(s, k).
    values: Vec<Vec<f64>>,
}

impl MdpBound {
    pub fn new(model: &RhoDecPomdp, max_steps: usize) -> Self {
        let n = model.n_states();
        let mut values = vec![vec![0.0; n]];
        for k in 1..=max_steps {
            let prev = &values[k - 1];
            let layer = (0..n)
                .map(|s| {
                    (0..model.n_joint_actions())
                        .map(|a| {
                            let future: f64 =
                                model.transition_row(s, a).iter().zip(prev).map(|(t, v)| t * v).sum();
                            model.reward(s, a) + future
                        })
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            values.push(layer);
        }
        MdpBound { values }
    }

    pub fn value(&self, b: &Belief, remaining: usize) -> f64 {
        b.probs().iter().zip(&self.values[remaining]).map(|(p, v)| p * v).sum()
    }

    pub fn leaves_bound(&self, leaves: &[Leaf], remaining: usize) -> f64 {
        leaves.iter().map(|l| l.probability * self.value(&l.belief, remaining)).sum()
    }
}

/// H_{h−t} from the fully observable MDP relaxation. The entropy penalty is
/// nonpositive, so dropping it keeps the bound admissible.
pub fn mdp_bound(model: &RhoDecPomdp, leaves: &[Leaf], remaining_steps: usize) -> f64 {
    MdpBound::new(model, remaining_steps).leaves_bound(leaves, remaining_steps)
}

enum Heuristic<'m> {
    Pomdp(PomdpBound<'m>),
    Mdp(MdpBound),
}

impl Heuristic<'_> {
    fn bound(&mut self, leaves: &[Leaf], remaining: usize) -> f64 {
        match self {
            Heuristic::Pomdp(h) => h.leaves_bound(leaves, remaining),
            Heuristic::Mdp(h) => h.leaves_bound(leaves, remaining),
        }
    }
}

struct OpenEntry {
    node: SearchNode,
    complete: bool,
    sequence: u64,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // max-heap: higher priority first, then lexicographically smaller
    // policy, then earlier insertion
    fn cmp(&self, other: &Self) -> Ordering {
        self.node
            .priority
            .total_cmp(&other.node.priority)
            .then_with(|| other.node.phi.cmp(&self.node.phi))
            .then_with(|| other.sequence.cmp(&self.sequence))
    }
}

/// Configurable MAA* run.
pub struct MaaStar<'m> {
    model: &'m RhoDecPomdp,
    horizon: usize,
    heuristic: HeuristicKind,
    expansion_cap: Option<u64>,
    child_cap: u64,
    trace: bool,
    initial_belief: Belief,
}

impl<'m> MaaStar<'m> {
    pub fn new(model: &'m RhoDecPomdp, horizon: usize) -> Self {
        MaaStar {
            model,
            horizon,
            heuristic: HeuristicKind::default(),
            expansion_cap: None,
            child_cap: 50_000_000,
            trace: false,
            initial_belief: model.initial_belief().clone(),
        }
    }

    pub fn heuristic(mut self, kind: HeuristicKind) -> Self {
        self.heuristic = kind;
        self
    }

    pub fn expansion_cap(mut self, cap: Option<u64>) -> Self {
        self.expansion_cap = cap;
        self
    }

    /// Upper limit on joint decision rules enumerated per expansion.
    pub fn child_cap(mut self, cap: u64) -> Self {
        self.child_cap = cap;
        self
    }

    pub fn trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    /// Plan from `b` instead of the model's initial belief.
    pub fn initial_belief(mut self, b: Belief) -> Self {
        assert_eq!(b.len(), self.model.n_states());
        self.initial_belief = b;
        self
    }

    pub fn root(&self) -> SearchNode {
        let leaves = Arc::new(vec![Leaf {
            probability: 1.0,
            belief: Arc::new(self.initial_belief.clone()),
            sequences: vec![0; self.model.n_agents()],
        }]);
        SearchNode {
            phi: JointPolicy::empty(self.model),
            exact_value: 0.0,
            heuristic_value: 0.0,
            priority: 0.0,
            leaves,
        }
    }

    pub fn solve(&self) -> Result<SolveResult, SolveError> {
        if self.horizon == 0 {
            return Err(SolveError::ZeroHorizon);
        }
        let start = Instant::now();
        let mut heuristic = match self.heuristic {
            HeuristicKind::CentralizedPomdp => Heuristic::Pomdp(PomdpBound::new(self.model)),
            HeuristicKind::Mdp => Heuristic::Mdp(MdpBound::new(self.model, self.horizon)),
        };

        let mut root = self.root();
        root.heuristic_value = heuristic.bound(&root.leaves, self.horizon);
        root.priority = root.heuristic_value;
        let root_bound = root.priority;

        let mut open = BinaryHeap::new();
        let mut sequence = 0u64;
        open.push(OpenEntry { node: root, complete: false, sequence });
        let mut incumbent: Option<(JointPolicy, f64)> = None;
        let mut expanded = 0u64;
        let mut generated = 1u64;
        let mut trace = Vec::new();

        while let Some(entry) = open.pop() {
            if entry.complete {
                return Ok(SolveResult {
                    value: entry.node.exact_value,
                    policy: entry.node.phi,
                    nodes_expanded: expanded,
                    nodes_generated: generated,
                    wall_time: start.elapsed(),
                    root_bound,
                    expanded_priorities: trace,
                });
            }
            let node = entry.node;
            if let Some((_, best)) = &incumbent {
                if node.priority <= best - PRUNE_MARGIN {
                    continue;
                }
            }
            if self.expansion_cap.is_some_and(|cap| expanded >= cap) {
                let upper_bound = node.priority.max(open.peek().map_or(f64::NEG_INFINITY, |e| e.node.priority));
                let bound_gap = incumbent.as_ref().map_or(f64::INFINITY, |(_, v)| upper_bound - v);
                return Err(SolveError::ResourceExhausted(Box::new(Exhausted {
                    incumbent,
                    upper_bound,
                    bound_gap,
                    nodes_expanded: expanded,
                    nodes_generated: generated,
                })));
            }
            expanded += 1;
            if self.trace {
                trace.push(node.priority);
            }

            if node.depth() + 1 == self.horizon {
                let (child, candidates) = self.best_completion(&node)?;
                generated += candidates;
                let better = incumbent.as_ref().is_none_or(|(_, v)| child.exact_value > v - PRUNE_MARGIN);
                if better {
                    if incumbent.as_ref().is_none_or(|(_, v)| child.exact_value > *v) {
                        incumbent = Some((child.phi.clone(), child.exact_value));
                    }
                    sequence += 1;
                    open.push(OpenEntry { node: child, complete: true, sequence });
                }
            } else {
                let remaining = self.horizon - node.depth() - 1;
                let threshold = incumbent.as_ref().map(|(_, v)| v - PRUNE_MARGIN);
                let children = self.expand(&node, &mut |leaves| heuristic.bound(leaves, remaining))?;
                for child in children {
                    generated += 1;
                    if threshold.is_some_and(|t| child.priority <= t) {
                        continue;
                    }
                    sequence += 1;
                    open.push(OpenEntry { node: child, complete: false, sequence });
                }
            }
        }
        unreachable!("open list emptied without a complete policy")
    }

    /// All children of `node` (one per joint decision rule over reachable
    /// observation sequences), with heuristic values from `bound`.
    pub fn expand(
        &self,
        node: &SearchNode,
        bound: &mut dyn FnMut(&[Leaf]) -> f64,
    ) -> Result<Vec<SearchNode>, PolicyError> {
        let model = self.model;
        let t = node.depth();
        let game = StageGame::new(model, &node.leaves, t);
        game.check_cap(0..model.n_agents(), self.child_cap)?;

        let n_leaves = node.leaves.len();
        let na = model.n_joint_actions();
        type Cached = (f64, Vec<(usize, f64, Arc<Belief>)>);
        let mut cache: Vec<Option<Cached>> = vec![None; n_leaves * na];
        let mut children = Vec::new();

        let mut odometer = game.odometer(0..model.n_agents());
        loop {
            let rules = game.rules(&odometer.digits, 0..model.n_agents());
            let mut exact = node.exact_value;
            let mut leaves = Vec::new();
            for (li, leaf) in node.leaves.iter().enumerate() {
                let a = joint_action_from_rules(model, &rules, &leaf.sequences);
                let slot = &mut cache[li * na + a];
                let (reward, succ) = slot.get_or_insert_with(|| {
                    let reward = rho_reward(model, &leaf.belief, a);
                    let succ = successors(model, &leaf.belief, a)
                        .into_iter()
                        .map(|(z, r)| (z, r.normalizer, Arc::new(r.posterior)))
                        .collect();
                    (reward, succ)
                });
                exact += leaf.probability * *reward;
                for (z, eta, belief) in succ.iter() {
                    leaves.push(Leaf {
                        probability: leaf.probability * eta,
                        belief: Arc::clone(belief),
                        sequences: child_sequences(model, &leaf.sequences, *z),
                    });
                }
            }
            let heuristic_value = bound(&leaves);
            children.push(SearchNode {
                phi: node.phi.extended(&rules),
                exact_value: exact,
                heuristic_value,
                priority: exact + heuristic_value,
                leaves: Arc::new(leaves),
            });
            if !odometer.advance().0 {
                break;
            }
        }
        Ok(children)
    }

    /// Best complete policy extending a depth-(h−1) node, and the number of
    /// candidate rules examined.
    pub fn best_completion(&self, node: &SearchNode) -> Result<(SearchNode, u64), PolicyError> {
        let model = self.model;
        let n = model.n_agents();
        let t = node.depth();
        let last = n - 1;
        let game = StageGame::new(model, &node.leaves, t);
        game.check_cap(0..last, self.child_cap)?;

        let na = model.n_joint_actions();
        let last_actions = model.actions(last).len();
        // payoff[leaf][joint action] = P(θ) ρ(b_θ, a)
        let payoff: Vec<Vec<f64>> = node
            .leaves
            .iter()
            .map(|leaf| {
                let penalty = match model.uncertainty() {
                    Uncertainty::None => 0.0,
                    Uncertainty::ShannonEntropy => model.alpha() * entropy_bits(leaf.belief.probs()),
                };
                (0..na)
                    .map(|a| leaf.probability * (expected_state_reward(model, &leaf.belief, a) - penalty))
                    .collect()
            })
            .collect();

        let n_last_types = game.types[last].len();
        let last_type_of: Vec<usize> = node
            .leaves
            .iter()
            .map(|l| game.type_index[last][&l.sequences[last]])
            .collect();

        let mut odometer = game.odometer(0..last);
        // leaves touched by each digit
        let digit_leaves: Vec<Vec<usize>> = odometer
            .owners
            .iter()
            .map(|&(agent, ty)| {
                let seq = game.types[agent][ty];
                (0..node.leaves.len()).filter(|&l| node.leaves[l].sequences[agent] == seq).collect()
            })
            .collect();

        let offsets: Vec<usize> = (0..last).map(|agent| odometer_offset(&game, agent)).collect();
        let leaf_digits: Vec<Vec<usize>> = node
            .leaves
            .iter()
            .map(|l| (0..last).map(|agent| offsets[agent] + game.type_index[agent][&l.sequences[agent]]).collect())
            .collect();
        let contribution = |digits: &[usize], leaf: usize, out: &mut [f64]| {
            let prefix = leaf_digits[leaf]
                .iter()
                .enumerate()
                .fold(0, |acc, (agent, &d)| acc * model.actions(agent).len() + digits[d]);
            for (a_last, o) in out.iter_mut().enumerate() {
                *o = payoff[leaf][prefix * last_actions + a_last];
            }
        };

        let mut contrib = vec![vec![0.0; last_actions]; node.leaves.len()];
        let mut sums = vec![0.0; n_last_types * last_actions];
        let recompute_all = |digits: &[usize], contrib: &mut Vec<Vec<f64>>, sums: &mut Vec<f64>| {
            sums.iter_mut().for_each(|s| *s = 0.0);
            for leaf in 0..contrib.len() {
                contribution(digits, leaf, &mut contrib[leaf]);
                let base = last_type_of[leaf] * last_actions;
                for (s, c) in sums[base..base + last_actions].iter_mut().zip(&contrib[leaf]) {
                    *s += c;
                }
            }
        };
        recompute_all(&odometer.digits, &mut contrib, &mut sums);

        let value_of = |sums: &[f64]| -> f64 {
            sums.chunks(last_actions)
                .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .sum()
        };

        let mut best_value = value_of(&sums);
        let mut best_digits = odometer.digits.clone();
        let mut candidates = 1u64;
        let mut stamp = vec![0u64; node.leaves.len()];
        let mut epoch = 0u64;
        let mut scratch = vec![0.0; last_actions];
        loop {
            let (more, changed) = odometer.advance();
            if !more {
                break;
            }
            candidates += 1;
            if changed > 3 {
                recompute_all(&odometer.digits, &mut contrib, &mut sums);
            } else {
                epoch += 1;
                let len = odometer.digits.len();
                for d in len - changed..len {
                    for &leaf in &digit_leaves[d] {
                        if stamp[leaf] == epoch {
                            continue;
                        }
                        stamp[leaf] = epoch;
                        contribution(&odometer.digits, leaf, &mut scratch);
                        let base = last_type_of[leaf] * last_actions;
                        for (k, s) in sums[base..base + last_actions].iter_mut().enumerate() {
                            *s += scratch[k] - contrib[leaf][k];
                        }
                        contrib[leaf].copy_from_slice(&scratch);
                    }
                }
            }
            let v = value_of(&sums);
            if v > best_value + TIE_EPS {
                best_value = v;
                best_digits.copy_from_slice(&odometer.digits);
            }
        }

        // final rules: enumerated agents from the best digits, last agent by
        // exact best response (lowest action among ties)
        recompute_all(&best_digits, &mut contrib, &mut sums);
        let mut rules = game.rules(&best_digits, 0..last);
        let mut last_rule = vec![0; model.observations(last).len().pow(t as u32)];
        for (ty, &seq) in game.types[last].iter().enumerate() {
            let row = &sums[ty * last_actions..(ty + 1) * last_actions];
            let mut arg = 0;
            for (a, &v) in row.iter().enumerate() {
                if v > row[arg] + TIE_EPS {
                    arg = a;
                }
            }
            last_rule[seq] = arg;
        }
        rules.push(last_rule);

        let mut exact = node.exact_value;
        for (leaf, pay) in node.leaves.iter().zip(&payoff) {
            let a = joint_action_from_rules(model, &rules, &leaf.sequences);
            exact += leaf.probability * rho_reward(model, &leaf.belief, a);
            debug_assert!((pay[a] - leaf.probability * rho_reward(model, &leaf.belief, a)).abs() < 1e-12);
        }
        let child = SearchNode {
            phi: node.phi.extended(&rules),
            exact_value: exact,
            heuristic_value: 0.0,
            priority: exact,
            leaves: Arc::new(Vec::new()),
        };
        Ok((child, candidates))
    }
}

fn odometer_offset(game: &StageGame, agent: usize) -> usize {
    game.types[..agent].iter().map(Vec::len).sum()
}

fn joint_action_from_rules(model: &RhoDecPomdp, rules: &[Vec<usize>], sequences: &[usize]) -> usize {
    rules
        .iter()
        .zip(sequences)
        .zip(model.joint_actions().sizes())
        .fold(0, |acc, ((rule, &seq), &size)| acc * size + rule[seq])
}

/// Reachable observation sequences ("types") of each agent at depth t.
struct StageGame<'a> {
    model: &'a RhoDecPomdp,
    depth: usize,
    types: Vec<Vec<usize>>,
    type_index: Vec<HashMap<usize, usize>>,
}

impl<'a> StageGame<'a> {
    fn new(model: &'a RhoDecPomdp, leaves: &[Leaf], depth: usize) -> Self {
        let n = model.n_agents();
        let mut types: Vec<Vec<usize>> = vec![Vec::new(); n];
        for leaf in leaves {
            for (i, &seq) in leaf.sequences.iter().enumerate() {
                types[i].push(seq);
            }
        }
        for list in types.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        let type_index = types
            .iter()
            .map(|list| list.iter().enumerate().map(|(k, &seq)| (seq, k)).collect())
            .collect();
        StageGame { model, depth, types, type_index }
    }

    fn check_cap(&self, agents: std::ops::Range<usize>, cap: u64) -> Result<(), PolicyError> {
        let count = agents.fold(BigUint::from(1u32), |acc, i| {
            acc * BigUint::from(self.model.actions(i).len()).pow(self.types[i].len() as u32)
        });
        if count > BigUint::from(cap) {
            return Err(PolicyError::CombinatorialLimit { count, cap });
        }
        Ok(())
    }

    fn odometer(&self, agents: std::ops::Range<usize>) -> Odometer {
        let mut owners = Vec::new();
        let mut radix = Vec::new();
        for i in agents {
            for ty in 0..self.types[i].len() {
                owners.push((i, ty));
                radix.push(self.model.actions(i).len());
            }
        }
        Odometer { digits: vec![0; radix.len()], radix, owners }
    }

    /// Full decision rules (unreachable sequences get action 0) for the
    /// agents covered by `digits`.
    fn rules(&self, digits: &[usize], agents: std::ops::Range<usize>) -> Vec<Vec<usize>> {
        let mut offset = 0;
        agents
            .map(|i| {
                let width = self.model.observations(i).len().pow(self.depth as u32);
                let mut rule = vec![0; width];
                for (k, &seq) in self.types[i].iter().enumerate() {
                    rule[seq] = digits[offset + k];
                }
                offset += self.types[i].len();
                rule
            })
            .collect()
    }
}

/// Mixed-radix counter in lexicographic order (last digit fastest).
struct Odometer {
    digits: Vec<usize>,
    radix: Vec<usize>,
    owners: Vec<(usize, usize)>,
}

impl Odometer {
    /// Steps to the next assignment. Returns whether one exists and how many
    /// trailing digits changed.
    fn advance(&mut self) -> (bool, usize) {
        let mut changed = 0;
        for d in (0..self.digits.len()).rev() {
            changed += 1;
            self.digits[d] += 1;
            if self.digits[d] < self.radix[d] {
                return (true, changed);
            }
            self.digits[d] = 0;
        }
        (false, changed)
    }
}

/// Optimal joint policy for `horizon` steps from the model's initial belief.
pub fn solve_maastar(
    model: &RhoDecPomdp,
    horizon: usize,
    heuristic_kind: HeuristicKind,
    expansion_cap: Option<u64>,
) -> Result<SolveResult, SolveError> {
    MaaStar::new(model, horizon)
        .heuristic(heuristic_kind)
        .expansion_cap(expansion_cap)
        .solve()
}
