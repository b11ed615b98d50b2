//! Closed-loop execution with periodic communication.
//!
//! Every `comm_period` steps the agents pool their local histories, the
//! joint belief is advanced and a new joint policy is planned. In between,
//! each agent follows its own decision rules on its own observations.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::belief::{belief_update, rho_reward};
use crate::maastar::{HeuristicKind, MaaStar, SolveError};
use crate::mav::{build_mav_domain, make_baseline_policy, make_baseline_policy_from, BaselineKind, MavDomainParams};
use crate::model::{Belief, RhoDecPomdp};
use crate::policy::{observation_sequence_index, policy_value, JointPolicy};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid episode configuration: {0}")]
    InvalidConfig(String),
    #[error("at least 2 runs are needed for a confidence interval, got {0}")]
    InsufficientData(usize),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    Optimal(HeuristicKind),
    Baseline(BaselineKind),
}

impl Controller {
    pub fn name(&self) -> String {
        match self {
            Controller::Optimal(_) => "optimal".into(),
            Controller::Baseline(k) => k.name(),
        }
    }
}

impl std::str::FromStr for Controller {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" | "maastar" => Ok(Controller::Optimal(HeuristicKind::default())),
            other => other.parse().map(Controller::Baseline),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeConfig {
    pub planning_horizon: usize,
    pub comm_period: usize,
    pub total_decisions: usize,
    pub run_count: usize,
    pub seed: u64,
    pub controller: Controller,
    pub expansion_cap: Option<u64>,
}

impl EpisodeConfig {
    pub fn new(controller: Controller, planning_horizon: usize, comm_period: usize) -> Self {
        EpisodeConfig {
            planning_horizon,
            comm_period,
            total_decisions: 51,
            run_count: 50,
            seed: 0,
            controller,
            expansion_cap: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.planning_horizon == 0 {
            return Err(SimError::InvalidConfig("planning horizon must be at least 1".into()));
        }
        if self.comm_period == 0 || self.comm_period > self.planning_horizon {
            return Err(SimError::InvalidConfig(format!(
                "communication period {} must lie in 1..={}",
                self.comm_period, self.planning_horizon
            )));
        }
        if self.total_decisions == 0 {
            return Err(SimError::InvalidConfig("total decisions must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub state: usize,
    pub joint_action: usize,
    pub actions: Vec<usize>,
    pub joint_observation: usize,
    pub observations: Vec<usize>,
    pub reward: f64,
    pub cumulative: f64,
}

/// Joint belief at a communication point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRecord {
    pub step: usize,
    pub belief: Belief,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeTrace {
    pub steps: Vec<StepRecord>,
    pub cycles: Vec<CycleRecord>,
}

impl EpisodeTrace {
    pub fn total_reward(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cumulative)
    }
}

fn sample(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    WeightedIndex::new(weights)
        .expect("rows of a validated model are distributions")
        .sample(rng)
}

fn plan(
    model: &RhoDecPomdp,
    config: &EpisodeConfig,
    belief: &Belief,
    step: usize,
    rng: &mut ChaCha8Rng,
) -> Result<JointPolicy, SimError> {
    let h = config.planning_horizon;
    Ok(match config.controller {
        Controller::Optimal(kind) => {
            MaaStar::new(model, h)
                .heuristic(kind)
                .expansion_cap(config.expansion_cap)
                .initial_belief(belief.clone())
                .solve()?
                .policy
        }
        Controller::Baseline(BaselineKind::Random(_)) => make_baseline_policy(BaselineKind::Random(rng.random()), h),
        Controller::Baseline(kind) => make_baseline_policy_from(kind, h, step),
    })
}

/// One episode; the simulator draws from a generator seeded with `seed`.
pub fn run_episode_seeded(model: &RhoDecPomdp, config: &EpisodeConfig, seed: u64) -> Result<EpisodeTrace, SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.n_agents();
    let mut belief = model.initial_belief().clone();
    let mut state = sample(&mut rng, belief.probs());
    let mut steps = Vec::with_capacity(config.total_decisions);
    let mut cycles = Vec::new();
    let mut cumulative = 0.0;

    let mut t = 0;
    while t < config.total_decisions {
        cycles.push(CycleRecord { step: t, belief: belief.clone() });
        let policy = plan(model, config, &belief, t, &mut rng)?;
        let executed = config.comm_period.min(config.total_decisions - t);
        let mut local_obs: Vec<Vec<usize>> = vec![Vec::new(); n];

        for k in 0..executed {
            let actions: Vec<usize> = (0..n)
                .map(|i| {
                    let seq = observation_sequence_index(&local_obs[i], model.observations(i).len());
                    policy.tree(i).action(k, seq)
                })
                .collect();
            let a = model.joint_actions().flatten(&actions);
            let next = sample(&mut rng, model.transition_row(state, a));
            let z = sample(&mut rng, model.observation_row(a, next));
            let observations = model.joint_observations().unflatten(z);
            for (seq, &zi) in local_obs.iter_mut().zip(&observations) {
                seq.push(zi);
            }

            // scored at the pooled belief, which is the same whether the
            // filter runs now or after the next communication point
            let reward = rho_reward(model, &belief, a);
            cumulative += reward;
            steps.push(StepRecord {
                step: t + k,
                state,
                joint_action: a,
                actions,
                joint_observation: z,
                observations,
                reward,
                cumulative,
            });
            belief = belief_update(model, &belief, a, z)
                .expect("sampled observations have positive probability")
                .posterior;
            state = next;
        }
        t += executed;
    }
    Ok(EpisodeTrace { steps, cycles })
}

pub fn run_episode(model: &RhoDecPomdp, config: &EpisodeConfig) -> Result<EpisodeTrace, SimError> {
    run_episode_seeded(model, config, config.seed)
}

/// `run_count` independent episodes; run `i` uses seed `seed + i`.
pub fn run_batch(model: &RhoDecPomdp, config: &EpisodeConfig) -> Result<Vec<EpisodeTrace>, SimError> {
    config.validate()?;
    (0..config.run_count)
        .into_par_iter()
        .map(|i| run_episode_seeded(model, config, config.seed.wrapping_add(i as u64)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub half_width: f64,
}

/// Mean and 95% normal-approximation half-width 1.96·s/√n.
pub fn aggregate_stats(totals: &[f64]) -> Result<Summary, SimError> {
    let n = totals.len();
    if n < 2 {
        return Err(SimError::InsufficientData(n));
    }
    let mean = totals.iter().sum::<f64>() / n as f64;
    let var = totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(Summary { mean, half_width: 1.96 * (var / n as f64).sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub prior_neutral: f64,
    pub policy: String,
    pub value: f64,
}

/// Exact values of the five baselines and of the optimum at each prior.
pub fn prior_sweep_evaluation(
    grid: &[f64],
    horizon: usize,
    params: &MavDomainParams,
) -> Result<Vec<SweepRow>, SimError> {
    if let Some(p) = grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(SimError::InvalidConfig(format!("prior {p} outside [0, 1]")));
    }
    let per_prior: Result<Vec<Vec<SweepRow>>, SimError> = grid
        .par_iter()
        .map(|&prior| {
            let model = build_mav_domain(&MavDomainParams { prior_neutral: prior, ..params.clone() });
            let row = |policy: String, value| SweepRow { prior_neutral: prior, policy, value };
            let mut rows: Vec<SweepRow> = BaselineKind::HEURISTICS
                .iter()
                .map(|k| row(k.name(), policy_value(&model, &make_baseline_policy(*k, horizon), horizon)))
                .collect();
            let best = MaaStar::new(&model, horizon).solve()?;
            rows.push(row("optimal".into(), best.value));
            Ok(rows)
        })
        .collect();
    Ok(per_prior?.into_iter().flatten().collect())
}

/// Parses `start:step:end` (inclusive) or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let nums = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("bad number `{s}`: {e}"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, step, end] => {
            let (start, step, end) = (nums(start)?, nums(step)?, nums(end)?);
            if !(step > 0.0) || end < start {
                return Err("grid needs step > 0 and end ≥ start".into());
            }
            let count = ((end - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|k| (start + k as f64 * step).min(end)).collect())
        }
        [_] => spec.split(',').map(nums).collect(),
        _ => Err(format!("cannot parse grid `{spec}`")),
    }
}
