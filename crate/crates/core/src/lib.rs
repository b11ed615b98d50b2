//! Planning toolkit for cooperative multi-agent information gathering.
//!
//! Models are decentralized POMDPs whose reward depends on the joint belief
//! (ρDec-POMDPs): ρ(b,a) = Σ_s R(s,a) b(s) − α H(b). Optimal finite-horizon
//! joint policies are found with multi-agent A* ([`maastar`]). Two target
//! tracking experiments are provided: a discrete two-MAV domain ([`mav`],
//! [`sim`]) and a Kalman-filter sector-selection simulator ([`tracking`]).

pub mod belief;
pub mod io;
pub mod maastar;
pub mod mav;
pub mod model;
pub mod policy;
pub mod sim;
pub mod tracking;

pub use belief::{belief_from_history, belief_update, rho_reward, shannon_entropy, FilterError, FilterResult};
pub use io::{parse_model, write_model, ParseError};
pub use maastar::{
    centralized_pomdp_bound, mdp_bound, solve_maastar, HeuristicKind, MaaStar, SearchNode, SolveError,
    SolveResult,
};
pub use mav::{build_mav_domain, make_baseline_policy, BaselineKind, MavDomainParams};
pub use model::{validate_model, Belief, JointSpace, ModelBuilder, RhoDecPomdp, Uncertainty, ValidationReport};
pub use policy::{
    count_local_policies, enumerate_decision_rules, evaluate_partial_policy, history_probability, policy_value,
    JointHistory, JointPolicy, JointStep, LocalHistory, LocalPolicyTree, PartialJointPolicy,
};
pub use sim::{aggregate_stats, prior_sweep_evaluation, run_episode, Controller, EpisodeConfig, EpisodeTrace};
pub use tracking::{simulate_tracking, TrackingController, TrackingScenario};
