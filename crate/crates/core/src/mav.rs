//! Two-MAV cooperative target tracking domain.
//!
//! A target occupies one of four locations on a line and is either neutral
//! or hostile. MAV 1 sits at location 1 and MAV 2 at location 4; each picks
//! its camera or its radar every step and observes a noisy target location.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Belief, ModelBuilder, RhoDecPomdp, Uncertainty};
use crate::policy::{JointPolicy, LocalPolicyTree};

pub const N_LOCATIONS: usize = 4;
pub const N_STATES: usize = 2 * N_LOCATIONS;
pub const CAMERA: usize = 0;
pub const RADAR: usize = 1;
/// Positions of the two observers on the location line.
pub const OBSERVER_POSITIONS: [f64; 2] = [0.0, 3.0];
const MIN_SIGMA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorMode {
    Camera,
    Radar,
}

impl SensorMode {
    pub fn from_action(action: usize) -> Self {
        if action == RADAR {
            SensorMode::Radar
        } else {
            SensorMode::Camera
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetStatus {
    Neutral,
    Hostile,
}

/// Half-efficiency distance d0 and nominal standard deviation σ0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    pub half_distance: f64,
    pub sigma0: f64,
}

/// Sensor parameters per mode, indexed `[neutral, hostile]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorTable {
    pub camera: [SensorParams; 2],
    pub radar: [SensorParams; 2],
    pub radar_interference: [SensorParams; 2],
}

impl Default for SensorTable {
    fn default() -> Self {
        let p = |half_distance, sigma0| SensorParams { half_distance, sigma0 };
        SensorTable {
            camera: [p(0.6, 0.3), p(0.7, 0.75)],
            radar: [p(1.0, 0.2), p(1.0, 0.45)],
            radar_interference: [p(2.0, 1.0), p(1.5, 1.2)],
        }
    }
}

impl SensorTable {
    /// Interference only affects the radar rows.
    pub fn row(&self, mode: SensorMode, status: TargetStatus, interference: bool) -> SensorParams {
        let k = match status {
            TargetStatus::Neutral => 0,
            TargetStatus::Hostile => 1,
        };
        match (mode, interference) {
            (SensorMode::Camera, _) => self.camera[k],
            (SensorMode::Radar, false) => self.radar[k],
            (SensorMode::Radar, true) => self.radar_interference[k],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MavDomainParams {
    /// Probability that a neutral target stays put (p0).
    pub p_stay_neutral: f64,
    /// Probability that a hostile target stays put (p1).
    pub p_stay_hostile: f64,
    pub sensors: SensorTable,
    /// Per-agent reward for using the radar.
    pub radar_cost: f64,
    /// Extra reward per radar user at distance 0 from a hostile target.
    pub hostile_radar_penalty_d0: f64,
    /// Extra reward per radar user at distance 1 from a hostile target.
    pub hostile_radar_penalty_d1: f64,
    pub alpha: f64,
    /// Initial probability that the target is neutral.
    pub prior_neutral: f64,
}

impl Default for MavDomainParams {
    fn default() -> Self {
        MavDomainParams {
            p_stay_neutral: 0.85,
            p_stay_hostile: 0.6,
            sensors: SensorTable::default(),
            radar_cost: -0.1,
            hostile_radar_penalty_d0: -1.0,
            hostile_radar_penalty_d1: -0.1,
            alpha: 1.0,
            prior_neutral: 0.5,
        }
    }
}

impl MavDomainParams {
    pub fn with_prior_neutral(prior_neutral: f64) -> Self {
        MavDomainParams { prior_neutral, ..Default::default() }
    }

    pub fn check(&self) -> Result<(), String> {
        let probs = [self.p_stay_neutral, self.p_stay_hostile, self.prior_neutral];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err("probabilities must lie in [0, 1]".into());
        }
        let t = &self.sensors;
        for row in t.camera.iter().chain(&t.radar).chain(&t.radar_interference) {
            if !(row.half_distance > 0.0 && row.sigma0 > 0.0) {
                return Err("sensor half distance and sigma must be positive".into());
            }
        }
        if !(self.alpha >= 0.0) {
            return Err("alpha must be nonnegative".into());
        }
        Ok(())
    }
}

/// State index of (location, status); neutral states come first.
pub fn state_index(location: usize, status: TargetStatus) -> usize {
    match status {
        TargetStatus::Neutral => location,
        TargetStatus::Hostile => N_LOCATIONS + location,
    }
}

pub fn state_parts(state: usize) -> (usize, TargetStatus) {
    if state < N_LOCATIONS {
        (state, TargetStatus::Neutral)
    } else {
        (state - N_LOCATIONS, TargetStatus::Hostile)
    }
}

/// Distance between observer `observer` (0 or 1) and `location`.
pub fn observer_distance(observer: usize, location: usize) -> f64 {
    (OBSERVER_POSITIONS[observer] - location as f64).abs()
}

/// σ_j(d) = σ_{j,0} · 2^(d / d_{j,0}).
pub fn sensor_sigma(
    table: &SensorTable,
    mode: SensorMode,
    status: TargetStatus,
    interference: bool,
    distance: f64,
) -> f64 {
    let row = table.row(mode, status, interference);
    row.sigma0 * (distance / row.half_distance).exp2()
}

/// Distribution of the observed location: a Gaussian centred on the target,
/// evaluated at the four location positions and normalized.
pub fn detection_distribution(
    table: &SensorTable,
    observer: usize,
    mode: SensorMode,
    interference: bool,
    target_location: usize,
    status: TargetStatus,
) -> [f64; N_LOCATIONS] {
    let d = observer_distance(observer, target_location);
    let sigma = sensor_sigma(table, mode, status, interference, d);
    gaussian_pmf(target_location, sigma)
}

fn gaussian_pmf(center: usize, sigma: f64) -> [f64; N_LOCATIONS] {
    let sigma = sigma.max(MIN_SIGMA);
    let mut w = [0.0; N_LOCATIONS];
    for (k, wk) in w.iter_mut().enumerate() {
        let x = k as f64 - center as f64;
        *wk = (-x * x / (2.0 * sigma * sigma)).exp();
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Location transition row: stay with `p_stay`, otherwise step to either
/// neighbour with (1 − p_stay)/2. A missing neighbour's share stays put.
fn location_row(location: usize, p_stay: f64) -> [f64; N_LOCATIONS] {
    let mut row = [0.0; N_LOCATIONS];
    let step = (1.0 - p_stay) / 2.0;
    row[location] = p_stay;
    if location > 0 {
        row[location - 1] += step;
    } else {
        row[location] += step;
    }
    if location + 1 < N_LOCATIONS {
        row[location + 1] += step;
    } else {
        row[location] += step;
    }
    row
}

/// R(s, a) for one agent's action.
fn agent_reward(params: &MavDomainParams, agent: usize, action: usize, location: usize, status: TargetStatus) -> f64 {
    if action != RADAR {
        return 0.0;
    }
    let mut r = params.radar_cost;
    if status == TargetStatus::Hostile {
        let d = observer_distance(agent, location);
        if d == 0.0 {
            r += params.hostile_radar_penalty_d0;
        } else if d == 1.0 {
            r += params.hostile_radar_penalty_d1;
        }
    }
    r
}

pub fn build_mav_domain(params: &MavDomainParams) -> RhoDecPomdp {
    let loc_labels = |_| (1..=N_LOCATIONS).map(|l| format!("l{l}")).collect::<Vec<_>>();
    let states = [TargetStatus::Neutral, TargetStatus::Hostile]
        .iter()
        .flat_map(|status| {
            let tag = match status {
                TargetStatus::Neutral => "neutral",
                TargetStatus::Hostile => "hostile",
            };
            (1..=N_LOCATIONS).map(move |l| format!("l{l}-{tag}"))
        })
        .collect();
    let actions = vec![vec!["camera".to_string(), "radar".to_string()]; 2];
    let observations = (0..2).map(loc_labels).collect();
    let mut b = ModelBuilder::new(states, actions, observations);

    let ja = b.joint_actions().clone();
    let jz = b.joint_observations().clone();
    for a in 0..ja.len() {
        let acts = ja.unflatten(a);
        let interference = acts.iter().all(|&x| x == RADAR);
        for s in 0..N_STATES {
            let (loc, status) = state_parts(s);
            let p_stay = match status {
                TargetStatus::Neutral => params.p_stay_neutral,
                TargetStatus::Hostile => params.p_stay_hostile,
            };
            for (next_loc, p) in location_row(loc, p_stay).iter().enumerate() {
                if *p > 0.0 {
                    b.set_transition(s, a, state_index(next_loc, status), *p);
                }
            }

            let per_agent: Vec<[f64; N_LOCATIONS]> = (0..2)
                .map(|i| {
                    detection_distribution(
                        &params.sensors,
                        i,
                        SensorMode::from_action(acts[i]),
                        interference,
                        loc,
                        status,
                    )
                })
                .collect();
            for z in 0..jz.len() {
                let zs = jz.unflatten(z);
                b.set_observation(a, s, z, per_agent[0][zs[0]] * per_agent[1][zs[1]]);
            }

            let r: f64 = (0..2).map(|i| agent_reward(params, i, acts[i], loc, status)).sum();
            b.set_reward(s, a, r);
        }
    }

    let pn = params.prior_neutral;
    let mut b0 = vec![pn / N_LOCATIONS as f64; N_LOCATIONS];
    b0.extend(std::iter::repeat_n((1.0 - pn) / N_LOCATIONS as f64, N_LOCATIONS));
    b.set_initial_belief(Belief::new(b0).expect("prior_neutral outside [0, 1]"));
    b.set_alpha(params.alpha).set_uncertainty(Uncertainty::ShannonEntropy);
    b.build()
}

/// Hand-designed comparison policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Both MAVs use cameras only.
    CamerasOnly,
    /// MAV 1 camera, MAV 2 radar.
    FixedRoles1,
    /// MAV 1 radar, MAV 2 camera.
    FixedRoles2,
    /// Starts (camera, radar), both switch every step.
    TurnTaking1,
    /// Starts (radar, camera), both switch every step.
    TurnTaking2,
    /// Uniformly random action at every node.
    Random(u64),
}

impl BaselineKind {
    /// The five deterministic baselines.
    pub const HEURISTICS: [BaselineKind; 5] = [
        BaselineKind::CamerasOnly,
        BaselineKind::FixedRoles1,
        BaselineKind::FixedRoles2,
        BaselineKind::TurnTaking1,
        BaselineKind::TurnTaking2,
    ];

    pub fn name(&self) -> String {
        match self {
            BaselineKind::CamerasOnly => "cameras_only".into(),
            BaselineKind::FixedRoles1 => "fixed_roles_1".into(),
            BaselineKind::FixedRoles2 => "fixed_roles_2".into(),
            BaselineKind::TurnTaking1 => "turn_taking_1".into(),
            BaselineKind::TurnTaking2 => "turn_taking_2".into(),
            BaselineKind::Random(seed) => format!("random({seed})"),
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "cameras_only" | "cameras-only" => BaselineKind::CamerasOnly,
            "fixed_roles_1" | "fixed-roles-1" => BaselineKind::FixedRoles1,
            "fixed_roles_2" | "fixed-roles-2" => BaselineKind::FixedRoles2,
            "turn_taking_1" | "turn-taking-1" => BaselineKind::TurnTaking1,
            "turn_taking_2" | "turn-taking-2" => BaselineKind::TurnTaking2,
            "random" => BaselineKind::Random(0),
            other => {
                let seed = other
                    .strip_prefix("random(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| format!("unknown baseline `{other}`"))?;
                BaselineKind::Random(seed)
            }
        })
    }
}

/// Baseline policy of depth `horizon` starting at time step 0.
pub fn make_baseline_policy(kind: BaselineKind, horizon: usize) -> JointPolicy {
    make_baseline_policy_from(kind, horizon, 0)
}

/// Baseline policy whose first level is global time step `start`, so that
/// turn-taking keeps alternating across replanning cycles.
pub fn make_baseline_policy_from(kind: BaselineKind, horizon: usize, start: usize) -> JointPolicy {
    assert!(horizon >= 1);
    let schedule = |first: [usize; 2], switching: bool, agent: usize| -> Vec<usize> {
        (start..start + horizon)
            .map(|t| if switching && t % 2 == 1 { 1 - first[agent] } else { first[agent] })
            .collect()
    };
    let trees = match kind {
        BaselineKind::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..2)
                .map(|_| {
                    let mut width = 1;
                    let levels = (0..horizon)
                        .map(|_| {
                            let level = (0..width).map(|_| rng.random_range(0..2)).collect();
                            width *= N_LOCATIONS;
                            level
                        })
                        .collect();
                    LocalPolicyTree::new(N_LOCATIONS, levels).expect("well-formed random tree")
                })
                .collect()
        }
        _ => {
            let (first, switching) = match kind {
                BaselineKind::CamerasOnly => ([CAMERA, CAMERA], false),
                BaselineKind::FixedRoles1 => ([CAMERA, RADAR], false),
                BaselineKind::FixedRoles2 => ([RADAR, CAMERA], false),
                BaselineKind::TurnTaking1 => ([CAMERA, RADAR], true),
                BaselineKind::TurnTaking2 => ([RADAR, CAMERA], true),
                BaselineKind::Random(_) => unreachable!(),
            };
            (0..2)
                .map(|i| LocalPolicyTree::open_loop(N_LOCATIONS, &schedule(first, switching, i)))
                .collect()
        }
    };
    JointPolicy::new(trees).expect("agent trees share depth")
}
