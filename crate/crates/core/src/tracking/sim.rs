//! Closed-loop sector selection for a randomly moving target.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::kalman::{differential_entropy, kf_predict, kf_update, KalmanEstimate, KalmanNoise};
use super::model::{build_tracking_model, TrackingModelParams, DETECT, NO_DETECT};
use super::sector::{sample_overlap, sector_overlap, ObserverSpec, Sector};
use super::TrackingError;
use crate::maastar::MaaStar;
use crate::policy::{observation_sequence_index, JointPolicy};

const MOTION_STREAM: u64 = 0x6d6f_7469_6f6e;
const SENSING_STREAM: u64 = 0x7365_6e73_6500;
const CONTROL_STREAM: u64 = 0x6374_726c_0000;
const OVERLAP_REJECTION_TRIES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingController {
    RhoDec,
    Scanning,
    Random,
}

impl TrackingController {
    pub const ALL: [TrackingController; 3] =
        [TrackingController::RhoDec, TrackingController::Scanning, TrackingController::Random];

    pub fn name(&self) -> &'static str {
        match self {
            TrackingController::RhoDec => "rho_dec",
            TrackingController::Scanning => "scanning",
            TrackingController::Random => "random",
        }
    }
}

impl std::str::FromStr for TrackingController {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rho_dec" | "rho-dec" | "rhodec" => Ok(TrackingController::RhoDec),
            "scanning" => Ok(TrackingController::Scanning),
            "random" => Ok(TrackingController::Random),
            other => Err(format!("unknown tracking controller `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingScenario {
    /// Waypoints are drawn uniformly from this box.
    pub target_min: Vector2<f64>,
    pub target_max: Vector2<f64>,
    pub target_start: Vector2<f64>,
    pub max_speed: f64,
    pub observers: Vec<ObserverSpec>,
    pub steps: usize,
    pub planning_horizon: usize,
    pub comm_period: usize,
    /// Re-centre the fans on the current estimate every step instead of
    /// only at replanning instants.
    pub reaim_each_step: bool,
    pub noise: KalmanNoise,
    pub model: TrackingModelParams,
    pub initial_position_sigma: f64,
    pub initial_velocity_sigma: f64,
    /// Lost-track gate: when the larger position standard deviation exceeds
    /// this, the track is re-initialized to the target-region prior.
    pub reinit_sigma: Option<f64>,
    pub seed: u64,
    pub controller: TrackingController,
}

impl Default for TrackingScenario {
    /// A 4 m × 4 m arena with the observers on opposite sides, slightly above
    /// the centre of the target region so the fans are not collinear.
    fn default() -> Self {
        TrackingScenario {
            target_min: Vector2::new(1.2, 1.2),
            target_max: Vector2::new(2.8, 2.8),
            target_start: Vector2::new(2.0, 2.0),
            max_speed: 0.3,
            observers: vec![
                ObserverSpec::new(Vector2::new(0.5, 2.5), 2.5),
                ObserverSpec::new(Vector2::new(3.5, 2.5), 3.0),
            ],
            steps: 150,
            planning_horizon: 3,
            comm_period: 3,
            reaim_each_step: false,
            noise: KalmanNoise::default(),
            model: TrackingModelParams::default(),
            initial_position_sigma: 0.1,
            initial_velocity_sigma: 0.1,
            reinit_sigma: Some(1.0),
            seed: 0,
            controller: TrackingController::RhoDec,
        }
    }
}

impl TrackingScenario {
    /// Broad estimate over the target region: centred, at rest, with a
    /// position deviation of half the region's larger side.
    pub fn region_prior(&self) -> KalmanEstimate {
        let side = self.target_max - self.target_min;
        KalmanEstimate::at_rest((self.target_min + self.target_max) / 2.0, side.x.max(side.y) / 2.0, self.max_speed)
    }

    pub fn check(&self) -> Result<(), TrackingError> {
        let bad = |m: &str| Err(TrackingError::InvalidConfig(m.into()));
        if self.observers.len() != 2 {
            return bad("exactly two observers are supported");
        }
        for o in &self.observers {
            o.check().map_err(TrackingError::InvalidConfig)?;
        }
        if self.comm_period == 0 || self.comm_period > self.planning_horizon {
            return bad("communication period must lie in 1..=planning horizon");
        }
        if !(self.target_min.x <= self.target_max.x && self.target_min.y <= self.target_max.y) {
            return bad("empty target region");
        }
        if !(self.max_speed > 0.0 && self.initial_position_sigma > 0.0 && self.initial_velocity_sigma > 0.0) {
            return bad("speed and initial uncertainty must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingStepRecord {
    pub step: usize,
    pub entropy_nats: f64,
    pub interfered: bool,
    /// Controller estimate minus true position.
    pub err: Vector2<f64>,
    /// All-data baseline estimate minus true position.
    pub baseline_err: Vector2<f64>,
    /// 1-based sector per observer.
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingMetrics {
    pub controller: TrackingController,
    pub seed: u64,
    pub steps: Vec<TrackingStepRecord>,
    pub mean_entropy: f64,
    pub interference_steps: usize,
    /// Σ_t |μ_ctrl − μ_baseline|².
    pub sse: f64,
}

/// Bounded random-waypoint walk.
struct Target {
    position: Vector2<f64>,
    waypoint: Vector2<f64>,
    speed: f64,
}

impl Target {
    fn new(scenario: &TrackingScenario, rng: &mut ChaCha8Rng) -> Self {
        let mut t = Target { position: scenario.target_start, waypoint: scenario.target_start, speed: 0.0 };
        t.new_leg(scenario, rng);
        t
    }

    fn new_leg(&mut self, scenario: &TrackingScenario, rng: &mut ChaCha8Rng) {
        let (lo, hi) = (scenario.target_min, scenario.target_max);
        self.waypoint = Vector2::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y));
        self.speed = rng.random_range(0.25 * scenario.max_speed..=scenario.max_speed);
    }

    fn advance(&mut self, dt: f64, scenario: &TrackingScenario, rng: &mut ChaCha8Rng) {
        let mut budget = self.speed * dt;
        while budget > 0.0 {
            let to_go = self.waypoint - self.position;
            let dist = to_go.norm();
            if dist > budget {
                self.position += to_go * (budget / dist);
                break;
            }
            self.position = self.waypoint;
            budget -= dist;
            self.new_leg(scenario, rng);
        }
    }
}

fn overlap_of(sectors: &[Sector]) -> f64 {
    sector_overlap(&sectors[0], &sectors[1])
}

/// Runs one scenario under its controller.
pub fn simulate_tracking(scenario: &TrackingScenario) -> Result<TrackingMetrics, TrackingError> {
    scenario.check()?;
    let dt = scenario.model.dt;
    let mut motion_rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ MOTION_STREAM);
    let mut sensing_rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ SENSING_STREAM);
    let mut control_rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ CONTROL_STREAM);
    let noise = Normal::new(0.0, scenario.noise.measurement_sigma)
        .map_err(|e| TrackingError::InvalidConfig(e.to_string()))?;
    let q = scenario.noise.process(dt);
    let r = scenario.noise.measurement();

    let mut target = Target::new(scenario, &mut motion_rng);
    let mut est = KalmanEstimate::at_rest(
        target.position,
        scenario.initial_position_sigma,
        scenario.initial_velocity_sigma,
    );
    let mut baseline = est.clone();
    let n_sectors: Vec<usize> = scenario.observers.iter().map(|o| o.sector_count).collect();

    let mut records = Vec::with_capacity(scenario.steps);
    let mut aim = est.position();
    let mut policy: Option<(JointPolicy, Vec<Vec<usize>>)> = None;
    let mut local_obs: Vec<Vec<usize>> = vec![Vec::new(); 2];

    for t in 0..scenario.steps {
        let k = t % scenario.comm_period;
        if k == 0 || scenario.reaim_each_step {
            aim = est.position();
        }
        if k == 0 {
            local_obs.iter_mut().for_each(Vec::clear);
            if scenario.controller == TrackingController::RhoDec {
                let step_model = build_tracking_model(&est, &scenario.observers, &est.velocity(), &scenario.model)?;
                let result = MaaStar::new(&step_model.model, scenario.planning_horizon).solve()?;
                policy = Some((result.policy, step_model.sector_of_action));
            }
        }
        let actions: Vec<usize> = match scenario.controller {
            TrackingController::RhoDec => {
                let (p, sector_of) = policy.as_ref().expect("planned at the cycle start");
                (0..2)
                    .map(|i| sector_of[i][p.tree(i).action(k, observation_sequence_index(&local_obs[i], 2))])
                    .collect()
            }
            TrackingController::Scanning => {
                let phase = t % n_sectors[0];
                vec![phase, n_sectors[1] - 1 - phase.min(n_sectors[1] - 1)]
            }
            TrackingController::Random => n_sectors.iter().map(|&n| control_rng.random_range(0..n)).collect(),
        };
        let sectors: Vec<Sector> = scenario
            .observers
            .iter()
            .zip(&actions)
            .map(|(o, &a)| o.sector(a, &aim))
            .collect();
        let f = overlap_of(&sectors);
        let (fneg, fpos) = scenario.model.rates.at_overlap(f);

        target.advance(dt, scenario, &mut motion_rng);
        let truth = target.position;
        let clean = truth + Vector2::new(noise.sample(&mut sensing_rng), noise.sample(&mut sensing_rng));

        let mut measurements = Vec::new();
        for (i, sector) in sectors.iter().enumerate() {
            let inside = sector.contains(&truth);
            let detected = sensing_rng.random::<f64>() < if inside { 1.0 - fneg } else { fpos };
            local_obs[i].push(if detected { DETECT } else { NO_DETECT });
            if inside && detected {
                let corrupted = f > 0.0 && sensing_rng.random::<f64>() < f;
                let m = if corrupted {
                    sample_overlap(&sectors[0], &sectors[1], &mut sensing_rng, OVERLAP_REJECTION_TRIES)
                        .unwrap_or(clean)
                } else {
                    clean
                };
                measurements.push(m);
            }
        }

        est = kf_predict(&est, dt, &q)?;
        for m in &measurements {
            est = kf_update(&est, m, &r)?;
        }
        if let Some(gate) = scenario.reinit_sigma {
            let cov = est.position_covariance();
            if cov[(0, 0)].max(cov[(1, 1)]).sqrt() > gate {
                est = scenario.region_prior();
            }
        }
        baseline = kf_update(&kf_predict(&baseline, dt, &q)?, &clean, &r)?;

        records.push(TrackingStepRecord {
            step: t,
            entropy_nats: differential_entropy(&est.position_covariance())?,
            interfered: f > 0.0,
            err: est.position() - truth,
            baseline_err: baseline.position() - truth,
            actions: actions.iter().map(|a| a + 1).collect(),
        });
    }

    let n = records.len().max(1) as f64;
    Ok(TrackingMetrics {
        controller: scenario.controller,
        seed: scenario.seed,
        mean_entropy: records.iter().map(|r| r.entropy_nats).sum::<f64>() / n,
        interference_steps: records.iter().filter(|r| r.interfered).count(),
        sse: records.iter().map(|r| (r.err - r.baseline_err).norm_squared()).sum(),
        steps: records,
    })
}
