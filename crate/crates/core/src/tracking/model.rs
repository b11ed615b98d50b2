//! The ρDec-POMDP built at each replanning instant of the tracking task.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::grid::{discretize_belief, grid_masses, GridGeometry, GRID_CELLS, GRID_SIDE};
use super::kalman::{kf_predict, white_acceleration_noise, KalmanEstimate};
use super::sector::{sector_overlap, ObserverSpec, Sector};
use super::TrackingError;
use crate::model::{validate_model, ModelBuilder, RhoDecPomdp, Uncertainty};

pub const DETECT: usize = 0;
pub const NO_DETECT: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorRates {
    pub false_negative: f64,
    pub false_positive: f64,
    /// Both rates rise linearly with sector overlap up to this value.
    pub max_corrupt: f64,
}

impl Default for SensorRates {
    fn default() -> Self {
        SensorRates { false_negative: 0.15, false_positive: 0.05, max_corrupt: 0.5 }
    }
}

impl SensorRates {
    /// (fn, fp) at overlap fraction `f`.
    pub fn at_overlap(&self, f: f64) -> (f64, f64) {
        let f = f.clamp(0.0, 1.0);
        (
            self.false_negative + (self.max_corrupt - self.false_negative) * f,
            self.false_positive + (self.max_corrupt - self.false_positive) * f,
        )
    }
}

/// Order in which an observer's sectors are indexed as model actions.
/// The solver resolves value ties towards lower indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorOrder {
    /// Fan order a1, a2, ...
    Natural,
    /// Middle sector first, then alternating outwards.
    MiddleOut,
    /// Outermost sectors first, middle sector last.
    OutsideIn,
}

impl SectorOrder {
    /// 0-based fan sector for each action index.
    pub fn sectors(&self, count: usize) -> Vec<usize> {
        let mid = count / 2;
        let mut middle_out = vec![mid];
        for k in 1..=mid {
            middle_out.push(mid - k);
            if mid + k < count {
                middle_out.push(mid + k);
            }
        }
        match self {
            SectorOrder::Natural => (0..count).collect(),
            SectorOrder::MiddleOut => middle_out,
            SectorOrder::OutsideIn => {
                middle_out.reverse();
                middle_out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingModelParams {
    pub rates: SensorRates,
    /// Action indexing per observer; missing entries default to natural.
    pub sector_orders: Vec<SectorOrder>,
    /// Expected target speed, m/s; sets the motion covariance.
    pub expected_speed: f64,
    /// Time step, seconds.
    pub dt: f64,
    /// The grid covers the estimate predicted this many steps ahead.
    pub lookahead: usize,
    /// Acceleration noise used for that prediction.
    pub accel_sigma: f64,
}

impl Default for TrackingModelParams {
    fn default() -> Self {
        TrackingModelParams {
            rates: SensorRates::default(),
            sector_orders: vec![SectorOrder::MiddleOut, SectorOrder::OutsideIn],
            expected_speed: 0.3,
            dt: 1.0,
            lookahead: 2,
            accel_sigma: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrackingStepModel {
    pub model: RhoDecPomdp,
    pub geometry: GridGeometry,
    /// `sectors[agent][action]`.
    pub sectors: Vec<Vec<Sector>>,
    /// 0-based fan sector of each action, `sector_of_action[agent][action]`.
    pub sector_of_action: Vec<Vec<usize>>,
    /// Overlap fraction per joint action.
    pub overlap: Vec<f64>,
}

/// Cell-to-cell transition rows from a Gaussian displacement with mean
/// `velocity · dt` and isotropic standard deviation `sigma`.
pub fn grid_transitions(geometry: &GridGeometry, velocity: &Vector2<f64>, dt: f64, sigma: f64) -> Vec<Vec<f64>> {
    let sigma = sigma.max(1e-9);
    (0..GRID_CELLS)
        .map(|from| {
            let target = geometry.cell_center(from) + velocity * dt;
            let log_w: Vec<f64> = (0..GRID_CELLS)
                .map(|to| -(geometry.cell_center(to) - target).norm_squared() / (2.0 * sigma * sigma))
                .collect();
            let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect()
        })
        .collect()
}

/// Grid spanning the current estimate and its prediction `lookahead` steps
/// ahead, so that the planner can represent the target leaving the current
/// 3σ region during the horizon.
pub fn planning_geometry(
    est: &KalmanEstimate,
    velocity_estimate: &Vector2<f64>,
    params: &TrackingModelParams,
) -> Result<GridGeometry, TrackingError> {
    let (_, now) = discretize_belief(est);
    if params.lookahead == 0 {
        return Ok(now);
    }
    let q = white_acceleration_noise(params.dt, params.accel_sigma);
    let mut ahead = est.clone();
    ahead.mean[2] = velocity_estimate.x;
    ahead.mean[3] = velocity_estimate.y;
    for _ in 0..params.lookahead {
        ahead = kf_predict(&ahead, params.dt, &q)?;
    }
    let (_, later) = discretize_belief(&ahead);
    let shift = later.center - now.center;
    let half = (now.half_extent().max(later.half_extent()) + shift.norm() / 2.0).max(1e-9);
    Ok(GridGeometry { center: now.center + shift / 2.0, cell_size: 2.0 * half / GRID_SIDE as f64 })
}

pub fn build_tracking_model(
    est: &KalmanEstimate,
    observers: &[ObserverSpec],
    velocity_estimate: &Vector2<f64>,
    params: &TrackingModelParams,
) -> Result<TrackingStepModel, TrackingError> {
    est.check()?;
    for o in observers {
        o.check().map_err(TrackingError::InvalidConfig)?;
    }
    let geometry = planning_geometry(est, velocity_estimate, params)?;
    let b0 = grid_masses(est, &geometry);
    let aim = est.position();
    let sector_of_action: Vec<Vec<usize>> = observers
        .iter()
        .enumerate()
        .map(|(i, o)| params.sector_orders.get(i).unwrap_or(&SectorOrder::Natural).sectors(o.sector_count))
        .collect();
    let sectors: Vec<Vec<Sector>> = observers
        .iter()
        .zip(&sector_of_action)
        .map(|(o, order)| order.iter().map(|&k| o.sector(k, &aim)).collect())
        .collect();

    let states = (0..GRID_CELLS).map(|c| format!("c{}_{}", c % 5, c / 5)).collect();
    let actions = sector_of_action
        .iter()
        .map(|order| order.iter().map(|k| format!("a{}", k + 1)).collect())
        .collect();
    let observations = vec![vec!["detect".to_string(), "none".to_string()]; observers.len()];
    let mut b = ModelBuilder::new(states, actions, observations);
    let ja = b.joint_actions().clone();
    let jz = b.joint_observations().clone();

    let overlap: Vec<f64> = (0..ja.len())
        .map(|a| {
            let acts = ja.unflatten(a);
            let mut f: f64 = 0.0;
            for i in 0..observers.len() {
                for j in i + 1..observers.len() {
                    f = f.max(sector_overlap(&sectors[i][acts[i]], &sectors[j][acts[j]]));
                }
            }
            f
        })
        .collect();

    let rows = grid_transitions(&geometry, velocity_estimate, params.dt, params.expected_speed * params.dt);
    let centers: Vec<Vector2<f64>> = (0..GRID_CELLS).map(|c| geometry.cell_center(c)).collect();
    for a in 0..ja.len() {
        let acts = ja.unflatten(a);
        let (fneg, fpos) = params.rates.at_overlap(overlap[a]);
        for (s, row) in rows.iter().enumerate() {
            for (next, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    b.set_transition(s, a, next, p);
                }
            }
            let detect: Vec<f64> = (0..observers.len())
                .map(|i| if sectors[i][acts[i]].contains(&centers[s]) { 1.0 - fneg } else { fpos })
                .collect();
            for z in 0..jz.len() {
                let p: f64 = jz
                    .unflatten(z)
                    .iter()
                    .zip(&detect)
                    .map(|(&zi, &d)| if zi == DETECT { d } else { 1.0 - d })
                    .product();
                b.set_observation(a, s, z, p);
            }
        }
    }
    b.set_initial_belief(b0);
    b.set_alpha(1.0).set_uncertainty(Uncertainty::ShannonEntropy);
    let model = b.build();
    let report = validate_model(&model);
    if !report.is_valid() {
        return Err(TrackingError::NumericalFailure(format!("tracking model invalid: {:?}", report.violations)));
    }
    Ok(TrackingStepModel { model, geometry, sectors, sector_of_action, overlap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix4, Vector4};

    fn observers() -> Vec<ObserverSpec> {
        vec![
            ObserverSpec::new(Vector2::new(0.0, 2.0), 2.5),
            ObserverSpec::new(Vector2::new(4.0, 2.0), 3.0),
        ]
    }

    fn estimate() -> KalmanEstimate {
        let cov = Matrix4::from_diagonal(&Vector4::new(0.04, 0.03, 0.01, 0.01));
        KalmanEstimate::new(Vector4::new(2.0, 2.0, 0.0, 0.0), cov).unwrap()
    }

    #[test]
    fn rates_examples() {
        let r = SensorRates::default();
        assert_eq!(r.at_overlap(0.0), (0.15, 0.05));
        assert_eq!(r.at_overlap(1.0), (0.5, 0.5));
    }

    #[test]
    fn model_is_valid_and_rates_follow_overlap() {
        let m = build_tracking_model(&estimate(), &observers(), &Vector2::zeros(), &TrackingModelParams::default())
            .unwrap();
        assert!(validate_model(&m.model).is_valid());
        assert_eq!(m.model.n_states(), 25);
        assert_eq!(m.model.n_joint_actions(), 25);
        let ja = m.model.joint_actions();
        let centre = 12;
        for a in 0..25 {
            let acts = ja.unflatten(a);
            let (fneg, fpos) = SensorRates::default().at_overlap(m.overlap[a]);
            let p1 = if m.sectors[0][acts[0]].contains(&m.geometry.cell_center(centre)) { 1.0 - fneg } else { fpos };
            let p_detect_1: f64 = (0..4)
                .filter(|z| m.model.joint_observations().component(*z, 0) == DETECT)
                .map(|z| m.model.observation(a, centre, z))
                .sum();
            assert!((p_detect_1 - p1).abs() < 1e-12);
        }
        // action 0 is the middle sector for observer 1 and the last for observer 2
        assert_eq!(m.model.actions(0)[0], "a3");
        assert_eq!(m.model.actions(1)[4], "a3");
        let mid = ja.flatten(&[0, 4]);
        assert!(m.overlap[mid] > 0.0);
    }

    #[test]
    fn sector_orders() {
        assert_eq!(SectorOrder::MiddleOut.sectors(5), vec![2, 1, 3, 0, 4]);
        assert_eq!(SectorOrder::OutsideIn.sectors(5), vec![4, 0, 3, 1, 2]);
        assert_eq!(SectorOrder::Natural.sectors(3), vec![0, 1, 2]);
        assert_eq!(SectorOrder::MiddleOut.sectors(1), vec![0]);
    }

    #[test]
    fn stationary_target_has_near_identity_dynamics() {
        let g = GridGeometry { center: Vector2::zeros(), cell_size: 0.5 };
        let rows = grid_transitions(&g, &Vector2::zeros(), 1.0, 0.05);
        for (s, row) in rows.iter().enumerate() {
            assert!(row[s] > 0.95);
        }
    }
}
