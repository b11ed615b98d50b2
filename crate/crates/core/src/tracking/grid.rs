//! 5×5 grid discretization of the position estimate.

use nalgebra::Vector2;
use serde::Serialize;

use super::kalman::KalmanEstimate;
use crate::model::Belief;

pub const GRID_SIDE: usize = 5;
pub const GRID_CELLS: usize = GRID_SIDE * GRID_SIDE;
/// The grid spans this many standard deviations either side of the mean.
pub const SIGMA_SPAN: f64 = 3.0;

/// Cell `iy * 5 + ix` is centred at `center + cell_size * (ix − 2, iy − 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridGeometry {
    pub center: Vector2<f64>,
    pub cell_size: f64,
}

impl GridGeometry {
    pub fn cell_center(&self, cell: usize) -> Vector2<f64> {
        let half = (GRID_SIDE / 2) as f64;
        let (ix, iy) = ((cell % GRID_SIDE) as f64, (cell / GRID_SIDE) as f64);
        self.center + Vector2::new(ix - half, iy - half) * self.cell_size
    }

    /// Bounds `[x0, x1] × [y0, y1]` of a cell.
    pub fn cell_bounds(&self, cell: usize) -> ([f64; 2], [f64; 2]) {
        let c = self.cell_center(cell);
        let h = self.cell_size / 2.0;
        ([c.x - h, c.x + h], [c.y - h, c.y + h])
    }

    pub fn half_extent(&self) -> f64 {
        self.cell_size * GRID_SIDE as f64 / 2.0
    }
}

/// Grid belief with masses equal to the Gaussian probability of each cell, renormalized over the grid.
pub fn discretize_belief(est: &KalmanEstimate) -> (Belief, GridGeometry) {
    let cov = est.position_covariance();
    let sigma = cov[(0, 0)].max(cov[(1, 1)]).sqrt();
    let geometry = GridGeometry {
        center: est.position(),
        cell_size: 2.0 * SIGMA_SPAN * sigma / GRID_SIDE as f64,
    };
    (grid_masses(est, &geometry), geometry)
}

// 8-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
const X_PANELS: usize = 6;

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// P(x0 ≤ X ≤ x1, y0 ≤ Y ≤ y1): Gauss-Legendre over x, exact conditional normal cdf over y.
fn rectangle_probability(mean: Vector2<f64>, sx: f64, sy: f64, corr: f64, xb: [f64; 2], yb: [f64; 2]) -> f64 {
    let cond_sd = sy * (1.0 - corr * corr).max(0.0).sqrt();
    let panel = (xb[1] - xb[0]) / X_PANELS as f64;
    let mut total = 0.0;
    for k in 0..X_PANELS {
        let mid = xb[0] + (k as f64 + 0.5) * panel;
        for (u, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let x = mid + 0.5 * panel * u;
            let zx = (x - mean.x) / sx;
            let pdf = (-0.5 * zx * zx).exp() / (sx * (2.0 * std::f64::consts::PI).sqrt());
            let m = mean.y + corr * sy * zx;
            let py = if cond_sd > 0.0 {
                std_normal_cdf((yb[1] - m) / cond_sd) - std_normal_cdf((yb[0] - m) / cond_sd)
            } else {
                f64::from(yb[0] <= m && m <= yb[1])
            };
            total += 0.5 * panel * w * pdf * py;
        }
    }
    total
}

/// Position probability of each cell of an arbitrary grid, renormalized to sum to 1.
pub fn grid_masses(est: &KalmanEstimate, geometry: &GridGeometry) -> Belief {
    let cov = est.position_covariance();
    let mean = est.position();
    let (sx, sy) = (cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt());
    let corr = (cov[(0, 1)] / (sx * sy)).clamp(-1.0, 1.0);
    let masses: Vec<f64> = (0..GRID_CELLS)
        .map(|cell| {
            let (xb, yb) = geometry.cell_bounds(cell);
            rectangle_probability(mean, sx, sy, corr, xb, yb).max(0.0)
        })
        .collect();
    if masses.iter().sum::<f64>() > 1e-12 {
        return Belief::from_weights(masses).expect("positive total mass");
    }
    // Mean far outside the grid: fall back to relative pdf values at the centres.
    let inv = cov.try_inverse().expect("position covariance is positive definite");
    let log_w: Vec<f64> = (0..GRID_CELLS)
        .map(|cell| {
            let d = geometry.cell_center(cell) - mean;
            -0.5 * (d.transpose() * inv * d)[0]
        })
        .collect();
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Belief::from_weights(log_w.iter().map(|l| (l - top).exp()).collect()).expect("largest weight is 1")
}
