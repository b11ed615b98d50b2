//! Constant-velocity Kalman filter on (x, y, vx, vy).

use nalgebra::{Cholesky, Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::TrackingError;

const SYMMETRY_TOLERANCE: f64 = 1e-9;
const JITTER_ATTEMPTS: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KalmanEstimate {
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
}

impl KalmanEstimate {
    pub fn new(mean: Vector4<f64>, covariance: Matrix4<f64>) -> Result<Self, TrackingError> {
        let est = KalmanEstimate { mean, covariance };
        est.check()?;
        Ok(est)
    }

    /// Estimate at `position` with zero velocity and diagonal covariance.
    pub fn at_rest(position: Vector2<f64>, position_sigma: f64, velocity_sigma: f64) -> Self {
        let (p, v) = (position_sigma.powi(2), velocity_sigma.powi(2));
        KalmanEstimate {
            mean: Vector4::new(position.x, position.y, 0.0, 0.0),
            covariance: Matrix4::from_diagonal(&Vector4::new(p, p, v, v)),
        }
    }

    pub fn check(&self) -> Result<(), TrackingError> {
        if !self.mean.iter().chain(self.covariance.iter()).all(|x| x.is_finite()) {
            return Err(TrackingError::NumericalFailure("non-finite estimate".into()));
        }
        let asym = (self.covariance - self.covariance.transpose()).abs().max();
        if asym > SYMMETRY_TOLERANCE {
            return Err(TrackingError::NumericalFailure(format!("covariance asymmetric by {asym:e}")));
        }
        if Cholesky::new(self.covariance).is_none() {
            return Err(TrackingError::NumericalFailure("covariance not positive definite".into()));
        }
        Ok(())
    }

    pub fn position(&self) -> Vector2<f64> {
        self.mean.fixed_rows::<2>(0).into()
    }

    pub fn velocity(&self) -> Vector2<f64> {
        self.mean.fixed_rows::<2>(2).into()
    }

    pub fn position_covariance(&self) -> Matrix2<f64> {
        self.covariance.fixed_view::<2, 2>(0, 0).into()
    }
}

/// Noise settings: white-acceleration process noise and isotropic
/// position measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanNoise {
    pub accel_sigma: f64,
    pub measurement_sigma: f64,
}

impl Default for KalmanNoise {
    fn default() -> Self {
        KalmanNoise { accel_sigma: 0.3, measurement_sigma: 0.05 }
    }
}

impl KalmanNoise {
    pub fn process(&self, dt: f64) -> Matrix4<f64> {
        white_acceleration_noise(dt, self.accel_sigma)
    }

    pub fn measurement(&self) -> Matrix2<f64> {
        Matrix2::identity() * self.measurement_sigma.powi(2)
    }
}

pub fn transition_matrix(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

/// Q = σ² G Gᵀ per axis with G = (dt²/2, dt).
pub fn white_acceleration_noise(dt: f64, accel_sigma: f64) -> Matrix4<f64> {
    let q = accel_sigma * accel_sigma;
    let (pp, pv, vv) = (dt.powi(4) / 4.0 * q, dt.powi(3) / 2.0 * q, dt * dt * q);
    let mut m = Matrix4::zeros();
    for axis in 0..2 {
        m[(axis, axis)] = pp;
        m[(axis, axis + 2)] = pv;
        m[(axis + 2, axis)] = pv;
        m[(axis + 2, axis + 2)] = vv;
    }
    m
}

fn observation_matrix() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

/// Symmetrizes and, if needed, adds growing diagonal jitter until the
/// Cholesky factorization succeeds.
fn repair(mut p: Matrix4<f64>) -> Result<Matrix4<f64>, TrackingError> {
    p = (p + p.transpose()) * 0.5;
    if Cholesky::new(p).is_some() {
        return Ok(p);
    }
    let scale = p.diagonal().abs().max().max(f64::MIN_POSITIVE);
    let mut jitter = scale * 1e-14;
    for _ in 0..JITTER_ATTEMPTS {
        let q = p + Matrix4::identity() * jitter;
        if Cholesky::new(q).is_some() {
            return Ok(q);
        }
        jitter *= 100.0;
    }
    Err(TrackingError::NumericalFailure("covariance lost positive definiteness".into()))
}

pub fn kf_predict(est: &KalmanEstimate, dt: f64, process_noise: &Matrix4<f64>) -> Result<KalmanEstimate, TrackingError> {
    let f = transition_matrix(dt);
    Ok(KalmanEstimate {
        mean: f * est.mean,
        covariance: repair(f * est.covariance * f.transpose() + process_noise)?,
    })
}

pub fn kf_update(
    est: &KalmanEstimate,
    measurement: &Vector2<f64>,
    measurement_noise: &Matrix2<f64>,
) -> Result<KalmanEstimate, TrackingError> {
    let h = observation_matrix();
    let p = &est.covariance;
    let innovation = measurement - h * est.mean;
    let s = h * p * h.transpose() + measurement_noise;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| TrackingError::NumericalFailure("singular innovation covariance".into()))?;
    let gain = p * h.transpose() * s_inv;
    Ok(KalmanEstimate {
        mean: est.mean + gain * innovation,
        covariance: repair((Matrix4::identity() - gain * h) * p)?,
    })
}

/// Predict, then update when a position measurement is present.
pub fn kf_step(
    est: &KalmanEstimate,
    measurement: Option<&Vector2<f64>>,
    dt: f64,
    process_noise: &Matrix4<f64>,
    measurement_noise: &Matrix2<f64>,
) -> Result<KalmanEstimate, TrackingError> {
    let predicted = kf_predict(est, dt, process_noise)?;
    match measurement {
        Some(z) => kf_update(&predicted, z, measurement_noise),
        None => Ok(predicted),
    }
}

/// ½ ln((2πe)² det Σ) in nats.
pub fn differential_entropy(position_covariance: &Matrix2<f64>) -> Result<f64, TrackingError> {
    let det = position_covariance.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(TrackingError::NumericalFailure(format!("covariance determinant {det}")));
    }
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    Ok(0.5 * (two_pi_e * two_pi_e * det).ln())
}
