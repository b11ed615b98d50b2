//! Circular detection sectors and their pairwise overlap.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const OVERLAP_SAMPLES: usize = 100_000;
const OVERLAP_SEED: u64 = 0x5EC7_0A11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverSpec {
    pub position: Vector2<f64>,
    pub max_range: f64,
    pub sector_width_deg: f64,
    pub sector_count: usize,
}

impl ObserverSpec {
    pub fn new(position: Vector2<f64>, max_range: f64) -> Self {
        ObserverSpec { position, max_range, sector_width_deg: 15.0, sector_count: 5 }
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.max_range > 0.0 && self.sector_width_deg > 0.0) {
            return Err("range and sector width must be positive".into());
        }
        if self.sector_count % 2 == 0 {
            return Err("sector count must be odd".into());
        }
        Ok(())
    }

    /// Sector for 0-based `action` in a fan whose middle sector points at
    /// `aim`. Actions sweep counter-clockwise.
    pub fn sector(&self, action: usize, aim: &Vector2<f64>) -> Sector {
        assert!(action < self.sector_count, "sector {action} out of range");
        let width = self.sector_width_deg.to_radians();
        let d = aim - self.position;
        let bearing = d.y.atan2(d.x);
        let offset = action as f64 - (self.sector_count / 2) as f64;
        Sector {
            apex: self.position,
            heading: bearing + offset * width,
            half_width: width / 2.0,
            range: self.max_range,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub apex: Vector2<f64>,
    /// Direction of the sector's centre line, radians.
    pub heading: f64,
    pub half_width: f64,
    pub range: f64,
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

impl Sector {
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        let d = p - self.apex;
        let r = d.norm();
        if r > self.range {
            return false;
        }
        r == 0.0 || wrap_angle(d.y.atan2(d.x) - self.heading).abs() <= self.half_width
    }

    pub fn area(&self) -> f64 {
        self.half_width * self.range * self.range
    }

    /// Uniform point in the sector.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector2<f64> {
        let r = self.range * rng.random::<f64>().sqrt();
        let theta = self.heading + self.half_width * (2.0 * rng.random::<f64>() - 1.0);
        self.apex + Vector2::new(r * theta.cos(), r * theta.sin())
    }

    fn canonical_cmp(&self, other: &Sector) -> Ordering {
        let key = |s: &Sector| [s.area(), s.apex.x, s.apex.y, s.heading, s.half_width, s.range];
        key(self)
            .iter()
            .zip(key(other).iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

/// The smaller sector first, with a total tie-break so the result does not
/// depend on argument order.
fn ordered<'a>(a: &'a Sector, b: &'a Sector) -> (&'a Sector, &'a Sector) {
    if a.canonical_cmp(b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    }
}

/// Monte Carlo estimate of area(a ∩ b) / area(smaller sector) with `samples`
/// uniform draws from the smaller sector.
pub fn sector_overlap_with(a: &Sector, b: &Sector, samples: usize, seed: u64) -> f64 {
    let (small, large) = ordered(a, b);
    if (small.apex - large.apex).norm() > small.range + large.range {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..samples).filter(|_| large.contains(&small.sample(&mut rng))).count();
    hits as f64 / samples as f64
}

pub fn sector_overlap(a: &Sector, b: &Sector) -> f64 {
    sector_overlap_with(a, b, OVERLAP_SAMPLES, OVERLAP_SEED)
}

/// Overlap of two observers' chosen sectors, both fans aimed at `aim`.
pub fn sector_overlap_fraction(
    obs_a: &ObserverSpec,
    action_a: usize,
    obs_b: &ObserverSpec,
    action_b: usize,
    aim: &Vector2<f64>,
) -> f64 {
    sector_overlap(&obs_a.sector(action_a, aim), &obs_b.sector(action_b, aim))
}

/// Uniform point in a ∩ b by rejection from the smaller sector.
pub fn sample_overlap<R: Rng + ?Sized>(a: &Sector, b: &Sector, rng: &mut R, max_tries: usize) -> Option<Vector2<f64>> {
    let (small, large) = ordered(a, b);
    (0..max_tries).map(|_| small.sample(rng)).find(|p| large.contains(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fan_geometry() {
        let o = ObserverSpec::new(Vector2::new(0.0, 0.0), 2.5);
        let aim = Vector2::new(2.0, 0.0);
        let mid = o.sector(2, &aim);
        assert!(mid.heading.abs() < 1e-15);
        assert!(mid.contains(&aim));
        assert!(!o.sector(0, &aim).contains(&aim));
        assert!(!mid.contains(&Vector2::new(2.6, 0.0)));
        assert!((o.sector(4, &aim).heading - 30f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn self_overlap_is_one() {
        let o = ObserverSpec::new(Vector2::new(0.0, 2.0), 2.5);
        let aim = Vector2::new(2.0, 2.0);
        assert!((sector_overlap_fraction(&o, 2, &o, 2, &aim) - 1.0).abs() < 0.01);
    }

    #[test]
    fn opposite_half_planes_do_not_overlap() {
        let a = ObserverSpec::new(Vector2::new(0.0, 0.0), 2.5);
        let b = ObserverSpec::new(Vector2::new(10.0, 0.0), 3.0);
        assert_eq!(sector_overlap_fraction(&a, 2, &b, 2, &Vector2::new(-1.0, 0.0)), 0.0);
    }

    #[test]
    fn overlap_is_symmetric() {
        let a = ObserverSpec::new(Vector2::new(0.0, 2.0), 2.5);
        let b = ObserverSpec::new(Vector2::new(4.0, 2.0), 3.0);
        let aim = Vector2::new(2.0, 2.1);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(sector_overlap_fraction(&a, i, &b, j, &aim), sector_overlap_fraction(&b, j, &a, i, &aim));
            }
        }
    }

    #[test]
    fn overlap_samples_lie_in_both() {
        let a = ObserverSpec::new(Vector2::new(0.0, 2.0), 2.5).sector(2, &Vector2::new(2.0, 2.0));
        let b = ObserverSpec::new(Vector2::new(4.0, 2.0), 3.0).sector(2, &Vector2::new(2.0, 2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = sample_overlap(&a, &b, &mut rng, 10_000).unwrap();
            assert!(a.contains(&p) && b.contains(&p));
        }
    }
}
