//! Independent reference implementations shared by the integration tests.
//! None of these call into the algorithms under test; they only read model
//! tables.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rhodec::{Belief, ModelBuilder, RhoDecPomdp, Uncertainty};

/// Random distribution over `n` outcomes, sometimes with exact zeros.
pub fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random::<f64>() })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.random_range(0..n)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Random two-agent model with binary actions and observations.
pub fn random_model(rng: &mut ChaCha8Rng, n_states: usize, alpha: f64) -> RhoDecPomdp {
    random_model_sized(rng, n_states, &[2, 2], &[2, 2], alpha)
}

pub fn random_model_sized(
    rng: &mut ChaCha8Rng,
    n_states: usize,
    actions: &[usize],
    observations: &[usize],
    alpha: f64,
) -> RhoDecPomdp {
    let mut b = ModelBuilder::with_sizes(n_states, actions, observations);
    let na = b.joint_actions().len();
    let nz = b.joint_observations().len();
    for a in 0..na {
        for s in 0..n_states {
            for (next, p) in random_distribution(rng, n_states).into_iter().enumerate() {
                b.set_transition(s, a, next, p);
            }
            for (z, p) in random_distribution(rng, nz).into_iter().enumerate() {
                b.set_observation(a, s, z, p);
            }
            b.set_reward(s, a, rng.random_range(-5.0..5.0));
        }
    }
    b.set_initial_belief(Belief::new(random_distribution(rng, n_states)).unwrap());
    b.set_alpha(alpha).set_uncertainty(Uncertainty::ShannonEntropy);
    b.build()
}

pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
}

pub fn rho(model: &RhoDecPomdp, b: &[f64], a: usize) -> f64 {
    let expected: f64 = b.iter().enumerate().map(|(s, p)| p * model.reward(s, a)).sum();
    let g = match model.uncertainty() {
        Uncertainty::None => 0.0,
        Uncertainty::ShannonEntropy => entropy_bits(b),
    };
    expected - model.alpha() * g
}

/// Unnormalized posterior and its mass.
pub fn bayes(model: &RhoDecPomdp, b: &[f64], a: usize, z: usize) -> (Vec<f64>, f64) {
    let n = model.n_states();
    let post: Vec<f64> = (0..n)
        .map(|next| {
            let prior: f64 = (0..n).map(|s| model.transition(s, a, next) * b[s]).sum();
            model.observation(a, next, z) * prior
        })
        .collect();
    let eta: f64 = post.iter().sum();
    (post, eta)
}

/// Local policy as per-depth action tables indexed by observation sequence.
pub type Tree = Vec<Vec<usize>>;

/// Every deterministic local policy of the given depth.
pub fn all_trees(n_actions: usize, n_obs: usize, depth: usize) -> Vec<Tree> {
    let widths: Vec<usize> = (0..depth).map(|t| n_obs.pow(t as u32)).collect();
    let slots: usize = widths.iter().sum();
    let total = n_actions.pow(slots as u32);
    (0..total)
        .map(|mut code| {
            let flat: Vec<usize> = (0..slots)
                .map(|_| {
                    let d = code % n_actions;
                    code /= n_actions;
                    d
                })
                .collect();
            let mut out = Vec::new();
            let mut at = 0;
            for w in &widths {
                out.push(flat[at..at + w].to_vec());
                at += w;
            }
            out
        })
        .collect()
}

/// Value of a joint policy by explicit enumeration of joint histories.
pub fn joint_value(model: &RhoDecPomdp, trees: &[Tree], horizon: usize) -> f64 {
    fn go(model: &RhoDecPomdp, trees: &[Tree], t: usize, horizon: usize, b: &[f64], seqs: &[usize], p: f64) -> f64 {
        if t == horizon || p == 0.0 {
            return 0.0;
        }
        let acts: Vec<usize> = trees.iter().zip(seqs).map(|(tr, &q)| tr[t][q]).collect();
        let a = model.joint_actions().flatten(&acts);
        let mut v = p * rho(model, b, a);
        for z in 0..model.n_joint_observations() {
            let (post, eta) = bayes(model, b, a, z);
            if eta <= 0.0 {
                continue;
            }
            let post: Vec<f64> = post.iter().map(|x| x / eta).collect();
            let next: Vec<usize> = seqs
                .iter()
                .enumerate()
                .map(|(i, &q)| q * model.observations(i).len() + model.joint_observations().component(z, i))
                .collect();
            v += go(model, trees, t + 1, horizon, &post, &next, p * eta);
        }
        v
    }
    let b0 = model.initial_belief().probs().to_vec();
    go(model, trees, 0, horizon, &b0, &vec![0; trees.len()], 1.0)
}

/// Optimum over all two-agent joint policies.
pub fn brute_force_optimum(model: &RhoDecPomdp, horizon: usize) -> f64 {
    let t0 = all_trees(model.actions(0).len(), model.observations(0).len(), horizon);
    let t1 = all_trees(model.actions(1).len(), model.observations(1).len(), horizon);
    let mut best = f64::NEG_INFINITY;
    for a in &t0 {
        for b in &t1 {
            best = best.max(joint_value(model, &[a.clone(), b.clone()], horizon));
        }
    }
    best
}

/// Optimal value of the centralized problem: expectimax over joint actions
/// and joint observations.
pub fn centralized_optimum(model: &RhoDecPomdp, b: &[f64], steps: usize) -> f64 {
    if steps == 0 {
        return 0.0;
    }
    (0..model.n_joint_actions())
        .map(|a| {
            let mut v = rho(model, b, a);
            for z in 0..model.n_joint_observations() {
                let (post, eta) = bayes(model, b, a, z);
                if eta > 0.0 {
                    let post: Vec<f64> = post.iter().map(|x| x / eta).collect();
                    v += eta * centralized_optimum(model, &post, steps - 1);
                }
            }
            v
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Optimal value of the fully observable MDP with state rewards only.
pub fn mdp_optimum(model: &RhoDecPomdp, b: &[f64], steps: usize) -> f64 {
    let n = model.n_states();
    let mut v = vec![0.0; n];
    for _ in 0..steps {
        v = (0..n)
            .map(|s| {
                (0..model.n_joint_actions())
                    .map(|a| model.reward(s, a) + (0..n).map(|x| model.transition(s, a, x) * v[x]).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }
    b.iter().zip(&v).map(|(p, x)| p * x).sum()
}

// Textbook Kalman filter on plain arrays.

pub type M4 = [[f64; 4]; 4];

pub fn mat_mul(a: &M4, b: &M4) -> M4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn transpose(a: &M4) -> M4 {
    let mut t = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn cv_transition(dt: f64) -> M4 {
    [[1.0, 0.0, dt, 0.0], [0.0, 1.0, 0.0, dt], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

/// Piecewise-constant white acceleration, q = σ².
pub fn accel_noise(dt: f64, sigma: f64) -> M4 {
    let q = sigma * sigma;
    let (a, b, c) = (dt.powi(4) / 4.0 * q, dt.powi(3) / 2.0 * q, dt * dt * q);
    [[a, 0.0, b, 0.0], [0.0, a, 0.0, b], [b, 0.0, c, 0.0], [0.0, b, 0.0, c]]
}

/// One predict step followed by an optional position update.
pub fn kf_reference(mean: [f64; 4], cov: &M4, z: Option<[f64; 2]>, dt: f64, q: &M4, r: [[f64; 2]; 2]) -> ([f64; 4], M4) {
    let f = cv_transition(dt);
    let mut m = [0.0; 4];
    for i in 0..4 {
        m[i] = (0..4).map(|k| f[i][k] * mean[k]).sum();
    }
    let mut p = mat_mul(&mat_mul(&f, cov), &transpose(&f));
    for i in 0..4 {
        for j in 0..4 {
            p[i][j] += q[i][j];
        }
    }
    let Some(z) = z else { return (m, p) };
    // S = H P Hᵀ + R with H selecting positions.
    let s = [[p[0][0] + r[0][0], p[0][1] + r[0][1]], [p[1][0] + r[1][0], p[1][1] + r[1][1]]];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let si = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
    // K = P Hᵀ S⁻¹ (4×2).
    let mut k = [[0.0; 2]; 4];
    for i in 0..4 {
        for j in 0..2 {
            k[i][j] = p[i][0] * si[0][j] + p[i][1] * si[1][j];
        }
    }
    let y = [z[0] - m[0], z[1] - m[1]];
    for i in 0..4 {
        m[i] += k[i][0] * y[0] + k[i][1] * y[1];
    }
    // P' = (I − K H) P.
    let mut np = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            np[i][j] = p[i][j] - (k[i][0] * p[0][j] + k[i][1] * p[1][j]);
        }
    }
    (m, np)
}

pub fn gaussian_entropy_2d(c: [[f64; 2]; 2]) -> f64 {
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    0.5 * ((2.0 * std::f64::consts::PI * std::f64::consts::E).powi(2) * det).ln()
}

/// Mass of a bivariate Gaussian over axis-aligned cells by tensor Simpson
/// quadrature, normalized over the cells.
pub fn cell_masses_quadrature(mean: [f64; 2], cov: [[f64; 2]; 2], cells: &[([f64; 2], [f64; 2])], n: usize) -> Vec<f64> {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let inv = [[cov[1][1] / det, -cov[0][1] / det], [-cov[1][0] / det, cov[0][0] / det]];
    let pdf = |x: f64, y: f64| {
        let (dx, dy) = (x - mean[0], y - mean[1]);
        (-0.5 * (dx * (inv[0][0] * dx + inv[0][1] * dy) + dy * (inv[1][0] * dx + inv[1][1] * dy))).exp()
    };
    let n = n + n % 2;
    let w = |i: usize| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
    let masses: Vec<f64> = cells
        .iter()
        .map(|(xs, ys)| {
            let (hx, hy) = ((xs[1] - xs[0]) / n as f64, (ys[1] - ys[0]) / n as f64);
            let mut acc = 0.0;
            for i in 0..=n {
                for j in 0..=n {
                    acc += w(i) * w(j) * pdf(xs[0] + i as f64 * hx, ys[0] + j as f64 * hy);
                }
            }
            acc * hx * hy / 9.0
        })
        .collect();
    let total: f64 = masses.iter().sum();
    masses.into_iter().map(|m| m / total).collect()
}

/// Circular sector described independently of the library type.
#[derive(Clone, Copy, Debug)]
pub struct Wedge {
    pub apex: [f64; 2],
    pub heading: f64,
    pub half_width: f64,
    pub range: f64,
}

impl Wedge {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (dx, dy) = (p[0] - self.apex[0], p[1] - self.apex[1]);
        let r2 = dx * dx + dy * dy;
        if r2 > self.range * self.range {
            return false;
        }
        // Angle between the offset and the heading via the dot product.
        let (hx, hy) = (self.heading.cos(), self.heading.sin());
        r2 == 0.0 || (dx * hx + dy * hy) / r2.sqrt() >= self.half_width.cos() - 1e-15
    }

    pub fn area(&self) -> f64 {
        self.half_width * self.range * self.range
    }
}

/// Intersection area over the smaller area by uniform sampling in the
/// bounding box of the smaller wedge's disc.
pub fn overlap_monte_carlo(a: &Wedge, b: &Wedge, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (small, other) = if a.area() <= b.area() { (a, b) } else { (b, a) };
    let r = small.range;
    let (mut inside, mut both) = (0usize, 0usize);
    for _ in 0..samples {
        let p = [small.apex[0] + rng.random_range(-r..r), small.apex[1] + rng.random_range(-r..r)];
        if small.contains(p) {
            inside += 1;
            if other.contains(p) {
                both += 1;
            }
        }
    }
    if inside == 0 {
        0.0
    } else {
        both as f64 / inside as f64
    }
}
