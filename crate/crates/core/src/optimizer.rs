//! Heuristic extremization over probability measures on the simplex.
//!
//! Both searches are heuristics with no optimality certificate: the
//! minimax objective `sup_t I_mu(t)` is not convex in `mu`. They record a
//! best-so-far trace and are guaranteed never to return anything worse than
//! the uniform baseline, which is always evaluated first.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::functionals::{ft_functional, m_functional};
use crate::metric::{MetricSpace, ProbabilityMeasure};

const RESTARTS: u64 = 3;
const STALL_ROUNDS: usize = 10;

/// Best measure found, its objective value, and the best-so-far trace.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub measure: ProbabilityMeasure,
    pub value: f64,
    pub trace: Vec<f64>,
}

/// `sup_t I_mu(t)`, infinite when the integrand diverges somewhere.
fn sup_objective(space: &MetricSpace, weights: &[f64]) -> (f64, Vec<f64>) {
    let mu = match ProbabilityMeasure::new(weights.to_vec()) {
        Ok(mu) => mu,
        Err(_) => return (f64::INFINITY, Vec::new()),
    };
    let mut per_point = Vec::with_capacity(space.len());
    let mut sup = 0.0f64;
    for t in 0..space.len() {
        match ft_functional(space, &mu, t) {
            Ok(v) => {
                sup = sup.max(v);
                per_point.push(v);
            }
            Err(_) => return (f64::INFINITY, Vec::new()),
        }
    }
    (sup, per_point)
}

fn normalize(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
}

/// Searches for a measure minimizing `sup_t I_mu(t)`.
///
/// Exponentiated-gradient ascent maintains an adversarial distribution over
/// points, tilted toward large per-point values with step size
/// `1/sqrt(iter)`; the measure then takes the best improving step toward a
/// mixture of balls around the adversary's heavy points, over a small grid
/// of ball scales and mixing weights. Three seed-derived restarts; stops
/// early after [`STALL_ROUNDS`] rounds without improvement beyond `tol`.
pub fn optimize_majorizing_measure(
    space: &MetricSpace,
    iters: usize,
    tol: f64,
    seed: u64,
) -> OptimizeResult {
    let n = space.len();
    let uniform = vec![1.0 / n as f64; n];
    let (mut best_value, _) = sup_objective(space, &uniform);
    let mut best = uniform.clone();
    let mut trace = vec![best_value];
    if n == 1 {
        return OptimizeResult {
            measure: ProbabilityMeasure::new(best).unwrap(),
            value: best_value,
            trace,
        };
    }

    let diam = space.diameter();
    let scales = [diam / 2.0, diam / 4.0, diam / 8.0];
    // Ball membership per scale, reused across iterations.
    let balls: Vec<Vec<Vec<usize>>> = scales
        .iter()
        .map(|&rho| (0..n).map(|t| space.ball(t, rho.max(0.0)).unwrap()).collect())
        .collect();
    let betas = [1.0, 0.5, 0.25, 0.1];

    for restart in 0..RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart);
        let mut mu = if restart == 0 {
            uniform.clone()
        } else {
            let mut w: Vec<f64> = (0..n).map(|_| -(rng.random::<f64>().max(1e-12)).ln()).collect();
            normalize(&mut w);
            w
        };
        let (mut current, mut per_point) = sup_objective(space, &mu);
        if current < best_value {
            best_value = current;
            best = mu.clone();
        }
        let mut adversary = vec![1.0 / n as f64; n];
        let mut stall = 0usize;
        for iter in 1..=iters {
            if per_point.is_empty() {
                break;
            }
            // Exponentiated-gradient step on the adversary.
            let eta = 1.0 / (iter as f64).sqrt();
            let peak = per_point.iter().copied().fold(f64::MIN, f64::max).max(1e-300);
            for (w, &v) in adversary.iter_mut().zip(&per_point) {
                *w *= (eta * v / peak).exp();
            }
            normalize(&mut adversary);

            // Best response: move mass toward balls around heavy points.
            let before = current;
            for ball_set in &balls {
                let mut direction = vec![0.0; n];
                for (t, ball) in ball_set.iter().enumerate() {
                    let share = adversary[t] / ball.len() as f64;
                    for &s in ball {
                        direction[s] += share;
                    }
                }
                for &beta in &betas {
                    let candidate: Vec<f64> = mu
                        .iter()
                        .zip(&direction)
                        .map(|(&m, &d)| (1.0 - beta) * m + beta * d)
                        .collect();
                    let (value, pp) = sup_objective(space, &candidate);
                    if value < current {
                        current = value;
                        mu = candidate;
                        per_point = pp;
                    }
                }
            }
            if current < best_value {
                best_value = current;
                best = mu.clone();
            }
            trace.push(best_value);
            if before - current < tol {
                stall += 1;
                if stall >= STALL_ROUNDS {
                    break;
                }
            } else {
                stall = 0;
            }
        }
    }
    OptimizeResult {
        measure: ProbabilityMeasure::new(best).expect("search preserves the simplex"),
        value: best_value,
        trace,
    }
}

/// `M(mu, mu)` with divergent cases mapped to minus infinity.
fn self_objective(space: &MetricSpace, weights: &[f64]) -> f64 {
    let mu = match ProbabilityMeasure::new(weights.to_vec()) {
        Ok(mu) => mu,
        Err(_) => return f64::NEG_INFINITY,
    };
    m_functional(space, &mu, &mu).unwrap_or(f64::NEG_INFINITY)
}

/// Hill-climbs `M(mu, mu)` over the simplex: pairwise mass transfers at a
/// few step sizes, plus mixing toward the point with the largest
/// `I_mu`. Returns the best measure found; never worse than uniform.
pub fn fernique_self_bound(
    space: &MetricSpace,
    iters: usize,
    tol: f64,
    seed: u64,
) -> OptimizeResult {
    let n = space.len();
    let uniform = vec![1.0 / n as f64; n];
    let mut best = uniform.clone();
    let mut best_value = self_objective(space, &uniform);
    let mut trace = vec![best_value];
    if n == 1 {
        return OptimizeResult {
            measure: ProbabilityMeasure::new(best).unwrap(),
            value: best_value,
            trace,
        };
    }
    let deltas = [0.2, 0.05, 0.01];
    for restart in 0..RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart);
        let mut mu = if restart == 0 {
            uniform.clone()
        } else {
            let mut w: Vec<f64> = (0..n).map(|_| -(rng.random::<f64>().max(1e-12)).ln()).collect();
            normalize(&mut w);
            w
        };
        let mut current = self_objective(space, &mu);
        if current > best_value {
            best_value = current;
            best = mu.clone();
        }
        let mut stall = 0usize;
        for _ in 0..iters {
            let before = current;
            // Pairwise transfer: random source and sink coordinates.
            for _ in 0..n.min(8) {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                if i == j || mu[i] <= 0.0 {
                    continue;
                }
                for &delta in &deltas {
                    let moved = delta * mu[i];
                    let mut candidate = mu.clone();
                    candidate[i] -= moved;
                    candidate[j] += moved;
                    let value = self_objective(space, &candidate);
                    if value > current {
                        current = value;
                        mu = candidate;
                    }
                }
            }
            // Mixing toward the heaviest contributor.
            if let Ok(m) = ProbabilityMeasure::new(mu.clone()) {
                let mut hot = 0usize;
                let mut hot_value = f64::NEG_INFINITY;
                for t in 0..n {
                    if m.weight(t) > 0.0 {
                        if let Ok(v) = ft_functional(space, &m, t) {
                            if v > hot_value {
                                hot_value = v;
                                hot = t;
                            }
                        }
                    }
                }
                for beta in [0.3, 0.1, 0.03] {
                    let mut candidate: Vec<f64> = mu.iter().map(|&w| (1.0 - beta) * w).collect();
                    candidate[hot] += beta;
                    let value = self_objective(space, &candidate);
                    if value > current {
                        current = value;
                        mu = candidate;
                    }
                }
            }
            if current > best_value {
                best_value = current;
                best = mu.clone();
            }
            trace.push(best_value);
            if current - before < tol {
                stall += 1;
                if stall >= STALL_ROUNDS {
                    break;
                }
            } else {
                stall = 0;
            }
        }
    }
    OptimizeResult {
        measure: ProbabilityMeasure::new(best).expect("search preserves the simplex"),
        value: best_value,
        trace,
    }
}
