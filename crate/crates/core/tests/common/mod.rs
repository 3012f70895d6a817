//! Shared test helpers: independent oracles and seeded instance generators.

#![allow(dead_code)]

use chainlab_core::metric::{MetricSpace, ProbabilityMeasure};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Ball mass straight off the distance matrix, bypassing the library's ball
/// queries. Summation in point order so equal point sets give bit-identical
/// masses.
pub fn ball_mass(space: &MetricSpace, mu: &ProbabilityMeasure, t: usize, eps: f64) -> f64 {
    (0..space.len())
        .filter(|&s| space.dist(t, s) <= eps)
        .map(|s| mu.weight(s))
        .sum()
}

fn integrand(space: &MetricSpace, mu: &ProbabilityMeasure, t: usize, eps: f64) -> f64 {
    let mass = ball_mass(space, mu, t, eps);
    if mass >= 1.0 {
        0.0
    } else {
        (-(mass.log2())).max(0.0).sqrt()
    }
}

/// Adaptive quadrature of the (nonincreasing, piecewise-constant) integrand
/// of the ball-measure integral: on each interval the endpoint values
/// bracket the integral, equal endpoints mean the integrand is constant
/// there, and bisection tightens the bracket below `tol`.
pub fn ft_quadrature_oracle(
    space: &MetricSpace,
    mu: &ProbabilityMeasure,
    t: usize,
    tol: f64,
) -> f64 {
    fn recurse(
        space: &MetricSpace,
        mu: &ProbabilityMeasure,
        t: usize,
        a: f64,
        b: f64,
        fa: f64,
        fb: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        if fa == fb {
            return fa * (b - a);
        }
        let upper = fa * (b - a);
        let lower = fb * (b - a);
        if upper - lower <= tol || depth >= 60 {
            return 0.5 * (upper + lower);
        }
        let m = 0.5 * (a + b);
        let fm = integrand(space, mu, t, m);
        recurse(space, mu, t, a, m, fa, fm, tol / 2.0, depth + 1)
            + recurse(space, mu, t, m, b, fm, fb, tol / 2.0, depth + 1)
    }
    let diam = space.diameter();
    if diam == 0.0 {
        return 0.0;
    }
    let fa = integrand(space, mu, t, 0.0);
    let fb = integrand(space, mu, t, diam);
    recurse(space, mu, t, 0.0, diam, fa, fb, tol, 0)
}

/// Standard normal density.
fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF via erf.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `Q(x) = P[Z >= x]`.
pub fn q_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `E[max of m iid standard normals]` by Simpson quadrature of
/// `x m phi(x) Phi(x)^(m-1)` over [-12, 12].
pub fn emax_normal_quadrature(m: usize) -> f64 {
    let f = |x: f64| x * m as f64 * phi(x) * normal_cdf(x).powi(m as i32 - 1);
    let (a, b) = (-12.0f64, 12.0f64);
    let steps = 200_000usize; // even
    let h = (b - a) / steps as f64;
    let mut total = f(a) + f(b);
    for i in 1..steps {
        let x = a + i as f64 * h;
        total += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    total * h / 3.0
}

/// Kinds of synthetic point clouds used across the randomized suites.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, kind: usize) -> Vec<Vec<f64>> {
    match kind % 5 {
        0 => (0..n).map(|_| vec![rng.random::<f64>()]).collect(),
        1 => (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect(),
        2 => (0..n)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()])
            .collect(),
        3 => {
            // A few tight clusters.
            let k = 2 + (n % 3);
            let centers: Vec<(f64, f64)> =
                (0..k).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
            (0..n)
                .map(|i| {
                    let (cx, cy) = centers[i % k];
                    vec![
                        cx + 0.05 * (rng.random::<f64>() - 0.5),
                        cy + 0.05 * (rng.random::<f64>() - 0.5),
                    ]
                })
                .collect()
        }
        _ => {
            // Irregularly spaced points on a line.
            let mut x = 0.0;
            (0..n)
                .map(|_| {
                    x += -(rng.random::<f64>().max(1e-12)).ln();
                    vec![x]
                })
                .collect()
        }
    }
}

/// Random space with unit diameter.
pub fn random_space(rng: &mut ChaCha8Rng, n: usize, kind: usize) -> MetricSpace {
    let labels = (0..n).map(|i| format!("p{i:02}")).collect();
    let points = random_points(rng, n, kind);
    MetricSpace::from_points(labels, &points)
        .unwrap()
        .normalize_diameter()
        .unwrap()
}

/// Random measure bounded away from zero.
pub fn random_measure(rng: &mut ChaCha8Rng, n: usize) -> ProbabilityMeasure {
    let raw: Vec<f64> = (0..n)
        .map(|_| 0.2 - (rng.random::<f64>().max(1e-12)).ln())
        .collect();
    ProbabilityMeasure::normalized(raw).unwrap()
}

/// Random positive-semidefinite covariance `A A^T / n` with unit-order
/// diagonal.
pub fn random_psd_model(rng: &mut ChaCha8Rng, n: usize) -> chainlab_core::GaussianModel {
    use rand_distr::StandardNormal;
    let a: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    a[i].iter().zip(&a[j]).map(|(x, y)| x * y).sum::<f64>() / n as f64
                })
                .collect()
        })
        .collect();
    let labels = (0..n).map(|i| format!("t{i:02}")).collect();
    chainlab_core::GaussianModel::new(labels, rows).unwrap()
}

/// Random squared-exponential covariance over random planar points.
pub fn random_rbf_model(rng: &mut ChaCha8Rng, n: usize) -> chainlab_core::GaussianModel {
    let points: Vec<Vec<f64>> =
        (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let lengthscale = 0.2 + 0.6 * rng.random::<f64>();
    let labels = (0..n).map(|i| format!("t{i:02}")).collect();
    chainlab_core::GaussianModel::rbf(labels, &points, lengthscale).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
