//! Reference computations written straight from the formulas, sharing no
//! code with the library's solvers.

#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use robandit::envsim::{Trajectory, Tuple};
use robandit::features::{reward_feature, Action};

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let pivot_row = a[col].clone();
        for row in col + 1..n {
            let f = a[row][col] / pivot_row[col];
            for (v, p) in a[row].iter_mut().zip(&pivot_row).skip(col) {
                *v -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// Weighted ridge from the normal equations
/// `(Σ uᵢ xᵢxᵢᵀ + ζI) w = Σ uᵢ rᵢ xᵢ`, rows of `xs` being the features.
pub fn ridge_oracle(xs: &[Vec<f64>], r: &[f64], u: &[f64], zeta: f64) -> Vec<f64> {
    let d = xs[0].len();
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for ((x, &ri), &ui) in xs.iter().zip(r).zip(u) {
        for i in 0..d {
            for j in 0..d {
                a[i][j] += ui * x[i] * x[j];
            }
            b[i] += ui * ri * x[i];
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += zeta;
    }
    gauss_solve(a, b)
}

/// Sample quantile, "type 7": with 1-based order statistics x₍₁₎ ≤ … ≤ x₍ₙ₎
/// and h = (n − 1)q + 1, return x₍⌊h⌋₎ + (h − ⌊h⌋)(x₍⌈h⌉₎ − x₍⌊h⌋₎).
pub fn quantile_type7(values: &[f64], q: f64) -> f64 {
    let mut x = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (x.len() as f64 - 1.0) * q + 1.0;
    let lo = h.floor();
    let hi = h.ceil();
    let at = |k: f64| x[k as usize - 1];
    at(lo) + (h - lo) * (at(hi) - at(lo))
}

/// `τ (q₃ + 1.5 IQR)`.
pub fn boxplot_cap(values: &[f64], tau: f64) -> f64 {
    let q1 = quantile_type7(values, 0.25);
    let q3 = quantile_type7(values, 0.75);
    tau * (q3 + 1.5 * (q3 - q1))
}

pub fn features_of(data: &Trajectory) -> Vec<Vec<f64>> {
    data.tuples
        .iter()
        .map(|t| reward_feature(&t.state, t.action).as_slice().to_vec())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `g(s, a) = [a s, a]`.
fn g(s: &[f64], a: f64) -> Vec<f64> {
    let mut v: Vec<f64> = s.iter().map(|x| a * x).collect();
    v.push(a);
    v
}

/// Boltzmann probabilities `[π(0|s), π(1|s)]` with `π ∝ exp(−θᵀg(s,a))`.
pub fn boltzmann(theta: &[f64], s: &[f64]) -> [f64; 2] {
    let e0 = (-dot(theta, &g(s, 0.0))).exp();
    let e1 = (-dot(theta, &g(s, 1.0))).exp();
    [e0 / (e0 + e1), e1 / (e0 + e1)]
}

/// The weighted actor objective evaluated term by term:
/// `(1/T) Σᵢ uᵢ Σₐ π(a|sᵢ) x(sᵢ,a)ᵀw − λ θᵀ[(1/T) Σᵢ uᵢ g(sᵢ)g(sᵢ)ᵀ]θ`.
pub fn actor_objective_oracle(
    theta: &[f64],
    data: &Trajectory,
    u: &[f64],
    w: &[f64],
    lambda: f64,
) -> f64 {
    let t = data.len() as f64;
    let mut value = 0.0;
    let mut penalty = 0.0;
    for (tuple, &ui) in data.tuples.iter().zip(u) {
        if ui == 0.0 {
            continue;
        }
        let s = &tuple.state;
        let pi = boltzmann(theta, s);
        let q0 = dot(reward_feature(s, Action::Zero).as_slice(), w);
        let q1 = dot(reward_feature(s, Action::One).as_slice(), w);
        value += ui * (pi[0] * q0 + pi[1] * q1);
        let gs: Vec<f64> = g(s, 1.0)
            .iter()
            .zip(g(s, 0.0))
            .map(|(a, b)| a - b)
            .collect();
        penalty += ui * dot(theta, &gs).powi(2);
    }
    value / t - lambda * penalty / t
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// A trajectory with Gaussian states, fair-coin actions and rewards
/// `x(s,a)ᵀw* + noise`, where the noise is uniform on `[-amp, amp]`.
pub fn linear_trajectory<R: Rng + ?Sized>(
    rng: &mut R,
    t: usize,
    p: usize,
    w_star: &[f64],
    amp: f64,
) -> Trajectory {
    let tuples: Vec<Tuple> = (0..t)
        .map(|_| {
            let state: Vec<f64> = (0..p).map(|_| normal(rng)).collect();
            let action = Action::from_bool(rng.random_bool(0.5));
            let clean = dot(reward_feature(&state, action).as_slice(), w_star);
            let reward = clean + amp * rng.random_range(-1.0..=1.0);
            Tuple {
                state,
                action,
                reward,
            }
        })
        .collect();
    Trajectory {
        outlier_mask: vec![false; t],
        tuples,
    }
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}
