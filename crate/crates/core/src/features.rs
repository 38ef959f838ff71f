//! Feature maps and the two-action Boltzmann policy.
//!
//! * reward feature `x(s, a) = [1, sᵀ, a, a·sᵀ]ᵀ`, dimension `2p + 2`
//! * policy feature `g(s, a) = [a·sᵀ, a]ᵀ`, dimension `p + 1`
//! * `π_θ(a | s) ∝ exp(-θᵀ g(s, a))`

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Binary intervention decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Action {
    Zero,
    One,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Zero, Action::One];

    pub fn as_f64(self) -> f64 {
        match self {
            Action::Zero => 0.0,
            Action::One => 1.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_bool(one: bool) -> Self {
        if one {
            Action::One
        } else {
            Action::Zero
        }
    }
}

impl From<Action> for u8 {
    fn from(a: Action) -> u8 {
        a as u8
    }
}

impl TryFrom<u8> for Action {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Action::Zero),
            1 => Ok(Action::One),
            other => Err(format!("action must be 0 or 1, got {other}")),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

pub fn reward_dim(p: usize) -> usize {
    2 * p + 2
}

pub fn policy_dim(p: usize) -> usize {
    p + 1
}

pub fn reward_feature(s: &[f64], a: Action) -> DVector<f64> {
    let p = s.len();
    let av = a.as_f64();
    let mut x = DVector::zeros(reward_dim(p));
    x[0] = 1.0;
    x.rows_mut(1, p).copy_from_slice(s);
    x[p + 1] = av;
    for (j, &sj) in s.iter().enumerate() {
        x[p + 2 + j] = av * sj;
    }
    x
}

pub fn policy_feature(s: &[f64], a: Action) -> DVector<f64> {
    let p = s.len();
    let av = a.as_f64();
    let mut g = DVector::zeros(policy_dim(p));
    for (j, &sj) in s.iter().enumerate() {
        g[j] = av * sj;
    }
    g[p] = av;
    g
}

/// `g(s, 1) - g(s, 0) = [sᵀ, 1]ᵀ`.
pub fn policy_diff_feature(s: &[f64]) -> DVector<f64> {
    let p = s.len();
    let mut g = DVector::zeros(policy_dim(p));
    g.rows_mut(0, p).copy_from_slice(s);
    g[p] = 1.0;
    g
}

/// Boltzmann policy coefficients θ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub theta: Vec<f64>,
}

impl PolicyParams {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            theta: vec![0.0; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|t| t.is_finite())
    }

    /// Energy `θᵀ g(s, a)`.
    pub fn energy(&self, s: &[f64], a: Action) -> f64 {
        match a {
            Action::Zero => 0.0,
            Action::One => {
                let p = s.len();
                debug_assert_eq!(self.theta.len(), p + 1);
                s.iter().zip(&self.theta).map(|(x, t)| x * t).sum::<f64>() + self.theta[p]
            }
        }
    }

    /// `π_θ(1 | s)`.
    pub fn prob_one(&self, s: &[f64]) -> f64 {
        logistic_prob_one(self.energy(s, Action::One))
    }
}

/// `π(1)` for a binary Boltzmann policy whose action-1 energy is `e1`
/// (action 0 has energy zero). Max-subtracted so it never overflows.
pub(crate) fn logistic_prob_one(e1: f64) -> f64 {
    // logits are -e0 = 0 and -e1
    let l1 = -e1;
    let m = l1.max(0.0);
    let w0 = (-m).exp();
    let w1 = (l1 - m).exp();
    w1 / (w0 + w1)
}

pub fn policy_prob(theta: &PolicyParams, s: &[f64], a: Action) -> f64 {
    let p1 = theta.prob_one(s);
    match a {
        Action::One => p1,
        Action::Zero => {
            // computed directly rather than as 1 - p1 to keep precision when p1 ≈ 1
            logistic_prob_one(-theta.energy(s, Action::One))
        }
    }
}

/// Score `∂ log π_θ(a | s) / ∂θ = -g(s, a) + Σ_a' π_θ(a' | s) g(s, a')`.
pub fn log_prob_gradient(theta: &PolicyParams, s: &[f64], a: Action) -> DVector<f64> {
    let mean_g = policy_feature(s, Action::One) * theta.prob_one(s);
    mean_g - policy_feature(s, a)
}
