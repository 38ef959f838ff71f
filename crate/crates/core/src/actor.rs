//! Weighted actor objective and its maximization.
//!
//! ```text
//! Ĵ(θ) = (1/T) Σᵢ uᵢ Σₐ π_θ(a|sᵢ) x(sᵢ,a)ᵀw  -  λ θᵀ [(1/T) Σᵢ uᵢ g(sᵢ) g(sᵢ)ᵀ] θ
//! ```
//!
//! with `g(s) = g(s,1) - g(s,0)`. Tuples with `uᵢ = 0` are dropped before
//! anything is computed from them, so their contents cannot influence the
//! result. With all weights one this is the unweighted objective used by the
//! uncapped baseline.

use crate::critic::{fit_critic, CriticConfig, CriticFit};
use crate::envsim::Trajectory;
use crate::error::{check_len, Error, Result};
use crate::features::{
    logistic_prob_one, policy_diff_feature, reward_dim, reward_feature, Action, PolicyParams,
};
use crate::optim::{minimize, BfgsOptions};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActorConfig {
    pub lambda: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Starting θ; `None` starts from the uniform policy θ = 0.
    pub theta_init: Option<Vec<f64>>,
}

impl Default for ActorConfig {
    fn default() -> Self {
        Self {
            lambda: 0.001,
            max_iters: 200,
            grad_tol: 1e-8,
            theta_init: None,
        }
    }
}

impl ActorConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config(format!(
                "lambda: must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::config("actor_max_iters: must be positive"));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol > 0.0) {
            return Err(Error::config("grad_tol: must be > 0"));
        }
        Ok(())
    }
}

/// One weighted tuple as the actor sees it.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorSample {
    pub weight: f64,
    /// Critic value of action 0, `x(s,0)ᵀw`.
    pub base: f64,
    /// `x(s,1)ᵀw - x(s,0)ᵀw`.
    pub advantage: f64,
    /// `g(s)`.
    pub diff_feature: DVector<f64>,
}

/// The actor objective reduced to what it depends on.
#[derive(Clone, Debug)]
pub struct ActorProblem {
    samples: Vec<ActorSample>,
    /// Normalizer T (all tuples, including zero-weight ones).
    total: usize,
    lambda: f64,
    /// `(1/T) Σ uᵢ g(sᵢ) g(sᵢ)ᵀ`.
    gram: DMatrix<f64>,
}

impl ActorProblem {
    /// Builds the problem from explicit samples; zero-weight samples are
    /// discarded.
    pub fn from_samples(
        samples: Vec<ActorSample>,
        total: usize,
        m: usize,
        lambda: f64,
    ) -> Result<Self> {
        let samples: Vec<ActorSample> = samples.into_iter().filter(|s| s.weight != 0.0).collect();
        let mut gram = DMatrix::zeros(m, m);
        for s in &samples {
            check_len("policy feature", m, s.diff_feature.len())?;
            gram.ger(s.weight, &s.diff_feature, &s.diff_feature, 1.0);
        }
        if total > 0 {
            gram /= total as f64;
        }
        Ok(Self {
            samples,
            total,
            lambda,
            gram,
        })
    }

    pub fn from_trajectory(
        data: &Trajectory,
        weights: &[f64],
        w: &[f64],
        lambda: f64,
    ) -> Result<Self> {
        let n = data.len();
        check_len("weights", n, weights.len())?;
        let p = data
            .state_dim()
            .unwrap_or_else(|| w.len().saturating_sub(2) / 2);
        check_len("critic coefficients", reward_dim(p), w.len())?;
        let wv = DVector::from_column_slice(w);
        let mut samples = Vec::with_capacity(n);
        for (t, &u) in data.tuples.iter().zip(weights) {
            if u == 0.0 {
                continue;
            }
            check_len("state", p, t.state.len())?;
            let v0 = reward_feature(&t.state, Action::Zero).dot(&wv);
            let v1 = reward_feature(&t.state, Action::One).dot(&wv);
            samples.push(ActorSample {
                weight: u,
                base: v0,
                advantage: v1 - v0,
                diff_feature: policy_diff_feature(&t.state),
            });
        }
        Self::from_samples(samples, n, p + 1, lambda)
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn objective(&self, theta: &DVector<f64>) -> f64 {
        self.value_and_gradient(theta).0
    }

    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.value_and_gradient(theta).1
    }

    pub fn value_and_gradient(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let m = self.dim();
        let mut value = 0.0;
        let mut grad = DVector::zeros(m);
        for s in &self.samples {
            let p1 = logistic_prob_one(theta.dot(&s.diff_feature));
            value += s.weight * (s.base + p1 * s.advantage);
            // ∂π(1)/∂θ = -π(1)π(0) g(s); ∂π(0)/∂θ is its negative
            grad.axpy(
                -s.weight * s.advantage * p1 * (1.0 - p1),
                &s.diff_feature,
                1.0,
            );
        }
        if self.total > 0 {
            let inv_t = 1.0 / self.total as f64;
            value *= inv_t;
            grad *= inv_t;
        }
        let g_theta = &self.gram * theta;
        value -= self.lambda * theta.dot(&g_theta);
        grad.axpy(-2.0 * self.lambda, &g_theta, 1.0);
        (value, grad)
    }
}

pub fn actor_objective(
    theta: &PolicyParams,
    data: &Trajectory,
    weights: &[f64],
    w: &[f64],
    lambda: f64,
) -> Result<f64> {
    let problem = ActorProblem::from_trajectory(data, weights, w, lambda)?;
    check_len("theta", problem.dim(), theta.dim())?;
    Ok(problem.objective(&theta.as_vector()))
}

pub fn actor_gradient(
    theta: &PolicyParams,
    data: &Trajectory,
    weights: &[f64],
    w: &[f64],
    lambda: f64,
) -> Result<DVector<f64>> {
    let problem = ActorProblem::from_trajectory(data, weights, w, lambda)?;
    check_len("theta", problem.dim(), theta.dim())?;
    Ok(problem.gradient(&theta.as_vector()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActorFit {
    pub params: PolicyParams,
    pub objective: f64,
    /// `‖∇Ĵ‖∞` at the returned θ.
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Maximizes Ĵ by BFGS on `-Ĵ`.
pub fn maximize(problem: &ActorProblem, cfg: &ActorConfig) -> Result<ActorFit> {
    cfg.validate().map_err(|e| match e {
        Error::ConfigParse(m) => Error::InvalidParameter(m),
        other => other,
    })?;
    let m = problem.dim();
    let x0 = match &cfg.theta_init {
        Some(t) => {
            check_len("theta_init", m, t.len())?;
            DVector::from_column_slice(t)
        }
        None => DVector::zeros(m),
    };
    let opts = BfgsOptions {
        max_iters: cfg.max_iters,
        grad_tol: cfg.grad_tol,
        ..BfgsOptions::default()
    };
    let out = minimize(
        |theta| {
            let (v, g) = problem.value_and_gradient(theta);
            (-v, -g)
        },
        x0,
        &opts,
    )?;
    let params = PolicyParams::new(out.x.as_slice().to_vec());
    if !params.is_finite() || !out.value.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    Ok(ActorFit {
        params,
        objective: -out.value,
        grad_norm: out.grad.amax(),
        iters: out.iters,
        converged: out.converged(),
    })
}

pub fn fit_actor(
    data: &Trajectory,
    weights: &[f64],
    w: &[f64],
    cfg: &ActorConfig,
) -> Result<ActorFit> {
    let problem = ActorProblem::from_trajectory(data, weights, w, cfg.lambda)?;
    maximize(&problem, cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActorCriticFit {
    pub critic: CriticFit,
    pub actor: ActorFit,
}

/// Critic then actor on a batch of logged tuples. The critic does not
/// depend on θ, so one pass is already the fixed point of alternating the
/// two updates.
pub fn fit_actor_critic(
    data: &Trajectory,
    critic: &CriticConfig,
    actor: &ActorConfig,
) -> Result<ActorCriticFit> {
    let critic_fit = fit_critic(data, critic)?;
    let actor_fit = fit_actor(data, &critic_fit.weights, &critic_fit.w, actor)?;
    Ok(ActorCriticFit {
        critic: critic_fit,
        actor: actor_fit,
    })
}
