//! Capped-ℓ2 critic.
//!
//! Minimizes `O(w) = Σᵢ min(‖rᵢ - xᵢᵀw‖², ε) + ζ‖w‖²` by alternating a
//! weighted ridge solve with binary reweighting `uᵢ = 1{residual²ᵢ < ε}`.
//! The cap ε is set once from the squared residuals of the unweighted ridge
//! fit by the boxplot rule `ε = τ (q₃ + 1.5 IQR)` and then held fixed, so
//! every half-step decreases the same objective.

use crate::envsim::Trajectory;
use crate::error::{check_len, Error, Result};
use crate::features::reward_feature;
use crate::linalg::spd_solve;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticConfig {
    pub zeta: f64,
    pub tau: f64,
    pub max_iters: usize,
    /// `false` gives the plain ridge critic.
    pub capped: bool,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            zeta: 0.001,
            tau: 1.0,
            max_iters: 50,
            capped: true,
        }
    }
}

impl CriticConfig {
    pub fn uncapped(zeta: f64) -> Self {
        Self {
            zeta,
            capped: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta.is_finite() && self.zeta > 0.0) {
            return Err(Error::config(format!(
                "zeta: must be > 0, got {}",
                self.zeta
            )));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::config(format!("tau: must be > 0, got {}", self.tau)));
        }
        if self.max_iters == 0 {
            return Err(Error::config("critic_max_iters: must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticFit {
    pub w: Vec<f64>,
    /// Indicator weights, each 0.0 or 1.0.
    pub weights: Vec<f64>,
    /// Cap; `+∞` (serialized as `null`) for the uncapped critic.
    #[serde(serialize_with = "ser_cap", deserialize_with = "de_cap")]
    pub epsilon: f64,
    /// Number of reweighted solves after the initial unweighted one
    /// (zero for the uncapped critic).
    pub iters: usize,
    pub converged: bool,
    /// Capped objective at the initial solve and after each reweighted one.
    pub objective_trace: Vec<f64>,
}

impl CriticFit {
    pub fn w_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.w)
    }

    pub fn n_rejected(&self) -> usize {
        self.weights.iter().filter(|&&u| u == 0.0).count()
    }
}

fn ser_cap<S: Serializer>(eps: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if eps.is_finite() {
        s.serialize_some(eps)
    } else {
        s.serialize_none()
    }
}

fn de_cap<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// `q`-quantile of `sorted` by linear interpolation between order statistics
/// at zero-based position `(n - 1) q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let pos = (n - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Boxplot cap `τ (q₃ + 1.5 (q₃ - q₁))` over squared residuals.
pub fn compute_epsilon(residuals_sq: &[f64], tau: f64) -> Result<f64> {
    if residuals_sq.len() < 4 {
        return Err(Error::InsufficientSamplesForQuantiles(residuals_sq.len()));
    }
    if residuals_sq.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("squared residuals"));
    }
    let mut sorted = residuals_sq.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    Ok(tau * (q3 + 1.5 * (q3 - q1)))
}

/// `u × T` design matrix whose columns are `x(sᵢ, aᵢ)`.
pub fn design_matrix(data: &Trajectory) -> DMatrix<f64> {
    let p = data.state_dim().unwrap_or(0);
    let u = crate::features::reward_dim(p);
    let mut x = DMatrix::zeros(u, data.len());
    for (i, t) in data.tuples.iter().enumerate() {
        x.set_column(i, &reward_feature(&t.state, t.action));
    }
    x
}

/// `(X U Xᵀ + ζ I)⁻¹ X U r`, the minimizer of
/// `Σᵢ uᵢ (rᵢ - xᵢᵀw)² + ζ‖w‖²`.
pub fn weighted_ridge(
    x: &DMatrix<f64>,
    r: &DVector<f64>,
    weights: &[f64],
    zeta: f64,
) -> Result<DVector<f64>> {
    let (u, n) = x.shape();
    check_len("rewards", n, r.len())?;
    check_len("weights", n, weights.len())?;
    if !(zeta.is_finite() && zeta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "zeta must be > 0, got {zeta}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("design matrix"));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("rewards"));
    }
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("weights"));
    }

    let mut gram = DMatrix::<f64>::identity(u, u) * zeta;
    let mut rhs = DVector::<f64>::zeros(u);
    for (i, &ui) in weights.iter().enumerate() {
        if ui == 0.0 {
            continue;
        }
        let xi = x.column(i);
        gram.ger(ui, &xi, &xi, 1.0);
        rhs.axpy(ui * r[i], &xi, 1.0);
    }
    spd_solve(gram, &rhs).ok_or(Error::NonFiniteInput("weighted Gram matrix"))
}

pub fn residuals_sq(x: &DMatrix<f64>, r: &DVector<f64>, w: &DVector<f64>) -> Vec<f64> {
    let pred = x.tr_mul(w);
    r.iter()
        .zip(pred.iter())
        .map(|(ri, pi)| (ri - pi).powi(2))
        .collect()
}

/// `uᵢ = 1` iff the squared residual is strictly below `epsilon`.
pub fn update_weights(
    x: &DMatrix<f64>,
    r: &DVector<f64>,
    w: &DVector<f64>,
    epsilon: f64,
) -> Vec<f64> {
    residuals_sq(x, r, w)
        .into_iter()
        .map(|e| if e < epsilon { 1.0 } else { 0.0 })
        .collect()
}

pub fn capped_objective(
    x: &DMatrix<f64>,
    r: &DVector<f64>,
    w: &DVector<f64>,
    epsilon: f64,
    zeta: f64,
) -> f64 {
    residuals_sq(x, r, w)
        .into_iter()
        .map(|e| e.min(epsilon))
        .sum::<f64>()
        + zeta * w.norm_squared()
}

pub fn fit_critic(data: &Trajectory, cfg: &CriticConfig) -> Result<CriticFit> {
    cfg.validate().map_err(|e| match e {
        Error::ConfigParse(m) => Error::InvalidParameter(m),
        other => other,
    })?;
    let n = data.len();
    if n == 0 {
        return Err(Error::ShapeMismatch {
            what: "trajectory length",
            expected: 1,
            got: 0,
        });
    }
    let x = design_matrix(data);
    let r = data.rewards();
    let ones = vec![1.0; n];
    let w0 = weighted_ridge(&x, &r, &ones, cfg.zeta)?;

    if !cfg.capped {
        let obj = capped_objective(&x, &r, &w0, f64::INFINITY, cfg.zeta);
        return Ok(CriticFit {
            w: w0.as_slice().to_vec(),
            weights: ones,
            epsilon: f64::INFINITY,
            iters: 0,
            converged: true,
            objective_trace: vec![obj],
        });
    }

    let epsilon = compute_epsilon(&residuals_sq(&x, &r, &w0), cfg.tau)?;
    let mut trace = vec![capped_objective(&x, &r, &w0, epsilon, cfg.zeta)];
    let mut weights = update_weights(&x, &r, &w0, epsilon);
    let mut w = w0;
    let mut iters = 0;
    let mut converged = false;
    while iters < cfg.max_iters {
        if weights.iter().all(|&u| u == 0.0) {
            return Err(Error::AllSamplesCapped { epsilon });
        }
        w = weighted_ridge(&x, &r, &weights, cfg.zeta)?;
        iters += 1;
        trace.push(capped_objective(&x, &r, &w, epsilon, cfg.zeta));
        let next = update_weights(&x, &r, &w, epsilon);
        if next == weights {
            converged = true;
            break;
        }
        weights = next;
    }

    Ok(CriticFit {
        w: w.as_slice().to_vec(),
        weights,
        epsilon,
        iters,
        converged,
        objective_trace: trace,
    })
}
