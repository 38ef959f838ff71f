//! Micro-randomized trial simulator and outlier contamination.
//!
//! State transition (`t ≥ 1`, ξ ~ N(0, σ_s²) per coordinate):
//!
//! ```text
//! S[t,1] = β1 S[t-1,1]                                  + ξ1
//! S[t,2] = β2 S[t-1,2] + β3 A[t-1]                      + ξ2
//! S[t,3] = β4 S[t-1,3] + β5 S[t-1,3] A[t-1] + β6 A[t-1] + ξ3
//! S[t,j] = β7 S[t-1,j]                                  + ξj   (j ≥ 4)
//! ```
//!
//! Reward (ϱ ~ N(0, σ_r²)):
//!
//! ```text
//! R[t] = β14 [β8 + A[t] (β9 + β10 S[t,1] + β11 S[t,2]) + β12 S[t,1] - β13 S[t,3] + ϱ]
//! ```

use crate::error::{Error, Result};
use crate::features::Action;
use crate::linalg::psd_factor;
use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

pub const REFERENCE_BETA: [f64; 14] = [
    0.4, 0.3, 0.4, 0.7, 0.05, 0.6, 0.25, 3.0, 0.25, 0.25, 0.4, 0.1, 0.5, 500.0,
];

const PSD_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub beta: Vec<f64>,
    pub p: usize,
    pub sigma_s: f64,
    pub sigma_r: f64,
    /// Initial-state covariance Σ, row major.
    pub init_cov: Vec<Vec<f64>>,
    #[serde(rename = "horizon_T")]
    pub horizon_t: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::with_dim(3)
    }
}

impl SimConfig {
    /// Reference coefficients and noise levels with `p` state variables and Σ = I.
    pub fn with_dim(p: usize) -> Self {
        Self {
            beta: REFERENCE_BETA.to_vec(),
            p,
            sigma_s: 1.0,
            sigma_r: 3.0,
            init_cov: identity_rows(p),
            horizon_t: 210,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.len() != 14 {
            return Err(Error::config(format!(
                "beta: expected 14 coefficients, got {}",
                self.beta.len()
            )));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::config("beta: coefficients must be finite"));
        }
        if self.p < 3 {
            return Err(Error::config(format!(
                "p: must be at least 3, got {}",
                self.p
            )));
        }
        if !(self.sigma_s.is_finite() && self.sigma_s >= 0.0) {
            return Err(Error::config("sigma_s: must be finite and >= 0"));
        }
        if !(self.sigma_r.is_finite() && self.sigma_r >= 0.0) {
            return Err(Error::config("sigma_r: must be finite and >= 0"));
        }
        if self.init_cov.len() != self.p || self.init_cov.iter().any(|row| row.len() != self.p) {
            return Err(Error::config(format!(
                "init_cov: expected a {p}x{p} matrix",
                p = self.p
            )));
        }
        if self.cov_factor().is_none() {
            return Err(Error::config(
                "init_cov: must be symmetric positive semidefinite",
            ));
        }
        Ok(())
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.p, |i, j| self.init_cov[i][j])
    }

    fn cov_factor(&self) -> Option<DMatrix<f64>> {
        psd_factor(&self.cov_matrix(), PSD_TOL)
    }

    fn b(&self, i: usize) -> f64 {
        self.beta[i - 1]
    }
}

pub(crate) fn identity_rows(p: usize) -> Vec<Vec<f64>> {
    (0..p)
        .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tuple {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub tuples: Vec<Tuple>,
    /// True where contamination was applied. Learners must never read it.
    pub outlier_mask: Vec<bool>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// State dimension, or `None` for an empty trajectory.
    pub fn state_dim(&self) -> Option<usize> {
        self.tuples.first().map(|t| t.state.len())
    }

    pub fn rewards(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.tuples.iter().map(|t| t.reward))
    }

    pub fn mean_reward(&self) -> f64 {
        if self.is_empty() {
            return f64::NAN;
        }
        self.tuples.iter().map(|t| t.reward).sum::<f64>() / self.len() as f64
    }

    /// Writes `t,s1..sp,a,r,outlier`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let p = self.state_dim().unwrap_or(0);
        let mut header = vec!["t".to_string()];
        header.extend((1..=p).map(|j| format!("s{j}")));
        header.extend(["a", "r", "outlier"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for (t, (tuple, &flag)) in self.tuples.iter().zip(&self.outlier_mask).enumerate() {
            write!(out, "{t}")?;
            for s in &tuple.state {
                write!(out, ",{s}")?;
            }
            writeln!(out, ",{},{},{}", tuple.action, tuple.reward, u8::from(flag))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = match lines.next() {
            Some(line) => line.map_err(|e| Error::config(format!("csv: {e}")))?,
            None => return Err(Error::config("csv: missing header")),
        };
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 4 || cols[0] != "t" || cols[cols.len() - 3..] != ["a", "r", "outlier"] {
            return Err(Error::config(format!("csv: unexpected header `{header}`")));
        }
        let p = cols.len() - 4;
        let mut traj = Trajectory::default();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::config(format!("csv: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::config(format!(
                    "csv line {}: expected {} fields, got {}",
                    lineno + 2,
                    cols.len(),
                    fields.len()
                )));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| Error::config(format!("csv line {}: `{s}`: {e}", lineno + 2)))
            };
            let state = fields[1..=p]
                .iter()
                .map(|s| num(s))
                .collect::<Result<Vec<_>>>()?;
            let action = match fields[p + 1] {
                "0" => Action::Zero,
                "1" => Action::One,
                other => {
                    return Err(Error::config(format!(
                        "csv line {}: action `{other}` is not 0/1",
                        lineno + 2
                    )))
                }
            };
            let reward = num(fields[p + 2])?;
            let flag = match fields[p + 3] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::config(format!(
                        "csv line {}: outlier flag `{other}` is not 0/1",
                        lineno + 2
                    )))
                }
            };
            traj.tuples.push(Tuple {
                state,
                action,
                reward,
            });
            traj.outlier_mask.push(flag);
        }
        Ok(traj)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierConfig {
    pub psi: f64,
    pub nu: f64,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        Self { psi: 0.04, nu: 5.0 }
    }
}

impl OutlierConfig {
    pub fn clean() -> Self {
        Self { psi: 0.0, nu: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.psi) {
            return Err(Error::config(format!(
                "psi: must be in [0, 1], got {}",
                self.psi
            )));
        }
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return Err(Error::config(format!(
                "nu: must be finite and >= 0, got {}",
                self.nu
            )));
        }
        Ok(())
    }

    /// Number of contaminated tuples in a length-`t` trajectory.
    pub fn count(&self, t: usize) -> usize {
        ((self.psi * t as f64 + 1e-9).floor() as usize).min(t)
    }
}

/// Draws `S0 ~ N_p(0, Σ)`.
///
/// # Panics
/// If `cfg.init_cov` is not a symmetric PSD `p × p` matrix; run
/// [`SimConfig::validate`] first.
pub fn init_state<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Vec<f64> {
    let factor = cfg
        .cov_factor()
        .expect("init_cov must be symmetric PSD (SimConfig::validate)");
    let z = DVector::from_iterator(
        cfg.p,
        (0..cfg.p).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    (factor * z).as_slice().to_vec()
}

/// Next state from `(prev_state, prev_action)`.
pub fn transition<R: Rng + ?Sized>(
    cfg: &SimConfig,
    prev_state: &[f64],
    prev_action: Action,
    rng: &mut R,
) -> Vec<f64> {
    let a = prev_action.as_f64();
    let s = prev_state;
    let mut next = Vec::with_capacity(cfg.p);
    for j in 0..cfg.p {
        let xi = cfg.sigma_s * rng.sample::<f64, _>(StandardNormal);
        let mean = match j {
            0 => cfg.b(1) * s[0],
            1 => cfg.b(2) * s[1] + cfg.b(3) * a,
            2 => cfg.b(4) * s[2] + cfg.b(5) * s[2] * a + cfg.b(6) * a,
            _ => cfg.b(7) * s[j],
        };
        next.push(mean + xi);
    }
    next
}

/// Immediate reward for taking `action` in `state`.
pub fn reward<R: Rng + ?Sized>(cfg: &SimConfig, state: &[f64], action: Action, rng: &mut R) -> f64 {
    let noise = cfg.sigma_r * rng.sample::<f64, _>(StandardNormal);
    cfg.b(14) * (expected_inner(cfg, state, action) + noise)
}

/// Noise-free expected reward `E[R | s, a]`.
pub fn expected_reward(cfg: &SimConfig, state: &[f64], action: Action) -> f64 {
    cfg.b(14) * expected_inner(cfg, state, action)
}

fn expected_inner(cfg: &SimConfig, s: &[f64], action: Action) -> f64 {
    let a = action.as_f64();
    cfg.b(8) + a * (cfg.b(9) + cfg.b(10) * s[0] + cfg.b(11) * s[1]) + cfg.b(12) * s[0]
        - cfg.b(13) * s[2]
}

/// One simulator step: transition with the previous action, then the reward
/// of the current action in the new state.
pub fn step<R: Rng + ?Sized>(
    cfg: &SimConfig,
    prev_state: &[f64],
    prev_action: Action,
    action: Action,
    rng: &mut R,
) -> (Vec<f64>, f64) {
    let state = transition(cfg, prev_state, prev_action, rng);
    let r = reward(cfg, &state, action, rng);
    (state, r)
}

/// Rolls out `horizon` tuples where actions come from `policy`.
pub fn rollout<R, P>(cfg: &SimConfig, horizon: usize, mut policy: P, rng: &mut R) -> Trajectory
where
    R: Rng + ?Sized,
    P: FnMut(&[f64], &mut R) -> Action,
{
    let mut traj = Trajectory {
        tuples: Vec::with_capacity(horizon),
        outlier_mask: vec![false; horizon],
    };
    if horizon == 0 {
        return traj;
    }
    let mut state = init_state(cfg, rng);
    let mut action = policy(&state, rng);
    let r = reward(cfg, &state, action, rng);
    traj.tuples.push(Tuple {
        state: state.clone(),
        action,
        reward: r,
    });
    for _ in 1..horizon {
        state = transition(cfg, &state, action, rng);
        action = policy(&state, rng);
        let r = reward(cfg, &state, action, rng);
        traj.tuples.push(Tuple {
            state: state.clone(),
            action,
            reward: r,
        });
    }
    traj
}

/// Micro-randomized trial: every action is an independent fair coin.
pub fn generate_trajectory<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Trajectory {
    rollout(
        cfg,
        cfg.horizon_t,
        |_, rng| Action::from_bool(rng.random_bool(0.5)),
        rng,
    )
}

/// Contaminates `floor(ψ T)` uniformly chosen tuples: each gets
/// `ν · mean|r|` added to its reward, `ν · mean|s_j|` added to every state
/// coordinate (means taken over the clean input) and a fresh fair-coin
/// action.
pub fn inject_outliers<R: Rng + ?Sized>(
    traj: &Trajectory,
    oc: &OutlierConfig,
    rng: &mut R,
) -> Trajectory {
    let mut out = traj.clone();
    let n = traj.len();
    let k = oc.count(n);
    if k == 0 {
        return out;
    }
    let p = traj.state_dim().unwrap_or(0);
    let nf = n as f64;
    let reward_shift = oc.nu * traj.tuples.iter().map(|t| t.reward.abs()).sum::<f64>() / nf;
    let state_shift: Vec<f64> = (0..p)
        .map(|j| oc.nu * traj.tuples.iter().map(|t| t.state[j].abs()).sum::<f64>() / nf)
        .collect();

    let mut chosen = index::sample(rng, n, k).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        let tuple = &mut out.tuples[i];
        tuple.reward += reward_shift;
        for (s, d) in tuple.state.iter_mut().zip(&state_shift) {
            *s += d;
        }
        tuple.action = Action::from_bool(rng.random_bool(0.5));
        out.outlier_mask[i] = true;
    }
    out
}
