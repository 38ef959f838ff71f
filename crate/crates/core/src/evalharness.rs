//! Long-run average reward evaluation and the outlier sweeps.
//!
//! For each user a clean micro-randomized training trajectory is drawn,
//! contaminated, and handed to every method; each learned policy is then
//! rolled out on clean dynamics and scored by the mean reward over the tail
//! of the rollout. Per-user scores are averaged into the ElrAR.

use crate::actor::{fit_actor_critic, ActorConfig};
use crate::baselines::{LinUcbPolicy, LinUcbState};
use crate::critic::CriticConfig;
use crate::envsim::{
    generate_trajectory, inject_outliers, rollout, OutlierConfig, SimConfig, Trajectory,
};
use crate::error::{Error, Result};
use crate::features::{Action, PolicyParams};
use crate::rng::{stream_rng, Purpose};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::{self, Write as _};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub eval_horizon: usize,
    pub tail: usize,
    pub n_users: usize,
    pub base_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            eval_horizon: 5000,
            tail: 4000,
            n_users: 50,
            base_seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eval_horizon == 0 {
            return Err(Error::config("eval_horizon: must be positive"));
        }
        if self.tail == 0 || self.tail > self.eval_horizon {
            return Err(Error::config(format!(
                "tail: must be in 1..={}, got {}",
                self.eval_horizon, self.tail
            )));
        }
        if self.n_users == 0 {
            return Err(Error::config("n_users: must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "Lin-UCB")]
    LinUcb,
    #[serde(rename = "S-ACCB")]
    SAccb,
    #[serde(rename = "RS-ACCB")]
    RsAccb,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::LinUcb, Method::SAccb, Method::RsAccb];

    pub fn name(self) -> &'static str {
        match self {
            Method::LinUcb => "Lin-UCB",
            Method::SAccb => "S-ACCB",
            Method::RsAccb => "RS-ACCB",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown method `{s}`")))
    }
}

/// Learner hyperparameters shared by every cell of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Capped critic settings for RS-ACCB; S-ACCB reuses `zeta` uncapped.
    pub critic: CriticConfig,
    pub actor: ActorConfig,
    pub alpha_ucb: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            critic: CriticConfig::default(),
            actor: ActorConfig::default(),
            alpha_ucb: 1.0,
        }
    }
}

/// A learned decision rule ready for evaluation.
#[derive(Clone, Debug)]
pub enum Policy {
    Boltzmann(PolicyParams),
    LinUcb(LinUcbPolicy),
    Fixed(Action),
}

impl Policy {
    /// Chooses an action given one uniform draw `u ∈ [0, 1)`. Every policy
    /// consumes exactly one draw per decision so rollouts of different
    /// policies stay aligned on the same noise.
    pub fn decide(&self, s: &[f64], u: f64) -> Action {
        match self {
            Policy::Boltzmann(theta) => Action::from_bool(u < theta.prob_one(s)),
            Policy::LinUcb(rule) => rule.select(s),
            Policy::Fixed(a) => *a,
        }
    }
}

/// η: mean reward over the last `tail` tuples of a clean rollout of
/// `eval_horizon` tuples under `policy`.
pub fn average_reward<R: Rng + ?Sized>(
    policy: &Policy,
    cfg: &SimConfig,
    ec: &EvalConfig,
    rng: &mut R,
) -> f64 {
    let traj = rollout(
        cfg,
        ec.eval_horizon,
        |s, rng| {
            let u: f64 = rng.random();
            policy.decide(s, u)
        },
        rng,
    );
    let tail = ec.tail.min(traj.len());
    let start = traj.len() - tail;
    traj.tuples[start..].iter().map(|t| t.reward).sum::<f64>() / tail as f64
}

/// Mean and sample standard deviation (N - 1 denominator).
pub fn elrar(per_user: &[f64]) -> Result<(f64, f64)> {
    let n = per_user.len();
    if n < 2 {
        return Err(Error::InsufficientUsers(n));
    }
    let mean = per_user.iter().sum::<f64>() / n as f64;
    let ss = per_user.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Ok((mean, (ss / (n as f64 - 1.0)).sqrt()))
}

/// Trains `method` on one (possibly contaminated) trajectory.
pub fn train(
    method: Method,
    data: &Trajectory,
    p: usize,
    learners: &LearnerConfig,
) -> Result<Policy> {
    match method {
        Method::LinUcb => Ok(Policy::LinUcb(LinUcbPolicy::new(&LinUcbState::train(
            data,
            p,
            learners.alpha_ucb,
        )))),
        Method::SAccb => {
            let fit = fit_actor_critic(
                data,
                &CriticConfig::uncapped(learners.critic.zeta),
                &learners.actor,
            )?;
            Ok(Policy::Boltzmann(fit.actor.params))
        }
        Method::RsAccb => {
            let critic = CriticConfig {
                capped: true,
                ..learners.critic
            };
            let fit = fit_actor_critic(data, &critic, &learners.actor)?;
            Ok(Policy::Boltzmann(fit.actor.params))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserFailure {
    pub user: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    /// η per user; `None` where training failed.
    pub etas: Vec<Option<f64>>,
    pub failures: Vec<UserFailure>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl MethodResult {
    fn from_etas(method: Method, cells: Vec<Result<f64>>) -> Self {
        let mut etas = Vec::with_capacity(cells.len());
        let mut failures = Vec::new();
        for (user, cell) in cells.into_iter().enumerate() {
            match cell {
                Ok(v) => etas.push(Some(v)),
                Err(e) => {
                    etas.push(None);
                    failures.push(UserFailure {
                        user,
                        error: e.to_string(),
                    });
                }
            }
        }
        let ok: Vec<f64> = etas.iter().flatten().copied().collect();
        let (mean, std) = match elrar(&ok) {
            Ok((m, s)) => (Some(m), Some(s)),
            Err(_) if ok.len() == 1 => (Some(ok[0]), None),
            Err(_) => (None, None),
        };
        Self {
            method,
            etas,
            failures,
            mean,
            std,
        }
    }

    pub fn n_users(&self) -> usize {
        self.etas.iter().flatten().count()
    }

    pub fn successful_etas(&self) -> Vec<f64> {
        self.etas.iter().flatten().copied().collect()
    }
}

/// The contaminated training trajectory user `user` trains on in a sweep.
pub fn training_data(
    user: usize,
    oc: &OutlierConfig,
    cfg: &SimConfig,
    base_seed: u64,
) -> Trajectory {
    let clean = generate_trajectory(cfg, &mut stream_rng(base_seed, user, Purpose::Train));
    inject_outliers(
        &clean,
        oc,
        &mut stream_rng(base_seed, user, Purpose::Contaminate),
    )
}

/// Scores every method for one user under one contamination setting.
/// All methods see the same training trajectory and the same evaluation
/// noise.
pub fn run_user(
    user: usize,
    methods: &[Method],
    oc: &OutlierConfig,
    cfg: &SimConfig,
    ec: &EvalConfig,
    learners: &LearnerConfig,
) -> Vec<Result<f64>> {
    let data = training_data(user, oc, cfg, ec.base_seed);
    methods
        .iter()
        .map(|&method| {
            let policy = train(method, &data, cfg.p, learners)?;
            let mut rng = stream_rng(ec.base_seed, user, Purpose::Evaluate);
            Ok(average_reward(&policy, cfg, ec, &mut rng))
        })
        .collect()
}

/// Runs every user for the given methods; results come back in `methods`
/// order with users indexed from zero regardless of scheduling.
pub fn run_condition_all(
    methods: &[Method],
    oc: &OutlierConfig,
    cfg: &SimConfig,
    ec: &EvalConfig,
    learners: &LearnerConfig,
) -> Vec<MethodResult> {
    let per_user: Vec<Vec<Result<f64>>> = (0..ec.n_users)
        .into_par_iter()
        .map(|user| run_user(user, methods, oc, cfg, ec, learners))
        .collect();
    let mut columns: Vec<Vec<Result<f64>>> = vec![Vec::with_capacity(ec.n_users); methods.len()];
    for row in per_user {
        for (col, cell) in columns.iter_mut().zip(row) {
            col.push(cell);
        }
    }
    methods
        .iter()
        .zip(columns)
        .map(|(&m, cells)| MethodResult::from_etas(m, cells))
        .collect()
}

pub fn run_condition(
    method: Method,
    oc: &OutlierConfig,
    cfg: &SimConfig,
    ec: &EvalConfig,
    learners: &LearnerConfig,
) -> MethodResult {
    run_condition_all(&[method], oc, cfg, ec, learners)
        .pop()
        .expect("one method in, one result out")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    /// Vary the contaminated fraction ψ at fixed strength ν.
    S1,
    /// Vary the strength ν at fixed fraction ψ.
    S2,
}

impl Setting {
    pub fn axis_name(self) -> &'static str {
        match self {
            Setting::S1 => "psi",
            Setting::S2 => "nu",
        }
    }

    pub fn default_axis(self) -> Vec<f64> {
        match self {
            Setting::S1 => vec![0.0, 0.01, 0.03, 0.05, 0.07, 0.09],
            Setting::S2 => vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
        }
    }

    pub fn file_stem(self) -> &'static str {
        match self {
            Setting::S1 => "s1",
            Setting::S2 => "s2",
        }
    }

    fn outliers(self, axis_value: f64, fixed: f64) -> OutlierConfig {
        match self {
            Setting::S1 => OutlierConfig {
                psi: axis_value,
                nu: fixed,
            },
            Setting::S2 => OutlierConfig {
                psi: fixed,
                nu: axis_value,
            },
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::S1 => "S1",
            Setting::S2 => "S2",
        })
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S1" | "s1" => Ok(Setting::S1),
            "S2" | "s2" => Ok(Setting::S2),
            other => Err(Error::config(format!("unknown setting `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub axis_value: f64,
    pub outliers: OutlierConfig,
    pub results: Vec<MethodResult>,
}

impl ConditionRow {
    pub fn result(&self, method: Method) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.method == method)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub base_seed: u64,
    /// The contamination parameter held fixed along the axis.
    pub fixed_value: f64,
    pub sim: SimConfig,
    pub eval: EvalConfig,
    pub learners: LearnerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub setting: Setting,
    pub axis: String,
    pub rows: Vec<ConditionRow>,
    pub metadata: ReportMetadata,
}

pub fn run_sweep(
    setting: Setting,
    axis: &[f64],
    fixed: f64,
    cfg: &SimConfig,
    ec: &EvalConfig,
    learners: &LearnerConfig,
) -> ExperimentReport {
    let rows = axis
        .iter()
        .map(|&v| {
            let oc = setting.outliers(v, fixed);
            ConditionRow {
                axis_value: v,
                outliers: oc,
                results: run_condition_all(&Method::ALL, &oc, cfg, ec, learners),
            }
        })
        .collect();
    ExperimentReport {
        setting,
        axis: setting.axis_name().to_string(),
        rows,
        metadata: ReportMetadata {
            base_seed: ec.base_seed,
            fixed_value: fixed,
            sim: cfg.clone(),
            eval: *ec,
            learners: learners.clone(),
        },
    }
}

/// Varies ψ at fixed `nu`.
pub fn run_sweep_s1(
    psis: &[f64],
    nu: f64,
    cfg: &SimConfig,
    ec: &EvalConfig,
    learners: &LearnerConfig,
) -> ExperimentReport {
    run_sweep(Setting::S1, psis, nu, cfg, ec, learners)
}

/// Varies ν at fixed `psi`.
pub fn run_sweep_s2(
    nus: &[f64],
    psi: f64,
    cfg: &SimConfig,
    ec: &EvalConfig,
    learners: &LearnerConfig,
) -> ExperimentReport {
    run_sweep(Setting::S2, nus, psi, cfg, ec, learners)
}

/// One line of the summary CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub setting: Setting,
    pub axis_value: f64,
    pub method: Method,
    pub elrar_mean: Option<f64>,
    pub elrar_std: Option<f64>,
    pub n_users: usize,
}

pub const CSV_HEADER: &str = "setting,axis_value,method,elrar_mean,elrar_std,n_users";

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        self.rows
            .iter()
            .flat_map(|row| {
                row.results.iter().map(move |r| CsvRow {
                    setting: self.setting,
                    axis_value: row.axis_value,
                    method: r.method,
                    elrar_mean: r.mean,
                    elrar_std: r.std,
                    n_users: r.n_users(),
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in self.csv_rows() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.setting,
                r.axis_value,
                r.method,
                opt_num(r.elrar_mean),
                opt_num(r.elrar_std),
                r.n_users
            );
        }
        out
    }

    /// Mean column per method over the axis, `None` if any cell is missing.
    pub fn column_average(&self, method: Method) -> Option<f64> {
        let vals: Option<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| r.result(method).and_then(|m| m.mean))
            .collect();
        let vals = vals?;
        if vals.is_empty() {
            return None;
        }
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }

    fn axis_label(&self, v: f64) -> String {
        match self.setting {
            Setting::S1 => format!("{}%", fmt_trim(v * 100.0)),
            Setting::S2 => fmt_trim(v),
        }
    }

    /// Table with one row per axis value, `mean±std` cells and an `Avg` row.
    pub fn to_markdown(&self) -> String {
        let symbol = match self.setting {
            Setting::S1 => "ψ",
            Setting::S2 => "ν",
        };
        let mut out = String::new();
        let _ = write!(out, "| {symbol} |");
        for m in Method::ALL {
            let _ = write!(out, " {m} |");
        }
        out.push('\n');
        out.push_str("|---|");
        for _ in Method::ALL {
            out.push_str("---|");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "| {} |", self.axis_label(row.axis_value));
            for m in Method::ALL {
                let cell = match row.result(m) {
                    Some(MethodResult {
                        mean: Some(mean),
                        std: Some(std),
                        ..
                    }) => format!("{mean:.1}±{std:.2}"),
                    Some(MethodResult {
                        mean: Some(mean), ..
                    }) => format!("{mean:.1}"),
                    _ => "n/a".to_string(),
                };
                let _ = write!(out, " {cell} |");
            }
            out.push('\n');
        }
        out.push_str("| Avg |");
        for m in Method::ALL {
            let cell = self
                .column_average(m)
                .map(|v| format!("{v:.1}"))
                .unwrap_or_else(|| "n/a".into());
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
        out
    }
}

fn fmt_trim(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn parse_opt(field: &str, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|e| Error::config(format!("csv {what}: `{field}`: {e}")))
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(Error::config(format!("csv: unexpected header {other:?}"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::config(format!("csv: expected 6 fields in `{line}`")));
            }
            Ok(CsvRow {
                setting: f[0].parse()?,
                axis_value: f[1]
                    .parse()
                    .map_err(|e| Error::config(format!("csv axis_value `{}`: {e}", f[1])))?,
                method: f[2].parse()?,
                elrar_mean: parse_opt(f[3], "elrar_mean")?,
                elrar_std: parse_opt(f[4], "elrar_std")?,
                n_users: f[5]
                    .parse()
                    .map_err(|e| Error::config(format!("csv n_users `{}`: {e}", f[5])))?,
            })
        })
        .collect()
}

/// A cell of the Markdown table: `(mean, std)` as printed.
pub type MarkdownCell = Option<(f64, Option<f64>)>;

/// Parses the Markdown table back into axis labels and per-method cells
/// (the final `Avg` row included, with no std).
pub fn parse_markdown(text: &str) -> Result<Vec<(String, Vec<MarkdownCell>)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if i < 2 || line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.trim_matches('|').split('|').map(str::trim).collect();
        if cells.len() != Method::ALL.len() + 1 {
            return Err(Error::config(format!("markdown: malformed row `{line}`")));
        }
        let parsed = cells[1..]
            .iter()
            .map(|c| -> Result<MarkdownCell> {
                if *c == "n/a" {
                    return Ok(None);
                }
                let num = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|e| Error::config(format!("markdown cell `{c}`: {e}")))
                };
                match c.split_once('±') {
                    Some((m, s)) => Ok(Some((num(m)?, Some(num(s)?)))),
                    None => Ok(Some((num(c)?, None))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((cells[0].to_string(), parsed));
    }
    Ok(rows)
}
