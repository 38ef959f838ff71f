//! `robandit`: run the contamination sweeps, fit a single user, or dump a
//! simulated training trajectory.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use robandit::config::{load_config, parse_config, parse_override, ConfigFile, RunConfig};
use robandit::evalharness::{run_sweep, training_data, Setting};
use robandit::{fit_actor_critic, ActorCriticFit, CriticConfig, Method, OutlierConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

#[derive(Parser)]
#[command(
    name = "robandit",
    version,
    about = "Robust actor-critic contextual bandit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Vary the contaminated fraction ψ at the configured strength ν.
    SweepS1(SweepArgs),
    /// Vary the contamination strength ν at the configured fraction ψ.
    SweepS2(SweepArgs),
    /// Fit the critic and actor on one user's training trajectory.
    FitOne(FitArgs),
    /// Write one user's (optionally contaminated) training trajectory as CSV.
    GenData(GenArgs),
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// JSON config file; missing keys take the reference defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Base seed for every random stream.
    #[arg(long, env = "ROBANDIT_SEED")]
    seed: Option<u64>,
    /// Config override, `key=value` with a JSON value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Number of simulated users.
    #[arg(long)]
    users: Option<usize>,
    /// Contaminated fraction of training tuples.
    #[arg(long)]
    psi: Option<f64>,
    /// Contamination strength multiplier.
    #[arg(long)]
    nu: Option<f64>,
    /// Training trajectory length T.
    #[arg(long)]
    horizon: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated axis values (default: the reference grid).
    #[arg(long, value_delimiter = ',')]
    axis: Option<Vec<f64>>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Which user's trajectory to fit.
    #[arg(long, default_value_t = 0)]
    user: usize,
    /// `RS-ACCB` or `S-ACCB`.
    #[arg(long, default_value = "RS-ACCB")]
    method: Method,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    user: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub base_seed: u64,
    pub config: ConfigFile,
    pub outputs: Vec<String>,
    pub started_unix_secs: u64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub method: Method,
    pub user: usize,
    pub base_seed: u64,
    pub outliers: OutlierConfig,
    pub outlier_mask: Vec<bool>,
    pub fit: ActorCriticFit,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut overrides: Vec<(String, Value)> = self
            .overrides
            .iter()
            .map(|s| parse_override(s))
            .collect::<robandit::Result<_>>()?;
        let flags = [
            ("base_seed", self.seed.map(Value::from)),
            ("n_users", self.users.map(Value::from)),
            ("psi", self.psi.map(Value::from)),
            ("nu", self.nu.map(Value::from)),
            ("horizon_T", self.horizon.map(Value::from)),
        ];
        overrides.extend(
            flags
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k.to_string(), v))),
        );
        let cfg = match &self.config {
            Some(path) => load_config(path, &overrides)?,
            None => parse_config("", &overrides)?,
        };
        Ok(cfg)
    }
}

fn write_file(dir: &Path, name: &str, contents: &str, outputs: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    outputs.push(name.to_string());
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn sweep(
    setting: Setting,
    args: &SweepArgs,
    cfg: &RunConfig,
    outputs: &mut Vec<String>,
) -> Result<()> {
    let (swept, fixed) = match setting {
        Setting::S1 => (args.common.psi.is_some(), cfg.outliers.nu),
        Setting::S2 => (args.common.nu.is_some(), cfg.outliers.psi),
    };
    if swept {
        bail!(
            "--{} is the swept parameter of this command; give its values with --axis",
            setting.axis_name()
        );
    }
    let axis = args.axis.clone().unwrap_or_else(|| setting.default_axis());
    for &v in &axis {
        let oc = match setting {
            Setting::S1 => OutlierConfig { psi: v, nu: fixed },
            Setting::S2 => OutlierConfig { psi: fixed, nu: v },
        };
        oc.validate().with_context(|| format!("axis value {v}"))?;
    }
    let report = run_sweep(setting, &axis, fixed, &cfg.sim, &cfg.eval, &cfg.learners());
    let dir = &args.common.out;
    let stem = setting.file_stem();
    write_file(dir, &format!("{stem}.csv"), &report.to_csv(), outputs)?;
    write_file(dir, &format!("{stem}.md"), &report.to_markdown(), outputs)?;
    write_file(dir, &format!("{stem}.json"), &to_json(&report)?, outputs)?;
    print!("{}", report.to_markdown());
    Ok(())
}

fn fit_one(args: &FitArgs, cfg: &RunConfig, outputs: &mut Vec<String>) -> Result<()> {
    let critic = match args.method {
        Method::RsAccb => cfg.critic,
        Method::SAccb => CriticConfig::uncapped(cfg.critic.zeta),
        Method::LinUcb => bail!("fit-one fits actor-critic learners; choose RS-ACCB or S-ACCB"),
    };
    let data = training_data(args.user, &cfg.outliers, &cfg.sim, cfg.eval.base_seed);
    let fit = fit_actor_critic(&data, &critic, &cfg.actor)
        .with_context(|| format!("fitting user {}", args.user))?;
    let report = FitReport {
        method: args.method,
        user: args.user,
        base_seed: cfg.eval.base_seed,
        outliers: cfg.outliers,
        outlier_mask: data.outlier_mask.clone(),
        fit,
    };
    write_file(&args.common.out, "fit.json", &to_json(&report)?, outputs)?;
    let capped = report
        .fit
        .critic
        .weights
        .iter()
        .filter(|&&u| u == 0.0)
        .count();
    println!(
        "{} user {}: {} of {} tuples capped, theta = {:?}",
        report.method,
        report.user,
        capped,
        data.len(),
        report.fit.actor.params.theta
    );
    Ok(())
}

fn gen_data(args: &GenArgs, cfg: &RunConfig, outputs: &mut Vec<String>) -> Result<()> {
    let data = training_data(args.user, &cfg.outliers, &cfg.sim, cfg.eval.base_seed);
    let name = "trajectory.csv";
    let path = args.common.out.join(name);
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    data.write_csv(BufWriter::new(file))
        .with_context(|| format!("writing {}", path.display()))?;
    outputs.push(name.to_string());
    println!("wrote {} tuples to {}", data.len(), path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    let started_unix_secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let (name, common) = match &cli.command {
        Command::SweepS1(a) => ("sweep-s1", &a.common),
        Command::SweepS2(a) => ("sweep-s2", &a.common),
        Command::FitOne(a) => ("fit-one", &a.common),
        Command::GenData(a) => ("gen-data", &a.common),
    };
    let cfg = common.resolve()?;
    if let Some(n) = common.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting the worker pool")?;
    }
    fs::create_dir_all(&common.out)
        .with_context(|| format!("creating output directory {}", common.out.display()))?;

    let mut outputs = Vec::new();
    match &cli.command {
        Command::SweepS1(a) => sweep(Setting::S1, a, &cfg, &mut outputs)?,
        Command::SweepS2(a) => sweep(Setting::S2, a, &cfg, &mut outputs)?,
        Command::FitOne(a) => fit_one(a, &cfg, &mut outputs)?,
        Command::GenData(a) => gen_data(a, &cfg, &mut outputs)?,
    }

    let manifest = Manifest {
        tool: env!("CARGO_BIN_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: name.to_string(),
        base_seed: cfg.eval.base_seed,
        config: cfg.to_file(),
        outputs,
        started_unix_secs,
        elapsed_secs: started.elapsed().as_secs_f64(),
    };
    let mut sink = Vec::new();
    write_file(
        &common.out,
        "manifest.json",
        &to_json(&manifest)?,
        &mut sink,
    )?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
