use robandit::config::parse_config;
use robandit::evalharness::{parse_csv, parse_markdown, Setting};
use robandit::{ExperimentReport, Method, Trajectory};
use serde_json::Value;
use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 6] = [
    "--users",
    "3",
    "--set",
    "eval_horizon=300",
    "--set",
    "tail=200",
];

fn robandit(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robandit"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("ROBANDIT_SEED")
        .output()
        .expect("binary runs")
}

fn ok(output: &Output) {
    assert!(
        output.status.success(),
        "exit {:?}\nstderr: {}",
        output.status,
        String::from_utf8_lossy(&output.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn sweep_s1_writes_reports_that_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep-s1", "--axis", "0,0.05"];
    args.extend(SMALL);
    ok(&robandit(&args, dir.path()));

    let report: ExperimentReport = serde_json::from_str(&read(dir.path(), "s1.json")).unwrap();
    assert_eq!(report.setting, Setting::S1);
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.rows[1].outliers.psi, 0.05);
    assert_eq!(report.rows[1].outliers.nu, 5.0);

    let csv = parse_csv(&read(dir.path(), "s1.csv")).unwrap();
    assert_eq!(csv, report.csv_rows());
    assert_eq!(csv.len(), 6);

    let md = parse_markdown(&read(dir.path(), "s1.md")).unwrap();
    assert_eq!(md.len(), 3, "two conditions plus the average row");
    let (mean, _) = md[0].1[2].expect("filled cell");
    let expect = report.rows[0].result(Method::RsAccb).unwrap().mean.unwrap();
    assert!((mean - expect).abs() < 0.051, "{mean} vs {expect}");

    let manifest: Value = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "sweep-s1");
    assert_eq!(manifest["tool"], "robandit");
    assert_eq!(
        manifest["outputs"],
        serde_json::json!(["s1.csv", "s1.md", "s1.json"])
    );
    let reloaded = parse_config(&manifest["config"].to_string(), &[]).unwrap();
    assert_eq!(reloaded.eval.n_users, 3);
    assert_eq!(reloaded.eval.eval_horizon, 300);
    assert_eq!(reloaded.sim, report.metadata.sim);
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep-s2", "--axis", "0,10", "--seed", "17"];
    args.extend(SMALL);
    let mut one = args.clone();
    one.extend(["--threads", "1"]);
    let mut four = args.clone();
    four.extend(["--threads", "4"]);
    ok(&robandit(&one, a.path()));
    ok(&robandit(&four, b.path()));
    for name in ["s2.csv", "s2.md", "s2.json"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
}

#[test]
fn seed_comes_from_environment_when_flag_absent() {
    let flag = tempfile::tempdir().unwrap();
    let env = tempfile::tempdir().unwrap();
    ok(&robandit(&["fit-one", "--seed", "99"], flag.path()));
    let out = Command::new(env!("CARGO_BIN_EXE_robandit"))
        .args(["fit-one", "--out"])
        .arg(env.path())
        .env("ROBANDIT_SEED", "99")
        .output()
        .unwrap();
    ok(&out);
    assert_eq!(read(flag.path(), "fit.json"), read(env.path(), "fit.json"));
}

#[test]
fn fit_one_reports_critic_and_policy() {
    let dir = tempfile::tempdir().unwrap();
    ok(&robandit(
        &["fit-one", "--psi", "0.04", "--nu", "5"],
        dir.path(),
    ));
    let fit: Value = serde_json::from_str(&read(dir.path(), "fit.json")).unwrap();
    assert_eq!(fit["method"], "RS-ACCB");
    assert_eq!(fit["fit"]["critic"]["w"].as_array().unwrap().len(), 8);
    assert_eq!(
        fit["fit"]["critic"]["weights"].as_array().unwrap().len(),
        210
    );
    assert!(fit["fit"]["critic"]["epsilon"].as_f64().unwrap() > 0.0);
    assert_eq!(
        fit["fit"]["actor"]["params"]["theta"]
            .as_array()
            .unwrap()
            .len(),
        4
    );
    let flagged = fit["outlier_mask"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|v| v.as_bool() == Some(true))
        .count();
    assert_eq!(flagged, 8, "floor(0.04 * 210)");
}

#[test]
fn fit_one_uncapped_has_unit_weights() {
    let dir = tempfile::tempdir().unwrap();
    ok(&robandit(&["fit-one", "--method", "S-ACCB"], dir.path()));
    let fit: Value = serde_json::from_str(&read(dir.path(), "fit.json")).unwrap();
    assert!(fit["fit"]["critic"]["epsilon"].is_null());
    assert!(fit["fit"]["critic"]["weights"]
        .as_array()
        .unwrap()
        .iter()
        .all(|u| u.as_f64() == Some(1.0)));
}

#[test]
fn gen_data_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    ok(&robandit(
        &[
            "gen-data",
            "--horizon",
            "100",
            "--psi",
            "0.1",
            "--user",
            "2",
        ],
        dir.path(),
    ));
    let file = fs::File::open(dir.path().join("trajectory.csv")).unwrap();
    let traj = Trajectory::read_csv(BufReader::new(file)).unwrap();
    assert_eq!(traj.len(), 100);
    assert_eq!(traj.outlier_mask.iter().filter(|&&f| f).count(), 10);
    let mut again = Vec::new();
    traj.write_csv(&mut again).unwrap();
    assert_eq!(
        String::from_utf8(again).unwrap(),
        read(dir.path(), "trajectory.csv")
    );
}

#[test]
fn config_file_and_overrides_compose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"horizon_T": 50, "psi": 0.2}"#).unwrap();
    let out = robandit(
        &[
            "gen-data",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "psi=0.1",
        ],
        dir.path(),
    );
    ok(&out);
    let text = read(dir.path(), "trajectory.csv");
    assert_eq!(text.lines().count(), 51);
    assert_eq!(text.lines().filter(|l| l.ends_with(",1")).count(), 5);
}

#[test]
fn bad_input_fails_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"horizon_T": -5}"#).unwrap();
    for args in [
        vec!["fit-one", "--config", cfg.to_str().unwrap()],
        vec!["fit-one", "--set", "bogus=1"],
        vec!["sweep-s1", "--psi", "0.1"],
        vec!["sweep-s2", "--axis=-1"],
        vec!["fit-one", "--method", "Lin-UCB"],
    ] {
        let out = robandit(&args, dir.path());
        assert!(!out.status.success(), "{args:?} succeeded");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.starts_with("error:"), "{args:?}: {stderr}");
        assert!(!stderr.contains("panicked"), "{args:?}: {stderr}");
    }
    let stderr = String::from_utf8_lossy(
        &robandit(&["fit-one", "--config", cfg.to_str().unwrap()], dir.path()).stderr,
    )
    .into_owned();
    assert!(stderr.contains("horizon_T"), "{stderr}");
}
