use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn example_config(out: &Path) -> Value {
    json!({
        "params": {"chi_s": 0.3, "chi_i": 0.4, "chi_r": 0.5, "b": 0.5, "beta": 0.01, "nu": 0.5, "gamma": 0.5},
        "grid": {"L": 5.0, "nx": 16},
        "time": {"t_end": 2.0, "dt": 0.01, "snapshot_stride": 100},
        "init": {"type": "paper_gaussian"},
        "spectral": {},
        "dispersion": {"k2_max": 10.0, "steps": 101},
        "verify": {"suite": "mass", "betas": [1e-2, 1e-3, 1e-4], "trials": 1, "seed": 3, "fit_window": [2.0, 8.0]},
        "output": {"dir": out}
    })
}

fn endemic(cfg: &mut Value) {
    cfg["params"]["b"] = json!(2.0);
    cfg["params"]["beta"] = json!(1.0);
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Run {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn config(&self) -> Value {
        example_config(&self.out())
    }

    fn exec(&self, cfg: &Value, args: &[&str]) -> Output {
        let path = self.dir.path().join("config.json");
        fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
        let (cmd, rest) = args.split_first().unwrap();
        Command::new(env!("CARGO_BIN_EXE_sirlab"))
            .arg(cmd)
            .arg(&path)
            .args(rest)
            .output()
            .unwrap()
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    fn exists(&self, name: &str) -> bool {
        self.out().join(name).exists()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Rows of a CSV file as floats, header dropped.
fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn equilibria_example_set() {
    let run = Run::new();
    let o = run.exec(&run.config(), &["equilibria"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = stdout_json(&o);
    assert_eq!(v["a1"], json!([1.0, 0.0, 0.0]));
    assert!(v["a2"].is_null());
    assert!((v["margin"].as_f64().unwrap() + 0.495).abs() < 1e-15);
    let c1 = v["invariant_region"]["c1"].as_f64().unwrap();
    assert!((c1 - 1.0 / 0.01f64.cbrt()).abs() < 1e-12);
    assert!(v["critical_k2"]["a1"].is_null());
    assert!(v["critical_k2"]["a2_printed"].is_null());
    assert!(v["errata"]
        .as_array()
        .unwrap()
        .iter()
        .any(|e| e["name"] == "a1_lambda2"));
    assert!(run.exists("manifest.json"));
}

#[test]
fn equilibria_zero_margin_is_coincident() {
    let run = Run::new();
    let mut cfg = run.config();
    cfg["params"]["beta"] = json!(1.0);
    let o = run.exec(&cfg, &["equilibria"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["margin"], json!(0.0));
    assert_eq!(v["a2"], v["a1"]);
    assert_eq!(v["coincident"], json!(true));
    assert!(v["invariant_region"].is_null());
}

#[test]
fn missing_key_exits_2_naming_it() {
    let run = Run::new();
    let mut cfg = run.config();
    cfg["params"].as_object_mut().unwrap().remove("nu");
    let o = run.exec(&cfg, &["equilibria"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("`nu`"), "{}", stderr(&o));
    assert!(!run.exists("manifest.json"));
}

#[test]
fn unknown_key_exits_2() {
    let run = Run::new();
    let mut cfg = run.config();
    cfg["time"]["steps"] = json!(4);
    assert_eq!(code(&run.exec(&cfg, &["simulate"])), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_sirlab"))
        .args(["simulate", "/definitely/not/here.json"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_writes_series_and_snapshots() {
    let run = Run::new();
    let o = run.exec(&run.config(), &["simulate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let series = run.read("timeseries.csv");
    assert_eq!(
        series.lines().next().unwrap(),
        "t,N,mass_s,mass_i,mass_r,linf_s,linf_i,linf_r,l2_i,min_value"
    );
    assert_eq!(series.lines().count(), 1 + 201);
    for name in ["snap_t0.csv", "snap_t1.csv", "snap_t2.csv"] {
        let text = run.read(name);
        assert_eq!(text.lines().next().unwrap(), "x,y,S,I,R");
        assert_eq!(text.lines().count(), 1 + 256);
    }
    // the total population stays at bL²/ν = 25
    for row in csv_rows(&series) {
        assert!((row[1] - 25.0).abs() < 1e-10);
    }
    let manifest: Value = serde_json::from_str(&run.read("manifest.json")).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["config"]["grid"]["L"], json!(5.0));
    let files = manifest["files"].as_array().unwrap();
    assert!(files.contains(&json!("timeseries.csv")) && files.contains(&json!("snap_t1.csv")));
    assert!(!run.exists(".sirlab.lock"));
}

#[test]
fn simulate_t_end_zero() {
    let run = Run::new();
    let mut cfg = run.config();
    cfg["time"]["t_end"] = json!(0.0);
    assert_eq!(code(&run.exec(&cfg, &["simulate"])), 0);
    assert_eq!(run.read("timeseries.csv").lines().count(), 2);
    let snaps: Vec<_> = fs::read_dir(run.out())
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.starts_with("snap_"))
        .collect();
    assert_eq!(snaps, ["snap_t0.csv"]);
}

#[test]
fn simulate_oversized_step_diverges() {
    let run = Run::new();
    let mut cfg = run.config();
    // twice the stable step 0.9·h²/(4χ_max) with h = 5/16
    let h: f64 = 5.0 / 16.0;
    cfg["time"]["dt"] = json!(2.0 * 0.9 * h * h / 2.0);
    cfg["time"]["t_end"] = json!(20.0);
    let o = run.exec(&cfg, &["simulate"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    assert!(!run.exists("timeseries.csv"));
    let manifest: Value = serde_json::from_str(&run.read("manifest.json")).unwrap();
    assert!(manifest["status"].as_str().unwrap().contains("exit 3"));
}

#[test]
fn simulate_is_reproducible() {
    let (a, b) = (Run::new(), Run::new());
    let mut cfg = a.config();
    cfg["init"] = json!({"type": "random_uniform", "lo": 0.0, "hi": 1.0, "seed": 11});
    assert_eq!(code(&a.exec(&cfg, &["simulate"])), 0);
    cfg["output"]["dir"] = json!(b.out());
    assert_eq!(code(&b.exec(&cfg, &["simulate"])), 0);
    for name in [
        "timeseries.csv",
        "snap_t0.csv",
        "snap_t1.csv",
        "snap_t2.csv",
    ] {
        assert_eq!(a.read(name), b.read(name), "{name}");
    }
}

#[test]
fn busy_output_dir_is_refused() {
    let run = Run::new();
    fs::create_dir_all(run.out()).unwrap();
    fs::write(run.out().join(".sirlab.lock"), "").unwrap();
    let o = run.exec(&run.config(), &["simulate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("in use"));
}

#[test]
fn analytic_at_zero_matches_initial_data() {
    let run = Run::new();
    let o = run.exec(&run.config(), &["analytic", "--t", "0,1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("beta"));
    for row in csv_rows(&run.read("analytic_t0.csv")) {
        let g = (-(row[0] - 2.5).powi(2) - (row[1] - 2.5).powi(2)).exp();
        assert!((row[2] - (1.0 - g)).abs() <= 1e-10);
        assert!((row[3] - g / 2.0).abs() <= 1e-10);
        assert!((row[4] - g / 2.0).abs() <= 1e-10);
    }
    assert!(run.exists("analytic_t1.csv"));
    let coeffs = run.read("coeffs.csv");
    assert_eq!(coeffs.lines().next().unwrap(), "n,m,c,d,e,f,resonant");
    assert_eq!(coeffs.lines().count(), 1 + 16 * 16);
}

#[test]
fn analytic_uniform_data_follows_scalar_odes() {
    let run = Run::new();
    let mut cfg = run.config();
    cfg["params"]["beta"] = json!(0.0);
    cfg["init"] = json!({"type": "constant", "s": 0.2, "i": 0.6, "r": 0.1});
    let o = run.exec(&cfg, &["analytic", "--t", "1.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!stderr(&o).contains("warning"));
    // S' = b − νS, I' = −(γ+ν)I, R' = γI − νR with ν = γ = 0.5, b = 0.5
    let t: f64 = 1.5;
    let s = 1.0 + (0.2 - 1.0) * (-0.5 * t).exp();
    let i = 0.6 * (-t).exp();
    let r = (-0.5 * t).exp() * (0.1 + 0.6 * (1.0 - (-0.5 * t).exp()));
    for row in csv_rows(&run.read("analytic_t1.5.csv")) {
        assert!(
            (row[2] - s).abs() <= 1e-12
                && (row[3] - i).abs() <= 1e-12
                && (row[4] - r).abs() <= 1e-12
        );
    }
}

#[test]
fn analytic_rejects_large_nmax() {
    let run = Run::new();
    let mut cfg = run.config();
    cfg["spectral"]["nmax"] = json!(16);
    assert_eq!(code(&run.exec(&cfg, &["analytic", "--t", "0"])), 2);
    assert!(!run.exists("coeffs.csv"));
}

#[test]
fn dispersion_reports() {
    let run = Run::new();
    let o = run.exec(&run.config(), &["dispersion", "--eq", "a1"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["ode_stable"], json!(true));
    assert_eq!(v["turing_unstable"], json!(false));
    let csv = run.read("dispersion_a1.csv");
    assert_eq!(
        csv.lines().next().unwrap(),
        "k2,re1,im1,re2,im2,re3,im3,max_re"
    );
    let k2: Vec<f64> = csv_rows(&csv).iter().map(|r| r[0]).collect();
    assert_eq!(k2.len(), 101);
    assert!(k2.windows(2).all(|w| w[0] < w[1]));

    let mut cfg = run.config();
    endemic(&mut cfg);
    let v = stdout_json(&run.exec(&cfg, &["dispersion"]));
    let iv = &v["unstable_intervals"][0];
    assert_eq!(iv["lo"], json!(0.0));
    assert!((iv["hi"].as_f64().unwrap() - 7.5).abs() < 1e-9);
    assert_eq!(v["turing_unstable"], json!(false));
    assert!(!v["unstable_box_modes"].as_array().unwrap().is_empty());
}

#[test]
fn dispersion_missing_a2_exits_4() {
    let run = Run::new();
    let o = run.exec(&run.config(), &["dispersion", "--eq", "a2"]);
    assert_eq!(code(&o), 4);
    assert!(!run.exists("dispersion_a2.csv"));
}

#[test]
fn verify_mass_passes() {
    let run = Run::new();
    let o = run.exec(&run.config(), &["verify"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&run.read("verify.json")).unwrap();
    assert_eq!(v["suite"], "mass");
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 1);
    assert_eq!(results[0]["name"], "mass_balance");
    assert_eq!(results[0]["passed"], json!(true));
    assert!(results[0]["measured"]["max_rel_error"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn verify_decay_with_infection_exits_2() {
    let run = Run::new();
    let o = run.exec(&run.config(), &["verify", "--suite", "decay"]);
    assert_eq!(code(&o), 2);
    assert!(!run.exists("verify.json"));
}

#[test]
fn verify_failure_exits_1() {
    let run = Run::new();
    let mut cfg = run.config();
    // a strongly oversized step blows up; mass balance records it as a failure
    cfg["time"]["dt"] = json!(0.2);
    cfg["time"]["t_end"] = json!(5.0);
    let o = run.exec(&cfg, &["verify", "--suite", "mass"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&run.read("verify.json")).unwrap();
    assert_eq!(v["results"][0]["passed"], json!(false));
}

#[test]
fn verify_all_runs_five_experiments() {
    let run = Run::new();
    let mut cfg = run.config();
    cfg["time"]["t_end"] = json!(8.0);
    cfg["time"]["snapshot_stride"] = json!(10);
    cfg["verify"]["suite"] = json!("all");
    let o = run.exec(&cfg, &["verify"]);
    let v: Value = serde_json::from_str(&run.read("verify.json")).unwrap();
    let names: Vec<_> = v["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["name"].clone())
        .collect();
    assert_eq!(
        names,
        [
            json!("mass_balance"),
            json!("beta_convergence"),
            json!("i_decay"),
            json!("steady_state_uniqueness"),
            json!("invariant_region")
        ]
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    let again = Run::new();
    cfg["output"]["dir"] = json!(again.out());
    assert_eq!(code(&again.exec(&cfg, &["verify"])), 0);
    assert_eq!(run.read("verify.json"), again.read("verify.json"));
}
