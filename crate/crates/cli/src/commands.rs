//! One function per subcommand. Each writes its artifacts into the output
//! directory and prints its JSON summary, if any, to stdout.

use serde_json::{json, Value};
use sirlab::experiments::{run_suite, Suite};
use sirlab::integrator::{simulate as integrate, stable_dt};
use sirlab::kinetics::{equilibria as find_equilibria, invariant_region};
use sirlab::output::{
    time_label, write_coeffs_csv, write_dispersion_csv, write_field_csv, write_timeseries_csv,
};
use sirlab::spectral::build_infection_free;
use sirlab::stability::{
    critical_k2_a1, critical_k2_printed_a2, errata, scan_equilibrium, unstable_box_modes,
    EquilibriumKind,
};

use crate::artifacts::OutputDir;
use crate::config::RunConfig;
use crate::CliError;

fn print_json(v: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("JSON values serialize")
    );
}

pub fn equilibria(cfg: &RunConfig) -> Result<(), CliError> {
    let p = &cfg.params;
    let eq = find_equilibria(p);
    let region = invariant_region(p)
        .ok()
        .map(|r| json!({ "c1": r.c1, "c2": r.c2, "c3": r.c3 }));
    let printed_a2 = critical_k2_printed_a2(p).ok();
    let entries = errata(p, cfg.dispersion.k2_max, cfg.dispersion.steps)?;
    print_json(&json!({
        "a1": eq.a1.to_array(),
        "a2": eq.a2.map(|a| a.to_array()),
        "margin": eq.margin,
        "coincident": eq.coincident(),
        "invariant_region": region,
        "critical_k2": {
            "a1": critical_k2_a1(p),
            "a2_printed": printed_a2,
        },
        "errata": entries,
    }));
    Ok(())
}

pub fn simulate(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let sim = cfg.sim_config()?;
    let limit = stable_dt(&sim.params, &sim.grid);
    if let Some(dt) = sim.dt {
        if dt > limit {
            eprintln!("warning: dt = {dt} exceeds the stable step {limit}; the run may diverge");
        }
    }
    let traj = integrate(&sim)?;
    out.write("timeseries.csv", |w| write_timeseries_csv(w, &traj.series))?;
    for snap in &traj.snapshots {
        out.write(&format!("snap_t{}.csv", time_label(snap.t)), |w| {
            write_field_csv(w, snap)
        })?;
    }
    Ok(())
}

pub fn analytic(cfg: &RunConfig, times: &[f64], out: &mut OutputDir) -> Result<(), CliError> {
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(CliError::Config(format!(
            "evaluation times must be finite and >= 0, got {t}"
        )));
    }
    let sim = cfg.sim_config()?;
    if sim.params.beta != 0.0 {
        eprintln!(
            "warning: beta = {} ignored; the series solution is infection-free",
            sim.params.beta
        );
    }
    let grid = sim.grid;
    let nmax = cfg.spectral.nmax.unwrap_or(grid.nx() - 1);
    let init = sim.init.build(grid)?;
    let sol = build_infection_free(&init.s, &init.i, &init.r, &sim.params.with_beta(0.0), nmax)?;
    out.write("coeffs.csv", |w| write_coeffs_csv(w, &sol))?;
    for &t in times {
        let state = sol.eval_state(&grid, t)?;
        out.write(&format!("analytic_t{}.csv", time_label(t)), |w| {
            write_field_csv(w, &state)
        })?;
    }
    Ok(())
}

pub fn dispersion(
    cfg: &RunConfig,
    kind: EquilibriumKind,
    out: &mut OutputDir,
) -> Result<(), CliError> {
    let (points, report) = scan_equilibrium(
        &cfg.params,
        kind,
        cfg.dispersion.k2_max,
        cfg.dispersion.steps,
    )?;
    out.write(&format!("dispersion_{}.csv", kind.label()), |w| {
        write_dispersion_csv(w, &points)
    })?;
    let mut summary = serde_json::to_value(&report).expect("report serializes");
    summary["unstable_box_modes"] = json!(unstable_box_modes(&report, cfg.grid.side));
    print_json(&summary);
    Ok(())
}

pub fn verify(cfg: &RunConfig, suite: Suite, out: &mut OutputDir) -> Result<(), CliError> {
    let report = run_suite(&cfg.verify_plan()?, suite)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    out.write_str("verify.json", &text)?;
    for r in &report.results {
        println!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.name);
    }
    let failed = report.results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::VerificationFailed(failed));
    }
    Ok(())
}
