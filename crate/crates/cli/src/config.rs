//! The run configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sirlab::experiments::{Suite, VerifyPlan};
use sirlab::{Grid, InitSpec, Params, SimConfig};

use crate::CliError;

/// Relative tolerance of the mass-balance experiment.
pub const MASS_REL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: Params,
    pub grid: GridSection,
    pub time: TimeSection,
    pub init: InitSpec,
    pub spectral: SpectralSection,
    pub dispersion: DispersionSection,
    pub verify: VerifySection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L")]
    pub side: f64,
    pub nx: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmax: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSection {
    pub k2_max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub suite: String,
    pub betas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub fit_window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses and checks everything that does not depend on the subcommand.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.params.validate()?;
        self.sim_config()?.validate()?;
        if self.time.snapshot_stride == 0 {
            return Err(CliError::Config("time.snapshot_stride must be >= 1".into()));
        }
        if !(self.dispersion.k2_max.is_finite() && self.dispersion.k2_max > 0.0) {
            return Err(CliError::Config(format!(
                "dispersion.k2_max must be positive, got {}",
                self.dispersion.k2_max
            )));
        }
        if self.dispersion.steps < 2 {
            return Err(CliError::Config("dispersion.steps must be >= 2".into()));
        }
        self.suite()?;
        if self.verify.trials == 0 {
            return Err(CliError::Config("verify.trials must be >= 1".into()));
        }
        let (t0, t1) = self.verify.fit_window;
        if !(t0.is_finite() && t1.is_finite() && 0.0 <= t0 && t0 < t1) {
            return Err(CliError::Config(format!(
                "verify.fit_window must satisfy 0 <= t0 < t1, got [{t0}, {t1}]"
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::new(self.grid.side, self.grid.nx)?)
    }

    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        Ok(SimConfig {
            params: self.params,
            grid: self.grid()?,
            t_end: self.time.t_end,
            dt: self.time.dt,
            snapshot_stride: self.time.snapshot_stride,
            init: self.init.clone(),
        })
    }

    pub fn suite(&self) -> Result<Suite, CliError> {
        self.verify
            .suite
            .parse()
            .map_err(|e: String| CliError::Config(format!("verify.suite: {e}")))
    }

    pub fn verify_plan(&self) -> Result<VerifyPlan, CliError> {
        Ok(VerifyPlan {
            base: self.sim_config()?,
            betas: self.verify.betas.clone(),
            trials: self.verify.trials,
            seed: self.verify.seed,
            fit_window: self.verify.fit_window,
            mass_rel_tol: MASS_REL_TOL,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::{json, Value};

    fn example() -> Value {
        json!({
            "params": {"chi_s": 0.3, "chi_i": 0.4, "chi_r": 0.5, "b": 0.5, "beta": 0.01, "nu": 0.5, "gamma": 0.5},
            "grid": {"L": 5.0, "nx": 32},
            "time": {"t_end": 1.0, "snapshot_stride": 10},
            "init": {"type": "paper_gaussian"},
            "spectral": {},
            "dispersion": {"k2_max": 10.0, "steps": 101},
            "verify": {"suite": "all", "betas": [1e-2, 1e-3], "trials": 2, "seed": 1, "fit_window": [2.0, 8.0]},
            "output": {"dir": "out"}
        })
    }

    fn parse(v: &Value) -> Result<RunConfig, CliError> {
        RunConfig::parse(&v.to_string())
    }

    #[test]
    fn parses_example_config() {
        let cfg = parse(&example()).unwrap();
        assert_eq!(cfg.params, Params::EXAMPLE);
        assert_eq!(cfg.time.dt, None);
        assert_eq!(cfg.suite().unwrap(), Suite::All);
        assert_eq!(cfg.sim_config().unwrap().grid.nx(), 32);
    }

    #[test]
    fn missing_key_is_named() {
        let mut v = example();
        v["params"].as_object_mut().unwrap().remove("nu");
        let err = parse(&v).unwrap_err().to_string();
        assert!(err.contains("`nu`"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v = example();
        v["grid"]["ny"] = json!(32);
        assert!(parse(&v).unwrap_err().to_string().contains("ny"));
        let mut v = example();
        v["extra"] = json!({});
        assert!(parse(&v).is_err());
        let mut v = example();
        v["init"] = json!({"type": "paper_gaussian", "width": 2});
        assert!(parse(&v).is_err());
    }

    #[test]
    fn bad_values_rejected() {
        for (path, value) in [
            (("params", "nu"), json!(-1.0)),
            (("grid", "nx"), json!(2)),
            (("time", "snapshot_stride"), json!(0)),
            (("time", "t_end"), json!(-1.0)),
            (("dispersion", "steps"), json!(1)),
            (("verify", "suite"), json!("bogus")),
            (("verify", "trials"), json!(0)),
        ] {
            let mut v = example();
            v[path.0][path.1] = value;
            assert_eq!(parse(&v).unwrap_err().exit_code(), 2, "{path:?}");
        }
    }
}
