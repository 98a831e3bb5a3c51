//! Declarative experiment configuration: a TOML file with flat sections
//! of typed scalars and lists. The full schema is documented in the
//! repository README.

use lle::continuation::{ContinuationParam, ContinuationSettings, NewtonSettings};
use lle::Params;
use serde::{Deserialize, Serialize};

/// Configuration problem (maps to exit code 1).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    TrivialBranch,
    Continue,
    Sweep,
    BifurcationScan,
    SignMap,
    BoundsReport,
    ReproduceFig,
    LocateThreshold,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::TrivialBranch => "trivial-branch",
            ExperimentKind::Continue => "continue",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::BifurcationScan => "bifurcation-scan",
            ExperimentKind::SignMap => "sign-map",
            ExperimentKind::BoundsReport => "bounds-report",
            ExperimentKind::ReproduceFig => "reproduce-fig",
            ExperimentKind::LocateThreshold => "locate-threshold",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub d: f64,
    #[serde(default)]
    pub zeta: f64,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub f0: f64,
    #[serde(default)]
    pub f1: f64,
    #[serde(default = "default_k1")]
    pub k1: u32,
}

fn default_k1() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Grid size; 1000 mirrors the reference computations, 256 is the
    /// fast default of the test suite.
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    1000
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n: default_n() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationSection {
    #[serde(default = "d_ds0")]
    pub ds0: f64,
    #[serde(default = "d_ds_min")]
    pub ds_min: f64,
    #[serde(default = "d_ds_max")]
    pub ds_max: f64,
    #[serde(default = "d_max_steps")]
    pub max_steps: usize,
    #[serde(default = "d_loop_tol")]
    pub loop_tol: f64,
    #[serde(default = "d_f1_min")]
    pub param_min: f64,
    #[serde(default = "d_f1_max")]
    pub param_max: f64,
    #[serde(default = "d_tol_residual")]
    pub tol_residual: f64,
    #[serde(default = "d_newton_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default = "d_track_min_sv")]
    pub track_min_sv: bool,
}

fn d_ds0() -> f64 {
    0.01
}
fn d_ds_min() -> f64 {
    1e-5
}
fn d_ds_max() -> f64 {
    0.1
}
fn d_max_steps() -> usize {
    2000
}
fn d_loop_tol() -> f64 {
    1e-6
}
fn d_f1_min() -> f64 {
    -2.0
}
fn d_f1_max() -> f64 {
    2.0
}
fn d_tol_residual() -> f64 {
    1e-10
}
fn d_newton_max_iter() -> usize {
    25
}
fn d_track_min_sv() -> bool {
    true
}

impl Default for ContinuationSection {
    fn default() -> Self {
        ContinuationSection {
            ds0: d_ds0(),
            ds_min: d_ds_min(),
            ds_max: d_ds_max(),
            max_steps: d_max_steps(),
            loop_tol: d_loop_tol(),
            param_min: d_f1_min(),
            param_max: d_f1_max(),
            tol_residual: d_tol_residual(),
            newton_max_iter: d_newton_max_iter(),
            track_min_sv: d_track_min_sv(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Reproduce-fig target: fig2, fig5 or fig6.
    pub target: Option<String>,
    /// Detuning list for sweeps.
    pub zeta_list: Option<Vec<f64>>,
    /// Start selector for `continue`/`bifurcation-scan`: index into the
    /// ρ-sorted constant solutions.
    pub start_index: Option<usize>,
    /// Continue in this scalar: "f1" (default) or "zeta".
    pub param: Option<String>,
    /// t-grid for sign-map / trivial-branch.
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub t_samples: Option<usize>,
    /// Bracket and final width for locate-threshold.
    pub zeta_lo: Option<f64>,
    pub zeta_hi: Option<f64>,
    pub width: Option<f64>,
    /// Multi-start uniqueness probe (bounds-report).
    pub seed: Option<u64>,
    pub starts: Option<usize>,
    /// Also write per-point field snapshots as JSON.
    #[serde(default)]
    pub write_fields: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub continuation: ContinuationSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.model.d == 0.0 || !self.model.d.is_finite() {
            return Err(ConfigError("model.d must be nonzero".into()));
        }
        if self.model.k1 < 1 {
            return Err(ConfigError("model.k1 must be >= 1".into()));
        }
        let n = self.grid.n;
        if n < 8 || n % 2 != 0 {
            return Err(ConfigError(format!("grid.n = {n} must be even and >= 8")));
        }
        if n % (2 * self.model.k1 as usize) != 0 {
            return Err(ConfigError(format!(
                "grid.n = {n} must be divisible by 2*k1 = {}",
                2 * self.model.k1
            )));
        }
        let c = &self.continuation;
        if !(c.ds_min > 0.0 && c.ds_min <= c.ds0 && c.ds0 <= c.ds_max) {
            return Err(ConfigError("need 0 < ds_min <= ds0 <= ds_max".into()));
        }
        if c.tol_residual <= 0.0 || c.newton_max_iter == 0 {
            return Err(ConfigError("newton settings out of range".into()));
        }
        if let Some(list) = &self.experiment.zeta_list {
            if list.iter().any(|z| !z.is_finite()) {
                return Err(ConfigError("zeta_list entries must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Params {
        Params::second_harmonic(
            self.model.d,
            self.model.zeta,
            self.model.omega,
            self.model.f0,
            self.model.f1,
            self.model.k1,
        )
    }

    pub fn continuation_settings(&self) -> Result<ContinuationSettings, ConfigError> {
        let param = match self.experiment.param.as_deref() {
            None | Some("f1") => ContinuationParam::F1,
            Some("zeta") => ContinuationParam::Zeta,
            Some(other) => return Err(ConfigError(format!("unknown parameter `{other}`"))),
        };
        let c = &self.continuation;
        Ok(ContinuationSettings {
            param,
            ds0: c.ds0,
            ds_min: c.ds_min,
            ds_max: c.ds_max,
            max_steps: c.max_steps,
            loop_tol: c.loop_tol,
            initial_direction: 1.0,
            param_min: c.param_min,
            param_max: c.param_max,
            newton: NewtonSettings {
                tol_residual: c.tol_residual,
                max_iter: c.newton_max_iter,
                ..NewtonSettings::default()
            },
            track_min_sv: c.track_min_sv,
        })
    }
}
