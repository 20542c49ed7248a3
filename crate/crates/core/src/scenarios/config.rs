//! Experiment configuration files (TOML).

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bathymetry::{zeta_to_q, Bathymetry, Profile};
use crate::diagnostics::DiagnosticsOptions;
use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelParams, ModelState};
use crate::spectral::{Field, Grid, VecField};
use crate::timeloop::StepperConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Dispersion,
    Consistency,
    Longtime,
    Burgers,
    OperatorAudit,
    MollifierStudy,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::Dispersion,
        ScenarioKind::Consistency,
        ScenarioKind::Longtime,
        ScenarioKind::Burgers,
        ScenarioKind::OperatorAudit,
        ScenarioKind::MollifierStudy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Dispersion => "dispersion",
            ScenarioKind::Consistency => "consistency",
            ScenarioKind::Longtime => "longtime",
            ScenarioKind::Burgers => "burgers",
            ScenarioKind::OperatorAudit => "operator-audit",
            ScenarioKind::MollifierStudy => "mollifier-study",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            ScenarioKind::Dispersion => "linear flat-bottom BP modes: measured vs predicted frequencies",
            ScenarioKind::Consistency => "mu-sweep of SW/BP/MBP differences and their convergence orders",
            ScenarioKind::Longtime => "MBP runs with eps = mu to t = T/eps and E^N boundedness",
            ScenarioKind::Burgers => "eps-sweep of Burgers gradient blow-up vs the characteristics time",
            ScenarioKind::OperatorAudit => "symmetry, coercivity and inversion checks of the elliptic operators",
            ScenarioKind::MollifierStudy => "difference between mollified and physical runs as delta -> 0",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario `{s}`")))
    }
}

/// A domain length given as a number or as a multiple of pi (`"20pi"`, `"2*pi"`, `"pi"`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Length(pub f64);

impl FromStr for Length {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let t = s.trim().to_ascii_lowercase().replace(' ', "");
        let value = if let Some(head) = t.strip_suffix("pi") {
            let head = head.strip_suffix('*').unwrap_or(head);
            let factor = if head.is_empty() {
                1.0
            } else {
                head.parse::<f64>().map_err(|_| format!("cannot read `{s}` as a length"))?
            };
            factor * PI
        } else {
            t.parse::<f64>().map_err(|_| format!("cannot read `{s}` as a length"))?
        };
        if !(value > 0.0 && value.is_finite()) {
            return Err(format!("length must be positive, got `{s}`"));
        }
        Ok(Length(value))
    }
}

impl<'de> Deserialize<'de> for Length {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) if x > 0.0 && x.is_finite() => Ok(Length(x)),
            Raw::Number(x) => Err(serde::de::Error::custom(format!("length must be positive, got {x}"))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Serialize for Length {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

fn default_dim() -> usize {
    1
}

fn default_gamma() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub n: usize,
    pub length: Length,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        let lengths = vec![self.length.0; self.dim];
        Grid::new(self.dim, self.n, &lengths, self.gamma)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathymetrySpec {
    #[serde(default)]
    pub beta: f64,
    #[serde(flatten)]
    pub profile: Profile,
}

impl Default for BathymetrySpec {
    fn default() -> Self {
        Self {
            beta: 0.0,
            profile: Profile::Flat,
        }
    }
}

impl BathymetrySpec {
    pub fn build(&self, grid: &Grid) -> Result<Bathymetry> {
        Bathymetry::build(&self.profile, self.beta, grid)
    }
}

/// Initial data; velocities start at rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `amplitude * exp(-|x - center|^2 / width^2)`, centered in the domain by default.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Option<[f64; 2]>,
    },
    /// `amplitude * sum_k cos(k x)`.
    Modes { wavenumbers: Vec<f64>, amplitude: f64 },
    /// `-amplitude * sin(2 pi x / L)`.
    NegativeSine { amplitude: f64 },
    Rest,
}

impl InitialSpec {
    /// Elevation (or Burgers unknown) on `grid`.
    pub fn elevation(&self, grid: &Grid) -> Result<Field> {
        let lengths = grid.lengths();
        match self {
            InitialSpec::Gaussian {
                amplitude,
                width,
                center,
            } => {
                if !(*width > 0.0) {
                    return Err(Error::InvalidArgument("gaussian width must be positive".into()));
                }
                let c = center.unwrap_or([0.5 * lengths[0], 0.5 * lengths.get(1).copied().unwrap_or(0.0)]);
                Ok(Field::from_fn(grid, |x, y| {
                    let dx = x - c[0];
                    let dy = if grid.dim() == 2 { y - c[1] } else { 0.0 };
                    amplitude * (-(dx * dx + dy * dy) / (width * width)).exp()
                }))
            }
            InitialSpec::Modes {
                wavenumbers,
                amplitude,
            } => {
                let base = 2.0 * PI / lengths[0];
                for &k in wavenumbers {
                    let m = k / base;
                    if (m - m.round()).abs() > 1e-9 || m.round() < 1.0 {
                        return Err(Error::InvalidArgument(format!(
                            "wavenumber {k} is not a positive multiple of 2 pi / L = {base}"
                        )));
                    }
                    if k >= grid.max_wavenumber() {
                        return Err(Error::InvalidArgument(format!("wavenumber {k} is not resolved")));
                    }
                }
                Ok(Field::from_fn(grid, |x, _| {
                    amplitude * wavenumbers.iter().map(|&k| (k * x).cos()).sum::<f64>()
                }))
            }
            InitialSpec::NegativeSine { amplitude } => {
                let k = 2.0 * PI / lengths[0];
                Ok(Field::from_fn(grid, |x, _| -amplitude * (k * x).sin()))
            }
            InitialSpec::Rest => Ok(Field::zeros(grid)),
        }
    }

    /// Prognostic state for `params`: the elevation is converted to `q` for the modified system.
    pub fn state(&self, params: &ModelParams, bath: &Bathymetry) -> Result<ModelState> {
        let grid = bath.grid();
        let zeta = self.elevation(grid)?;
        let surface = match params.kind {
            ModelKind::ModifiedBp => zeta_to_q(&zeta, params.eps, bath)?,
            _ => zeta,
        };
        let velocity = params.kind.has_velocity().then(|| VecField::zeros(grid));
        Ok(ModelState::new(surface, velocity))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub mu: Vec<f64>,
    /// Mollifier values compared against the physical run.
    #[serde(default)]
    pub delta: Vec<f64>,
    /// Tie `eps` to `mu` (the Boussinesq regime).
    #[serde(default)]
    pub eps_equals_mu: bool,
    /// Extra run outside the long-wave regime whose outcome is recorded only.
    #[serde(default)]
    pub contrast_eps: Option<f64>,
    /// Final time in units of `1/eps`.
    #[serde(default)]
    pub horizon: Option<f64>,
}

/// Verdict thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub dispersion_rel_err: f64,
    pub symmetry: f64,
    pub inverse: f64,
    pub dense_agreement: f64,
    pub order_bp_sw: f64,
    pub order_bp_mbp: f64,
    pub energy_growth: f64,
    pub shock_rel_err: f64,
    pub shock_slope_tol: f64,
    pub mollifier_max_diff: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            dispersion_rel_err: 1e-3,
            symmetry: 1e-10,
            inverse: 1e-9,
            dense_agreement: 1e-12,
            order_bp_sw: 0.9,
            order_bp_mbp: 1.7,
            energy_growth: 2.0,
            shock_rel_err: 0.1,
            shock_slope_tol: 0.05,
            mollifier_max_diff: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// One diagnostics CSV per run.
    pub csv: bool,
    /// Initial and final fields of every run as raw binary.
    pub snapshots: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            csv: true,
            snapshots: false,
        }
    }
}

fn default_trials() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSpec {
    /// Random fields per operator for sampled quotients and dense agreement.
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub grids: Vec<GridSpec>,
}

/// One experiment file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub bathymetry: BathymetrySpec,
    #[serde(default)]
    pub model: Option<ModelParams>,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub stepper: Option<StepperConfig>,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsOptions,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub audit: Option<AuditSpec>,
}

fn missing(path: &str) -> Error {
    Error::config(path, "required for this scenario")
}

fn positive_list(path: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::config(path, "must not be empty for this scenario"));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::config(path, format!("values must be positive, got {v}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text; errors carry the offending key path.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.into_inner().message().trim())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn grid(&self) -> Result<&GridSpec> {
        self.grid.as_ref().ok_or_else(|| missing("grid"))
    }

    pub fn model(&self) -> Result<&ModelParams> {
        self.model.as_ref().ok_or_else(|| missing("model"))
    }

    pub fn initial(&self) -> Result<&InitialSpec> {
        self.initial.as_ref().ok_or_else(|| missing("initial"))
    }

    pub fn stepper(&self) -> Result<&StepperConfig> {
        self.stepper.as_ref().ok_or_else(|| missing("stepper"))
    }

    /// Structural checks; runs nothing.
    pub fn validate(&self) -> Result<()> {
        let wrap = |path: &str, r: Result<()>| r.map_err(|e| Error::config(path, e.to_string()));
        if let Some(g) = &self.grid {
            wrap("grid", g.build().map(|_| ()))?;
        }
        if let Some(m) = &self.model {
            wrap("model", m.validate())?;
        }
        if let Some(s) = &self.stepper {
            wrap("stepper", s.validate())?;
        }
        if !(self.bathymetry.beta >= 0.0 && self.bathymetry.beta.is_finite()) {
            return Err(Error::config("bathymetry.beta", "must be >= 0"));
        }
        match self.scenario {
            ScenarioKind::Dispersion => {
                self.grid()?;
                self.stepper()?;
                match self.initial()? {
                    InitialSpec::Modes { wavenumbers, .. } if !wavenumbers.is_empty() => {}
                    _ => return Err(Error::config("initial", "dispersion needs `shape = \"modes\"` with wavenumbers")),
                }
                if self.sweep.mu.is_empty() {
                    return Err(Error::config("sweep.mu", "must not be empty for this scenario"));
                }
                if self.sweep.mu.iter().any(|m| !(*m >= 0.0)) {
                    return Err(Error::config("sweep.mu", "values must be >= 0"));
                }
            }
            ScenarioKind::Consistency => {
                self.grid()?;
                self.stepper()?;
                self.initial()?;
                positive_list("sweep.mu", &self.sweep.mu)?;
                if !self.sweep.eps_equals_mu && self.sweep.eps.len() != self.sweep.mu.len() {
                    return Err(Error::config(
                        "sweep.eps",
                        "give one eps per mu or set `eps_equals_mu = true`",
                    ));
                }
            }
            ScenarioKind::Longtime => {
                self.grid()?;
                self.stepper()?;
                self.initial()?;
                positive_list("sweep.eps", &self.sweep.eps)?;
                match self.sweep.horizon {
                    Some(h) if h > 0.0 => {}
                    _ => return Err(Error::config("sweep.horizon", "a positive horizon is required")),
                }
            }
            ScenarioKind::Burgers => {
                let g = self.grid()?;
                if g.dim != 1 {
                    return Err(Error::config("grid.dim", "Burgers is one-dimensional"));
                }
                self.stepper()?;
                self.initial()?;
                positive_list("sweep.eps", &self.sweep.eps)?;
                match self.sweep.horizon {
                    Some(h) if h > 0.0 => {}
                    _ => return Err(Error::config("sweep.horizon", "a positive horizon is required")),
                }
            }
            ScenarioKind::OperatorAudit => {
                let audit = self.audit.as_ref().ok_or_else(|| missing("audit"))?;
                if audit.grids.is_empty() {
                    return Err(Error::config("audit.grids", "must not be empty"));
                }
                for (i, g) in audit.grids.iter().enumerate() {
                    wrap(&format!("audit.grids[{i}]"), g.build().map(|_| ()))?;
                }
                if audit.trials == 0 {
                    return Err(Error::config("audit.trials", "must be >= 1"));
                }
                self.model()?;
            }
            ScenarioKind::MollifierStudy => {
                self.grid()?;
                self.stepper()?;
                self.initial()?;
                self.model()?;
                positive_list("sweep.delta", &self.sweep.delta)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths_in_units_of_pi() {
        assert_eq!("20pi".parse::<Length>().unwrap().0, 20.0 * PI);
        assert_eq!("2*pi".parse::<Length>().unwrap().0, 2.0 * PI);
        assert_eq!("pi".parse::<Length>().unwrap().0, PI);
        assert_eq!("6.5".parse::<Length>().unwrap().0, 6.5);
        assert!("-pi".parse::<Length>().is_err());
        assert!("abc".parse::<Length>().is_err());
    }

    #[test]
    fn scenario_names_round_trip() {
        for k in ScenarioKind::ALL {
            assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
        }
    }
}
