//! Experiment configuration files.
//!
//! Configs are TOML. Angles are given in degrees, powers in dBm and panel
//! lengths in wavelengths; the accessors return SI values and radians.
//! Anything left out takes the default of the selected experiment kind.
//!
//! ```toml
//! seed = 7
//!
//! [panel]
//! n_rf = 4
//! n_e = 32
//!
//! [scenario]
//! r = 5.0
//! theta_deg = 30.0
//! phi_deg = 90.0
//!
//! [experiment]
//! kind = "approx-error"
//! freqs_ghz = [28.0, 60.0, 100.0]
//! ```

use serde::{Deserialize, Serialize};

use crate::channel::{RadiationProfile, UePosition};
use crate::error::{DmaError, Result};
use crate::fisher::{NoiseModel, Param, PilotConfig};
use crate::geometry::PanelConfig;
use crate::optimizer::{Architecture, SolverOptions};
use crate::sim::{linspace, logspace, SearchGrid};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_rf: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_e: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq_ghz: Option<f64>,
    /// Microstrip spacing in wavelengths.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_rf: Option<f64>,
    /// Element spacing in wavelengths.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_e: Option<f64>,
    /// Waveguide cross-section in wavelengths.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wg_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wg_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub r: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub profile: RadiationProfile,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            r: 5.0,
            theta_deg: 30.0,
            phi_deg: 90.0,
            profile: RadiationProfile::Isotropic,
        }
    }
}

/// A single power or a sweep axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PowerSpec {
    Scalar(f64),
    Axis(Vec<f64>),
}

impl PowerSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            PowerSpec::Scalar(p) => vec![*p],
            PowerSpec::Axis(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max_dbm: Option<PowerSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
    /// Explicit variance in watts; overrides the bandwidth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseInit {
    /// Uniform phases over the admissible range, drawn from the run seed.
    #[default]
    Random,
    Zeros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMode {
    #[default]
    KnownTheta,
    Full,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub mode: GridMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_shrink: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    ApproxError {
        #[serde(default = "default_freqs")]
        freqs_ghz: Vec<f64>,
        #[serde(default = "default_orders")]
        orders: Vec<usize>,
        #[serde(default)]
        phases: PhaseInit,
    },
    Design,
    PebSweep {
        #[serde(default = "default_nrf_axis")]
        nrf: Vec<usize>,
        #[serde(default = "default_variants")]
        variants: Vec<Architecture>,
        #[serde(default = "yes")]
        known_theta: bool,
    },
    RmseCurve {
        #[serde(default = "default_rmse_variants")]
        variants: Vec<Architecture>,
        #[serde(default = "default_trials")]
        trials: usize,
        #[serde(default)]
        grid: GridSection,
    },
}

fn default_freqs() -> Vec<f64> {
    vec![28.0, 60.0, 100.0]
}
fn default_orders() -> Vec<usize> {
    (1..=6).collect()
}
fn default_nrf_axis() -> Vec<usize> {
    vec![2, 4, 8]
}
fn default_variants() -> Vec<Architecture> {
    Architecture::ALL.to_vec()
}
fn default_rmse_variants() -> Vec<Architecture> {
    vec![Architecture::DmaOrder2]
}
fn default_trials() -> usize {
    100
}
fn yes() -> bool {
    true
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::ApproxError { .. } => "approx-error",
            Experiment::Design => "design",
            Experiment::PebSweep { .. } => "peb-sweep",
            Experiment::RmseCurve { .. } => "rmse-curve",
        }
    }

    /// Default panel size `(N_RF, N_E)` of each study.
    fn panel_default(&self) -> (usize, usize) {
        match self {
            Experiment::ApproxError { .. } | Experiment::Design => (4, 32),
            Experiment::PebSweep { .. } => (2, 64),
            Experiment::RmseCurve { .. } => (2, 128),
        }
    }
}

/// Parsed configuration file, kept in file units so that it round-trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub panel: PanelSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub pilots: PilotSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub solver: SolverOptions,
    pub experiment: Experiment,
}

pub const DEFAULT_FREQ_GHZ: f64 = 28.0;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 150e3;
pub const DEFAULT_PILOTS: usize = 200;
pub const DEFAULT_PMAX_DBM: f64 = -12.0;
pub const DEFAULT_OUTPUT: &str = "out";

/// Key named in a TOML diagnostic, from the source line it points at.
fn offending_key(text: &str, err: &toml::de::Error) -> String {
    let from_span = err.span().and_then(|span| {
        let line_start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
        let line_end = text[span.start..].find('\n').map_or(text.len(), |i| span.start + i);
        let line = &text[line_start..line_end];
        line.split_once('=').map(|(k, _)| k.trim().to_string())
    });
    if let Some(k) = from_span.filter(|k| !k.is_empty() && !k.starts_with('[')) {
        return k;
    }
    // unknown-field messages quote the key
    let msg = err.message();
    msg.split('`').nth(1).map(str::to_string).unwrap_or_else(|| "config".into())
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| DmaError::Config {
        key: offending_key(text, &e),
        reason: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn minimal(experiment: Experiment) -> Self {
        Self {
            seed: None,
            output: None,
            panel: PanelSection::default(),
            scenario: ScenarioSection::default(),
            pilots: PilotSection::default(),
            noise: NoiseSection::default(),
            solver: SolverOptions::default(),
            experiment,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn output_dir(&self) -> &str {
        self.output.as_deref().unwrap_or(DEFAULT_OUTPUT)
    }

    /// Panel in SI units. `n_rf` is the fixed default for sweeps over it.
    pub fn panel(&self) -> Result<PanelConfig> {
        let p = &self.panel;
        let (n_rf, n_e) = self.experiment.panel_default();
        let freq = p.freq_ghz.unwrap_or(DEFAULT_FREQ_GHZ) * 1e9;
        if !(freq.is_finite() && freq > 0.0) {
            return Err(DmaError::config("panel.freq_ghz", "must be > 0"));
        }
        let cfg = self.panel_at(p.n_rf.unwrap_or(n_rf), p.n_e.unwrap_or(n_e), freq);
        cfg.validate().map_err(|e| match e {
            DmaError::Config { key, reason } => DmaError::Config {
                key: format!("panel.{key}"),
                reason,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    /// Panel with the file's relative geometry at another size or frequency.
    pub fn panel_at(&self, n_rf: usize, n_e: usize, freq: f64) -> PanelConfig {
        let p = &self.panel;
        let base = PanelConfig::new(n_rf, n_e, freq);
        let lambda = base.wavelength();
        let mut cfg = PanelConfig::with_spacing(
            n_rf,
            n_e,
            freq,
            p.d_rf.unwrap_or(1.0) * lambda,
            p.d_e.unwrap_or(0.2) * lambda,
        );
        if let Some(a) = p.wg_a {
            cfg.wg_a = a * lambda;
        }
        if let Some(b) = p.wg_b {
            cfg.wg_b = b * lambda;
        }
        if let Some(e) = p.eps_r {
            cfg.eps_r = e;
        }
        if let Some(m) = p.mu_r {
            cfg.mu_r = m;
        }
        if let Some(k) = p.coupling_scale {
            cfg.coupling_scale = k;
        }
        cfg
    }

    pub fn ue(&self) -> Result<UePosition> {
        let s = &self.scenario;
        UePosition::from_degrees(s.r, s.theta_deg, s.phi_deg).map_err(|e| DmaError::Config {
            key: "scenario".into(),
            reason: e.to_string(),
        })
    }

    pub fn profile(&self) -> RadiationProfile {
        self.scenario.profile
    }

    pub fn t_pilots(&self) -> usize {
        self.pilots.t.unwrap_or(DEFAULT_PILOTS)
    }

    pub fn powers_dbm(&self) -> Vec<f64> {
        match &self.pilots.p_max_dbm {
            Some(p) => p.values(),
            None => match self.experiment {
                Experiment::RmseCurve { .. } => vec![-40.0, -30.0, -20.0, -10.0, 0.0],
                _ => vec![DEFAULT_PMAX_DBM],
            },
        }
    }

    pub fn pilots_at(&self, p_dbm: f64) -> Result<PilotConfig> {
        PilotConfig::from_dbm(self.t_pilots(), p_dbm).map_err(|e| DmaError::Config {
            key: "pilots".into(),
            reason: e.to_string(),
        })
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        let r = match (self.noise.sigma2, self.noise.bandwidth_hz) {
            (Some(s), _) => NoiseModel::new(s),
            (None, b) => NoiseModel::thermal(b.unwrap_or(DEFAULT_BANDWIDTH_HZ)),
        };
        r.map_err(|e| DmaError::Config {
            key: "noise".into(),
            reason: e.to_string(),
        })
    }

    /// Search grid of an RMSE experiment; other kinds get the default grid.
    pub fn grid(&self) -> Result<SearchGrid> {
        let theta = self.scenario.theta_deg.to_radians();
        let default = GridSection::default();
        let g = match &self.experiment {
            Experiment::RmseCurve { grid, .. } => grid,
            _ => &default,
        };
        let base = match g.mode {
            GridMode::KnownTheta => SearchGrid::known_elevation(theta),
            GridMode::Full => SearchGrid::full(),
        };
        let r_lo = g.r_min.unwrap_or(1.0);
        let r_hi = g.r_max.unwrap_or(30.0);
        let grid = SearchGrid {
            r_axis: logspace(r_lo, r_hi, g.r_nodes.unwrap_or(base.r_axis.len())),
            theta_axis: match (g.mode, g.theta_nodes) {
                (GridMode::Full, Some(n)) => linspace(10f64.to_radians(), 80f64.to_radians(), n),
                _ => base.theta_axis,
            },
            phi_axis: linspace(0.0, std::f64::consts::PI, g.phi_nodes.unwrap_or(base.phi_axis.len())),
            refine_rounds: g.refine_rounds.unwrap_or(base.refine_rounds),
            refine_shrink: g.refine_shrink.unwrap_or(base.refine_shrink),
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Coordinates treated as unknown by the bound.
    pub fn unknowns(&self) -> Result<Vec<Param>> {
        Ok(match &self.experiment {
            Experiment::PebSweep { known_theta: false, .. } => vec![Param::Range, Param::Elevation, Param::Azimuth],
            Experiment::RmseCurve { .. } => self.grid()?.unknowns(),
            _ => vec![Param::Range, Param::Azimuth],
        })
    }

    /// Re-validate every cross-field constraint of the owning modules.
    pub fn validate(&self) -> Result<()> {
        self.panel()?;
        self.ue()?;
        self.noise()?;
        if self.t_pilots() == 0 {
            return Err(DmaError::config("pilots.t", "must be at least 1"));
        }
        let powers = self.powers_dbm();
        if powers.is_empty() || powers.iter().any(|p| !p.is_finite()) {
            return Err(DmaError::config("pilots.p_max_dbm", "must be finite and non-empty"));
        }
        for p in &powers {
            self.pilots_at(*p)?;
        }
        self.solver.validate()?;
        if let Some(out) = &self.output {
            if out.is_empty() {
                return Err(DmaError::config("output", "must not be empty"));
            }
        }
        match &self.experiment {
            Experiment::ApproxError { freqs_ghz, orders, .. } => {
                if freqs_ghz.is_empty() || freqs_ghz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
                    return Err(DmaError::config("experiment.freqs_ghz", "frequencies must be > 0 and non-empty"));
                }
                if orders.is_empty() || orders.contains(&0) {
                    return Err(DmaError::config("experiment.orders", "orders must be ≥ 1 and non-empty"));
                }
                for f in freqs_ghz {
                    let (n_rf, n_e) = (self.panel()?.n_rf, self.panel()?.n_e);
                    self.panel_at(n_rf, n_e, f * 1e9).validate().map_err(|e| DmaError::Config {
                        key: "experiment.freqs_ghz".into(),
                        reason: format!("{f} GHz: {e}"),
                    })?;
                }
            }
            Experiment::Design => {
                if powers.len() != 1 {
                    return Err(DmaError::config("pilots.p_max_dbm", "design takes a single power"));
                }
            }
            Experiment::PebSweep { nrf, variants, .. } => {
                if nrf.is_empty() || nrf.contains(&0) {
                    return Err(DmaError::config("experiment.nrf", "values must be ≥ 1 and non-empty"));
                }
                if variants.is_empty() {
                    return Err(DmaError::config("experiment.variants", "must be non-empty"));
                }
            }
            Experiment::RmseCurve { variants, trials, .. } => {
                if *trials == 0 {
                    return Err(DmaError::config("experiment.trials", "must be at least 1"));
                }
                if variants.is_empty() {
                    return Err(DmaError::config("experiment.variants", "must be non-empty"));
                }
                self.grid()?;
            }
        }
        Ok(())
    }
}
