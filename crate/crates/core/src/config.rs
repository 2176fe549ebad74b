//! TOML run configuration with strict keys, defaults everywhere and
//! dotted-path overrides.

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interferometry::CountModel;
use crate::model::{
    self, ProfileConfig, ProfileFamily, SystemParams, VelocityEnsemble, DEFAULT_RAMP_CENTER,
    DEFAULT_RAMP_WIDTH, DEFAULT_THETA_TOL,
};
use crate::pde::{EngineSettings, PumpMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Pde,
    Adiabatic,
    #[default]
    Compare,
    Measure,
    Sweep,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Pde => "pde",
            Scenario::Adiabatic => "adiabatic",
            Scenario::Compare => "compare",
            Scenario::Measure => "measure",
            Scenario::Sweep => "sweep",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pde" => Ok(Scenario::Pde),
            "adiabatic" => Ok(Scenario::Adiabatic),
            "compare" => Ok(Scenario::Compare),
            "measure" => Ok(Scenario::Measure),
            "sweep" => Ok(Scenario::Sweep),
            other => Err(Error::invalid("scenario", format!("unknown scenario `{other}`"))),
        }
    }
}

/// Control-field block. Without explicit endpoints the profile ramps from
/// `tan θ = theta_tol` to `tan θ = 1/theta_tol` at fixed `vartheta0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileBlock {
    pub family: ProfileFamily,
    pub vartheta0: f64,
    pub theta_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega01: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega02: Option<[f64; 2]>,
    pub center: f64,
    pub width: f64,
}

impl Default for ProfileBlock {
    fn default() -> Self {
        Self {
            family: ProfileFamily::Tanh,
            vartheta0: FRAC_PI_4,
            theta_tol: DEFAULT_THETA_TOL,
            omega01: None,
            omega02: None,
            center: DEFAULT_RAMP_CENTER,
            width: DEFAULT_RAMP_WIDTH,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleBlock {
    /// Odd number of velocity classes.
    pub classes: usize,
    /// Relative standard deviation of the velocity distribution.
    pub spread: f64,
    /// Largest allowed `|v_l − v₀|/v₀`.
    pub max_rel_width: f64,
}

impl Default for EnsembleBlock {
    fn default() -> Self {
        Self {
            classes: 1,
            spread: 0.0,
            max_rel_width: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseBlock {
    pub amplitude1: f64,
    pub amplitude2: f64,
    pub phase1: f64,
    pub phase2: f64,
    /// FWHM in units of the polariton transit time `τ(L)`.
    pub fwhm_transits: f64,
    /// Pulse center in units of the FWHM.
    pub center_fwhms: f64,
    /// Sets `ε₂ = tan ϑ(0) ε₁`, ignoring `amplitude2` and `phase2`.
    pub matched: bool,
}

impl Default for PulseBlock {
    fn default() -> Self {
        Self {
            amplitude1: 1.0,
            amplitude2: 1.0,
            phase1: 0.0,
            phase2: 0.0,
            fwhm_transits: 50.0,
            center_fwhms: 2.0,
            matched: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsBlock {
    pub z_points: usize,
    pub cfl: f64,
    pub pump: PumpMode,
    /// Upper bound on recorded time samples.
    pub samples: usize,
    /// Integration end; defaults to the pulse tail plus one transit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Recorded positions in addition to `0`, `delta_z` and `L`.
    pub probes: Vec<f64>,
    /// Position where the closed form takes over from the entrance transient.
    pub delta_z: f64,
    /// Residual tolerance of the entrance transient diagnostics.
    pub tolerance: f64,
    pub weak_threshold: f64,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        Self {
            z_points: 512,
            cfl: 0.9,
            pump: PumpMode::Frozen,
            samples: 4000,
            horizon: None,
            probes: Vec::new(),
            delta_z: 0.0,
            tolerance: 1e-3,
            weak_threshold: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementBlock {
    pub eps0: f64,
    pub k_total: u64,
    pub trials: u64,
    pub seed: u64,
    /// Relative phase of the per-trial study.
    pub phi_true: f64,
    /// Phase grid of the intensity table.
    pub phases: Vec<f64>,
    /// Totals of the RMSE-vs-k study.
    pub k_values: Vec<u64>,
    /// Common channel loss `α₁`.
    pub alpha1: f64,
    pub count_model: CountModel,
    /// Poisson exposure time (`count_model = "poisson"`).
    pub exposure: f64,
}

impl Default for MeasurementBlock {
    fn default() -> Self {
        use std::f64::consts::PI;
        Self {
            eps0: 1.0,
            k_total: 1000,
            trials: 1000,
            seed: 1,
            phi_true: PI / 3.0,
            phases: vec![0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI],
            k_values: vec![100, 1000, 10_000, 100_000],
            alpha1: 0.0,
            count_model: CountModel::Binomial,
            exposure: 1000.0,
        }
    }
}

/// Two-photon-detuning scan of the loss integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaBlock {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub count: usize,
    /// Common loss rate `γ₂ = γ₄` used for the scan.
    pub gamma: f64,
}

impl Default for AlphaBlock {
    fn default() -> Self {
        Self {
            sigma_min: 1e-4,
            sigma_max: 1e-2,
            count: 20,
            gamma: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    /// Dotted config key, e.g. `params.v0`.
    pub parameter: String,
    /// Explicit values; if empty, `count` points from `start` to `end`.
    pub values: Vec<f64>,
    pub start: f64,
    pub end: f64,
    pub count: usize,
    pub log: bool,
    pub target: Scenario,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            parameter: "measurement.phi_true".into(),
            values: Vec::new(),
            start: 0.0,
            end: std::f64::consts::PI,
            count: 0,
            log: false,
            target: Scenario::Measure,
        }
    }
}

impl SweepBlock {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !self.values.is_empty() {
            return Ok(self.values.clone());
        }
        match self.count {
            0 => Err(Error::EmptySweep),
            1 => Ok(vec![self.start]),
            n => {
                let (a, b) = if self.log {
                    if !(self.start > 0.0 && self.end > 0.0) {
                        return Err(Error::invalid("sweep.start", "log sweep needs positive bounds"));
                    }
                    (self.start.ln(), self.end.ln())
                } else {
                    (self.start, self.end)
                };
                Ok((0..n)
                    .map(|i| {
                        let x = a + (b - a) * i as f64 / (n - 1) as f64;
                        if self.log {
                            x.exp()
                        } else {
                            x
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub params: SystemParams,
    pub profile: ProfileBlock,
    pub ensemble: EnsembleBlock,
    pub pulses: PulseBlock,
    pub numerics: NumericsBlock,
    pub measurement: MeasurementBlock,
    pub alpha: AlphaBlock,
    pub sweep: SweepBlock,
}

fn check(ok: bool, field: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(field, reason))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let pr = &self.profile;
        check(pr.theta_tol > 0.0 && pr.theta_tol < 1.0, "profile.theta_tol", "must lie in (0, 1)")?;
        check(pr.omega01.is_some() == pr.omega02.is_some(), "profile.omega02", "give both envelopes or neither")?;
        self.build_profile()?;
        self.ensemble()?;
        let pu = &self.pulses;
        check(pu.amplitude1 >= 0.0 && pu.amplitude1.is_finite(), "pulses.amplitude1", "must be >= 0")?;
        check(pu.amplitude2 >= 0.0 && pu.amplitude2.is_finite(), "pulses.amplitude2", "must be >= 0")?;
        check(pu.fwhm_transits > 0.0 && pu.fwhm_transits.is_finite(), "pulses.fwhm_transits", "must be > 0")?;
        check(pu.center_fwhms >= 0.0 && pu.center_fwhms.is_finite(), "pulses.center_fwhms", "must be >= 0")?;
        let nu = &self.numerics;
        check(nu.cfl > 0.0 && nu.cfl <= 1.0, "numerics.cfl", "must lie in (0, 1]")?;
        check(nu.samples >= 2, "numerics.samples", "must be >= 2")?;
        check(nu.horizon.map_or(true, |h| h > 0.0), "numerics.horizon", "must be > 0")?;
        let len = self.params.length;
        check(
            nu.probes.iter().all(|z| (0.0..=len).contains(z)),
            "numerics.probes",
            "positions must lie in [0, L]",
        )?;
        check((0.0..len).contains(&nu.delta_z), "numerics.delta_z", "must lie in [0, L)")?;
        check(nu.tolerance > 0.0, "numerics.tolerance", "must be > 0")?;
        check(nu.weak_threshold > 0.0, "numerics.weak_threshold", "must be > 0")?;
        let m = &self.measurement;
        check(m.eps0 > 0.0 && m.eps0.is_finite(), "measurement.eps0", "must be > 0")?;
        check(m.k_total >= 1, "measurement.k_total", "must be >= 1")?;
        check(m.trials >= crate::interferometry::MIN_TRIALS, "measurement.trials", "must be >= 100")?;
        check(m.k_values.iter().all(|&k| k >= 1), "measurement.k_values", "must be >= 1")?;
        check((0.0..=5.0).contains(&m.alpha1), "measurement.alpha1", "must lie in [0, 5]")?;
        check(m.exposure > 0.0, "measurement.exposure", "must be > 0")?;
        let a = &self.alpha;
        check(
            a.sigma_min > 0.0 && a.sigma_max >= a.sigma_min,
            "alpha.sigma_min",
            "need 0 < sigma_min <= sigma_max",
        )?;
        check(a.count >= 2, "alpha.count", "must be >= 2")?;
        check(a.gamma > 0.0, "alpha.gamma", "must be > 0")?;
        if self.scenario == Scenario::Sweep {
            check(self.sweep.target != Scenario::Sweep, "sweep.target", "sweeps cannot nest")?;
            self.sweep.points()?;
        }
        Ok(())
    }

    pub fn profile_config(&self) -> Result<ProfileConfig> {
        let pr = &self.profile;
        let points = self.numerics.z_points;
        let mut cfg = match (pr.omega01, pr.omega02) {
            (Some(o1), Some(o2)) => ProfileConfig {
                family: pr.family,
                omega01: o1,
                omega02: o2,
                center: pr.center,
                width: pr.width,
                points,
            },
            _ => ProfileConfig::transfer(&self.params, pr.family, pr.vartheta0, pr.theta_tol, points)?,
        };
        cfg.center = pr.center;
        cfg.width = pr.width;
        Ok(cfg)
    }

    pub fn build_profile(&self) -> Result<model::StokesProfile> {
        model::build_profiles(&self.profile_config()?, &self.params)
    }

    pub fn ensemble(&self) -> Result<VelocityEnsemble> {
        let e = VelocityEnsemble::gaussian(&self.params, self.ensemble.classes, self.ensemble.spread)?;
        e.validate(&self.params, self.ensemble.max_rel_width)?;
        Ok(e)
    }

    pub fn engine_settings(&self) -> EngineSettings {
        EngineSettings {
            cfl: self.numerics.cfl,
            pump: self.numerics.pump,
            weak_threshold: self.numerics.weak_threshold,
        }
    }
}

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string().trim_end().to_string())
}

/// Parses, applies `key=value` overrides and validates.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    // Deserializing the text itself keeps line numbers for schema errors.
    toml::from_str::<RunConfig>(text).map_err(parse_err)?;
    let mut value: toml::Table = text.parse().map_err(parse_err)?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg: RunConfig = toml::Value::Table(value).try_into().map_err(parse_err)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, overrides).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn to_toml(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(parse_err)
}

pub fn save_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    std::fs::write(path, to_toml(cfg)?)?;
    Ok(())
}

/// Sets a dotted key; the value is read as a TOML literal, or as a string if
/// it does not parse as one.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("override `{assignment}` is not key=value")))?;
    let value = parse_literal(raw.trim());
    set_path(table, key.trim(), value)
}

pub fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Parse(format!("malformed key `{key}`")));
    }
    let (last, parents) = parts.split_last().expect("non-empty key");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Parse(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Config with one numeric key replaced; integer fields accept integral values.
pub fn with_value(cfg: &RunConfig, key: &str, value: f64) -> Result<RunConfig> {
    let text = to_toml(cfg)?;
    let literal = if value.fract() == 0.0 && value.abs() < 9.0e15 && is_integer_key(cfg, key)? {
        toml::Value::Integer(value as i64)
    } else {
        toml::Value::Float(value)
    };
    let mut table: toml::Table = text.parse().map_err(parse_err)?;
    set_path(&mut table, key, literal)?;
    let out: RunConfig = toml::Value::Table(table).try_into().map_err(parse_err)?;
    out.validate()?;
    Ok(out)
}

fn is_integer_key(cfg: &RunConfig, key: &str) -> Result<bool> {
    let table: toml::Table = to_toml(cfg)?.parse().map_err(parse_err)?;
    let mut cur = &toml::Value::Table(table);
    for p in key.split('.') {
        cur = match cur.get(p) {
            Some(v) => v,
            None => return Ok(false),
        };
    }
    Ok(cur.is_integer())
}
