//! Physical parameters, Stokes-field profiles, mixing angles and velocity classes.
//!
//! Internal units: `c = 1`, `L = 1`, time in `L/c`, Rabi frequencies and
//! detunings in `c/L`. The collective coupling `G² = g₁²g₂²n` is the only
//! place the density enters the closed-form results.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Atom-field couplings, losses, beam kinematics and detunings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub g1: f64,
    pub g2: f64,
    pub gamma2: f64,
    pub gamma4: f64,
    /// Total atomic density of the stationary input beam.
    pub n: f64,
    /// Mean beam velocity `Σ ξ_l v_l`.
    pub v0: f64,
    pub c: f64,
    /// Central wavevector `k₀`; fixes `ħ/2m = v₀/k₀`.
    pub k0: f64,
    pub kp1: f64,
    pub kp2: f64,
    pub ks1: f64,
    pub ks2: f64,
    /// One-photon detuning `Δ` of the central class.
    pub detuning: f64,
    /// Two-photon detuning `δ` of the central class.
    pub two_photon_detuning: f64,
    pub length: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            g1: 1.0,
            g2: 1.0,
            gamma2: 0.0,
            gamma4: 0.0,
            n: 4.0e8,
            v0: 0.5,
            c: 1.0,
            k0: 1.0e3,
            kp1: 10.0,
            kp2: 10.0,
            ks1: 10.0,
            ks2: 10.0,
            detuning: 0.0,
            two_photon_detuning: 0.0,
            length: 1.0,
        }
    }
}

fn require(ok: bool, field: &str, reason: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(field, reason))
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("g1", self.g1),
            ("g2", self.g2),
            ("gamma2", self.gamma2),
            ("gamma4", self.gamma4),
            ("n", self.n),
            ("v0", self.v0),
            ("c", self.c),
            ("k0", self.k0),
            ("kp1", self.kp1),
            ("kp2", self.kp2),
            ("ks1", self.ks1),
            ("ks2", self.ks2),
            ("detuning", self.detuning),
            ("two_photon_detuning", self.two_photon_detuning),
            ("length", self.length),
        ];
        for (name, value) in finite {
            require(value.is_finite(), &format!("params.{name}"), "must be finite")?;
        }
        require(self.g1 > 0.0, "params.g1", "must be > 0")?;
        require(self.g2 > 0.0, "params.g2", "must be > 0")?;
        require(self.n > 0.0, "params.n", "must be > 0")?;
        require(self.c > 0.0, "params.c", "must be > 0")?;
        require(
            self.v0 > 0.0 && self.v0 < self.c,
            "params.v0",
            format!("must satisfy 0 < v0 < c = {}, got {}", self.c, self.v0),
        )?;
        require(self.gamma2 >= 0.0, "params.gamma2", "must be >= 0")?;
        require(self.gamma4 >= 0.0, "params.gamma4", "must be >= 0")?;
        require(self.k0 > 0.0, "params.k0", "must be > 0")?;
        require(self.length > 0.0, "params.length", "must be > 0")?;
        Ok(())
    }

    /// `G² = g₁²g₂²n`.
    pub fn collective_coupling_sq(&self) -> f64 {
        self.g1 * self.g1 * self.g2 * self.g2 * self.n
    }

    pub fn is_lossless_resonant(&self) -> bool {
        self.gamma2 == 0.0 && self.gamma4 == 0.0 && self.two_photon_detuning == 0.0
    }

    pub fn hbar_over_2m(&self) -> f64 {
        self.v0 / self.k0
    }

    /// Rabi frequency `Ω` at which `tan θ = 1`.
    pub fn crossover_omega(&self) -> f64 {
        (self.collective_coupling_sq() * self.v0 / self.c).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileFamily {
    Constant,
    Linear,
    Tanh,
}

/// Endpoint values and ramp shape of the two control envelopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub family: ProfileFamily,
    /// `[Ω₀₁(0), Ω₀₁(L)]`.
    pub omega01: [f64; 2],
    /// `[Ω₀₂(0), Ω₀₂(L)]`.
    pub omega02: [f64; 2],
    /// Tanh ramp center, absolute position.
    pub center: f64,
    /// Tanh ramp width.
    pub width: f64,
    pub points: usize,
}

pub const DEFAULT_THETA_TOL: f64 = 0.01;
pub const DEFAULT_RAMP_CENTER: f64 = 0.25;
pub const DEFAULT_RAMP_WIDTH: f64 = 0.15;

impl ProfileConfig {
    /// Endpoints that realize `tan θ(0) = θ_tol` and `tan θ(L) = 1/θ_tol` at a fixed `ϑ`.
    pub fn transfer(
        params: &SystemParams,
        family: ProfileFamily,
        vartheta0: f64,
        theta_tol: f64,
        points: usize,
    ) -> Result<Self> {
        if family == ProfileFamily::Constant {
            return Err(Error::invalid(
                "profile.family",
                "transfer endpoints need a ramp family (linear or tanh)",
            ));
        }
        if !(theta_tol > 0.0 && theta_tol < 1.0) {
            return Err(Error::invalid("profile.theta_tol", "must lie in (0, 1)"));
        }
        if !(0.0..=FRAC_PI_2).contains(&vartheta0) {
            return Err(Error::invalid("profile.vartheta0", "must lie in [0, pi/2]"));
        }
        let cross = params.crossover_omega();
        let start = cross / theta_tol;
        let end = cross * theta_tol;
        let (s, c) = vartheta0.sin_cos();
        Ok(Self {
            family,
            omega01: [start * c / params.g2, end * c / params.g2],
            omega02: [start * s / params.g1, end * s / params.g1],
            center: DEFAULT_RAMP_CENTER,
            width: DEFAULT_RAMP_WIDTH,
            points,
        })
    }

    pub fn constant(omega01: f64, omega02: f64, points: usize) -> Self {
        Self {
            family: ProfileFamily::Constant,
            omega01: [omega01, omega01],
            omega02: [omega02, omega02],
            center: DEFAULT_RAMP_CENTER,
            width: DEFAULT_RAMP_WIDTH,
            points,
        }
    }

    /// Ramp fraction `s(z)`, with `s(0) = 0` and `s(L) = 1` for the ramp families.
    fn ramp(&self, z: f64, length: f64) -> f64 {
        match self.family {
            ProfileFamily::Constant => 0.0,
            ProfileFamily::Linear => z / length,
            ProfileFamily::Tanh => {
                let lo = (-self.center / self.width).tanh();
                let hi = ((length - self.center) / self.width).tanh();
                (((z - self.center) / self.width).tanh() - lo) / (hi - lo)
            }
        }
    }
}

/// Control envelopes `Ω₀₁(z)`, `Ω₀₂(z)` sampled on the shared z-grid.
#[derive(Clone, Debug)]
pub struct StokesProfile {
    config: ProfileConfig,
    length: f64,
    z: Vec<f64>,
    omega01: Vec<f64>,
    omega02: Vec<f64>,
}

pub fn build_profiles(config: &ProfileConfig, params: &SystemParams) -> Result<StokesProfile> {
    if config.points < 16 {
        return Err(Error::invalid(
            "numerics.z_points",
            format!("grid needs at least 16 points, got {}", config.points),
        ));
    }
    for (name, pair) in [("profile.omega01", config.omega01), ("profile.omega02", config.omega02)] {
        if pair.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(name, "envelope values must be finite and non-negative"));
        }
    }
    if config.family == ProfileFamily::Tanh && !(config.width > 0.0) {
        return Err(Error::invalid("profile.width", "must be > 0"));
    }
    let length = params.length;
    let dz = length / (config.points - 1) as f64;
    let z: Vec<f64> = (0..config.points).map(|i| i as f64 * dz).collect();
    let mut profile = StokesProfile {
        config: config.clone(),
        length,
        omega01: Vec::with_capacity(z.len()),
        omega02: Vec::with_capacity(z.len()),
        z: Vec::new(),
    };
    for &zi in &z {
        let (a, b) = profile.eval(zi);
        if a < 0.0 || b < 0.0 {
            return Err(Error::invalid("profile", format!("negative envelope at z = {zi}")));
        }
        profile.omega01.push(a);
        profile.omega02.push(b);
    }
    profile.z = z;
    let last = profile.z.len() - 1;
    for i in 0..last {
        if combined_omega(profile.omega01[i], profile.omega02[i], params) <= 0.0 {
            return Err(Error::invalid(
                "profile",
                format!("Omega(z) vanishes at interior point z = {}", profile.z[i]),
            ));
        }
    }
    Ok(profile)
}

impl StokesProfile {
    /// Envelope values at arbitrary `z`, from the analytic family.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let s = self.config.ramp(z, self.length);
        let [a0, a1] = self.config.omega01;
        let [b0, b1] = self.config.omega02;
        (
            (a0 * (1.0 - s) + a1 * s).max(0.0),
            (b0 * (1.0 - s) + b1 * s).max(0.0),
        )
    }

    /// `Ω(z) = sqrt(g₁²Ω₀₂² + g₂²Ω₀₁²)`.
    pub fn omega(&self, z: f64, params: &SystemParams) -> f64 {
        let (a, b) = self.eval(z);
        combined_omega(a, b, params)
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn omega01(&self) -> &[f64] {
        &self.omega01
    }

    pub fn omega02(&self) -> &[f64] {
        &self.omega02
    }

    pub fn dz(&self) -> f64 {
        self.length / (self.z.len() - 1) as f64
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn config(&self) -> &ProfileConfig {
        &self.config
    }

    /// Index of the grid node nearest to `z`.
    pub fn nearest_index(&self, z: f64) -> usize {
        let i = (z / self.dz()).round();
        (i.max(0.0) as usize).min(self.z.len() - 1)
    }
}

pub fn combined_omega(omega01: f64, omega02: f64, params: &SystemParams) -> f64 {
    (params.g1 * params.g1 * omega02 * omega02 + params.g2 * params.g2 * omega01 * omega01).sqrt()
}

/// `ϑ` from `tan ϑ = g₁Ω₀₂ / (g₂Ω₀₁)`; `π/2` where `Ω₀₁ = 0`.
pub fn vartheta(omega01: f64, omega02: f64, params: &SystemParams) -> f64 {
    if omega01 == 0.0 {
        FRAC_PI_2
    } else {
        (params.g1 * omega02).atan2(params.g2 * omega01)
    }
}

/// `θ` from `tan²θ = (G²/Ω²)(v₀/c)`; `π/2` at `Ω = 0`, `0` at `Ω = ∞`.
pub fn theta(omega: f64, params: &SystemParams) -> f64 {
    if omega.is_infinite() {
        return 0.0;
    }
    params.crossover_omega().atan2(omega)
}

#[derive(Clone, Debug)]
pub struct MixingAngles {
    pub z: Vec<f64>,
    pub vartheta: Vec<f64>,
    pub theta: Vec<f64>,
}

pub fn mixing_angles(profile: &StokesProfile, params: &SystemParams) -> MixingAngles {
    let (vt, th) = profile
        .omega01()
        .iter()
        .zip(profile.omega02())
        .map(|(&a, &b)| (vartheta(a, b, params), theta(combined_omega(a, b, params), params)))
        .unzip();
    MixingAngles {
        z: profile.z().to_vec(),
        vartheta: vt,
        theta: th,
    }
}

/// `V_g = c(1 + (G²/Ω²)(v₀/c)) / (1 + G²/Ω²)`, evaluated in the form that is
/// exact at both limits.
pub fn group_velocity_from_omega(omega: f64, params: &SystemParams) -> f64 {
    if omega.is_infinite() {
        return params.c;
    }
    let q = omega * omega / params.collective_coupling_sq();
    params.c * (q + params.v0 / params.c) / (q + 1.0)
}

pub fn group_velocity(z: f64, profile: &StokesProfile, params: &SystemParams) -> f64 {
    group_velocity_from_omega(profile.omega(z, params), params)
}

/// `∫ dz / V_g(z)` over `[z_from, z_to]`.
pub fn propagation_delay(
    z_from: f64,
    z_to: f64,
    profile: &StokesProfile,
    params: &SystemParams,
) -> Result<f64> {
    if !(z_from <= z_to) {
        return Err(Error::invalid(
            "propagation_delay",
            format!("reversed interval [{z_from}, {z_to}]"),
        ));
    }
    let tol = 1e-12 * profile.length();
    if z_from < -tol || z_to > profile.length() + tol {
        return Err(Error::invalid(
            "propagation_delay",
            format!("interval [{z_from}, {z_to}] leaves [0, L]"),
        ));
    }
    let panels = ((z_to - z_from) / profile.dz()).ceil() as usize + 1;
    Ok(quad::gauss_legendre(
        |z| 1.0 / group_velocity(z, profile, params),
        z_from,
        z_to,
        panels,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityClass {
    pub k: f64,
    pub v: f64,
    pub weight: f64,
}

/// Discrete velocity classes `{k_l, ξ_l}` with `Σ ξ_l = 1`.
#[derive(Clone, Debug)]
pub struct VelocityEnsemble {
    classes: Vec<VelocityClass>,
    hbar_over_2m: f64,
}

pub const MAX_CLASSES: usize = 33;

impl VelocityEnsemble {
    pub fn monochromatic(params: &SystemParams) -> Self {
        Self {
            classes: vec![VelocityClass {
                k: params.k0,
                v: params.v0,
                weight: 1.0,
            }],
            hbar_over_2m: params.hbar_over_2m(),
        }
    }

    /// Gaussian weights on `count` symmetric classes spanning `±3·rel_spread·v₀`.
    pub fn gaussian(params: &SystemParams, count: usize, rel_spread: f64) -> Result<Self> {
        if count == 0 || count % 2 == 0 || count > MAX_CLASSES {
            return Err(Error::invalid(
                "ensemble.classes",
                format!("must be odd and in [1, {MAX_CLASSES}], got {count}"),
            ));
        }
        if count == 1 {
            return Ok(Self::monochromatic(params));
        }
        if !(rel_spread > 0.0 && rel_spread < 1.0 / 3.0) {
            return Err(Error::invalid("ensemble.spread", "must lie in (0, 1/3)"));
        }
        let half = (count / 2) as i64;
        let sigma = rel_spread * params.v0;
        let step = 3.0 * sigma / half as f64;
        let raw: Vec<(f64, f64)> = (-half..=half)
            .map(|j| {
                let dv = j as f64 * step;
                (params.v0 + dv, (-0.5 * (dv / sigma).powi(2)).exp())
            })
            .collect();
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        let h = params.hbar_over_2m();
        let classes = raw
            .into_iter()
            .map(|(v, w)| VelocityClass {
                k: v / h,
                v,
                weight: w / total,
            })
            .collect();
        Ok(Self {
            classes,
            hbar_over_2m: h,
        })
    }

    pub fn classes(&self) -> &[VelocityClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn mean_velocity(&self) -> f64 {
        self.classes.iter().map(|c| c.weight * c.v).sum()
    }

    pub fn max_relative_deviation(&self, v0: f64) -> f64 {
        self.classes
            .iter()
            .map(|c| (c.v - v0).abs() / v0)
            .fold(0.0, f64::max)
    }

    /// Checks normalization, mean velocity and narrowness.
    pub fn validate(&self, params: &SystemParams, max_rel_width: f64) -> Result<()> {
        let total: f64 = self.classes.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 || self.classes.iter().any(|c| c.weight < 0.0) {
            return Err(Error::invalid("ensemble", format!("weights sum to {total}, not 1")));
        }
        let mean = self.mean_velocity();
        if ((mean - params.v0) / params.v0).abs() > 1e-12 {
            return Err(Error::invalid(
                "ensemble",
                format!("mean velocity {mean} differs from v0 = {}", params.v0),
            ));
        }
        let width = self.max_relative_deviation(params.v0);
        if width > max_rel_width {
            return Err(Error::invalid(
                "ensemble.spread",
                format!("max |v_l - v0|/v0 = {width} exceeds {max_rel_width}"),
            ));
        }
        Ok(())
    }

    /// Kinetic frequency `ω_l = (ħ/2m) k_l²`.
    pub fn kinetic_frequency(&self, l: usize) -> f64 {
        self.hbar_over_2m * self.classes[l].k * self.classes[l].k
    }

    /// `φ_l(z, t) = k_l z − ω_l t`.
    pub fn phase(&self, l: usize, z: f64, t: f64) -> f64 {
        self.classes[l].k * z - self.kinetic_frequency(l) * t
    }

    /// Transport speeds of `[Φ₁ˡ, Φ₂ˡ, Φ₃ˡ, Φ₄ˡ]`.
    pub fn speeds(&self, l: usize, params: &SystemParams) -> [f64; 4] {
        let v = self.classes[l].v;
        let h = self.hbar_over_2m;
        [v, v + h * params.kp1, v, v + h * params.kp2]
    }

    /// Class detunings `(Δ_l, δ_l)`; the central class carries the configured values.
    pub fn detunings(&self, l: usize, params: &SystemParams) -> (f64, f64) {
        // ħ(k_l − k₀)/m = 2 (v_l − v₀)
        let dv2 = 2.0 * (self.classes[l].v - params.v0);
        (
            params.detuning + dv2 * params.kp1,
            params.two_photon_detuning + dv2 * (params.kp1 - params.ks1),
        )
    }
}
