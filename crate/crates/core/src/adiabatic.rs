//! Closed-form dark-state-polariton transfer and its detuning/loss corrections.
//!
//! In the adiabatic limit the combined probe `ε₁₂ = cos ϑ ε₁ + sin ϑ ε₂` is
//! carried at the group velocity and rescaled by `cos θ(z)`; at the output the
//! excitation sits entirely in the `|3⟩` matter wave.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{self, propagation_delay, StokesProfile, SystemParams};
use crate::quad;
use crate::series::TimeSeries;

pub fn combined_field(eps1: Complex64, eps2: Complex64, vartheta: f64) -> Complex64 {
    let (s, c) = vartheta.sin_cos();
    eps1 * c + eps2 * s
}

/// `ε₁₂(δ, t)` from the entrance pulses, shifted by `τ(δ)` and scaled by `cos θ(δ)/cos θ(0)`.
pub fn initial_combined_field(
    eps1_in: &TimeSeries,
    eps2_in: &TimeSeries,
    profile: &StokesProfile,
    params: &SystemParams,
    delta_z: f64,
) -> Result<TimeSeries> {
    if !eps1_in.same_grid(eps2_in) {
        return Err(Error::invalid("eps2_in", "input series must share one time grid"));
    }
    let (a0, b0) = profile.eval(0.0);
    let vartheta0 = model::vartheta(a0, b0, params);
    let theta0 = model::theta(profile.omega(0.0, params), params);
    let theta_d = model::theta(profile.omega(delta_z, params), params);
    let scale = theta_d.cos() / theta0.cos();
    let tau_d = propagation_delay(0.0, delta_z, profile, params)?;
    let values = eps1_in
        .values
        .iter()
        .zip(&eps2_in.values)
        .map(|(&e1, &e2)| combined_field(e1, e2, vartheta0) * scale)
        .collect();
    Ok(TimeSeries::new(eps1_in.t0 + tau_d, eps1_in.dt, values))
}

/// Closed-form propagation of `ε₁₂` from `z = δ` to the output.
#[derive(Clone, Debug)]
pub struct PolaritonSolution {
    eps12_delta: TimeSeries,
    delta_z: f64,
    theta_delta: f64,
    /// `τ(L) = τ(δ) + ∫_δ^L dz/V_g`.
    pub tau_l: f64,
    tau_from_delta: f64,
    profile: StokesProfile,
    params: SystemParams,
}

pub fn propagate_polariton(
    eps12_at_delta: TimeSeries,
    profile: &StokesProfile,
    params: &SystemParams,
    delta_z: f64,
) -> Result<PolaritonSolution> {
    let theta_delta = model::theta(profile.omega(delta_z, params), params);
    if theta_delta.cos() <= 0.0 || (std::f64::consts::FRAC_PI_2 - theta_delta).abs() < 1e-15 {
        return Err(Error::invalid(
            "delta_z",
            "cos theta(delta) = 0: degenerate normalization point",
        ));
    }
    let tau_delta = propagation_delay(0.0, delta_z, profile, params)?;
    let tau_from_delta = propagation_delay(delta_z, profile.length(), profile, params)?;
    Ok(PolaritonSolution {
        eps12_delta: eps12_at_delta,
        delta_z,
        theta_delta,
        tau_l: tau_delta + tau_from_delta,
        tau_from_delta,
        profile: profile.clone(),
        params: params.clone(),
    })
}

impl PolaritonSolution {
    fn ratio(&self, z: f64) -> f64 {
        let theta = model::theta(self.profile.omega(z, &self.params), &self.params);
        theta.cos() / self.theta_delta.cos()
    }

    /// `ε₁₂(z, t) = ε₁₂(δ, t − τ(z, δ)) cos θ(z) / cos θ(δ)` for `z ≥ δ`.
    pub fn eps12(&self, z: f64, t: f64) -> Result<Complex64> {
        let tau = propagation_delay(self.delta_z, z, &self.profile, &self.params)?;
        Ok(self.eps12_delta.interp_checked(t - tau)? * self.ratio(z))
    }

    pub fn eps12_delta(&self) -> &TimeSeries {
        &self.eps12_delta
    }

    /// Output matter wave `Φ₃(L, t) = −(G/Ω(L)) ε₁₂(L, t)`, written as
    /// `−sqrt(c/v₀) tan θ(L) ε₁₂(L, t)` so that `Ω(L) = 0` is allowed.
    pub fn phi3_out(&self) -> TimeSeries {
        let p = &self.params;
        let theta_l = model::theta(self.profile.omega(self.profile.length(), p), p);
        let factor = -(p.c / p.v0).sqrt() * theta_l.sin() / self.theta_delta.cos();
        self.eps12_delta
            .clone()
            .shifted(self.tau_from_delta)
            .scaled(Complex64::new(factor, 0.0))
    }
}

/// `Φ₃(t) = −sqrt(c/v₀) (cos ϑ₀ ε₁(0, t − τ(L)) + sin ϑ₀ ε₂(0, t − τ(L)))`.
pub fn output_matter_wave(
    eps1_in: &TimeSeries,
    eps2_in: &TimeSeries,
    vartheta0: f64,
    params: &SystemParams,
    tau_l: f64,
) -> Result<TimeSeries> {
    if !eps1_in.same_grid(eps2_in) {
        return Err(Error::invalid("eps2_in", "input series must share one time grid"));
    }
    let scale = -(params.c / params.v0).sqrt();
    let values = eps1_in
        .values
        .iter()
        .zip(&eps2_in.values)
        .map(|(&e1, &e2)| combined_field(e1, e2, vartheta0) * scale)
        .collect();
    Ok(TimeSeries::new(eps1_in.t0 + tau_l, eps1_in.dt, values))
}

/// Output density `|Ψ₃|²_out` for probe amplitudes with relative phase `φ`.
pub fn output_intensity(
    eps1_amp: f64,
    eps2_amp: f64,
    rel_phase: f64,
    vartheta0: f64,
    params: &SystemParams,
) -> f64 {
    let (s, c) = vartheta0.sin_cos();
    let flux = c * c * eps1_amp * eps1_amp
        + s * s * eps2_amp * eps2_amp
        + 2.0 * c * s * eps1_amp * eps2_amp * rel_phase.cos();
    (params.c * flux / params.v0).max(0.0)
}

/// Loss and phase exponents of `ε₁₂ → e^{−α₁ + iα₂} ε₁₂`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct LossCorrection {
    pub alpha1: f64,
    pub alpha2: f64,
    /// `σ = δγ / (g₁²n v₀/c)`.
    pub sigma: f64,
    /// Opacity `η = g₁²nL / (γc)`.
    pub eta: f64,
}

impl LossCorrection {
    /// `η|σ|/2`, evaluated as `|δ|L/(2v₀)` so that `γ = 0` stays finite.
    pub fn bound(&self, params: &SystemParams) -> f64 {
        params.two_photon_detuning.abs() * params.length / (2.0 * params.v0)
    }

    /// Intensity factor `e^{−2α₁}` applied to both output channels.
    pub fn intensity_factor(&self) -> f64 {
        (-2.0 * self.alpha1).exp()
    }
}

fn common_loss_rate(params: &SystemParams) -> Result<f64> {
    if params.gamma2 != params.gamma4 {
        return Err(Error::invalid(
            "params.gamma4",
            "loss corrections assume gamma2 = gamma4",
        ));
    }
    Ok(params.gamma2)
}

/// Lowest-order contribution of a constant two-photon detuning to
/// `Ω₀₁Φ₂ˡ + Ω₀₂Φ₄ˡ` at position `z` for a class of weight `ξ_l` and phase `φ_l`.
pub fn detuning_correction(
    z: f64,
    eps12: Complex64,
    xi: f64,
    phase: f64,
    params: &SystemParams,
    profile: &StokesProfile,
) -> Result<Complex64> {
    let gamma = common_loss_rate(params)?;
    let delta = params.two_photon_detuning;
    if delta == 0.0 {
        return Ok(Complex64::default());
    }
    let (a, b) = profile.eval(z);
    let s = a * a + b * b;
    let denom = Complex64::new(s - delta * params.detuning, gamma * delta);
    if denom.norm() == 0.0 {
        return Err(Error::Singular(format!(
            "Omega01^2 + Omega02^2 = delta * Delta at z = {z} with gamma * delta = 0"
        )));
    }
    let omega = model::combined_omega(a, b, params);
    let coupling = params.g1 * params.g2 * params.n.sqrt() / omega;
    let fraction = Complex64::new(s * delta, 0.0) / denom;
    Ok(fraction * coupling * eps12 * xi * Complex64::from_polar(1.0, -phase))
}

/// Local rate `∂_t ε₁₂ / ε₁₂` contributed by the detuning correction, summed
/// over a class set with weights `ξ_l` (phases cancel against `Φ₁ˡ†`).
pub fn detuning_rate(z: f64, weights: &[f64], params: &SystemParams, profile: &StokesProfile) -> Result<Complex64> {
    let mut total = Complex64::default();
    let omega = profile.omega(z, params);
    let prefactor = params.g1 * params.g2 / omega;
    for &xi in weights {
        let c = detuning_correction(z, Complex64::new(1.0, 0.0), xi, 0.0, params, profile)?;
        total += Complex64::new(0.0, -prefactor) * c * params.n.sqrt() * xi;
    }
    Ok(total)
}

/// `α₁`, `α₂` integrals for `Δ = 0`, implemented as printed:
///
/// `α₁ = ∫ dz sin²θ δ²γ S / (v₀ (S⁴ + δ²γ²))`,
/// `α₂ = ∫ dz sin²θ S² δ² / (v₀ (S⁴ + δ²γ²))`, with `S = Ω₀₁² + Ω₀₂²`.
pub fn alpha_integrals(params: &SystemParams, profile: &StokesProfile) -> Result<LossCorrection> {
    if params.detuning != 0.0 {
        return Err(Error::invalid(
            "params.detuning",
            "alpha integrals are only defined for Delta = 0",
        ));
    }
    let gamma = common_loss_rate(params)?;
    let delta = params.two_photon_detuning;
    let v0 = params.v0;
    let integrand = |z: f64, second: bool| {
        let (a, b) = profile.eval(z);
        let s = a * a + b * b;
        let sin2 = model::theta(model::combined_omega(a, b, params), params).sin().powi(2);
        let denom = v0 * (s.powi(4) + delta * delta * gamma * gamma);
        if denom == 0.0 {
            return 0.0;
        }
        if second {
            sin2 * s * s * delta * delta / denom
        } else {
            sin2 * delta * delta * gamma * s / denom
        }
    };
    let panels = profile.z().len() - 1;
    let length = profile.length();
    let alpha1 = quad::gauss_legendre(|z| integrand(z, false), 0.0, length, panels);
    let alpha2 = quad::gauss_legendre(|z| integrand(z, true), 0.0, length, panels);
    let g1sq_n = params.g1 * params.g1 * params.n;
    Ok(LossCorrection {
        alpha1,
        alpha2,
        sigma: delta * gamma / (g1sq_n * v0 / params.c),
        eta: g1sq_n * length / (gamma * params.c),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidityReport {
    /// Residual two-photon detunings `δ_j = Δv (k_pj − k_sj)`.
    pub residual_detunings: [f64; 2],
    /// `min_j 1/(|k_pj − k_sj| L)`; infinite for matched geometry.
    pub bound: f64,
    /// `(Δv/v₀) / bound`.
    pub ratio: f64,
    pub passes: bool,
}

pub const DEFAULT_DOPPLER_MARGIN: f64 = 0.1;

pub fn doppler_validity(
    params: &SystemParams,
    kp: [f64; 2],
    ks: [f64; 2],
    dv: f64,
    margin: f64,
) -> ValidityReport {
    let mismatch = [kp[0] - ks[0], kp[1] - ks[1]];
    let bound = mismatch
        .iter()
        .map(|m| 1.0 / (m.abs() * params.length))
        .fold(f64::INFINITY, f64::min);
    let rel = dv.abs() / params.v0;
    let ratio = if bound.is_infinite() || rel == 0.0 { 0.0 } else { rel / bound };
    ValidityReport {
        residual_detunings: [dv * mismatch[0], dv * mismatch[1]],
        bound,
        ratio,
        passes: ratio <= margin,
    }
}
