//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or exceeds its time budget.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use lambda_beam::adiabatic::{self, output_intensity};
use lambda_beam::interferometry::{self as interf, ChannelIntensities};
use lambda_beam::model::{
    build_profiles, ProfileConfig, ProfileFamily, StokesProfile, SystemParams, VelocityEnsemble,
};
use lambda_beam::pde::{self, BoundaryInput, Engine, EngineSettings, FieldId, GaussianPulse, RunRecord};
use lambda_beam::run::{alpha_scan, loglog_slope};
use lambda_beam::series::{relative_l2, TimeSeries};

type Outcome = Result<(bool, String), String>;

fn transfer_profile(params: &SystemParams, vartheta0: f64, points: usize) -> StokesProfile {
    let cfg = ProfileConfig::transfer(params, ProfileFamily::Tanh, vartheta0, 0.01, points).unwrap();
    build_profiles(&cfg, params).unwrap()
}

fn pulse(amplitude: f64, fwhm: f64) -> GaussianPulse {
    GaussianPulse {
        amplitude,
        center: 2.0 * fwhm,
        fwhm,
        phase: 0.0,
    }
}

fn simulate(
    params: &SystemParams,
    profile: &StokesProfile,
    boundary: BoundaryInput,
    probes: &[f64],
) -> Result<RunRecord, String> {
    let ens = VelocityEnsemble::monochromatic(params);
    let eng = Engine::new(params, profile, &ens, EngineSettings::default()).map_err(|e| e.to_string())?;
    let tau = eng.transit_time().map_err(|e| e.to_string())?;
    let horizon = boundary.support_end() + tau + 1.0;
    eng.run(&boundary, horizon, probes, 4000).map_err(|e| e.to_string())
}

/// I₊/I₀ at the five reference phases; complementarity exact.
fn closed_form_channels() -> Outcome {
    let p = SystemParams::default();
    let phases = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI];
    let expected = [0.0, 0.1464, 0.5, 0.8536, 1.0];
    let mut worst = 0.0f64;
    let mut exact = true;
    for (phi, want) in phases.iter().zip(expected) {
        let c = interf::channel_intensities(*phi, 1.7, &p).map_err(|e| e.to_string())?;
        let (ip, im) = c.pair();
        worst = worst.max((ip / c.total - want).abs());
        exact &= ip + im == p.v0 / p.c * 1.7 * 1.7;
    }
    Ok((
        worst <= 1e-4 && exact,
        format!("max |I+/I0 - ref| = {worst:.2e}, I+ + I- == I0: {exact}"),
    ))
}

/// Output flux never exceeds input flux; limiting cases at coupling ratio 10³.
fn flux_inequality() -> Outcome {
    let p = SystemParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut violations = 0usize;
    let samples = 20_000;
    for _ in 0..samples {
        let e1: f64 = rng.gen_range(0.0..5.0);
        let e2: f64 = rng.gen_range(0.0..5.0);
        let phi: f64 = rng.gen_range(-PI..PI);
        let v: f64 = rng.gen_range(0.0..FRAC_PI_2);
        let out = p.v0 * output_intensity(e1, e2, phi, v, &p);
        let input = p.c * (e1 * e1 + e2 * e2);
        if out > input * (1.0 + 1e-12) + 1e-300 {
            violations += 1;
        }
    }
    // (a) g₂Ω₀₁ = 10³ g₁Ω₀₂, only ε₁ carried; (b) the mirror case.
    let ratio = 1e3f64;
    let case_a = (1.0 / ratio).atan();
    let case_b = ratio.atan();
    let mut dev_a = 0.0f64;
    let mut dev_b = 0.0f64;
    for amp in [0.1, 1.0, 3.0] {
        let a = p.v0 * output_intensity(amp, 0.0, 0.0, case_a, &p);
        dev_a = dev_a.max((a - p.c * amp * amp).abs() / (p.c * amp * amp));
        let b = p.v0 * output_intensity(0.0, amp, 0.0, case_b, &p);
        dev_b = dev_b.max((b - p.c * amp * amp).abs() / (p.c * amp * amp));
    }
    // The other probe leaks in only through the interference term, O(1/ratio).
    let leak = (p.v0 * output_intensity(1.0, 1.0, 0.0, case_a, &p) - p.c) / p.c;
    Ok((
        violations == 0 && dev_a <= 1e-6 && dev_b <= 1e-6,
        format!(
            "{samples} samples, {violations} violations; case (a) rel dev {dev_a:.2e}, case (b) {dev_b:.2e}; \
             cross-term with equal probes {leak:.2e}"
        ),
    ))
}

/// Simulated Φ₃(L, ·) against the closed form over three pulse doublings.
fn pde_vs_closed_form() -> Outcome {
    let p = SystemParams::default();
    let prof = transfer_profile(&p, FRAC_PI_4, 512);
    let tau = lambda_beam::model::propagation_delay(0.0, 1.0, &prof, &p).map_err(|e| e.to_string())?;
    let (a, b) = prof.eval(0.0);
    let tan0 = lambda_beam::model::vartheta(a, b, &p).tan();
    let multiples = [50.0, 100.0, 200.0, 400.0];
    let results = multiples
        .par_iter()
        .map(|m| {
            let fwhm = m * tau;
            let boundary = BoundaryInput::new(pulse(1.0, fwhm), pulse(tan0, fwhm));
            let rec = simulate(&p, &prof, boundary, &[0.0, 1.0])?;
            let h = rec.record_dt();
            let e1 = TimeSeries::new(0.0, h, rec.eps1_in.clone());
            let e2 = TimeSeries::new(0.0, h, rec.eps2_in.clone());
            let init = adiabatic::initial_combined_field(&e1, &e2, &prof, &p, 0.0).map_err(|e| e.to_string())?;
            let oracle = adiabatic::propagate_polariton(init, &prof, &p, 0.0)
                .map_err(|e| e.to_string())?
                .phi3_out();
            let sim = rec.probe(1.0).map_err(|e| e.to_string())?;
            let sim = sim.field(FieldId::Phi { kind: 3, class: 0 }).unwrap();
            let reference: Vec<Complex64> = rec.times.iter().map(|&t| oracle.interp_or_zero(t)).collect();
            Ok(relative_l2(sim, &reference))
        })
        .collect::<Result<Vec<f64>, String>>()?;
    let within = results.iter().all(|r| *r <= 0.05);
    let monotone = results.windows(2).all(|w| w[1] < w[0]);
    let list: Vec<String> = results.iter().map(|r| format!("{r:.9e}")).collect();
    Ok((
        within && monotone,
        format!("FWHM = {{50,100,200,400}} tau(L): rel L2 = [{}], decreasing: {monotone}", list.join(", ")),
    ))
}

/// Case (a) with a mismatched second probe.
fn non_adiabatic_damping() -> Outcome {
    let p = SystemParams {
        gamma2: 100.0,
        gamma4: 100.0,
        ..Default::default()
    };
    let vartheta0 = (1e-3f64).atan();
    let prof = transfer_profile(&p, vartheta0, 512);
    let (a, b) = prof.eval(0.0);
    let cos0 = lambda_beam::model::vartheta(a, b, &p).cos();
    let tau = lambda_beam::model::propagation_delay(0.0, 1.0, &prof, &p).map_err(|e| e.to_string())?;
    let fwhm = 20.0 * tau;
    let rec = simulate(&p, &prof, BoundaryInput::new(pulse(1.0, fwhm), pulse(1.0, fwhm)), &[0.0, 0.25, 1.0])?;
    let rep = pde::entrance_transient_diagnostics(&rec, 0.25, 1e-3).map_err(|e| e.to_string())?;
    let damped = rep.damped_eps2.unwrap_or(0.0);
    let transferred = rec.atom_flux_out / rec.flux_in_eps1;
    Ok((
        cos0 >= 1.0 - 1e-6 && damped >= 0.95 && transferred >= 0.9,
        format!("cos vartheta(0) = 1 - {:.2e}, eps2 absorbed before L/4: {damped:.6}, eps1 transferred: {transferred:.4}", 1.0 - cos0),
    ))
}

/// Excitation balance on three grids.
fn conservation() -> Outcome {
    let p = SystemParams::default();
    let grids = [512usize, 1024, 2048];
    let imbalance = grids
        .par_iter()
        .map(|&n| {
            let prof = transfer_profile(&p, FRAC_PI_4, n);
            let tau = lambda_beam::model::propagation_delay(0.0, 1.0, &prof, &p).map_err(|e| e.to_string())?;
            let fwhm = 5.0 * tau;
            let rec = simulate(&p, &prof, BoundaryInput::new(pulse(1.0, fwhm), pulse(1.0, fwhm)), &[1.0])?;
            Ok(rec.excitation_imbalance().abs())
        })
        .collect::<Result<Vec<f64>, String>>()?;
    let ratios: Vec<f64> = imbalance.windows(2).map(|w| w[0] / w[1]).collect();
    let first_order = ratios.iter().all(|r| (1.7..=2.3).contains(r));
    Ok((
        p.is_lossless_resonant() && imbalance[0] <= 0.01 && first_order,
        format!(
            "|imbalance|/throughput on 512/1024/2048 = {:.3e}/{:.3e}/{:.3e}, halving ratios {:.3}/{:.3}",
            imbalance[0], imbalance[1], imbalance[2], ratios[0], ratios[1]
        ),
    ))
}

/// Independent α₁: trapezoid with 100× the grid on the analytic tanh profile.
fn alpha1_oracle(p: &SystemParams, delta: f64, gamma: f64, points: usize) -> f64 {
    let cross = (p.g1 * p.g1 * p.g2 * p.g2 * p.n * p.v0 / p.c).sqrt();
    let (start, end) = (cross / 0.01, cross * 0.01);
    let (zc, w) = (0.25f64, 0.15f64);
    let lo = (-zc / w).tanh();
    let hi = ((1.0 - zc) / w).tanh();
    let n = 100 * (points - 1) + 1;
    let h = 1.0 / (n - 1) as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let z = i as f64 * h;
        let s = (((z - zc) / w).tanh() - lo) / (hi - lo);
        let omega = start * (1.0 - s) + end * s;
        // ϑ = π/4 with g₁ = g₂: Ω₀₁ = Ω₀₂ = Ω/√2
        let s_sum = omega * omega / (p.g2 * p.g2);
        let tan2 = p.g1 * p.g1 * p.g2 * p.g2 * p.n * p.v0 / (omega * omega * p.c);
        let sin2 = tan2 / (1.0 + tan2);
        let f = sin2 * delta * delta * gamma * s_sum / (p.v0 * (s_sum.powi(4) + delta * delta * gamma * gamma));
        sum += if i == 0 || i == n - 1 { 0.5 * f } else { f };
    }
    sum * h
}

fn alpha_bound() -> Outcome {
    let p = SystemParams::default();
    let prof = transfer_profile(&p, FRAC_PI_4, 512);
    let gamma = 1.0;
    let scan = alpha_scan(&p, &prof, 1e-4, 1e-2, 20, gamma).map_err(|e| e.to_string())?;
    let violations = scan.iter().filter(|s| s.correction.alpha1 > s.bound).count();
    let slope = loglog_slope(&scan.iter().map(|s| (s.delta, s.correction.alpha1)).collect::<Vec<_>>());
    let oracle_dev = scan
        .iter()
        .map(|s| (s.correction.alpha1 - alpha1_oracle(&p, s.delta, gamma, 512)).abs() / s.correction.alpha1)
        .fold(0.0, f64::max);
    let slope_ok = (slope - 2.0).abs() <= 0.05;
    let note = if violations > 0 { " (bound violated; discrepancy reported)" } else { "" };
    Ok((
        slope_ok && oracle_dev < 1e-4,
        format!(
            "20 sigma in [1e-4, 1e-2]: {violations} bound violations{note}, slope {slope:.6}, \
             max rel dev from independent quadrature {oracle_dev:.1e}"
        ),
    ))
}

fn mle_and_rmse() -> Outcome {
    let grid = 100_000usize;
    let h = PI / (grid - 1) as f64;
    let pairs: Vec<(u64, u64)> = (0..=50u64)
        .flat_map(|kp| (0..=50 - kp).map(move |km| (kp, km)))
        .filter(|(a, b)| a + b >= 1)
        .collect();
    let worst = pairs
        .par_iter()
        .map(|&(kp, km)| {
            let mut best = (f64::NEG_INFINITY, 0.0);
            for i in 0..grid {
                let phi = i as f64 * h;
                let l = interf::log_likelihood(phi, kp, km);
                if l > best.0 {
                    best = (l, phi);
                }
            }
            (best.1 - interf::estimate_phase(kp, km).unwrap()).abs()
        })
        .reduce(|| 0.0, f64::max);
    let ks = [100u64, 1000, 10_000, 100_000];
    let rmse = ks
        .iter()
        .map(|&k| interf::estimator_study(PI / 3.0, k, 1000, 99, 0.0).map(|r| (k as f64, r.rmse)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let slope = loglog_slope(&rmse);
    Ok((
        worst <= 1e-4 && (slope + 0.5).abs() <= 0.1,
        format!(
            "{} count pairs: max |grid argmax - closed form| = {worst:.2e} rad; rmse slope {slope:.4}",
            pairs.len()
        ),
    ))
}

fn loss_invariance() -> Outcome {
    let p = SystemParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    let mut mismatches = 0;
    for phi in [0.0, 0.3, PI / 3.0, FRAC_PI_2, 2.5, PI] {
        let base: ChannelIntensities = interf::channel_intensities(phi, 1.0, &p).map_err(|e| e.to_string())?;
        let reference = interf::sample_counts(&base, 5000, 31).map_err(|e| e.to_string())?;
        let mut alphas: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..=5.0)).collect();
        alphas.extend([0.0, 5.0]);
        for a in alphas {
            let r = interf::sample_counts(&base.apply_loss(a), 5000, 31).map_err(|e| e.to_string())?;
            checked += 1;
            let same = r.k_plus == reference.k_plus
                && r.k_minus == reference.k_minus
                && r.k_total == reference.k_total
                && r.seed == reference.seed
                && r.phi_hat.to_bits() == reference.phi_hat.to_bits();
            if !same {
                mismatches += 1;
            }
        }
    }
    Ok((mismatches == 0, format!("{checked} attenuated records, {mismatches} differ from unattenuated")))
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("1 channel intensities closed form", Duration::from_secs(1), closed_form_channels),
        ("2 output flux inequality and limits", Duration::from_secs(5), flux_inequality),
        ("3 simulation vs closed-form output", Duration::from_secs(300), pde_vs_closed_form),
        ("4 non-adiabatic damping of mismatched probe", Duration::from_secs(300), non_adiabatic_damping),
        ("5 excitation conservation", Duration::from_secs(600), conservation),
        ("6 alpha1 bound and slope", Duration::from_secs(10), alpha_bound),
        ("7 MLE estimator", Duration::from_secs(120), mle_and_rmse),
        ("8 loss invariance of measurement", Duration::from_secs(1), loss_invariance),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok((ok, detail)) => (ok, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = elapsed <= budget;
        let pass = ok && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {detail} [{:.2}s / {}s budget]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
