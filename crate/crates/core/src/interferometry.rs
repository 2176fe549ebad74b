//! Two-channel relative-phase measurement: splitter, glass shift, atom
//! counting and the maximum-likelihood phase estimate.

use std::f64::consts::{FRAC_PI_4, PI};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adiabatic::output_intensity;
use crate::error::{Error, Result};
use crate::model::SystemParams;

/// Phase added by the glass plate on the (+) arm.
pub const GLASS_SHIFT: f64 = PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitterSetup {
    pub eps0: f64,
    pub glass_shift: f64,
    pub vartheta0: f64,
}

impl SplitterSetup {
    pub fn balanced(eps0: f64) -> Self {
        Self {
            eps0,
            glass_shift: GLASS_SHIFT,
            vartheta0: FRAC_PI_4,
        }
    }

    pub fn intensities(&self, phi: f64, params: &SystemParams) -> Result<ChannelIntensities> {
        channel_intensities_from_model(phi, self.eps0, self.vartheta0, self.glass_shift, params)
    }
}

/// Output atom fluxes of the two channels, stored as a total `I₀` and the
/// (+) fraction so that common attenuation leaves the fraction untouched.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelIntensities {
    pub total: f64,
    pub frac_plus: f64,
}

impl ChannelIntensities {
    pub fn from_pair(i_plus: f64, i_minus: f64) -> Result<Self> {
        if !(i_plus >= 0.0 && i_minus >= 0.0) || !(i_plus + i_minus).is_finite() {
            return Err(Error::invalid("intensities", "must be finite and non-negative"));
        }
        let total = i_plus + i_minus;
        if total == 0.0 {
            return Err(Error::invalid("intensities", "total intensity is zero"));
        }
        Ok(Self {
            total,
            frac_plus: (i_plus / total).clamp(0.0, 1.0),
        })
    }

    /// `(I₊, I₋)`; the larger channel is rounded once and the smaller one is
    /// the exact remainder, so `I₊ + I₋ == total`.
    pub fn pair(&self) -> (f64, f64) {
        let f = self.frac_plus;
        if f >= 0.5 {
            let plus = self.total * f;
            (plus, self.total - plus)
        } else {
            let minus = self.total * (1.0 - f);
            (self.total - minus, minus)
        }
    }

    pub fn plus(&self) -> f64 {
        self.pair().0
    }

    pub fn minus(&self) -> f64 {
        self.pair().1
    }

    /// `I± → e^{−2α₁} I±`.
    pub fn apply_loss(self, alpha1: f64) -> Self {
        Self {
            total: self.total * (-2.0 * alpha1).exp(),
            ..self
        }
    }
}

/// `I₊ = I₀ sin²(φ/2)`, `I₋ = I₀ cos²(φ/2)` with `I₀ = (v₀/c) ε₀²`.
pub fn channel_intensities(phi: f64, eps0: f64, params: &SystemParams) -> Result<ChannelIntensities> {
    if !(eps0 > 0.0) || !eps0.is_finite() {
        return Err(Error::invalid("measurement.eps0", "must be > 0"));
    }
    let half = 0.5 * phi;
    Ok(ChannelIntensities {
        total: params.v0 / params.c * eps0 * eps0,
        frac_plus: half.sin().powi(2),
    })
}

/// Both channels from the general output intensity: the (+) arm carries the
/// extra `glass_shift`. The factor `v₀²/(2c²)` maps the balanced output
/// `2(c/v₀)ε₀² sin²(φ/2)` onto `I₀ sin²(φ/2)`.
pub fn channel_intensities_from_model(
    phi: f64,
    eps0: f64,
    vartheta0: f64,
    glass_shift: f64,
    params: &SystemParams,
) -> Result<ChannelIntensities> {
    let kappa = params.v0 * params.v0 / (2.0 * params.c * params.c);
    let plus = kappa * output_intensity(eps0, eps0, phi + glass_shift, vartheta0, params);
    let minus = kappa * output_intensity(eps0, eps0, phi, vartheta0, params);
    ChannelIntensities::from_pair(plus, minus)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CountModel {
    /// Fixed total `k`, split binomially.
    #[default]
    Binomial,
    /// Independent Poisson counts with means `I± · exposure`.
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub trial: u64,
    pub phi_true: f64,
    pub k_plus: u64,
    pub k_minus: u64,
    pub k_total: u64,
    pub phi_hat: f64,
    pub seed: u64,
}

/// Generator for trial `trial` of a study seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn binomial_counts(p: f64, k_total: u64, rng: &mut ChaCha8Rng) -> Result<(u64, u64)> {
    let dist = Binomial::new(k_total, p).map_err(|e| Error::invalid("measurement", e.to_string()))?;
    let k_plus = dist.sample(rng);
    Ok((k_plus, k_total - k_plus))
}

/// Splits `k_total` atoms between the channels with `p = I₊/(I₊ + I₋)`.
pub fn sample_counts(intensities: &ChannelIntensities, k_total: u64, seed: u64) -> Result<MeasurementRecord> {
    sample_trial(intensities, k_total, seed, 0, f64::NAN)
}

fn sample_trial(
    intensities: &ChannelIntensities,
    k_total: u64,
    seed: u64,
    trial: u64,
    phi_true: f64,
) -> Result<MeasurementRecord> {
    if k_total == 0 {
        return Err(Error::invalid("measurement.k_total", "must be >= 1"));
    }
    if !(intensities.total > 0.0) {
        return Err(Error::invalid("intensities", "total intensity is zero"));
    }
    let mut rng = trial_rng(seed, trial);
    let (k_plus, k_minus) = binomial_counts(intensities.frac_plus, k_total, &mut rng)?;
    Ok(MeasurementRecord {
        trial,
        phi_true,
        k_plus,
        k_minus,
        k_total,
        phi_hat: estimate_phase(k_plus, k_minus)?,
        seed,
    })
}

/// Independent Poisson counts per channel; fails if both come out zero.
pub fn sample_counts_poisson(
    intensities: &ChannelIntensities,
    exposure: f64,
    seed: u64,
    trial: u64,
) -> Result<MeasurementRecord> {
    if !(exposure > 0.0) {
        return Err(Error::invalid("measurement.exposure", "must be > 0"));
    }
    let mut rng = trial_rng(seed, trial);
    let (ip, im) = intensities.pair();
    let mut draw = |mean: f64| -> Result<u64> {
        if mean == 0.0 {
            return Ok(0);
        }
        let d = Poisson::new(mean).map_err(|e| Error::invalid("measurement", e.to_string()))?;
        Ok(d.sample(&mut rng) as u64)
    };
    let k_plus = draw(ip * exposure)?;
    let k_minus = draw(im * exposure)?;
    Ok(MeasurementRecord {
        trial,
        phi_true: f64::NAN,
        k_plus,
        k_minus,
        k_total: k_plus + k_minus,
        phi_hat: estimate_phase(k_plus, k_minus)?,
        seed,
    })
}

/// Maximum-likelihood phase `2 atan sqrt(k₊/k₋)` in `[0, π]`.
pub fn estimate_phase(k_plus: u64, k_minus: u64) -> Result<f64> {
    if k_plus == 0 && k_minus == 0 {
        return Err(Error::invalid("counts", "k_plus + k_minus must be >= 1"));
    }
    Ok(estimate_phase_real(k_plus as f64, k_minus as f64))
}

/// Same estimator for real-valued (expected) counts.
pub fn estimate_phase_real(k_plus: f64, k_minus: f64) -> f64 {
    2.0 * k_plus.sqrt().atan2(k_minus.sqrt())
}

/// `log P(k₊, k₋ | φ)` up to the binomial coefficient.
pub fn log_likelihood(phi: f64, k_plus: u64, k_minus: u64) -> f64 {
    let half = 0.5 * phi;
    let term = |k: u64, x: f64| if k == 0 { 0.0 } else { k as f64 * (x * x).ln() };
    term(k_plus, half.sin()) + term(k_minus, half.cos())
}

/// Wraps any phase onto `[0, π]`, the range distinguishable by the counts.
pub fn fold_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(2.0 * PI);
    if r > PI {
        2.0 * PI - r
    } else {
        r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyReport {
    pub k_total: u64,
    pub trials: u64,
    pub mean: f64,
    pub bias: f64,
    pub rmse: f64,
    pub min: f64,
    pub max: f64,
    #[serde(skip)]
    pub records: Vec<MeasurementRecord>,
}

pub const MIN_TRIALS: u64 = 100;

/// Repeated measurements at a fixed phase.
pub fn estimator_study(
    phi_true: f64,
    k_total: u64,
    trials: u64,
    seed: u64,
    loss_alpha1: f64,
) -> Result<StudyReport> {
    let base = ChannelIntensities {
        total: 1.0,
        frac_plus: (0.5 * phi_true).sin().powi(2),
    }
    .apply_loss(loss_alpha1);
    run_study(k_total, trials, seed, |_| Ok((phi_true, base)))
}

/// Each trial draws its own `φ` uniformly from `[0, 2π)`; errors are taken
/// against the folded phase.
pub fn random_phase_study(k_total: u64, trials: u64, seed: u64) -> Result<StudyReport> {
    run_study(k_total, trials, seed, |trial| {
        let mut rng = trial_rng(seed ^ 0x9e37_79b9_7f4a_7c15, trial);
        let phi = rng.gen_range(0.0..2.0 * PI);
        Ok((
            phi,
            ChannelIntensities {
                total: 1.0,
                frac_plus: (0.5 * phi).sin().powi(2),
            },
        ))
    })
}

fn run_study<F>(k_total: u64, trials: u64, seed: u64, setup: F) -> Result<StudyReport>
where
    F: Fn(u64) -> Result<(f64, ChannelIntensities)> + Sync,
{
    if trials < MIN_TRIALS {
        return Err(Error::invalid("measurement.trials", format!("must be >= {MIN_TRIALS}")));
    }
    let records = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let (phi, ints) = setup(trial)?;
            sample_trial(&ints, k_total, seed, trial, phi)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = trials as f64;
    let errors: Vec<f64> = records.iter().map(|r| r.phi_hat - fold_phase(r.phi_true)).collect();
    let mean = records.iter().map(|r| r.phi_hat).sum::<f64>() / n;
    let bias = errors.iter().sum::<f64>() / n;
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let min = records.iter().map(|r| r.phi_hat).fold(f64::INFINITY, f64::min);
    let max = records.iter().map(|r| r.phi_hat).fold(f64::NEG_INFINITY, f64::max);
    Ok(StudyReport {
        k_total,
        trials,
        mean,
        bias,
        rmse,
        min,
        max,
        records,
    })
}

/// Per-trial table: `trial, phi_true, k_plus, k_minus, phi_hat`.
pub fn write_trials_csv<W: Write>(out: W, records: &[MeasurementRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "phi_true", "k_plus", "k_minus", "phi_hat"])?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.phi_true.to_string(),
            r.k_plus.to_string(),
            r.k_minus.to_string(),
            r.phi_hat.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary table: `k_total, bias, rmse`.
pub fn write_summary_csv<W: Write>(out: W, reports: &[StudyReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k_total", "bias", "rmse"])?;
    for r in reports {
        w.write_record([r.k_total.to_string(), r.bias.to_string(), r.rmse.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn closed_form_endpoints() {
        let p = params();
        let i0 = p.v0 / p.c * 4.0;
        let a = channel_intensities(0.0, 2.0, &p).unwrap();
        assert_eq!(a.pair(), (0.0, i0));
        let b = channel_intensities(PI, 2.0, &p).unwrap();
        assert_eq!(b.pair(), (i0, 0.0));
        let c = channel_intensities(PI / 2.0, 2.0, &p).unwrap();
        assert!((c.plus() - 0.5 * i0).abs() < 1e-15);
        assert!(channel_intensities(1.0, 0.0, &p).is_err());
    }

    #[test]
    fn model_route_matches_closed_form() {
        let p = params();
        for k in 0..=40 {
            let phi = -PI + k as f64 * 0.157;
            let a = channel_intensities(phi, 1.3, &p).unwrap();
            let b = channel_intensities_from_model(phi, 1.3, FRAC_PI_4, PI, &p).unwrap();
            assert!((a.plus() - b.plus()).abs() < 1e-12);
            assert!((a.minus() - b.minus()).abs() < 1e-12);
        }
    }

    #[test]
    fn no_glass_gives_identical_channels() {
        let p = params();
        let b = channel_intensities_from_model(0.7, 1.0, FRAC_PI_4, 0.0, &p).unwrap();
        assert_eq!(b.frac_plus, 0.5);
    }

    #[test]
    fn estimator_boundaries() {
        assert_eq!(estimate_phase(5, 5).unwrap(), PI / 2.0);
        assert_eq!(estimate_phase(0, 9).unwrap(), 0.0);
        assert_eq!(estimate_phase(9, 0).unwrap(), PI);
        assert!((estimate_phase(3, 1).unwrap() - 2.0 * PI / 3.0).abs() < 1e-15);
        assert!(estimate_phase(0, 0).is_err());
    }

    #[test]
    fn brute_force_likelihood_peak() {
        let grid = 100_000;
        let h = PI / (grid - 1) as f64;
        for (kp, km) in [(3u64, 1u64), (1, 7), (20, 30), (0, 4), (4, 0)] {
            let best = (0..grid)
                .map(|i| i as f64 * h)
                .max_by(|a, b| log_likelihood(*a, kp, km).total_cmp(&log_likelihood(*b, kp, km)))
                .unwrap();
            assert!((best - estimate_phase(kp, km).unwrap()).abs() <= h);
        }
    }

    #[test]
    fn degenerate_binomial() {
        let p = params();
        let dark = channel_intensities(0.0, 1.0, &p).unwrap();
        let r = sample_counts(&dark, 1000, 3).unwrap();
        assert_eq!((r.k_plus, r.k_minus), (0, 1000));
        assert!(sample_counts(&dark, 0, 3).is_err());
        assert!(ChannelIntensities::from_pair(0.0, 0.0).is_err());
    }

    #[test]
    fn balanced_counts_within_three_sigma() {
        let p = params();
        let half = channel_intensities(PI / 2.0, 1.0, &p).unwrap();
        let r = sample_counts(&half, 1_000_000, 11).unwrap();
        let f = r.k_plus as f64 / 1e6;
        assert!((0.4985..=0.5015).contains(&f), "{f}");
    }

    #[test]
    fn counts_are_reproducible() {
        let p = params();
        let i = channel_intensities(PI / 3.0, 1.0, &p).unwrap();
        let a = sample_counts(&i, 10_000, 2024).unwrap();
        let b = sample_counts(&i, 10_000, 2024).unwrap();
        assert_eq!(a.k_plus, b.k_plus);
        assert_eq!(a.phi_hat.to_bits(), b.phi_hat.to_bits());
    }

    #[test]
    fn poisson_mode_tracks_ratio() {
        let p = params();
        let i = channel_intensities(PI / 2.0, 1.0, &p).unwrap();
        let r = sample_counts_poisson(&i, 1e6 / i.total, 5, 0).unwrap();
        assert!((r.phi_hat - PI / 2.0).abs() < 0.01);
        assert!(sample_counts_poisson(&i, 0.0, 5, 0).is_err());
    }

    #[test]
    fn study_statistics() {
        let r = estimator_study(PI / 2.0, 100_000, 200, 1, 0.0).unwrap();
        assert!(r.bias.abs() <= 0.01);
        let zero = estimator_study(0.0, 1000, 100, 1, 0.0).unwrap();
        assert!(zero.min >= 0.0);
        assert!(estimator_study(1.0, 10, 99, 1, 0.0).is_err());
        let rnd = random_phase_study(10_000, 200, 9).unwrap();
        assert!(rnd.rmse < 0.05);
    }

    #[test]
    fn study_is_schedule_independent() {
        let a = estimator_study(1.1, 500, 300, 77, 0.0).unwrap();
        let b = estimator_study(1.1, 500, 300, 77, 0.0).unwrap();
        assert_eq!(a.records, b.records);
        let single = sample_trial(
            &ChannelIntensities {
                total: 1.0,
                frac_plus: (0.55f64).sin().powi(2),
            },
            500,
            77,
            123,
            1.1,
        )
        .unwrap();
        assert_eq!(single, a.records[123]);
    }

    #[test]
    fn csv_tables_have_headers() {
        let r = estimator_study(1.0, 100, 100, 4, 0.0).unwrap();
        let mut buf = Vec::new();
        write_trials_csv(&mut buf, &r.records[..2]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("trial,phi_true,k_plus,k_minus,phi_hat\n0,1,"));
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &[r]).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("k_total,bias,rmse\n100,"));
    }

    proptest! {
        #[test]
        fn complementarity_is_exact(phi in -10.0f64..10.0, eps0 in 1e-3f64..1e3) {
            let i = channel_intensities(phi, eps0, &params()).unwrap();
            let (a, b) = i.pair();
            prop_assert_eq!(a + b, i.total);
            prop_assert!(a >= 0.0 && b >= 0.0);
        }

        #[test]
        fn expected_counts_invert(phi in 1e-3f64..(PI - 1e-3), k in 1.0f64..1e6) {
            let half = 0.5 * phi;
            let est = estimate_phase_real(k * half.sin().powi(2), k * half.cos().powi(2));
            prop_assert!((est - phi).abs() < 1e-9);
        }

        #[test]
        fn estimator_is_monotone(a in 0u64..1000, b in 1u64..1000) {
            let lo = estimate_phase(a, b).unwrap();
            let hi = estimate_phase(a + 1, b).unwrap();
            prop_assert!(hi > lo);
            prop_assert!((0.0..=PI).contains(&lo));
        }

        #[test]
        fn sign_of_phase_is_invisible(phi in 0.0f64..PI, seed in any::<u64>()) {
            let p = params();
            let a = channel_intensities(phi, 1.0, &p).unwrap();
            let b = channel_intensities(-phi, 1.0, &p).unwrap();
            let (x, y) = (sample_counts(&a, 777, seed).unwrap(), sample_counts(&b, 777, seed).unwrap());
            prop_assert_eq!((x.k_plus, x.phi_hat.to_bits()), (y.k_plus, y.phi_hat.to_bits()));
        }

        #[test]
        fn common_loss_is_invisible(phi in 0.0f64..PI, alpha in 0.0f64..5.0, seed in any::<u64>()) {
            let i = channel_intensities(phi, 1.0, &params()).unwrap();
            let a = sample_counts(&i, 1000, seed).unwrap();
            let b = sample_counts(&i.apply_loss(alpha), 1000, seed).unwrap();
            prop_assert_eq!(a.k_plus, b.k_plus);
            prop_assert_eq!(a.phi_hat.to_bits(), b.phi_hat.to_bits());
        }
    }
}
