//! Scenario orchestration: builds the model from a config, runs it, and
//! writes CSV tables, SVG charts and a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::adiabatic::{self, LossCorrection};
use crate::config::{self, RunConfig, Scenario};
use crate::error::{Error, Result};
use crate::interferometry::{self as interf, ChannelIntensities, CountModel, StudyReport};
use crate::model::{self, StokesProfile, SystemParams};
use crate::pde::{self, BoundaryInput, Engine, FieldId, GaussianPulse, RunRecord};
use crate::plot::LineChart;
use crate::series::{relative_l2, TimeSeries};

/// Everything a scenario produces before it touches the disk.
#[derive(Debug, Default)]
pub struct Outcome {
    pub metrics: BTreeMap<String, f64>,
    pub files: Vec<(String, Vec<u8>)>,
    pub charts: Vec<(String, LineChart)>,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    fn merge(&mut self, other: Outcome) {
        self.metrics.extend(other.metrics);
        self.files.extend(other.files);
        self.charts.extend(other.charts);
        self.warnings.extend(other.warnings);
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Probe pulses for the configured profile; the FWHM is given in transits `τ(L)`.
pub fn boundary_input(cfg: &RunConfig, profile: &StokesProfile, tau_l: f64) -> BoundaryInput {
    let pu = &cfg.pulses;
    let fwhm = pu.fwhm_transits * tau_l;
    let center = pu.center_fwhms * fwhm;
    let eps1 = GaussianPulse {
        amplitude: pu.amplitude1,
        center,
        fwhm,
        phase: pu.phase1,
    };
    let eps2 = if pu.matched {
        let (a, b) = profile.eval(0.0);
        let t = model::vartheta(a, b, &cfg.params).tan();
        GaussianPulse {
            amplitude: t * pu.amplitude1,
            ..eps1
        }
    } else {
        GaussianPulse {
            amplitude: pu.amplitude2,
            phase: pu.phase2,
            ..eps1
        }
    };
    BoundaryInput::new(eps1, eps2)
}

struct Setup {
    profile: StokesProfile,
    tau_l: f64,
    boundary: BoundaryInput,
    horizon: f64,
}

fn setup(cfg: &RunConfig) -> Result<Setup> {
    let profile = cfg.build_profile()?;
    let tau_l = model::propagation_delay(0.0, profile.length(), &profile, &cfg.params)?;
    let boundary = boundary_input(cfg, &profile, tau_l);
    let horizon = cfg
        .numerics
        .horizon
        .unwrap_or(boundary.support_end() + tau_l + profile.length() / cfg.params.c);
    Ok(Setup {
        profile,
        tau_l,
        boundary,
        horizon,
    })
}

fn probe_positions(cfg: &RunConfig) -> Vec<f64> {
    let mut z = vec![0.0, cfg.numerics.delta_z, cfg.params.length];
    z.extend(&cfg.numerics.probes);
    z.sort_by(f64::total_cmp);
    z.dedup();
    z
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        fill(&mut w)?;
        w.flush()?;
    }
    Ok(buf)
}

fn probes_csv(record: &RunRecord) -> Result<Vec<u8>> {
    csv_bytes(&["t", "z_probe", "field_name", "class_index", "re", "im"], |w| {
        for p in &record.probes {
            let z = p.z_node.to_string();
            for (id, values) in &p.fields {
                let name = id.name();
                let class = id.class_index().map(|c| c.to_string()).unwrap_or_default();
                for (t, v) in record.times.iter().zip(values) {
                    w.write_record([
                        t.to_string(),
                        z.clone(),
                        name.clone(),
                        class.clone(),
                        v.re.to_string(),
                        v.im.to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct ProbeMeta {
    requested: f64,
    node: f64,
    index: usize,
    vartheta: f64,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    dt: f64,
    dz: f64,
    steps: u64,
    record_stride: u64,
    samples: usize,
    probes: Vec<ProbeMeta>,
    flux_in_eps1: f64,
    flux_in_eps2: f64,
    flux_out: f64,
    atom_flux_out: f64,
    excitation_start: f64,
    excitation_end: f64,
    weak_excitation_max: f64,
    weak_excitation_ok: bool,
    warnings: &'a [String],
}

/// Total `|Φ₃(z, t)|²` over classes at one probe.
fn phi3_density(record: &RunRecord, z: f64, classes: usize) -> Result<Vec<f64>> {
    let probe = record.probe(z)?;
    let mut out = vec![0.0; record.times.len()];
    for class in 0..classes {
        let f = probe
            .field(FieldId::Phi { kind: 3, class })
            .ok_or(Error::MissingProbe(z))?;
        for (o, v) in out.iter_mut().zip(f) {
            *o += v.norm_sqr();
        }
    }
    Ok(out)
}

fn run_pde(cfg: &RunConfig, s: &Setup) -> Result<(Outcome, RunRecord)> {
    let ensemble = cfg.ensemble()?;
    let engine = Engine::new(&cfg.params, &s.profile, &ensemble, cfg.engine_settings())?;
    let record = engine.run(&s.boundary, s.horizon, &probe_positions(cfg), cfg.numerics.samples)?;
    let mut out = Outcome::default();
    out.warnings.extend(record.warnings.iter().cloned());
    out.metric("tau_l", s.tau_l);
    out.metric("dt", record.dt);
    out.metric("steps", record.steps as f64);
    out.metric("flux_in", record.flux_in());
    out.metric("flux_out", record.flux_out);
    out.metric("atom_flux_out", record.atom_flux_out);
    out.metric("transfer_efficiency", record.transfer_efficiency());
    if record.flux_in_eps1 > 0.0 {
        out.metric("transfer_fraction_eps1", record.atom_flux_out / record.flux_in_eps1);
    }
    if record.flux_in_eps2 > 0.0 {
        out.metric("transfer_fraction_eps2", record.atom_flux_out / record.flux_in_eps2);
    }
    out.metric("excitation_imbalance", record.excitation_imbalance());
    out.metric("weak_excitation_max", record.weak_excitation_max);
    if cfg.numerics.delta_z > 0.0 {
        let rep = pde::entrance_transient_diagnostics(&record, cfg.numerics.delta_z, cfg.numerics.tolerance)?;
        out.metric("transient_max_residual", rep.max_residual);
        out.metric("transient_final_residual", rep.final_residual);
        if let Some(d) = rep.damped_eps1 {
            out.metric("damped_fraction_eps1", d);
        }
        if let Some(d) = rep.damped_eps2 {
            out.metric("damped_fraction_eps2", d);
        }
        if let Some(t) = rep.settle_time {
            out.metric("transient_settle_time", t);
        }
    }
    let meta = RunMeta {
        dt: record.dt,
        dz: record.dz,
        steps: record.steps,
        record_stride: record.record_stride,
        samples: record.times.len(),
        probes: record
            .probes
            .iter()
            .map(|p| ProbeMeta {
                requested: p.z,
                node: p.z_node,
                index: p.index,
                vartheta: p.vartheta,
            })
            .collect(),
        flux_in_eps1: record.flux_in_eps1,
        flux_in_eps2: record.flux_in_eps2,
        flux_out: record.flux_out,
        atom_flux_out: record.atom_flux_out,
        excitation_start: record.excitation.first().copied().unwrap_or(0.0),
        excitation_end: record.excitation.last().copied().unwrap_or(0.0),
        weak_excitation_max: record.weak_excitation_max,
        weak_excitation_ok: record.weak_excitation_ok,
        warnings: &record.warnings,
    };
    out.files.push(("probes.csv".into(), probes_csv(&record)?));
    out.files.push(("probes.json".into(), serde_json::to_vec_pretty(&meta)?));
    let density = phi3_density(&record, cfg.params.length, ensemble.len())?;
    let pts = record.times.iter().copied().zip(density).collect();
    out.charts.push((
        "phi3_waveform.svg".into(),
        LineChart::new("Output matter wave", "t", "|Phi3(L,t)|^2").with_series("pde", pts),
    ));
    Ok((out, record))
}

/// Closed-form `Φ₃(L, ·)` from the entrance series at `delta_z`.
fn closed_form_output(
    cfg: &RunConfig,
    profile: &StokesProfile,
    eps1: &TimeSeries,
    eps2: &TimeSeries,
) -> Result<TimeSeries> {
    let init = adiabatic::initial_combined_field(eps1, eps2, profile, &cfg.params, cfg.numerics.delta_z)?;
    Ok(adiabatic::propagate_polariton(init, profile, &cfg.params, cfg.numerics.delta_z)?.phi3_out())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AlphaPoint {
    pub sigma: f64,
    pub delta: f64,
    pub correction: LossCorrection,
    pub bound: f64,
}

/// `α₁`, `α₂` over log-spaced `σ` at loss rate `gamma`.
pub fn alpha_scan(
    params: &SystemParams,
    profile: &StokesProfile,
    sigma_min: f64,
    sigma_max: f64,
    count: usize,
    gamma: f64,
) -> Result<Vec<AlphaPoint>> {
    let scale = params.g1 * params.g1 * params.n * params.v0 / (params.c * gamma);
    (0..count)
        .map(|i| {
            let f = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
            let sigma = (sigma_min.ln() + f * (sigma_max.ln() - sigma_min.ln())).exp();
            let p = SystemParams {
                gamma2: gamma,
                gamma4: gamma,
                two_photon_detuning: sigma * scale,
                ..params.clone()
            };
            let correction = adiabatic::alpha_integrals(&p, profile)?;
            Ok(AlphaPoint {
                sigma,
                delta: p.two_photon_detuning,
                bound: correction.bound(&p),
                correction,
            })
        })
        .collect()
}

fn run_adiabatic(cfg: &RunConfig, s: &Setup) -> Result<Outcome> {
    let mut out = Outcome::default();
    let n = cfg.numerics.samples;
    let h = s.horizon / (n - 1) as f64;
    let e1 = TimeSeries::sample(|t| s.boundary.eps1.at(t), 0.0, h, n);
    let e2 = TimeSeries::sample(|t| s.boundary.eps2.at(t), 0.0, h, n);
    let phi3 = closed_form_output(cfg, &s.profile, &e1, &e2)?;
    out.metric("tau_l", s.tau_l);
    out.metric("output_energy", phi3.energy() * cfg.params.v0);
    out.metric("input_energy", (e1.energy() + e2.energy()) * cfg.params.c);
    out.files.push((
        "phi3_adiabatic.csv".into(),
        csv_bytes(&["t", "re", "im"], |w| {
            for (t, v) in phi3.times().zip(&phi3.values) {
                w.write_record([t.to_string(), v.re.to_string(), v.im.to_string()])?;
            }
            Ok(())
        })?,
    ));
    let pts = phi3.times().zip(phi3.values.iter().map(|v| v.norm_sqr())).collect();
    out.charts.push((
        "phi3_adiabatic.svg".into(),
        LineChart::new("Closed-form output matter wave", "t", "|Phi3(L,t)|^2").with_series("adiabatic", pts),
    ));

    let a = &cfg.alpha;
    let scan = alpha_scan(&cfg.params, &s.profile, a.sigma_min, a.sigma_max, a.count, a.gamma)?;
    let violations: Vec<&AlphaPoint> = scan.iter().filter(|p| p.correction.alpha1 > p.bound).collect();
    let slope = loglog_slope(&scan.iter().map(|p| (p.delta, p.correction.alpha1)).collect::<Vec<_>>());
    out.metric("alpha1_slope", slope);
    out.metric("alpha1_bound_violations", violations.len() as f64);
    out.files.push((
        "alpha.csv".into(),
        csv_bytes(&["sigma", "delta", "alpha1", "alpha2", "bound", "within_bound"], |w| {
            for p in &scan {
                w.write_record([
                    p.sigma.to_string(),
                    p.delta.to_string(),
                    p.correction.alpha1.to_string(),
                    p.correction.alpha2.to_string(),
                    p.bound.to_string(),
                    (p.correction.alpha1 <= p.bound).to_string(),
                ])?;
            }
            Ok(())
        })?,
    ));
    if !violations.is_empty() {
        let mut report = String::from(
            "The loss integral alpha1, evaluated as written, exceeds the bound eta*|sigma|/2 at:\n",
        );
        for p in &violations {
            report.push_str(&format!(
                "  sigma = {:e}, delta = {:e}: alpha1 = {:e} > bound = {:e}\n",
                p.sigma, p.delta, p.correction.alpha1, p.bound
            ));
        }
        out.warnings.push(format!("alpha1 exceeds its bound at {} points", violations.len()));
        out.files.push(("alpha_discrepancy.txt".into(), report.into_bytes()));
    }
    out.charts.push((
        "alpha1_vs_delta.svg".into(),
        LineChart::new("Loss exponent vs two-photon detuning", "delta", "alpha")
            .with_series("alpha1", scan.iter().map(|p| (p.delta, p.correction.alpha1)).collect())
            .with_series("bound", scan.iter().map(|p| (p.delta, p.bound)).collect())
            .log_log(),
    ));
    Ok(out)
}

fn run_compare(cfg: &RunConfig, s: &Setup) -> Result<Outcome> {
    let (mut out, record) = run_pde(cfg, s)?;
    let oracle = if cfg.numerics.delta_z == 0.0 {
        let h = record.record_dt();
        let e1 = TimeSeries::new(0.0, h, record.eps1_in.clone());
        let e2 = TimeSeries::new(0.0, h, record.eps2_in.clone());
        closed_form_output(cfg, &s.profile, &e1, &e2)?
    } else {
        oracle_from_delta(cfg, s, &record)?
    };
    finish_compare(cfg, &mut out, &record, &oracle)?;
    Ok(out)
}

/// Closed form started from the simulated probes just past the entrance layer.
fn oracle_from_delta(cfg: &RunConfig, s: &Setup, record: &RunRecord) -> Result<TimeSeries> {
    let dz = cfg.numerics.delta_z;
    let probe = record.probe(dz)?;
    let e1 = probe.field(FieldId::Eps1).ok_or(Error::MissingProbe(dz))?;
    let e2 = probe.field(FieldId::Eps2).ok_or(Error::MissingProbe(dz))?;
    let values = e1
        .iter()
        .zip(e2)
        .map(|(&a, &b)| adiabatic::combined_field(a, b, probe.vartheta))
        .collect();
    let eps12 = TimeSeries::new(0.0, record.record_dt(), values);
    Ok(adiabatic::propagate_polariton(eps12, &s.profile, &cfg.params, dz)?.phi3_out())
}

fn finish_compare(cfg: &RunConfig, out: &mut Outcome, record: &RunRecord, oracle: &TimeSeries) -> Result<()> {
    let z = cfg.params.length;
    let probe = record.probe(z)?;
    let sim = probe
        .field(FieldId::Phi { kind: 3, class: 0 })
        .ok_or(Error::MissingProbe(z))?;
    let reference: Vec<Complex64> = record.times.iter().map(|&t| oracle.interp_or_zero(t)).collect();
    let discrepancy = relative_l2(sim, &reference);
    out.metric("discrepancy", discrepancy);
    if discrepancy > 0.05 {
        out.warnings.push(format!("relative L2 discrepancy {discrepancy:.4} exceeds 0.05"));
    }
    out.files.push((
        "compare.csv".into(),
        csv_bytes(&["t", "pde_re", "pde_im", "adiabatic_re", "adiabatic_im"], |w| {
            for ((t, a), b) in record.times.iter().zip(sim).zip(&reference) {
                w.write_record([
                    t.to_string(),
                    a.re.to_string(),
                    a.im.to_string(),
                    b.re.to_string(),
                    b.im.to_string(),
                ])?;
            }
            Ok(())
        })?,
    ));
    let pts = |v: &[Complex64]| record.times.iter().copied().zip(v.iter().map(|x| x.norm_sqr())).collect();
    out.charts.push((
        "phi3_compare.svg".into(),
        LineChart::new("Output matter wave: simulation vs closed form", "t", "|Phi3(L,t)|^2")
            .with_series("pde", pts(sim))
            .with_series("adiabatic", pts(&reference)),
    ));
    Ok(())
}

fn trial_records(cfg: &RunConfig, k_total: u64) -> Result<StudyReport> {
    let m = &cfg.measurement;
    match m.count_model {
        CountModel::Binomial => interf::estimator_study(m.phi_true, k_total, m.trials, m.seed, m.alpha1),
        CountModel::Poisson => {
            let ints = interf::channel_intensities(m.phi_true, m.eps0, &cfg.params)?.apply_loss(m.alpha1);
            let records = (0..m.trials)
                .into_par_iter()
                .map(|trial| {
                    let mut r = interf::sample_counts_poisson(&ints, m.exposure, m.seed, trial)?;
                    r.phi_true = m.phi_true;
                    Ok(r)
                })
                .collect::<Result<Vec<_>>>()?;
            let n = records.len() as f64;
            let target = interf::fold_phase(m.phi_true);
            let mean = records.iter().map(|r| r.phi_hat).sum::<f64>() / n;
            let rmse = (records.iter().map(|r| (r.phi_hat - target).powi(2)).sum::<f64>() / n).sqrt();
            Ok(StudyReport {
                k_total: records.iter().map(|r| r.k_total).sum::<u64>() / m.trials,
                trials: m.trials,
                mean,
                bias: mean - target,
                rmse,
                min: records.iter().map(|r| r.phi_hat).fold(f64::INFINITY, f64::min),
                max: records.iter().map(|r| r.phi_hat).fold(f64::NEG_INFINITY, f64::max),
                records,
            })
        }
    }
}

fn run_measure(cfg: &RunConfig) -> Result<Outcome> {
    let m = &cfg.measurement;
    let p = &cfg.params;
    let mut out = Outcome::default();
    let rows = m
        .phases
        .iter()
        .map(|&phi| {
            let a = interf::channel_intensities(phi, m.eps0, p)?;
            let b = interf::channel_intensities_from_model(phi, m.eps0, std::f64::consts::FRAC_PI_4, interf::GLASS_SHIFT, p)?;
            Ok((phi, a, b))
        })
        .collect::<Result<Vec<(f64, ChannelIntensities, ChannelIntensities)>>>()?;
    out.files.push((
        "intensities.csv".into(),
        csv_bytes(
            &["phi", "i_plus", "i_minus", "i_plus_over_i0", "model_i_plus", "model_i_minus"],
            |w| {
                for (phi, a, b) in &rows {
                    let (ip, im) = a.pair();
                    let (mp, mm) = b.pair();
                    w.write_record([
                        phi.to_string(),
                        ip.to_string(),
                        im.to_string(),
                        (ip / a.total).to_string(),
                        mp.to_string(),
                        mm.to_string(),
                    ])?;
                }
                Ok(())
            },
        )?,
    ));
    let curve = (0..=180)
        .map(|i| {
            let phi = std::f64::consts::PI * i as f64 / 90.0;
            let c = interf::channel_intensities(phi, m.eps0, p)?;
            Ok((phi, c))
        })
        .collect::<Result<Vec<_>>>()?;
    out.charts.push((
        "intensity_vs_phi.svg".into(),
        LineChart::new("Channel intensities", "phi", "I / I0")
            .with_series("I+", curve.iter().map(|(x, c)| (*x, c.plus() / c.total)).collect())
            .with_series("I-", curve.iter().map(|(x, c)| (*x, c.minus() / c.total)).collect()),
    ));

    let main = trial_records(cfg, m.k_total)?;
    out.metric("bias", main.bias);
    out.metric("rmse", main.rmse);
    out.metric("mean_phi_hat", main.mean);
    let mut trials = Vec::new();
    interf::write_trials_csv(&mut trials, &main.records)?;
    out.files.push(("trials.csv".into(), trials));

    let studies = m
        .k_values
        .iter()
        .map(|&k| interf::estimator_study(m.phi_true, k, m.trials, m.seed, m.alpha1))
        .collect::<Result<Vec<_>>>()?;
    if studies.len() >= 2 {
        let slope = loglog_slope(&studies.iter().map(|s| (s.k_total as f64, s.rmse)).collect::<Vec<_>>());
        out.metric("rmse_slope", slope);
    }
    let mut summary = Vec::new();
    interf::write_summary_csv(&mut summary, &studies)?;
    out.files.push(("summary.csv".into(), summary));
    out.charts.push((
        "rmse_vs_k.svg".into(),
        LineChart::new("Estimator error vs atom number", "k", "rmse")
            .with_series("monte carlo", studies.iter().map(|s| (s.k_total as f64, s.rmse)).collect())
            .with_series(
                "1/sqrt(k)",
                studies.iter().map(|s| (s.k_total as f64, 1.0 / (s.k_total as f64).sqrt())).collect(),
            )
            .log_log(),
    ));
    Ok(out)
}

fn primary_metric(target: Scenario) -> &'static str {
    match target {
        Scenario::Pde => "transfer_efficiency",
        Scenario::Adiabatic => "tau_l",
        Scenario::Compare => "discrepancy",
        Scenario::Measure | Scenario::Sweep => "rmse",
    }
}

fn run_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let sw = &cfg.sweep;
    let points = sw.points()?;
    if points.is_empty() {
        return Err(Error::EmptySweep);
    }
    let results = points
        .par_iter()
        .map(|&v| {
            let mut c = config::with_value(cfg, &sw.parameter, v)?;
            c.scenario = sw.target;
            compute(&c).map(|o| (v, o))
        })
        .collect::<Result<Vec<_>>>()?;
    let keys: Vec<String> = results[0].1.metrics.keys().cloned().collect();
    let mut header = vec![sw.parameter.as_str()];
    header.extend(keys.iter().map(String::as_str));
    let mut out = Outcome::default();
    out.files.push((
        "sweep.csv".into(),
        csv_bytes(&header, |w| {
            for (v, o) in &results {
                let mut row = vec![v.to_string()];
                row.extend(keys.iter().map(|k| o.metrics.get(k).map(|x| x.to_string()).unwrap_or_default()));
                w.write_record(&row)?;
            }
            Ok(())
        })?,
    ));
    for (v, o) in &results {
        out.warnings.extend(o.warnings.iter().map(|w| format!("{} = {v}: {w}", sw.parameter)));
    }
    let key = primary_metric(sw.target);
    let pts = results
        .iter()
        .filter_map(|(v, o)| o.metrics.get(key).map(|m| (*v, *m)))
        .collect();
    out.charts.push((
        "sweep.svg".into(),
        LineChart::new(&format!("{key} vs {}", sw.parameter), &sw.parameter, key).with_series(key, pts),
    ));
    out.metric("points", results.len() as f64);
    Ok(out)
}

/// Runs a scenario without writing anything.
pub fn compute(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::Pde => Ok(run_pde(cfg, &setup(cfg)?)?.0),
        Scenario::Adiabatic => run_adiabatic(cfg, &setup(cfg)?),
        Scenario::Compare => {
            let s = setup(cfg)?;
            let mut out = run_compare(cfg, &s)?;
            let closed = run_adiabatic(cfg, &s)?;
            out.merge(Outcome {
                metrics: closed.metrics.into_iter().filter(|(k, _)| k.starts_with("alpha")).collect(),
                ..Default::default()
            });
            Ok(out)
        }
        Scenario::Measure => run_measure(cfg),
        Scenario::Sweep => run_sweep(cfg),
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub status: String,
    pub error: Option<String>,
    pub version: String,
    pub seed: u64,
    pub started_unix: f64,
    pub wall_time_s: f64,
    pub config: String,
    pub files: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn write_outcome(out: &Outcome, dir: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for (name, bytes) in &out.files {
        std::fs::write(dir.join(name), bytes)?;
        files.push(name.clone());
    }
    for (name, chart) in &out.charts {
        chart.render(&dir.join(name))?;
        files.push(name.clone());
    }
    let metrics = serde_json::to_vec_pretty(&out.metrics)?;
    std::fs::write(dir.join("summary.json"), metrics)?;
    files.push("summary.json".into());
    Ok(files)
}

/// Runs `cfg` and writes its artifacts to `dir`. The manifest is written even
/// when the run fails; the error is then returned after recording it.
pub fn run_scenario(cfg: &RunConfig, dir: &Path) -> Result<Manifest> {
    let start = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    std::fs::create_dir_all(dir)?;
    let config_text = config::to_toml(cfg).unwrap_or_default();
    let mut files = Vec::new();
    if std::fs::write(dir.join("config.toml"), &config_text).is_ok() {
        files.push("config.toml".to_string());
    }
    let result = compute(cfg).and_then(|out| {
        let written = write_outcome(&out, dir)?;
        Ok((out, written))
    });
    let mut manifest = Manifest {
        scenario: cfg.scenario.name().into(),
        status: "ok".into(),
        error: None,
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.measurement.seed,
        started_unix,
        wall_time_s: 0.0,
        config: config_text,
        files,
        metrics: BTreeMap::new(),
        warnings: Vec::new(),
    };
    let failure = match result {
        Ok((out, written)) => {
            manifest.files.extend(written);
            manifest.metrics = out.metrics;
            manifest.warnings = out.warnings;
            None
        }
        Err(e) => {
            manifest.status = "error".into();
            manifest.error = Some(e.to_string());
            Some(e)
        }
    };
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    std::fs::write(dir.join(MANIFEST_NAME), serde_json::to_vec_pretty(&manifest)?)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// Manifest for a run that failed before a valid config existed.
pub fn write_failure_manifest(dir: &Path, scenario: &str, config_text: &str, error: &Error) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = Manifest {
        scenario: scenario.into(),
        status: "error".into(),
        error: Some(error.to_string()),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: 0,
        started_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0),
        wall_time_s: 0.0,
        config: config_text.into(),
        files: Vec::new(),
        metrics: BTreeMap::new(),
        warnings: Vec::new(),
    };
    std::fs::write(dir.join(MANIFEST_NAME), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

/// Default output directory: `$LAMBDA_BEAM_OUT`, else `./lambda-beam-out`.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("lambda-beam-out"))
}

pub const OUT_ENV: &str = "LAMBDA_BEAM_OUT";
