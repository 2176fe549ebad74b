//! Direct integration of the coupled atom and probe envelope equations.
//!
//! Each step is split into first-order upwind transport along every field's
//! own characteristic, followed by the local couplings. The couplings are
//! stiff (Rabi frequencies far above `1/dt`), so the linear reaction system at
//! each node is advanced with the Crank-Nicolson (Cayley) propagator, which is
//! unitary whenever the generator is anti-Hermitian.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, propagation_delay, StokesProfile, SystemParams, VelocityEnsemble};
use crate::quad;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PumpMode {
    /// Undepleted ground-state beam `Φ₁ˡ = sqrt(n ξ_l)`.
    #[default]
    Frozen,
    /// `Φ₁ˡ` evolved with its own transport and depletion terms.
    Dynamic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineSettings {
    pub cfl: f64,
    pub pump: PumpMode,
    /// Ceiling for `max_z Σ_l (|Φ₂ˡ|² + |Φ₃ˡ|² + |Φ₄ˡ|²) / n`.
    pub weak_threshold: f64,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            cfl: 0.9,
            pump: PumpMode::Frozen,
            weak_threshold: 0.1,
        }
    }
}

/// Gaussian probe envelope `A e^{iφ} exp(−4 ln2 (t − t_c)² / fwhm²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPulse {
    pub amplitude: f64,
    pub center: f64,
    pub fwhm: f64,
    pub phase: f64,
}

impl GaussianPulse {
    pub fn zero() -> Self {
        Self {
            amplitude: 0.0,
            center: 0.0,
            fwhm: 1.0,
            phase: 0.0,
        }
    }

    pub fn at(&self, t: f64) -> Complex64 {
        if self.amplitude == 0.0 {
            return Complex64::default();
        }
        let x = (t - self.center) / self.fwhm;
        Complex64::from_polar(self.amplitude * (-4.0 * LN_2 * x * x).exp(), self.phase)
    }

    /// Time after which the intensity is below `2^-32` of its peak.
    pub fn support_end(&self) -> f64 {
        self.center + 2.0 * self.fwhm
    }

    /// `∫ |ε(t)|² dt` over the whole line.
    pub fn fluence(&self) -> f64 {
        self.amplitude * self.amplitude * self.fwhm * (std::f64::consts::PI / (8.0 * LN_2)).sqrt()
    }
}

/// Inflow values at `z = 0`: two probe pulses and the stationary ground-state beam.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryInput {
    pub eps1: GaussianPulse,
    pub eps2: GaussianPulse,
}

impl BoundaryInput {
    pub fn new(eps1: GaussianPulse, eps2: GaussianPulse) -> Self {
        Self { eps1, eps2 }
    }

    pub fn support_end(&self) -> f64 {
        let ends = [self.eps1, self.eps2]
            .iter()
            .filter(|p| p.amplitude != 0.0)
            .map(GaussianPulse::support_end)
            .fold(f64::NEG_INFINITY, f64::max);
        if ends.is_finite() {
            ends
        } else {
            0.0
        }
    }

    /// Both pulses multiplied by a common `e^{iχ}`.
    pub fn with_common_phase(mut self, chi: f64) -> Self {
        self.eps1.phase += chi;
        self.eps2.phase += chi;
        self
    }
}

/// Complex envelopes of one velocity class on the z-grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassFields {
    pub phi1: Vec<Complex64>,
    pub phi2: Vec<Complex64>,
    pub phi3: Vec<Complex64>,
    pub phi4: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub eps1: Vec<Complex64>,
    pub eps2: Vec<Complex64>,
    pub classes: Vec<ClassFields>,
    pub steps: u64,
}

impl FieldState {
    pub fn len(&self) -> usize {
        self.eps1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps1.is_empty()
    }

    pub fn is_consistent(&self) -> bool {
        let n = self.len();
        self.eps2.len() == n
            && self.classes.iter().all(|c| {
                c.phi1.len() == n && c.phi2.len() == n && c.phi3.len() == n && c.phi4.len() == n
            })
    }
}

/// Names a recorded field: a probe, or `Φ_kˡ` for class `l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldId {
    Eps1,
    Eps2,
    Phi { kind: u8, class: usize },
}

impl FieldId {
    pub fn name(&self) -> String {
        match self {
            FieldId::Eps1 => "eps1".into(),
            FieldId::Eps2 => "eps2".into(),
            FieldId::Phi { kind, .. } => format!("phi{kind}"),
        }
    }

    pub fn class_index(&self) -> Option<usize> {
        match self {
            FieldId::Phi { class, .. } => Some(*class),
            _ => None,
        }
    }

    fn read(&self, state: &FieldState, i: usize) -> Complex64 {
        match *self {
            FieldId::Eps1 => state.eps1[i],
            FieldId::Eps2 => state.eps2[i],
            FieldId::Phi { kind, class } => {
                let c = &state.classes[class];
                match kind {
                    1 => c.phi1[i],
                    2 => c.phi2[i],
                    3 => c.phi3[i],
                    _ => c.phi4[i],
                }
            }
        }
    }
}

/// Time series of every field at one grid node.
#[derive(Clone, Debug)]
pub struct ProbeRecord {
    /// Requested position.
    pub z: f64,
    /// Grid node actually sampled.
    pub index: usize,
    pub z_node: f64,
    pub vartheta: f64,
    pub fields: Vec<(FieldId, Vec<Complex64>)>,
}

impl ProbeRecord {
    pub fn field(&self, id: FieldId) -> Option<&[Complex64]> {
        self.fields
            .iter()
            .find(|(f, _)| *f == id)
            .map(|(_, v)| v.as_slice())
    }
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub times: Vec<f64>,
    pub probes: Vec<ProbeRecord>,
    /// Boundary probe values at the recorded times.
    pub eps1_in: Vec<Complex64>,
    pub eps2_in: Vec<Complex64>,
    /// Total excitation number at the recorded times.
    pub excitation: Vec<f64>,
    pub final_state: FieldState,
    pub dt: f64,
    pub dz: f64,
    pub steps: u64,
    pub record_stride: u64,
    /// Time-integrated boundary fluxes.
    pub flux_in_eps1: f64,
    pub flux_in_eps2: f64,
    pub flux_out: f64,
    /// Time-integrated `Σ_l v_l |Φ₃ˡ(L)|²`.
    pub atom_flux_out: f64,
    pub weak_excitation_max: f64,
    pub weak_excitation_ok: bool,
    pub warnings: Vec<String>,
}

impl RunRecord {
    pub fn probe(&self, z: f64) -> Result<&ProbeRecord> {
        let tol = 0.5 * self.dz;
        self.probes
            .iter()
            .find(|p| (p.z - z).abs() <= 1e-12 || (p.z_node - z).abs() <= tol)
            .ok_or(Error::MissingProbe(z))
    }

    pub fn flux_in(&self) -> f64 {
        self.flux_in_eps1 + self.flux_in_eps2
    }

    /// `(N_end − N_start − (in − out)) / in`.
    pub fn excitation_imbalance(&self) -> f64 {
        let n0 = self.excitation.first().copied().unwrap_or(0.0);
        let n1 = self.excitation.last().copied().unwrap_or(0.0);
        let throughput = self.flux_in();
        if throughput == 0.0 {
            return 0.0;
        }
        (n1 - n0 - (throughput - self.flux_out)) / throughput
    }

    /// Output atom flux over total input photon flux.
    pub fn transfer_efficiency(&self) -> f64 {
        self.atom_flux_out / self.flux_in()
    }

    pub fn record_dt(&self) -> f64 {
        self.dt * self.record_stride as f64
    }
}

/// Precomputed per-node data for the frozen-pump propagator.
#[derive(Clone, Debug)]
pub struct Engine {
    params: SystemParams,
    ensemble: VelocityEnsemble,
    profile: StokesProfile,
    settings: EngineSettings,
    nz: usize,
    dz: f64,
    dt: f64,
    dim: usize,
    /// `c dt / dz` for the probes.
    nu_light: f64,
    /// `v dt / dz` for `[Φ₁, Φ₂, Φ₃, Φ₄]` of each class.
    nu_atoms: Vec<[f64; 4]>,
    speeds: Vec<[f64; 4]>,
    pump: Vec<f64>,
    detunings: Vec<(f64, f64)>,
    /// Row-major `dim × dim` Cayley matrices, one per node (frozen mode only).
    propagators: Vec<Complex64>,
}

impl Engine {
    /// Engine with the largest stable step `dt = cfl · dz / v_max`.
    pub fn new(
        params: &SystemParams,
        profile: &StokesProfile,
        ensemble: &VelocityEnsemble,
        settings: EngineSettings,
    ) -> Result<Self> {
        let vmax = max_speed(params, ensemble);
        let dt = settings.cfl * profile.dz() / vmax;
        Self::with_dt(params, profile, ensemble, settings, dt)
    }

    pub fn with_dt(
        params: &SystemParams,
        profile: &StokesProfile,
        ensemble: &VelocityEnsemble,
        settings: EngineSettings,
        dt: f64,
    ) -> Result<Self> {
        params.validate()?;
        if !(settings.cfl > 0.0 && settings.cfl <= 1.0) {
            return Err(Error::invalid("numerics.cfl", "must lie in (0, 1]"));
        }
        if !(settings.weak_threshold > 0.0) {
            return Err(Error::invalid("numerics.weak_threshold", "must be > 0"));
        }
        let dz = profile.dz();
        let vmax = max_speed(params, ensemble);
        let limit = settings.cfl * dz / vmax;
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::Unstable { dt, limit });
        }
        let speeds: Vec<[f64; 4]> = (0..ensemble.len()).map(|l| ensemble.speeds(l, params)).collect();
        if speeds.iter().flatten().any(|v| *v <= 0.0) {
            return Err(Error::invalid("ensemble", "all transport speeds must be positive"));
        }
        let nu_atoms = speeds.iter().map(|s| s.map(|v| v * dt / dz)).collect();
        let pump = ensemble
            .classes()
            .iter()
            .map(|c| (params.n * c.weight).sqrt())
            .collect();
        let detunings = (0..ensemble.len()).map(|l| ensemble.detunings(l, params)).collect();
        let mut engine = Self {
            params: params.clone(),
            ensemble: ensemble.clone(),
            profile: profile.clone(),
            settings,
            nz: profile.z().len(),
            dz,
            dt,
            dim: 2 + 3 * ensemble.len(),
            nu_light: params.c * dt / dz,
            nu_atoms,
            speeds,
            pump,
            detunings,
            propagators: Vec::new(),
        };
        if engine.settings.pump == PumpMode::Frozen {
            let pump: Vec<Complex64> = engine.pump.iter().map(|&p| Complex64::new(p, 0.0)).collect();
            let d = engine.dim;
            let mut props = Vec::with_capacity(engine.nz * d * d);
            for i in 0..engine.nz {
                let m = engine.cayley(i, &pump)?;
                for r in 0..d {
                    for c in 0..d {
                        props.push(m[(r, c)]);
                    }
                }
            }
            engine.propagators = props;
        }
        Ok(engine)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn profile(&self) -> &StokesProfile {
        &self.profile
    }

    pub fn ensemble(&self) -> &VelocityEnsemble {
        &self.ensemble
    }

    /// Reaction generator at node `i` for the given pump amplitudes.
    fn generator(&self, i: usize, pump: &[Complex64]) -> DMatrix<Complex64> {
        let d = self.dim;
        let p = &self.params;
        let o1 = self.profile.omega01()[i];
        let o2 = self.profile.omega02()[i];
        let mut a = DMatrix::<Complex64>::zeros(d, d);
        for (l, &phi1) in pump.iter().enumerate() {
            let (big_delta, small_delta) = self.detunings[l];
            let (i2, i3, i4) = (2 + 3 * l, 3 + 3 * l, 4 + 3 * l);
            a[(i2, i2)] = -Complex64::new(p.gamma2, big_delta);
            a[(i2, i3)] = -I * o1;
            a[(i2, 0)] = -I * p.g1 * phi1;
            a[(i4, i4)] = -Complex64::new(p.gamma4, big_delta);
            a[(i4, i3)] = -I * o2;
            a[(i4, 1)] = -I * p.g2 * phi1;
            a[(i3, i3)] = -I * small_delta;
            a[(i3, i2)] = -I * o1;
            a[(i3, i4)] = -I * o2;
            a[(0, i2)] = -I * p.g1 * phi1.conj();
            a[(1, i4)] = -I * p.g2 * phi1.conj();
        }
        a
    }

    /// `(I − A dt/2)⁻¹ (I + A dt/2)` at node `i`.
    fn cayley(&self, i: usize, pump: &[Complex64]) -> Result<DMatrix<Complex64>> {
        let d = self.dim;
        let half = self.generator(i, pump) * Complex64::new(0.5 * self.dt, 0.0);
        let eye = DMatrix::<Complex64>::identity(d, d);
        let lhs = &eye - &half;
        let rhs = &eye + &half;
        lhs.lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular(format!("Crank-Nicolson matrix at node {i}")))
    }

    pub fn initial_state(&self, boundary: &BoundaryInput) -> FieldState {
        let zero = vec![Complex64::default(); self.nz];
        let mut eps1 = zero.clone();
        let mut eps2 = zero.clone();
        eps1[0] = boundary.eps1.at(0.0);
        eps2[0] = boundary.eps2.at(0.0);
        let classes = self
            .pump
            .iter()
            .map(|&p| ClassFields {
                phi1: vec![Complex64::new(p, 0.0); self.nz],
                phi2: zero.clone(),
                phi3: zero.clone(),
                phi4: zero.clone(),
            })
            .collect();
        FieldState {
            t: 0.0,
            eps1,
            eps2,
            classes,
            steps: 0,
        }
    }

    /// Total excitation `dz Σ_{i≥1} (|ε₁|² + |ε₂|² + Σ_l |Φ₂ˡ|² + |Φ₃ˡ|² + |Φ₄ˡ|²)`.
    pub fn excitation(&self, state: &FieldState) -> f64 {
        let mut total = 0.0;
        for i in 1..self.nz {
            total += state.eps1[i].norm_sqr() + state.eps2[i].norm_sqr();
            for c in &state.classes {
                total += c.phi2[i].norm_sqr() + c.phi3[i].norm_sqr() + c.phi4[i].norm_sqr();
            }
        }
        total * self.dz
    }

    /// Largest `Σ_l (|Φ₂ˡ|² + |Φ₃ˡ|² + |Φ₄ˡ|²) / n` on the grid.
    pub fn weak_excitation(&self, state: &FieldState) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.nz {
            let mut s = 0.0;
            for c in &state.classes {
                s += c.phi2[i].norm_sqr() + c.phi3[i].norm_sqr() + c.phi4[i].norm_sqr();
            }
            worst = worst.max(s);
        }
        worst / self.params.n
    }

    /// Advances `state` by one step; returns `(flux_in_eps1, flux_in_eps2, flux_out, atom_flux_out)`
    /// integrated over the step.
    pub fn step(&self, state: &mut FieldState, boundary: &BoundaryInput) -> Result<[f64; 4]> {
        if !state.is_consistent() || state.len() != self.nz {
            return Err(Error::invalid("state", "field grids do not match the engine grid"));
        }
        let dt = self.dt;
        let last = self.nz - 1;
        let c = self.params.c;
        let mut fluxes = [
            dt * c * state.eps1[0].norm_sqr(),
            dt * c * state.eps2[0].norm_sqr(),
            dt * c * (state.eps1[last].norm_sqr() + state.eps2[last].norm_sqr()),
            0.0,
        ];
        for (cls, v) in state.classes.iter().zip(&self.speeds) {
            fluxes[2] += dt
                * (v[1] * cls.phi2[last].norm_sqr()
                    + v[2] * cls.phi3[last].norm_sqr()
                    + v[3] * cls.phi4[last].norm_sqr());
            fluxes[3] += dt * v[2] * cls.phi3[last].norm_sqr();
        }

        let t_next = state.t + dt;
        upwind(&mut state.eps1, self.nu_light, boundary.eps1.at(t_next));
        upwind(&mut state.eps2, self.nu_light, boundary.eps2.at(t_next));
        let zero = Complex64::default();
        for (l, cls) in state.classes.iter_mut().enumerate() {
            let nu = self.nu_atoms[l];
            upwind(&mut cls.phi1, nu[0], Complex64::new(self.pump[l], 0.0));
            upwind(&mut cls.phi2, nu[1], zero);
            upwind(&mut cls.phi3, nu[2], zero);
            upwind(&mut cls.phi4, nu[3], zero);
        }

        match self.settings.pump {
            PumpMode::Frozen => self.react_frozen(state),
            PumpMode::Dynamic => self.react_dynamic(state)?,
        }
        state.t = t_next;
        state.steps += 1;
        self.check_finite(state)?;
        Ok(fluxes)
    }

    fn react_frozen(&self, state: &mut FieldState) {
        let d = self.dim;
        let mut x = vec![Complex64::default(); d];
        let mut y = vec![Complex64::default(); d];
        for i in 1..self.nz {
            gather(state, i, &mut x);
            let m = &self.propagators[i * d * d..(i + 1) * d * d];
            for (r, out) in y.iter_mut().enumerate() {
                let row = &m[r * d..(r + 1) * d];
                *out = row.iter().zip(&x).fold(Complex64::default(), |acc, (a, b)| acc + a * b);
            }
            scatter(state, i, &y);
        }
    }

    fn react_dynamic(&self, state: &mut FieldState) -> Result<()> {
        let d = self.dim;
        let p = &self.params;
        let mut x = vec![Complex64::default(); d];
        for i in 1..self.nz {
            let pump: Vec<Complex64> = state.classes.iter().map(|c| c.phi1[i]).collect();
            gather(state, i, &mut x);
            let m = self.cayley(i, &pump)?;
            let y = &m * nalgebra::DVector::from_column_slice(&x);
            let (e1, e2) = (x[0].conj(), x[1].conj());
            for (l, cls) in state.classes.iter_mut().enumerate() {
                let (phi2, phi4) = (x[2 + 3 * l], x[4 + 3 * l]);
                cls.phi1[i] += self.dt * (-I * p.g1 * e1 * phi2 - I * p.g2 * e2 * phi4);
            }
            scatter(state, i, y.as_slice());
        }
        Ok(())
    }

    fn check_finite(&self, state: &FieldState) -> Result<()> {
        let bad = |field: String, v: &[Complex64]| {
            v.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())).map(|i| Error::NonFinite {
                field,
                z_index: i,
                steps: state.steps,
            })
        };
        if let Some(e) = bad("eps1".into(), &state.eps1) {
            return Err(e);
        }
        if let Some(e) = bad("eps2".into(), &state.eps2) {
            return Err(e);
        }
        for (l, c) in state.classes.iter().enumerate() {
            for (k, v) in [(1, &c.phi1), (2, &c.phi2), (3, &c.phi3), (4, &c.phi4)] {
                if let Some(e) = bad(format!("phi{k}[class {l}]"), v) {
                    return Err(e);
                }
            }
        }
        Ok(())
    }

    /// Total delay `τ(L)` of the adiabatic polariton.
    pub fn transit_time(&self) -> Result<f64> {
        propagation_delay(0.0, self.profile.length(), &self.profile, &self.params)
    }

    /// Integrates up to `horizon`, recording every field at the nodes nearest `probes`.
    /// `samples` bounds the number of recorded time points.
    pub fn run(
        &self,
        boundary: &BoundaryInput,
        horizon: f64,
        probes: &[f64],
        samples: usize,
    ) -> Result<RunRecord> {
        if !(horizon > 0.0) {
            return Err(Error::invalid("numerics.horizon", "must be > 0"));
        }
        let mut warnings = Vec::new();
        let needed = boundary.support_end() + self.transit_time()?;
        if horizon < needed {
            let msg = format!(
                "horizon {horizon:.4} ends before the pulse has left the medium (needs ~{needed:.4})"
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let steps = (horizon / self.dt).ceil() as u64;
        let stride = (steps / samples.max(1) as u64).max(1);
        let angles = model::mixing_angles(&self.profile, &self.params);
        let mut records: Vec<ProbeRecord> = probes
            .iter()
            .map(|&z| {
                let index = self.profile.nearest_index(z);
                let mut fields = vec![(FieldId::Eps1, Vec::new()), (FieldId::Eps2, Vec::new())];
                for class in 0..self.ensemble.len() {
                    for kind in 1..=4 {
                        fields.push((FieldId::Phi { kind, class }, Vec::new()));
                    }
                }
                ProbeRecord {
                    z,
                    index,
                    z_node: self.profile.z()[index],
                    vartheta: angles.vartheta[index],
                    fields,
                }
            })
            .collect();

        let mut state = self.initial_state(boundary);
        let mut record = RunRecord {
            times: Vec::new(),
            probes: Vec::new(),
            eps1_in: Vec::new(),
            eps2_in: Vec::new(),
            excitation: Vec::new(),
            final_state: state.clone(),
            dt: self.dt,
            dz: self.dz,
            steps,
            record_stride: stride,
            flux_in_eps1: 0.0,
            flux_in_eps2: 0.0,
            flux_out: 0.0,
            atom_flux_out: 0.0,
            weak_excitation_max: 0.0,
            weak_excitation_ok: true,
            warnings,
        };
        let sample = |state: &FieldState, record: &mut RunRecord, probes: &mut [ProbeRecord]| {
            record.times.push(state.t);
            record.eps1_in.push(state.eps1[0]);
            record.eps2_in.push(state.eps2[0]);
            record.excitation.push(self.excitation(state));
            for p in probes.iter_mut() {
                for (id, series) in p.fields.iter_mut() {
                    series.push(id.read(state, p.index));
                }
            }
        };
        sample(&state, &mut record, &mut records);
        let mut totals = [0.0f64; 4];
        for k in 1..=steps {
            let f = self.step(&mut state, boundary)?;
            for (t, v) in totals.iter_mut().zip(f) {
                *t += v;
            }
            let weak = self.weak_excitation(&state);
            record.weak_excitation_max = record.weak_excitation_max.max(weak);
            if k % stride == 0 || k == steps {
                sample(&state, &mut record, &mut records);
            }
        }
        [
            record.flux_in_eps1,
            record.flux_in_eps2,
            record.flux_out,
            record.atom_flux_out,
        ] = totals;
        if record.weak_excitation_max > self.settings.weak_threshold {
            record.weak_excitation_ok = false;
            let msg = format!(
                "weak-excitation monitor reached {:.3e} (threshold {:.3e})",
                record.weak_excitation_max, self.settings.weak_threshold
            );
            log::warn!("{msg}");
            record.warnings.push(msg);
        }
        record.probes = records;
        record.final_state = state;
        Ok(record)
    }
}

fn max_speed(params: &SystemParams, ensemble: &VelocityEnsemble) -> f64 {
    (0..ensemble.len())
        .flat_map(|l| ensemble.speeds(l, params))
        .fold(params.c, f64::max)
}

/// First-order upwind update for a positive speed; node 0 takes the inflow value.
fn upwind(u: &mut [Complex64], nu: f64, inflow: Complex64) {
    for i in (1..u.len()).rev() {
        u[i] = u[i] - (u[i] - u[i - 1]) * nu;
    }
    u[0] = inflow;
}

fn gather(state: &FieldState, i: usize, x: &mut [Complex64]) {
    x[0] = state.eps1[i];
    x[1] = state.eps2[i];
    for (l, c) in state.classes.iter().enumerate() {
        x[2 + 3 * l] = c.phi2[i];
        x[3 + 3 * l] = c.phi3[i];
        x[4 + 3 * l] = c.phi4[i];
    }
}

fn scatter(state: &mut FieldState, i: usize, y: &[Complex64]) {
    state.eps1[i] = y[0];
    state.eps2[i] = y[1];
    for (l, c) in state.classes.iter_mut().enumerate() {
        c.phi2[i] = y[2 + 3 * l];
        c.phi3[i] = y[3 + 3 * l];
        c.phi4[i] = y[4 + 3 * l];
    }
}

/// Entrance self-adjustment summary at `z = δ`.
#[derive(Clone, Debug)]
pub struct TransientReport {
    pub delta_z: f64,
    pub vartheta: f64,
    /// `(t, r(t))` where the probes carry at least `1e-3` of their peak amplitude.
    pub residual: Vec<(f64, f64)>,
    pub max_residual: f64,
    pub final_residual: f64,
    /// Earliest time after which `r ≤ tol` for every later significant sample.
    pub settle_time: Option<f64>,
    pub settled: bool,
    /// `1 − ∫|ε_j(δ)|² / ∫|ε_j(0)|²`; `None` if probe `j` carried no input.
    pub damped_eps1: Option<f64>,
    pub damped_eps2: Option<f64>,
}

pub fn entrance_transient_diagnostics(
    record: &RunRecord,
    delta_z: f64,
    tol: f64,
) -> Result<TransientReport> {
    let probe = record.probe(delta_z)?;
    let e1 = probe.field(FieldId::Eps1).ok_or(Error::MissingProbe(delta_z))?;
    let e2 = probe.field(FieldId::Eps2).ok_or(Error::MissingProbe(delta_z))?;
    let tan = probe.vartheta.tan();
    let peak = e1
        .iter()
        .zip(e2)
        .map(|(a, b)| a.norm().max(b.norm()))
        .fold(0.0, f64::max);
    let residual: Vec<(f64, f64)> = record
        .times
        .iter()
        .zip(e1.iter().zip(e2))
        .filter_map(|(&t, (a, b))| {
            let scale = a.norm().max(b.norm());
            (peak > 0.0 && scale >= 1e-3 * peak).then(|| (t, (b - a * tan).norm() / scale))
        })
        .collect();
    let max_residual = residual.iter().map(|r| r.1).fold(0.0, f64::max);
    let final_residual = residual.last().map(|r| r.1).unwrap_or(0.0);
    let settle_time = match residual.iter().rposition(|r| r.1 > tol) {
        None => residual.first().map(|r| r.0),
        Some(k) => residual.get(k + 1).map(|r| r.0),
    };
    let h = record.record_dt();
    let fluence = |v: &[Complex64]| {
        let sq: Vec<f64> = v.iter().map(|z| z.norm_sqr()).collect();
        quad::trapezoid_samples(&sq, h)
    };
    let damped = |at: &[Complex64], input: &[Complex64]| {
        let fin = fluence(input);
        (fin > 0.0).then(|| 1.0 - fluence(at) / fin)
    };
    Ok(TransientReport {
        delta_z,
        vartheta: probe.vartheta,
        max_residual,
        final_residual,
        settled: settle_time.is_some(),
        settle_time,
        damped_eps1: damped(e1, &record.eps1_in),
        damped_eps2: damped(e2, &record.eps2_in),
        residual,
    })
}
