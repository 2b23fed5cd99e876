//! Time stepping: deterministic RK4, Euler-Maruyama with seeded Gaussian
//! noise, gain schedules, and the single-trial driver `integrate_trial`.
//!
//! The Euler-Maruyama update is
//!
//! ```text
//! x <- x + f(x, t) dt + A_n sqrt(dt) eta,    eta ~ N(0, 1) i.i.d.
//! ```
//!
//! applied to the channels selected by the noise configuration (phases only,
//! amplitudes and phases, or both quadratures of a complex state). With
//! A_n = 0 it reduces exactly to the explicit Euler step. RK4 is the
//! classical fourth-order scheme and handles explicitly time-dependent
//! drift, which the stationary-frame model needs.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::energy::{energy_complex, energy_phase_split, energy_stationary};
use crate::error::{OscimError, Result};
use crate::matrix::SquareMatrix;
use crate::model::{
    ampphase_rhs, dopo_rhs, oim_rhs, poim_phase_rhs, sl_rhs, stationary_rhs, CouplingSet,
    DopoParams, NetworkState, OscillatorParams,
};

/// Scalar gain as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    Constant { base: f64 },
    /// base + peak * min(t, t_stop) / t_stop
    LinearRamp { base: f64, peak: f64, t_stop: f64 },
}

impl Schedule {
    pub fn constant(v: f64) -> Self {
        Schedule::Constant { base: v }
    }

    pub fn validate(&self) -> Result<()> {
        if let Schedule::LinearRamp { t_stop, .. } = self {
            if *t_stop <= 0.0 {
                return Err(OscimError::InvalidParameter(
                    "ramp t_stop must be > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

pub fn evaluate_schedule(s: &Schedule, t: f64) -> f64 {
    match *s {
        Schedule::Constant { base } => base,
        Schedule::LinearRamp { base, peak, t_stop } => {
            base + peak * t.clamp(0.0, t_stop) / t_stop
        }
    }
}

/// Which state components receive additive noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseChannels {
    PhaseOnly,
    AmpAndPhase,
    ComplexAdditive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Noise strength per sqrt(time).
    pub amplitude: f64,
    pub seed: u64,
    pub channels: NoiseChannels,
}

impl NoiseConfig {
    pub fn none(seed: u64) -> Self {
        Self {
            amplitude: 0.0,
            seed,
            channels: NoiseChannels::PhaseOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4Deterministic,
    EulerMaruyama,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_stop: f64,
    pub method: Method,
    /// Trace sampling stride in steps.
    pub record_every: usize,
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_stop: f64, record_every: usize) -> Self {
        Self {
            dt,
            t_stop,
            method: Method::Rk4Deterministic,
            record_every,
        }
    }

    pub fn em(dt: f64, t_stop: f64, record_every: usize) -> Self {
        Self {
            dt,
            t_stop,
            method: Method::EulerMaruyama,
            record_every,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 {
            return Err(OscimError::InvalidParameter("dt must be > 0".into()));
        }
        if self.t_stop <= 0.0 {
            return Err(OscimError::InvalidParameter("t_stop must be > 0".into()));
        }
        if self.record_every == 0 {
            return Err(OscimError::InvalidParameter(
                "record_every must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// One classical RK4 step of dx/dt = f(x, t).
pub fn step_rk4<F>(f: &F, state: &mut [f64], t: f64, dt: f64)
where
    F: Fn(&[f64], f64) -> Vec<f64>,
{
    let n = state.len();
    let k1 = f(state, t);
    let mut tmp: Vec<f64> = (0..n).map(|i| state[i] + 0.5 * dt * k1[i]).collect();
    let k2 = f(&tmp, t + 0.5 * dt);
    for i in 0..n {
        tmp[i] = state[i] + 0.5 * dt * k2[i];
    }
    let k3 = f(&tmp, t + 0.5 * dt);
    for i in 0..n {
        tmp[i] = state[i] + dt * k3[i];
    }
    let k4 = f(&tmp, t + dt);
    for i in 0..n {
        state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// One Euler-Maruyama step; noise is applied to components where `mask` is
/// true, drawing one standard Gaussian per active component in index order.
pub fn step_em<F, R>(
    f: &F,
    state: &mut [f64],
    t: f64,
    dt: f64,
    amplitude: f64,
    mask: &[bool],
    rng: &mut R,
) where
    F: Fn(&[f64], f64) -> Vec<f64>,
    R: Rng,
{
    let drift = f(state, t);
    let sqrt_dt = dt.sqrt();
    for i in 0..state.len() {
        state[i] += drift[i] * dt;
        if amplitude > 0.0 && mask[i] {
            let eta: f64 = rng.sample(StandardNormal);
            state[i] += amplitude * sqrt_dt * eta;
        }
    }
}

/// Dynamical system selector shared by the CLI and the experiment runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Sl,
    AmpPhase,
    PoimPhase,
    Oim,
    Stationary,
    Dopo,
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Sl => "sl",
            ModelKind::AmpPhase => "ampphase",
            ModelKind::PoimPhase => "poim-phase",
            ModelKind::Oim => "oim",
            ModelKind::Stationary => "stationary",
            ModelKind::Dopo => "dopo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sl" => Some(ModelKind::Sl),
            "ampphase" => Some(ModelKind::AmpPhase),
            "poim-phase" => Some(ModelKind::PoimPhase),
            "oim" => Some(ModelKind::Oim),
            "stationary" => Some(ModelKind::Stationary),
            "dopo" => Some(ModelKind::Dopo),
            _ => None,
        }
    }

    pub const ALL: [ModelKind; 6] = [
        ModelKind::Sl,
        ModelKind::AmpPhase,
        ModelKind::PoimPhase,
        ModelKind::Oim,
        ModelKind::Stationary,
        ModelKind::Dopo,
    ];

    /// Whether trials of this model carry amplitude information.
    pub fn has_amplitudes(&self) -> bool {
        matches!(self, ModelKind::Sl | ModelKind::AmpPhase | ModelKind::Dopo)
    }
}

/// Everything needed to run one trial of one model.
#[derive(Debug, Clone)]
pub struct TrialSpec {
    pub model: ModelKind,
    /// Oscillator parameters; required by sl / ampphase.
    pub params: Option<OscillatorParams>,
    /// Coupling matrices; required by every coupled model.
    pub coupling: Option<CouplingSet>,
    /// Second-harmonic gain Ks(t) for the phase models.
    pub ks: Schedule,
    /// Coupling gain K(t) for the phase models.
    pub k: Schedule,
    /// DOPO parameters; required by the dopo model.
    pub dopo: Option<DopoParams>,
    pub noise: NoiseConfig,
    pub integrator: IntegratorConfig,
}

/// Sampled trajectory of one trial.
#[derive(Debug, Clone)]
pub struct Trace {
    pub model: ModelKind,
    pub n: usize,
    pub times: Vec<f64>,
    /// Flat states at the sampled times (layout depends on the model).
    pub states: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    pub final_state: Vec<f64>,
    pub final_time: f64,
    /// How many drift evaluations hit the amplitude floor.
    pub clamp_events: u64,
}

impl Trace {
    /// Phases used for spin readout: the angle whose cosine is the
    /// observable of the model.
    pub fn readout_phases(&self) -> Vec<f64> {
        match self.model {
            ModelKind::Sl => (0..self.n)
                .map(|i| {
                    Complex64::new(self.final_state[2 * i], self.final_state[2 * i + 1]).arg()
                })
                .collect(),
            ModelKind::AmpPhase => self.final_state[self.n..].to_vec(),
            ModelKind::PoimPhase | ModelKind::Oim => self.final_state.clone(),
            // observable is cos(t + phi)
            ModelKind::Stationary => self
                .final_state
                .iter()
                .map(|phi| self.final_time + phi)
                .collect(),
            ModelKind::Dopo => (0..self.n)
                .map(|i| {
                    Complex64::new(self.final_state[i], self.final_state[self.n + i]).arg()
                })
                .collect(),
        }
    }

    /// Final per-oscillator amplitudes, for models that have them.
    pub fn final_amplitudes(&self) -> Option<Vec<f64>> {
        match self.model {
            ModelKind::Sl => Some(
                (0..self.n)
                    .map(|i| {
                        Complex64::new(self.final_state[2 * i], self.final_state[2 * i + 1])
                            .norm()
                    })
                    .collect(),
            ),
            ModelKind::AmpPhase => Some(self.final_state[..self.n].to_vec()),
            ModelKind::Dopo => Some(
                (0..self.n)
                    .map(|i| {
                        Complex64::new(self.final_state[i], self.final_state[self.n + i]).norm()
                    })
                    .collect(),
            ),
            _ => None,
        }
    }

    fn amplitudes_at(&self, sample: usize) -> Option<Vec<f64>> {
        let st = &self.states[sample];
        match self.model {
            ModelKind::Sl => Some(
                (0..self.n)
                    .map(|i| Complex64::new(st[2 * i], st[2 * i + 1]).norm())
                    .collect(),
            ),
            ModelKind::AmpPhase => Some(st[..self.n].to_vec()),
            ModelKind::Dopo => Some(
                (0..self.n)
                    .map(|i| Complex64::new(st[i], st[self.n + i]).norm())
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Quasi-steady amplitudes: per-oscillator time average of r over the
    /// recorded samples in the final `frac` of the run.
    pub fn r_star_average(&self, frac: f64) -> Option<Vec<f64>> {
        let cutoff = self.final_time * (1.0 - frac);
        let mut acc = vec![0.0; self.n];
        let mut count = 0usize;
        for (idx, &t) in self.times.iter().enumerate() {
            if t >= cutoff {
                let r = self.amplitudes_at(idx)?;
                for (a, v) in acc.iter_mut().zip(r) {
                    *a += v;
                }
                count += 1;
            }
        }
        if count == 0 {
            return self.final_amplitudes();
        }
        Some(acc.into_iter().map(|a| a / count as f64).collect())
    }

    /// Column labels for the per-oscillator part of the trace CSV.
    pub fn column_labels(&self) -> Vec<String> {
        let n = self.n;
        match self.model {
            ModelKind::Sl | ModelKind::AmpPhase => (0..n)
                .map(|i| format!("r{i}"))
                .chain((0..n).map(|i| format!("theta{i}")))
                .collect(),
            ModelKind::PoimPhase | ModelKind::Oim => {
                (0..n).map(|i| format!("theta{i}")).collect()
            }
            ModelKind::Stationary => (0..n)
                .map(|i| format!("phi{i}"))
                .chain((0..n).map(|i| format!("obs{i}")))
                .collect(),
            ModelKind::Dopo => (0..n)
                .map(|i| format!("c{i}"))
                .chain((0..n).map(|i| format!("s{i}")))
                .collect(),
        }
    }

    /// Row of values matching `column_labels` for one sample.
    fn column_values(&self, sample: usize) -> Vec<f64> {
        let st = &self.states[sample];
        let t = self.times[sample];
        match self.model {
            ModelKind::Sl => {
                let mut row: Vec<f64> = (0..self.n)
                    .map(|i| Complex64::new(st[2 * i], st[2 * i + 1]).norm())
                    .collect();
                row.extend(
                    (0..self.n).map(|i| Complex64::new(st[2 * i], st[2 * i + 1]).arg()),
                );
                row
            }
            ModelKind::AmpPhase | ModelKind::Dopo => st.clone(),
            ModelKind::PoimPhase | ModelKind::Oim => st.clone(),
            ModelKind::Stationary => {
                let mut row = st.clone();
                row.extend(st.iter().map(|phi| (t + phi).cos()));
                row
            }
        }
    }

    /// Render the trace as CSV with header `t,E,<per-oscillator columns>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,E");
        for label in self.column_labels() {
            out.push(',');
            out.push_str(&label);
        }
        out.push('\n');
        for idx in 0..self.times.len() {
            out.push_str(&format!("{},{}", self.times[idx], self.energies[idx]));
            for v in self.column_values(idx) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Sidecar metadata written next to every trace CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub model: String,
    pub seed: u64,
    pub dt: f64,
    pub t_stop: f64,
    pub method: Method,
    pub record_every: usize,
    pub ks_schedule: Schedule,
    pub k_schedule: Schedule,
    pub noise_amplitude: f64,
    pub noise_channels: NoiseChannels,
    /// Git-style blob hash of the instance file contents, when an instance
    /// was involved.
    pub instance_hash: Option<String>,
    pub clamp_events: u64,
}

/// Seeded random initial state for a model: phases uniform on [0, 2 pi),
/// amplitudes at 0.1 * (1 + 0.01 N(0,1)) to break symmetry near the origin.
pub fn random_initial_state(model: ModelKind, n: usize, seed: u64) -> NetworkState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two_pi = 2.0 * std::f64::consts::PI;
    let phases: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..two_pi)).collect();
    match model {
        ModelKind::PoimPhase | ModelKind::Oim => NetworkState::PhaseOnly { theta: phases },
        ModelKind::Stationary => NetworkState::StationaryPhase {
            phi: phases,
            t: 0.0,
        },
        ModelKind::Sl | ModelKind::AmpPhase | ModelKind::Dopo => {
            let theta = phases;
            let r: Vec<f64> = (0..n)
                .map(|_| {
                    let eps: f64 = rng.sample(StandardNormal);
                    0.1 * (1.0 + 0.01 * eps)
                })
                .map(|r: f64| r.max(0.0))
                .collect();
            match model {
                ModelKind::Sl => NetworkState::Complex {
                    a: r
                        .iter()
                        .zip(&theta)
                        .map(|(&r, &t)| Complex64::from_polar(r, t))
                        .collect(),
                },
                ModelKind::AmpPhase => NetworkState::AmpPhase { r, theta },
                _ => {
                    // dopo quadratures c + i s = r e^{i theta}
                    let c: Vec<f64> = r.iter().zip(&theta).map(|(&r, &t)| r * t.cos()).collect();
                    let s: Vec<f64> = r.iter().zip(&theta).map(|(&r, &t)| r * t.sin()).collect();
                    NetworkState::AmpPhase { r: c, theta: s }
                }
            }
        }
    }
}

fn flatten_initial(model: ModelKind, state: &NetworkState) -> Result<(Vec<f64>, usize)> {
    state.validate()?;
    match (model, state) {
        (ModelKind::Sl, NetworkState::Complex { a }) => {
            let mut flat = Vec::with_capacity(2 * a.len());
            for z in a {
                flat.push(z.re);
                flat.push(z.im);
            }
            Ok((flat, a.len()))
        }
        (ModelKind::AmpPhase, NetworkState::AmpPhase { r, theta }) => {
            let mut flat = r.clone();
            flat.extend_from_slice(theta);
            Ok((flat, r.len()))
        }
        // the dopo initial state reuses the two-vector layout for (c, s)
        (ModelKind::Dopo, NetworkState::AmpPhase { r, theta }) => {
            let mut flat = r.clone();
            flat.extend_from_slice(theta);
            Ok((flat, r.len()))
        }
        (ModelKind::PoimPhase | ModelKind::Oim, NetworkState::PhaseOnly { theta }) => {
            Ok((theta.clone(), theta.len()))
        }
        (ModelKind::Stationary, NetworkState::StationaryPhase { phi, t }) => {
            if *t != 0.0 {
                return Err(OscimError::InvalidParameter(
                    "stationary trials start at t = 0".into(),
                ));
            }
            Ok((phi.clone(), phi.len()))
        }
        _ => Err(OscimError::InvalidParameter(format!(
            "state representation does not match model {}",
            model.label()
        ))),
    }
}

fn noise_mask(model: ModelKind, channels: NoiseChannels, n: usize) -> Result<Vec<bool>> {
    match (model, channels) {
        (ModelKind::PoimPhase | ModelKind::Oim | ModelKind::Stationary, NoiseChannels::PhaseOnly) => {
            Ok(vec![true; n])
        }
        (ModelKind::AmpPhase, NoiseChannels::PhaseOnly) => {
            let mut mask = vec![false; 2 * n];
            mask[n..].fill(true);
            Ok(mask)
        }
        (ModelKind::AmpPhase, NoiseChannels::AmpAndPhase) => Ok(vec![true; 2 * n]),
        (ModelKind::Sl | ModelKind::Dopo, NoiseChannels::ComplexAdditive) => Ok(vec![true; 2 * n]),
        _ => Err(OscimError::InvalidParameter(format!(
            "noise channels {channels:?} do not apply to model {}",
            model.label()
        ))),
    }
}

/// Integrate one trial and sample its trajectory.
///
/// The drift is assembled from the model tag; K and Ks are evaluated from
/// their schedules at every drift evaluation. Diverging states surface an
/// error carrying the offending step and the last finite state.
pub fn integrate_trial(spec: &TrialSpec, initial: &NetworkState) -> Result<Trace> {
    spec.integrator.validate()?;
    spec.ks.validate()?;
    spec.k.validate()?;
    if spec.noise.amplitude < 0.0 {
        return Err(OscimError::InvalidParameter(
            "noise amplitude must be >= 0".into(),
        ));
    }

    let (mut state, n) = flatten_initial(spec.model, initial)?;
    let clamp_counter = std::cell::Cell::new(0u64);

    let params = spec.params.clone();
    let coupling = spec.coupling.clone();
    let need = |cond: bool, what: &str| -> Result<()> {
        if cond {
            Ok(())
        } else {
            Err(OscimError::InvalidParameter(format!(
                "model {} requires {what}",
                spec.model.label()
            )))
        }
    };

    // Per-model drift over the flat layout.
    let drift: Box<dyn Fn(&[f64], f64) -> Vec<f64> + '_> = match spec.model {
        ModelKind::Sl => {
            need(params.is_some(), "oscillator parameters")?;
            need(coupling.is_some(), "couplings")?;
            let p = params.clone().unwrap();
            let c = coupling.clone().unwrap();
            Box::new(move |flat, _t| {
                let a: Vec<Complex64> = (0..flat.len() / 2)
                    .map(|i| Complex64::new(flat[2 * i], flat[2 * i + 1]))
                    .collect();
                let da = sl_rhs(&a, &p, &c).expect("dimensions fixed at setup");
                let mut out = Vec::with_capacity(flat.len());
                for dz in da {
                    out.push(dz.re);
                    out.push(dz.im);
                }
                out
            })
        }
        ModelKind::AmpPhase => {
            need(params.is_some(), "oscillator parameters")?;
            need(coupling.is_some(), "couplings")?;
            let p = params.clone().unwrap();
            let c = coupling.clone().unwrap();
            let counter = &clamp_counter;
            Box::new(move |flat, _t| {
                let n = flat.len() / 2;
                let d = ampphase_rhs(&flat[..n], &flat[n..], &p, &c)
                    .expect("dimensions fixed at setup");
                if d.clamped {
                    counter.set(counter.get() + 1);
                }
                let mut out = d.dr;
                out.extend(d.dtheta);
                out
            })
        }
        ModelKind::PoimPhase => {
            need(coupling.is_some(), "couplings")?;
            let c = coupling.clone().unwrap();
            let ks = spec.ks.clone();
            let k = spec.k.clone();
            Box::new(move |flat, t| {
                poim_phase_rhs(
                    flat,
                    evaluate_schedule(&ks, t),
                    evaluate_schedule(&k, t),
                    &c.j,
                    &c.g,
                )
                .expect("dimensions fixed at setup")
            })
        }
        ModelKind::Oim => {
            need(coupling.is_some(), "couplings")?;
            let c = coupling.clone().unwrap();
            let ks = spec.ks.clone();
            let k = spec.k.clone();
            Box::new(move |flat, t| {
                oim_rhs(
                    flat,
                    evaluate_schedule(&ks, t),
                    evaluate_schedule(&k, t),
                    &c.j,
                )
                .expect("dimensions fixed at setup")
            })
        }
        ModelKind::Stationary => {
            need(coupling.is_some(), "couplings")?;
            let c = coupling.clone().unwrap();
            let k = spec.k.clone();
            Box::new(move |flat, t| {
                stationary_rhs(flat, t, evaluate_schedule(&k, t), &c.j)
                    .expect("dimensions fixed at setup")
            })
        }
        ModelKind::Dopo => {
            need(spec.dopo.is_some(), "dopo parameters")?;
            spec.dopo.as_ref().unwrap().validate()?;
            let p0 = spec.dopo.as_ref().unwrap().p0;
            Box::new(move |flat, _t| {
                let n = flat.len() / 2;
                let (dc, ds) = dopo_rhs(&flat[..n], &flat[n..], p0);
                let mut out = dc;
                out.extend(ds);
                out
            })
        }
    };

    // Energy of the recorded samples.
    let zero_g = SquareMatrix::zeros(n);
    let dopo_equiv: Option<(OscillatorParams, CouplingSet)> = match spec.model {
        ModelKind::Dopo => {
            let p0 = spec.dopo.as_ref().unwrap().p0;
            Some((
                OscillatorParams::new(vec![-1.0; n], vec![1.0; n], vec![p0; n], 0.0)?,
                CouplingSet::zero(n),
            ))
        }
        _ => None,
    };
    let energy_of = |flat: &[f64], t: f64| -> Result<f64> {
        match spec.model {
            ModelKind::Sl => {
                let a: Vec<Complex64> = (0..n)
                    .map(|i| Complex64::new(flat[2 * i], flat[2 * i + 1]))
                    .collect();
                Ok(energy_complex(&a, params.as_ref().unwrap(), coupling.as_ref().unwrap())?
                    .total)
            }
            ModelKind::AmpPhase => {
                let a: Vec<Complex64> = (0..n)
                    .map(|i| Complex64::from_polar(flat[i], flat[n + i]))
                    .collect();
                Ok(energy_complex(&a, params.as_ref().unwrap(), coupling.as_ref().unwrap())?
                    .total)
            }
            ModelKind::PoimPhase => {
                let c = coupling.as_ref().unwrap();
                energy_phase_split(
                    flat,
                    evaluate_schedule(&spec.ks, t),
                    evaluate_schedule(&spec.k, t),
                    &c.j,
                    &c.g,
                )
            }
            ModelKind::Oim => {
                let c = coupling.as_ref().unwrap();
                energy_phase_split(
                    flat,
                    evaluate_schedule(&spec.ks, t),
                    evaluate_schedule(&spec.k, t),
                    &c.j,
                    &zero_g,
                )
            }
            ModelKind::Stationary => {
                let c = coupling.as_ref().unwrap();
                energy_stationary(flat, t, evaluate_schedule(&spec.k, t), &c.j)
            }
            ModelKind::Dopo => {
                let (p, c) = dopo_equiv.as_ref().unwrap();
                let a: Vec<Complex64> = (0..n)
                    .map(|i| Complex64::new(flat[i], flat[n + i]))
                    .collect();
                Ok(energy_complex(&a, p, c)?.total)
            }
        }
    };

    let dt = spec.integrator.dt;
    let steps = (spec.integrator.t_stop / dt).round().max(1.0) as usize;
    let mask = if spec.noise.amplitude > 0.0 && spec.integrator.method == Method::EulerMaruyama {
        noise_mask(spec.model, spec.noise.channels, n)?
    } else {
        vec![false; state.len()]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise.seed);

    let mut times = vec![0.0];
    let mut states = vec![state.clone()];
    let mut energies = vec![energy_of(&state, 0.0)?];
    let mut last_finite = state.clone();

    for step in 1..=steps {
        let t = (step - 1) as f64 * dt;
        match spec.integrator.method {
            Method::Rk4Deterministic => step_rk4(&drift, &mut state, t, dt),
            Method::EulerMaruyama => step_em(
                &drift,
                &mut state,
                t,
                dt,
                spec.noise.amplitude,
                &mask,
                &mut rng,
            ),
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(OscimError::IntegrationDiverged {
                step,
                t: step as f64 * dt,
                last_state: last_finite,
            });
        }
        last_finite.copy_from_slice(&state);
        if step % spec.integrator.record_every == 0 || step == steps {
            let t_now = step as f64 * dt;
            times.push(t_now);
            states.push(state.clone());
            energies.push(energy_of(&state, t_now)?);
        }
    }

    Ok(Trace {
        model: spec.model,
        n,
        times,
        states,
        energies,
        final_state: state,
        final_time: steps as f64 * dt,
        clamp_events: clamp_counter.get(),
    })
}
