//! Parameters, state representations and drift terms for every dynamical
//! system in the crate.
//!
//! The root model is the conjugate Stuart-Landau network
//!
//! ```text
//! da_i/dt = (mu_i - alpha_i |a_i|^2) a_i + kappa_i e^{i phi_p} conj(a_i)
//!           + xi * sum_{j != i} (J_ij a_j + G_ij conj(a_j))
//! ```
//!
//! with normal (J) and conjugate (G) coupling pathways. Everything else is a
//! change of variables or a reduction of it:
//!
//! * `ampphase_rhs`   — polar form in (r_i, theta_i) with the r_j/r_i weights
//!                      that amplitude heterogeneity introduces,
//! * `poim_phase_rhs` — phase-only reduction, difference plus sum coupling,
//! * `oim_rhs`        — classic Kuramoto-with-second-harmonic form (G = 0),
//! * `stationary_rhs` — phase dynamics in the non-rotating frame, where the
//!                      observable cos(t + phi) settles to +-1,
//! * `dopo_rhs`       — normalized DOPO quadrature pair, which maps onto a
//!                      single Stuart-Landau oscillator via `dopo_to_sl_params`.
//!
//! All coupled right-hand sides expand the pairwise trig terms through
//! per-oscillator sin/cos and matrix-vector products, so one evaluation costs
//! O(n) trig calls plus a few dense mat-vecs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{OscimError, Result};
use crate::graph::IsingInstance;
use crate::matrix::SquareMatrix;

/// Amplitudes below this are clamped in the theta equation of
/// `ampphase_rhs`, which divides by r_i; the event is reported to the caller.
pub const R_FLOOR: f64 = 1e-9;

/// Per-oscillator gain/saturation/pump parameters plus the global pump phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OscillatorParams {
    /// Net linear gain minus loss, per oscillator (1/time).
    pub mu: Vec<f64>,
    /// Nonlinear saturation, strictly positive.
    pub alpha: Vec<f64>,
    /// Parametric pump strength, nonnegative.
    pub kappa: Vec<f64>,
    /// Pump phase (radians).
    pub phi_p: f64,
}

impl OscillatorParams {
    pub fn uniform(n: usize, mu: f64, alpha: f64, kappa: f64, phi_p: f64) -> Result<Self> {
        let p = Self {
            mu: vec![mu; n],
            alpha: vec![alpha; n],
            kappa: vec![kappa; n],
            phi_p,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn new(mu: Vec<f64>, alpha: Vec<f64>, kappa: Vec<f64>, phi_p: f64) -> Result<Self> {
        let p = Self {
            mu,
            alpha,
            kappa,
            phi_p,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.mu.len();
        if self.alpha.len() != n || self.kappa.len() != n {
            return Err(OscimError::DimensionMismatch {
                expected: n,
                got: self.alpha.len().max(self.kappa.len()),
            });
        }
        if self.alpha.iter().any(|&a| a <= 0.0) {
            return Err(OscimError::InvalidParameter(
                "alpha entries must be > 0".into(),
            ));
        }
        if self.kappa.iter().any(|&k| k < 0.0) {
            return Err(OscimError::InvalidParameter(
                "kappa entries must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Normal (J) and conjugate (G) coupling matrices with the global gain xi.
///
/// Built from a problem instance by `split_couplings`, which divides the
/// problem weights as J = gamma * W, G = (1 - gamma) * W so that the readout
/// matrix J + G always reproduces W regardless of the split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingSet {
    pub j: SquareMatrix,
    pub g: SquareMatrix,
    /// Global coupling gain (weak-coupling scalar).
    pub xi: f64,
    /// Split fraction used to build J and G.
    pub gamma: f64,
}

impl CouplingSet {
    /// No coupling at all (xi = 0, zero matrices).
    pub fn zero(n: usize) -> Self {
        Self {
            j: SquareMatrix::zeros(n),
            g: SquareMatrix::zeros(n),
            xi: 0.0,
            gamma: 0.5,
        }
    }

    pub fn n(&self) -> usize {
        self.j.n()
    }

    /// Effective readout matrix W = J + G.
    pub fn w_eff(&self) -> SquareMatrix {
        let n = self.n();
        let mut w = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                w.set(i, j, self.j.get(i, j) + self.g.get(i, j));
            }
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        if self.j.n() != self.g.n() {
            return Err(OscimError::DimensionMismatch {
                expected: self.j.n(),
                got: self.g.n(),
            });
        }
        if !self.j.is_symmetric() || !self.j.has_zero_diagonal() {
            return Err(OscimError::SymmetryViolation(
                "J must be symmetric with zero diagonal".into(),
            ));
        }
        if !self.g.is_symmetric() || !self.g.has_zero_diagonal() {
            return Err(OscimError::SymmetryViolation(
                "G must be symmetric with zero diagonal".into(),
            ));
        }
        Ok(())
    }
}

/// Split the problem weights into normal and conjugate pathways.
pub fn split_couplings(instance: &IsingInstance, gamma: f64, xi: f64) -> Result<CouplingSet> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(OscimError::InvalidParameter(format!(
            "gamma = {gamma} outside [0, 1]"
        )));
    }
    Ok(CouplingSet {
        j: instance.weights.scaled(gamma),
        g: instance.weights.scaled(1.0 - gamma),
        xi,
        gamma,
    })
}

/// State of the oscillator network in one of four representations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum NetworkState {
    /// Complex amplitudes a_i.
    Complex { a: Vec<Complex64> },
    /// Polar amplitudes and phases (r_i, theta_i), r_i >= 0.
    AmpPhase { r: Vec<f64>, theta: Vec<f64> },
    /// Phases only (rotating frame).
    PhaseOnly { theta: Vec<f64> },
    /// Phases in the stationary frame, plus the current time.
    StationaryPhase { phi: Vec<f64>, t: f64 },
}

impl NetworkState {
    pub fn n(&self) -> usize {
        match self {
            NetworkState::Complex { a } => a.len(),
            NetworkState::AmpPhase { r, .. } => r.len(),
            NetworkState::PhaseOnly { theta } => theta.len(),
            NetworkState::StationaryPhase { phi, .. } => phi.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NetworkState::AmpPhase { r, theta } => {
                if r.len() != theta.len() {
                    return Err(OscimError::DimensionMismatch {
                        expected: r.len(),
                        got: theta.len(),
                    });
                }
                if r.iter().any(|&v| v < 0.0) {
                    return Err(OscimError::InvalidParameter(
                        "amplitudes must be nonnegative".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Convert a complex state to polar form.
    pub fn to_amp_phase(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            NetworkState::Complex { a } => Some((
                a.iter().map(|z| z.norm()).collect(),
                a.iter().map(|z| z.arg()).collect(),
            )),
            NetworkState::AmpPhase { r, theta } => Some((r.clone(), theta.clone())),
            _ => None,
        }
    }
}

/// Drift of the conjugate Stuart-Landau network.
pub fn sl_rhs(
    a: &[Complex64],
    params: &OscillatorParams,
    coupling: &CouplingSet,
) -> Result<Vec<Complex64>> {
    let n = a.len();
    if params.n() != n {
        return Err(OscimError::DimensionMismatch {
            expected: n,
            got: params.n(),
        });
    }
    if coupling.n() != n {
        return Err(OscimError::DimensionMismatch {
            expected: n,
            got: coupling.n(),
        });
    }

    let re: Vec<f64> = a.iter().map(|z| z.re).collect();
    let im: Vec<f64> = a.iter().map(|z| z.im).collect();
    // J a = J re + i J im; G conj(a) = G re - i G im.
    let j_re = coupling.j.mul_vec(&re);
    let j_im = coupling.j.mul_vec(&im);
    let g_re = coupling.g.mul_vec(&re);
    let g_im = coupling.g.mul_vec(&im);

    let pump = Complex64::from_polar(1.0, params.phi_p);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let z = a[i];
        let onsite = (params.mu[i] - params.alpha[i] * z.norm_sqr()) * z;
        let pumped = params.kappa[i] * pump * z.conj();
        let coupled = coupling.xi * Complex64::new(j_re[i] + g_re[i], j_im[i] - g_im[i]);
        out.push(onsite + pumped + coupled);
    }
    Ok(out)
}

/// Drift of the amplitude-phase form, with clamp reporting.
#[derive(Debug, Clone)]
pub struct AmpPhaseDeriv {
    pub dr: Vec<f64>,
    pub dtheta: Vec<f64>,
    /// True when some r_i fell below `R_FLOOR` and the 1/r_i division was
    /// clamped.
    pub clamped: bool,
}

/// Polar form of the Stuart-Landau drift:
///
/// ```text
/// dr_i/dt     = (mu_i - alpha_i r_i^2) r_i + kappa_i r_i cos(2 theta_i - phi_p)
///               + xi sum_j (J_ij r_j cos(theta_j - theta_i) + G_ij r_j cos(theta_i + theta_j))
/// dtheta_i/dt = -kappa_i sin(2 theta_i - phi_p)
///               + (xi / r_i) sum_j (J_ij r_j sin(theta_j - theta_i) - G_ij r_j sin(theta_i + theta_j))
/// ```
///
/// The r_j factors inside the sums are exactly the amplitude-ratio weighting
/// that rescales the effective spin interactions when amplitudes differ.
pub fn ampphase_rhs(
    r: &[f64],
    theta: &[f64],
    params: &OscillatorParams,
    coupling: &CouplingSet,
) -> Result<AmpPhaseDeriv> {
    let n = r.len();
    if theta.len() != n {
        return Err(OscimError::DimensionMismatch {
            expected: n,
            got: theta.len(),
        });
    }
    if params.n() != n {
        return Err(OscimError::DimensionMismatch {
            expected: n,
            got: params.n(),
        });
    }
    if coupling.n() != n {
        return Err(OscimError::DimensionMismatch {
            expected: n,
            got: coupling.n(),
        });
    }

    let cos_t: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
    let sin_t: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    let rc: Vec<f64> = r.iter().zip(&cos_t).map(|(r, c)| r * c).collect();
    let rs: Vec<f64> = r.iter().zip(&sin_t).map(|(r, s)| r * s).collect();

    let j_rc = coupling.j.mul_vec(&rc);
    let j_rs = coupling.j.mul_vec(&rs);
    let g_rc = coupling.g.mul_vec(&rc);
    let g_rs = coupling.g.mul_vec(&rs);

    let mut dr = Vec::with_capacity(n);
    let mut dtheta = Vec::with_capacity(n);
    let mut clamped = false;
    for i in 0..n {
        let two_theta = 2.0 * theta[i] - params.phi_p;
        let radial_coupling =
            cos_t[i] * (j_rc[i] + g_rc[i]) + sin_t[i] * (j_rs[i] - g_rs[i]);
        dr.push(
            (params.mu[i] - params.alpha[i] * r[i] * r[i]) * r[i]
                + params.kappa[i] * r[i] * two_theta.cos()
                + coupling.xi * radial_coupling,
        );

        let phase_coupling =
            cos_t[i] * (j_rs[i] - g_rs[i]) - sin_t[i] * (j_rc[i] + g_rc[i]);
        let r_div = if r[i] < R_FLOOR {
            clamped = true;
            R_FLOOR
        } else {
            r[i]
        };
        dtheta.push(
            -params.kappa[i] * two_theta.sin() + coupling.xi / r_div * phase_coupling,
        );
    }
    Ok(AmpPhaseDeriv {
        dr,
        dtheta,
        clamped,
    })
}

/// Phase-only drift with both difference and sum coupling:
///
/// ```text
/// dtheta_i/dt = -Ks sin(2 theta_i)
///               - K sum_j (J_ij sin(theta_i - theta_j) + G_ij sin(theta_i + theta_j))
/// ```
pub fn poim_phase_rhs(
    theta: &[f64],
    ks: f64,
    k: f64,
    j: &SquareMatrix,
    g: &SquareMatrix,
) -> Result<Vec<f64>> {
    let n = theta.len();
    if j.n() != n || g.n() != n {
        return Err(OscimError::DimensionMismatch {
            expected: n,
            got: j.n().max(g.n()),
        });
    }
    let cos_t: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
    let sin_t: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    let jc = j.mul_vec(&cos_t);
    let js = j.mul_vec(&sin_t);
    let gc = g.mul_vec(&cos_t);
    let gs = g.mul_vec(&sin_t);

    Ok((0..n)
        .map(|i| {
            let diff = sin_t[i] * jc[i] - cos_t[i] * js[i];
            let sum = sin_t[i] * gc[i] + cos_t[i] * gs[i];
            -ks * (2.0 * theta[i]).sin() - k * (diff + sum)
        })
        .collect())
}

/// Kuramoto phase drift with second-harmonic injection (conjugate path off):
///
/// ```text
/// dtheta_i/dt = -Ks sin(2 theta_i) - K sum_j J_ij sin(theta_i - theta_j)
/// ```
pub fn oim_rhs(theta: &[f64], ks: f64, k: f64, j: &SquareMatrix) -> Result<Vec<f64>> {
    let n = theta.len();
    if j.n() != n {
        return Err(OscimError::DimensionMismatch {
            expected: n,
            got: j.n(),
        });
    }
    let cos_t: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
    let sin_t: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    let jc = j.mul_vec(&cos_t);
    let js = j.mul_vec(&sin_t);

    Ok((0..n)
        .map(|i| {
            -ks * (2.0 * theta[i]).sin() - k * (sin_t[i] * jc[i] - cos_t[i] * js[i])
        })
        .collect())
}

/// Phase drift in the stationary frame (carrier frequency normalized to 1):
///
/// ```text
/// dphi_i/dt = -(K/2) sum_j J_ij sin(phi_i - phi_j)
///             -(K/2) sum_j J_ij sin(2t + phi_i + phi_j) - 1
/// ```
///
/// The drift is explicitly time dependent; its fixed-point family is
/// phi_i = -t + c_i with binary c_i, where every component moves at rate -1.
pub fn stationary_rhs(phi: &[f64], t: f64, k: f64, j: &SquareMatrix) -> Result<Vec<f64>> {
    let n = phi.len();
    if j.n() != n {
        return Err(OscimError::DimensionMismatch {
            expected: n,
            got: j.n(),
        });
    }
    let cos_p: Vec<f64> = phi.iter().map(|p| p.cos()).collect();
    let sin_p: Vec<f64> = phi.iter().map(|p| p.sin()).collect();
    let jc = j.mul_vec(&cos_p);
    let js = j.mul_vec(&sin_p);
    let (sin_2t, cos_2t) = (2.0 * t).sin_cos();

    Ok((0..n)
        .map(|i| {
            let diff = sin_p[i] * jc[i] - cos_p[i] * js[i];
            let sum_cos = cos_p[i] * jc[i] - sin_p[i] * js[i];
            let sum_sin = sin_p[i] * jc[i] + cos_p[i] * js[i];
            -0.5 * k * diff - 0.5 * k * (sin_2t * sum_cos + cos_2t * sum_sin) - 1.0
        })
        .collect())
}

/// Normalized DOPO quadrature drift (uncoupled, pump adiabatically
/// eliminated):
///
/// ```text
/// dc/dt = (-1 + p0) c - (c^2 + s^2) c
/// ds/dt = -(1 + p0) s - (c^2 + s^2) s
/// ```
pub fn dopo_rhs(c: &[f64], s: &[f64], p0: f64) -> (Vec<f64>, Vec<f64>) {
    let dc = c
        .iter()
        .zip(s.iter())
        .map(|(&ci, &si)| (-1.0 + p0) * ci - (ci * ci + si * si) * ci)
        .collect();
    let ds = c
        .iter()
        .zip(s.iter())
        .map(|(&ci, &si)| -(1.0 + p0) * si - (ci * ci + si * si) * si)
        .collect();
    (dc, ds)
}

/// Normalized DOPO parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DopoParams {
    /// Pump rate normalized to the signal decay rate (threshold at 1).
    pub p0: f64,
    /// Signal photon decay rate (1/time).
    pub gamma_s: f64,
    /// Nonlinear coefficient fixing the amplitude rescaling.
    pub alpha_nl: f64,
    /// Pump phase, passed through unchanged.
    pub phi_p: f64,
}

impl DopoParams {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_s <= 0.0 || self.alpha_nl <= 0.0 {
            return Err(OscimError::InvalidParameter(
                "gamma_s and alpha_nl must be > 0".into(),
            ));
        }
        if self.p0 < 0.0 {
            return Err(OscimError::InvalidParameter("p0 must be >= 0".into()));
        }
        Ok(())
    }
}

/// Stuart-Landau equivalent of a DOPO plus the scales linking the two.
#[derive(Debug, Clone)]
pub struct DopoReduction {
    /// Single-oscillator parameters: mu = -gamma_s, alpha = alpha_nl,
    /// kappa = p0 * gamma_s.
    pub params: OscillatorParams,
    /// Amplitude scale A_s = sqrt(gamma_s / alpha_nl); a = A_s * z.
    pub amplitude_scale: f64,
    /// Stuart-Landau seconds per unit of normalized DOPO time (1 / gamma_s).
    pub time_scale: f64,
}

/// Map normalized DOPO parameters onto a single Stuart-Landau oscillator.
pub fn dopo_to_sl_params(dopo: &DopoParams) -> Result<DopoReduction> {
    dopo.validate()?;
    let params = OscillatorParams::new(
        vec![-dopo.gamma_s],
        vec![dopo.alpha_nl],
        vec![dopo.p0 * dopo.gamma_s],
        dopo.phi_p,
    )?;
    Ok(DopoReduction {
        params,
        amplitude_scale: (dopo.gamma_s / dopo.alpha_nl).sqrt(),
        time_scale: 1.0 / dopo.gamma_s,
    })
}
