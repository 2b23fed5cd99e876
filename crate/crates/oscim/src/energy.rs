//! Energy functions, spin readout and amplitude-heterogeneity metrics.
//!
//! Each dynamical system in `model` is a (negative) gradient flow of one of
//! the functions here:
//!
//! * `energy_complex`    — full complex energy of the conjugate Stuart-Landau
//!                         network; `sl_rhs` is minus its Wirtinger gradient.
//! * `energy_phase`      — phase energy for the equally-split case,
//!                         E = -(Ks/2) sum cos(2 theta_i) - K sum_{i!=j} J_ij cos(theta_i) cos(theta_j).
//! * `energy_phase_split`— same with separate J (difference) and G (sum)
//!                         matrices; `poim_phase_rhs`/`oim_rhs` descend it.
//! * `energy_stationary` — stationary-frame energy with explicit time
//!                         dependence; `stationary_rhs` descends it.
//! * `energy_ah`         — amplitude-weighted phase energy. At binary phases
//!                         it reduces to an Ising form over the rescaled
//!                         couplings J~_ij = r_i r_j J_ij.
//!
//! At binary phases (theta_i in {0, pi}) the phase energy reduces exactly to
//! an Ising Hamiltonian up to the constant C1 = -N Ks / 2, and the weighted
//! form up to C2 = (Ks/2) sum r_i^2; the mapping tests below check those
//! identities to rounding.

use num_complex::Complex64;

use crate::error::{OscimError, Result};
use crate::graph::SpinVector;
use crate::matrix::SquareMatrix;
use crate::model::{CouplingSet, OscillatorParams};

/// Complex energy split into its physically distinct contributions.
#[derive(Debug, Clone)]
pub struct EnergyBreakdown {
    pub total: f64,
    /// Gain, saturation and pump terms.
    pub onsite: f64,
    /// Normal-coupling (J) contribution.
    pub normal_coupling: f64,
    /// Conjugate-coupling (G) contribution.
    pub conjugate_coupling: f64,
}

/// Amplitude-heterogeneity summary for one trial.
#[derive(Debug, Clone)]
pub struct HeterogeneityReport {
    /// Coefficient of variation std(r) / mean(r), population convention.
    pub ah: f64,
    pub r_star: Vec<f64>,
    /// Rescaled couplings J~_ij = r_i r_j J_ij.
    pub j_effective: SquareMatrix,
}

/// Full complex energy of the conjugate Stuart-Landau network:
///
/// ```text
/// E = sum_i [ -mu_i |a_i|^2 + (alpha_i/2) |a_i|^4
///             - (kappa_i/2) (e^{i phi_p} conj(a_i)^2 + e^{-i phi_p} a_i^2) ]
///     - (xi/2) sum_{i != j} [ J_ij (a_i conj(a_j) + conj(a_i) a_j)
///                           + G_ij (a_i a_j + conj(a_i) conj(a_j)) ]
/// ```
///
/// Requires symmetric J and G with zero diagonal; the value is then real and
/// is returned as such. Asymmetric couplings surface a symmetry-violation
/// error, and any imaginary residual beyond rounding is rejected as well.
pub fn energy_complex(
    a: &[Complex64],
    params: &OscillatorParams,
    coupling: &CouplingSet,
) -> Result<EnergyBreakdown> {
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
    // The pairwise brackets are real for any real J/G, so an asymmetric
    // matrix cannot show up as an imaginary residual; check it directly.
    coupling.validate()?;

    let pump = Complex64::from_polar(1.0, params.phi_p);
    let mut onsite = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let z = a[i];
        let r2 = z.norm_sqr();
        onsite += Complex64::new(
            -params.mu[i] * r2 + 0.5 * params.alpha[i] * r2 * r2,
            0.0,
        );
        onsite += -0.5 * params.kappa[i] * (pump * z.conj() * z.conj() + pump.conj() * z * z);
    }

    let mut normal = Complex64::new(0.0, 0.0);
    let mut conjugate = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for jj in 0..n {
            if i == jj {
                continue;
            }
            let jw = coupling.j.get(i, jj);
            if jw != 0.0 {
                normal += jw * (a[i] * a[jj].conj() + a[i].conj() * a[jj]);
            }
            let gw = coupling.g.get(i, jj);
            if gw != 0.0 {
                conjugate += gw * (a[i] * a[jj] + a[i].conj() * a[jj].conj());
            }
        }
    }
    normal *= -0.5 * coupling.xi;
    conjugate *= -0.5 * coupling.xi;

    let total = onsite + normal + conjugate;
    if total.im.abs() > 1e-9 * total.re.abs().max(1.0) {
        return Err(OscimError::SymmetryViolation(format!(
            "imaginary energy residual {} for |E| = {}",
            total.im,
            total.re.abs()
        )));
    }

    Ok(EnergyBreakdown {
        total: total.re,
        onsite: onsite.re,
        normal_coupling: normal.re,
        conjugate_coupling: conjugate.re,
    })
}

/// Phase energy for the equally-split convention (`j` is the common J = G
/// matrix):
///
/// ```text
/// E_theta = -(Ks/2) sum_i cos(2 theta_i) - K sum_{i != j} J_ij cos(theta_i) cos(theta_j)
/// ```
pub fn energy_phase(theta: &[f64], ks: f64, k: f64, j: &SquareMatrix) -> Result<f64> {
    let n = theta.len();
    if j.n() != n {
        return Err(OscimError::DimensionMismatch {
            expected: n,
            got: j.n(),
        });
    }
    let cos_t: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
    let jc = j.mul_vec(&cos_t);
    let second_harmonic: f64 = theta.iter().map(|t| (2.0 * t).cos()).sum();
    let coupling: f64 = cos_t.iter().zip(&jc).map(|(c, jc)| c * jc).sum();
    Ok(-0.5 * ks * second_harmonic - k * coupling)
}

/// Phase energy with independent difference (J) and sum (G) pathways:
///
/// ```text
/// E = -(Ks/2) sum_i cos(2 theta_i)
///     - (K/2) sum_{i != j} [ J_ij cos(theta_i - theta_j) + G_ij cos(theta_i + theta_j) ]
/// ```
///
/// Reduces to `energy_phase` when J == G. `poim_phase_rhs` is minus its
/// gradient, and `oim_rhs` is minus the gradient of the G = 0 case.
pub fn energy_phase_split(
    theta: &[f64],
    ks: f64,
    k: f64,
    j: &SquareMatrix,
    g: &SquareMatrix,
) -> Result<f64> {
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

    let mut diff = 0.0;
    let mut sum = 0.0;
    for i in 0..n {
        diff += cos_t[i] * jc[i] + sin_t[i] * js[i];
        sum += cos_t[i] * gc[i] - sin_t[i] * gs[i];
    }
    let second_harmonic: f64 = theta.iter().map(|t| (2.0 * t).cos()).sum();
    Ok(-0.5 * ks * second_harmonic - 0.5 * k * (diff + sum))
}

/// Stationary-frame energy (explicitly time dependent):
///
/// ```text
/// E_st = -(K/4) sum_{i != j} J_ij [ cos(phi_i - phi_j) + cos(2t + phi_i + phi_j) ]
/// ```
pub fn energy_stationary(phi: &[f64], t: f64, k: f64, j: &SquareMatrix) -> Result<f64> {
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

    let mut acc = 0.0;
    for i in 0..n {
        let diff = cos_p[i] * jc[i] + sin_p[i] * js[i];
        let sum_cos = cos_p[i] * jc[i] - sin_p[i] * js[i];
        let sum_sin = sin_p[i] * jc[i] + cos_p[i] * js[i];
        acc += diff + cos_2t * sum_cos - sin_2t * sum_sin;
    }
    Ok(-0.25 * k * acc)
}

/// Amplitude-weighted phase energy:
///
/// ```text
/// E_AH = -(K/4) sum_{i != j} J_ij r_i r_j [ cos(theta_i - theta_j) + cos(theta_i + theta_j) ]
///        - (Ks/2) sum_i r_i^2 cos(2 theta_i)
/// ```
pub fn energy_ah(r: &[f64], theta: &[f64], ks: f64, k: f64, j: &SquareMatrix) -> Result<f64> {
    let n = r.len();
    if theta.len() != n {
        return Err(OscimError::DimensionMismatch {
            expected: n,
            got: theta.len(),
        });
    }
    if j.n() != n {
        return Err(OscimError::DimensionMismatch {
            expected: n,
            got: j.n(),
        });
    }
    let rc: Vec<f64> = r.iter().zip(theta).map(|(r, t)| r * t.cos()).collect();
    let rs: Vec<f64> = r.iter().zip(theta).map(|(r, t)| r * t.sin()).collect();
    let j_rc = j.mul_vec(&rc);
    let j_rs = j.mul_vec(&rs);

    let mut acc = 0.0;
    for i in 0..n {
        let diff = rc[i] * j_rc[i] + rs[i] * j_rs[i];
        let sum = rc[i] * j_rc[i] - rs[i] * j_rs[i];
        acc += diff + sum;
    }
    let second_harmonic: f64 = r
        .iter()
        .zip(theta)
        .map(|(r, t)| r * r * (2.0 * t).cos())
        .sum();
    Ok(-0.25 * k * acc - 0.5 * ks * second_harmonic)
}

/// Spin readout s_i = sign(cos theta_i), with sign(0) fixed to +1.
pub fn spin_readout(theta: &[f64]) -> SpinVector {
    SpinVector::new(
        theta
            .iter()
            .map(|t| if t.cos() >= 0.0 { 1 } else { -1 })
            .collect(),
    )
    .expect("readout produces only +1/-1")
}

/// Binary phases corresponding to a spin vector (+1 -> 0, -1 -> pi).
pub fn spins_to_phases(s: &SpinVector) -> Vec<f64> {
    s.as_slice()
        .iter()
        .map(|&v| if v > 0 { 0.0 } else { std::f64::consts::PI })
        .collect()
}

/// Coefficient of variation of the steady amplitudes and the rescaled
/// couplings they induce.
pub fn heterogeneity_report(r_star: &[f64], j: &SquareMatrix) -> Result<HeterogeneityReport> {
    let n = r_star.len();
    if j.n() != n {
        return Err(OscimError::DimensionMismatch {
            expected: n,
            got: j.n(),
        });
    }
    let mean = r_star.iter().sum::<f64>() / n as f64;
    if mean <= 0.0 {
        return Err(OscimError::ZeroMeanAmplitude);
    }
    let var = r_star.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n as f64;
    let ah = var.sqrt() / mean;

    let mut j_effective = SquareMatrix::zeros(n);
    for i in 0..n {
        for jj in 0..n {
            j_effective.set(i, jj, r_star[i] * r_star[jj] * j.get(i, jj));
        }
    }
    Ok(HeterogeneityReport {
        ah,
        r_star: r_star.to_vec(),
        j_effective,
    })
}

/// Central-difference Wirtinger gradient dE/d(conj(a_i)) = (dE/dx_i + i dE/dy_i) / 2.
pub fn wirtinger_grad_fd<F>(energy: F, a: &[Complex64], h: f64) -> Vec<Complex64>
where
    F: Fn(&[Complex64]) -> f64,
{
    let n = a.len();
    let mut grad = Vec::with_capacity(n);
    let mut work = a.to_vec();
    for i in 0..n {
        let base = work[i];
        work[i] = base + Complex64::new(h, 0.0);
        let ex_plus = energy(&work);
        work[i] = base - Complex64::new(h, 0.0);
        let ex_minus = energy(&work);
        work[i] = base + Complex64::new(0.0, h);
        let ey_plus = energy(&work);
        work[i] = base - Complex64::new(0.0, h);
        let ey_minus = energy(&work);
        work[i] = base;
        let de_dx = (ex_plus - ex_minus) / (2.0 * h);
        let de_dy = (ey_plus - ey_minus) / (2.0 * h);
        grad.push(0.5 * Complex64::new(de_dx, de_dy));
    }
    grad
}

/// Central-difference gradient of a real scalar function.
pub fn grad_fd<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let mut grad = Vec::with_capacity(n);
    let mut work = x.to_vec();
    for i in 0..n {
        let base = work[i];
        work[i] = base + h;
        let plus = f(&work);
        work[i] = base - h;
        let minus = f(&work);
        work[i] = base;
        grad.push((plus - minus) / (2.0 * h));
    }
    grad
}
