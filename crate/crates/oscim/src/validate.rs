//! Fast identity suite: spot-checks of the analytical structure that can run
//! in seconds, used by `oscim validate` and reused by the test suites.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{
    energy_ah, energy_complex, energy_phase, energy_phase_split, grad_fd, heterogeneity_report,
    spins_to_phases, wirtinger_grad_fd,
};
use crate::graph::{generate_er_graph, ising_energy, SpinVector};
use crate::integrate::step_rk4;
use crate::matrix::SquareMatrix;
use crate::model::{
    ampphase_rhs, oim_rhs, poim_phase_rhs, sl_rhs, split_couplings, stationary_rhs,
    OscillatorParams,
};

const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl PropertyResult {
    fn pass(name: &str, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed: true,
            detail,
        }
    }

    fn fail(name: &str, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed: false,
            detail,
        }
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn random_spins(n: usize, rng: &mut ChaCha8Rng) -> SpinVector {
    SpinVector::new((0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()).unwrap()
}

/// Largest relative deviation between the quadrature-pair DOPO integration
/// and the equivalent complex integration from the same start.
pub fn dopo_equivalence_max_rel_err(p0: f64, z0: Complex64, t_stop: f64, dt: f64) -> f64 {
    let quad_drift = |x: &[f64], _t: f64| {
        let (dc, ds) = crate::model::dopo_rhs(&x[..1], &x[1..], p0);
        vec![dc[0], ds[0]]
    };
    // dz/dt = -z - |z|^2 z + p0 conj(z)
    let complex_drift = |x: &[f64], _t: f64| {
        let z = Complex64::new(x[0], x[1]);
        let dz = -z - z.norm_sqr() * z + p0 * z.conj();
        vec![dz.re, dz.im]
    };

    let steps = (t_stop / dt).round() as usize;
    let mut quad = vec![z0.re, z0.im];
    let mut complexed = vec![z0.re, z0.im];
    let mut worst = 0.0f64;
    for step in 0..steps {
        let t = step as f64 * dt;
        step_rk4(&quad_drift, &mut quad, t, dt);
        step_rk4(&complex_drift, &mut complexed, t, dt);
        let err = ((quad[0] - complexed[0]).powi(2) + (quad[1] - complexed[1]).powi(2)).sqrt();
        let scale = (complexed[0].powi(2) + complexed[1].powi(2)).sqrt().max(1e-6);
        worst = worst.max(err / scale);
    }
    worst
}

fn check_complex_gradient() -> PropertyResult {
    let name = "complex gradient identity";
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    let mut worst = 0.0f64;
    for n in [2usize, 4] {
        let g = generate_er_graph(n, 0.8, n as u64 + 7).unwrap();
        let coupling = split_couplings(&g, 0.4, 0.3).unwrap();
        let params = OscillatorParams::uniform(n, 0.5, 1.0, 0.1, 0.0).unwrap();
        for _ in 0..20 {
            let a: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let drift = sl_rhs(&a, &params, &coupling).unwrap();
            let grad = wirtinger_grad_fd(
                |a| energy_complex(a, &params, &coupling).unwrap().total,
                &a,
                FD_STEP,
            );
            for i in 0..n {
                worst = worst.max((drift[i] + grad[i]).norm() / drift[i].norm().max(1.0));
            }
        }
    }
    if worst < 1e-6 {
        PropertyResult::pass(name, format!("max rel err {worst:.2e}"))
    } else {
        PropertyResult::fail(name, format!("max rel err {worst:.2e} exceeds 1e-6"))
    }
}

fn check_phase_gradients() -> PropertyResult {
    let name = "phase gradient identities";
    let mut rng = ChaCha8Rng::seed_from_u64(0xB2);
    let n = 8;
    let g1 = generate_er_graph(n, 0.6, 21).unwrap();
    let g2 = generate_er_graph(n, 0.6, 22).unwrap();
    let zero = SquareMatrix::zeros(n);
    let (ks, k) = (0.7, 1.1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let theta: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0.0..2.0 * std::f64::consts::PI))
            .collect();
        let poim = poim_phase_rhs(&theta, ks, k, &g1.weights, &g2.weights).unwrap();
        let poim_grad = grad_fd(
            |t| energy_phase_split(t, ks, k, &g1.weights, &g2.weights).unwrap(),
            &theta,
            FD_STEP,
        );
        let oim = oim_rhs(&theta, ks, k, &g1.weights).unwrap();
        let oim_grad = grad_fd(
            |t| energy_phase_split(t, ks, k, &g1.weights, &zero).unwrap(),
            &theta,
            FD_STEP,
        );
        for i in 0..n {
            worst = worst.max(rel_err(poim[i], -poim_grad[i]));
            worst = worst.max(rel_err(oim[i], -oim_grad[i]));
        }
    }
    if worst < 1e-6 {
        PropertyResult::pass(name, format!("max rel err {worst:.2e}"))
    } else {
        PropertyResult::fail(name, format!("max rel err {worst:.2e} exceeds 1e-6"))
    }
}

fn check_trig_identity() -> PropertyResult {
    let name = "sum-difference trig identity";
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a: f64 = rng.gen_range(-10.0..10.0);
        let b: f64 = rng.gen_range(-10.0..10.0);
        worst = worst.max(((a - b).sin() + (a + b).sin() - 2.0 * a.sin() * b.cos()).abs());
    }
    if worst < 1e-14 {
        PropertyResult::pass(name, format!("max abs err {worst:.2e}"))
    } else {
        PropertyResult::fail(name, format!("max abs err {worst:.2e} exceeds 1e-14"))
    }
}

fn check_ising_mappings() -> PropertyResult {
    let name = "binary-phase Ising mappings";
    let mut rng = ChaCha8Rng::seed_from_u64(0xD4);
    let n = 10;
    let g = generate_er_graph(n, 0.5, 33).unwrap();
    let (ks, k) = (0.9, 1.3);
    let c1 = -(n as f64) * ks / 2.0;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let s = random_spins(n, &mut rng);
        let theta = spins_to_phases(&s);

        let e_theta = energy_phase(&theta, ks, k, &g.weights).unwrap();
        let expected = 2.0 * k * ising_energy(&g.weights, &s).unwrap() + c1;
        worst = worst.max(rel_err(e_theta, expected));

        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..1.6)).collect();
        let report = heterogeneity_report(&r, &g.weights).unwrap();
        let c2 = 0.5 * ks * r.iter().map(|v| v * v).sum::<f64>();
        let e_ah = energy_ah(&r, &theta, ks, k, &g.weights).unwrap();
        let weighted = k * ising_energy(&report.j_effective, &s).unwrap() - c2;
        worst = worst.max(rel_err(e_ah, weighted));
    }
    if worst < 1e-12 {
        PropertyResult::pass(name, format!("max rel err {worst:.2e}"))
    } else {
        PropertyResult::fail(name, format!("max rel err {worst:.2e} exceeds 1e-12"))
    }
}

fn check_dopo_equivalence() -> PropertyResult {
    let name = "dopo quadrature/complex equivalence";
    let mut worst = 0.0f64;
    for &p0 in &[0.5, 1.5, 2.0] {
        worst = worst.max(dopo_equivalence_max_rel_err(
            p0,
            Complex64::new(0.12, -0.07),
            20.0,
            1e-3,
        ));
    }
    if worst < 1e-8 {
        PropertyResult::pass(name, format!("max rel err {worst:.2e}"))
    } else {
        PropertyResult::fail(name, format!("max rel err {worst:.2e} exceeds 1e-8"))
    }
}

fn check_stationary_fixed_points() -> PropertyResult {
    let name = "stationary fixed-point family";
    let mut rng = ChaCha8Rng::seed_from_u64(0xE5);
    let n = 12;
    let g = generate_er_graph(n, 0.5, 44).unwrap();
    let mut worst = 0.0f64;
    for &t in &[0.0, 1.1, 9.7] {
        let s = random_spins(n, &mut rng);
        let phi: Vec<f64> = spins_to_phases(&s).iter().map(|c| c - t).collect();
        let out = stationary_rhs(&phi, t, 1.2, &g.weights).unwrap();
        for v in out {
            worst = worst.max((v + 1.0).abs());
        }
    }
    if worst < 1e-10 {
        PropertyResult::pass(name, format!("max deviation {worst:.2e}"))
    } else {
        PropertyResult::fail(name, format!("max deviation {worst:.2e} exceeds 1e-10"))
    }
}

fn check_representation_consistency() -> PropertyResult {
    let name = "polar/complex representation consistency";
    let mut rng = ChaCha8Rng::seed_from_u64(0xF6);
    let n = 5;
    let g = generate_er_graph(n, 0.7, 55).unwrap();
    let coupling = split_couplings(&g, 0.5, 0.3).unwrap();
    let params = OscillatorParams::uniform(n, 0.6, 1.0, 0.05, 0.0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.5)).collect();
        let theta: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0.0..2.0 * std::f64::consts::PI))
            .collect();
        let a: Vec<Complex64> = r
            .iter()
            .zip(&theta)
            .map(|(&r, &t)| Complex64::from_polar(r, t))
            .collect();
        let complex_drift = sl_rhs(&a, &params, &coupling).unwrap();
        let polar = ampphase_rhs(&r, &theta, &params, &coupling).unwrap();
        for i in 0..n {
            let rebuilt = Complex64::new(polar.dr[i], r[i] * polar.dtheta[i])
                * Complex64::from_polar(1.0, theta[i]);
            worst =
                worst.max((rebuilt - complex_drift[i]).norm() / complex_drift[i].norm().max(1.0));
        }
    }
    if worst < 1e-10 {
        PropertyResult::pass(name, format!("max rel err {worst:.2e}"))
    } else {
        PropertyResult::fail(name, format!("max rel err {worst:.2e} exceeds 1e-10"))
    }
}

fn check_symmetry_detection() -> PropertyResult {
    let name = "asymmetric coupling detection";
    let g = generate_er_graph(4, 0.8, 66).unwrap();
    let mut coupling = split_couplings(&g, 0.5, 0.5).unwrap();
    coupling.j.set(0, 1, coupling.j.get(0, 1) + 0.5);
    let params = OscillatorParams::uniform(4, 0.5, 1.0, 0.1, 0.0).unwrap();
    let a = vec![Complex64::new(0.3, 0.1); 4];
    match energy_complex(&a, &params, &coupling) {
        Err(crate::error::OscimError::SymmetryViolation(_)) => {
            PropertyResult::pass(name, "corrupted J rejected".into())
        }
        other => PropertyResult::fail(name, format!("expected rejection, got {other:?}")),
    }
}

/// Run the identity suite; each entry is independent and fast.
pub fn run_validation_suite() -> Vec<PropertyResult> {
    vec![
        check_complex_gradient(),
        check_phase_gradients(),
        check_trig_identity(),
        check_ising_mappings(),
        check_dopo_equivalence(),
        check_stationary_fixed_points(),
        check_representation_consistency(),
        check_symmetry_detection(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_validation_property_passes() {
        for result in run_validation_suite() {
            assert!(result.passed, "{}: {}", result.name, result.detail);
        }
    }

    #[test]
    fn dopo_forms_agree_tightly() {
        let err = dopo_equivalence_max_rel_err(2.0, Complex64::new(0.1, 0.05), 20.0, 1e-3);
        assert!(err < 1e-8, "rel err {err}");
    }
}
