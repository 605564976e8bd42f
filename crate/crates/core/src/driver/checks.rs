//! Fast invariant suite behind the `check` subcommand.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Experiment, RunConfig};
use super::schedule::run_schedule;
use super::free_space_band;
use crate::assembly::{assemble_tm, BlochVector};
use crate::companion::build_companion;
use crate::dispersion::two_term_lorentz;
use crate::eigeniter::{InversePower, Pencil, Scaling};
use crate::error::Result;
use crate::linalg::vector::{norm2, ones, sub};
use crate::mesh::{build_mesh, prolongate};
use crate::newton::NonlinearPencil;

/// Outcome of one invariant.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, r: Result<(bool, String)>) -> CheckOutcome {
    match r {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn standard_k() -> BlochVector {
    BlochVector::new(PI / 2.0, PI)
}

fn exp1_pencil(level: u32, k: BlochVector) -> Result<Pencil> {
    let mesh = build_mesh(level)?;
    let f = assemble_tm(&mesh, k)?;
    let mw = f.weighted_mass(1.0, 8.0)?;
    Pencil::shifted(&f.stiffness, &mw, &f.mass, 1.0)
}

fn hermitian_forms() -> Result<(bool, String)> {
    let f = assemble_tm(&build_mesh(1)?, standard_k())?;
    let d = [&f.stiffness, &f.mass1, &f.mass2]
        .iter()
        .map(|a| a.hermitian_defect() / a.max_abs())
        .fold(0.0, f64::max);
    Ok((d <= 1e-13, format!("relative defect {d:.3e}")))
}

fn nested_prolongation() -> Result<(bool, String)> {
    let coarse = build_mesh(0)?;
    let fine = coarse.refine()?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u: Vec<C64> = (0..coarse.dof_count())
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let v = prolongate(&u, &coarse, &fine)?;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        worst = worst.max((coarse.evaluate(&u, x)? - fine.evaluate(&v, x)?).norm());
    }
    Ok((worst <= 1e-12, format!("max pointwise defect {worst:.3e}")))
}

fn homogeneous_upper_bound() -> Result<(bool, String)> {
    let k = standard_k();
    let mesh = build_mesh(2)?;
    let f = assemble_tm(&mesh, k)?;
    let p = Pencil::shifted(&f.stiffness, &f.mass, &f.mass, 1.0)?;
    let mut it = InversePower::new(&p, ones(mesh.dof_count()), Scaling::Rayleigh)?;
    for _ in 0..60 {
        it.step(&p)?;
    }
    let exact = free_space_band(k);
    let lambda = it.mu() - 1.0;
    let rel = (lambda - exact) / exact;
    Ok((lambda >= exact * (1.0 - 1e-12) && rel < 1e-3, format!("lambda {lambda:.10}, exact {exact:.10}")))
}

fn monotone_rayleigh() -> Result<(bool, String)> {
    let p = exp1_pencil(1, standard_k())?;
    let mut it = InversePower::new(&p, ones(p.dim()), Scaling::Rayleigh)?;
    let mut prev = it.mu();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..15 {
        let mu = it.step(&p)?.mu;
        worst = worst.max((mu - prev) / prev.abs());
        prev = mu;
    }
    Ok((worst <= 1e-12, format!("largest relative increase {worst:.3e}")))
}

fn scaled_iterates_agree() -> Result<(bool, String)> {
    let p = exp1_pencil(1, standard_k())?;
    let u0 = ones(p.dim());
    let mut rq = InversePower::new(&p, u0.clone(), Scaling::Rayleigh)?;
    let mut plain = InversePower::new(&p, u0, Scaling::Plain)?;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let mu_prev = rq.mu();
        rq.step(&p)?;
        plain.step(&p)?;
        let scaled: Vec<C64> = plain.vector().iter().map(|x| x * mu_prev).collect();
        worst = worst.max(norm2(&sub(rq.vector(), &scaled)) / norm2(rq.vector()));
    }
    Ok((worst <= 1e-10, format!("max relative defect {worst:.3e}")))
}

fn realization_identity() -> Result<(bool, String)> {
    let model = two_term_lorentz();
    let r = model.realize()?;
    let alpha = model.alpha()?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let lambda = rng.random::<f64>() * 80.0;
        let (Ok(eps), Ok(t)) = (model.eval_sq(lambda), r.transfer(lambda)) else { continue };
        let lhs = lambda * eps;
        let rhs = lambda * alpha - r.xi + t;
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    Ok((worst <= 1e-10, format!("max relative defect {worst:.3e}")))
}

fn companion_positivity() -> Result<(bool, String)> {
    let model = two_term_lorentz();
    let bound = model.realize()?.shift_bound();
    let mesh = build_mesh(0)?;
    for beta in [bound + 1.0, bound * (1.0 + 1e-6)] {
        crate::companion::companion_pencil(&build_companion(&mesh, standard_k(), &model, 1.0, beta)?)?;
    }
    Ok((true, format!("factorized at beta = {:.4} and just above {bound:.4}", bound + 1.0)))
}

fn conjugation_symmetry() -> Result<(bool, String)> {
    let k = BlochVector::new(0.7, -1.9);
    let lam = |k: BlochVector| -> Result<f64> {
        let p = exp1_pencil(1, k)?;
        let mut it = InversePower::new(&p, ones(p.dim()), Scaling::Rayleigh)?;
        for _ in 0..40 {
            it.step(&p)?;
        }
        Ok(it.mu())
    };
    let (a, b) = (lam(k)?, lam(k.neg())?);
    let rel = (a - b).abs() / a.abs();
    Ok((rel <= 1e-10, format!("relative gap {rel:.3e}")))
}

fn derivative_taylor() -> Result<(bool, String)> {
    let f = assemble_tm(&build_mesh(0)?, standard_k())?;
    let p = NonlinearPencil::new(&f, two_term_lorentz(), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v: Vec<C64> = (0..f.dof_count).map(|_| C64::new(rng.random(), rng.random())).collect();
    let lambda = 5.0;
    let tp = p.t_prime(lambda)?.apply(&v);
    let base = p.t(lambda)?.apply(&v);
    let mut rem = Vec::new();
    for h in [1e-3, 1e-4] {
        let shifted = p.t(lambda + h)?.apply(&v);
        let d: Vec<C64> = shifted.iter().zip(&base).zip(&tp).map(|((a, b), t)| a - b - t * h).collect();
        rem.push(norm2(&d) / norm2(&v));
    }
    let ratio = rem[0] / rem[1];
    Ok((ratio > 50.0, format!("remainders {:.3e}, {:.3e} (ratio {ratio:.1})", rem[0], rem[1])))
}

fn schedule_levels() -> Result<(bool, String)> {
    let mut cfg = RunConfig::new(Experiment::Linear);
    cfg.model = crate::dispersion::DispersionModel::constant(8.0);
    cfg.schedule.steps_per_mesh = 3;
    cfg.schedule.max_level = 2;
    cfg.schedule.max_steps = 12;
    cfg.reference.enabled = false;
    cfg.tol = 1e-300;
    let out = run_schedule(&cfg)?;
    let levels: Vec<u32> = out.trace.rows.iter().map(|r| r.mesh_level).collect();
    let expected: Vec<u32> = (0..12).map(|j| (j / 3).min(2) as u32).collect();
    Ok((levels == expected, format!("levels {levels:?}")))
}

/// Runs every invariant; each entry reports independently.
pub fn run_checks() -> Vec<CheckOutcome> {
    type Check = fn() -> Result<(bool, String)>;
    let all: [(&'static str, Check); 10] = [
        ("hermitian_forms", hermitian_forms),
        ("nested_prolongation", nested_prolongation),
        ("homogeneous_upper_bound", homogeneous_upper_bound),
        ("monotone_rayleigh", monotone_rayleigh),
        ("scaled_iterates_agree", scaled_iterates_agree),
        ("realization_identity", realization_identity),
        ("companion_positivity", companion_positivity),
        ("conjugation_symmetry", conjugation_symmetry),
        ("derivative_taylor", derivative_taylor),
        ("schedule_levels", schedule_levels),
    ];
    all.iter().map(|&(name, f)| outcome(name, f())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariant_suite_passes() {
        for c in run_checks() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
