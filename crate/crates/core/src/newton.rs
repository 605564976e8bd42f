//! Newton iteration for `T(lambda) u = 0` with
//! `T(lambda) = K - lambda (alpha1 M1 + eps(lambda) M2)` and normalization
//! `y^H M u = 1`.
//!
//! The unknown is `lambda = omega^2`; all models in this crate are even in
//! `omega`, and working in `lambda` avoids the `omega <-> -omega` degeneracy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_tm, AssembledForms, BlochVector};
use crate::dispersion::DispersionModel;
use crate::eigeniter::{inverse_power_rq, IterationTrace, Pencil, TraceRow};
use crate::error::{Error, Result};
use crate::linalg::vector::{dot, ones, scale};
use crate::linalg::{combination_apply, factorize_lu, rayleigh_quotient, DualNorm, HermitianSparse, C64};
use crate::mesh::PeriodicMesh;

/// Consecutive residual increases after which the iteration is abandoned.
pub const DIVERGENCE_STEPS: usize = 3;

/// Minimum decay ratio above which a residual counts as limited by
/// rounding rather than by the iteration.
const FLOOR_RATIO: f64 = 1e-2;

/// `T(lambda)` and its derivative for a real dispersion model in the inclusion.
#[derive(Debug, Clone)]
pub struct NonlinearPencil {
    pub stiffness: HermitianSparse,
    pub mass1: HermitianSparse,
    pub mass2: HermitianSparse,
    pub model: DispersionModel,
    pub alpha1: f64,
}

impl NonlinearPencil {
    pub fn new(forms: &AssembledForms, model: DispersionModel, alpha1: f64) -> Self {
        NonlinearPencil {
            stiffness: forms.stiffness.clone(),
            mass1: forms.mass1.clone(),
            mass2: forms.mass2.clone(),
            model,
            alpha1,
        }
    }

    pub fn dim(&self) -> usize {
        self.stiffness.dim()
    }

    fn combine(&self, k: f64, m1: f64, m2: f64) -> Result<HermitianSparse> {
        HermitianSparse::lin_comb(
            &[
                (C64::new(k, 0.0), &self.stiffness),
                (C64::new(m1, 0.0), &self.mass1),
                (C64::new(m2, 0.0), &self.mass2),
            ],
            true,
        )
    }

    /// `T(lambda) = K - lambda (alpha1 M1 + eps M2)`.
    pub fn t(&self, lambda: f64) -> Result<HermitianSparse> {
        let eps = self.model.eval_sq(lambda)?;
        self.combine(1.0, -lambda * self.alpha1, -lambda * eps)
    }

    /// `T(lambda) u` in compensated precision; the result resolves the
    /// cancellation between `K u` and `lambda M u` near an eigenpair.
    pub fn apply_t(&self, lambda: f64, u: &[C64]) -> Result<Vec<C64>> {
        let eps = self.model.eval_sq(lambda)?;
        combination_apply(
            &[
                (1.0, &self.stiffness),
                (-lambda * self.alpha1, &self.mass1),
                (-lambda * eps, &self.mass2),
            ],
            u,
        )
    }

    /// `dT/dlambda = -alpha1 M1 - (eps + lambda eps') M2`.
    pub fn t_prime(&self, lambda: f64) -> Result<HermitianSparse> {
        let (eps, deps) = self.model.eval_with_deriv(lambda)?;
        self.combine(0.0, -self.alpha1, -(eps + lambda * deps))
    }

    /// `T` as a function of `omega`.
    pub fn t_omega(&self, omega: f64) -> Result<HermitianSparse> {
        self.t(omega * omega)
    }

    /// `dT/domega = 2 omega dT/dlambda`.
    pub fn t_prime_omega(&self, omega: f64) -> Result<HermitianSparse> {
        let tp = self.t_prime(omega * omega)?;
        HermitianSparse::lin_comb(&[(C64::new(2.0 * omega, 0.0), &tp)], true)
    }

    /// Plain mass `M1 + M2`.
    pub fn mass(&self) -> Result<HermitianSparse> {
        self.mass1.add_scaled(1.0, &self.mass2, 1.0)
    }
}

/// Iterate of the Newton method.
#[derive(Debug, Clone)]
pub struct NewtonState {
    pub u: Vec<C64>,
    pub lambda: f64,
    /// Normalization vector `y`; the constraint is `(M y)^H u = 1`.
    pub y: Vec<C64>,
    my: Vec<C64>,
}

impl NewtonState {
    /// Scales `u0` so that `y^H M u0 = 1`.
    pub fn new(u0: Vec<C64>, lambda0: f64, y: Vec<C64>, mass: &HermitianSparse) -> Result<Self> {
        if u0.len() != mass.dim() || y.len() != mass.dim() {
            return Err(Error::DimensionMismatch {
                expected: mass.dim(),
                got: u0.len().min(y.len()),
            });
        }
        let my = mass.apply(&y);
        let mut s = NewtonState {
            u: u0,
            lambda: lambda0,
            y,
            my,
        };
        s.renormalize()?;
        Ok(s)
    }

    pub fn constraint(&self) -> C64 {
        dot(&self.my, &self.u)
    }

    fn renormalize(&mut self) -> Result<()> {
        let c = self.constraint();
        if !(c.norm() > 0.0) || !c.norm().is_finite() {
            return Err(Error::SingularBordered);
        }
        scale(&mut self.u, c.inv());
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        self.lambda.max(0.0).sqrt()
    }
}

/// Size of one Newton correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonStep {
    pub s_norm: f64,
    pub nu: f64,
}

/// One Newton step for the bordered system
/// `[[T, T' u], [y^H M, 0]] [s; nu] = [-T u; 1 - y^H M u]`, `u += s`,
/// `lambda += nu`.
///
/// The border is eliminated blockwise with `a = T^{-1} T' u`, so only the
/// sparse `T` is factorized and its fill-reducing ordering is not spoiled by
/// the dense border. Block elimination through a nearly singular `T` loses
/// accuracy, so one step of iterative refinement on the well-conditioned
/// bordered system follows, with residuals in compensated precision.
pub fn newton_step(p: &NonlinearPencil, state: &mut NewtonState) -> Result<NewtonStep> {
    let singular = |e: Error| match e {
        Error::Singular => Error::SingularBordered,
        other => other,
    };
    let t = p.t(state.lambda)?;
    let tp_u = p.t_prime(state.lambda)?.apply(&state.u);
    let f = match factorize_lu(&t) {
        Ok(f) => f,
        Err(Error::Singular) => return bordered_step(&t, &tp_u, state).map_err(singular),
        Err(e) => return Err(e),
    };
    let a = f.solve(&tp_u).map_err(singular)?;
    let ca = dot(&state.my, &a);
    if !(ca.norm() > 0.0) || !ca.norm().is_finite() {
        return Err(Error::SingularBordered);
    }
    // Bordered solve for right-hand side (r, g): w = T^{-1} r,
    // nu = (c^H w - g) / (c^H a), s = w - nu a.
    let solve = |r: &[C64], g: C64| -> Result<(Vec<C64>, C64)> {
        let w = f.solve(r).map_err(singular)?;
        let nu = (dot(&state.my, &w) - g) / ca;
        Ok((w.iter().zip(&a).map(|(wi, ai)| wi - nu * ai).collect(), nu))
    };
    // Right-hand sides in compensated precision: in working precision the
    // rounding of `K u` alone exceeds `T u` near convergence.
    let mut r: Vec<C64> = p.apply_t(state.lambda, &state.u)?.iter().map(|v| -v).collect();
    let g = C64::new(1.0, 0.0) - state.constraint();
    let (mut s, mut nu) = solve(&r, g)?;
    // Residual of the bordered system at (s, nu), then one correction.
    let ts = p.apply_t(state.lambda, &s)?;
    for ((ri, tsi), tpi) in r.iter_mut().zip(&ts).zip(&tp_u) {
        *ri -= tsi + nu * tpi;
    }
    let (ds, dnu) = solve(&r, g - dot(&state.my, &s))?;
    for (si, di) in s.iter_mut().zip(&ds) {
        *si += di;
    }
    nu += dnu;
    let mut s_norm = 0.0;
    for (ui, si) in state.u.iter_mut().zip(&s) {
        *ui += si;
        s_norm += si.norm_sqr();
    }
    state.lambda += nu.re;
    state.renormalize()?;
    Ok(NewtonStep {
        s_norm: s_norm.sqrt(),
        nu: nu.re,
    })
}

/// Explicit `(n+1)`-dimensional bordered solve, used when `T` itself is
/// singular (the iterate sits exactly on an eigenvalue).
fn bordered_step(t: &HermitianSparse, tp_u: &[C64], state: &mut NewtonState) -> Result<NewtonStep> {
    let n = t.dim();
    let mut rhs: Vec<C64> = t.apply(&state.u).iter().map(|v| -v).collect();
    rhs.push(C64::new(1.0, 0.0) - state.constraint());
    let mut trip: Vec<(usize, usize, C64)> = Vec::with_capacity(t.nnz() + 2 * n);
    trip.extend(t.triplets());
    for i in 0..n {
        trip.push((i, n, tp_u[i]));
        trip.push((n, i, state.my[i].conj()));
    }
    let bordered = HermitianSparse::from_triplets(n + 1, n + 1, &trip, false)?;
    let sol = factorize_lu(&bordered)?.solve(&rhs)?;
    let nu = sol[n].re;
    let mut s_norm = 0.0;
    for (ui, si) in state.u.iter_mut().zip(&sol[..n]) {
        *ui += si;
        s_norm += si.norm_sqr();
    }
    state.lambda += nu;
    state.renormalize()?;
    Ok(NewtonStep {
        s_norm: s_norm.sqrt(),
        nu,
    })
}

/// Dual norm of `T(lambda) u` for the `M`-normalized `u`.
pub fn newton_residual(p: &NonlinearPencil, dual: &DualNorm, u: &[C64], lambda: f64) -> Result<f64> {
    let m = p.mass()?;
    let n = m.quad_form(u).re.max(0.0).sqrt();
    if !(n > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(dual.norm(&p.apply_t(lambda, u)?)? / n)
}

/// Result of a converged Newton run.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub u: Vec<C64>,
    pub lambda: f64,
    pub trace: IterationTrace,
    /// Empirical convergence order, see [`decay_exponent`].
    pub decay_exponent: Option<f64>,
}

impl NewtonOutcome {
    pub fn omega(&self) -> f64 {
        self.lambda.max(0.0).sqrt()
    }
}

/// Empirical order `p` from the last three decreasing residuals
/// `r_a > r_b > r_c` via `log(r_c/r_b) / log(r_b/r_a)`.
///
/// A final residual that gained less than a factor of 100 right after a
/// faster step is taken to sit on the rounding floor and is excluded.
pub fn decay_exponent(residuals: &[f64]) -> Option<f64> {
    let mut r: Vec<f64> = residuals.iter().cloned().filter(|v| *v > 0.0 && v.is_finite()).collect();
    let n = r.len();
    if n >= 4 {
        let (a, b, c) = (r[n - 3], r[n - 2], r[n - 1]);
        if c > FLOOR_RATIO * b && b / a < c / b {
            r.pop();
        }
    }
    if r.len() < 3 {
        return None;
    }
    let (a, b, c) = (r[r.len() - 3], r[r.len() - 2], r[r.len() - 1]);
    if !(a > b && b > c) {
        return None;
    }
    Some((c / b).ln() / (b / a).ln())
}

/// Newton iteration until the residual is at most `tol` or `maxit` steps.
///
/// Aborts with [`Error::Diverged`] after [`DIVERGENCE_STEPS`] consecutive
/// residual increases.
pub fn newton_solve(
    p: &NonlinearPencil,
    u0: Vec<C64>,
    lambda0: f64,
    y: Vec<C64>,
    tol: f64,
    maxit: usize,
) -> Result<NewtonOutcome> {
    let mass = p.mass()?;
    let dual = DualNorm::new(&p.stiffness, &mass)?;
    let mut state = NewtonState::new(u0, lambda0, y, &mass)?;
    let mut trace = IterationTrace::default();
    let mut increases = 0;
    let mut prev = newton_residual(p, &dual, &state.u, state.lambda)?;
    if prev <= tol {
        return Ok(NewtonOutcome {
            u: state.u,
            lambda: state.lambda,
            trace,
            decay_exponent: None,
        });
    }
    for j in 1..=maxit {
        let t = std::time::Instant::now();
        newton_step(p, &mut state)?;
        let res = newton_residual(p, &dual, &state.u, state.lambda)?;
        trace.rows.push(TraceRow {
            j,
            mesh_level: 0,
            dofs: p.dim(),
            mu: state.lambda,
            lambda: state.lambda,
            rel_err: None,
            residual_dual: res,
            wall_seconds: t.elapsed().as_secs_f64(),
        });
        if res <= tol {
            let decay_exponent = decay_exponent(&trace.residuals());
            return Ok(NewtonOutcome {
                u: state.u,
                lambda: state.lambda,
                trace,
                decay_exponent,
            });
        }
        increases = if res > prev { increases + 1 } else { 0 };
        if increases >= DIVERGENCE_STEPS || !res.is_finite() {
            return Err(Error::Diverged {
                consecutive: increases,
                trace: Box::new(trace),
            });
        }
        prev = res;
    }
    Err(Error::NotConverged {
        steps: maxit,
        residual: prev,
    })
}

/// Seeded pseudo-random real normalization vector with entries in `[0, 1)`.
pub fn random_normalization(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| C64::new(rng.random::<f64>(), 0.0)).collect()
}

/// Start values from a constant-permittivity surrogate: `rq_steps` steps of
/// inverse iteration with Rayleigh scaling on `(K + M_c, M_c)`,
/// `M_c = M1 + const_eps2 M2`, from the all-ones vector.
///
/// Returns the iterate and `lambda0 = mu - 1`.
pub fn warm_start(mesh: &PeriodicMesh, k: BlochVector, const_eps2: f64, rq_steps: usize) -> Result<(Vec<C64>, f64)> {
    let forms = assemble_tm(mesh, k)?;
    warm_start_with(&forms, const_eps2, rq_steps)
}

pub fn warm_start_with(forms: &AssembledForms, const_eps2: f64, rq_steps: usize) -> Result<(Vec<C64>, f64)> {
    if !(const_eps2 > 0.0) {
        return Err(Error::InvalidPermittivity { value: const_eps2 });
    }
    const BETA: f64 = 1.0;
    let mass_w = forms.weighted_mass(1.0, const_eps2)?;
    let u0 = ones(forms.dof_count);
    if rq_steps == 0 {
        let a = forms.shifted_stiffness(BETA, &mass_w)?;
        let mu = rayleigh_quotient(&u0, &a, &mass_w)?;
        return Ok((u0, mu - BETA));
    }
    let p = Pencil::shifted(&forms.stiffness, &mass_w, &forms.mass, BETA)?;
    let (trace, u) = inverse_power_rq(&p, &u0, rq_steps)?;
    Ok((u, trace.last().expect("at least one step").lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> NonlinearPencil {
        NonlinearPencil {
            stiffness: HermitianSparse::diagonal(&[1.0, 3.0]),
            mass1: HermitianSparse::identity(2),
            mass2: HermitianSparse::from_triplets(2, 2, &[], true).unwrap(),
            model: DispersionModel::constant(1.0),
            alpha1: 1.0,
        }
    }

    #[test]
    fn toy_converges_quadratically() {
        let p = toy();
        let e1 = vec![C64::new(1.0, 0.0), C64::default()];
        let out = newton_solve(&p, e1.clone(), 0.81, e1, 1e-14, 6).unwrap();
        assert!((out.lambda - 1.0).abs() < 1e-14);
        assert!(out.trace.len() <= 6);
    }

    #[test]
    fn start_at_eigenpair_is_fixed() {
        let p = toy();
        let e1 = vec![C64::new(1.0, 0.0), C64::default()];
        let mass = p.mass().unwrap();
        let mut s = NewtonState::new(e1.clone(), 1.0, e1, &mass).unwrap();
        let step = newton_step(&p, &mut s).unwrap();
        assert!(step.s_norm < 1e-15 && step.nu.abs() < 1e-15);
    }

    #[test]
    fn perturbed_start_keeps_normalization() {
        let p = toy();
        let u0 = vec![C64::new(1.0, 0.0), C64::new(0.2, 0.1)];
        let y = vec![C64::new(0.7, 0.0), C64::new(0.4, 0.0)];
        let mass = p.mass().unwrap();
        let mut s = NewtonState::new(u0, 0.7, y, &mass).unwrap();
        for _ in 0..5 {
            newton_step(&p, &mut s).unwrap();
            assert!((s.constraint() - 1.0).norm() <= 1e-12);
        }
        assert!((s.lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decay_exponent_of_quadratic_sequence() {
        let r = [1e-1, 1e-2, 1e-4, 1e-8];
        assert!((decay_exponent(&r).unwrap() - 2.0).abs() < 1e-12);
        let floor = [1e-1, 1e-2, 1e-4, 1e-8, 5e-9];
        assert!((decay_exponent(&floor).unwrap() - 2.0).abs() < 1e-12);
        assert!(decay_exponent(&[1.0, 2.0]).is_none());
    }

    #[test]
    fn normalization_vector_is_reproducible() {
        assert_eq!(random_normalization(5, 7), random_normalization(5, 7));
        assert_ne!(random_normalization(5, 7), random_normalization(5, 8));
    }
}
