//! Shifted inverse power iteration (with and without Rayleigh scaling) and
//! the Krylov/Arnoldi accelerator on a Hermitian pencil `(A_beta, M_w)`.

use std::sync::Arc;

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::vector::{axpy, dot, norm2, scale, scaled};
use crate::linalg::{factorize, hermitian_pencil_eigen, rayleigh_quotient, DualNorm, Factorization, HermitianSparse, C64};

/// Relative norm of an orthogonalized Krylov direction below which the
/// space is treated as invariant.
pub const BREAKDOWN_TOL: f64 = 1e-12;

/// Shifted pencil `A_beta = K + beta M_w` with the weighted mass `M_w`, a
/// cached factorization of `A_beta` and an optional dual-norm evaluator.
#[derive(Debug, Clone)]
pub struct Pencil {
    pub a_beta: HermitianSparse,
    pub mass: HermitianSparse,
    pub beta: f64,
    factor: Arc<Factorization>,
    dual: Option<Arc<DualNorm>>,
}

impl Pencil {
    pub fn new(a_beta: HermitianSparse, mass: HermitianSparse, beta: f64) -> Result<Self> {
        if a_beta.dim() != mass.dim() {
            return Err(Error::DimensionMismatch {
                expected: a_beta.dim(),
                got: mass.dim(),
            });
        }
        let factor = Arc::new(factorize(&a_beta)?);
        Ok(Pencil {
            a_beta,
            mass,
            beta,
            factor,
            dual: None,
        })
    }

    /// `K + beta M_w`; residuals are measured in the dual norm of `K + M`.
    pub fn shifted(stiffness: &HermitianSparse, mass_w: &HermitianSparse, plain_mass: &HermitianSparse, beta: f64) -> Result<Self> {
        let a = stiffness.add_scaled(1.0, mass_w, beta)?;
        Ok(Pencil::new(a, mass_w.clone(), beta)?.with_dual_norm(DualNorm::new(stiffness, plain_mass)?))
    }

    pub fn with_dual_norm(mut self, dual: DualNorm) -> Self {
        self.dual = Some(Arc::new(dual));
        self
    }

    pub fn dim(&self) -> usize {
        self.a_beta.dim()
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factor
    }

    /// `A_beta^{-1} M_w x`.
    pub fn apply_inverse(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.factor.solve(&self.mass.apply(x))
    }

    pub fn mass_norm(&self, x: &[C64]) -> f64 {
        self.mass.quad_form(x).re.max(0.0).sqrt()
    }

    /// Norm of the functional `(K - lambda M_w) q` for the `M_w`-normalized
    /// `q`, given `mu = lambda + beta`. Euclidean when no dual norm is set.
    pub fn residual(&self, u: &[C64], mu: f64) -> Result<f64> {
        let n = self.mass_norm(u);
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        let q = scaled(u, C64::new(1.0 / n, 0.0));
        let mut r = self.a_beta.apply(&q);
        axpy(&mut r, C64::new(-mu, 0.0), &self.mass.apply(&q));
        match &self.dual {
            Some(d) => d.norm(&r),
            None => Ok(norm2(&r)),
        }
    }
}

/// One step of an eigenvalue iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepResult {
    pub mu: f64,
    pub lambda: f64,
    pub residual: f64,
}

/// One row of an iteration history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub j: usize,
    pub mesh_level: u32,
    pub dofs: usize,
    pub mu: f64,
    pub lambda: f64,
    pub rel_err: Option<f64>,
    pub residual_dual: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    /// Message of the error that ended the run early, if any.
    pub failure: Option<String>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn mus(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mu).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.residual_dual).collect()
    }

    /// Fills `rel_err = |mu - mu_ref| / |mu_ref|` on every row.
    pub fn set_reference(&mut self, mu_ref: f64) {
        for r in &mut self.rows {
            r.rel_err = Some((r.mu - mu_ref).abs() / mu_ref.abs());
        }
    }

    /// Largest relative increase of `mu` between consecutive rows on the same
    /// mesh level (zero for a monotone trace).
    pub fn max_mu_increase(&self) -> f64 {
        self.rows
            .windows(2)
            .filter(|w| w[0].mesh_level == w[1].mesh_level)
            .map(|w| ((w[1].mu - w[0].mu) / w[0].mu.abs()).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn total_seconds(&self) -> f64 {
        self.rows.iter().map(|r| r.wall_seconds).sum()
    }
}

/// Scaling of the next right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    /// `A u^j = mu^{j-1} M u~^{j-1}`.
    Rayleigh,
    /// `A v^j = M v~^{j-1}`.
    Plain,
}

/// Resumable inverse power iteration; the iterate can be replaced at any time
/// (e.g. after prolongation to a finer mesh).
#[derive(Debug, Clone)]
pub struct InversePower {
    scaling: Scaling,
    u: Vec<C64>,
    mu: f64,
}

impl InversePower {
    pub fn new(p: &Pencil, u0: Vec<C64>, scaling: Scaling) -> Result<Self> {
        let mut it = InversePower {
            scaling,
            u: Vec::new(),
            mu: 0.0,
        };
        it.reset(p, u0)?;
        Ok(it)
    }

    /// Replaces the iterate and recomputes its Rayleigh quotient in `p`.
    pub fn reset(&mut self, p: &Pencil, u: Vec<C64>) -> Result<()> {
        if u.len() != p.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                got: u.len(),
            });
        }
        self.mu = rayleigh_quotient(&u, &p.a_beta, &p.mass)?;
        self.u = u;
        Ok(())
    }

    pub fn vector(&self) -> &[C64] {
        &self.u
    }

    pub fn into_vector(self) -> Vec<C64> {
        self.u
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn step(&mut self, p: &Pencil) -> Result<StepResult> {
        let n = p.mass_norm(&self.u);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        let factor = match self.scaling {
            Scaling::Rayleigh => self.mu / n,
            Scaling::Plain => 1.0 / n,
        };
        let mut next = p.apply_inverse(&self.u)?;
        scale(&mut next, C64::new(factor, 0.0));
        let mu = rayleigh_quotient(&next, &p.a_beta, &p.mass)?;
        let residual = p.residual(&next, mu)?;
        self.u = next;
        self.mu = mu;
        Ok(StepResult {
            mu,
            lambda: mu - p.beta,
            residual,
        })
    }
}

fn run(p: &Pencil, u0: &[C64], steps: usize, scaling: Scaling) -> Result<(IterationTrace, Vec<C64>)> {
    let mut it = InversePower::new(p, u0.to_vec(), scaling)?;
    let mut trace = IterationTrace::default();
    for j in 1..=steps {
        let t = std::time::Instant::now();
        let s = it.step(p)?;
        trace.rows.push(TraceRow {
            j,
            mesh_level: 0,
            dofs: p.dim(),
            mu: s.mu,
            lambda: s.lambda,
            rel_err: None,
            residual_dual: s.residual,
            wall_seconds: t.elapsed().as_secs_f64(),
        });
    }
    Ok((trace, it.into_vector()))
}

/// Inverse power iteration with Rayleigh-quotient scaling.
pub fn inverse_power_rq(p: &Pencil, u0: &[C64], steps: usize) -> Result<(IterationTrace, Vec<C64>)> {
    run(p, u0, steps, Scaling::Rayleigh)
}

/// Inverse power iteration with unit multiplier.
pub fn inverse_power_plain(p: &Pencil, v0: &[C64], steps: usize) -> Result<(IterationTrace, Vec<C64>)> {
    run(p, v0, steps, Scaling::Plain)
}

/// Result of a Krylov projection.
#[derive(Debug, Clone)]
pub struct ArnoldiResult {
    /// Smallest Ritz value of `(A_beta, M_w)`.
    pub mu: f64,
    pub lambda: f64,
    pub vector: Vec<C64>,
    /// `M_w`-orthonormal Krylov basis.
    pub basis: Vec<Vec<C64>>,
    /// Ritz values, ascending.
    pub ritz_values: Vec<f64>,
    /// True if the Krylov space became invariant before reaching `m`.
    pub breakdown: bool,
}

fn m_dot(mass_x: &[C64], y: &[C64]) -> C64 {
    // <y, x>_M with `mass_x = M x`
    dot(y, mass_x)
}

/// Projects the pencil onto the `m`-dimensional Krylov space
/// `span{u0, A^{-1} M u0, ...}` and returns the smallest Ritz pair.
///
/// The basis is orthonormalized in the `M_w` inner product by classical
/// Gram-Schmidt with one reorthogonalization pass.
pub fn arnoldi(p: &Pencil, u0: &[C64], m: usize) -> Result<ArnoldiResult> {
    if m == 0 {
        return Err(Error::Config("Krylov dimension must be at least 1".into()));
    }
    if u0.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: u0.len(),
        });
    }
    let n0 = p.mass_norm(u0);
    if !(n0 > 0.0) {
        return Err(Error::ZeroVector);
    }
    let mut basis = vec![scaled(u0, C64::new(1.0 / n0, 0.0))];
    let mut mass_basis = vec![p.mass.apply(&basis[0])];
    let mut breakdown = false;
    while basis.len() < m.min(p.dim()) {
        let mut w = p.factor.solve(mass_basis.last().unwrap())?;
        let before = p.mass_norm(&w);
        for _pass in 0..2 {
            let coeffs: Vec<C64> = mass_basis.iter().map(|mv| dot(mv, &w)).collect();
            for (v, c) in basis.iter().zip(&coeffs) {
                axpy(&mut w, -c, v);
            }
        }
        let after = p.mass_norm(&w);
        if !(after > BREAKDOWN_TOL * before) {
            breakdown = true;
            break;
        }
        scale(&mut w, C64::new(1.0 / after, 0.0));
        mass_basis.push(p.mass.apply(&w));
        basis.push(w);
    }
    let k = basis.len();
    let a_basis: Vec<Vec<C64>> = basis.iter().map(|v| p.a_beta.apply(v)).collect();
    let kt = Mat::from_fn(k, k, |i, j| m_dot(&a_basis[j], &basis[i]));
    let mt = Mat::from_fn(k, k, |i, j| m_dot(&mass_basis[j], &basis[i]));
    let (values, vecs) = hermitian_pencil_eigen(&kt, &mt)?;
    let mut vector = vec![C64::default(); p.dim()];
    for (j, v) in basis.iter().enumerate() {
        axpy(&mut vector, vecs[(j, 0)], v);
    }
    let mu = values[0];
    Ok(ArnoldiResult {
        mu,
        lambda: mu - p.beta,
        vector,
        basis,
        ritz_values: values,
        breakdown,
    })
}

/// Restarted Arnoldi: repeats `m`-dimensional projections from the latest
/// Ritz vector until the dual-norm residual drops below `tol` or `max_cycles`
/// is reached.
pub fn arnoldi_restarted(p: &Pencil, u0: &[C64], m: usize, tol: f64, max_cycles: usize) -> Result<(ArnoldiResult, IterationTrace)> {
    let mut trace = IterationTrace::default();
    let mut start = u0.to_vec();
    let mut last = None;
    for j in 1..=max_cycles.max(1) {
        let t = std::time::Instant::now();
        let r = arnoldi(p, &start, m)?;
        let res = p.residual(&r.vector, r.mu)?;
        trace.rows.push(TraceRow {
            j,
            mesh_level: 0,
            dofs: p.dim(),
            mu: r.mu,
            lambda: r.lambda,
            rel_err: None,
            residual_dual: res,
            wall_seconds: t.elapsed().as_secs_f64(),
        });
        start = r.vector.clone();
        let done = res <= tol || r.breakdown;
        last = Some(r);
        if done {
            return Ok((last.unwrap(), trace));
        }
    }
    let residual = trace.last().map(|r| r.residual_dual).unwrap_or(f64::NAN);
    if residual.is_finite() && residual <= tol {
        return Ok((last.unwrap(), trace));
    }
    Err(Error::NotConverged {
        steps: max_cycles,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector::ones;

    fn diag_pencil() -> Pencil {
        Pencil::new(HermitianSparse::diagonal(&[1.0, 2.0]), HermitianSparse::identity(2), 0.0).unwrap()
    }

    #[test]
    fn diagonal_hand_iteration() {
        let p = diag_pencil();
        let (trace, u) = inverse_power_rq(&p, &ones(2), 30).unwrap();
        assert!((trace.rows[0].mu - 1.2).abs() < 1e-15);
        assert!((trace.last().unwrap().mu - 1.0).abs() < 1e-15);
        assert!(u[1].norm() / u[0].norm() < 1e-8);
        assert_eq!(trace.max_mu_increase(), 0.0);
    }

    #[test]
    fn plain_iterate_norm_tends_to_inverse_mu() {
        let p = diag_pencil();
        let (trace, v) = inverse_power_plain(&p, &ones(2), 40).unwrap();
        assert!((norm2(&v) - 1.0).abs() < 1e-10);
        assert!((trace.last().unwrap().mu - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigenvector_is_fixed_point() {
        let p = diag_pencil();
        let e1 = vec![C64::new(1.0, 0.0), C64::default()];
        let (trace, _) = inverse_power_rq(&p, &e1, 3).unwrap();
        assert!(trace.rows.iter().all(|r| r.mu == 1.0 && r.residual_dual == 0.0));
    }

    #[test]
    fn zero_start_is_rejected() {
        let p = diag_pencil();
        assert!(matches!(inverse_power_rq(&p, &[C64::default(); 2], 1), Err(Error::ZeroVector)));
        assert!(matches!(arnoldi(&p, &[C64::default(); 2], 2), Err(Error::ZeroVector)));
    }

    #[test]
    fn arnoldi_small_cases() {
        let p = Pencil::new(HermitianSparse::diagonal(&[1.0, 2.0, 5.0]), HermitianSparse::identity(3), 0.0).unwrap();
        let u0 = ones(3);
        let one = arnoldi(&p, &u0, 1).unwrap();
        assert!((one.mu - rayleigh_quotient(&u0, &p.a_beta, &p.mass).unwrap()).abs() < 1e-14);
        let full = arnoldi(&p, &u0, 3).unwrap();
        assert!((full.mu - 1.0).abs() < 1e-12);
        let more = arnoldi(&p, &u0, 10).unwrap();
        assert_eq!(more.basis.len(), 3);
    }
}
