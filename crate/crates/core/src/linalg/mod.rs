//! Sparse complex matrices, direct factorizations, Rayleigh quotients and the
//! dual-norm residual measure.

mod compensated;
mod dense;
mod factor;
pub mod market;
mod sparse;
pub mod vector;

use std::sync::atomic::{AtomicU64, Ordering};

pub use compensated::combination_apply;
pub use dense::hermitian_pencil_eigen;
pub use factor::{factorize, factorize_lu, Factorization, SOLVE_TOL};
pub use sparse::{CsrPattern, HermitianSparse, HERMITIAN_TOL};
pub use vector::C64;

use crate::error::{Error, Result};
use vector::{dot, norm2};

/// Relative size of discarded imaginary parts in Rayleigh quotients above
/// which the warning counter is bumped.
pub const RQ_IMAG_TOL: f64 = 1e-12;

static RQ_IMAG_WARNINGS: AtomicU64 = AtomicU64::new(0);

/// Number of Rayleigh quotients whose numerator or denominator carried an
/// imaginary part above [`RQ_IMAG_TOL`] since process start.
pub fn rayleigh_imag_warnings() -> u64 {
    RQ_IMAG_WARNINGS.load(Ordering::Relaxed)
}

/// `(u^H A u) / (u^H B u)` for a Hermitian pencil.
pub fn rayleigh_quotient(u: &[C64], a: &HermitianSparse, b: &HermitianSparse) -> Result<f64> {
    if u.len() != a.ncols() || u.len() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: u.len(),
        });
    }
    if norm2(u) == 0.0 {
        return Err(Error::ZeroVector);
    }
    let num = a.quad_form(u);
    let den = b.quad_form(u);
    if den.re == 0.0 {
        return Err(Error::ZeroVector);
    }
    if num.im.abs() > RQ_IMAG_TOL * num.norm().max(f64::MIN_POSITIVE)
        || den.im.abs() > RQ_IMAG_TOL * den.norm()
    {
        RQ_IMAG_WARNINGS.fetch_add(1, Ordering::Relaxed);
        log::debug!("rayleigh quotient imaginary parts: num {:e}, den {:e}", num.im, den.im);
    }
    Ok(num.re / den.re)
}

/// `sqrt(u^H B u)` for Hermitian positive (semi)definite `B`.
pub fn energy_norm(u: &[C64], b: &HermitianSparse) -> f64 {
    b.quad_form(u).re.max(0.0).sqrt()
}

/// Dual norm `sqrt(r^H (K + M)^{-1} r)` of assembled functionals with one
/// cached factorization of `K + M`.
///
/// Applying the function-space form `z^H M (K+M)^{-1} M z` to the
/// representative `z = M^{-1} r` gives the same value.
#[derive(Debug)]
pub struct DualNorm {
    factor: Factorization,
}

impl DualNorm {
    pub fn new(stiffness: &HermitianSparse, mass: &HermitianSparse) -> Result<Self> {
        let energy = stiffness.add_scaled(1.0, mass, 1.0)?;
        Ok(DualNorm {
            factor: factorize(&energy)?,
        })
    }

    /// Dual norm with respect to an arbitrary Hermitian positive definite
    /// energy matrix `E`: `sqrt(r^H E^{-1} r)`.
    pub fn from_energy(energy: &HermitianSparse) -> Result<Self> {
        Ok(DualNorm {
            factor: factorize(energy)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    pub fn norm(&self, r: &[C64]) -> Result<f64> {
        let x = self.factor.solve(r)?;
        Ok(dot(r, &x).re.max(0.0).sqrt())
    }
}

/// One-shot dual-norm evaluation; prefer [`DualNorm`] when reused.
pub fn dual_norm_residual(r: &[C64], k: &HermitianSparse, m: &HermitianSparse) -> Result<f64> {
    DualNorm::new(k, m)?.norm(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn rayleigh_equal_pencil_is_one() {
        let a = HermitianSparse::diagonal(&[2.0, 5.0, 1.0]);
        let u = [C64::new(1.0, 2.0), c(-3.0), C64::new(0.0, 1.0)];
        assert!((rayleigh_quotient(&u, &a, &a).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rayleigh_diag_by_hand() {
        let a = HermitianSparse::diagonal(&[1.0, 3.0]);
        let b = HermitianSparse::identity(2);
        assert_eq!(rayleigh_quotient(&[c(1.0), c(1.0)], &a, &b).unwrap(), 2.0);
    }

    #[test]
    fn rayleigh_rejects_zero() {
        let a = HermitianSparse::identity(2);
        assert!(matches!(rayleigh_quotient(&[c(0.0), c(0.0)], &a, &a), Err(Error::ZeroVector)));
    }

    #[test]
    fn dual_norm_trivial_cases() {
        let n = 3;
        let zero = HermitianSparse::from_triplets(n, n, &[], true).unwrap();
        let id = HermitianSparse::identity(n);
        let r = [C64::new(3.0, 4.0), c(0.0), c(0.0)];
        assert!((dual_norm_residual(&r, &zero, &id).unwrap() - 5.0).abs() < 1e-14);
        assert_eq!(dual_norm_residual(&[c(0.0); 3], &zero, &id).unwrap(), 0.0);
    }
}
