//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use photonic_eig::linalg::HermitianSparse;
use photonic_eig::mesh::PeriodicMesh;

pub fn dense(a: &HermitianSparse) -> DMatrix<C64> {
    let rows = a.to_dense();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| rows[i][j])
}

/// Ascending eigenvalues of the Hermitian-definite pencil `(a, b)` through
/// `L^{-1} A L^{-H}` with `B = L L^H`.
pub fn pencil_eigenvalues(a: &HermitianSparse, b: &HermitianSparse) -> Vec<f64> {
    let (a, b) = (dense(a), dense(b));
    let l = Cholesky::new(b).expect("mass matrix positive definite").l();
    let x = l.solve_lower_triangular(&a).expect("triangular solve");
    let c = l.solve_lower_triangular(&x.adjoint()).expect("triangular solve");
    let c = (&c + c.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest free-space eigenvalue `min_n |k + 2 pi n|^2`.
pub fn fourier_band(kx: f64, ky: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let mut best = f64::INFINITY;
    for nx in -4..=4 {
        for ny in -4..=4 {
            let (a, b) = (kx + tau * nx as f64, ky + tau * ny as f64);
            best = best.min(a * a + b * b);
        }
    }
    best
}

/// Nodal interpolant of the plane wave `exp(2 pi i n . x)`.
pub fn plane_wave(mesh: &PeriodicMesh, n: [f64; 2]) -> Vec<C64> {
    let tau = 2.0 * std::f64::consts::PI;
    (0..mesh.dof_count())
        .map(|d| {
            let x = mesh.dof_point(d);
            C64::from_polar(1.0, tau * (n[0] * x[0] + n[1] * x[1]))
        })
        .collect()
}
