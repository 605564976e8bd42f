//! Agreement with independent dense and analytic oracles.

mod common;

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use photonic_eig::assembly::{assemble_tm, BlochVector};
use photonic_eig::companion::{build_companion, nonlinear_residual_dl, solve_linearized};
use photonic_eig::dispersion::{porous_silicon, two_term_lorentz};
use photonic_eig::eigeniter::{arnoldi, arnoldi_restarted, Pencil};
use photonic_eig::linalg::hermitian_pencil_eigen;
use photonic_eig::linalg::vector::{norm2, ones};
use photonic_eig::mesh::build_mesh;
use photonic_eig::newton::{random_normalization, NonlinearPencil};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const K: BlochVector = BlochVector::new(PI / 2.0, PI);

#[test]
fn level_zero_spectrum_matches_dense_oracle() {
    let f = assemble_tm(&build_mesh(0).unwrap(), K).unwrap();
    let mw = f.weighted_mass(1.0, 8.0).unwrap();
    let oracle = common::pencil_eigenvalues(&f.stiffness, &mw);
    let (ours, _) = hermitian_pencil_eigen(
        &faer::Mat::from_fn(f.dof_count, f.dof_count, |i, j| f.stiffness.get(i, j)),
        &faer::Mat::from_fn(f.dof_count, f.dof_count, |i, j| mw.get(i, j)),
    )
    .unwrap();
    for (a, b) in ours.iter().zip(&oracle).take(20) {
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
    }
    let p = Pencil::shifted(&f.stiffness, &mw, &f.mass, 1.0).unwrap();
    let (r, _) = arnoldi_restarted(&p, &ones(f.dof_count), 16, 1e-12, 100).unwrap();
    assert!((r.lambda - oracle[0]).abs() <= 1e-10 * oracle[0]);
}

#[test]
fn full_krylov_space_reproduces_dense_ritz_values() {
    let f = assemble_tm(&build_mesh(0).unwrap(), BlochVector::new(0.3, 1.7)).unwrap();
    let p = Pencil::shifted(&f.stiffness, &f.mass, &f.mass, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u0: Vec<C64> = (0..p.dim()).map(|_| C64::new(rng.random(), rng.random())).collect();
    let r = arnoldi(&p, &u0, p.dim()).unwrap();
    let oracle = common::pencil_eigenvalues(&p.a_beta, &p.mass);
    assert!((r.mu - oracle[0]).abs() <= 1e-10 * oracle[0]);
}

#[test]
fn homogeneous_eigenvalues_converge_to_fourier_values() {
    // Off-lattice wave vector: the lowest band is |k|^2 with constant periodic
    // part, the next ones come from |k + 2 pi n|^2.
    let k = BlochVector::new(0.9, -0.4);
    let exact = common::fourier_band(k.kx, k.ky);
    let f = assemble_tm(&build_mesh(1).unwrap(), k).unwrap();
    let p = Pencil::shifted(&f.stiffness, &f.mass, &f.mass, 1.0).unwrap();
    let (r, _) = arnoldi_restarted(&p, &ones(f.dof_count), 8, 1e-11, 20).unwrap();
    assert!((r.lambda - exact).abs() <= 1e-10 * exact);
}

#[test]
fn companion_pencil_matches_dense_oracle_and_nonlinear_equation() {
    let model = two_term_lorentz();
    let mesh = build_mesh(0).unwrap();
    let beta = model.realize().unwrap().shift_bound() + 1.0;
    let cs = build_companion(&mesh, K, &model, 1.0, beta).unwrap();
    let oracle = common::pencil_eigenvalues(&cs.a_big, &cs.i_big);
    let (_, sol) = solve_linearized(&cs, &cs.default_start(), 5000, Some(1e-12)).unwrap();
    assert!((sol.mu - oracle[0]).abs() <= 1e-10 * oracle[0]);
    let u = &sol.z[..cs.n_v];
    let res = nonlinear_residual_dl(&mesh, K, &model, 1.0, u, sol.lambda).unwrap();
    assert!(res <= 1e-8, "nonlinear residual {res:e}");
    assert!(cs.defining_relation_defect(&sol.z, sol.lambda) <= 1e-8);
}

#[test]
fn derivative_has_second_order_taylor_remainder() {
    let f = assemble_tm(&build_mesh(0).unwrap(), K).unwrap();
    let p = NonlinearPencil::new(&f, porous_silicon(), 1.0);
    let v = random_normalization(f.dof_count, 4);
    for lambda in [2.0, 6.3, 30.0] {
        let base = p.t(lambda).unwrap().apply(&v);
        let tp = p.t_prime(lambda).unwrap().apply(&v);
        let mut rem = Vec::new();
        for h in [1e-3, 1e-4] {
            let shifted = p.t(lambda + h).unwrap().apply(&v);
            let d: Vec<C64> = shifted.iter().zip(&base).zip(&tp).map(|((a, b), t)| a - b - t * h).collect();
            rem.push(norm2(&d) / norm2(&v));
        }
        let ratio = rem[0] / rem[1];
        assert!((70.0..140.0).contains(&ratio), "lambda {lambda}: remainder ratio {ratio}");
    }
}

#[test]
fn omega_derivative_is_chain_rule_of_lambda_derivative() {
    let f = assemble_tm(&build_mesh(0).unwrap(), K).unwrap();
    let p = NonlinearPencil::new(&f, porous_silicon(), 1.0);
    let v = random_normalization(f.dof_count, 8);
    let omega = 2.5;
    let h = 1e-5;
    let fd: Vec<C64> = p
        .t_omega(omega + h)
        .unwrap()
        .apply(&v)
        .iter()
        .zip(&p.t_omega(omega - h).unwrap().apply(&v))
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect();
    let an = p.t_prime_omega(omega).unwrap().apply(&v);
    let err: Vec<C64> = fd.iter().zip(&an).map(|(a, b)| a - b).collect();
    assert!(norm2(&err) <= 1e-6 * norm2(&an));
}
