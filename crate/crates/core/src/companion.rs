//! Linearization of the lossless Lorentz TM problem into an extended linear
//! Hermitian eigenproblem, and its solution by shifted inverse iteration.
//!
//! With the realization `(A, b, Xi)` of the permittivity, auxiliary fields
//! `x_l = b_l / (eta_l^2 - lambda) * u|_inclusion` turn the rational problem
//! into the block pencil
//!
//! ```text
//! [ K + Xi M2 + beta M_a   -b_1 R  ...  -b_L R ]       [ M_a              ]
//! [ -b_1 R^H   (eta_1^2 + beta) M_X            ]  = mu [      M_X         ]
//! [   ...                          ...         ]       [           ...    ]
//! ```
//!
//! The space of auxiliary fields is discretized by point values at the
//! inclusion quadrature points, so `M_X = diag(w_q)`, `R_aq = phi_a(x_q) w_q`
//! and `R M_X^{-1} R^H = M2` holds exactly.

use crate::assembly::{assemble_tm, inclusion_points, AssembledForms, BlochVector, InclusionPoints};
use crate::dispersion::{DispersionModel, Realization};
use crate::eigeniter::{InversePower, IterationTrace, Pencil, Scaling, TraceRow};
use crate::error::{Error, Result};
use crate::linalg::vector::{axpy, ones};
use crate::linalg::{DualNorm, HermitianSparse, C64};
use crate::mesh::{MaterialMap, PeriodicMesh};

/// Discretized auxiliary space on the inclusion.
#[derive(Debug, Clone)]
pub struct XSpace {
    pub points: InclusionPoints,
    /// Coupling `R` (V rows, X columns).
    pub coupling: HermitianSparse,
    /// Diagonal of `M_X`.
    pub mass_diag: Vec<f64>,
}

impl XSpace {
    pub fn new(mesh: &PeriodicMesh, map: &MaterialMap) -> Result<Self> {
        let points = inclusion_points(mesh, map);
        let mut t = Vec::with_capacity(9 * points.len());
        for q in 0..points.len() {
            for a in 0..9 {
                t.push((points.dofs[q][a], q, C64::new(points.phi[q][a] * points.weights[q], 0.0)));
            }
        }
        let coupling = HermitianSparse::from_triplets(mesh.dof_count(), points.len(), &t, false)?;
        Ok(XSpace {
            mass_diag: points.weights.clone(),
            points,
            coupling,
        })
    }

    pub fn dim(&self) -> usize {
        self.mass_diag.len()
    }
}

/// Block matrices of the linearized problem.
#[derive(Debug, Clone)]
pub struct CompanionSystem {
    pub a_big: HermitianSparse,
    pub i_big: HermitianSparse,
    pub beta: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub n_v: usize,
    pub n_x: usize,
    pub realization: Realization,
    pub xspace: XSpace,
    pub forms: AssembledForms,
}

impl CompanionSystem {
    pub fn dim(&self) -> usize {
        self.n_v + self.realization.len() * self.n_x
    }

    /// `M_a = alpha1 M1 + alpha2 M2`.
    pub fn mass_alpha(&self) -> Result<HermitianSparse> {
        self.forms.weighted_mass(self.alpha1, self.alpha2)
    }

    /// Splits an extended vector into its `u` part and the `L` auxiliary parts.
    pub fn split<'a>(&self, z: &'a [C64]) -> (&'a [C64], Vec<&'a [C64]>) {
        let (u, rest) = z.split_at(self.n_v);
        (u, rest.chunks(self.n_x.max(1)).take(self.realization.len()).collect())
    }

    /// Default start: `u` all ones, auxiliary fields zero.
    pub fn default_start(&self) -> Vec<C64> {
        let mut z = ones(self.n_v);
        z.resize(self.dim(), C64::default());
        z
    }

    /// Auxiliary fields from the defining relation
    /// `(eta_l^2 - lambda) M_X x_l = b_l R^H u`.
    pub fn auxiliary_from(&self, u: &[C64], lambda: f64) -> Result<Vec<Vec<C64>>> {
        let rhu = self.coupling_adjoint(u);
        let mut out = Vec::with_capacity(self.realization.len());
        for (&a, &b) in self.realization.a.iter().zip(&self.realization.b) {
            let d = a - lambda;
            if d.abs() <= crate::dispersion::POLE_GUARD * a.abs().max(1.0) {
                return Err(Error::NearPole { lambda, pole: a });
            }
            out.push(
                rhu.iter()
                    .zip(&self.xspace.mass_diag)
                    .map(|(v, w)| v * (b / (d * w)))
                    .collect(),
            );
        }
        Ok(out)
    }

    /// `R^H u`.
    pub fn coupling_adjoint(&self, u: &[C64]) -> Vec<C64> {
        self.xspace.coupling.apply_adjoint(u)
    }

    /// Largest blockwise defect `||(eta_l^2 - lambda) M_X x_l - b_l R^H u||`
    /// relative to `||b_l R^H u||`.
    pub fn defining_relation_defect(&self, z: &[C64], lambda: f64) -> f64 {
        let (u, xs) = self.split(z);
        let rhu = self.coupling_adjoint(u);
        let rn = crate::linalg::vector::norm2(&rhu);
        let mut worst: f64 = 0.0;
        for ((x, &a), &b) in xs.iter().zip(&self.realization.a).zip(&self.realization.b) {
            let d: f64 = x
                .iter()
                .zip(&self.xspace.mass_diag)
                .zip(&rhu)
                .map(|((xq, w), r)| (xq * ((a - lambda) * w) - r * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(d / (b.abs() * rn));
        }
        worst
    }
}

/// Builds the companion system for `model` at wave vector `k`, refusing shifts
/// that do not exceed the positivity bound `max eta^2 - min eta^2`.
pub fn build_companion(
    mesh: &PeriodicMesh,
    k: BlochVector,
    model: &DispersionModel,
    alpha1: f64,
    beta: f64,
) -> Result<CompanionSystem> {
    let realization = model.realize()?;
    let alpha2 = model.alpha()?;
    let bound = realization.shift_bound();
    if !(beta > bound) {
        return Err(Error::InsufficientShift { beta, bound });
    }
    let forms = assemble_tm(mesh, k)?;
    let xspace = XSpace::new(mesh, &MaterialMap::default())?;
    let n_v = mesh.dof_count();
    let n_x = xspace.dim();
    let m_alpha = forms.weighted_mass(alpha1, alpha2)?;
    let vv = HermitianSparse::lin_comb(
        &[
            (C64::new(1.0, 0.0), &forms.stiffness),
            (C64::new(realization.xi, 0.0), &forms.mass2),
            (C64::new(beta, 0.0), &m_alpha),
        ],
        true,
    )?;
    let l = realization.len();
    let mut at: Vec<(usize, usize, C64)> = vv.triplets().collect();
    let mut it: Vec<(usize, usize, C64)> = m_alpha.triplets().collect();
    for (block, (&a, &b)) in realization.a.iter().zip(&realization.b).enumerate() {
        let off = n_v + block * n_x;
        for (i, q, v) in xspace.coupling.triplets() {
            at.push((i, off + q, -v * b));
            at.push((off + q, i, -v.conj() * b));
        }
        for (q, &w) in xspace.mass_diag.iter().enumerate() {
            at.push((off + q, off + q, C64::new((a + beta) * w, 0.0)));
            it.push((off + q, off + q, C64::new(w, 0.0)));
        }
    }
    let n = n_v + l * n_x;
    let a_big = HermitianSparse::from_triplets(n, n, &at, true)?;
    let i_big = HermitianSparse::from_triplets(n, n, &it, true)?;
    Ok(CompanionSystem {
        a_big,
        i_big,
        beta,
        alpha1,
        alpha2,
        n_v,
        n_x,
        realization,
        xspace,
        forms,
    })
}

/// Converged quantities of the linearized iteration.
#[derive(Debug, Clone)]
pub struct CompanionSolution {
    pub z: Vec<C64>,
    pub mu: f64,
    pub lambda: f64,
}

/// Inverse iteration pencil on `(ABig, IBig)` with residuals measured in the
/// dual norm of `ABig`.
pub fn companion_pencil(cs: &CompanionSystem) -> Result<Pencil> {
    let dual = DualNorm::from_energy(&cs.a_big)?;
    Ok(Pencil::new(cs.a_big.clone(), cs.i_big.clone(), cs.beta)?.with_dual_norm(dual))
}

/// Shifted inverse iteration with Rayleigh scaling on the companion pencil,
/// for `steps` steps or until the residual drops below `tol`.
pub fn solve_linearized(
    cs: &CompanionSystem,
    z0: &[C64],
    steps: usize,
    tol: Option<f64>,
) -> Result<(IterationTrace, CompanionSolution)> {
    let p = companion_pencil(cs)?;
    solve_linearized_with(&p, cs, z0, steps, tol)
}

pub fn solve_linearized_with(
    p: &Pencil,
    cs: &CompanionSystem,
    z0: &[C64],
    steps: usize,
    tol: Option<f64>,
) -> Result<(IterationTrace, CompanionSolution)> {
    if z0.len() != cs.dim() {
        return Err(Error::DimensionMismatch {
            expected: cs.dim(),
            got: z0.len(),
        });
    }
    if z0[..cs.n_v].iter().all(|v| *v == C64::default()) {
        return Err(Error::ZeroVector);
    }
    let mut it = InversePower::new(p, z0.to_vec(), Scaling::Rayleigh)?;
    let mut trace = IterationTrace::default();
    for j in 1..=steps {
        let t = std::time::Instant::now();
        let s = it.step(p)?;
        trace.rows.push(TraceRow {
            j,
            mesh_level: 0,
            dofs: cs.dim(),
            mu: s.mu,
            lambda: s.lambda,
            rel_err: None,
            residual_dual: s.residual,
            wall_seconds: t.elapsed().as_secs_f64(),
        });
        if tol.is_some_and(|tol| s.residual <= tol) {
            break;
        }
    }
    let mu = it.mu();
    Ok((
        trace,
        CompanionSolution {
            z: it.into_vector(),
            mu,
            lambda: mu - cs.beta,
        },
    ))
}

/// Dual norm of `(K + Xi M2 - lambda M_a - t(lambda) M2) u` for the
/// `M_a`-normalized `u`, where `t` is the scalar transfer function.
pub fn nonlinear_residual_with(cs: &CompanionSystem, dual: &DualNorm, u: &[C64], lambda: f64) -> Result<f64> {
    let t = cs.realization.transfer(lambda)?;
    let m_alpha = cs.mass_alpha()?;
    let n = m_alpha.quad_form(u).re.sqrt();
    if !(n > 0.0) {
        return Err(Error::ZeroVector);
    }
    let mut r = cs.forms.stiffness.apply(u);
    axpy(&mut r, C64::new(cs.realization.xi - t, 0.0), &cs.forms.mass2.apply(u));
    axpy(&mut r, C64::new(-lambda, 0.0), &m_alpha.apply(u));
    Ok(dual.norm(&r)? / n)
}

/// Nonlinear residual of `(u, lambda)` on `mesh`, using the dual norm of
/// `K + M`.
pub fn nonlinear_residual_dl(
    mesh: &PeriodicMesh,
    k: BlochVector,
    model: &DispersionModel,
    alpha1: f64,
    u: &[C64],
    lambda: f64,
) -> Result<f64> {
    let realization = model.realize()?;
    let forms = assemble_tm(mesh, k)?;
    let cs = CompanionSystem {
        a_big: forms.stiffness.clone(),
        i_big: forms.mass.clone(),
        beta: realization.shift_bound() + 1.0,
        alpha1,
        alpha2: model.alpha()?,
        n_v: mesh.dof_count(),
        n_x: 0,
        realization,
        xspace: XSpace {
            points: InclusionPoints::default(),
            coupling: HermitianSparse::from_triplets(mesh.dof_count(), 0, &[], false)?,
            mass_diag: Vec::new(),
        },
        forms,
    };
    let dual = DualNorm::new(&cs.forms.stiffness, &cs.forms.mass)?;
    nonlinear_residual_with(&cs, &dual, u, lambda)
}
