//! Assembly of the Bloch-shifted stiffness and (weighted) mass matrices on a
//! periodic Q2 mesh.
//!
//! With `grad_k = grad + i k` and the form `a(u, v) = int w grad_k u . conj(grad_k v)`
//! the matrix entry `K_ab = a(phi_b, phi_a)` expands to
//!
//! ```text
//! K(k) = K0 + |k|^2 M_w + i (k_x D_x + k_y D_y),   D_j = C_j^T - C_j,
//! (C_j)_ab = int w phi_a d_j phi_b
//! ```
//!
//! `D_j` is assembled cell by cell from exactly antisymmetric local blocks,
//! which makes `K(k)` Hermitian bit-for-bit.
//!
//! The inclusion interface is resolved by quadrature: cells whose corners
//! disagree on the material use a 4x4 Gauss rule, all others 3x3.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{CsrPattern, HermitianSparse, C64};
use crate::mesh::{lagrange2, lagrange2_deriv, Material, MaterialMap, PeriodicMesh};

/// Wave vector of the Floquet-Bloch reduction.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct BlochVector {
    pub kx: f64,
    pub ky: f64,
}

impl BlochVector {
    pub const fn new(kx: f64, ky: f64) -> Self {
        BlochVector { kx, ky }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.kx * self.kx + self.ky * self.ky
    }

    pub fn neg(&self) -> Self {
        BlochVector::new(-self.kx, -self.ky)
    }

    pub fn is_finite(&self) -> bool {
        self.kx.is_finite() && self.ky.is_finite()
    }
}

/// Gauss-Legendre rule on `[0, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        3 => {
            let s = (0.6f64).sqrt() / 2.0;
            (vec![0.5 - s, 0.5, 0.5 + s], vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 72.0;
            let wb = (18.0 - 30f64.sqrt()) / 72.0;
            (
                vec![0.5 - b / 2.0, 0.5 - a / 2.0, 0.5 + a / 2.0, 0.5 + b / 2.0],
                vec![wb, wa, wa, wb],
            )
        }
        _ => unreachable!("only 3- and 4-point rules are used"),
    }
}

/// Tensor rule with Q2 basis tabulated at its points (reference cell).
#[derive(Debug, Clone)]
pub struct CellRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub phi: Vec<[f64; 9]>,
    /// Reference-cell gradients `(d/dxi, d/deta)`.
    pub grad: Vec<[[f64; 2]; 9]>,
}

impl CellRule {
    pub fn gauss(n: usize) -> Self {
        let (t, w) = gauss_legendre(n);
        let mut rule = CellRule {
            points: Vec::new(),
            weights: Vec::new(),
            phi: Vec::new(),
            grad: Vec::new(),
        };
        for (qy, &ty) in t.iter().enumerate() {
            for (qx, &tx) in t.iter().enumerate() {
                let (lx, ly) = (lagrange2(tx), lagrange2(ty));
                let (dx, dy) = (lagrange2_deriv(tx), lagrange2_deriv(ty));
                let mut phi = [0.0; 9];
                let mut grad = [[0.0; 2]; 9];
                for b in 0..3 {
                    for a in 0..3 {
                        phi[a + 3 * b] = lx[a] * ly[b];
                        grad[a + 3 * b] = [dx[a] * ly[b], lx[a] * dy[b]];
                    }
                }
                rule.points.push([tx, ty]);
                rule.weights.push(w[qx] * w[qy]);
                rule.phi.push(phi);
                rule.grad.push(grad);
            }
        }
        rule
    }
}

/// Quadrature rules and per-cell material tags at quadrature points.
#[derive(Debug, Clone)]
pub struct MeshQuadrature {
    regular: CellRule,
    interface: CellRule,
    cut: Vec<bool>,
    materials: Vec<Vec<Material>>,
}

impl MeshQuadrature {
    pub fn new(mesh: &PeriodicMesh, map: &MaterialMap) -> Self {
        let regular = CellRule::gauss(3);
        let interface = CellRule::gauss(4);
        let h = mesh.cell_size();
        let mut cut = Vec::with_capacity(mesh.cell_count());
        let mut materials = Vec::with_capacity(mesh.cell_count());
        for (c, corners) in mesh.cells().iter().enumerate() {
            let tags: Vec<Material> = corners.iter().map(|&k| map.classify(mesh.nodes()[k])).collect();
            let is_cut = tags.iter().any(|&t| t != tags[0]);
            let rule = if is_cut { &interface } else { &regular };
            let o = mesh.cell_origin(c);
            materials.push(
                rule.points
                    .iter()
                    .map(|p| map.classify([o[0] + h * p[0], o[1] + h * p[1]]))
                    .collect(),
            );
            cut.push(is_cut);
        }
        MeshQuadrature {
            regular,
            interface,
            cut,
            materials,
        }
    }

    pub fn rule(&self, cell: usize) -> &CellRule {
        if self.cut[cell] {
            &self.interface
        } else {
            &self.regular
        }
    }

    pub fn is_cut(&self, cell: usize) -> bool {
        self.cut[cell]
    }

    pub fn materials(&self, cell: usize) -> &[Material] {
        &self.materials[cell]
    }
}

/// Quadrature approximation of the inclusion area.
pub fn inclusion_area(mesh: &PeriodicMesh, map: &MaterialMap) -> f64 {
    let q = MeshQuadrature::new(mesh, map);
    let area = mesh.cell_size() * mesh.cell_size();
    (0..mesh.cell_count())
        .map(|c| {
            let r = q.rule(c);
            r.weights
                .iter()
                .zip(q.materials(c))
                .filter(|(_, &m)| m == Material::Inclusion)
                .map(|(w, _)| w * area)
                .sum::<f64>()
        })
        .sum()
}

/// Shared CSR structure of all Q2 matrices on a mesh plus, for every cell,
/// the value positions of its 9x9 local block.
#[derive(Debug, Clone)]
pub struct MeshPattern {
    pub pattern: Arc<CsrPattern>,
    pub cell_positions: Vec<[usize; 81]>,
}

impl MeshPattern {
    pub fn new(mesh: &PeriodicMesh) -> Self {
        let n = mesh.dof_count();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for c in 0..mesh.cell_count() {
            let dofs = mesh.cell_dofs(c);
            for &a in &dofs {
                rows[a].extend_from_slice(&dofs);
            }
        }
        let pattern = Arc::new(CsrPattern::from_rows(n, rows));
        let cell_positions = (0..mesh.cell_count())
            .map(|c| {
                let dofs = mesh.cell_dofs(c);
                let mut pos = [0usize; 81];
                for (a, &ra) in dofs.iter().enumerate() {
                    for (b, &cb) in dofs.iter().enumerate() {
                        pos[9 * a + b] = pattern.position(ra, cb).expect("cell block in pattern");
                    }
                }
                pos
            })
            .collect();
        MeshPattern {
            pattern,
            cell_positions,
        }
    }
}

/// Stiffness `K(k)` with plain mass `M` and its restrictions `M1`, `M2` to the
/// background and inclusion; all four share one sparsity pattern.
#[derive(Debug, Clone)]
pub struct AssembledForms {
    pub stiffness: HermitianSparse,
    pub mass: HermitianSparse,
    pub mass1: HermitianSparse,
    pub mass2: HermitianSparse,
    pub dof_count: usize,
    pub k: BlochVector,
}

impl AssembledForms {
    /// `w1 M1 + w2 M2`.
    pub fn weighted_mass(&self, w1: f64, w2: f64) -> Result<HermitianSparse> {
        self.mass1.add_scaled(w1, &self.mass2, w2)
    }

    /// `K(k) + beta * mass`.
    pub fn shifted_stiffness(&self, beta: f64, mass: &HermitianSparse) -> Result<HermitianSparse> {
        self.stiffness.add_scaled(1.0, mass, beta)
    }
}

struct RawBlocks {
    k0: Vec<f64>,
    mw: Vec<f64>,
    dx: Vec<f64>,
    dy: Vec<f64>,
    m1: Vec<f64>,
    m2: Vec<f64>,
}

/// Accumulates all real-valued building blocks; `stiff_weight` is the
/// coefficient of the gradient form in each material.
fn assemble_blocks(
    mesh: &PeriodicMesh,
    quad: &MeshQuadrature,
    mp: &MeshPattern,
    stiff_weight: impl Fn(Material) -> f64,
) -> RawBlocks {
    let nnz = mp.pattern.nnz();
    let mut out = RawBlocks {
        k0: vec![0.0; nnz],
        mw: vec![0.0; nnz],
        dx: vec![0.0; nnz],
        dy: vec![0.0; nnz],
        m1: vec![0.0; nnz],
        m2: vec![0.0; nnz],
    };
    let h = mesh.cell_size();
    let area = h * h;
    for c in 0..mesh.cell_count() {
        let rule = quad.rule(c);
        let mats = quad.materials(c);
        let mut k0 = [0.0; 81];
        let mut mw = [0.0; 81];
        let mut m1 = [0.0; 81];
        let mut m2 = [0.0; 81];
        let mut cx = [0.0; 81];
        let mut cy = [0.0; 81];
        for q in 0..rule.weights.len() {
            let w = rule.weights[q] * area;
            let sw = stiff_weight(mats[q]) * w;
            let phi = &rule.phi[q];
            let g = &rule.grad[q];
            let mass_slot = if mats[q] == Material::Inclusion { &mut m2 } else { &mut m1 };
            for a in 0..9 {
                let (gax, gay) = (g[a][0] / h, g[a][1] / h);
                for b in 0..9 {
                    let (gbx, gby) = (g[b][0] / h, g[b][1] / h);
                    let pp = phi[a] * phi[b];
                    k0[9 * a + b] += sw * (gax * gbx + gay * gby);
                    mw[9 * a + b] += sw * pp;
                    mass_slot[9 * a + b] += w * pp;
                    cx[9 * a + b] += sw * phi[a] * gbx;
                    cy[9 * a + b] += sw * phi[a] * gby;
                }
            }
        }
        let pos = &mp.cell_positions[c];
        for a in 0..9 {
            for b in 0..9 {
                // symmetric blocks read from the upper triangle, antisymmetric
                // ones from an explicit difference, so global symmetry is exact
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let s = 9 * lo + hi;
                let p = pos[9 * a + b];
                out.k0[p] += k0[s];
                out.mw[p] += mw[s];
                out.m1[p] += m1[s];
                out.m2[p] += m2[s];
                out.dx[p] += cx[9 * b + a] - cx[9 * a + b];
                out.dy[p] += cy[9 * b + a] - cy[9 * a + b];
            }
        }
    }
    out
}

fn forms_from_blocks(mp: &MeshPattern, raw: &RawBlocks, k: BlochVector, dof_count: usize) -> Result<AssembledForms> {
    let kk = k.norm_sqr();
    let stiff: Vec<C64> = (0..raw.k0.len())
        .map(|p| C64::new(raw.k0[p] + kk * raw.mw[p], k.kx * raw.dx[p] + k.ky * raw.dy[p]))
        .collect();
    let real = |v: &[f64]| v.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>();
    let stiffness = HermitianSparse::from_pattern(mp.pattern.clone(), stiff, true)?;
    let mass1 = HermitianSparse::from_pattern(mp.pattern.clone(), real(&raw.m1), true)?;
    let mass2 = HermitianSparse::from_pattern(mp.pattern.clone(), real(&raw.m2), true)?;
    let mass = mass1.add_scaled(1.0, &mass2, 1.0)?;
    Ok(AssembledForms {
        stiffness,
        mass,
        mass1,
        mass2,
        dof_count,
        k,
    })
}

/// TM mode: unweighted shifted-gradient stiffness; permittivity enters only
/// through the mass weights chosen by the caller.
pub fn assemble_tm(mesh: &PeriodicMesh, k: BlochVector) -> Result<AssembledForms> {
    assemble_weighted(mesh, &MaterialMap::default(), k, 1.0, 1.0)
}

/// TE mode: stiffness weighted by `1/eps` per material, unweighted mass.
pub fn assemble_te(mesh: &PeriodicMesh, k: BlochVector, eps1: f64, eps2: f64) -> Result<AssembledForms> {
    for eps in [eps1, eps2] {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidPermittivity { value: eps });
        }
    }
    assemble_weighted(mesh, &MaterialMap::default(), k, 1.0 / eps1, 1.0 / eps2)
}

/// General assembly with stiffness coefficients `w1` (background) and `w2`
/// (inclusion).
pub fn assemble_weighted(
    mesh: &PeriodicMesh,
    map: &MaterialMap,
    k: BlochVector,
    w1: f64,
    w2: f64,
) -> Result<AssembledForms> {
    if !k.is_finite() {
        return Err(Error::Config(format!("non-finite wave vector {k:?}")));
    }
    let quad = MeshQuadrature::new(mesh, map);
    let mp = MeshPattern::new(mesh);
    let raw = assemble_blocks(mesh, &quad, &mp, |m| match m {
        Material::Background => w1,
        Material::Inclusion => w2,
    });
    forms_from_blocks(&mp, &raw, k, mesh.dof_count())
}

/// `w1 M1 + w2 M2` assembled directly from the mesh.
pub fn weighted_mass(mesh: &PeriodicMesh, w1: f64, w2: f64) -> Result<HermitianSparse> {
    assemble_tm(mesh, BlochVector::default())?.weighted_mass(w1, w2)
}

/// Inclusion quadrature points with their DOFs, basis values and weights.
///
/// These points discretize `L^2(inclusion)` for the auxiliary variables of
/// the linearized Drude-Lorentz problem.
#[derive(Debug, Clone, Default)]
pub struct InclusionPoints {
    pub dofs: Vec<[usize; 9]>,
    pub phi: Vec<[f64; 9]>,
    pub weights: Vec<f64>,
    pub points: Vec<[f64; 2]>,
}

impl InclusionPoints {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub fn inclusion_points(mesh: &PeriodicMesh, map: &MaterialMap) -> InclusionPoints {
    let quad = MeshQuadrature::new(mesh, map);
    let h = mesh.cell_size();
    let mut out = InclusionPoints::default();
    for c in 0..mesh.cell_count() {
        let rule = quad.rule(c);
        let dofs = mesh.cell_dofs(c);
        let o = mesh.cell_origin(c);
        for (q, &m) in quad.materials(c).iter().enumerate() {
            if m == Material::Inclusion {
                out.dofs.push(dofs);
                out.phi.push(rule.phi[q]);
                out.weights.push(rule.weights[q] * h * h);
                out.points.push([o[0] + h * rule.points[q][0], o[1] + h * rule.points[q][1]]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::factorize;
    use crate::mesh::build_mesh;
    use std::f64::consts::PI;

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for n in [3, 4] {
            let (t, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let s: f64 = t.iter().zip(&w).map(|(x, wi)| wi * x.powi(p as i32)).sum();
                assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-15, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn matrices_are_hermitian_and_mass_splits() {
        let mesh = build_mesh(0).unwrap();
        let f = assemble_tm(&mesh, BlochVector::new(0.7, -1.9)).unwrap();
        for m in [&f.stiffness, &f.mass, &f.mass1, &f.mass2] {
            assert!(m.hermitian_defect() <= 1e-13);
        }
        let sum = f.mass1.add_scaled(1.0, &f.mass2, 1.0).unwrap();
        assert_eq!(sum.values(), f.mass.values());
    }

    #[test]
    fn conjugation_symmetry_in_k() {
        let mesh = build_mesh(0).unwrap();
        let k = BlochVector::new(PI / 2.0, PI);
        let a = assemble_tm(&mesh, k).unwrap();
        let b = assemble_tm(&mesh, k.neg()).unwrap();
        for (x, y) in a.stiffness.values().iter().zip(b.stiffness.values()) {
            assert_eq!(*x, y.conj());
        }
    }

    #[test]
    fn k_zero_stiffness_annihilates_constants() {
        let mesh = build_mesh(0).unwrap();
        let f = assemble_tm(&mesh, BlochVector::default()).unwrap();
        let one = vec![C64::new(1.0, 0.0); mesh.dof_count()];
        let r = f.stiffness.apply(&one);
        assert!(r.iter().all(|v| v.norm() < 1e-12));
        assert!(f.stiffness.values().iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn te_with_unit_permittivity_equals_tm() {
        let mesh = build_mesh(0).unwrap();
        let k = BlochVector::new(0.3, 1.1);
        let tm = assemble_tm(&mesh, k).unwrap();
        let te = assemble_te(&mesh, k, 1.0, 1.0).unwrap();
        assert_eq!(tm.stiffness.values(), te.stiffness.values());
        assert_eq!(tm.mass.values(), te.mass.values());
        assert!(matches!(assemble_te(&mesh, k, 0.0, 1.0), Err(Error::InvalidPermittivity { .. })));
    }

    #[test]
    fn weighted_mass_of_constant_is_weighted_area() {
        let mesh = build_mesh(2).unwrap();
        let map = MaterialMap::default();
        let m = weighted_mass(&mesh, 1.0, 8.0).unwrap();
        let one = vec![C64::new(1.0, 0.0); mesh.dof_count()];
        let area2 = inclusion_area(&mesh, &map);
        let q = m.quad_form(&one).re;
        assert!((q - ((1.0 - area2) + 8.0 * area2)).abs() < 1e-12);
        let exact = 0.09 * PI;
        assert!((q - (1.0 - exact + 8.0 * exact)).abs() < 5e-3);
        let plain = weighted_mass(&mesh, 1.0, 1.0).unwrap().quad_form(&one).re;
        assert!((plain - 1.0).abs() < 1e-13);
    }

    #[test]
    fn shifted_stiffness_positive_definite() {
        let mesh = build_mesh(0).unwrap();
        for k in [BlochVector::default(), BlochVector::new(PI / 2.0, PI)] {
            let f = assemble_tm(&mesh, k).unwrap();
            for beta in [1e-6, 1.0] {
                let a = f.shifted_stiffness(beta, &f.mass).unwrap();
                assert!(factorize(&a).is_ok(), "beta={beta} k={k:?}");
            }
        }
    }

    #[test]
    fn inclusion_points_reproduce_mass2() {
        let mesh = build_mesh(0).unwrap();
        let map = MaterialMap::default();
        let f = assemble_tm(&mesh, BlochVector::default()).unwrap();
        let pts = inclusion_points(&mesh, &map);
        let mut t = Vec::new();
        for q in 0..pts.len() {
            for a in 0..9 {
                for b in 0..9 {
                    t.push((pts.dofs[q][a], pts.dofs[q][b], C64::new(pts.weights[q] * pts.phi[q][a] * pts.phi[q][b], 0.0)));
                }
            }
        }
        let m2 = HermitianSparse::from_triplets(mesh.dof_count(), mesh.dof_count(), &t, true).unwrap();
        for (i, j, v) in f.mass2.triplets() {
            assert!((m2.get(i, j) - v).norm() < 1e-15);
        }
    }
}
