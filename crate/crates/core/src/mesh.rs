//! Uniform periodic quadrilateral meshes of the unit cell `(0,1)^2` with
//! tensor-product degree-2 (Q2) degrees of freedom.
//!
//! Q2 nodes sit on a `(2n+1) x (2n+1)` lattice of spacing `h/2`, where `n` is
//! the number of cells per side. Nodes on the right / top boundary are
//! identified with their partners on the left / bottom boundary, so the
//! independent DOFs form a `2n x 2n` periodic lattice.

use crate::error::{Error, Result};
use crate::linalg::C64;

pub const BASE_RESOLUTION: usize = 8;
pub const MAX_LEVEL: u32 = 10;

pub const DISK_CENTER: [f64; 2] = [0.5, 0.5];
pub const DISK_RADIUS: f64 = 0.3;

/// Relative slack of the interface tie rule.
pub const TIE_TOL: f64 = 1e-12;

/// Subdomain tag: `Background` is the host material, `Inclusion` the disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Material {
    Background,
    Inclusion,
}

/// Disk inclusion of the unit cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialMap {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Default for MaterialMap {
    fn default() -> Self {
        MaterialMap {
            center: DISK_CENTER,
            radius: DISK_RADIUS,
        }
    }
}

impl MaterialMap {
    /// Points at distance `<= radius` belong to the inclusion. The comparison
    /// carries a relative slack of [`TIE_TOL`] so that points exactly on the
    /// circle in decimal (e.g. `(0.5, 0.8)`) survive rounding.
    pub fn classify(&self, x: [f64; 2]) -> Material {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        if dx * dx + dy * dy <= self.radius * self.radius * (1.0 + TIE_TOL) {
            Material::Inclusion
        } else {
            Material::Background
        }
    }

    pub fn exact_inclusion_area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }
}

/// Classifies against the default disk of radius 0.3 at the cell center.
pub fn classify_point(x: [f64; 2]) -> Material {
    MaterialMap::default().classify(x)
}

/// 1D quadratic Lagrange basis on `[0, 1]` with nodes `0, 1/2, 1`.
pub fn lagrange2(t: f64) -> [f64; 3] {
    [(1.0 - t) * (1.0 - 2.0 * t), 4.0 * t * (1.0 - t), t * (2.0 * t - 1.0)]
}

pub fn lagrange2_deriv(t: f64) -> [f64; 3] {
    [4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0]
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicMesh {
    level: u32,
    cells_per_side: usize,
    /// Geometric Q2 node coordinates, row-major over the `(2n+1)^2` lattice.
    nodes: Vec<[f64; 2]>,
    /// Corner node indices, counter-clockwise from the lower-left corner.
    cells: Vec<[usize; 4]>,
    /// Geometric node -> independent DOF.
    periodic_map: Vec<usize>,
    dof_count: usize,
}

impl PeriodicMesh {
    pub fn build(level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::LevelOutOfRange {
                level,
                max: MAX_LEVEL,
            });
        }
        let n = BASE_RESOLUTION << level;
        let side = 2 * n + 1;
        let h2 = 0.5 / n as f64;
        let mut nodes = Vec::with_capacity(side * side);
        let mut periodic_map = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                nodes.push([i as f64 * h2, j as f64 * h2]);
                periodic_map.push((i % (2 * n)) + 2 * n * (j % (2 * n)));
            }
        }
        let node = |i: usize, j: usize| i + side * j;
        let mut cells = Vec::with_capacity(n * n);
        for cj in 0..n {
            for ci in 0..n {
                let (i, j) = (2 * ci, 2 * cj);
                cells.push([node(i, j), node(i + 2, j), node(i + 2, j + 2), node(i, j + 2)]);
            }
        }
        Ok(PeriodicMesh {
            level,
            cells_per_side: n,
            nodes,
            cells,
            periodic_map,
            dof_count: 4 * n * n,
        })
    }

    /// Splits every cell into four.
    pub fn refine(&self) -> Result<Self> {
        Self::build(self.level + 1)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn cell_size(&self) -> f64 {
        1.0 / self.cells_per_side as f64
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn periodic_map(&self) -> &[usize] {
        &self.periodic_map
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    /// Geometric nodes merged into a partner by the periodic identification.
    pub fn identified_count(&self) -> usize {
        self.nodes.len() - self.dof_count
    }

    fn lattice(&self) -> usize {
        2 * self.cells_per_side
    }

    /// Lower-left corner of cell `c`.
    pub fn cell_origin(&self, c: usize) -> [f64; 2] {
        self.nodes[self.cells[c][0]]
    }

    /// Q2 DOFs of cell `c`, local index `a + 3 b` for the node at
    /// `(a/2, b/2)` in cell-local coordinates.
    pub fn cell_dofs(&self, c: usize) -> [usize; 9] {
        let m = self.lattice();
        let (ci, cj) = (c % self.cells_per_side, c / self.cells_per_side);
        let mut dofs = [0usize; 9];
        for b in 0..3 {
            for a in 0..3 {
                let i = (2 * ci + a) % m;
                let j = (2 * cj + b) % m;
                dofs[a + 3 * b] = i + m * j;
            }
        }
        dofs
    }

    /// Coordinates of the canonical (left/bottom) node of a DOF.
    pub fn dof_point(&self, dof: usize) -> [f64; 2] {
        let m = self.lattice();
        let h2 = 0.5 / self.cells_per_side as f64;
        [(dof % m) as f64 * h2, (dof / m) as f64 * h2]
    }

    /// Cell containing `x` together with local coordinates in `[0,1]^2`.
    /// Points on the upper boundary are attributed to the last cell.
    pub fn locate(&self, x: [f64; 2]) -> (usize, [f64; 2]) {
        let n = self.cells_per_side;
        let mut loc = [0.0; 2];
        let mut idx = [0usize; 2];
        for d in 0..2 {
            let s = x[d].clamp(0.0, 1.0) * n as f64;
            let c = (s.floor() as usize).min(n - 1);
            idx[d] = c;
            loc[d] = s - c as f64;
        }
        (idx[0] + n * idx[1], loc)
    }

    /// Point value of the FE function with DOF coefficients `coeffs`.
    pub fn evaluate(&self, coeffs: &[C64], x: [f64; 2]) -> Result<C64> {
        if coeffs.len() != self.dof_count {
            return Err(Error::DimensionMismatch {
                expected: self.dof_count,
                got: coeffs.len(),
            });
        }
        let (c, t) = self.locate(x);
        let dofs = self.cell_dofs(c);
        let lx = lagrange2(t[0]);
        let ly = lagrange2(t[1]);
        let mut v = C64::default();
        for b in 0..3 {
            for a in 0..3 {
                v += coeffs[dofs[a + 3 * b]] * (lx[a] * ly[b]);
            }
        }
        Ok(v)
    }
}

/// Convenience wrapper for [`PeriodicMesh::build`].
pub fn build_mesh(level: u32) -> Result<PeriodicMesh> {
    PeriodicMesh::build(level)
}

/// Interpolates a coarse FE function onto its uniform refinement. The Q2
/// spaces are nested, so this is an exact embedding.
pub fn prolongate(coeffs: &[C64], coarse: &PeriodicMesh, fine: &PeriodicMesh) -> Result<Vec<C64>> {
    if fine.level() != coarse.level() + 1 {
        return Err(Error::Config(format!(
            "prolongation needs consecutive levels, got {} -> {}",
            coarse.level(),
            fine.level()
        )));
    }
    if coeffs.len() != coarse.dof_count() {
        return Err(Error::DimensionMismatch {
            expected: coarse.dof_count(),
            got: coeffs.len(),
        });
    }
    (0..fine.dof_count())
        .map(|d| coarse.evaluate(coeffs, fine.dof_point(d)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_and_refined_cell_counts() {
        let m0 = build_mesh(0).unwrap();
        assert_eq!(m0.cell_count(), 64);
        assert_eq!(m0.cells_per_side(), 8);
        assert_eq!(build_mesh(2).unwrap().cell_count(), 1024);
        assert_eq!(m0.refine().unwrap().cell_count(), 4 * 64);
    }

    #[test]
    fn level_guard() {
        assert!(matches!(build_mesh(11), Err(Error::LevelOutOfRange { .. })));
    }

    #[test]
    fn q2_dof_count_by_enumeration() {
        // Enumerate every Q2 node of every cell on the 16x16 grid and merge
        // periodic copies by coordinate modulo 1.
        let m = build_mesh(1).unwrap();
        let n = 16;
        let mut seen = std::collections::HashSet::new();
        for cj in 0..n {
            for ci in 0..n {
                for b in 0..3 {
                    for a in 0..3 {
                        let i = (2 * ci + a) % (2 * n);
                        let j = (2 * cj + b) % (2 * n);
                        seen.insert((i, j));
                    }
                }
            }
        }
        assert_eq!(seen.len(), 1024);
        assert_eq!(m.dof_count(), 1024);
        assert_eq!(m.dof_count(), m.nodes().len() - m.identified_count());
    }

    #[test]
    fn corners_collapse_and_edges_pair() {
        let m = build_mesh(0).unwrap();
        let side = 2 * m.cells_per_side() + 1;
        let map = m.periodic_map();
        let corners = [0, side - 1, side * (side - 1), side * side - 1];
        assert!(corners.iter().all(|&c| map[c] == map[0]));
        for j in 0..side {
            assert_eq!(map[j * side], map[j * side + side - 1]);
        }
        for i in 0..side {
            assert_eq!(map[i], map[(side - 1) * side + i]);
        }
    }

    #[test]
    fn cells_are_axis_aligned_squares() {
        let m = build_mesh(1).unwrap();
        let h = m.cell_size();
        for cell in m.cells() {
            let p: Vec<_> = cell.iter().map(|&k| m.nodes()[k]).collect();
            assert!((p[1][0] - p[0][0] - h).abs() < 1e-15 && p[1][1] == p[0][1]);
            assert!((p[2][1] - p[1][1] - h).abs() < 1e-15 && p[2][0] == p[1][0]);
            assert!((p[3][0] - p[0][0]).abs() < 1e-15);
        }
    }

    #[test]
    fn refinement_is_nested() {
        let coarse = build_mesh(0).unwrap();
        let fine = coarse.refine().unwrap();
        assert_eq!(fine, build_mesh(1).unwrap());
        for p in coarse.nodes() {
            assert!(fine.nodes().iter().any(|q| q == p));
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_point([0.5, 0.5]), Material::Inclusion);
        assert_eq!(classify_point([0.0, 0.0]), Material::Background);
        assert_eq!(classify_point([0.5, 0.8]), Material::Inclusion);
        assert_eq!(classify_point([0.5, 0.8000001]), Material::Background);
    }

    #[test]
    fn prolongate_constants_and_zero() {
        let c = build_mesh(0).unwrap();
        let f = c.refine().unwrap();
        let one = vec![C64::new(1.0, 0.0); c.dof_count()];
        assert!(prolongate(&one, &c, &f).unwrap().iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-15));
        let zero = vec![C64::default(); c.dof_count()];
        assert!(prolongate(&zero, &c, &f).unwrap().iter().all(|v| *v == C64::default()));
        assert!(matches!(
            prolongate(&one[1..], &c, &f),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn periodic_evaluation_matches_across_boundary() {
        let m = build_mesh(0).unwrap();
        let u: Vec<C64> = (0..m.dof_count()).map(|k| C64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        for s in [0.0, 0.13, 0.5, 0.77] {
            let l = m.evaluate(&u, [0.0, s]).unwrap();
            let r = m.evaluate(&u, [1.0, s]).unwrap();
            assert!((l - r).norm() < 1e-14);
            let b = m.evaluate(&u, [s, 0.0]).unwrap();
            let t = m.evaluate(&u, [s, 1.0]).unwrap();
            assert!((b - t).norm() < 1e-14);
        }
    }

    #[test]
    fn lagrange_partition_of_unity() {
        for t in [0.0, 0.2, 0.5, 0.9] {
            let l = lagrange2(t);
            let d = lagrange2_deriv(t);
            assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!(d.iter().sum::<f64>().abs() < 1e-14);
        }
    }
}
