use faer::{Mat, Side};

use super::vector::C64;
use crate::error::{Error, Result};

/// All eigenpairs of the small dense Hermitian pencil `K z = mu M z` with
/// `M` positive definite, eigenvalues ascending, eigenvectors `M`-orthonormal.
///
/// `M` is whitened through its own eigendecomposition, which tolerates the
/// nearly-identity Gram matrices produced by orthonormalized bases.
pub fn hermitian_pencil_eigen(k: &Mat<C64>, m: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let n = k.nrows();
    if k.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.nrows(),
        });
    }
    let mh = hermitian_part(m);
    let em = mh.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Singular)?;
    let d = em.S();
    let dmax = (0..n).map(|i| d[i].re).fold(0.0, f64::max);
    let mut w = Mat::<C64>::zeros(n, n);
    for j in 0..n {
        let dj = d[j].re;
        if !(dj > 1e-14 * dmax) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let s = 1.0 / dj.sqrt();
        for i in 0..n {
            w[(i, j)] = em.U()[(i, j)] * s;
        }
    }
    let c = hermitian_part(&(w.adjoint() * hermitian_part(k) * &w));
    let ec = c.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Singular)?;
    let values = (0..n).map(|i| ec.S()[i].re).collect();
    let vectors = &w * ec.U();
    Ok((values, vectors))
}

fn hermitian_part(a: &Mat<C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pencil() {
        let k = Mat::from_fn(2, 2, |i, j| if i == j { C64::new([6.0, 2.0][i], 0.0) } else { C64::default() });
        let m = Mat::from_fn(2, 2, |i, j| if i == j { C64::new([2.0, 1.0][i], 0.0) } else { C64::default() });
        let (vals, vecs) = hermitian_pencil_eigen(&k, &m).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        assert!((vecs[(1, 0)].norm() - 1.0).abs() < 1e-14);
    }
}
