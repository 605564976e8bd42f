//! Smallest eigenvalue along a path of wave vectors.

use super::config::RunConfig;
use super::output::SweepRow;
use crate::assembly::{assemble_tm, BlochVector};
use crate::dispersion::DispersionModel;
use crate::eigeniter::{arnoldi_restarted, Pencil};
use crate::error::{Error, Result};
use crate::linalg::vector::ones;
use crate::mesh::{build_mesh, PeriodicMesh};

/// Smallest eigenvalue `lambda_1(k)` of the constant-permittivity pencil.
pub fn smallest_eigenvalue(cfg: &RunConfig, mesh: &PeriodicMesh, k: BlochVector) -> Result<f64> {
    let eps2 = match cfg.model {
        DispersionModel::Constant { value } => value,
        _ => return Err(Error::WrongModel { expected: "constant" }),
    };
    let f = assemble_tm(mesh, k)?;
    let mw = f.weighted_mass(cfg.alpha1, eps2)?;
    let p = Pencil::shifted(&f.stiffness, &mw, &f.mass, cfg.shift()?)?;
    let (r, _) = arnoldi_restarted(&p, &ones(mesh.dof_count()), cfg.sweep.krylov_dim, cfg.tol, cfg.sweep.max_cycles)?;
    Ok(r.lambda)
}

/// Runs the configured solver at every point of `path`; failures are logged
/// and recorded as missing values while the sweep continues.
pub fn k_sweep(cfg: &RunConfig, path: &[BlochVector]) -> Result<Vec<SweepRow>> {
    if path.is_empty() {
        return Err(Error::Config("sweep path is empty".into()));
    }
    let mesh = build_mesh(cfg.sweep.level)?;
    Ok(path
        .iter()
        .map(|&k| {
            let lambda1 = match smallest_eigenvalue(cfg, &mesh, k) {
                Ok(l) => Some(l),
                Err(e) => {
                    log::warn!("sweep point ({}, {}) failed: {e}", k.kx, k.ky);
                    None
                }
            };
            SweepRow {
                kx: k.kx,
                ky: k.ky,
                lambda1,
            }
        })
        .collect())
}
