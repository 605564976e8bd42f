//! CSV persistence of traces and sweeps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::eigeniter::IterationTrace;
use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "j,mesh_level,dofs,mu,lambda,rel_err,residual_dual,wall_seconds";
pub const SWEEP_HEADER: &str = "kx,ky,lambda1";

/// Full double precision: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), num)
}

pub fn write_trace<W: Write>(mut w: W, trace: &IterationTrace) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in &trace.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.j,
            r.mesh_level,
            r.dofs,
            num(r.mu),
            num(r.lambda),
            opt(r.rel_err),
            num(r.residual_dual),
            num(r.wall_seconds)
        )?;
    }
    Ok(())
}

fn to_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Writes `trace` as CSV with header [`TRACE_HEADER`].
pub fn emit_csv(trace: &IterationTrace, path: &Path) -> Result<()> {
    to_file(path, |w| write_trace(w, trace))
}

/// One sweep point; `lambda1` is `None` when the solve failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub kx: f64,
    pub ky: f64,
    pub lambda1: Option<f64>,
}

pub fn write_sweep<W: Write>(mut w: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{}", num(r.kx), num(r.ky), opt(r.lambda1))?;
    }
    Ok(())
}

pub fn emit_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    to_file(path, |w| write_sweep(w, rows))
}
