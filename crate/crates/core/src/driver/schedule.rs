//! Steps-per-mesh schedules: iterate a fixed number of steps on each level,
//! refine, carry the iterate over, and finish on the finest level.

use std::time::Instant;

use super::config::{Experiment, RunConfig};
use crate::assembly::{assemble_tm, BlochVector};
use crate::companion::{build_companion, companion_pencil, CompanionSystem};
use crate::dispersion::DispersionModel;
use crate::eigeniter::{arnoldi_restarted, InversePower, IterationTrace, Pencil, Scaling, StepResult, TraceRow};
use crate::error::{Error, Result};
use crate::linalg::vector::ones;
use crate::linalg::{DualNorm, C64};
use crate::mesh::{build_mesh, prolongate, PeriodicMesh};
use crate::newton::{newton_residual, newton_step, random_normalization, warm_start_with, NewtonState, NonlinearPencil};

/// State carried across a refinement: the `V`-part of the iterate and the
/// current eigenvalue estimate.
#[derive(Debug, Clone)]
pub struct Carry {
    pub u: Vec<C64>,
    pub lambda: f64,
}

/// A solver that can be (re)built on a mesh and stepped.
pub trait LevelSolver {
    /// Builds all matrices on `mesh`; `carry` is the prolongated iterate from
    /// the previous level, `None` for a cold start.
    fn setup(&mut self, mesh: &PeriodicMesh, carry: Option<Carry>) -> Result<()>;
    fn step(&mut self) -> Result<StepResult>;
    fn carry(&self) -> Carry;
    /// Dimension of the current discrete problem.
    fn dim(&self) -> usize;
}

/// Inverse iteration with Rayleigh scaling on
/// `(K + beta M_w, M_w)`, `M_w = alpha1 M1 + eps2 M2`.
pub struct LinearSolver {
    pub k: BlochVector,
    pub alpha1: f64,
    pub eps2: f64,
    pub beta: f64,
    state: Option<(Pencil, InversePower)>,
}

impl LinearSolver {
    pub fn new(k: BlochVector, alpha1: f64, eps2: f64, beta: f64) -> Self {
        LinearSolver {
            k,
            alpha1,
            eps2,
            beta,
            state: None,
        }
    }

    pub fn pencil(&self) -> Option<&Pencil> {
        self.state.as_ref().map(|s| &s.0)
    }
}

impl LevelSolver for LinearSolver {
    fn setup(&mut self, mesh: &PeriodicMesh, carry: Option<Carry>) -> Result<()> {
        let f = assemble_tm(mesh, self.k)?;
        let mw = f.weighted_mass(self.alpha1, self.eps2)?;
        let p = Pencil::shifted(&f.stiffness, &mw, &f.mass, self.beta)?;
        let u = carry.map(|c| c.u).unwrap_or_else(|| ones(mesh.dof_count()));
        let it = InversePower::new(&p, u, Scaling::Rayleigh)?;
        self.state = Some((p, it));
        Ok(())
    }

    fn step(&mut self) -> Result<StepResult> {
        let (p, it) = self.state.as_mut().expect("setup before step");
        it.step(p)
    }

    fn carry(&self) -> Carry {
        let (p, it) = self.state.as_ref().expect("setup before carry");
        Carry {
            u: it.vector().to_vec(),
            lambda: it.mu() - p.beta,
        }
    }

    fn dim(&self) -> usize {
        self.state.as_ref().map_or(0, |s| s.0.dim())
    }
}

/// Inverse iteration on the companion system of a lossless Lorentz model. On
/// refinement the auxiliary fields are rebuilt from the defining relation.
pub struct CompanionSolver {
    pub k: BlochVector,
    pub model: DispersionModel,
    pub alpha1: f64,
    pub beta: f64,
    state: Option<(CompanionSystem, Pencil, InversePower)>,
}

impl CompanionSolver {
    pub fn new(k: BlochVector, model: DispersionModel, alpha1: f64, beta: f64) -> Self {
        CompanionSolver {
            k,
            model,
            alpha1,
            beta,
            state: None,
        }
    }

    pub fn system(&self) -> Option<&CompanionSystem> {
        self.state.as_ref().map(|s| &s.0)
    }

    /// Full extended iterate.
    pub fn vector(&self) -> Option<&[C64]> {
        self.state.as_ref().map(|s| s.2.vector())
    }
}

impl LevelSolver for CompanionSolver {
    fn setup(&mut self, mesh: &PeriodicMesh, carry: Option<Carry>) -> Result<()> {
        let cs = build_companion(mesh, self.k, &self.model, self.alpha1, self.beta)?;
        let p = companion_pencil(&cs)?;
        let z = match carry {
            None => cs.default_start(),
            Some(c) => {
                let mut z = c.u.clone();
                for x in cs.auxiliary_from(&c.u, c.lambda)? {
                    z.extend(x);
                }
                z
            }
        };
        let it = InversePower::new(&p, z, Scaling::Rayleigh)?;
        self.state = Some((cs, p, it));
        Ok(())
    }

    fn step(&mut self) -> Result<StepResult> {
        let (_, p, it) = self.state.as_mut().expect("setup before step");
        it.step(p)
    }

    fn carry(&self) -> Carry {
        let (cs, p, it) = self.state.as_ref().expect("setup before carry");
        Carry {
            u: it.vector()[..cs.n_v].to_vec(),
            lambda: it.mu() - p.beta,
        }
    }

    fn dim(&self) -> usize {
        self.state.as_ref().map_or(0, |s| s.0.dim())
    }
}

/// Bordered Newton iteration; a cold start runs the constant-permittivity
/// warm start on the current mesh.
pub struct NewtonSolver {
    pub k: BlochVector,
    pub model: DispersionModel,
    pub alpha1: f64,
    pub seed: u64,
    pub warm_eps2: f64,
    pub warm_steps: usize,
    state: Option<(NonlinearPencil, DualNorm, NewtonState)>,
}

impl NewtonSolver {
    pub fn new(k: BlochVector, model: DispersionModel, alpha1: f64, seed: u64, warm_eps2: f64, warm_steps: usize) -> Self {
        NewtonSolver {
            k,
            model,
            alpha1,
            seed,
            warm_eps2,
            warm_steps,
            state: None,
        }
    }

    pub fn state(&self) -> Option<&NewtonState> {
        self.state.as_ref().map(|s| &s.2)
    }
}

impl LevelSolver for NewtonSolver {
    fn setup(&mut self, mesh: &PeriodicMesh, carry: Option<Carry>) -> Result<()> {
        let f = assemble_tm(mesh, self.k)?;
        let (u, lambda) = match carry {
            Some(c) => (c.u, c.lambda),
            None => warm_start_with(&f, self.warm_eps2, self.warm_steps)?,
        };
        let p = NonlinearPencil::new(&f, self.model.clone(), self.alpha1);
        let dual = DualNorm::new(&f.stiffness, &f.mass)?;
        let y = random_normalization(mesh.dof_count(), self.seed);
        let state = NewtonState::new(u, lambda, y, &f.mass)?;
        self.state = Some((p, dual, state));
        Ok(())
    }

    fn step(&mut self) -> Result<StepResult> {
        let (p, dual, state) = self.state.as_mut().expect("setup before step");
        newton_step(p, state)?;
        let residual = newton_residual(p, dual, &state.u, state.lambda)?;
        Ok(StepResult {
            mu: state.lambda,
            lambda: state.lambda,
            residual,
        })
    }

    fn carry(&self) -> Carry {
        let (_, _, s) = self.state.as_ref().expect("setup before carry");
        Carry {
            u: s.u.clone(),
            lambda: s.lambda,
        }
    }

    fn dim(&self) -> usize {
        self.state.as_ref().map_or(0, |s| s.0.dim())
    }
}

/// Solver for the configured experiment.
pub fn make_solver(cfg: &RunConfig) -> Result<Box<dyn LevelSolver>> {
    let k = cfg.bloch();
    let beta = cfg.shift()?;
    Ok(match cfg.experiment {
        Experiment::Linear | Experiment::KSweep => match cfg.model {
            DispersionModel::Constant { value } => Box::new(LinearSolver::new(k, cfg.alpha1, value, beta)),
            _ => return Err(Error::WrongModel { expected: "constant" }),
        },
        Experiment::HomogeneousCheck => Box::new(LinearSolver::new(k, 1.0, 1.0, beta)),
        Experiment::DlLinearized => Box::new(CompanionSolver::new(k, cfg.model.clone(), cfg.alpha1, beta)),
        Experiment::Newton => Box::new(NewtonSolver::new(
            k,
            cfg.model.clone(),
            cfg.alpha1,
            cfg.seed,
            cfg.newton.warm_eps2,
            cfg.newton.warm_steps,
        )),
    })
}

/// Trace of a schedule together with the final iterate.
#[derive(Debug)]
pub struct RunOutcome {
    pub trace: IterationTrace,
    pub carry: Option<Carry>,
    pub final_level: u32,
    /// The finest level was reached with residual at most `tol`.
    pub converged: bool,
    /// Error that ended the run early.
    pub error: Option<Error>,
}

/// Runs the configured steps-per-mesh schedule.
///
/// Starts on level 0 (or directly on `max_level` for fine-only runs), refines
/// after every `steps_per_mesh` steps and prolongates the iterate, and on the
/// finest level continues until the residual is at most `tol` or the step
/// budget is spent. Assembly and factorization after a refinement are timed
/// as part of the following step. Errors end the run and are recorded in the
/// trace.
pub fn run_schedule(cfg: &RunConfig) -> Result<RunOutcome> {
    let mut solver = make_solver(cfg)?;
    run_schedule_with(cfg, solver.as_mut())
}

pub fn run_schedule_with(cfg: &RunConfig, solver: &mut dyn LevelSolver) -> Result<RunOutcome> {
    cfg.validate()?;
    let sched = &cfg.schedule;
    let fine = sched.max_level;
    let mut level = if sched.fine_only { fine } else { 0 };
    let mut trace = IterationTrace::default();
    let mut mesh: Option<PeriodicMesh> = None;
    let mut on_level = 0usize;
    let mut error = None;
    let mut converged = false;
    for j in 1..=sched.max_steps {
        let t = Instant::now();
        let res = (|| -> Result<StepResult> {
            match &mesh {
                None => {
                    let m = build_mesh(level)?;
                    solver.setup(&m, None)?;
                    mesh = Some(m);
                }
                Some(m) if on_level >= sched.steps_per_mesh && level < fine => {
                    let fine_mesh = m.refine()?;
                    let c = solver.carry();
                    let u = prolongate(&c.u, m, &fine_mesh)?;
                    solver.setup(&fine_mesh, Some(Carry { u, lambda: c.lambda }))?;
                    level += 1;
                    on_level = 0;
                    mesh = Some(fine_mesh);
                }
                _ => {}
            }
            solver.step()
        })();
        let s = match res {
            Ok(s) => s,
            Err(e) => {
                log::warn!("run stopped at step {j}: {e}");
                trace.failure = Some(e.to_string());
                error = Some(e);
                break;
            }
        };
        on_level += 1;
        trace.rows.push(TraceRow {
            j,
            mesh_level: level,
            dofs: solver.dim(),
            mu: s.mu,
            lambda: s.lambda,
            rel_err: None,
            residual_dual: s.residual,
            wall_seconds: t.elapsed().as_secs_f64(),
        });
        log::debug!("step {j} level {level} mu {:.16e} residual {:.3e}", s.mu, s.residual);
        if level == fine && s.residual <= cfg.tol {
            converged = true;
            break;
        }
    }
    let carry = mesh.as_ref().filter(|_| solver.dim() > 0).map(|_| solver.carry());
    Ok(RunOutcome {
        trace,
        carry,
        final_level: level,
        converged,
        error,
    })
}

/// Eigenvalue estimate on a mesh finer than the schedule ever reaches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSolution {
    pub mu_ref: f64,
    pub lambda_ref: f64,
    pub level: u32,
    pub residual: f64,
    pub steps: usize,
}

/// Computes the reference on `reference_level`, iterating until the residual
/// is at most the reference tolerance or stops improving.
///
/// Hermitian pencils use restarted Krylov projections (the fastest way to a
/// tight residual); Newton runs switch to the finer mesh directly.
pub fn compute_reference(cfg: &RunConfig) -> Result<ReferenceSolution> {
    let level = cfg.reference_level();
    let mesh = build_mesh(level)?;
    let rc = &cfg.reference;
    match cfg.experiment {
        Experiment::Newton => {
            let mut solver = make_solver(cfg)?;
            solver.setup(&mesh, None)?;
            let mut best = f64::INFINITY;
            let mut last = None;
            let mut stalled = 0;
            for steps in 1..=rc.max_steps {
                let s = solver.step()?;
                last = Some((s, steps));
                if s.residual <= rc.tol {
                    break;
                }
                if s.residual < 0.5 * best {
                    best = s.residual;
                    stalled = 0;
                } else {
                    stalled += 1;
                    if stalled >= 3 {
                        break;
                    }
                }
            }
            let (s, steps) = last.ok_or(Error::NotConverged {
                steps: 0,
                residual: f64::NAN,
            })?;
            Ok(ReferenceSolution {
                mu_ref: s.mu,
                lambda_ref: s.lambda,
                level,
                residual: s.residual,
                steps,
            })
        }
        _ => {
            let (p, z0) = reference_pencil(cfg, &mesh)?;
            krylov_reference(&p, &z0, rc.tol, rc.max_steps, level)
        }
    }
}

fn reference_pencil(cfg: &RunConfig, mesh: &PeriodicMesh) -> Result<(Pencil, Vec<C64>)> {
    let k = cfg.bloch();
    let beta = cfg.shift()?;
    match cfg.experiment {
        Experiment::DlLinearized => {
            let cs = build_companion(mesh, k, &cfg.model, cfg.alpha1, beta)?;
            Ok((companion_pencil(&cs)?, cs.default_start()))
        }
        _ => {
            let (alpha1, eps2) = match (cfg.experiment, &cfg.model) {
                (Experiment::HomogeneousCheck, _) => (1.0, 1.0),
                (_, DispersionModel::Constant { value }) => (cfg.alpha1, *value),
                _ => return Err(Error::WrongModel { expected: "constant" }),
            };
            let f = assemble_tm(mesh, k)?;
            let mw = f.weighted_mass(alpha1, eps2)?;
            Ok((Pencil::shifted(&f.stiffness, &mw, &f.mass, beta)?, ones(mesh.dof_count())))
        }
    }
}

/// Krylov dimension of each reference projection.
const REFERENCE_KRYLOV_DIM: usize = 20;

/// Restarted projections until `tol`, stopping early once a full cycle no
/// longer halves the residual.
fn krylov_reference(p: &Pencil, z0: &[C64], tol: f64, max_solves: usize, level: u32) -> Result<ReferenceSolution> {
    let cycles = (max_solves / REFERENCE_KRYLOV_DIM).max(1);
    let mut start = z0.to_vec();
    let mut best: Option<(f64, f64)> = None;
    let mut steps = 0;
    for _ in 0..cycles {
        let (r, tr) = match arnoldi_restarted(p, &start, REFERENCE_KRYLOV_DIM, tol, 1) {
            Ok(x) => x,
            Err(Error::NotConverged { .. }) => {
                let r = crate::eigeniter::arnoldi(p, &start, REFERENCE_KRYLOV_DIM)?;
                let res = p.residual(&r.vector, r.mu)?;
                let mut tr = IterationTrace::default();
                tr.rows.push(TraceRow {
                    j: 1,
                    mesh_level: level,
                    dofs: p.dim(),
                    mu: r.mu,
                    lambda: r.lambda,
                    rel_err: None,
                    residual_dual: res,
                    wall_seconds: 0.0,
                });
                (r, tr)
            }
            Err(e) => return Err(e),
        };
        steps += r.basis.len();
        let res = tr.last().map(|x| x.residual_dual).unwrap_or(f64::NAN);
        let improved = best.is_none_or(|(_, b)| res < 0.5 * b);
        if best.is_none_or(|(_, b)| res < b) {
            best = Some((r.mu, res));
        }
        if res <= tol || !improved {
            break;
        }
        start = r.vector;
    }
    let (mu, residual) = best.expect("at least one cycle");
    Ok(ReferenceSolution {
        mu_ref: mu,
        lambda_ref: mu - p.beta,
        level,
        residual,
        steps,
    })
}
