//! Schedule, determinism and persistence behavior of the driver.

use std::f64::consts::PI;

use photonic_eig::assembly::BlochVector;
use photonic_eig::dispersion::DispersionModel;
use photonic_eig::driver::{
    compute_reference, emit_csv, free_space_band, k_sweep, run_schedule, smallest_eigenvalue, Experiment, RunConfig,
    TRACE_HEADER,
};
use photonic_eig::mesh::build_mesh;

fn linear(s: usize, max_level: u32, max_steps: usize) -> RunConfig {
    let mut cfg = RunConfig::new(Experiment::Linear);
    cfg.model = DispersionModel::constant(8.0);
    cfg.schedule.steps_per_mesh = s;
    cfg.schedule.max_level = max_level;
    cfg.schedule.max_steps = max_steps;
    cfg.tol = 1e-300;
    cfg
}

#[test]
fn levels_advance_every_s_steps() {
    let out = run_schedule(&linear(3, 2, 14)).unwrap();
    let levels: Vec<u32> = out.trace.rows.iter().map(|r| r.mesh_level).collect();
    assert_eq!(levels, [0, 0, 0, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2]);
    let dofs: Vec<usize> = out.trace.rows.iter().map(|r| r.dofs).collect();
    assert_eq!((dofs[0], dofs[3], dofs[6]), (256, 1024, 4096));
    assert!(out.trace.rows.iter().enumerate().all(|(i, r)| r.j == i + 1));
}

#[test]
fn refinement_jumps_shrink_and_levels_decline_monotonically() {
    // The disk is resolved by quadrature, so the material forms change with
    // the level and a refinement may move mu either way; the jumps shrink.
    let out = run_schedule(&linear(3, 3, 12)).unwrap();
    assert!(out.trace.max_mu_increase() <= 1e-12);
    let r = &out.trace.rows;
    let jump = |i: usize| (r[i].mu - r[i - 1].mu).abs();
    assert!(jump(9) < jump(6) && jump(6) < jump(3));
}

#[test]
fn oversized_s_stays_on_the_coarsest_level() {
    let out = run_schedule(&linear(50, 3, 10)).unwrap();
    assert!(out.trace.rows.iter().all(|r| r.mesh_level == 0));
    assert!(!out.converged);
}

#[test]
fn fine_only_runs_on_one_level() {
    let mut cfg = linear(3, 2, 6);
    cfg.schedule.fine_only = true;
    let out = run_schedule(&cfg).unwrap();
    assert!(out.trace.rows.iter().all(|r| r.mesh_level == 2 && r.dofs == 4096));
}

#[test]
fn stops_at_tolerance_on_the_finest_level() {
    let mut cfg = linear(2, 1, 100);
    cfg.tol = 1e-9;
    let out = run_schedule(&cfg).unwrap();
    assert!(out.converged);
    let last = out.trace.last().unwrap();
    assert_eq!(last.mesh_level, 1);
    assert!(last.residual_dual <= 1e-9);
    assert!(out.trace.rows[..out.trace.len() - 1].iter().all(|r| r.mesh_level < 1 || r.residual_dual > 1e-9));
}

#[test]
fn identical_configs_give_bit_identical_traces() {
    for exp in [Experiment::Linear, Experiment::Newton] {
        let mut cfg = linear(2, 1, 6);
        cfg.experiment = exp;
        if exp == Experiment::Newton {
            cfg.model = photonic_eig::dispersion::porous_silicon();
            cfg.seed = 17;
        }
        let a = run_schedule(&cfg).unwrap().trace;
        let b = run_schedule(&cfg).unwrap().trace;
        let key = |t: &photonic_eig::eigeniter::IterationTrace| -> Vec<(u64, u64, u64)> {
            t.rows.iter().map(|r| (r.mu.to_bits(), r.lambda.to_bits(), r.residual_dual.to_bits())).collect()
        };
        assert_eq!(key(&a), key(&b));
    }
}

#[test]
fn reference_is_an_upper_bound_that_decreases_with_level_without_inclusion() {
    let mut cfg = RunConfig::new(Experiment::HomogeneousCheck);
    cfg.k = [0.6, 1.3];
    let exact = free_space_band(cfg.bloch());
    let mut prev = f64::INFINITY;
    for level in 0..=2 {
        cfg.reference.level = Some(level);
        let r = compute_reference(&cfg).unwrap();
        assert!(r.lambda_ref >= exact * (1.0 - 1e-12));
        assert!(r.lambda_ref < exact * (1.0 + 1e-6));
        assert!(r.mu_ref <= prev * (1.0 + 1e-12));
        prev = r.mu_ref;
    }
    // With an inclusion the levels are not nested in the material, but the
    // reference values still converge.
    let mut lin = linear(3, 1, 1);
    let refs: Vec<f64> = (1..=3)
        .map(|level| {
            lin.reference.level = Some(level);
            compute_reference(&lin).unwrap().mu_ref
        })
        .collect();
    assert!((refs[2] - refs[1]).abs() < (refs[1] - refs[0]).abs());
}

#[test]
fn csv_has_one_row_per_step_and_round_trips() {
    let out = run_schedule(&linear(2, 1, 5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    emit_csv(&out.trace, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], TRACE_HEADER);
    assert_eq!(lines.len(), out.trace.len() + 1);
    for (line, row) in lines[1..].iter().zip(&out.trace.rows) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[3].parse::<f64>().unwrap().to_bits(), row.mu.to_bits());
        assert_eq!(f[4].parse::<f64>().unwrap().to_bits(), row.lambda.to_bits());
    }
}

#[test]
fn homogeneous_sweep_follows_the_free_space_band() {
    let mut cfg = RunConfig::new(Experiment::KSweep);
    cfg.sweep.level = 1;
    cfg.sweep.points_per_segment = 5;
    let path = cfg.sweep_points().unwrap();
    let rows = k_sweep(&cfg, &path).unwrap();
    assert_eq!(rows.len(), path.len());
    for r in &rows {
        let k2 = r.kx * r.kx + r.ky * r.ky;
        let l = r.lambda1.unwrap();
        assert!((l - k2).abs() <= 1e-8 * k2.max(1.0), "k=({}, {}): {l} vs {k2}", r.kx, r.ky);
    }
}

#[test]
fn sweep_points_agree_with_direct_runs_and_conjugate_wave_vectors() {
    let mut cfg = RunConfig::new(Experiment::KSweep);
    cfg.model = DispersionModel::constant(8.0);
    cfg.sweep.level = 1;
    let k = BlochVector::new(PI / 2.0, PI);
    let rows = k_sweep(&cfg, &[k, k.neg()]).unwrap();
    let direct = smallest_eigenvalue(&cfg, &build_mesh(1).unwrap(), k).unwrap();
    assert_eq!(rows[0].lambda1.unwrap(), direct);
    let (a, b) = (rows[0].lambda1.unwrap(), rows[1].lambda1.unwrap());
    assert!((a - b).abs() <= 1e-10 * a);
}

#[test]
fn failed_sweep_points_are_recorded_and_the_sweep_continues() {
    let mut cfg = RunConfig::new(Experiment::KSweep);
    cfg.sweep.level = 0;
    cfg.sweep.max_cycles = 1;
    cfg.sweep.krylov_dim = 1;
    cfg.tol = 1e-300;
    let rows = k_sweep(&cfg, &[BlochVector::new(0.3, 0.2), BlochVector::new(1.0, 2.0)]).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.lambda1.is_none() || r.lambda1.unwrap().is_finite()));
}

#[test]
fn invalid_configs_are_rejected_before_work_starts() {
    let mut cfg = RunConfig::new(Experiment::DlLinearized);
    cfg.model = photonic_eig::dispersion::two_term_lorentz();
    cfg.beta = Some(1.0);
    assert!(run_schedule(&cfg).is_err());
    assert!(RunConfig::from_toml("experiment = \"linear\"\nbogus = 1\n").is_err());
}
