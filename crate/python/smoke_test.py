"""Smoke test for the photonic_eig_py extension module."""

import math

import photonic_eig_py as pe

LINEAR = """
experiment = "linear"
model = { kind = "constant", value = 8.0 }
tol = 1e-9

[schedule]
steps_per_mesh = 3
max_level = 1
max_steps = 80

[reference]
enabled = false
"""


def main() -> None:
    mesh = pe.Mesh(1)
    assert mesh.level == 1 and mesh.cells_per_side == 16
    assert mesh.dofs == 32 * 32 == len(mesh.dof_points())

    ps = pe.Dispersion.porous_silicon()
    assert math.isfinite(ps.eval(3.0))
    dl = pe.Dispersion.simplified_dl(2.0, [(98.696, 55.2698)])
    assert abs(dl.eval_sq(1.0) - (2.0 + 98.696 / (55.2698 - 1.0))) < 1e-12
    assert dl.poles() == [55.2698]

    kx, ky = 0.9, -0.4
    lam = pe.smallest_eigenvalue(kx, ky, eps2=1.0, level=1)
    band = pe.free_space_band(kx, ky)
    assert abs(lam - band) <= 1e-6 * band, (lam, band)

    out = pe.run_experiment(LINEAR)
    assert out["converged"], out["failure"]
    assert out["final_level"] == 1
    rows = out["rows"]
    assert rows[-1]["residual_dual"] <= 1e-9
    assert [r["j"] for r in rows] == list(range(1, len(rows) + 1))

    try:
        pe.run_experiment("experiment = 'nope'")
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")

    checks = pe.run_checks()
    failed = [c for c in checks if not c[1]]
    assert len(checks) == 10 and not failed, failed

    print(f"ok: lambda1 {lam:.10f}, {len(rows)} steps, lambda {rows[-1]['lambda']:.10f}")


if __name__ == "__main__":
    main()
