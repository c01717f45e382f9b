"""Smoke test for the scale_probe_py extension module."""

import math
import pathlib
import tempfile

import scale_probe_py as sp


def main():
    mesh = sp.Mesh(8)
    assert mesh.num_cells == 128
    assert abs(mesh.mesh_size - math.sqrt(2) / 8) < 1e-15

    space = sp.Space(mesh, 2)
    assert space.dim == 17 * 17 and space.degree == 2
    assert len(space.interior_dofs((0.25, 0.25, 0.75, 0.75))) > 0
    assert mesh.shrink((0.0, 0.0, 1.0, 1.0), 1) == (0.125, 0.125, 0.875, 0.875)

    om = sp.Cutoff((0.4, 0.4, 0.6, 0.6), (0.2, 0.2, 0.8, 0.8))
    assert om.value(0.5, 0.5) == 1.0 and om.value(0.1, 0.1) == 0.0
    gx, gy = om.gradient(0.3, 0.5)
    assert math.hypot(gx, gy) <= om.derivative_bound

    eps = sp.epsilon(1.0, 0.1, 1)
    assert 0.0 < eps < 1.0
    assert sp.rhs_bound_local_estimate(eps, 1, 0.1, 1.0, 1.0) > 0.0

    try:
        sp.Mesh(0)
    except ValueError:
        pass
    else:
        raise AssertionError("Mesh(0) accepted")

    assert "identity" in sp.experiments()
    assert "records.csv" in sp.describe("identity")

    cfg = sp.Config("experiment=identity\nlevels=4\n")
    assert sp.Config(cfg.to_text()).to_text() == cfg.to_text()
    with tempfile.TemporaryDirectory() as tmp:
        out = pathlib.Path(tmp) / "out"
        passed, records, violations = cfg.run(str(out))
        assert passed and records > 0 and not violations, violations
        cols, flags = sp.compare(str(out / "records.csv"), str(out / "records.csv"))
        assert cols and not flags

    print("smoke test ok")


if __name__ == "__main__":
    main()
