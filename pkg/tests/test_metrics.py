import csv

import numpy as np
import pytest

from adflux.fem import element_gradients, interpolate, solve_problem
from adflux.mesh import build_uniform_mesh
from adflux.metrics import (
    ConvergenceTable,
    conservation_defects,
    edge_metrics,
    h1_semi_error,
    observed_orders,
)
from adflux.postprocess import postprocess_all
from adflux.problems import example1, patch


def test_observed_orders():
    assert np.allclose(observed_orders([0.4, 0.2, 0.1]), [1.0, 1.0])
    assert np.allclose(observed_orders([1.0, 0.25]), [2.0])
    with pytest.raises(ValueError):
        observed_orders([0.5])
    with pytest.raises(ValueError):
        observed_orders([0.5, 0.0])


def test_h1_semi_error_linear_field():
    mesh = build_uniform_mesh(5)
    u = interpolate(mesh, lambda x, y: 2.0 + 3.0 * x - y)
    grads = element_gradients(mesh, u)
    exact = lambda x, y: np.stack(
        np.broadcast_arrays(3.0 + 0.0 * x, -1.0 + 0.0 * y), axis=-1
    )
    assert h1_semi_error(mesh, grads, exact) < 1e-13
    # against a wrong gradient the error is the L2 norm of the mismatch
    off = lambda x, y: np.stack(
        np.broadcast_arrays(4.0 + 0.0 * x, -1.0 + 0.0 * y), axis=-1
    )
    assert h1_semi_error(mesh, grads, off) == pytest.approx(1.0, abs=1e-13)


def test_conservation_report_fields():
    man = example1()
    mesh = build_uniform_mesh(8)
    u_h = solve_problem(mesh, man.spec)
    raw = conservation_defects(mesh, u_h, man.spec)
    assert raw.mode == "raw_fem"
    assert raw.defects.shape == raw.vertices.shape == (49,)
    assert np.array_equal(raw.vertices, mesh.interior_vertices)
    assert raw.l2 >= raw.max_abs > 0
    pp = conservation_defects(mesh, u_h, man.spec, flux=postprocess_all(mesh, u_h, man.spec))
    assert pp.mode == "postprocessed"
    assert pp.max_abs < 1e-12


def test_edge_metrics_patch_zero():
    man = patch()
    mesh = build_uniform_mesh(4)
    u_h = solve_problem(mesh, man.spec)
    flux = postprocess_all(mesh, u_h, man.spec)
    m1, m2, m3 = edge_metrics(mesh, flux, u_h, man.spec, man.flux)
    assert max(m1, m2, m3) < 1e-12


def test_edge_metric_inequality():
    man = example1()
    mesh = build_uniform_mesh(8)
    u_h = solve_problem(mesh, man.spec)
    flux = postprocess_all(mesh, u_h, man.spec)
    m1, m2, m3 = edge_metrics(mesh, flux, u_h, man.spec, man.flux)
    d = mesh.dual
    max_len = np.max(np.hypot(*(d.barycenters[:, None, :] - d.midpoints).T))
    assert m1 > 0 and m2 > 0 and m3 > 0
    assert m2 <= m1 * max_len * (1.0 + 1e-12)


def test_convergence_table(tmp_path):
    tab = ConvergenceTable()
    tab.add_row(10, {"err": 0.4})
    tab.add_row(20, {"err": 0.2})
    tab.add_row(40, {"err": 0.1})
    assert np.allclose(tab.orders("err"), [1.0, 1.0])
    assert tab.hs[0] == pytest.approx(np.sqrt(2.0) / 10)
    with pytest.raises(ValueError):
        tab.add_row(40, {"err": 0.05})

    path = tmp_path / "table.csv"
    tab.write_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["n", "h", "metric", "value", "order"]
    assert len(rows) == 4
    assert rows[1][4] == ""  # the first row has no order
    assert float(rows[2][4]) == pytest.approx(1.0)
