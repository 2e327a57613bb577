import mpmath
import numpy as np
import pytest

from adflux.errors import AssemblyError, SolverError
from adflux.fem import (
    ProblemSpec,
    assemble,
    element_F,
    element_Q,
    element_gradients,
    element_loads,
    element_qf,
    interpolate,
    mass_blocks,
    matrix_blocks,
    scatter_matrix,
    solve,
    solve_problem,
    stabilization_delta,
    stabilization_deltas,
)
from adflux.mesh import TriMesh, build_uniform_mesh
from adflux.problems import example1, patch
from adflux.quadrature import integrate_triangle, triangle_rule

REF = TriMesh(
    vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    triangles=np.array([[0, 1, 2]]),
)


def delta_oracle(k, vnorm, h):
    """High-precision coth/Peclet stabilization value."""
    with mpmath.workdps(60):  # coth(Pe) - 1/Pe cancels badly for small Pe
        pe = mpmath.mpf(vnorm) * mpmath.mpf(h) / (2 * mpmath.mpf(k))
        return float(
            mpmath.mpf(h) / (2 * mpmath.mpf(vnorm)) * (mpmath.coth(pe) - 1 / pe)
        )


def test_delta_zero_strategy():
    mesh = build_uniform_mesh(4)
    spec = ProblemSpec(k=1.0, v=(1.0, 1.0), delta_strategy="zero")
    assert np.all(stabilization_deltas(mesh, spec) == 0.0)
    no_flow = ProblemSpec(k=1.0, v=None, delta_strategy="classic_supg")
    assert np.all(stabilization_deltas(mesh, no_flow) == 0.0)


@pytest.mark.parametrize("k", [0.01, 1.0, 50.0])
def test_delta_matches_oracle(k):
    mesh = build_uniform_mesh(8)
    spec = ProblemSpec(k=k, v=(1.0, 1.0), delta_strategy="classic_supg")
    expected = delta_oracle(k, np.sqrt(2.0), mesh.h)
    assert stabilization_delta(mesh, 0, spec) == pytest.approx(expected, rel=1e-12)


def test_delta_small_peclet_series():
    # the series branch must agree with the exact formula at high precision
    mesh = build_uniform_mesh(2)
    k = 1.0e5  # Pe ~ 5e-6, below the series threshold
    spec = ProblemSpec(k=k, v=(1.0, 0.0), delta_strategy="classic_supg")
    expected = delta_oracle(k, 1.0, mesh.h)
    assert stabilization_delta(mesh, 0, spec) == pytest.approx(expected, rel=1e-7)


def test_stiffness_block_reference_triangle():
    spec = ProblemSpec(k=1.0, v=None)
    K = matrix_blocks(REF, spec)[0]
    expected = 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    assert np.allclose(K, expected, atol=1e-14)


def test_element_q_linear_field():
    # u = x on the reference triangle: a(u, phi_1) = |tau| grad(phi_1).(1,0)
    spec = ProblemSpec(k=1.0, v=None)
    u = REF.vertices[:, 0].copy()
    assert element_Q(REF, 0, u, 1, spec) == pytest.approx(0.5, abs=1e-14)
    assert element_Q(REF, 0, u, 0, spec) == pytest.approx(-0.5, abs=1e-14)


def test_element_q_sums_vanish():
    # a_tau(u_h, 1) = 0: both gradients of the constant test function vanish
    mesh = build_uniform_mesh(5)
    rng = np.random.default_rng(3)
    u = rng.standard_normal(mesh.n_vertices)
    spec = ProblemSpec(
        k=lambda x, y: 1.0 + 0.5 * x * y,
        v=lambda x, y: np.stack(np.broadcast_arrays(np.sin(y), x), axis=-1),
        f=1.0,
        delta_strategy="classic_supg",
    )
    Q, _ = element_qf(mesh, u, spec)
    assert np.max(np.abs(Q.sum(axis=1))) < 1e-12 * max(1.0, np.max(np.abs(Q)))


def test_element_loads_constant_forcing():
    spec = ProblemSpec(k=1.0, v=None, f=1.0)
    F, piece = element_loads(REF, spec)
    assert np.allclose(F, 1.0 / 6.0, atol=1e-14)  # |tau|/3 per vertex
    assert np.allclose(piece, 1.0 / 6.0, atol=1e-14)


def test_element_loads_match_quadrature_oracle():
    mesh = build_uniform_mesh(4)
    f = lambda x, y: 1.0 + 2.0 * x - 3.0 * y + x * y ** 2
    spec = ProblemSpec(k=1.0, v=None, f=f)
    F, piece = element_loads(mesh, spec)
    # sum over the element equals the plain triangle integral (degree <= 5)
    rule = triangle_rule(5)
    for e in [0, 7, 19]:
        exact = integrate_triangle(rule, mesh.element_points[e], f)
        assert F[e].sum() == pytest.approx(exact, rel=1e-13)
        assert piece[e].sum() == pytest.approx(exact, rel=1e-13)
    assert element_F(mesh, 0, 1, spec) == pytest.approx(F[0, 1])


def test_nodal_forcing_array():
    mesh = build_uniform_mesh(3)
    nodal = interpolate(mesh, lambda x, y: 2.0 * x - y)
    spec_nodal = ProblemSpec(k=1.0, f=nodal)
    spec_exact = ProblemSpec(k=1.0, f=lambda x, y: 2.0 * x - y)
    Fn, _ = element_loads(mesh, spec_nodal)
    Fe, _ = element_loads(mesh, spec_exact)
    assert np.allclose(Fn, Fe, atol=1e-14)


def test_mass_blocks_exact():
    M = mass_blocks(REF)[0]
    assert np.allclose(M, (np.ones((3, 3)) + np.eye(3)) / 24.0, atol=1e-15)


def test_negative_diffusivity_rejected():
    mesh = build_uniform_mesh(2)
    spec = ProblemSpec(k=lambda x, y: x - 10.0, v=None)
    with pytest.raises(AssemblyError):
        matrix_blocks(mesh, spec)


def test_unknown_delta_strategy_rejected():
    with pytest.raises(ValueError):
        ProblemSpec(delta_strategy="bogus")


def test_supg_reduces_to_galerkin_for_vanishing_velocity():
    mesh = build_uniform_mesh(3)
    tiny = (1e-15, 1e-15)
    supg = ProblemSpec(k=1.0, v=tiny, delta_strategy="classic_supg")
    plain = ProblemSpec(k=1.0, v=tiny, delta_strategy="zero")
    assert np.array_equal(matrix_blocks(mesh, supg), matrix_blocks(mesh, plain))


def test_patch_solution_nodal_exact():
    man = patch()
    mesh = build_uniform_mesh(4)
    u_h = solve_problem(mesh, man.spec)
    exact = interpolate(mesh, man.u)
    assert np.max(np.abs(u_h - exact)) < 1e-12
    grads = element_gradients(mesh, u_h)
    assert np.allclose(grads, [1.5, -0.75], atol=1e-12)


def test_solver_methods_agree():
    man = example1()
    mesh = build_uniform_mesh(8)
    system = assemble(mesh, man.spec)
    u_dense = solve(system, method="dense")
    u_gmres = solve(system, method="gmres")
    u_direct = solve(system, method="direct")
    assert np.allclose(u_dense, u_gmres, atol=1e-10)
    assert np.allclose(u_dense, u_direct, atol=1e-10)
    with pytest.raises(ValueError):
        solve(system, method="cholesky")


def test_unreachable_tolerance_raises():
    man = example1()
    mesh = build_uniform_mesh(8)
    system = assemble(mesh, man.spec)
    with pytest.raises(SolverError) as err:
        solve(system, tol=0.0)
    assert err.value.residual is not None


def test_scatter_matrix_matches_dense_assembly():
    mesh = build_uniform_mesh(2)
    spec = ProblemSpec(k=1.0, v=(1.0, 0.0))
    blocks = matrix_blocks(mesh, spec)
    A = scatter_matrix(mesh, blocks).toarray()
    dense = np.zeros_like(A)
    for e, tri in enumerate(mesh.triangles):
        for a in range(3):
            for b in range(3):
                dense[tri[a], tri[b]] += blocks[e, a, b]
    assert np.allclose(A, dense, atol=1e-14)


def test_dirichlet_elimination():
    mesh = build_uniform_mesh(4)
    g = lambda x, y: 1.0 + x
    spec = ProblemSpec(k=1.0, v=None, f=0.0, g=g)
    u_h = solve_problem(mesh, spec)
    xb = mesh.vertices[mesh.boundary_vertices]
    assert np.allclose(u_h[mesh.boundary_vertices], 1.0 + xb[:, 0], atol=1e-14)
    # harmonic extension of 1 + x is 1 + x itself
    assert np.allclose(u_h, 1.0 + mesh.vertices[:, 0], atol=1e-12)
