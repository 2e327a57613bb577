"""Backward-Euler time stepping and the rotating-cylinder benchmark."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .fem import (
    ProblemSpec,
    assemble_full,
    element_loads,
    interpolate,
    mass_blocks,
    matrix_blocks,
    scatter_loads,
    scatter_matrix,
    solve,
)
from .mesh import TriMesh, build_uniform_mesh
from .quadrature import triangle_rule


@dataclass(frozen=True, eq=False)
class TransientSpec:
    """Time-dependent problem: base coefficients, horizon, and initial data."""

    base: ProblemSpec
    t_final: float
    n_steps: int
    u0: object  # callable (x, y) or nodal array

    def __post_init__(self):
        if self.n_steps < 1 or self.t_final <= 0.0:
            raise ValueError("need t_final > 0 and at least one step")

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    def initial_field(self, mesh: TriMesh) -> np.ndarray:
        if callable(self.u0):
            return interpolate(mesh, self.u0)
        return np.asarray(self.u0, dtype=float).copy()


def be_supg_step(mesh: TriMesh, u_prev: np.ndarray, spec: ProblemSpec,
                 dt: float, tol: float = 1e-12, method: str = "auto") -> np.ndarray:
    """One backward-Euler step: (u, w) + dt a(u, w) = (u_prev, w) + dt l(w)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    M_full = scatter_matrix(mesh, mass_blocks(mesh))
    A_full = scatter_matrix(mesh, matrix_blocks(mesh, spec))
    F, _ = element_loads(mesh, spec)
    rhs_full = M_full @ np.asarray(u_prev, float) + dt * scatter_loads(mesh, F)
    system = assemble_full(mesh, M_full + dt * A_full, rhs_full, spec.g)
    return solve(system, tol=tol, method=method)


class BackwardEulerStepper:
    """Factorizes the step matrix once and reuses it for every step.

    Coefficients must be time-independent; the load may be refreshed via
    ``set_forcing`` when needed.
    """

    def __init__(self, mesh: TriMesh, spec: ProblemSpec, dt: float):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        self.mesh = mesh
        self.spec = spec
        self.dt = dt
        self._M_full = scatter_matrix(mesh, mass_blocks(mesh))
        A_full = scatter_matrix(mesh, matrix_blocks(mesh, spec))
        self._system = assemble_full(
            mesh, self._M_full + dt * A_full, np.zeros(mesh.n_vertices), spec.g
        )
        step_full = self._M_full + dt * A_full
        free, bnd = self._system.free, self._system.bnd
        self._coupling = step_full[free][:, bnd] @ self._system.bnd_values
        self._lu = spla.splu(self._system.matrix.tocsc())
        F, _ = element_loads(mesh, spec)
        self._load = dt * scatter_loads(mesh, F)

    def step(self, u_prev: np.ndarray) -> np.ndarray:
        rhs_full = self._M_full @ np.asarray(u_prev, float) + self._load
        rhs = rhs_full[self._system.free] - self._coupling
        return self._system.complete(self._lu.solve(rhs))


@dataclass
class TransientRun:
    mesh: TriMesh
    spec: ProblemSpec
    dt: float
    times: list = field(default_factory=list)
    # snapshots hold (t, u_prev, u); u_prev is None for the initial state
    snapshots: list = field(default_factory=list)


def run_transient(mesh: TriMesh, tspec: TransientSpec,
                  snapshot_fractions=(0.0, 0.25, 0.5, 0.75, 1.0)) -> TransientRun:
    """March the backward-Euler scheme, keeping state pairs at snapshots."""
    dt = tspec.dt
    stepper = BackwardEulerStepper(mesh, tspec.base, dt)
    wanted = sorted({int(round(f * tspec.n_steps)) for f in snapshot_fractions})
    run = TransientRun(mesh=mesh, spec=tspec.base, dt=dt)

    u = tspec.initial_field(mesh)
    if 0 in wanted:
        run.times.append(0.0)
        run.snapshots.append((0.0, None, u.copy()))
    for step in range(1, tspec.n_steps + 1):
        u_prev = u
        u = stepper.step(u_prev)
        if step in wanted:
            t = step * dt
            run.times.append(t)
            run.snapshots.append((t, u_prev.copy(), u.copy()))
    return run


def rotating_cylinder_spec(n_steps: int = 2000, t_final: float = 2.0 * np.pi,
                           radius: float = 0.2, center=(0.25, 0.5)) -> TransientSpec:
    """Rotation of an indicator cylinder by v = (y-1/2, 1/2-x), k = 1e-5."""

    def velocity(x, y):
        return np.stack(np.broadcast_arrays(y - 0.5, 0.5 - x), axis=-1)

    def u0(x, y):
        inside = (x - center[0]) ** 2 + (y - center[1]) ** 2 <= radius ** 2
        return inside.astype(float)

    base = ProblemSpec(
        k=1e-5,
        v=velocity,
        f=0.0,
        g=0.0,
        delta_strategy="classic_supg",
        div_v=0.0,
    )
    return TransientSpec(base=base, t_final=t_final, n_steps=n_steps, u0=u0)


def run_rotating_cylinder(mesh_n: int = 128, n_steps: int = 2000,
                          t_final: float = 2.0 * np.pi,
                          snapshot_fractions=(0.0, 0.25, 0.5, 0.75, 1.0)) -> TransientRun:
    mesh = build_uniform_mesh(mesh_n)
    tspec = rotating_cylinder_spec(n_steps=n_steps, t_final=t_final)
    return run_transient(mesh, tspec, snapshot_fractions=snapshot_fractions)


def total_mass(mesh: TriMesh, u: np.ndarray) -> float:
    """int u dx for a P1 field (exact)."""
    return float(np.dot(mesh.areas, u[mesh.triangles].mean(axis=1)))


def center_of_mass(mesh: TriMesh, u: np.ndarray):
    """First moments of a P1 field divided by its mass."""
    rule = triangle_rule(2)
    pts = np.einsum("qk,nki->nqi", rule.points, mesh.element_points)
    lam = rule.points  # barycentric values are the basis values
    uq = np.einsum("qk,nk->nq", lam, u[mesh.triangles])
    w = mesh.areas[:, None] * rule.weights
    mass = float((w * uq).sum())
    mx = float((w * uq * pts[..., 0]).sum())
    my = float((w * uq * pts[..., 1]).sum())
    return np.array([mx / mass, my / mass])
