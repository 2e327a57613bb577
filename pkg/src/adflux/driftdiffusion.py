"""Coupled drift-diffusion system solved by successive substitution.

The potential equation is solved with plain Galerkin; each carrier equation
is mapped onto the advection-diffusion template div(-k grad u + v u) = f
with k the carrier diffusivity and v = +/- mobility * grad(psi_h)
(element-wise constant), then solved with SUPG.  Post-processing the carrier
solutions yields locally conservative current densities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GummelError
from .fem import ProblemSpec, element_gradients, solve_problem
from .mesh import TriMesh
from .postprocess import ElementFlux, postprocess_all


@dataclass(frozen=True, eq=False)
class DriftSpec:
    """Drift-diffusion data: device constants, boundary data, recombination.

    ``recomb_n``/``recomb_p`` are the recombination fields of the two
    carrier equations (manufactured setups derive one per equation); they
    enter the template as f = -R.
    """

    recomb_n: object
    recomb_p: object
    psi_bc: object = 0.0
    n_bc: object = 0.0
    p_bc: object = 0.0
    debye: float = 1.0
    mu_n: float = 1.0
    mu_p: float = 1.0
    D_n: float = 0.01
    D_p: float = 0.01
    C: float = 0.0
    tol: float = 1e-10
    max_outer: int = 50
    damping: float = 1.0
    solver_tol: float = 1e-12
    matrix_degree: int = 2
    load_degree: int = 5
    segment_points: int = 2

    def __post_init__(self):
        if self.D_n <= 0.0 or self.D_p <= 0.0:
            raise ValueError("carrier diffusivities must be positive")
        if self.tol <= 0.0:
            raise ValueError("outer tolerance must be positive")


def poisson_spec(spec: DriftSpec, n_h: np.ndarray, p_h: np.ndarray) -> ProblemSpec:
    return ProblemSpec(
        k=spec.debye ** 2,
        v=None,
        f=np.asarray(p_h) - np.asarray(n_h) + spec.C,
        g=spec.psi_bc,
        delta_strategy="zero",
        matrix_degree=spec.matrix_degree,
        load_degree=spec.load_degree,
        segment_points=spec.segment_points,
    )


def carrier_specs(mesh: TriMesh, psi_h: np.ndarray, spec: DriftSpec):
    """SUPG problem specs for the two carriers given the potential."""
    grad_psi = element_gradients(mesh, psi_h)

    def neg(field):
        if callable(field):
            return lambda x, y: -np.asarray(field(x, y), dtype=float)
        return -np.asarray(field, dtype=float)

    common = dict(
        delta_strategy="classic_supg",
        matrix_degree=spec.matrix_degree,
        load_degree=spec.load_degree,
        segment_points=spec.segment_points,
    )
    n_spec = ProblemSpec(
        k=spec.D_n, v=spec.mu_n * grad_psi, f=neg(spec.recomb_n), g=spec.n_bc,
        **common,
    )
    p_spec = ProblemSpec(
        k=spec.D_p, v=-spec.mu_p * grad_psi, f=neg(spec.recomb_p), g=spec.p_bc,
        **common,
    )
    return n_spec, p_spec


def gummel_solve(mesh: TriMesh, spec: DriftSpec, method: str = "auto"):
    """Outer successive-substitution loop; returns (psi_h, n_h, p_h)."""
    n_h = np.zeros(mesh.n_vertices)
    p_h = np.zeros(mesh.n_vertices)
    psi_h = np.zeros(mesh.n_vertices)

    increment = np.inf
    for _ in range(spec.max_outer):
        psi_new = solve_problem(
            mesh, poisson_spec(spec, n_h, p_h), tol=spec.solver_tol, method=method
        )
        n_spec, p_spec = carrier_specs(mesh, psi_new, spec)
        n_new = solve_problem(mesh, n_spec, tol=spec.solver_tol, method=method)
        p_new = solve_problem(mesh, p_spec, tol=spec.solver_tol, method=method)

        increment = max(
            np.max(np.abs(psi_new - psi_h)),
            np.max(np.abs(n_new - n_h)),
            np.max(np.abs(p_new - p_h)),
        )
        w = spec.damping
        psi_h = psi_h + w * (psi_new - psi_h)
        n_h = n_h + w * (n_new - n_h)
        p_h = p_h + w * (p_new - p_h)
        if increment < spec.tol:
            return psi_h, n_h, p_h
    raise GummelError(
        f"outer iteration did not converge in {spec.max_outer} sweeps "
        f"(last increment {increment:.3e})",
        increment=increment,
    )


def postprocess_carriers(mesh: TriMesh, psi_h: np.ndarray, n_h: np.ndarray,
                         p_h: np.ndarray, spec: DriftSpec):
    """Conservative flux recovery for both carrier equations."""
    n_spec, p_spec = carrier_specs(mesh, psi_h, spec)
    flux_n: ElementFlux = postprocess_all(mesh, n_h, n_spec)
    flux_p: ElementFlux = postprocess_all(mesh, p_h, p_spec)
    return flux_n, flux_p
