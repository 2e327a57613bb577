"""Element-local Neumann post-processing that recovers conservative fluxes.

Each element gets a singular 3x3 system A alpha = b built from dual-segment
integrals; its solution (pinned at the third local vertex) defines a linear
function whose gradient replaces the raw P1 gradient in the flux
-k grad(u~) + v u_h.  The right-hand side folds the advection term and the
forcing into data, and for backward-Euler states the discrete time
derivative joins the forcing with a configurable sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CompatibilityError, SingularLocalSystemError
from .fem import ProblemSpec, element_loads, element_qf, eval_scalar, eval_velocity, mass_blocks
from .mesh import TriMesh

COMPAT_RTOL = 1e-10
RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class LocalSystem:
    """Singular local system of one element."""

    element: int
    A: np.ndarray  # (3, 3)
    b: np.ndarray  # (3,)


@dataclass(frozen=True)
class ElementFlux:
    """Post-processed flux coefficients for every element.

    ``alphas`` are defined up to a per-element additive constant; ``grad``
    carries the unique derivative information.
    """

    alphas: np.ndarray  # (nt, 3)
    grad: np.ndarray  # (nt, 2)


def _segment_matrix(mesh: TriMesh, spec: ProblemSpec) -> np.ndarray:
    """A[n, xi, eta] = -int_{dC^xi & dt_xi} k grad(phi_eta) . n dl."""
    d = mesh.dual
    rule = spec.seg_rule()
    pts = d.cv_a[..., None, :] + rule.points[:, None] * (
        d.cv_b[..., None, :] - d.cv_a[..., None, :]
    )  # (nt, 3, 2, nq, 2)
    kq = eval_scalar(spec.k, pts[..., 0], pts[..., 1])
    kint = np.einsum("q,nasq->nas", rule.weights, kq)
    wvec = np.einsum("nas,nas,nasi->nai", d.cv_lengths, kint, d.cv_normals)
    return -np.einsum("nai,nhi->nah", wvec, mesh.p1_gradients)


def _advection_boundary(mesh: TriMesh, u_h: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """adv[n, xi] = int_{dC^xi & dt_xi} u_h v . n dl."""
    if spec.v is None:
        return np.zeros((mesh.n_elements, 3))
    d = mesh.dual
    rule = spec.seg_rule()
    pts = d.cv_a[..., None, :] + rule.points[:, None] * (
        d.cv_b[..., None, :] - d.cv_a[..., None, :]
    )
    lam = mesh.barycentric(pts)
    u_loc = u_h[mesh.triangles][:, None, None, None, :]
    uq = (lam * u_loc).sum(axis=-1)
    vq = eval_velocity(spec.v, pts[..., 0], pts[..., 1], mesh.n_elements)
    vn = np.einsum("nasqi,nasi->nasq", vq, d.cv_normals)
    seg = np.einsum("q,nasq->nas", rule.weights, uq * vn) * d.cv_lengths
    return seg.sum(axis=2)


def local_systems(mesh: TriMesh, u_h: np.ndarray, spec: ProblemSpec,
                  time_derivative: np.ndarray = None,
                  time_derivative_sign: float = -1.0):
    """Vectorized (A, b) of every element's local system.

    ``time_derivative`` is the nodal field (u_now - u_prev) / dt of a
    backward-Euler state; it enters the data weighted by the plain basis
    function (no streamline perturbation), matching the time-stepping
    scheme, so the discrete balance telescopes exactly.
    """
    A = _segment_matrix(mesh, spec)
    Q, F = element_qf(mesh, u_h, spec)
    _, piece = element_loads(mesh, spec)
    if time_derivative is not None:
        s = np.asarray(time_derivative, dtype=float)
        M = mass_blocks(mesh)
        F = F + time_derivative_sign * np.einsum("nxh,nh->nx", M, s[mesh.triangles])
        _, piece_s = element_loads(mesh, spec, f=s)
        piece = piece + time_derivative_sign * piece_s
    b = Q - F + piece - _advection_boundary(mesh, u_h, spec)

    defect = np.abs(b.sum(axis=1))
    scale = np.maximum(1.0, np.linalg.norm(b, axis=1))
    bad = np.flatnonzero(defect > COMPAT_RTOL * scale)
    if bad.size:
        e = int(bad[0])
        raise CompatibilityError(e, float(defect[e]))
    return A, b


def build_local_system(mesh: TriMesh, element: int, u_h: np.ndarray,
                       spec: ProblemSpec) -> LocalSystem:
    A, b = local_systems(mesh, u_h, spec)
    return LocalSystem(element=element, A=A[element], b=b[element])


def _solve_pinned(A: np.ndarray, b: np.ndarray, pin: int = 2) -> np.ndarray:
    """Solve the singular systems with alpha[pin] = 0, vectorized.

    A has shape (nt, 3, 3), b (nt, 3); returns alphas (nt, 3).
    """
    idx = [i for i in range(3) if i != pin]
    a00 = A[:, idx[0], idx[0]]
    a01 = A[:, idx[0], idx[1]]
    a10 = A[:, idx[1], idx[0]]
    a11 = A[:, idx[1], idx[1]]
    det = a00 * a11 - a01 * a10
    scale = np.max(np.abs(A), axis=(1, 2))
    singular = np.abs(det) <= 1e-13 * scale * scale
    if np.any(singular):
        raise SingularLocalSystemError(int(np.flatnonzero(singular)[0]))
    b0, b1 = b[:, idx[0]], b[:, idx[1]]
    alphas = np.zeros_like(b)
    alphas[:, idx[0]] = (b0 * a11 - b1 * a01) / det
    alphas[:, idx[1]] = (b1 * a00 - b0 * a10) / det

    res = np.einsum("nxh,nh->nx", A, alphas) - b
    bad = np.linalg.norm(res, axis=1) > RESIDUAL_RTOL * np.maximum(
        1.0, np.linalg.norm(b, axis=1)
    )
    if np.any(bad):
        e = int(np.flatnonzero(bad)[0])
        raise CompatibilityError(e, float(np.linalg.norm(res[e])))
    return alphas


def solve_local(system: LocalSystem, pin: int = 2) -> np.ndarray:
    """Solution of one local system with the pinned vertex set to zero."""
    return _solve_pinned(system.A[None], system.b[None], pin=pin)[0]


def _flux_from_alphas(mesh: TriMesh, alphas: np.ndarray) -> ElementFlux:
    grad = np.einsum("nki,nk->ni", mesh.p1_gradients, alphas)
    return ElementFlux(alphas=alphas, grad=grad)


def postprocess_all(mesh: TriMesh, u_h: np.ndarray, spec: ProblemSpec,
                    pin: int = 2) -> ElementFlux:
    """Post-process every element independently."""
    A, b = local_systems(mesh, u_h, spec)
    return _flux_from_alphas(mesh, _solve_pinned(A, b, pin=pin))


def postprocess_all_transient(mesh: TriMesh, u_now: np.ndarray,
                              u_prev: np.ndarray, dt: float,
                              spec: ProblemSpec,
                              time_derivative_sign: float = -1.0,
                              pin: int = 2) -> ElementFlux:
    """Post-process a backward-Euler state pair.

    The discrete time derivative moves into the data; the default sign makes
    the recovered flux balance f - (u_now - u_prev)/dt on control volumes.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    s = (np.asarray(u_now) - np.asarray(u_prev)) / dt
    A, b = local_systems(
        mesh, u_now, spec, time_derivative=s,
        time_derivative_sign=time_derivative_sign,
    )
    return _flux_from_alphas(mesh, _solve_pinned(A, b, pin=pin))
