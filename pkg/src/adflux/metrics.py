"""Conservation defects, H1 semi-norm errors, and dual-edge flux metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .fem import ProblemSpec, element_gradients, element_loads, eval_scalar, eval_velocity
from .mesh import TriMesh
from .postprocess import ElementFlux
from .quadrature import triangle_rule


@dataclass(frozen=True)
class ConservationReport:
    """Per-interior-vertex control-volume balance defects."""

    vertices: np.ndarray
    defects: np.ndarray
    mode: str  # "raw_fem" or "postprocessed"

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.defects))) if self.defects.size else 0.0

    @property
    def l2(self) -> float:
        return float(np.linalg.norm(self.defects))


def _normal_flux_on_cv_segments(mesh, u_h, spec, grads):
    """int over both dC^xi segments of (-k grad . n + u_h v . n), (nt, 3)."""
    d = mesh.dual
    rule = spec.seg_rule()
    pts = d.cv_a[..., None, :] + rule.points[:, None] * (
        d.cv_b[..., None, :] - d.cv_a[..., None, :]
    )  # (nt, 3, 2, nq, 2)
    x, y = pts[..., 0], pts[..., 1]
    kq = eval_scalar(spec.k, x, y)
    gn = np.einsum("ni,nasi->nas", grads, d.cv_normals)
    diff = -np.einsum("q,nasq->nas", rule.weights, kq) * gn
    if spec.v is not None:
        lam = mesh.barycentric(pts)
        u_loc = u_h[mesh.triangles][:, None, None, None, :]
        uq = (lam * u_loc).sum(axis=-1)
        vq = eval_velocity(spec.v, x, y, mesh.n_elements)
        vn = np.einsum("nasqi,nasi->nasq", vq, d.cv_normals)
        diff += np.einsum("q,nasq->nas", rule.weights, uq * vn)
    return (diff * d.cv_lengths).sum(axis=2)


def conservation_defects(mesh: TriMesh, u_h: np.ndarray, spec: ProblemSpec,
                         flux: ElementFlux = None,
                         time_derivative: np.ndarray = None,
                         time_derivative_sign: float = -1.0) -> ConservationReport:
    """Control-volume defects of the raw or post-processed flux.

    defect(z) = int_{dC^z} (-k grad . n + u_h v . n) dl - int_{C^z} f_eff,
    with f_eff = f + sign * time_derivative for backward-Euler states.
    Raw mode integrates the discontinuous P1 gradient per owning element.
    """
    if flux is None:
        grads = element_gradients(mesh, u_h)
        mode = "raw_fem"
    else:
        grads = flux.grad
        mode = "postprocessed"
    fluxint = _normal_flux_on_cv_segments(mesh, u_h, spec, grads)
    _, piece = element_loads(mesh, spec)
    if time_derivative is not None:
        _, piece_s = element_loads(mesh, spec, f=np.asarray(time_derivative, float))
        piece = piece + time_derivative_sign * piece_s

    per_vertex = np.zeros(mesh.n_vertices)
    np.add.at(per_vertex, mesh.triangles.ravel(), (fluxint - piece).ravel())
    interior = mesh.interior_vertices
    return ConservationReport(
        vertices=interior, defects=per_vertex[interior], mode=mode
    )


def h1_semi_error(mesh: TriMesh, grads: np.ndarray, exact_grad,
                  degree: int = 5) -> float:
    """(sum_tau int |exact_grad - grads|^2)^(1/2) by triangle quadrature."""
    rule = triangle_rule(degree)
    pts = np.einsum("qk,nki->nqi", rule.points, mesh.element_points)
    ge = np.asarray(exact_grad(pts[..., 0], pts[..., 1]), dtype=float)
    diff = ge - grads[:, None, :]
    sq = (diff ** 2).sum(axis=-1)
    total = np.einsum("n,q,nq->", mesh.areas, rule.weights, sq)
    return float(np.sqrt(total))


def edge_metrics(mesh: TriMesh, flux: ElementFlux, u_h: np.ndarray,
                 spec: ProblemSpec, exact_flux):
    """(m1, m2, m3) normal-flux errors over all control-volume edges.

    m1 samples the deviation at the segment quadrature points plus the two
    endpoints; m2 takes the largest edge integral in magnitude; m3 is the
    global L2 norm over the edge set.
    """
    d = mesh.dual
    a = d.midpoints  # (nt, 3, 2) edge midpoints, one dual edge each
    b = np.broadcast_to(d.barycenters[:, None, :], a.shape)
    t = b - a
    lengths = np.hypot(t[..., 0], t[..., 1])
    normals = np.stack([t[..., 1], -t[..., 0]], axis=-1) / lengths[..., None]

    rule = spec.seg_rule()
    params = np.concatenate([rule.points, [0.0, 1.0]])
    pts = a[..., None, :] + params[:, None] * (b - a)[..., None, :]
    x, y = pts[..., 0], pts[..., 1]

    kq = eval_scalar(spec.k, x, y)
    lam = mesh.barycentric(pts)
    u_loc = u_h[mesh.triangles][:, None, None, :]
    uq = (lam * u_loc).sum(axis=-1)
    nu = -kq[..., None] * flux.grad[:, None, None, :]
    if spec.v is not None:
        nu = nu + uq[..., None] * eval_velocity(spec.v, x, y, mesh.n_elements)
    dev = np.einsum("neqi,nei->neq", nu - np.asarray(exact_flux(x, y), float), normals)

    nq = len(rule.points)
    m1 = float(np.max(np.abs(dev)))
    edge_int = np.einsum("q,neq->ne", rule.weights, dev[..., :nq]) * lengths
    m2 = float(np.max(np.abs(edge_int)))
    sq_int = np.einsum("q,neq->ne", rule.weights, dev[..., :nq] ** 2) * lengths
    m3 = float(np.sqrt(sq_int.sum()))
    return m1, m2, m3


def observed_orders(errors) -> np.ndarray:
    """log2 ratios of consecutive errors for h-halving sweeps."""
    e = np.asarray(errors, dtype=float)
    if e.size < 2:
        raise ValueError("need at least two rows to compute orders")
    if np.any(e <= 0.0):
        raise ValueError("errors must be positive")
    return np.log2(e[:-1] / e[1:])


@dataclass
class ConvergenceTable:
    """Errors per mesh size with observed orders between refinements."""

    ns: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)  # name -> list of values

    def add_row(self, n: int, values: dict) -> None:
        if self.ns and n <= self.ns[-1]:
            raise ValueError("mesh sizes must be strictly increasing")
        self.ns.append(n)
        for name, value in values.items():
            self.metrics.setdefault(name, []).append(float(value))

    @property
    def hs(self) -> list:
        return [np.sqrt(2.0) / n for n in self.ns]

    def orders(self, name: str) -> np.ndarray:
        return observed_orders(self.metrics[name])

    def write_csv(self, path) -> None:
        write_csv(path, self)


def write_csv(path, table: ConvergenceTable) -> None:
    """Plot-ready long format: one row per (n, metric)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "h", "metric", "value", "order"])
        for name, values in table.metrics.items():
            for i, (n, h, value) in enumerate(zip(table.ns, table.hs, values)):
                order = ""
                if i > 0 and values[i - 1] > 0 and value > 0:
                    order = f"{np.log2(values[i - 1] / value):.16e}"
                writer.writerow([n, f"{h:.16e}", name, f"{value:.16e}", order])
