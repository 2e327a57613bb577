"""Manufactured test problems with closed-form data.

The forcing expressions were derived once by symbolic differentiation of
the exact solutions and are embedded as plain numpy code.  The boundary
layer factor uses the overflow-safe form
(exp((t-1)/k) - exp(-1/k)) / (1 - exp(-1/k)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .driftdiffusion import DriftSpec
from .fem import ProblemSpec


@dataclass(frozen=True, eq=False)
class Manufactured:
    """A problem spec with its exact solution, gradient, and flux."""

    spec: ProblemSpec
    u: object
    grad_u: object
    flux: object  # exact -k grad u + v u


def _flux_from(spec: ProblemSpec, u, grad_u):
    vx, vy = (spec.v if spec.v is not None else (0.0, 0.0))

    def flux(x, y):
        g = np.asarray(grad_u(x, y), dtype=float)
        nu = -spec.k * g
        if spec.v is not None:
            uu = u(x, y)
            nu = nu + np.stack(
                np.broadcast_arrays(vx * uu, vy * uu), axis=-1
            )
        return nu

    return flux


def example1() -> Manufactured:
    """k = 1, v = (1, 1), u = (x - x^2)(y - y^2), homogeneous Dirichlet."""

    def u(x, y):
        return (x - x ** 2) * (y - y ** 2)

    def grad_u(x, y):
        return np.stack(
            np.broadcast_arrays((1 - 2 * x) * (y - y ** 2), (x - x ** 2) * (1 - 2 * y)),
            axis=-1,
        )

    def f(x, y):
        lap = -2.0 * (y - y ** 2) - 2.0 * (x - x ** 2)
        return -lap + (1 - 2 * x) * (y - y ** 2) + (x - x ** 2) * (1 - 2 * y)

    spec = ProblemSpec(k=1.0, v=(1.0, 1.0), f=f, g=0.0, delta_strategy="zero")
    return Manufactured(spec=spec, u=u, grad_u=grad_u, flux=_flux_from(spec, u, grad_u))


class _BoundaryLayer:
    """Factor t -> t - (e^{t/k} - 1)/(e^{1/k} - 1) and its derivatives."""

    def __init__(self, k: float):
        self.k = k
        self.denom = 1.0 - np.exp(-1.0 / k)

    def e(self, t):
        return (np.exp((t - 1.0) / self.k) - np.exp(-1.0 / self.k)) / self.denom

    def val(self, t):
        return t - self.e(t)

    def d1(self, t):
        return 1.0 - np.exp((t - 1.0) / self.k) / (self.k * self.denom)

    def d2(self, t):
        return -np.exp((t - 1.0) / self.k) / (self.k ** 2 * self.denom)


def _layer_product(k: float):
    """u = X(x) Y(y) with identical boundary layer factors; returns
    (u, grad_u, laplacian, f) for velocity (1, 1)."""
    L = _BoundaryLayer(k)

    def u(x, y):
        return L.val(x) * L.val(y)

    def grad_u(x, y):
        return np.stack(
            np.broadcast_arrays(L.d1(x) * L.val(y), L.val(x) * L.d1(y)), axis=-1
        )

    def lap(x, y):
        return L.d2(x) * L.val(y) + L.val(x) * L.d2(y)

    def f(x, y):
        return -k * lap(x, y) + L.d1(x) * L.val(y) + L.val(x) * L.d1(y)

    return u, grad_u, lap, f


def example2(k: float = 0.01) -> Manufactured:
    """Advection dominated: v = (1, 1), boundary layers at x = 1 and y = 1."""
    u, grad_u, _, f = _layer_product(k)
    spec = ProblemSpec(k=k, v=(1.0, 1.0), f=f, g=0.0, delta_strategy="classic_supg")
    return Manufactured(spec=spec, u=u, grad_u=grad_u, flux=_flux_from(spec, u, grad_u))


def patch(a: float = 0.25, b: float = 1.5, c: float = -0.75,
          k: float = 2.0) -> Manufactured:
    """Linear solution u = a + b x + c y with pure diffusion and f = 0."""

    def u(x, y):
        return a + b * x + c * y

    def grad_u(x, y):
        return np.stack(np.broadcast_arrays(b + 0.0 * x, c + 0.0 * y), axis=-1)

    spec = ProblemSpec(k=k, v=None, f=0.0, g=u, delta_strategy="zero")
    return Manufactured(spec=spec, u=u, grad_u=grad_u, flux=_flux_from(spec, u, grad_u))


def drift_manufactured(k: float = 0.01, tol: float = 1e-10,
                       max_outer: int = 50) -> dict:
    """Manufactured drift-diffusion test: psi = x + y, n = p = layer product.

    Returns the DriftSpec plus exact fields keyed by name.  The per-carrier
    recombination fields satisfy f = -R under the sign mapping
    (k, v) = (D_n, +mu_n grad psi) and (D_p, -mu_p grad psi).
    """
    n_exact, grad_n, lap_n, _ = _layer_product(k)

    def psi(x, y):
        return x + y

    def grad_psi(x, y):
        return np.stack(np.broadcast_arrays(1.0 + 0.0 * x, 1.0 + 0.0 * y), axis=-1)

    # R_n = div(-mu_n n grad psi + D_n grad n) with grad psi = (1, 1)
    def recomb_n(x, y):
        g = grad_n(x, y)
        return -(g[..., 0] + g[..., 1]) + k * lap_n(x, y)

    # R_p = div(+mu_p p grad psi + D_p grad p)
    def recomb_p(x, y):
        g = grad_n(x, y)
        return (g[..., 0] + g[..., 1]) + k * lap_n(x, y)

    spec = DriftSpec(
        recomb_n=recomb_n,
        recomb_p=recomb_p,
        psi_bc=psi,
        n_bc=n_exact,
        p_bc=n_exact,
        D_n=k,
        D_p=k,
        tol=tol,
        max_outer=max_outer,
    )

    def flux_n(x, y):
        uu = n_exact(x, y)
        g = grad_n(x, y)
        return np.stack(
            np.broadcast_arrays(-k * g[..., 0] + uu, -k * g[..., 1] + uu), axis=-1
        )

    def flux_p(x, y):
        uu = n_exact(x, y)
        g = grad_n(x, y)
        return np.stack(
            np.broadcast_arrays(-k * g[..., 0] - uu, -k * g[..., 1] - uu), axis=-1
        )

    return {
        "spec": spec,
        "psi": psi,
        "grad_psi": grad_psi,
        "carrier": n_exact,
        "grad_carrier": grad_n,
        "flux_n": flux_n,
        "flux_p": flux_p,
    }
