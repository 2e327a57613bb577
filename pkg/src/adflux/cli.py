"""Command-line experiment runner emitting CSV tables and snapshot dumps."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import metrics as mt
from .driftdiffusion import carrier_specs, gummel_solve, postprocess_carriers
from .fem import ProblemSpec, element_gradients, solve_problem
from .mesh import build_uniform_mesh
from .postprocess import postprocess_all, postprocess_all_transient
from .problems import drift_manufactured, example1, example2, patch
from .transient import center_of_mass, rotating_cylinder_spec, run_transient

PP_DEFECT_TOL = 1e-10

EXPERIMENTS = ("example1", "example2", "example3", "drift", "patch")

DEFAULT_NS = {
    "example1": [10, 20, 40, 80, 160, 320],
    "example2": [40, 80, 160, 320],
    "example2_large": [40, 80, 160, 320, 640, 1280],
    "example3": [128],
    "drift": [80, 160, 320],
    "drift_large": [80, 160, 320, 640],
    "patch": [4],
}


@dataclass
class RunConfig:
    experiment: str
    ns: list = field(default_factory=list)
    mode: str = None  # "cgfem" or "supg"; None picks the experiment default
    outdir: str = "out"
    solver_tol: float = 1e-12
    steps: int = 2000
    t_final: float = 2.0 * np.pi
    large: bool = False
    flip_time_sign: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.experiment in ("example2", "drift") and self.mode == "cgfem":
            raise ValueError(f"{self.experiment} requires SUPG for stability")
        if not self.ns:
            key = self.experiment + ("_large" if self.large and
                                     self.experiment in ("example2", "drift") else "")
            self.ns = list(DEFAULT_NS.get(key, DEFAULT_NS[self.experiment]))

    @property
    def time_sign(self) -> float:
        return 1.0 if self.flip_time_sign else -1.0


def _write_nodal_csv(path, mesh, u):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vertex_x", "vertex_y", "value"])
        for (x, y), val in zip(mesh.vertices, u):
            writer.writerow([f"{x:.16e}", f"{y:.16e}", f"{val:.16e}"])


def _steady_sweep(man, ns, outdir, solver_tol, mode, suffix=""):
    """Solve + post-process a manufactured problem over a mesh sweep."""
    spec = man.spec
    if mode == "cgfem":
        spec = dataclasses.replace(spec, delta_strategy="zero")
    elif mode == "supg":
        spec = dataclasses.replace(spec, delta_strategy="classic_supg")

    raw_tab = mt.ConvergenceTable()
    pp_tab = mt.ConvergenceTable()
    h1_tab = mt.ConvergenceTable()
    edge_tab = mt.ConvergenceTable()
    ok = True
    for n in ns:
        mesh = build_uniform_mesh(n)
        u_h = solve_problem(mesh, spec, tol=solver_tol)
        flux = postprocess_all(mesh, u_h, spec)

        raw = mt.conservation_defects(mesh, u_h, spec)
        pp = mt.conservation_defects(mesh, u_h, spec, flux=flux)
        raw_tab.add_row(n, {"max_abs": raw.max_abs, "l2": raw.l2})
        pp_tab.add_row(n, {"max_abs": pp.max_abs, "l2": pp.l2})

        e_fem = mt.h1_semi_error(mesh, element_gradients(mesh, u_h), man.grad_u)
        e_pp = mt.h1_semi_error(mesh, flux.grad, man.grad_u)
        h1_tab.add_row(n, {"fem": e_fem, "postprocessed": e_pp})

        m1, m2, m3 = mt.edge_metrics(mesh, flux, u_h, spec, man.flux)
        edge_tab.add_row(n, {"m1": m1, "m2": m2, "m3": m3})

        if pp.max_abs > PP_DEFECT_TOL:
            print(f"[FAIL] n={n}: post-processed defect {pp.max_abs:.3e}")
            ok = False
        else:
            print(f"[ ok ] n={n}: pp defect {pp.max_abs:.3e}, "
                  f"H1 fem {e_fem:.3e}, pp {e_pp:.3e}")

    raw_tab.write_csv(os.path.join(outdir, f"conservation_raw{suffix}.csv"))
    pp_tab.write_csv(os.path.join(outdir, f"conservation_pp{suffix}.csv"))
    h1_tab.write_csv(os.path.join(outdir, f"h1_convergence{suffix}.csv"))
    edge_tab.write_csv(os.path.join(outdir, f"edge_metrics{suffix}.csv"))

    if len(ns) >= 2:
        for name, tab in (("fem", h1_tab), ("postprocessed", h1_tab),
                          ("m1", edge_tab), ("m2", edge_tab), ("m3", edge_tab)):
            orders = tab.orders(name)
            if orders[-1] <= 0.0:
                print(f"[FAIL] metric {name} not decreasing on finest pair")
                ok = False
    return ok


def _run_example3(config: RunConfig) -> bool:
    n = config.ns[0]
    tspec = rotating_cylinder_spec(n_steps=config.steps, t_final=config.t_final)
    mesh = build_uniform_mesh(n)
    run = run_transient(mesh, tspec)
    for t, _, u in run.snapshots:
        _write_nodal_csv(
            os.path.join(config.outdir, f"snapshot_t{t:.4f}.csv"), mesh, u
        )

    # conservation is checked at the mid-revolution snapshot (t = pi)
    t_mid, u_prev, u_now = run.snapshots[len(run.snapshots) // 2]
    if u_prev is None:
        print("[FAIL] no step pair available at the conservation checkpoint")
        return False
    s = (u_now - u_prev) / run.dt
    flux = postprocess_all_transient(
        mesh, u_now, u_prev, run.dt, tspec.base,
        time_derivative_sign=config.time_sign,
    )
    raw = mt.conservation_defects(
        mesh, u_now, tspec.base, time_derivative=s,
        time_derivative_sign=config.time_sign,
    )
    pp = mt.conservation_defects(
        mesh, u_now, tspec.base, flux=flux, time_derivative=s,
        time_derivative_sign=config.time_sign,
    )
    raw_tab = mt.ConvergenceTable()
    raw_tab.add_row(n, {"max_abs": raw.max_abs, "l2": raw.l2})
    raw_tab.write_csv(os.path.join(config.outdir, "conservation_raw.csv"))
    pp_tab = mt.ConvergenceTable()
    pp_tab.add_row(n, {"max_abs": pp.max_abs, "l2": pp.l2})
    pp_tab.write_csv(os.path.join(config.outdir, "conservation_pp.csv"))

    ok = pp.max_abs <= PP_DEFECT_TOL
    print(f"[{' ok ' if ok else 'FAIL'}] t={t_mid:.4f}: raw defect "
          f"{raw.max_abs:.3e}, post-processed {pp.max_abs:.3e}")

    if abs(run.times[-1] - 2.0 * np.pi) < 1e-12:
        com = center_of_mass(mesh, run.snapshots[-1][2])
        drift = np.hypot(com[0] - 0.25, com[1] - 0.5)
        returned = drift <= 2.0 * mesh.h
        print(f"[{'  ok ' if returned else 'FAIL'}] center of mass after one "
              f"revolution at ({com[0]:.4f}, {com[1]:.4f}), offset {drift:.3e}")
        ok = ok and returned
    return ok


def _run_drift(config: RunConfig) -> bool:
    data = drift_manufactured()
    spec = data["spec"]
    ok = True
    tabs = {c: {"raw": mt.ConvergenceTable(), "pp": mt.ConvergenceTable(),
                "h1": mt.ConvergenceTable(), "edge": mt.ConvergenceTable()}
            for c in ("n", "p")}
    for n in config.ns:
        mesh = build_uniform_mesh(n)
        psi_h, n_h, p_h = gummel_solve(mesh, spec)
        flux_n, flux_p = postprocess_carriers(mesh, psi_h, n_h, p_h, spec)
        n_spec, p_spec = carrier_specs(mesh, psi_h, spec)
        for carrier, u_h, cspec, flux, exact_flux in (
            ("n", n_h, n_spec, flux_n, data["flux_n"]),
            ("p", p_h, p_spec, flux_p, data["flux_p"]),
        ):
            raw = mt.conservation_defects(mesh, u_h, cspec)
            pp = mt.conservation_defects(mesh, u_h, cspec, flux=flux)
            e_fem = mt.h1_semi_error(
                mesh, element_gradients(mesh, u_h), data["grad_carrier"]
            )
            e_pp = mt.h1_semi_error(mesh, flux.grad, data["grad_carrier"])
            m1, m2, m3 = mt.edge_metrics(mesh, flux, u_h, cspec, exact_flux)
            tabs[carrier]["raw"].add_row(n, {"max_abs": raw.max_abs, "l2": raw.l2})
            tabs[carrier]["pp"].add_row(n, {"max_abs": pp.max_abs, "l2": pp.l2})
            tabs[carrier]["h1"].add_row(n, {"fem": e_fem, "postprocessed": e_pp})
            tabs[carrier]["edge"].add_row(n, {"m1": m1, "m2": m2, "m3": m3})
            if pp.max_abs > PP_DEFECT_TOL:
                print(f"[FAIL] carrier {carrier}, n={n}: defect {pp.max_abs:.3e}")
                ok = False
            else:
                print(f"[ ok ] carrier {carrier}, n={n}: defect {pp.max_abs:.3e}, "
                      f"H1 {e_fem:.3e}, m1 {m1:.3e}")
    for carrier in ("n", "p"):
        for kind, fname in (("raw", "conservation_raw"), ("pp", "conservation_pp"),
                            ("h1", "h1_convergence"), ("edge", "edge_metrics")):
            tabs[carrier][kind].write_csv(
                os.path.join(config.outdir, f"{fname}_{carrier}.csv")
            )
        if len(config.ns) >= 2 and tabs[carrier]["edge"].orders("m1")[-1] <= 0.0:
            print(f"[FAIL] carrier {carrier}: m1 not decreasing")
            ok = False
    return ok


def run(config: RunConfig) -> int:
    """Execute one experiment; returns a process exit status."""
    os.makedirs(config.outdir, exist_ok=True)
    if config.experiment == "example1":
        man = example1()
        ok = _steady_sweep(man, config.ns, config.outdir, config.solver_tol,
                           config.mode or "cgfem")
    elif config.experiment == "example2":
        man = example2()
        ok = _steady_sweep(man, config.ns, config.outdir, config.solver_tol,
                           "supg")
    elif config.experiment == "patch":
        man = patch()
        ok = _steady_sweep(man, config.ns, config.outdir, config.solver_tol,
                           config.mode or "cgfem")
    elif config.experiment == "example3":
        ok = _run_example3(config)
    else:
        ok = _run_drift(config)
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def main(argv=None) -> int:
    threads = os.environ.get("ADFLUX_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)

    parser = argparse.ArgumentParser(
        prog="adflux",
        description="Advection-diffusion experiments with conservative flux "
                    "post-processing.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--n", default="",
                        help="comma-separated mesh sizes, e.g. 10,20,40")
    parser.add_argument("--mode", choices=("cgfem", "supg"), default=None)
    parser.add_argument("--outdir", default="out")
    parser.add_argument("--tol", type=float, default=1e-12,
                        help="relative linear-solver tolerance")
    parser.add_argument("--steps", type=int, default=2000,
                        help="time steps for example3")
    parser.add_argument("--t-final", type=float, default=2.0 * np.pi,
                        help="time horizon for example3 (full revolution by "
                             "default)")
    parser.add_argument("--large", action="store_true",
                        help="include the largest (slow) meshes")
    parser.add_argument("--flip-time-sign", action="store_true",
                        help="use +du/dt instead of -du/dt in the transient "
                             "balance")
    args = parser.parse_args(argv)

    ns = [int(s) for s in args.n.split(",") if s.strip()]
    try:
        config = RunConfig(
            experiment=args.experiment,
            ns=ns,
            mode=args.mode,
            outdir=args.outdir,
            solver_tol=args.tol,
            steps=args.steps,
            t_final=args.t_final,
            large=args.large,
            flip_time_sign=args.flip_time_sign,
        )
    except ValueError as exc:
        parser.error(str(exc))
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
