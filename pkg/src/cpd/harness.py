"""Experiment runner and CLI: convergence and efficiency studies to CSV.

Experiments:
  * order_vs_h    error against the time step for each (method, eps)
  * order_vs_eps  error against eps for each (method, h)
  * efficiency    for each method, walk an h ladder down to an error target
                  and record wall-clock time (min over repeats)

Rows are deterministic in order and content (cpu_seconds excepted).  Failures
of individual rows are recorded in the `error` column and the run continues.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
import time
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import expint
from .baselines import ReferencePolicy, integrate_baseline, reference_solution
from .fields import resolve_field
from .solver import SolveConfig, error_parts, solve_cpd
from .transform import ParticleState

CSV_HEADER = ["method", "eps", "h", "n_tau", "err", "err_x", "err_v_scaled",
              "cpu_seconds", "steps", "oracle_estimate", "error"]

TWO_SCALE_METHODS = {"mo1": 1, "mo2": 2, "mo3": 3, "mo4": 4}
BASELINE_METHODS = ("boris", "rk2", "cn", "rk4ref")

_DEFAULT_X0 = (1 / 3, 1 / 4, 1 / 2)
_DEFAULT_V0 = (2 / 5, 2 / 3, 1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str                       # order_vs_h | order_vs_eps | efficiency
    field: str = "general"
    methods: Tuple[str, ...] = ("mo1", "mo2", "mo3", "mo4")
    eps: Tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    h: Tuple[float, ...] = (1 / 10, 1 / 20, 1 / 40, 1 / 80, 1 / 160)
    n_tau: int = 64
    T: float = 1.0
    x0: Tuple[float, ...] = _DEFAULT_X0
    v0: Tuple[float, ...] = _DEFAULT_V0
    repeats: int = 3
    err_target: float = 1e-4             # efficiency experiments only
    max_ladder: int = 24                 # efficiency: max h halvings below 1/10

    def __post_init__(self):
        if self.experiment not in ("order_vs_h", "order_vs_eps", "efficiency"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not self.methods or not self.eps or not self.h:
            raise ValueError("methods, eps and h sweeps must be non-empty")
        for m in self.methods:
            if m not in TWO_SCALE_METHODS and m not in BASELINE_METHODS:
                raise ValueError(f"unknown method {m!r}")
        for hv in self.h:
            n = self.T / hv
            if abs(n - round(n)) > 1e-9 * max(1.0, n):
                raise ValueError(f"h={hv} does not divide T={self.T}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


@dataclass
class ResultRow:
    method: str
    eps: float
    h: float
    n_tau: int
    err: float = math.nan
    err_x: float = math.nan
    err_v_scaled: float = math.nan
    cpu_seconds: float = math.nan
    steps: int = 0
    oracle_estimate: float = math.nan
    error: str = ""

    def as_list(self):
        def fmt(x):
            if isinstance(x, float):
                return format(x, ".17g")
            return str(x)
        return [self.method, fmt(self.eps), fmt(self.h), str(self.n_tau),
                fmt(self.err), fmt(self.err_x), fmt(self.err_v_scaled),
                fmt(self.cpu_seconds), str(self.steps),
                fmt(self.oracle_estimate), self.error]


class ReferenceCache:
    """Memoizes oracle endpoints per (field, eps, T, x0, v0)."""

    def __init__(self, policy: ReferencePolicy = ReferencePolicy()):
        self.policy = policy
        self._store: Dict[tuple, Tuple[ParticleState, float]] = {}

    def get(self, field_id: str, eps: float, T: float, x0, v0):
        key = (field_id, float(eps), float(T), tuple(x0), tuple(v0))
        if key not in self._store:
            fld = resolve_field(field_id, eps)
            self._store[key] = reference_solution(fld, eps, T, x0, v0, self.policy)
        return self._store[key]


def _run_one(method: str, field_id: str, eps: float, h: float, cfg: ExperimentConfig,
             cache: ReferenceCache) -> ResultRow:
    """Solve one (method, eps, h) cell, timed (min over repeats)."""
    row = ResultRow(method, eps, h, cfg.n_tau if method in TWO_SCALE_METHODS else 0)
    n_steps = int(round(cfg.T / h))
    row.steps = n_steps
    try:
        ref, est = cache.get(field_id, eps, cfg.T, cfg.x0, cfg.v0)
        row.oracle_estimate = est
        endpoint = None
        best = math.inf
        for _ in range(cfg.repeats):
            t0 = time.perf_counter()
            if method in TWO_SCALE_METHODS:
                traj = solve_cpd(SolveConfig(
                    field=field_id, eps=eps, order=TWO_SCALE_METHODS[method],
                    h=h, n_tau=cfg.n_tau, T=cfg.T,
                    x0=np.asarray(cfg.x0), v0=np.asarray(cfg.v0)))
                endpoint = traj.endpoint
            else:
                fld = resolve_field(field_id, eps)
                endpoint = integrate_baseline(
                    method, ParticleState(0.0, np.asarray(cfg.x0), np.asarray(cfg.v0)),
                    h, n_steps, fld, eps)
            best = min(best, time.perf_counter() - t0)
        row.cpu_seconds = best
        row.err_x, row.err_v_scaled = error_parts(endpoint, ref, eps)
        row.err = row.err_x + row.err_v_scaled
    except Exception as exc:  # recorded, run continues
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def run_experiment(cfg: ExperimentConfig,
                   cache: Optional[ReferenceCache] = None) -> List[ResultRow]:
    cache = cache or ReferenceCache()
    rows: List[ResultRow] = []
    if cfg.experiment in ("order_vs_h", "order_vs_eps"):
        for method in cfg.methods:
            for eps in cfg.eps:
                for h in cfg.h:
                    rows.append(_run_one(method, cfg.field, eps, h, cfg, cache))
    else:  # efficiency: descend the ladder until the error target is met
        for method in cfg.methods:
            for eps in cfg.eps:
                h0 = max(cfg.h)
                for j in range(cfg.max_ladder):
                    h = h0 / 2**j
                    row = _run_one(method, cfg.field, eps, h, cfg, cache)
                    rows.append(row)
                    if row.error == "" and row.err <= cfg.err_target:
                        break
    return rows


def write_csv(rows: List[ResultRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.as_list())


def fit_slope(pairs: List[Tuple[float, float]]) -> float:
    """Least-squares slope of log(err) vs log(sweep variable).

    Non-positive errors are excluded with a warning; fewer than three
    remaining points is an error.
    """
    kept = [(x, e) for x, e in pairs if e > 0 and math.isfinite(e)]
    if len(kept) < len(pairs):
        warnings.warn(f"fit_slope: excluded {len(pairs) - len(kept)} "
                      "non-positive/non-finite error values")
    if len(kept) < 3:
        raise ValueError("fit_slope needs at least 3 positive error values")
    lx = np.log([x for x, _ in kept])
    le = np.log([e for _, e in kept])
    return float(np.polyfit(lx, le, 1)[0])


def slope_from_rows(rows: List[ResultRow], variable: str,
                    floor_factor: float = 10.0) -> float:
    """Fitted slope over rows, excluding oracle-floor-saturated points.

    Points with err < floor_factor * oracle_estimate are dropped (floor
    saturation); rows with a recorded failure are dropped as well.
    """
    pairs = []
    for r in rows:
        if r.error:
            continue
        if math.isfinite(r.oracle_estimate) and r.err < floor_factor * r.oracle_estimate:
            continue
        pairs.append((getattr(r, variable), r.err))
    return fit_slope(pairs)


# ---------------------------------------------------------------------------
# configuration files (flat TOML)


def config_from_toml(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    kwargs = {}
    for key in ("experiment", "field", "n_tau", "T", "repeats", "err_target",
                "max_ladder"):
        if key in raw:
            kwargs[key] = raw[key]
    for key in ("methods", "eps", "h", "x0", "v0"):
        if key in raw:
            kwargs[key] = tuple(raw[key])
    return ExperimentConfig(**kwargs)


# ---------------------------------------------------------------------------
# self checks (`cpd check`)


def check_suite(verbose: bool = True) -> bool:
    """Tableau psi conditions and operator identities; True if all pass."""
    from .rotations import Linearization, s0 as rot_s0
    from .twoscale import TauGridFunction, op_A, op_L, op_Pi, tau_nodes, initial_data
    from .fields import builtin_general_field

    ok = True

    def report(name, passed, detail=""):
        nonlocal ok
        ok = ok and passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}{'  ' + detail if detail else ''}")

    zgrid = 1j * np.linspace(-50, 50, 200)
    want_zero = {1: (1,), 2: (1,), 3: (1, 2), 4: (1, 2, 3)}
    for r, make in expint.TABLEAUS.items():
        rep = expint.psi_check(make(), zgrid)
        worst = max(rep["max_psi"][rho] for rho in want_zero[r])
        at0 = rep["psi_at_0"][r]
        report(f"psi conditions {rep['name']}", worst <= 1e-12 and at0 <= 1e-13,
               f"max|psi_identical|={worst:.2e} |psi_{r}(0)|={at0:.2e}")

    rng = np.random.default_rng(42)
    lin = Linearization(np.array([0.4, -1.2, 0.9]))
    worst = 0.0
    for theta in rng.uniform(-1e6, 1e6, 200):
        from .rotations import reduce_phase
        m = rot_s0(reduce_phase(theta), lin, +1)
        worst = max(worst, float(np.max(np.abs(m @ m.T - np.eye(3)))))
    report("rotation orthogonality", worst <= 1e-13, f"worst={worst:.2e}")

    n = 64
    g = TauGridFunction(np.cos(3 * tau_nodes(n))[:, None] * rng.standard_normal(6))
    resid = float(np.max(np.abs(op_L(op_A(g)).values
                                - (g.values - op_Pi(g).u_bar))))
    report("L A = I - Pi", resid <= 1e-12, f"resid={resid:.2e}")

    fld = builtin_general_field()
    x0 = np.array(_DEFAULT_X0)
    v0 = np.array(_DEFAULT_V0)
    lin2 = Linearization.from_field(fld, x0)
    u0 = initial_data(4, x0, v0, lin2, fld, 1e-2, n)
    node = float(np.max(np.abs(u0.values[n // 2] - np.concatenate([x0, 1e-2 * v0]))))
    report("initial data node constraint", node <= 1e-14, f"resid={node:.2e}")

    return ok


# ---------------------------------------------------------------------------
# CLI


def _cmd_run(args) -> int:
    cfg = config_from_toml(args.config)
    rows = run_experiment(cfg)
    write_csv(rows, args.out)
    failed = sum(1 for r in rows if r.error)
    print(f"wrote {len(rows)} rows to {args.out}"
          + (f" ({failed} failed rows)" if failed else ""))
    return 0


def _cmd_orders(args) -> int:
    if args.sweep == "eps":
        eps = tuple(args.eps) if args.eps else (1e-1, 10**-1.5, 1e-2, 10**-2.5, 1e-3)
        h = (args.h or 1 / 40,)
        cfg = ExperimentConfig("order_vs_eps", field=args.field,
                               methods=(args.method,), eps=eps, h=h)
        variable = "eps"
    else:
        eps = (args.eps[0] if args.eps else 1e-2,)
        h = tuple(args.hs) if args.hs else (1 / 10, 1 / 20, 1 / 40, 1 / 80, 1 / 160)
        cfg = ExperimentConfig("order_vs_h", field=args.field,
                               methods=(args.method,), eps=eps, h=h)
        variable = "h"
    rows = run_experiment(cfg)
    for r in rows:
        status = r.error if r.error else f"err={r.err:.6e}"
        print(f"{r.method} eps={r.eps:g} h={r.h:g}: {status}")
    try:
        slope = slope_from_rows(rows, variable)
        print(f"fitted slope vs {variable}: {slope:.3f}")
    except ValueError as exc:
        print(f"slope unavailable: {exc}")
        return 1
    if args.out:
        write_csv(rows, args.out)
        print(f"wrote {args.out}")
    return 0


def _cmd_check(args) -> int:
    return 0 if check_suite() else 1


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="cpd",
                                description="two-scale CPD experiment runner")
    sub = p.add_subparsers(dest="cmd", required=True)

    pr = sub.add_parser("run", help="run an experiment from a TOML config")
    pr.add_argument("--config", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(fn=_cmd_run)

    po = sub.add_parser("orders", help="canned convergence sweep")
    po.add_argument("--method", default="mo2",
                    choices=sorted(TWO_SCALE_METHODS) + list(BASELINE_METHODS))
    po.add_argument("--field", default="general", choices=["general", "maximal"])
    po.add_argument("--sweep", default="h", choices=["h", "eps"])
    po.add_argument("--eps", type=float, nargs="*", default=None)
    po.add_argument("--h", type=float, default=None,
                    help="fixed h for eps sweeps")
    po.add_argument("--hs", type=float, nargs="*", default=None,
                    help="h ladder for h sweeps")
    po.add_argument("--out", default=None)
    po.set_defaults(fn=_cmd_orders)

    pc = sub.add_parser("check", help="psi-condition and operator identity suite")
    pc.set_defaults(fn=_cmd_check)

    args = p.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
