"""Reference and comparison integrators on the original (x, v) system.

The steppers advance dx/dt = v, dv/dt = v x B(x)/eps + E(x) directly.  The
public single-step functions take and return ParticleState; the harness uses
`integrate_baseline`, whose inner loops run on plain floats (the per-step
numpy overhead would otherwise dominate the timing comparisons).

`reference_solution` is the truth oracle for all error measurements: fixed
step RK4 under ReferencePolicy with one Richardson halving; the returned
endpoint is the extrapolated one and the estimate is the halving difference
scaled by 1/15.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FixedPointError, StepBudgetError
from .fields import FieldModel
from .rotations import Linearization
from .transform import ParticleState

BASELINE_IDS = ("boris", "rk2", "cn", "rk4ref")


@dataclass(frozen=True)
class ReferencePolicy:
    """Step rule and budget for the RK4 reference oracle.

    h_ref = min(eps/200, h_cap) guarantees at least ~200 steps per
    gyroperiod; the hard cap bounds the total work.
    """

    eps_divisor: float = 200.0
    h_cap: float = 1e-4
    max_steps: int = 50_000_000

    def h_ref(self, eps: float, T: float) -> float:
        target = min(eps / self.eps_divisor, self.h_cap)
        n = int(math.ceil(T / target))
        return T / n


def _rhs(x1, x2, x3, v1, v2, v3, field: FieldModel, eps: float):
    b1, b2, b3 = field.B_scalar(x1, x2, x3)
    e1, e2, e3 = field.E_scalar(x1, x2, x3)
    b1 /= eps
    b2 /= eps
    b3 /= eps
    return (v1, v2, v3,
            v2 * b3 - v3 * b2 + e1,
            v3 * b1 - v1 * b3 + e2,
            v1 * b2 - v2 * b1 + e3)


def _rk4_step_s(x1, x2, x3, v1, v2, v3, h, field, eps):
    k1 = _rhs(x1, x2, x3, v1, v2, v3, field, eps)
    k2 = _rhs(x1 + 0.5 * h * k1[0], x2 + 0.5 * h * k1[1], x3 + 0.5 * h * k1[2],
              v1 + 0.5 * h * k1[3], v2 + 0.5 * h * k1[4], v3 + 0.5 * h * k1[5],
              field, eps)
    k3 = _rhs(x1 + 0.5 * h * k2[0], x2 + 0.5 * h * k2[1], x3 + 0.5 * h * k2[2],
              v1 + 0.5 * h * k2[3], v2 + 0.5 * h * k2[4], v3 + 0.5 * h * k2[5],
              field, eps)
    k4 = _rhs(x1 + h * k3[0], x2 + h * k3[1], x3 + h * k3[2],
              v1 + h * k3[3], v2 + h * k3[4], v3 + h * k3[5], field, eps)
    c = h / 6.0
    return (x1 + c * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            x2 + c * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
            x3 + c * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
            v1 + c * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]),
            v2 + c * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4]),
            v3 + c * (k1[5] + 2 * k2[5] + 2 * k3[5] + k4[5]))


def _rk2_step_s(x1, x2, x3, v1, v2, v3, h, field, eps):
    # explicit midpoint
    k1 = _rhs(x1, x2, x3, v1, v2, v3, field, eps)
    k2 = _rhs(x1 + 0.5 * h * k1[0], x2 + 0.5 * h * k1[1], x3 + 0.5 * h * k1[2],
              v1 + 0.5 * h * k1[3], v2 + 0.5 * h * k1[4], v3 + 0.5 * h * k1[5],
              field, eps)
    return (x1 + h * k2[0], x2 + h * k2[1], x3 + h * k2[2],
            v1 + h * k2[3], v2 + h * k2[4], v3 + h * k2[5])


def _boris_step_s(x1, x2, x3, v1, v2, v3, h, field, eps):
    # half electric kick, tan-vector magnetic rotation, half kick, drift;
    # all fields evaluated at the current position
    e1, e2, e3 = field.E_scalar(x1, x2, x3)
    b1, b2, b3 = field.B_scalar(x1, x2, x3)
    c = 0.5 * h / eps
    t1, t2, t3 = c * b1, c * b2, c * b3
    hm = 0.5 * h
    m1, m2, m3 = v1 + hm * e1, v2 + hm * e2, v3 + hm * e3
    # v' = v- + v- x t
    p1 = m1 + m2 * t3 - m3 * t2
    p2 = m2 + m3 * t1 - m1 * t3
    p3 = m3 + m1 * t2 - m2 * t1
    s = 2.0 / (1.0 + t1 * t1 + t2 * t2 + t3 * t3)
    s1v, s2v, s3v = s * t1, s * t2, s * t3
    # v+ = v- + v' x s
    w1 = m1 + p2 * s3v - p3 * s2v
    w2 = m2 + p3 * s1v - p1 * s3v
    w3 = m3 + p1 * s2v - p2 * s1v
    u1, u2, u3 = w1 + hm * e1, w2 + hm * e2, w3 + hm * e3
    return (x1 + h * u1, x2 + h * u2, x3 + h * u3, u1, u2, u3)


def _cn_step_s(x1, x2, x3, v1, v2, v3, h, field, eps, tol, max_iter):
    # implicit midpoint z+ = z + h f((z + z+)/2), solved by fixed point
    y = (x1, x2, x3, v1, v2, v3)
    z = _rk2_step_s(x1, x2, x3, v1, v2, v3, h, field, eps)  # predictor
    for _ in range(max_iter):
        f = _rhs(0.5 * (x1 + z[0]), 0.5 * (x2 + z[1]), 0.5 * (x3 + z[2]),
                 0.5 * (v1 + z[3]), 0.5 * (v2 + z[4]), 0.5 * (v3 + z[5]),
                 field, eps)
        znew = tuple(y[i] + h * f[i] for i in range(6))
        d = max(abs(znew[i] - z[i]) for i in range(6))
        z = znew
        if d <= tol:
            return z
    raise FixedPointError(
        f"midpoint iteration stalled after {max_iter} iterations (h too large?)")


def boris_step(s: ParticleState, h: float, field: FieldModel, eps: float) -> ParticleState:
    """One Boris push (half kick, rotation, half kick, position update)."""
    out = _boris_step_s(*s.x, *s.v, h, field, eps)
    return ParticleState(s.t + h, np.array(out[:3]), np.array(out[3:]))


def rk2_step(s: ParticleState, h: float, field: FieldModel, eps: float) -> ParticleState:
    """One explicit-midpoint step."""
    out = _rk2_step_s(*s.x, *s.v, h, field, eps)
    return ParticleState(s.t + h, np.array(out[:3]), np.array(out[3:]))


def rk4_step(s: ParticleState, h: float, field: FieldModel, eps: float) -> ParticleState:
    """One classical RK4 step."""
    out = _rk4_step_s(*s.x, *s.v, h, field, eps)
    return ParticleState(s.t + h, np.array(out[:3]), np.array(out[3:]))


def cn_step(s: ParticleState, h: float, field: FieldModel, eps: float,
            tol: float = 1e-12, max_iter: int = 100) -> ParticleState:
    """One Crank-Nicolson (implicit midpoint) step via fixed-point iteration."""
    out = _cn_step_s(*s.x, *s.v, h, field, eps, tol, max_iter)
    return ParticleState(s.t + h, np.array(out[:3]), np.array(out[3:]))


def integrate_baseline(method: str, s: ParticleState, h: float, n_steps: int,
                       field: FieldModel, eps: float,
                       tol: float = 1e-12, max_iter: int = 100) -> ParticleState:
    """March n_steps of the chosen baseline; returns the endpoint."""
    y = (float(s.x[0]), float(s.x[1]), float(s.x[2]),
         float(s.v[0]), float(s.v[1]), float(s.v[2]))
    if method == "boris":
        for _ in range(n_steps):
            y = _boris_step_s(*y, h, field, eps)
    elif method == "rk2":
        for _ in range(n_steps):
            y = _rk2_step_s(*y, h, field, eps)
    elif method in ("rk4", "rk4ref"):
        for _ in range(n_steps):
            y = _rk4_step_s(*y, h, field, eps)
    elif method == "cn":
        for _ in range(n_steps):
            y = _cn_step_s(*y, h, field, eps, tol, max_iter)
    else:
        raise ValueError(f"unknown baseline {method!r}")
    return ParticleState(s.t + n_steps * h, np.array(y[:3]), np.array(y[3:]))


def reference_solution(field: FieldModel, eps: float, T: float, x0, v0,
                       policy: ReferencePolicy = ReferencePolicy()):
    """Richardson-extrapolated RK4 endpoint and its error estimate.

    Returns (ParticleState, estimate).  The estimate is the halving
    difference scaled by 1/15 and expressed in the same units as the global
    error metric (relative x part plus eps-weighted relative v part), so it
    is directly comparable with measured errors; the returned endpoint is
    the extrapolation (16 y_{h/2} - y_h)/15, whose error is one order lower
    than the estimate.
    """
    h = policy.h_ref(eps, T)
    n = int(round(T / h))
    if 3 * n > policy.max_steps:
        raise StepBudgetError(
            f"reference solve needs {3 * n} RK4 steps, budget {policy.max_steps}")
    s0 = ParticleState(0.0, x0, v0)
    y1 = integrate_baseline("rk4", s0, h, n, field, eps)
    y2 = integrate_baseline("rk4", s0, h / 2, 2 * n, field, eps)
    dx = float(np.linalg.norm(y1.x - y2.x)) / max(float(np.linalg.norm(y2.x)), 1e-300)
    dv = float(np.linalg.norm(y1.v - y2.v)) / max(float(np.linalg.norm(y2.v)), 1e-300)
    est = (dx + eps * dv) / 15.0
    x = (16.0 * y2.x - y1.x) / 15.0
    v = (16.0 * y2.v - y1.v) / 15.0
    return ParticleState(T, x, v), est


def energy(field: FieldModel, s: ParticleState) -> float:
    """H = |v|^2/2 + U(x) with U = (x1^2 + x2^2)^(-1/2) (built-in potential).

    The magnetic force does no work, so the reference trajectory conserves H;
    used as a validity gate on the oracle.
    """
    rho = math.sqrt(s.x[0] ** 2 + s.x[1] ** 2)
    return 0.5 * float(np.dot(s.v, s.v)) + 1.0 / rho


def helix_state(t: float, x0, v0, lin: Linearization, eps: float) -> ParticleState:
    """Exact solution for uniform B = B0, E = 0.

    x(t) = x0 + t (k.v0) k + (eps/b) [sin(th) v_perp + (1-cos(th))/b (v0 x B0)],
    v(t) = s0(th) v0, with the reduced phase th = b t / eps.
    """
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    th = lin.phase(t, eps)
    k = lin.axis
    vpar = float(v0 @ k)
    vperp = v0 - vpar * k
    vxB = np.cross(v0, lin.B0_vec)
    x = x0 + t * vpar * k + (eps / lin.b) * (
        math.sin(th) * vperp + (1.0 - math.cos(th)) / lin.b * vxB)
    v = v0 + math.sin(th) / lin.b * vxB \
        + (1.0 - math.cos(th)) / lin.b**2 * np.cross(vxB, lin.B0_vec)
    return ParticleState(t, x, v)
