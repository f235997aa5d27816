"""Electric/magnetic field models, their derivatives, and the hat operator.

A :class:`FieldModel` bundles ``B(x)`` and ``E(x)`` with optional analytic
derivatives.  Derivatives that are not supplied fall back to central finite
differences, so user-defined fields only need the two evaluators.  The two
built-in benchmark fields carry full analytic Jacobians and Hessians.

All models here are static (no time dependence) and pure; a FieldModel is
immutable after construction and safe to share between workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import AxisSingularityError

# central-difference steps: eps_mach^(1/3) for first, eps_mach^(1/4) for
# second derivatives, scaled by max(1, |x|)
_FD1 = float(np.finfo(float).eps) ** (1.0 / 3.0)
_FD2 = float(np.finfo(float).eps) ** 0.25

AXIS_RADIUS = 1e-12


def hat(b):
    """Skew matrix of the cross product with ``b``: ``hat(b) @ v == cross(v, b)``.

    Row layout: ((0, b3, -b2), (-b3, 0, b1), (b2, -b1, 0)).
    """
    b1, b2, b3 = b
    return np.array([[0.0, b3, -b2],
                     [-b3, 0.0, b1],
                     [b2, -b1, 0.0]])


def fd_jacobian(f, x):
    """Central-difference Jacobian of ``f: R^3 -> R^k`` at ``x``, shape (k, 3)."""
    x = np.asarray(x, dtype=float)
    d = _FD1 * max(1.0, float(np.linalg.norm(x)))
    cols = []
    for j in range(3):
        e = np.zeros(3)
        e[j] = d
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * d))
    return np.stack(cols, axis=-1)


def fd_hessian(f, x):
    """Central-difference component Hessians of ``f: R^3 -> R^k`` at ``x``.

    Returns shape (k, 3, 3); entry [i, j, l] is d^2 f_i / dx_j dx_l.
    """
    x = np.asarray(x, dtype=float)
    d = _FD2 * max(1.0, float(np.linalg.norm(x)))
    f0 = np.asarray(f(x), dtype=float)
    k = f0.shape[0]
    H = np.empty((k, 3, 3))
    for j in range(3):
        ej = np.zeros(3)
        ej[j] = d
        H[:, j, j] = (np.asarray(f(x + ej)) - 2 * f0 + np.asarray(f(x - ej))) / d**2
        for l in range(j + 1, 3):
            el = np.zeros(3)
            el[l] = d
            m = (np.asarray(f(x + ej + el)) - np.asarray(f(x + ej - el))
                 - np.asarray(f(x - ej + el)) + np.asarray(f(x - ej - el))) / (4 * d**2)
            H[:, j, l] = m
            H[:, l, j] = m
    return H


@dataclass(frozen=True)
class FieldModel:
    """The pair (B, E) with optional analytic derivatives.

    ``eval_B``/``eval_E`` map a position (3,) to a field vector (3,); batched
    variants accept (n, 3) and return (n, 3).  Missing derivative callables
    are served by finite differences.
    """

    eval_B: Callable[[np.ndarray], np.ndarray]
    eval_E: Callable[[np.ndarray], np.ndarray]
    jac_B: Optional[Callable] = None
    jac_E: Optional[Callable] = None
    hess_B: Optional[Callable] = None
    hess_E: Optional[Callable] = None
    # optional batched evaluators, (n,3) -> (n,3) / (n,3,3) / (n,3,3,3)
    eval_B_many: Optional[Callable] = None
    eval_E_many: Optional[Callable] = None
    jac_B_many: Optional[Callable] = None
    jac_E_many: Optional[Callable] = None
    hess_B_many: Optional[Callable] = None
    hess_E_many: Optional[Callable] = None
    # optional scalar fast paths used by the baseline integrators
    eval_B_s: Optional[Callable] = None
    eval_E_s: Optional[Callable] = None
    name: str = "custom"

    def B(self, x):
        return self.eval_B(np.asarray(x, dtype=float))

    def E(self, x):
        return self.eval_E(np.asarray(x, dtype=float))

    def B_many(self, xs):
        if self.eval_B_many is not None:
            return self.eval_B_many(xs)
        return np.stack([self.eval_B(x) for x in xs])

    def E_many(self, xs):
        if self.eval_E_many is not None:
            return self.eval_E_many(xs)
        return np.stack([self.eval_E(x) for x in xs])

    def dB(self, x):
        if self.jac_B is not None:
            return self.jac_B(np.asarray(x, dtype=float))
        return fd_jacobian(self.eval_B, x)

    def dE(self, x):
        if self.jac_E is not None:
            return self.jac_E(np.asarray(x, dtype=float))
        return fd_jacobian(self.eval_E, x)

    def dB_many(self, xs):
        if self.jac_B_many is not None:
            return self.jac_B_many(xs)
        return np.stack([self.dB(x) for x in xs])

    def dE_many(self, xs):
        if self.jac_E_many is not None:
            return self.jac_E_many(xs)
        return np.stack([self.dE(x) for x in xs])

    def d2B(self, x):
        if self.hess_B is not None:
            return self.hess_B(np.asarray(x, dtype=float))
        return fd_hessian(self.eval_B, x)

    def d2E(self, x):
        if self.hess_E is not None:
            return self.hess_E(np.asarray(x, dtype=float))
        return fd_hessian(self.eval_E, x)

    def d2B_many(self, xs):
        if self.hess_B_many is not None:
            return self.hess_B_many(xs)
        return np.stack([self.d2B(x) for x in xs])

    def d2E_many(self, xs):
        if self.hess_E_many is not None:
            return self.hess_E_many(xs)
        return np.stack([self.d2E(x) for x in xs])

    def B_scalar(self, x1, x2, x3):
        if self.eval_B_s is not None:
            return self.eval_B_s(x1, x2, x3)
        b = self.eval_B(np.array([x1, x2, x3]))
        return float(b[0]), float(b[1]), float(b[2])

    def E_scalar(self, x1, x2, x3):
        if self.eval_E_s is not None:
            return self.eval_E_s(x1, x2, x3)
        e = self.eval_E(np.array([x1, x2, x3]))
        return float(e[0]), float(e[1]), float(e[2])


def _coulomb_E(x):
    """E = -grad U for U = (x1^2 + x2^2)^(-1/2); singular on the x3 axis."""
    x = np.asarray(x, dtype=float)
    r2 = x[0] * x[0] + x[1] * x[1]
    if r2 < AXIS_RADIUS**2:
        raise AxisSingularityError(f"E undefined near axis, rho={math.sqrt(r2):.3e}")
    s = r2**-1.5
    return np.array([x[0] * s, x[1] * s, 0.0])


def _coulomb_E_many(xs):
    xs = np.asarray(xs, dtype=float)
    r2 = xs[:, 0] ** 2 + xs[:, 1] ** 2
    if np.any(r2 < AXIS_RADIUS**2):
        raise AxisSingularityError("E undefined near axis (batched evaluation)")
    s = r2**-1.5
    out = np.zeros_like(xs)
    out[:, 0] = xs[:, 0] * s
    out[:, 1] = xs[:, 1] * s
    return out


def _coulomb_E_scalar(x1, x2, x3):
    r2 = x1 * x1 + x2 * x2
    if r2 < AXIS_RADIUS**2:
        raise AxisSingularityError(f"E undefined near axis, rho^2={r2:.3e}")
    s = r2**-1.5
    return x1 * s, x2 * s, 0.0


def _coulomb_jac_E(x):
    x = np.asarray(x, dtype=float)
    r2 = x[0] * x[0] + x[1] * x[1]
    if r2 < AXIS_RADIUS**2:
        raise AxisSingularityError("E Jacobian undefined near axis")
    r3, r5 = r2**-1.5, r2**-2.5
    J = np.zeros((3, 3))
    J[0, 0] = r3 - 3 * x[0] ** 2 * r5
    J[0, 1] = -3 * x[0] * x[1] * r5
    J[1, 0] = J[0, 1]
    J[1, 1] = r3 - 3 * x[1] ** 2 * r5
    return J


def _coulomb_jac_E_many(xs):
    xs = np.asarray(xs, dtype=float)
    r2 = xs[:, 0] ** 2 + xs[:, 1] ** 2
    if np.any(r2 < AXIS_RADIUS**2):
        raise AxisSingularityError("E Jacobian undefined near axis (batched)")
    r3, r5 = r2**-1.5, r2**-2.5
    J = np.zeros((len(xs), 3, 3))
    J[:, 0, 0] = r3 - 3 * xs[:, 0] ** 2 * r5
    J[:, 0, 1] = -3 * xs[:, 0] * xs[:, 1] * r5
    J[:, 1, 0] = J[:, 0, 1]
    J[:, 1, 1] = r3 - 3 * xs[:, 1] ** 2 * r5
    return J


def _coulomb_hess_E(x):
    x = np.asarray(x, dtype=float)
    r2 = x[0] * x[0] + x[1] * x[1]
    if r2 < AXIS_RADIUS**2:
        raise AxisSingularityError("E Hessian undefined near axis")
    r5, r7 = r2**-2.5, r2**-3.5
    x1, x2 = x[0], x[1]
    H = np.zeros((3, 3, 3))
    # component E1 = x1 (x1^2+x2^2)^(-3/2)
    H[0, 0, 0] = -9 * x1 * r5 + 15 * x1**3 * r7
    H[0, 0, 1] = H[0, 1, 0] = -3 * x2 * r5 + 15 * x1**2 * x2 * r7
    H[0, 1, 1] = -3 * x1 * r5 + 15 * x1 * x2**2 * r7
    # component E2 = x2 (x1^2+x2^2)^(-3/2), symmetric under 1 <-> 2
    H[1, 1, 1] = -9 * x2 * r5 + 15 * x2**3 * r7
    H[1, 0, 1] = H[1, 1, 0] = -3 * x1 * r5 + 15 * x1 * x2**2 * r7
    H[1, 0, 0] = -3 * x2 * r5 + 15 * x1**2 * x2 * r7
    return H


def _coulomb_hess_E_many(xs):
    return np.stack([_coulomb_hess_E(x) for x in xs])


def _make_trig_B(scale: float, name: str) -> FieldModel:
    """B(x) = (cos(s x2), 1 + sin(s x3), cos(s x1)) with scale s (1 or eps)."""
    s = float(scale)

    def eval_B(x):
        return np.array([math.cos(s * x[1]), 1.0 + math.sin(s * x[2]),
                         math.cos(s * x[0])])

    def eval_B_many(xs):
        xs = np.asarray(xs, dtype=float)
        out = np.empty_like(xs)
        out[:, 0] = np.cos(s * xs[:, 1])
        out[:, 1] = 1.0 + np.sin(s * xs[:, 2])
        out[:, 2] = np.cos(s * xs[:, 0])
        return out

    def eval_B_s(x1, x2, x3):
        return math.cos(s * x2), 1.0 + math.sin(s * x3), math.cos(s * x1)

    def jac_B(x):
        J = np.zeros((3, 3))
        J[0, 1] = -s * math.sin(s * x[1])
        J[1, 2] = s * math.cos(s * x[2])
        J[2, 0] = -s * math.sin(s * x[0])
        return J

    def jac_B_many(xs):
        xs = np.asarray(xs, dtype=float)
        J = np.zeros((len(xs), 3, 3))
        J[:, 0, 1] = -s * np.sin(s * xs[:, 1])
        J[:, 1, 2] = s * np.cos(s * xs[:, 2])
        J[:, 2, 0] = -s * np.sin(s * xs[:, 0])
        return J

    def hess_B(x):
        H = np.zeros((3, 3, 3))
        H[0, 1, 1] = -s * s * math.cos(s * x[1])
        H[1, 2, 2] = -s * s * math.sin(s * x[2])
        H[2, 0, 0] = -s * s * math.cos(s * x[0])
        return H

    def hess_B_many(xs):
        xs = np.asarray(xs, dtype=float)
        H = np.zeros((len(xs), 3, 3, 3))
        H[:, 0, 1, 1] = -s * s * np.cos(s * xs[:, 1])
        H[:, 1, 2, 2] = -s * s * np.sin(s * xs[:, 2])
        H[:, 2, 0, 0] = -s * s * np.cos(s * xs[:, 0])
        return H

    return FieldModel(
        eval_B=eval_B, eval_E=_coulomb_E,
        jac_B=jac_B, jac_E=_coulomb_jac_E,
        hess_B=hess_B, hess_E=_coulomb_hess_E,
        eval_B_many=eval_B_many, eval_E_many=_coulomb_E_many,
        jac_B_many=jac_B_many, jac_E_many=_coulomb_jac_E_many,
        hess_B_many=hess_B_many, hess_E_many=_coulomb_hess_E_many,
        eval_B_s=eval_B_s, eval_E_s=_coulomb_E_scalar,
        name=name,
    )


def builtin_general_field() -> FieldModel:
    """B(x) = (cos x2, 1 + sin x3, cos x1); E = -grad (x1^2+x2^2)^(-1/2)."""
    return _make_trig_B(1.0, "general")


def builtin_maximal_ordering_field(eps: float) -> FieldModel:
    """Maximal ordering variant B(eps x); same E as the general field."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return _make_trig_B(eps, "maximal")


def uniform_field(B0, name: str = "uniform") -> FieldModel:
    """Constant magnetic field with E = 0 (exactness test model)."""
    B0 = np.asarray(B0, dtype=float).copy()
    zeros3 = np.zeros(3)
    zeros33 = np.zeros((3, 3))
    zeros333 = np.zeros((3, 3, 3))
    return FieldModel(
        eval_B=lambda x: B0.copy(),
        eval_E=lambda x: zeros3.copy(),
        jac_B=lambda x: zeros33.copy(),
        jac_E=lambda x: zeros33.copy(),
        hess_B=lambda x: zeros333.copy(),
        hess_E=lambda x: zeros333.copy(),
        eval_B_many=lambda xs: np.broadcast_to(B0, (len(xs), 3)).copy(),
        eval_E_many=lambda xs: np.zeros((len(xs), 3)),
        jac_B_many=lambda xs: np.zeros((len(xs), 3, 3)),
        jac_E_many=lambda xs: np.zeros((len(xs), 3, 3)),
        hess_B_many=lambda xs: np.zeros((len(xs), 3, 3, 3)),
        hess_E_many=lambda xs: np.zeros((len(xs), 3, 3, 3)),
        eval_B_s=lambda x1, x2, x3: (B0[0], B0[1], B0[2]),
        eval_E_s=lambda x1, x2, x3: (0.0, 0.0, 0.0),
        name=name,
    )


def resolve_field(field_id: str, eps: float) -> FieldModel:
    """Field selection by string id: "general" or "maximal"."""
    if field_id == "general":
        return builtin_general_field()
    if field_id == "maximal":
        return builtin_maximal_ordering_field(eps)
    raise ValueError(f"unknown field id {field_id!r} (expected 'general' or 'maximal')")
