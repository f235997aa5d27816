"""Rotation family generated by the frozen field B0 and reduced-phase handling.

The closed forms are 2*pi-periodic in the reduced phase ``theta = b*t/eps``
(b = |B0|), which is the argument convention used throughout the package:
every tau/phase dependence is exactly 2*pi-periodic for arbitrary b and the
two-scale transport carries the factor b/eps instead.

``s1`` resolves the 0/0 ambiguity of (exp(theta K) - I)/K on the axis of B0
to zero (pseudo-inverse resolution).  This keeps the parallel degree of
freedom out of the oscillatory filter; the slow parallel drift is carried by
an explicit linear coupling term in the two-scale system (see twoscale /
spectral).  Identities such as ``hat(B0) @ s1 == s0 - I`` and
``s1(-th) @ s0(th) == -s1(th)`` hold exactly in either resolution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import FieldModel, hat

_TWO_PI = 2.0 * math.pi
# 2*pi split into three non-overlapping doubles for Cody-Waite reduction
_PI2_HI = 6.283185307179586
_PI2_MD = 2.4492935982947064e-16
_PI2_LO = -5.989539619436679e-33


def _two_sum(a, b):
    s = a + b
    t = s - a
    return s, (a - (s - t)) + (b - t)


def _split(a):
    # Veltkamp splitting (no FMA assumed)
    c = 134217729.0 * a  # 2^27 + 1
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def _dd_div(a, b):
    """Double-double quotient a/b for doubles a, b."""
    q1 = a / b
    p, e = _two_prod(q1, b)
    r = ((a - p) - e) / b
    return q1, r


def reduce_phase(hi: float, lo: float = 0.0) -> float:
    """Reduce the double-double phase hi+lo modulo 2*pi into [-pi, pi)."""
    n = float(round((hi + lo) / _TWO_PI))
    if n == 0.0:
        r = hi + lo
    else:
        # n * 2pi in double-double; the leading product must be exact, so it
        # goes through two_prod rather than a plain multiply
        p, e = _two_prod(n, _PI2_HI)
        r = ((hi - p) + (lo - e - n * _PI2_MD)) - n * _PI2_LO
    # a single correction pass is enough after the compensated reduction
    if r >= math.pi:
        r -= _TWO_PI
    elif r < -math.pi:
        r += _TWO_PI
    return r


@dataclass(frozen=True)
class Linearization:
    """Frozen-field data at the initial position: B0, b = |B0|, hat(B0)."""

    B0_vec: np.ndarray
    b: float = field(init=False)
    B0_hat: np.ndarray = field(init=False)
    B0_hat_sq: np.ndarray = field(init=False)
    axis: np.ndarray = field(init=False)

    def __post_init__(self):
        B0 = np.asarray(self.B0_vec, dtype=float).copy()
        b = float(np.linalg.norm(B0))
        if b <= 0.0:
            raise ValueError("zero initial magnetic field: linearization undefined")
        object.__setattr__(self, "B0_vec", B0)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "B0_hat", hat(B0))
        object.__setattr__(self, "B0_hat_sq", hat(B0) @ hat(B0))
        object.__setattr__(self, "axis", B0 / b)

    @classmethod
    def from_field(cls, fld: FieldModel, x0) -> "Linearization":
        return cls(fld.B(x0))

    def phase(self, t: float, eps: float) -> float:
        """Reduced phase theta = b*t/eps mod 2*pi, in [-pi, pi).

        Computed through a double-double product so that huge t/eps ratios
        keep absolute phase accuracy near machine precision.
        """
        chi, clo = _dd_div(self.b, eps)
        p1, e1 = _two_prod(t, chi)
        lo = e1 + t * clo
        return reduce_phase(p1, lo)


def s0(theta: float, lin: Linearization, sign: int = 1) -> np.ndarray:
    """exp(sign * (theta/b) * hat(B0)): rotation by the reduced phase theta."""
    sn = sign * math.sin(theta) / lin.b
    cs = (1.0 - math.cos(theta)) / lin.b**2
    return np.eye(3) + sn * lin.B0_hat + cs * lin.B0_hat_sq


def s1(theta: float, lin: Linearization, sign: int = 1) -> np.ndarray:
    """(s0(theta, sign) - I) / hat(B0), pseudo-inverse resolution on the axis.

    Equals sign*sin(theta)/b * (I - kk^T) + (1-cos(theta))/b^2 * hat(B0).
    """
    k = lin.axis
    sn = sign * math.sin(theta) / lin.b
    cs = (1.0 - math.cos(theta)) / lin.b**2
    return sn * (np.eye(3) - np.outer(k, k)) + cs * lin.B0_hat


def apply_s0(theta, lin: Linearization, sign, vecs):
    """Batched s0 action: ``vecs`` (n,3) rotated at per-row phases ``theta`` (n,)."""
    theta = np.asarray(theta, dtype=float)[:, None]
    vecs = np.asarray(vecs, dtype=float)
    vb = np.cross(vecs, lin.B0_vec)          # hat(B0) v = v x B0
    vbb = np.cross(vb, lin.B0_vec)
    return vecs + sign * np.sin(theta) / lin.b * vb \
        + (1.0 - np.cos(theta)) / lin.b**2 * vbb


def apply_s1(theta, lin: Linearization, sign, vecs):
    """Batched s1 action with the pseudo-inverse axis resolution."""
    theta = np.asarray(theta, dtype=float)[:, None]
    vecs = np.asarray(vecs, dtype=float)
    vperp = vecs - np.outer(vecs @ lin.axis, lin.axis)
    vb = np.cross(vecs, lin.B0_vec)
    return sign * np.sin(theta) / lin.b * vperp \
        + (1.0 - np.cos(theta)) / lin.b**2 * vb
