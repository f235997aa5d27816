"""Exact changes of variables: (x, v) <-> (x, w) <-> (q, p), and reconstruction.

The filtered pair is q = x + s1(theta, -1) w, p = s0(theta, -1) w with the
reduced phase theta = b t / eps; the inverse map is x = q + s1(theta, +1) p,
w = s0(theta, +1) p.  Filtering is an isometry on w (s0 is a rotation).
All phase arguments are routed through Linearization.phase so there is a
single source of truth for the delicate t/eps reduction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rotations import Linearization, s0, s1


@dataclass(frozen=True)
class ParticleState:
    """Position/velocity sample of the particle at time t."""

    t: float
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).copy())
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).copy())


@dataclass(frozen=True)
class FilteredState:
    """Filtered variables (q, p) at time t."""

    t: float
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).copy())
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).copy())


def to_scaled(state: ParticleState, eps: float):
    """(x, v) -> (x, w) with w = eps * v."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return state.x.copy(), eps * state.v


def from_scaled(t, x, w, eps: float) -> ParticleState:
    """(x, w) -> ParticleState with v = w / eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return ParticleState(t, x, np.asarray(w, dtype=float) / eps)


def to_filtered(t, x, w, lin: Linearization, eps: float) -> FilteredState:
    theta = lin.phase(t, eps)
    q = np.asarray(x, dtype=float) + s1(theta, lin, -1) @ np.asarray(w, dtype=float)
    p = s0(theta, lin, -1) @ np.asarray(w, dtype=float)
    return FilteredState(t, q, p)


def from_filtered(t, q, p, lin: Linearization, eps: float):
    """Invert the filter: returns (x, w)."""
    theta = lin.phase(t, eps)
    p = np.asarray(p, dtype=float)
    x = np.asarray(q, dtype=float) + s1(theta, lin, +1) @ p
    w = s0(theta, lin, +1) @ p
    return x, w


def reconstruct_xv(q, p, t, lin: Linearization, eps: float) -> ParticleState:
    """Fully discrete reconstruction: x = q + s1 p, w = s0 p, v = w / eps."""
    x, w = from_filtered(t, q, p, lin, eps)
    return ParticleState(t, x, w / eps)
