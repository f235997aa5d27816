import numpy as np
import pytest

from cpd.rotations import Linearization
from cpd.transform import (ParticleState, from_filtered, from_scaled,
                           reconstruct_xv, to_filtered, to_scaled)


@pytest.fixture
def lin():
    return Linearization(np.array([0.4, -1.2, 0.9]))


def test_to_scaled_examples():
    s = ParticleState(0.0, np.zeros(3), np.zeros(3))
    x, w = to_scaled(s, 1e-2)
    assert np.array_equal(w, np.zeros(3))
    s = ParticleState(0.0, np.zeros(3), np.array([2 / 5, 2 / 3, 1.0]))
    x, w = to_scaled(s, 1e-2)
    assert np.allclose(w, np.array([4e-3, (2 / 3) * 1e-2, 1e-2]), atol=1e-18)


def test_scaled_round_trip_power_of_two():
    eps = 2.0**-7
    s = ParticleState(0.3, np.array([0.1, 0.2, 0.3]), np.array([0.4, -0.5, 0.6]))
    x, w = to_scaled(s, eps)
    back = from_scaled(s.t, x, w, eps)
    assert np.array_equal(back.x, s.x) and np.array_equal(back.v, s.v)


def test_filter_identity_at_t0(lin):
    x = np.array([0.1, 0.2, 0.3])
    w = np.array([0.4, -0.5, 0.6])
    f = to_filtered(0.0, x, w, lin, 1e-2)
    assert np.array_equal(f.q, x) and np.array_equal(f.p, w)


def test_filter_round_trip(lin):
    rng = np.random.default_rng(0)
    for _ in range(30):
        t = float(rng.uniform(0, 1))
        eps = 10.0 ** rng.uniform(-4, -1)
        x, w = rng.standard_normal(3), rng.standard_normal(3)
        f = to_filtered(t, x, w, lin, eps)
        x2, w2 = from_filtered(t, f.q, f.p, lin, eps)
        assert np.max(np.abs(x2 - x)) <= 1e-13
        assert np.max(np.abs(w2 - w)) <= 1e-13


def test_filter_with_zero_w(lin):
    rng = np.random.default_rng(1)
    x = rng.standard_normal(3)
    f = to_filtered(0.77, x, np.zeros(3), lin, 1e-3)
    assert np.allclose(f.q, x) and np.allclose(f.p, 0.0)


def test_filter_isometry_on_w(lin):
    rng = np.random.default_rng(2)
    for _ in range(30):
        t, eps = float(rng.uniform(0, 1)), 10.0 ** rng.uniform(-4, -1)
        w = rng.standard_normal(3)
        f = to_filtered(t, rng.standard_normal(3), w, lin, eps)
        assert abs(np.linalg.norm(f.p) - np.linalg.norm(w)) <= 1e-13


def test_reconstruct_examples(lin):
    x0 = np.array([0.3, 0.1, -0.2])
    v0 = np.array([1.0, -2.0, 0.5])
    eps = 1e-2
    s = reconstruct_xv(x0, eps * v0, 0.0, lin, eps)
    assert np.allclose(s.x, x0) and np.allclose(s.v, v0)
    s = reconstruct_xv(x0, np.zeros(3), 0.4, lin, eps)
    assert np.allclose(s.x, x0) and np.allclose(s.v, 0.0)
    rng = np.random.default_rng(3)
    for _ in range(20):
        q, p = rng.standard_normal(3), rng.standard_normal(3)
        s = reconstruct_xv(q, p, float(rng.uniform(0, 1)), lin, eps)
        assert abs(eps * np.linalg.norm(s.v) - np.linalg.norm(p)) <= 1e-13


def test_filtered_variables_constant_for_uniform_field(lin):
    """Exact flow with F = 0 keeps (q, p) fixed (v0 perpendicular to B0)."""
    eps = 1e-2
    B0 = lin.B0_vec
    v0 = np.cross(lin.axis, np.array([1.0, 0.0, 0.0]))
    v0 /= np.linalg.norm(v0)
    x = np.array([0.3, 0.1, -0.2])
    w = eps * v0

    # RK4 on dx/dt = w/eps, dw/dt = hat(B0) w / eps, fine steps over [0, 1]
    n = 20000
    h = 1.0 / n
    q0, p0 = x.copy(), w.copy()
    drift = 0.0
    for i in range(n):
        def rhs(xw):
            return np.concatenate([xw[3:] / eps, np.cross(xw[3:], B0) / eps])
        y = np.concatenate([x, w])
        k1 = rhs(y)
        k2 = rhs(y + h / 2 * k1)
        k3 = rhs(y + h / 2 * k2)
        k4 = rhs(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        x, w = y[:3], y[3:]
        if (i + 1) % 2000 == 0:
            f = to_filtered((i + 1) * h, x, w, lin, eps)
            drift = max(drift, float(np.max(np.abs(f.q - q0))),
                        float(np.max(np.abs(f.p - p0))))
    assert drift <= 1e-10
