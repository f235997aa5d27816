import math

import numpy as np
import pytest
from scipy.linalg import expm

from cpd.fields import hat
from cpd.rotations import (Linearization, apply_s0, apply_s1, reduce_phase,
                           s0, s1)


@pytest.fixture
def lin():
    return Linearization(np.array([0.4, -1.2, 0.9]))


def test_zero_field_rejected():
    with pytest.raises(ValueError):
        Linearization(np.zeros(3))


def test_linearization_caches(lin):
    assert np.allclose(lin.B0_hat, hat(lin.B0_vec))
    assert np.allclose(lin.B0_hat_sq, lin.B0_hat @ lin.B0_hat)
    assert math.isclose(np.linalg.norm(lin.axis), 1.0, rel_tol=1e-15)


def test_reduce_phase_range_and_consistency():
    rng = np.random.default_rng(0)
    for x in rng.uniform(-1e6, 1e6, 500):
        r = reduce_phase(x)
        assert -math.pi <= r < math.pi
        # sin/cos must agree with the unreduced argument to ~|x|*eps_mach
        assert abs(math.sin(r) - math.sin(math.fmod(x, 2 * math.pi))) < 1e-9


def test_phase_against_mpmath(lin):
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    rng = np.random.default_rng(1)
    for _ in range(200):
        t = float(rng.uniform(0, 1))
        eps = 10.0 ** rng.uniform(-6, -1)
        got = lin.phase(t, eps)
        ref = mp.mpf(lin.b) * mp.mpf(t) / mp.mpf(eps)
        ref = float(mp.fmod(ref + mp.pi, 2 * mp.pi) - mp.pi)
        d = abs(got - ref)
        assert min(d, abs(d - 2 * math.pi)) < 1e-12


def test_s0_at_zero_is_identity(lin):
    assert np.array_equal(s0(0.0, lin, +1), np.eye(3))


def test_s0_group_inverse(lin):
    rng = np.random.default_rng(2)
    for th in rng.uniform(-np.pi, np.pi, 50):
        assert np.max(np.abs(s0(th, lin, +1) @ s0(th, lin, -1) - np.eye(3))) <= 1e-13


def test_s0_matches_matrix_exponential():
    # B0 = (0,0,2): rotation about z; phase pi/3 reduces the angle by 1/b
    lin = Linearization(np.array([0.0, 0.0, 2.0]))
    th = np.pi / 3
    for sign in (+1, -1):
        ref = expm(sign * (th / lin.b) * lin.B0_hat)
        assert np.max(np.abs(s0(th, lin, sign) - ref)) <= 1e-12
    rng = np.random.default_rng(3)
    lin2 = Linearization(rng.standard_normal(3))
    for th in rng.uniform(-10, 10, 20):
        ref = expm((th / lin2.b) * lin2.B0_hat)
        assert np.max(np.abs(s0(th, lin2, +1) - ref)) <= 1e-12


def test_s1_at_zero_and_defining_relation(lin):
    assert np.array_equal(s1(0.0, lin, +1), np.zeros((3, 3)))
    rng = np.random.default_rng(4)
    for th in rng.uniform(-20, 20, 50):
        lhs = lin.B0_hat @ s1(th, lin, +1)
        rhs = s0(th, lin, +1) - np.eye(3)
        assert np.max(np.abs(lhs - rhs)) <= 1e-13


def test_s1_at_pi_unit_axis():
    lin = Linearization(np.array([0.0, 0.0, 1.0]))
    # sin(pi) = 0 kills the identity part; (1 - cos(pi))/b^2 = 2
    assert np.allclose(s1(np.pi, lin, +1), 2.0 * lin.B0_hat, atol=1e-15)


def test_s1_inversion_identity(lin):
    # s1(-th) s0(th) = -s1(th): the filter and its inverse are consistent
    rng = np.random.default_rng(5)
    for th in rng.uniform(-20, 20, 50):
        lhs = s1(th, lin, -1) @ s0(th, lin, +1)
        assert np.max(np.abs(lhs + s1(th, lin, +1))) <= 1e-14


def test_orthogonality_large_phases(lin):
    rng = np.random.default_rng(6)
    worst = 0.0
    for raw in rng.uniform(-1e6, 1e6, 1000):
        m = s0(reduce_phase(raw), lin, +1)
        worst = max(worst, float(np.max(np.abs(m @ m.T - np.eye(3)))))
    assert worst <= 1e-13


def test_periodicity(lin):
    rng = np.random.default_rng(7)
    for th in rng.uniform(-10, 10, 100):
        assert np.max(np.abs(s0(th, lin, +1)
                             - s0(reduce_phase(th + 2 * np.pi), lin, +1))) <= 1e-12
        assert np.max(np.abs(s1(th, lin, +1)
                             - s1(reduce_phase(th + 2 * np.pi), lin, +1))) <= 1e-12


def test_determinant_one(lin):
    rng = np.random.default_rng(8)
    for th in rng.uniform(-30, 30, 100):
        assert abs(np.linalg.det(s0(th, lin, +1)) - 1.0) <= 1e-12


def test_batched_appliers_match_matrices(lin):
    rng = np.random.default_rng(9)
    thetas = rng.uniform(-np.pi, np.pi, 16)
    vecs = rng.standard_normal((16, 3))
    for sign in (+1, -1):
        ref0 = np.stack([s0(t, lin, sign) @ v for t, v in zip(thetas, vecs)])
        ref1 = np.stack([s1(t, lin, sign) @ v for t, v in zip(thetas, vecs)])
        assert np.max(np.abs(apply_s0(thetas, lin, sign, vecs) - ref0)) <= 1e-14
        assert np.max(np.abs(apply_s1(thetas, lin, sign, vecs) - ref1)) <= 1e-14
