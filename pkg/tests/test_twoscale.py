import numpy as np
import pytest

from cpd.fields import builtin_general_field, resolve_field, uniform_field
from cpd.rotations import Linearization, s0, s1
from cpd.twoscale import (MeanState, TauGridFunction, big_F, f_tau, f_tau_grid,
                          hess_f_tau, initial_data, jac_f_tau, kappa, op_A,
                          op_L, op_Pi, tau_nodes, drift_coupling_grid)

X0 = np.array([1 / 3, 1 / 4, 1 / 2])
V0 = np.array([2 / 5, 2 / 3, 1.0])


@pytest.fixture(scope="module")
def setup():
    fld = builtin_general_field()
    lin = Linearization.from_field(fld, X0)
    return fld, lin


# --------------------------------------------------------------------- big_F

def test_big_f_at_linearization_point(setup):
    fld, lin = setup
    eps = 1e-3
    w = np.array([1e-3, 0.0, 2e-3])
    assert np.allclose(big_F(X0, w, lin, fld, eps), eps * fld.E(X0), atol=1e-16)


def test_big_f_zero_w(setup):
    fld, lin = setup
    eps = 1e-2
    x = np.array([1.0, 1.0, 1.0])
    assert np.allclose(big_F(x, np.zeros(3), lin, fld, eps), eps * fld.E(x))


def test_big_f_componentwise_oracle(setup):
    """Independent re-implementation straight from the definition."""
    fld, lin = setup
    eps = 1e-3
    x = np.array([1.0, 1.0, 1.0])
    w = np.array([eps, 0.0, 0.0])
    B, B0, E = fld.B(x), lin.B0_vec, fld.E(x)
    d = B - B0
    oracle = np.array([
        (w[1] * d[2] - w[2] * d[1]) / eps + eps * E[0],
        (w[2] * d[0] - w[0] * d[2]) / eps + eps * E[1],
        (w[0] * d[1] - w[1] * d[0]) / eps + eps * E[2],
    ])
    assert np.max(np.abs(big_F(x, w, lin, fld, eps) - oracle)) <= 1e-14


# --------------------------------------------------------------------- f_tau

def test_f_tau_with_zero_p(setup):
    fld, lin = setup
    eps = 1e-2
    tau = 0.7
    U = np.concatenate([X0, np.zeros(3)])
    out = f_tau(U, tau, lin, fld, eps)
    EF = eps * fld.E(X0)
    assert np.allclose(out[:3], s1(tau, lin, -1) @ EF, atol=1e-15)
    assert np.allclose(out[3:], s0(tau, lin, -1) @ EF, atol=1e-15)


def test_f_tau_at_zero_phase(setup):
    fld, lin = setup
    eps = 1e-2
    U = np.concatenate([X0, eps * V0])
    out = f_tau(U, 0.0, lin, fld, eps)
    Fv = big_F(X0, eps * V0, lin, fld, eps)
    assert np.allclose(out[:3], 0.0, atol=1e-16)
    assert np.allclose(out[3:], Fv, atol=1e-16)


def test_f_tau_bottom_block_norm(setup):
    fld, lin = setup
    eps = 1e-2
    rng = np.random.default_rng(0)
    for _ in range(20):
        U = np.concatenate([X0 + 0.1 * rng.standard_normal(3),
                            eps * rng.standard_normal(3)])
        tau = float(rng.uniform(-np.pi, np.pi))
        x = U[:3] + s1(tau, lin, +1) @ U[3:]
        w = s0(tau, lin, +1) @ U[3:]
        Fv = big_F(x, w, lin, fld, eps)
        out = f_tau(U, tau, lin, fld, eps)
        assert abs(np.linalg.norm(out[3:]) - np.linalg.norm(Fv)) <= 1e-13


# ----------------------------------------------------------------- operators

def test_operators_on_constants():
    g = TauGridFunction(np.broadcast_to(np.arange(6.0), (64, 6)).copy())
    assert np.allclose(op_Pi(g).u_bar, np.arange(6.0))
    assert np.allclose(op_A(g).values, 0.0, atol=1e-14)
    assert np.allclose(op_L(g).values, 0.0, atol=1e-14)


def test_antiderivative_of_sine():
    taus = tau_nodes(64)
    vals = np.zeros((64, 6))
    vals[:, 0] = np.sin(2 * taus)
    got = op_A(TauGridFunction(vals)).values
    want = np.zeros_like(vals)
    want[:, 0] = -np.cos(2 * taus) / 2
    assert np.max(np.abs(got - want)) <= 1e-12


def test_operator_algebra_band_limited():
    rng = np.random.default_rng(1)
    taus = tau_nodes(64)
    vals = np.zeros((64, 6))
    for j in range(6):
        for k in range(1, 9):
            vals[:, j] += rng.standard_normal() * np.cos(k * taus) \
                + rng.standard_normal() * np.sin(k * taus)
        vals[:, j] += rng.standard_normal()
    g = TauGridFunction(vals)
    mean = op_Pi(g).u_bar
    # L A = I - Pi
    assert np.max(np.abs(op_L(op_A(g)).values - (vals - mean))) <= 1e-12
    # A L = I - Pi
    assert np.max(np.abs(op_A(op_L(g)).values - (vals - mean))) <= 1e-12
    # Pi A = 0
    assert np.max(np.abs(op_Pi(op_A(g)).u_bar)) <= 1e-13


# --------------------------------------------------------- jacobian, hessian

def test_jacobian_directional_fd(setup):
    fld, lin = setup
    eps = 1e-2
    rng = np.random.default_rng(2)
    U = np.concatenate([X0, eps * V0])
    tau = 0.9
    J = jac_f_tau(U, tau, lin, fld, eps)
    for _ in range(10):
        a = rng.standard_normal(6)
        a /= np.linalg.norm(a)
        d = 1e-6
        fd = (f_tau(U + d * a, tau, lin, fld, eps)
              - f_tau(U - d * a, tau, lin, fld, eps)) / (2 * d)
        rel = np.max(np.abs(J @ a - fd)) / max(1.0, np.max(np.abs(fd)))
        assert rel <= 1e-6


def test_jacobian_w_block_vanishes_at_x0(setup):
    fld, lin = setup
    eps = 1e-2
    # at tau = 0, P = 0 the inner dF/dw block is (hat(B(x0)) - hat(B0))/eps = 0
    U = np.concatenate([X0, np.zeros(3)])
    J = jac_f_tau(U, 0.0, lin, fld, eps)
    dFdx = fld.dB(X0)  # nonzero; only check the w-columns of the bottom block
    inner_w = J[3:, 3:]  # s0(0) (dF/dw) s0(0) + s0(0) dF/dy s1(0) = dF/dw
    assert np.max(np.abs(inner_w)) <= 1e-13
    assert np.max(np.abs(dFdx)) > 0  # sanity: the field does vary


def test_hessian_symmetry(setup):
    fld, lin = setup
    eps = 1e-2
    rng = np.random.default_rng(3)
    U = np.concatenate([X0, eps * V0])
    H = hess_f_tau(U, 0.3, lin, fld, eps)
    for _ in range(10):
        a, b = rng.standard_normal(6), rng.standard_normal(6)
        assert np.max(np.abs(H(a, b) - H(b, a))) <= 1e-10


def test_hessian_directional_fd(setup):
    fld, lin = setup
    eps = 1e-2
    rng = np.random.default_rng(4)
    U = np.concatenate([X0, eps * V0])
    tau = -0.4
    H = hess_f_tau(U, tau, lin, fld, eps)
    for _ in range(5):
        a = rng.standard_normal(6)
        a /= np.linalg.norm(a)
        d = 1e-4
        fd = (f_tau(U + d * a, tau, lin, fld, eps)
              - 2 * f_tau(U, tau, lin, fld, eps)
              + f_tau(U - d * a, tau, lin, fld, eps)) / d**2
        rel = np.max(np.abs(H(a, a) - fd)) / max(1.0, np.max(np.abs(fd)))
        assert rel <= 1e-5


# ----------------------------------------------------------------- correctors

def test_kappa_mean_free(setup):
    fld, lin = setup
    eps = 1e-2
    rng = np.random.default_rng(5)
    for _ in range(3):
        ubar = np.concatenate([X0 + 0.2 * rng.standard_normal(3),
                               eps * rng.standard_normal(3)])
        for l in (1, 2, 3):
            k = kappa(l, ubar, lin, fld, eps, 64)
            assert np.max(np.abs(op_Pi(k).u_bar)) <= 1e-12


def test_kappa1_vanishes_for_uniform_field_without_drift(setup):
    _, lin = setup
    ufld = uniform_field(lin.B0_vec)
    ubar = np.concatenate([X0, np.zeros(3)])
    k1 = kappa(1, ubar, lin, ufld, 1e-2, 64, include_coupling=False)
    assert np.max(np.abs(k1.values)) <= 1e-15


def test_kappa1_quadrature_oracle(setup):
    """A f evaluated by direct O(N^2) trapezoidal (DFT) sums, no FFT path."""
    fld, lin = setup
    eps = 1e-2
    n = 64
    ubar = np.concatenate([X0, eps * V0])
    got = kappa(1, ubar, lin, fld, eps, n).values

    taus = tau_nodes(n)
    U = np.broadcast_to(ubar, (n, 6)).copy()
    f = f_tau_grid(U, taus, lin, fld, eps, coupling=True)
    # Fourier coefficients by direct trapezoidal quadrature of the analysis
    # integral, antiderivative by 1/(ik), direct synthesis sums
    ks = np.arange(-(n // 2), n // 2)
    oracle = np.zeros((n, 6))
    for j in range(6):
        for k in ks:
            if k == 0:
                continue
            ck = np.sum(f[:, j] * np.exp(-1j * k * taus)) / n
            oracle[:, j] += np.real(ck / (1j * k) * np.exp(1j * k * taus))
    oracle /= lin.b
    assert np.max(np.abs(got - oracle)) <= 1e-10


def test_initial_data_orders(setup):
    fld, lin = setup
    eps = 1e-2
    u00 = np.concatenate([X0, eps * V0])
    # order 1: constant in tau
    u1 = initial_data(1, X0, V0, lin, fld, eps, 64)
    assert np.max(np.abs(u1.values - u00)) <= 1e-15
    # tau = 0 node exact for every order
    for order in (1, 2, 3, 4):
        u = initial_data(order, X0, V0, lin, fld, eps, 64)
        assert np.max(np.abs(u.values[32] - u00)) <= 1e-14


def test_initial_data_p_block_scale(setup):
    fld, lin = setup
    eps = 1e-2
    u4 = initial_data(4, X0, V0, lin, fld, eps, 64)
    sup = np.max(np.linalg.norm(u4.values[:, 3:], axis=1))
    assert sup <= 3.0 * np.linalg.norm(V0) * eps


def test_drift_coupling_structure(setup):
    _, lin = setup
    rng = np.random.default_rng(6)
    vals = rng.standard_normal((8, 6))
    out = drift_coupling_grid(vals, lin, 0.05)
    assert np.allclose(out[:, 3:], 0.0)
    assert np.allclose(out[:, :3] @ lin.axis, (vals[:, 3:] @ lin.axis) / 0.05)
    perp = out[:, :3] - np.outer(out[:, :3] @ lin.axis, lin.axis)
    assert np.max(np.abs(perp)) <= 1e-13


# --------------------------------------------------------------- boundedness

def test_f_tau_bounded_along_trajectories():
    """max-over-trajectory |f_tau| is eps-uniform (general) and O(eps)
    (maximal ordering).  Step sizes sit inside the stable envelope."""
    from cpd.solver import SolveConfig, solve_cpd

    sup = {}
    for field_id, eps_h in (("general", [(1e-1, 1 / 40), (1e-2, 1 / 320)]),
                            ("maximal", [(1e-1, 1 / 40), (1e-2, 1 / 40),
                                         (1e-3, 1 / 40)])):
        for eps, h in eps_h:
            fld = resolve_field(field_id, eps)
            lin = Linearization.from_field(fld, X0)
            cfg = SolveConfig(field=field_id, eps=eps, order=2, h=h,
                              stride=max(1, int(round(0.1 / h))))
            traj = solve_cpd(cfg)
            m = 0.0
            for st in traj.states:
                w = eps * st.v
                fv = big_F(st.x, w, lin, fld, eps)
                m = max(m, float(np.linalg.norm(fv)))
            sup[(field_id, eps)] = m
    gen = [sup[("general", 1e-1)], sup[("general", 1e-2)]]
    assert max(gen) / min(gen) < 5.0
    # maximal ordering: the bound scales like eps (factors track the sweep)
    r1 = sup[("maximal", 1e-1)] / sup[("maximal", 1e-2)]
    r2 = sup[("maximal", 1e-2)] / sup[("maximal", 1e-3)]
    assert 3.0 < r1 < 30.0 and 3.0 < r2 < 30.0
