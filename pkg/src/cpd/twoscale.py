"""Two-scale right-hand side, averaging operators, correctors, initial data.

Grid functions live on the n_tau-point periodic grid tau_l = 2*pi*l/n_tau,
l = -n_tau/2 .. n_tau/2 - 1 (so tau = 0 sits at index n_tau//2), with six
components (Q, P) per node.

The vector field splits into
  * the conjugated residual-force blocks
        f_tau(U) = (s1(tau,-1) F(y, z),  s0(tau,-1) F(y, z)),
        y = Q + s1(tau,+1) P,  z = s0(tau,+1) P,
  * the parallel drift coupling  g(U) = ((k.P)/eps) k  in the Q block.

The coupling carries the secular parallel drift of the position (the reduced
phase convention makes the conjugations 2*pi-periodic, which leaves the
drift as an explicit linear term).  It is tau-independent, hence diagonal in
Fourier space; the solver treats it inside the exact linear flow, while the
Chapman-Enskog construction below includes it in the expanded field.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FieldModel, hat
from .rotations import Linearization, apply_s0, apply_s1


@dataclass(frozen=True)
class TauGridFunction:
    """Real 6-component samples on the periodic tau grid."""

    values: np.ndarray  # (n_tau, 6)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != 6:
            raise ValueError("values must have shape (n_tau, 6)")
        n = v.shape[0]
        if n < 2 or (n & (n - 1)) != 0:
            raise ValueError("n_tau must be a power of two")
        object.__setattr__(self, "values", v.copy())

    @property
    def n_tau(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class MeanState:
    """The tau-average of a grid function (6 components)."""

    u_bar: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u_bar, dtype=float)
        if u.shape != (6,):
            raise ValueError("u_bar must have shape (6,)")
        if not np.all(np.isfinite(u)):
            raise ValueError("u_bar must be finite")
        object.__setattr__(self, "u_bar", u.copy())


def tau_nodes(n_tau: int) -> np.ndarray:
    """Grid nodes 2*pi*l/n_tau for l = -n_tau/2 .. n_tau/2 - 1."""
    return 2.0 * np.pi * np.arange(-(n_tau // 2), n_tau // 2) / n_tau


def mode_numbers(n_tau: int) -> np.ndarray:
    """Fourier mode numbers k = -n_tau/2 .. n_tau/2 - 1 (grid ordering)."""
    return np.arange(-(n_tau // 2), n_tau // 2)


def grid_fft(values: np.ndarray) -> np.ndarray:
    """Forward DFT (1/N normalization) columnwise, modes in grid ordering."""
    return np.fft.fftshift(
        np.fft.fft(np.fft.ifftshift(values, axes=0), axis=0), axes=0
    ) / values.shape[0]


def grid_ifft(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`grid_fft`; returns complex values (caller takes real)."""
    return np.fft.fftshift(
        np.fft.ifft(np.fft.ifftshift(coeffs, axes=0), axis=0), axes=0
    ) * coeffs.shape[0]


# ---------------------------------------------------------------------------
# averaging operators


def op_Pi(g: TauGridFunction) -> MeanState:
    """Zero-mode extraction (mean over the periodic grid)."""
    return MeanState(g.values.mean(axis=0))


def op_L(g: TauGridFunction) -> TauGridFunction:
    """d/dtau, spectrally: mode k multiplied by ik."""
    c = grid_fft(g.values)
    c *= 1j * mode_numbers(g.n_tau)[:, None]
    return TauGridFunction(np.real(grid_ifft(c)))


def op_A(g: TauGridFunction) -> TauGridFunction:
    """L^-1 (I - Pi): mode k != 0 divided by ik, mode 0 zeroed."""
    c = grid_fft(g.values)
    k = mode_numbers(g.n_tau)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(k == 0, 0.0, c / (1j * k))
    return TauGridFunction(np.real(grid_ifft(c)))


def _A_values(values: np.ndarray) -> np.ndarray:
    c = grid_fft(values)
    k = mode_numbers(values.shape[0])[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(k == 0, 0.0, c / (1j * k))
    return np.real(grid_ifft(c))


# ---------------------------------------------------------------------------
# the vector field and its derivatives


def big_F(x, w, lin: Linearization, field: FieldModel, eps: float):
    """Residual force F(x, w) = (hat(B(x)) - hat(B0)) w / eps + eps E(x)."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    return np.cross(w, field.B(x) - lin.B0_vec) / eps + eps * field.E(x)


def _big_F_grid(xs, ws, lin, field, eps):
    return np.cross(ws, field.B_many(xs) - lin.B0_vec) / eps + eps * field.E_many(xs)


def drift_coupling_grid(values: np.ndarray, lin: Linearization, eps: float):
    """The parallel drift term ((k.P)/eps) k in the Q block, per node."""
    out = np.zeros_like(values)
    ppar = values[:, 3:] @ lin.axis
    out[:, :3] = np.outer(ppar, lin.axis) / eps
    return out


def f_tau_grid(values, taus, lin: Linearization, field: FieldModel, eps: float,
               coupling: bool = False, omega_extract: float = 0.0):
    """Conjugated residual-force blocks at the given phases, batched.

    ``coupling=True`` adds the parallel drift term (the full two-scale field).
    ``omega_extract`` subtracts the frozen parallel-axis rotation
    omega * hat(k) P from the P block (the conjugation-invariant part of the
    residual rotation that the stabilized flow integrates exactly); the Q
    block always sees the full force.
    """
    Q, P = values[:, :3], values[:, 3:]
    ys = Q + apply_s1(taus, lin, +1, P)
    zs = apply_s0(taus, lin, +1, P)
    Fv = _big_F_grid(ys, zs, lin, field, eps)
    out = np.empty_like(values)
    out[:, :3] = apply_s1(taus, lin, -1, Fv)
    if omega_extract != 0.0:
        # s0(-tau) (z x (eps w k)) / eps = w (P x k) exactly (conjugation
        # invariance of the parallel-axis rotation)
        out[:, 3:] = apply_s0(taus, lin, -1, Fv) \
            - omega_extract * np.cross(P, lin.axis)
    else:
        out[:, 3:] = apply_s0(taus, lin, -1, Fv)
    if coupling:
        out += drift_coupling_grid(values, lin, eps)
    return out


def f_tau(U, tau_phase: float, lin: Linearization, field: FieldModel, eps: float):
    """Single-node evaluation of the conjugated blocks (no drift term)."""
    U = np.asarray(U, dtype=float)
    return f_tau_grid(U[None, :], np.array([tau_phase]), lin, field, eps)[0]


def _rot_matrices(taus, lin: Linearization, sign: int):
    """Batched 3x3 matrices for s0 and s1 at the given phases: (n,3,3) pair."""
    sn = sign * np.sin(taus)[:, None, None] / lin.b
    cs = ((1.0 - np.cos(taus)) / lin.b**2)[:, None, None]
    eye = np.eye(3)[None]
    s0m = eye + sn * lin.B0_hat[None] + cs * lin.B0_hat_sq[None]
    k = lin.axis
    s1m = sn * (np.eye(3) - np.outer(k, k))[None] + cs * lin.B0_hat[None]
    return s0m, s1m


def _hat_many(vs):
    n = vs.shape[0]
    H = np.zeros((n, 3, 3))
    H[:, 0, 1] = vs[:, 2]
    H[:, 0, 2] = -vs[:, 1]
    H[:, 1, 0] = -vs[:, 2]
    H[:, 1, 2] = vs[:, 0]
    H[:, 2, 0] = vs[:, 1]
    H[:, 2, 1] = -vs[:, 0]
    return H


def _F_derivative_blocks(ys, zs, lin, field, eps):
    """dF/dy and dF/dz at the batched arguments: two (n,3,3) arrays."""
    JB = field.dB_many(ys)
    JE = field.dE_many(ys)
    # column j of dF/dy is cross(z, dB/dx_j) / eps + eps dE/dx_j
    dFy = np.cross(zs[:, None, :], JB.transpose(0, 2, 1)).transpose(0, 2, 1) / eps \
        + eps * JE
    dFz = _hat_many(field.B_many(ys) - lin.B0_vec) / eps
    return dFy, dFz


def jac_f_tau_grid(values, taus, lin, field, eps, coupling: bool = False):
    """Exact Jacobian of the two-scale field wrt U at each node: (n, 6, 6)."""
    Q, P = values[:, :3], values[:, 3:]
    ys = Q + apply_s1(taus, lin, +1, P)
    zs = apply_s0(taus, lin, +1, P)
    dFy, dFz = _F_derivative_blocks(ys, zs, lin, field, eps)
    s0p, s1p = _rot_matrices(taus, lin, +1)
    s0m, s1m = _rot_matrices(taus, lin, -1)
    # inner chain: dy/dQ = I, dy/dP = s1p, dz/dP = s0p
    dF_dQ = dFy
    dF_dP = dFy @ s1p + dFz @ s0p
    J = np.empty((values.shape[0], 6, 6))
    J[:, :3, :3] = s1m @ dF_dQ
    J[:, :3, 3:] = s1m @ dF_dP
    J[:, 3:, :3] = s0m @ dF_dQ
    J[:, 3:, 3:] = s0m @ dF_dP
    if coupling:
        k = lin.axis
        J[:, :3, 3:] += np.outer(k, k)[None] / eps
    return J


def jac_f_tau(U, tau_phase, lin, field, eps):
    """Single-node 6x6 Jacobian of the conjugated blocks (no drift term)."""
    U = np.asarray(U, dtype=float)
    return jac_f_tau_grid(U[None, :], np.array([tau_phase]), lin, field, eps)[0]


def hess_f_tau_grid(values, taus, lin, field, eps, A6, B6):
    """Bilinear second derivative applied to direction grids: (n, 6).

    The drift coupling is linear, so its second derivative vanishes and this
    is also the Hessian of the full two-scale field.
    """
    Q, P = values[:, :3], values[:, 3:]
    ys = Q + apply_s1(taus, lin, +1, P)
    zs = apply_s0(taus, lin, +1, P)
    dya = A6[:, :3] + apply_s1(taus, lin, +1, A6[:, 3:])
    dza = apply_s0(taus, lin, +1, A6[:, 3:])
    dyb = B6[:, :3] + apply_s1(taus, lin, +1, B6[:, 3:])
    dzb = apply_s0(taus, lin, +1, B6[:, 3:])
    JB = field.dB_many(ys)
    HB = field.d2B_many(ys)
    HE = field.d2E_many(ys)
    JB_dyb = np.einsum("nij,nj->ni", JB, dyb)
    JB_dya = np.einsum("nij,nj->ni", JB, dya)
    HB_ab = np.einsum("nijk,nj,nk->ni", HB, dya, dyb)
    HE_ab = np.einsum("nijk,nj,nk->ni", HE, dya, dyb)
    d2F = (np.cross(dza, JB_dyb) + np.cross(dzb, JB_dya) + np.cross(zs, HB_ab)) / eps \
        + eps * HE_ab
    out = np.empty((values.shape[0], 6))
    out[:, :3] = apply_s1(taus, lin, -1, d2F)
    out[:, 3:] = apply_s0(taus, lin, -1, d2F)
    return out


def hess_f_tau(U, tau_phase, lin, field, eps):
    """Single-node bilinear form: returns a callable (a, b) -> R^6."""
    U = np.asarray(U, dtype=float)

    def apply(a, b):
        return hess_f_tau_grid(
            U[None, :], np.array([tau_phase]), lin, field, eps,
            np.asarray(a, dtype=float)[None, :], np.asarray(b, dtype=float)[None, :],
        )[0]

    return apply


# ---------------------------------------------------------------------------
# Chapman-Enskog correctors and prepared initial data


def kappa(l: int, u_bar, lin: Linearization, field: FieldModel, eps: float,
          n_tau: int, include_coupling: bool = True) -> TauGridFunction:
    """Corrector kappa_l (l = 1, 2, 3) evaluated on the tau grid.

    kappa_1 = A f, kappa_2 = A(df.Af) - A^2(df.Pi f), and the eight-term
    third corrector, with every A carrying the 1/b transport rescaling.  The
    expansion uses the full two-scale field (drift coupling included) unless
    ``include_coupling`` is False, which restricts it to the conjugated
    blocks only.
    """
    if l not in (1, 2, 3):
        raise ValueError("corrector index must be 1, 2 or 3")
    if isinstance(u_bar, MeanState):
        u_bar = u_bar.u_bar
    u_bar = np.asarray(u_bar, dtype=float)
    taus = tau_nodes(n_tau)
    U = np.broadcast_to(u_bar, (n_tau, 6)).copy()
    b = lin.b

    def A(vals):
        return _A_values(vals) / b

    f = f_tau_grid(U, taus, lin, field, eps, coupling=include_coupling)
    Af = A(f)
    if l == 1:
        return TauGridFunction(Af)

    J = jac_f_tau_grid(U, taus, lin, field, eps, coupling=include_coupling)
    Jdot = lambda g: np.einsum("nij,nj->ni", J, g)
    Pif = np.broadcast_to(f.mean(axis=0), (n_tau, 6)).copy()
    if l == 2:
        return TauGridFunction(A(Jdot(Af)) - A(A(Jdot(Pif))))

    def H(g1, g2):
        return hess_f_tau_grid(U, taus, lin, field, eps, g1, g2)

    def PiJ(g):
        return np.broadcast_to(Jdot(g).mean(axis=0), (n_tau, 6)).copy()

    t1 = A(Jdot(A(Jdot(Af))))
    t2 = A(Jdot(A(A(Jdot(Pif)))))
    t3 = 0.5 * A(H(Af, Af))
    t4 = A(A(H(Pif, Af)))
    t5 = A(A(Jdot(A(Jdot(Pif)))))
    t6 = A(A(A(H(Pif, Pif))))
    t7 = A(A(A(Jdot(PiJ(Pif)))))
    t8 = A(A(Jdot(PiJ(Af))))
    return TauGridFunction(t1 - t2 + t3 - t4 - t5 + t6 + t7 - t8)


def initial_data(order: int, x0, v0, lin: Linearization, field: FieldModel,
                 eps: float, n_tau: int) -> TauGridFunction:
    """Well-prepared initial data U0(tau) for an order-r integrator.

    Order r uses correctors kappa_1 .. kappa_{r-1}; the mean is fixed by the
    backward iteration so that U0 at the tau = 0 node equals (x0, eps*v0)
    exactly.
    """
    if order not in (1, 2, 3, 4):
        raise ValueError("order must be in 1..4")
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    u00 = np.concatenate([x0, eps * v0])
    i0 = n_tau // 2  # index of the tau = 0 node

    kappas = {}  # (l, j) -> grid values of kappa_l(., ubar_j)
    ubars = [u00]
    for j in range(1, order):
        acc = u00.copy()
        for l in range(1, j + 1):
            kl = kappa(l, ubars[j - l], lin, field, eps, n_tau).values
            kappas[(l, j - l)] = kl
            acc = acc - eps**l * kl[i0]
        ubars.append(acc)

    U0 = np.broadcast_to(ubars[order - 1], (n_tau, 6)).copy()
    for l in range(1, order):
        j = order - 1 - l
        kl = kappas.get((l, j))
        if kl is None:
            kl = kappa(l, ubars[j], lin, field, eps, n_tau).values
        U0 = U0 + eps**l * kl
    return TauGridFunction(U0)
