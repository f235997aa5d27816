"""phi functions, exponential Runge-Kutta tableaus, and the stepper.

Tableau coefficient functions are stored as term lists ``(coeff, rho, c)``
meaning ``coeff * phi_rho(c * h * M)``; the stepper evaluates them against a
linear flow object.  Two flows are provided: the pure diagonal transport and
the transport augmented by the parallel drift coupling, whose exponential and
phi-functions have closed forms (the coupling is nilpotent and reads only the
parallel P component, so e^{h(M+N)} = e^{hM} + int_0^h e^{(h-s)M} N e^{sM} ds
terminates exactly and reduces to neighbor-free diagonal corrections).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

from .errors import DivergenceError
from .spectral import CoefVector, TransportGenerator
from .rotations import Linearization

_TAYLOR_CUT = 0.1
_TAYLOR_TERMS = 12


def phi(rho: int, z):
    """Entire functions phi_rho: phi_1 = (e^z - 1)/z, etc.; rho in 1..4.

    Evaluated elementwise; the recurrence
    phi_rho(z) = (phi_{rho-1}(z) - 1/(rho-1)!)/z is used away from zero and a
    12-term Taylor series below |z| = 0.1 (cancellation-safe; truncation is
    below 1e-16 at the crossover).
    """
    if rho not in (1, 2, 3, 4):
        raise ValueError("rho must be in 1..4")
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    small = np.abs(z) <= _TAYLOR_CUT

    zl = np.where(small, 1.0, z)  # avoid 0/0 on the branch not taken
    acc = np.exp(zl)
    fact = 1.0
    for r in range(1, rho + 1):
        acc = (acc - 1.0 / fact) / zl
        fact *= r

    ts = np.zeros_like(z)
    for n in range(_TAYLOR_TERMS - 1, -1, -1):
        ts = ts * z + 1.0 / math.factorial(n + rho)

    out = np.where(small, ts, acc)
    return out[0] if scalar else out


def eval_terms(terms, z, include_exp: bool = False):
    """Evaluate a term list sum(coeff * phi_rho(c z)) elementwise."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros_like(z)
    for coeff, rho, c in terms:
        if rho == 0:
            if not include_exp:
                raise ValueError("exp term in a phi-only context")
            out = out + coeff * np.exp(c * z)
        else:
            out = out + coeff * phi(rho, c * z)
    return out


Terms = Tuple[Tuple[float, int, float], ...]


@dataclass(frozen=True)
class ExpTableau:
    """Explicit exponential Runge-Kutta tableau with declared order."""

    name: str
    s: int
    c: Tuple[float, ...]
    a: Dict[Tuple[int, int], Terms]
    b: Dict[int, Terms]
    order: int

    def __post_init__(self):
        for (i, j) in self.a:
            if j >= i:
                raise ValueError("explicit scheme requires strictly lower abar")
        # weak stiff-order conditions at z = 0 up to the declared order
        for rho in range(1, self.order + 1):
            if abs(self.psi(rho, 0.0)) > 1e-13:
                raise ValueError(f"{self.name}: psi_{rho}(0) != 0")

    def bbar(self, j: int, z):
        return eval_terms(self.b.get(j, ()), z)

    def abar(self, i: int, j: int, z):
        return eval_terms(self.a.get((i, j), ()), z)

    def psi(self, rho: int, z):
        """psi_rho(z) = phi_rho(z) - sum_i bbar_i(z) c_i^(rho-1)/(rho-1)!."""
        z = np.asarray(z, dtype=complex)
        acc = phi(rho, z).astype(complex)
        fact = math.factorial(rho - 1)
        for j, terms in self.b.items():
            cj = self.c[j]
            w = cj ** (rho - 1) / fact if rho > 1 else 1.0 / fact
            acc = acc - w * eval_terms(terms, z)
        return acc

    def psi_stage(self, rho: int, i: int, z):
        """psi_{rho,i}(z) = phi_rho(c_i z) c_i^rho - sum_k abar_ik(z) c_k^(rho-1)/(rho-1)!."""
        z = np.asarray(z, dtype=complex)
        ci = self.c[i]
        acc = phi(rho, ci * z) * ci**rho
        fact = math.factorial(rho - 1)
        for k in range(i):
            if (i, k) in self.a:
                ck = self.c[k]
                w = ck ** (rho - 1) / fact if rho > 1 else 1.0 / fact
                acc = acc - w * eval_terms(self.a[(i, k)], z)
        return acc


def tableau_mo1() -> ExpTableau:
    """Exponential Euler (one stage, bbar_1 = phi_1)."""
    return ExpTableau("MO1-E", 1, (0.0,), {}, {0: ((1.0, 1, 1.0),)}, 1)


def tableau_mo2() -> ExpTableau:
    """Two-stage second-order exponential midpoint scheme."""
    return ExpTableau(
        "MO2-E", 2, (0.0, 0.5),
        {(1, 0): ((0.5, 1, 0.5),)},
        {1: ((1.0, 1, 1.0),)},
        2,
    )


def tableau_mo3() -> ExpTableau:
    """Three-stage third-order scheme, c = (0, 1/3, 2/3)."""
    c2, c3 = 1.0 / 3.0, 2.0 / 3.0
    g = 4.0 / (9.0 * c2)  # = 4/3
    return ExpTableau(
        "MO3-E", 3, (0.0, c2, c3),
        {(1, 0): ((c2, 1, c2),),
         (2, 0): ((c3, 1, c3), (-g, 2, c3)),
         (2, 1): ((g, 2, c3),)},
        {0: ((1.0, 1, 1.0), (-1.5, 2, 1.0)),
         2: ((1.5, 2, 1.0),)},
        3,
    )


def tableau_mo4() -> ExpTableau:
    """Five-stage fourth-order scheme, c = (0, 1/2, 1/2, 1, 1/2).

    Expanded to plain phi-term lists; the abar_5j entries use the quarter
    coefficients of the classical fourth-order exponential RK method (the
    half coefficients sometimes seen in print fail the order-4 conditions).
    """
    a52 = ((0.5, 2, 0.5), (-1.0, 3, 1.0), (0.25, 2, 1.0), (-0.5, 3, 0.5))
    a54 = ((-0.25, 2, 0.5), (1.0, 3, 1.0), (-0.25, 2, 1.0), (0.5, 3, 0.5))
    a51 = ((0.5, 1, 0.5), (-0.75, 2, 0.5), (-0.25, 2, 1.0), (1.0, 3, 1.0),
           (0.5, 3, 0.5))
    return ExpTableau(
        "MO4-E", 5, (0.0, 0.5, 0.5, 1.0, 0.5),
        {(1, 0): ((0.5, 1, 0.5),),
         (2, 0): ((0.5, 1, 0.5), (-1.0, 2, 0.5)),
         (2, 1): ((1.0, 2, 0.5),),
         (3, 0): ((1.0, 1, 1.0), (-2.0, 2, 1.0)),
         (3, 1): ((1.0, 2, 1.0),),
         (3, 2): ((1.0, 2, 1.0),),
         (4, 0): a51, (4, 1): a52, (4, 2): a52, (4, 3): a54},
        {0: ((1.0, 1, 1.0), (-3.0, 2, 1.0), (4.0, 3, 1.0)),
         3: ((-1.0, 2, 1.0), (4.0, 3, 1.0)),
         4: ((4.0, 2, 1.0), (-8.0, 3, 1.0))},
        4,
    )


TABLEAUS = {1: tableau_mo1, 2: tableau_mo2, 3: tableau_mo3, 4: tableau_mo4}


def psi_check(tab: ExpTableau, zgrid=None) -> dict:
    """Evaluate the stiff order functions psi_rho (and stage variants) on a grid.

    Returns max |psi_rho| over the grid and |psi_rho(0)| for rho = 1..4.
    """
    if zgrid is None:
        zgrid = 1j * np.linspace(-50.0, 50.0, 200)
    report = {"name": tab.name, "order": tab.order, "max_psi": {}, "psi_at_0": {},
              "max_psi_stage": {}}
    for rho in (1, 2, 3, 4):
        report["max_psi"][rho] = float(np.max(np.abs(tab.psi(rho, zgrid))))
        report["psi_at_0"][rho] = float(abs(tab.psi(rho, 0.0)))
    for i in range(1, tab.s):
        for rho in (1, 2):
            key = (rho, i + 1)  # 1-based stage index in the report
            report["max_psi_stage"][key] = float(
                np.max(np.abs(tab.psi_stage(rho, i, zgrid))))
    return report


# ---------------------------------------------------------------------------
# linear flows and the stepper


class TransportFlow:
    """Pure diagonal linear flow exp(c h M) and phi_rho(c h M)."""

    def __init__(self, M: TransportGenerator, h: float):
        if h <= 0:
            raise ValueError("h must be positive")
        self.M = M
        self.h = h
        self.hlam = h * M.diag  # (n_tau,)
        self._exp = {}
        self._phi = {}

    def _exp_diag(self, c: float):
        if c not in self._exp:
            self._exp[c] = np.exp(c * self.hlam)
        return self._exp[c]

    def _phi_diag(self, rho: int, c: float):
        key = (rho, c)
        if key not in self._phi:
            self._phi[key] = phi(rho, c * self.hlam)
        return self._phi[key]

    def exp_apply(self, c: float, U: np.ndarray) -> np.ndarray:
        return self._exp_diag(c)[:, None] * U

    def coef_apply(self, terms, U: np.ndarray) -> np.ndarray:
        diag = np.zeros_like(self.hlam)
        for coeff, rho, c in terms:
            diag = diag + coeff * self._phi_diag(rho, c)
        return diag[:, None] * U


class CoupledTransportFlow(TransportFlow):
    """Transport plus the exact parallel drift coupling.

    The coupling N maps the parallel P component of mode k to the parallel Q
    component of the same mode with weight 1/eps.  Since N^2 = 0 and
    N e^{sM} N = 0, the matrix functions of M + N reduce to the diagonal
    values plus one correction:

        e^{c h (M+N)}    : Q_par += (c h / eps) e^{c h lam} P_par
        phi_rho(c h (M+N)): Q_par += (c h / eps)
                                (phi_rho - rho phi_{rho+1})(c h lam) P_par
    """

    def __init__(self, M: TransportGenerator, h: float, lin: Linearization):
        super().__init__(M, h)
        self.lin = lin
        self.eps = M.eps

    def _exp_coupling(self, c: float):
        return (c * self.h / self.eps) * self._exp_diag(c)

    def _phi_coupling(self, rho: int, c: float):
        return (c * self.h / self.eps) * (
            self._phi_diag(rho, c) - rho * self._phi_diag(rho + 1, c))

    def _add_coupling(self, out, weights, U):
        k = self.lin.axis
        ppar = U[:, 3:] @ k
        out[:, :3] += np.outer(weights * ppar, k)
        return out

    def exp_apply(self, c: float, U: np.ndarray) -> np.ndarray:
        out = super().exp_apply(c, U)
        return self._add_coupling(out, self._exp_coupling(c), U)

    def coef_apply(self, terms, U: np.ndarray) -> np.ndarray:
        out = super().coef_apply(terms, U)
        w = np.zeros_like(self.hlam)
        for coeff, rho, c in terms:
            w = w + coeff * self._phi_coupling(rho, c)
        return self._add_coupling(out, w, U)


class StabilizedTransportFlow(CoupledTransportFlow):
    """Coupled flow plus a frozen parallel-axis rotation of the P block.

    The conjugated residual rotation s0(-tau) hat(dB) s0(tau)/eps has a
    tau-independent component along the B0 axis: (k.dB) hat(k)/eps, with dB
    the field offset at the current mean position.  Freezing its rate omega
    for one step and moving it into the linear flow is an exact re-split of
    the same equations; it removes the dominant stiff rotation from the
    explicitly treated remainder.  hat(k) commutes with the transport and
    preserves the parallel P component, so the drift-coupling corrections are
    untouched and only the perpendicular P components pick up the shifted
    arguments lam_m +- i omega in the scalar phi evaluations.
    """

    def __init__(self, M: TransportGenerator, h: float, lin: Linearization,
                 omega: float):
        super().__init__(M, h, lin)
        self.omega = float(omega)
        k = lin.axis
        # orthonormal frame (e1, e2, k); the component zeta = P.e1 + i P.e2
        # obeys d zeta/dt = -i omega zeta under the generator omega hat(k)
        t = np.eye(3)[np.argmin(np.abs(k))]
        e1 = t - (t @ k) * k
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(k, e1)
        self._frame = (e1, e2)
        self._exp_shift = {}
        self._phi_shift = {}

    def _exp_pm(self, c: float):
        if c not in self._exp_shift:
            w = 1j * self.h * self.omega
            self._exp_shift[c] = (np.exp(c * (self.hlam + w)),
                                  np.exp(c * (self.hlam - w)))
        return self._exp_shift[c]

    def _phi_pm(self, rho: int, c: float):
        key = (rho, c)
        if key not in self._phi_shift:
            w = 1j * self.h * self.omega
            self._phi_shift[key] = (phi(rho, c * (self.hlam + w)),
                                    phi(rho, c * (self.hlam - w)))
        return self._phi_shift[key]

    def _apply_pblock(self, out, U, fplus, fminus, par):
        """Rebuild the P block from the hat(k)-eigensplit.

        Coefficient vectors are complex, so the split p = a k + c+ u+ + c- u-
        with u± = e1 ± i e2 (hat(k) u± = ±i u±) uses the bilinear components
        c± = (p.e1 ∓ i p.e2)/2; c± transforms with arguments lam ± i omega.
        """
        e1, e2 = self._frame
        k = self.lin.axis
        P = U[:, 3:]
        ppar = P @ k
        pe1 = P @ e1
        pe2 = P @ e2
        dp = fplus * 0.5 * (pe1 - 1j * pe2)
        dm = fminus * 0.5 * (pe1 + 1j * pe2)
        out[:, 3:] = (np.outer(par * ppar, k)
                      + np.outer(dp + dm, e1) + np.outer(1j * (dp - dm), e2))
        return out

    def exp_apply(self, c: float, U: np.ndarray) -> np.ndarray:
        out = super().exp_apply(c, U)  # diagonal everywhere + drift coupling
        fp, fm = self._exp_pm(c)
        return self._apply_pblock(out, U, fp, fm, self._exp_diag(c))

    def coef_apply(self, terms, U: np.ndarray) -> np.ndarray:
        out = super().coef_apply(terms, U)
        par = np.zeros_like(self.hlam)
        fp = np.zeros_like(self.hlam)
        fm = np.zeros_like(self.hlam)
        for coeff, rho, c in terms:
            par = par + coeff * self._phi_diag(rho, c)
            p, m = self._phi_pm(rho, c)
            fp = fp + coeff * p
            fm = fm + coeff * m
        return self._apply_pblock(out, U, fp, fm, par)


def step(tab: ExpTableau, flow: TransportFlow, h: float, u: CoefVector,
         F: Callable[[CoefVector], CoefVector]) -> CoefVector:
    """One explicit exponential RK step of u' = M u + F(u)."""
    U = u.data
    Fs = [F(u).data]
    stages = [U]
    for i in range(1, tab.s):
        acc = flow.exp_apply(tab.c[i], U)
        for j in range(i):
            terms = tab.a.get((i, j))
            if terms:
                acc = acc + h * flow.coef_apply(terms, Fs[j])
        stages.append(acc)
        Fs.append(F(CoefVector(acc)).data)
    out = flow.exp_apply(1.0, U)
    for j, terms in tab.b.items():
        out = out + h * flow.coef_apply(terms, Fs[j])
    return CoefVector(out)


def integrate(tab: ExpTableau, flow: TransportFlow, h: float, u0: CoefVector,
              F: Callable[[CoefVector], CoefVector], n_steps: int,
              observer: Callable[[int, CoefVector], None] = None) -> CoefVector:
    """March n_steps; observer(n, u_n) is called after each accepted step.

    Raises DivergenceError (with the offending step index) on non-finite
    state values.
    """
    u = u0
    for n in range(1, n_steps + 1):
        u = step(tab, flow, h, u, F)
        if not np.all(np.isfinite(u.data.view(float))):
            raise DivergenceError(n)
        if observer is not None:
            observer(n, u)
    return u
