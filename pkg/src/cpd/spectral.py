"""Fourier pseudospectral layer: coefficient layout, transport generator,
assembly of the nonlinearity, and the binary serialization of coefficients.

The external coefficient layout is component-major: all modes of component 1,
then component 2, ..., component 6, with modes ordered k = -N/2 .. N/2-1.
Internally the package works with (n_tau, 6) arrays (mode-major), which is
what the FFT produces; the two layouts are pure reshapes/transposes of each
other and CoefVector converts at the boundary.

No operation materializes a dense D x D matrix: the conjugation matrices act
per node as 3x3 rotations (O(n_tau) memory).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ImaginaryResidueError
from .fields import FieldModel
from .rotations import Linearization
from .twoscale import (TauGridFunction, drift_coupling_grid, f_tau_grid,
                       grid_fft, grid_ifft, mode_numbers, tau_nodes)

MAGIC = b"CPD2SCL1"
IMAG_RESIDUE_TOL = 1e-10


@dataclass(frozen=True)
class CoefVector:
    """Complex Fourier coefficients of a 6-component real tau-grid function.

    ``data`` has shape (n_tau, 6): data[k_index, j] is mode
    k = k_index - n_tau/2 of component j.  The flat component-major layout
    of the external format is ``data.T.reshape(-1)``.
    """

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=complex)
        if d.ndim != 2 or d.shape[1] != 6:
            raise ValueError("data must have shape (n_tau, 6)")
        n = d.shape[0]
        if n < 2 or (n & (n - 1)) != 0:
            raise ValueError("n_tau must be a power of two")
        object.__setattr__(self, "data", d.copy())

    @property
    def n_tau(self) -> int:
        return self.data.shape[0]

    def flat(self) -> np.ndarray:
        """Component-major flat vector of length 6 * n_tau."""
        return self.data.T.reshape(-1).copy()

    @classmethod
    def from_flat(cls, flat: np.ndarray) -> "CoefVector":
        flat = np.asarray(flat, dtype=complex)
        if flat.ndim != 1 or flat.size % 6:
            raise ValueError("flat layout must have length 6 * n_tau")
        n = flat.size // 6
        return cls(flat.reshape(6, n).T)

    def conj_residue(self) -> float:
        """Relative conjugate-symmetry residue (0 for a real field)."""
        g = grid_ifft(self.data)
        re = float(np.max(np.abs(g.real)))
        im = float(np.max(np.abs(g.imag)))
        return im / max(1.0, re)


def from_grid(g: TauGridFunction) -> CoefVector:
    """Analysis transform (1/N normalization)."""
    return CoefVector(grid_fft(g.values))


def to_grid(c: CoefVector) -> TauGridFunction:
    """Synthesis transform; errors if the imaginary residue is too large."""
    g = grid_ifft(c.data)
    re = np.max(np.abs(g.real))
    im = np.max(np.abs(g.imag))
    if im > IMAG_RESIDUE_TOL * max(1.0, re):
        raise ImaginaryResidueError(
            f"imaginary residue {im:.3e} exceeds tolerance (real scale {re:.3e})"
        )
    return TauGridFunction(g.real)


def project_initial(u0: TauGridFunction) -> CoefVector:
    """Initial coefficients of the semi-discrete system.

    The unpaired Nyquist mode -n_tau/2 is zeroed: it has no conjugate partner
    in the mode set, so any content there breaks realness once it picks up a
    transport phase.  Together with the same projection in assemble_F this
    keeps the mode exactly empty along the whole evolution.
    """
    c = from_grid(u0)
    c.data[0, :] = 0.0
    return c


@dataclass(frozen=True)
class TransportGenerator:
    """Diagonal generator of the transport term: mode k carries -i k b / eps.

    The entries are identical across the six components; ``diag`` stores one
    copy of length n_tau (grid mode ordering).
    """

    n_tau: int
    b: float
    eps: float
    diag: np.ndarray = None

    def __post_init__(self):
        if self.eps <= 0 or self.b <= 0:
            raise ValueError("b and eps must be positive")
        d = -1j * mode_numbers(self.n_tau) * (self.b / self.eps)
        object.__setattr__(self, "diag", d)

    def full_diag(self) -> np.ndarray:
        """All 6 * n_tau diagonal entries in the component-major layout."""
        return np.tile(self.diag, 6)


def build_M(n_tau: int, b: float, eps: float) -> TransportGenerator:
    return TransportGenerator(n_tau=n_tau, b=b, eps=eps)


class AssemblyContext:
    """Precomputed per-grid data for repeated nonlinearity assembly.

    ``omega`` is the frozen parallel-rotation rate extracted into the linear
    flow by the stabilized stepper (0 for the plain scheme); the solver
    refreshes it once per step.
    """

    def __init__(self, n_tau: int, lin: Linearization, field: FieldModel,
                 eps: float):
        self.n_tau = n_tau
        self.lin = lin
        self.field = field
        self.eps = eps
        self.taus = tau_nodes(n_tau)
        self.omega = 0.0

    def __call__(self, c: CoefVector) -> CoefVector:
        return assemble_F(c, self)


def assemble_F(c: CoefVector, ctx: AssemblyContext,
               tau_offset: float = 0.0) -> CoefVector:
    """Spectral nonlinearity: grid transform, per-node f_tau, transform back.

    The per-node 3x3 rotation applications realize the Kronecker-structured
    conjugation operators without forming dense matrices.  ``tau_offset``
    evaluates the explicit phases at ``tau + offset`` (used by the
    translation-equivariance checks).
    """
    g = to_grid(c)
    vals = f_tau_grid(g.values, ctx.taus + tau_offset, ctx.lin, ctx.field,
                      ctx.eps, coupling=False, omega_extract=ctx.omega)
    out = grid_fft(vals)
    out[0, :] = 0.0  # keep the unpaired Nyquist mode empty (aliasing control)
    return CoefVector(out)


def assemble_coupling(c: CoefVector, lin: Linearization, eps: float) -> CoefVector:
    """Drift coupling in coefficient space: Q_par(k) += P_par(k)/eps.

    The term is tau-independent, hence exactly mode-diagonal; no transform
    is needed.
    """
    k = lin.axis
    ppar = c.data[:, 3:] @ k
    out = np.zeros_like(c.data)
    out[:, :3] = np.outer(ppar, k) / eps
    return CoefVector(out)


# ---------------------------------------------------------------------------
# serialization: 16-byte header (magic, u32 n_tau, u32 reserved), then
# little-endian float64 (re, im) pairs in the component-major layout


def save_coefs(c: CoefVector, path) -> None:
    flat = c.flat()
    buf = np.empty(2 * flat.size, dtype="<f8")
    buf[0::2] = flat.real
    buf[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", c.n_tau, 0))
        fh.write(buf.tobytes())


def load_coefs(path) -> CoefVector:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:8] != MAGIC:
            raise ValueError("not a CPD2SCL1 coefficient file")
        n_tau, _ = struct.unpack("<II", head[8:])
        raw = np.frombuffer(fh.read(), dtype="<f8")
    if raw.size != 12 * n_tau:
        raise ValueError("truncated coefficient payload")
    flat = raw[0::2] + 1j * raw[1::2]
    return CoefVector.from_flat(flat)
