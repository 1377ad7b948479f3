"""Kerr-nonlinear Qi-Wu-Zhang (QWZ) Chern insulator: model definition.

Two-band Bloch Hamiltonian on the square lattice,

    H(k, psi) = d(k) . sigma + U * diag(|psi1|^2, |psi2|^2),
    d(k) = (J sin kx, J sin ky, u + J cos kx + J cos ky),

with hopping J = 1 fixed (energies in units of J, times in 1/J).

Unit conventions: hbar = 1, so the Planck constant h is 2*pi wherever a
Hall-type response is normalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_0 = np.eye(2, dtype=complex)

#: gapless values of the topological parameter (linear band touchings)
GAPLESS_U = (0.0, 2.0, -2.0)

#: tolerance for user-supplied state normalization
NORM_INPUT_TOL = 1e-9


class GaplessParameterError(ValueError):
    """Raised when a Chern number is requested at a gap-closing parameter."""


class NormalizationError(ValueError):
    """Raised when a supplied spinor is not normalized to tolerance."""


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters: topological parameter u, Kerr strength U, hopping J=1."""

    u: float
    U: float = 0.0
    J: float = 1.0

    def __post_init__(self):
        if self.J != 1.0:
            raise ValueError("J is fixed to 1 (energies are measured in units of J)")
        if not math.isfinite(self.u):
            raise ValueError("u must be finite")
        if not (self.U >= 0.0):
            raise ValueError("U must be a nonnegative Kerr strength")


def _reduce_angle(x: float) -> float:
    """Reduce to [0, 2*pi). Idempotent, including the rounding edge at 2*pi."""
    if not math.isfinite(x):
        raise ValueError("quasimomentum components must be finite")
    r = x % TWO_PI
    if r >= TWO_PI:  # x slightly below 0 can round the modulo up to 2*pi
        r = 0.0
    return r


@dataclass(frozen=True)
class KPoint:
    """Quasimomentum in the restricted Brillouin zone, components in [0, 2*pi)."""

    kx: float
    ky: float

    def __post_init__(self):
        object.__setattr__(self, "kx", _reduce_angle(self.kx))
        object.__setattr__(self, "ky", _reduce_angle(self.ky))


@dataclass(frozen=True)
class BlochVector:
    """The real vector d(k) multiplying the Pauli matrices."""

    dx: float
    dy: float
    dz: float

    @property
    def planar_sq(self) -> float:
        return self.dx * self.dx + self.dy * self.dy

    @property
    def magnitude(self) -> float:
        return math.sqrt(self.planar_sq + self.dz * self.dz)


@dataclass(frozen=True)
class Spinor:
    """Two-component complex amplitude (c1, c2)."""

    c1: complex
    c2: complex

    @property
    def norm(self) -> float:
        return math.sqrt(abs(self.c1) ** 2 + abs(self.c2) ** 2)

    def normalized(self) -> "Spinor":
        n = self.norm
        if n == 0.0:
            raise ValueError("cannot normalize the zero spinor")
        return Spinor(self.c1 / n, self.c2 / n)

    def as_array(self) -> np.ndarray:
        return np.array([self.c1, self.c2], dtype=complex)

    @classmethod
    def from_array(cls, a) -> "Spinor":
        return cls(complex(a[0]), complex(a[1]))


def bloch_vector(params: ModelParams, k: KPoint) -> BlochVector:
    """d(k) = (sin kx, sin ky, u + cos kx + cos ky), J = 1."""
    return BlochVector(
        math.sin(k.kx),
        math.sin(k.ky),
        params.u + math.cos(k.kx) + math.cos(k.ky),
    )


def hamiltonian(params: ModelParams, k: KPoint, psi: Spinor) -> np.ndarray:
    """State-dependent 2x2 Bloch Hamiltonian d.sigma + U diag(|c1|^2, |c2|^2).

    Rejects spinors whose norm deviates from 1 by more than 1e-9; tighter
    drift is the caller's responsibility.
    """
    if abs(psi.norm - 1.0) > NORM_INPUT_TOL:
        raise NormalizationError(
            f"spinor norm {psi.norm!r} deviates from 1 beyond {NORM_INPUT_TOL}"
        )
    d = bloch_vector(params, k)
    n1 = abs(psi.c1) ** 2
    n2 = abs(psi.c2) ** 2
    return np.array(
        [
            [d.dz + params.U * n1, d.dx - 1j * d.dy],
            [d.dx + 1j * d.dy, -d.dz + params.U * n2],
        ],
        dtype=complex,
    )


def linear_eigenvalues(params: ModelParams, k: KPoint) -> tuple[float, float]:
    """Eigenvalues (-|d|, +|d|) of the linear Bloch Hamiltonian."""
    u = params.u
    rad = (
        u * u
        + 2.0
        + 2.0 * u * math.cos(k.kx)
        + 2.0 * u * math.cos(k.ky)
        + 2.0 * math.cos(k.kx) * math.cos(k.ky)
    )
    r = math.sqrt(max(rad, 0.0))
    return (-r, r)


def chern_number(u: float) -> int:
    """Ground-band Chern number C = sgn(u+2)/2 + sgn(u-2)/2 - sgn(u).

    Defined only away from the gapless values u in {0, +2, -2}.
    """
    if u in GAPLESS_U:
        raise GaplessParameterError(f"band gap closes at u={u}; Chern number undefined")
    sgn = lambda x: 1.0 if x > 0 else -1.0
    return int(round(0.5 * sgn(u + 2.0) + 0.5 * sgn(u - 2.0) - sgn(u)))
