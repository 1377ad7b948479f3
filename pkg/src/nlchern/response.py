"""Hall-type linear response of the driven nonlinear Chern insulator.

Each k_x column is initialized in a band eigenstate at (k_x, ky0) and
dragged through one full cycle k_y(t) = ky0 + F t, T = 2*pi/F, while the
velocity expectation

    v = <(1/hbar) dH/dk_x> = cos(kx) <sigma_x> - sin(kx) <sigma_z>

is accumulated into the transported charge per cycle Q(k_x).  The
response number nu averages Q over columns; its sign fixes the Brillouin
zone orientation so that in the adiabatic linear limit nu reproduces the
ground-band Chern number of ``model.chern_number``.  Nonlinearity first
shifts nu off the integer and, once the swept band develops cone or tube
structures, destroys the quantization altogether; the phase diagram below
labels those regimes from the analytic critical strengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import GaplessParameterError, KPoint, ModelParams, Spinor, chern_number
from .spectrum import physical_spectrum


class RegimeError(RuntimeError):
    """A requested band branch does not exist at a sweep start point."""


@dataclass(frozen=True)
class ResponseSummary:
    u: float
    U: float
    F: float
    band: str
    nu: float
    nu_linear: int | None
    adiabatic: bool
    n_kx: int
    steps: int

    def to_dict(self) -> dict:
        return {
            "u": self.u,
            "U": self.U,
            "F": self.F,
            "band": self.band,
            "nu": self.nu,
            "nu_linear": self.nu_linear,
            "adiabatic": self.adiabatic,
            "n_kx": self.n_kx,
            "steps": self.steps,
        }


def velocity_expectation(params: ModelParams, k: KPoint, psi: Spinor) -> float:
    """Expectation of the velocity operator along x at fixed state.

    Only the linear part of the Hamiltonian carries explicit k_x
    dependence; the Kerr diagonal depends on k through the state alone
    and does not enter the derivative.
    """
    c1, c2 = psi.c1, psi.c2
    sx = 2.0 * (c1.conjugate() * c2).real
    sz = (c1.real**2 + c1.imag**2) - (c2.real**2 + c2.imag**2)
    return math.cos(k.kx) * sx - math.sin(k.kx) * sz


def _band_index(band: str, n_branches: int) -> int:
    if band == "ground":
        return 0
    if band == "excited":
        return n_branches - 1
    raise ValueError('band must be "ground" or "excited"')


def _batched_rhs(u, U, dx_col, dz_base, ky, psi):
    dy = math.sin(ky)
    dz = dz_base + math.cos(ky)
    od = dx_col - 1j * dy
    p1 = psi[:, 0]
    p2 = psi[:, 1]
    h1 = (dz + U * (p1.real**2 + p1.imag**2)) * p1 + od * p2
    h2 = np.conj(od) * p1 + (U * (p2.real**2 + p2.imag**2) - dz) * p2
    return -1j * np.stack([h1, h2], axis=1)


def _batched_velocity(cx_col, sx_col, psi):
    p1 = psi[:, 0]
    p2 = psi[:, 1]
    sx = 2.0 * (np.conj(p1) * p2).real
    sz = (p1.real**2 + p1.imag**2) - (p2.real**2 + p2.imag**2)
    return cx_col * sx - sx_col * sz


def sweep_initial_states(
    params: ModelParams, band: str, kxs, ky0: float = 0.0
) -> np.ndarray:
    """Band eigenstates at the sweep start points (kx, ky0), one per column."""
    psi = np.empty((len(kxs), 2), dtype=complex)
    for i, kx in enumerate(kxs):
        pairs = physical_spectrum(params, KPoint(float(kx), ky0))
        if len(pairs) < 2:
            raise RegimeError(
                f"band structure at kx={kx:.6g}, ky={ky0:.6g} has fewer than two "
                f"branches; no {band} branch to start from"
            )
        st = pairs[_band_index(band, len(pairs))].state
        psi[i, 0] = st.c1
        psi[i, 1] = st.c2
    return psi


def pumped_charge(
    params: ModelParams,
    band: str = "ground",
    F: float = 0.01,
    n_kx: int = 50,
    dt: float = 0.01,
    ky0: float = 0.0,
    renormalize: bool = True,
) -> ResponseSummary:
    """Transported charge per drive cycle, averaged over k_x columns.

    All columns share the drive k_y(t) = ky0 + F t and integrate in one
    batched RK4 loop; the velocity integral uses the trapezoid rule on
    the step grid.  Renormalization per step is on by default: a full
    cycle takes 2*pi/F time units and the drift bound matters there.
    """
    if F <= 0.0:
        raise ValueError("drive rate F must be positive")
    u, U = params.u, params.U
    kxs = 2.0 * math.pi * np.arange(n_kx) / n_kx
    psi = sweep_initial_states(params, band, kxs, ky0)

    T = 2.0 * math.pi / F
    n_steps = int(round(T / dt))
    sx_col = np.sin(kxs)
    cx_col = np.cos(kxs)
    dz_base = u + cx_col  # + cos(ky) added per stage

    Q = np.zeros(n_kx)
    v_prev = _batched_velocity(cx_col, sx_col, psi)
    half = 0.5 * dt
    for n in range(n_steps):
        t = n * dt
        ky_a = ky0 + F * t
        ky_b = ky0 + F * (t + half)
        ky_c = ky0 + F * (t + dt)
        k1 = _batched_rhs(u, U, sx_col, dz_base, ky_a, psi)
        k2 = _batched_rhs(u, U, sx_col, dz_base, ky_b, psi + half * k1)
        k3 = _batched_rhs(u, U, sx_col, dz_base, ky_b, psi + half * k2)
        k4 = _batched_rhs(u, U, sx_col, dz_base, ky_c, psi + dt * k3)
        psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if renormalize:
            norms = np.sqrt(np.sum(psi.real**2 + psi.imag**2, axis=1))
            psi /= norms[:, None]
        v_new = _batched_velocity(cx_col, sx_col, psi)
        Q += half * (v_prev + v_new)
        v_prev = v_new

    # Zone orientation fixed so the linear adiabatic limit returns the
    # ground-band Chern number (and its negative for the excited band).
    nu = -float(Q.mean())

    try:
        c = chern_number(u)
        nu_linear = c if band == "ground" else -c
    except GaplessParameterError:
        nu_linear = None

    return ResponseSummary(
        u=u,
        U=U,
        F=F,
        band=band,
        nu=nu,
        nu_linear=nu_linear,
        adiabatic=is_adiabatic(params, band),
        n_kx=n_kx,
        steps=n_steps,
    )


# ---------------------------------------------------------------------------
# adiabatic / non-adiabatic phase diagram
# ---------------------------------------------------------------------------

def ground_critical_strength(u: float) -> float:
    """Kerr strength opening the first ground-band cone on the sweep path.

    The diagonal path crosses the polar points (0, 0) and (pi, pi) with
    critical strengths 2|u + 2| and 2|u - 2|; the smaller of the two is
    2 * ||u| - 2|.
    """
    return 2.0 * abs(abs(u) - 2.0)


def excited_critical_strength(u: float, n: int = 2001) -> float:
    """Minimal Kerr strength opening the excited-band tube, over the dz=0 contour.

    The contour u + cos kx + cos ky = 0 exists only for |u| < 2; returns
    +inf otherwise (the excited band never develops a tube).
    """
    if abs(u) >= 2.0:
        return math.inf
    kx = np.linspace(0.0, 2.0 * math.pi, n)
    c = -u - np.cos(kx)
    valid = np.abs(c) <= 1.0
    if not np.any(valid):
        return math.inf
    sin2ky = 1.0 - c[valid] ** 2
    s = np.sin(kx[valid]) ** 2 + sin2ky
    return float(2.0 * np.sqrt(np.min(s)))


def is_adiabatic(params: ModelParams, band: str) -> bool:
    """Whether the swept band stays free of nonlinearity-induced structure."""
    if band == "ground":
        return not params.U > ground_critical_strength(params.u)
    if band == "excited":
        return not params.U > excited_critical_strength(params.u)
    raise ValueError('band must be "ground" or "excited"')


@dataclass(frozen=True)
class PhaseDiagram:
    band: str
    u_values: tuple[float, ...]
    U_values: tuple[float, ...]
    labels: tuple[tuple[str, ...], ...]  # labels[i][j] for (u_values[i], U_values[j])


def phase_diagram(
    u_range: tuple[float, float],
    U_range: tuple[float, float],
    band: str = "ground",
    resolution: int = 50,
) -> PhaseDiagram:
    """Label each (u, U) cell A (adiabatic) or nA over the given ranges."""
    us = np.linspace(u_range[0], u_range[1], resolution)
    Us = np.linspace(U_range[0], U_range[1], resolution)
    labels = []
    for u in us:
        crit = (
            ground_critical_strength(float(u))
            if band == "ground"
            else excited_critical_strength(float(u))
        )
        labels.append(tuple("nA" if U > crit else "A" for U in Us))
    return PhaseDiagram(band, tuple(map(float, us)), tuple(map(float, Us)), tuple(labels))


def write_phase_diagram_csv(diagram: PhaseDiagram, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "U", "label"])
        for i, u in enumerate(diagram.u_values):
            for j, U in enumerate(diagram.U_values):
                writer.writerow([f"{u:.17g}", f"{U:.17g}", diagram.labels[i][j]])
