"""Self-consistent nonlinear Bloch spectrum.

Stationary states of H(k, psi) psi = eps * psi with the Kerr diagonal are
parametrized by the population imbalance kappa = |c1|^2 - |c2|^2, which
obeys (eps - U) * kappa = dz.  Eliminating kappa turns the eigenproblem
into a monic quartic in eps,

    f(eps) = (eps-U)^2 (eps-U/2)^2 - dz^2 (eps-U/2)^2 - (dx^2+dy^2)(eps-U)^2,

whose real roots are kept only when they correspond to a normalizable
state (|kappa| <= 1, or the explicit two-fold construction on dz = 0).
Degenerate eigenvalues come in three families:

  I   : eps = U/2 at dx = dy = 0, bifurcating for U > 2|dz|,
  II  : eps = U   on the dz = 0 contour, bifurcating for U > 2 sqrt(dx^2+dy^2),
  III : eps = U/2 + [4 U (dx^2+dy^2)]^(1/3) / 2 on a one-dimensional locus
        dz = +-{U^(2/3) - [4(dx^2+dy^2)]^(1/3)}^(3/2) / 2,

the III family marking the fold edges of cone/tube structures.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import (
    BlochVector,
    KPoint,
    ModelParams,
    Spinor,
    bloch_vector,
    hamiltonian,
)

# A quartic root counts as real when its imaginary part is negligible at
# the scale of its real part; double roots perturb into tiny conjugate
# pairs under floating point, handled separately in solve_quartic.
REAL_IM_TOL = 1e-8

# Physicality: |kappa| may exceed 1 by at most this much before a root is
# discarded (the U=0 spurious double zero root has |kappa| -> inf).
KAPPA_TOL = 1e-9

_CLUSTER_REL = 1e-7      # roots closer than this (relative) form one eigenvalue
_SINGULAR_REL = 1e-6     # |eps - U| below this switches to the dz=0 construction
_PLANAR_SQ_TOL = 1e-12   # dx^2+dy^2 below this counts as a polar (dx=dy=0) point


class DegeneracyKind(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"


class AtCriticalityError(ArithmeticError):
    """First-order bifurcation correction is singular: U sits exactly at U_c."""


@dataclass(frozen=True)
class NonlinearEigenpair:
    """One self-consistent stationary solution at fixed k."""

    epsilon: float
    kappa: float
    state: Spinor
    multiplicity: int = 1


@dataclass(frozen=True)
class DegeneratePoint:
    kind: DegeneracyKind
    k: KPoint
    epsilon: float
    critical_U: float | None = None


@dataclass(frozen=True)
class BifurcationResult:
    """Real first-order corrections eps1 near a degenerate point."""

    kind: DegeneracyKind
    values: tuple[float, ...]
    discriminant: float


def _coeffs_from(U: float, d: BlochVector) -> list[float]:
    s = d.planar_sq
    z2 = d.dz * d.dz
    return [
        1.0,
        -3.0 * U,
        3.25 * U * U - z2 - s,
        U * z2 + 2.0 * U * s - 1.5 * U**3,
        0.25 * U**4 - 0.25 * U * U * z2 - U * U * s,
    ]


def quartic_coefficients(params: ModelParams, d: BlochVector) -> list[float]:
    """Monic quartic coefficients [c4, c3, c2, c1, c0] of f(eps)."""
    return _coeffs_from(params.U, d)


def _horner(coeffs, x):
    acc = 0.0 * x
    for c in coeffs:
        acc = acc * x + c
    return acc


def solve_quartic(coeffs) -> list[complex]:
    """All four roots (with multiplicity) of a monic quartic.

    Companion-matrix eigenvalues followed by one Newton polish per root.
    Conjugate pairs whose real part already satisfies the backward
    residual bound are collapsed onto a real double root (companion
    eigenvalues split exact double roots into spurious conjugate pairs);
    collapsed roots are polished on f' instead, where they are simple.
    """
    c = [float(x) for x in coeffs]
    if len(c) != 5:
        raise ValueError("expected 5 quartic coefficients [c4, c3, c2, c1, c0]")
    if c[0] != 1.0:
        raise ValueError("quartic must be monic (c4 = 1)")
    _, c3, c2, c1, c0 = c
    companion = np.array(
        [
            [0.0, 0.0, 0.0, -c0],
            [1.0, 0.0, 0.0, -c1],
            [0.0, 1.0, 0.0, -c2],
            [0.0, 0.0, 1.0, -c3],
        ]
    )
    roots = list(np.linalg.eigvals(companion).astype(complex))

    dcoeffs = [4.0, 3.0 * c3, 2.0 * c2, c1]
    ddcoeffs = [12.0, 6.0 * c3, 2.0 * c2]
    res_bound = 1e-9 * max(1.0, math.sqrt(sum(x * x for x in c)))

    def polish_double(x: float) -> float:
        for _ in range(3):  # double root of f is a simple root of f'
            fp = _horner(dcoeffs, x)
            fpp = _horner(ddcoeffs, x)
            if fpp == 0.0:
                break
            step = fp / fpp
            if abs(step) > 1e-2 * max(1.0, abs(x)):
                break
            x -= step
        return x

    # Companion eigenvalues split exact double roots into spurious pairs,
    # either complex-conjugate or two nearby reals; collapse a pair onto
    # one double root whenever its midpoint already satisfies the backward
    # residual bound, i.e. it is a root to working precision.
    roots.sort(key=lambda r: (r.real, r.imag))
    out: list[complex] = []
    i = 0
    while i < len(roots):
        r = roots[i]
        if i + 1 < len(roots):
            nxt = roots[i + 1]
            mid = 0.5 * (r.real + nxt.real)
            conj_pair = (
                abs(r.imag) > 0.0
                and abs(nxt.conjugate() - r) <= 1e-12 * max(1.0, abs(r))
                and abs(r.imag) <= 1e-6 * max(1.0, abs(r.real))
            )
            real_pair = (
                r.imag == 0.0
                and nxt.imag == 0.0
                and abs(nxt.real - r.real) <= 1e-6 * max(1.0, abs(mid))
            )
            if (conj_pair or real_pair) and abs(_horner(c, mid)) <= res_bound:
                x = polish_double(mid)
                out.extend([complex(x), complex(x)])
                i += 2
                continue
        fp = _horner(dcoeffs, r)
        if fp != 0.0:
            step = _horner(c, r) / fp
            if abs(step) < 1e-2 * max(1.0, abs(r)) and abs(
                _horner(c, r - step)
            ) < abs(_horner(c, r)):
                r = r - step
        out.append(r)
        i += 1
    return out


def _real_roots(roots) -> list[float]:
    return [
        r.real for r in roots if abs(r.imag) < REAL_IM_TOL * max(1.0, abs(r.real))
    ]


def _cluster(values: list[float], tol: float) -> list[tuple[float, int]]:
    """Group sorted near-equal values into (mean, multiplicity) clusters."""
    if not values:
        return []
    values = sorted(values)
    clusters = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > tol:
            group = values[start:i]
            clusters.append((sum(group) / len(group), len(group)))
            start = i
    return clusters


def _generic_state(dx: float, dy: float, dznl: float, lam: float) -> Spinor:
    """Eigenstate ((dx - i dy), lam - dznl) / sqrt(2 lam (lam - dznl)).

    The normalizer equals dx^2 + dy^2 + (lam - dznl)^2 for self-consistent
    roots, which is the numerically safe form.  Falls back to a polarized
    state when the whole vector degenerates (dx = dy = 0 with lam = dznl).
    """
    amp = lam - dznl
    norm_sq = dx * dx + dy * dy + amp * amp
    if norm_sq <= 1e-24:
        return Spinor(1.0 + 0.0j, 0.0j) if abs(lam - dznl) <= abs(lam + dznl) else Spinor(
            0.0j, 1.0 + 0.0j
        )
    n = math.sqrt(norm_sq)
    return Spinor(complex(dx, -dy) / n, complex(amp) / n)


def _pairs_for_cluster(
    eps: float, mult: int, d: BlochVector, U: float, scale: float
) -> list[NonlinearEigenpair]:
    s = d.planar_sq
    dz = d.dz
    sing_tol = _SINGULAR_REL * scale

    if abs(eps - U) <= sing_tol:
        # Roots pinned at eps = U exist only on the dz = 0 contour, where
        # kappa decouples from (eps-U) kappa = dz and follows from the
        # normalization-compatible two-fold construction.
        if abs(dz) > sing_tol:
            return []  # e.g. the spurious U=0 double zero
        if U <= 1e-12:
            # fully degenerate d ~ 0 at U = 0: any basis pair
            return [
                NonlinearEigenpair(eps, -1.0, Spinor(0.0j, 1.0 + 0.0j), 1),
                NonlinearEigenpair(eps, 1.0, Spinor(1.0 + 0.0j, 0.0j), 1),
            ]
        disc = U * U - 4.0 * s
        if disc < -1e-12 * scale * scale:
            return []  # below the II-type critical strength
        kap = math.sqrt(max(disc, 0.0)) / U
        if mult == 1 and eps != U and kap > 1e-9:
            # a lone near-singular root carries the branch sign of its
            # own offset; emitting both signs would double-count it
            kappas = [kap if dz / (eps - U) > 0 else -kap]
        elif kap > 1e-9:
            kappas = [-kap, kap]
        else:
            kappas = [0.0]
        pairs = []
        for kappa in kappas:
            dznl = dz + 0.5 * U * kappa
            state = _generic_state(d.dx, d.dy, dznl, eps - 0.5 * U)
            pairs.append(NonlinearEigenpair(eps, kappa, state, 1 if len(kappas) > 1 else mult))
        return pairs

    kappa = dz / (eps - U)
    if abs(kappa) > 1.0 + KAPPA_TOL:
        return []
    kappa = min(1.0, max(-1.0, kappa))
    lam = eps - 0.5 * U

    if s <= _PLANAR_SQ_TOL * scale * scale:
        if mult >= 2 and abs(lam) <= _SINGULAR_REL * scale:
            # population-split degenerate pair at eps = U/2; the free
            # relative phase is fixed to the +, theta = 0 representative
            c1 = math.sqrt(0.5 * (1.0 + kappa))
            c2 = math.sqrt(0.5 * (1.0 - kappa))
            return [NonlinearEigenpair(eps, kappa, Spinor(complex(c1), complex(c2)), mult)]
        state = Spinor(1.0 + 0.0j, 0.0j) if kappa > 0 else Spinor(0.0j, 1.0 + 0.0j)
        return [NonlinearEigenpair(eps, kappa, state, mult)]

    dznl = dz * (2.0 * eps - U) / (2.0 * (eps - U))
    state = _generic_state(d.dx, d.dy, dznl, lam)
    return [NonlinearEigenpair(eps, kappa, state.normalized(), mult)]


def nonlinear_eigenpairs(d: BlochVector, U: float) -> list[NonlinearEigenpair]:
    """All physical stationary solutions for a raw Bloch vector and Kerr U."""
    roots = solve_quartic(_coeffs_from(U, d))
    scale = max(1.0, abs(U), d.magnitude)
    clusters = _cluster(_real_roots(roots), _CLUSTER_REL * scale)
    pairs: list[NonlinearEigenpair] = []
    for eps, mult in clusters:
        pairs.extend(_pairs_for_cluster(eps, mult, d, U, scale))
    if not pairs:
        raise AssertionError(
            "internal error: no physical root survived; the self-consistent "
            "Hermitian problem always admits at least two stationary states"
        )
    pairs.sort(key=lambda p: (p.epsilon, p.kappa))
    return pairs


def physical_spectrum(params: ModelParams, k: KPoint) -> list[NonlinearEigenpair]:
    """Physical self-consistent eigenpairs at k, sorted by (epsilon, kappa)."""
    return nonlinear_eigenpairs(bloch_vector(params, k), params.U)


def branch_count(pairs: list[NonlinearEigenpair]) -> int:
    """Number of stationary states counting multiplicity (2 to 4)."""
    return sum(p.multiplicity for p in pairs)


def eigenpair_residual(params: ModelParams, k: KPoint, pair: NonlinearEigenpair) -> float:
    """|| H(state) state - epsilon state ||, the self-consistency defect."""
    H = hamiltonian(params, k, pair.state)
    v = pair.state.as_array()
    return float(np.linalg.norm(H @ v - pair.epsilon * v))


# ---------------------------------------------------------------------------
# degeneracy classification
# ---------------------------------------------------------------------------

def _iii_residual(d: BlochVector, U: float, sign: float) -> float | None:
    """Signed defect of the III-type locus equation; None outside its domain."""
    t = U ** (2.0 / 3.0) - (4.0 * d.planar_sq) ** (1.0 / 3.0)
    if t < 0.0:
        return None
    return d.dz - sign * 0.5 * t**1.5


def iii_epsilon(d: BlochVector, U: float) -> float:
    """Two-fold degenerate eigenvalue on the III locus."""
    return 0.5 * U + 0.5 * (4.0 * U * d.planar_sq) ** (1.0 / 3.0)


def _bisect_edge(params, ka, kb, sign, tol=1e-10, max_iter=200):
    """Root of the III residual along the segment ka -> kb (raw angles)."""
    def res(t):
        kx = ka[0] + t * (kb[0] - ka[0])
        ky = ka[1] + t * (kb[1] - ka[1])
        return _iii_residual(bloch_vector(params, KPoint(kx, ky)), params.U, sign)

    lo, hi = 0.0, 1.0
    rlo = res(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        rm = res(mid)
        if rm is None:  # fell off the fractional-power domain; give up
            return None
        if abs(rm) < tol:
            return mid
        if (rlo < 0) == (rm < 0):
            lo, rlo = mid, rm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def classify_degeneracies(params: ModelParams, resolution: int = 64) -> list[DegeneratePoint]:
    """Locate and classify all degenerate eigenvalues over the Brillouin zone.

    I-type points sit at the four polar momenta {0, pi}^2 and are reported
    with their critical strength 2|dz|; II-type points are sampled along
    the dz = 0 contour (present only for |u| < 2) with critical strength
    2 sqrt(dx^2 + dy^2); III-type points are grid-edge crossings of the
    signed locus equation, bisection-refined to |residual| < 1e-10.
    """
    if resolution < 16:
        raise ValueError("grid resolution must be at least 16 per axis")
    u, U = params.u, params.U
    points: list[DegeneratePoint] = []

    for kx in (0.0, math.pi):
        for ky in (0.0, math.pi):
            dz = u + math.cos(kx) + math.cos(ky)
            points.append(
                DegeneratePoint(DegeneracyKind.I, KPoint(kx, ky), 0.5 * U, 2.0 * abs(dz))
            )

    if abs(u) < 2.0:
        for kx in np.linspace(0.0, 2.0 * math.pi, resolution, endpoint=False):
            c = -u - math.cos(kx)
            if abs(c) > 1.0:
                continue
            ky0 = math.acos(c)
            kys = {ky0, (2.0 * math.pi - ky0) % (2.0 * math.pi)}
            for ky in sorted(kys):
                uc = 2.0 * math.sqrt(math.sin(kx) ** 2 + math.sin(ky) ** 2)
                points.append(
                    DegeneratePoint(DegeneracyKind.II, KPoint(float(kx), float(ky)), U, uc)
                )

    if U > 0.0:
        grid = np.linspace(0.0, 2.0 * math.pi, resolution, endpoint=False)
        step = grid[1] - grid[0]
        for sign in (1.0, -1.0):
            rvals = np.full((resolution, resolution), np.nan)
            for i, kx in enumerate(grid):
                for j, ky in enumerate(grid):
                    r = _iii_residual(bloch_vector(params, KPoint(float(kx), float(ky))), U, sign)
                    rvals[i, j] = np.nan if r is None else r
            for i in range(resolution):
                for j in range(resolution):
                    a = rvals[i, j]
                    if not np.isfinite(a):
                        continue
                    for di, dj in ((1, 0), (0, 1)):
                        b = rvals[(i + di) % resolution, (j + dj) % resolution]
                        if not np.isfinite(b) or (a < 0) == (b < 0):
                            continue
                        ka = (grid[i], grid[j])
                        kb = (grid[i] + di * step, grid[j] + dj * step)
                        t = _bisect_edge(params, ka, kb, sign)
                        if t is None:
                            continue
                        kstar = KPoint(ka[0] + t * (kb[0] - ka[0]), ka[1] + t * (kb[1] - ka[1]))
                        d = bloch_vector(params, kstar)
                        points.append(
                            DegeneratePoint(DegeneracyKind.III, kstar, iii_epsilon(d, U), None)
                        )
    return points


# ---------------------------------------------------------------------------
# first-order bifurcation analysis
# ---------------------------------------------------------------------------

def _d_first_order(params: ModelParams, k0: KPoint, dk) -> tuple[float, float, float]:
    dkx, dky = float(dk[0]), float(dk[1])
    return (
        dkx * math.cos(k0.kx),
        dky * math.cos(k0.ky),
        -dkx * math.sin(k0.kx) - dky * math.sin(k0.ky),
    )


def _degenerate_kind_and_eps(params: ModelParams, d: BlochVector) -> tuple[DegeneracyKind, float]:
    U = params.U
    if d.planar_sq <= 1e-18:
        return DegeneracyKind.I, 0.5 * U
    if abs(d.dz) <= 1e-9:
        return DegeneracyKind.II, U
    for sign in (1.0, -1.0):
        r = _iii_residual(d, U, sign)
        if r is not None and abs(r) <= 1e-7:
            return DegeneracyKind.III, iii_epsilon(d, U)
    raise ValueError("k0 is not a degenerate point of any recognized kind")


def bifurcation_correction(params: ModelParams, k0: KPoint, dk) -> BifurcationResult:
    """First-order eigenvalue corrections a x^2 + b x + c = 0 near a degeneracy.

    Coefficients are the exact partial derivatives of the quartic f with
    respect to eps and the Bloch-vector components, contracted with the
    first-order displacement d^(1) = (dk . grad) d at k0.  The sign of the
    discriminant b^2 - 4ac decides whether the bifurcated pair is real.
    """
    if math.hypot(float(dk[0]), float(dk[1])) > 0.1 + 1e-12:
        raise ValueError("displacement |dk| must be small (<= 0.1)")
    U = params.U
    d0 = bloch_vector(params, k0)
    kind, eps0 = _degenerate_kind_and_eps(params, d0)

    dx1, dy1, dz1 = _d_first_order(params, k0, dk)
    A = eps0 - U
    B = eps0 - 0.5 * U
    s0 = d0.planar_sq
    z0 = d0.dz

    f_eps = 2.0 * A * B * B + 2.0 * A * A * B - 2.0 * z0 * z0 * B - 2.0 * s0 * A
    f_epseps = 2.0 * B * B + 8.0 * A * B + 2.0 * A * A - 2.0 * z0 * z0 - 2.0 * s0

    a = 0.5 * f_epseps
    b = f_eps + (-4.0 * d0.dx * A) * dx1 + (-4.0 * d0.dy * A) * dy1 + (-4.0 * z0 * B) * dz1
    c = (
        (-2.0 * d0.dx * A * A) * dx1
        + (-2.0 * d0.dy * A * A) * dy1
        + (-2.0 * z0 * B * B) * dz1
        + 0.5 * (-2.0 * A * A) * (dx1 * dx1 + dy1 * dy1)
        + 0.5 * (-2.0 * B * B) * dz1 * dz1
    )

    scale = max(1.0, U * U, d0.magnitude ** 2)
    if abs(a) <= 1e-10 * scale:
        raise AtCriticalityError(
            f"quadratic coefficient vanishes at the {kind.value}-type point: "
            "U sits exactly at the critical strength"
        )
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return BifurcationResult(kind, (), disc)
    r = math.sqrt(disc)
    vals = tuple(sorted(((-b - r) / (2.0 * a), (-b + r) / (2.0 * a))))
    return BifurcationResult(kind, vals, disc)


# ---------------------------------------------------------------------------
# band surfaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BandNode:
    kx: float
    ky: float
    pairs: tuple[NonlinearEigenpair, ...]

    @property
    def branch_count(self) -> int:
        return sum(p.multiplicity for p in self.pairs)


def band_surface(params: ModelParams, n: int) -> list[BandNode]:
    """Physical spectrum on an inclusive n x n grid over [0, 2*pi]^2.

    Pure per-node computation, deterministically ordered by (kx, ky);
    nodes are independent and may be distributed across workers freely.
    """
    if n < 2:
        raise ValueError("band surface needs at least a 2 x 2 grid")
    axis = np.linspace(0.0, 2.0 * math.pi, n)
    nodes = []
    for kx in axis:
        for ky in axis:
            pairs = physical_spectrum(params, KPoint(float(kx), float(ky)))
            nodes.append(BandNode(float(kx), float(ky), tuple(pairs)))
    return nodes


def band_surface_rows(nodes: list[BandNode]):
    """Flatten to CSV rows: one row per branch per node, duplicating
    population-split degenerate pairs according to their multiplicity."""
    for node in nodes:
        idx = 0
        for p in node.pairs:
            for _ in range(p.multiplicity):
                yield (
                    node.kx,
                    node.ky,
                    idx,
                    p.epsilon,
                    p.kappa,
                    p.state.c1.real,
                    p.state.c1.imag,
                    p.state.c2.real,
                    p.state.c2.imag,
                )
                idx += 1
