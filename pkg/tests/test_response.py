import math

import numpy as np
import pytest

from nlchern.dynamics import DriveSpec, detect_breakdown, evolve
from nlchern.model import KPoint, ModelParams, Spinor, chern_number
from nlchern.response import (
    excited_critical_strength,
    ground_critical_strength,
    is_adiabatic,
    phase_diagram,
    pumped_charge,
    velocity_expectation,
    write_phase_diagram_csv,
)
from nlchern.spectrum import physical_spectrum

from oracles import plaquette_chern

TWO_PI = 2.0 * math.pi


def test_velocity_examples():
    p = ModelParams(u=1.0, U=0.0)
    s = 1.0 / math.sqrt(2.0)
    assert velocity_expectation(p, KPoint(0.0, 0.0), Spinor(1.0, 0.0)) == pytest.approx(0.0, abs=1e-15)
    assert velocity_expectation(p, KPoint(math.pi / 2, 0.0), Spinor(1.0, 0.0)) == pytest.approx(-1.0, abs=1e-12)
    assert velocity_expectation(p, KPoint(math.pi / 2, 0.0), Spinor(s, s)) == pytest.approx(0.0, abs=1e-12)


def test_velocity_band_sum_rule_linear():
    rng = np.random.default_rng(19)
    p = ModelParams(u=1.0, U=0.0)
    for _ in range(30):
        k = KPoint(rng.uniform(0, TWO_PI), rng.uniform(0, TWO_PI))
        pairs = physical_spectrum(p, k)
        total = sum(velocity_expectation(p, k, q.state) for q in pairs)
        assert abs(total) < 1e-10


def test_plaquette_oracle_matches_formula():
    for u in (3.0, 1.0, -1.0, -3.0):
        c = plaquette_chern(u, "ground", n=60)
        assert c == pytest.approx(chern_number(u), abs=1e-6)
        assert plaquette_chern(u, "excited", n=60) == pytest.approx(-chern_number(u), abs=1e-6)


def test_pump_quantization_fast():
    # coarse drive keeps runtime small; full-precision runs live in the
    # acceptance suite
    rs = pumped_charge(ModelParams(u=1.0, U=0.0), "ground", F=0.05, n_kx=16, dt=0.01)
    assert rs.nu == pytest.approx(-1.0, abs=0.02)
    assert rs.nu_linear == -1
    rs2 = pumped_charge(ModelParams(u=1.0, U=0.0), "excited", F=0.05, n_kx=16, dt=0.01)
    assert rs2.nu == pytest.approx(1.0, abs=0.02)
    assert rs2.nu_linear == 1


def test_pump_F_robustness_linear():
    a = pumped_charge(ModelParams(u=1.0, U=0.0), "ground", F=0.02, n_kx=10, dt=0.01)
    b = pumped_charge(ModelParams(u=1.0, U=0.0), "ground", F=0.01, n_kx=10, dt=0.01)
    assert abs(a.nu - b.nu) < 0.005


def test_critical_strengths():
    assert ground_critical_strength(3.0) == 2.0
    assert ground_critical_strength(1.0) == 2.0
    assert ground_critical_strength(0.5) == 3.0
    # mirror symmetry u -> -u (the sweep crosses the (0,0) cone instead)
    assert ground_critical_strength(-1.0) == 2.0
    assert ground_critical_strength(-3.0) == 2.0
    assert excited_critical_strength(3.0) == math.inf
    for u in (1.0, 1.2, -0.7):
        expect = 2.0 * math.sqrt(1.0 - (1.0 - abs(u)) ** 2)
        assert excited_critical_strength(u) == pytest.approx(expect, abs=1e-5)
        assert excited_critical_strength(-u) == pytest.approx(expect, abs=1e-5)


def test_phase_diagram_examples():
    assert is_adiabatic(ModelParams(u=3.0, U=1.0), "ground")
    assert is_adiabatic(ModelParams(u=3.0, U=12.0), "excited")
    assert not is_adiabatic(ModelParams(u=1.0, U=4.0), "ground")


def test_phase_diagram_grid_and_csv(tmp_path):
    diagram = phase_diagram((0.0, 3.0), (0.0, 5.0), band="ground", resolution=7)
    assert len(diagram.u_values) == 7 and len(diagram.U_values) == 7
    for i, u in enumerate(diagram.u_values):
        for j, U in enumerate(diagram.U_values):
            expect = "nA" if U > 2.0 * abs(abs(u) - 2.0) else "A"
            assert diagram.labels[i][j] == expect
    out = tmp_path / "pd.csv"
    write_phase_diagram_csv(diagram, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "u,U,label"
    assert len(lines) == 1 + 49


# ---------------------------------------------------------------------------
# label consistency: analytic A/nA labels vs actual driven trajectories
# ---------------------------------------------------------------------------

_SPOT_CELLS = [
    # (u, U, band); labels follow from the critical strengths
    (3.0, 1.0, "ground"),
    (2.5, 0.6, "ground"),
    (1.0, 1.5, "ground"),
    (0.5, 2.5, "ground"),
    (-3.0, 1.0, "ground"),
    (-1.0, 1.5, "ground"),
    (-1.0, 3.0, "ground"),
    (1.0, 4.0, "ground"),
    (1.5, 1.5, "ground"),
    (2.0, 4.0, "ground"),
    (3.0, 2.5, "ground"),
    (0.5, 3.5, "ground"),
    (3.0, 5.0, "excited"),
    (2.5, 4.0, "excited"),
    (1.0, 1.5, "excited"),
    (1.2, 1.5, "excited"),
    (-3.0, 4.0, "excited"),
    (-2.5, 2.0, "excited"),
    (1.0, 4.0, "excited"),
    (0.5, 3.0, "excited"),
    (1.0, 3.0, "excited"),
    (-1.0, 4.0, "excited"),
]


def _diagonal_breakdown(u, U, band):
    params = ModelParams(u=u, U=U)
    pairs = physical_spectrum(params, KPoint(0.0, 0.0))
    initial = pairs[0].state if band == "ground" else pairs[-1].state
    drive = DriveSpec(KPoint(0.0, 0.0), (0.01, 0.01), TWO_PI / 0.01, 0.005)
    recs = evolve(params, drive, initial, sample_every=40, renormalize=True)
    return detect_breakdown(recs)


def test_label_consistency_spot_checks():
    assert len(_SPOT_CELLS) >= 20
    for u, U, band in _SPOT_CELLS:
        adiabatic = is_adiabatic(ModelParams(u=u, U=U), band)
        onset = _diagonal_breakdown(u, U, band)
        if adiabatic:
            assert onset is None, (u, U, band, onset)
        else:
            assert onset is not None, (u, U, band)
