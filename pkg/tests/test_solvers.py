import numpy as np
import pytest

from planefocal.exceptions import DegenerateMotion, NoRealRoot, RejectSample
from planefocal.solvers import (
    FocalSolution,
    focal_bracket,
    oracle_cost,
    solve_ff,
    solve_fff,
    solve_fr,
    solve_frr,
)

from conftest import synth_pair, translation_pair

# Frozen oracle: oracle_cost on synth_pair(900, 900, 900, seed=7) with f2
# perturbed by a factor 1.2.
ORACLE_OFF_TRUTH = 0.07639608469353663


def _best(solutions, key):
    return min(key(s) for s in solutions)


def test_focal_solution_validation():
    s = FocalSolution(500.0, 600.0, 700.0, "IV")
    assert (s.f1, s.f2, s.f3, s.case) == (500.0, 600.0, 700.0, "IV")
    with pytest.raises(ValueError):
        FocalSolution(-1.0, 600.0, 700.0, "I")
    with pytest.raises(ValueError):
        FocalSolution(500.0, 600.0, 700.0, "V")


def test_focal_bracket():
    lo, hi = focal_bracket((1920.0, 1080.0), (10.0, 150.0))
    assert np.isclose(lo, 960.0 / np.tan(np.deg2rad(75.0)))
    assert np.isclose(hi, 960.0 / np.tan(np.deg2rad(5.0)))
    assert lo < 500.0 < hi


def test_solve_fff_recovers_truth():
    for seed in range(15):
        f = float(np.random.default_rng(seed).uniform(300.0, 3000.0))
        G2, G3 = synth_pair(f, f, f, seed=seed)
        sols = solve_fff(G2, G3)
        assert 1 <= len(sols) <= 9
        assert all(s.case == "I" and s.f1 == s.f2 == s.f3 for s in sols)
        # ascending order
        fs = [s.f1 for s in sols]
        assert fs == sorted(fs)
        assert _best(sols, lambda s: abs(s.f1 - f) / f) < 1e-8


def test_solve_ff_recovers_truth():
    for seed in range(15):
        rng = np.random.default_rng(seed)
        f1, f = rng.uniform(300.0, 3000.0, size=2)
        G2, G3 = synth_pair(f1, f, f, seed=seed + 50)
        sols = solve_ff(G2, G3, f1)
        assert 1 <= len(sols) <= 6
        assert all(s.case == "II" and s.f1 == f1 and s.f2 == s.f3 for s in sols)
        assert _best(sols, lambda s: abs(s.f2 - f) / f) < 1e-8


def test_solve_frr_recovers_truth():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        f1, rho = rng.uniform(300.0, 3000.0, size=2)
        G2, G3 = synth_pair(f1, rho, rho, seed=seed + 200)
        sols = solve_frr(G2, G3)
        assert 1 <= len(sols) <= 17
        assert all(s.case == "III" and s.f2 == s.f3 for s in sols)
        err = _best(sols, lambda s: max(abs(s.f1 - f1) / f1,
                                        abs(s.f2 - rho) / rho))
        assert err < 1e-6


def test_solve_fr_recovers_truth():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        f1, f2, f3 = rng.uniform(300.0, 3000.0, size=3)
        G2, G3 = synth_pair(f1, f2, f3, seed=seed + 300)
        sols = solve_fr(G2, G3, f1)
        assert 1 <= len(sols) <= 9
        assert all(s.case == "IV" and s.f1 == f1 for s in sols)
        err = _best(sols, lambda s: max(abs(s.f2 - f2) / f2,
                                        abs(s.f3 - f3) / f3))
        assert err < 1e-6


def test_fov_envelope_excludes_out_of_range_roots():
    # a 100px focal on a 1920px-wide image is outside the physical envelope
    G2, G3 = synth_pair(100.0, 100.0, 100.0, seed=9)
    with pytest.raises(NoRealRoot):
        solve_fff(G2, G3)


def test_pure_translation_degeneracy():
    G2, G3 = translation_pair(800.0, 800.0, 800.0, seed=21)
    with pytest.raises(DegenerateMotion):
        solve_fff(G2, G3)
    with pytest.raises((DegenerateMotion, RejectSample)):
        solve_frr(G2, G3)


def test_pure_translation_solvable_with_known_f1():
    f1, f = 800.0, 1100.0
    G2, G3 = translation_pair(f1, f, f, seed=22)
    sols = solve_ff(G2, G3, f1)
    assert _best(sols, lambda s: abs(s.f2 - f) / f) < 1e-6

    f2, f3 = 1100.0, 1500.0
    G2, G3 = translation_pair(f1, f2, f3, seed=23)
    sols = solve_fr(G2, G3, f1)
    err = _best(sols, lambda s: max(abs(s.f2 - f2) / f2, abs(s.f3 - f3) / f3))
    assert err < 1e-6


def test_oracle_cost_values():
    G2, G3 = synth_pair(900.0, 900.0, 900.0, seed=7)
    assert oracle_cost(G2, G3, 900.0, 900.0, 900.0) < 1e-9
    off = oracle_cost(G2, G3, 900.0, 1.2 * 900.0, 900.0)
    assert np.isclose(off, ORACLE_OFF_TRUTH, rtol=1e-9)
    # cost grows as the focal moves away from the truth
    assert oracle_cost(G2, G3, 900.0, 1.5 * 900.0, 900.0) > off


def test_oracle_cost_is_scale_invariant():
    G2, G3 = synth_pair(700.0, 1300.0, 1300.0, seed=13)
    c = oracle_cost(G2, G3, 700.0, 1300.0, 1300.0)
    c_scaled = oracle_cost(4.0 * G2, 0.25 * G3, 700.0, 1300.0, 1300.0)
    assert np.isclose(c, c_scaled, atol=1e-12)
