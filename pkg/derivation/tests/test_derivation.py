import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from constraint_derivation import (
    derive_generators,
    emit_table,
    load_table,
    verify_generators,
)
from constraint_derivation.cli import main as cli_main
from constraint_derivation.verify import (
    evaluate_residuals,
    evaluate_values,
    random_instance,
)

COMMITTED_TABLE = (Path(__file__).resolve().parents[2]
                   / "src" / "planefocal" / "data" / "generators.json")


@pytest.fixture(scope="session")
def generators():
    # full exact derivation; several minutes, shared across the session
    return derive_generators()


@pytest.fixture(scope="session")
def emitted_path(generators, tmp_path_factory):
    path = tmp_path_factory.mktemp("table") / "generators.json"
    emit_table(generators, path)
    return path


@pytest.fixture(scope="session")
def committed_path():
    assert COMMITTED_TABLE.exists()
    return COMMITTED_TABLE


# ---------------------------------------------------------------- derivation

def test_seven_generators_of_bidegree_three_three(generators):
    assert len(generators) == 7
    for gen in generators:
        assert gen.bidegree() == (3, 3)
        for exps, coef in gen.terms:
            assert sum(exps) == 6
            assert isinstance(coef, Fraction)


def test_generators_vanish_exactly_on_rational_variety_point(generators):
    # exact arithmetic end to end: a variety point with rational parameters
    # must be an exact root of every generator
    rng = np.random.default_rng(42)
    n = [Fraction(int(v), 7) for v in rng.integers(-20, 21, 3)]
    q = []
    for _ in range(2):
        b = [Fraction(int(v), 3) for v in rng.integers(-20, 21, 3)]
        s = Fraction(int(rng.integers(1, 50)), 11)
        Q = [[s * (i == j) + n[i] * b[j] + b[i] * n[j] for j in range(3)]
             for i in range(3)]
        q += [Q[0][0], Q[0][1], Q[0][2], Q[1][1], Q[1][2], Q[2][2]]
    for gen in generators:
        assert gen.evaluate(q) == 0


def test_generic_point_is_not_a_root(generators):
    # sanity: the generators are not the zero polynomial in disguise
    q = [Fraction(k + 1, 2) for k in range(12)]
    assert any(gen.evaluate(q) != 0 for gen in generators)


# ------------------------------------------------------------------ emission

def test_emitted_table_is_byte_identical_to_committed(emitted_path,
                                                      committed_path):
    assert emitted_path.read_bytes() == committed_path.read_bytes()


def test_emit_is_byte_deterministic(generators, emitted_path, tmp_path):
    again = tmp_path / "generators.json"
    emit_table(generators, again)
    assert again.read_bytes() == emitted_path.read_bytes()


def test_emitted_schema_and_normalization(emitted_path):
    doc = json.loads(emitted_path.read_text())
    assert sorted(doc) == ["derivation", "polynomials", "scale_degrees",
                           "variables"]
    assert doc["variables"] == ["q21", "q22", "q23", "q24", "q25", "q26",
                                "q31", "q32", "q33", "q34", "q35", "q36"]
    assert doc["scale_degrees"] == [[3, 3]] * 7
    assert [len(p) for p in doc["polynomials"]] == [348, 336, 378, 348,
                                                    348, 348, 378]
    for poly in doc["polynomials"]:
        coefs = [Fraction(t["coef"]) for t in poly]
        # primitive integer representative with positive leading term
        assert all(c.denominator == 1 for c in coefs)
        assert np.gcd.reduce([int(c) for c in coefs]) == 1
        assert coefs[0] > 0


# -------------------------------------------------------------- verification

def test_verify_passes_on_exact_instances(committed_path):
    report = verify_generators(committed_path, trials=1000, seed=0)
    assert report.passed
    assert report.max_residual < 1e-9


def test_verify_has_power_against_perturbation(committed_path):
    report = verify_generators(committed_path, trials=50, seed=1,
                               perturbation=1e-3)
    assert report.max_residual > 1e-5


def test_identity_grams_annihilate_all_generators(committed_path):
    table = load_table(committed_path)
    q_id = np.array([1, 0, 0, 1, 0, 1, 1, 0, 0, 1, 0, 1], dtype=float)
    values = evaluate_values(table, q_id)
    assert np.all(values == 0.0)
    # exact confirmation: surviving coefficients sum to zero per generator
    for E, fr in zip(table.exps, table.fractions):
        live = np.all(E[:, [1, 2, 4, 7, 8, 10]] == 0, axis=1)
        assert sum(c for c, keep in zip(fr, live) if keep) == 0


def test_scale_covariance(committed_path):
    table = load_table(committed_path)
    rng = np.random.default_rng(3)
    q = rng.uniform(-1.0, 1.0, 12)
    lam2, lam3 = 1.7, 0.3
    scaled = q.copy()
    scaled[:6] *= lam2
    scaled[6:] *= lam3
    v0 = evaluate_values(table, q)[0]
    v1 = evaluate_values(table, scaled)[0]
    assert np.allclose(v1, lam2 ** 3 * lam3 ** 3 * v0, rtol=1e-9)


def test_equal_grams_are_roots(committed_path):
    # equal Q2 = Q3 admit a common normal, so exact-geometry instances with
    # duplicated Gram must be roots
    table = load_table(committed_path)
    rng = np.random.default_rng(5)
    for _ in range(20):
        q = random_instance(rng)
        q[6:] = q[:6]
        assert evaluate_residuals(table, q).max() < 1e-9


def test_float_table_matches_exact_evaluation(committed_path):
    table = load_table(committed_path)
    rng = np.random.default_rng(9)
    checked = 0
    for _ in range(100):
        q = rng.integers(-9, 10, 12)
        fv = evaluate_values(table, q.astype(float))[0]
        for i, (E, fr) in enumerate(zip(table.exps, table.fractions)):
            exact = Fraction(0)
            for e, c in zip(E, fr):
                term = c
                for v in range(12):
                    if e[v]:
                        term *= Fraction(int(q[v])) ** int(e[v])
                exact += term
            if exact != 0:
                assert abs(fv[i] - float(exact)) <= 1e-12 * abs(float(exact))
                checked += 1
    assert checked > 500


# ----------------------------------------------------------------------- cli

def test_cli_verify(committed_path, capsys):
    rc = cli_main(["verify", "--table", str(committed_path), "--trials", "50"])
    assert rc == 0
    assert "PASS" in capsys.readouterr().out
