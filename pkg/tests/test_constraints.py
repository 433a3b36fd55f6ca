import numpy as np
import pytest

from planefocal.constraints import (
    GENERATOR_DEGREE,
    N_GENERATORS,
    N_VARIABLES,
    SymQ,
    assemble_case1,
    assemble_case2,
    assemble_case3,
    assemble_case4,
    compute_Q,
    evaluate_generators,
    load_table,
    monomial_vector_case3,
    monomial_vector_case4,
)
from planefocal.geometry import CameraIntrinsics

from conftest import synth_pair

# Frozen oracle: assemble_case1 on synth_pair(900, 900, 900, seed=7).
CASE1_COEFFS = np.array([
    -1.0000000000000000e+00, 5.5875449080577398e-06,
    -5.2616954875124181e-12, -3.1698373107873311e-17,
    1.0063850692866441e-22, -1.0925489858096030e-28,
    2.7207649857761829e-35, 2.9833688909127019e-41,
    -1.5055868493569190e-47, -1.1592669664408596e-54,
])

# Frozen oracle: assemble_case2 on synth_pair(800, 1200, 1200, seed=11), f1=800.
CASE2_COEFFS = np.array([
    -1.0000000000000000e+00, 9.0396190700426800e-06,
    -2.0001986692109600e-11, 2.0863085286797945e-17,
    -1.2231574558193775e-23, 4.0572676762799136e-30,
    -6.0180692872172307e-37,
])


def test_table_structure(table):
    assert table.n_generators == N_GENERATORS == 7
    assert N_VARIABLES == 12
    assert GENERATOR_DEGREE == 6
    assert [table.term_count(g) for g in range(7)] == [
        348, 336, 378, 348, 348, 348, 378]
    # caching: repeated loads return the same object
    assert load_table() is table


def test_symq_roundtrip():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(3, 3))
    Q = A.T @ A
    s = SymQ.from_matrix(Q)
    assert np.allclose(s.as_matrix(), Q)
    assert s.as_vector().shape == (6,)


def test_generators_vanish_on_exact_instances(table):
    for seed in range(20):
        rng = np.random.default_rng(seed)
        f1, f2, f3 = rng.uniform(300.0, 3000.0, size=3)
        G2, G3 = synth_pair(f1, f2, f3, seed=seed + 100)
        K1 = CameraIntrinsics(f1)
        Q2 = compute_Q(G2, K1, CameraIntrinsics(f2))
        Q3 = compute_Q(G3, K1, CameraIntrinsics(f3))
        res = evaluate_generators(table, Q2, Q3)
        assert res.shape == (7,)
        assert np.abs(res).max() < 1e-12


def test_generators_nonzero_at_wrong_focals(table):
    G2, G3 = synth_pair(800.0, 1100.0, 1400.0, seed=5)
    Q2 = compute_Q(G2, CameraIntrinsics(800.0), CameraIntrinsics(2.0 * 1100.0))
    Q3 = compute_Q(G3, CameraIntrinsics(800.0), CameraIntrinsics(1400.0))
    assert np.abs(evaluate_generators(table, Q2, Q3)).max() > 1e-4


def test_compute_Q_scale_equivariance():
    """Q scales quadratically with the homography; generators are blind to it."""
    G2, _ = synth_pair(900.0, 900.0, 900.0, seed=2)
    K1, K2 = CameraIntrinsics(900.0), CameraIntrinsics(900.0)
    q = compute_Q(G2, K1, K2).as_vector()
    q_scaled = compute_Q(3.0 * G2, K1, K2).as_vector()
    assert np.allclose(q_scaled, 9.0 * q)


def test_assemble_case1_frozen(table):
    G2, G3 = synth_pair(900.0, 900.0, 900.0, seed=7)
    c = assemble_case1(G2, G3, table)
    assert c.shape == (10,)
    assert np.allclose(c, CASE1_COEFFS, rtol=1e-10, atol=1e-60)
    # ground truth alpha = 900^2 is a root
    assert abs(np.polyval(c[::-1], 900.0 ** 2)) < 1e-9


def test_assemble_case1_roots_match_direct_generator_evaluation(table):
    """Cross-construction: positive real roots of the assembled univariate
    polynomial are exactly the focals at which the generators (evaluated
    through the independent compute_Q path) vanish."""
    G2, G3 = synth_pair(900.0, 900.0, 900.0, seed=7)
    c = assemble_case1(G2, G3, table)
    roots = np.roots(c[::-1])
    real = roots[np.abs(roots.imag) < 1e-8 * np.abs(roots)].real
    checked = 0
    for alpha in real[real > 1e4]:
        f = float(np.sqrt(alpha))
        K = CameraIntrinsics(f)
        res = evaluate_generators(table, compute_Q(G2, K, K),
                                  compute_Q(G3, K, K))
        # each root annihilates (at least) the generator the row came from;
        # at the true focal every generator vanishes simultaneously
        assert np.abs(res).min() < 1e-9
        if abs(f - 900.0) < 1e-3:
            assert np.abs(res).max() < 1e-9
            checked += 1
    assert checked == 1


def test_assemble_case2_frozen(table):
    G2, G3 = synth_pair(800.0, 1200.0, 1200.0, seed=11)
    c = assemble_case2(G2, G3, 800.0, table)
    assert c.shape == (7,)
    assert np.allclose(c, CASE2_COEFFS, rtol=1e-10, atol=1e-45)
    assert abs(np.polyval(c[::-1], 1200.0 ** 2)) < 1e-9


def test_monomial_vectors():
    m3 = monomial_vector_case3(2.0, 3.0)
    assert m3.shape == (28,)
    # ordering: beta fastest, slot = apow*7 + bpow
    assert m3[0] == 1.0 and m3[1] == 3.0 and m3[6] == 3.0 ** 6
    assert m3[7] == 2.0 and m3[27] == 2.0 ** 3 * 3.0 ** 6
    m4 = monomial_vector_case4(2.0, 3.0)
    assert m4.shape == (16,)
    assert m4[0] == 1.0 and m4[3] == 27.0 and m4[4] == 2.0
    assert m4[15] == 8.0 * 27.0


def test_assemble_case3_annihilates_truth(table):
    f1, rho = 700.0, 1300.0
    G2, G3 = synth_pair(f1, rho, rho, seed=13)
    M = assemble_case3(G2, G3, table)
    assert M.shape == (7, 28)
    assert np.allclose(np.abs(M).max(axis=1), 1.0)
    m = monomial_vector_case3(f1 ** 2, rho ** 2)
    rel = np.abs(M @ m) / np.maximum(np.abs(M) @ np.abs(m), 1e-300)
    assert rel.max() < 1e-12


def test_assemble_case4_annihilates_truth(table):
    f1, f2, f3 = 600.0, 1000.0, 1600.0
    G2, G3 = synth_pair(f1, f2, f3, seed=17)
    M = assemble_case4(G2, G3, f1, table)
    assert M.shape == (7, 16)
    assert np.allclose(np.abs(M).max(axis=1), 1.0)
    m = monomial_vector_case4(f2 ** 2, f3 ** 2)
    rel = np.abs(M @ m) / np.maximum(np.abs(M) @ np.abs(m), 1e-300)
    assert rel.max() < 1e-12


def test_assembly_invariant_to_homography_scale(table):
    """The fixed gauge makes assembly deterministic; an explicit rescale of
    the input homographies must not change the selected polynomial."""
    G2, G3 = synth_pair(900.0, 900.0, 900.0, seed=7)
    c = assemble_case1(G2, G3, table)
    c_scaled = assemble_case1(2.5 * G2, 0.4 * G3, table)
    assert np.allclose(c_scaled, c, rtol=1e-12, atol=1e-60)
