import numpy as np
import pytest

from planefocal.exceptions import RankDeficiencyMismatch, SingularC0, UnexpectedRank
from planefocal.roots import (
    CubicMatrixPencil,
    companion_gamma,
    deflate_zero_columns,
    null_vector,
    polyeig_cubic,
    polyval,
    square_free,
    sturm_real_roots,
    trim,
)


def _poly_from_roots(roots):
    """Ascending coefficients of prod (x - r)."""
    c = np.array([1.0])
    for r in roots:
        c = np.convolve(c, np.array([-r, 1.0]))
    return c


def test_polyval_and_trim():
    c = np.array([2.0, 0.0, 1.0])  # 2 + x^2
    assert polyval(c, 3.0) == 11.0
    assert len(trim(np.array([1.0, 1.0, 1e-16]))) == 2


def test_sturm_simple_roots():
    c = _poly_from_roots([1.0, 3.0, 7.0])
    roots = sturm_real_roots(c, 0.5, 10.0)
    assert np.allclose(roots, [1.0, 3.0, 7.0], rtol=1e-12)
    assert sturm_real_roots(c, 8.0, 10.0) == []


def test_sturm_respects_bracket():
    c = _poly_from_roots([1.0, 3.0, 7.0])
    roots = sturm_real_roots(c, 2.0, 5.0)
    assert np.allclose(roots, [3.0], rtol=1e-12)


def test_sturm_repeated_roots():
    # (x - 2)^2 (x - 5): square-free reduction must expose both roots once
    c = np.convolve(_poly_from_roots([2.0, 2.0]), _poly_from_roots([5.0]))
    roots = sturm_real_roots(c, 0.1, 10.0)
    assert len(roots) == 2
    assert np.allclose(roots, [2.0, 5.0], rtol=1e-6)


def test_square_free_reduces_multiplicity():
    c = _poly_from_roots([2.0, 2.0, 5.0])
    sf = square_free(c)
    assert len(sf) == 3  # degree 2: roots {2, 5}
    assert abs(polyval(sf, 2.0)) < 1e-10
    assert abs(polyval(sf, 5.0)) < 1e-10


def test_sturm_wide_focal_style_bracket():
    # roots spread over the squared-focal range actually used by the solvers
    true = [300.0 ** 2, 900.0 ** 2, 4000.0 ** 2]
    c = _poly_from_roots(true)
    roots = sturm_real_roots(c, 250.0 ** 2, 11000.0 ** 2)
    assert np.allclose(roots, true, rtol=1e-12)


def test_sturm_matches_companion_eigenvalues():
    """Cross-check against numpy's companion-matrix root finder."""
    rng = np.random.default_rng(0)
    lo, hi = 0.02, 50.0
    for _ in range(100):
        c = rng.normal(size=10)  # degree 9
        mine = sturm_real_roots(c, lo, hi)
        ref = np.roots(c[::-1])
        ref = sorted(r.real for r in ref
                     if abs(r.imag) < 1e-10 * max(abs(r), 1.0)
                     and lo + 1e-9 < r.real < hi - 1e-9)
        assert len(mine) == len(ref)
        if ref:
            assert np.allclose(mine, ref, rtol=1e-8, atol=1e-12)


def test_pencil_evaluation():
    rng = np.random.default_rng(1)
    Bs = [rng.normal(size=(4, 4)) for _ in range(4)]
    p = CubicMatrixPencil(*Bs)
    a = 1.7
    expect = Bs[0] + a * Bs[1] + a * a * Bs[2] + a ** 3 * Bs[3]
    assert np.allclose(p(a), expect)
    assert p.size == 4
    with pytest.raises(ValueError):
        CubicMatrixPencil(np.eye(3), np.eye(3), np.eye(3), np.eye(4))


def test_companion_eigenvalues_make_pencil_singular():
    rng = np.random.default_rng(2)
    p = CubicMatrixPencil(*[rng.normal(size=(4, 4)) for _ in range(4)])
    alphas, size = polyeig_cubic(p)
    assert size == 12
    reals = [a.real for a in alphas if abs(a.imag) < 1e-8 * abs(a)]
    assert reals  # a cubic 4x4 pencil has 12 eigenvalues, some real
    for a in reals:
        s = np.linalg.svd(p(a), compute_uv=False)
        assert s[-1] < 1e-8 * s[0]


def test_companion_gamma_shape():
    rng = np.random.default_rng(3)
    p = CubicMatrixPencil(*[rng.normal(size=(5, 5)) for _ in range(4)])
    assert companion_gamma(p).shape == (15, 15)


def _rank4_case_pencil(seed):
    """7x7 cubic pencil with rank-4 leading coefficient, as in Case III."""
    rng = np.random.default_rng(seed)
    B0, B1, B2 = (rng.normal(size=(7, 7)) for _ in range(3))
    L = rng.normal(size=(7, 4)) @ rng.normal(size=(4, 7))
    return CubicMatrixPencil(B0, B1, B2, L)


def test_deflation_preserves_nonzero_spectrum():
    for seed in range(10):
        p = _rank4_case_pencil(seed)
        full = np.linalg.eigvals(companion_gamma(p))
        defl = np.linalg.eigvals(deflate_zero_columns(p, expected_rank=4))
        assert defl.shape == (18,)
        # the full 21 eigenvalues = deflated 18 plus three structural zeros
        full_sorted = np.sort_complex(full)
        merged = np.sort_complex(np.concatenate([defl, np.zeros(3)]))
        scale = np.abs(full_sorted).max()
        assert np.allclose(full_sorted, merged, atol=1e-8 * scale)


def test_deflation_rejects_unexpected_rank():
    rng = np.random.default_rng(42)
    p = CubicMatrixPencil(*[rng.normal(size=(7, 7)) for _ in range(4)])
    with pytest.raises(UnexpectedRank):
        deflate_zero_columns(p, expected_rank=4)


def test_polyeig_rejects_singular_constant_term():
    rng = np.random.default_rng(5)
    B = rng.normal(size=(4, 4))
    sing = np.outer(rng.normal(size=4), rng.normal(size=4))
    p = CubicMatrixPencil(sing, B, B, B)
    with pytest.raises(SingularC0):
        polyeig_cubic(p)


def test_null_vector_recovery_and_ambiguity():
    rng = np.random.default_rng(6)
    v = rng.normal(size=6)
    v /= np.linalg.norm(v)
    A = rng.normal(size=(6, 6))
    M = A - (A @ v)[:, None] * v[None, :] / (v @ v)  # M @ v == 0
    got = null_vector(M)
    ref = v / v[0]
    assert np.allclose(got, ref, atol=1e-10)
    # two-dimensional null space: ambiguous, must raise
    w = rng.normal(size=6)
    w -= (w @ v) * v
    M2 = M - (M @ w)[:, None] * w[None, :] / (w @ w)
    with pytest.raises(RankDeficiencyMismatch):
        null_vector(M2)
