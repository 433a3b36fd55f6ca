"""The four minimal focal-length solvers and the normal-consistency oracle.

Case I   (solve_fff): all three focal lengths equal and unknown.
Case II  (solve_ff):  f1 known, f2 = f3 unknown.
Case III (solve_frr): f1 unknown, f2 = f3 = rho unknown.
Case IV  (solve_fr):  f1 known, f2 and f3 unknown and distinct.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .constraints import (
    CASE1_DEG,
    CASE2_DEG,
    GeneratorTable,
    _case1_grids,
    _case2_grids,
    _case3_grids,
    _select_row,
    assemble_case4,
    compute_Q,
    evaluate_generators,
    load_table,
    monomial_vector_case3,
    monomial_vector_case4,
)
from .exceptions import (
    DecompositionFailed,
    DegenerateMotion,
    NoRealRoot,
    RankDeficiencyMismatch,
    RejectSample,
    SingularC0,
    UnexpectedRank,
)
from .geometry import CameraIntrinsics
from .roots import CubicMatrixPencil, null_vector, polyeig_cubic, sturm_real_roots

DEFAULT_IMAGE_SIZE = (1920.0, 1080.0)
# physically plausible horizontal field-of-view envelope, degrees
FOV_ENVELOPE_DEG = (10.0, 150.0)
# null-vector geometric-sequence consistency: max consecutive-ratio deviation
RATIO_DEVIATION = 0.10
# over-constrained generator-residual gate for Case III/IV candidates
RESIDUAL_GATE = 1e-4
# signed-to-absolute coefficient mass below this means structural cancellation
DEGENERACY_RATIO = 1e-9
# over-constrained consistency: a root whose all-generator residual exceeds the
# best root's by this factor solves only the selected polynomial, not the system
RELATIVE_RESIDUAL_FACTOR = 1e6
RELATIVE_RESIDUAL_FLOOR = 1e-9


@dataclass(frozen=True)
class FocalSolution:
    """Candidate focal lengths in pixels for one of the four cases."""

    f1: float
    f2: float
    f3: float
    case: str

    def __post_init__(self):
        for name in ("f1", "f2", "f3"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if self.case not in ("I", "II", "III", "IV"):
            raise ValueError(f"unknown case tag {self.case!r}")


def focal_bracket(image_size=DEFAULT_IMAGE_SIZE,
                  fov_deg=FOV_ENVELOPE_DEG) -> tuple[float, float]:
    """Focal range in pixels implied by a horizontal-FOV envelope."""
    half_w = 0.5 * float(image_size[0])
    fov_max = np.deg2rad(max(fov_deg)) / 2.0
    fov_min = np.deg2rad(min(fov_deg)) / 2.0
    return half_w / np.tan(fov_max), half_w / np.tan(fov_min)


def _check_degenerate(rows: np.ndarray, rows_abs: np.ndarray) -> float:
    """Signed/absolute coefficient mass ratio; raises on structural cancellation."""
    ratio = np.abs(rows).max() / max(rows_abs.max(), 1e-300)
    if ratio < DEGENERACY_RATIO:
        raise DegenerateMotion(
            f"constraint coefficients cancel to {ratio:.2e} of their magnitude")
    return ratio


def _polish_univariate(rows: np.ndarray, alpha: float, iters: int = 4) -> float:
    """Gauss-Newton polish of a root against all generator rows at once.

    ``rows`` holds ascending coefficients of the 7 univariate polynomials;
    residuals are normalized by the cancellation-free row magnitudes so the
    least-squares step is scale-free.
    """
    degs = np.arange(rows.shape[1], dtype=float)
    rabs = np.abs(rows)
    for _ in range(iters):
        powers = alpha ** degs
        scale = np.maximum(rabs @ powers, 1e-300)
        r = (rows @ powers) / scale
        dpowers = degs * alpha ** np.maximum(degs - 1.0, 0.0)
        dpowers[0] = 0.0
        J = (rows @ dpowers) / scale
        denom = float(J @ J)
        if denom <= 0:
            break
        step = -float(J @ r) / denom
        if not np.isfinite(step):
            break
        step = np.clip(step, -0.5 * alpha, 0.5 * alpha)
        alpha += step
        if abs(step) < 1e-15 * alpha:
            break
    return alpha


def _polish_bivariate(M: np.ndarray, alpha: float, beta: float,
                      na: int, nb: int, iters: int = 6):
    """Gauss-Newton polish of an (alpha, beta) pair on the full system.

    ``M`` is the row-normalized coefficient matrix over the monomials
    alpha^i beta^j (i < na, j < nb, beta fastest).
    """
    A = np.arange(na, dtype=float)
    B = np.arange(nb, dtype=float)
    Mabs = np.abs(M)
    for _ in range(iters):
        pa, pb = alpha ** A, beta ** B
        dpa = A * alpha ** np.maximum(A - 1.0, 0.0)
        dpb = B * beta ** np.maximum(B - 1.0, 0.0)
        dpa[0] = dpb[0] = 0.0
        mono = np.outer(pa, pb).reshape(-1)
        scale = np.maximum(Mabs @ mono, 1e-300)
        r = (M @ mono) / scale
        J = np.column_stack([
            (M @ np.outer(dpa, pb).reshape(-1)) / scale,
            (M @ np.outer(pa, dpb).reshape(-1)) / scale,
        ])
        try:
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        step[0] = np.clip(step[0], -0.5 * alpha, 0.5 * alpha)
        step[1] = np.clip(step[1], -0.5 * beta, 0.5 * beta)
        alpha += float(step[0])
        beta += float(step[1])
        if abs(step[0]) < 1e-15 * alpha and abs(step[1]) < 1e-15 * beta:
            break
    return alpha, beta


def _poly_residual(rows: np.ndarray, alpha: float) -> float:
    """Worst relative residual of alpha over all univariate generator rows."""
    powers = alpha ** np.arange(rows.shape[1], dtype=float)
    num = np.abs(rows @ powers)
    den = np.maximum(np.abs(rows) @ powers, 1e-300)
    return float((num / den).max())


def _consistent_alphas(alphas, rows):
    """Keep roots consistent with the whole over-constrained system.

    Spurious roots solve only the selected polynomial; their residual over
    the other generator rows exceeds the best root's by many orders of
    magnitude.  The gate is relative, so noisy (non-exact) homographies keep
    every root.
    """
    polished = [_polish_univariate(rows, a) for a in alphas]
    residuals = [_poly_residual(rows, a) for a in polished]
    gate = max(RELATIVE_RESIDUAL_FACTOR * min(residuals),
               RELATIVE_RESIDUAL_FLOOR)
    return [a for a, r in zip(polished, residuals) if r <= gate]


def _relative_residual_filter(table, G2, G3, solutions):
    """Drop candidates whose all-generator residual dwarfs the best one's.

    Same over-constrained consistency principle as ``_consistent_alphas``;
    relative, so noisy homographies (where nothing vanishes) keep all roots.
    """
    if len(solutions) <= 1:
        return solutions
    residuals = [_generator_residual(table, G2, G3, s.f1, s.f2, s.f3)
                 for s in solutions]
    gate = max(RELATIVE_RESIDUAL_FACTOR * min(residuals),
               RELATIVE_RESIDUAL_FLOOR)
    return [s for s, r in zip(solutions, residuals) if r <= gate]


def _dedup(solutions: list[FocalSolution], rel: float = 1e-6):
    out = []
    for s in solutions:
        if not any(abs(s.f1 - u.f1) < rel * u.f1
                   and abs(s.f2 - u.f2) < rel * u.f2
                   and abs(s.f3 - u.f3) < rel * u.f3 for u in out):
            out.append(s)
    return out


def solve_fff(G2, G3, table: GeneratorTable = None,
              image_size=DEFAULT_IMAGE_SIZE) -> list[FocalSolution]:
    """Case I: common unknown focal length from two image homographies.

    Real positive roots of the selected degree-9 polynomial in alpha = f^2,
    restricted to the physical FOV envelope; at most 9 solutions, ascending.
    """
    table = table or load_table()
    rows, rows_abs = _case1_grids(table, G2, G3, with_abs=True, restricted=True)
    _check_degenerate(rows, rows_abs)
    _, coeffs = _select_row(rows)
    f_lo, f_hi = focal_bracket(image_size)
    alphas = sturm_real_roots(coeffs, f_lo * f_lo, f_hi * f_hi)
    if not alphas:
        raise NoRealRoot("no real positive root in the focal bracket")
    alphas = _consistent_alphas(alphas[: CASE1_DEG], rows)
    out = [FocalSolution(float(np.sqrt(a)), float(np.sqrt(a)),
                         float(np.sqrt(a)), "I") for a in alphas]
    out = _dedup(sorted(out, key=lambda s: s.f1))
    if not out:
        raise NoRealRoot("every root failed the consistency gate")
    return out


def solve_ff(G2, G3, f1: float, table: GeneratorTable = None,
             image_size=DEFAULT_IMAGE_SIZE) -> list[FocalSolution]:
    """Case II: known f1, common unknown focal of views 2 and 3 (<= 6 roots)."""
    table = table or load_table()
    rows, rows_abs = _case2_grids(table, G2, G3, f1, with_abs=True)
    _check_degenerate(rows, rows_abs)
    _, coeffs = _select_row(rows)
    f_lo, f_hi = focal_bracket(image_size)
    alphas = sturm_real_roots(coeffs, f_lo * f_lo, f_hi * f_hi)
    if not alphas:
        raise NoRealRoot("no real positive root in the focal bracket")
    alphas = _consistent_alphas(alphas[: CASE2_DEG], rows)
    out = [FocalSolution(float(f1), float(np.sqrt(a)), float(np.sqrt(a)),
                         "II") for a in alphas]
    out = _dedup(sorted(out, key=lambda s: s.f2))
    if not out:
        raise NoRealRoot("every root failed the consistency gate")
    return out


def _beta_from_null_vector(v: np.ndarray):
    """beta from a (hoped) geometric sequence [1, b, b^2, ...].

    Returns (beta, max relative deviation of consecutive ratios); (None, inf)
    when the components do not admit a stable ratio estimate.
    """
    scale = np.abs(v).max()
    good = np.abs(v[:-1]) > 1e-9 * scale
    if not np.any(good):
        return None, np.inf
    ratios = v[1:][good] / v[:-1][good]
    beta = float(np.median(ratios))
    if not np.isfinite(beta) or beta <= 0:
        return None, np.inf
    dev = float(np.abs(ratios / beta - 1.0).max())
    return beta, dev


def _generator_residual(table, G2, G3, f1, f2, f3) -> float:
    K1 = CameraIntrinsics(f1)
    Q2 = compute_Q(G2, K1, CameraIntrinsics(f2))
    Q3 = compute_Q(G3, K1, CameraIntrinsics(f3))
    return float(np.abs(evaluate_generators(table, Q2, Q3)).max())


def solve_frr(G2, G3, table: GeneratorTable = None,
              image_size=DEFAULT_IMAGE_SIZE) -> list[FocalSolution]:
    """Case III: unknown f1 and a common unknown focal rho of views 2 and 3.

    Hidden-variable pipeline: the 7x28 system becomes a cubic 7x7 pencil in
    alpha = f1^2 acting on the beta-monomial vector; its deflated companion
    gives <= 18 eigenvalues, beta = rho^2 is read off the null vector, and
    spurious pairs are removed by the geometric-sequence structure check and
    the over-constrained generator residual.
    """
    table = table or load_table()
    M, M_abs = _case3_grids(table, G2, G3, with_abs=True)
    _check_degenerate(M, M_abs)
    Mn = M / np.maximum(np.abs(M).max(axis=1), 1e-300)[:, None]
    f_lo, f_hi = focal_bracket(image_size)
    # rescale alpha and beta by the bracket midpoint so eigenvalues are O(1)
    sigma = f_lo * f_hi
    col_pow = np.arange(28) // 7 + np.arange(28) % 7
    Ms = M * sigma**col_pow
    nrm = np.abs(Ms).max(axis=1)
    Ms = Ms / np.maximum(nrm, 1e-300)[:, None]
    pencil = CubicMatrixPencil(Ms[:, 0:7], Ms[:, 7:14], Ms[:, 14:21],
                               Ms[:, 21:28])
    try:
        alphas, _ = polyeig_cubic(pencil, deflate=True, expected_rank=4)
    except (SingularC0, UnexpectedRank) as exc:
        raise RejectSample(str(exc)) from exc

    ulo, uhi = f_lo * f_lo / sigma, f_hi * f_hi / sigma
    out = []
    for a in alphas:
        if abs(a.imag) > 1e-6 * abs(a):
            continue
        ua = float(a.real)
        if not (ulo <= ua <= uhi):
            continue
        try:
            v = null_vector(pencil(ua))
        except RankDeficiencyMismatch:
            continue
        ub, dev = _beta_from_null_vector(v)
        if ub is None or dev > RATIO_DEVIATION:
            continue
        if not (ulo <= ub <= uhi):
            continue
        alpha, beta = sigma * ua, sigma * ub
        f1 = float(np.sqrt(alpha))
        rho = float(np.sqrt(beta))
        if _generator_residual(table, G2, G3, f1, rho, rho) > RESIDUAL_GATE:
            continue
        # consistency against the full over-constrained 7x28 system
        mono = monomial_vector_case3(alpha, beta)
        rel = np.abs(M @ mono) / np.maximum(np.abs(M) @ np.abs(mono), 1e-300)
        if rel.max() > RESIDUAL_GATE:
            continue
        alpha, beta = _polish_bivariate(Mn, alpha, beta, 4, 7)
        if alpha <= 0 or beta <= 0:
            continue
        out.append(FocalSolution(float(np.sqrt(alpha)), float(np.sqrt(beta)),
                                 float(np.sqrt(beta)), "III"))
    out = _relative_residual_filter(table, G2, G3, out)
    out = _dedup(sorted(out, key=lambda s: (s.f1, s.f2)))
    if not out:
        raise NoRealRoot("no admissible (f1, rho) pair")
    return out


def _best_row_subset(lead: np.ndarray, k: int = 4) -> tuple[int, ...]:
    """Rows (k of 7) maximizing the smallest singular value of the leading block."""
    best, best_idx = -1.0, None
    for idx in itertools.combinations(range(lead.shape[0]), k):
        s = np.linalg.svd(lead[list(idx)], compute_uv=False)
        if s[-1] > best:
            best, best_idx = s[-1], idx
    return best_idx


def solve_fr(G2, G3, f1: float, table: GeneratorTable = None,
             image_size=DEFAULT_IMAGE_SIZE) -> list[FocalSolution]:
    """Case IV: known f1, distinct unknown f2 and f3.

    Four well-conditioned rows of the 7x16 system form a cubic 4x4 pencil in
    alpha = f2^2 over the beta-monomials [1, b, b^2, b^3]; the 12x12 companion
    gives <= 12 eigenvalues and residual filtering against all seven rows
    removes the extra solutions introduced by the row selection.
    """
    table = table or load_table()
    M = assemble_case4(G2, G3, f1, table)
    f_lo, f_hi = focal_bracket(image_size)
    # rescale alpha and beta by the bracket midpoint so eigenvalues are O(1)
    sigma = f_lo * f_hi
    col_pow = np.arange(16) // 4 + np.arange(16) % 4
    Ms = M * sigma**col_pow
    Ms = Ms / np.abs(Ms).max(axis=1, keepdims=True)
    blocks = [Ms[:, 4 * k : 4 * k + 4] for k in range(4)]
    rows = _best_row_subset(blocks[3])
    pencil = CubicMatrixPencil(*(B[list(rows)] for B in blocks))
    try:
        alphas, _ = polyeig_cubic(pencil, deflate=False)
    except (SingularC0, UnexpectedRank) as exc:
        raise RejectSample(str(exc)) from exc

    ulo, uhi = f_lo * f_lo / sigma, f_hi * f_hi / sigma
    out = []
    for a in alphas:
        if abs(a.imag) > 1e-6 * abs(a):
            continue
        ua = float(a.real)
        if not (ulo <= ua <= uhi):
            continue
        try:
            v = null_vector(pencil(ua))
        except RankDeficiencyMismatch:
            continue
        ub, dev = _beta_from_null_vector(v)
        if ub is None or dev > RATIO_DEVIATION:
            continue
        if not (ulo <= ub <= uhi):
            continue
        alpha, beta = sigma * ua, sigma * ub
        f2 = float(np.sqrt(alpha))
        f3 = float(np.sqrt(beta))
        if _generator_residual(table, G2, G3, f1, f2, f3) > RESIDUAL_GATE:
            continue
        mono = monomial_vector_case4(alpha, beta)
        rel = np.abs(M @ mono) / np.maximum(np.abs(M) @ np.abs(mono), 1e-300)
        if rel.max() > RESIDUAL_GATE:
            continue
        alpha, beta = _polish_bivariate(M, alpha, beta, 4, 4)
        if alpha <= 0 or beta <= 0:
            continue
        out.append(FocalSolution(float(f1), float(np.sqrt(alpha)),
                                 float(np.sqrt(beta)), "IV"))
    out = _relative_residual_filter(table, G2, G3, out)
    out = _dedup(sorted(out, key=lambda s: (s.f2, s.f3)))
    if not out:
        raise NoRealRoot("no admissible (f2, f3) pair")
    return out


def _candidate_normals(H) -> list[np.ndarray]:
    """The two plane-normal candidates of H = R + (t/d) n^T (sign-agnostic)."""
    H = np.asarray(H, dtype=float)
    _, S, Vt = np.linalg.svd(H)
    s1, s2, s3 = S / S[1]
    zeta = s1 * s1 - s3 * s3
    if zeta < 1e-12:
        raise DecompositionFailed("degenerate singular values (pure rotation)")
    a = np.sqrt(max(s1 * s1 - 1.0, 0.0))
    b = np.sqrt(max(1.0 - s3 * s3, 0.0))
    norm = np.sqrt(zeta)
    return [(a * Vt[0] + b * Vt[2]) / norm, (a * Vt[0] - b * Vt[2]) / norm]


def oracle_cost(G2, G3, f1: float, f2: float, f3: float) -> float:
    """Normal-consistency cost: both homographies must see the same plane.

    Decomposes H2 = K2^{-1} G2 K1 and H3 = K3^{-1} G3 K1 into their candidate
    plane normals (view-1 frame) and returns the smallest angle between any
    pairing, treating n and -n as identical.  Zero at the true focal lengths;
    independent of the generator table.
    """
    K1 = CameraIntrinsics(f1)
    H2 = CameraIntrinsics(f2).K_inv @ np.asarray(G2, float) @ K1.K
    H3 = CameraIntrinsics(f3).K_inv @ np.asarray(G3, float) @ K1.K
    best = np.inf
    for n2 in _candidate_normals(H2):
        for n3 in _candidate_normals(H3):
            c = min(abs(float(np.dot(n2, n3))), 1.0)
            best = min(best, float(np.arccos(c)))
    return best
