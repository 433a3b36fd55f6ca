"""Numeric evaluation of the elimination-ideal constraints.

The seven degree-6 generators relating the entries of the two symmetric
matrices Q_j = (K_j^{-1} G_j K_1)^T (K_j^{-1} G_j K_1) are shipped as a JSON
table with exact rational coefficients.  At load time every generator term is
expanded over the split

    f_j^2 * Q_j[a,b] = f_1^{e_ab} * (S_ab + x * T_ab),

where S_ab = G[0,a]G[0,b] + G[1,a]G[1,b], T_ab = G[2,a]G[2,b] and x is f^2 or
rho^2 depending on the case.  The expansion is an exact polynomial-arithmetic
construction (equivalent to convolving per-entry coefficient grids) and is
stored as a sparse linear map from degree-6 monomials in the 24 values
(S_1..S_12, T_1..T_12) to output coefficient slots, so each assembly reduces
to one gather/product pass plus a sparse mat-vec.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product as _iproduct
from math import comb
from pathlib import Path

import numpy as np

from .exceptions import EliminationFailed
from .geometry import CameraIntrinsics

DEFAULT_TABLE_PATH = Path(__file__).parent / "data" / "generators.json"

N_GENERATORS = 7
N_VARIABLES = 12
GENERATOR_DEGREE = 6

# symmetric entry order q1..q6 <-> (row, col) of the 3x3 matrix
SYM_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
_IA = np.array([p[0] for p in SYM_PAIRS])
_IB = np.array([p[1] for p in SYM_PAIRS])
# f1-exponent of each symmetric entry of f_j^2 Q_j (one power of f1 per
# column index < 2 of the two G factors)
_F1_POW = np.array([2, 2, 1, 2, 1, 0])

# monomial orders of the bivariate linearizations: alpha-major, beta-minor
CASE3_ALPHA_DEG = 3
CASE3_BETA_DEG = 6
CASE4_ALPHA_DEG = 3
CASE4_BETA_DEG = 3
CASE1_DEG = 9
CASE2_DEG = 6


@dataclass(frozen=True)
class SymQ:
    """Entries of a symmetric 3x3 matrix in the fixed q1..q6 layout."""

    q1: float
    q2: float
    q3: float
    q4: float
    q5: float
    q6: float

    @classmethod
    def from_matrix(cls, Q) -> "SymQ":
        Q = np.asarray(Q, dtype=float)
        if not np.allclose(Q, Q.T, atol=1e-9 * max(np.abs(Q).max(), 1e-300)):
            raise ValueError("Q must be symmetric")
        return cls(*(Q[a, b] for a, b in SYM_PAIRS))

    def as_vector(self) -> np.ndarray:
        return np.array([self.q1, self.q2, self.q3, self.q4, self.q5, self.q6])

    def as_matrix(self) -> np.ndarray:
        q = self.as_vector()
        return np.array([
            [q[0], q[1], q[2]],
            [q[1], q[3], q[4]],
            [q[2], q[4], q[5]],
        ])


@dataclass(frozen=True)
class BiPoly:
    """Dense coefficient grid c[i, j] for alpha^i beta^j."""

    grid: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        if self.grid.ndim != 2:
            raise ValueError("BiPoly grid must be 2-D")

    @property
    def alpha_degree(self) -> int:
        return self.grid.shape[0] - 1

    @property
    def beta_degree(self) -> int:
        return self.grid.shape[1] - 1

    def __call__(self, alpha: float, beta: float) -> float:
        return float(np.polynomial.polynomial.polyval2d(alpha, beta, self.grid))

    def monomial_row(self) -> np.ndarray:
        """Coefficients flattened in the alpha-major, beta-minor order."""
        return self.grid.reshape(-1)


def monomial_vector_case3(alpha: float, beta: float) -> np.ndarray:
    """The 28 monomials [1, b, ..., b^6, a, ..., a^3 b^6]."""
    return np.outer(alpha ** np.arange(4), beta ** np.arange(7)).reshape(-1)


def monomial_vector_case4(alpha: float, beta: float) -> np.ndarray:
    """The 16 monomials [1, b, ..., b^3, a, ..., a^3 b^3]."""
    return np.outer(alpha ** np.arange(4), beta ** np.arange(4)).reshape(-1)


def _expand_generators(polynomials):
    """Expand each term over the S/T split of the 12 variables.

    Returns the deduplicated monomial basis (tuples of 6 sorted factor
    indices into the 24-vector [S_1..S_12, T_1..T_12]) and, per subterm, its
    generator, coefficient and monomial index.
    """
    accum: dict[tuple[int, tuple[int, ...]], float] = {}
    for g, poly in enumerate(polynomials):
        for exps, coef in poly:
            nz = [v for v in range(N_VARIABLES) if exps[v] > 0]
            for picks in _iproduct(*[range(exps[v] + 1) for v in nz]):
                w = coef
                idx = []
                for v, b in zip(nz, picks):
                    w *= comb(exps[v], b)
                    idx += [v] * (exps[v] - b) + [N_VARIABLES + v] * b
                key = (g, tuple(sorted(idx)))
                accum[key] = accum.get(key, 0.0) + w
    return accum


@dataclass(frozen=True)
class CaseMap:
    """Sparse accumulation map from S/T monomial products to output slots.

    Subterm i contributes w[i] * m3[a[i]] * m3[b[i]] to out[slot[i]], where
    m3 is the vector of degree-3 monomial values of the 24-vector of S/T
    entries described by ``tri``.
    """

    tri: np.ndarray       # (n_tri, 3) factor indices into the 24-vector
    a: np.ndarray         # (nnz,) degree-3 monomial index of the first half
    b: np.ndarray         # (nnz,) degree-3 monomial index of the second half
    w: np.ndarray         # (nnz,) float coefficients
    w_abs: np.ndarray     # (nnz,) absolute coefficients
    slot: np.ndarray      # (nnz,) output slot per subterm
    n_out: int


try:
    from numba import njit as _njit

    @_njit(cache=True, fastmath=False)
    def _accumulate_kernel(v24, tri, a, b, w, slot, out):  # pragma: no cover
        m3 = np.empty(tri.shape[0])
        for i in range(tri.shape[0]):
            m3[i] = v24[tri[i, 0]] * v24[tri[i, 1]] * v24[tri[i, 2]]
        for i in range(w.size):
            out[slot[i]] += w[i] * m3[a[i]] * m3[b[i]]

    @_njit(cache=True, fastmath=False)
    def _accumulate_kernel2(v24, tri, a, b, w, w_abs, slot, out,
                            out_abs):  # pragma: no cover
        m3 = np.empty(tri.shape[0])
        for i in range(tri.shape[0]):
            m3[i] = v24[tri[i, 0]] * v24[tri[i, 1]] * v24[tri[i, 2]]
        for i in range(w.size):
            p = m3[a[i]] * m3[b[i]]
            out[slot[i]] += w[i] * p
            out_abs[slot[i]] += w_abs[i] * abs(p)

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def _apply_map(cmap: CaseMap, v24: np.ndarray, absolute: bool = False) -> np.ndarray:
    w = cmap.w_abs if absolute else cmap.w
    v = np.abs(v24) if absolute else v24
    if _HAVE_NUMBA:
        out = np.zeros(cmap.n_out)
        _accumulate_kernel(v, cmap.tri, cmap.a, cmap.b, w, cmap.slot, out)
        return out
    m3 = v[cmap.tri[:, 0]] * v[cmap.tri[:, 1]] * v[cmap.tri[:, 2]]
    return np.bincount(cmap.slot, weights=w * m3[cmap.a] * m3[cmap.b],
                       minlength=cmap.n_out)


def _apply_map_both(cmap: CaseMap, v24: np.ndarray):
    """Signed accumulation plus the cancellation-free absolute-magnitude sums.

    The second output bounds each coefficient's attainable magnitude; a signed
    coefficient tiny relative to it indicates structural cancellation (used to
    detect degenerate motion) rather than a well-conditioned small value.
    """
    if _HAVE_NUMBA:
        out = np.zeros(cmap.n_out)
        out_abs = np.zeros(cmap.n_out)
        _accumulate_kernel2(v24, cmap.tri, cmap.a, cmap.b, cmap.w, cmap.w_abs,
                            cmap.slot, out, out_abs)
        return out, out_abs
    return _apply_map(cmap, v24), _apply_map(cmap, v24, absolute=True)


@dataclass(frozen=True)
class GeneratorTable:
    """Immutable view of the committed generator table plus assembly maps."""

    variables: tuple[str, ...]
    exps: tuple[np.ndarray, ...]          # per generator: (n_terms, 12) ints
    coefs: tuple[np.ndarray, ...]         # per generator: (n_terms,) floats
    scale_degrees: tuple[tuple[int, int], ...]
    derivation: str
    # evaluation arrays (original 12-variable monomials)
    _eval_idx: np.ndarray = field(repr=False, default=None)
    _eval_coef: np.ndarray = field(repr=False, default=None)
    _eval_gen: np.ndarray = field(repr=False, default=None)
    # accumulation maps of the four assembly cases (shared S/T expansion)
    _map1: CaseMap = field(repr=False, default=None)
    _map2: CaseMap = field(repr=False, default=None)
    _map3: CaseMap = field(repr=False, default=None)
    _map4: CaseMap = field(repr=False, default=None)
    # Case-I map restricted to the generators of full structural degree 9
    # (the only candidates the leading-coefficient selection rule can pick)
    _map1r: CaseMap = field(repr=False, default=None)
    case1_offsets: np.ndarray = field(default=None)
    case1_full_degree: np.ndarray = field(default=None)
    case3_offsets: np.ndarray = field(default=None)

    @property
    def n_generators(self) -> int:
        return len(self.exps)

    def term_count(self, g: int) -> int:
        return len(self.coefs[g])


def _build_table(variables, polys, scale_degrees, derivation) -> GeneratorTable:
    if len(polys) != N_GENERATORS:
        raise EliminationFailed(f"expected {N_GENERATORS} generators, got {len(polys)}")
    exps, coefs = [], []
    for poly in polys:
        E = np.array([e for e, _ in poly], dtype=np.int64)
        C = np.array([c for _, c in poly], dtype=float)
        if E.shape[1] != N_VARIABLES:
            raise EliminationFailed("terms must have 12 exponents")
        if not np.all(E.sum(axis=1) == GENERATOR_DEGREE):
            raise EliminationFailed("generator terms must have total degree 6")
        if not np.all(np.isfinite(C)):
            raise EliminationFailed("non-finite coefficient after rational conversion")
        exps.append(E)
        coefs.append(C)

    # flat arrays for direct monomial evaluation (each term = 6 factors)
    eval_idx, eval_coef, eval_gen = [], [], []
    for g in range(N_GENERATORS):
        for e, c in zip(exps[g], coefs[g]):
            eval_idx.append(np.repeat(np.arange(N_VARIABLES), e))
            eval_coef.append(c)
            eval_gen.append(g)
    eval_idx = np.array(eval_idx, dtype=np.int32)
    eval_coef = np.array(eval_coef)
    eval_gen = np.array(eval_gen, dtype=np.int64)

    # S/T expansion shared by all four assembly cases
    accum = _expand_generators([list(zip(E, C)) for E, C in zip(exps, coefs)])
    f1c = np.concatenate([_F1_POW, _F1_POW, _F1_POW + 2, _F1_POW + 2])
    gen_a = np.array([g for g, _ in accum])
    w_a = np.array([accum[k] for k in accum])
    mono_keys = [m for _, m in accum]
    fpow_a = np.array([int(f1c[list(m)].sum()) for m in mono_keys])
    k2_a = np.array([sum(1 for v in m if N_VARIABLES <= v < N_VARIABLES + 6)
                     for m in mono_keys])
    k3_a = np.array([sum(1 for v in m if v >= N_VARIABLES + 6) for m in mono_keys])
    k_a = k2_a + k3_a
    fe_a = fpow_a - 2 * k_a                       # Case III power of f1

    case1_offsets = np.array([fpow_a[gen_a == g].min() for g in range(N_GENERATORS)])
    case1_max = np.array([fpow_a[gen_a == g].max() for g in range(N_GENERATORS)])
    case1_full_degree = (case1_max - case1_offsets) // 2
    case3_offsets = np.array([fe_a[gen_a == g].min() for g in range(N_GENERATORS)])
    # every generator must have a single parity in f so that f^offset factors out
    for g in range(N_GENERATORS):
        if np.any((fpow_a[gen_a == g] - case1_offsets[g]) % 2):
            raise EliminationFailed(f"generator {g} mixes parities in f")
        if np.any((fe_a[gen_a == g] - case3_offsets[g]) % 2):
            raise EliminationFailed(f"generator {g} mixes parities in f1")

    slot1 = gen_a * (CASE1_DEG + 1) + (fpow_a - case1_offsets[gen_a]) // 2
    slot2 = gen_a * (CASE2_DEG + 1) + k_a
    apow = (fe_a - case3_offsets[gen_a]) // 2
    if apow.max() > CASE3_ALPHA_DEG or k_a.max() > CASE3_BETA_DEG:
        raise EliminationFailed("Case III degree bounds violated")
    if k2_a.max() > CASE4_ALPHA_DEG or k3_a.max() > CASE4_BETA_DEG:
        raise EliminationFailed("Case IV degree bounds violated")
    slot3 = gen_a * 28 + apow * (CASE3_BETA_DEG + 1) + k_a
    slot4 = gen_a * 16 + k2_a * (CASE4_BETA_DEG + 1) + k3_a

    def case_map(slots, n_out, keep=None) -> CaseMap:
        # builds a CaseMap over exactly the kept subterms with its own
        # degree-3 monomial factorization
        tri_id: dict[tuple[int, int, int], int] = {}

        def tri_index(half):
            if half not in tri_id:
                tri_id[half] = len(tri_id)
            return tri_id[half]

        a, b, w, sl = [], [], [], []
        for i, m in enumerate(mono_keys):
            if keep is not None and not keep[i]:
                continue
            a.append(tri_index(m[:3]))
            b.append(tri_index(m[3:]))
            w.append(w_a[i])
            sl.append(slots[i])
        tri = np.array(sorted(tri_id, key=tri_id.get), dtype=np.int64)
        order = np.argsort(np.array(sl), kind="stable")
        a = np.array(a, dtype=np.int64)[order]
        b = np.array(b, dtype=np.int64)[order]
        w = np.array(w)[order]
        sl = np.array(sl, dtype=np.int64)[order]
        return CaseMap(tri=tri, a=a, b=b, w=w, w_abs=np.abs(w), slot=sl,
                       n_out=n_out)

    deg9 = case1_full_degree[gen_a] == CASE1_DEG
    return GeneratorTable(
        variables=tuple(variables),
        exps=tuple(exps),
        coefs=tuple(coefs),
        scale_degrees=tuple(tuple(sd) for sd in scale_degrees),
        derivation=derivation,
        _eval_idx=eval_idx,
        _eval_coef=eval_coef,
        _eval_gen=eval_gen,
        _map1=case_map(slot1, N_GENERATORS * (CASE1_DEG + 1)),
        _map2=case_map(slot2, N_GENERATORS * (CASE2_DEG + 1)),
        _map3=case_map(slot3, N_GENERATORS * 28),
        _map4=case_map(slot4, N_GENERATORS * 16),
        _map1r=case_map(slot1, N_GENERATORS * (CASE1_DEG + 1), keep=deg9),
        case1_offsets=case1_offsets,
        case1_full_degree=case1_full_degree,
        case3_offsets=case3_offsets,
    )


@lru_cache(maxsize=4)
def _load_table_cached(path_str: str) -> GeneratorTable:
    with open(path_str) as fh:
        raw = json.load(fh)
    polys = [
        [(tuple(t["exps"]), float(Fraction(t["coef"]))) for t in poly]
        for poly in raw["polynomials"]
    ]
    return _build_table(raw["variables"], polys, raw["scale_degrees"],
                        raw.get("derivation", ""))


def load_table(path=None) -> GeneratorTable:
    """Load (and cache) the generator table; defaults to the committed file."""
    return _load_table_cached(str(path or DEFAULT_TABLE_PATH))


def compute_Q(G, K1: CameraIntrinsics, Kj: CameraIntrinsics) -> SymQ:
    """Q_j = (K_j^{-1} G K_1)^T (K_j^{-1} G K_1)."""
    M = Kj.K_inv @ np.asarray(G, dtype=float) @ K1.K
    return SymQ.from_matrix(M.T @ M)


def evaluate_generators(table: GeneratorTable, Q2: SymQ, Q3: SymQ) -> np.ndarray:
    """g_i(Q2, Q3), each normalized by its sum of absolute term magnitudes."""
    v = np.concatenate([Q2.as_vector(), Q3.as_vector()])
    prods = v[table._eval_idx].prod(axis=1) * table._eval_coef
    num = np.bincount(table._eval_gen, weights=prods, minlength=N_GENERATORS)
    den = np.bincount(table._eval_gen, weights=np.abs(prods), minlength=N_GENERATORS)
    return num / np.maximum(den, 1e-300)


def _st_values(G2, G3) -> np.ndarray:
    """The 24-vector [S(G2), S(G3), T(G2), T(G3)] of symmetric-entry parts."""
    v = np.empty(24)
    v[0:6] = G2[0, _IA] * G2[0, _IB] + G2[1, _IA] * G2[1, _IB]
    v[6:12] = G3[0, _IA] * G3[0, _IB] + G3[1, _IA] * G3[1, _IB]
    v[12:18] = G2[2, _IA] * G2[2, _IB]
    v[18:24] = G3[2, _IA] * G3[2, _IB]
    return v


def _case1_grids(table: GeneratorTable, G2, G3, with_abs: bool = False,
                 restricted: bool = False):
    """Per-generator Case-I coefficient rows (alpha^0..alpha^9).

    Row g carries the coefficients of P_g(alpha) where the full univariate
    polynomial is f^{case1_offsets[g]} * P_g(f^2).  With ``restricted`` only
    the generators of structural degree 9 are computed (the others have rows
    of zeros); those are the only candidates the leading-coefficient
    selection rule can pick.  When ``with_abs`` the cancellation-free
    absolute-sum rows are returned too (for degeneracy detection).
    """
    v24 = _st_values(np.asarray(G2, float), np.asarray(G3, float))
    cmap = table._map1r if restricted else table._map1
    if with_abs:
        rows, rows_abs = _apply_map_both(cmap, v24)
        return (rows.reshape(N_GENERATORS, CASE1_DEG + 1),
                rows_abs.reshape(N_GENERATORS, CASE1_DEG + 1))
    return _apply_map(cmap, v24).reshape(N_GENERATORS, CASE1_DEG + 1)


def _case2_grids(table: GeneratorTable, G2, G3, f1: float, with_abs: bool = False):
    """All 7 per-generator Case-II coefficient rows (alpha^0..alpha^6)."""
    K1 = np.array([f1, f1, 1.0])
    W2 = np.asarray(G2, float) * K1
    W3 = np.asarray(G3, float) * K1
    v24 = _st_values(W2, W3)
    if with_abs:
        rows, rows_abs = _apply_map_both(table._map2, v24)
        return (rows.reshape(N_GENERATORS, CASE2_DEG + 1),
                rows_abs.reshape(N_GENERATORS, CASE2_DEG + 1))
    return _apply_map(table._map2, v24).reshape(N_GENERATORS, CASE2_DEG + 1)


def _select_row(rows: np.ndarray):
    """Conditioning-based generator choice: largest |leading| / row norm.

    Returns (index, normalized coefficients) or (None, composite) when every
    leading coefficient underflows to zero; the fallback composite is the sum
    of squared normalized rows (a polynomial sharing the common roots).
    """
    norms = np.linalg.norm(rows, axis=1)
    lead = np.abs(rows[:, -1])
    ratio = lead / np.maximum(norms, 1e-300)
    g = int(np.argmax(ratio))
    if np.isfinite(rows[g]).all() and lead[g] > 1e-300:
        c = rows[g] / np.abs(rows[g]).max()
        return g, c
    comp = np.zeros(2 * rows.shape[1] - 1)
    for r in rows:
        m = np.abs(r).max()
        if m <= 0 or not np.isfinite(m):
            continue
        comp += np.convolve(r / m, r / m)
    return None, comp


def assemble_case1(G2, G3, table: GeneratorTable = None) -> np.ndarray:
    """Degree-9 univariate polynomial in alpha = f^2 (ascending coefficients)."""
    table = table or load_table()
    _, c = _select_row(_case1_grids(table, G2, G3))
    return c


def assemble_case2(G2, G3, f1: float, table: GeneratorTable = None) -> np.ndarray:
    """Degree-6 univariate polynomial in alpha = f^2 with known f1."""
    table = table or load_table()
    _, c = _select_row(_case2_grids(table, G2, G3, f1))
    return c


def assemble_case3(G2, G3, table: GeneratorTable = None) -> np.ndarray:
    """7x28 coefficient matrix over [1, b, ..., b^6, a, ..., a^3 b^6].

    Unknowns are alpha = f1^2 and beta = rho^2 with f2 = f3 = rho.  Rows are
    normalized to unit infinity norm.
    """
    table = table or load_table()
    M = _case3_grids(table, G2, G3)
    nrm = np.abs(M).max(axis=1)
    return M / np.maximum(nrm, 1e-300)[:, None]


def _case3_grids(table: GeneratorTable, G2, G3, with_abs: bool = False):
    """Unnormalized 7x28 Case-III coefficient matrix (optionally with the
    cancellation-free absolute-sum matrix for degeneracy detection)."""
    v24 = _st_values(np.asarray(G2, float), np.asarray(G3, float))
    if with_abs:
        M, M_abs = _apply_map_both(table._map3, v24)
        return M.reshape(N_GENERATORS, 28), M_abs.reshape(N_GENERATORS, 28)
    return _apply_map(table._map3, v24).reshape(N_GENERATORS, 28)


def assemble_case4(G2, G3, f1: float, table: GeneratorTable = None) -> np.ndarray:
    """7x16 coefficient matrix over [1, b, ..., b^3, a, ..., a^3 b^3].

    Unknowns are alpha = f2^2 and beta = f3^2 with f1 known.  Rows are
    normalized to unit infinity norm.
    """
    table = table or load_table()
    K1 = np.array([f1, f1, 1.0])
    W2 = np.asarray(G2, float) * K1
    W3 = np.asarray(G3, float) * K1
    v24 = _st_values(W2, W3)
    M = _apply_map(table._map4, v24).reshape(N_GENERATORS, 16)
    nrm = np.abs(M).max(axis=1)
    return M / np.maximum(nrm, 1e-300)[:, None]
