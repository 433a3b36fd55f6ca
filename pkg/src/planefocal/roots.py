"""Root finding: Sturm-sequence isolation and cubic matrix-pencil eigenvalues."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import IllConditioned, RankDeficiencyMismatch, SingularC0, UnexpectedRank


def trim(coeffs, rel_tol: float = 1e-12) -> np.ndarray:
    """Drop trailing near-zero leading coefficients (ascending order input)."""
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0:
        return c
    thresh = rel_tol * np.max(np.abs(c))
    nz = np.nonzero(np.abs(c) > thresh)[0]
    if nz.size == 0:
        return np.zeros(1)
    return c[: nz[-1] + 1]


def polyval(c: np.ndarray, x: float) -> float:
    """Horner evaluation, ascending coefficients."""
    acc = 0.0
    for ck in c[::-1]:
        acc = acc * x + ck
    return acc


def polyder(c: np.ndarray) -> np.ndarray:
    if len(c) <= 1:
        return np.zeros(1)
    return c[1:] * np.arange(1, len(c))


def _polydiv_rem(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Remainder of a / b, both ascending."""
    r = np.array(a, dtype=float)
    db, lb = len(b) - 1, b[-1]
    while len(r) - 1 >= db and np.any(r != 0):
        dr = len(r) - 1
        factor = r[-1] / lb
        shift = dr - db
        r = r[:-1].copy()
        if db > 0:
            r[shift : shift + db] -= factor * b[:-1]
        r = trim(r, 1e-14)
        if len(r) == 1 and r[0] == 0:
            break
    return r


def square_free(c: np.ndarray) -> np.ndarray:
    """Square-free part via p / gcd(p, p')."""
    c = trim(c)
    if len(c) <= 2:
        return c
    g = _poly_gcd(c, polyder(c))
    if len(g) <= 1:
        return c
    q, _ = np.polydiv(c[::-1], g[::-1])
    return trim(q[::-1])


def _poly_gcd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = trim(a)
    b = trim(b)
    while len(b) > 1 or abs(b[0]) > 1e-12 * max(1.0, abs(a).max()):
        a, b = b, _polydiv_rem(a, b)
        b = trim(b)
        if len(b) == 1 and b[0] == 0:
            break
        # monic-normalize to keep coefficients bounded
        b = b / np.max(np.abs(b))
    return a


def sturm_chain(c: np.ndarray) -> list[np.ndarray]:
    """Sturm sequence p, p', -rem(...) with max-norm rescaling of each term."""
    chain = [c, trim(polyder(c))]
    while len(chain[-1]) > 1:
        r = _polydiv_rem(chain[-2], chain[-1])
        r = trim(r)
        if len(r) == 1 and r[0] == 0:
            raise IllConditioned("Sturm chain degenerated (zero remainder)")
        chain.append(-r / np.max(np.abs(r)))
    return chain


def _sign_changes(chain, x: float) -> int:
    signs = []
    for p in chain:
        v = polyval(p, x)
        if v != 0:
            signs.append(1 if v > 0 else -1)
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _rem_list(a: list, b: list) -> list:
    """Remainder of a / b on plain lists (ascending), trimming tiny leads."""
    r = list(a)
    db, lb = len(b) - 1, b[-1]
    while len(r) - 1 >= db:
        f = r[-1] / lb
        sh = len(r) - 1 - db
        r.pop()
        for i in range(db):
            r[sh + i] -= f * b[i]
        t = 1e-14 * max(abs(x) for x in r) if len(r) > 1 else 0.0
        while len(r) > 1 and abs(r[-1]) <= t:
            r.pop()
    return r


def _chain_lists(c: list) -> list[list]:
    """Sturm sequence on lists; stops early on a vanishing remainder."""
    chain = [c, [i * c[i] for i in range(1, len(c))]]
    while len(chain[-1]) > 1:
        r = _rem_list(chain[-2], chain[-1])
        m = max(abs(x) for x in r)
        if m <= 1e-14:
            break
        chain.append([-x / m for x in r])
    return chain


def _chain_matrix(chain) -> np.ndarray:
    d = max(len(p) for p in chain)
    C = np.zeros((len(chain), d))
    for i, p in enumerate(chain):
        C[i, : len(p)] = p
    return C


def _counts_grid(C: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sturm sign-change counts at every grid point (vectorized Horner)."""
    acc = np.full((C.shape[0], len(xs)), C[:, -1:])
    for k in range(C.shape[1] - 2, -1, -1):
        acc = acc * xs + C[:, k : k + 1]
    s = np.sign(acc)
    cnt = np.zeros(len(xs))
    prev = s[0]
    for i in range(1, s.shape[0]):
        si = s[i]
        cnt += (si != 0) & (prev != 0) & (si != prev)
        prev = np.where(si != 0, si, prev)
    return cnt


try:
    from numba import njit as _njit

    @_njit(cache=True)
    def _nb_rem(a, na, b, nb, out):  # pragma: no cover
        for i in range(na):
            out[i] = a[i]
        n = na
        lb = b[nb - 1]
        while n >= nb:
            f = out[n - 1] / lb
            sh = n - nb
            for i in range(nb - 1):
                out[sh + i] -= f * b[i]
            n -= 1
            if n > 1:
                t = 0.0
                for i in range(n):
                    if abs(out[i]) > t:
                        t = abs(out[i])
                t *= 1e-14
                while n > 1 and abs(out[n - 1]) <= t:
                    n -= 1
        return n

    @_njit(cache=True)
    def _nb_count(C, lens, nchain, x):  # pragma: no cover
        cnt = 0
        prev = 0
        for r in range(nchain):
            v = 0.0
            for k in range(lens[r] - 1, -1, -1):
                v = v * x + C[r, k]
            if v > 0.0:
                s = 1
            elif v < 0.0:
                s = -1
            else:
                s = 0
            if s != 0:
                if prev != 0 and s != prev:
                    cnt += 1
                prev = s
        return cnt

    @_njit(cache=True)
    def _nb_roots(cs, ulo, uhi, ngrid, geometric, tol):  # pragma: no cover
        d = cs.size - 1
        ml = d + 1
        # square-free reduction: Euclidean gcd of p and p'
        a = np.zeros(ml)
        b = np.zeros(ml)
        tmp = np.zeros(ml)
        for i in range(ml):
            a[i] = cs[i]
        na = ml
        nb = d
        for i in range(1, ml):
            b[i - 1] = i * cs[i]
        while nb > 1:
            mb = 0.0
            for i in range(nb):
                if abs(b[i]) > mb:
                    mb = abs(b[i])
            if mb <= 1e-13:
                break
            for i in range(nb):
                b[i] /= mb
            nr = _nb_rem(a, na, b, nb, tmp)
            for i in range(nb):
                a[i] = b[i]
            na = nb
            for i in range(nr):
                b[i] = tmp[i]
            nb = nr
        p = np.zeros(ml)
        if not (nb == 1 and abs(b[0]) > 1e-13) and na > 1:
            # nontrivial gcd: divide it out (quotient is the square-free part)
            r = cs.copy()
            npn = d - (na - 1) + 1
            q = np.zeros(ml)
            lead = a[na - 1]
            for k in range(d, na - 2, -1):
                f = r[k] / lead
                q[k - (na - 1)] = f
                for i in range(na):
                    r[k - (na - 1) + i] -= f * a[i]
            mq = 0.0
            for i in range(npn):
                if abs(q[i]) > mq:
                    mq = abs(q[i])
            if mq == 0.0:
                return np.empty(0)
            for i in range(npn):
                p[i] = q[i] / mq
        else:
            for i in range(ml):
                p[i] = cs[i]
            npn = ml
        if npn < 2:
            return np.empty(0)

        # Sturm chain (rows rescaled to unit max-norm)
        C = np.zeros((npn + 1, npn))
        lens = np.zeros(npn + 1, np.int64)
        for i in range(npn):
            C[0, i] = p[i]
        lens[0] = npn
        for i in range(1, npn):
            C[1, i - 1] = i * p[i]
        lens[1] = npn - 1
        nchain = 2
        while lens[nchain - 1] > 1:
            nr = _nb_rem(C[nchain - 2], lens[nchain - 2], C[nchain - 1],
                         lens[nchain - 1], tmp)
            m = 0.0
            for i in range(nr):
                if abs(tmp[i]) > m:
                    m = abs(tmp[i])
            if m <= 1e-14:
                break
            for i in range(nr):
                C[nchain, i] = -tmp[i] / m
            lens[nchain] = nr
            nchain += 1

        # grid isolation (geometric spacing when the bracket is positive)
        xs = np.empty(ngrid)
        if geometric:
            llo = np.log(ulo)
            lhi = np.log(uhi)
            for i in range(ngrid):
                xs[i] = np.exp(llo + (lhi - llo) * i / (ngrid - 1))
        else:
            for i in range(ngrid):
                xs[i] = ulo + (uhi - ulo) * i / (ngrid - 1)
        xs[0] = ulo
        xs[ngrid - 1] = uhi
        cnts = np.empty(ngrid, np.int64)
        for i in range(ngrid):
            cnts[i] = _nb_count(C, lens, nchain, xs[i])

        blo = np.empty(3 * npn)
        bhi = np.empty(3 * npn)
        nbr = 0
        sa = np.empty(64)
        sb = np.empty(64)
        sk = np.empty(64, np.int64)
        ns = 0
        for i in range(ngrid - 1):
            k = cnts[i] - cnts[i + 1]
            if k == 1 and nbr < blo.size:
                blo[nbr] = xs[i]
                bhi[nbr] = xs[i + 1]
                nbr += 1
            elif k > 1 and ns < 64:
                sa[ns] = xs[i]
                sb[ns] = xs[i + 1]
                sk[ns] = k
                ns += 1
        # subdivide multi-root cells until each bracket isolates one root
        while ns > 0:
            ns -= 1
            a0 = sa[ns]
            b0 = sb[ns]
            k0 = sk[ns]
            if k0 == 1 or (b0 - a0) < 1e-14 * max(abs(a0), abs(b0)):
                if nbr < blo.size:
                    blo[nbr] = a0
                    bhi[nbr] = b0
                    nbr += 1
                continue
            prev = _nb_count(C, lens, nchain, a0)
            for j in range(1, 9):
                xj = a0 + (b0 - a0) * j / 8.0
                cj = _nb_count(C, lens, nchain, xj)
                kk = prev - cj
                if kk > 0 and ns < 64:
                    sa[ns] = a0 + (b0 - a0) * (j - 1) / 8.0
                    sb[ns] = xj
                    sk[ns] = kk
                    ns += 1
                prev = cj

        # safeguarded Newton with a bisection fallback per isolated bracket
        roots = np.empty(nbr)
        for idx in range(nbr):
            a0 = blo[idx]
            b0 = bhi[idx]
            fa = 0.0
            for k in range(npn - 1, -1, -1):
                fa = fa * a0 + p[k]
            x = 0.5 * (a0 + b0)
            for _ in range(60):
                f = 0.0
                df = 0.0
                for k in range(npn - 1, -1, -1):
                    df = df * x + f
                    f = f * x + p[k]
                if (f > 0.0) == (fa > 0.0) and f != 0.0:
                    a0 = x
                    fa = f
                else:
                    b0 = x
                if df != 0.0:
                    xn = x - f / df
                else:
                    xn = 0.5 * (a0 + b0)
                lo_ = min(a0, b0)
                hi_ = max(a0, b0)
                if not (lo_ <= xn <= hi_) or not np.isfinite(xn):
                    xn = 0.5 * (a0 + b0)
                if abs(xn - x) <= tol * abs(xn):
                    x = xn
                    break
                x = xn
            roots[idx] = x
        return np.sort(roots[:nbr])

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def sturm_real_roots(coeffs, lo: float, hi: float, tol: float = 4e-16,
                     ngrid: int = 160) -> list[float]:
    """All distinct real roots of the polynomial in (lo, hi), sorted ascending.

    The variable is rescaled by the geometric (or absolute) midpoint of the
    bracket before anything else, so genuinely tiny leading coefficients of
    well-scaled problems survive; only terms irrelevant over the bracket are
    dropped.  A square-free reduction (Euclidean gcd) handles repeated roots,
    a Sturm count over a geometric grid isolates brackets, and safeguarded
    vectorized Newton polishes every root simultaneously.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0 or not np.all(np.isfinite(c)):
        raise IllConditioned("non-finite polynomial coefficients")
    d0 = len(c) - 1
    geometric = lo > 0
    sigma = float(np.sqrt(lo * hi)) if geometric else max(abs(lo), abs(hi))
    if sigma == 0:
        sigma = 1.0
    cs = c * sigma ** np.arange(d0 + 1)
    m = np.abs(cs).max()
    if m == 0:
        return []
    cs = cs / m
    ulo, uhi = lo / sigma, hi / sigma
    umax = max(abs(ulo), abs(uhi))
    # drop leading terms that cannot influence values anywhere in the bracket
    d = d0
    while d > 0 and abs(cs[d]) * umax**d < 1e-15:
        d -= 1
    cs = cs[: d + 1]
    if d < 1:
        return []

    if _HAVE_NUMBA:
        u_roots = _nb_roots(np.ascontiguousarray(cs), float(ulo), float(uhi),
                            ngrid, geometric, tol)
        return sorted(float(r) for r in np.unique(u_roots) * sigma)

    # square-free part via the Euclidean sequence; the gcd is nontrivial only
    # when the loop exits with a near-zero non-constant remainder
    cl = list(cs)
    a, b = cl, [i * cl[i] for i in range(1, len(cl))]
    while len(b) > 1 and max(abs(x) for x in b) > 1e-13:
        mb = max(abs(x) for x in b)
        b = [x / mb for x in b]
        a, b = b, _rem_list(a, b)
    if not (len(b) == 1 and abs(b[0]) > 1e-13) and len(a) > 1:
        q = np.polydiv(np.array(cl[::-1]), np.array(a[::-1]))[0][::-1]
        cl = list(q / np.abs(q).max())

    C = _chain_matrix(_chain_lists(cl))
    if geometric:
        xs = np.geomspace(ulo, uhi, ngrid)
    else:
        xs = np.linspace(ulo, uhi, ngrid)
    xs[0], xs[-1] = ulo, uhi
    cnt = _counts_grid(C, xs)
    dif = cnt[:-1] - cnt[1:]
    cells = np.nonzero(dif)[0]
    los, his, stack = [], [], []
    for i in cells:
        if dif[i] == 1:
            los.append(xs[i])
            his.append(xs[i + 1])
        else:
            stack.append((xs[i], xs[i + 1], int(dif[i])))
    # subdivide cells holding several roots until each bracket has one
    while stack:
        a_, b_, k = stack.pop()
        if k == 1 or (b_ - a_) < 1e-14 * max(abs(a_), abs(b_)):
            los.append(a_)
            his.append(b_)
            continue
        mids = np.linspace(a_, b_, 9)
        cm = _counts_grid(C, mids)
        dm = cm[:-1] - cm[1:]
        for i in np.nonzero(dm)[0]:
            stack.append((mids[i], mids[i + 1], int(dm[i])))
    if not los:
        return []

    # batched safeguarded Newton: bisection step whenever Newton escapes
    a_ = np.array(los)
    b_ = np.array(his)
    cc = np.array(cl)
    PD = np.zeros((2, len(cc)))
    PD[0] = cc
    PD[1, : len(cc) - 1] = np.arange(1, len(cc)) * cc[1:]

    def horner2(x):
        acc = np.full((2, len(x)), PD[:, -1:])
        for k in range(PD.shape[1] - 2, -1, -1):
            acc = acc * x + PD[:, k : k + 1]
        return acc

    fa = horner2(a_)[0]
    x = 0.5 * (a_ + b_)
    for _ in range(60):
        F = horner2(x)
        f, df = F[0], F[1]
        same = (np.sign(f) == np.sign(fa)) & (f != 0)
        a_ = np.where(same, x, a_)
        fa = np.where(same, f, fa)
        b_ = np.where(same, b_, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - f / df
        blo, bhi = np.minimum(a_, b_), np.maximum(a_, b_)
        bad = ~np.isfinite(xn) | (xn < blo) | (xn > bhi)
        xn = np.where(bad, 0.5 * (a_ + b_), xn)
        conv = np.abs(xn - x) <= tol * np.maximum(np.abs(xn), 1e-300)
        x = xn
        if conv.all():
            break
    return sorted(float(r) for r in np.unique(x) * sigma)


@dataclass(frozen=True)
class CubicMatrixPencil:
    """C(a) = a^3 C3 + a^2 C2 + a C1 + C0, square real coefficient matrices."""

    C0: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    C3: np.ndarray

    def __post_init__(self):
        for name in ("C0", "C1", "C2", "C3"):
            M = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, M)
        k = self.C0.shape[0]
        for name in ("C0", "C1", "C2", "C3"):
            if getattr(self, name).shape != (k, k):
                raise ValueError("pencil coefficients must be square and equal size")

    @property
    def size(self) -> int:
        return self.C0.shape[0]

    def __call__(self, alpha: float) -> np.ndarray:
        return ((self.C3 * alpha + self.C2) * alpha + self.C1) * alpha + self.C0


def companion_gamma(pencil: CubicMatrixPencil) -> np.ndarray:
    """3k x 3k companion of the reversed (gamma = 1/alpha) transposed pencil."""
    k = pencil.size
    C0T_inv = np.linalg.inv(pencil.C0.T)
    D = np.zeros((3 * k, 3 * k))
    D[:k, k : 2 * k] = np.eye(k)
    D[k : 2 * k, 2 * k :] = np.eye(k)
    D[2 * k :, :k] = -C0T_inv @ pencil.C3.T
    D[2 * k :, k : 2 * k] = -C0T_inv @ pencil.C2.T
    D[2 * k :, 2 * k :] = -C0T_inv @ pencil.C1.T
    return D


def deflate_zero_columns(pencil: CubicMatrixPencil, expected_rank: int = 4,
                         rank_tol: float = 1e-8) -> np.ndarray:
    """Companion with the structural zero eigenvalues of rank-deficient C3 removed.

    Rows of every coefficient are rotated by an orthogonal transform that
    compresses C3's row space into its top rank(C3) rows; after transposition
    the zero columns of C3^T and their matching rows drop out of the
    companion, e.g. 21x21 -> 18x18 for the 7x7 pencil with rank-4 C3.
    """
    k = pencil.size
    # orthogonal row compression of C3: U^T C3 has zero bottom rows
    U, s, _ = np.linalg.svd(pencil.C3)
    rank = int(np.sum(s > rank_tol * max(s[0], 1e-300)))
    if rank != expected_rank:
        raise UnexpectedRank(f"rank(C3) = {rank}, expected {expected_rank}")
    T = U.T
    C3, C2, C1, C0 = (T @ M for M in (pencil.C3, pencil.C2, pencil.C1, pencil.C0))
    z = k - rank  # number of zero rows at the bottom of the transformed C3
    C3[rank:, :] = 0.0

    cond = np.linalg.cond(C0)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularC0(f"cond(C0) = {cond:.3g}")

    D = np.zeros((3 * k, 3 * k))
    C0T_inv = np.linalg.inv(C0.T)
    D[:k, k : 2 * k] = np.eye(k)
    D[k : 2 * k, 2 * k :] = np.eye(k)
    D[2 * k :, :k] = -C0T_inv @ C3.T
    D[2 * k :, k : 2 * k] = -C0T_inv @ C2.T
    D[2 * k :, 2 * k :] = -C0T_inv @ C1.T

    # first-block columns rank..k-1 of D are exactly zero (zero columns of
    # C3^T), so D is block lower triangular after reordering: its nonzero
    # spectrum equals that of the principal submatrix on the kept indices
    keep = [i for i in range(3 * k) if not (rank <= i < k)]
    Dd = D[np.ix_(keep, keep)]
    assert Dd.shape == (3 * k - z, 3 * k - z)
    return Dd


def null_vector(M, gap: float = 1e3) -> np.ndarray:
    """Right null vector of a rank-deficient-by-one matrix.

    Requires a clear spectral gap between the two smallest singular values
    (ill-conditioned pencils make absolute rank thresholds unreliable).
    Normalized so the first component is 1 when it is not tiny, matching
    monomial vectors of the form [1, b, b^2, ...].
    """
    _, s, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    if s[-2] < gap * s[-1]:
        raise RankDeficiencyMismatch("null space dimension is ambiguous")
    v = Vt[-1]
    if abs(v[0]) > 1e-8:
        v = v / v[0]
    return v


def polyeig_cubic(pencil: CubicMatrixPencil, deflate: bool = False,
                  expected_rank: int = 4):
    """Eigenvalues alpha of the cubic pencil via gamma = 1/alpha inversion.

    Returns (alphas, companion_size). Infinite/zero gammas are discarded;
    alpha = 1/gamma for the rest. Use ``null_vector(pencil(alpha))`` to get
    the companion monomial vector for real candidates.
    """
    cond = np.linalg.cond(pencil.C0)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularC0(f"cond(C0) = {cond:.3g}")
    if deflate:
        D = deflate_zero_columns(pencil, expected_rank=expected_rank)
    else:
        D = companion_gamma(pencil)
    gammas = np.linalg.eigvals(D)
    scale = max(np.max(np.abs(gammas)), 1.0)
    alphas = [1.0 / g for g in gammas if abs(g) > 1e-12 * scale]
    return alphas, D.shape[0]
