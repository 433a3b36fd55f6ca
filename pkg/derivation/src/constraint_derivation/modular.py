"""Exact mod-p linear algebra on float64 BLAS.

All moduli are kept below 2^21 so every intermediate dot product of
panel-sized updates stays well under 2^53 and float64 arithmetic is exact.
"""

import numpy as np


def echelon_mod(A, p, panel=64):
    """Forward elimination to row echelon form mod p (partial pivoting).

    Returns (R, pivots) where pivots is a list of (row, col). The panelled
    update keeps the bulk of the work inside BLAS matrix products.
    """
    A = np.asarray(A, dtype=np.float64) % p
    n, m = A.shape
    r0 = 0
    c0 = 0
    pivots = []
    while r0 < n and c0 < m:
        c1 = min(c0 + panel, m)
        # factor the panel A[r0:, c0:c1] in place, recording multipliers
        piv_rows = []   # absolute row indices (after swaps) in order
        mult_cols = []  # for each pivot k: full column of multipliers (n-r0,)
        rr = r0
        for c in range(c0, c1):
            col = A[rr:, c]
            nz = np.nonzero(col)[0]
            if len(nz) == 0:
                continue
            i = rr + nz[0]
            if i != rr:
                A[[rr, i], c0:c1] = A[[i, rr], c0:c1]
                A[[rr, i], :c0] = A[[i, rr], :c0]
                A[[rr, i], c1:] = A[[i, rr], c1:]
            inv = pow(int(A[rr, c]), p - 2, p)
            mcol = np.zeros(n - r0)
            below = A[rr + 1:, c] * inv % p
            mcol[rr + 1 - r0:] = below
            # eliminate within panel columns only; the trailing block is
            # updated once per panel from the recorded multipliers
            prow = A[rr, c0:c1] % p
            A[rr + 1:, c0:c1] = (A[rr + 1:, c0:c1] - np.outer(below, prow)) % p
            piv_rows.append(rr)
            mult_cols.append(mcol)
            pivots.append((rr, c))
            rr += 1
            if rr == n:
                break
        k = len(piv_rows)
        if k and c1 < m:
            # U = fully-updated trailing parts of pivot rows:
            # (I + Lpp) U = A[piv_rows, c1:]  (unit lower triangular solve)
            M = np.column_stack(mult_cols)            # (n-r0) x k
            Lpp = M[[pr - r0 for pr in piv_rows], :]  # k x k strictly lower
            B = A[piv_rows, c1:].copy()
            U = np.empty_like(B)
            for i in range(k):
                if i:
                    U[i] = (B[i] - (Lpp[i, :i] @ U[:i])) % p
                else:
                    U[i] = B[i]
            A[piv_rows, c1:] = U
            # remaining rows r0.. excluding pivot rows
            mask = np.ones(n - r0, dtype=bool)
            for pr in piv_rows:
                mask[pr - r0] = False
            Mo = M[mask]
            if Mo.size:
                idx = np.arange(r0, n)[mask]
                A[idx, c1:] = (A[idx, c1:] - Mo @ U) % p
        r0 = rr
        c0 = c1
    return A, pivots


def nullspace_mod(A, p, panel=64):
    """Basis (rows) of the right null space of A mod p."""
    R, pivots = echelon_mod(A, p, panel=panel)
    m = A.shape[1]
    piv_set = {c for _, c in pivots}
    free = [c for c in range(m) if c not in piv_set]
    if not free:
        return np.zeros((0, m), dtype=np.int64)
    X = np.zeros((m, len(free)))
    for j, fc in enumerate(free):
        X[fc, j] = 1.0
    for (rr, pc) in reversed(pivots):
        row = R[rr]
        rhs = (row[pc + 1:] @ X[pc + 1:]) % p
        inv = pow(int(row[pc]), p - 2, p)
        X[pc] = (-rhs * inv) % p
    return X.T.astype(np.int64)


def rref_rows_mod(B, p):
    """Reduced row echelon form of a small basis matrix (canonicalization).

    Returns (R, pivot_columns). The RREF rows are the unique canonical basis
    of the row space, so bases computed modulo different primes line up
    coefficient-by-coefficient as long as the pivot columns agree.
    """
    B = np.array(B, dtype=np.int64) % p
    n, m = B.shape
    r = 0
    piv = []
    for c in range(m):
        nz = np.nonzero(B[r:, c])[0]
        if len(nz) == 0:
            continue
        i = r + nz[0]
        B[[r, i]] = B[[i, r]]
        inv = pow(int(B[r, c]), p - 2, p)
        B[r] = B[r] * inv % p
        for j in range(n):
            if j != r and B[j, c]:
                B[j] = (B[j] - B[j, c] * B[r]) % p
        piv.append(c)
        r += 1
        if r == n:
            break
    return B, piv
