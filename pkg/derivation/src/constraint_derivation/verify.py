"""Numeric verification of an emitted generator table.

Independent of the derivation path: random exact-geometry instances are built
from a forward model (rotations, translations, plane, focal lengths), the
homography Grams Q_j are formed, and every generator is evaluated in floating
point. On exact instances the normalized residual (value over the largest
term magnitude) must sit at rounding level; the PASS threshold is 1e-9.
"""

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .derive import N_GENERATORS, VARIABLES

PASS_THRESHOLD = 1e-9


@dataclass(frozen=True)
class CompiledTable:
    """Float-compiled generator table: per-generator exponent/coef arrays."""

    exps: tuple      # per generator: (n_terms, 12) int array
    coefs: tuple     # per generator: (n_terms,) float array
    fractions: tuple  # per generator: tuple of exact Fraction coefficients
    scale_degrees: tuple


@dataclass(frozen=True)
class VerificationReport:
    trials: int
    max_residual: float
    threshold: float = PASS_THRESHOLD

    @property
    def passed(self):
        return self.max_residual < self.threshold


def load_table(path) -> CompiledTable:
    with open(path) as f:
        doc = json.load(f)
    if doc["variables"] != VARIABLES:
        raise ValueError("unexpected variable ordering in table")
    if len(doc["polynomials"]) != N_GENERATORS:
        raise ValueError("table does not contain 7 polynomials")
    exps, coefs, fracs = [], [], []
    for poly in doc["polynomials"]:
        exps.append(np.array([t["exps"] for t in poly], dtype=np.int64))
        fr = tuple(Fraction(t["coef"]) for t in poly)
        fracs.append(fr)
        coefs.append(np.array([float(c) for c in fr]))
    return CompiledTable(tuple(exps), tuple(coefs), tuple(fracs),
                         tuple(tuple(sd) for sd in doc["scale_degrees"]))


def evaluate_values(table: CompiledTable, q):
    """Raw generator values at a batch of 12-vectors q (shape (n, 12))."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    out = np.empty((q.shape[0], N_GENERATORS))
    for i, (E, c) in enumerate(zip(table.exps, table.coefs)):
        terms = c * np.prod(q[:, None, :] ** E[None, :, :], axis=2)
        out[:, i] = terms.sum(axis=1)
    return out


def evaluate_residuals(table: CompiledTable, q):
    """|g_i(q)| normalized by the largest term magnitude, batched."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    out = np.empty((q.shape[0], N_GENERATORS))
    for i, (E, c) in enumerate(zip(table.exps, table.coefs)):
        terms = c * np.prod(q[:, None, :] ** E[None, :, :], axis=2)
        num = np.abs(terms.sum(axis=1))
        den = np.abs(terms).max(axis=1)
        out[:, i] = num / np.maximum(den, 1e-300)
    return out


def _random_rotation(rng):
    M = rng.standard_normal((3, 3))
    Q, R = np.linalg.qr(M)
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 2] = -Q[:, 2]
    return Q


def _sym_vector(Q):
    return np.array([Q[0, 0], Q[0, 1], Q[0, 2], Q[1, 1], Q[1, 2], Q[2, 2]])


def random_instance(rng, perturbation=0.0):
    """One exact-geometry 12-vector (q2 | q3) from the forward model.

    With perturbation > 0, Q2 receives symmetric noise of that magnitude so
    callers can check the residuals react (power of the test).
    """
    n = rng.standard_normal(3)
    n /= np.linalg.norm(n)
    d = rng.uniform(1.0, 5.0)
    focals = rng.uniform(400.0, 3000.0, size=3)
    K1 = np.diag([focals[0], focals[0], 1.0])
    qvecs = []
    for j in (1, 2):
        H = _random_rotation(rng) + np.outer(rng.standard_normal(3) / d, n)
        Kj_inv = np.diag([1.0 / focals[j], 1.0 / focals[j], 1.0])
        G = Kj_inv @ (np.diag([focals[j], focals[j], 1.0]) @ H
                      @ np.diag([1.0 / focals[0], 1.0 / focals[0], 1.0])) @ K1
        Q = G.T @ G
        if perturbation > 0.0 and j == 1:
            E = rng.standard_normal((3, 3))
            Q = Q + perturbation * np.abs(Q).max() * (E + E.T) / 2.0
        Q = Q * (rng.uniform(0.5, 2.0) / np.abs(Q).max())
        qvecs.append(_sym_vector(Q))
    return np.concatenate(qvecs)


def verify_generators(table, trials=1000, seed=0,
                      perturbation=0.0) -> VerificationReport:
    """Evaluate all generators on random exact-geometry instances.

    `table` is a CompiledTable or a path to a GeneratorTable JSON file.
    Report-only: PASS iff the max normalized residual over all trials and
    generators is below 1e-9.
    """
    if not isinstance(table, CompiledTable):
        table = load_table(table)
    rng = np.random.default_rng(seed)
    q = np.stack([random_instance(rng, perturbation) for _ in range(trials)])
    res = evaluate_residuals(table, q)
    return VerificationReport(trials, float(res.max()))
