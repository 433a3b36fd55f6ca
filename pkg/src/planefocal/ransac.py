"""LO-RANSAC over triplet correspondences with LM local optimization.

Hypotheses come from 4-triplet minimal samples (two DLT homographies plus a
case solver); models are scored by truncated pairwise Sampson error over all
three view pairs; each new best model is polished by Levenberg-Marquardt on
its inliers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateConfiguration,
    DegenerateMotion,
    InsufficientData,
    NoModelFound,
    NoRealRoot,
    RejectSample,
    ZeroBaseline,
)
from .geometry import CameraIntrinsics, Pose, dlt_homography, skew
from .pose import (
    ThreeViewModel,
    build_model,
    fundamental_from_posed_pair,
    sampson_errors,
)
from .solvers import (
    DEFAULT_IMAGE_SIZE,
    RATIO_DEVIATION,
    RESIDUAL_GATE,
    FocalSolution,
    solve_ff,
    solve_fff,
    solve_fr,
    solve_frr,
)

SAMPLE_SIZE = 4


@dataclass(frozen=True)
class RansacConfig:
    """Tuning knobs of the robust estimator (defaults per the protocol)."""

    max_iterations: int = 1000
    min_iterations: int = 100
    confidence: float = 0.9999
    sampson_threshold_px: float = 3.0
    fov_filter: tuple[float, float] | None = None
    rng_seed: int = 0
    lo_max_lm_iters: int = 25
    ratio_deviation: float = RATIO_DEVIATION
    residual_gate: float = RESIDUAL_GATE
    image_size: tuple[float, float] = DEFAULT_IMAGE_SIZE

    def __post_init__(self):
        if self.min_iterations > self.max_iterations:
            raise ValueError("min_iterations exceeds max_iterations")
        if self.sampson_threshold_px <= 0:
            raise ValueError("sampson threshold must be positive")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must be in (0, 1)")


@dataclass
class EstimationResult:
    model: ThreeViewModel
    iterations: int
    num_inliers: int
    timings: dict = field(default_factory=dict)


def fov_filter(solutions, image_width_px: float,
               fov_range_deg) -> list[FocalSolution]:
    """Keep solutions whose implied horizontal FOV is inside the prior range.

    The FOV of each focal length is checked independently; ``fov_range_deg``
    of None disables the filter.
    """
    if fov_range_deg is None:
        return list(solutions)
    lo, hi = np.deg2rad(min(fov_range_deg)), np.deg2rad(max(fov_range_deg))

    def ok(f):
        fov = 2.0 * np.arctan(0.5 * image_width_px / f)
        return lo <= fov <= hi

    return [s for s in solutions if ok(s.f1) and ok(s.f2) and ok(s.f3)]


def _solve_case(case: str, G2, G3, known_f1, image_size):
    if case == "fff":
        return solve_fff(G2, G3, image_size=image_size)
    if case == "ff":
        return solve_ff(G2, G3, known_f1, image_size=image_size)
    if case == "frr":
        return solve_frr(G2, G3, image_size=image_size)
    if case == "fr":
        return solve_fr(G2, G3, known_f1, image_size=image_size)
    raise ValueError(f"unknown case {case!r}")


def _refit_candidates(inliers, case, known_f1, config):
    """Non-minimal hypotheses: DLT homographies over all inliers + solver.

    For planar scenes the pairwise epipolar score is nearly blind to the
    focal length (any plane-compatible F fits), so minimal-sample accuracy
    is noise-bound; refitting the homographies on the full consensus set
    recovers the focal to the accuracy of the non-minimal fit.
    """
    try:
        G2 = dlt_homography([(t.x1, t.x2) for t in inliers])
        G3 = dlt_homography([(t.x1, t.x3) for t in inliers])
        sols = _solve_case(case, G2, G3, known_f1, config.image_size)
    except (DegenerateConfiguration, DegenerateMotion, NoRealRoot,
            RejectSample):
        return []
    sols = fov_filter(sols, config.image_size[0], config.fov_filter)
    models = []
    for sol in sols:
        try:
            models.extend(build_model(G2, G3, sol, inliers))
        except RejectSample:
            continue
    return models


def _log_focal_distance(a: ThreeViewModel, b: ThreeViewModel) -> float:
    return (abs(np.log(a.f1 / b.f1)) + abs(np.log(a.f2 / b.f2))
            + abs(np.log(a.f3 / b.f3)))


def _pair_fundamentals(model: ThreeViewModel):
    """F12, F13, F23 of a three-view model (raises ZeroBaseline if any)."""
    K1 = CameraIntrinsics(model.f1)
    K2 = CameraIntrinsics(model.f2)
    K3 = CameraIntrinsics(model.f3)
    F12 = fundamental_from_posed_pair(K1, K2, model.pose2)
    F13 = fundamental_from_posed_pair(K1, K3, model.pose3)
    R23 = model.pose3.R @ model.pose2.R.T
    t23 = model.pose3.t - R23 @ model.pose2.t
    F23 = fundamental_from_posed_pair(K2, K3, Pose(R23, t23))
    return F12, F13, F23


def score_model(model: ThreeViewModel, x1s, x2s, x3s, threshold_px: float):
    """Truncated (MSAC) Sampson score and AND-rule inlier mask."""
    th2 = threshold_px * threshold_px
    F12, F13, F23 = _pair_fundamentals(model)
    e12 = sampson_errors(F12, x1s, x2s)
    e13 = sampson_errors(F13, x1s, x3s)
    e23 = sampson_errors(F23, x2s, x3s)
    score = float(np.minimum(e12, th2).sum() + np.minimum(e13, th2).sum()
                  + np.minimum(e23, th2).sum())
    mask = (e12 < th2) & (e13 < th2) & (e23 < th2)
    return score, mask


def estimate(triplets, case: str, known_f1: float = None,
             config: RansacConfig = None) -> EstimationResult:
    """LO-RANSAC estimation of focal lengths and relative poses.

    Deterministic for fixed inputs and ``config.rng_seed`` (per-iteration RNG
    streams are keyed by iteration index).
    """
    config = config or RansacConfig()
    if case in ("ff", "fr") and known_f1 is None:
        raise ValueError(f"case {case!r} requires known_f1")
    n = len(triplets)
    if n < SAMPLE_SIZE:
        raise InsufficientData(f"need at least {SAMPLE_SIZE} triplets, got {n}")

    x1s = np.array([t.x1 for t in triplets])
    x2s = np.array([t.x2 for t in triplets])
    x3s = np.array([t.x3 for t in triplets])

    best = None
    best_score = np.inf
    timings = {"hypothesis": 0.0, "scoring": 0.0, "local_opt": 0.0}
    iterations = 0
    refit_support = SAMPLE_SIZE  # inlier count at the last non-minimal refit

    for it in range(config.max_iterations):
        iterations = it + 1
        rng = np.random.default_rng([config.rng_seed, it])
        idx = rng.choice(n, size=SAMPLE_SIZE, replace=False)
        sample = [triplets[i] for i in idx]

        t0 = time.perf_counter()
        models = []
        try:
            G2 = dlt_homography([(t.x1, t.x2) for t in sample])
            G3 = dlt_homography([(t.x1, t.x3) for t in sample])
            sols = _solve_case(case, G2, G3, known_f1, config.image_size)
            sols = fov_filter(sols, config.image_size[0], config.fov_filter)
            for sol in sols:
                try:
                    models.extend(build_model(G2, G3, sol, sample))
                except RejectSample:
                    continue
        except (DegenerateConfiguration, DegenerateMotion, NoRealRoot,
                RejectSample):
            timings["hypothesis"] += time.perf_counter() - t0
            continue
        timings["hypothesis"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        improved = False
        for model in models:
            try:
                score, mask = score_model(model, x1s, x2s, x3s,
                                          config.sampson_threshold_px)
            except ZeroBaseline:
                continue
            if score < best_score:
                model.score = score
                model.inlier_mask = mask
                best, best_score = model, score
                improved = True
        timings["scoring"] += time.perf_counter() - t0

        if improved and best.num_inliers >= SAMPLE_SIZE:
            t0 = time.perf_counter()
            inliers = [t for t, m in zip(triplets, best.inlier_mask) if m]
            candidates = [best]
            if best.num_inliers > refit_support:
                refit_support = best.num_inliers
                scored = []
                for cand in _refit_candidates(inliers, case, known_f1,
                                              config):
                    try:
                        s, _ = score_model(cand, x1s, x2s, x3s,
                                           config.sampson_threshold_px)
                    except ZeroBaseline:
                        continue
                    scored.append((s, cand))
                scored.sort(key=lambda sc: sc[0])
                candidates += [cand for _, cand in scored[:3]]
            for cand in candidates:
                refined = local_optimize(cand, inliers, config,
                                         known_f1=known_f1)
                try:
                    score, mask = score_model(refined, x1s, x2s, x3s,
                                              config.sampson_threshold_px)
                except ZeroBaseline:
                    continue
                if score < best_score:
                    refined.score = score
                    refined.inlier_mask = mask
                    best, best_score = refined, score
            timings["local_opt"] += time.perf_counter() - t0

        if best is not None and iterations >= config.min_iterations:
            w = best.num_inliers / n
            p_good = w**SAMPLE_SIZE
            if p_good >= 1.0:
                break
            needed = np.log(1.0 - config.confidence) / np.log(1.0 - p_good)
            if iterations >= needed:
                break

    if best is None:
        raise NoModelFound("every hypothesis was rejected")

    # Final non-minimal refit: the loop pins down the inlier set and a
    # coarse model, but the pairwise Sampson score is nearly flat in the
    # focal direction on planar scenes, so LM cannot sharpen the focal.
    # The solver root (over the full consensus) in the consensus basin is
    # the accurate focal estimate; score only arbitrates pose variants.
    inliers = [t for t, m in zip(triplets, best.inlier_mask) if m]
    if len(inliers) > SAMPLE_SIZE:
        t0 = time.perf_counter()
        cands = _refit_candidates(inliers, case, known_f1, config)
        if cands:
            dists = [_log_focal_distance(c, best) for c in cands]
            dmin = min(dists)
            scored = []
            for c, d in zip(cands, dists):
                if d > dmin + 1e-12:
                    continue
                try:
                    s, m = score_model(c, x1s, x2s, x3s,
                                       config.sampson_threshold_px)
                except ZeroBaseline:
                    continue
                scored.append((s, m, c))
            if scored:
                s, m, c = min(scored, key=lambda x: x[0])
                c.score = s
                c.inlier_mask = m
                best = c
        timings["final_refit"] = time.perf_counter() - t0

    return EstimationResult(model=best, iterations=iterations,
                            num_inliers=best.num_inliers, timings=timings)


# ---------------------------------------------------------------------------
# Levenberg-Marquardt local optimization
# ---------------------------------------------------------------------------

def _rodrigues(w: np.ndarray) -> np.ndarray:
    th = np.linalg.norm(w)
    if th < 1e-12:
        return np.eye(3) + skew(w)
    k = w / th
    K = skew(k)
    return np.eye(3) + np.sin(th) * K + (1.0 - np.cos(th)) * (K @ K)


def _tangent_basis(t: np.ndarray) -> np.ndarray:
    a = np.array([1.0, 0.0, 0.0]) if abs(t[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    b1 = np.cross(t, a)
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(t, b1)
    return np.column_stack([b1, b2])


def _focal_slots(case: str):
    """Map (f1, f2, f3) to indices in the free-focal parameter block."""
    if case == "I":
        return {"f1": 0, "f2": 0, "f3": 0}, 1
    if case == "II":
        return {"f1": None, "f2": 0, "f3": 0}, 1
    if case == "III":
        return {"f1": 0, "f2": 1, "f3": 1}, 2
    if case == "IV":
        return {"f1": None, "f2": 0, "f3": 1}, 2
    raise ValueError(f"unknown case tag {case!r}")


class _ModelParameterization:
    """Local parameterization around a base model.

    theta = [free focals..., w2 (3), u2 (2), w3 (3), dt3 (3)]; rotations move
    by left-multiplied Rodrigues increments, t2 on its unit sphere via a
    tangent basis, t3 additively.
    """

    def __init__(self, model: ThreeViewModel):
        self.case = model.case
        self.slots, self.nf = _focal_slots(model.case)
        self.f0 = np.array([model.f1, model.f2, model.f3])
        self.R2, self.t2 = model.pose2.R, model.pose2.t
        self.R3, self.t3 = model.pose3.R, model.pose3.t
        self.B2 = _tangent_basis(self.t2)
        self.n_params = self.nf + 11

    def initial(self) -> np.ndarray:
        th = np.zeros(self.n_params)
        for name, slot in self.slots.items():
            if slot is not None:
                th[slot] = {"f1": self.f0[0], "f2": self.f0[1],
                            "f3": self.f0[2]}[name]
        return th

    def unpack(self, th: np.ndarray):
        f = self.f0.copy()
        for i, name in enumerate(("f1", "f2", "f3")):
            slot = self.slots[name]
            if slot is not None:
                f[i] = th[slot]
        o = self.nf
        R2 = _rodrigues(th[o : o + 3]) @ self.R2
        t2 = self.t2 + self.B2 @ th[o + 3 : o + 5]
        t2 = t2 / np.linalg.norm(t2)
        R3 = _rodrigues(th[o + 5 : o + 8]) @ self.R3
        t3 = self.t3 + th[o + 8 : o + 11]
        return f, R2, t2, R3, t3

    def to_model(self, th: np.ndarray, template: ThreeViewModel) -> ThreeViewModel:
        f, R2, t2, R3, t3 = self.unpack(th)
        # re-orthonormalize the accumulated rotation before constructing poses
        U, _, Vt = np.linalg.svd(R2)
        R2 = U @ Vt
        U, _, Vt = np.linalg.svd(R3)
        R3 = U @ Vt
        return ThreeViewModel(template.case, float(f[0]), float(f[1]),
                              float(f[2]), Pose(R2, t2), Pose(R3, t3))


def _sampson_residual_and_dF(F, x1, x2):
    """Signed first-order Sampson residual r and dr/dF (3x3)."""
    p1 = np.array([x1[0], x1[1], 1.0])
    p2 = np.array([x2[0], x2[1], 1.0])
    Fx1 = F @ p1
    Ftx2 = F.T @ p2
    g = float(p2 @ Fx1)
    den = Fx1[0] ** 2 + Fx1[1] ** 2 + Ftx2[0] ** 2 + Ftx2[1] ** 2
    den = max(den, 1e-18)
    sq = np.sqrt(den)
    r = g / sq
    dg = np.outer(p2, p1)
    dden = np.zeros((3, 3))
    dden += 2.0 * Fx1[0] * np.outer([1.0, 0, 0], p1)
    dden += 2.0 * Fx1[1] * np.outer([0, 1.0, 0], p1)
    dden += 2.0 * Ftx2[0] * np.outer(p2, [1.0, 0, 0])
    dden += 2.0 * Ftx2[1] * np.outer(p2, [0, 1.0, 0])
    dF = dg / sq - (0.5 * g / (den * sq)) * dden
    return r, dF


def _lm_residuals(par: _ModelParameterization, th, triplets,
                  with_jacobian: bool):
    """Residual vector (3 per triplet: pairs 12, 13, 23) and its Jacobian."""
    f, R2, t2, R3, t3 = par.unpack(th)
    f1, f2, f3 = f
    Ki1 = np.diag([1.0 / f1, 1.0 / f1, 1.0])
    Ki2 = np.diag([1.0 / f2, 1.0 / f2, 1.0])
    Ki3 = np.diag([1.0 / f3, 1.0 / f3, 1.0])
    dKi1 = np.diag([-1.0 / f1**2, -1.0 / f1**2, 0.0])
    dKi2 = np.diag([-1.0 / f2**2, -1.0 / f2**2, 0.0])
    dKi3 = np.diag([-1.0 / f3**2, -1.0 / f3**2, 0.0])

    R23 = R3 @ R2.T
    t23 = t3 - R23 @ t2
    E12 = skew(t2) @ R2
    E13 = skew(t3) @ R3
    E23 = skew(t23) @ R23
    F12 = Ki2 @ E12 @ Ki1
    F13 = Ki3 @ E13 @ Ki1
    F23 = Ki3 @ E23 @ Ki2

    o = par.nf
    nt = len(triplets)
    res = np.zeros(3 * nt)
    J = np.zeros((3 * nt, par.n_params)) if with_jacobian else None

    if with_jacobian:
        # dF/dtheta as (n_params, 3, 3) stacks per pair
        ex = [np.array([1.0, 0, 0]), np.array([0, 1.0, 0]),
              np.array([0, 0, 1.0])]
        dF12 = np.zeros((par.n_params, 3, 3))
        dF13 = np.zeros((par.n_params, 3, 3))
        dF23 = np.zeros((par.n_params, 3, 3))

        def add_f(dF, name, M):
            slot = par.slots[name]
            if slot is not None:
                dF[slot] += M

        add_f(dF12, "f1", Ki2 @ E12 @ dKi1)
        add_f(dF12, "f2", dKi2 @ E12 @ Ki1)
        add_f(dF13, "f1", Ki3 @ E13 @ dKi1)
        add_f(dF13, "f3", dKi3 @ E13 @ Ki1)
        add_f(dF23, "f2", Ki3 @ E23 @ dKi2)
        add_f(dF23, "f3", dKi3 @ E23 @ Ki2)

        for k in range(3):
            # rotation 2: R2 <- exp(w) R2; dR2 = [e_k]x R2
            dR2 = skew(ex[k]) @ R2
            dR23 = R3 @ dR2.T
            dt23 = -dR23 @ t2
            dF12[o + k] = Ki2 @ (skew(t2) @ dR2) @ Ki1
            dF23[o + k] = Ki3 @ (skew(dt23) @ R23 + skew(t23) @ dR23) @ Ki2
            # rotation 3
            dR3 = skew(ex[k]) @ R3
            dR23b = dR3 @ R2.T
            dt23b = -dR23b @ t2
            dF13[o + 5 + k] = Ki3 @ (skew(t3) @ dR3) @ Ki1
            dF23[o + 5 + k] = Ki3 @ (skew(dt23b) @ R23
                                     + skew(t23) @ dR23b) @ Ki2
            # translation 3 (additive)
            dF13[o + 8 + k] = Ki3 @ (skew(ex[k]) @ R3) @ Ki1
            dF23[o + 8 + k] = Ki3 @ (skew(ex[k]) @ R23) @ Ki2
        # t2 = v/|v| with v = t2_base + B2 u: dt2/du_k = (I - t2 t2^T) B2[:,k] / |v|
        v_norm = np.linalg.norm(par.t2 + par.B2 @ th[o + 3 : o + 5])
        for k in range(2):
            b = par.B2[:, k]
            b = (b - t2 * float(t2 @ b)) / v_norm
            dt23c = -R23 @ b
            dF12[o + 3 + k] = Ki2 @ (skew(b) @ R2) @ Ki1
            dF23[o + 3 + k] = Ki3 @ (skew(dt23c) @ R23) @ Ki2

    for i, t in enumerate(triplets):
        r12, d12 = _sampson_residual_and_dF(F12, t.x1, t.x2)
        r13, d13 = _sampson_residual_and_dF(F13, t.x1, t.x3)
        r23, d23 = _sampson_residual_and_dF(F23, t.x2, t.x3)
        res[3 * i : 3 * i + 3] = (r12, r13, r23)
        if with_jacobian:
            J[3 * i] = np.tensordot(dF12, d12, axes=([1, 2], [0, 1]))
            J[3 * i + 1] = np.tensordot(dF13, d13, axes=([1, 2], [0, 1]))
            J[3 * i + 2] = np.tensordot(dF23, d23, axes=([1, 2], [0, 1]))
    return res, J


def local_optimize(model: ThreeViewModel, inlier_triplets,
                   config: RansacConfig = None,
                   known_f1: float = None) -> ThreeViewModel:
    """LM refinement of a model on its inliers (pairwise Sampson cost).

    Returns the refined model when its cost improved, otherwise the input.
    """
    config = config or RansacConfig()
    if len(inlier_triplets) < SAMPLE_SIZE:
        return model
    par = _ModelParameterization(model)
    th = par.initial()
    res, _ = _lm_residuals(par, th, inlier_triplets, with_jacobian=False)
    cost = float(res @ res)
    lam = 1e-3
    for _ in range(config.lo_max_lm_iters):
        res, J = _lm_residuals(par, th, inlier_triplets, with_jacobian=True)
        g = J.T @ res
        H = J.T @ J
        try:
            step = np.linalg.solve(H + lam * np.diag(np.diag(H))
                                   + 1e-12 * np.eye(H.shape[0]), -g)
        except np.linalg.LinAlgError:
            break
        th_new = th + step
        try:
            res_new, _ = _lm_residuals(par, th_new, inlier_triplets,
                                       with_jacobian=False)
        except (ValueError, FloatingPointError):
            lam *= 10.0
            continue
        cost_new = float(res_new @ res_new)
        if np.isfinite(cost_new) and cost_new < cost:
            rel = (cost - cost_new) / max(cost, 1e-300)
            cost = cost_new
            # re-center so the local Jacobians stay exact (rotation and
            # unit-translation derivatives hold at the origin of the chart)
            try:
                par = _ModelParameterization(par.to_model(th_new, model))
            except ValueError:
                break
            th = par.initial()
            lam = max(lam * 0.1, 1e-12)
            if rel < 1e-10:
                break
        else:
            lam *= 10.0
            if lam > 1e8:
                break
    try:
        refined = par.to_model(th, model)
    except ValueError:
        return model
    res0, _ = _lm_residuals(_ModelParameterization(model),
                            _ModelParameterization(model).initial(),
                            inlier_triplets, with_jacobian=False)
    if cost < float(res0 @ res0):
        refined.score = model.score
        refined.inlier_mask = model.inlier_mask
        return refined
    return model
