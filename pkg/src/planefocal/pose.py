"""From focal lengths to metric three-view models.

Homography decomposition, midpoint triangulation, P3P registration,
fundamental matrices and the Sampson error used for scoring.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    CollinearPoints,
    DecompositionFailed,
    ParallelRays,
    RejectSample,
    ZeroBaseline,
)
from .geometry import CameraIntrinsics, PointTriplet, Pose, skew


@dataclass
class HomographyCandidate:
    R: np.ndarray
    t_over_d: np.ndarray
    n: np.ndarray
    normal_reliable: bool = True


@dataclass
class ThreeViewModel:
    """Focal lengths + poses of views 2 and 3 plus RANSAC bookkeeping."""

    case: str
    f1: float
    f2: float
    f3: float
    pose2: Pose
    pose3: Pose
    score: float = np.inf
    inlier_mask: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def num_inliers(self) -> int:
        return int(np.sum(self.inlier_mask))


def decompose_homography(H, support, K1: CameraIntrinsics, K2: CameraIntrinsics):
    """Analytic decomposition of H = R + (t/d) n^T.

    ``support`` is a list of (x1, x2) centered-pixel pairs used for the
    cheirality (positive depth) filter. Returns the surviving candidates,
    generically two of them.
    """
    H = np.asarray(H, dtype=float)
    if np.linalg.det(H) < 0:
        # valid H = R + (t/d) n^T has positive determinant; fix the gauge sign
        H = -H
    U, S, Vt = np.linalg.svd(H)
    if S[0] - S[2] < 1e-9 * S[0]:
        # sigma1 ~ sigma2 ~ sigma3: pure rotation, t/d -> 0
        R = H / S[1]
        if np.linalg.det(R) < 0:
            R = -R
        # project onto SO(3) to be safe
        Ur, _, Vtr = np.linalg.svd(R)
        R = Ur @ Vtr
        if np.linalg.det(R) < 0:
            R = Ur @ np.diag([1, 1, -1]) @ Vtr
        return [HomographyCandidate(R, np.zeros(3), np.array([0.0, 0.0, 1.0]),
                                    normal_reliable=False)]

    Hn = H / S[1]
    s1, s2, s3 = S / S[1]
    # Zhang/Ma-style closed form in the SVD frame of H^T H
    zeta = s1 * s1 - s3 * s3
    if zeta < 1e-12:
        raise DecompositionFailed("degenerate singular values")
    a = np.sqrt(max(s1 * s1 - 1.0, 0.0))
    b = np.sqrt(max(1.0 - s3 * s3, 0.0))
    v1 = Vt[0]
    v3 = Vt[2]
    norm = np.sqrt(zeta)

    out = []
    for sign in (+1.0, -1.0):
        n = (a * v1 + sign * b * v3) / norm
        for n_signed in (n, -n):
            cand = _pose_from_normal(Hn, n_signed)
            if cand is not None:
                out.append(cand)

    # deduplicate (n and -n give the same (R, t/d) pair up to sign convention)
    uniq = []
    for c in out:
        dup = False
        for u in uniq:
            if (np.linalg.norm(c.R - u.R) < 1e-6
                    and np.linalg.norm(c.t_over_d - u.t_over_d) < 1e-6):
                dup = True
                break
        if not dup:
            uniq.append(c)

    # reconstruction sanity
    uniq = [c for c in uniq
            if np.linalg.norm(c.R + np.outer(c.t_over_d, c.n) - Hn) < 1e-6 * max(1.0, np.linalg.norm(Hn))]

    if support:
        uniq = [c for c in uniq if _cheirality_ok(c, support, K1, K2)]
    if not uniq:
        raise DecompositionFailed("no candidate passed cheirality")
    return uniq


def _pose_from_normal(Hn: np.ndarray, n: np.ndarray):
    """Solve R, t/d given H (sigma2-normalized) and a candidate unit normal."""
    # H - R = (t/d) n^T, and R orthonormal: R = (H - t n^T) with t solving
    # the quadratic ||columns|| conditions; use the linear system route:
    # H H^T = I + t n^T H^T + H n t^T ... instead use: H n x ... direct:
    # R must satisfy R (I) = H - t n^T. Use that R m = H m for any m ⊥ n.
    e = _orthonormal_complement(n)
    Rm = Hn @ e  # images of the two in-plane directions, must be orthonormal
    c1, c2 = Rm[:, 0], Rm[:, 1]
    if (abs(np.dot(c1, c1) - 1) > 1e-6 or abs(np.dot(c2, c2) - 1) > 1e-6
            or abs(np.dot(c1, c2)) > 1e-6):
        return None
    c3 = np.cross(c1, c2)
    R = np.column_stack([c1, c2, c3]) @ np.column_stack([e[:, 0], e[:, 1], n]).T
    t_over_d = (Hn - R) @ n
    if np.linalg.det(R) < 0:
        return None
    return HomographyCandidate(R, t_over_d, n)


def _orthonormal_complement(n: np.ndarray) -> np.ndarray:
    a = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(n, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return np.column_stack([e1, e2])


def _cheirality_ok(cand: HomographyCandidate, support, K1, K2) -> bool:
    # plane must be in front of camera 1 (n.d > 0 with our d > 0 convention:
    # ray direction r1 satisfies n^T X = d > 0 => n^T r1 > 0 for the support)
    for x1, x2 in support:
        r1 = K1.K_inv @ np.array([x1[0], x1[1], 1.0])
        if np.dot(cand.n, r1) <= 0:
            return False
        # transferred depth in camera 2 must be positive
        X2 = (cand.R + np.outer(cand.t_over_d, cand.n)) @ r1
        if X2[2] <= 0:
            return False
    return True


def triangulate(K1: CameraIntrinsics, K2: CameraIntrinsics, pose2: Pose, x1, x2):
    """Midpoint of the common perpendicular of the two viewing rays (view-1 frame)."""
    r1 = K1.K_inv @ np.array([x1[0], x1[1], 1.0])
    r2 = K2.K_inv @ np.array([x2[0], x2[1], 1.0])
    d1 = r1 / np.linalg.norm(r1)
    d2w = pose2.R.T @ (r2 / np.linalg.norm(r2))
    c2 = -pose2.R.T @ pose2.t  # camera-2 center in view-1 frame

    cross = np.cross(d1, d2w)
    denom = np.dot(cross, cross)
    angle = np.linalg.norm(cross)
    if angle < 1e-6:
        raise ParallelRays("viewing rays are parallel")
    # closest points: c1 + s d1 and c2 + u d2w
    rhs = c2
    s = np.dot(np.cross(rhs, d2w), cross) / denom
    u = np.dot(np.cross(rhs, d1), cross) / denom
    p1 = s * d1
    p2 = c2 + u * d2w
    return 0.5 * (p1 + p2)


def p3p(K3: CameraIntrinsics, world_points, obs):
    """Perspective-3-point absolute pose (Grunert quartic formulation).

    Returns all real poses (<= 4) mapping view-1-frame points to camera 3.
    """
    X = [np.asarray(p, dtype=float).reshape(3) for p in world_points]
    area = np.linalg.norm(np.cross(X[1] - X[0], X[2] - X[0]))
    scale = max(np.linalg.norm(X[1] - X[0]), np.linalg.norm(X[2] - X[0]), 1e-300)
    if area < 1e-9 * scale ** 2:
        raise CollinearPoints("world points are collinear")

    rays = []
    for x in obs:
        v = K3.K_inv @ np.array([x[0], x[1], 1.0])
        rays.append(v / np.linalg.norm(v))
    j1, j2, j3 = rays

    a = np.linalg.norm(X[1] - X[2])
    b = np.linalg.norm(X[0] - X[2])
    c = np.linalg.norm(X[0] - X[1])

    cos_al = float(np.dot(j2, j3))
    cos_be = float(np.dot(j1, j3))
    cos_ga = float(np.dot(j1, j2))

    sols = _p3p_distances(a * a, b * b, c * c, cos_al, cos_be, cos_ga)

    poses = []
    for s1, s2, s3 in sols:
        P = np.array([s1 * j1, s2 * j2, s3 * j3])  # points in camera-3 frame
        pose = _absolute_orientation(np.array(X), P)
        if pose is not None:
            poses.append(pose)
    return poses


def _p3p_distances(a2, b2, c2, cos_al, cos_be, cos_ga):
    """Distances (s1, s2, s3) from the Grunert quartic in u = s2/s1."""
    # law of cosines:
    #   a2 = s2^2 + s3^2 - 2 s2 s3 cos_al
    #   b2 = s1^2 + s3^2 - 2 s1 s3 cos_be
    #   c2 = s1^2 + s2^2 - 2 s1 s2 cos_ga
    # substitute s2 = u s1, s3 = v s1; the ratios remove s1:
    #   a2/b2 = (u^2 + v^2 - 2 u v cos_al) / (1 + v^2 - 2 v cos_be)
    #   c2/b2 = (1 + u^2 - 2 u cos_ga) / (1 + v^2 - 2 v cos_be)
    # and v is eliminated by a resultant, leaving a quartic in u.
    A = a2 / b2
    B = c2 / b2
    u = _grunert_quartic_roots(A, B, cos_al, cos_be, cos_ga)

    sols = []
    for ui in u:
        if not np.isfinite(ui):
            continue
        # v from the linear relation obtained from combining eq1 and eq3:
        # (a2 - c2 * (u^2 + v^2 - 2uv cos_al)/(1 + u^2 - 2u cos_ga)) ... solve
        # v via eq pair (1,2): a2/b2 = (u^2 + v^2 - 2uv cos_al)/(1 + v^2 - 2v cos_be)
        # => (1 - A) v^2 - 2 (u cos_al - A cos_be) v + (u^2 - A) = 0
        qa = 1.0 - A
        qb = -2.0 * (ui * cos_al - A * cos_be)
        qc = ui * ui - A
        vs = []
        if abs(qa) < 1e-14:
            if abs(qb) > 1e-14:
                vs = [-qc / qb]
        else:
            disc = qb * qb - 4.0 * qa * qc
            if disc >= 0:
                sq = np.sqrt(disc)
                vs = [(-qb + sq) / (2 * qa), (-qb - sq) / (2 * qa)]
        for vi in vs:
            if vi <= 0 or ui <= 0:
                continue
            denom = 1.0 + vi * vi - 2.0 * vi * cos_be
            if denom <= 0:
                continue
            s1 = np.sqrt(b2 / denom)
            # accept only solutions consistent with the third equation
            c2_pred = s1 * s1 * (1.0 + ui * ui - 2.0 * ui * cos_ga)
            if abs(c2_pred - c2) > 1e-6 * max(c2, 1.0):
                continue
            sols.append((s1, ui * s1, vi * s1))
    # deduplicate
    uniq = []
    for s in sols:
        if not any(max(abs(s[i] - t[i]) for i in range(3)) < 1e-9 * max(s[0], 1.0)
                   for t in uniq):
            uniq.append(s)
    return uniq[:4]


def _grunert_quartic_roots(A, B, cos_al, cos_be, cos_ga):
    """Roots of the resultant quartic in u = s2/s1, built numerically."""
    # eliminate v between
    #   f(u, v) = u^2 + v^2 - 2 u v cos_al - A (1 + v^2 - 2 v cos_be)
    #   g(u, v) = 1 + u^2 - 2 u cos_ga - B (1 + v^2 - 2 v cos_be)
    # Both quadratic in v: f = f2 v^2 + f1(u) v + f0(u), g likewise.
    # Res_v(f, g) is a quartic in u; build via 4x4 Sylvester determinant with
    # polynomial entries, expanded by interpolation at 5 nodes.
    nodes = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    vals = np.empty(5)
    for i, u in enumerate(nodes):
        f2 = 1.0 - A
        f1 = -2.0 * u * cos_al + 2.0 * A * cos_be
        f0 = u * u - A
        g2 = -B
        g1 = 2.0 * B * cos_be
        g0 = 1.0 + u * u - 2.0 * u * cos_ga - B
        syl = np.array([
            [f2, f1, f0, 0.0],
            [0.0, f2, f1, f0],
            [g2, g1, g0, 0.0],
            [0.0, g2, g1, g0],
        ])
        vals[i] = np.linalg.det(syl)
    V = np.vander(nodes, 5, increasing=True)
    coeffs = np.linalg.solve(V, vals)  # ascending, degree 4
    coeffs = coeffs[::-1]
    if abs(coeffs[0]) < 1e-14 * max(abs(coeffs).max(), 1e-300):
        coeffs = coeffs[1:]
    roots = np.roots(coeffs)
    return [r.real for r in roots if abs(r.imag) < 1e-8 * max(1.0, abs(r))]


def _absolute_orientation(X_world: np.ndarray, X_cam: np.ndarray):
    """Rigid transform (R, t) with X_cam = R X_world + t from 3 matches (Kabsch)."""
    cw = X_world.mean(axis=0)
    cc = X_cam.mean(axis=0)
    Aw = X_world - cw
    Ac = X_cam - cc
    Hm = Aw.T @ Ac
    U, _, Vt = np.linalg.svd(Hm)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    if np.linalg.det(R) < 0:
        return None
    t = cc - R @ cw
    try:
        return Pose(R, t)
    except ValueError:
        return None


def fundamental_from_posed_pair(Ki: CameraIntrinsics, Kj: CameraIntrinsics,
                                pose: Pose) -> np.ndarray:
    """F = Kj^{-T} [t]x R Ki^{-1}, Frobenius-normalized (maps view i to view j)."""
    if np.linalg.norm(pose.t) < 1e-12:
        raise ZeroBaseline("translation is zero")
    E = skew(pose.t) @ pose.R
    F = Kj.K_inv.T @ E @ Ki.K_inv
    return F / np.linalg.norm(F)


def sampson_error(F, x1, x2) -> float:
    """First-order geometric epipolar error in px^2."""
    F = np.asarray(F, dtype=float)
    p1 = np.array([x1[0], x1[1], 1.0])
    p2 = np.array([x2[0], x2[1], 1.0])
    Fx1 = F @ p1
    Ftx2 = F.T @ p2
    num = float(p2 @ Fx1) ** 2
    den = Fx1[0] ** 2 + Fx1[1] ** 2 + Ftx2[0] ** 2 + Ftx2[1] ** 2
    return num / max(den, 1e-18)


def sampson_errors(F, x1s: np.ndarray, x2s: np.ndarray) -> np.ndarray:
    """Vectorized Sampson error for arrays of correspondences (n x 2 each)."""
    n = len(x1s)
    p1 = np.column_stack([x1s, np.ones(n)])
    p2 = np.column_stack([x2s, np.ones(n)])
    Fx1 = p1 @ F.T
    Ftx2 = p2 @ F
    num = np.sum(p2 * Fx1, axis=1) ** 2
    den = Fx1[:, 0] ** 2 + Fx1[:, 1] ** 2 + Ftx2[:, 0] ** 2 + Ftx2[:, 1] ** 2
    return num / np.maximum(den, 1e-18)


def _largest_spread_three(sample):
    """Pick 3 triplets maximizing pairwise image spread in view 1.

    Exhaustive for minimal-sized samples; for larger consensus sets the
    farthest pair plus the point maximizing summed distance to it is used
    (the exact optimum is cubic in the sample size and not worth it).
    """
    import itertools

    pts = np.array([t.x1 for t in sample])
    n = len(pts)
    if n <= 6:
        best, best_idx = -1.0, None
        for idx in itertools.combinations(range(n), 3):
            a, b, c = (pts[i] for i in idx)
            spread = (np.linalg.norm(a - b) + np.linalg.norm(b - c)
                      + np.linalg.norm(a - c))
            if spread > best:
                best, best_idx = spread, idx
        return best_idx
    D = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    i, j = np.unravel_index(int(np.argmax(D)), D.shape)
    s = D[i] + D[j]
    s[[i, j]] = -1.0
    return (int(i), int(j), int(np.argmax(s)))


def build_model(G2, G3, sol, sample) -> list[ThreeViewModel]:
    """All candidate three-view models for one focal solution and 4-triplet sample.

    One candidate per (H2 decomposition x P3P pose); candidates failing
    cheirality on the sample are dropped.
    """
    K1 = CameraIntrinsics(sol.f1)
    K2 = CameraIntrinsics(sol.f2)
    K3 = CameraIntrinsics(sol.f3)

    H2 = K2.K_inv @ np.asarray(G2, dtype=float) @ K1.K
    support2 = [(t.x1, t.x2) for t in sample]
    try:
        cands = decompose_homography(H2, support2, K1, K2)
    except DecompositionFailed as exc:
        raise RejectSample(str(exc)) from exc

    tri_idx = _largest_spread_three(sample)
    models = []
    for cand in cands:
        t2 = cand.t_over_d
        nrm = np.linalg.norm(t2)
        if nrm < 1e-12:
            continue  # pure translationless decomposition cannot seed scale
        pose2 = Pose(cand.R, t2 / nrm)
        try:
            Xs = [triangulate(K1, K2, pose2, sample[i].x1, sample[i].x2)
                  for i in tri_idx]
        except ParallelRays:
            continue
        if any(x[2] <= 0 for x in Xs):
            continue
        obs3 = [sample[i].x3 for i in tri_idx]
        try:
            poses3 = p3p(K3, Xs, obs3)
        except CollinearPoints as exc:
            raise RejectSample(str(exc)) from exc
        for pose3 in poses3:
            if _model_cheirality_ok(K1, K3, pose3, sample):
                models.append(ThreeViewModel(sol.case, sol.f1, sol.f2, sol.f3,
                                             pose2, pose3))
    if not models:
        raise RejectSample("no model passed cheirality")
    return models


def _model_cheirality_ok(K1, K3, pose3: Pose, sample) -> bool:
    # rough cheirality: reprojected sample points must be in front of camera 3;
    # uses ray depth of triangulation-free transfer via pose3 on the sample
    for t in sample:
        r1 = K1.K_inv @ np.array([t.x1[0], t.x1[1], 1.0])
        # depth unknown; only check that the camera is not looking away:
        X3 = pose3.R @ r1
        if X3[2] <= 0 and X3[2] + pose3.t[2] <= 0:
            return False
    return True
