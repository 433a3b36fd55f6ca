"""Core multi-view geometry: poses, planes, homographies and projections.

All pixel coordinates in this library are centered, i.e. the principal
point has already been subtracted, so intrinsics are K = diag(f, f, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateConfiguration, NonPositiveDepth


@dataclass(frozen=True)
class CameraIntrinsics:
    """Single-parameter pinhole intrinsics (square pixels, centered pp)."""

    f: float

    def __post_init__(self):
        if not (np.isfinite(self.f) and self.f > 0):
            raise ValueError(f"focal length must be positive, got {self.f}")

    @property
    def K(self) -> np.ndarray:
        return np.diag([self.f, self.f, 1.0])

    @property
    def K_inv(self) -> np.ndarray:
        return np.diag([1.0 / self.f, 1.0 / self.f, 1.0])


@dataclass(frozen=True)
class Pose:
    """Rigid transform X_cam = R @ X + t."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        t = np.asarray(self.t, dtype=float).reshape(3)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
            raise ValueError("R is not orthonormal")
        if np.linalg.det(R) < 0:
            raise ValueError("R is not a proper rotation")


@dataclass(frozen=True)
class Plane:
    """Plane n.X = d with unit normal and positive distance."""

    n: np.ndarray
    d: float

    def __post_init__(self):
        n = np.asarray(self.n, dtype=float).reshape(3)
        object.__setattr__(self, "n", n)
        if not np.isclose(np.linalg.norm(n), 1.0, atol=1e-9):
            raise ValueError("plane normal must be unit length")
        if self.d <= 0:
            raise ValueError("plane distance must be positive")


@dataclass(frozen=True)
class PointTriplet:
    """One correspondence observed in all three views (centered pixels)."""

    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray

    def __post_init__(self):
        for name in ("x1", "x2", "x3"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(2)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, v)


def skew(v) -> np.ndarray:
    """Cross-product matrix: skew(v) @ w == cross(v, w)."""
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def euclidean_homography(pose: Pose, plane: Plane) -> np.ndarray:
    """H = R + (t/d) n^T mapping on-plane points between camera frames."""
    return pose.R + np.outer(pose.t / plane.d, plane.n)


def normalize_homography(G) -> np.ndarray:
    """Fix the scale/sign gauge: unit Frobenius norm, largest entry positive."""
    G = np.asarray(G, dtype=float)
    nrm = np.linalg.norm(G)
    if nrm == 0 or not np.all(np.isfinite(G)):
        raise DegenerateConfiguration("homography is zero or non-finite")
    G = G / nrm
    idx = np.unravel_index(np.argmax(np.abs(G)), G.shape)
    if G[idx] < 0:
        G = -G
    return G


def image_homography(K1: CameraIntrinsics, Kj: CameraIntrinsics, H) -> np.ndarray:
    """Pixel-space homography G ~ Kj H K1^{-1}, gauge-normalized."""
    return normalize_homography(Kj.K @ np.asarray(H, dtype=float) @ K1.K_inv)


def project(K: CameraIntrinsics, pose: Pose, X) -> np.ndarray:
    """Pinhole projection to centered pixel coordinates."""
    Xc = pose.R @ np.asarray(X, dtype=float).reshape(3) + pose.t
    if Xc[2] <= 0:
        raise NonPositiveDepth(f"depth {Xc[2]} is not positive")
    return K.f * Xc[:2] / Xc[2]


def _conditioning_transform(pts: np.ndarray) -> np.ndarray:
    """Hartley-style isotropic normalization: centroid to origin, mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    dists = np.linalg.norm(pts - centroid, axis=1)
    mean_dist = dists.mean()
    if mean_dist < 1e-12:
        raise DegenerateConfiguration("all points coincide")
    s = np.sqrt(2.0) / mean_dist
    T = np.array([
        [s, 0.0, -s * centroid[0]],
        [0.0, s, -s * centroid[1]],
        [0.0, 0.0, 1.0],
    ])
    return T


def dlt_homography(correspondences) -> np.ndarray:
    """Least-squares homography from >=4 point pairs via the normalized DLT.

    Raises DegenerateConfiguration for rank-deficient (e.g. collinear) samples.
    """
    src = np.array([np.asarray(a, dtype=float).reshape(2) for a, _ in correspondences])
    dst = np.array([np.asarray(b, dtype=float).reshape(2) for _, b in correspondences])
    if len(src) < 4:
        raise DegenerateConfiguration("need at least 4 correspondences")

    Ts = _conditioning_transform(src)
    Td = _conditioning_transform(dst)
    sh = (Ts @ np.column_stack([src, np.ones(len(src))]).T).T
    dh = (Td @ np.column_stack([dst, np.ones(len(dst))]).T).T

    A = np.zeros((2 * len(src), 9))
    for i, ((x, y, _), (u, v, _)) in enumerate(zip(sh, dh)):
        A[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y, -u]
        A[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y, -v]

    _, s, Vt = np.linalg.svd(A)
    # with 4 points A is 8x9: rank must be 8 for a unique solution
    if s[-2] < 1e-9 * max(s[0], 1e-300):
        raise DegenerateConfiguration("DLT design matrix is rank deficient")
    Hn = Vt[-1].reshape(3, 3)
    H = np.linalg.inv(Td) @ Hn @ Ts
    if abs(np.linalg.det(H)) < 1e-12 * np.linalg.norm(H) ** 3:
        raise DegenerateConfiguration("estimated homography is singular")
    return normalize_homography(H)
