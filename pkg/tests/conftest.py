"""Shared synthetic-instance helpers for the test suite."""

import numpy as np
import pytest

from planefocal.geometry import (
    CameraIntrinsics,
    Plane,
    Pose,
    euclidean_homography,
    image_homography,
)


def random_rotation(rng) -> np.ndarray:
    A = rng.normal(size=(3, 3))
    Q, _ = np.linalg.qr(A)
    return Q * np.sign(np.linalg.det(Q))


def synth_scene(f1, f2, f3, seed=0, translation_scale=1.0):
    """Exact plane + two relative poses, with the image homographies."""
    rng = np.random.default_rng(seed)
    n = rng.normal(size=3)
    n[2] = abs(n[2]) + 1.0
    n /= np.linalg.norm(n)
    plane = Plane(n, float(rng.uniform(4.0, 8.0)))
    K1, K2, K3 = CameraIntrinsics(f1), CameraIntrinsics(f2), CameraIntrinsics(f3)
    pose2 = Pose(random_rotation(rng), translation_scale * rng.normal(size=3))
    pose3 = Pose(random_rotation(rng), translation_scale * rng.normal(size=3))
    G2 = image_homography(K1, K2, euclidean_homography(pose2, plane))
    G3 = image_homography(K1, K3, euclidean_homography(pose3, plane))
    return G2, G3, plane, pose2, pose3


def synth_pair(f1, f2, f3, seed=0, translation_scale=1.0):
    """Just the two exact image homographies of a random scene."""
    G2, G3, *_ = synth_scene(f1, f2, f3, seed=seed,
                             translation_scale=translation_scale)
    return G2, G3


def translation_pair(f1, f2, f3, seed=0):
    """Degenerate motion: both relative poses are pure translations."""
    rng = np.random.default_rng(seed)
    n = rng.normal(size=3)
    n[2] = abs(n[2]) + 1.0
    n /= np.linalg.norm(n)
    plane = Plane(n, float(rng.uniform(4.0, 8.0)))
    K1, K2, K3 = CameraIntrinsics(f1), CameraIntrinsics(f2), CameraIntrinsics(f3)
    I = np.eye(3)
    G2 = image_homography(K1, K2, euclidean_homography(
        Pose(I, rng.normal(size=3)), plane))
    G3 = image_homography(K1, K3, euclidean_homography(
        Pose(I, rng.normal(size=3)), plane))
    return G2, G3


@pytest.fixture(scope="session")
def table():
    from planefocal.constraints import load_table

    return load_table()
