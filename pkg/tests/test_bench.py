import json

import numpy as np
import pytest

from planefocal.bench import (
    SynthConfig,
    _exact_homographies,
    accuracy_sweep,
    generate_scene,
    load_dataset,
    mAA,
    run_benchmark,
    run_solver,
    stability_experiment,
    xi_f,
    xi_pair,
)
from planefocal.exceptions import ParseError
from planefocal.geometry import CameraIntrinsics, Pose, project
from planefocal.ransac import RansacConfig


def test_synth_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(planar_fraction=1.5)
    with pytest.raises(ValueError):
        SynthConfig(inlier_ratio=-0.1)
    with pytest.raises(ValueError):
        SynthConfig(n_points=2)


def test_metrics():
    assert xi_f(110.0, 100.0) == pytest.approx(0.1)
    assert xi_pair(110.0, 90.0, 100.0, 100.0) == pytest.approx(0.1)
    # all errors zero: perfect area under the accuracy curve
    assert mAA(np.zeros(10), 0.1) == pytest.approx(1.0)
    # all errors above threshold: zero
    assert mAA(np.full(10, 5.0), 0.1) == 0.0
    assert mAA([], 0.1) == 0.0
    with pytest.raises(ValueError):
        mAA([0.1], 0.0)


def test_generate_scene_consistency():
    cfg = SynthConfig(n_points=25, noise_sigma=0.0, inlier_ratio=1.0,
                      rng_seed=11)
    triplets, truth = generate_scene(cfg, np.random.default_rng(11))
    assert len(triplets) == 25
    assert truth.inlier_mask.all()
    # planar scene: the exact homographies must transfer every observation
    G2, G3 = _exact_homographies(truth)
    for t in triplets:
        p = G2 @ np.array([t.x1[0], t.x1[1], 1.0])
        assert np.allclose(p[:2] / p[2], t.x2, atol=1e-6)
        p = G3 @ np.array([t.x1[0], t.x1[1], 1.0])
        assert np.allclose(p[:2] / p[2], t.x3, atol=1e-6)
    # in-image check (centered pixels)
    for t in triplets:
        assert abs(t.x1[0]) <= 960.0 and abs(t.x1[1]) <= 540.0


def test_generate_scene_outliers_and_offplane():
    cfg = SynthConfig(n_points=40, planar_fraction=0.5, noise_sigma=0.0,
                      inlier_ratio=0.75, rng_seed=3)
    triplets, truth = generate_scene(cfg, np.random.default_rng(3))
    assert truth.inlier_mask.sum() == 30
    # off-plane points exist: the homography no longer transfers all inliers
    G2, _ = _exact_homographies(truth)
    residuals = []
    for t in triplets:
        p = G2 @ np.array([t.x1[0], t.x1[1], 1.0])
        residuals.append(np.linalg.norm(p[:2] / p[2] - t.x2))
    assert max(residuals) > 1.0


def test_generate_scene_deterministic():
    cfg = SynthConfig(n_points=10, rng_seed=9)
    t1, truth1 = generate_scene(cfg, np.random.default_rng(9))
    t2, truth2 = generate_scene(cfg, np.random.default_rng(9))
    assert truth1.f == truth2.f
    assert all(np.array_equal(a.x2, b.x2) for a, b in zip(t1, t2))


@pytest.mark.parametrize("case", ["fff", "ff", "frr", "fr"])
def test_run_solver_dispatch(case):
    cfg = SynthConfig(case=case, n_points=8, inlier_ratio=1.0, rng_seed=31)
    _, truth = generate_scene(cfg, np.random.default_rng(31))
    G2, G3 = _exact_homographies(truth)
    sols = run_solver(case, G2, G3, known_f1=truth.f[0])
    assert sols


def test_stability_experiment_small(tmp_path):
    csv_path = tmp_path / "hist.csv"
    logs = stability_experiment(n_scenes=25, case="fff", rng_seed=0,
                                csv_path=csv_path)
    assert logs.shape == (25,)
    assert np.median(logs) < -6.0
    text = csv_path.read_text().splitlines()
    assert text[0] == "bin_lo,bin_hi,count"
    counts = sum(int(line.split(",")[2]) for line in text[1:])
    assert counts == 25


def test_accuracy_sweep_smoke(tmp_path):
    cfg = SynthConfig(case="fff", n_scenes=2, n_points=40, rng_seed=0)
    rc = RansacConfig(max_iterations=30, min_iterations=10)
    rows = accuracy_sweep(cfg, rc, planar_fractions=(1.0,), sigmas=(0.0,),
                          csv_path=tmp_path / "sweep.csv")
    assert len(rows) == 1
    assert rows[0]["median_xi_f"] < 1e-4
    assert (tmp_path / "sweep.csv").exists()


def _write_dataset(path, truth, triplets, image_size=(1920.0, 1080.0)):
    w, h = image_size
    c = np.array([w / 2.0, h / 2.0])
    pts = [list(t.x1 + c) + list(t.x2 + c) + list(t.x3 + c) for t in triplets]
    rec = {"camera_ids": ["a", "b", "c"],
           "image_sizes": [[w, h]] * 3,
           "f_gt": list(truth.f),
           "points": pts}
    path.write_text(json.dumps({"records": [rec]}))


def test_load_dataset_and_benchmark(tmp_path):
    cfg = SynthConfig(n_points=30, noise_sigma=0.0, inlier_ratio=1.0,
                      rng_seed=5)
    triplets, truth = generate_scene(cfg, np.random.default_rng(5))
    p = tmp_path / "ds.json"
    _write_dataset(p, truth, triplets)
    ds = load_dataset(p)
    assert len(ds.records) == 1
    rec = ds.records[0]
    assert rec.points.shape == (30, 6)
    assert rec.f_gt == tuple(truth.f)

    rows = run_benchmark(ds, "fff",
                         config=RansacConfig(max_iterations=40,
                                             min_iterations=15),
                         csv_path=tmp_path / "out.csv")
    assert len(rows) == 1
    assert rows[0]["case"] == "fff"
    assert rows[0]["method"] == "H_fff"
    assert rows[0]["n_triplets"] == 1
    assert rows[0]["median_xi_f"] < 0.05
    header = (tmp_path / "out.csv").read_text().splitlines()[0]
    assert header == ("case,method,n_triplets,median_xi_f,mean_xi_f,"
                      "maa_0.1,maa_0.2,mean_runtime_ms")


def test_load_dataset_parse_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_dataset(p)
    p.write_text(json.dumps({"nope": []}))
    with pytest.raises(ParseError):
        load_dataset(p)
    p.write_text(json.dumps({"records": [{"points": [[1, 2, 3]],
                                          "image_sizes": [[1, 1]] * 3}]}))
    with pytest.raises(ParseError):
        load_dataset(p)


def test_benchmark_skips_short_records(tmp_path):
    cfg = SynthConfig(n_points=30, noise_sigma=0.0, inlier_ratio=1.0,
                      rng_seed=6)
    triplets, truth = generate_scene(cfg, np.random.default_rng(6))
    w, h = 1920.0, 1080.0
    c = np.array([w / 2.0, h / 2.0])
    pts = [list(t.x1 + c) + list(t.x2 + c) + list(t.x3 + c) for t in triplets]
    short = {"camera_ids": ["a", "b", "c"], "image_sizes": [[w, h]] * 3,
             "f_gt": list(truth.f), "points": pts[:6]}
    full = dict(short, points=pts)
    p = tmp_path / "ds.json"
    p.write_text(json.dumps({"records": [short, full]}))
    rows = run_benchmark(load_dataset(p), "fff",
                         config=RansacConfig(max_iterations=30,
                                             min_iterations=10))
    assert rows[0]["n_triplets"] == 1  # the 6-point record was skipped
