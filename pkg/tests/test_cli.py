import json

import numpy as np
import pytest

from planefocal.bench import SynthConfig, generate_scene
from planefocal.cli import build_parser, main


def test_parser_structure():
    parser = build_parser()
    args = parser.parse_args(["synth-stability", "--scenes", "5",
                              "--case", "frr", "--seed", "3"])
    assert args.scenes == 5 and args.case == "frr" and args.seed == 3
    args = parser.parse_args(["solve", "x.json", "--fov-filter", "20:120"])
    assert args.fov_filter == (20.0, 120.0)
    with pytest.raises(SystemExit):
        parser.parse_args(["solve", "x.json", "--fov-filter", "banana"])
    with pytest.raises(SystemExit):
        parser.parse_args(["solve", "x.json", "--case", "bad"])


def test_verify_generators_command(capsys):
    rc = main(["verify-generators", "--instances", "50", "--seed", "1"])
    assert rc == 0
    assert "PASS" in capsys.readouterr().out


def test_solve_command(tmp_path, capsys):
    cfg = SynthConfig(n_points=30, noise_sigma=0.0, inlier_ratio=1.0,
                      rng_seed=8)
    triplets, truth = generate_scene(cfg, np.random.default_rng(8))
    w, h = cfg.image_size
    c = np.array([w / 2.0, h / 2.0])
    pts = [list(t.x1 + c) + list(t.x2 + c) + list(t.x3 + c) for t in triplets]
    p = tmp_path / "trip.json"
    p.write_text(json.dumps({"points": pts, "image_sizes": [[w, h]] * 3}))
    rc = main(["solve", str(p), "--case", "fff",
               "--max-iterations", "40", "--min-iterations", "10"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["f1"] - truth.f[0]) / truth.f[0] < 1e-4
    assert out["num_inliers"] == 30


def test_solve_command_bad_input(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{broken")
    rc = main(["solve", str(p)])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_stability_command(capsys):
    rc = main(["synth-stability", "--scenes", "10", "--case", "ff"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "median_log10_xi=" in out
