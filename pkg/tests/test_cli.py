import json
import time

import numpy as np
import pytest

from splatedit.cli import main
from splatedit.images import load_png
from splatedit.ply import load_ply, save_ply
from splatedit.predictor import PredictorConfig, VariationPredictor, save_weights
from splatedit.synth import blob_scene

SMALL = PredictorConfig(n=8, k=4, d_model=32, d_text=16, d_eps=8,
                        m_blocks=2, d_f=32)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    scene = blob_scene(50, seed=4)
    save_ply(scene, root / "scene.ply")
    save_weights(VariationPredictor(SMALL, init_seed=0), root / "weights.ckpt")
    return root


def run(argv):
    return main([str(a) for a in argv])


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        run(["edit"])  # missing required flags
    assert exc.value.code == 2


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        run(["frobnicate"])
    assert exc.value.code == 2


def test_render(workdir, capsys):
    out = workdir / "render.png"
    assert run(["render", "--scene", workdir / "scene.ply", "--out", out,
                "--size", "32"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["width"] == 32
    assert load_png(out).shape == (32, 32, 3)


def test_edit_apply_viz_round_trip(workdir, capsys):
    var = workdir / "v.splv"
    edited = workdir / "edited.ply"
    code = run(["edit", "--scene", workdir / "scene.ply",
                "--instruction", "make it gold", "--seed", "7",
                "--weights", workdir / "weights.ckpt",
                "--out-variation", var, "--out-scene", edited,
                "--psnr", "--size", "32"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert len(report["variation_id"]) == 16
    # zero-init predictor: edit is the identity, so PSNR hits the cap
    assert report["psnr_before_after"] == 99.0
    np.testing.assert_array_equal(load_ply(edited).mu,
                                  load_ply(workdir / "scene.ply").mu)

    assert run(["apply", "--scene", workdir / "scene.ply", "--variation", var,
                "--out", workdir / "applied.ply"]) == 0
    capsys.readouterr()
    assert run(["viz", "--scene", workdir / "scene.ply", "--variation", var,
                "--layer", "panel", "--out", workdir / "viz.png",
                "--size", "32"]) == 0
    capsys.readouterr()
    assert load_png(workdir / "viz.png").shape == (64, 96, 3)


def test_gen_data_and_train(workdir, capsys):
    ds = workdir / "ds"
    cfg = workdir / "cfg.json"
    cfg.write_text(json.dumps({"orbit": {"width": 32, "height": 32}}))
    assert run(["gen-data", "--scene", workdir / "scene.ply",
                "--instruction", "make it gold", "--per-pair", "2",
                "--out", ds, "--config", cfg]) == 0
    assert json.loads(capsys.readouterr().out)["total"] == 2

    train_cfg = workdir / "train.json"
    train_cfg.write_text(json.dumps({
        "predictor": {"n": 8, "k": 4, "d_model": 32, "d_text": 16,
                      "d_eps": 8, "m_blocks": 2, "d_f": 32},
        "train": {"epochs": 2, "batch_size": 2, "lr": 1e-4}}))
    out = workdir / "trained.ckpt"
    assert run(["train", "--dataset", ds, "--out", out,
                "--config", train_cfg,
                "--loss-csv", workdir / "loss.csv"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert out.exists()
    assert np.isfinite(report["final_loss"])
    assert (workdir / "loss.csv").read_text().startswith("epoch,loss,lr")


def test_metrics_images(workdir, capsys):
    assert run(["render", "--scene", workdir / "scene.ply",
                "--out", workdir / "a.png", "--size", "32"]) == 0
    capsys.readouterr()
    assert run(["metrics", "--image-a", workdir / "a.png",
                "--image-b", workdir / "a.png"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report == {"mse": 0.0, "psnr": 99.0}


def test_metrics_scenes(workdir, capsys):
    assert run(["metrics", "--scene-a", workdir / "scene.ply",
                "--scene-b", workdir / "scene.ply"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["chamfer"] == 0.0 and report["fscore"] == 1.0


def test_metrics_without_inputs_exits_2(capsys):
    assert run(["metrics"]) == 2


def test_missing_file_exits_1(workdir, capsys):
    assert run(["render", "--scene", workdir / "missing.ply",
                "--out", workdir / "x.png"]) == 1
    assert "render" in capsys.readouterr().err


def test_gradcheck(capsys):
    assert run(["gradcheck", "--n", "3", "--max-coords", "6"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True
    assert set(report["max_rel_err"]) == {"mu", "scale", "opacity",
                                          "color", "rot"}


def test_serve_binds_ephemeral_port(workdir):
    import subprocess
    import sys
    import urllib.request
    proc = subprocess.Popen(
        [sys.executable, "-m", "splatedit.cli", "serve",
         "--bind", "127.0.0.1:0", "--store", str(workdir / "store")],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    try:
        line = proc.stdout.readline()
        bound = json.loads(line)["bound"]
        assert not bound.endswith(":0")
        last_error = None
        for _ in range(100):  # uvicorn startup races the bound-port print
            try:
                with urllib.request.urlopen(f"http://{bound}/weights",
                                            timeout=10) as r:
                    assert json.loads(r.read()) == {"weights": []}
                break
            except OSError as exc:
                last_error = exc
                time.sleep(0.05)
        else:
            raise AssertionError(f"service never came up: {last_error}")
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def test_bench(capsys):
    assert run(["bench", "--sizes", "50", "100", "200", "--repeats", "1"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert len(report["median_seconds"]) == 3
