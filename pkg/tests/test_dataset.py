import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from splatedit.dataset import CameraOrbit, collect_triplets, load_dataset
from splatedit.images import load_png
from splatedit.oracles import UnknownInstructionError
from splatedit.synth import blob_scene

ORBIT = CameraOrbit(width=32, height=32)


def tiny_scenes(count=2, n=80):
    return {f"scene{i}": blob_scene(n, seed=i) for i in range(count)}


def tree_digest(root: Path) -> dict:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestCollect:
    def test_counts(self, tmp_path):
        man = collect_triplets(tiny_scenes(), ["make it gold", "desaturate it"],
                               per_pair=3, seed=0, out_dir=tmp_path, orbit=ORBIT)
        assert man["total"] == 12
        assert len(man["pairs"]) == 4
        assert all(p["count"] == 3 for p in man["pairs"])

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            collect_triplets(tiny_scenes(), ["make it gold"], per_pair=2,
                             seed=5, out_dir=d, orbit=ORBIT)
        assert tree_digest(a) == tree_digest(b)

    def test_filter_hook_halves(self, tmp_path):
        man = collect_triplets(tiny_scenes(1), ["make it gold"], per_pair=8,
                               seed=1, out_dir=tmp_path, orbit=ORBIT,
                               filter_hook=lambda i, img: i % 2 == 0)
        assert man["total"] == 4

    def test_uncovered_instruction_fails_fast(self, tmp_path):
        with pytest.raises(UnknownInstructionError):
            collect_triplets(tiny_scenes(1), ["paint a mustache"], per_pair=1,
                             seed=0, out_dir=tmp_path, orbit=ORBIT)

    def test_png_matches_raw_target(self, tmp_path):
        collect_triplets(tiny_scenes(1), ["make it gold"], per_pair=1,
                         seed=2, out_dir=tmp_path, orbit=ORBIT)
        _, _, triplets = load_dataset(tmp_path)
        raw = triplets[0].load_target()
        png = load_png(triplets[0].target_path.with_suffix(".png"))
        assert raw.shape == png.shape == (32, 32, 3)
        assert np.abs(raw - png).max() <= 0.5 / 255 + 1e-6


class TestLoad:
    def test_round_trip_fields(self, tmp_path):
        collect_triplets(tiny_scenes(), ["make it gold", "lift the top"],
                         per_pair=2, seed=3, out_dir=tmp_path, orbit=ORBIT)
        manifest, scenes, triplets = load_dataset(tmp_path)
        assert set(scenes) == {"scene0", "scene1"}
        assert len(triplets) == manifest["total"] == 8
        trip = triplets[0]
        assert trip.instruction in {"make it gold", "lift the top"}
        assert trip.camera.width == 32
        assert trip.flow_mode == "deterministic"
        target = trip.load_target()
        assert (target >= 0).all() and (target <= 1).all()

    def test_eps_seeds_distinct(self, tmp_path):
        collect_triplets(tiny_scenes(1), ["make it gold"], per_pair=6,
                         seed=4, out_dir=tmp_path, orbit=ORBIT)
        _, _, triplets = load_dataset(tmp_path)
        seeds = [t.eps_seed for t in triplets]
        assert len(set(seeds)) == len(seeds)

    def test_manifest_records_oracles(self, tmp_path):
        collect_triplets(tiny_scenes(1), ["lift the top"], per_pair=1,
                         seed=5, out_dir=tmp_path, orbit=ORBIT)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["pairs"][0]["oracle"] == "lift"

    def test_missing_manifest_rejected(self, tmp_path):
        from splatedit.dataset import DatasetError
        with pytest.raises(DatasetError):
            load_dataset(tmp_path)
