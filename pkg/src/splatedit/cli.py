"""Command-line interface.

Each subcommand is a thin wrapper over one library operation.  Usage
errors exit with code 2 (argparse convention); module errors print a
message and exit 1.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .camera import Camera, orbit_camera
from .dataset import CameraOrbit, collect_triplets, load_dataset
from .gradcheck import grad_check
from .images import save_png
from .metrics import chamfer_fscore, mse_psnr, runtime_linearity
from .ply import load_ply, save_ply
from .predictor import PredictorConfig, VariationPredictor, load_weights, save_weights
from .raster import render, render_graph
from .scene import (
    load_variation,
    overlay,
    save_variation,
    scale_variation,
)
from .store import Store, digest
from .synth import random_scene
from .train import TrainConfig, save_loss_csv, train_din

STORE_ENV = "SPLATEDIT_STORE"


def _read_config(path):
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _camera_from_args(args) -> Camera:
    if getattr(args, "camera", None):
        return Camera.from_json(json.loads(Path(args.camera).read_text()))
    return orbit_camera(args.azimuth, args.elevation, args.radius,
                        width=args.size, height=args.size)


def _add_camera_flags(parser):
    parser.add_argument("--camera", help="camera JSON file; overrides orbit flags")
    parser.add_argument("--azimuth", type=float, default=30.0)
    parser.add_argument("--elevation", type=float, default=20.0)
    parser.add_argument("--radius", type=float, default=4.0)
    parser.add_argument("--size", type=int, default=128)


def cmd_gen_data(args) -> int:
    config = _read_config(args.config)
    scenes = {}
    for path in args.scene or []:
        scenes[Path(path).stem] = load_ply(path)
    for i in range(args.synthetic):
        scenes[f"synth{i}"] = random_scene(args.synthetic_n, seed=args.seed + i)
    if not scenes:
        print("gen-data: no scenes given (use --scene or --synthetic)",
              file=sys.stderr)
        return 2
    orbit = CameraOrbit(**config.get("orbit", {}))
    manifest = collect_triplets(scenes, args.instruction, per_pair=args.per_pair,
                                seed=args.seed, out_dir=args.out, orbit=orbit,
                                flow_mode=args.flow_mode)
    print(json.dumps({"out": str(args.out), "total": manifest["total"]}))
    return 0


def cmd_train(args) -> int:
    config = _read_config(args.config)
    manifest, scenes, triplets = load_dataset(args.dataset)
    predictor = VariationPredictor(PredictorConfig(**config.get("predictor", {})),
                                   init_seed=args.seed)
    train_cfg = TrainConfig(**config.get("train", {}))
    result = train_din(predictor, scenes, triplets, train_cfg,
                       mode=config.get("mode", "iterative"),
                       on_epoch=(lambda e, l: print(f"epoch {e} loss {l:.6f}"))
                       if args.verbose else None)
    save_weights(predictor, args.out)
    if args.loss_csv:
        save_loss_csv(result, args.loss_csv)
    print(json.dumps({"weights": str(args.out),
                      "final_loss": result.losses[-1]}))
    return 0


def cmd_edit(args) -> int:
    scene = load_ply(args.scene)
    predictor = load_weights(args.weights)
    variation = predictor.predict(scene, args.instruction, args.seed, args.mode)
    if args.weight != 1.0:
        variation = scale_variation(variation, args.weight)
    data = save_variation(variation, args.out_variation)
    edited = overlay(scene, variation)
    if args.out_scene:
        save_ply(edited, args.out_scene)
    report = {"variation_id": digest(data)}
    if args.psnr:
        cam = _camera_from_args(args)
        before = render(scene, cam, retain_records=False).image
        after = render(edited, cam, retain_records=False).image
        _, report["psnr_before_after"] = mse_psnr(before, after)
    print(json.dumps(report))
    return 0


def cmd_render(args) -> int:
    scene = load_ply(args.scene)
    cam = _camera_from_args(args)
    image = render(scene, cam, retain_records=False).image
    save_png(image, args.out)
    print(json.dumps({"out": str(args.out),
                      "width": cam.width, "height": cam.height}))
    return 0


def cmd_viz(args) -> int:
    from .viz import (VizConfig, flatten_layer, viz_color, viz_panel,
                      viz_position, viz_rotation, viz_scalar)
    scene = load_ply(args.scene)
    variation = load_variation(args.variation)
    cfg = VizConfig(camera=_camera_from_args(args))
    if args.layer == "panel":
        image = viz_panel(scene, variation, cfg)
    else:
        fns = {"position": lambda: viz_position(scene, variation, cfg),
               "opacity": lambda: viz_scalar(scene, variation, "opacity", cfg),
               "scale": lambda: viz_scalar(scene, variation, "scale", cfg),
               "color": lambda: viz_color(scene, variation, cfg),
               "rotation": lambda: viz_rotation(scene, variation, cfg)}
        image = flatten_layer(fns[args.layer]())
    save_png(image, args.out)
    print(json.dumps({"out": str(args.out), "layer": args.layer}))
    return 0


def cmd_apply(args) -> int:
    scene = load_ply(args.scene)
    variation = load_variation(args.variation)
    if args.weight != 1.0:
        variation = scale_variation(variation, args.weight)
    edited = overlay(scene, variation)
    save_ply(edited, args.out)
    print(json.dumps({"out": str(args.out), "n": edited.n}))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    store_root = args.store or os.environ.get(STORE_ENV)
    if not store_root:
        print(f"serve: no store root (use --store or ${STORE_ENV})",
              file=sys.stderr)
        return 2
    host, _, port = args.bind.partition(":")
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host or "127.0.0.1", int(port or 0)))
    print(json.dumps({"bound": f"{sock.getsockname()[0]}:{sock.getsockname()[1]}",
                      "store": str(store_root)}), flush=True)
    app = create_app(Store(store_root))
    server = uvicorn.Server(uvicorn.Config(app, log_level="warning"))
    server.run(sockets=[sock])
    return 0


def cmd_gradcheck(args) -> int:
    scene = random_scene(args.n, seed=args.seed, scale_range=(0.2, 0.4))
    cam = orbit_camera(25.0, 15.0, 4.0, width=16, height=16)
    weights = np.random.default_rng(args.seed).normal(size=(16, 16, 3))
    worst = {}
    for attr in ("mu", "scale", "opacity", "color", "rot"):
        def loss(x, attr=attr):
            leaves = {name: Tensor(getattr(scene, name).astype(np.float64))
                      for name in ("mu", "scale", "opacity", "color", "rot")}
            leaves[attr] = x
            img, _ = render_graph(leaves["mu"], leaves["scale"],
                                  leaves["opacity"], leaves["color"],
                                  leaves["rot"], cam, terminate=False)
            return (img * Tensor(weights)).sum()

        report = grad_check(loss, getattr(scene, attr).astype(np.float64),
                            step=1e-5, max_coords=args.max_coords,
                            seed=args.seed)
        worst[attr] = report.max_rel_err
    ok = all(v <= args.tol for v in worst.values())
    print(json.dumps({"max_rel_err": worst, "tol": args.tol, "passed": ok}))
    return 0 if ok else 1


def cmd_bench(args) -> int:
    predictor = VariationPredictor(PredictorConfig(), init_seed=args.seed)
    rng_scenes = {n: random_scene(n, seed=args.seed) for n in args.sizes}

    def op(n):
        predictor.predict(rng_scenes[n], "make it gold", seed=args.seed)

    report = runtime_linearity(op, args.sizes, repeats=args.repeats)
    print(json.dumps({"sizes": list(report.sizes),
                      "median_seconds": list(report.medians),
                      "slope": report.slope, "intercept": report.intercept,
                      "r_squared": report.r_squared}))
    return 0


def cmd_metrics(args) -> int:
    from .images import load_png
    out = {}
    if args.image_a and args.image_b:
        mse, psnr = mse_psnr(load_png(args.image_a), load_png(args.image_b))
        out["mse"], out["psnr"] = mse, psnr
    if args.scene_a and args.scene_b:
        a, b = load_ply(args.scene_a), load_ply(args.scene_b)
        chamfer, fscore = chamfer_fscore(a.mu, b.mu, tau=args.tau)
        out["chamfer"], out["fscore"] = chamfer, fscore
    if not out:
        print("metrics: nothing to compare (give --image-a/--image-b "
              "and/or --scene-a/--scene-b)", file=sys.stderr)
        return 2
    print(json.dumps(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splatedit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="collect a triplet dataset")
    p.add_argument("--scene", action="append", help="PLY file (repeatable)")
    p.add_argument("--synthetic", type=int, default=0,
                   help="number of synthetic scenes to add")
    p.add_argument("--synthetic-n", type=int, default=200)
    p.add_argument("--instruction", action="append", required=True)
    p.add_argument("--per-pair", type=int, default=4)
    p.add_argument("--flow-mode", default="deterministic",
                   choices=["deterministic", "degenerate"])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="fit a predictor on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-csv")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("edit", help="predict and store a variation")
    p.add_argument("--scene", required=True)
    p.add_argument("--instruction", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", default="iterative",
                   choices=["iterative", "direct"])
    p.add_argument("--weight", type=float, default=1.0)
    p.add_argument("--out-variation", required=True)
    p.add_argument("--out-scene")
    p.add_argument("--psnr", action="store_true",
                   help="also report before/after PSNR")
    _add_camera_flags(p)
    p.set_defaults(fn=cmd_edit)

    p = sub.add_parser("render", help="render a scene to PNG")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    _add_camera_flags(p)
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("viz", help="visualize a variation")
    p.add_argument("--scene", required=True)
    p.add_argument("--variation", required=True)
    p.add_argument("--layer", default="panel",
                   choices=["panel", "position", "opacity", "scale",
                            "color", "rotation"])
    p.add_argument("--out", required=True)
    _add_camera_flags(p)
    p.set_defaults(fn=cmd_viz)

    p = sub.add_parser("apply", help="overlay a variation onto a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--variation", required=True)
    p.add_argument("--weight", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_apply)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--store", help=f"store root (default: ${STORE_ENV})")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("gradcheck", help="validate rasterizer gradients")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-coords", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("bench", help="measure edit runtime scaling")
    p.add_argument("--sizes", type=int, nargs="+",
                   default=[5000, 10000, 20000])
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("metrics", help="compare images or point sets")
    p.add_argument("--image-a")
    p.add_argument("--image-b")
    p.add_argument("--scene-a")
    p.add_argument("--scene-b")
    p.add_argument("--tau", type=float, default=0.01)
    p.set_defaults(fn=cmd_metrics)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # noqa: BLE001 - single CLI error boundary
        print(f"splatedit {args.command}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
