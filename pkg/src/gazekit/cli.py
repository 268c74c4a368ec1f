"""Command-line front end binding all modules into runnable pipelines.

Exit codes: 0 success (warnings allowed), 1 evaluation/data incompleteness,
2 usage/config/file errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset_io
from .binning import GazeAnnotation, bin_gaze
from .dism import DismParams, generate_dism
from .errors import (ConfigurationError, DegenerateGazeError,
                     DegenerateRegionError, GazeKitError, WeightFormatError)
from .fusion import HEATMAP_SIZE, WeightBundle, pipeline_predict
from .geometry import DepthMap, Intrinsics, project_depth
from .metrics import evaluate

EXIT_OK = 0
EXIT_INCOMPLETE = 1
EXIT_USAGE = 2

DEPTH_SUFFIXES = (".pgm", ".png", "_depth.pgm", "_depth.png")


@dataclass
class RunConfig:
    """One structured configuration for a run; flags override file values."""

    intrinsics: dict | str = "default"
    gamma1: float = 3.0
    gamma2: float = 10.0
    sigma: float = 3.0
    depth_scale: float = 1.0
    seed: int = 0
    head_exclusion: bool = True
    aperture_ratio: float = 0.15
    cuboid_length: float | None = None
    cuboid_half_width: float | None = None
    cuboid_half_height: float | None = None
    heatmap_size: tuple[int, int] = HEATMAP_SIZE
    jobs: int = 1
    out_dir: Path = field(default_factory=lambda: Path("."))

    @classmethod
    def load(cls, args: argparse.Namespace) -> "RunConfig":
        values: dict = {}
        config_path = getattr(args, "config", None)
        if config_path:
            with open(config_path, "rb") as fh:
                values.update(tomllib.load(fh))
        for key in ("gamma1", "gamma2", "sigma", "depth_scale", "seed", "jobs",
                    "out_dir"):
            flag = getattr(args, key, None)
            if flag is not None:
                values[key] = flag
        cfg = cls()
        for key, val in values.items():
            if key == "heatmap_size":
                val = (int(val[0]), int(val[1]))
            elif key == "out_dir":
                val = Path(val)
            if not hasattr(cfg, key):
                raise ConfigurationError(f"unknown config key {key!r}")
            setattr(cfg, key, val)
        if not (cfg.gamma2 > cfg.gamma1 > 0):
            raise ConfigurationError(
                f"need gamma2 > gamma1 > 0, got ({cfg.gamma1}, {cfg.gamma2})")
        if cfg.sigma <= 0:
            raise ConfigurationError(f"sigma must be positive, got {cfg.sigma}")
        if cfg.jobs < 1:
            raise ConfigurationError("jobs must be >= 1")
        return cfg

    def dism_params(self) -> DismParams:
        return DismParams(gamma1=self.gamma1, gamma2=self.gamma2,
                          cuboid_length=self.cuboid_length,
                          cuboid_half_width=self.cuboid_half_width,
                          cuboid_half_height=self.cuboid_half_height,
                          aperture_ratio=self.aperture_ratio,
                          head_exclusion=self.head_exclusion)

    def intrinsics_for(self, width: int, height: int) -> Intrinsics:
        if self.intrinsics == "default":
            return Intrinsics.default_for(width, height)
        k = self.intrinsics
        return Intrinsics(fx=float(k["fx"]), fy=float(k["fy"]),
                          cx=float(k["cx"]), cy=float(k["cy"]))

    def to_dict(self) -> dict:
        return {
            "intrinsics": self.intrinsics,
            "gamma1": self.gamma1, "gamma2": self.gamma2, "sigma": self.sigma,
            "depth_scale": self.depth_scale, "seed": self.seed,
            "head_exclusion": self.head_exclusion,
            "aperture_ratio": self.aperture_ratio,
            "cuboid_length": self.cuboid_length,
            "cuboid_half_width": self.cuboid_half_width,
            "cuboid_half_height": self.cuboid_half_height,
            "heatmap_size": list(self.heatmap_size),
        }


def _find_depth_file(depth_dir: Path, image_path: str) -> Path | None:
    stem = Path(image_path).stem
    for suffix in DEPTH_SUFFIXES:
        candidate = depth_dir / f"{stem}{suffix}"
        if candidate.exists():
            return candidate
    return None


def _annotation_for(record: dataset_io.AnnotationRecord) -> GazeAnnotation:
    gx, gy = record.gaze_average
    w, h = record.image_size
    extra = tuple((p[0] * (w - 1), p[1] * (h - 1)) for p in record.gaze_points)
    return GazeAnnotation(eye=record.eye, gaze=(gx * (w - 1), gy * (h - 1)),
                          gaze_list=extra)


def _map_jobs(fn, items, jobs: int) -> list:
    """Apply fn over items, optionally threaded; results keep input order."""
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --- commands -----------------------------------------------------------------


def cmd_project(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args)
    depth_path = Path(args.depth)
    if not depth_path.exists():
        print(f"error: depth file not found: {depth_path}", file=sys.stderr)
        return EXIT_USAGE
    depth = dataset_io.load_depth(depth_path, cfg.depth_scale)
    k = cfg.intrinsics_for(depth.width, depth.height)
    cloud = project_depth(depth, k)
    out = Path(args.out) if args.out else cfg.out_dir / f"{depth_path.stem}.xyz"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as fh:
        for x, y, z in cloud.xyz:
            fh.write(f"{x!r} {y!r} {z!r}\n")
    if len(cloud) == 0:
        print(f"warning: no valid depth pixels in {depth_path}", file=sys.stderr)
    return EXIT_OK


def cmd_dism_gen(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args)
    try:
        records = dataset_io.parse_annotations(args.annotations)
    except FileNotFoundError:
        print(f"error: annotations not found: {args.annotations}", file=sys.stderr)
        return EXIT_USAGE
    depth_dir = Path(args.depth_dir)
    out_dir = cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    params = cfg.dism_params()

    def run_one(item):
        index, rec = item
        depth_file = _find_depth_file(depth_dir, rec.image_path)
        if depth_file is None:
            return index, rec, None, "missing depth file"
        try:
            depth = dataset_io.load_depth(depth_file, cfg.depth_scale)
            k = cfg.intrinsics_for(depth.width, depth.height)
            result = generate_dism(depth, rec.head_box, _annotation_for(rec), k, params)
            return index, rec, result, None
        except (DegenerateGazeError, DegenerateRegionError, GazeKitError) as exc:
            return index, rec, None, str(exc)

    results = _map_jobs(run_one, list(enumerate(records)), cfg.jobs)
    n_ok = n_warn = n_err = 0
    warnings = []
    errors = []
    for index, rec, result, err in results:
        if err is not None:
            n_err += 1
            errors.append({"row_index": index, "image": rec.image_path, "error": err})
            continue
        stem = Path(rec.image_path).stem
        dataset_io.save_mask(result.mask, out_dir / f"{stem}_{index}_dism.png")
        if result.empty:
            n_warn += 1
            warnings.append({"row_index": index, "image": rec.image_path,
                             "warning": "empty mask"})
        n_ok += 1
    sidecar = {"params": cfg.to_dict(), "warnings": warnings, "errors": errors,
               "counts": {"ok": n_ok, "warn": n_warn, "err": n_err}}
    (out_dir / "dism_run.json").write_text(json.dumps(sidecar, indent=2))
    print(f"{n_ok} ok, {n_warn} warn, {n_err} err")
    return EXIT_OK


def cmd_bin(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args)
    records = dataset_io.parse_annotations(args.annotations)
    depth_dir = Path(args.depth_dir)

    def run_one(item):
        index, rec = item
        depth_file = _find_depth_file(depth_dir, rec.image_path)
        if depth_file is None:
            return index, rec, None, None, "missing depth file"
        try:
            depth = dataset_io.load_depth(depth_file, cfg.depth_scale)
            k = cfg.intrinsics_for(depth.width, depth.height)
            img_bin, depth_bin = bin_gaze(_annotation_for(rec), depth, rec.head_box,
                                          k, cfg.gamma1, cfg.gamma2)
            return index, rec, img_bin, depth_bin, None
        except GazeKitError as exc:
            return index, rec, None, None, str(exc)

    results = _map_jobs(run_one, list(enumerate(records)), cfg.jobs)
    out = Path(args.out) if args.out else cfg.out_dir / "bins.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_path", "row_index", "image_bin", "depth_bin"])
        for index, rec, img_bin, depth_bin, err in results:
            if err is not None:
                writer.writerow([rec.image_path, index, "error", "error"])
            else:
                writer.writerow([rec.image_path, index, img_bin.value, depth_bin.value])
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args)
    records = dataset_io.parse_annotations(args.annotations)
    pred_dir = Path(args.predictions)
    missing = []
    pairs = []
    for index, rec in enumerate(records):
        stem = Path(rec.image_path).stem
        pred_file = pred_dir / f"{stem}_{index}_pred.png"
        if not pred_file.exists():
            missing.append(str(pred_file))
            continue
        pairs.append((dataset_io.load_heatmap(pred_file), rec))
    if missing:
        for m in missing:
            print(f"error: missing prediction: {m}", file=sys.stderr)
        return EXIT_INCOMPLETE
    report = evaluate(pairs, sigma=cfg.sigma)
    payload = json.dumps(report.to_dict(), indent=2)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(payload)
    else:
        print(payload)
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args)
    records = dataset_io.parse_annotations(args.annotations)
    depth_dir = Path(args.depth_dir)
    out_dir = cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    bundle = None
    if args.weights != "baseline":
        try:
            bundle = WeightBundle.load(args.weights)
        except FileNotFoundError:
            print(f"error: weights file not found: {args.weights}", file=sys.stderr)
            return EXIT_USAGE
        except WeightFormatError as exc:
            print(f"error: bad weight bundle: {exc}", file=sys.stderr)
            return EXIT_USAGE
    params = cfg.dism_params()
    image_dir = Path(args.image_dir) if args.image_dir else Path(args.annotations).parent

    def run_one(item):
        index, rec = item
        depth_file = _find_depth_file(depth_dir, rec.image_path)
        if depth_file is None:
            return index, rec, None, "missing depth file"
        try:
            depth = dataset_io.load_depth(depth_file, cfg.depth_scale)
            k = cfg.intrinsics_for(depth.width, depth.height)
            image_file = image_dir / rec.image_path
            image = None
            if image_file.exists():
                image = dataset_io.load_image_gray(image_file, (depth.height, depth.width))
            pred = pipeline_predict(image, depth, rec.head_box, _annotation_for(rec),
                                    bundle, k=k, params=params, sigma=cfg.sigma,
                                    heatmap_size=cfg.heatmap_size)
            return index, rec, pred, None
        except GazeKitError as exc:
            return index, rec, None, str(exc)

    results = _map_jobs(run_one, list(enumerate(records)), cfg.jobs)
    points_path = out_dir / "points.csv"
    n_err = 0
    with points_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_path", "row_index", "pred_x_norm", "pred_y_norm", "status"])
        for index, rec, pred, err in results:
            if err is not None:
                n_err += 1
                writer.writerow([rec.image_path, index, "", "", f"error: {err}"])
                continue
            stem = Path(rec.image_path).stem
            dataset_io.save_heatmap(pred.heatmap, out_dir / f"{stem}_{index}_pred.png")
            status = "fallback_center" if pred.fallback_center else "ok"
            writer.writerow([rec.image_path, index,
                             f"{pred.point[0]:.6f}", f"{pred.point[1]:.6f}", status])
    print(f"{len(results) - n_err} ok, {n_err} err")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gazekit",
                                     description="Gaze target detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--out-dir", dest="out_dir", help="output directory")
        p.add_argument("--jobs", type=int, help="worker count (default 1)")
        p.add_argument("--seed", type=int, help="RNG seed recorded with the run")
        p.add_argument("--depth-scale", dest="depth_scale", type=float,
                       help="multiplier from stored 16-bit values to depth units")
        p.add_argument("--sigma", type=float, help="ground-truth Gaussian sigma, pixels")
        p.add_argument("--gamma1", type=float, help="inner depth-binning threshold")
        p.add_argument("--gamma2", type=float, help="outer depth-binning threshold")

    p = sub.add_parser("project", help="back-project a depth map to an XYZ point cloud")
    p.add_argument("--depth", required=True, help="depth image (16-bit PGM/PNG)")
    p.add_argument("--out", help="output XYZ path")
    add_common(p)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("dism-gen", help="generate DISM pseudo-label masks")
    p.add_argument("--annotations", required=True, help="annotation CSV")
    p.add_argument("--depth-dir", dest="depth_dir", required=True,
                   help="directory of per-image depth files")
    add_common(p)
    p.set_defaults(func=cmd_dism_gen)

    p = sub.add_parser("bin", help="discretize gaze directions per record")
    p.add_argument("--annotations", required=True)
    p.add_argument("--depth-dir", dest="depth_dir", required=True)
    p.add_argument("--out", help="output CSV path")
    add_common(p)
    p.set_defaults(func=cmd_bin)

    p = sub.add_parser("eval", help="score prediction heatmaps against annotations")
    p.add_argument("--annotations", required=True)
    p.add_argument("--predictions", required=True, help="directory of *_pred.png heatmaps")
    p.add_argument("--out", help="JSON report path (default: stdout)")
    add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="run end-to-end prediction per record")
    p.add_argument("--annotations", required=True)
    p.add_argument("--depth-dir", dest="depth_dir", required=True)
    p.add_argument("--weights", default="baseline",
                   help='MMFW weight bundle path, or "baseline" for the DISM centroid')
    p.add_argument("--image-dir", dest="image_dir", help="directory of scene images")
    add_common(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GazeKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
