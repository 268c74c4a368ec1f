"""Annotation parsing and image/depth/mask/heatmap file I/O.

On-disk contracts
-----------------
Annotations: UTF-8 CSV with header
``image_path,img_w,img_h,box_x_min,box_y_min,box_x_max,box_y_max,eye_x,eye_y,gaze_x_norm,gaze_y_norm,in_frame``
(pixel fields integer, gaze fields normalized decimals, in_frame 0/1).
Rows sharing (image_path, head box) merge into one record with up to 10
gaze points.

Depth maps: 16-bit binary PGM (P5) or 16-bit grayscale PNG; stored value 0
means invalid, other values multiply by ``depth_scale``.  Masks: 8-bit
PGM/PNG with {0, 255}.  Heatmaps: 16-bit grayscale, peak-normalized, with
the original peak recorded in a JSON sidecar ``<file>.json``.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (AnnotationParseError, FileFormatError, MergeConflictError)
from .geometry import DepthMap

CSV_HEADER = ["image_path", "img_w", "img_h", "box_x_min", "box_y_min",
              "box_x_max", "box_y_max", "eye_x", "eye_y",
              "gaze_x_norm", "gaze_y_norm", "in_frame"]

MAX_GAZE_POINTS = 10


@dataclass(frozen=True)
class AnnotationRecord:
    """One evaluation unit: an image, a head box, an eye point, and gaze points."""

    image_path: str
    image_size: tuple[int, int]  # (W, H)
    head_box: tuple[int, int, int, int]  # (x_min, y_min, x_max, y_max), pixels
    eye: tuple[float, float]  # pixels
    gaze_points: tuple[tuple[float, float], ...]  # normalized [0,1]^2
    in_frame: bool = True

    @property
    def eye_normalized(self) -> tuple[float, float]:
        w, h = self.image_size
        return (self.eye[0] / w, self.eye[1] / h)

    @property
    def gaze_average(self) -> tuple[float, float]:
        xs = [p[0] for p in self.gaze_points]
        ys = [p[1] for p in self.gaze_points]
        return (sum(xs) / len(xs), sum(ys) / len(ys))

    def gaze_pixel(self, index: int = 0) -> tuple[float, float]:
        """A gaze point in pixel coordinates of the source image."""
        gx, gy = self.gaze_points[index]
        w, h = self.image_size
        return (gx * (w - 1), gy * (h - 1))


@dataclass
class DatasetManifest:
    """A parsed annotation file rooted at a directory."""

    root: Path
    records: list[AnnotationRecord]
    split: str = "test"


def _parse_row(row: dict, lineno: int) -> AnnotationRecord:
    try:
        w = int(row["img_w"])
        h = int(row["img_h"])
        box = tuple(int(row[k]) for k in
                    ("box_x_min", "box_y_min", "box_x_max", "box_y_max"))
        eye = (float(row["eye_x"]), float(row["eye_y"]))
        gaze = (float(row["gaze_x_norm"]), float(row["gaze_y_norm"]))
        in_frame = row["in_frame"].strip()
    except (KeyError, ValueError, TypeError, AttributeError) as exc:
        raise AnnotationParseError(lineno, f"malformed field: {exc}") from exc
    if in_frame not in ("0", "1"):
        raise AnnotationParseError(lineno, f"in_frame must be 0 or 1, got {in_frame!r}")
    if w <= 0 or h <= 0:
        raise AnnotationParseError(lineno, f"non-positive image size {w}x{h}")
    x0, y0, x1, y1 = box
    if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
        raise AnnotationParseError(lineno, f"head box {box} degenerate or outside {w}x{h}")
    if not (0 <= eye[0] < w and 0 <= eye[1] < h):
        raise AnnotationParseError(lineno, f"eye {eye} outside the image")
    if in_frame == "1" and not (0 <= gaze[0] <= 1 and 0 <= gaze[1] <= 1):
        raise AnnotationParseError(lineno, f"gaze {gaze} outside [0,1]^2")
    return AnnotationRecord(image_path=row["image_path"], image_size=(w, h),
                            head_box=box, eye=eye, gaze_points=(gaze,),
                            in_frame=in_frame == "1")


def parse_annotations(file: str | Path) -> list[AnnotationRecord]:
    """Parse an annotation CSV into records, merging multi-annotator rows.

    Rows sharing (image_path, head_box) collapse into one record whose
    ``gaze_points`` holds every annotated point, in file order.  Such rows
    must agree on image size, eye point, and in_frame, else the merge fails.
    """
    path = Path(file)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != CSV_HEADER:
            raise AnnotationParseError(1, f"expected header {','.join(CSV_HEADER)}")
        merged: dict[tuple, AnnotationRecord] = {}
        order: list[tuple] = []
        for lineno, row in enumerate(reader, start=2):
            rec = _parse_row(row, lineno)
            key = (rec.image_path, rec.head_box)
            if key not in merged:
                merged[key] = rec
                order.append(key)
                continue
            prev = merged[key]
            if (prev.image_size != rec.image_size or prev.eye != rec.eye
                    or prev.in_frame != rec.in_frame):
                raise MergeConflictError(
                    f"row {lineno}: conflicting duplicate of ({rec.image_path}, {rec.head_box})")
            if len(prev.gaze_points) >= MAX_GAZE_POINTS:
                raise AnnotationParseError(
                    lineno, f"more than {MAX_GAZE_POINTS} gaze points for one record")
            merged[key] = AnnotationRecord(
                image_path=prev.image_path, image_size=prev.image_size,
                head_box=prev.head_box, eye=prev.eye,
                gaze_points=prev.gaze_points + rec.gaze_points,
                in_frame=prev.in_frame)
        return [merged[k] for k in order]


# --- PGM (P5) ---------------------------------------------------------------

def _read_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    # header: magic, width, height, maxval, separated by whitespace/comments
    pos = 0
    fields = []
    while len(fields) < 4:
        m = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)").match(data, pos)
        if m is None:
            raise FileFormatError(f"{path}: truncated PGM header")
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P5":
        raise FileFormatError(f"{path}: not a binary PGM (P5) file")
    try:
        w, h, maxval = (int(f) for f in fields[1:])
    except ValueError as exc:
        raise FileFormatError(f"{path}: bad PGM header") from exc
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = w * h
    raw = data[pos:pos + n * dtype.itemsize]
    if len(raw) != n * dtype.itemsize:
        raise FileFormatError(f"{path}: truncated PGM payload")
    return np.frombuffer(raw, dtype=dtype).reshape(h, w).astype(
        np.uint16 if maxval > 255 else np.uint8)


def _write_pgm(path: Path, arr: np.ndarray, maxval: int) -> None:
    h, w = arr.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    payload = arr.astype(">u2" if maxval > 255 else "u1").tobytes()
    path.write_bytes(header + payload)


def _read_gray(path: Path) -> np.ndarray:
    """Read a single-channel PGM/PNG as uint8 or uint16."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return _read_pgm(path)
    try:
        img = Image.open(path)
    except Exception as exc:
        raise FileFormatError(f"{path}: cannot read image: {exc}") from exc
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise FileFormatError(f"{path}: expected single-channel image, got shape {arr.shape}")
    if arr.dtype == np.int32:  # Pillow mode "I"
        arr = arr.astype(np.uint16)
    return arr


def _write_gray(path: Path, arr: np.ndarray) -> None:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        _write_pgm(path, arr, 65535 if arr.dtype == np.uint16 else 255)
        return
    if arr.dtype == np.uint16:
        img = Image.fromarray(arr.astype(np.int32)).convert("I;16")
    else:
        img = Image.fromarray(arr)
    img.save(path)


# --- depth / mask / heatmap -------------------------------------------------

def load_depth(file: str | Path, depth_scale: float = 1.0) -> DepthMap:
    """Load a 16-bit depth image; stored 0 stays 0 (invalid)."""
    arr = _read_gray(Path(file))
    return DepthMap(arr.astype(np.float64) * depth_scale)


def save_depth(depth: DepthMap, file: str | Path, depth_scale: float = 1.0) -> None:
    """Quantize depth values to 16 bits using the inverse of ``depth_scale``."""
    q = np.rint(depth.values / depth_scale)
    if np.any(q > 65535):
        raise FileFormatError("depth values exceed 16-bit range at this depth_scale")
    _write_gray(Path(file), q.astype(np.uint16))


def load_mask(file: str | Path) -> np.ndarray:
    arr = _read_gray(Path(file))
    return arr > 0


def save_mask(mask: np.ndarray, file: str | Path) -> None:
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    _write_gray(Path(file), arr)


def save_heatmap(heatmap: np.ndarray, file: str | Path) -> None:
    """Store a heatmap as peak-normalized 16-bit grayscale plus a JSON sidecar."""
    hm = np.asarray(heatmap, dtype=np.float64)
    peak = float(hm.max()) if hm.size else 0.0
    if peak > 0:
        q = np.rint(hm / peak * 65535).astype(np.uint16)
    else:
        q = np.zeros(hm.shape, dtype=np.uint16)
    path = Path(file)
    _write_gray(path, q)
    sidecar = {"scale": peak}
    path.with_name(path.name + ".json").write_text(json.dumps(sidecar))


def load_heatmap(file: str | Path) -> np.ndarray:
    path = Path(file)
    arr = _read_gray(path).astype(np.float64)
    sidecar = path.with_name(path.name + ".json")
    scale = 1.0
    if sidecar.exists():
        scale = float(json.loads(sidecar.read_text())["scale"])
    return arr / 65535.0 * scale


def load_image_gray(file: str | Path, size: tuple[int, int] | None = None) -> np.ndarray:
    """Load an image as float grayscale in [0, 1], optionally resized to (H, W)."""
    img = Image.open(file).convert("L")
    if size is not None:
        img = img.resize((size[1], size[0]), Image.BILINEAR)
    return np.asarray(img, dtype=np.float64) / 255.0
