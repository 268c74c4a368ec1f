"""Pinhole-camera geometry: back-projection of depth maps to 3D point clouds
and re-projection of point sets to binary image masks.

Conventions
-----------
Image coordinates are (row, col) with row growing downward.  Camera-frame
coordinates are (x right, y down, z away from camera), all in the same
relative units as the depth map.  Extrinsics are the identity: the camera
frame is the world frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRegionError, DimensionError, RejectedInputError


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics: focal lengths and optical center, in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got ({self.fx}, {self.fy})")

    @classmethod
    def default_for(cls, width: int, height: int) -> "Intrinsics":
        # fx = fy = W gives roughly a 53 degree horizontal field of view,
        # a reasonable prior for in-the-wild photos.
        return cls(fx=float(width), fy=float(width), cx=width / 2.0, cy=height / 2.0)


@dataclass(frozen=True)
class DepthMap:
    """H x W grid of non-negative relative depth values; 0 marks invalid pixels."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DimensionError(f"depth map must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("depth values must be finite and >= 0")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def validity(self) -> np.ndarray:
        """Boolean H x W grid, True where depth is usable (> 0)."""
        return self.values > 0


@dataclass(frozen=True)
class PointCloud:
    """3D points with back-references to their source pixels.

    ``xyz`` is (N, 3); ``pixels`` is (N, 2) holding (row, col) per point,
    in the same order.
    """

    xyz: np.ndarray
    pixels: np.ndarray
    intrinsics: Intrinsics
    image_size: tuple[int, int]  # (H, W)

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        pix = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
        if len(xyz) != len(pix):
            raise DimensionError("xyz and pixels must have the same length")
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "pixels", pix)

    def __len__(self) -> int:
        return len(self.xyz)


def project_depth(depth: DepthMap, k: Intrinsics) -> PointCloud:
    """Back-project every valid pixel of a depth map into the camera frame.

    A pixel (a, b) with depth d maps to ((b - cx) d / fx, (a - cy) d / fy, d).
    Zero-depth pixels are skipped; points come out in row-major pixel order.
    """
    rows, cols = np.nonzero(depth.validity)
    d = depth.values[rows, cols]
    x = (cols - k.cx) * d / k.fx
    y = (rows - k.cy) * d / k.fy
    xyz = np.stack([x, y, d], axis=1)
    pixels = np.stack([rows, cols], axis=1)
    return PointCloud(xyz=xyz, pixels=pixels, intrinsics=k,
                      image_size=(depth.height, depth.width))


def reproject_points(points: PointCloud | np.ndarray, k: Intrinsics,
                     size: tuple[int, int]) -> np.ndarray:
    """Project 3D points onto the image plane as a boolean H x W mask.

    Pixel coordinates are rounded to nearest integer (ties to even);
    projections landing out of bounds are dropped silently.  Points with
    z <= 0 are rejected.
    """
    xyz = points.xyz if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64).reshape(-1, 3)
    h, w = size
    mask = np.zeros((h, w), dtype=bool)
    if len(xyz) == 0:
        return mask
    z = xyz[:, 2]
    if np.any(z <= 0):
        raise RejectedInputError("cannot reproject points with z <= 0")
    cols = np.rint(xyz[:, 0] * k.fx / z + k.cx).astype(np.int64)
    rows = np.rint(xyz[:, 1] * k.fy / z + k.cy).astype(np.int64)
    inb = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
    mask[rows[inb], cols[inb]] = True
    return mask


def _clip_box(box: tuple[int, int, int, int], width: int, height: int) -> tuple[int, int, int, int]:
    """Clip a half-open (x_min, y_min, x_max, y_max) pixel box to the image."""
    x0, y0, x1, y1 = box
    x0 = max(int(x0), 0)
    y0 = max(int(y0), 0)
    x1 = min(int(x1), width)
    y1 = min(int(y1), height)
    return x0, y0, x1, y1


def face_depth(depth: DepthMap, head_box: tuple[int, int, int, int]) -> float:
    """Mean valid depth inside a half-open (x_min, y_min, x_max, y_max) box."""
    x0, y0, x1, y1 = _clip_box(head_box, depth.width, depth.height)
    if x1 <= x0 or y1 <= y0:
        raise DegenerateRegionError(f"head box {head_box} does not intersect the image")
    patch = depth.values[y0:y1, x0:x1]
    valid = patch > 0
    if not valid.any():
        raise DegenerateRegionError(f"no valid-depth pixels inside box {head_box}")
    return float(patch[valid].mean())


def target_depth(depth: DepthMap, gaze_pixel: tuple[int, int], radius: int = 2) -> float:
    """Mean valid depth in a (2r+1)-square window centered on the gaze pixel.

    The default 5x5 window keeps the estimate robust to depth noise at
    the annotated point.
    """
    gx, gy = gaze_pixel
    box = (gx - radius, gy - radius, gx + radius + 1, gy + radius + 1)
    return face_depth(depth, box)
