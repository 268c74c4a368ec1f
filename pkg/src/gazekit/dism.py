"""Depth-infused saliency (DISM) pseudo-label generation.

A cuboid anchored at the subject's 3D face position and aligned with the
binned gaze direction is carved through the scene point cloud; the captured
points, re-projected to the image plane, form the binary pseudo-label mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .binning import DepthBin, GazeAnnotation, ImageBin, bin_gaze
from .errors import ConfigurationError, DimensionError
from .geometry import (DepthMap, Intrinsics, PointCloud, _clip_box,
                       face_depth, project_depth, reproject_points)


@dataclass(frozen=True)
class OrientedCuboid:
    """Box anchored at ``origin``, extending ``length`` along unit axis ``u``
    with half extents ``half_width`` / ``half_height`` along ``v`` / ``w``."""

    origin: np.ndarray
    axis_u: np.ndarray
    axis_v: np.ndarray
    axis_w: np.ndarray
    length: float
    half_width: float
    half_height: float

    def __post_init__(self):
        for name in ("origin", "axis_u", "axis_v", "axis_w"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        basis = np.stack([self.axis_u, self.axis_v, self.axis_w])
        if not np.allclose(basis @ basis.T, np.eye(3), atol=1e-9):
            raise ValueError("cuboid axes must be orthonormal")
        if self.length <= 0 or self.half_width <= 0 or self.half_height <= 0:
            raise ValueError("cuboid extents must be positive")

    def contains(self, point: np.ndarray) -> bool:
        """Half-space containment test for a single 3D point."""
        rel = np.asarray(point, dtype=np.float64) - self.origin
        tu = float(rel @ self.axis_u)
        tv = float(rel @ self.axis_v)
        tw = float(rel @ self.axis_w)
        return (0.0 <= tu <= self.length
                and abs(tv) <= self.half_width
                and abs(tw) <= self.half_height)


@dataclass(frozen=True)
class DismParams:
    """Tunable constants of the pseudo-label generator."""

    gamma1: float = 3.0
    gamma2: float = 10.0
    cuboid_length: float | None = None  # None = extend to the cloud's far extent
    cuboid_half_width: float | None = None  # None = aperture_ratio * face depth
    cuboid_half_height: float | None = None
    aperture_ratio: float = 0.15
    head_exclusion: bool = True

    def __post_init__(self):
        if not (self.gamma2 > self.gamma1 > 0):
            raise ConfigurationError(
                f"need gamma2 > gamma1 > 0, got ({self.gamma1}, {self.gamma2})")
        for name in ("cuboid_length", "cuboid_half_width", "cuboid_half_height"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ConfigurationError(f"{name} must be positive, got {val}")
        if self.aperture_ratio <= 0:
            raise ConfigurationError("aperture_ratio must be positive")


def gaze_direction(img_bin: ImageBin, depth_bin: DepthBin) -> np.ndarray:
    """Unit 3D gaze direction from the two bin center angles.

    theta_xy spins in the camera xy plane (x right, y down); positive
    theta_d tilts away from the camera (+z).
    """
    txy = math.radians(img_bin.center_angle)
    td = math.radians(depth_bin.center_angle)
    u = np.array([math.cos(txy) * math.cos(td),
                  math.sin(txy) * math.cos(td),
                  math.sin(td)])
    return u / np.linalg.norm(u)


def _orthonormal_frame(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic (v, w) completing u to a right-handed orthonormal basis."""
    ref = np.array([0.0, 0.0, 1.0])
    if abs(u @ ref) > 1.0 - 1e-9:
        ref = np.array([0.0, 1.0, 0.0])
    v = np.cross(ref, u)
    v /= np.linalg.norm(v)
    w = np.cross(u, v)
    return v, w


def build_cuboid(face_point: np.ndarray, img_bin: ImageBin, depth_bin: DepthBin,
                 params: DismParams, cloud: PointCloud | None = None) -> OrientedCuboid:
    """Construct the gaze frustum cuboid anchored at the subject's 3D face point.

    Cross-section half extents default to ``aperture_ratio * face depth`` so
    the angular aperture stays constant with distance.  Length defaults to
    the cloud's maximal extent along the gaze axis.
    """
    face_point = np.asarray(face_point, dtype=np.float64)
    u = gaze_direction(img_bin, depth_bin)
    v, w = _orthonormal_frame(u)
    half_w = params.cuboid_half_width
    half_h = params.cuboid_half_height
    aperture = params.aperture_ratio * float(face_point[2])
    if half_w is None:
        half_w = aperture
    if half_h is None:
        half_h = aperture
    length = params.cuboid_length
    if length is None:
        if cloud is not None and len(cloud) > 0:
            length = float(np.max((cloud.xyz - face_point) @ u))
        else:
            length = 0.0
        # keep the cuboid well-formed even when nothing lies ahead
        length = max(length, 1e-9)
    return OrientedCuboid(origin=face_point, axis_u=u, axis_v=v, axis_w=w,
                          length=length, half_width=half_w, half_height=half_h)


def filter_points(cloud: PointCloud, cuboid: OrientedCuboid) -> PointCloud:
    """Subset of the cloud inside the cuboid, source pixels preserved."""
    rel = cloud.xyz - cuboid.origin
    tu = rel @ cuboid.axis_u
    tv = rel @ cuboid.axis_v
    tw = rel @ cuboid.axis_w
    keep = ((tu >= 0.0) & (tu <= cuboid.length)
            & (np.abs(tv) <= cuboid.half_width)
            & (np.abs(tw) <= cuboid.half_height))
    return PointCloud(xyz=cloud.xyz[keep], pixels=cloud.pixels[keep],
                      intrinsics=cloud.intrinsics, image_size=cloud.image_size)


@dataclass(frozen=True)
class DismResult:
    """Pseudo-label mask plus a flag for degenerate (all-false) outputs."""

    mask: np.ndarray
    empty: bool
    image_bin: ImageBin | None = None
    depth_bin: DepthBin | None = None


def generate_dism(depth: DepthMap, head_box: tuple[int, int, int, int],
                  annotation: GazeAnnotation, k: Intrinsics,
                  params: DismParams = DismParams()) -> DismResult:
    """Generate the DISM pseudo-label mask for one annotated subject.

    Pipeline: bin the gaze, back-project the depth map, carve the oriented
    cuboid from the face's 3D anchor, re-project the captured points.  When
    ``head_exclusion`` is set, bits inside the head box are cleared.
    """
    h, w = depth.height, depth.width
    if not depth.validity.any():
        return DismResult(mask=np.zeros((h, w), dtype=bool), empty=True)

    img_bin, depth_bin = bin_gaze(annotation, depth, head_box, k,
                                  params.gamma1, params.gamma2)
    d_f = face_depth(depth, head_box)
    x0, y0, x1, y1 = head_box
    center_col = (x0 + x1) / 2.0
    center_row = (y0 + y1) / 2.0
    face_point = np.array([(center_col - k.cx) * d_f / k.fx,
                           (center_row - k.cy) * d_f / k.fy,
                           d_f])

    cloud = project_depth(depth, k)
    cuboid = build_cuboid(face_point, img_bin, depth_bin, params, cloud)
    captured = filter_points(cloud, cuboid)

    mask = reproject_points(captured, k, (h, w))

    if params.head_exclusion:
        bx0, by0, bx1, by1 = _clip_box(head_box, w, h)
        mask[by0:by1, bx0:bx1] = False

    return DismResult(mask=mask, empty=not mask.any(),
                      image_bin=img_bin, depth_bin=depth_bin)


def jaccard_distance(s: np.ndarray, s_hat: np.ndarray, eps: float = 1e-6) -> float:
    """Jaccard distance 1 - (intersection + eps) / (union + eps).

    Accepts boolean masks or soft masks with values in [0, 1].  Intersection
    and union are the sums of elementwise min and max, which coincide with
    the product forms s*s_hat and s + s_hat - s*s_hat on {0,1} masks while
    keeping the identity-means-zero property for soft inputs.  The eps floor
    makes two empty masks identical (distance 0).
    """
    s = np.asarray(s, dtype=np.float64)
    s_hat = np.asarray(s_hat, dtype=np.float64)
    if s.shape != s_hat.shape:
        raise DimensionError(f"mask shapes differ: {s.shape} vs {s_hat.shape}")
    if eps <= 0:
        raise ConfigurationError("eps must be positive")
    inter = np.minimum(s, s_hat).sum()
    union = np.maximum(s, s_hat).sum()
    return float(1.0 - (inter + eps) / (union + eps))
