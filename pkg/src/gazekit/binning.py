"""Five-way discretization of gaze direction in the image plane and in depth."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import ConfigurationError, DegenerateGazeError
from .geometry import DepthMap, Intrinsics, face_depth, target_depth


class DepthBin(Enum):
    """Gaze direction relative to the subject's depth plane."""

    FORWARD = "forward"
    INTERMEDIATE_FORWARD = "intermediate_forward"
    SAME_PLANE = "same_plane"
    INTERMEDIATE_BACKWARD = "intermediate_backward"
    BACKWARD = "backward"

    @property
    def center_angle(self) -> float:
        """Elevation of the bin center, degrees; positive points away from camera."""
        return _DEPTH_CENTERS[self]


_DEPTH_CENTERS = {
    DepthBin.FORWARD: 90.0,
    DepthBin.INTERMEDIATE_FORWARD: 45.0,
    DepthBin.SAME_PLANE: 0.0,
    DepthBin.INTERMEDIATE_BACKWARD: -45.0,
    DepthBin.BACKWARD: -90.0,
}


class ImageBin(Enum):
    """Gaze direction in the image plane, by fixed sector center angle."""

    LOWER_RIGHT = "lower_right"
    STRAIGHT = "straight"
    LOWER_LEFT = "lower_left"
    UPPER_LEFT = "upper_left"
    UPPER_RIGHT = "upper_right"

    @property
    def center_angle(self) -> float:
        """Sector center, degrees in [0, 360), image coordinates (y down)."""
        return _IMAGE_CENTERS[self]


_IMAGE_CENTERS = {
    ImageBin.LOWER_RIGHT: 30.0,
    ImageBin.STRAIGHT: 90.0,
    ImageBin.LOWER_LEFT: 150.0,
    ImageBin.UPPER_LEFT: 220.0,
    ImageBin.UPPER_RIGHT: 320.0,
}


@dataclass(frozen=True)
class GazeAnnotation:
    """Eye and gaze-target pixel positions for one subject.

    ``gaze_list`` carries the extra annotator points of test-set records
    (up to 10); ``gaze`` is the primary (or averaged) point.
    """

    eye: tuple[float, float]
    gaze: tuple[float, float]
    gaze_list: tuple[tuple[float, float], ...] = field(default_factory=tuple)


def bin_depth_angle(d_f: float, d_t: float, gamma1: float = 3.0,
                    gamma2: float = 10.0) -> DepthBin:
    """Classify the face-to-target depth difference into one of five bins.

    Boundary equalities attach to the nearer-zero case, so every (d_f, d_t)
    pair lands in exactly one bin:

    * |d_f - d_t| <= gamma1          -> SAME_PLANE
    * gamma1 < d_f - d_t <= gamma2   -> INTERMEDIATE_FORWARD
    * gamma1 < d_t - d_f <= gamma2   -> INTERMEDIATE_BACKWARD
    * d_f - d_t > gamma2             -> FORWARD
    * d_t - d_f > gamma2             -> BACKWARD
    """
    if not (gamma2 > gamma1 > 0):
        raise ConfigurationError(f"need gamma2 > gamma1 > 0, got ({gamma1}, {gamma2})")
    diff = d_f - d_t
    if abs(diff) <= gamma1:
        return DepthBin.SAME_PLANE
    if gamma1 < diff <= gamma2:
        return DepthBin.INTERMEDIATE_FORWARD
    if gamma1 < -diff <= gamma2:
        return DepthBin.INTERMEDIATE_BACKWARD
    if diff > gamma2:
        return DepthBin.FORWARD
    return DepthBin.BACKWARD


def image_plane_angle(eye: tuple[float, float], gaze: tuple[float, float]) -> float:
    """Angle of the eye->gaze vector in image coordinates, degrees in [0, 360).

    Uses the quadrant-correct two-argument arctangent; y grows downward,
    so 90 degrees means "straight down the image".
    """
    dx = gaze[0] - eye[0]
    dy = gaze[1] - eye[1]
    if dx == 0 and dy == 0:
        raise DegenerateGazeError("eye and gaze coincide; direction undefined")
    return math.degrees(math.atan2(dy, dx)) % 360.0


def bin_image_angle(alpha: float) -> ImageBin:
    """Assign an image-plane angle to the sector with the nearest center.

    Distance is circular; ties go to the smaller center angle.
    """
    best = None
    best_key = None
    for b in ImageBin:
        d = abs(alpha - b.center_angle) % 360.0
        d = min(d, 360.0 - d)
        key = (d, b.center_angle)
        if best_key is None or key < best_key:
            best, best_key = b, key
    return best


def bin_gaze(annotation: GazeAnnotation, depth: DepthMap,
             head_box: tuple[int, int, int, int], k: Intrinsics,
             gamma1: float = 3.0, gamma2: float = 10.0) -> tuple[ImageBin, DepthBin]:
    """Full gaze discretization for one annotation: (image bin, depth bin)."""
    d_f = face_depth(depth, head_box)
    gx, gy = int(round(annotation.gaze[0])), int(round(annotation.gaze[1]))
    d_t = target_depth(depth, (gx, gy))
    alpha = image_plane_angle(annotation.eye, annotation.gaze)
    return bin_image_angle(alpha), bin_depth_angle(d_f, d_t, gamma1, gamma2)
