"""Shared synthetic-scene builders for the test suite."""

import math
from pathlib import Path

import numpy as np
import pytest

from gazekit import (AnnotationRecord, DepthMap, GazeAnnotation, ImageBin,
                     Intrinsics, save_depth)


def flat_scene(size=64, depth_value=10.0, face_pixel=(32, 32), half_box=3):
    """Constant-depth scene with a head box centered on ``face_pixel`` (row, col)."""
    depth = DepthMap(np.full((size, size), depth_value))
    fr, fc = face_pixel
    head_box = (fc - half_box, fr - half_box, fc + half_box + 1, fr + half_box + 1)
    return depth, head_box


def gaze_toward(face_pixel, img_bin: ImageBin, distance: float):
    """Gaze pixel at ``distance`` from the face along a bin's exact center angle."""
    fr, fc = face_pixel
    a = math.radians(img_bin.center_angle)
    return (int(round(fc + distance * math.cos(a))),
            int(round(fr + distance * math.sin(a))))


def scene_annotation(face_pixel, gaze_pixel):
    fr, fc = face_pixel
    return GazeAnnotation(eye=(fc, fr), gaze=gaze_pixel)


def make_record(image_path="img.png", size=64, head_box=(29, 29, 36, 36),
                eye=(32.0, 32.0), gaze_points=((0.75, 0.5),)):
    return AnnotationRecord(image_path=image_path, image_size=(size, size),
                            head_box=head_box, eye=eye,
                            gaze_points=tuple(gaze_points), in_frame=True)


@pytest.fixture
def tiny_dataset(tmp_path):
    """Three flat-scene records with depth files and an annotation CSV on disk."""
    size = 64
    depth_dir = tmp_path / "depth"
    depth_dir.mkdir()
    rows = []
    for i in range(3):
        name = f"img{i}"
        depth, _ = flat_scene(size=size, depth_value=10.0 + i)
        save_depth(depth, depth_dir / f"{name}.pgm")
        # eye in the box center, gaze to the lower right
        rows.append(f"{name}.png,{size},{size},29,29,36,36,32,32,0.75,0.55,1")
    csv_path = tmp_path / "annotations.csv"
    header = ("image_path,img_w,img_h,box_x_min,box_y_min,box_x_max,box_y_max,"
              "eye_x,eye_y,gaze_x_norm,gaze_y_norm,in_frame")
    csv_path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return {"root": tmp_path, "annotations": csv_path, "depth_dir": depth_dir,
            "size": size, "n": 3}
