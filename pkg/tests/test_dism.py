import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gazekit import (DepthBin, DepthMap, DismParams, GazeAnnotation, ImageBin,
                     Intrinsics, OrientedCuboid, PointCloud, build_cuboid,
                     filter_points, gaze_direction, generate_dism,
                     jaccard_distance, project_depth)
from gazekit.errors import DimensionError
from conftest import flat_scene, gaze_toward, scene_annotation


def containment_oracle(point, cuboid):
    """Direct half-space check, written independently of filter_points."""
    rel = np.asarray(point, float) - cuboid.origin
    return (0 <= rel @ cuboid.axis_u <= cuboid.length
            and abs(rel @ cuboid.axis_v) <= cuboid.half_width
            and abs(rel @ cuboid.axis_w) <= cuboid.half_height)


class TestGazeDirection:
    def test_same_plane_lower_right(self):
        u = gaze_direction(ImageBin.LOWER_RIGHT, DepthBin.SAME_PLANE)
        np.testing.assert_allclose(u, [math.cos(math.radians(30)), 0.5, 0], atol=1e-12)

    def test_forward_kills_xy(self):
        for b in ImageBin:
            np.testing.assert_allclose(gaze_direction(b, DepthBin.FORWARD),
                                       [0, 0, 1], atol=1e-12)

    def test_intermediate_backward_straight(self):
        u = gaze_direction(ImageBin.STRAIGHT, DepthBin.INTERMEDIATE_BACKWARD)
        s = math.sin(math.radians(45))
        np.testing.assert_allclose(u, [0, s, -s], atol=1e-12)


class TestBuildCuboid:
    def test_axes_orthonormal(self):
        params = DismParams()
        for ib in ImageBin:
            for db in DepthBin:
                c = build_cuboid(np.array([0.5, -0.2, 4.0]), ib, db,
                                 DismParams(cuboid_length=5.0))
                basis = np.stack([c.axis_u, c.axis_v, c.axis_w])
                np.testing.assert_allclose(basis @ basis.T, np.eye(3), atol=1e-9)

    def test_default_half_extents_scale_with_face_depth(self):
        c = build_cuboid(np.array([0, 0, 10.0]), ImageBin.STRAIGHT,
                         DepthBin.SAME_PLANE, DismParams(cuboid_length=1.0))
        assert c.half_width == pytest.approx(1.5)
        assert c.half_height == pytest.approx(1.5)

    def test_default_length_reaches_cloud_extent(self):
        depth = DepthMap(np.full((16, 16), 8.0))
        k = Intrinsics.default_for(16, 16)
        cloud = project_depth(depth, k)
        face = np.array([0.0, 0.0, 8.0])
        c = build_cuboid(face, ImageBin.LOWER_RIGHT, DepthBin.SAME_PLANE,
                         DismParams(), cloud)
        assert c.length == pytest.approx(np.max((cloud.xyz - face) @ c.axis_u))


class TestFilterPoints:
    def _cloud(self, xyz):
        xyz = np.asarray(xyz, float)
        pixels = np.stack([np.arange(len(xyz)), np.zeros(len(xyz), int)], axis=1)
        return PointCloud(xyz=xyz, pixels=pixels,
                          intrinsics=Intrinsics.default_for(8, 8), image_size=(8, 8))

    def test_whole_cloud_captured(self):
        depth = DepthMap(np.full((8, 8), 3.0))
        k = Intrinsics.default_for(8, 8)
        cloud = project_depth(depth, k)
        cuboid = OrientedCuboid(origin=[-100, 0, 3], axis_u=[1, 0, 0],
                                axis_v=[0, 1, 0], axis_w=[0, 0, 1],
                                length=1000, half_width=1000, half_height=1000)
        sub = filter_points(cloud, cuboid)
        assert len(sub) == len(cloud)
        np.testing.assert_array_equal(sub.pixels, cloud.pixels)

    def test_nothing_behind_origin(self):
        depth = DepthMap(np.full((8, 8), 3.0))
        k = Intrinsics.default_for(8, 8)
        cloud = project_depth(depth, k)
        cuboid = OrientedCuboid(origin=[0, 0, 3], axis_u=[0, 0, 1],
                                axis_v=[1, 0, 0], axis_w=[0, 1, 0],
                                length=10, half_width=10, half_height=10)
        behind = OrientedCuboid(origin=[0, 0, 100], axis_u=[0, 0, 1],
                                axis_v=[1, 0, 0], axis_w=[0, 1, 0],
                                length=10, half_width=10, half_height=10)
        assert len(filter_points(cloud, behind)) == 0
        assert len(filter_points(cloud, cuboid)) == len(cloud)

    def test_axis_aligned_membership(self):
        cloud = self._cloud([[5, 0.5, -0.5], [5, 1.5, 0]])
        cuboid = OrientedCuboid(origin=[0, 0, 0], axis_u=[1, 0, 0],
                                axis_v=[0, 1, 0], axis_w=[0, 0, 1],
                                length=10, half_width=1, half_height=1)
        sub = filter_points(cloud, cuboid)
        assert len(sub) == 1
        np.testing.assert_array_equal(sub.xyz[0], [5, 0.5, -0.5])

    def test_matches_containment_oracle(self):
        rng = np.random.default_rng(7)
        cloud = self._cloud(rng.normal(0, 3, (200, 3)))
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        v = np.cross([0, 0, 1.0], u)
        v /= np.linalg.norm(v)
        w = np.cross(u, v)
        cuboid = OrientedCuboid(origin=rng.normal(size=3), axis_u=u, axis_v=v,
                                axis_w=w, length=4.0, half_width=1.5, half_height=0.8)
        sub = filter_points(cloud, cuboid)
        expected = {i for i, p in enumerate(cloud.xyz) if containment_oracle(p, cuboid)}
        assert set(sub.pixels[:, 0]) == expected

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(11)
        xyz = rng.normal(0, 2, (150, 3))
        cloud = self._cloud(xyz)
        cuboid = OrientedCuboid(origin=[0.3, -0.1, 0.5], axis_u=[1, 0, 0],
                                axis_v=[0, 1, 0], axis_w=[0, 0, 1],
                                length=3, half_width=1, half_height=1)
        before = set(filter_points(cloud, cuboid).pixels[:, 0])
        for seed in range(5):
            srng = np.random.default_rng(seed)
            q, _ = np.linalg.qr(srng.normal(size=(3, 3)))
            t = srng.normal(size=3)
            moved_cloud = self._cloud(xyz @ q.T + t)
            moved = OrientedCuboid(origin=q @ np.asarray(cuboid.origin) + t,
                                   axis_u=q @ cuboid.axis_u, axis_v=q @ cuboid.axis_v,
                                   axis_w=q @ cuboid.axis_w, length=cuboid.length,
                                   half_width=cuboid.half_width,
                                   half_height=cuboid.half_height)
            after = set(filter_points(moved_cloud, moved).pixels[:, 0])
            assert after == before


class TestGenerateDism:
    def test_horizontal_band_contains_gaze_pixel(self):
        depth, head_box = flat_scene()
        k = Intrinsics.default_for(64, 64)
        gaze = gaze_toward((32, 32), ImageBin.LOWER_RIGHT, 20)
        result = generate_dism(depth, head_box, scene_annotation((32, 32), gaze), k)
        assert not result.empty
        assert result.mask[gaze[1], gaze[0]]
        # band extends right of the face, nothing far left of it
        assert not result.mask[:, :20].any()

    def test_mask_subset_of_validity(self):
        rng = np.random.default_rng(3)
        values = np.full((64, 64), 10.0)
        values[rng.random((64, 64)) < 0.2] = 0.0
        values[29:36, 29:36] = 10.0
        values[30:35, 48:53] = 10.0
        depth = DepthMap(values)
        k = Intrinsics.default_for(64, 64)
        result = generate_dism(depth, (29, 29, 36, 36),
                               scene_annotation((32, 32), (50, 32)), k)
        assert not (result.mask & ~depth.validity).any()

    def test_all_invalid_depth_warns(self):
        depth = DepthMap(np.zeros((32, 32)))
        k = Intrinsics.default_for(32, 32)
        result = generate_dism(depth, (12, 12, 20, 20),
                               scene_annotation((16, 16), (28, 16)), k)
        assert result.empty
        assert not result.mask.any()

    def test_head_exclusion(self):
        depth, head_box = flat_scene()
        k = Intrinsics.default_for(64, 64)
        ann = scene_annotation((32, 32), gaze_toward((32, 32), ImageBin.LOWER_RIGHT, 20))
        with_excl = generate_dism(depth, head_box, ann, k, DismParams())
        without = generate_dism(depth, head_box, ann, k,
                                DismParams(head_exclusion=False))
        x0, y0, x1, y1 = head_box
        assert not with_excl.mask[y0:y1, x0:x1].any()
        assert without.mask[y0:y1, x0:x1].any()

    def test_subset_relation_p_c_in_p_d(self):
        depth, head_box = flat_scene()
        k = Intrinsics.default_for(64, 64)
        from gazekit import bin_gaze, face_depth, build_cuboid, filter_points
        ann = scene_annotation((32, 32), (50, 32))
        cloud = project_depth(depth, k)
        cuboid = build_cuboid(np.array([0, 0, 10.0]), ImageBin.LOWER_RIGHT,
                              DepthBin.SAME_PLANE, DismParams(), cloud)
        sub = filter_points(cloud, cuboid)
        all_pixels = {tuple(p) for p in cloud.pixels}
        assert {tuple(p) for p in sub.pixels} <= all_pixels


class TestJaccardDistance:
    def test_identity_is_zero(self):
        rng = np.random.default_rng(5)
        m = rng.random((16, 16))
        assert jaccard_distance(m, m) == pytest.approx(0.0, abs=1e-12)

    def test_disjoint_masks(self):
        s = np.zeros(100)
        s[:60] = 1
        t = np.zeros(100)
        t[60:] = 1
        expected = 1 - 1e-6 / (100 + 1e-6)
        assert jaccard_distance(s, t, eps=1e-6) == pytest.approx(expected, abs=1e-15)

    def test_both_empty_is_zero(self):
        assert jaccard_distance(np.zeros((4, 4)), np.zeros((4, 4))) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            jaccard_distance(np.zeros((2, 2)), np.zeros((3, 3)))

    @given(st.integers(0, 2**32 - 1))
    def test_range_and_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.random((8, 8))
        b = rng.random((8, 8))
        d = jaccard_distance(a, b)
        assert 0 <= d < 1
        assert d == pytest.approx(jaccard_distance(b, a), abs=1e-12)
