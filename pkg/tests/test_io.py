import numpy as np
import pytest

from gazekit import (DepthMap, load_depth, load_heatmap, load_mask,
                     parse_annotations, save_depth, save_heatmap, save_mask)
from gazekit.dataset_io import _read_pgm, _write_pgm
from gazekit.errors import (AnnotationParseError, FileFormatError,
                            MergeConflictError)

HEADER = ("image_path,img_w,img_h,box_x_min,box_y_min,box_x_max,box_y_max,"
          "eye_x,eye_y,gaze_x_norm,gaze_y_norm,in_frame")


def write_csv(tmp_path, rows, header=HEADER):
    path = tmp_path / "ann.csv"
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


class TestParseAnnotations:
    def test_single_row(self, tmp_path):
        path = write_csv(tmp_path, ["img1.jpg,640,480,100,50,200,150,150,100,0.5,0.5,1"])
        records = parse_annotations(path)
        assert len(records) == 1
        rec = records[0]
        assert rec.image_path == "img1.jpg"
        assert rec.image_size == (640, 480)
        assert rec.head_box == (100, 50, 200, 150)
        assert rec.eye == (150.0, 100.0)
        assert rec.gaze_points == ((0.5, 0.5),)
        assert rec.in_frame

    def test_ten_annotators_merge(self, tmp_path):
        rows = [f"img1.jpg,640,480,100,50,200,150,150,100,0.{i},0.5,1"
                for i in range(10)]
        records = parse_annotations(write_csv(tmp_path, rows))
        assert len(records) == 1
        assert len(records[0].gaze_points) == 10
        # file order preserved
        assert records[0].gaze_points[3] == (0.3, 0.5)

    def test_eleventh_annotator_rejected(self, tmp_path):
        rows = [f"img1.jpg,640,480,100,50,200,150,150,100,0.0{i},0.5,1"
                for i in range(11)]
        with pytest.raises(AnnotationParseError):
            parse_annotations(write_csv(tmp_path, rows))

    def test_out_of_range_gaze_names_row(self, tmp_path):
        rows = ["img1.jpg,640,480,100,50,200,150,150,100,0.5,0.5,1",
                "img2.jpg,640,480,100,50,200,150,150,100,1.5,0.5,1"]
        with pytest.raises(AnnotationParseError) as exc:
            parse_annotations(write_csv(tmp_path, rows))
        assert exc.value.row == 3

    def test_degenerate_box_rejected(self, tmp_path):
        rows = ["img1.jpg,640,480,200,50,200,150,150,100,0.5,0.5,1"]
        with pytest.raises(AnnotationParseError):
            parse_annotations(write_csv(tmp_path, rows))

    def test_conflicting_duplicate_boxes(self, tmp_path):
        rows = ["img1.jpg,640,480,100,50,200,150,150,100,0.5,0.5,1",
                "img1.jpg,640,480,100,50,200,150,151,100,0.6,0.5,1"]
        with pytest.raises(MergeConflictError):
            parse_annotations(write_csv(tmp_path, rows))

    def test_bad_header(self, tmp_path):
        path = write_csv(tmp_path, ["a,b"], header="foo,bar")
        with pytest.raises(AnnotationParseError):
            parse_annotations(path)

    def test_records_keep_file_order(self, tmp_path):
        rows = [f"img{i}.jpg,640,480,100,50,200,150,150,100,0.5,0.5,1"
                for i in (3, 1, 2)]
        records = parse_annotations(write_csv(tmp_path, rows))
        assert [r.image_path for r in records] == ["img3.jpg", "img1.jpg", "img2.jpg"]

    def test_out_of_frame_gaze_unchecked(self, tmp_path):
        rows = ["img1.jpg,640,480,100,50,200,150,150,100,1.5,0.5,0"]
        records = parse_annotations(write_csv(tmp_path, rows))
        assert not records[0].in_frame


class TestPgm:
    def test_16bit_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.integers(0, 65536, (13, 17), dtype=np.uint16)
        path = tmp_path / "a.pgm"
        _write_pgm(path, arr, 65535)
        np.testing.assert_array_equal(_read_pgm(path), arr)

    def test_comment_in_header(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# a comment\n2 2\n255\n" + bytes([1, 2, 3, 4]))
        np.testing.assert_array_equal(_read_pgm(path), [[1, 2], [3, 4]])

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "p2.pgm"
        path.write_bytes(b"P2\n2 2\n255\n1 2 3 4\n")
        with pytest.raises(FileFormatError):
            _read_pgm(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n4 4\n65535\n" + b"\x00" * 10)
        with pytest.raises(FileFormatError):
            _read_pgm(path)


class TestDepthIO:
    @pytest.mark.parametrize("suffix", [".pgm", ".png"])
    def test_round_trip_one_quantum(self, tmp_path, suffix):
        rng = np.random.default_rng(1)
        depth = DepthMap(rng.uniform(0, 60.0, (16, 16)))
        path = tmp_path / f"d{suffix}"
        save_depth(depth, path, depth_scale=0.001)
        loaded = load_depth(path, depth_scale=0.001)
        np.testing.assert_allclose(loaded.values, depth.values, atol=0.001 / 2 + 1e-12)

    def test_scaling(self, tmp_path):
        path = tmp_path / "d.pgm"
        _write_pgm(path, np.array([[32768]], dtype=np.uint16), 65535)
        depth = load_depth(path, depth_scale=0.001)
        assert depth.values[0, 0] == pytest.approx(32.768)

    def test_zero_stays_invalid(self, tmp_path):
        path = tmp_path / "d.pgm"
        _write_pgm(path, np.array([[0, 5]], dtype=np.uint16), 65535)
        depth = load_depth(path)
        np.testing.assert_array_equal(depth.validity, [[False, True]])

    def test_out_of_range_rejected(self, tmp_path):
        depth = DepthMap(np.full((2, 2), 100.0))
        with pytest.raises(FileFormatError):
            save_depth(depth, tmp_path / "d.pgm", depth_scale=0.001)


class TestMaskIO:
    @pytest.mark.parametrize("suffix", [".pgm", ".png"])
    def test_exact_round_trip(self, tmp_path, suffix):
        rng = np.random.default_rng(2)
        mask = rng.random((32, 32)) < 0.4
        path = tmp_path / f"m{suffix}"
        save_mask(mask, path)
        np.testing.assert_array_equal(load_mask(path), mask)


class TestHeatmapIO:
    def test_round_trip_within_quantization(self, tmp_path):
        rng = np.random.default_rng(3)
        hm = rng.random((16, 16)) * 0.8
        path = tmp_path / "h.png"
        save_heatmap(hm, path)
        loaded = load_heatmap(path)
        assert np.abs(loaded - hm).max() <= hm.max() / 65535 + 1e-12

    def test_sidecar_records_peak(self, tmp_path):
        import json
        hm = np.zeros((4, 4))
        hm[1, 2] = 0.8
        path = tmp_path / "h.png"
        save_heatmap(hm, path)
        sidecar = json.loads((tmp_path / "h.png.json").read_text())
        assert sidecar["scale"] == pytest.approx(0.8)
        loaded = load_heatmap(path)
        assert loaded[1, 2] == pytest.approx(0.8, abs=1e-6)

    def test_all_zero_heatmap(self, tmp_path):
        path = tmp_path / "z.png"
        save_heatmap(np.zeros((4, 4)), path)
        np.testing.assert_array_equal(load_heatmap(path), np.zeros((4, 4)))
