"""Container invariants, seeded rng contract, and image I/O round trips."""

import numpy as np
import pytest

from dejavu import core


class TestContainers:
    def test_image_shape_guard(self):
        with pytest.raises(core.ShapeMismatchError):
            core.ImageTensor(np.zeros((4, 4)))
        with pytest.raises(core.ShapeMismatchError):
            core.ImageTensor(np.zeros((1, 4, 4)))

    def test_image_rejects_nan(self):
        bad = np.zeros((3, 2, 2))
        bad[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            core.ImageTensor(bad)

    def test_segmentation_condition(self):
        logits = np.random.default_rng(0).normal(size=(5, 4, 4))
        probs = np.exp(logits) / np.exp(logits).sum(axis=0, keepdims=True)
        core.DenseCondition(probs, "segmentation").validate()
        bad = probs.copy()
        bad[0] += 0.01
        with pytest.raises(ValueError):
            core.DenseCondition(bad, "segmentation").validate()

    def test_depth_condition(self):
        core.DenseCondition(np.full((1, 3, 3), 2.0), "depth").validate()
        with pytest.raises(ValueError):
            core.DenseCondition(np.zeros((1, 3, 3)), "depth").validate()

    def test_normals_condition(self):
        v = np.zeros((3, 2, 2))
        v[2] = 1.0
        core.DenseCondition(v, "normals").validate()
        with pytest.raises(ValueError):
            core.DenseCondition(v * 1.01, "normals").validate()

    def test_unknown_task(self):
        with pytest.raises(ValueError):
            core.DenseCondition(np.ones((1, 2, 2)), "edges")


class TestSeededRng:
    def test_same_seed_same_draws(self):
        a = core.make_rng(123).random(1000)
        b = core.make_rng(123).random(1000)
        np.testing.assert_array_equal(a, b)

    def test_distinct_seeds_differ(self):
        a = core.make_rng(0).random(1000)
        b = core.make_rng(1).random(1000)
        assert np.any(a != b)

    def test_streams_reproducible_and_distinct(self):
        r = core.make_rng(9)
        s1 = r.stream("redaction", 3, 7).random(100)
        s2 = core.make_rng(9).stream("redaction", 3, 7).random(100)
        np.testing.assert_array_equal(s1, s2)
        s3 = core.make_rng(9).stream("redaction", 3, 8).random(100)
        assert np.any(s1 != s3)

    def test_substream_independence(self):
        r = core.make_rng(42)
        a = r.stream("redaction").random(10_000)
        b = r.stream("data").random(10_000)
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 0.05

    def test_stream_isolated_from_parent(self):
        r = core.make_rng(5)
        _ = r.stream("x").random(50)
        a = r.random(10)
        r2 = core.make_rng(5)
        b = r2.random(10)
        np.testing.assert_array_equal(a, b)


class TestImageIO:
    def test_quantize_conventions(self):
        assert core.quantize8(np.array(0.5)) == 128
        assert core.quantize8(np.array(1.7)) == 255
        assert core.quantize8(np.array(-0.2)) == 0
        assert core.quantize8(np.array(1.0)) == 255
        assert core.quantize8(np.array(0.0)) == 0

    def test_black_and_white_round_trip(self, tmp_path):
        p = tmp_path / "black.png"
        core.save_image(core.ImageTensor(np.zeros((3, 4, 4))), p)
        img = core.load_image(p)
        assert img.data.shape == (3, 4, 4)
        np.testing.assert_array_equal(img.data, 0.0)
        core.save_image(core.ImageTensor(np.ones((3, 4, 4))), p)
        np.testing.assert_array_equal(core.load_image(p).data, 1.0)

    def test_save_load_save_identical_bytes(self, tmp_path):
        rng = np.random.default_rng(3)
        img = core.ImageTensor(rng.random((3, 16, 16)))
        p1, p2 = tmp_path / "a.png", tmp_path / "b.png"
        core.save_image(img, p1)
        core.save_image(core.load_image(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_load_non_rgb_rejected(self, tmp_path):
        from PIL import Image

        p = tmp_path / "gray.png"
        Image.fromarray(np.zeros((4, 4), dtype=np.uint8), mode="L").save(p)
        with pytest.raises(core.ImageFormatError):
            core.load_image(p)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises((FileNotFoundError, OSError)):
            core.load_image(tmp_path / "nope.png")

    def test_save_rejects_nonfinite(self, tmp_path):
        bad = np.zeros((3, 2, 2))
        bad[0, 0, 0] = np.inf
        with pytest.raises(ValueError):
            core.save_image(bad, tmp_path / "x.png")
