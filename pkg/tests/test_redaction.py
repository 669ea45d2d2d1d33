"""Redaction semantics, checked against brute-force transform oracles.

The DCT routes are validated two ways: the fast scipy path used by the
library, and a naive O(N^4) double-sum implementation of the orthonormal
type-II DCT written here from the definition.
"""

import numpy as np
import pytest

from dejavu import core, redaction
from dejavu.redaction import RedactionSpec


def naive_dct2_single(x):
    """Orthonormal type-II 2D DCT from the textbook double sum."""
    h, w = x.shape
    out = np.zeros((h, w))
    iy = (2 * np.arange(h) + 1) / (2 * h)
    ix = (2 * np.arange(w) + 1) / (2 * w)
    for u in range(h):
        for v in range(w):
            cy = np.cos(np.pi * u * iy)
            cx = np.cos(np.pi * v * ix)
            au = np.sqrt((1 if u == 0 else 2) / h)
            av = np.sqrt((1 if v == 0 else 2) / w)
            out[u, v] = au * av * (x * np.outer(cy, cx)).sum()
    return out


def naive_idct2_single(c):
    """Inverse via the same basis: x = sum_uv c[u,v] * basis_uv."""
    h, w = c.shape
    out = np.zeros((h, w))
    iy = (2 * np.arange(h) + 1) / (2 * h)
    ix = (2 * np.arange(w) + 1) / (2 * w)
    for u in range(h):
        for v in range(w):
            au = np.sqrt((1 if u == 0 else 2) / h)
            av = np.sqrt((1 if v == 0 else 2) / w)
            out += c[u, v] * au * av * np.outer(np.cos(np.pi * u * iy), np.cos(np.pi * v * ix))
    return out


rng = np.random.default_rng(11)


class TestSpecValidation:
    def test_valid_specs(self):
        RedactionSpec("spatial", "random", t=0.3)
        RedactionSpec("spatial", "checkerboard", b=2)
        RedactionSpec("spatial", "random_blocks", b=4)
        RedactionSpec("spectral", "lowpass", band=(0.0, 0.5))
        RedactionSpec("spectral", "bandstop", band=(0.2, 0.6))

    @pytest.mark.parametrize(
        "kw",
        [
            dict(domain="spatial", variant="lowpass", t=0.1),
            dict(domain="spectral", variant="random", band=(0, 1)),
            dict(domain="spatial", variant="random"),
            dict(domain="spatial", variant="random", t=1.5),
            dict(domain="spatial", variant="checkerboard"),
            dict(domain="spatial", variant="checkerboard", b=0),
            dict(domain="spatial", variant="checkerboard", b=2, t=0.5),
            dict(domain="spectral", variant="lowpass"),
            dict(domain="spectral", variant="lowpass", band=(0.5, 0.5)),
            dict(domain="spectral", variant="lowpass", band=(0.2, 1.1)),
            dict(domain="spectral", variant="lowpass", band=(0, 1), b=2),
            dict(domain="frequency", variant="lowpass", band=(0, 1)),
        ],
    )
    def test_invalid_specs(self, kw):
        with pytest.raises(core.InvalidSpecError):
            RedactionSpec(**kw)


class TestSpatialMask:
    def test_t_zero_all_ones(self):
        spec = RedactionSpec("spatial", "random", t=0.0)
        m = redaction.make_spatial_mask(4, 4, spec, core.make_rng(0))
        np.testing.assert_array_equal(m, 1.0)

    def test_t_one_all_zeros(self):
        spec = RedactionSpec("spatial", "random", t=1.0)
        m = redaction.make_spatial_mask(8, 8, spec, core.make_rng(0))
        np.testing.assert_array_equal(m, 0.0)

    def test_checkerboard_convention(self):
        spec = RedactionSpec("spatial", "checkerboard", b=2)
        m = redaction.make_spatial_mask(4, 4, spec, core.make_rng(0))
        want = np.array(
            [[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]], dtype=float
        )
        np.testing.assert_array_equal(m, want)

    def test_random_zero_fraction_concentrates(self):
        spec = RedactionSpec("spatial", "random", t=0.4)
        m = redaction.make_spatial_mask(256, 256, spec, core.make_rng(7))
        frac = 1.0 - m.mean()
        assert abs(frac - 0.4) < 0.02

    def test_mask_binary(self):
        spec = RedactionSpec("spatial", "random_blocks", b=3)
        m = redaction.make_spatial_mask(10, 10, spec, core.make_rng(2))
        assert set(np.unique(m)) <= {0.0, 1.0}

    def test_random_blocks_is_shifted_checkerboard(self):
        b = 3
        spec = RedactionSpec("spatial", "random_blocks", b=b)
        m = redaction.make_spatial_mask(12, 12, spec, core.make_rng(5))
        base = RedactionSpec("spatial", "checkerboard", b=b)
        matches = 0
        for oy in range(2 * b):
            for ox in range(2 * b):
                big = redaction.make_spatial_mask(12 + oy, 12 + ox, base, None)
                if np.array_equal(m, big[oy : oy + 12, ox : ox + 12]):
                    matches += 1
        assert matches >= 1

    def test_single_axis_shift_by_block_complements(self):
        # shifting the grid one block along ONE axis flips parity everywhere;
        # a diagonal (b,b) shift adds 2 to i//b + j//b and is the identity.
        b = 2
        ii = np.arange(8)[:, None] // b
        jj = np.arange(8)[None, :] // b
        board = ((ii + jj) % 2 == 0).astype(float)
        row_shift = (((np.arange(8)[:, None] + b) // b + jj) % 2 == 0).astype(float)
        np.testing.assert_array_equal(row_shift, 1.0 - board)
        diag = (
            ((np.arange(8)[:, None] + b) // b + (np.arange(8)[None, :] + b) // b) % 2 == 0
        ).astype(float)
        np.testing.assert_array_equal(diag, board)

    def test_block_larger_than_image_rejected(self):
        spec = RedactionSpec("spatial", "checkerboard", b=16)
        with pytest.raises(core.InvalidSpecError):
            redaction.make_spatial_mask(8, 8, spec, core.make_rng(0))

    def test_spectral_spec_rejected(self):
        spec = RedactionSpec("spectral", "lowpass", band=(0, 0.5))
        with pytest.raises(core.InvalidSpecError):
            redaction.make_spatial_mask(4, 4, spec, core.make_rng(0))


class TestApplyMask:
    def test_identity_and_annihilation(self):
        img = rng.random((3, 4, 4))
        np.testing.assert_array_equal(redaction.apply_spatial_mask(img, np.ones((4, 4))), img)
        np.testing.assert_array_equal(redaction.apply_spatial_mask(img, np.zeros((4, 4))), 0.0)

    def test_kept_pixels_bit_identical(self):
        img = rng.random((3, 8, 8))
        spec = RedactionSpec("spatial", "random", t=0.5)
        m = redaction.make_spatial_mask(8, 8, spec, core.make_rng(1))
        out = redaction.apply_spatial_mask(img, m)
        kept = m.astype(bool)
        assert np.array_equal(out[:, kept], img[:, kept])
        assert np.all(out[:, ~kept] == 0.0)

    def test_constant_checkerboard(self):
        img = np.full((3, 4, 4), 0.5)
        spec = RedactionSpec("spatial", "checkerboard", b=2)
        m = redaction.make_spatial_mask(4, 4, spec, core.make_rng(0))
        out = redaction.apply_spatial_mask(img, m)
        np.testing.assert_array_equal(out[:, :2, :2], 0.5)
        np.testing.assert_array_equal(out[:, :2, 2:], 0.0)

    def test_shape_mismatch(self):
        with pytest.raises(core.ShapeMismatchError):
            redaction.apply_spatial_mask(np.zeros((3, 4, 4)), np.ones((5, 5)))


class TestDct:
    def test_constant_image_dc_only(self):
        h, w = 6, 5
        c = redaction.dct2(np.full((3, h, w), 0.7))
        np.testing.assert_allclose(c[:, 0, 0], 0.7 * np.sqrt(h * w), rtol=1e-12)
        c[:, 0, 0] = 0
        assert np.abs(c).max() < 1e-12

    def test_zero_image(self):
        np.testing.assert_array_equal(redaction.dct2(np.zeros((3, 4, 4))), 0.0)

    def test_matches_naive_definition(self):
        x = rng.random((8, 8))
        fast = redaction.dct2(x[None])[0]
        slow = naive_dct2_single(x)
        np.testing.assert_allclose(fast, slow, atol=1e-10)

    def test_idct_matches_naive_definition(self):
        c = rng.random((8, 8))
        fast = redaction.idct2(c[None])[0]
        slow = naive_idct2_single(c)
        np.testing.assert_allclose(fast, slow, atol=1e-10)

    def test_round_trip(self):
        x = rng.random((3, 9, 7))
        np.testing.assert_allclose(redaction.idct2(redaction.dct2(x)), x, atol=1e-6)

    def test_dc_coefficient_inverse(self):
        h, w = 4, 4
        c = np.zeros((1, h, w))
        c[0, 0, 0] = np.sqrt(h * w)
        np.testing.assert_allclose(redaction.idct2(c), 1.0, atol=1e-12)

    def test_parseval(self):
        x = rng.random((3, 16, 16))
        e_img = (x**2).sum()
        e_coef = (redaction.dct2(x) ** 2).sum()
        assert abs(e_img - e_coef) / e_img < 1e-6


class TestSpectralMask:
    def test_lowpass_full_band(self):
        spec = RedactionSpec("spectral", "lowpass", band=(0.0, 1.0))
        np.testing.assert_array_equal(redaction.make_spectral_mask(8, 8, spec), 1.0)

    def test_bandstop_degenerate_all_zero(self):
        spec = RedactionSpec("spectral", "bandstop", band=(0.0, 1.0))
        np.testing.assert_array_equal(redaction.make_spectral_mask(8, 8, spec), 0.0)

    def test_lowpass_half_matches_enumeration(self):
        spec = RedactionSpec("spectral", "lowpass", band=(0.0, 0.5))
        m = redaction.make_spectral_mask(8, 8, spec)
        denom = np.sqrt(2 * 7**2)
        for u in range(8):
            for v in range(8):
                r = np.sqrt(u * u + v * v) / denom
                assert m[u, v] == (1.0 if r <= 0.5 else 0.0)

    def test_highpass_keeps_top_corner(self):
        spec = RedactionSpec("spectral", "highpass", band=(0.3, 1.0))
        m = redaction.make_spectral_mask(8, 8, spec)
        assert m[0, 0] == 0.0 and m[7, 7] == 1.0

    def test_spatial_spec_rejected(self):
        spec = RedactionSpec("spatial", "random", t=0.2)
        with pytest.raises(core.InvalidSpecError):
            redaction.make_spectral_mask(4, 4, spec)


class TestRedact:
    def test_spatial_t0_identity(self):
        img = core.ImageTensor(rng.random((3, 8, 8)))
        spec = RedactionSpec("spatial", "random", t=0.0)
        out = redaction.redact(img, spec, core.make_rng(0))
        np.testing.assert_array_equal(out.data, img.data)

    def test_spectral_full_band_identity(self):
        img = rng.random((3, 8, 8))
        spec = RedactionSpec("spectral", "lowpass", band=(0.0, 1.0))
        out = redaction.redact(img, spec)
        np.testing.assert_allclose(out, img, atol=1e-6)

    def test_bandstop_kills_basis_cosine(self):
        # build the image from a single DCT basis function at (u,v)=(3,4);
        # its radial index sits inside the stop band, so the output dies.
        h = w = 8
        u, v = 3, 4
        c = np.zeros((1, h, w))
        c[0, u, v] = 1.0
        img = redaction.idct2(c)
        r = np.sqrt(u**2 + v**2) / np.sqrt(2 * 7**2)
        spec = RedactionSpec("spectral", "bandstop", band=(r - 0.05, r + 0.05))
        out = redaction.redact(img, spec)
        assert np.abs(out).max() < 1e-6

    def test_spectral_not_clamped(self):
        # removing the DC term from a mean-positive image must leave
        # negative values; clamping would erase them.
        img = np.zeros((3, 8, 8))
        img[:, ::2, :] = 1.0
        spec = RedactionSpec("spectral", "highpass", band=(0.05, 1.0))
        out = redaction.redact(img, spec)
        assert out.min() < -1e-3
        np.testing.assert_allclose(out.mean(), 0.0, atol=1e-9)

    def test_linearity_fixed_mask(self):
        a, b = rng.random((3, 8, 8)), rng.random((3, 8, 8))
        spec = RedactionSpec("spectral", "highpass", band=(0.25, 1.0))
        lhs = redaction.redact(2.0 * a + 3.0 * b, spec)
        rhs = 2.0 * redaction.redact(a, spec) + 3.0 * redaction.redact(b, spec)
        np.testing.assert_allclose(lhs, rhs, atol=1e-6)

    def test_spectral_idempotent(self):
        img = rng.random((3, 8, 8))
        spec = RedactionSpec("spectral", "bandstop", band=(0.2, 0.5))
        once = redaction.redact(img, spec)
        twice = redaction.redact(once, spec)
        np.testing.assert_allclose(once, twice, atol=1e-6)

    def test_same_rng_path_same_mask(self):
        img = rng.random((3, 16, 16))
        spec = RedactionSpec("spatial", "random_blocks", b=2)
        r1 = core.make_rng(3).stream("redaction", 0, 5)
        r2 = core.make_rng(3).stream("redaction", 0, 5)
        np.testing.assert_array_equal(
            redaction.redact(img, spec, r1), redaction.redact(img, spec, r2)
        )

    def test_spec_from_config(self):
        s = redaction.spec_from_config("spectral", "bandstop", band_lo=0.1, band_hi=0.4)
        assert s.band == (0.1, 0.4)
        s = redaction.spec_from_config("spatial", "random", t=0.3, b=None)
        assert s.t == 0.3 and s.b is None
        with pytest.raises(core.InvalidSpecError):
            redaction.spec_from_config("spectral", "lowpass")
