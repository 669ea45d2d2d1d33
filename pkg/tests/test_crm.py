"""Regeneration module: conditioning semantics, both wirings, gradients."""

import numpy as np
import pytest

from dejavu import autodiff as ad
from dejavu import core, crm
from dejavu.crm import Crm, CrmConfig, combine_inputs

rng = np.random.default_rng(21)


def make_crm(mode="forward", combine="concat", width=4, depth=2, steps=3, n=2, seed=0):
    cfg = CrmConfig(mode=mode, combine=combine, width=width, depth=depth,
                    steps=steps, condition_channels=n)
    return Crm(cfg, core.make_rng(seed).stream("init").gen)


class TestConfig:
    def test_valid(self):
        CrmConfig(mode="recursive", combine="multiply", steps=0, condition_channels=5)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(mode="both"),
            dict(combine="add"),
            dict(width=0),
            dict(depth=0),
            dict(steps=-1),
            dict(condition_channels=0),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(core.ConfigError):
            CrmConfig(**kw)

    def test_default_mode_per_variant(self):
        assert crm.default_mode("random") == "recursive"
        for v in ("checkerboard", "random_blocks", "lowpass", "highpass", "bandstop"):
            assert crm.default_mode(v) == "forward"


class TestCombine:
    def test_multiply_unit_image(self):
        cond = rng.random((4, 5, 5))
        out = combine_inputs(np.ones((3, 5, 5)), cond, "multiply")
        np.testing.assert_allclose(out.data, cond)

    def test_multiply_zero_image(self):
        out = combine_inputs(np.zeros((3, 5, 5)), rng.random((2, 5, 5)), "multiply")
        np.testing.assert_array_equal(out.data, 0.0)

    def test_multiply_averages_channels(self):
        img = np.stack([np.full((2, 2), 0.2), np.full((2, 2), 0.4), np.full((2, 2), 0.9)])
        cond = np.ones((1, 2, 2)) * 2.0
        out = combine_inputs(img, cond, "multiply")
        np.testing.assert_allclose(out.data, 1.0)

    def test_concat_order(self):
        img = rng.random((3, 2, 2))
        cond = rng.random((4, 2, 2))
        out = combine_inputs(img, cond, "concat")
        assert out.shape == (7, 2, 2)
        np.testing.assert_array_equal(out.data[:3], img)
        np.testing.assert_array_equal(out.data[3:], cond)

    def test_spatial_mismatch(self):
        with pytest.raises(core.ShapeMismatchError):
            combine_inputs(np.ones((3, 4, 4)), np.ones((2, 5, 5)), "concat")

    def test_batched(self):
        img = rng.random((2, 3, 4, 4))
        cond = rng.random((2, 5, 4, 4))
        assert combine_inputs(img, cond, "concat").shape == (2, 8, 4, 4)
        assert combine_inputs(img, cond, "multiply").shape == (2, 5, 4, 4)


class TestForwardMode:
    def test_output_shape(self):
        m = make_crm("forward", "multiply", n=3)
        out = m(rng.random((3, 6, 7)), rng.random((3, 6, 7)))
        assert out.shape == (3, 6, 7)

    def test_zero_head_gives_bias(self):
        m = make_crm("forward")
        m.head.weight.data[...] = 0.0
        m.head.bias.data[...] = np.array([0.1, -0.2, 0.3])
        out = m(rng.random((3, 4, 4)), rng.random((2, 4, 4)))
        np.testing.assert_allclose(out.data, np.array([0.1, -0.2, 0.3])[:, None, None] * np.ones((3, 4, 4)))

    def test_channel_mismatch(self):
        m = make_crm("forward", n=2)
        with pytest.raises(core.ConfigError):
            m(rng.random((3, 4, 4)), rng.random((3, 4, 4)))

    @pytest.mark.parametrize("combine", ["multiply", "concat"])
    def test_fd_gradient_wrt_cond(self, combine):
        m = make_crm("forward", combine, n=1).eval()
        img = rng.random((3, 4, 4))
        cd = rng.random((1, 4, 4)) + 0.5
        cond = ad.Tensor(cd.copy(), requires_grad=True)
        m(img, cond).mean().backward()
        assert np.abs(cond.grad).max() > 0
        eps = 1e-6
        num = np.zeros_like(cd)
        for i in np.ndindex(cd.shape):
            for s, sign in ((eps, 1), (-eps, -1)):
                cd[i] += s
                val = m(img, ad.Tensor(cd)).mean().item()
                num[i] += sign * val / (2 * eps)
                cd[i] -= s
        rel = np.abs(cond.grad - num).max() / max(np.abs(num).max(), 1e-12)
        assert rel < 1e-4


class TestRecursiveMode:
    def test_t0_identity(self):
        m = make_crm("recursive", steps=0)
        img = rng.random((3, 5, 5))
        out = m(img, rng.random((2, 5, 5)))
        np.testing.assert_array_equal(out.data, img)

    def test_zero_residual_fixed_point(self):
        m = make_crm("recursive", steps=5)
        m.head.weight.data[...] = 0.0
        m.head.bias.data[...] = 0.0
        img = rng.random((3, 5, 5))
        out = m(img, rng.random((2, 5, 5)))
        np.testing.assert_array_equal(out.data, img)

    def test_stability_t8(self):
        m = make_crm("recursive", steps=8).eval()
        out = m(rng.random((3, 6, 6)), rng.random((2, 6, 6)))
        assert np.all(np.isfinite(out.data))

    def test_single_shared_block(self):
        m = make_crm("recursive", steps=4)
        names = [n for n, _ in m.named_parameters()]
        # exactly one conv-bn block plus the head, regardless of step count
        assert len(names) == len(set(names))
        m2 = make_crm("recursive", steps=9)
        assert m.num_parameters() == m2.num_parameters()

    def test_steps_reuse_same_weights_in_graph(self):
        m = make_crm("recursive", "multiply", steps=3, n=1)
        img = rng.random((3, 4, 4))
        cond = rng.random((1, 4, 4))
        m(img, cond).mean().backward()
        g3 = {n: p.grad.copy() for n, p in m.named_parameters()}
        assert all(np.abs(g).sum() > 0 for g in g3.values())

    @pytest.mark.parametrize("combine", ["multiply", "concat"])
    def test_fd_gradient_wrt_cond(self, combine):
        m = make_crm("recursive", combine, steps=2, n=1).eval()
        img = rng.random((3, 4, 4))
        cd = rng.random((1, 4, 4)) + 0.5
        cond = ad.Tensor(cd.copy(), requires_grad=True)
        m(img, cond).mean().backward()
        eps = 1e-6
        num = np.zeros_like(cd)
        for i in np.ndindex(cd.shape):
            cd[i] += eps
            fp = m(img, ad.Tensor(cd)).mean().item()
            cd[i] -= 2 * eps
            fm = m(img, ad.Tensor(cd)).mean().item()
            cd[i] += eps
            num[i] = (fp - fm) / (2 * eps)
        rel = np.abs(cond.grad - num).max() / max(np.abs(num).max(), 1e-12)
        assert rel < 1e-4


class TestParameterInventory:
    def test_recursive_t1_matches_forward_l1_up_to_state_reinjection(self):
        fw = make_crm("forward", "concat", width=4, depth=1, n=2)
        rc = make_crm("recursive", "concat", width=4, steps=1, n=2)
        fp = dict(fw.named_parameters())
        rp = dict(rc.named_parameters())
        assert set(fp) == set(rp)
        for name in fp:
            a, b = fp[name].data.shape, rp[name].data.shape
            if name == "blocks.0.conv.weight":
                # recursive block also ingests the 3-channel running estimate
                assert b[1] - a[1] == 3
                assert a[0] == b[0] and a[2:] == b[2:]
            else:
                assert a == b

    def test_mode_dispatch_guards(self):
        fw = make_crm("forward")
        rc = make_crm("recursive")
        img, cond = rng.random((3, 4, 4)), rng.random((2, 4, 4))
        assert crm.crm_forward(img, cond, fw).shape == (3, 4, 4)
        assert crm.crm_recursive(img, cond, rc).shape == (3, 4, 4)
        with pytest.raises(core.ConfigError):
            crm.crm_forward(img, cond, rc)
        with pytest.raises(core.ConfigError):
            crm.crm_recursive(img, cond, fw)
