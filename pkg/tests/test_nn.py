"""Tests for specvoc.nn: blocks, activations, upsampler baseline, MACs."""

import numpy as np
import pytest

from specvoc import autograd as ag
from specvoc import nn
from specvoc.autograd import Tensor


def rng64(shape, seed=0):
    return Tensor(np.random.default_rng(seed).standard_normal(shape), requires_grad=True)


# ---------------------------------------------------------------------------
# Module plumbing
# ---------------------------------------------------------------------------


class TestModule:
    def test_named_parameters_unique_and_nested(self):
        cfg = nn.ConvNeXtBlockConfig(dim=8, intermediate_dim=16, kernel_size=3)
        block = nn.ConvNeXtBlock(cfg, np.random.default_rng(0))
        names = list(block.named_parameters())
        assert len(names) == len(set(names)) == 9

    def test_state_round_trip(self):
        cfg = nn.ConvNeXtBlockConfig(dim=4, intermediate_dim=8, kernel_size=3)
        a = nn.ConvNeXtBlock(cfg, np.random.default_rng(1))
        b = nn.ConvNeXtBlock(cfg, np.random.default_rng(2))
        b.load_state(a.state())
        for k, p in a.named_parameters().items():
            assert np.array_equal(p.data, b.named_parameters()[k].data)

    def test_load_state_shape_mismatch(self):
        cfg = nn.ConvNeXtBlockConfig(dim=4, intermediate_dim=8, kernel_size=3)
        block = nn.ConvNeXtBlock(cfg, np.random.default_rng(3))
        state = block.state()
        state["dw_w"] = np.zeros((5, 1, 3))
        with pytest.raises(ValueError, match="shape"):
            block.load_state(state)


# ---------------------------------------------------------------------------
# ConvNeXt block
# ---------------------------------------------------------------------------


class TestConvNeXtBlock:
    def test_zero_layer_scale_is_identity(self):
        cfg = nn.ConvNeXtBlockConfig(dim=6, intermediate_dim=12, kernel_size=3,
                                     layer_scale_init=0.0)
        block = nn.ConvNeXtBlock(cfg, np.random.default_rng(4), dtype=np.float64)
        x = rng64((6, 17), seed=5)
        out = block(x)
        assert np.array_equal(out.data, x.data)

    @pytest.mark.parametrize("t", [1, 3, 64, 1024])
    def test_isotropy(self, t):
        cfg = nn.ConvNeXtBlockConfig(dim=4, intermediate_dim=8, kernel_size=7)
        block = nn.ConvNeXtBlock(cfg, np.random.default_rng(6), dtype=np.float64)
        with ag.no_grad():
            out = block(rng64((4, t), seed=t))
        assert out.shape == (4, t)

    def test_batched_isotropy(self):
        cfg = nn.ConvNeXtBlockConfig(dim=4, intermediate_dim=8, kernel_size=3)
        block = nn.ConvNeXtBlock(cfg, np.random.default_rng(7), dtype=np.float64)
        with ag.no_grad():
            assert block(rng64((2, 4, 9), seed=8)).shape == (2, 4, 9)

    def test_gradcheck(self):
        cfg = nn.ConvNeXtBlockConfig(dim=4, intermediate_dim=8, kernel_size=3)
        block = nn.ConvNeXtBlock(cfg, np.random.default_rng(9), dtype=np.float64)
        x = rng64((4, 11), seed=10)

        def build(params):
            out = block(x)
            return (out * out).mean()

        assert ag.finite_difference_check(build, block.named_parameters(), seed=11) < 1e-4

    def test_config_validation(self):
        with pytest.raises(ValueError, match="odd"):
            nn.ConvNeXtBlockConfig(dim=4, intermediate_dim=8, kernel_size=4)
        with pytest.raises(ValueError, match="intermediate_dim"):
            nn.ConvNeXtBlockConfig(dim=8, intermediate_dim=4)


# ---------------------------------------------------------------------------
# Dilated ResBlock
# ---------------------------------------------------------------------------


class TestResBlock:
    def test_zero_weights_is_identity(self):
        cfg = nn.ResBlockConfig(channels=5, kernel_size=3, dilations=(1, 3))
        block = nn.ResBlockDilated(cfg, np.random.default_rng(12), dtype=np.float64)
        for w in block.ws:
            w.data[:] = 0.0
        x = rng64((5, 13), seed=13)
        assert np.array_equal(block(x).data, x.data)

    def test_receptive_field_formula(self):
        cfg = nn.ResBlockConfig(channels=2, kernel_size=3, dilations=(1, 3, 5))
        block = nn.ResBlockDilated(cfg, np.random.default_rng(14))
        assert block.receptive_field() == 1 + (1 + 3 + 5) * 2

    def test_shape_preserved(self):
        cfg = nn.ResBlockConfig(channels=3, kernel_size=5, dilations=(1, 2))
        block = nn.ResBlockDilated(cfg, np.random.default_rng(15), dtype=np.float64)
        with ag.no_grad():
            assert block(rng64((3, 40), seed=16)).shape == (3, 40)

    def test_gradcheck(self):
        cfg = nn.ResBlockConfig(channels=3, kernel_size=3, dilations=(1, 2))
        block = nn.ResBlockDilated(cfg, np.random.default_rng(17), dtype=np.float64)
        x = rng64((3, 9), seed=18)

        def build(params):
            out = block(x)
            return (out * out).mean()

        assert ag.finite_difference_check(build, block.named_parameters(), seed=19) < 1e-4

    def test_empty_dilations_rejected(self):
        with pytest.raises(ValueError, match="dilations"):
            nn.ResBlockConfig(channels=4, dilations=())


# ---------------------------------------------------------------------------
# Snake
# ---------------------------------------------------------------------------


class TestSnake:
    def test_zero_maps_to_zero(self):
        x = Tensor(np.zeros((2, 5)))
        alpha = Tensor(np.ones((2, 1)))
        assert np.array_equal(nn.snake(x, alpha).data, np.zeros((2, 5)))

    def test_pi_fixed_point_at_alpha_one(self):
        x = Tensor(np.full((1, 1), np.pi))
        out = nn.snake(x, Tensor(np.ones((1, 1))))
        assert out.data[0, 0] == pytest.approx(np.pi, abs=1e-12)

    def test_nonpositive_alpha_rejected(self):
        with pytest.raises(ValueError, match="alpha"):
            nn.snake(Tensor(np.ones((1, 2))), Tensor(np.zeros((1, 1))))

    def test_gradcheck(self):
        def build(params):
            out = nn.snake(params["x"], params["alpha"])
            return (out * out).mean()

        params = {
            "x": rng64((3, 7), seed=20),
            "alpha": Tensor(np.random.default_rng(21).uniform(0.5, 2.0, (3, 1)), requires_grad=True),
        }
        assert ag.finite_difference_check(build, params, seed=22) < 1e-4

    def test_near_identity_for_small_alpha(self):
        # |snake(x) - x| = sin^2(a*x)/a <= a*x^2
        alpha = 1e-4
        x = np.linspace(-10, 10, 1001)
        out = nn.snake(Tensor(x[None, :]), Tensor(np.full((1, 1), alpha))).data[0]
        assert np.all(np.abs(out - x) <= alpha * x**2 + 1e-15)


# ---------------------------------------------------------------------------
# Upsampler baseline
# ---------------------------------------------------------------------------


class TestUpsamplerBaseline:
    def test_length_contract(self):
        cfg = nn.UpsamplerBaselineConfig(in_channels=8)
        up = nn.UpsamplerBaseline(cfg, np.random.default_rng(23))
        x = Tensor(np.random.default_rng(24).standard_normal((8, 94)).astype(np.float32))
        with ag.no_grad():
            out = up(x)
        assert out.shape == (1, 94 * 256)

    def test_zero_weights_zero_output(self):
        cfg = nn.UpsamplerBaselineConfig(in_channels=4)
        up = nn.UpsamplerBaseline(cfg, np.random.default_rng(25))
        for w in up.ws:
            w.data[:] = 0.0
        up.post_w.data[:] = 0.0
        x = Tensor(np.random.default_rng(26).standard_normal((4, 10)).astype(np.float32))
        with ag.no_grad():
            assert np.all(up(x).data == 0.0)

    def test_stride_product_must_match_hop(self):
        with pytest.raises(ValueError, match="strides multiply"):
            nn.UpsamplerBaselineConfig(in_channels=8, stages=((8, 16, 4), (8, 16, 4)))

    def test_halving_stage_plan(self):
        cfg = nn.UpsamplerBaselineConfig(in_channels=512)
        assert [c for _, _, c in cfg.stages] == [256, 128, 64, 32]
        assert [s for s, _, _ in cfg.stages] == [8, 8, 2, 2]
        assert all(k == 2 * s for s, k, _ in cfg.stages)


# ---------------------------------------------------------------------------
# MAC counting
# ---------------------------------------------------------------------------


class TestCountMacs:
    def test_single_conv_formula(self):
        layers = [dict(kind="conv1d", c_in=1, c_out=1, k=3, t_out=100)]
        assert nn.count_macs(layers) == 300

    def test_pointwise_formula(self):
        layers = [dict(kind="conv1d", c_in=512, c_out=1536, k=1, t_out=94)]
        assert nn.count_macs(layers) == 73_924_608

    def test_depthwise_groups(self):
        layers = [dict(kind="conv1d", c_in=8, c_out=8, k=7, t_out=10, groups=8)]
        assert nn.count_macs(layers) == 8 * 7 * 10

    def test_conv_transpose_formula(self):
        layers = [dict(kind="conv_transpose1d", c_in=4, c_out=2, k=16, t_in=10)]
        assert nn.count_macs(layers) == 4 * 2 * 16 * 10

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown layer kind"):
            nn.count_macs([dict(kind="pooling")])

    def test_spectral_generator_cheaper_than_baseline(self):
        from specvoc.model import Generator, GeneratorConfig, TimeDomainBaseline

        cfg = GeneratorConfig()
        gen = Generator(cfg, np.random.default_rng(0))
        base = TimeDomainBaseline(cfg, rng=np.random.default_rng(0))
        assert gen.macs_per_second() < base.macs_per_second()
