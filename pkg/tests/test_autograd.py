"""Tests for the reverse-mode engine: ops, broadcasting, gradients."""

import numpy as np
import pytest

from specvoc import autograd as ag
from specvoc import dsp


def make(shape, seed=0, requires_grad=True):
    rng = np.random.default_rng(seed)
    return ag.Tensor(rng.standard_normal(shape), requires_grad=requires_grad)


# ---------------------------------------------------------------------------
# Elementwise ops
# ---------------------------------------------------------------------------


class TestElementwise:
    def test_gelu_at_zero(self):
        x = ag.Tensor(np.array(0.0), requires_grad=True)
        y = ag.gelu(x)
        assert y.item() == 0.0
        y.backward()
        assert x.grad == pytest.approx(0.5)

    def test_exp_backward_is_exp(self):
        x = make((7,), seed=1)
        ag.exp(x).sum().backward()
        assert x.grad == pytest.approx(np.exp(x.data))

    def test_composite_graph_fd(self):
        def build(params):
            a, b = params["a"], params["b"]
            z = ag.tanh(a * b) + ag.gelu(a) - ag.relu(b) * 0.3 + ag.abs_(a - 1.2)
            return (z * z).mean()

        params = {"a": make((13,), seed=2), "b": make((13,), seed=3)}
        assert ag.finite_difference_check(build, params, seed=4) < 1e-4

    def test_sin_cos_fd(self):
        def build(params):
            return (ag.sin(params["x"]) * ag.cos(params["x"] * 2.0)).sum()

        assert ag.finite_difference_check(build, {"x": make((9,), seed=5)}, seed=6) < 1e-6

    def test_clamp_passes_gradient_inside_only(self):
        x = ag.Tensor(np.array([-2.0, 0.5, 3.0]), requires_grad=True)
        ag.clamp(x, lo=-1.0, hi=1.0).sum().backward()
        assert np.array_equal(x.grad, [0.0, 1.0, 0.0])

    def test_leaky_relu_slope(self):
        x = ag.Tensor(np.array([-3.0, 2.0]), requires_grad=True)
        y = ag.leaky_relu(x, slope=0.1)
        assert y.data == pytest.approx([-0.3, 2.0])
        y.sum().backward()
        assert x.grad == pytest.approx([0.1, 1.0])

    def test_div_by_zero_flagged_in_float64(self):
        a = ag.Tensor(np.ones(3))
        b = ag.Tensor(np.array([1.0, 0.0, 2.0]))
        with pytest.raises(ValueError, match="zero"):
            ag.div(a, b)

    def test_mixed_dtype_rejected(self):
        a = ag.Tensor(np.ones(3, dtype=np.float32))
        b = ag.Tensor(np.ones(3, dtype=np.float64))
        with pytest.raises(ValueError, match="mixed dtypes"):
            ag.add(a, b)

    def test_scalar_lift_preserves_dtype(self):
        a = ag.Tensor(np.ones(3, dtype=np.float32))
        assert (a + 1.5).dtype == np.float32


class TestBroadcasting:
    def test_trailing_broadcast_backward(self):
        x = make((4, 5), seed=7)
        b = make((4, 1), seed=8)
        ((x + b) * 2.0).sum().backward()
        assert b.grad == pytest.approx(np.full((4, 1), 10.0))
        assert x.grad == pytest.approx(np.full((4, 5), 2.0))

    def test_vector_times_matrix_fd(self):
        def build(params):
            return (params["m"] * params["v"]).mean()

        params = {"m": make((3, 6), seed=9), "v": make((6,), seed=10)}
        assert ag.finite_difference_check(build, params, seed=11) < 1e-8


# ---------------------------------------------------------------------------
# Reductions, matmul, shape ops
# ---------------------------------------------------------------------------


class TestBackwardSemantics:
    def test_sum_gives_ones(self):
        x = make((3, 4), seed=12)
        x.sum().backward()
        assert np.array_equal(x.grad, np.ones((3, 4)))

    def test_disconnected_parameter_keeps_no_grad(self):
        x = make((3,), seed=13)
        unused = make((3,), seed=14)
        (x * 2.0).sum().backward()
        assert unused.grad is None

    def test_two_uses_sum_gradients(self):
        x = ag.Tensor(np.array([2.0]), requires_grad=True)
        (x * x + x * 3.0).sum().backward()
        assert x.grad == pytest.approx([2 * 2.0 + 3.0])

    def test_grad_accumulates_until_zeroed(self):
        x = make((2,), seed=15)
        (x * 1.0).sum().backward()
        (x * 1.0).sum().backward()
        assert x.grad == pytest.approx(np.full(2, 2.0))
        x.zero_grad()
        assert x.grad is None

    def test_non_scalar_backward_rejected(self):
        with pytest.raises(ValueError, match="scalar"):
            make((3,)).backward()

    def test_detach_cuts_graph(self):
        x = make((3,), seed=16)
        (x.detach() * 5.0).sum().backward()
        assert x.grad is None

    def test_no_grad_suppresses_graph(self):
        x = make((3,), seed=17)
        with ag.no_grad():
            y = (x * x).sum()
        assert y._parents == ()

    def test_forward_determinism(self):
        def run():
            x = make((16,), seed=18)
            return ag.gelu(ag.tanh(x * 0.7) + 0.1).data

        assert np.array_equal(run(), run())


class TestMatmul:
    def test_identity(self):
        x = make((4, 4), seed=19)
        eye = ag.Tensor(np.eye(4))
        assert np.allclose((eye @ x).data, x.data)

    def test_one_by_one_reduces_to_scalar_mul(self):
        a = ag.Tensor(np.array([[3.0]]))
        b = ag.Tensor(np.array([[4.0]]))
        assert (a @ b).data[0, 0] == pytest.approx(12.0)

    def test_fd(self):
        def build(params):
            return (params["a"] @ params["b"]).sum()

        params = {"a": make((3, 5), seed=20), "b": make((5, 2), seed=21)}
        assert ag.finite_difference_check(build, params, seed=22) < 1e-4

    def test_batched_left_fd(self):
        def build(params):
            return ((params["a"] @ params["b"]) * 0.5).sum()

        params = {"a": make((4, 3, 5), seed=23), "b": make((5, 2), seed=24)}
        assert ag.finite_difference_check(build, params, seed=25) < 1e-4


class TestShapeOps:
    def test_reshape_round_trip(self):
        x = make((2, 6), seed=26)
        y = x.reshape(3, 4).reshape(2, 6)
        (y * 2.0).sum().backward()
        assert np.array_equal(x.grad, np.full((2, 6), 2.0))

    def test_take_slice_backward(self):
        x = make((10,), seed=27)
        x[2:5].sum().backward()
        expected = np.zeros(10)
        expected[2:5] = 1.0
        assert np.array_equal(x.grad, expected)

    def test_concat_backward_splits(self):
        a = make((2, 3), seed=28)
        b = make((2, 2), seed=29)
        (ag.concat([a, b], axis=1) * 3.0).sum().backward()
        assert np.array_equal(a.grad, np.full((2, 3), 3.0))
        assert np.array_equal(b.grad, np.full((2, 2), 3.0))

    def test_pad_backward(self):
        x = make((3,), seed=30)
        y = ag.pad(x, ((2, 1),))
        assert y.shape == (6,)
        y[:2].sum().backward()
        assert np.array_equal(x.grad, np.zeros(3))

    def test_dilate(self):
        x = ag.Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
        y = ag.dilate(x, 2)
        assert np.array_equal(y.data, [1, 0, 2, 0, 3])
        (y * np.arange(5.0)).sum().backward()
        assert np.array_equal(x.grad, [0.0, 2.0, 4.0])

    def test_flip(self):
        x = make((4,), seed=31)
        assert np.array_equal(ag.flip(x).data, x.data[::-1])


# ---------------------------------------------------------------------------
# conv1d / conv_transpose1d / conv2d
# ---------------------------------------------------------------------------


class TestConv1d:
    def test_pointwise_identity_kernel(self):
        x = make((3, 8), seed=32)
        w = ag.Tensor(np.eye(3).reshape(3, 3, 1))
        assert np.allclose(ag.conv1d(x, w).data, x.data)

    def test_depthwise_delta_kernel_identity(self):
        x = make((4, 9), seed=33)
        w = np.zeros((4, 1, 3))
        w[:, 0, 1] = 1.0
        out = ag.conv1d(x, ag.Tensor(w), padding=1, groups=4)
        assert np.allclose(out.data, x.data)

    def test_spec_geometry_fd(self):
        def build(params):
            out = ag.conv1d(params["x"], params["w"], bias=params["b"], dilation=2)
            return (out * out).mean()

        params = {
            "x": make((3, 20), seed=34),
            "w": make((4, 3, 5), seed=35),
            "b": make((4,), seed=36),
        }
        assert ag.finite_difference_check(build, params, seed=37) < 1e-4

    def test_strided_grouped_fd(self):
        def build(params):
            out = ag.conv1d(params["x"], params["w"], stride=2, padding=2, groups=2)
            return (out * out).mean()

        params = {"x": make((2, 4, 11), seed=38), "w": make((6, 2, 3), seed=39)}
        assert ag.finite_difference_check(build, params, seed=40) < 1e-4

    def test_output_length_formula(self):
        x = make((1, 20), seed=41)
        w = make((1, 1, 5), seed=42)
        out = ag.conv1d(x, w, stride=3, dilation=2, padding=4)
        # floor((20 + 8 - 2*4 - 1)/3) + 1 = 7
        assert out.shape == (1, 7)

    def test_bad_geometry_rejected(self):
        with pytest.raises(ValueError, match="channel geometry"):
            ag.conv1d(make((3, 8)), make((4, 2, 3)))
        with pytest.raises(ValueError, match="kernel span"):
            ag.conv1d(make((3, 4)), make((4, 3, 9)))


class TestConvTranspose1d:
    def test_identity(self):
        x = make((2, 6), seed=43)
        w = ag.Tensor(np.eye(2).reshape(2, 2, 1))
        assert np.allclose(ag.conv_transpose1d(x, w).data, x.data)

    def test_length_formula(self):
        out = ag.conv_transpose1d(make((3, 4), seed=44), make((3, 5, 4), seed=45), stride=2, padding=1)
        assert out.shape == (5, 8)

    def test_fd(self):
        def build(params):
            out = ag.conv_transpose1d(params["x"], params["w"], bias=params["b"], stride=3, padding=2)
            return (out * out).mean()

        params = {
            "x": make((2, 3, 5), seed=46),
            "w": make((3, 4, 6), seed=47),
            "b": make((4,), seed=48),
        }
        assert ag.finite_difference_check(build, params, seed=49) < 1e-4

    def test_adjoint_of_conv1d(self):
        # <conv(x), y> == <x, convT(y)> with shared (transposed) weights.
        rng = np.random.default_rng(50)
        x = rng.standard_normal((3, 16))
        y = rng.standard_normal((5, 7))
        w = rng.standard_normal((5, 3, 4))
        lhs = ag.conv1d(ag.Tensor(x), ag.Tensor(w), stride=2).data
        rhs = ag.conv_transpose1d(ag.Tensor(y), ag.Tensor(w), stride=2).data
        assert np.sum(lhs * y) == pytest.approx(np.sum(x * rhs), rel=1e-10)


class TestConv2d:
    def test_fd(self):
        def build(params):
            out = ag.conv2d(params["x"], params["w"], bias=params["b"], stride=(2, 1), padding=(1, 2))
            return (out * out).mean()

        params = {
            "x": make((2, 3, 9, 7), seed=51),
            "w": make((4, 3, 3, 5), seed=52),
            "b": make((4,), seed=53),
        }
        assert ag.finite_difference_check(build, params, seed=54) < 1e-4

    def test_pointwise_identity(self):
        x = make((2, 6, 5), seed=55)
        w = ag.Tensor(np.eye(2).reshape(2, 2, 1, 1))
        assert np.allclose(ag.conv2d(x, w).data, x.data)

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ValueError, match="channels"):
            ag.conv2d(make((3, 8, 8)), make((4, 2, 3, 3)))


# ---------------------------------------------------------------------------
# layer_norm
# ---------------------------------------------------------------------------


class TestLayerNorm:
    def test_constant_column_maps_to_zero(self):
        x = ag.Tensor(np.full((5, 3), 2.5))
        out = ag.layer_norm(x, ag.Tensor(np.ones((5, 1))), ag.Tensor(np.zeros((5, 1))))
        assert np.max(np.abs(out.data)) == 0.0

    def test_output_mean_equals_beta(self):
        x = make((6, 4), seed=56)
        beta = ag.Tensor(np.full((6, 1), 0.7))
        out = ag.layer_norm(x, ag.Tensor(np.ones((6, 1))), beta)
        assert out.data.mean(axis=0) == pytest.approx(np.full(4, 0.7), abs=1e-6)

    def test_fd(self):
        def build(params):
            out = ag.layer_norm(params["x"], params["g"], params["b"])
            return (out * out).mean()

        params = {
            "x": make((5, 7), seed=57),
            "g": make((5, 1), seed=58),
            "b": make((5, 1), seed=59),
        }
        assert ag.finite_difference_check(build, params, seed=60) < 1e-4


# ---------------------------------------------------------------------------
# Spectral ops
# ---------------------------------------------------------------------------


class TestSpectralOps:
    def test_rdft_matches_dsp(self):
        rng = np.random.default_rng(61)
        x = rng.standard_normal(64)
        spec = dsp.dft_forward(x)[:33]
        out = ag.rdft(ag.Tensor(x))
        assert out.data[0] == pytest.approx(spec.real, abs=1e-12)
        assert out.data[1] == pytest.approx(spec.imag, abs=1e-12)

    def test_rdft_fd(self):
        def build(params):
            s = ag.rdft(params["x"])
            return (s * s).sum()

        assert ag.finite_difference_check(build, {"x": make((32,), seed=62)}, seed=63) < 1e-6

    def test_irdft_inverts_rdft(self):
        x = make((48,), seed=64, requires_grad=False)
        back = ag.irdft(ag.rdft(x))
        assert np.max(np.abs(back.data - x.data)) < 1e-12

    def test_irdft_fd(self):
        def build(params):
            y = ag.irdft(params["s"])
            return (y * ag.Tensor(np.cos(np.arange(16.0)))).sum()

        assert ag.finite_difference_check(build, {"s": make((2, 9), seed=65)}, seed=66) < 1e-6

    def test_irdft_ignores_dc_nyquist_imag(self):
        s = make((2, 9), seed=67)
        ag.irdft(s).sum().backward()
        assert s.grad[1, 0] == 0.0
        assert s.grad[1, 8] == 0.0

    def test_frame_overlap_add_adjoint_pair(self):
        def build_frame(params):
            return (ag.frame_signal(params["x"], 8, 4) * 0.5).sum()

        def build_ola(params):
            y = ag.overlap_add(params["f"], 4)
            return (y * y).sum()

        assert ag.finite_difference_check(build_frame, {"x": make((32,), seed=68)}, seed=69) < 1e-8
        assert ag.finite_difference_check(build_ola, {"f": make((5, 8), seed=70)}, seed=71) < 1e-6

    def test_frame_matches_stft_framing(self):
        rng = np.random.default_rng(72)
        x = rng.standard_normal(2048)
        frames = ag.frame_signal(ag.Tensor(x), 1024, 256)
        assert frames.shape == ((2048 - 1024) // 256 + 1, 1024)
        assert np.array_equal(frames.data[2], x[512:1536])


# ---------------------------------------------------------------------------
# finite_difference_check itself
# ---------------------------------------------------------------------------


class TestGradcheckHarness:
    def test_linear_function_near_machine_precision(self):
        def build(params):
            return (params["x"] * 3.25).sum()

        assert ag.finite_difference_check(build, {"x": make((20,), seed=73)}, seed=74) < 1e-10

    def test_rejects_float32(self):
        p = ag.Tensor(np.zeros(3, dtype=np.float32), requires_grad=True)
        with pytest.raises(ValueError, match="float64"):
            ag.finite_difference_check(lambda d: (d["x"] * 1.0).sum(), {"x": p})

    def test_subsamples_large_parameters(self):
        def build(params):
            return (params["x"] * params["x"]).sum()

        # 10k coordinates would take forever unsampled; this completes fast.
        # Cancellation noise grows with the summed loss, hence the 1e-4 gate.
        assert ag.finite_difference_check(build, {"x": make((10_000,), seed=75)}, seed=76) < 1e-4
