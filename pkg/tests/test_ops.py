import numpy as np
import pytest

from fsf.errors import DimensionError, ParameterError
from fsf.ops import (
    conv2d,
    conv2d_backward,
    elementwise_mul,
    elementwise_mul_backward,
    instance_norm,
    instance_norm_backward,
    leaky_relu,
    leaky_relu_backward,
    median_filter,
    transposed_conv2d,
)

from oracles import fd_gradient, naive_conv2d, rel_err, sort_median_filter, zero_insert_then_conv


class TestConv2d:
    def test_identity_kernel_passes_input_through(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((2, 6, 6))
        kernels = np.zeros((2, 2, 3, 3))
        kernels[0, 0, 1, 1] = 1.0
        kernels[1, 1, 1, 1] = 1.0
        out = conv2d(x, kernels)
        assert np.array_equal(out, x)

    def test_zero_kernels_with_bias_give_constant(self):
        x = np.ones((1, 4, 5))
        out = conv2d(x, np.zeros((3, 1, 3, 3)), bias=np.array([1.5, -2.0, 0.0]))
        assert np.all(out[0] == 1.5)
        assert np.all(out[1] == -2.0)
        assert np.all(out[2] == 0.0)

    def test_matches_naive_six_loop_oracle(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2, 5, 5))
        k = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        assert rel_err(conv2d(x, k, b), naive_conv2d(x, k, b)) < 1e-12

    def test_integer_inputs_match_oracle_exactly(self):
        rng = np.random.default_rng(2)
        x = rng.integers(-8, 9, size=(2, 6, 7)).astype(np.float64)
        k = rng.integers(-4, 5, size=(2, 2, 3, 3)).astype(np.float64)
        assert np.array_equal(conv2d(x, k), naive_conv2d(x, k))

    def test_channel_mismatch_raises(self):
        with pytest.raises(DimensionError):
            conv2d(np.zeros((2, 4, 4)), np.zeros((1, 3, 3, 3)))

    def test_backward_zero_upstream_gives_zero_grads(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 4, 4))
        k = rng.standard_normal((2, 2, 3, 3))
        gx, gk, gb = conv2d_backward(x, k, np.zeros((2, 4, 4)))
        assert not gx.any() and not gk.any() and not gb.any()

    def test_backward_bias_grad_is_upstream_channel_sum(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((1, 5, 5))
        k = rng.standard_normal((3, 1, 3, 3))
        up = rng.standard_normal((3, 5, 5))
        _, _, gb = conv2d_backward(x, k, up)
        assert rel_err(gb, up.sum(axis=(1, 2))) < 1e-12

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((2, 4, 4))
        k = rng.standard_normal((2, 2, 3, 3))
        b = rng.standard_normal(2)
        up = rng.standard_normal((2, 4, 4))
        gx, gk, gb = conv2d_backward(x, k, up)

        def loss_x(a):
            return float(np.sum(up * (conv2d(a, k) + b[:, None, None])))

        def loss_k(a):
            return float(np.sum(up * (conv2d(x, a) + b[:, None, None])))

        assert rel_err(gx, fd_gradient(loss_x, x.copy())) < 1e-4
        assert rel_err(gk, fd_gradient(loss_k, k.copy())) < 1e-4

    def test_backward_shape_mismatch_raises(self):
        with pytest.raises(DimensionError):
            conv2d_backward(np.zeros((1, 4, 4)), np.zeros((2, 1, 3, 3)), np.zeros((2, 5, 4)))


class TestTransposedConv2d:
    def test_delta_input_stamps_kernel_on_stride2_grid(self):
        x = np.zeros((1, 3, 3))
        x[0, 1, 1] = 1.0
        k = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
        out = transposed_conv2d(x, k)
        # input pixel (1,1) lands at output offset 2*1 - pad for tap (ky,kx)
        expected = np.zeros((1, 6, 6))
        for ky in range(4):
            for kx in range(4):
                yy, xx = 2 + ky - 1, 2 + kx - 1
                if 0 <= yy < 6 and 0 <= xx < 6:
                    expected[0, yy, xx] += k[0, 0, ky, kx]
        assert np.array_equal(out, expected)

    def test_uniform_kernel_constant_input_gives_constant(self):
        x = np.full((1, 5, 5), 2.0)
        k = np.full((1, 1, 4, 4), 0.25)
        out = transposed_conv2d(x, k)
        inner = out[0, 2:-2, 2:-2]
        assert np.allclose(inner, 2.0)

    def test_matches_zero_insert_then_flipped_conv_exactly(self):
        rng = np.random.default_rng(6)
        x = rng.integers(-8, 9, size=(2, 4, 5)).astype(np.float64)
        k = rng.integers(-4, 5, size=(2, 3, 4, 4)).astype(np.float64)
        assert np.array_equal(transposed_conv2d(x, k), zero_insert_then_conv(x, k))

    def test_float_inputs_match_oracle_to_1e12(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((1, 4, 4))
        k = rng.standard_normal((1, 2, 4, 4))
        assert rel_err(transposed_conv2d(x, k), zero_insert_then_conv(x, k)) < 1e-12

    def test_bad_stride_and_shapes_raise(self):
        with pytest.raises(ParameterError):
            transposed_conv2d(np.zeros((1, 2, 2)), np.zeros((1, 1, 4, 4)), stride=3)
        with pytest.raises(DimensionError):
            transposed_conv2d(np.zeros((2, 2, 2)), np.zeros((1, 1, 4, 4)))


class TestMedianFilter:
    def test_constant_image_unchanged(self):
        x = np.full((6, 6), 3.25)
        assert np.array_equal(median_filter(x, 3), x)

    def test_k1_is_identity(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((5, 7))
        assert np.array_equal(median_filter(x, 1), x)

    @pytest.mark.parametrize("k", [1, 3, 5, 7])
    def test_matches_sort_oracle_bit_exactly(self, k):
        rng = np.random.default_rng(k)
        x = rng.standard_normal((9, 9))
        assert np.array_equal(median_filter(x, k), sort_median_filter(x, k))

    def test_even_k_raises(self):
        with pytest.raises(ParameterError):
            median_filter(np.zeros((4, 4)), 2)


class TestLeakyRelu:
    def test_definition(self):
        assert leaky_relu(np.array([1.0]), 0.2)[0] == 1.0
        assert leaky_relu(np.array([-2.0]), 0.2)[0] == pytest.approx(-0.4)

    def test_gradient_away_from_zero(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal(32)
        x = x[np.abs(x) > 1e-3]
        up = rng.standard_normal(x.size)
        grad = leaky_relu_backward(x, up, 0.2)
        fd = fd_gradient(lambda a: float(np.sum(up * leaky_relu(a, 0.2))), x.copy())
        assert rel_err(grad, fd) < 1e-6

    def test_bad_slope_raises(self):
        with pytest.raises(ParameterError):
            leaky_relu(np.zeros(3), 1.5)


class TestInstanceNorm:
    def test_unit_gain_zero_bias_standardizes(self):
        rng = np.random.default_rng(10)
        x = rng.standard_normal((3, 8, 8)) * 4 + 2
        y = instance_norm(x, np.ones(3), np.zeros(3))
        assert np.all(np.abs(y.mean(axis=(1, 2))) <= 1e-6)
        assert np.all(np.abs(y.var(axis=(1, 2)) - 1.0) <= 1e-4)

    def test_constant_channel_maps_to_zero(self):
        x = np.full((1, 4, 4), 7.0)
        y = instance_norm(x, np.ones(1), np.zeros(1))
        assert np.all(y == 0)

    def test_degenerate_spatial_map_raises(self):
        with pytest.raises(ParameterError):
            instance_norm(np.zeros((2, 1, 1)), np.ones(2), np.zeros(2))

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((2, 4, 4))
        gain = rng.standard_normal(2)
        bias = rng.standard_normal(2)
        up = rng.standard_normal((2, 4, 4))
        gx, ggain, gbias = instance_norm_backward(x, gain, bias, up)

        def loss_x(a):
            return float(np.sum(up * instance_norm(a, gain, bias)))

        def loss_g(g):
            return float(np.sum(up * instance_norm(x, g, bias)))

        def loss_b(b):
            return float(np.sum(up * instance_norm(x, gain, b)))

        assert rel_err(gx, fd_gradient(loss_x, x.copy())) < 1e-4
        assert rel_err(ggain, fd_gradient(loss_g, gain.copy())) < 1e-4
        assert rel_err(gbias, fd_gradient(loss_b, bias.copy())) < 1e-4


class TestElementwiseMul:
    def test_ones_is_identity_and_zeros_annihilate(self):
        rng = np.random.default_rng(12)
        a = rng.standard_normal((3, 4))
        assert np.array_equal(elementwise_mul(a, np.ones_like(a)), a)
        assert not elementwise_mul(a, np.zeros_like(a), a).any()

    def test_shape_mismatch_raises(self):
        with pytest.raises(DimensionError):
            elementwise_mul(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_four_way_product_gradient(self):
        rng = np.random.default_rng(13)
        arrays = [rng.standard_normal((3, 3)) for _ in range(4)]
        up = rng.standard_normal((3, 3))
        grads = elementwise_mul_backward(arrays, up)
        for i in range(4):
            def loss(a, i=i):
                args = list(arrays)
                args[i] = a
                return float(np.sum(up * elementwise_mul(*args)))
            assert rel_err(grads[i], fd_gradient(loss, arrays[i].copy())) < 1e-4

    def test_gradient_with_zero_factor(self):
        rng = np.random.default_rng(14)
        arrays = [rng.standard_normal((2, 2)) for _ in range(3)]
        arrays[1] = np.zeros((2, 2))
        up = np.ones((2, 2))
        grads = elementwise_mul_backward(arrays, up)
        assert not grads[0].any() and not grads[2].any()
        assert rel_err(grads[1], arrays[0] * arrays[2]) < 1e-12
