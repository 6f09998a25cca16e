import numpy as np
import pytest

from hybridsr import nn
from hybridsr.tensor import ShapeMismatchError

from oracles import fd_gradient, max_relative_error, oracle_conv


def _layer(weights, biases):
    weights = np.asarray(weights, dtype=np.float64)
    biases = np.asarray(biases, dtype=np.float64)
    f, k, _, c = weights.shape
    return nn.ConvLayer(c, f, k, weights, biases)


class TestConvForward:
    def test_1x1_kernel_is_affine(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(size=(4, 5, 1))
        layer = _layer(np.full((1, 1, 1, 1), 2.5), [0.75])
        np.testing.assert_allclose(nn.conv_forward(layer, x), 2.5 * x + 0.75, atol=1e-14)

    def test_identity_kernel_reproduces_input(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(size=(6, 6, 1))
        w = np.zeros((1, 3, 3, 1))
        w[0, 1, 1, 0] = 1.0
        layer = _layer(w, [0.0])
        np.testing.assert_allclose(nn.conv_forward(layer, x), x, atol=0)

    def test_center_tap_sums_channels(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(size=(5, 5, 3))
        w = np.zeros((2, 3, 3, 3))
        w[:, 1, 1, :] = 1.0
        layer = _layer(w, [0.0, 0.0])
        out = nn.conv_forward(layer, x)
        expected = x.sum(axis=2)
        for f in range(2):
            np.testing.assert_allclose(out[:, :, f], expected, atol=1e-12)

    def test_random_instance_matches_loop_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(5, 5, 3))
        layer = _layer(rng.normal(size=(2, 3, 3, 3)), rng.normal(size=2))
        out = nn.conv_forward(layer, x)
        expected = oracle_conv(layer.weights, layer.biases, x)
        assert np.abs(out - expected).max() < 1e-12

    def test_many_random_shapes_match_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            h, w = rng.integers(1, 8, size=2)
            cin = int(rng.integers(1, 4))
            f = int(rng.integers(1, 4))
            k = int(rng.choice([1, 3, 5]))
            x = rng.normal(size=(h, w, cin))
            layer = _layer(rng.normal(size=(f, k, k, cin)), rng.normal(size=f))
            out = nn.conv_forward(layer, x)
            expected = oracle_conv(layer.weights, layer.biases, x)
            assert np.abs(out - expected).max() < 1e-12

    def test_channel_mismatch_rejected(self):
        layer = _layer(np.zeros((1, 3, 3, 2)), [0.0])
        with pytest.raises(ShapeMismatchError):
            nn.conv_forward(layer, np.zeros((4, 4, 3)))

    def test_linearity_with_zero_bias(self):
        rng = np.random.default_rng(5)
        layer = _layer(rng.normal(size=(2, 3, 3, 2)), [0.0, 0.0])
        x = rng.normal(size=(6, 6, 2))
        y = rng.normal(size=(6, 6, 2))
        lhs = nn.conv_forward(layer, 2.0 * x - 3.0 * y)
        rhs = 2.0 * nn.conv_forward(layer, x) - 3.0 * nn.conv_forward(layer, y)
        assert np.abs(lhs - rhs).max() < 1e-10


class TestConvBackward:
    def test_zero_upstream_gives_zero_gradients(self):
        rng = np.random.default_rng(6)
        layer = _layer(rng.normal(size=(2, 3, 3, 2)), rng.normal(size=2))
        x = rng.normal(size=(4, 4, 2))
        gin, gw, gb = nn.conv_backward(layer, x, np.zeros((4, 4, 2)))
        assert not gin.any() and not gw.any() and not gb.any()

    def test_1x1_weight_grad_is_channel_correlation(self):
        rng = np.random.default_rng(7)
        layer = _layer(rng.normal(size=(2, 1, 1, 3)), np.zeros(2))
        x = rng.normal(size=(5, 5, 3))
        g = rng.normal(size=(5, 5, 2))
        _, gw, gb = nn.conv_backward(layer, x, g)
        for f in range(2):
            for c in range(3):
                expected = float(np.sum(g[:, :, f] * x[:, :, c]))
                assert abs(gw[f, 0, 0, c] - expected) < 1e-10
        np.testing.assert_allclose(gb, g.sum(axis=(0, 1)), atol=1e-12)

    def test_shape_mismatch_rejected(self):
        layer = _layer(np.zeros((2, 3, 3, 1)), np.zeros(2))
        with pytest.raises(ShapeMismatchError):
            nn.conv_backward(layer, np.zeros((4, 4, 1)), np.zeros((4, 4, 3)))

    @pytest.mark.parametrize("cin,f,k", [(2, 3, 3), (6, 2, 3), (4, 1, 5), (3, 3, 1)])
    def test_all_gradients_match_finite_differences(self, cin, f, k):
        # covers both tap-GEMM orders: channel-growing and channel-shrinking
        rng = np.random.default_rng(8)
        x = rng.normal(size=(4, 5, cin))
        layer = _layer(rng.normal(size=(f, k, k, cin)), rng.normal(size=f))
        probe = rng.normal(size=(4, 5, f))

        def loss():
            return float(np.sum(nn.conv_forward(layer, x) * probe))

        gin, gw, gb = nn.conv_backward(layer, x, probe)
        assert max_relative_error(gw, fd_gradient(loss, layer.weights)) < 1e-6
        assert max_relative_error(gb, fd_gradient(loss, layer.biases)) < 1e-6
        assert max_relative_error(gin, fd_gradient(loss, x)) < 1e-6


class TestMseLoss:
    def test_equal_inputs_give_zero(self):
        x = np.random.default_rng(9).uniform(size=(3, 3, 2))
        loss, grad = nn.mse_loss(x, x.copy())
        assert loss == 0.0
        assert not grad.any()

    def test_scalar_case(self):
        loss, grad = nn.mse_loss(np.full((1, 1, 1), 3.0), np.full((1, 1, 1), 1.0))
        assert loss == pytest.approx(4.0, abs=0)
        assert grad.ravel()[0] == pytest.approx(4.0, abs=0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeMismatchError):
            nn.mse_loss(np.zeros((2, 2, 1)), np.zeros((2, 2, 2)))

    def test_grad_matches_finite_differences(self):
        rng = np.random.default_rng(10)
        p = rng.uniform(size=(3, 4, 2))
        t = rng.uniform(size=(3, 4, 2))
        _, grad = nn.mse_loss(p, t)
        numeric = fd_gradient(lambda: nn.mse_loss(p, t)[0], p)
        np.testing.assert_allclose(grad, numeric, atol=1e-8)


class TestAdam:
    def test_zero_gradient_is_fixed_point(self):
        rng = np.random.default_rng(11)
        params = [rng.normal(size=(3, 3)), rng.normal(size=4)]
        snapshot = [p.copy() for p in params]
        state = nn.adam_init(params)
        for _ in range(5):
            nn.adam_step(state, params, [np.zeros_like(p) for p in params])
        for p, s in zip(params, snapshot):
            np.testing.assert_array_equal(p, s)
        assert state.step_count == 5

    def test_first_step_moves_by_learning_rate(self):
        params = [np.array([1.0])]
        state = nn.adam_init(params, learning_rate=1e-4)
        nn.adam_step(state, params, [np.array([1.0])])
        # bias-corrected first step: delta = lr * 1 / (1 + eps)
        assert abs(params[0][0] - (1.0 - 1e-4)) < 1e-10

    def test_identical_streams_give_identical_trajectories(self):
        rng = np.random.default_rng(12)
        p1 = [rng.normal(size=(2, 2))]
        p2 = [p1[0].copy()]
        s1 = nn.adam_init(p1)
        s2 = nn.adam_init(p2)
        for _ in range(10):
            g = rng.normal(size=(2, 2))
            nn.adam_step(s1, p1, [g])
            nn.adam_step(s2, p2, [g.copy()])
        np.testing.assert_array_equal(p1[0], p2[0])

    def test_length_mismatch_rejected(self):
        params = [np.zeros(2)]
        state = nn.adam_init(params)
        with pytest.raises(ValueError):
            nn.adam_step(state, params, [np.zeros(2), np.zeros(2)])


class TestInitLayer:
    def test_same_seed_is_deterministic(self):
        a = nn.init_layer(3, 8, 5, seed=123)
        b = nn.init_layer(3, 8, 5, seed=123)
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.biases, b.biases)

    def test_weight_std_tracks_fan_in(self):
        layer = nn.init_layer(4, 16, 5, seed=1)
        assert layer.weights.size == 16 * 25 * 4  # 1600 samples
        expected = np.sqrt(2.0 / (25 * 4))
        assert abs(layer.weights.std() - expected) / expected < 0.10

    def test_biases_are_exactly_zero(self):
        layer = nn.init_layer(3, 4, 3, seed=2)
        assert not layer.biases.any()

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            nn.init_layer(3, 4, 4, seed=0)


class TestComplexity:
    def test_single_layer_mac_formula(self):
        d = nn.LayerDims(in_channels=8, kernel_size=3, out_filters=4, out_h=16, out_w=16)
        assert d.mac_count == 8 * 9 * 4 * 16 * 16
        assert d.parameter_count == 4 * (9 * 8 + 1)

    def test_report_totals(self):
        dims = [
            nn.LayerDims(9, 5, 8, 32, 32),
            nn.LayerDims(8, 3, 4, 32, 32),
            nn.LayerDims(4, 3, 3, 32, 32),
        ]
        report = nn.complexity(dims)
        assert report.depth == 3
        assert report.total_parameters == 8 * 226 + 4 * 73 + 3 * 37 == 2211
        assert report.total_macs == sum(d.mac_count for d in dims)
