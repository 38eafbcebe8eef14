"""
Tests for the numerics core: tensors, layers, gradients, Adam and weight files.
"""

import math
import struct
from dataclasses import replace

import numpy as np
import pytest

from sspb.core import (
    Adam,
    AdamState,
    Tensor,
    adam_step,
    binary_crossentropy,
    conv2d,
    decode_weights,
    dense,
    dropout,
    encode_weights,
    global_avg_pool,
    gradients,
    load_weights,
    mse_loss,
    relu,
    save_weights,
    sigmoid,
    upsample_nearest,
)
from sspb.core.layers import conv_output_geometry
from sspb.utils.error_handler import (
    IngestionError,
    NumericError,
    ParameterError,
    ShapeError,
    UsageError,
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def direct_conv(x, kernels, bias, stride=1, padding='same'):
    """Nested-loop cross-correlation with TensorFlow-style same padding."""
    height, width, channels = x.shape
    k_h, k_w, _, filters = kernels.shape
    if padding == 'same':
        out_h, out_w = math.ceil(height / stride), math.ceil(width / stride)
        pad_h = max((out_h - 1) * stride + k_h - height, 0)
        pad_w = max((out_w - 1) * stride + k_w - width, 0)
        top, left = pad_h // 2, pad_w // 2
    else:
        out_h, out_w = (height - k_h) // stride + 1, (width - k_w) // stride + 1
        top = left = 0
    out = np.zeros((out_h, out_w, filters))
    for r in range(out_h):
        for c in range(out_w):
            for f in range(filters):
                total = bias[f]
                for i in range(k_h):
                    for j in range(k_w):
                        row, col = r * stride + i - top, c * stride + j - left
                        if 0 <= row < height and 0 <= col < width:
                            for ch in range(channels):
                                total += x[row, col, ch] * kernels[i, j, ch, f]
                out[r, c, f] = total
    return out


def numeric_gradients(build, arrays, h=1e-3):
    """Fourth-order central differences, one element at a time."""
    stencil = ((2, -1.0), (1, 8.0), (-1, -8.0), (-2, 1.0))
    grads = {}
    for name, array in arrays.items():
        grad = np.zeros_like(array)
        for index in np.ndindex(array.shape):
            total = 0.0
            for steps, weight in stencil:
                shifted = array.copy()
                shifted[index] += steps * h
                inputs = {k: Tensor(shifted if k == name else v) for k, v in arrays.items()}
                total += weight * build(inputs).item()
            grad[index] = total / (12 * h)
        grads[name] = grad
    return grads


def max_relative_error(analytic, numeric, floor=1e-5):
    """Largest elementwise |a - n| / max(|a|, |n|); magnitudes under the floor compare absolutely."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))


def check_gradients(build, arrays):
    tensors = {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}
    analytic = gradients(build(tensors), tensors)
    numeric = numeric_gradients(build, arrays)
    for name in arrays:
        assert max_relative_error(analytic[name], numeric[name]) < 1e-4, name


IMAGE_INPUT = {'conv2d', 'global_avg_pool', 'upsample_nearest'}
LAYER_KINDS = (
    'conv2d', 'dense', 'relu', 'sigmoid', 'global_avg_pool', 'upsample_nearest', 'dropout'
)


def pair_input_shape(first, second):
    if first == 'dense':
        return (3, 4)
    if first in IMAGE_INPUT or second in IMAGE_INPUT:
        return (2, 4, 4, 2)
    return (3, 4)


def composable(first, second):
    rank = len(pair_input_shape(first, second))
    if first == 'global_avg_pool':
        rank = 2
    if second in IMAGE_INPUT:
        return rank == 4
    if second == 'dense':
        return rank == 2
    return True


LAYER_PAIRS = [
    (first, second)
    for first in LAYER_KINDS
    for second in LAYER_KINDS
    if composable(first, second)
]


def fan_scaled(rng, shape, fan_in):
    return rng.normal(size=shape) / math.sqrt(fan_in)


def make_layer(kind, shape, rng, prefix):
    """Parameter arrays, apply function and output shape of one layer."""
    if kind == 'conv2d':
        channels = shape[-1]
        arrays = {
            f'{prefix}k': fan_scaled(rng, (3, 3, channels, 2), 9 * channels),
            f'{prefix}b': 0.1 * rng.normal(size=2),
        }
        return (
            arrays,
            lambda h, t: conv2d(h, t[f'{prefix}k'], t[f'{prefix}b']),
            shape[:-1] + (2,),
        )
    if kind == 'dense':
        arrays = {
            f'{prefix}w': fan_scaled(rng, (shape[-1], 3), shape[-1]),
            f'{prefix}b': 0.1 * rng.normal(size=3),
        }
        return arrays, lambda h, t: dense(h, t[f'{prefix}w'], t[f'{prefix}b']), shape[:-1] + (3,)
    if kind == 'global_avg_pool':
        return {}, lambda h, t: global_avg_pool(h), (shape[0], shape[-1])
    if kind == 'upsample_nearest':
        batch, height, width, channels = shape
        return {}, lambda h, t: upsample_nearest(h, 2), (batch, 2 * height, 2 * width, channels)
    if kind == 'dropout':
        mask_seed = int(rng.integers(1 << 31))
        return (
            {},
            lambda h, t: dropout(h, 0.5, training=True, rng=np.random.default_rng(mask_seed)),
            shape,
        )
    activation = {'relu': relu, 'sigmoid': sigmoid}[kind]
    return {}, lambda h, t: activation(h), shape


def clear_of_kinks(values, margin=2e-2):
    # exact zeros come from dropout or an earlier relu and stay put under perturbation
    moving = values[values != 0]
    return moving.size == 0 or float(np.min(np.abs(moving))) > margin


def two_layer_network(first, second, seed):
    """A random two-layer network ending in a loss, with relu inputs away from zero."""
    rng = np.random.default_rng(seed)
    while True:
        shape = pair_input_shape(first, second)
        x = rng.normal(size=shape)
        first_arrays, first_apply, middle = make_layer(first, shape, rng, 'first_')
        second_arrays, second_apply, out_shape = make_layer(second, middle, rng, 'second_')
        arrays = {'x': x, **first_arrays, **second_arrays}
        relu_inputs = []
        if first == 'relu':
            relu_inputs.append(x)
        if second == 'relu':
            relu_inputs.append(first_apply(Tensor(x), arrays).data)
        if all(clear_of_kinks(values) for values in relu_inputs):
            break

    if second == 'sigmoid':
        target = rng.integers(0, 2, size=out_shape).astype(np.float64)
        loss = binary_crossentropy
    else:
        target = rng.normal(size=out_shape)
        loss = mse_loss
    return (lambda t: loss(second_apply(first_apply(t['x'], t), t), target)), arrays


class TestTensor:
    """Test tensor construction and backward passes."""

    def test_default_dtype_is_float32(self):
        assert Tensor([1.0, 2.0]).dtype == np.float32
        assert Tensor(np.ones(3)).dtype == np.float64

    def test_tensor_is_read_only(self):
        tensor = Tensor([1.0, 2.0])
        with pytest.raises(ValueError):
            tensor.data[0] = 5.0

    def test_non_finite_values_rejected(self):
        with pytest.raises(NumericError):
            Tensor([1.0, np.nan])
        with pytest.raises(NumericError):
            Tensor([np.inf])

    def test_backward_requires_scalar(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(UsageError):
            relu(x).backward()

    def test_disconnected_parameter_gets_zero_gradient(self):
        used = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        unused = Tensor(np.ones((2, 2)), requires_grad=True)
        loss = mse_loss(used, np.zeros(2))
        grads = gradients(loss, {'used': used, 'unused': unused})
        np.testing.assert_array_equal(grads['unused'], np.zeros((2, 2)))
        np.testing.assert_allclose(grads['used'], [1.0, 2.0])

    def test_shared_parent_accumulates(self):
        x = Tensor(np.array([3.0]), requires_grad=True)
        doubled = dense(x, np.full((1, 1), 2.0), np.zeros(1))
        loss = mse_loss(dense(x, np.ones((1, 1)), np.zeros(1)), doubled)
        grads = gradients(loss, {'x': x})
        # loss = (x - 2x)^2, so d/dx = 2x through both branches
        np.testing.assert_allclose(grads['x'], [6.0])

    def test_non_finite_operation_output(self):
        huge = Tensor(np.array([1e30], dtype=np.float32))
        with pytest.raises(NumericError):
            mse_loss(huge, np.zeros(1, dtype=np.float32))


class TestConv2D:
    """Test convolution forward results."""

    def test_scalar_kernel_doubles(self, rng):
        x = rng.normal(size=(3, 3, 1))
        out = conv2d(x, np.full((1, 1, 1, 1), 2.0), np.zeros(1))
        np.testing.assert_allclose(out.data, 2 * x.astype(np.float32), rtol=1e-6)

    def test_valid_sum(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(2, 2, 1)
        out = conv2d(x, np.ones((2, 2, 1, 1)), np.zeros(1), padding='valid')
        assert out.shape == (1, 1, 1)
        assert out.item() == pytest.approx(10.0)

    @pytest.mark.parametrize("seed", range(25))
    def test_direct_oracle(self, seed):
        rng = np.random.default_rng(seed)
        height, width = (int(v) for v in rng.integers(3, 8, size=2))
        channels, filters = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        kernel = int(rng.choice([1, 2, 3]))
        stride = int(rng.integers(1, 3))
        padding = str(rng.choice(['same', 'valid']))
        x = rng.normal(size=(height, width, channels))
        kernels = rng.normal(size=(kernel, kernel, channels, filters))
        bias = rng.normal(size=filters)
        out = conv2d(x, kernels, bias, stride=stride, padding=padding)
        np.testing.assert_allclose(
            out.data, direct_conv(x, kernels, bias, stride, padding), atol=1e-9
        )

    def test_batch_matches_single(self, rng):
        x = rng.normal(size=(2, 6, 6, 3))
        kernels = rng.normal(size=(3, 3, 3, 2))
        bias = np.zeros(2)
        batched = conv2d(x, kernels, bias).data
        for i in range(2):
            np.testing.assert_allclose(batched[i], conv2d(x[i], kernels, bias).data, atol=1e-6)

    def test_linear_in_input(self, rng):
        x = rng.normal(size=(6, 6, 2))
        kernels = rng.normal(size=(3, 3, 2, 3))
        a = 2.5
        scaled = conv2d(a * x, kernels, np.zeros(3)).data
        np.testing.assert_allclose(scaled, a * conv2d(x, kernels, np.zeros(3)).data, atol=1e-5)

    def test_channel_mismatch(self, rng):
        with pytest.raises(ShapeError):
            conv2d(rng.normal(size=(4, 4, 2)), np.ones((3, 3, 3, 1)), np.zeros(1))

    @pytest.mark.parametrize("size,stride,expected", [
        (64, 2, (32, 0, 1)),
        (5, 1, (5, 1, 1)),
        (7, 2, (4, 1, 1)),
    ])
    def test_same_geometry(self, size, stride, expected):
        assert conv_output_geometry(size, 3, stride, 'same') == expected


class TestPoolingAndUpsampling:
    """Test global pooling and nearest upsampling."""

    def test_constant_pool(self):
        out = global_avg_pool(np.full((4, 4, 3), 7.0))
        np.testing.assert_allclose(out.data, [7.0, 7.0, 7.0])

    def test_analytic_mean(self):
        out = global_avg_pool(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(2, 2, 1))
        np.testing.assert_allclose(out.data, [2.5])

    @pytest.mark.parametrize("seed", range(25))
    def test_naive_mean(self, seed):
        rng = np.random.default_rng(seed)
        height, width, channels = (int(v) for v in rng.integers(1, 6, size=3))
        x = rng.normal(size=(height, width, channels))
        expected = [
            sum(x[r, c, ch] for r in range(height) for c in range(width)) / (height * width)
            for ch in range(channels)
        ]
        np.testing.assert_allclose(global_avg_pool(x).data, expected, atol=1e-12)

    def test_upsample_identity(self, rng):
        x = rng.normal(size=(3, 3, 2))
        np.testing.assert_array_equal(upsample_nearest(x, 1).data, x)

    def test_upsample_definition(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(2, 2, 1)
        expected = np.array([
            [1, 1, 2, 2],
            [1, 1, 2, 2],
            [3, 3, 4, 4],
            [3, 3, 4, 4],
        ], dtype=np.float32)
        np.testing.assert_array_equal(upsample_nearest(x, 2).data[..., 0], expected)

    def test_upsample_factor_zero(self):
        with pytest.raises(ParameterError):
            upsample_nearest(np.ones((2, 2, 1)), 0)

    def test_pool_of_upsample(self, rng):
        x = rng.normal(size=(3, 3, 4))
        np.testing.assert_allclose(
            global_avg_pool(upsample_nearest(x, 3)).data, global_avg_pool(x).data, atol=1e-6
        )


class TestDense:
    """Test the affine layer."""

    def test_identity(self, rng):
        x = rng.normal(size=4)
        np.testing.assert_allclose(dense(x, np.eye(4), np.zeros(4)).data, x, rtol=1e-6)

    def test_zero_weights(self):
        bias = np.array([1.0, -2.0, 3.0])
        np.testing.assert_allclose(dense(np.ones(4), np.zeros((4, 3)), bias).data, bias)

    @pytest.mark.parametrize("seed", range(25))
    def test_naive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n_in, n_out = (int(v) for v in rng.integers(1, 7, size=2))
        x, w, b = rng.normal(size=n_in), rng.normal(size=(n_in, n_out)), rng.normal(size=n_out)
        expected = [sum(x[i] * w[i, j] for i in range(n_in)) + b[j] for j in range(n_out)]
        np.testing.assert_allclose(dense(x, w, b).data, expected, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            dense(np.ones(3), np.ones((4, 2)), np.zeros(2))


class TestDropout:
    """Test inverted dropout."""

    def test_rate_zero_training(self, rng):
        x = Tensor(rng.normal(size=10))
        assert dropout(x, 0.0, training=True, rng=rng) is x

    def test_inference_identity(self, rng):
        x = Tensor(rng.normal(size=10))
        assert dropout(x, 0.9, training=False) is x

    def test_expected_value(self):
        out = dropout(np.ones(100_000), 0.5, training=True, rng=np.random.default_rng(7))
        assert abs(out.data.mean() - 1.0) < 0.02
        assert set(np.unique(out.data)) <= {0.0, 2.0}

    @pytest.mark.parametrize("rate", [-0.1, 1.0, 1.5])
    def test_invalid_rate(self, rate):
        with pytest.raises(ParameterError):
            dropout(np.ones(3), rate, training=False)

    def test_training_needs_generator(self):
        with pytest.raises(UsageError):
            dropout(np.ones(3), 0.5, training=True)


class TestLosses:
    """Test mean squared error and cross-entropy."""

    def test_mse_zero(self, rng):
        x = rng.normal(size=5)
        assert mse_loss(x, x).item() == 0.0

    def test_mse_unit(self):
        assert mse_loss([1.0, 1.0], [0.0, 0.0]).item() == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(25))
    def test_mse_naive(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 30))
        a, b = rng.normal(size=n), rng.normal(size=n)
        expected = sum((a[i] - b[i]) ** 2 for i in range(n)) / n
        assert mse_loss(a, b).item() == pytest.approx(expected, rel=1e-12)

    def test_mse_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mse_loss(np.ones(3), np.ones(4))

    def test_bce_value(self):
        value = binary_crossentropy(np.array([0.8, 0.3]), np.array([1.0, 0.0])).item()
        assert value == pytest.approx(-(math.log(0.8) + math.log(0.7)) / 2)


class TestGradients:
    """Finite-difference checks of every layer kind in 64-bit mode."""

    def test_conv2d(self, rng):
        arrays = {
            'x': rng.normal(size=(2, 4, 4, 2)),
            'k': rng.normal(size=(3, 3, 2, 3)),
            'b': rng.normal(size=3),
        }
        target = rng.normal(size=(2, 4, 4, 3))
        check_gradients(lambda t: mse_loss(conv2d(t['x'], t['k'], t['b']), target), arrays)

    def test_strided_conv2d(self, rng):
        arrays = {'x': rng.normal(size=(5, 5, 2)), 'k': rng.normal(size=(3, 3, 2, 2))}
        target = rng.normal(size=(3, 3, 2))
        check_gradients(
            lambda t: mse_loss(conv2d(t['x'], t['k'], np.zeros(2), stride=2), target), arrays
        )

    def test_dense(self, rng):
        arrays = {
            'x': rng.normal(size=(3, 4)),
            'w': rng.normal(size=(4, 2)),
            'b': rng.normal(size=2),
        }
        target = rng.normal(size=(3, 2))
        check_gradients(lambda t: mse_loss(dense(t['x'], t['w'], t['b']), target), arrays)

    def test_relu(self, rng):
        x = rng.uniform(0.1, 1.0, size=(3, 3)) * rng.choice([-1.0, 1.0], size=(3, 3))
        target = rng.normal(size=(3, 3))
        check_gradients(lambda t: mse_loss(relu(t['x']), target), {'x': x})

    def test_sigmoid(self, rng):
        target = rng.uniform(size=6)
        check_gradients(
            lambda t: mse_loss(sigmoid(t['x']), target), {'x': rng.normal(size=6)}
        )

    def test_global_avg_pool(self, rng):
        target = rng.normal(size=(2, 3))
        check_gradients(
            lambda t: mse_loss(global_avg_pool(t['x']), target),
            {'x': rng.normal(size=(2, 3, 3, 3))}
        )

    def test_upsample(self, rng):
        target = rng.normal(size=(4, 6, 2))
        check_gradients(
            lambda t: mse_loss(upsample_nearest(t['x'], 2), target),
            {'x': rng.normal(size=(2, 3, 2))}
        )

    def test_dropout(self, rng):
        target = rng.normal(size=8)
        check_gradients(
            lambda t: mse_loss(
                dropout(t['x'], 0.5, training=True, rng=np.random.default_rng(3)), target
            ),
            {'x': rng.normal(size=8)}
        )

    def test_binary_crossentropy(self, rng):
        target = np.array([0.0, 1.0, 1.0, 0.0])
        check_gradients(
            lambda t: binary_crossentropy(t['p'], target),
            {'p': rng.uniform(0.1, 0.9, size=4)}
        )

    def test_classifier_head_stack(self, rng):
        arrays = {
            'x': rng.normal(size=(2, 4, 4, 3)),
            'w': rng.normal(size=(3, 1)),
            'b': rng.normal(size=1),
        }
        target = np.array([[1.0], [0.0]])
        check_gradients(
            lambda t: mse_loss(sigmoid(dense(global_avg_pool(t['x']), t['w'], t['b'])), target),
            arrays
        )

    @pytest.mark.parametrize("seed", range(20))
    @pytest.mark.parametrize(
        "first,second", LAYER_PAIRS, ids=[f"{a}-{b}" for a, b in LAYER_PAIRS]
    )
    def test_two_layer_networks(self, first, second, seed):
        build, arrays = two_layer_network(first, second, seed)
        check_gradients(build, arrays)

    @pytest.mark.parametrize("seed", range(25))
    def test_closed_form_linear_fit(self, seed):
        w, x, y = np.random.default_rng(seed).normal(size=3)
        weights = Tensor(np.array([[w]]), requires_grad=True)
        loss = mse_loss(dense(np.array([x]), weights, np.zeros(1)), np.array([y]))
        # d/dw (wx - y)^2 = 2x(wx - y)
        grad = gradients(loss, {'w': weights})['w']
        assert grad[0, 0] == pytest.approx(2 * x * (w * x - y), rel=1e-9, abs=1e-12)


def reference_adam(param, grads, lr=0.01, beta1=0.9, beta2=0.999, epsilon=1e-7):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        param = param - lr * m_hat / (math.sqrt(v_hat) + epsilon)
    return param


class TestAdam:
    """Test the Adam update."""

    def test_zero_gradient_keeps_params(self):
        params = {'w': np.array([1.0, -2.0])}
        state = AdamState.fresh(params)
        new_params, new_state = adam_step(params, {'w': np.zeros(2)}, state)
        np.testing.assert_array_equal(new_params['w'], params['w'])
        assert new_state.t == 1

    @pytest.mark.parametrize("t", [1, 5, 100])
    def test_zero_gradient_with_zero_moments_at_later_steps(self, t):
        params = {'w': np.array([1.0, -2.0])}
        state = replace(AdamState.fresh(params), t=t)
        new_params, new_state = adam_step(params, {'w': np.zeros(2)}, state)
        np.testing.assert_array_equal(new_params['w'], params['w'])
        assert new_state.t == t + 1

    def test_zero_gradient_after_update_follows_momentum(self):
        params = {'w': np.array([1.0])}
        params, state = adam_step(params, {'w': np.array([0.5])}, AdamState.fresh(params))
        moved, _ = adam_step(params, {'w': np.zeros(1)}, state)
        assert moved['w'][0] < params['w'][0]
        assert moved['w'][0] == pytest.approx(reference_adam(1.0, [0.5, 0.0]), abs=1e-9)

    def test_first_step_closed_form(self):
        params = {'w': np.array([1.0])}
        new_params, _ = adam_step(params, {'w': np.array([0.5])}, AdamState.fresh(params))
        assert new_params['w'][0] == pytest.approx(0.99, abs=1e-6)

    def test_two_steps_against_reference(self):
        params = {'w': np.array([1.0])}
        optimizer = Adam(params)
        for _ in range(2):
            params = optimizer.step(params, {'w': np.array([0.5])})
        assert params['w'][0] == pytest.approx(reference_adam(1.0, [0.5, 0.5]), abs=1e-7)
        assert optimizer.state.t == 2

    def test_inputs_untouched(self):
        params = {'w': np.array([1.0])}
        state = AdamState.fresh(params)
        adam_step(params, {'w': np.array([0.5])}, state)
        assert state.t == 0
        assert params['w'][0] == 1.0

    def test_shape_mismatch(self):
        params = {'w': np.ones(2)}
        with pytest.raises(ShapeError):
            adam_step(params, {'w': np.ones(3)}, AdamState.fresh(params))

    def test_invalid_hyperparameters(self):
        with pytest.raises(ParameterError):
            AdamState.fresh({'w': np.ones(1)}, lr=0.0)


class TestWeightFiles:
    """Test the binary weight codec."""

    @pytest.fixture
    def tensors(self, rng):
        return {
            'encoder/stage0_conv/kernel': rng.normal(size=(3, 3, 3, 4)).astype(np.float32),
            'encoder/stage0_conv/bias': np.zeros(4, dtype=np.float32),
            'scalar': np.array(1.5, dtype=np.float32),
        }

    def test_header_layout(self, tensors):
        payload = encode_weights(tensors)
        assert payload[:4] == b'SSPW'
        assert struct.unpack('<II', payload[4:12]) == (1, 3)

    def test_decode_preserves_order_and_values(self, tensors):
        decoded = decode_weights(encode_weights(tensors))
        assert list(decoded) == list(tensors)
        for name, array in tensors.items():
            assert decoded[name].shape == array.shape
            np.testing.assert_array_equal(decoded[name], array)

    def test_save_load_save_is_byte_identical(self, tensors, tmp_path):
        first, second = tmp_path / 'a.sspw', tmp_path / 'b.sspw'
        save_weights(first, tensors)
        save_weights(second, load_weights(first))
        assert first.read_bytes() == second.read_bytes()

    def test_bad_magic(self, tensors):
        with pytest.raises(IngestionError):
            decode_weights(b'XXXX' + encode_weights(tensors)[4:])

    def test_truncated(self, tensors):
        with pytest.raises(IngestionError):
            decode_weights(encode_weights(tensors)[:-3])

    def test_trailing_bytes(self, tensors):
        with pytest.raises(IngestionError):
            decode_weights(encode_weights(tensors) + b'\x00')

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError):
            load_weights(tmp_path / 'missing.sspw')
