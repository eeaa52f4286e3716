import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eyal.policy_net import (
    Architecture,
    OutputMode,
    Policy,
    act,
    forward,
    init_params,
    param_count,
    select_action,
    unflatten,
)


def brute_count(arch):
    widths = [arch.input_dim, *arch.hidden_dims, arch.output_dim]
    total = 0
    for a, b in zip(widths, widths[1:]):
        total += a * b  # weights
        total += b  # biases
    return total


@pytest.mark.parametrize(
    "dims, expected",
    [((1, [1], 1), 4), ((4, [256, 256], 2), 67586), ((2, [3], 2), 17)],
)
def test_param_count_examples(dims, expected):
    assert param_count(Architecture(dims[0], dims[1], dims[2])) == expected


def test_default_architecture_is_two_256_tanh_layers():
    arch = Architecture(input_dim=4)
    assert arch.hidden_dims == (256, 256)
    assert arch.hidden_activation == "tanh"


@pytest.mark.parametrize("bad", [dict(hidden_dims=()), dict(hidden_dims=(0,)), dict(input_dim=0)])
def test_invalid_architecture_rejected(bad):
    kwargs = dict(input_dim=3, hidden_dims=(4,), output_dim=2) | bad
    with pytest.raises(ValueError):
        Architecture(**kwargs)


def test_param_count_matches_init_length_for_random_architectures():
    rng = np.random.default_rng(7)
    for _ in range(100):
        arch = Architecture(
            int(rng.integers(1, 9)),
            tuple(int(h) for h in rng.integers(1, 17, size=rng.integers(1, 4))),
            int(rng.integers(1, 6)),
        )
        params = init_params(arch, rng)
        assert params.shape == (param_count(arch),) == (brute_count(arch),)


def test_init_bounds_per_layer():
    arch = Architecture(4, (256, 256), 2)
    params = init_params(arch, np.random.default_rng(0))
    (w1, b1), (w2, b2), (w3, b3) = unflatten(arch, params)
    assert np.abs(w1).max() <= 0.5 and np.abs(b1).max() <= 0.5
    assert np.abs(w2).max() <= 1 / 16 and np.abs(w3).max() <= 1 / 16
    assert np.all(np.isfinite(params))


def test_init_first_layer_mean_near_zero():
    arch = Architecture(4, (25_000,), 1)
    w1, b1 = unflatten(arch, init_params(arch, np.random.default_rng(3)))[0]
    draws = np.concatenate([w1.ravel(), b1])
    assert draws.size >= 100_000
    assert abs(draws.mean()) < 0.01


def test_init_is_deterministic():
    arch = Architecture(4, (8, 8), 2)
    a = init_params(arch, np.random.default_rng(11))
    b = init_params(arch, np.random.default_rng(11))
    assert a.tobytes() == b.tobytes()


def test_zero_params_give_zero_output():
    arch = Architecture(4, (256, 256), 2)
    out = forward(arch, np.zeros(param_count(arch), dtype=np.float32), np.array([0.3, -1, 2, 0.1]))
    assert np.all(out == 0)


def test_hand_evaluated_two_layer_network():
    arch = Architecture(1, (1,), 1, output_mode=OutputMode.CONTINUOUS_BOUNDED)
    params = np.array([2.0, 0.0, 1.0, 0.5], dtype=np.float32)  # W1, b1, W2, b2
    out = forward(arch, params, np.array([1.0]))
    assert out[0] == pytest.approx(math.tanh(math.tanh(2.0) + 0.5), abs=1e-6)
    assert out[0] == pytest.approx(0.898432, abs=1e-6)


def test_discrete_mode_leaves_output_affine():
    arch = Architecture(1, (1,), 1, output_mode=OutputMode.DISCRETE_ARGMAX)
    params = np.array([2.0, 0.0, 3.0, 0.5], dtype=np.float32)
    assert forward(arch, params, np.array([1.0]))[0] == pytest.approx(3 * math.tanh(2) + 0.5, rel=1e-6)


def test_batch_forward_matches_rows():
    arch = Architecture(4, (16, 16), 2)
    rng = np.random.default_rng(5)
    params = init_params(arch, rng)
    obs = rng.normal(size=(7, 4))
    batch = forward(arch, params, obs)
    for i in range(7):
        np.testing.assert_allclose(batch[i], forward(arch, params, obs[i]), rtol=1e-5, atol=1e-6)


@pytest.mark.parametrize("obs", [np.zeros(3), np.zeros(5), np.zeros((2, 2, 4))])
def test_forward_rejects_bad_observation(obs):
    arch = Architecture(4, (4,), 2)
    with pytest.raises(ValueError):
        forward(arch, np.zeros(param_count(arch), dtype=np.float32), obs)


def test_forward_rejects_wrong_param_length():
    arch = Architecture(4, (4,), 2)
    with pytest.raises(ValueError):
        forward(arch, np.zeros(param_count(arch) + 1, dtype=np.float32), np.zeros(4))


@pytest.mark.parametrize(
    "outputs, expected",
    [([0.1, 0.9, 0.3], 1), ([0.5, 0.5], 0), ([-1.0, -2.0, -1.0], 0)],
)
def test_discrete_argmax(outputs, expected):
    assert select_action(np.array(outputs), OutputMode.DISCRETE_ARGMAX) == expected


def test_continuous_action_is_passthrough():
    out = np.array([-0.2, 0.7])
    np.testing.assert_array_equal(select_action(out, OutputMode.CONTINUOUS_BOUNDED), out)


def test_policy_callable_matches_act():
    arch = Architecture(4, (8,), 3, output_mode=OutputMode.DISCRETE_ARGMAX)
    params = init_params(arch, np.random.default_rng(1))
    obs = np.array([0.1, 0.2, -0.3, 0.4])
    assert Policy(arch, params)(obs) == act(arch, params, obs)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.1, 100))
def test_continuous_outputs_bounded_and_finite(seed, scale):
    rng = np.random.default_rng(seed)
    arch = Architecture(4, (16, 16), 2)
    params = (init_params(arch, rng) * scale).astype(np.float32)
    out = forward(arch, params, rng.normal(scale=scale, size=(10, 4)))
    assert np.all(np.isfinite(out))
    assert np.all(np.abs(out) <= 1.0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_forward_is_deterministic(seed):
    rng = np.random.default_rng(seed)
    arch = Architecture(4, (32, 32), 2)
    params = init_params(arch, rng)
    obs = rng.normal(size=4)
    assert forward(arch, params, obs).tobytes() == forward(arch, params, obs).tobytes()


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-100, 100))
def test_argmax_invariant_to_constant_shift(seed, shift):
    logits = np.random.default_rng(seed).normal(size=6)
    # Shifting by a constant preserves order unless rounding merges two values.
    shifted = logits + shift
    if len(set(shifted.tolist())) == len(shifted):
        assert select_action(shifted, "discrete_argmax") == select_action(logits, "discrete_argmax")
