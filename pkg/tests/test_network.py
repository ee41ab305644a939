# tests/test_network.py

import numpy as np
import pytest
from scipy.special import expit

from gtn.core.exceptions import UsageError
from gtn.engine import layers
from gtn.engine.gradcheck import finite_difference_gradient, max_relative_error
from gtn.engine.tape import Tape, backward
from gtn.model.config import GtnConfig
from gtn.model.network import (
    audit_parameter_names,
    build_gtn,
    clear_noise,
    copy_parameters,
    gtn_forward,
    plan_levels,
    record_step,
    set_level_noise,
    state_leaves,
    tower_name,
)


def randomize(net, rng, scale=0.4):
    """Replaces every parameter with N(0, scale^2) values, biases included."""
    for name, value in net.params.items():
        net.params.set(name, rng.normal(scale=scale, size=value.shape))
    return net


def observation(side, rng):
    return rng.uniform(0.0, 1.0, size=(1, side, side))


class ZeroRng:
    def standard_normal(self, size):
        return np.zeros(size)


def test_default_topology_flattens_to_lstm_size():
    config = GtnConfig()
    plans = plan_levels(config)
    assert plans[0].flatten_width == 288 == config.lstm_size


def test_level_sides_follow_the_first_conv_of_the_level_below():
    plans = plan_levels(GtnConfig())
    assert [p.input_side for p in plans] == [42, 21, 11, 6]
    assert plans[1].conv_sides == [11, 6, 3, 2]
    assert [p.flatten_width for p in plans] == [288, 128, 32, 32]


def test_single_level_network_has_one_tower():
    config = GtnConfig(levels=1, layers=4)
    names = audit_parameter_names(config)
    assert plan_levels(config)[0].flatten_width == 288
    assert [n for n in names if n.startswith("concat.T")] == ["concat.T1"]
    net = build_gtn(config, seed=0)
    assert net.params[tower_name(1)].shape == (288, 288)


def test_tapered_towers(tiny_config):
    config = tiny_config.with_changes(level_layers=[2, 1])
    plans = plan_levels(config)
    assert [len(p.conv_sides) for p in plans] == [2, 1]
    assert "conv.2.2.weight" not in audit_parameter_names(config)


def test_level_layers_must_match_levels(tiny_config):
    with pytest.raises(ValueError):
        tiny_config.with_changes(level_layers=[1, 1, 1])


def test_same_seed_gives_identical_parameters(tiny_config):
    a = build_gtn(tiny_config, seed=3)
    b = build_gtn(tiny_config, seed=3)
    c = build_gtn(tiny_config, seed=4)
    np.testing.assert_array_equal(a.params.flat(), b.params.flat())
    assert a.params.max_abs_diff(c.params) > 0


def test_forget_gate_bias_starts_at_one(tiny_net):
    s = tiny_net.config.lstm_size
    bias = tiny_net.params["lstm.1.bias"]
    np.testing.assert_array_equal(bias[s : 2 * s], np.ones(s))
    np.testing.assert_array_equal(bias[:s], np.zeros(s))


def test_forward_outputs(tiny_net, rng):
    result = gtn_forward(tiny_net, observation(10, rng))
    assert sorted(result.policies) == [2, 4, 6]
    for size, policy in result.policies.items():
        assert policy.shape == (size,)
        assert policy.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(result.hidden >= 0)
    assert len(result.new_recurrent) == 2
    assert len(result.level_activations) == 2
    assert isinstance(result.value, float)


def test_forward_leaves_recurrent_state_alone(tiny_net, rng):
    before = [s.copy() for s in tiny_net.recurrent]
    gtn_forward(tiny_net, observation(10, rng))
    for old, new in zip(before, tiny_net.recurrent):
        np.testing.assert_array_equal(old.hidden, new.hidden)


def test_wrong_recurrent_count_is_usage_error(tiny_net, rng):
    with pytest.raises(UsageError):
        gtn_forward(tiny_net, observation(10, rng), tiny_net.recurrent[:1])


def test_wrong_observation_side_is_usage_error(tiny_net, rng):
    with pytest.raises(UsageError):
        gtn_forward(tiny_net, observation(12, rng))


def test_identity_tower_passes_nonnegative_activation_through(rng):
    config = GtnConfig(levels=1, layers=1, channels=2, lstm_size=6, concat_size=6, input_side=8, action_space_sizes=[2])
    net = build_gtn(config, seed=1)
    s = config.lstm_size
    # candidate gate fixed at tanh(1) > 0 keeps the cell and hidden state positive
    w_x = net.params["lstm.1.w_x"].copy()
    w_x[:, 3 * s :] = 0.0
    w_h = net.params["lstm.1.w_h"].copy()
    w_h[:, 3 * s :] = 0.0
    bias = net.params["lstm.1.bias"].copy()
    bias[3 * s :] = 1.0
    net.params.set("lstm.1.w_x", w_x)
    net.params.set("lstm.1.w_h", w_h)
    net.params.set("lstm.1.bias", bias)
    net.params.set(tower_name(1), np.eye(s))

    result = gtn_forward(net, observation(8, rng))
    assert np.all(result.level_activations[0] > 0)
    np.testing.assert_array_equal(result.hidden, result.level_activations[0])


def test_zeroed_towers_isolate_one_level(tiny_net, rng):
    randomize(tiny_net, rng)
    tiny_net.params.set(tower_name(1), np.zeros_like(tiny_net.params[tower_name(1)]))
    obs = observation(10, rng)
    clean = gtn_forward(tiny_net, obs)

    # conv.1.2 feeds level 1 only; level 2 taps conv.1.1
    tiny_net.params.set("conv.1.2.weight", rng.normal(size=tiny_net.params["conv.1.2.weight"].shape))
    perturbed = gtn_forward(tiny_net, obs)
    assert not np.array_equal(clean.level_activations[0], perturbed.level_activations[0])
    np.testing.assert_array_equal(clean.level_activations[1], perturbed.level_activations[1])
    for size in clean.policies:
        np.testing.assert_array_equal(clean.policies[size], perturbed.policies[size])
    assert clean.value == perturbed.value


def test_observation_pixels_reach_every_level(tiny_net, rng):
    randomize(tiny_net, rng)
    for m, n in [(1, 1), (1, 2), (2, 1), (2, 2)]:
        tiny_net.params.set(f"conv.{m}.{n}.bias", np.full(3, 0.5))
    obs = observation(10, rng)
    clean = gtn_forward(tiny_net, obs)
    obs[0, 4, 4] += 1.0
    changed = gtn_forward(tiny_net, obs)
    for m in range(2):
        assert not np.allclose(clean.level_activations[m], changed.level_activations[m])


def _reference_conv(x, w, b, stride=2):
    c_in, side, _ = x.shape
    k = w.shape[2]
    out_side = -(-side // stride)
    before = max((out_side - 1) * stride + k - side, 0) // 2
    out = np.zeros((w.shape[0], out_side, out_side))
    for o in range(w.shape[0]):
        for i in range(out_side):
            for j in range(out_side):
                acc = b[o]
                for ci in range(c_in):
                    for di in range(k):
                        for dj in range(k):
                            r, c = i * stride + di - before, j * stride + dj - before
                            if 0 <= r < side and 0 <= c < side:
                                acc += x[ci, r, c] * w[o, ci, di, dj]
                out[o, i, j] = acc
    return out


def _reference_lstm(x, h, c, w_x, w_h, b):
    s = h.shape[0]
    z = x @ w_x + h @ w_h + b
    i, f, o, g = expit(z[:s]), expit(z[s : 2 * s]), expit(z[2 * s : 3 * s]), np.tanh(z[3 * s :])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def test_forward_matches_scalar_reference(rng):
    config = GtnConfig(levels=2, layers=1, channels=2, lstm_size=5, concat_size=4, input_side=6, action_space_sizes=[2, 3])
    net = randomize(build_gtn(config, seed=0), rng)
    p = net.params
    obs = observation(6, rng)
    h0 = [rng.normal(size=5) for _ in range(2)]
    c0 = [rng.normal(size=5) for _ in range(2)]
    for m in range(2):
        net.recurrent[m].hidden[:] = h0[m]
        net.recurrent[m].cell[:] = c0[m]

    c11 = np.maximum(_reference_conv(obs, p["conv.1.1.weight"], p["conv.1.1.bias"]), 0)
    c21 = np.maximum(_reference_conv(c11, p["conv.2.1.weight"], p["conv.2.1.bias"]), 0)
    a = []
    for m, features in [(1, c11), (2, c21)]:
        h, _ = _reference_lstm(
            features.ravel(), h0[m - 1], c0[m - 1], p[f"lstm.{m}.w_x"], p[f"lstm.{m}.w_h"], p[f"lstm.{m}.bias"]
        )
        a.append(h)
    hidden = np.maximum(a[0] @ p["concat.T1"] + a[1] @ p["concat.T2"] + p["concat.bias"], 0)

    result = gtn_forward(net, obs)
    np.testing.assert_allclose(result.hidden, hidden, atol=1e-10)
    for size in (2, 3):
        logits = hidden @ p[f"policy.{size}.weight"] + p[f"policy.{size}.bias"]
        expected = np.exp(logits - logits.max()) / np.exp(logits - logits.max()).sum()
        np.testing.assert_allclose(result.policies[size], expected, atol=1e-10)
    value = hidden @ p["value.weight"] + p["value.bias"]
    assert result.value == pytest.approx(float(value[0]), abs=1e-10)


def test_single_level_equals_plain_conv_lstm_actor_critic(rng):
    config = GtnConfig(levels=1, layers=2, channels=3, lstm_size=6, concat_size=5, input_side=10, action_space_sizes=[4])
    net = randomize(build_gtn(config, seed=2), rng)
    p = net.params
    obs = observation(10, rng)

    x, _ = layers.conv2d_forward(obs, p["conv.1.1.weight"], p["conv.1.1.bias"], 2)
    x = np.maximum(x, 0)
    x, _ = layers.conv2d_forward(x, p["conv.1.2.weight"], p["conv.1.2.bias"], 2)
    x = np.maximum(x, 0)
    out, _ = layers.lstm_step(x, net.recurrent[0], p["lstm.1.w_x"], p["lstm.1.w_h"], p["lstm.1.bias"])
    hidden = np.maximum(out @ p["concat.T1"] + p["concat.bias"], 0)

    result = gtn_forward(net, obs)
    np.testing.assert_allclose(result.policies[4], layers.softmax(hidden @ p["policy.4.weight"] + p["policy.4.bias"]), atol=1e-12)
    assert result.value == pytest.approx(float((hidden @ p["value.weight"] + p["value.bias"])[0]), abs=1e-12)


def test_value_gradient_reaches_every_level(tiny_net, rng):
    randomize(tiny_net, rng)
    obs = observation(10, rng)

    def value():
        return gtn_forward(tiny_net, obs).value

    tape = Tape(tiny_net.params)
    nodes = record_step(tiny_net, tape, obs, state_leaves(tape, tiny_net.recurrent))
    tiny_net.params.zero_grad()
    backward(tape, {nodes.value: np.ones(1)})

    names = ["conv.1.1.weight", "conv.1.2.bias", "conv.2.1.weight", "conv.2.2.weight",
             "lstm.1.w_x", "lstm.2.bias", "concat.T2", "value.weight"]
    numeric = finite_difference_gradient(value, tiny_net.params, names=names)
    assert max_relative_error(tiny_net.params.grads(), numeric, floor=1e-5) < 1e-4
    for name in names:
        assert np.any(tiny_net.params.grad(name) != 0)


def test_zero_seed_leaves_parameter_gradients_zero(tiny_net, rng):
    tape = Tape(tiny_net.params)
    nodes = record_step(tiny_net, tape, observation(10, rng), state_leaves(tape, tiny_net.recurrent))
    tiny_net.params.zero_grad()
    backward(tape, {nodes.value: np.zeros(1)})
    for name in tiny_net.params.names():
        assert not np.any(tiny_net.params.grad(name)), name


def test_backward_needs_a_recorded_forward(tiny_net):
    with pytest.raises(UsageError):
        backward(Tape(tiny_net.params), {})


def test_backward_rejects_misshaped_seed(tiny_net, rng):
    tape = Tape(tiny_net.params)
    nodes = record_step(tiny_net, tape, observation(10, rng), state_leaves(tape, tiny_net.recurrent))
    with pytest.raises(UsageError):
        backward(tape, {nodes.value: np.ones(3)})
    with pytest.raises(UsageError):
        backward(tape, {len(tape) + 5: np.ones(1)})


def test_copy_parameters(tiny_config, rng):
    src = build_gtn(tiny_config, seed=1)
    dst = build_gtn(tiny_config, seed=2)
    dst.recurrent[0].hidden[:] = 3.0
    copy_parameters(src, dst)
    assert src.params.max_abs_diff(dst.params) == 0.0
    np.testing.assert_array_equal(dst.recurrent[0].hidden, np.full(8, 3.0))


def test_copy_parameters_rejects_other_topologies(tiny_config):
    with pytest.raises(UsageError):
        copy_parameters(build_gtn(tiny_config, 0), build_gtn(tiny_config.with_changes(levels=1), 0))


def test_noise_with_zero_samples_changes_nothing(tiny_net, rng):
    obs = observation(10, rng)
    clean = gtn_forward(tiny_net, obs)
    set_level_noise(tiny_net, 1, True, ZeroRng())
    noisy = gtn_forward(tiny_net, obs)
    np.testing.assert_array_equal(clean.policies[4], noisy.policies[4])
    assert clean.value == noisy.value


def test_noise_on_a_disconnected_level_changes_nothing(tiny_net, rng):
    tiny_net.params.set(tower_name(2), np.zeros_like(tiny_net.params[tower_name(2)]))
    obs = observation(10, rng)
    clean = gtn_forward(tiny_net, obs)
    set_level_noise(tiny_net, 2, True, np.random.default_rng(0))
    for _ in range(5):
        noisy = gtn_forward(tiny_net, obs)
        np.testing.assert_array_equal(clean.logits[6], noisy.logits[6])


def test_noise_is_resampled_every_forward(tiny_net, rng):
    obs = observation(10, rng)
    set_level_noise(tiny_net, 1, True, np.random.default_rng(0))
    logits = np.array([gtn_forward(tiny_net, obs).logits[4] for _ in range(1000)])
    assert np.all(logits.var(axis=0) > 0)
    clear_noise(tiny_net)
    assert tiny_net.noisy_levels() == []


def test_noise_level_must_exist(tiny_net):
    with pytest.raises(UsageError):
        set_level_noise(tiny_net, 3, True, np.random.default_rng(0))
    with pytest.raises(UsageError):
        set_level_noise(tiny_net, 1, True)
