"""Tests for the Q-network numeric core."""

import numpy as np
import pytest

from hpfold.core import lattice
from hpfold.core.encoding import encode
from hpfold.core.network import (
    AdamState,
    Checkpoint,
    NetworkSpec,
    adam_step,
    backward,
    clone_params,
    fcn_forward,
    fcn_parameter_count,
    fcn_width_for,
    forward,
    forward_cached,
    huber,
    huber_grad,
    init_params,
    load_checkpoint,
    lstm_parameter_count,
    save_checkpoint,
)
from hpfold.errors import ConfigError, ShapeError
from hpfold.utils.seeding import RngStreams


def _objective(params, x, upstream):
    return float(np.sum(forward(params, x) * upstream))


def _gradcheck(params, x, upstream, eps=1e-6, floor=1e-4):
    analytic = backward(params, x, upstream)
    worst = 0.0
    for name, tensor in params.tensors.items():
        it = np.nditer(tensor, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            saved = tensor[idx]
            tensor[idx] = saved + eps
            plus = _objective(params, x, upstream)
            tensor[idx] = saved - eps
            minus = _objective(params, x, upstream)
            tensor[idx] = saved
            numeric = (plus - minus) / (2 * eps)
            a = analytic[name][idx]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, rel)
    return worst


def test_lstm_gradients_match_finite_differences():
    """Test BPTT against central differences in double precision."""
    rng = np.random.default_rng(7)
    spec = NetworkSpec(kind="lstm", layers=2, hidden=8, n=6)
    params = init_params(spec, rng, dtype=np.float64)
    x = rng.random((2, 6, 6))
    upstream = rng.normal(size=(2, 3))
    assert _gradcheck(params, x, upstream) <= 1e-4


def test_fcn_gradients_match_finite_differences():
    """Test the dense control network's gradients."""
    rng = np.random.default_rng(11)
    spec = NetworkSpec(kind="fcn", layers=2, hidden=4, n=6)
    params = init_params(spec, rng, dtype=np.float64)
    x = rng.random((2, 6, 6))
    upstream = rng.normal(size=(2, 3))
    assert _gradcheck(params, x, upstream) <= 1e-4


def test_forward_shapes():
    """Test single-state and batched outputs."""
    seq = "HPPHPH"
    spec = NetworkSpec.from_tag("lstm2x8", len(seq))
    params = init_params(spec, np.random.default_rng(0))
    x = encode(lattice.reset(seq), seq)
    assert forward(params, x).shape == (3,)
    assert forward(params, np.stack([x, x, x])).shape == (3, 3)
    with pytest.raises(ShapeError):
        forward(params, np.zeros((5, 6)))
    with pytest.raises(ShapeError):
        forward(params, np.zeros((6, 4)))


def test_seeded_init_is_bitwise_reproducible():
    """Test that two builds from one seed agree exactly."""
    seq = "HPHPPHHPHPPHPHHPPHPH"
    spec = NetworkSpec.from_tag("auto", len(seq))
    a = init_params(spec, RngStreams.from_seed(3).init)
    b = init_params(spec, RngStreams.from_seed(3).init)
    for name in a.tensors:
        assert np.array_equal(a[name], b[name])
    x = encode(lattice.replay(seq, "LFRL").state, seq)
    assert np.array_equal(forward(a, x), forward(b, x))


def test_architecture_tags():
    """Test default sizes by N and tag parsing."""
    assert NetworkSpec.from_tag("auto", 20).tag == "lstm2x256"
    assert NetworkSpec.from_tag("auto", 36).tag == "lstm2x256"
    assert NetworkSpec.from_tag("auto", 48).tag == "lstm3x512"
    assert NetworkSpec.from_tag("lstm3x512", 20).tag == "lstm3x512"
    assert NetworkSpec.from_tag("fcn", 36).kind == "fcn"
    with pytest.raises(ConfigError):
        NetworkSpec.from_tag("gru", 20)


def test_parameter_counts():
    """Test the LSTM count and the matched FCN width."""
    assert lstm_parameter_count(2, 256) == 795395
    target = lstm_parameter_count(2, 256)
    width = fcn_width_for(36, 2, target)
    assert width == 788
    assert abs(fcn_parameter_count(36, 2, width) - target) / target < 0.1

    spec = NetworkSpec.from_tag("fcn", 36)
    params = init_params(spec, np.random.default_rng(0))
    assert params.parameter_count == fcn_parameter_count(36, 2, 788)
    lstm = init_params(NetworkSpec.from_tag("lstm", 36), np.random.default_rng(0))
    assert lstm.parameter_count == 795395


def test_fcn_forward_requires_fcn():
    """Test that fcn_forward rejects LSTM parameters."""
    params = init_params(NetworkSpec("lstm", 1, 4, 4), np.random.default_rng(0))
    with pytest.raises(ShapeError):
        fcn_forward(params, np.zeros((4, 6)))
    dense = init_params(NetworkSpec("fcn", 1, 4, 4), np.random.default_rng(0))
    assert fcn_forward(dense, np.zeros((4, 6))).shape == (3,)


def test_huber_values():
    """Test both branches of the Huber loss."""
    assert huber(0.5) == 0.125
    assert huber(2.0) == 1.5
    assert huber(-2.0) == 1.5
    assert huber_grad(0.5) == 0.5
    assert huber_grad(-3.0) == -1.0


def test_first_adam_step_moves_by_learning_rate():
    """Test the bias-corrected first step: each weight moves by about lr."""
    params = init_params(NetworkSpec("lstm", 1, 4, 4), np.random.default_rng(0), dtype=np.float64)
    before = clone_params(params)
    grads = {k: np.full_like(v, 0.3) for k, v in params.tensors.items()}
    state = AdamState.for_params(params, lr=0.0005)
    adam_step(params, grads, state)
    assert state.t == 1
    for name in params.tensors:
        np.testing.assert_allclose(before[name] - params[name], 0.0005, rtol=1e-6)


def test_checkpoint_round_trip(tmp_path):
    """Test that parameters, optimiser, RNG states and counters survive."""
    streams = RngStreams.from_seed(5)
    params = init_params(NetworkSpec("lstm", 2, 8, 6), streams.init)
    adam = AdamState.for_params(params)
    grads = {k: np.ones_like(v) for k, v in params.tensors.items()}
    adam_step(params, grads, adam)
    streams.explore.random(10)

    path = save_checkpoint(
        tmp_path / "ckpt.npz",
        Checkpoint(params=params, adam=adam, rng_state=streams.state(), counters={"episode": 10}),
    )
    loaded = load_checkpoint(path)
    assert loaded.params.spec == params.spec
    for name in params.tensors:
        assert np.array_equal(loaded.params[name], params[name])
        assert np.array_equal(loaded.adam.m[name], adam.m[name])
    assert loaded.adam.t == 1
    assert loaded.counters == {"episode": 10}

    restored = RngStreams.from_seed(0)
    restored.restore(loaded.rng_state)
    assert restored.explore.random() == streams.explore.random()


def _zeroed(kind="lstm", n=6):
    params = init_params(NetworkSpec(kind, 2, 8, n), np.random.default_rng(0), dtype=np.float64)
    for tensor in params.tensors.values():
        tensor[...] = 0.0
    return params


@pytest.mark.parametrize("kind", ["lstm", "fcn"])
def test_zero_weights_give_zero_q(kind):
    """Test that an all-zero network outputs Q = (0, 0, 0)."""
    x = encode(lattice.replay("HPPHPH", "LF").state, "HPPHPH")
    assert forward(_zeroed(kind), x).tolist() == [0.0, 0.0, 0.0]


@pytest.mark.parametrize("kind", ["lstm", "fcn"])
def test_head_bias_alone_sets_q(kind):
    """Test that only the head bias reaches the output when all else is zero."""
    params = _zeroed(kind)
    params["head.b"][...] = [0.5, -1.0, 2.0]
    rng = np.random.default_rng(4)
    for x in (np.zeros((6, 6)), rng.random((6, 6)), encode(lattice.reset("HPPHPH"), "HPPHPH")):
        assert forward(params, x).tolist() == [0.5, -1.0, 2.0]


def test_zero_upstream_gives_zero_gradients():
    """Test backward with upstream (0, 0, 0)."""
    params = init_params(NetworkSpec("lstm", 2, 8, 6), np.random.default_rng(1), dtype=np.float64)
    x = np.random.default_rng(2).random((6, 6))
    grads = backward(params, x, np.zeros(3))
    for name, g in grads.items():
        assert not np.any(g), name


def test_head_bias_gradient_is_upstream():
    """Test that d<u, Q>/d head.b is exactly u for one state."""
    params = init_params(NetworkSpec("lstm", 1, 8, 6), np.random.default_rng(3), dtype=np.float64)
    x = np.random.default_rng(5).random((6, 6))
    upstream = np.array([0.25, -1.5, 3.0])
    grads = backward(params, x, upstream)
    assert np.array_equal(grads["head.b"], upstream)


def test_zero_gradient_adam_step():
    """Test that a zero gradient leaves weights alone but still counts the step."""
    params = init_params(NetworkSpec("lstm", 1, 4, 4), np.random.default_rng(0), dtype=np.float64)
    before = clone_params(params)
    state = AdamState.for_params(params)
    adam_step(params, {k: np.zeros_like(v) for k, v in params.tensors.items()}, state)
    assert state.t == 1
    for name in params.tensors:
        assert np.array_equal(params[name], before[name])


def test_constant_gradient_steady_state():
    """Test that a constant gradient moves each weight by about lr per step."""
    params = init_params(NetworkSpec("lstm", 1, 2, 3), np.random.default_rng(0), dtype=np.float64)
    grads = {k: np.full_like(v, 0.7) for k, v in params.tensors.items()}
    state = AdamState.for_params(params, lr=0.0005)
    for _ in range(9_999):
        adam_step(params, grads, state)
    before = clone_params(params)
    adam_step(params, grads, state)
    assert state.t == 10_000
    for name in params.tensors:
        np.testing.assert_allclose(before[name] - params[name], 0.0005, rtol=0.01)


def test_hidden_states_are_bounded():
    """Test that every LSTM hidden-state component lies strictly inside (-1, 1)."""
    params = init_params(NetworkSpec("lstm", 2, 8, 12), np.random.default_rng(6), dtype=np.float64)
    for name, tensor in params.tensors.items():
        if name.startswith("lstm"):
            tensor *= 2.0
    x = np.random.default_rng(7).random((5, 12, 6))
    _, (layers, _) = forward_cached(params, x)
    for _, h, _, _ in layers:
        assert np.all(np.abs(h) < 1.0)


def test_clone_is_independent():
    """Test that perturbing the source leaves a clone untouched."""
    params = init_params(NetworkSpec("lstm", 1, 4, 4), np.random.default_rng(0))
    clone = clone_params(params)
    snapshot = {k: v.copy() for k, v in clone.tensors.items()}
    for tensor in params.tensors.values():
        tensor += 1.0
    for name in clone.tensors:
        assert np.array_equal(clone[name], snapshot[name])
        assert not np.array_equal(clone[name], params[name])
