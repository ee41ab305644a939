# tests/test_store.py

import threading

import numpy as np
import pytest

from gtn.core.exceptions import UsageError
from gtn.engine.optim import OptimizerState, rmsprop_update
from gtn.model.network import build_gtn
from gtn.trainer.store import apply_update, clone_global, create_store


@pytest.fixture
def store(tiny_config):
    return create_store(build_gtn(tiny_config, seed=0), ["a", "b"], lr=0.01)


def zero_grads(net):
    return {name: np.zeros_like(v) for name, v in net.params.items()}


def random_grads(net, rng):
    return {name: rng.normal(size=v.shape) for name, v in net.params.items()}


def test_zero_gradients_leave_parameters_unchanged(store):
    before = store.net.params.flat().copy()
    assert apply_update(store, zero_grads(store.net))
    np.testing.assert_array_equal(store.net.params.flat(), before)
    assert store.update_counter == 1


def test_non_finite_gradients_are_rejected(store, rng):
    before = store.net.params.flat().copy()
    grads = random_grads(store.net, rng)
    grads["concat.bias"][0] = np.nan
    grads["value.bias"][0] = np.inf
    assert not apply_update(store, grads)
    np.testing.assert_array_equal(store.net.params.flat(), before)
    assert store.update_counter == 0
    assert store.rejected_updates == 1
    assert all(np.all(acc == 0) for acc in store.optimizer.accumulators.values())


def test_misshaped_gradients_are_usage_errors(store):
    grads = zero_grads(store.net)
    grads["value.weight"] = np.zeros(3)
    with pytest.raises(UsageError):
        apply_update(store, grads)
    del grads["value.weight"]
    with pytest.raises(UsageError):
        apply_update(store, grads)


def test_sequential_updates_match_plain_rmsprop(store, rng):
    reference = store.net.params.copy()
    state = OptimizerState.for_params(reference, lr=0.01)
    for _ in range(2):
        grads = random_grads(store.net, rng)
        apply_update(store, grads)
        rmsprop_update(reference, grads, state)
    assert store.net.params.max_abs_diff(reference) == 0.0
    assert store.update_counter == 2


def test_snapshot_returns_the_counter(store, tiny_config, rng):
    apply_update(store, random_grads(store.net, rng))
    local = build_gtn(tiny_config, seed=9)
    assert store.snapshot_into(local) == 1
    assert local.params.max_abs_diff(store.net.params) == 0.0
    assert clone_global(store).params.max_abs_diff(store.net.params) == 0.0


def test_snapshot_during_an_unfinished_update_is_counted_as_torn(store, tiny_config):
    local = build_gtn(tiny_config, seed=9)
    store._update_begin += 1  # an update bracket that was opened but never closed
    store.snapshot_into(local)
    assert store.torn_snapshots == 1
    store._update_end += 1
    store.update_counter += 1
    store.snapshot_into(local)
    assert store.torn_snapshots == 1


def test_concurrent_workers_never_see_torn_snapshots(store, tiny_config):
    errors = []

    def work(seed):
        rng = np.random.default_rng(seed)
        local = build_gtn(tiny_config, seed=seed)
        try:
            for _ in range(25):
                store.snapshot_into(local)
                apply_update(store, random_grads(local, rng))
                store.record_episode("a" if seed % 2 else "b")
        except Exception as e:  # surfaced below
            errors.append(e)

    threads = [threading.Thread(target=work, args=(s,)) for s in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert errors == []
    assert store.torn_snapshots == 0
    assert store.update_counter == 100
    assert store.episodes("a") == store.episodes("b") == 50
    assert store.total_episodes() == 100
    assert store.params_finite()


def test_record_episode_counts_per_task(store):
    assert store.record_episode("a") == (1, 1)
    assert store.record_episode("b") == (1, 2)
    assert store.record_episode("a") == (2, 3)
