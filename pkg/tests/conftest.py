# tests/conftest.py

"""Shared fixtures: tiny topologies and tasks that keep tests fast."""

import numpy as np
import pytest

from gtn.envs.shooter import TaskSpec
from gtn.model.config import GtnConfig
from gtn.model.network import build_gtn, tower_name

TINY_SIDE = 10


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return GtnConfig(
        levels=2,
        layers=2,
        channels=3,
        kernel=3,
        stride=2,
        lstm_size=8,
        concat_size=8,
        input_side=TINY_SIDE,
        action_space_sizes=[2, 4, 6],
    )


@pytest.fixture
def tiny_net(tiny_config):
    return build_gtn(tiny_config, seed=7)


def tiny_task(tier: int, **changes) -> TaskSpec:
    """Small shooter tasks rendered at TINY_SIDE."""
    defaults = {
        1: dict(tier=1, target_density=1.0, action_count=2),
        2: dict(tier=2, target_density=0.34, action_count=4),
        3: dict(tier=3, target_density=0.5, bad_target_fraction=0.5, action_count=6),
    }[tier]
    data = dict(width=6, height=6, episode_cap=40, waves=2, render_side=TINY_SIDE)
    data.update(defaults)
    data.update(changes)
    return TaskSpec(**data)


@pytest.fixture
def tier1_task():
    return tiny_task(1)


@pytest.fixture
def tier2_task():
    return tiny_task(2)


@pytest.fixture
def tier3_task():
    return tiny_task(3)


def silent_level_net(levels: int = 2, live_level: int = 2, side: int = TINY_SIDE):
    """Hand-built net whose policy depends only on noise reaching `live_level`.

    Every LSTM outputs exactly zero, so the clean H is zero and the
    two-action head always prefers SHOOT. Noise on the live level passes
    through T = identity and pushes the NOOP logit up; every other T is
    zero so noise there cannot reach the heads.
    """
    config = GtnConfig(
        levels=levels,
        layers=1,
        channels=2,
        lstm_size=8,
        concat_size=8,
        input_side=side,
        action_space_sizes=[2],
    )
    net = build_gtn(config, seed=0)
    for name, value in net.params.items():
        if name.startswith("lstm."):
            net.params.set(name, np.zeros_like(value))
    for m in range(1, levels + 1):
        tower = np.eye(8) if m == live_level else np.zeros((8, 8))
        net.params.set(tower_name(m), tower)
    weight = np.zeros((8, 2))
    weight[:, 0] = 1.0
    net.params.set("policy.2.weight", weight)
    net.params.set("policy.2.bias", np.array([0.0, 1.0]))
    return net


def experiment_yaml(tasks=("shoot", "aim", "aim_valid"), workers=3, extra_model=""):
    """Tiny experiment document; every task renders at TINY_SIDE."""
    task_list = ", ".join(tasks)
    return f"""format_version: 1
model:
  levels: 2
  layers: 2
  channels: 3
  lstm_size: 8
  concat_size: 8
  input_side: {TINY_SIDE}
  action_space_sizes: [2, 4, 6]
{extra_model}tasks:
  shoot:
    tier: 1
    width: 6
    height: 6
    episode_cap: 12
    waves: 2
    render_side: {TINY_SIDE}
    action_count: 2
  aim:
    tier: 2
    width: 6
    height: 6
    target_density: 0.34
    episode_cap: 12
    waves: 2
    render_side: {TINY_SIDE}
    action_count: 4
  aim_valid:
    tier: 3
    width: 6
    height: 6
    target_density: 0.5
    bad_target_fraction: 0.5
    episode_cap: 12
    waves: 2
    render_side: {TINY_SIDE}
    action_count: 6
train:
  tasks: [{task_list}]
  workers: {workers}
  t_max: 5
  total_episodes: 2
  seed: 0
metrics:
  eval_episodes: 2
  baseline_episodes: 5
  aps_episodes: 2
  seeds: [0]
"""


@pytest.fixture
def experiment_file(tmp_path):
    path = tmp_path / "experiment.yaml"
    path.write_text(experiment_yaml())
    return path
