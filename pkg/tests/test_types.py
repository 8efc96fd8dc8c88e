import math

import numpy as np
import pytest

from pushrl.types import (
    HyperParams, ParamSet, Trajectory, Transition, layout_size, validate_transition,
)


def test_zero_state_is_well_formed():
    t = Transition(np.zeros(4), 0, 1.0, np.zeros(4), False)
    assert validate_transition(t, 4, 2) is None


def test_action_out_of_range():
    t = Transition(np.zeros(2), 5, 0.0, np.zeros(2), True)
    assert validate_transition(t, 2, 2).kind == "action"


def test_non_finite_reward():
    t = Transition(np.zeros(1), 0, math.nan, np.zeros(1), False)
    assert validate_transition(t, 1, 1).kind == "non_finite"


def test_dimension_mismatch():
    t = Transition(np.zeros(3), 0, 0.0, np.zeros(4), False)
    assert validate_transition(t, 4, 2).kind == "dimension"


def test_empty_trajectory_rejected():
    with pytest.raises(ValueError):
        Trajectory.from_transitions([], 0, 0)


def test_trajectory_round_trips_transitions():
    ts = [Transition(np.full(3, i, float), i % 2, float(i), np.full(3, i + 1, float), i == 4)
          for i in range(5)]
    traj = Trajectory.from_transitions(ts, policy_version=2, actor_id=1)
    back = traj.transitions()
    assert len(traj) == 5 and traj.obs_dim == 3
    for a, b in zip(ts, back):
        assert np.array_equal(a.state, b.state) and a.action == b.action
        assert a.reward == b.reward and a.done == b.done


def test_negative_policy_version_rejected():
    with pytest.raises(ValueError):
        Trajectory(np.zeros((1, 2)), np.zeros(1, int), np.zeros(1), np.zeros((1, 2)),
                   np.zeros(1, bool), policy_version=-1, actor_id=0)


def test_paramset_length_checked():
    assert layout_size((4, 256, 2)) == 4 * 256 + 256 + 256 * 2 + 2
    ParamSet(np.zeros(layout_size((2, 3))), 0, (2, 3))
    with pytest.raises(ValueError):
        ParamSet(np.zeros(5), 0, (2, 3))


def test_hyperparams_defaults_and_validation():
    hp = HyperParams()
    assert (hp.gamma, hp.alpha, hp.buffer_capacity, hp.warmup_size, hp.rollout_length,
            hp.target_update_interval, hp.batch_size) == (0.99, 5e-4, 2048, 32, 16, 100, 32)
    with pytest.raises(ValueError, match="batch_size"):
        HyperParams(batch_size=64, buffer_capacity=32, warmup_size=64)
    with pytest.raises(ValueError, match="gamma"):
        HyperParams(gamma=1.0)
