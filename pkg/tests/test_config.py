import glob
import os

import pytest
from hypothesis import given, strategies as st

from pushrl import config
from pushrl.config import ConfigError, RunConfig, dumps, loads, parse_config, replace

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
EXAMPLES = sorted(glob.glob(os.path.join(ROOT, "configs", "*.ini")))


def test_minimal_file_gets_defaults():
    cfg = loads("[environment]\nname = gridworld\n")
    assert cfg.environment.name == "gridworld"
    assert cfg.training == config.TrainingConfig() and cfg.distribution == config.DistributionConfig()


def test_batch_larger_than_capacity_is_rejected():
    with pytest.raises(ConfigError, match="batch_size"):
        loads("[training]\nbatch_size = 64\nbuffer_capacity = 32\nwarmup_size = 32\n")


def test_reference_cartpole_file_matches_table_values():
    cfg = parse_config(os.path.join(ROOT, "configs", "cartpole_dqn.ini"))
    hp = cfg.training.hyperparams()
    assert (hp.gamma, hp.alpha, hp.buffer_capacity, hp.warmup_size, hp.rollout_length,
            hp.target_update_interval, hp.batch_size) == (0.99, 5e-4, 2048, 32, 16, 100, 32)
    assert cfg.model.hidden == (256,) and cfg.environment.name == "cartpole"


@pytest.mark.parametrize("path", EXAMPLES, ids=os.path.basename)
def test_example_configs_parse_and_round_trip(path):
    cfg = parse_config(path)
    assert loads(dumps(cfg)) == cfg
    cfg.settings()


def test_examples_exist():
    assert len(EXAMPLES) >= 5


@pytest.mark.parametrize("text, line, field", [
    ("[training]\nbatch_size = x\n", 2, "training.batch_size"),
    ("[training]\n\nbogus = 1\n", 3, "training.bogus"),
    ("[nonsense]\na = 1\n", 1, "nonsense"),
    ("[model]\nhidden = 0\n", None, "model.hidden"),
    ("[distribution]\nmode = turbo\n", None, "distribution.mode"),
    ("[environment]\nname = pong\n", None, "environment"),
])
def test_errors_name_line_and_field(text, line, field):
    with pytest.raises(ConfigError) as err:
        loads(text)
    assert err.value.field == field
    if line is not None:
        assert err.value.line == line and str(err.value).startswith(f"line {line}:")


def test_syntax_error_reports_line():
    with pytest.raises(ConfigError) as err:
        loads("[training]\ngamma = 0.9\nthis is not a pair\n")
    assert err.value.line == 3


def test_optional_values_and_comments():
    cfg = loads("[training]\ntarget_return = none   # run to budget\ntime_limit = 30\n")
    assert cfg.training.target_return is None and cfg.training.time_limit == 30.0
    assert loads("[training]\ntarget_return =\n").training.target_return is None


groups = st.fixed_dictionaries({
    "distribution": st.fixed_dictionaries({
        "mode": st.sampled_from(["serial", "distributed"]), "n_actors": st.integers(1, 64),
        "n_learners": st.integers(1, 8), "transport": st.sampled_from(["inproc", "tcp"]),
        "staleness_control": st.booleans(), "control_window": st.floats(0.01, 100)}),
    "training": st.fixed_dictionaries({
        "gamma": st.floats(0, 0.999), "learning_rate": st.floats(1e-6, 1.0),
        "step_budget": st.integers(1, 10 ** 9),
        "target_return": st.none() | st.floats(-1e3, 1e3),
        "time_limit": st.none() | st.floats(0.1, 1e5)}),
    "model": st.fixed_dictionaries({"hidden": st.lists(st.integers(1, 512), min_size=0, max_size=3).map(tuple),
                                    "seed": st.integers(0, 2 ** 31)}),
    "environment": st.fixed_dictionaries({"name": st.sampled_from(["cartpole", "gridworld"]),
                                          "max_steps": st.integers(1, 10_000)}),
})


@given(groups)
def test_serialize_parse_round_trip(g):
    cfg = replace(RunConfig(), **g)
    assert loads(dumps(cfg, header="generated")) == cfg


def test_profile_file_round_trip(tmp_path):
    from pushrl.strategy import reference_profile
    p = tmp_path / "p.ini"
    p.write_text(config.dumps_profile(reference_profile()))
    assert config.load_profile(p) == reference_profile()
    p.write_text("[profile]\ntr_a1 = 1\n")
    with pytest.raises(ConfigError):
        config.load_profile(p)
