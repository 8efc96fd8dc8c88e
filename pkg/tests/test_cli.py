import json
import os
import subprocess
import sys
import threading
import time

import pytest

from pushrl import cli
from pushrl.config import dumps_profile, parse_config
from pushrl.strategy import ThroughputProfile, reference_profile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")


def test_gridworld_smoke_config_succeeds_quickly(tmp_path, capsys):
    t0 = time.monotonic()
    code = cli.main(["train", os.path.join(CONFIGS, "gridworld_smoke.ini"), "--out", str(tmp_path)])
    assert code == cli.EXIT_OK and time.monotonic() - t0 < 60
    for name in ("report.jsonl", "metrics.jsonl", "train_episodes.csv", "train_throughput.csv", "train.png"):
        assert (tmp_path / name).stat().st_size > 0, name
    summary = json.loads((tmp_path / "report.jsonl").read_text().splitlines()[-1])
    assert summary["record"] == "summary" and summary["reason"] == "target"
    rows = [json.loads(l) for l in (tmp_path / "metrics.jsonl").read_text().splitlines()]
    assert rows and set(rows[0]) == {"t_ns", "tr_a", "tr_recv", "tr_l", "steps", "updates", "window_mean"}


def test_invalid_config_exits_1_without_workers(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[training]\nbatch_size = 64\nbuffer_capacity = 32\nwarmup_size = 32\n")
    before = threading.active_count()
    assert cli.main(["train", str(bad), "--out", str(tmp_path / "o")]) == cli.EXIT_USAGE
    assert threading.active_count() == before
    assert "batch_size" in capsys.readouterr().err


def test_usage_errors_exit_1(capsys):
    assert cli.main(["frobnicate"]) == cli.EXIT_USAGE
    assert cli.main(["plan", "--cores", "4"]) == cli.EXIT_USAGE
    assert cli.main(["train", "/no/such/file.ini"]) == cli.EXIT_USAGE


def test_budget_without_target_exits_3(tmp_path):
    cfg = tmp_path / "short.ini"
    cfg.write_text("[distribution]\nmode = serial\n[training]\nstep_budget = 300\n"
                   "[environment]\nname = gridworld\n")
    assert cli.main(["train", str(cfg), "--out", str(tmp_path / "o"), "--no-figures"]) == cli.EXIT_BUDGET


def test_metrics_path_env_override(tmp_path, monkeypatch):
    target = tmp_path / "elsewhere" / "m.jsonl"
    monkeypatch.setenv(cli.ENV_METRICS, str(target))
    cfg = tmp_path / "c.ini"
    cfg.write_text("[distribution]\nmode = serial\n[training]\nstep_budget = 30000\ntarget_return = none\n"
                   "[environment]\nname = gridworld\n")
    assert cli.main(["train", str(cfg), "--out", str(tmp_path / "o"), "--no-figures"]) == cli.EXIT_OK
    assert target.exists() and not (tmp_path / "o" / "metrics.jsonl").exists()


def test_serial_seeded_runs_repeat_exactly(tmp_path):
    eps = []
    for k in range(2):
        out = tmp_path / str(k)
        cli.main(["train", os.path.join(CONFIGS, "gridworld_smoke.ini"), "--mode", "serial",
                  "--seed", "4", "--out", str(out), "--no-figures"])
        rows = [json.loads(l) for l in (out / "report.jsonl").read_text().splitlines()]
        eps.append([(r["index"], r["return"]) for r in rows if r["record"] == "episode"])
    assert eps[0] == eps[1] and eps[0]


def test_plan_reference_profile(tmp_path, capsys):
    prof = tmp_path / "p.ini"
    prof.write_text(dumps_profile(reference_profile()))
    out = tmp_path / "plan.ini"
    assert cli.main(["plan", "--profile", str(prof), "--cores", "16", "--out", str(out)]) == 0
    cfg = parse_config(out)
    assert (cfg.distribution.n_learners, cfg.distribution.n_actors, cfg.distribution.cores) == (2, 8, 16)
    assert cfg.plan.target_p == 32 / 2048 and cfg.settings().target_P == 32 / 2048
    assert "predicted bottleneck" in capsys.readouterr().out


def test_plan_two_cores(tmp_path):
    prof = tmp_path / "p.ini"
    prof.write_text(dumps_profile(ThroughputProfile(900.0, 1200.0, 0.016, 1e-5, 1e-5)))
    out = tmp_path / "plan.ini"
    assert cli.main(["plan", "--profile", str(prof), "--cores", "2", "--out", str(out)]) == 0
    d = parse_config(out).distribution
    assert (d.n_learners, d.n_actors) == (1, 1)
    assert cli.main(["plan", "--profile", str(prof), "--cores", "1"]) == cli.EXIT_USAGE


@pytest.mark.skipif((os.cpu_count() or 1) < 2,
                    reason="the plan assumes each worker gets its own core; this host has one")
def test_plan_then_train_realizes_most_of_the_prediction(tmp_path):
    base = os.path.join(CONFIGS, "cartpole_dqn.ini")
    prof, plan = tmp_path / "p.ini", tmp_path / "plan.ini"
    assert cli.main(["profile", base, "--duration", "3", "--out", str(prof)]) == 0
    cores = min(os.cpu_count(), 4)
    assert cli.main(["plan", "--profile", str(prof), "--config", base, "--cores", str(cores),
                     "--out", str(plan)]) == 0
    text = plan.read_text().replace("time_limit = none", "time_limit = 10").replace(
        "target_return = 195.0", "target_return = none")
    plan.write_text(text)
    cli.main(["train", str(plan), "--out", str(tmp_path / "run"), "--no-figures"])
    cfg = parse_config(plan)
    rows = [json.loads(l) for l in (tmp_path / "run" / "metrics.jsonl").read_text().splitlines()][3:]
    realized = min(sum(r["tr_a"] for r in rows), sum(r["tr_l"] for r in rows)) / len(rows)
    predicted = min(cfg.plan.predicted_tr_a, cfg.plan.predicted_tr_l)
    assert realized >= 0.7 * predicted


def test_profile_command_writes_a_loadable_file(tmp_path):
    out = tmp_path / "prof.ini"
    assert cli.main(["profile", os.path.join(CONFIGS, "cartpole_dqn.ini"), "--duration", "1.5",
                     "--out", str(out)]) == 0
    from pushrl.config import load_profile
    assert load_profile(out).tr_a1 > 0


def test_commbench_command(tmp_path, capsys):
    cfg = tmp_path / "cb.ini"
    cfg.write_text("[commbench]\nmessage_size = 4096\nn_actors = 1, 2\nsample_time = 0.002\nn_samples = 100\n")
    assert cli.main(["commbench", str(cfg), "--repeats", "1", "--out", str(tmp_path / "o")]) == 0
    for name in ("commbench.csv", "commbench.json", "commbench.png"):
        assert (tmp_path / "o" / name).exists()
    assert "predicted_switch" in capsys.readouterr().out


def test_module_entry_point_and_log_level(tmp_path):
    env = dict(os.environ, PUSHRL_LOG_LEVEL="INFO")
    r = subprocess.run([sys.executable, "-m", "pushrl", "train", os.path.join(CONFIGS, "gridworld_smoke.ini"),
                        "--out", str(tmp_path), "--no-figures"], capture_output=True, text=True, env=env,
                       timeout=120)
    assert r.returncode == 0, r.stderr
    assert "INFO" in r.stderr and "training distributed mode" in r.stderr
