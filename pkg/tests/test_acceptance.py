"""The eight acceptance criteria, each at its stated tolerance.

Every test records a verdict before asserting, and conftest prints one line
per criterion at the end of the session. Run alone with

    pytest tests/test_acceptance.py -v
"""

import os
import time
from dataclasses import replace

import numpy as np

import props
from oracles import central_difference, optimal_actions, value_iteration
from pushrl.algo import QNetwork, dqn_loss_and_grad, epsilon_greedy, forward, td0_update
from pushrl.bench import commbench, scaling_sweep, slow_env
from pushrl.config import parse_config
from pushrl.envs import EnvSpec, env_reset, env_step, one_hot
from pushrl.runtime import TrainSettings, run_training
from pushrl.strategy import plan, reference_profile
from pushrl.types import HyperParams, Transition

CONFIGS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


# --- 1: TD(0) against value iteration ----------------------------------------------

def td0_gridworld(seed: int, episodes: int = 2000, alpha: float = 0.2, gamma: float = 0.99,
                  eps_decay: float = 0.99, eps_floor: float = 0.5) -> QNetwork:
    """Tabular TD(0) (one-hot features, linear net, zero init) on the 4x4 grid."""
    env = EnvSpec("gridworld", max_steps=100)
    net = QNetwork((env.obs_dim, env.n_actions), theta=np.zeros(env.obs_dim * env.n_actions + env.n_actions))
    rng = np.random.default_rng(seed)
    eps = 1.0
    for _ in range(episodes):
        state = env_reset(env, 0)
        done = False
        while not done:
            obs = state.observation
            a = epsilon_greedy(forward(net, obs), eps, rng)
            nxt, r, done = env_step(env, state, a, rng)
            td0_update(net, Transition(obs, a, r, nxt.observation, nxt.terminated), gamma, alpha)
            state = nxt
        eps = max(eps_floor, eps * eps_decay)
    return net


def test_c1_td0_matches_value_iteration(verdict):
    q_star = value_iteration(4, 0.99)
    t0 = time.monotonic()
    worst_err, mismatches = 0.0, []
    for seed in range(3):
        net = td0_gridworld(seed)
        for s in range(15):
            q = forward(net, one_hot(s, 16))
            worst_err = max(worst_err, float(np.max(np.abs(q - q_star[s]))))
            if int(np.argmax(q)) not in optimal_actions(q_star, s):
                mismatches.append((seed, s))
    per_seed = (time.monotonic() - t0) / 3
    ok = worst_err <= 0.05 and not mismatches and per_seed <= 120
    verdict(1, ok, f"max|Q-Q*|={worst_err:.4f} (<=0.05), policy mismatches={mismatches}, "
                   f"{per_seed:.1f}s per seed, 3 seeds")
    assert ok


# --- 2: analytic gradient against central differences ---------------------------------

def test_c2_gradients_match_finite_differences(verdict):
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        layout = (int(rng.integers(2, 5)), int(rng.integers(2, 7)), int(rng.integers(2, 6)),
                  int(rng.integers(2, 4)))
        net, tgt = QNetwork(layout, seed=seed), QNetwork(layout, seed=seed + 1000)
        n = int(rng.integers(1, 9))
        batch = (rng.standard_normal((n, layout[0])), rng.integers(0, layout[-1], n),
                 rng.standard_normal(n), rng.standard_normal((n, layout[0])), rng.random(n) < 0.3)
        _, grad = dqn_loss_and_grad(net, tgt, batch, 0.99)
        fd = central_difference(lambda th: dqn_loss_and_grad(QNetwork(layout, th), tgt, batch, 0.99)[0],
                                net.theta.copy())
        err = np.linalg.norm(grad - fd) / max(np.linalg.norm(grad), np.linalg.norm(fd), 1e-12)
        worst = max(worst, float(err))
    ok = worst <= 1e-4
    verdict(2, ok, f"worst relative error {worst:.2e} over 100 instances (<=1e-4)")
    assert ok


# --- 3: serial and distributed both solve CartPole -----------------------------------------

def test_c3_serial_and_distributed_reach_195(verdict):
    base = parse_config(os.path.join(CONFIGS, "cartpole_dqn.ini")).settings()
    base = replace(base, step_budget=300_000, target_return=195.0, time_limit=None)
    lines, passed = [], 0
    timing = []
    for seed in range(3):
        runs = {}
        for mode in ("serial", "distributed"):
            s = replace(base, mode=mode, seed=seed, model_seed=seed, n_actors=2, n_learners=1)
            rep = run_training(s)
            runs[mode] = rep
        both = all(r.target_reached and not r.errors for r in runs.values())
        passed += both
        timing.append((runs["serial"].final_time, runs["distributed"].final_time))
        lines.append(f"seed {seed}: " + ", ".join(
            f"{m} {'%.1fs/%d steps' % (r.final_time, r.final_time_steps) if r.target_reached else 'missed'}"
            for m, r in runs.items()))
    ok = passed >= 2
    cores = os.cpu_count() or 1
    if cores >= 4:
        wins = sum(d is not None and s is not None and d <= s for s, d in timing)
        clause = f"distributed faster in {wins}/3"
        ok = ok and wins >= 2
    else:
        clause = f"final_time clause N/A on {cores} core(s)"
    verdict(3, ok, f"{passed}/3 seeds reached 195 in both modes; {clause}; " + "; ".join(lines))
    assert ok


# --- 4: collection time against the critical-path model -------------------------------------

def test_c4_commbench_matches_collect_time_model(verdict):
    rep = commbench(512 * 1024, (1, 2, 4, 8, 16), 0.001, 10_000)
    errs = rep.actor_branch_errors()
    worst = max(e for _, e in errs) if errs else float("nan")
    onset, switch = rep.measured_onset(), rep.predicted_switch
    ok = bool(errs) and worst <= 0.25 and onset is not None and abs(onset - switch) <= 1
    times = " ".join(f"{r.n_actors}:{r.collection_time:.2f}/{r.predicted_time:.2f}" for r in rep.rows)
    verdict(4, ok, f"actor-branch worst error {worst:.1%} (<=25%), onset {onset} vs predicted "
                   f"switch {switch:.2f} (+-1), knee {rep.knee_estimate():.2f}; measured/model s {times}")
    assert ok


# --- 5: planner balance point ------------------------------------------------------------------

def test_c5_planner_picks_l2a8(verdict):
    t0 = time.perf_counter()
    p = plan(reference_profile(), 16, HyperParams(), n_learners=2)
    elapsed = time.perf_counter() - t0
    ok = (p.n_learners, p.n_actors) == (2, 8) and elapsed < 1.0
    verdict(5, ok, f"L{p.n_learners}A{p.n_actors} (want L2A8), {elapsed * 1e3:.1f} ms")
    assert ok


# --- 6: fresh vs Lag2 buffer geometry ------------------------------------------------------------

def test_c6_fresh_buffer_needs_fewer_updates_than_lag2(verdict):
    def updates_to_target(capacity, seed):
        hp = HyperParams(buffer_capacity=capacity, warmup_size=32, train_interval=32)
        s = TrainSettings(env=EnvSpec("cartpole", 200), hp=hp, mode="serial", seed=seed,
                          model_seed=seed, step_budget=2_000_000, target_return=195.0)
        rep = run_training(s)
        return rep.final_time_updates

    lines, wins = [], 0
    for seed in range(3):
        fresh, lag2 = updates_to_target(32, seed), updates_to_target(64, seed)
        win = fresh is not None and (lag2 is None or fresh < lag2)
        wins += win
        lines.append(f"seed {seed}: fresh {fresh} vs lag2 {lag2}")
    ok = wins >= 2
    verdict(6, ok, f"fresh wins {wins}/3 (>=2); " + "; ".join(lines))
    assert ok


# --- 7: three-curve scaling signature ---------------------------------------------------------

def test_c7_scaling_shape(verdict):
    base = TrainSettings(env=slow_env(0.002), update_delay=0.02, staleness_control=False)
    rows = scaling_sweep(base, (1, 2, 4, 8), duration=8, settle=2)
    tracking = all(abs(r.receive - r.sample) <= 0.10 * r.sample for r in rows)
    sat = next((i for i, r in enumerate(rows) if r.sample > r.train), None)
    flat = rising = False
    if sat is not None and sat < len(rows) - 1:
        ref = rows[sat].train
        flat = all(abs(r.train - ref) <= 0.10 * ref for r in rows[sat:])
        rising = all(b.sample > a.sample for a, b in zip(rows[sat:], rows[sat + 1:]))
    ok = tracking and flat and rising
    table = " ".join(f"{r.n_actors}:{r.sample:.0f}/{r.receive:.0f}/{r.train:.0f}" for r in rows)
    verdict(7, ok, f"receive tracks sample={tracking}, saturates at "
                   f"{rows[sat].n_actors if sat is not None else None} actors, train flat={flat}, "
                   f"sample rising={rising}; sample/receive/train {table}")
    assert ok


# --- 8: property suites and soak ------------------------------------------------------------------

def test_c8_property_suites_and_soak(verdict):
    results = {}
    checks = [
        ("codec", lambda: props.codec_round_trip(10_000)),
        ("inproc order+conservation", lambda: f"{len(props.ordered_delivery('inproc'))} delivered"),
        ("tcp order+conservation",
         lambda: f"{len(props.ordered_delivery('tcp', n_senders=3, per_sender=500))} delivered"),
        ("versions", props.monotone_versions),
        ("fifo", props.fifo_eviction),
        ("uniformity", props.sampling_uniformity),
        ("soak", lambda: props.soak(1_000_000)),
    ]
    for name, check in checks:
        try:
            results[name] = check()
        except AssertionError as exc:
            verdict(8, False, f"{name} failed: {exc}")
            raise
    verdict(8, True, "; ".join(f"{k}: {v}" for k, v in results.items()))
