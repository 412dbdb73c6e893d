"""Acceptance suite: one test per criterion, each printing a PASS line with
the measured values when its assertions hold (pytest reports FAIL lines
itself). Run with `pytest tests/test_acceptance.py -s` to see the lines.
"""

import time

import numpy as np
import pytest
from click.testing import CliRunner

from p2s import transpiler as T
from p2s.cli import _build_gateway, _build_verify_fn, _suite_config, main
from p2s.config import load_config
from p2s.gateway import ScriptedBackend
from p2s.harness import run_suite, synth_rate
from p2s.loop import LoopConfig, run_baseline, run_episode, train_policy
from p2s.mdp import NUM_ACTIONS, STATE_DIM, RewardConfig, reward
from p2s.ppo import (
    PpoConfig,
    _batch_arrays,
    _loss_and_grads,
    actor_forward,
    compute_returns,
    grad_check,
    init_params,
    synthetic_batch,
)
from p2s.scripted_env import evaluate_policy, make_repair_env
from p2s.synth import RawReportBundle, SynthConfig, SynthStatus, parse_report, render_tcl
from p2s.verifier import (
    CandidateSource,
    DiagnosticCategory,
    EMPTY_SOURCE,
    VERIFIED_REPORT,
    VerifierReport,
    VerifyStatus,
    parse_diagnostics,
    simulate_verify,
)
from test_ppo import jittered_params, single_transition

from conftest import FIXTURES, emission


def ok(n: int, text: str, started: float):
    print(f"\n[ACCEPTANCE {n:02d}] PASS ({time.perf_counter() - started:.2f}s) {text}")


def failed_report(e: int) -> VerifierReport:
    return VerifierReport(e, (), VerifyStatus.FAILED)


def test_criterion_01_reward_exactness():
    t0 = time.perf_counter()
    cfg = RewardConfig()  # alpha=0.2, beta=0.5 per the shaped-reward definition
    code = CandidateSource.from_text("method M() {}")
    assert abs(reward(VERIFIED_REPORT, code, cfg) - cfg.r_succ) <= 1e-12
    assert abs(reward(failed_report(3), code, cfg) - (-1.1)) <= 1e-12
    assert abs(reward(failed_report(1), code, cfg) - (-0.7)) <= 1e-12
    empty = VerifierReport(1, (), VerifyStatus.EMPTY_INPUT)
    assert abs(reward(empty, EMPTY_SOURCE, cfg) - cfg.empty_penalty) <= 1e-12
    ok(1, "reward: +10.0 / -1.1 / -0.7 / -5.0 exact to 1e-12", t0)


def test_criterion_02_discounted_return_recurrence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    for _ in range(100):
        rewards = rng.uniform(-10, 10, size=int(rng.integers(1, 8))).tolist()
        g = compute_returns(rewards, 0.99)
        for t in range(len(rewards) - 1):
            assert abs(g[t] - (rewards[t] + 0.99 * g[t + 1])) <= 1e-12
        assert g[-1] == rewards[-1]
    worked = compute_returns([-1.1, -1.1, 10.0], 0.99)
    assert abs(worked[0] - 7.612) <= 1e-9
    ok(2, f"returns: recurrence holds on 100 sequences; G_0={worked[0]:.9f}", t0)


def test_criterion_03_gradient_check():
    t0 = time.perf_counter()
    cfg = PpoConfig()
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        params = jittered_params(seed + 1000)  # net 24 -> 8 -> 12
        batch = synthetic_batch(rng, d=24, n_actions=12, size=16)
        err = grad_check(params, batch, cfg, rng=rng, fd_step=1e-5)
        worst = max(worst, err)
        assert err < 1e-4, f"seed {seed}: {err}"
    rng = np.random.default_rng(99)
    corrupted = grad_check(
        jittered_params(99), synthetic_batch(rng, size=16), cfg,
        rng=rng, grad_transform=lambda g: -g,
    )
    assert corrupted > 1e-2
    ok(3, f"gradients: max rel err {worst:.2e} < 1e-4; sign flip detected ({corrupted:.2f})", t0)


def test_criterion_04_clip_semantics():
    t0 = time.perf_counter()
    cfg = PpoConfig(clip_epsilon=0.2, advantage_norm=False, entropy_coef=0.0)
    params = jittered_params(1)
    batch = [single_transition(params, ratio=1.3, advantage=2.0)]
    arrays = _batch_arrays(batch, cfg)
    _, stats, grads = _loss_and_grads(params, *arrays, cfg)
    assert abs(-stats.policy_loss - 2.4) <= 1e-12  # min(1.3*2, 1.2*2) = 2.4
    for g in grads[:4]:  # actor gradients: clipped branch passes nothing
        assert not g.any()
    for ratio in (0.8, 1.0, 1.2):
        b = [single_transition(params, ratio=ratio, advantage=2.0)]
        states, actions, logp_old, returns, advantages = _batch_arrays(b, cfg)
        r = np.exp(
            np.log(actor_forward(params, b[0].state)[b[0].action_id]) - b[0].log_prob_old
        )
        assert np.clip(r, 0.8, 1.2) * 2.0 == r * 2.0  # branches identical in band
    ok(4, "clip: surrogate 2.4 exact, zero grad through clipped ratio, band identical", t0)


def test_criterion_05_convergence_on_scripted_environment():
    t0 = time.perf_counter()
    tasks, gateway, verify_fn = make_repair_env()
    loop_cfg = LoopConfig(t_max=7)
    ppo_cfg = PpoConfig(lr=0.01, entropy_coef=0.01, seed=0)
    episodes = 2000  # within the 5000-episode budget
    params, rows = train_policy(
        tasks, gateway, verify_fn, ppo_cfg, loop_cfg, episodes=episodes, batch_episodes=16
    )
    trained = evaluate_policy(
        params, tasks, gateway, verify_fn, loop_cfg, np.random.default_rng(12345), episodes=100
    )
    uniform = init_params(STATE_DIM, 32, NUM_ACTIONS, seed=0)
    untrained = evaluate_policy(
        uniform, tasks, gateway, verify_fn, loop_cfg, np.random.default_rng(12345), episodes=100
    )
    assert trained >= 0.90
    assert untrained < trained
    ok(5, f"convergence: trained {trained:.2f} >= 0.90 after {episodes} episodes; "
          f"uniform policy measured {untrained:.2f} (strictly lower)", t0)


def test_criterion_06_loop_contract():
    t0 = time.perf_counter()
    tasks, _, _ = make_repair_env()
    from p2s.scripted_env import repair_script
    from p2s.verifier import SimRuleSet

    rules = SimRuleSet.default()
    script = repair_script()
    policy = init_params(STATE_DIM, 32, NUM_ACTIONS, seed=1)
    rng = np.random.default_rng(6)
    cfg = LoopConfig(t_max=7)

    class Counter:
        def __init__(self):
            self.gen = 0
            self.ver = 0

        def generate(self, prompt):
            self.gen += 1
            return ScriptedBackend(script).generate(prompt)

        def verify(self, code):
            self.ver += 1
            return simulate_verify(code, rules)

    for i in range(1000):
        counter = Counter()
        record, _ = run_episode(tasks[i % 3], policy, counter, counter.verify, cfg, rng)
        assert counter.gen == counter.ver == record.iterations_used <= 7
        statuses = [s.status for s in record.steps]
        assert "VERIFIED" not in statuses[:-1]  # nothing follows a verified report
    for i in range(100):
        counter = Counter()
        record = run_baseline(tasks[i % 3], counter, counter.verify, feedback=False, cfg=cfg)
        assert record.iterations_used == 1 and counter.gen == 1
    ok(6, "loop: generate=verify=iterations<=7 over 1000 episodes; single-shot always 1", t0)


def test_criterion_07_verifier_parsing():
    t0 = time.perf_counter()
    outputs = FIXTURES / "dafny_outputs"
    count, diags = parse_diagnostics((outputs / "clean.txt").read_text())
    assert (count, diags) == (0, [])
    count, diags = parse_diagnostics((outputs / "postcondition_fail.txt").read_text())
    assert count == 1 and diags[0].category is DiagnosticCategory.POSTCONDITION
    count, diags = parse_diagnostics((outputs / "multi_error.txt").read_text())
    assert count == 3
    assert [d.category for d in diags] == [
        DiagnosticCategory.INVARIANT,
        DiagnosticCategory.TERMINATION,
        DiagnosticCategory.ASSERTION,
    ]
    count, diags = parse_diagnostics((outputs / "garbage.txt").read_text())
    assert count == 1 and diags[0].category is DiagnosticCategory.OTHER
    ok(7, "verifier parsing: clean/postcondition/multi/garbage fixtures pinned", t0)


def test_criterion_08_transpiler_golden_and_oracle():
    t0 = time.perf_counter()
    golden = FIXTURES / "golden"
    for name in ("cube", "triangle_number", "triangular_prism_volume"):
        vectors = T.TestVectors.load(FIXTURES / "vectors" / f"{name}.vectors.json")
        kernel, kernel_src, tb_src = T.transpile_source(emission(name), vectors=vectors)
        assert kernel_src == (golden / f"{name}.c").read_text(), f"{name}.c differs"
        assert tb_src == (golden / f"{name}_tb.c").read_text(), f"{name}_tb.c differs"

    rng = np.random.default_rng(1000)
    cube = T.lower(T.sanitize(T.parse_compiled_source(emission("cube"))))
    tri = T.lower(T.sanitize(T.parse_compiled_source(emission("triangle_number"))))
    prism = T.lower(T.sanitize(T.parse_compiled_source(emission("triangular_prism_volume"))))
    for _ in range(1000):
        n = int(rng.integers(-1290, 1291))  # |n^3| < 2^31
        assert T.interpret(cube, [n]) == n**3
        m = int(rng.integers(0, 301))
        assert T.interpret(tri, [m]) == m * (m + 1) // 2
        b, h, l = (int(rng.integers(1, 1001)) for _ in range(3))  # product <= 1e9
        assert T.interpret(prism, [b, h, l]) == (b * h * l) // 2

    for name, want in (
        ("recursive", T.RejectionReason.RECURSION),
        ("while_loop", T.RejectionReason.WHILE_LOOP),
        ("dynamic_alloc", T.RejectionReason.DYNAMIC_ALLOC),
    ):
        with pytest.raises(T.Rejected) as err:
            T.lower(T.sanitize(T.parse_compiled_source(emission(name))))
        assert err.value.reason is want
    ok(8, "transpiler: 3 goldens byte-equal; oracle x1000 inputs exact; rejections typed", t0)


def test_criterion_09_report_parsing_vs_published_rows():
    t0 = time.perf_counter()
    cfg = SynthConfig(clock_period_ns=10.0)
    cube = parse_report(RawReportBundle(report_dir=FIXTURES / "synth_bundles" / "cube"), cfg)
    assert cube.status is SynthStatus.SYNTHESIZED
    assert (cube.latency_ns, cube.luts, cube.dsps, cube.ffs) == (60.0, 685, 6, 789)
    assert cube.latency_ns == 6 * 10.0  # cycles x clock
    tri = parse_report(
        RawReportBundle(report_dir=FIXTURES / "synth_bundles" / "triangle_number"), cfg
    )
    assert (tri.latency_ns, tri.luts, tri.dsps, tri.ffs) == (50.0, 511, 3, 436)
    assert tri.latency_ns == 5 * 10.0
    ok(9, "report mining: cube 60ns/685/6/789, triangle 50ns/511/3/436, ns = cycles x 10", t0)


def test_criterion_10_tcl_golden():
    t0 = time.perf_counter()
    cfg = SynthConfig(top_function="cube")
    script = render_tcl(cfg, "cube.c", "cube_tb.c")
    assert "create_clock -period 10" in script
    assert "xc7z020clg484-1" in script
    assert script == render_tcl(cfg, "cube.c", "cube_tb.c")
    ok(10, "tcl: 10 ns clock + xc7z020clg484-1 present, byte-stable", t0)


def test_criterion_11_end_to_end_mock_funnel(tmp_path):
    t0 = time.perf_counter()
    cfg = load_config(FIXTURES / "suite" / "config.toml")
    blobs = []
    for sub in ("a", "b"):
        suite_cfg = _suite_config(cfg, cfg.mode, str(tmp_path / sub))
        stats, run_dir = run_suite(
            suite_cfg, _build_gateway(cfg), _build_verify_fn(cfg), loop_cfg=cfg.loop
        )
        assert (stats.total_tasks, stats.verified, stats.compiled_to_hls,
                stats.hls_synthesized) == (10, 6, 4, 3)
        assert stats.hls_synthesized <= stats.compiled_to_hls <= stats.verified <= stats.total_tasks
        blobs.append((run_dir / "funnel.json").read_bytes())
    assert blobs[0] == blobs[1]
    assert synth_rate(55, 38) == 69.1  # published-row arithmetic check
    ok(11, "funnel: (10, 6, 4, 3) exact, funnel.json byte-identical; 100*38/55 = 69.1", t0)


def test_criterion_12_cli_train_determinism(tmp_path):
    t0 = time.perf_counter()
    runner = CliRunner()
    logs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        result = runner.invoke(
            main,
            ["train", "--config", str(FIXTURES / "suite" / "train_config.toml"),
             "--episodes", "200", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        logs.append((out / "training.csv").read_bytes())
    assert logs[0] == logs[1]
    ok(12, "determinism: p2s train twice with one seed -> identical training CSVs", t0)
