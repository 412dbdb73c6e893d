import json

import pytest

from p2s.cli import _build_gateway, _build_verify_fn, _suite_config
from p2s.config import load_config
from p2s.harness import (
    FunnelStats,
    MismatchedTaskSets,
    Stage,
    TaskResult,
    build_funnel,
    format_delta,
    format_pct,
    run_suite,
    synth_rate,
    verification_rate_table,
    write_rate_table_csv,
)
from p2s.loop import EpisodeMode, EpisodeRecord, Outcome
from p2s.verifier import EMPTY_SOURCE

from conftest import FIXTURES

SUITE_CONFIG = FIXTURES / "suite" / "config.toml"


def record(task_id: str, verified: bool, mode=EpisodeMode.BASELINE_WITH_FEEDBACK) -> EpisodeRecord:
    return EpisodeRecord(
        task_id=task_id,
        mode=mode,
        steps=(),
        outcome=Outcome.VERIFIED if verified else Outcome.EXHAUSTED,
        iterations_used=1,
        final_source=EMPTY_SOURCE,
        episode_reward=0.0,
    )


class TestFunnelStats:
    def test_monotonicity_enforced(self):
        with pytest.raises(ValueError):
            FunnelStats(
                total_tasks=5, verified=6, compiled_to_hls=0, hls_synthesized=0,
                synth_rate_pct=0.0, avg_elapsed_s=0.0, avg_peak_memory_mb=None, per_task=(),
            )

    def test_build_funnel_counts_stages(self):
        results = [
            TaskResult("a", Stage.SYNTHESIZED, None),
            TaskResult("b", Stage.COMPILED_TO_HLS, "synth said no"),
            TaskResult("c", Stage.VERIFIED, "lowering failed"),
            TaskResult("d", Stage.VERIFY_FAILED, "never verified"),
        ]
        stats = build_funnel(results)
        assert (stats.total_tasks, stats.verified, stats.compiled_to_hls, stats.hls_synthesized) == (4, 3, 2, 1)
        assert stats.synth_rate_pct == pytest.approx(33.3)

    def test_empty_funnel_rate_zero(self):
        stats = build_funnel([TaskResult("a", Stage.VERIFY_FAILED, "no")])
        assert stats.synth_rate_pct == 0.0

    def test_published_row_math(self):
        # Gemini-2-Flash with-feedback row: 55 verified, 38 synthesized
        assert synth_rate(55, 38) == 69.1

    def test_round_trip_dict(self):
        stats = build_funnel([TaskResult("a", Stage.SYNTHESIZED, None, "cube")])
        again = FunnelStats.from_dict(json.loads(json.dumps(stats.to_dict())))
        assert again.per_task[0].task_id == "a"
        assert again.hls_synthesized == 1


@pytest.fixture
def suite_parts(tmp_path):
    cfg = load_config(SUITE_CONFIG)
    suite_cfg = _suite_config(cfg, cfg.mode, str(tmp_path))
    return cfg, suite_cfg


class TestRunSuite:
    def test_fixture_funnel_is_10_6_4_3(self, suite_parts):
        cfg, suite_cfg = suite_parts
        stats, run_dir = run_suite(
            suite_cfg, _build_gateway(cfg), _build_verify_fn(cfg), loop_cfg=cfg.loop
        )
        assert (stats.total_tasks, stats.verified, stats.compiled_to_hls,
                stats.hls_synthesized) == (10, 6, 4, 3)
        assert stats.synth_rate_pct == 50.0
        assert len(stats.per_task) == 10
        assert (run_dir / "funnel.json").is_file()
        assert (run_dir / "table2.csv").is_file()
        assert (run_dir / "episodes" / "run.jsonl").is_file()
        kernels = sorted(p.name for p in (run_dir / "kernels").glob("*.c"))
        assert "t001_cube.c" in kernels

    def test_every_task_has_exactly_one_stage(self, suite_parts):
        cfg, suite_cfg = suite_parts
        stats, _ = run_suite(
            suite_cfg, _build_gateway(cfg), _build_verify_fn(cfg), loop_cfg=cfg.loop
        )
        assert [r.task_id for r in stats.per_task] == [f"t{i:03d}" for i in range(1, 11)]

    def test_seeded_runs_byte_identical(self, tmp_path):
        cfg = load_config(SUITE_CONFIG)
        blobs = []
        for sub in ("a", "b"):
            suite_cfg = _suite_config(cfg, cfg.mode, str(tmp_path / sub))
            _, run_dir = run_suite(
                suite_cfg, _build_gateway(cfg), _build_verify_fn(cfg), loop_cfg=cfg.loop
            )
            blobs.append((run_dir / "funnel.json").read_bytes())
        assert blobs[0] == blobs[1]

    def test_parallel_jobs_match_serial(self, tmp_path):
        cfg = load_config(SUITE_CONFIG)
        outputs = []
        for jobs, sub in ((1, "serial"), (4, "parallel")):
            suite_cfg = _suite_config(cfg, cfg.mode, str(tmp_path / sub))
            suite_cfg = type(suite_cfg)(**{**suite_cfg.__dict__, "jobs": jobs})
            _, run_dir = run_suite(
                suite_cfg, _build_gateway(cfg), _build_verify_fn(cfg), loop_cfg=cfg.loop
            )
            outputs.append((run_dir / "funnel.json").read_bytes())
        assert outputs[0] == outputs[1]


class TestRateTable:
    def test_percentages_one_decimal(self):
        groups = {
            ("m", "WITH"): [record(f"t{i}", i < 55) for i in range(100)],
        }
        rows = verification_rate_table(groups)
        assert rows[0].pct == 55.0
        assert format_pct(rows[0].pct) == "55.0"

    def test_zero_verified(self):
        groups = {("m", "WITH"): [record(f"t{i}", False) for i in range(10)]}
        assert verification_rate_table(groups)[0].pct == 0.0

    def test_delta_against_baseline(self):
        groups = {
            ("m", "BASE"): [record(f"t{i}", i < 36) for i in range(100)],
            ("m", "TREAT"): [record(f"t{i}", i < 50) for i in range(100)],
        }
        rows = verification_rate_table(groups, baseline=("m", "BASE"))
        treat = next(r for r in rows if r.mode == "TREAT")
        assert treat.delta == 14.0
        assert format_delta(treat.delta) == "+14"

    def test_mismatched_task_sets_rejected(self):
        groups = {
            ("m", "A"): [record("t1", True)],
            ("m", "B"): [record("t2", True)],
        }
        with pytest.raises(MismatchedTaskSets):
            verification_rate_table(groups)

    def test_csv_written(self, tmp_path):
        groups = {("m", "WITH"): [record(f"t{i}", i % 2 == 0) for i in range(10)]}
        rows = verification_rate_table(groups)
        out = tmp_path / "table2.csv"
        write_rate_table_csv(rows, out)
        lines = out.read_text().splitlines()
        assert lines[0] == "model,mode,total,verified,pct,delta"
        assert lines[1] == "m,WITH,10,5,50.0,"


class TestPlots:
    def test_training_curves_rendered(self, tmp_path):
        from p2s.plots import read_training_csv, render_training_curves, smooth

        csv = tmp_path / "training.csv"
        lines = ["episode,reward,policy_loss,value_loss,entropy,success"]
        for i in range(1, 121):
            lines.append(f"{i},{i * 0.1},{-0.01 * i},{0.001 * i},{2.4},{i % 2}")
        csv.write_text("\n".join(lines) + "\n")
        files = render_training_curves(csv, tmp_path / "figs", scale_value_loss=True)
        assert [f.name for f in files] == ["reward.png", "policy_loss.png", "value_loss.png"]
        assert all(f.stat().st_size > 0 for f in files)
        data = read_training_csv(csv)
        assert len(smooth(data["reward"])) == len(data["reward"])

    def test_empty_log_is_schema_error(self, tmp_path):
        from p2s.plots import SchemaError, render_training_curves

        csv = tmp_path / "training.csv"
        csv.write_text("episode,reward,policy_loss,value_loss,entropy,success\n")
        with pytest.raises(SchemaError):
            render_training_curves(csv, tmp_path)

    def test_wrong_header_is_schema_error(self, tmp_path):
        from p2s.plots import SchemaError, render_training_curves

        csv = tmp_path / "training.csv"
        csv.write_text("episode,loss\n1,2\n")
        with pytest.raises(SchemaError):
            render_training_curves(csv, tmp_path)

    def test_value_loss_scaling(self):
        import numpy as np

        from p2s.plots import smooth

        raw = np.array([1.0, 2.0, 3.0])
        assert (smooth(raw * 1000.0) == smooth(raw) * 1000.0).all()

    def test_funnel_figure(self, tmp_path):
        from p2s.plots import render_funnel

        stats = build_funnel(
            [TaskResult("a", Stage.SYNTHESIZED, None), TaskResult("b", Stage.VERIFIED, "x")]
        )
        path = render_funnel(stats, tmp_path)
        assert path.is_file() and path.stat().st_size > 0


def test_compile_to_script_requires_toolchain(monkeypatch, tmp_path):
    from p2s.harness import compile_to_script
    from p2s.verifier import ToolNotFound

    monkeypatch.setenv("PATH", str(tmp_path))
    with pytest.raises(ToolNotFound):
        compile_to_script("method M() {}")
