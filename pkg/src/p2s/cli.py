"""Command-line entry point.

Subcommands: run (full pipeline suite), train, baseline, transpile, synth,
report, gradcheck. Exit codes: 0 success, 1 configuration error, 2
suite-level failure.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import transpiler
from .config import ConfigError, RunConfig, load_config
from .gateway import BackendKind, ReplayBackend, RemoteBackend, ScriptedBackend
from .harness import (
    FunnelStats,
    SuiteConfig,
    run_suite,
)
from .loop import EpisodeMode, train_policy
from .ppo import grad_check, init_params, synthetic_batch, PpoConfig
from .synth import SynthConfig, synthesize_kernel
from .tasks import TaskError, load_corpus
from .verifier import ToolNotFound, simulate_verify, verify


def _build_gateway(cfg: RunConfig):
    if cfg.backend.kind is BackendKind.SCRIPTED:
        if cfg.scripted_builtin:
            if cfg.scripted_builtin != "repair_env":
                raise ConfigError(f"unknown backend.script_builtin {cfg.scripted_builtin!r}")
            from .scripted_env import repair_script

            return ScriptedBackend(repair_script(cfg.loop.catalog), backend_id="scripted-repair")
        return ScriptedBackend(cfg.scripted_rules, default=cfg.scripted_default)
    if cfg.backend.kind is BackendKind.REPLAY:
        if not cfg.replay_store:
            raise ConfigError("backend.replay_store is required for the replay backend")
        return ReplayBackend(cfg.replay_store, model_name=cfg.backend.model_name)
    return RemoteBackend(cfg.backend)


def _build_verify_fn(cfg: RunConfig):
    if cfg.verifier_real:
        return lambda code: verify(code)
    rules = cfg.sim_rules
    return lambda code: simulate_verify(code, rules)


def _suite_config(cfg: RunConfig, mode: EpisodeMode, output_dir: str | None) -> SuiteConfig:
    return SuiteConfig(
        corpus_path=cfg.corpus_path,
        mode=mode,
        backend=cfg.backend,
        synth=cfg.synth,
        output_dir=output_dir or cfg.output_dir,
        seed=cfg.seed,
        jobs=cfg.jobs,
        policy_checkpoint=cfg.policy_checkpoint,
        verifier_real=cfg.verifier_real,
        vectors_dir=cfg.vectors_dir,
    )


def _config_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, TaskError, ValueError) as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _print_funnel(stats: FunnelStats):
    click.echo(
        f"tasks={stats.total_tasks} verified={stats.verified} "
        f"compiled_to_hls={stats.compiled_to_hls} synthesized={stats.hls_synthesized} "
        f"({stats.synth_rate_pct:.1f}%)"
    )
    for row in stats.per_task:
        reason = f"  [{row.failure_reason}]" if row.failure_reason else ""
        click.echo(f"  {row.task_id}: {row.stage.value}{reason}")


@click.group()
def main():
    """Verifier-guided prompt repair and HLS lowering pipeline."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--output-dir", default=None, help="Override [suite].output_dir.")
@click.option("--run-id", default="run", show_default=True)
@click.option("--jobs", default=None, type=int, help="Override [suite].jobs.")
@click.option("--mode", default=None, help="Override [suite].mode.")
@_config_errors
def run(config_path, output_dir, run_id, jobs, mode):
    """Run the full pipeline suite over the corpus."""
    cfg = load_config(config_path)
    episode_mode = EpisodeMode(mode) if mode else cfg.mode
    suite_cfg = _suite_config(cfg, episode_mode, output_dir)
    if jobs:
        suite_cfg = SuiteConfig(**{**suite_cfg.__dict__, "jobs": jobs})
    try:
        stats, run_dir = run_suite(
            suite_cfg,
            _build_gateway(cfg),
            _build_verify_fn(cfg),
            loop_cfg=cfg.loop,
            run_id=run_id,
            model_label=cfg.backend.model_name or cfg.backend.kind.value,
        )
    except TaskError as exc:
        click.echo(f"suite failed: {exc}", err=True)
        sys.exit(2)
    _print_funnel(stats)
    click.echo(f"artifacts in {run_dir}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--episodes", default=None, type=int, help="Override [suite].train_episodes.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@_config_errors
def train(config_path, episodes, out_dir):
    """Train the repair policy on the configured (scripted) environment."""
    cfg = load_config(config_path)
    corpus = load_corpus(cfg.corpus_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params, rows = train_policy(
        corpus,
        _build_gateway(cfg),
        _build_verify_fn(cfg),
        cfg.ppo,
        cfg.loop,
        episodes=episodes if episodes is not None else cfg.train_episodes,
        batch_episodes=cfg.batch_episodes,
        hidden_size=cfg.hidden_size,
        checkpoint_dir=out / "checkpoints",
        log_path=out / "training.csv",
    )
    success = sum(r[5] for r in rows)
    click.echo(f"trained {len(rows)} episodes, {success} verified; logs in {out}")


@main.command()
@click.option("--feedback", type=click.Choice(["on", "off"]), required=True)
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--output-dir", default=None)
@click.option("--run-id", default="baseline", show_default=True)
@_config_errors
def baseline(feedback, config_path, output_dir, run_id):
    """Run a static-prompting baseline (single-shot or error-feedback)."""
    cfg = load_config(config_path)
    mode = (
        EpisodeMode.BASELINE_WITH_FEEDBACK
        if feedback == "on"
        else EpisodeMode.BASELINE_NO_FEEDBACK
    )
    stats, run_dir = run_suite(
        _suite_config(cfg, mode, output_dir),
        _build_gateway(cfg),
        _build_verify_fn(cfg),
        loop_cfg=cfg.loop,
        run_id=run_id,
        model_label=cfg.backend.model_name or cfg.backend.kind.value,
    )
    _print_funnel(stats)
    click.echo(f"artifacts in {run_dir}")


@main.command()
@click.argument("source_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", default="transpiled", show_default=True)
@click.option("--vectors-dir", default=None, type=click.Path(exists=True, file_okay=False))
def transpile(source_dir, out_dir, vectors_dir):
    """Lower sources in SOURCE_DIR to HLS C.

    Accepts backend-emission .py files directly; .dfy files are first
    compiled through the Dafny Python backend (requires the toolchain).
    """
    from .harness import compile_to_script

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sources = sorted(Path(source_dir).glob("*.py")) + sorted(Path(source_dir).glob("*.dfy"))
    if not sources:
        click.echo("no .py emission or .dfy files found", err=True)
        sys.exit(1)
    failures = 0
    for src in sources:
        try:
            vectors = None
            if src.suffix == ".dfy":
                emission_text = compile_to_script(src.read_text(encoding="utf-8"))
            else:
                emission_text = src.read_text(encoding="utf-8")
            kernel = transpiler.annotate(
                transpiler.lower(
                    transpiler.sanitize(transpiler.parse_compiled_source(emission_text))
                )
            )
            if vectors_dir:
                vec = Path(vectors_dir) / f"{kernel.name}.vectors.json"
                if vec.is_file():
                    vectors = transpiler.TestVectors.load(vec)
            kernel_src, tb_src = transpiler.emit_hls(kernel, vectors)
            (out / f"{kernel.name}.c").write_text(kernel_src, encoding="utf-8")
            (out / f"{kernel.name}_tb.c").write_text(tb_src, encoding="utf-8")
            (out / f"{kernel.name}.ir.json").write_text(
                json.dumps(transpiler.kernel_to_dict(kernel), indent=2) + "\n",
                encoding="utf-8",
            )
            click.echo(f"{src.name}: OK -> {kernel.name}.c")
        except transpiler.Rejected as exc:
            failures += 1
            click.echo(f"{src.name}: REJECTED ({exc.reason.value}) {exc.detail}")
        except transpiler.TranspilerError as exc:
            failures += 1
            click.echo(f"{src.name}: FAILED {exc}")
        except ToolNotFound as exc:
            failures += 1
            click.echo(f"{src.name}: FAILED {exc}")
    click.echo(f"{len(sources) - failures}/{len(sources)} lowered")


@main.command()
@click.argument("kernel_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--tb", "tb_file", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--top", default=None, help="Top function (default: kernel file stem).")
@_config_errors
def synth(kernel_file, tb_file, config_path, top):
    """Synthesize one emitted kernel and print the parsed report."""
    kernel_path = Path(kernel_file)
    tb = Path(tb_file) if tb_file else kernel_path.with_name(f"{kernel_path.stem}_tb.c")
    if config_path:
        base = load_config(config_path).synth
    else:
        base = SynthConfig()
    cfg = SynthConfig(
        part=base.part,
        clock_period_ns=base.clock_period_ns,
        top_function=top or kernel_path.stem,
        tool_mode=base.tool_mode,
        tool_timeout_s=base.tool_timeout_s,
        mock_table=base.mock_table,
    )
    try:
        report = synthesize_kernel(kernel_path, tb, cfg)
    except Exception as exc:
        click.echo(f"synthesis failed: {exc}", err=True)
        sys.exit(2)
    click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if report.status.value != "SYNTHESIZED":
        sys.exit(2)


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--scale-value-loss/--no-scale-value-loss", default=True, show_default=True,
              help="Scale the value-loss curve x1000 next to the policy loss.")
def report(run_dir, scale_value_loss):
    """Render figures and delimited summaries for a finished run."""
    from .plots import SchemaError, render_funnel, render_training_curves

    run_path = Path(run_dir)
    figures_dir = run_path / "figures"
    produced: list[Path] = []

    funnel_path = run_path / "funnel.json"
    if funnel_path.is_file():
        stats = FunnelStats.from_dict(json.loads(funnel_path.read_text(encoding="utf-8")))
        _print_funnel(stats)
        produced.append(render_funnel(stats, figures_dir))
        lines = ["task_id,stage_reached,failure_reason"]
        for row in stats.per_task:
            reason = (row.failure_reason or "").replace(",", ";")
            lines.append(f"{row.task_id},{row.stage.value},{reason}")
        per_task_csv = run_path / "per_task.csv"
        per_task_csv.write_text("\n".join(lines) + "\n", encoding="utf-8")
        produced.append(per_task_csv)

    training_csv = run_path / "training.csv"
    if training_csv.is_file():
        try:
            produced.extend(
                render_training_curves(training_csv, figures_dir, scale_value_loss=scale_value_loss)
            )
        except SchemaError as exc:
            click.echo(f"training log unusable: {exc}", err=True)
            sys.exit(2)

    if not produced:
        click.echo("nothing to report: no funnel.json or training.csv found", err=True)
        sys.exit(2)
    for path in produced:
        click.echo(f"wrote {path}")


@main.command()
@click.option("--seeds", default=5, show_default=True)
@click.option("--batch", default=16, show_default=True)
@click.option("--hidden", default=8, show_default=True)
@click.option("--tolerance", default=1e-4, show_default=True)
def gradcheck(seeds, batch, hidden, tolerance):
    """Validate the analytic PPO gradients against finite differences."""
    cfg = PpoConfig()
    worst = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        params = init_params(24, hidden, 12, seed=seed + 1000)
        # nudge the zero output layers so actor gradients are generic
        params.w2 += rng.normal(0, 0.1, params.w2.shape)
        params.v2 += rng.normal(0, 0.1, params.v2.shape)
        transitions = synthetic_batch(rng, d=24, n_actions=12, size=batch)
        err = grad_check(params, transitions, cfg, rng=rng)
        worst = max(worst, err)
        click.echo(f"seed {seed}: max relative error {err:.3e}")
    click.echo(f"worst: {worst:.3e} (tolerance {tolerance:.1e})")
    if worst >= tolerance:
        sys.exit(2)


if __name__ == "__main__":
    main()
