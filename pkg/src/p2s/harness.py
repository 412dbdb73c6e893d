"""Experiment harness: suite execution over a task corpus and the derived
statistics (verification-rate table rows and the synthesis funnel).

A suite runs each task through its episode mode, lowers verified programs
to HLS C, drives synthesis, and records for every task the furthest stage
reached. Funnel counts are monotone by construction
(synthesized <= compiled <= verified <= total) and asserted on every run.
"""

from __future__ import annotations

import json
import shutil
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from . import transpiler
from .gateway import BackendConfig
from .loop import EpisodeMode, EpisodeRecord, LoopConfig, Outcome, run_baseline, run_episode
from .ppo import PolicyParams, load_checkpoint
from .synth import SynthConfig, SynthesisReport, SynthStatus, synthesize_kernel
from .tasks import TaskSpec, load_corpus
from .verifier import CandidateSource, ToolNotFound


class Stage(Enum):
    VERIFY_FAILED = "VERIFY_FAILED"
    VERIFIED = "VERIFIED"
    COMPILED_TO_HLS = "COMPILED_TO_HLS"
    SYNTHESIZED = "SYNTHESIZED"


@dataclass(frozen=True)
class TaskResult:
    task_id: str
    stage: Stage
    failure_reason: str | None
    kernel_name: str | None = None
    synthesis: SynthesisReport | None = None


@dataclass(frozen=True)
class FunnelStats:
    total_tasks: int
    verified: int
    compiled_to_hls: int
    hls_synthesized: int
    synth_rate_pct: float
    avg_elapsed_s: float
    avg_peak_memory_mb: float | None
    per_task: tuple[TaskResult, ...]

    def __post_init__(self):
        ok = (
            self.hls_synthesized
            <= self.compiled_to_hls
            <= self.verified
            <= self.total_tasks
        )
        if not ok:
            raise ValueError(
                f"funnel is not monotone: {self.hls_synthesized} / "
                f"{self.compiled_to_hls} / {self.verified} / {self.total_tasks}"
            )

    def to_dict(self) -> dict:
        return {
            "total_tasks": self.total_tasks,
            "verified": self.verified,
            "compiled_to_hls": self.compiled_to_hls,
            "hls_synthesized": self.hls_synthesized,
            "synth_rate_pct": self.synth_rate_pct,
            "avg_elapsed_s": self.avg_elapsed_s,
            "avg_peak_memory_mb": self.avg_peak_memory_mb,
            "per_task": [
                {
                    "task_id": r.task_id,
                    "stage_reached": r.stage.value,
                    "failure_reason": r.failure_reason,
                    "kernel": r.kernel_name,
                }
                for r in self.per_task
            ],
        }

    @staticmethod
    def from_dict(data: dict) -> "FunnelStats":
        return FunnelStats(
            total_tasks=data["total_tasks"],
            verified=data["verified"],
            compiled_to_hls=data["compiled_to_hls"],
            hls_synthesized=data["hls_synthesized"],
            synth_rate_pct=data["synth_rate_pct"],
            avg_elapsed_s=data["avg_elapsed_s"],
            avg_peak_memory_mb=data.get("avg_peak_memory_mb"),
            per_task=tuple(
                TaskResult(
                    task_id=r["task_id"],
                    stage=Stage(r["stage_reached"]),
                    failure_reason=r.get("failure_reason"),
                    kernel_name=r.get("kernel"),
                )
                for r in data.get("per_task", [])
            ),
        )


def synth_rate(verified: int, synthesized: int) -> float:
    """The funnel's bottom-line percentage, one decimal (0 when nothing
    verified)."""
    if verified == 0:
        return 0.0
    return round(100.0 * synthesized / verified, 1)


def build_funnel(results: Sequence[TaskResult]) -> FunnelStats:
    results = tuple(sorted(results, key=lambda r: r.task_id))
    verified = sum(r.stage in (Stage.VERIFIED, Stage.COMPILED_TO_HLS, Stage.SYNTHESIZED) for r in results)
    compiled = sum(r.stage in (Stage.COMPILED_TO_HLS, Stage.SYNTHESIZED) for r in results)
    synthesized = sum(r.stage is Stage.SYNTHESIZED for r in results)
    elapsed = [r.synthesis.elapsed_s for r in results if r.synthesis is not None]
    memories = [
        r.synthesis.peak_memory_mb
        for r in results
        if r.synthesis is not None and r.synthesis.peak_memory_mb is not None
    ]
    return FunnelStats(
        total_tasks=len(results),
        verified=verified,
        compiled_to_hls=compiled,
        hls_synthesized=synthesized,
        synth_rate_pct=synth_rate(verified, synthesized),
        avg_elapsed_s=round(sum(elapsed) / len(elapsed), 2) if elapsed else 0.0,
        avg_peak_memory_mb=round(sum(memories) / len(memories), 2) if memories else None,
        per_task=results,
    )


DAFNY_BUILD_CMD = ("dafny", "build", "--target:py")
# Backend-runtime files the build emits next to the module of interest.
_RUNTIME_FILES = ("_dafny.py", "System_.py", "_System.py", "__main__.py")


def compile_to_script(source_text: str, timeout_s: int = 300, dafny_bin: str = "dafny") -> str:
    """Compile verified source through the Dafny Python backend and return
    the emitted module text (REAL verifier mode only)."""
    if shutil.which(dafny_bin) is None:
        raise ToolNotFound(f"{dafny_bin!r} not found on PATH")
    with tempfile.TemporaryDirectory(prefix="p2s-build-") as tmp:
        dfy = Path(tmp) / "verified.dfy"
        dfy.write_text(source_text, encoding="utf-8")
        cmd = [dafny_bin, *DAFNY_BUILD_CMD[1:], str(dfy)]
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=timeout_s, cwd=tmp)
        if proc.returncode != 0:
            raise transpiler.TranspilerError(
                f"dafny build failed: {(proc.stdout or '')[-500:]}{(proc.stderr or '')[-500:]}"
            )
        emitted = [
            p
            for p in sorted(Path(tmp).rglob("*.py"))
            if p.name not in _RUNTIME_FILES
        ]
        if not emitted:
            raise transpiler.TranspilerError("dafny build produced no module file")
        return emitted[0].read_text(encoding="utf-8")


@dataclass(frozen=True)
class SuiteConfig:
    corpus_path: str
    mode: EpisodeMode
    backend: BackendConfig
    synth: SynthConfig
    output_dir: str
    seed: int = 0
    jobs: int = 1
    policy_checkpoint: str | None = None
    verifier_real: bool = False
    vectors_dir: str | None = None

    def __post_init__(self):
        if self.mode is EpisodeMode.RL_POLICY and not self.policy_checkpoint:
            raise ValueError("RL_POLICY mode requires a policy checkpoint")


def _task_episode(
    task: TaskSpec,
    cfg: SuiteConfig,
    loop_cfg: LoopConfig,
    gateway,
    verify_fn,
    policy: PolicyParams | None,
    rng: np.random.Generator,
) -> EpisodeRecord:
    if cfg.mode is EpisodeMode.RL_POLICY:
        record, _ = run_episode(task, policy, gateway, verify_fn, loop_cfg, rng)
        return record
    feedback = cfg.mode is EpisodeMode.BASELINE_WITH_FEEDBACK
    return run_baseline(task, gateway, verify_fn, feedback, loop_cfg)


def _transpile_and_synthesize(
    task: TaskSpec,
    source: CandidateSource,
    cfg: SuiteConfig,
    run_dir: Path,
) -> TaskResult:
    """Lower a verified program and drive synthesis; returns the funnel
    stage the task reached."""
    try:
        if cfg.verifier_real:
            emission = compile_to_script(source.text)
        else:
            # Simulated environments treat the candidate itself as the
            # backend emission.
            emission = source.text
        script = transpiler.sanitize(transpiler.parse_compiled_source(emission))
        kernel = transpiler.annotate(transpiler.lower(script))
    except transpiler.TranspilerError as exc:
        return TaskResult(task.id, Stage.VERIFIED, f"lowering failed: {exc}")
    except ToolNotFound as exc:
        return TaskResult(task.id, Stage.VERIFIED, f"backend compile failed: {exc}")

    vectors = None
    if cfg.vectors_dir:
        vec_path = Path(cfg.vectors_dir) / f"{kernel.name}.vectors.json"
        if vec_path.is_file():
            vectors = transpiler.TestVectors.load(vec_path)
    kernel_src, tb_src = transpiler.emit_hls(kernel, vectors)

    kernels_dir = run_dir / "kernels"
    kernels_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{task.id}_{kernel.name}"
    kernel_file = kernels_dir / f"{stem}.c"
    tb_file = kernels_dir / f"{stem}_tb.c"
    kernel_file.write_text(kernel_src, encoding="utf-8")
    tb_file.write_text(tb_src, encoding="utf-8")
    (kernels_dir / f"{stem}.ir.json").write_text(
        json.dumps(transpiler.kernel_to_dict(kernel), indent=2) + "\n", encoding="utf-8"
    )

    synth_cfg = SynthConfig(
        part=cfg.synth.part,
        clock_period_ns=cfg.synth.clock_period_ns,
        top_function=kernel.name,
        tool_mode=cfg.synth.tool_mode,
        tool_timeout_s=cfg.synth.tool_timeout_s,
        mock_table=cfg.synth.mock_table,
    )
    try:
        report = synthesize_kernel(kernel_file, tb_file, synth_cfg)
    except Exception as exc:  # tool missing, table missing, ...
        return TaskResult(task.id, Stage.COMPILED_TO_HLS, f"synthesis failed: {exc}",
                          kernel_name=kernel.name)
    reports_dir = run_dir / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    (reports_dir / f"{stem}.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if report.status is SynthStatus.SYNTHESIZED:
        return TaskResult(task.id, Stage.SYNTHESIZED, None, kernel.name, report)
    return TaskResult(
        task.id, Stage.COMPILED_TO_HLS,
        f"synthesis {report.status.value}: {report.failure_detail}",
        kernel.name, report,
    )


def run_suite(
    cfg: SuiteConfig,
    gateway,
    verify_fn,
    loop_cfg: LoopConfig | None = None,
    run_id: str = "run",
    model_label: str = "scripted",
) -> tuple[FunnelStats, Path]:
    """Run the full pipeline over the corpus; returns (stats, run directory).

    Per-task failures are recorded in the funnel, never fatal; only a corpus
    that fails to load aborts the suite. With a fixed seed the run is fully
    deterministic: per-task generators are derived from (seed, task index),
    so results do not depend on worker scheduling.
    """
    corpus = load_corpus(cfg.corpus_path)
    loop_cfg = loop_cfg or LoopConfig()
    policy = None
    if cfg.mode is EpisodeMode.RL_POLICY:
        policy, _, _, _ = load_checkpoint(cfg.policy_checkpoint)

    run_dir = Path(cfg.output_dir) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)

    def one(index_task: tuple[int, TaskSpec]) -> tuple[EpisodeRecord, TaskResult]:
        index, task = index_task
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, index)))
        record = _task_episode(task, cfg, loop_cfg, gateway, verify_fn, policy, rng)
        if record.outcome is not Outcome.VERIFIED:
            reason = record.failure or f"verification failed after {record.iterations_used} iteration(s)"
            return record, TaskResult(task.id, Stage.VERIFY_FAILED, reason)
        return record, _transpile_and_synthesize(task, record.final_source, cfg, run_dir)

    items = list(enumerate(corpus))
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(one, items))
    else:
        outcomes = [one(item) for item in items]

    records = [rec for rec, _ in outcomes]
    results = [res for _, res in outcomes]
    stats = build_funnel(results)

    episodes_dir = run_dir / "episodes"
    episodes_dir.mkdir(parents=True, exist_ok=True)
    with (episodes_dir / f"{run_id}.jsonl").open("w", encoding="utf-8") as fh:
        for record in sorted(records, key=lambda r: r.task_id):
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
    (run_dir / "funnel.json").write_text(
        json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (run_dir / "meta.json").write_text(
        json.dumps(
            {"run_id": run_id, "model": model_label, "mode": cfg.mode.value, "seed": cfg.seed},
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    rows = verification_rate_table({(model_label, cfg.mode.value): records})
    write_rate_table_csv(rows, run_dir / "table2.csv")
    return stats, run_dir


# --- verification-rate table ---------------------------------------------------

class MismatchedTaskSets(Exception):
    pass


@dataclass(frozen=True)
class RateRow:
    model: str
    mode: str
    total: int
    verified: int
    pct: float
    delta: float | None = None


def verification_rate_table(
    groups: dict[tuple[str, str], Sequence[EpisodeRecord]],
    baseline: tuple[str, str] | None = None,
) -> list[RateRow]:
    """Success percentages per (model, mode) group, one decimal place, with
    deltas against the designated baseline group. Every group must cover
    the same task set."""
    if not groups:
        return []
    task_sets = {key: frozenset(r.task_id for r in records) for key, records in groups.items()}
    reference = next(iter(task_sets.values()))
    for key, tasks in task_sets.items():
        if tasks != reference:
            raise MismatchedTaskSets(f"group {key} covers a different task set")
    pcts = {
        key: round(100.0 * sum(r.outcome is Outcome.VERIFIED for r in records) / len(records), 1)
        for key, records in groups.items()
    }
    base_pct = pcts[baseline] if baseline is not None else None
    rows = []
    for key in sorted(pcts):
        model, mode = key
        records = groups[key]
        delta = None
        if base_pct is not None and key != baseline:
            delta = round(pcts[key] - base_pct, 1)
        rows.append(
            RateRow(
                model=model,
                mode=mode,
                total=len(records),
                verified=sum(r.outcome is Outcome.VERIFIED for r in records),
                pct=pcts[key],
                delta=delta,
            )
        )
    return rows


def format_pct(value: float) -> str:
    return f"{value:.1f}"


def format_delta(value: float | None) -> str:
    if value is None:
        return ""
    text = f"{value:+.1f}"
    return text[:-2] if text.endswith(".0") else text


def write_rate_table_csv(rows: list[RateRow], path: str | Path) -> None:
    lines = ["model,mode,total,verified,pct,delta"]
    for r in rows:
        lines.append(
            f"{r.model},{r.mode},{r.total},{r.verified},{format_pct(r.pct)},{format_delta(r.delta)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
