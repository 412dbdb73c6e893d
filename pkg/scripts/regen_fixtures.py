#!/usr/bin/env python3
"""Regenerate derived test fixtures from the authored sources.

Derived fixtures (committed, but reproducible from this script):
  * tests/fixtures/golden/*.c           emitted kernels + testbenches
  * tests/fixtures/suite/scripted_rules.json   funnel-suite completions
  * tests/fixtures/suite/mock_reports.toml     kernel-hash -> bundle table
  * tests/fixtures/suite/config.toml           funnel-suite run config

Run from the repository root after changing the emitter or the emission
fixtures, then review the diff before committing.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from p2s import transpiler as T  # noqa: E402
from p2s.synth import kernel_hash  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "tests" / "fixtures"
GOLDEN_KERNELS = ("cube", "triangle_number", "triangular_prism_volume")
# Funnel suite: which emission answers which task, and which kernels the
# mock synthesizer accepts. t004's kernel is registered as a canned failure,
# t005/t006 verify but are rejected at lowering, t007-t010 fail verification.
SUITE_COMPLETIONS = {
    "t001": "cube",
    "t002": "triangle_number",
    "t003": "triangular_prism_volume",
    "t004": "scale_add",
    "t005": "while_loop",
    "t006": "recursive",
}
SUITE_BUGGY = {"t007": 1, "t008": 2, "t009": 3, "t010": 2}
MOCK_BUNDLES = {
    "cube": "../synth_bundles/cube",
    "triangle_number": "../synth_bundles/triangle_number",
    "triangular_prism_volume": "../synth_bundles/triangular_prism_volume",
}
MOCK_FAILURES = {
    "scale_add": "ERROR: [XFORM 203-504] failing fixture entry: unsupported signature",
}


def emit(name: str) -> tuple[str, str, str]:
    text = (FIXTURES / "emissions" / f"{name}.py").read_text(encoding="utf-8")
    vectors_path = FIXTURES / "vectors" / f"{name}.vectors.json"
    vectors = T.TestVectors.load(vectors_path) if vectors_path.is_file() else None
    kernel, kernel_src, tb_src = T.transpile_source(text, vectors=vectors)
    return kernel.name, kernel_src, tb_src


def regen_golden() -> dict[str, str]:
    golden = FIXTURES / "golden"
    golden.mkdir(exist_ok=True)
    sources: dict[str, str] = {}
    for name in GOLDEN_KERNELS + ("scale_add",):
        kname, kernel_src, tb_src = emit(name)
        (golden / f"{kname}.c").write_text(kernel_src, encoding="utf-8")
        (golden / f"{kname}_tb.c").write_text(tb_src, encoding="utf-8")
        sources[kname] = kernel_src
        print(f"golden: {kname}.c ({len(kernel_src)} bytes)")
    return sources


def regen_suite(kernel_sources: dict[str, str]) -> None:
    suite = FIXTURES / "suite"
    suite.mkdir(exist_ok=True)

    rules = []
    for task_id, emission in SUITE_COMPLETIONS.items():
        text = (FIXTURES / "emissions" / f"{emission}.py").read_text(encoding="utf-8")
        rules.append({"marker": f"[{task_id}]", "response": f"```python\n{text}```"})
    for task_id, bugs in SUITE_BUGGY.items():
        rules.append(
            {"marker": f"[{task_id}]", "response": f"```dafny\nmethod Broken() {{}} //BUG:{bugs}\n```"}
        )
    (suite / "scripted_rules.json").write_text(
        json.dumps({"rules": rules, "default": "//BUG:9"}, indent=2) + "\n", encoding="utf-8"
    )
    print(f"suite: scripted_rules.json ({len(rules)} rules)")

    lines = ["# kernel content hash -> canned report bundle or failure", ""]
    lines.append("[default]")
    lines.append('bundle = "../synth_bundles/cube"')
    lines.append("")
    for kname, bundle in MOCK_BUNDLES.items():
        lines.append(f'[kernels."{kernel_hash(kernel_sources[kname])}"]')
        lines.append(f'bundle = "{bundle}"  # {kname}')
        lines.append("")
    for kname, failure in MOCK_FAILURES.items():
        lines.append(f'[kernels."{kernel_hash(kernel_sources[kname])}"]')
        lines.append(f'failure = "{failure}"  # {kname}')
        lines.append("")
    (suite / "mock_reports.toml").write_text("\n".join(lines), encoding="utf-8")
    print("suite: mock_reports.toml")

    config = """\
[suite]
corpus = "../corpus"
mode = "BASELINE_WITH_FEEDBACK"
output_dir = "../../../runs"
seed = 7
jobs = 1
vectors_dir = "../vectors"

[backend]
kind = "scripted"
scripted_rules = "scripted_rules.json"

[reward]
r_succ = 10.0
alpha = 0.2
beta = 0.5
empty_penalty = -5.0
gamma = 0.99

[ppo]
clip_epsilon = 0.2
gamma = 0.99
lr = 3e-4

[loop]
t_max = 7
verifier = "simulated"

[synth]
part = "xc7z020clg484-1"
clock_period_ns = 10
tool_mode = "mock"
mock_table = "mock_reports.toml"
"""
    (suite / "config.toml").write_text(config, encoding="utf-8")
    print("suite: config.toml")


if __name__ == "__main__":
    regen_suite(regen_golden())
