"""Hardware synthesis driving and report mining.

Renders the TCL script for the target device and clock, invokes the HLS
tool when present (REAL mode), or serves canned report bundles selected by
kernel content hash (MOCK mode, used everywhere the proprietary tool is
unavailable). ``parse_report`` extracts timing and resource numbers from
the tool's XML report; it is total — malformed bundles produce a
PARSE_FAIL report, never an exception.
"""

from __future__ import annotations

import hashlib
import os
import shutil
import subprocess
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

HLS_BIN_ENV = "P2S_HLS_BIN"
_HLS_TOOL_CANDIDATES = ("vitis_hls", "vivado_hls")


class SynthToolNotFound(Exception):
    pass


class ToolMode(Enum):
    REAL = "real"
    MOCK = "mock"


@dataclass(frozen=True)
class SynthConfig:
    part: str = "xc7z020clg484-1"
    clock_period_ns: float = 10.0
    top_function: str = "kernel"
    tool_mode: ToolMode = ToolMode.MOCK
    tool_timeout_s: int = 900
    mock_table: str | None = None  # path to mock_reports.toml (MOCK mode)

    def __post_init__(self):
        if self.clock_period_ns <= 0:
            raise ValueError("clock_period_ns must be positive")
        if not self.part:
            raise ValueError("part must be non-empty")


class SynthStatus(Enum):
    SYNTHESIZED = "SYNTHESIZED"
    PARSE_FAIL = "PARSE_FAIL"
    SYNTH_FAIL = "SYNTH_FAIL"
    TIMEOUT = "TIMEOUT"


@dataclass(frozen=True)
class SynthesisReport:
    status: SynthStatus
    latency_ns: float | None = None
    initiation_interval: int | None = None
    luts: int | None = None
    dsps: int | None = None
    ffs: int | None = None
    elapsed_s: float = 0.0
    peak_memory_mb: float | None = None
    failure_detail: str | None = None

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "latency_ns": self.latency_ns,
            "initiation_interval": self.initiation_interval,
            "luts": self.luts,
            "dsps": self.dsps,
            "ffs": self.ffs,
            "elapsed_s": self.elapsed_s,
            "peak_memory_mb": self.peak_memory_mb,
            "failure_detail": self.failure_detail,
        }


@dataclass(frozen=True)
class RawReportBundle:
    """What a synthesis run hands to the parser: either a report directory
    or a failure/timeout marker."""

    report_dir: Path | None = None
    failure_detail: str | None = None
    timed_out: bool = False


def _format_number(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def render_tcl(cfg: SynthConfig, kernel_file: str | Path, tb_file: str | Path) -> str:
    """Deterministic synthesis script for the configured part and clock."""
    period = _format_number(cfg.clock_period_ns)
    lines = [
        f"open_project -reset proj_{cfg.top_function}",
        f"set_top {cfg.top_function}",
        f"add_files {Path(kernel_file).as_posix()}",
        f"add_files -tb {Path(tb_file).as_posix()}",
        "open_solution -reset solution1",
        f"set_part {{{cfg.part}}}",
        f"create_clock -period {period} -name default",
        "csynth_design",
        "exit",
    ]
    return "\n".join(lines) + "\n"


def kernel_hash(kernel_source: str) -> str:
    return hashlib.sha256(kernel_source.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class MockEntry:
    bundle: Path | None = None
    failure: str | None = None


class MockReportTable:
    """Fixture table mapping kernel content hashes to canned report bundles
    (or canned failures). Unknown hashes fall back to the default entry."""

    def __init__(self, entries: dict[str, MockEntry], default: MockEntry | None = None):
        self.entries = entries
        self.default = default

    def lookup(self, khash: str) -> MockEntry:
        entry = self.entries.get(khash, self.default)
        if entry is None:
            raise KeyError(f"no mock report for kernel hash {khash} and no default")
        return entry

    @staticmethod
    def load(path: str | Path) -> "MockReportTable":
        path = Path(path)
        data = tomllib.loads(path.read_text(encoding="utf-8"))
        base = path.parent

        def entry(raw: dict) -> MockEntry:
            if "failure" in raw:
                return MockEntry(failure=str(raw["failure"]))
            return MockEntry(bundle=base / raw["bundle"])

        entries = {k: entry(v) for k, v in data.get("kernels", {}).items()}
        default = entry(data["default"]) if "default" in data else None
        return MockReportTable(entries, default)


def _mock_elapsed_s(khash: str) -> float:
    # Deterministic per kernel, in the observed 30-38 s band.
    return 30.0 + (int(khash[:8], 16) % 800) / 100.0


def _mock_peak_memory_mb(khash: str) -> float:
    return 670.0 + (int(khash[8:16], 16) % 4000) / 100.0


def run_synthesis(
    script: str,
    cfg: SynthConfig,
    kernel_file: str | Path,
) -> tuple[RawReportBundle, float, float | None]:
    """Run one synthesis job; returns (bundle, elapsed_s, peak_memory_mb).

    REAL mode launches the vendor tool on the rendered script under the
    configured timeout (tool discovery: $P2S_HLS_BIN, then vitis_hls /
    vivado_hls on PATH). MOCK mode serves the fixture table entry for the
    kernel's content hash with synthetic, deterministic elapsed/memory
    numbers.
    """
    kernel_file = Path(kernel_file)
    if cfg.tool_mode is ToolMode.MOCK:
        if not cfg.mock_table:
            raise ValueError("MOCK mode requires cfg.mock_table")
        table = MockReportTable.load(cfg.mock_table)
        khash = kernel_hash(kernel_file.read_text(encoding="utf-8"))
        entry = table.lookup(khash)
        elapsed = _mock_elapsed_s(khash)
        memory = _mock_peak_memory_mb(khash)
        if entry.failure is not None:
            return RawReportBundle(failure_detail=entry.failure), elapsed, memory
        return RawReportBundle(report_dir=entry.bundle), elapsed, memory

    tool = os.environ.get(HLS_BIN_ENV)
    if not tool:
        for candidate in _HLS_TOOL_CANDIDATES:
            if shutil.which(candidate):
                tool = candidate
                break
    if not tool or not shutil.which(tool):
        raise SynthToolNotFound(
            f"no HLS tool found (set ${HLS_BIN_ENV} or put one of "
            f"{_HLS_TOOL_CANDIDATES} on PATH)"
        )

    workdir = kernel_file.parent
    script_path = workdir / f"synth_{cfg.top_function}.tcl"
    script_path.write_text(script, encoding="utf-8")
    started = time.monotonic()
    try:
        proc = subprocess.run(
            [tool, "-f", str(script_path)],
            cwd=workdir,
            capture_output=True,
            text=True,
            timeout=cfg.tool_timeout_s,
        )
    except subprocess.TimeoutExpired:
        elapsed = time.monotonic() - started
        return RawReportBundle(timed_out=True), elapsed, _child_peak_memory_mb()
    elapsed = time.monotonic() - started
    memory = _child_peak_memory_mb()
    if proc.returncode != 0:
        tail = (proc.stdout or "")[-2000:] + (proc.stderr or "")[-2000:]
        return RawReportBundle(failure_detail=f"tool exited {proc.returncode}: {tail}"), elapsed, memory
    report_dir = workdir / f"proj_{cfg.top_function}" / "solution1" / "syn" / "report"
    return RawReportBundle(report_dir=report_dir), elapsed, memory


def _child_peak_memory_mb() -> float | None:
    # ru_maxrss of children is KiB on Linux, bytes on macOS.
    try:
        import resource
        import sys

        usage = resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss
        if usage == 0:
            return None
        if sys.platform == "darwin":
            return usage / (1024 * 1024)
        return usage / 1024
    except Exception:
        return None


def _find_report_xml(report_dir: Path) -> Path | None:
    candidates = sorted(report_dir.glob("*_csynth.xml"))
    return candidates[0] if candidates else None


def _xml_text(root, path: str) -> str | None:
    node = root.find(path)
    return None if node is None or node.text is None else node.text.strip()


def parse_report(
    bundle: RawReportBundle,
    cfg: SynthConfig,
    elapsed_s: float = 0.0,
    peak_memory_mb: float | None = None,
) -> SynthesisReport:
    """Extract latency and resource totals from a report bundle.

    Latency is reported in nanoseconds: worst-case cycle count times the
    configured clock period. Missing files or elements yield PARSE_FAIL
    with the missing piece named in failure_detail.
    """

    def fail(status: SynthStatus, detail: str) -> SynthesisReport:
        return SynthesisReport(
            status=status,
            elapsed_s=elapsed_s,
            peak_memory_mb=peak_memory_mb,
            failure_detail=detail,
        )

    if bundle.timed_out:
        return fail(SynthStatus.TIMEOUT, "synthesis timed out")
    if bundle.failure_detail is not None:
        return fail(SynthStatus.SYNTH_FAIL, bundle.failure_detail)
    if bundle.report_dir is None or not Path(bundle.report_dir).is_dir():
        return fail(SynthStatus.PARSE_FAIL, f"report directory missing: {bundle.report_dir}")
    xml_path = _find_report_xml(Path(bundle.report_dir))
    if xml_path is None:
        return fail(SynthStatus.PARSE_FAIL, "no *_csynth.xml in report bundle")
    try:
        root = ET.parse(xml_path).getroot()
    except ET.ParseError as exc:
        return fail(SynthStatus.PARSE_FAIL, f"malformed XML: {exc}")

    worst = _xml_text(root, "./PerformanceEstimates/SummaryOfOverallLatency/Worst-caseLatency")
    if worst is None:
        return fail(SynthStatus.PARSE_FAIL, "missing element Worst-caseLatency")
    interval = _xml_text(
        root, "./PerformanceEstimates/SummaryOfOverallLatency/PipelineInitiationInterval"
    )
    resources = {}
    for key in ("LUT", "DSP48E", "FF"):
        text = _xml_text(root, f"./AreaEstimates/Resources/{key}")
        if text is None:
            return fail(SynthStatus.PARSE_FAIL, f"missing element {key}")
        resources[key] = int(text)
    try:
        cycles = int(worst)
    except ValueError:
        return fail(SynthStatus.PARSE_FAIL, f"non-numeric Worst-caseLatency {worst!r}")
    return SynthesisReport(
        status=SynthStatus.SYNTHESIZED,
        latency_ns=cycles * cfg.clock_period_ns,
        initiation_interval=int(interval) if interval and interval.isdigit() else None,
        luts=resources["LUT"],
        dsps=resources["DSP48E"],
        ffs=resources["FF"],
        elapsed_s=elapsed_s,
        peak_memory_mb=peak_memory_mb,
    )


def synthesize_kernel(
    kernel_file: str | Path,
    tb_file: str | Path,
    cfg: SynthConfig,
) -> SynthesisReport:
    """Render the script, run synthesis, and parse the resulting bundle."""
    script = render_tcl(cfg, kernel_file, tb_file)
    bundle, elapsed, memory = run_synthesis(script, cfg, kernel_file)
    return parse_report(bundle, cfg, elapsed_s=elapsed, peak_memory_mb=memory)
