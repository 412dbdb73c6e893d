"""Dafny verifier integration: subprocess driver, diagnostic parsing, and a
deterministic simulated verifier for offline tests and policy training.

The real driver writes candidate source to a temp file and invokes the
``dafny verify`` CLI (4.x flag spelling). The parser is total: any byte
string yields a report, falling back to a conservative single-error report
when nothing recognizable is found.
"""

from __future__ import annotations

import json
import os
import re
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class ToolNotFound(Exception):
    """The Dafny toolchain is not on PATH (real mode only)."""


class DiagnosticCategory(Enum):
    POSTCONDITION = "POSTCONDITION"
    PRECONDITION = "PRECONDITION"
    INVARIANT = "INVARIANT"
    TERMINATION = "TERMINATION"
    ASSERTION = "ASSERTION"
    PARSE_OR_TYPE = "PARSE_OR_TYPE"
    TIMEOUT = "TIMEOUT"
    OTHER = "OTHER"


# Fixed order used by the state encoder's per-category histogram.
CATEGORY_ORDER = tuple(DiagnosticCategory)


class VerifyStatus(Enum):
    VERIFIED = "VERIFIED"
    FAILED = "FAILED"
    TOOL_ERROR = "TOOL_ERROR"
    TIMEOUT = "TIMEOUT"
    EMPTY_INPUT = "EMPTY_INPUT"


@dataclass(frozen=True)
class CandidateSource:
    """Candidate program text extracted from a model completion."""

    text: str
    is_empty: bool

    @staticmethod
    def from_text(text: str) -> "CandidateSource":
        return CandidateSource(text=text, is_empty=not text.strip())


EMPTY_SOURCE = CandidateSource(text="", is_empty=True)


@dataclass(frozen=True)
class Diagnostic:
    category: DiagnosticCategory
    message: str
    line: int | None = None
    column: int | None = None

    def to_dict(self) -> dict:
        return {
            "category": self.category.value,
            "message": self.message,
            "line": self.line,
            "column": self.column,
        }


@dataclass(frozen=True)
class VerifierReport:
    error_count: int
    diagnostics: tuple[Diagnostic, ...]
    status: VerifyStatus
    wall_time_ms: int = 0

    def to_dict(self) -> dict:
        return {
            "error_count": self.error_count,
            "status": self.status.value,
            "wall_time_ms": self.wall_time_ms,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }


VERIFIED_REPORT = VerifierReport(0, (), VerifyStatus.VERIFIED)

# Per-line diagnostic: `file.dfy(12,5): Error: message`
_DIAG_RE = re.compile(r"^(?P<file>[^\s(][^(]*)\((?P<line>\d+),(?P<col>\d+)\):\s*Error:\s*(?P<msg>.*)$")
# Diagnostics the tool prints without a location (rare; parse/usage errors).
_BARE_ERROR_RE = re.compile(r"^Error:\s*(?P<msg>.*)$")
# Tool tally: `Dafny program verifier finished with 3 verified, 1 errors`
_SUMMARY_RE = re.compile(r"finished with (?P<verified>\d+) verified, (?P<errors>\d+) error")

# Keyword rules assigning a category to an error message. First hit wins;
# the table order resolves messages mentioning several keywords.
_CATEGORY_KEYWORDS = (
    (DiagnosticCategory.POSTCONDITION, ("postcondition",)),
    (DiagnosticCategory.PRECONDITION, ("precondition",)),
    (DiagnosticCategory.INVARIANT, ("invariant",)),
    (DiagnosticCategory.TERMINATION, ("decreases", "termination", "terminate")),
    (DiagnosticCategory.ASSERTION, ("assertion",)),
    (
        DiagnosticCategory.PARSE_OR_TYPE,
        ("parse", "parser", "resolution", "resolver", "unresolved", "type error",
         "rbrace", "expected", "undeclared", "duplicate", "not resolve"),
    ),
    (DiagnosticCategory.TIMEOUT, ("timed out", "time out", "timeout")),
)


def categorize_message(message: str) -> DiagnosticCategory:
    lowered = message.lower()
    for category, keywords in _CATEGORY_KEYWORDS:
        if any(k in lowered for k in keywords):
            return category
    return DiagnosticCategory.OTHER


def parse_diagnostics(tool_output: str) -> tuple[int, list[Diagnostic]]:
    """Parse verifier stdout/stderr into (error_count, diagnostics).

    Total over arbitrary byte strings. The summary-line tally is
    authoritative when present; otherwise the error count is the number of
    per-line Error diagnostics. Output with neither yields the conservative
    failure (1, [OTHER diagnostic carrying the raw tail]).
    """
    diagnostics: list[Diagnostic] = []
    summary_errors: int | None = None
    for raw_line in tool_output.splitlines():
        line = raw_line.rstrip()
        m = _DIAG_RE.match(line)
        if m:
            diagnostics.append(
                Diagnostic(
                    category=categorize_message(m.group("msg")),
                    message=m.group("msg").strip(),
                    line=int(m.group("line")),
                    column=int(m.group("col")),
                )
            )
            continue
        m = _BARE_ERROR_RE.match(line)
        if m:
            diagnostics.append(
                Diagnostic(
                    category=categorize_message(m.group("msg")),
                    message=m.group("msg").strip(),
                )
            )
            continue
        m = _SUMMARY_RE.search(line)
        if m:
            summary_errors = int(m.group("errors"))
    if summary_errors is not None:
        return summary_errors, diagnostics
    if diagnostics:
        return len(diagnostics), diagnostics
    tail = tool_output[-500:].strip()
    fallback = Diagnostic(
        category=DiagnosticCategory.OTHER,
        message=f"unrecognized verifier output: {tail!r}",
    )
    return 1, [fallback]


DAFNY_BIN = "dafny"
# Flag spelling pinned to the Dafny 4.x CLI.
TIME_LIMIT_FLAG = "--verification-time-limit:{seconds}"


def _timeout_report(timeout_s: int, wall_time_ms: int) -> VerifierReport:
    diag = Diagnostic(
        category=DiagnosticCategory.TIMEOUT,
        message=f"verification exceeded {timeout_s} s",
    )
    return VerifierReport(1, (diag,), VerifyStatus.TIMEOUT, wall_time_ms)


def verify(
    source: CandidateSource,
    timeout_s: int = 60,
    dafny_bin: str = DAFNY_BIN,
    _run=subprocess.run,
) -> VerifierReport:
    """Run the Dafny verifier on candidate source.

    Empty input short-circuits to status EMPTY_INPUT (error_count 1 by
    convention) without touching the filesystem or spawning a process.
    ``_run`` exists so tests can substitute a canned subprocess runner.
    """
    if source.is_empty:
        return VerifierReport(1, (), VerifyStatus.EMPTY_INPUT, 0)
    if _run is subprocess.run and shutil.which(dafny_bin) is None:
        raise ToolNotFound(f"{dafny_bin!r} not found on PATH")
    started = time.monotonic()
    with tempfile.TemporaryDirectory(prefix="p2s-verify-") as tmp:
        dfy = Path(tmp) / "candidate.dfy"
        dfy.write_text(source.text, encoding="utf-8")
        cmd = [dafny_bin, "verify", str(dfy), TIME_LIMIT_FLAG.format(seconds=timeout_s)]
        try:
            proc = _run(
                cmd,
                capture_output=True,
                text=True,
                timeout=timeout_s + 15,
            )
        except FileNotFoundError as exc:
            raise ToolNotFound(f"{dafny_bin!r} not found on PATH") from exc
        except subprocess.TimeoutExpired:
            wall = int((time.monotonic() - started) * 1000)
            return _timeout_report(timeout_s, wall)
    wall = int((time.monotonic() - started) * 1000)
    output = (proc.stdout or "") + "\n" + (proc.stderr or "")
    error_count, diagnostics = parse_diagnostics(output)
    if error_count == 0:
        status = VerifyStatus.VERIFIED
    elif any(d.category is DiagnosticCategory.TIMEOUT for d in diagnostics):
        status = VerifyStatus.TIMEOUT
    elif (
        len(diagnostics) == 1
        and diagnostics[0].message.startswith("unrecognized verifier output")
        and proc.returncode not in (0, 4)
    ):
        # Exit code 4 is Dafny's "verification errors" code; anything else
        # with unparseable output means the tool itself misbehaved.
        status = VerifyStatus.TOOL_ERROR
    else:
        status = VerifyStatus.FAILED
    return VerifierReport(error_count, tuple(diagnostics), status, wall)


def verify_many(
    sources: list[CandidateSource],
    timeout_s: int = 60,
    max_workers: int | None = None,
    dafny_bin: str = DAFNY_BIN,
    _run=subprocess.run,
) -> list[VerifierReport]:
    """Verify independent sources concurrently (default bound: CPU count).
    Results keep the input order."""
    from concurrent.futures import ThreadPoolExecutor

    workers = max_workers or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(
            pool.map(lambda s: verify(s, timeout_s, dafny_bin=dafny_bin, _run=_run), sources)
        )


# --- simulated verifier -----------------------------------------------------

# Marker for the parametric rule: `//BUG:k` in the source yields k simulated
# diagnostics.
_BUG_RE = re.compile(r"//BUG:(\d+)")


@dataclass(frozen=True)
class MarkerRule:
    marker: str
    error_count: int
    category: DiagnosticCategory


@dataclass(frozen=True)
class SimRuleSet:
    """Declarative rules for the simulated verifier.

    Custom marker rules are checked in order; the built-in ``//BUG:k``
    counter applies after them; a source matching nothing verifies.
    """

    rules: tuple[MarkerRule, ...] = ()
    bug_category: DiagnosticCategory = DiagnosticCategory.INVARIANT

    @staticmethod
    def default() -> "SimRuleSet":
        return SimRuleSet()

    @staticmethod
    def from_json(text: str) -> "SimRuleSet":
        entries = json.loads(text)
        rules = tuple(
            MarkerRule(
                marker=e["marker"],
                error_count=int(e["error_count"]),
                category=DiagnosticCategory(e["category"]),
            )
            for e in entries
        )
        return SimRuleSet(rules=rules)


def _simulated_diagnostics(count: int, category: DiagnosticCategory) -> tuple[Diagnostic, ...]:
    return tuple(
        Diagnostic(
            category=category,
            message=f"simulated {category.value.lower()} failure {i + 1} of {count}",
            line=i + 1,
            column=1,
        )
        for i in range(count)
    )


def simulate_verify(source: CandidateSource, rules: SimRuleSet | None = None) -> VerifierReport:
    """Deterministic stand-in for verify: the report is a pure function of
    marker substrings in the source."""
    rules = rules or SimRuleSet.default()
    if source.is_empty:
        return VerifierReport(1, (), VerifyStatus.EMPTY_INPUT, 0)
    for rule in rules.rules:
        if rule.marker in source.text:
            if rule.error_count <= 0:
                return VERIFIED_REPORT
            diags = _simulated_diagnostics(rule.error_count, rule.category)
            return VerifierReport(rule.error_count, diags, VerifyStatus.FAILED, 0)
    m = _BUG_RE.search(source.text)
    if m:
        count = int(m.group(1))
        if count <= 0:
            return VERIFIED_REPORT
        diags = _simulated_diagnostics(count, rules.bug_category)
        return VerifierReport(count, diags, VerifyStatus.FAILED, 0)
    return VERIFIED_REPORT
