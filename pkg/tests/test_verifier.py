import subprocess

import pytest
from hypothesis import given, strategies as st

from p2s.verifier import (
    CandidateSource,
    DiagnosticCategory,
    EMPTY_SOURCE,
    MarkerRule,
    SimRuleSet,
    ToolNotFound,
    VerifyStatus,
    parse_diagnostics,
    simulate_verify,
    verify,
)

from conftest import FIXTURES

OUTPUTS = FIXTURES / "dafny_outputs"


def read(name: str) -> str:
    return (OUTPUTS / name).read_text()


def test_parse_clean_pass():
    count, diags = parse_diagnostics(read("clean.txt"))
    assert count == 0
    assert diags == []


def test_parse_postcondition_failure():
    count, diags = parse_diagnostics(read("postcondition_fail.txt"))
    assert count == 1
    assert len(diags) == 1
    d = diags[0]
    assert d.category is DiagnosticCategory.POSTCONDITION
    assert (d.line, d.column) == (12, 5)
    assert "postcondition" in d.message


def test_parse_multi_error():
    count, diags = parse_diagnostics(read("multi_error.txt"))
    assert count == 3
    assert [d.category for d in diags] == [
        DiagnosticCategory.INVARIANT,
        DiagnosticCategory.TERMINATION,
        DiagnosticCategory.ASSERTION,
    ]


def test_parse_garbage_is_conservative_failure():
    count, diags = parse_diagnostics(read("garbage.txt"))
    assert count == 1
    assert len(diags) == 1
    assert diags[0].category is DiagnosticCategory.OTHER


def test_summary_count_beats_line_count():
    # two Error lines but the tool tallied three: the summary wins
    out = (
        "f.dfy(1,1): Error: assertion might not hold\n"
        "f.dfy(2,1): Error: assertion might not hold\n"
        "Dafny program verifier finished with 0 verified, 3 errors\n"
    )
    count, diags = parse_diagnostics(out)
    assert count == 3
    assert len(diags) == 2


@given(st.text(max_size=300))
def test_parse_is_total(text):
    count, diags = parse_diagnostics(text)
    assert count >= 0
    assert count == 0 or len(diags) >= 1 or count >= 1


def fake_run(stdout: str, returncode: int = 0):
    def _run(cmd, **kwargs):
        return subprocess.CompletedProcess(cmd, returncode, stdout=stdout, stderr="")

    return _run


def source(text: str) -> CandidateSource:
    return CandidateSource.from_text(text)


def test_verify_empty_short_circuits():
    calls = []

    def _run(cmd, **kwargs):  # pragma: no cover - must never run
        calls.append(cmd)

    report = verify(EMPTY_SOURCE, _run=_run)
    assert report.status is VerifyStatus.EMPTY_INPUT
    assert report.error_count == 1
    assert calls == []


def test_verify_parses_tool_output():
    report = verify(source("method M() {}"), _run=fake_run(read("clean.txt")))
    assert report.status is VerifyStatus.VERIFIED
    assert report.error_count == 0

    report = verify(source("method M() {}"), _run=fake_run(read("postcondition_fail.txt"), 4))
    assert report.status is VerifyStatus.FAILED
    assert report.error_count == 1


def test_verify_timeout_maps_to_timeout_status():
    def _run(cmd, **kwargs):
        raise subprocess.TimeoutExpired(cmd, kwargs.get("timeout", 1))

    report = verify(source("method M() {}"), timeout_s=1, _run=_run)
    assert report.status is VerifyStatus.TIMEOUT
    assert report.error_count == 1
    assert report.diagnostics[0].category is DiagnosticCategory.TIMEOUT


def test_verify_tool_missing():
    with pytest.raises(ToolNotFound):
        verify(source("method M() {}"), dafny_bin="definitely-not-a-real-binary")


def test_verify_command_spelling():
    seen = {}

    def _run(cmd, **kwargs):
        seen["cmd"] = cmd
        return subprocess.CompletedProcess(cmd, 0, stdout=read("clean.txt"), stderr="")

    verify(source("method M() {}"), timeout_s=42, _run=_run)
    assert seen["cmd"][0] == "dafny"
    assert seen["cmd"][1] == "verify"
    assert seen["cmd"][-1] == "--verification-time-limit:42"


def test_verify_tool_error_on_crash_output():
    report = verify(source("method M() {}"), _run=fake_run(read("garbage.txt"), 3))
    assert report.status is VerifyStatus.TOOL_ERROR
    assert report.error_count == 1


def test_simulate_bug_marker_counts():
    report = simulate_verify(source("method M() {} //BUG:3"))
    assert report.status is VerifyStatus.FAILED
    assert report.error_count == 3
    assert len(report.diagnostics) == 3
    assert all(d.category is DiagnosticCategory.INVARIANT for d in report.diagnostics)


def test_simulate_no_marker_verifies():
    report = simulate_verify(source("method M() {}"))
    assert report.status is VerifyStatus.VERIFIED
    assert report.error_count == 0


def test_simulate_empty_shares_contract_with_verify():
    assert simulate_verify(EMPTY_SOURCE).status is VerifyStatus.EMPTY_INPUT


def test_simulate_custom_rules_precede_bug_marker():
    rules = SimRuleSet(
        rules=(MarkerRule("//NEEDS_INV", 2, DiagnosticCategory.INVARIANT),)
    )
    report = simulate_verify(source("x //NEEDS_INV //BUG:5"), rules)
    assert report.error_count == 2


def test_simulate_rules_from_json():
    rules = SimRuleSet.from_json(
        '[{"marker": "//POST", "error_count": 1, "category": "POSTCONDITION"}]'
    )
    report = simulate_verify(source("code //POST"), rules)
    assert report.error_count == 1
    assert report.diagnostics[0].category is DiagnosticCategory.POSTCONDITION


def test_simulate_is_pure():
    s = source("method M() {} //BUG:2")
    assert simulate_verify(s) == simulate_verify(s)


def test_bug_zero_verifies():
    assert simulate_verify(source("x //BUG:0")).status is VerifyStatus.VERIFIED


def test_verify_many_keeps_order_and_bounds_workers():
    from p2s.verifier import verify_many

    sources = [source("method A() {}"), EMPTY_SOURCE, source("method C() {}")]
    reports = verify_many(sources, max_workers=2, _run=fake_run(read("clean.txt")))
    assert [r.status for r in reports] == [
        VerifyStatus.VERIFIED,
        VerifyStatus.EMPTY_INPUT,
        VerifyStatus.VERIFIED,
    ]
