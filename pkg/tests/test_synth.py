from pathlib import Path

import pytest

from p2s.synth import (
    MockReportTable,
    RawReportBundle,
    SynthConfig,
    SynthStatus,
    SynthToolNotFound,
    ToolMode,
    kernel_hash,
    parse_report,
    render_tcl,
    run_synthesis,
)

from conftest import FIXTURES

BUNDLES = FIXTURES / "synth_bundles"


class TestRenderTcl:
    def test_defaults_pin_device_and_clock(self):
        cfg = SynthConfig(top_function="cube")
        script = render_tcl(cfg, "cube.c", "cube_tb.c")
        assert "create_clock -period 10" in script
        assert "xc7z020clg484-1" in script
        assert "set_top cube" in script
        assert "add_files cube.c" in script
        assert "add_files -tb cube_tb.c" in script
        assert "csynth_design" in script

    def test_custom_clock_replaces_default(self):
        cfg = SynthConfig(top_function="k", clock_period_ns=5)
        script = render_tcl(cfg, "k.c", "k_tb.c")
        assert "-period 5" in script
        assert "10" not in script.split("create_clock")[1].splitlines()[0]

    def test_byte_stable(self):
        cfg = SynthConfig(top_function="cube")
        assert render_tcl(cfg, "a.c", "b.c") == render_tcl(cfg, "a.c", "b.c")

    def test_fractional_period_rendered(self):
        cfg = SynthConfig(top_function="k", clock_period_ns=6.5)
        assert "-period 6.5" in render_tcl(cfg, "k.c", "k_tb.c")


class TestParseReport:
    def test_cube_matches_published_row(self):
        report = parse_report(
            RawReportBundle(report_dir=BUNDLES / "cube"), SynthConfig(top_function="cube")
        )
        assert report.status is SynthStatus.SYNTHESIZED
        assert report.latency_ns == 60.0
        assert (report.luts, report.dsps, report.ffs) == (685, 6, 789)

    def test_triangle_number_matches_published_row(self):
        report = parse_report(
            RawReportBundle(report_dir=BUNDLES / "triangle_number"),
            SynthConfig(top_function="triangle_number"),
        )
        assert report.status is SynthStatus.SYNTHESIZED
        assert report.latency_ns == 50.0
        assert (report.luts, report.dsps, report.ffs) == (511, 3, 436)

    def test_latency_is_cycles_times_clock(self):
        # same bundle parsed at a 5 ns clock: half the nanoseconds
        report = parse_report(
            RawReportBundle(report_dir=BUNDLES / "cube"),
            SynthConfig(top_function="cube", clock_period_ns=5),
        )
        assert report.latency_ns == 30.0

    def test_malformed_xml_is_parse_fail(self):
        report = parse_report(
            RawReportBundle(report_dir=BUNDLES / "malformed"), SynthConfig()
        )
        assert report.status is SynthStatus.PARSE_FAIL
        assert "XML" in report.failure_detail or "element" in report.failure_detail

    def test_missing_element_named(self, tmp_path):
        xml = tmp_path / "k_csynth.xml"
        xml.write_text(
            "<profile><PerformanceEstimates><SummaryOfOverallLatency>"
            "<Worst-caseLatency>6</Worst-caseLatency>"
            "</SummaryOfOverallLatency></PerformanceEstimates>"
            "<AreaEstimates><Resources><LUT>1</LUT><FF>2</FF></Resources></AreaEstimates>"
            "</profile>"
        )
        report = parse_report(RawReportBundle(report_dir=tmp_path), SynthConfig())
        assert report.status is SynthStatus.PARSE_FAIL
        assert "DSP48E" in report.failure_detail

    def test_missing_directory_is_parse_fail(self):
        report = parse_report(RawReportBundle(report_dir=Path("/nonexistent")), SynthConfig())
        assert report.status is SynthStatus.PARSE_FAIL

    def test_failure_bundle_is_synth_fail(self):
        report = parse_report(RawReportBundle(failure_detail="ERROR: vendor says no"), SynthConfig())
        assert report.status is SynthStatus.SYNTH_FAIL
        assert report.failure_detail == "ERROR: vendor says no"

    def test_timeout_bundle(self):
        report = parse_report(RawReportBundle(timed_out=True), SynthConfig())
        assert report.status is SynthStatus.TIMEOUT

    def test_garbage_bytes_never_crash(self, tmp_path):
        (tmp_path / "x_csynth.xml").write_bytes(b"\x00\xff\xfe garbage")
        report = parse_report(RawReportBundle(report_dir=tmp_path), SynthConfig())
        assert report.status is SynthStatus.PARSE_FAIL


def write_mock_table(tmp_path, kernel_text: str, entry: str) -> Path:
    table = tmp_path / "mock_reports.toml"
    table.write_text(
        f'[kernels."{kernel_hash(kernel_text)}"]\n{entry}\n'
        f"[default]\nbundle = \"{(BUNDLES / 'cube').as_posix()}\"\n"
    )
    return table


class TestMockMode:
    def test_mock_serves_bundle_by_hash(self, tmp_path):
        kernel = tmp_path / "k.c"
        kernel.write_text("int32_t k(void) { return 1; }\n")
        table = write_mock_table(
            tmp_path, kernel.read_text(), f"bundle = \"{(BUNDLES / 'triangle_number').as_posix()}\""
        )
        cfg = SynthConfig(tool_mode=ToolMode.MOCK, mock_table=str(table), top_function="k")
        bundle, elapsed, memory = run_synthesis("script", cfg, kernel)
        assert bundle.report_dir == BUNDLES / "triangle_number"
        assert 30.0 <= elapsed < 38.0
        assert 670.0 <= memory < 710.0

    def test_mock_failure_entry(self, tmp_path):
        kernel = tmp_path / "k.c"
        kernel.write_text("bad kernel\n")
        table = write_mock_table(tmp_path, kernel.read_text(), 'failure = "ERROR: nope"')
        cfg = SynthConfig(tool_mode=ToolMode.MOCK, mock_table=str(table))
        bundle, _, _ = run_synthesis("script", cfg, kernel)
        assert bundle.failure_detail == "ERROR: nope"
        report = parse_report(bundle, cfg)
        assert report.status is SynthStatus.SYNTH_FAIL

    def test_mock_unknown_hash_uses_default(self, tmp_path):
        kernel = tmp_path / "other.c"
        kernel.write_text("something else\n")
        table = write_mock_table(tmp_path, "unrelated", 'failure = "x"')
        cfg = SynthConfig(tool_mode=ToolMode.MOCK, mock_table=str(table))
        bundle, _, _ = run_synthesis("script", cfg, kernel)
        assert bundle.report_dir == BUNDLES / "cube"

    def test_mock_is_deterministic(self, tmp_path):
        kernel = tmp_path / "k.c"
        kernel.write_text("int32_t k(void) { return 2; }\n")
        table = write_mock_table(tmp_path, kernel.read_text(), 'failure = "E"')
        cfg = SynthConfig(tool_mode=ToolMode.MOCK, mock_table=str(table))
        assert run_synthesis("s", cfg, kernel) == run_synthesis("s", cfg, kernel)

    def test_fixture_table_loads(self):
        table = MockReportTable.load(FIXTURES / "suite" / "mock_reports.toml")
        assert table.default is not None
        assert len(table.entries) == 4


class TestRealMode:
    def test_tool_missing_raises(self, tmp_path, monkeypatch):
        monkeypatch.delenv("P2S_HLS_BIN", raising=False)
        monkeypatch.setenv("PATH", str(tmp_path))  # nothing on PATH
        kernel = tmp_path / "k.c"
        kernel.write_text("x")
        cfg = SynthConfig(tool_mode=ToolMode.REAL)
        with pytest.raises(SynthToolNotFound):
            run_synthesis("script", cfg, kernel)
