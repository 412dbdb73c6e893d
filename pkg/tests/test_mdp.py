import pytest
from hypothesis import given, strategies as st

from p2s.mdp import (
    ActionCatalog,
    ActionName,
    HINT_DELIMITER,
    NUM_ACTIONS,
    STATE_DIM,
    RewardConfig,
    compose_prompt,
    encode_state,
    reward,
)
from p2s.tasks import Prompt
from p2s.verifier import (
    CandidateSource,
    Diagnostic,
    DiagnosticCategory,
    EMPTY_SOURCE,
    VERIFIED_REPORT,
    VerifierReport,
    VerifyStatus,
)

CATALOG = ActionCatalog.default()
CFG = RewardConfig()
CODE = CandidateSource.from_text("method M() {}")


def failed_report(error_count: int, category=DiagnosticCategory.INVARIANT) -> VerifierReport:
    diags = tuple(
        Diagnostic(category=category, message=f"e{i}", line=i + 1, column=1)
        for i in range(error_count)
    )
    return VerifierReport(error_count, diags, VerifyStatus.FAILED)


def empty_report() -> VerifierReport:
    return VerifierReport(1, (), VerifyStatus.EMPTY_INPUT)


class TestReward:
    def test_verified_pays_r_succ(self):
        assert reward(VERIFIED_REPORT, CODE, CFG) == 10.0

    def test_failed_band_formula(self):
        assert reward(failed_report(3), CODE, CFG) == pytest.approx(-1.1, abs=1e-12)
        assert reward(failed_report(1), CODE, CFG) == pytest.approx(-0.7, abs=1e-12)

    def test_empty_penalty(self):
        assert reward(empty_report(), EMPTY_SOURCE, CFG) == -5.0

    def test_ordering_and_monotonicity(self):
        values = [reward(failed_report(e), CODE, CFG) for e in range(0, 12)]
        assert reward(VERIFIED_REPORT, CODE, CFG) > 0
        for a, b in zip(values[1:], values[2:]):
            assert b < a < 0
        assert reward(empty_report(), EMPTY_SOURCE, CFG) < reward(failed_report(10), CODE, CFG)

    def test_config_invariants(self):
        with pytest.raises(ValueError):
            RewardConfig(alpha=0.0)
        with pytest.raises(ValueError):
            RewardConfig(gamma=0.0)
        with pytest.raises(ValueError):
            RewardConfig(empty_penalty=-0.4)  # must undercut -beta


class TestEncodeState:
    def test_zero_error_encoding(self):
        s = encode_state(Prompt("p"), CODE, VERIFIED_REPORT, 0, None)
        assert s.shape == (STATE_DIM,)
        assert s[1] == 0.0
        assert s[10] == 0.0
        assert not s[12:].any()

    def test_documented_layout(self):
        append = CATALOG.by_name(ActionName.APPEND_VERIFIER_ERRORS)
        s = encode_state(Prompt("p" * 1024), CODE, failed_report(3), 2, append, t_max=7)
        assert s[0] == pytest.approx(2 / 7)
        assert s[1] == pytest.approx(0.3)
        invariant_slot = 2 + list(DiagnosticCategory).index(DiagnosticCategory.INVARIANT)
        assert s[invariant_slot] == pytest.approx(3 / 5)
        assert s[11] == pytest.approx(1024 / 4096)
        assert s[12 + append.action_id] == 1.0
        assert s[12:].sum() == 1.0

    def test_empty_flag(self):
        s = encode_state(Prompt("p"), EMPTY_SOURCE, empty_report(), 1, None)
        assert s[10] == 1.0

    def test_iteration_bounds_checked(self):
        with pytest.raises(ValueError):
            encode_state(Prompt("p"), CODE, VERIFIED_REPORT, 7, None, t_max=7)

    @given(
        errors=st.integers(0, 50),
        t=st.integers(0, 6),
        prompt_len=st.integers(0, 20000),
        action_id=st.integers(0, NUM_ACTIONS - 1) | st.none(),
    )
    def test_features_always_bounded(self, errors, t, prompt_len, action_id):
        prev = CATALOG.by_id(action_id) if action_id is not None else None
        s = encode_state(Prompt("x" * prompt_len), CODE, failed_report(errors), t, prev)
        assert s.shape == (STATE_DIM,)
        assert (s >= 0).all() and (s <= 1).all()


class TestComposePrompt:
    def test_no_change_is_identity(self):
        p = Prompt("anything at all")
        action = CATALOG.by_name(ActionName.NO_CHANGE)
        assert compose_prompt(p, action, failed_report(1)).text == p.text

    def test_append_errors_quotes_diagnostics(self):
        p = Prompt("base prompt")
        report = VerifierReport(
            1,
            (Diagnostic(DiagnosticCategory.POSTCONDITION, "a postcondition could not be proved", 12, 5),),
            VerifyStatus.FAILED,
        )
        action = CATALOG.by_name(ActionName.APPEND_VERIFIER_ERRORS)
        out = compose_prompt(p, action, report)
        assert out.text.startswith("base prompt")
        assert HINT_DELIMITER in out.text
        assert "a postcondition could not be proved" in out.text
        assert "[POSTCONDITION]" in out.text
        assert "line 12" in out.text

    def test_append_errors_caps_at_five_diagnostics(self):
        action = CATALOG.by_name(ActionName.APPEND_VERIFIER_ERRORS)
        out = compose_prompt(Prompt("p"), action, failed_report(9))
        assert out.text.count("- [INVARIANT]") == 5

    def test_idempotence(self):
        report = failed_report(2)
        p = Prompt("base")
        for action in CATALOG:
            if action.name is ActionName.RESET_TO_INITIAL:
                continue
            once = compose_prompt(p, action, report)
            twice = compose_prompt(once, action, report)
            assert once.text == twice.text

    def test_reset_recovers_initial_prompt(self):
        p0 = Prompt("the initial prompt")
        report = failed_report(2)
        p = compose_prompt(p0, CATALOG.by_name(ActionName.REQUEST_LOOP_INVARIANTS), report)
        p = compose_prompt(p, CATALOG.by_name(ActionName.APPEND_VERIFIER_ERRORS), report)
        assert p.text != p0.text
        reset = compose_prompt(p, CATALOG.by_name(ActionName.RESET_TO_INITIAL), report)
        assert reset.text == p0.text

    def test_growth_is_bounded_and_monotone(self):
        report = failed_report(3)
        p = Prompt("base")
        for action in CATALOG:
            out = compose_prompt(p, action, report)
            if action.name is ActionName.RESET_TO_INITIAL:
                assert len(out.text) <= len(p.text)
            else:
                assert len(out.text) >= len(p.text)
                budget = len(HINT_DELIMITER) + len(action.snippet) + 5 * 120
                assert len(out.text) <= len(p.text) + budget

    def test_catalog_shape(self):
        assert len(CATALOG) == NUM_ACTIONS == 12
        for i, action in enumerate(CATALOG):
            assert action.action_id == i


def test_catalog_from_toml_roundtrip(tmp_path):
    path = tmp_path / "actions.toml"
    lines = []
    for name in ActionName:
        lines.append(f"[{name.name}]")
        lines.append(f'snippet = "custom {name.name.lower()}"')
    path.write_text("\n".join(lines))
    catalog = ActionCatalog.from_toml(path)
    assert catalog.by_id(0).snippet == "custom append_verifier_errors"


def test_catalog_missing_action_rejected():
    with pytest.raises(ValueError):
        ActionCatalog({"APPEND_VERIFIER_ERRORS": "x"})
