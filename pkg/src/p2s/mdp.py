"""The prompt-repair decision process: state featurization, the discrete
edit-action catalog, the shaped reward, and the prompt-composition operator.

All operations here are pure functions. The action catalog is a fixed set of
12 prompt-repair moves; the wording of each move's hint snippet lives in
``data/actions.toml`` so it can be tuned without code changes.
"""

from __future__ import annotations

import importlib.resources as resources
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .tasks import Prompt
from .verifier import (
    CATEGORY_ORDER,
    CandidateSource,
    VerifierReport,
    VerifyStatus,
)


class ActionName(Enum):
    APPEND_VERIFIER_ERRORS = 0
    REQUEST_LOOP_INVARIANTS = 1
    REQUEST_DECREASES_CLAUSE = 2
    RESTATE_POSTCONDITIONS = 3
    ADD_WORKED_EXAMPLE = 4
    SIMPLIFY_AND_RETRY = 5
    REQUEST_ASSERTIONS = 6
    FORBID_RECURSION_AND_WHILE = 7
    EMPHASIZE_CONTRACT_VERBATIM = 8
    STEP_BY_STEP_REASONING = 9
    RESET_TO_INITIAL = 10
    NO_CHANGE = 11


NUM_ACTIONS = len(ActionName)


@dataclass(frozen=True)
class EditAction:
    action_id: int
    name: ActionName
    snippet: str

    def __post_init__(self):
        if self.action_id != self.name.value:
            raise ValueError(f"action_id {self.action_id} does not match {self.name}")


class ActionCatalog:
    """The fixed 12-action repair-move catalog, indexable by id or name."""

    def __init__(self, snippets: dict[str, str]):
        missing = [n.name for n in ActionName if n.name not in snippets]
        if missing:
            raise ValueError(f"action snippets missing for: {missing}")
        self._actions = tuple(
            EditAction(action_id=n.value, name=n, snippet=snippets[n.name]) for n in ActionName
        )

    def __len__(self) -> int:
        return len(self._actions)

    def __iter__(self):
        return iter(self._actions)

    def by_id(self, action_id: int) -> EditAction:
        return self._actions[action_id]

    def by_name(self, name: ActionName) -> EditAction:
        return self._actions[name.value]

    @staticmethod
    def from_toml(path: str | Path) -> "ActionCatalog":
        data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        return ActionCatalog({k: v["snippet"] for k, v in data.items()})

    @staticmethod
    def default() -> "ActionCatalog":
        global _DEFAULT_CATALOG
        if _DEFAULT_CATALOG is None:
            text = resources.files("p2s").joinpath("data/actions.toml").read_text(encoding="utf-8")
            data = tomllib.loads(text)
            _DEFAULT_CATALOG = ActionCatalog({k: v["snippet"] for k, v in data.items()})
        return _DEFAULT_CATALOG


_DEFAULT_CATALOG: ActionCatalog | None = None


@dataclass(frozen=True)
class RewardConfig:
    r_succ: float = 10.0
    alpha: float = 0.2
    beta: float = 0.5
    empty_penalty: float = -5.0
    gamma: float = 0.99

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.empty_penalty >= -self.beta:
            raise ValueError("empty_penalty must undercut the failure band (< -beta)")
        if self.r_succ <= 0:
            raise ValueError("r_succ must be positive")


def reward(report_next: VerifierReport, code_next: CandidateSource, cfg: RewardConfig) -> float:
    """Shaped verification reward.

    +r_succ on a verified report, the empty-output penalty when the model
    produced no code, and -(alpha * error_count + beta) otherwise.
    """
    if report_next.status is VerifyStatus.VERIFIED:
        return cfg.r_succ
    if report_next.status is VerifyStatus.EMPTY_INPUT or code_next.is_empty:
        return cfg.empty_penalty
    return -(cfg.alpha * report_next.error_count + cfg.beta)


# State feature layout (dimension 24):
#   [0]      t / t_max
#   [1]      min(error_count, 10) / 10
#   [2..9]   per-category diagnostic counts, min(count, 5) / 5
#   [10]     empty-output flag
#   [11]     prompt length / 4096, clipped to 1
#   [12..23] one-hot of previous action (all zero at t = 0)
STATE_DIM = 12 + NUM_ACTIONS

_ERROR_CLIP = 10
_CATEGORY_CLIP = 5
_PROMPT_LEN_SCALE = 4096


def encode_state(
    prompt: Prompt,
    code: CandidateSource,
    report: VerifierReport,
    t: int,
    prev_action: EditAction | None,
    t_max: int = 7,
) -> np.ndarray:
    """Encode one loop step as a bounded feature vector in [0, 1]^24."""
    if not 0 <= t < t_max:
        raise ValueError(f"iteration index {t} outside [0, {t_max})")
    features = np.zeros(STATE_DIM, dtype=np.float64)
    features[0] = t / t_max
    features[1] = min(report.error_count, _ERROR_CLIP) / _ERROR_CLIP
    counts = [0] * len(CATEGORY_ORDER)
    for diag in report.diagnostics:
        counts[CATEGORY_ORDER.index(diag.category)] += 1
    for slot, count in enumerate(counts):
        features[2 + slot] = min(count, _CATEGORY_CLIP) / _CATEGORY_CLIP
    if code.is_empty or report.status is VerifyStatus.EMPTY_INPUT:
        features[10] = 1.0
    features[11] = min(len(prompt.text) / _PROMPT_LEN_SCALE, 1.0)
    if prev_action is not None:
        features[12 + prev_action.action_id] = 1.0
    return features


HINT_DELIMITER = "\n--- REPAIR HINT ---\n"
_MAX_QUOTED_DIAGNOSTICS = 5


def _format_diagnostics(report: VerifierReport) -> str:
    if not report.diagnostics:
        return "(no diagnostics reported)"
    lines = []
    for diag in report.diagnostics[:_MAX_QUOTED_DIAGNOSTICS]:
        loc = f" line {diag.line}" if diag.line is not None else ""
        lines.append(f"- [{diag.category.value}]{loc}: {diag.message}")
    return "\n".join(lines)


def render_snippet(action: EditAction, report: VerifierReport) -> str:
    """Resolve an action's hint snippet against the latest report."""
    if "{diagnostics}" in action.snippet:
        return action.snippet.replace("{diagnostics}", _format_diagnostics(report))
    return action.snippet


def compose_prompt(p: Prompt, action: EditAction, report: VerifierReport) -> Prompt:
    """Apply an edit action to the prompt.

    Most actions append one delimited hint block; appending the same block
    twice is a no-op, so repeated application of an action is idempotent.
    RESET_TO_INITIAL strips every hint block, recovering the episode's
    initial prompt (prompts only ever grow by appended blocks, so the text
    before the first delimiter is exactly the initial prompt).
    """
    if action.name is ActionName.NO_CHANGE:
        return p
    if action.name is ActionName.RESET_TO_INITIAL:
        base = p.text.split(HINT_DELIMITER, 1)[0]
        if base == p.text:
            return p
        return p.with_text(base)
    block = HINT_DELIMITER + render_snippet(action, report)
    if block in p.text:
        return p
    return p.with_text(p.text + block)
