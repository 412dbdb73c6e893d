"""Deterministic repair environment for policy training and evaluation.

The generator is a pure function of the prompt text, which is the only
state the loop carries between iterations:

* the task description embeds ``SEED_ERRORS:k`` (k in {1,2,3}), the number
  of simulated verifier errors the first completion contains;
* each applied APPEND_VERIFIER_ERRORS hint block removes exactly one error
  from the next completion; every other repair action leaves the count
  unchanged (RESET_TO_INITIAL strips the hint blocks and therefore restores
  the starting error count — resetting the prompt resets the generator);
* a completion with zero remaining errors verifies.

The optimal policy is to always pick APPEND_VERIFIER_ERRORS; random action
sequences succeed only occasionally within the iteration budget, which
gives trained-vs-untrained evaluations a wide gap to measure.
"""

from __future__ import annotations

import re

import numpy as np

from .gateway import ScriptedBackend
from .loop import LoopConfig, Outcome, run_episode
from .mdp import ActionCatalog, ActionName, HINT_DELIMITER
from .ppo import PolicyParams
from .tasks import TaskSpec
from .verifier import SimRuleSet, simulate_verify

SEED_MARKER_RE = re.compile(r"SEED_ERRORS:(\d+)")


def append_hint_header(catalog: ActionCatalog | None = None) -> str:
    """The text every applied APPEND_VERIFIER_ERRORS block starts with."""
    catalog = catalog or ActionCatalog.default()
    snippet = catalog.by_name(ActionName.APPEND_VERIFIER_ERRORS).snippet
    return HINT_DELIMITER + snippet.split("{diagnostics}")[0]


def repair_script(catalog: ActionCatalog | None = None):
    """Completion rule: errors remaining = seeded count minus applied
    APPEND hints (never below zero)."""
    header = append_hint_header(catalog)

    def script(prompt_text: str) -> str:
        m = SEED_MARKER_RE.search(prompt_text)
        seeded = int(m.group(1)) if m else 0
        fixed = prompt_text.count(header)
        errors = max(0, seeded - fixed)
        return f"```dafny\nmethod Fixture() {{ }} //BUG:{errors}\n```"

    return script


def repair_tasks(error_counts: tuple[int, ...] = (1, 2, 3)) -> list[TaskSpec]:
    tasks = []
    for k in error_counts:
        tasks.append(
            TaskSpec(
                id=f"env{k:03d}",
                title=f"repair environment, {k} seeded error(s)",
                description_oneline=f"scripted repair drill SEED_ERRORS:{k}",
                description_detailed=(
                    f"The first completion carries {k} simulated verifier error(s); "
                    "appending the verifier feedback removes one error per application."
                ),
                signature="method Fixture()",
                requires=(),
                ensures=("fixture verifies once every seeded error is repaired",),
            )
        )
    return tasks


def make_repair_env(catalog: ActionCatalog | None = None):
    """(tasks, gateway, verify_fn) triple for the repair drill."""
    gateway = ScriptedBackend(repair_script(catalog), backend_id="scripted-repair")
    rules = SimRuleSet.default()
    return repair_tasks(), gateway, lambda code: simulate_verify(code, rules)


def evaluate_policy(
    policy: PolicyParams,
    tasks: list[TaskSpec],
    gateway,
    verify_fn,
    cfg: LoopConfig,
    rng: np.random.Generator,
    episodes: int = 100,
) -> float:
    """Fraction of episodes that verify; tasks are cycled round-robin."""
    successes = 0
    for i in range(episodes):
        record, _ = run_episode(tasks[i % len(tasks)], policy, gateway, verify_fn, cfg, rng)
        successes += record.outcome is Outcome.VERIFIED
    return successes / episodes
