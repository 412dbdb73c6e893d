"""Benchmark task model: task specs, prompt templates, and the corpus loader.

A task is one benchmark problem: a natural-language description (one-line and
detailed), the target method signature, and the formal contract the generated
program must satisfy (requires/ensures clauses).  A corpus is a directory of
``*.task.json`` files, one task per file.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class TaskError(Exception):
    """Base class for corpus loading failures."""


class MalformedTask(TaskError):
    def __init__(self, task_id: str, reason: str):
        super().__init__(f"malformed task {task_id!r}: {reason}")
        self.task_id = task_id
        self.reason = reason


class DuplicateId(TaskError):
    def __init__(self, task_id: str):
        super().__init__(f"duplicate task id {task_id!r}")
        self.task_id = task_id


class TemplateError(TaskError):
    """Raised when a prompt template cannot be resolved against a task."""


@dataclass(frozen=True)
class TaskSpec:
    """One benchmark task: description plus formal contract."""

    id: str
    title: str
    description_oneline: str
    description_detailed: str
    signature: str
    requires: tuple[str, ...]
    ensures: tuple[str, ...]
    reference_source: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "description_oneline": self.description_oneline,
            "description_detailed": self.description_detailed,
            "signature": self.signature,
            "requires": list(self.requires),
            "ensures": list(self.ensures),
            "reference_source": self.reference_source,
        }


class TemplateMode(Enum):
    ONELINE_AND_DETAILED = "oneline_and_detailed"
    ONELINE_ONLY = "oneline_only"


# Placeholders a template body may reference. Anything else of the shape
# {word} in a body is rejected at template construction time.
_PLACEHOLDERS = (
    "description_oneline",
    "description_detailed",
    "signature",
    "requires",
    "ensures",
)
_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    mode: TemplateMode
    body: str

    def __post_init__(self):
        for name in _PLACEHOLDER_RE.findall(self.body):
            if name not in _PLACEHOLDERS:
                raise TemplateError(
                    f"template {self.template_id!r} references unknown "
                    f"placeholder {{{name}}}"
                )


_DEFAULT_BODY_FULL = """\
You are writing a single Dafny method that must pass the Dafny verifier.

Task: {description_oneline}

Details: {description_detailed}

Implement exactly this signature:
{signature}

The method must satisfy this contract:
requires:
{requires}
ensures:
{ensures}

Reply with one fenced code block containing the complete Dafny method,
including any loop invariants and decreases clauses needed for verification.
"""

_DEFAULT_BODY_ONELINE = """\
You are writing a single Dafny method that must pass the Dafny verifier.

Task: {description_oneline}

Implement exactly this signature:
{signature}

The method must satisfy this contract:
requires:
{requires}
ensures:
{ensures}

Reply with one fenced code block containing the complete Dafny method,
including any loop invariants and decreases clauses needed for verification.
"""


def default_template(mode: TemplateMode = TemplateMode.ONELINE_AND_DETAILED) -> PromptTemplate:
    if mode is TemplateMode.ONELINE_AND_DETAILED:
        return PromptTemplate("default-full", mode, _DEFAULT_BODY_FULL)
    return PromptTemplate("default-oneline", mode, _DEFAULT_BODY_ONELINE)


def _clause_block(clauses: tuple[str, ...]) -> str:
    if not clauses:
        return "  (none)"
    return "\n".join(f"  {c}" for c in clauses)


def render_template(template: PromptTemplate, task: TaskSpec) -> str:
    """Substitute every placeholder in the template body from the task.

    Pure function: the same (template, task) pair always renders identical
    text. Clause lists are rendered one clause per line, text verbatim.
    """
    values = {
        "description_oneline": task.description_oneline,
        "description_detailed": task.description_detailed,
        "signature": task.signature,
        "requires": _clause_block(task.requires),
        "ensures": _clause_block(task.ensures),
    }
    out = template.body
    for name, value in values.items():
        out = out.replace("{" + name + "}", value)
    leftover = _PLACEHOLDER_RE.findall(out)
    unresolved = [n for n in leftover if n in _PLACEHOLDERS]
    if unresolved:
        raise TemplateError(f"unresolved placeholders after render: {unresolved}")
    return out


_REQUIRED_STR_FIELDS = (
    "id",
    "title",
    "description_oneline",
    "description_detailed",
    "signature",
)


def _task_from_dict(data: dict, origin: str) -> TaskSpec:
    if not isinstance(data, dict):
        raise MalformedTask(origin, "top-level JSON value is not an object")
    task_id = data.get("id", origin)
    for key in _REQUIRED_STR_FIELDS:
        if not isinstance(data.get(key), str) or not data[key]:
            raise MalformedTask(task_id, f"field {key!r} missing or not a non-empty string ({origin})")
    for key in ("requires", "ensures"):
        val = data.get(key)
        if not isinstance(val, list) or not all(isinstance(c, str) for c in val):
            raise MalformedTask(task_id, f"field {key!r} must be a list of strings ({origin})")
    if not data["ensures"]:
        raise MalformedTask(task_id, f"task has no ensures clause ({origin})")
    ref = data.get("reference_source")
    if ref is not None and not isinstance(ref, str):
        raise MalformedTask(task_id, f"field 'reference_source' must be a string or null ({origin})")
    return TaskSpec(
        id=data["id"],
        title=data["title"],
        description_oneline=data["description_oneline"],
        description_detailed=data["description_detailed"],
        signature=data["signature"],
        requires=tuple(data["requires"]),
        ensures=tuple(data["ensures"]),
        reference_source=ref,
    )


def load_corpus(path: str | Path) -> list[TaskSpec]:
    """Load every ``*.task.json`` under ``path``, sorted by task id.

    Raises MalformedTask for schema violations (naming the offending file)
    and DuplicateId when two files declare the same id.
    """
    root = Path(path)
    if not root.is_dir():
        raise TaskError(f"corpus path {root} is not a directory")
    tasks: dict[str, TaskSpec] = {}
    for file in sorted(root.glob("*.task.json")):
        try:
            data = json.loads(file.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedTask(file.name, f"invalid JSON: {exc}") from exc
        task = _task_from_dict(data, file.name)
        if task.id in tasks:
            raise DuplicateId(task.id)
        tasks[task.id] = task
    return [tasks[k] for k in sorted(tasks)]


def save_corpus(tasks: list[TaskSpec], path: str | Path) -> None:
    """Write one ``<id>.task.json`` per task. Inverse of load_corpus."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for task in tasks:
        out = root / f"{task.id}.task.json"
        out.write_text(json.dumps(task.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Prompt:
    """Plain-text prompt plus bookkeeping metadata.

    The text is the whole contract: backends never see the metadata, so any
    information a deterministic backend needs must live in the text itself.
    """

    text: str
    meta: dict = field(default_factory=dict)

    def with_text(self, text: str) -> "Prompt":
        return Prompt(text=text, meta=dict(self.meta))


def initial_prompt(task: TaskSpec, template: PromptTemplate) -> Prompt:
    """Render the episode's starting prompt. Pure function of its inputs."""
    text = render_template(template, task)
    return Prompt(text=text, meta={"task_id": task.id, "template_id": template.template_id})
