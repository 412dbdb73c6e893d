import json

import pytest

from p2s.tasks import (
    DuplicateId,
    MalformedTask,
    Prompt,
    PromptTemplate,
    TaskSpec,
    TemplateError,
    TemplateMode,
    default_template,
    initial_prompt,
    load_corpus,
    render_template,
    save_corpus,
)


def make_task(**overrides) -> TaskSpec:
    base = dict(
        id="t_cube",
        title="Cube",
        description_oneline="Compute the cube of an integer.",
        description_detailed="Given n, return n*n*n.",
        signature="method Cube(n: int) returns (c: int)",
        requires=(),
        ensures=("c == n * n * n",),
    )
    base.update(overrides)
    return TaskSpec(**base)


def write_task(path, task_id, **overrides):
    data = {
        "id": task_id,
        "title": "T",
        "description_oneline": "one",
        "description_detailed": "two",
        "signature": "method M()",
        "requires": [],
        "ensures": ["true"],
        "reference_source": None,
    }
    data.update(overrides)
    (path / f"{task_id}.task.json").write_text(json.dumps(data))


def test_load_corpus_sorted_by_id(tmp_path):
    for tid in ("b2", "a1", "c3"):
        write_task(tmp_path, tid)
    tasks = load_corpus(tmp_path)
    assert [t.id for t in tasks] == ["a1", "b2", "c3"]


def test_load_corpus_missing_ensures_names_file(tmp_path):
    write_task(tmp_path, "bad", ensures=[])
    with pytest.raises(MalformedTask) as err:
        load_corpus(tmp_path)
    assert "bad" in str(err.value)
    assert "ensures" in str(err.value)


def test_load_corpus_duplicate_id(tmp_path):
    write_task(tmp_path, "x")
    data = json.loads((tmp_path / "x.task.json").read_text())
    (tmp_path / "y.task.json").write_text(json.dumps(data))
    with pytest.raises(DuplicateId):
        load_corpus(tmp_path)


def test_fixture_corpus_matches_manifest(corpus_dir):
    tasks = load_corpus(corpus_dir)
    manifest = json.loads((corpus_dir / "manifest.json").read_text())
    assert len(tasks) == manifest["count"] == 10
    assert [t.id for t in tasks] == manifest["ids"]
    assert tasks[0].id == "t001" and tasks[-1].id == "t010"


def test_save_load_round_trip(tmp_path, corpus_dir):
    tasks = load_corpus(corpus_dir)
    save_corpus(tasks, tmp_path)
    assert load_corpus(tmp_path) == tasks


def test_initial_prompt_contains_contract_verbatim():
    task = make_task()
    prompt = initial_prompt(task, default_template(TemplateMode.ONELINE_AND_DETAILED))
    assert task.description_oneline in prompt.text
    assert task.description_detailed in prompt.text
    assert "c == n * n * n" in prompt.text
    assert prompt.meta["task_id"] == "t_cube"


def test_initial_prompt_deterministic():
    task = make_task()
    template = default_template()
    assert initial_prompt(task, template).text == initial_prompt(task, template).text


def test_oneline_only_mode_excludes_detail():
    task = make_task()
    prompt = initial_prompt(task, default_template(TemplateMode.ONELINE_ONLY))
    assert task.description_oneline in prompt.text
    assert task.description_detailed not in prompt.text


def test_unknown_placeholder_rejected_at_construction():
    with pytest.raises(TemplateError):
        PromptTemplate("bad", TemplateMode.ONELINE_ONLY, "do the {thing}")


def test_render_keeps_unknown_braces_alone():
    template = PromptTemplate(
        "braces", TemplateMode.ONELINE_ONLY, "sig {signature} body {{ code }}"
    )
    text = render_template(template, make_task())
    assert "method Cube" in text
    assert "{{ code }}" in text


def test_prompt_with_text_preserves_meta():
    p = Prompt("hello", {"task_id": "x"})
    q = p.with_text("hello world")
    assert q.meta == {"task_id": "x"}
    assert p.text == "hello"
