"""TOML configuration loading.

One file configures a whole run; sections map onto the library dataclasses:
[suite], [backend], [reward], [ppo], [loop], [synth]. Paths inside the file
are resolved relative to the file itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .gateway import BackendConfig, BackendKind, ScriptedRule
from .loop import EpisodeMode, LoopConfig
from .mdp import ActionCatalog, RewardConfig
from .ppo import PpoConfig
from .synth import SynthConfig, ToolMode
from .tasks import TemplateMode, default_template
from .verifier import SimRuleSet


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    corpus_path: str
    mode: EpisodeMode
    output_dir: str
    seed: int
    jobs: int
    policy_checkpoint: str | None
    vectors_dir: str | None
    backend: BackendConfig
    scripted_rules: list[ScriptedRule]
    scripted_default: str
    scripted_builtin: str | None
    replay_store: str | None
    reward: RewardConfig
    ppo: PpoConfig
    loop: LoopConfig
    verifier_real: bool
    sim_rules: SimRuleSet
    synth: SynthConfig
    train_episodes: int
    batch_episodes: int
    hidden_size: int


def _resolve(base: Path, value: str | None) -> str | None:
    if value is None:
        return None
    path = Path(value)
    return str(path if path.is_absolute() else base / path)


def _take(data: dict, section: str) -> dict:
    value = data.get(section, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{section}] must be a table")
    return dict(value)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    base = path.parent

    suite = _take(data, "suite")
    backend_raw = _take(data, "backend")
    reward_raw = _take(data, "reward")
    ppo_raw = _take(data, "ppo")
    loop_raw = _take(data, "loop")
    synth_raw = _take(data, "synth")

    try:
        mode = EpisodeMode(suite.get("mode", "BASELINE_WITH_FEEDBACK"))
    except ValueError as exc:
        raise ConfigError(f"unknown suite.mode {suite.get('mode')!r}") from exc

    try:
        kind = BackendKind(backend_raw.get("kind", "scripted"))
    except ValueError as exc:
        raise ConfigError(f"unknown backend.kind {backend_raw.get('kind')!r}") from exc

    scripted_rules: list[ScriptedRule] = []
    scripted_default = backend_raw.get("default", "")
    rules_path = _resolve(base, backend_raw.get("scripted_rules"))
    if rules_path:
        try:
            raw_rules = json.loads(Path(rules_path).read_text(encoding="utf-8"))
            scripted_rules = [
                ScriptedRule(marker=r["marker"], response=r["response"])
                for r in raw_rules.get("rules", [])
            ]
            scripted_default = raw_rules.get("default", scripted_default)
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"bad scripted rules file {rules_path}: {exc}") from exc

    try:
        backend = BackendConfig(
            kind=kind,
            endpoint=backend_raw.get("endpoint"),
            model_name=backend_raw.get("model_name"),
            max_tokens=int(backend_raw.get("max_tokens", 2048)),
            temperature=float(backend_raw.get("temperature", 0.2)),
            timeout_s=int(backend_raw.get("timeout_s", 120)),
            max_retries=int(backend_raw.get("max_retries", 2)),
            max_in_flight=int(backend_raw.get("max_in_flight", 4)),
        )
        reward = RewardConfig(
            r_succ=float(reward_raw.get("r_succ", 10.0)),
            alpha=float(reward_raw.get("alpha", 0.2)),
            beta=float(reward_raw.get("beta", 0.5)),
            empty_penalty=float(reward_raw.get("empty_penalty", -5.0)),
            gamma=float(reward_raw.get("gamma", 0.99)),
        )
        ppo = PpoConfig(
            clip_epsilon=float(ppo_raw.get("clip_epsilon", 0.2)),
            gamma=float(ppo_raw.get("gamma", 0.99)),
            lr=float(ppo_raw.get("lr", 3e-4)),
            adam_beta1=float(ppo_raw.get("adam_beta1", 0.9)),
            adam_beta2=float(ppo_raw.get("adam_beta2", 0.999)),
            adam_eps=float(ppo_raw.get("adam_eps", 1e-8)),
            grad_clip_norm=float(ppo_raw.get("grad_clip_norm", 1.0)),
            epochs_per_batch=int(ppo_raw.get("epochs_per_batch", 4)),
            entropy_coef=float(ppo_raw.get("entropy_coef", 0.01)),
            advantage_norm=bool(ppo_raw.get("advantage_norm", True)),
            seed=int(ppo_raw.get("seed", suite.get("seed", 0))),
        )
        try:
            template_mode = TemplateMode(loop_raw.get("template_mode", "oneline_and_detailed"))
        except ValueError as exc:
            raise ConfigError(f"unknown loop.template_mode {loop_raw.get('template_mode')!r}") from exc
        catalog = ActionCatalog.default()
        actions_path = _resolve(base, loop_raw.get("actions"))
        if actions_path:
            catalog = ActionCatalog.from_toml(actions_path)
        loop_cfg = LoopConfig(
            t_max=int(loop_raw.get("t_max", 7)),
            template=default_template(template_mode),
            collect_for_training=False,
            reward_cfg=reward,
            catalog=catalog,
        )
        sim_rules = SimRuleSet.default()
        sim_rules_path = _resolve(base, loop_raw.get("sim_rules"))
        if sim_rules_path:
            sim_rules = SimRuleSet.from_json(Path(sim_rules_path).read_text(encoding="utf-8"))
        try:
            tool_mode = ToolMode(synth_raw.get("tool_mode", "mock"))
        except ValueError as exc:
            raise ConfigError(f"unknown synth.tool_mode {synth_raw.get('tool_mode')!r}") from exc
        synth = SynthConfig(
            part=synth_raw.get("part", "xc7z020clg484-1"),
            clock_period_ns=float(synth_raw.get("clock_period_ns", 10)),
            top_function=synth_raw.get("top_function", "kernel"),
            tool_mode=tool_mode,
            tool_timeout_s=int(synth_raw.get("tool_timeout_s", 900)),
            mock_table=_resolve(base, synth_raw.get("mock_table")),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(
        corpus_path=_resolve(base, suite.get("corpus", "corpus")),
        mode=mode,
        output_dir=_resolve(base, suite.get("output_dir", "runs")),
        seed=int(suite.get("seed", 0)),
        jobs=int(suite.get("jobs", 1)),
        policy_checkpoint=_resolve(base, suite.get("policy_checkpoint")),
        vectors_dir=_resolve(base, suite.get("vectors_dir")),
        backend=backend,
        scripted_rules=scripted_rules,
        scripted_default=scripted_default,
        scripted_builtin=backend_raw.get("script_builtin"),
        replay_store=_resolve(base, backend_raw.get("replay_store")),
        reward=reward,
        ppo=ppo,
        loop=loop_cfg,
        verifier_real=loop_raw.get("verifier", "simulated") == "real",
        sim_rules=sim_rules,
        synth=synth,
        train_episodes=int(suite.get("train_episodes", 2000)),
        batch_episodes=int(suite.get("batch_episodes", 16)),
        hidden_size=int(suite.get("hidden_size", 32)),
    )
