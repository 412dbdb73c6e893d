"""The prompt-adaptation loop: generate -> verify -> encode -> edit, plus the
two static-prompting baselines and batched policy training.

An episode runs at most ``t_max`` iterations. Each iteration submits the
current prompt, extracts candidate code, and verifies it; a verified report
ends the episode immediately. Otherwise the policy samples a repair action,
which is composed into the next prompt. Reward attribution follows the
e_{t+1} convention: the action taken after the failed verification at step t
is rewarded by the outcome of the verification at step t+1, and the step-0
outcome carries no action-attributed reward unless it ends the episode.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .gateway import GatewayError, extract_code
from .mdp import (
    NUM_ACTIONS,
    STATE_DIM,
    ActionCatalog,
    ActionName,
    EditAction,
    RewardConfig,
    compose_prompt,
    encode_state,
    reward,
)
from .ppo import (
    AdamState,
    LossStats,
    PolicyParams,
    PpoConfig,
    Transition,
    actor_forward,
    critic_forward,
    init_params,
    ppo_update,
    sample_action,
    save_checkpoint,
)
from .tasks import PromptTemplate, TaskSpec, default_template, initial_prompt
from .verifier import CandidateSource, EMPTY_SOURCE, ToolNotFound, VerifierReport, VerifyStatus

VerifyFn = Callable[[CandidateSource], VerifierReport]


class EpisodeMode(Enum):
    RL_POLICY = "RL_POLICY"
    BASELINE_NO_FEEDBACK = "BASELINE_NO_FEEDBACK"
    BASELINE_WITH_FEEDBACK = "BASELINE_WITH_FEEDBACK"


class Outcome(Enum):
    VERIFIED = "VERIFIED"
    EXHAUSTED = "EXHAUSTED"


@dataclass(frozen=True)
class StepRecord:
    t: int
    prompt_sha: str
    status: str
    error_count: int
    reward: float | None
    action: str | None

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "prompt_sha": self.prompt_sha,
            "status": self.status,
            "error_count": self.error_count,
            "reward": self.reward,
            "action": self.action,
        }


@dataclass(frozen=True)
class EpisodeRecord:
    task_id: str
    mode: EpisodeMode
    steps: tuple[StepRecord, ...]
    outcome: Outcome
    iterations_used: int
    final_source: CandidateSource
    episode_reward: float
    failure: str | None = None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "mode": self.mode.value,
            "outcome": self.outcome.value,
            "iterations_used": self.iterations_used,
            "episode_reward": self.episode_reward,
            "failure": self.failure,
            "steps": [s.to_dict() for s in self.steps],
            "final_source": self.final_source.text,
        }


@dataclass(frozen=True)
class LoopConfig:
    t_max: int = 7
    template: PromptTemplate = field(default_factory=default_template)
    collect_for_training: bool = False
    reward_cfg: RewardConfig = field(default_factory=RewardConfig)
    catalog: ActionCatalog = field(default_factory=ActionCatalog.default)

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be at least 1")


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _finalize_trajectory(transitions: list[Transition]) -> list[Transition]:
    if transitions:
        transitions[-1] = replace(transitions[-1], done=True)
    return transitions


def _run_loop(
    task: TaskSpec,
    gateway,
    verify_fn: VerifyFn,
    cfg: LoopConfig,
    mode: EpisodeMode,
    select_action,  # None (single shot) or (state_vec | None, report, t) -> (EditAction, logp, value) | forced triple
    collect: bool,
) -> tuple[EpisodeRecord, list[Transition]]:
    p = initial_prompt(task, cfg.template)
    steps: list[StepRecord] = []
    transitions: list[Transition] = []
    pending: tuple[np.ndarray, int, float, float] | None = None
    prev_action: EditAction | None = None
    failure: str | None = None
    outcome = Outcome.EXHAUSTED
    final_source = EMPTY_SOURCE
    iterations = 0

    max_iters = 1 if select_action is None else cfg.t_max
    for t in range(max_iters):
        prompt_sha = _sha(p.text)
        try:
            completion = gateway.generate(p)
        except GatewayError as exc:
            failure = f"backend failure at t={t}: {exc}"
            break
        code = extract_code(completion)
        try:
            report = verify_fn(code)
        except ToolNotFound as exc:
            failure = f"verifier failure at t={t}: {exc}"
            break
        iterations = t + 1
        final_source = code
        r_val = reward(report, code, cfg.reward_cfg)
        if pending is not None:
            state, a_id, logp, value = pending
            transitions.append(
                Transition(state=state, action_id=a_id, log_prob_old=logp,
                           reward=r_val, value_old=value, done=False)
            )
            pending = None

        verified = report.status is VerifyStatus.VERIFIED
        attributed = r_val if (t > 0 or verified) else None
        action_taken: EditAction | None = None
        if not verified and select_action is not None:
            state = encode_state(p, code, report, t, prev_action, cfg.t_max)
            action_taken, logp, value = select_action(state, report, t)
            if collect:
                pending = (state, action_taken.action_id, logp, value)
            p = compose_prompt(p, action_taken, report)
            prev_action = action_taken

        steps.append(
            StepRecord(
                t=t,
                prompt_sha=prompt_sha,
                status=report.status.value,
                error_count=report.error_count,
                reward=attributed,
                action=action_taken.name.name if action_taken else None,
            )
        )
        if verified:
            outcome = Outcome.VERIFIED
            break

    transitions = _finalize_trajectory(transitions)
    if transitions:
        episode_reward = float(sum(tr.reward for tr in transitions))
    elif outcome is Outcome.VERIFIED:
        episode_reward = cfg.reward_cfg.r_succ
    else:
        episode_reward = 0.0
    record = EpisodeRecord(
        task_id=task.id,
        mode=mode,
        steps=tuple(steps),
        outcome=outcome,
        iterations_used=iterations,
        final_source=final_source,
        episode_reward=episode_reward,
        failure=failure,
    )
    return record, transitions


def run_episode(
    task: TaskSpec,
    policy: PolicyParams,
    gateway,
    verify_fn: VerifyFn,
    cfg: LoopConfig,
    rng: np.random.Generator,
) -> tuple[EpisodeRecord, list[Transition]]:
    """Run one policy-driven episode.

    Returns the episode record and the training trajectory (empty unless
    cfg.collect_for_training). The trajectory holds one transition per
    sampled action whose verification outcome was observed; an action
    sampled at the final iteration of an exhausted episode has no outcome
    and is not part of the trajectory.
    """

    def select(state, report, t):
        dist = actor_forward(policy, state)
        a_id, logp = sample_action(dist, rng)
        return cfg.catalog.by_id(a_id), logp, critic_forward(policy, state)

    return _run_loop(
        task, gateway, verify_fn, cfg, EpisodeMode.RL_POLICY, select,
        collect=cfg.collect_for_training,
    )


def run_baseline(
    task: TaskSpec,
    gateway,
    verify_fn: VerifyFn,
    feedback: bool,
    cfg: LoopConfig,
) -> EpisodeRecord:
    """Static-prompting baselines.

    feedback=False is a single generate+verify shot. feedback=True runs the
    full loop with the edit fixed to APPEND_VERIFIER_ERRORS: the raw
    verifier feedback is appended every iteration, no policy involved.
    """
    if not feedback:
        record, _ = _run_loop(
            task, gateway, verify_fn, cfg, EpisodeMode.BASELINE_NO_FEEDBACK,
            select_action=None, collect=False,
        )
        return record

    forced = cfg.catalog.by_name(ActionName.APPEND_VERIFIER_ERRORS)

    def select(state, report, t):
        return forced, 0.0, 0.0

    record, _ = _run_loop(
        task, gateway, verify_fn, cfg, EpisodeMode.BASELINE_WITH_FEEDBACK,
        select, collect=False,
    )
    return record


TRAINING_CSV_HEADER = ("episode", "reward", "policy_loss", "value_loss", "entropy", "success")


def train_policy(
    corpus: Sequence[TaskSpec],
    gateway,
    verify_fn: VerifyFn,
    ppo_cfg: PpoConfig,
    loop_cfg: LoopConfig,
    episodes: int,
    batch_episodes: int = 16,
    hidden_size: int = 32,
    initial: PolicyParams | None = None,
    checkpoint_dir: str | Path | None = None,
    log_path: str | Path | None = None,
) -> tuple[PolicyParams, list[tuple]]:
    """Train the repair policy on the corpus with batched PPO updates.

    Tasks are sampled uniformly; trajectories are batched every
    ``batch_episodes`` episodes. One CSV row is appended per episode
    (schema: episode,reward,policy_loss,value_loss,entropy,success); loss
    columns repeat the latest update's final-epoch statistics. Checkpoints
    are written every 100 episodes when ``checkpoint_dir`` is given, so a
    NonFiniteLoss abort leaves the last good checkpoint on disk.
    """
    if not corpus:
        raise ValueError("corpus must not be empty")
    params = initial if initial is not None else init_params(
        STATE_DIM, hidden_size, NUM_ACTIONS, seed=ppo_cfg.seed
    )
    opt = AdamState.zeros_like(params)
    rng = np.random.default_rng(ppo_cfg.seed)
    collect_cfg = replace_loop_collect(loop_cfg, True)

    rows: list[tuple] = []
    buffer: list[Transition] = []
    since_update = 0
    last_stats = LossStats(0.0, 0.0, 0.0, 0.0)
    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir else None
    if ckpt_dir:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    for episode in range(1, episodes + 1):
        task = corpus[int(rng.integers(len(corpus)))]
        record, traj = run_episode(task, params, gateway, verify_fn, collect_cfg, rng)
        buffer.extend(traj)
        since_update += 1
        if since_update >= batch_episodes:
            if buffer:
                params, opt, stats = ppo_update(
                    params, buffer, ppo_cfg, opt, batch_id=f"ep{episode}"
                )
                last_stats = stats[-1]
            buffer = []
            since_update = 0
        rows.append(
            (
                episode,
                record.episode_reward,
                last_stats.policy_loss,
                last_stats.value_loss,
                last_stats.entropy,
                1 if record.outcome is Outcome.VERIFIED else 0,
            )
        )
        if ckpt_dir and episode % 100 == 0:
            save_checkpoint(ckpt_dir / f"ckpt_{episode:06d}.json", params, opt,
                            episode=episode, seed=ppo_cfg.seed)

    if ckpt_dir:
        save_checkpoint(ckpt_dir / "final.json", params, opt,
                        episode=episodes, seed=ppo_cfg.seed)
    if log_path is not None:
        write_training_csv(log_path, rows)
    return params, rows


def replace_loop_collect(cfg: LoopConfig, collect: bool) -> LoopConfig:
    return LoopConfig(
        t_max=cfg.t_max,
        template=cfg.template,
        collect_for_training=collect,
        reward_cfg=cfg.reward_cfg,
        catalog=cfg.catalog,
    )


def write_training_csv(path: str | Path, rows: list[tuple]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAINING_CSV_HEADER)
        for row in rows:
            writer.writerow(row)
