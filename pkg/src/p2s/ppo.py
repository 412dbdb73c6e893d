"""Actor-critic policy and the PPO trainer.

Both networks are small dense nets (state -> tanh hidden -> linear head;
softmax on the actor head), stored as float64 numpy arrays. Gradients are
computed by exact backpropagation, validated against central finite
differences by ``grad_check``. Updates use Adam with global gradient-norm
clipping.

The actor loss is the clipped surrogate
``-E[min(r * A, clip(r, 1-eps, 1+eps) * A)]`` with probability ratio
``r = pi_new(a|s) / pi_old(a|s)``; the critic minimizes the squared error
against discounted Monte-Carlo returns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class DimensionMismatch(Exception):
    pass


class NonFiniteLoss(Exception):
    def __init__(self, batch_id: str, detail: str = ""):
        super().__init__(f"non-finite loss on batch {batch_id!r} {detail}".rstrip())
        self.batch_id = batch_id


@dataclass
class PolicyParams:
    """Weights for the actor (d -> h -> n_actions) and critic (d -> h -> 1)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    v1: np.ndarray
    c1: np.ndarray
    v2: np.ndarray
    c2: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.w1.shape[0], self.w1.shape[1], self.w2.shape[1]

    def copy(self) -> "PolicyParams":
        return PolicyParams(*(a.copy() for a in self.arrays()))

    def arrays(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2, self.v1, self.c1, self.v2, self.c2]


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(d: int, h: int, n_actions: int, seed: int = 0) -> PolicyParams:
    """Hidden layers get scaled-uniform init; output layers start at zero,
    so an untrained actor is exactly the uniform policy and the critic
    predicts zero everywhere."""
    rng = np.random.default_rng(seed)
    return PolicyParams(
        w1=_glorot(rng, d, h),
        b1=np.zeros(h),
        w2=np.zeros((h, n_actions)),
        b2=np.zeros(n_actions),
        v1=_glorot(rng, d, h),
        c1=np.zeros(h),
        v2=np.zeros((h, 1)),
        c2=np.zeros(1),
    )


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def actor_forward(params: PolicyParams, state: np.ndarray) -> np.ndarray:
    """Action distribution for one state. Deterministic; rows sum to 1."""
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (params.w1.shape[0],):
        raise DimensionMismatch(
            f"state has shape {state.shape}, expected ({params.w1.shape[0]},)"
        )
    hidden = np.tanh(state @ params.w1 + params.b1)
    logits = hidden @ params.w2 + params.b2
    return np.exp(_log_softmax(logits))


def critic_forward(params: PolicyParams, state: np.ndarray) -> float:
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (params.v1.shape[0],):
        raise DimensionMismatch(
            f"state has shape {state.shape}, expected ({params.v1.shape[0]},)"
        )
    hidden = np.tanh(state @ params.v1 + params.c1)
    return float((hidden @ params.v2)[0] + params.c2[0])


def sample_action(dist: np.ndarray, rng: np.random.Generator) -> tuple[int, float]:
    """Draw an action index from the distribution; returns (index, log prob).

    Inverse-CDF sampling from a single uniform draw, so a fixed generator
    state reproduces the exact action sequence.
    """
    dist = np.asarray(dist, dtype=np.float64)
    cum = np.cumsum(dist)
    u = rng.random()
    action = int(np.searchsorted(cum, u, side="right"))
    action = min(action, len(dist) - 1)
    return action, float(np.log(dist[action]))


def compute_returns(rewards: Sequence[float], gamma: float) -> list[float]:
    """Discounted returns G_t = sum_k gamma^(k-t) r_k by reverse accumulation."""
    if not len(rewards):
        raise ValueError("rewards must be non-empty")
    out = [0.0] * len(rewards)
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action_id: int
    log_prob_old: float
    reward: float
    value_old: float
    done: bool


@dataclass(frozen=True)
class PpoConfig:
    clip_epsilon: float = 0.2
    gamma: float = 0.99
    lr: float = 3e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip_norm: float = 1.0
    epochs_per_batch: int = 4
    entropy_coef: float = 0.01
    advantage_norm: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.clip_epsilon < 1:
            raise ValueError("clip_epsilon must be in (0, 1)")
        if self.grad_clip_norm <= 0:
            raise ValueError("grad_clip_norm must be positive")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @staticmethod
    def zeros_like(params: PolicyParams) -> "AdamState":
        return AdamState(
            m=[np.zeros_like(a) for a in params.arrays()],
            v=[np.zeros_like(a) for a in params.arrays()],
            step=0,
        )

    def copy(self) -> "AdamState":
        return AdamState(
            m=[a.copy() for a in self.m],
            v=[a.copy() for a in self.v],
            step=self.step,
        )


@dataclass(frozen=True)
class LossStats:
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float


def _batch_arrays(batch: Sequence[Transition], cfg: PpoConfig):
    states = np.stack([t.state for t in batch]).astype(np.float64)
    actions = np.array([t.action_id for t in batch], dtype=np.int64)
    logp_old = np.array([t.log_prob_old for t in batch], dtype=np.float64)
    values_old = np.array([t.value_old for t in batch], dtype=np.float64)

    # Episode boundaries: a done flag ends a segment; the batch end always
    # does. Returns are accumulated within each segment.
    returns = np.empty(len(batch), dtype=np.float64)
    start = 0
    for i, t in enumerate(batch):
        if t.done or i == len(batch) - 1:
            seg = [tr.reward for tr in batch[start : i + 1]]
            returns[start : i + 1] = compute_returns(seg, cfg.gamma)
            start = i + 1

    advantages = returns - values_old
    if cfg.advantage_norm:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    return states, actions, logp_old, returns, advantages


def _loss_and_grads(params: PolicyParams, states, actions, logp_old, returns, advantages, cfg):
    """Total loss, per-epoch statistics, and exact gradients for all eight
    parameter arrays (same order as PolicyParams.arrays())."""
    n = states.shape[0]
    w1, b1, w2, b2, v1, c1, v2, c2 = params.arrays()

    h_a = np.tanh(states @ w1 + b1)
    logits = h_a @ w2 + b2
    log_probs = _log_softmax(logits)
    probs = np.exp(log_probs)
    lp_new = log_probs[np.arange(n), actions]

    ratio = np.exp(lp_new - logp_old)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1 - cfg.clip_epsilon, 1 + cfg.clip_epsilon) * advantages
    surrogate = np.minimum(unclipped, clipped)
    policy_loss = -surrogate.mean()

    h_c = np.tanh(states @ v1 + c1)
    values = (h_c @ v2).ravel() + c2[0]
    value_err = values - returns
    value_loss = float((value_err**2).mean())

    ent = -(probs * log_probs).sum(axis=1)
    entropy = float(ent.mean())

    total = float(policy_loss + 0.5 * value_loss - cfg.entropy_coef * entropy)
    stats = LossStats(
        policy_loss=float(policy_loss),
        value_loss=value_loss,
        entropy=entropy,
        clip_fraction=float((np.abs(ratio - 1.0) > cfg.clip_epsilon).mean()),
    )

    # Surrogate gradient flows only where the unclipped branch attains the
    # min (ties included: inside the clip interval both branches coincide).
    active = (unclipped <= clipped).astype(np.float64)
    d_lp = -(1.0 / n) * active * advantages * ratio

    onehot = np.zeros_like(probs)
    onehot[np.arange(n), actions] = 1.0
    g_logits = d_lp[:, None] * (onehot - probs)
    # entropy bonus: d(-coef*mean(ent))/dlogits
    g_logits += (-cfg.entropy_coef / n) * (-probs * (log_probs + ent[:, None]))

    g_w2 = h_a.T @ g_logits
    g_b2 = g_logits.sum(axis=0)
    g_ha = g_logits @ w2.T
    g_za = g_ha * (1.0 - h_a**2)
    g_w1 = states.T @ g_za
    g_b1 = g_za.sum(axis=0)

    g_values = value_err / n  # d(0.5 * mean(err^2))/dvalue
    g_v2 = h_c.T @ g_values[:, None]
    g_c2 = np.array([g_values.sum()])
    g_hc = g_values[:, None] @ v2.T
    g_zc = g_hc * (1.0 - h_c**2)
    g_v1 = states.T @ g_zc
    g_c1 = g_zc.sum(axis=0)

    grads = [g_w1, g_b1, g_w2, g_b2, g_v1, g_c1, g_v2, g_c2]
    return total, stats, grads


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> tuple[list[np.ndarray], float]:
    """Rescale the whole gradient so its global L2 norm is at most max_norm."""
    total_sq = sum(float((g**2).sum()) for g in grads)
    norm = float(np.sqrt(total_sq))
    if norm > max_norm:
        scale = max_norm / norm
        grads = [g * scale for g in grads]
    return grads, norm


def _adam_step(arrays: list[np.ndarray], grads: list[np.ndarray], opt: AdamState, cfg: PpoConfig):
    opt.step += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    corr1 = 1.0 - b1**opt.step
    corr2 = 1.0 - b2**opt.step
    for a, g, m, v in zip(arrays, grads, opt.m, opt.v):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        a -= cfg.lr * (m / corr1) / (np.sqrt(v / corr2) + cfg.adam_eps)


def ppo_update(
    params: PolicyParams,
    batch: Sequence[Transition],
    cfg: PpoConfig,
    opt_state: AdamState,
    batch_id: str = "?",
) -> tuple[PolicyParams, AdamState, list[LossStats]]:
    """Run epochs_per_batch full-batch passes of the clipped-surrogate update.

    Returns fresh (params, optimizer state); the inputs are not mutated.
    Raises NonFiniteLoss (naming the batch) if any epoch's loss is not finite.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    states, actions, logp_old, returns, advantages = _batch_arrays(batch, cfg)
    new_params = params.copy()
    new_opt = opt_state.copy()
    arrays = new_params.arrays()
    stats_per_epoch: list[LossStats] = []
    for _ in range(cfg.epochs_per_batch):
        total, stats, grads = _loss_and_grads(
            new_params, states, actions, logp_old, returns, advantages, cfg
        )
        if not np.isfinite(total):
            raise NonFiniteLoss(batch_id, f"(total={total})")
        grads, _ = clip_global_norm(grads, cfg.grad_clip_norm)
        _adam_step(arrays, grads, new_opt, cfg)
        stats_per_epoch.append(stats)
    return new_params, new_opt, stats_per_epoch


def _flatten(arrays: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([a.ravel() for a in arrays])


def _unflatten(flat: np.ndarray, like: list[np.ndarray]) -> list[np.ndarray]:
    out = []
    offset = 0
    for a in like:
        out.append(flat[offset : offset + a.size].reshape(a.shape))
        offset += a.size
    return out


def grad_check(
    params: PolicyParams,
    batch: Sequence[Transition],
    cfg: PpoConfig,
    rng: np.random.Generator | None = None,
    num_checks: int = 50,
    fd_step: float = 1e-5,
    grad_transform=None,
) -> float:
    """Compare analytic gradients against central finite differences.

    Probes ``num_checks`` randomly chosen parameters and returns the largest
    relative error ``|g_a - g_n| / max(1e-8, |g_a| + |g_n|)``.
    ``grad_transform`` (a function on the flat analytic gradient) exists so
    tests can inject deliberate corruption and assert it is detected.
    """
    rng = rng or np.random.default_rng(0)
    states, actions, logp_old, returns, advantages = _batch_arrays(batch, cfg)
    _, _, grads = _loss_and_grads(params, states, actions, logp_old, returns, advantages, cfg)
    flat_g = _flatten(grads)
    if grad_transform is not None:
        flat_g = grad_transform(flat_g)

    template = params.arrays()
    flat_p = _flatten(template)
    idx = rng.choice(flat_p.size, size=min(num_checks, flat_p.size), replace=False)

    def loss_at(vec: np.ndarray) -> float:
        arrays = _unflatten(vec, template)
        p = PolicyParams(*arrays)
        total, _, _ = _loss_and_grads(p, states, actions, logp_old, returns, advantages, cfg)
        return total

    worst = 0.0
    for i in idx:
        plus = flat_p.copy()
        plus[i] += fd_step
        minus = flat_p.copy()
        minus[i] -= fd_step
        g_n = (loss_at(plus) - loss_at(minus)) / (2 * fd_step)
        g_a = float(flat_g[i])
        rel = abs(g_a - g_n) / max(1e-8, abs(g_a) + abs(g_n))
        worst = max(worst, rel)
    return worst


def synthetic_batch(
    rng: np.random.Generator, d: int = 24, n_actions: int = 12, size: int = 16
) -> list[Transition]:
    """Random transitions for gradient checking: bounded states, random
    actions/rewards, episode breaks roughly every four steps."""
    batch = []
    for i in range(size):
        batch.append(
            Transition(
                state=rng.uniform(0.0, 1.0, size=d),
                action_id=int(rng.integers(n_actions)),
                log_prob_old=float(-rng.uniform(0.5, 3.0)),
                reward=float(rng.normal(0.0, 2.0)),
                value_old=float(rng.normal(0.0, 1.0)),
                done=bool(rng.random() < 0.25) or i == size - 1,
            )
        )
    return batch


CHECKPOINT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    params: PolicyParams,
    opt_state: AdamState,
    episode: int = 0,
    seed: int = 0,
) -> None:
    """Write a JSON checkpoint. Floats are serialized via repr, so a
    save/load round-trip reproduces every weight bit-exactly."""
    d, h, n_actions = params.dims
    blob = {
        "version": CHECKPOINT_VERSION,
        "dims": {"d": d, "h": h, "n_actions": n_actions},
        "params": {
            name: arr.tolist()
            for name, arr in zip(
                ("w1", "b1", "w2", "b2", "v1", "c1", "v2", "c2"), params.arrays()
            )
        },
        "adam": {
            "m": [a.tolist() for a in opt_state.m],
            "v": [a.tolist() for a in opt_state.v],
            "step": opt_state.step,
        },
        "episode": episode,
        "seed": seed,
    }
    Path(path).write_text(json.dumps(blob), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[PolicyParams, AdamState, int, int]:
    """Inverse of save_checkpoint: returns (params, adam, episode, seed)."""
    blob = json.loads(Path(path).read_text(encoding="utf-8"))
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {blob.get('version')!r}")
    p = blob["params"]
    params = PolicyParams(
        *(np.array(p[name], dtype=np.float64) for name in
          ("w1", "b1", "w2", "b2", "v1", "c1", "v2", "c2"))
    )
    shapes = params.arrays()
    adam = AdamState(
        m=[np.array(a, dtype=np.float64).reshape(s.shape) for a, s in zip(blob["adam"]["m"], shapes)],
        v=[np.array(a, dtype=np.float64).reshape(s.shape) for a, s in zip(blob["adam"]["v"], shapes)],
        step=int(blob["adam"]["step"]),
    )
    return params, adam, int(blob["episode"]), int(blob["seed"])
