"""REINFORCE trainer for the swap policy.

The environment is improvement search: a state is (current assignment,
best-so-far assignment); an action is a facility pair to swap.  Swaps are
accepted unconditionally — exploration is the policy's job — and the reward
is the clipped one-step improvement of the incumbent,
``max(0, best_cost - new_cost)``, so episode return telescopes to the total
improvement of the best-so-far cost.

Updates are n-step REINFORCE with a learned baseline: returns are truncated
discounted sums over a sliding window (no bootstrap from the critic), the
advantage is return minus the detached critic value, and entropy is rewarded
with a coefficient that decays geometrically per epoch.  One Adam step is
taken per collected batch of episodes.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from ._kernels import objective as _objective, swap_delta as _swap_delta
from .core import make_rng
from .errors import NumericalAbortError, ValidationError
from .policy import InstanceBatch, SawtPolicy, save_policy

__all__ = [
    "SearchState",
    "Trajectory",
    "TrainConfig",
    "TrainResult",
    "EvalResult",
    "reset_state",
    "step_state",
    "collect_rollouts",
    "compute_returns",
    "reinforce_update",
    "evaluate",
    "train",
]


@dataclass
class SearchState:
    """Batched improvement-search state over same-size instances."""

    sigma: np.ndarray  # (B, n) current assignment
    cost: np.ndarray  # (B,) current cost
    best_sigma: np.ndarray  # (B, n) incumbent assignment
    best_cost: np.ndarray  # (B,) incumbent cost
    t: int = 0

    def copy(self) -> "SearchState":
        return SearchState(
            self.sigma.copy(), self.cost.copy(),
            self.best_sigma.copy(), self.best_cost.copy(), self.t,
        )


def _f64_matrices(batch: InstanceBatch) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Float64 flow/distance views for exact cost bookkeeping."""
    flows = [inst.flow for inst in batch.instances]
    dists = [inst.distance for inst in batch.instances]
    return flows, dists


def reset_state(batch: InstanceBatch, init: str = "identity", rng=None) -> SearchState:
    """Fresh search state: identity or uniformly random starting assignments."""
    B, n = batch.size, batch.n
    if init == "identity":
        sigma = np.tile(np.arange(n, dtype=np.int64), (B, 1))
    elif init == "random":
        if rng is None:
            raise ValidationError("init='random' requires an rng")
        sigma = np.stack([rng.permutation(n).astype(np.int64) for _ in range(B)])
    else:
        raise ValidationError(f"init must be 'identity' or 'random', got {init!r}")
    flows, dists = _f64_matrices(batch)
    cost = np.array([_objective(flows[b], dists[b], sigma[b]) for b in range(B)])
    return SearchState(sigma, cost, sigma.copy(), cost.copy(), 0)


def step_state(batch: InstanceBatch, state: SearchState, swaps: np.ndarray) -> tuple[SearchState, np.ndarray]:
    """Apply one swap per element (unconditional accept); returns new state and rewards.

    Reward is ``max(0, best_cost - new_cost)``: positive only when the swap
    produces a new incumbent, by exactly the incumbent's improvement.
    """
    swaps = np.asarray(swaps, dtype=np.int64)
    B = batch.size
    flows, dists = _f64_matrices(batch)
    new = state.copy()
    rewards = np.zeros(B, dtype=np.float64)
    for b in range(B):
        i, j = int(swaps[b, 0]), int(swaps[b, 1])
        delta = _swap_delta(flows[b], dists[b], new.sigma[b], i, j)
        new.sigma[b, i], new.sigma[b, j] = new.sigma[b, j], new.sigma[b, i]
        new.cost[b] += delta
        if new.cost[b] < new.best_cost[b]:
            rewards[b] = new.best_cost[b] - new.cost[b]
            new.best_cost[b] = new.cost[b]
            new.best_sigma[b] = new.sigma[b]
    new.t += 1
    return new, rewards


@dataclass
class Trajectory:
    """One collected episode batch: per-step graph tensors and rewards."""

    log_probs: list  # T tensors of shape (B,)
    entropies: list  # T tensors of shape (B,)
    values: list  # T tensors of shape (B,)
    rewards: np.ndarray  # (T, B)
    start_cost: np.ndarray  # (B,)
    final_state: SearchState


def collect_rollouts(
    policy: SawtPolicy,
    batch: InstanceBatch,
    steps: int,
    rng,
    state: SearchState | None = None,
    init: str = "identity",
    greedy: bool = False,
) -> Trajectory:
    """Roll the policy forward ``steps`` swaps from ``state`` (or a fresh one)."""
    if steps < 1:
        raise ValidationError(f"steps must be positive, got {steps}")
    if state is None:
        state = reset_state(batch, init=init, rng=rng)
    log_probs, entropies, values = [], [], []
    rewards = np.zeros((steps, batch.size), dtype=np.float64)
    start_cost = state.cost.copy()
    for t in range(steps):
        out = policy.act(batch, state.sigma, state.best_sigma, rng=rng, greedy=greedy)
        state, r = step_state(batch, state, out.swaps)
        log_probs.append(out.log_prob)
        entropies.append(out.entropy)
        values.append(out.value)
        rewards[t] = r
    return Trajectory(log_probs, entropies, values, rewards, start_cost, state)


def compute_returns(rewards: np.ndarray, gamma: float, window: int) -> np.ndarray:
    """Truncated discounted returns: ``G_t = sum_{k<window} gamma^k r_{t+k}``.

    The window is clipped at episode end; nothing is bootstrapped past it.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.ndim != 2:
        raise ValidationError(f"rewards must be (T, B), got shape {rewards.shape}")
    if not 0.0 <= gamma <= 1.0:
        raise ValidationError(f"gamma must lie in [0, 1], got {gamma}")
    if window < 1:
        raise ValidationError(f"window must be positive, got {window}")
    T = rewards.shape[0]
    returns = np.zeros_like(rewards)
    for t in range(T - 1, -1, -1):
        returns[t] = rewards[t]
        if t + 1 < T:
            returns[t] += gamma * returns[t + 1]
        if t + window < T:
            returns[t] -= gamma**window * rewards[t + window]
    return returns


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters (defaults are desk-scale, minutes on a laptop).

    Attributes:
        epochs: Passes over the training set.
        batch_size: Episodes collected (and instances embedded) per update.
        episode_length: Swap steps per episode.
        return_window: Truncation horizon of the n-step return.
        gamma: Discount factor inside the window.
        entropy_beta: Initial entropy bonus coefficient (entropy is rewarded).
        entropy_decay: Per-epoch geometric decay of the entropy coefficient.
        value_coef: Weight of the critic's squared-error term.
        lr: Adam learning rate.
        init: Episode start assignment, ``"identity"`` or ``"random"``.
        seed: Master seed for shuffling, embeddings, starts, and sampling.
        eval_every: Evaluate on held-out instances every k epochs (0 = never).
        eval_steps: Swap budget per instance during evaluation.
    """

    epochs: int = 30
    batch_size: int = 32
    episode_length: int = 64
    return_window: int = 8
    gamma: float = 0.99
    entropy_beta: float = 0.005
    entropy_decay: float = 0.99
    value_coef: float = 0.5
    lr: float = 1e-3
    init: str = "identity"
    seed: int = 0
    eval_every: int = 0
    eval_steps: int = 100

    def __post_init__(self):
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1 or self.episode_length < 1:
            raise ValidationError("batch_size and episode_length must be positive")
        if self.return_window < 1 or self.eval_steps < 1:
            raise ValidationError("return_window and eval_steps must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValidationError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 < self.entropy_decay <= 1.0:
            raise ValidationError(f"entropy_decay must lie in (0, 1], got {self.entropy_decay}")
        if self.entropy_beta < 0 or self.value_coef < 0 or self.lr <= 0:
            raise ValidationError("entropy_beta/value_coef must be >= 0 and lr > 0")
        if self.init not in ("identity", "random"):
            raise ValidationError(f"init must be 'identity' or 'random', got {self.init!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def reinforce_update(
    policy: SawtPolicy,
    optimizer: nn.Adam,
    trajectory: Trajectory,
    config: TrainConfig,
    epoch: int = 0,
) -> dict:
    """One gradient step from a collected trajectory; returns loss metrics.

    Loss = -E[log pi * (G - V)] - beta * decay^epoch * E[H] + zeta * E[(G - V)^2],
    with the advantage detached from the critic.  A non-finite loss aborts
    with :class:`NumericalAbortError` carrying component diagnostics.
    """
    returns = compute_returns(trajectory.rewards, config.gamma, config.return_window)
    logp = nn.stack(trajectory.log_probs, axis=0)  # (T, B)
    values = nn.stack(trajectory.values, axis=0)  # (T, B)
    entropy = nn.stack(trajectory.entropies, axis=0)  # (T, B)
    dt = logp.dtype
    advantage = returns - values.data.astype(np.float64)  # detached baseline
    coef = config.entropy_beta * config.entropy_decay**epoch

    policy_term = nn.neg(nn.mean(nn.mul(logp, nn.Tensor.const(advantage.astype(dt)))))
    entropy_term = nn.mean(entropy)
    err = nn.sub(nn.Tensor.const(returns.astype(dt)), values)
    value_term = nn.mean(nn.mul(err, err))
    loss = nn.sub(
        nn.add(policy_term, nn.mul(nn.Tensor.const(np.asarray(config.value_coef, dtype=dt)), value_term)),
        nn.mul(nn.Tensor.const(np.asarray(coef, dtype=dt)), entropy_term),
    )

    metrics = {
        "loss": float(loss.data),
        "policy_loss": float(policy_term.data),
        "value_loss": float(value_term.data),
        "entropy": float(entropy_term.data),
        "entropy_coef": float(coef),
        "mean_return": float(returns.mean()),
        "mean_reward": float(trajectory.rewards.mean()),
    }
    if not all(np.isfinite(v) for v in metrics.values()):
        raise NumericalAbortError(
            "non-finite loss during policy update", diagnostics={"epoch": epoch, **metrics}
        )

    optimizer.zero_grad()
    loss.backward()
    grad_sq = 0.0
    for t in policy.params.values():
        if t.grad is not None:
            grad_sq += float(np.sum(t.grad.astype(np.float64) ** 2))
    metrics["grad_norm"] = float(np.sqrt(grad_sq))
    if not np.isfinite(metrics["grad_norm"]):
        raise NumericalAbortError(
            "non-finite gradient during policy update",
            diagnostics={"epoch": epoch, **metrics},
        )
    optimizer.step()
    optimizer.zero_grad()
    return metrics


@dataclass
class EvalResult:
    """Best costs found per instance within the evaluation swap budget."""

    best_costs: np.ndarray  # (N,)
    best_sigmas: list  # N arrays
    mean_cost: float
    steps: int


def _buckets(instances) -> list[list[int]]:
    by_n: dict[int, list[int]] = {}
    for idx, inst in enumerate(instances):
        by_n.setdefault(inst.n, []).append(idx)
    return [by_n[n] for n in sorted(by_n)]


def evaluate(
    policy: SawtPolicy,
    instances,
    steps: int = 100,
    seed: int = 0,
    batch_size: int = 64,
    greedy: bool = False,
    init: str = "identity",
) -> EvalResult:
    """Run sampled (or greedy) search on each instance; no gradients recorded.

    A ``steps=0`` budget reports the starting assignments unchanged.
    """
    instances = list(instances)
    if not instances:
        raise ValidationError("evaluate needs at least one instance")
    if steps < 0:
        raise ValidationError(f"steps must be >= 0, got {steps}")
    rng = make_rng(seed)
    best_costs = np.zeros(len(instances), dtype=np.float64)
    best_sigmas: list = [None] * len(instances)
    with nn.no_grad():
        for bucket in _buckets(instances):
            for lo in range(0, len(bucket), batch_size):
                idxs = bucket[lo : lo + batch_size]
                batch = policy.embed_instances([instances[i] for i in idxs], rng)
                if steps == 0:
                    final = reset_state(batch, init=init, rng=rng)
                else:
                    final = collect_rollouts(
                        policy, batch, steps, rng, init=init, greedy=greedy
                    ).final_state
                for pos, idx in enumerate(idxs):
                    best_costs[idx] = final.best_cost[pos]
                    best_sigmas[idx] = final.best_sigma[pos].copy()
    return EvalResult(best_costs, best_sigmas, float(best_costs.mean()), steps)


@dataclass
class TrainResult:
    """Epoch-level history plus the trained policy's optimizer."""

    history: list = field(default_factory=list)
    optimizer: nn.Adam | None = None


def train(
    policy: SawtPolicy,
    instances,
    config: TrainConfig | None = None,
    eval_instances=None,
    metrics_path=None,
    checkpoint_path=None,
    log=None,
    start_epoch: int = 0,
    optimizer: nn.Adam | None = None,
) -> TrainResult:
    """Train ``policy`` on ``instances`` with batched n-step REINFORCE.

    Instances are bucketed by size (a batch never mixes sizes), shuffled each
    epoch, and embedded afresh per batch so the facility one-hot draw is
    resampled.  One optimizer step is taken per batch.  If given,
    ``metrics_path`` receives one JSON line per epoch and ``checkpoint_path``
    is (re)written after every epoch.  ``log`` is an optional callable fed
    the same epoch dicts.  ``start_epoch``/``optimizer`` continue a resumed
    run: epoch numbering and entropy decay pick up where the checkpoint left
    off.
    """
    config = config or TrainConfig()
    instances = list(instances)
    if not instances:
        raise ValidationError("train needs at least one instance")
    if start_epoch < 0:
        raise ValidationError(f"start_epoch must be >= 0, got {start_epoch}")
    rng = make_rng(config.seed + start_epoch)
    optimizer = optimizer or nn.Adam(policy.params, lr=config.lr)
    result = TrainResult(optimizer=optimizer)
    metrics_file = open(metrics_path, "w") if metrics_path else None
    best_eval = np.inf
    try:
        for epoch in range(start_epoch, start_epoch + config.epochs):
            tic = time.perf_counter()
            order = np.concatenate(
                [rng.permutation(bucket) for bucket in map(np.asarray, _buckets(instances))]
            )
            epoch_metrics: list[dict] = []
            best_costs: list[float] = []
            start = 0
            while start < len(order):
                # Batches must stay within one size bucket.
                n0 = instances[order[start]].n
                idxs = [order[start]]
                start += 1
                while (
                    start < len(order)
                    and len(idxs) < config.batch_size
                    and instances[order[start]].n == n0
                ):
                    idxs.append(order[start])
                    start += 1
                batch = policy.embed_instances([instances[i] for i in idxs], rng)
                traj = collect_rollouts(
                    policy, batch, config.episode_length, rng, init=config.init
                )
                epoch_metrics.append(
                    reinforce_update(policy, optimizer, traj, config, epoch)
                )
                best_costs.extend(traj.final_state.best_cost.tolist())
            row = {
                "epoch": epoch,
                "updates": len(epoch_metrics),
                "best_cost_mean": float(np.mean(best_costs)),
                "wall_ms": int((time.perf_counter() - tic) * 1000),
            }
            for key in ("loss", "policy_loss", "value_loss", "entropy",
                        "entropy_coef", "mean_return", "grad_norm"):
                row[key] = float(np.mean([m[key] for m in epoch_metrics]))
            improved_eval = False
            if eval_instances and config.eval_every and (epoch + 1) % config.eval_every == 0:
                ev = evaluate(
                    policy, eval_instances, steps=config.eval_steps,
                    seed=config.seed + 1_000_003 + epoch,
                )
                row["eval_cost_mean"] = ev.mean_cost
                if ev.mean_cost < best_eval:
                    best_eval = ev.mean_cost
                    improved_eval = True
            result.history.append(row)
            if metrics_file:
                metrics_file.write(json.dumps(row, sort_keys=True) + "\n")
                metrics_file.flush()
            if checkpoint_path:
                meta = {"epoch": epoch, "train_config": config.to_dict()}
                save_policy(checkpoint_path, policy, optimizer, meta=meta)
                if improved_eval:
                    p = Path(checkpoint_path)
                    save_policy(p.with_name(p.stem + "_best" + p.suffix),
                                policy, optimizer, meta=meta)
            if log:
                log(row)
    finally:
        if metrics_file:
            metrics_file.close()
    return result
