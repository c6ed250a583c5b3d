"""Training on the training layout, few-shot transfer and frozen evaluation."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff import fingerprint, load_checkpoint, save_checkpoint
from ..env_warehouse import Variant
from .config import ExperimentConfig
from .metrics import MetricsRecord, MetricsWriter
from .runner import (
    PHASE_EVAL,
    PHASE_TRANSFER,
    AgentBundle,
    Rollout,
    UpdateStats,
    agents_state_dict,
    build_agents,
    load_agents_state,
    update_agents,
)

log = logging.getLogger(__name__)

CHECKPOINT_KIND = "uesr-agents/1"


class TrainingDiverged(RuntimeError):
    pass


class CheckpointMismatch(ValueError):
    pass


# ---------------------------------------------------------------- checkpoints


def save_agents(path, agents: list[AgentBundle], config: ExperimentConfig, variant: Variant,
                env_steps: int) -> Path:
    meta = {
        "kind": CHECKPOINT_KIND,
        "config": config.to_dict(),
        "layout_variant": Variant(variant).value,
        "fingerprint": fingerprint(**config.architecture()),
        "env_steps": env_steps,
    }
    return save_checkpoint(path, agents_state_dict(agents), meta)


def load_agents(path, config: ExperimentConfig | None = None, phase: int = PHASE_EVAL):
    """Rebuild agents from a checkpoint; ``config`` (if given) must match its architecture."""
    tensors, meta = load_checkpoint(path)
    if meta.get("kind") != CHECKPOINT_KIND:
        raise CheckpointMismatch(f"{path}: not an agent checkpoint")
    saved = ExperimentConfig.from_dict(meta["config"])
    config = config or saved
    if fingerprint(**config.architecture()) != meta["fingerprint"]:
        raise CheckpointMismatch(
            f"{path}: architecture fingerprint {meta['fingerprint']} does not match the config"
        )
    agents = build_agents(config, phase)
    load_agents_state(agents, tensors)
    return agents, config, meta


# ---------------------------------------------------------------- training


@dataclass
class TrainResult:
    records: list[MetricsRecord]
    agents: list[AgentBundle]
    env_steps: int
    episodes: int
    deliveries: int
    best_window_deliveries: float
    checkpoint_path: Path | None = None

    @property
    def deliveries_per_episode(self) -> float:
        return self.deliveries / self.episodes if self.episodes else 0.0


def train(config: ExperimentConfig) -> TrainResult:
    """Train all agents for ``config.total_env_steps`` summed environment steps."""
    agents = build_agents(config)
    rollout = Rollout(config, agents)
    writer = MetricsWriter(config.metrics_path, config.log_wall_clock) if config.metrics_path else None
    ckpt = Path(config.checkpoint_path) if config.checkpoint_path else None
    start = time.perf_counter()
    records: list[MetricsRecord] = []
    env_steps = episodes = deliveries = 0
    win_episodes = win_deliveries = 0
    window: list[UpdateStats] = []
    best = float("-inf")
    next_row = config.metric_flush_interval
    next_ckpt = config.checkpoint_interval or None

    def emit() -> None:
        nonlocal win_episodes, win_deliveries, best
        mean = lambda name: float(np.mean([getattr(s, name) for s in window])) if window else float("nan")  # noqa: E731
        win_rate = win_deliveries / win_episodes if win_episodes else 0.0
        rec = MetricsRecord(
            env_step=env_steps,
            episodes_completed=episodes,
            deliveries_per_episode=deliveries / episodes if episodes else 0.0,
            window_deliveries_per_episode=win_rate,
            actor_loss=mean("actor_loss"),
            critic_loss=mean("critic_loss"),
            pred_loss=mean("pred_loss"),
            enc_loss=mean("enc_loss"),
            wall_clock=time.perf_counter() - start,
        )
        records.append(rec)
        if writer:
            writer.write(rec)
        if win_episodes and win_rate > best:
            best = win_rate
            if ckpt:
                save_agents(ckpt.with_suffix(".best.npz"), agents, config, config.layout_variant, env_steps)
        window.clear()
        win_episodes = win_deliveries = 0

    try:
        while env_steps < config.total_env_steps:
            seg = rollout.run_segment(config.n_steps)
            try:
                stats = update_agents(agents, [seg], config)
            except FloatingPointError as err:
                _dump_divergence(config, env_steps, err)
                raise TrainingDiverged(str(err)) from err
            window.append(stats)
            env_steps += seg.env_steps
            episodes += seg.episodes_completed
            deliveries += seg.deliveries
            win_episodes += seg.episodes_completed
            win_deliveries += seg.deliveries
            if env_steps >= next_row:
                emit()
                next_row += config.metric_flush_interval
            if next_ckpt and ckpt and env_steps >= next_ckpt:
                save_agents(ckpt.with_suffix(f".step{env_steps}.npz"), agents, config,
                            config.layout_variant, env_steps)
                next_ckpt += config.checkpoint_interval
        if window or not records:
            emit()
    finally:
        if writer:
            writer.close()
    if ckpt:
        save_agents(ckpt, agents, config, config.layout_variant, env_steps)
    log.info("trained %s seed %d: %d steps, %.4f deliveries/episode",
             config.scheme.value, config.seed, env_steps, deliveries / max(episodes, 1))
    return TrainResult(records, agents, env_steps, episodes, deliveries,
                       best if best > float("-inf") else 0.0, ckpt)


def _dump_divergence(config: ExperimentConfig, env_steps: int, err: Exception) -> None:
    if not config.metrics_path:
        return
    dump = Path(config.metrics_path).with_suffix(".diverged.json")
    dump.write_text(json.dumps({"env_step": env_steps, "error": str(err), "config": config.to_dict()}, indent=2))


# ---------------------------------------------------------------- evaluation and transfer


@dataclass
class EvalResult:
    episodes: int
    mean_deliveries: float
    std_deliveries: float
    per_episode: list[int] = field(default_factory=list)


def evaluate_agents(agents: list[AgentBundle], config: ExperimentConfig, variant: Variant | str,
                    episodes: int, phase: int = PHASE_EVAL) -> EvalResult:
    """Roll out frozen agents; no parameter is touched."""
    rollout = Rollout(config, agents, Variant(variant), phase=phase)
    per_episode: list[int] = []
    steps_per_episode = config.episode_length // config.n_steps
    while len(per_episode) < episodes:
        for _ in range(steps_per_episode):
            seg = rollout.run_segment(config.n_steps)
            per_episode.extend(seg.episode_deliveries)
    per_episode = per_episode[:episodes]
    arr = np.asarray(per_episode, dtype=np.float64)
    return EvalResult(episodes, float(arr.mean()) if episodes else 0.0,
                      float(arr.std()) if episodes else 0.0, per_episode)


def evaluate(checkpoint, variant: Variant | str, episodes: int, seed: int | None = None) -> EvalResult:
    agents, config, _ = load_agents(checkpoint)
    if seed is not None:
        config = config.replace(seed=seed)
        agents_seeded = build_agents(config, PHASE_EVAL)
        load_agents_state(agents_seeded, agents_state_dict(agents))
        agents = agents_seeded
    return evaluate_agents(agents, config, variant, episodes)


@dataclass
class TransferResult:
    variant: str
    updates: int
    episodes: int
    deliveries: int
    deliveries_per_episode: float
    per_batch: list[float] = field(default_factory=list)
    zero_shot: EvalResult | None = None


def transfer(checkpoint, target_variant: Variant | str, config: ExperimentConfig | None = None,
             finetune_batches: int | None = None, zero_shot_episodes: int = 100) -> TransferResult:
    """Fine-tune a training-layout checkpoint on another layout, one update per batch of episodes.

    Each batch is ``batch_envs`` full episodes; after it, every agent takes a
    single A2C (and UEM) update over all of the batch's n-step segments. The
    reported metric is total deliveries / total episodes over the fine-tuning
    phase. With zero batches the checkpoint is evaluated frozen instead.
    """
    agents, config, meta = load_agents(checkpoint, config, PHASE_TRANSFER)
    if meta["layout_variant"] != Variant.TRAINING.value:
        raise CheckpointMismatch(
            f"transfer expects a checkpoint trained on 'training', got {meta['layout_variant']!r}"
        )
    target = Variant(target_variant)
    batches = config.finetune_batches if finetune_batches is None else finetune_batches
    if batches == 0:
        zs = evaluate_agents(agents, config, target, zero_shot_episodes, PHASE_TRANSFER)
        return TransferResult(target.value, 0, zs.episodes, int(sum(zs.per_episode)),
                              zs.mean_deliveries, zero_shot=zs)

    rollout = Rollout(config, agents, target, phase=PHASE_TRANSFER)
    segments_per_batch = config.episode_length // config.n_steps
    updates = episodes = deliveries = 0
    per_batch = []
    for _ in range(batches):
        segs = [rollout.run_segment(config.n_steps) for _ in range(segments_per_batch)]
        batch_eps = sum(s.episodes_completed for s in segs)
        batch_del = sum(s.deliveries for s in segs)
        update_agents(agents, segs, config)
        updates += 1
        episodes += batch_eps
        deliveries += batch_del
        per_batch.append(batch_del / batch_eps)
    return TransferResult(target.value, updates, episodes, deliveries, deliveries / episodes, per_batch)
