"""Synchronous rollouts of B warehouse copies with N communicating agents.

Per environment step ``t`` and agent ``i``:

1. policy input = ``o_t`` followed by ``policy_inbox(t)`` (everyone's step
   ``t-1`` messages);
2. act: sample the action and the reward-message bits;
3. message = reward bits followed by ``enc(x_t)``, where ``x_t`` is the
   unexpectedness measured on arrival at ``o_t`` (zero at ``t = 0``);
4. all messages are published at ``t`` and every environment steps;
5. ``x_{t+1} = f(g(o_t), a_t, uem_inbox(t+1)) - g(o_{t+1})``, and that
   transition becomes a training sample for the UEM.

All environments start together and episodes have a fixed length, so
episode boundaries line up across the batch and with update segments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..agent_a2c import (
    Actor,
    Critic,
    Trajectory,
    UpdateReport,
    a2c_update,
    act,
    assemble_message,
)
from ..comm_bus import MessageBuffer
from ..env_warehouse import GridLayout, Variant, create_env, observe_all, reset_episode, step
from ..uem import UEM, UEMBatch
from .config import ExperimentConfig

# purposes mixed into the root seed so each phase draws from its own streams
PHASE_TRAIN, PHASE_TRANSFER, PHASE_EVAL = 0, 1, 2


class AgentBundle:
    """Everything one agent learns: actor, critic (+ target) and optional UEM."""

    def __init__(self, config: ExperimentConfig, seeds: list[np.random.SeedSequence]):
        actor_ss, critic_ss, uem_ss, act_ss = seeds
        self.actor = Actor(config.policy_input_size, config.n_bits, np.random.default_rng(actor_ss))
        self.critic = Critic(config.policy_input_size, np.random.default_rng(critic_ss))
        self.uem = UEM(config.uem(), np.random.default_rng(uem_ss)) if config.scheme.uses_ues else None
        self.act_rng = np.random.default_rng(act_ss)

    def state_dict(self, prefix: str) -> dict[str, np.ndarray]:
        out = {}
        out.update(self.actor.params.state_dict(f"{prefix}actor/"))
        out.update(self.critic.online.state_dict(f"{prefix}critic/"))
        out.update(self.critic.target.state_dict(f"{prefix}target/"))
        if self.uem is not None:
            out.update(self.uem.state_dict(f"{prefix}uem/"))
        return out

    def load_state_dict(self, state, prefix: str) -> None:
        self.actor.params.load_state_dict(state, f"{prefix}actor/")
        self.critic.online.load_state_dict(state, f"{prefix}critic/")
        self.critic.target.load_state_dict(state, f"{prefix}target/")
        if self.uem is not None:
            self.uem.load_state_dict(state, f"{prefix}uem/")


def build_agents(config: ExperimentConfig, phase: int = PHASE_TRAIN) -> list[AgentBundle]:
    root = np.random.SeedSequence([config.seed, phase])
    _, agent_root = root.spawn(2)
    return [AgentBundle(config, ss.spawn(4)) for ss in agent_root.spawn(config.n_agents)]


def env_seeds(config: ExperimentConfig, phase: int) -> list[int]:
    root = np.random.SeedSequence([config.seed, phase])
    env_root, _ = root.spawn(2)
    return [int(ss.generate_state(1, np.uint64)[0]) for ss in env_root.spawn(config.batch_envs)]


def agents_state_dict(agents: list[AgentBundle]) -> dict[str, np.ndarray]:
    out = {}
    for i, agent in enumerate(agents):
        out.update(agent.state_dict(f"agent{i}/"))
    return out


def load_agents_state(agents: list[AgentBundle], state) -> None:
    for i, agent in enumerate(agents):
        agent.load_state_dict(state, f"agent{i}/")


@dataclass
class SegmentResult:
    trajectories: list[Trajectory]  # one per agent
    uem_batches: list[UEMBatch | None]
    env_steps: int
    deliveries: int
    episodes_completed: int
    episode_deliveries: list[int] = field(default_factory=list)  # per finished episode
    message_trace: list = field(default_factory=list)


class Rollout:
    """B synchronized environments plus the per-agent recurrent and message state."""

    def __init__(self, config: ExperimentConfig, agents: list[AgentBundle],
                 variant: Variant | GridLayout | None = None, phase: int = PHASE_TRAIN,
                 trace_messages: bool = False):
        self.config = config
        self.agents = agents
        self.split = config.split
        variant = config.layout_variant if variant is None else variant
        params = config.env_params()
        self.envs = [create_env(variant, s, params) for s in env_seeds(config, phase)]
        B, N = config.batch_envs, config.n_agents
        self.buffer = MessageBuffer(N, config.message_len, (B,))
        self.trace_messages = trace_messages
        self._episode_deliveries = np.zeros(B, dtype=np.int64)
        self._start_episode(first=True)

    def _start_episode(self, first: bool = False) -> None:
        B, N = self.config.batch_envs, self.config.n_agents
        if first:
            self.obs = np.stack([observe_all(env) for env in self.envs])
        else:
            self.obs = np.stack([reset_episode(env) for env in self.envs])
        self.buffer.clear()
        self.t = 0
        self.hidden = [a.actor.initial_hidden(B) for a in self.agents]
        self.surprise = [np.zeros((B, a.uem.config.hidden)) if a.uem else None for a in self.agents]
        self._episode_deliveries[:] = 0

    def policy_input(self, i: int, t: int | None = None) -> np.ndarray:
        t = self.t if t is None else t
        return np.concatenate([self.obs[:, i], self.buffer.policy_inbox(i, t)], axis=-1)

    def run_segment(self, n_steps: int) -> SegmentResult:
        cfg = self.config
        B, N = cfg.batch_envs, cfg.n_agents
        in_size = cfg.policy_input_size
        inputs = np.zeros((n_steps, N, B, in_size))
        actions = np.zeros((n_steps, N, B), dtype=np.int64)
        bits = np.zeros((n_steps, N, B, cfg.n_bits), dtype=np.int64)
        rewards = np.zeros((n_steps, N, B))
        dones = np.zeros((n_steps, B), dtype=bool)
        logps = [[] for _ in range(N)]
        ents = [[] for _ in range(N)]
        h0 = [h.copy() for h in self.hidden]
        uem_rows: list[list] = [[] for _ in range(N)]
        result = SegmentResult([], [], 0, 0, 0)

        for k in range(n_steps):
            t = self.t
            messages = np.zeros((B, N, cfg.message_len))
            for i, agent in enumerate(self.agents):
                pin = self.policy_input(i, t)
                inputs[k, i] = pin
                res = act(agent.actor, pin, self.hidden[i], agent.act_rng)
                self.hidden[i] = res.new_hidden
                actions[k, i] = res.action
                bits[k, i] = res.reward_message_bits
                logps[i].append(res.log_probs)
                ents[i].append(res.entropies)
                if cfg.scheme.communicates:
                    ues = None
                    if agent.uem is not None and not cfg.zero_ues:
                        ues = agent.uem.encode_message(self.surprise[i])
                    reward_bits = res.reward_message_bits if cfg.n_bits else None
                    messages[:, i] = assemble_message(cfg.scheme, reward_bits, ues, self.split)
            if cfg.scheme.communicates:
                self.buffer.publish(t, messages)
            if self.trace_messages:
                result.message_trace.append(
                    {"t": t, "published": messages.copy(),
                     "policy_inbox": [self.buffer.policy_inbox(i, t).copy() for i in range(N)],
                     "uem_inbox": [self.buffer.uem_inbox(i, t).copy() for i in range(N)]}
                )

            done = False
            for b, env in enumerate(self.envs):
                out = step(env, actions[k, :, b])
                rewards[k, :, b] = out.rewards
                self._episode_deliveries[b] += out.deliveries_this_step
                result.deliveries += out.deliveries_this_step
                done = out.episode_done
            dones[k] = done
            new_obs = np.stack([observe_all(env) for env in self.envs])
            for i, agent in enumerate(self.agents):
                if agent.uem is None:
                    continue
                inbox = self.buffer.uem_inbox(i, t + 1)
                uem_rows[i].append((self.obs[:, i], actions[k, i], inbox, new_obs[:, i]))
                self.surprise[i] = agent.uem.surprise(self.obs[:, i], actions[k, i], inbox, new_obs[:, i])
            self.obs = new_obs
            self.t += 1
            result.env_steps += B

            if done:
                if k != n_steps - 1:
                    raise RuntimeError("episode ended inside an update segment")
                boot = [self.policy_input(i) for i in range(N)]
                result.episodes_completed += B
                result.episode_deliveries.extend(int(d) for d in self._episode_deliveries)
                self._start_episode()
        if not dones[-1].any():
            boot = [self.policy_input(i) for i in range(N)]

        for i in range(N):
            result.trajectories.append(Trajectory(
                inputs=inputs[:, i], actions=actions[:, i], bits=bits[:, i], rewards=rewards[:, i],
                dones=dones.copy(), h0=h0[i], bootstrap_input=boot[i],
                log_probs=np.stack(logps[i]), entropies=np.stack(ents[i]),
            ))
            if uem_rows[i]:
                cols = list(zip(*uem_rows[i]))
                result.uem_batches.append(UEMBatch(*(np.concatenate(c, axis=0) for c in cols)))
            else:
                result.uem_batches.append(None)
        return result


@dataclass
class UpdateStats:
    actor_loss: float = 0.0
    critic_loss: float = 0.0
    pred_loss: float = float("nan")
    enc_loss: float = float("nan")


def update_agents(agents: list[AgentBundle], segments: list[SegmentResult],
                  config: ExperimentConfig) -> UpdateStats:
    """One A2C update and one UEM update per agent over the given segments."""
    a2c_cfg = config.a2c()
    reports: list[UpdateReport] = []
    pred, enc = [], []
    for i, agent in enumerate(agents):
        trajs = [seg.trajectories[i] for seg in segments]
        reports.append(a2c_update(agent.actor, agent.critic, trajs, a2c_cfg))
        if agent.uem is not None:
            batches = [seg.uem_batches[i] for seg in segments if seg.uem_batches[i] is not None]
            merged = UEMBatch(*(np.concatenate(c, axis=0) for c in zip(*batches)))
            lp, le = agent.uem.update(merged)
            pred.append(lp)
            enc.append(le)
    stats = UpdateStats(
        actor_loss=float(np.mean([r.actor_loss for r in reports])),
        critic_loss=float(np.mean([r.critic_loss for r in reports])),
    )
    if pred:
        stats.pred_loss = float(np.mean(pred))
        stats.enc_loss = float(np.mean(enc))
    return stats
