"""Single-agent 3x3 walk-to-goal task for checking that A2C learns at all.

The agent sees a one-hot of its cell, moves up/down/left/right (action 4
stays put) and earns 1 on reaching the bottom-right corner, after which it
restarts from a random other cell. The optimal actions in a cell are exactly
the moves that shorten the Manhattan distance to the goal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent_a2c import A2CConfig, Actor, Critic, Trajectory, a2c_update, act

SIZE = 3
GOAL = (SIZE - 1, SIZE - 1)
N_CELLS = SIZE * SIZE
_MOVES = [(0, -1), (0, 1), (-1, 0), (1, 0), (0, 0)]


def optimal_actions(cell: tuple[int, int]) -> set[int]:
    x, y = cell
    out = set()
    if x < GOAL[0]:
        out.add(3)
    if y < GOAL[1]:
        out.add(1)
    return out


class GoalGrid:
    def __init__(self, batch: int, rng: np.random.Generator):
        self.batch = batch
        self.rng = rng
        self.cells = [self._start() for _ in range(batch)]

    def _start(self) -> tuple[int, int]:
        starts = [(x, y) for y in range(SIZE) for x in range(SIZE) if (x, y) != GOAL]
        return starts[int(self.rng.integers(len(starts)))]

    def observe(self) -> np.ndarray:
        obs = np.zeros((self.batch, N_CELLS))
        for b, (x, y) in enumerate(self.cells):
            obs[b, y * SIZE + x] = 1.0
        return obs

    def step(self, actions) -> tuple[np.ndarray, np.ndarray]:
        rewards = np.zeros(self.batch)
        dones = np.zeros(self.batch, dtype=bool)
        for b, a in enumerate(actions):
            dx, dy = _MOVES[int(a)]
            x = min(max(self.cells[b][0] + dx, 0), SIZE - 1)
            y = min(max(self.cells[b][1] + dy, 0), SIZE - 1)
            if (x, y) == GOAL:
                rewards[b], dones[b] = 1.0, True
                self.cells[b] = self._start()
            else:
                self.cells[b] = (x, y)
        return rewards, dones


@dataclass
class SanityResult:
    updates: int
    optimal_rate: float
    history: list[float]


def optimal_rate(actor: Actor, env: GoalGrid, rng: np.random.Generator, steps: int = 200) -> float:
    """Fraction of on-policy actions that are optimal, over ``steps`` frozen steps per env."""
    hidden = actor.initial_hidden(env.batch)
    hits = total = 0
    for _ in range(steps):
        cells = list(env.cells)
        res = act(actor, env.observe(), hidden, rng)
        hits += sum(int(a) in optimal_actions(c) for a, c in zip(res.action, cells))
        total += env.batch
        _, dones = env.step(res.action)
        hidden = res.new_hidden * (~dones)[:, None]
    return hits / total


def train_goal_grid(updates: int = 200, seed: int = 0, config: A2CConfig | None = None,
                    eval_every: int = 50) -> SanityResult:
    config = config or A2CConfig(learning_rate=0.01, entropy_coefficient=0.001, gamma=0.9)
    root = np.random.SeedSequence(seed)
    s_actor, s_critic, s_env, s_act, s_eval = root.spawn(5)
    actor = Actor(N_CELLS, 0, np.random.default_rng(s_actor))
    critic = Critic(N_CELLS, np.random.default_rng(s_critic))
    env = GoalGrid(config.batch_envs, np.random.default_rng(s_env))
    act_rng = np.random.default_rng(s_act)
    hidden = actor.initial_hidden(config.batch_envs)
    history = []
    for u in range(updates):
        h0 = hidden.copy()
        inputs, actions, rewards, dones = [], [], [], []
        for _ in range(config.n_steps):
            obs = env.observe()
            res = act(actor, obs, hidden, act_rng)
            r, d = env.step(res.action)
            hidden = res.new_hidden * (~d)[:, None]
            inputs.append(obs)
            actions.append(res.action)
            rewards.append(r)
            dones.append(d)
        traj = Trajectory(
            inputs=np.stack(inputs), actions=np.stack(actions),
            bits=np.zeros((config.n_steps, config.batch_envs, 0), dtype=np.int64),
            rewards=np.stack(rewards), dones=np.stack(dones), h0=h0, bootstrap_input=env.observe(),
        )
        a2c_update(actor, critic, traj, config)
        if eval_every and (u + 1) % eval_every == 0:
            probe = GoalGrid(config.batch_envs, np.random.default_rng(s_eval.spawn(1)[0]))
            history.append(optimal_rate(actor, probe, np.random.default_rng(u)))
    probe = GoalGrid(config.batch_envs, np.random.default_rng(s_eval))
    return SanityResult(updates, optimal_rate(actor, probe, np.random.default_rng(seed)), history)


# ---------------------------------------------------------------- UEM learning checks

# fixed action cycle for the scripted UEM run; mostly moves, some turns and lifts
SCRIPT = (0, 0, 1, 0, 0, 2, 3, 0, 2, 0, 4)


def scripted_uem_run(steps: int = 20_000, seed: int = 0, segment: int = 5) -> list[float]:
    """Train a lone UEM on one agent driven by ``SCRIPT`` in the training warehouse.

    The inbox is all zeros (no teammates). One update per ``segment`` steps;
    returns the prediction loss of every update in order.
    """
    from .env_warehouse import EnvParams, create_env, observe_all, reset_episode, step
    from .uem import UEM, UEMBatch, UEMConfig

    uem = UEM(UEMConfig(), np.random.default_rng(seed))
    state = create_env("training", seed, EnvParams(n_agents=1))
    obs = observe_all(state)[0]
    prev, acts, curr, losses = [], [], [], []
    for t in range(steps):
        action = SCRIPT[t % len(SCRIPT)]
        outcome = step(state, [action])
        nxt = observe_all(state)[0]
        prev.append(obs)
        acts.append(action)
        curr.append(nxt)
        obs = reset_episode(state)[0] if outcome.episode_done else nxt
        if len(prev) == segment:
            batch = UEMBatch(np.array(prev), np.array(acts), np.zeros((segment, uem.config.inbox_len)),
                             np.array(curr))
            losses.append(uem.update(batch)[0])
            prev, acts, curr = [], [], []
    return losses


def autoencoder_fit(steps: int = 1000, seed: int = 0, ues_len: int = 10,
                    n_samples: int = 256, rank: int = 5) -> tuple[float, float]:
    """Fit only the message autoencoder to a fixed set of synthetic low-rank x.

    Returns (initial, final) reconstruction loss on that set.
    """
    from .autodiff import adam_step
    from .uem import EMBED_SIZE, UEM, UEMConfig, reconstruction_loss

    rng = np.random.default_rng(seed)
    basis = rng.normal(size=(EMBED_SIZE, rank)) / np.sqrt(rank)
    xs = rng.uniform(-1.0, 1.0, size=(n_samples, rank)) @ basis.T
    uem = UEM(UEMConfig(ues_len=ues_len), rng)
    initial = reconstruction_loss(uem.ae, xs).item()
    for _ in range(steps):
        reconstruction_loss(uem.ae, xs).backward()
        adam_step(uem.ae, uem.optim)
    return initial, reconstruction_loss(uem.ae, xs).item()
