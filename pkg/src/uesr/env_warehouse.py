"""Grid warehouse Dec-POMDP with moving obstacles and shelf return rewards.

Coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row; ``y``
grows downward, so facing ``UP`` decreases ``y``.

All randomness flows through the state's ``numpy.random.Generator`` (PCG64
bit generator) in a fixed call order, documented on each function that
draws from it. Two states built from the same variant and seed and driven by
the same actions are identical step for step.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterable, Sequence

import numpy as np

Tile = tuple[int, int]

OBS_TILE_FEATURES = 8
OBS_SELF_FEATURES = 8
OBS_SIZE = 9 * OBS_TILE_FEATURES + OBS_SELF_FEATURES  # 80

DELIVERY_REWARD = 0.5
OTHER_AGENT_REWARD = 0.125


class Facing(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


class Action(IntEnum):
    MOVE_FORWARD = 0
    ROTATE_LEFT = 1
    ROTATE_RIGHT = 2
    PICKUP_PUTDOWN = 3
    NOOP = 4


N_ACTIONS = len(Action)

_DELTA = {Facing.UP: (0, -1), Facing.DOWN: (0, 1), Facing.LEFT: (-1, 0), Facing.RIGHT: (1, 0)}
_LEFT_OF = {Facing.UP: Facing.LEFT, Facing.LEFT: Facing.DOWN, Facing.DOWN: Facing.RIGHT, Facing.RIGHT: Facing.UP}
_RIGHT_OF = {v: k for k, v in _LEFT_OF.items()}


class Variant(str, Enum):
    TRAINING = "training"
    GOAL_SHIFT = "goal_shift"
    SHELF_SHIFT = "shelf_shift"


@dataclass(frozen=True)
class GridLayout:
    width: int
    height: int
    shelf_home_tiles: tuple[Tile, ...]  # index = shelf id
    goal_tiles: tuple[Tile, ...]
    variant_tag: Variant | None = None
    _homes: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        homes = frozenset(self.shelf_home_tiles)
        object.__setattr__(self, "_homes", homes)
        if len(homes) != len(self.shelf_home_tiles):
            raise ValueError("duplicate shelf home tile")
        if homes & set(self.goal_tiles):
            raise ValueError("goal tiles must not be shelf home tiles")
        for x, y in (*homes, *self.goal_tiles):
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise ValueError(f"tile {(x, y)} out of bounds")

    @property
    def highway_mask(self) -> np.ndarray:
        """Boolean array indexed ``[y, x]``; True where shelves may not be put down."""
        mask = np.ones((self.height, self.width), dtype=bool)
        for x, y in self.shelf_home_tiles:
            mask[y, x] = False
        return mask

    def is_highway(self, tile: Tile) -> bool:
        return tile not in self._homes

    def in_bounds(self, tile: Tile) -> bool:
        return 0 <= tile[0] < self.width and 0 <= tile[1] < self.height

    def highway_tiles(self) -> list[Tile]:
        """Highway tiles in row-major order (the order used for every random draw)."""
        return [
            (x, y) for y in range(self.height) for x in range(self.width) if (x, y) not in self._homes
        ]


def _blocks(xs: Iterable[int], ys: Iterable[int]) -> list[Tile]:
    return [(x, y) for y in ys for x in xs]


def build_layout(variant: Variant | str) -> GridLayout:
    """Built-in 10x11 layouts.

    Four 2x3 shelf blocks (24 shelves) and two goal tiles on the bottom row.
    ``goal_shift`` adds two goal tiles on the top row; ``shelf_shift`` pushes the
    shelf columns flush against the side walls.
    """
    variant = Variant(variant)
    width, height = 10, 11
    upper, lower = range(2, 5), range(6, 9)
    if variant is Variant.SHELF_SHIFT:
        columns = [(0, 1), (8, 9)]
    else:
        columns = [(2, 3), (6, 7)]
    homes: list[Tile] = []
    for ys in (upper, lower):
        for xs in columns:
            homes.extend(_blocks(xs, ys))
    homes.sort(key=lambda t: (t[1], t[0]))
    goals = [(4, 10), (5, 10)]
    if variant is Variant.GOAL_SHIFT:
        goals += [(4, 0), (5, 0)]
    return GridLayout(width, height, tuple(homes), tuple(goals), variant)


@dataclass
class AgentState:
    position: Tile
    facing: Facing
    carrying: int | None = None


@dataclass
class ShelfState:
    shelf_id: int
    home_tile: Tile
    current_tile: Tile | None
    requested: bool = False
    pending_return: bool = False


@dataclass(frozen=True)
class EnvParams:
    n_agents: int = 2
    n_requests: int = 4
    n_obstacles: int = 3
    episode_length: int = 50
    obstacle_period: int = 1000


@dataclass
class WarehouseState:
    layout: GridLayout
    params: EnvParams
    agents: list[AgentState]
    shelves: list[ShelfState]
    obstacles: frozenset
    rng: np.random.Generator
    global_step: int = 0
    episode_step: int = 0
    delivered_count: int = 0  # this episode
    returned_count: int = 0

    @property
    def done(self) -> bool:
        return self.episode_step >= self.params.episode_length

    def clone(self) -> "WarehouseState":
        return copy.deepcopy(self)

    def placed_shelves(self) -> dict[Tile, ShelfState]:
        return {s.current_tile: s for s in self.shelves if s.current_tile is not None}

    def signature(self) -> tuple:
        """Hashable summary of everything except the generator, for equality checks."""
        return (
            tuple((a.position, int(a.facing), a.carrying) for a in self.agents),
            tuple((s.current_tile, s.requested, s.pending_return) for s in self.shelves),
            tuple(sorted(self.obstacles)),
            self.global_step,
            self.episode_step,
            self.delivered_count,
            self.returned_count,
        )


@dataclass
class StepOutcome:
    rewards: np.ndarray
    episode_done: bool
    deliveries_this_step: int
    returns_this_step: int = 0
    events: list = field(default_factory=list)


# ---------------------------------------------------------------- construction


def create_env(
    layout_variant: Variant | str | GridLayout,
    seed: int,
    params: EnvParams | None = None,
) -> WarehouseState:
    """Initial state: shelves home, requests drawn, obstacles placed, agents placed.

    Draw order: requests, obstacles, agent placement (see ``reset_episode``).
    """
    layout = layout_variant if isinstance(layout_variant, GridLayout) else build_layout(layout_variant)
    params = params or EnvParams()
    shelves = [ShelfState(i, tile, tile) for i, tile in enumerate(layout.shelf_home_tiles)]
    state = WarehouseState(
        layout=layout,
        params=params,
        agents=[],
        shelves=shelves,
        obstacles=frozenset(),
        rng=np.random.Generator(np.random.PCG64(seed)),
    )
    _refill_requests(state)
    _place_obstacles(state)
    _place_agents(state, keep_cargo=False)
    return state


def reset_episode(state: WarehouseState) -> np.ndarray:
    """Start a new episode; returns observations of shape (n_agents, 80).

    Only agents are re-randomized: positions are drawn without replacement
    from highway tiles not holding an obstacle, then facings. Shelves,
    requests and obstacles persist; a carried shelf stays with its carrier.
    The per-episode delivery and return counters restart at zero.
    """
    _place_agents(state, keep_cargo=True)
    state.episode_step = 0
    state.delivered_count = 0
    state.returned_count = 0
    return observe_all(state)


def _place_agents(state: WarehouseState, keep_cargo: bool) -> None:
    n = state.params.n_agents
    candidates = [t for t in state.layout.highway_tiles() if t not in state.obstacles]
    picks = state.rng.choice(len(candidates), size=n, replace=False)
    facings = state.rng.integers(0, 4, size=n)
    cargo = [a.carrying for a in state.agents] if keep_cargo and state.agents else [None] * n
    state.agents = [
        AgentState(candidates[int(p)], Facing(int(f)), c) for p, f, c in zip(picks, facings, cargo)
    ]


def _place_obstacles(state: WarehouseState) -> None:
    """Draw obstacle tiles among free non-goal highway tiles (row-major candidates)."""
    blocked = {a.position for a in state.agents} | set(state.placed_shelves())
    goals = set(state.layout.goal_tiles)
    candidates = [t for t in state.layout.highway_tiles() if t not in goals and t not in blocked]
    picks = state.rng.choice(len(candidates), size=state.params.n_obstacles, replace=False)
    state.obstacles = frozenset(candidates[int(p)] for p in picks)


def _refill_requests(state: WarehouseState) -> None:
    """Request shelves one at a time, uniformly among shelves neither requested nor pending."""
    while sum(s.requested for s in state.shelves) < state.params.n_requests:
        eligible = [s for s in state.shelves if not s.requested and not s.pending_return]
        if not eligible:
            return
        eligible[int(state.rng.integers(len(eligible)))].requested = True


# ---------------------------------------------------------------- dynamics


def step(state: WarehouseState, joint_actions: Sequence[int]) -> StepOutcome:
    """Advance one time step.

    Resolution order:
      1. rotations;
      2. moves: targets from the pre-step state; a target is invalid if out of
         bounds, an obstacle, or (for a carrier) a tile holding a placed
         shelf. Two agents swapping tiles both stay. Agents sharing a target
         are grouped (groups ordered by lowest agent index) and one winner per
         group is drawn with ``rng.integers(len(group))``. Then movers whose
         target is held by a non-moving agent stay, repeated to a fixed point;
      3. deliveries, in agent order: a carrier of a requested shelf on a goal
         tile delivers; the shelf turns pending-return and one new request is
         drawn;
      4. pickup/putdown, in agent order; putting a pending shelf down on its
         own home tile is a return;
      5. clocks advance; when ``global_step`` reaches a multiple of the
         obstacle period the obstacles are redrawn.
    """
    if state.done:
        raise RuntimeError("step() called on a finished episode; call reset_episode() first")
    n = len(state.agents)
    if len(joint_actions) != n:
        raise ValueError(f"expected {n} actions, got {len(joint_actions)}")
    actions = [Action(int(a)) for a in joint_actions]
    rewards = np.zeros(n)
    outcome = StepOutcome(rewards, False, 0)

    for agent, action in zip(state.agents, actions):
        if action is Action.ROTATE_LEFT:
            agent.facing = _LEFT_OF[agent.facing]
        elif action is Action.ROTATE_RIGHT:
            agent.facing = _RIGHT_OF[agent.facing]

    _resolve_moves(state, actions)

    for i, agent in enumerate(state.agents):
        if agent.carrying is None:
            continue
        shelf = state.shelves[agent.carrying]
        if shelf.requested and agent.position in state.layout.goal_tiles:
            shelf.requested = False
            shelf.pending_return = True
            state.delivered_count += 1
            outcome.deliveries_this_step += 1
            outcome.events.append(("deliver", i, shelf.shelf_id))
            _credit(rewards, i)
            _refill_requests(state)

    for i, (agent, action) in enumerate(zip(state.agents, actions)):
        if action is not Action.PICKUP_PUTDOWN:
            continue
        placed = state.placed_shelves()
        tile = agent.position
        if agent.carrying is None:
            if tile in placed:
                agent.carrying = placed[tile].shelf_id
                placed[tile].current_tile = None
        elif not state.layout.is_highway(tile) and tile not in placed:
            shelf = state.shelves[agent.carrying]
            shelf.current_tile = tile
            agent.carrying = None
            if shelf.pending_return and tile == shelf.home_tile:
                shelf.pending_return = False
                state.returned_count += 1
                outcome.returns_this_step += 1
                outcome.events.append(("return", i, shelf.shelf_id))
                _credit(rewards, i)
                _refill_requests(state)

    state.episode_step += 1
    state.global_step += 1
    if state.global_step % state.params.obstacle_period == 0:
        _place_obstacles(state)
    outcome.episode_done = state.done
    return outcome


def _credit(rewards: np.ndarray, actor: int) -> None:
    rewards += OTHER_AGENT_REWARD
    rewards[actor] += DELIVERY_REWARD - OTHER_AGENT_REWARD


def _resolve_moves(state: WarehouseState, actions: list[Action]) -> None:
    layout = state.layout
    placed = state.placed_shelves()
    positions = [a.position for a in state.agents]
    intents: dict[int, Tile] = {}
    for i, (agent, action) in enumerate(zip(state.agents, actions)):
        if action is not Action.MOVE_FORWARD:
            continue
        dx, dy = _DELTA[agent.facing]
        target = (agent.position[0] + dx, agent.position[1] + dy)
        if not layout.in_bounds(target) or target in state.obstacles:
            continue
        if agent.carrying is not None and target in placed:
            continue
        intents[i] = target

    for i in list(intents):
        for j in list(intents):
            if i < j and intents.get(i) == positions[j] and intents.get(j) == positions[i]:
                del intents[i], intents[j]

    groups: dict[Tile, list[int]] = {}
    for i in sorted(intents):
        groups.setdefault(intents[i], []).append(i)
    for contenders in groups.values():
        if len(contenders) > 1:
            winner = contenders[int(state.rng.integers(len(contenders)))]
            for i in contenders:
                if i != winner:
                    del intents[i]

    changed = True
    while changed:
        changed = False
        held = {positions[j] for j in range(len(positions)) if j not in intents}
        for i in sorted(intents):
            if intents[i] in held:
                del intents[i]
                changed = True
                break

    for i, target in intents.items():
        state.agents[i].position = target


# ---------------------------------------------------------------- observation


def _tile_maps(state: WarehouseState) -> tuple[dict, dict]:
    agents_at = {a.position: a for a in state.agents}
    shelves_at = state.placed_shelves()
    for a in state.agents:
        if a.carrying is not None:
            shelves_at[a.position] = state.shelves[a.carrying]
    return agents_at, shelves_at


def observe(state: WarehouseState, agent_index: int, _maps: tuple | None = None) -> np.ndarray:
    """80-element observation of one agent.

    For each tile of the 3x3 neighbourhood (row-major, own tile in the centre):
    ``[agent, facing up, down, left, right, shelf, requested, obstacle]``; a
    carried shelf counts as being on its carrier's tile and tiles outside the
    grid read as obstacles. Then the agent's own ``[x/width, y/height,
    facing up, down, left, right, carrying, on_highway]``.
    """
    if not 0 <= agent_index < len(state.agents):
        raise IndexError(f"no agent {agent_index}")
    agents_at, shelves_at = _maps or _tile_maps(state)
    layout = state.layout
    me = state.agents[agent_index]
    obs = np.zeros(OBS_SIZE)
    k = 0
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            tile = (me.position[0] + dx, me.position[1] + dy)
            if not layout.in_bounds(tile):
                obs[k + 7] = 1.0
            else:
                other = agents_at.get(tile)
                if other is not None:
                    obs[k] = 1.0
                    obs[k + 1 + int(other.facing)] = 1.0
                shelf = shelves_at.get(tile)
                if shelf is not None:
                    obs[k + 5] = 1.0
                    obs[k + 6] = float(shelf.requested)
                if tile in state.obstacles:
                    obs[k + 7] = 1.0
            k += OBS_TILE_FEATURES
    obs[k] = me.position[0] / layout.width
    obs[k + 1] = me.position[1] / layout.height
    obs[k + 2 + int(me.facing)] = 1.0
    obs[k + 6] = float(me.carrying is not None)
    obs[k + 7] = float(layout.is_highway(me.position))
    return obs


def observe_all(state: WarehouseState) -> np.ndarray:
    maps = _tile_maps(state)
    return np.stack([observe(state, i, maps) for i in range(len(state.agents))])


# ---------------------------------------------------------------- rendering

_AGENT_GLYPHS = {Facing.UP: "^", Facing.DOWN: "v", Facing.LEFT: "<", Facing.RIGHT: ">"}
_CARRIER_GLYPHS = {Facing.UP: "A", Facing.DOWN: "V", Facing.LEFT: "{", Facing.RIGHT: "}"}

LEGEND = (
    "legend: ^v<> agent (facing)  AV{} agent carrying  R requested shelf  "
    "s shelf  p shelf awaiting return  : empty shelf slot  G goal  # obstacle  . highway"
)


def render_ascii(state: WarehouseState) -> str:
    """One glyph per tile, one line per row, followed by a status line and legend."""
    layout = state.layout
    placed = state.placed_shelves()
    agents_at = {a.position: a for a in state.agents}
    goals = set(layout.goal_tiles)
    lines = []
    for y in range(layout.height):
        row = []
        for x in range(layout.width):
            tile = (x, y)
            if tile in agents_at:
                a = agents_at[tile]
                row.append((_CARRIER_GLYPHS if a.carrying is not None else _AGENT_GLYPHS)[a.facing])
            elif tile in state.obstacles:
                row.append("#")
            elif tile in placed:
                s = placed[tile]
                row.append("R" if s.requested else "p" if s.pending_return else "s")
            elif tile in goals:
                row.append("G")
            elif not layout.is_highway(tile):
                row.append(":")
            else:
                row.append(".")
        lines.append("".join(row))
    lines.append(
        f"step {state.episode_step}/{state.params.episode_length} "
        f"global {state.global_step} delivered {state.delivered_count} returned {state.returned_count}"
    )
    lines.append(LEGEND)
    return "\n".join(lines)
