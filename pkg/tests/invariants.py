"""Rule invariants of the warehouse, checked between consecutive states."""

from types import SimpleNamespace

import numpy as np

from uesr.env_warehouse import reset_episode, step

ALLOWED_REWARDS = {0.0, 0.125, 0.5, 0.625, 1.0}


def state_violations(state):
    out = []
    layout, params = state.layout, state.params
    positions = [a.position for a in state.agents]
    if len(set(positions)) != len(positions):
        out.append(f"agents share a tile: {positions}")
    if not all(layout.in_bounds(p) for p in positions):
        out.append("agent out of bounds")
    if len(state.shelves) != len(layout.shelf_home_tiles):
        out.append("shelf count changed")
    placed = [s.current_tile for s in state.shelves if s.current_tile is not None]
    if len(set(placed)) != len(placed):
        out.append("two shelves on one tile")
    carried = [a.carrying for a in state.agents if a.carrying is not None]
    if len(set(carried)) != len(carried):
        out.append("shelf carried twice")
    for s in state.shelves:
        if (s.current_tile is None) != (s.shelf_id in carried):
            out.append(f"shelf {s.shelf_id} neither placed nor carried (or both)")
        if s.pending_return and s.requested:
            out.append(f"shelf {s.shelf_id} pending and requested")
    requested = sum(s.requested for s in state.shelves)
    eligible = sum(not s.requested and not s.pending_return for s in state.shelves)
    if requested > params.n_requests or (requested < params.n_requests and eligible > 0):
        out.append(f"{requested} requests with {eligible} eligible shelves")
    obstacles = state.obstacles
    if len(obstacles) != params.n_obstacles:
        out.append(f"{len(obstacles)} obstacles")
    if any(not layout.is_highway(t) or t in layout.goal_tiles for t in obstacles):
        out.append("obstacle off highway or on a goal")
    if not 0 <= state.episode_step <= params.episode_length:
        out.append("episode_step out of range")
    return out


def snapshot(state):
    """The parts of a state the transition checks compare, without a deep copy."""
    return SimpleNamespace(
        agents=[SimpleNamespace(position=a.position) for a in state.agents],
        obstacles=state.obstacles,
        delivered_count=state.delivered_count,
        global_step=state.global_step,
        episode_step=state.episode_step,
    )


def transition_violations(before, after, actions, outcome):
    out = state_violations(after)
    rewards = np.asarray(outcome.rewards)
    if any(float(r) not in ALLOWED_REWARDS for r in rewards):
        out.append(f"reward outside the allowed set: {rewards}")
    events = outcome.deliveries_this_step + outcome.returns_this_step
    if not np.isclose(rewards.sum(), 0.625 * events):
        out.append(f"reward sum {rewards.sum()} for {events} events")
    if after.delivered_count - before.delivered_count != outcome.deliveries_this_step:
        out.append("delivered_count out of step with deliveries_this_step")
    if after.global_step != before.global_step + 1 or after.episode_step != before.episode_step + 1:
        out.append("clocks did not advance by one")
    boundary = after.global_step % after.params.obstacle_period == 0
    if not boundary and after.obstacles != before.obstacles:
        out.append(f"obstacles moved at global step {after.global_step}")
    if boundary:
        taken = {a.position for a in after.agents} | set(after.placed_shelves())
        if after.obstacles & taken:
            out.append("obstacle placed on an agent or shelf")
    for a_before, a_after, act in zip(before.agents, after.agents, actions):
        if act != 0 and a_after.position != a_before.position:
            out.append("agent moved without a move action")
        dist = abs(a_after.position[0] - a_before.position[0]) + abs(a_after.position[1] - a_before.position[1])
        if dist > 1:
            out.append("agent jumped more than one tile")
    return out


def run_random_steps(state, n_steps, rng):
    """Random joint actions with resets at episode ends; returns (violations, counts)."""
    violations, counts = [], {"deliveries": 0, "returns": 0, "redraws": 0}
    for _ in range(n_steps):
        if state.done:
            reset_episode(state)
            violations += [f"after reset: {v}" for v in state_violations(state)]
        before = snapshot(state)
        actions = [int(a) for a in rng.integers(0, 5, size=len(state.agents))]
        outcome = step(state, actions)
        found = transition_violations(before, state, actions, outcome)
        violations += [f"global step {state.global_step}: {v}" for v in found]
        counts["deliveries"] += outcome.deliveries_this_step
        counts["returns"] += outcome.returns_this_step
        counts["redraws"] += state.global_step % state.params.obstacle_period == 0
    return violations, counts
