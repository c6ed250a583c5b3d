"""Straight-line reference interpreter of the warehouse rules.

Written against the rule text only (movement, conflicts, pickup/putdown,
delivery/return rewards, request refill, obstacle schedule), over plain
dicts and lists, sharing no code with ``uesr.env_warehouse``. Random draws
use the same documented generator calls in the same order.
"""

import numpy as np

MOVES = {"U": (0, -1), "D": (0, 1), "L": (-1, 0), "R": (1, 0)}
TURN_LEFT = {"U": "L", "L": "D", "D": "R", "R": "U"}
TURN_RIGHT = {"U": "R", "R": "D", "D": "L", "L": "U"}
DIRS = "UDLR"  # index order of the facing enum


def from_state(state):
    """Snapshot a WarehouseState into the interpreter's plain representation."""
    return {
        "W": state.layout.width,
        "H": state.layout.height,
        "homes": list(state.layout.shelf_home_tiles),
        "goals": list(state.layout.goal_tiles),
        "agents": [[a.position[0], a.position[1], DIRS[int(a.facing)], a.carrying] for a in state.agents],
        "shelves": [[s.current_tile, s.requested, s.pending_return, s.home_tile] for s in state.shelves],
        "obstacles": set(state.obstacles),
        "gstep": state.global_step,
        "estep": state.episode_step,
        "delivered": state.delivered_count,
        "returned": state.returned_count,
        "n_req": state.params.n_requests,
        "n_obs": state.params.n_obstacles,
        "ep_len": state.params.episode_length,
        "period": state.params.obstacle_period,
        "rng": np.random.Generator(np.random.PCG64()),
    }


def signature(d):
    return (
        tuple(((a[0], a[1]), DIRS.index(a[2]), a[3]) for a in d["agents"]),
        tuple((s[0], s[1], s[2]) for s in d["shelves"]),
        tuple(sorted(d["obstacles"])),
        d["gstep"],
        d["estep"],
        d["delivered"],
        d["returned"],
    )


def oracle_step(d, actions):
    """Apply one joint action in place; returns the reward list."""
    n = len(d["agents"])
    rewards = [0.0] * n
    rng = d["rng"]

    # rotations
    for i in range(n):
        if actions[i] == 1:
            d["agents"][i][2] = TURN_LEFT[d["agents"][i][2]]
        if actions[i] == 2:
            d["agents"][i][2] = TURN_RIGHT[d["agents"][i][2]]

    # where is every placed shelf before moving
    shelf_tiles = set()
    for s in d["shelves"]:
        if s[0] is not None:
            shelf_tiles.add(s[0])

    start = [(a[0], a[1]) for a in d["agents"]]
    wants = {}
    for i in range(n):
        if actions[i] != 0:
            continue
        x, y, facing, carry = d["agents"][i]
        nx = x + MOVES[facing][0]
        ny = y + MOVES[facing][1]
        if nx < 0 or ny < 0 or nx >= d["W"] or ny >= d["H"]:
            continue
        if (nx, ny) in d["obstacles"]:
            continue
        if carry is not None and (nx, ny) in shelf_tiles:
            continue
        wants[i] = (nx, ny)

    # head-on swaps: both stay
    swapped = set()
    for i in wants:
        for j in wants:
            if i < j and wants[i] == start[j] and wants[j] == start[i]:
                swapped.add(i)
                swapped.add(j)
    for i in swapped:
        del wants[i]

    # same target: one random winner; groups visited in order of their lowest agent
    visited_targets = []
    for i in sorted(wants):
        if wants[i] not in visited_targets:
            visited_targets.append(wants[i])
    for target in visited_targets:
        group = [i for i in sorted(wants) if wants[i] == target]
        if len(group) >= 2:
            keep = group[int(rng.integers(len(group)))]
            for i in group:
                if i != keep:
                    del wants[i]

    # cannot enter a tile whose occupant stays put (repeat until stable)
    while True:
        staying_tiles = [start[j] for j in range(n) if j not in wants]
        blocked = [i for i in sorted(wants) if wants[i] in staying_tiles]
        if not blocked:
            break
        del wants[blocked[0]]
    for i in wants:
        d["agents"][i][0], d["agents"][i][1] = wants[i]

    def top_up_requests():
        while True:
            count = 0
            for s in d["shelves"]:
                if s[1]:
                    count += 1
            if count >= d["n_req"]:
                return
            free = [k for k in range(len(d["shelves"])) if not d["shelves"][k][1] and not d["shelves"][k][2]]
            if len(free) == 0:
                return
            d["shelves"][free[int(rng.integers(len(free)))]][1] = True

    def pay(i):
        for j in range(n):
            rewards[j] += 0.5 if j == i else 0.125

    # deliveries
    for i in range(n):
        carry = d["agents"][i][3]
        if carry is None:
            continue
        here = (d["agents"][i][0], d["agents"][i][1])
        if d["shelves"][carry][1] and here in d["goals"]:
            d["shelves"][carry][1] = False
            d["shelves"][carry][2] = True
            d["delivered"] += 1
            pay(i)
            top_up_requests()

    # pickup / putdown
    for i in range(n):
        if actions[i] != 3:
            continue
        here = (d["agents"][i][0], d["agents"][i][1])
        on_tile = None
        for k, s in enumerate(d["shelves"]):
            if s[0] == here:
                on_tile = k
        carry = d["agents"][i][3]
        if carry is None:
            if on_tile is not None:
                d["agents"][i][3] = on_tile
                d["shelves"][on_tile][0] = None
        else:
            if here in d["homes"] and on_tile is None:
                d["shelves"][carry][0] = here
                d["agents"][i][3] = None
                if d["shelves"][carry][2] and here == d["shelves"][carry][3]:
                    d["shelves"][carry][2] = False
                    d["returned"] += 1
                    pay(i)
                    top_up_requests()

    d["estep"] += 1
    d["gstep"] += 1
    if d["gstep"] % d["period"] == 0:
        taken = set((a[0], a[1]) for a in d["agents"])
        for s in d["shelves"]:
            if s[0] is not None:
                taken.add(s[0])
        spots = []
        for y in range(d["H"]):
            for x in range(d["W"]):
                t = (x, y)
                if t in d["homes"] or t in d["goals"] or t in taken:
                    continue
                spots.append(t)
        chosen = rng.choice(len(spots), size=d["n_obs"], replace=False)
        d["obstacles"] = set(spots[int(c)] for c in chosen)
    return rewards
