"""Graph-search comparator: A* over the discrete strain grid.

Walks 8-connected grid nodes minimizing accumulated (step length +
strain_weight * node strain); the result is a kinematic waypoint sequence,
time-parameterized at constant speed without corner smoothing.  The
non-differentiable corners are intentional: they are the phenomenon the
trajectory-optimization comparison measures.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import StrainPlanError
from .maps import StrainGrid
from .planner import DenseTrajectory


class NoPathError(StrainPlanError):
    """Every route to the goal is blocked by the strain ceiling."""


NEIGHBORS = [
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
]


@dataclass(frozen=True)
class GridPath:
    waypoints: tuple[tuple[float, float], ...]  # (pe, se) at grid nodes
    indices: tuple[tuple[int, int], ...]  # (row, col) into the grid
    cumulative_strain: float  # percent * steps
    cost: float

    def __post_init__(self):
        for (r0, c0), (r1, c1) in zip(self.indices, self.indices[1:]):
            if max(abs(r1 - r0), abs(c1 - c0)) != 1:
                raise ValueError("waypoints must be 8-connected neighbors")


def _snap(grid: StrainGrid, pe: float, se: float) -> tuple[int, int]:
    col = int(np.argmin(np.abs(grid.pe_axis - pe)))
    row = int(np.argmin(np.abs(grid.se_axis - se)))
    return row, col


def astar_plan(
    grid: StrainGrid,
    start: tuple[float, float],
    goal: tuple[float, float],
    strain_weight: float = 1.0,
    max_strain: float | None = None,
) -> GridPath:
    """Minimum cumulative (distance + weighted strain) path on the grid.

    The heuristic is the Euclidean index distance, admissible because
    strain is non-negative; ties break lexicographically on (row, col) so
    results are deterministic.
    """
    values = grid.values
    if not np.all(np.isfinite(values)):
        raise ValueError("grid has non-finite strain values")
    n_rows, n_cols = values.shape
    start_node = _snap(grid, *start)
    goal_node = _snap(grid, *goal)

    def blocked(node):
        return max_strain is not None and values[node] > max_strain

    if blocked(start_node) or blocked(goal_node):
        raise NoPathError("start or goal lies above the strain ceiling")

    def heuristic(node):
        return math.hypot(node[0] - goal_node[0], node[1] - goal_node[1])

    best_cost = {start_node: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    heap = [(heuristic(start_node), start_node[0], start_node[1])]
    closed = set()
    while heap:
        _, row, col = heapq.heappop(heap)
        node = (row, col)
        if node in closed:
            continue
        closed.add(node)
        if node == goal_node:
            break
        for dr, dc in NEIGHBORS:
            nxt = (row + dr, col + dc)
            if not (0 <= nxt[0] < n_rows and 0 <= nxt[1] < n_cols):
                continue
            if nxt in closed or blocked(nxt):
                continue
            step = math.hypot(dr, dc)
            cand = best_cost[node] + step + strain_weight * float(values[nxt])
            if cand < best_cost.get(nxt, math.inf):
                best_cost[nxt] = cand
                parent[nxt] = node
                heapq.heappush(heap, (cand + heuristic(nxt), nxt[0], nxt[1]))
    else:
        raise NoPathError("no route to the goal under the strain ceiling")
    if goal_node not in closed:
        raise NoPathError("no route to the goal under the strain ceiling")

    chain = [goal_node]
    while chain[-1] != start_node:
        chain.append(parent[chain[-1]])
    chain.reverse()
    strain_sum = sum(float(values[node]) for node in chain[1:])
    waypoints = tuple(
        (float(grid.pe_axis[c]), float(grid.se_axis[r])) for r, c in chain
    )
    return GridPath(
        waypoints=waypoints,
        indices=tuple(chain),
        cumulative_strain=strain_sum,
        cost=best_cost[goal_node],
    )


def upsample_grid_path(
    path: GridPath,
    rate: float,
    duration: float,
    ar: float = 0.0,
    t0: float = 0.0,
) -> DenseTrajectory:
    """Constant-speed traversal of the waypoint polyline.

    Corners are preserved: the velocity direction is discontinuous there by
    construction.  Controls are zero (the comparator plans kinematics only).
    """
    if not path.waypoints:
        raise ValueError("empty path")
    points = np.asarray(path.waypoints, dtype=float)
    n = int(round(duration * rate))
    times = np.linspace(0.0, duration, n + 1)
    if len(points) == 1:
        states = np.zeros((len(times), 6))
        states[:, 0] = points[0, 0]
        states[:, 1] = points[0, 1]
        states[:, 2] = ar
        return DenseTrajectory(times, states, np.zeros((len(times), 3)), t0=t0)

    seg = np.diff(points, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = float(arc[-1])
    speed = total / duration
    states = np.zeros((len(times), 6))
    states[:, 2] = ar
    for i, t in enumerate(times):
        s = min(speed * t, total)
        k = int(np.searchsorted(arc, s, side="right") - 1)
        k = min(k, len(seg) - 1)
        frac = (s - arc[k]) / seg_len[k] if seg_len[k] > 0 else 0.0
        states[i, 0:2] = points[k] + frac * seg[k]
        if speed * t < total:
            direction = seg[k] / seg_len[k] if seg_len[k] > 0 else np.zeros(2)
            states[i, 3:5] = speed * direction
    return DenseTrajectory(times, states, np.zeros((len(times), 3)), t0=t0)
