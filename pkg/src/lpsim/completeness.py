"""Receptive-field reachability on patch grids under a partition schedule.

``R[p, q]`` is true when information from grid position ``q`` has reached
position ``p``. One denoising step fuses every partition block: each position
in a block receives the union of the pre-step sets of all positions in that
block, the way full attention inside a sub-latent would.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .latent import Axis
from .partition import core_bounds, extend_overlap, rotation_axis

MAX_POSITIONS = 4096


@dataclass(frozen=True)
class ReachabilitySet:
    grid: tuple[int, int, int]
    sets: np.ndarray  # (P, P) bool, row p = positions whose information reached p

    @classmethod
    def initial(cls, grid) -> "ReachabilitySet":
        grid = tuple(int(n) for n in grid)
        size = int(np.prod(grid))
        if size > MAX_POSITIONS:
            raise ValueError(f"grid {grid} has {size} positions; limit is {MAX_POSITIONS}")
        sets = np.eye(size, dtype=bool)
        sets.setflags(write=False)
        return cls(grid, sets)

    @property
    def size(self) -> int:
        return self.sets.shape[0]

    def coverage(self) -> np.ndarray:
        return self.sets.sum(axis=1)

    def complete_mask(self) -> np.ndarray:
        return self.sets.all(axis=1)

    def reach(self, position) -> np.ndarray:
        """Receptive field of ``position`` as a boolean grid."""
        p = np.ravel_multi_index(tuple(position), self.grid)
        return self.sets[p].reshape(self.grid)


@dataclass(frozen=True)
class PatchPlan:
    """Partition extents in patch units along one grid axis."""

    axis: Axis
    extents: tuple[tuple[int, int], ...]


def patch_plan(grid, axis: Axis, K: int, r: float) -> PatchPlan:
    n = grid[axis - 1]
    cores = core_bounds(n, K)
    length = -(-n // K)
    return PatchPlan(Axis(axis), tuple(extend_overlap(cores, n, length, r, K)))


def propagate_step(R: ReachabilitySet, plan: PatchPlan) -> ReachabilitySet:
    coords = np.indices(R.grid).reshape(3, -1)[plan.axis - 1]
    new = np.zeros_like(R.sets)
    for lo, hi in plan.extents:
        members = (coords >= lo) & (coords < hi)
        new[members] |= R.sets[members].any(axis=0)
    new.setflags(write=False)
    return ReachabilitySet(R.grid, new)


def rotating_schedule(n_steps: int) -> list[Axis]:
    return [rotation_axis(i) for i in range(1, n_steps + 1)]


def constant_schedule(axis: Axis, n_steps: int) -> list[Axis]:
    return [Axis(axis)] * n_steps


@dataclass
class CompletenessResult:
    complete: bool
    complete_at: int | None
    min_steps: np.ndarray  # per position, -1 if never complete within the horizon
    worst_position: tuple[int, int, int]
    schedule: list[Axis]
    coverage: list[np.ndarray]  # per step i (0 = initial), |R(p, i)| for every p

    def verdict(self) -> dict:
        return {
            "complete_at": self.complete_at,
            "worst_position": list(self.worst_position),
            "schedule": [a.label for a in self.schedule],
        }


def verify_n_complete(grid, K: int, r: float, schedule, N: int) -> CompletenessResult:
    if len(schedule) < N:
        raise ValueError(f"schedule has {len(schedule)} steps, need {N}")
    grid = tuple(int(n) for n in grid)
    R = ReachabilitySet.initial(grid)
    min_steps = np.full(R.size, -1, dtype=np.int64)
    min_steps[R.complete_mask()] = 0
    coverage = [R.coverage()]
    plans = {}
    for i in range(1, N + 1):
        axis = Axis(schedule[i - 1])
        if axis not in plans:
            plans[axis] = patch_plan(grid, axis, K, r)
        R = propagate_step(R, plans[axis])
        coverage.append(R.coverage())
        min_steps[(min_steps < 0) & R.complete_mask()] = i
    complete = bool((min_steps >= 0).all())
    if complete:
        worst = int(np.argmax(min_steps))
    else:
        worst = int(np.argmax(min_steps < 0))
    return CompletenessResult(
        complete=complete,
        complete_at=int(min_steps.max()) if complete else None,
        min_steps=min_steps.reshape(grid),
        worst_position=tuple(int(c) for c in np.unravel_index(worst, grid)),
        schedule=[Axis(a) for a in schedule[:N]],
        coverage=coverage,
    )
