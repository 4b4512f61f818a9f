"""Rotating-axis, patch-aligned overlapping partition of a latent."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidOverlapRatio
from .latent import Axis, PatchGeometry, check_latent, count_patches, slice_axis

log = logging.getLogger(__name__)

_ROTATION = (Axis.TEMPORAL, Axis.HEIGHT, Axis.WIDTH)


@dataclass(frozen=True)
class PartitionEntry:
    worker_id: int
    core: tuple[int, int]  # patch units [alpha, beta)
    ext: tuple[int, int]  # patch units [alpha', beta')
    latent: tuple[int, int]  # latent units [s, e)
    delta_start: int
    delta_end: int

    @property
    def length(self) -> int:
        return self.latent[1] - self.latent[0]


@dataclass(frozen=True)
class PartitionPlan:
    axis: Axis
    step_index: int
    entries: tuple[PartitionEntry, ...]
    overlap_ratio: float
    patches_per_core: int
    overlap_patches: int
    num_workers: int
    extent: int  # D along axis, latent units
    patch_size: int

    @property
    def k_effective(self) -> int:
        return len(self.entries)

    def core_latent(self, entry: PartitionEntry) -> tuple[int, int]:
        """Core region in latent units; the final entry owns the remainder rows."""
        start = entry.core[0] * self.patch_size
        end = entry.core[1] * self.patch_size
        if entry is self.entries[-1]:
            end = self.extent
        return start, end

    def to_dict(self) -> dict:
        return {
            "axis": self.axis.label,
            "step": self.step_index,
            "L": self.patches_per_core,
            "O": self.overlap_patches,
            "entries": [
                {
                    "k": e.worker_id,
                    "core": list(e.core),
                    "ext": list(e.ext),
                    "latent": list(e.latent),
                    "delta": [e.delta_start, e.delta_end],
                }
                for e in self.entries
            ],
        }


def rotation_axis(step_index: int) -> Axis:
    if step_index < 1:
        raise ValueError("step index starts at 1")
    return _ROTATION[(step_index - 1) % 3]


def core_bounds(n: int, k: int) -> list[tuple[int, int]]:
    """Contiguous core patch ranges of length ``ceil(n / k)``.

    The last core is clamped to ``n`` and cores starting at or past ``n`` are
    dropped, so fewer than ``k`` ranges may come back.
    """
    if n < 1 or k < 1:
        raise ValueError("n and k must be >= 1")
    length = -(-n // k)
    cores = []
    for idx in range(k):
        alpha = idx * length
        if alpha >= n:
            break
        cores.append((alpha, min(alpha + length, n)))
    return cores


def overlap_patches(length: int, r: float) -> int:
    return math.floor(length * r)


def extend_overlap(cores, n: int, length: int, r: float, k: int | None = None) -> list[tuple[int, int]]:
    if k is None:
        k = len(cores)
    if not (0 <= r <= k - 1):
        raise InvalidOverlapRatio(f"overlap ratio {r} outside [0, {k - 1}]")
    o = overlap_patches(length, r)
    return [(max(0, a - o), min(n, b + o)) for a, b in cores]


def plan_axis(
    extent: int, patch: int, k: int, r: float, axis: Axis = Axis.TEMPORAL, step_index: int = 1
) -> PartitionPlan:
    """Plan for a single axis of length ``extent`` latent units."""
    n = count_patches(extent, patch)
    cores = core_bounds(n, k)
    length = -(-n // k)
    exts = extend_overlap(cores, n, length, r, k)
    if len(cores) < k:
        log.warning(
            "%s axis has %d patches for %d workers; %d workers idle at step %d",
            axis.label, n, k, k - len(cores), step_index,
        )
    entries = []
    for idx, ((a, b), (ea, eb)) in enumerate(zip(cores, exts)):
        s, e = ea * patch, eb * patch
        if idx == len(cores) - 1:
            e = extent
        entries.append(
            PartitionEntry(
                worker_id=idx + 1,
                core=(a, b),
                ext=(ea, eb),
                latent=(s, e),
                delta_start=(a - ea) * patch,
                delta_end=(eb - b) * patch,
            )
        )
    return PartitionPlan(
        axis=axis,
        step_index=step_index,
        entries=tuple(entries),
        overlap_ratio=r,
        patches_per_core=length,
        overlap_patches=overlap_patches(length, r),
        num_workers=k,
        extent=extent,
        patch_size=patch,
    )


def build_plan(shape, g: PatchGeometry, step_index: int, k: int, r: float) -> PartitionPlan:
    """Partition plan for denoising step ``step_index`` (1-based).

    ``shape`` may be a latent array or its shape tuple.
    """
    if hasattr(shape, "shape"):
        shape = shape.shape
    axis = rotation_axis(step_index)
    return plan_axis(shape[axis], g.size(axis), k, r, axis=axis, step_index=step_index)


def extract_sublatents(z: np.ndarray, plan: PartitionPlan) -> list[np.ndarray]:
    check_latent(z)
    return [slice_axis(z, plan.axis, *entry.latent) for entry in plan.entries]


def sublatent_elements(shape, plan: PartitionPlan) -> list[int]:
    """Element count of each entry's sub-latent, in entry order."""
    other = int(np.prod(shape)) // shape[plan.axis]
    return [other * entry.length for entry in plan.entries]


def expansion_factor(shape, plan: PartitionPlan) -> float:
    """S_ext / S_z for one plan."""
    return sum(sublatent_elements(shape, plan)) / int(np.prod(shape))
