"""Position-aware blending of overlapping local noise predictions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutsideExtent, ShapeMismatch, ZeroWeight
from .partition import PartitionEntry, PartitionPlan


@dataclass(frozen=True)
class WeightMask:
    axis_profile: np.ndarray
    ell: int
    delta_start: int
    delta_end: int


def build_weight_mask(entry: PartitionEntry) -> WeightMask:
    """Linear ramp 0 -> 1 over the front overlap, 1 on the core, 1 -> 0 over the rear.

    A zero-length overlap contributes an empty ramp.
    """
    ell = entry.length
    ds, de = entry.delta_start, entry.delta_end
    if ell < 1:
        raise ValueError("partition extent must be non-empty")
    j = np.arange(ell, dtype=np.float64)
    w = np.ones(ell, dtype=np.float64)
    if ds > 0:
        w[:ds] = j[:ds] / ds
    if de > 0:
        w[ell - de :] = (ell - j[ell - de :]) / de
    w.setflags(write=False)
    return WeightMask(axis_profile=w, ell=ell, delta_start=ds, delta_end=de)


def local_coord(x: int, entry: PartitionEntry) -> int:
    s, e = entry.latent
    if not (s <= x < e):
        raise OutsideExtent(f"global index {x} not in [{s}, {e})")
    return x - s


def weight_sums(plan: PartitionPlan) -> np.ndarray:
    """Total blend weight at every global position along the plan's axis."""
    z = np.zeros(plan.extent, dtype=np.float64)
    for entry in sorted(plan.entries, key=lambda e: e.worker_id):
        s, e = entry.latent
        z[s:e] += build_weight_mask(entry).axis_profile
    return z


def reconstruct(predictions, plan: PartitionPlan, full_shape) -> np.ndarray:
    """Blend per-partition predictions into one full-size prediction.

    ``predictions[k]`` belongs to ``plan.entries[k]``. Accumulation is done in
    float64 in worker-id order; the result is cast back to the predictions'
    dtype.
    """
    full_shape = tuple(full_shape)
    entries = plan.entries
    if len(predictions) != len(entries):
        raise ShapeMismatch(f"{len(predictions)} predictions for {len(entries)} partitions")
    if len(full_shape) != 4 or full_shape[plan.axis] != plan.extent:
        raise ShapeMismatch(f"plan extent {plan.extent} does not match shape {full_shape}")
    dtypes = {p.dtype for p in predictions}
    if len(dtypes) != 1:
        raise ShapeMismatch(f"mixed prediction dtypes {sorted(map(str, dtypes))}")

    axis = int(plan.axis)
    bshape = [1, 1, 1, 1]
    acc = np.zeros(full_shape, dtype=np.float64)
    norm = np.zeros(plan.extent, dtype=np.float64)
    for k in sorted(range(len(entries)), key=lambda i: entries[i].worker_id):
        entry, pred = entries[k], predictions[k]
        s, e = entry.latent
        expected = full_shape[:axis] + (e - s,) + full_shape[axis + 1 :]
        if pred.shape != expected:
            raise ShapeMismatch(f"prediction {k} has shape {pred.shape}, expected {expected}")
        w = build_weight_mask(entry).axis_profile
        bshape[axis] = e - s
        index = [slice(None)] * 4
        index[axis] = slice(s, e)
        acc[tuple(index)] += w.reshape(bshape) * pred.astype(np.float64)
        norm[s:e] += w
    if (norm == 0).any():
        raise ZeroWeight(f"no partition covers positions {np.flatnonzero(norm == 0).tolist()}")
    if (norm < 1).any():
        raise ZeroWeight(f"weight sum below 1 at positions {np.flatnonzero(norm < 1).tolist()}")
    bshape[axis] = plan.extent
    out = acc / norm.reshape(bshape)
    return out.astype(next(iter(dtypes)))
