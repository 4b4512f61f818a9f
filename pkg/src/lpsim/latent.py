"""Latent tensors, patch geometry and model presets.

A latent is a plain ``numpy.ndarray`` of shape ``(C, D_T, D_H, D_W)``, row-major
with the channel axis outermost. The channel axis is never partitioned.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAxis, EmptyRange, OutOfBounds, ShapeMismatch

DTYPES = {2: np.float16, 4: np.float32, 8: np.float64}
DEFAULT_DTYPE_BYTES = 4


class Axis(enum.IntEnum):
    """Partitionable spatio-temporal axes; the value is the array dimension."""

    TEMPORAL = 1
    HEIGHT = 2
    WIDTH = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value: "str | int | Axis") -> "Axis":
        if isinstance(value, Axis):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(value)


@dataclass(frozen=True)
class PatchGeometry:
    p_T: int = 1
    p_H: int = 1
    p_W: int = 1

    def __post_init__(self):
        for name in ("p_T", "p_H", "p_W"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def size(self, axis: Axis) -> int:
        return (self.p_T, self.p_H, self.p_W)[axis - 1]

    def grid(self, shape) -> tuple[int, int, int]:
        """Patch counts ``(N_T, N_H, N_W)`` for a latent of the given shape."""
        return tuple(count_patches(shape[a], self.size(a)) for a in Axis)

    def num_patches(self, shape) -> int:
        n_t, n_h, n_w = self.grid(shape)
        return n_t * n_h * n_w


@dataclass(frozen=True)
class ModelPreset:
    name: str
    hidden_dim: int
    dtype_bytes: int
    description: str = ""

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.dtype_bytes not in DTYPES:
            raise ValueError("dtype_bytes must be one of 2, 4, 8")


PRESETS = {
    "wan21-like": ModelPreset(
        name="wan21-like",
        hidden_dim=1536,
        dtype_bytes=2,
        description="1.3B-class video DiT: 30 blocks, hidden 1536, bf16 activations, "
        "patch (1,2,2) over a 16-channel latent with 4x temporal / 8x spatial VAE compression",
    ),
    "tiny": ModelPreset(
        name="tiny",
        hidden_dim=64,
        dtype_bytes=4,
        description="desk-scale toy model for fast simulations",
    ),
}

# 16 latent channels; 480x832 pixels -> 60x104 latent; (frames - 1) / 4 + 1 latent frames.
WAN21_PATCH = PatchGeometry(1, 2, 2)
WAN21_LATENT_49F = (16, 13, 60, 104)
WAN21_LATENT_81F = (16, 21, 60, 104)
WAN21_LAYERS = 30


def get_preset(name: str) -> ModelPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def dtype_for(dtype_bytes: int) -> np.dtype:
    try:
        return np.dtype(DTYPES[dtype_bytes])
    except KeyError:
        raise ValueError(f"unsupported dtype_bytes {dtype_bytes}") from None


def check_latent(z: np.ndarray) -> None:
    if z.ndim != 4:
        raise ShapeMismatch(f"latent must be 4-D (C, T, H, W), got shape {z.shape}")
    if z.dtype.itemsize not in DTYPES or z.dtype.kind != "f":
        raise ShapeMismatch(f"unsupported latent dtype {z.dtype}")


def random_latent(shape, seed: int, dtype_bytes: int = DEFAULT_DTYPE_BYTES) -> np.ndarray:
    """Standard-normal latent drawn with PCG64(seed) in float64, then cast."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.standard_normal(tuple(shape)).astype(dtype_for(dtype_bytes))


def slice_axis(z: np.ndarray, axis: Axis, start: int, end: int) -> np.ndarray:
    """Copy of ``z`` restricted to ``[start, end)`` along ``axis``."""
    check_latent(z)
    extent = z.shape[axis]
    if start == end and 0 <= start <= extent:
        raise EmptyRange(f"empty range [{start}, {end}) on {Axis(axis).label}")
    if not (0 <= start < end <= extent):
        raise OutOfBounds(f"range [{start}, {end}) outside [0, {extent}) on {Axis(axis).label}")
    index = [slice(None)] * 4
    index[axis] = slice(start, end)
    return z[tuple(index)].copy()


def count_patches(extent: int, patch: int) -> int:
    if extent < patch:
        raise DegenerateAxis(f"axis extent {extent} is smaller than patch size {patch}")
    return extent // patch


def patch_count(z_or_shape, g: PatchGeometry, axis: Axis) -> int:
    shape = z_or_shape.shape if hasattr(z_or_shape, "shape") else tuple(z_or_shape)
    return count_patches(shape[axis], g.size(axis))
