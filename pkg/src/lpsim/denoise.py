"""Denoisers, classifier-free guidance, and the sampling loop."""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch
from .latent import check_latent

COND_DIM = 8


@dataclass(frozen=True)
class ConditioningVector:
    values: tuple[float, ...]
    is_null: bool = False

    def __post_init__(self):
        if self.is_null and any(v != 0 for v in self.values):
            raise ValueError("null conditioning must be all zeros")

    @classmethod
    def null(cls, dim: int = COND_DIM) -> "ConditioningVector":
        return cls(values=(0.0,) * dim, is_null=True)

    @classmethod
    def from_seed(cls, seed: int, dim: int = COND_DIM) -> "ConditioningVector":
        # Separate stream from the latent so the two never alias.
        rng = np.random.Generator(np.random.PCG64([seed, 1]))
        return cls(values=tuple(float(v) for v in rng.standard_normal(dim)))

    def mean(self) -> float:
        return float(np.mean(self.values)) if self.values else 0.0


@dataclass(frozen=True)
class SamplerConfig:
    total_steps: int
    step_size: float = 0.1
    guidance_scale: float = 5.0

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")


class Denoiser(abc.ABC):
    """Shape-preserving, deterministic noise predictor.

    ``receptive_radius`` is a per-axis ``(T, H, W)`` radius in latent units, or
    ``None`` when every output depends on the whole input.
    """

    receptive_radius: tuple[int, int, int] | None = None

    @abc.abstractmethod
    def predict(self, z: np.ndarray, t: int, cond: ConditioningVector) -> np.ndarray: ...


@dataclass(frozen=True)
class _AffineBias:
    time_coef: float = 1e-3
    cond_coef: float = 0.5

    def __call__(self, t: int, cond: ConditioningVector) -> float:
        return self.time_coef * t + self.cond_coef * cond.mean()


def _window_sum(a: np.ndarray, axis: int, radius: int) -> np.ndarray:
    # Shifted-slice sum so each output only ever reads its own window.
    if radius == 0:
        return a.copy()
    n = a.shape[axis]
    out = np.zeros_like(a)
    for off in range(-radius, radius + 1):
        lo, hi = max(0, -off), min(n, n - off)
        if lo >= hi:
            continue
        dst = [slice(None)] * a.ndim
        src = [slice(None)] * a.ndim
        dst[axis] = slice(lo, hi)
        src[axis] = slice(lo + off, hi + off)
        out[tuple(dst)] += a[tuple(src)]
    return out


def _window_count(n: int, radius: int) -> np.ndarray:
    idx = np.arange(n)
    return (np.minimum(idx + radius, n - 1) - np.maximum(idx - radius, 0) + 1).astype(np.float64)


@dataclass(frozen=True)
class BoxDenoiser(Denoiser):
    """Mean over the axis-aligned box of radius ``radius``, clipped at the edges."""

    radius: tuple[int, int, int] = (1, 1, 1)
    bias: _AffineBias = field(default_factory=_AffineBias)

    def __post_init__(self):
        if len(self.radius) != 3 or any(r < 0 for r in self.radius):
            raise ValueError("radius must be three non-negative ints")

    @property
    def receptive_radius(self):
        return tuple(self.radius)

    def predict(self, z, t, cond):
        check_latent(z)
        acc = z.astype(np.float64)
        count = np.ones(1)
        for axis, r in zip((1, 2, 3), self.radius):
            acc = _window_sum(acc, axis, r)
            shape = [1, 1, 1, 1]
            shape[axis] = z.shape[axis]
            count = count * _window_count(z.shape[axis], r).reshape(shape)
        return (acc / count + self.bias(t, cond)).astype(z.dtype)


@dataclass(frozen=True)
class GlobalDenoiser(Denoiser):
    """Half the input plus half its per-channel mean: every output sees every input."""

    bias: _AffineBias = field(default_factory=_AffineBias)
    receptive_radius = None

    def predict(self, z, t, cond):
        check_latent(z)
        z64 = z.astype(np.float64)
        mean = z64.mean(axis=(1, 2, 3), keepdims=True)
        return (0.5 * z64 + 0.5 * mean + self.bias(t, cond)).astype(z.dtype)


@dataclass(frozen=True)
class IdentityDenoiser(Denoiser):
    """Returns the input plus the conditioning bias."""

    bias: _AffineBias = field(default_factory=_AffineBias)
    receptive_radius = (0, 0, 0)

    def predict(self, z, t, cond):
        check_latent(z)
        return (z.astype(np.float64) + self.bias(t, cond)).astype(z.dtype)


def toy_denoiser_box(radius) -> BoxDenoiser:
    return BoxDenoiser(radius=tuple(int(r) for r in radius))


def toy_denoiser_global() -> GlobalDenoiser:
    return GlobalDenoiser()


def guide(cond_pred: np.ndarray, uncond_pred: np.ndarray, w: float) -> np.ndarray:
    return uncond_pred + w * (cond_pred - uncond_pred)


def cfg_predict(f: Denoiser, z, t: int, c: ConditioningVector, w: float) -> np.ndarray:
    if c.is_null:
        raise ValueError("guidance needs a non-null prompt conditioning")
    cond_pred = f.predict(z, t, c)
    uncond_pred = f.predict(z, t, ConditioningVector.null(len(c.values)))
    return guide(cond_pred, uncond_pred, w)


def sampler_step(z_t: np.ndarray, eps_hat: np.ndarray, t: int, cfg: SamplerConfig) -> np.ndarray:
    """Explicit Euler update ``z - step_size * eps_hat``."""
    if z_t.shape != eps_hat.shape:
        raise ShapeMismatch(f"latent {z_t.shape} vs prediction {eps_hat.shape}")
    return (z_t - cfg.step_size * eps_hat).astype(z_t.dtype)


def run_centralized(f: Denoiser, z_T: np.ndarray, cfg: SamplerConfig, c: ConditioningVector):
    """Single-device reference loop. Returns ``(z_0, trace)``; trace[i] is the latent after step i+1."""
    check_latent(z_T)
    z = z_T
    trace = []
    for t in range(cfg.total_steps, 0, -1):
        eps = cfg_predict(f, z, t, c, cfg.guidance_scale)
        z = sampler_step(z, eps, t, cfg)
        trace.append(z)
    return z, trace
