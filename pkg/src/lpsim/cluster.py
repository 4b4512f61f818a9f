"""Simulated K-worker cluster running the latent-parallel denoising loop.

The master (worker 1) plans each step, keeps partition 1 for itself, sends
the other sub-latents to workers 2..K once per guidance pass, and gathers one
prediction per pass back. Every payload is metered in a :class:`CommLedger`.
Workers see only message payloads, never the master's arrays.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .denoise import ConditioningVector, Denoiser, SamplerConfig, guide, sampler_step
from .errors import ConfigError, ShapeMismatch, WorkerFailure
from .latent import ModelPreset, PatchGeometry, check_latent, get_preset
from .ledger import PASSES, CommLedger
from .partition import build_plan, extract_sublatents
from .reconstruct import reconstruct

MASTER = 1
THREADS_ENV = "LPSIM_THREADS"


@dataclass(frozen=True)
class ClusterConfig:
    K: int
    r: float = 0.5
    preset: ModelPreset = field(default_factory=lambda: get_preset("tiny"))
    master_id: int = MASTER
    threads: int | None = None  # None: LPSIM_THREADS or cpu count; 0: serial

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.master_id != MASTER:
            raise ConfigError("the master is always worker 1")


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env is None or env == "":
            return os.cpu_count() or 1
        try:
            threads = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if threads < 0:
        raise ConfigError("thread count must be >= 0")
    return threads


@dataclass(frozen=True)
class SubLatentMessage:
    step: int
    t: int
    pass_: str
    worker_id: int
    payload: np.ndarray


@dataclass(frozen=True)
class PredictionMessage:
    step: int
    pass_: str
    worker_id: int
    payload: np.ndarray


class Worker:
    """One simulated GPU. Holds the shared read-only denoiser and the prompt embedding."""

    def __init__(self, worker_id: int, denoiser: Denoiser, cond: ConditioningVector):
        self.worker_id = worker_id
        self.denoiser = denoiser
        self.cond = cond
        self.null = ConditioningVector.null(len(cond.values))

    def handle(self, msg: SubLatentMessage) -> PredictionMessage:
        c = self.cond if msg.pass_ == "cond" else self.null
        try:
            pred = self.denoiser.predict(msg.payload, msg.t, c)
        except Exception as exc:
            raise WorkerFailure(self.worker_id, msg.step, exc) from exc
        if pred.shape != msg.payload.shape:
            raise WorkerFailure(
                self.worker_id, msg.step, ShapeMismatch(f"prediction shape {pred.shape}")
            )
        return PredictionMessage(msg.step, msg.pass_, self.worker_id, np.array(pred, copy=True))


@dataclass
class LPResult:
    z0: np.ndarray
    ledger: CommLedger
    trace: list
    plans: list


def run_lp(
    f: Denoiser,
    z_T: np.ndarray,
    cfg: SamplerConfig,
    c: ConditioningVector,
    cluster: ClusterConfig,
    geometry: PatchGeometry,
) -> LPResult:
    check_latent(z_T)
    if c.is_null:
        raise ValueError("guidance needs a non-null prompt conditioning")
    workers = {k: Worker(k, f, c) for k in range(1, cluster.K + 1)}
    threads = resolve_threads(cluster.threads)
    ledger = CommLedger()
    z = z_T
    trace, plans = [], []
    pool = ThreadPoolExecutor(max_workers=min(threads, cluster.K - 1)) if threads and cluster.K > 1 else None
    try:
        for i in range(1, cfg.total_steps + 1):
            t = cfg.total_steps + 1 - i
            plan = build_plan(z.shape, geometry, i, cluster.K, cluster.r)
            plans.append(plan)
            subs = extract_sublatents(z, plan)

            outbox = []
            for pass_ in PASSES:
                for entry, sub in zip(plan.entries[1:], subs[1:]):
                    payload = sub.copy()
                    ledger.record(i, pass_, "scatter", MASTER, entry.worker_id,
                                  payload.size, payload.itemsize, payload.nbytes)
                    outbox.append(SubLatentMessage(i, t, pass_, entry.worker_id, payload))
            # Peers start before the master computes its own partition.
            if pool is not None:
                futures = [pool.submit(workers[m.worker_id].handle, m) for m in outbox]
            local = {
                pass_: workers[MASTER].handle(SubLatentMessage(i, t, pass_, MASTER, subs[0])).payload
                for pass_ in PASSES
            }
            if pool is not None:
                inbox = [fut.result() for fut in futures]
            else:
                inbox = [workers[m.worker_id].handle(m) for m in outbox]

            # Order by worker id, never by arrival.
            inbox.sort(key=lambda m: (m.worker_id, PASSES.index(m.pass_)))
            if len(inbox) != len(outbox):
                raise AssertionError("every scattered sub-latent needs exactly one prediction")
            preds = {(MASTER, p): local[p] for p in PASSES}
            for sent, msg in zip(sorted(outbox, key=lambda m: (m.worker_id, PASSES.index(m.pass_))), inbox):
                if (sent.worker_id, sent.pass_) != (msg.worker_id, msg.pass_) or msg.payload.shape != sent.payload.shape:
                    raise AssertionError("gathered prediction does not match its sub-latent")
                ledger.record(i, msg.pass_, "gather", msg.worker_id, MASTER,
                              msg.payload.size, msg.payload.itemsize, msg.payload.nbytes)
                preds[(msg.worker_id, msg.pass_)] = msg.payload

            guided = [
                guide(preds[(e.worker_id, "cond")], preds[(e.worker_id, "uncond")], cfg.guidance_scale)
                for e in plan.entries
            ]
            eps = reconstruct(guided, plan, z.shape)
            z = sampler_step(z, eps, t, cfg)
            trace.append(z)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    ledger.finalize()
    return LPResult(z0=z, ledger=ledger, trace=trace, plans=plans)


def activation_elements(shape, geometry: PatchGeometry, preset: ModelPreset) -> int:
    """Elements of one hidden-state tensor: one token per patch times hidden width."""
    return geometry.num_patches(shape) * preset.hidden_dim


def _check_layers(layers: int, k: int) -> None:
    if layers < k:
        raise ConfigError(f"{layers} layers cannot be spread over {k} workers")


def run_nmp_emulation(layers: int, shape, cfg: SamplerConfig, cluster: ClusterConfig,
                      geometry: PatchGeometry) -> CommLedger:
    """Counter-only emulation of layer-sharded sequential execution.

    Each pass hands the activation across the K-1 stage boundaries in order.
    """
    shape = shape.shape if hasattr(shape, "shape") else tuple(shape)
    _check_layers(layers, cluster.K)
    elements = activation_elements(shape, geometry, cluster.preset)
    dtype = cluster.preset.dtype_bytes
    ledger = CommLedger()
    for i in range(1, cfg.total_steps + 1):
        for pass_ in PASSES:
            for b in range(1, cluster.K):
                ledger.record(i, pass_, "activation", b, b + 1, elements, dtype)
    return ledger


def run_pp_emulation(layers: int, shape, cfg: SamplerConfig, cluster: ClusterConfig,
                     geometry: PatchGeometry) -> CommLedger:
    """Like :func:`run_nmp_emulation` but the two guidance passes form a two-microbatch pipeline.

    Records follow pipeline clock order: at tick s, boundary b carries
    microbatch s - b + 1 when that is 0 or 1.
    """
    shape = shape.shape if hasattr(shape, "shape") else tuple(shape)
    _check_layers(layers, cluster.K)
    elements = activation_elements(shape, geometry, cluster.preset)
    dtype = cluster.preset.dtype_bytes
    ledger = CommLedger()
    for i in range(1, cfg.total_steps + 1):
        for tick in range(cluster.K):
            for b in range(1, cluster.K):
                mb = tick - b + 1
                if 0 <= mb < len(PASSES):
                    ledger.record(i, PASSES[mb], "activation", b, b + 1, elements, dtype)
    return ledger
