"""Closed-form communication volumes for sequential, pipelined, latent and hybrid parallelism.

All sizes are bytes. LP figures are computed from real partition plans for
every step, so they agree exactly with a simulated run's ledger; the balanced
approximation ``4T (K-1)/K * gamma * S_z`` is reported next to them.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidGrouping
from .latent import Axis, ModelPreset, PatchGeometry
from .partition import plan_axis, rotation_axis, sublatent_elements

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HybridSpec:
    M: int
    group_sizes: tuple[int, ...]


@dataclass(frozen=True)
class CostInputs:
    T: int
    K: int
    r: float
    shape: tuple[int, int, int, int]
    geometry: PatchGeometry
    preset: ModelPreset
    latent_dtype_bytes: int | None = None  # defaults to the preset's dtype
    hybrid: HybridSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        if self.latent_dtype_bytes is None:
            object.__setattr__(self, "latent_dtype_bytes", self.preset.dtype_bytes)
        if self.T < 1 or self.K < 1:
            raise ValueError("T and K must be >= 1")
        if self.hybrid is not None:
            validate_grouping(self.K, self.hybrid)


@dataclass
class HybridReport:
    M: int
    group_sizes: list[int]
    C_inter: int
    C_intra: list[int]
    C_intra_total: int
    C_hyb: int
    C_hyb_approx: int
    ratio_vs_NMP: float
    bound: float | None
    within_bound: bool


@dataclass
class CostReport:
    S_z: int
    S_H: int
    S_ext: float
    gamma: float
    gamma_per_axis: dict[str, float]
    C_NMP: int
    C_PP: int
    C_LP: int
    C_LP_approx: float
    ratio_R: float | None
    ratio_R_approx: float | None
    S_z_over_S_H: float
    hybrid: HybridReport | None = None
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self) -> dict:
        row = {k: v for k, v in self.to_dict().items() if k not in ("hybrid", "inputs", "gamma_per_axis")}
        row.update({f"gamma_{k}": v for k, v in self.gamma_per_axis.items()})
        if self.hybrid is not None:
            for key in ("M", "C_inter", "C_intra_total", "C_hyb", "ratio_vs_NMP", "bound", "within_bound"):
                row[f"hybrid_{key}"] = getattr(self.hybrid, key)
        return row


def validate_grouping(K: int, hybrid: HybridSpec) -> None:
    sizes = tuple(hybrid.group_sizes)
    if hybrid.M < 1 or hybrid.M > K:
        raise InvalidGrouping(f"group count {hybrid.M} must be in [1, {K}]")
    if len(sizes) != hybrid.M:
        raise InvalidGrouping(f"{len(sizes)} group sizes given for {hybrid.M} groups")
    if any(s < 1 for s in sizes):
        raise InvalidGrouping("every group needs at least one GPU")
    if sum(sizes) != K:
        raise InvalidGrouping(f"group sizes sum to {sum(sizes)}, not K={K}")


def latent_elements(shape) -> int:
    return int(np.prod(shape))


def s_z(inputs: CostInputs) -> int:
    return latent_elements(inputs.shape) * inputs.latent_dtype_bytes


def s_h(inputs: CostInputs) -> int:
    """Bytes of one hidden-state tensor over the full latent's patch tokens."""
    return inputs.geometry.num_patches(inputs.shape) * inputs.preset.hidden_dim * inputs.preset.dtype_bytes


def _axis_plan(inputs: CostInputs, axis: Axis, k: int, r: float):
    return plan_axis(inputs.shape[axis], inputs.geometry.size(axis), k, r, axis=axis)


def axis_step_counts(T: int) -> Counter:
    """How many of the T steps partition along each axis."""
    return Counter(rotation_axis(i) for i in range(1, T + 1))


def lp_step_bytes(inputs: CostInputs, axis: Axis) -> int:
    """Scatter + gather bytes of one step, both guidance passes."""
    plan = _axis_plan(inputs, axis, inputs.K, inputs.r)
    return 4 * sum(sublatent_elements(inputs.shape, plan)[1:]) * inputs.latent_dtype_bytes


def gamma_axis(inputs: CostInputs, axis: Axis, k: int | None = None, r: float | None = None) -> float:
    plan = _axis_plan(inputs, axis, inputs.K if k is None else k, inputs.r if r is None else r)
    return sum(sublatent_elements(inputs.shape, plan)) / latent_elements(inputs.shape)


def cost_nmp(inputs: CostInputs) -> int:
    return 2 * inputs.T * (inputs.K - 1) * s_h(inputs)


def cost_pp(inputs: CostInputs) -> int:
    # The two guidance passes are pipelined, but every activation still crosses every boundary.
    return 2 * inputs.T * (inputs.K - 1) * s_h(inputs)


def mean_gamma(inputs: CostInputs) -> float:
    counts = axis_step_counts(inputs.T)
    return sum(n * gamma_axis(inputs, a) for a, n in counts.items()) / inputs.T


def cost_lp(inputs: CostInputs) -> tuple[int, float]:
    """``(exact, approx)`` total LP bytes over all T steps."""
    counts = axis_step_counts(inputs.T)
    exact = sum(n * lp_step_bytes(inputs, a) for a, n in counts.items())
    k = inputs.K
    approx = 4 * inputs.T * (k - 1) / k * mean_gamma(inputs) * s_z(inputs)
    return exact, approx


def ratio_lp_vs_nmp(inputs: CostInputs) -> dict:
    if inputs.K < 2:
        raise ValueError("the LP/NMP ratio needs K >= 2")
    exact, _ = cost_lp(inputs)
    sz_sh = s_z(inputs) / s_h(inputs)
    return {
        "exact": exact / cost_nmp(inputs),
        "approx": approx_ratio(mean_gamma(inputs), inputs.K, sz_sh),
        "S_z_over_S_H": sz_sh,
    }


def approx_ratio(gamma: float, K: int, sz_over_sh: float) -> float:
    return 2 * gamma / K * sz_over_sh


def cost_hybrid(inputs: CostInputs) -> HybridReport:
    """Inter-group LP over M groups with sequential layer sharding inside each group."""
    if inputs.hybrid is None:
        raise InvalidGrouping("no hybrid grouping given")
    hyb = inputs.hybrid
    validate_grouping(inputs.K, hyb)
    M, sizes = hyb.M, list(hyb.group_sizes)
    # Any r >= M-1 already gives every group the full axis, so clamping is lossless.
    r = min(inputs.r, M - 1)
    per_token = inputs.preset.hidden_dim * inputs.preset.dtype_bytes
    grid = inputs.geometry.grid(inputs.shape)

    inter = 0
    intra = [0] * M
    for axis, n_steps in axis_step_counts(inputs.T).items():
        plan = _axis_plan(inputs, axis, M, r)
        elems = sublatent_elements(inputs.shape, plan)
        inter += n_steps * 4 * sum(elems[1:]) * inputs.latent_dtype_bytes
        other = int(np.prod(grid)) // grid[axis - 1]
        for m, entry in enumerate(plan.entries):
            tokens = (entry.ext[1] - entry.ext[0]) * other
            intra[m] += n_steps * 2 * (sizes[m] - 1) * tokens * per_token
    intra_total = sum(intra)
    total = inter + intra_total
    nmp = cost_nmp(inputs)
    ratio = total / nmp if nmp else 0.0
    bound = (inputs.K - M) / (inputs.K - 1) if inputs.K > 1 else None
    within = bound is None or ratio < bound
    if M > 1 and M < inputs.K and not within:
        log.warning("hybrid ratio %.4f is not below the (K-M)/(K-1) bound %.4f", ratio, bound)
    return HybridReport(
        M=M,
        group_sizes=sizes,
        C_inter=inter,
        C_intra=intra,
        C_intra_total=intra_total,
        C_hyb=total,
        C_hyb_approx=intra_total,
        ratio_vs_NMP=ratio,
        bound=bound,
        within_bound=within,
    )


def cost_report(inputs: CostInputs) -> CostReport:
    sz, sh = s_z(inputs), s_h(inputs)
    exact, approx = cost_lp(inputs)
    gamma = mean_gamma(inputs)
    nmp = cost_nmp(inputs)
    report = CostReport(
        S_z=sz,
        S_H=sh,
        S_ext=gamma * sz,
        gamma=gamma,
        gamma_per_axis={a.label: gamma_axis(inputs, a) for a in Axis},
        C_NMP=nmp,
        C_PP=cost_pp(inputs),
        C_LP=exact,
        C_LP_approx=approx,
        ratio_R=exact / nmp if nmp else None,
        ratio_R_approx=approx_ratio(gamma, inputs.K, sz / sh) if inputs.K > 1 else None,
        S_z_over_S_H=sz / sh,
        inputs={
            "T": inputs.T,
            "K": inputs.K,
            "r": inputs.r,
            "shape": list(inputs.shape),
            "patch": [inputs.geometry.p_T, inputs.geometry.p_H, inputs.geometry.p_W],
            "preset": inputs.preset.name,
            "latent_dtype_bytes": inputs.latent_dtype_bytes,
        },
    )
    if inputs.hybrid is not None:
        report.hybrid = cost_hybrid(inputs)
    return report
