"""Latent-parallel denoising for video diffusion, simulated at desk scale."""

from .cluster import ClusterConfig, run_lp, run_nmp_emulation, run_pp_emulation
from .completeness import verify_n_complete
from .cost import CostInputs, HybridSpec, cost_report
from .denoise import (
    BoxDenoiser,
    ConditioningVector,
    GlobalDenoiser,
    IdentityDenoiser,
    SamplerConfig,
    cfg_predict,
    run_centralized,
)
from .latent import Axis, ModelPreset, PatchGeometry, get_preset, random_latent
from .partition import build_plan, extract_sublatents, rotation_axis
from .reconstruct import build_weight_mask, reconstruct

__version__ = "0.1.0"
