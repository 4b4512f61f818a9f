"""Run configuration: JSON schema, loading, and conversion to engine objects."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .cost import CostInputs, HybridSpec
from .denoise import BoxDenoiser, ConditioningVector, Denoiser, GlobalDenoiser, IdentityDenoiser, SamplerConfig
from .errors import ConfigError
from .latent import PatchGeometry, get_preset, random_latent, PRESETS

_POS_INT = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["latent", "patch", "sampler", "denoiser", "cluster"],
    "properties": {
        "latent": {
            "type": "object",
            "additionalProperties": False,
            "required": ["C", "T", "H", "W"],
            "properties": {
                "C": _POS_INT, "T": _POS_INT, "H": _POS_INT, "W": _POS_INT,
                "dtype_bytes": {"enum": [2, 4, 8]},
            },
        },
        "patch": {
            "type": "object",
            "additionalProperties": False,
            "required": ["p_T", "p_H", "p_W"],
            "properties": {"p_T": _POS_INT, "p_H": _POS_INT, "p_W": _POS_INT},
        },
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "required": ["steps"],
            "properties": {
                "steps": _POS_INT,
                "eta": {"type": "number", "exclusiveMinimum": 0},
                "guidance_w": {"type": "number"},
            },
        },
        "denoiser": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["box", "global", "identity"]},
                "radius": {
                    "type": "array", "minItems": 3, "maxItems": 3,
                    "items": {"type": "integer", "minimum": 0},
                },
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            },
        },
        "cluster": {
            "type": "object",
            "additionalProperties": False,
            "required": ["K"],
            "properties": {
                "K": _POS_INT,
                "r": {"type": "number", "minimum": 0},
                "layers": _POS_INT,
            },
        },
        "preset": {"enum": sorted(PRESETS)},
        "hybrid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["M", "group_sizes"],
            "properties": {"M": _POS_INT, "group_sizes": {"type": "array", "items": _POS_INT}},
        },
        "completeness": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "grid": {"type": "array", "minItems": 3, "maxItems": 3, "items": _POS_INT},
                "schedule": {"enum": ["rotating", "temporal", "height", "width"]},
                "max_steps": _POS_INT,
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {
                    "type": "array",
                    "items": {"enum": ["latent", "csv", "json"]},
                    "uniqueItems": True,
                },
            },
        },
    },
}

ALL_FORMATS = ("latent", "csv", "json")


@dataclass(frozen=True)
class RunConfig:
    raw: dict

    @property
    def shape(self) -> tuple[int, int, int, int]:
        lat = self.raw["latent"]
        return (lat["C"], lat["T"], lat["H"], lat["W"])

    @property
    def preset(self):
        return get_preset(self.raw.get("preset", "tiny"))

    @property
    def dtype_bytes(self) -> int:
        return self.raw["latent"].get("dtype_bytes", self.preset.dtype_bytes)

    @property
    def geometry(self) -> PatchGeometry:
        return PatchGeometry(**self.raw["patch"])

    @property
    def sampler(self) -> SamplerConfig:
        s = self.raw["sampler"]
        return SamplerConfig(s["steps"], s.get("eta", 0.1), s.get("guidance_w", 5.0))

    @property
    def seed(self) -> int:
        return self.raw["denoiser"].get("seed", 0)

    @property
    def K(self) -> int:
        return self.raw["cluster"]["K"]

    @property
    def r(self) -> float:
        return float(self.raw["cluster"].get("r", 0.0))

    @property
    def layers(self) -> int:
        return self.raw["cluster"].get("layers", 30)

    @property
    def hybrid(self) -> HybridSpec | None:
        h = self.raw.get("hybrid")
        return None if h is None else HybridSpec(h["M"], tuple(h["group_sizes"]))

    @property
    def out_dir(self) -> Path:
        return Path(self.raw.get("output", {}).get("dir", "lpsim-out"))

    @property
    def formats(self) -> tuple[str, ...]:
        return tuple(self.raw.get("output", {}).get("formats", ALL_FORMATS))

    def denoiser(self) -> Denoiser:
        d = self.raw["denoiser"]
        if d["kind"] == "box":
            return BoxDenoiser(radius=tuple(d.get("radius", (1, 1, 1))))
        if d["kind"] == "global":
            return GlobalDenoiser()
        return IdentityDenoiser()

    def initial_latent(self):
        return random_latent(self.shape, self.seed, self.dtype_bytes)

    def conditioning(self) -> ConditioningVector:
        return ConditioningVector.from_seed(self.seed)

    def cost_inputs(self, with_hybrid: bool = True) -> CostInputs:
        return CostInputs(
            T=self.sampler.total_steps,
            K=self.K,
            r=self.r,
            shape=self.shape,
            geometry=self.geometry,
            preset=self.preset,
            latent_dtype_bytes=self.dtype_bytes,
            hybrid=self.hybrid if with_hybrid else None,
        )

    def with_overrides(self, seed: int | None = None, out: str | None = None) -> "RunConfig":
        raw = json.loads(json.dumps(self.raw))
        if seed is not None:
            raw["denoiser"]["seed"] = seed
        if out is not None:
            raw.setdefault("output", {})["dir"] = out
        return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    cfg = RunConfig(raw)
    if cfg.r > max(cfg.K - 1, 0):
        raise ConfigError(f"cluster.r={cfg.r} outside [0, K-1={cfg.K - 1}]")
    try:
        cfg.geometry.grid(cfg.shape)
    except Exception as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    return parse_config(raw)
