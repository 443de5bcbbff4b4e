"""Run configuration: dataclass defaults, profiles, and the ``key = value`` file format."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from pathlib import Path


class ConfigKeyError(KeyError):
    pass


@dataclass
class RunConfig:
    stage: str = "video"
    profile: str = "desk"
    seed: int = 0
    # optimisation
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 8
    max_epochs: int = 500
    patience: int = 10
    min_lr: float = 1e-6
    stop_train_mse: float = 0.0
    # visual branch
    frames: int = 32
    image_size: int = 56
    d_model: int = 64
    spatial_blocks: int = 4
    spatial_heads: int = 4
    pool_bias: bool = True
    # temporal encoder
    tcn_kernel: int = 3
    tcn_layers: int = 5
    tcn_residual: bool = False
    d_attn: int = 128
    temporal_blocks: int = 2
    temporal_heads: int = 4
    temporal_pos: str = "learned"
    max_len: int = 128
    # fusion
    p_m: float = 0.9
    p_v: float = 0.5
    d_fused: int = 128
    # audio front end
    sample_rate: int = 16000
    frame_len: int = 2048
    hop: int = 512
    n_mels: int = 128
    fmin: float = 0.0
    fmax: float = 8000.0

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> RunConfig:
        return cls(**json.loads(text))

    def replace(self, **changes) -> RunConfig:
        return apply_overrides(self, changes)


PROFILES = {
    "desk": {"batch_size": 8, "d_model": 64, "image_size": 56},
    "paper": {"batch_size": 64, "d_model": 256, "image_size": 112},
}


def _coerce(name: str, kind, raw):
    if not isinstance(raw, str):
        return kind(raw) if kind is not bool else bool(raw)
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: not a boolean: {raw!r}")
    if kind is int:
        return int(float(raw)) if raw.lower().count("e") else int(raw)
    return kind(raw)


_TYPES = {"int": int, "float": float, "str": str, "bool": bool}


def apply_overrides(cfg: RunConfig, values: dict) -> RunConfig:
    known = {f.name: _TYPES[f.type] for f in fields(RunConfig)}
    out = dataclasses.replace(cfg)
    for key, raw in values.items():
        if key not in known:
            raise ConfigKeyError(f"unknown config key {key!r}")
        setattr(out, key, _coerce(key, known[key], raw))
    return out


def for_profile(profile: str = "desk", **overrides) -> RunConfig:
    if profile not in PROFILES:
        raise ConfigKeyError(f"unknown profile {profile!r}")
    cfg = apply_overrides(RunConfig(), {"profile": profile, **PROFILES[profile]})
    return apply_overrides(cfg, overrides)


def parse_config_text(text: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Profile defaults, then file values, then explicit overrides."""
    values = parse_config_text(Path(path).read_text()) if path else {}
    values.update(overrides or {})
    profile = values.pop("profile", "desk")
    return for_profile(profile, **values)
