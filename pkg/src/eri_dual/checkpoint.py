"""Model checkpoints: every named parameter plus a JSON config echo, in a TNSR container."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from . import tnsr
from .config import RunConfig
from .models import build_model
from .nn import Module

CONFIG_KEY = "__config__"


class CheckpointError(ValueError):
    pass


def to_tensors(model: Module, cfg: RunConfig) -> dict[str, np.ndarray]:
    tensors = {CONFIG_KEY: np.frombuffer(cfg.to_json().encode("utf-8"), dtype=np.uint8).astype(np.float64)}
    for name, p in model.named_parameters():
        tensors[name] = p.data
    return tensors


def save_checkpoint(model: Module, cfg: RunConfig, path: str | Path, compact: bool = False) -> None:
    tnsr.save(path, to_tensors(model, cfg), compact)


def read_config(tensors: dict[str, np.ndarray]) -> RunConfig:
    if CONFIG_KEY not in tensors:
        raise CheckpointError(f"checkpoint has no {CONFIG_KEY!r} entry")
    raw = tensors[CONFIG_KEY].astype(np.uint8).tobytes()
    return RunConfig.from_json(raw.decode("utf-8"))


def load_into(model: Module, tensors: dict[str, np.ndarray], prefix: str = "") -> None:
    """Copy parameters in, verifying names, shapes and a single consistent dtype."""
    params = dict(model.named_parameters())
    stored = {k[len(prefix):]: v for k, v in tensors.items() if k != CONFIG_KEY and k.startswith(prefix)}
    dtypes = {v.dtype for v in stored.values()}
    if len(dtypes) > 1:
        raise CheckpointError(f"dtype mismatch: checkpoint mixes {sorted(map(str, dtypes))}")
    for name, p in params.items():
        if name not in stored:
            raise CheckpointError(f"missing tensor {prefix + name!r}")
        if stored[name].shape != p.shape:
            raise CheckpointError(
                f"shape mismatch for {prefix + name!r}: model {p.shape}, checkpoint {stored[name].shape}"
            )
    unknown = [n for n in stored if n not in params]
    if unknown:
        raise CheckpointError(f"unknown tensor {prefix + unknown[0]!r}")
    for name, p in params.items():
        p.data = stored[name].astype(np.float64)


def load_checkpoint(path: str | Path) -> tuple[Module, RunConfig]:
    tensors = tnsr.load(path)
    cfg = read_config(tensors)
    model = build_model(cfg)
    load_into(model, tensors)
    return model, cfg
