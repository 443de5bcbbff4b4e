"""Unimodal and fused intensity models assembled from the branch modules."""
from __future__ import annotations

import numpy as np

from .audio import STACK
from .config import RunConfig
from .fusion import FusionHead, IntensityHead
from .nn import Module
from .temporal import TemporalEncoder
from .tensor import Tensor
from .visual import VisualBranch


def _temporal(cfg: RunConfig, d_in: int, rng: np.random.Generator) -> TemporalEncoder:
    return TemporalEncoder(
        d_in, cfg.d_attn, cfg.tcn_kernel, cfg.tcn_layers, cfg.temporal_blocks,
        cfg.temporal_heads, cfg.max_len, rng, cfg.temporal_pos, cfg.tcn_residual,
    )


class VideoModel(Module):
    def __init__(self, cfg: RunConfig, rng: np.random.Generator):
        self.visual = VisualBranch(cfg.d_model, cfg.image_size, cfg.spatial_blocks,
                                   cfg.spatial_heads, rng, cfg.pool_bias)
        self.temporal = _temporal(cfg, cfg.d_model, rng)
        self.head = IntensityHead(cfg.d_attn, rng, pool_bias=cfg.pool_bias)

    def features(self, clips: Tensor) -> Tensor:
        return self.temporal(self.visual(clips))

    def forward(self, clips: Tensor) -> Tensor:
        return self.head(self.features(clips))


class AudioModel(Module):
    def __init__(self, cfg: RunConfig, rng: np.random.Generator):
        self.temporal = _temporal(cfg, STACK * cfg.n_mels, rng)
        self.head = IntensityHead(cfg.d_attn, rng, pool_bias=cfg.pool_bias)

    def features(self, mfcc: Tensor) -> Tensor:
        return self.temporal(mfcc)

    def forward(self, mfcc: Tensor) -> Tensor:
        return self.head(self.features(mfcc))


class FusionModel(Module):
    """Both branches plus the fusion head. Branch weights come from the unimodal stages."""

    def __init__(self, cfg: RunConfig, rng: np.random.Generator):
        self.video = VideoModel(cfg, rng)
        self.audio = AudioModel(cfg, rng)
        self.fusion = FusionHead(cfg.d_attn, cfg.d_attn, cfg.d_fused, rng, pool_bias=cfg.pool_bias)

    def forward(self, clips: Tensor, mfcc: Tensor, branches: np.ndarray | None = None) -> Tensor:
        return self.fusion(self.audio.features(mfcc), self.video.features(clips), branches)


def build_model(cfg: RunConfig, stage: str | None = None) -> Module:
    stage = stage or cfg.stage
    rng = np.random.default_rng(cfg.seed)
    if stage == "video":
        return VideoModel(cfg, rng)
    if stage == "audio":
        return AudioModel(cfg, rng)
    if stage == "fusion":
        return FusionModel(cfg, rng)
    raise ValueError(f"unknown stage {stage!r}")
