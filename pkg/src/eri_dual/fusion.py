"""Modality-dropout fusion, fused projection and the sigmoid intensity heads."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import tensor as T
from .nn import LayerNorm, Linear, Module, SoftmaxPool
from .tensor import Tensor

EMOTIONS = ("adoration", "amusement", "anxiety", "disgust", "empathic-pain", "fear", "surprise")

BOTH, VIDEO_ONLY, AUDIO_ONLY = 0, 1, 2


def branch_probabilities(p_m: float, p_v: float) -> tuple[float, float, float]:
    """Probabilities of (both, video only, audio only)."""
    for name, p in (("p_m", p_m), ("p_v", p_v)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return p_m, (1.0 - p_m) * p_v, (1.0 - p_m) * (1.0 - p_v)


def interp_matrix(m: int, t: int) -> np.ndarray:
    """(t, m) matrix resampling an m-step sequence onto t evenly spaced points by linear interpolation."""
    if m < 1 or t < 1:
        raise ValueError("sequence lengths must be positive")
    if m == t:
        return np.eye(t)
    a = np.zeros((t, m))
    if m == 1:
        a[:, 0] = 1.0
        return a
    pos = np.arange(t) * (m - 1) / (t - 1) if t > 1 else np.zeros(1)
    lo = np.minimum(np.floor(pos).astype(int), m - 2)
    frac = pos - lo
    a[np.arange(t), lo] = 1.0 - frac
    a[np.arange(t), lo + 1] += frac
    return a


def align_audio(f_a: Tensor, t: int) -> Tensor:
    """Resample (B, M, d) audio features to (B, t, d)."""
    m = f_a.shape[1]
    if m == t:
        return f_a
    return T.matmul(Tensor(interp_matrix(m, t)), f_a)


def sample_branch(p_m: float, p_v: float, seed: int, epoch: int, clip_index: int) -> int:
    """Draw one dropout branch for a clip; keyed so any clip's draw is reproducible in isolation."""
    branch_probabilities(p_m, p_v)
    rng = np.random.default_rng([seed, epoch, clip_index])
    if rng.random() < p_m:
        return BOTH
    return VIDEO_ONLY if rng.random() < p_v else AUDIO_ONLY


def sample_branches(p_m: float, p_v: float, seed: int, epoch: int, clip_indices: Sequence[int]) -> np.ndarray:
    return np.array([sample_branch(p_m, p_v, seed, epoch, int(i)) for i in clip_indices], dtype=np.int64)


def modality_dropout(f_a: Tensor, f_v: Tensor, branches: np.ndarray | None = None) -> Tensor:
    """Concatenate (audio, video) along channels, zeroing the dropped modality per clip.

    ``branches`` holds one code per batch item; ``None`` keeps both (evaluation).
    """
    if f_a.shape[:2] != f_v.shape[:2]:
        raise T.ShapeError("modality_dropout", f_a.shape, f_v.shape)
    if branches is not None:
        branches = np.asarray(branches).reshape(-1, 1, 1)
        f_a = T.where(branches != VIDEO_ONLY, f_a)
        f_v = T.where(branches != AUDIO_ONLY, f_v)
    return T.concat([f_a, f_v], axis=2)


class IntensityHead(Module):
    """Softmax-pool over time, affine map to 7 logits, sigmoid."""

    def __init__(self, d: int, rng: np.random.Generator, n_out: int = len(EMOTIONS), pool_bias: bool = True):
        self.pool = SoftmaxPool(d, rng, bias=pool_bias)
        self.out = Linear(d, n_out, rng)

    def forward(self, x: Tensor) -> Tensor:
        return T.sigmoid(self.out(self.pool(x)))


class FusionHead(Module):
    def __init__(self, d_a: int, d_v: int, d_m: int, rng: np.random.Generator, pool_bias: bool = True):
        self.norm = LayerNorm(d_a + d_v)
        self.proj = Linear(d_a + d_v, d_m, rng)
        self.head = IntensityHead(d_m, rng, pool_bias=pool_bias)

    def project(self, f_av: Tensor) -> Tensor:
        return self.proj(self.norm(f_av))

    def forward(self, f_a: Tensor, f_v: Tensor, branches: np.ndarray | None = None) -> Tensor:
        f_a = align_audio(f_a, f_v.shape[1])
        return self.head(self.project(modality_dropout(f_a, f_v, branches)))
