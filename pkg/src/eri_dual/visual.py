"""Visual branch: per-frame conv stem, shared spatial transformer, softmax position pooling."""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .nn import Conv2d, LayerNorm, Module, Parameter, SoftmaxPool, TransformerEncoder, normal
from .tensor import Tensor


def stem_output_size(image_size: int, n_stages: int = 4) -> int:
    s = image_size
    for _ in range(n_stages):
        s = (s + 2 - 3) // 2 + 1
    return s


class CnnStem(Module):
    """Four stride-2 conv -> channel layer-norm -> relu stages, channels 3 -> d/8 -> d/4 -> d/2 -> d.

    Stands in for the early ResNet18 layers: 112 px input gives a 7x7 map.
    """

    def __init__(self, d_model: int, rng: np.random.Generator):
        widths = [3, max(d_model // 8, 1), max(d_model // 4, 1), max(d_model // 2, 1), d_model]
        self.convs = [Conv2d(widths[i], widths[i + 1], 3, rng, stride=2, padding=1) for i in range(4)]
        self.norms = [LayerNorm(widths[i + 1], axis=1) for i in range(4)]

    def forward(self, x: Tensor) -> Tensor:
        for conv, norm in zip(self.convs, self.norms):
            x = T.relu(norm(conv(x)))
        return x


class SpatialEncoder(Module):
    def __init__(self, n_positions: int, d_model: int, n_blocks: int, n_heads: int,
                 rng: np.random.Generator, pool_bias: bool = True):
        self.pos_embed = Parameter(normal(rng, (n_positions, d_model), 0.02))
        self.encoder = TransformerEncoder(d_model, n_blocks, n_heads, rng)
        self.pool = SoftmaxPool(d_model, rng, bias=pool_bias)

    def add_pos(self, f: Tensor) -> Tensor:
        # f: (N, hw, d); the same table is added for every frame
        return f + self.pos_embed

    def forward(self, f: Tensor) -> Tensor:
        z = self.encoder(self.add_pos(f))
        return self.pool(z)


class VisualBranch(Module):
    """Maps clips (B, T, 3, H, W) to frame features (B, T, d_model) with no cross-frame mixing."""

    def __init__(self, d_model: int, image_size: int, n_blocks: int, n_heads: int,
                 rng: np.random.Generator, pool_bias: bool = True):
        self.d_model = d_model
        side = stem_output_size(image_size)
        self.stem = CnnStem(d_model, rng)
        self.spatial = SpatialEncoder(side * side, d_model, n_blocks, n_heads, rng, pool_bias)

    def feature_map(self, x: Tensor) -> Tensor:
        b, t = x.shape[:2]
        return self.stem(x.reshape(b * t, *x.shape[2:]))

    def forward(self, x: Tensor) -> Tensor:
        b, t = x.shape[:2]
        f = self.feature_map(x)
        n, d, h, w = f.shape
        f = f.reshape(n, d, h * w).transpose(0, 2, 1)
        g = self.spatial(f)
        return g.reshape(b, t, d)
