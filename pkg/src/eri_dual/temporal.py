"""Temporal encoder: dilated causal 1-D convolutions, temporal position table, transformer."""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .nn import ConfigError, Linear, Module, Parameter, TransformerEncoder, normal, uniform_fan_in
from .tensor import Tensor


def causal_dilated_conv(x: Tensor, weight: Tensor, bias: Tensor | None, dilation: int) -> Tensor:
    """y[p] = sum_i x[p - dilation*i] @ weight[i] (+ bias), with x[<0] = 0.

    x is (B, T, C_in), weight is (k, C_in, C_out). Tap 0 multiplies the current step.
    """
    k, c_in, c_out = weight.shape
    if x.shape[-1] != c_in:
        raise T.ShapeError("causal_dilated_conv", x.shape, weight.shape)
    length = x.shape[1]
    span = (k - 1) * dilation
    xp = T.pad(x, ((0, 0), (span, 0), (0, 0))) if span else x
    taps = [xp[:, span - dilation * i: span - dilation * i + length, :] for i in range(k)]
    stacked = T.concat(taps, axis=2) if k > 1 else taps[0]
    y = T.matmul(stacked, weight.reshape(k * c_in, c_out))
    return y + bias if bias is not None else y


def receptive_field(kernel_size: int, dilations) -> int:
    return 1 + sum(d * (kernel_size - 1) for d in dilations)


class CausalConv1d(Module):
    def __init__(self, c_in: int, c_out: int, kernel_size: int, dilation: int, rng: np.random.Generator):
        if kernel_size < 1 or dilation < 1:
            raise ConfigError("kernel_size and dilation must be positive")
        fan_in = c_in * kernel_size
        self.weight = Parameter(uniform_fan_in(rng, (kernel_size, c_in, c_out), fan_in))
        self.bias = Parameter(uniform_fan_in(rng, (c_out,), fan_in))
        self.dilation = dilation

    def forward(self, x: Tensor) -> Tensor:
        return causal_dilated_conv(x, self.weight, self.bias, self.dilation)


class TCN(Module):
    """Input projection then n layers of causal conv -> relu with dilation 2**layer."""

    def __init__(self, d_in: int, d_out: int, kernel_size: int, n_layers: int,
                 rng: np.random.Generator, residual: bool = False):
        self.proj = Linear(d_in, d_out, rng)
        self.dilations = [2 ** i for i in range(n_layers)]
        self.convs = [CausalConv1d(d_out, d_out, kernel_size, d, rng) for d in self.dilations]
        self.residual = residual
        self.kernel_size = kernel_size

    @property
    def receptive_field(self) -> int:
        return receptive_field(self.kernel_size, self.dilations)

    def forward(self, x: Tensor) -> Tensor:
        h = self.proj(x)
        for conv in self.convs:
            y = T.relu(conv(h))
            h = h + y if self.residual else y
        return h


def sinusoidal_table(length: int, d: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    i = np.arange(0, d, 2)[None, :]
    angle = pos / (10000.0 ** (i / d))
    table = np.zeros((length, d))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle[:, : d // 2])
    return table


class TemporalTransformer(Module):
    def __init__(self, d: int, n_blocks: int, n_heads: int, max_len: int,
                 rng: np.random.Generator, pos: str = "learned"):
        if pos == "learned":
            self.pos_embed = Parameter(normal(rng, (max_len, d), 0.02))
        elif pos == "sinusoidal":
            self.pos_table = sinusoidal_table(max_len, d)
        else:
            raise ConfigError(f"unknown temporal position mode {pos!r}")
        self.max_len = max_len
        self.encoder = TransformerEncoder(d, n_blocks, n_heads, rng)

    def forward(self, x: Tensor) -> Tensor:
        length = x.shape[1]
        if length > self.max_len:
            raise ValueError(f"sequence length {length} exceeds positional table length {self.max_len}")
        if hasattr(self, "pos_embed"):
            pos = self.pos_embed[:length]
        else:
            pos = Tensor(self.pos_table[:length])
        return self.encoder(x + pos)


class TemporalEncoder(Module):
    """(B, T, d_in) -> (B, T, d_attn); length preserved."""

    def __init__(self, d_in: int, d_attn: int, kernel_size: int, n_conv_layers: int,
                 n_blocks: int, n_heads: int, max_len: int, rng: np.random.Generator,
                 pos: str = "learned", residual: bool = False):
        self.tcn = TCN(d_in, d_attn, kernel_size, n_conv_layers, rng, residual)
        self.transformer = TemporalTransformer(d_attn, n_blocks, n_heads, max_len, rng, pos)

    def forward(self, x: Tensor) -> Tensor:
        return self.transformer(self.tcn(x))
