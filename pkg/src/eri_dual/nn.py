"""Parameters, modules and the transformer building blocks shared by both branches."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from . import tensor as T
from .tensor import Tensor


class ConfigError(ValueError):
    pass


class Parameter(Tensor):
    """A learnable tensor. Its checkpoint name is assigned by the owning module tree."""

    __slots__ = ()

    def __init__(self, data, name: str | None = None):
        super().__init__(data, requires_grad=True, name=name)


class Module:
    """Base class; parameters and submodules are discovered from attributes.

    Lists of modules are supported (``self.blocks = [Block(), ...]``) and are
    named by index, e.g. ``encoder.blocks.2.attn.w_q``.
    """

    training: bool = True

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, value in vars(self).items():
            path = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{path}.{i}", item

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator[Module]:
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = np.zeros_like(p.data)

    def freeze(self) -> None:
        for p in self.parameters():
            p.requires_grad = False
            p.grad = np.zeros_like(p.data)

    def train(self, mode: bool = True) -> Module:
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> Module:
        return self.train(False)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = [n for n in params if n not in state]
        if missing:
            raise KeyError(f"missing tensor {missing[0]!r}")
        unknown = [n for n in state if n not in params]
        if unknown:
            raise KeyError(f"unknown tensor {unknown[0]!r}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=T.DTYPE)
            if value.shape != p.shape:
                raise ValueError(
                    f"shape mismatch for {name!r}: expected {p.shape}, got {value.shape}"
                )
            p.data = value.copy()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)


def uniform_fan_in(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = Parameter(uniform_fan_in(rng, (d_in, d_out), d_in))
        self.bias = Parameter(uniform_fan_in(rng, (d_out,), d_in)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        y = T.matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y


class LayerNorm(Module):
    def __init__(self, d: int, axis: int = -1, eps: float = 1e-5):
        self.gain = Parameter(np.ones(d))
        self.bias = Parameter(np.zeros(d))
        self.axis = axis
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gain, self.bias, self.axis, self.eps)


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, k: int, rng: np.random.Generator, stride: int = 1, padding: int = 0):
        fan_in = c_in * k * k
        self.weight = Parameter(uniform_fan_in(rng, (c_out, c_in, k, k), fan_in))
        self.bias = Parameter(uniform_fan_in(rng, (c_out,), fan_in))
        self.stride = stride
        self.padding = padding

    def forward(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class MultiHeadAttention(Module):
    """Unmasked scaled dot-product self-attention over (B, L, d) inputs.

    The attention weights of the latest forward are kept on ``last_weights``
    with shape (B, heads, L, L).
    """

    def __init__(self, d: int, n_heads: int, rng: np.random.Generator):
        if d % n_heads:
            raise ConfigError(f"model dim {d} not divisible by {n_heads} heads")
        self.n_heads = n_heads
        self.q = Linear(d, d, rng)
        self.k = Linear(d, d, rng)
        self.v = Linear(d, d, rng)
        self.out = Linear(d, d, rng)
        self.last_weights: np.ndarray | None = None

    def _split(self, x: Tensor, b: int, length: int) -> Tensor:
        return x.reshape(b, length, self.n_heads, -1).transpose(0, 2, 1, 3)

    def forward(self, x: Tensor) -> Tensor:
        b, length, d = x.shape
        dh = d // self.n_heads
        q = self._split(self.q(x), b, length)
        k = self._split(self.k(x), b, length)
        v = self._split(self.v(x), b, length)
        scores = T.matmul(q, T.swapaxes(k, -1, -2)) * (1.0 / np.sqrt(dh))
        att = T.softmax(scores, axis=-1)
        self.last_weights = att.data
        ctx = T.matmul(att, v).transpose(0, 2, 1, 3).reshape(b, length, d)
        return self.out(ctx)


class EncoderBlock(Module):
    """Pre-norm block: x + attn(ln(x)), then x + ffn(ln(x))."""

    def __init__(self, d: int, n_heads: int, rng: np.random.Generator, ff_mult: int = 4):
        self.ln1 = LayerNorm(d)
        self.attn = MultiHeadAttention(d, n_heads, rng)
        self.ln2 = LayerNorm(d)
        self.ff1 = Linear(d, ff_mult * d, rng)
        self.ff2 = Linear(ff_mult * d, d, rng)

    def forward(self, x: Tensor) -> Tensor:
        x = x + self.attn(self.ln1(x))
        return x + self.ff2(T.relu(self.ff1(self.ln2(x))))


class TransformerEncoder(Module):
    def __init__(self, d: int, n_blocks: int, n_heads: int, rng: np.random.Generator):
        if d % n_heads:
            raise ConfigError(f"model dim {d} not divisible by {n_heads} heads")
        self.blocks = [EncoderBlock(d, n_heads, rng) for _ in range(n_blocks)]
        self.ln_out = LayerNorm(d)

    def forward(self, x: Tensor) -> Tensor:
        for block in self.blocks:
            x = block(x)
        return self.ln_out(x)


class SoftmaxPool(Module):
    """Score each row of a (B, L, d) sequence, softmax over L, return the convex combination.

    Used both for spatial position aggregation and for temporal aggregation in
    the regression heads. ``last_weights`` holds the (B, L) weights.
    """

    def __init__(self, d: int, rng: np.random.Generator, bias: bool = True):
        self.score = Linear(d, 1, rng, bias=bias)
        self.last_weights: np.ndarray | None = None

    def forward(self, x: Tensor) -> Tensor:
        a = T.softmax(self.score(x), axis=1)
        self.last_weights = a.data[..., 0]
        return (a * x).sum(axis=1)
