"""MSE objective and the averaged per-emotion Pearson correlation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .fusion import EMOTIONS
from .tensor import Tensor


class UndefinedCorrelation(ValueError):
    """Pearson correlation requested on a constant column."""

    def __init__(self, which: str, emotion: str | None = None):
        self.which = which
        self.emotion = emotion
        where = f" for {emotion}" if emotion else ""
        super().__init__(f"correlation undefined{where}: {which} column is constant")


def mse_loss(y, yhat: Tensor) -> Tensor:
    """Batch mean of the per-sample sum of squared errors over emotions."""
    y = T.as_tensor(y)
    yhat = T.as_tensor(yhat)
    if y.shape != yhat.shape or y.ndim != 2 or y.shape[0] < 1:
        raise T.ShapeError("mse_loss", y.shape, yhat.shape)
    return T.square(yhat - y).sum() * (1.0 / y.shape[0])


def pearson(y, yhat) -> float:
    """Population-normalised Pearson correlation, clamped to [-1, 1]."""
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise ValueError(f"pearson: length mismatch {y.size} vs {yhat.size}")
    if y.size < 2:
        raise ValueError("pearson: need at least two samples")
    if np.all(y == y[0]):
        raise UndefinedCorrelation("labels")
    if np.all(yhat == yhat[0]):
        raise UndefinedCorrelation("predictions")
    dy = y - y.mean()
    dp = yhat - yhat.mean()
    # rescale so tiny deviations cannot underflow in the products
    dy = dy / np.max(np.abs(dy))
    dp = dp / np.max(np.abs(dp))
    rho = (dy @ dp) / np.sqrt((dy @ dy) * (dp @ dp))
    return float(min(1.0, max(-1.0, rho)))


@dataclass
class EvalReport:
    rho_per_emotion: list[float]
    rho_bar: float
    n_samples: int
    mse: float

    def to_text(self) -> str:
        lines = [f"n_samples = {self.n_samples}", f"rho_bar = {self.rho_bar:.12g}", f"mse = {self.mse:.12g}"]
        lines += [f"rho.{name} = {r:.12g}" for name, r in zip(EMOTIONS, self.rho_per_emotion)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> EvalReport:
        kv = dict(
            (k.strip(), v.strip()) for k, v in (line.split("=", 1) for line in text.splitlines() if "=" in line)
        )
        return cls(
            rho_per_emotion=[float(kv[f"rho.{name}"]) for name in EMOTIONS],
            rho_bar=float(kv["rho_bar"]),
            n_samples=int(kv["n_samples"]),
            mse=float(kv["mse"]),
        )


def evaluate(predictions, labels) -> EvalReport:
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape or p.ndim != 2:
        raise ValueError(f"evaluate: shape mismatch {p.shape} vs {y.shape}")
    if p.shape[0] < 2:
        raise ValueError("evaluate: need at least two samples")
    rhos = []
    for i in range(p.shape[1]):
        name = EMOTIONS[i] if i < len(EMOTIONS) else str(i)
        try:
            rhos.append(pearson(y[:, i], p[:, i]))
        except UndefinedCorrelation as err:
            raise UndefinedCorrelation(err.which, name) from None
    mse = float(((p - y) ** 2).sum(axis=1).mean())
    return EvalReport(rhos, float(np.mean(rhos)), p.shape[0], mse)
