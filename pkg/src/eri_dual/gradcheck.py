"""Central finite-difference check of every parameter tensor of a reduced end-to-end model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import for_profile
from .metrics import mse_loss
from .models import FusionModel
from .tensor import Tensor

STEP = 1e-5
TOLERANCE = 1e-4
# gradients this small are compared absolutely; FD round-off is ~1e-11 here
GRAD_FLOOR = 1e-6


@dataclass
class GroupResult:
    name: str
    n_checked: int
    max_rel_error: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= TOLERANCE


def reduced_config(seed: int = 0):
    return for_profile(
        "desk", seed=seed, frames=4, image_size=16, d_model=16, d_attn=16, d_fused=16,
        max_len=8, batch_size=2,
    )


def reduced_problem(seed: int = 0, n_clips: int = 2, audio_steps: int = 3):
    """A reduced fusion model plus fixed inputs and a scalar loss closure.

    The loss sums the fused-head MSE and both unimodal-head MSEs so that every
    parameter tensor lies on a differentiated path.
    """
    cfg = reduced_config(seed)
    rng = np.random.default_rng([seed, 1])
    model = FusionModel(cfg, np.random.default_rng(seed))
    clips = Tensor(rng.uniform(0.0, 1.0, (n_clips, cfg.frames, 3, cfg.image_size, cfg.image_size)))
    mfcc = Tensor(rng.normal(0.0, 1.0, (n_clips, audio_steps, 8 * cfg.n_mels)))
    labels = rng.uniform(0.0, 1.0, (n_clips, 7))
    model.eval()

    def loss_fn() -> Tensor:
        fa = model.audio.features(mfcc)
        fv = model.video.features(clips)
        return (mse_loss(labels, model.fusion(fa, fv))
                + mse_loss(labels, model.video.head(fv))
                + mse_loss(labels, model.audio.head(fa)))

    return model, loss_fn


def check_model(model, loss_fn, seed: int = 0, per_tensor: int = 4, h: float = STEP) -> list[GroupResult]:
    model.zero_grad()
    loss_fn().backward()
    rng = np.random.default_rng([seed, 2])
    results = []
    for name, p in model.named_parameters():
        analytic = p.grad.copy()
        p.data = np.ascontiguousarray(p.data)
        flat = p.data.reshape(-1)
        picks = rng.choice(flat.size, size=min(per_tensor, flat.size), replace=False)
        worst = 0.0
        for i in picks:
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn().item()
            flat[i] = orig - h
            down = loss_fn().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            a = analytic.reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), GRAD_FLOOR)
            worst = max(worst, err)
        results.append(GroupResult(name, len(picks), worst))
    return results


def run(seed: int = 0, per_tensor: int = 4) -> list[GroupResult]:
    model, loss_fn = reduced_problem(seed)
    return check_model(model, loss_fn, seed, per_tensor)


def format_table(results: list[GroupResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'group':<{width}}  {'n':>3}  {'max_rel_err':>12}  status"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.n_checked:>3}  {r.max_rel_error:12.3e}  {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
