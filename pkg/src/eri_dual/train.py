"""Two-stage training: unimodal branches first, then a fusion head over their frozen features."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import load_into
from .config import RunConfig
from .data import Arrays
from .fusion import sample_branches
from .metrics import EvalReport, UndefinedCorrelation, evaluate, mse_loss
from .models import FusionModel, build_model
from .nn import Module
from .optim import Adam, PlateauHalver
from .tensor import Tensor

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


class MissingCheckpoint(TrainingError):
    pass


@dataclass
class TrainResult:
    model: Module
    history: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_rho: float = -math.inf


def _chunks(n: int, size: int):
    for start in range(0, n, size):
        yield np.arange(start, min(start + size, n))


def predict(model: Module, stage: str, arrays: Arrays, batch_size: int = 8) -> np.ndarray:
    """Eval-mode forward over a whole dataset; modality dropout is off."""
    model.eval()
    out = []
    for idx in _chunks(len(arrays), batch_size):
        if stage == "video":
            y = model(Tensor(arrays.videos[idx]))
        elif stage == "audio":
            y = model(Tensor(arrays.mfcc[idx]))
        else:
            y = model(Tensor(arrays.videos[idx]), Tensor(arrays.mfcc[idx]))
        out.append(y.data)
    return np.concatenate(out)


def branch_features(model: FusionModel, arrays: Arrays, batch_size: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Temporal-encoder outputs of the (frozen) audio and video branches."""
    model.eval()
    fa, fv = [], []
    for idx in _chunks(len(arrays), batch_size):
        fa.append(model.audio.features(Tensor(arrays.mfcc[idx])).data)
        fv.append(model.video.features(Tensor(arrays.videos[idx])).data)
    return np.concatenate(fa), np.concatenate(fv)


def _safe_eval(pred: np.ndarray, labels: np.ndarray) -> EvalReport | None:
    try:
        return evaluate(pred, labels)
    except UndefinedCorrelation as err:
        log.warning("validation correlation undefined: %s", err)
        return None


def train_stage(cfg: RunConfig, train: Arrays, val: Arrays,
                video_state: dict | None = None, audio_state: dict | None = None) -> TrainResult:
    """Minibatch MSE + Adam, best-validation-rho selection, lr halving on plateau.

    The fusion stage needs the state dicts of both trained unimodal models; it
    freezes them and optimises only the fusion head over cached branch features.
    """
    stage = cfg.stage
    model = build_model(cfg, stage)
    if stage == "fusion":
        if video_state is None or audio_state is None:
            missing = "video" if video_state is None else "audio"
            raise MissingCheckpoint(f"fusion stage requires a trained {missing} checkpoint")
        load_into(model.video, video_state)
        load_into(model.audio, audio_state)
        model.video.freeze()
        model.audio.freeze()
        train_fa, train_fv = branch_features(model, train, cfg.batch_size)
        val_fa, val_fv = branch_features(model, val, cfg.batch_size)
        params = model.fusion.parameters()
    else:
        params = model.parameters()

    opt = Adam(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    sched = PlateauHalver(opt, cfg.patience)
    result = TrainResult(model)
    best_state = None
    n = len(train)

    for epoch in range(cfg.max_epochs):
        model.train()
        order = np.random.default_rng([cfg.seed, 0x5EED, epoch]).permutation(n)
        total = 0.0
        for b, idx in enumerate(np.array_split(order, max(1, math.ceil(n / cfg.batch_size)))):
            y = train.labels[idx]
            if stage == "video":
                pred = model(Tensor(train.videos[idx]))
            elif stage == "audio":
                pred = model(Tensor(train.mfcc[idx]))
            else:
                branches = sample_branches(cfg.p_m, cfg.p_v, cfg.seed, epoch, idx)
                pred = model.fusion(Tensor(train_fa[idx]), Tensor(train_fv[idx]), branches)
            loss = mse_loss(y, pred)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += value * len(idx)

        if stage == "fusion":
            model.eval()
            pred = np.concatenate([
                model.fusion(Tensor(val_fa[idx]), Tensor(val_fv[idx])).data
                for idx in _chunks(len(val), cfg.batch_size)
            ])
        else:
            pred = predict(model, stage, val, cfg.batch_size)
        report = _safe_eval(pred, val.labels)
        rho = report.rho_bar if report else math.nan
        train_loss = total / n
        result.history.append({
            "epoch": epoch, "lr": opt.lr, "train_loss": train_loss,
            "val_rho_bar": rho, "val_mse": report.mse if report else math.nan,
        })
        log.info("epoch %d lr %.3g train_loss %.6f val_rho %.4f", epoch, opt.lr, train_loss, rho)
        if math.isfinite(rho) and rho > result.best_rho:
            result.best_rho = rho
            result.best_epoch = epoch
            best_state = model.state_dict()
        sched.step(rho if math.isfinite(rho) else -math.inf)
        if opt.lr < cfg.min_lr:
            break
        if cfg.stop_train_mse > 0 and train_loss < cfg.stop_train_mse:
            break

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return result
