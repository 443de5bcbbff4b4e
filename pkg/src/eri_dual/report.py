"""10-level intensity histograms and per-emotion confusion matrices as CSV."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .fusion import EMOTIONS

N_BINS = 10


def quantize(values, n_bins: int = N_BINS) -> np.ndarray:
    """Map [0, 1] intensities to levels 0..n_bins-1; 1.0 falls in the top level."""
    v = np.asarray(values, dtype=np.float64)
    return np.clip(np.floor(v * n_bins).astype(np.int64), 0, n_bins - 1)


def histogram(labels: np.ndarray, n_bins: int = N_BINS) -> np.ndarray:
    """(n_emotions, n_bins) sample counts per quantized label level."""
    q = quantize(labels, n_bins)
    return np.stack([np.bincount(q[:, i], minlength=n_bins) for i in range(q.shape[1])])


def confusion(labels: np.ndarray, preds: np.ndarray, n_bins: int = N_BINS) -> np.ndarray:
    """(n_emotions, n_bins, n_bins); [e, true_level, predicted_level] counts."""
    ql, qp = quantize(labels, n_bins), quantize(preds, n_bins)
    out = np.zeros((labels.shape[1], n_bins, n_bins), dtype=np.int64)
    for e in range(labels.shape[1]):
        np.add.at(out[e], (ql[:, e], qp[:, e]), 1)
    return out


def write_bin_reports(out_dir: str | Path, labels: np.ndarray, preds: np.ndarray, n_bins: int = N_BINS) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    hist_l, hist_p = histogram(labels, n_bins), histogram(preds, n_bins)
    hist_path = out_dir / "histogram.csv"
    with hist_path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["emotion", "level", "label_count", "prediction_count"])
        for e, name in enumerate(EMOTIONS):
            for b in range(n_bins):
                w.writerow([name, b, int(hist_l[e, b]), int(hist_p[e, b])])
    conf = confusion(labels, preds, n_bins)
    conf_path = out_dir / "confusion.csv"
    with conf_path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["emotion", "label_level"] + [f"pred_{b}" for b in range(n_bins)])
        for e, name in enumerate(EMOTIONS):
            for b in range(n_bins):
                w.writerow([name, b] + [int(c) for c in conf[e, b]])
    return [hist_path, conf_path]
