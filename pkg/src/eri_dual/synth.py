"""Synthetic audiovisual clips whose 7 intensity labels are encoded in both modalities.

Video: seven grey Gaussian blobs at fixed positions on a circle; blob k's peak
brightness ramps linearly over the clip up to its (noisy) intensity.
Audio: seven fixed tones with amplitudes proportional to the (noisy)
intensities, over a faint hiss. Each modality gets independent label noise,
so fusing both is more informative than either alone when ``noise > 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import Waveform

TONES_HZ = (250.0, 400.0, 630.0, 1000.0, 1600.0, 2500.0, 4000.0)
TONE_GAIN = 0.1
N_EMOTIONS = 7


@dataclass(frozen=True)
class SynthSpec:
    n_samples: int = 64
    seed: int = 0
    noise: float = 0.0
    frames: int = 32
    image_size: int = 112
    audio_seconds: float = 2.0
    sample_rate: int = 16000
    hiss: float = 1e-3

    def __post_init__(self):
        if not 0.0 <= self.noise < 1.0:
            raise ValueError(f"noise level must lie in [0, 1), got {self.noise}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")


@dataclass
class LabeledClip:
    id: str
    video: np.ndarray  # (T, 3, H, W) in [0, 1]
    audio: Waveform
    label: np.ndarray  # (7,) in [0, 1]


def blob_centers(size: int) -> np.ndarray:
    angle = 2.0 * np.pi * np.arange(N_EMOTIONS) / N_EMOTIONS
    c = (size - 1) / 2.0
    r = 0.3 * size
    return np.stack([c + r * np.sin(angle), c - r * np.cos(angle)], axis=1)  # (row, col)


def blob_templates(size: int) -> np.ndarray:
    """(7, size, size) unit-peak Gaussians."""
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    sigma = 0.06 * size
    out = np.empty((N_EMOTIONS, size, size))
    for k, (r0, c0) in enumerate(blob_centers(size)):
        out[k] = np.exp(-((rows - r0) ** 2 + (cols - c0) ** 2) / (2.0 * sigma ** 2))
    return out


def render_video(amplitudes: np.ndarray, frames: int, size: int,
                 pixel_noise: float = 0.0, rng: np.random.Generator | None = None) -> np.ndarray:
    ramp = (np.arange(frames) + 1.0) / frames
    img = np.tensordot(amplitudes, blob_templates(size), axes=1)
    video = ramp[:, None, None] * img[None]
    video = np.repeat(video[:, None], 3, axis=1)
    if pixel_noise > 0:
        video = video + pixel_noise * rng.standard_normal(video.shape)
    return np.clip(video, 0.0, 1.0)


def render_audio(amplitudes: np.ndarray, seconds: float, sample_rate: int,
                 hiss: float, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(int(round(seconds * sample_rate))) / sample_rate
    tones = np.sin(2.0 * np.pi * np.asarray(TONES_HZ)[:, None] * t[None, :])
    signal = TONE_GAIN * (amplitudes @ tones)
    return signal + hiss * rng.standard_normal(t.size)


def make_clip(spec: SynthSpec, index: int) -> LabeledClip:
    rng = np.random.default_rng([spec.seed, index])
    label = rng.uniform(0.0, 1.0, N_EMOTIONS)
    s = spec.noise
    amp_v = np.clip(label + s * rng.standard_normal(N_EMOTIONS), 0.0, 1.0)
    amp_a = np.clip(label + s * rng.standard_normal(N_EMOTIONS), 0.0, 1.0)
    video = render_video(amp_v, spec.frames, spec.image_size, 0.1 * s, rng)
    audio = render_audio(amp_a, spec.audio_seconds, spec.sample_rate, spec.hiss + 0.05 * s, rng)
    return LabeledClip(f"clip{spec.seed:04d}_{index:05d}", video, Waveform(audio, spec.sample_rate), label)


def generate(spec: SynthSpec) -> list[LabeledClip]:
    return [make_clip(spec, i) for i in range(spec.n_samples)]


def split(dataset: list, train_frac: float, seed: int) -> tuple[list, list]:
    """Seeded shuffle split into disjoint (train, val) lists."""
    n = len(dataset)
    n_train = int(round(train_frac * n))
    if n_train <= 0:
        raise ValueError(f"train split would be empty (frac={train_frac}, n={n})")
    if n_train >= n:
        raise ValueError(f"validation split would be empty (frac={train_frac}, n={n})")
    order = np.random.default_rng(seed).permutation(n)
    return [dataset[i] for i in order[:n_train]], [dataset[i] for i in order[n_train:]]

