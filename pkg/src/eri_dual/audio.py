"""MFCC front end: framing, Hann window, radix-2 FFT, mel filterbank, log, DCT-II, 8-frame stacking."""
from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LOG_FLOOR = 1e-10
STACK = 8


class AudioError(ValueError):
    pass


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise AudioError(f"sample rate must be positive, got {self.sample_rate}")


@dataclass(frozen=True)
class MfccConfig:
    sample_rate: int = 16000
    frame_len: int = 2048
    hop: int = 512
    n_mels: int = 128
    fmin: float = 0.0
    fmax: float = 8000.0


@dataclass
class MfccSequence:
    frames: np.ndarray  # (M, 1024)
    source_hop: int
    source_sample_rate: int


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft(x: np.ndarray) -> np.ndarray:
    """Iterative radix-2 Cooley-Tukey DFT along the last axis (length must be a power of two)."""
    x = np.asarray(x)
    n = x.shape[-1]
    if not _is_pow2(n):
        raise AudioError(f"FFT length must be a power of two, got {n}")
    lead = x.shape[:-1]
    a = x[..., _bit_reverse(n)].astype(np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        a = a.reshape(*lead, n // size, size)
        even = a[..., :half]
        odd = a[..., half:] * tw
        a = np.concatenate([even + odd, even - odd], axis=-1)
        size *= 2
    return a.reshape(*lead, n)


def hann(n: int) -> np.ndarray:
    # periodic form, matching spectral-analysis convention
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft_power(w: Waveform, frame_len: int = 2048, hop: int = 512, window: np.ndarray | None = None) -> np.ndarray:
    """Power spectrogram of shape (1 + len // hop, frame_len // 2 + 1), reflect-centered frames."""
    x = np.asarray(w.samples, dtype=np.float64)
    if x.size == 0:
        raise AudioError("empty waveform")
    if not _is_pow2(frame_len):
        raise AudioError(f"frame_len must be a power of two, got {frame_len}")
    if not 0 < hop <= frame_len:
        raise AudioError(f"hop must be in (0, frame_len], got {hop}")
    if not np.all(np.isfinite(x)):
        raise AudioError("waveform contains non-finite samples")
    win = hann(frame_len) if window is None else np.asarray(window, dtype=np.float64)
    half = frame_len // 2
    xp = np.pad(x, half, mode="reflect") if x.size > 1 else np.pad(x, half)
    n_frames = 1 + x.size // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = xp[idx] * win
    spec = fft(frames)[:, : half + 1]
    return spec.real ** 2 + spec.imag ** 2


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sr: int, n_fft: int, n_mels: int, fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular filters with unit peak, centres equally spaced in mel. Shape (n_mels, n_fft // 2 + 1)."""
    fmax = sr / 2 if fmax is None else fmax
    if not 0 <= fmin < fmax <= sr / 2:
        raise AudioError(f"need 0 <= fmin < fmax <= sr/2, got fmin={fmin}, fmax={fmax}, sr={sr}")
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(n_fft // 2 + 1) * sr / n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (mid - lo)
    falling = (hi - freqs[None, :]) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(~(fb > 0).any(axis=1))
    if empty.size:
        raise AudioError(
            f"mel filter {empty[0]} is empty: {n_mels} bands too many for n_fft={n_fft} at sr={sr}"
        )
    return fb


def dct2_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis; row k is coefficient k."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    m = np.cos(np.pi * k * (2 * i + 1) / (2 * n)) * np.sqrt(2.0 / n)
    m[0] /= np.sqrt(2.0)
    return m


def log_mel(w: Waveform, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    power = stft_power(w, cfg.frame_len, cfg.hop)
    fb = mel_filterbank(w.sample_rate, cfg.frame_len, cfg.n_mels, cfg.fmin, cfg.fmax)
    return np.log(power @ fb.T + LOG_FLOOR)


def mfcc(w: Waveform, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """Per-frame cepstra, shape (frames, n_mels); all coefficients are kept."""
    if w.sample_rate != cfg.sample_rate:
        raise AudioError(f"waveform rate {w.sample_rate} Hz does not match config {cfg.sample_rate} Hz")
    return log_mel(w, cfg) @ dct2_matrix(cfg.n_mels).T


def stack8(coeffs: np.ndarray) -> np.ndarray:
    """Concatenate disjoint groups of 8 consecutive frames; a trailing remainder is dropped."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    m0, d = coeffs.shape
    if m0 < STACK:
        raise AudioError(f"need at least {STACK} frames to stack, got {m0}")
    m = m0 // STACK
    return coeffs[: m * STACK].reshape(m, STACK * d)


def extract(w: Waveform, cfg: MfccConfig = MfccConfig()) -> MfccSequence:
    return MfccSequence(stack8(mfcc(w, cfg)), cfg.hop, w.sample_rate)


def read_wav(path: str | Path) -> Waveform:
    """Read 16-bit PCM WAV; multi-channel input is averaged to mono."""
    with wave.open(str(path), "rb") as f:
        if f.getsampwidth() != 2:
            raise AudioError(f"{path}: only 16-bit PCM is supported")
        channels = f.getnchannels()
        rate = f.getframerate()
        raw = f.readframes(f.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if channels > 1:
        pcm = pcm.reshape(-1, channels).mean(axis=1)
    return Waveform(pcm, rate)


def write_wav(path: str | Path, w: Waveform) -> None:
    pcm = np.clip(np.round(np.asarray(w.samples) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(w.sample_rate)
        f.writeframes(pcm.tobytes())
