"""On-disk datasets (manifest + per-clip directories) and batched feature arrays."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import audio, tnsr
from .config import RunConfig
from .fusion import EMOTIONS
from .synth import LabeledClip

MANIFEST_HEADER = "# id video audio " + " ".join(EMOTIONS)


def write_dataset(root: str | Path, clips: list[LabeledClip], manifest: str = "manifest.txt") -> Path:
    """One directory per clip (video.tnsr, audio.wav, label.txt) plus a manifest line per clip."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for clip in clips:
        d = root / clip.id
        d.mkdir(exist_ok=True)
        tnsr.save(d / "video.tnsr", {"video": clip.video})
        audio.write_wav(d / "audio.wav", clip.audio)
        (d / "label.txt").write_text(
            "".join(f"{name} = {v!r}\n" for name, v in zip(EMOTIONS, clip.label))
        )
    return write_manifest(root / manifest, clips)


def write_manifest(path: str | Path, clips: list[LabeledClip]) -> Path:
    path = Path(path)
    lines = [MANIFEST_HEADER]
    for clip in clips:
        labels = " ".join(repr(float(v)) for v in clip.label)
        lines.append(f"{clip.id} {clip.id}/video.tnsr {clip.id}/audio.wav {labels}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(path: str | Path) -> list[LabeledClip]:
    path = Path(path)
    root = path.parent
    clips = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3 + len(EMOTIONS):
            raise ValueError(f"{path}:{lineno}: expected {3 + len(EMOTIONS)} fields, got {len(parts)}")
        cid, vpath, apath = parts[:3]
        label = np.array([float(v) for v in parts[3:]])
        video = tnsr.load(root / vpath)["video"].astype(np.float64)
        clips.append(LabeledClip(cid, video, audio.read_wav(root / apath), label))
    return clips


@dataclass
class Arrays:
    """Stacked model inputs for one dataset. Absent modalities are None."""

    ids: list[str]
    labels: np.ndarray
    videos: np.ndarray | None = None
    mfcc: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.ids)


def mfcc_config(cfg: RunConfig) -> audio.MfccConfig:
    return audio.MfccConfig(cfg.sample_rate, cfg.frame_len, cfg.hop, cfg.n_mels, cfg.fmin, cfg.fmax)


def prepare(clips: list[LabeledClip], cfg: RunConfig, stage: str) -> Arrays:
    arrays = Arrays([c.id for c in clips], np.stack([c.label for c in clips]))
    if stage in ("video", "fusion"):
        arrays.videos = np.stack([c.video for c in clips])
        if arrays.videos.shape[1] != cfg.frames or arrays.videos.shape[-1] != cfg.image_size:
            raise ValueError(
                f"clips have shape {arrays.videos.shape[1:]}, config expects "
                f"{cfg.frames} frames of {cfg.image_size}x{cfg.image_size}"
            )
    if stage in ("audio", "fusion"):
        mc = mfcc_config(cfg)
        seqs = [audio.extract(c.audio, mc).frames for c in clips]
        lengths = {s.shape[0] for s in seqs}
        if len(lengths) != 1:
            raise ValueError(f"audio clips yield differing MFCC lengths {sorted(lengths)}")
        arrays.mfcc = np.stack(seqs)
    return arrays
