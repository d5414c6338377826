"""Stationary spectral-gating noise reduction.

The noise profile is estimated from the whole recording: per frequency bin,
the mean and standard deviation of the log-magnitude over all STFT frames.
Cells louder than ``mean + n_std_thresh * std`` pass, the rest are attenuated
by ``prop_decrease``. The binary mask is smoothed with a box filter before it
is applied to the complex spectrogram.

Denoising is meant for preprocessing and training-set augmentation. Applied at
inference time it tends to erase quiet speakers, so nothing in the scoring
path calls it implicitly.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.ndimage import uniform_filter

from .audio import AudioBuffer, Spectrogram, istft, read_wav, stft, write_wav
from .formats import write_manifest

_LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class SpectralGateConfig:
    fft_size: int = 1024
    hop: int = 256
    n_std_thresh: float = 1.5
    prop_decrease: float = 1.0
    freq_smooth_bins: int = 3
    time_smooth_frames: int = 5

    def __post_init__(self):
        if not 0.0 <= self.prop_decrease <= 1.0:
            raise ValueError(f"prop_decrease must be in [0, 1], got {self.prop_decrease}")
        if self.freq_smooth_bins < 0 or self.time_smooth_frames < 0:
            raise ValueError("smoothing widths must be >= 0")


def _log_magnitude(frames: np.ndarray) -> np.ndarray:
    return 20.0 * np.log10(np.maximum(np.abs(frames), _LOG_FLOOR))


def estimate_noise_profile(spec: Spectrogram) -> tuple[np.ndarray, np.ndarray]:
    """Per-bin mean and standard deviation of the log-magnitude (dB).

    Returns:
        ``(mean, std)``, each of length ``fft_size // 2 + 1``.
    """
    if spec.n_frames < 2:
        raise ValueError(f"need at least 2 frames to estimate noise, got {spec.n_frames}")
    logmag = _log_magnitude(spec.frames)
    # std is shift-invariant; centring on the first frame makes constant bins exactly 0
    return logmag.mean(axis=0), (logmag - logmag[:1]).std(axis=0)


def gate_mask(spec: Spectrogram, cfg: SpectralGateConfig) -> np.ndarray:
    """Smoothed time-frequency gain in ``[1 - prop_decrease, 1]``."""
    mean, std = estimate_noise_profile(spec)
    thresh = mean + cfg.n_std_thresh * std
    mask = np.where(_log_magnitude(spec.frames) > thresh[None, :], 1.0, 1.0 - cfg.prop_decrease)
    # box sizes 0 and 1 both mean "no smoothing"
    size = (max(cfg.time_smooth_frames, 1), max(cfg.freq_smooth_bins, 1))
    if size != (1, 1):
        mask = uniform_filter(mask, size=size, mode="nearest")
    return mask


def spectral_gate(buf: AudioBuffer, cfg: SpectralGateConfig | None = None) -> AudioBuffer:
    cfg = cfg or SpectralGateConfig()
    if len(buf) == 0:
        return AudioBuffer(buf.sample_rate_hz, np.zeros(0))
    # Reflect-pad so every original sample sits under a full set of
    # overlapping windows; zero padding would skew the noise statistics.
    pad = cfg.fft_size
    padded = AudioBuffer(buf.sample_rate_hz, np.pad(buf.samples, pad, mode="reflect"))
    spec = stft(padded, cfg.fft_size, cfg.hop)
    if spec.n_frames >= 2:
        spec = Spectrogram(
            spec.frames * gate_mask(spec, cfg), spec.fft_size, spec.hop, spec.sample_rate_hz, spec.length
        )
    out = istft(spec).samples[pad : pad + len(buf)]
    return AudioBuffer(buf.sample_rate_hz, out)


def _denoised_name(path: Path) -> str:
    return f"{path.stem}_denoised.wav"


def make_augmentation_manifest(
    inputs: Sequence[str | os.PathLike],
    out_dir: str | os.PathLike,
    cfg: SpectralGateConfig | None = None,
    workers: int = 1,
    manifest_name: str | None = "manifest.tsv",
) -> list[tuple[str, str]]:
    """Write a denoised copy of every input WAV next to a pairing manifest.

    All inputs are read and validated before anything is written, so a bad
    input leaves ``out_dir`` untouched. Rows follow input order.

    Args:
        inputs: mono WAV paths.
        out_dir: destination directory, created if missing.
        cfg: gate parameters.
        workers: number of files denoised concurrently.
        manifest_name: file name for the manifest inside ``out_dir``; ``None``
            skips writing it.

    Returns:
        ``(original, denoised)`` path pairs.
    """
    cfg = cfg or SpectralGateConfig()
    paths = [Path(p) for p in inputs]
    seen: dict[str, Path] = {}
    for p in paths:
        name = _denoised_name(p)
        if name in seen:
            raise ValueError(f"inputs {seen[name]} and {p} would both be written to {name}")
        seen[name] = p

    buffers = []
    for p in paths:
        try:
            buffers.append(read_wav(p.read_bytes()))
        except (OSError, ValueError) as exc:
            raise ValueError(f"cannot read {p}: {exc}") from exc

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def work(item):
        path, buf = item
        target = out / _denoised_name(path)
        target.write_bytes(write_wav(spectral_gate(buf, cfg)))
        return str(path), str(target)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(work, zip(paths, buffers)))

    if manifest_name is not None:
        (out / manifest_name).write_text(write_manifest(rows))
    return rows
