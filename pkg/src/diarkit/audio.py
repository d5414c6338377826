"""Mono WAV I/O and Hann-window STFT analysis/synthesis."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

_PCM = 1
_IEEE_FLOAT = 3
_EXTENSIBLE = 0xFFFE


class AudioFormatError(ValueError):
    pass


@dataclass(eq=False)
class AudioBuffer:
    sample_rate_hz: int
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if int(self.sample_rate_hz) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        self.sample_rate_hz = int(self.sample_rate_hz)
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio samples must be finite")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


@dataclass(eq=False)
class Spectrogram:
    """Complex STFT frames, shape ``(n_frames, fft_size // 2 + 1)``.

    ``length`` is the number of samples of the analysed signal, needed to trim
    the synthesis output back to size.
    """

    frames: np.ndarray
    fft_size: int
    hop: int
    sample_rate_hz: int
    length: int

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.complex128)
        if self.frames.ndim != 2 or self.frames.shape[1] != self.fft_size // 2 + 1:
            raise ValueError(
                f"expected frames of shape (T, {self.fft_size // 2 + 1}), got {self.frames.shape}"
            )
        if self.hop > self.fft_size:
            raise ValueError("hop must not exceed fft_size")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


def read_wav(data: bytes) -> AudioBuffer:
    """Decode a mono RIFF/WAVE file (16-bit PCM or 32-bit float)."""
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise AudioFormatError("not a RIFF/WAVE file")
    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4 : pos + 8])
        body = data[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise AudioFormatError("truncated fmt chunk")
            tag, channels, rate, _, _, bits = struct.unpack("<HHIIHH", body[:16])
            if tag == _EXTENSIBLE and len(body) >= 26:
                (tag,) = struct.unpack("<H", body[24:26])
            fmt = (tag, channels, rate, bits)
        elif chunk_id == b"data":
            payload = body
        pos += 8 + size + (size & 1)
    if fmt is None or payload is None:
        raise AudioFormatError("missing fmt or data chunk")
    tag, channels, rate, bits = fmt
    if channels != 1:
        raise AudioFormatError(
            f"expected mono audio, got {channels} channels; downmix to one channel first"
        )
    if tag == _PCM and bits == 16:
        n = len(payload) // 2
        samples = np.frombuffer(payload[: 2 * n], dtype="<i2").astype(np.float64) / 32768.0
    elif tag == _IEEE_FLOAT and bits == 32:
        n = len(payload) // 4
        samples = np.frombuffer(payload[: 4 * n], dtype="<f4").astype(np.float64)
    else:
        raise AudioFormatError(f"unsupported codec (format tag {tag}, {bits} bits)")
    return AudioBuffer(rate, samples)


def write_wav(buf: AudioBuffer) -> bytes:
    """Encode as 16-bit PCM mono. Out-of-range samples are clipped with a warning."""
    x = buf.samples
    n_clipped = int(np.count_nonzero((x > 1.0) | (x < -1.0)))
    if n_clipped:
        warnings.warn(f"clipped {n_clipped} samples outside [-1, 1]", RuntimeWarning, stacklevel=2)
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(pcm),
        b"WAVE",
        b"fmt ",
        16,
        _PCM,
        1,
        buf.sample_rate_hz,
        buf.sample_rate_hz * 2,
        2,
        16,
        b"data",
        len(pcm),
    )
    return header + pcm


def hann(n: int) -> np.ndarray:
    """Periodic Hann window (COLA at hop = n/2, n/4, ...)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _check_geometry(fft_size: int, hop: int) -> None:
    if fft_size <= 0 or fft_size & (fft_size - 1):
        raise ValueError(f"fft_size must be a power of two, got {fft_size}")
    if hop <= 0 or hop > fft_size:
        raise ValueError(f"hop must be in (0, fft_size], got {hop}")
    if fft_size % hop:
        raise ValueError(f"hop {hop} must divide fft_size {fft_size}")


def stft(buf: AudioBuffer, fft_size: int = 1024, hop: int = 256) -> Spectrogram:
    """Hann-windowed STFT.

    The signal is left-padded with ``fft_size - hop`` zeros (and right-padded as
    needed); frame ``t`` covers padded samples ``[t*hop, t*hop + fft_size)``.
    This yields ``ceil(N / hop)`` frames and every input sample is seen by at
    least one frame with a non-zero window weight.
    """
    _check_geometry(fft_size, hop)
    x = buf.samples
    n = x.size
    n_frames = -(-n // hop)
    lead = fft_size - hop
    padded = np.zeros(lead + n_frames * hop + hop)
    padded[lead : lead + n] = x
    if n_frames:
        idx = np.arange(n_frames)[:, None] * hop + np.arange(fft_size)[None, :]
        frames = np.fft.rfft(padded[idx] * hann(fft_size), axis=1)
    else:
        frames = np.zeros((0, fft_size // 2 + 1), dtype=np.complex128)
    return Spectrogram(frames, fft_size, hop, buf.sample_rate_hz, n)


def istft(spec: Spectrogram) -> AudioBuffer:
    """Weighted overlap-add inverse of :func:`stft`."""
    fft_size, hop = spec.fft_size, spec.hop
    _check_geometry(fft_size, hop)
    n_frames = spec.n_frames
    if n_frames != -(-spec.length // hop):
        raise ValueError(
            f"spectrogram has {n_frames} frames but length {spec.length} implies {-(-spec.length // hop)}"
        )
    lead = fft_size - hop
    total = lead + n_frames * hop + hop
    out = np.zeros(total)
    norm = np.zeros(total)
    win = hann(fft_size)
    if n_frames:
        chunks = np.fft.irfft(spec.frames, n=fft_size, axis=1) * win
        for t in range(n_frames):
            out[t * hop : t * hop + fft_size] += chunks[t]
            norm[t * hop : t * hop + fft_size] += win * win
    seg = slice(lead, lead + spec.length)
    y = out[seg]
    w = norm[seg]
    nz = w > 1e-12
    y = np.where(nz, y / np.where(nz, w, 1.0), 0.0)
    return AudioBuffer(spec.sample_rate_hz, y)
