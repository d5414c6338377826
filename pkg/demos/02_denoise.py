"""
Stationary spectral gating
==========================

Hum and hiss that do not change over a recording can be learned from the
recording itself. Each frequency bin gets a threshold a few standard
deviations above its mean level; time-frequency cells below it are
attenuated.
"""

import tempfile
from pathlib import Path

import numpy as np

from diarkit.audio import AudioBuffer, read_wav, stft, write_wav
from diarkit.denoise import SpectralGateConfig, make_augmentation_manifest, spectral_gate

sr = 16000
rng = np.random.default_rng(0)
t = np.arange(10 * sr) / sr
noise = rng.normal(0, 0.05, t.size)

# half a second of a 440 Hz tone in the middle of ten seconds of noise
burst = (t >= 4.75) & (t < 5.25)
clean = np.where(burst, 0.5 * np.sin(2 * np.pi * 440 * t), 0.0)
noisy = AudioBuffer(sr, clean + noise)


def snr_db(x):
    return 10 * np.log10(np.sum(clean**2) / np.sum((x - clean) ** 2))


out = spectral_gate(noisy, SpectralGateConfig())
print(f"SNR before {snr_db(noisy.samples):6.2f} dB, after {snr_db(out.samples):6.2f} dB")

# %%
# The tone is short, so it barely moves the per-bin statistics and stays
# above the threshold. A tone running for the whole file would look
# stationary and be removed along with the noise.
spec_in, spec_out = stft(noisy), stft(out)
k = int(round(440 * spec_in.fft_size / sr))
mid = spec_in.frames.shape[0] // 2
print("440 Hz bin at the burst, in/out magnitude:",
      round(abs(spec_in.frames[mid, k]), 2), round(abs(spec_out.frames[mid, k]), 2))

# %%
# ``prop_decrease`` scales how far gated cells are pulled down. At zero the
# gate is a no-op apart from STFT round-off.
untouched = spectral_gate(noisy, SpectralGateConfig(prop_decrease=0.0))
print("max deviation at prop_decrease=0:", np.max(np.abs(untouched.samples - noisy.samples)))

# %%
# For augmentation the denoised copies are written beside a manifest that
# pairs each original with its cleaned version.
with tempfile.TemporaryDirectory() as tmp:
    src = Path(tmp) / "session.wav"
    src.write_bytes(write_wav(noisy))
    rows = make_augmentation_manifest([src], Path(tmp) / "aug")
    print((Path(tmp) / "aug" / "manifest.tsv").read_text().replace(tmp, "<tmp>"))
    back = read_wav(Path(rows[0][1]).read_bytes())
    print(back.sample_rate_hz, len(back.samples) == len(noisy.samples))
