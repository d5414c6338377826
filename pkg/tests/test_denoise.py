import numpy as np
import pytest
from oracles import band_energies, band_snr_db, tone_in_noise

from diarkit.audio import AudioBuffer, Spectrogram, istft, read_wav, stft, write_wav
from diarkit.denoise import (
    SpectralGateConfig,
    estimate_noise_profile,
    gate_mask,
    make_augmentation_manifest,
    spectral_gate,
)
from diarkit.formats import parse_manifest

SR = 16000


def test_config_validation():
    with pytest.raises(ValueError):
        SpectralGateConfig(prop_decrease=1.5)
    with pytest.raises(ValueError):
        SpectralGateConfig(freq_smooth_bins=-1)


def test_profile_needs_two_frames():
    spec = stft(AudioBuffer(SR, np.ones(256)), 1024, 256)
    with pytest.raises(ValueError, match="at least 2 frames"):
        estimate_noise_profile(spec)


def test_constant_magnitude_has_zero_std():
    frames = np.full((10, 513), 3.0 + 4.0j)
    _, std = estimate_noise_profile(Spectrogram(frames, 1024, 256, SR, 2560))
    assert np.all(std == 0)


def test_white_noise_means_are_flat():
    x = np.random.default_rng(0).standard_normal(SR * 5)
    mean, _ = estimate_noise_profile(stft(AudioBuffer(SR, x)))
    # away from DC and Nyquist (where the DFT is real) the bins share one distribution
    assert np.std(mean[5:-5]) < 0.5
    assert np.ptp(mean[5:-5]) < 4.0


def test_tone_raises_mean_only_at_its_bin():
    t = np.arange(SR * 2)
    k = 28  # 437.5 Hz, an exact bin centre
    x = 0.5 * np.sin(2 * np.pi * k * t / 1024) + 1e-3 * np.random.default_rng(1).standard_normal(t.size)
    mean, _ = estimate_noise_profile(stft(AudioBuffer(SR, x)))
    assert np.argmax(mean) == k
    others = np.delete(mean, [k - 1, k, k + 1])
    assert mean[k] > others.max() + 30


def test_prop_decrease_zero_is_identity():
    x = np.random.default_rng(2).uniform(-0.5, 0.5, 12345)
    buf = AudioBuffer(SR, x)
    out = spectral_gate(buf, SpectralGateConfig(prop_decrease=0.0)).samples
    assert np.max(np.abs(out - istft(stft(buf)).samples)) < 1e-6
    assert np.max(np.abs(out - x)) < 1e-6


def test_silence_stays_silent():
    out = spectral_gate(AudioBuffer(SR, np.zeros(5000))).samples
    assert not np.any(out)


@pytest.mark.parametrize("n", [0, 1, 100, 1023, 1024, 1025, 4097])
def test_length_preserved(n):
    x = np.random.default_rng(n).uniform(-0.1, 0.1, n)
    assert len(spectral_gate(AudioBuffer(SR, x))) == n


def test_mask_range():
    x = np.random.default_rng(4).standard_normal(SR)
    spec = stft(AudioBuffer(SR, x))
    for prop in (0.0, 0.3, 1.0):
        m = gate_mask(spec, SpectralGateConfig(prop_decrease=prop))
        assert m.min() >= 1 - prop - 1e-12 and m.max() <= 1 + 1e-12


def test_unsmoothed_mask_is_binary():
    x = np.random.default_rng(5).standard_normal(SR)
    m = gate_mask(stft(AudioBuffer(SR, x)), SpectralGateConfig(freq_smooth_bins=0, time_smooth_frames=1))
    assert set(np.unique(m)) <= {0.0, 1.0}


def test_energy_non_increasing_in_prop_decrease():
    noisy, _ = tone_in_noise(seed=3, seconds=3.0, burst=(1.25, 1.75))
    energies = [
        np.sum(spectral_gate(AudioBuffer(SR, noisy), SpectralGateConfig(prop_decrease=p)).samples ** 2)
        for p in np.linspace(0, 1, 6)
    ]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(energies, energies[1:]))


@pytest.mark.parametrize("seed", range(3))
def test_tone_fixture_snr_and_band(seed):
    noisy, clean = tone_in_noise(seed)
    out = spectral_gate(AudioBuffer(SR, noisy)).samples
    assert band_snr_db(out) - band_snr_db(noisy) >= 6.0
    band_in, _ = band_energies(clean)
    band_out, _ = band_energies(out)
    assert abs(10 * np.log10(band_out / band_in)) <= 1.0


def test_second_pass_residual_guard():
    noisy, clean = tone_in_noise(0)
    once = spectral_gate(AudioBuffer(SR, noisy)).samples
    twice = spectral_gate(AudioBuffer(SR, once)).samples
    r1, r2 = np.sum((once - clean) ** 2), np.sum((twice - clean) ** 2)
    assert 10 * np.log10(r1 / r2) <= 3.0


# -- manifest ---------------------------------------------------------------


def _write(path, seed):
    x = np.random.default_rng(seed).uniform(-0.2, 0.2, 4000)
    path.write_bytes(write_wav(AudioBuffer(SR, x)))


def test_manifest_two_inputs(tmp_path):
    a, b = tmp_path / "a.wav", tmp_path / "b.wav"
    _write(a, 0)
    _write(b, 1)
    out = tmp_path / "out"
    rows = make_augmentation_manifest([a, b], out, workers=2)
    assert [r[0] for r in rows] == [str(a), str(b)]
    assert parse_manifest((out / "manifest.tsv").read_text()) == rows
    for _, den in rows:
        assert len(read_wav(open(den, "rb").read())) == 4000


def test_manifest_empty(tmp_path):
    rows = make_augmentation_manifest([], tmp_path / "out")
    assert rows == []
    assert (tmp_path / "out" / "manifest.tsv").read_text() == ""


def test_manifest_duplicates_rejected(tmp_path):
    a = tmp_path / "a.wav"
    _write(a, 0)
    with pytest.raises(ValueError, match="a_denoised.wav"):
        make_augmentation_manifest([a, a], tmp_path / "out")


def test_unreadable_input_writes_nothing(tmp_path):
    a, bad = tmp_path / "a.wav", tmp_path / "bad.wav"
    _write(a, 0)
    bad.write_bytes(b"junk")
    out = tmp_path / "out"
    with pytest.raises(ValueError, match="bad.wav"):
        make_augmentation_manifest([a, bad], out)
    assert not out.exists()
