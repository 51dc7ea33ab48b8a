import numpy as np
import pytest

from resonet.dataset import AudioClip, synth_digit
from resonet.errors import ConfigError, DataError, DegenerateInputWarning
from resonet.filterbank import (FeatureMatrix, exponent_transform, featurize,
                                normalize_maxabs, pad_to,
                                spectro_hp_from_complex, stft_complex)
from resonet.filterbank.cochlea import (CochlearConfig, cochleagram,
                                        design_center_freqs)
from resonet.filterbank.mfcc import MfccConfig, mel_filterbank, mfcc
from resonet.filterbank.stft import StftConfig, frame_count, window_values


def _clip(samples, rate=12500):
    return AudioClip(np.asarray(samples, dtype=np.float64), rate, "t")


# ---------------------------------------------------------------------------
# STFT

def test_frame_count_matches_naive_slicing():
    cfg = StftConfig(fft_size=128, hop=64)
    for n in (128, 129, 191, 192, 500, 5000):
        naive = 0
        pos = 0
        while pos + cfg.fft_size <= n:
            naive += 1
            pos += cfg.hop
        assert frame_count(n, cfg) == naive


def test_frame_count_rejects_short_clips():
    with pytest.raises(DataError):
        frame_count(127, StftConfig())


def test_window_values_periodic_hann():
    w = window_values("hann", 8)
    ref = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(8) / 8)
    assert np.allclose(w, ref, atol=0)
    assert w[0] == 0.0  # periodic, not symmetric: first sample is zero
    assert window_values("rectangular", 8) == pytest.approx(np.ones(8))


def test_stft_matches_naive_dft(rng):
    """Windowed frames against an explicit DFT matrix."""
    cfg = StftConfig(fft_size=32, hop=16, window="hann")
    x = rng.standard_normal(200) * 0.3
    z = stft_complex(_clip(x), cfg)
    k = np.arange(17)[:, None]
    n = np.arange(32)[None, :]
    dft = np.exp(-2j * np.pi * k * n / 32)
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(32) / 32)
    for tau in range(z.shape[1]):
        frame = x[tau * 16:tau * 16 + 32] * w
        assert np.max(np.abs(z[:, tau] - dft @ frame)) < 1e-12


def test_stft_shape_and_no_padding():
    cfg = StftConfig()
    clip = _clip(np.zeros(128 + 64 * 5 + 63))
    z = stft_complex(clip, cfg)
    assert z.shape == (65, 6)  # the trailing 63 samples never form a frame


def test_stft_config_validation():
    with pytest.raises(ConfigError):
        StftConfig(fft_size=100)  # not a power of two
    with pytest.raises(ConfigError):
        StftConfig(hop=0)
    with pytest.raises(ConfigError):
        StftConfig(hop=256)
    with pytest.raises(ConfigError):
        StftConfig(window="kaiser")


# ---------------------------------------------------------------------------
# normalization and pointwise transforms

def test_normalize_maxabs_unit_peak(rng):
    x = rng.standard_normal((9, 14)) * 3.7
    y = normalize_maxabs(x)
    assert np.max(np.abs(y)) == pytest.approx(1.0)
    assert np.allclose(y * np.max(np.abs(x)), x)


def test_normalize_maxabs_zero_input_warns():
    with pytest.warns(DegenerateInputWarning):
        y = normalize_maxabs(np.zeros((3, 3)))
    assert np.all(y == 0.0)


def test_exponent_transform_frozen_values():
    x = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
    # alpha=0 collapses everything to one
    assert np.array_equal(exponent_transform(x, 0.0), np.ones(5))
    # alpha=1 is the identity
    assert np.array_equal(exponent_transform(x, 1.0), x)
    # integer alphas follow signed powers
    assert exponent_transform(x, 3.0) == pytest.approx([-1, -0.125, 0, 0.125, 1])
    assert exponent_transform(x, 2.0) == pytest.approx([1, 0.25, 0, 0.25, 1])
    # half-integer alpha sits on the branch midpoint: cos(pi/2) kills the
    # negative side up to rounding
    out = exponent_transform(np.array([-0.5]), 2.5)
    assert abs(out[0]) < 1e-15


def test_exponent_transform_matches_complex_power(rng):
    """Principal-branch complex evaluation is the oracle."""
    x = rng.uniform(-1.0, 1.0, size=3000)
    x[np.abs(x) < 1e-6] = 0.5
    for alpha in (0.3, 1.0, 1.7, 2.0, 2.5, 3.9, 5.0):
        got = exponent_transform(x, alpha)
        want = np.real(np.power(x.astype(complex), alpha))
        assert np.max(np.abs(got - want)) < 1e-12


def test_exponent_transform_rejects_bad_alpha():
    with pytest.raises(ConfigError):
        exponent_transform(np.zeros(3), np.nan)
    with pytest.raises(ConfigError):
        exponent_transform(np.zeros(3), np.inf)


def test_spectro_hp_frozen_values():
    # hp on a pure-real unit entry: |sin 1| - |cos 0| = |sin 1| - 1
    z = np.array([[1.0 + 0.0j]])
    out = spectro_hp_from_complex(z)
    assert out[0, 0] == pytest.approx(abs(np.sin(1.0)) - 1.0)
    # joint scale: imaginary part twice the real part means re maps to 0.5
    z = np.array([[1.0 + 2.0j]])
    out = spectro_hp_from_complex(z)
    want = abs(np.sin(np.sqrt(0.5))) - abs(np.cos(np.sqrt(1.0)))
    assert out[0, 0] == pytest.approx(want)


def test_spectro_hp_zero_matrix_warns():
    with pytest.warns(DegenerateInputWarning):
        out = spectro_hp_from_complex(np.zeros((2, 2), dtype=complex))
    assert np.all(out == -1.0)  # |sin 0| - |cos 0|


def test_spectro_hp_range():
    rng = np.random.default_rng(7)
    z = rng.standard_normal((20, 20)) + 1j * rng.standard_normal((20, 20))
    out = spectro_hp_from_complex(z)
    assert np.all(out >= -1.0) and np.all(out <= 1.0)


# ---------------------------------------------------------------------------
# MFCC

def test_mel_filterbank_shape_and_coverage():
    fb = mel_filterbank(26, 512, 12500)
    assert fb.shape == (26, 257)
    assert np.all(fb >= 0.0)
    # every filter has some support, and supports march upward in frequency
    peaks = np.argmax(fb, axis=1)
    assert np.all(np.diff(peaks) > 0)
    assert fb.sum() > 0


def test_mfcc_output_shape():
    clip = synth_digit(3, 100, 0)
    cfg = MfccConfig()
    out = mfcc(clip, cfg)
    assert out.shape[0] == cfg.n_coeffs
    # 25 ms window / 10 ms hop over ~0.5 s
    assert 40 <= out.shape[1] <= 60
    assert np.all(np.isfinite(out))


def test_mfcc_dct_is_orthonormal():
    """The decorrelation stage must match an explicit cosine matrix."""
    from scipy.fft import dct
    n = 26
    eye = np.eye(n)
    got = dct(eye, type=2, norm="ortho", axis=0)
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    ref = np.sqrt(2.0 / n) * np.cos(np.pi * k * (2 * j + 1) / (2 * n))
    ref[0] /= np.sqrt(2.0)
    assert np.max(np.abs(got - ref)) < 1e-12


def test_mfcc_handles_quiet_input():
    clip = _clip(np.full(4000, 1e-8))
    out = mfcc(clip)
    assert np.all(np.isfinite(out))


# ---------------------------------------------------------------------------
# cochleagram

def test_cochlea_channel_count_at_default_rate():
    cfs = design_center_freqs(12500)
    assert cfs.size == 78
    assert np.all(np.diff(cfs) < 0)  # designed high to low
    assert cfs.min() > 40.0
    assert cfs.max() < 6250.0


def test_cochleagram_shape_and_sign():
    clip = synth_digit(5, 100, 1)
    out = cochleagram(clip)
    assert out.shape[0] == 78
    # 20 ms blocks over ~0.5 s
    assert 20 <= out.shape[1] <= 30
    assert np.all(out >= 0.0)
    assert np.any(out > 0.0)


def test_cochleagram_mismatched_channel_count():
    cfg = CochlearConfig(expected_channels=99)
    with pytest.raises(ConfigError, match="99"):
        cochleagram(synth_digit(0, 100, 0), cfg)


def test_cochleagram_tracks_tone_frequency():
    """Higher tones must peak in higher-frequency (lower-index) channels."""
    t = np.arange(6250) / 12500.0
    peaks = []
    for f in (300.0, 1000.0, 3000.0):
        env = np.hanning(t.size)
        clip = _clip(0.8 * np.sin(2 * np.pi * f * t) * env)
        out = cochleagram(clip)
        peaks.append(int(np.argmax(out.sum(axis=1))))
    assert peaks[0] > peaks[1] > peaks[2]


def test_cochleagram_agc_compresses_level():
    """A tenfold broadband level step shrinks well below tenfold.

    Broadband input loads every channel, so the spatially coupled gain
    control acts like a plain per-channel compressor; the steady-state
    window skips the adaptation transient.
    """
    rng = np.random.default_rng(5)
    noise = rng.standard_normal(12500)
    noise /= np.max(np.abs(noise))
    loud = cochleagram(_clip(0.9 * noise))
    quiet = cochleagram(_clip(0.09 * noise))
    r_out = loud[:, 30:].mean() / quiet[:, 30:].mean()
    assert 1.0 < r_out < 5.0


# ---------------------------------------------------------------------------
# dispatch and padding

def test_featurize_dispatch_shapes():
    clip = synth_digit(7, 101, 2)
    for kind, rows in (("spectro_exp", 65), ("spectro_real", 65),
                       ("spectro_hp", 65), ("mfcc", 13), ("cochlear", 78)):
        alpha = 2.0 if kind == "spectro_exp" else None
        fm = featurize(clip, kind, alpha)
        assert isinstance(fm, FeatureMatrix)
        assert fm.n_rows == rows


def test_featurize_requires_alpha_only_for_exp():
    clip = synth_digit(7, 101, 2)
    with pytest.raises(ConfigError):
        featurize(clip, "spectro_exp", None)
    with pytest.raises(ConfigError):
        featurize(clip, "nosuch", None)


def test_spectro_real_is_alpha_one():
    clip = synth_digit(1, 102, 3)
    a = featurize(clip, "spectro_real")
    b = featurize(clip, "spectro_exp", 1.0)
    assert np.array_equal(a.values, b.values)


def test_pad_to_extends_with_zero_frames():
    fm = FeatureMatrix(np.ones((3, 4)), "mfcc", "clip")
    out = pad_to(fm, 6)
    assert out.values.shape == (3, 6)
    assert np.all(out.values[:, :4] == 1.0)
    assert np.all(out.values[:, 4:] == 0.0)
    assert pad_to(fm, 4) is fm
    with pytest.raises(DataError):
        pad_to(fm, 3)
