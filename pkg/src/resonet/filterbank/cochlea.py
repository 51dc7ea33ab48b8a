"""Cochlear filterbank: cascade model with adaptive gain.

The front end follows the classic cascade formulation of a passive
cochlea: a pre-emphasis stage feeds a chain of second-order sections
whose center frequencies march from just below Nyquist down toward the
apex, each tap is half-wave rectified, four coupled automatic gain
control stages compress the rectified envelopes, and the result is
decimated to frame rate by block averaging.  All outputs are
nonnegative.

Channel spacing is proportional to the local critical bandwidth
``sqrt(f^2 + break_freq^2) / ear_q``; the defaults place exactly 78
channels for a 12.5 kHz corpus, and ``cochleagram`` refuses to run when
the designed channel count disagrees with ``expected_channels``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from ..dataset import AudioClip
from ..errors import ConfigError, DataError


@dataclass(frozen=True)
class CochlearConfig:
    ear_q: float = 8.0
    step_factor: float = 0.25
    break_freq: float = 1000.0
    min_freq: float = 44.0
    top_margin: float = 0.05          # fraction of Nyquist left above the first channel
    sharpness: float = 5.0            # pole bandwidth = channel bandwidth / sharpness
    zero_offset: float = 1.5          # zeros sit this factor above each channel center
    agc_targets: tuple[float, ...] = (0.0032, 0.0016, 0.0008, 0.0004)
    agc_taus: tuple[float, ...] = (0.64, 0.16, 0.04, 0.01)   # seconds
    decim_seconds: float = 0.02
    expected_channels: int = 78

    def __post_init__(self) -> None:
        if self.ear_q <= 0 or self.step_factor <= 0 or self.break_freq <= 0:
            raise ConfigError("ear_q, step_factor and break_freq must be positive")
        if self.min_freq <= 0:
            raise ConfigError("min_freq must be positive")
        if not 0.0 <= self.top_margin < 1.0:
            raise ConfigError("top_margin must lie in [0, 1)")
        if self.sharpness < 1.0:
            raise ConfigError("sharpness must be >= 1")
        if self.zero_offset <= 1.0:
            raise ConfigError("zero_offset must exceed 1")
        if len(self.agc_targets) != len(self.agc_taus):
            raise ConfigError("agc_targets and agc_taus must have equal length")
        if any(t <= 0 for t in self.agc_targets) or any(t <= 0 for t in self.agc_taus):
            raise ConfigError("AGC targets and time constants must be positive")
        if self.decim_seconds <= 0:
            raise ConfigError("decim_seconds must be positive")
        if self.expected_channels < 1:
            raise ConfigError("expected_channels must be >= 1")


def critical_bandwidth(f: float, cfg: CochlearConfig) -> float:
    return math.sqrt(f * f + cfg.break_freq ** 2) / cfg.ear_q


def design_center_freqs(sample_rate: int, cfg: CochlearConfig = CochlearConfig()) -> np.ndarray:
    """Channel center frequencies in Hz, ordered base to apex (high to low)."""
    f = sample_rate / 2.0 * (1.0 - cfg.top_margin)
    cfs = []
    while f > cfg.min_freq:
        cfs.append(f)
        f -= cfg.step_factor * critical_bandwidth(f, cfg)
    if not cfs:
        raise ConfigError("cochlear design produced no channels; check min_freq")
    return np.array(cfs)


def _section_coeffs(cf: float, cfg: CochlearConfig, sample_rate: int):
    """Biquad for one cascade stage: resonant poles at the channel center,
    zeros half an octave-ish above it, unity gain at DC."""
    bw = critical_bandwidth(cf, cfg)
    theta_p = 2.0 * math.pi * cf / sample_rate
    r_p = math.exp(-math.pi * bw / (cfg.sharpness * sample_rate))
    f_z = min(cfg.zero_offset * cf, 0.49 * sample_rate)
    theta_z = 2.0 * math.pi * f_z / sample_rate
    r_z = math.exp(-math.pi * bw / sample_rate)
    b = np.array([1.0, -2.0 * r_z * math.cos(theta_z), r_z * r_z])
    a = np.array([1.0, -2.0 * r_p * math.cos(theta_p), r_p * r_p])
    return b * (a.sum() / b.sum()), a


def _agc_stage(x: np.ndarray, eps: float, target: float) -> np.ndarray:
    """One adaptive gain stage, coupled across neighboring channels.

    Per sample each channel is scaled by ``1 - state`` (clamped to
    [0, 1]); the state tracks the scaled output relative to its target
    and is smoothed spatially with a [1/4, 1/2, 1/4] kernel so loud
    channels also depress their neighbors.
    """
    n_ch, n_t = x.shape
    out = np.empty_like(x)
    state = np.zeros(n_ch)
    for t in range(n_t):
        gain = np.clip(1.0 - state, 0.0, 1.0)
        y = x[:, t] * gain
        out[:, t] = y
        state = state + eps * (y / target - state)
        smoothed = state.copy()
        if n_ch > 2:
            smoothed[1:-1] = 0.25 * state[:-2] + 0.5 * state[1:-1] + 0.25 * state[2:]
        if n_ch > 1:
            smoothed[0] = 0.75 * state[0] + 0.25 * state[1]
            smoothed[-1] = 0.25 * state[-2] + 0.75 * state[-1]
        state = smoothed
    return out


def cochleagram(clip: AudioClip, cfg: CochlearConfig = CochlearConfig()) -> np.ndarray:
    """Nonnegative cochlear feature matrix, shape (n_channels, n_frames)."""
    sr = clip.sample_rate
    cfs = design_center_freqs(sr, cfg)
    if cfs.size != cfg.expected_channels:
        raise ConfigError(
            f"cochlear design yields {cfs.size} channels at {sr} Hz but "
            f"expected_channels is {cfg.expected_channels}; adjust the "
            f"spacing parameters or the expectation")
    decim = int(round(cfg.decim_seconds * sr))
    if clip.samples.size < decim:
        raise DataError(
            f"clip {clip.clip_id!r} shorter than one {decim}-sample output frame")

    # outer/middle-ear pre-emphasis: first-order high-pass
    a_pre = math.exp(-2.0 * math.pi * 300.0 / sr)
    x = np.empty_like(clip.samples)
    x[0] = clip.samples[0]
    x[1:] = clip.samples[1:] - a_pre * clip.samples[:-1]

    taps = np.empty((cfs.size, x.size))
    for k, cf in enumerate(cfs):
        b, a = _section_coeffs(cf, cfg, sr)
        x = lfilter(b, a, x)
        taps[k] = x

    rect = np.maximum(taps, 0.0)
    for tau, target in zip(cfg.agc_taus, cfg.agc_targets):
        eps = 1.0 - math.exp(-1.0 / (tau * sr))
        rect = _agc_stage(rect, eps, target)

    n_frames = rect.shape[1] // decim
    trimmed = rect[:, : n_frames * decim]
    return trimmed.reshape(cfs.size, n_frames, decim).mean(axis=2)
