"""Acoustic front ends.

``featurize`` dispatches a clip through one of five filter kinds:

* ``spectro_real`` -- max-abs-normalized real part of the short-time spectrum
* ``spectro_exp``  -- the same, raised elementwise to a real exponent
* ``spectro_hp``   -- hardware-inspired sin/cos map of the complex spectrum
* ``mfcc``         -- mel cepstra
* ``cochlear``     -- cascade cochlear model with adaptive gain

All feature matrices are float64 with one column per analysis frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import AudioClip
from ..errors import ConfigError, DataError
from .cochlea import CochlearConfig, cochleagram, design_center_freqs
from .mfcc import MfccConfig, mfcc
from .stft import StftConfig, stft_complex
from .transforms import exponent_transform, normalize_maxabs, spectro_hp_from_complex

FILTER_KINDS = ("spectro_real", "spectro_exp", "spectro_hp", "mfcc", "cochlear")

__all__ = [
    "FILTER_KINDS",
    "FeatureMatrix",
    "StftConfig",
    "MfccConfig",
    "CochlearConfig",
    "stft_complex",
    "normalize_maxabs",
    "exponent_transform",
    "spectro_hp_from_complex",
    "mfcc",
    "cochleagram",
    "design_center_freqs",
    "featurize",
    "pad_to",
]


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-clip feature array of shape (n_rows, n_frames)."""

    values: np.ndarray
    filter_kind: str
    clip_id: str
    alpha: float | None = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise DataError(f"feature matrix for {self.clip_id!r} must be 2-d and nonempty")
        if not np.all(np.isfinite(arr)):
            raise DataError(f"feature matrix for {self.clip_id!r} has non-finite entries")
        if self.filter_kind not in FILTER_KINDS:
            raise DataError(f"unknown filter kind {self.filter_kind!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


def featurize(clip: AudioClip, kind: str, alpha: float | None = None, *,
              stft_cfg: StftConfig = StftConfig(),
              mfcc_cfg: MfccConfig = MfccConfig(),
              cochlear_cfg: CochlearConfig = CochlearConfig()) -> FeatureMatrix:
    """Run one clip through the selected front end."""
    if kind == "spectro_real" or kind == "spectro_exp":
        if kind == "spectro_real":
            alpha = 1.0
        elif alpha is None:
            raise ConfigError("spectro_exp requires an exponent")
        x = normalize_maxabs(np.real(stft_complex(clip, stft_cfg)))
        vals = exponent_transform(x, alpha)
        return FeatureMatrix(vals, kind, clip.clip_id, alpha=alpha)
    if kind == "spectro_hp":
        vals = spectro_hp_from_complex(stft_complex(clip, stft_cfg))
        return FeatureMatrix(vals, kind, clip.clip_id)
    if kind == "mfcc":
        return FeatureMatrix(mfcc(clip, mfcc_cfg), kind, clip.clip_id)
    if kind == "cochlear":
        return FeatureMatrix(cochleagram(clip, cochlear_cfg), kind, clip.clip_id)
    raise ConfigError(f"unknown filter kind {kind!r}, expected one of {FILTER_KINDS}")


def pad_to(fm: FeatureMatrix, n_frames: int) -> FeatureMatrix:
    """Append zero columns on the right until the matrix has n_frames."""
    if fm.n_frames > n_frames:
        raise DataError(
            f"cannot pad {fm.clip_id!r} down: has {fm.n_frames} frames, wants {n_frames}")
    if fm.n_frames == n_frames:
        return fm
    padded = np.zeros((fm.n_rows, n_frames))
    padded[:, : fm.n_frames] = fm.values
    return FeatureMatrix(padded, fm.filter_kind, fm.clip_id, alpha=fm.alpha)
