"""Linear readout trained by pseudo-inverse, plus scoring.

Training concatenates the per-clip state (or feature) matrices column
wise into V and the matching one-hot target matrices into T, then takes
W = T pinv(V): the minimum-norm least-squares solution with singular
values below ``rtol * sigma_max`` treated as zero.  Classification
averages W V over frames and picks the largest component.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from .filterbank import FeatureMatrix
from .reservoir import NeuronStates

N_CLASSES = 10


@dataclass(frozen=True)
class ReadoutOptions:
    rtol: float = 1e-10
    ridge: float = 0.0
    bias: bool = False

    def __post_init__(self) -> None:
        if self.rtol <= 0:
            raise ConfigError("rtol must be positive")
        if self.ridge < 0:
            raise ConfigError("ridge must be nonnegative")


@dataclass(frozen=True)
class ReadoutModel:
    weights: np.ndarray
    options: ReadoutOptions
    trained_on: str = ""
    node_kind: str = "none"
    filter_kind: str = ""

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != N_CLASSES:
            raise DataError(f"weights must have {N_CLASSES} rows, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise NumericalError("trained weights contain non-finite entries")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[1] - (1 if self.options.bias else 0)


def build_targets(digit: int, n_frames: int) -> np.ndarray:
    """One-hot target matrix (N_CLASSES x n_frames) held for every frame."""
    if not 0 <= digit < N_CLASSES:
        raise DataError(f"digit out of range: {digit}")
    if n_frames < 1:
        raise DataError(f"n_frames must be positive, got {n_frames}")
    t = np.zeros((N_CLASSES, n_frames))
    t[digit] = 1.0
    return t


def _values(m) -> np.ndarray:
    if isinstance(m, (NeuronStates, FeatureMatrix)):
        return m.values
    return np.asarray(m, dtype=np.float64)


def train_pinv(states: Sequence, targets: Sequence,
               options: ReadoutOptions = ReadoutOptions(), *,
               trained_on: str = "", node_kind: str = "none",
               filter_kind: str = "") -> ReadoutModel:
    """Fit readout weights over concatenated clips.

    ``states`` and ``targets`` are matched sequences of matrices with a
    shared row count on the state side and one target column per state
    column.  With ``ridge > 0`` the regularized normal equations are
    solved instead of the pseudo-inverse.
    """
    if len(states) == 0 or len(states) != len(targets):
        raise DataError(
            f"need matching nonempty state/target sequences, got "
            f"{len(states)} and {len(targets)}")
    vs = [_values(s) for s in states]
    ts = [np.asarray(t, dtype=np.float64) for t in targets]
    n_rows = vs[0].shape[0]
    for v, t in zip(vs, ts):
        if v.shape[0] != n_rows:
            raise DataError(f"inconsistent state row counts: {v.shape[0]} vs {n_rows}")
        if t.shape != (N_CLASSES, v.shape[1]):
            raise DataError(
                f"target shape {t.shape} does not match states with {v.shape[1]} frames")
    big_v = np.hstack(vs)
    big_t = np.hstack(ts)
    if options.bias:
        big_v = np.vstack([big_v, np.ones(big_v.shape[1])])
    if options.ridge > 0.0:
        gram = big_v @ big_v.T
        gram[np.diag_indices_from(gram)] += options.ridge
        try:
            w = np.linalg.solve(gram, big_v @ big_t.T).T
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"ridge solve failed: {exc}") from None
    else:
        # lstsq returns the minimum-norm solution of V^T W^T = T^T, which
        # is exactly T pinv(V) with the same singular-value cutoff.
        sol, _, _, _ = np.linalg.lstsq(big_v.T, big_t.T, rcond=options.rtol)
        w = sol.T
    if not np.all(np.isfinite(w)):
        raise NumericalError("readout training produced non-finite weights")
    return ReadoutModel(w, options, trained_on=trained_on,
                        node_kind=node_kind, filter_kind=filter_kind)


def predict(model: ReadoutModel, states) -> np.ndarray:
    """Frame-averaged class scores for one clip, shape (N_CLASSES,)."""
    v = _values(states)
    if v.ndim != 2:
        raise DataError("states must be 2-d")
    if model.options.bias:
        v = np.vstack([v, np.ones(v.shape[1])])
    if v.shape[0] != model.weights.shape[1]:
        raise DataError(
            f"model expects {model.weights.shape[1]} state rows, got {v.shape[0]}")
    return (model.weights @ v).mean(axis=1)


def classify(scores: np.ndarray) -> int:
    """Largest score wins; ties resolve to the lowest class index."""
    scores = np.asarray(scores)
    if scores.shape != (N_CLASSES,):
        raise DataError(f"scores must have shape ({N_CLASSES},), got {scores.shape}")
    return int(np.argmax(scores))


def score_wsr(predicted: Sequence[int], actual: Sequence[int]) -> float:
    """Word success rate in percent."""
    if len(predicted) == 0 or len(predicted) != len(actual):
        raise DataError("predicted/actual must be nonempty and equally long")
    hits = sum(1 for p, a in zip(predicted, actual) if p == a)
    return 100.0 * hits / len(predicted)


def score_mse(estimates: Sequence[np.ndarray], targets: Sequence[np.ndarray]) -> float:
    """Mean squared error over all clips and target components."""
    if len(estimates) == 0 or len(estimates) != len(targets):
        raise DataError("estimates/targets must be nonempty and equally long")
    total = 0.0
    count = 0
    for e, t in zip(estimates, targets):
        e = np.asarray(e, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        if e.shape != t.shape:
            raise DataError(f"estimate shape {e.shape} != target shape {t.shape}")
        diff = e - t
        total += float(np.sum(diff * diff))
        count += diff.size
    return total / count


@dataclass(frozen=True)
class Metrics:
    """WSR/MSE pair, with spreads when aggregated over folds."""

    wsr: float
    mse: float
    wsr_std: float = 0.0
    mse_std: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.wsr <= 100.0:
            raise DataError(f"wsr out of range: {self.wsr}")
        if self.mse < 0.0 or self.wsr_std < 0.0 or self.mse_std < 0.0:
            raise DataError("mse and spreads must be nonnegative")
