"""Cross-validation harness and ablation reports.

The corpus is split into ten balanced subsets; a fold trains on N of
them and tests on the other 10 - N, and every one of the C(10, N)
subset choices is evaluated.  The same folds are run twice, once on raw
filterbank features (the baseline) and once on reservoir states, and the
difference of mean test WSR, in percentage points, is the reservoir's
gain.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .dataset import (Manifest, ManifestEntry, SubsetPartition, add_noise,
                      derived_noise_seed, read_clip)
from .errors import ConfigError, DataError
from .filterbank import (CochlearConfig, FeatureMatrix, MfccConfig, StftConfig,
                         featurize, pad_to)
from .readout import (Metrics, ReadoutModel, ReadoutOptions, build_targets,
                      classify, predict, score_mse, score_wsr, train_pinv)
from .reservoir import (NeuronStates, StnoParams, TanhParams, gen_mask,
                        mask_and_flatten, node_run_reference, reshape_states,
                        stno_run)

N_SUBSETS = 10
N_CLASSES = 10


@dataclass(frozen=True)
class FoldSpec:
    """One train/test split over the ten subsets."""

    train_subsets: tuple[int, ...]

    def __post_init__(self) -> None:
        t = tuple(self.train_subsets)
        if len(t) != len(set(t)):
            raise DataError(f"duplicate subset indices in fold: {t}")
        if not t or len(t) >= N_SUBSETS:
            raise DataError(f"fold must train on 1..{N_SUBSETS - 1} subsets, got {len(t)}")
        if any(not 0 <= k < N_SUBSETS for k in t):
            raise DataError(f"subset indices must lie in 0..{N_SUBSETS - 1}: {t}")
        object.__setattr__(self, "train_subsets", tuple(sorted(t)))

    @property
    def test_subsets(self) -> tuple[int, ...]:
        return tuple(k for k in range(N_SUBSETS) if k not in self.train_subsets)

    @property
    def n_train(self) -> int:
        return len(self.train_subsets)

    def describe(self) -> str:
        return "+".join(str(k) for k in self.train_subsets)


def enumerate_folds(n_train: int) -> list[FoldSpec]:
    """All C(10, n_train) folds, in deterministic lexicographic order."""
    if not 1 <= n_train <= N_SUBSETS - 1:
        raise ConfigError(f"n_train must lie in 1..{N_SUBSETS - 1}, got {n_train}")
    return [FoldSpec(c) for c in combinations(range(N_SUBSETS), n_train)]


def chance_band(n_classes: int, n_trials: int, n_sigma: float = 3.0) -> tuple[float, float]:
    """Symmetric band around chance-level WSR for a balanced task."""
    p = 1.0 / n_classes
    center = 100.0 * p
    std = 100.0 * math.sqrt(p * (1.0 - p) / n_trials)
    return center - n_sigma * std, center + n_sigma * std


@dataclass(frozen=True)
class PipelineSpec:
    """Everything between a clip and a readout column, minus the corpus."""

    filter_kind: str
    alpha: float | None = None
    stft: StftConfig = field(default_factory=StftConfig)
    mfcc: MfccConfig = field(default_factory=MfccConfig)
    cochlear: CochlearConfig = field(default_factory=CochlearConfig)
    node_kind: str | None = None          # None -> baseline (features feed the readout)
    n_theta: int = 400
    mask_seed: int = 1
    stno: StnoParams = field(default_factory=StnoParams)
    tanh: TanhParams = field(default_factory=TanhParams)
    drive_ma: float = 3.0                 # target peak drive after input scaling
    readout: ReadoutOptions = field(default_factory=ReadoutOptions)

    def __post_init__(self) -> None:
        if self.node_kind not in (None, "stno", "tanh"):
            raise ConfigError(f"unknown node kind {self.node_kind!r}")
        if self.node_kind is not None and self.n_theta < 1:
            raise ConfigError(f"n_theta must be positive, got {self.n_theta}")
        if self.drive_ma <= 0:
            raise ConfigError("drive_ma must be positive")

    def describe(self) -> str:
        name = self.filter_kind
        if self.filter_kind == "spectro_exp":
            name += f"(alpha={self.alpha:g})"
        if self.node_kind is None:
            return f"{name} baseline"
        return f"{name} + {self.node_kind}(n_theta={self.n_theta})"

    def route(self) -> str:
        return "baseline" if self.node_kind is None else "total"


def _featurize_entry(entry: ManifestEntry, clip, pipeline: PipelineSpec) -> FeatureMatrix:
    return featurize(clip, pipeline.filter_kind, pipeline.alpha,
                     stft_cfg=pipeline.stft, mfcc_cfg=pipeline.mfcc,
                     cochlear_cfg=pipeline.cochlear)


@dataclass
class PreparedCorpus:
    """Per-clip readout inputs, padded to a common frame count.

    ``tensors[i]`` is the matrix fed to the readout for clip i: padded
    features on the baseline route, reshaped node states on the total
    route.  Built once, read-only afterward; folds only reindex it.
    """

    clip_ids: tuple[str, ...]
    digits: np.ndarray
    subset_of: np.ndarray
    tensors: np.ndarray          # (n_clips, n_rows, n_frames_max)
    n_frames_max: int
    pipeline: PipelineSpec
    input_gain: float | None = None

    def indices_of_subsets(self, subsets: Sequence[int]) -> np.ndarray:
        wanted = set(subsets)
        return np.array([i for i, s in enumerate(self.subset_of) if s in wanted])


def _run_node(pipeline: PipelineSpec, drive: np.ndarray, input_gain: float,
              n_frames: int, clip_id: str) -> NeuronStates:
    if pipeline.node_kind == "stno":
        p = replace(pipeline.stno, input_gain=input_gain)
        v = stno_run(drive, p)
    else:
        t = pipeline.tanh
        v = node_run_reference(input_gain * drive, t.gain, t.leak, t.v0)
    return NeuronStates(reshape_states(v, pipeline.n_theta, n_frames), clip_id,
                        node_kind=pipeline.node_kind)


def prepare_corpus(manifest: Manifest, partition: SubsetPartition,
                   pipeline: PipelineSpec, *, noise_seed: int = 0,
                   workers: int = 1,
                   features: dict[str, FeatureMatrix] | None = None) -> PreparedCorpus:
    """Featurize (or reuse cached features for) every clip and, when a
    node is configured, run the reservoir over the padded features.

    The input scale maps the largest masked feature magnitude over the
    whole corpus onto ``drive_ma``, so the drive spans +/-drive_ma.
    State integration restarts from the rest amplitude at every clip
    boundary.
    """
    from .dataset import realize_clip  # local import to keep module load light

    subset_of_map = partition.subset_of()
    entries = [e for e in manifest.entries if e.clip_id in subset_of_map]
    if not entries:
        raise DataError("no manifest entries covered by the partition")

    def _load(entry: ManifestEntry) -> FeatureMatrix:
        if features is not None and entry.clip_id in features:
            return features[entry.clip_id]
        clip = realize_clip(entry, sample_rate=manifest.sample_rate,
                            noise_seed=noise_seed)
        return _featurize_entry(entry, clip, pipeline)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            feats = list(pool.map(_load, entries))
    else:
        feats = [_load(e) for e in entries]

    n_frames_max = max(f.n_frames for f in feats)
    padded = [pad_to(f, n_frames_max) for f in feats]
    clip_ids = tuple(e.clip_id for e in entries)
    digits = np.array([e.label.digit for e in entries])
    subset_of = np.array([subset_of_map[e.clip_id] for e in entries])

    if pipeline.node_kind is None:
        tensors = np.stack([f.values for f in padded])
        return PreparedCorpus(clip_ids, digits, subset_of, tensors,
                              n_frames_max, pipeline)

    mask = gen_mask(pipeline.mask_seed, pipeline.n_theta, padded[0].n_rows)
    drives = [mask_and_flatten(f, mask) for f in padded]
    peak = max((float(np.max(np.abs(d))) if d.size else 0.0) for d in drives)
    input_gain = pipeline.drive_ma / peak if peak > 0.0 else 0.0

    def _states(i: int) -> np.ndarray:
        return _run_node(pipeline, drives[i], input_gain, n_frames_max,
                         clip_ids[i]).values

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tensors = np.stack(list(pool.map(_states, range(len(drives)))))
    else:
        tensors = np.stack([_states(i) for i in range(len(drives))])
    return PreparedCorpus(clip_ids, digits, subset_of, tensors, n_frames_max,
                          pipeline, input_gain=input_gain)


@dataclass(frozen=True)
class FoldMetrics:
    fold: FoldSpec
    train: Metrics
    test: Metrics

    @property
    def overfit_ratio(self) -> float:
        return self.test.mse / self.train.mse if self.train.mse > 0 else math.inf


def _evaluate(model: ReadoutModel, prep: PreparedCorpus, idx: np.ndarray) -> Metrics:
    preds, actual, estimates, targets = [], [], [], []
    for i in idx:
        scores = predict(model, prep.tensors[i])
        preds.append(classify(scores))
        actual.append(int(prep.digits[i]))
        estimates.append(scores)
        targets.append(np.eye(N_CLASSES)[prep.digits[i]])
    return Metrics(score_wsr(preds, actual), score_mse(estimates, targets))


def run_fold(fold: FoldSpec, prep: PreparedCorpus) -> FoldMetrics:
    """Train on the fold's train subsets, score both splits."""
    train_idx = prep.indices_of_subsets(fold.train_subsets)
    test_idx = prep.indices_of_subsets(fold.test_subsets)
    if train_idx.size == 0 or test_idx.size == 0:
        raise DataError(f"fold {fold.describe()} has an empty split")
    if set(train_idx) & set(test_idx):
        raise DataError(f"fold {fold.describe()} train/test overlap")
    states = [prep.tensors[i] for i in train_idx]
    targets = [build_targets(int(prep.digits[i]), prep.n_frames_max) for i in train_idx]
    model = train_pinv(states, targets, prep.pipeline.readout,
                       trained_on=fold.describe(),
                       node_kind=prep.pipeline.node_kind or "none",
                       filter_kind=prep.pipeline.filter_kind)
    return FoldMetrics(fold, _evaluate(model, prep, train_idx),
                       _evaluate(model, prep, test_idx))


@dataclass(frozen=True)
class CrossValReport:
    pipeline: str
    n_train: int
    folds: tuple[FoldMetrics, ...]
    train: Metrics
    test: Metrics
    overfit_ratio: float

    @staticmethod
    def from_folds(pipeline: str, n_train: int,
                   folds: Sequence[FoldMetrics]) -> "CrossValReport":
        train = _aggregate([f.train for f in folds])
        test = _aggregate([f.test for f in folds])
        ratio = test.mse / train.mse if train.mse > 0 else math.inf
        return CrossValReport(pipeline, n_train, tuple(folds), train, test, ratio)


def _aggregate(metrics: Sequence[Metrics]) -> Metrics:
    wsr = np.array([m.wsr for m in metrics])
    mse = np.array([m.mse for m in metrics])
    ddof = 1 if len(metrics) > 1 else 0
    return Metrics(float(wsr.mean()), float(mse.mean()),
                   float(wsr.std(ddof=ddof)), float(mse.std(ddof=ddof)))


def cross_validate(prep: PreparedCorpus, n_train: int, *,
                   workers: int = 1) -> CrossValReport:
    """Run every fold; folds are independent, so they parallelize freely.

    Results are assembled in fold order, making the report independent of
    the worker count.
    """
    folds = enumerate_folds(n_train)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda f: run_fold(f, prep), folds))
    else:
        results = [run_fold(f, prep) for f in folds]
    return CrossValReport.from_folds(prep.pipeline.describe(), n_train, results)


def filter_baseline(prep: PreparedCorpus, n_train: int, *,
                    workers: int = 1) -> CrossValReport:
    """Cross-validate the readout directly on filterbank features."""
    if prep.pipeline.node_kind is not None:
        raise ConfigError("filter_baseline needs a preparation without a node")
    return cross_validate(prep, n_train, workers=workers)


@dataclass(frozen=True)
class GainReport:
    baseline: CrossValReport
    total: CrossValReport

    def __post_init__(self) -> None:
        if self.baseline.n_train != self.total.n_train:
            raise DataError(
                f"gain needs matching fold sizes, got N={self.baseline.n_train} "
                f"vs N={self.total.n_train}")
        if len(self.baseline.folds) != len(self.total.folds):
            raise DataError("gain needs the same fold enumeration on both routes")
        for fb, ft in zip(self.baseline.folds, self.total.folds):
            if fb.fold != ft.fold:
                raise DataError("gain needs identical folds on both routes")

    @property
    def gain_points(self) -> float:
        """Mean test WSR difference, total minus baseline, in points."""
        return self.total.test.wsr - self.baseline.test.wsr


def compute_gain(baseline: CrossValReport, total: CrossValReport) -> GainReport:
    return GainReport(baseline, total)


@dataclass(frozen=True)
class SweepPoint:
    alpha: float
    wsr: float
    wsr_std: float


def alpha_sweep(manifest: Manifest, partition: SubsetPartition,
                base: PipelineSpec, alphas: Sequence[float], n_train: int, *,
                noise_seed: int = 0, workers: int = 1) -> list[SweepPoint]:
    """Baseline test WSR as a function of the spectral exponent."""
    if len(alphas) == 0:
        raise ConfigError("alpha sweep needs at least one exponent")
    points = []
    for alpha in alphas:
        pipe = replace(base, filter_kind="spectro_exp", alpha=float(alpha),
                       node_kind=None)
        prep = prepare_corpus(manifest, partition, pipe,
                              noise_seed=noise_seed, workers=workers)
        report = cross_validate(prep, n_train, workers=workers)
        points.append(SweepPoint(float(alpha), report.test.wsr, report.test.wsr_std))
    return points


# ---------------------------------------------------------------------------
# condition-stratified evaluation

@dataclass(frozen=True)
class ConditionReport:
    """WSR grid over (snr, noise_type) cells with row/column means."""

    snrs: tuple[float, ...]
    noise_types: tuple[str, ...]
    wsr: np.ndarray                    # (n_snrs, n_types)
    gain: np.ndarray | None            # same shape, total minus baseline
    n_train_clips: int
    n_test_clips: int

    @property
    def row_avg(self) -> np.ndarray:
        return self.wsr.mean(axis=1)

    @property
    def col_avg(self) -> np.ndarray:
        return self.wsr.mean(axis=0)

    @property
    def overall(self) -> float:
        return float(self.wsr.mean())


def _realized_features(entry: ManifestEntry, pipeline: PipelineSpec,
                       manifest: Manifest, noise_type: str, snr_db: float,
                       noise_seed: int) -> FeatureMatrix:
    clip = read_clip(entry, sample_rate=manifest.sample_rate)
    if entry.is_synthetic and not math.isinf(snr_db):
        seed = derived_noise_seed(noise_seed, entry.clip_id, noise_type, snr_db)
        clip = add_noise(clip, noise_type, snr_db, seed)
    return _featurize_entry(entry, clip, pipeline)


def stratified_report(manifest: Manifest, pipeline: PipelineSpec,
                      train_filter: Callable[[ManifestEntry], bool], *,
                      test_snrs: Sequence[float], test_noise_types: Sequence[str],
                      noise_seed: int = 0, with_baseline: bool = True,
                      workers: int = 1) -> ConditionReport:
    """Train once on a mixed-condition pool, test per condition cell.

    ``train_filter`` selects the training entries; everything else is the
    test pool.  Synthetic test entries are re-realized at each cell's
    (noise_type, snr) condition, while file-backed test entries join only
    the cells whose condition matches their manifest tag.  Training
    entries are realized at their tagged conditions.
    """
    if not test_snrs or not test_noise_types:
        raise ConfigError("stratified evaluation needs test snrs and noise types")
    train_entries = [e for e in manifest.entries if train_filter(e)]
    test_entries = [e for e in manifest.entries if not train_filter(e)]
    if not train_entries:
        raise DataError("stratified training pool is empty")
    if not test_entries:
        raise DataError("stratified test pool is empty")

    train_feats = [
        _realized_features(e, pipeline, manifest, e.label.noise_type,
                           e.label.snr_db, noise_seed)
        for e in train_entries
    ]
    def _tag_matches(label, ntype: str, snr: float) -> bool:
        if label.snr_db != snr:
            return False
        return label.noise_type == ntype or (math.isinf(snr)
                                             and label.noise_type == "clean")

    cells: dict[tuple[int, int], list[tuple[ManifestEntry, FeatureMatrix]]] = {}
    for r, snr in enumerate(test_snrs):
        for c, ntype in enumerate(test_noise_types):
            pool = []
            for e in test_entries:
                if e.is_synthetic:
                    f = _realized_features(e, pipeline, manifest, ntype,
                                           float(snr), noise_seed)
                elif _tag_matches(e.label, ntype, float(snr)):
                    f = _realized_features(e, pipeline, manifest, e.label.noise_type,
                                           e.label.snr_db, noise_seed)
                else:
                    continue
                pool.append((e, f))
            if not pool:
                raise DataError(
                    f"no test clips for condition ({ntype!r}, {snr} dB)")
            cells[(r, c)] = pool

    all_feats = train_feats + [f for pool in cells.values() for _, f in pool]
    n_frames_max = max(f.n_frames for f in all_feats)

    def _tensors(feats: list[FeatureMatrix], route_pipeline: PipelineSpec):
        padded = [pad_to(f, n_frames_max) for f in feats]
        if route_pipeline.node_kind is None:
            return [p.values for p in padded]
        mask = gen_mask(route_pipeline.mask_seed, route_pipeline.n_theta,
                        padded[0].n_rows)
        return [mask_and_flatten(p, mask) for p in padded]

    def _route(route_pipeline: PipelineSpec) -> np.ndarray:
        train_mats = _tensors(train_feats, route_pipeline)
        cell_mats = {key: _tensors([f for _, f in pool], route_pipeline)
                     for key, pool in cells.items()}
        if route_pipeline.node_kind is not None:
            everything = train_mats + [m for mats in cell_mats.values() for m in mats]
            peak = max(float(np.max(np.abs(m))) for m in everything)
            input_gain = route_pipeline.drive_ma / peak if peak > 0 else 0.0
            train_mats = [
                _run_node(route_pipeline, d, input_gain, n_frames_max, e.clip_id).values
                for d, e in zip(train_mats, train_entries)]
            cell_mats = {
                key: [_run_node(route_pipeline, d, input_gain, n_frames_max,
                                e.clip_id).values
                      for d, (e, _) in zip(mats, cells[key])]
                for key, mats in cell_mats.items()}
        targets = [build_targets(e.label.digit, n_frames_max) for e in train_entries]
        model = train_pinv(train_mats, targets, route_pipeline.readout,
                           trained_on="stratified",
                           node_kind=route_pipeline.node_kind or "none",
                           filter_kind=route_pipeline.filter_kind)
        grid = np.zeros((len(test_snrs), len(test_noise_types)))
        for (r, c), mats in cell_mats.items():
            preds = [classify(predict(model, m)) for m in mats]
            actual = [e.label.digit for e, _ in cells[(r, c)]]
            grid[r, c] = score_wsr(preds, actual)
        return grid

    wsr = _route(pipeline)
    gain = None
    if with_baseline and pipeline.node_kind is not None:
        base = replace(pipeline, node_kind=None)
        gain = wsr - _route(base)
    return ConditionReport(tuple(float(s) for s in test_snrs),
                           tuple(test_noise_types), wsr, gain,
                           n_train_clips=len(train_entries),
                           n_test_clips=len(test_entries))


# ---------------------------------------------------------------------------
# serialization helpers (plain strings; the CLI decides where they go)

def _fmt(x: float) -> str:
    return repr(float(x))


def report_to_csv(report: CrossValReport, header_lines: Sequence[str] = ()) -> str:
    lines = [f"# {h}" for h in header_lines]
    lines.append(f"# pipeline: {report.pipeline}")
    lines.append("fold,train_subsets,train_wsr,train_mse,test_wsr,test_mse")
    for i, fm in enumerate(report.folds):
        lines.append(",".join([str(i), fm.fold.describe(),
                               _fmt(fm.train.wsr), _fmt(fm.train.mse),
                               _fmt(fm.test.wsr), _fmt(fm.test.mse)]))
    lines.append(",".join(["mean", "-",
                           _fmt(report.train.wsr), _fmt(report.train.mse),
                           _fmt(report.test.wsr), _fmt(report.test.mse)]))
    lines.append(",".join(["std", "-",
                           _fmt(report.train.wsr_std), _fmt(report.train.mse_std),
                           _fmt(report.test.wsr_std), _fmt(report.test.mse_std)]))
    return "\n".join(lines) + "\n"


def summary_markdown(reports: Sequence[CrossValReport],
                     gain: GainReport | None = None,
                     header_lines: Sequence[str] = ()) -> str:
    out = [f"<!-- {h} -->" for h in header_lines]
    out.append("# Benchmark summary")
    out.append("")
    out.append("| Pipeline | Train WSR (std) | Train MSE (std) | Test WSR (std) | Test MSE (std) | MSE ratio |")
    out.append("|---|---|---|---|---|---|")
    for r in reports:
        out.append(
            f"| {r.pipeline} "
            f"| {r.train.wsr:.1f} ({r.train.wsr_std:.1f}) "
            f"| {r.train.mse:.4g} ({r.train.mse_std:.2g}) "
            f"| {r.test.wsr:.1f} ({r.test.wsr_std:.1f}) "
            f"| {r.test.mse:.4g} ({r.test.mse_std:.2g}) "
            f"| {r.overfit_ratio:.3f} |")
    out.append("")
    if gain is not None:
        out.append(f"Reservoir gain: **{gain.gain_points:+.1f} points** "
                   f"(total {gain.total.test.wsr:.1f} vs baseline "
                   f"{gain.baseline.test.wsr:.1f}, N={gain.total.n_train}).")
        out.append("")
    return "\n".join(out)


def condition_markdown(report: ConditionReport,
                       header_lines: Sequence[str] = ()) -> str:
    def cell(r: int, c: int) -> str:
        s = f"{report.wsr[r, c]:.2f}"
        if report.gain is not None:
            s += f" ({report.gain[r, c]:+.2f})"
        return s

    out = [f"<!-- {h} -->" for h in header_lines]
    out.append("# Condition-stratified WSR")
    out.append("")
    head = "| SNR (dB) | " + " | ".join(report.noise_types) + " | avg |"
    out.append(head)
    out.append("|" + "---|" * (len(report.noise_types) + 2))
    for r, snr in enumerate(report.snrs):
        snr_s = "clean" if math.isinf(snr) else f"{snr:g}"
        row = [snr_s] + [cell(r, c) for c in range(len(report.noise_types))]
        row.append(f"{report.row_avg[r]:.2f}")
        out.append("| " + " | ".join(row) + " |")
    avg_row = ["avg"] + [f"{v:.2f}" for v in report.col_avg] + [f"{report.overall:.2f}"]
    out.append("| " + " | ".join(avg_row) + " |")
    out.append("")
    out.append(f"Trained on {report.n_train_clips} clips; "
               f"{report.n_test_clips} test clips per cell population.")
    return "\n".join(out) + "\n"
