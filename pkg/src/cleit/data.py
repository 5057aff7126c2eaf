"""Dataset ingestion, cross-domain pairing, splitting, standardization,
and a seeded synthetic generator that reproduces the two-domain premise
at desk scale: a shared latent state observed cleanly by the high-level
domain and only through a noisy binarized channel by the low-level one.

File format: UTF-8 tab-separated matrices, first column ``sample_id``,
header row of feature / task names, label NA spelled ``NA``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .evaluate import matrix_report
from .tensor import Rng


@dataclass
class DomainDataset:
    """Feature matrix with sample ids and an optional masked label matrix."""

    sample_ids: list[str]
    features: np.ndarray
    feature_names: list[str]
    labels: np.ndarray | None = None
    label_mask: np.ndarray | None = None
    label_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        n = len(self.sample_ids)
        if len(set(self.sample_ids)) != n:
            raise DataError("duplicate sample ids")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DataError(f"features shape {self.features.shape} inconsistent with {n} ids")
        if len(self.feature_names) != self.features.shape[1]:
            raise DataError("feature name count mismatch")
        if (self.labels is None) != (self.label_mask is None):
            raise DataError("labels and label_mask must be present together")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.float64)
            self.label_mask = np.asarray(self.label_mask, dtype=np.float64)
            if self.labels.shape != self.label_mask.shape or self.labels.shape[0] != n:
                raise DataError("label/mask shapes inconsistent")

    @property
    def n(self) -> int:
        return len(self.sample_ids)

    @property
    def width(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "DomainDataset":
        idx = np.asarray(idx)
        return DomainDataset(
            sample_ids=[self.sample_ids[i] for i in idx],
            features=self.features[idx],
            feature_names=self.feature_names,
            labels=None if self.labels is None else self.labels[idx],
            label_mask=None if self.label_mask is None else self.label_mask[idx],
            label_names=self.label_names,
        )


@dataclass
class PairedDataset:
    """Row-aligned features of the same samples in both domains."""

    sample_ids: list[str]
    x_high: np.ndarray
    x_low: np.ndarray
    labels: np.ndarray | None = None
    label_mask: np.ndarray | None = None
    label_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.x_high = np.asarray(self.x_high, dtype=np.float64)
        self.x_low = np.asarray(self.x_low, dtype=np.float64)
        n = len(self.sample_ids)
        if self.x_high.shape[0] != n or self.x_low.shape[0] != n:
            raise DataError("paired feature row counts inconsistent with ids")

    @property
    def n(self) -> int:
        return len(self.sample_ids)

    def subset(self, idx) -> "PairedDataset":
        idx = np.asarray(idx)
        return PairedDataset(
            sample_ids=[self.sample_ids[i] for i in idx],
            x_high=self.x_high[idx],
            x_low=self.x_low[idx],
            labels=None if self.labels is None else self.labels[idx],
            label_mask=None if self.label_mask is None else self.label_mask[idx],
            label_names=self.label_names,
        )

    def low_dataset(self, feature_names=None) -> DomainDataset:
        return DomainDataset(
            sample_ids=list(self.sample_ids),
            features=self.x_low,
            feature_names=feature_names or [f"f{i}" for i in range(self.x_low.shape[1])],
            labels=self.labels,
            label_mask=self.label_mask,
            label_names=self.label_names,
        )


# ------------------------------------------------------------------ I/O


def _parse_cell(cell: str, row: int, col: str, path) -> tuple[float, float]:
    if cell == "NA":
        return 0.0, 0.0
    try:
        return float(cell), 1.0
    except ValueError:
        raise DataError(f"{path}: non-numeric cell at row {row}, column {col!r}: {cell!r}")


def _read_table(path) -> tuple[list[str], list[str], np.ndarray, np.ndarray]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataError(f"{path}: empty file")
    header = lines[0].split("\t")
    if header[0] != "sample_id":
        raise DataError(f"{path}: first header column must be 'sample_id', got {header[0]!r}")
    col_names = header[1:]
    ids, rows, masks = [], [], []
    seen = set()
    for i, line in enumerate(lines[1:], start=1):
        fields = line.split("\t")
        if len(fields) != len(header):
            raise DataError(
                f"{path}: ragged row {i}: {len(fields)} fields, expected {len(header)}"
            )
        sid = fields[0]
        if sid in seen:
            raise DataError(f"{path}: duplicate sample id {sid!r} at row {i}")
        seen.add(sid)
        ids.append(sid)
        vals, mask = zip(*(_parse_cell(c, i, col_names[j], path) for j, c in enumerate(fields[1:])))
        rows.append(vals)
        masks.append(mask)
    return ids, col_names, np.asarray(rows, dtype=np.float64), np.asarray(masks, dtype=np.float64)


def load_matrix(path, label_path=None) -> DomainDataset:
    """Read a feature matrix and optionally a label matrix aligned by id.

    NA cells are only legal in the label file, where they become mask
    zeros; the label file must cover exactly the same sample ids.
    """
    ids, feat_names, feats, feat_mask = _read_table(path)
    if (feat_mask == 0).any():
        r, c = np.argwhere(feat_mask == 0)[0]
        raise DataError(f"{path}: NA not allowed in features (row {r + 1}, column {feat_names[c]!r})")
    labels = mask = None
    label_names: list[str] = []
    if label_path is not None:
        lids, label_names, labels_all, mask_all = _read_table(label_path)
        index = {sid: j for j, sid in enumerate(lids)}
        missing = [sid for sid in ids if sid not in index]
        if missing:
            raise DataError(f"{label_path}: no labels for sample ids {missing[:5]}")
        order = [index[sid] for sid in ids]
        labels, mask = labels_all[order], mask_all[order]
    return DomainDataset(
        sample_ids=ids,
        features=feats,
        feature_names=list(feat_names),
        labels=labels,
        label_mask=mask,
        label_names=list(label_names),
    )


def save_matrix(path, sample_ids, matrix, col_names, mask=None) -> None:
    """Write a TSV matrix; positions with mask == 0 are written as NA."""
    matrix = np.asarray(matrix)
    lines = ["sample_id\t" + "\t".join(col_names)]
    for i, sid in enumerate(sample_ids):
        cells = []
        for j in range(matrix.shape[1]):
            if mask is not None and mask[i, j] == 0:
                cells.append("NA")
            else:
                cells.append(repr(float(matrix[i, j])))
        lines.append(sid + "\t" + "\t".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ------------------------------------------------------------ operations


def pair_domains(ds_high: DomainDataset, ds_low: DomainDataset) -> PairedDataset:
    """Inner join on sample ids, keeping the high-domain row order."""
    low_index = {sid: i for i, sid in enumerate(ds_low.sample_ids)}
    keep = [(i, low_index[sid]) for i, sid in enumerate(ds_high.sample_ids) if sid in low_index]
    if not keep:
        raise DataError("pair_domains: no shared sample ids")
    hi_idx = np.array([i for i, _ in keep])
    lo_idx = np.array([j for _, j in keep])
    labels = mask = None
    names: list[str] = []
    if ds_high.labels is not None:
        labels, mask, names = ds_high.labels[hi_idx], ds_high.label_mask[hi_idx], ds_high.label_names
    elif ds_low.labels is not None:
        labels, mask, names = ds_low.labels[lo_idx], ds_low.label_mask[lo_idx], ds_low.label_names
    return PairedDataset(
        sample_ids=[ds_high.sample_ids[i] for i in hi_idx],
        x_high=ds_high.features[hi_idx],
        x_low=ds_low.features[lo_idx],
        labels=labels,
        label_mask=mask,
        label_names=list(names),
    )


def split(ds, train_frac: float, seed: int):
    """Disjoint, exhaustive, seed-deterministic split by sample."""
    if not 0.0 < train_frac < 1.0:
        raise ConfigError(f"train_frac must lie in (0, 1), got {train_frac}")
    if ds.n < 2:
        raise DataError("need at least 2 samples to split")
    perm = Rng(seed).derive("split").permutation(ds.n)
    n_train = int(round(ds.n * train_frac))
    n_train = min(max(n_train, 1), ds.n - 1)
    return ds.subset(np.sort(perm[:n_train])), ds.subset(np.sort(perm[n_train:]))


def filter_labeled_rows(ds):
    """Drop rows with no observed label (k* = 0), returning the filtered
    dataset and the number of dropped rows."""
    if ds.labels is None:
        raise DataError("dataset has no labels")
    keep = np.flatnonzero(ds.label_mask.sum(axis=1) >= 1)
    return ds.subset(keep), ds.n - keep.size


class Standardizer:
    """Per-column centering and scaling, fitted on training statistics."""

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = mean
        self.std = std

    @classmethod
    def fit(cls, features: np.ndarray) -> "Standardizer":
        features = np.asarray(features, dtype=np.float64)
        std = features.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        return cls(features.mean(axis=0), std)

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=np.float64) - self.mean) / self.std


# ------------------------------------------------------------- synthetic


@dataclass
class SynthSpec:
    """Generator knobs for the two-domain hierarchical benchmark.

    The low noise scale must exceed the high one; together with the
    sign-threshold binarization this is what gives the high domain its
    stronger discriminative power.
    """

    latent_rank: int = 12
    d_high: int = 200
    d_low: int = 200
    n_tasks: int = 20
    noise_high: float = 0.3
    noise_low: float = 1.0
    na_rate: float = 0.2
    low_sparsity: float = 0.05
    n_unlabeled: int = 2000
    n_labeled: int = 500
    n_test: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.noise_high < self.noise_low:
            raise ConfigError("noise_high must be smaller than noise_low")
        if not 0.0 <= self.na_rate < 1.0:
            raise ConfigError("na_rate must lie in [0, 1)")
        if not 0.0 < self.low_sparsity < 0.5:
            raise ConfigError("low_sparsity must lie in (0, 0.5)")
        for f in ("latent_rank", "d_high", "d_low", "n_tasks", "n_unlabeled", "n_labeled", "n_test"):
            if getattr(self, f) <= 0:
                raise ConfigError(f"{f} must be positive")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown synth spec fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SynthResult:
    """Unlabeled pools (shared ids, hence fully paired), the labeled
    paired corpus, and a low-domain-only labeled test partition."""

    ds_high: DomainDataset
    ds_low: DomainDataset
    paired: PairedDataset
    test: DomainDataset
    spec: SynthSpec


def synthesize(spec: SynthSpec) -> SynthResult:
    """Draw the full benchmark deterministically from ``spec.seed``."""
    rng = Rng(spec.seed).derive("synth")
    n_total = spec.n_unlabeled + spec.n_labeled + spec.n_test
    r = spec.latent_rank

    t = rng.normal((n_total, r))
    a = rng.normal((r, spec.d_high)) / np.sqrt(r)
    b = rng.normal((r, spec.d_low)) / np.sqrt(r)
    x_high = t @ a + spec.noise_high * rng.normal((n_total, spec.d_high))
    raw_low = t @ b + spec.noise_low * rng.normal((n_total, spec.d_low))
    threshold = np.quantile(raw_low, 1.0 - spec.low_sparsity)
    x_low = (raw_low > threshold).astype(np.float64)

    hidden = 2 * r
    d = rng.normal((r, hidden)) / np.sqrt(r)
    c = rng.normal((hidden, spec.n_tasks)) / np.sqrt(hidden)
    logits = 2.5 * (np.tanh(t @ d) @ c)
    y = 1.0 / (1.0 + np.exp(-logits))

    mask = (rng.uniform((n_total, spec.n_tasks)) >= spec.na_rate).astype(np.float64)
    empty = np.flatnonzero(mask.sum(axis=1) == 0)
    for i in empty:  # guarantee k* >= 1 everywhere
        j = int(rng.uniform(()) * spec.n_tasks)
        mask[i, min(j, spec.n_tasks - 1)] = 1.0

    ids = [f"cl{i:05d}" for i in range(n_total)]
    feat_h = [f"g{j:04d}" for j in range(spec.d_high)]
    feat_l = [f"m{j:04d}" for j in range(spec.d_low)]
    drugs = [f"drug{j:03d}" for j in range(spec.n_tasks)]

    u = slice(0, spec.n_unlabeled)
    l = slice(spec.n_unlabeled, spec.n_unlabeled + spec.n_labeled)
    te = slice(spec.n_unlabeled + spec.n_labeled, n_total)

    ds_high = DomainDataset(ids[u], x_high[u], feat_h)
    ds_low = DomainDataset(ids[u], x_low[u], feat_l)
    paired = PairedDataset(
        sample_ids=ids[l],
        x_high=x_high[l],
        x_low=x_low[l],
        labels=y[l],
        label_mask=mask[l],
        label_names=drugs,
    )
    test = DomainDataset(
        sample_ids=ids[te],
        features=x_low[te],
        feature_names=feat_l,
        labels=y[te],
        label_mask=mask[te],
        label_names=drugs,
    )
    return SynthResult(ds_high=ds_high, ds_low=ds_low, paired=paired, test=test, spec=spec)


# ------------------------------------------------- generator qualification


def _ridge_predict(x_tr, y_tr, m_tr, x_va, alpha: float) -> np.ndarray:
    """Closed-form per-task ridge regression honoring the label mask."""
    d = x_tr.shape[1]
    preds = np.empty((x_va.shape[0], y_tr.shape[1]))
    for j in range(y_tr.shape[1]):
        obs = m_tr[:, j] == 1
        xj, yj = x_tr[obs], y_tr[obs, j]
        mu = yj.mean()
        w = np.linalg.solve(xj.T @ xj + alpha * np.eye(d), xj.T @ (yj - mu))
        preds[:, j] = x_va @ w + mu
    return preds


def ridge_gap(paired: PairedDataset, split_seed: int = 0, alpha: float = 10.0) -> tuple[float, float]:
    """Sample-wise Pearson of a ridge oracle fitted on each domain's
    features; returns (pearson_high, pearson_low). Qualifies the
    generator: the high domain must come out ahead."""
    if paired.labels is None:
        raise DataError("ridge_gap needs a labeled paired dataset")
    train, val = split(paired, 0.8, split_seed)
    scaler_h = Standardizer.fit(train.x_high)
    scaler_l = Standardizer.fit(train.x_low)
    out = []
    for tr_x, va_x in (
        (scaler_h.transform(train.x_high), scaler_h.transform(val.x_high)),
        (scaler_l.transform(train.x_low), scaler_l.transform(val.x_low)),
    ):
        preds = _ridge_predict(tr_x, train.labels, train.label_mask, va_x, alpha)
        report = matrix_report(val.labels, preds, val.label_mask)
        out.append(report.samplewise_pearson_mean)
    return out[0], out[1]
