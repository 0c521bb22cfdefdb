"""Dataset ingestion, serialization, and synthetic stream generation.

Two input formats are supported: sparse libSVM text for regression and
classification, and a CSV of per-period returns (header row of asset names,
one column per asset, decimal fractions) for portfolio selection.  Parse
errors carry 1-based line numbers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .losses import LossSample


@dataclass
class Dataset:
    """In-memory dataset: feature/return matrix Z (n x d) and labels y (n)."""

    Z: np.ndarray
    y: np.ndarray
    _samples: list[LossSample] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.Z = np.ascontiguousarray(self.Z, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        if self.Z.ndim != 2 or self.y.ndim != 1 or self.Z.shape[0] != self.y.shape[0]:
            raise DataError(
                f"inconsistent dataset arrays: Z {self.Z.shape}, y {self.y.shape}"
            )
        if self.Z.shape[0] < 1 or self.Z.shape[1] < 1:
            raise DataError(f"dataset must be non-empty, got shape {self.Z.shape}")
        if not (np.all(np.isfinite(self.Z)) and np.all(np.isfinite(self.y))):
            raise DataError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def d(self) -> int:
        return self.Z.shape[1]

    @property
    def samples(self) -> list[LossSample]:
        if self._samples is None:
            self._samples = [
                LossSample(z=self.Z[i], y=float(self.y[i])) for i in range(self.n)
            ]
        return self._samples


def parse_libsvm(path) -> Dataset:
    """Parse sparse libSVM text: ``label index:value ...`` with 1-based indices.

    The dense width is the largest index seen anywhere in the file.
    """
    labels: list[float] = []
    rows: list[list[tuple[int, float]]] = []
    width = 0
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped:
            continue
        parts = stripped.split()
        try:
            label = float(parts[0])
        except ValueError:
            raise DataError(f"{path}:{lineno}: label {parts[0]!r} is not a number") from None
        feats: list[tuple[int, float]] = []
        seen: set[int] = set()
        for tok in parts[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise DataError(f"{path}:{lineno}: feature token {tok!r} lacks a colon")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed feature token {tok!r}") from None
            if idx < 1:
                raise DataError(f"{path}:{lineno}: feature indices are 1-based, got {idx}")
            if idx in seen:
                raise DataError(f"{path}:{lineno}: duplicate feature index {idx}")
            seen.add(idx)
            feats.append((idx, val))
            width = max(width, idx)
        labels.append(label)
        rows.append(feats)
    if not labels:
        raise DataError(f"{path}: no samples found")
    if width == 0:
        raise DataError(f"{path}: no features found in any sample")
    Z = np.zeros((len(labels), width))
    for i, feats in enumerate(rows):
        for idx, val in feats:
            Z[i, idx - 1] = val
    return Dataset(Z=Z, y=np.asarray(labels))


def write_libsvm(dataset: Dataset, path) -> None:
    """Serialize in sparse libSVM text; exact zeros are omitted."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(dataset.n):
            parts = [f"{dataset.y[i]:.17g}"]
            row = dataset.Z[i]
            for j in np.nonzero(row)[0]:
                parts.append(f"{j + 1}:{row[j]:.17g}")
            fh.write(" ".join(parts) + "\n")


def parse_returns_csv(path) -> Dataset:
    """Parse a returns CSV: header row of asset names, one decimal-fraction
    return per asset per row.  Labels are zero (unused by the return loss)."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: file is empty") from None
            width = len(header)
            if width < 2:
                raise DataError(f"{path}: expected at least 2 asset columns, got {width}")
            rows: list[list[float]] = []
            for lineno, row in enumerate(reader, 2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != width:
                    raise DataError(
                        f"{path}:{lineno}: expected {width} columns, got {len(row)}"
                    )
                try:
                    rows.append([float(c) for c in row])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-numeric return value") from None
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no data rows after the header")
    Z = np.asarray(rows)
    return Dataset(Z=Z, y=np.zeros(len(rows)))


def resolve_horizon(T, n: int) -> int:
    """Resolve a horizon given either a round count or a multiplier form.

    Accepts a positive integer, its decimal string, or ``'<k>n'`` meaning
    k passes over the n samples (e.g. ``'150n'``).
    """
    from .errors import ConfigError

    if isinstance(T, (int, np.integer)):
        value = int(T)
    elif isinstance(T, str):
        text = T.strip().lower()
        try:
            if text.endswith("n"):
                value = int(text[:-1]) * n
            else:
                value = int(text)
        except ValueError:
            raise ConfigError(
                f"horizon must be an integer or '<k>n' multiplier, got {T!r}"
            ) from None
    else:
        raise ConfigError(f"horizon must be an integer or string, got {T!r}")
    if value < 1:
        raise ConfigError(f"horizon must be positive, got {value}")
    return value


def make_regression_dataset(n: int, d: int, rng: np.random.Generator,
                            signal_norm: float = 2.0, noise: float = 0.1,
                            condition: float = 1.0) -> Dataset:
    """Synthetic linear regression stream: y = <w, z> + noise.

    Features are Gaussian with covariance eigenvalues spread geometrically
    from 1 down to 1/condition (condition=1 gives isotropic z ~ N(0, I/d)),
    mimicking the correlated measurements of real tabular data.
    """
    if condition < 1.0:
        raise ValueError(f"condition must be >= 1, got {condition}")
    scales = condition ** (-0.5 * np.arange(d) / max(d - 1, 1))
    basis = np.linalg.qr(rng.standard_normal((d, d)))[0]
    Z = (rng.standard_normal((n, d)) * scales) @ basis.T / np.sqrt(d)
    w = rng.standard_normal(d)
    w *= signal_norm / np.linalg.norm(w)
    y = Z @ w + noise * rng.standard_normal(n)
    return Dataset(Z=Z, y=y)


def make_classification_dataset(n: int, d: int, rng: np.random.Generator,
                                flip: float = 0.05) -> Dataset:
    """Synthetic linear classification stream with +-1 labels and label noise."""
    Z = rng.standard_normal((n, d)) / np.sqrt(d)
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    y = np.where(Z @ w >= 0.0, 1.0, -1.0)
    flips = rng.random(n) < flip
    y[flips] = -y[flips]
    return Dataset(Z=Z, y=y)


def make_returns_dataset(n: int, d: int, rng: np.random.Generator,
                         dominant: int = 0, base: float = 0.0005,
                         edge: float = 0.004, vol: float = 0.02) -> Dataset:
    """Synthetic per-period returns with one asset whose mean dominates."""
    means = np.full(d, base)
    means[dominant] = base + edge
    Z = means[None, :] + vol * rng.standard_normal((n, d))
    return Dataset(Z=Z, y=np.zeros(n))
