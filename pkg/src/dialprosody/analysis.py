"""Spearman correlation matrices across matched utterance pairs.

Spearman rho uses average ranks for ties, then the Pearson correlation of
the rank sequences. Correlations with a constant input are undefined and
carried as NaN rather than zeroed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DataError
from .midlevel import N_DIMS, feature_labels

MIN_PAIRS = 3
DEFAULT_THRESHOLD = 0.3
DEFAULT_TOP_K = 10


@dataclass(frozen=True)
class CorrelationMatrix:
    values: np.ndarray  # (100, 100); NaN where undefined
    row_language: str
    col_language: str
    n: int  # pairs used

    def row_labels(self) -> tuple:
        return tuple(f"{self.row_language}:{l}" for l in feature_labels())

    def col_labels(self) -> tuple:
        return tuple(f"{self.col_language}:{l}" for l in feature_labels())


@dataclass(frozen=True)
class DiagonalSummary:
    n: int
    threshold: float
    fraction_at_threshold: float  # of defined diagonal entries
    n_undefined_diagonal: int
    per_feature_mean: tuple  # (feature_name, mean rho over its spans)
    top_off_diagonal: tuple  # (row_label, col_label, rho), by |rho| desc


def _standardized_ranks(columns: np.ndarray) -> np.ndarray:
    """Ranks per column, centered and scaled to unit norm; NaN if constant."""
    ranks = rankdata(columns, method="average", axis=0).astype(np.float64)
    centered = ranks - ranks.mean(axis=0)
    norm = np.sqrt(np.sum(centered * centered, axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = centered / norm
    out[:, norm == 0.0] = np.nan
    return out


def spearman(x, y) -> float:
    """Spearman rho with average-rank ties; NaN when either side is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError(f"length mismatch: {x.shape} vs {y.shape}")
    if len(x) < MIN_PAIRS:
        raise DataError(f"need at least {MIN_PAIRS} points, got {len(x)}")
    rx = _standardized_ranks(x[:, None])[:, 0]
    ry = _standardized_ranks(y[:, None])[:, 0]
    if np.isnan(rx[0]) or np.isnan(ry[0]):
        return math.nan
    return float(np.clip(np.dot(rx, ry), -1.0, 1.0))


def correlation_matrix(
    X: np.ndarray, Y: np.ndarray, row_language: str, col_language: str
) -> CorrelationMatrix:
    """Entry (i, j) = spearman(X[:, i], Y[:, j]) across row-aligned pairs."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise DataError(f"misaligned inputs: {X.shape} vs {Y.shape}")
    if X.shape[1] != N_DIMS or Y.shape[1] != N_DIMS:
        raise DataError(f"expected {N_DIMS} feature columns")
    n = X.shape[0]
    if n < MIN_PAIRS:
        raise DataError(f"need at least {MIN_PAIRS} pairs, got {n}")
    rx = _standardized_ranks(X)
    ry = _standardized_ranks(Y)
    values = np.clip(rx.T @ ry, -1.0, 1.0)  # NaN propagates from constants
    return CorrelationMatrix(
        values=values, row_language=row_language, col_language=col_language, n=n
    )


def summarize_diagonal(
    m: CorrelationMatrix,
    threshold: float = DEFAULT_THRESHOLD,
    top_k: int = DEFAULT_TOP_K,
) -> DiagonalSummary:
    """Diagonal (same feature, same span) statistics plus top off-diagonals."""
    diag = np.diagonal(m.values)
    defined = ~np.isnan(diag)
    fraction = float((diag[defined] >= threshold).mean()) if defined.any() else 0.0

    labels = feature_labels()
    names = tuple(l.rsplit("_p", 1)[0] for l in labels[::10])
    per_feature = []
    for f, name in enumerate(names):
        block = diag[f * 10 : (f + 1) * 10]
        ok = ~np.isnan(block)
        per_feature.append((name, float(block[ok].mean()) if ok.any() else math.nan))

    off = m.values.copy()
    np.fill_diagonal(off, np.nan)
    flat = np.abs(off).ravel()
    order = np.argsort(np.where(np.isnan(flat), -1.0, flat))[::-1]
    rows = m.row_labels()
    cols = m.col_labels()
    top = []
    for idx in order[: max(0, top_k)]:
        i, j = divmod(int(idx), N_DIMS)
        rho = off[i, j]
        if math.isnan(rho):
            break
        top.append((rows[i], cols[j], float(rho)))

    return DiagonalSummary(
        n=m.n,
        threshold=threshold,
        fraction_at_threshold=fraction,
        n_undefined_diagonal=int((~defined).sum()),
        per_feature_mean=tuple(per_feature),
        top_off_diagonal=tuple(top),
    )


def render_summary(s: DiagonalSummary) -> str:
    lines = [
        f"pairs used: {s.n}",
        "fraction of same-feature-same-span correlations >= "
        f"{s.threshold:g}: {s.fraction_at_threshold:.4f}"
        + (
            f" ({s.n_undefined_diagonal} undefined)"
            if s.n_undefined_diagonal
            else ""
        ),
        "per-feature mean diagonal rho:",
    ]
    for name, mean in s.per_feature_mean:
        shown = "undefined" if math.isnan(mean) else f"{mean:+.4f}"
        lines.append(f"  {name:<18} {shown}")
    lines.append("top off-diagonal |rho|:")
    for row, col, rho in s.top_off_diagonal:
        lines.append(f"  {row} vs {col}: {rho:+.4f}")
    return "\n".join(lines) + "\n"


def write_matrix_csv(m: CorrelationMatrix, path) -> None:
    """101x101 grid: labeled header row and column, full-precision cells."""
    cols = m.col_labels()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("," + ",".join(cols) + "\n")
        for i, row_label in enumerate(m.row_labels()):
            cells = [row_label]
            cells.extend(repr(float(v)) for v in m.values[i])
            fh.write(",".join(cells) + "\n")
