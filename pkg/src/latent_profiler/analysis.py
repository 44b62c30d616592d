"""Correlation and linear regression of measures against external scores.

Regressions are plain OLS solved through a column-pivoted QR factorisation,
optionally with a one-hot architecture covariate whose first level (in sorted
order) is absorbed by the intercept.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, DataError, EvaluationError, RankDeficientError, UndefinedMeasureError

RESERVED_COLUMNS = ("model_id", "architecture", "target", "group")


@dataclass(frozen=True)
class Observation:
    model_id: str
    architecture: str
    measures: Dict[str, float]
    target: float
    group: Optional[str] = None

    @property
    def missing(self) -> List[str]:
        return sorted(name for name, value in self.measures.items() if not math.isfinite(value))


@dataclass
class ObservationTable:
    rows: List[Observation]

    def __post_init__(self):
        seen = set()
        for row in self.rows:
            if row.model_id in seen:
                raise DataError(f"duplicate model_id {row.model_id!r}")
            seen.add(row.model_id)
            if row.target is None or not math.isfinite(row.target):
                raise DataError(f"row {row.model_id!r} has no target")

    def __len__(self):
        return len(self.rows)

    @property
    def architectures(self) -> List[str]:
        return sorted({row.architecture for row in self.rows})

    def column(self, name: str) -> np.ndarray:
        if name == "target":
            return np.array([row.target for row in self.rows], dtype=np.float64)
        return np.array([row.measures.get(name, math.nan) for row in self.rows], dtype=np.float64)

    @classmethod
    def from_csv(cls, path) -> "ObservationTable":
        """Read ``model_id, architecture, target[, group]`` plus one column per measure.

        Empty measure cells are kept as NaN and reported by ``Observation.missing``.
        """
        rows = []
        with open(Path(path), newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise DataError(f"{path}: empty observation file")
            for col in ("model_id", "target"):
                if col not in reader.fieldnames:
                    raise DataError(f"{path}: missing required column {col!r}")
            measure_cols = [c for c in reader.fieldnames if c not in RESERVED_COLUMNS]
            for lineno, rec in enumerate(reader, start=2):
                target_text = (rec.get("target") or "").strip()
                if not target_text:
                    raise DataError(f"{path}: line {lineno} has no target")
                try:
                    target = float(target_text)
                    measures = {
                        c: float(rec[c]) if (rec.get(c) or "").strip() else math.nan
                        for c in measure_cols
                    }
                except ValueError as exc:
                    raise DataError(f"{path}: line {lineno}: {exc}") from None
                rows.append(
                    Observation(
                        model_id=rec["model_id"],
                        architecture=(rec.get("architecture") or "").strip() or "default",
                        measures=measures,
                        target=target,
                        group=(rec.get("group") or "").strip() or None,
                    )
                )
        return cls(rows)

    def to_csv(self, path) -> None:
        names = sorted({name for row in self.rows for name in row.measures})
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model_id", "architecture", "target", "group", *names])
            for row in self.rows:
                writer.writerow([
                    row.model_id, row.architecture, repr(row.target), row.group or "",
                    *("" if not math.isfinite(row.measures.get(n, math.nan)) else repr(row.measures[n]) for n in names),
                ])


def aggregate_replicates(table: ObservationTable) -> ObservationTable:
    """Collapse rows sharing a ``group`` (and architecture) to their medians.

    Rows without a group pass through unchanged.
    """
    buckets: Dict[tuple, List[Observation]] = {}
    order: List[tuple] = []
    for row in table.rows:
        key = (row.architecture, row.group) if row.group else ("", row.model_id)
        if key not in buckets:
            buckets[key] = []
            order.append(key)
        buckets[key].append(row)
    merged = []
    for key in order:
        members = buckets[key]
        if len(members) == 1 and not members[0].group:
            merged.append(members[0])
            continue
        names = sorted({n for r in members for n in r.measures})
        measures = {}
        for n in names:
            vals = np.array([r.measures.get(n, math.nan) for r in members], dtype=np.float64)
            vals = vals[np.isfinite(vals)]
            measures[n] = float(np.median(vals)) if vals.size else math.nan
        merged.append(Observation(
            model_id=members[0].group or members[0].model_id,
            architecture=members[0].architecture,
            measures=measures,
            target=float(np.median([r.target for r in members])),
            group=members[0].group,
        ))
    return ObservationTable(merged)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ConfigurationError(f"pearson needs two equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 3:
        raise ConfigurationError(f"pearson needs at least 3 pairs, got {x.size}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedMeasureError("pearson correlation is undefined for a constant input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


@dataclass
class RegressionFit:
    """Fitted OLS model. ``residuals`` and ``fitted`` follow ``model_ids`` order."""

    coefficients: Dict[str, float]
    r_squared: float
    residuals: np.ndarray
    fitted: np.ndarray
    model_ids: List[str]
    features: List[str]
    architectures: List[str]
    use_architecture: bool
    dropped: List[str] = field(default_factory=list)
    holdout_mse: Optional[float] = None

    def design(self, table: ObservationTable) -> np.ndarray:
        return _design(table, self.features, self.architectures if self.use_architecture else None)[0]

    def predict(self, table: ObservationTable) -> np.ndarray:
        if self.use_architecture:
            unseen = sorted({r.architecture for r in table.rows} - set(self.architectures))
            if unseen:
                raise EvaluationError(f"architecture levels not seen in training: {', '.join(unseen)}")
        x, names = _design(table, self.features, self.architectures if self.use_architecture else None)
        missing = [f for f in self.features if not np.isfinite(table.column(f)).all()]
        if missing:
            raise EvaluationError(f"holdout rows are missing feature values for: {', '.join(missing)}")
        beta = np.array([self.coefficients[n] for n in names])
        return x @ beta

    def to_dict(self) -> dict:
        out = {
            "coefficients": self.coefficients,
            "r_squared": self.r_squared,
            "features": self.features,
            "use_architecture": self.use_architecture,
            "architectures": self.architectures,
            "residuals": {mid: float(r) for mid, r in zip(self.model_ids, self.residuals)},
            "dropped_rows": self.dropped,
        }
        if self.holdout_mse is not None:
            out["holdout_mse"] = self.holdout_mse
        return out


def _design(table: ObservationTable, features: Sequence[str], levels: Optional[List[str]]):
    cols = [np.ones(len(table))]
    names = ["intercept"]
    for f in features:
        cols.append(table.column(f))
        names.append(f)
    if levels is not None:
        arch = [row.architecture for row in table.rows]
        for level in levels[1:]:
            cols.append(np.array([1.0 if a == level else 0.0 for a in arch]))
            names.append(f"arch[{level}]")
    return np.column_stack(cols), names


def fit_linear(table: ObservationTable, features: Sequence[str], use_architecture: bool = False) -> RegressionFit:
    """Ordinary least squares of ``target`` on the features (and architecture).

    Rows missing any requested feature are dropped and listed in ``dropped``.

    Raises:
        RankDeficientError: the design matrix is rank deficient; the error names
            the columns that are linear combinations of the others.
    """
    features = list(features)
    if not features:
        raise ConfigurationError("at least one feature is required")
    keep, dropped = [], []
    for row in table.rows:
        complete = all(math.isfinite(row.measures.get(f, math.nan)) for f in features)
        (keep if complete else dropped).append(row)
    dropped = [row.model_id for row in dropped]
    used = ObservationTable(keep)
    levels = used.architectures if use_architecture else None
    x, names = _design(used, features, levels)
    n, p = x.shape
    if n < p + 1:
        raise ConfigurationError(f"need more than {p} rows to fit {p} coefficients, got {n}")
    y = used.column("target")

    q, r, piv = scipy.linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(n, p) * np.finfo(np.float64).eps * (diag[0] if diag.size else 0.0) * 1e3
    rank = int(np.sum(diag > tol))
    if rank < p:
        collinear = [names[i] for i in piv[rank:]]
        raise RankDeficientError(
            f"design matrix is rank deficient (rank {rank} < {p}); collinear columns: {', '.join(collinear)}",
            collinear,
        )
    beta_p = scipy.linalg.solve_triangular(r, q.T @ y)
    beta = np.empty(p)
    beta[piv] = beta_p
    fitted = x @ beta
    resid = y - fitted
    ss_res = float(resid @ resid)
    centred = y - y.mean()
    ss_tot = float(centred @ centred)
    r2 = 0.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return RegressionFit(
        coefficients={name: float(b) for name, b in zip(names, beta)},
        r_squared=r2,
        residuals=resid,
        fitted=fitted,
        model_ids=[row.model_id for row in used.rows],
        features=features,
        architectures=levels or [],
        use_architecture=use_architecture,
        dropped=dropped,
    )


def evaluate(fit: RegressionFit, holdout: ObservationTable) -> float:
    """Mean squared prediction error on held-out rows."""
    if len(holdout) == 0:
        raise EvaluationError("holdout table is empty")
    err = holdout.column("target") - fit.predict(holdout)
    return float(np.mean(err**2))
