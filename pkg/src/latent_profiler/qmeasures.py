"""Measures computed from a trained quantizer and the cloud it encodes.

Cell-density measures (patchiness, point-count odds variance and KL) only look
at how many points land in each centroid. Reconstruction measures (skew, error,
IQR) look at per-point reconstruction error. Centroid spacing and per-cluster
EEE look at the codebooks and at the points inside each cell.

Every measure raises ``UndefinedMeasureError`` when it has no value for the
input instead of returning NaN.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ._parallel import map_chunks
from .errors import ConfigurationError, InsufficientDataError, UndefinedMeasureError
from .pointcloud import PointCloud
from .quantizer import PRODUCT, Assignment, CellStats, QuantizationModel
from .spread import eee, eigen_spectrum

OK = "ok"
UNDEFINED = "undefined"
PARTIAL = "partial"


@dataclass
class MeasureValue:
    value: Optional[float]
    status: str = OK
    detail: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out: dict = {"status": self.status}
        if self.value is not None:
            out["value"] = self.value
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class MeasureReport:
    """Named measure results for one cloud, with everything needed to rerun them."""

    measures: Dict[str, MeasureValue]
    config: dict
    seeds: dict
    provenance: str = ""
    schema_version: int = 1
    library_version: str = ""
    training: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "schema_version": self.schema_version,
            "library_version": self.library_version,
            "provenance": self.provenance,
            "measures": {name: mv.to_dict() for name, mv in self.measures.items()},
            "config": self.config,
            "seeds": self.seeds,
        }
        if self.training:
            out["training"] = self.training
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def any_undefined(self) -> bool:
        return any(mv.status == UNDEFINED for mv in self.measures.values())


def _counts(stats) -> np.ndarray:
    counts = stats.counts if isinstance(stats, CellStats) else stats
    counts = np.asarray(counts, dtype=np.float64)
    return counts.reshape(1, -1) if counts.ndim == 1 else counts


def _error_magnitudes(stats) -> np.ndarray:
    em = stats.per_point_error if isinstance(stats, CellStats) else stats
    return np.asarray(em, dtype=np.float64).ravel()


def point_patchiness(stats) -> float:
    """Variance-adjusted mean cell density, ``(mean + (V / mean - 1)) / mean``.

    All ``m * k`` cell counts are pooled into one sample; ``V`` is its sample
    variance (``m * k - 1`` denominator). Equal counts give
    ``(mean - 1) / mean``; more uneven counts give larger values.

    Args:
        stats: ``CellStats`` or an array of cell counts (1-d or ``m x k``).
    """
    counts = _counts(stats).ravel()
    if counts.size < 2:
        raise InsufficientDataError(f"patchiness needs at least 2 cells, got {counts.size}")
    mean = counts.mean()
    if mean <= 0:
        raise UndefinedMeasureError("patchiness is undefined when every cell is empty")
    var = counts.var(ddof=1)
    return float((mean + (var / mean - 1.0)) / mean)


def _odds(stats) -> np.ndarray:
    counts = _counts(stats)
    m, k = counts.shape
    totals = counts.sum(axis=1, keepdims=True)
    if (totals <= 0).any():
        raise InsufficientDataError("every codebook needs at least one assigned point")
    frac = counts / totals
    if (frac >= 1.0).any():
        raise UndefinedMeasureError("odds ratio is undefined: one cell holds every point of a codebook")
    return (k - 1) * frac / (1.0 - frac)


def point_count_var(stats) -> float:
    """Pooled variance of per-cell odds ratios ``(k - 1) c / (1 - c)``, over ``m (k - 1)``."""
    odds = _odds(stats)
    m, k = odds.shape
    if k < 2:
        raise UndefinedMeasureError("point-count variance needs k >= 2")
    return float(np.sum((odds - odds.mean()) ** 2) / (m * (k - 1)))


def point_count_kl(stats) -> float:
    """KL divergence of the normalised odds vector from uniform, averaged over codebooks."""
    odds = _odds(stats)
    m, k = odds.shape
    p = odds / odds.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p * k), 0.0)
    return float(max(0.0, terms.sum(axis=1).mean()))


def reconstruction_skew(stats) -> float:
    """Adjusted Fisher-Pearson skew of the error magnitudes (sample std, n - 1)."""
    em = _error_magnitudes(stats)
    n = em.size
    if n < 3:
        raise InsufficientDataError(f"skew needs n >= 3 values, got {n}")
    s = em.std(ddof=1)
    if not s > 0:
        raise UndefinedMeasureError("reconstruction skew is undefined for zero spread in error magnitudes")
    z = (em - em.mean()) / s
    return float(n * np.sum(z**3) / ((n - 1) * (n - 2)))


def reconstruction_error(cloud: PointCloud, assignment: Assignment) -> float:
    """Sum of squared residuals over the sum of squared coordinates."""
    def sq_sum(s):
        x = cloud.as_float64(s)
        return float(np.einsum("ij,ij->", x, x))

    total = math.fsum(map_chunks(sq_sum, cloud.n))
    if total <= 0:
        raise UndefinedMeasureError("reconstruction error is undefined for an all-zero cloud")
    return float(assignment.recon_error_total / total)


def reconstruction_iqr(stats) -> float:
    """75th minus 25th percentile (linear interpolation) of the error magnitudes."""
    em = _error_magnitudes(stats)
    if em.size < 4:
        raise InsufficientDataError(f"IQR needs n >= 4 values, got {em.size}")
    if not em.any():
        raise UndefinedMeasureError("reconstruction IQR is undefined for perfect reconstruction")
    q25, q75 = np.percentile(em, [25.0, 75.0])
    return float(q75 - q25)


def centroid_dist_var(stats) -> float:
    """Variance (``m * k - 1`` denominator) of normalised nearest-centroid distances.

    Each codebook's distances are divided by that codebook's largest one.

    Args:
        stats: ``CellStats`` or an ``m x k`` (or 1-d) array of nearest-centroid
            distances.
    """
    nn = stats.nn_dist if isinstance(stats, CellStats) else stats
    nn = np.asarray(nn, dtype=np.float64)
    if nn.ndim == 1:
        nn = nn.reshape(1, -1)
    m, k = nn.shape
    if k < 2 or not np.isfinite(nn).all():
        raise ConfigurationError("centroid distance variance needs k >= 2 centroids per codebook")
    top = nn.max(axis=1, keepdims=True)
    if (top <= 0).any():
        raise UndefinedMeasureError("centroid distance variance is undefined: all centroids of a codebook coincide")
    rho = (nn / top).ravel()
    return float(np.sum((rho - rho.mean()) ** 2) / (m * k - 1))


# -- per-cluster EEE ------------------------------------------------------------


@dataclass(frozen=True)
class ClusterEEESummary:
    value: Optional[float]
    included: int
    skipped: int
    min_cluster: int

    @property
    def status(self) -> str:
        if self.included == 0:
            return UNDEFINED
        return PARTIAL if self.skipped else OK


def default_min_cluster(model: QuantizationModel) -> int:
    width = max(b - a for a, b in model.dim_ranges)
    return max(8, width + 1)


def _rows_eee(rows: np.ndarray) -> Optional[float]:
    try:
        return eee(eigen_spectrum(rows))
    except UndefinedMeasureError:
        return None


def cluster_eee_summary(
    model: QuantizationModel,
    cloud: PointCloud,
    assignment: Assignment,
    min_cluster: int | None = None,
) -> ClusterEEESummary:
    """Mean EEE over the cells of every codebook.

    A product cell holds its points' subvectors for that subspace. An additive
    cell holds residuals ``x - sum of the other codebooks' selected centroids``
    for the points whose code in this codebook selects it. Cells with fewer than
    ``min_cluster`` points or no variance are skipped and counted.
    """
    if min_cluster is None:
        min_cluster = default_min_cluster(model)
    min_cluster = max(2, int(min_cluster))
    points = model.prepared_points(cloud)
    codes = assignment.codes

    jobs = []
    for j in range(model.m):
        order = np.argsort(codes[:, j], kind="stable")
        bounds = np.searchsorted(codes[order, j], np.arange(model.k + 1))
        for c in range(model.k):
            jobs.append((j, order[bounds[c]:bounds[c + 1]]))

    def cell(idx_job):
        j, idx = idx_job
        if idx.size < min_cluster:
            return None
        if model.kind == PRODUCT:
            a, b = model.dim_ranges[j]
            rows = np.asarray(points[idx, a:b], dtype=np.float64)
        else:
            rows = np.asarray(points[idx], dtype=np.float64)
            for l, book in enumerate(model.codebooks):
                if l != j:
                    rows -= book[codes[idx, l]]
        return _rows_eee(rows)

    results = []
    for part in map_chunks(lambda s: [cell(job) for job in jobs[s]], len(jobs), size=16):
        results.extend(part)
    values = [r for r in results if r is not None]
    skipped = len(results) - len(values)
    value = float(np.mean(values)) if values else None
    return ClusterEEESummary(value=value, included=len(values), skipped=skipped, min_cluster=min_cluster)


def cluster_eee(
    model: QuantizationModel,
    cloud: PointCloud,
    assignment: Assignment,
    min_cluster: int | None = None,
) -> float:
    summary = cluster_eee_summary(model, cloud, assignment, min_cluster)
    if summary.value is None:
        raise UndefinedMeasureError(
            f"per-cluster EEE is undefined: all {summary.skipped} cells were skipped "
            f"(fewer than {summary.min_cluster} points or zero variance)"
        )
    return summary.value


# -- batch evaluation -----------------------------------------------------------

QUANTIZER_MEASURES = ("pp", "pc_var", "pc_kl", "rs", "re", "ri", "cd_var", "pd_eee")


def quantizer_measures(
    model: QuantizationModel,
    cloud: PointCloud,
    assignment: Assignment,
    stats: CellStats,
    names=QUANTIZER_MEASURES,
    min_cluster: int | None = None,
) -> Dict[str, MeasureValue]:
    """Evaluate the requested measures, turning undefined results into statuses."""
    simple = {
        "pp": lambda: point_patchiness(stats),
        "pc_var": lambda: point_count_var(stats),
        "pc_kl": lambda: point_count_kl(stats),
        "rs": lambda: reconstruction_skew(stats),
        "re": lambda: reconstruction_error(cloud, assignment),
        "ri": lambda: reconstruction_iqr(stats),
        "cd_var": lambda: centroid_dist_var(stats),
    }
    out: Dict[str, MeasureValue] = {}
    for name in names:
        if name == "pd_eee":
            summary = cluster_eee_summary(model, cloud, assignment, min_cluster)
            out[name] = MeasureValue(
                summary.value,
                summary.status,
                {"clusters_included": summary.included, "clusters_skipped": summary.skipped,
                 "min_cluster": summary.min_cluster},
            )
            continue
        if name not in simple:
            raise ConfigurationError(f"unknown quantizer measure {name!r}")
        try:
            value = simple[name]()
        except (UndefinedMeasureError, InsufficientDataError, ConfigurationError) as exc:
            out[name] = MeasureValue(None, UNDEFINED, {"reason": str(exc)})
        else:
            if not math.isfinite(value):
                out[name] = MeasureValue(None, UNDEFINED, {"reason": "non-finite result"})
            else:
                out[name] = MeasureValue(value)
    return out
