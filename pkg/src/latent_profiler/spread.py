"""Whole-cloud spread measures: EEE, VRM and IsoScore.

All three look at how evenly a cloud uses its dimensions. EEE and IsoScore
work on the eigenvalues of the sample covariance; VRM compares per-axis
Vasicek entropy estimates against the entropy of a normal with the same
variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from ._parallel import map_chunks
from .errors import ConfigurationError, InsufficientDataError, UndefinedMeasureError
from .pointcloud import PointCloud

EEE_RELATIVE_FLOOR = 1e-12


@dataclass(frozen=True)
class EigenSpectrum:
    """Covariance eigenvalues in descending order."""

    values: np.ndarray
    total_variance: float

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "EigenSpectrum":
        vals = np.sort(np.asarray(values, dtype=np.float64))[::-1].copy()
        vals[vals < 0] = 0.0
        return cls(values=vals, total_variance=float(vals.sum()))

    @property
    def d(self) -> int:
        return self.values.shape[0]


def covariance(cloud) -> np.ndarray:
    """Unbiased (n - 1) sample covariance, accumulated in fixed chunk order.

    Accepts a ``PointCloud`` or a plain 2-d array (used for per-cell clouds).
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud)
    n = pts.shape[0]
    if n < 2:
        raise InsufficientDataError(f"covariance needs n >= 2 points, got {n}")

    sums = map_chunks(lambda s: pts[s].astype(np.float64).sum(axis=0), n)
    mean = np.sum(sums, axis=0) / n

    def gram(s):
        block = pts[s].astype(np.float64) - mean
        return block.T @ block

    grams = map_chunks(gram, n)
    total = grams[0]
    for g in grams[1:]:
        total = total + g
    cov = total / (n - 1)
    return 0.5 * (cov + cov.T)


def eigen_spectrum(cloud) -> EigenSpectrum:
    """Eigenvalues of the mean-centred sample covariance, largest first."""
    cov = covariance(cloud)
    vals = scipy.linalg.eigh(cov, eigvals_only=True, driver="evd")
    vals = vals[::-1].copy()
    # rounding can push null directions slightly negative
    vals[vals < 0] = 0.0
    return EigenSpectrum(values=vals, total_variance=float(vals.sum()))


def eee(spectrum) -> float:
    """Eigenvalue early enrichment.

    Area between the cumulative eigenvalue curve and the straight line from 0
    to the total variance ``v``, as a fraction of ``d * v / 2``. The area is the
    plain sum of differences at indices ``1..d``. 0 means every direction
    carries the same variance; values approach 1 as variance concentrates in
    the first component.

    Args:
        spectrum: an ``EigenSpectrum`` or a sequence of eigenvalues (any order).

    Raises:
        UndefinedMeasureError: total variance is zero.
    """
    if not isinstance(spectrum, EigenSpectrum):
        spectrum = EigenSpectrum.from_values(spectrum)
    vals = spectrum.values.astype(np.float64, copy=True)
    d = vals.shape[0]
    if d < 1:
        raise ConfigurationError("EEE needs at least one eigenvalue")
    if vals[0] <= 0:
        raise UndefinedMeasureError("EEE is undefined for zero total variance")
    vals[vals < EEE_RELATIVE_FLOOR * vals[0]] = 0.0
    v = vals.sum()
    cumulative = np.cumsum(vals)
    reference = np.arange(1, d + 1, dtype=np.float64) * (v / d)
    area = float(np.sum(cumulative - reference))
    return float(min(1.0, max(0.0, area / (0.5 * d * v))))


# -- VRM ----------------------------------------------------------------------


def default_window(n: int) -> int:
    return max(1, math.isqrt(n))


def vasicek_entropy(sorted_values: np.ndarray, window: int) -> np.ndarray:
    """Vasicek spacing entropy for each column of an ascending-sorted matrix.

    Spacings use clamped indices: ``x[i - m]`` below the first element reads
    ``x[0]`` and ``x[i + m]`` past the end reads ``x[n - 1]``. A zero spacing
    yields ``-inf`` for that column.
    """
    x = np.asarray(sorted_values, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    idx = np.arange(n)
    upper = x[np.minimum(idx + window, n - 1)]
    lower = x[np.maximum(idx - window, 0)]
    spacing = upper - lower
    with np.errstate(divide="ignore"):
        logs = np.log(spacing * (n / (2.0 * window)))
    return logs.mean(axis=0)


def vrm_terms(cloud: PointCloud, window: int | None = None) -> np.ndarray:
    """Per-dimension squared ratio errors ``(1 - H_vas / H_normal) ** 2``.

    Dimensions where the measure is undefined (zero variance, tied spacings, or
    a zero reference entropy) come back as NaN.
    """
    n = cloud.n
    if n < 4:
        raise InsufficientDataError(f"VRM needs n >= 4 points, got {n}")
    if window is None:
        window = default_window(n)
    if window < 1 or not window < n / 2:
        raise ConfigurationError(f"VRM window must satisfy 1 <= window < n/2, got {window} for n={n}")

    terms = np.empty(cloud.d, dtype=np.float64)
    step = 32
    for start in range(0, cloud.d, step):
        cols = cloud.points[:, start:start + step].astype(np.float64)
        var = cols.var(axis=0, ddof=1)
        h_vas = vasicek_entropy(np.sort(cols, axis=0), window)
        with np.errstate(divide="ignore", invalid="ignore"):
            ref = 0.5 * np.log(2.0 * math.pi * math.e * var)
            ratio = h_vas / ref
        block = (1.0 - ratio) ** 2
        bad = (var <= 0) | ~np.isfinite(h_vas) | (ref == 0) | ~np.isfinite(block)
        block[bad] = np.nan
        terms[start:start + block.shape[0]] = block
    return terms


def vrm(cloud: PointCloud, window: int | None = None) -> float:
    """Vasicek ratio mean-squared error over dimensions.

    Undefined dimensions are left out of the mean; if none remain the measure
    is undefined.
    """
    terms = vrm_terms(cloud, window)
    ok = np.isfinite(terms)
    if not ok.any():
        raise UndefinedMeasureError("VRM is undefined: no dimension has a usable entropy ratio")
    return float(terms[ok].mean())


# -- IsoScore -----------------------------------------------------------------


def isoscore_from_variances(variances: Sequence[float]) -> float:
    """IsoScore from the per-axis variances of a PCA-reoriented cloud."""
    diag = np.asarray(variances, dtype=np.float64)
    d = diag.shape[0]
    if d < 2:
        raise ConfigurationError(f"IsoScore needs d >= 2, got {d}")
    norm = np.linalg.norm(diag)
    if norm == 0:
        raise UndefinedMeasureError("IsoScore is undefined for zero covariance")
    root_d = math.sqrt(d)
    iso_diag = diag * (root_d / norm)
    defect = np.linalg.norm(iso_diag - 1.0) / math.sqrt(2.0 * (d - root_d))
    score = ((d - defect**2 * (d - root_d)) ** 2 - d) / (d * (d - 1))
    return float(min(1.0, max(0.0, score)))


def isoscore(cloud) -> float:
    """IsoScore of a cloud (or of a precomputed ``EigenSpectrum``).

    After PCA reorientation the covariance is diagonal with the eigenvalues on
    the diagonal, so the spectrum is all that is needed.
    """
    if isinstance(cloud, EigenSpectrum):
        spectrum = cloud
    else:
        if cloud.d < 2:
            raise ConfigurationError(f"IsoScore needs d >= 2, got {cloud.d}")
        spectrum = eigen_spectrum(cloud)
    return isoscore_from_variances(spectrum.values)
