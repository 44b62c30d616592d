"""End-to-end measure suites: spread measures plus one or both quantizers."""

from __future__ import annotations

import math
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .errors import ConfigurationError, InsufficientDataError, UndefinedMeasureError
from .pointcloud import RNG_NAME, PointCloud
from .qmeasures import (
    OK,
    PARTIAL,
    QUANTIZER_MEASURES,
    UNDEFINED,
    MeasureReport,
    MeasureValue,
    quantizer_measures,
)
from .quantizer import ADDITIVE, PRODUCT, QuantizationModel, encode_and_stats, normalize_kind, train
from .spread import default_window, eee, eigen_spectrum, isoscore, vrm_terms

SPREAD_MEASURES = ("eee", "vrm", "isoscore")
ALL_MEASURES = SPREAD_MEASURES + QUANTIZER_MEASURES
SCHEMA_VERSION = 1

KIND_PREFIX = {PRODUCT: "pq", ADDITIVE: "aq"}

CONVENTIONS = {
    "eee_area": "discrete sum of cumulative minus reference at indices 1..d",
    "eee_centering": "points mean-centred before covariance",
    "eee_floor": "eigenvalues below 1e-12 * largest set to 0",
    "vrm_window_default": "floor(sqrt(n))",
    "vrm_endpoints": "clamped indices",
    "vrm_reference": "0.5 * ln(2 * pi * e * variance)",
    "isoscore_normalisation": "PCA variances scaled to length sqrt(d)",
    "patchiness_pooling": "all m*k counts pooled, variance denominator m*k-1",
    "pc_kl_distribution": "odds normalised per codebook vs uniform 1/k, averaged over codebooks",
    "additive_cells": "residual x minus other codebooks' selected centroids",
    "centroid_nn": "exact pairwise search within each codebook",
}


def _finite_or_undefined(value: float, detail=None) -> MeasureValue:
    if value is None or not math.isfinite(value):
        return MeasureValue(None, UNDEFINED, detail or {"reason": "non-finite result"})
    return MeasureValue(float(value), OK, detail or {})


def spread_measures(cloud: PointCloud, names: Iterable[str] = SPREAD_MEASURES,
                    vrm_window: Optional[int] = None) -> Dict[str, MeasureValue]:
    names = list(names)
    out: Dict[str, MeasureValue] = {}
    spectrum = None
    if "eee" in names or "isoscore" in names:
        try:
            spectrum = eigen_spectrum(cloud)
        except InsufficientDataError as exc:
            spectrum = exc
    for name in names:
        if name == "vrm":
            try:
                terms = vrm_terms(cloud, vrm_window)
            except (InsufficientDataError, ConfigurationError) as exc:
                out[name] = MeasureValue(None, UNDEFINED, {"reason": str(exc)})
                continue
            ok = np.isfinite(terms)
            window = vrm_window if vrm_window is not None else default_window(cloud.n)
            detail = {"window": int(window), "dims_excluded": int((~ok).sum())}
            if not ok.any():
                detail["reason"] = "no dimension has a usable entropy ratio"
                out[name] = MeasureValue(None, UNDEFINED, detail)
            else:
                out[name] = MeasureValue(float(terms[ok].mean()), PARTIAL if (~ok).any() else OK, detail)
        elif name in ("eee", "isoscore"):
            if isinstance(spectrum, Exception):
                out[name] = MeasureValue(None, UNDEFINED, {"reason": str(spectrum)})
                continue
            try:
                value = eee(spectrum) if name == "eee" else isoscore(spectrum)
            except (UndefinedMeasureError, ConfigurationError) as exc:
                out[name] = MeasureValue(None, UNDEFINED, {"reason": str(exc)})
            else:
                out[name] = _finite_or_undefined(value)
        else:
            raise ConfigurationError(f"unknown spread measure {name!r}")
    return out


def parse_measure_list(text: Optional[str]) -> List[str]:
    if not text:
        return list(ALL_MEASURES)
    names = [t.strip().lower().replace("-", "_") for t in text.split(",") if t.strip()]
    aliases = {"cdvar": "cd_var", "pcvar": "pc_var", "pckl": "pc_kl", "pdeee": "pd_eee", "is": "isoscore"}
    names = [aliases.get(n, n) for n in names]
    unknown = [n for n in names if n not in ALL_MEASURES]
    if unknown:
        raise ConfigurationError(f"unknown measures: {', '.join(unknown)}; choose from {', '.join(ALL_MEASURES)}")
    return names


def parse_kinds(kind: str) -> List[str]:
    if kind.lower() in ("both", "all"):
        return [ADDITIVE, PRODUCT]
    return [normalize_kind(k) for k in kind.split(",")]


def measure_cloud(
    cloud: PointCloud,
    config: dict,
    models: Optional[Sequence[QuantizationModel]] = None,
) -> MeasureReport:
    """Run the configured measure suite on ``cloud``.

    ``config`` keys: ``kind`` (pq, aq, both), ``m``, ``k``, ``iters``,
    ``icm_sweeps``, ``seed``, ``measures`` (list or None for all),
    ``vrm_window``, ``min_cluster``. Pre-trained ``models`` replace training.
    The whole ``config`` is embedded in the report.
    """
    names = list(config.get("measures") or ALL_MEASURES)
    spread_names = [n for n in names if n in SPREAD_MEASURES]
    q_names = [n for n in names if n in QUANTIZER_MEASURES]
    results: Dict[str, MeasureValue] = {}
    results.update(spread_measures(cloud, spread_names, config.get("vrm_window")))

    training: Dict[str, dict] = {}
    if q_names:
        if models is None:
            models = [
                train(cloud, kind, m=config["m"], k=config["k"], iters=config.get("iters"),
                      icm_sweeps=config.get("icm_sweeps", 2), seed=config["seed"],
                      permute=bool(config.get("permute", False)))
                for kind in parse_kinds(config["kind"])
            ]
        prefix = len(models) > 1
        for model in models:
            assignment, stats = encode_and_stats(model, cloud)
            values = quantizer_measures(model, cloud, assignment, stats, q_names, config.get("min_cluster"))
            tag = KIND_PREFIX[model.kind]
            for name, mv in values.items():
                results[f"{tag}.{name}" if prefix else name] = mv
            info = dict(model.train_info)
            info["encode_error"] = assignment.recon_error_total
            training[tag] = info

    seeds = {"rng": RNG_NAME}
    if q_names:
        seeds["quantizer"] = int(config.get("seed", 0))
    for key in ("noise_seed",):
        if key in config:
            seeds[key] = int(config[key])
    report = MeasureReport(
        measures=results,
        config={**config, "conventions": CONVENTIONS},
        seeds=seeds,
        provenance=cloud.label,
        schema_version=SCHEMA_VERSION,
        library_version=__version__,
        training=training,
    )
    return report
