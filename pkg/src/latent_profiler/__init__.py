"""Geometry measures for high-dimensional point clouds.

Spread measures (EEE, VRM, IsoScore) work on the eigen-spectrum and marginals of
a cloud. Quantization measures (patchiness, point-count odds, reconstruction
skew/error/IQR, centroid spacing, per-cluster EEE) work on a product or additive
quantizer fit to the cloud. ``analysis`` relates measures to external scores.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DataError,
    EvaluationError,
    InsufficientDataError,
    MatrixParseError,
    ProfilerError,
    RankDeficientError,
    UndefinedMeasureError,
)
from .pointcloud import (
    MixtureComponent,
    MixtureSpec,
    PointCloud,
    generate_mixture,
    generate_uniform,
    interpolate_noise,
    load_matrix,
    save_matrix,
)
from .spread import EigenSpectrum, eee, eigen_spectrum, isoscore, vrm
from .quantizer import (
    Assignment,
    CellStats,
    QuantizationModel,
    encode_and_stats,
    kmeans,
    train_additive,
    train_product,
)
from .qmeasures import (
    MeasureReport,
    centroid_dist_var,
    cluster_eee,
    point_count_kl,
    point_count_var,
    point_patchiness,
    reconstruction_error,
    reconstruction_iqr,
    reconstruction_skew,
)
from .analysis import ObservationTable, RegressionFit, evaluate, fit_linear, pearson
from .corpus import compare_profiles, frequency_profile, sample_sequences

__all__ = [
    "ConfigurationError",
    "DataError",
    "EvaluationError",
    "InsufficientDataError",
    "MatrixParseError",
    "ProfilerError",
    "RankDeficientError",
    "UndefinedMeasureError",
    "MixtureComponent",
    "MixtureSpec",
    "PointCloud",
    "generate_mixture",
    "generate_uniform",
    "interpolate_noise",
    "load_matrix",
    "save_matrix",
    "Assignment",
    "CellStats",
    "QuantizationModel",
    "encode_and_stats",
    "kmeans",
    "train_additive",
    "train_product",
    "MeasureReport",
    "centroid_dist_var",
    "cluster_eee",
    "point_count_kl",
    "point_count_var",
    "point_patchiness",
    "reconstruction_error",
    "reconstruction_iqr",
    "reconstruction_skew",
    "EigenSpectrum",
    "eee",
    "eigen_spectrum",
    "isoscore",
    "vrm",
    "ObservationTable",
    "RegressionFit",
    "evaluate",
    "fit_linear",
    "pearson",
    "compare_profiles",
    "frequency_profile",
    "sample_sequences",
]
