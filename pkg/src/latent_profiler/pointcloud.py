"""Point clouds: storage, file I/O, synthetic generators and noise interpolation.

Points are held as read-only float32 matrices; every measure converts to
float64 before doing arithmetic. Random generation uses numpy's PCG64 bit
generator so a (arguments, seed) pair gives the same cloud on every platform.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, MatrixParseError

RNG_NAME = "PCG64"

MATRIX_MAGIC = b"LGPC"
MATRIX_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator from an int seed or a ``SeedSequence``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An ``n x d`` matrix of finite points plus a provenance label."""

    points: np.ndarray
    label: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float32, order="C", copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise ConfigurationError(f"points must be a 2-d matrix, got ndim={pts.ndim}")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ConfigurationError(f"point cloud must be at least 1x1, got {pts.shape}")
        if not np.isfinite(pts).all():
            bad = np.argwhere(~np.isfinite(pts))[0]
            raise ConfigurationError(
                f"non-finite value at row {bad[0]}, column {bad[1]}"
            )
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def as_float64(self, rows: slice | None = None) -> np.ndarray:
        block = self.points if rows is None else self.points[rows]
        return block.astype(np.float64)

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.points, other.points)

    def __repr__(self):
        return f"PointCloud(n={self.n}, d={self.d}, label={self.label!r})"


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: Sequence[float]
    scale: Sequence[float]


@dataclass(frozen=True)
class MixtureSpec:
    """Gaussian mixture with per-axis scales.

    ``scale`` may be a scalar-like single entry, broadcast over all axes.
    """

    components: Sequence[MixtureComponent]
    n: int
    seed: int = 0

    def validate(self) -> int:
        """Check the spec and return the dimensionality."""
        if not self.components:
            raise ConfigurationError("mixture needs at least one component")
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")
        weights = np.array([c.weight for c in self.components], dtype=np.float64)
        if (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-9:
            raise ConfigurationError(f"weights must be >= 0 and sum to 1, got {weights.tolist()}")
        dims = {len(np.atleast_1d(c.mean)) for c in self.components}
        if len(dims) != 1:
            raise ConfigurationError(f"component means have differing lengths {sorted(dims)}")
        d = dims.pop()
        for i, c in enumerate(self.components):
            scale = np.atleast_1d(np.asarray(c.scale, dtype=np.float64))
            if scale.size not in (1, d):
                raise ConfigurationError(f"component {i}: scale length {scale.size} != {d}")
            if (scale < 0).any() or not np.isfinite(scale).all():
                raise ConfigurationError(f"component {i}: scales must be finite and >= 0")
        return d

    def to_dict(self) -> dict:
        return {
            "n": int(self.n),
            "seed": int(self.seed),
            "components": [
                {
                    "weight": float(c.weight),
                    "mean": [float(v) for v in np.atleast_1d(c.mean)],
                    "scale": [float(v) for v in np.atleast_1d(c.scale)],
                }
                for c in self.components
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MixtureSpec":
        try:
            comps = [
                MixtureComponent(float(c["weight"]), list(c["mean"]), list(np.atleast_1d(c["scale"])))
                for c in data["components"]
            ]
            return cls(components=comps, n=int(data["n"]), seed=int(data.get("seed", 0)))
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed mixture spec: {exc}") from exc


# -- file I/O -----------------------------------------------------------------


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("binary", "csv"):
            raise ConfigurationError(f"unknown matrix format {fmt!r}")
        return fmt
    return "csv" if path.suffix.lower() in (".csv", ".txt") else "binary"


def load_matrix(path, format: str | None = None, label: str | None = None) -> PointCloud:
    """Read a cloud from a binary (``LGPC``) or headerless CSV file.

    The format is inferred from the extension when not given: ``.csv``/``.txt``
    is CSV, anything else binary.
    """
    path = Path(path)
    fmt = _infer_format(path, format)
    label = path.name if label is None else label
    if fmt == "binary":
        return PointCloud(_read_binary(path), label=label)
    return PointCloud(_read_csv(path), label=label)


def _read_binary(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise MatrixParseError(
            f"{path}: truncated header ({len(raw)} bytes, need {_HEADER.size}) at byte offset 0"
        )
    magic, version, rows, cols = _HEADER.unpack_from(raw, 0)
    if magic != MATRIX_MAGIC:
        raise MatrixParseError(f"{path}: bad magic {magic!r} at byte offset 0, expected {MATRIX_MAGIC!r}")
    if version != MATRIX_VERSION:
        raise MatrixParseError(f"{path}: unsupported version {version} at byte offset 4")
    if rows < 1 or cols < 1:
        raise MatrixParseError(f"{path}: empty shape rows={rows}, cols={cols} at byte offset 8")
    expected = rows * cols * 4
    payload = len(raw) - _HEADER.size
    if payload != expected:
        raise MatrixParseError(
            f"{path}: payload is {payload} bytes at byte offset {_HEADER.size}, "
            f"expected {expected} for {rows}x{cols} float32"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, cols)
    finite = np.isfinite(data)
    if not finite.all():
        idx = int(np.flatnonzero(~finite.ravel())[0])
        r, c = divmod(idx, cols)
        raise MatrixParseError(
            f"{path}: non-finite value at row {r}, column {c} (byte offset {_HEADER.size + 4 * idx})"
        )
    return data.astype(np.float32)


def _read_csv(path: Path) -> np.ndarray:
    rows: list[list[float]] = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise MatrixParseError(
                    f"{path}: line {lineno} has {len(fields)} fields, expected {width} (ragged rows)"
                )
            vals = []
            for col, tok in enumerate(fields, start=1):
                try:
                    v = float(tok)
                except ValueError:
                    raise MatrixParseError(
                        f"{path}: line {lineno}, field {col}: cannot parse {tok.strip()!r} as a number"
                    ) from None
                if not math.isfinite(v):
                    raise MatrixParseError(
                        f"{path}: line {lineno}, field {col}: non-finite value {tok.strip()!r}"
                    )
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise MatrixParseError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float32)


def save_matrix(cloud: PointCloud, path, format: str | None = None) -> None:
    path = Path(path)
    fmt = _infer_format(path, format)
    pts = cloud.points
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, pts.shape[0], pts.shape[1]))
            fh.write(pts.astype("<f4", copy=False).tobytes(order="C"))
    else:
        # repr of a float32 round-trips through float() -> float32
        with open(path, "w", encoding="utf-8") as fh:
            for row in pts:
                fh.write(",".join(repr(float(v)) for v in row))
                fh.write("\n")


# -- generators ---------------------------------------------------------------


def _below(high: float, low: float) -> np.float32:
    """Largest float32 strictly below ``high``."""
    h = np.float32(high)
    if float(h) >= high:
        h = np.nextafter(h, np.float32(low))
    return h


def generate_uniform(n: int, d: int, low: float = 0.0, high: float = 1.0, seed: int = 0) -> PointCloud:
    if n < 1 or d < 1:
        raise ConfigurationError(f"n and d must be >= 1, got n={n}, d={d}")
    if not low < high:
        raise ConfigurationError(f"need low < high, got low={low}, high={high}")
    rng = make_rng(seed)
    pts = rng.uniform(low, high, size=(n, d)).astype(np.float32)
    # float32 rounding must not reach the open upper bound
    np.minimum(pts, _below(high, low), out=pts)
    np.maximum(pts, np.float32(low), out=pts)
    return PointCloud(pts, label=f"uniform(n={n},d={d},low={low},high={high},seed={seed})")


def generate_mixture(spec: MixtureSpec) -> PointCloud:
    """Draw ``spec.n`` points: pick a component by weight, then sample its Gaussian."""
    d = spec.validate()
    rng = make_rng(spec.seed)
    weights = np.array([c.weight for c in spec.components], dtype=np.float64)
    weights = weights / weights.sum()
    which = rng.choice(len(spec.components), size=spec.n, p=weights)
    noise = rng.standard_normal(size=(spec.n, d))
    means = np.array([np.atleast_1d(c.mean) for c in spec.components], dtype=np.float64)
    scales = np.array(
        [np.broadcast_to(np.atleast_1d(np.asarray(c.scale, dtype=np.float64)), (d,)) for c in spec.components]
    )
    pts = means[which] + scales[which] * noise
    return PointCloud(pts, label=f"mixture(n={spec.n},components={len(spec.components)},seed={spec.seed})")


def noise_matrix(shape, seed: int) -> np.ndarray:
    """The standard-normal matrix that ``interpolate_noise`` mixes in for ``seed``."""
    return make_rng(seed).standard_normal(size=shape)


def interpolate_noise(base: PointCloud, alpha: float, seed: int = 0) -> PointCloud:
    """Return ``(1 - alpha) * base + alpha * eps`` with ``eps ~ N(0, 1)`` entrywise."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")
    eps = noise_matrix(base.points.shape, seed)
    out = (1.0 - alpha) * base.as_float64() + alpha * eps
    label = f"{base.label}+noise(alpha={alpha},seed={seed})" if base.label else f"noise(alpha={alpha},seed={seed})"
    return PointCloud(out, label=label)


def random_mixture_spec(
    components: int,
    d: int,
    n: int,
    scale: float = 1.0,
    separation: float = 5.0,
    seed: int = 0,
    weights: Sequence[float] | None = None,
) -> MixtureSpec:
    """Mixture with means drawn from ``N(0, separation^2)`` and isotropic ``scale``.

    Means come from a stream independent of the point-sampling seed, so the same
    ``seed`` with different ``scale`` values gives the same component centres.
    """
    if components < 1:
        raise ConfigurationError("mixture needs at least one component")
    if weights is None:
        weights = [1.0 / components] * components
    if len(weights) != components:
        raise ConfigurationError(f"{len(weights)} weights given for {components} components")
    mean_seed, point_seed = np.random.SeedSequence(seed).spawn(2)
    means = separation * make_rng(mean_seed).standard_normal(size=(components, d))
    comps = [MixtureComponent(float(w), means[i].tolist(), [float(scale)]) for i, w in enumerate(weights)]
    return MixtureSpec(components=comps, n=n, seed=int(point_seed.generate_state(1)[0]))
