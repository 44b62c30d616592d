"""k-means, product quantization and additive (LSQ-style) quantization.

Both quantizers share the same k-means++ seeding and nearest-centroid kernels.
The additive quantizer alternates ICM encoding (re-pick one codebook's code
while the others stay fixed, only accepting strict improvements) with a joint
least-squares refit of every codebook given the codes.

All heavy loops run over fixed-size row chunks (see ``_parallel``) so results
do not depend on the worker count.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.spatial.distance import cdist

from ._parallel import chunk_slices, map_chunks
from .errors import ConfigurationError, MatrixParseError
from .pointcloud import PointCloud, make_rng

PRODUCT = "product"
ADDITIVE = "additive"
KIND_ALIASES = {"pq": PRODUCT, "product": PRODUCT, "aq": ADDITIVE, "additive": ADDITIVE}

# k-means++ seeds from at most this many points per centroid
SEED_SAMPLE_PER_CENTROID = 128

DEFAULT_KMEANS_ITERS = 25
DEFAULT_OUTER_ITERS = 8
DEFAULT_ICM_SWEEPS = 2

MODEL_MAGIC = b"LGQM"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sIBBHIIQ")


def normalize_kind(kind: str) -> str:
    try:
        return KIND_ALIASES[kind.lower()]
    except (KeyError, AttributeError):
        raise ConfigurationError(f"unknown quantizer kind {kind!r}; use pq or aq") from None


# -- shared kernels -------------------------------------------------------------


def _as64(block) -> np.ndarray:
    return np.asarray(block, dtype=np.float64)


def _sum_in_order(parts):
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total


def assign_nearest(points, centroids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per row (lowest index on ties) and its squared distance."""
    centroids = _as64(centroids)
    c_sq = np.einsum("ij,ij->i", centroids, centroids)

    def work(s):
        x = _as64(points[s])
        scores = c_sq - 2.0 * (x @ centroids.T)
        lab = np.argmin(scores, axis=1)
        diff = x - centroids[lab]
        return lab, np.einsum("ij,ij->i", diff, diff)

    parts = map_chunks(work, len(points))
    labels = np.concatenate([p[0] for p in parts])
    dists = np.concatenate([p[1] for p in parts])
    return labels, dists


def _onehot(labels: np.ndarray, k: int) -> scipy.sparse.csr_matrix:
    n = labels.shape[0]
    return scipy.sparse.csr_matrix(
        (np.ones(n, dtype=np.float64), (labels, np.arange(n))), shape=(k, n)
    )


def _cluster_sums(points, labels: np.ndarray, k: int) -> np.ndarray:
    parts = map_chunks(lambda s: _onehot(labels[s], k) @ _as64(points[s]), len(points))
    return _sum_in_order(parts)


def _seed_sample(n: int, k: int, rng: np.random.Generator) -> np.ndarray | None:
    cap = SEED_SAMPLE_PER_CENTROID * k
    if n <= cap:
        return None
    return np.sort(rng.choice(n, size=cap, replace=False))


def kmeans_plusplus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding over the rows of ``x``."""
    x = _as64(x)
    n = x.shape[0]
    x_sq = np.einsum("ij,ij->i", x, x)
    chosen = np.empty(k, dtype=np.int64)
    taken = np.zeros(n, dtype=bool)
    d2 = np.full(n, np.inf)

    def take(idx):
        c = x[idx]
        # norm expansion; clamped and zeroed at chosen rows so they are never redrawn
        np.minimum(d2, np.maximum(x_sq - 2.0 * (x @ c) + c @ c, 0.0), out=d2)
        taken[idx] = True
        d2[taken] = 0.0

    chosen[0] = rng.integers(n)
    take(chosen[0])
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            cum = np.cumsum(d2)
            idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            idx = min(idx, n - 1)
            while d2[idx] == 0 and idx > 0:
                idx -= 1
        else:
            # every point coincides with a chosen seed
            free = np.flatnonzero(~taken)
            idx = int(free[0]) if free.size else 0
        chosen[i] = idx
        take(idx)
    return x[chosen].copy()


def _seed_centroids(points, k: int, rng: np.random.Generator) -> np.ndarray:
    sample = _seed_sample(len(points), k, rng)
    rows = points if sample is None else np.asarray(points)[sample]
    return kmeans_plusplus(rows, k, rng)


def _reseed_empty(centroids: np.ndarray, counts: np.ndarray, dists: np.ndarray, candidates) -> None:
    """Move empty centroids onto the points with the largest current error."""
    empty = np.flatnonzero(counts == 0)
    if empty.size == 0:
        return
    far = np.argsort(-dists, kind="stable")[: empty.size]
    centroids[empty[: far.size]] = candidates(far)


# -- k-means ------------------------------------------------------------------


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    objective: float
    history: List[float] = field(default_factory=list)

    def __iter__(self):
        # allows ``centroids, labels = kmeans(...)``
        return iter((self.centroids, self.labels))


def kmeans(points, k: int, iters: int = DEFAULT_KMEANS_ITERS, seed=0) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeds.

    ``history`` holds the objective (sum of squared distances) at each
    assignment step, and is non-increasing. Clusters left empty by an update
    are re-seeded on the points farthest from their centroid.
    """
    if isinstance(points, PointCloud):
        points = points.points
    if getattr(points, "ndim", 2) == 1:
        points = np.asarray(points).reshape(-1, 1)
    n = len(points)
    if k < 1 or iters < 1:
        raise ConfigurationError(f"k and iters must be >= 1, got k={k}, iters={iters}")
    if k > n:
        raise ConfigurationError(f"k={k} exceeds the number of points n={n}")
    rng = make_rng(seed)
    centroids = _seed_centroids(points, k, rng)
    history = []
    for _ in range(iters):
        labels, dists = assign_nearest(points, centroids)
        history.append(float(dists.sum()))
        counts = np.bincount(labels, minlength=k)
        sums = _cluster_sums(points, labels, k)
        nonempty = counts > 0
        centroids = centroids.copy()
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        _reseed_empty(centroids, counts, dists, lambda idx: _as64(np.asarray(points)[idx]))
    labels, dists = assign_nearest(points, centroids)
    objective = float(dists.sum())
    history.append(objective)
    return KMeansResult(centroids=centroids, labels=labels, objective=objective, history=history)


# -- model --------------------------------------------------------------------


def split_ranges(d: int, m: int) -> Tuple[Tuple[int, int], ...]:
    """Contiguous ranges covering ``[0, d)``; the first ``d % m`` are one wider."""
    if m < 1 or d < m:
        raise ConfigurationError(f"cannot split d={d} dimensions into m={m} subspaces")
    base, extra = divmod(d, m)
    ranges, start = [], 0
    for j in range(m):
        width = base + (1 if j < extra else 0)
        ranges.append((start, start + width))
        start += width
    return tuple(ranges)


@dataclass(frozen=True, eq=False)
class QuantizationModel:
    """Codebooks of a trained product or additive quantizer.

    Product codebooks have the width of their subspace; additive codebooks are
    full width and their selected centroids are summed.
    """

    kind: str
    codebooks: Tuple[np.ndarray, ...]
    dim_ranges: Tuple[Tuple[int, int], ...]
    d: int
    icm_sweeps: int = 0
    dim_order: np.ndarray | None = None
    train_info: dict = field(default_factory=dict)

    def __post_init__(self):
        books = tuple(np.array(c, dtype=np.float64) for c in self.codebooks)
        if not books:
            raise ConfigurationError("model needs at least one codebook")
        k = books[0].shape[0]
        for j, (c, (a, b)) in enumerate(zip(books, self.dim_ranges)):
            width = b - a
            if c.shape != (k, width):
                raise ConfigurationError(f"codebook {j} has shape {c.shape}, expected {(k, width)}")
            if not np.isfinite(c).all():
                raise ConfigurationError(f"codebook {j} has non-finite entries")
            c.setflags(write=False)
        if len(books) != len(self.dim_ranges):
            raise ConfigurationError("one dimension range per codebook is required")
        object.__setattr__(self, "codebooks", books)

    @property
    def m(self) -> int:
        return len(self.codebooks)

    @property
    def k(self) -> int:
        return self.codebooks[0].shape[0]

    def reconstruct(self, codes: np.ndarray) -> np.ndarray:
        codes = np.asarray(codes)
        out = np.zeros((codes.shape[0], self.d), dtype=np.float64)
        if self.kind == PRODUCT:
            for j, (a, b) in enumerate(self.dim_ranges):
                out[:, a:b] = self.codebooks[j][codes[:, j]]
            if self.dim_order is not None:
                unpermuted = np.empty_like(out)
                unpermuted[:, self.dim_order] = out
                out = unpermuted
        else:
            for j in range(self.m):
                out += self.codebooks[j][codes[:, j]]
        return out

    def prepared_points(self, cloud: PointCloud) -> np.ndarray:
        """Cloud rows in the column order the codebooks were trained on."""
        if self.dim_order is not None:
            return cloud.points[:, self.dim_order]
        return cloud.points

    def save(self, path) -> None:
        kind_code = 0 if self.kind == PRODUCT else 1
        flags = 1 if self.dim_order is not None else 0
        with open(path, "wb") as fh:
            fh.write(_MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, kind_code, flags,
                                        self.icm_sweeps, self.m, self.k, self.d))
            for a, b in self.dim_ranges:
                fh.write(struct.pack("<QQ", a, b))
            if self.dim_order is not None:
                fh.write(np.asarray(self.dim_order, dtype="<u4").tobytes())
            for c in self.codebooks:
                fh.write(c.astype("<f4").tobytes(order="C"))
            meta = json.dumps(self.train_info, sort_keys=True).encode("utf-8")
            fh.write(struct.pack("<I", len(meta)))
            fh.write(meta)

    @classmethod
    def load(cls, path) -> "QuantizationModel":
        raw = Path(path).read_bytes()
        if len(raw) < _MODEL_HEADER.size:
            raise MatrixParseError(f"{path}: truncated model header at byte offset 0")
        magic, version, kind_code, flags, sweeps, m, k, d = _MODEL_HEADER.unpack_from(raw, 0)
        if magic != MODEL_MAGIC:
            raise MatrixParseError(f"{path}: bad magic {magic!r} at byte offset 0, expected {MODEL_MAGIC!r}")
        if version != MODEL_VERSION:
            raise MatrixParseError(f"{path}: unsupported model version {version} at byte offset 4")
        if kind_code not in (0, 1):
            raise MatrixParseError(f"{path}: unknown quantizer kind {kind_code} at byte offset 8")
        off = _MODEL_HEADER.size
        try:
            ranges = []
            for _ in range(m):
                ranges.append(struct.unpack_from("<QQ", raw, off))
                off += 16
            order = None
            if flags & 1:
                order = np.frombuffer(raw, dtype="<u4", count=d, offset=off).astype(np.int64)
                off += 4 * d
            books = []
            for a, b in ranges:
                count = k * (b - a)
                books.append(np.frombuffer(raw, dtype="<f4", count=count, offset=off).reshape(k, b - a))
                off += 4 * count
            (meta_len,) = struct.unpack_from("<I", raw, off)
            off += 4
            meta = json.loads(raw[off:off + meta_len].decode("utf-8")) if meta_len else {}
        except (struct.error, ValueError) as exc:
            raise MatrixParseError(f"{path}: truncated or corrupt model payload near byte offset {off}: {exc}") from exc
        return cls(
            kind=PRODUCT if kind_code == 0 else ADDITIVE,
            codebooks=tuple(books),
            dim_ranges=tuple((int(a), int(b)) for a, b in ranges),
            d=int(d),
            icm_sweeps=int(sweeps),
            dim_order=order,
            train_info=meta,
        )


# -- product quantizer ----------------------------------------------------------


def train_product(
    cloud: PointCloud,
    m: int = 4,
    k: int = 256,
    iters: int = DEFAULT_KMEANS_ITERS,
    seed: int = 0,
    permute: bool = False,
) -> QuantizationModel:
    """Split dimensions into ``m`` contiguous ranges and run k-means in each."""
    if cloud.d < m:
        raise ConfigurationError(f"product quantizer needs d >= m, got d={cloud.d}, m={m}")
    if cloud.n < k:
        raise ConfigurationError(f"product quantizer needs n >= k, got n={cloud.n}, k={k}")
    ranges = split_ranges(cloud.d, m)
    children = np.random.SeedSequence(seed).spawn(m + 1)
    order = make_rng(children[m]).permutation(cloud.d) if permute else None
    pts = cloud.points[:, order] if order is not None else cloud.points
    books, objectives = [], []
    for j, (a, b) in enumerate(ranges):
        result = kmeans(pts[:, a:b], k, iters, seed=children[j])
        books.append(result.centroids)
        objectives.append(result.objective)
    info = {
        "kind": PRODUCT, "m": m, "k": k, "iters": iters, "seed": int(seed),
        "permute": bool(permute), "rng": "PCG64",
        "train_error": float(sum(objectives)),
    }
    return QuantizationModel(PRODUCT, tuple(books), ranges, cloud.d, 0, order, info)


# -- additive quantizer -------------------------------------------------------


def _pair_tables(books: Sequence[np.ndarray]) -> List[List[np.ndarray | None]]:
    """``tables[l][j][a, b] = 2 <books[l][a], books[j][b]>``."""
    m = len(books)
    tables: List[List[np.ndarray | None]] = [[None] * m for _ in range(m)]
    for l in range(m):
        for j in range(m):
            if l != j:
                tables[l][j] = 2.0 * (books[l] @ books[j].T)
    return tables


def _unary(x: np.ndarray, books: Sequence[np.ndarray]) -> List[np.ndarray]:
    return [np.einsum("ij,ij->i", c, c) - 2.0 * (x @ c.T) for c in books]


def _icm_sweeps(unary, tables, codes: np.ndarray, sweeps: int) -> None:
    """In-place ICM over the codes of one chunk; accepts strict improvements only."""
    m = len(unary)
    rows = np.arange(codes.shape[0])
    for _ in range(sweeps):
        for j in range(m):
            cost = unary[j].copy()
            for l in range(m):
                if l != j:
                    cost += tables[l][j][codes[:, l]]
            best = np.argmin(cost, axis=1)
            better = cost[rows, best] < cost[rows, codes[:, j]]
            codes[better, j] = best[better]


def _greedy_codes(unary, tables, upto: int | None = None) -> np.ndarray:
    m = len(unary) if upto is None else upto
    codes = np.zeros((unary[0].shape[0], m), dtype=np.int64)
    for j in range(m):
        cost = unary[j].copy()
        for l in range(j):
            cost += tables[l][j][codes[:, l]]
        codes[:, j] = np.argmin(cost, axis=1)
    return codes


def _point_errors(points, books: Sequence[np.ndarray], codes: np.ndarray) -> np.ndarray:
    def work(s):
        resid = _as64(points[s])
        for j, c in enumerate(books):
            resid -= c[codes[s, j]]
        return np.einsum("ij,ij->i", resid, resid)

    return np.concatenate(map_chunks(work, len(points)))


def _encode_additive(points, books, sweeps: int, codes: np.ndarray | None = None) -> np.ndarray:
    """Greedy residual encoding (unless ``codes`` given) followed by ICM sweeps."""
    tables = _pair_tables(books)
    n = len(points)
    out = np.empty((n, len(books)), dtype=np.int64)

    def work(s):
        unary = _unary(_as64(points[s]), books)
        local = _greedy_codes(unary, tables) if codes is None else codes[s].copy()
        _icm_sweeps(unary, tables, local, sweeps)
        return local

    for s, part in zip(chunk_slices(n), map_chunks(work, n)):
        out[s] = part
    return out


def _least_squares_books(points, codes: np.ndarray, m: int, k: int, d: int) -> List[np.ndarray]:
    """Jointly refit all codebooks: minimum-norm solution of ``min ||X - B C||``.

    ``B`` is the one-hot code matrix. ``B^T B`` always has an ``m - 1``
    dimensional null space (a vector can be moved between codebooks), so the
    pseudo-inverse is used.
    """
    mk = m * k

    def work(s):
        c = codes[s]
        x = _as64(points[s])
        gram = np.zeros((mk, mk))
        rhs = np.zeros((mk, d))
        for j in range(m):
            rhs[j * k:(j + 1) * k] = _onehot(c[:, j], k) @ x
            for l in range(j, m):
                block = np.bincount(c[:, j] * k + c[:, l], minlength=k * k).reshape(k, k)
                gram[j * k:(j + 1) * k, l * k:(l + 1) * k] = block
                if l != j:
                    gram[l * k:(l + 1) * k, j * k:(j + 1) * k] = block.T
        return gram, rhs

    parts = map_chunks(work, len(points))
    gram = _sum_in_order([p[0] for p in parts])
    rhs = _sum_in_order([p[1] for p in parts])
    if m == 1:
        counts = np.diag(gram)
        sol = np.zeros_like(rhs)
        nz = counts > 0
        sol[nz] = rhs[nz] / counts[nz, None]
    else:
        w, v = scipy.linalg.eigh(gram)
        keep = w > max(w[-1], 1.0) * mk * np.finfo(np.float64).eps * 10
        sol = v[:, keep] @ ((v[:, keep].T @ rhs) / w[keep, None])
    return [sol[j * k:(j + 1) * k].copy() for j in range(m)]


def _residual_mean_books(points, codes: np.ndarray, books: List[np.ndarray]) -> List[np.ndarray]:
    """Per-codebook update: centroid = mean residual of its points, codebook by codebook."""
    books = [b.copy() for b in books]
    k = books[0].shape[0]
    for j in range(len(books)):
        def work(s, j=j):
            resid = _as64(points[s])
            for l, c in enumerate(books):
                if l != j:
                    resid -= c[codes[s, l]]
            return _onehot(codes[s, j], k) @ resid

        sums = _sum_in_order(map_chunks(work, len(points)))
        counts = np.bincount(codes[:, j], minlength=k)
        nz = counts > 0
        books[j][nz] = sums[nz] / counts[nz, None]
    return books


def _reseed_additive(points, codes, books, errors) -> None:
    for j in range(len(books)):
        counts = np.bincount(codes[:, j], minlength=books[j].shape[0])

        def residual(idx, j=j):
            r = _as64(np.asarray(points)[idx])
            for l, c in enumerate(books):
                if l != j:
                    r -= c[codes[idx, l]]
            return r

        _reseed_empty(books[j], counts, errors, residual)


def train_additive(
    cloud: PointCloud,
    m: int = 4,
    k: int = 256,
    outer_iters: int = DEFAULT_OUTER_ITERS,
    icm_sweeps: int = DEFAULT_ICM_SWEEPS,
    seed: int = 0,
) -> QuantizationModel:
    """Train an additive quantizer with ``m`` full-width codebooks.

    Codebooks are seeded one after another by k-means++ on the residual left by
    the previous ones. Each outer iteration then runs ``icm_sweeps`` ICM sweeps
    from the current codes and refits all codebooks by least squares. An update
    that fails to lower the total squared error falls back to per-codebook
    residual means, and is dropped if that does not help either, so
    ``train_info["error_history"]`` never increases.

    With ``m=1`` this reproduces ``kmeans`` with the same ``k``, iteration
    count and seed.
    """
    n, d = cloud.n, cloud.d
    if m < 1 or k < 1 or outer_iters < 1 or icm_sweeps < 1:
        raise ConfigurationError("m, k, outer_iters and icm_sweeps must all be >= 1")
    if n < k:
        raise ConfigurationError(f"additive quantizer needs n >= k, got n={n}, k={k}")
    points = cloud.points
    rng = make_rng(seed)

    sample = _seed_sample(n, k, rng)
    codes = np.zeros((n, m), dtype=np.int64)
    books: List[np.ndarray] = []
    for j in range(m):
        rows = np.arange(n) if sample is None else sample
        resid = _as64(points[rows])
        for l in range(j):
            resid -= books[l][codes[rows, l]]
        books.append(kmeans_plusplus(resid, k, rng))
        tables = _pair_tables(books)

        def assign(s, j=j, tables=tables):
            unary = _unary(_as64(points[s]), books[j:j + 1])[0]
            for l in range(j):
                unary = unary + tables[l][j][codes[s, l]]
            return np.argmin(unary, axis=1)

        codes[:, j] = np.concatenate(map_chunks(assign, n))

    errors = _point_errors(points, books, codes)
    error = float(errors.sum())
    history = [error]
    fallbacks = 0
    rejected = 0
    for _ in range(outer_iters):
        new_codes = _encode_additive(points, books, icm_sweeps, codes=codes)
        errors = _point_errors(points, books, new_codes)
        try:
            candidate = _least_squares_books(points, new_codes, m, k, d)
            ok = all(np.isfinite(c).all() for c in candidate)
        except (np.linalg.LinAlgError, ValueError):
            candidate, ok = None, False
        if ok:
            _reseed_additive(points, new_codes, candidate, errors)
            cand_err = _point_errors(points, candidate, new_codes)
            ok = cand_err.sum() <= error
        if not ok:
            fallbacks += 1
            candidate = _residual_mean_books(points, new_codes, books)
            _reseed_additive(points, new_codes, candidate, errors)
            cand_err = _point_errors(points, candidate, new_codes)
        if cand_err.sum() <= error:
            books, codes, errors = candidate, new_codes, cand_err
            error = float(cand_err.sum())
        else:
            rejected += 1
        history.append(error)

    final_codes = _encode_additive(points, books, icm_sweeps, codes=codes)
    final_err = float(_point_errors(points, books, final_codes).sum())
    info = {
        "kind": ADDITIVE, "m": m, "k": k, "outer_iters": outer_iters,
        "icm_sweeps": icm_sweeps, "seed": int(seed), "rng": "PCG64",
        "error_history": history, "train_error": final_err,
        "lstsq_fallbacks": fallbacks, "rejected_updates": rejected,
    }
    ranges = tuple((0, d) for _ in range(m))
    return QuantizationModel(ADDITIVE, tuple(books), ranges, d, icm_sweeps, None, info)


# -- encoding and cell statistics ----------------------------------------------


@dataclass(frozen=True, eq=False)
class Assignment:
    """Codes per (point, codebook) and the total squared reconstruction error."""

    codes: np.ndarray
    recon_error_total: float
    point_sq_errors: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class CellStats:
    """Per-centroid counts and nearest-centroid distances, per-point error magnitudes.

    ``per_point_error`` is each point's reconstruction distance divided by the
    largest one in the cloud (all zeros when reconstruction is perfect).
    """

    counts: np.ndarray
    nn_dist: np.ndarray
    per_point_error: np.ndarray

    @property
    def m(self) -> int:
        return self.counts.shape[0]

    @property
    def k(self) -> int:
        return self.counts.shape[1]


def encode(model: QuantizationModel, cloud: PointCloud) -> Tuple[np.ndarray, np.ndarray]:
    """Codes and per-point squared reconstruction errors."""
    if cloud.d != model.d:
        raise ConfigurationError(f"model expects d={model.d}, cloud has d={cloud.d}")
    points = model.prepared_points(cloud)
    if model.kind == PRODUCT:
        codes = np.empty((cloud.n, model.m), dtype=np.int64)
        sq = np.zeros(cloud.n)
        for j, (a, b) in enumerate(model.dim_ranges):
            labels, dists = assign_nearest(points[:, a:b], model.codebooks[j])
            codes[:, j] = labels
            sq += dists
        return codes, sq
    codes = _encode_additive(points, model.codebooks, max(model.icm_sweeps, 1))
    return codes, _point_errors(points, model.codebooks, codes)


def nearest_centroid_distances(codebook: np.ndarray) -> np.ndarray:
    """Exact distance from each centroid to its nearest other centroid (NaN if k=1)."""
    c = _as64(codebook)
    if c.shape[0] < 2:
        return np.full(c.shape[0], np.nan)
    dist = cdist(c, c)
    np.fill_diagonal(dist, np.inf)
    return dist.min(axis=1)


def cell_stats(model: QuantizationModel, codes: np.ndarray, sq_errors: np.ndarray) -> CellStats:
    counts = np.stack([np.bincount(codes[:, j], minlength=model.k) for j in range(model.m)])
    nn = np.stack([nearest_centroid_distances(c) for c in model.codebooks])
    mags = np.sqrt(np.maximum(sq_errors, 0.0))
    top = mags.max() if mags.size else 0.0
    em = mags / top if top > 0 else np.zeros_like(mags)
    return CellStats(counts=counts, nn_dist=nn, per_point_error=em)


def encode_and_stats(model: QuantizationModel, cloud: PointCloud) -> Tuple[Assignment, CellStats]:
    codes, sq = encode(model, cloud)
    assignment = Assignment(codes=codes, recon_error_total=float(sq.sum()), point_sq_errors=sq)
    return assignment, cell_stats(model, codes, sq)


def train(cloud: PointCloud, kind: str, m: int = 4, k: int = 256, iters: int | None = None,
          icm_sweeps: int = DEFAULT_ICM_SWEEPS, seed: int = 0, permute: bool = False) -> QuantizationModel:
    """Train either quantizer kind (``pq``/``aq`` aliases accepted)."""
    kind = normalize_kind(kind)
    if kind == PRODUCT:
        return train_product(cloud, m, k, iters or DEFAULT_KMEANS_ITERS, seed, permute)
    return train_additive(cloud, m, k, iters or DEFAULT_OUTER_ITERS, icm_sweeps, seed)
