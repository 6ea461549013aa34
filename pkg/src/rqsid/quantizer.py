"""Residual k-means codebooks: train layer by layer, encode, decode, reconstruct.

Layer 1 clusters the raw vectors; each later layer clusters the residuals left
by all earlier layers. Encoding greedily picks the nearest codeword per layer
(squared Euclidean, ties to the lowest index), so the token chosen at layer l
equals an exhaustive scan of that layer's codewords.

Nearest-codeword selection on large inputs is scored in float32 and certified
against a rounding-error bound; rows whose best/second-best margin falls
inside the bound are rescored in float64, so selections always equal the
float64 argmin. Residuals, means, and reported errors stay in float64.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import (
    Codebook,
    ConfigError,
    DataError,
    EmbeddingCollection,
    QuantizerConfig,
    RandomSource,
    SemanticId,
    validate_sid,
)

log = logging.getLogger(__name__)

# Rows per scoring block; small enough that the (rows x M) float32 score
# matrix stays cache-resident.
_SCORE_CHUNK = 2048
# Inputs smaller than this skip the mixed-precision path entirely.
_MIXED_MIN_M = 8
_MIXED_MIN_N = 1024
# Norm scale beyond which float32 scoring risks overflow; fall back to exact.
_MIXED_MAX_SCALE = 1e15


@dataclass(frozen=True)
class ResidualTrace:
    """Per-layer residuals of one encoded vector.

    residuals[0] is the input; residuals[l] = residuals[l-1] - codeword
    chosen at layer l, computed by exact componentwise subtraction.
    """

    residuals: tuple[np.ndarray, ...]
    chosen: tuple[int, ...]


class KMeansResult(NamedTuple):
    centroids: np.ndarray
    assignments: np.ndarray
    sse: float


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Exact float64 pairwise squared Euclidean distances, (n, m)."""
    p_sq = np.einsum("ij,ij->i", points, points)
    c_sq = np.einsum("ij,ij->i", centroids, centroids)
    d = p_sq[:, None] - 2.0 * (points @ centroids.T) + c_sq[None, :]
    np.maximum(d, 0.0, out=d)
    return d


class _PointSide:
    """Per-point precomputations reused across scoring calls on fixed points."""

    __slots__ = ("points", "p32", "p_sq", "p_sq32", "p_norm", "norm_max")

    def __init__(self, points: np.ndarray):
        self.points = points
        self.p32 = points.astype(np.float32)
        self.p_sq = np.einsum("ij,ij->i", points, points)
        self.p_sq32 = np.einsum("ij,ij->i", self.p32, self.p32)
        self.p_norm = np.sqrt(self.p_sq)
        self.norm_max = float(self.p_norm.max()) if len(points) else 0.0


def _nearest_exact(
    points: np.ndarray, centroids: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    n = points.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n, dtype=np.float64)
    for start in range(0, n, 1 << 15):
        stop = min(start + (1 << 15), n)
        d = _sq_dists(points[start:stop], centroids)
        labels[start:stop] = np.argmin(d, axis=1)
        dists[start:stop] = d[np.arange(stop - start), labels[start:stop]]
    return labels, dists


def _nearest(
    points: np.ndarray,
    centroids: np.ndarray,
    side: _PointSide | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Argmin centroid per point (ties to the lowest index) and exact distances.

    The selection equals the float64 argmin: fast-path rows are accepted only
    when their float32 margin exceeds a conservative error bound, the rest
    are rescored in float64.
    """
    n, d = points.shape
    m = centroids.shape[0]
    if m < _MIXED_MIN_M or n < _MIXED_MIN_N:
        return _nearest_exact(points, centroids)
    if side is None:
        side = _PointSide(points)

    c_sq = np.einsum("ij,ij->i", centroids, centroids)
    c_norm_max = float(np.sqrt(c_sq.max()))
    if (side.norm_max + c_norm_max) ** 2 > _MIXED_MAX_SCALE:
        return _nearest_exact(points, centroids)
    c32 = centroids.astype(np.float32)
    c_sq32 = np.einsum("ij,ij->i", c32, c32)
    # |float32 score - exact score| <= gamma * (|p| + |c|)^2 per pair.
    gamma = (d + 8) * 1.2e-7

    labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n, dtype=np.float64)
    for start in range(0, n, _SCORE_CHUNK):
        stop = min(start + _SCORE_CHUNK, n)
        # score c^2 - 2 p.c ranks like the distance; the p^2 term is constant
        # per row and would only cost another pass over the matrix
        s = side.p32[start:stop] @ c32.T
        s *= -2.0
        s += c_sq32[None, :]
        rows = np.arange(stop - start)
        best = np.argmin(s, axis=1)
        s_best = s[rows, best].astype(np.float64)
        s[rows, best] = np.inf
        s_second = s.min(axis=1).astype(np.float64)
        margin = gamma * (side.p_norm[start:stop] + c_norm_max) ** 2
        chunk_labels = best.astype(np.int64)
        ambiguous = np.flatnonzero(s_second - s_best <= 2.0 * margin)
        if ambiguous.size:
            exact = _sq_dists(points[start:stop][ambiguous], centroids)
            chunk_labels[ambiguous] = np.argmin(exact, axis=1)
        chunk_dists = (
            side.p_sq[start:stop]
            - 2.0 * np.einsum("ij,ij->i", points[start:stop], centroids[chunk_labels])
            + c_sq[chunk_labels]
        )
        np.maximum(chunk_dists, 0.0, out=chunk_dists)
        labels[start:stop] = chunk_labels
        dists[start:stop] = chunk_dists
    return labels, dists


def _kmeanspp_init(
    points: np.ndarray, m: int, gen: np.random.Generator, side: _PointSide
) -> np.ndarray:
    """Squared-distance-weighted seeding. Once every remaining point has zero
    weight (fewer distinct points than centroids) further seeds are drawn
    uniformly, which duplicates existing points."""
    n, d = points.shape
    centroids = np.empty((m, d), dtype=np.float64)
    first = int(gen.integers(n))
    centroids[0] = points[first]
    fast = (side.norm_max * 2.0) ** 2 <= _MIXED_MAX_SCALE

    def dist_to(c: np.ndarray) -> np.ndarray:
        # seeding only needs sampling weights, so float32 scoring is fine
        if fast:
            c32 = c.astype(np.float32)
            w = side.p_sq32 - 2.0 * (side.p32 @ c32) + np.float32(c32 @ c32)
            return np.maximum(w, 0.0, out=w)
        return _sq_dists(points, c[None, :])[:, 0]

    min_d2 = np.asarray(dist_to(centroids[0]), dtype=np.float64)
    warned = False
    for j in range(1, m):
        total = float(min_d2.sum())
        if total <= 0.0:
            if not warned:
                log.warning("fewer than %d distinct points; duplicating centroids", m)
                warned = True
            idx = int(gen.integers(n))
        else:
            idx = int(gen.choice(n, p=min_d2 / total))
        centroids[j] = points[idx]
        np.minimum(min_d2, dist_to(centroids[j]), out=min_d2)
    return centroids


def _cluster_means(
    points: np.ndarray, labels: np.ndarray, m: int, dists: np.ndarray
) -> np.ndarray:
    """Per-cluster means; empty clusters are re-seeded to the points currently
    farthest from their centroid (ties to the lowest point index)."""
    d = points.shape[1]
    counts = np.bincount(labels, minlength=m).astype(np.float64)
    sums = np.empty((m, d), dtype=np.float64)
    for j in range(d):
        sums[:, j] = np.bincount(labels, weights=points[:, j], minlength=m)
    empty = counts == 0
    counts[empty] = 1.0
    means = sums / counts[:, None]
    if empty.any():
        order = np.argsort(-dists, kind="stable")
        means[np.flatnonzero(empty)] = points[order[: int(empty.sum())]]
    return means


def kmeans(
    points,
    num_centroids: int,
    iters: int,
    tol: float,
    rng: RandomSource,
) -> KMeansResult:
    """Lloyd's algorithm with squared-distance-weighted seeding.

    Stops after `iters` update rounds, when the assignment reaches a fixed
    point, or when the relative SSE improvement drops below `tol`. The
    returned assignment is the argmin against the returned centroids.
    """
    if num_centroids < 1:
        raise ConfigError(f"num_centroids must be >= 1, got {num_centroids}")
    if iters < 1:
        raise ConfigError(f"iters must be >= 1, got {iters}")
    if tol < 0:
        raise ConfigError(f"tol must be >= 0, got {tol}")
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise DataError(f"points must be a nonempty (n, d) array, got shape {points.shape}")
    if not np.all(np.isfinite(points)):
        raise DataError("points contain non-finite components")

    side = _PointSide(points)
    centroids = _kmeanspp_init(points, num_centroids, rng.generator(), side)
    labels, dists = _nearest(points, centroids, side)
    sse = float(dists.sum())
    for _ in range(iters):
        centroids = _cluster_means(points, labels, num_centroids, dists)
        new_labels, dists = _nearest(points, centroids, side)
        new_sse = float(dists.sum())
        converged = (
            np.array_equal(new_labels, labels)
            or sse == 0.0
            or (sse - new_sse) < tol * sse
        )
        labels, sse = new_labels, new_sse
        if converged:
            break
    return KMeansResult(centroids, labels, sse)


def train_rq(
    data: EmbeddingCollection, config: QuantizerConfig, rng: RandomSource
) -> Codebook:
    """Train an L-layer codebook by sequential k-means on residuals.

    Layer l is fit to the residuals of layers 1..l-1 and frozen before the
    next layer starts. Deterministic for a fixed (data, config, seed).
    """
    if len(data) == 0:
        raise DataError("cannot train on an empty collection")
    if data.dim != config.dim:
        raise DataError(f"data dim {data.dim} does not match config dim {config.dim}")
    residuals = data.vectors.copy()
    layer_rngs = rng.split(config.num_layers)
    layers = np.empty(
        (config.num_layers, config.codebook_size, config.dim), dtype=np.float64
    )
    sse_per_layer = []
    for l in range(config.num_layers):
        result = kmeans(
            residuals,
            config.codebook_size,
            config.kmeans_iters,
            config.convergence_tol,
            layer_rngs[l],
        )
        layers[l] = result.centroids
        sse_per_layer.append(result.sse)
        residuals -= result.centroids[result.assignments]
    return Codebook(config, layers, tuple(sse_per_layer))


def encode(x, codebook: Codebook) -> tuple[SemanticId, ResidualTrace]:
    """Quantize one vector: nearest codeword per layer on the running residual."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (codebook.config.dim,):
        raise DataError(f"vector shape {x.shape}, expected ({codebook.config.dim},)")
    if not np.all(np.isfinite(x)):
        raise DataError("vector contains non-finite components")
    residual = x
    residuals = [x.copy()]
    chosen = []
    for layer in codebook.layers:
        labels, _ = _nearest(residual[None, :], layer)
        c = int(labels[0])
        residual = residual - layer[c]
        chosen.append(c)
        residuals.append(residual.copy())
    return tuple(chosen), ResidualTrace(tuple(residuals), tuple(chosen))


def encode_all(data: EmbeddingCollection, codebook: Codebook) -> tuple[np.ndarray, np.ndarray]:
    """Encode a whole collection.

    Returns (sids, residual_sq_norms): sids is (n, L) token indices and
    residual_sq_norms is (n, L+1) with column l holding the squared norm of
    the residual after l layers (column 0 is the raw squared norm).
    """
    if data.dim != codebook.config.dim:
        raise DataError(
            f"data dim {data.dim} does not match codebook dim {codebook.config.dim}"
        )
    n = len(data)
    L = codebook.config.num_layers
    residual = data.vectors.copy()
    sids = np.empty((n, L), dtype=np.int64)
    sq_norms = np.empty((n, L + 1), dtype=np.float64)
    sq_norms[:, 0] = np.einsum("ij,ij->i", residual, residual)
    for l in range(L):
        labels, _ = _nearest(residual, codebook.layers[l])
        sids[:, l] = labels
        residual -= codebook.layers[l][labels]
        sq_norms[:, l + 1] = np.einsum("ij,ij->i", residual, residual)
    return sids, sq_norms


def decode(sid, codebook: Codebook) -> np.ndarray:
    """Sum the selected codewords across layers."""
    sid = validate_sid(sid, codebook.config)
    out = np.zeros(codebook.config.dim, dtype=np.float64)
    for l, token in enumerate(sid):
        out += codebook.layers[l][token]
    return out


def reconstruction_report(data: EmbeddingCollection, codebook: Codebook) -> list[float]:
    """Mean squared reconstruction error after each layer.

    Entry l is the mean over items of the squared distance between the item
    and the sum of its first l+1 codewords; non-increasing on training data.
    """
    _, sq_norms = encode_all(data, codebook)
    return [float(m) for m in sq_norms[:, 1:].mean(axis=0)]


def sids_as_tuples(sids: np.ndarray) -> list[SemanticId]:
    """Convert an (n, L) token array to a list of semantic-id tuples."""
    return [tuple(int(t) for t in row) for row in np.asarray(sids)]
