"""Token-distribution diagnostics: histograms, concentration statistics,
path sparsity, inter-layer degrees, and the hourglass report.

All statistics are computed over every codebook slot, zero-count tokens
included, because under-used slots are exactly what is being measured.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConfigError,
    QuantizerConfig,
    TokenRangeError,
    UndefinedStatError,
)


@dataclass(frozen=True)
class LayerHistogram:
    """Token occurrence counts for one layer; length equals the slot count."""

    layer: int
    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1:
            raise ConfigError(f"counts must be 1-D, got shape {counts.shape}")
        if (counts < 0).any():
            raise ConfigError("counts must be non-negative")
        counts = counts.copy()
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class Selector:
    """Head-token selection rule: the top K tokens, or the minimal prefix of
    tokens (by descending count) covering at least a fraction `value` of mass."""

    kind: str
    value: float

    @classmethod
    def top_k(cls, k: int) -> "Selector":
        if k < 0:
            raise ConfigError(f"top_k must be >= 0, got {k}")
        return cls("top_k", int(k))

    @classmethod
    def mass(cls, p: float) -> "Selector":
        if not 0 < p <= 1:
            raise ConfigError(f"mass threshold must be in (0, 1], got {p}")
        return cls("mass", float(p))

    def describe(self) -> str:
        return f"top_k={int(self.value)}" if self.kind == "top_k" else f"mass={self.value}"


@dataclass(frozen=True)
class LayerStats:
    """Concentration summary of one layer's token histogram."""

    entropy_bits: float
    gini: float
    stddev: float
    distinct_tokens: int
    utilization: float

    @classmethod
    def from_histogram(cls, hist: LayerHistogram) -> "LayerStats":
        counts = hist.counts
        return cls(
            entropy_bits=entropy_bits(hist),
            gini=gini(hist),
            stddev=stddev(hist),
            distinct_tokens=int((counts > 0).sum()),
            utilization=float((counts > 0).sum() / counts.size),
        )


@dataclass(frozen=True)
class HourglassReport:
    """Aggregate hourglass diagnostics over a set of full-length semantic ids."""

    per_layer: tuple[LayerStats, ...]
    path_sparsity: float
    edge_density: tuple[float, ...]
    hourglass_flag: bool
    head_set: frozenset[int]
    pinch_layer: int | None
    num_items: int
    distinct_sids: int
    histograms: tuple[tuple[int, ...], ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "per_layer": [
                {
                    "layer": l + 1,
                    "entropy_bits": s.entropy_bits,
                    "gini": s.gini,
                    "stddev": s.stddev,
                    "distinct_tokens": s.distinct_tokens,
                    "utilization": s.utilization,
                }
                for l, s in enumerate(self.per_layer)
            ],
            "path_sparsity": self.path_sparsity,
            "edge_density": list(self.edge_density),
            "hourglass_flag": self.hourglass_flag,
            "head_set": sorted(self.head_set),
            "pinch_layer": self.pinch_layer,
            "num_items": self.num_items,
            "distinct_sids": self.distinct_sids,
            "histograms": [list(h) for h in self.histograms],
        }


def _as_sid_array(sids) -> np.ndarray:
    arr = np.asarray(sids, dtype=np.int64)
    if arr.ndim != 2:
        raise ConfigError(f"expected an (n, L) id array, got shape {arr.shape}")
    return arr


def _counts_of(h) -> np.ndarray:
    if isinstance(h, LayerHistogram):
        return h.counts
    counts = np.asarray(h, dtype=np.int64)
    if counts.ndim != 1 or (counts < 0).any():
        raise ConfigError("histogram must be a 1-D array of non-negative counts")
    return counts


def token_histogram(sids, layer: int, num_tokens: int) -> LayerHistogram:
    """Exact occurrence counts of layer `layer` tokens, zero slots included."""
    if num_tokens < 1:
        raise ConfigError(f"num_tokens must be >= 1, got {num_tokens}")
    if len(sids) == 0:
        return LayerHistogram(layer, np.zeros(num_tokens, dtype=np.int64))
    arr = _as_sid_array(sids)
    if not 1 <= layer <= arr.shape[1]:
        raise TokenRangeError(f"layer {layer} outside [1, {arr.shape[1]}]")
    col = arr[:, layer - 1]
    if col.min() < 0 or col.max() >= num_tokens:
        raise TokenRangeError(f"token outside [0, {num_tokens}) in layer {layer}")
    return LayerHistogram(layer, np.bincount(col, minlength=num_tokens))


def entropy_bits(h) -> float:
    """Shannon entropy of the count distribution, in bits."""
    counts = _counts_of(h)
    total = counts.sum()
    if total == 0:
        raise UndefinedStatError("entropy of an empty histogram is undefined")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def gini(h) -> float:
    """Gini coefficient over all slots: sum_ij |c_i - c_j| / (2 n sum_c)."""
    counts = _counts_of(h)
    total = counts.sum()
    if total == 0:
        raise UndefinedStatError("gini of an empty histogram is undefined")
    n = counts.size
    x = np.sort(counts)
    ranks = np.arange(1, n + 1, dtype=np.float64)
    return float(((2.0 * ranks - n - 1.0) * x).sum() / (n * total))


def stddev(h) -> float:
    """Population standard deviation of the slot counts."""
    counts = _counts_of(h)
    return float(np.std(counts))


def path_sparsity(sids, config: QuantizerConfig) -> float:
    """Distinct semantic ids divided by the exact path-space size M**L."""
    arr = _as_sid_array(sids)
    if arr.shape[0] == 0:
        raise UndefinedStatError("path sparsity of an empty id set is undefined")
    distinct = np.unique(arr, axis=0).shape[0]
    space = config.codebook_size ** config.num_layers  # exact big integer
    return distinct / space


def degree_profile(sids, layer: int, config: QuantizerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-token fan-in and fan-out at one layer.

    fan_in[t] counts distinct previous-layer tokens co-occurring with t
    (zero for layer 1); fan_out[t] counts distinct next-layer tokens (zero
    for the last layer).
    """
    arr = _as_sid_array(sids)
    L, M = config.num_layers, config.codebook_size
    if not 1 <= layer <= L:
        raise TokenRangeError(f"layer {layer} outside [1, {L}]")
    fan_in = np.zeros(M, dtype=np.int64)
    fan_out = np.zeros(M, dtype=np.int64)
    if arr.shape[0]:
        if layer > 1:
            pairs = np.unique(arr[:, [layer - 2, layer - 1]], axis=0)
            fan_in += np.bincount(pairs[:, 1], minlength=M)
        if layer < L:
            pairs = np.unique(arr[:, [layer - 1, layer]], axis=0)
            fan_out += np.bincount(pairs[:, 0], minlength=M)
    return fan_in, fan_out


def adjacent_pair_count(sids, layer: int) -> int:
    """Distinct (layer, layer+1) token pairs; numerator of the edge density."""
    arr = _as_sid_array(sids)
    return int(np.unique(arr[:, [layer - 1, layer]], axis=0).shape[0])


def head_tail_split(h: LayerHistogram, selector: Selector) -> tuple[frozenset[int], frozenset[int]]:
    """Split tokens into head and tail sets.

    Tokens are ordered by descending count with ties broken by ascending
    token index. top_k takes the first K tokens; mass takes the shortest
    prefix whose cumulative count share reaches the threshold.
    """
    counts = _counts_of(h)
    n = counts.size
    order = np.lexsort((np.arange(n), -counts))
    if selector.kind == "top_k":
        k = int(selector.value)
        if k > n:
            raise ConfigError(f"top_k {k} exceeds token count {n}")
    else:
        total = counts.sum()
        if total == 0:
            raise UndefinedStatError("mass split of an empty histogram is undefined")
        shares = np.cumsum(counts[order]) / total
        k = int(np.searchsorted(shares, selector.value - 1e-12) + 1)
    head = frozenset(int(t) for t in order[:k])
    tail = frozenset(int(t) for t in order[k:])
    return head, tail


def small_residual_ratio(residual_norms, reference_norms) -> float:
    """Fraction of residual norms strictly below the median reference norm.

    Descriptive companion to the hourglass report: how much of a layer's
    input mass sits near zero relative to the scale of the previous layer.
    """
    residual_norms = np.asarray(residual_norms, dtype=np.float64)
    reference_norms = np.asarray(reference_norms, dtype=np.float64)
    if residual_norms.size == 0 or reference_norms.size == 0:
        raise UndefinedStatError("residual ratio of empty norm sets is undefined")
    return float((residual_norms < np.median(reference_norms)).mean())


def hourglass_report(
    sids,
    config: QuantizerConfig,
    head_selector: Selector = Selector.mass(0.5),
    include_histograms: bool = False,
) -> HourglassReport:
    """Full hourglass diagnostic over full-length semantic ids.

    The hourglass flag is raised when one interior layer simultaneously has
    the strictly lowest entropy and the strictly highest gini of all layers.
    The head set is taken from the layer-2 histogram (layer 1 for L=1).
    """
    arr = _as_sid_array(sids)
    if arr.shape[0] == 0:
        raise UndefinedStatError("hourglass report of an empty id set is undefined")
    L, M = config.num_layers, config.codebook_size
    if arr.shape[1] != L:
        raise ConfigError(f"ids have {arr.shape[1]} layers, config expects {L}")
    hists = [token_histogram(arr, l, M) for l in range(1, L + 1)]
    stats = tuple(LayerStats.from_histogram(h) for h in hists)
    entropies = [s.entropy_bits for s in stats]
    ginis = [s.gini for s in stats]

    flag = False
    pinch = None
    interior = range(2, L)  # 1-based interior layers exist only for L >= 3
    if L >= 3:
        pinch = min(interior, key=lambda l: (entropies[l - 1], l))
        for l in interior:
            e, g = entropies[l - 1], ginis[l - 1]
            others = [j for j in range(1, L + 1) if j != l]
            if all(e < entropies[j - 1] for j in others) and all(
                g > ginis[j - 1] for j in others
            ):
                flag = True
                break

    head_layer = 2 if L >= 2 else 1
    head, _ = head_tail_split(hists[head_layer - 1], head_selector)
    density = tuple(
        adjacent_pair_count(arr, l) / (M * M) for l in range(1, L)
    )
    return HourglassReport(
        per_layer=stats,
        path_sparsity=path_sparsity(arr, config),
        edge_density=density,
        hourglass_flag=flag,
        head_set=head,
        pinch_layer=pinch,
        num_items=int(arr.shape[0]),
        distinct_sids=int(np.unique(arr, axis=0).shape[0]),
        histograms=tuple(tuple(int(c) for c in h.counts) for h in hists)
        if include_histograms
        else (),
    )
