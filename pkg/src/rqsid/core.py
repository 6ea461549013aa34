"""Shared domain types, semantic-id codecs, and the deterministic random source.

Every other module builds on the types here. All containers are immutable
after construction and safe to share across threads; codec functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_U64_MAX = 2**64 - 1


class RqsidError(Exception):
    """Base class for all library errors."""


class ConfigError(RqsidError):
    """Invalid configuration or parameter combination."""


class DataError(RqsidError):
    """Invalid or internally inconsistent input data."""


class TokenRangeError(RqsidError):
    """Token or layer index outside the configured range."""


class MalformedSequenceError(RqsidError):
    """Flat token sequence that does not parse as a semantic id."""


class UndefinedStatError(RqsidError):
    """Statistic requested on an empty histogram."""


class ConsistencyError(RqsidError):
    """Inputs that must describe the same collection disagree."""


class PrefixNotFoundError(RqsidError, LookupError):
    """Prefix is not a path in the catalog trie (distinct from a terminal node)."""


@dataclass(frozen=True)
class QuantizerConfig:
    """Shape and training parameters of a residual quantizer.

    num_layers
        Number of quantization layers (length of a full semantic id).
    codebook_size
        Codewords per layer.
    dim
        Embedding dimensionality.
    kmeans_iters
        Cap on Lloyd iterations per layer.
    seed
        64-bit unsigned seed; drives every random choice.
    convergence_tol
        Relative SSE improvement below which a layer stops training.
    """

    num_layers: int
    codebook_size: int
    dim: int
    kmeans_iters: int = 25
    seed: int = 0
    convergence_tol: float = 1e-4

    def __post_init__(self) -> None:
        if self.num_layers < 1:
            raise ConfigError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.codebook_size < 1:
            raise ConfigError(f"codebook_size must be >= 1, got {self.codebook_size}")
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.kmeans_iters < 1:
            raise ConfigError(f"kmeans_iters must be >= 1, got {self.kmeans_iters}")
        if not 0 <= self.seed <= _U64_MAX:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.convergence_tol < 0:
            raise ConfigError(f"convergence_tol must be >= 0, got {self.convergence_tol}")

    @property
    def flat_vocab_size(self) -> int:
        """Size of the layer-disjoint flat token vocabulary."""
        return self.num_layers * self.codebook_size


@dataclass(frozen=True)
class EmbeddingCollection:
    """An ordered set of item vectors with opaque string ids.

    `vectors` is an (n, dim) float64 array, made read-only on construction.
    """

    ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self) -> None:
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise DataError(f"vectors must be 2-D, got shape {vectors.shape}")
        if vectors.shape[1] < 1:
            raise DataError("vectors must have at least one dimension")
        if len(self.ids) != vectors.shape[0]:
            raise DataError(
                f"{len(self.ids)} ids for {vectors.shape[0]} vectors"
            )
        if len(set(self.ids)) != len(self.ids):
            raise DataError("item ids must be unique")
        if vectors.size and not np.all(np.isfinite(vectors)):
            raise DataError("vectors contain non-finite components")
        vectors = vectors.copy()
        vectors.flags.writeable = False
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "ids", tuple(self.ids))

    @classmethod
    def from_pairs(cls, pairs) -> "EmbeddingCollection":
        """Build from an iterable of (item_id, vector)."""
        pairs = list(pairs)
        if not pairs:
            raise DataError("cannot build an embedding collection from zero pairs")
        ids = tuple(str(item_id) for item_id, _ in pairs)
        vectors = np.asarray([vec for _, vec in pairs], dtype=np.float64)
        return cls(ids, vectors)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class Codebook:
    """Trained residual-quantizer codebook: (L, M, D) codewords plus training SSE."""

    config: QuantizerConfig
    layers: np.ndarray
    training_sse_per_layer: tuple[float, ...]

    def __post_init__(self) -> None:
        layers = np.asarray(self.layers, dtype=np.float64)
        cfg = self.config
        expected = (cfg.num_layers, cfg.codebook_size, cfg.dim)
        if layers.shape != expected:
            raise DataError(f"codebook layers shape {layers.shape}, expected {expected}")
        if not np.all(np.isfinite(layers)):
            raise DataError("codebook contains non-finite entries")
        sse = tuple(float(s) for s in self.training_sse_per_layer)
        if len(sse) != cfg.num_layers:
            raise DataError(
                f"{len(sse)} SSE entries for {cfg.num_layers} layers"
            )
        if any(s < 0 for s in sse):
            raise DataError("training SSE entries must be non-negative")
        layers = layers.copy()
        layers.flags.writeable = False
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "training_sse_per_layer", sse)


# A full-length semantic id is a plain tuple of per-layer token indices.
SemanticId = tuple[int, ...]


def validate_sid(sid, config: QuantizerConfig) -> SemanticId:
    """Check length and token ranges of a full-length semantic id."""
    sid = tuple(int(t) for t in sid)
    if len(sid) != config.num_layers:
        raise TokenRangeError(
            f"semantic id has {len(sid)} tokens, config expects {config.num_layers}"
        )
    for token in sid:
        if not 0 <= token < config.codebook_size:
            raise TokenRangeError(
                f"token {token} outside [0, {config.codebook_size})"
            )
    return sid


@dataclass(frozen=True)
class VarLenSemanticId:
    """Semantic id with explicit layer indices, allowing layer 2 to be elided.

    Entries are (layer, token) with 1-based layers in strictly increasing
    order. A valid id always starts at layer 1 and ends at the last layer;
    the only layer that may be missing is layer 2.
    """

    entries: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "entries", tuple((int(l), int(t)) for l, t in self.entries)
        )

    @classmethod
    def full(cls, sid) -> "VarLenSemanticId":
        return cls(tuple((layer, int(t)) for layer, t in enumerate(sid, start=1)))

    @classmethod
    def with_layer2_elided(cls, sid) -> "VarLenSemanticId":
        entries = tuple(
            (layer, int(t)) for layer, t in enumerate(sid, start=1) if layer != 2
        )
        return cls(entries)

    @property
    def layers(self) -> tuple[int, ...]:
        return tuple(layer for layer, _ in self.entries)

    @property
    def elided_layers(self) -> tuple[int, ...]:
        present = set(self.layers)
        last = self.entries[-1][0] if self.entries else 0
        return tuple(l for l in range(1, last + 1) if l not in present)

    @property
    def is_full(self) -> bool:
        return not self.elided_layers

    def layer_token(self, layer: int) -> int | None:
        for l, t in self.entries:
            if l == layer:
                return t
        return None

    def to_full(self) -> SemanticId:
        if not self.is_full:
            raise MalformedSequenceError(
                f"id with elided layers {self.elided_layers} is not full-length"
            )
        return tuple(t for _, t in self.entries)

    def validate(self, config: QuantizerConfig) -> "VarLenSemanticId":
        """Check the structural invariants against a quantizer config."""
        entries = self.entries
        if not entries:
            raise MalformedSequenceError("semantic id has no entries")
        layers = [l for l, _ in entries]
        if any(b <= a for a, b in zip(layers, layers[1:])):
            raise MalformedSequenceError(f"layer indices not strictly increasing: {layers}")
        if layers[0] != 1:
            raise MalformedSequenceError(f"first entry is layer {layers[0]}, expected layer 1")
        if layers[-1] != config.num_layers:
            raise MalformedSequenceError(
                f"last entry is layer {layers[-1]}, expected layer {config.num_layers}"
            )
        missing = set(range(1, config.num_layers + 1)) - set(layers)
        if missing - {2}:
            raise MalformedSequenceError(
                f"only layer 2 may be elided, missing layers {sorted(missing)}"
            )
        for layer, token in entries:
            if not 0 <= token < config.codebook_size:
                raise TokenRangeError(
                    f"layer {layer} token {token} outside [0, {config.codebook_size})"
                )
        return self


class RandomSource:
    """Deterministic, splittable source of randomness.

    Wraps a numpy SeedSequence: `generator()` always yields the same stream
    for the same source, and `split(n)` derives n independent child sources
    without mutating the parent, so repeated calls agree.
    """

    ALGORITHM_ID = "pcg64/seedseq"

    def __init__(self, seed: int, _spawn_key: tuple[int, ...] = ()):
        if not 0 <= int(seed) <= _U64_MAX:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = int(seed)
        self._spawn_key = tuple(_spawn_key)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=self._spawn_key)
        return np.random.Generator(np.random.PCG64(seq))

    def split(self, n: int) -> list["RandomSource"]:
        if n < 0:
            raise ConfigError(f"cannot split into {n} sources")
        return [
            RandomSource(self.seed, self._spawn_key + (i,)) for i in range(n)
        ]

    def child(self, index: int) -> "RandomSource":
        return RandomSource(self.seed, self._spawn_key + (int(index),))

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, spawn_key={self._spawn_key})"


def sid_to_flat_tokens(sid, config: QuantizerConfig) -> list[int]:
    """Map a semantic id onto the layer-disjoint flat vocabulary.

    The token of layer l becomes (l - 1) * codebook_size + token, so tokens
    from different layers never collide and an elided layer 2 is detectable
    from the flat ids alone.
    """
    if isinstance(sid, VarLenSemanticId):
        entries = sid.validate(config).entries
    else:
        entries = tuple(enumerate(validate_sid(sid, config), start=1))
    return [(layer - 1) * config.codebook_size + token for layer, token in entries]


def parse_flat_tokens(tokens, config: QuantizerConfig) -> VarLenSemanticId:
    """Recover a variable-length semantic id from flat tokens.

    Layers are inferred from the flat ranges; sequences whose inferred layers
    regress, repeat, or do not span layer 1 through layer L are rejected.
    """
    tokens = [int(t) for t in tokens]
    if not tokens:
        raise MalformedSequenceError("empty flat token sequence")
    M = config.codebook_size
    entries = []
    for t in tokens:
        if not 0 <= t < config.flat_vocab_size:
            raise TokenRangeError(
                f"flat token {t} outside [0, {config.flat_vocab_size})"
            )
        entries.append((t // M + 1, t % M))
    return VarLenSemanticId(tuple(entries)).validate(config)


def flat_token_layer(token: int, config: QuantizerConfig) -> int:
    """1-based layer of a flat token id."""
    if not 0 <= token < config.flat_vocab_size:
        raise TokenRangeError(
            f"flat token {token} outside [0, {config.flat_vocab_size})"
        )
    return token // config.codebook_size + 1
