"""Desk-scale generative-retrieval simulation.

A catalog trie over flat-token id sequences, a Laplace-smoothed count model
with longest-suffix back-off standing in for a trained generator, beam search
with optional trie constraint, and recall / invalid-ratio evaluation split by
head and tail layer-2 tokens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigError,
    DataError,
    PrefixNotFoundError,
    QuantizerConfig,
    RandomSource,
    VarLenSemanticId,
    sid_to_flat_tokens,
)


@dataclass(frozen=True)
class Interaction:
    """One user record: a nonempty item history and the next item chosen."""

    history: tuple[str, ...]
    target: str


@dataclass(frozen=True)
class InteractionDataset:
    records: tuple[Interaction, ...]
    split: str = "train"

    def __post_init__(self) -> None:
        for rec in self.records:
            if not rec.history:
                raise DataError(f"record targeting {rec.target!r} has an empty history")

    def __len__(self) -> int:
        return len(self.records)


class _TrieNode:
    __slots__ = ("children", "items")

    def __init__(self) -> None:
        self.children: dict[int, _TrieNode] = {}
        self.items: list[str] = []


class CatalogTrie:
    """Prefix tree over flat-token sequences of catalog ids.

    Terminal nodes carry the item ids mapping to that sequence, so id
    collisions are visible. Fixed and variable-length sequences coexist
    because layer membership is encoded in the flat tokens themselves.
    """

    def __init__(self) -> None:
        self._root = _TrieNode()
        self.size = 0

    def insert(self, tokens, item_id: str) -> None:
        node = self._root
        for t in tokens:
            node = node.children.setdefault(int(t), _TrieNode())
        node.items.append(item_id)
        self.size += 1

    def _walk(self, prefix) -> _TrieNode | None:
        node = self._root
        for t in prefix:
            node = node.children.get(int(t))
            if node is None:
                return None
        return node

    def contains(self, tokens) -> bool:
        node = self._walk(tokens)
        return node is not None and bool(node.items)

    def items_at(self, tokens) -> tuple[str, ...]:
        node = self._walk(tokens)
        return tuple(node.items) if node is not None else ()

    def valid_next(self, prefix) -> frozenset[int]:
        """Child tokens after `prefix`; empty for a terminal-only node.

        Raises PrefixNotFoundError when the prefix is not a path at all,
        which is a different situation than a terminal with no children.
        """
        node = self._walk(prefix)
        if node is None:
            raise PrefixNotFoundError(f"prefix {list(prefix)} is not in the catalog")
        return frozenset(node.children)


def build_trie(catalog, config: QuantizerConfig) -> CatalogTrie:
    """Trie over a catalog of (item_id, semantic id) pairs.

    Ids may be full tuples or VarLenSemanticId instances; both are flattened
    onto the layer-disjoint vocabulary first.
    """
    catalog = list(catalog)
    if not catalog:
        raise DataError("cannot build a trie from an empty catalog")
    trie = CatalogTrie()
    for item_id, sid in catalog:
        trie.insert(sid_to_flat_tokens(sid, config), str(item_id))
    return trie


class SequenceModel:
    """Laplace-smoothed next-token counts with longest-suffix back-off.

    Counts are kept for every context length from 1 up to `order`. A query
    uses the longest context suffix that was ever observed; if none was,
    the distribution is uniform over the flat vocabulary.
    """

    def __init__(self, order: int, alpha: float, vocab_size: int):
        if order < 1:
            raise ConfigError(f"order must be >= 1, got {order}")
        if alpha <= 0:
            raise ConfigError(f"alpha must be > 0, got {alpha}")
        if vocab_size < 1:
            raise ConfigError(f"vocab_size must be >= 1, got {vocab_size}")
        self.order = order
        self.alpha = alpha
        self.vocab_size = vocab_size
        self._counts: dict[tuple[int, ...], dict[int, int]] = {}
        self._totals: dict[tuple[int, ...], int] = {}

    def observe_stream(self, stream) -> None:
        stream = [int(t) for t in stream]
        for i in range(1, len(stream)):
            nxt = stream[i]
            for width in range(1, min(self.order, i) + 1):
                ctx = tuple(stream[i - width : i])
                slot = self._counts.setdefault(ctx, {})
                slot[nxt] = slot.get(nxt, 0) + 1
                self._totals[ctx] = self._totals.get(ctx, 0) + 1

    def _matched_context(self, context) -> tuple[int, ...] | None:
        context = tuple(int(t) for t in context)
        for width in range(min(self.order, len(context)), 0, -1):
            ctx = context[len(context) - width :]
            if ctx in self._totals:
                return ctx
        return None

    def probs(self, context) -> np.ndarray:
        """Distribution over the next flat token; always sums to 1."""
        v = self.vocab_size
        ctx = self._matched_context(context)
        if ctx is None:
            return np.full(v, 1.0 / v)
        counts = np.zeros(v, dtype=np.float64)
        for token, c in self._counts[ctx].items():
            counts[token] = c
        return (counts + self.alpha) / (self._totals[ctx] + self.alpha * v)

    def log_probs(self, context) -> np.ndarray:
        return np.log(self.probs(context))


def train_seq_model(
    data: InteractionDataset,
    catalog_sids: dict[str, tuple[int, ...]],
    order: int,
    alpha: float,
) -> SequenceModel:
    """Fit the count model on flattened interaction streams.

    Each record becomes one stream: the history items' flat tokens in order
    with the target item's tokens appended.
    """
    if len(data) == 0:
        raise DataError("cannot train a sequence model on an empty dataset")
    vocab = max(max(ts) for ts in catalog_sids.values()) + 1
    model = SequenceModel(order, alpha, vocab)
    for rec in data.records:
        stream: list[int] = []
        for item in (*rec.history, rec.target):
            tokens = catalog_sids.get(item)
            if tokens is None:
                raise DataError(f"interaction references unknown item {item!r}")
            stream.extend(tokens)
        model.observe_stream(stream)
    return model


def _is_terminal(token: int, config: QuantizerConfig) -> bool:
    return token >= (config.num_layers - 1) * config.codebook_size


def beam_search(
    model: SequenceModel,
    context,
    beam_width: int,
    max_len: int,
    config: QuantizerConfig,
    trie: CatalogTrie | None = None,
    fixed_prefix=None,
) -> list[tuple[tuple[int, ...], float]]:
    """Beam search over flat tokens.

    A sequence is complete once it emits a last-layer token, which works for
    both full-length and layer-2-elided ids. When a trie is given, expansion
    is restricted to its children, so only catalog prefixes are ever built.
    A fixed prefix is scored as given (log-probability 0) and included in the
    outputs. Results are sorted by total log-probability, ties broken by
    lexicographic order of the token sequence.
    """
    if beam_width < 1:
        raise ConfigError(f"beam_width must be >= 1, got {beam_width}")
    if max_len < 1:
        raise ConfigError(f"max_len must be >= 1, got {max_len}")
    context = tuple(int(t) for t in context)
    start = tuple(int(t) for t in fixed_prefix) if fixed_prefix else ()
    if start and _is_terminal(start[-1], config):
        return [(start, 0.0)]

    active: list[tuple[tuple[int, ...], float]] = [(start, 0.0)]
    finished: list[tuple[tuple[int, ...], float]] = []
    for _ in range(max_len):
        candidates: list[tuple[tuple[int, ...], float]] = []
        for seq, logp in active:
            if trie is not None:
                try:
                    allowed = sorted(trie.valid_next(seq))
                except PrefixNotFoundError:
                    continue
            else:
                allowed = range(model.vocab_size)
            token_logps = model.log_probs(context + seq)
            for t in allowed:
                candidates.append((seq + (t,), logp + float(token_logps[t])))
        if not candidates:
            break
        next_active = []
        for seq, logp in candidates:
            if _is_terminal(seq[-1], config):
                finished.append((seq, logp))
            else:
                next_active.append((seq, logp))
        finished.sort(key=lambda item: (-item[1], item[0]))
        del finished[beam_width:]
        next_active.sort(key=lambda item: (-item[1], item[0]))
        active = next_active[:beam_width]
        if not active:
            break
    finished.sort(key=lambda item: (-item[1], item[0]))
    return finished[:beam_width]


@dataclass(frozen=True)
class EvalReport:
    """Recall and invalid-ratio metrics, overall and per head/tail partition."""

    beam_width: int
    k_list: tuple[int, ...]
    trie_constrained: bool
    record_counts: dict[str, int]
    recall: dict[int, dict[str, float]]
    invalid_ratio: dict[int, dict[str, float]]

    def to_dict(self) -> dict:
        return {
            "beam_width": self.beam_width,
            "k_list": list(self.k_list),
            "trie_constrained": self.trie_constrained,
            "record_counts": dict(self.record_counts),
            "recall": {str(k): dict(v) for k, v in self.recall.items()},
            "invalid_ratio": {str(k): dict(v) for k, v in self.invalid_ratio.items()},
        }


def _partition_of(sid, head_set: frozenset[int]) -> str:
    if isinstance(sid, VarLenSemanticId):
        token = sid.layer_token(2)
        if token is None:
            return "head"
    else:
        token = sid[1] if len(sid) >= 2 else None
    return "head" if token is not None and token in head_set else "tail"


def evaluate(
    model: SequenceModel,
    test: InteractionDataset,
    catalog,
    config: QuantizerConfig,
    head_set: frozenset[int],
    beam_width: int,
    k_list,
    trie_mode: str = "off",
    given_prefix_layers: int = 0,
) -> EvalReport:
    """Run beam search per test record and score recall@k and invalid ratio.

    recall@k counts records whose target id appears in the top k sequences.
    invalid_ratio@k is the share of emitted top-k sequences matching no
    catalog item; with the trie constraint on it is zero by construction
    and reported as such. Records are partitioned by the target's layer-2
    token (elided ids count as head).
    """
    if trie_mode not in ("off", "on"):
        raise ConfigError(f"trie_mode must be 'off' or 'on', got {trie_mode!r}")
    k_list = tuple(int(k) for k in k_list)
    if not k_list or any(k < 1 for k in k_list):
        raise ConfigError(f"k_list must hold positive integers, got {k_list}")
    if max(k_list) > beam_width:
        raise ConfigError(f"k={max(k_list)} exceeds beam width {beam_width}")
    if given_prefix_layers < 0:
        raise ConfigError("given_prefix_layers must be >= 0")

    catalog = list(catalog)
    sid_by_item = {str(item): sid for item, sid in catalog}
    flat_by_item = {
        item: tuple(sid_to_flat_tokens(sid, config)) for item, sid in sid_by_item.items()
    }
    trie = build_trie(catalog, config)
    constrained = trie_mode == "on"

    groups = ("overall", "head", "tail")
    hits = {k: {g: 0 for g in groups} for k in k_list}
    invalid = {k: {g: 0 for g in groups} for k in k_list}
    emitted = {k: {g: 0 for g in groups} for k in k_list}
    counts = {g: 0 for g in groups}

    for rec in test.records:
        gold_sid = sid_by_item.get(rec.target)
        if gold_sid is None:
            raise DataError(f"test target {rec.target!r} is not in the catalog")
        gold = flat_by_item[rec.target]
        context: list[int] = []
        for item in rec.history:
            tokens = flat_by_item.get(item)
            if tokens is None:
                raise DataError(f"test history item {item!r} is not in the catalog")
            context.extend(tokens)
        prefix = gold[:given_prefix_layers] if given_prefix_layers else None
        preds = beam_search(
            model,
            context,
            beam_width,
            max_len=config.num_layers,
            config=config,
            trie=trie if constrained else None,
            fixed_prefix=prefix,
        )
        group = _partition_of(gold_sid, head_set)
        counts["overall"] += 1
        counts[group] += 1
        sequences = [seq for seq, _ in preds]
        for k in k_list:
            top = sequences[:k]
            hit = 1 if gold in top else 0
            bad = 0 if constrained else sum(1 for s in top if not trie.contains(s))
            for g in ("overall", group):
                hits[k][g] += hit
                invalid[k][g] += bad
                emitted[k][g] += len(top)

    recall = {
        k: {g: (hits[k][g] / counts[g] if counts[g] else 0.0) for g in groups}
        for k in k_list
    }
    invalid_ratio = {
        k: {
            g: (0.0 if constrained else (invalid[k][g] / emitted[k][g] if emitted[k][g] else 0.0))
            for g in groups
        }
        for k in k_list
    }
    return EvalReport(
        beam_width=beam_width,
        k_list=k_list,
        trie_constrained=constrained,
        record_counts=counts,
        recall=recall,
        invalid_ratio=invalid_ratio,
    )


@dataclass(frozen=True)
class InteractionSpec:
    """Knobs of the synthetic interaction generator.

    Item popularity is zipf over catalog order; each item also has one
    designated successor so histories carry learnable structure. A next item
    repeats the successor with probability `repeat_prob`, otherwise it is a
    fresh popularity draw.
    """

    num_records: int
    min_history: int = 2
    max_history: int = 5
    pop_exponent: float = 1.0
    repeat_prob: float = 0.6

    def __post_init__(self) -> None:
        if self.num_records < 1:
            raise ConfigError(f"num_records must be >= 1, got {self.num_records}")
        if self.min_history < 1 or self.max_history < self.min_history:
            raise ConfigError(
                f"history bounds ({self.min_history}, {self.max_history}) invalid"
            )
        if self.pop_exponent <= 0:
            raise ConfigError(f"pop_exponent must be > 0, got {self.pop_exponent}")
        if not 0 <= self.repeat_prob <= 1:
            raise ConfigError(f"repeat_prob must be in [0, 1], got {self.repeat_prob}")


def gen_interactions(
    item_ids,
    spec: InteractionSpec,
    rng: RandomSource,
    split: str = "train",
) -> InteractionDataset:
    """Synthesize interaction records over a catalog."""
    item_ids = [str(i) for i in item_ids]
    if not item_ids:
        raise DataError("cannot generate interactions over an empty catalog")
    n = len(item_ids)
    weights = 1.0 / np.arange(1, n + 1, dtype=np.float64) ** spec.pop_exponent
    popularity = weights / weights.sum()
    succ_rng, walk_rng = rng.split(2)
    successors = succ_rng.generator().choice(n, size=n, p=popularity)
    gen = walk_rng.generator()
    records = []
    for _ in range(spec.num_records):
        length = int(gen.integers(spec.min_history, spec.max_history + 1)) + 1
        seq = [int(gen.choice(n, p=popularity))]
        for _ in range(length - 1):
            if gen.random() < spec.repeat_prob:
                seq.append(int(successors[seq[-1]]))
            else:
                seq.append(int(gen.choice(n, p=popularity)))
        records.append(
            Interaction(
                history=tuple(item_ids[i] for i in seq[:-1]),
                target=item_ids[seq[-1]],
            )
        )
    return InteractionDataset(tuple(records), split=split)
