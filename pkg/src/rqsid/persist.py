"""File formats and run bookkeeping.

Formats:
  codebook  JSON header plus a sibling binary of row-major little-endian
            float32 codewords (embedded in the JSON for tiny codebooks).
  ids       long-form CSV item_id,layer,token with 0-based tokens.
  embeddings CSV item_id,v0..v{D-1}, or JSON header plus float64 binary.
  interactions CSV user_context,target,split with pipe-separated context.
  reports   one JSON document with a schema_version field.

All writes go through a temp file and an atomic rename; every emitted file
is digested into the run manifest.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import (
    Codebook,
    ConfigError,
    DataError,
    EmbeddingCollection,
    QuantizerConfig,
    VarLenSemanticId,
)
from .grsim import Interaction, InteractionDataset

FORMAT_VERSION = 1
# Codebooks at or below this many floats are embedded directly in the JSON.
INLINE_CODEBOOK_LIMIT = 4096


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# --- codebook ---------------------------------------------------------------


def save_codebook(path, codebook: Codebook, head_set=None, inline: bool | None = None):
    """Write a codebook header (and binary sidecar unless inlined).

    Returns the list of written paths. Codewords are stored as little-endian
    float32; reload before encoding so file and in-memory codebooks agree.
    """
    path = Path(path)
    cfg = codebook.config
    weights = codebook.layers.astype("<f4")
    if inline is None:
        inline = weights.size <= INLINE_CODEBOOK_LIMIT
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "codebook",
        "num_layers": cfg.num_layers,
        "codebook_size": cfg.codebook_size,
        "dim": cfg.dim,
        "kmeans_iters": cfg.kmeans_iters,
        "seed": cfg.seed,
        "convergence_tol": cfg.convergence_tol,
        "training_sse_per_layer": list(codebook.training_sse_per_layer),
        "token_base": 0,
    }
    if head_set is not None:
        header["head_set"] = sorted(int(t) for t in head_set)
    written = []
    if inline:
        header["layers"] = [
            [[float(v) for v in row] for row in layer] for layer in weights
        ]
    else:
        bin_path = path.with_suffix(".bin")
        payload = weights.tobytes(order="C")
        atomic_write_bytes(bin_path, payload)
        header["layers_file"] = bin_path.name
        header["layers_dtype"] = "float32-le"
        header["layers_sha256"] = sha256_bytes(payload)
        written.append(bin_path)
    atomic_write_text(path, dump_json(header))
    written.insert(0, path)
    return written


def load_codebook(path) -> tuple[Codebook, frozenset[int] | None]:
    path = Path(path)
    header = json.loads(path.read_text())
    if header.get("kind") != "codebook":
        raise DataError(f"{path} is not a codebook file")
    cfg = QuantizerConfig(
        num_layers=header["num_layers"],
        codebook_size=header["codebook_size"],
        dim=header["dim"],
        kmeans_iters=header["kmeans_iters"],
        seed=header["seed"],
        convergence_tol=header["convergence_tol"],
    )
    shape = (cfg.num_layers, cfg.codebook_size, cfg.dim)
    if "layers" in header:
        layers = np.asarray(header["layers"], dtype=np.float64)
    else:
        bin_path = path.parent / header["layers_file"]
        payload = bin_path.read_bytes()
        if sha256_bytes(payload) != header["layers_sha256"]:
            raise DataError(f"digest mismatch for {bin_path}")
        layers = np.frombuffer(payload, dtype="<f4").astype(np.float64)
        if layers.size != int(np.prod(shape)):
            raise DataError(f"{bin_path} holds {layers.size} floats, expected {np.prod(shape)}")
        layers = layers.reshape(shape)
    codebook = Codebook(cfg, layers, tuple(header["training_sse_per_layer"]))
    head = header.get("head_set")
    return codebook, (frozenset(int(t) for t in head) if head is not None else None)


# --- semantic ids -----------------------------------------------------------

_SID_COMMENT = "# semantic ids in long form; tokens 0-based, layers 1-based"


def save_sids(path, items) -> None:
    """Write (item_id, id) pairs; ids are tuples or VarLenSemanticId."""
    buf = io.StringIO()
    buf.write(_SID_COMMENT + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["item_id", "layer", "token"])
    for item_id, sid in items:
        entries = (
            sid.entries
            if isinstance(sid, VarLenSemanticId)
            else tuple(enumerate(sid, start=1))
        )
        for layer, token in entries:
            writer.writerow([item_id, layer, token])
    atomic_write_text(path, buf.getvalue())


def load_sids(path, config: QuantizerConfig) -> list[tuple[str, VarLenSemanticId]]:
    """Read an id file back; rows of one item must be contiguous."""
    rows_by_item: dict[str, list[tuple[int, int]]] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header_seen = False
        for row in reader:
            if not row or row[0].startswith("#"):
                continue
            if not header_seen:
                if row != ["item_id", "layer", "token"]:
                    raise DataError(f"{path} has unexpected header {row}")
                header_seen = True
                continue
            item_id, layer, token = row[0], int(row[1]), int(row[2])
            rows_by_item.setdefault(item_id, []).append((layer, token))
    if not header_seen:
        raise DataError(f"{path} is missing the id header row")
    return [
        (item_id, VarLenSemanticId(tuple(entries)).validate(config))
        for item_id, entries in rows_by_item.items()
    ]


# --- embeddings -------------------------------------------------------------


def save_embeddings_csv(path, data: EmbeddingCollection) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["item_id"] + [f"v{i}" for i in range(data.dim)])
    for item_id, vec in zip(data.ids, data.vectors):
        writer.writerow([item_id] + [repr(float(v)) for v in vec])
    atomic_write_text(path, buf.getvalue())


def save_embeddings_binary(path, data: EmbeddingCollection):
    """JSON header plus float64 little-endian binary; lossless."""
    path = Path(path)
    bin_path = path.with_suffix(".bin")
    payload = data.vectors.astype("<f8").tobytes(order="C")
    atomic_write_bytes(bin_path, payload)
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "embeddings",
        "count": len(data),
        "dim": data.dim,
        "vectors_dtype": "float64-le",
        "vectors_file": bin_path.name,
        "vectors_sha256": sha256_bytes(payload),
        "item_ids": list(data.ids),
    }
    atomic_write_text(path, dump_json(header))
    return [path, bin_path]


def load_embeddings(path) -> EmbeddingCollection:
    """Load either format; .csv by extension, JSON header otherwise."""
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if not header or header[0] != "item_id":
                raise DataError(f"{path} has unexpected embedding header {header}")
            dim = len(header) - 1
            ids, rows = [], []
            for row in reader:
                if not row:
                    continue
                if len(row) != dim + 1:
                    raise DataError(f"{path} row for {row[0]!r} has {len(row) - 1} values, expected {dim}")
                ids.append(row[0])
                rows.append([float(v) for v in row[1:]])
        if not ids:
            raise DataError(f"{path} holds no embeddings")
        return EmbeddingCollection(tuple(ids), np.asarray(rows, dtype=np.float64))
    header = json.loads(path.read_text())
    if header.get("kind") != "embeddings":
        raise DataError(f"{path} is not an embeddings file")
    bin_path = path.parent / header["vectors_file"]
    payload = bin_path.read_bytes()
    if sha256_bytes(payload) != header["vectors_sha256"]:
        raise DataError(f"digest mismatch for {bin_path}")
    vectors = np.frombuffer(payload, dtype="<f8").reshape(header["count"], header["dim"])
    return EmbeddingCollection(tuple(header["item_ids"]), vectors)


def save_labels(path, ids, labels) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["item_id", "cluster"])
    for item_id, label in zip(ids, labels):
        writer.writerow([item_id, int(label)])
    atomic_write_text(path, buf.getvalue())


# --- interactions -----------------------------------------------------------


def save_interactions(path, datasets) -> None:
    """Write one or more datasets (rows carry their split tag)."""
    if isinstance(datasets, InteractionDataset):
        datasets = [datasets]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["user_context", "target", "split"])
    for ds in datasets:
        for rec in ds.records:
            writer.writerow(["|".join(rec.history), rec.target, ds.split])
    atomic_write_text(path, buf.getvalue())


def load_interactions(path) -> dict[str, InteractionDataset]:
    """Read interaction records grouped by split tag."""
    by_split: dict[str, list[Interaction]] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["user_context", "target", "split"]:
            raise DataError(f"{path} has unexpected interaction header {header}")
        for row in reader:
            if not row:
                continue
            context, target, split = row
            history = tuple(t for t in context.split("|") if t)
            by_split.setdefault(split, []).append(Interaction(history, target))
    return {
        split: InteractionDataset(tuple(records), split=split)
        for split, records in by_split.items()
    }


# --- reports and manifest ---------------------------------------------------


def save_report(path, kind: str, payload: dict) -> None:
    doc = {"schema_version": FORMAT_VERSION, "kind": kind}
    doc.update(payload)
    atomic_write_text(path, dump_json(doc))


def load_report(path) -> dict:
    return json.loads(Path(path).read_text())


MANIFEST_NAME = "manifest.json"


def record_run(out_dir, command: str, config: dict, timings: dict, outputs) -> Path:
    """Append one run record to the manifest in `out_dir`."""
    out_dir = Path(out_dir)
    manifest_path = out_dir / MANIFEST_NAME
    manifest = {"format_version": FORMAT_VERSION, "kind": "run_manifest", "runs": []}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
    from . import __version__

    manifest["runs"].append(
        {
            "command": command,
            "tool_version": __version__,
            "config": config,
            "timings_s": {k: round(float(v), 6) for k, v in timings.items()},
            "outputs": [
                {
                    "path": str(Path(p).relative_to(out_dir)),
                    "bytes": Path(p).stat().st_size,
                    "sha256": sha256_file(p),
                }
                for p in outputs
            ],
        }
    )
    atomic_write_text(manifest_path, dump_json(manifest))
    return manifest_path


def verify_manifest(out_dir) -> list[str]:
    """Re-digest every file referenced by the manifest; returns mismatches."""
    out_dir = Path(out_dir)
    manifest_path = out_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise DataError(f"no manifest in {out_dir}")
    manifest = json.loads(manifest_path.read_text())
    problems = []
    for run in manifest.get("runs", []):
        for entry in run.get("outputs", []):
            target = out_dir / entry["path"]
            if not target.exists():
                problems.append(f"missing: {entry['path']}")
            elif sha256_file(target) != entry["sha256"]:
                problems.append(f"digest mismatch: {entry['path']}")
    return problems


class OutputLock:
    """Exclusive lock on an output directory, held for one command."""

    def __init__(self, out_dir):
        self.path = Path(out_dir) / ".lock"

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(
                f"output directory is locked by {self.path}; remove it if stale"
            ) from None
        os.close(fd)
        return self

    def __exit__(self, *exc):
        try:
            os.unlink(self.path)
        except FileNotFoundError:
            pass
        return False
