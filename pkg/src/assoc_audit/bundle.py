"""Labeled embedding bundles and their on-disk interchange formats.

A bundle directory holds ``manifest.json`` and ``embeddings.bin``:

    manifest.json   {"version": 1, "dtype": "f32le", "dim": D, "count": N,
                     "ids": [...], "groups": {id: label}, "source": str}
    embeddings.bin  N x D float32 little-endian, row major; record i starts
                    at byte offset i * D * 4.

A CSV file with header ``id,group,v0,...,v{D-1}`` is accepted as an
alternative load source. Vectors are stored at 32-bit precision (the
canonical bytes); downstream math widens to float64. Record order in the
file is canonical and is preserved by every operation. Bundles are
immutable after construction and safe to share across threads.
"""

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError

BUNDLE_DTYPE = "f32le"
MANIFEST_NAME = "manifest.json"
MATRIX_NAME = "embeddings.bin"


@dataclass
class EmbeddingRecord:
    id: str
    group: str
    vector: np.ndarray


@dataclass
class EmbeddingBundle:
    dim: int
    ids: list[str]
    groups: list[str]
    matrix: np.ndarray  # (count, dim) float32, canonical storage values
    source: str = ""
    dtype: str = BUNDLE_DTYPE

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(np.asarray(self.matrix), dtype=np.float32)
        if self.matrix.ndim != 2:
            self.matrix = self.matrix.reshape(len(self.ids), self.dim)
        if self.dim <= 0:
            raise DataError("dim must be a positive integer")
        if self.matrix.shape != (len(self.ids), self.dim):
            raise DataError(
                f"matrix shape {self.matrix.shape} does not match "
                f"{len(self.ids)} records of dim {self.dim}"
            )
        if len(self.groups) != len(self.ids):
            raise DataError("one group label per record required")
        if self.dtype != BUNDLE_DTYPE:
            raise DataError(f"unsupported dtype tag {self.dtype!r}")
        seen = set()
        for rid in self.ids:
            if rid in seen:
                raise DataError(f"duplicate record id {rid!r}")
            seen.add(rid)
        for rid, label in zip(self.ids, self.groups):
            if not label:
                raise DataError(f"record {rid!r} has an empty group label")
        if len(self.ids):
            norms = np.linalg.norm(self.matrix.astype(np.float64), axis=1)
            bad = np.flatnonzero(norms == 0.0)
            if bad.size:
                raise DataError(f"record {self.ids[int(bad[0])]!r} is a zero vector")

    def __len__(self) -> int:
        return len(self.ids)

    @classmethod
    def from_records(cls, dim: int, records, source: str = "") -> "EmbeddingBundle":
        recs = list(records)
        matrix = np.zeros((len(recs), dim), dtype=np.float32)
        for i, r in enumerate(recs):
            v = np.asarray(r.vector, dtype=np.float32)
            if v.shape != (dim,):
                raise DataError(f"record {r.id!r} has vector shape {v.shape}, expected ({dim},)")
            matrix[i] = v
        return cls(
            dim=dim,
            ids=[r.id for r in recs],
            groups=[r.group for r in recs],
            matrix=matrix,
            source=source,
        )

    @property
    def records(self) -> list[EmbeddingRecord]:
        return [
            EmbeddingRecord(rid, grp, self.matrix[i].copy())
            for i, (rid, grp) in enumerate(zip(self.ids, self.groups))
        ]

    def vectors_f64(self) -> np.ndarray:
        """Widened copy for computation; exact (float32 -> float64)."""
        return self.matrix.astype(np.float64)

    def group_order(self) -> list[str]:
        """Distinct group labels in first-appearance (file) order."""
        seen: dict[str, None] = {}
        for g in self.groups:
            seen.setdefault(g)
        return list(seen)

    def group_indices(self, label: str) -> np.ndarray:
        idx = np.flatnonzero(np.asarray(self.groups, dtype=object) == label)
        return idx

    def group_vectors(self, label: str) -> np.ndarray:
        """Float64 vectors of one group, in file order; error if absent."""
        idx = self.group_indices(label)
        if idx.size == 0:
            raise DataError(f"group {label!r} not present in bundle")
        return self.matrix[idx].astype(np.float64)

    def vector_by_id(self, rid: str) -> np.ndarray:
        try:
            i = self.ids.index(rid)
        except ValueError:
            raise DataError(f"record id {rid!r} not present in bundle") from None
        return self.matrix[i].astype(np.float64)


def filter_by_group(bundle: EmbeddingBundle, labels) -> EmbeddingBundle:
    """Records whose group is in labels, original order preserved."""
    wanted = set(labels)
    if not wanted:
        raise DataError("label set must be nonempty")
    keep = [i for i, g in enumerate(bundle.groups) if g in wanted]
    return EmbeddingBundle(
        dim=bundle.dim,
        ids=[bundle.ids[i] for i in keep],
        groups=[bundle.groups[i] for i in keep],
        matrix=bundle.matrix[keep] if keep else np.zeros((0, bundle.dim), np.float32),
        source=bundle.source,
    )


def save_bundle(bundle: EmbeddingBundle, path) -> None:
    """Write the bundle directory format; round-trips bit-exactly."""
    path = os.fspath(path)
    os.makedirs(path, exist_ok=True)
    manifest = {
        "version": 1,
        "dtype": bundle.dtype,
        "dim": bundle.dim,
        "count": len(bundle),
        "ids": bundle.ids,
        "groups": dict(zip(bundle.ids, bundle.groups)),
        "source": bundle.source,
    }
    _write_atomic(os.path.join(path, MANIFEST_NAME),
                  json.dumps(manifest, indent=2).encode() + b"\n")
    little = bundle.matrix.astype("<f4", copy=False)
    _write_atomic(os.path.join(path, MATRIX_NAME), little.tobytes(order="C"))


def _write_atomic(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load_bundle(path) -> EmbeddingBundle:
    """Load a bundle directory (manifest + matrix) or a CSV file."""
    path = os.fspath(path)
    if os.path.isdir(path):
        return _load_directory(path)
    if path.endswith(".csv"):
        return _load_csv(path)
    if os.path.basename(path) == MANIFEST_NAME:
        return _load_directory(os.path.dirname(path) or ".")
    raise DataError(f"{path}: not a bundle directory or CSV file")


def _load_directory(path: str) -> EmbeddingBundle:
    manifest_path = os.path.join(path, MANIFEST_NAME)
    try:
        with open(manifest_path, "rb") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"{path}: missing {MANIFEST_NAME}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest_path}: corrupt manifest ({exc})") from None

    for key in ("version", "dtype", "dim", "count", "ids", "groups"):
        if key not in manifest:
            raise DataError(f"{manifest_path}: manifest missing field {key!r}")
    if manifest["version"] != 1:
        raise DataError(f"{manifest_path}: unsupported version {manifest['version']!r}")
    if manifest["dtype"] != BUNDLE_DTYPE:
        raise DataError(f"{manifest_path}: unsupported dtype {manifest['dtype']!r}")
    dim = manifest["dim"]
    count = manifest["count"]
    ids = manifest["ids"]
    if not isinstance(dim, int) or dim <= 0:
        raise DataError(f"{manifest_path}: dim must be a positive integer")
    if len(ids) != count:
        raise DataError(f"{manifest_path}: {len(ids)} ids listed but count is {count}")
    groups_map = manifest["groups"]
    missing = [rid for rid in ids if rid not in groups_map]
    if missing:
        raise DataError(f"{manifest_path}: no group label for id {missing[0]!r}")

    matrix_path = os.path.join(path, MATRIX_NAME)
    try:
        raw = open(matrix_path, "rb").read()
    except FileNotFoundError:
        raise DataError(f"{path}: missing {MATRIX_NAME}") from None
    expected = count * dim * 4
    if len(raw) != expected:
        raise DataError(
            f"{matrix_path}: truncated matrix, expected {expected} bytes, got {len(raw)}"
        )
    matrix = np.frombuffer(raw, dtype="<f4").reshape(count, dim)
    return EmbeddingBundle(
        dim=dim,
        ids=list(ids),
        groups=[groups_map[rid] for rid in ids],
        matrix=matrix,
        source=manifest.get("source", ""),
    )


def _load_csv(path: str) -> EmbeddingBundle:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty CSV") from None
        if header[:2] != ["id", "group"] or len(header) < 3:
            raise DataError(f"{path}: expected header id,group,v0,...")
        dim = len(header) - 2
        for j, name in enumerate(header[2:]):
            if name != f"v{j}":
                raise DataError(f"{path}: expected column v{j}, found {name!r}")
        ids, groups, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 2:
                raise DataError(f"{path}:{lineno}: expected {dim + 2} fields, got {len(row)}")
            ids.append(row[0])
            groups.append(row[1])
            try:
                rows.append([float(v) for v in row[2:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad vector value ({exc})") from None
    matrix = np.asarray(rows, dtype=np.float32).reshape(len(ids), dim)
    return EmbeddingBundle(dim=dim, ids=ids, groups=groups, matrix=matrix, source=path)
