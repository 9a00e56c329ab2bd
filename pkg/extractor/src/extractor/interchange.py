"""Writers for the audit toolkit's interchange files.

The extractor couples to the analysis toolkit only through these on-disk
formats:

  bundle directory   manifest.json {version:1, dtype:"f32le", dim, count,
                     ids, groups, source} + embeddings.bin (count x dim
                     float32 little-endian, row major)
  response CSV       image_id,group,kind,question_or_param,text
"""

import csv
import json
import os

import numpy as np

MANIFEST_NAME = "manifest.json"
MATRIX_NAME = "embeddings.bin"
RESPONSE_HEADER = ["image_id", "group", "kind", "question_or_param", "text"]


def write_bundle(path, ids, groups, matrix, source: str) -> None:
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2 or matrix.shape[0] != len(ids) or len(groups) != len(ids):
        raise ValueError("ids, groups, and matrix rows must align")
    os.makedirs(path, exist_ok=True)
    manifest = {
        "version": 1,
        "dtype": "f32le",
        "dim": int(matrix.shape[1]),
        "count": int(matrix.shape[0]),
        "ids": list(ids),
        "groups": dict(zip(ids, groups)),
        "source": source,
    }
    with open(os.path.join(path, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    with open(os.path.join(path, MATRIX_NAME), "wb") as fh:
        fh.write(matrix.tobytes(order="C"))


def write_responses(path, rows) -> None:
    """rows: iterable of (image_id, group, kind, question_or_param, text)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESPONSE_HEADER)
        for row in rows:
            writer.writerow(list(row))


def write_provenance(path, payload: dict) -> None:
    """Sidecar JSON recording every generation setting of a run."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
