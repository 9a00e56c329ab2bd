"""Joint-space embedding extraction for images and texts."""

import json
import logging
import os

import numpy as np

from .interchange import write_bundle, write_provenance
from .jobs import ExtractionJob, JobError, ModelSpec

log = logging.getLogger("extractor")

PLACEHOLDER = "[STATE]"

US_STATES_AND_DC = [
    "Alabama", "Alaska", "Arizona", "Arkansas", "California", "Colorado",
    "Connecticut", "Delaware", "Florida", "Georgia", "Hawaii", "Idaho",
    "Illinois", "Indiana", "Iowa", "Kansas", "Kentucky", "Louisiana", "Maine",
    "Maryland", "Massachusetts", "Michigan", "Minnesota", "Mississippi",
    "Missouri", "Montana", "Nebraska", "Nevada", "New Hampshire", "New Jersey",
    "New Mexico", "New York", "North Carolina", "North Dakota", "Ohio",
    "Oklahoma", "Oregon", "Pennsylvania", "Rhode Island", "South Carolina",
    "South Dakota", "Tennessee", "Texas", "Utah", "Vermont", "Virginia",
    "Washington", "West Virginia", "Wisconsin", "Wyoming",
    "District of Columbia",
]


def _load_embedding_model(spec: ModelSpec):
    import torch
    from transformers import AutoProcessor

    if spec.family == "clip":
        from transformers import CLIPModel
        model = CLIPModel.from_pretrained(spec.source)
    elif spec.family == "blip":
        from transformers import BlipModel
        model = BlipModel.from_pretrained(spec.source)
    else:
        raise JobError(
            f"model family {spec.family!r} has no joint embedding space; "
            "use a clip or blip retrieval checkpoint"
        )
    model.eval()
    torch.set_grad_enabled(False)
    return model, AutoProcessor.from_pretrained(spec.source)


def _features(out):
    # transformers >= 5 returns an output object whose pooler_output holds
    # the projected features; earlier versions return the tensor directly.
    import torch
    if torch.is_tensor(out):
        return out
    return out.pooler_output


def embed_images(job: ExtractionJob, out_path: str) -> int:
    """Embed every image in the job into a bundle directory; returns count."""
    from PIL import Image

    model, processor = _load_embedding_model(job.model)
    entries = job.image_paths()
    ids, groups, images = [], [], []
    for rid, group, path in entries:
        try:
            with Image.open(path) as img:
                images.append(img.convert("RGB"))
        except Exception as exc:
            if job.skip_undecodable:
                log.warning("skipping undecodable image %s (%s)", path, exc)
                continue
            raise JobError(f"cannot decode image {path!r}: {exc}") from None
        ids.append(rid)
        groups.append(group)
    if not ids:
        raise JobError("no decodable images to embed")

    chunks = []
    for start in range(0, len(images), job.batch_size):
        batch = processor(images=images[start:start + job.batch_size], return_tensors="pt")
        chunks.append(_features(model.get_image_features(**batch)).cpu().numpy())
    matrix = np.vstack(chunks).astype(np.float32)
    source = f"{job.model.model_id} image encoder ({job.model.source})"
    write_bundle(out_path, ids, groups, matrix, source)
    write_provenance(os.path.join(out_path, "provenance.json"), {
        "kind": "image_embeddings",
        "model_id": job.model.model_id,
        "checkpoint": job.model.source,
        "count": len(ids),
        "dim": int(matrix.shape[1]),
        "batch_size": job.batch_size,
    })
    return len(ids)


def expand_prompts(payload: dict) -> list[tuple[str, str]]:
    """(record id, text) pairs from a prompts JSON payload.

    Accepts plain texts ({"texts": {id: text}}), word lists (each word
    embeds as itself), and prompt templates; a template carrying [STATE]
    expands over the fifty U.S. states plus the District of Columbia,
    keyed by region name.
    """
    pairs: list[tuple[str, str]] = []
    texts = payload.get("texts", {})
    if isinstance(texts, list):
        pairs.extend((t, t) for t in texts)
    else:
        pairs.extend(texts.items())
    for words in payload.get("word_lists", {}).values():
        pairs.extend((w, w) for w in words)
    for name, template in payload.get("prompt_templates", {}).items():
        if PLACEHOLDER in template:
            pairs.extend(
                (region, template.replace(PLACEHOLDER, region))
                for region in US_STATES_AND_DC
            )
        else:
            pairs.append((name, template))
    if not pairs:
        raise JobError("prompts file contains no texts, word lists, or templates")
    seen = set()
    for rid, _ in pairs:
        if rid in seen:
            raise JobError(f"duplicate prompt id {rid!r} after expansion")
        seen.add(rid)
    return pairs


def embed_texts(spec: ModelSpec, prompts_path: str, out_path: str,
                batch_size: int = 32) -> int:
    """Embed prompt texts into a bundle directory; returns record count."""
    try:
        with open(prompts_path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise JobError(f"prompts file {prompts_path!r} not found") from None
    except json.JSONDecodeError as exc:
        raise JobError(f"{prompts_path}: invalid JSON ({exc})") from None
    pairs = expand_prompts(payload)

    model, processor = _load_embedding_model(spec)
    ids = [rid for rid, _ in pairs]
    chunks = []
    for start in range(0, len(pairs), batch_size):
        texts = [text for _, text in pairs[start:start + batch_size]]
        batch = processor(text=texts, return_tensors="pt", padding=True)
        chunks.append(_features(model.get_text_features(**batch)).cpu().numpy())
    matrix = np.vstack(chunks).astype(np.float32)
    source = f"{spec.model_id} text encoder ({spec.source})"
    write_bundle(out_path, ids, ["text"] * len(ids), matrix, source)
    write_provenance(os.path.join(out_path, "provenance.json"), {
        "kind": "text_embeddings",
        "model_id": spec.model_id,
        "checkpoint": spec.source,
        "count": len(ids),
        "dim": int(matrix.shape[1]),
        "batch_size": batch_size,
    })
    return len(ids)
