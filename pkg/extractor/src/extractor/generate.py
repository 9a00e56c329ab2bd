"""Batch visual question answering and captioning to response CSVs."""

import hashlib

from .interchange import write_provenance, write_responses
from .jobs import ExtractionJob, JobError

DEFAULT_TOP_P = (0.5, 0.6, 0.7, 0.8, 0.9)

VQA_MAX_NEW_TOKENS = 10
CAPTION_MAX_NEW_TOKENS = 30
CAPTION_MIN_NEW_TOKENS = 3


def _load_generation_model(spec, family):
    import torch
    from transformers import AutoProcessor

    if spec.family != family:
        raise JobError(
            f"model {spec.model_id!r} is family {spec.family!r}; this task needs {family!r}"
        )
    if family == "blip_vqa":
        from transformers import BlipForQuestionAnswering
        model = BlipForQuestionAnswering.from_pretrained(spec.source)
    else:
        from transformers import BlipForConditionalGeneration
        model = BlipForConditionalGeneration.from_pretrained(spec.source)
    model.eval()
    torch.set_grad_enabled(False)
    return model, AutoProcessor.from_pretrained(spec.source)


def _decode(processor, token_ids) -> str:
    return processor.decode(token_ids, skip_special_tokens=True).strip()


def _sampling_seed(base_seed: int, image_id: str, top_p: float) -> int:
    text = f"{base_seed}:{image_id}:{top_p!r}".encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=4).digest(), "little")


def _open_rgb(path):
    from PIL import Image
    with Image.open(path) as img:
        return img.convert("RGB")


def run_vqa(job: ExtractionJob, question: str, out_csv: str) -> int:
    """One deterministic (greedy) answer row per image; returns row count."""
    model, processor = _load_generation_model(job.model, "blip_vqa")
    rows = []
    for rid, group, path in job.image_paths():
        try:
            inputs = processor(images=_open_rgb(path), text=question, return_tensors="pt")
            out = model.generate(**inputs, do_sample=False,
                                 max_new_tokens=VQA_MAX_NEW_TOKENS, min_new_tokens=1)
            answer = _decode(processor, out[0])
        except Exception as exc:
            raise JobError(f"inference failed for image {rid!r}: {exc}") from None
        if not answer:
            raise JobError(f"empty answer generated for image {rid!r}")
        rows.append((rid, group, "vqa_answer", question, answer))
    write_responses(out_csv, rows)
    write_provenance(out_csv + ".provenance.json", {
        "kind": "vqa",
        "model_id": job.model.model_id,
        "checkpoint": job.model.source,
        "question": question,
        "decoding": {"do_sample": False, "max_new_tokens": VQA_MAX_NEW_TOKENS,
                     "min_new_tokens": 1},
        "rows": len(rows),
    })
    return len(rows)


def run_captioning(job: ExtractionJob, out_csv: str,
                   top_p_values=DEFAULT_TOP_P, seed: int = 0) -> int:
    """One nucleus-sampled caption row per (image, top-p); returns row count.

    Sampling is reseeded per (image, top-p) from the base seed, so reruns
    reproduce the same captions.
    """
    import torch

    for p in top_p_values:
        if not 0.0 < float(p) < 1.0:
            raise JobError(f"top-p value {p!r} outside (0, 1)")
    model, processor = _load_generation_model(job.model, "blip_caption")
    rows = []
    for rid, group, path in job.image_paths():
        image = _open_rgb(path)
        inputs = processor(images=image, return_tensors="pt")
        for p in top_p_values:
            try:
                torch.manual_seed(_sampling_seed(seed, rid, float(p)))
                out = model.generate(**inputs, do_sample=True, top_p=float(p),
                                     max_new_tokens=CAPTION_MAX_NEW_TOKENS,
                                     min_new_tokens=CAPTION_MIN_NEW_TOKENS)
                caption = _decode(processor, out[0])
            except Exception as exc:
                raise JobError(f"inference failed for image {rid!r}: {exc}") from None
            if not caption:
                raise JobError(f"empty caption generated for image {rid!r} at top-p {p}")
            rows.append((rid, group, "caption", repr(float(p)), caption))
    write_responses(out_csv, rows)
    write_provenance(out_csv + ".provenance.json", {
        "kind": "captioning",
        "model_id": job.model.model_id,
        "checkpoint": job.model.source,
        "top_p_values": [float(p) for p in top_p_values],
        "seed": seed,
        "decoding": {"do_sample": True, "max_new_tokens": CAPTION_MAX_NEW_TOKENS,
                     "min_new_tokens": CAPTION_MIN_NEW_TOKENS},
        "rows": len(rows),
    })
    return len(rows)
