"""Extraction job description: model resolution and image metadata."""

import csv
import json
import os
from dataclasses import dataclass, field

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".webp")

# Friendly ids for the supported checkpoint families. SLIP published its
# weights outside the transformers ecosystem; point --checkpoint at a
# CLIP-format conversion to use it.
KNOWN_MODELS = {
    "clip-vit-base-patch32": ("clip", "openai/clip-vit-base-patch32"),
    "slip-vit-base": ("clip", None),
    "blip-vit-base": ("blip", "Salesforce/blip-itm-base-coco"),
    "blip-vqa-base": ("blip_vqa", "Salesforce/blip-vqa-base"),
    "blip-captioning-base": ("blip_caption", "Salesforce/blip-image-captioning-base"),
}

_ARCH_FAMILIES = {
    "CLIPModel": "clip",
    "BlipModel": "blip",
    "BlipForImageTextRetrieval": "blip",
    "BlipForConditionalGeneration": "blip_caption",
    "BlipForQuestionAnswering": "blip_vqa",
}


class JobError(Exception):
    """Invalid job description or unusable inputs."""


@dataclass
class ModelSpec:
    model_id: str
    family: str
    source: str  # hub id or local checkpoint directory


def resolve_model(model_id: str, checkpoint: str | None = None) -> ModelSpec:
    """Map a model id (alias or local path) to a loadable checkpoint."""
    if checkpoint is None and os.path.isdir(model_id):
        checkpoint = model_id
    if checkpoint is not None:
        config_path = os.path.join(checkpoint, "config.json")
        try:
            with open(config_path, encoding="utf-8") as fh:
                config = json.load(fh)
        except FileNotFoundError:
            raise JobError(f"{checkpoint}: no config.json; not a checkpoint directory") from None
        for arch in config.get("architectures") or []:
            if arch in _ARCH_FAMILIES:
                return ModelSpec(model_id=model_id, family=_ARCH_FAMILIES[arch],
                                 source=checkpoint)
        raise JobError(
            f"{checkpoint}: unsupported architectures {config.get('architectures')!r}"
        )
    if model_id not in KNOWN_MODELS:
        raise JobError(
            f"unrecognized model id {model_id!r}; known ids: {sorted(KNOWN_MODELS)}"
        )
    family, source = KNOWN_MODELS[model_id]
    if source is None:
        raise JobError(
            f"model {model_id!r} has no hub distribution; pass --checkpoint with a "
            "converted local checkpoint"
        )
    return ModelSpec(model_id=model_id, family=family, source=source)


@dataclass
class ExtractionJob:
    model: ModelSpec
    image_dir: str | None = None
    metadata: dict[str, str] = field(default_factory=dict)  # image id -> group
    skip_undecodable: bool = False
    batch_size: int = 16

    def image_paths(self) -> list[tuple[str, str, str]]:
        """(record id, group, path) per image file, sorted by file name."""
        if not self.image_dir or not os.path.isdir(self.image_dir):
            raise JobError(f"image directory {self.image_dir!r} not found")
        out = []
        for name in sorted(os.listdir(self.image_dir)):
            stem, ext = os.path.splitext(name)
            if ext.lower() not in IMAGE_EXTENSIONS:
                continue
            if stem not in self.metadata:
                raise JobError(f"image {name!r} has no metadata row")
            out.append((stem, self.metadata[stem], os.path.join(self.image_dir, name)))
        if not out:
            raise JobError(f"no images found under {self.image_dir!r}")
        return out


def load_metadata(path) -> dict[str, str]:
    """CSV with header id,group; one row per image id."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise JobError(f"metadata file {path!r} not found") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["id", "group"]:
            raise JobError(f"{path}: expected header id,group")
        meta = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2 or not row[0] or not row[1]:
                raise JobError(f"{path}:{lineno}: need id and group")
            if row[0] in meta:
                raise JobError(f"{path}:{lineno}: duplicate id {row[0]!r}")
            meta[row[0]] = row[1]
    if not meta:
        raise JobError(f"{path}: no metadata rows")
    return meta
