"""Embedding and response extraction from vision-language checkpoints."""

from .embed import US_STATES_AND_DC, embed_images, embed_texts, expand_prompts
from .generate import run_captioning, run_vqa
from .jobs import ExtractionJob, JobError, ModelSpec, load_metadata, resolve_model

__version__ = "0.1.0"
