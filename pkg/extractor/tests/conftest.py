"""Builds tiny random-weight local checkpoints so the extraction pipeline
can run hermetically: a CLIP-style joint-embedding model and BLIP-style
captioning/VQA models, each saved to disk and loaded back through
from_pretrained like any other local checkpoint.
"""

import json
import os

import numpy as np
import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")

VISION_CONFIG = {
    "hidden_size": 32, "intermediate_size": 64, "num_attention_heads": 2,
    "num_hidden_layers": 2, "image_size": 32, "patch_size": 8,
}


def _clip_tokenizer(tmp):
    from transformers import CLIPTokenizer
    chars = list("abcdefghijklmnopqrstuvwxyz0123456789.,!?'- ")
    vocab = {"<|startoftext|>": 0, "<|endoftext|>": 1}
    for c in chars:
        vocab.setdefault(c, len(vocab))
        vocab.setdefault(c + "</w>", len(vocab))
    vocab_path = os.path.join(tmp, "vocab.json")
    merges_path = os.path.join(tmp, "merges.txt")
    with open(vocab_path, "w") as fh:
        json.dump(vocab, fh)
    with open(merges_path, "w") as fh:
        fh.write("#version: 0.2\n")
    return CLIPTokenizer(vocab_path, merges_path)


@pytest.fixture(scope="session")
def clip_checkpoint(tmp_path_factory):
    import torch
    from transformers import CLIPConfig, CLIPImageProcessor, CLIPModel, CLIPProcessor

    tmp = tmp_path_factory.mktemp("tiny_clip")
    tokenizer = _clip_tokenizer(str(tmp))
    config = CLIPConfig(
        text_config={
            "hidden_size": 32, "intermediate_size": 64, "num_attention_heads": 2,
            "num_hidden_layers": 2, "vocab_size": tokenizer.vocab_size,
            "max_position_embeddings": 77,
            "bos_token_id": 0, "eos_token_id": 1, "pad_token_id": 1,
        },
        vision_config=dict(VISION_CONFIG),
        projection_dim=16,
    )
    torch.manual_seed(1234)
    model = CLIPModel(config)
    target = tmp / "checkpoint"
    model.save_pretrained(target)
    image_processor = CLIPImageProcessor(
        size={"shortest_edge": 32}, crop_size={"height": 32, "width": 32})
    CLIPProcessor(image_processor=image_processor, tokenizer=tokenizer).save_pretrained(target)
    return str(target)


def _blip_pieces(tmp_path_factory, architecture, seed):
    import torch
    from transformers import BertTokenizerFast, BlipConfig, BlipImageProcessor, BlipProcessor

    tmp = tmp_path_factory.mktemp(f"tiny_{architecture.__name__.lower()}")
    words = ["a", "photo", "of", "person", "man", "woman", "yes", "no",
             "ohio", "china", "state", "the", "in", "is", "an", "american",
             "wearing", "grey", "shirt"]
    specials = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[DEC]", "[ENC]"]
    vocab_path = tmp / "vocab.txt"
    vocab_path.write_text("\n".join(specials + words) + "\n")
    tokenizer = BertTokenizerFast(str(vocab_path),
                                  additional_special_tokens=["[DEC]", "[ENC]"])
    config = BlipConfig(
        text_config={
            "hidden_size": 32, "intermediate_size": 64, "num_attention_heads": 2,
            "num_hidden_layers": 2, "vocab_size": tokenizer.vocab_size,
            "encoder_hidden_size": 32, "max_position_embeddings": 64,
            "bos_token_id": tokenizer.convert_tokens_to_ids("[DEC]"),
            "sep_token_id": tokenizer.convert_tokens_to_ids("[SEP]"),
            "eos_token_id": tokenizer.convert_tokens_to_ids("[SEP]"),
            "pad_token_id": tokenizer.convert_tokens_to_ids("[PAD]"),
        },
        vision_config=dict(VISION_CONFIG),
    )
    torch.manual_seed(seed)
    model = architecture(config)
    target = tmp / "checkpoint"
    model.save_pretrained(target)
    image_processor = BlipImageProcessor(size={"height": 32, "width": 32})
    BlipProcessor(image_processor=image_processor, tokenizer=tokenizer).save_pretrained(target)
    return str(target)


@pytest.fixture(scope="session")
def blip_caption_checkpoint(tmp_path_factory):
    from transformers import BlipForConditionalGeneration
    return _blip_pieces(tmp_path_factory, BlipForConditionalGeneration, seed=71)


@pytest.fixture(scope="session")
def blip_vqa_checkpoint(tmp_path_factory):
    from transformers import BlipForQuestionAnswering
    return _blip_pieces(tmp_path_factory, BlipForQuestionAnswering, seed=72)


@pytest.fixture(scope="session")
def image_fixture(tmp_path_factory):
    """Six small images across two groups, with their metadata CSV."""
    from PIL import Image

    tmp = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(9)
    rows = ["id,group"]
    for i in range(6):
        group = "alpha" if i < 3 else "beta"
        name = f"face{i:02d}"
        arr = rng.integers(0, 255, size=(40, 40, 3), dtype=np.uint8)
        Image.fromarray(arr).save(tmp / f"{name}.png")
        rows.append(f"{name},{group}")
    meta = tmp / "meta.csv"
    meta.write_text("\n".join(rows) + "\n")
    return str(tmp), str(meta)
