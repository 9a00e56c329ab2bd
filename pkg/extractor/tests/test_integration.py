"""End-to-end integration against the audit toolkit: everything the
extractor emits must load through the toolkit's own readers with zero
schema errors, and inference must be deterministic across runs.
"""

import json

import numpy as np
import pytest

import assoc_audit as aa
from extractor import (
    ExtractionJob,
    embed_images,
    embed_texts,
    expand_prompts,
    load_metadata,
    resolve_model,
    run_captioning,
    run_vqa,
)
from extractor.jobs import JobError


@pytest.fixture()
def clip_job(clip_checkpoint, image_fixture):
    image_dir, meta_path = image_fixture
    return ExtractionJob(
        model=resolve_model(clip_checkpoint),
        image_dir=image_dir,
        metadata=load_metadata(meta_path),
    )


def test_embed_images_bundle_passes_primary_validation(clip_job, tmp_path):
    out = tmp_path / "images_bundle"
    assert embed_images(clip_job, str(out)) == 6
    bundle = aa.load_bundle(out)  # enforces every bundle invariant
    assert len(bundle) == 6
    assert bundle.dim == 16  # the checkpoint's joint projection width
    assert bundle.groups == ["alpha"] * 3 + ["beta"] * 3
    vectors = bundle.vectors_f64()
    for i in range(len(bundle)):
        assert aa.cosine(vectors[i], vectors[i]) == 1.0
        for j in range(i):
            assert -1.0 <= aa.cosine(vectors[i], vectors[j]) <= 1.0
    assert (out / "provenance.json").exists()


def test_embed_images_deterministic_across_runs(clip_job, tmp_path):
    embed_images(clip_job, str(tmp_path / "run1"))
    embed_images(clip_job, str(tmp_path / "run2"))
    b1 = (tmp_path / "run1" / "embeddings.bin").read_bytes()
    b2 = (tmp_path / "run2" / "embeddings.bin").read_bytes()
    assert b1 == b2


def test_embed_images_same_image_same_vector(clip_checkpoint, image_fixture, tmp_path):
    import shutil
    image_dir, _ = image_fixture
    dup_dir = tmp_path / "dup"
    dup_dir.mkdir()
    shutil.copy(f"{image_dir}/face00.png", dup_dir / "copy_a.png")
    shutil.copy(f"{image_dir}/face00.png", dup_dir / "copy_b.png")
    job = ExtractionJob(model=resolve_model(clip_checkpoint), image_dir=str(dup_dir),
                        metadata={"copy_a": "g", "copy_b": "g"})
    embed_images(job, str(tmp_path / "out"))
    bundle = aa.load_bundle(tmp_path / "out")
    assert np.array_equal(bundle.matrix[0], bundle.matrix[1])


def test_embed_images_undecodable_abort_or_skip(clip_checkpoint, image_fixture, tmp_path):
    import shutil
    image_dir, _ = image_fixture
    broken_dir = tmp_path / "broken"
    broken_dir.mkdir()
    shutil.copy(f"{image_dir}/face00.png", broken_dir / "good.png")
    (broken_dir / "bad.png").write_bytes(b"not an image at all")
    meta = {"good": "g", "bad": "g"}
    spec = resolve_model(clip_checkpoint)
    job = ExtractionJob(model=spec, image_dir=str(broken_dir), metadata=meta)
    with pytest.raises(JobError, match="bad.png"):
        embed_images(job, str(tmp_path / "o1"))
    lenient = ExtractionJob(model=spec, image_dir=str(broken_dir), metadata=meta,
                            skip_undecodable=True)
    assert embed_images(lenient, str(tmp_path / "o2")) == 1
    assert aa.load_bundle(tmp_path / "o2").ids == ["good"]


def test_embed_texts_state_expansion(clip_checkpoint, tmp_path):
    prompts = tmp_path / "prompts.json"
    prompts.write_text(json.dumps({
        "prompt_templates": {
            "state_residence": "a photo of someone who lives in [STATE]",
            "patriotism": "a photo of someone who is patriotic",
        },
    }))
    out = tmp_path / "texts_bundle"
    count = embed_texts(resolve_model(clip_checkpoint), str(prompts), str(out))
    assert count == 52  # 50 states + DC + the fixed trait prompt
    bundle = aa.load_bundle(out)
    assert "Ohio" in bundle.ids
    assert "District of Columbia" in bundle.ids
    assert "patriotism" in bundle.ids
    assert all(g == "text" for g in bundle.groups)
    # region ids align with an external stats table through the toolkit
    state_ids = [rid for rid in bundle.ids if rid != "patriotism"]
    assert len(state_ids) == 51


def test_embed_texts_deterministic(clip_checkpoint, tmp_path):
    prompts = tmp_path / "prompts.json"
    prompts.write_text(json.dumps({"word_lists": {"we": ["we", "our", "us"]}}))
    spec = resolve_model(clip_checkpoint)
    embed_texts(spec, str(prompts), str(tmp_path / "t1"))
    embed_texts(spec, str(prompts), str(tmp_path / "t2"))
    assert (tmp_path / "t1" / "embeddings.bin").read_bytes() == \
           (tmp_path / "t2" / "embeddings.bin").read_bytes()


def test_expand_prompts_validation():
    pairs = expand_prompts({"texts": {"p1": "hello"},
                            "word_lists": {"w": ["we", "our"]}})
    assert ("we", "we") in pairs and ("p1", "hello") in pairs
    with pytest.raises(JobError, match="duplicate prompt id"):
        expand_prompts({"texts": {"we": "x"}, "word_lists": {"w": ["we"]}})
    with pytest.raises(JobError, match="no texts"):
        expand_prompts({})


def test_vqa_rows_parse_through_tally(blip_vqa_checkpoint, image_fixture, tmp_path):
    image_dir, meta_path = image_fixture
    job = ExtractionJob(model=resolve_model(blip_vqa_checkpoint),
                        image_dir=image_dir, metadata=load_metadata(meta_path))
    out = tmp_path / "vqa.csv"
    question = "is the person american"
    assert run_vqa(job, question, str(out)) == 6
    records = aa.load_responses(out)  # zero schema errors
    assert len(records) == 6
    assert all(r.kind == "vqa_answer" and r.text for r in records)
    dist = aa.answer_distribution(records, question)
    assert set(dist) == {"alpha", "beta"}
    for group_dist in dist.values():
        assert sum(group_dist.values()) == pytest.approx(100.0, abs=1e-9)


def test_vqa_deterministic_across_runs(blip_vqa_checkpoint, image_fixture, tmp_path):
    image_dir, meta_path = image_fixture
    job = ExtractionJob(model=resolve_model(blip_vqa_checkpoint),
                        image_dir=image_dir, metadata=load_metadata(meta_path))
    run_vqa(job, "is the person american", str(tmp_path / "v1.csv"))
    run_vqa(job, "is the person american", str(tmp_path / "v2.csv"))
    assert (tmp_path / "v1.csv").read_bytes() == (tmp_path / "v2.csv").read_bytes()


def test_captioning_rows_parse_through_tally(blip_caption_checkpoint, image_fixture, tmp_path):
    image_dir, meta_path = image_fixture
    job = ExtractionJob(model=resolve_model(blip_caption_checkpoint),
                        image_dir=image_dir, metadata=load_metadata(meta_path))
    out = tmp_path / "captions.csv"
    top_p = (0.5, 0.6, 0.7, 0.8, 0.9)
    assert run_captioning(job, str(out), top_p_values=top_p, seed=3) == 30
    records = aa.load_responses(out)  # validates top-p decimals in (0,1)
    assert len(records) == 30
    assert {r.question_or_param for r in records} == {"0.5", "0.6", "0.7", "0.8", "0.9"}
    rates = aa.mention_rate(records, aa.default_lexicon())
    assert all(0.0 <= t.rate_percent <= 100.0 for t in rates.values())


def test_captioning_reseeded_reruns_identical(blip_caption_checkpoint, image_fixture, tmp_path):
    image_dir, meta_path = image_fixture
    job = ExtractionJob(model=resolve_model(blip_caption_checkpoint),
                        image_dir=image_dir, metadata=load_metadata(meta_path))
    run_captioning(job, str(tmp_path / "c1.csv"), top_p_values=(0.5, 0.9), seed=3)
    run_captioning(job, str(tmp_path / "c2.csv"), top_p_values=(0.5, 0.9), seed=3)
    assert (tmp_path / "c1.csv").read_bytes() == (tmp_path / "c2.csv").read_bytes()


def test_captioning_rejects_bad_top_p(blip_caption_checkpoint, image_fixture, tmp_path):
    image_dir, meta_path = image_fixture
    job = ExtractionJob(model=resolve_model(blip_caption_checkpoint),
                        image_dir=image_dir, metadata=load_metadata(meta_path))
    with pytest.raises(JobError, match="top-p"):
        run_captioning(job, str(tmp_path / "c.csv"), top_p_values=(1.5,), seed=0)


def test_generation_family_mismatch(clip_checkpoint, image_fixture, tmp_path):
    image_dir, meta_path = image_fixture
    job = ExtractionJob(model=resolve_model(clip_checkpoint),
                        image_dir=image_dir, metadata=load_metadata(meta_path))
    with pytest.raises(JobError, match="family"):
        run_vqa(job, "q", str(tmp_path / "x.csv"))
