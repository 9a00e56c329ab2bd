import json
import os
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

import assoc_audit as aa
from assoc_audit.cli import run
from assoc_audit.records import default_stimulus_set, save_responses
from assoc_audit.seeds import subseed

import oracles
from test_tally import AMERICAN_Q, yes_records


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload, indent=2))
    return str(path)


def make_image_text_fixture(tmp_path, rng):
    """Separable fixture: white/we aligned on axis 0, asian/they on axis 1."""
    dim = 4
    e1 = np.eye(dim)[0]
    e2 = np.eye(dim)[1]

    def noisy(center, n):
        return center + 0.1 * rng.normal(size=(n, dim))

    white = noisy(e1, 6)
    asian = noisy(e2, 6)
    images = aa.EmbeddingBundle(
        dim=dim,
        ids=[f"white{i}" for i in range(6)] + [f"asian{i}" for i in range(6)],
        groups=["white"] * 6 + ["asian"] * 6,
        matrix=np.vstack([white, asian]).astype(np.float32),
    )
    stimuli = default_stimulus_set()
    words = stimuli.word_lists["we"] + stimuli.word_lists["they"]
    word_vecs = np.vstack([noisy(3 * e1, 8), noisy(3 * e2, 8)])
    prompt_ids = ["patriotism"]
    prompt_vecs = noisy(2 * e1, 1)
    texts = aa.EmbeddingBundle(
        dim=dim,
        ids=words + prompt_ids,
        groups=["text"] * (len(words) + 1),
        matrix=np.vstack([word_vecs, prompt_vecs]).astype(np.float32),
    )
    aa.save_bundle(images, tmp_path / "images")
    aa.save_bundle(texts, tmp_path / "texts")
    stim_path = tmp_path / "stimuli.json"
    stimuli.save(stim_path)
    return images, texts, stimuli, str(tmp_path / "images"), str(tmp_path / "texts"), str(stim_path)


def read_rows(path):
    lines = Path(path).read_text().splitlines()
    assert lines[0].startswith("# config_sha256=")
    header = lines[1].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[2:]]


def test_cmd_eat_separable_fixture(tmp_path):
    rng = np.random.default_rng(70)
    images, texts, stimuli, images_p, texts_p, stim_p = make_image_text_fixture(tmp_path, rng)
    cfg = write_config(tmp_path, {
        "seed": 11,
        "out": str(tmp_path / "out"),
        "images_bundle": images_p,
        "texts_bundle": texts_p,
        "stimuli": stim_p,
        "eat_tests": [{"name": "ingroup", "x_group": "white", "y_group": "asian",
                       "a_list": "we", "b_list": "they"}],
    })
    assert run(["eat", "--config", cfg]) == 0
    rows = read_rows(tmp_path / "out" / "eat_results.csv")
    assert len(rows) == 1
    row = rows[0]
    x = images.group_vectors("white")
    y = images.group_vectors("asian")
    a = np.stack([texts.vector_by_id(w) for w in stimuli.word_lists["we"]])
    b = np.stack([texts.vector_by_id(w) for w in stimuli.word_lists["they"]])
    ref_d = oracles.eat_d_ref(x, y, a, b, "union_std")
    assert float(row["d"]) == pytest.approx(ref_d, abs=1e-10)
    assert float(row["p_value"]) < 0.01
    assert row["mode"] == "union_std"
    assert row["effect_size_label"] == "large"


def test_cmd_eat_same_group_is_negligible(tmp_path):
    rng = np.random.default_rng(71)
    _, _, _, images_p, texts_p, stim_p = make_image_text_fixture(tmp_path, rng)
    cfg = write_config(tmp_path, {
        "seed": 1, "out": str(tmp_path / "out"),
        "images_bundle": images_p, "texts_bundle": texts_p, "stimuli": stim_p,
        "eat_tests": [{"name": "selfcmp", "x_group": "white", "y_group": "white",
                       "a_list": "we", "b_list": "they"}],
    })
    assert run(["eat", "--config", cfg]) == 0
    row = read_rows(tmp_path / "out" / "eat_results.csv")[0]
    assert float(row["d"]) == 0.0
    assert row["effect_size_label"] == "negligible"


def test_cmd_eat_missing_group_exits_2(tmp_path, capsys):
    rng = np.random.default_rng(72)
    _, _, _, images_p, texts_p, stim_p = make_image_text_fixture(tmp_path, rng)
    cfg = write_config(tmp_path, {
        "seed": 1, "out": str(tmp_path / "out"),
        "images_bundle": images_p, "texts_bundle": texts_p, "stimuli": stim_p,
        "eat_tests": [{"x_group": "white", "y_group": "latino",
                       "a_list": "we", "b_list": "they"}],
    })
    assert run(["eat", "--config", cfg]) == 2
    assert "latino" in capsys.readouterr().err


def test_cmd_eat_permutation_column(tmp_path):
    rng = np.random.default_rng(73)
    _, _, _, images_p, texts_p, stim_p = make_image_text_fixture(tmp_path, rng)
    cfg = write_config(tmp_path, {
        "seed": 5, "out": str(tmp_path / "out"),
        "images_bundle": images_p, "texts_bundle": texts_p, "stimuli": stim_p,
        "eat_tests": [{"name": "t", "x_group": "white", "y_group": "asian",
                       "a_list": "we", "b_list": "they"}],
    })
    assert run(["eat", "--config", cfg, "--permutations", "200"]) == 0
    row = read_rows(tmp_path / "out" / "eat_results.csv")[0]
    assert "permutation_p" in row
    assert 1 / 201 <= float(row["permutation_p"]) <= 1.0


def test_cmd_eat_reruns_are_byte_identical(tmp_path):
    rng = np.random.default_rng(74)
    _, _, _, images_p, texts_p, stim_p = make_image_text_fixture(tmp_path, rng)
    cfg = write_config(tmp_path, {
        "seed": 3, "out": str(tmp_path / "out"),
        "images_bundle": images_p, "texts_bundle": texts_p, "stimuli": stim_p,
        "eat_tests": [{"name": "t", "x_group": "white", "y_group": "asian",
                       "a_list": "we", "b_list": "they", "mode": "downsample"}],
    })
    assert run(["eat", "--config", cfg]) == 0
    first = (tmp_path / "out" / "eat_results.csv").read_bytes()
    assert run(["eat", "--config", cfg]) == 0
    assert (tmp_path / "out" / "eat_results.csv").read_bytes() == first
    # no temp droppings from atomic writes
    assert not list((tmp_path / "out").glob("*.tmp"))


def test_cmd_sc_eat(tmp_path):
    rng = np.random.default_rng(75)
    images, texts, _, images_p, texts_p, stim_p = make_image_text_fixture(tmp_path, rng)
    cfg = write_config(tmp_path, {
        "seed": 2, "out": str(tmp_path / "out"),
        "images_bundle": images_p, "texts_bundle": texts_p, "stimuli": stim_p,
        "sc_eat_tests": [
            {"name": "trait", "prompt_id": "patriotism",
             "a_group": "white", "b_group": "asian"},
            {"name": "self", "prompt_id": "patriotism",
             "a_group": "white", "b_group": "white"},
        ],
    })
    assert run(["sc-eat", "--config", cfg]) == 0
    rows = read_rows(tmp_path / "out" / "sc_eat_results.csv")
    w = texts.vector_by_id("patriotism")
    ref = oracles.sc_eat_d_ref(w, images.group_vectors("white"),
                               images.group_vectors("asian"), "union_std")
    assert float(rows[0]["d"]) == pytest.approx(ref, abs=1e-10)
    assert float(rows[0]["p_value"]) < 0.01
    assert float(rows[1]["d"]) == 0.0


def test_cmd_sc_eat_missing_prompt_exits_2(tmp_path, capsys):
    rng = np.random.default_rng(76)
    _, _, _, images_p, texts_p, stim_p = make_image_text_fixture(tmp_path, rng)
    cfg = write_config(tmp_path, {
        "seed": 2, "out": str(tmp_path / "out"),
        "images_bundle": images_p, "texts_bundle": texts_p, "stimuli": stim_p,
        "sc_eat_tests": [{"prompt_id": "nativism", "a_group": "white", "b_group": "asian"}],
    })
    assert run(["sc-eat", "--config", cfg]) == 2
    assert "nativism" in capsys.readouterr().err


def make_rank_fixture(tmp_path, rng, external_from_table=True, constant_external=False):
    dim = 2
    n_per = 6
    angles_g1 = np.linspace(0.05, 0.45, n_per)
    angles_g2 = np.linspace(0.8, 1.4, n_per)
    vecs = [[np.cos(t), np.sin(t)] for t in np.concatenate([angles_g1, angles_g2])]
    images = aa.EmbeddingBundle(
        dim=dim,
        ids=[f"i{k}" for k in range(2 * n_per)],
        groups=["g1"] * n_per + ["g2"] * n_per,
        matrix=np.asarray(vecs, dtype=np.float32),
    )
    prompt_angles = np.linspace(0.0, 1.3, 5)
    prompts = aa.EmbeddingBundle(
        dim=dim,
        ids=[f"state{k}" for k in range(5)],
        groups=["text"] * 5,
        matrix=np.asarray([[np.cos(t), np.sin(t)] for t in prompt_angles], np.float32),
    )
    aa.save_bundle(images, tmp_path / "rank_images")
    aa.save_bundle(prompts, tmp_path / "rank_prompts")

    cfg = {
        "seed": 4,
        "out": str(tmp_path / "rank_out"),
        "images_bundle": str(tmp_path / "rank_images"),
        "ranking": {"k": 4, "per_group": 4, "repetitions": 10,
                    "prompts_bundle": str(tmp_path / "rank_prompts"),
                    "group_columns": {"g1": "g1_pct", "g2": "g2_pct"}},
    }
    if external_from_table or constant_external:
        table = aa.ranking_survey(
            [(rid, prompts.vector_by_id(rid)) for rid in prompts.ids],
            images, aa.RankingConfig(k=4, per_group=4, repetitions=10, seed=4))
        pct = table.mean_percents
        lines = ["region,g1_pct,g2_pct"]
        for i, region in enumerate(table.prompts):
            g1 = 50.0 if constant_external else pct[i, 0]
            lines.append(f"{region},{float(g1)!r},{float(pct[i, 1])!r}")
        ext = tmp_path / "external.csv"
        ext.write_text("\n".join(lines) + "\n")
        cfg["ranking"]["external"] = str(ext)
    return cfg


def test_cmd_rank_perfect_external(tmp_path):
    rng = np.random.default_rng(77)
    cfg = write_config(tmp_path, make_rank_fixture(tmp_path, rng))
    assert run(["rank", "--config", cfg]) == 0
    out = tmp_path / "rank_out"
    long_lines = (out / "ranking_long.csv").read_text().splitlines()
    assert long_lines[1] == "prompt,group,mean_count,mean_percent"
    report = json.loads((out / "correlations.json").read_text())
    assert report["r_squared"] == pytest.approx(1.0, abs=1e-12)
    for row in report["groups"]:
        assert row["rho"] == pytest.approx(1.0, abs=1e-12)
        assert row["n"] == 5
    assert report["seed"] == 4
    # deterministic rerun
    first = (out / "ranking_long.csv").read_bytes()
    assert run(["rank", "--config", cfg]) == 0
    assert (out / "ranking_long.csv").read_bytes() == first


def test_cmd_rank_constant_external_exits_3(tmp_path, capsys):
    rng = np.random.default_rng(78)
    cfg = write_config(tmp_path, make_rank_fixture(tmp_path, rng, constant_external=True))
    assert run(["rank", "--config", cfg]) == 3
    assert "zero variance" in capsys.readouterr().err


def test_cmd_rank_dominance_single_group(tmp_path):
    images = aa.EmbeddingBundle(
        dim=2, ids=[f"i{k}" for k in range(6)],
        groups=["g1"] * 3 + ["g2"] * 3,
        matrix=np.asarray(
            [[0.99, 0.1], [0.98, 0.2], [0.97, 0.2], [0.1, 0.99], [0.2, 0.98], [0.1, 0.97]],
            np.float32),
    )
    prompts = aa.EmbeddingBundle(dim=2, ids=["only"], groups=["text"],
                                 matrix=np.asarray([[1.0, 0.0]], np.float32))
    aa.save_bundle(images, tmp_path / "di")
    aa.save_bundle(prompts, tmp_path / "dp")
    cfg = write_config(tmp_path, {
        "seed": 0, "out": str(tmp_path / "out"),
        "images_bundle": str(tmp_path / "di"),
        "ranking": {"k": 3, "per_group": 3, "repetitions": 7,
                    "prompts_bundle": str(tmp_path / "dp")},
    })
    assert run(["rank", "--config", cfg]) == 0
    rows = read_rows(tmp_path / "out" / "ranking_long.csv")
    by_group = {r["group"]: r for r in rows}
    assert float(by_group["g1"]["mean_count"]) == 3.0
    assert float(by_group["g2"]["mean_count"]) == 0.0


def test_cmd_tally(tmp_path):
    responses = tmp_path / "responses.csv"
    save_responses(yes_records(), responses)
    cfg = write_config(tmp_path, {
        "out": str(tmp_path / "out"),
        "responses": str(responses),
        "tally": {"yes_questions": [AMERICAN_Q]},
    })
    assert run(["tally", "--config", cfg]) == 0
    rows = read_rows(tmp_path / "out" / "yes_rates.csv")
    rates = {r["group"]: float(r["rate_percent"]) for r in rows}
    assert round(rates["white"], 1) == 96.7
    assert round(rates["asian"], 1) == 2.8
    assert round(rates["black"], 1) == 68.5
    assert round(rates["latino"], 1) == 61.1


def test_cmd_tally_unmatched_question_exits_2(tmp_path, capsys):
    responses = tmp_path / "responses.csv"
    save_responses(yes_records(), responses)
    cfg = write_config(tmp_path, {
        "out": str(tmp_path / "out"),
        "responses": str(responses),
        "tally": {"yes_questions": ["Never asked?"]},
    })
    assert run(["tally", "--config", cfg]) == 2
    assert "Never asked?" in capsys.readouterr().err


def test_cmd_tally_fifty_fifty(tmp_path):
    recs = [aa.ResponseRecord(f"i{k}", "g", "vqa_answer", "Q?",
                              "yes" if k % 2 else "no") for k in range(10)]
    responses = tmp_path / "r.csv"
    save_responses(recs, responses)
    cfg = write_config(tmp_path, {
        "out": str(tmp_path / "out"), "responses": str(responses),
        "tally": {"yes_questions": ["Q?"]},
    })
    assert run(["tally", "--config", cfg]) == 0
    row = read_rows(tmp_path / "out" / "yes_rates.csv")[0]
    assert float(row["rate_percent"]) == 50.0


def write_frames(tmp_path, spec):
    """spec: {image_id: (group, [(iteration, gray level)])}."""
    rows = ["image_path,image_id,group,iteration,x,y,w,h"]
    for image_id, (group, frames) in spec.items():
        for it, level in frames:
            name = f"{image_id}_{it}.png"
            Image.new("RGB", (64, 64), (level, level, level)).save(tmp_path / name)
            rows.append(f"{name},{image_id},{group},{it},4,4,50,50")
    manifest = tmp_path / "crops.csv"
    manifest.write_text("\n".join(rows) + "\n")
    return str(manifest)


def test_cmd_brightness_uniform_white(tmp_path):
    manifest = write_frames(tmp_path, {
        "s1": ("white", [(0, 255), (10, 255), (20, 255)]),
        "s2": ("white", [(0, 255), (10, 255), (20, 255)]),
    })
    cfg = write_config(tmp_path, {
        "out": str(tmp_path / "out"),
        "brightness": {"crop_manifest": manifest, "svg": True},
    })
    assert run(["brightness", "--config", cfg]) == 0
    agg = read_rows(tmp_path / "out" / "brightness_aggregate.csv")
    assert all(float(r["mean_brightness"]) == 255.0 for r in agg)
    change = read_rows(tmp_path / "out" / "brightness_change.csv")[0]
    assert float(change["percent_change"]) == 0.0
    assert (tmp_path / "out" / "brightness_aggregate.svg").exists()


def test_cmd_brightness_mismatched_grids_exits_2(tmp_path, capsys):
    manifest = write_frames(tmp_path, {
        "s1": ("g", [(0, 100), (10, 110)]),
        "s2": ("g", [(0, 100), (20, 120)]),
    })
    cfg = write_config(tmp_path, {
        "out": str(tmp_path / "out"),
        "brightness": {"crop_manifest": manifest},
    })
    assert run(["brightness", "--config", cfg]) == 2
    assert "grids differ" in capsys.readouterr().err


def test_cmd_render(tmp_path):
    agg = tmp_path / "agg.csv"
    agg.write_text(
        "group,iteration,mean_brightness\n"
        "g1,0,100.0\ng1,10,150.0\ng2,0,50.0\ng2,10,60.0\n")
    cfg = write_config(tmp_path, {"out": str(tmp_path / "out")})
    assert run(["render", "--config", cfg, "--input", str(agg)]) == 0
    svg = (tmp_path / "out" / "series.svg").read_text()
    assert svg.count("<polyline") == 2
    assert "config_sha256=" in svg


def test_cmd_render_empty_exits_2(tmp_path, capsys):
    agg = tmp_path / "agg.csv"
    agg.write_text("group,iteration,mean_brightness\n")
    cfg = write_config(tmp_path, {"out": str(tmp_path / "out")})
    assert run(["render", "--config", cfg, "--input", str(agg)]) == 2
    assert "no data rows" in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path, capsys):
    assert run(["eat", "--config", str(tmp_path / "nope.json")]) == 2
    assert "not found" in capsys.readouterr().err


def test_flag_overrides_config_seed(tmp_path):
    rng = np.random.default_rng(79)
    _, _, _, images_p, texts_p, stim_p = make_image_text_fixture(tmp_path, rng)
    base = {
        "seed": 3, "out": str(tmp_path / "o1"),
        "images_bundle": images_p, "texts_bundle": texts_p, "stimuli": stim_p,
        "eat_tests": [{"name": "t", "x_group": "white", "y_group": "asian",
                       "a_list": "we", "b_list": "they"}],
    }
    cfg = write_config(tmp_path, base)
    assert run(["eat", "--config", cfg, "--permutations", "200"]) == 0
    assert run(["eat", "--config", cfg, "--permutations", "200",
                "--seed", "99", "--out", str(tmp_path / "o2")]) == 0
    rows2 = read_rows(tmp_path / "o2" / "eat_results.csv")
    # the effect size is seed-free; the provenance header reflects the override
    assert rows2[0]["d"] == read_rows(tmp_path / "o1" / "eat_results.csv")[0]["d"]
    head = (tmp_path / "o2" / "eat_results.csv").read_text().splitlines()[0]
    assert head.endswith("seed=99")


def test_mode_precedence_flag_over_test_over_config(tmp_path):
    rng = np.random.default_rng(81)
    _, _, _, images_p, texts_p, stim_p = make_image_text_fixture(tmp_path, rng)
    base = {
        "seed": 3, "mode": "pooled",
        "images_bundle": images_p, "texts_bundle": texts_p, "stimuli": stim_p,
        "eat_tests": [{"name": "t", "x_group": "white", "y_group": "asian",
                       "a_list": "we", "b_list": "they"}],
    }

    def mode_of(out, extra=()):
        payload = dict(base, out=str(tmp_path / out))
        cfg = write_config(tmp_path, payload, name=f"{out}.json")
        assert run(["eat", "--config", cfg, *extra]) == 0
        return read_rows(tmp_path / out / "eat_results.csv")[0]["mode"]

    assert mode_of("m1") == "pooled_std"  # config-wide mode applies
    base["eat_tests"][0]["mode"] = "union"
    assert mode_of("m2") == "union_std"  # per-test beats config
    assert mode_of("m3", ["--mode", "downsample"]) == "downsample_equalize"  # flag beats all


def test_env_thread_cap_does_not_change_rank_output(tmp_path, monkeypatch):
    rng = np.random.default_rng(80)
    cfg_payload = make_rank_fixture(tmp_path, rng, external_from_table=False)
    cfg = write_config(tmp_path, cfg_payload)
    monkeypatch.setenv("ASSOC_AUDIT_THREADS", "1")
    assert run(["rank", "--config", cfg]) == 0
    first = (tmp_path / "rank_out" / "ranking_wide.csv").read_bytes()
    monkeypatch.setenv("ASSOC_AUDIT_THREADS", "4")
    assert run(["rank", "--config", cfg]) == 0
    assert (tmp_path / "rank_out" / "ranking_wide.csv").read_bytes() == first
