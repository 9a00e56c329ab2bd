#!/usr/bin/env python3
"""Walkthrough: a full audit run driven by one JSON config.

Prepares bundle files on disk, writes a declarative config, and invokes
the command-line runner in-process for the association tests and the
ranking survey. Every report carries a provenance header with the config
hash and seed, so a rerun is byte-identical.
"""

import json
import os
import tempfile

import numpy as np

import assoc_audit as aa
from assoc_audit.cli import run
from assoc_audit.records import default_stimulus_set

rng = np.random.default_rng(3)
workdir = tempfile.mkdtemp(prefix="audit_demo_")
dim = 24
e1, e2 = np.eye(dim)[0], np.eye(dim)[1]

images = aa.EmbeddingBundle(
    dim=dim,
    ids=[f"a{i}" for i in range(40)] + [f"b{i}" for i in range(55)],
    groups=["group_a"] * 40 + ["group_b"] * 55,
    matrix=np.vstack([
        0.8 * e1 + rng.normal(scale=0.4, size=(40, dim)),
        0.8 * e2 + rng.normal(scale=0.4, size=(55, dim)),
    ]).astype(np.float32),
)

stimuli = default_stimulus_set()
words = stimuli.word_lists["we"] + stimuli.word_lists["they"]
word_vecs = np.vstack([
    2 * e1 + rng.normal(scale=0.3, size=(8, dim)),
    2 * e2 + rng.normal(scale=0.3, size=(8, dim)),
])
prompt_ids = [f"region{i}" for i in range(6)]
prompt_vecs = np.array([w * e1 + (1 - w) * e2 for w in np.linspace(0.2, 0.8, 6)])
texts = aa.EmbeddingBundle(
    dim=dim,
    ids=words + prompt_ids,
    groups=["text"] * (len(words) + 6),
    matrix=np.vstack([word_vecs, prompt_vecs]).astype(np.float32),
)

aa.save_bundle(images, os.path.join(workdir, "images"))
aa.save_bundle(texts, os.path.join(workdir, "texts"))
stimuli.save(os.path.join(workdir, "stimuli.json"))

config = {
    "seed": 17,
    "out": os.path.join(workdir, "reports"),
    "images_bundle": os.path.join(workdir, "images"),
    "texts_bundle": os.path.join(workdir, "texts"),
    "stimuli": os.path.join(workdir, "stimuli.json"),
    "eat_tests": [
        {"name": "ingroup_words", "x_group": "group_a", "y_group": "group_b",
         "a_list": "we", "b_list": "they"},
    ],
    "ranking": {
        "k": 30, "per_group": 30, "repetitions": 200,
        "prompts_bundle": os.path.join(workdir, "texts"),
    },
    "permutations": 2000,
}
config_path = os.path.join(workdir, "audit.json")
with open(config_path, "w") as fh:
    json.dump(config, fh, indent=2)

print("running: assoc-audit eat --config", config_path)
assert run(["eat", "--config", config_path]) == 0
print("running: assoc-audit rank --config", config_path)
assert run(["rank", "--config", config_path]) == 0

print("\nreports written to", config["out"])
for name in sorted(os.listdir(config["out"])):
    print("  ", name)

print("\neat_results.csv:")
with open(os.path.join(config["out"], "eat_results.csv")) as fh:
    print(fh.read())
