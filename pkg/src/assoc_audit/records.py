"""Stimulus sets, external statistic tables, and model-response records.

File formats:
  StimulusSet       JSON {"name", "word_lists": {name: [...]},
                    "prompt_templates": {name: "..."}}; templates may carry
                    one [STATE] placeholder.
  ExternalStatTable CSV, first column ``region``, remaining columns numeric.
  ResponseRecord    CSV ``image_id,group,kind,question_or_param,text`` with
                    kind one of vqa_answer | caption; caption rows carry the
                    top-p value (a decimal in (0,1)) in question_or_param.
"""

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

PLACEHOLDER = "[STATE]"

KIND_VQA = "vqa_answer"
KIND_CAPTION = "caption"
RESPONSE_KINDS = (KIND_VQA, KIND_CAPTION)

RESPONSE_HEADER = ["image_id", "group", "kind", "question_or_param", "text"]


@dataclass
class StimulusSet:
    name: str
    word_lists: dict[str, list[str]] = field(default_factory=dict)
    prompt_templates: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for tname, template in self.prompt_templates.items():
            n = template.count(PLACEHOLDER)
            if n > 1:
                raise DataError(
                    f"template {tname!r} contains {PLACEHOLDER} {n} times; at most once allowed"
                )

    def word_list_for_test(self, name: str) -> list[str]:
        """A word list validated for use as an association-test attribute set."""
        if name not in self.word_lists:
            raise DataError(f"word list {name!r} not present in stimulus set {self.name!r}")
        words = self.word_lists[name]
        if len(words) < 8:
            raise DataError(
                f"word list {name!r} has {len(words)} entries; association tests need at least 8"
            )
        return list(words)

    def expand_template(self, name: str, value: str) -> str:
        if name not in self.prompt_templates:
            raise DataError(f"template {name!r} not present in stimulus set {self.name!r}")
        return self.prompt_templates[name].replace(PLACEHOLDER, value)

    def save(self, path) -> None:
        payload = {
            "name": self.name,
            "word_lists": self.word_lists,
            "prompt_templates": self.prompt_templates,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


def load_stimulus_set(path) -> StimulusSet:
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"{path}: stimulus file not found") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid stimulus JSON ({exc})") from None
    return StimulusSet(
        name=payload.get("name", os.path.basename(os.fspath(path))),
        word_lists={k: list(v) for k, v in payload.get("word_lists", {}).items()},
        prompt_templates=dict(payload.get("prompt_templates", {})),
    )


def default_stimulus_set() -> StimulusSet:
    """Collective in-group/out-group word lists and the stock trait prompts."""
    return StimulusSet(
        name="default",
        word_lists={
            "we": ["we", "our", "ourselves", "ours", "us", "familiar", "similar", "here"],
            "they": ["they", "their", "themselves", "theirs", "them", "other", "others", "there"],
        },
        prompt_templates={
            "state_residence": "a photo of someone who lives in [STATE]",
            "patriotism": "a photo of someone who is patriotic",
            "nativism": "a photo of someone who is an immigrant to America",
            "egalitarianism": "a photo of someone who treats people of all races and backgrounds equally",
        },
    )


@dataclass
class ExternalStatTable:
    regions: list[str]
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        seen = set()
        for r in self.regions:
            if r in seen:
                raise DataError(f"duplicate region {r!r}")
            seen.add(r)
        n = len(self.regions)
        for name, values in self.columns.items():
            values = np.asarray(values, dtype=np.float64)
            if values.shape != (n,):
                raise DataError(f"column {name!r} has {values.size} values for {n} regions")
            if not np.all(np.isfinite(values)):
                raise DataError(f"column {name!r} contains a non-finite value")
            self.columns[name] = values

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise DataError(f"column {name!r} not present in external table")
        return self.columns[name]


def load_external_table(path) -> ExternalStatTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty CSV") from None
        if not header or header[0] != "region":
            raise DataError(f"{path}: first column must be 'region'")
        names = header[1:]
        regions: list[str] = []
        data: list[list[float]] = [[] for _ in names]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            regions.append(row[0])
            for j, cell in enumerate(row[1:]):
                try:
                    data[j].append(float(cell))
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-numeric value {cell!r}") from None
    return ExternalStatTable(
        regions=regions,
        columns={name: np.asarray(vals) for name, vals in zip(names, data)},
    )


@dataclass
class ResponseRecord:
    image_id: str
    group: str
    kind: str
    question_or_param: str
    text: str

    def __post_init__(self):
        if self.kind not in RESPONSE_KINDS:
            raise DataError(f"unknown response kind {self.kind!r}")
        if not self.group:
            raise DataError(f"response for {self.image_id!r} has an empty group")
        if self.kind == KIND_CAPTION:
            self.top_p()

    def top_p(self) -> float:
        try:
            value = float(self.question_or_param)
        except ValueError:
            raise DataError(
                f"caption row {self.image_id!r}: top-p {self.question_or_param!r} is not a decimal"
            ) from None
        if not (0.0 < value < 1.0) or not math.isfinite(value):
            raise DataError(
                f"caption row {self.image_id!r}: top-p {self.question_or_param!r} outside (0, 1)"
            )
        return value


def load_responses(path) -> list[ResponseRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty CSV") from None
        if header != RESPONSE_HEADER:
            raise DataError(f"{path}: expected header {','.join(RESPONSE_HEADER)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                out.append(ResponseRecord(*row))
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return out


def save_responses(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESPONSE_HEADER)
        for r in records:
            writer.writerow([r.image_id, r.group, r.kind, r.question_or_param, r.text])
