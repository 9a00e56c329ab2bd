"""Per-group tallies over model responses: yes-rates, answer distributions,
and caption mention rates against a term lexicon.

Matching is whole-word and case-insensitive; multiword lexicon terms match
after whitespace normalization, so "whiteboard" never counts for "white".
"""

import json
import re
import warnings
from collections import Counter
from dataclasses import dataclass

from .errors import DataError
from .records import KIND_CAPTION, KIND_VQA

DEFAULT_MENTION_TERMS = [
    "asian",
    "african american",
    "black",
    "latino",
    "latina",
    "hispanic",
    "oriental",
    "white",
    "caucasian",
]


@dataclass
class Lexicon:
    name: str
    terms: list[str]

    def __post_init__(self):
        cleaned = []
        seen = set()
        for term in self.terms:
            norm = " ".join(term.lower().split())
            if norm and norm not in seen:
                cleaned.append(norm)
                seen.add(norm)
        if not cleaned:
            raise DataError(f"lexicon {self.name!r} has no usable terms")
        self.terms = cleaned
        self._patterns = [
            re.compile(r"\b" + re.escape(t) + r"\b") for t in self.terms
        ]

    def matches(self, text: str) -> bool:
        norm = " ".join(text.lower().split())
        return any(p.search(norm) for p in self._patterns)


def default_lexicon() -> Lexicon:
    return Lexicon(name="race_ethnicity_mentions", terms=list(DEFAULT_MENTION_TERMS))


def load_lexicon(path) -> Lexicon:
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"{path}: lexicon file not found") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid lexicon JSON ({exc})") from None
    if "terms" not in payload:
        raise DataError(f"{path}: lexicon JSON must contain 'terms'")
    return Lexicon(name=payload.get("name", "lexicon"), terms=list(payload["terms"]))


@dataclass
class TallyResult:
    group: str
    denominator: int
    numerator: int

    def __post_init__(self):
        if not 0 <= self.numerator <= self.denominator:
            raise DataError(
                f"tally for {self.group!r}: numerator {self.numerator} "
                f"outside [0, {self.denominator}]"
            )

    @property
    def rate_percent(self) -> float:
        return 100.0 * self.numerator / self.denominator


def _vqa_records(records, question: str):
    hits = [r for r in records
            if r.kind == KIND_VQA and r.question_or_param == question]
    if not hits:
        raise DataError(f"no vqa_answer records match question {question!r}")
    return hits


def _check_requested_groups(by_group: dict, groups) -> dict:
    if groups is None:
        return by_group
    missing = [g for g in groups if g not in by_group]
    if missing:
        raise DataError(f"no matching records for group {missing[0]!r}")
    return {g: by_group[g] for g in groups}


def yes_rate(records, question: str, groups=None) -> dict[str, TallyResult]:
    """Percent of matching answers equal to the literal token "yes", per group.

    Answers other than yes/no count toward the denominator only; their
    presence triggers a warning naming them.
    """
    by_group: dict[str, list] = {}
    for r in _vqa_records(records, question):
        by_group.setdefault(r.group, []).append(r)
    by_group = _check_requested_groups(by_group, groups)
    unexpected = sorted({
        r.text.strip().lower()
        for members in by_group.values()
        for r in members
        if r.text.strip().lower() not in ("yes", "no")
    })
    if unexpected:
        warnings.warn(f"unexpected answers counted as non-yes: {unexpected}")
    return {
        g: TallyResult(
            group=g,
            denominator=len(members),
            numerator=sum(1 for r in members if r.text.strip().lower() == "yes"),
        )
        for g, members in by_group.items()
    }


def answer_distribution(records, question: str, groups=None) -> dict[str, dict[str, float]]:
    """Per-group percentage of each normalized (trimmed, lowercased) answer."""
    by_group: dict[str, Counter] = {}
    for r in _vqa_records(records, question):
        by_group.setdefault(r.group, Counter())[r.text.strip().lower()] += 1
    by_group = _check_requested_groups(by_group, groups)
    out = {}
    for g, counter in by_group.items():
        total = sum(counter.values())
        out[g] = {answer: 100.0 * n / total for answer, n in sorted(counter.items())}
    return out


def mention_rate(records, lexicon: Lexicon, groups=None) -> dict[tuple[str, str], TallyResult]:
    """Caption lexicon-mention rates keyed by (group, top-p string)."""
    captions = [r for r in records if r.kind == KIND_CAPTION]
    if not captions:
        raise DataError("no caption records present")
    cells: dict[tuple[str, str], list] = {}
    for r in captions:
        r.top_p()  # raises on malformed values
        cells.setdefault((r.group, r.question_or_param), []).append(r)
    if groups is not None:
        present = {g for g, _ in cells}
        missing = [g for g in groups if g not in present]
        if missing:
            raise DataError(f"no matching records for group {missing[0]!r}")
        cells = {key: v for key, v in cells.items() if key[0] in set(groups)}
    return {
        key: TallyResult(
            group=key[0],
            denominator=len(members),
            numerator=sum(1 for r in members if lexicon.matches(r.text)),
        )
        for key, members in cells.items()
    }
