#!/usr/bin/env python3
"""Walkthrough: tallying model answers and captions by group.

Simulates a question-answering run and a captioning run over two groups,
then computes yes-rates, full answer distributions, and lexicon-based
mention rates per nucleus-sampling level.
"""

import numpy as np

import assoc_audit as aa
from assoc_audit.records import ResponseRecord

rng = np.random.default_rng(5)
QUESTION = "Is this person a member of the club?"

records = []
# group "alpha" gets a 90% yes rate, group "beta" 35%.
for group, n, yes_rate in [("alpha", 60, 0.9), ("beta", 80, 0.35)]:
    for i in range(n):
        answer = "yes" if rng.random() < yes_rate else "no"
        records.append(ResponseRecord(f"{group}{i}", group, "vqa_answer",
                                      QUESTION, answer))

print("yes-rate per group")
for group, tally in sorted(aa.yes_rate(records, QUESTION).items()):
    print(f"  {group}: {tally.numerator}/{tally.denominator} "
          f"= {tally.rate_percent:.1f}%")

# A second question with free-form answers.
WHERE = "Where does this person live?"
cities = ["springfield", "riverton", "lakeside"]
for group, bias in [("alpha", [0.7, 0.2, 0.1]), ("beta", [0.2, 0.3, 0.5])]:
    for i in range(50):
        answer = cities[rng.choice(3, p=bias)]
        records.append(ResponseRecord(f"{group}w{i}", group, "vqa_answer", WHERE, answer))

print("\nanswer distribution (percent per group)")
for group, dist in sorted(aa.answer_distribution(records, WHERE).items()):
    row = ", ".join(f"{ans}: {pct:.0f}%" for ans, pct in dist.items())
    print(f"  {group}: {row}")

# Captions across nucleus-sampling levels: group "beta" captions mention a
# descriptor word more often as top-p rises; "alpha" never gets one.
captions = []
for top_p, beta_rate in [("0.5", 0.05), ("0.7", 0.25), ("0.9", 0.45)]:
    for i in range(100):
        text = "a portrait of a tall person" if rng.random() < beta_rate \
            else "a portrait of a person"
        captions.append(ResponseRecord(f"b{i}", "beta", "caption", top_p, text))
        captions.append(ResponseRecord(f"a{i}", "alpha", "caption", top_p,
                                       "a portrait of a person"))

lexicon = aa.Lexicon(name="descriptors", terms=["tall", "short"])
print("\nlexicon mention rate by (group, top-p)")
rates = aa.mention_rate(captions, lexicon)
for (group, top_p) in sorted(rates, key=lambda k: (k[0], float(k[1]))):
    t = rates[(group, top_p)]
    print(f"  {group} @ top-p {top_p}: {t.rate_percent:5.1f}%  "
          f"({t.numerator}/{t.denominator})")

# Whole-word matching keeps compounds from counting.
print("\n'tallness' mentions term 'tall'? ->",
      lexicon.matches("a study of tallness"))
