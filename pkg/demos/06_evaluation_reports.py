#!/usr/bin/env python3
"""BLEU scoring conventions and the length-bucket report.

Run:  python3 demos/06_evaluation_reports.py
"""

import numpy as np

from refnet.evaluation import bleu, length_buckets

print("=== corpus BLEU follows the multi-bleu conventions ===")
cases = [
    ("identical", [["the", "cat", "sat"]], [[["the", "cat", "sat"]]]),
    ("empty hypothesis", [[]], [[["the", "cat"]]]),
    ("short hypothesis", [["the", "cat", "sat"]],
     [[["the", "cat", "sat", "down"]]]),
    ("casing mismatch", [["The", "Cat"]], [[["the", "cat"]]]),
]
for name, hyp, ref in cases:
    strict = bleu(hyp, ref, case_sensitive=True)
    folded = bleu(hyp, ref, case_sensitive=False)
    print(f"{name:18s} case-sensitive {strict.score:6.2f}   "
          f"case-insensitive {folded.score:6.2f}")

print("\nthe short-hypothesis case in detail:")
report = bleu([["the", "cat", "sat"]], [[["the", "cat", "sat", "down"]]])
print(report.pretty())
print("(three exact n-gram orders, no 4-grams to score, brevity penalty "
      "exp(1 - 4/3))")

print("\n=== length buckets over a synthetic test set ===")
rng = np.random.default_rng(4)
sources, hyps, refs = [], [], []
for _ in range(200):
    m = int(rng.integers(1, 70))
    sources.append(["s"] * m)
    sent = [f"w{i}" for i in rng.integers(0, 20, size=max(2, m // 2))]
    noisy = list(sent)
    if len(noisy) > 3 and rng.random() < 0.5:
        noisy[rng.integers(0, len(noisy))] = "w_err"
    hyps.append(noisy)
    refs.append([sent])
print(length_buckets(sources, hyps, refs, bucket_width=10).pretty())
