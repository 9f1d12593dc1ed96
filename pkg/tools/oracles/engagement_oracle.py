"""Independent oracle for the engagement score.

Computes expected scores straight from the published formula, with no
imports from the package, so test constants can be frozen against it:

    score = w_r * exp(-ln2 * dt / half_life)
          + w_d * (backbone_index / backbone_length)
          + w_v * (distinct_action_kinds / total_action_kinds)

clamped to [0, 1].  Defaults: weights (0.5, 0.3, 0.2), half_life 300 s,
theta 0.35, total action kinds 14.

Run:  python tools/oracles/engagement_oracle.py
"""

import math

W_RECENCY = 0.5
W_DEPTH = 0.3
W_DIVERSITY = 0.2
HALF_LIFE_S = 300.0
TOTAL_KINDS = 14


def score(dt_s: float, backbone_index: int, backbone_length: int, distinct_kinds: int) -> float:
    recency = W_RECENCY * math.exp(-math.log(2.0) * dt_s / HALF_LIFE_S)
    depth = W_DEPTH * (backbone_index / backbone_length)
    diversity = W_DIVERSITY * (distinct_kinds / TOTAL_KINDS)
    return max(0.0, min(1.0, recency + depth + diversity))


CASES = [
    # (label, dt_s, backbone_index, backbone_length, distinct_kinds)
    ("fresh session at entry, one kind seen", 0.0, 0, 4, 1),
    ("worked example: stage 3 of 6, 7 of 14 kinds, dt 0", 0.0, 3, 6, 7),
    ("idle exactly one half-life at entry, one kind", 300.0, 0, 4, 1),
    ("idle one half-life, stage 3 of 6, 7 kinds", 300.0, 3, 6, 7),
    ("idle two half-lives at entry, two kinds", 600.0, 0, 4, 2),
    ("deep session, everything seen, fresh", 0.0, 4, 4, 14),
    ("webshop backbone stage 2 of 4, 3 kinds, dt 60", 60.0, 2, 4, 3),
]

if __name__ == "__main__":
    for label, dt, idx, blen, kinds in CASES:
        s = score(dt, idx, blen, kinds)
        below = "  (< theta 0.35 -> clue eligible)" if s < 0.35 else ""
        print(f"{label}: dt={dt}s idx={idx}/{blen} kinds={kinds}/14 -> {s!r}{below}")
