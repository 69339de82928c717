"""Build the smoking-cessation contrast fixture from the published arm counts.

The classic four-treatment smoking network: A = no contact, B = self-help,
C = individual counselling, D = group counselling; 24 trials, two of them
three-arm (ACD and BCD). Effects are log odds ratios of quitting; studies
with a zero cell get the usual 0.5 added to every cell. Three-arm studies
contribute anchored contrasts whose covariance is the anchor arm's logit
variance.

Writes data/smoking.csv and data/smoking_cov.csv.
"""

import csv
import math
import os

# (study, [(treatment, events, total), ...])
TRIALS = [
    ("s01", [("A", 9, 140), ("C", 23, 140), ("D", 10, 138)]),
    ("s02", [("B", 11, 78), ("C", 12, 85), ("D", 29, 170)]),
    ("s03", [("A", 79, 702), ("B", 77, 694)]),
    ("s04", [("A", 18, 671), ("B", 21, 535)]),
    ("s05", [("A", 8, 116), ("B", 19, 149)]),
    ("s06", [("A", 75, 731), ("C", 363, 714)]),
    ("s07", [("A", 2, 106), ("C", 9, 205)]),
    ("s08", [("A", 58, 549), ("C", 237, 1561)]),
    ("s09", [("A", 0, 33), ("C", 9, 48)]),
    ("s10", [("A", 3, 100), ("C", 31, 98)]),
    ("s11", [("A", 1, 31), ("C", 26, 95)]),
    ("s12", [("A", 6, 39), ("C", 17, 77)]),
    ("s13", [("A", 64, 642), ("C", 107, 761)]),
    ("s14", [("A", 5, 62), ("C", 8, 90)]),
    ("s15", [("A", 20, 234), ("C", 34, 237)]),
    ("s16", [("A", 95, 1107), ("C", 143, 1031)]),
    ("s17", [("A", 15, 187), ("C", 36, 504)]),
    ("s18", [("A", 78, 584), ("C", 73, 675)]),
    ("s19", [("A", 69, 1177), ("C", 54, 888)]),
    ("s20", [("A", 0, 20), ("D", 9, 20)]),
    ("s21", [("A", 7, 66), ("D", 32, 127)]),
    ("s22", [("B", 12, 76), ("C", 20, 74)]),
    ("s23", [("B", 9, 55), ("D", 3, 26)]),
    ("s24", [("C", 20, 49), ("D", 16, 43)]),
]


def arm_stats(events, total, correct):
    r = events + (0.5 if correct else 0.0)
    nr = total - events + (0.5 if correct else 0.0)
    return math.log(r / nr), 1.0 / r + 1.0 / nr


def main(out_dir):
    contrast_rows = []
    cov_rows = []
    for study, arms in TRIALS:
        correct = any(e == 0 or e == n for _, e, n in arms)
        stats = {t: arm_stats(e, n, correct) for t, e, n in arms}
        anchor = arms[0][0]
        logit_a, var_a = stats[anchor]
        others = [t for t, _, _ in arms[1:]]
        for t in others:
            logit_t, var_t = stats[t]
            contrast_rows.append({
                "study": study, "t1": anchor, "t2": t,
                "y": repr(logit_t - logit_a), "se": repr(math.sqrt(var_a + var_t)),
            })
        for i in range(len(others)):
            for j in range(i + 1, len(others)):
                cov_rows.append({"study": study, "row": i + 1, "col": j + 1,
                                 "cov": repr(var_a)})

    with open(os.path.join(out_dir, "smoking.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["study", "t1", "t2", "y", "se"])
        writer.writeheader()
        writer.writerows(contrast_rows)
    with open(os.path.join(out_dir, "smoking_cov.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["study", "row", "col", "cov"])
        writer.writeheader()
        writer.writerows(cov_rows)
    print(f"wrote {len(contrast_rows)} contrasts, {len(cov_rows)} covariance entries")


if __name__ == "__main__":
    here = os.path.dirname(os.path.abspath(__file__))
    main(os.path.join(os.path.dirname(here), "data"))
