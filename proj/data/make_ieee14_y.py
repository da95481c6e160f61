#!/usr/bin/env python3
"""Regenerate ieee14_Y.json: DC susceptance matrix of the IEEE 14-bus case,
Kron-reduced onto the five generator buses (1, 2, 3, 6, 8)."""
import json
import sys

import numpy as np

# fbus, tbus, x, tap (0 means no transformer)
BRANCHES = [
    (1, 2, 0.05917, 0), (1, 5, 0.22304, 0), (2, 3, 0.19797, 0),
    (2, 4, 0.17632, 0), (2, 5, 0.17388, 0), (3, 4, 0.17103, 0),
    (4, 5, 0.04211, 0), (4, 7, 0.20912, 0.978), (4, 9, 0.55618, 0.969),
    (5, 6, 0.25202, 0.932), (6, 11, 0.19890, 0), (6, 12, 0.25581, 0),
    (6, 13, 0.13027, 0), (7, 8, 0.17615, 0), (7, 9, 0.11001, 0),
    (9, 10, 0.08450, 0), (9, 14, 0.27038, 0), (10, 11, 0.19207, 0),
    (12, 13, 0.19988, 0), (13, 14, 0.34802, 0),
]
GEN_BUSES = [1, 2, 3, 6, 8]


def main(path):
    n = 14
    bbus = np.zeros((n, n))
    for f, t, x, tap in BRANCHES:
        b = 1.0 / (x * (tap if tap else 1.0))
        i, j = f - 1, t - 1
        bbus[i, i] += b
        bbus[j, j] += b
        bbus[i, j] -= b
        bbus[j, i] -= b
    g = [b - 1 for b in GEN_BUSES]
    l = [i for i in range(n) if i not in g]
    y = bbus[np.ix_(g, g)] - bbus[np.ix_(g, l)] @ np.linalg.solve(
        bbus[np.ix_(l, l)], bbus[np.ix_(l, g)])
    y = 0.5 * (y + y.T)
    doc = {
        "Y": [[round(float(v), 10) for v in row] for row in y],
        "source": "kron-reduced IEEE14",
        "version": 1,
        "generator_buses": GEN_BUSES,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "ieee14_Y.json")
