"""Write the bundled 80-node / 6-terminal STP sample.

The graph mimics the layout of the SteinLib I080 incidence instances (80
nodes, 120 edges, 6 terminals, weights drawn from normal distributions whose
mean grows with the number of terminal endpoints). It is synthetic, not a
copy of any published instance.
"""

import sys
from pathlib import Path

import numpy as np

N, M, K = 80, 120, 6
OUT = Path(__file__).resolve().parents[1] / "src" / "sparse_mcts" / "data" / "i080_sample.stp"


def main(seed=80):
    rng = np.random.default_rng(seed)
    order = rng.permutation(N)
    edges = set()
    for i in range(1, N):
        u, v = int(order[i]), int(order[rng.integers(i)])
        edges.add((min(u, v), max(u, v)))
    while len(edges) < M:
        u, v = (int(x) for x in rng.choice(N, 2, replace=False))
        edges.add((min(u, v), max(u, v)))
    terminals = set(rng.choice(N, K, replace=False).tolist())
    lines = ["33D32945 STP File, STP Format Version 1.0", "", "SECTION Comment",
             'Name    "I080-sample"', 'Remark  "synthetic incidence-weight graph in the I080 layout"',
             "END", "", "SECTION Graph", f"Nodes {N}", f"Edges {M}"]
    for u, v in sorted(edges):
        k = (u in terminals) + (v in terminals)
        w = max(1, int(round(rng.normal(100 * (k + 1), 10 * (k + 1)))))
        lines.append(f"E {u + 1} {v + 1} {w}")
    lines += ["END", "", "SECTION Terminals", f"Terminals {K}"]
    lines += [f"T {t + 1}" for t in sorted(terminals)]
    lines += ["END", "", "EOF", ""]
    OUT.write_text("\n".join(lines))
    print(OUT)


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:]))
