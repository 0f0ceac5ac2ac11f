#!/usr/bin/env python3
"""Regenerates the bundled 30-node, 5-snapshot synthetic dynamic graph.

Three communities of ten nodes. Two nodes (n03, n04) drift from community A
to community B from snapshot 2 on; n29 joins at snapshot 2 and n28 leaves
after snapshot 3. Output is deterministic.
"""
import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
T = 5


def community(node, t):
    if node in (3, 4) and t >= 2:
        return 1
    return node // 10


def main():
    rng = random.Random(7)
    manifest = []
    for t in range(T):
        alive = [n for n in range(30) if not (n == 29 and t < 2) and not (n == 28 and t > 3)]
        rows = []
        for i, a in enumerate(alive):
            for b in alive[i + 1:]:
                p = 0.7 if community(a, t) == community(b, t) else 0.02
                if rng.random() < p:
                    rows.append(f"n{a:02d}\tn{b:02d}\t{rng.choice([1, 1, 2])}")
        name = f"snapshot_{t}.tsv"
        (HERE / name).write_text("# src\tdst\tweight\n" + "\n".join(rows) + "\n")
        manifest.append({"path": name, "timestamp_label": str(2020 + t)})
    (HERE / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    main()
