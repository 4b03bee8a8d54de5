#!/usr/bin/env python3
"""Regenerate the synthetic benchmark fixtures under data/.

Two desk-scale datasets mirror the shapes of the real benchmark files
(1284 x 21 with unscaled feature magnitudes, 3175 x 60 with unit-scale dense
features) so the full pipeline can run without downloads. Each gets a pinned
edge-list built from the precision-matrix heuristic. Deterministic: reruns
reproduce the shipped files byte for byte.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sadmm.bench import make_synthetic_dataset
from sadmm.data import build_graph_precision, save_edges, save_libsvm

SPECS = {
    "synth_small": dict(n=1284, d=21, seed=101, scale_spread=2.0, label_bias=0.8, flip_fraction=0.12),
    "synth_medium": dict(n=3175, d=60, seed=202, scale_spread=0.0, label_bias=0.3, flip_fraction=0.10),
}


def main() -> int:
    out_dir = Path(__file__).resolve().parent.parent / "data"
    out_dir.mkdir(exist_ok=True)
    for name, kw in SPECS.items():
        data = make_synthetic_dataset(**kw)
        graph = build_graph_precision(data)
        save_libsvm(data, str(out_dir / f"{name}.libsvm"))
        save_edges(graph, str(out_dir / f"{name}.edges"))
        print(f"{name}: {len(data)} x {data.dim}, {graph.m} edges")
    return 0


if __name__ == "__main__":
    sys.exit(main())
