#!/usr/bin/env python3
"""Download the real benchmark datasets and assemble the pinned files.

Needs network access to the LIBSVM dataset mirror. Each benchmark file is the
concatenation of the published training and test parts (the splits used here
are re-drawn with a seeded shuffle, so the original partition is irrelevant):

    data/svmguide3.libsvm  = svmguide3 + svmguide3.t   (1284 examples, 21 features)
    data/splice.libsvm     = splice + splice.t         (3175 examples, 60 features)

Shapes are verified after download; a mismatch aborts without writing.
"""

import sys
import urllib.request
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sadmm.data import parse_libsvm

BASE = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/"
DATASETS = {
    "svmguide3": (("svmguide3", "svmguide3.t"), 1284, 21),
    "splice": (("splice", "splice.t"), 3175, 60),
}


def fetch(name: str) -> str:
    url = BASE + name
    print(f"downloading {url}")
    with urllib.request.urlopen(url, timeout=60) as resp:
        return resp.read().decode("utf-8")


def main() -> int:
    out_dir = Path(__file__).resolve().parent.parent / "data"
    out_dir.mkdir(exist_ok=True)
    for name, (parts, n_expected, d_expected) in DATASETS.items():
        text = "".join(fetch(p) for p in parts)
        data = parse_libsvm(text, expected_dim=d_expected)
        if len(data) != n_expected or data.dim != d_expected:
            print(
                f"error: {name} parsed as {len(data)} x {data.dim}, "
                f"expected {n_expected} x {d_expected}; not writing",
                file=sys.stderr,
            )
            return 1
        path = out_dir / f"{name}.libsvm"
        path.write_text(text, encoding="utf-8")
        print(f"wrote {path} ({len(data)} x {data.dim})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
