"""Convert the UCI multiple-features digit files into an rmvc dataset directory.

Usage: python scripts/prepare_uci_digit.py SRC_DIR OUT_DIR

SRC_DIR holds mfeat-fac.csv, mfeat-fou.csv and mfeat-kar.csv as shipped by
mvlearn (a header row of column indices, then 2000 rows whose last column is
the digit label).
"""

import csv
import sys
from pathlib import Path

VIEWS = ["fac", "fou", "kar"]


def read(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))[1:]
    return [r[:-1] for r in rows], [int(float(r[-1])) for r in rows]


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    labels = None
    for v, name in enumerate(VIEWS, start=1):
        feats, lab = read(src / f"mfeat-{name}.csv")
        if labels is not None and lab != labels:
            sys.exit(f"label column of mfeat-{name}.csv disagrees with earlier views")
        labels = lab
        with open(out / f"view_{v}.csv", "w", newline="") as f:
            csv.writer(f).writerows(feats)
    (out / "labels.csv").write_text("".join(f"{l}\n" for l in labels))
    (out / "meta.txt").write_text("name=uci-digit\nclusters=10\n")
    print(f"wrote {len(labels)} samples, {len(VIEWS)} views to {out}")


if __name__ == "__main__":
    main()
