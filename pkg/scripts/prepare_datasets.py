#!/usr/bin/env python3
"""Write the breast and diabetes benchmark CSVs used by the reproduction runs.

breast   -- Wisconsin diagnostic breast cancer data (569 x 30), taken from the
            copy shipped with scikit-learn.
diabetes -- Pima Indians diabetes data (768 x 8), taken from the KEEL copy
            shipped inside the ``common-datasets`` wheel. Pass the wheel (or the
            extracted ``pima.dat``) with ``--pima``; obtain it with
            ``pip download --no-deps common-datasets``.

Usage:
    python scripts/prepare_datasets.py --out data --pima common_datasets-*.whl
"""

import argparse
import csv
import io
import sys
import zipfile
from pathlib import Path

PIMA_MEMBER = "common_datasets/data/classification/pima/pima.dat"
PIMA_COLUMNS = [
    "pregnancies",
    "glucose",
    "blood_pressure",
    "skin_thickness",
    "insulin",
    "body_mass_index",
    "diabetes_pedigree",
    "age",
]


def _wdbc_name(sk_name):
    # "mean radius" -> radius_mean, "radius error" -> radius_se, "worst radius" -> radius_worst
    if sk_name.startswith("mean "):
        base, kind = sk_name[5:], "mean"
    elif sk_name.startswith("worst "):
        base, kind = sk_name[6:], "worst"
    elif sk_name.endswith(" error"):
        base, kind = sk_name[:-6], "se"
    else:
        raise ValueError(sk_name)
    return base.replace(" ", "_") + "_" + kind


def write_breast(path):
    from sklearn.datasets import load_breast_cancer

    raw = load_breast_cancer()
    names = [_wdbc_name(n) for n in raw.feature_names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["diagnosis"])
        for row, t in zip(raw.data, raw.target):
            # sklearn: 0 = malignant, 1 = benign
            w.writerow([repr(float(v)) for v in row] + ["M" if t == 0 else "B"])
    return len(raw.data)


def _read_pima_text(src):
    src = Path(src)
    if src.suffix == ".whl":
        with zipfile.ZipFile(src) as z:
            return z.read(PIMA_MEMBER).decode("utf-8")
    return src.read_text()


def write_diabetes(path, src):
    rows = []
    for line in io.StringIO(_read_pima_text(src)):
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        parts = [p.strip() for p in line.split(",")]
        rows.append(parts)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PIMA_COLUMNS + ["outcome"])
        w.writerows(rows)
    return len(rows)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data")
    ap.add_argument("--pima", help="common_datasets wheel or pima.dat file")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    print("breast:", write_breast(out / "breast.csv"), "rows")
    if args.pima:
        print("diabetes:", write_diabetes(out / "diabetes.csv", args.pima), "rows")
    else:
        print("diabetes: skipped (no --pima source given)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
