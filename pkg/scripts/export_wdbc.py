"""Write the Wisconsin Diagnostic Breast Cancer data to CSV.

Uses the copy bundled with scikit-learn (569 rows, 30 real-valued features
in the original order). The output has a ``diagnosis`` column (``M`` or
``B``) followed by the 30 features, so feature number k (1-based, counted
after the label) is column k of the covariates: 2 = mean texture,
24 = worst area, 25 = worst smoothness.

Usage::

    python scripts/export_wdbc.py [output.csv]
"""

import sys
from pathlib import Path


def main(argv=None):
    from sklearn.datasets import load_breast_cancer

    argv = sys.argv[1:] if argv is None else argv
    out = Path(argv[0]) if argv else Path("wdbc.csv")
    bunch = load_breast_cancer()
    # scikit-learn codes 0 = malignant, 1 = benign
    diagnosis = ["M" if t == 0 else "B" for t in bunch.target]
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write("diagnosis," + ",".join(bunch.feature_names) + "\n")
        for label, row in zip(diagnosis, bunch.data):
            fh.write(label + "," + ",".join(repr(float(v)) for v in row) + "\n")
    print(f"wrote {len(diagnosis)} rows to {out}")


if __name__ == "__main__":
    main()
