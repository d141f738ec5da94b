"""Export the UCI handwritten-digits set bundled with scikit-learn as CSV.

Writes data/digits_train.csv (200 rows) and data/digits_test.csv (500 rows).
Columns: p0..p63 (raw 0-16 intensities), label.
"""
import csv
import pathlib

import numpy as np
from sklearn.datasets import load_digits

out = pathlib.Path(__file__).resolve().parent.parent / "data"
out.mkdir(exist_ok=True)

digits = load_digits()
order = np.random.default_rng(20190101).permutation(len(digits.target))
x = digits.data[order].astype(int)
y = digits.target[order].astype(int)

header = [f"p{j}" for j in range(x.shape[1])] + ["label"]
for name, rows in (("digits_train.csv", slice(0, 200)), ("digits_test.csv", slice(200, 700))):
    with open(out / name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for xi, yi in zip(x[rows], y[rows]):
            w.writerow(list(xi) + [yi])
