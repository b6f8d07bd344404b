"""Extrapolates the exact order parameter towards large N.

Runs `multidicke meanfield` for N up to 1e4 at a few ratios, fits the gap
to the limiting step function, |n2 - step(r)|, as a power of N, and prints
the fitted exponent next to the leading-order one (r - 1 below balance,
1/r - 1 above) together with the extrapolated gap at N = 1e7.

Usage: python3 python/extrapolate_order_parameter.py [path/to/multidicke]
"""

import csv
from fractions import Fraction
import io
import pathlib
import subprocess
import sys

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent
NS = [100, 300, 1000, 3000, 10000]
RATIOS = ["1/2", "2/3", "3/2", "2"]


def run(binary):
    out = subprocess.run(
        [binary, "meanfield", "--n", ",".join(map(str, NS)), "--ratio", ",".join(RATIOS)],
        check=True,
        capture_output=True,
        text=True,
    ).stdout
    body = "\n".join(line for line in out.splitlines() if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


def main():
    binary = sys.argv[1] if len(sys.argv) > 1 else str(ROOT / "target" / "release" / "multidicke")
    rows = run(binary)
    print(f"{'r':>6} {'fit exponent':>13} {'leading':>8} {'gap at 1e7':>11}")
    for r_text in RATIOS:
        sel = [row for row in rows if abs(float(row["r"]) - float(Fraction(r_text))) < 1e-12]
        r = float(sel[0]["r"])
        step = 0.0 if r < 1 else 1.0
        n = np.array([float(row["n"]) for row in sel])
        gap = np.array([abs(float(row["n_bar_2_exact"]) - step) for row in sel])
        slope, icept = np.polyfit(np.log(n), np.log(gap), 1)
        leading = r - 1 if r < 1 else 1 / r - 1
        print(f"{r:6.3f} {slope:13.4f} {leading:8.4f} {np.exp(icept) * 1e7 ** slope:11.3e}")


if __name__ == "__main__":
    main()
