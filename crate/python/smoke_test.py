"""Smoke test for the Python bindings.

Builds the extension with cargo (unless MULTIDICKE_SO points at a built
library), loads it, and checks a few values against independent formulas.
"""

import importlib.util
import math
import os
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    lib = os.environ.get("MULTIDICKE_SO")
    if lib is None:
        subprocess.run(
            ["cargo", "build", "--release", "-p", "multidicke-py", "--features", "extension-module"],
            cwd=ROOT,
            check=True,
        )
        lib = ROOT / "target" / "release" / "libmultidicke.so"
    tmp = pathlib.Path(tempfile.mkdtemp())
    target = tmp / "multidicke.so"
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("multidicke", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    md = load()

    p = md.steady_state_two_channel(20, "1")
    assert len(p) == 21 and all(abs(x - 1 / 21) < 1e-15 for x in p)

    # Two emitters, one channel: p_1(t) = 2Γt e^{-2Γt}.
    rows = md.level_populations(2, "1", [0.0, 0.5, 1.0])
    for t, row in zip([0.0, 0.5, 1.0], rows):
        assert abs(row[1] - 2 * t * math.exp(-2 * t)) < 1e-15
        assert abs(sum(row) - 1) < 1e-15

    t_peak, i_max = md.intensity_peak(150, "1")
    assert abs(i_max / (150**2 / 5) - 1) < 0.05
    assert abs(t_peak / (math.log(150) / 150) - 1) < 0.10

    tau = md.stopping_time(1000, 1.0, 1.0)
    assert abs(tau - math.log(501)) < 1e-12

    n2, chi = md.order_parameter(100, "1")
    assert abs(n2 - 0.5) < 1e-12 and chi > 0

    hist = {tuple(k): c for k, c in md.final_histogram(3, "1,2", 20000, 1)}
    assert sum(hist.values()) == 20000
    assert list(hist.items()) == [(tuple(k), c) for k, c in md.final_histogram(3, "1,2", 20000, 1)]
    assert set(hist) == {(3, 0), (2, 1), (1, 2), (0, 3)}

    try:
        md.intensity(3, "1,-1", [0.0])
    except ValueError:
        pass
    else:
        raise AssertionError("negative rate accepted")

    print(f"multidicke {md.__version__}: python smoke test passed")


if __name__ == "__main__":
    sys.exit(main())
