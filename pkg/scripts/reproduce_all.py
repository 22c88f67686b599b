#!/usr/bin/env python3
"""Run every bundled scenario and print a one-line summary per output file."""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

from darkcavity.scenario import BUNDLED, load_scenario, read_csv, run_scenario


def summarize(path: Path) -> str:
    notes, cols, data = read_csv(path)
    last = dict(zip(cols, data[-1]))
    keys = [k for k in ("qubit_total", "photon", "layer_p2", "norm") if k in last]
    if keys:
        tail = "final " + ", ".join(f"{k}={last[k]:.6g}" for k in keys)
    else:
        tail = f"max {cols[1]}={np.max(data[:, 1]):.6g}"
    extra = f" retained={notes['retained_fraction']}" if "retained_fraction" in notes else ""
    return f"{path.parent.name}/{path.name}: {len(data)} rows, {tail}{extra}"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="darkcavity-out")
    ap.add_argument("--only", nargs="+", choices=BUNDLED)
    a = ap.parse_args()
    root = Path(a.out)
    for name in a.only or BUNDLED:
        res = run_scenario(load_scenario(name), root / name)
        print(f"[{name}] {res.manifest['wall_time_s']:.2f} s  sha256 {res.manifest['config_sha256'][:12]}")
        for f in res.files:
            print("   ", summarize(f))
    print(json.dumps({"out": str(root)}))


if __name__ == "__main__":
    sys.exit(main())
