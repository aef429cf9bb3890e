"""Regenerate reference_baseline.json.

Recomputes the mean-predictor reference line on the synthetic 159-record set
from the CSV text alone (csv + numpy), independently of the package's split
and metric code.  Run from the repository root:

    python3 tests/data/make_reference.py
"""

import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np

N, DATA_SEED, NOISE, MASTER_SEED, REPS = 159, 0, 0.05, 0, 5


def labels_from_cli():
    out = Path(__file__).with_name("_synth.csv")
    subprocess.run([sys.executable, "-m", "qkr", "synth", "--n", str(N), "--seed", str(DATA_SEED),
                    "--noise", str(NOISE), "--out", str(out)], check=True, capture_output=True)
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    out.unlink()
    return np.array([float(r["r_c_ohm_mm"]) for r in rows])


def one_split(y, seed):
    perm = np.random.default_rng(seed).permutation(len(y))
    k = int(math.floor(0.8 * len(y) + 0.5))
    train, test = y[np.sort(perm[:k])], y[np.sort(perm[k:])]
    err = test - train.mean()
    mse = float(np.mean(err ** 2))
    return {"mae": float(np.mean(np.abs(err))), "mse": mse, "rmse": math.sqrt(mse)}


def main():
    y = labels_from_cli()
    seeds = [int(np.random.SeedSequence([MASTER_SEED, r]).generate_state(1)[0]) for r in range(REPS)]
    per_rep = [one_split(y, s) for s in seeds]
    doc = {
        "dataset": {"n": N, "seed": DATA_SEED, "noise": NOISE},
        "split_seed_0": one_split(y, 0),
        "master_seed": MASTER_SEED,
        "repetition_seeds": seeds,
        "reference_mean": {m: float(np.mean([p[m] for p in per_rep])) for m in ("mae", "mse", "rmse")},
    }
    Path(__file__).with_name("reference_baseline.json").write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()
