"""Fraction of all-zero fits when the true risk function is identically zero.

    python3 scripts/null_model.py --replicates 100 --A 0.06
"""

import argparse
import json

from structcox.lab.experiments import null_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--p", type=int, default=50)
    ap.add_argument("--d", type=int, default=4)
    ap.add_argument("--replicates", type=int, default=100)
    ap.add_argument("--A", type=float, default=0.06)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    res = null_experiment(a.n, a.p, a.d, a.replicates, a.A, a.seed)
    print(json.dumps(res.to_json(), indent=2))


if __name__ == "__main__":
    main()
