"""Median sup-deviation of the risk-set covariate mean from its population value.

    python3 scripts/concentration.py --n-grid 100 1000 10000 --replicates 100
"""

import argparse
import json

from structcox.lab.experiments import AdditiveModel, concentration_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-grid", type=int, nargs="+", default=[100, 1000, 10000])
    ap.add_argument("--replicates", type=int, default=100)
    ap.add_argument("--p", type=int, default=2)
    ap.add_argument("--s", type=int, default=1)
    ap.add_argument("--reference-size", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    model = AdditiveModel(p=a.p, d=4, s=a.s)
    summ = concentration_probe(model, None, tuple(a.n_grid), a.replicates, a.seed, a.reference_size)
    print(json.dumps(summ.to_json(), indent=2))


if __name__ == "__main__":
    main()
