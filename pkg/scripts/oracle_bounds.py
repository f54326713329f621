"""Monte-Carlo violation frequency of the oracle bounds and the localisation check.

    python3 scripts/oracle_bounds.py --replicates 200 --out results/
"""

import argparse
import json
from pathlib import Path

from structcox.lab.reports import write_json
from structcox.lab.suites import options, run_oracle


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replicates", type=int, default=200)
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--A", type=float, default=0.0015)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results")
    a = ap.parse_args()
    opts = options("oracle", {"replicates": a.replicates, "n": a.n, "A": a.A})
    payload, failures, _ = run_oracle(opts, a.seed)
    write_json(Path(a.out) / "oracle_bounds.json", {**payload, "failures": failures}, opts, a.seed)
    print(json.dumps({"zeta_hat": payload["zeta_hat"], "violation_frequency": payload["violation_frequency"],
                      "failures": failures}, indent=2))


if __name__ == "__main__":
    main()
