"""Survey of the two-sided comparison between the curvature norm and the
empirical Euclidean norm on random small instances.

Counts violations of the literal bound, of the centred upper bound and of the
anchored comparison, and prints the worst literal violation found.

    python3 scripts/sandwich_survey.py --instances 500
"""

import argparse

import numpy as np

from structcox.lab.sandwich import check_sandwich, random_instance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=500)
    ap.add_argument("--max-n", type=int, default=30)
    ap.add_argument("--max-pd", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    rng = np.random.default_rng(a.seed)
    counts = {"pairs": 0, "literal": 0, "literal_lower": 0, "literal_upper": 0, "centred": 0, "anchored": 0}
    worst = (0.0, None)
    for _ in range(a.instances):
        X, ds, b, bs = random_instance(rng, a.max_n, a.max_pd)
        rep = check_sandwich(X, ds, b, bs)
        counts["pairs"] += rep.c_grid.size
        counts["literal"] += rep.violations
        counts["literal_lower"] += int((~rep.lower_ok).sum())
        counts["literal_upper"] += int((~rep.upper_ok).sum())
        counts["centred"] += rep.centered_violations
        counts["anchored"] += rep.anchored_violations
        if rep.violations:
            ratio = float(np.max(rep.lower / np.maximum(rep.middle, 1e-300)))
            if ratio > worst[0]:
                worst = (ratio, {"n": ds.n, "pd": X.shape[1], "a_v": rep.a_v, "omega": rep.omega_lower})
    for k, v in counts.items():
        print(f"{k:>14}: {v}")
    if worst[1] is not None:
        print(f"largest lower/middle ratio {worst[0]:.3g} at {worst[1]}")


if __name__ == "__main__":
    main()
