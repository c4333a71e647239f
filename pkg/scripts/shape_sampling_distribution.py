"""Sampling distribution of the fitted k under MLE vs bounded-support penalties.

Draws repeated samples near the GEV boundary (true h just below zero),
fits MLE and the beta-penalty-on-k combinations, and writes every
converged k estimate to a CSV for density plotting, plus a variance
summary. The penalized estimates stay inside (-0.5, 0.5) by
construction; the MLE spread is visibly wider.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from kappafit import K4Params, sample
from kappafit.simulation import resolve_method

MS_ON_K = (
    "MPLE.MSo(k)CDo(h)",
    "MPLE.MSo(k)MSo(h)",
    "MPLE.MSo(k)Po(h)",
    "MPLE.MSo(k)CDa(h)",
    "MPLE.MSo(k)MSa(h)",
    "MPLE.MSo(k)Pa(h)",
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("-o", "--output", default="shape_distribution.csv")
    parser.add_argument("--reps", type=int, default=1000)
    parser.add_argument("-n", type=int, default=30)
    parser.add_argument("--k", type=float, default=-0.2)
    parser.add_argument("--h", type=float, default=-0.01)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    truth = K4Params(0.0, 1.0, args.k, args.h)
    methods = ("MLE",) + MS_ON_K
    fitters = {name: resolve_method(name) for name in methods}
    estimates: dict[str, list[float]] = {name: [] for name in methods}

    for rep in range(args.reps):
        x = sample(truth, args.n, np.random.default_rng([args.seed, rep]))
        for name in methods:
            try:
                result = fitters[name](x)
            except ValueError:
                continue
            if result is not None and result.converged:
                estimates[name].append(result.params.k)

    path = Path(args.output)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["method", "k_hat"])
        for name in methods:
            for value in estimates[name]:
                writer.writerow([name, repr(value)])

    print(f"true k={args.k} h={args.h} n={args.n} reps={args.reps} seed={args.seed}")
    for name in methods:
        values = np.array(estimates[name])
        print(
            f"{name:22s} M={values.size:4d} var={values.var(ddof=1):.5f} "
            f"range=[{values.min():.3f}, {values.max():.3f}]"
        )
    print(f"estimates written to {path}")


if __name__ == "__main__":
    main()
