"""Finite-difference check of the LSTM's backpropagation-through-time gradients.

    python3 scripts/gradient_check.py --hidden 4 --steps 6 --draws 20
"""

import argparse

import numpy as np

from intraday_alpha.models.lstm import gradient_check, init_params


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--hidden", type=int, default=4)
    ap.add_argument("--steps", type=int, default=6)
    ap.add_argument("--inputs", type=int, default=3)
    ap.add_argument("--batch", type=int, default=4)
    ap.add_argument("--draws", type=int, default=20)
    ap.add_argument("--step", type=float, default=1e-5)
    ap.add_argument("--dropout", type=float, default=0.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    errs = []
    for _ in range(args.draws):
        params = init_params(rng, args.inputs, args.hidden)
        params = {k: v + 0.5 * rng.standard_normal(v.shape) for k, v in params.items()}
        x = rng.standard_normal((args.batch, args.steps, args.inputs))
        y = rng.integers(0, 2, args.batch)
        mask = None
        if args.dropout > 0:
            keep = 1 - args.dropout
            mask = (rng.random((args.batch, args.hidden)) < keep) / keep
        errs.append(gradient_check(params, x, y, args.step, mask))
    print(f"max relative error {max(errs):.3e}, median {np.median(errs):.3e} over {args.draws} draws")


if __name__ == "__main__":
    main()
