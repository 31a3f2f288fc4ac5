"""How much of the level-set inequality does the data term carry?

For each instance the check is run as usual, then again with the data
term removed, which isolates the eps * d(lambda) part.  Without the data
term the smallest constant is bounded by 1/eps, so values near 1/eps
mean the good-lambda mechanism itself is doing the work.

    python3 scripts/levelset_diagnostic.py [--n 32 64] [--alpha 0 0.5]
"""

import argparse

import numpy as np

from deglap.instances import InstanceConfig
from deglap.maximal import MaximalConfig, fractional_maximal
from deglap.verify import check_levelset, gradient_powers, levelset_constants, solved


def no_data_constant(cfg, alpha, eps, theta=0.5, n_lambda=200):
    inst, rep = solved(cfg)
    m = inst.spec.mask
    MA = fractional_maximal(gradient_powers(inst, rep)["u"], MaximalConfig.default(m, alpha), m).values
    lam = MA.max() * np.geomspace(1e-4, 1.0, n_lambda)
    out = levelset_constants(MA, np.zeros_like(MA), np.ones(m.grid.shape), m, eps, theta, (1.0,), lam)
    return out["1.0"]["C"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[32, 64])
    ap.add_argument("--alpha", type=float, nargs="+", default=[0.0, 0.5])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()
    print("n  alpha seed  C(with data)  dominance  C(no data, eps=0.5)  C(no data, eps=0.1)")
    for n in args.n:
        for a in args.alpha:
            for s in args.seeds:
                cfg = InstanceConfig(n=n, p=2.0, weight="identity", seed=s)
                rep = check_levelset(cfg, alpha=a)
                c05 = no_data_constant(cfg, a, 0.5)
                c01 = no_data_constant(cfg, a, 0.1)
                print(f"{n:3d} {a:5.2f} {s:4d}  {rep.empirical_C:12.4g}  "
                      f"{rep.details['data_dominance']:9.3f}  {c05:19.4g}  {c01:19.4g}")


if __name__ == "__main__":
    main()
