#!/usr/bin/env python3
"""Two hidden states, independent type: subspace quotient next to the observed Jacobian rank.

Each row is one of the four cases (invertible or rank-one chain, distinct or
equal emission columns) at the stationary law and at a fixed non-stationary
law. ``quotient`` is the dimension computed from the indistinguishable
subspaces; ``jacobian`` is the finite-difference rank of the law of the first
k outputs over all column-stochastic perturbations of (W, V). The two columns
disagree for equal emission columns at the stationary law; see the README.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from jacobian_oracle import indep_law_jacobian_rank  # noqa: E402

from hmmequiv.indep import two_hidden_state_report  # noqa: E402
from hmmequiv.model import IndepModel  # noqa: E402

INVERTIBLE = np.array([[0.7, 0.4], [0.3, 0.6]])
RANK_ONE = np.full((2, 2), 0.5)


def atlas(dY, seed, P_fixed, k):
    rng = np.random.default_rng(seed)
    V = rng.dirichlet(np.ones(dY), size=2).T
    # nearly equal columns sit next to the singular stratum, where a fixed
    # Jacobian rank cutoff is no longer meaningful
    while np.abs(V[:, 0] - V[:, 1]).max() < 0.1:
        V = rng.dirichlet(np.ones(dY), size=2).T
    same = np.repeat(V[:, :1], 2, axis=1)
    for Wm, Vm in ((INVERTIBLE, V), (RANK_ONE, V), (INVERTIBLE, same), (RANK_ONE, same)):
        m = IndepModel(Wm, Vm)
        for label, P in (("stationary", None), ("fixed", P_fixed)):
            rep = two_hidden_state_report(m, P)
            jac = indep_law_jacobian_rank(Wm, Vm, P, k=k)
            yield rep.case, label, rep.quotient_dim, jac


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dY", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("-k", type=int, default=4, help="window length for the Jacobian")
    args = ap.parse_args()
    P_fixed = np.array([0.3, 0.7])
    print(f"{'dY':>3} {'case':<13} {'law':<11} {'quotient':>8} {'jacobian':>8}")
    for dY in args.dY:
        for case, label, q, j in atlas(dY, args.seed, P_fixed, args.k):
            flag = "" if q == j else "  differs"
            print(f"{dY:>3} {case:<13} {label:<11} {q:>8} {j:>8}{flag}")


if __name__ == "__main__":
    main()
