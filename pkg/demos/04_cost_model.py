"""Multiply-add counts for one-stage and two-stage alignment.

Run: python3 demos/04_cost_model.py
"""
from burstalign.cost_model import CostParams, audit_candidates, closed_form_candidates, one_stage_cost, speedup, two_stage_cost
from burstalign.dpbm import SearchConfig


def main():
    print(f"{'D':>3} {'k':>3} {'D_s':>3} {'one stage':>14} {'two stage':>12} {'speedup':>8}")
    for D, k, ds in ((28, 16, 2), (28, 8, 2), (56, 16, 2), (28, 16, 4), (14, 16, 1)):
        cp = CostParams(D=D, D_s=ds, k=k, H=256, W=256, F=10)
        print(f"{D:>3} {k:>3} {ds:>3} {one_stage_cost(cp):>14,} {two_stage_cost(cp):>12,} {float(speedup(cp)):>7.1f}x")

    # The search code counts its own distance evaluations; they must agree
    # with the closed form for every configuration.
    print("\naudited distance evaluations on a 64x64 quarter-scale frame:")
    for dp, s in ((16, 4), (8, 2), (12, 3)):
        cfg = SearchConfig(dp_cmax=dp, stride_s=s)
        print(f"  range {dp:>2}, stride {s}: model {closed_form_candidates(cfg, (64, 64))}, counted {audit_candidates(cfg, (64, 64))}")


if __name__ == "__main__":
    main()
