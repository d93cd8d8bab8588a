"""Closed-form lower bound vs sampled estimates of the sufficient RIP constant.

For adapted and unit weights on a few levels models, prints the bound, the
smallest heuristic value and the smallest sup estimate over descent samples.
"""
import sys

from structcs.delta import delta_sigma_empirical
from structcs.models import LevelsModel
from structcs.regularizers import Regularizer

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 300

models = {
    "J=1 n=8 k=2": LevelsModel.sparse(8, 2),
    "J=2 (6,6) k=(1,2)": LevelsModel.sparse_in_levels([6, 6], [1, 2]),
    "J=2 (4,8) k=(1,4)": LevelsModel.sparse_in_levels([4, 8], [1, 4]),
    "J=3 (5,5,5) k=(1,2,1)": LevelsModel.sparse_in_levels([5, 5, 5], [1, 2, 1]),
}
print(f"{'model':<24}{'weights':<10}{'bound':>8}{'min heur':>10}{'min sup':>10}{'viol':>6}")
for name, model in models.items():
    for label, f in (("adapted", Regularizer.adapted(model)), ("unit", Regularizer.group_levels(model))):
        rep = delta_sigma_empirical(f, model, trials=trials, seed=0)
        print(f"{name:<24}{label:<10}{rep.lower_bound:>8.4f}{rep.heuristic_min:>10.4f}"
              f"{rep.empirical_min:>10.4f}{len(rep.violations):>6}")
