"""Exception costs, free-Ab lower bounds, gaps, and the naive oracle.

Run:  python demos/03_lower_bounds_and_gaps.py
"""

import random

from abduce import (
    builtin_theory,
    cost,
    gaps,
    opt_costs,
    parse_hypothesis,
    sample_world,
    validity,
)
from abduce import oracle
from abduce.world import DENSITY_RANGES

t1 = builtin_theory("T1")
rng = random.Random(7)
worlds = [sample_world((9, 10, 11), DENSITY_RANGES["full"], {}, rng) for _ in range(4)]

# A deliberately wasteful repair: mark every element abnormal.
top = parse_hypothesis("(or (P x) (not (P x)))", t1.allowed, t1.forbidden)
# A tighter one: elements whose R-successors include a P-element.
ante = parse_hypothesis("(exists y (and (R x y) (P y)))", t1.allowed, t1.forbidden)

opts = opt_costs("full", t1, worlds)
print("free-Ab lower bounds per world:", opts.per_world, "| total:", opts.total)

for name, alpha in (("mark-everything", top), ("antecedent", ante)):
    verdict = validity("full", t1, worlds, alpha)
    report = gaps(cost("full", t1, worlds, alpha), opts, gold=ante, theory=t1, worlds=worlds)
    print(
        f"{name:16s} valid={verdict.valid}  cost={report.total:3d}  "
        f"gap/world={report.gap_normalized:.2f}  gold margin={report.total - report.gold_cost:+d}"
    )

# The lower bound never needs a definable formula, so even the best rule
# can sit above it; and the naive oracle recomputes everything by literal
# enumeration for small worlds.
small = sample_world((5,), DENSITY_RANGES["full"], {}, random.Random(1))
assert oracle.world_opt_cost("full", t1, small) == opt_costs("full", t1, [small]).per_world[0]
print("\noracle agrees with the engine on a small world:",
      oracle.world_opt_cost("full", t1, small))
