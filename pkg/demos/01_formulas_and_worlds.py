"""Formulas and worlds: parsing, printing, measuring, evaluating.

Run:  python demos/01_formulas_and_worlds.py
"""

from abduce import (
    World,
    enumerate_completions,
    eval_formula,
    formula_metrics,
    parse_formula,
    parse_hypothesis,
    render_formula,
)

# --- The S-expression language -------------------------------------------
# Hypotheses use and/or/not and the two quantifiers; implication is only
# for theory axioms (gated behind allow_implies).

alpha = parse_formula("(and (P x) (not (Q x)))")
print("parsed:   ", alpha)
print("canonical:", render_formula(alpha))

m = formula_metrics(parse_formula("(exists y (and (R x y) (P y)))"))
print("metrics:  ", m)  # ast_size 8, quantifier_depth 1

# Strictness: hypotheses take variables only, with exactly x free.
for bad in ["(and (P x))", "(P a0)", "(implies (P x) (Q x))"]:
    try:
        parse_formula(bad)
    except Exception as exc:
        print(f"rejected {bad!r}: {exc}")

# Scope checking on top of parsing: T1 forbids Q in hypotheses.
from abduce import builtin_theory

t1 = builtin_theory("T1")
try:
    parse_hypothesis("(not (Q x))", t1.allowed, t1.forbidden)
except Exception as exc:
    print("T1 scope: ", exc)

# --- Worlds ----------------------------------------------------------------
# A world is a finite domain plus per-predicate true and unknown atom sets;
# unlisted atoms are false (closed world).

world = World(
    3,
    true_atoms={"P": {0, 2}, "R": {(0, 1), (2, 2)}},
    unknown_atoms={"S": {(1, 2)}},
)
print("\ndomain size:", world.n)
print("unknown order:", world.unknown_order())

# Evaluation needs a completion whenever the formula touches unknown atoms.
self_loop = parse_formula("(exists y (and (R x y) (= y x)))")
print("a2 has a self-loop:", eval_formula(world, None, {"x": 2}, self_loop))

touches_s = parse_formula("(exists y (S x y))")
for completion in enumerate_completions(world):
    value = eval_formula(world, completion, {"x": 1}, touches_s)
    print(f"S(1,2)={completion.value('S', (1, 2))} -> exists-S at a1 = {value}")
