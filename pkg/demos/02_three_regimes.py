"""The three observation regimes on a two-element micro-world.

Theory: P(x) and not Ab(x) -> Q(x)  ("P-objects normally have Q").
World:  P(a0), P(a1) known true; Q(a0) known false.

Full observation also fixes Q(a1)=false; the partial worlds leave Q(a1)
unknown, and the two regimes disagree about what that means.

Run:  python demos/02_three_regimes.py
"""

from abduce import (
    World,
    cost,
    custom_theory,
    eval_formula,
    opt_cost,
    parse_hypothesis,
    validity,
)

theory = custom_theory("(P x)", "(Q x)", allowed={"P", "Q"})

conj = parse_hypothesis("(and (P x) (not (Q x)))", {"P", "Q"})
all_p = parse_hypothesis("(P x)", {"P", "Q"})

# --- Full observation -------------------------------------------------------
full_world = World(2, {"P": {0, 1}, "Q": {1}})
verdict = validity("full", theory, [full_world], conj)
report = cost("full", theory, [full_world], conj)
print("[full] 'P but not Q' valid:", verdict.valid, "| cost:", report.total)
print("[full] free-Ab lower bound:", opt_cost("full", theory, full_world))

# --- Partial observation (existential completion) ---------------------------
# Q(a1) is unobserved.  a0 is forced abnormal (Q(a0) is known false), but a
# favorable completion sets Q(a1)=true, so a1 stays normal in the best case.
partial_world = World(2, {"P": {0, 1}}, {"Q": {1}})
verdict = validity("partial", theory, [partial_world], conj)
print("\n[partial] valid:", verdict.valid, "| witness completion:", verdict.witness.assignment)
print("[partial] best-case cost:", cost("partial", theory, [partial_world], conj).total)

# --- Skeptical (universal completion) ---------------------------------------
# Now every completion must satisfy the repaired theory.  The completion
# Q(a1)=false would force a1 abnormal, so 'P but not Q' still works (it
# marks a1 exactly then), and so does marking all P-objects; both pay the
# worst case of 2.
for name, alpha in (("'P but not Q'", conj), ("'all P'", all_p)):
    verdict = validity("skeptical", theory, [partial_world], alpha)
    worst = cost("skeptical", theory, [partial_world], alpha).total
    print(f"\n[skeptical] {name} valid: {verdict.valid} | worst-case cost: {worst}")

# An empty rule is skeptically invalid; the engine hands back the
# counterexample completion, which replays through the plain evaluator.
bottom = parse_hypothesis("(and (P x) (not (P x)))", {"P", "Q"})
verdict = validity("skeptical", theory, [partial_world], bottom)
print("\n[skeptical] empty rule valid:", verdict.valid)
print("counterexample completion:", verdict.witness.assignment)
print(
    "axiom under that completion:",
    eval_formula(partial_world, verdict.witness, {}, theory.axiom, ab_rule=bottom),
)

print("\nlower bounds:",
      "partial", opt_cost("partial", theory, partial_world),
      "| skeptical pointwise", opt_cost("skeptical", theory, partial_world),
      "| skeptical uniform", opt_cost("skeptical", theory, partial_world, variant="uniform"))
