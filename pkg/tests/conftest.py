import random

import pytest

from abduce.formula import (
    And,
    Atom,
    Equal,
    Exists,
    Forall,
    Formula,
    Not,
    Or,
    Variable,
    formula_metrics,
    free_variables,
    predicates_used,
)
from abduce.world import World

UNARY = ("P", "Q")
BINARY = ("R", "S")


def random_formula(rng: random.Random, allowed, max_depth: int = 3, env=("x",)) -> Formula:
    """One random grammar tree over `allowed` predicates and env variables."""
    allowed = sorted(allowed)
    unary = [p for p in allowed if p in UNARY]
    binary = [p for p in allowed if p in BINARY]
    leaf_kinds = []
    if unary:
        leaf_kinds.append("unary")
    if binary:
        leaf_kinds.append("binary")
    if len(env) >= 1:
        leaf_kinds.append("equal")

    def leaf():
        kind = rng.choice(leaf_kinds)
        if kind == "unary":
            return Atom(rng.choice(unary), (Variable(rng.choice(env)),))
        if kind == "binary":
            return Atom(rng.choice(binary), (Variable(rng.choice(env)), Variable(rng.choice(env))))
        return Equal(Variable(rng.choice(env)), Variable(rng.choice(env)))

    def build(depth, env):
        if depth <= 0 or rng.random() < 0.3:
            return leaf()
        kind = rng.choice(("not", "and", "or", "forall", "exists"))
        if kind == "not":
            return Not(build(depth - 1, env))
        if kind in ("and", "or"):
            k = rng.choice((2, 2, 3))
            children = tuple(build(depth - 1, env) for _ in range(k))
            return And(children) if kind == "and" else Or(children)
        var = rng.choice(("y", "z", "w"))
        body = build(depth - 1, tuple(set(env) | {var}))
        return Forall(Variable(var), body) if kind == "forall" else Exists(Variable(var), body)

    return build(max_depth, tuple(env))


def random_hypothesis_formula(rng: random.Random, allowed, max_ast: int = 15) -> Formula:
    """Random hypothesis: predicates within scope, free variables exactly {x}."""
    while True:
        f = random_formula(rng, allowed, max_depth=rng.choice((1, 2, 2, 3)))
        if free_variables(f) != {"x"}:
            continue
        if not predicates_used(f) <= set(allowed):
            continue
        if formula_metrics(f).ast_size > max_ast:
            continue
        return f


def random_world(
    rng: random.Random,
    n_range=(2, 6),
    max_unknowns: int = 8,
    allow_unary_unknowns: bool = True,
) -> World:
    n = rng.randint(*n_range)
    true = {}
    cells = {}
    for p in UNARY:
        cells[p] = list(range(n))
    for p in BINARY:
        cells[p] = [(i, j) for i in range(n) for j in range(n)]
    for p, pool in cells.items():
        count = rng.randint(0, len(pool))
        true[p] = frozenset(rng.sample(pool, count))
    pool = []
    for p, options in cells.items():
        if p in UNARY and not allow_unary_unknowns:
            continue
        pool.extend((p, a) for a in options)
    rng.shuffle(pool)
    budget = rng.randint(0, max_unknowns)
    unknown = {p: set() for p in cells}
    for p, a in pool[:budget]:
        unknown[p].add(a)
        true[p] = true[p] - {a}
    return World(n, true, unknown)


@pytest.fixture
def rng():
    return random.Random(20260809)
