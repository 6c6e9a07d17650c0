"""Finite relational worlds with known and unknown atoms.

A world has a domain a0..a(n-1) and, per predicate, a set of atoms known
true and a set of atoms whose truth value is unobserved.  Everything not
listed in either set is known false.  Worlds and completions are immutable;
evaluation is pure.  Sampling requires exclusive access to its rng.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random
from typing import Iterator, Mapping, Optional

from .formula import (
    And,
    Atom,
    BINARY_PREDICATES,
    Equal,
    Exists,
    Forall,
    Formula,
    Hypothesis,
    Implies,
    Not,
    Or,
    PREDICATES,
    UNARY_PREDICATES,
)

OBSERVABLE_PREDICATES = ("P", "Q", "R", "S")


class EnumerationCapError(RuntimeError):
    """Too many unknown atoms for exhaustive completion enumeration."""


class EvalError(ValueError):
    """Formula evaluation hit an unbound variable or missing context."""


def _as_atom_set(pred: str, atoms) -> frozenset:
    arity = PREDICATES[pred].arity
    out = set()
    for a in atoms:
        if arity == 1:
            out.add(int(a))
        else:
            i, j = a
            out.add((int(i), int(j)))
    return frozenset(out)


@dataclass(frozen=True, eq=False)
class World:
    """Compared with worlds_equivalent; hashed by identity so groundings cache."""

    n: int
    true_atoms: Mapping[str, frozenset] = field(default_factory=dict)
    unknown_atoms: Mapping[str, frozenset] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("domain size must be >= 1")
        true = {p: _as_atom_set(p, self.true_atoms.get(p, ())) for p in OBSERVABLE_PREDICATES}
        unk = {p: _as_atom_set(p, self.unknown_atoms.get(p, ())) for p in OBSERVABLE_PREDICATES}
        for p in OBSERVABLE_PREDICATES:
            if true[p] & unk[p]:
                raise ValueError(f"{p}: true and unknown atom sets overlap")
            for atoms in (true[p], unk[p]):
                for a in atoms:
                    idxs = (a,) if PREDICATES[p].arity == 1 else a
                    if any(i < 0 or i >= self.n for i in idxs):
                        raise ValueError(f"{p} atom {a} outside domain of size {self.n}")
        object.__setattr__(self, "true_atoms", true)
        object.__setattr__(self, "unknown_atoms", unk)

    def unknown_order(self) -> list[tuple[str, object]]:
        """All unknown atoms, sorted by predicate name then row-major index.

        This order underlies completion bit patterns and serialization.
        """
        out = []
        for p in sorted(OBSERVABLE_PREDICATES):
            if PREDICATES[p].arity == 1:
                out.extend((p, a) for a in sorted(self.unknown_atoms[p]))
            else:
                out.extend(
                    (p, a)
                    for a in sorted(self.unknown_atoms[p], key=lambda ij: ij[0] * self.n + ij[1])
                )
        return out

    def num_unknowns(self) -> int:
        return sum(len(v) for v in self.unknown_atoms.values())

    def elements(self) -> range:
        return range(self.n)


@dataclass(frozen=True, eq=False)
class Completion:
    """Truth values for exactly the unknown atoms of one world."""

    assignment: Mapping[tuple[str, object], bool]

    def __post_init__(self):
        object.__setattr__(self, "assignment", dict(self.assignment))

    def value(self, pred: str, atom) -> bool:
        return self.assignment[(pred, atom)]

    def _key(self):
        return tuple(sorted(self.assignment.items()))

    def __eq__(self, other):
        return isinstance(other, Completion) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


EMPTY_COMPLETION = Completion({})


def check_completion(world: World, completion: Completion) -> None:
    keys = set(completion.assignment)
    expected = set(world.unknown_order())
    if keys != expected:
        raise ValueError("completion keys do not match the world's unknown atoms")


@dataclass(frozen=True)
class AbnormalSet:
    members: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(int(m) for m in self.members))


@dataclass(frozen=True)
class DensityRanges:
    """Closed density interval per predicate; true count = max(1, floor(n^arity * rho))."""

    ranges: Mapping[str, tuple[float, float]]

    def __post_init__(self):
        rngs = {}
        for p, (lo, hi) in dict(self.ranges).items():
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"{p}: density interval [{lo}, {hi}] invalid")
            rngs[p] = (float(lo), float(hi))
        object.__setattr__(self, "ranges", rngs)


DENSITY_RANGES = {
    "full": DensityRanges(
        {"P": (0.20, 0.60), "Q": (0.20, 0.60), "R": (0.12, 0.25), "S": (0.08, 0.18)}
    ),
    "partial": DensityRanges(
        {"P": (0.20, 0.60), "Q": (0.20, 0.60), "R": (0.12, 0.25), "S": (0.08, 0.18)}
    ),
    "skeptical": DensityRanges(
        {"P": (0.40, 0.60), "Q": (0.20, 0.50), "R": (0.15, 0.30), "S": (0.10, 0.25)}
    ),
}

DOMAIN_SIZES = {"full": (9, 10, 11), "partial": (9, 10, 11), "skeptical": (10, 11, 12)}


# ---------------------------------------------------------------------------
# Evaluation


def eval_formula(
    world: World,
    completion: Optional[Completion],
    env: Mapping[str, int],
    f: Formula,
    ab_rule: Optional[Hypothesis] = None,
) -> bool:
    """Standard first-order satisfaction over the completed world.

    Quantifiers range over the full domain.  An atom is true if listed true,
    else its completion value if unknown, else false (closed world).  Ab(a)
    evaluates as the ab_rule formula instantiated at a.
    """
    if isinstance(f, Atom):
        if f.pred == "Ab":
            if ab_rule is None:
                raise EvalError("Ab encountered with no ab_rule")
            elem = _lookup(env, f.args[0].name)
            return eval_formula(world, completion, {"x": elem}, ab_rule.formula, None)
        elems = tuple(_lookup(env, v.name) for v in f.args)
        atom = elems[0] if len(elems) == 1 else elems
        if atom in world.true_atoms[f.pred]:
            return True
        if atom in world.unknown_atoms[f.pred]:
            if completion is None:
                raise EvalError(f"unknown atom {f.pred}{atom} needs a completion")
            return completion.value(f.pred, atom)
        return False
    if isinstance(f, Equal):
        return _lookup(env, f.left.name) == _lookup(env, f.right.name)
    if isinstance(f, Not):
        return not eval_formula(world, completion, env, f.child, ab_rule)
    if isinstance(f, And):
        return all(eval_formula(world, completion, env, c, ab_rule) for c in f.children)
    if isinstance(f, Or):
        return any(eval_formula(world, completion, env, c, ab_rule) for c in f.children)
    if isinstance(f, Implies):
        return (not eval_formula(world, completion, env, f.lhs, ab_rule)) or eval_formula(
            world, completion, env, f.rhs, ab_rule
        )
    if isinstance(f, (Forall, Exists)):
        results = (
            eval_formula(world, completion, {**env, f.var.name: e}, f.body, ab_rule)
            for e in world.elements()
        )
        return all(results) if isinstance(f, Forall) else any(results)
    raise TypeError(f"not a Formula: {f!r}")


def _lookup(env: Mapping[str, int], name: str) -> int:
    try:
        return env[name]
    except KeyError:
        raise EvalError(f"unbound variable {name!r}") from None


# ---------------------------------------------------------------------------
# Completion enumeration


def enumerate_completions(world: World, cap: int = 24) -> Iterator[Completion]:
    """Yield all 2^|unknowns| completions in deterministic bit-pattern order.

    Completion index i assigns atom j the value of bit j of i over
    world.unknown_order(), so the first completion is all-false and the last
    all-true.  Raises EnumerationCapError instead of silently truncating.
    """
    order = world.unknown_order()
    k = len(order)
    if k > cap:
        raise EnumerationCapError(f"{k} unknown atoms exceed the enumeration cap {cap}")
    for i in range(1 << k):
        yield Completion({order[j]: bool((i >> j) & 1) for j in range(k)})


# ---------------------------------------------------------------------------
# Sampling


def sample_complete_world(n_range, densities: DensityRanges, rng: Random) -> World:
    """Sample a fully observed world: n uniform over n_range; per predicate,
    rho uniform on its interval and max(1, floor(n^arity * rho)) atoms marked
    true without replacement."""
    sizes = list(n_range)
    if not sizes:
        raise ValueError("empty n_range")
    n = rng.choice(sizes)
    true: dict[str, frozenset] = {}
    for p in OBSERVABLE_PREDICATES:
        lo, hi = densities.ranges[p]
        rho = rng.uniform(lo, hi)
        arity = PREDICATES[p].arity
        total = n**arity
        count = min(total, max(1, int(total * rho)))
        if arity == 1:
            population = list(range(n))
        else:
            population = [(i, j) for i in range(n) for j in range(n)]
        true[p] = frozenset(rng.sample(population, count))
    return World(n, true, {})


def mask_world(
    world: World,
    unknown_rates: Mapping[str, float],
    rng: Random,
    mask_basis: str = "grid",
) -> tuple[World, dict[str, frozenset]]:
    """Move binary atoms of a complete world into its unknown sets.

    With mask_basis "grid" the per-predicate count is round(rate * n^2),
    with "true_count" it is round(rate * #true atoms); either way the masked
    cells are drawn uniformly from all n^2 ground atoms, so hidden-true and
    hidden-false atoms both occur.  Returns the masked world plus, per
    predicate, the masked atoms that were true (enough to reconstruct the
    pre-mask world).
    """
    if mask_basis not in ("grid", "true_count"):
        raise ValueError(f"unknown mask_basis {mask_basis!r}")
    n = world.n
    true = {p: world.true_atoms[p] for p in OBSERVABLE_PREDICATES}
    unknown = {p: world.unknown_atoms[p] for p in OBSERVABLE_PREDICATES}
    hidden: dict[str, frozenset] = {}
    for p in BINARY_PREDICATES:
        rate = float(unknown_rates.get(p, 0.0))
        if not (0.0 <= rate <= 1.0):
            raise ValueError(f"{p}: unknown rate {rate} outside [0, 1]")
        base = n * n if mask_basis == "grid" else len(true[p])
        count = min(n * n, round(rate * base))
        if count:
            population = [(i, j) for i in range(n) for j in range(n)]
            masked = frozenset(rng.sample(population, count))
            hidden[p] = true[p] & masked
            unknown[p] = unknown[p] | masked
            true[p] = true[p] - masked
    return World(n, true, unknown), hidden


def unmask_world(world: World, hidden: Mapping[str, frozenset]) -> World:
    """Reconstruct the complete pre-mask world from the hidden truth."""
    true = {
        p: world.true_atoms[p] | frozenset(hidden.get(p, ()))
        for p in OBSERVABLE_PREDICATES
    }
    return World(world.n, true, {})


def sample_world(
    n_range,
    densities: DensityRanges,
    unknown_rates: Mapping[str, float],
    rng: Random,
    mask_basis: str = "grid",
) -> World:
    """Sample one world and mask binary atoms into the unknown sets."""
    complete = sample_complete_world(n_range, densities, rng)
    masked, _ = mask_world(complete, unknown_rates, rng, mask_basis=mask_basis)
    return masked


def worlds_equivalent(w1: World, w2: World) -> bool:
    """Identical domain size and per-predicate true and unknown extensions."""
    if w1.n != w2.n:
        return False
    return all(
        w1.true_atoms[p] == w2.true_atoms[p] and w1.unknown_atoms[p] == w2.unknown_atoms[p]
        for p in OBSERVABLE_PREDICATES
    )
