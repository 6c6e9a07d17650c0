"""Exact validity, exception costs, free-Ab lower bounds, and gaps.

The default rule forall x (A(x) and not Ab(x) -> C(x)) grounds, per domain
element, to (not A_a) or alpha_a or C_a, where only subterms touching
unknown atoms survive constant folding.  The residual expressions partition
the unknown atoms into independent components, and every query below is an
exact sweep over component truth tables:

  full       A, C, alpha are constants; direct counting.
  partial    some completion satisfies all grounded axioms; best-case cost.
  skeptical  every completion satisfies them; worst-case cost.

The free-Ab lower bound exploits that Ab(a) occurs in exactly one grounded
axiom, positively: the cheapest abnormal set under any fixed completion is
exactly the set of elements whose default is violated.  The naive oracle
(oracle module) rechecks all of this by literal enumeration.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .formula import (
    And,
    Atom,
    Equal,
    Exists,
    Forall,
    Formula,
    Hypothesis,
    Implies,
    Not,
    Or,
    predicates_used,
)
from .theory import TheorySpec
from .world import Completion, EnumerationCapError, World

DEFAULT_ENUMERATION_CAP = 24


class Regime(enum.Enum):
    FULL = "full"
    PARTIAL = "partial"
    SKEPTICAL = "skeptical"

    @classmethod
    def parse(cls, value) -> "Regime":
        if isinstance(value, Regime):
            return value
        return cls(str(value).lower())


class ScopeError(ValueError):
    """Hypothesis uses predicates outside the theory's allowed set."""


class InvalidHypothesisError(ValueError):
    """Cost requested for a hypothesis that is not valid under the regime."""


class RegimeMismatchError(ValueError):
    """Cost and lower-bound inputs were computed under different regimes."""


@dataclass(frozen=True)
class EngineVerdict:
    valid: bool
    per_world_valid: tuple[bool, ...]
    witness: Optional[Completion] = None
    witness_world: Optional[int] = None


@dataclass(frozen=True)
class OptReport:
    regime: Regime
    per_world: tuple[int, ...]
    total: int
    variant: str = "pointwise"


@dataclass(frozen=True)
class CostReport:
    regime: Regime
    per_world_cost: tuple[int, ...]
    total: int
    opt_per_world: Optional[tuple[int, ...]] = None
    opt_total: Optional[int] = None
    gap_total: Optional[int] = None
    gap_normalized: Optional[float] = None
    gold_cost: Optional[int] = None
    gap_gold_normalized: Optional[float] = None


# ---------------------------------------------------------------------------
# Grounded expressions with constant folding


class _GExpr:
    __slots__ = ("support",)


class _GConst(_GExpr):
    __slots__ = ("value",)

    def __init__(self, value: bool):
        self.value = value
        self.support = frozenset()


_GTRUE = _GConst(True)
_GFALSE = _GConst(False)


class _GUnk(_GExpr):
    __slots__ = ("index",)

    def __init__(self, index: int):
        self.index = index
        self.support = frozenset((index,))


class _GNot(_GExpr):
    __slots__ = ("child",)

    def __init__(self, child: _GExpr):
        self.child = child
        self.support = child.support


class _GAnd(_GExpr):
    __slots__ = ("children",)

    def __init__(self, children: tuple[_GExpr, ...]):
        self.children = children
        self.support = frozenset().union(*(c.support for c in children))


class _GOr(_GExpr):
    __slots__ = ("children",)

    def __init__(self, children: tuple[_GExpr, ...]):
        self.children = children
        self.support = frozenset().union(*(c.support for c in children))


def _g_not(c: _GExpr) -> _GExpr:
    if isinstance(c, _GConst):
        return _GFALSE if c.value else _GTRUE
    if isinstance(c, _GNot):
        return c.child
    return _GNot(c)


def _g_and(children) -> _GExpr:
    kept = []
    for c in children:
        if isinstance(c, _GConst):
            if not c.value:
                return _GFALSE
        else:
            kept.append(c)
    if not kept:
        return _GTRUE
    if len(kept) == 1:
        return kept[0]
    return _GAnd(tuple(kept))


def _g_or(children) -> _GExpr:
    kept = []
    for c in children:
        if isinstance(c, _GConst):
            if c.value:
                return _GTRUE
        else:
            kept.append(c)
    if not kept:
        return _GFALSE
    if len(kept) == 1:
        return kept[0]
    return _GOr(tuple(kept))


def _ground(f: Formula, world: World, env: dict, unk_index: dict) -> _GExpr:
    """Ground a formula (no Ab) at a concrete environment, folding knowns."""
    if isinstance(f, Atom):
        elems = tuple(env[v.name] for v in f.args)
        atom = elems[0] if len(elems) == 1 else elems
        if atom in world.true_atoms[f.pred]:
            return _GTRUE
        idx = unk_index.get((f.pred, atom))
        if idx is not None:
            return _GUnk(idx)
        return _GFALSE
    if isinstance(f, Equal):
        return _GTRUE if env[f.left.name] == env[f.right.name] else _GFALSE
    if isinstance(f, Not):
        return _g_not(_ground(f.child, world, env, unk_index))
    if isinstance(f, And):
        kept = []
        for c in f.children:
            g = _ground(c, world, env, unk_index)
            if isinstance(g, _GConst):
                if not g.value:
                    return _GFALSE
            else:
                kept.append(g)
        return _g_and(kept) if kept else _GTRUE
    if isinstance(f, Or):
        kept = []
        for c in f.children:
            g = _ground(c, world, env, unk_index)
            if isinstance(g, _GConst):
                if g.value:
                    return _GTRUE
            else:
                kept.append(g)
        return _g_or(kept) if kept else _GFALSE
    if isinstance(f, Implies):
        return _g_or([_g_not(_ground(f.lhs, world, env, unk_index)), _ground(f.rhs, world, env, unk_index)])
    if isinstance(f, (Forall, Exists)):
        combine, absorb = (_g_and, False) if isinstance(f, Forall) else (_g_or, True)
        kept = []
        for e in world.elements():
            g = _ground(f.body, world, {**env, f.var.name: e}, unk_index)
            if isinstance(g, _GConst):
                if g.value is absorb:
                    return _GTRUE if absorb else _GFALSE
            else:
                kept.append(g)
        return combine(kept) if kept else (_GFALSE if absorb else _GTRUE)
    raise TypeError(f"not a groundable Formula: {f!r}")


@dataclass(frozen=True, eq=False)
class _WorldGrounding:
    world: World
    order: tuple
    index: dict
    antecedent: tuple[_GExpr, ...]
    consequent: tuple[_GExpr, ...]
    violation: tuple[_GExpr, ...]


# Closed-world fast path: on a fully observed world an Ab-free formula
# evaluates to a boolean tensor with one axis per open variable (x as axis
# 0, each quantifier adding a trailing axis), so the full regime never
# touches the grounding recursion.


@lru_cache(maxsize=4096)
def _world_arrays(world: World) -> dict:
    n = world.n
    out = {}
    for p in ("P", "Q"):
        vec = np.zeros(n, dtype=bool)
        for a in world.true_atoms[p]:
            vec[a] = True
        out[p] = vec
    for p in ("R", "S"):
        mat = np.zeros((n, n), dtype=bool)
        for i, j in world.true_atoms[p]:
            mat[i, j] = True
        out[p] = mat
    return out


def _eval_closed(f: Formula, world: World, arrays: dict, axes: dict, depth: int) -> np.ndarray:
    shape = (world.n,) * depth

    def expand(values: np.ndarray, axis: int) -> np.ndarray:
        view = values.reshape((1,) * axis + (world.n,) + (1,) * (depth - axis - 1))
        return np.broadcast_to(view, shape)

    if isinstance(f, Atom):
        if len(f.args) == 1:
            return expand(arrays[f.pred], axes[f.args[0].name])
        i = axes[f.args[0].name]
        j = axes[f.args[1].name]
        idx_i = np.arange(world.n).reshape((1,) * i + (world.n,) + (1,) * (depth - i - 1))
        idx_j = np.arange(world.n).reshape((1,) * j + (world.n,) + (1,) * (depth - j - 1))
        return np.broadcast_to(arrays[f.pred][idx_i, idx_j], shape)
    if isinstance(f, Equal):
        i, j = axes[f.left.name], axes[f.right.name]
        idx_i = np.arange(world.n).reshape((1,) * i + (world.n,) + (1,) * (depth - i - 1))
        idx_j = np.arange(world.n).reshape((1,) * j + (world.n,) + (1,) * (depth - j - 1))
        return np.broadcast_to(idx_i == idx_j, shape)
    if isinstance(f, Not):
        return ~_eval_closed(f.child, world, arrays, axes, depth)
    if isinstance(f, And):
        out = _eval_closed(f.children[0], world, arrays, axes, depth)
        for c in f.children[1:]:
            out = out & _eval_closed(c, world, arrays, axes, depth)
        return out
    if isinstance(f, Or):
        out = _eval_closed(f.children[0], world, arrays, axes, depth)
        for c in f.children[1:]:
            out = out | _eval_closed(c, world, arrays, axes, depth)
        return out
    if isinstance(f, Implies):
        return ~_eval_closed(f.lhs, world, arrays, axes, depth) | _eval_closed(
            f.rhs, world, arrays, axes, depth
        )
    if isinstance(f, (Forall, Exists)):
        inner_axes = {**axes, f.var.name: depth}
        body = _eval_closed(f.body, world, arrays, inner_axes, depth + 1)
        return body.all(axis=-1) if isinstance(f, Forall) else body.any(axis=-1)
    raise TypeError(f"not a closed-world Formula: {f!r}")


@lru_cache(maxsize=16384)
def closed_world_extension(world: World, formula: Formula) -> np.ndarray:
    """Boolean vector over the domain: which elements satisfy the Ab-free
    formula (free variable x) under closed-world semantics."""
    arr = _eval_closed(formula, world, _world_arrays(world), {"x": 0}, 1)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=4096)
def _closed_violations(world: World, theory: TheorySpec) -> np.ndarray:
    ante = closed_world_extension(world, theory.antecedent)
    cons = closed_world_extension(world, theory.consequent)
    arr = ante & ~cons
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=2048)
def _world_grounding(world: World, theory: TheorySpec) -> _WorldGrounding:
    order = tuple(world.unknown_order())
    index = {atom: i for i, atom in enumerate(order)}
    ante, cons, viol = [], [], []
    for a in world.elements():
        ga = _ground(theory.antecedent, world, {"x": a}, index)
        gc = _ground(theory.consequent, world, {"x": a}, index)
        ante.append(ga)
        cons.append(gc)
        viol.append(_g_and([ga, _g_not(gc)]))
    return _WorldGrounding(world, order, index, tuple(ante), tuple(cons), tuple(viol))


@lru_cache(maxsize=16384)
def _alpha_grounding(world: World, alpha_formula: Formula) -> tuple[_GExpr, ...]:
    order = tuple(world.unknown_order())
    index = {atom: i for i, atom in enumerate(order)}
    return tuple(_ground(alpha_formula, world, {"x": a}, index) for a in world.elements())


def clear_caches() -> None:
    _world_grounding.cache_clear()
    _alpha_grounding.cache_clear()
    _bit_column.cache_clear()
    _world_arrays.cache_clear()
    closed_world_extension.cache_clear()
    _closed_violations.cache_clear()


# ---------------------------------------------------------------------------
# Truth tables over components of shared unknown atoms


@lru_cache(maxsize=512)
def _bit_column(k: int, pos: int) -> np.ndarray:
    return ((np.arange(1 << k, dtype=np.uint32) >> pos) & 1).astype(bool)


def _table(expr: _GExpr, var_pos: dict, k: int, memo: dict) -> np.ndarray:
    key = id(expr)
    got = memo.get(key)
    if got is not None:
        return got
    if isinstance(expr, _GConst):
        out = np.full(1 << k, expr.value, dtype=bool)
    elif isinstance(expr, _GUnk):
        out = _bit_column(k, var_pos[expr.index])
    elif isinstance(expr, _GNot):
        out = ~_table(expr.child, var_pos, k, memo)
    elif isinstance(expr, _GAnd):
        out = _table(expr.children[0], var_pos, k, memo).copy()
        for c in expr.children[1:]:
            out &= _table(c, var_pos, k, memo)
    elif isinstance(expr, _GOr):
        out = _table(expr.children[0], var_pos, k, memo).copy()
        for c in expr.children[1:]:
            out |= _table(c, var_pos, k, memo)
    else:
        raise TypeError(expr)
    memo[key] = out
    return out


class _Component:
    __slots__ = ("vars", "constraints", "costs")

    def __init__(self):
        self.vars: set[int] = set()
        self.constraints: list[_GExpr] = []
        self.costs: list[_GExpr] = []


def _split_components(constraints: Sequence[_GExpr], costs: Sequence[_GExpr]) -> tuple[list[_Component], int, bool]:
    """Group residual expressions by shared unknown atoms.

    Returns (components, constant_cost, constant_feasible): constant-true
    cost expressions contribute to constant_cost; a constant-false
    constraint makes the whole instance infeasible.
    """
    parent: dict[int, int] = {}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    exprs = [(e, True) for e in constraints] + [(e, False) for e in costs]
    constant_cost = 0
    feasible = True
    live = []
    for e, is_constraint in exprs:
        if isinstance(e, _GConst):
            if is_constraint:
                if not e.value:
                    feasible = False
            elif e.value:
                constant_cost += 1
            continue
        live.append((e, is_constraint))
        it = iter(e.support)
        first = next(it)
        parent.setdefault(first, first)
        for v in it:
            parent.setdefault(v, v)
            union(first, v)

    groups: dict[int, _Component] = {}
    for e, is_constraint in live:
        root = find(next(iter(e.support)))
        comp = groups.get(root)
        if comp is None:
            comp = groups[root] = _Component()
        comp.vars |= e.support
        (comp.constraints if is_constraint else comp.costs).append(e)
    return list(groups.values()), constant_cost, feasible


def _component_layout(comp: _Component) -> tuple[dict, int]:
    ordered = sorted(comp.vars)
    return {v: i for i, v in enumerate(ordered)}, len(ordered)


def _assignment_from_index(comp: _Component, idx: int) -> dict[int, bool]:
    ordered = sorted(comp.vars)
    return {v: bool((idx >> i) & 1) for i, v in enumerate(ordered)}


def _check_cap(world: World, cap: int) -> None:
    k = world.num_unknowns()
    if k > cap:
        raise EnumerationCapError(f"{k} unknown atoms exceed the enumeration cap {cap}")


def _axiom_exprs(world: World, theory: TheorySpec, alpha: Hypothesis) -> list[_GExpr]:
    g = _world_grounding(world, theory)
    al = _alpha_grounding(world, alpha.formula)
    return [_g_or([_g_not(g.antecedent[a]), al[a], g.consequent[a]]) for a in world.elements()]


def check_scope(theory: TheorySpec, alpha: Hypothesis) -> None:
    used = predicates_used(alpha.formula)
    bad = sorted((used & theory.forbidden) | (used - theory.allowed))
    if bad:
        raise ScopeError(f"hypothesis uses predicate(s) outside the theory scope: {', '.join(bad)}")


# ---------------------------------------------------------------------------
# Validity


def validity(
    regime,
    theory: TheorySpec,
    worlds: Sequence[World],
    alpha: Hypothesis,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> EngineVerdict:
    """Decide per-world and overall validity; see the module docstring.

    The witness is a satisfying completion of the first world (partial,
    valid with unknowns) or a counterexample completion of the first
    invalid world (skeptical).
    """
    regime = Regime.parse(regime)
    check_scope(theory, alpha)
    per_world = []
    witness = None
    witness_world = None
    first_partial_witness = None
    for wi, world in enumerate(worlds):
        if regime is Regime.FULL:
            if world.num_unknowns():
                raise ValueError("full regime requires a fully observed world")
            violations = _closed_violations(world, theory)
            marked = closed_world_extension(world, alpha.formula)
            valid_w = bool((~violations | marked).all())
        elif regime is Regime.PARTIAL:
            _check_cap(world, cap)
            comps, _, feasible = _split_components(_axiom_exprs(world, theory, alpha), [])
            parts: dict[int, bool] = {}
            if feasible:
                for comp in comps:
                    var_pos, k = _component_layout(comp)
                    memo: dict = {}
                    feas = np.ones(1 << k, dtype=bool)
                    for e in comp.constraints:
                        feas &= _table(e, var_pos, k, memo)
                    hit = int(np.argmax(feas))
                    if not feas[hit]:
                        feasible = False
                        break
                    parts.update(_assignment_from_index(comp, hit))
            valid_w = feasible
            if valid_w and wi == 0:
                order = world.unknown_order()
                first_partial_witness = Completion(
                    {atom: parts.get(i, False) for i, atom in enumerate(order)}
                )
        else:
            _check_cap(world, cap)
            valid_w = True
            for e in _axiom_exprs(world, theory, alpha):
                if isinstance(e, _GConst):
                    if e.value:
                        continue
                    bad_idx, bad_vars = 0, []
                else:
                    ordered = sorted(e.support)
                    var_pos = {v: i for i, v in enumerate(ordered)}
                    tbl = _table(e, var_pos, len(ordered), {})
                    miss = int(np.argmin(tbl))
                    if tbl[miss]:
                        continue
                    bad_idx, bad_vars = miss, ordered
                valid_w = False
                if witness is None:
                    order = world.unknown_order()
                    assign = {v: bool((bad_idx >> i) & 1) for i, v in enumerate(bad_vars)}
                    witness = Completion({atom: assign.get(i, False) for i, atom in enumerate(order)})
                    witness_world = wi
                break
        per_world.append(valid_w)
    overall = all(per_world)
    if regime is Regime.PARTIAL and overall and first_partial_witness is not None:
        witness, witness_world = first_partial_witness, 0
    return EngineVerdict(overall, tuple(per_world), witness, witness_world)


# ---------------------------------------------------------------------------
# Costs


def cost(
    regime,
    theory: TheorySpec,
    worlds: Sequence[World],
    alpha: Hypothesis,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> CostReport:
    """Abnormality counts for a valid hypothesis (error otherwise).

    Full counts directly; partial takes the best case over completions that
    satisfy the repaired theory; skeptical takes the worst case over all
    completions.
    """
    regime = Regime.parse(regime)
    verdict = validity(regime, theory, worlds, alpha, cap=cap)
    if not verdict.valid:
        bad = [i for i, ok in enumerate(verdict.per_world_valid) if not ok]
        raise InvalidHypothesisError(f"hypothesis is invalid on world(s) {bad}; cost is undefined")
    per_world = []
    for world in worlds:
        if regime is Regime.FULL:
            per_world.append(int(closed_world_extension(world, alpha.formula).sum()))
            continue
        al = _alpha_grounding(world, alpha.formula)
        if regime is Regime.PARTIAL:
            comps, const_cost, feasible = _split_components(_axiom_exprs(world, theory, alpha), al)
        else:
            comps, const_cost, feasible = _split_components([], al)
        assert feasible
        total_w = const_cost
        for comp in comps:
            var_pos, k = _component_layout(comp)
            memo: dict = {}
            counts = np.zeros(1 << k, dtype=np.int32)
            for e in comp.costs:
                counts += _table(e, var_pos, k, memo)
            if comp.constraints:
                feas = np.ones(1 << k, dtype=bool)
                for e in comp.constraints:
                    feas &= _table(e, var_pos, k, memo)
                counts = counts[feas]
            total_w += int(counts.min() if regime is Regime.PARTIAL else counts.max())
        per_world.append(total_w)
    return CostReport(regime, tuple(per_world), sum(per_world))


def opt_cost(
    regime,
    theory: TheorySpec,
    world: World,
    variant: str = "pointwise",
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> int:
    """Free-Ab lower bound for one world.

    With Ab assigned freely, the cheapest abnormal set under a fixed
    completion is the set of elements whose default is violated, so the
    bound reduces to counting violations: minimized over completions
    (partial), maximized (skeptical pointwise), or counted per element
    where a violating completion exists (skeptical uniform).
    """
    regime = Regime.parse(regime)
    if variant not in ("pointwise", "uniform"):
        raise ValueError(f"unknown opt_cost variant {variant!r}")
    if regime is Regime.FULL:
        if world.num_unknowns():
            raise ValueError("full regime requires a fully observed world")
        return int(_closed_violations(world, theory).sum())
    g = _world_grounding(world, theory)
    _check_cap(world, cap)
    if regime is Regime.SKEPTICAL and variant == "uniform":
        # Elements with some violating completion must be abnormal under a
        # completion-independent Ab; the rest never need to be.
        forced = 0
        for e in g.violation:
            if isinstance(e, _GConst):
                forced += 1 if e.value else 0
            else:
                ordered = sorted(e.support)
                var_pos = {v: i for i, v in enumerate(ordered)}
                if bool(_table(e, var_pos, len(ordered), {}).any()):
                    forced += 1
        return forced
    comps, const_cost, _ = _split_components([], g.violation)
    total = const_cost
    for comp in comps:
        var_pos, k = _component_layout(comp)
        memo: dict = {}
        counts = np.zeros(1 << k, dtype=np.int32)
        for e in comp.costs:
            counts += _table(e, var_pos, k, memo)
        total += int(counts.min() if regime is Regime.PARTIAL else counts.max())
    return total


def opt_costs(
    regime,
    theory: TheorySpec,
    worlds: Sequence[World],
    variant: str = "pointwise",
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> OptReport:
    regime = Regime.parse(regime)
    per = tuple(opt_cost(regime, theory, w, variant=variant, cap=cap) for w in worlds)
    return OptReport(regime, per, sum(per), variant)


def gaps(
    costs: CostReport,
    opts: OptReport,
    gold: Optional[Hypothesis] = None,
    theory: Optional[TheorySpec] = None,
    worlds: Optional[Sequence[World]] = None,
    gold_costs: Optional[Sequence[int]] = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> CostReport:
    """Assemble the complete cost report: gaps and optional gold margin.

    gold_costs (per-world, same regime) may be supplied precomputed;
    otherwise a gold hypothesis plus theory and worlds computes them here.
    Negative gold margins mean the hypothesis beats the planted rule.
    """
    if costs.regime != opts.regime:
        raise RegimeMismatchError(f"cost regime {costs.regime} != opt regime {opts.regime}")
    if len(costs.per_world_cost) != len(opts.per_world):
        raise RegimeMismatchError("cost and opt reports cover different world counts")
    n_worlds = len(costs.per_world_cost)
    gap_total = costs.total - opts.total
    gold_total = None
    gap_gold_norm = None
    if gold_costs is not None:
        gold_total = int(sum(gold_costs))
    elif gold is not None:
        if theory is None or worlds is None:
            raise ValueError("computing a gold cost needs the theory and worlds")
        gold_total = cost(costs.regime, theory, worlds, gold, cap=cap).total
    if gold_total is not None:
        gap_gold_norm = (costs.total - gold_total) / n_worlds
    return CostReport(
        regime=costs.regime,
        per_world_cost=costs.per_world_cost,
        total=costs.total,
        opt_per_world=opts.per_world,
        opt_total=opts.total,
        gap_total=gap_total,
        gap_normalized=gap_total / n_worlds,
        gold_cost=gold_total,
        gap_gold_normalized=gap_gold_norm,
    )
