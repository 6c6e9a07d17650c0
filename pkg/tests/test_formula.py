import random

import pytest

from abduce.formula import (
    And,
    Atom,
    Equal,
    Exists,
    FormulaSyntaxError,
    HypothesisError,
    Not,
    Variable,
    contains_implies,
    formula_metrics,
    free_variables,
    parse_formula,
    parse_hypothesis,
    render_formula,
    validate_hypothesis,
)
from abduce.theory import builtin_theory

from conftest import random_formula


def v(name):
    return Variable(name)


class TestParse:
    def test_basic_conjunction(self):
        f = parse_formula("(and (P x) (not (Q x)))")
        assert f == And((Atom("P", (v("x"),)), Not(Atom("Q", (v("x"),)))))

    def test_whitespace_normalization(self):
        f = parse_formula("  (and\n  (P   x)\t(not (Q x)))  ")
        assert render_formula(f) == "(and (P x) (not (Q x)))"

    def test_and_arity_error(self):
        with pytest.raises(FormulaSyntaxError, match="at least 2"):
            parse_formula("(and (P x))")

    def test_or_arity_error(self):
        with pytest.raises(FormulaSyntaxError):
            parse_formula("(or (P x))")

    def test_nary_and(self):
        f = parse_formula("(and (P x) (Q x) (R x x))")
        assert isinstance(f, And) and len(f.children) == 3

    def test_implies_gated(self):
        with pytest.raises(FormulaSyntaxError, match="implies"):
            parse_formula("(implies (P x) (Q x))")
        f = parse_formula("(implies (P x) (Q x))", allow_implies=True)
        assert render_formula(f) == "(implies (P x) (Q x))"

    def test_malformed_parens(self):
        with pytest.raises(FormulaSyntaxError):
            parse_formula("(and (P x) (Q x)")
        with pytest.raises(FormulaSyntaxError):
            parse_formula("(P x))")

    def test_unknown_operator(self):
        with pytest.raises(FormulaSyntaxError, match="unknown"):
            parse_formula("(xor (P x) (Q x))")

    def test_wrong_atom_arity(self):
        with pytest.raises(FormulaSyntaxError, match="argument"):
            parse_formula("(P x y)")
        with pytest.raises(FormulaSyntaxError, match="argument"):
            parse_formula("(R x)")

    def test_constant_token_rejected(self):
        with pytest.raises(FormulaSyntaxError, match="object-constant"):
            parse_formula("(P a0)")

    def test_variable_outside_grammar_rejected(self):
        with pytest.raises(FormulaSyntaxError, match="outside"):
            parse_formula("(P v)")

    def test_equality(self):
        assert parse_formula("(= x y)") == Equal(v("x"), v("y"))

    def test_empty_and_trailing(self):
        with pytest.raises(FormulaSyntaxError):
            parse_formula("")
        with pytest.raises(FormulaSyntaxError, match="trailing"):
            parse_formula("(P x) (Q x)")


class TestRender:
    def test_canonical_examples(self):
        assert render_formula(And((Atom("P", (v("x"),)), Not(Atom("Q", (v("x"),)))))) == "(and (P x) (not (Q x)))"
        assert render_formula(Equal(v("x"), v("y"))) == "(= x y)"
        f = Exists(v("y"), And((Atom("R", (v("x"), v("y"))), Atom("P", (v("y"),)))))
        assert render_formula(f) == "(exists y (and (R x y) (P y)))"

    def test_round_trip_random(self):
        rng = random.Random(7)
        for _ in range(10_000):
            f = random_formula(rng, ("P", "Q", "R", "S"), max_depth=3)
            assert parse_formula(render_formula(f)) == f

    def test_round_trip_axioms(self):
        for t in ("T1", "T2", "T3", "T4", "T5", "T6", "T7"):
            ax = builtin_theory(t).axiom
            assert parse_formula(render_formula(ax), allow_implies=True) == ax


def independent_size(f):
    # transcription of the size bullets, written against the node kinds only
    if isinstance(f, Atom):
        return 1 + len(f.args)
    if isinstance(f, Equal):
        return 1 + 2
    if isinstance(f, Not):
        return 1 + independent_size(f.child)
    if hasattr(f, "children"):
        total = 1
        for c in f.children:
            total += independent_size(c)
        return total
    if hasattr(f, "lhs"):
        return 1 + independent_size(f.lhs) + independent_size(f.rhs)
    return 1 + 1 + independent_size(f.body)


def independent_depth(f):
    if isinstance(f, (Atom, Equal)):
        return 0
    if isinstance(f, Not):
        return independent_depth(f.child)
    if hasattr(f, "children"):
        return max(independent_depth(c) for c in f.children)
    if hasattr(f, "lhs"):
        return max(independent_depth(f.lhs), independent_depth(f.rhs))
    return 1 + independent_depth(f.body)


class TestMetrics:
    def test_worked_values(self):
        m = formula_metrics(parse_formula("(exists y (and (R x y) (P y)))"))
        assert m.ast_size == 8 and m.quantifier_depth == 1
        m = formula_metrics(parse_formula("(P x)"))
        assert m.ast_size == 2 and m.quantifier_depth == 0
        assert formula_metrics(parse_formula("(exists y (R x y))")).quantifier_depth == 1
        assert formula_metrics(parse_formula("(forall y (exists z (R y z)))")).quantifier_depth == 2
        assert formula_metrics(parse_formula("(= x y)")).ast_size == 3

    def test_matches_independent_count(self):
        rng = random.Random(11)
        for _ in range(2_000):
            f = random_formula(rng, ("P", "Q", "R", "S"), max_depth=3)
            m = formula_metrics(f)
            assert m.ast_size == independent_size(f)
            assert m.quantifier_depth == independent_depth(f)


class TestFreeVariables:
    def test_shadowing_innermost(self):
        f = parse_formula("(exists y (exists y (P y)))")
        assert free_variables(f) == frozenset()
        f = parse_formula("(and (P x) (exists y (exists y (R x y))))")
        assert free_variables(f) == {"x"}

    def test_free_y(self):
        assert free_variables(parse_formula("(P y)")) == {"y"}


class TestValidateHypothesis:
    def test_forbidden_predicate_t1(self):
        t1 = builtin_theory("T1")
        with pytest.raises(HypothesisError, match="forbidden"):
            parse_hypothesis("(not (Q x))", t1.allowed, t1.forbidden)

    def test_free_variable_not_x(self):
        with pytest.raises(HypothesisError, match="free-variable"):
            parse_hypothesis("(P y)", {"P"})

    def test_no_free_variable(self):
        with pytest.raises(HypothesisError, match="free-variable"):
            parse_hypothesis("(forall y (P y))", {"P"})

    def test_valid_under_t1(self):
        t1 = builtin_theory("T1")
        h = parse_hypothesis("(and (P x) (exists y (R x y)))", t1.allowed, t1.forbidden)
        assert h.formula == parse_formula("(and (P x) (exists y (R x y)))")

    def test_ab_rejected(self):
        f = parse_formula("(Ab x)")
        with pytest.raises(HypothesisError, match="Ab"):
            validate_hypothesis(f, {"P", "Q", "R", "S", "Ab"})

    def test_implies_rejected(self):
        f = parse_formula("(implies (P x) (P x))", allow_implies=True)
        assert contains_implies(f)
        with pytest.raises(HypothesisError, match="implication"):
            validate_hypothesis(f, {"P"})

    def test_prompt_example_formulas_accepted(self):
        # the syntactic illustrations shipped in the task prompts
        examples = [
            "(P x)",
            "(and (P x) (not (Q x)))",
            "(exists y (and (R x y) (not (P y))))",
            "(not (exists y (R x y)))",
            "(forall y (or (not (R x y)) (Q y)))",
            "(exists y (exists z (and (R x y) (R x z) (not (= y z)))))",
        ]
        for text in examples:
            h = parse_hypothesis(text, {"P", "Q", "R", "S"})
            assert free_variables(h.formula) == {"x"}
