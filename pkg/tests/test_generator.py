import random
from collections import Counter

import pytest

from abduce.engine import Regime, cost, opt_cost, validity
from abduce.formula import formula_metrics, free_variables, predicates_used, render_formula
from abduce.generator import (
    GenParams,
    GoldSampler,
    audit_instance,
    build_competitor_pool,
    cheater_pool,
    generate_holdouts,
    generate_instance,
    gold_mutants,
    holdout_seed,
    refine_gold,
    sample_gold,
    tier1_formulas,
    tier2_formulas,
    _AcceptedWorld,
    _EvalCache,
)
from abduce.theory import THEORY_IDS, builtin_theory
from abduce.world import World, worlds_equivalent

T1 = builtin_theory("T1")


class TestGoldSampler:
    def test_scope_and_size(self):
        rng = random.Random(3)
        sampler = GoldSampler()
        for tid in THEORY_IDS:
            spec = builtin_theory(tid)
            for _ in range(40):
                hyp, name = sampler.draw(spec, rng)
                m = formula_metrics(hyp.formula)
                assert 5 <= m.ast_size <= 30
                assert predicates_used(hyp.formula) <= spec.allowed
                assert free_variables(hyp.formula) == {"x"}

    def test_diversity_cap(self):
        rng = random.Random(9)
        sampler = GoldSampler(0.15)
        for _ in range(100):
            sample_gold(T1, rng, sampler)
        assert sampler.total == 100
        assert max(sampler.counts.values()) <= 15

    def test_no_q_in_t1_golds(self):
        rng = random.Random(5)
        for _ in range(50):
            hyp = sample_gold(T1, rng)
            assert "Q" not in predicates_used(hyp.formula)


class TestPools:
    def test_pool_size_and_scope(self):
        rng = random.Random(1)
        for tid in THEORY_IDS:
            spec = builtin_theory(tid)
            gold = sample_gold(spec, rng)
            pool = build_competitor_pool(spec, gold, rng)
            assert len(pool.entries) <= 30
            for hyp, tier in pool.entries:
                assert tier in ("tier1", "tier2", "mutant")
                assert predicates_used(hyp.formula) <= spec.allowed

    def test_t1_pool_excludes_q(self):
        rng = random.Random(2)
        gold = sample_gold(T1, rng)
        pool = build_competitor_pool(T1, gold, rng)
        for hyp, _ in pool.entries:
            assert "Q" not in predicates_used(hyp.formula)

    def test_mutant_count(self):
        rng = random.Random(4)
        gold = sample_gold(T1, rng)
        mutants = gold_mutants(gold, T1, rng, count=10)
        assert len(mutants) <= 10
        gold_text = render_formula(gold.formula)
        assert all(render_formula(m.formula) != gold_text for m in mutants)
        pool = build_competitor_pool(T1, gold, rng)
        assert sum(1 for _, t in pool.entries if t == "mutant") <= 10

    def test_tier1_contents(self):
        texts = {render_formula(h.formula) for h in tier1_formulas(T1)}
        assert "(P x)" in texts
        assert "(not (P x))" in texts
        assert "(R x x)" in texts
        assert "(exists y (R x y))" in texts
        assert "(or (P x) (not (P x)))" in texts

    def test_tier2_extensible(self):
        base = {render_formula(h.formula) for h in tier2_formulas(T1)}
        extended = {
            render_formula(h.formula)
            for h in tier2_formulas(T1, extra=("(and (P x) (R x x))",))
        }
        assert "(and (P x) (R x x))" in extended - base
        assert "(exists y (and (R x y) (P y)))" in base

    def test_cheaters_scope_filtered(self):
        for tid in THEORY_IDS:
            spec = builtin_theory(tid)
            for h in cheater_pool(spec):
                assert predicates_used(h.formula) <= spec.allowed


def tiny_instance(scenario="full", theory_id="T1", seed=3, **kw):
    params = GenParams(scenario=scenario, theory_id=theory_id, global_seed=seed, **kw)
    return params, generate_instance(params, index=0)


class TestGenerateInstance:
    def test_full_instance_passes_audit(self):
        params, rec = tiny_instance("full", "T1")
        assert audit_instance(rec, params) == []
        assert rec.scenario == "full" and rec.internal_id == "TH2"
        assert all(w.num_unknowns() == 0 for w in rec.train_worlds)

    def test_partial_instance_passes_audit(self):
        params, rec = tiny_instance("partial", "T3", seed=12)
        assert audit_instance(rec, params) == []
        assert any(w.num_unknowns() > 0 for w in rec.train_worlds)

    def test_skeptical_shares_domain_size(self):
        params, rec = tiny_instance("skeptical", "T6", seed=8, world_attempts=400)
        assert audit_instance(rec, params) == []
        sizes = {w.n for w in rec.train_worlds}
        assert len(sizes) == 1 and sizes <= {10, 11, 12}

    def test_gold_valid_and_cached_costs(self):
        params, rec = tiny_instance("full", "T4", seed=5)
        regime, theory = rec.regime, rec.theory
        assert validity(regime, theory, rec.train_worlds, rec.gold).valid
        for i, w in enumerate(rec.train_worlds):
            assert cost(regime, theory, [w], rec.gold).total == rec.train_gold_costs[i]
            assert opt_cost(regime, theory, w) == rec.train_opt_costs[i]

    def test_zero_survivors_on_acceptance(self):
        params, rec = tiny_instance("full", "T5", seed=21)
        final_round = rec.provenance["elimination_log"][-1]
        assert final_round["survivors"] == []

    def test_determinism(self):
        params1, rec1 = tiny_instance("full", "T1", seed=33)
        params2, rec2 = tiny_instance("full", "T1", seed=33)
        assert rec1.id == rec2.id
        assert render_formula(rec1.gold.formula) == render_formula(rec2.gold.formula)
        assert len(rec1.train_worlds) == len(rec2.train_worlds)
        for w1, w2 in zip(rec1.train_worlds, rec2.train_worlds):
            assert worlds_equivalent(w1, w2)

    def test_audit_catches_tampering(self):
        params, rec = tiny_instance("full", "T1", seed=3)
        from dataclasses import replace

        bad = replace(rec, train_gold_costs=tuple(c + 1 for c in rec.train_gold_costs))
        assert any("cached gold cost" in v for v in audit_instance(bad, params))


class TestRefineGold:
    def _accepted(self, params, rec):
        return [
            _AcceptedWorld(w, {}, o, g, o, g)
            for w, o, g in zip(rec.train_worlds, rec.train_opt_costs, rec.train_gold_costs)
        ]

    def test_fallback_to_seed(self):
        params, rec = tiny_instance("full", "T1", seed=3)
        rng = random.Random(0)
        cheaters = cheater_pool(rec.theory)
        refined = refine_gold(rec.theory, self._accepted(params, rec), rec.gold, params, rng, cheaters)
        # the refined gold is never worse than the seed under the selection key
        cache = _EvalCache(rec.regime, rec.theory, 24)
        seed_total = cache.total_cost(rec.train_worlds, rec.gold)
        new_total = cache.total_cost(rec.train_worlds, refined)
        assert new_total is not None and new_total <= seed_total

    def test_smaller_ast_wins_ties(self):
        params, rec = tiny_instance("full", "T1", seed=3)
        rng = random.Random(0)
        refined = refine_gold(rec.theory, self._accepted(params, rec), rec.gold, params, rng, [])
        cache = _EvalCache(rec.regime, rec.theory, 24)
        if render_formula(refined.formula) != render_formula(rec.gold.formula):
            same_cost = cache.total_cost(rec.train_worlds, refined) == cache.total_cost(
                rec.train_worlds, rec.gold
            )
            if same_cost:
                assert (
                    formula_metrics(refined.formula).ast_size
                    <= formula_metrics(rec.gold.formula).ast_size
                )

    def test_refined_instance_still_audits(self):
        params = GenParams(scenario="full", theory_id="T2", global_seed=17, refine=True)
        rec = generate_instance(params, index=0)
        assert audit_instance(rec, params) == []


class TestHoldouts:
    def test_seed_formula(self):
        import hashlib

        s = holdout_seed("data/abd.jsonl", "full_T1_s7_0003", 2, 7)
        payload = "data/abd.jsonl|full_T1_s7_0003|2|7".encode()
        assert s == int(hashlib.sha256(payload).hexdigest(), 16) % (1 << 31)
        assert 0 <= s < 2**31

    def test_deterministic_regeneration(self):
        params, rec = tiny_instance("full", "T1", seed=3)
        h1 = generate_holdouts(rec, "a.jsonl", 3, params=params)
        h2 = generate_holdouts(rec, "a.jsonl", 3, params=params)
        assert h1.holdout_available == h2.holdout_available
        for w1, w2 in zip(h1.holdout_worlds, h2.holdout_worlds):
            assert worlds_equivalent(w1, w2)

    def test_different_path_changes_worlds(self):
        params, rec = tiny_instance("full", "T1", seed=3)
        h1 = generate_holdouts(rec, "a.jsonl", 3, params=params)
        h2 = generate_holdouts(rec, "b.jsonl", 3, params=params)
        if h1.holdout_available and h2.holdout_available:
            assert not all(
                worlds_equivalent(w1, w2)
                for w1, w2 in zip(h1.holdout_worlds, h2.holdout_worlds)
            )

    def test_holdout_filters(self):
        params, rec = tiny_instance("full", "T2", seed=11)
        held = generate_holdouts(rec, "c.jsonl", 11, params=params)
        if not held.holdout_available:
            pytest.skip("instance drew no holdouts at this seed")
        assert len(held.holdout_worlds) == params.holdout_count
        lo, hi = min(rec.train_gold_costs), max(rec.train_gold_costs)
        gaps = [g - o for g, o in zip(rec.train_gold_costs, rec.train_opt_costs)]
        for hw, opt, gc in zip(held.holdout_worlds, held.holdout_opt_costs, held.holdout_gold_costs):
            assert not any(worlds_equivalent(hw, tw) for tw in rec.train_worlds)
            assert validity(rec.regime, rec.theory, [hw], rec.gold).valid
            assert lo <= gc <= hi
            assert min(gaps) <= gc - opt <= max(gaps)
        assert audit_instance(held, params) == []
