import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proofsts.formula import FALSE, And, Atom, Const, Eq, Meta, Not, RoleApp, Sort, parse_formula, print_formula
from proofsts.lexicon import Axiom, Lexicon, RelationKind
from proofsts.oracle import entails_bounded, gen_pair, satisfiable_bounded
from proofsts.prover import (
    RULES,
    BidirectionalResult,
    DirectionResult,
    ProofState,
    ProofTrace,
    ProverConfig,
    Status,
    decompose_goal,
    decompose_premises,
    match_subgoal,
    prove_direction,
    prove_negation,
    run_pipeline,
    skip_unproved,
)

from conftest import isa, lexicon, rel

C = Const("c", Sort.ENTITY)


def pool(state):
    return {p.label: print_formula(state.resolve(p.formula)) for p in state.premises}


def goals(state):
    return {g.label: print_formula(state.resolve(g.formula)) for g in state.goals}


class TestDecomposePremises:
    def test_existential_conjunction(self, entailment_pair):
        a, b = entailment_pair
        state = decompose_premises(ProofState.initial(a, b))
        assert pool(state) == {
            "P2": "man(x1)",
            "P3": "sing(e1)",
            "P4": "subj(e1) = x1",
            "P5": "bar(x2)",
            "P6": "in(e1, x2)",
        }
        assert [s.rule for s in state.trace.steps] == ["exists_elim", "and_elim"]

    def test_atoms_are_a_fixpoint(self):
        state = ProofState.initial(parse_formula("p(c)"), parse_formula("p(c)"))
        decompose_premises(state)
        assert pool(state) == {"P0": "p(c)"}
        assert len(state.trace) == 0

    def test_adverb_premise(self, contradiction_pair):
        _, loud = contradiction_pair
        state = decompose_premises(ProofState.initial(loud, FALSE))
        assert sorted(pool(state).values()) == ["loudly(e1)", "man(x1)", "sing(e1)", "subj(e1) = x1"]


class TestDecomposeGoal:
    def test_existential_goal_gives_metavariable_subgoals(self, entailment_pair):
        a, b = entailment_pair
        state = decompose_goal(ProofState.initial(a, b))
        gs = [state.resolve(g.formula) for g in state.goals]
        assert [g.pred if isinstance(g, Atom) else "=" for g in gs] == ["man", "sing", "="]
        assert all(isinstance(t, Meta) for g in gs[:2] for t in g.args)
        assert [g.label for g in state.goals] == ["G2", "G3", "G4"]

    def test_atomic_goal_unchanged(self):
        state = decompose_goal(ProofState.initial(parse_formula("p(c)"), parse_formula("p(c)")))
        assert goals(state) == {"G0": "p(c)"}

    def test_negated_goal_moves_body_to_premises(self):
        state = ProofState.initial(parse_formula("q(c)"), parse_formula("~p(c)"))
        decompose_goal(state)
        assert goals(state) == {"G1": "False"}
        assert "p(c)" in pool(state).values()
        assert state.trace.steps[0].rule == "neg_intro"


class TestMatchSubgoal:
    def _state(self, premise, conclusion):
        state = ProofState.initial(parse_formula(premise), parse_formula(conclusion))
        decompose_premises(state)
        decompose_goal(state)
        return state

    def test_binds_metavariable(self, entailment_pair):
        a, b = entailment_pair
        state = decompose_goal(decompose_premises(ProofState.initial(a, b)))
        delta = match_subgoal(state, "G2")
        assert delta is not None
        assert [print_formula(Atom("x", (v,))) for v in delta.values()] == ["x(x1)"]
        assert "G2" not in goals(state)
        assert state.trace.steps[-1].rule == "match"

    def test_no_matching_premise(self):
        state = self._state(
            "exists e1 x1 . man(x1) & sing(e1) & subj(e1) = x1",
            "exists x1 . bar(x1)",
        )
        assert match_subgoal(state, state.goals[0].label) is None
        assert len(state.goals) == 1

    def test_ground_match_empty_binding(self):
        state = self._state("p(c)", "p(c)")
        assert match_subgoal(state, "G0") == {}
        assert state.goals == []

    def test_equality_rewrite(self):
        state = self._state(
            "exists e1 x1 . run(e1) & subj(e1) = x1 & dog(x1)",
            "exists e1 . run(e1) & dog(subj(e1))",
        )
        for g in list(state.goals):
            assert match_subgoal(state, g.label) is not None
        assert "eq_elim" in [s.rule for s in state.trace.steps]


class TestProveDirection:
    def test_forward_proved(self, entailment_pair):
        r = prove_direction(*entailment_pair)
        assert r.status is Status.PROVED
        assert r.axioms_used == [] and r.skipped_subgoals == []
        assert (r.subgoal_stats.total_subgoals, r.subgoal_stats.proved_before_injection) == (3, 3)

    def test_backward_fails_on_bar_and_in(self, entailment_pair):
        a, b = entailment_pair
        r = prove_direction(b, a)
        assert r.status is Status.FAILED
        open_goals = sorted(r.labels[g] for g in r.open_goals)
        assert [g.split("(")[0] for g in open_goals] == ["bar", "in"]
        assert (r.subgoal_stats.proved_before_injection, r.subgoal_stats.total_subgoals) == (3, 5)

    def test_identity_single_match(self):
        r = prove_direction(parse_formula("p(c)"), parse_formula("p(c)"))
        assert r.status is Status.PROVED
        assert [s.rule for s in r.trace.steps] == ["match"]

    def test_supplied_axiom_is_used(self, hypernym_pair):
        ax = Axiom.build("man", "person", RelationKind.HYPERNYM, 0.5)
        r = prove_direction(*hypernym_pair, axioms=[ax])
        assert r.status is Status.PROVED_WITH_AXIOMS
        assert r.axioms_used == [ax]
        rules = [s.rule for s in r.trace.steps]
        assert rules[rules.index("axiom") + 1] == "imp_elim"

    def test_unused_axiom_not_reported(self, entailment_pair):
        ax = Axiom.build("bar", "pub", RelationKind.SYNONYM, 1.0)
        r = prove_direction(*entailment_pair, axioms=[ax])
        assert r.status is Status.PROVED and r.axioms_used == []

    def test_step_budget(self, entailment_pair):
        r = prove_direction(*entailment_pair, config=ProverConfig(step_budget=2))
        assert r.status is Status.FAILED
        assert len(r.trace) == 3


class TestProveNegation:
    def test_contradiction(self, contradiction_pair):
        r = prove_negation(*contradiction_pair)
        assert r.status is Status.NEGATION_PROVED
        rules = [s.rule for s in r.trace.steps]
        assert rules[0] == "neg_intro"
        assert "neg_elim" in rules and "exists_intro" in rules
        neg = next(s for s in r.trace.steps if s.rule == "neg_elim")
        assert r.labels[neg.inputs[1]].startswith("~exists")

    def test_atom_and_its_negation(self):
        r = prove_negation(parse_formula("p(c)"), parse_formula("~p(c)"))
        assert r.status is Status.NEGATION_PROVED
        assert [s.rule for s in r.trace.steps] == ["neg_intro", "neg_elim", "match"]

    def test_no_negative_premise(self, entailment_pair):
        assert prove_negation(*entailment_pair).status is Status.FAILED


class TestSkip:
    def test_backward_skips_bar_and_in(self, entailment_pair):
        a, b = entailment_pair
        r = skip_unproved(prove_direction(b, a).state)
        assert r.status is Status.PROVED_WITH_SKIPS
        assert sorted(print_formula(f) for f in r.skipped_subgoals) == ["bar(x2)", "in(e1, x2)"]
        assert r.case_counts_unproved == (0, 0, 0)

    def test_nothing_to_skip(self):
        state = prove_direction(parse_formula("p(c)"), parse_formula("p(c)")).state
        r = skip_unproved(state)
        assert r.status is Status.PROVED and r.skipped_subgoals == []

    def test_role_cases_counted(self):
        r = prove_direction(parse_formula("exists e1 . run(e1)"), parse_formula("exists e1 . subj(e1) = c"))
        r = skip_unproved(r.state)
        assert r.case_counts_unproved == (1, 0, 0)
        assert [s.rule for s in r.trace.steps][-1] == "skip"


class TestPipeline:
    def test_entailment_pair(self, entailment_pair):
        r = run_pipeline(entailment_pair, Lexicon())
        assert r.forward.status is Status.PROVED
        assert r.backward.status is Status.PROVED_WITH_SKIPS
        assert len(r.backward.skipped_subgoals) == 2

    def test_contradiction_both_directions(self, contradiction_pair):
        r = run_pipeline(contradiction_pair, Lexicon())
        assert r.forward.status is r.backward.status is Status.NEGATION_PROVED

    def test_hypernym_axiom(self, hypernym_pair):
        r = run_pipeline(hypernym_pair, lexicon(rel("man", "person", "hypernym")))
        assert r.forward.status is Status.PROVED_WITH_AXIOMS
        assert [(a.source_pred, a.target_pred, a.probability) for a in r.forward.axioms_used] == [("man", "person", 0.5)]

    def test_antonym_contradiction(self, antonym_pair):
        r = run_pipeline(antonym_pair, lexicon(rel("remove", "add", "antonym")))
        for d in (r.forward, r.backward):
            assert d.status is Status.NEGATION_PROVED
            assert [a.negated for a in d.axioms_used] == [True]

    def test_unrelated_pair_skips(self):
        a = parse_formula("exists x1 . cat(x1)")
        b = parse_formula("exists x1 . dog(x1)")
        r = run_pipeline((a, b), lexicon(isa("cat", "animal"), isa("dog", "animal")))
        assert r.forward.status is Status.PROVED_WITH_SKIPS

    def test_same_case_flag_blocks_mismatched_roles(self):
        a = parse_formula("exists e1 x1 . man(x1) & tall(x1) & fall(e1) & subj(e1) = x1")
        b = parse_formula("exists e1 x1 . person(x1) & tall(x1) & fall(e1) & obj(e1) = x1")
        lex = lexicon(rel("man", "person", "hypernym"))
        loose = run_pipeline((a, b), lex)
        strict = run_pipeline((a, b), lex, ProverConfig(require_same_case=True))
        assert loose.forward.axioms_used and not strict.forward.axioms_used

    def test_subgoal_stats_monotone(self, hypernym_pair):
        r = run_pipeline(hypernym_pair, lexicon(rel("man", "person", "hypernym")))
        s = r.forward.subgoal_stats
        assert s.proved_before_injection <= s.proved_after_injection <= s.total_subgoals
        assert (s.proved_before_injection, s.proved_after_injection) == (2, 3)


class TestTrace:
    def test_histogram_sums_to_steps(self, entailment_pair):
        r = run_pipeline(entailment_pair, Lexicon())
        for d in (r.forward, r.backward):
            assert sum(d.trace.histogram().values()) == len(d.trace)
            assert set(d.trace.histogram()) == set(RULES)

    def test_jsonl_export(self, contradiction_pair):
        r = prove_negation(*contradiction_pair)
        lines = r.trace.to_jsonl().splitlines()
        assert len(lines) == len(r.trace)
        first = json.loads(lines[0])
        assert set(first) == {"step", "rule", "inputs", "outputs"}
        assert {json.loads(l)["rule"] for l in lines} <= set(RULES)

    def test_proof_steps_exclude_skip_and_axiom(self):
        t = ProofTrace()
        for rule in ("match", "skip", "axiom", "imp_elim"):
            t.record(rule)
        assert t.proof_steps == 2

    def test_result_round_trips_through_json(self, hypernym_pair):
        r = run_pipeline(hypernym_pair, lexicon(rel("man", "person", "hypernym")))
        d = json.loads(json.dumps(r.to_dict()))
        again = BidirectionalResult.from_dict(d)
        assert again.to_dict() == r.to_dict()


pairs = st.integers(0, 100_000).map(gen_pair)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(pairs)
    def test_replay_reproduces_final_pool_and_goals(self, pair):
        r = run_pipeline(pair, Lexicon())
        for d in (r.forward, r.backward):
            premises, open_goals = d.trace.replay()
            assert premises == set(d.premise_pool)
            assert open_goals == set(d.open_goals)

    @settings(max_examples=40, deadline=None)
    @given(pairs)
    def test_deterministic(self, pair):
        a = run_pipeline(pair, Lexicon()).to_dict()
        b = run_pipeline(pair, Lexicon()).to_dict()
        assert a == b

    @settings(max_examples=60, deadline=None)
    @given(pairs)
    def test_terminates_within_budget(self, pair):
        budget = 10_000
        r = run_pipeline(pair, Lexicon(), ProverConfig(step_budget=budget))
        for d in (r.forward, r.backward):
            assert len(d.trace) <= budget + 1
            assert d.status is not Status.FAILED

    @settings(max_examples=60, deadline=None)
    @given(pairs)
    def test_sound_against_models(self, pair):
        a, b = pair
        r = run_pipeline(pair, Lexicon())
        for d, (p, c) in ((r.forward, (a, b)), (r.backward, (b, a))):
            if d.axioms_used or d.skipped_subgoals:
                continue
            if d.status is Status.PROVED:
                assert entails_bounded(p, c, 3)
            elif d.status is Status.NEGATION_PROVED:
                assert not satisfiable_bounded(And(p, c), 3)

    @settings(max_examples=60, deadline=None)
    @given(pairs)
    def test_status_invariant(self, pair):
        r = run_pipeline(pair, Lexicon())
        for d in (r.forward, r.backward):
            clean = not d.axioms_used and not d.skipped_subgoals and not d.open_goals
            assert (d.status is Status.PROVED) == (clean and d.stage == 1)
