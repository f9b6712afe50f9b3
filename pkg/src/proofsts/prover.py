"""Natural deduction prover with lexical axiom injection and sub-goal skipping.

A proof works on a pool of labelled premises and a list of labelled goals.
Premises are broken down with the elimination rules (existentials become
fresh Skolem constants, conjunctions are split), goals with the
introduction rules (existentials become metavariables, conjunctions become
separate sub-goals, negations and implications move their antecedent into
the pool).  Atomic sub-goals are then closed by unifying them with premises,
optionally after one equality rewrite.

The search is deterministic: premises are tried in label order, goals in
FIFO order, and the first unifiable premise wins.
"""

from __future__ import annotations

import enum
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .formula import (
    FALSE,
    And,
    Atom,
    Const,
    Eq,
    Exists,
    Falsum,
    Forall,
    Imp,
    Meta,
    Not,
    RoleApp,
    ROLES,
    Var,
    flatten_and,
    iter_terms,
    parse_formula,
    print_formula,
    strip_quantifier,
    substitute,
    subterms,
)
from .lexicon import Axiom, Lexicon, generate_axioms

logger = logging.getLogger(__name__)

RULES = (
    "and_intro",
    "and_elim",
    "imp_intro",
    "imp_elim",
    "exists_intro",
    "exists_elim",
    "eq_elim",
    "neg_intro",
    "neg_elim",
    "match",
    "skip",
    "axiom",
)

# the seven rule types reported as relative frequencies; negation rules are
# implication rules with a False consequent and are folded into them
FEATURE_RULES = (
    "and_intro",
    "and_elim",
    "imp_intro",
    "imp_elim",
    "exists_intro",
    "exists_elim",
    "eq_elim",
)
_FOLD = {"neg_intro": "imp_intro", "neg_elim": "imp_elim"}

MAX_REFUTATION_DEPTH = 8


class Status(enum.Enum):
    PROVED = "proved"
    NEGATION_PROVED = "negation_proved"
    PROVED_WITH_AXIOMS = "proved_with_axioms"
    PROVED_WITH_SKIPS = "proved_with_skips"
    FAILED = "failed"

    def __str__(self):
        return self.value


class BudgetExceeded(RuntimeError):
    pass


@dataclass
class ProverConfig:
    step_budget: int = 10_000
    require_same_case: bool = False
    disconnected_probability: float = 0.1


# ---------------------------------------------------------------------------
# Trace
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RuleApplication:
    step: int
    rule: str
    inputs: Tuple[str, ...]
    outputs: Tuple[str, ...]

    def to_dict(self):
        return {"step": self.step, "rule": self.rule, "inputs": list(self.inputs), "outputs": list(self.outputs)}


@dataclass
class ProofTrace:
    steps: List[RuleApplication] = field(default_factory=list)

    def record(self, rule, inputs=(), outputs=()):
        assert rule in RULES, rule
        self.steps.append(RuleApplication(len(self.steps), rule, tuple(inputs), tuple(outputs)))

    def __len__(self):
        return len(self.steps)

    def histogram(self) -> Dict[str, int]:
        counts = Counter(s.rule for s in self.steps)
        return {r: counts.get(r, 0) for r in RULES}

    @property
    def proof_steps(self) -> int:
        """Rule applications, matches included, skips and axiom uses excluded."""
        return sum(1 for s in self.steps if s.rule not in ("skip", "axiom"))

    def rule_counts(self) -> Dict[str, int]:
        counts = Counter(_FOLD.get(s.rule, s.rule) for s in self.steps)
        return {r: counts.get(r, 0) for r in FEATURE_RULES}

    def rule_frequencies(self) -> Dict[str, float]:
        counts = self.rule_counts()
        total = sum(counts.values())
        if total == 0:
            return {r: 0.0 for r in FEATURE_RULES}
        return {r: c / total for r, c in counts.items()}

    def replay(self, premises=("P0",), goals=("G0",)):
        """Re-run the label bookkeeping of every step.

        Returns the sets of open premise and goal labels, which must equal
        the final state of the proof that produced the trace.
        """
        pool, open_goals = set(premises), set(goals)
        for s in self.steps:
            if s.rule in ("exists_elim", "and_elim"):
                pool.difference_update(s.inputs)
                pool.update(s.outputs)
            elif s.rule in ("exists_intro", "and_intro"):
                open_goals.difference_update(s.inputs)
                open_goals.update(s.outputs)
            elif s.rule in ("neg_intro", "imp_intro"):
                open_goals.discard(s.inputs[0])
                hyp, goal = s.outputs
                pool.add(hyp)
                open_goals.add(goal)
            elif s.rule in ("match", "skip"):
                open_goals.discard(s.inputs[0])
            elif s.rule == "neg_elim":
                open_goals.discard(s.inputs[0])
                open_goals.update(s.outputs)
            elif s.rule == "imp_elim":
                if len(s.outputs) == 1:
                    pool.add(s.outputs[0])
                else:
                    witness, derived = s.outputs
                    open_goals.add(witness)
                    pool.add(derived)
        return pool, open_goals

    def to_list(self):
        return [s.to_dict() for s in self.steps]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(s.to_dict()) + "\n" for s in self.steps)

    @classmethod
    def from_list(cls, items):
        return cls([RuleApplication(d["step"], d["rule"], tuple(d["inputs"]), tuple(d["outputs"])) for d in items])


# ---------------------------------------------------------------------------
# Proof state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Premise:
    label: str
    formula: object
    scope: Optional[int] = None  # None: global; otherwise the hypothesis context


@dataclass(frozen=True)
class Goal:
    label: str
    formula: object
    ctx: FrozenSet[int] = frozenset()

    def sees(self, p: Premise) -> bool:
        return p.scope is None or p.scope in self.ctx


@dataclass
class ProofState:
    premises: List[Premise]
    goals: List[Goal]
    bindings: Dict[Meta, object] = field(default_factory=dict)
    fresh_counter: int = 0
    trace: ProofTrace = field(default_factory=ProofTrace)
    axioms: Tuple[Axiom, ...] = ()
    step_budget: int = 10_000
    coreference: bool = False
    # bookkeeping
    labels: Dict[str, object] = field(default_factory=dict)
    levels: Dict[Meta, int] = field(default_factory=dict)
    skolem_stamp: Dict[Const, int] = field(default_factory=dict)
    names: set = field(default_factory=set)
    subgoal_labels: List[str] = field(default_factory=list)
    matched: List[Tuple[str, str]] = field(default_factory=list)
    derived_from: Dict[str, int] = field(default_factory=dict)
    axioms_fired: set = field(default_factory=set)
    axioms_used: set = field(default_factory=set)
    used_implications: set = field(default_factory=set)
    n_premise_labels: int = 0
    n_goal_labels: int = 0
    depth: int = 0

    @classmethod
    def initial(cls, premise, conclusion, axioms=(), step_budget=10_000, coreference=False):
        state = cls([], [], axioms=tuple(axioms), step_budget=step_budget, coreference=coreference)
        for t in list(iter_terms(premise)) + list(iter_terms(conclusion)):
            for s in subterms(t):
                if isinstance(s, Const):
                    state.names.add(s.name)
        state.premises.append(Premise(state.new_premise_label(premise), premise))
        state.goals.append(Goal(state.new_goal_label(conclusion), conclusion))
        return state

    def copy(self) -> "ProofState":
        return replace(
            self,
            premises=list(self.premises),
            goals=list(self.goals),
            bindings=dict(self.bindings),
            trace=ProofTrace(list(self.trace.steps)),
            labels=dict(self.labels),
            levels=dict(self.levels),
            skolem_stamp=dict(self.skolem_stamp),
            names=set(self.names),
            subgoal_labels=list(self.subgoal_labels),
            matched=list(self.matched),
            derived_from=dict(self.derived_from),
            axioms_fired=set(self.axioms_fired),
            axioms_used=set(self.axioms_used),
            used_implications=set(self.used_implications),
        )

    def adopt(self, other: "ProofState"):
        self.__dict__.update(other.__dict__)

    # -- naming -------------------------------------------------------------

    def new_premise_label(self, formula):
        label = f"P{self.n_premise_labels}"
        self.n_premise_labels += 1
        self.labels[label] = formula
        return label

    def new_goal_label(self, formula):
        label = f"G{self.n_goal_labels}"
        self.n_goal_labels += 1
        self.labels[label] = formula
        return label

    def tick(self) -> int:
        self.fresh_counter += 1
        return self.fresh_counter

    def skolem(self, var: Var) -> Const:
        name = var.name
        k = 1
        while name in self.names:
            k += 1
            name = f"{var.name}_{k}"
        self.names.add(name)
        c = Const(name, var.sort)
        self.skolem_stamp[c] = self.tick()
        return c

    def metavariable(self, var: Var) -> Meta:
        uid = self.tick()
        m = Meta(var.name, var.sort, uid)
        self.levels[m] = uid
        return m

    def record(self, rule, inputs=(), outputs=()):
        self.trace.record(rule, inputs, outputs)
        if len(self.trace) > self.step_budget:
            raise BudgetExceeded(f"step budget {self.step_budget} exceeded")

    # -- lookup -------------------------------------------------------------

    def resolve_term(self, t, subst=None):
        subst = self.bindings if subst is None else subst
        while isinstance(t, Meta) and t in subst:
            t = subst[t]
        if isinstance(t, RoleApp):
            arg = self.resolve_term(t.arg, subst)
            return t if arg is t.arg else RoleApp(t.role, arg)
        return t

    def resolve(self, f, subst=None):
        subst = self.bindings if subst is None else subst
        if not subst:
            return f
        if isinstance(f, Atom):
            return Atom(f.pred, tuple(self.resolve_term(a, subst) for a in f.args))
        if isinstance(f, Eq):
            return Eq(self.resolve_term(f.lhs, subst), self.resolve_term(f.rhs, subst))
        if isinstance(f, Not):
            return Not(self.resolve(f.body, subst))
        if isinstance(f, (And, Imp)):
            return type(f)(self.resolve(f.left, subst), self.resolve(f.right, subst))
        if isinstance(f, (Exists, Forall)):
            return type(f)(f.var, self.resolve(f.body, subst))
        return f

    def goal(self, label) -> Goal:
        for g in self.goals:
            if g.label == label:
                return g
        raise KeyError(label)

    def visible(self, goal: Goal) -> List[Premise]:
        return [p for p in self.premises if goal.sees(p)]

    def atomic_premises(self) -> List[Premise]:
        return [p for p in self.premises if isinstance(p.formula, (Atom, Eq))]

    def proved_subgoals(self) -> int:
        done = {g for g, _ in self.matched}
        return sum(1 for g in self.subgoal_labels if g in done)

    def use_premise(self, label):
        if label in self.derived_from:
            self.axioms_used.add(self.derived_from[label])


# ---------------------------------------------------------------------------
# Unification
# ---------------------------------------------------------------------------


def _occurs(m, t):
    return any(s == m for s in subterms(t))


def _unify_terms(state, a, b, subst, levels) -> bool:
    a = state.resolve_term(a, subst)
    b = state.resolve_term(b, subst)
    if a == b:
        return True
    if isinstance(a, Meta) and isinstance(b, Meta):
        # bind the younger metavariable to the older one
        if levels.get(a, 0) >= levels.get(b, 0):
            return _bind(state, a, b, subst, levels)
        return _bind(state, b, a, subst, levels)
    if isinstance(a, Meta):
        return _bind(state, a, b, subst, levels)
    if isinstance(b, Meta):
        return _bind(state, b, a, subst, levels)
    if isinstance(a, RoleApp) and isinstance(b, RoleApp) and a.role == b.role:
        return _unify_terms(state, a.arg, b.arg, subst, levels)
    return False


def _bind(state, m, t, subst, levels) -> bool:
    if m.sort is not t.sort or _occurs(m, t):
        return False
    level = levels.get(m, 0)
    for s in subterms(t):
        # a witness may only mention constants that existed when m was opened
        if isinstance(s, Const) and state.skolem_stamp.get(s, -1) > level:
            return False
    for s in subterms(t):
        if isinstance(s, Meta) and levels.get(s, 0) > level:
            levels[s] = level
    subst[m] = t
    return True


def unify(state, f, g):
    """Unify two atomic formulas under ``state.bindings``.

    Returns ``(bindings, levels)`` extended copies on success, else None.
    """
    subst, levels = dict(state.bindings), dict(state.levels)
    if isinstance(f, Atom) and isinstance(g, Atom):
        if f.pred != g.pred or len(f.args) != len(g.args):
            return None
        pairs = list(zip(f.args, g.args))
    elif isinstance(f, Eq) and isinstance(g, Eq):
        pairs = [(f.lhs, g.lhs), (f.rhs, g.rhs)]
    else:
        return None
    for a, b in pairs:
        if not _unify_terms(state, a, b, subst, levels):
            return None
    return subst, levels


def _replace_term(t, src, dst):
    if t == src:
        return dst
    if isinstance(t, RoleApp):
        arg = _replace_term(t.arg, src, dst)
        return t if arg is t.arg else RoleApp(t.role, arg)
    return t


def _rewrite(f, src, dst):
    if isinstance(f, Atom):
        return Atom(f.pred, tuple(_replace_term(a, src, dst) for a in f.args))
    if isinstance(f, Eq):
        return Eq(_replace_term(f.lhs, src, dst), _replace_term(f.rhs, src, dst))
    return f


def _variants(f):
    yield f
    if isinstance(f, Eq) and f.lhs != f.rhs:
        yield Eq(f.rhs, f.lhs)


def _negated_body(f):
    if isinstance(f, Not):
        return f.body
    if isinstance(f, Imp) and isinstance(f.right, Falsum):
        return f.left
    return None


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------


def decompose_premises(state: ProofState) -> ProofState:
    """Apply existential and conjunction elimination until nothing changes.

    Lexical axioms carried by the state are then applied forward to every
    unary premise atom.  The state is modified in place and returned.
    """
    while True:
        for i, p in enumerate(state.premises):
            if isinstance(p.formula, (Exists, And)):
                break
        else:
            break
        f = p.formula
        if isinstance(f, Exists):
            variables, body = strip_quantifier(f, Exists)
            if state.coreference and p.scope is not None:
                mapping = _coreferent_witnesses(state, variables, body)
            else:
                mapping = {v: state.skolem(v) for v in variables}
            body = substitute(body, mapping)
            new = Premise(state.new_premise_label(body), body, p.scope)
            state.premises[i : i + 1] = [new]
            state.record("exists_elim", (p.label,), (new.label,))
        else:
            parts = [Premise(state.new_premise_label(c), c, p.scope) for c in flatten_and(f)]
            state.premises[i : i + 1] = parts
            state.record("and_elim", (p.label,), tuple(q.label for q in parts))
    _apply_axioms(state)
    return state


def _apply_axioms(state: ProofState):
    changed = bool(state.axioms)
    while changed:
        changed = False
        for ai, ax in enumerate(state.axioms):
            for p in list(state.premises):
                if (ai, p.label) in state.axioms_fired:
                    continue
                f = state.resolve(p.formula)
                if not (isinstance(f, Atom) and f.pred == ax.source_pred and len(f.args) == 1):
                    continue
                if f.args[0].sort is not ax.sort:
                    continue
                state.axioms_fired.add((ai, p.label))
                head = Atom(ax.target_pred, f.args)
                if ax.negated:
                    head = Not(head)
                if any(q.formula == head and q.scope == p.scope for q in state.premises):
                    continue
                new = Premise(state.new_premise_label(head), head, p.scope)
                state.premises.append(new)
                state.derived_from[new.label] = ai
                state.record("axiom", (f"A{ai}",), ())
                state.record("imp_elim", (p.label,), (new.label,))
                changed = True


def _coreferent_witnesses(state, variables, body):
    """Witnesses for a hypothesis that is read as describing the same scene.

    Each existential variable is aligned with the global premise term its
    conjuncts match; variables left unaligned get fresh Skolem constants.
    """
    metas = {v: Meta(v.name, v.sort, -1 - k) for k, v in enumerate(variables)}
    conjuncts = flatten_and(substitute(body, metas))
    pool = [p for p in state.premises if p.scope is None and isinstance(p.formula, (Atom, Eq))]
    subst: Dict[Meta, object] = {}
    levels = {m: 10**9 for m in metas.values()}
    progress = True
    while progress:
        progress = False
        for c in conjuncts:
            if not isinstance(c, (Atom, Eq)):
                continue
            c = state.resolve(c, subst)
            if not any(isinstance(s, Meta) for t in iter_terms(c) for s in subterms(t)):
                continue
            for p in pool:
                trial, trial_levels = dict(subst), dict(levels)
                ok = False
                for variant in _variants(p.formula):
                    if isinstance(c, Atom) and isinstance(variant, Atom):
                        ok = c.pred == variant.pred and len(c.args) == len(variant.args) and all(
                            _unify_terms(state, a, b, trial, trial_levels) for a, b in zip(c.args, variant.args)
                        )
                    elif isinstance(c, Eq) and isinstance(variant, Eq):
                        ok = _unify_terms(state, c.lhs, variant.lhs, trial, trial_levels) and _unify_terms(
                            state, c.rhs, variant.rhs, trial, trial_levels
                        )
                    if ok:
                        break
                    trial, trial_levels = dict(subst), dict(levels)
                if ok:
                    subst, levels = trial, trial_levels
                    progress = True
                    break
    mapping = {}
    for v, m in metas.items():
        t = state.resolve_term(m, subst)
        if any(isinstance(s, Meta) for s in subterms(t)):
            t = state.skolem(v)
        mapping[v] = t
    return mapping


def decompose_goal(state: ProofState, only=None) -> ProofState:
    """Apply the introduction rules to goals until only atomic ones remain.

    ``only`` restricts the work to the goals with those labels (and the
    goals they give rise to); it is updated in place with new labels.
    """
    i = 0
    while i < len(state.goals):
        g = state.goals[i]
        if only is not None and g.label not in only:
            i += 1
            continue
        f = g.formula
        if isinstance(f, Exists):
            variables, body = strip_quantifier(f, Exists)
            body = substitute(body, {v: state.metavariable(v) for v in variables})
            new = [Goal(state.new_goal_label(body), body, g.ctx)]
            rule = "exists_intro"
        elif isinstance(f, And):
            new = [Goal(state.new_goal_label(c), c, g.ctx) for c in flatten_and(f)]
            rule = "and_intro"
        elif isinstance(f, (Not, Imp)):
            if isinstance(f, Not):
                antecedent, consequent, rule = f.body, FALSE, "neg_intro"
            else:
                antecedent, consequent = f.left, f.right
                rule = "neg_intro" if isinstance(consequent, Falsum) else "imp_intro"
            ctx = state.tick()
            hyp = Premise(state.new_premise_label(antecedent), antecedent, ctx)
            state.premises.append(hyp)
            goal = Goal(state.new_goal_label(consequent), consequent, g.ctx | {ctx})
            state.goals[i] = goal
            if only is not None:
                only.add(goal.label)
            state.record(rule, (g.label,), (hyp.label, goal.label))
            decompose_premises(state)
            continue
        else:
            if not isinstance(f, Falsum) and g.label not in state.subgoal_labels:
                state.subgoal_labels.append(g.label)
            i += 1
            continue
        state.goals[i : i + 1] = new
        if only is not None:
            only.update(n.label for n in new)
        state.record(rule, (g.label,), tuple(n.label for n in new))
    return state


# ---------------------------------------------------------------------------
# Closing goals
# ---------------------------------------------------------------------------


def _commit_match(state, goal, premise_labels, result, rewrites=()):
    state.bindings, state.levels = result
    for p_label, eq_label in rewrites:
        state.record("eq_elim", (p_label, eq_label), ())
    state.goals.remove(goal)
    state.matched.append((goal.label, premise_labels[0]))
    for label in premise_labels:
        state.use_premise(label)
    state.record("match", (goal.label, premise_labels[0]), ())


def match_subgoal(state: ProofState, goal_label: str):
    """Close an atomic sub-goal against the premise pool.

    Returns the bindings added by the match (possibly empty), or None when
    no premise matches, even after one equality rewrite.
    """
    goal = state.goal(goal_label)
    f = state.resolve(goal.formula)
    if not isinstance(f, (Atom, Eq)):
        return None
    before = dict(state.bindings)
    pool = state.visible(goal)

    def delta():
        return {k: v for k, v in state.bindings.items() if k not in before}

    for p in pool:
        if isinstance(p.formula, Falsum):
            _commit_match(state, goal, [p.label], (state.bindings, state.levels))
            return delta()

    atoms = [p for p in pool if isinstance(p.formula, (Atom, Eq))]
    for p in atoms:
        pf = state.resolve(p.formula)
        for variant in _variants(pf):
            result = unify(state, f, variant)
            if result is not None:
                _commit_match(state, goal, [p.label], result)
                return delta()

    equations = [p for p in atoms if isinstance(p.formula, Eq)]
    for p in atoms:
        pf = state.resolve(p.formula)
        for q in equations:
            if q is p:
                continue
            qf = state.resolve(q.formula)
            for src, dst in ((qf.lhs, qf.rhs), (qf.rhs, qf.lhs)):
                rewritten = _rewrite(pf, src, dst)
                if rewritten == pf:
                    continue
                for variant in _variants(rewritten):
                    result = unify(state, f, variant)
                    if result is not None:
                        _commit_match(state, goal, [p.label, q.label], result, [(p.label, q.label)])
                        return delta()

    # reflexivity last, so premises get the first chance to bind metavariables
    if isinstance(f, Eq):
        subst, levels = dict(state.bindings), dict(state.levels)
        if _unify_terms(state, f.lhs, f.rhs, subst, levels):
            state.bindings, state.levels = subst, levels
            state.goals.remove(goal)
            state.matched.append((goal.label, "refl"))
            state.record("match", (goal.label,), ())
            return delta()
    return None


def _refute(state: ProofState, goal: Goal) -> bool:
    """Close a False goal by negation elimination (or a False premise)."""
    pool = state.visible(goal)
    for p in pool:
        if isinstance(p.formula, Falsum):
            state.goals.remove(goal)
            state.matched.append((goal.label, p.label))
            state.record("match", (goal.label, p.label), ())
            return True
    if state.depth >= MAX_REFUTATION_DEPTH:
        return False
    for p in pool:
        body = _negated_body(state.resolve(p.formula))
        if body is None:
            continue
        trial = state.copy()
        trial.depth += 1
        witness = Goal(trial.new_goal_label(body), body, goal.ctx)
        trial.goals[trial.goals.index(goal)] = witness
        trial.record("neg_elim", (goal.label, p.label), (witness.label,))
        only = {witness.label}
        decompose_goal(trial, only)
        _solve(trial, only)
        if not any(g.label in only for g in trial.goals):
            trial.use_premise(p.label)
            trial.depth -= 1
            state.adopt(trial)
            return True
    return False


def _forward_implications(state: ProofState) -> bool:
    """Implication elimination on premises ``A -> B`` with B not False."""
    for p in list(state.premises):
        f = p.formula
        if not isinstance(f, Imp) or isinstance(f.right, Falsum) or p.label in state.used_implications:
            continue
        if state.depth >= MAX_REFUTATION_DEPTH:
            return False
        state.used_implications.add(p.label)
        trial = state.copy()
        trial.depth += 1
        ctx = frozenset() if p.scope is None else frozenset({p.scope})
        antecedent = state.resolve(f.left)
        witness = Goal(trial.new_goal_label(antecedent), antecedent, ctx)
        consequent = state.resolve(f.right)
        derived = Premise(trial.new_premise_label(consequent), consequent, p.scope)
        trial.goals.append(witness)
        trial.record("imp_elim", (p.label,), (witness.label, derived.label))
        only = {witness.label}
        decompose_goal(trial, only)
        _solve(trial, only)
        if not any(g.label in only for g in trial.goals):
            trial.depth -= 1
            trial.premises.append(derived)
            decompose_premises(trial)
            state.adopt(trial)
            return True
    return False


def _solve(state: ProofState, only=None):
    progress = True
    while progress:
        progress = False
        for g in list(state.goals):
            if only is not None and g.label not in only:
                continue
            if g not in state.goals:
                continue
            if isinstance(g.formula, Falsum):
                ok = _refute(state, g)
            else:
                ok = match_subgoal(state, g.label) is not None
            progress = progress or ok
        if not progress:
            progress = _forward_implications(state)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class SubgoalStats:
    total_subgoals: int = 0
    proved_before_injection: int = 0
    proved_after_injection: int = 0
    premise_pool_size: int = 0

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class DirectionResult:
    status: Status
    axioms_used: List[Axiom] = field(default_factory=list)
    skipped_subgoals: List[object] = field(default_factory=list)
    subgoal_stats: SubgoalStats = field(default_factory=SubgoalStats)
    case_counts_unproved: Tuple[int, int, int] = (0, 0, 0)
    trace: ProofTrace = field(default_factory=ProofTrace)
    stage: int = 0
    labels: Dict[str, str] = field(default_factory=dict)
    premise_pool: List[str] = field(default_factory=list)
    open_goals: List[str] = field(default_factory=list)
    matches: List[Tuple[str, str]] = field(default_factory=list)
    state: Optional[ProofState] = field(default=None, repr=False, compare=False)

    @property
    def proved(self):
        return self.status in (Status.PROVED, Status.PROVED_WITH_AXIOMS)

    def to_dict(self):
        return {
            "status": self.status.value,
            "stage": self.stage,
            "axioms_used": [a.to_dict() for a in self.axioms_used],
            "skipped": [print_formula(f) for f in self.skipped_subgoals],
            "skipped_predicates": [_head(f) for f in self.skipped_subgoals],
            "subgoal_stats": self.subgoal_stats.to_dict(),
            "case_counts_unproved": dict(zip(ROLES, self.case_counts_unproved)),
            "premise_pool": self.premise_pool,
            "open_goals": self.open_goals,
            "matches": [list(m) for m in self.matches],
            "labels": self.labels,
            "rule_histogram": self.trace.histogram(),
            "proof_steps": self.trace.proof_steps,
            "trace": self.trace.to_list(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            status=Status(d["status"]),
            axioms_used=[Axiom.from_dict(a) for a in d["axioms_used"]],
            skipped_subgoals=[parse_formula(s, allow_free=True) for s in d["skipped"]],
            subgoal_stats=SubgoalStats(**d["subgoal_stats"]),
            case_counts_unproved=tuple(d["case_counts_unproved"][r] for r in ROLES),
            trace=ProofTrace.from_list(d["trace"]),
            stage=d["stage"],
            labels=dict(d["labels"]),
            premise_pool=list(d["premise_pool"]),
            open_goals=list(d["open_goals"]),
            matches=[tuple(m) for m in d["matches"]],
        )


@dataclass
class BidirectionalResult:
    forward: DirectionResult
    backward: DirectionResult

    def to_dict(self):
        return {"forward": self.forward.to_dict(), "backward": self.backward.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(DirectionResult.from_dict(d["forward"]), DirectionResult.from_dict(d["backward"]))


def _head(f):
    if isinstance(f, Atom):
        return f.pred
    if isinstance(f, Eq):
        for t in (f.lhs, f.rhs):
            if isinstance(t, RoleApp):
                return t.role
        return "="
    return type(f).__name__.lower()


def _display(state, f):
    """Resolve bindings and show still-open metavariables by their names."""
    f = state.resolve(f)
    metas = {}
    for t in iter_terms(f):
        for s in subterms(t):
            if isinstance(s, Meta):
                metas[s] = Const(s.name, s.sort)
    return substitute(f, metas) if metas else f


def _result(state, status, stage=0) -> DirectionResult:
    used = [state.axioms[i] for i in sorted(state.axioms_used)]
    total = len(state.subgoal_labels)
    proved = state.proved_subgoals()
    stats = SubgoalStats(total, proved, proved, len(state.atomic_premises()))
    return DirectionResult(
        status=status,
        axioms_used=used,
        subgoal_stats=stats,
        trace=state.trace,
        stage=stage,
        labels={k: print_formula(_display(state, v)) for k, v in state.labels.items()},
        premise_pool=[p.label for p in state.premises],
        open_goals=[g.label for g in state.goals],
        matches=list(state.matched),
        state=state,
    )


def _run(premise, goal, axioms, config, coreference=False):
    config = config or ProverConfig()
    state = ProofState.initial(premise, goal, axioms, config.step_budget, coreference)
    try:
        decompose_premises(state)
        decompose_goal(state)
        _solve(state)
    except BudgetExceeded:
        logger.warning("step budget exhausted proving %s", print_formula(goal))
        return state, False
    except RecursionError:
        logger.warning("proof search too deep for %s", print_formula(goal))
        return state, False
    return state, not state.goals


def prove_direction(premise, conclusion, axioms: Sequence[Axiom] = (), config: ProverConfig = None) -> DirectionResult:
    """Try to prove ``premise => conclusion`` by matching, with optional axioms.

    Never skips sub-goals; a proof that cannot be closed is ``FAILED`` and
    keeps its final state for later axiom generation or skipping.
    """
    state, closed = _run(premise, conclusion, axioms, config)
    if not closed:
        return _result(state, Status.FAILED)
    return _result(state, Status.PROVED_WITH_AXIOMS if state.axioms_used else Status.PROVED)


def prove_negation(premise, conclusion, axioms: Sequence[Axiom] = (), config: ProverConfig = None, coreference=False) -> DirectionResult:
    """Try to prove ``premise => ~conclusion``.

    With ``coreference`` the assumed conclusion is instantiated on the
    premise's own individuals wherever its conjuncts line up with premise
    atoms, i.e. both sentences are read as describing one situation.
    """
    state, closed = _run(premise, Not(conclusion), axioms, config, coreference)
    return _result(state, Status.NEGATION_PROVED if closed else Status.FAILED)


def skip_unproved(state: ProofState) -> DirectionResult:
    """Accept every open sub-goal and close the proof by force."""
    skipped = []
    cases = Counter()
    for g in list(state.goals):
        f = _display(state, g.formula)
        skipped.append(f)
        for t in iter_terms(f):
            for s in subterms(t):
                if isinstance(s, RoleApp):
                    cases[s.role] += 1
        state.record("skip", (g.label,), ())
    state.goals = []
    if skipped:
        status = Status.PROVED_WITH_SKIPS
    else:
        status = Status.PROVED_WITH_AXIOMS if state.axioms_used else Status.PROVED
    result = _result(state, status)
    result.skipped_subgoals = skipped
    result.case_counts_unproved = tuple(cases.get(r, 0) for r in ROLES)
    return result


def run_pipeline(pair, kb: Lexicon, config: ProverConfig = None) -> BidirectionalResult:
    """Prove both directions of ``pair`` with the staged strategy.

    Stages, per direction: plain entailment; contradiction (only when both
    directions failed); entailment with lexical axioms; contradiction with
    those axioms; forced completion by skipping.
    """
    config = config or ProverConfig()
    a, b = pair
    directions = [(a, b), (b, a)]
    first = [prove_direction(p, c, (), config) for p, c in directions]
    final: List[Optional[DirectionResult]] = [None, None]
    for k, r in enumerate(first):
        if r.status is Status.PROVED:
            r.stage = 1
            final[k] = r

    negation_tried = False
    if all(r.status is Status.FAILED for r in first):
        negation_tried = True
        for k, (p, c) in enumerate(directions):
            r = prove_negation(p, c, (), config)
            if r.status is Status.NEGATION_PROVED:
                r.stage = 2
                final[k] = r

    for k, (p, c) in enumerate(directions):
        if final[k] is not None:
            continue
        base = first[k]
        axioms = generate_axioms(base.state, kb, config.require_same_case, config.disconnected_probability)
        attempt = base
        if axioms:
            attempt = prove_direction(p, c, axioms, config)
            if attempt.proved:
                attempt.stage = 3
                final[k] = _with_stats(attempt, base, attempt)
                continue
            r = prove_negation(p, c, axioms, config, coreference=True)
            # same-scene alignment is only trusted when a lexical axiom did the work
            if r.status is Status.NEGATION_PROVED and r.axioms_used:
                r.stage = 4
                final[k] = _with_stats(r, base, attempt)
                continue
        elif not negation_tried:
            r = prove_negation(p, c, (), config)
            if r.status is Status.NEGATION_PROVED:
                r.stage = 4
                final[k] = _with_stats(r, base, attempt)
                continue
        r = skip_unproved(attempt.state)
        r.stage = 5
        final[k] = _with_stats(r, base, attempt)

    for k in range(2):
        if final[k].stage == 2:
            final[k] = _with_stats(final[k], first[k], first[k])
    return BidirectionalResult(final[0], final[1])


def _with_stats(result, before, after):
    """Sub-goal statistics measured on the entailment attempts."""
    total = before.subgoal_stats.total_subgoals
    n_before = before.subgoal_stats.proved_before_injection
    # axiom-derived premises only add candidates, so matching cannot lose ground
    n_after = max(n_before, after.subgoal_stats.proved_before_injection)
    if result.status is Status.PROVED_WITH_SKIPS:
        n_after = max(n_before, total - len(result.skipped_subgoals))
    result.subgoal_stats = SubgoalStats(total, n_before, n_after, after.subgoal_stats.premise_pool_size)
    return result
