"""Local lexical knowledge base and lexical axiom generation.

The knowledge base is a JSON-lines file with three record types::

    {"type": "rel", "a": "man", "b": "person", "rel": "hypernym"}
    {"type": "isa", "child": "dog", "parent": "canine"}
    {"type": "syn", "lemma": "kid", "synonyms": ["child"]}

A ``rel`` record with kind ``hypernym`` reads "b is a hypernym of a"; such
records (and ``hyponym`` records, reversed) also become is-a edges of the
taxonomy used for path-based probabilities.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import networkx as nx

from .formula import Atom, Eq, Forall, Imp, Meta, Not, RoleApp, Sort, Var, print_formula

logger = logging.getLogger(__name__)

DISCONNECTED_PROBABILITY = 0.1


class RelationKind(enum.Enum):
    INFLECTION = "inflection"
    DERIVATION = "derivation"
    SYNONYM = "synonym"
    ANTONYM = "antonym"
    HYPERNYM = "hypernym"
    SIMILARITY = "similarity"
    HYPONYM = "hyponym"

    def __str__(self):
        return self.value


# lookup order; earlier kinds win
RELATION_PRIORITY = tuple(RelationKind)

_SYMMETRIC = {
    RelationKind.INFLECTION,
    RelationKind.DERIVATION,
    RelationKind.SYNONYM,
    RelationKind.ANTONYM,
    RelationKind.SIMILARITY,
}
_FULL_STRENGTH = {RelationKind.INFLECTION, RelationKind.DERIVATION, RelationKind.SYNONYM}


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class Axiom:
    source_pred: str
    target_pred: str
    negated: bool
    relation: RelationKind
    probability: float
    formula: object

    @classmethod
    def build(cls, source, target, relation, probability, sort=Sort.ENTITY):
        x = Var("x1" if sort is Sort.ENTITY else "e1", sort)
        negated = relation is RelationKind.ANTONYM
        head = Atom(target, (x,))
        if negated:
            head = Not(head)
        formula = Forall(x, Imp(Atom(source, (x,)), head))
        return cls(source, target, negated, relation, probability, formula)

    @property
    def sort(self):
        return self.formula.var.sort

    def to_dict(self):
        return {
            "source": self.source_pred,
            "target": self.target_pred,
            "negated": self.negated,
            "relation": self.relation.value,
            "probability": self.probability,
            "formula": print_formula(self.formula),
        }

    @classmethod
    def from_dict(cls, d):
        sort = Sort.EVENT if d["formula"].startswith("forall e") else Sort.ENTITY
        return cls.build(d["source"], d["target"], RelationKind(d["relation"]), d["probability"], sort)


@dataclass
class Lexicon:
    relation_edges: Set[Tuple[str, str, RelationKind]] = field(default_factory=set)
    taxonomy: nx.DiGraph = field(default_factory=nx.DiGraph)
    synsets: Dict[str, FrozenSet[str]] = field(default_factory=dict)

    def __post_init__(self):
        if not nx.is_directed_acyclic_graph(self.taxonomy):
            raise LexiconError("is-a taxonomy contains a cycle")
        self._undirected = self.taxonomy.to_undirected(as_view=True)

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "Lexicon":
        edges = set()
        taxonomy = nx.DiGraph()
        synsets: Dict[str, Set[str]] = {}
        for n, rec in enumerate(records, 1):
            kind = rec.get("type")
            try:
                if kind == "rel":
                    rel = RelationKind(rec["rel"])
                    a, b = rec["a"], rec["b"]
                    edges.add((a, b, rel))
                    if rel is RelationKind.HYPERNYM:
                        taxonomy.add_edge(a, b)
                    elif rel is RelationKind.HYPONYM:
                        taxonomy.add_edge(b, a)
                elif kind == "isa":
                    taxonomy.add_edge(rec["child"], rec["parent"])
                elif kind == "syn":
                    synsets.setdefault(rec["lemma"], set()).update(rec["synonyms"])
                else:
                    raise LexiconError(f"record {n}: unknown type {kind!r}")
            except KeyError as e:
                raise LexiconError(f"record {n}: missing field {e}") from None
            except ValueError as e:
                if isinstance(e, LexiconError):
                    raise
                raise LexiconError(f"record {n}: {e}") from None
        return cls(edges, taxonomy, {k: frozenset(v) for k, v in synsets.items()})

    @classmethod
    def load(cls, path) -> "Lexicon":
        records = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line and not line.startswith("#"):
                    records.append(json.loads(line))
        return cls.from_records(records)

    def synonyms(self, lemma: str) -> FrozenSet[str]:
        """``lemma`` plus everything listed as a synonym of it (either way)."""
        out = {lemma} | set(self.synsets.get(lemma, ()))
        for a, b, rel in self.relation_edges:
            if rel is RelationKind.SYNONYM:
                if a == lemma:
                    out.add(b)
                elif b == lemma:
                    out.add(a)
        return frozenset(out)

    def _has_edge(self, p, q, kind):
        if (p, q, kind) in self.relation_edges:
            return True
        if kind in _SYMMETRIC:
            return (q, p, kind) in self.relation_edges
        if kind is RelationKind.HYPERNYM:
            return p in self.taxonomy and q in nx.descendants(self.taxonomy, p)
        if kind is RelationKind.HYPONYM:
            return q in self.taxonomy and p in nx.descendants(self.taxonomy, q)
        return False

    def path_length(self, p, q) -> Optional[int]:
        if p == q:
            return 0
        if p not in self._undirected or q not in self._undirected:
            return None
        try:
            return nx.shortest_path_length(self._undirected, p, q)
        except nx.NetworkXNoPath:
            return None


def find_relation(p: str, q: str, lex: Lexicon) -> Optional[RelationKind]:
    """First relation kind, in priority order, linking ``p`` to ``q``."""
    if p == q:
        return RelationKind.INFLECTION
    for kind in RELATION_PRIORITY:
        if lex._has_edge(p, q, kind):
            return kind
    return None


def axiom_probability(p, q, lex, disconnected=DISCONNECTED_PROBABILITY) -> float:
    """``1 / (1 + d)`` for taxonomy path length ``d``.

    Pairs with no taxonomy path get 1.0 when they are inflections,
    derivations or synonyms of each other and ``disconnected`` otherwise.
    """
    d = lex.path_length(p, q)
    if d is not None:
        return 1.0 / (1.0 + d)
    if find_relation(p, q, lex) in _FULL_STRENGTH:
        return 1.0
    return disconnected


def generate_axioms(state, lex, require_same_case=False, disconnected=DISCONNECTED_PROBABILITY) -> List[Axiom]:
    """Lexical axioms that could close the unproved sub-goals of ``state``.

    A candidate pairs a unary premise atom ``p(t)`` with a unary sub-goal
    ``q(t)`` sharing the argument ``t`` (after applying the state's
    bindings).  With ``require_same_case`` the shared term must also fill
    the same role in both, i.e. appear under the same role function in the
    premise equations and the sub-goal equations.
    """
    goals = [state.resolve(g.formula) for g in state.goals]
    goal_atoms = [g for g in goals if isinstance(g, Atom) and len(g.args) == 1]
    if not goal_atoms:
        return []
    premises = [state.resolve(p.formula) for p in state.premises]
    premise_atoms = [p for p in premises if isinstance(p, Atom) and len(p.args) == 1]

    if require_same_case:
        premise_cases = _cases(premises)
        goal_cases = _cases(goals)

    found = {}
    for q in goal_atoms:
        (t,) = q.args
        if not _ground(t):
            continue
        for p in premise_atoms:
            if p.args[0] != t or p.pred == q.pred:
                continue
            if require_same_case and premise_cases.get(t, set()) != goal_cases.get(t, set()):
                continue
            key = (p.pred, q.pred)
            if key in found:
                continue
            rel = find_relation(p.pred, q.pred, lex)
            if rel is None:
                continue
            prob = axiom_probability(p.pred, q.pred, lex, disconnected)
            found[key] = Axiom.build(p.pred, q.pred, rel, prob, t.sort)
    return [found[k] for k in sorted(found)]


def _ground(t):
    if isinstance(t, Meta):
        return False
    if isinstance(t, RoleApp):
        return _ground(t.arg)
    return True


def _cases(formulas):
    cases: Dict[object, Set[str]] = {}
    for f in formulas:
        if isinstance(f, Eq):
            for a, b in ((f.lhs, f.rhs), (f.rhs, f.lhs)):
                if isinstance(a, RoleApp):
                    cases.setdefault(b, set()).add(a.role)
                    cases.setdefault(a.arg, set()).add("event")
    return cases
