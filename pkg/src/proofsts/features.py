"""Feature vectors built from bidirectional proofs and sentence annotations.

Every feature ends up in ``[0, 1]``.  Ratios and overlaps are bounded by
construction; counts (proof steps, axiom counts, role cases, sentence
lengths) are min-max scaled with bounds learned on the training split and
clamped when applied.
"""

from __future__ import annotations

import difflib
import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .formula import Atom, ROLES, contains_negation, iter_atoms
from .lexicon import DISCONNECTED_PROBABILITY, Lexicon, axiom_probability
from .prover import FEATURE_RULES, BidirectionalResult, DirectionResult, Status


class SchemaError(ValueError):
    pass


_DIRECTION_FEATURES = (
    ["inference_result", "axiom_probability_avg", "axiom_count"]
    + ["ratio_pool_before", "ratio_pool_after", "ratio_total_before", "ratio_total_after"]
    + [f"case_{r}" for r in ROLES]
    + ["proof_steps"]
    + [f"freq_{r}" for r in FEATURE_RULES]
)
_PAIR_FEATURES = ["predicate_overlap", "semantic_type_overlap", "has_negation"]
_SHALLOW_FEATURES = [
    "noun_overlap",
    "verb_overlap",
    "pos_overlap",
    "synset_overlap",
    "synset_distance",
    "length_avg",
    "length_diff",
    "string_similarity",
    "tfidf_cosine",
    "passive",
]
_UNBOUNDED = {"axiom_count", "proof_steps", "length_avg", "length_diff"} | {f"case_{r}" for r in ROLES}


def feature_schema() -> List[str]:
    names = []
    for d in ("fwd", "bwd"):
        names.extend(f"{d}_{n}" for n in _DIRECTION_FEATURES)
    return names + _PAIR_FEATURES + _SHALLOW_FEATURES


def unbounded_features() -> List[str]:
    return [n for n in feature_schema() if n.split("_", 1)[-1] in _UNBOUNDED or n in _UNBOUNDED]


def schema_hash(names: Sequence[str] = None) -> str:
    names = feature_schema() if names is None else list(names)
    return hashlib.sha256(json.dumps(names).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Logic-based features
# ---------------------------------------------------------------------------

_INFERENCE = {Status.PROVED: 1.0, Status.PROVED_WITH_AXIOMS: 1.0, Status.NEGATION_PROVED: 0.5}


def _ratio(n, m):
    return 1.0 if m == 0 else min(1.0, n / m)


def direction_features(r: DirectionResult) -> Dict[str, float]:
    stats = r.subgoal_stats
    complete = r.status is not Status.PROVED_WITH_SKIPS and r.status is not Status.FAILED
    # a proof closed without axioms had nothing left to prove before injection
    clean = complete and not r.axioms_used
    out = {
        "inference_result": _INFERENCE.get(r.status, 0.0),
        "axiom_probability_avg": float(np.mean([a.probability for a in r.axioms_used])) if r.axioms_used else 1.0,
        "axiom_count": float(len(r.axioms_used)),
    }
    for kind, m in (("pool", stats.premise_pool_size), ("total", stats.total_subgoals)):
        out[f"ratio_{kind}_before"] = 1.0 if clean else _ratio(stats.proved_before_injection, m)
        out[f"ratio_{kind}_after"] = 1.0 if complete else _ratio(stats.proved_after_injection, m)
    for role, count in zip(ROLES, r.case_counts_unproved):
        out[f"case_{role}"] = float(count)
    out["proof_steps"] = float(r.trace.proof_steps)
    for rule, freq in r.trace.rule_frequencies().items():
        out[f"freq_{rule}"] = freq
    return out


def _jaccard(a, b) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def _multiset_jaccard(a: Counter, b: Counter) -> float:
    keys = set(a) | set(b)
    if not keys:
        return 1.0
    return sum(min(a[k], b[k]) for k in keys) / sum(max(a[k], b[k]) for k in keys)


def predicates(f) -> set:
    return {a.pred for a in iter_atoms(f) if isinstance(a, Atom)}


def semantic_types(f) -> Counter:
    """Multiset of argument-sort signatures, one per atom occurrence."""
    return Counter(tuple(t.sort.value for t in a.args) for a in iter_atoms(f) if isinstance(a, Atom))


def pair_features(a, b) -> Dict[str, float]:
    return {
        "predicate_overlap": _jaccard(predicates(a), predicates(b)),
        "semantic_type_overlap": _multiset_jaccard(semantic_types(a), semantic_types(b)),
        "has_negation": 1.0 if contains_negation(a) or contains_negation(b) else 0.0,
    }


def logic_features(r: BidirectionalResult, pair=None) -> List[Tuple[str, float]]:
    out = []
    for prefix, d in (("fwd", r.forward), ("bwd", r.backward)):
        feats = direction_features(d)
        out.extend((f"{prefix}_{n}", feats[n]) for n in _DIRECTION_FEATURES)
    if pair is not None:
        feats = pair_features(*pair)
        out.extend((n, feats[n]) for n in _PAIR_FEATURES)
    return out


# ---------------------------------------------------------------------------
# Shallow features
# ---------------------------------------------------------------------------


def string_similarity(s1: str, s2: str) -> float:
    """``2M / T`` over characters, ``M`` from recursive longest matching blocks."""
    if not s1 and not s2:
        return 1.0
    return difflib.SequenceMatcher(None, s1, s2, autojunk=False).ratio()


@dataclass
class CorpusStats:
    n_docs: int = 0
    df: Dict[str, int] = field(default_factory=dict)

    @classmethod
    def fit(cls, documents: Iterable[Sequence[str]]) -> "CorpusStats":
        df = Counter()
        n = 0
        for doc in documents:
            n += 1
            df.update({t.lower() for t in doc})
        return cls(n, dict(sorted(df.items())))

    def idf(self, term) -> float:
        # unseen terms count as appearing once
        return math.log(max(self.n_docs, 1) / max(self.df.get(term, 0), 1)) + 1.0

    def to_dict(self):
        return {"n_docs": self.n_docs, "df": self.df}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["n_docs"]), {k: int(v) for k, v in d["df"].items()})


def tfidf_cosine(s1: Sequence[str], s2: Sequence[str], stats: CorpusStats) -> float:
    """Cosine of raw-count TF times ``ln(N / df) + 1`` IDF vectors."""
    c1 = Counter(t.lower() for t in s1)
    c2 = Counter(t.lower() for t in s2)
    shared = set(c1) & set(c2)
    if not shared:
        return 0.0
    w1 = {t: c * stats.idf(t) for t, c in c1.items()}
    w2 = {t: c * stats.idf(t) for t, c in c2.items()}
    dot = sum(w1[t] * w2[t] for t in shared)
    norm = math.sqrt(sum(v * v for v in w1.values())) * math.sqrt(sum(v * v for v in w2.values()))
    return min(1.0, dot / norm)


def _content(a) -> set:
    return set(a.noun_lemmas) | set(a.verb_lemmas)


def synset_distance(words1, words2, lex: Lexicon, disconnected=DISCONNECTED_PROBABILITY) -> float:
    """Mean over ``words1`` of the best path similarity to any of ``words2``."""
    words1, words2 = sorted(words1), sorted(words2)
    if not words1 or not words2:
        return 1.0 if not words1 and not words2 else 0.0
    best = []
    for w1 in words1:
        syn1 = sorted(lex.synonyms(w1))
        best.append(
            max(axiom_probability(a, b, lex, disconnected) for w2 in words2 for a in syn1 for b in sorted(lex.synonyms(w2)))
        )
    return float(np.mean(best))


def overlap_features(a1, a2, lex: Lexicon, disconnected=DISCONNECTED_PROBABILITY) -> Dict[str, float]:
    syn1 = set().union(*(lex.synonyms(l) for l in a1.lemmas)) if a1.lemmas else set()
    syn2 = set().union(*(lex.synonyms(l) for l in a2.lemmas)) if a2.lemmas else set()
    n1, n2 = len(a1.tokens), len(a2.tokens)
    return {
        "noun_overlap": _jaccard(a1.noun_lemmas, a2.noun_lemmas),
        "verb_overlap": _jaccard(a1.verb_lemmas, a2.verb_lemmas),
        "pos_overlap": _multiset_jaccard(Counter(a1.pos_tags), Counter(a2.pos_tags)),
        "synset_overlap": _jaccard(syn1, syn2),
        "synset_distance": synset_distance(_content(a1), _content(a2), lex, disconnected),
        "length_avg": (n1 + n2) / 2.0,
        "length_diff": float(abs(n1 - n2)),
        "passive": 1.0 if a1.passive or a2.passive else 0.0,
    }


def raw_features(entry, result: BidirectionalResult, lex: Lexicon, stats: CorpusStats, disconnected=DISCONNECTED_PROBABILITY):
    """Unscaled features of one entry in schema order."""
    values = dict(logic_features(result, entry.pair))
    values.update(overlap_features(entry.annotation1, entry.annotation2, lex, disconnected))
    values["string_similarity"] = string_similarity(entry.sentence1, entry.sentence2)
    values["tfidf_cosine"] = tfidf_cosine(entry.annotation1.tokens, entry.annotation2.tokens, stats)
    return np.array([values[n] for n in feature_schema()], dtype=float)


# ---------------------------------------------------------------------------
# Scaling and assembly
# ---------------------------------------------------------------------------


class Scaler(BaseEstimator, TransformerMixin):
    """Min-max scaling of the unbounded columns, clamping everything to [0, 1]."""

    def __init__(self, columns=None):
        self.columns = columns

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        names = feature_schema()
        if X.ndim != 2 or X.shape[1] != len(names):
            raise SchemaError(f"expected {len(names)} columns, got {X.shape}")
        cols = unbounded_features() if self.columns is None else list(self.columns)
        self.index_ = [names.index(c) for c in cols]
        self.min_ = X[:, self.index_].min(axis=0) if len(X) else np.zeros(len(cols))
        self.max_ = X[:, self.index_].max(axis=0) if len(X) else np.ones(len(cols))
        self.schema_hash_ = schema_hash()
        return self

    def transform(self, X):
        check_is_fitted(self, "index_")
        if self.schema_hash_ != schema_hash():
            raise SchemaError("feature schema changed since the scaler was fitted")
        X = np.array(X, dtype=float, copy=True)
        if X.ndim != 2 or X.shape[1] != len(feature_schema()):
            raise SchemaError(f"expected {len(feature_schema())} columns, got {X.shape}")
        span = self.max_ - self.min_
        safe = np.where(span > 0, span, 1.0)
        X[:, self.index_] = np.where(span > 0, (X[:, self.index_] - self.min_) / safe, 0.0)
        return np.clip(X, 0.0, 1.0)

    def to_dict(self):
        check_is_fitted(self, "index_")
        names = feature_schema()
        return {
            "schema_hash": self.schema_hash_,
            "columns": [names[i] for i in self.index_],
            "min": self.min_.tolist(),
            "max": self.max_.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "Scaler":
        if d["schema_hash"] != schema_hash():
            raise SchemaError("scaler was fitted on a different feature schema")
        s = cls(columns=list(d["columns"]))
        names = feature_schema()
        s.index_ = [names.index(c) for c in d["columns"]]
        s.min_ = np.array(d["min"], dtype=float)
        s.max_ = np.array(d["max"], dtype=float)
        s.schema_hash_ = d["schema_hash"]
        return s


@dataclass
class FeatureVector:
    names: List[str]
    values: np.ndarray

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))


def assemble(entry, result, scaler: Scaler, stats: CorpusStats, lex: Lexicon = None, disconnected=DISCONNECTED_PROBABILITY) -> FeatureVector:
    raw = raw_features(entry, result, lex or Lexicon(), stats, disconnected)
    return FeatureVector(feature_schema(), scaler.transform(raw[None, :])[0])


class FeatureExtractor(BaseEstimator, TransformerMixin):
    """Turns ``(entry, BidirectionalResult)`` pairs into scaled feature rows.

    ``fit`` learns the TF-IDF document frequencies and the scaler bounds,
    so it should only ever see training entries.
    """

    def __init__(self, lexicon=None, disconnected_probability=DISCONNECTED_PROBABILITY):
        self.lexicon = lexicon
        self.disconnected_probability = disconnected_probability

    def _lex(self):
        return self.lexicon if self.lexicon is not None else Lexicon()

    def _raw(self, X):
        lex = self._lex()
        rows = [raw_features(e, r, lex, self.stats_, self.disconnected_probability) for e, r in X]
        return np.array(rows, dtype=float).reshape(len(rows), len(feature_schema()))

    def fit(self, X, y=None):
        X = list(X)
        self.stats_ = CorpusStats.fit(doc for e, _ in X for doc in (e.annotation1.tokens, e.annotation2.tokens))
        self.scaler_ = Scaler().fit(self._raw(X))
        return self

    def transform(self, X):
        check_is_fitted(self, "scaler_")
        return self.scaler_.transform(self._raw(list(X)))

    def get_feature_names_out(self, input_features=None):
        return np.array(feature_schema(), dtype=object)

    def to_dict(self):
        check_is_fitted(self, "scaler_")
        return {"stats": self.stats_.to_dict(), "scaler": self.scaler_.to_dict(), "disconnected_probability": self.disconnected_probability}

    @classmethod
    def from_dict(cls, d, lexicon=None) -> "FeatureExtractor":
        fx = cls(lexicon, d.get("disconnected_probability", DISCONNECTED_PROBABILITY))
        fx.stats_ = CorpusStats.from_dict(d["stats"])
        fx.scaler_ = Scaler.from_dict(d["scaler"])
        return fx
