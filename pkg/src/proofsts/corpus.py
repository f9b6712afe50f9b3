"""Corpus entries, sentence annotations and run configuration.

A corpus is a JSON-lines file.  An optional first record declares constants
of sort Event::

    {"type": "signature", "event_constants": ["e_now"]}

Every other line is one sentence pair::

    {"id": "p1", "sentence1": "...", "sentence2": "...",
     "annotation1": {"tokens": [...], "lemmas": [...], "pos": [...], "passive": false},
     "annotation2": {...},
     "formula1": "exists e1 x1 . ...", "formula2": "...",
     "score": 4.5, "label": "yes", "split": "train"}

Bad entries do not abort loading; they are returned as :class:`EntryError`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

from .formula import FormulaError, parse_formula
from .prover import ProverConfig

LABELS = ("yes", "no", "unknown")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class SentenceAnnotation:
    tokens: Tuple[str, ...]
    lemmas: Tuple[str, ...]
    pos_tags: Tuple[str, ...]
    noun_lemmas: frozenset = frozenset()
    verb_lemmas: frozenset = frozenset()
    passive: bool = False

    def __post_init__(self):
        if not (len(self.tokens) == len(self.lemmas) == len(self.pos_tags)):
            raise CorpusError(
                f"tokens, lemmas and pos tags differ in length "
                f"({len(self.tokens)}, {len(self.lemmas)}, {len(self.pos_tags)})"
            )

    @classmethod
    def from_dict(cls, d) -> "SentenceAnnotation":
        tokens = tuple(d["tokens"])
        lemmas = tuple(d.get("lemmas", [t.lower() for t in tokens]))
        pos = tuple(d["pos"])
        nouns = d.get("nouns")
        verbs = d.get("verbs")
        if nouns is None:
            nouns = [l for l, p in zip(lemmas, pos) if p.startswith("NN")]
        if verbs is None:
            verbs = [l for l, p in zip(lemmas, pos) if p.startswith("VB")]
        return cls(tokens, lemmas, pos, frozenset(nouns), frozenset(verbs), bool(d.get("passive", False)))

    def to_dict(self):
        return {
            "tokens": list(self.tokens),
            "lemmas": list(self.lemmas),
            "pos": list(self.pos_tags),
            "nouns": sorted(self.noun_lemmas),
            "verbs": sorted(self.verb_lemmas),
            "passive": self.passive,
        }


@dataclass
class CorpusEntry:
    id: str
    sentence1: str
    sentence2: str
    annotation1: SentenceAnnotation
    annotation2: SentenceAnnotation
    formula1: object
    formula2: object
    gold_score: float
    gold_label: Optional[str] = None
    split: str = "train"

    @property
    def pair(self):
        return self.formula1, self.formula2


@dataclass
class EntryError:
    id: str
    line: int
    message: str
    position: Optional[int] = None

    def to_dict(self):
        return {"id": self.id, "line": self.line, "error": self.message, "position": self.position}


def _entry(rec, signature, event_constants, score_range):
    score = float(rec["score"])
    lo, hi = score_range
    if not lo <= score <= hi:
        raise CorpusError(f"score {score} outside [{lo}, {hi}]")
    label = rec.get("label")
    if label is not None and label not in LABELS:
        raise CorpusError(f"unknown label {label!r}")
    formulas = []
    for key in ("formula1", "formula2"):
        try:
            formulas.append(parse_formula(rec[key], event_constants=event_constants, signature=signature))
        except FormulaError as e:
            e.field = key
            raise
    return CorpusEntry(
        id=str(rec["id"]),
        sentence1=rec["sentence1"],
        sentence2=rec["sentence2"],
        annotation1=SentenceAnnotation.from_dict(rec["annotation1"]),
        annotation2=SentenceAnnotation.from_dict(rec["annotation2"]),
        formula1=formulas[0],
        formula2=formulas[1],
        gold_score=score,
        gold_label=label,
        split=rec.get("split", "train"),
    )


def load_corpus(path, score_range=(0.0, 5.0)) -> Tuple[List[CorpusEntry], List[EntryError]]:
    """Read a corpus file, collecting per-entry errors instead of raising.

    Predicate signatures are shared across the whole corpus, so a predicate
    used with two different arities or sorts is reported on the later entry.
    """
    entries, errors = [], []
    signature: Dict[str, tuple] = {}
    event_constants: Tuple[str, ...] = ()
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                errors.append(EntryError("?", n, f"invalid JSON: {e.msg}", e.pos))
                continue
            if rec.get("type") == "signature":
                event_constants = tuple(rec.get("event_constants", ()))
                continue
            eid = str(rec.get("id", f"line{n}"))
            if eid in seen:
                errors.append(EntryError(eid, n, "duplicate id"))
                continue
            trial = dict(signature)
            try:
                entry = _entry(rec, trial, event_constants, score_range)
            except FormulaError as e:
                where = getattr(e, "field", "formula")
                errors.append(EntryError(eid, n, f"{where}: {e}", getattr(e, "position", None)))
                continue
            except (CorpusError, KeyError, TypeError, ValueError) as e:
                msg = f"missing field {e}" if isinstance(e, KeyError) else str(e)
                errors.append(EntryError(eid, n, msg))
                continue
            signature = trial
            seen.add(eid)
            entries.append(entry)
    return entries, errors


DEFAULT_GRID = {
    "n_trees": [100, 300],
    "max_depth": [8, 16, None],
    "min_samples_leaf": [1, 5],
    "features_per_split": ["third", "sqrt"],
}


@dataclass
class RunConfig:
    step_budget: int = 10_000
    require_same_case: bool = False
    disconnected_probability: float = 0.1
    grid: Dict[str, list] = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_GRID.items()})
    k_folds: int = 5
    seed: int = 0
    train_split: str = "train"
    score_range: Tuple[float, float] = (0.0, 5.0)

    def prover_config(self) -> ProverConfig:
        return ProverConfig(self.step_budget, self.require_same_case, self.disconnected_probability)

    def to_dict(self):
        d = asdict(self)
        d["score_range"] = list(self.score_range)
        return d

    @classmethod
    def from_dict(cls, d) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise CorpusError(f"unknown config keys: {sorted(extra)}")
        d = dict(d)
        if "score_range" in d:
            d["score_range"] = tuple(d["score_range"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()
