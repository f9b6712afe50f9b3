from pathlib import Path

import pytest

from proofsts.formula import parse_formula
from proofsts.lexicon import Lexicon

DATA = Path(__file__).resolve().parents[1] / "src" / "proofsts" / "data"
TEST_DATA = Path(__file__).resolve().parent / "data"

MINI_CORPUS = DATA / "mini_corpus.jsonl"
MINI_KB = DATA / "mini_kb.jsonl"
MINI_CONFIG = DATA / "mini_config.json"

SINGING_IN_BAR = "exists e1 x1 x2 . man(x1) & sing(e1) & subj(e1) = x1 & bar(x2) & in(e1, x2)"
SINGING = "exists e1 x1 . man(x1) & sing(e1) & subj(e1) = x1"
NOBODY_SINGING = "~ exists e1 x1 . man(x1) & sing(e1) & subj(e1) = x1"
SINGING_LOUDLY = "exists e1 x1 . man(x1) & sing(e1) & subj(e1) = x1 & loudly(e1)"
PERSON_SINGING = "exists e1 x1 . person(x1) & sing(e1) & subj(e1) = x1"
REMOVING_LID = "exists e1 x1 x2 . man(x1) & remove(e1) & subj(e1) = x1 & lid(x2) & obj(e1) = x2"
ADDING_LID = "exists e1 x1 x2 . man(x1) & add(e1) & subj(e1) = x1 & lid(x2) & obj(e1) = x2"


def lexicon(*records):
    return Lexicon.from_records(list(records))


def rel(a, b, kind):
    return {"type": "rel", "a": a, "b": b, "rel": kind}


def isa(child, parent):
    return {"type": "isa", "child": child, "parent": parent}


@pytest.fixture
def entailment_pair():
    return parse_formula(SINGING_IN_BAR), parse_formula(SINGING)


@pytest.fixture
def contradiction_pair():
    return parse_formula(NOBODY_SINGING), parse_formula(SINGING_LOUDLY)


@pytest.fixture
def hypernym_pair():
    return parse_formula(SINGING), parse_formula(PERSON_SINGING)


@pytest.fixture
def antonym_pair():
    return parse_formula(REMOVING_LID), parse_formula(ADDING_LID)


def annotation(sentence, nouns=(), verbs=(), passive=False):
    from proofsts.corpus import SentenceAnnotation

    tokens = tuple(sentence.split())
    return SentenceAnnotation(tokens, tuple(t.lower() for t in tokens), tuple("NN" for _ in tokens), frozenset(nouns), frozenset(verbs), passive)


def make_entry(pair, s1="a man sings", s2="a man sings", id="t", score=3.0, label="unknown"):
    from proofsts.corpus import CorpusEntry

    return CorpusEntry(id, s1, s2, annotation(s1), annotation(s2), pair[0], pair[1], score, label)


def mini_results():
    """Mini corpus entries with their proofs, as the CLI would see them."""
    from proofsts.corpus import RunConfig, load_corpus
    from proofsts.pipeline import prove_corpus
    from proofsts.prover import BidirectionalResult

    config = RunConfig.load(MINI_CONFIG)
    entries, errors = load_corpus(MINI_CORPUS, config.score_range)
    assert not errors
    lex = Lexicon.load(MINI_KB)
    records = prove_corpus(entries, lex, config.prover_config())
    return entries, [BidirectionalResult.from_dict(r) for r in records], lex


# Acceptance outcomes, filled in by test_acceptance and echoed after the run.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
