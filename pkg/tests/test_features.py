import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proofsts.formula import parse_formula
from proofsts.features import (
    CorpusStats,
    FeatureExtractor,
    Scaler,
    SchemaError,
    assemble,
    feature_schema,
    logic_features,
    overlap_features,
    pair_features,
    raw_features,
    string_similarity,
    synset_distance,
    tfidf_cosine,
    unbounded_features,
)
from proofsts.lexicon import Lexicon
from proofsts.oracle import gen_pair
from proofsts.prover import FEATURE_RULES, BidirectionalResult, run_pipeline

from conftest import SINGING, TEST_DATA, annotation, isa, lexicon, make_entry, mini_results


def matching_blocks_ratio(a, b):
    """2M/T with M from recursive longest common blocks, by brute force."""

    def longest(alo, ahi, blo, bhi):
        best = (alo, blo, 0)
        for i in range(alo, ahi):
            for j in range(blo, bhi):
                k = 0
                while i + k < ahi and j + k < bhi and a[i + k] == b[j + k]:
                    k += 1
                if k > best[2]:
                    best = (i, j, k)
        return best

    def matched(alo, ahi, blo, bhi):
        i, j, k = longest(alo, ahi, blo, bhi)
        if k == 0:
            return 0
        return k + matched(alo, i, blo, j) + matched(i + k, ahi, j + k, bhi)

    total = len(a) + len(b)
    return 1.0 if total == 0 else 2.0 * matched(0, len(a), 0, len(b)) / total


def logic(pair, lex=None):
    return dict(logic_features(run_pipeline(pair, lex or Lexicon()), pair))


class TestLogicFeatures:
    def test_entailment_pair(self, entailment_pair):
        f = logic(entailment_pair)
        assert f["fwd_inference_result"] == 1.0
        assert f["bwd_inference_result"] == 0.0
        assert f["bwd_ratio_total_after"] == pytest.approx(0.6)
        assert (f["bwd_case_subj"], f["bwd_case_obj"], f["bwd_case_dat"]) == (0.0, 0.0, 0.0)

    def test_literal_pool_ratio_saturates(self, entailment_pair):
        # three proved sub-goals over a three-premise pool
        assert logic(entailment_pair)["bwd_ratio_pool_after"] == 1.0

    def test_contradiction_pair(self, contradiction_pair):
        f = logic(contradiction_pair)
        assert f["fwd_inference_result"] == f["bwd_inference_result"] == 0.5
        assert f["has_negation"] == 1.0

    def test_identical_formulas(self):
        f = parse_formula(SINGING)
        feats = logic((f, f))
        assert feats["predicate_overlap"] == feats["semantic_type_overlap"] == 1.0
        for d in ("fwd", "bwd"):
            assert sum(feats[f"{d}_freq_{r}"] for r in FEATURE_RULES) == pytest.approx(1.0, abs=1e-9)

    def test_axiom_probability_average(self, hypernym_pair):
        f = logic(hypernym_pair, lexicon(isa("man", "person")))
        assert f["fwd_axiom_probability_avg"] == 0.5
        assert f["fwd_axiom_count"] == 1.0
        assert f["fwd_ratio_total_before"] == pytest.approx(2 / 3)
        assert f["fwd_ratio_total_after"] == 1.0

    def test_no_axioms_gives_full_probability(self, entailment_pair):
        assert logic(entailment_pair)["fwd_axiom_probability_avg"] == 1.0


pairs = st.integers(0, 100_000).map(gen_pair)


class TestLogicProperties:
    @settings(max_examples=60, deadline=None)
    @given(pairs)
    def test_inference_result_values(self, pair):
        f = logic(pair)
        assert f["fwd_inference_result"] in (0.0, 0.5, 1.0)
        assert f["bwd_inference_result"] in (0.0, 0.5, 1.0)

    @settings(max_examples=60, deadline=None)
    @given(pairs)
    def test_rule_frequencies_sum(self, pair):
        r = run_pipeline(pair, Lexicon())
        f = dict(logic_features(r, pair))
        for d, res in (("fwd", r.forward), ("bwd", r.backward)):
            total = sum(f[f"{d}_freq_{rule}"] for rule in FEATURE_RULES)
            if sum(res.trace.rule_counts().values()):
                assert total == pytest.approx(1.0, abs=1e-9)
            else:
                assert total == 0.0

    @settings(max_examples=60, deadline=None)
    @given(pairs)
    def test_pair_overlaps_symmetric(self, pair):
        a, b = pair
        assert pair_features(a, b) == pair_features(b, a)

    @settings(max_examples=60, deadline=None)
    @given(pairs)
    def test_bounded_features_in_unit_interval(self, pair):
        f = logic(pair)
        unbounded = set(unbounded_features())
        for name, v in f.items():
            if name not in unbounded:
                assert 0.0 <= v <= 1.0, name


class TestStringSimilarity:
    def test_identical(self):
        assert string_similarity("a man sings", "a man sings") == 1.0

    def test_disjoint(self):
        assert string_similarity("abc", "xyz") == 0.0

    def test_overlapping_blocks(self):
        assert string_similarity("abcd", "bcde") == 0.75

    @settings(max_examples=200, deadline=None)
    @given(st.text("abcde ", max_size=14), st.text("abcde ", max_size=14))
    def test_matches_brute_force(self, a, b):
        assert string_similarity(a, b) == matching_blocks_ratio(a, b)

    def test_long_strings_not_junk_filtered(self):
        rng = random.Random(3)
        a = "".join(rng.choice("ab") for _ in range(260))
        b = "".join(rng.choice("ab") for _ in range(250))
        assert string_similarity(a, b) == matching_blocks_ratio(a, b)


class TestTfidf:
    def test_identical(self):
        stats = CorpusStats.fit([["a", "b"], ["c"]])
        assert tfidf_cosine(["a", "b"], ["a", "b"], stats) == pytest.approx(1.0)

    def test_disjoint(self):
        stats = CorpusStats.fit([["a"], ["b"]])
        assert tfidf_cosine(["a"], ["b"], stats) == 0.0

    def test_two_document_corpus(self):
        stats = CorpusStats.fit([["a", "b"], ["a", "c"]])
        idf_rare = math.log(2 / 1) + 1
        expected = 1.0 / (1.0 + idf_rare**2)
        assert tfidf_cosine(["a", "b"], ["a", "c"], stats) == pytest.approx(expected, abs=1e-12)

    def test_stats_round_trip(self):
        stats = CorpusStats.fit([["a", "b"], ["a", "c"]])
        assert CorpusStats.from_dict(json.loads(json.dumps(stats.to_dict()))) == stats


class TestOverlapFeatures:
    def test_identical_annotations(self):
        a = annotation("a dog runs", nouns={"dog"}, verbs={"run"})
        f = overlap_features(a, a, Lexicon())
        for name in ("noun_overlap", "verb_overlap", "pos_overlap", "synset_overlap", "synset_distance"):
            assert f[name] == 1.0
        assert f["length_diff"] == 0.0

    def test_disjoint_nouns(self):
        f = overlap_features(annotation("a dog", nouns={"dog"}), annotation("a cat", nouns={"cat"}), Lexicon())
        assert f["noun_overlap"] == 0.0

    def test_synset_distance_two_edge_chain(self):
        lex = lexicon(isa("dog", "canine"), isa("canine", "animal"))
        assert synset_distance({"dog"}, {"animal"}, lex) == pytest.approx(1 / 3)
        f = overlap_features(annotation("dog", nouns={"dog"}), annotation("animal", nouns={"animal"}), lex)
        assert f["synset_distance"] == pytest.approx(1 / 3)

    def test_passive_if_either(self):
        f = overlap_features(annotation("x"), annotation("y", passive=True), Lexicon())
        assert f["passive"] == 1.0


class TestScaling:
    def test_training_extremes_map_to_endpoints(self):
        names = feature_schema()
        j = names.index("fwd_proof_steps")
        X = np.zeros((3, len(names)))
        X[:, j] = [2.0, 5.0, 8.0]
        out = Scaler().fit(X).transform(X)
        assert out[:, j].tolist() == [0.0, 0.5, 1.0]

    def test_unseen_extremes_clamped(self):
        names = feature_schema()
        j = names.index("length_avg")
        X = np.zeros((2, len(names)))
        X[:, j] = [4.0, 8.0]
        s = Scaler().fit(X)
        Y = np.zeros((2, len(names)))
        Y[:, j] = [1.0, 20.0]
        assert s.transform(Y)[:, j].tolist() == [0.0, 1.0]

    def test_wrong_width(self):
        with pytest.raises(SchemaError):
            Scaler().fit(np.zeros((2, 3)))

    def test_schema_hash_checked_on_load(self):
        d = Scaler().fit(np.zeros((1, len(feature_schema())))).to_dict()
        d["schema_hash"] = "0" * 16
        with pytest.raises(SchemaError):
            Scaler.from_dict(d)


@pytest.fixture(scope="module")
def mini():
    entries, results, lex = mini_results()
    pairs = list(zip(entries, results))
    fx = FeatureExtractor(lex).fit([p for p in pairs if p[0].split == "train"])
    return pairs, fx, lex


class TestAssembly:
    def test_vector_length_is_schema_length(self, mini):
        pairs, fx, lex = mini
        v = assemble(pairs[0][0], pairs[0][1], fx.scaler_, fx.stats_, lex)
        assert len(v.values) == len(feature_schema()) == len(v.names)

    def test_all_features_in_unit_interval(self, mini):
        pairs, fx, _ = mini
        X = fx.transform(pairs)
        assert X.min() >= 0.0 and X.max() <= 1.0

    def test_golden_vector(self, mini):
        pairs, fx, _ = mini
        golden = json.loads((TEST_DATA / "golden_p01_features.json").read_text())
        assert pairs[0][0].id == golden["id"]
        row = dict(zip(feature_schema(), fx.transform(pairs[:1])[0].tolist()))
        assert row == golden["features"]

    def test_extractor_round_trip(self, mini):
        pairs, fx, lex = mini
        again = FeatureExtractor.from_dict(json.loads(json.dumps(fx.to_dict())), lex)
        assert np.array_equal(again.transform(pairs), fx.transform(pairs))

    def test_serialized_proofs_give_same_features(self, hypernym_pair):
        lex = lexicon(isa("man", "person"))
        live = run_pipeline(hypernym_pair, lex)
        loaded = BidirectionalResult.from_dict(json.loads(json.dumps(live.to_dict())))
        entry = make_entry(hypernym_pair)
        stats = CorpusStats.fit([["a"]])
        assert np.array_equal(raw_features(entry, live, lex, stats), raw_features(entry, loaded, lex, stats))
