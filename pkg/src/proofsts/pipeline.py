"""Corpus-level proving and feature extraction with pair-level parallelism."""

from __future__ import annotations

import hashlib
import logging
from typing import Dict, List, Sequence

from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, TransformerMixin

from .lexicon import Lexicon
from .prover import BidirectionalResult, ProverConfig, run_pipeline

logger = logging.getLogger(__name__)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _prove_record(entry_id, pair, lex, config) -> Dict:
    try:
        result = run_pipeline(pair, lex, config)
    except Exception as e:  # one bad pair must not sink the run
        logger.exception("proving %s failed", entry_id)
        return {"id": entry_id, "error": f"{type(e).__name__}: {e}"}
    return {"id": entry_id, **result.to_dict()}


def prove_corpus(entries, lex: Lexicon, config: ProverConfig, n_jobs: int = 1) -> List[Dict]:
    """One JSON-ready record per entry, in input order."""
    return Parallel(n_jobs=n_jobs)(delayed(_prove_record)(e.id, e.pair, lex, config) for e in entries)


class PairProver(BaseEstimator, TransformerMixin):
    """Maps formula pairs to :class:`BidirectionalResult` objects."""

    def __init__(self, lexicon=None, step_budget=10_000, require_same_case=False, disconnected_probability=0.1, n_jobs=1):
        self.lexicon = lexicon
        self.step_budget = step_budget
        self.require_same_case = require_same_case
        self.disconnected_probability = disconnected_probability
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        return self

    def _config(self):
        return ProverConfig(self.step_budget, self.require_same_case, self.disconnected_probability)

    def transform(self, X: Sequence) -> List[BidirectionalResult]:
        lex = self.lexicon if self.lexicon is not None else Lexicon()
        config = self._config()
        dicts = Parallel(n_jobs=self.n_jobs)(delayed(_prove_dict)(pair, lex, config) for pair in X)
        return [BidirectionalResult.from_dict(d) for d in dicts]


def _prove_dict(pair, lex, config):
    return run_pipeline(pair, lex, config).to_dict()
