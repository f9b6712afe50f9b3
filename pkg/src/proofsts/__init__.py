"""Semantic textual similarity from natural deduction proofs.

Formula pairs in Neo-Davidsonian event semantics are proved in both
directions with a small natural deduction prover; features of the proofs
and of the sentences feed a random-forest regressor.
"""

from .formula import parse_formula, print_formula
from .lexicon import Axiom, Lexicon, RelationKind
from .prover import BidirectionalResult, DirectionResult, ProverConfig, Status, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "Axiom",
    "BidirectionalResult",
    "DirectionResult",
    "Lexicon",
    "ProverConfig",
    "RelationKind",
    "Status",
    "parse_formula",
    "print_formula",
    "run_pipeline",
]
