"""Finite-model checking and random formula pairs for testing the prover.

Models have separate entity and event domains ``{0, ..., n-1}``.  Bounded
entailment enumerates every interpretation of the pair's signature for
all domain sizes up to a bound and evaluates formulas over whole batches of
models at once with numpy.  :func:`satisfies` is the plain one-model
evaluator the batch path is tested against.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from .formula import (
    And,
    Atom,
    Const,
    Eq,
    Exists,
    Falsum,
    Forall,
    Imp,
    Not,
    RoleApp,
    Sort,
    Var,
    alpha_normalize,
    conj,
    exists,
    iter_terms,
    subterms,
)

DEFAULT_MAX_MODELS = 20_000_000
_CHUNK = 1 << 18


class OracleError(ValueError):
    pass


class SignatureTooLarge(OracleError):
    pass


@dataclass(frozen=True)
class Signature:
    predicates: Tuple[Tuple[str, Tuple[Sort, ...]], ...] = ()
    roles: Tuple[str, ...] = ()
    constants: Tuple[Tuple[str, Sort], ...] = ()
    sorts: Tuple[Sort, ...] = ()


def signature_of(*formulas) -> Signature:
    preds: Dict[str, Tuple[Sort, ...]] = {}
    roles, consts, sorts = set(), {}, set()

    def visit_term(t):
        for s in subterms(t):
            sorts.add(s.sort)
            if isinstance(s, RoleApp):
                roles.add(s.role)
                sorts.add(Sort.EVENT)
            elif isinstance(s, Const):
                consts[s.name] = s.sort

    def visit(f):
        if isinstance(f, Atom):
            preds[f.pred] = tuple(a.sort for a in f.args)
        elif isinstance(f, (Not,)):
            visit(f.body)
        elif isinstance(f, (And, Imp)):
            visit(f.left)
            visit(f.right)
        elif isinstance(f, (Exists, Forall)):
            sorts.add(f.var.sort)
            visit(f.body)
        if isinstance(f, (Atom, Eq)):
            for t in iter_terms(f):
                visit_term(t)

    for f in formulas:
        visit(f)
    return Signature(
        tuple(sorted(preds.items())),
        tuple(sorted(roles)),
        tuple(sorted(consts.items())),
        tuple(s for s in (Sort.ENTITY, Sort.EVENT) if s in sorts),
    )


@dataclass
class FiniteModel:
    entity_domain: int
    event_domain: int
    pred_interp: Dict[str, set] = field(default_factory=dict)
    role_interp: Dict[Tuple[str, int], int] = field(default_factory=dict)
    const_interp: Dict[str, int] = field(default_factory=dict)

    def size(self, sort):
        return self.event_domain if sort is Sort.EVENT else self.entity_domain


# ---------------------------------------------------------------------------
# Single-model evaluation
# ---------------------------------------------------------------------------


def _term_value(m: FiniteModel, t, env):
    if isinstance(t, Var):
        if t not in env:
            raise OracleError(f"free variable {t}")
        return env[t]
    if isinstance(t, Const):
        if t.name not in m.const_interp:
            raise OracleError(f"uninterpreted constant {t.name}")
        return m.const_interp[t.name]
    if isinstance(t, RoleApp):
        e = _term_value(m, t.arg, env)
        if (t.role, e) not in m.role_interp:
            raise OracleError(f"uninterpreted role {t.role}")
        return m.role_interp[(t.role, e)]
    raise OracleError(f"cannot evaluate term {t!r}")


def satisfies(m: FiniteModel, f, env=None) -> bool:
    env = {} if env is None else env
    if isinstance(f, Falsum):
        return False
    if isinstance(f, Atom):
        if f.pred not in m.pred_interp:
            raise OracleError(f"uninterpreted predicate {f.pred}")
        return tuple(_term_value(m, a, env) for a in f.args) in m.pred_interp[f.pred]
    if isinstance(f, Eq):
        return _term_value(m, f.lhs, env) == _term_value(m, f.rhs, env)
    if isinstance(f, Not):
        return not satisfies(m, f.body, env)
    if isinstance(f, And):
        return satisfies(m, f.left, env) and satisfies(m, f.right, env)
    if isinstance(f, Imp):
        return not satisfies(m, f.left, env) or satisfies(m, f.right, env)
    if isinstance(f, Exists):
        return any(satisfies(m, f.body, {**env, f.var: d}) for d in range(m.size(f.var.sort)))
    if isinstance(f, Forall):
        return all(satisfies(m, f.body, {**env, f.var: d}) for d in range(m.size(f.var.sort)))
    raise OracleError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def _size_combos(sig, max_size):
    ent = range(1, max_size + 1) if Sort.ENTITY in sig.sorts else (1,)
    evt = range(1, max_size + 1) if Sort.EVENT in sig.sorts else (1,)
    return [(nx, ne) for nx in ent for ne in evt]


def _radices(sig, nx, ne):
    size = {Sort.ENTITY: nx, Sort.EVENT: ne}
    out = []
    for name, sorts in sig.predicates:
        cells = int(np.prod([size[s] for s in sorts]))
        out.append(("pred", name, 2**cells, tuple(size[s] for s in sorts)))
    for role in sig.roles:
        out.append(("role", role, nx**ne, (ne,)))
    for name, sort in sig.constants:
        out.append(("const", name, size[sort], ()))
    return out


def count_models(sig: Signature, max_size: int) -> int:
    total = 0
    for nx, ne in _size_combos(sig, max_size):
        n = 1
        for _, _, radix, _ in _radices(sig, nx, ne):
            n *= radix
        total += n
    return total


@dataclass
class _Batch:
    nx: int
    ne: int
    n: int
    preds: Dict[str, np.ndarray]
    roles: Dict[str, np.ndarray]
    consts: Dict[str, np.ndarray]

    def size(self, sort):
        return self.ne if sort is Sort.EVENT else self.nx

    def take(self, rows) -> "_Batch":
        return _Batch(
            self.nx,
            self.ne,
            len(rows),
            {k: v[rows] for k, v in self.preds.items()},
            {k: v[rows] for k, v in self.roles.items()},
            {k: v[rows] for k, v in self.consts.items()},
        )

    def model(self, i) -> FiniteModel:
        preds = {}
        for name, table in self.preds.items():
            preds[name] = {tuple(int(v) for v in idx) for idx in zip(*np.nonzero(table[i]))}
        roles = {(r, e): int(t[i, e]) for r, t in self.roles.items() for e in range(self.ne)}
        consts = {c: int(v[i]) for c, v in self.consts.items()}
        return FiniteModel(self.nx, self.ne, preds, roles, consts)


def _batches(sig: Signature, max_size: int, max_models=DEFAULT_MAX_MODELS) -> Iterator[_Batch]:
    total = count_models(sig, max_size)
    if total > max_models:
        raise SignatureTooLarge(f"{total} models up to size {max_size} exceed the limit of {max_models}")
    for nx, ne in _size_combos(sig, max_size):
        radices = _radices(sig, nx, ne)
        n_models = 1
        for r in radices:
            n_models *= r[2]
        for start in range(0, n_models, _CHUNK):
            codes = np.arange(start, min(start + _CHUNK, n_models), dtype=np.int64)
            preds, roles, consts = {}, {}, {}
            for kind, name, radix, shape in radices:
                digit = codes % radix
                codes = codes // radix
                if kind == "pred":
                    cells = radix.bit_length() - 1
                    bits = (digit[:, None] >> np.arange(cells)) & 1
                    preds[name] = bits.astype(bool).reshape((len(digit),) + shape)
                elif kind == "role":
                    cols = []
                    for _ in range(ne):
                        cols.append(digit % nx)
                        digit = digit // nx
                    roles[name] = np.stack(cols, axis=1)
                else:
                    consts[name] = digit
            yield _Batch(nx, ne, len(digit), preds, roles, consts)


def enumerate_models(sig: Signature, max_size: int) -> Iterator[FiniteModel]:
    for batch in _batches(sig, max_size):
        for i in range(batch.n):
            yield batch.model(i)


def _batch_term(batch, t, env, rows):
    if isinstance(t, Var):
        return np.full(batch.n, env[t], dtype=np.int64)
    if isinstance(t, Const):
        return batch.consts[t.name]
    if isinstance(t, RoleApp):
        return batch.roles[t.role][rows, _batch_term(batch, t.arg, env, rows)]
    raise OracleError(f"cannot evaluate term {t!r}")


def _batch_eval(batch: _Batch, f, env, rows) -> np.ndarray:
    if isinstance(f, Falsum):
        return np.zeros(batch.n, dtype=bool)
    if isinstance(f, Atom):
        idx = tuple(_batch_term(batch, a, env, rows) for a in f.args)
        return batch.preds[f.pred][(rows,) + idx]
    if isinstance(f, Eq):
        return _batch_term(batch, f.lhs, env, rows) == _batch_term(batch, f.rhs, env, rows)
    if isinstance(f, Not):
        return ~_batch_eval(batch, f.body, env, rows)
    if isinstance(f, And):
        return _batch_eval(batch, f.left, env, rows) & _batch_eval(batch, f.right, env, rows)
    if isinstance(f, Imp):
        return ~_batch_eval(batch, f.left, env, rows) | _batch_eval(batch, f.right, env, rows)
    if isinstance(f, (Exists, Forall)):
        parts = [_batch_eval(batch, f.body, {**env, f.var: d}, rows) for d in range(batch.size(f.var.sort))]
        return np.logical_or.reduce(parts) if isinstance(f, Exists) else np.logical_and.reduce(parts)
    raise OracleError(f"not a formula: {f!r}")


def evaluate_batch(batch: _Batch, f) -> np.ndarray:
    return _batch_eval(batch, f, {}, np.arange(batch.n))


def find_countermodel(a, b, max_size=3, max_models=DEFAULT_MAX_MODELS) -> Optional[FiniteModel]:
    """A model of ``a`` that falsifies ``b``, with domains up to ``max_size``."""
    sig = signature_of(a, b)
    for batch in _batches(sig, max_size, max_models):
        models_of_a = batch.take(np.flatnonzero(evaluate_batch(batch, a)))
        if not models_of_a.n:
            continue
        hits = np.flatnonzero(~evaluate_batch(models_of_a, b))
        if hits.size:
            return models_of_a.model(int(hits[0]))
    return None


def entails_bounded(a, b, max_size: int = 3, max_models=DEFAULT_MAX_MODELS) -> bool:
    if max_size < 1:
        raise ValueError("max_size must be at least 1")
    return find_countermodel(a, b, max_size, max_models) is None


def satisfiable_bounded(f, max_size: int = 3, max_models=DEFAULT_MAX_MODELS) -> bool:
    sig = signature_of(f)
    for batch in _batches(sig, max_size, max_models):
        if evaluate_batch(batch, f).any():
            return True
    return False


# ---------------------------------------------------------------------------
# Random pairs
# ---------------------------------------------------------------------------

ENTITY_PREDS = ("dog", "cat")
EVENT_PREDS = ("run", "bark")


@dataclass
class SizeParams:
    max_entities: int = 2
    max_events: int = 2
    negation_rate: float = 0.25
    role_term_rate: float = 0.2


def _random_body(rng, size):
    xs = [Var(f"x{i + 1}", Sort.ENTITY) for i in range(rng.randint(1, size.max_entities))]
    es = [Var(f"e{i + 1}", Sort.EVENT) for i in range(rng.randint(1, size.max_events))]
    parts = []
    for x in xs:
        parts.append(Atom(rng.choice(ENTITY_PREDS), (x,)))
    for e in es:
        for pred in rng.sample(EVENT_PREDS, rng.randint(1, 2)):
            parts.append(Atom(pred, (e,)))
        if rng.random() < 0.7:
            x = rng.choice(xs)
            parts.append(Eq(RoleApp("subj", e), x))
            if rng.random() < size.role_term_rate:
                parts.append(Atom(rng.choice(ENTITY_PREDS), (RoleApp("subj", e),)))
    rng.shuffle(parts)
    return parts


def _close(parts):
    used = []
    for p in parts:
        for t in iter_terms(p):
            for s in subterms(t):
                if isinstance(s, Var) and s not in used:
                    used.append(s)
    used.sort(key=lambda v: (v.sort is Sort.ENTITY, v.name))
    return exists(used, conj(*parts))


def _perturb(rng, parts):
    parts = list(parts)
    atoms = [i for i, p in enumerate(parts) if isinstance(p, Atom)]
    i = rng.choice(atoms)
    p = parts[i]
    pool = EVENT_PREDS if p.args[0].sort is Sort.EVENT else ENTITY_PREDS
    parts[i] = Atom(rng.choice([q for q in pool if q != p.pred]), p.args)
    return parts


def _rewrite_role(parts):
    """Replace an entity by ``subj(e)`` wherever an equation allows it."""
    eqs = [p for p in parts if isinstance(p, Eq) and isinstance(p.lhs, RoleApp)]
    if not eqs:
        return parts
    eq = eqs[0]
    out = []
    for p in parts:
        if isinstance(p, Atom) and p.args == (eq.rhs,):
            out.append(Atom(p.pred, (eq.lhs,)))
        else:
            out.append(p)
    return out


def gen_pair(seed, size_params: SizeParams = None):
    """Deterministic random pair of closed existential-conjunctive formulas."""
    size = size_params or SizeParams()
    rng = random.Random(seed)
    parts_a = _random_body(rng, size)
    mode = rng.choice(["subset", "subset", "perturb", "fresh", "negate", "rewrite"])
    if mode == "subset":
        k = rng.randint(1, len(parts_a))
        parts_b = rng.sample(parts_a, k)
    elif mode == "perturb":
        parts_b = _perturb(rng, parts_a)
    elif mode == "rewrite":
        parts_b = _rewrite_role(rng.sample(parts_a, rng.randint(1, len(parts_a))))
    else:
        parts_b = _random_body(rng, size)
    a = _close(parts_a)
    b = _close(parts_b)
    if mode == "negate":
        b = Not(_close(rng.sample(parts_a, rng.randint(1, len(parts_a)))))
    if rng.random() < size.negation_rate:
        a = Not(a)
    if rng.random() < size.negation_rate / 2:
        b = Not(b)
    if rng.random() < 0.5:
        a, b = b, a
    return alpha_normalize(a), alpha_normalize(b)
