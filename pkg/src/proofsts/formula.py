"""Logical forms for event-semantics sentence representations.

Terms are variables, constants, proof-search metavariables and role
applications (``subj(e1)``).  Formulas cover the existential-conjunctive
fragment produced by semantic composition plus negation, implication and
universally quantified lexical axioms.

All node classes are frozen dataclasses, so formulas are hashable and can be
shared freely between proofs.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, Mapping, Optional, Set, Tuple, Union


class Sort(enum.Enum):
    ENTITY = "Entity"
    EVENT = "Event"
    PROP = "Prop"

    def __str__(self):
        return self.value


ROLES = ("subj", "obj", "dat")
KEYWORDS = ("exists", "forall", "False")

_EVENT_VAR = re.compile(r"^e\d+$")
_ENTITY_VAR = re.compile(r"^x\d+$")


class FormulaError(ValueError):
    """Base class for parse, sort and scoping errors."""


class FormulaSyntaxError(FormulaError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class SortError(FormulaError):
    pass


class FreeVariableError(FormulaError):
    pass


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str
    sort: Sort

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    name: str
    sort: Sort = Sort.ENTITY

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Meta:
    """Placeholder introduced when an existential goal is opened.

    ``uid`` keeps two metavariables with the same display name apart.
    """

    name: str
    sort: Sort
    uid: int

    def __str__(self):
        return "?" + self.name


@dataclass(frozen=True)
class RoleApp:
    role: str
    arg: "Term"

    @property
    def sort(self):
        return Sort.ENTITY

    def __str__(self):
        return f"{self.role}({self.arg})"


Term = Union[Var, Const, Meta, RoleApp]


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Falsum:
    def __str__(self):
        return "False"


FALSE = Falsum()


@dataclass(frozen=True)
class Atom:
    pred: str
    args: Tuple[Term, ...]

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Eq:
    lhs: Term
    rhs: Term

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Not:
    body: "Formula"

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Imp:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Exists:
    var: Var
    body: "Formula"

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Forall:
    var: Var
    body: "Formula"

    def __str__(self):
        return print_formula(self)


Formula = Union[Falsum, Atom, Eq, Not, And, Imp, Exists, Forall]
Quantifier = (Exists, Forall)


def is_atomic(f) -> bool:
    return isinstance(f, (Atom, Eq, Falsum))


def conj(*parts):
    """Right-nested conjunction of ``parts`` (at least one)."""
    parts = list(parts)
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = And(p, out)
    return out


def exists(variables, body):
    for v in reversed(list(variables)):
        body = Exists(v, body)
    return body


def flatten_and(f) -> list:
    if isinstance(f, And):
        return flatten_and(f.left) + flatten_and(f.right)
    return [f]


def strip_quantifier(f, kind=Exists):
    """Split a chain ``Q v1 Q v2 ... body`` into ``([v1, v2, ...], body)``."""
    variables = []
    while isinstance(f, kind):
        variables.append(f.var)
        f = f.body
    return variables, f


def var_sort(name: str) -> Optional[Sort]:
    if _EVENT_VAR.match(name):
        return Sort.EVENT
    if _ENTITY_VAR.match(name):
        return Sort.ENTITY
    return None


def term_sort(t) -> Sort:
    return t.sort


# ---------------------------------------------------------------------------
# Traversal helpers
# ---------------------------------------------------------------------------


def term_vars(t) -> Set[Var]:
    if isinstance(t, Var):
        return {t}
    if isinstance(t, RoleApp):
        return term_vars(t.arg)
    return set()


def iter_terms(f) -> Iterator:
    """Yield every top-level argument term of atoms and equations in ``f``."""
    if isinstance(f, Atom):
        yield from f.args
    elif isinstance(f, Eq):
        yield f.lhs
        yield f.rhs
    elif isinstance(f, Not):
        yield from iter_terms(f.body)
    elif isinstance(f, (And, Imp)):
        yield from iter_terms(f.left)
        yield from iter_terms(f.right)
    elif isinstance(f, Quantifier):
        yield from iter_terms(f.body)


def iter_atoms(f) -> Iterator:
    if isinstance(f, (Atom, Eq)):
        yield f
    elif isinstance(f, Not):
        yield from iter_atoms(f.body)
    elif isinstance(f, (And, Imp)):
        yield from iter_atoms(f.left)
        yield from iter_atoms(f.right)
    elif isinstance(f, Quantifier):
        yield from iter_atoms(f.body)


def subterms(t) -> Iterator:
    yield t
    if isinstance(t, RoleApp):
        yield from subterms(t.arg)


def free_vars(f) -> Set[Var]:
    if isinstance(f, Falsum):
        return set()
    if isinstance(f, Atom):
        out = set()
        for a in f.args:
            out |= term_vars(a)
        return out
    if isinstance(f, Eq):
        return term_vars(f.lhs) | term_vars(f.rhs)
    if isinstance(f, Not):
        return free_vars(f.body)
    if isinstance(f, (And, Imp)):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, Quantifier):
        return free_vars(f.body) - {f.var}
    raise TypeError(f"not a formula: {f!r}")


def bound_vars(f) -> Set[Var]:
    if isinstance(f, Not):
        return bound_vars(f.body)
    if isinstance(f, (And, Imp)):
        return bound_vars(f.left) | bound_vars(f.right)
    if isinstance(f, Quantifier):
        return {f.var} | bound_vars(f.body)
    return set()


def contains_negation(f) -> bool:
    if isinstance(f, Not):
        return True
    if isinstance(f, Imp):
        if isinstance(f.right, Falsum):
            return True
        return contains_negation(f.left) or contains_negation(f.right)
    if isinstance(f, And):
        return contains_negation(f.left) or contains_negation(f.right)
    if isinstance(f, Quantifier):
        return contains_negation(f.body)
    return False


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------


def substitute_term(t, binding: Mapping):
    if isinstance(t, (Var, Meta)):
        return binding.get(t, t)
    if isinstance(t, RoleApp):
        arg = substitute_term(t.arg, binding)
        return t if arg is t.arg else RoleApp(t.role, arg)
    return t


def _fresh_var(sort: Sort, avoid: Set[str]) -> Var:
    prefix = "e" if sort is Sort.EVENT else "x"
    i = 1
    while f"{prefix}{i}" in avoid:
        i += 1
    return Var(f"{prefix}{i}", sort)


def substitute(f, binding: Mapping):
    """Capture-avoiding substitution of variables (or metavariables) by terms.

    Raises :class:`SortError` if a binding changes the sort of a variable.
    """
    for v, t in binding.items():
        if v.sort is not term_sort(t):
            raise SortError(f"cannot substitute {t} ({term_sort(t)}) for {v} ({v.sort})")
    return _subst(f, dict(binding))


def _subst(f, binding):
    if not binding:
        return f
    if isinstance(f, Falsum):
        return f
    if isinstance(f, Atom):
        return Atom(f.pred, tuple(substitute_term(a, binding) for a in f.args))
    if isinstance(f, Eq):
        return Eq(substitute_term(f.lhs, binding), substitute_term(f.rhs, binding))
    if isinstance(f, Not):
        return Not(_subst(f.body, binding))
    if isinstance(f, And):
        return And(_subst(f.left, binding), _subst(f.right, binding))
    if isinstance(f, Imp):
        return Imp(_subst(f.left, binding), _subst(f.right, binding))
    if isinstance(f, Quantifier):
        inner = {k: v for k, v in binding.items() if k != f.var}
        body_free = free_vars(f.body)
        inner = {k: v for k, v in inner.items() if not isinstance(k, Var) or k in body_free}
        if not inner:
            return f
        incoming = set()
        for t in inner.values():
            incoming |= term_vars(t)
        var = f.var
        if var in incoming:
            avoid = {v.name for v in incoming | body_free | bound_vars(f.body)}
            avoid |= {k.name for k in inner if isinstance(k, Var)}
            new_var = _fresh_var(var.sort, avoid)
            inner[var] = new_var
            var = new_var
        return type(f)(var, _subst(f.body, inner))
    raise TypeError(f"not a formula: {f!r}")


def alpha_normalize(f):
    """Rename bound variables to e1, e2, ... / x1, x2, ... in binder order.

    Names already used by free variables are skipped.  Applying the function
    twice gives the same result as applying it once.
    """
    reserved = {v.name for v in free_vars(f)}
    counters = {Sort.EVENT: 0, Sort.ENTITY: 0}

    def fresh(sort):
        prefix = "e" if sort is Sort.EVENT else "x"
        while True:
            counters[sort] += 1
            name = f"{prefix}{counters[sort]}"
            if name not in reserved:
                return Var(name, sort)

    def go(g, env):
        if isinstance(g, Falsum):
            return g
        if isinstance(g, Atom):
            return Atom(g.pred, tuple(substitute_term(a, env) for a in g.args))
        if isinstance(g, Eq):
            return Eq(substitute_term(g.lhs, env), substitute_term(g.rhs, env))
        if isinstance(g, Not):
            return Not(go(g.body, env))
        if isinstance(g, (And, Imp)):
            left = go(g.left, env)
            return type(g)(left, go(g.right, env))
        if isinstance(g, Quantifier):
            v = fresh(g.var.sort)
            return type(g)(v, go(g.body, {**env, g.var: v}))
        raise TypeError(f"not a formula: {g!r}")

    return go(f, {})


def alpha_equivalent(f, g) -> bool:
    return alpha_normalize(f) == alpha_normalize(g)


# ---------------------------------------------------------------------------
# Sort checking
# ---------------------------------------------------------------------------


def sort_check(f, signature: Optional[Dict[str, Tuple[Sort, ...]]] = None):
    """Check that ``f`` is well sorted and return the predicate signature.

    ``signature`` maps predicate names to argument sorts; it is extended in
    place, so passing one dict for a whole corpus enforces consistent use
    of every predicate symbol across formulas.
    """
    if signature is None:
        signature = {}

    def check_term(t):
        if isinstance(t, RoleApp):
            if t.role not in ROLES:
                raise SortError(f"unknown role function {t.role!r}")
            check_term(t.arg)
            if term_sort(t.arg) is not Sort.EVENT:
                raise SortError(f"role {t.role} applied to non-event term {t.arg}")
        elif term_sort(t) not in (Sort.ENTITY, Sort.EVENT):
            raise SortError(f"term {t} has sort {term_sort(t)}")

    def go(g):
        if isinstance(g, Falsum):
            return
        if isinstance(g, Atom):
            if not 1 <= len(g.args) <= 2:
                raise SortError(f"predicate {g.pred} has arity {len(g.args)}; only 1 or 2 allowed")
            for a in g.args:
                check_term(a)
            sorts = tuple(term_sort(a) for a in g.args)
            known = signature.setdefault(g.pred, sorts)
            if known != sorts:
                raise SortError(
                    f"predicate {g.pred} used with sorts {_fmt_sorts(sorts)}, "
                    f"previously {_fmt_sorts(known)}"
                )
        elif isinstance(g, Eq):
            check_term(g.lhs)
            check_term(g.rhs)
            if term_sort(g.lhs) is not term_sort(g.rhs):
                raise SortError(f"equation {g.lhs} = {g.rhs} mixes sorts")
        elif isinstance(g, Not):
            go(g.body)
        elif isinstance(g, (And, Imp)):
            go(g.left)
            go(g.right)
        elif isinstance(g, Quantifier):
            go(g.body)
        else:
            raise TypeError(f"not a formula: {g!r}")

    go(f)
    return signature


def _fmt_sorts(sorts):
    return "x".join(str(s) for s in sorts)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s+|#[^\n]*|(?P<op>->|[~&().,=])|(?P<ident>[A-Za-z_][A-Za-z0-9_']*)|(?P<bad>.)"
)


def _tokenize(text):
    tokens = []
    for m in _TOKEN.finditer(text):
        if m.group("op"):
            tokens.append((m.group("op"), m.group("op"), m.start()))
        elif m.group("ident"):
            tokens.append(("ident", m.group("ident"), m.start()))
        elif m.group("bad"):
            raise FormulaSyntaxError(f"unexpected character {m.group('bad')!r}", m.start())
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, event_constants):
        self.tokens = _tokenize(text)
        self.i = 0
        self.event_constants = event_constants

    def peek(self, k=0):
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def take(self, kind=None):
        tok = self.tokens[self.i]
        if kind is not None and tok[0] != kind:
            want = "identifier" if kind == "ident" else repr(kind)
            got = "end of input" if tok[0] == "eof" else repr(tok[1])
            raise FormulaSyntaxError(f"expected {want}, got {got}", tok[2])
        self.i += 1
        return tok

    def parse(self):
        f = self.imp()
        tok = self.peek()
        if tok[0] != "eof":
            raise FormulaSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return f

    def imp(self):
        left = self.conj()
        if self.peek()[0] == "->":
            self.take()
            return Imp(left, self.imp())
        return left

    def conj(self):
        left = self.unary()
        if self.peek()[0] == "&":
            self.take()
            return And(left, self.conj())
        return left

    def unary(self):
        kind, value, pos = self.peek()
        if kind == "~":
            self.take()
            return Not(self.unary())
        if kind == "(":
            self.take()
            f = self.imp()
            self.take(")")
            return f
        if kind == "ident" and value in ("exists", "forall"):
            self.take()
            variables = []
            while self.peek()[0] == "ident":
                _, name, vpos = self.take()
                sort = var_sort(name)
                if sort is None:
                    raise FormulaSyntaxError(
                        f"bound variable {name!r} must look like e<digits> or x<digits>", vpos
                    )
                variables.append(Var(name, sort))
            if not variables:
                raise FormulaSyntaxError(f"{value} needs at least one variable", self.peek()[2])
            self.take(".")
            body = self.imp()
            cls = Exists if value == "exists" else Forall
            for v in reversed(variables):
                body = cls(v, body)
            return body
        if kind == "ident" and value == "False":
            self.take()
            return FALSE
        if kind == "ident":
            if value not in ROLES and self.peek(1)[0] == "(":
                return self.atom()
            lhs = self.term()
            self.take("=")
            return Eq(lhs, self.term())
        got = "end of input" if kind == "eof" else repr(value)
        raise FormulaSyntaxError(f"expected a formula, got {got}", pos)

    def atom(self):
        _, pred, pos = self.take("ident")
        if pred in KEYWORDS:
            raise FormulaSyntaxError(f"{pred!r} cannot be a predicate", pos)
        self.take("(")
        args = [self.term()]
        while self.peek()[0] == ",":
            self.take()
            args.append(self.term())
        self.take(")")
        if self.peek()[0] == "=":
            raise FormulaSyntaxError("atoms are not terms", self.peek()[2])
        if len(args) > 2:
            raise SortError(f"predicate {pred} at position {pos} has arity {len(args)}; only 1 or 2 allowed")
        return Atom(pred, tuple(args))

    def term(self):
        _, name, pos = self.take("ident")
        if name in KEYWORDS:
            raise FormulaSyntaxError(f"{name!r} is not a term", pos)
        if name in ROLES:
            self.take("(")
            arg = self.term()
            self.take(")")
            return RoleApp(name, arg)
        sort = var_sort(name)
        if sort is not None:
            return Var(name, sort)
        if self.peek()[0] == "(":
            raise FormulaSyntaxError(f"unknown function symbol {name!r}", pos)
        return Const(name, Sort.EVENT if name in self.event_constants else Sort.ENTITY)


def parse_formula(
    text: str,
    *,
    event_constants: Iterable[str] = (),
    signature: Optional[Dict[str, Tuple[Sort, ...]]] = None,
    allow_free: bool = False,
):
    """Parse ``text`` into a sort-checked, alpha-normalized formula.

    >>> print_formula(parse_formula("exists x1 . man(x1)"))
    'exists x1 . man(x1)'
    """
    f = _Parser(text, frozenset(event_constants)).parse()
    sort_check(f, signature)
    if not allow_free:
        free = free_vars(f)
        if free:
            names = ", ".join(sorted(v.name for v in free))
            raise FreeVariableError(f"free variables in closed formula: {names}")
    return alpha_normalize(f)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_IMP, _AND, _UNARY = 1, 2, 3


def print_term(t) -> str:
    return str(t)


def print_formula(f) -> str:
    return _fmt(f, 0, True)


def _fmt(f, prec, rightmost):
    if isinstance(f, Falsum):
        return "False"
    if isinstance(f, Atom):
        return f"{f.pred}({', '.join(print_term(a) for a in f.args)})"
    if isinstance(f, Eq):
        return f"{print_term(f.lhs)} = {print_term(f.rhs)}"
    if isinstance(f, Not):
        return "~" + _fmt(f.body, _UNARY, rightmost)
    if isinstance(f, Quantifier):
        # scope extends maximally to the right, so wrap unless nothing follows
        kind = type(f)
        variables, body = strip_quantifier(f, kind)
        word = "exists" if kind is Exists else "forall"
        s = f"{word} {' '.join(v.name for v in variables)} . {_fmt(body, 0, True)}"
        return s if rightmost else f"({s})"
    if isinstance(f, And):
        wrap = prec > _AND
        rm = True if wrap else rightmost
        s = f"{_fmt(f.left, _UNARY, False)} & {_fmt(f.right, _AND, rm)}"
        return f"({s})" if wrap else s
    if isinstance(f, Imp):
        wrap = prec > _IMP
        rm = True if wrap else rightmost
        s = f"{_fmt(f.left, _AND, False)} -> {_fmt(f.right, _IMP, rm)}"
        return f"({s})" if wrap else s
    raise TypeError(f"not a formula: {f!r}")
