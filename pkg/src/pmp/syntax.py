"""Terms, formulas and formula-level measures for a second-order arithmetic language.

Formulas are in negation normal form (negation lives on literals only) and are
immutable. Bound variables are renamed on construction to reserved de-Bruijn
style names ("%k" = k binders between occurrence and binder), so structural
equality coincides with alpha-equivalence and every instantiated subformula is
again in canonical form. Names starting with "%" are reserved for this.

Second-order variables carry a level (a natural number) when free; bound
occurrences are unleveled (level None).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import total_ordering

from . import sexpr

RESERVED_PREFIX = "%"


class SyntaxError_(ValueError):
    pass


# ---------------------------------------------------------------------------
# Terms: 0, successor, first-order variables.


@dataclass(frozen=True)
class Term:
    pass


@dataclass(frozen=True)
class Zero(Term):
    pass


@dataclass(frozen=True)
class Succ(Term):
    arg: Term


@dataclass(frozen=True)
class FVar(Term):
    name: str


ZERO = Zero()


def num(n: int) -> Term:
    if n < 0:
        raise SyntaxError_(f"numerals are naturals, got {n}")
    t: Term = ZERO
    for _ in range(n):
        t = Succ(t)
    return t


def term_value(t: Term) -> int:
    """Value of a closed term; raises on variables."""
    k = 0
    while isinstance(t, Succ):
        k += 1
        t = t.arg
    if not isinstance(t, Zero):
        raise SyntaxError_(f"open term has no value: {render_term(t)}")
    return k


def term_vars(t: Term) -> frozenset[str]:
    out = set()
    while isinstance(t, Succ):
        t = t.arg
    if isinstance(t, FVar):
        out.add(t.name)
    return frozenset(out)


def term_subst(t: Term, name: str, repl: Term) -> Term:
    if isinstance(t, Succ):
        return Succ(term_subst(t.arg, name, repl))
    if isinstance(t, FVar) and t.name == name:
        return repl
    return t


# ---------------------------------------------------------------------------
# Second-order variables.


@dataclass(frozen=True, order=True)
class SecondOrderVar:
    name: str
    level: int | None = None  # None = unleveled (bound, or finitary free)

    def __str__(self):
        if self.level is None:
            return self.name
        return f"{self.name}^{self.level}"


def sv(name: str, level: int | None = None) -> SecondOrderVar:
    if name.startswith(RESERVED_PREFIX):
        raise SyntaxError_(f"variable name {name!r} uses the reserved prefix")
    return SecondOrderVar(name, level)


# ---------------------------------------------------------------------------
# Relations: a fixed extensible catalog of decidable relations on naturals.

_RELATIONS: dict[str, tuple[int, object]] = {}


def register_relation(name: str, arity: int, decide) -> None:
    _RELATIONS[name] = (arity, decide)


register_relation("=", 2, lambda a, b: a == b)
register_relation("<", 2, lambda a, b: a < b)
register_relation("<=", 2, lambda a, b: a <= b)
register_relation("+", 3, lambda a, b, c: a + b == c)
register_relation("*", 3, lambda a, b, c: a * b == c)


def relation_arity(name: str) -> int:
    if name not in _RELATIONS:
        raise SyntaxError_(f"unknown relation {name!r}")
    return _RELATIONS[name][0]


# ---------------------------------------------------------------------------
# Formulas.


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class PrimLit(Formula):
    rel: str
    positive: bool
    terms: tuple[Term, ...]


@dataclass(frozen=True)
class SetLit(Formula):
    var: SecondOrderVar
    positive: bool
    term: Term


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class ForallN(Formula):
    var: str  # always the marker "%" after construction
    body: Formula


@dataclass(frozen=True)
class ExistsN(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class ForallS(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class ExistsS(Formula):
    var: str
    body: Formula


QUANTIFIERS = (ForallN, ExistsN, ForallS, ExistsS)
FIRST_ORDER_Q = (ForallN, ExistsN)
SECOND_ORDER_Q = (ForallS, ExistsS)


def lit(rel: str, *terms: Term | int) -> Formula:
    return _mklit(rel, True, terms)


def nlit(rel: str, *terms: Term | int) -> Formula:
    return _mklit(rel, False, terms)


def _mklit(rel, positive, terms):
    ts = tuple(num(t) if isinstance(t, int) else t for t in terms)
    if len(ts) != relation_arity(rel):
        raise SyntaxError_(f"relation {rel!r} expects {relation_arity(rel)} terms")
    return PrimLit(rel, positive, ts)


def setlit(var: SecondOrderVar, term: Term | int, positive: bool = True) -> Formula:
    if isinstance(term, int):
        term = num(term)
    return SetLit(var, positive, term)


def conj(a: Formula, b: Formula) -> Formula:
    return And(a, b)


def disj(a: Formula, b: Formula) -> Formula:
    return Or(a, b)


def _bind_fo(body: Formula, name: str, depth: int) -> Formula:
    """Replace free first-order occurrences of `name` by their de-Bruijn name."""
    if isinstance(body, PrimLit):
        ts = tuple(term_subst(t, name, FVar(f"%{depth}")) for t in body.terms)
        return PrimLit(body.rel, body.positive, ts)
    if isinstance(body, SetLit):
        return SetLit(body.var, body.positive, term_subst(body.term, name, FVar(f"%{depth}")))
    if isinstance(body, And):
        return And(_bind_fo(body.left, name, depth), _bind_fo(body.right, name, depth))
    if isinstance(body, Or):
        return Or(_bind_fo(body.left, name, depth), _bind_fo(body.right, name, depth))
    if isinstance(body, QUANTIFIERS):
        return type(body)(body.var, _bind_fo(body.body, name, depth + 1))
    raise SyntaxError_(f"bad formula {body!r}")


def _bind_so(body: Formula, name: str, depth: int) -> Formula:
    if isinstance(body, PrimLit):
        return body
    if isinstance(body, SetLit):
        v = body.var
        if v.level is None and v.name == name:
            return SetLit(SecondOrderVar(f"%{depth}", None), body.positive, body.term)
        return body
    if isinstance(body, And):
        return And(_bind_so(body.left, name, depth), _bind_so(body.right, name, depth))
    if isinstance(body, Or):
        return Or(_bind_so(body.left, name, depth), _bind_so(body.right, name, depth))
    if isinstance(body, QUANTIFIERS):
        return type(body)(body.var, _bind_so(body.body, name, depth + 1))
    raise SyntaxError_(f"bad formula {body!r}")


def fa1(name: str, body: Formula) -> Formula:
    if name.startswith(RESERVED_PREFIX):
        raise SyntaxError_("reserved variable name")
    return ForallN("%", _bind_fo(body, name, 0))


def ex1(name: str, body: Formula) -> Formula:
    if name.startswith(RESERVED_PREFIX):
        raise SyntaxError_("reserved variable name")
    return ExistsN("%", _bind_fo(body, name, 0))


def fa2(name: str, body: Formula) -> Formula:
    if name.startswith(RESERVED_PREFIX):
        raise SyntaxError_("reserved variable name")
    return ForallS("%", _bind_so(body, name, 0))


def ex2(name: str, body: Formula) -> Formula:
    if name.startswith(RESERVED_PREFIX):
        raise SyntaxError_("reserved variable name")
    return ExistsS("%", _bind_so(body, name, 0))


# ---------------------------------------------------------------------------
# Negation (an involution; formulas stay in negation normal form).


def negate(phi: Formula) -> Formula:
    if isinstance(phi, PrimLit):
        return PrimLit(phi.rel, not phi.positive, phi.terms)
    if isinstance(phi, SetLit):
        return SetLit(phi.var, not phi.positive, phi.term)
    if isinstance(phi, And):
        return Or(negate(phi.left), negate(phi.right))
    if isinstance(phi, Or):
        return And(negate(phi.left), negate(phi.right))
    if isinstance(phi, ForallN):
        return ExistsN(phi.var, negate(phi.body))
    if isinstance(phi, ExistsN):
        return ForallN(phi.var, negate(phi.body))
    if isinstance(phi, ForallS):
        return ExistsS(phi.var, negate(phi.body))
    if isinstance(phi, ExistsS):
        return ForallS(phi.var, negate(phi.body))
    raise SyntaxError_(f"bad formula {phi!r}")


# ---------------------------------------------------------------------------
# Substitution and instantiation.


def subst_num(phi: Formula, name: str, t: Term) -> Formula:
    """Replace the free first-order variable `name` by `t` (capture-free:
    bound occurrences carry reserved names that never collide)."""
    if isinstance(phi, PrimLit):
        return PrimLit(phi.rel, phi.positive, tuple(term_subst(u, name, t) for u in phi.terms))
    if isinstance(phi, SetLit):
        return SetLit(phi.var, phi.positive, term_subst(phi.term, name, t))
    if isinstance(phi, And):
        return And(subst_num(phi.left, name, t), subst_num(phi.right, name, t))
    if isinstance(phi, Or):
        return Or(subst_num(phi.left, name, t), subst_num(phi.right, name, t))
    if isinstance(phi, QUANTIFIERS):
        return type(phi)(phi.var, subst_num(phi.body, name, t))
    raise SyntaxError_(f"bad formula {phi!r}")


@dataclass(frozen=True)
class SetAbstract:
    """A formula with one distinguished first-order hole: x . body."""

    hole: str
    body: Formula

    def __post_init__(self):
        if self.hole.startswith(RESERVED_PREFIX):
            raise SyntaxError_("reserved hole name")
        fo, so = free_vars(self.body)
        for nm in fo | {v.name for v in so}:
            if nm.startswith(RESERVED_PREFIX):
                raise SyntaxError_("abstract body has reserved free names")

    def at(self, t: Term | int) -> Formula:
        if isinstance(t, int):
            t = num(t)
        return subst_num(self.body, self.hole, t)


def subst_set(phi: Formula, var: SecondOrderVar, ab: SetAbstract) -> Formula:
    """Replace literals `var t` / `not var t` by ab(t) / ~ab(t)."""
    if isinstance(phi, PrimLit):
        return phi
    if isinstance(phi, SetLit):
        if phi.var == var:
            inst = ab.at(phi.term)
            return inst if phi.positive else negate(inst)
        return phi
    if isinstance(phi, And):
        return And(subst_set(phi.left, var, ab), subst_set(phi.right, var, ab))
    if isinstance(phi, Or):
        return Or(subst_set(phi.left, var, ab), subst_set(phi.right, var, ab))
    if isinstance(phi, QUANTIFIERS):
        return type(phi)(phi.var, subst_set(phi.body, var, ab))
    raise SyntaxError_(f"bad formula {phi!r}")


def rename_set_var(phi: Formula, old: SecondOrderVar, new: SecondOrderVar) -> Formula:
    """Rename one free second-order variable (used for eigenvariable plumbing)."""
    if isinstance(phi, PrimLit):
        return phi
    if isinstance(phi, SetLit):
        if phi.var == old:
            return SetLit(new, phi.positive, phi.term)
        return phi
    if isinstance(phi, And):
        return And(rename_set_var(phi.left, old, new), rename_set_var(phi.right, old, new))
    if isinstance(phi, Or):
        return Or(rename_set_var(phi.left, old, new), rename_set_var(phi.right, old, new))
    if isinstance(phi, QUANTIFIERS):
        return type(phi)(phi.var, rename_set_var(phi.body, old, new))
    raise SyntaxError_(f"bad formula {phi!r}")


def swap_set_vars(phi: Formula, a: SecondOrderVar, b: SecondOrderVar) -> Formula:
    """Exchange two free second-order variables everywhere (an involution)."""
    if isinstance(phi, PrimLit):
        return phi
    if isinstance(phi, SetLit):
        if phi.var == a:
            return SetLit(b, phi.positive, phi.term)
        if phi.var == b:
            return SetLit(a, phi.positive, phi.term)
        return phi
    if isinstance(phi, And):
        return And(swap_set_vars(phi.left, a, b), swap_set_vars(phi.right, a, b))
    if isinstance(phi, Or):
        return Or(swap_set_vars(phi.left, a, b), swap_set_vars(phi.right, a, b))
    if isinstance(phi, QUANTIFIERS):
        return type(phi)(phi.var, swap_set_vars(phi.body, a, b))
    raise SyntaxError_(f"bad formula {phi!r}")


def _shift_term(t: Term, cutoff: int, delta: int) -> Term:
    if isinstance(t, Succ):
        return Succ(_shift_term(t.arg, cutoff, delta))
    if isinstance(t, FVar) and t.name.startswith(RESERVED_PREFIX):
        k = int(t.name[1:])
        if k >= cutoff:
            return FVar(f"%{k + delta}")
    return t


def _inst_bound(phi: Formula, depth: int, fo_repl, so_repl) -> Formula:
    """Replace occurrences bound by the binder `depth` levels out; shift the
    rest of the dangling indices down by one (the binder goes away)."""
    if isinstance(phi, PrimLit):
        ts = []
        for t in phi.terms:
            u = t
            base = u
            while isinstance(base, Succ):
                base = base.arg
            if isinstance(base, FVar) and base.name.startswith(RESERVED_PREFIX):
                k = int(base.name[1:])
                if k == depth and fo_repl is not None:
                    u = _graft(t, fo_repl)
                elif k > depth:
                    u = _graft(t, FVar(f"%{k - 1}"))
            ts.append(u)
        return PrimLit(phi.rel, phi.positive, tuple(ts))
    if isinstance(phi, SetLit):
        term = phi.term
        base = term
        while isinstance(base, Succ):
            base = base.arg
        if isinstance(base, FVar) and base.name.startswith(RESERVED_PREFIX):
            k = int(base.name[1:])
            if k == depth and fo_repl is not None:
                term = _graft(phi.term, fo_repl)
            elif k > depth:
                term = _graft(phi.term, FVar(f"%{k - 1}"))
        v = phi.var
        if v.level is None and v.name.startswith(RESERVED_PREFIX):
            k = int(v.name[1:])
            if k == depth and so_repl is not None:
                return so_repl(v, phi.positive, term)
            if k > depth:
                v = SecondOrderVar(f"%{k - 1}", None)
        return SetLit(v, phi.positive, term)
    if isinstance(phi, And):
        return And(_inst_bound(phi.left, depth, fo_repl, so_repl),
                   _inst_bound(phi.right, depth, fo_repl, so_repl))
    if isinstance(phi, Or):
        return Or(_inst_bound(phi.left, depth, fo_repl, so_repl),
                  _inst_bound(phi.right, depth, fo_repl, so_repl))
    if isinstance(phi, QUANTIFIERS):
        return type(phi)(phi.var, _inst_bound(phi.body, depth + 1, fo_repl, so_repl))
    raise SyntaxError_(f"bad formula {phi!r}")


def _graft(t: Term, repl: Term) -> Term:
    if isinstance(t, Succ):
        return Succ(_graft(t.arg, repl))
    return repl


def inst1(phi: Formula, t: Term | int) -> Formula:
    """Instantiate a first-order quantified formula at term t."""
    if isinstance(t, int):
        t = num(t)
    if not isinstance(phi, FIRST_ORDER_Q):
        raise SyntaxError_(f"not a first-order quantified formula: {render(phi)}")
    return _inst_bound(phi.body, 0, t, None)


def inst2(phi: Formula, v: SecondOrderVar) -> Formula:
    """Instantiate a second-order quantified formula at a variable."""
    if not isinstance(phi, SECOND_ORDER_Q):
        raise SyntaxError_(f"not a second-order quantified formula: {render(phi)}")
    return _inst_bound(phi.body, 0, None, lambda _v, pos, term: SetLit(v, pos, term))


def inst2_abs(phi: Formula, ab: SetAbstract) -> Formula:
    """Instantiate a second-order quantified formula at a set abstract."""
    if not isinstance(phi, SECOND_ORDER_Q):
        raise SyntaxError_(f"not a second-order quantified formula: {render(phi)}")

    def repl(_v, pos, term):
        inst = ab.at(term)
        return inst if pos else negate(inst)

    return _inst_bound(phi.body, 0, None, repl)


# ---------------------------------------------------------------------------
# Free variables.


def free_vars(phi: Formula) -> tuple[frozenset[str], frozenset[SecondOrderVar]]:
    fo: set[str] = set()
    so: set[SecondOrderVar] = set()

    def walk(f):
        if isinstance(f, PrimLit):
            for t in f.terms:
                for nm in term_vars(t):
                    if not nm.startswith(RESERVED_PREFIX):
                        fo.add(nm)
        elif isinstance(f, SetLit):
            for nm in term_vars(f.term):
                if not nm.startswith(RESERVED_PREFIX):
                    fo.add(nm)
            if not f.var.name.startswith(RESERVED_PREFIX):
                so.add(f.var)
        elif isinstance(f, (And, Or)):
            walk(f.left)
            walk(f.right)
        elif isinstance(f, QUANTIFIERS):
            walk(f.body)
        else:
            raise SyntaxError_(f"bad formula {f!r}")

    walk(phi)
    return frozenset(fo), frozenset(so)


def is_closed(phi: Formula) -> bool:
    fo, so = free_vars(phi)
    return not fo and not so


def var_free_in(v: SecondOrderVar, phi: Formula) -> bool:
    return v in free_vars(phi)[1]


def fo_var_free_in(name: str, phi: Formula) -> bool:
    return name in free_vars(phi)[0]


# ---------------------------------------------------------------------------
# Depth / level / complexity.
#
# The tracked set S is a set of "variable identities": free second-order
# variables, or binder slots identified by their absolute binder depth.


def _occurs(phi: Formula, svars: frozenset, depth: int) -> bool:
    if isinstance(phi, PrimLit):
        return False
    if isinstance(phi, SetLit):
        v = phi.var
        if v.name.startswith(RESERVED_PREFIX):
            k = int(v.name[1:])
            return ("bound", depth - 1 - k) in svars
        return ("free", v.name, v.level) in svars
    if isinstance(phi, (And, Or)):
        return _occurs(phi.left, svars, depth) or _occurs(phi.right, svars, depth)
    if isinstance(phi, QUANTIFIERS):
        return _occurs(phi.body, svars, depth + 1)
    raise SyntaxError_(f"bad formula {phi!r}")


def _dp(phi: Formula, svars: frozenset, depth: int) -> int:
    if isinstance(phi, (PrimLit, SetLit)):
        return 0
    if isinstance(phi, (And, Or)):
        return max(_dp(phi.left, svars, depth), _dp(phi.right, svars, depth))
    if isinstance(phi, FIRST_ORDER_Q):
        return _dp(phi.body, svars, depth + 1)
    if isinstance(phi, SECOND_ORDER_Q):
        if _occurs(phi.body, svars, depth + 1):
            return _dp(phi.body, svars | {("bound", depth)}, depth + 1) + 1
        return 0
    raise SyntaxError_(f"bad formula {phi!r}")


def _lvl(phi: Formula, svars: frozenset, depth: int) -> int:
    if isinstance(phi, SetLit):
        if phi.var.level is not None:
            return phi.var.level + 1
        return 0
    if isinstance(phi, PrimLit):
        return 0
    if isinstance(phi, (And, Or)):
        return max(_lvl(phi.left, svars, depth), _lvl(phi.right, svars, depth))
    if isinstance(phi, FIRST_ORDER_Q):
        return _lvl(phi.body, svars, depth + 1)
    if isinstance(phi, SECOND_ORDER_Q):
        if _occurs(phi.body, svars, depth + 1):
            return _lvl(phi.body, svars | {("bound", depth)}, depth + 1)
        return _lvl(phi.body, frozenset(), depth + 1) + 1
    raise SyntaxError_(f"bad formula {phi!r}")


def _as_svars(variables) -> frozenset:
    out = set()
    for v in variables:
        if isinstance(v, SecondOrderVar):
            out.add(("free", v.name, v.level))
        elif isinstance(v, str):
            out.add(("free", v, None))
        else:
            raise SyntaxError_(f"bad tracked variable {v!r}")
    return frozenset(out)


def dp(phi: Formula, variables=()) -> int:
    return _dp(phi, _as_svars(variables), 0)


def lvl(phi: Formula, variables=()) -> int:
    return _lvl(phi, _as_svars(variables), 0)


@total_ordering
@dataclass(frozen=True)
class Complexity:
    """Pair (depth, level), ordered reverse-lexicographically."""

    depth: int
    level: int

    def key(self):
        return (self.level, self.depth)

    def __lt__(self, other):
        return self.key() < other.key()

    def __str__(self):
        return f"({self.depth},{self.level})"

    def on_grid(self, n: int, l_max: int) -> bool:
        return self.depth <= n and self.level <= l_max

    def predecessor(self, n: int) -> "Complexity | None":
        if self.depth > 0:
            return Complexity(self.depth - 1, self.level)
        if self.level > 0:
            return Complexity(n, self.level - 1)
        return None


def comp(phi: Formula) -> Complexity:
    """Complexity of a second-order quantified formula."""
    if not isinstance(phi, SECOND_ORDER_Q):
        raise SyntaxError_(f"comp expects a second-order quantified formula: {render(phi)}")
    svars = frozenset({("bound", 0)})
    return Complexity(_dp(phi.body, svars, 1), _lvl(phi.body, svars, 1))


def witness_level(phi: Formula) -> int:
    """Level of the witness variable introducing a second-order quantifier.

    Equals lvl(body,{X}) when the bound variable actually occurs, and
    lvl(body)+1 otherwise (the body is a completed parameter)."""
    if not isinstance(phi, SECOND_ORDER_Q):
        raise SyntaxError_("witness_level expects a second-order quantified formula")
    if _occurs(phi.body, frozenset({("bound", 0)}), 1):
        return _lvl(phi.body, frozenset({("bound", 0)}), 1)
    return _lvl(phi.body, frozenset(), 1) + 1


def bound_var_occurs(phi: Formula) -> bool:
    if not isinstance(phi, SECOND_ORDER_Q):
        raise SyntaxError_("expects a second-order quantified formula")
    return _occurs(phi.body, frozenset({("bound", 0)}), 1)


# ---------------------------------------------------------------------------
# Rank (connective-counting; total and deterministic).


def rank(phi: Formula) -> int:
    if isinstance(phi, (PrimLit, SetLit)):
        return 0
    if isinstance(phi, (And, Or)):
        return max(rank(phi.left), rank(phi.right)) + 1
    if isinstance(phi, QUANTIFIERS):
        return rank(phi.body) + 1
    raise SyntaxError_(f"bad formula {phi!r}")


# ---------------------------------------------------------------------------
# Literal evaluation.


def is_literal(phi: Formula) -> bool:
    return isinstance(phi, (PrimLit, SetLit))


def eval_literal(phi: Formula) -> bool:
    if isinstance(phi, SetLit):
        raise SyntaxError_("cannot evaluate a set literal")
    if not isinstance(phi, PrimLit):
        raise SyntaxError_("not a literal")
    args = tuple(term_value(t) for t in phi.terms)
    _, decide = _RELATIONS[phi.rel]
    truth = bool(decide(*args))
    return truth if phi.positive else not truth


def arithmetic(phi: Formula) -> bool:
    """True when the formula mentions no second-order machinery at all."""
    if isinstance(phi, PrimLit):
        return True
    if isinstance(phi, SetLit):
        return False
    if isinstance(phi, (And, Or)):
        return arithmetic(phi.left) and arithmetic(phi.right)
    if isinstance(phi, FIRST_ORDER_Q):
        return arithmetic(phi.body)
    return False


def is_sigma1(phi: Formula) -> bool:
    """Existential arithmetic formula: exists-quantifiers over a
    quantifier-free matrix."""
    while isinstance(phi, ExistsN):
        phi = phi.body
    return _qfree_arith(phi)


def _qfree_arith(phi):
    if isinstance(phi, PrimLit):
        return True
    if isinstance(phi, (And, Or)):
        return _qfree_arith(phi.left) and _qfree_arith(phi.right)
    return False


def eval_closed(phi: Formula, search_cap: int = 50) -> bool | None:
    """Truth of a closed arithmetic formula. Quantifier-free formulas are
    decided exactly; existentials by bounded witness search (None =
    undecided within the cap); universals are refused (None)."""
    if isinstance(phi, PrimLit):
        return eval_literal(phi)
    if isinstance(phi, And):
        a = eval_closed(phi.left, search_cap)
        b = eval_closed(phi.right, search_cap)
        if a is False or b is False:
            return False
        if a is True and b is True:
            return True
        return None
    if isinstance(phi, Or):
        a = eval_closed(phi.left, search_cap)
        b = eval_closed(phi.right, search_cap)
        if a is True or b is True:
            return True
        if a is False and b is False:
            return False
        return None
    if isinstance(phi, ExistsN):
        for n in range(search_cap):
            if eval_closed(inst1(phi, n), search_cap) is True:
                return True
        return None
    return None


def subformulas(phi: Formula):
    yield phi
    if isinstance(phi, (And, Or)):
        yield from subformulas(phi.left)
        yield from subformulas(phi.right)
    elif isinstance(phi, QUANTIFIERS):
        yield from subformulas(phi.body)


def second_order_subformulas(phi: Formula):
    """All second-order quantified subformulas (as statements about
    complexity; bodies may contain dangling bound references, comp is still
    well-defined for them)."""
    for sub in subformulas(phi):
        if isinstance(sub, SECOND_ORDER_Q):
            yield sub


# ---------------------------------------------------------------------------
# S-expression rendering and parsing.


def render_term(t: Term, env=()) -> object:
    k = 0
    while isinstance(t, Succ):
        k += 1
        t = t.arg
    if isinstance(t, Zero):
        return ["num", k] if k else 0
    name = t.name
    if name.startswith(RESERVED_PREFIX):
        idx = int(name[1:])
        name = env[len(env) - 1 - idx] if idx < len(env) else f"_u{idx - len(env)}"
    core = name
    for _ in range(k):
        core = ["s", core]
    return core


def _so_name(v: SecondOrderVar, env) -> str:
    if v.name.startswith(RESERVED_PREFIX):
        idx = int(v.name[1:])
        return env[len(env) - 1 - idx] if idx < len(env) else f"_U{idx - len(env)}"
    if v.level is None:
        return v.name
    return f"{v.name}^{v.level}"


def _render(phi: Formula, env) -> object:
    if isinstance(phi, PrimLit):
        head = "lit" if phi.positive else "nlit"
        return [head, phi.rel] + [render_term(t, env) for t in phi.terms]
    if isinstance(phi, SetLit):
        head = "setlit" if phi.positive else "nsetlit"
        return [head, _so_name(phi.var, env), render_term(phi.term, env)]
    if isinstance(phi, And):
        return ["and", _render(phi.left, env), _render(phi.right, env)]
    if isinstance(phi, Or):
        return ["or", _render(phi.left, env), _render(phi.right, env)]
    heads = {ForallN: "all", ExistsN: "ex", ForallS: "all2", ExistsS: "ex2"}
    if isinstance(phi, QUANTIFIERS):
        base = "b" if isinstance(phi, FIRST_ORDER_Q) else "B"
        name = f"{base}{len(env)}"
        return [heads[type(phi)], name, _render(phi.body, env + (name,))]
    raise SyntaxError_(f"bad formula {phi!r}")


def render(phi: Formula) -> str:
    return sexpr.dumps(_render(phi, ()))


def render_sexpr(phi: Formula) -> object:
    return _render(phi, ())


def parse_term(e) -> Term:
    if isinstance(e, int):
        return num(e)
    if isinstance(e, str):
        if e.startswith(RESERVED_PREFIX):
            raise SyntaxError_(f"reserved name {e!r}")
        return FVar(e)
    if isinstance(e, list) and e and e[0] == "num":
        return num(e[1])
    if isinstance(e, list) and e and e[0] == "s":
        return Succ(parse_term(e[1]))
    raise SyntaxError_(f"bad term {e!r}")


def parse_so_var(e) -> SecondOrderVar:
    if not isinstance(e, str):
        raise SyntaxError_(f"bad second-order variable {e!r}")
    if "^" in e:
        name, _, level = e.rpartition("^")
        try:
            return sv(name, int(level))
        except ValueError:
            pass
    if e.startswith(RESERVED_PREFIX):
        raise SyntaxError_(f"reserved name {e!r}")
    return SecondOrderVar(e, None)


def parse_formula(e) -> Formula:
    if not isinstance(e, list) or not e:
        raise SyntaxError_(f"bad formula {e!r}")
    head = e[0]
    if head == "lit":
        return lit(e[1], *[parse_term(t) for t in e[2:]])
    if head == "nlit":
        return nlit(e[1], *[parse_term(t) for t in e[2:]])
    if head == "setlit":
        return setlit(parse_so_var(e[1]), parse_term(e[2]), True)
    if head == "nsetlit":
        return setlit(parse_so_var(e[1]), parse_term(e[2]), False)
    if head == "and":
        return conj(parse_formula(e[1]), parse_formula(e[2]))
    if head == "or":
        return disj(parse_formula(e[1]), parse_formula(e[2]))
    if head in ("all", "ex", "all2", "ex2"):
        name = e[1]
        if not isinstance(name, str):
            raise SyntaxError_(f"bad binder {e!r}")
        body = parse_formula(e[2])
        return {"all": fa1, "ex": ex1, "all2": fa2, "ex2": ex2}[head](name, body)
    raise SyntaxError_(f"bad formula head {head!r}")


def parse_formula_str(s: str) -> Formula:
    return parse_formula(sexpr.parse_one(s))


def parse_abstract(e) -> SetAbstract:
    if not (isinstance(e, list) and len(e) == 3 and e[0] == "abstract"):
        raise SyntaxError_(f"bad set abstract {e!r}")
    return SetAbstract(e[1], parse_formula(e[2]))


def render_abstract(ab: SetAbstract) -> object:
    return ["abstract", ab.hole, render_sexpr(ab.body)]
