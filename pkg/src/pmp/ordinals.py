"""Symbolic ordinal bounds and their concrete evaluation universe.

Bound expressions are terms over variables indexed by open tags (written
beta_t) and by placeholder slots Omega_{m,l}; they evaluate to Cantor normal
form ordinals below epsilon_0. Comparison of bounds is sampled, not decided:
a reported counterexample is sound, a clean sample run is heuristic
confirmation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import total_ordering
from typing import Iterable, Optional

from . import calculus as ca
from . import sexpr, syntax
from .calculus import Address, EMPTY_ADDR, PremiseIndex, ReadRule, Rule, Sequent, Tag
from .prooftree import (
    DEFAULT_PROBES,
    Failure,
    Probes,
    ProofTree,
    Verdict,
    premise_tokens,
    render_address,
)
from .syntax import Complexity


class OrdinalError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Cantor normal form ordinals below epsilon_0.
#
# omega^e1 * c1 + ... + omega^ek * ck with e1 > ... > ek (exponents are again
# CNF ordinals) and positive integer coefficients.

MAX_EXPONENT_DEPTH = 6


@total_ordering
class Cnf:
    __slots__ = ("terms",)

    def __init__(self, terms=()):
        self.terms = tuple(terms)

    @staticmethod
    def nat(n: int) -> "Cnf":
        if n < 0:
            raise OrdinalError("ordinals are non-negative")
        return Cnf(((ZERO_CNF, n),)) if n else Cnf()

    def is_zero(self) -> bool:
        return not self.terms

    def is_finite(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and self.terms[0][0].is_zero())

    def as_int(self) -> int:
        if self.is_zero():
            return 0
        if not self.is_finite():
            raise OrdinalError(f"{self} is infinite")
        return self.terms[0][1]

    def depth(self) -> int:
        if not self.terms:
            return 0
        return 1 + max(e.depth() for e, _ in self.terms)

    def __eq__(self, other):
        return isinstance(other, Cnf) and self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def __lt__(self, other):
        if not isinstance(other, Cnf):
            return NotImplemented
        for (e1, c1), (e2, c2) in zip(self.terms, other.terms):
            if e1 != e2:
                return e1 < e2
            if c1 != c2:
                return c1 < c2
        return len(self.terms) < len(other.terms)

    def __add__(self, other: "Cnf") -> "Cnf":
        if other.is_zero():
            return self
        head = other.terms[0][0]
        kept = [(e, c) for e, c in self.terms if e > head]
        boundary = [(e, c) for e, c in self.terms if e == head]
        merged = list(other.terms)
        if boundary:
            merged[0] = (head, boundary[0][1] + merged[0][1])
        return Cnf(tuple(kept) + tuple(merged))

    def __mul__(self, other: "Cnf") -> "Cnf":
        if self.is_zero() or other.is_zero():
            return Cnf()
        out = Cnf()
        e1 = self.terms[0][0]
        for e2, c2 in other.terms:
            if e2.is_zero():
                # right factor finite part: multiply leading coefficient
                lead_e, lead_c = self.terms[0]
                out = out + Cnf(((lead_e, lead_c * c2),) + self.terms[1:])
            else:
                out = out + Cnf(((e1 + e2, c2),))
        return out

    def natsum(self, other: "Cnf") -> "Cnf":
        """Hessenberg sum: merge the term multisets."""
        exps = sorted({e for e, _ in self.terms} | {e for e, _ in other.terms},
                      reverse=True)
        terms = []
        for e in exps:
            c = sum(c for e2, c in self.terms if e2 == e)
            c += sum(c for e2, c in other.terms if e2 == e)
            terms.append((e, c))
        return Cnf(tuple(terms))

    def __str__(self):
        if self.is_zero():
            return "0"
        parts = []
        for e, c in self.terms:
            if e.is_zero():
                parts.append(str(c))
            elif e == ONE_CNF:
                parts.append("w" + (f"*{c}" if c > 1 else ""))
            else:
                parts.append(f"w^({e})" + (f"*{c}" if c > 1 else ""))
        return "+".join(parts)

    __repr__ = __str__


ZERO_CNF = Cnf()
ONE_CNF = Cnf.nat(1)


def omega_pow(e: Cnf) -> Cnf:
    if e.depth() >= MAX_EXPONENT_DEPTH:
        raise OrdinalError(f"exponent depth limit {MAX_EXPONENT_DEPTH} exceeded")
    return Cnf(((e, 1),))


OMEGA_CNF = omega_pow(ONE_CNF)


def cnf_sample_grid() -> list[Cnf]:
    """The structured sample universe used by comparisons and bound checks."""
    w = OMEGA_CNF
    base = [Cnf.nat(0), Cnf.nat(1), Cnf.nat(2), Cnf.nat(3), w, w + ONE_CNF,
            w * Cnf.nat(2), omega_pow(Cnf.nat(2)), omega_pow(Cnf.nat(2)) + w,
            omega_pow(w)]
    extra = [a + b for a, b in itertools.product(base[:7], base[:4])]
    out, seen = [], set()
    for x in base + extra:
        if x not in seen:
            seen.add(x)
            out.append(x)
    return out


# ---------------------------------------------------------------------------
# Symbolic terms.


@dataclass(frozen=True)
class OrdinalTerm:
    pass


@dataclass(frozen=True)
class Nat(OrdinalTerm):
    value: int


@dataclass(frozen=True)
class Omega(OrdinalTerm):
    pass


@dataclass(frozen=True)
class Var(OrdinalTerm):
    key: tuple  # ("tag", root sequent, position) or ("omega", m, l) or ("beta", label)


@dataclass(frozen=True)
class Plus(OrdinalTerm):
    parts: tuple


@dataclass(frozen=True)
class Times(OrdinalTerm):
    left: OrdinalTerm
    right: OrdinalTerm


@dataclass(frozen=True)
class NatSum(OrdinalTerm):
    parts: tuple


@dataclass(frozen=True)
class OmegaPow(OrdinalTerm):
    exponent: OrdinalTerm


@dataclass(frozen=True)
class Apply(OrdinalTerm):
    """Uninterpreted application of a higher-sort variable to arguments;
    only evaluated when a concrete function has been substituted (never, in
    this artifact)."""

    fn: OrdinalTerm
    args: tuple


ZERO_TERM = Nat(0)
OMEGA_TERM = Omega()


def nat(n: int) -> OrdinalTerm:
    return Nat(n)


def tag_var(root: Sequent, position: Address = EMPTY_ADDR) -> OrdinalTerm:
    return Var(("tag", root, position))


def omega_var(m: int, lv: int) -> OrdinalTerm:
    return Var(("omega", m, lv))


def beta(label: str) -> OrdinalTerm:
    return Var(("beta", label))


def plus(*parts: OrdinalTerm) -> OrdinalTerm:
    return Plus(tuple(parts))


def natsum(*parts: OrdinalTerm) -> OrdinalTerm:
    return NatSum(tuple(parts))


def wpow(t: OrdinalTerm) -> OrdinalTerm:
    return OmegaPow(t)


def term_vars(t: OrdinalTerm) -> frozenset:
    if isinstance(t, Var):
        return frozenset({t.key})
    if isinstance(t, (Nat, Omega)):
        return frozenset()
    if isinstance(t, Plus) or isinstance(t, NatSum):
        out = frozenset()
        for p in t.parts:
            out |= term_vars(p)
        return out
    if isinstance(t, Times):
        return term_vars(t.left) | term_vars(t.right)
    if isinstance(t, OmegaPow):
        return term_vars(t.exponent)
    if isinstance(t, Apply):
        out = term_vars(t.fn)
        for a in t.args:
            out |= term_vars(a)
        return out
    raise OrdinalError(f"bad term {t!r}")


def eval_term(t: OrdinalTerm, assignment: dict) -> Cnf:
    if isinstance(t, Nat):
        return Cnf.nat(t.value)
    if isinstance(t, Omega):
        return OMEGA_CNF
    if isinstance(t, Var):
        if t.key not in assignment:
            raise OrdinalError(f"unassigned variable {render_term_str(t)}")
        return assignment[t.key]
    if isinstance(t, Plus):
        out = ZERO_CNF
        for p in t.parts:
            out = out + eval_term(p, assignment)
        return out
    if isinstance(t, NatSum):
        out = ZERO_CNF
        for p in t.parts:
            out = out.natsum(eval_term(p, assignment))
        return out
    if isinstance(t, Times):
        return eval_term(t.left, assignment) * eval_term(t.right, assignment)
    if isinstance(t, OmegaPow):
        return omega_pow(eval_term(t.exponent, assignment))
    if isinstance(t, Apply):
        raise OrdinalError("cannot evaluate an uninterpreted application")
    raise OrdinalError(f"bad term {t!r}")


def subst_term(t: OrdinalTerm, mapping: dict) -> OrdinalTerm:
    """Replace variables by terms (used when composing bounds)."""
    if isinstance(t, Var):
        return mapping.get(t.key, t)
    if isinstance(t, (Nat, Omega)):
        return t
    if isinstance(t, Plus):
        return Plus(tuple(subst_term(p, mapping) for p in t.parts))
    if isinstance(t, NatSum):
        return NatSum(tuple(subst_term(p, mapping) for p in t.parts))
    if isinstance(t, Times):
        return Times(subst_term(t.left, mapping), subst_term(t.right, mapping))
    if isinstance(t, OmegaPow):
        return OmegaPow(subst_term(t.exponent, mapping))
    if isinstance(t, Apply):
        return Apply(subst_term(t.fn, mapping),
                     tuple(subst_term(a, mapping) for a in t.args))
    raise OrdinalError(f"bad term {t!r}")


def render_term(t: OrdinalTerm) -> object:
    if isinstance(t, Nat):
        return t.value
    if isinstance(t, Omega):
        return ["w"]
    if isinstance(t, Var):
        kind = t.key[0]
        if kind == "omega":
            return ["omega", t.key[1], t.key[2]]
        if kind == "beta":
            return ["var", t.key[1]]
        root, pos = t.key[1], t.key[2]
        return ["tagvar", ["root"] + sorted(
            (syntax.render_sexpr(f) for f in root), key=sexpr.dumps),
            ["pos"] + [ca.render_index(i) for i in pos]]
    if isinstance(t, Plus):
        return ["plus"] + [render_term(p) for p in t.parts]
    if isinstance(t, NatSum):
        return ["natsum"] + [render_term(p) for p in t.parts]
    if isinstance(t, Times):
        return ["times", render_term(t.left), render_term(t.right)]
    if isinstance(t, OmegaPow):
        return ["wpow", render_term(t.exponent)]
    if isinstance(t, Apply):
        return ["apply", render_term(t.fn)] + [render_term(a) for a in t.args]
    raise OrdinalError(f"bad term {t!r}")


def render_term_str(t: OrdinalTerm) -> str:
    return sexpr.dumps(render_term(t))


def parse_term(e) -> OrdinalTerm:
    if isinstance(e, int):
        return Nat(e)
    if not isinstance(e, list) or not e:
        raise OrdinalError(f"bad ordinal term {e!r}")
    head = e[0]
    if head == "w":
        return Omega()
    if head == "omega":
        return omega_var(e[1], e[2])
    if head == "var":
        return beta(e[1])
    if head == "plus":
        return Plus(tuple(parse_term(p) for p in e[1:]))
    if head == "natsum":
        return NatSum(tuple(parse_term(p) for p in e[1:]))
    if head == "times":
        return Times(parse_term(e[1]), parse_term(e[2]))
    if head == "wpow":
        return OmegaPow(parse_term(e[1]))
    raise OrdinalError(f"bad ordinal term head {head!r}")


# ---------------------------------------------------------------------------
# Sampled comparison.


def compare_eval(s: OrdinalTerm, t: OrdinalTerm, samples: Optional[list] = None,
                 threshold: Optional[Cnf] = None):
    """Check s < t on sampled assignments of the shared variables; returns
    (True, None) when no counterexample was found, else (False, assignment).
    `threshold` restricts samples to values >= it (the function-sort order
    only quantifies over large arguments)."""
    grid = samples if samples is not None else cnf_sample_grid()
    if threshold is not None:
        grid = [g for g in grid if not (g < threshold)]
    variables = sorted(term_vars(s) | term_vars(t), key=repr)
    if not variables:
        a, b = eval_term(s, {}), eval_term(t, {})
        return (a < b, None if a < b else {})
    for combo in itertools.product(grid, repeat=len(variables)):
        assignment = dict(zip(variables, combo))
        try:
            a, b = eval_term(s, assignment), eval_term(t, assignment)
        except OrdinalError:
            continue
        if not (a < b):
            return (False, assignment)
    return (True, None)


# ---------------------------------------------------------------------------
# Open tags and projections.


@dataclass(frozen=True)
class Placeholder:
    m: int
    lv: int


@dataclass(frozen=True)
class OpenTagSet:
    tags: frozenset  # of Tag
    placeholders: frozenset  # of Placeholder

    def __contains__(self, item):
        if isinstance(item, Placeholder):
            return item in self.placeholders
        return item in self.tags


def _tag_complexity(root: Sequent) -> Optional[Complexity]:
    if len(root) == 0:
        # the anything-goes root used by the rank reducers
        return Complexity(0, 0)
    return ca.root_complexity(root)


def _advanced_tags(rule: ReadRule, branch: Rule) -> set:
    """Concrete advanced tags in the Read premise at `branch` (a bounded
    sample of naturals for omega branches; rule-indexed families stay
    symbolic and are recovered by prefix projection)."""
    spec = ca.rule_premises(branch)
    if spec.kind == "finite":
        tokens = spec.tokens
    elif spec.kind == "naturals":
        tokens = tuple(range(4))
    else:
        tokens = ()
    return {Tag(rule.root, rule.position + (PremiseIndex(branch, tok),), rule.scope)
            for tok in tokens}


def open_tags(sigma: Address, m: int, big_l: int,
              extra: Iterable[Tag] = ()) -> OpenTagSet:
    """Open tags along a sequence in a theory at grid position (m, .): the
    placeholders for lower-depth slots, qualifying extra tags, tags opened by
    omega-flat premises, and tags advanced through Reads over open tags."""
    placeholders = frozenset(Placeholder(m2, l2)
                             for m2 in range(m) for l2 in range(big_l + 1))
    open_now = set()
    for t in extra:
        c = _tag_complexity(t.root)
        if c is not None and c.depth < m:
            open_now.add(t)
    for element in sigma:
        rule, token = element.rule, element.token
        if isinstance(rule, ca.OmegaFlatRule):
            if ca.comp(rule.formula).depth < m:
                open_now |= ca.premise_sequent(rule, token).tags
        elif isinstance(rule, ca.CutOmegaFlatRule) and token == ca.BOT:
            if ca.comp(rule.formula).depth < m:
                open_now |= ca.premise_sequent(rule, token).tags
        elif isinstance(rule, ReadRule) and isinstance(token, Rule):
            t = rule.tag()
            if any(s.root == t.root and s.position == t.position for s in open_now):
                open_now |= _advanced_tags(rule, token)
    return OpenTagSet(frozenset(open_now), placeholders)


def project_tag(t: Tag, target: OpenTagSet) -> object:
    """Project a tag to the open set at a shorter sequence: the same-root tag
    with maximal position prefix, else the placeholder of its complexity."""
    best = None
    for s in target.tags:
        if s.root == t.root and t.position[:len(s.position)] == s.position:
            if best is None or len(s.position) > len(best.position):
                best = s
    if best is not None:
        return best
    c = _tag_complexity(t.root)
    if c is None:
        raise OrdinalError(f"tag without complexity: {ca.tag_str(t)}")
    return Placeholder(c.depth, c.level)


def project_tags(source: OpenTagSet, target: OpenTagSet) -> dict:
    return {t: project_tag(t, target) for t in source.tags}


# ---------------------------------------------------------------------------
# The bound catalog (root bounds of the operator suite).


_CATALOG = {
    "inverse-false": beta("b"),
    "inverse-conj": beta("b"),
    "inverse-forall": beta("b"),
    "elim-disj": Plus((beta("band"), beta("bor"))),
    "elim-exists": Plus((beta("ball"), beta("bex"))),
    "elim-set": NatSum((beta("bx"), beta("bnx"))),
    "elim-second-order": NatSum((beta("ball2"), beta("bex2"))),
    "reduce": OmegaPow(beta("b")),
    "identity": beta("b"),
    "substitution": Apply(beta("b"), (Var(("omega", "*", "*")),)),
    "excluded-middle": Plus((NatSum((Var(("omega", "*", "*")),)), beta("k"))),
    "embedding": Plus((beta("t0"), beta("t1"))),
}


def bound_catalog(op_id: str) -> OrdinalTerm:
    if op_id not in _CATALOG:
        raise OrdinalError(f"unknown operator id {op_id!r}; known: {sorted(_CATALOG)}")
    return _CATALOG[op_id]


# ---------------------------------------------------------------------------
# Bound assignments and the decrease check.


class BoundAssignment:
    """Map from non-Read addresses to ordinal terms."""

    def __init__(self, lookup, name="bounds"):
        if isinstance(lookup, dict):
            table = dict(lookup)
            self._fn = table.get
        else:
            self._fn = lookup
        self.name = name

    def at(self, addr: Address) -> Optional[OrdinalTerm]:
        return self._fn(addr)


def height_bounds(tree: ProofTree, fuel: int,
                  probes: Probes = DEFAULT_PROBES) -> BoundAssignment:
    """Remaining-height bounds: exact on well-founded finite-branching trees
    (within fuel), padded with omega-powers at infinitely-branching nodes and
    at the fuel horizon."""
    table: dict[Address, Cnf] = {}

    def height(addr, budget) -> Cnf:
        rule = tree.rule_at(addr)
        spec = ca.rule_premises(rule)
        if spec.kind != "finite":
            return omega_pow(Cnf.nat(budget + 1))
        if not spec.tokens:
            return ZERO_CNF
        if budget == 0:
            return omega_pow(ONE_CNF)
        kids = [height(addr + (PremiseIndex(rule, tok),), budget - 1)
                for tok in spec.tokens]
        return max(kids) + ONE_CNF

    def walk(addr, budget):
        table[addr] = height(addr, budget)
        if budget == 0:
            return
        rule = tree.rule_at(addr)
        for tok in premise_tokens(rule, probes):
            walk(addr + (PremiseIndex(rule, tok),), budget - 1)

    walk(EMPTY_ADDR, fuel)
    return BoundAssignment(
        lambda a: _cnf_to_term(table[a]) if a in table else None, name="height")


def fuel_bounds(fuel: int) -> BoundAssignment:
    """omega^(k - depth): strictly decreasing along edges of any prefix."""
    return BoundAssignment(lambda a: OmegaPow(Nat(max(0, fuel - len(a)))), name="fuel")


def _cnf_to_term(x: Cnf) -> OrdinalTerm:
    if x.is_zero():
        return Nat(0)
    parts = []
    for e, c in x.terms:
        if e.is_zero():
            parts.append(Nat(c))
        else:
            p = OmegaPow(_cnf_to_term(e))
            if c > 1:
                p = Times(p, Nat(c))
            parts.append(p)
    return parts[0] if len(parts) == 1 else Plus(tuple(parts))


def _resolve_vars(term: OrdinalTerm, tag_set: OpenTagSet) -> Optional[dict]:
    """Map term variables to tag/placeholder identities in the open set (by
    root and maximal position prefix for tag variables)."""
    mapping = {}
    for key in term_vars(term):
        if key[0] == "omega":
            mapping[key] = Placeholder(key[1], key[2])
        elif key[0] == "tag":
            root, pos = key[1], key[2]
            best = None
            for s in tag_set.tags:
                if s.root == root and pos[:len(s.position)] == s.position \
                        and len(s.position) <= len(pos):
                    if best is None or len(s.position) > len(best.position):
                        best = s
            exact = [s for s in tag_set.tags if s.root == root and s.position == pos]
            if exact:
                mapping[key] = exact[0]
            elif best is not None:
                mapping[key] = best
            else:
                c = _tag_complexity(root)
                if c is None:
                    return None
                mapping[key] = Placeholder(c.depth, c.level)
        else:
            mapping[key] = key
    return mapping


def check_bound_upto(tree: ProofTree, bounds: BoundAssignment, fuel: int,
                     probes: Probes = DEFAULT_PROBES,
                     samples: Optional[list] = None,
                     m: int = 0, big_l: int = 0,
                     extra_tags: Iterable[Tag] = (),
                     max_pairs: int = 24) -> Verdict:
    """Strict decrease of bounds along edges of the explored prefix (Read
    nodes are skipped and carry no bounds). Sampled premise assignments obey
    the projection constraints: an unchanged tag may keep its value, an
    advanced or newborn tag must strictly drop below its projection."""
    grid = samples if samples is not None else cnf_sample_grid()
    failures = []

    def descendants(addr):
        """Next non-Read nodes above `addr` (within fuel)."""
        out = []
        rule = tree.rule_at(addr)
        for tok in premise_tokens(rule, probes):
            child = addr + (PremiseIndex(rule, tok),)
            if len(child) > fuel:
                continue
            crule = tree.rule_at(child)
            if isinstance(crule, ReadRule):
                out.extend(descendants(child))
            else:
                out.append(child)
        return out

    def walk(addr):
        rule = tree.rule_at(addr)
        if isinstance(rule, ReadRule) and addr == EMPTY_ADDR:
            for nxt in descendants(addr):
                walk(nxt)
            return
        o_here = bounds.at(addr)
        if o_here is None:
            failures.append(Failure("bound-missing", addr, "no bound at this address"))
            return
        here_tags = open_tags(addr, m, big_l, extra_tags)
        for nxt in descendants(addr):
            o_next = bounds.at(nxt)
            if o_next is None:
                failures.append(Failure("bound-missing", nxt, "no bound at this address"))
                continue
            next_tags = open_tags(nxt, m, big_l, extra_tags)
            vars_here = _resolve_vars(o_here, here_tags)
            vars_next = _resolve_vars(o_next, next_tags)
            if vars_here is None or vars_next is None:
                failures.append(Failure("bound-vars", nxt, "unresolvable bound variable"))
                continue
            if not _check_edge(o_here, vars_here, here_tags, o_next, vars_next,
                               next_tags, grid, failures, addr, nxt, max_pairs):
                return
            walk(nxt)

    walk(EMPTY_ADDR)
    return Verdict("ordinal-bounds", not failures, tuple(failures), fuel)


_EDGE_GRID_SIZE = 6


def _check_edge(o_here, vars_here, here_tags, o_next, vars_next, next_tags,
                grid, failures, addr, nxt, max_pairs) -> bool:
    """Sample admissible (f_next, f_here) pairs for one edge and require the
    bound to drop strictly. An identity unchanged by projection keeps its
    value (the hardest admissible case); an advanced or newborn one takes the
    largest sampled value strictly below its projection's."""
    edge_grid = grid[:_EDGE_GRID_SIZE]
    proj: dict = {}
    idents_next = sorted(set(vars_next.values()), key=repr)
    for ident in idents_next:
        proj[ident] = project_tag(ident, here_tags) if isinstance(ident, Tag) else ident
    idents_here = sorted(set(vars_here.values()) | set(proj.values()), key=repr)

    count = 0
    for combo in itertools.product(edge_grid, repeat=len(idents_here)):
        if count >= max_pairs:
            break
        f_here = dict(zip(idents_here, combo))
        choices = []
        for ident in idents_next:
            p = proj[ident]
            if p == ident:
                choices.append([f_here.get(ident, edge_grid[0])])
            else:
                base = f_here[p]
                smaller = [g for g in edge_grid if g < base]
                choices.append([max(smaller)] if smaller else [])
        for next_combo in itertools.product(*choices):
            count += 1
            f_next = dict(zip(idents_next, next_combo))
            for ident in idents_here:
                f_next.setdefault(ident, f_here[ident])
            try:
                a = eval_term(o_next, {k: f_next[v] for k, v in vars_next.items()})
                b = eval_term(o_here, {k: f_here[v] for k, v in vars_here.items()})
            except OrdinalError:
                continue
            if not (a < b):
                failures.append(Failure(
                    "bound-decrease", nxt,
                    f"{render_term_str(o_next)} = {a} not below "
                    f"{render_term_str(o_here)} = {b} (edge from {render_address(addr)})"))
                return False
    return True


def check_decrease_simple(tree: ProofTree, bounds: BoundAssignment, fuel: int,
                          probes: Probes = DEFAULT_PROBES) -> Verdict:
    """Independent direct implementation for variable-free bounds: plain
    strict ordinal decrease along edges (Read nodes skipped)."""
    failures = []
    stack = [EMPTY_ADDR]
    while stack:
        addr = stack.pop()
        rule = tree.rule_at(addr)
        here = bounds.at(addr)
        if here is None or isinstance(rule, ReadRule):
            if here is None:
                failures.append(Failure("bound-missing", addr, "no bound"))
            continue
        val_here = eval_term(here, {})
        frontier = [(addr, tok) for tok in premise_tokens(rule, probes)]
        while frontier:
            base, tok = frontier.pop()
            child = base + (PremiseIndex(tree.rule_at(base), tok),)
            if len(child) > fuel:
                continue
            crule = tree.rule_at(child)
            if isinstance(crule, ReadRule):
                frontier.extend((child, t) for t in premise_tokens(crule, probes))
                continue
            val_child = eval_term(bounds.at(child), {}) if bounds.at(child) else None
            if val_child is None:
                failures.append(Failure("bound-missing", child, "no bound"))
                continue
            if not (val_child < val_here):
                failures.append(Failure(
                    "bound-decrease", child, f"{val_child} not below {val_here}"))
            stack.append(child)
    return Verdict("ordinal-bounds-simple", not failures, tuple(failures), fuel)


# ---------------------------------------------------------------------------
# Composition and lifting of bounds.


def operator_bounds(fn) -> BoundAssignment:
    """Per-node bounds from the operator machine's own hook."""
    return BoundAssignment(lambda addr: fn.bound_term_at(addr), name=f"{fn.name}-bounds")


def compose_bounds(applied: ProofTree, fn_bounds: BoundAssignment,
                   input_bounds: dict) -> BoundAssignment:
    """Bounds on apply(F, inputs): the function's bound at the tracked body
    address, with each root-tag variable replaced by the input's bound at
    the position it has been read to. `input_bounds` maps root sequents to
    BoundAssignments."""
    state_at = applied.eval_state_at
    fn = applied.eval_fn

    def at(addr: Address):
        st = state_at(addr)
        term = fn_bounds.at(st.h)
        if term is None:
            return None
        mapping = {}
        for key in term_vars(term):
            if key[0] == "tag":
                root, pos = key[1], key[2]
                if root in input_bounds:
                    inner = input_bounds[root].at(_strip_read_indices(pos))
                    if inner is None:
                        return None
                    mapping[key] = inner
        return subst_term(term, mapping)

    return BoundAssignment(at, name=f"composed({applied.name})")


def _strip_read_indices(pos: Address) -> Address:
    return pos


def lift_bounds(lifted, fn_bounds: BoundAssignment) -> BoundAssignment:
    """Bounds on a lifted function: the source bound at the tracked address."""
    state_at = lifted.lift_state_at

    def at(addr: Address):
        return fn_bounds.at(state_at(addr).h)

    return BoundAssignment(at, name=f"lifted({lifted.name})")


def check_function_bounds(fn, fuel: int, probes: Probes = DEFAULT_PROBES,
                          samples: Optional[list] = None,
                          bounds: Optional[BoundAssignment] = None,
                          max_pairs: int = 24) -> Verdict:
    """Run the decrease check on an operator body with its own bound hook;
    the ambient grid position is derived from the root complexities."""
    comps = [c for c in (_tag_complexity(r.sequent) for r in fn.roots)
             if c is not None]
    m = max((c.depth for c in comps), default=0) + 1
    big_l = max((c.level for c in comps), default=0)
    extra = tuple(r.tag() for r in fn.roots)
    return check_bound_upto(fn.body, bounds if bounds is not None
                            else operator_bounds(fn),
                            fuel, probes, samples, m, big_l, extra, max_pairs)
