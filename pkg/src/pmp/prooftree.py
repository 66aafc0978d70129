"""Lazy, possibly ill-founded proof-trees and their fuel-bounded observations.

A tree is a declared conclusion plus a total deterministic generator from
addresses to rule descriptors; results are cached per address. Exact
conclusions are not computable on infinite trees, so every check here is a
bounded observation: depth is capped by fuel and infinitely-branching nodes
(omega, Read) are explored along a finite probe set. Checks are sound but
partial: a reported violation is real, a pass covers the explored prefix.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional

from . import calculus as ca
from . import sexpr, syntax
from .calculus import (
    Address,
    EMPTY_ADDR,
    ExtendedSequent,
    PremiseIndex,
    ReadRule,
    Rule,
    Tag,
    TheoryId,
    conclusion,
    eigenvariables,
    premise_sequent,
    rule_premises,
    theory_contains,
    valid_token,
)


class ProofTreeError(ValueError):
    pass


class DomainError(ProofTreeError):
    def __init__(self, prefix: Address, message: str):
        super().__init__(f"address not in tree domain at {render_address(prefix)}: {message}")
        self.prefix = prefix


# ---------------------------------------------------------------------------
# Probes: the finite exploration policy for infinitely-branching rules.


@dataclass(frozen=True)
class Probes:
    rules: tuple = ()
    omega_width: int = 3

    def with_rules(self, more: Iterable[Rule]) -> "Probes":
        merged = {ca.rule_str(r): r for r in self.rules}
        for r in more:
            merged.setdefault(ca.rule_str(r), r)
        return Probes(tuple(merged[k] for k in sorted(merged)), self.omega_width)

    def read_branches(self, read: ReadRule) -> list[Rule]:
        return [r for r in self.rules if theory_contains(read.theory, r)]


DEFAULT_PROBES = Probes((ca.REP,), 3)


def premise_tokens(rule: Rule, probes: Probes) -> list:
    """Finite list of premise tokens to explore for this rule."""
    spec = rule_premises(rule)
    if spec.kind == "finite":
        return list(spec.tokens)
    if spec.kind == "naturals":
        return list(range(probes.omega_width))
    return probes.read_branches(rule)


# ---------------------------------------------------------------------------
# Trees.


class ProofTree:
    """theory + declared conclusion + total generator, cached by address."""

    def __init__(self, theory: TheoryId, declared: ExtendedSequent,
                 generator: Callable[[Address], Rule], name: str = "tree"):
        self.theory = theory
        self.declared = declared
        self._generator = generator
        self.name = name
        self._cache: dict[Address, Rule] = {}

    def rule_at(self, addr: Address) -> Rule:
        """Expand the tree at an address, validating every prefix."""
        cached = self._cache.get(addr)
        if cached is not None:
            return cached
        if addr:
            parent = self.rule_at(addr[:-1])
            last = addr[-1]
            if not isinstance(last, PremiseIndex):
                raise DomainError(addr, f"malformed element {last!r}")
            if last.rule != parent:
                raise DomainError(
                    addr, f"element names rule {ca.rule_str(last.rule)} but the tree has "
                    f"{ca.rule_str(parent)}")
            if not valid_token(parent, last.token):
                raise DomainError(addr, f"token {sexpr.dumps(ca.render_token(last.token))} "
                                  f"is not a premise of {ca.rule_str(parent)}")
        rule = self._generator(addr)
        if not isinstance(rule, Rule):
            raise ProofTreeError(f"generator returned {rule!r} at {render_address(addr)}")
        self._cache[addr] = rule
        return rule

    def child(self, addr: Address, token) -> Address:
        return addr + (PremiseIndex(self.rule_at(addr), token),)

    def with_conclusion(self, declared: ExtendedSequent) -> "ProofTree":
        return ProofTree(self.theory, declared, self._generator, self.name)

    def with_theory(self, theory: TheoryId) -> "ProofTree":
        return ProofTree(theory, self.declared, self._generator, self.name)

    def __repr__(self):
        return f"<ProofTree {self.name}>"


def expand(tree: ProofTree, addr: Address) -> Rule:
    return tree.rule_at(addr)


def subtree(tree: ProofTree, addr: Address,
            declared: Optional[ExtendedSequent] = None) -> ProofTree:
    tree.rule_at(addr)  # validate
    if declared is None:
        back = ca.gamma_back(addr)
        declared = ExtendedSequent(tree.declared.formulas | back.formulas,
                                   tree.declared.tags | back.tags)
    return ProofTree(tree.theory, declared, lambda tau: tree.rule_at(addr + tau),
                     name=f"{tree.name}@{render_address(addr)}")


def tree_of_dict(theory: TheoryId, declared: ExtendedSequent,
                 nodes: dict, name: str = "finite") -> ProofTree:
    """A finite tree from an address -> rule mapping."""

    def gen(addr: Address) -> Rule:
        try:
            return nodes[addr]
        except KeyError:
            raise DomainError(addr, "no rule recorded at this address")

    return ProofTree(theory, declared, gen, name)


@dataclass
class FiniteNode:
    """Convenience builder for well-founded trees."""

    rule: Rule
    children: dict = field(default_factory=dict)  # token -> FiniteNode

    def addresses(self, base: Address = EMPTY_ADDR):
        yield base, self.rule
        for token, child in self.children.items():
            yield from child.addresses(base + (PremiseIndex(self.rule, token),))

    def height(self) -> int:
        if not self.children:
            return 1
        return 1 + max(c.height() for c in self.children.values())

    def all_rules(self) -> list[Rule]:
        out = [self.rule]
        for c in self.children.values():
            out.extend(c.all_rules())
        return out

    def as_tree(self, theory: TheoryId, declared: ExtendedSequent,
                name: str = "finite") -> ProofTree:
        return tree_of_dict(theory, declared, dict(self.addresses()), name)


def node(rule: Rule, *children, **kw) -> FiniteNode:
    """node(rule, child...) pairs children with the rule's finite tokens in
    order; keyword children override by token name."""
    spec = rule_premises(rule)
    mapping = {}
    if children:
        if spec.kind != "finite" or len(children) > len(spec.tokens):
            raise ProofTreeError(f"too many children for {ca.rule_str(rule)}")
        for token, child in zip(spec.tokens, children):
            mapping[token] = child
    for token, child in kw.items():
        mapping[token] = child
    return FiniteNode(rule, mapping)


# ---------------------------------------------------------------------------
# Fuel-bounded conclusion.


@dataclass(frozen=True)
class Found:
    """One conclusion element with the address witnessing it."""

    element: object  # Formula | Tag
    witness: Address


def conclusion_upto(tree: ProofTree, addr: Address, fuel: int,
                    probes: Probes = DEFAULT_PROBES,
                    witnesses: bool = False):
    """Sound under-approximation of the conclusion at `addr`: collect the
    conclusions of all explored nodes up to `fuel` levels above, dropping
    anything removed at an intermediate premise step (tags by scope
    subsumption)."""
    formulas: dict = {}
    tags: dict = {}

    stack = [(EMPTY_ADDR, frozenset(), ())]
    while stack:
        rel, removed_formulas, removers = stack.pop()
        rule = tree.rule_at(addr + rel)
        concl = conclusion(rule)
        for phi in concl.formulas:
            if phi not in removed_formulas and phi not in formulas:
                formulas[phi] = addr + rel
        for t in concl.tags:
            if t not in tags and not any(r.removes_tag(t) for r in removers):
                tags[t] = addr + rel
        if len(rel) >= fuel:
            continue
        for token in premise_tokens(rule, probes):
            prem = premise_sequent(rule, token)
            stack.append((rel + (PremiseIndex(rule, token),),
                          removed_formulas | prem.formulas,
                          removers + (prem,)))

    es = ExtendedSequent(frozenset(formulas), frozenset(tags))
    if witnesses:
        return es, {**formulas, **tags}
    return es


# ---------------------------------------------------------------------------
# Verdicts.


@dataclass(frozen=True)
class Failure:
    kind: str
    address: Address
    detail: str

    def __str__(self):
        return f"[{self.kind}] at {render_address(self.address)}: {self.detail}"


@dataclass(frozen=True)
class Verdict:
    check: str
    passed: bool
    failures: tuple = ()
    fuel: int = 0
    note: str = ""

    def __bool__(self):
        return self.passed

    def describe(self) -> str:
        status = "pass" if self.passed else "fail"
        lines = [f"{self.check}: {status} (fuel {self.fuel})"]
        for f in self.failures:
            lines.append("  " + str(f))
        return "\n".join(lines)


def _tag_in_declared(t: Tag, declared: ExtendedSequent) -> bool:
    return any(s.root == t.root and s.position == t.position and s.scope <= t.scope
               for s in declared.tags)


def check_conclusion_upto(tree: ProofTree, fuel: int,
                          probes: Probes = DEFAULT_PROBES) -> Verdict:
    """Verify the observed conclusion is contained in the declaration."""
    es, wit = conclusion_upto(tree, EMPTY_ADDR, fuel, probes, witnesses=True)
    failures = []
    for phi in sorted(es.formulas, key=syntax.render):
        if phi not in tree.declared.formulas:
            failures.append(Failure("conclusion", wit[phi],
                                    f"undeclared formula {syntax.render(phi)}"))
    for t in sorted(es.tags, key=ca.tag_str):
        if not _tag_in_declared(t, tree.declared):
            failures.append(Failure("conclusion", wit[t],
                                    f"undeclared tag {ca.tag_str(t)}"))
    return Verdict("conclusion-containment", not failures, tuple(failures), fuel)


def check_valid_upto(tree: ProofTree, fuel: int,
                     probes: Probes = DEFAULT_PROBES) -> Verdict:
    """Eigenvariable condition on the explored prefix: an eigenvariable of a
    premise may not occur free in what that premise concludes beyond its own
    premise sequent (side formulas)."""
    failures = []
    stack = [EMPTY_ADDR]
    while stack:
        addr = stack.pop()
        rule = tree.rule_at(addr)
        if len(addr) >= fuel:
            continue
        for token in premise_tokens(rule, probes):
            child = addr + (PremiseIndex(rule, token),)
            eig = eigenvariables(rule, token)
            if eig:
                prem = premise_sequent(rule, token)
                leak, wit = conclusion_upto(tree, child, fuel - len(child), probes,
                                            witnesses=True)
                side = [phi for phi in leak.formulas if phi not in prem.formulas]
                side_tags = [t for t in leak.tags if not prem.removes_tag(t)]
                for e in sorted(eig, key=str):
                    for phi in side:
                        if _mentions(phi, e):
                            failures.append(Failure(
                                "validity", wit[phi],
                                f"eigenvariable {e} free in side formula {syntax.render(phi)}"))
                    for t in side_tags:
                        if any(_mentions(phi, e) for phi in t.root | t.scope):
                            failures.append(Failure(
                                "validity", wit[t],
                                f"eigenvariable {e} occurs in tag {ca.tag_str(t)}"))
            stack.append(child)
    return Verdict("validity", not failures, tuple(failures), fuel)


def _mentions(phi, var) -> bool:
    fo, so = syntax.free_vars(phi)
    if isinstance(var, str):
        return var in fo
    return var in so


def check_no_consecutive_reads_upto(tree: ProofTree, fuel: int,
                                    probes: Probes = DEFAULT_PROBES) -> Verdict:
    failures = []
    stack = [EMPTY_ADDR]
    while stack:
        addr = stack.pop()
        rule = tree.rule_at(addr)
        if isinstance(rule, ReadRule) and addr:
            below = addr[-1].rule
            if isinstance(below, ReadRule) and below.root == rule.root:
                failures.append(Failure(
                    "consecutive-reads", addr,
                    f"two Reads in a row on root {ca.seq_str(rule.root)}"))
        if len(addr) >= fuel:
            continue
        for token in premise_tokens(rule, probes):
            stack.append(addr + (PremiseIndex(rule, token),))
    return Verdict("no-consecutive-reads", not failures, tuple(failures), fuel)


def check_theory_upto(tree: ProofTree, fuel: int,
                      probes: Probes = DEFAULT_PROBES) -> Verdict:
    failures = []
    stack = [EMPTY_ADDR]
    while stack:
        addr = stack.pop()
        rule = tree.rule_at(addr)
        if not theory_contains(tree.theory, rule):
            failures.append(Failure("theory", addr,
                                    f"{ca.rule_str(rule)} not in declared theory"))
        if len(addr) >= fuel:
            continue
        for token in premise_tokens(rule, probes):
            stack.append(addr + (PremiseIndex(rule, token),))
    return Verdict("theory-membership", not failures, tuple(failures), fuel)


def check_rules_upto(tree: ProofTree, fuel: int, allowed,
                     probes: Probes = DEFAULT_PROBES,
                     check_name: str = "allowed-rules") -> Verdict:
    """Every rule in the prefix satisfies the predicate `allowed`."""
    failures = []
    stack = [EMPTY_ADDR]
    while stack:
        addr = stack.pop()
        rule = tree.rule_at(addr)
        if not allowed(rule):
            failures.append(Failure(check_name, addr, f"forbidden rule {ca.rule_str(rule)}"))
        if len(addr) >= fuel:
            continue
        for token in premise_tokens(rule, probes):
            stack.append(addr + (PremiseIndex(rule, token),))
    return Verdict(check_name, not failures, tuple(failures), fuel)


# ---------------------------------------------------------------------------
# Rendering.


def render_address(addr: Address) -> str:
    if not addr:
        return "."
    return "." + ".".join(sexpr.dumps(ca.render_token(i.token)) for i in addr)


def render(tree: ProofTree, fuel: int, probes: Probes = DEFAULT_PROBES) -> str:
    """Deterministic indented listing of the depth-k prefix, one line per
    node: `addr | rule | conclusion-delta | tags`."""
    lines = []

    def emit(addr: Address):
        rule = tree.rule_at(addr)
        concl = conclusion(rule)
        delta = ", ".join(sorted(syntax.render(f) for f in concl.formulas)) or "-"
        tags = ", ".join(sorted(ca.tag_str(t) for t in concl.tags)) or "-"
        lines.append(f"{render_address(addr)} | {ca.rule_str(rule)} | {delta} | {tags}")
        if len(addr) >= fuel:
            spec = rule_premises(rule)
            if spec.kind == "finite" and spec.tokens:
                lines.append(f"{render_address(addr)} | (depth limit)")
            return
        spec = rule_premises(rule)
        tokens = premise_tokens(rule, probes)
        for token in sorted(tokens, key=ca.token_sort_key):
            emit(addr + (PremiseIndex(rule, token),))
        if spec.kind != "finite":
            lines.append(f"{render_address(addr)} | (elided: unprobed branches)")

    emit(EMPTY_ADDR)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Instrumentation (read-position recording, used by continuity checks).


class SpyTree(ProofTree):
    """Wrapper recording every address whose rule was requested."""

    def __init__(self, inner: ProofTree):
        super().__init__(inner.theory, inner.declared, inner.rule_at,
                         name=f"spy({inner.name})")
        self.inner = inner
        self.requested: set[Address] = set()

    def rule_at(self, addr: Address) -> Rule:
        self.requested.add(addr)
        return self.inner.rule_at(addr)


def mutate_above(tree: ProofTree, read_addresses: set[Address],
                 replacement: Rule = ca.REP) -> ProofTree:
    """A tree agreeing with `tree` on the read-closure and differing
    strictly above it (every unread address yields `replacement`)."""
    closure = set(read_addresses)
    for a in read_addresses:
        for i in range(len(a)):
            closure.add(a[:i])

    def gen(addr: Address) -> Rule:
        if addr in closure:
            return tree.rule_at(addr)
        return replacement

    return ProofTree(tree.theory, tree.declared, gen, name=f"mutated({tree.name})")


def harvest_rules(tree: ProofTree, fuel: int,
                  probes: Probes = DEFAULT_PROBES) -> list[Rule]:
    """All rule descriptors in the explored prefix (probe seeds for checks)."""
    seen = {}
    stack = [EMPTY_ADDR]
    while stack:
        addr = stack.pop()
        rule = tree.rule_at(addr)
        seen.setdefault(ca.rule_str(rule), rule)
        if len(addr) >= fuel:
            continue
        for token in premise_tokens(rule, probes):
            stack.append(addr + (PremiseIndex(rule, token),))
    return [seen[k] for k in sorted(seen)]
