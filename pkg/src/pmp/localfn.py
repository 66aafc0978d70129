"""Locally defined functions: proof-trees that read other proof-trees.

A LocalFunction is a list of roots (input contracts) plus a body tree whose
Read rules on those roots consult the inputs. `apply` evaluates the body
against concrete input trees (deleting Reads and following the branch the
input dictates); `lift` re-targets a function to a larger theory by passing
foreign rules through and re-reading behind them.

Operator bodies are produced from small immutable state machines (`Machine`):
a machine either emits a rule or asks for the input's rule at a position.
Building a tree from a machine inserts Read nodes for the requests and a Rep
between two Reads that would otherwise be consecutive on the same root.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import calculus as ca
from . import syntax
from .calculus import (
    Address,
    EMPTY_ADDR,
    ExtendedSequent,
    FnTheory,
    PremiseIndex,
    ReadRule,
    Rule,
    Sequent,
    Tag,
    TheoryId,
    remove_tag,
    theory_contains,
)
from .prooftree import ProofTree, Probes, Verdict, Failure

RESOLUTION_CAP = 256


class LocalFnError(ValueError):
    pass


class ConsecutiveReadError(LocalFnError):
    pass


@dataclass(frozen=True)
class RootSpec:
    """One input contract: the sequent consumed, the theory read, and the
    initial read position."""

    sequent: Sequent
    theory: TheoryId
    position: Address = EMPTY_ADDR

    def tag(self) -> Tag:
        return Tag(self.sequent, self.position, self.sequent)


class LocalFunction:
    def __init__(self, roots: tuple, body: ProofTree, name: str = "fn",
                 bound_term_at: Optional[Callable] = None):
        self.roots = tuple(roots)
        self.body = body
        self.name = name
        self._bound_term_at = bound_term_at

    @property
    def declared(self) -> ExtendedSequent:
        return self.body.declared

    def codomain(self) -> TheoryId:
        th = self.body.theory
        return th.base if isinstance(th, FnTheory) else th

    def root_for(self, read: ReadRule) -> Optional[RootSpec]:
        for spec in self.roots:
            if read.root == spec.sequent and read.theory == spec.theory:
                return spec
        return None

    def bound_term_at(self, addr: Address):
        if self._bound_term_at is None:
            return None
        return self._bound_term_at(addr)

    def __repr__(self):
        return f"<LocalFunction {self.name}>"


def fn_theory(codomain: TheoryId, roots) -> FnTheory:
    return FnTheory(codomain, tuple((r.sequent, r.theory) for r in roots))


def declared_with_root_tags(formulas: ExtendedSequent, roots) -> ExtendedSequent:
    return ExtendedSequent(formulas.formulas,
                           formulas.tags | frozenset(r.tag() for r in roots))


# ---------------------------------------------------------------------------
# Machines.


@dataclass(frozen=True)
class Emit:
    rule: Rule


@dataclass(frozen=True)
class Need:
    root: int  # index into the function's roots
    position: Address
    scope: Sequent


class Machine:
    """Immutable generator core: poll() -> Emit | Need; after an Emit the
    machine is advanced per output premise token with on_descend; after a
    Need it is fed the branch rule with on_read."""

    def poll(self):
        raise NotImplementedError

    def on_read(self, branch: Rule) -> "Machine":
        raise NotImplementedError

    def on_descend(self, token) -> "Machine":
        raise NotImplementedError

    def bound_term(self):
        return None


@dataclass(frozen=True)
class _BodyState:
    machine: Machine
    last_read_root: object = None  # root index after a Read node, else None
    rep_wait: bool = False


def machine_function(name: str, codomain: TheoryId, roots, machine: Machine,
                     declared: ExtendedSequent,
                     declared_includes_tags: bool = False) -> LocalFunction:
    """Build a LocalFunction whose body unfolds the machine. The declared
    conclusion gets the root tags attached unless already present."""
    roots = tuple(roots)
    if not declared_includes_tags:
        declared = declared_with_root_tags(declared, roots)
    theory = fn_theory(codomain, roots)

    states: dict[Address, _BodyState] = {EMPTY_ADDR: _BodyState(machine)}

    def state_at(addr: Address) -> _BodyState:
        st = states.get(addr)
        if st is not None:
            return st
        parent = state_at(addr[:-1])
        st = _step(parent, addr[-1].token)
        states[addr] = st
        return st

    def _node_rule(st: _BodyState) -> Rule:
        p = st.machine.poll()
        if isinstance(p, Emit):
            return p.rule
        spec = roots[p.root]
        if st.last_read_root == p.root and not st.rep_wait:
            return ca.REP
        return ReadRule(spec.theory, spec.sequent, p.position, p.scope | spec.sequent)

    def _step(st: _BodyState, token) -> _BodyState:
        p = st.machine.poll()
        if isinstance(p, Emit):
            return _BodyState(st.machine.on_descend(token), None)
        if st.last_read_root == p.root and not st.rep_wait:
            # the node was an interposed Rep; stay, but allow the Read next
            return _BodyState(st.machine, st.last_read_root, rep_wait=True)
        if not isinstance(token, Rule):
            raise LocalFnError(f"Read branch token must be a rule, got {token!r}")
        return _BodyState(st.machine.on_read(token), p.root)

    def generator(addr: Address) -> Rule:
        return _node_rule(state_at(addr))

    body = ProofTree(theory, declared, generator, name=name)

    def bound_at(addr: Address):
        return state_at(addr).machine.bound_term()

    return LocalFunction(roots, body, name=name, bound_term_at=bound_at)


# ---------------------------------------------------------------------------
# Evaluation.


@dataclass(frozen=True)
class EvalState:
    """Bookkeeping for one output node: body address before (h0) and after
    (h) Read resolution."""

    h0: Address
    h: Address


def _normalize_inputs(fn: LocalFunction, inputs) -> dict:
    if isinstance(inputs, ProofTree):
        inputs = [inputs]
    if isinstance(inputs, dict):
        table = dict(inputs)
    else:
        inputs = list(inputs)
        if len(inputs) != len(fn.roots):
            raise LocalFnError(
                f"{fn.name} has {len(fn.roots)} roots, got {len(inputs)} inputs")
        table = {spec.sequent: tree for spec, tree in zip(fn.roots, inputs)}
    for spec in fn.roots:
        if spec.sequent not in table:
            raise LocalFnError(f"no input for root {ca.seq_str(spec.sequent)}")
        tree = table[spec.sequent]
        if tree.theory != spec.theory:
            raise LocalFnError(
                f"input for root {ca.seq_str(spec.sequent)} declares theory "
                f"{ca.render_theory(tree.theory)}, expected {ca.render_theory(spec.theory)}")
    return table


def apply(fn: LocalFunction, inputs, declared: Optional[ExtendedSequent] = None,
          check_input_rules: bool = True) -> ProofTree:
    """Evaluate the function on input trees: copy the body, deleting each
    Read on a function root and following the branch the input's rule at the
    tag position names."""
    table = _normalize_inputs(fn, inputs)

    if declared is None:
        declared = fn.declared
        for spec in fn.roots:
            declared = remove_tag(declared, spec.tag())
            contrib = table[spec.sequent].declared
            declared = ExtendedSequent(
                declared.formulas | (contrib.formulas - spec.sequent),
                declared.tags | contrib.tags)

    states: dict[Address, EvalState] = {}

    def resolve(h0: Address) -> Address:
        h = h0
        followed = []
        while True:
            rule = fn.body.rule_at(h)
            if not isinstance(rule, ReadRule):
                return h
            spec = fn.root_for(rule)
            if spec is None:
                return h  # foreign read: part of the output
            if followed and followed[-1] == spec.sequent:
                raise ConsecutiveReadError(
                    f"consecutive Reads on root {ca.seq_str(spec.sequent)} while "
                    f"evaluating {fn.name}")
            if len(followed) > RESOLUTION_CAP:
                raise LocalFnError(
                    f"Read resolution exceeded {RESOLUTION_CAP} steps in {fn.name}; "
                    "possible Read-chain divergence")
            input_tree = table[spec.sequent]
            branch = input_tree.rule_at(rule.position)
            if check_input_rules and not theory_contains(rule.theory, branch):
                raise LocalFnError(
                    f"input rule {ca.rule_str(branch)} at "
                    f"{ca.seq_str(spec.sequent)}:{_pos_str(rule.position)} is not in "
                    f"the read theory {ca.render_theory(rule.theory)}")
            followed.append(spec.sequent)
            h = h + (PremiseIndex(rule, branch),)

    def state_at(addr: Address) -> EvalState:
        st = states.get(addr)
        if st is not None:
            return st
        if not addr:
            st = EvalState(EMPTY_ADDR, resolve(EMPTY_ADDR))
        else:
            parent = state_at(addr[:-1])
            rule = fn.body.rule_at(parent.h)
            h0 = parent.h + (PremiseIndex(rule, addr[-1].token),)
            st = EvalState(h0, resolve(h0))
        states[addr] = st
        return st

    def generator(addr: Address) -> Rule:
        return fn.body.rule_at(state_at(addr).h)

    out = ProofTree(fn.codomain(), declared, generator, name=f"{fn.name}(..)")
    out.eval_state_at = state_at  # bookkeeping for bound composition
    out.eval_inputs = table
    out.eval_fn = fn
    return out


def _pos_str(pos: Address) -> str:
    from .prooftree import render_address

    return render_address(pos)


# ---------------------------------------------------------------------------
# Lifting.


@dataclass(frozen=True)
class _PiChain:
    """Persistent position-translation map (old input positions to new)."""

    parent: Optional["_PiChain"]
    kind: str  # "root" | "extend" | "foreign"
    base: Address = EMPTY_ADDR
    rule: Optional[Rule] = None
    token: object = None

    def lookup(self, q: Address) -> Address:
        chain = self
        while chain is not None:
            if chain.kind == "extend":
                if len(q) == len(chain.base) + 1 and q[:-1] == chain.base \
                        and q[-1].rule == chain.rule:
                    return chain.parent.lookup(chain.base) + (q[-1],)
            elif chain.kind == "foreign":
                if q == chain.base:
                    return chain.parent.lookup(chain.base) + (
                        PremiseIndex(chain.rule, chain.token),)
            chain = chain.parent
        if q == EMPTY_ADDR:
            return EMPTY_ADDR
        raise LocalFnError(f"no position translation for {_pos_str(q)}")


_PI_ROOT = _PiChain(None, "root")


@dataclass(frozen=True)
class _LiftState:
    h: Address
    pis: tuple  # of (root index, _PiChain)
    pending: Optional[tuple] = None  # (root index, read rule, foreign branch)

    def pi(self, i: int) -> _PiChain:
        for j, chain in self.pis:
            if j == i:
                return chain
        return _PI_ROOT

    def with_pi(self, i: int, chain: _PiChain) -> tuple:
        rest = tuple((j, c) for j, c in self.pis if j != i)
        return rest + ((i, chain),)


def lift(fn: LocalFunction, tplus: TheoryId,
         codomain: Optional[TheoryId] = None) -> LocalFunction:
    """Extend the function to read a larger theory: Reads are re-targeted to
    tplus with translated positions; foreign rules met at a Read are copied
    (Reads among them with widened scope) and the function re-reads behind
    them."""
    new_roots = tuple(RootSpec(r.sequent, tplus, r.position) for r in fn.roots)
    out_codomain = codomain if codomain is not None else tplus
    theory = fn_theory(out_codomain, new_roots)

    states: dict[Address, _LiftState] = {EMPTY_ADDR: _LiftState(EMPTY_ADDR, ())}

    def state_at(addr: Address) -> _LiftState:
        st = states.get(addr)
        if st is not None:
            return st
        parent = state_at(addr[:-1])
        st = _step(parent, addr[-1].token)
        states[addr] = st
        return st

    def _root_read(st: _LiftState):
        rule = fn.body.rule_at(st.h)
        if isinstance(rule, ReadRule):
            spec = fn.root_for(rule)
            if spec is not None:
                return rule, spec, fn.roots.index(spec)
        return None

    def _node_rule(st: _LiftState) -> Rule:
        if st.pending is not None:
            _i, _read, branch = st.pending
            if isinstance(branch, ReadRule):
                _r, read, _b = st.pending
                return ReadRule(branch.theory, branch.root, branch.position,
                                branch.scope | read.scope)
            return branch
        hit = _root_read(st)
        if hit is not None:
            read, spec, i = hit
            return ReadRule(tplus, read.root, st.pi(i).lookup(read.position),
                            read.scope)
        return fn.body.rule_at(st.h)

    def _step(st: _LiftState, token) -> _LiftState:
        if st.pending is not None:
            i, read, branch = st.pending
            chain = _PiChain(st.pi(i), "foreign", read.position, branch, token)
            return _LiftState(st.h, st.with_pi(i, chain))
        hit = _root_read(st)
        if hit is not None:
            read, spec, i = hit
            if not isinstance(token, Rule):
                raise LocalFnError(f"Read branch token must be a rule, got {token!r}")
            if theory_contains(spec.theory, token):
                chain = _PiChain(st.pi(i), "extend", read.position, token)
                return _LiftState(st.h + (PremiseIndex(read, token),),
                                  st.with_pi(i, chain))
            return _LiftState(st.h, st.pis, pending=(i, read, token))
        rule = fn.body.rule_at(st.h)
        return _LiftState(st.h + (PremiseIndex(rule, token),), st.pis)

    def generator(addr: Address) -> Rule:
        return _node_rule(state_at(addr))

    body = ProofTree(theory, fn.declared, generator, name=f"lift({fn.name})")

    def bound_at(addr: Address):
        return fn.bound_term_at(state_at(addr).h)

    lifted = LocalFunction(new_roots, body, name=f"lift({fn.name})",
                           bound_term_at=bound_at)
    lifted.lift_state_at = state_at
    lifted.lift_source = fn
    return lifted


# ---------------------------------------------------------------------------
# Rule-by-rule conservativity.


def check_conservative(tplus: TheoryId, t: TheoryId, scope: Sequent,
                       probes: Probes) -> Verdict:
    """Probe-based check that tplus only adds rules whose conclusions avoid
    the scope: non-Read rules must have conclusion formulas disjoint from it,
    Read rules are constrained on their tag part (vacuous for formula
    scopes; their formula part is neutralized by scope widening on lift)."""
    failures = []
    for rule in probes.rules:
        if not theory_contains(tplus, rule) or theory_contains(t, rule):
            continue
        if isinstance(rule, ReadRule):
            continue
        overlap = ca.conclusion(rule).formulas & scope
        if overlap:
            shown = ", ".join(sorted(syntax.render(f) for f in overlap))
            failures.append(Failure("conservativity", EMPTY_ADDR,
                                    f"{ca.rule_str(rule)} introduces {shown}"))
    return Verdict("rule-by-rule-conservativity", not failures, tuple(failures))
