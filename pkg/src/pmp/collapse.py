"""Collapsing: remove partner-cut inferences of top complexity by evaluating
their function premise on the collapsed proof premise.

The transformer walks the input; a top-complexity CutOmegaFlat becomes a Rep
whose child continues inside the function premise, with the collapsed top
premise registered as that function's input. A Read at top complexity is then
resolved against the registered input: rules of the read theory are followed
silently, anything else is passed through (Reads among them scope-widened)
while the function continues behind the input's Rep branch."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from . import calculus as ca
from . import syntax
from .calculus import (
    Address,
    BaseM,
    CutOmegaFlatRule,
    EMPTY_ADDR,
    ExtendedSequent,
    Full,
    OmegaFlatRule,
    PremiseIndex,
    ReadRule,
    RepRule,
    Rule,
    Sequent,
    TheoryId,
    WithCuts,
    seq,
    theory_contains,
)
from .localfn import _PI_ROOT, _PiChain
from .prooftree import ProofTree, subtree
from .syntax import Complexity, comp, negate, inst2

RESOLVE_CAP = 4096
REP_CHAIN_CAP = 1000


class CollapseError(ValueError):
    pass


def _as_full(theory: TheoryId) -> Full:
    if isinstance(theory, Full):
        return theory
    if isinstance(theory, WithCuts) and theory.r == 0:
        return Full(theory.n, theory.l, theory.m, theory.lv)
    raise CollapseError(f"collapse expects a cut-free graded theory, got "
                        f"{ca.render_theory(theory)}")


def _declaration_violations(declared: ExtendedSequent, target: Complexity):
    bad = []
    for f in declared.formulas:
        for sub in syntax.second_order_subformulas(f):
            if not (comp(sub) < target):
                bad.append(f"formula {syntax.render(sub)} has complexity {comp(sub)}")
    for t in declared.tags:
        c = ca.root_complexity(t.root)
        if c is None or not (c < target):
            bad.append(f"tag {ca.tag_str(t)} has complexity {c}")
    return bad


@dataclass(frozen=True)
class _Binding:
    top: ProofTree  # the collapsed top premise (the function's input)
    pi: _PiChain


def _swap_in_rule(rule: Rule, a, b) -> Rule:
    """Exchange two second-order variables throughout a rule descriptor."""
    sw = lambda f: syntax.swap_set_vars(f, a, b)
    swv = lambda v: b if v == a else (a if v == b else v)
    if isinstance(rule, ca.TrueRule):
        return rule
    if isinstance(rule, ca.AxRule):
        return ca.AxRule.of(sw(rule.literal))
    if isinstance(rule, ca.AndRule):
        return ca.AndRule(sw(rule.formula))
    if isinstance(rule, ca.OrRule):
        return ca.OrRule(sw(rule.formula), rule.branch)
    if isinstance(rule, ca.OmegaRule):
        return ca.OmegaRule(sw(rule.formula))
    if isinstance(rule, ca.ExistsNumRule):
        return ca.ExistsNumRule(sw(rule.formula), rule.witness)
    if isinstance(rule, ca.ForallSetRule):
        return ca.ForallSetRule(sw(rule.formula), swv(rule.witness))
    if isinstance(rule, OmegaFlatRule):
        return OmegaFlatRule(swv(rule.var), sw(rule.formula))
    if isinstance(rule, CutOmegaFlatRule):
        return CutOmegaFlatRule(swv(rule.eigvar), swv(rule.var), sw(rule.formula))
    if isinstance(rule, RepRule):
        return rule
    if isinstance(rule, ca.CutRule):
        return ca.CutRule(sw(rule.formula))
    if isinstance(rule, ReadRule):
        return ReadRule(rule.theory, frozenset(sw(f) for f in rule.root),
                        _swap_in_addr(rule.position, a, b),
                        frozenset(sw(f) for f in rule.scope))
    raise CollapseError(f"cannot rename in {ca.rule_str(rule)}")


def _swap_in_addr(addr: Address, a, b) -> Address:
    out = []
    for element in addr:
        tok = element.token
        if isinstance(tok, Rule):
            tok = _swap_in_rule(tok, a, b)
        out.append(PremiseIndex(_swap_in_rule(element.rule, a, b), tok))
    return tuple(out)


def _swapped_tree(tree: ProofTree, a, b) -> ProofTree:
    """View a tree through an exchange of two second-order variables."""

    def gen(addr: Address) -> Rule:
        return _swap_in_rule(tree.rule_at(_swap_in_addr(addr, a, b)), a, b)

    declared = ExtendedSequent(
        frozenset(syntax.swap_set_vars(f, a, b) for f in tree.declared.formulas),
        tree.declared.tags)
    return ProofTree(tree.theory, declared, gen, name=f"swap({tree.name})")


@dataclass(frozen=True)
class _State:
    h: Address
    bindings: tuple  # of (root sequent, _Binding); innermost shadows
    emit: Rule
    read_root: Optional[Sequent] = None  # set when the node is a Read
    rep_detour: Optional[Rule] = None  # interposed Rep: emit Rep, then this


def _binding_for(bindings: tuple, root: Sequent) -> Optional[_Binding]:
    for r, b in reversed(bindings):
        if r == root:
            return b
    return None


def _with_binding(bindings: tuple, root: Sequent, b: _Binding) -> tuple:
    return bindings + ((root, b),)


def _update_binding(bindings: tuple, root: Sequent, b: _Binding) -> tuple:
    out = list(bindings)
    for i in range(len(out) - 1, -1, -1):
        if out[i][0] == root:
            out[i] = (root, b)
            return tuple(out)
    return tuple(out) + ((root, b),)


def collapse(d: ProofTree, m: int, lv: int,
             check_preconditions: bool = True) -> ProofTree:
    theory = _as_full(d.theory)
    n, l = theory.n, theory.l
    target = Complexity(m, lv)
    if check_preconditions:
        bad = _declaration_violations(d.declared, target)
        if bad:
            raise CollapseError("collapse preconditions violated: " + "; ".join(bad))
    pred = target.predecessor(n) or Complexity(0, 0)
    out_theory = Full(n, l, pred.depth, pred.level)
    read_theory = BaseM(n, l, m, lv)

    def is_top_cut(rule: Rule) -> bool:
        return isinstance(rule, CutOmegaFlatRule) and comp(rule.formula) == target

    def is_top_read(rule: Rule) -> bool:
        return isinstance(rule, ReadRule) and rule.theory == read_theory \
            and Complexity(m, lv) in ca.read_root_complexities(rule.root)

    def place(h: Address, bindings: tuple, rule: Rule,
              prev_root: Optional[Sequent]) -> _State:
        if isinstance(rule, ReadRule):
            if rule.root == prev_root:
                return _State(h, bindings, RepRule(), rep_detour=rule)
            return _State(h, bindings, rule, read_root=rule.root)
        return _State(h, bindings, rule)

    def resolve(h: Address, bindings: tuple,
                prev_root: Optional[Sequent]) -> _State:
        """Walk the input from h until a placeable rule emerges."""
        for _ in range(RESOLVE_CAP):
            rule = d.rule_at(h)
            if is_top_cut(rule):
                return _State(h, bindings, RepRule())
            if isinstance(rule, OmegaFlatRule) and comp(rule.formula) == target:
                raise CollapseError(
                    "top-complexity flat-Omega met: the declaration "
                    "preconditions exclude this")
            if is_top_read(rule):
                binding = _binding_for(bindings, rule.root)
                if binding is None:
                    raise CollapseError(
                        f"Read on {ca.seq_str(rule.root)} has no registered input "
                        "(tag of top complexity in the declaration?)")
                actual = binding.pi.lookup(rule.position)
                resolved = binding.top.rule_at(actual)
                if theory_contains(read_theory, resolved):
                    chain = _PiChain(binding.pi, "extend", rule.position, resolved)
                    bindings = _update_binding(bindings, rule.root,
                                               replace(binding, pi=chain))
                    h = h + (PremiseIndex(rule, resolved),)
                    continue
                placed = resolved
                if isinstance(resolved, ReadRule):
                    placed = ReadRule(resolved.theory, resolved.root,
                                      resolved.position, resolved.scope | rule.scope)
                return place(h, bindings, placed, prev_root)
            return place(h, bindings, rule, prev_root)
        raise CollapseError(f"collapse resolution exceeded {RESOLVE_CAP} steps")

    states: dict[Address, _State] = {}

    def state_at(addr: Address) -> _State:
        st = states.get(addr)
        if st is not None:
            return st
        if not addr:
            st = resolve(EMPTY_ADDR, (), None)
        else:
            st = _step(state_at(addr[:-1]), addr[-1].token)
        states[addr] = st
        return st

    def _step(st: _State, token) -> _State:
        if st.rep_detour is not None:
            # the node was an interposed Rep; now place the pending rule
            return _State(st.h, st.bindings, st.rep_detour,
                          read_root=st.rep_detour.root)
        rule = d.rule_at(st.h)
        if is_top_cut(rule):
            # output Rep: its child continues in the function premise with
            # the collapsed top premise registered under the premise tag root.
            # The top premise speaks of the eigenvariable; the function's
            # scopes of the tag variable: align them by swapping.
            tag_root = seq(negate(inst2(rule.formula, rule.var)))
            top_addr = st.h + (PremiseIndex(rule, "top"),)
            top_sub = subtree(d, top_addr)
            collapsed_top = collapse(top_sub, m, lv, check_preconditions=False)
            if rule.eigvar != rule.var:
                collapsed_top = _swapped_tree(collapsed_top, rule.eigvar, rule.var)
            binding = _Binding(collapsed_top, _PI_ROOT)
            return resolve(st.h + (PremiseIndex(rule, "bot"),),
                           _with_binding(st.bindings, tag_root, binding), None)
        if is_top_read(rule):
            # the emitted rule was foreign: continue behind the Rep branch,
            # translating positions premise-by-premise
            binding = _binding_for(st.bindings, rule.root)
            actual = binding.pi.lookup(rule.position)
            raw = binding.top.rule_at(actual)
            chain = _PiChain(binding.pi, "foreign", rule.position, raw, token)
            bindings = _update_binding(st.bindings, rule.root,
                                       replace(binding, pi=chain))
            return resolve(st.h + (PremiseIndex(rule, ca.REP),), bindings,
                           st.read_root)
        return resolve(st.h + (PremiseIndex(rule, token),), st.bindings,
                       st.read_root)

    def generator(addr: Address) -> Rule:
        return state_at(addr).emit

    out = ProofTree(out_theory, d.declared, generator,
                    name=f"collapse[{m},{lv}]({d.name})")
    out.collapse_state_at = state_at
    return out


def collapse_all(d: ProofTree, strict: bool = True):
    """Iterate collapsing down the whole grid; returns (tree, steps) where
    steps lists the positions applied. With strict=False the walk stops at
    the first precondition failure instead of raising."""
    theory = _as_full(d.theory)
    n, l = theory.n, theory.l
    non_arith = [f for f in d.declared.formulas if not syntax.arithmetic(f)]
    if non_arith and strict:
        raise CollapseError(
            "collapse_all needs an arithmetic declaration; offending: "
            + ", ".join(sorted(syntax.render(f) for f in non_arith)))
    pos = Complexity(n, l)
    out = d
    steps = []
    while pos is not None:
        bad = _declaration_violations(out.declared, pos)
        if bad:
            if strict:
                raise CollapseError("collapse preconditions violated: "
                                    + "; ".join(bad))
            break
        out = collapse(out, pos.depth, pos.level, check_preconditions=False)
        steps.append((pos.depth, pos.level))
        pos = pos.predecessor(n)
    return out, steps


def strip_reps(d: ProofTree) -> ProofTree:
    """Cosmetic single pass removing Rep nodes (bounded per chain)."""

    def resolve(h: Address) -> Address:
        for _ in range(REP_CHAIN_CAP):
            if not isinstance(d.rule_at(h), RepRule):
                return h
            h = h + (PremiseIndex(RepRule(), "top"),)
        raise CollapseError(f"Rep chain longer than {REP_CHAIN_CAP}")

    states: dict[Address, Address] = {}

    def state_at(addr: Address) -> Address:
        got = states.get(addr)
        if got is not None:
            return got
        if not addr:
            h = resolve(EMPTY_ADDR)
        else:
            parent = state_at(addr[:-1])
            rule = d.rule_at(parent)
            h = resolve(parent + (PremiseIndex(rule, addr[-1].token),))
        states[addr] = h
        return h

    return ProofTree(d.theory, d.declared, lambda a: d.rule_at(state_at(a)),
                     name=f"strip-reps({d.name})")
