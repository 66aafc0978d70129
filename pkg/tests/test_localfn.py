from __future__ import annotations

import pytest

from pmp import calculus as ca
from pmp import library, localfn
from pmp.calculus import (
    AndRule,
    AxRule,
    Base,
    BaseM,
    CutRule,
    NoRead,
    OrRule,
    PremiseIndex,
    ReadRule,
    RepRule,
    TrueRule,
    WithCuts,
    ext,
    seq,
)
from pmp.localfn import ConsecutiveReadError, apply, check_conservative, lift
from pmp.prooftree import (
    Probes,
    ProofTree,
    check_conclusion_upto,
    check_no_consecutive_reads_upto,
    conclusion_upto,
    node,
    premise_tokens,
    render,
)
from pmp.syntax import FVar, conj, disj, lit, negate, nlit, num, setlit, sv

A = lit("=", 0, 0)
B = lit("<=", 0, 0)
ETA = setlit(sv("X", 0), 0)


def id_for(phi, n=1, l=1):
    return library.identity_fn(phi, n, l)


def input_tree(fn, nd, extra=()):
    spec = fn.roots[0]
    declared = ext(*(set(ca.conclusion(nd.rule).formulas) | set(extra)))
    return nd.as_tree(spec.theory, declared)


def test_apply_identity_on_axiom():
    f = id_for(ETA)
    d = input_tree(f, node(AxRule.of(ETA)))
    out = apply(f, d)
    assert out.rule_at(()) == AxRule.of(ETA)
    es = conclusion_upto(out, (), 6)
    assert es.formulas == seq(ETA, negate(ETA))
    assert check_conclusion_upto(out, 6).passed


def test_apply_follows_deeper_structure():
    f = id_for(A)
    d_node = node(AndRule(conj(A, A)), node(TrueRule(A)), node(TrueRule(A)))
    d = input_tree(f, d_node)
    out = apply(f, d)
    r = out.rule_at(())
    assert r == AndRule(conj(A, A))
    child = out.child((), "L")
    assert out.rule_at(child) == TrueRule(A)


def test_apply_constant_function_ignores_input():
    # a function with no Read in its body is constant
    spec = localfn.RootSpec(seq(A), BaseM(1, 1, 0, 0))
    body = node(TrueRule(A)).as_tree(
        localfn.fn_theory(Base(1, 1), (spec,)), ext(A))
    f = localfn.LocalFunction((spec,), body, name="const")
    d1 = input_tree(f, node(AxRule.of(A)))
    d2 = input_tree(f, node(RepRule(), node(AxRule.of(A))))
    out1, out2 = apply(f, d1), apply(f, d2)
    assert render(out1, 4) == render(out2, 4)


def test_apply_root_read_takes_input_branch():
    # F's root is a Read; input starts with Rep: output starts at F's Rep branch
    f = id_for(A)
    d = input_tree(f, node(RepRule(), node(AxRule.of(A))))
    out = apply(f, d)
    assert out.rule_at(()) == RepRule()
    nxt = out.child((), "top")
    assert out.rule_at(nxt) == AxRule.of(A)


def test_apply_rejects_wrong_theory_input():
    f = id_for(A)
    bad = node(AxRule.of(A)).as_tree(Base(9, 9), ext(A, negate(A)))
    with pytest.raises(localfn.LocalFnError):
        apply(f, bad)


def test_apply_rejects_input_rule_outside_read_theory():
    f = id_for(A)
    # a finitary Ind rule is not in the read theory
    d = input_tree(f, node(ca.IndRule("x", lit("=", FVar("x"), 0), num(1)),
                           node(TrueRule(A))))
    out = apply(f, d)
    with pytest.raises(localfn.LocalFnError):
        out.rule_at(())


def test_containment_theorem_fuelled():
    # conclusion(apply(F,d)) within (decl(d) - root) + (decl(F) - root tag)
    f = id_for(ETA)
    d = input_tree(f, node(AxRule.of(ETA)))
    out = apply(f, d)
    es = conclusion_upto(out, (), 8)
    allowed = (d.declared.formulas - seq(ETA)) | f.declared.formulas
    assert es.formulas <= allowed
    assert not es.tags


def test_apply_never_emits_root_reads():
    f = id_for(ETA)
    d = input_tree(f, node(AxRule.of(ETA)))
    out = apply(f, d)
    stack = [()]
    seen = 0
    while stack:
        addr = stack.pop()
        rule = out.rule_at(addr)
        if isinstance(rule, ReadRule):
            assert rule.root != seq(ETA)
        seen += 1
        if len(addr) < 6:
            for tok in premise_tokens(rule, Probes((RepRule(),), 2)):
                stack.append(addr + (PremiseIndex(rule, tok),))
    assert seen >= 1


def test_lift_identity_is_noop_on_old_inputs():
    f = id_for(A, 1, 1)
    tplus = WithCuts(1, 1, 1, 1, 1)
    lifted = lift(f, tplus)
    d_old = input_tree(f, node(AxRule.of(A)))
    d_new = node(AxRule.of(A)).as_tree(tplus, ext(A, negate(A)))
    out_old = apply(f, d_old)
    out_new = apply(lifted, d_new)
    assert render(out_old, 5) == render(out_new, 5)


def test_lift_passes_foreign_rule_and_advances():
    f = id_for(A, 1, 1)
    tplus = WithCuts(1, 1, 1, 1, 2)
    lifted = lift(f, tplus)
    # input begins with a Cut (foreign to the read theory), then an Ax
    d_new = node(CutRule(A), node(TrueRule(A)), node(AxRule.of(A))).as_tree(
        tplus, ext(A))
    out = apply(lifted, d_new)
    assert out.rule_at(()) == CutRule(A)
    top = out.child((), "top")
    assert out.rule_at(top) == TrueRule(A)
    bot = out.child((), "bot")
    assert out.rule_at(bot) == AxRule.of(A)


def test_lift_conclusion_containment():
    f = id_for(ETA, 1, 1)
    tplus = WithCuts(1, 1, 1, 1, 1)
    lifted = lift(f, tplus)
    probes = Probes((RepRule(), AxRule.of(ETA), TrueRule(A), CutRule(A)), 2)
    es = conclusion_upto(lifted.body, (), 8, probes)
    for phi in es.formulas:
        assert phi in f.declared.formulas
    for t in es.tags:
        assert any(s.root == t.root and s.scope <= t.scope for s in f.declared.tags)


def test_lift_body_has_no_consecutive_reads():
    f = id_for(A, 1, 1)
    lifted = lift(f, WithCuts(1, 1, 1, 1, 1))
    probes = Probes((RepRule(), TrueRule(A), AxRule.of(A)), 2)
    assert check_no_consecutive_reads_upto(lifted.body, 6, probes).passed


def test_check_conservative():
    probes = Probes((RepRule(), AxRule.of(A), CutRule(A), TrueRule(A)), 2)
    # adding Rep only: fine for any scope
    v = check_conservative(Base(1, 1), NoRead(1, 1, 0), seq(A), Probes((RepRule(),), 2))
    assert v.passed
    # an extension adding an Ax whose conclusion meets the scope fails
    v2 = check_conservative(Base(1, 1), ca.PA2CutFree(), seq(ETA),
                            Probes((AxRule.of(ETA),), 2))
    assert not v2.passed
    assert "introduces" in str(v2.failures[0])
    # the cut-elimination extension adds Reads and cuts with empty conclusions
    v3 = check_conservative(WithCuts(1, 1, 1, 1, 1), NoRead(1, 1, 1),
                            seq(A), probes)
    assert v3.passed


def test_consecutive_read_guard():
    # a body with two immediate Reads on the same root diverges; apply raises
    spec = localfn.RootSpec(seq(A), BaseM(1, 1, 0, 0))
    read0 = ReadRule(spec.theory, seq(A), (), seq(A))

    def gen(addr):
        if not addr:
            return read0
        return ReadRule(spec.theory, seq(A), (addr[-1],), seq(A))

    body = ProofTree(localfn.fn_theory(Base(1, 1), (spec,)), ext(A), gen)
    f = localfn.LocalFunction((spec,), body, name="bad")
    d = input_tree(f, node(AxRule.of(A)))
    out = apply(f, d)
    with pytest.raises(ConsecutiveReadError):
        out.rule_at(())
