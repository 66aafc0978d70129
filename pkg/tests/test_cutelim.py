from __future__ import annotations

import pytest

from pmp import calculus as ca
from pmp import cutelim, library
from pmp.calculus import (
    AndRule,
    AxRule,
    CutOmegaFlatRule,
    CutRule,
    ExistsNumRule,
    ForallSetRule,
    NoRead,
    OmegaFlatRule,
    OmegaRule,
    OrRule,
    PremiseIndex,
    ReadRule,
    RepRule,
    TrueRule,
    WithCuts,
    ext,
    seq,
)
from pmp.cutelim import (
    elim_disj,
    elim_exists,
    elim_second_order,
    elim_set_literal,
    eliminate_all_cuts,
    inverse_conj,
    inverse_false_literal,
    inverse_forall,
    reduce,
)
from pmp.localfn import apply
from pmp.prooftree import (
    Probes,
    check_conclusion_upto,
    check_no_consecutive_reads_upto,
    check_rules_upto,
    conclusion_upto,
    node,
    render,
)
from pmp.syntax import (
    FVar,
    conj,
    disj,
    ex1,
    ex2,
    fa1,
    fa2,
    inst1,
    inst2,
    lit,
    negate,
    nlit,
    num,
    setlit,
    sv,
)

T = lit("=", 0, 0)     # true literal
F = lit("=", 0, 1)     # false literal


def in_tree(fn, root_index, nd, extra=()):
    spec = fn.roots[root_index]
    declared = ext(*(set(ca.conclusion(nd.rule).formulas) | set(extra)))
    return nd.as_tree(spec.theory, declared)


def cutfree(rule):
    return not isinstance(rule, CutRule)


# ---------------------------------------------------------------------------
# Inversions


def test_inverse_false_pass_through():
    inv = inverse_false_literal(F, 0, 0, 1)
    d = in_tree(inv, 0, node(RepRule(), node(AxRule.of(F))))
    out = apply(inv, d)
    assert out.rule_at(()) == RepRule()


def test_inverse_false_replaces_axiom():
    inv = inverse_false_literal(F, 0, 0, 1)
    d = in_tree(inv, 0, node(AxRule.of(F)))
    out = apply(inv, d)
    assert out.rule_at(()) == TrueRule(negate(F))
    es = conclusion_upto(out, (), 6)
    assert es.formulas <= (d.declared.formulas - seq(F))


def test_inverse_false_rejects_true_literal():
    with pytest.raises(cutelim.CutElimError):
        inverse_false_literal(T, 0, 0, 1)


def test_inverse_conj_advances_to_branch():
    inv = inverse_conj(T, F, "L", 0, 0, 1)
    d_node = node(AndRule(conj(T, F)), node(TrueRule(T)), node(AxRule.of(F)))
    d = in_tree(inv, 0, d_node)
    out = apply(inv, d)
    # the IAnd is consumed; the output continues in the left premise
    assert out.rule_at(()) == RepRule() or out.rule_at(()) == TrueRule(T)
    found = [out.rule_at(a) for a in _prefix_addrs(out, 4)]
    assert TrueRule(T) in found
    assert AndRule(conj(T, F)) not in found


def test_inverse_conj_passthrough_on_omega():
    phi = fa1("x", lit("=", FVar("x"), FVar("x")))
    inv = inverse_conj(T, F, "L", 0, 0, 1)
    d_node = node(OmegaRule(phi))  # children supplied lazily below
    spec = inv.roots[0]

    def gen(addr):
        if not addr:
            return OmegaRule(phi)
        return TrueRule(inst1(phi, addr[0].token))

    from pmp.prooftree import ProofTree
    d = ProofTree(spec.theory, ext(phi), gen)
    out = apply(inv, d)
    assert out.rule_at(()) == OmegaRule(phi)
    child = out.child((), 2)
    # the copied omega branch continues reading at the advanced position
    assert out.rule_at(child) == TrueRule(inst1(phi, 2))


def test_inverse_forall_takes_numbered_branch():
    phi = fa1("x", disj(lit("=", FVar("x"), FVar("x")), F))
    inv = inverse_forall(phi, 3, 0, 0, 1)
    spec = inv.roots[0]

    from pmp.prooftree import ProofTree

    def gen(addr):
        if not addr:
            return OmegaRule(phi)
        inner = inst1(phi, addr[0].token)
        if len(addr) == 1:
            return OrRule(inner, "L")
        return TrueRule(inner.left)

    d = ProofTree(spec.theory, ext(phi), gen)
    out = apply(inv, d)
    found = [out.rule_at(a) for a in _prefix_addrs(out, 4)]
    inner3 = inst1(phi, 3)
    assert OrRule(inner3, "L") in found
    assert check_conclusion_upto(
        out.with_conclusion(ext(inst1(phi, 3))), 6).passed


def _prefix_addrs(tree, fuel, probes=Probes((RepRule(),), 3)):
    from pmp.prooftree import premise_tokens

    out, stack = [], [()]
    while stack:
        addr = stack.pop()
        out.append(addr)
        rule = tree.rule_at(addr)
        if len(addr) >= fuel:
            continue
        for tok in premise_tokens(rule, probes):
            stack.append(addr + (PremiseIndex(rule, tok),))
    return out


# ---------------------------------------------------------------------------
# Eliminations


def test_elim_disj_dispatch():
    d_f = disj(F, T)
    elim = elim_disj(F, T, 0, 0, 1)
    d0 = in_tree(elim, 0, node(OrRule(d_f, "R"), node(TrueRule(T))))
    d1 = in_tree(elim, 1, node(AndRule(negate(d_f)),
                               node(AxRule.of(F)), node(AxRule.of(T))))
    out = apply(elim, [d0, d1])
    rules = [out.rule_at(a) for a in _prefix_addrs(out, 6)]
    assert CutRule(T) in rules  # cut over the witnessed side
    v = check_conclusion_upto(
        out.with_conclusion(ext(F, T, negate(T), negate(F))), 8)
    assert v.passed
    assert check_no_consecutive_reads_upto(out, 8).passed


def test_elim_disj_rep_roots():
    d_f = disj(F, T)
    elim = elim_disj(F, T, 0, 0, 1)
    d0 = in_tree(elim, 0, node(RepRule(), node(OrRule(d_f, "R"), node(TrueRule(T)))))
    d1 = in_tree(elim, 1, node(AndRule(negate(d_f)),
                               node(AxRule.of(F)), node(AxRule.of(T))))
    out = apply(elim, [d0, d1])
    assert out.rule_at(()) == RepRule()


def test_elim_exists_dispatch():
    phi = ex1("x", lit("=", FVar("x"), 1))
    elim = elim_exists(phi, 0, 0, 1)
    d0 = in_tree(elim, 0, node(ExistsNumRule(phi, num(1)),
                               node(TrueRule(lit("=", 1, 1)))))

    from pmp.prooftree import ProofTree

    def gen(addr):
        if not addr:
            return OmegaRule(negate(phi))
        return AxRule.of(lit("=", addr[0].token, 1))

    d1 = ProofTree(elim.roots[1].theory, ext(negate(phi)), gen)
    out = apply(elim, [d0, d1])
    rules = [out.rule_at(a) for a in _prefix_addrs(out, 6)]
    assert CutRule(lit("=", 1, 1)) in rules
    v = check_conclusion_upto(
        out.with_conclusion(ext(phi, negate(phi), lit("=", 1, 1), nlit("=", 1, 1))), 8)
    assert v.passed


def test_elim_set_literal_switches_sides():
    eta = setlit(sv("X", 0), 1)
    elim = elim_set_literal(eta, 0, 0, 1)
    d0 = in_tree(elim, 0, node(AxRule.of(eta)))
    d1 = in_tree(elim, 1, node(RepRule(), node(AxRule.of(eta))))
    out = apply(elim, [d0, d1])
    # X-side hits the axiom immediately; output copies the negative side
    assert out.rule_at(()) == RepRule()
    nxt = out.child((), "top")
    assert out.rule_at(nxt) == AxRule.of(eta)


def test_elim_set_literal_copies_x_side_without_axiom():
    eta = setlit(sv("X", 0), 1)
    elim = elim_set_literal(eta, 0, 0, 1)
    d0 = in_tree(elim, 0, node(TrueRule(T)))
    d1 = in_tree(elim, 1, node(AxRule.of(eta)))
    out = apply(elim, [d0, d1])
    assert out.rule_at(()) == TrueRule(T)


def test_elim_second_order_full_cycle():
    # inputs with flat-Omega premises contain Read rules, so the elimination
    # is lifted to the read-bearing theory first (as in the full pipeline)
    from pmp.localfn import lift
    from pmp.prooftree import ProofTree

    body = disj(setlit(sv("X"), 0), setlit(sv("X"), 0, positive=False))
    f_all = fa2("X", body)
    f_ex = negate(f_all)
    tplus = WithCuts(1, 1, 1, 1, 1)
    elim = lift(elim_second_order(f_all, 1, 1, 1), tplus)
    w = sv("W", 0)
    inst = inst2(f_all, w)
    d0 = node(ForallSetRule(f_all, w),
              node(OrRule(inst, "R"),
                   node(OrRule(inst, "L"),
                        node(AxRule.of(setlit(w, 0)))))).as_tree(
        tplus, ext(f_all, inst))
    u = sv("U", 0)
    idf = library.identity_fn(negate(inst2(f_ex, u)), 1, 1)
    flat = OmegaFlatRule(u, f_ex)

    def gen(addr):
        if not addr:
            return flat
        return idf.body.rule_at(addr[1:])

    d1 = ProofTree(tplus, ext(f_ex), gen)
    out = apply(elim, [d0, d1])
    rules = [out.rule_at(a) for a in _prefix_addrs(out, 5)]
    hits = [r for r in rules if isinstance(r, CutOmegaFlatRule)]
    assert hits and hits[0].eigvar == w
    assert check_no_consecutive_reads_upto(out, 6).passed


# ---------------------------------------------------------------------------
# Reduce and full elimination


def test_reduce_no_matching_cuts_copies():
    red = reduce(1, 0, 0)
    d = in_tree(red, 0, node(CutRule(T), node(TrueRule(T)), node(AxRule.of(T))),
                extra=[T])
    out = apply(red, d)
    rules = [out.rule_at(a) for a in _prefix_addrs(out, 5)]
    assert CutRule(T) in rules  # rank 0 cut survives reduce at rank 1


def test_reduce_literal_cut_true_side():
    red = reduce(0, 0, 0)
    d = in_tree(red, 0, node(CutRule(T), node(TrueRule(T)), node(AxRule.of(T))),
                extra=[T])
    out = apply(red, d)
    assert check_rules_upto(out, 8, cutfree, check_name="cut-free").passed
    assert check_conclusion_upto(out.with_conclusion(ext(T)), 8).passed


def test_reduce_disj_cut_dispatch():
    D = disj(F, T)
    red = reduce(1, 0, 0)
    top = node(OrRule(D, "R"), node(TrueRule(T)))
    bot = node(AndRule(negate(D)), node(AxRule.of(F)), node(AxRule.of(T)))
    d = in_tree(red, 0, node(CutRule(D), top, bot), extra=[F, T])
    out = apply(red, d)
    rules = [out.rule_at(a) for a in _prefix_addrs(out, 8)]
    assert CutRule(T) in rules  # replaced by a lower-rank cut
    assert not any(isinstance(r, CutRule) and r.formula == D for r in rules)
    assert check_no_consecutive_reads_upto(out, 8).passed


def test_eliminate_all_cuts_end_to_end():
    D = disj(F, T)
    thy = WithCuts(0, 0, 0, 0, 2)
    top = node(OrRule(D, "R"), node(TrueRule(T)))
    bot = node(AndRule(negate(D)), node(AxRule.of(F)), node(AxRule.of(T)))
    d = node(CutRule(D), top, bot).as_tree(thy, ext(F, T))
    out = eliminate_all_cuts(d)
    assert check_rules_upto(out, 10, cutfree, check_name="cut-free").passed
    assert check_conclusion_upto(out, 12).passed
    assert check_no_consecutive_reads_upto(out, 10).passed


def test_eliminate_all_cuts_r0_identity():
    thy = WithCuts(0, 0, 0, 0, 0)
    d = node(TrueRule(T)).as_tree(thy, ext(T))
    out = eliminate_all_cuts(d)
    assert render(out, 4) == render(d, 4)


def test_semantic_oracle_closed_sequents():
    # after each stage the declared conclusion of a closed quantifier-free
    # sequent holds under the literal evaluator
    from pmp.syntax import eval_closed

    D = disj(F, T)
    thy = WithCuts(0, 0, 0, 0, 2)
    top = node(OrRule(D, "R"), node(TrueRule(T)))
    bot = node(AndRule(negate(D)), node(AxRule.of(F)), node(AxRule.of(T)))
    d = node(CutRule(D), top, bot).as_tree(thy, ext(F, T))
    for stage in (d, eliminate_all_cuts(d)):
        assert any(eval_closed(f) for f in stage.declared.formulas)


def test_continuity_of_reduce():
    from pmp.prooftree import SpyTree, mutate_above

    D = disj(F, T)
    thy = WithCuts(0, 0, 0, 0, 2)
    top = node(OrRule(D, "R"), node(TrueRule(T)))
    bot = node(AndRule(negate(D)), node(AxRule.of(F)), node(AxRule.of(T)))
    d = node(CutRule(D), top, bot).as_tree(thy, ext(F, T))
    spy = SpyTree(d)
    out = eliminate_all_cuts(spy)
    first = render(out, 8)
    mutated = mutate_above(d, spy.requested)
    out2 = eliminate_all_cuts(mutated)
    assert render(out2, 8) == first
