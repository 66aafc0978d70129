from __future__ import annotations

import pytest

from pmp import calculus as ca
from pmp import library, localfn, syntax
from pmp.calculus import (
    AndRule,
    AxRule,
    CutRule,
    ExistsNumRule,
    ExistsSetFinRule,
    ForallNumRule,
    ForallSetRule,
    IndRule,
    OmegaFlatRule,
    OmegaRule,
    OrRule,
    PremiseIndex,
    ReadRule,
    RepRule,
    TrueRule,
    ext,
    seq,
)
from pmp.library import (
    check_finitary,
    embed,
    excluded_middle,
    finitary_gamma,
    identity_fn,
    substitution_fn,
)
from pmp.localfn import apply
from pmp.prooftree import (
    Probes,
    check_conclusion_upto,
    check_no_consecutive_reads_upto,
    check_valid_upto,
    conclusion_upto,
    node,
    render,
)
from pmp.syntax import (
    FVar,
    SetAbstract,
    conj,
    disj,
    ex1,
    ex2,
    fa1,
    fa2,
    inst2,
    inst2_abs,
    lit,
    negate,
    nlit,
    num,
    setlit,
    sv,
)

A = lit("=", 0, 0)


# ---------------------------------------------------------------------------
# identity_fn


def test_identity_body_shape():
    phi = setlit(sv("X", 0), 0)
    f = identity_fn(phi, 1, 1)
    root_rule = f.body.rule_at(())
    assert isinstance(root_rule, ReadRule)
    assert root_rule.position == ()
    assert root_rule.root == seq(phi)
    # child at a branch is the branch rule itself; grandchild reads deeper
    br = AxRule.of(phi)
    a1 = (PremiseIndex(root_rule, br),)
    assert f.body.rule_at(a1) == br


def test_identity_read_advances_position():
    phi = A
    f = identity_fn(phi, 1, 1)
    root_rule = f.body.rule_at(())
    br = RepRule()
    a1 = (PremiseIndex(root_rule, br),)
    a2 = a1 + (PremiseIndex(br, "top"),)
    deeper = f.body.rule_at(a2)
    assert isinstance(deeper, ReadRule)
    assert deeper.position == (PremiseIndex(br, "top"),)


def test_identity_apply_reproduces_input_modulo_reads():
    phi = A
    f = identity_fn(phi, 1, 1)
    d = node(OrRule(disj(A, A), "L"), node(TrueRule(A))).as_tree(
        f.roots[0].theory, ext(disj(A, A), A))
    out = apply(f, d)
    assert out.rule_at(()) == OrRule(disj(A, A), "L")
    child = out.child((), "top")
    assert out.rule_at(child) == TrueRule(A)
    # depth-8 prefix conclusion check
    assert check_conclusion_upto(out, 8).passed


# ---------------------------------------------------------------------------
# excluded_middle


def test_em_literal_is_single_axiom():
    d = excluded_middle(A)
    assert d.rule_at(()) == AxRule.of(A)
    assert conclusion_upto(d, (), 3).formulas == seq(A, negate(A))


def test_em_forall2_shape():
    phi = fa2("X", setlit(sv("X"), 0))
    d = excluded_middle(phi)
    root = d.rule_at(())
    assert isinstance(root, ForallSetRule)
    child = d.rule_at(d.child((), "top"))
    assert isinstance(child, OmegaFlatRule)
    grand = d.rule_at(d.child(d.child((), "top"), "bot"))
    assert isinstance(grand, ReadRule)


def test_em_conclusion_and_validity():
    cases = [
        A,
        conj(A, nlit("<", 0, 1)),
        disj(conj(A, A), nlit("=", 0, 1)),
        fa1("x", lit("=", FVar("x"), FVar("x"))),
        ex1("x", lit("=", FVar("x"), 1)),
        fa2("X", disj(setlit(sv("X"), 0), A)),
        ex2("X", setlit(sv("X"), 2)),
    ]
    probes = Probes((RepRule(), TrueRule(A), AxRule.of(A)), 2)
    for phi in cases:
        d = excluded_middle(phi)
        v = check_conclusion_upto(d, 8, probes)
        assert v.passed, f"{syntax.render(phi)}: {v.describe()}"
        assert check_valid_upto(d, 6, probes).passed
        assert check_no_consecutive_reads_upto(d, 8, probes).passed


def test_em_requires_closed():
    with pytest.raises(library.LibraryError):
        excluded_middle(lit("=", FVar("x"), 0))


def test_em_forall_over_numbers():
    phi = fa1("x", lit("=", FVar("x"), FVar("x")))
    d = excluded_middle(phi)
    assert isinstance(d.rule_at(()), OmegaRule)
    b2 = d.child((), 2)
    assert isinstance(d.rule_at(b2), ExistsNumRule)
    assert check_conclusion_upto(d, 10, Probes((), 4)).passed


# ---------------------------------------------------------------------------
# substitution_fn


@pytest.fixture
def subst_setup():
    y = sv("Y", 0)
    root = disj(setlit(y, 0), nlit("<", 0, 1))
    psi = SetAbstract("h", lit("=", FVar("h"), 0))
    return y, root, psi, substitution_fn(root, y, psi, 1, 1)


def test_subst_rewrites_touching_rules(subst_setup):
    y, root, psi, F = subst_setup
    r0 = F.body.rule_at(())
    out = F.body.rule_at((PremiseIndex(r0, OrRule(root, "L")),))
    assert out == OrRule(disj(lit("=", 0, 0), nlit("<", 0, 1)), "L")


def test_subst_passes_untouching_rules(subst_setup):
    _, _, _, F = subst_setup
    r0 = F.body.rule_at(())
    other = AndRule(conj(A, A))
    out = F.body.rule_at((PremiseIndex(r0, other),))
    assert out == other
    # and the next node reads at the advanced position with the same scope
    deeper = F.body.rule_at((PremiseIndex(r0, other), PremiseIndex(other, "L")))
    assert isinstance(deeper, ReadRule)
    assert deeper.scope == r0.scope


def test_subst_replaces_axioms_on_the_variable(subst_setup):
    y, root, psi, F = subst_setup
    r0 = F.body.rule_at(())
    ax = AxRule.of(setlit(y, 0))
    out = F.body.rule_at((PremiseIndex(r0, ax),))
    # d_{psi(0)} for the literal psi(0) = (0=0) is a single axiom node
    assert out == AxRule.of(lit("=", 0, 0))


def test_subst_omega_flat_retarget_records_association():
    # root formula contains a nested quantifier entangled with Y
    y = sv("Y", 0)
    inner = ex2("Z", conj(setlit(sv("Z"), 0), setlit(y, 0)))
    root = disj(setlit(y, 0), inner)
    psi = SetAbstract("h", lit("=", FVar("h"), 0))
    F = substitution_fn(root, y, psi, 2, 2)
    r0 = F.body.rule_at(())
    # descend through the disjunction so its right half enters the scope
    ior = OrRule(root, "R")
    a1 = (PremiseIndex(r0, ior),)
    emitted_or = F.body.rule_at(a1)
    assert emitted_or == OrRule(
        disj(lit("=", 0, 0), ex2("Z", conj(setlit(sv("Z"), 0), lit("=", 0, 0)))), "R")
    a1top = F.body.child(a1, "top")
    read1 = F.body.rule_at(a1top)
    assert isinstance(read1, ReadRule) and inner in read1.scope
    flat = OmegaFlatRule(sv("W", 1), inner)
    assert ca.theory_contains(read1.theory, flat)
    a2 = F.body.child(a1top, flat)
    out = F.body.rule_at(a2)
    assert isinstance(out, OmegaFlatRule)
    # substitution changed the inner formula; the level dropped with it
    inner_sub = ex2("Z", conj(setlit(sv("Z"), 0), lit("=", 0, 0)))
    assert out.formula == inner_sub
    assert out.var.level == 0
    # afterwards a Read on the rewritten tag is re-targeted to the new theory
    a3 = F.body.child(a2, "bot")
    after = F.body.rule_at(a3)
    assert isinstance(after, ReadRule)
    inner_read_root = seq(negate(inst2(inner, sv("W", 1))))
    inner_read = ReadRule(ca.BaseM(2, 2, 0, 1), inner_read_root, (), inner_read_root)
    reroot = F.body.rule_at(F.body.child(a3, inner_read))
    assert isinstance(reroot, ReadRule)
    assert reroot.root == seq(negate(inst2(inner_sub, sv("W", 0))))
    assert reroot.theory == ca.BaseM(2, 2, 0, 0)


def test_subst_declared_conclusion(subst_setup):
    y, root, psi, F = subst_setup
    goal = disj(lit("=", 0, 0), nlit("<", 0, 1))
    assert goal in F.declared.formulas
    assert any(t.root == seq(root) for t in F.declared.tags)


def test_subst_containment_on_apply(subst_setup):
    y, root, psi, F = subst_setup
    d = node(OrRule(root, "R"), node(AxRule.of(lit("<", 0, 1)))).as_tree(
        F.roots[0].theory, ext(root, lit("<", 0, 1)))
    out = apply(F, d)
    es = conclusion_upto(out, (), 8)
    allowed = (d.declared.formulas - seq(root)) | F.declared.formulas
    assert es.formulas <= allowed


# ---------------------------------------------------------------------------
# finitary checking and embedding


def or_true_proof(inner):
    return node(OrRule(inner, "L"), node(TrueRule(A)))


def test_check_finitary_valid():
    phi = fa1("x", disj(A, nlit("=", FVar("x"), 0)))
    prf = node(ForallNumRule(phi, "x"), or_true_proof(disj(A, nlit("=", FVar("x"), 0))))
    assert check_finitary(prf, seq(phi)).passed


def test_check_finitary_rejects_eigen_leak():
    phi = fa1("x", lit("=", FVar("x"), FVar("x")))
    prf = node(ForallNumRule(phi, "x"), node(AxRule.of(lit("=", FVar("x"), FVar("x")))))
    v = check_finitary(prf, seq(phi, nlit("=", FVar("x"), FVar("x"))))
    assert not v.passed
    assert any("eigenvariable" in str(f) for f in v.failures)


def test_check_finitary_rejects_bad_children():
    prf = node(CutRule(A), node(TrueRule(A)))  # missing bot premise
    v = check_finitary(prf, seq(A))
    assert not v.passed


def test_embed_true_single_node():
    prf = node(TrueRule(A))
    out = embed(prf)
    assert out.rule_at(()) == TrueRule(A)


def test_embed_forall_becomes_omega():
    inner = disj(A, nlit("=", FVar("x"), 0))
    phi = fa1("x", inner)
    prf = node(ForallNumRule(phi, "x"), or_true_proof(inner))
    out = embed(prf)
    root = out.rule_at(())
    assert isinstance(root, OmegaRule)
    b5 = out.child((), 5)
    assert out.rule_at(b5) == OrRule(disj(A, nlit("=", num(5), 0)), "L")
    assert check_conclusion_upto(out, 10, Probes((), 3)).passed
    assert check_valid_upto(out, 6, Probes((), 3)).passed


def test_embed_requires_covered_variables():
    prf = node(AxRule.of(lit("=", FVar("y"), 0)))
    with pytest.raises(library.LibraryError):
        embed(prf)
    out = embed(prf, nums={"y": 2})
    assert out.rule_at(()) == AxRule.of(lit("=", num(2), 0))


def test_embed_ind_staircase_n3():
    body = lit("<=", num(0), FVar("x"))
    prf = node(IndRule("x", body, num(3)), node(TrueRule(A)))
    out = embed(prf)
    # three staircase layers: IExists over IAnd, then the base axiom
    addr = ()
    for expect_k in (2, 1, 0):
        rule = out.rule_at(addr)
        assert isinstance(rule, ExistsNumRule)
        assert rule.witness == num(expect_k)
        addr = out.child(addr, "top")
        rule = out.rule_at(addr)
        assert isinstance(rule, AndRule)
        addr = out.child(addr, "L")
    assert out.rule_at(addr) == AxRule.of(lit("<=", 0, 0))
    assert check_conclusion_upto(out, 12, Probes((), 2)).passed
    assert check_valid_upto(out, 8, Probes((), 2)).passed


def test_embed_exists2_shape_and_checks():
    phi = ex2("X", disj(setlit(sv("X"), 0), setlit(sv("X"), 0, positive=False)))
    psi = SetAbstract("h", lit("=", FVar("h"), 0))
    prem = inst2_abs(phi, psi)
    prf = node(ExistsSetFinRule(phi, psi), or_true_proof(prem))
    assert check_finitary(prf, seq(phi)).passed
    out = embed(prf)
    assert isinstance(out.rule_at(()), CutRule)
    bot = out.child((), "bot")
    assert isinstance(out.rule_at(bot), OmegaFlatRule)
    inner = out.child(bot, "bot")
    assert isinstance(out.rule_at(inner), ReadRule)
    probes = Probes((RepRule(), TrueRule(A)), 2)
    assert check_conclusion_upto(out, 10, probes).passed
    assert check_valid_upto(out, 6, probes).passed
    assert check_no_consecutive_reads_upto(out, 10, probes).passed


def test_embed_forall2():
    phi = fa2("X", disj(setlit(sv("X"), 0), setlit(sv("X"), 0, positive=False)))
    inner = inst2(phi, sv("Y"))
    prf = node(ForallSetRule(phi, sv("Y")),
               node(OrRule(inner, "R"),
                    node(OrRule(inst2(phi, sv("Y")), "L") if False else
                         AxRule.of(setlit(sv("Y"), 0)))))
    # premise proves Y0 or ~Y0 via IOr^R over IOr^L over Ax: build cleanly
    prf = node(ForallSetRule(phi, sv("Y")),
               node(OrRule(inner, "R"),
                    node(AxRule.of(setlit(sv("Y"), 0)))))
    # the Ax leaks Y0 beside ~Y0; pick the double-or form instead
    d_or = node(OrRule(inner, "R"), node(AxRule.of(setlit(sv("Y"), 0))))
    gamma = finitary_gamma(d_or)
    assert setlit(sv("Y"), 0) in gamma  # leak confirmed
    em_node = node(OrRule(inner, "R"),
                   node(OrRule(inner, "L") if False else AxRule.of(setlit(sv("Y"), 0))))
    # valid version: IOr^L then IOr^R stacked removes both halves
    stacked = node(OrRule(inner, "R"),
                   node(OrRule(inner, "L"),
                        node(AxRule.of(setlit(sv("Y"), 0)))))
    # stacking IOr^R over IOr^L leaves gamma = {inner}; wrap with forall2
    prf = node(ForallSetRule(phi, sv("Y")), stacked)
    assert check_finitary(prf, seq(phi)).passed
    out = embed(prf)
    root = out.rule_at(())
    assert isinstance(root, ForallSetRule)
    assert root.witness.level == 0
    assert check_conclusion_upto(out, 8).passed
    assert check_valid_upto(out, 6).passed


def test_embed_nested_exists2_over_forall():
    # exists2 X forall x (Xx or ~Xx) with psi = (h. h=h)
    body = disj(setlit(sv("X"), FVar("x")), setlit(sv("X"), FVar("x"), positive=False))
    phi = ex2("X", fa1("x", body))
    psi = SetAbstract("h", lit("=", FVar("h"), FVar("h")))
    prem = inst2_abs(phi, psi)  # forall x (x=x or ~(x=x))
    inner = disj(lit("=", FVar("y"), FVar("y")), nlit("=", FVar("y"), FVar("y")))
    prem_proof = node(ForallNumRule(prem, "y"),
                      node(OrRule(inner, "R"),
                           node(OrRule(inner, "L"),
                                node(AxRule.of(lit("=", FVar("y"), FVar("y")))))))
    prf = node(ExistsSetFinRule(phi, psi), prem_proof)
    assert check_finitary(prf, seq(phi)).passed
    out = embed(prf)
    probes = Probes((RepRule(), TrueRule(A)), 2)
    assert check_conclusion_upto(out, 10, probes).passed
    assert check_valid_upto(out, 6, probes).passed
