from __future__ import annotations

import pytest

from pmp import calculus as ca
from pmp import syntax as sx
from pmp.calculus import (
    AndRule,
    AxRule,
    Base,
    BaseM,
    CutOmegaFlatRule,
    CutRule,
    CutTheory,
    ExistsNumRule,
    ForallSetRule,
    Full,
    IndRule,
    NoRead,
    OmegaFlatRule,
    OmegaRule,
    OrRule,
    PA2,
    PA2CutFree,
    PremiseIndex,
    ReadRule,
    ReadTheory,
    RepRule,
    Tag,
    TrueRule,
    WithCuts,
    conclusion,
    eigenvariables,
    ext,
    gamma_back,
    premise_sequent,
    remove_tag,
    rule_premises,
    rule_sequents,
    seq,
    theory_contains,
)
from pmp.syntax import (
    FVar,
    conj,
    disj,
    ex1,
    ex2,
    fa1,
    fa2,
    inst2,
    lit,
    negate,
    nlit,
    num,
    setlit,
    subst_num,
    sv,
)

A = lit("=", 0, 0)
B = lit("<=", 0, 0)


def test_cut_premises_labels():
    spec = rule_premises(CutRule(A))
    assert spec.kind == "finite" and spec.tokens == ("top", "bot")


def test_omega_premises_all_naturals():
    spec = rule_premises(OmegaRule(fa1("x", lit("=", FVar("x"), FVar("x")))))
    assert spec.kind == "naturals"


def test_read_premises_all_rules_of_theory():
    th = BaseM(1, 1, 0, 0)
    read = ReadRule(th, seq(A), (), seq(A))
    spec = rule_premises(read)
    assert spec.kind == "rules-of" and spec.theory == th


def test_ind_sequents():
    phi = lit("<=", num(0), FVar("x"))
    rule = IndRule("x", phi, num(2))
    concl, prem, eig = rule_sequents(rule)
    want = {
        negate(lit("<=", 0, 0)),
        ex1("x", conj(phi, negate(lit("<=", num(0), sx.Succ(FVar("x")))))),
        lit("<=", num(0), num(2)),
    }
    assert concl.formulas == frozenset(want)
    assert prem("top").formulas == frozenset()
    assert eig("top") == frozenset()


def test_omega_flat_sequents():
    phi = ex2("X", setlit(sv("X"), 0))
    rule = OmegaFlatRule(sv("Y", 0), phi)
    concl, prem, _ = rule_sequents(rule)
    assert concl == ext(phi)
    tagged = prem("bot")
    assert tagged.formulas == frozenset()
    root = seq(negate(inst2(phi, sv("Y", 0))))
    assert tagged.tags == frozenset({Tag(root, (), root)})


def test_cut_omega_flat_eigenvariables():
    phi = ex2("X", setlit(sv("X"), 0))
    rule = CutOmegaFlatRule(sv("Z", 0), sv("Y", 0), phi)
    concl, prem, eig = rule_sequents(rule)
    assert concl.is_empty()
    assert prem("top").formulas == seq(negate(inst2(phi, sv("Z", 0))))
    assert eig("top") == frozenset({sv("Z", 0)})
    assert eig("bot") == frozenset()


def test_rep_sequents():
    concl, prem, _ = rule_sequents(RepRule())
    assert concl.is_empty()
    assert prem("top").formulas == frozenset()


def test_true_requires_truth():
    with pytest.raises(ca.CalculusError):
        rule_sequents(TrueRule(lit("=", 0, 1)))
    rule_sequents(TrueRule(lit("=", 0, 0)))


def test_theory_cut_rank_bound():
    f = disj(A, B)  # rank 1
    g = fa1("x", ex1("y", lit("<", FVar("x"), FVar("y"))))  # rank 2
    th = WithCuts(1, 1, 1, 1, 3)
    assert theory_contains(th, CutRule(f))
    assert theory_contains(th, CutRule(g))
    assert not theory_contains(WithCuts(1, 1, 1, 1, 1), CutRule(f))


def test_theory_no_read_excludes_reads():
    th = NoRead(1, 1, 2)
    read = ReadRule(BaseM(1, 1, 0, 0), seq(A), (), seq(A))
    assert not theory_contains(th, read)
    assert theory_contains(th, RepRule())
    assert theory_contains(th, CutRule(A))


def test_omega_flat_membership_in_base_minus():
    # comp (0,0) rule is a member of the '-' theory at (0,0): base rules are
    # not constrained by the grid position, only by their own side conditions.
    phi = ex2("X", setlit(sv("X"), 0))
    rule = OmegaFlatRule(sv("Y", 0), phi)
    assert theory_contains(BaseM(1, 1, 0, 0), rule)
    assert theory_contains(Base(1, 1), rule)
    # wrong variable level fails the side condition
    assert not theory_contains(Base(1, 1), OmegaFlatRule(sv("Y", 1), phi))


def test_read_membership_grading():
    # Read over the (0,0) '-' theory: allowed in BaseM at higher depth,
    # allowed in Full when level is higher, not in Full at same position.
    phi = ex2("X", setlit(sv("X"), 0))
    root = seq(negate(inst2(phi, sv("Y", 0))))
    read = ReadRule(BaseM(2, 1, 0, 0), root, (), root)
    assert theory_contains(ReadTheory(2, 1, 0, 0), read)
    assert theory_contains(BaseM(2, 1, 1, 0), read)
    assert not theory_contains(BaseM(2, 1, 0, 0), read)
    assert not theory_contains(Full(2, 1, 0, 0), read)
    assert theory_contains(Full(2, 1, 0, 1), read)


def test_cut_omega_membership():
    phi = ex2("X", setlit(sv("X"), 0))  # comp (0,0)
    rule = CutOmegaFlatRule(sv("Z", 0), sv("Y", 0), phi)
    assert theory_contains(CutTheory(0, 0), rule)
    assert not theory_contains(BaseM(1, 1, 0, 0), rule)
    assert theory_contains(BaseM(1, 1, 1, 0), rule)
    assert theory_contains(Full(1, 1, 0, 1), rule)


def test_pa2_membership():
    assert theory_contains(PA2(), CutRule(A))
    assert not theory_contains(PA2CutFree(), CutRule(A))
    assert theory_contains(PA2(), IndRule("x", lit("=", FVar("x"), FVar("x")), num(1)))
    assert not theory_contains(PA2(), RepRule())
    # leveled variables are not part of the finitary language
    assert not theory_contains(PA2(), AxRule.of(setlit(sv("X", 0), 0)))
    assert theory_contains(PA2(), AxRule.of(setlit(sv("X"), 0)))
    # finitary forall2 uses an unleveled witness
    f = fa2("X", setlit(sv("X"), 0))
    assert theory_contains(PA2(), ForallSetRule(f, sv("Y")))
    assert not theory_contains(Base(1, 1), ForallSetRule(f, sv("Y")))


def test_infinitary_forall2_witness_level():
    f = fa2("X", setlit(sv("X"), 0))
    assert theory_contains(Base(1, 1), ForallSetRule(f, sv("Y", 0)))
    assert not theory_contains(Base(1, 1), ForallSetRule(f, sv("Y", 1)))
    # completed parameter: witness level is lvl(body)+1
    g = fa2("X", lit("=", 0, 0))
    assert theory_contains(Base(1, 1), ForallSetRule(g, sv("Y", 1)))
    assert not theory_contains(Base(1, 1), ForallSetRule(g, sv("Y", 0)))


def test_infinitary_closure_conditions():
    # free first-order variables are not allowed in infinitary rules
    assert not theory_contains(Base(1, 1), AxRule.of(lit("=", FVar("x"), 0)))
    assert not theory_contains(Base(1, 1), ExistsNumRule(ex1("x", lit("=", FVar("x"), FVar("y"))), num(0)))
    assert theory_contains(Base(1, 1), ExistsNumRule(ex1("x", lit("=", FVar("x"), 0)), num(0)))


def test_remove_tag_subsumption():
    phi, psi = A, B
    t_full = Tag(seq(phi), (), seq(phi, psi))
    es = ext(tags=[t_full])
    got = remove_tag(es, Tag(seq(phi), (), seq(phi)))
    assert got.tags == frozenset()


def test_remove_tag_different_position_unchanged():
    phi = A
    i = PremiseIndex(RepRule(), "top")
    es = ext(tags=[Tag(seq(phi), (i,), seq(phi))])
    got = remove_tag(es, Tag(seq(phi), (), seq(phi)))
    assert got == es


def test_remove_tag_scope_not_superset_unchanged():
    phi, psi, chi = A, B, lit("<", 0, 1)
    es = ext(tags=[Tag(seq(phi), (), seq(phi, psi))])
    got = remove_tag(es, Tag(seq(phi), (), seq(phi, chi)))
    assert got == es


def test_gamma_back_empty():
    assert gamma_back(()).formulas == frozenset()


def test_gamma_back_cut_top():
    cut = CutRule(A)
    got = gamma_back((PremiseIndex(cut, "top"),))
    assert got.formulas == seq(A)


def test_gamma_back_and_left():
    f = conj(A, B)
    rule = AndRule(f)
    got = gamma_back((PremiseIndex(rule, "L"),))
    assert got.formulas == seq(A)


def test_gamma_back_removes_conclusions():
    f = conj(A, B)
    rule = AndRule(f)
    cut = CutRule(f)
    sigma = (PremiseIndex(cut, "top"), PremiseIndex(rule, "L"))
    got = gamma_back(sigma)
    # f entered at the cut premise, removed again at the IAnd conclusion
    assert got.formulas == seq(A)


def test_gamma_back_malformed():
    cut = CutRule(A)
    with pytest.raises(ca.CalculusError):
        gamma_back((PremiseIndex(cut, "L"),))


def test_rule_roundtrip():
    rules = [
        TrueRule(A),
        AxRule.of(nlit("=", 0, 0)),
        AndRule(conj(A, B)),
        OrRule(disj(A, B), "L"),
        CutRule(A),
        RepRule(),
        OmegaRule(fa1("x", lit("=", FVar("x"), FVar("x")))),
        OmegaFlatRule(sv("Y", 0), ex2("X", setlit(sv("X"), 0))),
        ReadRule(BaseM(1, 1, 0, 0), seq(A), (), seq(A, B)),
    ]
    for r in rules:
        assert ca.parse_rule(ca.render_rule(r)) == r


def test_ax_canonicalizes_polarity():
    assert AxRule.of(nlit("=", 0, 0)) == AxRule.of(lit("=", 0, 0))


def test_premise_labels_carry_rule_identity():
    r1, r2 = CutRule(A), CutRule(B)
    assert PremiseIndex(r1, "top") != PremiseIndex(r2, "top")


def test_read_conclusion_uses_position_delta():
    cut = CutRule(A)
    pos = (PremiseIndex(cut, "top"),)
    th = BaseM(1, 1, 0, 0)
    read = ReadRule(th, frozenset(), pos, frozenset())
    assert conclusion(read).formulas == seq(A)
    scoped = ReadRule(th, frozenset(), pos, seq(A))
    assert conclusion(scoped).formulas == frozenset()


def test_read_premise_family_matches_advanced_tags():
    th = BaseM(1, 1, 0, 0)
    read = ReadRule(th, seq(A), (), seq(A))
    om = OmegaRule(fa1("x", lit("=", FVar("x"), FVar("x"))))
    prem = premise_sequent(read, om)
    t = Tag(seq(A), (PremiseIndex(om, 5),), seq(A))
    assert prem.removes_tag(t)
    t_other = Tag(seq(B), (PremiseIndex(om, 5),), seq(B))
    assert not prem.removes_tag(t_other)
