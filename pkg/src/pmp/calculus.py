"""Inference rules, tags, extended sequents and the theory tower.

A rule descriptor is a finitely-encoded identity of one rule instance; its
premise labels, conclusion, premise sequents and eigenvariables are all
computed from the descriptor. Premise labels are (rule, token) pairs, so a
label determines its rule and labels of distinct descriptors never collide.

Theories are membership predicates over descriptors; they are never
enumerated on core paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import sexpr
from .syntax import (
    Complexity,
    Formula,
    SetAbstract,
    SecondOrderVar,
    Term,
    comp,
    eval_literal,
    free_vars,
    inst1,
    inst2,
    inst2_abs,
    is_literal,
    negate,
    num,
    parse_abstract,
    parse_formula,
    parse_so_var,
    parse_term,
    render_abstract,
    render_sexpr,
    render_term,
    subst_num,
    term_value,
    term_vars,
    witness_level,
    bound_var_occurs,
)
from . import syntax


class CalculusError(ValueError):
    pass


Sequent = frozenset  # of Formula


def seq(*formulas: Formula) -> Sequent:
    return frozenset(formulas)


# ---------------------------------------------------------------------------
# Tags and extended sequents.


@dataclass(frozen=True)
class Tag:
    """(root, position, scope): the tree consumes an input proving `root`
    and has read it up to `position`; `scope` is removed from what it reads."""

    root: Sequent
    position: tuple  # of PremiseIndex
    scope: Sequent

    def __post_init__(self):
        if not self.root <= self.scope:
            raise CalculusError("tag root must be contained in its scope")

    def advanced(self, idx: "PremiseIndex") -> "Tag":
        return Tag(self.root, self.position + (idx,), self.scope)

    def subsumes(self, other: "Tag") -> bool:
        """True when removing self also removes `other` (same root and
        position, scope contained in other's)."""
        return (self.root == other.root and self.position == other.position
                and self.scope <= other.scope)


@dataclass(frozen=True)
class ExtendedSequent:
    formulas: Sequent = frozenset()
    tags: frozenset = frozenset()  # of Tag

    def contains_formula(self, phi: Formula) -> bool:
        return phi in self.formulas

    def contains_tag(self, t: Tag) -> bool:
        return any(s.subsumes(t) for s in self.tags)

    def union(self, other: "ExtendedSequent") -> "ExtendedSequent":
        return ExtendedSequent(self.formulas | other.formulas, self.tags | other.tags)

    def minus_formulas(self, formulas: Sequent) -> "ExtendedSequent":
        return ExtendedSequent(self.formulas - formulas, self.tags)

    def is_empty(self) -> bool:
        return not self.formulas and not self.tags


EMPTY = ExtendedSequent()


def ext(*formulas: Formula, tags: Iterable[Tag] = ()) -> ExtendedSequent:
    return ExtendedSequent(frozenset(formulas), frozenset(tags))


def remove_tag(es: ExtendedSequent, t: Tag) -> ExtendedSequent:
    """Remove every tag with the same root and position whose scope contains
    t's scope."""
    return ExtendedSequent(es.formulas, frozenset(s for s in es.tags if not t.subsumes(s)))


# ---------------------------------------------------------------------------
# Theory identifiers (membership decided in theory_contains below).


@dataclass(frozen=True)
class TheoryId:
    pass


@dataclass(frozen=True)
class PA2(TheoryId):
    pass


@dataclass(frozen=True)
class PA2CutFree(TheoryId):
    pass


@dataclass(frozen=True)
class Base(TheoryId):
    n: int
    l: int


@dataclass(frozen=True)
class BaseM(TheoryId):
    """The '-' theory at grid position (m,l): base rules, lower cut-omega
    rules, and Read rules for strictly lower depth at any level."""

    n: int
    l: int
    m: int
    lv: int


@dataclass(frozen=True)
class Full(TheoryId):
    n: int
    l: int
    m: int
    lv: int


@dataclass(frozen=True)
class WithCuts(TheoryId):
    n: int
    l: int
    m: int
    lv: int
    r: int


@dataclass(frozen=True)
class NoRead(TheoryId):
    n: int
    l: int
    r: int


@dataclass(frozen=True)
class CutTheory(TheoryId):
    m: int
    lv: int


@dataclass(frozen=True)
class ReadTheory(TheoryId):
    n: int
    l: int
    m: int
    lv: int


@dataclass(frozen=True)
class FnTheory(TheoryId):
    """base theory plus Read rules on the given (root sequent, input theory)
    pairs; the body theory of a locally defined function."""

    base: TheoryId
    roots: tuple  # of (Sequent, TheoryId)


# ---------------------------------------------------------------------------
# Rule descriptors.


@dataclass(frozen=True)
class Rule:
    pass


@dataclass(frozen=True)
class PremiseIndex:
    """One premise label: the owning rule plus a local token."""

    rule: Rule
    token: object  # "top" | "bot" | "L" | "R" | int | Rule

    def __repr__(self):
        return f"Idx({render_token(self.token)})"


Address = tuple  # of PremiseIndex
EMPTY_ADDR: Address = ()


@dataclass(frozen=True)
class TrueRule(Rule):
    literal: Formula


@dataclass(frozen=True)
class AxRule(Rule):
    literal: Formula  # stored with positive polarity

    @staticmethod
    def of(literal: Formula) -> "AxRule":
        if isinstance(literal, syntax.PrimLit) and not literal.positive:
            literal = negate(literal)
        if isinstance(literal, syntax.SetLit) and not literal.positive:
            literal = negate(literal)
        return AxRule(literal)


@dataclass(frozen=True)
class AndRule(Rule):
    formula: Formula  # the conjunction


@dataclass(frozen=True)
class OrRule(Rule):
    formula: Formula  # the disjunction
    branch: str  # "L" | "R"


@dataclass(frozen=True)
class ForallNumRule(Rule):
    """Finitary first-order universal introduction with variable witness."""

    formula: Formula
    witness: str


@dataclass(frozen=True)
class ExistsNumRule(Rule):
    formula: Formula
    witness: Term


@dataclass(frozen=True)
class ForallSetRule(Rule):
    formula: Formula
    witness: SecondOrderVar


@dataclass(frozen=True)
class ExistsSetFinRule(Rule):
    """Finitary second-order existential introduction at a set abstract."""

    formula: Formula
    witness: SetAbstract


@dataclass(frozen=True)
class IndRule(Rule):
    hole: str
    body: Formula  # formula with `hole` free
    term: Term


@dataclass(frozen=True)
class CutRule(Rule):
    formula: Formula


@dataclass(frozen=True)
class RepRule(Rule):
    pass


@dataclass(frozen=True)
class OmegaRule(Rule):
    formula: Formula  # the universal formula


@dataclass(frozen=True)
class OmegaFlatRule(Rule):
    var: SecondOrderVar
    formula: Formula  # existential second-order formula


@dataclass(frozen=True)
class CutOmegaFlatRule(Rule):
    eigvar: SecondOrderVar
    var: SecondOrderVar
    formula: Formula


@dataclass(frozen=True)
class ReadRule(Rule):
    theory: TheoryId
    root: Sequent
    position: Address
    scope: Sequent

    def tag(self) -> Tag:
        return Tag(self.root, self.position, self.scope)


REP = RepRule()

TOP = "top"
BOT = "bot"


# ---------------------------------------------------------------------------
# Premise enumeration.


@dataclass(frozen=True)
class PremiseSpec:
    """Premise index specification: a finite token list, all naturals, or
    all rules of a theory."""

    kind: str  # "finite" | "naturals" | "rules-of"
    tokens: tuple = ()
    theory: Optional[TheoryId] = None


def rule_premises(rule: Rule) -> PremiseSpec:
    if isinstance(rule, (TrueRule, AxRule)):
        return PremiseSpec("finite", ())
    if isinstance(rule, AndRule):
        return PremiseSpec("finite", ("L", "R"))
    if isinstance(rule, (CutRule, CutOmegaFlatRule)):
        return PremiseSpec("finite", (TOP, BOT))
    if isinstance(rule, OmegaFlatRule):
        return PremiseSpec("finite", (BOT,))
    if isinstance(rule, OmegaRule):
        return PremiseSpec("naturals")
    if isinstance(rule, ReadRule):
        return PremiseSpec("rules-of", theory=rule.theory)
    if isinstance(rule, (OrRule, ForallNumRule, ExistsNumRule, ForallSetRule,
                         ExistsSetFinRule, IndRule, RepRule)):
        return PremiseSpec("finite", (TOP,))
    raise CalculusError(f"unknown rule {rule!r}")


def idx(rule: Rule, token) -> PremiseIndex:
    return PremiseIndex(rule, token)


def valid_token(rule: Rule, token) -> bool:
    spec = rule_premises(rule)
    if spec.kind == "finite":
        return token in spec.tokens
    if spec.kind == "naturals":
        return isinstance(token, int) and token >= 0
    return isinstance(token, Rule)


# ---------------------------------------------------------------------------
# Conclusion / premise sequents / eigenvariables.


@dataclass(frozen=True)
class TagFamily:
    """The tag set {(root, pos+(idx(branch,k),), scope) : k premise of branch}
    appearing in a Read premise; kept symbolic because branches like the
    omega rule have infinitely many premises."""

    root: Sequent
    base: Address
    scope: Sequent
    branch: Rule

    def matches(self, t: Tag) -> bool:
        if t.root != self.root or len(t.position) != len(self.base) + 1:
            return False
        if t.position[:-1] != self.base:
            return False
        last = t.position[-1]
        return (last.rule == self.branch and valid_token(self.branch, last.token)
                and self.scope <= t.scope)

    def sample(self, tokens: Iterable) -> list[Tag]:
        return [Tag(self.root, self.base + (PremiseIndex(self.branch, tok),), self.scope)
                for tok in tokens]


@dataclass(frozen=True)
class PremiseSequent:
    """Premise extended sequent, with a possibly-symbolic tag part."""

    formulas: Sequent = frozenset()
    tags: frozenset = frozenset()
    family: Optional[TagFamily] = None

    def removes_formula(self, phi: Formula) -> bool:
        return phi in self.formulas

    def removes_tag(self, t: Tag) -> bool:
        if any(s.subsumes(t) for s in self.tags):
            return True
        return self.family is not None and self.family.matches(t)


def position_delta(position: Address) -> Sequent:
    """Formulas permitted at an input position: the premise sequent entered
    at the last step (empty at the root)."""
    if not position:
        return frozenset()
    last = position[-1]
    return premise_sequent(last.rule, last.token).formulas


def conclusion(rule: Rule) -> ExtendedSequent:
    if isinstance(rule, TrueRule):
        return ext(rule.literal)
    if isinstance(rule, AxRule):
        return ext(rule.literal, negate(rule.literal))
    if isinstance(rule, (AndRule, OrRule, ForallNumRule, ExistsNumRule,
                         ForallSetRule, ExistsSetFinRule, OmegaRule)):
        return ext(rule.formula)
    if isinstance(rule, IndRule):
        phi0 = subst_num(rule.body, rule.hole, num(0))
        step = syntax.ex1(rule.hole, syntax.conj(
            rule.body, negate(subst_num(rule.body, rule.hole, syntax.Succ(syntax.FVar(rule.hole))))))
        phit = subst_num(rule.body, rule.hole, rule.term)
        return ext(negate(phi0), step, phit)
    if isinstance(rule, (CutRule, RepRule, CutOmegaFlatRule)):
        return EMPTY
    if isinstance(rule, OmegaFlatRule):
        return ext(rule.formula)
    if isinstance(rule, ReadRule):
        return ExtendedSequent(position_delta(rule.position) - rule.scope,
                               frozenset({rule.tag()}))
    raise CalculusError(f"unknown rule {rule!r}")


def _omega_flat_tag(rule) -> Tag:
    root = seq(negate(inst2(rule.formula, rule.var)))
    return Tag(root, EMPTY_ADDR, root)


def premise_sequent(rule: Rule, token) -> PremiseSequent:
    if not valid_token(rule, token):
        raise CalculusError(f"{render_token(token)} is not a premise of {render_rule(rule)}")
    if isinstance(rule, AndRule):
        part = rule.formula.left if token == "L" else rule.formula.right
        return PremiseSequent(seq(part))
    if isinstance(rule, OrRule):
        part = rule.formula.left if rule.branch == "L" else rule.formula.right
        return PremiseSequent(seq(part))
    if isinstance(rule, ForallNumRule):
        return PremiseSequent(seq(inst1(rule.formula, syntax.FVar(rule.witness))))
    if isinstance(rule, ExistsNumRule):
        return PremiseSequent(seq(inst1(rule.formula, rule.witness)))
    if isinstance(rule, ForallSetRule):
        return PremiseSequent(seq(inst2(rule.formula, rule.witness)))
    if isinstance(rule, ExistsSetFinRule):
        return PremiseSequent(seq(inst2_abs(rule.formula, rule.witness)))
    if isinstance(rule, IndRule):
        return PremiseSequent()
    if isinstance(rule, CutRule):
        return PremiseSequent(seq(rule.formula if token == TOP else negate(rule.formula)))
    if isinstance(rule, RepRule):
        return PremiseSequent()
    if isinstance(rule, OmegaRule):
        return PremiseSequent(seq(inst1(rule.formula, num(token))))
    if isinstance(rule, OmegaFlatRule):
        return PremiseSequent(tags=frozenset({_omega_flat_tag(rule)}))
    if isinstance(rule, CutOmegaFlatRule):
        if token == TOP:
            return PremiseSequent(seq(negate(inst2(rule.formula, rule.eigvar))))
        return PremiseSequent(tags=frozenset({_omega_flat_tag(rule)}))
    if isinstance(rule, ReadRule):
        branch = token
        return PremiseSequent(
            conclusion(branch).formulas - rule.scope,
            family=TagFamily(rule.root, rule.position, rule.scope, branch))
    raise CalculusError(f"unknown rule {rule!r}")


def eigenvariables(rule: Rule, token) -> frozenset:
    if isinstance(rule, ForallNumRule) and token == TOP:
        return frozenset({rule.witness})
    if isinstance(rule, ForallSetRule) and token == TOP:
        return frozenset({rule.witness})
    if isinstance(rule, CutOmegaFlatRule) and token == TOP:
        return frozenset({rule.eigvar})
    return frozenset()


def rule_sequents(rule: Rule):
    """(conclusion, token -> premise sequent, token -> eigenvariables)."""
    check_well_formed(rule)
    return (conclusion(rule),
            lambda token: premise_sequent(rule, token),
            lambda token: eigenvariables(rule, token))


def check_well_formed(rule: Rule) -> None:
    if isinstance(rule, TrueRule):
        if not is_literal(rule.literal) or isinstance(rule.literal, syntax.SetLit):
            raise CalculusError("True expects a primitive literal")
        if not eval_literal(rule.literal):
            raise CalculusError(f"True on a false literal: {syntax.render(rule.literal)}")
    elif isinstance(rule, AxRule):
        if not is_literal(rule.literal):
            raise CalculusError("Ax expects a literal")
    elif isinstance(rule, AndRule):
        if not isinstance(rule.formula, syntax.And):
            raise CalculusError("IAnd expects a conjunction")
    elif isinstance(rule, OrRule):
        if not isinstance(rule.formula, syntax.Or) or rule.branch not in ("L", "R"):
            raise CalculusError("IOr expects a disjunction and branch")
    elif isinstance(rule, ForallNumRule):
        if not isinstance(rule.formula, syntax.ForallN):
            raise CalculusError("IForall expects a universal formula")
    elif isinstance(rule, ExistsNumRule):
        if not isinstance(rule.formula, syntax.ExistsN):
            raise CalculusError("IExists expects an existential formula")
    elif isinstance(rule, ForallSetRule):
        if not isinstance(rule.formula, syntax.ForallS):
            raise CalculusError("IForall2 expects a universal set formula")
    elif isinstance(rule, ExistsSetFinRule):
        if not isinstance(rule.formula, syntax.ExistsS):
            raise CalculusError("IExists2 expects an existential set formula")
    elif isinstance(rule, OmegaRule):
        if not isinstance(rule.formula, syntax.ForallN):
            raise CalculusError("omega expects a universal formula")
    elif isinstance(rule, OmegaFlatRule):
        if not isinstance(rule.formula, syntax.ExistsS):
            raise CalculusError("omega-flat expects an existential set formula")
    elif isinstance(rule, CutOmegaFlatRule):
        if not isinstance(rule.formula, syntax.ExistsS):
            raise CalculusError("cut-omega-flat expects an existential set formula")
    elif isinstance(rule, ReadRule):
        if not rule.root <= rule.scope:
            raise CalculusError("Read root must be contained in its scope")


# ---------------------------------------------------------------------------
# Theory membership.


def _fo_closed(phi: Formula) -> bool:
    fo, _ = free_vars(phi)
    return not fo


def _infinitary_formula_ok(phi: Formula) -> bool:
    fo, so = free_vars(phi)
    if fo:
        return False
    return all(v.level is not None for v in so)


def _rule_formulas(rule: Rule) -> list[Formula]:
    out = list(conclusion(rule).formulas)
    for t in conclusion(rule).tags:
        out.extend(t.root)
        out.extend(t.scope)
    if isinstance(rule, ReadRule):
        out.extend(rule.root)
        out.extend(rule.scope)
    return out


def _infinitary_wf(rule: Rule) -> bool:
    try:
        check_well_formed(rule)
    except CalculusError:
        return False
    return all(_infinitary_formula_ok(phi) for phi in _rule_formulas(rule))


def _in_base(rule: Rule, n: int, l: int) -> bool:
    if isinstance(rule, (RepRule, TrueRule, AxRule, AndRule, OrRule)):
        return _infinitary_wf(rule)
    if isinstance(rule, OmegaRule):
        return _infinitary_wf(rule)
    if isinstance(rule, ExistsNumRule):
        return _infinitary_wf(rule) and not term_vars(rule.witness)
    if isinstance(rule, ForallSetRule):
        if not _infinitary_wf(rule):
            return False
        w = rule.witness
        return w.level is not None and w.level == witness_level(rule.formula)
    if isinstance(rule, OmegaFlatRule):
        if not _infinitary_wf(rule):
            return False
        c = comp(rule.formula)
        if not c.on_grid(n, l):
            return False
        if rule.var.level is None:
            return False
        if bound_var_occurs(rule.formula):
            return rule.var.level == c.level
        return True
    return False


def _in_cut_theory(rule: Rule, m: int, lv: int) -> bool:
    if not isinstance(rule, CutOmegaFlatRule) or not _infinitary_wf(rule):
        return False
    if comp(rule.formula) != Complexity(m, lv):
        return False
    if rule.var.level is None or rule.eigvar.level is None:
        return False
    if bound_var_occurs(rule.formula):
        return rule.var.level == lv and rule.eigvar.level == lv
    return True


def read_root_complexities(root: Sequent) -> frozenset:
    """Candidate complexities comp(exists2 X phi) for a Read-theory root
    {~phi(Y^l)}: abstract each free leveled variable whose level matches,
    plus the vacuous abstraction."""
    if len(root) != 1:
        return frozenset()
    (rho,) = root
    if not _infinitary_formula_ok(rho):
        return frozenset()
    candidates = set()
    _, so = free_vars(rho)
    for v in sorted(so):
        body = syntax.rename_set_var(negate(rho), v, SecondOrderVar("Xabs", None))
        c = comp(syntax.ex2("Xabs", body))
        if v.level == c.level:
            candidates.add(c)
    candidates.add(comp(syntax.ex2("Xabs", negate(rho))))
    return frozenset(candidates)


def root_complexity(root: Sequent) -> Optional[Complexity]:
    cands = read_root_complexities(root)
    if not cands:
        return None
    return min(cands, key=lambda c: c.key())


def _read_kind(rule: Rule):
    """(n, l, m, lv) of the Read-theory a Read rule belongs to, or None."""
    if not isinstance(rule, ReadRule) or not isinstance(rule.theory, BaseM):
        return None
    th = rule.theory
    if Complexity(th.m, th.lv) not in read_root_complexities(rule.root):
        return None
    if not all(_infinitary_formula_ok(phi) for phi in rule.scope):
        return None
    return (th.n, th.l, th.m, th.lv)


def _in_read_theory(rule: Rule, n: int, l: int, m: int, lv: int) -> bool:
    return _read_kind(rule) == (n, l, m, lv)


def _finitary_formula_ok(phi: Formula) -> bool:
    _, so = free_vars(phi)
    return all(v.level is None for v in so)


def _in_pa2(rule: Rule, allow_cut: bool) -> bool:
    try:
        check_well_formed(rule)
    except CalculusError:
        return False
    if isinstance(rule, CutRule):
        return allow_cut and _finitary_formula_ok(rule.formula)
    if isinstance(rule, (TrueRule, AxRule, AndRule, OrRule, ForallNumRule,
                         ExistsNumRule, IndRule)):
        return all(_finitary_formula_ok(p) for p in _rule_formulas(rule))
    if isinstance(rule, ForallSetRule):
        return rule.witness.level is None and all(
            _finitary_formula_ok(p) for p in _rule_formulas(rule))
    if isinstance(rule, ExistsSetFinRule):
        return all(_finitary_formula_ok(p) for p in _rule_formulas(rule))
    return False


def theory_contains(theory: TheoryId, rule: Rule) -> bool:
    if isinstance(theory, PA2):
        return _in_pa2(rule, allow_cut=True)
    if isinstance(theory, PA2CutFree):
        return _in_pa2(rule, allow_cut=False)
    if isinstance(theory, Base):
        return _in_base(rule, theory.n, theory.l)
    if isinstance(theory, CutTheory):
        return _in_cut_theory(rule, theory.m, theory.lv)
    if isinstance(theory, ReadTheory):
        return _in_read_theory(rule, theory.n, theory.l, theory.m, theory.lv)
    if isinstance(theory, BaseM):
        n, l, m, lv = theory.n, theory.l, theory.m, theory.lv
        if _in_base(rule, n, l):
            return True
        if isinstance(rule, CutOmegaFlatRule):
            c = comp(rule.formula)
            return c < Complexity(m, lv) and c.on_grid(n, l) and _in_cut_theory(
                rule, c.depth, c.level)
        if isinstance(rule, ReadRule):
            kind = _read_kind(rule)
            return (kind is not None and kind[0] == n and kind[1] == l
                    and kind[2] < m and kind[3] <= l)
        return False
    if isinstance(theory, Full):
        n, l, m, lv = theory.n, theory.l, theory.m, theory.lv
        if theory_contains(BaseM(n, l, m, lv), rule):
            return True
        if isinstance(rule, ReadRule):
            kind = _read_kind(rule)
            return (kind is not None and kind[0] == n and kind[1] == l
                    and kind[2] <= n and kind[3] < lv)
        return False
    if isinstance(theory, WithCuts):
        if isinstance(rule, CutRule):
            return (syntax.rank(rule.formula) < theory.r
                    and _infinitary_formula_ok(rule.formula))
        return theory_contains(Full(theory.n, theory.l, theory.m, theory.lv), rule)
    if isinstance(theory, NoRead):
        if isinstance(rule, ReadRule):
            return False
        return theory_contains(
            WithCuts(theory.n, theory.l, theory.n, theory.l, theory.r), rule)
    if isinstance(theory, FnTheory):
        if theory_contains(theory.base, rule):
            return True
        if isinstance(rule, ReadRule):
            for root, input_theory in theory.roots:
                if rule.root == root and rule.theory == input_theory and root <= rule.scope:
                    return True
        return False
    raise CalculusError(f"unknown theory {theory!r}")


def is_read(rule: Rule) -> bool:
    return isinstance(rule, ReadRule)


# ---------------------------------------------------------------------------
# Gamma-back: formulas permitted at the top of a theory-sequence.


@dataclass(frozen=True)
class RichSequent:
    """Extended sequent that may carry symbolic tag families (needed because
    premise tag sets of Read branches over omega rules are infinite)."""

    formulas: Sequent = frozenset()
    tags: frozenset = frozenset()
    families: frozenset = frozenset()  # of TagFamily

    def contains_formula(self, phi):
        return phi in self.formulas

    def contains_tag(self, t: Tag) -> bool:
        return (any(s.subsumes(t) for s in self.tags)
                or any(f.matches(t) for f in self.families))


def gamma_back(sigma: Address) -> RichSequent:
    """Formulas (and tags) permitted at the top of the sequence: empty at
    the root; each step removes the rule's conclusion and adds the premise
    sequent entered."""
    formulas: set = set()
    tags: set = set()
    families: set = set()
    for element in sigma:
        if not isinstance(element, PremiseIndex):
            raise CalculusError(f"malformed sequence element {element!r}")
        rule = element.rule
        if not valid_token(rule, element.token):
            raise CalculusError(
                f"token {render_token(element.token)} is not a premise of {render_rule(rule)}")
        concl = conclusion(rule)
        formulas -= concl.formulas
        tags = {t for t in tags if not any(s.subsumes(t) for s in concl.tags)}
        prem = premise_sequent(rule, element.token)
        formulas |= prem.formulas
        tags |= prem.tags
        if prem.family is not None:
            families.add(prem.family)
    return RichSequent(frozenset(formulas), frozenset(tags), frozenset(families))


# ---------------------------------------------------------------------------
# Rendering / parsing of rules, theories, addresses.


def render_theory(t: TheoryId) -> object:
    if isinstance(t, PA2):
        return ["pa2"]
    if isinstance(t, PA2CutFree):
        return ["pa2-cutfree"]
    if isinstance(t, Base):
        return ["base", t.n, t.l]
    if isinstance(t, BaseM):
        return ["base-", t.n, t.l, t.m, t.lv]
    if isinstance(t, Full):
        return ["full", t.n, t.l, t.m, t.lv]
    if isinstance(t, WithCuts):
        return ["cuts", t.n, t.l, t.m, t.lv, t.r]
    if isinstance(t, NoRead):
        return ["noread", t.n, t.l, t.r]
    if isinstance(t, CutTheory):
        return ["ctheory", t.m, t.lv]
    if isinstance(t, ReadTheory):
        return ["rtheory", t.n, t.l, t.m, t.lv]
    if isinstance(t, FnTheory):
        spec = ["fn-theory", render_theory(t.base)]
        for root, it in t.roots:
            spec.append(["root", _render_seq(root), render_theory(it)])
        return spec
    raise CalculusError(f"unknown theory {t!r}")


def parse_theory(e) -> TheoryId:
    if not isinstance(e, list) or not e:
        raise CalculusError(f"bad theory {e!r}")
    head = e[0]
    if head == "pa2":
        return PA2()
    if head == "pa2-cutfree":
        return PA2CutFree()
    if head == "base":
        return Base(e[1], e[2])
    if head == "base-":
        return BaseM(e[1], e[2], e[3], e[4])
    if head == "full":
        return Full(e[1], e[2], e[3], e[4])
    if head == "cuts":
        return WithCuts(e[1], e[2], e[3], e[4], e[5])
    if head == "noread":
        return NoRead(e[1], e[2], e[3])
    if head == "ctheory":
        return CutTheory(e[1], e[2])
    if head == "rtheory":
        return ReadTheory(e[1], e[2], e[3], e[4])
    if head == "fn-theory":
        roots = tuple((frozenset(parse_formula(f) for f in r[1]), parse_theory(r[2]))
                      for r in e[2:])
        return FnTheory(parse_theory(e[1]), roots)
    raise CalculusError(f"bad theory head {head!r}")


def _render_seq(s: Sequent) -> list:
    return sorted((render_sexpr(phi) for phi in s), key=sexpr.dumps)


def render_rule(rule: Rule) -> object:
    if isinstance(rule, TrueRule):
        return ["true", render_sexpr(rule.literal)]
    if isinstance(rule, AxRule):
        return ["ax", render_sexpr(rule.literal)]
    if isinstance(rule, AndRule):
        return ["iand", render_sexpr(rule.formula)]
    if isinstance(rule, OrRule):
        return ["ior", rule.branch.lower(), render_sexpr(rule.formula)]
    if isinstance(rule, ForallNumRule):
        return ["iall", rule.witness, render_sexpr(rule.formula)]
    if isinstance(rule, ExistsNumRule):
        return ["iex", render_term(rule.witness), render_sexpr(rule.formula)]
    if isinstance(rule, ForallSetRule):
        return ["iall2", str(rule.witness), render_sexpr(rule.formula)]
    if isinstance(rule, ExistsSetFinRule):
        return ["iex2", render_abstract(rule.witness), render_sexpr(rule.formula)]
    if isinstance(rule, IndRule):
        return ["ind", render_term(rule.term), rule.hole, render_sexpr(rule.body)]
    if isinstance(rule, CutRule):
        return ["cut", render_sexpr(rule.formula)]
    if isinstance(rule, RepRule):
        return ["rep"]
    if isinstance(rule, OmegaRule):
        return ["iomega", render_sexpr(rule.formula)]
    if isinstance(rule, OmegaFlatRule):
        return ["oflat", str(rule.var), render_sexpr(rule.formula)]
    if isinstance(rule, CutOmegaFlatRule):
        return ["cutoflat", str(rule.eigvar), str(rule.var), render_sexpr(rule.formula)]
    if isinstance(rule, ReadRule):
        return ["read", render_theory(rule.theory), ["root"] + _render_seq(rule.root),
                ["pos"] + [render_index(i) for i in rule.position],
                ["scope"] + _render_seq(rule.scope)]
    raise CalculusError(f"unknown rule {rule!r}")


def parse_rule(e) -> Rule:
    if not isinstance(e, list) or not e:
        raise CalculusError(f"bad rule {e!r}")
    head = e[0]
    if head == "true":
        return TrueRule(parse_formula(e[1]))
    if head == "ax":
        return AxRule.of(parse_formula(e[1]))
    if head == "iand":
        return AndRule(parse_formula(e[1]))
    if head == "ior":
        return OrRule(parse_formula(e[2]), e[1].upper())
    if head == "iall":
        return ForallNumRule(parse_formula(e[2]), e[1])
    if head == "iex":
        return ExistsNumRule(parse_formula(e[2]), parse_term(e[1]))
    if head == "iall2":
        return ForallSetRule(parse_formula(e[2]), parse_so_var(e[1]))
    if head == "iex2":
        return ExistsSetFinRule(parse_formula(e[2]), parse_abstract(e[1]))
    if head == "ind":
        return IndRule(e[2], parse_formula(e[3]), parse_term(e[1]))
    if head == "cut":
        return CutRule(parse_formula(e[1]))
    if head == "rep":
        return REP
    if head == "iomega":
        return OmegaRule(parse_formula(e[1]))
    if head == "oflat":
        return OmegaFlatRule(parse_so_var(e[1]), parse_formula(e[2]))
    if head == "cutoflat":
        return CutOmegaFlatRule(parse_so_var(e[1]), parse_so_var(e[2]), parse_formula(e[3]))
    if head == "read":
        theory = parse_theory(e[1])
        root = frozenset(parse_formula(f) for f in e[2][1:])
        pos = tuple(parse_index(i) for i in e[3][1:])
        scope = frozenset(parse_formula(f) for f in e[4][1:])
        return ReadRule(theory, root, pos, scope)
    raise CalculusError(f"bad rule head {head!r}")


def render_token(token) -> object:
    if isinstance(token, Rule):
        return render_rule(token)
    return token


def render_index(i: PremiseIndex) -> object:
    return ["idx", render_rule(i.rule), render_token(i.token)]


def parse_index(e) -> PremiseIndex:
    if not (isinstance(e, list) and len(e) == 3 and e[0] == "idx"):
        raise CalculusError(f"bad premise index {e!r}")
    rule = parse_rule(e[1])
    token = e[2]
    if isinstance(token, list):
        token = parse_rule(token)
    return PremiseIndex(rule, token)


def rule_str(rule: Rule) -> str:
    return sexpr.dumps(render_rule(rule))


def rule_sort_key(rule: Rule) -> str:
    return rule_str(rule)


def token_sort_key(token) -> tuple:
    if isinstance(token, str):
        return (0, token)
    if isinstance(token, int):
        return (1, f"{token:09d}")
    return (2, sexpr.dumps(render_token(token)))


def seq_str(s: Sequent) -> str:
    return "{" + ", ".join(sorted(syntax.render(phi) for phi in s)) + "}"


def tag_str(t: Tag) -> str:
    pos = ".".join(sexpr.dumps(render_token(i.token)) for i in t.position)
    return f"({seq_str(t.root)} | {pos or 'e'} | {seq_str(t.scope)})"


def ext_str(es: ExtendedSequent) -> str:
    parts = [seq_str(es.formulas)]
    if es.tags:
        parts.append("; " + ", ".join(sorted(tag_str(t) for t in es.tags)))
    return "".join(parts)
