"""Canonical constructions: the identity function, excluded-middle trees,
substitution functions, and the embedding of finitary deductions into the
infinitary calculus."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

from . import calculus as ca
from . import ordinals as o
from . import syntax
from .calculus import (
    Address,
    AndRule,
    AxRule,
    BaseM,
    CutOmegaFlatRule,
    CutRule,
    EMPTY_ADDR,
    ExistsNumRule,
    ExistsSetFinRule,
    ExtendedSequent,
    ForallNumRule,
    ForallSetRule,
    Full,
    IndRule,
    OmegaFlatRule,
    OmegaRule,
    OrRule,
    PA2,
    PremiseIndex,
    ReadRule,
    RepRule,
    Rule,
    Sequent,
    TheoryId,
    TrueRule,
    WithCuts,
    conclusion,
    eigenvariables,
    ext,
    premise_sequent,
    rule_premises,
    seq,
    theory_contains,
)
from .localfn import Emit, LocalFunction, Machine, Need, RootSpec, machine_function
from .prooftree import FiniteNode, ProofTree, Verdict, Failure
from .syntax import (
    Complexity,
    Formula,
    SecondOrderVar,
    SetAbstract,
    Term,
    comp,
    free_vars,
    inst1,
    inst2,
    inst2_abs,
    negate,
    num,
    rank,
    subst_num,
    subst_set,
    rename_set_var,
    term_value,
    witness_level,
)


class LibraryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Tree gluing.


def prefix_tree(theory: TheoryId, declared: ExtendedSequent, rule: Rule,
                children, name: str = "glued") -> ProofTree:
    """A tree with `rule` at the root and the given subtrees above it;
    `children` maps premise tokens to ProofTrees (dict or callable)."""
    memo: dict = {}

    def child(token) -> ProofTree:
        got = memo.get(token)
        if got is None:
            got = children(token) if callable(children) else children[token]
            memo[token] = got
        return got

    def gen(addr: Address) -> Rule:
        if not addr:
            return rule
        return child(addr[0].token).rule_at(addr[1:])

    return ProofTree(theory, declared, gen, name=name)


# ---------------------------------------------------------------------------
# The identity function: read the input and place every rule back.


@dataclass(frozen=True)
class _IdRead(Machine):
    root: Sequent
    pos: Address = EMPTY_ADDR

    def poll(self):
        return Need(0, self.pos, frozenset())

    def on_read(self, branch: Rule) -> Machine:
        return _IdCopy(self.root, self.pos, branch)

    def bound_term(self):
        return o.tag_var(self.root, self.pos)


@dataclass(frozen=True)
class _IdCopy(Machine):
    root: Sequent
    pos: Address
    rule: Rule

    def poll(self):
        return Emit(self.rule)

    def on_descend(self, token) -> Machine:
        return _IdRead(self.root, self.pos + (PremiseIndex(self.rule, token),))

    def bound_term(self):
        return o.tag_var(self.root, self.pos)


def identity_fn(phi: Formula, n: int, l: int,
                complexity: Optional[Complexity] = None) -> LocalFunction:
    """The function with root {phi} that copies its input verbatim,
    interleaving Reads at advancing positions."""
    root = seq(phi)
    c = complexity if complexity is not None else ca.root_complexity(root)
    if c is None:
        raise LibraryError(f"no complexity for root {syntax.render(phi)}")
    if not c.on_grid(n, l):
        raise LibraryError(f"complexity {c} outside the ({n},{l}) grid")
    spec = RootSpec(root, BaseM(n, l, c.depth, c.level))
    return machine_function(
        f"id[{syntax.render(phi)}]", Full(n, l, c.depth, c.level), (spec,),
        _IdRead(root), ext(phi))


# ---------------------------------------------------------------------------
# Excluded middle trees: Gamma(d_phi) within {phi, ~phi}.


def em_parameters(phi: Formula) -> tuple[int, int]:
    comps = [comp(s) for s in syntax.second_order_subformulas(phi)]
    if not comps:
        return (0, 0)
    return (max(c.depth for c in comps) + 1, max(c.level for c in comps))


def excluded_middle(phi: Formula, n: Optional[int] = None,
                    l: Optional[int] = None, _depth: int = 0) -> ProofTree:
    if not syntax.is_closed(phi):
        raise LibraryError(f"excluded middle needs a closed formula: {syntax.render(phi)}")
    if n is None or l is None:
        n0, l0 = em_parameters(phi)
        n = n0 if n is None else n
        l = l0 if l is None else l
    theory = Full(n, l, n, l)
    declared = ext(phi, negate(phi))

    if syntax.is_literal(phi):
        return FiniteNode(AxRule.of(phi)).as_tree(theory, declared, name="em-lit")

    if isinstance(phi, syntax.And):
        a, b = phi.left, phi.right
        nphi = negate(phi)
        return prefix_tree(
            theory, declared, AndRule(phi),
            {"L": prefix_tree(theory, ext(a, nphi), OrRule(nphi, "L"),
                              {"top": excluded_middle(a, n, l, _depth + 1)}),
             "R": prefix_tree(theory, ext(b, nphi), OrRule(nphi, "R"),
                              {"top": excluded_middle(b, n, l, _depth + 1)})},
            name="em-and")

    if isinstance(phi, syntax.Or):
        a, b = phi.left, phi.right
        nphi = negate(phi)
        return prefix_tree(
            theory, declared, AndRule(nphi),
            {"L": prefix_tree(theory, ext(negate(a), phi), OrRule(phi, "L"),
                              {"top": excluded_middle(a, n, l, _depth + 1)}),
             "R": prefix_tree(theory, ext(negate(b), phi), OrRule(phi, "R"),
                              {"top": excluded_middle(b, n, l, _depth + 1)})},
            name="em-or")

    if isinstance(phi, syntax.ForallN):
        ex_neg = negate(phi)

        def child(nn: int) -> ProofTree:
            inst = inst1(phi, nn)
            return prefix_tree(theory, ext(inst, ex_neg),
                               ExistsNumRule(ex_neg, num(nn)),
                               {"top": excluded_middle(inst, n, l, _depth + 1)},
                               name=f"em-all-{nn}")

        return prefix_tree(theory, declared, OmegaRule(phi), child, name="em-all")

    if isinstance(phi, syntax.ExistsN):
        return excluded_middle(negate(phi), n, l, _depth).with_conclusion(declared)

    if isinstance(phi, syntax.ForallS):
        lw = witness_level(phi)
        v = syntax.sv(f"@em{_depth}", lw)
        ex_neg = negate(phi)  # exists2 X ~psi
        if comp(ex_neg).depth >= n + 1 and False:
            raise LibraryError("grid too small")
        body_root = negate(inst2(ex_neg, v))  # psi(v)
        c = comp(ex_neg)
        id_fn = identity_fn(body_root, n, l, complexity=c)
        inner = prefix_tree(
            theory, ext(body_root, ex_neg), OmegaFlatRule(v, ex_neg),
            {"bot": id_fn.body}, name="em-all2-flat")
        return prefix_tree(theory, declared, ForallSetRule(phi, v),
                           {"top": inner}, name="em-all2")

    if isinstance(phi, syntax.ExistsS):
        return excluded_middle(negate(phi), n, l, _depth).with_conclusion(declared)

    raise LibraryError(f"bad formula {phi!r}")


# ---------------------------------------------------------------------------
# Substitution functions F^{phi, X -> psi}.


@dataclass(frozen=True)
class _SubstCfg:
    x: SecondOrderVar
    psi: SetAbstract
    n: int
    l: int

    def rw(self, phi: Formula, renames: tuple) -> Formula:
        out = phi
        for old, new in renames:
            out = rename_set_var(out, old, new)
        return subst_set(out, self.x, self.psi)


@dataclass(frozen=True)
class _Assoc:
    """A rewritten inner tag: Reads on old_root in the input are re-targeted
    to new theory/root, positions translated through recorded pairs."""

    old_root: Sequent
    new_root: Sequent
    new_theory: TheoryId
    pairs: tuple  # of (old position, new position)

    def translate(self, pos: Address) -> Address:
        for old, new in self.pairs:
            if old == pos:
                return new
        raise LibraryError("substitution: no position translation recorded for a "
                           "re-targeted Read (nested retarget beyond supported depth)")


@dataclass(frozen=True)
class _SubstRead(Machine):
    cfg: _SubstCfg
    root: Sequent
    pos: Address
    scope: Sequent
    renames: tuple = ()
    assocs: tuple = ()

    def poll(self):
        return Need(0, self.pos, self.scope)

    def bound_term(self):
        return o.Apply(o.tag_var(self.root, self.pos),
                       (o.Var(("omega", "*", "*")),))

    def on_read(self, branch: Rule) -> Machine:
        return _dispatch(self, branch)


@dataclass(frozen=True)
class _SubstEmit(Machine):
    """Emit one rule; premise tokens map to successor machines through a
    recorded prescription."""

    rule: Rule
    next_fn: Callable

    def poll(self):
        return Emit(self.rule)

    def on_descend(self, token) -> Machine:
        return self.next_fn(token)


@dataclass(frozen=True)
class _SubstTree(Machine):
    """Delegate to a fixed tree region (the d_psi(t) replacement)."""

    tree: ProofTree
    addr: Address = EMPTY_ADDR

    def poll(self):
        return Emit(self.tree.rule_at(self.addr))

    def on_descend(self, token) -> Machine:
        rule = self.tree.rule_at(self.addr)
        return _SubstTree(self.tree, self.addr + (PremiseIndex(rule, token),))


def _rewrite_rule(st: _SubstRead, rule: Rule):
    """The rewritten counterpart of an input rule whose conclusion meets the
    scope, plus rename/assoc updates."""
    cfg, renames, assocs = st.cfg, st.renames, st.assocs
    if isinstance(rule, TrueRule):
        return rule, renames, assocs
    if isinstance(rule, AndRule):
        return AndRule(cfg.rw(rule.formula, renames)), renames, assocs
    if isinstance(rule, OrRule):
        return OrRule(cfg.rw(rule.formula, renames), rule.branch), renames, assocs
    if isinstance(rule, OmegaRule):
        return OmegaRule(cfg.rw(rule.formula, renames)), renames, assocs
    if isinstance(rule, ExistsNumRule):
        return ExistsNumRule(cfg.rw(rule.formula, renames), rule.witness), renames, assocs
    if isinstance(rule, ForallSetRule):
        f2 = cfg.rw(rule.formula, renames)
        w2 = SecondOrderVar(rule.witness.name, witness_level(f2))
        if w2 != rule.witness:
            renames = renames + ((rule.witness, w2),)
        return ForallSetRule(f2, w2), renames, assocs
    if isinstance(rule, OmegaFlatRule):
        f2 = cfg.rw(rule.formula, renames)
        v2 = SecondOrderVar(rule.var.name, comp(f2).level)
        if v2 != rule.var:
            renames = renames + ((rule.var, v2),)
        old_root = seq(negate(inst2(rule.formula, rule.var)))
        new_root = seq(negate(inst2(f2, v2)))
        c2 = comp(f2)
        assocs = assocs + (_Assoc(old_root, new_root,
                                  BaseM(cfg.n, cfg.l, c2.depth, c2.level),
                                  ((EMPTY_ADDR, EMPTY_ADDR),)),)
        return OmegaFlatRule(v2, f2), renames, assocs
    if isinstance(rule, CutOmegaFlatRule):
        # the substituted variable cannot occur free in the cut formula
        f2 = cfg.rw(rule.formula, renames)
        z2 = SecondOrderVar(rule.eigvar.name, comp(f2).level) \
            if syntax.bound_var_occurs(f2) else rule.eigvar
        v2 = SecondOrderVar(rule.var.name, comp(f2).level) \
            if syntax.bound_var_occurs(f2) else rule.var
        return CutOmegaFlatRule(z2, v2, f2), renames, assocs
    raise LibraryError(f"substitution cannot rewrite {ca.rule_str(rule)}")


def _dispatch(st: _SubstRead, branch: Rule) -> Machine:
    cfg = st.cfg
    delta = conclusion(branch).formulas

    # axiom on the substituted variable: replace by an excluded-middle tree
    if isinstance(branch, AxRule) and isinstance(branch.literal, syntax.SetLit) \
            and branch.literal.var == cfg.x:
        region = excluded_middle(cfg.psi.at(branch.literal.term), cfg.n, cfg.l)
        return _SubstTree(region)

    # a Read on a rewritten tag: re-target it
    if isinstance(branch, ReadRule):
        for i, assoc in enumerate(st.assocs):
            if branch.root == assoc.old_root:
                return _retarget(st, branch, assoc)

    if not (delta & st.scope):
        return _SubstEmit(branch, lambda token, b=branch, s=st: _SubstRead(
            s.cfg, s.root, s.pos + (PremiseIndex(b, token),), s.scope,
            s.renames, s.assocs))

    if isinstance(branch, ReadRule):
        widened = ReadRule(branch.theory, branch.root, branch.position,
                           branch.scope | st.scope)
        return _SubstEmit(widened, lambda token, b=branch, s=st: _SubstRead(
            s.cfg, s.root, s.pos + (PremiseIndex(b, token),),
            s.scope | premise_sequent(b, token).formulas, s.renames, s.assocs))

    if isinstance(branch, AxRule):
        lit2 = branch.literal
        for old, new in st.renames:
            lit2 = rename_set_var(lit2, old, new)
        return _SubstEmit(AxRule.of(lit2), lambda token: _fail_leaf())

    rewritten, renames, assocs = _rewrite_rule(st, branch)
    return _SubstEmit(rewritten, lambda token, b=branch, s=st, rn=renames, ac=assocs:
                      _SubstRead(s.cfg, s.root,
                                 s.pos + (PremiseIndex(b, token),),
                                 s.scope | premise_sequent(b, token).formulas,
                                 rn, ac))


def _fail_leaf():
    raise LibraryError("axiom rules have no premises")


@dataclass(frozen=True)
class _Retarget(Machine):
    """Emitted re-targeted Read over the new theory; branch rules are either
    back-translated (continue reading the input behind the matching branch)
    or handled fresh behind the input's Rep branch."""

    st: _SubstRead
    old_read: ReadRule
    assoc: _Assoc
    new_pos: Address

    def poll(self):
        new_scope = frozenset(self.st.cfg.rw(f, self.st.renames)
                              for f in self.old_read.scope) | self.st.scope
        return Emit(ReadRule(self.assoc.new_theory, self.assoc.new_root,
                             self.new_pos, new_scope | self.assoc.new_root))

    def on_descend(self, token) -> Machine:
        st, cfg = self.st, self.st.cfg
        if not isinstance(token, Rule):
            raise LibraryError("Read branches are rules")
        new_rule = token
        lam = self.old_read.scope
        lam_rw = {cfg.rw(f, st.renames) for f in lam}
        hits = conclusion(new_rule).formulas & lam_rw
        if hits:
            back = _back_translate(cfg, st.renames, new_rule, lam)
            branch_idx = PremiseIndex(self.old_read, back)
            prem = premise_sequent(self.old_read, back)
            assoc2 = _extend_assoc(self.assoc, self.old_read.position, back,
                                   self.new_pos, new_rule)
            assocs = tuple(assoc2 if a is self.assoc else a for a in st.assocs)
            return _SubstRead(cfg, st.root, st.pos + (branch_idx,),
                              st.scope | prem.formulas, st.renames, assocs)
        # untouched by the substitution: process it fresh, consulting the
        # input behind its Rep branch
        rep_idx = PremiseIndex(self.old_read, ca.REP)
        fresh = _SubstRead(cfg, st.root, st.pos + (rep_idx,), st.scope,
                           st.renames, st.assocs)
        return _dispatch(fresh, new_rule)


def _extend_assoc(assoc: _Assoc, old_base: Address, old_rule: Rule,
                  new_base: Address, new_rule: Rule) -> _Assoc:
    pairs = assoc.pairs
    spec = rule_premises(old_rule)
    tokens = spec.tokens if spec.kind == "finite" else tuple(range(4))
    for tok in tokens:
        pairs = pairs + ((old_base + (PremiseIndex(old_rule, tok),),
                          new_base + (PremiseIndex(new_rule, tok),)),)
    return replace(assoc, pairs=pairs)


def _back_translate(cfg: _SubstCfg, renames: tuple, new_rule: Rule,
                    lam: Sequent) -> Rule:
    """A rule over the old language whose rewritten conclusion matches."""
    for lam_f in sorted(lam, key=syntax.render):
        if cfg.rw(lam_f, renames) not in conclusion(new_rule).formulas:
            continue
        if isinstance(new_rule, AndRule) and isinstance(lam_f, syntax.And):
            return AndRule(lam_f)
        if isinstance(new_rule, OrRule) and isinstance(lam_f, syntax.Or):
            return OrRule(lam_f, new_rule.branch)
        if isinstance(new_rule, OmegaRule) and isinstance(lam_f, syntax.ForallN):
            return OmegaRule(lam_f)
        if isinstance(new_rule, ExistsNumRule) and isinstance(lam_f, syntax.ExistsN):
            return ExistsNumRule(lam_f, new_rule.witness)
        if isinstance(new_rule, ForallSetRule) and isinstance(lam_f, syntax.ForallS):
            return ForallSetRule(lam_f, SecondOrderVar(new_rule.witness.name,
                                                       witness_level(lam_f)))
        if isinstance(new_rule, OmegaFlatRule) and isinstance(lam_f, syntax.ExistsS):
            return OmegaFlatRule(SecondOrderVar(new_rule.var.name,
                                                comp(lam_f).level), lam_f)
        if isinstance(new_rule, (TrueRule, AxRule)):
            break
    raise LibraryError(
        f"substitution: cannot back-translate {ca.rule_str(new_rule)}")


def _retarget(st: _SubstRead, branch: ReadRule, assoc: _Assoc) -> Machine:
    return _Retarget(st, branch, assoc, assoc.translate(branch.position))


def substitution_fn(phi: Formula, x: SecondOrderVar, psi: SetAbstract,
                    n: int, l: int) -> LocalFunction:
    """The function with root {phi} (x free in phi) that replaces x by psi
    everywhere in its input."""
    if x.level is None:
        raise LibraryError("substitution variable must be leveled")
    root = seq(phi)
    c = ca.root_complexity(root)
    if c is None or not c.on_grid(n, l):
        raise LibraryError(f"root {syntax.render(phi)} not usable on the grid")
    cfg = _SubstCfg(x, psi, n, l)
    goal = cfg.rw(phi, ())
    spec = RootSpec(root, BaseM(n, l, c.depth, c.level))
    return machine_function(
        f"subst[{x}]", Full(n, l, min(c.depth + 1, n), c.level), (spec,),
        _SubstRead(cfg, root, EMPTY_ADDR, root), ext(goal))


# ---------------------------------------------------------------------------
# Finitary proofs: exact conclusion, validation, embedding.


def finitary_gamma(proof: FiniteNode) -> frozenset:
    out = set(conclusion(proof.rule).formulas)
    for token, child in proof.children.items():
        removed = premise_sequent(proof.rule, token).formulas
        out |= finitary_gamma(child) - removed
    return frozenset(out)


def check_finitary(proof: FiniteNode, declared: Sequent,
                   theory: TheoryId = PA2()) -> Verdict:
    """Exact validation of a finite deduction: theory membership, premise
    coverage, eigenvariable conditions, conclusion containment."""
    failures = []

    def walk(nd: FiniteNode, addr: Address):
        rule = nd.rule
        try:
            ca.check_well_formed(rule)
        except ca.CalculusError as e:
            failures.append(Failure("well-formed", addr, str(e)))
            return
        if not theory_contains(theory, rule):
            failures.append(Failure("theory", addr,
                                    f"{ca.rule_str(rule)} not in the theory"))
        spec = rule_premises(rule)
        if spec.kind != "finite":
            failures.append(Failure("finitary", addr, "infinitary rule in a deduction"))
            return
        want = set(spec.tokens)
        got = set(nd.children)
        if want != got:
            failures.append(Failure("premises", addr,
                                    f"children {sorted(map(str, got))} do not match "
                                    f"premises {sorted(map(str, want))}"))
            return
        for token, child in nd.children.items():
            eig = eigenvariables(rule, token)
            if eig:
                leak = finitary_gamma(child) - premise_sequent(rule, token).formulas
                for e in sorted(eig, key=str):
                    for f in sorted(leak, key=syntax.render):
                        fo, so = free_vars(f)
                        present = (e in fo) if isinstance(e, str) else (e in so)
                        if present:
                            failures.append(Failure(
                                "validity", addr,
                                f"eigenvariable {e} free in {syntax.render(f)}"))
            walk(child, addr + (PremiseIndex(rule, token),))

    walk(proof, EMPTY_ADDR)
    if not failures:
        for f in sorted(finitary_gamma(proof) - declared, key=syntax.render):
            failures.append(Failure("conclusion", EMPTY_ADDR,
                                    f"undeclared formula {syntax.render(f)}"))
    return Verdict("finitary-check", not failures, tuple(failures))


# ---------------------------------------------------------------------------
# Embedding.


@dataclass(frozen=True)
class EmbedParams:
    n: int
    l: int
    r: int

    def theory(self) -> WithCuts:
        return WithCuts(self.n, self.l, self.n, self.l, self.r)


def _apply_maps(phi: Formula, nums: dict, levels: dict) -> Formula:
    out = phi
    for name, value in sorted(nums.items()):
        out = subst_num(out, name, num(value))
    _, so = free_vars(out)
    for v in sorted(so):
        if v.level is None and v.name in levels:
            out = rename_set_var(out, v, SecondOrderVar(v.name, levels[v.name]))
    return out


def _collect_formulas(proof: FiniteNode, nums: dict, levels: dict,
                      acc: list, depth: int = 0):
    rule = proof.rule
    if isinstance(rule, ForallNumRule):
        nums = {**nums, rule.witness: 0}
    if isinstance(rule, ForallSetRule) and rule.witness.level is None:
        f2 = _apply_maps(rule.formula, nums, levels)
        levels = {**levels, rule.witness.name: witness_level(f2)}
    for f in ca._rule_formulas(rule):
        acc.append(_apply_maps(f, nums, levels))
    if isinstance(rule, CutRule):
        acc.append(("cut", _apply_maps(rule.formula, nums, levels)))
    if isinstance(rule, ExistsSetFinRule):
        f2 = _apply_maps(rule.formula, nums, levels)
        psi2 = SetAbstract(rule.witness.hole,
                           _apply_maps(rule.witness.body,
                                       {k: v for k, v in nums.items()
                                        if k != rule.witness.hole}, levels))
        acc.append(("cut", inst2_abs(f2, psi2)))
        acc.append(inst2_abs(f2, psi2))
    for child in proof.children.values():
        _collect_formulas(child, nums, levels, acc, depth + 1)


def embed_params(proof: FiniteNode, nums: dict, levels: dict) -> EmbedParams:
    """Minimal sufficient theory parameters: one more than the deepest
    second-order complexity (later stages cut at equal complexity), the
    maximal level in sight, and one more than the maximal cut rank."""
    acc: list = []
    _collect_formulas(proof, nums, levels, acc)
    comps, ranks = [], []
    for item in acc:
        if isinstance(item, tuple):
            ranks.append(rank(item[1]))
            continue
        for s in syntax.second_order_subformulas(item):
            comps.append(comp(s))
    n = (max(c.depth for c in comps) + 1) if comps else 0
    lmax = max([c.level for c in comps] + list(levels.values()) + [0])
    r = (max(ranks) + 1) if ranks else 0
    return EmbedParams(n, lmax, r)


def embed(proof: FiniteNode, nums: Optional[dict] = None,
          levels: Optional[dict] = None,
          params: Optional[EmbedParams] = None) -> ProofTree:
    """Embed a valid finitary deduction: first-order free variables are
    instantiated at numerals, second-order ones at levels; universal
    quantifiers become omega rules, induction becomes the staircase, and
    second-order witnesses become flat-Omega rules over substitution
    functions."""
    nums = dict(nums or {})
    levels = dict(levels or {})
    gamma = finitary_gamma(proof)
    open_fo = set()
    open_so = set()
    for f in gamma:
        fo, so = free_vars(f)
        open_fo |= fo - set(nums)
        open_so |= {v.name for v in so if v.level is None} - set(levels)
    if open_fo or open_so:
        raise LibraryError(
            f"free variables not covered by the maps: {sorted(open_fo | open_so)}")
    if params is None:
        params = embed_params(proof, nums, levels)
    theory = params.theory()
    declared = ext(*[_apply_maps(f, nums, levels) for f in gamma])
    tree = _embed(proof, nums, levels, params, theory)
    tree = tree.with_conclusion(declared)
    tree.embed_params = params
    return tree


def _embed(proof: FiniteNode, nums: dict, levels: dict, params: EmbedParams,
           theory: TheoryId, depth: int = 0) -> ProofTree:
    rule = proof.rule
    sub = lambda f: _apply_maps(f, nums, levels)
    decl = ext(*[sub(f) for f in finitary_gamma(proof)])

    def kid(token) -> FiniteNode:
        try:
            return proof.children[token]
        except KeyError:
            raise LibraryError(f"missing premise {token} under {ca.rule_str(rule)}")

    if isinstance(rule, TrueRule):
        return FiniteNode(TrueRule(sub(rule.literal))).as_tree(theory, decl, "emb-true")
    if isinstance(rule, AxRule):
        return FiniteNode(AxRule.of(sub(rule.literal))).as_tree(theory, decl, "emb-ax")
    if isinstance(rule, AndRule):
        out = AndRule(sub(rule.formula))
        return prefix_tree(theory, decl, out, {
            "L": _embed(kid("L"), nums, levels, params, theory, depth + 1),
            "R": _embed(kid("R"), nums, levels, params, theory, depth + 1)},
            name="emb-and")
    if isinstance(rule, OrRule):
        out = OrRule(sub(rule.formula), rule.branch)
        return prefix_tree(theory, decl, out, {
            "top": _embed(kid("top"), nums, levels, params, theory, depth + 1)},
            name="emb-or")
    if isinstance(rule, ExistsNumRule):
        wit = rule.witness
        for name, value in sorted(nums.items()):
            wit = syntax.term_subst(wit, name, num(value))
        out = ExistsNumRule(sub(rule.formula), wit)
        return prefix_tree(theory, decl, out, {
            "top": _embed(kid("top"), nums, levels, params, theory, depth + 1)},
            name="emb-ex")
    if isinstance(rule, CutRule):
        out = CutRule(sub(rule.formula))
        return prefix_tree(theory, decl, out, {
            "top": _embed(kid("top"), nums, levels, params, theory, depth + 1),
            "bot": _embed(kid("bot"), nums, levels, params, theory, depth + 1)},
            name="emb-cut")
    if isinstance(rule, ForallNumRule):
        out = OmegaRule(sub(rule.formula))
        child = kid("top")

        def branch(nn: int) -> ProofTree:
            return _embed(child, {**nums, rule.witness: nn}, levels, params,
                          theory, depth + 1)

        return prefix_tree(theory, decl, out, branch, name="emb-omega")
    if isinstance(rule, ForallSetRule):
        f2 = sub(rule.formula)
        lw = witness_level(f2)
        wname = rule.witness.name
        out = ForallSetRule(f2, SecondOrderVar(wname, lw))
        return prefix_tree(theory, decl, out, {
            "top": _embed(kid("top"), nums, {**levels, wname: lw}, params,
                          theory, depth + 1)}, name="emb-all2")
    if isinstance(rule, ExistsSetFinRule):
        return _embed_exists2(proof, nums, levels, params, theory, depth)
    if isinstance(rule, IndRule):
        return _embed_ind(proof, nums, levels, params, theory, depth)
    raise LibraryError(f"cannot embed rule {ca.rule_str(rule)}")


def _embed_ind(proof: FiniteNode, nums, levels, params, theory, depth) -> ProofTree:
    rule: IndRule = proof.rule
    body = _apply_maps(rule.body, {k: v for k, v in nums.items() if k != rule.hole},
                       levels)
    t = rule.term
    for name, value in sorted(nums.items()):
        t = syntax.term_subst(t, name, num(value))
    nval = term_value(t)
    phi_at = lambda k: subst_num(body, rule.hole, num(k))
    step = syntax.ex1(rule.hole, syntax.conj(
        body, negate(subst_num(body, rule.hole, syntax.Succ(syntax.FVar(rule.hole))))))
    nphi0 = negate(phi_at(0))

    def stair(k: int) -> ProofTree:
        if k == 0:
            d0 = excluded_middle(phi_at(0), params.n, params.l)
            return d0.with_theory(theory).with_conclusion(ext(phi_at(0), nphi0))
        layer = syntax.conj(phi_at(k - 1), negate(phi_at(k)))
        em_k = excluded_middle(phi_at(k), params.n, params.l).with_theory(theory)
        both = prefix_tree(theory, ext(nphi0, step, layer, phi_at(k)),
                           AndRule(layer),
                           {"L": stair(k - 1), "R": em_k}, name=f"emb-ind-and{k}")
        return prefix_tree(theory, ext(nphi0, step, phi_at(k)),
                           ExistsNumRule(step, num(k - 1)), {"top": both},
                           name=f"emb-ind-{k}")

    return stair(nval)


def _embed_exists2(proof: FiniteNode, nums, levels, params, theory, depth) -> ProofTree:
    rule: ExistsSetFinRule = proof.rule
    f2 = _apply_maps(rule.formula, nums, levels)  # exists2 X phi'
    psi2 = SetAbstract(rule.witness.hole,
                       _apply_maps(rule.witness.body,
                                   {k: v for k, v in nums.items()
                                    if k != rule.witness.hole}, levels))
    cut_formula = inst2_abs(f2, psi2)  # phi'[psi']
    c = comp(f2)
    v = syntax.sv(f"@w{depth}", c.level)
    neg_root = inst2(negate(f2), v)  # ~phi'(v)
    fsub = substitution_fn(neg_root, v, psi2, params.n, params.l)
    flat = prefix_tree(theory, ext(f2, negate(cut_formula)),
                       OmegaFlatRule(v, f2), {"bot": fsub.body},
                       name="emb-ex2-flat")
    top = _embed(proof.children["top"], nums, levels, params, theory, depth + 1)
    decl = ext(*[_apply_maps(f, nums, levels) for f in finitary_gamma(proof)])
    return prefix_tree(theory, decl, CutRule(cut_formula),
                       {"top": top, "bot": flat}, name="emb-ex2")
