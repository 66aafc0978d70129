"""The cut-elimination operator suite: inversions, eliminations, the
corecursive Reduce, and full cut elimination.

Every operator is a locally defined function over Read-free inputs built from
a small machine. Reduce copies everything except cuts of the target rank;
those dispatch into the matching elimination, whose inputs are virtual trees
generated by further Reduce machines (composition bubbles the virtual inputs'
reads up to the real input and interposes Rep where two reads would become
consecutive)."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from . import calculus as ca
from . import ordinals as o
from . import syntax
from .calculus import (
    Address,
    AndRule,
    AxRule,
    CutOmegaFlatRule,
    CutRule,
    EMPTY_ADDR,
    ExistsNumRule,
    ForallSetRule,
    NoRead,
    OmegaFlatRule,
    OmegaRule,
    OrRule,
    PremiseIndex,
    Rule,
    Sequent,
    TrueRule,
    WithCuts,
    conclusion,
    ext,
    seq,
)
from .localfn import Emit, LocalFunction, Machine, Need, RootSpec, apply, lift, machine_function
from .prooftree import ProofTree
from .syntax import Formula, comp, eval_literal, inst1, inst2, negate, rank, witness_level

SILENT_CAP = 512


class CutElimError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Inversions (single input port; the port index is parameterized so the same
# machines serve standalone functions and elimination sub-regions).


@dataclass(frozen=True)
class _Leaf(Machine):
    rule: Rule
    term: Optional[o.OrdinalTerm] = None

    def poll(self):
        return Emit(self.rule)

    def bound_term(self):
        return self.term


@dataclass(frozen=True)
class _InvRead(Machine):
    """Copy everything; on the trigger rule either stop (replacement leaf) or
    keep reading behind the premise named by the trigger."""

    root: Sequent
    pos: Address
    port: int = 0

    def trigger(self, rule: Rule):
        """None, or ('leaf', rule) / ('skip', token)."""
        raise NotImplementedError

    def advanced(self, pos: Address) -> "_InvRead":
        return replace(self, pos=pos)

    def poll(self):
        return Need(self.port, self.pos, frozenset())

    def on_read(self, branch: Rule) -> Machine:
        hit = self.trigger(branch)
        if hit is None:
            return _InvCopy(self, branch)
        kind, payload = hit
        if kind == "leaf":
            return _Leaf(payload, self.bound_term())
        return self.advanced(self.pos + (PremiseIndex(branch, payload),))

    def port_term(self):
        return o.tag_var(self.root, self.pos)

    def combine(self, terms):
        return terms[self.port] if len(terms) > self.port else terms[0]

    def bound_term(self):
        return self.port_term()


@dataclass(frozen=True)
class _InvCopy(Machine):
    reader: _InvRead
    rule: Rule

    def poll(self):
        return Emit(self.rule)

    def on_descend(self, token) -> Machine:
        return self.reader.advanced(
            self.reader.pos + (PremiseIndex(self.rule, token),))

    def port_term(self):
        return self.reader.port_term()

    def combine(self, terms):
        return self.reader.combine(terms)

    def bound_term(self):
        return self.reader.bound_term()


@dataclass(frozen=True)
class _InvFalse(_InvRead):
    eta: Formula = None

    def trigger(self, rule: Rule):
        if rule == AxRule.of(self.eta):
            return ("leaf", TrueRule(negate(self.eta)))
        return None


def inverse_false_literal(eta: Formula, n: int, l: int, r: int) -> LocalFunction:
    if not syntax.is_closed(eta) or not syntax.is_literal(eta) \
            or isinstance(eta, syntax.SetLit):
        raise CutElimError("inverse needs a closed primitive literal")
    if eval_literal(eta):
        raise CutElimError(f"literal {syntax.render(eta)} is true")
    spec = RootSpec(seq(eta), NoRead(n, l, r))
    return machine_function(
        f"inv-false[{syntax.render(eta)}]", WithCuts(n, l, n, l, r), (spec,),
        _InvFalse(seq(eta), EMPTY_ADDR, 0, eta), ext())


@dataclass(frozen=True)
class _InvConj(_InvRead):
    formula: Formula = None  # the conjunction
    branch: str = "L"

    def trigger(self, rule: Rule):
        if rule == AndRule(self.formula):
            return ("skip", self.branch)
        return None


def inverse_conj(left: Formula, right: Formula, branch: str,
                 n: int, l: int, r: int) -> LocalFunction:
    f = syntax.conj(left, right)
    part = left if branch == "L" else right
    spec = RootSpec(seq(f), NoRead(n, l, r))
    return machine_function(
        f"inv-conj[{branch}]", WithCuts(n, l, n, l, r), (spec,),
        _InvConj(seq(f), EMPTY_ADDR, 0, f, branch), ext(part))


@dataclass(frozen=True)
class _InvForall(_InvRead):
    formula: Formula = None  # the universal formula
    witness: int = 0

    def trigger(self, rule: Rule):
        if rule == OmegaRule(self.formula):
            return ("skip", self.witness)
        return None


def inverse_forall(phi: Formula, witness: int, n: int, l: int, r: int) -> LocalFunction:
    if not isinstance(phi, syntax.ForallN):
        raise CutElimError("inverse-forall needs a universal formula")
    spec = RootSpec(seq(phi), NoRead(n, l, r))
    return machine_function(
        f"inv-forall[{witness}]", WithCuts(n, l, n, l, r), (spec,),
        _InvForall(seq(phi), EMPTY_ADDR, 0, phi, witness), ext(inst1(phi, witness)))


# ---------------------------------------------------------------------------
# Eliminations (two input ports).


@dataclass(frozen=True)
class _ElimCopy(Machine):
    reader: Machine
    rule: Rule
    advance_port: int

    def poll(self):
        return Emit(self.rule)

    def on_descend(self, token) -> Machine:
        return self.reader.advance(self.advance_port,
                                   (PremiseIndex(self.rule, token),))

    def port_term(self):
        return self.reader.port_term()

    def combine(self, terms):
        return self.reader.combine(terms)

    def bound_term(self):
        return self.reader.bound_term()


@dataclass(frozen=True)
class _CutSplit(Machine):
    """Emit a Cut; the top branch resumes reading a port, the bottom branch
    becomes an inversion region on the other port."""

    cut: Formula
    resume: Machine
    inv: Machine

    def poll(self):
        return Emit(CutRule(self.cut))

    def on_descend(self, token) -> Machine:
        return self.resume if token == "top" else self.inv

    def combine(self, terms):
        return self.resume.combine(terms)

    def bound_term(self):
        return self.resume.bound_term()


@dataclass(frozen=True)
class _ElimTwoPort(Machine):
    roots: tuple  # (sequent, sequent)
    ports_pos: tuple = (EMPTY_ADDR, EMPTY_ADDR)
    active: int = 0

    def advance(self, port: int, delta: tuple) -> Machine:
        pos = list(self.ports_pos)
        pos[port] = pos[port] + delta
        return replace(self, ports_pos=tuple(pos))

    def poll(self):
        return Need(self.active, self.ports_pos[self.active], frozenset())

    def port_term(self):
        return [o.tag_var(self.roots[i], self.ports_pos[i]) for i in (0, 1)]

    def bound_term(self):
        return self.combine(self.port_term())


@dataclass(frozen=True)
class _ElimDisj(_ElimTwoPort):
    """Port 0 proves the disjunction, port 1 its negation (a conjunction)."""

    left: Formula = None
    right: Formula = None

    def formula(self):
        return syntax.disj(self.left, self.right)

    def on_read(self, branch: Rule) -> Machine:
        if isinstance(branch, OrRule) and branch.formula == self.formula():
            part = self.left if branch.branch == "L" else self.right
            resume = self.advance(0, (PremiseIndex(branch, "top"),))
            inv = _InvConj(self.roots[1], self.ports_pos[1], 1,
                           negate(self.formula()), branch.branch)
            return _CutSplit(part, resume, inv)
        return _ElimCopy(self, branch, 0)

    def combine(self, terms):
        return o.Plus((terms[1], terms[0]))


def elim_disj(left: Formula, right: Formula, n: int, l: int, r: int) -> LocalFunction:
    f = syntax.disj(left, right)
    specs = (RootSpec(seq(f), NoRead(n, l, r)),
             RootSpec(seq(negate(f)), NoRead(n, l, r)))
    m = _ElimDisj((seq(f), seq(negate(f))), left=left, right=right)
    return machine_function(f"elim-disj", WithCuts(n, l, n, l, r), specs, m, ext())


@dataclass(frozen=True)
class _ElimExists(_ElimTwoPort):
    """Port 0 proves the existential, port 1 the universal negation."""

    formula: Formula = None  # exists x phi

    def on_read(self, branch: Rule) -> Machine:
        if isinstance(branch, ExistsNumRule) and branch.formula == self.formula:
            inst = inst1(self.formula, branch.witness)
            resume = self.advance(0, (PremiseIndex(branch, "top"),))
            inv = _InvForall(self.roots[1], self.ports_pos[1], 1,
                             negate(self.formula),
                             syntax.term_value(branch.witness))
            return _CutSplit(inst, resume, inv)
        return _ElimCopy(self, branch, 0)

    def combine(self, terms):
        return o.Plus((terms[1], terms[0]))


def elim_exists(phi: Formula, n: int, l: int, r: int) -> LocalFunction:
    if not isinstance(phi, syntax.ExistsN):
        raise CutElimError("elim-exists needs an existential formula")
    specs = (RootSpec(seq(phi), NoRead(n, l, r)),
             RootSpec(seq(negate(phi)), NoRead(n, l, r)))
    m = _ElimExists((seq(phi), seq(negate(phi))), formula=phi)
    return machine_function("elim-exists", WithCuts(n, l, n, l, r), specs, m, ext())


@dataclass(frozen=True)
class _ElimSet(_ElimTwoPort):
    """Port 0 proves X^l m, port 1 its negation; on the axiom switch sides
    and copy the negative proof whole."""

    literal: Formula = None  # the positive set literal

    def on_read(self, branch: Rule) -> Machine:
        if self.active == 0 and branch == AxRule.of(self.literal):
            return replace(self, active=1)
        return _ElimCopy(self, branch, self.active)

    def combine(self, terms):
        return o.NatSum((terms[0], terms[1]))


def elim_set_literal(literal: Formula, n: int, l: int, r: int) -> LocalFunction:
    if not isinstance(literal, syntax.SetLit) or not literal.positive:
        raise CutElimError("elim-set needs a positive set literal")
    specs = (RootSpec(seq(literal), NoRead(n, l, r)),
             RootSpec(seq(negate(literal)), NoRead(n, l, r)))
    m = _ElimSet((seq(literal), seq(negate(literal))), literal=literal)
    return machine_function("elim-set", WithCuts(n, l, n, l, r), specs, m, ext())


@dataclass(frozen=True)
class _ElimQ2(_ElimTwoPort):
    """Port 0 proves forall2 X phi, port 1 exists2 X ~phi. Matching the
    forall-introduction freezes its position and switches to the existential
    side; matching the flat-Omega there emits the partner cut and resumes
    both sides."""

    forall_f: Formula = None
    matched: object = None  # the matched forall2 rule, once seen

    def exists_f(self):
        return negate(self.forall_f)

    def on_read(self, branch: Rule) -> Machine:
        if self.active == 0:
            if isinstance(branch, ForallSetRule) and branch.formula == self.forall_f:
                return replace(self, active=1, matched=branch)
            return _ElimCopy(self, branch, 0)
        if isinstance(branch, OmegaFlatRule) and branch.formula == self.exists_f():
            z = self.matched.witness if self.matched is not None else \
                syntax.SecondOrderVar(f"@z{len(self.ports_pos[1])}",
                                      comp(self.exists_f()).level)
            cut_rule = CutOmegaFlatRule(z, branch.var, self.exists_f())
            top = replace(self, active=0, matched=None)
            if self.matched is not None:
                top = top.advance(0, (PremiseIndex(self.matched, "top"),))
            bot = replace(self, active=1, matched=self.matched).advance(
                1, (PremiseIndex(branch, "bot"),))
            return _EmitCutOmega(cut_rule, top, bot)
        return _ElimCopy(self, branch, 1)

    def combine(self, terms):
        return o.NatSum((terms[0], terms[1]))


@dataclass(frozen=True)
class _EmitCutOmega(Machine):
    rule: Rule
    top: Machine
    bot: Machine

    def poll(self):
        return Emit(self.rule)

    def on_descend(self, token) -> Machine:
        return self.top if token == "top" else self.bot

    def combine(self, terms):
        return self.top.combine(terms)

    def bound_term(self):
        return self.top.bound_term()


def elim_second_order(body: Formula, n: int, l: int, r: int) -> LocalFunction:
    """body is the forall2 formula; ports prove it and its negation."""
    if not isinstance(body, syntax.ForallS):
        raise CutElimError("elim-second-order needs a forall2 formula")
    f_ex = negate(body)
    specs = (RootSpec(seq(body), NoRead(n, l, r)),
             RootSpec(seq(f_ex), NoRead(n, l, r)))
    m = _ElimQ2((seq(body), seq(f_ex)), forall_f=body)
    return machine_function("elim-q2", WithCuts(n, l, n, l, r), specs, m, ext())


# ---------------------------------------------------------------------------
# Composition: an operator machine over virtual inputs generated by machines.


@dataclass(frozen=True)
class _Port:
    machine: Machine
    extra_scope: Sequent
    pos: Address = EMPTY_ADDR  # virtual position of the last emission
    emitted: Optional[Rule] = None

    def request(self, pos2: Address):
        """Bring the virtual tree to pos2 and report its rule; returns
        ('rule', rule, port) or ('need', need, port)."""
        port = self
        if port.emitted is not None:
            if pos2 == port.pos:
                return ("rule", port.emitted, port)
            if len(pos2) == len(port.pos) + 1 and pos2[:-1] == port.pos \
                    and pos2[-1].rule == port.emitted:
                port = _Port(port.machine.on_descend(pos2[-1].token),
                             port.extra_scope, pos2, None)
            else:
                raise CutElimError(
                    "composition: non-monotone access to a virtual input")
        elif pos2 != port.pos:
            raise CutElimError("composition: virtual position out of step")
        p = port.machine.poll()
        if isinstance(p, Emit):
            return ("rule", p.rule, replace(port, emitted=p.rule))
        return ("need", p, port)


@dataclass(frozen=True)
class _Composed(Machine):
    outer: Machine
    ports: tuple  # of _Port
    pending: Optional[int] = None  # port whose inner machine awaits a read

    def poll(self):
        p = self.outer.poll()
        if isinstance(p, Emit):
            return p
        port = self.ports[p.root]
        if self.pending is not None:
            inner = port.machine.poll()
            return Need(0, inner.position, inner.scope | port.extra_scope)
        raise CutElimError("composition not normalized")

    def on_read(self, branch: Rule) -> Machine:
        if self.pending is None:
            raise CutElimError("composition: unexpected read")
        i = self.pending
        port = self.ports[i]
        ports = _replace_port(self.ports, i, replace(port, machine=port.machine.on_read(branch)))
        return _compose(self.outer, ports)

    def on_descend(self, token) -> Machine:
        p = self.outer.poll()
        if not isinstance(p, Emit):
            raise CutElimError("composition: descend before an emission")
        return _compose(self.outer.on_descend(token), self.ports)

    def combine(self, terms):
        return self.outer.combine(terms)

    def bound_term(self):
        return self.outer.combine([pt.machine.bound_term() for pt in self.ports])


def _replace_port(ports: tuple, i: int, new: _Port) -> tuple:
    return tuple(new if j == i else p for j, p in enumerate(ports))


def _compose(outer: Machine, ports: tuple) -> Machine:
    """Normalize: feed virtual emissions to the outer machine until it emits
    or a virtual input needs the real tree."""
    for _ in range(SILENT_CAP):
        p = outer.poll()
        if isinstance(p, Emit):
            return _Composed(outer, ports)
        i = p.root
        status, payload, port2 = ports[i].request(p.position)
        ports = _replace_port(ports, i, port2)
        if status == "need":
            return _Composed(outer, ports, pending=i)
        outer = outer.on_read(payload)
    raise CutElimError(f"composition exceeded {SILENT_CAP} silent steps; "
                       "possible divergence")


# ---------------------------------------------------------------------------
# Reduce.


@dataclass(frozen=True)
class _RedRead(Machine):
    rank: int
    pos: Address

    def poll(self):
        return Need(0, self.pos, frozenset())

    def on_read(self, branch: Rule) -> Machine:
        if isinstance(branch, CutRule) and rank(branch.formula) == self.rank:
            return _dispatch_cut(self.rank, self.pos, branch)
        return _RedCopy(self.rank, self.pos, branch)

    def bound_term(self):
        return o.OmegaPow(o.tag_var(frozenset(), self.pos))

    def combine(self, terms):
        return terms[0]


@dataclass(frozen=True)
class _RedCopy(Machine):
    rank: int
    pos: Address
    rule: Rule

    def poll(self):
        return Emit(self.rule)

    def on_descend(self, token) -> Machine:
        return _RedRead(self.rank, self.pos + (PremiseIndex(self.rule, token),))

    def bound_term(self):
        return o.OmegaPow(o.tag_var(frozenset(), self.pos))

    def combine(self, terms):
        return terms[0]


def _dispatch_cut(r: int, pos: Address, cut: CutRule) -> Machine:
    phi = cut.formula
    top_pos = pos + (PremiseIndex(cut, "top"),)
    bot_pos = pos + (PremiseIndex(cut, "bot"),)
    red_top = _RedRead(r, top_pos)
    red_bot = _RedRead(r, bot_pos)

    def port(machine, scope_formula):
        return _Port(machine, seq(scope_formula))

    if isinstance(phi, syntax.PrimLit):
        if eval_literal(phi):
            inv = _InvFalse(seq(negate(phi)), EMPTY_ADDR, 0, negate(phi))
            return _compose(inv, (port(red_bot, negate(phi)),))
        inv = _InvFalse(seq(phi), EMPTY_ADDR, 0, phi)
        return _compose(inv, (port(red_top, phi),))
    if isinstance(phi, syntax.SetLit):
        lit = phi if phi.positive else negate(phi)
        m = _ElimSet((seq(lit), seq(negate(lit))), literal=lit)
        if phi.positive:
            return _compose(m, (port(red_top, lit), port(red_bot, negate(lit))))
        return _compose(m, (port(red_bot, lit), port(red_top, negate(lit))))
    if isinstance(phi, (syntax.And, syntax.Or)):
        disj_f = phi if isinstance(phi, syntax.Or) else negate(phi)
        m = _ElimDisj((seq(disj_f), seq(negate(disj_f))),
                      left=disj_f.left, right=disj_f.right)
        if isinstance(phi, syntax.Or):
            return _compose(m, (port(red_top, disj_f), port(red_bot, negate(disj_f))))
        return _compose(m, (port(red_bot, disj_f), port(red_top, negate(disj_f))))
    if isinstance(phi, (syntax.ForallN, syntax.ExistsN)):
        ex_f = phi if isinstance(phi, syntax.ExistsN) else negate(phi)
        m = _ElimExists((seq(ex_f), seq(negate(ex_f))), formula=ex_f)
        if isinstance(phi, syntax.ExistsN):
            return _compose(m, (port(red_top, ex_f), port(red_bot, negate(ex_f))))
        return _compose(m, (port(red_bot, ex_f), port(red_top, negate(ex_f))))
    if isinstance(phi, (syntax.ForallS, syntax.ExistsS)):
        fa_f = phi if isinstance(phi, syntax.ForallS) else negate(phi)
        m = _ElimQ2((seq(fa_f), seq(negate(fa_f))), forall_f=fa_f)
        if isinstance(phi, syntax.ForallS):
            return _compose(m, (port(red_top, fa_f), port(red_bot, negate(fa_f))))
        return _compose(m, (port(red_bot, fa_f), port(red_top, negate(fa_f))))
    raise CutElimError(f"cannot dispatch cut over {syntax.render(phi)}")


def reduce(r: int, n: int, l: int) -> LocalFunction:
    """Remove cuts of exactly rank r: everything else is copied; matching
    cuts dispatch into the elimination for the cut formula's shape, the two
    cut premises serving as its inputs."""
    spec = RootSpec(frozenset(), NoRead(n, l, r + 1))
    return machine_function(f"reduce[{r}]", WithCuts(n, l, n, l, r), (spec,),
                            _RedRead(r, EMPTY_ADDR), ext())


def eliminate_all_cuts(d: ProofTree, r: Optional[int] = None) -> ProofTree:
    """Compose lifted Reduce passes from the top rank down; the declared
    conclusion is preserved."""
    theory = d.theory
    if not isinstance(theory, WithCuts):
        raise CutElimError("input must declare a cut theory")
    if r is None:
        r = theory.r
    n, l = theory.n, theory.l
    out = d
    for i in reversed(range(r)):
        fn = reduce(i, n, l)
        lifted = lift(fn, out.theory, codomain=WithCuts(n, l, n, l, i))
        out = apply(lifted, out, declared=out.declared)
        out.name = f"reduce{i}({d.name})"
    if r == 0:
        return out
    return out


def reduce_bounds(fn: LocalFunction) -> o.BoundAssignment:
    return o.operator_bounds(fn)
