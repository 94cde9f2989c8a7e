"""Formula ASTs for asynchronous and synchronous hyperproperty specifications.

Covers parsing, printing, fragment classification (which decision procedure
applies), polarity-aware phase-formula extraction, and the rewrites used by
the reductions: phase substitution, dualization of the universal trajectory
modality, and the monadic unfolding of co-phase formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator


class FormulaError(ValueError):
    """Base class for formula-level diagnostics."""


class FormulaParseError(FormulaError):
    def __init__(self, message: str, pos: int, text: str):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{line}:{col}: {message}")


class UnboundVariableError(FormulaError):
    pass


class DuplicateQuantifierError(FormulaError):
    pass


class NestedModalityError(FormulaError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class TemporalFormula:
    def children(self) -> tuple:
        return ()


@dataclass(frozen=True)
class Const(TemporalFormula):
    value: bool


@dataclass(frozen=True)
class Atom(TemporalFormula):
    prop: str
    var: str


@dataclass(frozen=True)
class Not(TemporalFormula):
    sub: TemporalFormula

    def children(self):
        return (self.sub,)


@dataclass(frozen=True)
class _Binary(TemporalFormula):
    lhs: TemporalFormula
    rhs: TemporalFormula

    def children(self):
        return (self.lhs, self.rhs)


class And(_Binary):
    pass


class Or(_Binary):
    pass


class Implies(_Binary):
    pass


class Iff(_Binary):
    pass


@dataclass(frozen=True)
class Next(TemporalFormula):
    sub: TemporalFormula

    def children(self):
        return (self.sub,)


class Until(_Binary):
    pass


@dataclass(frozen=True)
class Globally(TemporalFormula):
    sub: TemporalFormula

    def children(self):
        return (self.sub,)


@dataclass(frozen=True)
class Eventually(TemporalFormula):
    sub: TemporalFormula

    def children(self):
        return (self.sub,)


TRUE = Const(True)
FALSE = Const(False)


def conj(parts: Iterable[TemporalFormula]) -> TemporalFormula:
    out = None
    for p in parts:
        if p == FALSE:
            return FALSE
        if p == TRUE:
            continue
        out = p if out is None else And(out, p)
    return out if out is not None else TRUE


def disj(parts: Iterable[TemporalFormula]) -> TemporalFormula:
    out = None
    for p in parts:
        if p == TRUE:
            return TRUE
        if p == FALSE:
            continue
        out = p if out is None else Or(out, p)
    return out if out is not None else FALSE


def subformulas(f: TemporalFormula) -> Iterator[TemporalFormula]:
    yield f
    for c in f.children():
        yield from subformulas(c)


def formula_vars(f: TemporalFormula) -> frozenset:
    return frozenset(g.var for g in subformulas(f) if isinstance(g, Atom))


def formula_props(f: TemporalFormula) -> frozenset:
    return frozenset(g.prop for g in subformulas(f) if isinstance(g, Atom))


def is_temporal_free(f: TemporalFormula) -> bool:
    return all(not isinstance(g, (Next, Until, Globally, Eventually)) for g in subformulas(f))


def is_next_free(f: TemporalFormula) -> bool:
    return all(not isinstance(g, Next) for g in subformulas(f))


@dataclass(frozen=True)
class AhltlFormula:
    """Quantifier prefix, one trajectory modality, temporal body."""

    prefix: tuple
    modality: str  # "E" | "A"
    body: TemporalFormula

    @property
    def vars(self) -> tuple:
        return tuple(v for _, v in self.prefix)


@dataclass(frozen=True)
class HyperltlFormula:
    prefix: tuple
    body: TemporalFormula

    @property
    def vars(self) -> tuple:
        return tuple(v for _, v in self.prefix)


# ---------------------------------------------------------------------------
# Parser

_KEYWORDS = {"forall", "exists", "true", "false", "E", "A", "U", "X", "G", "F"}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str):
        raise FormulaParseError(message, self.pos, self.text)

    def skip_ws(self):
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c == "#":
                nl = self.text.find("\n", self.pos)
                self.pos = len(self.text) if nl < 0 else nl
            elif c.isspace():
                self.pos += 1
            else:
                break

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def eat(self, s: str) -> bool:
        self.skip_ws()
        if self.text.startswith(s, self.pos):
            # keywords and identifiers must not run into each other
            if s[-1].isalnum():
                end = self.pos + len(s)
                if end < len(self.text) and (self.text[end].isalnum() or self.text[end] == "_"):
                    return False
            self.pos += len(s)
            return True
        return False

    def expect(self, s: str):
        if not self.eat(s):
            self.error(f"expected {s!r}")

    def ident(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] == "_"
        ):
            self.pos += 1
        if start == self.pos:
            self.error("expected an identifier")
        return self.text[start : self.pos]

    def parse(self):
        prefix = []
        while True:
            if self.eat("forall"):
                q = "forall"
            elif self.eat("exists"):
                q = "exists"
            else:
                break
            var = self.ident()
            if var in _KEYWORDS:
                self.error(f"{var!r} is reserved")
            self.expect(".")
            prefix.append((q, var))
        modality = None
        if self.eat("E"):
            modality = "E"
        elif self.eat("A"):
            modality = "A"
        if modality is not None:
            self.eat(".")  # the dot after the modality is optional
        body = self.parse_iff()
        self.skip_ws()
        if self.pos != len(self.text):
            self.error("trailing input after formula")
        return self.finish(tuple(prefix), modality, body)

    def finish(self, prefix, modality, body):
        seen = set()
        for _, v in prefix:
            if v in seen:
                raise DuplicateQuantifierError(f"trace variable {v!r} quantified twice")
            seen.add(v)
        for v in sorted(formula_vars(body)):
            if v not in seen:
                raise UnboundVariableError(f"unbound trace variable {v!r}")
        if modality is None:
            return HyperltlFormula(prefix, body)
        return AhltlFormula(prefix, modality, body)

    # precedence: unary > U > & > | > -> > <->
    def parse_iff(self):
        left = self.parse_implies()
        while self.eat("<->"):
            left = Iff(left, self.parse_implies())
        return left

    def parse_implies(self):
        left = self.parse_or()
        if self.eat("->"):
            return Implies(left, self.parse_implies())
        return left

    def parse_or(self):
        left = self.parse_and()
        while self.eat("|"):
            left = Or(left, self.parse_and())
        return left

    def parse_and(self):
        left = self.parse_until()
        while self.eat("&"):
            left = And(left, self.parse_until())
        return left

    def parse_until(self):
        left = self.parse_unary()
        if self.eat("U"):
            return Until(left, self.parse_until())
        return left

    def parse_unary(self):
        if self.eat("!"):
            return Not(self.parse_unary())
        if self.eat("X"):
            return Next(self.parse_unary())
        if self.eat("G"):
            return Globally(self.parse_unary())
        if self.eat("F"):
            return Eventually(self.parse_unary())
        return self.parse_atom()

    def parse_atom(self):
        if self.eat("("):
            body = self.parse_iff()
            self.expect(")")
            return body
        if self.eat("true"):
            return TRUE
        if self.eat("false"):
            return FALSE
        save = self.pos
        name = self.ident()
        if name in ("E", "A"):
            raise NestedModalityError("trajectory modalities cannot be nested")
        if name in _KEYWORDS:
            self.pos = save
            self.error(f"unexpected keyword {name!r}")
        self.expect("[")
        var = self.ident()
        self.expect("]")
        return Atom(name, var)


def parse_formula(text: str):
    """Parse an A-HLTL or synchronous HyperLTL formula."""
    return _Parser(text).parse()


_PREC = {
    Iff: 1,
    Implies: 2,
    Or: 3,
    And: 4,
    Until: 5,
    Not: 6,
    Next: 6,
    Globally: 6,
    Eventually: 6,
    Atom: 7,
    Const: 7,
}

_BINOP = {Iff: "<->", Implies: "->", Or: "|", And: "&", Until: "U"}


def print_body(f: TemporalFormula) -> str:
    def render(g, min_prec):
        prec = _PREC[type(g)]
        if isinstance(g, Const):
            s = "true" if g.value else "false"
        elif isinstance(g, Atom):
            s = f"{g.prop}[{g.var}]"
        elif isinstance(g, Not):
            s = "!" + render(g.sub, prec)
        elif isinstance(g, Next):
            s = "X " + render(g.sub, prec)
        elif isinstance(g, Globally):
            s = "G " + render(g.sub, prec)
        elif isinstance(g, Eventually):
            s = "F " + render(g.sub, prec)
        else:
            op = _BINOP[type(g)]
            if isinstance(g, (Implies, Until)):  # right associative
                s = f"{render(g.lhs, prec + 1)} {op} {render(g.rhs, prec)}"
            else:
                s = f"{render(g.lhs, prec)} {op} {render(g.rhs, prec + 1)}"
        return f"({s})" if prec < min_prec else s

    return render(f, 0)


def print_formula(phi) -> str:
    parts = [f"{q} {v}." for q, v in phi.prefix]
    if isinstance(phi, AhltlFormula):
        parts.append(f"{phi.modality}.")
    parts.append(print_body(phi.body))
    return " ".join(parts)


# ---------------------------------------------------------------------------
# Negation pushing and modality duality


def negate(f: TemporalFormula) -> TemporalFormula:
    """Negate and push inward; dual temporal operators, double negations gone.

    Negated untils and temporal-level iffs keep an explicit outer negation
    (the syntax has no release operator); those stay classifiable.
    """
    if isinstance(f, Const):
        return Const(not f.value)
    if isinstance(f, Not):
        return f.sub
    if isinstance(f, And):
        return Or(negate(f.lhs), negate(f.rhs))
    if isinstance(f, Or):
        return And(negate(f.lhs), negate(f.rhs))
    if isinstance(f, Implies):
        return And(f.lhs, negate(f.rhs))
    if isinstance(f, Next):
        return Next(negate(f.sub))
    if isinstance(f, Globally):
        return Eventually(negate(f.sub))
    if isinstance(f, Eventually):
        return Globally(negate(f.sub))
    return Not(f)  # atoms, iffs, untils


def nnf(f: TemporalFormula) -> TemporalFormula:
    """Push negations inward (implications unfolded, equivalences kept)."""
    if isinstance(f, Not):
        return negate(nnf(f.sub))
    if isinstance(f, (Const, Atom)):
        return f
    if isinstance(f, Implies):
        return Or(negate(nnf(f.lhs)), nnf(f.rhs))
    if isinstance(f, (Next, Globally, Eventually)):
        return type(f)(nnf(f.sub))
    return type(f)(nnf(f.lhs), nnf(f.rhs))


def negate_to_positive(phi: AhltlFormula) -> AhltlFormula:
    """Dualize a universal-trajectory formula into its existential refutation form."""
    if phi.modality != "A":
        raise FormulaError("dualization applies to the universal trajectory modality only")
    dual = {"forall": "exists", "exists": "forall"}
    prefix = tuple((dual[q], v) for q, v in phi.prefix)
    return AhltlFormula(prefix, "E", negate(phi.body))


# ---------------------------------------------------------------------------
# Classification


@dataclass(frozen=True)
class PhaseSpec:
    """One atomic phase constraint: props in ``props`` agree on lhs and rhs."""

    lhs: str
    rhs: str
    props: frozenset

    def __post_init__(self):
        if self.lhs == self.rhs:
            raise FormulaError("atomic phase formulas relate two different trace variables")
        if not self.props:
            raise FormulaError("atomic phase formulas need at least one proposition")

    def formula(self) -> TemporalFormula:
        return conj(Iff(Atom(p, self.lhs), Atom(p, self.rhs)) for p in sorted(self.props))


class FormulaClass(Enum):
    SIMPLE_ADMISSIBLE = "SimpleAdmissible"
    ADMISSIBLE = "Admissible"
    CO_ADMISSIBLE = "CoAdmissible"
    STATE_MONADIC_ONLY = "StateMonadicOnly"
    UNTIL_PHASE = "UntilPhase"
    NOT_ADMISSIBLE = "NotAdmissible"


@dataclass(frozen=True)
class AdmissibilityReport:
    klass: FormulaClass
    phase: tuple = ()  # PhaseSpecs of the (co-)phase part, merged
    polarity: str | None = None  # polarity of the raw phase occurrence
    monadic_parts: tuple = ()
    state_parts: tuple = ()
    reason: str | None = None
    phase_leaves: tuple = ()  # AST nodes to substitute, identity-matched

    @property
    def is_admissible(self) -> bool:
        return self.klass in (
            FormulaClass.SIMPLE_ADMISSIBLE,
            FormulaClass.ADMISSIBLE,
            FormulaClass.STATE_MONADIC_ONLY,
        )

    @property
    def shared_props(self) -> bool:
        return len({s.props for s in self.phase}) <= 1


def _phase_atoms(f: TemporalFormula) -> list | None:
    """Flatten a conjunction of positive single-prop agreement atoms, or None."""
    if isinstance(f, And):
        l = _phase_atoms(f.lhs)
        r = _phase_atoms(f.rhs)
        return None if l is None or r is None else l + r
    if (
        isinstance(f, Iff)
        and isinstance(f.lhs, Atom)
        and isinstance(f.rhs, Atom)
        and f.lhs.prop == f.rhs.prop
        and f.lhs.var != f.rhs.var
    ):
        return [(f.lhs.var, f.rhs.var, f.lhs.prop)]
    return None


def _group_specs(atoms: list) -> tuple:
    order: list = []
    props: dict = {}
    for (l, r, p) in atoms:
        if (l, r) not in props:
            props[(l, r)] = set()
            order.append((l, r))
        props[(l, r)].add(p)
    return tuple(PhaseSpec(l, r, frozenset(props[(l, r)])) for (l, r) in order)


def match_phase(f: TemporalFormula) -> tuple | None:
    """Match an invariant of cross-trace agreements; return its PhaseSpecs."""
    if isinstance(f, Globally):
        atoms = _phase_atoms(f.sub)
        if atoms:
            return _group_specs(atoms)
    return None


def match_cophase(f: TemporalFormula) -> tuple | None:
    """Match the negation of a phase conjunction under an eventuality."""
    if not isinstance(f, Eventually):
        return None
    sub = f.sub
    if isinstance(sub, Not):
        atoms = _phase_atoms(sub.sub)
        if atoms:
            return _group_specs(atoms)
    # NNF variant: disjunction of negated agreement atoms
    def neg_atoms(g):
        if isinstance(g, Or):
            l = neg_atoms(g.lhs)
            r = neg_atoms(g.rhs)
            return None if l is None or r is None else l + r
        if isinstance(g, Not):
            a = _phase_atoms(g.sub)
            if a is not None and len(a) == 1:
                return a
        return None

    atoms = neg_atoms(sub)
    if atoms:
        return _group_specs(atoms)
    return None


def classify(body: TemporalFormula, prefix=()) -> AdmissibilityReport:
    """Decompose a body into state, monadic, and phase parts and classify it.

    ``NotAdmissible`` is a verdict, not an error; ``reason`` explains it.
    """
    leaves: list = []  # (node, polarity, kind, payload)

    def walk(node, pol):
        if isinstance(node, Const):
            return
        if isinstance(node, (And, Or)):
            walk(node.lhs, pol)
            walk(node.rhs, pol)
            return
        if isinstance(node, Not):
            walk(node.sub, -pol if pol != 0 else 0)
            return
        if isinstance(node, Implies):
            walk(node.lhs, -pol if pol != 0 else 0)
            walk(node.rhs, pol)
            return
        if isinstance(node, Iff) and not is_temporal_free(node):
            walk(node.lhs, 0)
            walk(node.rhs, 0)
            return
        # leaf
        if is_temporal_free(node):
            leaves.append((node, pol, "state", None))
            return
        specs = match_phase(node)
        if specs is not None:
            leaves.append((node, pol, "phase", specs))
            return
        specs = match_cophase(node)
        if specs is not None:
            leaves.append((node, pol, "cophase", specs))
            return
        vset = formula_vars(node)
        if len(vset) <= 1 and is_next_free(node):
            leaves.append((node, pol, "monadic", None))
            return
        leaves.append((node, pol, "other", None))

    # dedicated shape: a local guard holding until the phase formula
    if isinstance(body, Until) and is_temporal_free(body.lhs):
        specs = match_phase(body.rhs)
        if specs is not None:
            return AdmissibilityReport(
                klass=FormulaClass.UNTIL_PHASE,
                phase=specs,
                polarity="positive",
                state_parts=(body.lhs,),
                phase_leaves=(body.rhs,),
            )

    walk(body, 1)

    state_parts = tuple(n for (n, _, k, _) in leaves if k == "state")
    monadic_parts = tuple(n for (n, _, k, _) in leaves if k == "monadic")
    others = [n for (n, _, k, _) in leaves if k == "other"]
    if others:
        return AdmissibilityReport(
            klass=FormulaClass.NOT_ADMISSIBLE,
            monadic_parts=monadic_parts,
            state_parts=state_parts,
            reason=f"multi-trace temporal subformula is not a phase invariant: {print_body(others[0])}",
        )

    phasey = [(n, p, k, specs) for (n, p, k, specs) in leaves if k in ("phase", "cophase")]
    if not phasey:
        return AdmissibilityReport(
            klass=FormulaClass.STATE_MONADIC_ONLY,
            monadic_parts=monadic_parts,
            state_parts=state_parts,
        )
    if any(p == 0 for (_, p, _, _) in phasey):
        return AdmissibilityReport(
            klass=FormulaClass.NOT_ADMISSIBLE,
            monadic_parts=monadic_parts,
            state_parts=state_parts,
            reason="phase formula occurs under an equivalence (both polarities)",
        )

    # net polarity: a negated phase is a co-phase and vice versa
    net = [(n, k if p > 0 else ("cophase" if k == "phase" else "phase"), p, specs)
           for (n, p, k, specs) in phasey]
    net_kinds = {k for (_, k, _, _) in net}
    if net_kinds == {"phase"}:
        nodes = [n for (n, _, _, _) in net]
        raw_positive = [p for (_, _, p, _) in net]
        if len(nodes) > 1 and any(p < 0 for p in raw_positive):
            return AdmissibilityReport(
                klass=FormulaClass.NOT_ADMISSIBLE,
                monadic_parts=monadic_parts,
                state_parts=state_parts,
                reason="several phase invariants in mixed polarity cannot merge",
            )
        if len(nodes) > 1 and not _conjunctively_related(body, nodes):
            return AdmissibilityReport(
                klass=FormulaClass.NOT_ADMISSIBLE,
                monadic_parts=monadic_parts,
                state_parts=state_parts,
                reason="several phase invariants are not conjoined and cannot merge",
            )
        specs: list = []
        for (_, _, _, s) in net:
            specs.extend(s)
        merged = _merge_specs(specs)
        klass = (
            FormulaClass.SIMPLE_ADMISSIBLE
            if len({sp.props for sp in merged}) == 1
            else FormulaClass.ADMISSIBLE
        )
        return AdmissibilityReport(
            klass=klass,
            phase=merged,
            polarity="positive" if raw_positive[0] > 0 else "negative",
            monadic_parts=monadic_parts,
            state_parts=state_parts,
            phase_leaves=tuple(nodes),
        )
    if net_kinds == {"cophase"} and len(net) == 1:
        n, _, p, specs = net[0]
        return AdmissibilityReport(
            klass=FormulaClass.CO_ADMISSIBLE,
            phase=tuple(specs),
            polarity="positive" if p > 0 else "negative",
            monadic_parts=monadic_parts,
            state_parts=state_parts,
            phase_leaves=(n,),
        )
    return AdmissibilityReport(
        klass=FormulaClass.NOT_ADMISSIBLE,
        monadic_parts=monadic_parts,
        state_parts=state_parts,
        reason="more than one independent phase-like subformula",
    )


def _merge_specs(specs: list) -> tuple:
    return _group_specs([(s.lhs, s.rhs, p) for s in specs for p in sorted(s.props)])


def _conjunctively_related(body: TemporalFormula, nodes: list) -> bool:
    """Can the leaves merge into one invariant?  They must share a least
    common ancestor from which every path down to a leaf crosses only
    conjunctions (associativity then rewrites them into a single invariant).
    """
    ids = {id(n) for n in nodes}

    def count(node) -> int:
        if id(node) in ids:
            return 1
        return sum(count(c) for c in node.children())

    def lca(node):
        if id(node) in ids:
            return node
        holding = [c for c in node.children() if count(c) > 0]
        if len(holding) == 1 and count(holding[0]) == len(nodes):
            return lca(holding[0])
        return node

    def only_ands_above(node) -> bool:
        if id(node) in ids:
            return True
        if count(node) == 0:
            return True
        if not isinstance(node, And):
            return False
        return all(only_ands_above(c) for c in node.children())

    return only_ands_above(lca(body))


def substitute_phase(psi: TemporalFormula, xi: TemporalFormula,
                     report: AdmissibilityReport | None = None) -> TemporalFormula:
    """Replace the unique phase occurrence by ``xi``; other nodes untouched.

    When the phase formula was merged from several conjoined invariants, the
    first carries ``xi`` and the rest collapse to ``true``.
    """
    if report is None:
        report = classify(psi)
    if not report.phase_leaves:
        raise FormulaError("formula has no phase occurrence to substitute")
    first = id(report.phase_leaves[0])
    rest = {id(n) for n in report.phase_leaves[1:]}

    def rebuild(node):
        if id(node) == first:
            return xi
        if id(node) in rest:
            return TRUE
        if isinstance(node, (Const, Atom)):
            return node
        if isinstance(node, Not):
            return Not(rebuild(node.sub))
        if isinstance(node, Next):
            return Next(rebuild(node.sub))
        if isinstance(node, Globally):
            return Globally(rebuild(node.sub))
        if isinstance(node, Eventually):
            return Eventually(rebuild(node.sub))
        return type(node)(rebuild(node.lhs), rebuild(node.rhs))

    return rebuild(psi)


def cophase_to_monadic(specs: Iterable[PhaseSpec]) -> TemporalFormula:
    """Unfold a violated agreement into per-trace eventualities.

    Each proposition of each atomic constraint contributes the two ways its
    values can differ somewhere along the two traces.
    """
    specs = tuple(specs)
    if not specs:
        raise FormulaError("co-phase unfolding needs at least one atomic constraint")
    parts = []
    for s in specs:
        for p in sorted(s.props):
            li, ri = Atom(p, s.lhs), Atom(p, s.rhs)
            parts.append(
                Or(
                    And(Eventually(li), Eventually(Not(ri))),
                    And(Eventually(Not(li)), Eventually(ri)),
                )
            )
    return disj(parts)
