"""Büchi automata over tuples of trace letters.

The synchronous decision backend is built from: a tableau translation of
temporal bodies, products binding trace variables to model paths,
projection, Ramsey-style complementation over a concrete alphabet, and a
profile-based trace-containment check that decides one quantifier
alternation without constructing a complement automaton.

Letters are tuples of proposition sets, one component per open trace
variable.  Transition guards are conjunctions of literals
``(var, prop, polarity)``; the empty guard is ``true``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .formula import (
    And,
    Atom,
    Const,
    Eventually,
    Globally,
    Iff,
    Implies,
    Next,
    Not,
    Or,
    TemporalFormula,
    Until,
)
from .graphs import ResourceCap, bfs_edges, find_accepting_lasso
from .model import KripkeStructure, Lasso

INIT = "<init>"


@dataclass(frozen=True)
class BuchiAutomaton:
    vars: tuple
    states: tuple
    initial: frozenset
    accepting: frozenset
    transitions: dict = field(hash=False)  # state -> tuple[(guard, dst)]
    alphabet: tuple | None = None

    @property
    def size(self) -> int:
        return len(self.states)

    def edges(self):
        for src, outs in self.transitions.items():
            for guard, dst in outs:
                yield src, guard, dst


def guard_satisfied(guard: frozenset, letter: tuple, var_index: dict) -> bool:
    return all((prop in letter[var_index[var]]) == pol for (var, prop, pol) in guard)


def _guard_consistent(guard: frozenset) -> bool:
    return not any((v, p, not pol) in guard for (v, p, pol) in guard)


# ---------------------------------------------------------------------------
# Tableau translation (on-the-fly construction, generalized then degeneralized)

_TT = ("tt",)
_FF = ("ff",)


def _to_ir(f: TemporalFormula, neg: bool):
    """Negation normal form over and/or/X/U/R with literal leaves."""
    if isinstance(f, Const):
        return _FF if f.value == neg else _TT
    if isinstance(f, Atom):
        return ("lit", f.var, f.prop, not neg)
    if isinstance(f, Not):
        return _to_ir(f.sub, not neg)
    if isinstance(f, And):
        op = "or" if neg else "and"
        return (op, _to_ir(f.lhs, neg), _to_ir(f.rhs, neg))
    if isinstance(f, Or):
        op = "and" if neg else "or"
        return (op, _to_ir(f.lhs, neg), _to_ir(f.rhs, neg))
    if isinstance(f, Implies):
        op = "and" if neg else "or"
        return (op, _to_ir(f.lhs, not neg), _to_ir(f.rhs, neg))
    if isinstance(f, Iff):
        pp = _to_ir(f.lhs, False), _to_ir(f.rhs, False)
        nn = _to_ir(f.lhs, True), _to_ir(f.rhs, True)
        if neg:
            return ("or", ("and", pp[0], nn[1]), ("and", nn[0], pp[1]))
        return ("or", ("and", pp[0], pp[1]), ("and", nn[0], nn[1]))
    if isinstance(f, Next):
        return ("X", _to_ir(f.sub, neg))
    if isinstance(f, Until):
        if neg:
            return ("R", _to_ir(f.lhs, True), _to_ir(f.rhs, True))
        return ("U", _to_ir(f.lhs, False), _to_ir(f.rhs, False))
    if isinstance(f, Globally):
        if neg:
            return ("U", _TT, _to_ir(f.sub, True))
        return ("R", _FF, _to_ir(f.sub, False))
    if isinstance(f, Eventually):
        if neg:
            return ("R", _FF, _to_ir(f.sub, True))
        return ("U", _TT, _to_ir(f.sub, False))
    raise TypeError(f"cannot translate {type(f).__name__}")


def _neg_lit(l):
    return ("lit", l[1], l[2], not l[3])


class _Node:
    __slots__ = ("name", "incoming", "new", "old", "nxt")

    def __init__(self, name, incoming, new, old, nxt):
        self.name = name
        self.incoming = incoming
        self.new = new
        self.old = old
        self.nxt = nxt


def _gpvw(root) -> tuple:
    """Classic on-the-fly node construction; returns (nodes, untils)."""
    counter = [0]

    def fresh(incoming, new, old, nxt):
        counter[0] += 1
        return _Node(counter[0], set(incoming), set(new), set(old), set(nxt))

    done: list = []
    by_key: dict = {}
    pending = [fresh({INIT}, {root}, (), ())]
    while pending:
        node = pending.pop()
        if not node.new:
            key = (frozenset(node.old), frozenset(node.nxt))
            if key in by_key:
                by_key[key].incoming |= node.incoming
                continue
            by_key[key] = node
            done.append(node)
            pending.append(fresh({node.name}, node.nxt, (), ()))
            continue
        f = node.new.pop()
        if f in node.old:
            pending.append(node)
            continue
        kind = f[0]
        if kind == "ff":
            continue  # inconsistent, drop
        if kind == "tt":
            pending.append(node)
            continue
        if kind == "lit":
            if _neg_lit(f) in node.old:
                continue
            node.old.add(f)
            pending.append(node)
            continue
        if kind == "and":
            node.old.add(f)
            node.new.update({f[1], f[2]} - node.old)
            pending.append(node)
            continue
        if kind == "X":
            node.old.add(f)
            node.nxt.add(f[1])
            pending.append(node)
            continue
        if kind in ("or", "U", "R"):
            n1 = fresh(node.incoming, node.new, node.old | {f}, node.nxt)
            n2 = fresh(node.incoming, node.new, node.old | {f}, node.nxt)
            if kind == "or":
                n1.new.add(f[1])
                n2.new.add(f[2])
            elif kind == "U":
                n1.new.add(f[1])
                n1.nxt.add(f)
                n2.new.add(f[2])
            else:  # R
                n1.new.add(f[2])
                n1.nxt.add(f)
                n2.new.update({f[1], f[2]})
            pending.append(n1)
            pending.append(n2)
            continue
        raise AssertionError(f"unknown ir node {kind}")

    untils = sorted(
        {f for node in done for f in node.old if f[0] == "U"},
        key=repr,
    )
    return done, untils


def ltl_to_buchi(body: TemporalFormula, vars: Iterable[str]) -> BuchiAutomaton:
    """Translate a temporal body into a Büchi automaton over tuple letters.

    The language is exactly the set of letter-tuple words satisfying the
    body under the synchronous semantics.
    """
    vars = tuple(vars)
    root = _to_ir(body, False)
    nodes, untils = _gpvw(root)

    guards = {
        node.name: frozenset(
            (v, p, pol) for (kind, v, p, pol) in node.old if kind == "lit"
        )
        for node in nodes
    }
    states = [INIT] + [node.name for node in nodes]
    transitions: dict = {s: [] for s in states}
    for node in nodes:
        for src in node.incoming:
            transitions[src].append((guards[node.name], node.name))
    acc_sets = []
    for u in untils:
        acc_sets.append(
            frozenset(
                node.name
                for node in nodes
                if u not in node.old or u[2] in node.old
            )
            | {INIT}
        )
    transitions = {s: tuple(ts) for s, ts in transitions.items()}
    gba = BuchiAutomaton(
        vars=vars,
        states=tuple(states),
        initial=frozenset([INIT]),
        accepting=frozenset(states),
        transitions=transitions,
    )
    return _degeneralize(gba, acc_sets)


def _degeneralize(a: BuchiAutomaton, acc_sets: list) -> BuchiAutomaton:
    if not acc_sets:
        return a
    k = len(acc_sets)
    states = [(q, i) for q in a.states for i in range(k)]
    transitions = {}
    for (q, i) in states:
        j = (i + 1) % k if q in acc_sets[i] else i
        transitions[(q, i)] = tuple((g, (dst, j)) for (g, dst) in a.transitions[q])
    return BuchiAutomaton(
        vars=a.vars,
        states=tuple(states),
        initial=frozenset((q, 0) for q in a.initial),
        accepting=frozenset((q, 0) for q in a.states if q in acc_sets[0]),
        transitions=transitions,
        alphabet=a.alphabet,
    )


# ---------------------------------------------------------------------------
# Products, projection, membership, emptiness


def _prune(a: BuchiAutomaton) -> BuchiAutomaton:
    """Restrict to states reachable from the initial set."""
    seen = set(a.initial)
    stack = list(a.initial)
    while stack:
        q = stack.pop()
        for (_g, dst) in a.transitions.get(q, ()):
            if dst not in seen:
                seen.add(dst)
                stack.append(dst)
    return BuchiAutomaton(
        vars=a.vars,
        states=tuple(q for q in a.states if q in seen),
        initial=a.initial,
        accepting=a.accepting & seen,
        transitions={q: a.transitions[q] for q in a.states if q in seen},
        alphabet=a.alphabet,
    )


def bind_model(
    a: BuchiAutomaton, k: KripkeStructure, var: str, project: bool = True
) -> BuchiAutomaton:
    """Synchronize one trace variable with the model's paths.

    The component letter of ``var`` is consumed against the label of the
    current model state; states become (automaton state, model state).
    With ``project`` the variable leaves the alphabet (existential
    projection over model traces); without it the variable is simply bound
    and the model state kept for witness extraction.
    """
    if var not in a.vars:
        raise ValueError(f"variable {var!r} is not open in the automaton")
    new_vars = tuple(v for v in a.vars if v != var)
    succ = k.succ_map
    initial = frozenset((q, s) for q in a.initial for s in sorted(k.init))
    transitions: dict = {}
    stack = list(initial)
    seen = set(initial)
    while stack:
        (q, s) = stack.pop()
        outs = []
        lab = k.label[s]
        for (g, q2) in a.transitions.get(q, ()):
            ok = all((p in lab) == pol for (v, p, pol) in g if v == var)
            if not ok:
                continue
            g2 = frozenset(l for l in g if l[0] != var)
            for s2 in succ[s]:
                outs.append((g2, (q2, s2)))
                if (q2, s2) not in seen:
                    seen.add((q2, s2))
                    stack.append((q2, s2))
        transitions[(q, s)] = tuple(outs)
    states = tuple(sorted(seen, key=repr))
    return BuchiAutomaton(
        vars=new_vars,
        states=states,
        initial=initial,
        accepting=frozenset(n for n in states if n[0] in a.accepting),
        transitions=transitions,
    )


def project(a: BuchiAutomaton, var: str) -> BuchiAutomaton:
    """Existential projection over the full letter alphabet of ``var``."""
    new_vars = tuple(v for v in a.vars if v != var)
    transitions = {
        q: tuple((frozenset(l for l in g if l[0] != var), dst) for (g, dst) in outs)
        for q, outs in a.transitions.items()
    }
    return BuchiAutomaton(
        vars=new_vars,
        states=a.states,
        initial=a.initial,
        accepting=a.accepting,
        transitions=transitions,
        alphabet=None,
    )


def intersect(a: BuchiAutomaton, b: BuchiAutomaton) -> BuchiAutomaton:
    """Language intersection; both automata must share the variable tuple."""
    if a.vars != b.vars:
        raise ValueError("intersection requires identical variable tuples")
    initial = frozenset((p, q) for p in a.initial for q in b.initial)
    transitions: dict = {}
    seen = set(initial)
    stack = list(initial)
    while stack:
        (p, q) = stack.pop()
        outs = []
        for (g1, p2) in a.transitions.get(p, ()):
            for (g2, q2) in b.transitions.get(q, ()):
                g = g1 | g2
                if not _guard_consistent(g):
                    continue
                outs.append((g, (p2, q2)))
                if (p2, q2) not in seen:
                    seen.add((p2, q2))
                    stack.append((p2, q2))
        transitions[(p, q)] = tuple(outs)
    states = tuple(sorted(seen, key=repr))
    gba = BuchiAutomaton(
        vars=a.vars,
        states=states,
        initial=initial,
        accepting=frozenset(states),
        transitions=transitions,
        alphabet=a.alphabet or b.alphabet,
    )
    sets = [
        frozenset(n for n in states if n[0] in a.accepting),
        frozenset(n for n in states if n[1] in b.accepting),
    ]
    return _degeneralize(gba, sets)


def accepting_lasso(a: BuchiAutomaton):
    """A reachable accepting lasso, as (stem states, loop states), or None.

    Guards are assumed satisfiable (they are conjunctions kept
    contradiction-free by construction), so this is pure graph search.
    """
    adj = {
        q: [(dst, frozenset()) for (_g, dst) in outs]
        for q, outs in a.transitions.items()
    }
    tags = lambda n: frozenset(["acc"]) if n in a.accepting else frozenset()
    hit = find_accepting_lasso(adj, sorted(a.initial, key=repr), ["acc"], tags)
    if hit is None:
        return None
    stem_edges, loop_edges = hit
    stem = [e[0] for e in stem_edges]
    loop = [e[0] for e in loop_edges]
    return stem, loop


def is_empty(a: BuchiAutomaton) -> bool:
    return accepting_lasso(a) is None


def membership(a: BuchiAutomaton, word: Lasso) -> bool:
    """Does the automaton accept the ultimately periodic word?

    Word items are tuples of proposition sets aligned with ``a.vars``.
    """
    var_index = {v: i for i, v in enumerate(a.vars)}
    starts = [(q, word.norm(0)) for q in a.initial]
    adj: dict = {}
    seen = set(starts)
    stack = list(starts)
    while stack:
        (q, i) = stack.pop()
        nxt = word.succ(i)
        outs = []
        for (g, q2) in a.transitions.get(q, ()):
            if guard_satisfied(g, word.at(i), var_index):
                outs.append(((q2, nxt), frozenset()))
                if (q2, nxt) not in seen:
                    seen.add((q2, nxt))
                    stack.append((q2, nxt))
        adj[(q, i)] = outs
    tags = lambda n: frozenset(["acc"]) if n[0] in a.accepting else frozenset()
    return find_accepting_lasso(adj, starts, ["acc"], tags) is not None


# ---------------------------------------------------------------------------
# Transition profiles: Ramsey complementation and trace containment


def _letters_to_guard(letter: tuple, aps_per_var: list, vars: tuple) -> frozenset:
    lits = []
    for i, var in enumerate(vars):
        for p in aps_per_var[i]:
            lits.append((var, p, p in letter[i]))
    return frozenset(lits)


class _Profiles:
    """Composable transition profiles of an automaton, with memoization.

    A profile maps state pairs to 1 (some run segment) or 2 (some segment
    through an accepting state, endpoints included).
    """

    def __init__(self, a: BuchiAutomaton):
        self.a = a
        self.var_index = {v: i for i, v in enumerate(a.vars)}
        self.identity = frozenset((q, q, 1) for q in a.states)
        self._letters: dict = {}
        self._compose: dict = {}
        self._by_src: dict = {}

    def of_letter(self, letter: tuple) -> frozenset:
        if letter in self._letters:
            return self._letters[letter]
        acc = self.a.accepting
        entries: dict = {}
        for (src, g, dst) in self.a.edges():
            if guard_satisfied(g, letter, self.var_index):
                val = 2 if (src in acc or dst in acc) else 1
                if entries.get((src, dst), 0) < val:
                    entries[(src, dst)] = val
        prof = frozenset((p, q, v) for ((p, q), v) in entries.items())
        self._letters[letter] = prof
        return prof

    def by_src(self, prof: frozenset) -> dict:
        if prof not in self._by_src:
            m: dict = {}
            for (p, q, v) in prof:
                m.setdefault(p, []).append((q, v))
            self._by_src[prof] = m
        return self._by_src[prof]

    def compose(self, x: frozenset, y: frozenset) -> frozenset:
        key = (x, y)
        if key in self._compose:
            return self._compose[key]
        ysrc = self.by_src(y)
        entries: dict = {}
        for (p, q, v1) in x:
            for (r, v2) in ysrc.get(q, ()):
                v = max(v1, v2)
                if entries.get((p, r), 0) < v:
                    entries[(p, r)] = v
        out = frozenset((p, r, v) for ((p, r), v) in entries.items())
        self._compose[key] = out
        return out

    def accepts_lasso(self, x: frozenset, y: frozenset) -> bool:
        """Is some word with stem profile x and loop profile y accepted?"""
        reach = {q for (p, q, _v) in x if p in self.a.initial}
        if not reach:
            return False
        adj: dict = {}
        for (p, q, v) in y:
            adj.setdefault(p, []).append((q, frozenset(["F"]) if v == 2 else frozenset()))
        return find_accepting_lasso(adj, sorted(reach, key=repr), ["F"]) is not None


def complement_buchi(
    a: BuchiAutomaton, alphabet: Iterable[tuple] | None = None, cap: int = 100000
) -> BuchiAutomaton:
    """Complement over a concrete alphabet via linked profile pairs.

    Every word factors into a stem and blocks sharing an idempotent loop
    profile; a word is rejected by ``a`` exactly when its factorization
    pair admits no accepting lasso.  The result accepts the union of those
    rejected factorization languages.  Raises :class:`ResourceCap` if the
    profile monoid or state count exceeds ``cap``.
    """
    letters = tuple(alphabet) if alphabet is not None else a.alphabet
    if letters is None:
        raise ValueError("complementation needs a concrete alphabet")
    prof = _Profiles(a)
    aps_per_var = [
        sorted({p for l in letters for p in l[i]}) for i in range(len(a.vars))
    ]
    lp = {l: prof.of_letter(l) for l in letters}

    # profile monoid reachable from letter profiles (profiles of nonempty words)
    monoid = set(lp.values())
    frontier = list(monoid)
    delta: dict = {}
    while frontier:
        x = frontier.pop()
        for l in letters:
            y = prof.compose(x, lp[l])
            delta[(x, l)] = y
            if y not in monoid:
                monoid.add(y)
                frontier.append(y)
                if len(monoid) > cap:
                    raise ResourceCap(f"profile monoid exceeds cap {cap}")

    idempotent = [y for y in monoid if prof.compose(y, y) == y]
    bad: dict = {}
    for x in monoid:
        ys = [
            y
            for y in idempotent
            if prof.compose(x, y) == x and not prof.accepts_lasso(x, y)
        ]
        if ys:
            bad[x] = ys

    ident = prof.identity
    states: set = {("p1", ident)}
    transitions: dict = {}
    accepting: set = set()
    stack = [("p1", ident)]
    guard_of = {l: _letters_to_guard(l, aps_per_var, a.vars) for l in letters}
    while stack:
        st = stack.pop()
        outs = []
        if st[0] == "p1":
            x = st[1]
            for l in letters:
                x2 = prof.compose(x, lp[l]) if x != ident else lp[l]
                outs.append((guard_of[l], ("p1", x2)))
                for y in bad.get(x2, ()):
                    outs.append((guard_of[l], ("p2", y, ident)))
        else:
            _tag, y, cur = st
            for l in letters:
                c2 = prof.compose(cur, lp[l]) if cur != ident else lp[l]
                outs.append((guard_of[l], ("p2", y, c2)))
                if c2 == y:
                    outs.append((guard_of[l], ("p2", y, ident)))
        for (_g, dst) in outs:
            if dst not in states:
                states.add(dst)
                stack.append(dst)
                if len(states) > cap:
                    raise ResourceCap(f"complement exceeds cap {cap}")
        transitions[st] = tuple(outs)
    for st in states:
        if st[0] == "p2" and st[2] == ident:
            accepting.add(st)
    return BuchiAutomaton(
        vars=a.vars,
        states=tuple(sorted(states, key=repr)),
        initial=frozenset([("p1", ident)]),
        accepting=frozenset(accepting),
        transitions=transitions,
        alphabet=letters,
    )


@dataclass(frozen=True)
class ModelGraph:
    """A letter-labeled graph whose infinite paths are the words to contain."""

    starts: tuple
    succ: dict = field(hash=False)
    letter: dict = field(hash=False)  # node -> tuple letter

    @staticmethod
    def of_model(k: KripkeStructure, vars: tuple) -> "ModelGraph":
        """Product of |vars| copies of the model, over tuple letters."""
        from itertools import product as iproduct

        starts = tuple(iproduct(*[sorted(k.init)] * len(vars)))
        succ: dict = {}
        letter: dict = {}
        sm = k.succ_map
        stack = list(starts)
        seen = set(starts)
        while stack:
            node = stack.pop()
            letter[node] = tuple(k.label[s] for s in node)
            outs = list(iproduct(*[sm[s] for s in node]))
            succ[node] = outs
            for n in outs:
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        return ModelGraph(starts, succ, letter)


def contains_traces(
    mg: ModelGraph, a: BuchiAutomaton, cap: int = 200000
):
    """Check L(model graph) ⊆ L(a); (True, None) or (False, witness lasso).

    The witness is a (stem nodes, loop nodes) pair of model-graph nodes
    whose word is rejected.  Profile supergraph search: stems pair a node
    with the profile of the word so far; loops likewise around an anchor.
    """
    prof = _Profiles(a)
    lp = {n: prof.of_letter(l) for n, l in mg.letter.items()}
    ident = prof.identity

    accept_memo: dict = {}

    def accepted(x, y) -> bool:
        key = (x, y)
        if key not in accept_memo:
            accept_memo[key] = prof.accepts_lasso(x, y)
        return accept_memo[key]

    # stem supergraph
    stem_parent: dict = {}
    stems = [(n, ident) for n in mg.starts]
    for s in stems:
        stem_parent[s] = None
    loops_done: dict = {}
    work = list(stems)
    explored = 0
    while work:
        node = work.pop()
        explored += 1
        if explored > cap:
            raise ResourceCap(f"containment supergraph exceeds cap {cap}")
        m, x = node
        for y, loop_nodes in _loop_profiles(mg, m, lp, prof, loops_done, cap):
            if not accepted(x, y):
                stem = _stem_path(stem_parent, node)
                return False, (stem[:-1], loop_nodes)
        step = prof.compose(x, lp[m]) if x != ident else lp[m]
        for m2 in mg.succ[m]:
            nxt = (m2, step)
            if nxt not in stem_parent:
                stem_parent[nxt] = node
                work.append(nxt)
    return True, None


def _stem_path(parent, node) -> list:
    path = []
    while node is not None:
        path.append(node[0])
        node = parent[node]
    path.reverse()
    return path


def _loop_profiles(mg, anchor, lp, prof, memo, cap):
    """All loop-word profiles around anchor, each w/ a representative node loop."""
    if anchor in memo:
        return memo[anchor]
    ident = prof.identity
    results: dict = {}
    parent: dict = {(anchor, ident): None}
    work = [(anchor, ident)]
    explored = 0
    while work:
        node = work.pop()
        explored += 1
        if explored > cap:
            raise ResourceCap(f"loop supergraph exceeds cap {cap}")
        c, y = node
        y2 = prof.compose(y, lp[c]) if y != ident else lp[c]
        for c2 in mg.succ[c]:
            nxt = (c2, y2)
            if c2 == anchor and y2 not in results:
                results[y2] = _loop_path(parent, node) + []
            if nxt not in parent:
                parent[nxt] = node
                work.append(nxt)
    memo[anchor] = [(y, nodes) for y, nodes in results.items()]
    return memo[anchor]


def _loop_path(parent, node) -> list:
    path = []
    while node is not None:
        path.append(node[0])
        node = parent[node]
    path.reverse()
    return path
