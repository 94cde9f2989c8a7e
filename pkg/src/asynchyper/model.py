"""Kripke structures, lasso-shaped traces, trajectories, and the stuttering maps.

Infinite objects (traces, paths, trajectories) are represented as lassos:
a finite stem followed by a forever-repeated nonempty loop.  All semantic
work in the package happens on these ultimately periodic representations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

ST = "st"  # reserved proposition marking stutter copies

Letter = frozenset


class ModelError(ValueError):
    """Raised for ill-formed models (totality violations, bad references)."""


class ModelParseError(ModelError):
    """Syntax error in a model file; carries line and column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Lasso:
    """Ultimately periodic sequence stem . loop . loop ... of hashable items."""

    stem: tuple
    loop: tuple

    def __post_init__(self):
        if not self.loop:
            raise ValueError("lasso loop must be nonempty")

    @property
    def size(self) -> int:
        return len(self.stem) + len(self.loop)

    def norm(self, i: int) -> int:
        """Map an absolute position to its representative in [0, size)."""
        s = len(self.stem)
        if i < s:
            return i
        return s + (i - s) % len(self.loop)

    def succ(self, i: int) -> int:
        """Successor of a normalized position."""
        j = i + 1
        return j if j < self.size else len(self.stem)

    def at(self, i: int):
        i = self.norm(i)
        s = len(self.stem)
        return self.stem[i] if i < s else self.loop[i - s]

    def prefix(self, n: int) -> tuple:
        return tuple(self.at(i) for i in range(n))

    def map(self, fn: Callable) -> "Lasso":
        return Lasso(tuple(fn(x) for x in self.stem), tuple(fn(x) for x in self.loop))

    def canonical(self) -> "Lasso":
        """Unique representation: minimal loop period, maximally rolled stem."""
        loop = list(self.loop)
        n = len(loop)
        for d in range(1, n + 1):
            if n % d == 0 and loop == loop[:d] * (n // d):
                loop = loop[:d]
                break
        stem = list(self.stem)
        while stem and stem[-1] == loop[-1]:
            stem.pop()
            loop = [loop[-1]] + loop[:-1]
        return Lasso(tuple(stem), tuple(loop))

    def equivalent(self, other: "Lasso") -> bool:
        """Do both lassos unroll to the same infinite sequence?"""
        return self.canonical() == other.canonical()


@dataclass(frozen=True)
class PointedTrace:
    """A trace lasso together with a read pointer."""

    trace: Lasso
    pointer: int = 0

    def __post_init__(self):
        if self.pointer < 0:
            raise ValueError("pointer must be nonnegative")

    def letter(self) -> Letter:
        return self.trace.at(self.pointer)

    def advanced(self, moved: bool) -> "PointedTrace":
        if not moved:
            return self
        return PointedTrace(self.trace, self.trace.succ(self.trace.norm(self.pointer)))


@dataclass(frozen=True)
class Trajectory:
    """Lasso-shaped schedule of which trace variables advance at each step.

    Every element is a nonempty subset of ``vars``; fairness is structural::
    each variable must occur somewhere in the loop.
    """

    stem: tuple
    loop: tuple
    vars: frozenset

    def __post_init__(self):
        for part in (self.stem, self.loop):
            for s in part:
                if not s:
                    raise ValueError("trajectory steps must be nonempty")
                if not s <= self.vars:
                    raise ValueError(f"trajectory step {set(s)} outside {set(self.vars)}")
        if not self.loop:
            raise ValueError("trajectory loop must be nonempty")
        moved = frozenset().union(*self.loop)
        if moved != self.vars:
            missing = ", ".join(sorted(self.vars - moved))
            raise ValueError(f"unfair trajectory: {missing} never moves in the loop")

    @property
    def lasso(self) -> Lasso:
        return Lasso(self.stem, self.loop)

    def at(self, k: int) -> frozenset:
        return self.lasso.at(k)

    def canonical(self) -> "Trajectory":
        c = self.lasso.canonical()
        return Trajectory(c.stem, c.loop, self.vars)

    @staticmethod
    def lockstep(vars: Iterable[str]) -> "Trajectory":
        v = frozenset(vars)
        return Trajectory((), (v,), v)


# A trace assignment maps trace variables to pointed traces.
TraceAssignment = dict


@dataclass(frozen=True)
class KripkeStructure:
    """Finite Kripke structure with a total transition relation."""

    states: tuple
    init: frozenset
    trans: frozenset
    label: dict = field(hash=False)
    aps: tuple = ()

    def __post_init__(self):
        states = set(self.states)
        if len(self.states) != len(states):
            raise ModelError("duplicate state ids")
        if not self.init:
            raise ModelError("initial state set is empty")
        for s in self.init:
            if s not in states:
                raise ModelError(f"unknown initial state {s!r}")
        for s, t in self.trans:
            if s not in states or t not in states:
                raise ModelError(f"transition ({s!r}, {t!r}) leaves the state set")
        apset = set(self.aps)
        for s in self.states:
            if s not in self.label:
                raise ModelError(f"state {s!r} has no label")
            if not self.label[s] <= apset:
                bad = sorted(self.label[s] - apset)[0]
                raise ModelError(f"unknown proposition {bad!r} on state {s!r}")
        sources = {s for s, _ in self.trans}
        for s in self.states:
            if s not in sources:
                raise ModelError(f"totality violation: state {s!r} has no outgoing transition")

    def successors(self, s) -> list:
        return [t for (u, t) in self.trans if u == s]

    @property
    def succ_map(self) -> dict:
        m = {s: [] for s in self.states}
        for u, t in sorted(self.trans):
            m[u].append(t)
        return m

    def letters(self) -> list:
        """Distinct state labels, in state declaration order."""
        seen = []
        for s in self.states:
            l = self.label[s]
            if l not in seen:
                seen.append(l)
        return seen

    def trace_of(self, path: Lasso) -> Lasso:
        return path.map(lambda s: self.label[s])


def parse_kripke(text: str) -> KripkeStructure:
    """Parse the line-oriented model grammar.

    Sections: ``aps:``, ``init:``, ``state <id> {props}``, ``trans a -> b``.
    ``#`` starts a comment.  All sections are required.
    """
    aps: list = []
    init: list = []
    states: list = []
    label: dict = {}
    trans: list = []
    saw = {"aps": False, "init": False, "state": False, "trans": False}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        tokens = line.split()
        head = tokens[0]
        if head == "aps:":
            if saw["aps"]:
                raise ModelParseError("duplicate aps section", lineno, col)
            saw["aps"] = True
            aps = tokens[1:]
            if len(set(aps)) != len(aps):
                raise ModelParseError("duplicate proposition in aps", lineno, col)
        elif head == "init:":
            if saw["init"]:
                raise ModelParseError("duplicate init section", lineno, col)
            saw["init"] = True
            init = tokens[1:]
            if not init:
                raise ModelParseError("init section lists no states", lineno, col)
        elif head == "state":
            saw["state"] = True
            rest = line.split(None, 1)[1] if len(tokens) > 1 else ""
            lb = rest.find("{")
            rb = rest.find("}")
            if lb < 0 or rb < lb:
                raise ModelParseError("expected 'state <id> {props}'", lineno, col)
            name = rest[:lb].strip()
            if not name:
                raise ModelParseError("missing state id", lineno, col)
            if name in label:
                raise ModelParseError(f"duplicate state {name!r}", lineno, col)
            props = rest[lb + 1 : rb].split()
            for p in props:
                if p not in aps:
                    raise ModelParseError(f"unknown proposition {p!r}", lineno, col)
            states.append(name)
            label[name] = frozenset(props)
        elif head == "trans":
            saw["trans"] = True
            rest = tokens[1:]
            if len(rest) != 3 or rest[1] != "->":
                raise ModelParseError("expected 'trans <src> -> <dst>'", lineno, col)
            trans.append((rest[0], rest[2]))
        else:
            raise ModelParseError(f"unknown directive {head!r}", lineno, col)

    for section, present in saw.items():
        if not present:
            raise ModelParseError(f"missing required section {section!r}", 0, 0)
    return KripkeStructure(
        states=tuple(states),
        init=frozenset(init),
        trans=frozenset(trans),
        label=label,
        aps=tuple(aps),
    )


def print_kripke(k: KripkeStructure) -> str:
    """Render a structure back into the model grammar (stable order)."""
    lines = ["aps: " + " ".join(k.aps)]
    lines.append("init: " + " ".join(s for s in k.states if s in k.init))
    for s in k.states:
        props = " ".join(p for p in k.aps if p in k.label[s])
        lines.append(f"state {s} {{{props}}}")
    for u, t in sorted(k.trans):
        lines.append(f"trans {u} -> {t}")
    return "\n".join(lines) + "\n"


def enumerate_lassos(k: KripkeStructure, bound: int) -> list:
    """All path lassos with |stem|+|loop| <= bound, canonical and deduplicated."""
    if bound < 1:
        raise ValueError("bound must be at least 1")
    succ = k.succ_map
    out: set = set()

    def extend(path: list):
        last = path[-1]
        for j, s in enumerate(path):
            if (last, s) in k.trans:
                out.add(Lasso(tuple(path[:j]), tuple(path[j:])).canonical())
        if len(path) < bound:
            for t in succ[last]:
                path.append(t)
                extend(path)
                path.pop()

    for s0 in sorted(k.init):
        extend([s0])
    return sorted(out, key=lambda l: (l.size, l.stem, l.loop))


def enumerate_trace_lassos(k: KripkeStructure, bound: int) -> list:
    """Trace lassos (labelings of path lassos), deduplicated up to unrolling."""
    seen = {}
    for path in enumerate_lassos(k, bound):
        tr = k.trace_of(path).canonical()
        if tr not in seen:
            seen[tr] = path
    return sorted(seen, key=lambda l: (l.size, _letter_key(l.stem), _letter_key(l.loop)))


def _letter_key(letters: tuple) -> tuple:
    return tuple(tuple(sorted(l)) for l in letters)


def is_trace_of(k: KripkeStructure, trace: Lasso, from_init: bool = True) -> bool:
    """Is the letter lasso realizable by some path of the structure?"""
    from .graphs import find_accepting_lasso

    starts = k.init if from_init else set(k.states)
    nodes = {(s, trace.norm(0)) for s in starts if k.label[s] == trace.at(0)}
    # An infinite run exists iff the product graph has a reachable cycle.
    seen = set(nodes)
    stack = list(nodes)
    adj: dict = {}
    none = frozenset()
    while stack:
        s, i = stack.pop()
        j = trace.succ(i)
        nexts = [((t, j), none) for t in k.successors(s) if k.label[t] == trace.at(j)]
        adj[(s, i)] = nexts
        for n, _ in nexts:
            if n not in seen:
                seen.add(n)
                stack.append(n)
    return find_accepting_lasso(adj, nodes) is not None


def expand(traces: tuple, t: Trajectory) -> tuple:
    """Stuttering expansion of a trace tuple under a trajectory.

    Position k+1 of output i carries ``st`` exactly when variable i is not
    scheduled at step k (its pointer stayed).  Variables are matched to
    traces by the sorted order of ``t.vars``.
    """
    names = sorted(t.vars)
    if len(names) != len(traces):
        raise ValueError("trajectory variable count does not match trace count")
    n = len(traces)
    ptrs = [0] * n
    tk = 0
    emitted: list = [[tr.at(0)] for tr in traces]
    seen: dict = {}
    step = 0
    while True:
        state = (tuple(ptrs), tk)
        if state in seen:
            m0 = seen[state]
            out = []
            for i in range(n):
                stem = tuple(emitted[i][: m0 + 1])
                loop = tuple(emitted[i][m0 + 1 : step + 1])
                out.append(Lasso(stem, loop).canonical())
            return tuple(out)
        seen[state] = step
        move = t.lasso.at(tk)
        for i, tr in enumerate(traces):
            if names[i] in move:
                ptrs[i] = tr.succ(ptrs[i])
                emitted[i].append(tr.at(ptrs[i]))
            else:
                emitted[i].append(tr.at(ptrs[i]) | {ST})
        tk = t.lasso.succ(tk)
        step += 1


def compress(traces: tuple, vars: Iterable[str] | None = None) -> tuple:
    """Inverse of :func:`expand` on fair stuttering expansions.

    Removes the ``st`` positions of each trace and reads the trajectory off
    the stutter pattern: variable i is scheduled at step k iff position k+1
    of trace i is not a stutter.  Rejects unfair inputs and inputs where
    some step stutters every trace (no trajectory produces those).
    """
    n = len(traces)
    names = sorted(vars) if vars is not None else [f"pi{i+1}" for i in range(n)]
    if len(names) != n:
        raise ValueError("variable count does not match trace count")
    for i, tr in enumerate(traces):
        if all(ST in l for l in tr.loop):
            raise ValueError(f"unfair input: trace {names[i]} ends in a stutter-only loop")
        if ST in tr.at(0):
            raise ValueError(f"trace {names[i]} starts with a stutter position")

    ptrs = [0] * n
    letters: list = [[tr.at(0)] for tr in traces]
    moves: list = []
    seen: dict = {tuple(ptrs): 0}
    col = 0
    while True:
        col += 1
        for i, tr in enumerate(traces):
            ptrs[i] = tr.succ(ptrs[i])
        moved = frozenset(
            names[i] for i, tr in enumerate(traces) if ST not in tr.at(ptrs[i])
        )
        if not moved:
            raise ValueError(f"all traces stutter at position {col}: not an expansion image")
        moves.append(moved)
        state = tuple(ptrs)
        if state in seen:
            m0 = seen[state]
            break
        seen[state] = col
        for i, tr in enumerate(traces):
            if names[i] in moved:
                letters[i].append(tr.at(ptrs[i]) - {ST})
    # columns m0 .. col-1 repeat forever; split collected letters accordingly
    out = []
    for i, name in enumerate(names):
        # letters collected strictly before column m0
        cut = 0 if m0 == 0 else 1 + sum(1 for k in range(m0 - 1) if name in moves[k])
        stem = tuple(letters[i][:cut])
        loop = tuple(letters[i][cut:])
        if not loop:
            raise ValueError(f"unfair input: trace {name} never moves in the loop")
        out.append(Lasso(stem, loop).canonical())
    traj = Trajectory(tuple(moves[:m0]), tuple(moves[m0:col]), frozenset(names)).canonical()
    return tuple(out), traj


def is_stuttering_expansion(a: Lasso, b: Lasso) -> bool:
    """Is ``b`` a stuttering expansion of ``a`` (letter lassos over one AP set)?

    Decided on the lasso representations: search for a monotone block map in
    the product of positions in which ``a`` advances infinitely often.
    """
    from .graphs import find_accepting_lasso

    if b.at(0) != a.at(0):
        return False
    start = (a.norm(0), b.norm(0))
    # edges: stay in a's current block (b repeats its letter) or advance both
    seen = {start}
    stack = [start]
    adj: dict = {}
    advance = frozenset(["advance"])
    stay = frozenset()
    while stack:
        i, j = stack.pop()
        jn = b.succ(j)
        nexts = []
        if b.at(jn) == a.at(i):
            nexts.append(((i, jn), stay))
        ia = a.succ(i)
        if b.at(jn) == a.at(ia):
            nexts.append(((ia, jn), advance))
        adj[(i, j)] = nexts
        for node, _ in nexts:
            if node not in seen:
                seen.add(node)
                stack.append(node)
    return find_accepting_lasso(adj, [start], ["advance"]) is not None
