"""Exact temporal-formula evaluation over ultimately periodic words.

This is the semantic ground truth the rest of the package is tested
against: a direct, automaton-free evaluation of a formula on a lasso.
Works over any item type; an ``atom_fn(item, prop, var)`` callback decides
atom truth, so the same code evaluates single traces and trace tuples.
"""

from __future__ import annotations

from typing import Callable

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
from .model import Lasso


def evaluate(
    f: TemporalFormula,
    word: Lasso,
    atom_fn: Callable,
    position: int = 0,
) -> bool:
    """Truth of ``f`` at ``position`` of the infinite unrolling of ``word``."""
    memo: dict = {}
    return _values(f, word, atom_fn, memo)[word.norm(position)]


def value_vector(f: TemporalFormula, word: Lasso, atom_fn: Callable) -> list:
    """Truth of ``f`` at every representative position (stem then loop)."""
    return _values(f, word, atom_fn, {})


def trace_atom(item, prop, var) -> bool:
    """Atom callback for single-trace words (the variable is ignored)."""
    return prop in item


def tuple_atom(var_index: dict) -> Callable:
    """Atom callback for tuple words, components addressed by variable name."""

    def fn(item, prop, var):
        return prop in item[var_index[var]]

    return fn


def _values(f, word, atom_fn, memo) -> list:
    key = id(f)
    if key in memo:
        return memo[key]
    n = word.size
    s = len(word.stem)
    l = len(word.loop)

    if isinstance(f, Const):
        v = [f.value] * n
    elif isinstance(f, Atom):
        v = [atom_fn(word.at(i), f.prop, f.var) for i in range(n)]
    elif isinstance(f, Not):
        v = [not x for x in _values(f.sub, word, atom_fn, memo)]
    elif isinstance(f, And):
        a = _values(f.lhs, word, atom_fn, memo)
        b = _values(f.rhs, word, atom_fn, memo)
        v = [x and y for x, y in zip(a, b)]
    elif isinstance(f, Or):
        a = _values(f.lhs, word, atom_fn, memo)
        b = _values(f.rhs, word, atom_fn, memo)
        v = [x or y for x, y in zip(a, b)]
    elif isinstance(f, Implies):
        a = _values(f.lhs, word, atom_fn, memo)
        b = _values(f.rhs, word, atom_fn, memo)
        v = [(not x) or y for x, y in zip(a, b)]
    elif isinstance(f, Iff):
        a = _values(f.lhs, word, atom_fn, memo)
        b = _values(f.rhs, word, atom_fn, memo)
        v = [x == y for x, y in zip(a, b)]
    elif isinstance(f, Next):
        a = _values(f.sub, word, atom_fn, memo)
        v = [a[word.succ(i)] for i in range(n)]
    elif isinstance(f, Globally):
        a = _values(f.sub, word, atom_fn, memo)
        stay = all(a[s:])  # from any loop position the whole loop recurs
        v = [False] * n
        for i in range(s, n):
            v[i] = stay
        for i in range(s - 1, -1, -1):
            v[i] = a[i] and (v[i + 1] if i + 1 < n else stay)
    elif isinstance(f, Eventually):
        a = _values(f.sub, word, atom_fn, memo)
        hit = any(a[s:])
        v = [False] * n
        for i in range(s, n):
            v[i] = hit
        for i in range(s - 1, -1, -1):
            v[i] = a[i] or (v[i + 1] if i + 1 < n else hit)
    elif isinstance(f, Until):
        a = _values(f.lhs, word, atom_fn, memo)
        b = _values(f.rhs, word, atom_fn, memo)
        v = [False] * n
        # loop part: unrolling the loop twice covers every useful witness
        ext = [False] * (2 * l + 1)
        for k in range(2 * l - 1, -1, -1):
            i = s + (k % l)
            ext[k] = b[i] or (a[i] and ext[k + 1])
        for k in range(l):
            v[s + k] = ext[k]
        for i in range(s - 1, -1, -1):
            v[i] = b[i] or (a[i] and v[i + 1])
    else:
        raise TypeError(f"cannot evaluate node {type(f).__name__}")

    memo[key] = v
    return v
