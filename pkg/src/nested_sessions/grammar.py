"""First-order grammars for renamed signatures, and two bounded oracles.

Each name becomes a nonterminal; each definition contributes one rule per
action its body can perform.  ``1`` becomes the dead term ``bot``.  Open
types are closed by mapping every variable ``x`` to a name ``@x`` that can
only ever emit the label ``@x``.

The oracles are independent of the equality algorithm: bounded trace
comparison on the grammar, and a step-indexed bisimulation on unfoldings.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Union

from .ast import (
    Lolli, Named, One, Plus, Signature, Tensor, TypeDef, TypeExpr, Var, With, _Choice,
    free_vars_ordered, substitute, unfold,
)
from .rename import RenamedSignature, rename_signature, rename_type


class NotRenamed(Exception):
    pass


class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Bot(Term):
    def __str__(self):
        return "bot"


@dataclass(frozen=True)
class TVar(Term):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Apply(Term):
    nonterminal: str
    args: tuple[Term, ...] = ()

    def __str__(self):
        if not self.args:
            return self.nonterminal
        return " ".join([self.nonterminal] + [_arg_str(a) for a in self.args])


def _arg_str(t: Term) -> str:
    s = str(t)
    return "(%s)" % s if isinstance(t, Apply) and t.args else s


BOT = Bot()


def embed(t: TypeExpr) -> Term:
    if isinstance(t, One):
        return BOT
    if isinstance(t, Var):
        return TVar(t.name)
    if isinstance(t, Named):
        return Apply(t.name, tuple(embed(a) for a in t.args))
    raise NotRenamed("structural type %s has no term; rename it first" % t)


def term_subst(t: Term, bindings: Mapping[str, Term]) -> Term:
    if isinstance(t, TVar):
        return bindings.get(t.name, t)
    if isinstance(t, Apply) and t.args:
        return Apply(t.nonterminal, tuple(term_subst(a, bindings) for a in t.args))
    return t


@dataclass
class Grammar:
    nonterminals: dict[str, int]
    actions: set[str]
    rules: dict[tuple[str, str], tuple[tuple[str, ...], Term]]

    def __post_init__(self):
        self._enabled: dict[str, tuple[str, ...]] = {}
        for (nt, act) in self.rules:
            self._enabled.setdefault(nt, ())
            self._enabled[nt] += (act,)
        for nt in self._enabled:
            self._enabled[nt] = tuple(sorted(self._enabled[nt]))

    def enabled(self, t: Term) -> tuple[str, ...]:
        if isinstance(t, Apply):
            return self._enabled.get(t.nonterminal, ())
        return ()

    def step(self, t: Term, action: str) -> Optional[Term]:
        if not isinstance(t, Apply):
            return None
        rule = self.rules.get((t.nonterminal, action))
        if rule is None:
            return None
        params, rhs = rule
        return term_subst(rhs, dict(zip(params, t.args)))

    def lines(self) -> list[str]:
        out = []
        for (nt, act), (params, rhs) in self.rules.items():
            lhs = " ".join([nt, *params])
            out.append("%s --%s--> %s" % (lhs, act, rhs))
        return sorted(out)

    def dump(self) -> str:
        return "".join(line + "\n" for line in self.lines())


def _body_actions(body: TypeExpr) -> list[tuple[str, TypeExpr]]:
    if isinstance(body, Plus):
        return [("+" + lab, b) for lab, b in body.branches]
    if isinstance(body, With):
        return [("&" + lab, b) for lab, b in body.branches]
    if isinstance(body, Tensor):
        return [("*1", body.left), ("*2", body.right)]
    if isinstance(body, Lolli):
        return [("-o1", body.left), ("-o2", body.right)]
    return []


def fog(sig: Union[RenamedSignature, Signature, Mapping[str, TypeDef]]) -> Grammar:
    """Grammar of a renamed signature."""
    if isinstance(sig, RenamedSignature):
        sig = sig.sig
    defs = sig.typedefs if isinstance(sig, Signature) else sig
    nts: dict[str, int] = {}
    acts: set[str] = set()
    rules: dict = {}
    for d in defs.values():
        nts[d.name] = len(d.params)
        for act, cont in _body_actions(d.body):
            key = (d.name, act)
            assert key not in rules, "grammar is not deterministic at %s" % (key,)
            rules[key] = (tuple(d.params), embed(cont))
            acts.add(act)
    return Grammar(nts, acts, rules)


def close_open(sig: Union[RenamedSignature, Signature], vs: Iterable[str]):
    """Extend with ``@x = +{@x : @x}`` per variable; return (typedefs, substitution)."""
    if isinstance(sig, RenamedSignature):
        sig = sig.sig
    defs = dict(sig.typedefs)
    sigma = {}
    for x in sorted(set(vs)):
        name = "@" + x
        defs[name] = TypeDef(name, (), Plus([(name, Named(name))]))
        sigma[x] = Named(name)
    return defs, sigma


# ---------------------------------------------------------------------------
# Traces


def traces(g: Grammar, t: Term, k: int) -> frozenset:
    """All action words of length at most ``k`` performed from ``t``."""

    @lru_cache(maxsize=None)
    def go(term: Term, depth: int) -> frozenset:
        out = {()}
        if depth == 0:
            return frozenset(out)
        for act in g.enabled(term):
            for w in go(g.step(term, act), depth - 1):
                out.add((act,) + w)
        return frozenset(out)

    return go(t, k)


@dataclass(frozen=True)
class TraceComparison:
    equal: bool
    word: Optional[tuple[str, ...]] = None
    bound: int = 0

    def __bool__(self):
        return self.equal


class Oracle:
    """Grammar and term construction shared by the bounded oracles."""

    def __init__(self, sig: Union[RenamedSignature, Signature], vs: Iterable[str] = ()):
        rsig = sig if isinstance(sig, RenamedSignature) else rename_signature(sig)
        self.defs, self.sigma = close_open(rsig, vs)
        self.gen = rsig.namegen()
        self._grammar: Optional[Grammar] = None

    def term(self, t: TypeExpr) -> Term:
        closed = substitute(t, self.sigma)
        renamed, newdefs = rename_type((), closed, self.gen)
        if newdefs:
            for d in newdefs:
                self.defs[d.name] = d
            self._grammar = None
        return embed(renamed)

    @property
    def grammar(self) -> Grammar:
        if self._grammar is None:
            self._grammar = fog(self.defs)
        return self._grammar

    def compare(self, a: TypeExpr, b: TypeExpr, k: int) -> TraceComparison:
        ta, tb = self.term(a), self.term(b)
        g = self.grammar
        seen = {(ta, tb)}
        frontier = deque([(ta, tb, ())])
        while frontier:
            x, y, w = frontier.popleft()
            ex, ey = g.enabled(x), g.enabled(y)
            if ex != ey:
                if len(w) < k:
                    act = min(set(ex) ^ set(ey))
                    return TraceComparison(False, w + (act,), k)
                continue
            if len(w) + 1 >= k:
                continue
            for act in ex:
                nxt = (g.step(x, act), g.step(y, act))
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append((nxt[0], nxt[1], w + (act,)))
        return TraceComparison(True, None, k)

    def witnesses_path(self, a: TypeExpr, b: TypeExpr, path: Iterable[str]) -> bool:
        """Whether enabled actions differ after ``path`` or after one of its prefixes."""
        x, y = self.term(a), self.term(b)
        g = self.grammar
        path = list(path)
        for i in range(len(path) + 1):
            if g.enabled(x) != g.enabled(y):
                return True
            if i == len(path):
                return False
            x, y = g.step(x, path[i]), g.step(y, path[i])
            if x is None or y is None:
                return False
        return False


def bounded_trace_equal(sig: Union[RenamedSignature, Signature], a: TypeExpr, b: TypeExpr, k: int = 8,
                        vs: Optional[Iterable[str]] = None) -> TraceComparison:
    """Compare traces up to length ``k``; a difference comes with a shortest differing word.

    Open types are closed first with one fresh looping name per variable.
    """
    if vs is None:
        vs = free_vars_ordered(a, b)
    return Oracle(sig, vs).compare(a, b, k)


def trace_sets_equal(sig, a: TypeExpr, b: TypeExpr, k: int) -> bool:
    """Literal comparison of the two trace sets (exponential; for cross-checking)."""
    o = Oracle(sig, free_vars_ordered(a, b))
    ta, tb = o.term(a), o.term(b)
    return traces(o.grammar, ta, k) == traces(o.grammar, tb, k)


# ---------------------------------------------------------------------------
# Step-indexed bisimulation on unfoldings


def bisim_upto(sig: Union[Signature, RenamedSignature, Mapping[str, TypeDef]], a: TypeExpr, b: TypeExpr,
               k: int) -> bool:
    """Whether no difference between ``a`` and ``b`` is observable within ``k`` unfold steps.

    Works directly on type definitions; variables are closed like in the
    grammar oracle.
    """
    if isinstance(sig, RenamedSignature):
        sig = sig.sig
    base = sig if isinstance(sig, Signature) else Signature(typedefs=dict(sig))
    defs, sigma = close_open(base, free_vars_ordered(a, b))
    memo: dict = {}

    def go(x: TypeExpr, y: TypeExpr, n: int) -> bool:
        if n == 0:
            return True
        key = (x, y, n)
        if key in memo:
            return memo[key]
        ux, uy = unfold(defs, x), unfold(defs, y)
        if type(ux) is not type(uy):
            res = False
        elif isinstance(ux, One):
            res = True
        elif isinstance(ux, _Choice):
            res = ux.labels == uy.labels and all(go(ux[lab], uy[lab], n - 1) for lab in ux.labels)
        elif isinstance(ux, (Tensor, Lolli)):
            res = go(ux.left, uy.left, n - 1) and go(ux.right, uy.right, n - 1)
        else:
            raise AssertionError("open type in closed comparison: %s" % ux)
        memo[key] = res
        return res

    return go(substitute(a, sigma), substitute(b, sigma), k)
