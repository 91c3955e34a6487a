"""Coinductive type equality with closures, a depth bound and rigid confirmation.

Name/name goals try, in order: reflexivity (ignoring nonvariant arguments),
closing a loop against a closure already in the context (``def``), and
expanding both definitions (``expd``), the last only while the number of
closures for that ordered pair of names is below the depth bound.  ``def``
premises are checked rigidly, i.e. without ``expd``.

Only mismatches found along the main spine (structural rules and ``expd``)
are reported as counterexamples.  A failed reflexivity or ``def`` attempt
just falls through to the next rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

from .ast import (
    EqType, Lolli, Named, One, Plus, Signature, Tensor, TypeDef, TypeExpr, Var, With,
    _Choice, free_vars, free_vars_ordered, substitute, unfold,
)
from .rename import NameGen, RenamedSignature, rename_signature, rename_type


@dataclass(frozen=True)
class Closure:
    vars: frozenset
    left: Named
    right: Named

    def __post_init__(self):
        object.__setattr__(self, "vars", frozenset(self.vars))

    @property
    def heads(self) -> tuple[str, str]:
        return (self.left.name, self.right.name)

    def __str__(self):
        from .syntax import print_type

        return "<%s; %s == %s>" % (",".join(sorted(self.vars)), print_type(self.left), print_type(self.right))


@dataclass(frozen=True)
class Equal:
    witness: frozenset = frozenset()

    def __str__(self):
        return "equal"


@dataclass(frozen=True)
class NotEqual:
    path: tuple[str, ...]
    reason: str

    def __str__(self):
        return "not-equal %s" % (" ".join(self.path) if self.path else "ε")


@dataclass(frozen=True)
class Inconclusive:
    reason: str
    blocking: Optional[tuple[str, str]] = None

    def __str__(self):
        return "inconclusive"


Verdict = Union[Equal, NotEqual, Inconclusive]


class InvalidEqtype(Exception):
    def __init__(self, failures: list[tuple[EqType, Verdict]]):
        self.failures = failures
        super().__init__("; ".join("eqtype %s = %s: %s (%s)" % (e.left, e.right, v, getattr(v, "reason", ""))
                                   for e, v in failures))


# ---------------------------------------------------------------------------
# Nonvariance


def _observed(t: TypeExpr, alpha: str, variant) -> bool:
    if isinstance(t, Var):
        return t.name == alpha
    if isinstance(t, One):
        return False
    if isinstance(t, Named):
        return any(variant(t.name, j) and _observed(a, alpha, variant) for j, a in enumerate(t.args))
    if isinstance(t, _Choice):
        return any(_observed(b, alpha, variant) for _, b in t.branches)
    return _observed(t.left, alpha, variant) or _observed(t.right, alpha, variant)


def compute_nonvariant(sig: Union[RenamedSignature, Signature, Mapping[str, TypeDef]],
                       known: Optional[dict] = None) -> dict[tuple[str, int], bool]:
    """Map ``(name, index)`` to whether the definition ignores that parameter.

    Least fixed point of "the parameter is observed".  Entries already in
    ``known`` are taken as settled, which lets new definitions be added
    incrementally as long as old definitions never mention them.
    """
    if isinstance(sig, RenamedSignature):
        sig = sig.sig
    defs = sig.typedefs if isinstance(sig, Signature) else sig
    known = known or {}
    variant: dict[tuple[str, int], bool] = {}
    todo = [d for d in defs.values() if any((d.name, i) not in known for i in range(len(d.params)))]

    def is_variant(name, j):
        if (name, j) in known:
            return not known[(name, j)]
        return variant.get((name, j), False)

    changed = True
    while changed:
        changed = False
        for d in todo:
            for i, p in enumerate(d.params):
                if variant.get((d.name, i)):
                    continue
                if _observed(d.body, p, is_variant):
                    variant[(d.name, i)] = True
                    changed = True
    out = dict(known)
    for d in todo:
        for i in range(len(d.params)):
            out[(d.name, i)] = not variant.get((d.name, i), False)
    return out


# ---------------------------------------------------------------------------
# Matching a closure against a goal


def _match(template: TypeExpr, goal: TypeExpr, vs: frozenset, binding: dict) -> bool:
    if isinstance(template, Var) and template.name in vs:
        prev = binding.get(template.name)
        if prev is None:
            binding[template.name] = goal
            return True
        return prev == goal
    if isinstance(template, Named) and isinstance(goal, Named) and template.name == goal.name \
            and len(template.args) == len(goal.args):
        return all(_match(t, g, vs, binding) for t, g in zip(template.args, goal.args))
    # leave the mismatch to rigid confirmation, but do not bind through it
    return True


def match_closure(template: Closure, left_goal: Named, right_goal: Named,
                  nonvariant: Optional[Mapping[tuple[str, int], bool]] = None) -> Optional[dict[str, TypeExpr]]:
    """Candidate substitution for the closure's variables, or ``None``.

    Variables are bound from the left goal first; bindings that conflict
    within one side reject the candidate, while a conflict between the two
    sides keeps the left binding and leaves the verdict to confirmation.
    Arguments at nonvariant positions are not matched.
    """
    nonvariant = nonvariant or {}
    if template.heads != (left_goal.name, right_goal.name):
        return None
    result: dict[str, TypeExpr] = {}
    for tmpl, goal in ((template.left, left_goal), (template.right, right_goal)):
        side: dict[str, TypeExpr] = {}
        for j, (ta, ga) in enumerate(zip(tmpl.args, goal.args)):
            if nonvariant.get((tmpl.name, j)):
                continue
            if not _match(ta, ga, template.vars, side):
                return None
        for k, v in side.items():
            result.setdefault(k, v)
    for v in template.vars:
        result.setdefault(v, One())
    return result


# ---------------------------------------------------------------------------
# The algorithm


def _label_action(t: _Choice, label: str) -> str:
    return ("+" if isinstance(t, Plus) else "&") + label


def _head(t: TypeExpr) -> str:
    if isinstance(t, Plus):
        return "+{%s}" % ",".join(sorted(t.labels))
    if isinstance(t, With):
        return "&{%s}" % ",".join(sorted(t.labels))
    if isinstance(t, Tensor):
        return "*"
    if isinstance(t, Lolli):
        return "-o"
    if isinstance(t, One):
        return "1"
    if isinstance(t, Var):
        return t.name
    return t.name


MAX_CONFIRM_NESTING = 32


class EqualityChecker:
    """Equality queries against one renamed signature and a fixed seed set.

    Structural goal types are renamed on the fly; the extra definitions live
    in a checker-local overlay so the shared signature is never mutated.
    """

    def __init__(self, rsig: Union[RenamedSignature, Signature], seeds: Sequence[Closure] = (),
                 depth_bound: int = 1):
        if isinstance(rsig, Signature):
            rsig = rename_signature(rsig)
        if depth_bound < 1:
            raise ValueError("depth bound must be positive")
        self.rsig = rsig
        self.defs: dict[str, TypeDef] = dict(rsig.sig.typedefs)
        self.namegen: NameGen = rsig.namegen()
        self.nonvariant = compute_nonvariant(self.defs)
        self.seeds: tuple[Closure, ...] = tuple(seeds)
        self.depth_bound = depth_bound
        self._goal_cache: dict[TypeExpr, TypeExpr] = {}

    # -- goal preparation

    def prepare(self, t: TypeExpr) -> TypeExpr:
        """Rename ``t`` so that it is an atom or a name application over atoms."""
        hit = self._goal_cache.get(t)
        if hit is not None:
            return hit
        renamed, newdefs = rename_type(free_vars(t), t, self.namegen)
        if newdefs:
            for d in newdefs:
                self.defs[d.name] = d
            self.nonvariant = compute_nonvariant({d.name: d for d in newdefs}, known=self.nonvariant)
        self._goal_cache[t] = renamed
        return renamed

    def unfold(self, t: TypeExpr) -> TypeExpr:
        return unfold(self.defs, t)

    # -- entry points

    def check(self, vs: Iterable[str], a: TypeExpr, b: TypeExpr,
              gamma: Sequence[Closure] = ()) -> Verdict:
        vs = frozenset(vs)
        a, b = self.prepare(a), self.prepare(b)
        return self._eq(vs, tuple(self.seeds) + tuple(gamma), a, b, (), False, frozenset())

    def rigid(self, vs: Iterable[str], gamma: Sequence[Closure], a: TypeExpr, b: TypeExpr) -> Verdict:
        vs = frozenset(vs)
        a, b = self.prepare(a), self.prepare(b)
        return self._eq(vs, tuple(gamma), a, b, (), True, frozenset())

    # -- core

    def _eq(self, vs, gamma, a, b, path, rigid, pending) -> Verdict:
        if a == b:
            return Equal()
        a_named, b_named = isinstance(a, Named), isinstance(b, Named)
        if a_named and b_named:
            return self._names(vs, gamma, a, b, path, rigid, pending)
        if a_named:
            return self._eq(vs, gamma, self.unfold(a), b, path, rigid, pending)
        if b_named:
            return self._eq(vs, gamma, a, self.unfold(b), path, rigid, pending)
        return self._structural(vs, gamma, a, b, path, rigid, pending)

    def _structural(self, vs, gamma, a, b, path, rigid, pending) -> Verdict:
        if type(a) is not type(b):
            return NotEqual(path, "%s vs %s" % (_head(a), _head(b)))
        if isinstance(a, Var):
            if a.name == b.name:
                return Equal()
            return NotEqual(path, "variable %s vs variable %s" % (a.name, b.name))
        if isinstance(a, One):
            return Equal()
        if isinstance(a, _Choice):
            if a.labels != b.labels:
                return NotEqual(path, "label sets %s vs %s" % (_head(a), _head(b)))
            pairs = [(_label_action(a, lab), a[lab], b[lab]) for lab, _ in a.branches]
        elif isinstance(a, Tensor):
            pairs = [("*1", a.left, b.left), ("*2", a.right, b.right)]
        else:
            pairs = [("-o1", a.left, b.left), ("-o2", a.right, b.right)]
        witness = set()
        stuck: Optional[Inconclusive] = None
        for act, x, y in pairs:
            v = self._eq(vs, gamma, x, y, path + (act,), rigid, pending)
            if isinstance(v, NotEqual):
                return v
            if isinstance(v, Inconclusive):
                stuck = stuck or v
            else:
                witness |= v.witness
        return stuck if stuck is not None else Equal(frozenset(witness))

    def _names(self, vs, gamma, a: Named, b: Named, path, rigid, pending) -> Verdict:
        # refl
        if a.name == b.name:
            assert len(a.args) == len(b.args), "arity mismatch survived validation"
            ok = True
            witness = set()
            for j, (x, y) in enumerate(zip(a.args, b.args)):
                if self.nonvariant.get((a.name, j)):
                    continue
                v = self._eq(vs, gamma, x, y, path, rigid, pending)
                if not isinstance(v, Equal):
                    ok = False
                    break
                witness |= v.witness
            if ok:
                return Equal(frozenset(witness))
        # def; a goal already being confirmed is not retried, which keeps
        # rigid confirmation from chasing its own tail
        key = (a, b)
        if key not in pending and len(pending) < MAX_CONFIRM_NESTING:
            inner = pending | {key}
            for c in reversed(gamma):
                if c.heads != (a.name, b.name):
                    continue
                sigma = match_closure(c, a, b, self.nonvariant)
                if sigma is None:
                    continue
                left = substitute(c.left, sigma)
                if not isinstance(self._eq(vs, gamma, left, a, path, True, inner), Equal):
                    continue
                right = substitute(c.right, sigma)
                if not isinstance(self._eq(vs, gamma, right, b, path, True, inner), Equal):
                    continue
                return Equal()
        # expd
        if rigid:
            return Inconclusive("no rule closes %s == %s without expansion" % (a, b), (a.name, b.name))
        count = sum(1 for c in gamma if c.heads == (a.name, b.name) and c not in self.seeds)
        if count >= self.depth_bound:
            return Inconclusive("depth bound %d reached for %s == %s" % (self.depth_bound, a.name, b.name),
                                (a.name, b.name))
        c = Closure(vs, a, b)
        v = self._eq(vs, gamma + (c,), self.unfold(a), self.unfold(b), path, False, pending)
        if isinstance(v, Equal):
            return Equal(v.witness | {c})
        return v


# ---------------------------------------------------------------------------
# Functional interface


def check_equal(vs: Iterable[str], seeds: Sequence[Closure], a: TypeExpr, b: TypeExpr,
                sig: Union[RenamedSignature, Signature], depth_bound: int = 1) -> Verdict:
    return EqualityChecker(sig, seeds, depth_bound).check(vs, a, b)


def rigid_equal(vs: Iterable[str], gamma: Sequence[Closure], a: TypeExpr, b: TypeExpr,
                sig: Union[RenamedSignature, Signature]) -> Verdict:
    return EqualityChecker(sig, (), 1).rigid(vs, gamma, a, b)


def seed_and_validate(eqtypes: Sequence[EqType], sig: Union[RenamedSignature, Signature],
                      depth_bound: int = 1) -> tuple[tuple[Closure, ...], EqualityChecker]:
    """Turn eqtype declarations into seed closures and check them together.

    Each declaration is checked one unfolding deep: both sides are expanded
    and the bodies compared under all seeds.  Checking the declaration itself
    against the seeds would close immediately on its own closure.
    Returns the seeds and a checker using them; raises ``InvalidEqtype``.
    """
    checker = EqualityChecker(sig, (), depth_bound)
    seeds = []
    for e in eqtypes:
        left, right = checker.prepare(e.left), checker.prepare(e.right)
        if isinstance(left, Named) and isinstance(right, Named):
            seeds.append(Closure(frozenset(e.params), left, right))
    checker.seeds = tuple(seeds)
    failures = []
    for e in eqtypes:
        vs = frozenset(e.params)
        left, right = checker.prepare(e.left), checker.prepare(e.right)
        v = checker._eq(vs, checker.seeds, checker.unfold(left), checker.unfold(right), (), False, frozenset())
        if not isinstance(v, Equal):
            failures.append((e, v))
    if failures:
        raise InvalidEqtype(failures)
    return checker.seeds, checker


def equality_for(sig: Signature, depth_bound: int = 1) -> EqualityChecker:
    """Rename ``sig``, validate its eqtypes and return a seeded checker."""
    return seed_and_validate(sig.eqtypes, rename_signature(sig), depth_bound)[1]
