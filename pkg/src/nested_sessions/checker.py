"""Bidirectional type checking of processes.

Each rule inspects the unfolded type of the channel it acts on, so contexts
may hold name applications freely.  Channels are linear: every channel in
the context is consumed exactly once, ``close`` needs an empty context and a
forward needs exactly the forwarded channel.  Type equality is asked of the
equality module wherever two independently written types meet (forwarding,
passing a channel, spawning).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

from .ast import (
    Case, Close, Fwd, Lolli, Named, One, Plus, ProcDecl, ProcDef, ProcExpr, RecvChan,
    SendChan, SendLabel, Signature, SourceExtent, Spawn, TailCall, Tensor, TypeExpr, Var,
    Violation, Wait, With, _Choice, free_vars, substitute, unfold, validate_signature,
)
from .equality import EqualityChecker, Equal, InvalidEqtype, Verdict, seed_and_validate
from .rename import rename_signature
from .syntax import CompressionMap, pretty_print


class TypeCheckError(Exception):
    def __init__(self, code: str, message: str, extent: Optional[SourceExtent] = None,
                 verdict: Optional[Verdict] = None, where: str = ""):
        self.code = code
        self.message = message
        self.extent = extent
        self.verdict = verdict
        self.where = where
        super().__init__(str(self))

    def __str__(self):
        loc = str(self.extent) if self.extent else "<input>"
        msg = self.message if not self.where else "%s: %s" % (self.where, self.message)
        return "%s error %s %s" % (loc, self.code, msg)


@dataclass
class TypingContext:
    typevars: frozenset
    channels: dict[str, TypeExpr]
    offered: tuple[str, TypeExpr]

    def __post_init__(self):
        self.typevars = frozenset(self.typevars)
        self.channels = dict(self.channels)
        assert self.offered[0] not in self.channels, "offered channel also used"


class Checker:
    def __init__(self, sig: Signature, equality: Optional[EqualityChecker] = None, depth_bound: int = 1):
        self.sig = sig
        self.eq = equality or EqualityChecker(rename_signature(sig), (), depth_bound)
        self.cmap = CompressionMap()

    # -- helpers

    def show(self, t: TypeExpr) -> str:
        return pretty_print(t, self.cmap)

    def unfold(self, t: TypeExpr) -> TypeExpr:
        u = unfold(self.sig, t)
        if isinstance(t, Named):
            self.cmap.record(t, u)
        return u

    def equal(self, vs, have: TypeExpr, want: TypeExpr, what: str, ext) -> None:
        v = self.eq.check(vs, have, want)
        if not isinstance(v, Equal):
            raise TypeCheckError("TypeMismatch", "%s: %s is not equal to %s (%s%s)" % (
                what, self.show(have), self.show(want), v,
                ": " + v.reason if getattr(v, "reason", "") else ""), ext, v)

    def _expect(self, t: TypeExpr, cls, chan: str, ext) -> TypeExpr:
        u = self.unfold(t)
        if not isinstance(u, cls):
            names = {Plus: "an internal choice", With: "an external choice", Tensor: "a tensor",
                     Lolli: "a lolli", One: "1"}
            raise TypeCheckError("TypeMismatch", "channel %s has type %s, expected %s" % (
                chan, self.show(t), names[cls]), ext)
        return u

    @staticmethod
    def _fresh_binder(ctx: dict, offer: str, dead: frozenset, name: str, ext):
        if name in ctx or name == offer:
            raise TypeCheckError("LinearityViolation", "channel %s is already live and may not be rebound" % name, ext)

    @staticmethod
    def _missing(ctx: dict, dead: frozenset, name: str, ext):
        if name in dead:
            return TypeCheckError("LinearityViolation", "channel %s was already consumed" % name, ext)
        return TypeCheckError("UnknownChannel", "channel %s is not in scope" % name, ext)

    # -- the judgment  V ; ctx |- p :: (x : a)

    def check(self, vs: frozenset, ctx: dict, p: ProcExpr, x: str, a: TypeExpr, dead: frozenset = frozenset()):
        ext = getattr(p, "extent", None)
        if isinstance(p, SendLabel):
            c = p.chan
            if c == x:
                u = self._expect(a, Plus, c, ext)
                if p.label not in u.labels:
                    raise TypeCheckError("LabelSetMismatch", "label %s not among %s of %s" % (
                        p.label, sorted(u.labels), self.show(a)), ext)
                return self.check(vs, ctx, p.cont, x, u[p.label], dead)
            if c not in ctx:
                raise self._missing(ctx, dead, c, ext)
            u = self._expect(ctx[c], With, c, ext)
            if p.label not in u.labels:
                raise TypeCheckError("LabelSetMismatch", "label %s not among %s of %s" % (
                    p.label, sorted(u.labels), self.show(ctx[c])), ext)
            return self.check(vs, {**ctx, c: u[p.label]}, p.cont, x, a, dead)

        if isinstance(p, Case):
            c = p.chan
            arms = p.branch_map
            if c == x:
                u = self._expect(a, With, c, ext)
                self._labels_match(u, arms, c, ext)
                for lab, q in p.branches:
                    self.check(vs, ctx, q, x, u[lab], dead)
                return
            if c not in ctx:
                raise self._missing(ctx, dead, c, ext)
            u = self._expect(ctx[c], Plus, c, ext)
            self._labels_match(u, arms, c, ext)
            for lab, q in p.branches:
                self.check(vs, {**ctx, c: u[lab]}, q, x, a, dead)
            return

        if isinstance(p, SendChan):
            c, d = p.chan, p.payload
            if d == c or d == x or d not in ctx:
                if d == x or d == c:
                    raise TypeCheckError("LinearityViolation", "channel %s cannot be sent along %s" % (d, c), ext)
                raise self._missing(ctx, dead, d, ext)
            rest = {k: v for k, v in ctx.items() if k != d}
            if c == x:
                u = self._expect(a, Tensor, c, ext)
                self.equal(vs, ctx[d], u.left, "sending %s along %s" % (d, c), ext)
                return self.check(vs, rest, p.cont, x, u.right, dead | {d})
            if c not in ctx:
                raise self._missing(ctx, dead, c, ext)
            u = self._expect(ctx[c], Lolli, c, ext)
            self.equal(vs, ctx[d], u.left, "sending %s along %s" % (d, c), ext)
            rest[c] = u.right
            return self.check(vs, rest, p.cont, x, a, dead | {d})

        if isinstance(p, RecvChan):
            c, y = p.chan, p.bound
            self._fresh_binder(ctx, x, dead, y, ext)
            if c == x:
                u = self._expect(a, Lolli, c, ext)
                return self.check(vs, {**ctx, y: u.left}, p.cont, x, u.right, dead - {y})
            if c not in ctx:
                raise self._missing(ctx, dead, c, ext)
            u = self._expect(ctx[c], Tensor, c, ext)
            return self.check(vs, {**ctx, c: u.right, y: u.left}, p.cont, x, a, dead - {y})

        if isinstance(p, Close):
            if p.chan != x:
                if p.chan in ctx:
                    raise TypeCheckError("TypeMismatch", "close %s: only the offered channel %s can be closed" % (
                        p.chan, x), ext)
                raise self._missing(ctx, dead, p.chan, ext)
            self._expect(a, One, x, ext)
            if ctx:
                raise TypeCheckError("LinearityViolation", "closing %s leaves channels unused: %s" % (
                    x, ", ".join(sorted(ctx))), ext)
            return

        if isinstance(p, Wait):
            c = p.chan
            if c not in ctx:
                if c == x:
                    raise TypeCheckError("TypeMismatch", "wait %s: cannot wait on the offered channel" % c, ext)
                raise self._missing(ctx, dead, c, ext)
            self._expect(ctx[c], One, c, ext)
            rest = {k: v for k, v in ctx.items() if k != c}
            return self.check(vs, rest, p.cont, x, a, dead | {c})

        if isinstance(p, Fwd):
            if p.offer != x:
                raise TypeCheckError("UnknownChannel", "forward must provide the offered channel %s, not %s" % (
                    x, p.offer), ext)
            if p.use not in ctx:
                raise self._missing(ctx, dead, p.use, ext)
            extra = sorted(k for k in ctx if k != p.use)
            if extra:
                raise TypeCheckError("LinearityViolation", "forward leaves channels unused: %s" % ", ".join(extra), ext)
            self.equal(vs, ctx[p.use], a, "forwarding %s to %s" % (p.use, x), ext)
            return

        if isinstance(p, (Spawn, TailCall)):
            rest, offer_t = self._call(vs, ctx, x, dead, p, ext)
            if isinstance(p, Spawn):
                self._fresh_binder(rest, x, dead, p.bound, ext)
                used = dead | set(p.chanargs)
                return self.check(vs, {**rest, p.bound: offer_t}, p.cont, x, a, frozenset(used) - {p.bound})
            # a tail call spawns a fresh channel and forwards it to the offered one
            if p.offer != x:
                raise TypeCheckError("UnknownChannel", "tail call must provide the offered channel %s, not %s" % (
                    x, p.offer), ext)
            if rest:
                raise TypeCheckError("LinearityViolation", "tail call leaves channels unused: %s" % ", ".join(sorted(rest)), ext)
            self.equal(vs, offer_t, a, "result of %s" % p.procname, ext)
            return
        raise TypeError(p)

    def _labels_match(self, u: _Choice, arms: Mapping[str, ProcExpr], c: str, ext):
        if set(arms) != u.labels:
            missing = sorted(u.labels - set(arms))
            extra = sorted(set(arms) - u.labels)
            parts = []
            if missing:
                parts.append("missing %s" % ", ".join(missing))
            if extra:
                parts.append("unexpected %s" % ", ".join(extra))
            raise TypeCheckError("LabelSetMismatch", "case on %s: %s" % (c, "; ".join(parts)), ext)

    def _call(self, vs, ctx, x, dead, p, ext):
        decl = self.sig.procdecls.get(p.procname)
        if decl is None:
            raise TypeCheckError("UnknownProcess", "process %s is not declared" % p.procname, ext)
        if len(p.typeargs) != len(decl.typeparams):
            raise TypeCheckError("TypeArityMismatch", "%s expects %d type argument(s), given %d" % (
                p.procname, len(decl.typeparams), len(p.typeargs)), ext)
        if len(p.chanargs) != len(decl.uses):
            raise TypeCheckError("ChannelArityMismatch", "%s expects %d channel argument(s), given %d" % (
                p.procname, len(decl.uses), len(p.chanargs)), ext)
        for t in p.typeargs:
            loose = free_vars(t) - vs
            if loose:
                raise TypeCheckError("UnboundTypeVar", "type variable(s) %s not in scope" % ", ".join(sorted(loose)), ext)
        inst = dict(zip(decl.typeparams, p.typeargs))
        seen = set()
        for y in p.chanargs:
            if y in seen or y == x:
                raise TypeCheckError("LinearityViolation", "channel %s passed twice or is the offered channel" % y, ext)
            seen.add(y)
            if y not in ctx:
                raise self._missing(ctx, dead, y, ext)
        for y, (formal, t) in zip(p.chanargs, decl.uses):
            self.equal(vs, ctx[y], substitute(t, inst), "argument %s for %s of %s" % (y, formal, p.procname), ext)
        rest = {k: v for k, v in ctx.items() if k not in seen}
        return rest, substitute(decl.offers[1], inst)


def check_process(ctx: TypingContext, p: ProcExpr, sig: Signature,
                  equality: Optional[EqualityChecker] = None, depth_bound: int = 1) -> None:
    """Raise ``TypeCheckError`` unless ``p`` provides ``ctx.offered`` using exactly ``ctx.channels``."""
    Checker(sig, equality, depth_bound).check(ctx.typevars, dict(ctx.channels), p, ctx.offered[0], ctx.offered[1])


@dataclass
class CheckReport:
    errors: list = field(default_factory=list)
    checked: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def lines(self) -> list[str]:
        return [str(e) for e in self.errors]


def definition_context(decl: ProcDecl, d: ProcDef) -> TypingContext:
    """Typing context for ``d`` with the declaration's names replaced by the definition's."""
    if len(decl.typeparams) != len(d.typeparams):
        raise TypeCheckError("TypeArityMismatch", "definition of %s has %d type parameter(s), declaration %d" % (
            d.name, len(d.typeparams), len(decl.typeparams)), d.extent)
    if len(decl.uses) != len(d.args):
        raise TypeCheckError("ChannelArityMismatch", "definition of %s has %d channel(s), declaration %d" % (
            d.name, len(d.args), len(decl.uses)), d.extent)
    ren = {a: Var(b) for a, b in zip(decl.typeparams, d.typeparams)}
    chans = {y: substitute(t, ren) for y, (_, t) in zip(d.args, decl.uses)}
    return TypingContext(frozenset(d.typeparams), chans, (d.offer, substitute(decl.offers[1], ren)))


def check_all(sig: Signature, depth_bound: int = 1) -> CheckReport:
    """Validate ``sig``, its eqtypes and every process definition."""
    report = CheckReport()
    violations = validate_signature(sig)
    if violations:
        report.errors.extend(violations)
        return report
    rsig = rename_signature(sig)
    try:
        _, eq = seed_and_validate(sig.eqtypes, rsig, depth_bound)
    except InvalidEqtype as exc:
        for e, v in exc.failures:
            report.errors.append(TypeCheckError("InvalidEqtype", "eqtype %s = %s does not hold (%s%s)" % (
                e.left, e.right, v, ": " + v.reason if getattr(v, "reason", "") else ""), e.extent, v))
        return report
    checker = Checker(sig, eq, depth_bound)
    for name, decl in sig.procdecls.items():
        if name not in sig.procdefs:
            report.errors.append(TypeCheckError("MissingDefinition", "process %s is declared but not defined" % name,
                                                decl.extent))
    for name, d in sig.procdefs.items():
        decl = sig.procdecls.get(name)
        if decl is None:
            report.errors.append(TypeCheckError("UnknownProcess", "process %s is defined but not declared" % name,
                                                d.extent))
            continue
        try:
            ctx = definition_context(decl, d)
            checker.check(ctx.typevars, ctx.channels, d.body, ctx.offered[0], ctx.offered[1])
            report.checked.append(name)
        except TypeCheckError as exc:
            exc.where = exc.where or "proc " + name
            report.errors.append(exc)
    return report
