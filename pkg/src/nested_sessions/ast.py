"""Abstract syntax for nested session types and the processes that use them.

Types and process expressions are immutable values.  Choice branches keep
their source order for printing, but two choices compare equal whenever they
carry the same label-to-type mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Union


@dataclass(frozen=True)
class SourceExtent:
    file: str
    start: tuple[int, int]
    end: tuple[int, int]

    def __post_init__(self):
        assert self.start <= self.end, (self.start, self.end)

    def __str__(self):
        return "%s:%d:%d-%d:%d" % (self.file, *self.start, *self.end)


# ---------------------------------------------------------------------------
# Types


class TypeExpr:
    __slots__ = ()

    def __str__(self):
        from .syntax import print_type

        return print_type(self)


class _Choice(TypeExpr):
    __slots__ = ("branches", "_map", "_hash")

    def __init__(self, branches: Union[Mapping[str, TypeExpr], Iterable[tuple[str, TypeExpr]]]):
        items = tuple(branches.items()) if isinstance(branches, Mapping) else tuple(branches)
        labels = [lab for lab, _ in items]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate label in choice: %r" % labels)
        object.__setattr__(self, "branches", items)
        object.__setattr__(self, "_map", dict(items))
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("types are immutable")

    @property
    def labels(self) -> frozenset[str]:
        return frozenset(self._map)

    def __getitem__(self, label: str) -> TypeExpr:
        return self._map[label]

    def __eq__(self, other):
        return type(self) is type(other) and self._map == other._map

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(self, "_hash", hash((type(self).__name__, frozenset(self._map.items()))))
        return self._hash

    def __repr__(self):
        return "%s(%r)" % (type(self).__name__, dict(self.branches))


class Plus(_Choice):
    """Internal choice: the provider sends one of the labels."""

    __slots__ = ()


class With(_Choice):
    """External choice: the provider receives one of the labels."""

    __slots__ = ()


@dataclass(frozen=True)
class Tensor(TypeExpr):
    left: TypeExpr
    right: TypeExpr


@dataclass(frozen=True)
class Lolli(TypeExpr):
    left: TypeExpr
    right: TypeExpr


@dataclass(frozen=True)
class One(TypeExpr):
    pass


@dataclass(frozen=True)
class Var(TypeExpr):
    name: str


@dataclass(frozen=True)
class Named(TypeExpr):
    name: str
    args: tuple[TypeExpr, ...] = ()

    def __post_init__(self):
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))


ONE = One()

Choice = _Choice


def is_structural(t: TypeExpr) -> bool:
    return not isinstance(t, Named)


def children(t: TypeExpr) -> Iterator[TypeExpr]:
    if isinstance(t, _Choice):
        for _, b in t.branches:
            yield b
    elif isinstance(t, (Tensor, Lolli)):
        yield t.left
        yield t.right
    elif isinstance(t, Named):
        yield from t.args


def map_children(t: TypeExpr, f) -> TypeExpr:
    if isinstance(t, _Choice):
        return type(t)((lab, f(b)) for lab, b in t.branches)
    if isinstance(t, Tensor):
        return Tensor(f(t.left), f(t.right))
    if isinstance(t, Lolli):
        return Lolli(f(t.left), f(t.right))
    if isinstance(t, Named):
        return Named(t.name, tuple(f(a) for a in t.args))
    return t


def substitute(target: TypeExpr, bindings: Mapping[str, TypeExpr]) -> TypeExpr:
    """Simultaneous substitution of types for variables; unbound variables stay."""
    if not bindings:
        return target

    def go(t):
        if isinstance(t, Var):
            return bindings.get(t.name, t)
        if isinstance(t, One):
            return t
        return map_children(t, go)

    return go(target)


def free_vars(t: TypeExpr) -> set[str]:
    return set(free_vars_ordered(t))


def free_vars_ordered(*ts: TypeExpr) -> list[str]:
    """Free variables in order of first occurrence (left to right, outside in)."""
    seen: dict[str, None] = {}

    def go(t):
        if isinstance(t, Var):
            seen.setdefault(t.name)
        else:
            for c in children(t):
                go(c)

    for t in ts:
        go(t)
    return list(seen)


def type_names(t: TypeExpr) -> Iterator[Named]:
    """Every name application occurring in ``t``."""
    if isinstance(t, Named):
        yield t
    for c in children(t):
        yield from type_names(c)


# ---------------------------------------------------------------------------
# Processes


class ProcExpr:
    __slots__ = ()


def _extent_field():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SendLabel(ProcExpr):
    chan: str
    label: str
    cont: ProcExpr
    extent: Optional[SourceExtent] = _extent_field()


@dataclass(frozen=True)
class Case(ProcExpr):
    chan: str
    branches: tuple[tuple[str, ProcExpr], ...]
    extent: Optional[SourceExtent] = _extent_field()

    @property
    def branch_map(self) -> dict[str, ProcExpr]:
        return dict(self.branches)


@dataclass(frozen=True)
class SendChan(ProcExpr):
    chan: str
    payload: str
    cont: ProcExpr
    extent: Optional[SourceExtent] = _extent_field()


@dataclass(frozen=True)
class RecvChan(ProcExpr):
    chan: str
    bound: str
    cont: ProcExpr
    extent: Optional[SourceExtent] = _extent_field()


@dataclass(frozen=True)
class Close(ProcExpr):
    chan: str
    extent: Optional[SourceExtent] = _extent_field()


@dataclass(frozen=True)
class Wait(ProcExpr):
    chan: str
    cont: ProcExpr
    extent: Optional[SourceExtent] = _extent_field()


@dataclass(frozen=True)
class Fwd(ProcExpr):
    offer: str
    use: str
    extent: Optional[SourceExtent] = _extent_field()


@dataclass(frozen=True)
class Spawn(ProcExpr):
    bound: str
    procname: str
    typeargs: tuple[TypeExpr, ...]
    chanargs: tuple[str, ...]
    cont: ProcExpr
    extent: Optional[SourceExtent] = _extent_field()


@dataclass(frozen=True)
class TailCall(ProcExpr):
    offer: str
    procname: str
    typeargs: tuple[TypeExpr, ...]
    chanargs: tuple[str, ...]
    extent: Optional[SourceExtent] = _extent_field()


def rename_channels(p: ProcExpr, ren: Mapping[str, str]) -> ProcExpr:
    """Substitute channel names, stopping under binders that rebind a name."""
    if not ren:
        return p
    r = lambda c: ren.get(c, c)  # noqa: E731
    if isinstance(p, SendLabel):
        return SendLabel(r(p.chan), p.label, rename_channels(p.cont, ren), p.extent)
    if isinstance(p, Case):
        return Case(r(p.chan), tuple((lab, rename_channels(q, ren)) for lab, q in p.branches), p.extent)
    if isinstance(p, SendChan):
        return SendChan(r(p.chan), r(p.payload), rename_channels(p.cont, ren), p.extent)
    if isinstance(p, RecvChan):
        inner = {k: v for k, v in ren.items() if k != p.bound}
        return RecvChan(r(p.chan), p.bound, rename_channels(p.cont, inner), p.extent)
    if isinstance(p, Close):
        return Close(r(p.chan), p.extent)
    if isinstance(p, Wait):
        return Wait(r(p.chan), rename_channels(p.cont, ren), p.extent)
    if isinstance(p, Fwd):
        return Fwd(r(p.offer), r(p.use), p.extent)
    if isinstance(p, Spawn):
        inner = {k: v for k, v in ren.items() if k != p.bound}
        return Spawn(p.bound, p.procname, p.typeargs, tuple(map(r, p.chanargs)),
                     rename_channels(p.cont, inner), p.extent)
    if isinstance(p, TailCall):
        return TailCall(r(p.offer), p.procname, p.typeargs, tuple(map(r, p.chanargs)), p.extent)
    raise TypeError(p)


def substitute_proc_types(p: ProcExpr, bindings: Mapping[str, TypeExpr]) -> ProcExpr:
    """Substitute types for type variables in the type arguments of calls."""
    if not bindings:
        return p
    s = lambda ts: tuple(substitute(t, bindings) for t in ts)  # noqa: E731
    go = lambda q: substitute_proc_types(q, bindings)  # noqa: E731
    if isinstance(p, SendLabel):
        return SendLabel(p.chan, p.label, go(p.cont), p.extent)
    if isinstance(p, Case):
        return Case(p.chan, tuple((lab, go(q)) for lab, q in p.branches), p.extent)
    if isinstance(p, SendChan):
        return SendChan(p.chan, p.payload, go(p.cont), p.extent)
    if isinstance(p, RecvChan):
        return RecvChan(p.chan, p.bound, go(p.cont), p.extent)
    if isinstance(p, Wait):
        return Wait(p.chan, go(p.cont), p.extent)
    if isinstance(p, Spawn):
        return Spawn(p.bound, p.procname, s(p.typeargs), p.chanargs, go(p.cont), p.extent)
    if isinstance(p, TailCall):
        return TailCall(p.offer, p.procname, s(p.typeargs), p.chanargs, p.extent)
    return p


def free_channels(p: ProcExpr) -> set[str]:
    if isinstance(p, SendLabel):
        return {p.chan} | free_channels(p.cont)
    if isinstance(p, Case):
        out = {p.chan}
        for _, q in p.branches:
            out |= free_channels(q)
        return out
    if isinstance(p, SendChan):
        return {p.chan, p.payload} | free_channels(p.cont)
    if isinstance(p, RecvChan):
        return {p.chan} | (free_channels(p.cont) - {p.bound})
    if isinstance(p, Close):
        return {p.chan}
    if isinstance(p, Wait):
        return {p.chan} | free_channels(p.cont)
    if isinstance(p, Fwd):
        return {p.offer, p.use}
    if isinstance(p, Spawn):
        return set(p.chanargs) | (free_channels(p.cont) - {p.bound})
    if isinstance(p, TailCall):
        return {p.offer, *p.chanargs}
    raise TypeError(p)


def proc_type_args(p: ProcExpr) -> Iterator[TypeExpr]:
    """All type arguments appearing in calls inside ``p``."""
    if isinstance(p, (Spawn, TailCall)):
        yield from p.typeargs
    if isinstance(p, Case):
        for _, q in p.branches:
            yield from proc_type_args(q)
    elif hasattr(p, "cont"):
        yield from proc_type_args(p.cont)


# ---------------------------------------------------------------------------
# Declarations and signatures


@dataclass(frozen=True)
class TypeDef:
    name: str
    params: tuple[str, ...]
    body: TypeExpr
    extent: Optional[SourceExtent] = _extent_field()


@dataclass(frozen=True)
class ProcDecl:
    name: str
    typeparams: tuple[str, ...]
    uses: tuple[tuple[str, TypeExpr], ...]
    offers: tuple[str, TypeExpr]
    extent: Optional[SourceExtent] = _extent_field()


@dataclass(frozen=True)
class ProcDef:
    name: str
    typeparams: tuple[str, ...]
    args: tuple[str, ...]
    offer: str
    body: ProcExpr
    extent: Optional[SourceExtent] = _extent_field()


@dataclass(frozen=True)
class EqType:
    params: tuple[str, ...]
    left: TypeExpr
    right: TypeExpr
    extent: Optional[SourceExtent] = _extent_field()


@dataclass
class Signature:
    typedefs: dict[str, TypeDef] = field(default_factory=dict)
    procdecls: dict[str, ProcDecl] = field(default_factory=dict)
    procdefs: dict[str, ProcDef] = field(default_factory=dict)
    eqtypes: list[EqType] = field(default_factory=list)

    @classmethod
    def of_types(cls, *defs: TypeDef) -> "Signature":
        return cls(typedefs={d.name: d for d in defs})


class UndefinedTypeName(Exception):
    pass


class ArityMismatch(Exception):
    pass


def unfold(sig: Signature | Mapping[str, TypeDef], t: TypeExpr) -> TypeExpr:
    """One-step unfolding of a name application; structural types are returned as is."""
    if not isinstance(t, Named):
        return t
    typedefs = sig.typedefs if isinstance(sig, Signature) else sig
    try:
        d = typedefs[t.name]
    except KeyError:
        raise UndefinedTypeName(t.name) from None
    if len(d.params) != len(t.args):
        raise ArityMismatch("%s expects %d arguments, got %d" % (t.name, len(d.params), len(t.args)))
    return substitute(d.body, dict(zip(d.params, t.args)))


# ---------------------------------------------------------------------------
# Validity


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    extent: Optional[SourceExtent] = None

    def __str__(self):
        where = str(self.extent) if self.extent else "<input>"
        return "%s error %s %s" % (where, self.code, self.message)


def _check_type(t, scope, typedefs, extent, what, out):
    for n in type_names(t):
        d = typedefs.get(n.name)
        if d is None:
            out.append(Violation("UndefinedTypeName", "%s: type name %s is not defined" % (what, n.name), extent))
        elif len(d.params) != len(n.args):
            out.append(Violation(
                "ArityMismatch",
                "%s: %s expects %d argument(s), given %d" % (what, n.name, len(d.params), len(n.args)),
                extent))
    for v in free_vars_ordered(t):
        if v not in scope:
            out.append(Violation("UnboundTypeVar", "%s: type variable %s is not in scope" % (what, v), extent))


def _check_params(params, extent, what, out):
    seen = set()
    for p in params:
        if p in seen:
            out.append(Violation("DuplicateParam", "%s: parameter %s repeated" % (what, p), extent))
        seen.add(p)


def validate_signature(sig: Signature) -> list[Violation]:
    """All validity violations of ``sig``; an empty list means the signature is valid."""
    out: list[Violation] = []
    for d in sig.typedefs.values():
        what = "type " + d.name
        _check_params(d.params, d.extent, what, out)
        if isinstance(d.body, (Named, Var)):
            out.append(Violation("NonContractive", "%s: definition body must be a type operator" % what, d.extent))
        _check_type(d.body, set(d.params), sig.typedefs, d.extent, what, out)
    for e in sig.eqtypes:
        what = "eqtype"
        _check_params(e.params, e.extent, what, out)
        for t in (e.left, e.right):
            _check_type(t, set(e.params), sig.typedefs, e.extent, what, out)
    for d in sig.procdecls.values():
        what = "decl " + d.name
        _check_params(d.typeparams, d.extent, what, out)
        chans = [c for c, _ in d.uses] + [d.offers[0]]
        if len(set(chans)) != len(chans):
            out.append(Violation("DuplicateChannel", "%s: channel names must be distinct" % what, d.extent))
        for _, t in (*d.uses, d.offers):
            _check_type(t, set(d.typeparams), sig.typedefs, d.extent, what, out)
    for d in sig.procdefs.values():
        what = "proc " + d.name
        _check_params(d.typeparams, d.extent, what, out)
        chans = list(d.args) + [d.offer]
        if len(set(chans)) != len(chans):
            out.append(Violation("DuplicateChannel", "%s: channel names must be distinct" % what, d.extent))
        for t in proc_type_args(d.body):
            _check_type(t, set(d.typeparams), sig.typedefs, d.extent, what, out)
    return out
