"""Internal renaming.

Every structural subterm below the top of a definition body is replaced by a
fresh name ``%i`` applied to the subterm's free variables, so that in the
resulting signature definitions alternate between type operators and name
applications.  ``1`` and variables stay in place.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .ast import (
    Lolli, Named, One, Signature, SourceExtent, Tensor, TypeDef, TypeExpr, Var,
    _Choice, children, free_vars_ordered, is_structural, map_children,
)

FRESH_PREFIX = "%"
_FRESH_RE = re.compile(r"^%(\d+)$")


class NameGen:
    """Deterministic supply of ``%0, %1, ...`` avoiding names already taken."""

    def __init__(self, start: int = 0):
        self.next_index = start

    @classmethod
    def after(cls, names: Iterable[str]) -> "NameGen":
        top = -1
        for n in names:
            m = _FRESH_RE.match(n)
            if m:
                top = max(top, int(m.group(1)))
        return cls(top + 1)

    def fresh(self) -> str:
        name = "%s%d" % (FRESH_PREFIX, self.next_index)
        self.next_index += 1
        return name


def is_fresh_name(name: str) -> bool:
    return bool(_FRESH_RE.match(name))


@dataclass
class RenamedSignature:
    sig: Signature
    fresh_names: set[str] = field(default_factory=set)
    origin: dict[str, Union[SourceExtent, str, None]] = field(default_factory=dict)

    @property
    def typedefs(self) -> dict[str, TypeDef]:
        return self.sig.typedefs

    def namegen(self) -> NameGen:
        return NameGen.after(self.sig.typedefs)


def _rename_pos(t: TypeExpr, gen: NameGen, out: list[TypeDef]) -> TypeExpr:
    # rename-nostr: 1 and variables stay; arguments of names are renamed in turn
    if isinstance(t, (One, Var)):
        return t
    if isinstance(t, Named):
        return Named(t.name, tuple(_rename_pos(a, gen, out) for a in t.args))
    # rename-str: allocate the name first so numbering runs outside-in
    name = gen.fresh()
    params = tuple(free_vars_ordered(t))
    slot = len(out)
    out.append(None)  # placeholder keeps definition order outside-in
    out[slot] = TypeDef(name, params, _rename_body(t, gen, out))
    return Named(name, tuple(Var(p) for p in params))


def _rename_body(t: TypeExpr, gen: NameGen, out: list[TypeDef]) -> TypeExpr:
    return map_children(t, lambda c: _rename_pos(c, gen, out))


def rename_type(vars_in_scope: Iterable[str], t: TypeExpr, namegen: NameGen) -> tuple[TypeExpr, list[TypeDef]]:
    """Rename a goal type: a structural ``t`` receives one top-level fresh name."""
    scope = set(vars_in_scope)
    extra = set(free_vars_ordered(t)) - scope
    assert not extra, "free variables %s not in scope" % sorted(extra)
    out: list[TypeDef] = []
    return _rename_pos(t, namegen, out), out


def rename_signature(sig: Signature) -> RenamedSignature:
    gen = NameGen.after(sig.typedefs)
    typedefs: dict[str, TypeDef] = {}
    fresh: set[str] = set()
    origin: dict = {}
    for d in sig.typedefs.values():
        out: list[TypeDef] = []
        body = _rename_body(d.body, gen, out)
        typedefs[d.name] = TypeDef(d.name, d.params, body, d.extent)
        origin[d.name] = d.extent
        for nd in out:
            typedefs[nd.name] = nd
            fresh.add(nd.name)
            origin[nd.name] = "synthetic:" + d.name
    new = Signature(typedefs, dict(sig.procdecls), dict(sig.procdefs), list(sig.eqtypes))
    return RenamedSignature(new, fresh, origin)


# ---------------------------------------------------------------------------
# Alternation invariant


def _is_atom(t: TypeExpr) -> bool:
    if isinstance(t, (One, Var)):
        return True
    if isinstance(t, Named):
        return all(_is_atom(a) for a in t.args)
    return False


def alternation_violations(sig: Union[Signature, RenamedSignature]) -> list[str]:
    """Definitions whose body is not an operator over atoms; empty when the invariant holds."""
    if isinstance(sig, RenamedSignature):
        sig = sig.sig
    bad = []
    for d in sig.typedefs.values():
        if not is_structural(d.body) or isinstance(d.body, Var):
            bad.append("%s: body is not a type operator" % d.name)
            continue
        for c in children(d.body):
            if not _is_atom(c):
                bad.append("%s: structural subterm %s below the top" % (d.name, c))
    return bad


def check_alternation(sig) -> bool:
    return not alternation_violations(sig)


# ---------------------------------------------------------------------------
# Canonical form, used to compare renamings up to the choice of fresh names


def canonical_form(sig: Union[Signature, RenamedSignature], roots: Optional[Iterable[str]] = None,
                   is_internal=is_fresh_name) -> dict[str, tuple]:
    """Rename internal names by order of first occurrence from ``roots``.

    Returns a map from (canonical) name to ``(params, body)``, with internal
    names replaced by ``#0, #1, ...`` and parameters by position.
    """
    if isinstance(sig, RenamedSignature):
        sig = sig.sig
    roots = list(roots) if roots is not None else [n for n in sig.typedefs if not is_internal(n)]
    mapping: dict[str, str] = {}
    order: list[str] = []

    def visit_name(n):
        if n in mapping:
            return
        mapping[n] = "#%d" % len([m for m in mapping if is_internal(m)]) if is_internal(n) else n
        order.append(n)

    def canon(t, pmap):
        if isinstance(t, Var):
            return Var(pmap.get(t.name, t.name))
        if isinstance(t, Named):
            visit_name(t.name)
            return Named(mapping[t.name], tuple(canon(a, pmap) for a in t.args))
        return map_children(t, lambda c: canon(c, pmap))

    for r in roots:
        visit_name(r)
    out: dict[str, tuple] = {}
    i = 0
    while i < len(order):
        n = order[i]
        i += 1
        d = sig.typedefs[n]
        pmap = {p: "$%d" % k for k, p in enumerate(d.params)}
        out[mapping[n]] = (tuple(pmap[p] for p in d.params), canon(d.body, pmap))
    return out
