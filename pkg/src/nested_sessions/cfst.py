"""Context-free session types and their embedding as unary nested types.

Concrete syntax, one equation per line (``%`` starts a comment)::

    A = +{ a : A ; B, b : skip }

``;`` is the loosest operator and associates to the right; choices
are ``+{...}`` (internal) and ``&{...}`` (external); ``skip`` is the empty
protocol.  Every equation ``s = T`` becomes ``type s[a] = tau_a(T)`` where
``a`` stands for the continuation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Union

from .ast import Named, Plus, Signature, TypeDef, TypeExpr, Var, With, substitute
from .syntax import Diagnostic, ParseError, Parser, _Fail, print_typedef


class NonContractive(Exception):
    pass


class UndefinedName(Exception):
    pass


class CfstExpr:
    __slots__ = ()


@dataclass(frozen=True)
class Skip(CfstExpr):
    def __str__(self):
        return "skip"


@dataclass(frozen=True)
class Seq(CfstExpr):
    first: CfstExpr
    second: CfstExpr

    def __str__(self):
        left = "(%s)" % self.first if isinstance(self.first, Seq) else str(self.first)
        return "%s ; %s" % (left, self.second)


@dataclass(frozen=True)
class _CChoice(CfstExpr):
    branches: tuple[tuple[str, CfstExpr], ...]

    SIGIL = "?"

    def __str__(self):
        return "%s{%s}" % (self.SIGIL, ", ".join("%s : %s" % (lab, b) for lab, b in self.branches))


class IChoice(_CChoice):
    SIGIL = "+"


class EChoice(_CChoice):
    SIGIL = "&"


@dataclass(frozen=True)
class RecName(CfstExpr):
    name: str

    def __str__(self):
        return self.name


SKIP = Skip()


def normalize(e: CfstExpr) -> CfstExpr:
    """Drop redundant skips, nest sequences to the right and push them into choices."""
    if isinstance(e, Seq):
        return _seq(normalize(e.first), normalize(e.second))
    if isinstance(e, _CChoice):
        return type(e)(tuple((lab, normalize(b)) for lab, b in e.branches))
    return e


def _seq(a: CfstExpr, b: CfstExpr) -> CfstExpr:
    # both arguments normalized
    if isinstance(a, Skip):
        return b
    if isinstance(b, Skip):
        return a
    if isinstance(a, Seq):
        return _seq(a.first, _seq(a.second, b))
    if isinstance(a, _CChoice):
        return type(a)(tuple((lab, _seq(br, b)) for lab, br in a.branches))
    return Seq(a, b)


ALPHA = "a"


def tau(e: CfstExpr, alpha: TypeExpr, fresh) -> TypeExpr:
    """The translation indexed by the continuation type ``alpha``."""
    if isinstance(e, Skip):
        return alpha
    if isinstance(e, RecName):
        return Named(e.name, (alpha,))
    if isinstance(e, Seq):
        beta = next(fresh)
        inner = tau(e.first, Var(beta), fresh)
        return substitute(inner, {beta: tau(e.second, alpha, fresh)})
    if isinstance(e, IChoice):
        return Plus([(lab, tau(b, alpha, fresh)) for lab, b in e.branches])
    if isinstance(e, EChoice):
        return With([(lab, tau(b, alpha, fresh)) for lab, b in e.branches])
    raise TypeError(e)


def tau_embed(eqs: Mapping[str, CfstExpr], normalize_first: bool = True) -> Signature:
    """Translate each equation ``s = T`` to ``type s[a] = tau_a(T)``."""
    fresh = ("_b%d" % i for i in itertools.count(1))
    defs = {}
    for name, body in eqs.items():
        if normalize_first:
            body = normalize(body)
        t = tau(body, Var(ALPHA), fresh)
        if isinstance(t, (Var, Named)):
            raise NonContractive("equation %s translates to %s, which is not a type operator" % (name, t))
        defs[name] = TypeDef(name, (ALPHA,), t)
    missing = sorted({n for e in eqs.values() for n in _names(e)} - set(eqs))
    if missing:
        raise UndefinedName("undefined name(s) %s" % ", ".join(missing))
    return Signature(typedefs=defs)


def _names(e: CfstExpr):
    if isinstance(e, RecName):
        yield e.name
    elif isinstance(e, Seq):
        yield from _names(e.first)
        yield from _names(e.second)
    elif isinstance(e, _CChoice):
        for _, b in e.branches:
            yield from _names(b)


# ---------------------------------------------------------------------------
# Parsing


class _CfstParser(Parser):
    def seq(self) -> CfstExpr:
        first = self.atom_c()
        if self.at(";"):
            self.advance()
            return Seq(first, self.seq())
        return first

    def atom_c(self) -> CfstExpr:
        tok = self.tok
        if self.at("+") or self.at("&"):
            self.advance()
            self.expect("{")
            branches = []
            seen = set()
            if not self.at("}"):
                while True:
                    lab = self.ident("label")
                    if lab.text in seen:
                        self.error("label %s appears twice" % lab.text, lab, "DuplicateLabel")
                    seen.add(lab.text)
                    self.expect(":")
                    branches.append((lab.text, self.seq()))
                    if not self.at(","):
                        break
                    self.advance()
            self.expect("}")
            return (IChoice if tok.text == "+" else EChoice)(tuple(branches))
        if self.at("("):
            self.advance()
            e = self.seq()
            self.expect(")")
            return e
        if tok.kind == "ident":
            self.advance()
            return SKIP if tok.text == "skip" else RecName(tok.text)
        self.error("expected a context-free session type, found '%s'" % (tok.text or "end of input"))


def parse_cfst(text: str, filename: str = "<input>") -> dict[str, CfstExpr]:
    """Parse lines ``NAME = T``; raise ``ParseError`` with all diagnostics."""
    p = _CfstParser(text, filename)
    eqs: dict[str, CfstExpr] = {}
    while p.tok.kind != "eof":
        try:
            name = p.ident("equation name")
            p.expect("=")
            body = p.seq()
            if name.text in eqs:
                p.diags.append(Diagnostic(name.extent, "error", "DuplicateDefinition",
                                          "%s is defined twice" % name.text))
            eqs[name.text] = body
        except _Fail:
            # resume at the next line that starts an equation
            while p.tok.kind != "eof":
                prev = p.advance()
                if p.tok.kind == "ident" and p.tok.extent.start[0] > prev.extent.start[0] \
                        and p.peek().text == "=":
                    break
    if p.diags:
        raise ParseError(p.diags)
    return eqs


def embed_text(text: str, filename: str = "<input>") -> str:
    sig = tau_embed(parse_cfst(text, filename))
    return "".join(print_typedef(d) + "\n" for d in sig.typedefs.values())
