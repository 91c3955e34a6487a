"""Lexer, recursive-descent parser and pretty-printer for ``.nst`` programs.

Concrete syntax summary::

    type V[x1]...[xk] = A
    decl f[x1]...[xk] : (c1 : A1) ... (cn : An) |- (c : A)
    proc c <- f[x1]...[xk] c1 ... cn = P
    eqtype A = B

Types: ``+{l : A, ...}``, ``&{l : A, ...}``, ``A * B``, ``A -o B``, ``1``,
variables and ``V[A1]...[Ak]``.  ``-o`` binds looser than ``*`` and both
associate to the right.  ``%`` starts a comment that runs to the end of line.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .ast import (
    Case, Close, EqType, Fwd, Lolli, Named, One, Plus, ProcDecl, ProcDef, ProcExpr,
    RecvChan, SendChan, SendLabel, Signature, SourceExtent, Spawn, TailCall, Tensor,
    TypeDef, TypeExpr, Var, Wait, With, _Choice, map_children,
)

__all__ = [
    "SourceExtent", "Diagnostic", "ParseError", "CompressionMap",
    "parse_program", "parse_type", "print_type", "pretty_print",
    "print_proc", "print_signature",
]

KEYWORDS = {"type", "decl", "proc", "eqtype", "case", "send", "recv", "close", "wait"}
TOPLEVEL = {"type", "decl", "proc", "eqtype"}
SYMBOLS = ["<->", "|-", "-o", "=>", "<-", "+", "&", "{", "}", "(", ")", "[", "]",
           ":", ",", "*", "|", "=", ".", ";"]


@dataclass(frozen=True)
class Diagnostic:
    extent: SourceExtent
    severity: str
    code: str
    message: str

    def __str__(self):
        return "%s %s %s %s" % (self.extent, self.severity, self.code, self.message)


class ParseError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(map(str, diagnostics)))


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "kw", "sym", "one", "eof"
    text: str
    extent: SourceExtent


def _ident_start(ch: str) -> bool:
    return ch.isalpha() or ch in "_$"


def _ident_char(ch: str) -> bool:
    return ch.isalnum() or ch in "_$'"


def tokenize(text: str, filename: str = "<input>") -> tuple[list[Token], list[Diagnostic]]:
    toks: list[Token] = []
    diags: list[Diagnostic] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def ext(l0, c0, l1, c1):
        return SourceExtent(filename, (l0, c0), (l1, c1))

    while i < n:
        ch = text[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if ch.isspace():
            i, col = i + 1, col + 1
            continue
        if ch == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if _ident_start(ch):
            j = i
            while j < n and _ident_char(text[j]):
                j += 1
            word = text[i:j]
            kind = "kw" if word in KEYWORDS else "ident"
            toks.append(Token(kind, word, ext(line, col, line, col + j - i)))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            word = text[i:j]
            e = ext(line, col, line, col + j - i)
            if word == "1":
                toks.append(Token("one", word, e))
            else:
                diags.append(Diagnostic(e, "error", "LexError", "unexpected number %r (only 1 is a type)" % word))
            col += j - i
            i = j
            continue
        for s in SYMBOLS:
            if text.startswith(s, i):
                toks.append(Token("sym", s, ext(line, col, line, col + len(s))))
                i += len(s)
                col += len(s)
                break
        else:
            diags.append(Diagnostic(ext(line, col, line, col + 1), "error", "LexError", "unexpected character %r" % ch))
            i += 1
            col += 1
    toks.append(Token("eof", "", ext(line, col, line, col)))
    return toks, diags


class _Fail(Exception):
    pass


class Parser:
    def __init__(self, text: str, filename: str = "<input>"):
        self.filename = filename
        self.toks, self.diags = tokenize(text, filename)
        self.pos = 0

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "kw") and self.tok.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, message: str, tok: Optional[Token] = None, code: str = "SyntaxError"):
        tok = tok or self.tok
        self.diags.append(Diagnostic(tok.extent, "error", code, message))
        raise _Fail()

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error("expected '%s', found '%s'" % (text, found))
        return self.advance()

    def ident(self, what="identifier") -> Token:
        if self.tok.kind != "ident":
            self.error("expected %s, found '%s'" % (what, self.tok.text or "end of input"))
        return self.advance()

    def span(self, start: Token) -> SourceExtent:
        last = self.toks[max(self.pos - 1, 0)]
        return SourceExtent(self.filename, start.extent.start, max(last.extent.end, start.extent.end))

    # -- types

    def type_(self) -> TypeExpr:
        left = self.tensor()
        if self.at("-o"):
            self.advance()
            return Lolli(left, self.type_())
        return left

    def tensor(self) -> TypeExpr:
        left = self.atom()
        if self.at("*"):
            self.advance()
            return Tensor(left, self.tensor())
        return left

    def atom(self) -> TypeExpr:
        t = self.tok
        if t.kind == "one":
            self.advance()
            return One()
        if self.at("("):
            self.advance()
            inner = self.type_()
            self.expect(")")
            return inner
        if self.at("+") or self.at("&"):
            op = self.advance().text
            self.expect("{")
            branches = []
            seen = set()
            if not self.at("}"):
                while True:
                    lab = self.ident("label")
                    if lab.text in seen:
                        self.error("duplicate label %s" % lab.text, lab, "DuplicateLabel")
                    seen.add(lab.text)
                    self.expect(":")
                    branches.append((lab.text, self.type_()))
                    if not self.at(","):
                        break
                    self.advance()
            self.expect("}")
            return Plus(branches) if op == "+" else With(branches)
        if t.kind == "ident":
            self.advance()
            return Named(t.text, tuple(self.bracket_args()))
        self.error("expected a type, found '%s'" % (t.text or "end of input"))

    def bracket_args(self) -> list[TypeExpr]:
        args = []
        while self.at("["):
            self.advance()
            args.append(self.type_())
            self.expect("]")
        return args

    def bracket_params(self) -> list[str]:
        params = []
        while self.at("["):
            self.advance()
            params.append(self.ident("type parameter").text)
            self.expect("]")
        return params

    # -- processes

    def proc(self) -> ProcExpr:
        t = self.tok
        if self.at("("):
            self.advance()
            p = self.proc()
            self.expect(")")
            return p
        if self.at("case"):
            self.advance()
            c = self.ident("channel").text
            self.expect("(")
            branches = []
            seen = set()
            while True:
                lab = self.ident("label")
                if lab.text in seen:
                    self.error("duplicate branch %s" % lab.text, lab, "DuplicateLabel")
                seen.add(lab.text)
                self.expect("=>")
                branches.append((lab.text, self.proc()))
                if not self.at("|"):
                    break
                self.advance()
            self.expect(")")
            return Case(c, tuple(branches), self.span(t))
        if self.at("send"):
            self.advance()
            c = self.ident("channel").text
            d = self.ident("channel").text
            self.expect(";")
            return SendChan(c, d, self.proc(), self.span(t))
        if self.at("close"):
            self.advance()
            return Close(self.ident("channel").text, self.span(t))
        if self.at("wait"):
            self.advance()
            c = self.ident("channel").text
            self.expect(";")
            return Wait(c, self.proc(), self.span(t))
        if t.kind != "ident":
            self.error("expected a process, found '%s'" % (t.text or "end of input"))
        x = self.advance().text
        if self.at("."):
            self.advance()
            lab = self.ident("label").text
            self.expect(";")
            return SendLabel(x, lab, self.proc(), self.span(t))
        if self.at("<->"):
            self.advance()
            return Fwd(x, self.ident("channel").text, self.span(t))
        if self.at("<-"):
            self.advance()
            if self.at("recv"):
                self.advance()
                c = self.ident("channel").text
                self.expect(";")
                return RecvChan(c, x, self.proc(), self.span(t))
            f = self.ident("process name").text
            targs = tuple(self.bracket_args())
            chans = []
            while self.tok.kind == "ident":
                chans.append(self.advance().text)
            if self.at(";"):
                ext = self.span(t)
                self.advance()
                return Spawn(x, f, targs, tuple(chans), self.proc(), ext)
            return TailCall(x, f, targs, tuple(chans), self.span(t))
        self.error("expected '.', '<->' or '<-' after channel %s" % x)

    # -- declarations

    def decl(self):
        t = self.tok
        if self.at("type"):
            self.advance()
            name = self.ident("type name").text
            params = tuple(self.bracket_params())
            self.expect("=")
            body = self.type_()
            return TypeDef(name, params, body, self.span(t))
        if self.at("eqtype"):
            self.advance()
            left = self.type_()
            self.expect("=")
            right = self.type_()
            return EqType((), left, right, self.span(t))
        if self.at("decl"):
            self.advance()
            name = self.ident("process name").text
            params = tuple(self.bracket_params())
            self.expect(":")
            uses = []
            if self.at("."):
                self.advance()
            else:
                while self.at("("):
                    uses.append(self.chan_typing())
            self.expect("|-")
            offers = self.chan_typing()
            return ProcDecl(name, params, tuple(uses), offers, self.span(t))
        if self.at("proc"):
            self.advance()
            offer = self.ident("channel").text
            self.expect("<-")
            name = self.ident("process name").text
            params = tuple(self.bracket_params())
            args = []
            while self.tok.kind == "ident":
                args.append(self.advance().text)
            self.expect("=")
            body = self.proc()
            return ProcDef(name, params, tuple(args), offer, body, self.span(t))
        self.error("expected 'type', 'decl', 'proc' or 'eqtype', found '%s'" % self.tok.text)

    def chan_typing(self) -> tuple[str, TypeExpr]:
        self.expect("(")
        c = self.ident("channel").text
        self.expect(":")
        a = self.type_()
        self.expect(")")
        return (c, a)

    def recover(self):
        self.advance()
        while self.tok.kind != "eof" and not (self.tok.kind == "kw" and self.tok.text in TOPLEVEL):
            self.advance()

    def program(self) -> list:
        items = []
        while self.tok.kind != "eof":
            try:
                items.append(self.decl())
            except _Fail:
                self.recover()
        return items


# ---------------------------------------------------------------------------
# Name resolution: bare identifiers become variables when in scope


def resolve(t: TypeExpr, scope) -> TypeExpr:
    if isinstance(t, Named) and not t.args and t.name in scope:
        return Var(t.name)
    return map_children(t, lambda c: resolve(c, scope))


def _resolve_proc(p: ProcExpr, scope) -> ProcExpr:
    r = lambda ts: tuple(resolve(a, scope) for a in ts)  # noqa: E731
    go = lambda q: _resolve_proc(q, scope)  # noqa: E731
    if isinstance(p, Spawn):
        return Spawn(p.bound, p.procname, r(p.typeargs), p.chanargs, go(p.cont), p.extent)
    if isinstance(p, TailCall):
        return TailCall(p.offer, p.procname, r(p.typeargs), p.chanargs, p.extent)
    if isinstance(p, Case):
        return Case(p.chan, tuple((lab, go(q)) for lab, q in p.branches), p.extent)
    if isinstance(p, SendLabel):
        return SendLabel(p.chan, p.label, go(p.cont), p.extent)
    if isinstance(p, SendChan):
        return SendChan(p.chan, p.payload, go(p.cont), p.extent)
    if isinstance(p, RecvChan):
        return RecvChan(p.chan, p.bound, go(p.cont), p.extent)
    if isinstance(p, Wait):
        return Wait(p.chan, go(p.cont), p.extent)
    return p


def _bare_names(t: TypeExpr) -> list[str]:
    out: dict[str, None] = {}

    def go(u):
        if isinstance(u, Named) and not u.args:
            out.setdefault(u.name)
        if isinstance(u, _Choice):
            for _, b in u.branches:
                go(b)
        elif isinstance(u, (Tensor, Lolli)):
            go(u.left)
            go(u.right)
        elif isinstance(u, Named):
            for a in u.args:
                go(a)

    go(t)
    return list(out)


def resolve_open(t: TypeExpr, typenames) -> tuple[tuple[str, ...], TypeExpr]:
    """Treat bare identifiers that are not defined type names as variables."""
    params = tuple(n for n in _bare_names(t) if n not in typenames)
    return params, resolve(t, set(params))


def parse_program(text: str, filename: str = "<input>") -> tuple[Signature, dict]:
    """Parse a whole program.

    Returns the signature and an extent table keyed by ``(kind, name)``; raises
    ``ParseError`` carrying every diagnostic found.
    """
    p = Parser(text, filename)
    items = p.program()
    diags = p.diags
    sig = Signature()
    extents: dict = {}

    def dup(kind, name, ext):
        diags.append(Diagnostic(ext, "error", "DuplicateDefinition", "%s %s defined more than once" % (kind, name)))

    raw_eqs = []
    for it in items:
        if isinstance(it, TypeDef):
            if it.name in sig.typedefs:
                dup("type", it.name, it.extent)
                continue
            sig.typedefs[it.name] = TypeDef(it.name, it.params, resolve(it.body, set(it.params)), it.extent)
            extents[("type", it.name)] = it.extent
        elif isinstance(it, ProcDecl):
            if it.name in sig.procdecls:
                dup("decl", it.name, it.extent)
                continue
            sc = set(it.typeparams)
            sig.procdecls[it.name] = ProcDecl(
                it.name, it.typeparams, tuple((c, resolve(a, sc)) for c, a in it.uses),
                (it.offers[0], resolve(it.offers[1], sc)), it.extent)
            extents[("decl", it.name)] = it.extent
        elif isinstance(it, ProcDef):
            if it.name in sig.procdefs:
                dup("proc", it.name, it.extent)
                continue
            sig.procdefs[it.name] = ProcDef(it.name, it.typeparams, it.args, it.offer,
                                            _resolve_proc(it.body, set(it.typeparams)), it.extent)
            extents[("proc", it.name)] = it.extent
        else:
            raw_eqs.append(it)
    for i, e in enumerate(raw_eqs):
        params = tuple(n for n in _bare_names(e.left) + _bare_names(e.right) if n not in sig.typedefs)
        params = tuple(dict.fromkeys(params))
        sc = set(params)
        sig.eqtypes.append(EqType(params, resolve(e.left, sc), resolve(e.right, sc), e.extent))
        extents[("eqtype", i)] = e.extent
    if diags:
        raise ParseError(diags)
    return sig, extents


def parse_type(text: str, scope: Iterable[str] = (), typenames=None) -> TypeExpr:
    """Parse a single type.

    Bare identifiers in ``scope`` become variables.  When ``typenames`` is
    given, every bare identifier not among them is a variable as well.
    """
    p = Parser(text, "<type>")
    try:
        t = p.type_()
        if p.tok.kind != "eof":
            p.error("unexpected '%s' after type" % p.tok.text)
    except _Fail:
        pass
    if p.diags:
        raise ParseError(p.diags)
    if typenames is not None:
        return resolve_open(t, typenames)[1]
    return resolve(t, set(scope))


# ---------------------------------------------------------------------------
# Printing


class CompressionMap:
    """Reverse map from expanded bodies to the name applications they came from."""

    def __init__(self):
        self._map: dict[TypeExpr, Named] = {}

    def record(self, named: Named, expanded: TypeExpr):
        self._map.setdefault(expanded, named)

    def lookup(self, t: TypeExpr) -> Optional[Named]:
        return self._map.get(t)

    def __len__(self):
        return len(self._map)

    def __contains__(self, t):
        return t in self._map


_PREC_LOLLI, _PREC_TENSOR, _PREC_ATOM = 1, 2, 3


def _print(t: TypeExpr, cmap: Optional[CompressionMap], prec: int) -> str:
    if cmap is not None and not isinstance(t, Named):
        hit = cmap.lookup(t)
        if hit is not None:
            t = hit
    if isinstance(t, One):
        return "1"
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Named):
        return t.name + "".join("[%s]" % _print(a, cmap, 0) for a in t.args)
    if isinstance(t, _Choice):
        op = "+" if isinstance(t, Plus) else "&"
        return "%s{%s}" % (op, ", ".join("%s : %s" % (lab, _print(b, cmap, 0)) for lab, b in t.branches))
    if isinstance(t, Tensor):
        s = "%s * %s" % (_print(t.left, cmap, _PREC_ATOM), _print(t.right, cmap, _PREC_TENSOR))
        return "(%s)" % s if prec > _PREC_TENSOR else s
    if isinstance(t, Lolli):
        s = "%s -o %s" % (_print(t.left, cmap, _PREC_TENSOR), _print(t.right, cmap, _PREC_LOLLI))
        return "(%s)" % s if prec > _PREC_LOLLI else s
    raise TypeError(t)


def pretty_print(t: TypeExpr, cmap: Optional[CompressionMap] = None) -> str:
    """Print ``t``, replacing recorded expansions by their name applications (outermost first)."""
    return _print(t, cmap, 0)


def print_type(t: TypeExpr) -> str:
    return _print(t, None, 0)


def print_proc(p: ProcExpr) -> str:
    targs = lambda ts: "".join("[%s]" % print_type(a) for a in ts)  # noqa: E731
    if isinstance(p, SendLabel):
        return "%s.%s ; %s" % (p.chan, p.label, print_proc(p.cont))
    if isinstance(p, Case):
        arms = " | ".join("%s => %s" % (lab, print_proc(q)) for lab, q in p.branches)
        return "case %s ( %s )" % (p.chan, arms)
    if isinstance(p, SendChan):
        return "send %s %s ; %s" % (p.chan, p.payload, print_proc(p.cont))
    if isinstance(p, RecvChan):
        return "%s <- recv %s ; %s" % (p.bound, p.chan, print_proc(p.cont))
    if isinstance(p, Close):
        return "close %s" % p.chan
    if isinstance(p, Wait):
        return "wait %s ; %s" % (p.chan, print_proc(p.cont))
    if isinstance(p, Fwd):
        return "%s <-> %s" % (p.offer, p.use)
    if isinstance(p, Spawn):
        head = " ".join([p.bound, "<-", p.procname + targs(p.typeargs), *p.chanargs])
        return "%s ; %s" % (head, print_proc(p.cont))
    if isinstance(p, TailCall):
        return " ".join([p.offer, "<-", p.procname + targs(p.typeargs), *p.chanargs])
    raise TypeError(p)


def print_typedef(d: TypeDef) -> str:
    return "type %s%s = %s" % (d.name, "".join("[%s]" % x for x in d.params), print_type(d.body))


def print_signature(sig: Signature) -> str:
    lines = [print_typedef(d) for d in sig.typedefs.values()]
    for e in sig.eqtypes:
        lines.append("eqtype %s = %s" % (print_type(e.left), print_type(e.right)))
    for d in sig.procdecls.values():
        ps = "".join("[%s]" % x for x in d.typeparams)
        uses = " ".join("(%s : %s)" % (c, print_type(a)) for c, a in d.uses) or "."
        lines.append("decl %s%s : %s |- (%s : %s)" % (d.name, ps, uses, d.offers[0], print_type(d.offers[1])))
    for d in sig.procdefs.values():
        ps = "".join("[%s]" % x for x in d.typeparams)
        head = " ".join([d.offer, "<-", d.name + ps, *d.args])
        lines.append("proc %s = %s" % (head, print_proc(d.body)))
    return "\n".join(lines) + ("\n" if lines else "")
