"""Command line driver: ``nst SUBCOMMAND FILE [options]``.

Exit codes: 0 on success, 1 when a check fails (type errors, types not
proved equal, a run that does not end poised), 2 on usage, I/O or parse
errors.  Results go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from . import CORPUS_VERSION, __version__
from .ast import Plus, Signature, TypeDef, free_vars_ordered, validate_signature
from .cfst import NonContractive, UndefinedName, embed_text
from .checker import check_all
from .equality import Equal, InvalidEqtype, equality_for
from .grammar import Oracle, fog, traces
from .rename import rename_signature
from .runtime import StuckObject, run
from .syntax import ParseError, parse_program, parse_type, print_signature


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _Usage("%s: error: %s" % (self.prog, message))


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a positive integer, got %r" % text)
    if n < 1:
        raise argparse.ArgumentTypeError("expected a positive integer, got %r" % text)
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nst", description="Nested polymorphic session types.")
    p.add_argument("--version", action="version",
                   version="nst %s (corpus %s)" % (__version__, CORPUS_VERSION))
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    tc = sub.add_parser("typecheck", help="check every process definition")
    tc.add_argument("file")
    tc.add_argument("--depth", type=_positive, default=1, help="closures per head pair (default 1)")
    tc.add_argument("--dump-renamed", action="store_true", help="print the internally renamed signature")

    eq = sub.add_parser("equal", help="decide equality of two types")
    eq.add_argument("file")
    eq.add_argument("--left", required=True)
    eq.add_argument("--right", required=True)
    eq.add_argument("--depth", type=_positive, default=1)

    gr = sub.add_parser("grammar", help="print the first-order grammar of the types")
    gr.add_argument("file")
    gr.add_argument("--traces", metavar="TYPE", help="print the traces of TYPE instead")
    gr.add_argument("--bound", type=_positive, default=8, help="maximal trace length (default 8)")

    ex = sub.add_parser("exec", help="run a closed process")
    ex.add_argument("file")
    ex.add_argument("--proc", required=True)
    ex.add_argument("--steps", type=_positive, default=100000)
    ex.add_argument("--trace", action="store_true", help="print each rewrite")

    cf = sub.add_parser("cfst-embed", help="translate context-free session types")
    cf.add_argument("file")
    return p


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _Usage("cannot read %s: %s" % (path, exc.strerror or exc))


def _load(path: str):
    sig, _ = parse_program(_read(path), path)
    return sig


def _valid(sig, err) -> bool:
    violations = validate_signature(sig)
    for v in violations:
        print(v, file=err)
    return not violations


def cmd_typecheck(args, out, err) -> int:
    sig = _load(args.file)
    if args.dump_renamed:
        if not _valid(sig, err):
            return 1
        out.write(print_signature(rename_signature(sig).sig))
    report = check_all(sig, args.depth)
    for line in report.lines():
        print(line, file=err)
    if report.ok:
        print("ok: %d definition(s) checked" % len(report.checked), file=out)
        return 0
    return 1


def cmd_equal(args, out, err) -> int:
    sig = _load(args.file)
    if not _valid(sig, err):
        return 1
    try:
        checker = equality_for(sig, args.depth)
    except InvalidEqtype as exc:
        for e, v in exc.failures:
            print("%s error InvalidEqtype eqtype %s = %s: %s" % (e.extent or "<input>", e.left, e.right, v), file=err)
        return 1
    a = parse_type(args.left, typenames=sig.typedefs)
    b = parse_type(args.right, typenames=sig.typedefs)
    for t in (a, b):
        bad = validate_signature(_with_goal(sig, t))
        for v in bad:
            print(v, file=err)
        if bad:
            return 2
    verdict = checker.check(free_vars_ordered(a, b), a, b)
    print(verdict, file=out)
    if isinstance(verdict, Equal):
        return 0
    reason = getattr(verdict, "reason", "")
    if reason:
        print(reason, file=err)
    return 1


def _with_goal(sig, t):
    """A signature with one extra definition wrapping ``t``, for validating it."""
    goal = TypeDef("%goal", tuple(free_vars_ordered(t)), Plus([("goal", t)]))
    return Signature({**sig.typedefs, goal.name: goal})


def cmd_grammar(args, out, err) -> int:
    sig = _load(args.file)
    if not _valid(sig, err):
        return 1
    if args.traces is None:
        out.write(fog(rename_signature(sig)).dump())
        return 0
    t = parse_type(args.traces, typenames=sig.typedefs)
    bad = validate_signature(_with_goal(sig, t))
    for v in bad:
        print(v, file=err)
    if bad:
        return 2
    o = Oracle(sig, free_vars_ordered(t))
    words = traces(o.grammar, o.term(t), args.bound)
    for w in sorted(words, key=lambda w: (len(w), w)):
        print(" ".join(w) if w else "ε", file=out)
    return 0


def cmd_exec(args, out, err) -> int:
    sig = _load(args.file)
    report = check_all(sig)
    if not report.ok:
        for line in report.lines():
            print(line, file=err)
        return 1
    try:
        res = run(sig, args.proc, max_steps=args.steps, trace=args.trace)
    except (KeyError, ValueError) as exc:
        print("error: %s" % (exc.args[0] if exc.args else exc), file=err)
        return 2
    except StuckObject as exc:
        print("error: stuck: %s" % exc, file=err)
        return 1
    if args.trace:
        for line in res.log:
            print(line, file=out)
    print(res.text, file=out)
    print("status: %s after %d step(s)" % (res.status, res.steps), file=err)
    return 0 if res.status == "poised" else 1


def cmd_cfst_embed(args, out, err) -> int:
    try:
        out.write(embed_text(_read(args.file), args.file))
    except (NonContractive, UndefinedName) as exc:
        print("error: %s" % exc, file=err)
        return 1
    return 0


COMMANDS = {
    "typecheck": cmd_typecheck,
    "equal": cmd_equal,
    "grammar": cmd_grammar,
    "exec": cmd_exec,
    "cfst-embed": cmd_cfst_embed,
}


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(err)
            return 2
        return COMMANDS[args.command](args, out, err)
    except _Usage as exc:
        print(exc, file=err)
        return 2
    except ParseError as exc:
        for d in exc.diagnostics:
            print(d, file=err)
        return 2
    except SystemExit as exc:  # --help and --version
        return exc.code if isinstance(exc.code, int) else 0


if __name__ == "__main__":
    sys.exit(main())
