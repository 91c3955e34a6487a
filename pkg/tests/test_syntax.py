import pytest
from hypothesis import given, strategies as st

from nested_sessions.ast import (
    Case, Fwd, Lolli, Named, One, Plus, RecvChan, SendLabel, Spawn, TailCall, Tensor, Var, With,
)
from nested_sessions.syntax import (
    CompressionMap, ParseError, parse_program, parse_type, pretty_print, print_proc,
    print_signature, print_type, tokenize,
)

from helpers import CORPUS, corpus_text


def test_tokens_and_comments():
    toks, diags = tokenize("type x' = +{ $ : 1 } % trailing\n<-> -o |-")
    assert not diags
    kinds = [(t.kind, t.text) for t in toks]
    assert ("ident", "x'") in kinds and ("ident", "$") in kinds and ("one", "1") in kinds
    assert [t.text for t in toks[-4:-1]] == ["<->", "-o", "|-"]
    assert all(t.text != "trailing" for t in toks)


def test_bad_characters_are_reported():
    _, diags = tokenize("type A = 2 ? 1")
    assert [d.code for d in diags] == ["LexError", "LexError"]


def test_operator_precedence():
    t = parse_type("A * B -o C * D -o E", scope=["A", "B", "C", "D", "E"])
    a, b, c, d, e = (Var(x) for x in "ABCDE")
    assert t == Lolli(Tensor(a, b), Lolli(Tensor(c, d), e))
    assert parse_type("(a -o b) -o c", scope="abc") == Lolli(Lolli(Var("a"), Var("b")), Var("c"))


def test_names_with_arguments():
    t = parse_type("queue[T[x]][1]", scope=["x"])
    assert t == Named("queue", (Named("T", (Var("x"),)), One()))


def test_open_type_resolution():
    t = parse_type("list[a]", typenames={"list": None})
    assert t == Named("list", (Var("a"),))


def test_choice_label_order_is_irrelevant():
    assert parse_type("+{a : 1, b : 1}") == parse_type("+{b : 1, a : 1}")
    assert parse_type("+{a : 1}") != parse_type("&{a : 1}")


def test_duplicate_label_is_an_error():
    with pytest.raises(ParseError) as exc:
        parse_type("+{a : 1, a : 1}")
    assert exc.value.diagnostics[0].code == "DuplicateLabel"


def test_process_forms():
    sig, _ = parse_program("""
        decl f[a] : (x : a) (y : 1) |- (z : a * 1)
        proc z <- f[a] x y = send z x ; wait y ; close z
        decl g : . |- (c : +{l : 1})
        proc c <- g = w <- f[1] u v ; c <- f[1] w v
    """)
    body = sig.procdefs["g"].body
    assert isinstance(body, Spawn) and body.bound == "w" and body.chanargs == ("u", "v")
    assert isinstance(body.cont, TailCall) and body.cont.typeargs == (One(),)
    assert sig.procdecls["g"].uses == ()


def test_case_and_forward():
    sig, _ = parse_program("proc x <- p y = case y ( a => x.a ; x <-> y | b => n <- recv y ; x <-> n )")
    body = sig.procdefs["p"].body
    assert isinstance(body, Case) and [lab for lab, _ in body.branches] == ["a", "b"]
    a = body.branch_map["a"]
    assert isinstance(a, SendLabel) and a.cont == Fwd("x", "y")
    assert isinstance(body.branch_map["b"], RecvChan)


def test_errors_carry_extents_and_recovery_continues():
    text = "type A = +{ a : }\ntype B = 1\ntype C = &{ b : 1 ,, }\n"
    with pytest.raises(ParseError) as exc:
        parse_program(text, "bad.nst")
    diags = exc.value.diagnostics
    assert len(diags) == 2
    assert str(diags[0]).startswith("bad.nst:1:17-1:18 error SyntaxError")
    assert diags[1].extent.start[0] == 3


def test_duplicate_definition():
    with pytest.raises(ParseError) as exc:
        parse_program("type A = 1\ntype A = +{a : 1}")
    assert exc.value.diagnostics[0].code == "DuplicateDefinition"


def test_eqtype_parameters_are_the_non_type_names():
    sig, _ = parse_program("type T[x] = +{R : x}\ntype T'[x] = +{R : x}\neqtype T[y] = T'[y]")
    (e,) = sig.eqtypes
    assert e.params == ("y",) and e.left == Named("T", (Var("y"),))


def test_print_parenthesization():
    t = Tensor(Tensor(Var("a"), Var("b")), Lolli(Var("c"), Var("d")))
    assert print_type(t) == "(a * b) * (c -o d)"
    assert print_type(Lolli(Lolli(One(), One()), One())) == "(1 -o 1) -o 1"
    assert print_type(Lolli(Tensor(One(), One()), One())) == "1 * 1 -o 1"
    assert print_type(Plus([("a", Named("V", (One(), Var("x"))))])) == "+{a : V[1][x]}"


def test_compression_map_prints_names_for_expansions():
    cmap = CompressionMap()
    body = Plus([("nil", One()), ("cons", Tensor(Var("a"), Named("list", (Var("a"),))))])
    cmap.record(Named("list", (Var("a"),)), body)
    assert pretty_print(With([("x", body)]), cmap) == "&{x : list[a]}"
    assert len(cmap) == 1 and body in cmap


@pytest.mark.parametrize("name", CORPUS)
def test_corpus_round_trips(name):
    sig, _ = parse_program(corpus_text(name + ".nst"))
    again, _ = parse_program(print_signature(sig))
    assert again.typedefs == sig.typedefs
    assert again.procdecls == sig.procdecls
    assert again.procdefs == sig.procdefs
    assert [(e.left, e.right) for e in again.eqtypes] == [(e.left, e.right) for e in sig.eqtypes]


_names = st.sampled_from(["V", "W"])


def _types(vars_):
    leaves = st.one_of(st.just(One()), st.sampled_from([Var(v) for v in vars_]))

    def extend(inner):
        labs = st.lists(st.sampled_from(["a", "b", "c", "$"]), min_size=0, max_size=3, unique=True)
        return st.one_of(
            st.builds(lambda ls, ts: Plus(list(zip(ls, ts))), labs, st.lists(inner, min_size=3, max_size=3)),
            st.builds(lambda ls, ts: With(list(zip(ls, ts))), labs, st.lists(inner, min_size=3, max_size=3)),
            st.builds(Tensor, inner, inner),
            st.builds(Lolli, inner, inner),
            st.builds(lambda n, xs: Named(n, tuple(xs)), _names, st.lists(inner, max_size=2)),
        )

    return st.recursive(leaves, extend, max_leaves=10)


@given(_types(["x", "y"]))
def test_print_parse_round_trip(t):
    assert parse_type(print_type(t), scope=["x", "y"]) == t


@given(_types(["x"]))
def test_print_proc_round_trip(t):
    src = "proc c <- f[x] d = e <- g[%s] d ; c <-> e" % print_type(t)
    sig, _ = parse_program(src)
    assert "[%s]" % print_type(t) in print_proc(sig.procdefs["f"].body)
