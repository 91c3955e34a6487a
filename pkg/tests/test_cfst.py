import random

import pytest
from hypothesis import given, settings, strategies as st

from nested_sessions.ast import Named, One, Signature, Var, substitute, validate_signature
from nested_sessions.cfst import (
    EChoice, IChoice, NonContractive, RecName, SKIP, Seq, UndefinedName, normalize, parse_cfst,
    tau, tau_embed,
)
from nested_sessions.equality import Equal, equality_for
from nested_sessions.grammar import bounded_trace_equal
from nested_sessions.syntax import ParseError, parse_program

from helpers import corpus_text

A, B = RecName("A"), RecName("B")


def test_normalize_laws():
    assert normalize(Seq(A, SKIP)) == A
    assert normalize(Seq(SKIP, A)) == A
    assert normalize(Seq(Seq(A, B), A)) == Seq(A, Seq(B, A))
    assert normalize(Seq(IChoice((("l", A),)), B)) == IChoice((("l", Seq(A, B)),))
    assert normalize(Seq(EChoice((("l", SKIP),)), B)) == EChoice((("l", B),))


def test_anbn_embedding():
    sig = tau_embed(parse_cfst(corpus_text("anbn.cfst")))
    want, _ = parse_program("""
        type A[a] = +{a : A[B[a]], b : a}
        type B[a] = +{b : a}
        type S'[a] = +{a : A[a]}
    """)
    for name in ("A", "B", "S'"):
        assert sig.typedefs[name].params == want.typedefs[name].params
        assert sig.typedefs[name].body == want.typedefs[name].body
    assert validate_signature(sig) == []


def test_start_type_at_unit():
    sig = tau_embed(parse_cfst(corpus_text("anbn.cfst")))
    s_prime = substitute(sig.typedefs["S'"].body, {"a": One()})
    defs = dict(sig.typedefs)
    full = Signature(defs)
    extra, _ = parse_program("type S = +{a : A[1]}\ntype A[a] = +{a : A[B[a]], b : a}\ntype B[a] = +{b : a}")
    full.typedefs["S"] = extra.typedefs["S"]
    assert isinstance(equality_for(full).check([], s_prime, Named("S")), Equal)


def test_skip_becomes_the_continuation():
    assert tau(SKIP, Var("a"), iter(["_b"])) == Var("a")


def test_non_contractive_equations():
    with pytest.raises(NonContractive):
        tau_embed({"X": SKIP})
    with pytest.raises(NonContractive):
        tau_embed({"X": Seq(RecName("X"), RecName("X"))})


def test_undefined_names():
    with pytest.raises(UndefinedName):
        tau_embed({"X": IChoice((("a", RecName("Y")),))})


def test_parse_errors():
    with pytest.raises(ParseError) as exc:
        parse_cfst("X = +{ a : }\nY = +{ b : skip }\n")
    assert len(exc.value.diagnostics) == 1


# random context-free types built from a fixed set of equations


def _cfst(rng, depth):
    r = rng.random()
    if depth == 0 or r < 0.3:
        return rng.choice([SKIP, A, B])
    if r < 0.6:
        return Seq(_cfst(rng, depth - 1), _cfst(rng, depth - 1))
    labs = rng.sample(["p", "q"], rng.randint(1, 2))
    cls = IChoice if rng.random() < 0.5 else EChoice
    return cls(tuple((lab, _cfst(rng, depth - 1)) for lab in sorted(labs)))


BASE = {"A": IChoice((("a", Seq(A, B)), ("b", SKIP))), "B": IChoice((("b", SKIP),))}


@settings(max_examples=150)
@given(st.integers(0, 2 ** 32 - 1))
def test_normal_form_preserves_the_embedding(seed):
    rng = random.Random(seed)
    body = IChoice((("go", _cfst(rng, 3)),))
    raw = tau_embed({**BASE, "X": body}, normalize_first=False)
    norm = tau_embed({**BASE, "X": body})
    # the two translations define X differently in general; compare them as types
    both = Signature({**raw.typedefs, "Y": norm.typedefs["X"].__class__("Y", ("a",), norm.typedefs["X"].body)})
    x, y = Named("X", (One(),)), Named("Y", (One(),))
    assert isinstance(equality_for(both).check([], x, y), Equal)
    assert bounded_trace_equal(both, x, y, 8).equal
    # and with skip appended the image is literally the same
    assert tau_embed({**BASE, "X": Seq(body, SKIP)}).typedefs["X"].body == norm.typedefs["X"].body
