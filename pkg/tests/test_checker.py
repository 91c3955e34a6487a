import pytest
from hypothesis import given, settings, strategies as st

from nested_sessions.ast import Named, One, Plus, Tensor, substitute, substitute_proc_types
from nested_sessions.checker import (
    Checker, TypeCheckError, TypingContext, check_all, check_process, definition_context,
)
from nested_sessions.equality import Inconclusive, NotEqual
from nested_sessions.syntax import parse_program

from helpers import CORPUS, corpus_text, load


def errors(text):
    sig, _ = parse_program(text)
    return check_all(sig).errors


def one_error(text):
    errs = errors(text)
    assert len(errs) == 1, [str(e) for e in errs]
    return errs[0]


@pytest.mark.parametrize("name", CORPUS)
def test_corpus_checks(name):
    report = check_all(load(name))
    assert report.ok, report.lines()
    assert set(report.checked) == set(load(name).procdefs)


def test_corpus_processes_are_checked():
    assert {"fmap'", "fmap", "append'", "append"} <= set(check_all(load("dyck")).checked)
    assert "eval" in check_all(load("expr")).checked
    assert {"serialize", "deserialize"} <= set(check_all(load("tree")).checked)
    assert {"lookup_tree", "build_trie"} <= set(check_all(load("tries")).checked)


def test_coercion_needs_the_eqtype():
    text = corpus_text("dyck_noeq.nst") + "decl to_primed : (w : D) |- (w' : D')\nproc w' <- to_primed w = w' <-> w\n"
    e = one_error(text)
    assert e.code == "TypeMismatch" and isinstance(e.verdict, Inconclusive)
    assert "proc to_primed" in str(e)


def test_close_with_live_channels():
    e = one_error("decl f : (x : 1) |- (y : 1)\nproc y <- f x = close y")
    assert e.code == "LinearityViolation"


def test_unused_channel_at_forward():
    e = one_error("decl f : (x : 1) (z : 1) |- (y : 1)\nproc y <- f x z = y <-> x")
    assert e.code == "LinearityViolation"


def test_channel_used_after_it_was_consumed():
    e = one_error("decl f : (x : 1) |- (y : 1)\nproc y <- f x = wait x ; wait x ; close y")
    assert e.code == "LinearityViolation"


def test_unknown_channel():
    e = one_error("decl f : . |- (y : 1)\nproc y <- f = wait q ; close y")
    assert e.code == "UnknownChannel"


def test_shadowing_is_rejected():
    e = one_error("""
        type A = 1 * 1
        decl f : (x : A) (z : 1) |- (y : 1)
        proc y <- f x z = z <- recv x ; wait x ; wait z ; close y
    """)
    assert e.code == "LinearityViolation"


def test_label_sets_must_match_exactly():
    e = one_error("""
        type B = +{t : 1, f : 1}
        decl g : (b : B) |- (y : 1)
        proc y <- g b = case b ( t => wait b ; close y )
    """)
    assert e.code == "LabelSetMismatch" and "missing f" in e.message
    e = one_error("type B = +{t : 1}\ndecl g : . |- (b : B)\nproc b <- g = b.u ; close b")
    assert e.code == "LabelSetMismatch"


def test_type_mismatch_reports_not_equal():
    e = one_error("""
        type B = +{t : 1}
        type C = +{u : 1}
        decl g : (b : B) |- (c : C)
        proc c <- g b = c <-> b
    """)
    assert e.code == "TypeMismatch" and isinstance(e.verdict, NotEqual)


def test_wrong_operator():
    e = one_error("decl g : . |- (c : 1 * 1)\nproc c <- g = close c")
    assert e.code == "TypeMismatch" and "expected 1" in e.message


def test_calls():
    head = "type B = +{t : 1}\ndecl h[a] : (x : a) |- (y : a)\nproc y <- h[a] x = y <-> x\n"
    assert one_error(head + "decl g : (b : B) |- (c : B)\nproc c <- g b = c <- k b").code == "UnknownProcess"
    assert one_error(head + "decl g : (b : B) |- (c : B)\nproc c <- g b = c <- h b").code == "TypeArityMismatch"
    assert one_error(head + "decl g : (b : B) |- (c : B)\nproc c <- g b = c <- h[B]").code == "ChannelArityMismatch"
    assert one_error(head + "decl g : (b : B) |- (c : B)\nproc c <- g b = c <- h[1] b").code == "TypeMismatch"
    assert errors(head + "decl g : (b : B) |- (c : B)\nproc c <- g b = d <- h[B] b ; c <-> d") == []


def test_missing_and_undeclared_definitions():
    codes = sorted(e.code for e in errors("decl f : . |- (c : 1)\nproc c <- g = close c"))
    assert codes == ["MissingDefinition", "UnknownProcess"]


def test_invalid_signature_stops_checking():
    assert [v.code for v in errors("type A = B\ntype B = 1")] == ["NonContractive"]


def test_invalid_eqtype_is_reported():
    assert [e.code for e in errors("type A = +{a : 1}\ntype B = +{b : 1}\neqtype A = B")] == ["InvalidEqtype"]


def test_error_messages_use_type_names():
    sig, _ = parse_program("""
        type list[a] = +{nil : 1, cons : a * list[a]}
        decl f : (l : list[1]) |- (c : 1)
        proc c <- f l = case l ( nil => wait l ; close c | cons => x <- recv l ; wait x ; wait l ; close c )
    """)
    (e,) = check_all(sig).errors
    assert "channel l has type list[1], expected 1" in str(e)
    chk = Checker(sig)
    body = chk.unfold(Named("list", (One(),)))
    assert chk.show(Tensor(body, One())) == "list[1] * 1"


def test_check_process_directly():
    sig = load("expr")
    ctx = TypingContext(set(), {"x": Named("bin")}, ("y", Named("bin")))
    check_process(ctx, sig.procdefs["succ"].body, sig)
    with pytest.raises(TypeCheckError):
        check_process(TypingContext(set(), {}, ("y", Named("bin"))), sig.procdefs["succ"].body, sig)


def test_tail_call_is_spawn_then_forward():
    # both spellings are accepted for the same program
    a = "decl u : . |- (c : 1)\nproc c <- u = close c\ndecl v : . |- (c : 1)\n"
    assert errors(a + "proc c <- v = c <- u") == []
    assert errors(a + "proc c <- v = d <- u ; c <-> d") == []


def test_adding_valid_eqtypes_keeps_programs_checking():
    text = corpus_text("dyck_noeq.nst")
    assert check_all(parse_program(text)[0]).ok
    assert check_all(parse_program(text + "\neqtype T[x] = T'[x]\n")[0]).ok


CLOSED = [One(), Plus([("z", One())]), Tensor(One(), One())]


@settings(max_examples=60)
@given(st.sampled_from(["queue", "squeue", "list", "dyck", "tree", "tries", "expr"]), st.data())
def test_substitution_lemma(name, data):
    sig = load(name)
    chk = Checker(sig)
    for pname, d in sig.procdefs.items():
        ctx = definition_context(sig.procdecls[pname], d)
        if not d.typeparams:
            continue
        sigma = {p: data.draw(st.sampled_from(CLOSED)) for p in d.typeparams}
        chans = {c: substitute(t, sigma) for c, t in ctx.channels.items()}
        offered = substitute(ctx.offered[1], sigma)
        chk.check(frozenset(), chans, substitute_proc_types(d.body, sigma), ctx.offered[0], offered)
