import random

import pytest
from hypothesis import given, settings, strategies as st

from nested_sessions.ast import Case, Close, Fwd, Named, One, Plus, SendLabel, Wait, With
from nested_sessions.checker import Checker
from nested_sessions.runtime import (
    CloseMsg, ConfigViolation, Configuration, LabelMsg, Machine, Msg, NoValidOrdering, Proc,
    StuckObject, is_poised, is_poised_object, run, spawn_main, type_config,
)
from nested_sessions.syntax import parse_program

from helpers import corpus_text, load


def bits(n: int) -> str:
    """Least significant bit first, then the end marker."""
    out = []
    while n:
        out.append("b%d" % (n & 1))
        n >>= 1
    return " ".join(out + ["$"])


def test_expression_server():
    res = run(load("expr"), "main")
    assert res.text == bits(5 + 2 * 3) + " close"
    assert res.status == "poised" and len(res.config) == 0


def test_close_only():
    sig, _ = parse_program("decl main : . |- (c : 1)\nproc c <- main = close c")
    res = run(sig, "main")
    assert res.text == "close" and res.status == "poised" and res.steps == 1


def test_send_label_rule():
    sig, _ = parse_program("type A = +{k : 1}")
    cfg = Configuration(sig)
    cfg.add(Proc, "c", SendLabel("c", "k", Close("c")), Named("A"))
    m = Machine(sig, cfg, {})
    assert m.step() == "+S"
    objs = list(cfg)
    assert isinstance(objs[0], Proc) and objs[0].expr == Close(objs[0].provides) and objs[0].type == One()
    assert isinstance(objs[1], Msg) and objs[1].provides == "c"
    assert objs[1].form == LabelMsg("k", "c", objs[0].provides)


def test_close_wait_rule():
    sig, _ = parse_program("")
    cfg = Configuration(sig)
    cfg.add(Msg, "c", CloseMsg(), One())
    cfg.add(Proc, "d", Wait("c", Close("d")), One())
    m = Machine(sig, cfg, {})
    assert m.step() == "1C"
    (p,) = list(cfg)
    assert p.expr == Close("d")


def test_poised_receiver_is_quiescent():
    sig, _ = parse_program("type Q = &{go : 1}")
    cfg = Configuration(sig)
    cfg.add(Proc, "c", Case("c", (("go", Close("c")),)), Named("Q"))
    m = Machine(sig, cfg, {})
    assert m.step() is None and is_poised(cfg)


def test_poised_predicate():
    sig, _ = parse_program("")
    cfg = Configuration(sig)
    recv = cfg.add(Proc, "c", Case("c", (("go", Close("c")),)), With([("go", One())]))
    waiting = cfg.add(Proc, "e", Wait("d", Close("e")), One())
    msg = cfg.add(Msg, "m", LabelMsg("k", "m", "m2"), Plus([("k", One())]))
    client_msg = cfg.add(Msg, "n", LabelMsg("k", "c", "c"), One())
    assert is_poised_object(recv) and not is_poised_object(waiting)
    assert is_poised_object(msg) and not is_poised_object(client_msg)


def test_duplicate_provider_is_rejected():
    sig, _ = parse_program("")
    cfg = Configuration(sig)
    cfg.add(Proc, "c", Close("c"), One())
    with pytest.raises(ConfigViolation):
        cfg.add(Proc, "c", Close("c"), One())
    objs = [Proc(0, "c", Close("c"), One()), Proc(1, "c", Close("c"), One())]
    with pytest.raises(ConfigViolation):
        type_config({}, objs, {"c": One()}, sig)


def test_cyclic_use_has_no_ordering():
    sig, _ = parse_program("")
    objs = [Proc(0, "a", Fwd("a", "b"), One()), Proc(1, "b", Fwd("b", "a"), One())]
    with pytest.raises(NoValidOrdering):
        type_config({}, objs, {}, sig)


def test_initial_configuration_types():
    sig = load("expr")
    cfg, external, _ = spawn_main(sig, "main")
    order = type_config({}, cfg, {"#0": Named("bin")}, sig)
    assert [o.provides for o in order] == ["#0"]


PROGRAMS = [("expr", "main"), ("tree", "main"), ("dyck", "main"), ("tries", "main")]


@pytest.mark.parametrize("name,proc", PROGRAMS)
def test_preservation_and_progress(name, proc):
    sig = load(name)
    chk = Checker(sig)
    seen = []

    def hook(m, n, tag):
        if n <= 100:
            type_config({}, m.cfg, m.external_types, sig, chk)
        provided = [o.provides for o in m.cfg]
        assert len(provided) == len(set(provided))
        seen.append(tag)

    res = run(sig, proc, on_step=hook)
    assert res.status == "poised"


@pytest.mark.parametrize("name,proc", PROGRAMS)
def test_schedules_agree(name, proc):
    sig = load(name)
    assert run(sig, proc, policy="round-robin").text == run(sig, proc, policy="fifo").text


def test_every_rule_fires_somewhere():
    tags = set()
    for name, proc in PROGRAMS:
        tags |= {line.split(":")[0] for line in run(load(name), proc, trace=True).log}
    forward = """
        type Q = &{go : 1}
        decl srv : . |- (s : Q)
        proc s <- srv = case s ( go => close s )
        decl fw : . |- (f : Q)
        proc f <- fw = s <- srv ; f <-> s
        decl main : . |- (c : 1)
        proc c <- main = f <- fw ; f.go ; c <-> f
        decl lol : . |- (g : 1 -o 1)
        proc g <- lol = x <- recv g ; wait x ; close g
        decl main2 : . |- (c : 1)
        proc c <- main2 = g <- lol ; u <- main ; send g u ; c <-> g
    """
    sig, _ = parse_program(forward)
    res = run(sig, "main2", trace=True)
    assert res.text == "close"
    tags |= {line.split(":")[0] for line in res.log}
    assert tags == {"+S", "+C", "&S", "&C", "*S", "*C", "-oS", "-oC", "1S", "1C", "id+C", "id-C", "defC"}


def test_step_limit():
    sig = load("expr")
    res = run(sig, "main", max_steps=10)
    assert res.status == "step-limit" and res.steps == 10


def test_stuck_configurations():
    # an ill-typed program: the client waits where a label arrives
    sig, _ = parse_program("""
        type B = +{t : 1}
        decl s : . |- (b : B)
        proc b <- s = b.t ; close b
        decl main : . |- (c : 1)
        proc c <- main = b <- s ; wait b ; close c
    """)
    with pytest.raises(StuckObject):
        run(sig, "main")


def test_permissive_mode_reports_stuck():
    sig, _ = parse_program("""
        type Q = &{go : 1}
        decl main : . |- (c : 1)
        proc c <- main = d <- srv ; wait d ; close c
        decl srv : . |- (d : Q)
        proc d <- srv = case d ( go => close d )
    """)
    assert run(sig, "main", harness=False).status == "stuck"


# -- serialize and deserialize random trees


def random_tree(rng, nodes):
    if nodes == 0:
        return None
    left = rng.randint(0, nodes - 1)
    return (random_tree(rng, left), rng.randint(0, 2), random_tree(rng, nodes - 1 - left))


def render(tree) -> str:
    if tree is None:
        return "leaf close"
    left, v, right = tree
    return "node <%s> <v%d close> %s" % (render(left), v, render(right))


def tree_program(tree) -> str:
    lines = []
    counter = iter(range(10 ** 6))

    def build(t):
        name = "t%d" % next(counter)
        if t is None:
            lines.append("%s <- leaf[val] ;" % name)
            return name
        left, v, right = t
        ln = build(left)
        x = "x%d" % next(counter)
        lines.append("%s <- v%d ;" % (x, v))
        rn = build(right)
        lines.append("%s <- node[val] %s %s %s ;" % (name, ln, x, rn))
        return name

    root = build(tree)
    body = " ".join(lines) + " t <-> %s" % root
    return "decl rand : . |- (t : Tree[val])\nproc t <- rand = %s\n" \
           "decl rt : . |- (r : Tree[val] * 1)\n" \
           "proc r <- rt = t <- rand ; k <- unit ; s <- serialize[val][1] t k ; r <- deserialize[val][1] s\n" % body


@settings(max_examples=40)
@given(st.integers(0, 7), st.integers(0, 2 ** 32 - 1))
def test_tree_round_trip(nodes, seed):
    tree = random_tree(random.Random(seed), nodes)
    sig, _ = parse_program(corpus_text("tree.nst") + tree_program(tree))
    direct = run(sig, "rand")
    assert direct.text == render(tree)
    back = run(sig, "rt")
    assert back.text == "<%s> close" % render(tree)
    assert back.status == "poised"
    assert run(sig, "rt", policy="fifo").text == back.text
