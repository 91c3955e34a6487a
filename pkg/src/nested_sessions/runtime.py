"""Asynchronous semantics by multiset rewriting, with configuration typing.

A configuration holds process objects ``proc(c, P)`` and message objects
``msg(c, M)``; each provides one channel.  Messages are kept in the form of
the process term they stand for:

* a label message ``c.k ; p <-> d`` (``along`` c, continuation d, provides p),
* a channel message ``send c e ; p <-> d``,
* ``close p``.

A message sent by a provider has ``along == provides``; one sent by a client
has ``along == cont``, the old channel it was sent on.

Every object also carries the type at which it provides its channel, so a
configuration can be re-typed after any step.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Union

from .ast import (
    Case, Close, Fwd, Lolli, Named, One, Plus, ProcExpr, RecvChan, SendChan, SendLabel,
    Signature, Spawn, TailCall, Tensor, TypeExpr, Wait, With, free_channels, rename_channels,
    substitute, substitute_proc_types, unfold,
)
from .checker import Checker, TypeCheckError
from .equality import EqualityChecker, Equal
from .syntax import print_proc, print_type


class StuckObject(Exception):
    pass


class NoValidOrdering(Exception):
    pass


class ConfigViolation(Exception):
    pass


# ---------------------------------------------------------------------------
# Objects


@dataclass(frozen=True)
class LabelMsg:
    label: str
    along: str
    cont: str


@dataclass(frozen=True)
class ChanMsg:
    passed: str
    along: str
    cont: str


@dataclass(frozen=True)
class CloseMsg:
    pass


MsgForm = Union[LabelMsg, ChanMsg, CloseMsg]


@dataclass
class Proc:
    id: int
    provides: str
    expr: ProcExpr
    type: TypeExpr
    stamp: int = 0

    def uses(self) -> set[str]:
        return free_channels(self.expr) - {self.provides}

    def __str__(self):
        return "proc(%s, %s)" % (self.provides, print_proc(self.expr))


@dataclass
class Msg:
    id: int
    provides: str
    form: MsgForm
    type: TypeExpr
    stamp: int = 0

    def as_proc(self) -> ProcExpr:
        f = self.form
        if isinstance(f, LabelMsg):
            return SendLabel(f.along, f.label, Fwd(self.provides, f.cont))
        if isinstance(f, ChanMsg):
            return SendChan(f.along, f.passed, Fwd(self.provides, f.cont))
        return Close(self.provides)

    def uses(self) -> set[str]:
        f = self.form
        if isinstance(f, LabelMsg):
            return {f.cont}
        if isinstance(f, ChanMsg):
            return {f.cont, f.passed}
        return set()

    @property
    def positive(self) -> bool:
        return isinstance(self.form, CloseMsg) or self.form.along == self.provides

    def __str__(self):
        return "msg(%s, %s)" % (self.provides, print_proc(self.as_proc()))


Obj = Union[Proc, Msg]


def _rename_form(f: MsgForm, ren: dict) -> MsgForm:
    r = lambda c: ren.get(c, c)  # noqa: E731
    if isinstance(f, LabelMsg):
        return LabelMsg(f.label, r(f.along), r(f.cont))
    if isinstance(f, ChanMsg):
        return ChanMsg(r(f.passed), r(f.along), r(f.cont))
    return f


def is_poised_object(o: Obj) -> bool:
    if isinstance(o, Proc):
        p = o.expr
        return (isinstance(p, Case) or isinstance(p, RecvChan)) and p.chan == o.provides
    return o.positive


# ---------------------------------------------------------------------------
# Configurations


class Configuration:
    """A multiset of objects indexed by the channel each provides."""

    def __init__(self, sig: Signature):
        self.sig = sig
        self.objects: dict[int, Obj] = {}
        self.by_chan: dict[str, int] = {}
        self._ids = itertools.count()
        self._chans = itertools.count()
        self._clock = itertools.count()

    def fresh_chan(self) -> str:
        return "#%d" % next(self._chans)

    def add(self, o_cls, provides, payload, typ) -> Obj:
        if provides in self.by_chan:
            raise ConfigViolation("channel %s is already provided" % provides)
        o = o_cls(next(self._ids), provides, payload, typ, next(self._clock))
        self.objects[o.id] = o
        self.by_chan[provides] = o.id
        return o

    def remove(self, o: Obj):
        del self.objects[o.id]
        del self.by_chan[o.provides]

    def provider(self, chan: str) -> Optional[Obj]:
        i = self.by_chan.get(chan)
        return None if i is None else self.objects[i]

    def client(self, chan: str) -> Optional[Obj]:
        for o in self.objects.values():
            if chan in o.uses():
                return o
        return None

    def __iter__(self):
        return iter(sorted(self.objects.values(), key=lambda o: o.id))

    def __len__(self):
        return len(self.objects)

    def __str__(self):
        return "\n".join(str(o) for o in self)


def is_poised(cfg: Union[Configuration, Iterable[Obj]]) -> bool:
    return all(is_poised_object(o) for o in cfg)


# ---------------------------------------------------------------------------
# Transcripts


@dataclass
class Stream:
    events: list = field(default_factory=list)  # str labels, "close", or nested Stream

    def render(self) -> str:
        out = []
        for e in self.events:
            out.append("<%s>" % e.render() if isinstance(e, Stream) else e)
        return " ".join(out)

    def __str__(self):
        return self.render()


# ---------------------------------------------------------------------------
# The machine


@dataclass
class RunResult:
    config: Configuration
    transcript: Stream
    status: str  # "poised", "step-limit" or "stuck"
    steps: int
    log: list[str]

    @property
    def text(self) -> str:
        return self.transcript.render()


class Machine:
    """Runs a configuration, draining messages that reach external channels.

    ``policy`` is ``"round-robin"`` (creation order, resuming after the last
    object that fired) or ``"fifo"`` (least recently changed object first).
    In harness mode a configuration that can neither step nor is poised
    raises ``StuckObject``; otherwise the run ends with status ``"stuck"``.
    """

    def __init__(self, sig: Signature, cfg: Configuration, external: dict[str, Stream],
                 policy: str = "round-robin", harness: bool = True, trace: bool = False):
        self.sig = sig
        self.cfg = cfg
        self.external = external
        self.policy = policy
        self.harness = harness
        self.trace = trace
        self.log: list[str] = []
        self._cursor = -1
        # expected type of every external channel, advanced as messages are observed
        self.external_types: dict[str, TypeExpr] = {}
        for c in external:
            o = cfg.provider(c)
            if o is not None:
                self.external_types[c] = o.type
        self.drain()

    # -- helpers

    def unfold(self, t: TypeExpr) -> TypeExpr:
        return unfold(self.sig, t)

    def _fail(self, msg):
        raise StuckObject(msg)

    def _touch(self, o: Obj):
        o.stamp = next(self.cfg._clock)

    def drain(self):
        """Hand messages on external channels to the observer."""
        progress = True
        while progress:
            progress = False
            for chan in list(self.external):
                o = self.cfg.provider(chan)
                if isinstance(o, Msg) and o.positive:
                    stream = self.external.pop(chan)
                    u = self.unfold(self.external_types.pop(chan, o.type))
                    self.cfg.remove(o)
                    f = o.form
                    if isinstance(f, LabelMsg):
                        stream.events.append(f.label)
                        self.external[f.cont] = stream
                        self.external_types[f.cont] = u[f.label]
                    elif isinstance(f, ChanMsg):
                        sub = Stream()
                        stream.events.append(sub)
                        self.external[f.passed] = sub
                        self.external[f.cont] = stream
                        self.external_types[f.passed] = u.left
                        self.external_types[f.cont] = u.right
                    else:
                        stream.events.append("close")
                    progress = True

    # -- rules; each returns a tag when it fired

    def _fire(self, o: Obj) -> Optional[str]:
        cfg = self.cfg
        if isinstance(o, Msg):
            return None
        p, c = o.expr, o.provides
        if isinstance(p, SendLabel):
            if p.chan == c:  # provider sends: (+S)
                u = self.unfold(o.type)
                if not isinstance(u, Plus) or p.label not in u.labels:
                    self._fail("%s sends %s at type %s" % (o, p.label, print_type(o.type)))
                c2 = cfg.fresh_chan()
                cfg.remove(o)
                cfg.add(Proc, c2, rename_channels(p.cont, {c: c2}), u[p.label])
                cfg.add(Msg, c, LabelMsg(p.label, c, c2), o.type)
                return "+S"
            # client sends along a used channel: (&S)
            prov = cfg.provider(p.chan)
            u = self.unfold(prov.type) if prov is not None else None
            if not isinstance(u, With) or p.label not in u.labels:
                self._fail("%s sends %s on %s" % (o, p.label, p.chan))
            c2 = cfg.fresh_chan()
            cfg.add(Msg, c2, LabelMsg(p.label, p.chan, p.chan), u[p.label])
            o.expr = rename_channels(p.cont, {p.chan: c2})
            self._touch(o)
            return "&S"
        if isinstance(p, SendChan):
            if p.chan == c:  # (*S)
                u = self.unfold(o.type)
                if not isinstance(u, Tensor):
                    self._fail("%s sends a channel at type %s" % (o, print_type(o.type)))
                c2 = cfg.fresh_chan()
                cfg.remove(o)
                cfg.add(Proc, c2, rename_channels(p.cont, {c: c2}), u.right)
                cfg.add(Msg, c, ChanMsg(p.payload, c, c2), o.type)
                return "*S"
            prov = cfg.provider(p.chan)  # (-oS)
            u = self.unfold(prov.type) if prov is not None else None
            if not isinstance(u, Lolli):
                self._fail("%s sends a channel on %s" % (o, p.chan))
            c2 = cfg.fresh_chan()
            cfg.add(Msg, c2, ChanMsg(p.payload, p.chan, p.chan), u.right)
            o.expr = rename_channels(p.cont, {p.chan: c2})
            self._touch(o)
            return "-oS"
        if isinstance(p, Close):  # (1S)
            cfg.remove(o)
            cfg.add(Msg, c, CloseMsg(), o.type)
            return "1S"
        if isinstance(p, Case):
            if p.chan == c:  # provider receives a label: (&C)
                m = self._negative_msg(c)
                if m is None or not isinstance(m.form, LabelMsg):
                    return None
                arm = p.branch_map.get(m.form.label)
                if arm is None:
                    self._fail("%s has no branch %s" % (o, m.form.label))
                cfg.remove(m)
                cfg.remove(o)
                cfg.add(Proc, m.provides, rename_channels(arm, {c: m.provides}), m.type)
                return "&C"
            m = cfg.provider(p.chan)  # (+C)
            if not isinstance(m, Msg) or not m.positive:
                return None
            if not isinstance(m.form, LabelMsg):
                self._fail("%s expects a label on %s" % (o, p.chan))
            arm = p.branch_map.get(m.form.label)
            if arm is None:
                self._fail("%s has no branch %s" % (o, m.form.label))
            cfg.remove(m)
            o.expr = rename_channels(arm, {p.chan: m.form.cont})
            self._touch(o)
            return "+C"
        if isinstance(p, RecvChan):
            if p.chan == c:  # (-oC)
                m = self._negative_msg(c)
                if m is None or not isinstance(m.form, ChanMsg):
                    return None
                cfg.remove(m)
                cfg.remove(o)
                body = rename_channels(p.cont, {c: m.provides, p.bound: m.form.passed})
                cfg.add(Proc, m.provides, body, m.type)
                return "-oC"
            m = cfg.provider(p.chan)  # (*C)
            if not isinstance(m, Msg) or not m.positive:
                return None
            if not isinstance(m.form, ChanMsg):
                self._fail("%s expects a channel on %s" % (o, p.chan))
            cfg.remove(m)
            o.expr = rename_channels(p.cont, {p.chan: m.form.cont, p.bound: m.form.passed})
            self._touch(o)
            return "*C"
        if isinstance(p, Wait):  # (1C)
            m = cfg.provider(p.chan)
            if not isinstance(m, Msg) or not m.positive:
                return None
            if not isinstance(m.form, CloseMsg):
                self._fail("%s waits on %s but receives %s" % (o, p.chan, m))
            cfg.remove(m)
            o.expr = p.cont
            self._touch(o)
            return "1C"
        if isinstance(p, Fwd):
            d = p.use
            m = cfg.provider(d)
            if isinstance(m, Msg):  # (id+C)
                cfg.remove(m)
                cfg.remove(o)
                ren = {d: c}
                form = _rename_form(m.form, ren)
                cfg.add(Msg, c, form, o.type)
                return "id+C"
            m = self._user_msg(c)
            if m is not None:  # (id-C)
                cfg.remove(o)
                m.form = _rename_form(m.form, {c: d})
                self._touch(m)
                return "id-C"
            return None
        if isinstance(p, (Spawn, TailCall)):  # (defC)
            decl = self.sig.procdecls.get(p.procname)
            d = self.sig.procdefs.get(p.procname)
            if decl is None or d is None:
                self._fail("%s calls unknown process %s" % (o, p.procname))
            a = cfg.fresh_chan()
            inst = dict(zip(d.typeparams, p.typeargs))
            body = substitute_proc_types(d.body, inst)
            body = rename_channels(body, {d.offer: a, **dict(zip(d.args, p.chanargs))})
            dinst = dict(zip(decl.typeparams, p.typeargs))
            cfg.add(Proc, a, body, substitute(decl.offers[1], dinst))
            if isinstance(p, Spawn):
                o.expr = rename_channels(p.cont, {p.bound: a})
            else:
                o.expr = Fwd(c, a)
            self._touch(o)
            return "defC"
        raise TypeError(p)

    def _negative_msg(self, chan: str) -> Optional[Msg]:
        for o in self.cfg.objects.values():
            if isinstance(o, Msg) and not isinstance(o.form, CloseMsg) and o.form.along == chan \
                    and o.provides != chan:
                return o
        return None

    def _user_msg(self, chan: str) -> Optional[Msg]:
        for o in self.cfg.objects.values():
            if isinstance(o, Msg) and chan in o.uses():
                return o
        return None

    # -- scheduling

    def _order(self) -> list[Obj]:
        objs = list(self.cfg.objects.values())
        if self.policy == "fifo":
            return sorted(objs, key=lambda o: (o.stamp, o.id))
        objs.sort(key=lambda o: o.id)
        after = [o for o in objs if o.id > self._cursor]
        before = [o for o in objs if o.id <= self._cursor]
        return after + before

    def step(self) -> Optional[str]:
        """Fire one rule; ``None`` when no rule applies."""
        for o in self._order():
            if o.id not in self.cfg.objects:
                continue
            before = str(o) if self.trace else ""
            tag = self._fire(o)
            if tag is not None:
                self._cursor = o.id
                if self.trace:
                    self.log.append("%s: %s" % (tag, before))
                self.drain()
                return tag
        return None

    def run(self, max_steps: int = 100000, on_step: Optional[Callable[[int, str], None]] = None) -> str:
        steps = 0
        while steps < max_steps:
            tag = self.step()
            if tag is None:
                if is_poised(self.cfg):
                    return "poised"
                if self.harness:
                    stuck = [str(o) for o in self.cfg if not is_poised_object(o)]
                    raise StuckObject("no rule applies; not poised: %s" % "; ".join(stuck))
                return "stuck"
            steps += 1
            self.steps = steps
            if on_step is not None:
                on_step(steps, tag)
        return "step-limit"


def spawn_main(sig: Signature, procname: str) -> tuple[Configuration, dict[str, Stream], Stream]:
    """Configuration holding one instance of a closed process with no arguments."""
    decl = sig.procdecls.get(procname)
    d = sig.procdefs.get(procname)
    if decl is None or d is None:
        raise KeyError("process %s is not declared and defined" % procname)
    if decl.uses or decl.typeparams:
        raise ValueError("process %s must take no channels and no type parameters to run" % procname)
    cfg = Configuration(sig)
    c = cfg.fresh_chan()
    cfg.add(Proc, c, rename_channels(d.body, {d.offer: c}), decl.offers[1])
    root = Stream()
    return cfg, {c: root}, root


def run(sig: Signature, procname: str, max_steps: int = 100000, policy: str = "round-robin",
        harness: bool = True, trace: bool = False,
        on_step: Optional[Callable[["Machine", int, str], None]] = None) -> RunResult:
    cfg, external, root = spawn_main(sig, procname)
    m = Machine(sig, cfg, external, policy, harness, trace)
    hook = None if on_step is None else (lambda n, tag: on_step(m, n, tag))
    m.steps = 0
    status = m.run(max_steps, hook)
    return RunResult(cfg, root, status, m.steps, m.log)


# ---------------------------------------------------------------------------
# Configuration typing


def type_config(uses: dict[str, TypeExpr], cfg: Union[Configuration, Iterable[Obj]], offers: dict[str, TypeExpr],
                sig: Signature, checker: Optional[Checker] = None) -> list[Obj]:
    """Check ``uses |= cfg :: offers``; return the objects in a valid order.

    Raises ``ConfigViolation`` (distinctness, linearity, interface mismatch),
    ``NoValidOrdering`` (cyclic use) or ``TypeCheckError`` for an object.
    """
    objs = list(cfg)
    checker = checker or Checker(sig)
    provided: dict[str, Obj] = {}
    for o in objs:
        if o.provides in provided:
            raise ConfigViolation("channel %s is provided twice" % o.provides)
        provided[o.provides] = o
    users: dict[str, Obj] = {}
    for o in objs:
        for u in o.uses():
            if u in users:
                raise ConfigViolation("channel %s is used by two objects" % u)
            if u == o.provides:
                raise ConfigViolation("object providing %s also uses it" % u)
            users[u] = o
    ext_uses = {u for u in users if u not in provided}
    ext_offers = {c for c in provided if c not in users}
    if ext_uses != set(uses):
        raise ConfigViolation("configuration uses %s, expected %s" % (sorted(ext_uses), sorted(uses)))
    if ext_offers != set(offers):
        raise ConfigViolation("configuration provides %s, expected %s" % (sorted(ext_offers), sorted(offers)))
    for c, t in offers.items():
        v = checker.eq.check((), provided[c].type, t)
        if not isinstance(v, Equal):
            raise ConfigViolation("channel %s provided at %s, expected %s" % (c, print_type(provided[c].type),
                                                                           print_type(t)))
    # providers before clients
    order: list[Obj] = []
    state: dict[int, int] = {}

    def visit(o: Obj):
        s = state.get(o.id, 0)
        if s == 2:
            return
        if s == 1:
            raise NoValidOrdering("cyclic channel use through %s" % o.provides)
        state[o.id] = 1
        for u in sorted(o.uses()):
            if u in provided:
                visit(provided[u])
        state[o.id] = 2
        order.append(o)

    for o in sorted(objs, key=lambda o: o.id):
        visit(o)
    for o in order:
        ctx = {u: (provided[u].type if u in provided else uses[u]) for u in o.uses()}
        expr = o.expr if isinstance(o, Proc) else o.as_proc()
        checker.check(frozenset(), ctx, expr, o.provides, o.type)
    return order
