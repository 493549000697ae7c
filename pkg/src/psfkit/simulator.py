"""Interactive stepping sessions over the bus-hosted component machine.

The stepper is a bus application of seven components: a kernel that
walks the operational semantics of a loaded environment (split into a
wire core plus adapter in the bundled model), a start-process relay, an
action chooser with random mode and history, a trace controller, a
break controller, a function panel, and a display.  Its process model
ships as the ``stepper-system`` corpus group; `assembleSimulator` wires
that model into a runnable bus script.

The runtime in this module mirrors the model one component core at a
time.  Every handler is a deterministic function of (core state,
incoming frame) that returns the frames it emits; `SimulatorSession`
strings the handlers together over a FIFO queue — one legal
linearization of the bus schedule — and records one log line per
delivered frame:

    seq SP src SP dst SP term-text

Frames reuse the bus `BusFrame` type with ``tool`` naming the
destination component (or the ``user`` / ``toolbus`` pseudo-peers).
Action labels travel inside frames in their term form, ``name(args)``;
the rendered text of that term equals the label text, so logs, pending
lists, and breakpoint patterns all speak the same language.  A session
log replays bit-for-bit: feeding the ``user`` lines of a log into a
fresh session with the same options regenerates every line, including
the seeded random picks.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .bus import BusFrame, BusScript, ToolEndpoint
from .corpus import load_group
from .elaborate import checkWellFormed
from .errors import (
    ChoiceWithoutList,
    ConflictingBinding,
    GotoDuringRandom,
    IndexOutOfRange,
    ProtocolViolation,
    PsfError,
    ReplayDivergence,
    UnknownMark,
    UnknownProcess,
    UnknownSnapshot,
)
from .process import Call, Environment, Terminated, proc_text
from .semantics import Engine, ProcState
from .syntax import parse_term_text
from .terms import (
    App,
    AtomPattern,
    AtomSet,
    Term,
    match_pattern,
    term_text,
)

__all__ = [
    "DEADLOCK",
    "KernelCore",
    "HistoryStore",
    "ChooserCore",
    "DisplayLog",
    "DisplayEntry",
    "LogEvent",
    "SimulatorSession",
    "kernelHandle",
    "chooserHandle",
    "breakCheck",
    "breakHandle",
    "traceCheck",
    "traceHandle",
    "functionPanel",
    "assembleSimulator",
    "parse_pattern",
    "pattern_add",
    "pattern_remove",
    "label_term",
    "replaySession",
]


# --- sentinels and small helpers --------------------------------------------

class _Deadlock:
    """The stepped process can neither act nor finish."""

    __slots__ = ()

    def __repr__(self):
        return "DEADLOCK"


DEADLOCK = _Deadlock()

#: component ids, in the model's merge order
COMPONENTS = (
    "kernel",
    "startprocess",
    "actionchooser",
    "function",
    "tracectrl",
    "breakctrl",
    "display",
)

#: tool ids bound by the assembled script, same order
TOOL_IDS = (
    "KERNEL",
    "STARTPROCESS",
    "ACTIONCHOOSER",
    "FUNCTION",
    "TRACECTRL",
    "BREAKCTRL",
    "DISPLAY",
)


def _t(name: str, *args: Term) -> Term:
    return App(name, tuple(args))


def _num(n: int) -> Term:
    return App(str(n))


def label_term(label) -> Term:
    """The term form of a transition label (its text parses back to it)."""
    if getattr(label, "args", ()):
        return App(label.name, tuple(label.args))
    return App(getattr(label, "name", "") or label.text)


def parse_pattern(text: str) -> AtomPattern:
    """Parse a breakpoint/trace pattern; `$n` holes match any subterm."""
    t = parse_term_text(text, wildcards=True)
    if not isinstance(t, App):
        raise ProtocolViolation("actionchooser", f"pattern must name an action: {text}")
    return AtomPattern(t.name, t.args)


def _pattern_matches(pat: AtomPattern, subject: Term) -> bool:
    if not isinstance(subject, App):
        return False
    if pat.name != subject.name or len(pat.args) != len(subject.args):
        return False
    bindings: dict | None = {}
    for p, a in zip(pat.args, subject.args):
        try:
            bindings = match_pattern(p, a, bindings)
        except ConflictingBinding:
            return False
        if bindings is None:
            return False
    return True


def _in_set(aset: AtomSet, subject: Term) -> bool:
    return any(_pattern_matches(item, subject) for item in aset.items)


def pattern_add(aset: AtomSet, text: str) -> AtomSet:
    """Return `aset` with the pattern added (idempotent)."""
    pat = parse_pattern(text)
    if pat in aset.items:
        return aset
    return AtomSet(aset.name, aset.items + (pat,), aset.quantifiers)


def pattern_remove(aset: AtomSet, text: str) -> AtomSet:
    """Return `aset` without the pattern; unknown patterns are an error."""
    pat = parse_pattern(text)
    if pat not in aset.items:
        raise ProtocolViolation(aset.name, f"no such pattern: {pat}")
    return AtomSet(aset.name, tuple(i for i in aset.items if i != pat), aset.quantifiers)


# --- history ----------------------------------------------------------------

@dataclass
class HistoryStore:
    """Saved kernel states by strictly increasing numeric id, plus named
    marks onto those ids."""

    snapshots: dict = field(default_factory=dict)
    next_id: int = 0
    marks: dict = field(default_factory=dict)

    def save(self, state) -> int:
        sid = self.next_id
        self.snapshots[sid] = state
        self.next_id = sid + 1
        return sid

    def goto(self, sid: int):
        if sid not in self.snapshots:
            raise UnknownSnapshot(sid)
        return self.snapshots[sid]

    def latest(self) -> int:
        if not self.snapshots:
            raise UnknownSnapshot(-1)
        return self.next_id - 1

    def mark(self, name: str, sid: int) -> None:
        if sid not in self.snapshots:
            raise UnknownSnapshot(sid)
        self.marks[name] = sid

    def resolveMark(self, name: str) -> int:
        if name not in self.marks:
            raise UnknownMark(name)
        return self.marks[name]


# --- kernel -----------------------------------------------------------------

@dataclass
class KernelCore:
    """The stepping engine behind the kernel tool: the current state of
    the loaded environment, the wait flag of the component machine, and
    the snapshot history."""

    current: object                      # ProcState | TERMINATED | DEADLOCK
    spec: Environment
    wait: bool = True
    history: HistoryStore = field(default_factory=HistoryStore)
    start_candidates: tuple = ()
    engine: Engine | None = None

    def __post_init__(self):
        if self.engine is None:
            self.engine = Engine(self.spec)

    def enabled(self) -> tuple:
        if not isinstance(self.current, ProcState):
            return ()
        return self.engine.enabled(self.current.expr)

    def status_text(self) -> str:
        if self.current is DEADLOCK:
            return "DEADLOCK"
        if isinstance(self.current, Terminated):
            return "TERMINATED"
        return proc_text(self.current.expr)


def kernelHandle(core: KernelCore, incoming: BusFrame):
    """Advance the kernel core by one frame; returns (core, outgoing).

    The compute tick (`eval compute-choose-list`) is only legal outside
    the wait phase and always ends in it; every other frame is only
    legal while waiting, mirroring the model's Kernel(wait) guards.
    """
    term = incoming.term
    head = term.name if isinstance(term, App) else None

    if incoming.verb == "eval" and head == "compute-choose-list":
        if core.wait:
            raise ProtocolViolation("kernel", "compute tick while waiting")
        core.wait = True
        ts = core.enabled()
        if ts:
            listing = _t("action-choose-list", *(label_term(t.label) for t in ts))
            return core, (BusFrame("do", "actionchooser", listing),)
        if isinstance(core.current, ProcState):
            core.current = DEADLOCK
        return core, (
            BusFrame("do", "actionchooser", _t("halt")),
            BusFrame("do", "display", _t("halt")),
        )

    if not core.wait:
        raise ProtocolViolation("kernel", f"{term_text(term)} outside the wait phase")

    if head == "action":
        index = int(term.args[0].name)
        ts = core.enabled()
        if not 0 <= index < len(ts):
            raise IndexOutOfRange(index, len(ts))
        target = ts[index].target
        core.current = (
            target if isinstance(target, Terminated)
            else ProcState(core.engine.canon(target), core.spec)
        )
        core.wait = False
        return core, ()

    if head == "start-process":
        name = term.args[0].name
        if name not in core.start_candidates:
            raise UnknownProcess(name)
        core.current = ProcState(core.engine.canon(Call(name, ())), core.spec)
        core.wait = False
        return core, (
            BusFrame("do", "display", term),
            BusFrame("do", "actionchooser", _t("reset")),
        )

    if head == "quit":
        return core, (BusFrame("terminate", "toolbus", _t("shutdown")),)

    if head == "process-status":
        report = _t("process-status", App(core.status_text()))
        return core, (BusFrame("do", "display", report),)

    if head == "save":
        core.history.save(core.current)
        return core, ()

    if head == "goto":
        sid = int(term.args[0].name)
        core.current = core.history.goto(sid)
        core.wait = False
        return core, ()

    if head == "mark":
        sid = core.history.save(core.current)
        core.history.mark(term.args[0].name, sid)
        return core, ()

    raise ProtocolViolation("kernel", f"unexpected frame {term_text(term)}")


# --- action chooser ----------------------------------------------------------

@dataclass
class ChooserCore:
    """User-facing choice state: the presented action terms, the random
    and choose flags of the model, and the configured breakpoint and
    trace pattern sets."""

    random: bool = False
    choose: bool = False
    pending_list: tuple = ()
    breakpoints: AtomSet = field(default_factory=lambda: AtomSet("breakpoints"))
    traced: AtomSet = field(default_factory=lambda: AtomSet("traced"))
    rng_seed: int = 0
    break_mode: str = "any"              # "any" | "all" membership for lists
    # sequencing state of the model's Choose process, between handshakes
    phase: str = "idle"                  # idle|await-break-list|await-break-action|await-done
    halted: bool = False
    inflight: Term | None = None
    rng: random.Random = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.break_mode not in ("any", "all"):
            raise ProtocolViolation("actionchooser", f"unknown break mode {self.break_mode}")
        self.rng = random.Random(self.rng_seed)


def _present(core: ChooserCore, listing: Term):
    core.pending_list = tuple(listing.args)
    core.choose = True
    core.halted = False
    core.phase = "idle"
    return BusFrame("do", "user", listing)


def chooserHandle(core: ChooserCore, incoming: BusFrame):
    """Advance the chooser core by one frame; returns (core, outgoing).

    Kernel-facing frames arrive with verb ``do``; user input arrives
    with verb ``event``.  The handler validates before it mutates, so a
    rejected frame leaves the core exactly as it was.
    """
    term = incoming.term
    head = term.name if isinstance(term, App) else None

    if incoming.verb == "do":
        if head == "action-choose-list" and core.phase == "idle":
            if core.random:
                core.phase = "await-break-list"
                core.inflight = term
                return core, (BusFrame("do", "breakctrl", term),)
            # save precedes presenting, so undo can rewind to this point
            out = (BusFrame("event", "kernel", _t("save")), _present(core, term))
            return core, out
        if head == "action-choose-list" and core.phase == "await-break-list":
            return core, (_present(core, term),)          # vetted, still random
        if head == "break" and core.phase == "await-break-list":
            listing = core.inflight
            core.random = False
            core.inflight = None
            return core, (
                BusFrame("do", "user", _t("random-off")),
                _present(core, listing),
            )
        if head == "break" and core.phase == "await-break-action":
            core.random = False
            core.inflight = None
            core.phase = "idle"
            return core, (BusFrame("do", "user", _t("random-off")),)
        if head == "no-break" and core.phase == "await-break-action":
            action = core.inflight
            core.inflight = None
            core.phase = "await-done"
            return core, (BusFrame("do", "tracectrl", action),)
        if head == "done" and core.phase == "await-done":
            core.phase = "idle"
            return core, ()
        if head == "halt":
            core.random = False
            core.choose = True           # history actions stay available
            core.pending_list = ()
            core.halted = True
            core.phase = "idle"
            return core, (BusFrame("do", "user", _t("random-off")),)
        if head == "reset":
            core.pending_list = ()
            core.choose = False
            core.halted = False
            core.phase = "idle"
            core.inflight = None
            return core, ()
        raise ProtocolViolation(
            "actionchooser", f"{term_text(term)} unexpected in phase {core.phase}"
        )

    if incoming.verb == "event":
        if head == "action":
            if not core.choose or not core.pending_list:
                raise ChoiceWithoutList()
            index = int(term.args[0].name)
            if not 0 <= index < len(core.pending_list):
                raise IndexOutOfRange(index, len(core.pending_list))
            picked = core.pending_list[index]
            core.choose = False
            core.pending_list = ()
            out = [BusFrame("do", "kernel", term)]
            if core.random:
                core.phase = "await-break-action"
                core.inflight = _t("action", picked)
                out.append(BusFrame("do", "breakctrl", _t("action", picked)))
            else:
                core.phase = "await-done"
                out.append(BusFrame("do", "tracectrl", _t("action", picked)))
            return core, tuple(out)
        if head == "save":
            if not core.choose:
                raise ProtocolViolation("actionchooser", "save outside a choice point")
            return core, (BusFrame("event", "kernel", term),)
        if head == "goto":
            if core.random:
                raise GotoDuringRandom()
            if not core.choose:
                raise ProtocolViolation("actionchooser", "goto outside a choice point")
            core.choose = False
            core.pending_list = ()
            return core, (BusFrame("event", "kernel", term),)
        if head == "random-on":
            if core.random:
                raise ProtocolViolation("actionchooser", "random mode is already on")
            core.random = True
            return core, ()
        if head == "random-off":
            if not core.random:
                raise ProtocolViolation("actionchooser", "random mode is already off")
            core.random = False
            return core, ()
        if head == "break-add":
            core.breakpoints = pattern_add(core.breakpoints, term_text(term.args[0]))
            return core, ()
        if head == "break-remove":
            core.breakpoints = pattern_remove(core.breakpoints, term_text(term.args[0]))
            return core, ()
        if head == "trace-add":
            core.traced = pattern_add(core.traced, term_text(term.args[0]))
            return core, ()
        if head == "trace-remove":
            core.traced = pattern_remove(core.traced, term_text(term.args[0]))
            return core, ()

    raise ProtocolViolation("actionchooser", f"unexpected frame {term_text(term)}")


# --- break and trace controllers ---------------------------------------------

def breakCheck(core: ChooserCore, subject) -> str:
    """Verdict for one action (``break``/``no-break``) or an action list
    (``break-list``/``pass-list``).

    A single action breaks iff it matches a breakpoint pattern.  A list
    breaks per the configured mode: ``any`` stops when at least one
    member matches, ``all`` only when every member does.
    """
    if isinstance(subject, (tuple, list)):
        subjects = [s if isinstance(s, Term) else label_term(s) for s in subject]
        if not subjects or not core.breakpoints.items:
            return "pass-list"
        test = any if core.break_mode == "any" else all
        hit = test(_in_set(core.breakpoints, s) for s in subjects)
        return "break-list" if hit else "pass-list"
    s = subject if isinstance(subject, Term) else label_term(subject)
    return "break" if _in_set(core.breakpoints, s) else "no-break"


def breakHandle(core: ChooserCore, incoming: BusFrame):
    """Answer a chooser consult; the display hears about a hit first."""
    term = incoming.term
    head = term.name if isinstance(term, App) else None
    if head == "action-choose-list":
        verdict = breakCheck(core, term.args)
        if verdict == "break-list":
            return core, (
                BusFrame("do", "display", _t("break")),
                BusFrame("do", "actionchooser", _t("break")),
            )
        return core, (BusFrame("do", "actionchooser", term),)
    if head == "action":
        verdict = breakCheck(core, term.args[0])
        if verdict == "break":
            return core, (
                BusFrame("do", "display", _t("break-action", term.args[0])),
                BusFrame("do", "actionchooser", _t("break")),
            )
        return core, (BusFrame("do", "actionchooser", _t("no-break")),)
    raise ProtocolViolation("breakctrl", f"unexpected frame {term_text(term)}")


def traceCheck(core: ChooserCore, action) -> tuple:
    """(``trace`` | ``no-trace``, ``done``) — the done half always follows."""
    s = action if isinstance(action, Term) else label_term(action)
    return ("trace" if _in_set(core.traced, s) else "no-trace", "done")


def traceHandle(core: ChooserCore, incoming: BusFrame):
    """Answer a trace consult; done goes out last, never first."""
    term = incoming.term
    if not (isinstance(term, App) and term.name == "action"):
        raise ProtocolViolation("tracectrl", f"unexpected frame {term_text(term)}")
    verdict, _done = traceCheck(core, term.args[0])
    out = []
    if verdict == "trace":
        out.append(BusFrame("do", "display", _t("trace-action", term.args[0])))
    out.append(BusFrame("do", "actionchooser", _t("done")))
    return core, tuple(out)


# --- display and function panel ----------------------------------------------

@dataclass(frozen=True)
class DisplayEntry:
    source: str
    term: Term
    index: int                           # wall order: the session log seq

    def __str__(self):
        return f"[{self.source}] {term_text(self.term)}"


@dataclass
class DisplayLog:
    """Append-only record of everything the display component was shown."""

    entries: list = field(default_factory=list)

    def append(self, source: str, term: Term, index: int) -> DisplayEntry:
        entry = DisplayEntry(source, term, index)
        self.entries.append(entry)
        return entry

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def functionPanel(event: str) -> BusFrame:
    """Translate a function-panel button into its kernel message."""
    if event not in ("quit", "process-status"):
        raise ProtocolViolation("function", f"unknown panel event {event}")
    return BusFrame("do", "kernel", _t(event))


# --- the session --------------------------------------------------------------

@dataclass(frozen=True)
class LogEvent:
    seq: int
    src: str
    dst: str
    term: Term

    @property
    def line(self) -> str:
        return f"{self.seq} {self.src} {self.dst} {term_text(self.term)}"


class SimulatorSession:
    """One interactive stepping run over a loaded environment.

    The session owns the component cores and delivers frames between
    them in FIFO order; after every user command it settles: kernel
    compute ticks, periodic saves, and seeded random picks run until the
    machine is quiescent again.  Handler errors are reported to the
    display and leave the failing core untouched.
    """

    def __init__(
        self,
        spec: Environment,
        root: str,
        *,
        seed: int = 0,
        break_mode: str = "any",
        save_every: int | None = None,
        auto_budget: int = 10_000,
        on_step=None,
    ):
        candidates = tuple(sorted(n for (n, a) in spec.processes if a == 0))
        if (root, 0) not in spec.processes:
            raise UnknownProcess(root)
        engine = Engine(spec)
        self.kernel = KernelCore(
            current=ProcState(engine.canon(Call(root, ())), spec),
            spec=spec,
            start_candidates=candidates,
            engine=engine,
        )
        self.chooser = ChooserCore(rng_seed=seed, break_mode=break_mode)
        self.display = DisplayLog()
        self.log: list = []
        self.root = root
        self.seed = seed
        self.save_every = save_every
        self.auto_budget = auto_budget
        self.on_step = on_step
        self.closed = False
        self.steps = 0
        self._queue: list = []
        self._unsaved_steps = 0
        self.kernel.wait = False         # arm the first compute tick
        self._settle()

    # -- plumbing --------------------------------------------------------------

    def _log(self, src: str, dst: str, term: Term) -> LogEvent:
        ev = LogEvent(len(self.log), src, dst, term)
        self.log.append(ev)
        return ev

    def _emit(self, src: str, frames) -> None:
        for f in frames:
            self._queue.append((src, f))

    def _deliver(self, src: str, frame: BusFrame) -> None:
        dst = frame.tool
        ev = self._log(src, dst, frame.term)
        try:
            if dst == "kernel":
                _, out = kernelHandle(self.kernel, frame)
                if isinstance(frame.term, App) and frame.term.name == "action":
                    self.steps += 1
                    self._unsaved_steps += 1
                    if self.on_step is not None:
                        self.on_step(self.kernel.current)
                self._emit("kernel", out)
            elif dst == "actionchooser":
                _, out = chooserHandle(self.chooser, frame)
                self._emit("actionchooser", out)
            elif dst == "breakctrl":
                _, out = breakHandle(self.chooser, frame)
                self._emit("breakctrl", out)
            elif dst == "tracectrl":
                _, out = traceHandle(self.chooser, frame)
                self._emit("tracectrl", out)
            elif dst == "display":
                self.display.append(src, frame.term, ev.seq)
            elif dst == "startprocess":
                self._emit("startprocess", (BusFrame("do", "kernel", frame.term),))
            elif dst == "function":
                head = frame.term.name if isinstance(frame.term, App) else ""
                self._emit("function", (functionPanel(head),))
            elif dst == "user":
                pass                      # surfaced via chooser state/log
            elif dst == "toolbus":
                self.closed = True
            else:
                raise ProtocolViolation("session", f"no component {dst}")
        except PsfError as err:
            self._report(dst, err)

    def _report(self, source: str, err: PsfError) -> None:
        term = _t("error", App(type(err).__name__), App(str(err)))
        ev = self._log(source, "display", term)
        self.display.append(source, term, ev.seq)

    def _flush(self) -> None:
        while self._queue:
            src, frame = self._queue.pop(0)
            self._deliver(src, frame)

    def _settle(self) -> None:
        self._flush()
        budget = self.auto_budget
        while not self.closed:
            if not self.kernel.wait:
                self._deliver("toolbus", BusFrame("eval", "kernel", _t("compute-choose-list")))
                self._flush()
                continue
            if (
                self.save_every
                and self._unsaved_steps >= self.save_every
                and isinstance(self.kernel.current, ProcState)
            ):
                self._unsaved_steps = 0
                self._deliver("toolbus", BusFrame("do", "kernel", _t("save")))
                self._flush()
                continue
            if (
                self.chooser.random
                and self.chooser.choose
                and self.chooser.pending_list
                and not self.chooser.halted
                and self.chooser.phase == "idle"
                and budget > 0
            ):
                budget -= 1
                index = self.chooser.rng.randrange(len(self.chooser.pending_list))
                self._deliver("rng", BusFrame("event", "actionchooser", _t("action", _num(index))))
                self._flush()
                continue
            break

    def _feed_user(self, dst: str, term: Term) -> None:
        if self.closed:
            raise ProtocolViolation("session", "session already shut down")
        self._deliver("user", BusFrame("event", dst, term))
        self._settle()

    # -- user commands ---------------------------------------------------------

    def pick(self, index: int) -> None:
        self._feed_user("actionchooser", _t("action", _num(index)))

    def random(self, on: bool) -> None:
        self._feed_user("actionchooser", _t("random-on" if on else "random-off"))

    def break_add(self, pattern: str) -> None:
        self._feed_user("actionchooser", _t("break-add", parse_term_text(pattern, wildcards=True)))

    def break_remove(self, pattern: str) -> None:
        self._feed_user("actionchooser", _t("break-remove", parse_term_text(pattern, wildcards=True)))

    def trace_add(self, pattern: str) -> None:
        self._feed_user("actionchooser", _t("trace-add", parse_term_text(pattern, wildcards=True)))

    def trace_remove(self, pattern: str) -> None:
        self._feed_user("actionchooser", _t("trace-remove", parse_term_text(pattern, wildcards=True)))

    def save(self) -> None:
        self._feed_user("actionchooser", _t("save"))

    def goto(self, snapshot_id: int) -> None:
        if snapshot_id not in self.kernel.history.snapshots:
            if self.closed:
                raise ProtocolViolation("session", "session already shut down")
            self._log("user", "actionchooser", _t("goto", _num(snapshot_id)))
            self._report("kernel", UnknownSnapshot(snapshot_id))
            return
        self._feed_user("actionchooser", _t("goto", _num(snapshot_id)))

    def goto_mark(self, name: str) -> None:
        try:
            sid = self.kernel.history.resolveMark(name)
        except UnknownMark as err:
            if self.closed:
                raise ProtocolViolation("session", "session already shut down")
            self._log("user", "actionchooser", _t("goto-mark", App(name)))
            self._report("kernel", err)
            return
        self.goto(sid)

    def undo(self) -> None:
        """Jump to the most recent save (rewinds past a random run)."""
        try:
            sid = self.kernel.history.latest()
        except UnknownSnapshot as err:
            if self.closed:
                raise ProtocolViolation("session", "session already shut down")
            self._log("user", "actionchooser", _t("undo"))
            self._report("kernel", err)
            return
        self.goto(sid)

    def mark(self, name: str) -> None:
        self._feed_user("kernel", _t("mark", App(name)))

    def status(self) -> None:
        self._feed_user("function", _t("process-status"))

    def quit(self) -> None:
        self._feed_user("function", _t("quit"))

    def start(self, name: str) -> None:
        self._feed_user("startprocess", _t("start-process", App(name)))

    # -- introspection ----------------------------------------------------------

    @property
    def actions(self) -> tuple:
        return tuple(term_text(t) for t in self.chooser.pending_list)

    @property
    def state(self) -> str:
        if self.closed:
            return "closed"
        if isinstance(self.kernel.current, Terminated):
            return "terminated"
        if self.kernel.current is DEADLOCK:
            return "deadlock"
        return "running"

    def header(self) -> list:
        lines = [
            "# stepper-session v1",
            f"# root {self.root}",
            f"# seed {self.seed}",
            f"# break-mode {self.chooser.break_mode}",
            f"# auto-budget {self.auto_budget}",
        ]
        if self.save_every:
            lines.append(f"# save-every {self.save_every}")
        return lines

    def log_text(self) -> str:
        return "\n".join(self.header() + [ev.line for ev in self.log]) + "\n"


# --- replay -------------------------------------------------------------------

def _parse_header(text: str) -> dict:
    opts: dict = {}
    for line in text.splitlines():
        if not line.startswith("# "):
            continue
        body = line[2:]
        if " " not in body:
            continue
        key, value = body.split(" ", 1)
        opts[key] = value
    return opts


def replaySession(spec: Environment, text: str) -> SimulatorSession:
    """Re-run a session log against `spec`; raises ReplayDivergence if the
    regenerated log differs from the recorded one anywhere."""
    opts = _parse_header(text)
    session = SimulatorSession(
        spec,
        opts.get("root", ""),
        seed=int(opts.get("seed", "0")),
        break_mode=opts.get("break-mode", "any"),
        save_every=int(opts["save-every"]) if "save-every" in opts else None,
        auto_budget=int(opts.get("auto-budget", "10000")),
    )
    for line in text.splitlines():
        if line.startswith("#") or not line.strip():
            continue
        parts = line.split(" ", 3)
        if len(parts) != 4 or parts[1] != "user":
            continue
        _, _, dst, rendered = parts
        term = parse_term_text(rendered, wildcards=True)
        _replay_command(session, dst, term)
    recorded = text.splitlines()
    produced = session.log_text().splitlines()
    for i, (want, got) in enumerate(zip(recorded, produced)):
        if want != got:
            raise ReplayDivergence(i + 1, want, got)
    if len(recorded) != len(produced):
        longer = recorded if len(recorded) > len(produced) else produced
        raise ReplayDivergence(
            min(len(recorded), len(produced)) + 1,
            recorded[len(produced)] if len(recorded) > len(produced) else "<end>",
            produced[len(recorded)] if len(produced) > len(recorded) else "<end>",
        )
    return session


def _replay_command(session: SimulatorSession, dst: str, term: Term) -> None:
    head = term.name if isinstance(term, App) else ""
    if dst == "actionchooser":
        if head == "action":
            session.pick(int(term.args[0].name))
        elif head == "random-on":
            session.random(True)
        elif head == "random-off":
            session.random(False)
        elif head == "save":
            session.save()
        elif head == "goto":
            session.goto(int(term.args[0].name))
        elif head == "goto-mark":
            session.goto_mark(term.args[0].name)
        elif head == "undo":
            session.undo()
        elif head == "break-add":
            session.break_add(term_text(term.args[0]))
        elif head == "break-remove":
            session.break_remove(term_text(term.args[0]))
        elif head == "trace-add":
            session.trace_add(term_text(term.args[0]))
        elif head == "trace-remove":
            session.trace_remove(term_text(term.args[0]))
        else:
            raise ReplayDivergence(0, f"user actionchooser {term_text(term)}", "<unknown command>")
    elif dst == "kernel" and head == "mark":
        session.mark(term.args[0].name)
    elif dst == "function" and head == "quit":
        session.quit()
    elif dst == "function" and head == "process-status":
        session.status()
    elif dst == "startprocess" and head == "start-process":
        session.start(term.args[0].name)
    else:
        raise ReplayDivergence(0, f"user {dst} {term_text(term)}", "<unknown command>")


# --- the assembled model -------------------------------------------------------

def assembleSimulator(
    spec: Environment | None = None,
    *,
    external_kernel: bool = False,
    kernel_transport=None,
) -> BusScript:
    """Wire the bundled component model into a runnable bus script.

    The returned script merges the seven components under the bus with
    in-process endpoints, so a seeded `runBus` walks the whole machine
    as internal steps.  With ``external_kernel`` the kernel slot drops
    to the bus-side process alone and its endpoint rides a transport, so
    an actual kernel tool can answer the wire protocol.  When `spec` is
    given it is checked to be well-formed first — it is the environment a
    session over this machine would step.
    """
    if spec is not None:
        diags = checkWellFormed(spec)
        if diags:
            raise ProtocolViolation("simulator", f"spec has {len(diags)} diagnostic(s)")
    env, _ = load_group("stepper-system")
    top = ["Kernel", "StartProcess", "ActionChooser", "Function", "TraceCtrl", "BreakCtrl", "Display"]
    endpoints = [ToolEndpoint.in_process(t) for t in TOOL_IDS]
    if external_kernel:
        top[0] = "PKernel"
        transport = kernel_transport
        if transport is None:
            from .bus import QueueTransport

            transport = QueueTransport()
        endpoints[0] = ToolEndpoint("KERNEL", transport=transport)
    return BusScript(env=env, top=tuple(top), endpoints=tuple(endpoints))
