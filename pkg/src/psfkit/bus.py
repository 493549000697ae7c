"""Coordination-bus runtime.

A bus script names the processes to run in parallel and binds every tool
id they mention to an endpoint.  A run composes those processes inside
the bus library's shutdown harness and walks the result one transition
at a time: a seeded scheduler (or a caller-supplied hook) picks among
the enabled steps, outbound tool actions become frames on the endpoint's
transport, and inbound tool actions stay blocked until the matching
frame sits at the head of that endpoint's queue.

Frames travel as newline-delimited UTF-8 lines:

    VERB tool-id term-text

with verbs EVAL, VALUE, DO, EVENT, ACKEVENT and TERMINATE.  The bus
sends eval/do/ack-event and, when the run ends, exactly one terminate
per attached endpoint; tools answer a pending eval with value and may
volunteer an event at any time.  Frames between the bus and one endpoint
form a single ordered queue in each direction; nothing is reordered.
"""

from __future__ import annotations

import random
import shlex
import socket
import subprocess
import threading
import time
from collections import deque
from dataclasses import dataclass
from queue import Empty, Queue

from .corpus import spec_text
from .elaborate import elaborate
from .errors import (
    IndexOutOfRange,
    MalformedFrame,
    NameClash,
    ParseError,
    ProtocolViolation,
    SchedulerStalled,
    ToolCrashed,
    UnknownProcess,
)
from .process import (
    Alt,
    Call,
    Disrupt,
    Encaps,
    Environment,
    Guard,
    Hide,
    Merge,
    Prio,
    Proc,
    Rename,
    Seq,
    Star,
    Terminated,
    TERMINATED,
    Atom,
    proc_text,
)
from .semantics import Engine
from .syntax import parse_spec, parse_term_text
from .terms import App, RewriteSystem, Term, Var, term_text

__all__ = [
    "BusFrame",
    "BusEvent",
    "BusRun",
    "BusScript",
    "ToolEndpoint",
    "CommandTransport",
    "TcpTransport",
    "QueueTransport",
    "encodeFrame",
    "decodeFrame",
    "loadBusLibrary",
    "compose_script",
    "runBus",
    "scan_eval_value",
]


# --- wire codec -------------------------------------------------------------

#: wire keyword -> frame verb
_WIRE_VERBS = {
    "EVAL": "eval",
    "VALUE": "value",
    "DO": "do",
    "EVENT": "event",
    "ACKEVENT": "ack-event",
    "TERMINATE": "terminate",
}
_VERB_WIRE = {v: k for k, v in _WIRE_VERBS.items()}

#: verbs by who utters them
TO_TOOL = frozenset(("eval", "do", "ack-event", "terminate"))
FROM_TOOL = frozenset(("value", "event"))


@dataclass(frozen=True)
class BusFrame:
    """One message between the bus and a tool: a verb, the tool id it
    concerns, and a ground data term as payload."""

    verb: str
    tool: str
    term: Term

    def __post_init__(self):
        if self.verb not in _VERB_WIRE:
            raise ValueError(f"unknown frame verb {self.verb!r}")

    @property
    def direction(self) -> str:
        return "to-tool" if self.verb in TO_TOOL else "from-tool"

    @property
    def line(self) -> str:
        """The frame's wire text, without the trailing newline."""
        return f"{_VERB_WIRE[self.verb]} {self.tool} {term_text(self.term)}"

    def __str__(self):
        return self.line


def encodeFrame(frame: BusFrame) -> bytes:
    """Wire bytes for a frame: one UTF-8 line ending in a newline."""
    return (frame.line + "\n").encode("utf-8")


def _bytelen(text: str) -> int:
    return len(text.encode("utf-8"))


def decodeFrame(data: bytes | str) -> BusFrame:
    """Parse one wire line (the trailing newline is optional) back into a
    frame; raises MalformedFrame with the byte offset of the problem."""
    raw = data if isinstance(data, bytes) else data.encode("utf-8")
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise MalformedFrame(raw.decode("utf-8", "replace"), "not valid UTF-8", e.start) from None
    if text.endswith("\n"):
        text = text[:-1]
    if "\n" in text or "\r" in text:
        bad = min(i for i, c in enumerate(text) if c in "\n\r")
        raise MalformedFrame(text, "embedded line break", _bytelen(text[:bad]))
    keyword, sep, rest = text.partition(" ")
    if keyword not in _WIRE_VERBS:
        raise MalformedFrame(text, f"unknown verb {keyword!r}", 0)
    if not sep or not rest:
        raise MalformedFrame(text, "expected ' ' and a tool id after the verb", _bytelen(text))
    tool, sep, term_part = rest.partition(" ")
    if not sep or not term_part:
        raise MalformedFrame(text, "expected ' ' and a term after the tool id", _bytelen(text))
    prefix = _bytelen(keyword) + 1
    if not tool.replace("-", "").replace("'", "").isalnum():
        raise MalformedFrame(text, f"bad tool id {tool!r}", prefix)
    prefix += _bytelen(tool) + 1
    try:
        term = parse_term_text(term_part)
    except ParseError as e:
        off = prefix + _bytelen(term_part[: max(e.col - 1, 0)])
        raise MalformedFrame(text, e.message, off) from None
    return BusFrame(_WIRE_VERBS[keyword], tool, term)


# --- transports -------------------------------------------------------------

_EOF = object()


class _LineReader(threading.Thread):
    """Drains a binary stream line by line into a queue; a sentinel marks
    end of stream so the owner can tell silence from closure."""

    def __init__(self, stream, inbox: Queue):
        super().__init__(daemon=True)
        self._stream = stream
        self._inbox = inbox

    def run(self):
        try:
            for line in iter(self._stream.readline, b""):
                self._inbox.put(line)
        except (OSError, ValueError):
            pass
        finally:
            self._inbox.put(_EOF)


class CommandTransport:
    """A tool reached over the stdin/stdout of a spawned command."""

    def __init__(self, command):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc = None
        self._inbox: Queue = Queue()
        self._eof = False

    def start(self):
        self._proc = subprocess.Popen(
            self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE
        )
        _LineReader(self._proc.stdout, self._inbox).start()

    def send(self, data: bytes):
        self._proc.stdin.write(data)
        self._proc.stdin.flush()

    def poll(self, timeout: float):
        """Next inbound line, or None if nothing arrived in time."""
        if self._eof:
            return None
        try:
            item = self._inbox.get(timeout=timeout) if timeout > 0 else self._inbox.get_nowait()
        except Empty:
            return None
        if item is _EOF:
            self._eof = True
            return None
        return item

    def alive(self) -> bool:
        return not self._eof

    def close(self):
        if self._proc is None:
            return
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


class TcpTransport:
    """A tool reached over a TCP connection; `address` is "host:port"."""

    def __init__(self, address):
        if isinstance(address, str):
            host, _, port = address.rpartition(":")
            self.address = (host or "127.0.0.1", int(port))
        else:
            self.address = tuple(address)
        self._sock = None
        self._inbox: Queue = Queue()
        self._eof = False

    def start(self):
        self._sock = socket.create_connection(self.address)
        _LineReader(self._sock.makefile("rb"), self._inbox).start()

    def send(self, data: bytes):
        self._sock.sendall(data)

    def poll(self, timeout: float):
        if self._eof:
            return None
        try:
            item = self._inbox.get(timeout=timeout) if timeout > 0 else self._inbox.get_nowait()
        except Empty:
            return None
        if item is _EOF:
            self._eof = True
            return None
        return item

    def alive(self) -> bool:
        return not self._eof

    def close(self):
        if self._sock is None:
            return
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class QueueTransport:
    """An in-memory transport: tests (and the serve layer) feed the tool's
    lines in ahead of time — or reactively, via `respond(frame) -> lines`
    called on every frame the bus sends — and read what the bus sent from
    `sent`."""

    def __init__(self, respond=None):
        self.sent: list[bytes] = []
        self.respond = respond
        self._inbox: deque = deque()
        self._open = True

    def feed(self, *lines):
        """Queue lines the tool sends to the bus (str, bytes, or BusFrame)."""
        for line in lines:
            if isinstance(line, BusFrame):
                line = encodeFrame(line)
            elif isinstance(line, str):
                line = line.encode("utf-8") if line.endswith("\n") else (line + "\n").encode("utf-8")
            self._inbox.append(line)

    def close_tool(self):
        """Simulate the tool going away."""
        self._open = False

    def start(self):
        pass

    def send(self, data: bytes):
        if not self._open:
            raise BrokenPipeError("tool is gone")
        self.sent.append(data)
        if self.respond is not None:
            self.feed(*(self.respond(decodeFrame(data)) or ()))

    def poll(self, timeout: float):
        if self._inbox:
            return self._inbox.popleft()
        if timeout > 0:
            time.sleep(min(timeout, 0.005))
        return None

    def alive(self) -> bool:
        return self._open or bool(self._inbox)

    def close(self):
        self._open = False


# --- endpoints and scripts ---------------------------------------------------

@dataclass(eq=False)
class ToolEndpoint:
    """One tool attachment: the id bus processes address and how frames
    reach the tool carrying it.  A transport of None means the tool runs
    in-process as part of the composed behaviour, so no frames cross a
    wire for it."""

    tool: str
    transport: object | None = None
    state: str = "attached"

    @classmethod
    def in_process(cls, tool: str) -> "ToolEndpoint":
        return cls(tool, None)

    @classmethod
    def command(cls, tool: str, command) -> "ToolEndpoint":
        return cls(tool, CommandTransport(command))

    @classmethod
    def socket(cls, tool: str, address) -> "ToolEndpoint":
        return cls(tool, TcpTransport(address))

    @property
    def external(self) -> bool:
        return self.transport is not None


#: inbound atoms wait for a frame with this verb at the queue head
_INBOUND = {"tb-rec-event": "event", "tb-rec-value": "value"}
#: outbound atoms emit a frame with this verb when taken
_OUTBOUND = {"tb-snd-eval": "eval", "tb-snd-do": "do", "tb-snd-ack-event": "ack-event"}
#: tool ids used by these atoms must be bound to an endpoint up front
_NEEDS_BINDING = ("tb-rec-event", "tb-snd-do", "tb-snd-eval")


def _walk(p: Proc):
    stack = [p]
    while stack:
        n = stack.pop()
        yield n
        if isinstance(n, Guard):
            stack.append(n.body)
        elif isinstance(n, (Seq, Alt, Merge, Disrupt, Star)):
            stack.append(n.left)
            stack.append(n.right)
        elif isinstance(n, (Encaps, Hide, Prio, Rename)):
            stack.append(n.body)


def _ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    return all(_ground(a) for a in t.args)


@dataclass(frozen=True, eq=False)
class BusScript:
    """What a run executes: named processes composed in parallel, plus one
    endpoint per tool id those processes talk to."""

    env: Environment
    top: tuple
    endpoints: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "top", tuple(self.top))
        object.__setattr__(self, "endpoints", tuple(self.endpoints))
        seen = set()
        for ep in self.endpoints:
            if ep.tool in seen:
                raise ProtocolViolation(ep.tool, "more than one endpoint attached to this id")
            seen.add(ep.tool)
        for name in self.top:
            if (name, 0) not in self.env.processes:
                raise UnknownProcess(name)
        for tool in sorted(self.required_tools() - seen):
            raise ProtocolViolation(tool, "tool id used by the script but bound to no endpoint")

    def endpoint(self, tool: str) -> ToolEndpoint | None:
        for ep in self.endpoints:
            if ep.tool == tool:
                return ep
        return None

    def required_tools(self) -> frozenset:
        """Tool ids the top processes (and everything they call) address
        with eval/do/event actions."""
        ids = set()
        todo = [(name, 0) for name in self.top]
        visited = set()
        while todo:
            key = todo.pop()
            if key in visited:
                continue
            visited.add(key)
            pdef = self.env.processes.get(key)
            if pdef is None:
                continue
            for node in _walk(pdef.body):
                if isinstance(node, Call):
                    todo.append((node.name, len(node.args)))
                elif isinstance(node, Atom) and node.name in _NEEDS_BINDING and node.args:
                    head = node.args[0]
                    if _ground(head):
                        ids.add(term_text(self.env.normalize_term(head)))
        return frozenset(ids)


# --- the bus library ---------------------------------------------------------

_LIBRARY_FILE = "toolbus_library.psf"

# one synthetic module pulls in every top-level library module; the
# parameterised ones stay unbound, their formals becoming declarations
_LIBRARY_WRAPPER = """\
process module BusLibrary
begin
  imports
    ToolFunctions,
    ToolBusFunctions,
    NewTool,
    NewToolAdapter,
    NewToolBus
end BusLibrary
"""


def loadBusLibrary(env: Environment | None = None) -> Environment:
    """Extend an elaborated environment with the coordination-bus library:
    the term sorts and conversions, the tool/adapter/bus primitives and
    their communications, and the shutdown harness.  Raises NameClash if
    the environment already carries any library name."""
    modules = parse_spec(spec_text(_LIBRARY_FILE), _LIBRARY_FILE)
    modules.extend(parse_spec(_LIBRARY_WRAPPER, "<bus-library>"))
    lib = elaborate(modules, "BusLibrary")
    if env is None:
        return lib
    base = elaborate([], "Booleans")

    def fresh(lib_map: dict, base_map: dict) -> dict:
        return {k: v for k, v in lib_map.items() if k not in base_map}

    new_processes = fresh(lib.processes, base.processes)
    new_funcs = fresh(lib.funcs, base.funcs)
    new_atoms = fresh(lib.atoms, base.atoms)
    new_sets = fresh(lib.atom_sets, base.atom_sets)
    new_maps = fresh(lib.rename_maps, base.rename_maps)
    new_sorts = lib.sorts - base.sorts
    for kind, fresh_keys, existing in (
        ("process", new_processes, env.processes),
        ("atom", new_atoms, env.atoms),
        ("function", new_funcs, env.funcs),
        ("atom set", new_sets, env.atom_sets),
        ("rename map", new_maps, env.rename_maps),
    ):
        for key in sorted(fresh_keys):
            if key in existing:
                name = key[0] if isinstance(key, tuple) else key
                raise NameClash(name, (kind, kind))
    for s in sorted(new_sorts):
        if s in env.sorts:
            raise NameClash(s, ("sort", "sort"))

    base_rules = {(term_text(r.lhs), term_text(r.rhs)) for r in base.rewrite.rules}
    new_rules = [r for r in lib.rewrite.rules if (term_text(r.lhs), term_text(r.rhs)) not in base_rules]
    base_comms = len(base.comm_rules)
    merged = Environment(
        rewrite=RewriteSystem(tuple(env.rewrite.rules) + tuple(new_rules)),
        funcs={**env.funcs, **new_funcs},
        atoms={**env.atoms, **new_atoms},
        atom_sets={**env.atom_sets, **new_sets},
        comm_rules=list(env.comm_rules) + list(lib.comm_rules[base_comms:]),
        rename_maps={**env.rename_maps, **new_maps},
        processes={**env.processes, **new_processes},
        sorts=env.sorts | lib.sorts,
        process_decls=env.process_decls | lib.process_decls,
        diagnostics=list(env.diagnostics) + list(lib.diagnostics),
    )
    spans = dict(getattr(env, "definition_spans", {}))
    spans.update(getattr(lib, "definition_spans", {}))
    merged.definition_spans = spans
    return merged


# --- composition --------------------------------------------------------------

_CONTROL = "ToolBus-Control"
_SHUTDOWN = "Shutdown"


def compose_script(script: BusScript) -> Proc:
    """The closed process a run walks: the script's top processes merged,
    inside the library's control/disrupt shutdown harness.  An empty top
    list composes to immediate successful termination."""
    env = script.env
    for name in (_CONTROL, _SHUTDOWN):
        if (name, 0) not in env.processes:
            raise UnknownProcess(name)
    app = None
    for name in script.top:
        call = Call(name, ())
        app = call if app is None else Merge(app, call)
    if app is None:
        return TERMINATED
    return Encaps(
        "TB-H",
        Prio(
            "P",
            Merge(
                Call(_CONTROL, ()),
                Disrupt(Encaps("H", app), Call(_SHUTDOWN, ())),
            ),
        ),
    )


# --- runs ---------------------------------------------------------------------

@dataclass(frozen=True)
class BusEvent:
    """One line of a run log: a transition taken ("step"), a frame sent to
    a tool ("send"), or a frame received from one ("recv")."""

    seq: int
    kind: str
    text: str
    tool: str | None = None

    def __str__(self):
        who = f" [{self.tool}]" if self.tool else ""
        return f"{self.seq:4d} {self.kind:<4}{who} {self.text}"


@dataclass
class BusRun:
    """Everything one execution produced, in order.  `state` is
    "terminated" for a clean finish and "running" when the step budget
    ran out first."""

    log: tuple
    state: str
    state_text: str
    steps: int
    seed: int | None

    def trace(self) -> tuple:
        """The transition labels taken, in order."""
        return tuple(e.text for e in self.log if e.kind == "step")

    def frames(self, kind: str | None = None, tool: str | None = None) -> list:
        """The wire events of the log, optionally filtered by kind
        ("send"/"recv") and endpoint id."""
        return [
            e
            for e in self.log
            if e.kind in ("send", "recv")
            and (kind is None or e.kind == kind)
            and (tool is None or e.tool == tool)
        ]

    def __str__(self):
        return "\n".join(str(e) for e in self.log) if self.log else "<empty log>"


_TERMINATE_PAYLOAD = App("shutdown", ())


class _Runtime:
    """State of one bus execution: the composed process, the endpoint
    queues, and the log under construction."""

    def __init__(self, script: BusScript, seed, choose, max_steps, poll_timeout):
        self.script = script
        self.env = script.env
        self.choose = choose
        self.rng = random.Random(seed)
        self.seed = seed
        self.max_steps = max_steps
        self.poll_timeout = poll_timeout
        self.engine = Engine(self.env)
        self.log: list = []
        self.eps = {ep.tool: ep for ep in script.endpoints}
        self.external = {ep.tool: ep for ep in script.endpoints if ep.external}
        self.inbox = {tool: deque() for tool in self.external}
        self.pending_eval = {tool: None for tool in self.external}

    # -- logging and frames ------------------------------------------------

    def record(self, kind: str, text: str, tool: str | None = None):
        self.log.append(BusEvent(len(self.log), kind, text, tool))

    def say(self, frame: BusFrame):
        ep = self.external[frame.tool]
        try:
            ep.transport.send(encodeFrame(frame))
        except OSError as e:
            self.abort(ToolCrashed(frame.tool, str(e) or "write failed"))
        self.record("send", frame.line, frame.tool)

    def terminate_endpoints(self, skip: str | None = None):
        """Send each still-attached external endpoint its terminate frame
        (best effort) and detach everything."""
        for ep in self.script.endpoints:
            if ep.state != "attached":
                continue
            if ep.external and ep.tool != skip:
                frame = BusFrame("terminate", ep.tool, _TERMINATE_PAYLOAD)
                try:
                    ep.transport.send(encodeFrame(frame))
                    self.record("send", frame.line, ep.tool)
                except OSError:
                    pass
            ep.state = "detached"
            if ep.external:
                ep.transport.close()

    def abort(self, exc: Exception, cause: Exception | None = None):
        self.terminate_endpoints(skip=getattr(exc, "tool", None))
        exc.log = tuple(self.log)
        raise exc from cause

    # -- inbound frames ------------------------------------------------------

    def ingest(self, tool: str, raw: bytes):
        try:
            frame = decodeFrame(raw)
        except MalformedFrame as mf:
            self.abort(ToolCrashed(tool, f"sent a malformed frame: {mf.reason}"), cause=mf)
        if frame.tool != tool:
            self.abort(ProtocolViolation(tool, f"sent a frame addressed to {frame.tool}"))
        if frame.verb not in FROM_TOOL:
            self.abort(ProtocolViolation(tool, f"tools may not send {frame.verb} frames"))
        if frame.verb == "value":
            if self.pending_eval[tool] is None:
                self.abort(ProtocolViolation(tool, "sent value with no eval outstanding"))
            self.pending_eval[tool] = None
        frame = BusFrame(frame.verb, tool, self.env.normalize_term(frame.term))
        self.inbox[tool].append(frame)
        self.record("recv", frame.line, tool)

    def pump(self, slice_timeout: float = 0.0) -> bool:
        """Drain whatever frames the transports have ready; with a positive
        slice, give each attached endpoint that long to produce one."""
        got = False
        for tool, ep in self.external.items():
            if ep.state != "attached":
                continue
            raw = ep.transport.poll(slice_timeout)
            while raw is not None:
                self.ingest(tool, raw)
                got = True
                raw = ep.transport.poll(0)
        return got

    # -- gating ---------------------------------------------------------------

    def gate(self, label) -> tuple | None:
        """(tool, verb, payload) for a tool-directed label, None for an
        internal one.  In-process endpoints are internal by construction."""
        table = _INBOUND if label.name in _INBOUND else _OUTBOUND if label.name in _OUTBOUND else None
        if table is None or len(label.args) != 2:
            return None
        tool = term_text(label.args[0])
        ep = self.eps.get(tool)
        if ep is None:
            self.abort(ProtocolViolation(tool, f"{label.text}: tool id bound to no endpoint"))
        if not ep.external:
            return None
        return tool, table[label.name], label.args[1]

    def head_matches(self, tool: str, verb: str, payload) -> bool:
        q = self.inbox[tool]
        return bool(q) and q[0].verb == verb and q[0].term == payload

    # -- the loop ---------------------------------------------------------------

    def run(self) -> BusRun:
        state = self.engine.canon(compose_script(self.script))
        steps = 0
        while True:
            if isinstance(state, Terminated):
                self.terminate_endpoints()
                return BusRun(tuple(self.log), "terminated", proc_text(state), steps, self.seed)
            if steps >= self.max_steps:
                return BusRun(tuple(self.log), "running", proc_text(state), steps, self.seed)
            transitions = self.engine.enabled(state)
            if not transitions:
                self.abort(SchedulerStalled(proc_text(state)))
            ready, gated = [], []
            for t in transitions:
                need = self.gate(t.label)
                (ready if need is None or need[1] not in FROM_TOOL else gated).append((t, need))
            if gated:
                self.pump()
                still = []
                for t, need in gated:
                    if self.head_matches(*need):
                        ready.append((t, need))
                    else:
                        still.append((t, need))
                gated = still
            if not ready:
                waiting = {need[0] for _, need in gated}
                if not waiting:
                    self.abort(SchedulerStalled(proc_text(state)))
                self.wait_for_frames(state, waiting)
                continue
            take, need = self.pick(state, ready)
            if need is not None:
                tool, verb, payload = need
                if verb in FROM_TOOL:
                    self.inbox[tool].popleft()
                self.record("step", take.label.text, tool)
                if verb == "eval":
                    if self.pending_eval[tool] is not None:
                        self.abort(ProtocolViolation(
                            "bus", f"eval sent to {tool} while one is outstanding"))
                    self.pending_eval[tool] = payload
                if verb in TO_TOOL:
                    self.say(BusFrame(verb, tool, payload))
            else:
                self.record("step", take.label.text)
            state = take.target
            steps += 1

    def pick(self, state, ready):
        options = tuple(t for t, _ in ready)
        if self.choose is not None:
            index = self.choose(state, options)
            if not isinstance(index, int) or not 0 <= index < len(options):
                raise IndexOutOfRange(index, len(options))
        else:
            index = self.rng.randrange(len(options))
        return ready[index]

    def wait_for_frames(self, state, waiting):
        """Block until some endpoint we are gated on produces a frame; crash
        out if one of them died, stall out if the wait times out."""
        deadline = time.monotonic() + self.poll_timeout
        while True:
            for tool in sorted(waiting):
                ep = self.external[tool]
                if ep.state == "attached" and not self.inbox[tool] and not ep.transport.alive():
                    self.abort(ToolCrashed(tool, "stream closed while the bus was waiting on it"))
            if self.pump(slice_timeout=0.02):
                return
            if time.monotonic() >= deadline:
                self.abort(SchedulerStalled(proc_text(state), waiting))


def runBus(
    script: BusScript,
    *,
    seed: int | None = 0,
    choose=None,
    max_steps: int = 10_000,
    poll_timeout: float = 10.0,
) -> BusRun:
    """Execute a bus script and return its ordered event log.

    The scheduler draws uniformly with the given seed unless `choose`
    (called as choose(state, transitions) -> index) takes over.  External
    endpoints are started before the first step and receive exactly one
    terminate frame when the run ends; a tool that closes its stream while
    the bus still needs it raises ToolCrashed, and a state with no feasible
    step raises SchedulerStalled with the offending state's text.  A run
    that exhausts `max_steps` is returned as-is with state "running"."""
    for ep in script.endpoints:
        if ep.external:
            ep.transport.start()
    return _Runtime(script, seed, choose, max_steps, poll_timeout).run()


# --- log scanners ---------------------------------------------------------------

def scan_eval_value(log) -> list:
    """Violations of the per-endpoint eval/value discipline in a run log:
    every eval answered by exactly one value before the next eval to the
    same endpoint, and no unanswered eval left at the end."""
    log = getattr(log, "log", log)
    pending: dict = {}
    out = []
    for e in log:
        if e.kind not in ("send", "recv"):
            continue
        keyword = e.text.split(" ", 1)[0]
        if keyword == "EVAL":
            if pending.get(e.tool):
                out.append(f"{e.seq}: eval to {e.tool} while one is outstanding")
            pending[e.tool] = True
        elif keyword == "VALUE":
            if not pending.get(e.tool):
                out.append(f"{e.seq}: value from {e.tool} with no eval outstanding")
            pending[e.tool] = False
    for tool, open_ in sorted(pending.items()):
        if open_:
            out.append(f"end: eval to {tool} never answered")
    return out
