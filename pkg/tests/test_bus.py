"""The coordination-bus runtime: wire codec, library loading, seeded and
scripted runs over in-process and external endpoints, and the protocol
invariants every run log has to satisfy."""

import socket
import sys
import threading

import pytest
from hypothesis import given, settings, strategies as st

from psfkit.bus import (
    BusFrame,
    BusScript,
    QueueTransport,
    ToolEndpoint,
    compose_script,
    decodeFrame,
    encodeFrame,
    loadBusLibrary,
    runBus,
    scan_eval_value,
)
from psfkit.corpus import load_group
from psfkit.elaborate import elaborate
from psfkit.errors import (
    IndexOutOfRange,
    MalformedFrame,
    NameClash,
    ProtocolViolation,
    SchedulerStalled,
    ToolCrashed,
    UnknownProcess,
)
from psfkit.process import proc_text
from psfkit.semantics import build_lts
from psfkit.syntax import parse_spec, parse_term_text
from psfkit.terms import App, atom_label


# --- shared fixtures ---------------------------------------------------------

@pytest.fixture(scope="module")
def toy_env():
    env, _ = load_group("toy-bus")
    return env


def in_process_script(env):
    return BusScript(
        env,
        ("XPTool1", "XPTool2"),
        (ToolEndpoint.in_process("T1"), ToolEndpoint.in_process("T2")),
    )


def external_script(env, t1=None, t2=None):
    """PT1/PT2 with both tools reached over in-memory transports: tool 1
    raises its events up front, tool 2 answers every eval with an ack."""
    t1 = t1 if t1 is not None else QueueTransport()
    t2 = t2 if t2 is not None else QueueTransport(
        respond=lambda f: ["VALUE T2 tbterm(ack)"] if f.verb == "eval" else None
    )
    script = BusScript(env, ("PT1", "PT2"), (ToolEndpoint("T1", t1), ToolEndpoint("T2", t2)))
    return script, t1, t2


def is_trace(lts, labels):
    """Is the label sequence a path of the transition system from its
    initial state?"""
    here = {lts.initial}
    for text in labels:
        here = {dst for s in here for (lab, dst) in lts.transitions[s] if lab.text == text}
        if not here:
            return False
    return True


# --- wire codec ---------------------------------------------------------------

_LINES = [
    (b"EVAL KERNEL tbterm(message)\n", "eval", "KERNEL"),
    (b"VALUE T2 tbterm(ack)\n", "value", "T2"),
    (b"DO T1 quit\n", "do", "T1"),
    (b"EVENT T1 tbterm(quit)\n", "event", "T1"),
    (b"ACKEVENT T1 tbterm(message)\n", "ack-event", "T1"),
    (b"TERMINATE T2 shutdown\n", "terminate", "T2"),
]

_names = st.sampled_from(("message", "ack", "quit", "t1", "zig", "3"))
ground_terms = st.recursive(
    st.builds(App, _names, st.just(())),
    lambda sub: st.one_of(
        st.builds(App, st.sampled_from(("tbterm", "wrap")), st.tuples(sub)),
        st.builds(App, st.sampled_from(("pair", ">>")), st.tuples(sub, sub)),
    ),
    max_leaves=6,
)


class TestFrameCodec:
    def test_known_lines_round_trip(self):
        for line, verb, tool in _LINES:
            frame = decodeFrame(line)
            assert frame.verb == verb
            assert frame.tool == tool
            assert encodeFrame(frame) == line

    def test_newline_is_optional_on_decode(self):
        assert decodeFrame("EVAL T1 x") == decodeFrame("EVAL T1 x\n")

    def test_directions(self):
        term = App("x", ())
        for verb in ("eval", "do", "ack-event", "terminate"):
            assert BusFrame(verb, "T1", term).direction == "to-tool"
        for verb in ("value", "event"):
            assert BusFrame(verb, "T1", term).direction == "from-tool"

    def test_unknown_verb_rejected_by_constructor(self):
        with pytest.raises(ValueError):
            BusFrame("shout", "T1", App("x", ()))

    @settings(max_examples=200, deadline=None)
    @given(
        verb=st.sampled_from(("eval", "value", "do", "event", "ack-event", "terminate")),
        tool=st.sampled_from(("T1", "T2", "KERNEL", "tool-9")),
        term=ground_terms,
    )
    def test_round_trip_property(self, verb, tool, term):
        frame = BusFrame(verb, tool, term)
        wire = encodeFrame(frame)
        assert wire.endswith(b"\n") and wire.count(b"\n") == 1
        assert decodeFrame(wire) == frame
        assert encodeFrame(decodeFrame(wire)) == wire

    def test_unknown_verb_offset(self):
        with pytest.raises(MalformedFrame) as e:
            decodeFrame(b"SHOUT T1 x\n")
        assert e.value.offset == 0

    def test_missing_tool_offset(self):
        with pytest.raises(MalformedFrame) as e:
            decodeFrame(b"EVAL\n")
        assert e.value.offset == 4

    def test_missing_term_offset(self):
        with pytest.raises(MalformedFrame) as e:
            decodeFrame(b"EVAL T1\n")
        assert e.value.offset == 7

    def test_bad_tool_id_offset(self):
        with pytest.raises(MalformedFrame) as e:
            decodeFrame(b"EVAL  T1 x\n")  # empty tool id between the two spaces
        assert e.value.offset == 5

    def test_term_error_offset_lands_in_the_term(self):
        line = b"EVAL T1 pair(a,,b)\n"
        with pytest.raises(MalformedFrame) as e:
            decodeFrame(line)
        assert 8 <= e.value.offset < len(line)

    def test_not_utf8_offset(self):
        with pytest.raises(MalformedFrame) as e:
            decodeFrame(b"EVAL T1 \xff\n")
        assert e.value.offset == 8

    def test_embedded_newline(self):
        with pytest.raises(MalformedFrame) as e:
            decodeFrame(b"EVAL T1 x\ny\n")
        assert e.value.offset == 9


# --- the bus library ------------------------------------------------------------

class TestBusLibrary:
    def test_fresh_load_has_the_harness(self):
        env = loadBusLibrary()
        for name in ("ToolBus", "ToolBus-Control", "Shutdown", "TBProcess", "ToolAdapter"):
            assert (name, 0) in env.processes, name
        assert proc_text(env.processes[("ToolBus", 0)].body) == (
            "encaps(TB-H, prio(P > atoms, "
            "ToolBus-Control || disrupt(encaps(H, Application), Shutdown)))"
        )
        assert proc_text(env.processes[("ToolBus-Control", 0)].body) == (
            "tbc-shutdown . tbc-app-shutdown"
        )
        assert proc_text(env.processes[("Shutdown", 0)].body) == "application-shutdown"

    def test_parameters_stay_declared_not_defined(self):
        env = loadBusLibrary()
        for formal in ("Application", "Tool", "Adapter"):
            assert (formal, 0) in env.process_decls
            assert (formal, 0) not in env.processes

    def test_priority_set_members(self):
        env = loadBusLibrary()
        assert env.label_in_set(atom_label("TB-shutdown"), "P")
        assert env.label_in_set(atom_label("TB-app-shutdown"), "P")
        assert not env.label_in_set(atom_label("tb-shutdown"), "P")
        for name in ("tb-shutdown", "snd-tb-shutdown", "tbc-shutdown",
                     "tbc-app-shutdown", "application-shutdown"):
            assert env.label_in_set(atom_label(name), "TB-H"), name

    def test_communications_present(self):
        env = loadBusLibrary()
        results = {rule.result.name for rule in env.comm_rules}
        assert {"tb-comm-msg", "TB-shutdown", "TB-app-shutdown",
                "tooltb-snd-value", "tooltb-rec-eval", "tooltb-rec-do",
                "tooltb-snd-event", "tooltb-rec-ack-event",
                "tooladapter-comm", "adaptertool-comm"} <= results

    def test_extends_a_user_environment(self):
        user = elaborate(
            parse_spec(
                """
                data module Mine
                begin
                  exports
                  begin
                    sorts Color
                    functions
                      red : -> Color
                      favourite : -> Color
                  end
                  equations
                    ['] favourite = red
                end Mine
                """,
                "<user>",
            ),
            "Mine",
        )
        merged = loadBusLibrary(user)
        # the user's names and rules survive
        assert ("favourite", 0) in merged.funcs
        assert merged.normalize_term(App("favourite", ())) == App("red", ())
        # and the library's arrive next to them
        assert ("ToolBus", 0) in merged.processes
        assert ("tbterm", 1) in merged.funcs
        assert merged.normalize_term(App("tterm", (App("tbterm", (App("red", ()),)),))) == App("red", ())

    def test_double_load_clashes(self):
        env = loadBusLibrary()
        with pytest.raises(NameClash):
            loadBusLibrary(env)

    def test_load_over_a_script_environment_clashes(self, toy_env):
        with pytest.raises(NameClash):
            loadBusLibrary(toy_env)

    def test_binding_and_renaming_through_imports(self, toy_env):
        # the tool wrapper, bound to a concrete process and renamed; the
        # rename follows the wrapper's synchronization set as well
        assert proc_text(toy_env.processes[("XPTool1", 0)].body) == "encaps(XPTool1, PTool1)"
        assert proc_text(toy_env.processes[("XPTool2", 0)].body) == "encaps(XPTool2, PTool2)"
        assert ("TBProcess", 0) not in toy_env.processes
        assert toy_env.label_in_set(
            atom_label("tb-rec-event", (App("T1", ()), App("tbterm", (App("quit", ()),)))),
            "XPTool1",
        )


# --- scripts ---------------------------------------------------------------------

class TestBusScript:
    def test_required_tools(self, toy_env):
        script = in_process_script(toy_env)
        assert script.required_tools() == {"T1", "T2"}
        only_pt1 = BusScript(toy_env, ("PT1",), (ToolEndpoint.in_process("T1"),))
        assert only_pt1.required_tools() == {"T1"}

    def test_missing_binding_rejected(self, toy_env):
        with pytest.raises(ProtocolViolation) as e:
            BusScript(toy_env, ("PT1", "PT2"), (ToolEndpoint.in_process("T1"),))
        assert "T2" in str(e.value)

    def test_duplicate_endpoint_rejected(self, toy_env):
        with pytest.raises(ProtocolViolation):
            BusScript(
                toy_env,
                ("PT1",),
                (ToolEndpoint.in_process("T1"), ToolEndpoint("T1", QueueTransport())),
            )

    def test_unknown_top_process_rejected(self, toy_env):
        with pytest.raises(UnknownProcess):
            BusScript(toy_env, ("NoSuchProcess",), ())

    def test_empty_top_terminates_immediately(self, toy_env):
        run = runBus(BusScript(toy_env, ()))
        assert run.state == "terminated"
        assert run.log == ()
        assert run.steps == 0


# --- seeded in-process runs --------------------------------------------------------

class TestToyRuns:
    def test_every_terminating_run_ends_with_the_shutdown_protocol(self, toy_env):
        script = in_process_script(toy_env)
        finished = 0
        for seed in range(20):
            run = runBus(script, seed=seed, max_steps=600)
            if run.state != "terminated":
                continue
            finished += 1
            trace = run.trace()
            assert trace[-2:] == ("TB-shutdown", "TB-app-shutdown")
            assert "tooltb-snd-event(T1, tbterm(quit))" in trace
        assert finished >= 15  # the quit branch wins quickly for most seeds

    def test_same_seed_same_log(self, toy_env):
        script = in_process_script(toy_env)
        first = runBus(script, seed=11, max_steps=300)
        second = runBus(script, seed=11, max_steps=300)
        assert first.log == second.log
        others = [runBus(script, seed=s, max_steps=300).log for s in range(6)]
        assert any(log != first.log for log in others)

    def test_runs_replay_on_the_composed_lts(self, toy_env):
        script = in_process_script(toy_env)
        lts = build_lts(compose_script(script), toy_env, max_states=20_000)
        for seed in range(15):
            run = runBus(script, seed=seed, max_steps=400)
            assert is_trace(lts, run.trace()), f"seed {seed} log is not a trace"

    def test_hook_scripts_the_choices(self, toy_env):
        script = in_process_script(toy_env)

        def prefer_quit(state, options):
            for i, t in enumerate(options):
                if "quit" in t.label.text:
                    return i
            return 0

        run = runBus(script, choose=prefer_quit, max_steps=50)
        assert run.state == "terminated"
        assert run.trace()[0] == "tooladapter-comm(quit)"
        assert len(run.trace()) == 4  # quit in, event up, then the two shutdown steps

    def test_hook_index_out_of_range(self, toy_env):
        script = in_process_script(toy_env)
        with pytest.raises(IndexOutOfRange):
            runBus(script, choose=lambda state, options: 99)

    def test_max_steps_returns_a_running_run(self, toy_env):
        script = in_process_script(toy_env)

        def never_quit(state, options):
            for i, t in enumerate(options):
                if "quit" not in t.label.text:
                    return i
            return 0

        run = runBus(script, choose=never_quit, max_steps=25)
        assert run.state == "running"
        assert run.steps == 25


class TestMessageOrdering:
    """The message from tool 1 always crosses the bus before the matching
    acknowledgement comes back."""

    @staticmethod
    def _snd(text):
        return text.startswith("tb-comm-msg(t1, t2,")

    @staticmethod
    def _ack(text):
        return text.startswith("tb-comm-msg(t2, t1,")

    def test_oracle_no_reachable_ack_overtakes_a_message(self, toy_env):
        # brute force over the composed state space, tracking how many
        # messages are outstanding: the count never goes negative (an ack
        # needs an earlier message) and never exceeds one (the protocol is
        # strictly alternating)
        script = in_process_script(toy_env)
        lts = build_lts(compose_script(script), toy_env, max_states=20_000)
        seen = {(lts.initial, 0)}
        todo = [(lts.initial, 0)]
        while todo:
            state, outstanding = todo.pop()
            for label, dst in lts.transitions[state]:
                after = outstanding + (1 if self._snd(label.text) else 0)
                after -= 1 if self._ack(label.text) else 0
                assert after >= 0, f"ack with no message outstanding at state {state}"
                assert after <= 1, f"two messages in flight at state {state}"
                if (dst, after) not in seen:
                    seen.add((dst, after))
                    todo.append((dst, after))

    def test_seeded_runs_respect_the_ordering(self, toy_env):
        script = in_process_script(toy_env)
        sends_seen = 0
        for seed in range(12):
            run = runBus(script, seed=seed, max_steps=400)
            outstanding = 0
            for text in run.trace():
                outstanding += 1 if self._snd(text) else 0
                outstanding -= 1 if self._ack(text) else 0
                assert 0 <= outstanding <= 1
            sends_seen += sum(self._snd(t) for t in run.trace())
        assert sends_seen > 0


class TestShutdownTotality:
    def test_model_level_every_shutdown_reaches_termination(self, toy_env):
        # after the shutdown request commits, the priority rule leaves the
        # application-kill step as the only move, and that move terminates
        # the whole composition
        script = in_process_script(toy_env)
        lts = build_lts(compose_script(script), toy_env, max_states=20_000)
        shutdown_targets = [
            dst
            for state in range(lts.state_count())
            for (label, dst) in lts.transitions[state]
            if label.text == "TB-shutdown"
        ]
        assert shutdown_targets
        for state in shutdown_targets:
            edges = lts.transitions[state]
            assert edges, "shutdown must not strand the bus"
            for label, dst in edges:
                assert label.text == "TB-app-shutdown"
                assert dst in lts.terminated
                assert not lts.transitions[dst]

    def test_wire_level_exactly_one_terminate_per_endpoint(self, toy_env):
        script, t1, t2 = external_script(toy_env)
        t1.feed("EVENT T1 tbterm(quit)")
        run = runBus(script, seed=0, poll_timeout=2.0)
        assert run.state == "terminated"
        for tool in ("T1", "T2"):
            terminates = [e for e in run.frames("send", tool) if e.text.startswith("TERMINATE ")]
            assert len(terminates) == 1, tool
        assert all(ep.state == "detached" for ep in script.endpoints)


# --- external runs over in-memory transports -----------------------------------------

class TestExternalRuns:
    def test_full_protocol_round_trip(self, toy_env):
        script, t1, t2 = external_script(toy_env)
        t1.feed("EVENT T1 tbterm(message)", "EVENT T1 tbterm(quit)")
        run = runBus(script, seed=0, poll_timeout=2.0)
        assert run.state == "terminated"
        assert run.trace() == (
            "tb-rec-event(T1, tbterm(message))",
            "tb-comm-msg(t1, t2, tbterm(message))",
            "tb-snd-eval(T2, tbterm(message))",
            "tb-rec-value(T2, tbterm(ack))",
            "tb-comm-msg(t2, t1, tbterm(ack))",
            "tb-snd-ack-event(T1, tbterm(message))",
            "tb-rec-event(T1, tbterm(quit))",
            "TB-shutdown",
            "TB-app-shutdown",
        )
        sent = [e.text for e in run.frames("send")]
        assert sent == [
            "EVAL T2 tbterm(message)",
            "ACKEVENT T1 tbterm(message)",
            "TERMINATE T1 shutdown",
            "TERMINATE T2 shutdown",
        ]
        assert scan_eval_value(run) == []

    def test_same_seed_and_feed_give_identical_logs(self, toy_env):
        logs = []
        for _ in range(2):
            script, t1, _ = external_script(toy_env)
            t1.feed("EVENT T1 tbterm(message)", "EVENT T1 tbterm(quit)")
            logs.append(runBus(script, seed=5, poll_timeout=2.0).log)
        assert logs[0] == logs[1]

    def test_value_before_eval_is_a_protocol_violation(self, toy_env):
        t2 = QueueTransport()
        t2.feed("VALUE T2 tbterm(ack)")
        script, t1, _ = external_script(toy_env, t2=t2)
        t1.feed("EVENT T1 tbterm(message)")
        with pytest.raises(ProtocolViolation) as e:
            runBus(script, seed=0, poll_timeout=2.0)
        assert "no eval outstanding" in str(e.value)
        assert hasattr(e.value, "log")

    def test_tools_may_not_send_bus_verbs(self, toy_env):
        script, t1, _ = external_script(toy_env)
        t1.feed("DO T1 quit")
        with pytest.raises(ProtocolViolation) as e:
            runBus(script, seed=0, poll_timeout=2.0)
        assert "may not send" in str(e.value)

    def test_misaddressed_frame_rejected(self, toy_env):
        script, t1, _ = external_script(toy_env)
        t1.feed("EVENT T2 tbterm(message)")
        with pytest.raises(ProtocolViolation) as e:
            runBus(script, seed=0, poll_timeout=2.0)
        assert "addressed to T2" in str(e.value)

    def test_malformed_line_crashes_the_tool(self, toy_env):
        script, t1, _ = external_script(toy_env)
        t1.feed("EVENT T1 pair(\n")
        with pytest.raises(ToolCrashed) as e:
            runBus(script, seed=0, poll_timeout=2.0)
        assert e.value.tool == "T1"
        assert isinstance(e.value.__cause__, MalformedFrame)

    def test_tool_closing_mid_protocol_crashes(self, toy_env):
        t2 = QueueTransport()
        t2.respond = lambda frame: t2.close_tool()  # dies instead of answering
        script, t1, _ = external_script(toy_env, t2=t2)
        t1.feed("EVENT T1 tbterm(message)")
        with pytest.raises(ToolCrashed) as e:
            runBus(script, seed=0, poll_timeout=2.0)
        assert e.value.tool == "T2"
        # the survivor was still told to stop
        assert any(line.startswith(b"TERMINATE T1") for line in t1.sent)
        assert not any(line.startswith(b"TERMINATE") for line in t2.sent)

    def test_silent_tools_stall_the_scheduler(self, toy_env):
        script, t1, t2 = external_script(toy_env)
        with pytest.raises(SchedulerStalled) as e:
            runBus(script, seed=0, poll_timeout=0.3)
        assert e.value.waiting == ("T1",)

    def test_internal_deadlock_stalls_without_waiting_set(self, toy_env):
        # PT2 alone wants a bus message that nobody will ever send
        script = BusScript(toy_env, ("PT2",), (ToolEndpoint.in_process("T2"),))
        with pytest.raises(SchedulerStalled) as e:
            runBus(script, seed=0)
        assert e.value.waiting == ()
        assert "PT2" in e.value.state_text

    def test_lone_process_shutdown_strands_the_control(self, toy_env):
        # a single top process that terminates right after requesting
        # shutdown takes the whole application with it: the disrupt ends
        # with its left side, dropping the kill step, and the control's
        # second handshake can never communicate.  The deadlock surfaces,
        # and the endpoint is still told to stop on the way out.
        t1 = QueueTransport()
        t1.feed("EVENT T1 tbterm(quit)")
        script = BusScript(toy_env, ("PT1",), (ToolEndpoint("T1", t1),))
        with pytest.raises(SchedulerStalled) as e:
            runBus(script, seed=0, poll_timeout=2.0)
        assert "tbc-app-shutdown" in e.value.state_text
        assert any(line.startswith(b"TERMINATE T1") for line in t1.sent)


# --- external runs over real transports -----------------------------------------------

_QUIT_TOOL = (
    "import sys\n"
    "sys.stdout.write('EVENT T1 tbterm(quit)\\n')\n"
    "sys.stdout.flush()\n"
    "for line in sys.stdin:\n"
    "    if line.startswith('TERMINATE'):\n"
    "        break\n"
)

_ANSWER_TOOL = (
    "import sys\n"
    "for line in sys.stdin:\n"
    "    if line.startswith('TERMINATE'):\n"
    "        break\n"
    "    if line.startswith('EVAL'):\n"
    "        sys.stdout.write('VALUE T2 tbterm(ack)\\n')\n"
    "        sys.stdout.flush()\n"
)


class TestRealTransports:
    def test_spawned_command_tools(self, toy_env):
        script = BusScript(
            toy_env,
            ("PT1", "PT2"),
            (
                ToolEndpoint.command("T1", [sys.executable, "-c", _QUIT_TOOL]),
                ToolEndpoint.command("T2", [sys.executable, "-c", _ANSWER_TOOL]),
            ),
        )
        run = runBus(script, seed=0, poll_timeout=10.0)
        assert run.state == "terminated"
        assert run.trace() == (
            "tb-rec-event(T1, tbterm(quit))",
            "TB-shutdown",
            "TB-app-shutdown",
        )
        sent = sorted(e.text for e in run.frames("send"))
        assert sent == ["TERMINATE T1 shutdown", "TERMINATE T2 shutdown"]

    def test_command_tool_that_exits_silently_crashes(self, toy_env):
        script = BusScript(
            toy_env,
            ("PT1",),
            (ToolEndpoint.command("T1", [sys.executable, "-c", "pass"]),),
        )
        with pytest.raises(ToolCrashed) as e:
            runBus(script, seed=0, poll_timeout=10.0)
        assert e.value.tool == "T1"

    def test_socket_tool(self, toy_env):
        server = socket.create_server(("127.0.0.1", 0))
        port = server.getsockname()[1]

        def serve_one_tool():
            conn, _ = server.accept()
            with conn:
                conn.sendall(b"EVENT T1 tbterm(quit)\n")
                buf = b""
                while b"TERMINATE" not in buf:
                    chunk = conn.recv(1024)
                    if not chunk:
                        return
                    buf += chunk
            server.close()

        thread = threading.Thread(target=serve_one_tool, daemon=True)
        thread.start()
        script = BusScript(
            toy_env,
            ("PT1", "PT2"),
            (ToolEndpoint.socket("T1", f"127.0.0.1:{port}"), ToolEndpoint("T2", QueueTransport())),
        )
        run = runBus(script, seed=0, poll_timeout=10.0)
        thread.join(timeout=5)
        assert run.state == "terminated"
        assert run.trace()[-1] == "TB-app-shutdown"


# --- log scanners ------------------------------------------------------------------

class TestScanners:
    def test_eval_value_scanner_accepts_clean_runs(self, toy_env):
        script, t1, _ = external_script(toy_env)
        t1.feed("EVENT T1 tbterm(message)", "EVENT T1 tbterm(quit)")
        run = runBus(script, seed=0, poll_timeout=2.0)
        assert scan_eval_value(run) == []
        assert scan_eval_value(run.log) == []

    def test_eval_value_scanner_flags_unanswered_and_unprompted(self):
        from psfkit.bus import BusEvent

        log = (
            BusEvent(0, "send", "EVAL T1 x", "T1"),
            BusEvent(1, "send", "EVAL T1 y", "T1"),
            BusEvent(2, "recv", "VALUE T2 z", "T2"),
        )
        problems = scan_eval_value(log)
        assert len(problems) == 3  # double eval, unprompted value, eval never answered

    def test_run_rendering_mentions_every_event(self, toy_env):
        script, t1, _ = external_script(toy_env)
        t1.feed("EVENT T1 tbterm(quit)")
        run = runBus(script, seed=0, poll_timeout=2.0)
        text = str(run)
        assert "TB-shutdown" in text and "TERMINATE T2 shutdown" in text
        assert str(runBus(BusScript(toy_env, ()))) == "<empty log>"
