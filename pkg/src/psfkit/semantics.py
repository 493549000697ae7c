"""Operational semantics: enabled transitions, stepping, bounded state-space
construction, and deadlock/termination classification.

The enabled list is deterministic — every derivable transition exactly once,
stable-sorted by label text (the surface language itself prescribes no
order). State identity is structural: two states with equal expressions share
an index, so all data terms inside a state are kept in normal form.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

from .errors import IndexOutOfRange, StateLimitExceeded, UnfoldDepthExceeded
from .process import (
    Alt,
    Atom,
    Call,
    Delta,
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
    TERMINATED,
    Terminated,
    proc_text,
)
from .terms import TAU, ActionLabel, OBSERVABLE, atom_label


@dataclass(frozen=True)
class Transition:
    label: ActionLabel
    target: Proc

    def __str__(self):
        return f"--{self.label}--> {proc_text(self.target)}"


@dataclass(frozen=True)
class ProcState:
    """A closed process expression paired with the environment it runs in —
    the unit the equivalence checks operate on."""

    expr: Proc
    env: Environment


DEFAULT_UNFOLD_BOUND = 300


class Engine:
    """Evaluator for one environment; memoizes per-state work so repeated
    exploration of a large system stays fast."""

    def __init__(self, env: Environment, unfold_bound: int = DEFAULT_UNFOLD_BOUND):
        self.env = env
        self.unfold_bound = unfold_bound
        self._memo: dict = {}
        self._canon: dict = {}
        if sys.getrecursionlimit() < 20_000:
            sys.setrecursionlimit(20_000)

    # -- canonical states -----------------------------------------------------

    def canon(self, p: Proc) -> Proc:
        """Normalize every data term inside p (canonical state identity)."""
        hit = self._canon.get(p)
        if hit is not None:
            return hit
        out = self._canon_build(p)
        self._canon[p] = out
        self._canon[out] = out
        return out

    def _canon_build(self, p: Proc) -> Proc:
        norm = self.env.normalize_term
        if isinstance(p, Atom):
            return Atom(p.name, tuple(norm(a) for a in p.args)) if p.args else p
        if isinstance(p, Call):
            return Call(p.name, tuple(norm(a) for a in p.args)) if p.args else p
        if isinstance(p, (Delta, Terminated)):
            return p
        if isinstance(p, Guard):
            return Guard(norm(p.lhs), norm(p.rhs), self.canon(p.body))
        if isinstance(p, (Seq, Alt, Merge, Disrupt, Star)):
            return type(p)(self.canon(p.left), self.canon(p.right))
        if isinstance(p, (Encaps, Hide, Prio)):
            return type(p)(p.set_name, self.canon(p.body))
        if isinstance(p, Rename):
            return Rename(p.map_name, self.canon(p.body))
        raise TypeError(f"unknown process node {p!r}")

    # -- enabled transitions --------------------------------------------------

    def enabled(self, p: Proc) -> tuple:
        """All enabled transitions of p, each exactly once, sorted by label
        text then structural position."""
        p = self.canon(p)
        hit = self._memo.get(p)
        if hit is not None:
            return hit
        raw = self._derive(p, 0)
        seen = set()
        unique = []
        for t in raw:
            key = (t.label, t.target)
            if key not in seen:
                seen.add(key)
                unique.append(t)
        unique.sort(key=lambda t: t.label.text)  # stable: structural position ties
        out = tuple(unique)
        self._memo[p] = out
        return out

    def _derive(self, p: Proc, depth: int) -> list:
        env = self.env
        if isinstance(p, Atom):
            label = atom_label(p.name, p.args)
            return [Transition(label, TERMINATED)]
        if isinstance(p, (Delta, Terminated)):
            return []
        if isinstance(p, Seq):
            out = []
            for t in self._derive(p.left, depth):
                tgt = p.right if isinstance(t.target, Terminated) else Seq(t.target, p.right)
                out.append(Transition(t.label, tgt))
            return out
        if isinstance(p, Alt):
            return self._derive(p.left, depth) + self._derive(p.right, depth)
        if isinstance(p, Merge):
            left = self._derive(p.left, depth)
            right = self._derive(p.right, depth)
            out = []
            for t in left:
                tgt = p.right if isinstance(t.target, Terminated) else Merge(t.target, p.right)
                out.append(Transition(t.label, tgt))
            for t in right:
                tgt = p.left if isinstance(t.target, Terminated) else Merge(p.left, t.target)
                out.append(Transition(t.label, tgt))
            for a in left:
                for b in right:
                    label = env.try_communicate(a.label, b.label)
                    if label is None:
                        continue
                    out.append(Transition(label, _join(a.target, b.target)))
            return out
        if isinstance(p, Encaps):
            out = []
            for t in self._derive(p.body, depth):
                if t.label.kind == OBSERVABLE and env.label_in_set(t.label, p.set_name):
                    continue
                out.append(Transition(t.label, _rewrap(Encaps, p.set_name, t.target)))
            return out
        if isinstance(p, Hide):
            out = []
            for t in self._derive(p.body, depth):
                label = t.label
                if label.kind == OBSERVABLE and env.label_in_set(label, p.set_name):
                    label = TAU
                out.append(Transition(label, _rewrap(Hide, p.set_name, t.target)))
            return out
        if isinstance(p, Rename):
            out = []
            for t in self._derive(p.body, depth):
                label = env.rename_label(t.label, p.map_name) if t.label.kind == OBSERVABLE else t.label
                tgt = TERMINATED if isinstance(t.target, Terminated) else Rename(p.map_name, t.target)
                out.append(Transition(label, tgt))
            return out
        if isinstance(p, Prio):
            ts = self._derive(p.body, depth)
            hi = [
                t for t in ts
                if t.label.kind == OBSERVABLE and env.label_in_set(t.label, p.set_name)
            ]
            kept = hi if hi else ts
            return [
                Transition(t.label, _rewrap(Prio, p.set_name, t.target))
                for t in kept
            ]
        if isinstance(p, Disrupt):
            out = []
            for t in self._derive(p.left, depth):
                tgt = TERMINATED if isinstance(t.target, Terminated) else Disrupt(t.target, p.right)
                out.append(Transition(t.label, tgt))
            out.extend(self._derive(p.right, depth))
            return out
        if isinstance(p, Star):
            out = []
            for t in self._derive(p.left, depth):
                tgt = p if isinstance(t.target, Terminated) else Seq(t.target, p)
                out.append(Transition(t.label, tgt))
            out.extend(self._derive(p.right, depth))
            return out
        if isinstance(p, Guard):
            if env.guard_holds(p.lhs, p.rhs):
                return self._derive(p.body, depth)
            return []
        if isinstance(p, Call):
            if depth >= self.unfold_bound:
                raise UnfoldDepthExceeded(p.name, depth)
            return self._derive(self.canon(env.unfold(p)), depth + 1)
        raise TypeError(f"unknown process node {p!r}")


def _join(a: Proc, b: Proc) -> Proc:
    """Remainder of a communication-merge step."""
    if isinstance(a, Terminated) and isinstance(b, Terminated):
        return TERMINATED
    if isinstance(a, Terminated):
        return b
    if isinstance(b, Terminated):
        return a
    return Merge(a, b)


def _rewrap(cls, set_name: str, target: Proc) -> Proc:
    return TERMINATED if isinstance(target, Terminated) else cls(set_name, target)


def enabled(p: Proc, env: Environment, engine: Engine | None = None) -> tuple:
    return (engine or Engine(env)).enabled(p)


def step(p: Proc, index: int, env: Environment, engine: Engine | None = None) -> Proc:
    ts = (engine or Engine(env)).enabled(p)
    if not 0 <= index < len(ts):
        raise IndexOutOfRange(index, len(ts))
    return ts[index].target


def classify(p: Proc, env: Environment, engine: Engine | None = None) -> str:
    """One of 'running' | 'terminated' | 'deadlock'."""
    if isinstance(p, Terminated):
        return "terminated"
    if (engine or Engine(env)).enabled(p):
        return "running"
    return "deadlock"


@dataclass
class Lts:
    """Finite transition system over hash-consed states.

    states[i] is the state's process expression; the successful-termination
    sink (if reachable) is the Terminated node and is the only index in
    `terminated`.
    """

    states: list
    initial: int
    transitions: list          # transitions[i] = list[(ActionLabel, dst index)]
    terminated: frozenset
    complete: bool = True

    def state_count(self) -> int:
        return len(self.states)

    def edge_count(self) -> int:
        return sum(len(ts) for ts in self.transitions)

    def edges(self):
        for src, ts in enumerate(self.transitions):
            for label, dst in ts:
                yield src, label, dst

    def classify_state(self, i: int) -> str:
        if i in self.terminated:
            return "terminated"
        if self.transitions[i]:
            return "running"
        return "deadlock"

    def deadlocks(self) -> list:
        return [i for i in range(len(self.states)) if self.classify_state(i) == "deadlock"]

    def by_expr(self) -> dict:
        """Order-insensitive view: expr -> sorted [(label text, target expr text)].

        Two builds of the same system are isomorphic exactly when these
        dictionaries coincide, whatever exploration order produced them.
        """
        out = {}
        for src, ts in enumerate(self.transitions):
            key = proc_text(self.states[src])
            out[key] = sorted((label.text, proc_text(self.states[dst])) for label, dst in ts)
        return out

    def to_json(self) -> dict:
        return {
            "states": [proc_text(s) for s in self.states],
            "initial": self.initial,
            "transitions": [
                {"src": src, "label": label.text, "dst": dst}
                for src, label, dst in self.edges()
            ],
            "terminated": sorted(self.terminated),
        }

    def to_dot(self, name: str = "lts") -> str:
        lines = [f"digraph {name} {{", "  rankdir=LR;", "  node [shape=circle];"]
        lines.append('  __init [shape=point, style=invis];')
        for i in range(len(self.states)):
            shape = "doublecircle" if i in self.terminated else "circle"
            tip = proc_text(self.states[i]).replace('"', '\\"')
            lines.append(f'  s{i} [shape={shape}, label="{i}", tooltip="{tip}"];')
        lines.append(f"  __init -> s{self.initial};")
        for src, label, dst in self.edges():
            text = label.text.replace('"', '\\"')
            lines.append(f'  s{src} -> s{dst} [label="{text}"];')
        lines.append("}")
        return "\n".join(lines)


def build_lts(
    p: Proc,
    env: Environment,
    max_states: int = 100_000,
    max_depth: int = 1_000_000_000,
    engine: Engine | None = None,
    reverse_order: bool = False,
) -> Lts:
    """Breadth-first closure of enabled() from p under structural state
    identity. Raises StateLimitExceeded (carrying the partial Lts) when a
    limit is hit.  reverse_order flips the expansion order per state, which
    must never change the resulting system up to isomorphism."""
    engine = engine or Engine(env)
    root = engine.canon(p)
    index: dict = {root: 0}
    states = [root]
    depth_of = [0]
    transitions: list = []
    frontier = [0]
    overflow = None
    while frontier:
        nxt = []
        for sid in frontier:
            state = states[sid]
            if isinstance(state, Terminated):
                transitions.append([])
                continue
            if depth_of[sid] >= max_depth:
                overflow = f"depth limit {max_depth} hit"
                break
            row = []
            ts = engine.enabled(state)
            if reverse_order:
                ts = tuple(reversed(ts))
            for t in ts:
                tid = index.get(t.target)
                if tid is None:
                    if len(states) >= max_states:
                        overflow = f"state limit {max_states} hit"
                        break
                    tid = len(states)
                    index[t.target] = tid
                    states.append(t.target)
                    depth_of.append(depth_of[sid] + 1)
                    nxt.append(tid)
                row.append((t.label, tid))
            transitions.append(row)
            if overflow:
                break
        if overflow:
            break
        frontier = nxt
    while len(transitions) < len(states):
        transitions.append([])
    terminated = frozenset(i for i, s in enumerate(states) if isinstance(s, Terminated))
    lts = Lts(states, 0, transitions, terminated, complete=overflow is None)
    if overflow:
        raise StateLimitExceeded(overflow, lts)
    return lts
