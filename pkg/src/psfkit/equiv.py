"""Behavioural equivalences and the two implementation relations.

Equivalence layer: strong bisimilarity and rooted weak bisimilarity
(observational congruence) over finite transition systems, via signature
partition refinement; weak simulation for the "more deterministic than"
reading.  Successful termination is treated as an observable: terminated
states get a tick edge to a shared sink before any comparison, so they
only ever relate to other terminated states.

Implementation layer: action refinement mappings (one abstract action to a
sequence of concrete actions), applied syntactically to process
expressions; verticalCheck compares an abstract system against a concrete
one through hiding + renaming and cross-validates the mapping
construction; horizontalCheck asks whether a constrained system stays
within its specification; constrain builds the constrained composition.

All checks are pure functions over immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import AmbiguousDefault, ParseError
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
    ProcessDef,
    Rename,
    Seq,
    Star,
    Terminated,
)
from .semantics import Lts, ProcState, build_lts
from .syntax import parse_term_text
from .terms import (
    App,
    ConflictingBinding,
    OBSERVABLE,
    RenameMap,
    RenamePair,
    SILENT,
    TAU,
    TICK_LABEL,
    Term,
    Var,
    match_pattern,
    substitute,
    term_text,
    term_vars,
)

__all__ = [
    "EquivReport",
    "RefinementRule",
    "RefinementMapping",
    "parse_mapping",
    "load_mapping",
    "applyRefinement",
    "strongBisim",
    "rootedWeakBisim",
    "weakSimulation",
    "constrain",
    "verticalCheck",
    "horizontalCheck",
]


@dataclass(frozen=True)
class EquivReport:
    """Outcome of one equivalence/preorder check.

    Exactly one of witness (a set of related state-index pairs) and
    counterexample (a distinguishing label trace) is present.
    """

    related: bool
    relation: str
    witness: frozenset | None = None
    counterexample: tuple | None = None
    notes: tuple = ()

    def __post_init__(self):
        if (self.witness is None) == (self.counterexample is None):
            raise ValueError("exactly one of witness/counterexample must be present")
        if self.related != (self.witness is not None):
            raise ValueError("related reports carry a witness, refutations a counterexample")

    def __str__(self):
        head = f"{'related' if self.related else 'not related'} ({self.relation})"
        lines = [head]
        if self.counterexample is not None:
            lines.append("counterexample: " + " . ".join(self.counterexample))
        for note in self.notes:
            lines.append(note)
        return "\n".join(lines)


# --- decorated graphs -------------------------------------------------------

def _decorate(lts: Lts):
    """Adjacency rows of an Lts with termination made observable: every
    terminated state gets a tick edge to a fresh sink appended at the end."""
    n = lts.state_count()
    edges = [list(row) for row in lts.transitions]
    edges.append([])  # sink
    for s in lts.terminated:
        edges[s].append((TICK_LABEL, n))
    return edges, n + 1


def _union(l1: Lts, l2: Lts):
    """Disjoint union of two decorated graphs sharing one tick sink."""
    n1, n2 = l1.state_count(), l2.state_count()
    sink = n1 + n2
    edges = [[] for _ in range(sink + 1)]
    for src, label, dst in l1.edges():
        edges[src].append((label, dst))
    for src, label, dst in l2.edges():
        edges[n1 + src].append((label, n1 + dst))
    for s in l1.terminated:
        edges[s].append((TICK_LABEL, sink))
    for s in l2.terminated:
        edges[n1 + s].append((TICK_LABEL, sink))
    return edges, n1, n2, l1.initial, n1 + l2.initial


def _tau_closure(edges, n):
    """Reflexive-transitive closure of the silent steps, per state."""
    reach = []
    for s in range(n):
        seen = {s}
        stack = [s]
        while stack:
            for label, dst in edges[stack.pop()]:
                if label.kind == SILENT and dst not in seen:
                    seen.add(dst)
                    stack.append(dst)
        reach.append(frozenset(seen))
    return reach


def _saturate(edges, n, closure):
    """Weak moves per state: tau* a tau* for visible a, tau* for tau
    (reflexive, so every state weakly reaches itself silently)."""
    out = []
    for s in range(n):
        moves = {(TAU, u) for u in closure[s]}
        for t1 in closure[s]:
            for label, dst in edges[t1]:
                if label.kind == SILENT:
                    continue
                for u in closure[dst]:
                    moves.add((label, u))
        out.append(sorted(moves, key=lambda m: (m[0].text, m[1])))
    return out


# --- partition refinement ----------------------------------------------------

def _refine(edges, n):
    """Coarsest bisimulation partition by signature refinement.

    Returns (final block array, snapshots per round).  Round 0 is the
    uniform partition; each round splits by outgoing (label, block) sets.
    """
    block = [0] * n
    rounds = [tuple(block)]
    count = 1
    while True:
        keys = {}
        new = [0] * n
        for s in range(n):
            key = (block[s], frozenset((label, block[dst]) for label, dst in edges[s]))
            bid = keys.get(key)
            if bid is None:
                bid = keys[key] = len(keys)
            new[s] = bid
        if len(keys) == count:
            return block, rounds
        block, count = new, len(keys)
        rounds.append(tuple(block))


def _first_split(rounds, s, t):
    """Index of the first refinement round separating s from t."""
    for i, snap in enumerate(rounds):
        if snap[s] != snap[t]:
            return i
    return None


def _distinguish(edges, rounds, s, t):
    """A label trace explaining why s and t fell into different blocks:
    each step follows a move one side has into a block the other side
    cannot reach with that label."""
    r = _first_split(rounds, s, t)
    trace = []
    while True:
        prev = rounds[r - 1]
        sig_s = {(label, prev[dst]) for label, dst in edges[s]}
        sig_t = {(label, prev[dst]) for label, dst in edges[t]}
        only = sig_s - sig_t
        mover, other = s, t
        if not only:
            only = sig_t - sig_s
            mover, other = t, s
        label, blk = min(only, key=lambda m: (m[0].text, m[1]))
        trace.append(label.text)
        answers = [dst for lab2, dst in edges[other] if lab2 == label]
        if not answers:
            return tuple(trace)
        nxt = next(dst for lab2, dst in edges[mover] if lab2 == label and prev[dst] == blk)
        r, t = min((_first_split(rounds, nxt, d), d) for d in answers)
        s = nxt


def _witness_pairs(block, n1, n2):
    return frozenset(
        (i, j)
        for i in range(n1)
        for j in range(n2)
        if block[i] == block[n1 + j]
    )


def strongBisim(l1: Lts, l2: Lts) -> EquivReport:
    """Strong bisimilarity of two finite transition systems."""
    edges, n1, n2, init1, init2 = _union(l1, l2)
    block, rounds = _refine(edges, len(edges))
    relation = "strong bisimulation"
    if block[init1] == block[init2]:
        return EquivReport(True, relation, witness=_witness_pairs(block, n1, n2))
    return EquivReport(
        False, relation, counterexample=_distinguish(edges, rounds, init1, init2)
    )


def rootedWeakBisim(l1: Lts, l2: Lts) -> EquivReport:
    """Rooted weak bisimilarity (observational congruence): weak
    bisimilarity plus the root condition that an initial silent move must
    be answered by at least one silent move."""
    edges, n1, n2, init1, init2 = _union(l1, l2)
    n = len(edges)
    closure = _tau_closure(edges, n)
    weak = _saturate(edges, n, closure)
    block, rounds = _refine(weak, n)
    relation = "rooted weak bisimulation"
    if block[init1] != block[init2]:
        return EquivReport(
            False, relation, counterexample=_distinguish(weak, rounds, init1, init2)
        )

    def tau_plus(s):
        out = set()
        for label, dst in edges[s]:
            if label.kind == SILENT:
                out.update(closure[dst])
        return out

    for root, answer in ((init1, init2), (init2, init1)):
        answers = tau_plus(answer)
        for label, dst in edges[root]:
            if label.kind == SILENT and not any(
                block[dst] == block[d] for d in answers
            ):
                return EquivReport(
                    False,
                    relation,
                    counterexample=(TAU.text,),
                    notes=("root condition: an initial silent step has no "
                           "silent answer into the same class",),
                )
    return EquivReport(True, relation, witness=_witness_pairs(block, n1, n2))


# --- weak simulation ---------------------------------------------------------

def _weak_targets(weak_moves, s, label):
    if label.kind == SILENT:
        return [dst for lab2, dst in weak_moves[s] if lab2.kind == SILENT]
    return [dst for lab2, dst in weak_moves[s] if lab2 == label]


def weakSimulation(l1: Lts, l2: Lts) -> EquivReport:
    """Is every behaviour of l1 weakly matched by l2 (l2 simulates l1)?"""
    a_edges, a_n = _decorate(l1)
    b_edges, b_n = _decorate(l2)
    b_weak = _saturate(b_edges, b_n, _tau_closure(b_edges, b_n))

    rel = {(s, t) for s in range(a_n) for t in range(b_n)}
    rounds = [frozenset(rel)]
    while True:
        dropped = set()
        for s, t in rel:
            for label, d1 in a_edges[s]:
                if label.kind == SILENT:
                    ok = any((d1, d2) in rel for d2 in _weak_targets(b_weak, t, TAU))
                else:
                    ok = any((d1, d2) in rel for d2 in _weak_targets(b_weak, t, label))
                if not ok:
                    dropped.add((s, t))
                    break
        if not dropped:
            break
        rel -= dropped
        rounds.append(frozenset(rel))

    relation = "weak simulation"
    pair = (l1.initial, l2.initial)
    if pair in rel:
        return EquivReport(True, relation, witness=frozenset(rel))

    def drop_round(p):
        for i, snap in enumerate(rounds):
            if p not in snap:
                return i
        return None

    # walk the elimination chain for a shortest refusal trace
    trace = []
    s, t = pair
    while True:
        snap = rounds[drop_round((s, t)) - 1]
        found = None
        for label, d1 in a_edges[s]:
            answers = _weak_targets(b_weak, t, TAU if label.kind == SILENT else label)
            if not any((d1, d2) in snap for d2 in answers):
                found = (label, d1, answers)
                break
        label, d1, answers = found
        trace.append(label.text)
        live = [(drop_round((d1, d2)), d2) for d2 in answers]
        if not live:
            return EquivReport(False, relation, counterexample=tuple(trace))
        _, d2 = min(live)
        s, t = d1, d2


# --- refinement mappings -----------------------------------------------------

@dataclass(frozen=True)
class RefinementRule:
    """One mapping row: an atom pattern rewritten to a sequence of atom
    patterns.  Wildcards ($1, $2, ...) bind argument subterms on the left
    and are substituted on the right."""

    lhs: App
    rhs: tuple
    default: bool = False
    line: int = 0

    def match(self, name: str, args: tuple):
        if self.lhs.name != name or len(self.lhs.args) != len(args):
            return None
        bindings: dict | None = {}
        for pat, arg in zip(self.lhs.args, args):
            try:
                bindings = match_pattern(pat, arg, bindings)
            except ConflictingBinding:
                return None
            if bindings is None:
                return None
        return bindings

    def __str__(self):
        head = "default " if self.default else ""
        return (
            head
            + term_text(self.lhs)
            + " => "
            + " . ".join(term_text(r) for r in self.rhs)
        )


@dataclass(frozen=True)
class RefinementMapping:
    """An ordered rule list plus the renaming applied to unmatched names.

    Specific rules are tried first, in order, first match wins.  Default
    rules apply only when no specific rule matches; two defaults matching
    the same atom is an error."""

    rules: tuple = ()
    renames: RenameMap = field(default_factory=RenameMap)

    def lookup(self, name: str, args: tuple):
        """(rule, bindings) for the winning rule, or None."""
        defaults = []
        for rule in self.rules:
            bindings = rule.match(name, args)
            if bindings is None:
                continue
            if rule.default:
                defaults.append((rule, bindings))
            else:
                return rule, bindings
        if len(defaults) > 1:
            label = term_text(App(name, args)) if args else name
            raise AmbiguousDefault(label, [r for r, _ in defaults])
        return defaults[0] if defaults else None


def _split_segments(text: str):
    """Split a rule right-hand side on sequence dots outside parentheses."""
    parts = []
    depth = 0
    cur = []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "." and depth == 0:
            parts.append("".join(cur))
            cur = []
            continue
        cur.append(ch)
    parts.append("".join(cur))
    return parts


def _pattern(text: str, lineno: int, filename):
    try:
        t = parse_term_text(text.strip(), wildcards=True, filename=filename)
    except ParseError as exc:
        raise ParseError(exc.message, lineno, exc.col, filename) from None
    if not isinstance(t, App):
        raise ParseError(f"step pattern cannot be a bare wildcard: {text.strip()}",
                         lineno, 1, filename)
    return t


def parse_mapping(text: str, filename: str | None = None) -> RefinementMapping:
    """Parse mapping rules: one `LHS => RHS . RHS ...` per line, `default`
    prefix for fallback rules, `rename FROM -> TO` lines, # comments."""
    rules = []
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("rename "):
            sides = line[len("rename "):].split("->")
            if len(sides) != 2:
                raise ParseError("rename needs exactly one ->", lineno, 1, filename)
            src = _pattern(sides[0], lineno, filename)
            dst = _pattern(sides[1], lineno, filename)
            if src.args or dst.args:
                pairs.append(RenamePair(src.name, dst.name, src.args, dst.args))
            else:
                pairs.append(RenamePair(src.name, dst.name))
            continue
        default = False
        if line.startswith("default "):
            default = True
            line = line[len("default "):]
        sides = line.split("=>")
        if len(sides) != 2:
            raise ParseError("mapping rule needs exactly one =>", lineno, 1, filename)
        lhs = _pattern(sides[0], lineno, filename)
        rhs = tuple(_pattern(seg, lineno, filename) for seg in _split_segments(sides[1]))
        bound = term_vars(lhs)
        for step_pattern in rhs:
            loose = term_vars(step_pattern) - bound
            if loose:
                raise ParseError(
                    f"right-hand side uses {', '.join(sorted(loose))} "
                    "not bound on the left", lineno, 1, filename)
        rules.append(RefinementRule(lhs, rhs, default, lineno))
    return RefinementMapping(tuple(rules), RenameMap(tuple(pairs)))


def load_mapping(path) -> RefinementMapping:
    with open(path, encoding="utf-8") as fh:
        return parse_mapping(fh.read(), str(path))


# --- action refinement -------------------------------------------------------

def applyRefinement(
    p: Proc, mapping: RefinementMapping, rename: RenameMap | None = None
) -> Proc:
    """Rewrite every atom matched by a mapping rule into the sequence of
    instantiated right-hand-side atoms; unmatched atom and call names pass
    through the rename map.  Process structure is preserved."""
    r = rename if rename is not None else mapping.renames

    def seq_of(atoms):
        out = atoms[-1]
        for a in reversed(atoms[:-1]):
            out = Seq(a, out)
        return out

    def walk(node):
        if isinstance(node, Atom):
            hit = mapping.lookup(node.name, node.args)
            if hit is None:
                return Atom(r.rename_identifier(node.name), node.args)
            rule, bindings = hit
            return seq_of([
                Atom(s.name, tuple(substitute(a, bindings) for a in s.args))
                for s in rule.rhs
            ])
        if isinstance(node, Call):
            return Call(r.rename_identifier(node.name), node.args)
        if isinstance(node, (Delta, Terminated)):
            return node
        if isinstance(node, Guard):
            return Guard(node.lhs, node.rhs, walk(node.body))
        if isinstance(node, (Seq, Alt, Merge, Disrupt, Star)):
            return type(node)(walk(node.left), walk(node.right))
        if isinstance(node, (Encaps, Hide, Prio)):
            return type(node)(node.set_name, walk(node.body))
        if isinstance(node, Rename):
            return Rename(node.map_name, walk(node.body))
        raise TypeError(f"unknown process node {node!r}")

    return walk(p)


def constrain(p: Proc, q: Proc, set_name: str) -> Proc:
    """The constrained composition: p and q in parallel with the loose
    halves of their synchronisations forbidden.  Purely syntactic."""
    return Encaps(set_name, Merge(p, q))


# --- the two implementation checks --------------------------------------------

def _as_state(state) -> ProcState:
    if isinstance(state, ProcState):
        return state
    expr, env = state
    return ProcState(expr, env)


def _hider(env: Environment, spec):
    """Predicate over labels from a hiding description: an atom-set name
    registered in env, or an iterable of plain atom names."""
    if spec is None:
        return lambda label: False
    if isinstance(spec, str):
        if spec not in env.atom_sets:
            raise KeyError(f"no atom set named {spec}")
        return lambda label: label.kind == OBSERVABLE and env.label_in_set(label, spec)
    names = frozenset(spec)
    return lambda label: label.kind == OBSERVABLE and label.name in names

def _map_labels(lts: Lts, fn) -> Lts:
    rows = []
    for row in lts.transitions:
        seen = set()
        out = []
        for label, dst in row:
            moved = (fn(label), dst)
            if moved not in seen:
                seen.add(moved)
                out.append(moved)
        rows.append(out)
    return Lts(lts.states, lts.initial, rows, lts.terminated, complete=lts.complete)


def _refined_environment(
    abstract_env: Environment,
    concrete_env: Environment,
    mapping: RefinementMapping,
    rename: RenameMap,
) -> Environment:
    """The concrete world with every abstract process definition re-added
    in refined form (renamed name, refined body), so refined recursion
    unfolds into refined bodies rather than handwritten concrete ones."""
    env = Environment(
        rewrite=concrete_env.rewrite,
        funcs=dict(concrete_env.funcs),
        atoms=dict(concrete_env.atoms),
        atom_sets=dict(concrete_env.atom_sets),
        comm_rules=list(concrete_env.comm_rules),
        rename_maps=dict(concrete_env.rename_maps),
        processes=dict(concrete_env.processes),
        sorts=set(concrete_env.sorts),
        process_decls=set(concrete_env.process_decls),
    )
    for (name, arity), pdef in abstract_env.processes.items():
        new_name = rename.rename_identifier(name)
        env.processes[(new_name, arity)] = ProcessDef(
            new_name, pdef.params, applyRefinement(pdef.body, mapping, rename)
        )
        env.process_decls.add((new_name, arity))
    return env


def verticalCheck(
    abstract,
    concrete,
    mapping: RefinementMapping,
    abstract_internal=None,
    concrete_internal=None,
    rename: RenameMap | None = None,
    max_states: int = 100_000,
) -> EquivReport:
    """Does the concrete system implement the abstract one down a level?

    Interface check: rename(hide(abstract internals)) must be rooted weak
    bisimilar to hide(concrete internals).  Construction check: applying
    the refinement mapping to the abstract side must again be rooted weak
    bisimilar to the concrete side under the same hiding.  Both must hold.
    """
    abstract = _as_state(abstract)
    concrete = _as_state(concrete)
    r = rename if rename is not None else mapping.renames
    hide_abs = _hider(abstract.env, abstract_internal)
    hide_conc = _hider(concrete.env, concrete_internal)

    abstract_lts = build_lts(abstract.expr, abstract.env, max_states=max_states)
    concrete_lts = build_lts(concrete.expr, concrete.env, max_states=max_states)
    spec_side = _map_labels(
        abstract_lts, lambda lab: TAU if hide_abs(lab) else r.rename_label(lab)
    )
    conc_side = _map_labels(concrete_lts, lambda lab: TAU if hide_conc(lab) else lab)
    interface = rootedWeakBisim(spec_side, conc_side)

    refined = applyRefinement(abstract.expr, mapping, r)
    refined_env = _refined_environment(abstract.env, concrete.env, mapping, r)
    refined_lts = build_lts(refined, refined_env, max_states=max_states)
    construction = rootedWeakBisim(
        _map_labels(refined_lts, lambda lab: TAU if hide_conc(lab) else lab),
        conc_side,
    )

    relation = "vertical implementation (rooted weak bisimulation)"
    notes = (
        f"interface: {'related' if interface.related else 'not related'}",
        f"construction: {'related' if construction.related else 'not related'}",
    )
    if interface.related and construction.related:
        return EquivReport(True, relation, witness=interface.witness, notes=notes)
    failed = interface if not interface.related else construction
    return EquivReport(
        False, relation,
        counterexample=failed.counterexample,
        notes=notes + failed.notes,
    )


def horizontalCheck(spec, impl, max_states: int = 100_000) -> EquivReport:
    """Does the (constrained) implementation stay within its specification?
    Implementation behaviour must be weakly simulated by the specification
    — the chosen reading of "more deterministic or equivalent"."""
    spec = _as_state(spec)
    impl = _as_state(impl)
    spec_lts = build_lts(spec.expr, spec.env, max_states=max_states)
    impl_lts = build_lts(impl.expr, impl.env, max_states=max_states)
    inner = weakSimulation(impl_lts, spec_lts)
    relation = "horizontal implementation (weak simulation of impl by spec)"
    if inner.related:
        return EquivReport(True, relation, witness=inner.witness)
    return EquivReport(False, relation, counterexample=inner.counterexample)
