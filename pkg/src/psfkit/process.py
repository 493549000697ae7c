"""Process expressions and the elaborated environment they execute in.

Nodes are immutable with precomputed hashes so they can serve directly as
state keys during exploration. The Environment bundles everything a closed
process needs to run: rewrite rules, atom declarations, atom sets,
communication rules, rename maps, and named process definitions.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    ArityMismatch,
    ConflictingBinding,
    NonBooleanGuard,
    UnknownProcess,
    UnknownSort,
)
from .terms import (
    NAT,
    ActionLabel,
    App,
    AtomSet,
    CommRule,
    OBSERVABLE,
    RenameMap,
    RewriteSystem,
    Term,
    Var,
    atom_label,
    match_pattern,
    normalize,
    substitute,
    term_text,
)


class Proc:
    """Base class for process expressions."""

    __slots__ = ()


def _node(cls):
    """Give a Proc subclass value semantics with a cached hash."""

    fields = cls.__slots__[:-1]  # last slot is _hash

    def __init__(self, *args):
        if len(args) != len(fields):
            raise TypeError(f"{cls.__name__} takes {len(fields)} arguments")
        for f, a in zip(fields, args):
            object.__setattr__(self, f, a)
        object.__setattr__(self, "_hash", hash((cls.__name__,) + args))

    def __setattr__(self, *a):
        raise AttributeError(f"{cls.__name__} is immutable")

    def __eq__(self, other):
        if self is other:
            return True
        if other.__class__ is not cls or other._hash != self._hash:
            return False
        return all(getattr(self, f) == getattr(other, f) for f in fields)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{cls.__name__}({', '.join(repr(getattr(self, f)) for f in fields)})"

    cls.__init__ = __init__
    cls.__setattr__ = __setattr__
    cls.__eq__ = __eq__
    cls.__hash__ = __hash__
    cls.__repr__ = __repr__
    return cls


@_node
class Atom(Proc):
    __slots__ = ("name", "args", "_hash")


@_node
class Delta(Proc):
    __slots__ = ("_hash",)


@_node
class Terminated(Proc):
    """Successful termination; only produced by stepping, never parsed."""

    __slots__ = ("_hash",)


@_node
class Seq(Proc):
    __slots__ = ("left", "right", "_hash")


@_node
class Alt(Proc):
    __slots__ = ("left", "right", "_hash")


@_node
class Merge(Proc):
    __slots__ = ("left", "right", "_hash")


@_node
class Encaps(Proc):
    __slots__ = ("set_name", "body", "_hash")


@_node
class Hide(Proc):
    __slots__ = ("set_name", "body", "_hash")


@_node
class Rename(Proc):
    __slots__ = ("map_name", "body", "_hash")


@_node
class Prio(Proc):
    __slots__ = ("set_name", "body", "_hash")


@_node
class Disrupt(Proc):
    __slots__ = ("left", "right", "_hash")


@_node
class Star(Proc):
    """left * right: repeat left any number of times, then do right."""

    __slots__ = ("left", "right", "_hash")


@_node
class Guard(Proc):
    """[lhs = rhs] -> body."""

    __slots__ = ("lhs", "rhs", "body", "_hash")


@_node
class Call(Proc):
    __slots__ = ("name", "args", "_hash")


@_node
class ProcApp(Proc):
    """A not-yet-resolved name application straight from the parser; becomes
    an Atom or a Call once declarations are known."""

    __slots__ = ("name", "args", "_hash")


DELTA = Delta()
TERMINATED = Terminated()


# Printing precedence, loosest first: + < || < * < .
_PREC = {Alt: 1, Merge: 2, Star: 3, Seq: 4}


def proc_text(p: Proc, parent: int = 0) -> str:
    """Concrete-syntax rendering of a process expression."""
    if isinstance(p, (Atom, Call, ProcApp)):
        if not p.args:
            return p.name
        return p.name + "(" + ", ".join(term_text(a) for a in p.args) + ")"
    if isinstance(p, Delta):
        return "delta"
    if isinstance(p, Terminated):
        return "<done>"
    if isinstance(p, Guard):
        body = proc_text(p.body, 4)
        s = f"[{term_text(p.lhs)} = {term_text(p.rhs)}] -> {body}"
        return f"({s})" if parent > 0 else s
    if isinstance(p, Encaps):
        return f"encaps({p.set_name}, {proc_text(p.body)})"
    if isinstance(p, Hide):
        return f"hide({p.set_name}, {proc_text(p.body)})"
    if isinstance(p, Rename):
        return f"rename({p.map_name}, {proc_text(p.body)})"
    if isinstance(p, Prio):
        return f"prio({p.set_name} > atoms, {proc_text(p.body)})"
    if isinstance(p, Disrupt):
        return f"disrupt({proc_text(p.left)}, {proc_text(p.right)})"
    ops = {Alt: " + ", Merge: " || ", Seq: " . ", Star: " * "}
    op = ops[type(p)]
    prec = _PREC[type(p)]
    # Seq parses right-associatively; Alt, Merge, and Star parse
    # left-associatively.  The nesting side prints flat, the other side gets
    # one extra level so it is parenthesised.
    if type(p) is Seq:
        s = proc_text(p.left, prec + 1) + op + proc_text(p.right, prec)
    else:
        s = proc_text(p.left, prec) + op + proc_text(p.right, prec + 1)
    return f"({s})" if prec < parent else s


def subst_proc(p: Proc, bindings: dict) -> Proc:
    """Substitute data variables throughout a process expression."""
    if isinstance(p, (Atom, Call, ProcApp)):
        if not p.args:
            return p
        return type(p)(p.name, tuple(substitute(a, bindings) for a in p.args))
    if isinstance(p, (Delta, Terminated)):
        return p
    if isinstance(p, Guard):
        return Guard(substitute(p.lhs, bindings), substitute(p.rhs, bindings), subst_proc(p.body, bindings))
    if isinstance(p, (Seq, Alt, Merge, Disrupt, Star)):
        return type(p)(subst_proc(p.left, bindings), subst_proc(p.right, bindings))
    if isinstance(p, (Encaps, Hide, Prio)):
        return type(p)(p.set_name, subst_proc(p.body, bindings))
    if isinstance(p, Rename):
        return Rename(p.map_name, subst_proc(p.body, bindings))
    raise TypeError(f"unknown process node {p!r}")


@dataclass(frozen=True)
class ProcessDef:
    name: str
    params: tuple          # tuple[(var name, sort name)]
    body: Proc


class Environment:
    """Everything a closed specification provides to the step engine."""

    def __init__(
        self,
        rewrite: RewriteSystem | None = None,
        funcs: dict | None = None,
        atoms: dict | None = None,
        atom_sets: dict | None = None,
        comm_rules: list | None = None,
        rename_maps: dict | None = None,
        processes: dict | None = None,
        sorts: set | None = None,
        process_decls: set | None = None,
        diagnostics: list | None = None,
    ):
        self.rewrite = rewrite or RewriteSystem()
        self.funcs: dict = funcs or {}          # (name, arity) -> (arg sorts, result sort)
        self.atoms: dict = atoms or {}          # (name, arity) -> tuple of arg sorts
        self.atom_sets: dict = atom_sets or {}  # name -> AtomSet
        self.comm_rules: list = comm_rules or []
        self.rename_maps: dict = rename_maps or {}
        self.processes: dict = processes or {}  # (name, arity) -> ProcessDef
        self.sorts: set = set(sorts or ())
        self.sorts.update(("BOOLEAN", NAT))
        # declared (name, arity) pairs, including processes never defined
        self.process_decls: set = set(process_decls or self.processes)
        # issues found while flattening modules; served by checkWellFormed
        self.diagnostics: list = list(diagnostics or ())
        self._set_member_cache: dict = {}
        self._inhabitants_cache: dict = {}

    # -- data layer ---------------------------------------------------------

    def normalize_term(self, t: Term) -> Term:
        return normalize(t, self.rewrite)

    def sort_of(self, t: Term) -> str:
        """Result sort of a (normal-form) ground term."""
        if isinstance(t, Var):
            raise UnknownSort(f"cannot sort open term {term_text(t)}")
        if not t.args and t.name.isdigit():
            return NAT
        info = self.funcs.get((t.name, len(t.args)))
        if info is None:
            raise UnknownSort(f"no declaration for {t.name}/{len(t.args)}")
        return info[1]

    def has_sort(self, t: Term, sort: str) -> bool:
        try:
            return self.sort_of(t) == sort
        except UnknownSort:
            return False

    def inhabitants(self, sort: str, max_depth: int = 4, cap: int = 4096) -> list:
        """Ground normal forms of a sort: constants, then constructor
        applications closed to a bounded depth.

        Only constructors participate — functions that head a rewrite rule
        are defined functions whose ground values already appear in the
        pools (otherwise they are stuck terms, not values)."""
        return list(self._constructor_pools(max_depth, cap).get(sort, ()))

    def _constructor_pools(self, max_depth: int, cap: int) -> dict:
        key = (max_depth, cap)
        pools = self._inhabitants_cache.get(key)
        if pools is not None:
            return pools
        pools = {}
        for _ in range(max_depth):
            grew = False
            for (name, arity), (arg_sorts, result) in self.funcs.items():
                if self.rewrite.rules_for(name, arity):
                    continue
                pool = pools.setdefault(result, {})
                if arity == 0:
                    # constructor terms contain no redex, so no normalize
                    if App(name) not in pool:
                        pool[App(name)] = None
                        grew = True
                    continue
                choices = [list(pools.get(s, ())) for s in arg_sorts]
                if any(not c for c in choices):
                    continue
                for combo in _cartesian(choices, cap):
                    t = App(name, tuple(combo))
                    if t not in pool:
                        pool[t] = None
                        grew = True
                    if len(pool) >= cap:
                        break
            if not grew:
                break
        self._inhabitants_cache[key] = pools
        return pools

    # -- atom sets and communication ----------------------------------------

    def label_in_set(self, label: ActionLabel, set_name: str) -> bool:
        key = (label, set_name)
        hit = self._set_member_cache.get(key)
        if hit is not None:
            return hit
        aset = self.atom_sets[set_name]
        out = self._label_in_set(label, aset)
        self._set_member_cache[key] = out
        return out

    def _label_in_set(self, label: ActionLabel, aset: AtomSet) -> bool:
        if label.kind != OBSERVABLE:
            return False
        quants = aset.quantifier_map()
        for _var, sort in aset.quantifiers:
            if sort not in self.sorts:
                raise UnknownSort(f"set {aset.name} quantifies over undeclared sort {sort}")
        for item in aset.items:
            if item.name != label.name or len(item.args) != len(label.args):
                continue
            bindings: dict | None = {}
            for pat, arg in zip(item.args, label.args):
                try:
                    bindings = match_pattern(pat, arg, bindings)
                except ConflictingBinding:
                    bindings = None
                if bindings is None:
                    break
            if bindings is None:
                continue
            if all(
                self.has_sort(val, quants[var])
                for var, val in bindings.items()
                if var in quants
            ):
                return True
        return False

    def try_communicate(self, a: ActionLabel, b: ActionLabel) -> ActionLabel | None:
        """Result label if atoms a and b communicate, else None."""
        if a.kind != OBSERVABLE or b.kind != OBSERVABLE:
            return None
        for rule in self.comm_rules:
            for x, y in ((a, b), (b, a)):
                out = self._apply_comm(rule, x, y)
                if out is not None:
                    return out
        return None

    def _apply_comm(self, rule: CommRule, x: ActionLabel, y: ActionLabel) -> ActionLabel | None:
        if rule.left.name != x.name or len(rule.left.args) != len(x.args):
            return None
        if rule.right.name != y.name or len(rule.right.args) != len(y.args):
            return None
        bindings: dict | None = {}
        for pat, arg in zip(rule.left.args + rule.right.args, x.args + y.args):
            try:
                bindings = match_pattern(pat, arg, bindings)
            except ConflictingBinding:
                return None
            if bindings is None:
                return None
        quants = dict(rule.quantifiers)
        for var, val in bindings.items():
            sort = quants.get(var)
            if sort is None:
                continue
            if sort not in self.sorts:
                raise UnknownSort(f"communication quantifies over undeclared sort {sort}")
            if not self.has_sort(val, sort):
                return None
        args = tuple(self.normalize_term(substitute(p, bindings)) for p in rule.result.args)
        return atom_label(rule.result.name, args)

    def rename_label(self, label: ActionLabel, map_name: str) -> ActionLabel:
        rmap: RenameMap = self.rename_maps[map_name]
        return rmap.rename_label(label)

    # -- guards and definitions ----------------------------------------------

    def guard_holds(self, lhs: Term, rhs: Term) -> bool:
        ln = self.normalize_term(lhs)
        rn = self.normalize_term(rhs)
        try:
            ls, rs = self.sort_of(ln), self.sort_of(rn)
        except UnknownSort:
            ls = rs = None
        if ls is not None and rs is not None and ls != rs:
            raise NonBooleanGuard(
                f"guard compares {term_text(ln)} : {ls} with {term_text(rn)} : {rs}"
            )
        return ln == rn

    def definition(self, name: str, nargs: int) -> ProcessDef:
        d = self.processes.get((name, nargs))
        if d is not None:
            return d
        other = [k for k in self.processes if k[0] == name]
        if other:
            raise ArityMismatch(name, other[0][1], nargs)
        raise UnknownProcess(name)

    def unfold(self, call: Call) -> Proc:
        d = self.definition(call.name, len(call.args))
        bindings = {
            var: self.normalize_term(arg)
            for (var, _sort), arg in zip(d.params, call.args)
        }
        return subst_proc(d.body, bindings) if bindings else d.body


def _cartesian(choices, cap):
    """Bounded cartesian product of lists of terms."""
    out = [()]
    for pool in choices:
        nxt = []
        for prefix in out:
            for item in pool:
                nxt.append(prefix + (item,))
                if len(nxt) >= cap:
                    break
            if len(nxt) >= cap:
                break
        out = nxt
    return out
