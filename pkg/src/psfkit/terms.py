"""First-order data terms, rewriting, action labels, and atom/communication
tables.

Terms are immutable and hashable (hashes are precomputed so deep terms stay
cheap to use as dict keys). Rewriting is unconditional, first match wins in
declaration order, and reduction is leftmost-innermost with a fuel budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConflictingBinding, FuelExhausted, UnboundVariable

# Sort used for integer literals (history ids, choice indices, ...).
NAT = "NAT"


class Term:
    """Base class for data terms. Subclasses: Var, App."""

    __slots__ = ()


class Var(Term):
    """A data variable. Which names are variables is decided by context
    (module variable declarations / quantifier clauses), not by spelling."""

    __slots__ = ("name", "_hash")

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "_hash", hash(("var", name)))

    def __setattr__(self, *a):  # immutable
        raise AttributeError("Var is immutable")

    def __eq__(self, other):
        return isinstance(other, Var) and other.name == self.name

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Var({self.name})"

    def __str__(self):
        return self.name


class App(Term):
    """A constructor application; constants are zero-argument Apps."""

    __slots__ = ("name", "args", "_hash")

    def __init__(self, name: str, args: tuple = ()):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "args", tuple(args))
        object.__setattr__(self, "_hash", hash(("app", name, self.args)))

    def __setattr__(self, *a):
        raise AttributeError("App is immutable")

    def __eq__(self, other):
        return (
            self is other
            or (
                isinstance(other, App)
                and other._hash == self._hash
                and other.name == self.name
                and other.args == self.args
            )
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"App({self.name}, {self.args!r})" if self.args else f"App({self.name})"

    def __str__(self):
        return term_text(self)


# Binary operators printed infix. ">>" builds connections between identities.
INFIX_NAMES = {">>"}


def term_text(t: Term) -> str:
    """Render a term in concrete syntax (round-trips through parse_term)."""
    if isinstance(t, Var):
        return t.name
    if t.name in INFIX_NAMES and len(t.args) == 2:
        return f"{_paren(t.args[0])} {t.name} {_paren(t.args[1])}"
    if not t.args:
        return t.name
    return t.name + "(" + ", ".join(term_text(a) for a in t.args) + ")"


def _paren(t: Term) -> str:
    if isinstance(t, App) and t.name in INFIX_NAMES and len(t.args) == 2:
        return "(" + term_text(t) + ")"
    return term_text(t)


def is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    return all(is_ground(a) for a in t.args)


def term_vars(t: Term, acc=None) -> set:
    """Names of all variables occurring in t."""
    if acc is None:
        acc = set()
    if isinstance(t, Var):
        acc.add(t.name)
    else:
        for a in t.args:
            term_vars(a, acc)
    return acc


def match_pattern(pattern: Term, subject: Term, bindings: dict | None = None) -> dict | None:
    """Match subject against pattern, extending bindings.

    Returns the binding map, or None if the structures disagree. A repeated
    variable must bind the same term twice; a disagreement raises
    ConflictingBinding (callers that just want "no match" catch it — the
    rewrite engine treats it as match failure so non-linear rules like
    equal(x, x) simply do not fire on distinct arguments).
    """
    if bindings is None:
        bindings = {}
    if isinstance(pattern, Var):
        prev = bindings.get(pattern.name)
        if prev is None:
            bindings[pattern.name] = subject
            return bindings
        if prev == subject:
            return bindings
        raise ConflictingBinding(pattern.name, prev, subject)
    if not isinstance(subject, App):
        return None
    if pattern.name != subject.name or len(pattern.args) != len(subject.args):
        return None
    for p, s in zip(pattern.args, subject.args):
        if match_pattern(p, s, bindings) is None:
            return None
    return bindings


def substitute(t: Term, bindings: dict) -> Term:
    """Replace every variable in t by its binding (UnboundVariable if absent)."""
    if isinstance(t, Var):
        try:
            return bindings[t.name]
        except KeyError:
            raise UnboundVariable(t.name) from None
    if not t.args:
        return t
    return App(t.name, tuple(substitute(a, bindings) for a in t.args))


@dataclass(frozen=True)
class RewriteRule:
    lhs: App
    rhs: Term
    tag: str = ""

    def __str__(self):
        label = f"[{self.tag}] " if self.tag else ""
        return f"{label}{term_text(self.lhs)} = {term_text(self.rhs)}"


class RewriteSystem:
    """Ordered unconditional rewrite rules, indexed by head symbol.

    Ground normal forms are cached (sound: rules never change once built).
    """

    def __init__(self, rules=()):
        self.rules: list[RewriteRule] = list(rules)
        self._by_head: dict[tuple, list[RewriteRule]] = {}
        for r in self.rules:
            self._by_head.setdefault((r.lhs.name, len(r.lhs.args)), []).append(r)
        self._cache: dict[Term, Term] = {}

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)

    def rules_for(self, name: str, arity: int):
        return self._by_head.get((name, arity), ())


DEFAULT_FUEL = 10_000


def normalize(t: Term, rs: RewriteSystem, fuel: int = DEFAULT_FUEL) -> Term:
    """Leftmost-innermost normal form of t under rs.

    fuel counts rule applications; FuelExhausted carries the term being
    reduced when the budget runs out.
    """
    budget = [fuel]
    out = _normalize(t, rs, budget)
    return out


def _normalize(t: Term, rs: RewriteSystem, budget: list) -> Term:
    if isinstance(t, Var):
        return t
    cached = rs._cache.get(t)
    if cached is not None:
        return cached
    orig = t
    ground = True
    if t.args:
        new_args = []
        for a in t.args:
            na = _normalize(a, rs, budget)
            if not isinstance(na, App):
                ground = False
            new_args.append(na)
        t = App(t.name, tuple(new_args))
    # Reduce at the root until no rule applies, renormalizing any redexes
    # a right-hand side introduces.
    while True:
        rule = None
        bindings = None
        for r in rs.rules_for(t.name, len(t.args)):
            try:
                b = match_pattern(r.lhs, t, {})
            except ConflictingBinding:
                b = None
            if b is not None:
                rule, bindings = r, b
                break
        if rule is None:
            break
        if budget[0] <= 0:
            raise FuelExhausted(t, budget[0])
        budget[0] -= 1
        t = substitute(rule.rhs, bindings)
        t = _normalize(t, rs, budget)
        break
    if ground and isinstance(t, App) and is_ground(orig):
        rs._cache[orig] = t
        rs._cache[t] = t
    return t


# --- action labels ---------------------------------------------------------

OBSERVABLE = "observable"
SILENT = "silent"
TICK = "tick"


class ActionLabel:
    """A transition label: an observable atom with data arguments, the
    silent step, or the termination tick (internal marker; ticks never land
    in stored traces)."""

    __slots__ = ("kind", "name", "args", "_hash", "_text")

    def __init__(self, kind: str, name: str = "", args: tuple = ()):
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "args", tuple(args))
        object.__setattr__(self, "_hash", hash((kind, name, self.args)))
        object.__setattr__(self, "_text", None)

    def __setattr__(self, *a):
        raise AttributeError("ActionLabel is immutable")

    def __eq__(self, other):
        return (
            self is other
            or (
                isinstance(other, ActionLabel)
                and other._hash == self._hash
                and other.kind == self.kind
                and other.name == self.name
                and other.args == self.args
            )
        )

    def __hash__(self):
        return self._hash

    @property
    def text(self) -> str:
        cached = self._text
        if cached is None:
            if self.kind == SILENT:
                cached = "tau"
            elif self.kind == TICK:
                cached = "tick"
            elif self.args:
                cached = self.name + "(" + ", ".join(term_text(a) for a in self.args) + ")"
            else:
                cached = self.name
            object.__setattr__(self, "_text", cached)
        return cached

    def __str__(self):
        return self.text

    def __repr__(self):
        return f"<{self.text}>"


TAU = ActionLabel(SILENT)
TICK_LABEL = ActionLabel(TICK)


def atom_label(name: str, args: tuple = ()) -> ActionLabel:
    return ActionLabel(OBSERVABLE, name, args)


# --- atom sets -------------------------------------------------------------

@dataclass(frozen=True)
class AtomPattern:
    """An atom name with argument patterns (Vars bound by quantifiers)."""

    name: str
    args: tuple = ()

    def __str__(self):
        if not self.args:
            return self.name
        return self.name + "(" + ", ".join(term_text(a) for a in self.args) + ")"


@dataclass(frozen=True)
class AtomSet:
    """A finite description of a set of action labels: patterns plus sort
    quantifiers for their variables, e.g. { snd(c, s) | c in CONNECTION }."""

    name: str
    items: tuple = ()          # tuple[AtomPattern]
    quantifiers: tuple = ()    # tuple[(var name, sort name)]

    def quantifier_map(self) -> dict:
        return dict(self.quantifiers)

    def __str__(self):
        body = ", ".join(str(i) for i in self.items)
        if self.quantifiers:
            body += " | " + ", ".join(f"{v} in {s}" for v, s in self.quantifiers)
        return "{ " + body + " }"


@dataclass(frozen=True)
class CommRule:
    """left | right = result, with quantified variables shared across all
    three patterns."""

    left: AtomPattern
    right: AtomPattern
    result: AtomPattern
    quantifiers: tuple = ()

    def __str__(self):
        s = f"{self.left} | {self.right} = {self.result}"
        if self.quantifiers:
            s += " for " + ", ".join(f"{v} in {so}" for v, so in self.quantifiers)
        return s


@dataclass(frozen=True)
class RenamePair:
    """One rename: bare identifiers rename any same-named thing keeping
    arguments; patterned pairs rewrite matching labels wholesale."""

    from_name: str
    to_name: str
    from_args: tuple | None = None
    to_args: tuple | None = None

    def __str__(self):
        def side(name, args):
            if args is None:
                return name
            return str(AtomPattern(name, args))
        return f"{side(self.from_name, self.from_args)} -> {side(self.to_name, self.to_args)}"


@dataclass(frozen=True)
class RenameMap:
    pairs: tuple = ()

    def rename_identifier(self, name: str) -> str:
        for p in self.pairs:
            if p.from_args is None and p.from_name == name:
                return p.to_name
        return name

    def rename_label(self, label: ActionLabel) -> ActionLabel:
        if label.kind != OBSERVABLE:
            return label
        for p in self.pairs:
            if p.from_args is None:
                if p.from_name == label.name:
                    return atom_label(p.to_name, label.args)
                continue
            if p.from_name != label.name or len(p.from_args) != len(label.args):
                continue
            bindings: dict | None = {}
            for pat, arg in zip(p.from_args, label.args):
                try:
                    bindings = match_pattern(pat, arg, bindings)
                except ConflictingBinding:
                    bindings = None
                if bindings is None:
                    break
            if bindings is None:
                continue
            to_args = p.to_args if p.to_args is not None else p.from_args
            return atom_label(p.to_name, tuple(substitute(a, bindings) for a in to_args))
        return label
