"""Flatten a parsed specification into one Environment.

Elaboration walks the import graph from a root module, applying parameter
binding ("P bound by [ formal -> actual ] to ActualModule") and renaming
("renamed by [ from -> to ]") as identifier substitutions over whole module
closures.  A renaming applies to every kind of identifier uniformly, so
renaming a process name also renames the like-named atom set in one stroke.

Name resolution happens in two stages: while flattening, each module's data
variables (declared `variables` plus set/communication quantifiers and
process parameters) become Var nodes and all other identifiers go through
the substitution; once every module is in, process-body applications are
resolved to Call (declared processes first) or Atom.  Anything structural
that is wrong but survivable is reported through checkWellFormed as a
Diagnostic rather than an exception.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    ArityMismatch,
    CyclicImport,
    DuplicateModule,
    NameClash,
    UnboundParameter,
    UnresolvedImport,
)
from .process import (
    Alt,
    Atom,
    Call,
    DELTA,
    Delta,
    Disrupt,
    Encaps,
    Environment,
    Guard,
    Hide,
    Merge,
    Prio,
    Proc,
    ProcApp,
    ProcessDef,
    Rename,
    Seq,
    Star,
)
from .syntax import ModuleAst, parse_spec
from .terms import (
    App,
    AtomPattern,
    AtomSet,
    CommRule,
    NAT,
    RewriteRule,
    RewriteSystem,
    Term,
    Var,
    term_text,
    term_vars,
)

BOOLEANS_SOURCE = """\
data module Booleans
begin
  exports
  begin
    sorts
      BOOLEAN
    functions
      true : -> BOOLEAN
      false : -> BOOLEAN
      not : BOOLEAN -> BOOLEAN
      and : BOOLEAN # BOOLEAN -> BOOLEAN
      or : BOOLEAN # BOOLEAN -> BOOLEAN
  end
  variables
    x : -> BOOLEAN
  equations
    [b1] not(true) = false
    [b2] not(false) = true
    [b3] and(true, x) = x
    [b4] and(false, x) = false
    [b5] or(true, x) = true
    [b6] or(false, x) = x
end Booleans
"""

_BUILTIN_MODULES = {m.name: m for m in parse_spec(BOOLEANS_SOURCE, "<builtin>")}


@dataclass(frozen=True)
class Diagnostic:
    severity: str           # "error" | "warning"
    message: str
    filename: str | None = None
    line: int = 0
    col: int = 1

    def __str__(self) -> str:
        return f"{self.filename or '<spec>'}:{self.line}:{self.col}: {self.severity}: {self.message}"


def _conv_term(t: Term, bound: set, phi: dict) -> Term:
    """Resolve bound zero-argument names to Var and substitute the rest."""
    if isinstance(t, Var):
        return t
    if not t.args and t.name in bound:
        return Var(t.name)
    return App(phi.get(t.name, t.name), tuple(_conv_term(a, bound, phi) for a in t.args))


def _conv_pattern(pat, bound: set, phi: dict) -> AtomPattern:
    name, args = pat
    return AtomPattern(phi.get(name, name), tuple(_conv_term(a, bound, phi) for a in args))


def _conv_proc(p: Proc, bound: set, phi: dict) -> Proc:
    if isinstance(p, ProcApp):
        return ProcApp(phi.get(p.name, p.name),
                       tuple(_conv_term(a, bound, phi) for a in p.args))
    if isinstance(p, Delta):
        return DELTA
    if isinstance(p, Guard):
        return Guard(_conv_term(p.lhs, bound, phi), _conv_term(p.rhs, bound, phi),
                     _conv_proc(p.body, bound, phi))
    if isinstance(p, (Seq, Alt, Merge, Disrupt, Star)):
        return type(p)(_conv_proc(p.left, bound, phi), _conv_proc(p.right, bound, phi))
    if isinstance(p, (Encaps, Hide, Prio, Rename)):
        name = p.map_name if isinstance(p, Rename) else p.set_name
        return type(p)(phi.get(name, name), _conv_proc(p.body, bound, phi))
    raise TypeError(f"cannot elaborate node {type(p).__name__}")


def _pattern_vars(args) -> set:
    out: set = set()
    for a in args:
        out |= term_vars(a)
    return out


class _Flattener:
    def __init__(self, modules: dict):
        self.modules = modules
        self.diags: list = []
        self.sorts: set = set()
        self.funcs: dict = {}
        self.atoms: dict = {}
        self.atom_sets: dict = {}
        self.comm_rules: list = []
        self._comm_seen: set = set()
        self.equations: list = []
        self._eq_seen: set = set()
        self.proc_decls: dict = {}   # (name, arity) -> arg sorts
        self.pending_defs: list = [] # (name, params, raw body, filename, line)
        self._memo: set = set()
        self._stack: list = []

    # -- plumbing -------------------------------------------------------------

    def diag(self, message: str, mod: ModuleAst, line: int = 0):
        self.diags.append(Diagnostic("error", message, mod.filename, line or mod.line))

    def _module(self, name: str, importer: str) -> ModuleAst:
        mod = self.modules.get(name) or _BUILTIN_MODULES.get(name)
        if mod is None:
            raise UnresolvedImport(name, importer)
        return mod

    # -- flattening -----------------------------------------------------------

    def flatten(self, name: str, phi: dict, dropped: frozenset, importer: str):
        mod = self._module(name, importer)
        if name in self._stack:
            raise CyclicImport(self._stack[self._stack.index(name):] + [name])
        key = (name, tuple(sorted(phi.items())), dropped)
        if key in self._memo:
            return
        self._memo.add(key)
        self._stack.append(name)
        try:
            for clause in mod.imports:
                self._import(mod, clause, phi)
            self._emit(mod, phi, dropped)
        finally:
            self._stack.pop()

    def _import(self, mod: ModuleAst, clause, phi: dict):
        target = self._module(clause.module, mod.name)
        blocks = {pb.name: pb for pb in target.parameters}
        pairs: list = []
        bound_blocks = set()
        for block_name, bpairs, actual in clause.bindings:
            block = blocks.get(block_name)
            if block is None:
                raise UnboundParameter(clause.module, block_name)
            formal_names = (
                set(block.decls.sorts)
                | {f.name for f in block.decls.functions}
                | {a.name for a in block.decls.atoms}
                | {p.name for p in block.decls.processes}
            )
            for formal, _actual_name in bpairs:
                if formal not in formal_names:
                    raise UnboundParameter(clause.module, formal)
            pairs.extend(bpairs)
            bound_blocks.add(block_name)
            # the module supplying the actuals is imported alongside
            self.flatten(actual, phi, frozenset(), mod.name)
        pairs.extend(clause.renamings)
        composed = dict(phi)
        composed.update({k: phi.get(v, v) for k, v in pairs})
        self.flatten(clause.module, composed, frozenset(bound_blocks), mod.name)

    def _emit(self, mod: ModuleAst, phi: dict, dropped: frozenset):
        groups = [mod.exports, mod.locals]
        groups.extend(pb.decls for pb in mod.parameters if pb.name not in dropped)
        self._check_sections(mod, groups)

        var_sorts: dict = {}
        for d in groups:
            for v in d.variables:
                var_sorts.setdefault(v.name, phi.get(v.sort, v.sort))
        module_vars = list(var_sorts)

        for d in groups:
            for s in d.sorts:
                self.sorts.add(phi.get(s, s))
            for f in d.functions:
                self._add_func(mod, f, phi)
            for a in d.atoms:
                self._add_atom(mod, a, phi)
            for p in d.processes:
                self._add_proc_decl(mod, p, phi)
        for d in groups:
            for s in d.sets:
                self._add_set(mod, s, phi, var_sorts, module_vars)
            for c in d.communications:
                self._add_comm(mod, c, phi, var_sorts, module_vars)
            for e in d.equations:
                self._add_equation(mod, e, phi, set(var_sorts))
        for d in groups:
            for pd in d.definitions:
                self._add_definition(mod, pd, phi)

    def _check_sections(self, mod: ModuleAst, groups):
        for d in groups:
            if mod.kind == "data":
                if d.communications:
                    self.diag("communications are only legal in process modules",
                              mod, d.communications[0].line)
                if d.definitions:
                    self.diag("process definitions are only legal in process modules",
                              mod, d.definitions[0].line)
            else:
                if d.equations:
                    self.diag("equations are only legal in data modules",
                              mod, d.equations[0].line)

    # -- declaration kinds ------------------------------------------------------

    def _add_func(self, mod, f, phi):
        name = phi.get(f.name, f.name)
        sig = (tuple(phi.get(s, s) for s in f.arg_sorts), phi.get(f.result, f.result))
        old = self.funcs.get((name, len(f.arg_sorts)))
        if old is not None and old != sig:
            raise NameClash(name, (f"function {name} : {' # '.join(old[0])} -> {old[1]}",
                                   f"function {name} : {' # '.join(sig[0])} -> {sig[1]}"))
        self.funcs[(name, len(f.arg_sorts))] = sig

    def _add_atom(self, mod, a, phi):
        name = phi.get(a.name, a.name)
        sig = tuple(phi.get(s, s) for s in a.arg_sorts)
        old = self.atoms.get((name, len(a.arg_sorts)))
        if old is not None and old != sig:
            raise NameClash(name, (f"atom {name} : {' # '.join(old)}",
                                   f"atom {name} : {' # '.join(sig)}"))
        self.atoms[(name, len(a.arg_sorts))] = sig

    def _add_proc_decl(self, mod, p, phi):
        name = phi.get(p.name, p.name)
        sig = tuple(phi.get(s, s) for s in p.arg_sorts)
        old = self.proc_decls.get((name, len(p.arg_sorts)))
        if old is not None and old != sig:
            raise NameClash(name, (f"process {name} : {' # '.join(old)}",
                                   f"process {name} : {' # '.join(sig)}"))
        self.proc_decls[(name, len(p.arg_sorts))] = sig

    def _quantifiers(self, explicit, used_vars, var_sorts, module_vars, phi):
        """Explicit quantifiers (renamed sorts) plus module variables that
        actually occur, in declaration order."""
        quants = [(v, phi.get(s, s)) for v, s in explicit]
        explicit_names = {v for v, _ in quants}
        for v in module_vars:
            if v in used_vars and v not in explicit_names:
                quants.append((v, var_sorts[v]))
        return tuple(quants)

    def _add_set(self, mod, s, phi, var_sorts, module_vars):
        bound = {v for v, _ in s.quantifiers} | set(var_sorts)
        items = tuple(_conv_pattern(i, bound, phi) for i in s.items)
        used = set()
        for it in items:
            used |= _pattern_vars(it.args)
        quants = self._quantifiers(s.quantifiers, used, var_sorts, module_vars, phi)
        name = phi.get(s.name, s.name)
        new = AtomSet(name, items, quants)
        old = self.atom_sets.get(name)
        if old is not None and old != new:
            raise NameClash(name, (f"set {name} = {old.items}", f"set {name} = {new.items}"))
        self.atom_sets[name] = new

    def _add_comm(self, mod, c, phi, var_sorts, module_vars):
        bound = {v for v, _ in c.quantifiers} | set(var_sorts)
        left = _conv_pattern(c.left, bound, phi)
        right = _conv_pattern(c.right, bound, phi)
        result = _conv_pattern(c.result, bound, phi)
        used = _pattern_vars(left.args) | _pattern_vars(right.args) | _pattern_vars(result.args)
        quants = self._quantifiers(c.quantifiers, used, var_sorts, module_vars, phi)
        rule = CommRule(left, right, result, quants)
        if rule not in self._comm_seen:
            self._comm_seen.add(rule)
            self.comm_rules.append(rule)
            fresh = _pattern_vars(result.args) - (_pattern_vars(left.args) | _pattern_vars(right.args))
            if fresh:
                self.diag(
                    f"communication result uses variables {sorted(fresh)} "
                    "that appear on neither side", mod, c.line,
                )

    def _add_equation(self, mod, e, phi, bound):
        lhs = _conv_term(e.lhs, bound, phi)
        rhs = _conv_term(e.rhs, bound, phi)
        rule = RewriteRule(lhs, rhs, e.tag)
        if rule in self._eq_seen:
            return
        self._eq_seen.add(rule)
        self.equations.append(rule)
        fresh = term_vars(rhs) - term_vars(lhs)
        if fresh:
            self.diag(
                f"equation right-hand side introduces fresh variables {sorted(fresh)}",
                mod, e.line,
            )

    def _add_definition(self, mod, pd, phi):
        name = phi.get(pd.name, pd.name)
        arity = len(pd.params)
        sig = self.proc_decls.get((name, arity))
        if sig is None:
            declared = [k[1] for k in self.proc_decls if k[0] == name]
            if declared:
                raise ArityMismatch(name, declared[0], arity)
            self.diag(f"process {name} is defined but never declared", mod, pd.line)
            sig = ("?",) * arity
            self.proc_decls[(name, arity)] = sig
        params = tuple(zip(pd.params, sig))
        body = _conv_proc(pd.body, set(pd.params), phi)
        self.pending_defs.append((name, params, body, mod.filename, pd.line))

    # -- finishing --------------------------------------------------------------

    def _resolve_apps(self, p: Proc, filename, line) -> Proc:
        if isinstance(p, ProcApp):
            key = (p.name, len(p.args))
            if key in self.proc_decls:
                return Call(p.name, p.args)
            if key in self.atoms:
                return Atom(p.name, p.args)
            self.diags.append(Diagnostic(
                "error",
                f"UnknownProcess: {p.name}/{len(p.args)} is neither a declared "
                "process nor a declared atom",
                filename, line,
            ))
            return Atom(p.name, p.args)
        if isinstance(p, Guard):
            return Guard(p.lhs, p.rhs, self._resolve_apps(p.body, filename, line))
        if isinstance(p, (Seq, Alt, Merge, Disrupt, Star)):
            return type(p)(self._resolve_apps(p.left, filename, line),
                           self._resolve_apps(p.right, filename, line))
        if isinstance(p, (Encaps, Hide, Prio, Rename)):
            name = p.map_name if isinstance(p, Rename) else p.set_name
            return type(p)(name, self._resolve_apps(p.body, filename, line))
        return p

    def finish(self) -> Environment:
        processes: dict = {}
        def_spans: dict = {}
        for name, params, body, filename, line in self.pending_defs:
            resolved = self._resolve_apps(body, filename, line)
            pdef = ProcessDef(name, params, resolved)
            key = (name, len(params))
            old = processes.get(key)
            if old is not None and old != pdef:
                raise NameClash(name, (f"definition of {name}/{len(params)}",
                                       f"conflicting definition of {name}/{len(params)}"))
            processes[key] = pdef
            def_spans[key] = (filename, line)
        env = Environment(
            rewrite=RewriteSystem(self.equations),
            funcs=self.funcs,
            atoms=self.atoms,
            atom_sets=self.atom_sets,
            comm_rules=self.comm_rules,
            rename_maps={},
            processes=processes,
            sorts=self.sorts,
            process_decls=set(self.proc_decls),
            diagnostics=self.diags,
        )
        env.definition_spans = def_spans
        return env


def elaborate(modules, root: str) -> Environment:
    """Flatten the import closure of `root` into an Environment."""
    mmap: dict = {}
    for m in modules:
        if m.name in mmap:
            raise DuplicateModule(m.name)
        mmap[m.name] = m
    fl = _Flattener(mmap)
    fl.flatten("Booleans", {}, frozenset(), "<builtin>")
    fl.flatten(root, {}, frozenset(), "<root>")
    return fl.finish()


# --- static checks --------------------------------------------------------------


def _static_sort(t: Term, var_sorts: dict, env: Environment):
    if isinstance(t, Var):
        sort = var_sorts.get(t.name)
        return None if sort in (None, "?") else sort
    if not t.args and t.name.isdigit():
        return NAT
    info = env.funcs.get((t.name, len(t.args)))
    return info[1] if info else None


def _walk_proc(p: Proc):
    yield p
    if isinstance(p, Guard):
        yield from _walk_proc(p.body)
    elif isinstance(p, (Seq, Alt, Merge, Disrupt, Star)):
        yield from _walk_proc(p.left)
        yield from _walk_proc(p.right)
    elif isinstance(p, (Encaps, Hide, Prio, Rename)):
        yield from _walk_proc(p.body)


def checkWellFormed(env: Environment) -> list:
    """All structural diagnostics for an elaborated Environment; empty means
    the specification is ready for the step engine."""
    out = list(env.diagnostics)
    spans = getattr(env, "definition_spans", {})

    def diag(message, key):
        filename, line = spans.get(key, (None, 0))
        out.append(Diagnostic("error", message, filename, line))

    for key, pdef in env.processes.items():
        var_sorts = dict(pdef.params)
        for node in _walk_proc(pdef.body):
            if isinstance(node, Call):
                ckey = (node.name, len(node.args))
                if ckey not in env.processes:
                    diag(f"UnknownProcess: {node.name}/{len(node.args)} is declared "
                         "but has no definition", key)
            elif isinstance(node, Guard):
                ls = _static_sort(node.lhs, var_sorts, env)
                rs = _static_sort(node.rhs, var_sorts, env)
                if ls is not None and rs is not None and ls != rs:
                    diag(f"NonBooleanGuard: guard compares {term_text(node.lhs)} : {ls} "
                         f"with {term_text(node.rhs)} : {rs}", key)
            elif isinstance(node, (Encaps, Hide, Prio)):
                if node.set_name not in env.atom_sets:
                    diag(f"unknown atom set {node.set_name}", key)
            elif isinstance(node, Rename):
                if node.map_name not in env.rename_maps:
                    diag(f"unknown rename map {node.map_name}", key)

    for aset in env.atom_sets.values():
        for _v, sort in aset.quantifiers:
            if sort not in env.sorts:
                out.append(Diagnostic(
                    "error", f"set {aset.name} quantifies over undeclared sort {sort}"))
            elif not env.inhabitants(sort):
                out.append(Diagnostic(
                    "error", f"sort {sort}, quantified in set {aset.name}, has no "
                    "ground inhabitants"))
    for rule in env.comm_rules:
        for _v, sort in rule.quantifiers:
            if sort not in env.sorts:
                out.append(Diagnostic(
                    "error",
                    f"communication {rule.left.name} | {rule.right.name} quantifies "
                    f"over undeclared sort {sort}"))
            elif not env.inhabitants(sort):
                out.append(Diagnostic(
                    "error",
                    f"sort {sort}, quantified in communication "
                    f"{rule.left.name} | {rule.right.name}, has no ground inhabitants"))

    seen = set()
    unique = []
    for d in out:
        if d not in seen:
            seen.add(d)
            unique.append(d)
    return unique
