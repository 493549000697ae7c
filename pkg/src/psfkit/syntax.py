"""Surface syntax: lexer, parser, AST, and pretty-printer for the modular
specification language (`.psf` files).

The AST mirrors the written module structure (exports, parameters, imports,
declaration sections); process bodies parse into the expression nodes from
`process`, with name applications left unresolved as ProcApp until
elaboration. Printing an AST and re-parsing it yields an equal AST.

Lexical notes: identifiers may contain interior hyphens and primes
(action-choose-list, tb1'); `_ >> _ : ID # ID -> CONNECTION` declares the
infix connection constructor; a line whose first non-blank character is `#`
is a comment (elsewhere `#` separates argument sorts); `->` may also be
written `→`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import DuplicateModule, ParseError
from .process import (
    Alt,
    DELTA,
    Disrupt,
    Encaps,
    Guard,
    Hide,
    Merge,
    Prio,
    Proc,
    ProcApp,
    Rename,
    Seq,
    Star,
    proc_text,
)
from .terms import App, Term, Var, term_text

KEYWORDS = {
    "data", "process", "module", "begin", "end", "exports", "imports",
    "parameters", "sorts", "functions", "atoms", "processes", "sets", "of",
    "communications", "variables", "equations", "definitions", "bound", "by",
    "to", "renamed", "in", "for", "encaps", "hide", "rename", "prio",
    "disrupt", "delta",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ident>[A-Za-z](?:[A-Za-z0-9']|-(?=[A-Za-z0-9]))*)
  | (?P<number>[0-9]+)
  | (?P<wild>\$[0-9]+)
  | (?P<sym>=>|->|→|>>|\|\||[.+*()\[\]{},=:#|><_'])
  | (?P<ws>[ \t\r]+)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str       # ident | number | wild | sym | eof
    value: str
    line: int
    col: int


def lex(text: str, filename: str | None = None) -> list:
    tokens = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.lstrip()
        if stripped.startswith("#"):
            continue
        pos = 0
        while pos < len(line):
            m = _TOKEN_RE.match(line, pos)
            if m is None:
                raise ParseError(f"unexpected character {line[pos]!r}", lineno, pos + 1, filename)
            pos = m.end()
            kind = m.lastgroup
            if kind == "ws":
                continue
            value = m.group()
            if kind == "sym" and value == "→":
                value = "->"
            tokens.append(Token(kind, value, lineno, m.start() + 1))
    eof_line = text.count("\n") + 1
    tokens.append(Token("eof", "", eof_line, 1))
    return tokens


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class FuncDecl:
    name: str
    arg_sorts: tuple
    result: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class AtomDecl:
    name: str
    arg_sorts: tuple = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ProcDecl:
    name: str
    arg_sorts: tuple = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class VarDecl:
    name: str
    sort: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SetDecl:
    name: str
    items: tuple            # tuple[(atom name, tuple[Term])]
    quantifiers: tuple = ()  # tuple[(var, sort)]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CommDecl:
    left: tuple             # (name, tuple[Term])
    right: tuple
    result: tuple
    quantifiers: tuple = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class EqDecl:
    lhs: Term
    rhs: Term
    tag: str = ""
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ProcDefDecl:
    name: str
    params: tuple           # tuple[str] — variable names
    body: Proc
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Decls:
    """One bundle of declaration sections (used for exports, parameter
    blocks, and module-local sections alike)."""

    sorts: tuple = ()
    functions: tuple = ()
    atoms: tuple = ()
    processes: tuple = ()
    sets: tuple = ()
    communications: tuple = ()
    variables: tuple = ()
    equations: tuple = ()
    definitions: tuple = ()

    def is_empty(self) -> bool:
        return not any(
            (self.sorts, self.functions, self.atoms, self.processes, self.sets,
             self.communications, self.variables, self.equations, self.definitions)
        )


@dataclass(frozen=True)
class ParamBlock:
    name: str
    decls: Decls


@dataclass(frozen=True)
class ImportClause:
    module: str
    bindings: tuple = ()    # tuple[(param block, tuple[(formal, actual)], actual module)]
    renamings: tuple = ()   # tuple[(from, to)]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ModuleAst:
    kind: str               # "data" | "process"
    name: str
    parameters: tuple = ()
    exports: Decls = Decls()
    imports: tuple = ()
    locals: Decls = Decls()
    line: int = field(default=0, compare=False)
    filename: str | None = field(default=None, compare=False)


_SECTION_NAMES = (
    "sorts", "functions", "atoms", "processes", "sets",
    "communications", "variables", "equations", "definitions",
)


class _Parser:
    def __init__(self, tokens: list, filename: str | None):
        self.tokens = tokens
        self.pos = 0
        self.filename = filename

    # -- plumbing ----------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col, self.filename)

    def at(self, value: str) -> bool:
        return self.peek().value == value and self.peek().kind in ("sym", "ident")

    def accept(self, value: str) -> bool:
        if self.at(value):
            self.next()
            return True
        return False

    def expect(self, value: str) -> Token:
        tok = self.peek()
        if not self.accept(value):
            self.fail(f"expected {value!r}, found {tok.value!r}" if tok.kind != "eof"
                      else f"expected {value!r}, found end of input", tok)
        return tok

    def ident(self, what: str = "identifier") -> str:
        tok = self.peek()
        if tok.kind != "ident" or tok.value in KEYWORDS:
            self.fail(f"expected {what}, found {tok.value!r}", tok)
        self.next()
        return tok.value

    # -- top level -----------------------------------------------------------

    def spec(self) -> list:
        modules = []
        names = set()
        while self.peek().kind != "eof":
            m = self.module()
            if m.name in names:
                raise DuplicateModule(m.name)
            names.add(m.name)
            modules.append(m)
        return modules

    def module(self) -> ModuleAst:
        start = self.peek()
        if self.accept("data"):
            kind = "data"
        elif self.accept("process"):
            kind = "process"
        else:
            self.fail("expected 'data module' or 'process module'")
        self.expect("module")
        name = self.ident("module name")
        self.expect("begin")
        parameters = []
        exports = Decls()
        imports = []
        local_sections: dict = {}
        while not self.at("end"):
            if self.accept("parameters"):
                parameters.extend(self.param_blocks())
            elif self.accept("exports"):
                self.expect("begin")
                exports = self.decls(stop={"end"})
                self.expect("end")
            elif self.accept("imports"):
                imports.append(self.import_clause())
                while self.accept(","):
                    imports.append(self.import_clause())
            elif self.peek().value in _SECTION_NAMES:
                section, items = self.section()
                local_sections.setdefault(section, []).extend(items)
            else:
                self.fail(f"unexpected {self.peek().value!r} in module body")
        self.expect("end")
        end_name = self.ident("module name")
        if end_name != name:
            self.fail(f"module {name} ends with name {end_name}")
        return ModuleAst(
            kind, name, tuple(parameters), exports, tuple(imports),
            Decls(**{k: tuple(v) for k, v in local_sections.items()}),
            line=start.line, filename=self.filename,
        )

    def param_blocks(self) -> list:
        blocks = []
        while True:
            name = self.ident("parameter name")
            self.expect("begin")
            decls = self.decls(stop={"end"})
            self.expect("end")
            end_name = self.ident("parameter name")
            if end_name != name:
                self.fail(f"parameter block {name} ends with name {end_name}")
            blocks.append(ParamBlock(name, decls))
            if not self.accept(","):
                break
        return blocks

    def import_clause(self) -> ImportClause:
        start = self.peek()
        module = self.ident("module name")
        bindings = []
        renamings = []
        if self.accept("{"):
            while not self.at("}"):
                if self.accept("renamed"):
                    self.expect("by")
                    renamings.extend(self.rename_pairs())
                else:
                    param = self.ident("parameter name")
                    self.expect("bound")
                    self.expect("by")
                    pairs = self.rename_pairs()
                    self.expect("to")
                    actual = self.ident("module name")
                    bindings.append((param, tuple(pairs), actual))
            self.expect("}")
        return ImportClause(module, tuple(bindings), tuple(renamings), line=start.line)

    def rename_pairs(self) -> list:
        self.expect("[")
        pairs = []
        while True:
            frm = self.ident()
            self.expect("->")
            to = self.ident()
            pairs.append((frm, to))
            if not self.accept(","):
                break
        self.expect("]")
        return pairs

    # -- declaration sections -------------------------------------------------

    def decls(self, stop: set) -> Decls:
        sections: dict = {}
        while self.peek().value not in stop and self.peek().kind != "eof":
            if self.peek().value not in _SECTION_NAMES:
                self.fail(f"unexpected {self.peek().value!r} in declarations")
            section, items = self.section()
            sections.setdefault(section, []).extend(items)
        return Decls(**{k: tuple(v) for k, v in sections.items()})

    def section(self):
        keyword = self.next().value
        if keyword == "sorts":
            return "sorts", self.name_list()
        if keyword == "functions":
            return "functions", self.func_decls()
        if keyword == "atoms":
            return "atoms", [AtomDecl(n, tuple(s), line=ln) for n, s, ln in self.typed_names()]
        if keyword == "processes":
            return "processes", [ProcDecl(n, tuple(s), line=ln) for n, s, ln in self.typed_names()]
        if keyword == "sets":
            self.expect("of")
            self.expect("atoms")
            return "sets", self.set_decls()
        if keyword == "communications":
            return "communications", self.comm_decls()
        if keyword == "variables":
            return "variables", self.var_decls()
        if keyword == "equations":
            return "equations", self.eq_decls()
        if keyword == "definitions":
            return "definitions", self.def_decls()
        self.fail(f"unknown section {keyword!r}")

    def _at_decl_start(self) -> bool:
        tok = self.peek()
        return (tok.kind == "ident" and tok.value not in KEYWORDS) or tok.value == "_"

    def name_list(self) -> list:
        names = [self.ident("sort name")]
        while self.accept(","):
            names.append(self.ident("sort name"))
        return names

    def func_decls(self) -> list:
        out = []
        while self._at_decl_start():
            line = self.peek().line
            if self.accept("_"):
                self.expect(">>")
                self.expect("_")
                name = ">>"
            else:
                name = self.ident("function name")
            self.expect(":")
            arg_sorts = []
            if not self.at("->"):
                arg_sorts.append(self.ident("sort name"))
                while self.accept("#"):
                    arg_sorts.append(self.ident("sort name"))
            self.expect("->")
            result = self.ident("sort name")
            out.append(FuncDecl(name, tuple(arg_sorts), result, line=line))
        return out

    def typed_names(self) -> list:
        """Atom/process declarations: NAME [: SORT (# SORT)*]."""
        out = []
        while self._at_decl_start():
            line = self.peek().line
            name = self.ident()
            sorts = []
            if self.accept(":"):
                sorts.append(self.ident("sort name"))
                while self.accept("#"):
                    sorts.append(self.ident("sort name"))
            out.append((name, sorts, line))
        return out

    def var_decls(self) -> list:
        out = []
        while self._at_decl_start():
            line = self.peek().line
            name = self.ident("variable name")
            self.expect(":")
            self.expect("->")
            out.append(VarDecl(name, self.ident("sort name"), line=line))
        return out

    def set_decls(self) -> list:
        out = []
        while self._at_decl_start():
            start = self.peek()
            name = self.ident("set name")
            self.expect("=")
            self.expect("{")
            items = []
            quants = []
            if not self.at("}"):
                items.append(self.atom_pattern())
                while self.accept(","):
                    items.append(self.atom_pattern())
                if self.accept("|"):
                    quants = self.quantifiers()
            self.expect("}")
            out.append(SetDecl(name, tuple(items), tuple(quants), line=start.line))
        return out

    def comm_decls(self) -> list:
        out = []
        while self._at_decl_start():
            start = self.peek()
            left = self.atom_pattern()
            self.expect("|")
            right = self.atom_pattern()
            self.expect("=")
            result = self.atom_pattern()
            quants = []
            if self.accept("for"):
                quants = self.quantifiers()
            out.append(CommDecl(left, right, result, tuple(quants), line=start.line))
        return out

    def quantifiers(self) -> list:
        quants = []
        while True:
            var = self.ident("variable name")
            self.expect("in")
            quants.append((var, self.ident("sort name")))
            if not self.accept(","):
                break
        return quants

    def atom_pattern(self):
        name = self.ident("atom name")
        args = []
        if self.accept("("):
            args.append(self.term())
            while self.accept(","):
                args.append(self.term())
            self.expect(")")
        return (name, tuple(args))

    def eq_decls(self) -> list:
        out = []
        while self._at_decl_start() or self.at("["):
            start = self.peek()
            tag = ""
            if self.accept("["):
                parts = []
                while not self.at("]") and self.peek().kind != "eof":
                    parts.append(self.next().value)
                self.expect("]")
                tag = "".join(parts)
            lhs = self.term()
            self.expect("=")
            rhs = self.term()
            out.append(EqDecl(lhs, rhs, tag, line=start.line))
        return out

    def def_decls(self) -> list:
        out = []
        while self._at_decl_start():
            start = self.peek()
            name = self.ident("process name")
            params = []
            if self.accept("("):
                params.append(self.ident("parameter variable"))
                while self.accept(","):
                    params.append(self.ident("parameter variable"))
                self.expect(")")
            self.expect("=")
            body = self.pexpr()
            out.append(ProcDefDecl(name, tuple(params), body, line=start.line))
        return out

    # -- terms ----------------------------------------------------------------

    def term(self, wildcards: bool = False) -> Term:
        left = self.term_factor(wildcards)
        if self.at(">>"):
            self.next()
            right = self.term_factor(wildcards)
            return App(">>", (left, right))
        return left

    def term_factor(self, wildcards: bool) -> Term:
        tok = self.peek()
        if tok.kind == "number":
            self.next()
            return App(tok.value)
        if tok.kind == "wild":
            if not wildcards:
                self.fail("wildcards are only allowed in mapping and communication patterns")
            self.next()
            return Var(tok.value)
        if self.accept("("):
            inner = self.term(wildcards)
            self.expect(")")
            return inner
        name = self.ident("term")
        args = []
        if self.accept("("):
            args.append(self.term(wildcards))
            while self.accept(","):
                args.append(self.term(wildcards))
            self.expect(")")
        return App(name, tuple(args))

    # -- process expressions ----------------------------------------------------

    def pexpr(self) -> Proc:
        return self.p_alt()

    def p_alt(self) -> Proc:
        left = self.p_merge()
        while self.accept("+"):
            left = Alt(left, self.p_merge())
        return left

    def p_merge(self) -> Proc:
        left = self.p_star()
        while self.accept("||"):
            left = Merge(left, self.p_star())
        return left

    def p_star(self) -> Proc:
        left = self.p_seq()
        while self.accept("*"):
            left = Star(left, self.p_seq())
        return left

    def p_seq(self) -> Proc:
        # A guard covers the rest of its sequence (it stops at +, ||, *, or a
        # closing bracket).
        if self.at("["):
            self.next()
            lhs = self.term()
            self.expect("=")
            rhs = self.term()
            self.expect("]")
            self.expect("->")
            return Guard(lhs, rhs, self.p_seq())
        left = self.p_primary()
        if self.accept("."):
            return Seq(left, self.p_seq())
        return left

    def p_primary(self) -> Proc:
        if self.accept("delta"):
            return DELTA
        if self.accept("("):
            inner = self.p_alt()
            self.expect(")")
            return inner
        if self.accept("encaps"):
            self.expect("(")
            set_name = self.ident("set name")
            self.expect(",")
            body = self.p_alt()
            self.expect(")")
            return Encaps(set_name, body)
        if self.accept("hide"):
            self.expect("(")
            set_name = self.ident("set name")
            self.expect(",")
            body = self.p_alt()
            self.expect(")")
            return Hide(set_name, body)
        if self.accept("rename"):
            self.expect("(")
            map_name = self.ident("rename map name")
            self.expect(",")
            body = self.p_alt()
            self.expect(")")
            return Rename(map_name, body)
        if self.accept("prio"):
            self.expect("(")
            set_name = self.ident("set name")
            self.expect(">")
            self.expect("atoms")
            self.expect(",")
            body = self.p_alt()
            self.expect(")")
            return Prio(set_name, body)
        if self.accept("disrupt"):
            self.expect("(")
            left = self.p_alt()
            self.expect(",")
            right = self.p_alt()
            self.expect(")")
            return Disrupt(left, right)
        name = self.ident("process or atom name")
        args = []
        if self.accept("("):
            args.append(self.term())
            while self.accept(","):
                args.append(self.term())
            self.expect(")")
        return ProcApp(name, tuple(args))


def parse_spec(text: str, filename: str | None = None) -> list:
    """Parse a spec file into a list of ModuleAst."""
    return _Parser(lex(text, filename), filename).spec()


def parse_files(paths) -> list:
    """Parse several spec files into one module list (duplicate module names
    across files are an error)."""
    modules = []
    names = set()
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        for m in parse_spec(text, str(path)):
            if m.name in names:
                raise DuplicateModule(m.name)
            names.add(m.name)
            modules.append(m)
    return modules


def parse_term_text(text: str, wildcards: bool = False, filename: str | None = None) -> Term:
    """Parse a single data term (used by the wire codec and mapping files)."""
    parser = _Parser(lex(text, filename), filename)
    t = parser.term(wildcards=wildcards)
    if parser.peek().kind != "eof":
        parser.fail(f"trailing input after term: {parser.peek().value!r}")
    return t


# --- printer ----------------------------------------------------------------

def _sig(arg_sorts) -> str:
    return " # ".join(arg_sorts)


def _print_decls(d: Decls, indent: str = "  ") -> list:
    lines = []
    if d.sorts:
        lines.append(indent + "sorts")
        for i, s in enumerate(d.sorts):
            sep = "," if i < len(d.sorts) - 1 else ""
            lines.append(f"{indent}  {s}{sep}")
    if d.functions:
        lines.append(indent + "functions")
        for f in d.functions:
            name = "_ >> _" if f.name == ">>" else f.name
            domain = _sig(f.arg_sorts) + " " if f.arg_sorts else ""
            lines.append(f"{indent}  {name} : {domain}-> {f.result}")
    if d.atoms:
        lines.append(indent + "atoms")
        for a in d.atoms:
            suffix = f" : {_sig(a.arg_sorts)}" if a.arg_sorts else ""
            lines.append(f"{indent}  {a.name}{suffix}")
    if d.processes:
        lines.append(indent + "processes")
        for p in d.processes:
            suffix = f" : {_sig(p.arg_sorts)}" if p.arg_sorts else ""
            lines.append(f"{indent}  {p.name}{suffix}")
    if d.sets:
        lines.append(indent + "sets")
        lines.append(indent + "  of atoms")
        for s in d.sets:
            body = ", ".join(_pattern_text(i) for i in s.items)
            if s.quantifiers:
                body += " | " + ", ".join(f"{v} in {so}" for v, so in s.quantifiers)
            lines.append(f"{indent}    {s.name} = {{ {body} }}")
    if d.communications:
        lines.append(indent + "communications")
        for c in d.communications:
            text = f"{_pattern_text(c.left)} | {_pattern_text(c.right)} = {_pattern_text(c.result)}"
            if c.quantifiers:
                text += " for " + ", ".join(f"{v} in {so}" for v, so in c.quantifiers)
            lines.append(f"{indent}  {text}")
    if d.variables:
        lines.append(indent + "variables")
        for v in d.variables:
            lines.append(f"{indent}  {v.name} : -> {v.sort}")
    if d.equations:
        lines.append(indent + "equations")
        for e in d.equations:
            tag = f"[{e.tag}] " if e.tag else ""
            lines.append(f"{indent}  {tag}{term_text(e.lhs)} = {term_text(e.rhs)}")
    if d.definitions:
        lines.append(indent + "definitions")
        for pd in d.definitions:
            params = f"({', '.join(pd.params)})" if pd.params else ""
            lines.append(f"{indent}  {pd.name}{params} =")
            lines.append(f"{indent}    {proc_text(pd.body)}")
    return lines


def _pattern_text(pat) -> str:
    name, args = pat
    if not args:
        return name
    return name + "(" + ", ".join(term_text(a) for a in args) + ")"


def print_module(m: ModuleAst) -> str:
    lines = [f"{m.kind} module {m.name}", "begin"]
    if m.parameters:
        lines.append("  parameters")
        blocks = []
        for pb in m.parameters:
            block = [f"    {pb.name}", "    begin"]
            block.extend("  " + line for line in _print_decls(pb.decls, "    "))
            block.append(f"    end {pb.name}")
            blocks.append("\n".join(block))
        lines.append(",\n".join(blocks))
    if not m.exports.is_empty():
        lines.append("  exports")
        lines.append("  begin")
        lines.extend("  " + line for line in _print_decls(m.exports, "  "))
        lines.append("  end")
    if m.imports:
        lines.append("  imports")
        clauses = []
        for imp in m.imports:
            if not imp.bindings and not imp.renamings:
                clauses.append(f"    {imp.module}")
                continue
            parts = [f"    {imp.module} {{"]
            for param, pairs, actual in imp.bindings:
                pair_text = ",\n        ".join(f"{f} -> {t}" for f, t in pairs)
                parts.append(f"      {param} bound by [\n        {pair_text}\n      ] to {actual}")
            if imp.renamings:
                pair_text = ",\n        ".join(f"{f} -> {t}" for f, t in imp.renamings)
                parts.append(f"      renamed by [\n        {pair_text}\n      ]")
            parts.append("    }")
            clauses.append("\n".join(parts))
        lines.append(",\n".join(clauses))
    lines.extend(_print_decls(m.locals, "  "))
    lines.append(f"end {m.name}")
    return "\n".join(lines)


def print_spec(modules) -> str:
    return "\n\n".join(print_module(m) for m in modules) + "\n"
