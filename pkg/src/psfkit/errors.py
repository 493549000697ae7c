"""Exception types shared across the package.

Every error that crosses a module boundary gets a named class here so
callers (CLI, API, tests) can catch precisely what they care about.
"""


class PsfError(Exception):
    """Base class for all errors raised by this package."""


# --- term algebra ---------------------------------------------------------

class ConflictingBinding(PsfError):
    """The same variable would have to bind two different subterms."""

    def __init__(self, var, first, second):
        super().__init__(f"variable {var} bound to both {first} and {second}")
        self.var = var
        self.first = first
        self.second = second


class UnboundVariable(PsfError):
    """Substitution hit a variable with no binding."""

    def __init__(self, var):
        super().__init__(f"unbound variable {var}")
        self.var = var


class FuelExhausted(PsfError):
    """Normalization did not reach a normal form within the step budget."""

    def __init__(self, term, fuel):
        super().__init__(f"no normal form within {fuel} rewrite steps: {term}")
        self.term = term
        self.fuel = fuel


class UnknownSort(PsfError):
    """A quantified sort is not declared / has no inhabitants."""

    def __init__(self, sort):
        super().__init__(f"unknown sort {sort}")
        self.sort = sort


# --- spec language --------------------------------------------------------

class ParseError(PsfError):
    """Concrete-syntax error; carries 1-based line/column."""

    def __init__(self, message, line, col, filename=None):
        where = f"{filename or '<spec>'}:{line}:{col}"
        super().__init__(f"{where}: {message}")
        self.message = message
        self.line = line
        self.col = col
        self.filename = filename


class DuplicateModule(PsfError):
    def __init__(self, name):
        super().__init__(f"module {name} defined more than once")
        self.name = name


class UnresolvedImport(PsfError):
    def __init__(self, name, importer):
        super().__init__(f"module {importer} imports unknown module {name}")
        self.name = name
        self.importer = importer


class UnboundParameter(PsfError):
    def __init__(self, module, parameter):
        super().__init__(f"parameter {parameter} of {module} left unbound")
        self.module = module
        self.parameter = parameter


class ArityMismatch(PsfError):
    def __init__(self, name, expected, got):
        super().__init__(f"{name} expects {expected} argument(s), got {got}")
        self.name = name
        self.expected = expected
        self.got = got


class CyclicImport(PsfError):
    def __init__(self, cycle):
        super().__init__("import cycle: " + " -> ".join(cycle))
        self.cycle = cycle


# --- operational semantics ------------------------------------------------

class UnknownProcess(PsfError):
    def __init__(self, name):
        super().__init__(f"call to undefined process {name}")
        self.name = name


class NonBooleanGuard(PsfError):
    def __init__(self, detail):
        super().__init__(f"guard does not evaluate over booleans: {detail}")
        self.detail = detail


class UnfoldDepthExceeded(PsfError):
    """Recursive calls unfolded too many times without exposing an action."""

    def __init__(self, name, depth):
        super().__init__(f"unguarded recursion through {name} (depth {depth})")
        self.name = name
        self.depth = depth


class StateLimitExceeded(PsfError):
    """State-space exploration hit its cap; carries the partial LTS."""

    def __init__(self, detail, partial):
        super().__init__(f"exploration stopped: {detail}")
        self.detail = detail
        self.partial = partial


class IndexOutOfRange(PsfError, IndexError):
    """A choice index fell outside the enabled-transition list."""

    def __init__(self, index, count):
        super().__init__(f"choice {index} out of range ({count} enabled)")
        self.index = index
        self.count = count


# --- refinement -----------------------------------------------------------

class AmbiguousDefault(PsfError):
    def __init__(self, label, rules):
        super().__init__(
            f"{len(rules)} default rules match {label} and no specific rule does"
        )
        self.label = label
        self.rules = rules


# --- coordination bus -----------------------------------------------------

class NameClash(PsfError):
    def __init__(self, name, kinds):
        super().__init__(f"name {name} clashes across {kinds}")
        self.name = name
        self.kinds = kinds


class ToolCrashed(PsfError):
    def __init__(self, tool, detail=""):
        super().__init__(f"tool {tool} crashed{': ' + detail if detail else ''}")
        self.tool = tool
        self.detail = detail


class SchedulerStalled(PsfError):
    """No transition is feasible and the bus has not terminated."""

    def __init__(self, state_text, waiting=()):
        msg = "bus stalled"
        if waiting:
            msg += " waiting for tool input on " + ", ".join(sorted(waiting))
        super().__init__(msg + f" in state {state_text}")
        self.state_text = state_text
        self.waiting = tuple(waiting)


class MalformedFrame(PsfError):
    """A wire line that does not decode; `offset` is the 0-based byte
    position where decoding gave up."""

    def __init__(self, raw, reason, offset=0):
        super().__init__(f"malformed frame {raw!r} at byte {offset}: {reason}")
        self.raw = raw
        self.reason = reason
        self.offset = offset


# --- simulator ------------------------------------------------------------

class UnknownSnapshot(PsfError):
    def __init__(self, snapshot_id):
        super().__init__(f"no snapshot with id {snapshot_id}")
        self.snapshot_id = snapshot_id


class UnknownMark(PsfError):
    def __init__(self, name):
        super().__init__(f"no mark named {name}")
        self.name = name


class ProtocolViolation(PsfError):
    def __init__(self, who, detail):
        super().__init__(f"{who}: {detail}")
        self.who = who
        self.detail = detail


class GotoDuringRandom(ProtocolViolation):
    def __init__(self):
        super().__init__("actionchooser", "goto is only allowed with random mode off")


class ChoiceWithoutList(ProtocolViolation):
    def __init__(self):
        super().__init__("actionchooser", "choice received but no action list is pending")


class ReplayDivergence(PsfError):
    """Replaying a session log produced different lines than recorded."""

    def __init__(self, line_no, expected, got):
        super().__init__(
            f"replay diverged at line {line_no}: expected {expected!r}, got {got!r}"
        )
        self.line_no = line_no
        self.expected = expected
        self.got = got
