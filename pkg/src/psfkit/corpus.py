"""Registry of the bundled example specifications.

The examples ship as ``.psf`` files under ``psfkit/specs``.  Some module
names (SimulatorData, SimulatorSystem, TKernel, ...) are deliberately
reused between design levels, so the files are organised into groups
that can be loaded together; each group names the process that serves
as its natural exploration root.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .elaborate import elaborate
from .process import Environment
from .syntax import parse_spec

__all__ = [
    "CorpusGroup",
    "CorpusRoot",
    "GROUPS",
    "spec_text",
    "spec_path",
    "load_group",
]


@dataclass(frozen=True)
class CorpusRoot:
    module: str  #: top-level module to flatten
    process: str  #: closed process to explore


@dataclass(frozen=True)
class CorpusGroup:
    files: tuple[str, ...]
    #: entry points worth exploring; the first is the primary root
    roots: tuple[CorpusRoot, ...]


def _root(module: str, process: str | None = None) -> tuple[CorpusRoot, ...]:
    return (CorpusRoot(module, process or module),)


GROUPS: dict[str, CorpusGroup] = {
    # the generic architecture library with the two-component example
    "toy-architecture": CorpusGroup(
        ("arch_library.psf", "toy_application.psf"), _root("Application")
    ),
    # the stepper: core loop only, then all user-facing features
    "stepper-core": CorpusGroup(
        ("arch_library.psf", "simulator_simple.psf"), _root("Simulator")
    ),
    "stepper-full": CorpusGroup(
        ("arch_library.psf", "simulator_full.psf"), _root("Simulator")
    ),
    "stepper-history": CorpusGroup(
        ("arch_library.psf", "simulator_history.psf"), _root("Simulator")
    ),
    # the message bus library with the two-tool example
    "toy-bus": CorpusGroup(
        ("toolbus_library.psf", "toy_toolbus.psf"), _root("App", "ToolBus")
    ),
    # the stepper rebuilt on the message bus
    "stepper-bus": CorpusGroup(
        ("toolbus_library.psf", "simulator_data_tb.psf", "simulator_toolbus.psf"),
        _root("Simulator"),
    ),
    # the kernel tool split into adapter plus core
    "kernel-split": CorpusGroup(
        ("toolbus_library.psf", "simulator_data_tb.psf", "simulator_kernel_split.psf"),
        _root("TA-Kernel"),
    ),
    # tool-side history support for the split kernel and the chooser
    "history-tools": CorpusGroup(
        ("toolbus_library.psf", "simulator_data_tb.psf", "simulator_history_tools.psf"),
        _root("TA-Kernel") + _root("TActionChooser"),
    ),
    # the final assembly: bus-hosted stepper with split kernel and history
    "stepper-system": CorpusGroup(
        ("toolbus_library.psf", "simulator_data_tb.psf", "simulator_system.psf"),
        _root("Simulator") + _root("TA-Kernel"),
    ),
}


def spec_text(name: str) -> str:
    """Return the contents of a bundled spec or mapping file."""
    return (resources.files(__package__) / "specs" / name).read_text("utf-8")


def spec_path(name: str) -> str:
    """Return a filesystem path for a bundled spec or mapping file."""
    return str(resources.files(__package__) / "specs" / name)


def load_group(name: str, module: str | None = None) -> tuple[Environment, str]:
    """Parse and elaborate a corpus group; returns (environment, process).

    `module` selects among the group's roots and defaults to the primary
    one; the returned process name is the root's entry point.
    """
    group = GROUPS[name]
    root = group.roots[0]
    if module is not None:
        matches = [r for r in group.roots if r.module == module]
        if not matches:
            raise KeyError(f"{name} has no root module {module}")
        root = matches[0]
    modules = []
    for fname in group.files:
        modules.extend(parse_spec(spec_text(fname), fname))
    return elaborate(modules, root.module), root.process
