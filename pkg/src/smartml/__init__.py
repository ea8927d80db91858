"""SmartML: a small smart-contract language with a reentrancy type system."""
from .parser import ParseError, parse_expr, parse_program, parse_stmt
from .pretty import pretty_print
from .resolve import NameResolutionError, Resolved, load, resolve
from .interpreter import Machine, execute
from .typesys import CheckReport, Checker, check_contract, check_program
from .monitor import classify_trace, detect_reentrance, fuzz_reachable

__version__ = "0.1.0"
