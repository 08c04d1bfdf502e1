"""A minimal dependently-typed checker whose unifier reconstructs the
representations of level-polymorphic n-ary function types."""

from .checker import Outcome, Session, convert, core_check, core_infer
from .cli import check_file_text, corpus_names, corpus_path, new_session, run_check
from .elab import ElabError
from .meta import State, UnifyFailed
from .parser import ParseError, parse_expr, parse_file

__all__ = [
    "Outcome", "Session", "convert", "core_check", "core_infer",
    "check_file_text", "corpus_names", "corpus_path", "new_session", "run_check",
    "ElabError", "State", "UnifyFailed", "ParseError", "parse_expr", "parse_file",
]
