"""Batch driver: check `.nry` files, print per-declaration outcomes, compare
them against `#expect` pragmas, and exit accordingly.

Exit codes: 0 when every expectation is met (declarations without a pragma
default to expecting ok), 1 on a mismatch, 2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path
from typing import Optional

from . import parser as P
from . import syntax as S
from . import values as V
from .checker import Outcome, Session, group_declarations
from .elab import ElabError


def prelude_source() -> str:
    return resources.files("nary_kernel").joinpath("prelude.nry").read_text("utf-8")


def corpus_path(name: str) -> str:
    return str(resources.files("nary_kernel").joinpath("corpus").joinpath(name))


def corpus_names() -> list[str]:
    root = resources.files("nary_kernel").joinpath("corpus")
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".nry"))


def new_session(trace: Optional[list[str]] = None, prelude: bool = True,
                validate: bool = True,
                invert_override: Optional[dict[int, int]] = None) -> Session:
    sess = Session(trace=trace, validate=validate, invert_override=invert_override)
    if prelude:
        outcomes = sess.check_source(prelude_source())
        bad = [o for o in outcomes if o.status != "ok"]
        if bad:
            raise RuntimeError(f"prelude failed to check: {bad[0].line()}")
        sess.outcomes.clear()
    return sess


def check_file_text(text: str, sess: Session) -> tuple[list[str], bool]:
    """Outcome lines plus whether all pragma expectations were met."""
    decls = P.parse_file(text)
    groups = group_declarations(decls)
    lines: list[str] = []
    ok = True
    for g in groups:
        oc = sess.check_group(g)
        lines.append(oc.line())
        if oc.report:
            lines.append(oc.report)
        expected = g.pragma or "ok"
        if oc.status != expected:
            ok = False
            lines.append(f"MISMATCH {oc.name}: expected {expected}, got {oc.status}")
    return lines, ok


def run_check(paths: list[str], trace_unify: bool = False, print_metas: bool = False,
              no_prelude: bool = False, nf_name: Optional[str] = None,
              out=sys.stdout) -> int:
    trace: Optional[list[str]] = [] if trace_unify else None
    all_ok = True
    for path in paths:
        try:
            text = Path(path).read_text("utf-8")
        except OSError as e:
            print(f"error: {e}", file=out)
            return 2
        try:
            sess = new_session(trace=trace, prelude=not no_prelude)
            lines, ok = check_file_text(text, sess)
        except P.ParseError as e:
            print(f"{path}: parse error: {e}", file=out)
            return 2
        for line in lines:
            print(line, file=out)
        if trace is not None:
            for line in trace:
                print(f"TRACE {line}", file=out)
            trace.clear()
        if print_metas:
            for m in sess.state.metas.values():
                if m.solution is None:
                    continue
                print(f"META ?{m.hint}.{m.mid} := "
                      f"{S.pretty(sess.state.zonk(m.solution))}", file=out)
        if nf_name is not None:
            entry = sess.state.globals.get(nf_name)
            if entry is None:
                print(f"error: no global named {nf_name}", file=out)
                return 2
            term = V.nf(sess.state, (), S.Top(nf_name))
            print(f"NF {nf_name} = {S.pretty(term)}", file=out)
        all_ok = all_ok and ok
    return 0 if all_ok else 1


def main(argv: Optional[list[str]] = None) -> int:
    ap = argparse.ArgumentParser(
        prog="nary-check",
        description="Type check .nry files and compare against #expect pragmas.")
    ap.add_argument("files", nargs="+", help=".nry files to check, in order")
    ap.add_argument("--trace-unify", action="store_true",
                    help="print one line per unification rule application")
    ap.add_argument("--print-metas", action="store_true",
                    help="dump solved metavariables after each file")
    ap.add_argument("--no-prelude", action="store_true",
                    help="do not load the bundled prelude first")
    ap.add_argument("--nf", metavar="NAME", default=None,
                    help="print the normal form of a checked global")
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return run_check(args.files, args.trace_unify, args.print_metas,
                         args.no_prelude, args.nf)
    except ElabError as e:
        print(f"error: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
