"""Command-line driver: check .eq files, render human or JSON diagnostics."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .checker import CheckConfig, Report, check_module
from .parser import ParseError
from .syntax import Span, pretty_pred
from .types import TypeCheckError

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2


def _use_color(stream) -> bool:
    mode = os.environ.get("EQCHECK_COLOR", "auto")
    if mode == "always":
        return True
    if mode == "never":
        return False
    return hasattr(stream, "isatty") and stream.isatty()


class _Paint:
    def __init__(self, enabled: bool):
        self.enabled = enabled

    def _wrap(self, code: str, text: str) -> str:
        return f"\x1b[{code}m{text}\x1b[0m" if self.enabled else text

    def red(self, s: str) -> str:
        return self._wrap("31", s)

    def green(self, s: str) -> str:
        return self._wrap("32", s)

    def yellow(self, s: str) -> str:
        return self._wrap("33", s)


def _span_json(span: Span) -> dict:
    return {"line": span.line, "col": span.col,
            "end_line": span.end_line, "end_col": span.end_col}


def report_to_json(reports: list[Report]) -> list[dict]:
    out = []
    for report in reports:
        for v in report.verdicts:
            out.append({
                "file": report.file,
                "decl": v.decl,
                "id": v.oid,
                "kind": v.kind,
                "span": _span_json(v.span),
                "status": v.status,
                "goal": v.goal_text,
                "facts": list(v.fact_texts),
                "message": v.message,
            })
    return out


def render_human(reports: list[Report], paint: _Paint) -> str:
    lines: list[str] = []
    total = failed = 0
    for report in reports:
        decls_failed: dict[str, int] = {}
        for v in report.verdicts:
            total += 1
            if not v.proved:
                failed += 1
                decls_failed[v.decl] = decls_failed.get(v.decl, 0) + 1
                where = f"{report.file}:{v.span.line}:{v.span.col}"
                lines.append(paint.red(f"FAILED  {where}  {v.decl} [{v.kind}]"))
                if v.message:
                    lines.append(f"    {v.message}")
                if v.status == "fuel-exhausted":
                    lines.append("    (logical-evaluation fuel exhausted; "
                                 "try a larger --ple-fuel)")
                if v.goal_text and v.kind not in ("totality", "termination", "blocked"):
                    lines.append(f"    goal:  {v.goal_text}")
                    for f in v.fact_texts:
                        lines.append(f"    fact:  {f}")
        for w in report.warnings:
            lines.append(paint.yellow(f"warning: {report.file}: {w}"))
        ok_count = sum(1 for v in report.verdicts if v.proved)
        n = len(report.verdicts)
        status = paint.green("OK") if ok_count == n else paint.red("FAILED")
        lines.append(f"{report.file}: {status} ({ok_count}/{n} obligations proved)")
    if failed:
        lines.append(paint.red(f"{failed} of {total} obligations failed"))
    return "\n".join(lines)


def _dump_facts(reports: list[Report], oid: str) -> str:
    for report in reports:
        for ob in report.obligations:
            if ob.oid == oid:
                lines = [f"obligation {ob.oid} [{ob.kind}]", "facts:"]
                for f in ob.facts:
                    lines.append(f"  {pretty_pred(f)}")
                lines.append(f"goal: {pretty_pred(ob.goal)}")
                return "\n".join(lines)
    return f"no obligation named {oid!r}"


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="eqcheck",
        description="Check equational proofs and refinement-type signatures.")
    sub = ap.add_subparsers(dest="command", required=True)
    chk = sub.add_parser("check", help="check one or more .eq files")
    chk.add_argument("files", nargs="+", help=".eq source files")
    chk.add_argument("--ple-default", action="store_true",
                     help="apply proof-by-logical-evaluation to every obligation")
    chk.add_argument("--strict-hints", action="store_true",
                     help="chain steps see only hints attached at or before them")
    chk.add_argument("--fuel", type=int, default=10**6, metavar="N",
                     help="evaluator unfolding budget (default 1000000)")
    chk.add_argument("--ple-fuel", type=int, default=100, metavar="N",
                     help="logical-evaluation rounds per obligation (default 100)")
    chk.add_argument("--json", action="store_true", help="machine-readable output")
    chk.add_argument("--jobs", type=int, default=1, metavar="N",
                     help="obligations discharged concurrently (default 1)")
    chk.add_argument("--dump-facts", metavar="OBLIGATION-ID", default=None,
                     help="print one obligation's hypotheses and goal, then exit")
    chk.add_argument("--no-unused-hint-warnings", action="store_true",
                     help="skip the unused-hint analysis")
    return ap


def run(argv: list[str]) -> int:
    """Entry point used by both the console script and tests."""
    ap = build_arg_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code not in (0, None) else EXIT_OK
    if args.fuel <= 0 or args.ple_fuel <= 0 or args.jobs < 1:
        print("eqcheck: --fuel and --ple-fuel must be positive, --jobs at least 1",
              file=sys.stderr)
        return EXIT_ERROR

    config = CheckConfig(
        ple_default=args.ple_default,
        strict_hints=args.strict_hints,
        ple_fuel=args.ple_fuel,
        eval_fuel=args.fuel,
        jobs=args.jobs,
        warn_unused_hints=not args.no_unused_hint_warnings,
    )

    reports: list[Report] = []
    for path in args.files:
        try:
            with open(path, encoding="utf-8") as fh:
                source = fh.read()
        except OSError as e:
            print(f"eqcheck: cannot read {path}: {e.strerror}", file=sys.stderr)
            return EXIT_ERROR
        try:
            reports.append(check_module(source, config, file=os.path.basename(path)))
        except (ParseError, TypeCheckError) as e:
            print(f"eqcheck: {path}: {e}", file=sys.stderr)
            return EXIT_ERROR

    if args.dump_facts:
        print(_dump_facts(reports, args.dump_facts))
        return EXIT_OK

    if args.json:
        print(json.dumps(report_to_json(reports), indent=2))
    else:
        print(render_human(reports, _Paint(_use_color(sys.stdout))))
    return EXIT_OK if all(r.ok for r in reports) else EXIT_FAILED


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
