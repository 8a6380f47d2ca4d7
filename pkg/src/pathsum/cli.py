"""Command-line entry point: ``pathsum <command> ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import errors
from .execution import build_plan, execute, explain
from .generate import GenSpec, Shape, generate
from .pattern import parse_pattern, parse_xpath
from .reconstruct import ReconstructStats, reconstruct, sorted_outer_union, xmlize
from .relpaths import compute_relevant_paths, enumerate_tuples
from .store import build_store, open_store, persist
from .summary import SerialFormat, export_dot, fanin_report, serialize

EXIT_OK, EXIT_USAGE, EXIT_CORRUPT = 0, 1, 2

CORRUPTION = (errors.CorruptStore, errors.VersionMismatch, errors.CorruptSummary,
              errors.BadMagic, errors.TruncatedInput, errors.UnsupportedVersion,
              errors.SummaryMismatch)


GRAMMAR = """pattern grammars:
  xpath:   ('/'|'//') step (('/'|'//') step)*
           step      := NCName | '*' | '@'NCName | 'text()'  followed by predicate*
           predicate := '[' rel-path (('=' | '~') 'literal')? ']'   (~ means contains)
  pattern: (node tag=<label> axis=child|desc [opt] [exist] [ret] [eq="..."|contains="..."] child*)"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage().rstrip()}\n{self.prog}: error: {message}")


def _add_query_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--xpath", help="XPath subset, e.g. //item[name='n1']")
    g.add_argument("--pattern", help="s-expression pattern, e.g. (node tag=a axis=desc ret)")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pathsum", description="Path-summary XML store and tree-pattern engine.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build", help="parse a document into a store directory")
    p.add_argument("document")
    p.add_argument("store")
    p.add_argument("--precompute", action="store_true", help="store cluster labels with the summary")

    p = sub.add_parser("summary", help="print the path summary")
    p.add_argument("store")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--dot", action="store_true")
    g.add_argument("--xml", action="store_true")
    g.add_argument("--stats", action="store_true")

    p = sub.add_parser("fanin", help="per-tag fan-in and median fan-in")
    p.add_argument("store")

    p = sub.add_parser("paths", help="relevant paths of a pattern")
    p.add_argument("store")
    _add_query_args(p)
    p.add_argument("--no-minimize", action="store_true")

    p = sub.add_parser("query", help="evaluate a pattern, one CSV row per result")
    p.add_argument("store")
    _add_query_args(p)
    p.add_argument("--explain", action="store_true")
    p.add_argument("--no-minimize", action="store_true")

    p = sub.add_parser("reconstruct", help="serialize stored subtrees")
    p.add_argument("store")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--xpath")
    g.add_argument("--pattern")
    g.add_argument("--path", type=int, action="append", help="summary path id (repeatable)")
    p.add_argument("--algo", choices=["reconstruct", "sou"], default="reconstruct")
    p.add_argument("--wrapper", default="res")
    p.add_argument("--out")

    p = sub.add_parser("gen", help="write a synthetic document")
    p.add_argument("--shape", choices=[s.value for s in Shape], default="fanout")
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--fanout", type=int, default=10)
    p.add_argument("--recursion-prob", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def _pattern(args):
    return parse_xpath(args.xpath) if args.xpath is not None else parse_pattern(args.pattern)


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
        if text and not text.endswith("\n"):
            sys.stdout.write("\n")


def cmd_build(args) -> int:
    data = Path(args.document).read_bytes()
    store = build_store(data, precomputed=args.precompute, document=Path(args.document).name)
    persist(store, args.store)
    s = store.summary
    print(f"{len(s)} summary nodes, height {s.height}, {len(store.id_paths)} id paths, "
          f"{len(store.value_paths)} value paths")
    return EXIT_OK


def cmd_summary(args) -> int:
    s = open_store(args.store).summary
    if args.dot:
        _write(export_dot(s), None)
    elif args.xml:
        _write(serialize(s, SerialFormat.XML_DIRECT).decode("utf-8"), None)
    elif args.stats:
        print(f"nodes {len(s)}")
        print(f"height {s.height}")
        for fmt in SerialFormat:
            print(f"{fmt.name.lower()} {len(serialize(s, fmt))} bytes")
    else:
        for node in s.nodes:
            print(f"{'  ' * (node.depth - 1)}{node.id} {node.label} [{node.annotation.symbol}]")
    return EXIT_OK


def cmd_fanin(args) -> int:
    store = open_store(args.store)
    print(fanin_report(store.summary, store.tag_counts()).format())
    return EXIT_OK


def cmd_paths(args) -> int:
    store = open_store(args.store)
    q = _pattern(args)
    forest = compute_relevant_paths(store.summary, q, not args.no_minimize)
    print(forest.describe())
    print(f"tuples: {len(enumerate_tuples(forest))}")
    return EXIT_OK


def _run(store, q, minimize: bool):
    forest = compute_relevant_paths(store.summary, q, minimize)
    try:
        plan = build_plan(q, forest, store)
    except errors.Unsatisfiable:
        return forest, None, None
    return forest, plan, execute(plan, store)


def cmd_query(args) -> int:
    store = open_store(args.store)
    q = _pattern(args)
    _, plan, table = _run(store, q, not args.no_minimize)
    if args.explain:
        print(explain(plan) if plan is not None else "Unsatisfiable")
    if table is not None:
        for line in table.csv_lines():
            print(line)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    store = open_store(args.store)
    if args.path:
        algo = reconstruct if args.algo == "reconstruct" else sorted_outer_union
        _write(algo(store, args.path), args.out)
        return EXIT_OK
    q = _pattern(args)
    forest, plan, table = _run(store, q, True)
    _write("" if table is None else xmlize(table, forest, store, args.wrapper, ReconstructStats()), args.out)
    return EXIT_OK


def cmd_gen(args) -> int:
    spec = GenSpec(Shape(args.shape), args.depth, args.fanout, args.recursion_prob, args.seed)
    Path(args.out).write_text(generate(spec), encoding="utf-8")
    return EXIT_OK


COMMANDS = {"build": cmd_build, "summary": cmd_summary, "fanin": cmd_fanin, "paths": cmd_paths,
            "query": cmd_query, "reconstruct": cmd_reconstruct, "gen": cmd_gen}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except CORRUPTION as exc:
        print(f"pathsum: corrupt data: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except (errors.PathSumError, ValueError, OSError) as exc:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        print(f"pathsum {args.command}: {exc}", file=sys.stderr)
        print(sub.format_usage().rstrip(), file=sys.stderr)
        if isinstance(exc, (errors.PatternSyntaxError, errors.UnsupportedFeature,
                            errors.InvariantViolation)):
            print(GRAMMAR, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
