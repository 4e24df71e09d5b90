"""Command-line entry point: batch loading, one-off queries and a REPL."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, TextIO

from .errors import ScoreError
from .kb import KnowledgeBase
from .kdef import Interpreter, fixture_path, needs_more, parse

PROMPT = "score> "
CONTINUE = "...> "


@dataclass
class CliConfig:
    load_paths: list = field(default_factory=list)
    repl: bool = False
    trace: bool = False
    query: Optional[str] = None
    marker_pairs: int = 14
    max_chain_depth: int = 1000


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="score",
        description="Load .kdef knowledge files, run queries, or start an interactive session.")
    p.add_argument("--load", metavar="PATH", action="append", default=[],
                   help="load a .kdef file (repeatable); bundled fixture names also work")
    p.add_argument("--repl", action="store_true", help="read forms interactively after loading")
    p.add_argument("--query", metavar="FORM", help="evaluate FORM and print the result")
    p.add_argument("--trace", action="store_true", help="print trigger and firing events")
    p.add_argument("--marker-pairs", type=_positive, default=14, metavar="N")
    p.add_argument("--max-chain", type=_positive, default=1000, metavar="N",
                   help="firing limit per change")
    return p


def _resolve_path(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = fixture_path(p.name)
    return bundled if bundled.exists() else p


class Session:
    def __init__(self, cfg: CliConfig, out: TextIO, err: TextIO):
        self.out, self.err = out, err
        self.tracing = cfg.trace
        self.kb = KnowledgeBase(cfg.marker_pairs, cfg.max_chain_depth, tracer=self._trace)
        self.interp = Interpreter(self.kb)

    def _trace(self, line: str) -> None:
        if self.tracing:
            print(line, file=self.out)

    def stats(self) -> str:
        s = self.kb.stats
        return (f"elements: {self.kb.name_count()}  rules: {len(self.kb.rules)}  "
                f"firings: {s.firings}  activations: {s.trigger_activations}")

    def run_text(self, text: str, source: str) -> bool:
        """Evaluate every form in ``text``, printing each result."""
        try:
            for datum in parse(text, source):
                print(self.interp.render(self.interp.eval_form(datum)), file=self.out)
        except ScoreError as exc:
            print(f"error: {exc}", file=self.err)
            return False
        return True

    def command(self, line: str) -> Optional[bool]:
        """Handle a ``:command``; returns False to quit."""
        words = line.split()
        if words[0] == ":quit":
            return False
        if words[0] == ":stats":
            print(self.stats(), file=self.out)
        elif words[0] == ":trace" and len(words) == 2 and words[1] in ("on", "off"):
            self.tracing = words[1] == "on"
        else:
            print(f"error: unknown command {line}", file=self.err)
        return True

    def repl(self, stdin: TextIO) -> None:
        interactive = stdin.isatty()
        buf, lineno = "", 0
        while True:
            if interactive:
                self.out.write(CONTINUE if buf else PROMPT)
                self.out.flush()
            line = stdin.readline()
            if not line:
                break
            lineno += 1
            if not buf and line.strip().startswith(":"):
                if self.command(line.strip()) is False:
                    break
                continue
            buf += line
            if needs_more(buf):
                continue
            if buf.strip():
                self.run_text(buf, f"<repl:{lineno}>")
            buf = ""


def main(argv=None, stdin: TextIO = None, stdout: TextIO = None, stderr: TextIO = None) -> int:
    stdin = stdin or sys.stdin
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        parser.print_usage(err)
        return 2
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    cfg = CliConfig(ns.load, ns.repl, ns.trace, ns.query, ns.marker_pairs, ns.max_chain)
    if not (cfg.load_paths or cfg.query or cfg.repl):
        parser.print_usage(err)
        return 2

    session = Session(cfg, out, err)
    for path in cfg.load_paths:
        try:
            session.interp.load_file(_resolve_path(path))
        except ScoreError as exc:
            print(f"error: {exc}", file=err)
            return 1
    if cfg.query is not None and not session.run_text(cfg.query, "<query>"):
        return 1
    if cfg.repl:
        session.repl(stdin)
    return 0


if __name__ == "__main__":
    sys.exit(main())
