"""Command-line driver.

Exit status: 0 success (safe / typable), 1 negative verdict (unsafe /
untypable), 2 input or usage error, 3 the two decision procedures disagree.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from . import ambients as A
from . import pi as P
from .inference import IllScoped, infer_principal
from .rules import RuleError, RuleSet, parse_ruleset, rewrite_trace
from .shapes import graph_dot, to_json
from .syntax import ParseError, parse_process
from .terms import well_scoped
from .tma import tma_check, tma_decide
from .tpi import open_context, parse_context, tpi_check, tpi_decide

COMMANDS = ("parse", "reduce", "infer", "check-safety", "tpi", "tma", "export")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    calculus: str
    source: str
    fmt: str = "text"
    strategy: str = "first"
    depth: int = 20
    k_max: Optional[int] = None
    seed: int = 0
    rules: Optional[str] = None
    ctx: str = ""
    exchange: str = "1"
    via: str = "both"

    def __post_init__(self):
        if self.command == "tpi" and self.calculus != "pi":
            raise UsageError("tpi requires --calculus pi")
        if self.command == "tma" and self.calculus != "ma":
            raise UsageError("tma requires --calculus ma")
        if self.command == "check-safety" and self.calculus == "meta":
            raise UsageError("check-safety needs --calculus pi or ma")


def read_source(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    p = Path(path)
    if p.exists():
        return p.read_text()
    # fall back to the examples shipped with the package
    bundled = resources.files("shapestar") / "examples" / p.name
    if bundled.is_file():
        return bundled.read_text()
    raise UsageError(f"no such file: {path}")


def guess_calculus(path: str) -> str:
    suffix = Path(path).suffix
    return {".pi": "pi", ".ma": "ma"}.get(suffix, "meta")


# -- loading ----------------------------------------------------------------

@dataclass
class Loaded:
    surface: object     # calculus-level term (None for meta)
    process: object     # encoded process
    rules: RuleSet


def load(cfg: RunConfig) -> Loaded:
    text = cfg.source
    if cfg.calculus == "pi":
        t = P.parse_pi(text)
        k = P.max_arity(t) if cfg.k_max is None else cfg.k_max
        return Loaded(t, P.encode_pi(t), P.ruleset_pi(k))
    if cfg.calculus == "ma":
        t = A.parse_ma(text)
        k = A.max_arity(t) if cfg.k_max is None else cfg.k_max
        return Loaded(t, A.encode_ma(t), A.ruleset_ma(k))
    p = parse_process(text)
    if not well_scoped(p):
        raise IllScoped("process is not well scoped")
    if cfg.rules is None:
        if cfg.command in ("reduce", "infer"):
            raise UsageError("--rules is required with --calculus meta")
        return Loaded(None, p, RuleSet(()))
    return Loaded(None, p, parse_ruleset(read_source(cfg.rules)))


def show(cfg: RunConfig, q) -> str:
    try:
        if cfg.calculus == "pi":
            return str(P.decode_pi(q))
        if cfg.calculus == "ma":
            return str(A.decode_ma(q))
    except ValueError:
        pass
    return str(q)


# -- commands ---------------------------------------------------------------

def cmd_parse(cfg: RunConfig, out) -> int:
    ld = load(cfg)
    surface = str(ld.surface) if ld.surface is not None else str(ld.process)
    if cfg.fmt == "json":
        emit_json(out, {"calculus": cfg.calculus, "term": surface, "encoded": str(ld.process)})
    else:
        print(surface, file=out)
    return 0


def cmd_export(cfg: RunConfig, out) -> int:
    ld = load(cfg)
    rules = [str(r) for r in ld.rules.rules]
    if cfg.fmt == "json":
        emit_json(out, {"process": str(ld.process), "rules": rules})
    else:
        for r in rules:
            print(r, file=out)
        print(str(ld.process), file=out)
    return 0


def cmd_reduce(cfg: RunConfig, out) -> int:
    ld = load(cfg)
    strategy = cfg.strategy
    if strategy == "random":
        strategy = f"random({cfg.seed})"
    tr = rewrite_trace(ld.rules, ld.process, cfg.depth, strategy=strategy, seed=cfg.seed)
    if cfg.strategy == "all":
        layers = [sorted(show(cfg, q) for q in layer) for layer in tr.states]
        if cfg.fmt == "json":
            emit_json(out, {"strategy": "all", "layers": layers, "truncated": tr.truncated})
        else:
            for i, layer in enumerate(layers):
                print(f"-- depth {i} ({len(layer)} states)", file=out)
                for s in layer:
                    print(s, file=out)
            if tr.truncated:
                print("-- truncated", file=out)
        return 0
    states = [show(cfg, q) for q in tr.states]
    if cfg.fmt == "json":
        emit_json(out, {"strategy": strategy, "states": states, "truncated": tr.truncated})
    else:
        for i, s in enumerate(states):
            print(f"{i}: {s}", file=out)
        if tr.truncated:
            print("-- truncated", file=out)
    return 0


def _render_graph(cfg: RunConfig, s, out):
    if cfg.fmt == "json":
        emit_json(out, to_json(s))
    elif cfg.fmt == "dot":
        print(graph_dot(s), file=out, end="")
    else:
        print(s, file=out)


def cmd_infer(cfg: RunConfig, out) -> int:
    ld = load(cfg)
    _render_graph(cfg, infer_principal(ld.rules, ld.process), out)
    return 0


def cmd_check_safety(cfg: RunConfig, out) -> int:
    ld = load(cfg)
    s = infer_principal(ld.rules, ld.process)
    if cfg.calculus == "pi":
        verdict = P.pi_safety(s, ld.rules)
    else:
        verdict = A.ma_safety(s, ld.rules, A.input_bound(ld.surface))
    if cfg.fmt == "json":
        emit_json(out, {"safe": verdict.safe, "findings": [
            {"kind": f.kind, "node": f.node, "labels": [str(l) for l in f.labels]}
            for f in verdict.findings]})
    else:
        print(verdict, file=out)
    return 0 if verdict.safe else 1


def _report(cfg: RunConfig, out, direct: Optional[bool], shapes: Optional[bool]) -> int:
    word = lambda b: None if b is None else ("typable" if b else "untypable")
    if cfg.fmt == "json":
        emit_json(out, {"direct": direct, "shapes": shapes})
    else:
        if direct is not None:
            print(f"direct: {word(direct)}", file=out)
        if shapes is not None:
            print(f"shapes: {word(shapes)}", file=out)
    if direct is not None and shapes is not None and direct != shapes:
        print("disagreement between the two procedures", file=sys.stderr)
        return 3
    verdict = direct if direct is not None else shapes
    return 0 if verdict else 1


def cmd_tpi(cfg: RunConfig, out) -> int:
    t = P.parse_pi(cfg.source)
    P.encode_pi(t)
    ctx = parse_context(cfg.ctx)
    direct = tpi_check(open_context(ctx, t), t) if cfg.via in ("direct", "both") else None
    shapes = tpi_decide(ctx, t, cfg.k_max) if cfg.via in ("shapes", "both") else None
    return _report(cfg, out, direct, shapes)


def cmd_tma(cfg: RunConfig, out) -> int:
    t = A.parse_ma(cfg.source)
    A.encode_ma(t)
    env = A.parse_env(cfg.ctx)
    top = A.parse_exchange(cfg.exchange)
    direct = tma_check(env, t, top) if cfg.via in ("direct", "both") else None
    shapes = tma_decide(env, t, top) if cfg.via in ("shapes", "both") else None
    return _report(cfg, out, direct, shapes)


HANDLERS = {
    "parse": cmd_parse, "reduce": cmd_reduce, "infer": cmd_infer,
    "check-safety": cmd_check_safety, "tpi": cmd_tpi, "tma": cmd_tma,
    "export": cmd_export,
}


def emit_json(out, data):
    json.dump(data, out, indent=2, sort_keys=True, ensure_ascii=False)
    out.write("\n")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shapestar",
                                 description="Shape types for process calculi.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("input", help="process file, '-' for stdin; bundled examples "
                                  "are found by file name")
    ap.add_argument("--calculus", choices=("meta", "pi", "ma"),
                    help="default: from the file suffix (.pi, .ma), else meta")
    ap.add_argument("--format", dest="fmt", choices=("text", "json", "dot"), default="text")
    ap.add_argument("--strategy", default="first", choices=("first", "all", "random"))
    ap.add_argument("--depth", type=int, default=20, help="maximum number of reduction steps")
    ap.add_argument("--k-max", type=int, help="largest communication arity in the rule set")
    ap.add_argument("--seed", type=int, help="seed for --strategy random (env SHAPESTAR_SEED)")
    ap.add_argument("--rules", help="rule file for --calculus meta")
    ap.add_argument("--ctx", "--env", dest="ctx", default="",
                    help="typing context, e.g. 'a: ch[i]' or 'd: Amb[1]'")
    ap.add_argument("--type", dest="exchange", default="1", help="exchange type for tma")
    ap.add_argument("--via", choices=("direct", "shapes", "both"), default="both")
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get("SHAPESTAR_SEED", "0"))
    try:
        if args.fmt == "dot" and args.command not in ("infer",):
            raise UsageError("--format dot is only available for infer")
        cfg = RunConfig(
            command=args.command,
            calculus=args.calculus or guess_calculus(args.input),
            source=read_source(args.input),
            fmt=args.fmt, strategy=args.strategy, depth=args.depth,
            k_max=args.k_max, seed=seed, rules=args.rules, ctx=args.ctx,
            exchange=args.exchange, via=args.via)
        return HANDLERS[cfg.command](cfg, out)
    except (ParseError, RuleError, IllScoped, UsageError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
