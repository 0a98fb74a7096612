"""Command-line front end: run command scripts or work interactively.

Each line is one command; words are split shell-style, so expressions and
formulas containing spaces or quotes go in single quotes::

    new-coordinates Cartesian t x y z
    new-metric Minkowski Cartesian 'diag(-1, 1, 1, 1)' η
    new-tensor V Minkowski Cartesian '{1}' '[1, v, 0, 0]'
    calc '"Minkowski"["μν"] "V"["ν"]' --id Vlow
    list Vlow

Lines starting with ``#`` are comments. Run ``help`` for the verb list.
"""

from __future__ import annotations

import argparse
import re
import shlex
import sys
from typing import Callable

from . import curvature, geodesic, session_io
from .calc import calc
from .errors import SchemaError, TensorError, VersionUnsupported
from .parallel import default_workers
from .registry import Session, diag, format_info
from .symexpr import format_expr, parse_expr, parse_rules
from .symexpr.core import substitute
from .symexpr.parser import _split_top
from .transform import add_coord_transformation

EXIT_OK, EXIT_COMMAND, EXIT_IO, EXIT_SCHEMA = 0, 1, 2, 3


class UsageError(TensorError):
    pass


class Quit(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers

def parse_components(text: str):
    """``diag(a, b, ...)``, nested ``[...]``/``{...}`` lists, or a single expression."""
    s = text.strip()
    m = re.fullmatch(r"diag\s*\((.*)\)", s, re.S)
    if m:
        return diag(*[p.strip() for p in _split_top(m.group(1), ",")])
    if s[:1] in "[{" and s[-1:] in "]}":
        inner = s[1:-1].strip()
        if not inner:
            return []
        return [parse_components(p) for p in _split_top(inner, ",")]
    return s


def parse_indices(text: str) -> tuple:
    s = text.strip()
    if s[:1] in "[{(" and s[-1:] in "]})":
        s = s[1:-1]
    if not s.strip():
        return ()
    try:
        return tuple(int(p) for p in s.split(","))
    except ValueError:
        raise UsageError(f"index configurations look like {{1,-1}}, got {text!r}") from None


def looks_like_indices(text: str) -> bool:
    return bool(re.fullmatch(r"[\[{(]?\s*([+-]?1\s*(,\s*[+-]?1\s*)*)?[\]})]?", text.strip())) \
        and text.strip() != ""


def pop_option(args: list, name: str, flag: bool = False):
    """Remove ``--name value`` (or a bare ``--name`` flag) from ``args``."""
    key = "--" + name
    if key not in args:
        return False if flag else None
    i = args.index(key)
    if flag:
        del args[i]
        return True
    if i + 1 >= len(args):
        raise UsageError(f"{key} needs a value")
    value = args[i + 1]
    del args[i:i + 2]
    return value


def on_off(text: str) -> bool:
    t = text.lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise UsageError(f"expected on or off, got {text!r}")


# ---------------------------------------------------------------------------
# the command table

COMMANDS: dict = {}


def command(name: str, usage: str, min_args: int = 0, max_args: int | None = None,
            options: tuple = (), flags: tuple = ()):
    def wrap(fn):
        COMMANDS[name] = (fn, usage, min_args, max_args, options, flags)
        return fn
    return wrap


class Shell:
    """Executes commands against one session and writes results to ``out``."""

    def __init__(self, session: Session | None = None, style: str = "plain",
                 out: Callable[[str], None] = print):
        self.out = out
        self.session = session or Session()
        self.session.on_message = out
        self.style = style

    def execute(self, line: str):
        line = line.strip()
        if not line or line.startswith("#"):
            return
        try:
            words = shlex.split(line)
        except ValueError as exc:
            raise UsageError(f"cannot split the command: {exc}") from None
        verb, args = words[0], words[1:]
        if verb not in COMMANDS:
            raise UsageError(f"unknown command {verb!r}; try 'help'")
        fn, usage, lo, hi, options, flags = COMMANDS[verb]
        opts = {name: pop_option(args, name) for name in options}
        opts.update({name: pop_option(args, name, flag=True) for name in flags})
        stray = [a for a in args if a.startswith("--") and len(a) > 2]
        if stray or len(args) < lo or (hi is not None and len(args) > hi):
            raise UsageError(f"usage: {verb} {usage}")
        fn(self, args, opts)

    def fmt(self, e) -> str:
        return format_expr(e, self.style, self.session.display_options(self.style))


@command("help", "[verb]", 0, 1)
def _help(sh: Shell, args, opts):
    if args:
        fn, usage = COMMANDS.get(args[0], (None, None))[:2]
        if fn is None:
            raise UsageError(f"unknown command {args[0]!r}")
        sh.out(f"{args[0]} {usage}")
        return
    for name in sorted(COMMANDS):
        sh.out(f"{name} {COMMANDS[name][1]}")


@command("quit", "", 0, 0)
def _quit(sh, args, opts):
    raise Quit


COMMANDS["exit"] = COMMANDS["quit"]


# -- creation
@command("new-coordinates", "<id> <symbol>...", 2)
def _new_coords(sh, args, opts):
    sh.out(sh.session.new_coordinates(args[0], args[1:]))


@command("new-metric", "<id> <coords> <components> [symbol]", 3, 4)
def _new_metric(sh, args, opts):
    sym = args[3] if len(args) > 3 else "g"
    sh.out(sh.session.new_metric(args[0], args[1], parse_components(args[2]), sym))


@command("new-tensor", "<id> <metric> <coords> <indices> <components> [symbol]", 5, 6)
def _new_tensor(sh, args, opts):
    comps = parse_components(args[4])
    idx = parse_indices(args[3])
    if not idx and not isinstance(comps, list):
        comps = [comps]
    sym = args[5] if len(args) > 5 else None
    sh.out(sh.session.new_tensor(args[0], args[1], args[2], idx, comps, sym))


@command("transform-add", "<source coords> <target coords> '<rules>'", 3, 3)
def _transform_add(sh, args, opts):
    add_coord_transformation(sh.session, args[0], args[1], parse_rules(args[2]))


@command("calc", "'<formula>' [--id ID] [--indices LETTERS] [--symbol S]", 1, 1,
         options=("id", "indices", "symbol"))
def _calc(sh, args, opts):
    sh.out(calc(sh.session, args[0], opts["id"], opts["indices"], opts["symbol"]))


def _metric_verb(fn):
    def run(sh, args, opts):
        sh.out(fn(sh.session, *args))
    return run


command("christoffel", "<metric>", 1, 1)(_metric_verb(curvature.christoffel))
command("riemann", "<metric>", 1, 1)(_metric_verb(curvature.riemann))
command("ricci", "<metric>", 1, 1)(_metric_verb(curvature.ricci_tensor))
command("ricci-scalar", "<metric>", 1, 1)(_metric_verb(curvature.ricci_scalar))
command("einstein", "<metric>", 1, 1)(_metric_verb(curvature.einstein))
command("lagrangian", "<metric> [coords]", 1, 2)(_metric_verb(geodesic.lagrangian))
command("geodesic-lagrangian", "<metric> [coords]", 1, 2)(
    _metric_verb(geodesic.geodesic_from_lagrangian))
command("geodesic-christoffel", "<metric> [coords]", 1, 2)(
    _metric_verb(geodesic.geodesic_from_christoffel))


@command("line-element", "<metric> [coords]", 1, 2)
def _line_element(sh, args, opts):
    sh.out(sh.fmt(curvature.line_element(sh.session, *args)))


@command("volume-element", "<metric> [coords]", 1, 2)
def _volume_element(sh, args, opts):
    sh.out(sh.fmt(curvature.volume_element_squared(sh.session, *args)))


# -- display
def _display_args(sh, args, opts):
    post, activate = opts["post"], opts["activate"]
    tid, indices, coords = args[0], None, None
    for a in args[1:]:
        if looks_like_indices(a) and indices is None:
            indices = parse_indices(a)
        elif coords is None:
            coords = a
        else:
            raise UsageError(f"unexpected argument {a!r}")
    rules = parse_rules(post) if post else None
    post_fn = None
    if activate:
        post_fn = lambda e: geodesic.activate(sh.session, e, rules)  # noqa: E731
    elif rules:
        post_fn = lambda e: sh.session.simplify(substitute(e, rules))  # noqa: E731
    return tid, indices, coords, post_fn


@command("show", "<id> [indices] [coords] [--post RULES] [--activate]", 1, 3,
         options=("post",), flags=("activate",))
def _show(sh, args, opts):
    tid, idx, coords, post = _display_args(sh, args, opts)
    sh.out(session_io.show(sh.session, tid, idx, coords, post, sh.style))


@command("list", "<id> [indices] [coords] [--post RULES] [--activate]", 1, 3,
         options=("post",), flags=("activate",))
def _list(sh, args, opts):
    tid, idx, coords, post = _display_args(sh, args, opts)
    sh.out(session_io.list_components(sh.session, tid, idx, coords, post, sh.style))


@command("activate", "<id> [--rules RULES]", 1, 1, options=("rules",))
def _activate(sh, args, opts):
    rules = parse_rules(opts["rules"]) if opts["rules"] else None
    post = lambda e: geodesic.activate(sh.session, e, rules)  # noqa: E731
    sh.out(session_io.list_components(sh.session, args[0], None, None, post, sh.style))


@command("info", "[id]", 0, 1)
def _info(sh, args, opts):
    sh.out(format_info(sh.session.info(args[0] if args else None)))


@command("simplify", "<id> | '<expression>'", 1, 1)
def _simplify(sh, args, opts):
    if args[0] in sh.session:
        sh.out(sh.session.simplify_tensor(args[0]))
    else:
        sh.out(sh.fmt(sh.session.simplify(parse_expr(args[0]))))


# -- persistence
@command("export", "[id] [--file FILE]", 0, 1, options=("file",))
def _export(sh, args, opts):
    path = opts["file"]
    if args:
        data = session_io.export_tensor(sh.session, args[0])
        if path:
            _write(path, session_io.dumps(data))
            return
    else:
        data = session_io.export_all(sh.session, path)
        if path:
            return
    sh.out(session_io.dumps(data).rstrip("\n"))


def _write(path, text):
    from .errors import FileWriteError
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise FileWriteError(f"could not write {path}: {exc}") from None


@command("import", "<file> [--merge]", 1, 1, flags=("merge",))
def _import(sh, args, opts):
    if not opts["merge"]:
        session_io.import_all(sh.session, args[0])
        sh.session.on_message = sh.out
        return
    data = session_io._load_source(args[0])
    for tid, rec in data.items():
        if tid != session_io.OPTIONS_KEY:
            sh.out(session_io.import_tensor(sh.session, {tid: rec}))


@command("save", "<file>", 1, 1)
def _save(sh, args, opts):
    session_io.export_all(sh.session, args[0])


@command("load", "<file>", 1, 1)
def _load(sh, args, opts):
    session_io.import_all(sh.session, args[0])


# -- editing
@command("delete", "<id>", 1, 1)
def _delete(sh, args, opts):
    sh.session.delete(args[0])


@command("rename", "<old id> <new id>", 2, 2)
def _rename(sh, args, opts):
    sh.out(sh.session.change_id(args[0], args[1]))


@command("set-symbol", "<id> <symbol>", 2, 2)
def _set_symbol(sh, args, opts):
    sh.out(sh.session.change_symbol(args[0], args[1]))


@command("set-default-indices", "<id> <indices>", 2, 2)
def _set_default_indices(sh, args, opts):
    sh.out(sh.session.change_default_indices(args[0], parse_indices(args[1])))


@command("set-default-coords", "<id> <coords>", 2, 2)
def _set_default_coords(sh, args, opts):
    sh.out(sh.session.change_default_coords(args[0], args[1]))


# -- options
@command("set-index-letters", "[letters]", 0, 1)
def _set_letters(sh, args, opts):
    sh.out(sh.session.set_index_letters(args[0] if args else None))


@command("set-reserved", "<symbol>...", 0)
def _set_reserved(sh, args, opts):
    sh.out(", ".join(sh.session.set_reserved_symbols(args)))


@command("set-assumptions", "['<predicate>'...] [--clear] [--real on|off]", 0,
         options=("real",), flags=("clear",))
def _set_assumptions(sh, args, opts):
    real = opts["real"]
    d = sh.session.set_assumptions(args, clear=opts["clear"],
                                   real=None if real is None else on_off(real))
    sh.out(f"AssumeReal: {d['AssumeReal']}; User: {', '.join(d['User']) or '(none)'}")


@command("set-overwrite", "on|off", 0, 1)
def _set_overwrite(sh, args, opts):
    flag = sh.session.set_allow_overwrite(on_off(args[0]) if args else None)
    if not args:
        sh.out("on" if flag else "off")


@command("set-parallel", "on|off|auto [workers]", 0, 2)
def _set_parallel(sh, args, opts):
    if args:
        configure_parallel(sh.session, args[0], int(args[1]) if len(args) > 1 else None)
    s = sh.session
    if s.options.parallelize:
        sh.out(f"Parallelization on: {s.options.workers or default_workers()} workers.")
    else:
        sh.out("Parallelization off.")


def configure_parallel(session: Session, mode: str, workers: int | None = None):
    if mode == "auto":
        flag = (workers or default_workers()) > 1
    else:
        flag = on_off(mode)
    session.set_parallelize(flag, workers)


@command("set-curve-parameter", "[symbol]", 0, 1)
def _set_curve(sh, args, opts):
    sh.out(geodesic.set_curve_parameter(sh.session, args[0] if args else None))


@command("set-format", "plain|latex", 1, 1)
def _set_format(sh, args, opts):
    if args[0] not in ("plain", "latex"):
        raise UsageError("the format is plain or latex")
    sh.style = args[0]


@command("bench", "christoffel <metric> [--repeat K] [--workers N]", 2, 2,
         options=("repeat", "workers"))
def _bench(sh, args, opts):
    repeat = int(opts["repeat"] or 3)
    workers = opts["workers"]
    if args[0] != "christoffel":
        raise UsageError("only 'bench christoffel' is available")
    r = curvature.benchmark_christoffel(sh.session, args[1], repeat,
                                        int(workers) if workers else sh.session.options.workers)
    sh.out(f"serial: {r['serial']:.3f} s; parallel ({r['workers']} workers): "
           f"{r['parallel']:.3f} s; ratio {r['ratio']:.2f}")


# ---------------------------------------------------------------------------
# drivers

def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (SchemaError, VersionUnsupported)):
        return EXIT_SCHEMA
    if isinstance(exc, TensorError):
        return getattr(exc, "exit_code", EXIT_COMMAND)
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_COMMAND


def _describe(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def run_script(shell: Shell, lines, err=None) -> int:
    """Run commands in order, stopping at the first failure."""
    err = err or sys.stderr
    for n, line in enumerate(lines, 1):
        try:
            shell.execute(line)
        except Quit:
            return EXIT_OK
        except (TensorError, OSError, ValueError, TypeError, ArithmeticError) as exc:
            print(f"line {n}: {_describe(exc)}", file=err)
            return exit_code_for(exc)
    return EXIT_OK


def repl(shell: Shell, stream=None, err=None) -> int:
    stream, err = stream or sys.stdin, err or sys.stderr
    interactive = stream.isatty()
    while True:
        if interactive:
            print("> ", end="", flush=True)
        line = stream.readline()
        if not line:
            return EXIT_OK
        try:
            shell.execute(line)
        except Quit:
            return EXIT_OK
        except (TensorError, OSError, ValueError, TypeError, ArithmeticError) as exc:
            print(_describe(exc), file=err)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symtensor", description="Symbolic tensor calculations.")
    p.add_argument("--format", choices=("plain", "latex"), default="plain")
    p.add_argument("--parallel", choices=("on", "off", "auto"), default="off")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--load", metavar="FILE", help="start from a saved session")
    p.add_argument("--script", metavar="FILE", help="run commands from FILE ('-' for stdin)")
    p.add_argument("--assume", action="append", default=[], metavar="PRED",
                   help='simplification assumption such as "r >= 0" (repeatable)')
    return p


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    shell = Shell(style=ns.format)
    try:
        if ns.load:
            session_io.import_all(shell.session, ns.load)
        configure_parallel(shell.session, ns.parallel, ns.workers)
        if ns.assume:
            shell.session.set_assumptions(ns.assume)
    except (TensorError, OSError) as exc:
        print(_describe(exc), file=sys.stderr)
        return exit_code_for(exc)
    if ns.script is None:
        return repl(shell)
    if ns.script == "-":
        return run_script(shell, sys.stdin.read().splitlines())
    try:
        with open(ns.script, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        print(_describe(exc), file=sys.stderr)
        return EXIT_IO
    return run_script(shell, lines)


if __name__ == "__main__":
    sys.exit(main())
