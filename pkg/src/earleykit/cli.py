"""Command-line entry point: preprocess, recognize, parse, prefix, bench."""

from __future__ import annotations

import argparse
import logging
import sys

from .bench import BenchConfig, ENGINES, read_sentences, rows_to_csv, run_bench
from .earley import best_derivation, recognize_fast, recognize_naive
from .earley_fsa import recognize_fsa, recognize_fsa_binarized
from .errors import DataError, EarleyError
from .grammar import load_grammar
from .oracle import oracle_total
from .semiring import SEMIRINGS, get_semiring
from .transform import preprocess_pipeline
from .wfsa import (
    build_side_tables,
    determinize_minimize_boolean,
    encode_cfg_as_wfsa,
    load_wfsa,
    preprocess_wfsa,
)

log = logging.getLogger("earleykit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MISMATCH = 0, 1, 2, 3


class UsageError(Exception):
    pass


class OracleMismatch(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common(p, engines=None):
    p.add_argument("--grammar", help="weighted CFG file (.wcfg)")
    p.add_argument("--wfsa", help="WFSA grammar file (.fsa), or a .wcfg to encode on the fly")
    p.add_argument("--semiring", default="real", choices=sorted(SEMIRINGS))
    p.add_argument("--stats", action="store_true", help="append item and rule-instantiation counts")
    p.add_argument("--oracle-check", action="store_true", help="compare against brute-force enumeration")
    p.add_argument("--input", help="sentence file, one per line (default: stdin)")
    if engines:
        p.add_argument("--engine", default="fast", choices=engines)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="earleykit", description="Weighted Earley parsing toolkit.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("preprocess", help="remove nullary rules and unary cycles")
    p.add_argument("--grammar", required=True)
    p.add_argument("--semiring", default="real", choices=sorted(SEMIRINGS))
    p.add_argument("--out", help="write the preprocessed grammar here (default: stdout)")
    p.add_argument("--emit-tables", "--tables", dest="tables", help="write the closure tables here (tab-separated)")
    p.add_argument("--to-wfsa", help="write the preprocessed WFSA encoding here")
    p.add_argument("--determinize-boolean", action="store_true")
    p.add_argument("--minimize-boolean", action="store_true")
    p.add_argument("--forget-weights", action="store_true",
                   help="allow boolean determinization of a weighted automaton")

    p = sub.add_parser("recognize", help="total weight of each sentence")
    _common(p, ENGINES)
    p.add_argument("--lookahead", action="store_true")
    p.add_argument("--prefix", action="store_true", help="also print prefix weights (fast engine)")

    p = sub.add_parser("parse", help="best derivation under the viterbi semiring")
    _common(p, ("earley", "fast"))

    p = sub.add_parser("prefix", help="prefix weights of each sentence")
    _common(p)
    p.add_argument("--lookahead", action="store_true")

    p = sub.add_parser("bench", help="time engines over a sentence file, write CSV")
    p.add_argument("--grammar")
    p.add_argument("--wfsa")
    p.add_argument("--semiring", default="real", choices=sorted(SEMIRINGS))
    p.add_argument("--sentences", required=True)
    p.add_argument("--engines", default="earley,fast")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--time-budget", type=float, default=180.0)
    p.add_argument("--no-time", action="store_true", help="zero the seconds column")
    p.add_argument("--seed", type=int, help="recorded in a leading CSV comment")
    p.add_argument("--minimize-boolean", action="store_true",
                   help="determinize and minimize the automaton (weights forgotten) for fsa engines")
    return ap


def _sentences(args) -> list:
    if args.input:
        with open(args.input, encoding="utf-8") as f:
            text = f.read()
    else:
        text = sys.stdin.read()
    return [tuple(line.split()) for line in text.splitlines()]


def _load_fsa(path, sr):
    if path.endswith(".wcfg"):
        return preprocess_wfsa(encode_cfg_as_wfsa(load_grammar(path, sr)))
    return preprocess_wfsa(load_wfsa(path, sr))


def _stats_text(result) -> str:
    counts = " ".join(f"{r}={c}" for r, c in sorted(result.stats.items()))
    return f"items={result.items} {counts}".rstrip()


def cmd_preprocess(args):
    sr = get_semiring(args.semiring)
    g = load_grammar(args.grammar, sr)
    pp = preprocess_pipeline(g)
    text = pp.grammar.to_text()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    if args.tables:
        with open(args.tables, "w", encoding="utf-8") as f:
            f.write(pp.tables.to_text(pp.grammar))
    if args.to_wfsa:
        m = preprocess_wfsa(encode_cfg_as_wfsa(g))
        if args.determinize_boolean or args.minimize_boolean:
            m = determinize_minimize_boolean(m, forget_weights=args.forget_weights,
                                             minimize=args.minimize_boolean)
        with open(args.to_wfsa, "w", encoding="utf-8") as f:
            f.write(m.to_text())
        log.info("wfsa: %d states, %d arcs", m.num_states, m.size)
    return EXIT_OK


def _grammar_and_engine(args, sr):
    """A ``run(x) -> ParseResult`` closure plus the preprocessed CFG (if any)."""
    engine = args.engine
    if engine in ("fsa", "fsa-bin"):
        if args.wfsa:
            m = _load_fsa(args.wfsa, sr)
            pp = preprocess_pipeline(load_grammar(args.grammar, sr), tables=False) if args.grammar else None
        elif args.grammar:
            pp = preprocess_pipeline(load_grammar(args.grammar, sr), tables=False)
            m = encode_cfg_as_wfsa(pp.grammar)
        else:
            raise UsageError("the fsa engines need --wfsa or --grammar")
        side = build_side_tables(m)
        fn = recognize_fsa if engine == "fsa" else recognize_fsa_binarized
        return (lambda x: fn(m, x, tables=side)), (pp.grammar if pp else None)
    if not args.grammar:
        raise UsageError(f"engine {engine} needs --grammar")
    pp = preprocess_pipeline(load_grammar(args.grammar, sr), tables=engine == "fast")
    if engine == "earley":
        return (lambda x: recognize_naive(pp.grammar, x)), pp.grammar
    look = getattr(args, "lookahead", False)
    prefix = getattr(args, "prefix", False)
    return (lambda x: recognize_fast(pp.grammar, x, tables=pp.tables, lookahead=look, prefix=prefix)), pp.grammar


def _oracle(args, g, x, total):
    if g is None:
        raise UsageError("--oracle-check needs --grammar")
    want = oracle_total(g, x)
    if not g.semiring.close(want, total):
        raise OracleMismatch(
            f"sentence {' '.join(x)!r}: engine {g.semiring.format(total)}, oracle {g.semiring.format(want)}"
        )


def cmd_recognize(args):
    sr = get_semiring(args.semiring)
    if args.prefix and args.engine != "fast":
        raise UsageError("--prefix needs --engine fast")
    run, g = _grammar_and_engine(args, sr)
    for x in _sentences(args):
        result = run(x)
        fields = [sr.format(result.total)]
        if args.prefix:
            fields += [sr.format(w) for w in result.prefix]
        if args.stats:
            fields.append(_stats_text(result))
        print("\t".join(fields))
        if args.oracle_check:
            _oracle(args, g, x, result.total)
    return EXIT_OK


def cmd_parse(args):
    if args.semiring != "viterbi":
        log.info("parse uses the viterbi semiring; --semiring %s ignored", args.semiring)
    sr = get_semiring("viterbi")
    if not args.grammar:
        raise UsageError("parse needs --grammar")
    pp = preprocess_pipeline(load_grammar(args.grammar, sr), tables=False)
    for x in _sentences(args):
        result = best_derivation(pp.grammar, x, engine=args.engine)
        fields = [sr.format(result.total), result.best_tree]
        if args.stats:
            fields.append(_stats_text(result))
        print("\t".join(fields))
        if args.oracle_check:
            _oracle(args, pp.grammar, x, result.total)
    return EXIT_OK


def cmd_prefix(args):
    sr = get_semiring(args.semiring)
    if not args.grammar:
        raise UsageError("prefix needs --grammar (the fsa engines have no prefix mode)")
    pp = preprocess_pipeline(load_grammar(args.grammar, sr))
    for x in _sentences(args):
        result = recognize_fast(pp.grammar, x, prefix=True, tables=pp.tables, lookahead=args.lookahead)
        fields = [sr.format(w) for w in result.prefix]
        if args.stats:
            fields.append(_stats_text(result))
        print("\t".join(fields))
    return EXIT_OK


def cmd_bench(args):
    sr = get_semiring(args.semiring)
    engines = tuple(e.strip() for e in args.engines.split(",") if e.strip())
    bad = [e for e in engines if e not in ENGINES]
    if bad:
        raise UsageError(f"unknown engine(s) {', '.join(bad)}; choose from {', '.join(ENGINES)}")
    if not args.grammar and not args.wfsa:
        raise UsageError("bench needs --grammar or --wfsa")
    if args.wfsa and any(e in ("earley", "fast") for e in engines) and not args.grammar:
        raise UsageError("engines earley/fast need --grammar")
    g = load_grammar(args.grammar, sr) if args.grammar else None
    m = None
    if args.wfsa:
        m = encode_cfg_as_wfsa(load_grammar(args.wfsa, sr)) if args.wfsa.endswith(".wcfg") else load_wfsa(args.wfsa, sr)
    config = BenchConfig(
        grammar=g,
        grammar_id=args.grammar or args.wfsa,
        sentences=read_sentences(args.sentences),
        engines=engines,
        repeats=args.repeats,
        time_budget=args.time_budget,
        no_time=args.no_time,
        wfsa=m,
        minimize_fsa=args.minimize_boolean,
        seed=args.seed,
    )
    text = rows_to_csv(run_bench(config), seed=args.seed)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "preprocess": cmd_preprocess,
    "recognize": cmd_recognize,
    "parse": cmd_parse,
    "prefix": cmd_prefix,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"earleykit: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OracleMismatch as e:
        print(f"OracleMismatch: {e}", file=sys.stderr)
        return EXIT_MISMATCH
    except (DataError, EarleyError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
