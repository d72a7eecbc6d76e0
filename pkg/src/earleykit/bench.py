"""Per-sentence timing and instantiation tallies for the four engines, as CSV."""

from __future__ import annotations

import csv
import gc
import io
import statistics
import time
from dataclasses import dataclass, field
from typing import Optional

from .earley import compile_grammar, recognize_fast, recognize_naive
from .earley_fsa import recognize_fsa, recognize_fsa_binarized
from .errors import TimeBudgetExceeded
from .grammar import Grammar
from .transform import preprocess_pipeline
from .wfsa import Wfsa, build_side_tables, determinize_minimize_boolean, encode_cfg_as_wfsa, preprocess_wfsa

ENGINES = ("earley", "fast", "fsa", "fsa-bin")
HEADER = ("grammar", "engine", "length", "seconds", "items", "rule_counts")
DEFAULT_TIME_BUDGET = 180.0
TIMEOUT = "timeout"


@dataclass
class BenchRow:
    grammar: str
    engine: str
    length: int
    seconds: object  # median seconds, or TIMEOUT
    items: Optional[int]
    rule_counts: dict = field(default_factory=dict)

    def cells(self) -> list:
        secs = self.seconds if self.seconds == TIMEOUT else f"{self.seconds:.6f}"
        counts = " ".join(f"{r}={c}" for r, c in sorted(self.rule_counts.items()))
        return [self.grammar, self.engine, self.length, secs, "" if self.items is None else self.items, counts]


@dataclass
class BenchConfig:
    grammar: Optional[Grammar] = None
    grammar_id: str = "grammar"
    sentences: list = field(default_factory=list)
    engines: tuple = ("earley", "fast")
    repeats: int = 1
    time_budget: float = DEFAULT_TIME_BUDGET
    no_time: bool = False
    wfsa: Optional[Wfsa] = None  # used by the fsa engines instead of encoding the grammar
    minimize_fsa: bool = False  # boolean determinize + minimize before the fsa engines
    seed: Optional[int] = None


class _Prepared:
    """Everything outside the timed region: preprocessing, compilation, side tables."""

    def __init__(self, config: BenchConfig):
        self.cfg = None
        self.tables = None
        self.fsa = None
        self.side = None
        needs_cfg = any(e in ("earley", "fast") for e in config.engines)
        needs_fsa = any(e in ("fsa", "fsa-bin") for e in config.engines)
        if config.grammar is not None and (needs_cfg or (needs_fsa and config.wfsa is None)):
            pp = preprocess_pipeline(config.grammar)
            self.cfg, self.tables = pp.grammar, pp.tables
            compile_grammar(self.cfg)
        if needs_fsa:
            if config.wfsa is not None:
                m = preprocess_wfsa(config.wfsa)
            else:
                m = encode_cfg_as_wfsa(self.cfg)
            if config.minimize_fsa:
                m = determinize_minimize_boolean(m, forget_weights=True)
            self.fsa = m
            self.side = build_side_tables(m)

    def runner(self, engine):
        if engine == "earley":
            return lambda x, d: recognize_naive(self.cfg, x, deadline=d)
        if engine == "fast":
            return lambda x, d: recognize_fast(self.cfg, x, tables=self.tables, deadline=d)
        if engine == "fsa":
            return lambda x, d: recognize_fsa(self.fsa, x, tables=self.side, deadline=d)
        if engine == "fsa-bin":
            return lambda x, d: recognize_fsa_binarized(self.fsa, x, tables=self.side, deadline=d)
        raise ValueError(f"unknown engine {engine!r}; choose from {', '.join(ENGINES)}")


def _timed(run, x, budget):
    """One parse with the cyclic collector paused, as timeit does; returns (result, seconds)."""
    gc.collect()
    enabled = gc.isenabled()
    gc.disable()
    try:
        t0 = time.perf_counter()
        result = run(x, t0 + budget)
        return result, time.perf_counter() - t0
    finally:
        if enabled:
            gc.enable()


def run_bench(config: BenchConfig) -> list:
    for e in config.engines:
        if e not in ENGINES:
            raise ValueError(f"unknown engine {e!r}; choose from {', '.join(ENGINES)}")
    if not config.sentences:
        return []
    prep = _Prepared(config)
    rows = []
    for engine in config.engines:
        run = prep.runner(engine)
        for x in config.sentences:
            x = tuple(x)
            times = []
            result = None
            try:
                for _ in range(max(config.repeats, 1)):
                    result, secs = _timed(run, x, config.time_budget)
                    times.append(secs)
            except TimeBudgetExceeded:
                rows.append(BenchRow(config.grammar_id, engine, len(x), TIMEOUT, None, {}))
                continue
            secs = 0.0 if config.no_time else statistics.median(times)
            rows.append(BenchRow(config.grammar_id, engine, len(x), secs, result.items, dict(result.stats)))
    return rows


def rows_to_csv(rows, seed: Optional[int] = None) -> str:
    buf = io.StringIO()
    if seed is not None:
        buf.write(f"# seed={seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def read_sentences(path) -> list:
    with open(path, encoding="utf-8") as f:
        return [tuple(line.split()) for line in f if line.strip()]


def median_by_length(rows, engine) -> dict:
    """``{length: median seconds}`` over the rows of one engine (timeouts excluded)."""
    by_len: dict = {}
    for r in rows:
        if r.engine == engine and r.seconds != TIMEOUT:
            by_len.setdefault(r.length, []).append(r.seconds)
    return {n: statistics.median(v) for n, v in sorted(by_len.items())}
