"""Acceptance criteria 1-9.

Each test prints one ``criterion N: PASS|FAIL`` line (shown even without
``-s``).  Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import contextlib
import itertools
import math
import random
import sys
import time
from functools import lru_cache

import numpy as np
import pytest

from earleykit.bench import BenchConfig, median_by_length, run_bench
from earleykit.earley import recognize_fast, recognize_naive
from earleykit.earley_fsa import recognize_fsa, recognize_fsa_binarized
from earleykit.oracle import inside_all_strings, oracle_total, truncated_prefix_weight
from earleykit.semiring import BOOLEAN, LOG, REAL, TROPICAL, VITERBI, Scored
from earleykit.synthetic import (
    bench_grammar, bench_sentences, convert_weights, geometric_left, geometric_right, noun_phrase_family,
    noun_phrase_sentences, random_cyclic_grammar, random_preprocessed_grammar, random_tight_pcfg, sentence_suite,
)
from earleykit.transform import closure_tables, null_weights, preprocess_pipeline, unary_closure
from earleykit.wfsa import (
    EPS, Wfsa, build_side_tables, determinize_minimize_boolean, eliminate_epsilon_cycles, encode_cfg_as_wfsa,
    enumerate_strings, has_epsilon_cycle, is_deterministic, preprocess_wfsa, trim, wfsa_eliminate_unary,
)

from conftest import NULL_TEXT, grammar

SUITE_GRAMMARS = 200
SUITE_SENTENCES = 20
SUITE_MAX_LEN = 8
SEMIRINGS = (REAL, BOOLEAN, TROPICAL)
ENGINE_NAMES = ("earley", "fast", "fsa", "fsa-bin")


@pytest.fixture
def criterion(capsys):
    """``with criterion(n, title) as info:`` prints PASS/FAIL with ``info['detail']``."""

    @contextlib.contextmanager
    def run(n, title):
        info = {"detail": ""}
        t0 = time.perf_counter()
        try:
            yield info
        except BaseException as e:
            line = f"criterion {n}: FAIL  {title}  ({type(e).__name__}: {str(e).splitlines()[0] if str(e) else ''})"
            with capsys.disabled():
                print("\n" + line)
            raise
        secs = time.perf_counter() - t0
        with capsys.disabled():
            print(f"\ncriterion {n}: PASS  {title}  [{secs:.1f}s] {info['detail']}")

    return run


@lru_cache(maxsize=None)
def suite():
    """The shared random suite: ``[(grammar, sentences)]``."""
    out = []
    for seed in range(SUITE_GRAMMARS):
        g = random_preprocessed_grammar(seed)
        out.append((g, sentence_suite(g, seed, SUITE_SENTENCES, SUITE_MAX_LEN)))
    return out


def _agree(sr, a, b):
    return sr.close(a, b) if sr is REAL else a == b


# ---------------------------------------------------------------------------
# 1. semiring axioms


def _sample(sr, rng):
    if sr is BOOLEAN:
        return rng.random() < 0.5
    if sr is REAL:
        return 0.0 if rng.random() < 0.05 else rng.uniform(0.0, 3.0)
    if sr is LOG:
        return -math.inf if rng.random() < 0.05 else rng.uniform(-8.0, 2.0)
    if sr is TROPICAL:
        return math.inf if rng.random() < 0.05 else rng.uniform(0.0, 10.0)
    if sr is VITERBI:
        return VITERBI.zero if rng.random() < 0.05 else Scored(rng.uniform(0.0, 1.0), (rng.randrange(50),))
    raise AssertionError(sr)


def _sample_star(sr, rng):
    if sr is BOOLEAN:
        return rng.random() < 0.5
    if sr is REAL:
        return rng.uniform(0.0, 0.99)
    if sr is LOG:
        return rng.uniform(-8.0, -0.01)
    if sr is TROPICAL:
        return rng.uniform(0.0, 10.0)
    return Scored(rng.uniform(0.0, 1.0), (rng.randrange(50),))


def _eq(sr, a, b):
    # viterbi ties may keep different traces; the score is what the axioms constrain
    return sr.close(a, b) if sr is not BOOLEAN else a == b


def test_criterion_1_semiring_axioms(criterion):
    with criterion(1, "semiring axioms, 1000 triples per semiring") as info:
        t0 = time.perf_counter()
        rng = random.Random(1)
        checked = 0
        for sr in (BOOLEAN, REAL, LOG, TROPICAL, VITERBI):
            P, T = sr.plus, sr.times
            for _ in range(1000):
                a, b, c = (_sample(sr, rng) for _ in range(3))
                assert _eq(sr, P(P(a, b), c), P(a, P(b, c))), (sr, a, b, c)
                assert _eq(sr, T(T(a, b), c), T(a, T(b, c))), (sr, a, b, c)
                assert _eq(sr, P(a, b), P(b, a)), (sr, a, b)
                assert _eq(sr, T(a, b), T(b, a)), (sr, a, b)
                assert _eq(sr, T(a, P(b, c)), P(T(a, b), T(a, c))), (sr, a, b, c)
                assert _eq(sr, T(P(a, b), c), P(T(a, c), T(b, c))), (sr, a, b, c)
                assert _eq(sr, P(a, sr.zero), a) and _eq(sr, T(a, sr.one), a) and _eq(sr, T(sr.one, a), a)
                assert sr.is_zero(T(a, sr.zero)) and sr.is_zero(T(sr.zero, a))
                checked += 1
            for _ in range(1000):
                w = _sample_star(sr, rng)
                s = sr.star(w)
                assert _eq(sr, s, P(sr.one, T(w, s))), (sr, w)
                assert _eq(sr, s, P(sr.one, T(s, w))), (sr, w)
        secs = time.perf_counter() - t0
        assert secs < 1.0, f"took {secs:.2f}s"
        info["detail"] = f"{checked} triples, {secs:.2f}s"


# ---------------------------------------------------------------------------
# 2 and 3. engine and oracle equivalence


@lru_cache(maxsize=None)
def engine_totals():
    """``{(grammar index, semiring name): [{engine: total}]}`` plus the elapsed engine time."""
    t0 = time.perf_counter()
    table = {}
    for gi, (g0, sents) in enumerate(suite()):
        for sr in SEMIRINGS:
            g = convert_weights(g0, sr)
            tables = closure_tables(g)
            m = encode_cfg_as_wfsa(g)
            side = build_side_tables(m)
            rows = []
            for x in sents:
                rows.append({
                    "earley": recognize_naive(g, x).total,
                    "fast": recognize_fast(g, x, tables=tables).total,
                    "fsa": recognize_fsa(m, x, tables=side).total,
                    "fsa-bin": recognize_fsa_binarized(m, x, tables=side).total,
                })
            table[(gi, sr.name)] = rows
    return table, time.perf_counter() - t0


def test_criterion_2_engine_equivalence(criterion):
    with criterion(2, "engine equivalence earley/fast/fsa/fsa-bin, 200 grammars x 20 sentences") as info:
        table, secs = engine_totals()
        mismatches = []
        for (gi, name), rows in table.items():
            sr = {s.name: s for s in SEMIRINGS}[name]
            for si, row in enumerate(rows):
                ref = row["earley"]
                for e in ENGINE_NAMES[1:]:
                    if not _agree(sr, row[e], ref):
                        mismatches.append((gi, name, si, e, row[e], ref))
        parses = sum(len(rows) for rows in table.values())
        assert not mismatches, f"{len(mismatches)} mismatches, first {mismatches[0]}"
        assert secs < 60.0, f"engines took {secs:.1f}s"
        info["detail"] = f"{parses} parses x 4 engines, engines {secs:.1f}s"


def test_criterion_3_oracle_equivalence(criterion):
    with criterion(3, "engine totals equal brute-force derivation sums") as info:
        table, _ = engine_totals()
        bad = []
        checked = 0
        for gi, (g0, sents) in enumerate(suite()):
            for sr in SEMIRINGS:
                g = convert_weights(g0, sr)
                rows = table[(gi, sr.name)]
                for si, x in enumerate(sents):
                    want = oracle_total(g, x)
                    checked += 1
                    for e in ENGINE_NAMES:
                        # the stated 1e-9 for every carrier: the oracle multiplies in tree order
                        got = rows[si][e]
                        if not (got == want if sr is BOOLEAN else sr.close(got, want)):
                            bad.append((gi, sr.name, x, e, rows[si][e], want))
        assert not bad, f"{len(bad)} disagreements, first {bad[0]}"
        info["detail"] = f"{checked} sentences"


# ---------------------------------------------------------------------------
# 4. transform preservation


def test_criterion_4_transform_preservation(criterion):
    with criterion(4, "preprocessing preserves Z_x on 100 grammars with eps-rules and unary cycles") as info:
        worst = 0.0
        strings = 0
        for seed in range(100):
            g = random_cyclic_grammar(seed)
            assert any(not p.rhs for p in g.productions)
            pp = preprocess_pipeline(g)
            want = inside_all_strings(g, 5, alphabet=("a", "b"))
            for s, w in want.items():
                got = recognize_fast(pp.grammar, s, tables=pp.tables).total
                worst = max(worst, abs(got - w))
                strings += 1
        assert worst <= 1e-6, f"worst error {worst:.3g}"
        e = null_weights(grammar(NULL_TEXT))["A"]
        assert abs(e - (2 - math.sqrt(2))) <= 1e-9, e
        chain = unary_closure(grammar("0.5 A -> B\n0.5 B -> A\n1 B -> b\n1 A -> a\n")).chain[("A", "B")]
        assert abs(chain - 2 / 3) <= 1e-12, chain
        info["detail"] = f"{strings} strings, worst error {worst:.2g}; e_A and w(A=>*B) exact"


# ---------------------------------------------------------------------------
# 5. prefix weights


def test_criterion_5_prefix_weights(criterion):
    with criterion(5, "prefix weights on G5/G4 and monotone on 50 tight PCFGs") as info:
        for make in (geometric_right, geometric_left):
            g = make(0.5)
            tables = closure_tables(g)
            prefix = recognize_fast(g, ["a"] * 12, prefix=True, tables=tables).prefix
            for k in range(1, 13):
                assert abs(prefix[k - 1] - 0.5 ** (k - 1)) <= 1e-9, (make.__name__, k, prefix[k - 1])
                bound = truncated_prefix_weight(g, ["a"] * k, k + 6)
                assert bound.tail_known
                assert abs(prefix[k - 1] - (bound.lower + bound.tail)) <= 1e-9, (make.__name__, k)
        sentences = 0
        for seed in range(50):
            g = random_tight_pcfg(seed)
            pp = preprocess_pipeline(g)
            for x in sentence_suite(g, seed, 10, 8):
                r = recognize_fast(pp.grammar, x, prefix=True, tables=pp.tables)
                for k in range(1, len(x)):
                    assert r.prefix[k] <= r.prefix[k - 1] + 1e-12, (seed, x, r.prefix)
                assert r.prefix[-1] >= r.total - 1e-12, (seed, x)
                sentences += 1
        info["detail"] = f"k <= 12 exact on both families; {sentences} PCFG sentences monotone"


# ---------------------------------------------------------------------------
# 6. complexity scaling


def _slope(ns, counts):
    return float(np.polyfit(np.log(ns), np.log(counts), 1)[0])


def test_criterion_6_complexity_scaling(criterion):
    with criterion(6, "Comp2 slope <= 3.2 (ambiguous), item slope <= 2.2 (unambiguous)") as info:
        t0 = time.perf_counter()
        ns = [8, 16, 32, 64]
        amb = grammar("start: S\n0.2 S -> S S\n0.8 S -> a\n")
        comp2 = [recognize_fast(amb, ["a"] * n).stats["Comp2"] for n in ns]
        unamb = grammar("start: S\n0.5 S -> a S\n0.5 S -> a\n")
        items = [recognize_fast(unamb, ["a"] * n).items for n in ns]
        s1, s2 = _slope(ns, comp2), _slope(ns, items)
        secs = time.perf_counter() - t0
        assert s1 <= 3.2, f"Comp2 slope {s1:.2f} ({comp2})"
        assert s2 <= 2.2, f"item slope {s2:.2f} ({items})"
        assert secs < 120.0
        info["detail"] = f"Comp2 slope {s1:.2f}, item slope {s2:.2f}"


# ---------------------------------------------------------------------------
# 7. speedup ordering


SPEED_LENGTHS = (5, 10, 15, 20, 25)


def test_criterion_7_speedup_ordering(criterion):
    with criterion(7, "earley/fast >= 5x at lengths 5-25 on 5k-production grammar; fsa items < fast items") as info:
        g = bench_grammar()
        assert g.size >= 5000
        assert all(len(pids) >= 2 for pids in g.by_lhs.values())
        pp = preprocess_pipeline(g)
        by_len = bench_sentences(pp.grammar, SPEED_LENGTHS, per_length=1, seed=0)
        sents = [s for n in SPEED_LENGTHS for s in by_len[n]]
        assert {len(s) for s in sents} == set(SPEED_LENGTHS)
        # warm caches, then time
        recognize_fast(pp.grammar, sents[0], tables=pp.tables)
        recognize_naive(pp.grammar, sents[0])
        rows = run_bench(BenchConfig(grammar=g, sentences=sents, engines=("earley", "fast"), repeats=3))
        slow, fast = median_by_length(rows, "earley"), median_by_length(rows, "fast")
        ratios = {n: slow[n] / fast[n] for n in SPEED_LENGTHS}
        assert all(r >= 5.0 for r in ratios.values()), ratios

        npg = noun_phrase_family(sr=BOOLEAN)
        rows = run_bench(BenchConfig(grammar=npg, sentences=noun_phrase_sentences(count=10), engines=("fast", "fsa"),
                                     minimize_fsa=True, no_time=True))
        pairs = list(zip([r for r in rows if r.engine == "fast"], [r for r in rows if r.engine == "fsa"]))
        assert all(f.items > s.items for f, s in pairs), [(f.items, s.items) for f, s in pairs]
        info["detail"] = ("ratios " + " ".join(f"{n}:{r:.1f}x" for n, r in ratios.items())
                          + f"; items fast/fsa {pairs[0][0].items}/{pairs[0][1].items}")


# ---------------------------------------------------------------------------
# 8. lookahead invariance


def test_criterion_8_lookahead_invariance(criterion):
    with criterion(8, "lookahead changes no weight and prunes predictions") as info:
        changed = []
        for gi, (g0, sents) in enumerate(suite()):
            for sr in SEMIRINGS:
                g = convert_weights(g0, sr)
                tables = closure_tables(g)
                prefix = sr is REAL
                for x in sents:
                    a = recognize_fast(g, x, tables=tables, prefix=prefix)
                    b = recognize_fast(g, x, tables=tables, prefix=prefix, lookahead=True)
                    if a.total != b.total or a.prefix != b.prefix:
                        changed.append((gi, sr.name, x))
        assert not changed, f"{len(changed)} changed, first {changed[0]}"

        pred = lambda s: s["Pred1"] + s["Pred1lr"] + s["Pred2"]  # noqa: E731
        pp = preprocess_pipeline(bench_grammar())
        x = bench_sentences(pp.grammar, (10,), per_length=1, seed=0)[10][0]
        plain = recognize_fast(pp.grammar, x, tables=pp.tables)
        look = recognize_fast(pp.grammar, x, tables=pp.tables, lookahead=True)
        assert look.total == plain.total
        assert pred(look.stats) < pred(plain.stats)
        info["detail"] = f"Pred-family on bench grammar {pred(plain.stats)} -> {pred(look.stats)}"


# ---------------------------------------------------------------------------
# 9. WFSA transforms


def _random_eps_automaton(seed, states=5):
    rng = random.Random(seed)
    m = Wfsa(REAL, states, initial={0: 1.0})
    for q in range(states):
        if rng.random() < 0.5:
            m.final[q] = rng.uniform(0.2, 1.0)
        for _ in range(rng.randint(1, 3)):
            m.add_arc(q, rng.choice(("a", "b", EPS, EPS)), rng.randrange(states), rng.uniform(0.05, 0.3))
    m.final.setdefault(states - 1, 1.0)
    return m


def _matrix_weights(m, strings):
    """String weights by linear algebra: I (E*) M_a1 (E*) ... F."""
    n = m.num_states
    mats = {}
    for a in m.arcs:
        mats.setdefault(a.label, np.zeros((n, n)))[a.src, a.dst] += a.weight
    closure = np.linalg.inv(np.eye(n) - mats.get(EPS, np.zeros((n, n))))
    init, fin = np.zeros(n), np.zeros(n)
    for q, w in m.initial.items():
        init[q] = w
    for q, w in m.final.items():
        fin[q] = w
    out = {}
    for s in strings:
        v = init @ closure
        for lab in s:
            v = v @ mats.get(lab, np.zeros((n, n))) @ closure
        out[s] = float(v @ fin)
    return out


def test_criterion_9_wfsa_transforms(criterion):
    with criterion(9, "WFSA encoding size, eps/nullary/unary elimination, boolean determinize+minimize") as info:
        # encoding arc count
        for g, _ in suite():
            assert encode_cfg_as_wfsa(g).size == g.size

        # epsilon-cycle elimination against the matrix closure
        strings = [s for n in range(6) for s in itertools.product("ab", repeat=n)]
        worst_eps = 0.0
        for seed in range(50):
            m = _random_eps_automaton(seed)
            out = eliminate_epsilon_cycles(m)
            assert not has_epsilon_cycle(out)
            want = _matrix_weights(m, strings)
            got = enumerate_strings(out, 5)
            worst_eps = max(worst_eps, max(abs(got.get(s, 0.0) - want[s]) for s in strings))
        assert worst_eps <= 1e-9, worst_eps

        # nullary + unary elimination: sentence weights against the original grammar
        sentences = [s for n in range(6) for s in itertools.product("ab", repeat=n)]
        worst_cfg = 0.0
        for seed in range(50):
            g = random_cyclic_grammar(seed)
            want = inside_all_strings(g, 5, alphabet=("a", "b"))
            m = preprocess_wfsa(encode_cfg_as_wfsa(g))
            side = build_side_tables(m)
            for s in sentences:
                for engine in (recognize_fsa, recognize_fsa_binarized):
                    worst_cfg = max(worst_cfg, abs(engine(m, s, tables=side).total - want[s]))
            # unary elimination alone, on the same grammar without its epsilon rules
            h = type(g)([p for p in g.productions if p.rhs], g.start, g.semiring)
            want = inside_all_strings(h, 5, alphabet=("a", "b"))
            m = trim(wfsa_eliminate_unary(encode_cfg_as_wfsa(h)))
            side = build_side_tables(m)
            for s in sentences[1:]:
                worst_cfg = max(worst_cfg, abs(recognize_fsa(m, s, tables=side).total - want[s]))
        assert worst_cfg <= 1e-9, worst_cfg

        # boolean determinize + minimize
        grown = 0
        for g0, sents in suite():
            g = convert_weights(g0, BOOLEAN)
            m = encode_cfg_as_wfsa(g)
            d = determinize_minimize_boolean(m)
            assert is_deterministic(d)
            if d.num_states > m.num_states:
                grown += 1
            assert set(enumerate_strings(d, 5)) == set(enumerate_strings(m, 5))
            for x in sents:
                assert recognize_fsa(d, x).total == recognize_naive(g, x).total
        assert grown == 0
        info["detail"] = f"eps worst {worst_eps:.2g}, nullary/unary worst {worst_cfg:.2g}"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
