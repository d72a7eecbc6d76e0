"""Weight algebras.

Every engine and grammar transform is generic over a :class:`Semiring`
instance.  Weights are plain Python values (``bool`` or ``float``), except
for the Viterbi semiring whose weights are :class:`Scored` pairs carrying a
backpointer trace.
"""

from __future__ import annotations

import math
from typing import Any, NamedTuple

from .errors import BadWeight, Divergent

ABS_TOL = 1e-12
REL_TOL = 1e-9

INF = math.inf


class Semiring:
    """A commutative semiring, optionally closed (with a star operator).

    Subclasses override the arithmetic; the base class carries the metadata
    and the numeric helpers used by fixed-point solvers and tests.
    """

    name = "abstract"
    zero: Any = None
    one: Any = None
    commutative = True
    has_star = True
    idempotent = False

    def plus(self, a, b):
        raise NotImplementedError

    def times(self, a, b):
        raise NotImplementedError

    def star(self, w):
        raise NotImplementedError

    def sum(self, values):
        total = self.zero
        for v in values:
            total = self.plus(total, v)
        return total

    def product(self, values):
        total = self.one
        for v in values:
            total = self.times(total, v)
        return total

    def is_zero(self, w) -> bool:
        return w == self.zero

    # -- conversions -----------------------------------------------------

    def parse(self, text: str):
        """Parse a decimal literal from a grammar or automaton file."""
        try:
            value = float(text)
        except ValueError:
            raise BadWeight(f"cannot parse weight {text!r} for semiring {self.name}") from None
        if math.isnan(value):
            raise BadWeight(f"NaN weight {text!r}")
        return self._from_float(value, text)

    def _from_float(self, value, text):
        return value

    def format(self, w) -> str:
        return f"{w:.17g}"

    def lift(self, p: float):
        """Map a probability in [0, 1] into the carrier (used by generators)."""
        raise NotImplementedError

    def score(self, w) -> float:
        """A real number that orders/compares weights (used in tests and ties)."""
        return float(w)

    # -- numerics ------------------------------------------------------

    def distance(self, a, b) -> float:
        a, b = self.score(a), self.score(b)
        if a == b:
            return 0.0
        return abs(a - b)

    def diverged(self, w) -> bool:
        return False

    def close(self, a, b, rel=REL_TOL, abs_=ABS_TOL) -> bool:
        x, y = self.score(a), self.score(b)
        if x == y:
            return True
        if math.isinf(x) or math.isinf(y):
            return False
        return math.isclose(x, y, rel_tol=rel, abs_tol=abs_)

    # Viterbi attaches a production id to each rule axiom; everyone else
    # leaves the weight untouched.
    def axiom(self, w, token):
        return w

    def __repr__(self):
        return f"<Semiring {self.name}>"


class BooleanSemiring(Semiring):
    name = "boolean"
    zero = False
    one = True
    idempotent = True

    def plus(self, a, b):
        return a or b

    def times(self, a, b):
        return a and b

    def star(self, w):
        return True

    def parse(self, text):
        t = text.strip().lower()
        if t in ("1", "true", "1.0"):
            return True
        if t in ("0", "false", "0.0"):
            return False
        raise BadWeight(f"boolean weight must be 1 or 0, got {text!r}")

    def format(self, w):
        return "true" if w else "false"

    def lift(self, p):
        return p > 0

    def score(self, w):
        return 1.0 if w else 0.0


class RealSemiring(Semiring):
    """Non-negative reals under + and x (the probability semiring)."""

    name = "real"
    zero = 0.0
    one = 1.0

    def plus(self, a, b):
        return a + b

    def times(self, a, b):
        return a * b

    def star(self, w):
        if w >= 1.0:
            raise Divergent(f"star({w!r}) diverges in the real semiring")
        return 1.0 / (1.0 - w)

    def _from_float(self, value, text):
        if value < 0:
            raise BadWeight(f"negative weight {text!r} in the real semiring")
        return value

    def lift(self, p):
        return float(p)

    def diverged(self, w):
        return w > 1e12 or math.isinf(w)


class LogSemiring(Semiring):
    """Log-space reals: plus is log-sum-exp, times is addition."""

    name = "log"
    zero = -INF
    one = 0.0

    def plus(self, a, b):
        if a == -INF:
            return b
        if b == -INF:
            return a
        if a < b:
            a, b = b, a
        return a + math.log1p(math.exp(b - a))

    def times(self, a, b):
        if a == -INF or b == -INF:
            return -INF
        return a + b

    def star(self, w):
        if w >= 0.0:
            raise Divergent(f"star({w!r}) diverges in the log semiring")
        if w == -INF:
            return 0.0
        return -math.log1p(-math.exp(w))

    def lift(self, p):
        return math.log(p) if p > 0 else -INF

    def diverged(self, w):
        return w > math.log(1e12)


class TropicalSemiring(Semiring):
    """Min-plus over the reals extended with +inf."""

    name = "tropical"
    zero = INF
    one = 0.0
    idempotent = True

    def plus(self, a, b):
        return a if a <= b else b

    def times(self, a, b):
        return a + b

    def star(self, w):
        if w < 0.0:
            raise Divergent(f"star({w!r}) diverges in the tropical semiring")
        return 0.0

    def lift(self, p):
        return -math.log(p) if p > 0 else INF

    def diverged(self, w):
        return w < -1e12


class Scored(NamedTuple):
    score: float
    trace: tuple = ()


class ViterbiSemiring(Semiring):
    """Max-times with a backpointer trace.

    The trace is the sequence of production ids of the best derivation in
    pre-order; ``times`` concatenates traces, ``plus`` keeps the argument
    with the larger score, breaking ties towards the lexicographically
    smaller trace.
    """

    name = "viterbi"
    zero = Scored(0.0, ())
    one = Scored(1.0, ())
    idempotent = True

    def plus(self, a, b):
        if a.score > b.score:
            return a
        if b.score > a.score:
            return b
        return a if a.trace <= b.trace else b

    def times(self, a, b):
        s = a.score * b.score
        if s == 0.0:
            return self.zero
        return Scored(s, a.trace + b.trace)

    def star(self, w):
        if w.score > 1.0:
            raise Divergent(f"star({w.score!r}) diverges in the viterbi semiring")
        return self.one

    def is_zero(self, w):
        return w.score == 0.0

    def _from_float(self, value, text):
        if value < 0:
            raise BadWeight(f"negative weight {text!r} in the viterbi semiring")
        return Scored(value, ())

    def format(self, w):
        return f"{w.score:.17g}"

    def lift(self, p):
        return Scored(float(p), ())

    def score(self, w):
        return w.score

    def diverged(self, w):
        return w.score > 1e12

    def axiom(self, w, token):
        return Scored(w.score, (token,))


BOOLEAN = BooleanSemiring()
REAL = RealSemiring()
LOG = LogSemiring()
TROPICAL = TropicalSemiring()
VITERBI = ViterbiSemiring()

SEMIRINGS = {
    "boolean": BOOLEAN,
    "real": REAL,
    "probability": REAL,
    "log": LOG,
    "tropical": TROPICAL,
    "viterbi": VITERBI,
}


def get_semiring(name: str) -> Semiring:
    try:
        return SEMIRINGS[name]
    except KeyError:
        raise ValueError(f"unknown semiring {name!r}; choose from {sorted(SEMIRINGS)}") from None
