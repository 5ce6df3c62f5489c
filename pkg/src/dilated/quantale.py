"""Quantales: ordered value carriers for distances and Lipschitz constants.

Three instances are shipped:

* ``BOOLEAN``      -- {False <= True}, tensor = meet, residual = implication.
* ``EXT_REAL_MUL`` -- [0, inf] with the usual order, tensor = product, unit 1.
* ``LAWVERE``      -- [0, inf] with the *reversed* order, tensor = sum, unit 0.

A quantale is a plain bundle of callables so that tests can build a
deliberately broken variant with :func:`dataclasses.replace`.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from functools import reduce
from typing import Any, Callable, Iterable, Sequence

INF = math.inf

# absolute tolerance from the design notes, plus a matching relative term so
# that r*s == t on log-spaced samples is not decided by rounding
ABS_TOL = 1e-12
REL_TOL = 1e-12


def _close(a: float, b: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=ABS_TOL)


@dataclass(frozen=True)
class Quantale:
    name: str
    bottom: Any
    top: Any
    unit: Any
    leq: Callable[[Any, Any], bool]
    tensor: Callable[[Any, Any], Any]
    residual: Callable[[Any, Any], Any]
    eq: Callable[[Any, Any], bool]
    contractive: bool = False

    def lt(self, a, b) -> bool:
        return self.leq(a, b) and not self.eq(a, b)

    def join(self, values: Iterable) -> Any:
        """Least upper bound of a finite set (bottom for the empty set)."""
        out = self.bottom
        for v in values:
            if self.leq(out, v):
                out = v
        return out

    def meet(self, values: Iterable) -> Any:
        out = self.top
        for v in values:
            if self.leq(v, out):
                out = v
        return out

    def power(self, a, n: int) -> Any:
        """n-fold tensor power; ``power(a, 0)`` is the unit."""
        return reduce(self.tensor, [a] * n, self.unit)


# -- Boolean ---------------------------------------------------------------

BOOLEAN = Quantale(
    name="boolean",
    bottom=False,
    top=True,
    unit=True,
    leq=lambda a, b: (not a) or b,
    tensor=lambda a, b: a and b,
    residual=lambda r, t: (not r) or t,
    eq=lambda a, b: a == b,
    contractive=True,
)


# -- [0, inf] under multiplication ---------------------------------------


def _mul(a: float, b: float) -> float:
    # bottom absorbs, including against infinity
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


def _div_residual(r: float, t: float) -> float:
    if r == 0.0:
        return INF
    if math.isinf(r):
        return INF if math.isinf(t) else 0.0
    return t / r


EXT_REAL_MUL = Quantale(
    name="ext_real_mul",
    bottom=0.0,
    top=INF,
    unit=1.0,
    leq=lambda a, b: a <= b or _close(a, b),
    tensor=_mul,
    residual=_div_residual,
    eq=_close,
    contractive=True,
)


# -- Lawvere: [0, inf] reversed, under addition ----------------------------


def _add(a: float, b: float) -> float:
    return a + b


def _sub_residual(r: float, t: float) -> float:
    # largest s in the reversed order = smallest real s with r + s >= t
    if math.isinf(r):
        return 0.0
    if math.isinf(t):
        return INF
    return max(t - r, 0.0)


LAWVERE = Quantale(
    name="lawvere",
    bottom=INF,
    top=0.0,
    unit=0.0,
    leq=lambda a, b: a >= b or _close(a, b),
    tensor=_add,
    residual=_sub_residual,
    eq=_close,
    contractive=True,
)

INSTANCES: dict[str, Quantale] = {q.name: q for q in (BOOLEAN, EXT_REAL_MUL, LAWVERE)}


def tensor(q: Quantale, a, b):
    return q.tensor(a, b)


def residual(q: Quantale, r, t):
    return q.residual(r, t)


# -- law checking ---------------------------------------------------------


@dataclass
class LawResult:
    law: str
    passed: bool
    witness: tuple | None = None
    checked: int = 0


@dataclass
class LawReport:
    quantale: str
    results: list[LawResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, law: str) -> LawResult:
        for r in self.results:
            if r.law == law:
                return r
        raise KeyError(law)

    def failures(self) -> list[LawResult]:
        return [r for r in self.results if not r.passed]

    def summary(self) -> str:
        bad = self.failures()
        if not bad:
            return f"{self.quantale}: {len(self.results)} laws ok"
        first = bad[0]
        return f"{self.quantale}: FAIL {first.law} witness={first.witness!r}"


def _first_failure(law: str, cases: Iterable[tuple], pred: Callable[..., bool]) -> LawResult:
    n = 0
    for case in cases:
        n += 1
        if not pred(*case):
            return LawResult(law, False, case, n)
    return LawResult(law, True, None, n)


def check_laws(
    q: Quantale,
    samples: Sequence,
    seed: int = 42,
    n_join_subsets: int = 200,
    max_triples: int | None = None,
) -> LawReport:
    """Check the quantale axioms on ``samples``, exhaustively over pairs and triples.

    Join-distributivity is checked on ``n_join_subsets`` random finite subsets
    drawn with ``seed``. If ``max_triples`` is given and the sample has more
    triples than that, a seeded subsample of triples is used instead.
    """
    if not samples:
        raise ValueError("samples must be non-empty")
    vals = list(samples)
    for special in (q.bottom, q.top, q.unit):
        if not any(q.eq(special, v) for v in vals):
            vals.append(special)
    rng = random.Random(seed)
    pairs = list(itertools.product(vals, repeat=2))
    n = len(vals)
    if max_triples is not None and n**3 > max_triples:
        triples = [tuple(rng.choice(vals) for _ in range(3)) for _ in range(max_triples)]
    else:
        triples = itertools.product(vals, repeat=3)
        triples = list(triples)

    eq, leq, t = q.eq, q.leq, q.tensor
    report = LawReport(q.name)
    add = report.results.append

    add(_first_failure("unit", ((a,) for a in vals), lambda a: eq(t(q.unit, a), a) and eq(t(a, q.unit), a)))
    add(_first_failure("commutativity", pairs, lambda a, b: eq(t(a, b), t(b, a))))
    add(_first_failure("associativity", triples, lambda a, b, c: eq(t(t(a, b), c), t(a, t(b, c)))))
    add(_first_failure("absorption", ((a,) for a in vals), lambda a: eq(t(q.bottom, a), q.bottom)))
    add(_first_failure("bounds", ((a,) for a in vals), lambda a: leq(q.bottom, a) and leq(a, q.top)))
    add(_first_failure("monotonicity", triples, lambda a, b, c: (not leq(a, b)) or leq(t(a, c), t(b, c))))

    subsets = []
    for _ in range(n_join_subsets):
        k = rng.randint(0, min(5, n))
        subsets.append((rng.choice(vals), tuple(rng.sample(vals, k))))
    add(
        _first_failure(
            "join_distributivity",
            subsets,
            lambda r, S: eq(t(r, q.join(S)), q.join(t(r, s) for s in S)),
        )
    )
    add(
        _first_failure(
            "residuation",
            triples,
            lambda r, s, u: leq(t(r, s), u) == leq(s, q.residual(r, u)),
        )
    )
    if q.contractive:
        def contract(a, x):
            if not q.lt(a, q.unit) or eq(x, q.top) or eq(x, q.bottom):
                return True
            return q.lt(t(a, x), x)

        add(_first_failure("contractivity", pairs, contract))
    return report


def default_samples(q: Quantale, n: int = 100) -> list:
    """Representative finite sample of the carrier of a shipped instance."""
    if q.name == "boolean":
        return [False, True]
    pts = [10.0 ** (-3 + 6 * i / (n - 1)) for i in range(n)] if n > 1 else [1.0]
    return pts + [0.0, 1.0, INF]
