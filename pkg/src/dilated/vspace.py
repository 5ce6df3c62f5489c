"""Quantale-valued distance spaces and the Banach fixed-point engine.

Nothing here assumes the triangle inequality; the engine only watches the
successive distances d(x_n, x_{n+1}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Generic, Sequence, TypeVar

from .quantale import EXT_REAL_MUL, Quantale

P = TypeVar("P")

BURN_IN = 2
GROWTH_FACTOR = 1.0 + 1e-6
GROWTH_STREAK = 3


class FixedPointError(RuntimeError):
    """Base for engine failures; carries the partial report."""

    def __init__(self, message: str, report: "FixedPointReport | None" = None):
        super().__init__(message)
        self.report = report


class DivergenceDetected(FixedPointError):
    pass


class MaxIterationsExceeded(FixedPointError):
    pass


class NoValidPairs(ValueError):
    pass


@dataclass(frozen=True)
class MetricStructure(Generic[P]):
    quantale: Quantale
    distance: Callable[[P, P], Any]

    def __call__(self, x: P, y: P):
        return self.distance(x, y)


@dataclass
class AxiomReport:
    reflexivity: bool
    symmetry: bool
    witness: tuple | None = None

    @property
    def passed(self) -> bool:
        return self.reflexivity and self.symmetry


def check_metric_axioms(m: MetricStructure, points: Sequence) -> AxiomReport:
    """Reflexivity d(x, x) = bottom and symmetry on all sampled points."""
    q = m.quantale
    for x in points:
        if not q.eq(m(x, x), q.bottom):
            return AxiomReport(False, True, (x,))
    for i, x in enumerate(points):
        for y in points[i + 1:]:
            if not q.eq(m(x, y), m(y, x)):
                return AxiomReport(True, False, (x, y))
    return AxiomReport(True, True)


@dataclass
class FixedPointReport(Generic[P]):
    fixed_point: P
    iterates_kept: list[tuple[int, P]]
    successive_distances: list
    empirical_ratio: float | None
    converged: bool
    iterations_used: int


class _IterateRing:
    """Keeps the first ``head``, the last ``tail`` and every ``every``-th iterate."""

    def __init__(self, head: int = 4, tail: int = 4, every: int = 5):
        self.head, self.tail, self.every = head, tail, every
        self.kept: list[tuple[int, Any]] = []
        self.recent: list[tuple[int, Any]] = []

    def push(self, n: int, x) -> None:
        if n < self.head or (self.every > 0 and n % self.every == 0):
            self.kept.append((n, x))
        self.recent.append((n, x))
        if len(self.recent) > self.tail:
            self.recent.pop(0)

    def items(self) -> list[tuple[int, Any]]:
        seen = {n for n, _ in self.kept}
        return self.kept + [(n, x) for n, x in self.recent if n not in seen]


def empirical_ratio(distances: Sequence[float], burn_in: int = BURN_IN) -> float | None:
    """Largest ratio d_{i+1}/d_i after burn-in; None when no ratio is defined."""
    ratios = [
        b / a
        for a, b in zip(distances[burn_in:], distances[burn_in + 1:])
        if 0.0 < a < math.inf and b < math.inf
    ]
    return max(ratios) if ratios else None


def banach_fixed_point(
    f: Callable[[P], P],
    x0: P,
    m: MetricStructure[P],
    tolerance=1e-9,
    max_iter: int = 1000,
    keep_every: int = 5,
    on_step: Callable[[int, P, Any], None] | None = None,
) -> FixedPointReport[P]:
    """Iterate ``x_{n+1} = f(x_n)`` until ``d(x_n, x_{n+1}) <= tolerance``.

    Distances are read in an ExtRealMul-like quantale (``bottom`` = 0,
    ``top`` = inf) for the ratio bookkeeping. ``on_step(n, x_{n+1}, d_n)`` is
    called after every step.

    Raises DivergenceDetected if a successive distance is ``top`` or grows by
    more than 1e-6 relative for three consecutive steps, and
    MaxIterationsExceeded if the run ends without a converged verdict. Both
    carry the partial report as ``.report``.
    """
    q = m.quantale
    if not q.lt(q.bottom, tolerance):
        raise ValueError("tolerance must exceed bottom")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    ring = _IterateRing(every=keep_every)
    ring.push(0, x0)
    dists: list = []
    x = x0
    streak = 0
    met = False
    for n in range(max_iter):
        y = f(x)
        d = m(x, y)
        dists.append(d)
        ring.push(n + 1, y)
        if on_step is not None:
            on_step(n, y, d)
        x = y
        if q.eq(d, q.top):
            raise DivergenceDetected(
                f"successive distance reached top at step {n}", _report(x, ring, dists, False)
            )
        if len(dists) > 1 and d > dists[-2] * GROWTH_FACTOR:
            streak += 1
            if streak >= GROWTH_STREAK:
                raise DivergenceDetected(
                    f"successive distance grew for {streak} consecutive steps",
                    _report(x, ring, dists, False),
                )
        else:
            streak = 0
        if q.leq(d, tolerance):
            met = True
            break

    tail = dists[BURN_IN:]
    monotone = len(tail) > 0 and all(b <= a for a, b in zip(tail, tail[1:]))
    converged = met and monotone
    report = _report(x, ring, dists, converged)
    if not converged:
        raise MaxIterationsExceeded(
            f"no converged verdict after {len(dists)} iterations", report
        )
    return report


def _report(x, ring: _IterateRing, dists: list, converged: bool) -> FixedPointReport:
    return FixedPointReport(
        fixed_point=x,
        iterates_kept=ring.items(),
        successive_distances=list(dists),
        empirical_ratio=empirical_ratio(dists),
        converged=converged,
        iterations_used=len(dists),
    )


def estimate_lipschitz(
    f: Callable[[P], P],
    pairs: Sequence[tuple[P, P]],
    m: MetricStructure[P],
):
    """Lower estimate of the Lipschitz seminorm of ``f`` from sampled pairs.

    Joins ``residual(d(x, y), d(f x, f y))`` over every pair whose distance is
    neither bottom nor top.
    """
    q = m.quantale
    vals = []
    for x, y in pairs:
        d = m(x, y)
        if q.eq(d, q.bottom) or q.eq(d, q.top):
            continue
        vals.append(q.residual(d, m(f(x), f(y))))
    if not vals:
        raise NoValidPairs("every pair is at distance bottom or top")
    return q.join(vals)


def check_geometric(successive_distances: Sequence, r, q0, quantale: Quantale = EXT_REAL_MUL) -> bool:
    """True iff ``d_i <= r^i (x) q0`` for every i."""
    if not quantale.lt(r, quantale.unit):
        raise ValueError("r must be strictly below the unit")
    if not quantale.lt(q0, quantale.top):
        raise ValueError("q must be strictly below top")
    bound = q0
    for d in successive_distances:
        if not quantale.leq(d, bound):
            return False
        bound = quantale.tensor(r, bound)
    return True
