"""Property suites behind ``dilated selfcheck``.

Each suite returns the first counterexample it meets, not a full census.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import measure as M
from . import psd
from . import quantale as Q
from .cltsys import CltSystem, check_grading_preserved, theta
from .vspace import MetricStructure, check_metric_axioms

SUITES = ("quantale", "metric", "psd", "theta")


@dataclass
class SuiteResult:
    suite: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.suite}: {self.detail}"


def _quantale(seed: int, break_unit: bool) -> SuiteResult:
    instances = list(Q.INSTANCES.values())
    if break_unit:
        instances[1] = dataclasses.replace(instances[1], tensor=max, name="ext_real_mul(broken)")
    for q in instances:
        rep = Q.check_laws(q, Q.default_samples(q, 24), seed=seed)
        if not rep.passed:
            bad = rep.failures()[0]
            return SuiteResult("quantale", False, f"{q.name}: {bad.law} law fails at {bad.witness!r}")
    return SuiteResult("quantale", True, f"{len(instances)} instances, all laws hold")


def random_psd(rng: np.random.Generator, n: int) -> psd.PsdMatrix:
    b = rng.standard_normal((n, n))
    return psd.PsdMatrix(b.T @ b)


def random_lattice(rng: np.random.Generator, n_atoms: int = 7, spacing: float = 1.0) -> M.LatticeMeasure:
    w = rng.random(n_atoms) + 0.05
    return M.LatticeMeasure((spacing,), (0.0,), w / w.sum())


def standardize(mu: M.LatticeMeasure, mean: float = 0.0, var: float = 1.0) -> M.LatticeMeasure:
    """Affine copy of a 1-d lattice measure with the requested mean and variance."""
    m = M.expectation(mu)[0]
    s = math.sqrt(M.variance_matrix(mu).entries[0, 0])
    k = math.sqrt(var) / s
    return M.LatticeMeasure((mu.spacing[0] * k,), ((mu.offset[0] - m) * k + mean,), mu.weights)


def _metric(seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    real = MetricStructure(Q.EXT_REAL_MUL, lambda x, y: abs(x - y))
    r = check_metric_axioms(real, list(rng.normal(size=12)))
    if not r.passed:
        return SuiteResult("metric", False, f"|x - y| fails at {r.witness!r}")
    bw = MetricStructure(Q.EXT_REAL_MUL, psd.bures_wasserstein)
    r = check_metric_axioms(bw, [random_psd(rng, 2) for _ in range(8)])
    if not r.passed:
        return SuiteResult("metric", False, f"Bures-Wasserstein fails at {r.witness!r}")
    pts = [standardize(random_lattice(rng)) for _ in range(5)] + [M.gaussian(0.0, 1.0), M.rademacher()]
    for l in (1.5, 2.5):
        fd = MetricStructure(Q.EXT_REAL_MUL, lambda a, b, l=l: M.fourier_l_distance(a, b, l))
        r = check_metric_axioms(fd, pts)
        if not r.passed:
            return SuiteResult("metric", False, f"Fourier d_{l} fails at {r.witness!r}")
    return SuiteResult("metric", True, "reflexivity and symmetry hold for |x-y|, Bures-Wasserstein, Fourier d_1.5, d_2.5")


def _psd(seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    for i in range(50):
        n = int(rng.integers(1, 4))
        a, b, c = (random_psd(rng, n) for _ in range(3))
        s = psd.sqrt_psd(a).entries
        if np.abs(s @ s - a.entries).max() > 1e-9 * max(1.0, np.abs(a.entries).max()):
            return SuiteResult("psd", False, f"sqrt fails on {a!r}")
        dab, dba = psd.bures_wasserstein(a, b), psd.bures_wasserstein(b, a)
        if abs(dab - dba) > 1e-9 or psd.bures_wasserstein(a, a) > 1e-9:
            return SuiteResult("psd", False, f"symmetry/reflexivity fails on {a!r}, {b!r}")
        if dab > psd.bures_wasserstein(a, c) + psd.bures_wasserstein(c, b) + 1e-9:
            return SuiteResult("psd", False, f"triangle inequality fails on {a!r}, {b!r}, {c!r}")
        k = float(rng.uniform(0.1, 2.0))
        if abs(psd.bures_wasserstein(psd.psd_dilate(k, a), psd.psd_dilate(k, b)) - k * dab) > 1e-9:
            return SuiteResult("psd", False, f"homogeneity fails at c={k}")
    return SuiteResult("psd", True, "sqrt, symmetry, triangle, homogeneity on 50 seeded triples")


def _theta(seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    clt, lln = CltSystem.clt(2.5), CltSystem.lln(1.5)
    g = M.gaussian(0.0, 1.0)
    d = clt.distance(theta(clt, g), g)
    if d > 1e-10:
        return SuiteResult("theta", False, f"Gaussian not fixed: d={d!r}")
    x = M.dirac(0.3)
    d = lln.distance(theta(lln, x), x)
    if d > 1e-10:
        return SuiteResult("theta", False, f"Dirac not fixed: d={d!r}")
    for _ in range(5):
        mu = standardize(random_lattice(rng))
        for sys_ in (clt, lln):
            ok, drift = check_grading_preserved(sys_, mu, 1e-9)
            if not ok:
                return SuiteResult("theta", False, f"{sys_.kind.value} grading drift {drift!r}")
    return SuiteResult("theta", True, "Gaussian and Dirac fixed, gradings preserved")


def run_suite(name: str, seed: int = 42, break_unit: bool = False) -> SuiteResult:
    if name == "quantale":
        return _quantale(seed, break_unit)
    if name == "metric":
        return _metric(seed)
    if name == "psd":
        return _psd(seed)
    if name == "theta":
        return _theta(seed)
    raise ValueError(f"unknown suite {name!r}")
