import math

import numpy as np
import pytest

from dilated.psd import (
    NotPsd,
    PsdMatrix,
    block_diag,
    bures_wasserstein,
    bures_wasserstein_trace,
    jacobi_eigh,
    psd_dilate,
    psd_pushforward,
    sqrt_psd,
)
from dilated.selfcheck import random_psd


def test_sqrt_examples():
    assert sqrt_psd(PsdMatrix(np.eye(3))).allclose(PsdMatrix(np.eye(3)))
    assert sqrt_psd(PsdMatrix(np.diag([4.0, 9.0]))).allclose(PsdMatrix(np.diag([2.0, 3.0])))


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_sqrt_squares_back(rng, n):
    for _ in range(20):
        a = random_psd(rng, n)
        s = sqrt_psd(a).entries
        assert np.abs(s @ s - a.entries).max() <= 1e-9
        assert np.linalg.eigvalsh(s).min() >= -1e-10


def test_jacobi_matches_lapack(rng):
    for n in (2, 4, 6):
        a = random_psd(rng, n).entries
        w, v = jacobi_eigh(a)
        assert np.allclose(np.sort(w), np.linalg.eigvalsh(a), atol=1e-10)
        assert np.allclose(v @ np.diag(w) @ v.T, a, atol=1e-10)
        assert np.allclose(v.T @ v, np.eye(n), atol=1e-12)


def test_validation():
    with pytest.raises(NotPsd):
        PsdMatrix(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        PsdMatrix(np.ones((2, 3)))
    # only the upper triangle is read
    m = PsdMatrix(np.array([[2.0, 1.0], [99.0, 2.0]]))
    assert m.entries[1, 0] == 1.0


def test_json_round_trip(rng):
    m = random_psd(rng, 3)
    assert PsdMatrix.from_json(m.to_json()) == m


def test_bw_examples():
    assert bures_wasserstein([[4.0]], [[1.0]]) == 1.0
    assert bures_wasserstein(4 * np.eye(2), np.eye(2)) == pytest.approx(math.sqrt(2), abs=1e-12)
    a = PsdMatrix(np.array([[2.0, 0.5], [0.5, 1.0]]))
    assert bures_wasserstein(a, a) <= 1e-10


def test_bw_one_dimensional_formula(rng):
    for x, y in rng.uniform(0, 10, size=(50, 2)):
        assert abs(bures_wasserstein([[x]], [[y]]) - abs(math.sqrt(x) - math.sqrt(y))) <= 1e-12


def test_bw_matches_trace_formula(rng):
    for _ in range(100):
        n = int(rng.integers(2, 5))
        a, b = random_psd(rng, n), random_psd(rng, n)
        assert bures_wasserstein(a, b) == pytest.approx(bures_wasserstein_trace(a, b), abs=1e-9)


def test_bw_metric_properties(rng):
    for _ in range(200):
        n = int(rng.integers(1, 4))
        a, b, c = (random_psd(rng, n) for _ in range(3))
        dab = bures_wasserstein(a, b)
        assert dab >= 0
        assert abs(dab - bures_wasserstein(b, a)) <= 1e-9
        assert bures_wasserstein(a, a) <= 1e-9
        assert dab <= bures_wasserstein(a, c) + bures_wasserstein(c, b) + 1e-9
        k = float(rng.uniform(0.05, 3.0))
        assert abs(bures_wasserstein(psd_dilate(k, a), psd_dilate(k, b)) - k * dab) <= 1e-9


def test_bw_near_coincident_has_no_cancellation():
    a = PsdMatrix(np.array([[1.0 + 4e-16]]))
    assert bures_wasserstein(a, [[1.0]]) <= 1e-15
    b = PsdMatrix(np.array([[2.0, 0.3], [0.3, 1.0]]))
    c = PsdMatrix(b.entries * (1 + 1e-15))
    assert bures_wasserstein(b, c) <= 1e-12


def test_pushforward_examples():
    m = PsdMatrix(np.array([[2.0, 0.5], [0.5, 1.0]]))
    assert psd_pushforward(np.eye(2), m) == m
    assert psd_pushforward(2.0, [[1.0]]).entries[0, 0] == 4.0
    c = s = 1 / math.sqrt(2)
    rot = np.array([[c, -s], [s, c]])
    out = psd_pushforward(rot, np.diag([1.0, 0.0]))
    assert np.allclose(out.entries, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)


def test_pushforward_functorial(rng):
    for _ in range(50):
        f, g = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
        m = random_psd(rng, 2)
        lhs = psd_pushforward(f @ g, m)
        rhs = psd_pushforward(f, psd_pushforward(g, m))
        assert np.allclose(lhs.entries, rhs.entries, rtol=0, atol=1e-10 * max(1, np.abs(lhs.entries).max()))


def test_pushforward_non_expansive_in_bw(rng):
    for _ in range(50):
        f = rng.normal(size=(2, 2))
        a, b = random_psd(rng, 2), random_psd(rng, 2)
        op = np.linalg.norm(f, 2)
        assert bures_wasserstein(psd_pushforward(f, a), psd_pushforward(f, b)) <= op * bures_wasserstein(a, b) + 1e-9


def test_dilate_examples_and_action_law(rng):
    m = random_psd(rng, 2)
    assert psd_dilate(1.0, m) == m
    assert psd_dilate(1 / math.sqrt(2), 2 * np.eye(2)).allclose(PsdMatrix(np.eye(2)), atol=1e-15)
    for r, s in rng.uniform(0, 3, size=(20, 2)):
        lhs, rhs = psd_dilate(r, psd_dilate(s, m)), psd_dilate(r * s, m)
        assert np.allclose(lhs.entries, rhs.entries, rtol=4e-16, atol=0)
    with pytest.raises(ValueError):
        psd_dilate(-1.0, m)


def test_block_diag():
    assert np.array_equal(block_diag([[1.0]], [[4.0]]).entries, np.diag([1.0, 4.0]))
    assert not block_diag(np.zeros((1, 1)), np.zeros((2, 2))).entries.any()
    d = bures_wasserstein(block_diag([[1.0]], [[1.0]]), block_diag([[4.0]], [[4.0]]))
    assert d**2 == pytest.approx(2.0, abs=1e-12)


def test_block_additivity(rng):
    for _ in range(50):
        m1, m2 = random_psd(rng, 2), random_psd(rng, 2)
        n1, n2 = random_psd(rng, 1), random_psd(rng, 1)
        lhs = bures_wasserstein(block_diag(m1, n1), block_diag(m2, n2)) ** 2
        rhs = bures_wasserstein(m1, m2) ** 2 + bures_wasserstein(n1, n2) ** 2
        assert abs(lhs - rhs) <= 1e-9
