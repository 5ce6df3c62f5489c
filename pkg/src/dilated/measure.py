"""Probability measures on R^1 and R^2 with exact lattice arithmetic.

Two representations are supported:

``LatticeMeasure``
    finitely many atoms on a uniform grid, ``x_j = offset + j * spacing`` per
    axis. Convolution, dilation and moments are exact sums.
``GaussianMeasure``
    mean vector plus covariance; every operation is closed form.

Characteristic functions use the ``exp(-i <t, x>)`` sign convention and the
Fourier l-distance takes its supremum over a finite :class:`DualGrid`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import integrate, signal

from .psd import PsdMatrix, block_diag, psd_pushforward

MASS_TOL = 1e-10
TRUNCATE_BELOW = 1e-15
MOMENT_TOL = 1e-8
SPACING_RTOL = 1e-9
DIRECT_CONV_LIMIT = 4_000_000  # product of operand sizes above which FFT is used
ATOM_CHUNK = 1 << 15
T_CHUNK = 16


class IncommensurableLattices(ValueError):
    pass


def _as_tuple(v, dim: int) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.size == 1 and dim > 1:
        arr = np.repeat(arr, dim)
    if arr.size != dim:
        raise ValueError(f"expected {dim} components, got {arr.size}")
    return tuple(float(x) for x in arr)


@dataclass(frozen=True, eq=False)
class LatticeMeasure:
    spacing: tuple[float, ...]
    offset: tuple[float, ...]
    weights: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim not in (1, 2):
            raise ValueError("only 1-d and 2-d lattices are supported")
        if w.size == 0:
            raise ValueError("empty weight array")
        if not np.all(np.isfinite(w)) or w.min() < 0:
            raise ValueError("weights must be finite and nonnegative")
        total = float(w.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {total!r} is not 1")
        w.setflags(write=False)
        sp = _as_tuple(self.spacing, w.ndim)
        if min(sp) <= 0:
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "spacing", sp)
        object.__setattr__(self, "offset", _as_tuple(self.offset, w.ndim))

    @property
    def dim(self) -> int:
        return self.weights.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.weights.shape

    def axis(self, k: int) -> np.ndarray:
        return self.offset[k] + self.spacing[k] * np.arange(self.weights.shape[k])

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates (N x dim) and weights (N) of the nonzero atoms."""
        if self.dim == 1:
            x = self.axis(0)
            keep = self.weights > 0
            return x[keep, None], self.weights[keep]
        gx, gy = np.meshgrid(self.axis(0), self.axis(1), indexing="ij")
        keep = self.weights > 0
        return np.column_stack([gx[keep], gy[keep]]), self.weights[keep]

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "spacing": list(self.spacing),
            "offset": list(self.offset),
            "weights": self.weights.tolist(),
        }

    def __repr__(self) -> str:
        return f"LatticeMeasure(dim={self.dim}, shape={self.shape}, spacing={self.spacing}, offset={self.offset})"


@dataclass(frozen=True, eq=False)
class GaussianMeasure:
    mean: np.ndarray
    covariance: PsdMatrix
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        cov = PsdMatrix.of(self.covariance)
        m = np.atleast_1d(np.asarray(self.mean, dtype=float)).copy()
        if m.shape != (cov.order,):
            raise ValueError("mean and covariance shapes disagree")
        m.setflags(write=False)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "covariance": self.covariance.entries.tolist()}

    def __repr__(self) -> str:
        return f"GaussianMeasure(mean={self.mean.tolist()}, covariance={self.covariance.entries.tolist()})"


Measure = Union[LatticeMeasure, GaussianMeasure]


def measure_from_json(obj: dict) -> Measure:
    if "covariance" in obj:
        return GaussianMeasure(obj["mean"], PsdMatrix(np.asarray(obj["covariance"], dtype=float)))
    w = np.asarray(obj["weights"], dtype=float)
    if int(obj.get("dim", w.ndim)) != w.ndim:
        raise ValueError("dim does not match weight array rank")
    return LatticeMeasure(tuple(obj["spacing"]), tuple(obj["offset"]), w)


# -- constructors -------------------------------------------------------------


def dirac(x) -> LatticeMeasure:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = np.ones((1,) * x.size)
    return LatticeMeasure((1.0,) * x.size, tuple(x), w)


def rademacher() -> LatticeMeasure:
    return LatticeMeasure((2.0,), (-1.0,), np.array([0.5, 0.5]))


def bernoulli(p: float) -> LatticeMeasure:
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return LatticeMeasure((1.0,), (0.0,), np.array([1.0 - p, p]))


def uniform(a: float, b: float, n: int) -> LatticeMeasure:
    """Uniform measure on ``n`` equally spaced atoms from ``a`` to ``b``."""
    if n < 1:
        raise ValueError("need at least one atom")
    if n == 1:
        return dirac(a)
    if not b > a:
        raise ValueError("need b > a")
    return LatticeMeasure(((b - a) / (n - 1),), (a,), np.full(n, 1.0 / n))


def gaussian(mean, covariance) -> GaussianMeasure:
    return GaussianMeasure(mean, PsdMatrix.of(covariance))


def product(mu: Measure, nu: Measure) -> Measure:
    """Independent product of two 1-d measures as a 2-d measure."""
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("product is defined for two 1-d measures")
    if isinstance(mu, GaussianMeasure) and isinstance(nu, GaussianMeasure):
        return GaussianMeasure(np.concatenate([mu.mean, nu.mean]), block_diag(mu.covariance, nu.covariance))
    if isinstance(mu, LatticeMeasure) and isinstance(nu, LatticeMeasure):
        return LatticeMeasure(
            mu.spacing + nu.spacing, mu.offset + nu.offset, np.outer(mu.weights, nu.weights)
        )
    raise TypeError("product of a lattice and a Gaussian measure is not representable")


# -- weight-array plumbing --------------------------------------------------


def _trim(w: np.ndarray, offset: list[float], spacing: tuple[float, ...]) -> tuple[np.ndarray, list[float]]:
    w = np.where(w < TRUNCATE_BELOW, 0.0, w)
    for k in range(w.ndim):
        other = tuple(i for i in range(w.ndim) if i != k)
        live = np.flatnonzero(w.any(axis=other) if other else w)
        if live.size == 0:
            raise ValueError("truncation removed all mass")
        lo, hi = live[0], live[-1] + 1
        w = np.take(w, np.arange(lo, hi), axis=k)
        offset[k] += lo * spacing[k]
    return w / w.sum(), offset


def _convolve_arrays(a: np.ndarray, b: np.ndarray, method: str) -> np.ndarray:
    if method == "auto":
        method = "direct" if a.size * b.size <= DIRECT_CONV_LIMIT else "fft"
    if method == "direct":
        if a.ndim == 1:
            return np.convolve(a, b)
        return signal.convolve2d(a, b)
    if method == "fft":
        return np.clip(signal.fftconvolve(a, b), 0.0, None)
    raise ValueError(f"unknown convolution method {method!r}")


def convolve(mu: LatticeMeasure, nu: LatticeMeasure, method: str = "auto") -> LatticeMeasure:
    """Law of X + Y for independent X ~ mu, Y ~ nu on a shared lattice spacing.

    Axes with a single atom adopt the partner's spacing. Atoms lighter than
    1e-15 are dropped afterwards and the result is renormalized.
    """
    if mu.dim != nu.dim:
        raise IncommensurableLattices("dimension mismatch")
    spacing = []
    for k in range(mu.dim):
        sa, sb = mu.spacing[k], nu.spacing[k]
        if mu.shape[k] == 1:
            spacing.append(sb)
        elif nu.shape[k] == 1 or math.isclose(sa, sb, rel_tol=SPACING_RTOL):
            spacing.append(sa)
        else:
            raise IncommensurableLattices(f"spacings {sa!r} and {sb!r} differ on axis {k}")
    w = _convolve_arrays(mu.weights, nu.weights, method)
    offset = [a + b for a, b in zip(mu.offset, nu.offset)]
    w, offset = _trim(w, offset, tuple(spacing))
    return LatticeMeasure(tuple(spacing), tuple(offset), w)


def dilate(c: float, mu: Measure) -> Measure:
    """Push forward along ``x -> c x`` for ``c > 0``."""
    if not c > 0:
        raise ValueError("dilation factor must be positive")
    if c == 1.0:
        return mu
    if isinstance(mu, GaussianMeasure):
        return GaussianMeasure(c * mu.mean, PsdMatrix((c * c) * mu.covariance.entries))
    return LatticeMeasure(
        tuple(c * s for s in mu.spacing), tuple(c * o for o in mu.offset), mu.weights
    )


def _scale_axis(w: np.ndarray, spacing: list, offset: list, k: int, a: float):
    n = w.shape[k]
    if a == 0.0:
        w = w.sum(axis=k, keepdims=True)
        spacing[k], offset[k] = 1.0, 0.0
    elif a > 0:
        spacing[k], offset[k] = a * spacing[k], a * offset[k]
    else:
        last = offset[k] + (n - 1) * spacing[k]
        w = np.flip(w, axis=k)
        spacing[k], offset[k] = -a * spacing[k], a * last
    return w


def pushforward_linear(f, mu: Measure) -> Measure:
    """Image of ``mu`` under the linear map ``f`` (scalar or dim_out x dim_in matrix).

    Gaussian inputs and lattice inputs under scalar or diagonal ``f`` are
    exact. Other lattice maps re-bin the mapped atoms to the nearest node of
    a fresh lattice whose spacing is the input spacing times the smallest
    nonzero singular value of ``f``; that path is approximate.
    """
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("map has non-finite entries")
    if isinstance(mu, GaussianMeasure):
        if f.ndim == 0:
            return GaussianMeasure(float(f) * mu.mean, psd_pushforward(f, mu.covariance))
        f = np.atleast_2d(f)
        return GaussianMeasure(f @ mu.mean, psd_pushforward(f, mu.covariance))

    if f.ndim == 0:
        f = np.eye(mu.dim) * float(f)
    f = np.atleast_2d(f)
    if f.shape[1] != mu.dim:
        raise ValueError(f"map of shape {f.shape} cannot act on dimension {mu.dim}")
    if not f.any():
        return dirac(np.zeros(f.shape[0]))
    if f.shape[0] == f.shape[1] and np.count_nonzero(f - np.diag(np.diag(f))) == 0:
        w, spacing, offset = mu.weights, list(mu.spacing), list(mu.offset)
        for k, a in enumerate(np.diag(f)):
            w = _scale_axis(w, spacing, offset, k, float(a))
        return LatticeMeasure(tuple(spacing), tuple(offset), np.ascontiguousarray(w))
    return _rebin(f, mu)


def _rebin(f: np.ndarray, mu: LatticeMeasure) -> LatticeMeasure:
    x, w = mu.atoms()
    y = x @ f.T
    sv = np.linalg.svd(f, compute_uv=False)
    h = min(mu.spacing) * float(sv[sv > 1e-12 * sv.max()].min())
    lo = y.min(axis=0)
    idx = np.rint((y - lo) / h).astype(np.int64)
    shape = tuple(idx.max(axis=0) + 1)
    out = np.zeros(shape)
    np.add.at(out, tuple(idx.T), w)
    return LatticeMeasure((h,) * f.shape[0], tuple(lo), out / out.sum())


# -- moments ------------------------------------------------------------------


def expectation(mu: Measure) -> np.ndarray:
    if isinstance(mu, GaussianMeasure):
        return mu.mean.copy()
    if mu.dim == 1:
        return np.array([float(mu.weights @ mu.axis(0))])
    return np.array([float(mu.weights.sum(axis=1) @ mu.axis(0)), float(mu.weights.sum(axis=0) @ mu.axis(1))])


def variance_matrix(mu: Measure) -> PsdMatrix:
    """Centered second-moment matrix."""
    if isinstance(mu, GaussianMeasure):
        return mu.covariance
    m = expectation(mu)
    if mu.dim == 1:
        d = mu.axis(0) - m[0]
        return PsdMatrix(np.array([[float(mu.weights @ (d * d))]]))
    dx, dy = mu.axis(0) - m[0], mu.axis(1) - m[1]
    px, py = mu.weights.sum(axis=1), mu.weights.sum(axis=0)
    cxy = float(dx @ mu.weights @ dy)
    return PsdMatrix(np.array([[float(px @ (dx * dx)), cxy], [cxy, float(py @ (dy * dy))]]))


def abs_moment(mu: Measure, l: float) -> float:
    """``E ||X||_inf^l``. Exact for lattices; quadrature for Gaussians."""
    if isinstance(mu, LatticeMeasure):
        x, w = mu.atoms()
        return float(w @ (np.abs(x).max(axis=1) ** l))
    if mu.dim == 1:
        m, s = float(mu.mean[0]), math.sqrt(mu.covariance.entries[0, 0])
        if s == 0.0:
            return abs(m) ** l
        dens = lambda x: abs(x) ** l * math.exp(-0.5 * ((x - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))
        pts = sorted({m - 12 * s, 0.0, m + 12 * s}) if abs(m) < 12 * s else [m - 12 * s, m + 12 * s]
        total = 0.0
        for a, b in zip(pts, pts[1:]):
            total += integrate.quad(dens, a, b, limit=200)[0]
        return total
    # 2-d: tensor Gauss-Hermite rule on x = mean + L z
    z, wz = np.polynomial.hermite_e.hermegauss(80)
    wz = wz / wz.sum()
    w, v = np.linalg.eigh(mu.covariance.entries)
    L = v * np.sqrt(np.clip(w, 0, None))
    zz = np.stack(np.meshgrid(z, z, indexing="ij"), axis=-1).reshape(-1, 2)
    ww = np.outer(wz, wz).ravel()
    pts = mu.mean + zz @ L.T
    return float(ww @ (np.abs(pts).max(axis=1) ** l))


def _multi_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    if dim == 1:
        return [(order,)]
    return [(a, order - a) for a in range(order, -1, -1)]


def raw_moments(mu: Measure, order: int) -> np.ndarray:
    """All raw moments ``E[x^a y^b]`` with ``a + b = order`` (orders 1 to 3)."""
    key = ("raw", order)
    if key in mu._cache:
        return mu._cache[key]
    if not 1 <= order <= 3:
        raise ValueError("moment order must be 1, 2 or 3")
    out = []
    if isinstance(mu, LatticeMeasure):
        if mu.dim == 1:
            x = mu.axis(0)
            out.append(float(mu.weights @ x**order))
        else:
            x, y = mu.axis(0), mu.axis(1)
            for a, b in _multi_indices(2, order):
                out.append(float(x**a @ mu.weights @ y**b))
    else:
        m, S = mu.mean, mu.covariance.entries
        for alpha in _multi_indices(mu.dim, order):
            idx = [k for k, n in enumerate(alpha) for _ in range(n)]
            out.append(_gaussian_moment(m, S, idx))
    res = np.array(out)
    mu._cache[key] = res
    return res


def _gaussian_moment(m: np.ndarray, S: np.ndarray, idx: list[int]) -> float:
    if len(idx) == 1:
        return float(m[idx[0]])
    if len(idx) == 2:
        i, j = idx
        return float(S[i, j] + m[i] * m[j])
    i, j, k = idx
    return float(m[i] * m[j] * m[k] + m[i] * S[j, k] + m[j] * S[i, k] + m[k] * S[i, j])


def moments_match(mu: Measure, nu: Measure, l: float, tol: float = MOMENT_TOL) -> bool:
    """Whether all raw moments of integer order ``1 <= n < l`` agree within ``tol``."""
    top = math.ceil(l) - 1
    if top > 3:
        raise ValueError("the moment gate supports l < 4")
    for n in range(1, top + 1):
        if np.abs(raw_moments(mu, n) - raw_moments(nu, n)).max() > tol:
            return False
    return True


# -- characteristic functions and the Fourier distance ----------------------


@dataclass(frozen=True)
class DualGrid:
    """Finite stand-in for the dual space: log-spaced radii times l1-unit directions.

    Directions are kept up to sign: for real measures ``phi(-t)`` is the
    conjugate of ``phi(t)``, so ``t`` and ``-t`` give the same ratio.
    """

    r_min: float = 1e-2
    r_max: float = 1e2
    n_radii: int = 64
    n_random: int = 14
    seed: int = 42

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if self.n_radii < 1 or self.n_random < 0:
            raise ValueError("bad grid sizes")

    def dense(self) -> "DualGrid":
        return DualGrid(self.r_min, self.r_max, 2 * self.n_radii - 1, 2 * self.n_random, self.seed)

    def radii(self) -> np.ndarray:
        return np.geomspace(self.r_min, self.r_max, self.n_radii)

    def directions(self, dim: int) -> np.ndarray:
        return _directions(self.n_random, self.seed, dim)

    def points(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        """Grid points ``t`` (K x dim) and their l1 norms."""
        return _grid_points(self, dim)


@lru_cache(maxsize=32)
def _directions(n_random: int, seed: int, dim: int) -> np.ndarray:
    dirs = [row for row in np.eye(dim)]
    if dim > 1 and n_random:
        rng = np.random.default_rng(seed)
        for _ in range(n_random):
            u = rng.standard_normal(dim)
            u /= np.abs(u).sum()
            if u[np.flatnonzero(u)[0]] < 0:
                u = -u
            dirs.append(u)
    out = np.array(dirs)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=32)
def _grid_points(grid: DualGrid, dim: int) -> tuple[np.ndarray, np.ndarray]:
    r = grid.radii()
    u = grid.directions(dim)
    t = (u[:, None, :] * r[None, :, None]).reshape(-1, dim)
    norms = np.abs(t).sum(axis=1)
    t.setflags(write=False)
    norms.setflags(write=False)
    return t, norms


DEFAULT_GRID = DualGrid()


def _lattice_cf(mu: LatticeMeasure, t: np.ndarray, workers: int) -> np.ndarray:
    x, w = mu.atoms()
    chunks = [(s, min(s + T_CHUNK, len(t))) for s in range(0, len(t), T_CHUNK)]

    def run(span):
        a, b = span
        tt = t[a:b]
        re = np.zeros(b - a)
        im = np.zeros(b - a)
        # fixed atom partition, summed in order: the result does not depend on workers
        for s in range(0, len(w), ATOM_CHUNK):
            xs, ws = x[s:s + ATOM_CHUNK], w[s:s + ATOM_CHUNK]
            ph = tt[:, 0, None] * xs[None, :, 0]
            for k in range(1, x.shape[1]):
                ph += tt[:, k, None] * xs[None, :, k]
            re += (np.cos(ph) * ws).sum(axis=1)
            im -= (np.sin(ph) * ws).sum(axis=1)
        return re + 1j * im

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=complex)


def char_fn_many(mu: Measure, t: np.ndarray, workers: int = 1) -> np.ndarray:
    t = np.atleast_2d(np.asarray(t, dtype=float))
    if t.shape[1] != mu.dim:
        raise ValueError("t has the wrong dimension")
    if isinstance(mu, GaussianMeasure):
        S = mu.covariance.entries
        quad = np.einsum("ki,ij,kj->k", t, S, t)
        return np.exp(-1j * (t @ mu.mean) - 0.5 * quad)
    return _lattice_cf(mu, t, workers)


def char_fn(mu: Measure, t) -> complex:
    """``phi(t) = E exp(-i <t, X>)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return complex(char_fn_many(mu, t[None, :])[0])


def _cf_on_grid(mu: Measure, grid: DualGrid, workers: int) -> np.ndarray:
    key = ("cf", grid)
    if key not in mu._cache:
        t, _ = grid.points(mu.dim)
        mu._cache[key] = char_fn_many(mu, t, workers)
    return mu._cache[key]


def fourier_ratio_profile(mu: Measure, nu: Measure, l: float, grid: DualGrid = DEFAULT_GRID, workers: int = 1) -> np.ndarray:
    """``|phi_mu(t) - phi_nu(t)| / ||t||_1^l`` at every grid point."""
    if mu.dim != nu.dim:
        raise ValueError("dimension mismatch")
    _, norms = grid.points(mu.dim)
    diff = np.abs(_cf_on_grid(mu, grid, workers) - _cf_on_grid(nu, grid, workers))
    return diff / norms**l


def fourier_l_distance(
    mu: Measure,
    nu: Measure,
    l: float,
    grid: DualGrid = DEFAULT_GRID,
    moment_tol: float = MOMENT_TOL,
    workers: int = 1,
) -> float:
    """Grid estimate of the Fourier l-distance; ``inf`` when low moments differ.

    The returned value is a lower bound of the true supremum.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    if mu.dim != nu.dim:
        raise ValueError("dimension mismatch")
    if not moments_match(mu, nu, l, moment_tol):
        return math.inf
    if mu is nu:
        return 0.0
    prof = fourier_ratio_profile(mu, nu, l, grid, workers)
    return float(prof.max()) ** (1.0 / l)
