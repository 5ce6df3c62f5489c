"""Symmetric positive-semidefinite matrices and the Bures-Wasserstein metric."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EIG_TOL = 1e-10
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class NotPsd(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PsdMatrix:
    """Symmetric PSD matrix; the upper triangle is authoritative."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NotPsd("non-finite entries")
        up = np.triu(a)
        sym = up + np.triu(a, 1).T
        sym.setflags(write=False)
        object.__setattr__(self, "entries", sym)
        if a.shape[0] and jacobi_eigh(sym)[0].min() < -EIG_TOL * max(1.0, np.abs(sym).max()):
            raise NotPsd("matrix has a negative eigenvalue")

    @classmethod
    def of(cls, value) -> "PsdMatrix":
        return value if isinstance(value, cls) else cls(np.atleast_2d(np.asarray(value, dtype=float)))

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))

    def __eq__(self, other) -> bool:
        return isinstance(other, PsdMatrix) and np.array_equal(self.entries, other.entries)

    def allclose(self, other: "PsdMatrix", atol: float = 1e-12) -> bool:
        return self.order == other.order and bool(np.allclose(self.entries, other.entries, rtol=0, atol=atol))

    def to_json(self) -> dict:
        return {"order": self.order, "entries": [float(v) for v in self.entries.ravel()]}

    @classmethod
    def from_json(cls, obj: dict) -> "PsdMatrix":
        n = int(obj["order"])
        return cls(np.asarray(obj["entries"], dtype=float).reshape(n, n))

    def __repr__(self) -> str:
        return f"PsdMatrix({self.entries.tolist()!r})"


def jacobi_eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with ``a ~= v @ diag(w) @ v.T``. Sweeps stop once the
    off-diagonal Frobenius mass falls below 1e-12 relative to the matrix.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.abs(a).max(), 1e-300) if n else 1.0
    for _ in range(JACOBI_MAX_SWEEPS):
        off = math.sqrt(float(np.sum(np.triu(a, 1) ** 2)))
        if off <= JACOBI_TOL * scale:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apr = a[p, r]
                if apr == 0.0:
                    continue
                # Rutishauser's stable form of the rotation angle
                theta = (a[r, r] - a[p, p]) / (2.0 * apr)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap, ar = a[:, p].copy(), a[:, r].copy()
                a[:, p] = c * ap - s * ar
                a[:, r] = s * ap + c * ar
                ap, ar = a[p, :].copy(), a[r, :].copy()
                a[p, :] = c * ap - s * ar
                a[r, :] = s * ap + c * ar
                a[p, r] = a[r, p] = 0.0
                vp, vr = v[:, p].copy(), v[:, r].copy()
                v[:, p] = c * vp - s * vr
                v[:, r] = s * vp + c * vr
    return np.diag(a).copy(), v


def _sqrt_sym(a: np.ndarray) -> np.ndarray:
    w, v = jacobi_eigh(a)
    w = np.sqrt(np.clip(w, 0.0, None))
    out = (v * w) @ v.T
    return (out + out.T) / 2.0


def sqrt_psd(a: PsdMatrix) -> PsdMatrix:
    """The unique PSD square root, negative eigenvalue noise clamped to zero."""
    return PsdMatrix(_sqrt_sym(PsdMatrix.of(a).entries))


def _polar_unitary(m: np.ndarray) -> np.ndarray:
    """Orthogonal factor ``P Q^T`` of the SVD ``m = P S Q^T``."""
    # LAPACK SVD, not Jacobi on m^T m: the latter squares the condition number
    p, _, qt = np.linalg.svd(m)
    return p @ qt


_clamp_count = 0


def clamp_count() -> int:
    """How many times the trace formula hit a negative radicand."""
    return _clamp_count


def bures_wasserstein_trace(a: PsdMatrix, b: PsdMatrix) -> float:
    """Literal trace formula, radicand clamped at zero.

    Suffers cancellation near a == b (error ~ sqrt(machine eps)); kept as the
    independent reference for :func:`bures_wasserstein`.
    """
    global _clamp_count
    a, b = PsdMatrix.of(a), PsdMatrix.of(b)
    if a.order != b.order:
        raise ValueError("order mismatch")
    ra = _sqrt_sym(a.entries)
    cross = _sqrt_sym(ra @ b.entries @ ra)
    rad = a.trace + b.trace - 2.0 * float(np.trace(cross))
    if rad < 0.0:
        _clamp_count += 1
        rad = 0.0
    return math.sqrt(rad)


def bures_wasserstein(a: PsdMatrix, b: PsdMatrix) -> float:
    """Bures-Wasserstein distance, evaluated as ``||A^1/2 - B^1/2 U||_F``.

    ``U`` is the orthogonal polar factor of ``B^1/2 A^1/2``, which makes the
    Frobenius form equal to the trace formula without its cancellation.
    """
    a, b = PsdMatrix.of(a), PsdMatrix.of(b)
    if a.order != b.order:
        raise ValueError("order mismatch")
    if a.order == 1:
        return abs(math.sqrt(max(a.entries[0, 0], 0.0)) - math.sqrt(max(b.entries[0, 0], 0.0)))
    ra, rb = _sqrt_sym(a.entries), _sqrt_sym(b.entries)
    u = _polar_unitary(rb @ ra)
    return float(np.linalg.norm(ra - rb @ u))


def psd_pushforward(f, m: PsdMatrix) -> PsdMatrix:
    """``f M f^T``; a scalar ``f`` acts as ``f * I``."""
    m = PsdMatrix.of(m)
    f = np.asarray(f, dtype=float)
    if f.ndim == 0:
        return PsdMatrix(float(f) ** 2 * m.entries)
    f = np.atleast_2d(f)
    if f.shape[1] != m.order:
        raise ValueError(f"shape {f.shape} does not act on order {m.order}")
    out = f @ m.entries @ f.T
    return PsdMatrix((out + out.T) / 2.0)


def psd_dilate(r: float, m: PsdMatrix) -> PsdMatrix:
    if r < 0:
        raise ValueError("dilation factor must be >= 0")
    return PsdMatrix((r * r) * PsdMatrix.of(m).entries)


def block_diag(m: PsdMatrix, n: PsdMatrix) -> PsdMatrix:
    m, n = PsdMatrix.of(m), PsdMatrix.of(n)
    a, b = m.order, n.order
    out = np.zeros((a + b, a + b))
    out[:a, :a] = m.entries
    out[a:, a:] = n.entries
    return PsdMatrix(out)
