"""Dense symmetric linear algebra primitives.

Everything downstream (kernel centering, ridge solves, the dimensionality
analyzer) is built on three operations: symmetric eigendecomposition,
column centering by the projector D = I - (1/n) 1 1^T, and numerically
stable application of (A^2 + c I)^{-1} through a precomputed
eigendecomposition.

All computation is in float64. D is applied implicitly (rank-one update),
never materialized on the hot path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SymEig",
    "CenteringOperator",
    "eigh_sym",
    "center_cols",
    "spectral_shifted_apply",
]

#: Maximum asymmetry tolerated by eigh_sym, relative to max(1, max|A|).
SYMMETRY_TOL = 1e-10

#: Largest n for which CenteringOperator.materialize() will build D.
MATERIALIZE_LIMIT = 64


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition of a symmetric matrix.

    values come out ascending; vectors holds the matching orthonormal
    eigenvectors as columns, so A = vectors @ diag(values) @ vectors.T.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CenteringOperator:
    """The centering projector D = I_n - (1/n) 1 1^T, applied implicitly.

    D is symmetric and idempotent and annihilates the all-ones vector.
    """

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("centering operator needs size >= 1")

    def apply_left(self, m: np.ndarray) -> np.ndarray:
        """Return D @ m (subtracts the per-column mean over rows)."""
        m = np.asarray(m, dtype=np.float64)
        if m.shape[0] != self.size:
            raise ValueError(f"expected {self.size} rows, got {m.shape[0]}")
        return m - m.mean(axis=0, keepdims=True)

    def apply_right(self, m: np.ndarray) -> np.ndarray:
        """Return m @ D (subtracts the per-row mean over columns)."""
        m = np.asarray(m, dtype=np.float64)
        if m.shape[-1] != self.size:
            raise ValueError(f"expected {self.size} columns, got {m.shape[-1]}")
        return m - m.mean(axis=-1, keepdims=True)

    def apply_both(self, k: np.ndarray) -> np.ndarray:
        """Return D @ k @ D, the double centering used for Gram matrices."""
        k = np.asarray(k, dtype=np.float64)
        if k.shape != (self.size, self.size):
            raise ValueError(f"expected {(self.size, self.size)}, got {k.shape}")
        row = k.mean(axis=1, keepdims=True)
        col = k.mean(axis=0, keepdims=True)
        return k - row - col + k.mean()

    def materialize(self) -> np.ndarray:
        """Build D explicitly. Only allowed for small n (test oracles)."""
        if self.size > MATERIALIZE_LIMIT:
            raise ValueError(
                f"refusing to materialize {self.size}x{self.size} centering matrix "
                f"(limit {MATERIALIZE_LIMIT}); use the apply_* methods"
            )
        n = self.size
        return np.eye(n) - np.full((n, n), 1.0 / n)


def _require_finite(a: np.ndarray) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite input")


def eigh_sym(a: np.ndarray) -> SymEig:
    """Eigendecompose a symmetric matrix; values ascending, vectors orthonormal.

    The input must be square and symmetric up to SYMMETRY_TOL (scaled by the
    matrix magnitude); within that tolerance it is symmetrized as
    (A + A^T) / 2 before factorization. Larger asymmetry is rejected rather
    than silently ignored.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    _require_finite(a)
    scale = max(1.0, float(np.abs(a).max())) if a.size else 1.0
    asym = float(np.abs(a - a.T).max()) if a.size else 0.0
    if asym > SYMMETRY_TOL * scale:
        raise ValueError(
            f"matrix is not symmetric (max asymmetry {asym:.3e} exceeds "
            f"{SYMMETRY_TOL:.0e} * {scale:.3e})"
        )
    sym = 0.5 * (a + a.T)
    values, vectors = np.linalg.eigh(sym)
    return SymEig(values=values, vectors=vectors)


def center_cols(m: np.ndarray) -> np.ndarray:
    """Return M @ D: every row of the result sums to zero."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    _require_finite(m)
    if m.shape[1] < 1:
        raise ValueError("need at least one column")
    return CenteringOperator(m.shape[1]).apply_right(m)


def spectral_shifted_apply(eig: SymEig, shift: float, rhs: np.ndarray) -> np.ndarray:
    """Apply (A^2 + shift I)^{-1} to rhs using the eigendecomposition of A.

    With A = V diag(v) V^T this is V diag(1 / (v_i^2 + shift)) V^T rhs, which
    stays well conditioned for any shift > 0 even when A itself is singular.
    """
    if shift <= 0:
        raise ValueError(f"shift must be positive, got {shift}")
    rhs = np.asarray(rhs, dtype=np.float64)
    squeeze = rhs.ndim == 1
    if squeeze:
        rhs = rhs[:, None]
    if rhs.shape[0] != eig.dim:
        raise ValueError(
            f"rhs has {rhs.shape[0]} rows but the eigendecomposition is "
            f"{eig.dim}-dimensional"
        )
    inv = 1.0 / (eig.values**2 + shift)
    out = eig.vectors @ (inv[:, None] * (eig.vectors.T @ rhs))
    return out[:, 0] if squeeze else out
