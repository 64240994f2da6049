"""Embedding-dimensionality analysis from label second moments.

For a trade-off weight lambda, form

    B = lambda S~^T S~ - (1 - lambda) Y~^T Y~        (n x n, rank <= p + q)

The number of negative eigenvalues of B upper-bounds the useful embedding
dimensionality, and the sum of the negative eigenvalues is the optimum of
min Tr(P B) over orthogonal projectors P of unconstrained rank (the
"free embedding" optimum).

Two evaluation modes:

* ``dense`` forms B explicitly (guarded to n <= 2048, with optional uniform
  column subsampling for larger n).
* ``lowrank`` never forms B: with C = [S~; Y~] stacked (q+p) x n and
  W = diag(lambda I_q, -(1-lambda) I_p), the nonzero eigenvalues of
  B = C^T W C equal those of W C C^T. They are extracted from the symmetric
  (q+p) x (q+p) matrix L^T W L where C C^T = L L^T, so the whole analysis
  costs O((p+q)^2 n).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import numlin

__all__ = [
    "DimReport",
    "optimal_dim",
    "recommended_dim",
    "free_embedding_optimum_check",
]

logger = logging.getLogger(__name__)

DENSE_LIMIT = 2048
FREE_CHECK_LIMIT = 64


@dataclass(frozen=True)
class DimReport:
    """Eigenvalue analysis of B for one lambda.

    optimal_r counts eigenvalues below -tol with tol = 1e-9 * max(|eig|, 1);
    free_optimum is their sum (always <= 0). In lowrank mode, eigenvalues
    holds only the p+q candidate nonzero eigenvalues; the remaining n-(p+q)
    eigenvalues of B are structurally zero.
    """

    lam: float
    eigenvalues: np.ndarray
    optimal_r: int
    free_optimum: float
    method: str


def _sign_tolerance(values: np.ndarray) -> float:
    scale = float(np.abs(values).max()) if values.size else 0.0
    return 1e-9 * max(scale, 1.0)


def _report(lam: float, values: np.ndarray, method: str) -> DimReport:
    values = np.sort(values)
    tol = _sign_tolerance(values)
    neg = values < -tol
    free = float(values[neg].sum()) if neg.any() else 0.0
    return DimReport(
        lam=lam,
        eigenvalues=values,
        optimal_r=int(neg.sum()),
        free_optimum=min(free, 0.0),
        method=method,
    )


def _check_inputs(y: np.ndarray, s: np.ndarray, lam: float):
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    if y.shape[1] != s.shape[1]:
        raise ValueError("Y and S must have the same number of columns")
    if y.shape[1] < 2:
        raise ValueError("need at least two samples")
    return y, s


def optimal_dim(
    y: np.ndarray,
    s: np.ndarray,
    lam: float,
    mode: str = "lowrank",
    subsample: int | None = None,
    subsample_seed: int = 0,
) -> DimReport:
    """Analyze the eigenvalues of B = lambda S~^T S~ - (1-lambda) Y~^T Y~.

    ``dense`` mode eigendecomposes the full n x n matrix and rejects
    n > 2048 unless ``subsample`` is given, in which case that many columns
    are drawn uniformly at random first (the eigenvalue scale then reflects
    the subsample). ``lowrank`` mode solves the equivalent (p+q) x (p+q)
    problem exactly; both modes agree on the negative-eigenvalue count.
    """
    y, s = _check_inputs(y, s, lam)
    n = y.shape[1]
    if mode == "dense":
        if subsample is not None and n > subsample:
            idx = np.random.default_rng(subsample_seed).choice(n, size=subsample, replace=False)
            idx.sort()
            y, s, n = y[:, idx], s[:, idx], subsample
        if n > DENSE_LIMIT:
            raise ValueError(
                f"dense mode is limited to n <= {DENSE_LIMIT} (got {n}); "
                "use mode='lowrank' or pass subsample="
            )
        yc = numlin.center_cols(y)
        sc = numlin.center_cols(s)
        b = lam * (sc.T @ sc) - (1.0 - lam) * (yc.T @ yc)
        return _report(lam, numlin.eigh_sym(b).values, "dense")
    if mode != "lowrank":
        raise ValueError(f"unknown mode {mode!r}; expected 'dense' or 'lowrank'")
    yc = numlin.center_cols(y)
    sc = numlin.center_cols(s)
    c = np.vstack([sc, yc])
    w_diag = np.concatenate([np.full(sc.shape[0], lam), np.full(yc.shape[0], -(1.0 - lam))])
    p_small = c @ c.T
    eig = numlin.eigh_sym(p_small)
    root = eig.vectors * np.sqrt(np.maximum(eig.values, 0.0))[None, :]
    m = root.T @ (w_diag[:, None] * root)
    return _report(lam, numlin.eigh_sym(m).values, "lowrank")


def recommended_dim(report: DimReport) -> int:
    """Clamp the analyzed dimensionality to at least 1 for encoder training."""
    if report.optimal_r < 1:
        logger.warning(
            "dimensionality analysis at lambda=%.3g gives r=0; clamping to r=1 "
            "(a zero-output encoder is degenerate)",
            report.lam,
        )
        return 1
    return report.optimal_r


def free_embedding_optimum_check(
    y: np.ndarray,
    s: np.ndarray,
    lam: float,
    r: int,
    iters: int = 3000,
    seed: int = 0,
) -> float:
    """Directly minimize Tr(V V^T B) over V with V^T V = I_r.

    Projected gradient descent with QR retraction from a seeded random
    start; returns the best value found. This is a verification oracle for
    DimReport.free_optimum (they coincide when r equals the count of
    negative eigenvalues), deliberately independent of any eigensolver:
    the step size comes from the Frobenius norm of B.
    """
    y, s = _check_inputs(y, s, lam)
    n = y.shape[1]
    if n > FREE_CHECK_LIMIT:
        raise ValueError(f"free-embedding check is limited to n <= {FREE_CHECK_LIMIT}")
    if r < 0 or r > n:
        raise ValueError(f"rank r must lie in [0, {n}], got {r}")
    if r == 0:
        return 0.0
    yc = numlin.center_cols(y)
    sc = numlin.center_cols(s)
    b = lam * (sc.T @ sc) - (1.0 - lam) * (yc.T @ yc)
    b = 0.5 * (b + b.T)
    rng = np.random.default_rng(seed)
    v, _ = np.linalg.qr(rng.standard_normal((n, r)))
    step = 1.0 / (2.0 * np.linalg.norm(b, "fro") + 1e-12)
    best = float(np.einsum("ij,ji->", v.T @ b, v))
    for _ in range(iters):
        v, _ = np.linalg.qr(v - step * 2.0 * (b @ v))
        val = float(np.einsum("ij,ji->", v.T @ b, v))
        if val < best:
            best = val
    return best
