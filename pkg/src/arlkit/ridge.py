"""Closed-form kernel ridge heads and the adversarial trade-off objective.

For a batch of b embeddings Z (r x b) with centered Gram K~ and centered
labels Y~ = Y D, the regularized minimum MSE of a kernel ridge head is

    J = min_L (1/b) ||L K~ - Y~||_F^2 + gamma ||L||_F^2
      = (1/b) ||Y~||_F^2 - (1/b) sum_i  v_i^2 / (v_i^2 + b gamma) * ||(Y~ V)_i||^2

where (v, V) is the eigendecomposition of K~. The minimizer is
L = Y~ K~ (K~^2 + b gamma I)^{-1} and the regularization acts on the dual
coefficients L, which is why the shifted system involves K~^2 rather than K~.

The trade-off objective mixes a target head and an adversary head sharing
one Gram matrix:

    total(Z) = (1 - lambda) J_target(Z) - lambda J_adversary(Z)

and its gradient with respect to Z is available analytically by
differentiating through the closed-form solution. Two routes are provided:

* ``route="chol"``: the residual form dJ/dK~ = -(2/b) (Y~^T - K~ A) A^T with
  A = (K~^2 + b gamma I)^{-1} K~ Y~^T, solved by Cholesky. One b^3 matrix
  product plus one factorization per step; this is the fast default.
* ``route="spectral"``: the same quantity assembled in the eigenbasis of K~.
  Used as the independent reference in tests.

Both routes are pulled back through the centering (D G D) and the kernel
function to give dtotal/dZ at O(b^3 + b^2 r) cost per evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import numlin
from .kernels import CenteredGram, KernelSpec, center_gram, gram, gram_cross, gram_grad_to_embeddings
from .numlin import CenteringOperator, SymEig, eigh_sym

__all__ = [
    "RidgeFit",
    "ArlObjectiveValue",
    "fit",
    "objective_J",
    "predict",
    "arl_objective",
    "arl_objective_grad",
]


@dataclass(frozen=True)
class RidgeFit:
    """One closed-form ridge solve: dual coefficients, bias, and objective."""

    lambda_coeffs: np.ndarray  # p x b
    bias: np.ndarray  # p
    objective: float
    gamma: float
    spec: KernelSpec


@dataclass(frozen=True)
class ArlObjectiveValue:
    """Value of (1 - lambda) J_target - lambda J_adversary and its pieces."""

    total: float
    j_target: float
    j_sensitive: float
    lam: float


def _check_fit_args(cg: CenteredGram, labels: np.ndarray, gamma: float) -> np.ndarray:
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    labels = np.atleast_2d(np.asarray(labels, dtype=np.float64))
    b = cg.size
    if b < 2:
        raise ValueError("degenerate batch")
    if labels.shape[1] != b:
        raise ValueError(f"labels have {labels.shape[1]} columns, Gram is {b}x{b}")
    return labels


def _spectral_objective(eig: SymEig, labels_c: np.ndarray, gamma: float) -> float:
    b = eig.dim
    w = labels_c @ eig.vectors  # p x b, rows are V^T y~ per label row
    h = eig.values**2 / (eig.values**2 + b * gamma)
    j = (float(np.sum(labels_c**2)) - float(h @ np.sum(w**2, axis=0))) / b
    return max(j, 0.0)


def fit(cg: CenteredGram, labels: np.ndarray, gamma: float, spec: KernelSpec) -> RidgeFit:
    """Solve the ridge head in closed form on a centered Gram matrix.

    Returns the dual coefficients L = Y~ K~ (K~^2 + b gamma I)^{-1} (via the
    spectral route), the bias that absorbs the label and feature means, and
    the objective value J.
    """
    labels = _check_fit_args(cg, labels, gamma)
    b = cg.size
    labels_c = numlin.center_cols(labels)
    eig = eigh_sym(cg.centered)
    # L^T = (K~^2 + b gamma I)^{-1} (K~ Y~^T) through the spectral solve
    coeffs = numlin.spectral_shifted_apply(eig, b * gamma, cg.centered @ labels_c.T).T
    # b_opt = mean(y) - (1/b) L (D K 1); K~ cannot be used here since K~ 1 = 0.
    k_rowsum = cg.raw.sum(axis=1)
    dk1 = k_rowsum - k_rowsum.mean()
    bias = labels.mean(axis=1) - coeffs @ dk1 / b
    j = _spectral_objective(eig, labels_c, gamma)
    return RidgeFit(lambda_coeffs=coeffs, bias=bias, objective=j, gamma=gamma, spec=spec)


def objective_J(cg: CenteredGram, labels: np.ndarray, gamma: float) -> float:
    """The minimum regularized MSE of a ridge head, without forming coefficients."""
    labels = _check_fit_args(cg, labels, gamma)
    labels_c = numlin.center_cols(labels)
    return _spectral_objective(eigh_sym(cg.centered), labels_c, gamma)


def predict(rfit: RidgeFit, z_train: np.ndarray, z_new: np.ndarray) -> np.ndarray:
    """Predict labels for new embeddings from a fitted ridge head.

    yhat = L D^T K_cross + bias 1^T, where K_cross holds kernel values
    between training and new embeddings and D^T centers its columns over
    the training indices.
    """
    z_train = np.atleast_2d(np.asarray(z_train, dtype=np.float64))
    z_new = np.atleast_2d(np.asarray(z_new, dtype=np.float64))
    b = rfit.lambda_coeffs.shape[1]
    if z_train.shape[1] != b:
        raise ValueError(
            f"fit was produced from {b} training embeddings, got {z_train.shape[1]}"
        )
    if z_new.shape[0] != z_train.shape[0]:
        raise ValueError(
            f"embedding dims differ: train {z_train.shape[0]}, new {z_new.shape[0]}"
        )
    k_cross = gram_cross(z_train, z_new, rfit.spec)
    k_centered = k_cross - k_cross.mean(axis=0, keepdims=True)
    return rfit.lambda_coeffs @ k_centered + rfit.bias[:, None]


def _check_arl_args(z, y, s, gamma_y, gamma_s, lam):
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if gamma_y <= 0 or gamma_s <= 0:
        raise ValueError("regularization parameters must be positive")
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    b = z.shape[1]
    if y.shape[1] != b or s.shape[1] != b:
        raise ValueError("Z, Y, S must agree on the batch dimension")
    return z, y, s


def arl_objective(
    z: np.ndarray,
    y: np.ndarray,
    s: np.ndarray,
    gamma_y: float,
    gamma_s: float,
    lam: float,
    spec: KernelSpec,
) -> ArlObjectiveValue:
    """Evaluate (1 - lambda) J_target - lambda J_adversary for embeddings Z."""
    z, y, s = _check_arl_args(z, y, s, gamma_y, gamma_s, lam)
    cg = center_gram(gram(z, spec))
    eig = eigh_sym(cg.centered)
    j_y = _spectral_objective(eig, numlin.center_cols(y), gamma_y)
    j_s = _spectral_objective(eig, numlin.center_cols(s), gamma_s)
    return ArlObjectiveValue(
        total=(1.0 - lam) * j_y - lam * j_s, j_target=j_y, j_sensitive=j_s, lam=lam
    )


def _shifted_factor(k2: np.ndarray, shift: float):
    """Cholesky factor of K~^2 + shift I, shifting the diagonal in place on a copy."""
    r = k2.copy()
    r.flat[:: r.shape[0] + 1] += shift
    return cho_factor(r, lower=True, overwrite_a=True, check_finite=False)


def _head_chol(kc: np.ndarray, k2_shifted_factor, labels_c: np.ndarray, gamma: float, b: int):
    """Objective and dK~-gradient of one head via the Cholesky route."""
    ky = kc @ labels_c.T  # b x p
    a = cho_solve(k2_shifted_factor, ky, check_finite=False)
    j = max((float(np.sum(labels_c**2)) - float(np.sum(ky * a))) / b, 0.0)
    resid = labels_c.T - kc @ a  # b x p, equals (I - H) Y~^T
    g = -(2.0 / b) * (resid @ a.T)
    return j, g


def _head_spectral(eig: SymEig, labels_c: np.ndarray, gamma: float, b: int):
    """Objective and dK~-gradient of one head assembled in the eigenbasis."""
    shift = b * gamma
    denom = eig.values**2 + shift
    t = eig.values / denom
    one_minus_h = shift / denom
    w = eig.vectors.T @ labels_c.T  # b x p
    c_hat = w @ w.T  # V^T Y~^T Y~ V
    j = max((float(np.sum(labels_c**2)) - float((eig.values * t) @ np.sum(w**2, axis=1))) / b, 0.0)
    g_hat = one_minus_h[:, None] * c_hat * t[None, :]
    g_hat = g_hat + g_hat.T
    g = -(1.0 / b) * (eig.vectors @ g_hat @ eig.vectors.T)
    return j, g


def arl_objective_grad(
    z: np.ndarray,
    y: np.ndarray,
    s: np.ndarray,
    gamma_y: float,
    gamma_s: float,
    lam: float,
    spec: KernelSpec,
    route: str = "chol",
) -> tuple[ArlObjectiveValue, np.ndarray]:
    """Objective value and its analytic gradient with respect to Z.

    The per-head gradient with respect to the centered Gram is pulled back
    through the centering (D G D, applied implicitly) and then through the
    kernel entries to the embedding columns. Cost O(b^3 + b^2 r).
    """
    if route not in ("chol", "spectral"):
        raise ValueError(f"unknown gradient route {route!r}")
    z, y, s = _check_arl_args(z, y, s, gamma_y, gamma_s, lam)
    b = z.shape[1]
    if b < 2:
        raise ValueError("degenerate batch")
    k = gram(z, spec)
    cg = center_gram(k)
    kc = cg.centered
    yc = numlin.center_cols(y)
    sc = numlin.center_cols(s)

    if route == "spectral":
        eig = eigh_sym(kc)
        j_y, g_y = _head_spectral(eig, yc, gamma_y, b)
        j_s, g_s = _head_spectral(eig, sc, gamma_s, b)
    else:
        k2 = kc @ kc
        fac_y = _shifted_factor(k2, b * gamma_y)
        fac_s = fac_y if gamma_s == gamma_y else _shifted_factor(k2, b * gamma_s)
        j_y, g_y = _head_chol(kc, fac_y, yc, gamma_y, b)
        j_s, g_s = _head_chol(kc, fac_s, sc, gamma_s, b)

    value = ArlObjectiveValue(
        total=(1.0 - lam) * j_y - lam * j_s, j_target=j_y, j_sensitive=j_s, lam=lam
    )
    g_kc = np.zeros_like(kc)
    if lam != 1.0:
        g_kc += (1.0 - lam) * g_y
    if lam != 0.0:
        g_kc -= lam * g_s
    g_k = CenteringOperator(b).apply_both(g_kc)
    grad_z = gram_grad_to_embeddings(spec, z, k, g_k)
    return value, grad_z
