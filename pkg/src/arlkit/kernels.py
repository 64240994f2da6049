"""Kernel families, Gram construction, centering, and analytic kernel gradients.

Three kernels are supported on embedding columns z, z':

    rbf     k(z, z') = exp(-||z - z'||^2 / (2 sigma^2))
    imq     k(z, z') = 1 / sqrt(||z - z'||^2 + c^2)
    linear  k(z, z') = z^T z'

Squared distances are computed via expanded inner products with tiny
negative values clamped to zero, so k(z, z) is exact (1 for rbf, 1/c for
imq). sigma defaults to 1, which matches unit-norm embeddings; imq's c
defaults to 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "KernelSpec",
    "CenteredGram",
    "gram",
    "gram_cross",
    "center_gram",
    "kernel_grad",
    "gram_grad_to_embeddings",
]

_FAMILIES = ("rbf", "imq", "linear")


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus its scale parameter.

    sigma applies to rbf, c to imq; the linear kernel has no parameter.
    """

    family: str = "rbf"
    sigma: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {_FAMILIES}")
        if self.family == "rbf" and self.sigma <= 0:
            raise ValueError(f"rbf sigma must be positive, got {self.sigma}")
        if self.family == "imq" and self.c <= 0:
            raise ValueError(f"imq c must be positive, got {self.c}")

    def to_dict(self) -> dict:
        if self.family == "rbf":
            return {"family": "rbf", "sigma": self.sigma}
        if self.family == "imq":
            return {"family": "imq", "c": self.c}
        return {"family": "linear"}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(
            family=d.get("family", "rbf"),
            sigma=float(d.get("sigma", 1.0)),
            c=float(d.get("c", 1.0)),
        )


@dataclass(frozen=True)
class CenteredGram:
    """A raw b x b Gram matrix K together with its centered form D K D."""

    raw: np.ndarray
    centered: np.ndarray

    @property
    def size(self) -> int:
        return self.raw.shape[0]


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared distances between columns of a and columns of b."""
    na = np.einsum("ij,ij->j", a, a)
    nb = np.einsum("ij,ij->j", b, b)
    sq = na[:, None] + nb[None, :] - 2.0 * (a.T @ b)
    np.maximum(sq, 0.0, out=sq)
    return sq


def _apply_family(spec: KernelSpec, sq: np.ndarray, inner: np.ndarray | None) -> np.ndarray:
    if spec.family == "rbf":
        return np.exp(-sq / (2.0 * spec.sigma**2))
    if spec.family == "imq":
        return 1.0 / np.sqrt(sq + spec.c**2)
    return inner


def gram(z: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Gram matrix K[i, j] = k(z_i, z_j) over the columns of z (r x b)."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if spec.family == "linear":
        k = z.T @ z
    else:
        k = _apply_family(spec, _sq_dists(z, z), None)
    return 0.5 * (k + k.T)


def gram_cross(z_train: np.ndarray, z_new: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Cross kernel K[i, j] = k(z_train_i, z_new_j), shape b x m."""
    z_train = np.atleast_2d(np.asarray(z_train, dtype=np.float64))
    z_new = np.atleast_2d(np.asarray(z_new, dtype=np.float64))
    if spec.family == "linear":
        return z_train.T @ z_new
    return _apply_family(spec, _sq_dists(z_train, z_new), None)


def center_gram(k: np.ndarray) -> CenteredGram:
    """Double-center a symmetric Gram matrix: K~ = D K D.

    Row and column sums of the centered part are zero, and centering a PSD
    matrix stays PSD (D is an orthogonal projector).
    """
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"expected a square Gram matrix, got shape {k.shape}")
    # For symmetric K a single mean vector suffices and keeps the result
    # exactly symmetric, elementwise: K - mu_i - mu_j + mean(K).
    mu = k.mean(axis=1)
    centered = k - mu[:, None] - mu[None, :] + mu.mean()
    return CenteredGram(raw=k, centered=centered)


def kernel_grad(spec: KernelSpec, zi: np.ndarray, zj: np.ndarray) -> np.ndarray:
    """Gradient of k(z_i, z_j) with respect to z_i.

    rbf:    -((z_i - z_j) / sigma^2) k(z_i, z_j)
    imq:    -(z_i - z_j) (||z_i - z_j||^2 + c^2)^{-3/2}
    linear:  z_j
    """
    zi = np.asarray(zi, dtype=np.float64)
    zj = np.asarray(zj, dtype=np.float64)
    if spec.family == "linear":
        return zj.copy()
    diff = zi - zj
    sq = float(diff @ diff)
    if spec.family == "rbf":
        return -(diff / spec.sigma**2) * np.exp(-sq / (2.0 * spec.sigma**2))
    return -diff * (sq + spec.c**2) ** -1.5


def gram_grad_to_embeddings(
    spec: KernelSpec, z: np.ndarray, k: np.ndarray, g: np.ndarray
) -> np.ndarray:
    """Pull a gradient with respect to raw Gram entries back to the embeddings.

    Given g[i, j] = dL/dK[i, j] with every entry treated as independent, the
    chain rule over K[i, j] = k(z_i, z_j) gives

        dL/dz_i = sum_j (g[i, j] + g[j, i]) * dk(z_i, z_j)/dz_i

    which vectorizes per family through s = g + g^T:

        rbf:    e = s * K / sigma^2,  dZ = -Z (diag(e 1) - e)
        imq:    e = s * K^3,          dZ = -Z (diag(e 1) - e)
        linear: dZ = Z s
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    s = g + g.T
    if spec.family == "linear":
        return z @ s
    if spec.family == "rbf":
        e = s * (k / spec.sigma**2)
    else:
        e = s * k**3
    lap = np.diag(e.sum(axis=1)) - e
    return -(z @ lap)
