"""Polynomial-kernel PCA (out-of-sample capable) and the linear-PCA
cumulative explained-variance curve used to pick its output size."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

EIG_TOL = 1e-10
DEFAULT_FRAME_CAP = 20000


class DegenerateDataError(ValueError):
    pass


def pca_explained_variance(X) -> np.ndarray:
    """Cumulative fraction of variance captured by the leading principal axes."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need an n x d matrix with n >= 2")
    Xc = X - X.mean(axis=0)
    # singular values avoid forming the d x d covariance explicitly
    s = linalg.svdvals(Xc)
    var = s ** 2 / (X.shape[0] - 1)
    total = var.sum()
    if total <= 0:
        raise DegenerateDataError("data has zero total variance")
    full = np.zeros(X.shape[1])
    full[: var.size] = var
    return np.minimum(np.cumsum(full) / total, 1.0)


def explained_variance_csv(curve) -> str:
    lines = ["component_index,cumulative_fraction"]
    lines += [f"{i + 1},{v!r}" for i, v in enumerate(np.asarray(curve, dtype=float).tolist())]
    return "\n".join(lines) + "\n"


def poly_kernel(A, B, gamma, coef0, degree):
    return (gamma * (A @ B.T) + coef0) ** degree


@dataclass
class KpcaModel:
    training_points: np.ndarray  # n x d
    alphas: np.ndarray  # n x k, eigenvectors scaled by 1/sqrt(eigenvalue)
    eigenvalues: np.ndarray  # k, non-increasing
    gamma: float
    coef0: float
    degree: int
    kernel_col_means: np.ndarray  # n, column means of the training kernel
    kernel_mean: float

    @property
    def input_dim(self) -> int:
        return self.training_points.shape[1]

    @property
    def output_dim(self) -> int:
        return self.alphas.shape[1]

    def arrays(self, prefix="kpca"):
        return {
            f"{prefix}.training_points": self.training_points,
            f"{prefix}.alphas": self.alphas,
            f"{prefix}.eigenvalues": self.eigenvalues,
            f"{prefix}.kernel_col_means": self.kernel_col_means,
        }

    def header(self):
        return {"gamma": self.gamma, "coef0": self.coef0, "degree": self.degree,
                "kernel_mean": self.kernel_mean}

    @classmethod
    def from_parts(cls, header, arrays, prefix="kpca"):
        return cls(arrays[f"{prefix}.training_points"], arrays[f"{prefix}.alphas"],
                   arrays[f"{prefix}.eigenvalues"], header["gamma"], header["coef0"],
                   int(header["degree"]), arrays[f"{prefix}.kernel_col_means"],
                   header["kernel_mean"])


def center_kernel(K):
    """K - 1K - K1 + 1K1 with 1 the n x n matrix of 1/n."""
    col = K.mean(axis=0)
    row = K.mean(axis=1)
    return K - col[None, :] - row[:, None] + K.mean()


def kpca_fit(X, k: int, degree: int = 3, gamma: float | None = None, coef0: float = 1.0,
             frame_cap: int = DEFAULT_FRAME_CAP) -> KpcaModel:
    """Fit kernel PCA with kernel (gamma x.y + coef0)^degree.

    ``gamma`` defaults to 1/d. Components whose centred-kernel eigenvalue is
    at most 1e-10 are dropped, so the model may keep fewer than ``k``.
    Each eigenvector's largest-magnitude entry is made positive.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be n x d")
    n, d = X.shape
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    if k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= n (k={k}, n={n})")
    if n > frame_cap:
        raise ValueError(f"{n} training frames exceed the cap of {frame_cap}; subsample first")
    gamma = 1.0 / d if gamma is None else float(gamma)
    K = poly_kernel(X, X, gamma, coef0, degree)
    Kc = center_kernel(K)
    Kc = 0.5 * (Kc + Kc.T)
    vals, vecs = linalg.eigh(Kc, subset_by_index=[n - k, n - 1])
    vals, vecs = vals[::-1], vecs[:, ::-1]
    keep = vals > EIG_TOL
    vals, vecs = vals[keep], vecs[:, keep]
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    vecs = vecs * np.where(signs == 0, 1.0, signs)
    return KpcaModel(X.copy(), vecs / np.sqrt(vals), vals, gamma, float(coef0), int(degree),
                     K.mean(axis=0), float(K.mean()))


def kpca_transform(model: KpcaModel, Y) -> np.ndarray:
    """Project rows of Y through the centred cross-kernel against the training set."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] != model.input_dim:
        raise ValueError(f"expected width {model.input_dim}, got shape {Y.shape}")
    Kt = poly_kernel(Y, model.training_points, model.gamma, model.coef0, model.degree)
    Kt_c = Kt - model.kernel_col_means[None, :] - Kt.mean(axis=1, keepdims=True) + model.kernel_mean
    return Kt_c @ model.alphas


def subsample_rows(X, cap: int, seed: int):
    """Seeded uniform subsample without replacement, original order kept."""
    X = np.asarray(X)
    if X.shape[0] <= cap:
        return X
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(X.shape[0], size=cap, replace=False))
    return X[idx]
