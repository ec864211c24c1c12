"""Kernel families, their derivatives, and the matrices built from samples.

Two translation-invariant families are supported:

    rbf            k(x, y) = exp(-||x - y||^2 / (2 * sigma2))
    epanechnikov   k(x, y) = (1/d) * sum_j (1 - (x_j - y_j)^2)

Both satisfy k(x, x) = 1.  The RBF matrix is positive semi-definite; the
Epanechnikov kernel can go negative at large separations, which downstream
code has to tolerate (and occasionally guard against, e.g. zero row sums).

Conventions used throughout the package:

    K[i, j]     = k(x^i, x^j)                      "k_matrix"
    <grad, K>   [i, j] = sum_k d/d x^k_j k(x^i, x^k)   "grad_sum"
                (derivative in the *second* kernel argument, summed over
                 training points)
    gram[i, j]  = x^i . x^j

``grad_sum`` is the K x d matrix written <nabla, K> in the score-estimation
literature; for translation-invariant kernels it equals minus the sum of
first-argument gradients.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DegenerateBandwidthError

RBF = "rbf"
EPANECHNIKOV = "epanechnikov"
FAMILIES = (RBF, EPANECHNIKOV)


def as_samples(x, name: str = "samples") -> np.ndarray:
    """Validate a sample matrix: 2-D, at least 1 x 1, all entries finite."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D (K, d) array, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _as_point(x, name: str = "point") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus its bandwidth.

    ``sigma2`` is the squared bandwidth of the RBF family and must be a
    positive finite float there; the Epanechnikov family carries no
    bandwidth, so ``sigma2`` must be left as None.
    """

    family: str
    sigma2: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; expected one of {FAMILIES}"
            )
        if self.family == RBF:
            if self.sigma2 is None or not np.isfinite(self.sigma2) or self.sigma2 <= 0:
                raise ValueError(f"rbf kernel needs sigma2 > 0, got {self.sigma2!r}")
            object.__setattr__(self, "sigma2", float(self.sigma2))
        elif self.sigma2 is not None:
            raise ValueError("epanechnikov kernel carries no bandwidth")


@dataclass(frozen=True)
class KernelMatrices:
    """Matrices built from one sample set: kernel, summed gradient, Gram."""

    k_matrix: np.ndarray  # (K, K), symmetric, unit diagonal
    grad_sum: np.ndarray  # (K, d), <nabla, K>
    gram: np.ndarray      # (K, K), X X^T


def kernel_eval(x, y, spec: KernelSpec) -> float:
    """Evaluate k(x, y) for a single pair of points."""
    x = _as_point(x, "x")
    y = _as_point(y, "y")
    if x.shape != y.shape:
        raise ValueError(f"point dimensions differ: {x.shape} vs {y.shape}")
    diff = x - y
    sq = float(diff @ diff)
    if spec.family == RBF:
        return float(np.exp(-0.5 * sq / spec.sigma2))
    return 1.0 - sq / x.size


def kernel_grad_first_arg(x, y, spec: KernelSpec) -> np.ndarray:
    """Gradient of k(., y) at x, i.e. the derivative in the first argument.

    rbf:           -k(x, y) * (x - y) / sigma2
    epanechnikov:  -(2/d) * (x - y)

    Both families are symmetric and even in the displacement, so this also
    equals the second-argument gradient with the roles of x and y swapped.
    """
    x = _as_point(x, "x")
    y = _as_point(y, "y")
    if x.shape != y.shape:
        raise ValueError(f"point dimensions differ: {x.shape} vs {y.shape}")
    diff = x - y
    if spec.family == RBF:
        return -np.exp(-0.5 * float(diff @ diff) / spec.sigma2) * diff / spec.sigma2
    return -2.0 * diff / x.size


def cross_hess_trace(x, y, spec: KernelSpec) -> float:
    """Trace of the mixed second derivative d^2 k / dx dy at one pair.

    rbf:           k(x, y) * (d / sigma2 - ||x - y||^2 / sigma2^2)
    epanechnikov:  2
    """
    x = _as_point(x, "x")
    y = _as_point(y, "y")
    if x.shape != y.shape:
        raise ValueError(f"point dimensions differ: {x.shape} vs {y.shape}")
    if spec.family == RBF:
        diff = x - y
        sq = float(diff @ diff)
        s2 = spec.sigma2
        return float(np.exp(-0.5 * sq / s2)) * (x.size / s2 - sq / s2**2)
    return 2.0


def _sq_dists(xs: np.ndarray) -> np.ndarray:
    # Broadcast form keeps the matrix exactly symmetric (same float ops for
    # (i, j) and (j, i)), which the dot-product expansion would not.
    diff = xs[:, None, :] - xs[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def build_matrices(samples, spec: KernelSpec) -> KernelMatrices:
    """Build k_matrix, grad_sum and gram for one sample set.

    The grad_sum column j holds sum_k d/d x^k_j k(x^i, x^k): the kernel
    gradient taken in its second argument and summed over the sample, the
    quantity every estimator in this package consumes.
    """
    xs = as_samples(samples)
    n, d = xs.shape
    sq = _sq_dists(xs)
    if spec.family == RBF:
        k_matrix = np.exp(-0.5 * sq / spec.sigma2)
        # sum_k K_ik (x^i - x^k) / sigma2, written with row sums to avoid
        # materialising the (K, K, d) difference tensor again
        grad_sum = (k_matrix.sum(axis=1)[:, None] * xs - k_matrix @ xs) / spec.sigma2
    else:
        k_matrix = 1.0 - sq / d
        grad_sum = (2.0 / d) * (n * xs - xs.sum(axis=0)[None, :])
    return KernelMatrices(k_matrix=k_matrix, grad_sum=grad_sum, gram=xs @ xs.T)


def cross_hess_trace_matrix(samples, spec: KernelSpec) -> np.ndarray:
    """Pairwise matrix of cross_hess_trace over one sample set."""
    xs = as_samples(samples)
    n, d = xs.shape
    if spec.family == RBF:
        sq = _sq_dists(xs)
        s2 = spec.sigma2
        return np.exp(-0.5 * sq / s2) * (d / s2 - sq / s2**2)
    return np.full((n, n), 2.0)


def median_heuristic(samples) -> float:
    """Median-heuristic squared bandwidth: (median pairwise distance)^2.

    All K(K-1)/2 distinct unordered pairs enter; for an even pair count the
    median is the mean of the two central order statistics.  Needs K >= 2.
    """
    xs = as_samples(samples)
    if xs.shape[0] < 2:
        raise ValueError("median heuristic needs at least two samples")
    med = float(np.median(pdist(xs)))
    if med == 0.0:
        raise DegenerateBandwidthError(
            "median pairwise distance is zero (too many identical samples); "
            "supply an explicit bandwidth"
        )
    return med * med
