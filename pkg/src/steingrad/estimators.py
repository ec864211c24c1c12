"""Score estimators: gradients of a log density learned from samples alone.

Given K samples x^1..x^K from an unnormalised or implicit density q, every
estimator here produces grad_x log q, either as a (K, d) gradient field at
the samples or as a K-vector of kernel-expansion coefficients:

- ``kde_fit``: plug-in kernel density estimate, -diag(K 1)^-1 <grad, K>.
- ``stein_nonparametric_fit``: ridge-regularised minimiser of the kernelised
  Stein discrepancy over free gradient matrices,
  G = -(K + eta I)^-1 <grad, K> (V-statistic) or with the kernel diagonal
  removed (U-statistic).
- ``stein_predict``: out-of-sample extension of the V-statistic fit via the
  block (Schur-complement) solve of the augmented system.
- ``score_matching_fit`` / ``score_matching_predict``: closed-form ridge
  score matching in the expansion g(x) = sum_k a_k grad_x k(x, x^k), with
  per-family closed forms for RBF and Epanechnikov kernels.
- ``stein_parametric_fit``: the same expansion fitted by minimising the
  kernelised Stein discrepancy (RBF only), V- or U-statistic.
- ``entropy_gradient_surrogate``: turns estimated scores and reparameterised
  sample Jacobians into a gradient of the entropy term.

``fit_estimator`` wraps all of the above behind a single kind switch and
returns a serialisable :class:`FittedEstimator`.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateDenominatorError, NumericalError
from .kernels import RBF, EPANECHNIKOV, KernelSpec, as_samples, build_matrices
from .linalg import solve_symmetric

DEFAULT_ETA = 0.1
# U-statistic systems can be indefinite; a strictly positive ridge keeps the
# solve meaningful.
MIN_U_ETA = 1e-8

KIND_KDE = "kde"
KIND_STEIN_V = "stein-nonparam-v"
KIND_STEIN_U = "stein-nonparam-u"
KIND_STEIN_PARAM_V = "stein-param-v"
KIND_STEIN_PARAM_U = "stein-param-u"
KIND_SCORE_RBF = "score-rbf"
KIND_SCORE_EPANECHNIKOV = "score-epanechnikov"
KINDS = (
    KIND_KDE,
    KIND_STEIN_V,
    KIND_STEIN_U,
    KIND_STEIN_PARAM_V,
    KIND_STEIN_PARAM_U,
    KIND_SCORE_RBF,
    KIND_SCORE_EPANECHNIKOV,
)

# kinds whose parameters are the gradient field itself
_GRAD_KINDS = (KIND_KDE, KIND_STEIN_V, KIND_STEIN_U)
# kinds parameterised by expansion coefficients
_COEFF_KINDS = (
    KIND_STEIN_PARAM_V,
    KIND_STEIN_PARAM_U,
    KIND_SCORE_RBF,
    KIND_SCORE_EPANECHNIKOV,
)


def _check_statistic(statistic: str) -> str:
    stat = str(statistic).lower()
    if stat not in ("v", "u"):
        raise ValueError(f"statistic must be 'v' or 'u', got {statistic!r}")
    return stat


def _check_eta(eta: float, statistic: str = "v") -> float:
    eta = float(eta)
    if not np.isfinite(eta) or eta < 0:
        raise ValueError(f"eta must be finite and >= 0, got {eta!r}")
    if statistic == "u" and eta < MIN_U_ETA:
        raise ValueError(
            f"U-statistic fits need eta >= {MIN_U_ETA:g} (the shifted system "
            f"can be indefinite), got {eta!r}"
        )
    return eta


def kde_fit(samples, spec: KernelSpec) -> np.ndarray:
    """Gradient field of the kernel density estimate at the samples.

    Row i is grad log qhat(x^i) for qhat(x) propto sum_k k(x, x^k), which in
    matrix form is -diag(K 1)^-1 <grad, K>.
    """
    xs = as_samples(samples)
    mats = build_matrices(xs, spec)
    denom = mats.k_matrix.sum(axis=1)
    zero = np.nonzero(denom == 0.0)[0]
    if zero.size:
        raise DegenerateDenominatorError(
            f"kernel row {int(zero[0])} sums to zero; the KDE gradient is "
            f"undefined there"
        )
    return -mats.grad_sum / denom[:, None]


def _kde_predict(train: np.ndarray, spec: KernelSpec, points: np.ndarray) -> np.ndarray:
    # same ratio form as kde_fit, evaluated at new points
    diff = points[:, None, :] - train[None, :, :]
    sq = np.einsum("mkd,mkd->mk", diff, diff)
    d = train.shape[1]
    if spec.family == RBF:
        kmat = np.exp(-0.5 * sq / spec.sigma2)
        num = -(kmat[:, :, None] * diff).sum(axis=1) / spec.sigma2
    else:
        kmat = 1.0 - sq / d
        num = -(2.0 / d) * diff.sum(axis=1)
    denom = kmat.sum(axis=1)
    zero = np.nonzero(denom == 0.0)[0]
    if zero.size:
        raise DegenerateDenominatorError(
            f"kernel row sum vanishes at prediction point {int(zero[0])}"
        )
    return num / denom[:, None]


def _stein_system(xs, spec, eta, statistic):
    mats = build_matrices(xs, spec)
    system = mats.k_matrix.copy()
    if statistic == "u":
        np.fill_diagonal(system, 0.0)
    system[np.diag_indices_from(system)] += eta
    return mats, system


def stein_nonparametric_fit(
    samples, spec: KernelSpec, eta: float = DEFAULT_ETA, statistic: str = "v"
) -> np.ndarray:
    """Nonparametric Stein gradient field at the samples.

    Solves (K + eta I) G = -<grad, K> for the V-statistic; the U-statistic
    removes the kernel diagonal from the system matrix and requires a
    strictly positive eta.
    """
    grads, _ = _stein_nonparametric_fit(samples, spec, eta, statistic)
    return grads


def _stein_nonparametric_fit(samples, spec, eta, statistic):
    xs = as_samples(samples)
    stat = _check_statistic(statistic)
    eta = _check_eta(eta, stat)
    mats, system = _stein_system(xs, spec, eta, stat)
    grads, jitter, level = solve_symmetric(
        system, -mats.grad_sum, name=f"stein {stat}-statistic system"
    )
    return grads, {"jitter": jitter, "jitter_level": level}


def stein_predict(fitted: "FittedEstimator", points) -> np.ndarray:
    """Out-of-sample gradients for a V-statistic nonparametric Stein fit.

    For each query y, with S the Schur complement of the training block in
    the augmented kernel system,

        g(y)^T = -S^-1 ( K_yX G - (K_yX (K + eta I)^-1 + 1^T) grad_y k(., y) )

    where grad_y k(., y) stacks the second-argument kernel gradients, one
    row per training point.  Equivalent to refitting on the augmented sample
    and reading off the new row, without the refit.
    """
    if fitted.kind != KIND_STEIN_V:
        raise ValueError(
            f"stein_predict needs a {KIND_STEIN_V!r} fit, got {fitted.kind!r}"
        )
    if fitted.kinv is None or fitted.grads is None:
        raise ValueError("fitted estimator lacks the cached training-block inverse")
    pts = as_samples(points, name="points")
    train, grads, kinv = fitted.train, fitted.grads, fitted.kinv
    if pts.shape[1] != train.shape[1]:
        raise ValueError(
            f"points have dimension {pts.shape[1]}, training data {train.shape[1]}"
        )
    spec, eta = fitted.spec, fitted.eta
    out = np.empty_like(pts)
    for i, y in enumerate(pts):
        diff = train - y[None, :]
        sq = np.einsum("kd,kd->k", diff, diff)
        if spec.family == RBF:
            kvec = np.exp(-0.5 * sq / spec.sigma2)
            grad_y = kvec[:, None] * diff / spec.sigma2
        else:
            kvec = 1.0 - sq / train.shape[1]
            grad_y = (2.0 / train.shape[1]) * diff
        smoothed = kinv @ kvec
        # k(y, y) = 1 for both families
        schur = 1.0 + eta - float(kvec @ smoothed)
        if schur <= 0:
            raise NumericalError(
                f"Schur complement {schur:.3e} <= 0 at prediction point {i}; "
                f"the augmented system is numerically degenerate"
            )
        out[i] = -(kvec @ grads - (smoothed + 1.0) @ grad_y) / schur
    return out


def _expansion_predict(coeffs, train, spec, points):
    # rows: sum_k a_k * grad_first k(y^i, x^k)
    diff = points[:, None, :] - train[None, :, :]  # (M, K, d)
    d = train.shape[1]
    if spec.family == RBF:
        sq = np.einsum("mkd,mkd->mk", diff, diff)
        weights = -np.exp(-0.5 * sq / spec.sigma2) * coeffs[None, :] / spec.sigma2
    else:
        weights = np.broadcast_to((-2.0 / d) * coeffs[None, :], diff.shape[:2])
    return np.einsum("mk,mkd->md", weights, diff)


def score_matching_fit(samples, spec: KernelSpec, eta: float = DEFAULT_ETA) -> np.ndarray:
    """Closed-form ridge score matching coefficients, one per sample.

    The fitted score is g(x) = sum_k a_k grad_x k(x, x^k).  Per family:

    rbf: a = (Sigma + eta I)^-1 v with
         Sigma = sum_i D_i^T D_i,    D_i = diag(x_i) K - K diag(x_i),
         v = sum_i [ sigma2 K 1 - (K (x_i*x_i) + diag(x_i*x_i) K 1
                                   - 2 diag(x_i) K x_i) ],
         x_i the i-th coordinate column of the sample matrix.

    epanechnikov: a = 1/2 (Sigma + eta I)^-1 1 with
         Sigma_kk' = (1/d^2) [ x^k . x^k'
                               + (1/K) sum_j (||x^j||^2 - (x^k + x^k') . x^j) ].

    Both are the exact minimisers of the empirical score-matching objective
    under an l2 penalty (the penalty scale absorbed into eta).
    """
    xs = as_samples(samples)
    eta = _check_eta(eta)
    coeffs, _ = _score_matching_fit(xs, spec, eta)
    return coeffs


def _score_matching_fit(xs, spec, eta):
    n, d = xs.shape
    if spec.family == RBF:
        mats = build_matrices(xs, spec)
        km = mats.k_matrix
        ksum = km.sum(axis=1)
        s2 = spec.sigma2
        sigma = np.zeros((n, n))
        v = np.zeros(n)
        for i in range(d):
            xi = xs[:, i]
            d_i = xi[:, None] * km - km * xi[None, :]
            sigma += d_i.T @ d_i
            v += s2 * ksum - (km @ (xi * xi) + (xi * xi) * ksum - 2.0 * xi * (km @ xi))
    else:
        gram = xs @ xs.T
        sqn = np.einsum("kd,kd->k", xs, xs)
        row = gram.sum(axis=1)
        sigma = (gram + (sqn.sum() - row[:, None] - row[None, :]) / n) / d**2
        v = np.full(n, 0.5)
    system = sigma.copy()
    system[np.diag_indices_from(system)] += eta
    coeffs, jitter, level = solve_symmetric(system, v, name="score matching system")
    return coeffs, {"jitter": jitter, "jitter_level": level}


def score_matching_predict(coeffs, train, spec: KernelSpec, points) -> np.ndarray:
    """Evaluate the fitted expansion sum_k a_k grad k(., x^k) at new points."""
    train = as_samples(train, name="train")
    pts = as_samples(points, name="points")
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 1 or coeffs.shape[0] != train.shape[0]:
        raise ValueError(
            f"coeffs must be a vector of length {train.shape[0]}, got {coeffs.shape}"
        )
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("coeffs contain non-finite entries")
    if pts.shape[1] != train.shape[1]:
        raise ValueError(
            f"points have dimension {pts.shape[1]}, training data {train.shape[1]}"
        )
    return _expansion_predict(coeffs, train, spec, pts)


def stein_parametric_fit(
    samples, sigma2: float, eta: float = DEFAULT_ETA, statistic: str = "v"
) -> np.ndarray:
    """Expansion coefficients minimising the kernelised Stein discrepancy.

    RBF kernel only.  With X the Gram matrix and K the kernel matrix,

        Lambda = X o (K K K) + K (K o X) K - ((K K) o X) K - K ((K K) o X)
        b = (K diag(X) K + (K K) o X - K (K o X) - (K o X) K) 1

    and a = (Lambda + eta I)^-1 b.  The U-statistic variant replaces the
    inner K of each triple product with K - diag(K) (Lambda tilde), keeping
    the same b; o is the elementwise product.
    """
    xs = as_samples(samples)
    stat = _check_statistic(statistic)
    eta = _check_eta(eta, stat)
    spec = KernelSpec(RBF, sigma2)
    coeffs, _ = _stein_parametric_fit(xs, spec, eta, stat)
    return coeffs


def _parametric_system(xs, spec, statistic):
    """Quadratic form (lam, b) of the parametric Stein objective."""
    if spec.family != RBF:
        raise ValueError("parametric Stein fits support the rbf family only")
    mats = build_matrices(xs, spec)
    km, gram = mats.k_matrix, mats.gram
    kk = km @ km
    kx = km * gram
    sqn = np.diag(gram)
    b = ((km * sqn[None, :]) @ km + kk * gram - km @ kx - kx @ km).sum(axis=1)
    if statistic == "v":
        lam = gram * (kk @ km) + km @ kx @ km - (kk * gram) @ km - km @ (kk * gram)
    else:
        km0 = km - np.diag(np.diag(km))
        kx0 = kx - np.diag(np.diag(kx))
        lam = (
            gram * (km @ km0 @ km)
            + km @ kx0 @ km
            - ((km @ km0) * gram) @ km
            - km @ ((km0 @ km) * gram)
        )
    return lam, b


def _stein_parametric_fit(xs, spec, eta, statistic):
    lam, b = _parametric_system(xs, spec, statistic)
    system = lam.copy()
    system[np.diag_indices_from(system)] += eta
    coeffs, jitter, level = solve_symmetric(
        system, b, name=f"parametric stein {statistic}-statistic system"
    )
    return coeffs, {"jitter": jitter, "jitter_level": level}


def entropy_gradient_surrogate(grads, jacobians) -> np.ndarray:
    """Entropy gradient from estimated scores and sample Jacobians.

    For samples z^k = f(eps^k; phi) with Jacobians J^k = d z^k / d phi of
    shape (d, p), the surrogate for grad_phi H[q] is

        -(1/K) sum_k g(z^k)^T J^k

    returned as a p-vector.
    """
    gs = as_samples(grads, name="grads")
    jac = np.asarray(jacobians, dtype=float)
    if jac.ndim != 3:
        raise ValueError(
            f"jacobians must have shape (K, d, p), got ndim={jac.ndim}"
        )
    if jac.shape[:2] != gs.shape:
        raise ValueError(
            f"jacobians leading shape {jac.shape[:2]} does not match grads "
            f"{gs.shape}"
        )
    if not np.all(np.isfinite(jac)):
        raise ValueError("jacobians contain non-finite entries")
    return -np.einsum("kd,kdp->p", gs, jac) / gs.shape[0]


@dataclass(frozen=True)
class FittedEstimator:
    """A fitted score estimator: parameters plus everything prediction needs.

    Exactly one of ``grads`` (nonparametric kinds: the gradient field is the
    parameter set) and ``coeffs`` (expansion kinds) is populated.  ``kinv``
    caches (K + eta I)^-1 and exists only for the predictive V-statistic
    nonparametric fit.
    """

    kind: str
    train: np.ndarray
    spec: KernelSpec
    eta: float
    grads: np.ndarray | None = None
    coeffs: np.ndarray | None = None
    kinv: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def grads_at_train(self) -> np.ndarray:
        """Gradient field at the training samples (the fit output)."""
        if self.grads is not None:
            return self.grads.copy()
        return _expansion_predict(self.coeffs, self.train, self.spec, self.train)

    def predict(self, points) -> np.ndarray:
        """Gradient field at new points; not every kind supports this."""
        pts = as_samples(points, name="points")
        if pts.shape[1] != self.train.shape[1]:
            raise ValueError(
                f"points have dimension {pts.shape[1]}, training data "
                f"{self.train.shape[1]}"
            )
        if self.kind == KIND_KDE:
            return _kde_predict(self.train, self.spec, pts)
        if self.kind == KIND_STEIN_V:
            return stein_predict(self, pts)
        if self.kind in _COEFF_KINDS:
            return _expansion_predict(self.coeffs, self.train, self.spec, pts)
        raise ValueError(
            f"{self.kind!r} has no out-of-sample prediction rule; refit on "
            f"the augmented sample instead"
        )

    def to_json_dict(self) -> dict:
        """Plain-python dict for JSON serialisation (exact float round trip)."""
        return {
            "kind": self.kind,
            "kernel": {
                "family": self.spec.family,
                "sigma2": self.spec.sigma2,
            },
            "eta": self.eta,
            "train": self.train.tolist(),
            "grads": None if self.grads is None else self.grads.tolist(),
            "coeffs": None if self.coeffs is None else self.coeffs.tolist(),
            "kinv": None if self.kinv is None else self.kinv.tolist(),
            "diagnostics": dict(self.diagnostics),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "FittedEstimator":
        try:
            kind = obj["kind"]
            kernel = obj["kernel"]
            spec = KernelSpec(kernel["family"], kernel.get("sigma2"))
            train = as_samples(obj["train"], name="train")
            eta = float(obj["eta"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed estimator record: {exc}") from exc
        if kind not in KINDS:
            raise ValueError(f"unknown estimator kind {kind!r}")
        grads = obj.get("grads")
        coeffs = obj.get("coeffs")
        kinv = obj.get("kinv")
        return cls(
            kind=kind,
            train=train,
            spec=spec,
            eta=eta,
            grads=None if grads is None else as_samples(grads, name="grads"),
            coeffs=None if coeffs is None else np.asarray(coeffs, dtype=float),
            kinv=None if kinv is None else np.asarray(kinv, dtype=float),
            diagnostics=dict(obj.get("diagnostics") or {}),
        )


def fit_estimator(
    kind: str, samples, spec: KernelSpec, eta: float = DEFAULT_ETA
) -> FittedEstimator:
    """Fit any estimator kind and package the result.

    The V-statistic nonparametric Stein fit also caches (K + eta I)^-1 so
    that the result can predict out of sample.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown estimator kind {kind!r}; expected one of {KINDS}")
    xs = as_samples(samples)
    diagnostics: dict = {}
    grads = coeffs = kinv = None
    if kind == KIND_KDE:
        grads = kde_fit(xs, spec)
    elif kind in (KIND_STEIN_V, KIND_STEIN_U):
        stat = "v" if kind == KIND_STEIN_V else "u"
        grads, diagnostics = _stein_nonparametric_fit(xs, spec, eta, stat)
        if kind == KIND_STEIN_V:
            _, system = _stein_system(xs, spec, _check_eta(eta), "v")
            kinv, _, _ = solve_symmetric(
                system, np.eye(xs.shape[0]), name="stein predictive inverse"
            )
    elif kind in (KIND_SCORE_RBF, KIND_SCORE_EPANECHNIKOV):
        expected = RBF if kind == KIND_SCORE_RBF else EPANECHNIKOV
        if spec.family != expected:
            raise ValueError(f"{kind!r} requires the {expected!r} kernel family")
        coeffs, diagnostics = _score_matching_fit(xs, spec, _check_eta(eta))
    else:
        stat = "v" if kind == KIND_STEIN_PARAM_V else "u"
        coeffs, diagnostics = _stein_parametric_fit(
            xs, spec, _check_eta(eta, stat), stat
        )
    return FittedEstimator(
        kind=kind,
        train=xs.copy(),
        spec=spec,
        eta=float(eta),
        grads=grads,
        coeffs=coeffs,
        kinv=kinv,
        diagnostics=diagnostics,
    )
