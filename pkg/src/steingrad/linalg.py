"""Dense symmetric solves with a deterministic jitter-escalation ladder.

Every regularised system in this library is symmetric: positive definite in
the common case, possibly indefinite for the U-statistic variants.  All of
them are routed through :func:`solve_symmetric`, which factorises with
scipy's symmetric-indefinite solver and, if the factorisation fails or the
residual is unacceptable, retries with escalating diagonal jitter before
giving up.  The ladder is deterministic, so a given system always resolves
the same way, and the jitter actually used is reported back to the caller.
"""

import warnings

import numpy as np
import scipy.linalg

from .errors import SingularSolveError

# Accepted residual for a solve of M z = b, relative to 1 + ||b||_F.
RESIDUAL_RTOL = 1e-8

# Diagonal jitter ladder, in units of mean(diag(M)) = trace(M)/K: try the
# system as given, then add 1e-10 * trace/K escalating tenfold to 1e-4.
JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


def solve_symmetric(mat, rhs, name: str = "linear system"):
    """Solve ``mat @ z = rhs`` for symmetric ``mat``.

    Parameters
    ----------
    mat : (K, K) array
        Symmetric system matrix.
    rhs : (K,) or (K, m) array
        Right-hand side.
    name : str
        Label used in error messages.

    Returns
    -------
    z : ndarray
        Solution with the same trailing shape as ``rhs``.
    jitter : float
        Diagonal jitter that was added to obtain the accepted solution
        (0.0 when the system solved as given).
    level : int
        Index into the jitter ladder of the accepted attempt.

    Raises
    ------
    SingularSolveError
        If no ladder level produces a finite solution with residual at most
        ``RESIDUAL_RTOL * (1 + ||rhs||_F)`` against the (jittered) system.
    """
    mat = np.asarray(mat, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name}: system matrix must be square, got {mat.shape}")
    if rhs.shape[0] != mat.shape[0]:
        raise ValueError(
            f"{name}: rhs has {rhs.shape[0]} rows, system has {mat.shape[0]}"
        )
    k = mat.shape[0]
    scale = abs(float(np.trace(mat))) / k
    bound = RESIDUAL_RTOL * (1.0 + float(np.linalg.norm(rhs)))
    eye = np.eye(k)
    for level, mult in enumerate(JITTER_LADDER):
        jitter = mult * scale
        system = mat + jitter * eye if jitter else mat
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                z = scipy.linalg.solve(system, rhs, assume_a="sym")
        except (np.linalg.LinAlgError, ValueError):
            continue
        if not np.all(np.isfinite(z)):
            continue
        if float(np.linalg.norm(system @ z - rhs)) <= bound:
            return z, jitter, level
    raise SingularSolveError(
        f"{name}: singular or numerically unsolvable even with diagonal "
        f"jitter up to {JITTER_LADDER[-1] * scale:.3e}; increase the ridge eta"
    )
