"""Hamiltonian Monte Carlo with a pluggable score function, plus the banana.

The sampler follows the gradient-free HMC protocol: the leapfrog integrator
consumes whatever score function it is given (exact, or the prediction rule
of a fitted estimator), while the Metropolis-Hastings correction always uses
the exact target log density and the standard Gaussian kinetic energy.  When
the score is only an estimate the invariant distribution is therefore not
exactly the target; the point of the harness is to measure how close the
samples get.

The benchmark target is the banana distribution

    x1 ~ N(0, v),    x2 = eps + b (x1^2 - v),   eps ~ N(0, 1)

with defaults b = 0.03, v = 100, so E[x2] = 0 and Var(x2) = 1 + 2 b^2 v^2.

Chains are independent: each one owns a private RNG stream derived from
(master seed, chain index), so results are bitwise reproducible for a given
seed regardless of execution order, and chains may run on a thread pool.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .discrepancy import ksd_to_target
from .errors import DivergenceError
from .kernels import KernelSpec, as_samples

BANANA_B = 0.03
BANANA_V = 100.0


def _check_banana_params(b, v):
    if not np.isfinite(b):
        raise ValueError(f"banana curvature b must be finite, got {b!r}")
    if not np.isfinite(v) or v <= 0:
        raise ValueError(f"banana variance v must be > 0, got {v!r}")
    return float(b), float(v)


def _banana_point(x):
    arr = np.asarray(x, dtype=float)
    if arr.shape != (2,):
        raise ValueError(f"banana target is 2-D, got shape {arr.shape}")
    return arr


def banana_log_density(x, b: float = BANANA_B, v: float = BANANA_V) -> float:
    """log N(x1; 0, v) + log N(x2; b (x1^2 - v), 1), normalising constants in."""
    b, v = _check_banana_params(b, v)
    x = _banana_point(x)
    resid = x[1] - b * (x[0] ** 2 - v)
    return float(
        -0.5 * math.log(2.0 * math.pi * v)
        - 0.5 * x[0] ** 2 / v
        - 0.5 * math.log(2.0 * math.pi)
        - 0.5 * resid**2
    )


def banana_score(x, b: float = BANANA_B, v: float = BANANA_V) -> np.ndarray:
    """Gradient of the banana log density: (-x1/v + 2 b x1 r, -r)."""
    b, v = _check_banana_params(b, v)
    x = _banana_point(x)
    resid = x[1] - b * (x[0] ** 2 - v)
    return np.array([-x[0] / v + 2.0 * b * x[0] * resid, -resid])


def banana_sample(n: int, rng: np.random.Generator, b: float = BANANA_B, v: float = BANANA_V) -> np.ndarray:
    """Draw n exact banana samples through the generative definition."""
    b, v = _check_banana_params(b, v)
    if n < 1:
        raise ValueError(f"need n >= 1 samples, got {n!r}")
    x1 = rng.normal(0.0, math.sqrt(v), size=n)
    x2 = rng.standard_normal(n) + b * (x1**2 - v)
    return np.column_stack([x1, x2])


@dataclass(frozen=True)
class BananaTarget:
    """Banana parameters bundled with the closed-form target functions."""

    b: float = BANANA_B
    v: float = BANANA_V

    def __post_init__(self):
        _check_banana_params(self.b, self.v)

    def log_density(self, x) -> float:
        return banana_log_density(x, self.b, self.v)

    def score(self, x) -> np.ndarray:
        return banana_score(x, self.b, self.v)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return banana_sample(n, rng, self.b, self.v)


@dataclass(frozen=True)
class HmcConfig:
    """Static parameters of one HMC run."""

    n_chains: int
    n_iters: int
    stepsize: float
    n_leapfrog: int
    burn_in_fraction: float = 0.2

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError(f"n_chains must be >= 1, got {self.n_chains}")
        if self.n_iters < 1:
            raise ValueError(f"n_iters must be >= 1, got {self.n_iters}")
        if not np.isfinite(self.stepsize) or self.stepsize <= 0:
            raise ValueError(f"stepsize must be > 0, got {self.stepsize!r}")
        if self.n_leapfrog < 1:
            raise ValueError(f"n_leapfrog must be >= 1, got {self.n_leapfrog}")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ValueError(
                f"burn_in_fraction must be in [0, 1), got {self.burn_in_fraction!r}"
            )


@dataclass(frozen=True)
class ChainStats:
    """Diagnostics of one multi-chain run, post burn-in where applicable.

    ``ksd_pooled`` and ``ksd_mean_per_chain`` are NaN unless the run was
    given a target score function to measure against.  ``trajectories`` has
    shape (n_chains, n_iters, d) and holds the post-decision state of every
    iteration (burn-in included).
    """

    acceptance_rate: float
    mean_x1: float
    se_mean_x1: float
    ksd_pooled: float
    ksd_mean_per_chain: float
    n_divergent: int
    trajectories: np.ndarray | None
    accepts: np.ndarray | None  # (n_chains, n_iters) bool


def leapfrog(q, p, stepsize: float, n_steps: int, score_fn):
    """Integrate Hamilton's equations with the leapfrog scheme.

    Kinetic energy is ||p||^2 / 2 (identity mass); the force is the score,
    i.e. d p / d t = grad log pi(q).  n_steps = 0 returns the inputs
    unchanged.  A non-finite position, momentum, or score raises
    DivergenceError carrying the step index.
    """
    q = np.asarray(q, dtype=float).copy()
    p = np.asarray(p, dtype=float).copy()
    if q.ndim != 1 or q.shape != p.shape:
        raise ValueError(
            f"q and p must be 1-D vectors of equal length, got {q.shape}, {p.shape}"
        )
    if not np.isfinite(stepsize) or stepsize <= 0:
        raise ValueError(f"stepsize must be > 0, got {stepsize!r}")
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps}")
    if n_steps == 0:
        return q, p
    eps = float(stepsize)

    def force(state, step):
        g = np.asarray(score_fn(state), dtype=float)
        if g.shape != state.shape or not np.all(np.isfinite(g)):
            raise DivergenceError(
                f"score function diverged at leapfrog step {step}", step=step
            )
        return g

    p = p + 0.5 * eps * force(q, 0)
    for step in range(n_steps):
        q = q + eps * p
        if not np.all(np.isfinite(q)):
            raise DivergenceError(
                f"position diverged at leapfrog step {step}", step=step
            )
        scale = eps if step < n_steps - 1 else 0.5 * eps
        p = p + scale * force(q, step)
        if not np.all(np.isfinite(p)):
            raise DivergenceError(
                f"momentum diverged at leapfrog step {step}", step=step
            )
    return q, p


def run_chain(target_logp, score_fn, cfg: HmcConfig, q0, rng: np.random.Generator):
    """Run one chain; returns (trajectory, accept flags, divergence count).

    Each iteration draws a fresh momentum, integrates cfg.n_leapfrog steps,
    and accepts with the standard Metropolis-Hastings ratio evaluated with
    the exact target log density.  A divergent trajectory counts as a
    rejection.
    """
    q = np.asarray(q0, dtype=float).copy()
    if q.ndim != 1:
        raise ValueError(f"initial state must be a 1-D vector, got shape {q.shape}")
    d = q.size
    traj = np.empty((cfg.n_iters, d))
    accepts = np.zeros(cfg.n_iters, dtype=bool)
    logp = float(target_logp(q))
    n_div = 0
    for t in range(cfg.n_iters):
        p = rng.standard_normal(d)
        u = rng.uniform()
        try:
            q_new, p_new = leapfrog(q, p, cfg.stepsize, cfg.n_leapfrog, score_fn)
        except DivergenceError:
            n_div += 1
            traj[t] = q
            continue
        logp_new = float(target_logp(q_new))
        log_alpha = (logp_new - 0.5 * float(p_new @ p_new)) - (
            logp - 0.5 * float(p @ p)
        )
        if log_alpha >= 0.0 or math.log(u) < log_alpha:
            q, logp = q_new, logp_new
            accepts[t] = True
        traj[t] = q
    return traj, accepts, n_div


def _chain_rngs(seed, n_chains, chain_seeds):
    if chain_seeds is not None:
        if len(chain_seeds) != n_chains:
            raise ValueError(
                f"got {len(chain_seeds)} chain seeds for {n_chains} chains"
            )
        return [np.random.default_rng(s) for s in chain_seeds]
    if seed is None:
        raise ValueError("run_hmc needs a master seed (or explicit chain seeds)")
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_chains)]


def run_hmc(
    target_logp,
    score_fn,
    cfg: HmcConfig,
    init,
    seed=None,
    *,
    chain_seeds=None,
    ksd_score_fn=None,
    ksd_spec: KernelSpec | None = None,
    ksd_pool_cap: int = 2000,
    n_threads: int = 1,
    keep_trajectories: bool = True,
) -> ChainStats:
    """Run cfg.n_chains independent HMC chains and summarise them.

    Parameters
    ----------
    target_logp, score_fn
        Exact log density used in the accept step, and the (possibly
        estimated) score driving the leapfrog dynamics.
    init : (n_chains, d) array
        One starting state per chain.
    seed : int
        Master seed; chain i draws from a stream spawned at index i, so the
        run is reproducible bit for bit and chains never share randomness.
    chain_seeds : sequence, optional
        Explicit per-chain seeds overriding the derivation from ``seed``.
    ksd_score_fn, ksd_spec : optional
        When both are given, the kernelised Stein discrepancy of the
        post-burn-in samples against that score is reported, per chain
        (averaged) and pooled.  The pooled sample is thinned evenly to at
        most ``ksd_pool_cap`` points to keep the quadratic cost bounded.
    n_threads : int
        Chains run on a thread pool of this size when > 1; the result is
        identical either way.
    """
    init = as_samples(init, name="init")
    if init.shape[0] != cfg.n_chains:
        raise ValueError(
            f"init has {init.shape[0]} rows for {cfg.n_chains} chains"
        )
    if (ksd_score_fn is None) != (ksd_spec is None):
        raise ValueError("ksd_score_fn and ksd_spec must be supplied together")
    if ksd_pool_cap < 2:
        raise ValueError(f"ksd_pool_cap must be >= 2, got {ksd_pool_cap}")
    rngs = _chain_rngs(seed, cfg.n_chains, chain_seeds)

    def job(c):
        return run_chain(target_logp, score_fn, cfg, init[c], rngs[c])

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=min(n_threads, cfg.n_chains)) as pool:
            results = list(pool.map(job, range(cfg.n_chains)))
    else:
        results = [job(c) for c in range(cfg.n_chains)]

    traj = np.stack([r[0] for r in results])  # (C, T, d)
    accepts = np.stack([r[1] for r in results])
    n_div = int(sum(r[2] for r in results))
    n_burn = int(cfg.n_iters * cfg.burn_in_fraction)
    post = traj[:, n_burn:, :]
    chain_means = post[:, :, 0].mean(axis=1)
    mean_x1 = float(chain_means.mean())
    if cfg.n_chains > 1:
        se_mean_x1 = float(chain_means.std(ddof=1) / math.sqrt(cfg.n_chains))
    else:
        se_mean_x1 = float("nan")

    ksd_pooled = ksd_mean = float("nan")
    if ksd_score_fn is not None:
        per_chain = [
            ksd_to_target(post[c], ksd_score_fn, ksd_spec, statistic="v").value
            for c in range(cfg.n_chains)
        ]
        ksd_mean = float(np.mean(per_chain))
        pooled = post.reshape(-1, traj.shape[2])
        step = max(1, math.ceil(pooled.shape[0] / ksd_pool_cap))
        ksd_pooled = ksd_to_target(
            pooled[::step], ksd_score_fn, ksd_spec, statistic="v"
        ).value

    return ChainStats(
        acceptance_rate=float(accepts.mean()),
        mean_x1=mean_x1,
        se_mean_x1=se_mean_x1,
        ksd_pooled=ksd_pooled,
        ksd_mean_per_chain=ksd_mean,
        n_divergent=n_div,
        trajectories=traj if keep_trajectories else None,
        accepts=accepts if keep_trajectories else None,
    )
