"""Function and gradient evaluation for the symmetric CP least-squares fit.

The objective is ``f(lam, A) = alpha + ||M||^2 - 2 <X, M>`` where
``M = sum_j lam_j a_j^{outer d}``.  With ``alpha = ||X||^2`` this is exactly
the squared error ``||X - M||^2``; with the default ``alpha = 0`` it is the
same function shifted by a constant, which leaves the gradients (and hence
any optimizer trajectory) untouched while avoiding the cost of the data
norm.

Three evaluation routes share one algebraic tail and differ only in how the
TTSV matrix ``Y`` is produced: from a dense tensor (explicit), from the
observation matrix (implicit), or from a random subsample of observations
(stochastic, an unbiased estimator of the implicit route).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from momentcp.dense import DenseSymTensor, ObservationSet, ttsv_all_but_one
from momentcp.implicit import build_gram_cache, ttsv_batch


@dataclass
class FgResult:
    """Objective value and gradients at one point ``(lam, A)``."""

    f: float
    g_lam: np.ndarray
    g_A: np.ndarray
    eval_time: float
    eval_kind: str


def _validate_variables(lam: np.ndarray, A: np.ndarray, n: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    lam = np.asarray(lam, dtype=float)
    A = np.asarray(A, dtype=float)
    if lam.ndim != 1 or A.ndim != 2:
        raise ValueError("lam must be a vector and A a matrix")
    if A.shape != (n, lam.size):
        raise ValueError(f"A must be {n} x {lam.size}, got shape {A.shape}")
    # fail fast rather than letting NaN leak into a line search
    if not (np.isfinite(lam).all() and np.isfinite(A).all() and np.isfinite(alpha)):
        raise ValueError("model variables and alpha must be finite")
    return lam, A


def _finish(Y: np.ndarray, lam: np.ndarray, A: np.ndarray, d: int, alpha: float):
    cache = build_gram_cache(lam, A, d, Y)
    f = alpha + float(lam @ cache.u) - 2.0 * float(cache.w @ lam)
    g_lam = -2.0 * (cache.w - cache.u)
    g_A = -2.0 * d * (Y - (A * lam) @ cache.C) * lam
    return f, g_lam, g_A


def fg_explicit(
    X: DenseSymTensor, lam: np.ndarray, A: np.ndarray, alpha: float = 0.0
) -> FgResult:
    """Objective and gradients computed against a dense data tensor.

    The TTSVs cost O(r n^d); everything else is O(n r^2).  Serves as the
    reference route for :func:`fg_implicit`.
    """
    lam, A = _validate_variables(lam, A, X.dim, alpha)
    start = time.perf_counter()
    d = X.order
    Y = np.empty_like(A)
    for j in range(lam.size):
        Y[:, j] = ttsv_all_but_one(X, A[:, j])
    f, g_lam, g_A = _finish(Y, lam, A, d, alpha)
    return FgResult(f, g_lam, g_A, time.perf_counter() - start, "explicit")


def fg_implicit(
    obs: ObservationSet,
    lam: np.ndarray,
    A: np.ndarray,
    d: int,
    alpha: float = 0.0,
    eval_kind: str = "implicit",
) -> FgResult:
    """Objective and gradients computed from ``(V, nu)`` alone, in O(p n r + n r^2).

    Identical contract to :func:`fg_explicit` with ``X = build_moment(obs, d)``,
    but no object of size n^d is ever formed.
    """
    lam, A = _validate_variables(lam, A, obs.n, alpha)
    start = time.perf_counter()
    Y = ttsv_batch(obs, A, d)
    f, g_lam, g_A = _finish(Y, lam, A, d, alpha)
    return FgResult(f, g_lam, g_A, time.perf_counter() - start, eval_kind)


def sample_observations(
    obs: ObservationSet, s: int, rng: np.random.Generator
) -> ObservationSet:
    """Draw ``s`` observations uniformly with replacement, reweighted to ``1/s``.

    The moment tensor of the sample is an unbiased estimator of the moment
    tensor of ``obs``, so feeding the result to :func:`fg_implicit` yields
    unbiased stochastic gradients.  Only uniformly weighted inputs are
    supported; resampling under general weights is out of scope here.
    """
    if s < 1:
        raise ValueError(f"sample size must be >= 1, got {s}")
    if not obs.has_uniform_weights():
        raise ValueError("sampling requires uniform observation weights")
    idx = rng.integers(0, obs.p, size=s)
    labels = obs.labels[idx] if obs.labels is not None else None
    return ObservationSet(obs.V[:, idx], labels=labels)
