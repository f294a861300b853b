"""Dominant-eigenvalue magnitude estimation by power iteration.

The growth-ratio estimate converges geometrically when the dominant
eigenvalue is real and simple. When it never settles (e.g. a dominant
complex pair makes the ratio oscillate) we fall back to the norm-growth
mean ||A^k x||^(1/k), which converges for almost every start vector.
"""

from __future__ import annotations

import numpy as np


def power_iteration(m: np.ndarray, iters: int = 500, tol: float = 1e-12,
                    rng: np.random.Generator | None = None) -> tuple[float, bool]:
    """Estimate the spectral radius from one random start.

    Returns (estimate, converged). ``converged`` is False when the ratio
    test never stabilized and the slower norm-growth estimate was used.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if iters < 1:
        raise ValueError("iters must be positive")
    n = m.shape[0]
    if rng is None:
        rng = np.random.default_rng(0)
    x = rng.standard_normal(n)
    norm = np.linalg.norm(x)
    if norm == 0.0:
        x = np.zeros(n)
        x[0] = 1.0
    else:
        x = x / norm

    log_growth: list[float] = []
    ratio = 0.0
    prev = None
    for _ in range(iters):
        y = m @ x
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            # x was mapped into the nullspace; the run sees radius 0.
            return 0.0, True
        ratio = ny
        log_growth.append(np.log(ny))
        x = y / ny
        if prev is not None and abs(ratio - prev) <= tol * max(1.0, abs(ratio)):
            return ratio, True
        prev = ratio
    # Oscillating ratio: use the geometric mean of the later growth factors.
    tail = log_growth[len(log_growth) // 2:]
    return float(np.exp(np.mean(tail))), False


def spectral_radius(m: np.ndarray, iters: int = 500, tol: float = 1e-12,
                    rng: np.random.Generator | None = None, restarts: int = 3) -> float:
    """Largest eigenvalue magnitude of a square matrix, power iteration.

    Runs ``restarts`` independent starts and keeps the largest estimate, which
    guards against a start vector orthogonal to the dominant eigenvector.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    best = 0.0
    for _ in range(restarts):
        est, _ = power_iteration(m, iters=iters, tol=tol, rng=rng)
        best = max(best, est)
    return best
