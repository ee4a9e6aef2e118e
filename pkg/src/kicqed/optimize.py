"""Bounded Nelder-Mead shared by the spectrum and pi-pulse fits."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import NotConverged


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    converged: bool
    evals: int
    history: list[float] = field(default_factory=list)  # best-so-far objective per evaluation


def simplex_minimize(
    fun: Callable[[np.ndarray], float],
    x0: Sequence[float],
    bounds: Sequence[tuple[float, float]],
    scale: Sequence[float] | None = None,
    max_evals: int = 2000,
    xtol: float = 1e-8,
    ftol: float = 1e-14,
    step: float = 0.1,
) -> SimplexResult:
    """Minimize ``fun`` with reflection/expansion/contraction simplex steps.

    The search runs in coordinates divided by ``scale`` (defaults to |x0|, floored
    at 1e-3) so ``xtol`` is relative; trial points are clipped into ``bounds``.
    """
    x0 = np.asarray(x0, dtype=float)
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    if np.any(lo >= hi):
        raise ValueError("every bound needs lo < hi")
    sc = np.maximum(np.abs(x0), 1e-3) if scale is None else np.asarray(scale, dtype=float)
    x0 = np.clip(x0, lo, hi)
    u0 = x0 / sc
    ulo, uhi = lo / sc, hi / sc

    simplex = [u0]
    for i in range(len(u0)):
        u = u0.copy()
        u[i] += step if u0[i] + step <= uhi[i] else -step
        simplex.append(np.clip(u, ulo, uhi))

    history: list[float] = []
    best = [np.inf, u0]

    def wrapped(u):
        u = np.clip(u, ulo, uhi)
        val = float(fun(u * sc))
        if not np.isfinite(val):
            val = np.inf
        if val < best[0]:
            best[0], best[1] = val, u.copy()
        history.append(best[0])
        return val

    res = minimize(
        wrapped,
        u0,
        method="Nelder-Mead",
        bounds=list(zip(ulo, uhi)),
        options=dict(
            initial_simplex=np.array(simplex),
            maxfev=max_evals,
            maxiter=10 * max_evals,
            xatol=xtol,
            fatol=ftol,
        ),
    )
    converged = bool(res.success)
    if not converged:
        warnings.warn(f"simplex stopped after {res.nfev} evaluations: {res.message}", NotConverged, stacklevel=2)
    return SimplexResult(
        x=best[1] * sc,
        fun=float(best[0]),
        converged=converged,
        evals=int(res.nfev),
        history=history,
    )
