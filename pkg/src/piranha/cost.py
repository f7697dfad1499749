"""Discounted multi-step prediction cost of a state sequence.

Time sums run over the transition indices ``t = 0 .. T-1``.  A state
``U[t]`` predicts ``x[t]``; pushing it ``k`` steps forward predicts
``x[t + k]``, so the series must hold ``T + K`` samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HyperparameterError, ShapeError
from .net import TANH, SquashFn, Weights, series_values


@dataclass(frozen=True)
class Hyperparams:
    gamma: float
    K: int
    T: int

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise HyperparameterError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.K < 1:
            raise HyperparameterError(f"K must be >= 1, got {self.K}")
        if self.T < 1:
            raise HyperparameterError(f"T must be >= 1, got {self.T}")

    @property
    def series_length(self) -> int:
        return self.T + self.K

    def require_trainable(self):
        # every weight-dependent term of the improvement objective carries gamma**k, k >= 1
        if self.gamma == 0.0:
            raise HyperparameterError(
                "gamma=0 makes the improvement objective independent of the weights "
                "(its gradient vanishes identically); use gamma > 0 for training"
            )
        return self


@dataclass(frozen=True)
class CostBreakdown:
    total: float
    per_horizon: list = field(default_factory=list)


def _split(U, x, T, m, length):
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] != T + 1:
        raise ShapeError(f"state sequence must have shape ({T + 1}, n), got {U.shape}")
    if U.shape[1] <= m:
        raise ShapeError(f"states of size {U.shape[1]} cannot carry {m} outputs")
    xv = series_values(x, length)
    if xv.shape[1] != m:
        raise ShapeError(f"series has {xv.shape[1]} channels, expected {m}")
    return U, xv


def immediate_cost(U, x) -> float:
    """Sum of squared distances between each state's visible part and its target."""
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] < 2:
        raise ShapeError(f"state sequence must have shape (T+1, n) with T >= 1, got {U.shape}")
    T = U.shape[0] - 1
    xv = series_values(x, T)
    m = xv.shape[1]
    U, xv = _split(U, xv, T, m, T)
    d = U[:T, :m] - xv[:T]
    return float(np.sum(d * d))


def horizon_errors(w_first: Weights, w_rest: Weights, U, x, K: int, sq: SquashFn = TANH):
    """Squared error sums for horizons ``k = 1 .. K``, all states pushed in lockstep.

    Horizon ``k`` pushes every ``U[t]`` one teacher-forced step with
    ``w_first`` and then ``k - 1`` free-running steps with ``w_rest``.
    """
    m, T = w_first.m, np.asarray(U).shape[0] - 1
    U, xv = _split(U, x, T, m, T + K)
    Fe, Gxe, gbe = w_rest.F, w_rest.G[:, :-1], w_rest.G[:, -1]
    h = sq.value(U[:T] @ w_first.F.T + xv[:T] @ w_first.G[:, :-1].T + w_first.G[:, -1])
    out = []
    for k in range(1, K + 1):
        if k > 1:
            h = sq.value(h @ Fe.T + h[:, :m] @ Gxe.T + gbe)
        d = h[:, :m] - xv[k:k + T]
        out.append(float(np.sum(d * d)))
    return out


def discounted_cost(w: Weights, U, x, hp: Hyperparams, sq: SquashFn = TANH) -> CostBreakdown:
    """K-truncated discounted cost of ``U`` under weights ``w``."""
    _split(U, x, hp.T, w.m, hp.series_length)
    per = [immediate_cost(U, x)]
    errs = horizon_errors(w, w, U, x, hp.K, sq)
    g = 1.0
    for e in errs:
        g *= hp.gamma
        per.append(g * e)
    return CostBreakdown(float(sum(per)), per)


def improvement_objective(w_cand: Weights, w_eval: Weights, U, x, hp: Hyperparams,
                          sq: SquashFn = TANH) -> float:
    """Cost of moving every state one step with ``w_cand`` and evaluating with ``w_eval``."""
    if w_cand.shape != w_eval.shape:
        raise ShapeError("candidate and evaluation weights must share a shape")
    _split(U, x, hp.T, w_cand.m, hp.series_length)
    total = immediate_cost(U, x)
    g = 1.0
    for e in horizon_errors(w_cand, w_eval, U, x, hp.K, sq):
        g *= hp.gamma
        total += g * e
    return float(total)
