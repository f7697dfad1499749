"""Gradient of the truncated improvement objective and its checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cost import Hyperparams, _split, improvement_objective
from .errors import HyperparameterError, NumericError
from .net import TANH, Shape, SquashFn, Weights


@dataclass(frozen=True)
class Gradient:
    dF: np.ndarray
    dG: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.dF.ravel(), self.dG.ravel()])

    def norm(self) -> float:
        return float(np.linalg.norm(self.flat()))

    def dot(self, other: "Gradient") -> float:
        return float(self.flat() @ other.flat())

    def __sub__(self, other):
        return Gradient(self.dF - other.dF, self.dG - other.dG)

    @classmethod
    def from_flat(cls, vec, shape: Shape) -> "Gradient":
        k = shape.n * shape.n
        return cls(vec[:k].reshape(shape.n, shape.n), vec[k:].reshape(shape.n, shape.m + 1))


@dataclass(frozen=True)
class TruncationReport:
    K: int
    bound: float
    C0: float
    C1: float


def grad(w: Weights, U, x, hp: Hyperparams, sq: SquashFn = TANH) -> Gradient:
    """Exact gradient of ``improvement_objective(., w, U, x, hp)`` at ``w``.

    Reverse-mode pass through the ``K``-step closed-loop unrolling of all
    ``T`` states at once.  The immediate-cost term does not depend on the
    candidate weights and contributes nothing.
    """
    m, T, K, gamma = w.m, hp.T, hp.K, hp.gamma
    U, xv = _split(U, x, T, m, hp.series_length)
    F, Gx, gb = w.F, w.G[:, :-1], w.G[:, -1]
    U0, X0 = U[:T], xv[:T]

    pre = [U0 @ F.T + X0 @ Gx.T + gb]
    hs = [sq.value(pre[0])]
    for _ in range(1, K):
        h = hs[-1]
        pre.append(h @ F.T + h[:, :m] @ Gx.T + gb)
        hs.append(sq.value(pre[-1]))

    delta_h = np.zeros_like(hs[0])
    for j in range(K, 0, -1):
        e = hs[j - 1][:, :m] - xv[j:j + T]
        delta_h[:, :m] += (2.0 * gamma ** j) * e
        delta_a = delta_h * sq.derivative(pre[j - 1])
        if j > 1:
            delta_h = delta_a @ F
            delta_h[:, :m] += delta_a @ Gx

    dF = delta_a.T @ U0
    dG = np.empty_like(w.G)
    dG[:, :-1] = delta_a.T @ X0
    dG[:, -1] = delta_a.sum(axis=0)
    if not (np.all(np.isfinite(dF)) and np.all(np.isfinite(dG))):
        raise NumericError("non-finite gradient")
    return Gradient(dF, dG)


def fd_grad(w: Weights, U, x, hp: Hyperparams, h: float = 1e-5, sq: SquashFn = TANH) -> Gradient:
    """Central differences of the improvement objective in each weight, evaluator fixed at ``w``."""
    if h <= 0:
        raise ValueError("step h must be positive")
    shape = w.shape
    base = w.flat()
    out = np.empty_like(base)
    for i in range(base.size):
        plus = base.copy()
        minus = base.copy()
        plus[i] += h
        minus[i] -= h
        fp = improvement_objective(Weights.from_flat(plus, shape), w, U, x, hp, sq)
        fm = improvement_objective(Weights.from_flat(minus, shape), w, U, x, hp, sq)
        out[i] = (fp - fm) / (2.0 * h)
    return Gradient.from_flat(out, shape)


def max_relative_error(a: Gradient, b: Gradient, floor: float = 1e-10) -> float:
    """Largest componentwise ``|a - b| / max(|a|, |b|)``; components below ``floor`` count as zero."""
    fa, fb = a.flat(), b.flat()
    scale = np.maximum(np.abs(fa), np.abs(fb))
    diff = np.abs(fa - fb)
    rel = np.where(scale > floor, diff / np.where(scale > floor, scale, 1.0), 0.0)
    return float(rel.max(initial=0.0))


def truncation_constants(gamma: float, T: int, shape: Shape, target_bound: float = 1.0):
    """``(C0, C1)`` of the tail bound ``C1 * gamma**(K/2)`` on the gradient error.

    ``target_bound`` bounds ``|x|``; with targets in [-1, 1] prediction
    errors are at most 2 in each component.
    """
    if not 0.0 <= gamma < 1.0:
        raise HyperparameterError(f"gamma must lie in [0, 1), got {gamma}")
    r = math.sqrt(gamma)
    C0 = (1.0 + target_bound) * T * r / (1.0 - r)
    C1 = math.sqrt(shape.n_params) * C0
    return C0, C1


def truncation_horizon(epsilon0: float, hp: Hyperparams, shape: Shape,
                       target_bound: float = 1.0) -> TruncationReport:
    """Smallest ``K >= 1`` whose tail bound falls below ``epsilon0``.

    Only ``hp.gamma`` and ``hp.T`` are read.
    """
    if epsilon0 <= 0:
        raise ValueError("epsilon0 must be positive")
    gamma = hp.gamma
    C0, C1 = truncation_constants(gamma, hp.T, shape, target_bound)
    if gamma == 0.0:
        return TruncationReport(1, 0.0, C0, C1)
    K = 1
    if C1 * gamma ** 0.5 >= epsilon0:
        K = max(1, int(math.floor(2.0 * math.log(epsilon0 / C1) / math.log(gamma))))
    while C1 * gamma ** (K / 2.0) >= epsilon0:
        K += 1
    while K > 1 and C1 * gamma ** ((K - 1) / 2.0) < epsilon0:
        K -= 1
    return TruncationReport(K, C1 * gamma ** (K / 2.0), C0, C1)
