"""Recurrent network dynamics and the state-sequence operators built on them.

States are rows of float64 arrays.  A state sequence ``U`` has shape
``(T + 1, n)`` with ``U[0]`` the initial state; a series ``x`` has shape
``(L, m)`` (or is a :class:`piranha.data.Series`).  The visible output of a
state is its first ``m`` components, so there is no output weight matrix.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SeriesRangeError, ShapeError


@dataclass(frozen=True)
class Shape:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ShapeError(f"dimensions must be positive, got m={self.m}, n={self.n}")
        if self.n <= self.m:
            raise ShapeError(f"need more hidden than visible units, got n={self.n} <= m={self.m}")

    @property
    def n_params(self) -> int:
        return self.n * (self.n + self.m + 1)


@dataclass(frozen=True)
class SquashFn:
    """Componentwise activation together with its derivative.

    ``max_slope`` is the supremum of the derivative; the truncation bound
    for the gradient only holds when it is at most 1.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    max_slope: float = 1.0

    def check(self):
        if self.max_slope > 1.0:
            warnings.warn(
                f"squashing function {self.name!r} has slope up to {self.max_slope}; "
                "the gradient truncation bound assumes slope <= 1",
                stacklevel=2,
            )
        return self


def _dtanh(z):
    c = np.cosh(z)
    return 1.0 / (c * c)


TANH = SquashFn("tanh", np.tanh, _dtanh, 1.0)


def scaled_tanh(beta: float) -> SquashFn:
    """``tanh(beta * z)``; slopes above 1 are allowed but flagged by ``check``."""
    return SquashFn(
        f"tanh[{beta:g}]",
        lambda z: np.tanh(beta * z),
        lambda z: beta * _dtanh(beta * z),
        float(beta),
    )


class Weights:
    """Recurrent matrix ``F`` (n x n) and input matrix ``G`` (n x (m+1)).

    The last column of ``G`` multiplies a constant 1 and acts as the bias.
    Both arrays are stored read-only.
    """

    __slots__ = ("F", "G")

    def __init__(self, F, G):
        F = np.array(F, dtype=np.float64)
        G = np.array(G, dtype=np.float64)
        if F.ndim != 2 or F.shape[0] != F.shape[1]:
            raise ShapeError(f"F must be square, got shape {F.shape}")
        n = F.shape[0]
        if G.ndim != 2 or G.shape[0] != n or G.shape[1] < 2:
            raise ShapeError(f"G must have shape ({n}, m+1) with m >= 1, got {G.shape}")
        Shape(G.shape[1] - 1, n)
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(G))):
            raise ValueError("weights must be finite")
        F.flags.writeable = False
        G.flags.writeable = False
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)

    def __setattr__(self, name, value):
        raise AttributeError("Weights are immutable")

    @classmethod
    def zeros(cls, shape: Shape) -> "Weights":
        return cls(np.zeros((shape.n, shape.n)), np.zeros((shape.n, shape.m + 1)))

    @classmethod
    def random(cls, shape: Shape, rng: np.random.Generator, scale=None) -> "Weights":
        """Uniform entries in ``[-scale, scale]``; default scale ``0.1 / sqrt(n)``."""
        r = 0.1 / math.sqrt(shape.n) if scale is None else scale
        F = rng.uniform(-r, r, size=(shape.n, shape.n))
        G = rng.uniform(-r, r, size=(shape.n, shape.m + 1))
        return cls(F, G)

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def m(self) -> int:
        return self.G.shape[1] - 1

    @property
    def shape(self) -> Shape:
        return Shape(self.m, self.n)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.F.ravel(), self.G.ravel()])

    @classmethod
    def from_flat(cls, vec, shape: Shape) -> "Weights":
        vec = np.asarray(vec, dtype=np.float64)
        k = shape.n * shape.n
        if vec.shape != (shape.n_params,):
            raise ShapeError(f"expected {shape.n_params} parameters, got {vec.shape}")
        return cls(vec[:k].reshape(shape.n, shape.n), vec[k:].reshape(shape.n, shape.m + 1))

    def f_norm_inf(self) -> float:
        """Maximum absolute row sum of ``F``."""
        return float(np.max(np.sum(np.abs(self.F), axis=1)))

    def __eq__(self, other):
        if not isinstance(other, Weights):
            return NotImplemented
        return np.array_equal(self.F, other.F) and np.array_equal(self.G, other.G)

    def __repr__(self):
        return f"Weights(n={self.n}, m={self.m})"


def series_values(x, length=None) -> np.ndarray:
    """Return the ``(L, m)`` value array of ``x``, checking it has ``length`` rows.

    Series objects in ``hold`` pad mode are extended by repeating the last row.
    """
    if hasattr(x, "require"):
        return x.require(length) if length is not None else x.values
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if length is not None and arr.shape[0] < length:
        raise SeriesRangeError(f"series has {arr.shape[0]} samples, need {length}")
    return arr


def _check_state(w: Weights, u):
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (w.n,):
        raise ShapeError(f"state must have shape ({w.n},), got {u.shape}")
    return u


def step(w: Weights, u, v, sq: SquashFn = TANH) -> np.ndarray:
    """One network update: ``sq(F u + G [v; 1])``."""
    u = _check_state(w, u)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (w.m,):
        raise ShapeError(f"input must have shape ({w.m},), got {v.shape}")
    pre = w.F @ u + w.G[:, :-1] @ v + w.G[:, -1]
    return sq.value(pre)


def project(u, m: int) -> np.ndarray:
    """Visible output of a state: its first ``m`` components."""
    u = np.asarray(u, dtype=np.float64)
    Shape(m, u.shape[-1])
    return u[..., :m].copy()


def propagate_k(w_first: Weights, w_rest: Weights, u, t: int, k: int, x, sq: SquashFn = TANH):
    """Push state ``u`` at time ``t`` forward ``k`` steps.

    The first step uses ``w_first`` with the teacher input ``x[t]``; the
    remaining ``k - 1`` steps use ``w_rest`` and feed the network's own
    visible output back as input.  ``k = 0`` returns ``u`` unchanged.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    u = _check_state(w_first, u)
    if k == 0:
        return u.copy()
    if w_rest.shape != w_first.shape:
        raise ShapeError("w_first and w_rest must share a shape")
    if t < 0:
        raise SeriesRangeError(f"time index must be non-negative, got {t}")
    # the last state is compared against x[t + k]
    xv = series_values(x, t + k + 1)
    m = w_first.m
    h = step(w_first, u, xv[t], sq)
    for _ in range(k - 1):
        h = step(w_rest, h, h[:m], sq)
    return h


def _check_seq(w: Weights, U, T=None):
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[1] != w.n:
        raise ShapeError(f"state sequence must have shape (T+1, {w.n}), got {U.shape}")
    if T is not None and U.shape[0] != T + 1:
        raise ShapeError(f"state sequence must have length {T + 1}, got {U.shape[0]}")
    return U


def apply_S(w: Weights, U, x, sq: SquashFn = TANH) -> np.ndarray:
    """Advance every state of ``U`` by one teacher-forced step.

    Returns ``(0, sq(F u_0 + G[x_0;1]), ..., sq(F u_{T-1} + G[x_{T-1};1]))``.
    """
    U = _check_seq(w, U)
    T = U.shape[0] - 1
    xv = series_values(x, T)
    if xv.shape[1] != w.m:
        raise ShapeError(f"series has {xv.shape[1]} channels, weights expect {w.m}")
    out = np.zeros_like(U)
    for t in range(T):
        out[t + 1] = step(w, U[t], xv[t], sq)
    return out


def rollout(w: Weights, x, T: int, sq: SquashFn = TANH) -> np.ndarray:
    """Teacher-forced state sequence from the zero state, length ``T + 1``."""
    if T < 0:
        raise ValueError("T must be non-negative")
    xv = series_values(x, T)
    if xv.shape[1] != w.m:
        raise ShapeError(f"series has {xv.shape[1]} channels, weights expect {w.m}")
    U = np.zeros((T + 1, w.n))
    for t in range(T):
        U[t + 1] = step(w, U[t], xv[t], sq)
    return U
