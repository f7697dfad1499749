"""Policy-iteration training loop, line search, replay evaluation and a one-step baseline.

Each iteration evaluates the current weights on their own teacher-forced
state sequence, then improves them by a gradient step on the cost of
pushing those states once with candidate weights and thereafter with the
current ones.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cost import Hyperparams, discounted_cost
from .errors import NumericError
from .gradient import Gradient, grad
from .net import TANH, Shape, SquashFn, Weights, apply_S, rollout, series_values, step

log = logging.getLogger(__name__)

MAX_ITER = "max_iter"
GRADIENT_BELOW_TOL = "gradient_below_tol"
LINE_SEARCH_FAILED = "line_search_failed"


@dataclass(frozen=True)
class StepPolicy:
    kind: str = "backtracking"
    alpha: float = 0.1
    shrink: float = 0.5
    max_halvings: int = 40

    def __post_init__(self):
        if self.kind not in ("fixed", "backtracking"):
            raise ValueError(f"unknown step policy {self.kind!r}")
        if not self.alpha > 0:
            raise ValueError("step size must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be non-negative")

    @classmethod
    def fixed(cls, alpha):
        return cls("fixed", alpha)

    @classmethod
    def backtracking(cls, alpha_init, shrink=0.5, max_halvings=40):
        return cls("backtracking", alpha_init, shrink, max_halvings)


@dataclass(frozen=True)
class StateUpdate:
    """How the state sequence follows the weights: full rollout, or ``j`` sweeps of the S operator."""

    kind: str = "rollout"
    j: int = 1

    def __post_init__(self):
        if self.kind not in ("rollout", "smooth"):
            raise ValueError(f"unknown state update {self.kind!r}")
        if self.j < 1:
            raise ValueError("smooth sweeps must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "StateUpdate":
        if text == "rollout":
            return cls()
        kind, _, j = text.partition(":")
        if kind != "smooth" or not j:
            raise ValueError(f"state update must be 'rollout' or 'smooth:J', got {text!r}")
        return cls("smooth", int(j))

    def __str__(self):
        return "rollout" if self.kind == "rollout" else f"smooth:{self.j}"


@dataclass(frozen=True)
class TrainConfig:
    hp: Hyperparams
    max_iter: int = 1000
    step_policy: StepPolicy = field(default_factory=StepPolicy)
    clip_enabled: bool = True
    state_update: StateUpdate = field(default_factory=StateUpdate)
    seed: int = 0
    stop_tol: float = 1e-8
    squash: SquashFn = TANH

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def as_dict(self):
        return {
            "gamma": self.hp.gamma, "K": self.hp.K, "T": self.hp.T,
            "max_iter": self.max_iter,
            "step_policy": self.step_policy.kind, "alpha": self.step_policy.alpha,
            "shrink": self.step_policy.shrink, "max_halvings": self.step_policy.max_halvings,
            "clip_enabled": self.clip_enabled, "state_update": str(self.state_update),
            "seed": self.seed, "stop_tol": self.stop_tol, "squash": self.squash.name,
        }


@dataclass(frozen=True)
class TraceRow:
    iter: int
    objective: float
    grad_norm: float
    alpha: float
    f_norm_inf: float
    ms: float = 0.0


@dataclass
class TrainTrace:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


@dataclass(frozen=True)
class TrainResult:
    weights: Weights
    objective: float
    reason: str
    iterations: int


@dataclass(frozen=True)
class LineSearchResult:
    alpha: float
    weights: Weights
    objective: float
    states: np.ndarray


def clip_recurrent(F, gamma: float) -> np.ndarray:
    """Rescale rows of ``F`` whose absolute sum exceeds ``1/sqrt(gamma)``.

    An admissible ``F`` is returned as is.
    """
    if gamma <= 0.0:
        return F
    limit = 1.0 / math.sqrt(gamma)
    F = np.asarray(F)
    rows = np.sum(np.abs(F), axis=1)
    if rows.max(initial=0.0) <= limit:
        return F
    out = np.array(F, dtype=np.float64)
    bad = rows > limit
    out[bad] *= (limit / rows[bad])[:, None]
    return out


def objective(w: Weights, x, hp: Hyperparams, sq: SquashFn = TANH):
    """Discounted cost of ``w`` on its own rollout; returns ``(J, U)``."""
    U = rollout(w, x, hp.T, sq)
    return discounted_cost(w, U, x, hp, sq).total, U


def _candidate(w: Weights, d: Gradient, alpha: float, cfg: TrainConfig) -> Weights:
    with np.errstate(over="ignore", invalid="ignore"):
        F = w.F - alpha * d.dF
        G = w.G - alpha * d.dG
    if not (np.all(np.isfinite(F)) and np.all(np.isfinite(G))):
        raise NumericError(f"step alpha={alpha:g} produced non-finite weights")
    if cfg.clip_enabled:
        F = clip_recurrent(F, cfg.hp.gamma)
    return Weights(F, G)


def _backtrack(w, d, f0, evaluate, cfg: TrainConfig) -> Optional[LineSearchResult]:
    if d.norm() == 0.0:
        return None
    sp = cfg.step_policy
    alpha = sp.alpha
    for _ in range(sp.max_halvings + 1):
        try:
            cand = _candidate(w, d, alpha, cfg)
        except NumericError:
            cand = None
        if cand is not None:
            f, U = evaluate(cand)
            if f < f0:
                return LineSearchResult(alpha, cand, f, U)
        alpha *= sp.shrink
    return None


def line_search(w: Weights, d: Gradient, x, cfg: TrainConfig, f0=None) -> Optional[LineSearchResult]:
    """Largest ``alpha_init * shrink**j`` whose re-rolled cost beats the current one.

    Candidates are clipped before evaluation when clipping is enabled.
    Returns None when no tested step decreases the cost.
    """
    def evaluate(v):
        return objective(v, x, cfg.hp, cfg.squash)

    if f0 is None:
        f0 = evaluate(w)[0]
    return _backtrack(w, d, f0, evaluate, cfg)


def initial_weights(shape: Shape, seed: int) -> Weights:
    return Weights.random(shape, np.random.default_rng(seed))


def _descend(w: Weights, evaluate: Callable, direction: Callable, cfg: TrainConfig):
    trace = TrainTrace()
    f, U = evaluate(w)
    reason = MAX_ITER
    for i in range(cfg.max_iter + 1):
        t0 = time.perf_counter()
        if not math.isfinite(f):
            raise NumericError("non-finite objective", iteration=i)
        try:
            g = direction(w, U)
        except NumericError as exc:
            raise NumericError(str(exc), iteration=i) from exc
        gn = g.norm()
        fn = w.f_norm_inf()
        if gn < cfg.stop_tol:
            reason = GRADIENT_BELOW_TOL
        elif i == cfg.max_iter:
            reason = MAX_ITER
        else:
            if cfg.step_policy.kind == "fixed":
                alpha = cfg.step_policy.alpha
                try:
                    w_next = _candidate(w, g, alpha, cfg)
                except NumericError as exc:
                    raise NumericError(str(exc), iteration=i) from exc
                f_next, U_next = evaluate(w_next)
            else:
                res = _backtrack(w, g, f, evaluate, cfg)
                if res is None:
                    reason = LINE_SEARCH_FAILED
                    trace.rows.append(TraceRow(i, f, gn, 0.0, fn, (time.perf_counter() - t0) * 1e3))
                    break
                alpha, w_next, f_next, U_next = res.alpha, res.weights, res.objective, res.states
            trace.rows.append(TraceRow(i, f, gn, alpha, fn, (time.perf_counter() - t0) * 1e3))
            log.debug("iter %d objective %.6g |grad| %.3g alpha %.3g", i, f, gn, alpha)
            w, f, U = w_next, f_next, U_next
            continue
        trace.rows.append(TraceRow(i, f, gn, 0.0, fn, (time.perf_counter() - t0) * 1e3))
        break
    return TrainResult(w, f, reason, len(trace.rows) - 1), trace


def piranha_train(x, shape: Shape, cfg: TrainConfig, w0: Optional[Weights] = None):
    """Train weights to replay ``x``; returns ``(TrainResult, TrainTrace)``.

    Trace row ``i`` holds the cost of the weights entering iteration ``i``
    and the step taken from them; the final row describes the returned
    weights and carries ``alpha = 0``.
    """
    hp = cfg.hp.require_trainable()
    sq = cfg.squash.check()
    xv = series_values(x, hp.series_length)
    if xv.shape[1] != shape.m:
        raise ValueError(f"series has {xv.shape[1]} channels, shape expects m={shape.m}")
    w = initial_weights(shape, cfg.seed) if w0 is None else w0
    su = cfg.state_update
    smooth_states = [np.zeros((hp.T + 1, shape.n))]

    def evaluate(v):
        return objective(v, xv, hp, sq)

    def direction(v, U_roll):
        if su.kind == "rollout":
            U = U_roll
        else:
            U = smooth_states[0]
            for _ in range(su.j):
                U = apply_S(v, U, xv, sq)
            smooth_states[0] = U
        return grad(v, U, xv, hp, sq)

    return _descend(w, evaluate, direction, cfg)


def replay(w: Weights, x, t_switch: int, T: int, sq: SquashFn = TANH) -> np.ndarray:
    """Visible outputs ``x_hat[0..T]`` with teacher input up to ``t_switch``, then free run."""
    if not 1 <= t_switch < T:
        raise ValueError(f"t_switch must satisfy 1 <= t_switch < T={T}, got {t_switch}")
    xv = series_values(x, T + 1)
    m = w.m
    preds = np.zeros((T + 1, m))
    u = np.zeros(w.n)
    for t in range(T):
        v = xv[t] if t <= t_switch else preds[t]
        u = step(w, u, v, sq)
        preds[t + 1] = u[:m]
    return preds


def replay_error(w: Weights, x, t_switch: int, T: int, sq: SquashFn = TANH) -> float:
    """Squared replay error summed over ``t_switch .. T``."""
    preds = replay(w, x, t_switch, T, sq)
    d = preds[t_switch:] - series_values(x)[t_switch:T + 1]
    return float(np.sum(d * d))


def onestep_objective(w: Weights, x, T: int, sq: SquashFn = TANH):
    """Teacher-forced one-step prediction error; returns ``(value, U)``."""
    xv = series_values(x, T + 1)
    U = rollout(w, xv, T, sq)
    d = U[1:, :w.m] - xv[1:T + 1]
    return float(np.sum(d * d)), U


def onestep_grad(w: Weights, x, T: int, sq: SquashFn = TANH) -> Gradient:
    """Backpropagation through time of :func:`onestep_objective`."""
    xv = series_values(x, T + 1)
    m = w.m
    F, Gx, gb = w.F, w.G[:, :-1], w.G[:, -1]
    U = np.zeros((T + 1, w.n))
    pre = np.zeros((T, w.n))
    for t in range(T):
        pre[t] = F @ U[t] + Gx @ xv[t] + gb
        U[t + 1] = sq.value(pre[t])
    dF = np.zeros_like(F)
    dG = np.zeros_like(w.G)
    du = np.zeros(w.n)
    for t in range(T - 1, -1, -1):
        du[:m] += 2.0 * (U[t + 1, :m] - xv[t + 1])
        da = du * sq.derivative(pre[t])
        dF += np.outer(da, U[t])
        dG[:, :-1] += np.outer(da, xv[t])
        dG[:, -1] += da
        du = F.T @ da
    if not (np.all(np.isfinite(dF)) and np.all(np.isfinite(dG))):
        raise NumericError("non-finite gradient")
    return Gradient(dF, dG)


def baseline_onestep_train(x, shape: Shape, cfg: TrainConfig, w0: Optional[Weights] = None):
    """Gradient descent on the teacher-forced one-step error, same loop and trace as PIRANHA."""
    T = cfg.hp.T
    sq = cfg.squash
    xv = series_values(x, T + 1)
    if xv.shape[1] != shape.m:
        raise ValueError(f"series has {xv.shape[1]} channels, shape expects m={shape.m}")
    w = initial_weights(shape, cfg.seed) if w0 is None else w0

    def evaluate(v):
        return onestep_objective(v, xv, T, sq)

    def direction(v, _U):
        return onestep_grad(v, xv, T, sq)

    return _descend(w, evaluate, direction, cfg)
