"""Policy-iteration training of recurrent networks for sequence replay."""

__version__ = "0.1.0"

from .cost import CostBreakdown, Hyperparams, discounted_cost, immediate_cost, improvement_objective
from .data import Series, gen_series, load_series, load_weights, read_trace, save_weights, write_trace
from .errors import (
    DataError, FormatError, HyperparameterError, NumericError, PiranhaError, SeriesRangeError,
    ShapeError,
)
from .gradient import Gradient, TruncationReport, fd_grad, grad, truncation_horizon
from .net import TANH, Shape, SquashFn, Weights, apply_S, project, propagate_k, rollout, step
from .optimizer import (
    StateUpdate, StepPolicy, TrainConfig, TrainResult, TrainTrace, baseline_onestep_train,
    clip_recurrent, line_search, piranha_train, replay_error,
)
