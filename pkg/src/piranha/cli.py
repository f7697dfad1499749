"""Command-line driver.

Exit codes: 0 success, 1 check failed, 2 usage, 3 data, 4 numeric.
Summaries are printed as ``key=value`` lines.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cost import Hyperparams
from .data import (
    gen_series, load_series, load_weights, parse_kind, save_series, save_weights,
    write_json, write_trace,
)
from .errors import DataError, FormatError, HyperparameterError, NumericError, SeriesRangeError, ShapeError
from .gradient import fd_grad, grad, max_relative_error, truncation_horizon
from .net import Shape, Weights, rollout
from .optimizer import (
    StateUpdate, StepPolicy, TrainConfig, baseline_onestep_train, initial_weights,
    piranha_train, replay, replay_error,
)

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4
GRADCHECK_TOL = 1e-5


class UsageError(Exception):
    pass


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _emit(**kv):
    for k, v in kv.items():
        print(f"{k}={v}")


def _add_train_flags(p):
    p.add_argument("--data", required=True, help="comma-separated series file")
    p.add_argument("--m", type=int, default=None, help="channels (default: from file)")
    p.add_argument("--n", type=int, required=True, help="hidden units")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--K", type=int, default=None, help="truncation horizon")
    p.add_argument("--eps0", type=float, default=None, help="derive K from this gradient-error bound")
    p.add_argument("--T", type=int, required=True, help="sequence length")
    p.add_argument("--alpha", type=float, default=1.0, help="(initial) step size")
    p.add_argument("--shrink", type=float, default=0.5)
    p.add_argument("--max-halvings", type=int, default=40)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--stop-tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=("random", "zeros"), default="random", help="initial weights")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--fixed-step", dest="fixed", action="store_true")
    g.add_argument("--backtrack", dest="fixed", action="store_false")
    p.set_defaults(fixed=False)
    p.add_argument("--no-clip", action="store_true")
    p.add_argument("--state-update", default="rollout", help="rollout | smooth:J")
    p.add_argument("--pad", choices=("none", "hold"), default="none")
    p.add_argument("--timing", action="store_true", help="write wall-clock ms into traces")
    p.add_argument("--out", required=True, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="piranha", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic series")
    p.add_argument("--kind", default="sine", help="e.g. sine:freq=0.02,phase=0 | square:freq=0.05 | "
                   "sum_of_sines:components=0.02/0/0.5;0.05/0/0.3")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    _add_train_flags(sub.add_parser("train", help="train with policy iteration"))
    _add_train_flags(sub.add_parser("compare", help="train and the one-step baseline side by side"))

    p = sub.add_parser("replay", help="teacher-forced prefix, then free run")
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--t-switch", type=int, required=True)
    p.add_argument("--T", type=int, default=None, help="default: last sample index")
    p.add_argument("--out", default=None, help="prediction CSV (default: replay.csv beside weights)")

    p = sub.add_parser("gradcheck", help="analytic gradient against finite differences")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--T", type=int, default=10)
    p.add_argument("--K", type=int, default=6)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--weight-scale", type=float, default=0.5, help="uniform weight range")

    p = sub.add_parser("bound", help="truncation horizon for a gradient-error bound")
    p.add_argument("--eps0", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    return parser


def _train_config(a, m):
    if a.gamma == 0.0:
        raise UsageError("gamma=0: the improvement objective has zero gradient for every weight "
                         "(all weight-dependent terms carry gamma**k, k>=1); use gamma > 0")
    if not 0.0 < a.gamma < 1.0:
        raise UsageError(f"--gamma must lie in (0, 1), got {a.gamma}")
    shape = Shape(m, a.n)
    if a.K is None and a.eps0 is None:
        raise UsageError("one of --K or --eps0 is required")
    K = a.K
    if a.eps0 is not None:
        if a.eps0 <= 0:
            raise UsageError("--eps0 must be positive")
        if K is not None:
            _warn("both --K and --eps0 given; using --K")
        else:
            K = truncation_horizon(a.eps0, Hyperparams(a.gamma, 1, a.T), shape).K
    hp = Hyperparams(a.gamma, K, a.T)
    if a.fixed:
        sp = StepPolicy.fixed(a.alpha)
    else:
        sp = StepPolicy.backtracking(a.alpha, a.shrink, a.max_halvings)
    return shape, TrainConfig(
        hp=hp, max_iter=a.max_iter, step_policy=sp, clip_enabled=not a.no_clip,
        state_update=StateUpdate.parse(a.state_update), seed=a.seed, stop_tol=a.stop_tol,
    )


def cmd_gen_data(a):
    kind, params = parse_kind(a.kind)
    try:
        s = gen_series(kind, a.L, a.m, a.seed, **params)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save_series(s, a.out)
    _emit(path=a.out, L=a.L, m=a.m)
    return EXIT_OK


def _validate_train(a):
    # flags first, data second
    m = a.m if a.m is not None else 1
    _train_config(a, m)
    x = load_series(a.data, a.m, pad_mode=a.pad)
    shape, cfg = _train_config(a, x.m)
    x.require(cfg.hp.series_length)
    return x, shape, cfg


def _initial(a, shape, cfg):
    return Weights.zeros(shape) if a.init == "zeros" else initial_weights(shape, cfg.seed)


def cmd_train(a):
    x, shape, cfg = _validate_train(a)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    res, trace = piranha_train(x, shape, cfg, _initial(a, shape, cfg))
    save_weights(res.weights, out / "weights.txt")
    write_trace(trace, out / "trace.csv", timing=a.timing)
    write_json({**cfg.as_dict(), "n": shape.n, "m": shape.m, "data": str(a.data), "pad": a.pad,
                "init": a.init,
                "norm_scale": x.scale.tolist(), "norm_offset": x.offset.tolist()},
               out / "config.json")
    _emit(final_objective=repr(res.objective), initial_objective=repr(trace.rows[0].objective),
          reason=res.reason, iterations=res.iterations, K=cfg.hp.K, out=str(out))
    return EXIT_OK


def cmd_compare(a):
    x, shape, cfg = _validate_train(a)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    T = cfg.hp.T
    t_switch = max(1, T // 2)
    w0 = _initial(a, shape, cfg)
    pir, pir_trace = piranha_train(x, shape, cfg, w0)
    base, base_trace = baseline_onestep_train(x, shape, cfg, w0)
    save_weights(pir.weights, out / "piranha_weights.txt")
    save_weights(base.weights, out / "baseline_weights.txt")
    write_trace(pir_trace, out / "piranha_trace.csv", timing=a.timing)
    write_trace(base_trace, out / "baseline_trace.csv", timing=a.timing)
    summary = {
        "t_switch": t_switch,
        "initial_replay_error": replay_error(w0, x, t_switch, T),
        "piranha_replay_error": replay_error(pir.weights, x, t_switch, T),
        "baseline_replay_error": replay_error(base.weights, x, t_switch, T),
        "piranha_final_objective": pir.objective,
        "baseline_final_objective": base.objective,
        "piranha_reason": pir.reason,
        "baseline_reason": base.reason,
    }
    lines = [f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in summary.items()]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_replay(a):
    try:
        w = load_weights(a.weights)
    except ShapeError as exc:
        raise FormatError(f"{a.weights}: {exc}") from None
    x = load_series(a.data, w.m)
    T = len(x) - 1 if a.T is None else a.T
    if not 1 <= a.t_switch < T:
        raise UsageError(f"--t-switch must satisfy 1 <= t_switch < T={T}")
    x.require(T + 1)
    preds = replay(w, x, a.t_switch, T)
    err = replay_error(w, x, a.t_switch, T)
    out = Path(a.out) if a.out else Path(a.weights).with_name("replay.csv")
    raw_pred = x.denormalize(preds)
    raw_tgt = x.denormalize(x.values[:T + 1])
    with open(out, "w") as fh:
        fh.write(",".join(["t"] + [f"target{c}" for c in range(w.m)] + [f"pred{c}" for c in range(w.m)])
                 + "\n")
        for t in range(T + 1):
            fh.write(",".join([str(t)] + [repr(float(v)) for v in raw_tgt[t]]
                              + [repr(float(v)) for v in raw_pred[t]]) + "\n")
    _emit(replay_error=repr(err), t_switch=a.t_switch, T=T, out=str(out))
    return EXIT_OK


def cmd_gradcheck(a):
    if a.h <= 0:
        raise UsageError("--h must be positive")
    hp = Hyperparams(a.gamma, a.K, a.T)
    shape = Shape(a.m, a.n)
    rng = np.random.default_rng(a.seed)
    w = Weights.random(shape, rng, scale=a.weight_scale)
    x = rng.uniform(-1.0, 1.0, size=(hp.series_length, a.m))
    if a.gamma > 0 and w.f_norm_inf() > 1.0 / math.sqrt(a.gamma):
        _warn(f"|F|_inf={w.f_norm_inf():.4g} exceeds 1/sqrt(gamma)={1 / math.sqrt(a.gamma):.4g}; "
              "the truncation bound does not apply")
    U = rollout(w, x, hp.T)
    err = max_relative_error(grad(w, U, x, hp), fd_grad(w, U, x, hp, a.h))
    ok = err <= GRADCHECK_TOL
    _emit(max_rel_error=repr(err), tol=GRADCHECK_TOL, status="pass" if ok else "fail")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_bound(a):
    if not 0.0 <= a.gamma < 1.0:
        raise UsageError(f"--gamma must lie in [0, 1), got {a.gamma}")
    if a.eps0 <= 0:
        raise UsageError("--eps0 must be positive")
    rep = truncation_horizon(a.eps0, Hyperparams(a.gamma, 1, a.T), Shape(a.m, a.n))
    _emit(K=rep.K, bound=repr(rep.bound), C0=repr(rep.C0), C1=repr(rep.C1))
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data, "train": cmd_train, "compare": cmd_compare,
    "replay": cmd_replay, "gradcheck": cmd_gradcheck, "bound": cmd_bound,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[a.command](a)
    except (UsageError, HyperparameterError, ShapeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, SeriesRangeError, FormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
