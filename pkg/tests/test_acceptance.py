"""Acceptance suite. Each test carries a ``criterion`` marker; the run ends with one PASS/FAIL line per criterion."""

import math
import time

import numpy as np
import pytest

from oracles import random_instance
from piranha import (
    Hyperparams, Shape, Weights, apply_S, discounted_cost, fd_grad, gen_series, grad, immediate_cost,
    load_weights, piranha_train, replay_error, rollout, save_weights, write_trace,
)
from piranha.cli import main
from piranha.data import Series
from piranha.gradient import max_relative_error, truncation_constants
from piranha.optimizer import StepPolicy, TrainConfig, initial_weights

GAMMA, K, T = 0.5, 6, 10
N_INSTANCES = 20

BENCH_SHAPE = Shape(1, 8)
BENCH_HP = Hyperparams(0.7, 10, 50)


def instances(extra=0):
    rng = np.random.default_rng(2024)
    for _ in range(N_INSTANCES):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(max(3, m + 1), 7))
        yield random_instance(rng, n=n, m=m, T=T, K=K, gamma=GAMMA, extra=extra)


def bench_config():
    return TrainConfig(BENCH_HP, max_iter=2000, step_policy=StepPolicy.backtracking(1.0), seed=0)


def bench_series():
    return gen_series("sine", BENCH_HP.series_length, freq=1 / 50)


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    x = bench_series()
    start = time.perf_counter()
    res, trace = piranha_train(x, BENCH_SHAPE, bench_config())
    elapsed = time.perf_counter() - start
    path = tmp_path_factory.mktemp("bench") / "trace.csv"
    write_trace(trace, path)
    return x, res, trace, elapsed, path


@pytest.mark.criterion(1, "gradient agrees with central differences on 20 instances, under 5 s")
def test_gradient_oracle_agreement():
    start = time.perf_counter()
    worst = max(max_relative_error(grad(w, U, x, Hyperparams(GAMMA, K, T)),
                                   fd_grad(w, U, x, Hyperparams(GAMMA, K, T), 1e-5))
                for w, U, x in instances())
    elapsed = time.perf_counter() - start
    print(f"worst relative error {worst:.3e}, {elapsed:.2f} s")
    assert worst <= 1e-5
    assert elapsed < 5.0


@pytest.mark.criterion(2, "truncation bound holds between horizons K and 2K")
def test_truncation_bound():
    violations = 0
    for w, U, x in instances(extra=K):
        _, C1 = truncation_constants(GAMMA, T, w.shape)
        gap = (grad(w, U, x, Hyperparams(GAMMA, K, T)) - grad(w, U, x, Hyperparams(GAMMA, 2 * K, T))).norm()
        violations += gap > C1 * GAMMA ** (K / 2)
    assert violations == 0


@pytest.mark.criterion(3, "T+1 applications of S from any state sequence equal the rollout bitwise")
def test_operator_collapse():
    rng = np.random.default_rng(7)
    for w, _, x in instances():
        U = rng.uniform(-1.0, 1.0, (T + 1, w.n))
        for _ in range(T + 1):
            U = apply_S(w, U, x)
        assert np.array_equal(U, rollout(w, x, T))


@pytest.mark.criterion(4, "Bellman recursion on shifted data within 1e-12 (known to fail, see README)")
def test_bellman_recursion():
    worst = 0.0
    for w, U, x in instances():
        SU = apply_S(w, U, x)
        shifted = np.vstack([SU[1:], np.zeros((1, w.n))])
        lhs = discounted_cost(w, U, x, Hyperparams(GAMMA, K, T)).total
        rhs = immediate_cost(U, x) + GAMMA * discounted_cost(w, shifted, x[1:], Hyperparams(GAMMA, K - 1, T)).total
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    print(f"worst relative mismatch {worst:.3e}")
    assert worst <= 1e-12


@pytest.mark.criterion(5, "gamma=0 cost equals the immediate cost and training rejects gamma=0")
def test_gamma_zero(tmp_path):
    rng = np.random.default_rng(5)
    for w, U, x in instances():
        U = rng.uniform(-1.0, 1.0, U.shape)
        assert discounted_cost(w, U, x, Hyperparams(0.0, K, T)).total == immediate_cost(U, x)
    data = tmp_path / "x.csv"
    data.write_text("\n".join(str(v) for v in bench_series().values[:, 0]) + "\n")
    code = main(["train", "--data", str(data), "--n", "8", "--gamma", "0", "--K", "10", "--T", "50",
                 "--out", str(tmp_path / "o")])
    assert code == 2


@pytest.mark.criterion(6, "sine benchmark descends strictly to at most 0.2 of the start, under 60 s")
def test_monotone_descent(bench):
    _, res, trace, elapsed, _ = bench
    obj = trace.column("objective")
    print(f"{len(obj) - 1} steps, ratio {obj[-1] / obj[0]:.4f}, {elapsed:.1f} s, {res.reason}")
    assert np.all(np.diff(obj) < 0)
    assert obj[-1] <= 0.2 * obj[0]
    assert len(obj) - 1 <= 2000
    assert elapsed < 60.0


@pytest.mark.criterion(7, "every benchmark trace row keeps |F|_inf within 1/sqrt(gamma)")
def test_clipping_invariant(bench):
    _, _, trace, _, _ = bench
    assert np.all(trace.column("f_norm_inf") <= 1 / math.sqrt(BENCH_HP.gamma) + 1e-12)


@pytest.mark.criterion(8, "trained weights replay the second half better than the initial weights")
def test_replay_improvement(bench):
    x, res, _, _, _ = bench
    t_switch = BENCH_HP.T // 2
    before = replay_error(initial_weights(BENCH_SHAPE, 0), x, t_switch, BENCH_HP.T)
    after = replay_error(res.weights, x, t_switch, BENCH_HP.T)
    print(f"replay error {before:.4g} -> {after:.4g}")
    assert after < before


@pytest.mark.criterion(9, "repeating the benchmark gives a bitwise identical trace file")
def test_determinism(bench, tmp_path):
    x, _, _, _, first = bench
    _, trace = piranha_train(x, BENCH_SHAPE, bench_config())
    second = tmp_path / "trace.csv"
    write_trace(trace, second)
    assert first.read_bytes() == second.read_bytes()


@pytest.mark.criterion(10, "weights persist bitwise and normalization round-trips to 1e-12")
def test_persistence(tmp_path):
    rng = np.random.default_rng(10)
    for i in range(N_INSTANCES):
        shape = Shape(int(rng.integers(1, 4)), int(rng.integers(4, 9)))
        w = Weights(rng.normal(size=(shape.n, shape.n)) * 10.0 ** rng.integers(-8, 8),
                    rng.normal(size=(shape.n, shape.m + 1)))
        p = tmp_path / f"w{i}.txt"
        save_weights(w, p)
        v = load_weights(p)
        assert v.F.tobytes() == w.F.tobytes() and v.G.tobytes() == w.G.tobytes()
        raw = rng.uniform(-50.0, 300.0, (30, shape.m))
        s = Series.from_raw(raw)
        assert np.max(np.abs(s.denormalize() - raw)) <= 1e-12 * np.max(np.abs(raw))
        assert np.max(np.abs(s.normalize(s.denormalize()) - s.values)) <= 1e-12
