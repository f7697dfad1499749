import math

import numpy as np
import pytest

from oracles import random_instance
from piranha import (
    HyperparameterError, Hyperparams, Shape, Weights, fd_grad, grad, improvement_objective, rollout,
    step, truncation_horizon,
)
from piranha.gradient import max_relative_error, truncation_constants


def test_zero_gradient_at_zero():
    w = Weights.zeros(Shape(1, 3))
    g = grad(w, np.zeros((5, 3)), np.zeros((9, 1)), Hyperparams(0.5, 4, 4))
    assert g.norm() == 0.0
    assert fd_grad(w, np.zeros((5, 3)), np.zeros((9, 1)), Hyperparams(0.5, 4, 4)).norm() == 0.0


def test_single_term_objective_by_hand(rng):
    # n=2, m=1, T=1, K=1: f = c(U) + gamma * (tanh(a_0) - x_1)^2 with a = F u_0 + G [x_0; 1]
    w = Weights.random(Shape(1, 2), rng, scale=0.7)
    U = np.array([[0.3, -0.6], [0.0, 0.0]])
    x = np.array([[0.25], [-0.4]])
    gamma = 0.6
    hp = Hyperparams(gamma, 1, 1)
    a0 = w.F[0] @ U[0] + w.G[0, 0] * x[0, 0] + w.G[0, 1]
    e = math.tanh(a0) - x[1, 0]
    coef = 2.0 * gamma * e * (1.0 - math.tanh(a0) ** 2)
    dF = np.zeros((2, 2))
    dF[0] = coef * U[0]
    dG = np.zeros((2, 2))
    dG[0] = [coef * x[0, 0], coef]
    g = grad(w, U, x, hp)
    assert np.allclose(g.dF, dF, rtol=1e-13, atol=1e-15)
    assert np.allclose(g.dG, dG, rtol=1e-13, atol=1e-15)
    for h in (1e-3, 1e-4):
        fd = fd_grad(w, U, x, hp, h)
        # central differences are second order
        assert np.max(np.abs(fd.flat() - g.flat())) < 5.0 * h * h
    fd = fd_grad(w, U, x, hp, 1e-5)
    assert max_relative_error(g, fd) <= 1e-5


@pytest.mark.parametrize("seed", range(8))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    gamma = float(rng.uniform(0.1, 0.7))
    K = int(rng.integers(1, 9))
    T = int(rng.integers(1, 11))
    w, U, x = random_instance(rng, T=T, K=K, gamma=gamma)
    hp = Hyperparams(gamma, K, T)
    assert max_relative_error(grad(w, U, x, hp), fd_grad(w, U, x, hp, 1e-5)) <= 1e-5


def test_gradient_on_non_rollout_states(rng):
    w, U, x = random_instance(rng, T=6, K=4)
    U = rng.uniform(-1, 1, U.shape)
    hp = Hyperparams(0.5, 4, 6)
    assert max_relative_error(grad(w, U, x, hp), fd_grad(w, U, x, hp)) <= 1e-5


def test_gradient_vanishes_at_perfect_replay(rng):
    w = Weights.random(Shape(1, 4), rng, scale=0.9)
    T, K = 8, 5
    u = np.zeros(4)
    xs = [u[:1].copy()]
    for _ in range(T + K - 1):
        u = step(w, u, u[:1])
        xs.append(u[:1].copy())
    x = np.array(xs)
    U = rollout(w, x, T)
    hp = Hyperparams(0.6, K, T)
    assert improvement_objective(w, w, U, x, hp) < 1e-28
    assert grad(w, U, x, hp).norm() < 1e-13


def test_gradient_is_descent_direction(rng):
    checked = 0
    for _ in range(5):
        w, U, x = random_instance(rng, T=10, K=6)
        hp = Hyperparams(0.5, 6, 10)
        g, fd = grad(w, U, x, hp), fd_grad(w, U, x, hp)
        eps0 = truncation_horizon(1.0, hp, w.shape).bound
        if g.norm() > eps0:
            assert g.dot(fd) > 0.0
            checked += 1
    assert checked > 0


def test_truncation_bound_loose_threshold():
    hp = Hyperparams(0.5, 1, 3)
    shape = Shape(1, 2)
    _, C1 = truncation_constants(0.5, 3, shape)
    assert truncation_horizon(C1, hp, shape).K == 1
    assert truncation_horizon(10 * C1, hp, shape).K == 1


def test_truncation_worked_example():
    rep = truncation_horizon(1.0, Hyperparams(0.25, 1, 1), Shape(1, 2))
    assert rep.C0 == pytest.approx(2.0, rel=1e-15)
    assert rep.C1 == pytest.approx(math.sqrt(8.0) * 2.0, rel=1e-15)
    # smallest K with 5.657 * 0.5**K < 1
    assert rep.K == 3
    assert rep.bound == pytest.approx(rep.C1 * 0.25 ** 1.5, rel=1e-15)
    assert rep.bound < 1.0 <= rep.C1 * 0.25 ** 1.0


@pytest.mark.parametrize("gamma", [0.1, 0.5, 0.9, 0.99])
@pytest.mark.parametrize("eps0", [1e-6, 1e-2, 1.0, 30.0])
def test_truncation_horizon_is_minimal(gamma, eps0):
    hp = Hyperparams(gamma, 1, 7)
    shape = Shape(2, 5)
    rep = truncation_horizon(eps0, hp, shape)
    assert rep.bound == pytest.approx(rep.C1 * gamma ** (rep.K / 2), rel=1e-15)
    assert rep.bound < eps0
    if rep.K > 1:
        assert rep.C1 * gamma ** ((rep.K - 1) / 2) >= eps0
    half = truncation_horizon(eps0 / 2, hp, shape)
    assert 0 <= half.K - rep.K <= math.ceil(2 * math.log(2) / -math.log(gamma))


def test_truncation_gamma_zero_and_invalid():
    rep = truncation_horizon(1e-3, Hyperparams(0.0, 1, 4), Shape(1, 2))
    assert rep.K == 1 and rep.bound == 0.0
    with pytest.raises(HyperparameterError):
        truncation_constants(1.0, 4, Shape(1, 2))


def test_truncation_bound_holds_empirically(rng):
    for _ in range(10):
        w, U, x = random_instance(rng, T=10, K=4, gamma=0.6, extra=4)
        rep = truncation_horizon(1.0, Hyperparams(0.6, 1, 10), w.shape)
        gK = grad(w, U, x, Hyperparams(0.6, 4, 10))
        g2K = grad(w, U, x, Hyperparams(0.6, 8, 10))
        assert (gK - g2K).norm() <= rep.C1 * 0.6 ** 2
