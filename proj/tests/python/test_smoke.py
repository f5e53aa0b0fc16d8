"""End-to-end smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import raviucb as rv


@pytest.fixture(scope="module")
def chain():
    return rv.reference_tabular_mdp()


def test_build_from_arrays():
    reward = np.array([[0.0, 1.0], [0.5, 0.2]])
    transition = [np.array([[0.9, 0.1], [0.2, 0.8]]),
                  np.array([[0.5, 0.5], [1.0, 0.0]])]
    nu0 = np.array([1.0, 0.0])
    mdp = rv.TabularMdp(reward, transition, 0.9, nu0)
    assert mdp.n_states == 2
    assert mdp.n_actions == 2
    assert mdp.horizon == pytest.approx(10.0)


def test_value_iteration_matches_policy_evaluation(chain):
    v_star, q_star = rv.value_iteration(chain, tol=1e-10)
    greedy = rv.greedy_policy(q_star)
    v_greedy = rv.policy_evaluation(chain, greedy)
    assert np.max(np.abs(v_star - v_greedy)) < 1e-8


def test_occupancy_flow_and_return_identity(chain):
    pi = np.full((5, 2), 0.5)
    mu = rv.occupancy_measure(chain, pi)
    assert rv.flow_residual(chain, mu) <= 1e-10
    ret = rv.normalized_return(chain, pi)
    v = rv.policy_evaluation(chain, pi)
    nu0 = np.full(5, 0.2)
    assert ret == pytest.approx((1 - chain.gamma) * float(nu0 @ v), abs=1e-9)


def test_run_is_deterministic(chain):
    a = rv.run_ravi_ucb_tabular(chain, 500, seed=42)
    b = rv.run_ravi_ucb_tabular(chain, 500, seed=42)
    assert a.states() == b.states()
    assert a.actions() == b.actions()
    assert a.n_epochs == b.n_epochs


def test_run_log_surface(chain):
    log = rv.run_ravi_ucb_tabular(chain, 300, seed=1, beta=1.25)
    assert log.T == 300
    assert log.n_epochs >= 1
    assert sum(log.epoch_length(k) for k in range(1, log.n_epochs + 1)) == 300
    pi = log.epoch_policy(log.n_epochs)
    assert np.allclose(pi.sum(axis=1), 1.0)
    v = log.epoch_value(1)
    assert np.all(v >= 0.0) and np.all(v <= chain.horizon + 1e-12)


def test_online_to_batch_and_regret(chain):
    log = rv.run_ravi_ucb_tabular(chain, 400, seed=3, beta=1.25)
    pi = rv.online_to_batch_select(log, 7)
    assert np.allclose(pi.sum(axis=1), 1.0)
    regret = rv.cumulative_regret(chain, log)
    assert regret >= -1e-8


def test_checks_pass_on_a_short_run(chain):
    log = rv.run_ravi_ucb_tabular(chain, 400, seed=5)
    assert rv.check_validity(log, chain)["pass"]
    assert rv.check_sandwich(log, chain)["pass"]
    assert rv.check_md_identity(log, 500, 11)["pass"]


def test_linmix_backend_and_design_caps():
    env = rv.reference_mixture_mdp()
    assert env.d == 3
    assert env.B == pytest.approx(math.sqrt(3.0))
    log = rv.run_ravi_ucb_linmix(env, 600, seed=2)
    assert rv.check_elliptical(log, env)["pass"]
    assert rv.check_bad_epochs(log, env)["pass"]


def test_coefficient_formulas():
    assert rv.default_learning_rate(4, 10.0, 10000) == pytest.approx(1.6651092223153955e-3)
    assert rv.tabular_beta(2, 2, 100, 0.01, 10.0) == pytest.approx(368.2891860802184)
    assert rv.linmix_beta(3, 10000, 1.0, 10.0, 1.0, 1e-4) == pytest.approx(76.21395120044376)


def test_json_round_trip(chain):
    text = chain.to_json()
    back = rv.TabularMdp.from_json(text)
    assert back.n_states == chain.n_states
    assert np.allclose(back.reward, chain.reward)
