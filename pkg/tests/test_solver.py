import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from conftest import baseline
from retrial_osa.generator import RateMatrix, assemble_generator, extract_blocks
from retrial_osa.metrics import erlang_loss_distribution, level_marginal
from retrial_osa.model import build_state_space
from retrial_osa.solver import (CapacityError, Method, ReducibleChainError, gth, rate_matrices,
                                solve_direct, solve_ldqbd)

HAND_PI = np.array([1 / 6, 1 / 2, 1 / 3])


def pipeline(p):
    space = build_state_space(p)
    Q = assemble_generator(space)
    return space, Q, extract_blocks(Q, space)


def null_space_pi(Q):
    ns = scipy.linalg.null_space(Q.toarray().T)
    assert ns.shape[1] == 1
    v = ns[:, 0]
    return v / v.sum()


def test_hand_balance_equations_hold_for_oracle(hand_params):
    p = hand_params
    a, b, c = HAND_PI
    assert a * (p.lambda_s + p.lambda_p) == pytest.approx(b * p.mu_s + c * p.mu_p, abs=1e-15)
    assert c * p.mu_p == pytest.approx((a + b) * p.lambda_p, abs=1e-15)


def test_hand_case_both_solvers(hand_params):
    _, Q, blocks = pipeline(hand_params)
    for pi in (solve_direct(Q), solve_ldqbd(blocks, Q)):
        np.testing.assert_allclose(pi.probabilities, HAND_PI, rtol=0, atol=1e-12)
        assert pi.residual < 1e-12
    assert solve_direct(Q).method is Method.DIRECT
    assert solve_ldqbd(blocks).method is Method.LDQBD


def test_symmetric_two_state_chain():
    Q = RateMatrix.from_triplets(2, [0, 1], [1, 0], [0.7, 0.7])
    np.testing.assert_allclose(solve_direct(Q).probabilities, [0.5, 0.5], atol=1e-15)


def test_gth_matches_null_space_on_random_generators():
    rng = np.random.default_rng(3)
    for n in (2, 5, 17):
        Q = rng.uniform(0.1, 2.0, (n, n))
        np.fill_diagonal(Q, 0)
        np.fill_diagonal(Q, -Q.sum(axis=1))
        ns = scipy.linalg.null_space(Q.T)[:, 0]
        np.testing.assert_allclose(gth(Q), ns / ns.sum(), atol=1e-13)


@pytest.mark.parametrize("M,N,L", [(2, 2, 10), (3, 3, 10), (2, 3, 4)])
def test_direct_residual_and_null_space_oracle(M, N, L):
    _, Q, _ = pipeline(baseline(M, N, L))
    pi = solve_direct(Q)
    assert pi.residual < 1e-12
    assert abs(pi.probabilities.sum() - 1) < 1e-12 and pi.probabilities.min() >= 0
    np.testing.assert_allclose(pi.probabilities, null_space_pi(Q), atol=1e-12)


def test_cross_method_large_case():
    _, Q, blocks = pipeline(baseline(3, 3, 10))
    diff = np.max(np.abs(solve_direct(Q).probabilities - solve_ldqbd(blocks, Q).probabilities))
    assert diff < 1e-10


@given(M=st.integers(1, 3), N=st.integers(1, 3), L=st.integers(0, 6),
       theta=st.floats(0.05, 8.0), lp=st.floats(0.02, 1.0), ls=st.floats(0.1, 4.0))
def test_solvers_agree_and_rate_matrices_nonnegative(M, N, L, theta, lp, ls):
    p = baseline(M, N, L, theta=theta, lambda_p=lp, lambda_s=ls)
    space, Q, blocks = pipeline(p)
    R = rate_matrices(blocks)
    assert all(np.all(r >= -1e-15) for r in R[1:])
    direct, ldqbd = solve_direct(Q), solve_ldqbd(blocks, Q)
    assert np.max(np.abs(direct.probabilities - ldqbd.probabilities)) < 1e-10
    for pi in (direct, ldqbd):
        assert pi.residual < 1e-10 and pi.probabilities.min() >= 0
        assert abs(pi.probabilities.sum() - 1) < 1e-12
        marg = level_marginal(pi, space)
        np.testing.assert_allclose(marg, erlang_loss_distribution(M, lp / p.mu_p), atol=1e-10)


def test_reducible_chain_names_two_states():
    Q = RateMatrix.from_triplets(4, [0, 1, 2, 3], [1, 0, 3, 2], [1.0, 2.0, 1.0, 1.0])
    with pytest.raises(ReducibleChainError) as err:
        solve_direct(Q)
    a, b = err.value.states
    assert {a, b} & {1, 2} and {a, b} & {3, 4}


def test_transient_states_get_zero_mass():
    # no retrials: orbit can only fill, so only full-orbit states recur
    p = baseline(2, 1, 2, theta=0.0)
    space, Q, _ = pipeline(p)
    pi = solve_direct(Q)
    assert pi.residual < 1e-12
    for s, v in zip(space, pi.probabilities):
        if s.k < p.L:
            assert v == 0.0
    np.testing.assert_allclose(pi.probabilities, null_space_pi(Q), atol=1e-12)


def test_direct_refuses_huge_inputs():
    n = 10_001
    Q = RateMatrix(n, np.array([0]), np.array([1]), np.array([1.0]), np.zeros(n))
    with pytest.raises(CapacityError):
        solve_direct(Q)
