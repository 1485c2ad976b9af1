import math

import pytest

from genie_secretary.asymptotics import (THETA_ABOVE_1, THETA_BELOW_1, UNIFORM, AsymptoticSolver,
                                         AsymptoticThresholds, asym_win_prob_high,
                                         asym_win_prob_low, limit_t_leq, limit_win_prefixes,
                                         search_thresholds, uniform_t_leq_limit,
                                         uniform_thresholds, uniform_win_limit, uniform_win_prob)
from genie_secretary.base_solver import DomainError
from genie_secretary.threshold_dp import ThresholdDP

# (θ, s, 最后一个阈值, 胜率)，取自内置参考表
REFERENCE_ROWS = [
    (0.1, 3, 3, 0.999),
    (0.5, 1, 1, 0.5),
    (0.5, 2, 2, 0.75),
    (0.9, 1, 9, 0.38742049),
    (0.9, 3, 19, 0.75683265),
    (1.5, 1, 1, 0.43301723),
    (1.5, 3, 0, 0.95655232),
    (2, 2, 0, 0.90167379),
    (5, 2, 0, 0.99310967),
]

UNIFORM_ROWS = [
    (1, 0.3678794412, 0.3678794412),
    (2, 0.2231301601, 0.5910096013),
    (3, 0.1410933807, 0.7321029820),
    (4, 0.0910176906, 0.8231206726),
    (5, 0.0594292419, 0.8825499146),
]


def test_limit_probabilities_below_one():
    assert asym_win_prob_low(0.5, [1]).value == pytest.approx(0.5, abs=1e-12)
    assert asym_win_prob_low(0.5, [1, 2]).value == pytest.approx(0.75, abs=1e-12)
    # b=1 与 b=2 在 θ=1/2 时胜率相同
    assert asym_win_prob_low(0.5, [2]).value == pytest.approx(0.5, abs=1e-12)


def test_limit_probabilities_above_one():
    assert asym_win_prob_high(2, [0]).value == pytest.approx(0.5, abs=1e-12)
    assert asym_win_prob_high(2, [0, 0]).value == pytest.approx(0.90167379, abs=5e-9)
    assert asym_win_prob_high(1.5, [1]).value == pytest.approx(0.43301723, abs=5e-9)


def test_contributions_sum_to_value():
    for prob in (asym_win_prob_low(0.9, [9, 14, 19]), asym_win_prob_high(1.2, [3, 1, 0])):
        assert len(prob.contributions) == 3
        assert sum(prob.contributions) == pytest.approx(prob.value, abs=1e-12)
    assert asym_win_prob_high(1.2, [3, 1, 0]).tail_bound <= 1e-13


@pytest.mark.parametrize('theta, s, threshold, win', REFERENCE_ROWS)
def test_search_reproduces_reference_rows(theta, s, threshold, win):
    best = search_thresholds(theta, s)
    assert best.values[-1] == threshold
    assert best.win_probability == pytest.approx(win, abs=5e-7)
    assert not best.cap_hit


def test_search_regimes_and_orientation():
    below = search_thresholds(0.9, 3)
    assert below.regime == THETA_BELOW_1
    assert below.values == (9, 14, 19)
    above = search_thresholds(1.5, 2)
    assert above.regime == THETA_ABOVE_1
    assert above.values == (1, 0)
    assert search_thresholds(1.0, 2).regime == UNIFORM


def test_search_matches_large_n_dynamic_programming():
    dp = ThresholdDP(400)
    for theta in (0.8, 1.3):
        best = search_thresholds(theta, 3)
        assert dp.optimal_win_prob(theta, 3) == pytest.approx(best.win_probability, abs=1e-7)


def test_joint_search_agrees_with_sequential():
    assert search_thresholds(0.9, 2, joint=True).values == (9, 14)
    assert search_thresholds(1.5, 2, joint=True).values == (1, 0)


def test_cap_hit_is_reported():
    best = AsymptoticSolver(cap=5).search_thresholds(0.99, 1)
    assert best.cap_hit
    assert best.values == (5,)


@pytest.mark.parametrize('s, x, win', UNIFORM_ROWS)
def test_uniform_thresholds(s, x, win):
    best = uniform_thresholds(s)
    assert best.values[-1] == pytest.approx(x, abs=1e-9)
    assert best.win_probability == pytest.approx(win, abs=1e-9)


def test_uniform_single_selection_is_one_over_e():
    assert uniform_win_prob((math.exp(-1),)).value == pytest.approx(math.exp(-1), abs=1e-12)


def test_uniform_bracket_forms_agree():
    for s in (2, 3, 4):
        xs = uniform_thresholds(s).values
        direct = uniform_win_prob(xs)
        ascending = uniform_win_limit(tuple(reversed(xs)))
        assert ascending == pytest.approx(direct.value, abs=1e-8)
        groups = uniform_win_limit(tuple(reversed(xs)), contributions=True)
        assert list(reversed(groups)) == pytest.approx(list(direct.contributions), abs=1e-8)


def test_optimal_uniform_contribution_equals_its_threshold():
    best = uniform_thresholds(4)
    assert list(best.contributions) == pytest.approx(list(best.values), abs=1e-9)
    assert best.win_probability == pytest.approx(sum(best.values), abs=1e-9)


def test_first_contribution_depends_only_on_latest_threshold():
    below = asym_win_prob_low(0.9, [9, 14, 19])
    assert below.contributions[0] == pytest.approx(asym_win_prob_low(0.9, [9]).value, abs=1e-12)
    assert below.contributions[0] == pytest.approx(9 * 0.9 ** 8 * 0.1, abs=1e-12)
    above = asym_win_prob_high(1.2, [3, 1, 0])
    assert above.contributions[0] == pytest.approx(asym_win_prob_high(1.2, [3]).value, abs=1e-10)


def test_uniform_t_leq_single_threshold():
    # 选不到任何人的概率为 y
    assert uniform_t_leq_limit([0.4]) == pytest.approx(0.4, abs=1e-12)


def test_limit_prefixes_are_increasing():
    wins = limit_win_prefixes(0.9, [9, 14, 19])
    assert wins[0] < wins[1] < wins[2]
    assert wins[-1] == pytest.approx(0.75683265, abs=5e-8)
    # 前缀按升序阈值截取，第一项只含最早的阈值 b=19
    assert wins[0] == pytest.approx(asym_win_prob_low(0.9, [19]).value, abs=1e-12)
    ts = limit_t_leq(1.5, [1, 0])
    assert all(0.0 <= t <= 1.0 for t in ts)


def test_to_finite_thresholds():
    below = AsymptoticThresholds(THETA_BELOW_1, 0.9, (9, 14), 0.0)
    assert below.to_finite_thresholds(100).ks == (86, 91)
    above = AsymptoticThresholds(THETA_ABOVE_1, 1.5, (1, 0), 0.0)
    assert above.to_finite_thresholds(100).ks == (0, 1)
    uniform = AsymptoticThresholds(UNIFORM, 1.0, (0.5, 0.25), 0.0)
    assert uniform.to_finite_thresholds(100).ks == (25, 50)
    assert list(uniform.to_frame().columns) == ['i', 'x']


def test_invalid_limit_arguments():
    with pytest.raises(DomainError):
        asym_win_prob_low(1.5, [1])
    with pytest.raises(DomainError):
        asym_win_prob_low(0.5, [0])
    with pytest.raises(DomainError):
        asym_win_prob_low(0.5, [2, 1])
    with pytest.raises(DomainError):
        asym_win_prob_high(2, [0, 1])
    with pytest.raises(DomainError):
        limit_t_leq(1.0, [1])
    with pytest.raises(DomainError):
        uniform_win_prob((0.2, 0.3))


@pytest.mark.slow
def test_sweep_columns():
    df = AsymptoticSolver().sweep([0.3, 3.0], 3)
    assert list(df.columns) == ['theta', 's', 'threshold', 'win_probability', 'cap_hit']
    assert len(df) == 6


def test_uniform_ratios_match_dynamic_programming():
    n = 1000
    dp = ThresholdDP(n)
    assert abs(dp.optimal_thresholds(1.0, 1).ks[0] / n - math.exp(-1)) <= 2 / n
    ks = dp.optimal_thresholds(1.0, 5).ks
    xs = uniform_thresholds(5).values
    for k, x in zip(reversed(ks), xs):
        assert abs(k / n - x) <= 2 / n


@pytest.mark.parametrize('s', [2, 3, 4])
def test_uniform_thresholds_are_first_order_optimal(s):
    best = uniform_thresholds(s)
    peak = uniform_win_limit(tuple(reversed(best.values)))
    for r in range(s):
        for step in (-1e-4, 1e-4):
            xs = list(best.values)
            xs[r] += step
            assert uniform_win_limit(tuple(reversed(xs))) <= peak + 1e-10
