import math

import numpy as np
import pytest

from genie_secretary.asymptotics import uniform_thresholds
from genie_secretary.base_solver import DOWRY, GENIE, DomainError
from genie_secretary.expectations import expected_selections, stopping_distribution
from genie_secretary.mallows_core import inversion_table
from genie_secretary.simulator import MonteCarloSimulator, play_batch, simulate
from genie_secretary.strategy_eval import win_ratio


def _tables(*perms):
    return np.array([inversion_table(pi) for pi in perms], dtype=np.int64)


def test_play_batch_hand_checked():
    v = _tables((2, 1, 4, 3), (1, 2, 3, 4), (4, 1, 2, 3))
    genie = play_batch(v, (1,), GENIE)
    assert list(genie['won']) == [True, False, False]
    assert list(genie['selections']) == [1, 1, 0]
    assert list(genie['stop']) == [3, 2, 4]

    dowry = play_batch(_tables((4, 1, 2, 3)), (0, 1), DOWRY)
    assert dowry['won'][0] and dowry['stop'][0] == 4
    genie = play_batch(_tables((4, 1, 2, 3)), (0, 1), GENIE)
    assert genie['won'][0] and genie['stop'][0] == 1


@pytest.mark.parametrize('theta, ks', [(0.8, (10, 14)), (1.0, (5, 9)), (1.3, (0, 2))])
def test_simulation_agrees_with_closed_form(theta, ks):
    report = simulate(20, theta, ks, GENIE, trials=60_000, seed=11)
    win = win_ratio(20, ks, theta)
    assert abs(report.win_rate - win) < 5 * report.win_rate_se + 1e-9
    sel = expected_selections(20, ks, theta)
    assert abs(report.mean_selections - sel) < 5 * report.mean_selections_se + 1e-9
    whole = stopping_distribution(20, ks, theta, GENIE).whole_list_probability()
    assert abs(report.whole_list_rate - whole) < 5 * report.whole_list_rate_se + 1e-9


def test_dowry_stop_ratio_agrees_with_distribution():
    report = simulate(30, 1.0, (8, 15), DOWRY, trials=50_000, seed=5)
    esr = stopping_distribution(30, (8, 15), 1.0, DOWRY).expected_stop_ratio()
    assert abs(report.mean_stop_ratio - esr) < 5 * report.mean_stop_ratio_se + 1e-9
    assert report.cond_mean_selections is not None


def test_results_do_not_depend_on_worker_count():
    serial = MonteCarloSimulator(batch_size=4_000, workers=1).simulate(25, 0.9, (8, 12), GENIE, 20_000, 3)
    threaded = MonteCarloSimulator(batch_size=4_000, workers=4).simulate(25, 0.9, (8, 12), GENIE, 20_000, 3)
    assert serial == threaded


def test_seed_controls_stream():
    a = simulate(15, 0.7, (5,), trials=5_000, seed=1)
    b = simulate(15, 0.7, (5,), trials=5_000, seed=1)
    c = simulate(15, 0.7, (5,), trials=5_000, seed=2)
    assert a == b
    assert a.win_rate != c.win_rate or a.mean_stop_ratio != c.mean_stop_ratio


def test_report_export():
    report = simulate(10, 1.0, (3, 5), trials=1_000, seed=0)
    data = report.to_dict()
    assert data['ks'] == '3,5'
    assert data['generator'] == 'PCG64'
    assert data['trials'] == 1_000
    assert len(report.to_frame()) == 1


def test_invalid_arguments():
    with pytest.raises(DomainError):
        simulate(10, 1.0, (3,), model='oracle', trials=10)
    with pytest.raises(DomainError):
        simulate(10, 0.0, (3,), trials=10)
    with pytest.raises(DomainError):
        MonteCarloSimulator(batch_size=0)


def test_worked_example_win_rate_within_three_sigma():
    report = simulate(4, 1.0, (0, 1), GENIE, trials=1_000_000, seed=2024)
    assert abs(report.win_rate - 17 / 24) < 3 * report.win_rate_se


def test_scaled_uniform_thresholds_approach_limit():
    ks = uniform_thresholds(2).to_finite_thresholds(200)
    report = simulate(200, 1.0, ks, GENIE, trials=200_000, seed=8)
    assert abs(report.win_rate - 0.5910) < 3 * report.win_rate_se + 0.01


@pytest.mark.parametrize('theta, ks', [(0.9, (12, 16)), (1.0, (4, 7, 10)), (1.5, (0, 1))])
def test_genie_and_dowry_win_rates_agree(theta, ks):
    genie = simulate(25, theta, ks, GENIE, trials=100_000, seed=31)
    dowry = simulate(25, theta, ks, DOWRY, trials=100_000, seed=32)
    se = math.hypot(genie.win_rate_se, dowry.win_rate_se)
    assert abs(genie.win_rate - dowry.win_rate) < 3 * se
