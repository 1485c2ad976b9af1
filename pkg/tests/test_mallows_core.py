import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import chisquare

from genie_secretary.base_solver import DomainError, ResourceLimitError, validate_theta
from genie_secretary.mallows_core import (apply_prefix_bijection, children, decode_inversion_table,
                                          inversion_table, is_eligible, kendall_tau,
                                          mallows_pmf_table, p_value, poly_cache, prefix_relabel,
                                          q_binomial, q_factorial, sample_inversion_tables,
                                          sample_mallows, validate_permutation)


@pytest.mark.parametrize('pi, expected', [((1, 2, 3), 0), ((3, 2, 1), 3), ((2, 1, 3), 1),
                                          ((2, 4, 1, 3), 3)])
def test_kendall_tau_counts_inversions(pi, expected):
    assert kendall_tau(pi) == expected


def test_inversion_table_decodes_back_for_every_permutation():
    for pi in itertools.permutations(range(1, 6)):
        v = inversion_table(pi)
        assert sum(v) == kendall_tau(pi)
        assert decode_inversion_table(v) == pi


def test_decode_rejects_out_of_range_entry():
    with pytest.raises(DomainError):
        decode_inversion_table((0, 2, 0))


def test_prefix_relabel():
    assert prefix_relabel((3, 1, 4, 2), 3) == (2, 1, 3)
    assert prefix_relabel((3, 1, 4, 2), 1) == (1,)
    with pytest.raises(DomainError):
        prefix_relabel((1, 2), 3)


def test_children_end_in_each_relative_value():
    assert children((1,)) == ((2, 1), (1, 2))
    assert children((1, 2)) == ((2, 3, 1), (1, 3, 2), (1, 2, 3))
    for child in children((2, 1, 3)):
        validate_permutation(child)
        assert prefix_relabel(child, 3) == (2, 1, 3)


def test_is_eligible():
    assert is_eligible((1, 2), 4)
    assert not is_eligible((2, 1), 4)
    assert is_eligible((2, 1), 2)


def test_apply_prefix_bijection():
    assert apply_prefix_bijection((2, 1), (1, 3, 2)) == (3, 1, 2)
    assert apply_prefix_bijection((1, 2), (1, 3, 2)) == (1, 3, 2)
    with pytest.raises(DomainError):
        apply_prefix_bijection((2, 1), (3, 1, 2))


def test_p_value_exact_and_float():
    assert p_value(0, Fraction(1, 2)) == 0
    assert p_value(3, Fraction(1, 2)) == Fraction(7, 4)
    assert p_value(3, 2.0) == pytest.approx(7.0)
    assert p_value(5, 1.0) == 5.0


def test_q_factorial_and_binomial():
    assert q_factorial(3, Fraction(2)) == 21
    assert q_factorial(3, 2.0) == pytest.approx(21.0)
    assert q_binomial(2, 2, 1.0) == pytest.approx(6.0)
    assert q_binomial(2, 1, Fraction(2)) == 7
    with pytest.raises(DomainError):
        q_binomial(-1, 2, 1.0)


@pytest.mark.parametrize('theta', [0.3, 1.0, 3.0])
def test_poly_cache_ratios(theta):
    cache = poly_cache(theta, 50)
    i = np.arange(1, 51)
    assert np.allclose(cache.p[i] * cache.inv_p[i], 1.0)
    assert np.allclose(cache.continue_ratio()[2:], 1.0 - cache.inv_p[2:])
    assert cache.power_ratio(0, 3, 3) == pytest.approx(1.0)


def test_poly_cache_does_not_overflow_for_large_theta():
    cache = poly_cache(3.0, 2000)
    assert np.all(np.isfinite(cache.inv_p))
    assert np.all(np.isfinite(cache.log_p[1:]))
    assert cache.inv_p[20] == pytest.approx(2.0 / (3.0 ** 20 - 1.0))


def test_mallows_pmf_table_sums_to_one():
    df = mallows_pmf_table(3, Fraction(1, 2))
    assert sum(df['probability']) == 1
    identity = df[df['permutation'].apply(lambda p: p == (1, 2, 3))]['probability'].iloc[0]
    assert identity == 1 / q_factorial(3, Fraction(1, 2))


def test_mallows_pmf_table_respects_cap():
    with pytest.raises(ResourceLimitError):
        mallows_pmf_table(9, 1)


@pytest.mark.parametrize('theta', [0.5, 1.0, 2.0])
def test_sampled_inversion_tables_follow_truncated_geometric(theta):
    rng = np.random.default_rng(7)
    v = sample_inversion_tables(6, theta, 200_000, rng)
    assert v.shape == (200_000, 6)
    assert np.all(v >= 0) and np.all(v <= np.arange(6))
    # 第3列取值 {0,1,2}，P(v=j) ∝ θ^j
    weights = np.array([theta ** j for j in range(3)])
    expected = weights / weights.sum()
    counts = np.bincount(v[:, 2], minlength=3)
    assert np.allclose(counts / len(v), expected, atol=0.01)
    assert chisquare(counts, expected * len(v)).pvalue > 1e-4


def test_sample_mallows_is_reproducible():
    assert sample_mallows(10, 0.7, rng_seed=3) == sample_mallows(10, 0.7, rng_seed=3)
    validate_permutation(sample_mallows(10, 0.7, rng_seed=3))


@pytest.mark.parametrize('bad', [0, -1, 'abc', math.inf, None])
def test_validate_theta_rejects(bad):
    with pytest.raises(DomainError):
        validate_theta(bad)


@pytest.mark.parametrize('theta', [Fraction(1, 2), 1, 2])
@pytest.mark.parametrize('n', [3, 4])
def test_sampled_permutations_match_exact_pmf(n, theta):
    table = mallows_pmf_table(n, theta)
    v = sample_inversion_tables(n, float(theta), 120_000, np.random.default_rng(17))
    rows, counts = np.unique(v, axis=0, return_counts=True)
    observed = {tuple(int(x) for x in row): int(c) for row, c in zip(rows, counts)}
    keys = [tuple(inversion_table(pi)) for pi in table['permutation']]
    assert set(observed) <= set(keys)
    f_obs = np.array([observed.get(k, 0) for k in keys])
    f_exp = np.array([float(p) for p in table['probability']]) * len(v)
    assert chisquare(f_obs, f_exp).pvalue > 1e-4


def test_kendall_prefix_equivariance_exhaustive():
    n = 6
    for pi in itertools.permutations(range(1, n + 1)):
        for k in range(1, n + 1):
            if list(pi[:k]) != sorted(pi[:k]):
                break
            for tau in itertools.permutations(range(1, k + 1)):
                image = apply_prefix_bijection(tau, pi)
                assert kendall_tau(image) - kendall_tau(pi) == kendall_tau(tau)
