"""
期望值模块
期望选择次数（无条件 / 以获胜为条件）、停止位置分布以及期望停止比例(ESR)
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from config import config

from .asymptotics import (UNIFORM, AsymptoticThresholds, limit_t_leq, limit_win_prefixes,
                          uniform_t_leq_limit, uniform_win_limit)
from .base_solver import (DOWRY, GENIE, DomainError, ThetaLike, UndefinedResultError,
                          validate_model, validate_positive_int, validate_theta)
from .exact_oracle import StrategyThresholds
from .mallows_core import poly_cache
from .strategy_eval import NestedSumKernel, t_leq_profile, t_leq_value, win_value

logger = logging.getLogger(__name__)

PROXY_GAP_TOL = 1e-3

Thresholds = Union[StrategyThresholds, AsymptoticThresholds, str, tuple, list]


@dataclass(frozen=True)
class StoppingDistribution:
    """
    停止位置分布
    Attributes:
        masses: 下标为位置 m（0号位不用）；条件分布存放的是“在m处停止且获胜”的联合概率
        win_probability: 同一策略的胜率
    """
    model: str
    conditional: bool
    n: int
    masses: np.ndarray
    win_probability: float

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def normalized(self) -> np.ndarray:
        if not self.conditional:
            return self.masses
        if self.win_probability <= 0.0:
            raise UndefinedResultError("胜率为0，条件分布无定义")
        return self.masses / self.win_probability

    def mean_position(self) -> float:
        return float(np.dot(np.arange(self.n + 1), self.normalized()))

    def expected_stop_ratio(self) -> float:
        return self.mean_position() / self.n

    def whole_list_probability(self) -> float:
        return float(self.normalized()[self.n])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'position': np.arange(1, self.n + 1), 'mass': self.normalized()[1:]})


def _finite(ks) -> tuple:
    return StrategyThresholds.of(ks).canonical().ks


def expected_selections(n: Optional[int], ks: Thresholds, theta: ThetaLike,
                        conditional: bool = False) -> float:
    """
    期望选择次数
    Args:
        n: 候选人数；None 表示 N→∞，此时 ks 须为 AsymptoticThresholds
        ks: 阈值策略
        theta: 离散参数
        conditional: 是否以获胜为条件
    Returns:
        无条件: s - Σ_{r=0}^{s-1} T_{≤r}(N; k_1..k_{r+1})/(P_N)!
        条件:   (s·W - Σ_{i<s} W(k_1..k_i)) / W
    Raises:
        UndefinedResultError: 条件模式下胜率为0
    Note:
        - 最优者之后不再有从左到右最大值，两种模型的选择次数相同
    """
    if n is None:
        return limit_expected_selections(ks, conditional)
    n = validate_positive_int(n, 'n')
    if isinstance(ks, AsymptoticThresholds):
        ks = ks.to_finite_thresholds(n)
    ks = _finite(ks)
    kernel = NestedSumKernel.finite(n, theta)
    memo: Dict = {}
    s = len(ks)
    if not conditional:
        return s - sum(t_leq_value(kernel, ks[:r + 1], memo=memo) for r in range(s))
    wins = [win_value(kernel, ks[:i], memo=memo) for i in range(1, s + 1)]
    return _conditional_from_wins(wins)


def _conditional_from_wins(wins: List[float]) -> float:
    w = wins[-1]
    if w <= 0.0:
        raise UndefinedResultError("胜率为0，条件期望无定义")
    return (len(wins) * w - sum(wins[:-1])) / w


def limit_expected_selections(thresholds: Thresholds, conditional: bool = False) -> float:
    """N→∞ 时的期望选择次数，按 θ 区间选用极限核或 θ=1 的积分"""
    if not isinstance(thresholds, AsymptoticThresholds):
        raise DomainError("N→∞ 模式需要 AsymptoticThresholds")
    s = thresholds.s
    if thresholds.regime == UNIFORM:
        ys = tuple(reversed(thresholds.values))
        if conditional:
            return _conditional_from_wins([uniform_win_limit(ys[:i]) for i in range(1, s + 1)])
        return s - sum(uniform_t_leq_limit(ys[:r + 1]) for r in range(s))
    if conditional:
        return _conditional_from_wins(limit_win_prefixes(thresholds.theta, thresholds.values))
    return s - sum(limit_t_leq(thresholds.theta, thresholds.values))


def stopping_distribution(n: int, ks: Thresholds, theta: ThetaLike, model: str = GENIE,
                          conditional: bool = False) -> StoppingDistribution:
    """
    按位置区间分情况组装停止位置分布，记 t_r(m) = T_{≤r}(m; k_1..k_{r+1})/(P_m)!
    Genie:
        k_i < m ≤ k_{i+1} (i < s):  θ^{N-m}/P_N · t_{i-1}(m-1)
        k_s < m < N，无条件:        (t_{s-1} - t_{s-2})(m-1)/P_m + θ^{N-m}/P_N · t_{s-2}(m-1)
        k_s < m ≤ N，条件:          θ^{N-m}/P_N · t_{s-1}(m-1)
    Dowry:
        k_s < m < N，无条件:        (t_{s-1} - t_{s-2})(m-1)/P_m
        k_s < m < N，条件:          θ^{N-m}/P_N · (t_{s-1} - t_{s-2})(m-1)
    位置N处的概率取补（条件分布补到胜率）
    Raises:
        DomainError: k_s ≥ n
    """
    n = validate_positive_int(n, 'n')
    model = validate_model(model)
    theta = validate_theta(theta)
    if isinstance(ks, AsymptoticThresholds):
        ks = ks.to_finite_thresholds(n)
    ks = _finite(ks)
    s = len(ks)
    if ks[-1] >= n:
        raise DomainError(f"停止分布要求 k_s < n，当前 k_s={ks[-1]}, n={n}")
    cache = poly_cache(theta, n)
    table = t_leq_profile(n, ks, theta)

    def t(r: int) -> np.ndarray:
        # 第 r+1 行对应 T_{≤r}，整体右移一位得到 t_r(m-1)
        shifted = np.zeros(n + 1)
        shifted[1:] = table[r + 1][:-1]
        return shifted

    m = np.arange(n + 1)
    best_here = np.zeros(n + 1)
    best_here[1:] = cache.scaled_power(n - m[1:], n)
    masses = np.zeros(n + 1)
    win = win_value(NestedSumKernel.finite(n, theta), ks)

    if model == GENIE:
        bounds = list(ks)
        for i in range(1, s):
            region = (m > bounds[i - 1]) & (m <= bounds[i])
            masses[region] = best_here[region] * t(i - 1)[region]
        tail = m > ks[-1]
        if conditional:
            masses[tail] = best_here[tail] * t(s - 1)[tail]
        else:
            tail &= m < n
            exact_last = t(s - 1) - t(s - 2)
            masses[tail] = exact_last[tail] * cache.inv_p[tail] + best_here[tail] * t(s - 2)[tail]
            masses[n] = 1.0 - masses[:n].sum()
    else:
        tail = (m > ks[-1]) & (m < n)
        exact_last = t(s - 1) - t(s - 2)
        if conditional:
            masses[tail] = best_here[tail] * exact_last[tail]
            masses[n] = win - masses[:n].sum()
        else:
            masses[tail] = exact_last[tail] * cache.inv_p[tail]
            masses[n] = 1.0 - masses[:n].sum()

    if masses[n] < -1e-12:
        warnings.warn(f"位置N处的补概率为负: {masses[n]:.3e}")
        logger.warning(f"停止分布补概率异常: n={n}, ks={ks}, θ={theta}, model={model}")
    masses.setflags(write=False)
    return StoppingDistribution(model, conditional, n, masses, win)


def expected_stop_ratio(thresholds: Thresholds, theta: ThetaLike, model: str = GENIE,
                        conditional: bool = False, n: int = config.EXPECTATION_PROXY_N,
                        check: bool = False) -> float:
    """
    期望停止位置 / n
    Args:
        thresholds: 有限阈值，或按 n 换算的渐近阈值
        n: 代理长度（默认2000）
        check: 同时在 2n 处计算，差距超过 PROXY_GAP_TOL 时发出警告
    """
    esr = stopping_distribution(n, thresholds, theta, model, conditional).expected_stop_ratio()
    if check and isinstance(thresholds, AsymptoticThresholds):
        doubled = stopping_distribution(2 * n, thresholds, theta, model, conditional).expected_stop_ratio()
        if abs(doubled - esr) > PROXY_GAP_TOL:
            warnings.warn(f"ESR 在 n={n} 与 2n 处相差 {abs(doubled - esr):.2e}")
    return esr


def whole_list_probability(thresholds: Thresholds, theta: ThetaLike, model: str = GENIE,
                           conditional: bool = False, n: int = config.EXPECTATION_PROXY_N) -> float:
    """面试完整个名单（在位置n停止）的概率"""
    return stopping_distribution(n, thresholds, theta, model, conditional).whole_list_probability()


def stopping_summary(thresholds: Thresholds, theta: ThetaLike, n: int = config.EXPECTATION_PROXY_N) -> pd.DataFrame:
    """两种模型、有无条件四种组合下的 ESR 与走完名单概率"""
    rows = []
    for model in (GENIE, DOWRY):
        for conditional in (False, True):
            dist = stopping_distribution(n, thresholds, theta, model, conditional)
            rows.append({
                'model': model,
                'conditional': conditional,
                'esr': dist.expected_stop_ratio(),
                'whole_list': dist.whole_list_probability(),
            })
    return pd.DataFrame(rows)
