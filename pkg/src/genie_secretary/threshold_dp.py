"""
阈值动态规划模块
按（前缀长度，剩余询问次数）做反向递推，得到有限N下的最优阈值与最优胜率
"""
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
import pandas as pd

from .base_solver import (BaseSolver, DomainError, ThetaLike, ToleranceError, validate_positive_int,
                          validate_theta)
from .exact_oracle import StrategyThresholds
from .mallows_core import poly_cache

CROSSOVER_TOL = 1e-12


@dataclass(frozen=True)
class QTable:
    """
    长度为k的合格前缀在剩余j次询问时的胜率
    Attributes:
        q: q[j][k]，接受当前候选人后按最优方式继续
        qo: qo[j][k]，拒绝当前候选人后按最优方式继续
    Note:
        - 第0列不使用
        - 所有表项已按配分函数归一化，取值在 [0, 1]
    """
    n: int
    s: int
    theta: float
    q: np.ndarray
    qo: np.ndarray

    def restrict(self, s: int) -> 'QTable':
        """前s行即 s 次询问的表（第j行只依赖更低的行）"""
        if not 1 <= s <= self.s:
            raise DomainError(f"s 必须在 [1, {self.s}] 内，当前为 {s}")
        return QTable(self.n, s, self.theta, self.q[:s], self.qo[:s])

    @property
    def qbar(self) -> np.ndarray:
        return np.maximum(self.q, self.qo)

    @property
    def win_probability(self) -> float:
        return float(max(self.q[self.s - 1][1], self.qo[self.s - 1][1]))

    def crossover(self, j: int) -> int:
        """
        剩余j次询问时的转折点：q[j][k] < qo[j][k] 的最大k（不存在时为0）
        Raises:
            ToleranceError: 转折点之前出现明显的 q > qo（单次转折被破坏）
        """
        diff = self.q[j][1:] - self.qo[j][1:]
        negative = np.flatnonzero(diff < 0)
        if negative.size == 0:
            return 0
        k = int(negative[-1]) + 1
        if np.any(diff[:k - 1] > CROSSOVER_TOL):
            raise ToleranceError(f"剩余 {j} 次询问时出现多次转折: n={self.n}, θ={self.theta}")
        return k

    def thresholds(self) -> StrategyThresholds:
        ks = tuple(self.crossover(self.s - i) for i in range(1, self.s + 1))
        if any(b < a for a, b in zip(ks, ks[1:])):
            raise ToleranceError(f"最优阈值不单调: {ks}")
        return StrategyThresholds(ks)

    def threshold_sequence(self) -> pd.DataFrame:
        """
        同时给出升序阈值 k_i 与右对齐形式（a 按剩余询问编号，b = n - a，x = a / n）
        """
        ks = self.thresholds().ks
        rows = []
        for i, k in enumerate(ks, start=1):
            rows.append({
                'selection': i,
                'remaining_queries': self.s - i,
                'k': k,
                'a': k,
                'b': self.n - k,
                'x': k / self.n,
            })
        df = pd.DataFrame(rows)
        return df.sort_values('remaining_queries').reset_index(drop=True)

    def to_frame(self) -> pd.DataFrame:
        j, k = np.meshgrid(np.arange(self.s), np.arange(1, self.n + 1), indexing='ij')
        return pd.DataFrame({
            'remaining_queries': j.ravel(),
            'k': k.ravel(),
            'q': self.q[:, 1:].ravel(),
            'qo': self.qo[:, 1:].ravel(),
        })


class ThresholdDP(BaseSolver):
    """
    有限N最优策略求解器，按 (θ, s) 缓存已计算的表
    """

    def __init__(self, n: int):
        super().__init__()
        self.n = validate_positive_int(n, 'n')
        self.tables: Dict[Tuple[float, int], QTable] = {}

    def compute_qtable(self, theta: ThetaLike, s: int) -> QTable:
        """
        从 k = n 反向递推到 k = 1
            qo[i][k-1] = q̄[i][k]/P_k + qo[i][k]·θP_{k-1}/P_k
            q[0][k-1]  = q[0][k]·θP_{k-1}/P_k
            q[i][k-1]  = q̄[i-1][k]/P_k + q[i][k]·θP_{k-1}/P_k
        """
        theta = validate_theta(theta)
        s = validate_positive_int(s, 's')
        key = (theta, s)
        if key in self.tables:
            return self.tables[key]
        n = self.n
        cache = poly_cache(theta, n)
        c = cache.continue_ratio()
        inv_p = cache.inv_p
        q = np.zeros((s, n + 1))
        qo = np.zeros((s, n + 1))
        q[:, n] = 1.0
        for k in range(n, 1, -1):
            qbar = np.maximum(q[:, k], qo[:, k])
            qo[:, k - 1] = inv_p[k] * qbar + c[k] * qo[:, k]
            q[0, k - 1] = c[k] * q[0, k]
            q[1:, k - 1] = inv_p[k] * qbar[:-1] + c[k] * q[1:, k]
        q.setflags(write=False)
        qo.setflags(write=False)
        table = QTable(n, s, theta, q, qo)
        self.tables[key] = table
        self.logger.debug(f"Q表计算完成: n={n}, θ={theta}, s={s}")
        return table

    def optimal_thresholds(self, theta: ThetaLike, s: int) -> StrategyThresholds:
        return self.compute_qtable(theta, s).thresholds()

    def optimal_win_prob(self, theta: ThetaLike, s: int) -> float:
        return self.compute_qtable(theta, s).win_probability

    def sweep(self, thetas, s_max: int) -> pd.DataFrame:
        """
        θ网格上的最优阈值与胜率，s = 1..s_max
        Returns:
            DataFrame，列为 theta / s / thresholds / a_s / b_s / win_probability
        """
        rows = []
        for theta in thetas:
            self.logger.info(f"计算 θ={theta} 的最优策略")
            try:
                full = self.compute_qtable(theta, s_max)
                for s in range(1, s_max + 1):
                    table = full.restrict(s)
                    ks = table.thresholds().ks
                    rows.append({
                        'theta': float(theta),
                        's': s,
                        'thresholds': ','.join(str(k) for k in ks),
                        'a_s': ks[0],
                        'b_s': self.n - ks[0],
                        'win_probability': table.win_probability,
                    })
            except Exception as e:
                self.logger.error(f"θ={theta} 的最优策略计算失败: {e}")
                raise
        return pd.DataFrame(rows)


def compute_qtable(n: int, theta: ThetaLike, s: int) -> QTable:
    return ThresholdDP(n).compute_qtable(theta, s)


def optimal_thresholds(n: int, theta: ThetaLike, s: int) -> StrategyThresholds:
    return ThresholdDP(n).optimal_thresholds(theta, s)


def optimal_win_prob(n: int, theta: ThetaLike, s: int) -> float:
    return ThresholdDP(n).optimal_win_prob(theta, s)
