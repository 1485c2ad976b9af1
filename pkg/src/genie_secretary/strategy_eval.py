"""
策略评估模块
任意阈值策略在有限N下的闭式与递推计算：T_{≤r}、T_r、W、W_r（均为除以 (P_m)! 后的比值）
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .base_solver import DomainError, validate_positive_int, validate_theta
from .exact_oracle import StrategyThresholds
from .mallows_core import PolyCache, poly_cache

logger = logging.getLogger(__name__)

FINITE = 'finite'
LIMIT_ABOVE = 'limit_above'
LIMIT_BELOW = 'limit_below'


@dataclass(frozen=True)
class NestedSumKernel:
    """
    嵌套和的计算核
    Attributes:
        kind: finite（有限N）、limit_above（θ>1 极限）、limit_below（θ<1 极限）
        horizon: 求和上界 U（有限情形即N；θ>1 为截断点；θ<1 为虚拟右端点）
        weights: 每层求和的权重 w_i（有限与θ>1为 1/P_i，θ<1 为常数 1-θ）
        tail_bound: θ>1 截断带来的几何尾项上界
    Note:
        - 所有下界大于上界的求和都为空，贡献0
    """
    kind: str
    theta: float
    horizon: int
    weights: np.ndarray
    cache: Optional[PolyCache] = None
    tail_bound: float = 0.0

    @classmethod
    def finite(cls, n: int, theta: float) -> 'NestedSumKernel':
        cache = poly_cache(validate_theta(theta), n)
        return cls(FINITE, cache.theta, n, cache.inv_p, cache)

    @classmethod
    def limit_above(cls, theta: float, horizon: int) -> 'NestedSumKernel':
        theta = validate_theta(theta)
        if theta <= 1.0:
            raise DomainError(f"θ>1 的极限核要求 θ>1，当前为 {theta}")
        cache = poly_cache(theta, horizon)
        q = math.exp(-horizon * math.log(theta))
        return cls(LIMIT_ABOVE, theta, horizon, cache.inv_p, cache, tail_bound=theta * q / (1.0 - q))

    @classmethod
    def limit_below(cls, theta: float, horizon: int) -> 'NestedSumKernel':
        theta = validate_theta(theta)
        if theta >= 1.0:
            raise DomainError(f"θ<1 的极限核要求 θ<1，当前为 {theta}")
        weights = np.full(horizon + 1, 1.0 - theta)
        weights[0] = 0.0
        return cls(LIMIT_BELOW, theta, horizon, weights)

    def coef(self, k: int, levels: int, m=None):
        """
        嵌套和前的系数
            finite:       θ^{m-k-L}·P_k/P_m
            limit_above:  θ^{-L}·(1-θ^{-k})
            limit_below:  θ^{U-k-L}
        """
        if self.kind == FINITE:
            m = self.horizon if m is None else m
            with np.errstate(invalid='ignore', divide='ignore', over='ignore'):
                return self.cache.power_ratio(np.asarray(m) - k - levels, k, m)
        lt = math.log(self.theta)
        if self.kind == LIMIT_ABOVE:
            return math.exp(-levels * lt) * -math.expm1(-k * lt)
        return math.exp((self.horizon - k - levels) * lt)

    def lead_mass(self) -> float:
        """第一个候选人即最优者的概率（k_1=0 时被第一次选择直接选中）"""
        if self.kind == FINITE:
            return float(self.cache.scaled_power(self.horizon - 1, self.horizon))
        if self.kind == LIMIT_ABOVE:
            return 1.0 - 1.0 / self.theta
        return 0.0

    def nested(self, lowers: Sequence[int], memo: Optional[Dict] = None) -> np.ndarray:
        """
        F(x) = Σ_{i_1=L_1}^{x-1} w_{i_1} Σ_{i_2=L_2}^{i_1-1} w_{i_2} … ，lowers 由外到内
        Returns:
            x = 0..U 上的数组；lowers 为空时恒为1
        """
        key = tuple(int(v) for v in lowers)
        if memo is not None and key in memo:
            return memo[key]
        if not key:
            result = np.ones(self.horizon + 1)
        else:
            inner = self.nested(key[1:], memo)
            term = self.weights * inner
            term[:min(key[0], self.horizon + 1)] = 0.0
            result = np.zeros(self.horizon + 1)
            np.cumsum(term[:-1], out=result[1:])
        if memo is not None:
            memo[key] = result
        return result


def _canonical(ks) -> Tuple[int, ...]:
    return StrategyThresholds.of(ks).canonical().ks


def t_leq_value(kernel: NestedSumKernel, ks: Sequence[int], m: Optional[int] = None,
                memo: Optional[Dict] = None) -> float:
    """
    T_{≤r-1}(m; k_1..k_r)/(P_m)! 的嵌套和闭式（ks 已是严格递增形式）
    Note:
        - 非有限核只能在 m = U 处求值
    """
    m = kernel.horizon if m is None else m
    r = len(ks)
    if r == 0:
        return 0.0
    if m <= ks[-1]:
        return 1.0
    memo = {} if memo is None else memo
    total = 0.0
    for j in range(r):
        lowers = [ks[r - 1 - q] for q in range(j)]
        total += float(kernel.coef(ks[r - 1 - j], j, m)) * float(kernel.nested(lowers, memo)[m])
    return total


def win_contributions(kernel: NestedSumKernel, ks: Sequence[int], use_delta: bool = True,
                      memo: Optional[Dict] = None) -> List[float]:
    """
    W(U; k_1..k_s)/(P_U)! 按系数所属阈值分组的各项 H_r（ks 已是严格递增形式）
    Note:
        - 第r组收集所有以 k_r 的系数开头的嵌套和，最优者所在区间不作区分
        - k_1=0 时第一组为第一个候选人即最优者的概率
    Args:
        use_delta: True 时按括号式写法，外层从 k_r+1 开始并乘 δ(k_r, k_{r+1})；
                   False 时外层从 k_r 开始，依赖空和约定
    """
    horizon = kernel.horizon
    ks = [k for k in ks if k < horizon]
    memo = {} if memo is None else memo
    lead = bool(ks) and ks[0] == 0
    groups: List[float] = [0.0] * len(ks)
    if lead:
        groups[0] = kernel.lead_mass()
        ks = ks[1:]
    bounds = list(ks) + [horizon]
    for r in range(1, len(ks) + 1):
        k_r = ks[r - 1]
        upper = bounds[r]
        for j in range(r):
            tail = [ks[r - 1 - q] for q in range(j)]
            if j == 0:
                lowers = [k_r]
            elif use_delta:
                if upper < k_r + 2:
                    continue
                lowers = [k_r + 1] + tail
            else:
                lowers = [k_r] + tail
            term = float(kernel.coef(ks[r - 1 - j], j + 1)) * float(kernel.nested(lowers, memo)[upper])
            groups[int(lead) + r - 1 - j] += term
    return groups


def win_value(kernel: NestedSumKernel, ks: Sequence[int], use_delta: bool = True,
              memo: Optional[Dict] = None) -> float:
    """W(U; k_1..k_s)/(P_U)! 的嵌套和闭式"""
    return float(sum(win_contributions(kernel, ks, use_delta, memo)))


def t_leq_ratio(m: int, ks, theta: float) -> float:
    """
    T_{≤r-1}(m; k_1..k_r)/(P_m)!，嵌套和闭式
    Raises:
        DomainError: m < k_r 时
    """
    ks = _canonical(ks)
    m = validate_positive_int(m, 'm', minimum=0)
    if m < ks[-1]:
        raise DomainError(f"要求 m ≥ k_r，当前 m={m}, k_r={ks[-1]}")
    return t_leq_value(NestedSumKernel.finite(max(m, 1), theta), ks, m)


def _t_recurrence_rows(cache: PolyCache, n: int, ks: Sequence[int]) -> np.ndarray:
    # t_r(m+1) = c[m+1]·t_r(m) + (1/P_{m+1})·t_{r-1}(m)，t_r(m)=1 (m ≤ k_r)，t_0 ≡ 0
    c = cache.continue_ratio()
    inv_p = cache.inv_p
    rows = np.zeros((len(ks) + 1, n + 1))
    for r, k in enumerate(ks, start=1):
        row = np.ones(n + 1)
        prev = rows[r - 1]
        for m in range(min(k, n), n):
            row[m + 1] = c[m + 1] * row[m] + inv_p[m + 1] * prev[m]
        rows[r] = row
    return rows


def t_leq_ratio_recurrence(m: int, ks, theta: float) -> float:
    """与 t_leq_ratio 相同的量，按相邻长度递推计算"""
    ks = _canonical(ks)
    if m < ks[-1]:
        raise DomainError(f"要求 m ≥ k_r，当前 m={m}, k_r={ks[-1]}")
    cache = poly_cache(validate_theta(theta), max(m, 1))
    return float(_t_recurrence_rows(cache, m, ks)[-1][m])


def t_leq_profile(n: int, ks, theta: float) -> np.ndarray:
    """
    全部长度上的 T_{≤r}(m; k)/(P_m)! 表
    Returns:
        形状 (s+2, n+1) 的数组，第 r+1 行对应 r = -1..s（r=-1 全0，r=s 全1）
    """
    ks = _canonical(ks)
    kernel = NestedSumKernel.finite(n, theta)
    m = np.arange(n + 1)
    memo: Dict = {}
    s = len(ks)
    table = np.zeros((s + 2, n + 1))
    for r in range(1, s + 1):
        k_r = ks[r - 1]
        row = np.zeros(n + 1)
        for j in range(r):
            lowers = [ks[r - 1 - q] for q in range(j)]
            with np.errstate(invalid='ignore'):
                row += kernel.coef(ks[r - 1 - j], j, m) * kernel.nested(lowers, memo)
        row[m <= k_r] = 1.0
        table[r] = row
    table[s + 1] = 1.0
    return table


def t_exact_ratio(m: int, ks, r: int, theta: float) -> float:
    """
    恰好用掉r次选择的权重比 T_r(m; k)/(P_m)! = T_{≤r} - T_{≤r-1}
    """
    ks = _canonical(ks)
    if not 0 <= r <= len(ks):
        raise DomainError(f"r 必须在 [0, {len(ks)}] 内，当前为 {r}")
    kernel = NestedSumKernel.finite(max(m, 1), theta)
    memo: Dict = {}

    def upto(level: int) -> float:
        if level < 0:
            return 0.0
        if level >= len(ks):
            return 1.0
        return t_leq_value(kernel, ks[:level + 1], m, memo)

    return upto(r) - upto(r - 1)


def win_ratio(n: int, ks, theta: float, use_delta: bool = True) -> float:
    """
    W(N; k_1..k_s)/(P_N)!：策略的获胜概率（闭式）
    Note:
        - k_1=0 时先剥离“第一个即最优”的概率 θ^{N-1}/P_N
    """
    n = validate_positive_int(n, 'n')
    ks = _canonical(ks)
    return win_value(NestedSumKernel.finite(n, theta), ks, use_delta)


def win_ratio_recurrence(n: int, ks, theta: float) -> float:
    """
    W 的递推计算
        w_r(m+1) = c[m+1]·w_r(m) + (1/P_{m+1})·t_r(m)，w_r(k_r) = w_{r-1}(k_r)，w_1(k_1) = 0
    """
    n = validate_positive_int(n, 'n')
    ks = [k for k in _canonical(ks) if k <= n]
    cache = poly_cache(validate_theta(theta), n)
    c = cache.continue_ratio()
    t_rows = _t_recurrence_rows(cache, n, ks)
    w_prev = np.zeros(n + 1)
    for r, k in enumerate(ks, start=1):
        w = np.zeros(n + 1)
        w[k] = w_prev[k]
        for m in range(k, n):
            w[m + 1] = c[m + 1] * w[m] + cache.inv_p[m + 1] * t_rows[r][m]
        w_prev = w
    return float(w_prev[n])


def w_exact_ratio(n: int, ks, r: int, theta: float) -> float:
    """最优者恰好被第r次选择选中的概率 W_r = W(k_1..k_r) - W(k_1..k_{r-1})"""
    ks = _canonical(ks)
    if not 1 <= r <= len(ks):
        raise DomainError(f"r 必须在 [1, {len(ks)}] 内，当前为 {r}")
    kernel = NestedSumKernel.finite(validate_positive_int(n, 'n'), theta)
    memo: Dict = {}
    previous = win_value(kernel, ks[:r - 1], memo=memo) if r > 1 else 0.0
    return win_value(kernel, ks[:r], memo=memo) - previous


def decomposition(n: int, ks, theta: float) -> pd.DataFrame:
    """
    按选择次数分解：每个r的 T_r（恰用r次）与 W_r（第r次选中最优者）
    """
    ks = _canonical(ks)
    s = len(ks)
    rows = []
    for r in range(s + 1):
        rows.append({
            'r': r,
            't_exact': t_exact_ratio(n, ks, r, theta),
            'w_exact': w_exact_ratio(n, ks, r, theta) if r >= 1 else 0.0,
        })
    df = pd.DataFrame(rows, columns=['r', 't_exact', 'w_exact'])
    logger.debug(f"分解完成: n={n}, ks={ks}, θ={theta}")
    return df
