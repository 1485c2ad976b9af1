"""
渐近分析模块
N→∞ 时的胜率与最优阈值搜索：
    - θ<1：阈值按距末尾的距离 b_i 计，胜率为 H′ 项之和
    - θ>1：阈值按位置 a_i 计，无穷和截断并记录几何尾项上界
    - θ=1：阈值按比例 x_i 计，x_r = x_{r-1}·e^{I_{r-1}-1}
"""
import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
from numpy.polynomial import Polynomial
from scipy import integrate

from config import config

from .base_solver import (BaseSolver, DomainError, ThetaLike, validate_positive_int,
                          validate_theta)
from .exact_oracle import StrategyThresholds
from .strategy_eval import NestedSumKernel, t_leq_value, win_contributions

THETA_BELOW_1 = 'theta_below_1'
THETA_ABOVE_1 = 'theta_above_1'
UNIFORM = 'uniform'

HORIZON_LIMIT = 1 << 20
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class LimitProbability:
    """
    极限胜率
    Attributes:
        value: 胜率
        tail_bound: 截断误差上界（仅 θ>1 非零）
        contributions: 按右对齐编号的各阈值贡献 H_1..H_s，其和为 value
    """
    value: float
    tail_bound: float = 0.0
    contributions: Tuple[float, ...] = ()


@dataclass(frozen=True)
class AsymptoticThresholds:
    """
    右对齐的渐近最优阈值
    Note:
        - θ>1: a_1 ≥ a_2 ≥ … ≥ a_s
        - θ<1: b_1 ≤ b_2 ≤ … ≤ b_s
        - θ=1: x_1 > x_2 > … > x_s
    """
    regime: str
    theta: float
    values: Tuple
    win_probability: float
    contributions: Tuple[float, ...] = ()
    tail_bound: float = 0.0
    cap_hit: bool = False

    @property
    def s(self) -> int:
        return len(self.values)

    def to_finite_thresholds(self, n: int) -> StrategyThresholds:
        """
        换算为长度n时的升序阈值 (k_1..k_s)
        Note:
            - θ<1: k = n - b
            - θ=1: k = round(x·n)
        """
        n = validate_positive_int(n, 'n')
        if self.regime == THETA_ABOVE_1:
            ks = [min(a, n) for a in self.values]
        elif self.regime == THETA_BELOW_1:
            ks = [max(n - b, 0) for b in self.values]
        else:
            ks = [int(round(x * n)) for x in self.values]
        return StrategyThresholds(tuple(reversed(ks)))

    def to_frame(self) -> pd.DataFrame:
        label = {THETA_ABOVE_1: 'a', THETA_BELOW_1: 'b', UNIFORM: 'x'}[self.regime]
        df = pd.DataFrame({'i': range(1, self.s + 1), label: list(self.values)})
        if self.contributions:
            df['contribution'] = list(self.contributions)
        return df


def _validate_bs(bs: Sequence[int]) -> Tuple[int, ...]:
    bs = tuple(int(b) for b in bs)
    if not bs or bs[0] < 1:
        raise DomainError(f"b 序列必须非空且 b_1 ≥ 1: {bs}")
    if any(y < x for x, y in zip(bs, bs[1:])):
        raise DomainError(f"b 序列必须单调不减: {bs}")
    return bs


def _validate_as(as_: Sequence[int]) -> Tuple[int, ...]:
    as_ = tuple(int(a) for a in as_)
    if not as_ or as_[-1] < 0:
        raise DomainError(f"a 序列必须非空且非负: {as_}")
    if any(y > x for x, y in zip(as_, as_[1:])):
        raise DomainError(f"a 序列必须单调不增: {as_}")
    return as_


def _below_kernel(theta: float, bs: Tuple[int, ...]) -> Tuple[NestedSumKernel, Tuple[int, ...]]:
    # 虚拟右端点 U = b_max + 1，位置 k = U - b
    horizon = bs[-1] + 1
    kernel = NestedSumKernel.limit_below(theta, horizon)
    ks = StrategyThresholds(tuple(horizon - b for b in reversed(bs))).canonical().ks
    return kernel, ks


def _above_kernel(theta: float, ks: Sequence[int], value_of, tail_tol: float):
    """
    逐步加长截断点直到尾项上界不超过 tail_tol 倍的结果
    Returns:
        (kernel, value)
    """
    lt = math.log(theta)
    horizon = max(ks) + int(math.ceil(-math.log(tail_tol) / lt)) + 2
    while True:
        kernel = NestedSumKernel.limit_above(theta, horizon)
        value = value_of(kernel)
        if kernel.tail_bound <= tail_tol * max(abs(value), tail_tol) or horizon >= HORIZON_LIMIT:
            return kernel, value
        horizon *= 2


def asym_win_prob_low(theta: ThetaLike, bs: Sequence[int]) -> LimitProbability:
    """
    θ<1 的极限胜率
    Args:
        theta: 0 < θ < 1
        bs: 右对齐阈值 b_1 ≤ … ≤ b_s（距末尾的距离）
    """
    theta = validate_theta(theta)
    if theta >= 1.0:
        raise DomainError(f"asym_win_prob_low 要求 θ<1，当前为 {theta}")
    bs = _validate_bs(bs)
    kernel, ks = _below_kernel(theta, bs)
    groups = win_contributions(kernel, ks)
    return LimitProbability(float(sum(groups)), 0.0, tuple(reversed(groups)))


def asym_win_prob_high(theta: ThetaLike, as_: Sequence[int],
                       tail_tol: float = config.TAIL_TOL) -> LimitProbability:
    """
    θ>1 的极限胜率
    Args:
        theta: θ > 1
        as_: 右对齐阈值 a_1 ≥ … ≥ a_s
        tail_tol: 相对尾项容差
    """
    theta = validate_theta(theta)
    if theta <= 1.0:
        raise DomainError(f"asym_win_prob_high 要求 θ>1，当前为 {theta}")
    if tail_tol <= 0:
        raise DomainError(f"tail_tol 必须为正，当前为 {tail_tol}")
    as_ = _validate_as(as_)
    ks = StrategyThresholds(tuple(reversed(as_))).canonical().ks
    holder: Dict[str, List[float]] = {}

    def value_of(kernel):
        holder['groups'] = win_contributions(kernel, ks)
        return sum(holder['groups'])

    kernel, value = _above_kernel(theta, ks, value_of, tail_tol)
    return LimitProbability(float(value), kernel.tail_bound, tuple(reversed(holder['groups'])))


def limit_t_leq(theta: ThetaLike, values: Sequence[int], tail_tol: float = config.TAIL_TOL) -> List[float]:
    """
    lim T_{≤r}(N; k_1..k_{r+1})/(P_N)!，r = 0..s-1
    Args:
        values: θ<1 时为 b 序列，θ>1 时为 a 序列（右对齐）
    """
    theta = validate_theta(theta)
    if theta < 1.0:
        kernel, ks = _below_kernel(theta, _validate_bs(values))
        memo: Dict = {}
        return [t_leq_value(kernel, ks[:r + 1], memo=memo) for r in range(len(ks))]
    if theta > 1.0:
        ks = StrategyThresholds(tuple(reversed(_validate_as(values)))).canonical().ks
        holder: Dict[str, List[float]] = {}

        def value_of(kernel):
            memo: Dict = {}
            holder['t'] = [t_leq_value(kernel, ks[:r + 1], memo=memo) for r in range(len(ks))]
            return sum(holder['t'])

        _above_kernel(theta, ks, value_of, tail_tol)
        return holder['t']
    raise DomainError("θ=1 的极限请使用 uniform_t_leq_limit")


def limit_win_prefixes(theta: ThetaLike, values: Sequence[int],
                       tail_tol: float = config.TAIL_TOL) -> List[float]:
    """lim W(N; k_1..k_i)/(P_N)!，i = 1..s（右对齐输入）"""
    theta = validate_theta(theta)
    if theta < 1.0:
        kernel, ks = _below_kernel(theta, _validate_bs(values))
        memo: Dict = {}
        return [float(sum(win_contributions(kernel, ks[:i], memo=memo))) for i in range(1, len(ks) + 1)]
    if theta > 1.0:
        ks = StrategyThresholds(tuple(reversed(_validate_as(values)))).canonical().ks
        holder: Dict[str, List[float]] = {}

        def value_of(kernel):
            memo: Dict = {}
            holder['w'] = [float(sum(win_contributions(kernel, ks[:i], memo=memo)))
                           for i in range(1, len(ks) + 1)]
            return holder['w'][-1]

        _above_kernel(theta, ks, value_of, tail_tol)
        return holder['w']
    raise DomainError("θ=1 的极限请使用 uniform_win_limit")


def _log_nested(lowers: Sequence[float], upper: float, quad_tol: float = config.QUAD_TOL) -> float:
    """
    ∫_{L_1}^{X} dt_1/t_1 ∫_{L_2}^{t_1} dt_2/t_2 … ∫_{L_m}^{t_{m-1}} dt_m/t_m
    Note:
        - 换元 u = ln t 后内层都是多项式，用 Polynomial.integ 精确积分
        - 最外层对 F(ln t)/t 做数值积分
    """
    if not lowers:
        return 1.0
    logs = [math.log(v) for v in lowers]
    inner = Polynomial([1.0])
    for lb in reversed(logs[1:]):
        inner = inner.integ(lbnd=lb)
    value, _ = integrate.quad(lambda t: inner(math.log(t)) / t, lowers[0], upper,
                              epsabs=quad_tol, epsrel=quad_tol, limit=200)
    return float(value)


def _validate_ratios(ys: Sequence[float]) -> Tuple[float, ...]:
    ys = tuple(float(y) for y in ys)
    if not ys or ys[0] <= 0.0:
        raise DomainError(f"比例阈值必须为正: {ys}")
    if any(b < a for a, b in zip(ys, ys[1:])):
        raise DomainError(f"比例阈值必须单调不减: {ys}")
    return tuple(y for y in ys if y < 1.0)


def uniform_t_leq_limit(ys: Sequence[float], quad_tol: float = config.QUAD_TOL) -> float:
    """
    θ=1 时 lim T_{≤r-1}(N; k_1..k_r)/N!，k_i/N → y_i（升序）
        = y_r + Σ_{j≥1} y_{r-j}·∫_{y_r}^{1} dt_1/t_1 ∫_{y_{r-1}}^{t_1} … （j 层）
    """
    ys = _validate_ratios(ys)
    if not ys:
        return 1.0
    r = len(ys)
    total = 0.0
    for j in range(r):
        lowers = [ys[r - 1 - q] for q in range(j)]
        total += ys[r - 1 - j] * _log_nested(lowers, 1.0, quad_tol)
    return total


def uniform_win_limit(ys: Sequence[float], quad_tol: float = config.QUAD_TOL,
                      contributions: bool = False):
    """
    θ=1 时 lim W(N; k_1..k_s)/N!，k_i/N → y_i（升序）
    Args:
        contributions: True 时返回按系数 y_r 分组的各项（升序编号，与 win_contributions 一致）
    """
    ys = _validate_ratios(ys)
    bounds = list(ys) + [1.0]
    groups = [0.0] * len(ys)
    for r in range(1, len(ys) + 1):
        y_r = ys[r - 1]
        for j in range(r):
            lowers = [y_r] + [ys[r - 1 - q] for q in range(j)]
            groups[r - 1 - j] += ys[r - 1 - j] * _log_nested(lowers, bounds[r], quad_tol)
    return groups if contributions else float(sum(groups))


def _integral_term(log_x: Sequence[float], r: int, quad_tol: float) -> float:
    """
    I_{r-1} = Σ_{j=1}^{r-1} J_{r,j}，log_x[i] = ln x_i，log_x[0] = 0
    J_{r,j} 外层积分区间为 [ln x_{r-j}, ln x_{r-j-1}]，内层下界依次为 ln x_{r-j}, …, ln x_{r-1}
    """
    total = 0.0
    for j in range(1, r):
        inner = Polynomial([1.0])
        for lb in reversed([log_x[r - j + q] for q in range(j)]):
            inner = inner.integ(lbnd=lb)
        value, _ = integrate.quad(inner, log_x[r - j], log_x[r - j - 1],
                                  epsabs=quad_tol, epsrel=quad_tol, limit=200)
        total += value
    return total


def uniform_win_prob(xs: Sequence[float], quad_tol: float = config.QUAD_TOL) -> LimitProbability:
    """
    θ=1 的极限胜率 P = Σ H′_r，H′_r = x_r·(ln(x_{r-1}/x_r) + I_{r-1})
    Args:
        xs: 右对齐比例阈值 x_1 > x_2 > … > x_s
    """
    xs = tuple(float(x) for x in xs)
    if not xs or any(not 0.0 < x < 1.0 for x in xs):
        raise DomainError(f"x 必须位于 (0, 1): {xs}")
    if any(b >= a for a, b in zip(xs, xs[1:])):
        raise DomainError(f"x 序列必须严格递减: {xs}")
    log_x = [0.0] + [math.log(x) for x in xs]
    terms = []
    for r in range(1, len(xs) + 1):
        h = xs[r - 1] * (log_x[r - 1] - log_x[r] + _integral_term(log_x, r, quad_tol))
        terms.append(h)
    return LimitProbability(float(sum(terms)), 0.0, tuple(terms))


def uniform_thresholds(s: int, quad_tol: float = config.QUAD_TOL) -> AsymptoticThresholds:
    """θ=1 的最优比例阈值：x_0 = 1，x_r = x_{r-1}·e^{I_{r-1}-1}"""
    s = validate_positive_int(s, 's')
    log_x = [0.0]
    for r in range(1, s + 1):
        log_x.append(log_x[r - 1] + _integral_term(log_x, r, quad_tol) - 1.0)
    xs = tuple(math.exp(v) for v in log_x[1:])
    prob = uniform_win_prob(xs, quad_tol)
    return AsymptoticThresholds(UNIFORM, 1.0, xs, prob.value, prob.contributions)


class AsymptoticSolver(BaseSolver):
    """
    渐近最优阈值搜索器
    利用右对齐性质逐个确定阈值：先求 s=1 的最优阈值，再在其约束下求下一个
    """

    def __init__(self, cap: int = config.SEARCH_CAP, tail_tol: float = config.TAIL_TOL,
                 quad_tol: float = config.QUAD_TOL):
        super().__init__()
        self.cap = validate_positive_int(cap, 'cap')
        self.tail_tol = tail_tol
        self.quad_tol = quad_tol
        self.results: Dict[Tuple[float, int], AsymptoticThresholds] = {}

    def win_prob(self, theta: float, values: Sequence[int]) -> LimitProbability:
        if theta < 1.0:
            return asym_win_prob_low(theta, values)
        return asym_win_prob_high(theta, values, self.tail_tol)

    def _candidates(self, theta: float, chosen: Sequence[int]) -> range:
        if theta < 1.0:
            return range(chosen[-1] + 1 if chosen else 1, self.cap + 1)
        return range(0, (chosen[-1] if chosen else self.cap) + 1)

    def search_thresholds(self, theta: ThetaLike, s: int, joint: bool = False) -> AsymptoticThresholds:
        """
        逐个搜索右对齐阈值
        Args:
            theta: θ ≠ 1（θ=1 转交 uniform_thresholds）
            s: 选择次数
            joint: 额外在顺序解附近做联合网格搜索作为交叉校验
        Returns:
            AsymptoticThresholds，达到搜索上限时 cap_hit=True
        Note:
            - 胜率相同的候选取扫描顺序中的第一个
        """
        theta = validate_theta(theta)
        s = validate_positive_int(s, 's')
        if theta == 1.0:
            return uniform_thresholds(s, self.quad_tol)
        key = (theta, s)
        if key in self.results:
            return self.results[key]
        regime = THETA_BELOW_1 if theta < 1.0 else THETA_ABOVE_1
        try:
            chosen: List[int] = []
            best: Optional[LimitProbability] = None
            cap_hit = False
            for r in range(1, s + 1):
                best, best_value = None, None
                for v in self._candidates(theta, chosen):
                    prob = self.win_prob(theta, chosen + [v])
                    if best is None or prob.value > best.value * (1.0 + TIE_RTOL):
                        best, best_value = prob, v
                chosen.append(best_value)
                if best_value == self.cap:
                    cap_hit = True
                    self.logger.warning(f"θ={theta}, s={r} 的阈值达到搜索上限 {self.cap}")
                self.results.setdefault((theta, r), AsymptoticThresholds(
                    regime, theta, tuple(chosen), best.value, best.contributions, best.tail_bound, cap_hit))
            result = self.results[key]
            if joint:
                result = self._joint_check(theta, result)
        except Exception as e:
            self.logger.error(f"θ={theta}, s={s} 的阈值搜索失败: {e}")
            raise
        self.results[key] = result
        self.logger.info(f"θ={theta}, s={s}: 阈值 {result.values}, 胜率 {result.win_probability:.10g}")
        return result

    def _joint_check(self, theta: float, result: AsymptoticThresholds,
                     margin: int = 5) -> AsymptoticThresholds:
        """在顺序解附近穷举全部单调阈值组合，若找到更优解则记录警告并返回之"""
        values = result.values
        if theta < 1.0:
            pool = range(1, min(self.cap, max(values) + margin) + 1)
            combos = itertools.combinations(pool, len(values))
        else:
            pool = range(min(self.cap, max(values) + margin), -1, -1)
            combos = itertools.combinations_with_replacement(pool, len(values))
        best_values, best = values, self.win_prob(theta, values)
        for combo in combos:
            prob = self.win_prob(theta, combo)
            if prob.value > best.value * (1.0 + 1e-9):
                best_values, best = tuple(combo), prob
        if best_values != values:
            self.logger.warning(f"联合搜索找到更优阈值: {best_values} 优于 {values}")
            return AsymptoticThresholds(result.regime, theta, best_values, best.value,
                                        best.contributions, best.tail_bound, result.cap_hit)
        return result

    def sweep(self, thetas: Sequence[float], s_max: int) -> pd.DataFrame:
        """
        θ网格上的渐近最优阈值与胜率（与参考表 table1 同列）
        Returns:
            DataFrame，列为 theta / s / threshold / win_probability / cap_hit
        """
        rows = []
        for theta in thetas:
            self.search_thresholds(theta, s_max)
            for s in range(1, s_max + 1):
                head = self.search_thresholds(theta, s)
                rows.append({
                    'theta': float(theta),
                    's': s,
                    'threshold': head.values[-1],
                    'win_probability': head.win_probability,
                    'cap_hit': head.cap_hit,
                })
        return pd.DataFrame(rows)


def search_thresholds(theta: ThetaLike, s: int, cap: int = config.SEARCH_CAP,
                      joint: bool = False) -> AsymptoticThresholds:
    return AsymptoticSolver(cap=cap).search_thresholds(theta, s, joint)


def asymptotic_thresholds(theta: ThetaLike, s: int, cap: int = config.SEARCH_CAP) -> AsymptoticThresholds:
    """按θ所在区间分派到整数搜索或θ=1的比例递推"""
    theta = validate_theta(theta)
    if theta == 1.0:
        return uniform_thresholds(s)
    return search_thresholds(theta, s, cap)
