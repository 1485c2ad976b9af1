"""
Mallows模型基础模块
排列工具、Kendall逆序数、Mallows权重与抽样，以及θ多项式 P_i(θ)=1+θ+…+θ^{i-1}
"""
import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from config import config

from .base_solver import (DomainError, ResourceLimitError, ThetaLike,
                          as_rational_theta, validate_positive_int, validate_theta)

logger = logging.getLogger(__name__)

Permutation = Tuple[int, ...]


def validate_permutation(values: Sequence[int]) -> Permutation:
    """校验排列是 {1..n} 上的双射"""
    pi = tuple(int(v) for v in values)
    if not pi or sorted(pi) != list(range(1, len(pi) + 1)):
        raise DomainError(f"不是合法排列: {values!r}")
    return pi


def kendall_tau(pi: Sequence[int]) -> int:
    """
    计算排列的逆序数（到单位排列的Kendall距离）
    Args:
        pi: 排列
    Returns:
        满足 a<b 且 pi[a]>pi[b] 的位置对数目
    """
    a = np.asarray(pi)
    return int(np.count_nonzero(np.triu(a[:, None] > a[None, :], k=1)))


def prefix_relabel(pi: Sequence[int], k: int) -> Permutation:
    """
    前k个元素按相对大小重新编号
    Args:
        pi: 排列（或任意互异整数序列）
        k: 前缀长度，1 ≤ k ≤ len(pi)
    Returns:
        长度为k的排列
    Raises:
        DomainError: k越界时
    """
    if not 1 <= k <= len(pi):
        raise DomainError(f"前缀长度 k={k} 超出范围 [1, {len(pi)}]")
    head = np.asarray(pi[:k])
    return tuple(int(r) + 1 for r in np.argsort(np.argsort(head, kind='stable'), kind='stable'))


def inversion_table(pi: Sequence[int]) -> Tuple[int, ...]:
    """左逆序表: v_i = 位置i之前比pi[i]大的元素个数"""
    return tuple(sum(1 for a in pi[:i] if a > pi[i]) for i in range(len(pi)))


def decode_inversion_table(v: Sequence[int]) -> Permutation:
    """
    由左逆序表还原排列
    Note:
        - 位置i的元素在前i个元素中的升序名次为 i - v_i
        - 从后往前依次从剩余值中取出对应名次的值
    """
    n = len(v)
    remaining = list(range(1, n + 1))
    pi = [0] * n
    for i in range(n, 0, -1):
        vi = int(v[i - 1])
        if not 0 <= vi < i:
            raise DomainError(f"逆序表第{i}项越界: {vi}")
        pi[i - 1] = remaining.pop(i - vi - 1)
    return tuple(pi)


def children(sigma: Permutation) -> Tuple[Permutation, ...]:
    """长度为l的前缀的l+1个子前缀 f_1(σ)…f_{l+1}(σ)，f_j 以相对值j结尾"""
    l = len(sigma)
    return tuple(
        tuple(v + 1 if v >= j else v for v in sigma) + (j,)
        for j in range(1, l + 2)
    )


def is_eligible(sigma: Permutation, n: int) -> bool:
    """前缀以从左到右最大值结尾，或长度为n"""
    return len(sigma) == n or sigma[-1] == len(sigma)


def apply_prefix_bijection(tau: Permutation, sigma: Permutation) -> Permutation:
    """
    受限双射 g_τ：σ 以 [12…k] 为前缀时，把前k个元素按 τ 的相对次序重排
    """
    k = len(tau)
    head = sigma[:k]
    if list(head) != sorted(head):
        raise DomainError(f"{sigma} 不以 [12…{k}] 为前缀")
    ordered = sorted(head)
    return tuple(ordered[t - 1] for t in tau) + tuple(sigma[k:])


def p_value(i: int, theta: ThetaLike) -> Union[float, Fraction]:
    """
    θ模拟整数 P_i(θ) = 1 + θ + … + θ^{i-1}
    Note:
        - P_0 = 0
        - θ为有理数时返回精确Fraction
    """
    if i < 0:
        raise DomainError(f"i 必须非负，当前为 {i}")
    if isinstance(theta, Rational) and not isinstance(theta, bool):
        t = Fraction(theta)
        return sum((t ** j for j in range(i)), Fraction(0))
    t = validate_theta(theta)
    if t == 1.0:
        return float(i)
    lt = math.log(t)
    return math.expm1(i * lt) / math.expm1(lt)


def q_factorial(n: int, theta: ThetaLike) -> Union[float, Fraction]:
    """(P_n)! = P_1·P_2·…·P_n，即Mallows模型的配分函数"""
    if isinstance(theta, Rational) and not isinstance(theta, bool):
        result = Fraction(1)
        for i in range(1, n + 1):
            result *= p_value(i, theta)
        return result
    return math.exp(float(np.sum(poly_cache(validate_theta(theta), max(n, 1)).log_p[1:n + 1])))


def q_binomial(n: int, m: int, theta: ThetaLike) -> Union[float, Fraction]:
    """
    Gaussian二项式 B(n, m) = Π_{i=1}^{m} P_{n+i} / P_i
    Note:
        - 采用P比值的乘积形式，θ=1时自然退化为组合数 C(n+m, n)
    """
    if n < 0 or m < 0:
        raise DomainError(f"B(n, m) 要求 n, m ≥ 0，当前为 ({n}, {m})")
    if isinstance(theta, Rational) and not isinstance(theta, bool):
        result = Fraction(1)
        for i in range(1, m + 1):
            result *= p_value(n + i, theta) / p_value(i, theta)
        return result
    cache = poly_cache(validate_theta(theta), n + m)
    log_b = np.sum(cache.log_p[n + 1:n + m + 1]) - np.sum(cache.log_p[1:m + 1])
    return math.exp(float(log_b))


@dataclass(frozen=True)
class PolyCache:
    """
    预计算的 P_i(θ)、1/P_i 与 log P_i（0 ≤ i ≤ n）
    Note:
        - P_0 = 0 没有倒数，inv_p[0] 置0且不参与任何求和
        - θ>1 时 P_i 会溢出，所有比值都应通过 log_p 计算
    """
    theta: float
    n: int
    p: np.ndarray
    inv_p: np.ndarray
    log_p: np.ndarray

    @classmethod
    def build(cls, theta: float, n: int) -> 'PolyCache':
        theta = validate_theta(theta)
        n = validate_positive_int(n, 'n', minimum=0)
        i = np.arange(n + 1, dtype=float)
        with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
            if theta == 1.0:
                log_p = np.log(i)
                inv_p = 1.0 / i
            elif theta < 1.0:
                lt = math.log(theta)
                log_p = np.log(-np.expm1(i * lt)) - math.log(-math.expm1(lt))
                inv_p = -math.expm1(lt) / -np.expm1(i * lt)
            else:
                lt = math.log(theta)
                log_p = i * lt + np.log(-np.expm1(-i * lt)) - math.log(math.expm1(lt))
                inv_p = math.expm1(lt) * np.exp(-i * lt) / -np.expm1(-i * lt)
            p = np.exp(log_p)
        log_p[0] = -np.inf
        inv_p[0] = 0.0
        p[0] = 0.0
        for arr in (p, inv_p, log_p):
            arr.setflags(write=False)
        return cls(theta=theta, n=n, p=p, inv_p=inv_p, log_p=log_p)

    @property
    def log_theta(self) -> float:
        return math.log(self.theta)

    def power_ratio(self, exponent, k, m) -> np.ndarray:
        """θ^exponent · P_k / P_m（对数空间计算，P_k=0 时结果为0）"""
        exponent = np.asarray(exponent, dtype=float)
        with np.errstate(invalid='ignore'):
            log_val = exponent * self.log_theta + self.log_p[np.asarray(k)] - self.log_p[np.asarray(m)]
        return np.exp(log_val)

    def scaled_power(self, exponent, m) -> np.ndarray:
        """θ^exponent / P_m"""
        exponent = np.asarray(exponent, dtype=float)
        return np.exp(exponent * self.log_theta - self.log_p[np.asarray(m)])

    def continue_ratio(self) -> np.ndarray:
        """c[k] = θ·P_{k-1}/P_k = 1 - 1/P_k，k ≥ 1"""
        c = np.zeros(self.n + 1)
        if self.n >= 2:
            k = np.arange(2, self.n + 1)
            c[2:] = np.exp(self.log_theta + self.log_p[k - 1] - self.log_p[k])
        return c


@lru_cache(maxsize=64)
def poly_cache(theta: float, n: int) -> PolyCache:
    """带缓存的PolyCache构造，PolyCache不可变，可在线程间共享"""
    return PolyCache.build(theta, n)


def sample_inversion_tables(n: int, theta: float, size: int,
                            rng: np.random.Generator) -> np.ndarray:
    """
    批量抽取Mallows排列的左逆序表
    Args:
        n: 排列长度
        theta: 离散参数
        size: 样本数
        rng: numpy随机数生成器
    Returns:
        形状为 (size, n) 的整数数组，第i列取值于 {0..i-1}，P(v_i=j) ∝ θ^j
    Note:
        - 各列相互独立，逆序数之和即Kendall距离
        - 截断几何分布用逆CDF抽样
    """
    theta = validate_theta(theta)
    i = np.arange(1, n + 1, dtype=float)
    u = rng.random((size, n))
    if theta == 1.0:
        v = np.floor(u * i)
    else:
        lt = math.log(theta)
        u = 1.0 - u  # (0, 1]
        if theta < 1.0:
            x = np.log1p(-u * -np.expm1(i * lt)) / lt
        else:
            x = i + np.log(u + (1.0 - u) * np.exp(-i * lt)) / lt
        v = np.ceil(x) - 1.0
    return np.clip(v, 0, i - 1).astype(np.int64)


def sample_mallows(n: int, theta: float, rng_seed: Optional[int] = None) -> Permutation:
    """
    按Mallows分布抽取一个排列（固定种子时结果确定）
    """
    n = validate_positive_int(n, 'n')
    rng = np.random.default_rng(rng_seed)
    return decode_inversion_table(sample_inversion_tables(n, theta, 1, rng)[0])


def mallows_pmf_table(n: int, theta: ThetaLike, cap: int = config.ENUMERATION_CAP) -> pd.DataFrame:
    """
    S_n 上Mallows分布的精确概率表
    Args:
        n: 排列长度
        theta: 有理数θ
        cap: 枚举上限
    Returns:
        DataFrame，列为 permutation / inversions / weight / probability，
        weight = θ^{c(π)}，probability 为精确Fraction
    Raises:
        ResourceLimitError: n 超过上限时
    """
    n = validate_positive_int(n, 'n')
    if n > cap:
        raise ResourceLimitError(f"n={n} 超过枚举上限 {cap}")
    t = as_rational_theta(theta)
    powers = [t ** c for c in range(n * (n - 1) // 2 + 1)]
    rows = []
    for pi in itertools.permutations(range(1, n + 1)):
        c = kendall_tau(pi)
        rows.append((pi, c, powers[c]))
    df = pd.DataFrame(rows, columns=['permutation', 'inversions', 'weight'])
    total = sum(df['weight'], Fraction(0))
    df['probability'] = [w / total for w in df['weight']]
    logger.debug(f"已生成 n={n}, θ={t} 的Mallows概率表，共 {len(df)} 行")
    return df
