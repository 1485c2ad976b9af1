"""
基础求解器模块
提供日志配置、异常类型以及参数校验等共享功能
"""
import logging
import math
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence, Tuple, Union

import pandas as pd

# 配置日志记录器
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S'
)

ThetaLike = Union[float, int, Fraction, str]

GENIE = 'genie'
DOWRY = 'dowry'
MODELS = (GENIE, DOWRY)


class DomainError(ValueError):
    """参数超出定义域（θ≤0、阈值非单调、k越界等）"""


class ResourceLimitError(RuntimeError):
    """精确枚举规模超过上限"""


class UndefinedResultError(ArithmeticError):
    """条件期望的条件事件概率为0"""


class ToleranceError(AssertionError):
    """数值交叉校验未通过"""


def validate_theta(theta: ThetaLike) -> float:
    """
    校验并转换θ参数
    Args:
        theta: Mallows模型的离散参数，必须为正的有限实数
    Returns:
        float形式的θ
    Raises:
        DomainError: θ不是正的有限实数时
    """
    try:
        value = float(Fraction(theta)) if isinstance(theta, str) else float(theta)
    except (TypeError, ValueError) as e:
        raise DomainError(f"无法解析θ: {theta!r}") from e
    if not math.isfinite(value) or value <= 0:
        raise DomainError(f"θ必须为正的有限实数，当前为 {theta!r}")
    return value


def as_rational_theta(theta: ThetaLike) -> Fraction:
    """
    将θ转换为精确有理数
    Args:
        theta: 整数、Fraction、十进制字符串或浮点数
    Returns:
        Fraction形式的θ
    Raises:
        DomainError: θ无法表示为正有理数时
    Note:
        - 浮点数按其十进制表示转换（0.3 -> 3/10），而不是二进制展开
    """
    if isinstance(theta, bool):
        raise DomainError("θ不能是布尔值")
    if isinstance(theta, Rational):
        value = Fraction(theta)
    elif isinstance(theta, str):
        try:
            value = Fraction(theta.strip())
        except ValueError as e:
            raise DomainError(f"无法解析θ: {theta!r}") from e
    elif isinstance(theta, float):
        if not math.isfinite(theta):
            raise DomainError(f"θ必须为有限值，当前为 {theta!r}")
        value = Fraction(repr(theta))
    else:
        raise DomainError(f"精确计算只接受有理数θ，当前类型为 {type(theta).__name__}")
    if value <= 0:
        raise DomainError(f"θ必须为正数，当前为 {theta!r}")
    return value


def validate_model(model: str) -> str:
    """校验选择模型名称"""
    model = str(model).lower()
    if model not in MODELS:
        raise DomainError(f"未知模型: {model}，可选 {MODELS}")
    return model


def validate_positive_int(value: int, name: str, minimum: int = 1) -> int:
    """校验整数参数不小于minimum"""
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise DomainError(f"{name} 必须为不小于 {minimum} 的整数，当前为 {value!r}")
    return int(value)


def parse_int_list(text: Union[str, Iterable[int]]) -> Tuple[int, ...]:
    """把 '0,1,3' 形式的字符串解析为整数元组"""
    if isinstance(text, str):
        parts = [p for p in text.replace(' ', '').split(',') if p]
        try:
            return tuple(int(p) for p in parts)
        except ValueError as e:
            raise DomainError(f"无法解析阈值列表: {text!r}") from e
    return tuple(int(v) for v in text)


class BaseSolver:
    """
    基础求解器类，提供共享功能
    所有求解器都持有以类名命名的日志记录器
    """

    def __init__(self):
        self.logger = logging.getLogger(self.__class__.__name__)

    @staticmethod
    def _validate_dataframe(df: pd.DataFrame, required_cols: Sequence[str]) -> bool:
        """
        验证DataFrame是否包含必要的列
        Args:
            df: 待验证的DataFrame
            required_cols: 必需的列名列表
        Returns:
            bool: 是否包含所有必需的列
        """
        return all(col in df.columns for col in required_cols)
