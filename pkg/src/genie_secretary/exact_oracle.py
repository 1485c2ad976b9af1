"""
精确枚举模块
小规模n下对 S_n 做穷举：精确有理数胜率、前缀树概率 Q_i / Q_i° / Q̄_i、
打击集(strike set)构造以及双射不变性校验
"""
import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import ClassVar, Dict, FrozenSet, Iterable, List, Sequence, Tuple, Union

from config import config

from .base_solver import (BaseSolver, DomainError, GENIE, ResourceLimitError,
                          ThetaLike, as_rational_theta, parse_int_list, validate_model,
                          validate_positive_int)
from .mallows_core import (Permutation, apply_prefix_bijection, children,
                           is_eligible, kendall_tau)


@dataclass(frozen=True)
class StrategyThresholds:
    """
    (k_1,…,k_s) 阈值策略：第i次选择前拒绝前 k_i 个候选人，之后接受下一个从左到右最大值
    """
    ks: Tuple[int, ...]

    def __post_init__(self):
        ks = tuple(int(k) for k in self.ks)
        if not ks:
            raise DomainError("阈值序列不能为空")
        if any(k < 0 for k in ks):
            raise DomainError(f"阈值必须非负: {ks}")
        if any(b < a for a, b in zip(ks, ks[1:])):
            raise DomainError(f"阈值必须单调不减: {ks}")
        object.__setattr__(self, 'ks', ks)

    @classmethod
    def of(cls, value: Union['StrategyThresholds', str, Iterable[int]]) -> 'StrategyThresholds':
        if isinstance(value, StrategyThresholds):
            return value
        return cls(parse_int_list(value))

    @property
    def s(self) -> int:
        return len(self.ks)

    def canonical(self) -> 'StrategyThresholds':
        """重复阈值改写为严格递增形式 k'_{i+1} = max(k_{i+1}, k'_i + 1)"""
        out = [self.ks[0]]
        for k in self.ks[1:]:
            out.append(max(k, out[-1] + 1))
        return StrategyThresholds(tuple(out))

    def right_aligned(self) -> Tuple[int, ...]:
        """按右对齐顺序 (a_1,…,a_s) = (k_s,…,k_1) 返回"""
        return tuple(reversed(self.ks))

    def __iter__(self):
        return iter(self.ks)

    def __len__(self):
        return len(self.ks)


@dataclass(frozen=True)
class PlayOutcome:
    won: bool
    selections: int
    stop_position: int
    capture_index: int = 0  # 第几次选择选中了最优者，0表示未选中


def play_strategy(pi: Sequence[int], strategy: StrategyThresholds, model: str) -> PlayOutcome:
    """
    在单个排列上执行阈值策略
    Note:
        - Genie: 有剩余询问时每次选择都会询问，得到“是”立即停止；第s次选择不询问，选完即停
        - Dowry: 一直面试到第n位，除非s次选择提前用完
    """
    ks = strategy.canonical().ks
    s = len(ks)
    n = len(pi)
    used = 0
    best_so_far = 0
    won = False
    capture = 0
    for pos, value in enumerate(pi, start=1):
        if value <= best_so_far:
            continue
        best_so_far = value
        if used == s or pos <= ks[used]:
            continue
        used += 1
        if value == n:
            won = True
            capture = used
            if model == GENIE:
                return PlayOutcome(True, used, pos, capture)
        if used == s:
            return PlayOutcome(won, used, pos, capture)
    return PlayOutcome(won, used, n, capture)


@dataclass
class ExactOutcomes:
    """穷举得到的精确分布（均已按配分函数归一化）"""
    win: Fraction
    selections: Dict[int, Fraction]
    captures: Dict[int, Fraction]
    stops: Dict[int, Fraction]
    winning_stops: Dict[int, Fraction]

    def expected_selections(self, conditional: bool = False) -> Fraction:
        if conditional:
            return sum((r * w for r, w in self.captures.items()), Fraction(0)) / self.win
        return sum((r * w for r, w in self.selections.items()), Fraction(0))


@dataclass
class PrefixProbabilities:
    """
    每个前缀σ的 SD(σ)、Q_i(σ)、Q_i°(σ)、Q̄_i(σ)，i = 0..s-1
    """
    n: int
    s: int
    theta: Fraction
    sd: Dict[Permutation, Fraction]
    win: Dict[Permutation, Fraction]
    q: Dict[Permutation, Tuple[Fraction, ...]]
    qo: Dict[Permutation, Tuple[Fraction, ...]]
    qbar: Dict[Permutation, Tuple[Fraction, ...]]

    ROOT: ClassVar[Permutation] = (1,)

    def type_positive(self, sigma: Permutation, i: int) -> bool:
        """Q_i(σ) ≥ Q_i°(σ)，相等时视为接受"""
        return self.q[sigma][i] >= self.qo[sigma][i]

    def win_probability(self, s: int = None) -> Fraction:
        s = self.s if s is None else s
        return self.qbar[self.ROOT][s - 1]

    def to_json(self) -> Dict[str, Dict[str, List[str]]]:
        """前缀树导出为 {前缀: {q: [...], qo: [...]}}，数值为分数字符串"""
        return {
            ''.join(str(v) for v in sigma) if self.n < 10 else ' '.join(str(v) for v in sigma): {
                'q': [str(x) for x in self.q[sigma]],
                'qo': [str(x) for x in self.qo[sigma]],
            }
            for sigma in sorted(self.q, key=lambda p: (len(p), p))
        }


@dataclass
class StrikeSet:
    """分层打击集 A_{s-1} ∪ … ∪ A_0"""
    n: int
    s: int
    layers: Dict[int, FrozenSet[Permutation]]
    chain_length: int = 0
    violations: List[str] = field(default_factory=list)

    def members(self) -> FrozenSet[Permutation]:
        return frozenset().union(*self.layers.values()) if self.layers else frozenset()

    def win_probability(self, probs: PrefixProbabilities) -> Fraction:
        """Σ_{σ∈A} Q_0(σ)·SD(σ) / SD([1])"""
        total = sum((probs.win[sigma] for sigma in self.members()), Fraction(0))
        return total / probs.sd[PrefixProbabilities.ROOT]

    def to_json(self) -> Dict[str, List[str]]:
        return {
            f"A{i}": sorted(''.join(str(v) for v in sigma) for sigma in self.layers[i])
            for i in sorted(self.layers, reverse=True)
        }


@dataclass
class InvarianceReport:
    checks: int = 0
    counterexamples: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.counterexamples

    def record(self, ok: bool, message: str) -> None:
        self.checks += 1
        if not ok:
            self.counterexamples.append(message)


@lru_cache(maxsize=32)
def _weighted_permutations(n: int, theta: Fraction) -> Tuple[Tuple[Permutation, Fraction], ...]:
    powers = [theta ** c for c in range(n * (n - 1) // 2 + 1)]
    return tuple((pi, powers[kendall_tau(pi)]) for pi in itertools.permutations(range(1, n + 1)))


class ExactOracle(BaseSolver):
    """
    S_n 穷举求解器，仅在 n ≤ cap 时可用
    """

    def __init__(self, n: int, theta: ThetaLike, cap: int = config.ENUMERATION_CAP):
        super().__init__()
        self.n = validate_positive_int(n, 'n')
        if self.n > cap:
            raise ResourceLimitError(f"n={self.n} 超过枚举上限 {cap}")
        self.theta = as_rational_theta(theta)
        self._prefix_cache: Dict[int, PrefixProbabilities] = {}

    @property
    def permutations(self) -> Tuple[Tuple[Permutation, Fraction], ...]:
        return _weighted_permutations(self.n, self.theta)

    @property
    def partition_function(self) -> Fraction:
        return sum((w for _, w in self.permutations), Fraction(0))

    def enumerate_win_prob(self, strategy, model: str = GENIE) -> Fraction:
        """逐个排列执行策略，返回获胜排列的归一化权重之和"""
        strategy = StrategyThresholds.of(strategy)
        model = validate_model(model)
        won = sum((w for pi, w in self.permutations if play_strategy(pi, strategy, model).won),
                  Fraction(0))
        return won / self.partition_function

    def outcome_table(self, strategy, model: str = GENIE) -> ExactOutcomes:
        """
        穷举得到胜率、选择次数分布、捕获序号分布及停止位置分布
        """
        strategy = StrategyThresholds.of(strategy)
        model = validate_model(model)
        z = self.partition_function
        selections: Dict[int, Fraction] = defaultdict(Fraction)
        captures: Dict[int, Fraction] = defaultdict(Fraction)
        stops: Dict[int, Fraction] = defaultdict(Fraction)
        winning_stops: Dict[int, Fraction] = defaultdict(Fraction)
        win = Fraction(0)
        for pi, w in self.permutations:
            outcome = play_strategy(pi, strategy, model)
            p = w / z
            selections[outcome.selections] += p
            stops[outcome.stop_position] += p
            if outcome.won:
                win += p
                captures[outcome.capture_index] += p
                winning_stops[outcome.stop_position] += p
        return ExactOutcomes(win, dict(selections), dict(captures), dict(stops), dict(winning_stops))

    def prefix_probabilities(self, s: int) -> PrefixProbabilities:
        """
        按长度倒推计算所有前缀的 Q_i、Q_i°、Q̄_i
        Note:
            - 叶子(长度n): Q_0 = [末位为n]，Q_i° = 0
            - SD(σ) = Σ_j SD(f_j(σ))；Q_i°(σ) 为子前缀 Q̄_i 按 SD 加权的组合
            - Q_i(σ) = Q_0(σ) + Q_{i-1}°(σ)
        """
        s = validate_positive_int(s, 's')
        if s in self._prefix_cache:
            return self._prefix_cache[s]
        n, theta = self.n, self.theta
        sd: Dict[Permutation, Fraction] = {}
        win: Dict[Permutation, Fraction] = {}
        q: Dict[Permutation, Tuple[Fraction, ...]] = {}
        qo: Dict[Permutation, Tuple[Fraction, ...]] = {}
        qbar: Dict[Permutation, Tuple[Fraction, ...]] = {}

        def expand(sigma: Permutation, weight: Fraction) -> Tuple[Fraction, Fraction]:
            # 返回 (SD(σ), 之后不再出现新最大值的叶子权重)
            l = len(sigma)
            if l == n:
                no_new_max = weight
                total = weight
                rej = [Fraction(0)] * s
            else:
                total = Fraction(0)
                no_new_max = Fraction(0)
                rej_num = [Fraction(0)] * s
                for j, child in enumerate(children(sigma), start=1):
                    # 新元素相对值为j，前面比它大的有 l+1-j 个
                    child_sd, child_no_max = expand(child, weight * theta ** (l + 1 - j))
                    total += child_sd
                    if j <= l:
                        no_new_max += child_no_max
                    for i in range(s):
                        rej_num[i] += qbar[child][i] * child_sd
                rej = [x / total for x in rej_num]
            sd[sigma] = total
            win[sigma] = no_new_max if sigma[-1] == l else Fraction(0)
            q0 = win[sigma] / total
            acc = [q0] + [q0 + rej[i - 1] for i in range(1, s)]
            q[sigma] = tuple(acc)
            qo[sigma] = tuple(rej)
            qbar[sigma] = tuple(max(a, b) for a, b in zip(acc, rej))
            return total, no_new_max

        expand(PrefixProbabilities.ROOT, Fraction(1))
        probs = PrefixProbabilities(n, s, theta, sd, win, q, qo, qbar)
        self._prefix_cache[s] = probs
        self.logger.info(f"前缀树概率计算完成: n={n}, θ={theta}, s={s}, 前缀数 {len(q)}")
        return probs

    def optimal_thresholds(self, s: int) -> StrategyThresholds:
        """在递增前缀 [12…k] 上读取类型转折点，得到最优阈值"""
        probs = self.prefix_probabilities(s)
        ks = [0] * s
        for j in range(s):
            k_j = 0
            for k in range(1, self.n + 1):
                if not probs.type_positive(tuple(range(1, k + 1)), j):
                    k_j = k
            ks[s - 1 - j] = k_j
        return StrategyThresholds(tuple(ks))

    def _accepted_below(self, probs: PrefixProbabilities, sigma: Permutation,
                        i: int) -> Dict[int, set]:
        # 在σ的子树中寻找第一批合格且 i-正 的前缀
        layers: Dict[int, set] = defaultdict(set)
        stack = list(children(sigma))
        while stack:
            phi = stack.pop()
            if is_eligible(phi, self.n) and probs.type_positive(phi, i):
                layers[i].add(phi)
                if i >= 1 and len(phi) < self.n:
                    for j, found in self._accepted_below(probs, phi, i - 1).items():
                        layers[j] |= found
            elif len(phi) < self.n:
                stack.extend(children(phi))
        return layers

    def build_strike_set(self, s: int) -> StrikeSet:
        """
        从根前缀 [1] 出发构造分层打击集
        Returns:
            StrikeSet，并附带结构校验结果（合格性、s-极小性、覆盖性、类型正性）
        """
        probs = self.prefix_probabilities(s)
        root = PrefixProbabilities.ROOT
        top = s - 1
        if probs.type_positive(root, top):
            layers: Dict[int, set] = defaultdict(set)
            layers[top].add(root)
            if top >= 1 and self.n > 1:
                for j, found in self._accepted_below(probs, root, top - 1).items():
                    layers[j] |= found
        else:
            layers = self._accepted_below(probs, root, top)
        strike = StrikeSet(self.n, s, {i: frozenset(v) for i, v in layers.items() if v})
        self._validate_strike_set(strike, probs)
        if strike.violations:
            self.logger.warning(f"打击集结构校验失败: {strike.violations[:3]}")
        return strike

    def _validate_strike_set(self, strike: StrikeSet, probs: PrefixProbabilities) -> None:
        members = strike.members()
        for i, layer in strike.layers.items():
            for sigma in layer:
                if not is_eligible(sigma, self.n):
                    strike.violations.append(f"{sigma} 不合格")
                if not probs.type_positive(sigma, i):
                    strike.violations.append(f"{sigma} 在第{i}层不是类型正的")
        chain = 0
        for sigma in members:
            depth = sum(1 for k in range(1, len(sigma) + 1) if _relabel(sigma[:k]) in members)
            chain = max(chain, depth)
        strike.chain_length = chain
        if chain > strike.s:
            strike.violations.append(f"链长 {chain} 超过 s={strike.s}")
        for pi, _ in self.permutations:
            if not any(_relabel(pi[:k]) in members for k in range(1, self.n + 1)):
                strike.violations.append(f"排列 {pi} 未被覆盖")

    def invariance_suite(self, s: int) -> InvarianceReport:
        """
        穷举校验:
            (a) Q_i(σ) 只依赖 (|σ|, 末位相对值)
            (b) Q_i°(σ) 只依赖 |σ|
            (c) g_τ 保持 Q_i、Q_i° 以及合格前缀的类型 i-正性
            (d) 递增前缀上的单次转折
            (e) Kendall 统计量的前缀等变性
        """
        probs = self.prefix_probabilities(s)
        report = InvarianceReport()
        by_last: Dict[Tuple[int, int], Tuple[Fraction, ...]] = {}
        by_len: Dict[int, Tuple[Fraction, ...]] = {}
        for sigma in probs.q:
            key = (len(sigma), sigma[-1])
            ref = by_last.setdefault(key, probs.q[sigma])
            report.record(ref == probs.q[sigma], f"(a) Q{sigma} != Q@{key}")
            ref_o = by_len.setdefault(len(sigma), probs.qo[sigma])
            report.record(ref_o == probs.qo[sigma], f"(b) Q°{sigma} != Q°@len{len(sigma)}")

        for k in range(1, self.n):
            identity = tuple(range(1, k + 1))
            descendants = [sigma for sigma in probs.q
                           if len(sigma) > k and _relabel(sigma[:k]) == identity]
            for tau in itertools.permutations(range(1, k + 1)):
                if not is_eligible(tau, self.n):
                    continue
                for sigma in descendants:
                    image = apply_prefix_bijection(tau, sigma)
                    report.record(probs.q[sigma] == probs.q[image] and probs.qo[sigma] == probs.qo[image],
                                  f"(c) g_{tau} 改变了 {sigma} 的概率")
                    if is_eligible(sigma, self.n):
                        for i in range(s):
                            report.record(probs.type_positive(sigma, i) == probs.type_positive(image, i),
                                          f"(c) g_{tau} 改变了 {sigma} 的 {i}-类型")
                c_shift = kendall_tau(identity) - kendall_tau(tau)
                for pi, _ in self.permutations:
                    if list(pi[:k]) == sorted(pi[:k]):
                        image = apply_prefix_bijection(tau, pi)
                        report.record(kendall_tau(pi) - kendall_tau(image) == c_shift,
                                      f"(e) {pi} 在 g_{tau} 下逆序数变化不符")

        for i in range(s):
            for k in range(2, self.n + 1):
                longer = tuple(range(1, k + 1))
                if not probs.type_positive(longer, i):
                    report.record(not probs.type_positive(longer[:-1], i),
                                  f"(d) [1..{k}] 为 {i}-负 但 [1..{k - 1}] 为 {i}-正")
        if report.passed:
            self.logger.info(f"不变性校验通过: n={self.n}, θ={self.theta}, s={s}, 共 {report.checks} 项")
        else:
            self.logger.warning(f"不变性校验发现 {len(report.counterexamples)} 个反例")
        return report


def _relabel(head: Sequence[int]) -> Permutation:
    ordered = sorted(head)
    return tuple(ordered.index(v) + 1 for v in head)


def enumerate_win_prob(n: int, theta: ThetaLike, strategy, model: str = GENIE,
                       cap: int = config.ENUMERATION_CAP) -> Fraction:
    return ExactOracle(n, theta, cap).enumerate_win_prob(strategy, model)


def prefix_probabilities(n: int, theta: ThetaLike, s: int,
                         cap: int = config.ENUMERATION_CAP) -> PrefixProbabilities:
    return ExactOracle(n, theta, cap).prefix_probabilities(s)


def build_strike_set(n: int, theta: ThetaLike, s: int, cap: int = config.ENUMERATION_CAP) -> StrikeSet:
    return ExactOracle(n, theta, cap).build_strike_set(s)


def invariance_suite(n: int, theta: ThetaLike, s: int) -> InvarianceReport:
    if n > 6:
        raise ResourceLimitError(f"不变性校验只支持 n ≤ 6，当前 n={n}")
    return ExactOracle(n, theta).invariance_suite(s)
