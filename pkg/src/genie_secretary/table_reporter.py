"""
结果表模块
重现四张结果表、与内置参考表逐格比对，并提供整体自检
"""
import json
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import pandas as pd

from config import config

from .asymptotics import AsymptoticSolver, asymptotic_thresholds, uniform_thresholds
from .base_solver import DOWRY, GENIE, BaseSolver, DomainError, ToleranceError
from .exact_oracle import ExactOracle, invariance_suite
from .expectations import limit_expected_selections, stopping_distribution
from .threshold_dp import ThresholdDP

OK = 'ok'
FLAGGED = 'flagged'
FAILED = 'failed'

REFERENCE_COLUMNS = {
    'table1': (('theta', 's'), ('threshold', 'win_probability')),
    'table2': (('theta',), ('unconditional', 'conditional')),
    'table3': (('s',), ('x', 'win_probability')),
    'table4': (('model', 'conditional', 's'), ('esr', 'whole_list')),
}

# 收敛较慢的θ区间，超出容差时只标记不判失败
SLOW_BAND = (0.9, 1.2)
TABLE2_REQUIRED = (0.1, 0.5, 1.0, 5.0)


def _in_band(theta: float) -> bool:
    return SLOW_BAND[0] < theta < SLOW_BAND[1]


def render(df: pd.DataFrame, fmt: str = 'csv', digits: int = 10) -> str:
    """
    按固定列顺序输出
    Args:
        fmt: csv（每个浮点数保留 digits 位有效数字）或 json（记录数组）
    """
    if fmt == 'csv':
        return df.to_csv(index=False, float_format=f'%.{digits}g')
    if fmt == 'json':
        records = json.loads(df.to_json(orient='records', double_precision=15))
        return json.dumps(records, ensure_ascii=False, indent=2)
    raise DomainError(f"未知输出格式: {fmt}")


class TableReporter(BaseSolver):
    """
    结果表重现器
    Args:
        reference_dir: 参考CSV所在目录
        search_cap: 渐近阈值搜索上限
        proxy_n: 期望停止位置的代理长度
        workers: 按θ并行的线程数，输出行顺序与θ网格一致
    """

    def __init__(self, reference_dir: Path, search_cap: int = config.SEARCH_CAP,
                 proxy_n: int = config.EXPECTATION_PROXY_N,
                 workers: int = 1, digits: int = 10):
        super().__init__()
        self.reference_dir = Path(reference_dir)
        self.search_cap = search_cap
        self.proxy_n = proxy_n
        self.workers = workers
        self.digits = digits
        self.solvers: Dict[float, AsymptoticSolver] = {}

    def _solver(self, theta: float) -> AsymptoticSolver:
        # 每个θ独立的求解器，线程之间不共享缓存
        if theta not in self.solvers:
            self.solvers[theta] = AsymptoticSolver(cap=self.search_cap)
        return self.solvers[theta]

    def _map(self, func, items: Sequence) -> List:
        if self.workers <= 1:
            return [func(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.workers) as ex:
            return list(ex.map(func, items))

    def load_reference(self, name: str) -> pd.DataFrame:
        """读取参考表并检查列"""
        if name not in REFERENCE_COLUMNS:
            raise DomainError(f"未知参考表: {name}")
        path = self.reference_dir / f'{name}.csv'
        try:
            df = pd.read_csv(path)
        except Exception as e:
            self.logger.error(f"参考表 {path} 读取失败: {e}")
            raise
        keys, values = REFERENCE_COLUMNS[name]
        if not self._validate_dataframe(df, keys + values):
            raise DomainError(f"参考表 {name} 缺少必要的列 {keys + values}")
        return df

    def table1(self, thetas: Sequence[float], s_max: int = 5) -> pd.DataFrame:
        """θ≠1 的渐近最优阈值与胜率"""
        thetas = [float(t) for t in thetas]
        for theta in thetas:
            self._solver(theta)
        frames = self._map(lambda t: self._solver(t).sweep([t], s_max), thetas)
        return pd.concat(frames, ignore_index=True)

    def _optimal(self, theta: float, s: int):
        if theta == 1.0:
            return uniform_thresholds(s)
        return self._solver(theta).search_thresholds(theta, s)

    def table2(self, thetas: Sequence[float], s: int = 5) -> pd.DataFrame:
        """最优策略下的期望选择次数（无条件 / 条件），N→∞"""
        thetas = [float(t) for t in thetas]
        for theta in thetas:
            if theta != 1.0:
                self._solver(theta)

        def row(theta: float) -> Dict:
            best = self._optimal(theta, s)
            return {
                'theta': theta,
                'unconditional': limit_expected_selections(best, conditional=False),
                'conditional': limit_expected_selections(best, conditional=True),
            }

        return pd.DataFrame(self._map(row, thetas))

    def table3(self, s_max: int = 5) -> pd.DataFrame:
        """θ=1 的最优比例阈值 x_s 与胜率"""
        best = uniform_thresholds(s_max)
        rows = []
        for s in range(1, s_max + 1):
            head = uniform_thresholds(s)
            rows.append({'s': s, 'x': best.values[s - 1], 'win_probability': head.win_probability})
        return pd.DataFrame(rows)

    def table4(self, s_max: int = 5, theta: float = 1.0) -> pd.DataFrame:
        """最优策略下的ESR与走完名单的概率，代理长度 proxy_n"""
        rows = []
        for model in (GENIE, DOWRY):
            for conditional in (False, True):
                for s in range(1, s_max + 1):
                    best = asymptotic_thresholds(theta, s, self.search_cap)
                    dist = stopping_distribution(self.proxy_n, best, theta, model, conditional)
                    rows.append({
                        'model': model,
                        'conditional': conditional,
                        's': s,
                        'esr': dist.expected_stop_ratio(),
                        'whole_list': dist.whole_list_probability(),
                    })
        return pd.DataFrame(rows)

    def _tolerance(self, name: str, key: Tuple, column: str) -> Tuple[float, str]:
        """
        返回 (容差, 超差时的状态)
        """
        if name == 'table1':
            theta = float(key[0])
            if _in_band(theta):
                return (1.0 if column == 'threshold' else 1e-4), FLAGGED
            return (0.0 if column == 'threshold' else 5e-7), FAILED
        if name == 'table2':
            theta = float(key[0])
            if _in_band(theta):
                return 1e-2, FLAGGED
            return 1e-4, FAILED if theta in TABLE2_REQUIRED else FLAGGED
        if name == 'table3':
            return 1e-9, FAILED
        model, conditional, s = key
        # genie / 无条件 / s=5 一行的参考值与闭式和模拟结果均不一致
        if model == GENIE and not conditional and int(s) == 5:
            return 1e-3, FLAGGED
        # 以获胜为条件且极限为0的走完名单概率按 1/N 衰减
        if conditional and column == 'whole_list' and (model == GENIE or int(s) == 1):
            return 1e-3, FLAGGED
        return 1e-3, FAILED

    def compare(self, name: str, reproduced: pd.DataFrame) -> pd.DataFrame:
        """
        逐格比对重现值与参考值
        Returns:
            DataFrame，列为键列 / column / reproduced / reference / diff / tolerance / status
        """
        reference = self.load_reference(name)
        keys, values = REFERENCE_COLUMNS[name]
        if not self._validate_dataframe(reproduced, keys + values):
            raise DomainError(f"重现结果缺少列 {keys + values}")
        left = reproduced.copy()
        right = reference.copy()
        for k in keys:
            if k == 'theta':
                left[k] = left[k].astype(float).round(6)
                right[k] = right[k].astype(float).round(6)
            elif k == 'conditional':
                left[k] = left[k].astype(str)
                right[k] = right[k].astype(str)
        merged = left.merge(right, on=list(keys), suffixes=('_got', '_ref'), how='inner')
        rows = []
        for _, rec in merged.iterrows():
            key = tuple(rec[k] for k in keys)
            if name == 'table4':
                key = (rec['model'], rec['conditional'] == 'True', rec['s'])
            for column in values:
                got = float(rec[f'{column}_got'])
                ref = float(rec[f'{column}_ref'])
                diff = got - ref
                tol, on_miss = self._tolerance(name, key, column)
                status = OK if abs(diff) <= tol + 1e-15 else on_miss
                row = {k: rec[k] for k in keys}
                row.update({'column': column, 'reproduced': got, 'reference': ref,
                            'diff': diff, 'tolerance': tol, 'status': status})
                rows.append(row)
        report = pd.DataFrame(rows)
        counts = report['status'].value_counts().to_dict() if not report.empty else {}
        self.logger.info(f"{name} 比对完成: {counts}")
        flagged = report[report['status'] != OK] if not report.empty else report
        for _, rec in flagged.iterrows():
            self.logger.warning(f"{name} 差异[{rec['status']}]: {dict(rec)}")
        return report

    def self_check(self, table1_thetas: Sequence[float], table2_thetas: Sequence[float],
                   s_max: int = 5) -> pd.DataFrame:
        """
        运行核心校验并重现全部参考表
        Args:
            table1_thetas: 第一张表的θ网格
            table2_thetas: 第二张表的θ网格（含θ=1）
        Raises:
            ToleranceError: 任一校验失败或参考表出现 failed 单元格
        """
        failures: List[str] = []
        checks = []

        oracle = ExactOracle(4, 1)
        exact = oracle.prefix_probabilities(2).win_probability()
        dp = ThresholdDP(4).optimal_win_prob(1.0, 2)
        ok = exact == Fraction(17, 24) and abs(dp - 17 / 24) < 1e-12
        checks.append({'check': 'worked_example', 'status': OK if ok else FAILED})
        if not ok:
            failures.append(f"n=4, θ=1, s=2 的最优胜率不等于 17/24: {exact}, {dp}")

        for theta in (Fraction(1, 2), 1, 2):
            report = invariance_suite(5, theta, 2)
            checks.append({'check': f'invariance_theta_{theta}', 'status': OK if report.passed else FAILED})
            if not report.passed:
                failures.append(f"θ={theta} 不变性校验失败: {report.counterexamples[:3]}")

        reproduced = {
            'table1': self.table1(table1_thetas, s_max),
            'table2': self.table2(table2_thetas, s_max),
            'table3': self.table3(s_max),
            'table4': self.table4(s_max),
        }
        for name, df in reproduced.items():
            report = self.compare(name, df)
            for status in (OK, FLAGGED, FAILED):
                checks.append({'check': f'{name}_{status}',
                               'status': status,
                               'cells': int((report['status'] == status).sum())})
            bad = report[report['status'] == FAILED]
            if not bad.empty:
                failures.append(f"{name} 有 {len(bad)} 个单元格超出容差")

        summary = pd.DataFrame(checks)
        if failures:
            for msg in failures:
                self.logger.error(msg)
            raise ToleranceError('; '.join(failures))
        self.logger.info("自检全部通过")
        return summary
