"""
蒙特卡洛模拟模块
抽取Mallows排列，执行Genie/Dowry阈值策略，统计胜率、选择次数与停止位置
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from config import config

from .base_solver import (BaseSolver, GENIE, ThetaLike, validate_model, validate_positive_int,
                          validate_theta)
from .exact_oracle import StrategyThresholds
from .mallows_core import sample_inversion_tables

GENERATOR = 'PCG64'


@dataclass(frozen=True)
class SimReport:
    """
    模拟结果，每个统计量附带标准误
    Note:
        - 条件统计量（以获胜为条件）在没有获胜样本时为 None
        - 同一 (n, θ, 策略, 模型, 次数, 种子) 重跑结果逐位相同
    """
    n: int
    theta: float
    ks: Tuple[int, ...]
    model: str
    trials: int
    seed: int
    generator: str
    win_rate: float
    win_rate_se: float
    mean_selections: float
    mean_selections_se: float
    mean_stop_ratio: float
    mean_stop_ratio_se: float
    whole_list_rate: float
    whole_list_rate_se: float
    cond_mean_selections: Optional[float] = None
    cond_mean_selections_se: Optional[float] = None
    cond_mean_stop_ratio: Optional[float] = None
    cond_mean_stop_ratio_se: Optional[float] = None

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['ks'] = ','.join(str(k) for k in self.ks)
        return data

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([self.to_dict()])


def play_batch(v: np.ndarray, ks: Tuple[int, ...], model: str) -> Dict[str, np.ndarray]:
    """
    在一批逆序表上同时执行阈值策略
    Args:
        v: 形状 (size, n) 的左逆序表，v[:, i-1] == 0 表示位置i是从左到右最大值
        ks: 严格递增的阈值
        model: genie / dowry
    Returns:
        won / selections / stop 三个数组
    """
    size, n = v.shape
    s = len(ks)
    is_max = v == 0
    # 最后一个从左到右最大值即最优者所在位置
    best_pos = n - np.argmax(is_max[:, ::-1], axis=1)
    thr = np.array(list(ks) + [n + 1])
    used = np.zeros(size, dtype=np.int64)
    won = np.zeros(size, dtype=bool)
    active = np.ones(size, dtype=bool)
    stop = np.full(size, n, dtype=np.int64)
    for pos in range(1, n + 1):
        select = active & is_max[:, pos - 1] & (pos > thr[used])
        if not select.any():
            continue
        used[select] += 1
        hit = select & (best_pos == pos)
        won |= hit
        halt = select & (used == s)
        if model == GENIE:
            halt |= hit
        stop[halt] = pos
        active &= ~halt
    return {'won': won, 'selections': used, 'stop': stop}


def _batch_totals(n: int, theta: float, ks: Tuple[int, ...], model: str, size: int,
                  seed_seq: np.random.SeedSequence) -> Dict[str, int]:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    out = play_batch(sample_inversion_tables(n, theta, size, rng), ks, model)
    won = out['won']
    sel = out['selections']
    stop = out['stop']
    # 全部累计为整数，合并顺序不影响结果
    return {
        'trials': int(size),
        'wins': int(won.sum()),
        'sel': int(sel.sum()),
        'sel2': int((sel * sel).sum()),
        'stop': int(stop.sum()),
        'stop2': int((stop * stop).sum()),
        'whole': int((stop == n).sum()),
        'win_sel': int(sel[won].sum()),
        'win_sel2': int((sel[won] * sel[won]).sum()),
        'win_stop': int(stop[won].sum()),
        'win_stop2': int((stop[won] * stop[won]).sum()),
    }


def _mean_se(total: int, total_sq: int, count: int, scale: float = 1.0) -> Tuple[float, float]:
    mean = total / count
    if count < 2:
        return mean / scale, 0.0
    var = max(total_sq / count - mean * mean, 0.0) * count / (count - 1)
    return mean / scale, math.sqrt(var / count) / scale


class MonteCarloSimulator(BaseSolver):
    """
    按批次切分的模拟器
    每个批次使用由 SeedSequence 派生的独立子种子，批次可在线程池中并行执行
    """

    def __init__(self, batch_size: int = config.SIM_BATCH_SIZE, workers: int = 1):
        super().__init__()
        self.batch_size = validate_positive_int(batch_size, 'batch_size')
        self.workers = validate_positive_int(workers, 'workers')

    def simulate(self, n: int, theta: ThetaLike, ks, model: str = GENIE,
                 trials: int = 100_000, seed: int = 0) -> SimReport:
        """
        运行模拟
        Args:
            n: 候选人数
            theta: 离散参数
            ks: 阈值策略
            model: genie / dowry
            trials: 模拟次数
            seed: 随机种子
        Returns:
            SimReport
        """
        n = validate_positive_int(n, 'n')
        theta = validate_theta(theta)
        model = validate_model(model)
        trials = validate_positive_int(trials, 'trials')
        seed = validate_positive_int(seed, 'seed', minimum=0)
        ks = StrategyThresholds.of(ks).canonical().ks

        sizes = [self.batch_size] * (trials // self.batch_size)
        if trials % self.batch_size:
            sizes.append(trials % self.batch_size)
        children = np.random.SeedSequence(seed).spawn(len(sizes))
        self.logger.info(f"开始模拟: n={n}, θ={theta}, ks={ks}, model={model}, "
                         f"trials={trials}, 批次数={len(sizes)}")

        def run(job):
            size, child = job
            return _batch_totals(n, theta, ks, model, size, child)

        try:
            jobs = list(zip(sizes, children))
            if self.workers <= 1:
                parts = [run(job) for job in jobs]
            else:
                with ThreadPoolExecutor(max_workers=self.workers) as ex:
                    parts = list(ex.map(run, jobs))
        except Exception as e:
            self.logger.error(f"模拟失败: {e}")
            raise

        totals = {key: sum(part[key] for part in parts) for key in parts[0]}
        return self._report(n, theta, ks, model, seed, totals)

    @staticmethod
    def _report(n: int, theta: float, ks: Tuple[int, ...], model: str, seed: int,
                totals: Dict[str, int]) -> SimReport:
        t = totals['trials']
        wins = totals['wins']
        win_rate = wins / t
        whole = totals['whole'] / t
        sel, sel_se = _mean_se(totals['sel'], totals['sel2'], t)
        stop, stop_se = _mean_se(totals['stop'], totals['stop2'], t, scale=n)
        cond = {}
        if wins:
            cond['cond_mean_selections'], cond['cond_mean_selections_se'] = _mean_se(
                totals['win_sel'], totals['win_sel2'], wins)
            cond['cond_mean_stop_ratio'], cond['cond_mean_stop_ratio_se'] = _mean_se(
                totals['win_stop'], totals['win_stop2'], wins, scale=n)
        return SimReport(
            n=n, theta=theta, ks=ks, model=model, trials=t, seed=seed, generator=GENERATOR,
            win_rate=win_rate, win_rate_se=math.sqrt(win_rate * (1 - win_rate) / t),
            mean_selections=sel, mean_selections_se=sel_se,
            mean_stop_ratio=stop, mean_stop_ratio_se=stop_se,
            whole_list_rate=whole, whole_list_rate_se=math.sqrt(whole * (1 - whole) / t),
            **cond,
        )


def simulate(n: int, theta: ThetaLike, ks, model: str = GENIE, trials: int = 100_000,
             seed: int = 0, workers: int = 1) -> SimReport:
    return MonteCarloSimulator(workers=workers).simulate(n, theta, ks, model, trials, seed)
