import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd

# 获取项目根目录
PROJECT_ROOT = Path(__file__).parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from config import config  # noqa: E402
from genie_secretary.asymptotics import AsymptoticSolver, uniform_thresholds  # noqa: E402
from genie_secretary.base_solver import (MODELS, DomainError, ResourceLimitError,  # noqa: E402
                                         ToleranceError, UndefinedResultError, parse_int_list,
                                         validate_theta)
from genie_secretary.exact_oracle import ExactOracle  # noqa: E402
from genie_secretary.expectations import (expected_selections,  # noqa: E402
                                          limit_expected_selections, stopping_distribution)
from genie_secretary.simulator import MonteCarloSimulator  # noqa: E402
from genie_secretary.strategy_eval import decomposition, win_ratio  # noqa: E402
from genie_secretary.table_reporter import TableReporter, render  # noqa: E402
from genie_secretary.threshold_dp import ThresholdDP  # noqa: E402

logger = logging.getLogger('main')

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RESOURCE = 3
EXIT_TOLERANCE = 4


def parse_thetas(text: str):
    """'0.5,1,2' -> [0.5, 1.0, 2.0]"""
    return [validate_theta(t) for t in str(text).split(',') if t.strip()]


def _joined(values) -> str:
    return ','.join(f'{v:.10g}' if isinstance(v, float) else str(v) for v in values)


def _solver(args: argparse.Namespace) -> AsymptoticSolver:
    return AsymptoticSolver(cap=args.cap, tail_tol=args.tail_tol, quad_tol=args.quad_tol)


def _optimal(theta: float, s: int, args: argparse.Namespace):
    if theta == 1.0:
        return uniform_thresholds(s, args.quad_tol)
    return _solver(args).search_thresholds(theta, s)


def cmd_thresholds(args: argparse.Namespace) -> pd.DataFrame:
    """最优阈值与胜率：有限n用动态规划，否则做渐近搜索"""
    if args.grid == 'table1':
        reporter = TableReporter(config.REFERENCE_DIR, search_cap=args.cap, workers=args.workers)
        return reporter.table1(config.TABLE1_THETAS, args.s)
    thetas = [1.0] if args.uniform else parse_thetas(args.theta)
    rows = []
    for theta in thetas:
        if args.n is not None:
            table = ThresholdDP(args.n).compute_qtable(theta, args.s)
            rows.append({
                'theta': theta, 's': args.s, 'n': args.n,
                'thresholds': _joined(table.thresholds().ks),
                'win_probability': table.win_probability,
            })
            continue
        if theta == 1.0:
            best = uniform_thresholds(args.s, args.quad_tol)
        else:
            best = _solver(args).search_thresholds(theta, args.s, joint=args.joint)
        rows.append({
            'theta': theta, 's': args.s, 'regime': best.regime,
            'thresholds': _joined(best.values),
            'last_threshold': best.values[-1],
            'win_probability': best.win_probability,
            'cap_hit': best.cap_hit,
        })
    return pd.DataFrame(rows)


def cmd_evaluate(args: argparse.Namespace) -> pd.DataFrame:
    """给定阈值策略的胜率以及按选择次数的 T_r / W_r 分解"""
    ks = parse_int_list(args.k)
    theta = validate_theta(args.theta)
    df = decomposition(args.n, ks, theta)
    df.insert(0, 'n', args.n)
    df.insert(1, 'theta', theta)
    df.insert(2, 'thresholds', _joined(ks))
    df['win_probability'] = win_ratio(args.n, ks, theta)
    return df


def cmd_expect(args: argparse.Namespace) -> pd.DataFrame:
    """期望选择次数或停止位置；未给出阈值时使用最优策略"""
    thetas = [1.0] if args.uniform else parse_thetas(args.theta)
    rows = []
    for theta in thetas:
        strategy = parse_int_list(args.k) if args.k else _optimal(theta, args.s, args)
        if args.what == 'selections':
            if args.n is None and args.k:
                raise DomainError("N→∞ 模式不接受显式阈值，请同时给出 --n")
            if args.n is None:
                values = (limit_expected_selections(strategy, False),
                          limit_expected_selections(strategy, True))
            else:
                values = (expected_selections(args.n, strategy, theta, False),
                          expected_selections(args.n, strategy, theta, True))
            rows.append({'theta': theta, 's': args.s, 'n': args.n or 'inf',
                         'unconditional': values[0], 'conditional': values[1]})
        else:
            n = args.n or config.EXPECTATION_PROXY_N
            plain = stopping_distribution(n, strategy, theta, args.model, conditional=False)
            cond = stopping_distribution(n, strategy, theta, args.model, conditional=True)
            rows.append({
                'theta': theta, 's': args.s, 'n': n, 'model': args.model,
                'esr_unconditional': plain.expected_stop_ratio(),
                'esr_conditional': cond.expected_stop_ratio(),
                'whole_list_unconditional': plain.whole_list_probability(),
                'whole_list_conditional': cond.whole_list_probability(),
            })
    return pd.DataFrame(rows)


def cmd_simulate(args: argparse.Namespace) -> pd.DataFrame:
    simulator = MonteCarloSimulator(batch_size=config.SIM_BATCH_SIZE, workers=args.workers)
    report = simulator.simulate(args.n, args.theta, parse_int_list(args.k), args.model,
                                args.trials, args.seed)
    return report.to_frame()


def cmd_oracle(args: argparse.Namespace):
    """小规模精确枚举；tree / strike / invariance 以JSON对象输出"""
    oracle = ExactOracle(args.n, args.theta, cap=config.ENUMERATION_CAP)
    if args.dump == 'tree':
        probs = oracle.prefix_probabilities(args.s)
        return {'n': args.n, 'theta': str(oracle.theta), 's': args.s,
                'win_probability': str(probs.win_probability()), 'tree': probs.to_json()}
    if args.dump == 'strike':
        strike = oracle.build_strike_set(args.s)
        probs = oracle.prefix_probabilities(args.s)
        return {'n': args.n, 'theta': str(oracle.theta), 's': args.s,
                'win_probability': str(strike.win_probability(probs)),
                'chain_length': strike.chain_length, 'violations': strike.violations,
                'layers': strike.to_json()}
    if args.dump == 'invariance':
        report = oracle.invariance_suite(args.s)
        if not report.passed:
            raise ToleranceError(f"不变性校验发现反例: {report.counterexamples[:3]}")
        return {'n': args.n, 'theta': str(oracle.theta), 's': args.s,
                'checks': report.checks, 'counterexamples': report.counterexamples}
    ks = parse_int_list(args.k) if args.k else oracle.optimal_thresholds(args.s).ks
    win = oracle.enumerate_win_prob(ks, args.model)
    return pd.DataFrame([{'n': args.n, 'theta': str(oracle.theta), 'thresholds': _joined(ks),
                          'model': args.model, 'win_probability': str(win),
                          'win_probability_float': float(win)}])


def cmd_self_check(args: argparse.Namespace) -> pd.DataFrame:
    reporter = TableReporter(config.REFERENCE_DIR, search_cap=args.cap,
                             proxy_n=config.EXPECTATION_PROXY_N, workers=args.workers)
    return reporter.self_check(config.TABLE1_THETAS, config.TABLE2_THETAS, config.MAX_SELECTIONS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Mallows模型下 Genie / Dowry 秘书问题求解器")
    parser.add_argument('--self-check', action='store_true', help="运行自检并重现全部参考表")
    parser.add_argument('--format', choices=['csv', 'json'], default=None,
                        help="输出格式，默认终端为csv、管道为json")
    parser.add_argument('--output', default=None, help="输出文件，相对路径落在输出目录下")
    parser.add_argument('--log-level', default=config.LOG_LEVEL, help="日志级别")
    parser.add_argument('--workers', type=int, default=1, help="并行线程数")
    parser.add_argument('--cap', type=int, default=config.SEARCH_CAP, help="渐近阈值搜索上限")
    parser.add_argument('--tail-tol', type=float, default=config.TAIL_TOL, help="θ>1 截断的相对尾项容差")
    parser.add_argument('--quad-tol', type=float, default=config.QUAD_TOL, help="θ=1 数值积分容差")
    sub = parser.add_subparsers(dest='command')

    thr = sub.add_parser('thresholds', help="最优阈值与胜率")
    thr.add_argument('--theta', default='1', help="θ或逗号分隔的θ列表")
    thr.add_argument('--uniform', action='store_true', help="θ=1 的比例阈值")
    thr.add_argument('--s', type=int, default=1, help="选择次数")
    thr.add_argument('--n', type=int, default=None, help="有限长度（使用动态规划）")
    thr.add_argument('--grid', choices=['table1'], default=None, help="输出整张θ网格")
    thr.add_argument('--joint', action='store_true', help="附加联合搜索校验")
    thr.set_defaults(func=cmd_thresholds)

    ev = sub.add_parser('evaluate', help="评估给定阈值策略")
    ev.add_argument('--n', type=int, required=True)
    ev.add_argument('--theta', required=True)
    ev.add_argument('--k', required=True, help="阈值，如 0,1")
    ev.set_defaults(func=cmd_evaluate)

    ex = sub.add_parser('expect', help="期望选择次数与停止位置")
    ex.add_argument('--theta', default='1')
    ex.add_argument('--uniform', action='store_true')
    ex.add_argument('--s', type=int, default=5)
    ex.add_argument('--n', type=int, default=None, help="有限长度；缺省时为N→∞（停止位置用代理长度）")
    ex.add_argument('--k', default=None, help="显式阈值，缺省为最优策略")
    ex.add_argument('--what', choices=['selections', 'stop'], default='selections')
    ex.add_argument('--model', choices=MODELS, default='genie')
    ex.set_defaults(func=cmd_expect)

    sim = sub.add_parser('simulate', help="蒙特卡洛模拟")
    sim.add_argument('--n', type=int, required=True)
    sim.add_argument('--theta', required=True)
    sim.add_argument('--k', required=True)
    sim.add_argument('--model', choices=MODELS, default='genie')
    sim.add_argument('--trials', type=int, default=config.SIM_TRIALS)
    sim.add_argument('--seed', type=int, default=config.SIM_SEED)
    sim.set_defaults(func=cmd_simulate)

    orc = sub.add_parser('oracle', help="小规模精确枚举")
    orc.add_argument('--n', type=int, required=True)
    orc.add_argument('--theta', default='1', help="有理数θ，如 1/2")
    orc.add_argument('--s', type=int, default=1)
    orc.add_argument('--k', default=None)
    orc.add_argument('--model', choices=MODELS, default='genie')
    orc.add_argument('--dump', choices=['win', 'tree', 'strike', 'invariance'], default='win')
    orc.set_defaults(func=cmd_oracle)
    return parser


def emit(result, fmt: str, output: str = None) -> None:
    if isinstance(result, pd.DataFrame):
        text = render(result, fmt, config.SIGNIFICANT_DIGITS)
    else:
        text = json.dumps(result, ensure_ascii=False, indent=2)
    if output is None:
        sys.stdout.write(text if text.endswith('\n') else text + '\n')
        return
    path = Path(output)
    if not path.is_absolute():
        path = config.OUTPUT_DIR / path
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding='utf-8')
    logger.info(f"结果已写入 {path}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.getLogger().setLevel(str(args.log_level).upper())
    if not args.self_check and args.command is None:
        parser.error("需要指定子命令或 --self-check")
    fmt = args.format or ('csv' if sys.stdout.isatty() else 'json')
    try:
        result = cmd_self_check(args) if args.self_check else args.func(args)
        emit(result, fmt, args.output)
    except (DomainError, UndefinedResultError) as e:
        logger.error(f"参数错误: {e}")
        return EXIT_USAGE
    except ResourceLimitError as e:
        logger.error(f"超出资源上限: {e}")
        return EXIT_RESOURCE
    except ToleranceError as e:
        logger.error(f"数值校验失败: {e}")
        return EXIT_TOLERANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
