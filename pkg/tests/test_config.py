import inspect

import pytest

from config import config
from genie_secretary import asymptotics, expectations, mallows_core
from genie_secretary.asymptotics import AsymptoticSolver
from genie_secretary.base_solver import ResourceLimitError
from genie_secretary.exact_oracle import ExactOracle
from genie_secretary.simulator import MonteCarloSimulator


def _default(func, name):
    return inspect.signature(func).parameters[name].default


def test_module_defaults_come_from_config():
    assert _default(AsymptoticSolver.__init__, 'cap') == config.SEARCH_CAP
    assert _default(AsymptoticSolver.__init__, 'tail_tol') == config.TAIL_TOL
    assert _default(AsymptoticSolver.__init__, 'quad_tol') == config.QUAD_TOL
    assert _default(expectations.expected_stop_ratio, 'n') == config.EXPECTATION_PROXY_N
    assert _default(MonteCarloSimulator.__init__, 'batch_size') == config.SIM_BATCH_SIZE
    assert _default(mallows_core.mallows_pmf_table, 'cap') == config.ENUMERATION_CAP


def test_constants_are_not_redefined_in_modules():
    for module, name in [(mallows_core, 'ENUMERATION_CAP'), (asymptotics, 'SEARCH_CAP'),
                         (asymptotics, 'TAIL_TOL'), (asymptotics, 'QUAD_TOL')]:
        assert not hasattr(module, name)
    assert not hasattr(config, 'DP_PROXY_N')


def test_enumeration_cap_applies_by_default():
    with pytest.raises(ResourceLimitError):
        ExactOracle(config.ENUMERATION_CAP + 1, 1)
