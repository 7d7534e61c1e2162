import matplotlib
import pytest

matplotlib.use('Agg')


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run the slow synthetic oracle checks')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running oracle check')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)
