import os
import sys

import numpy as np
import pytest

# 添加项目根目录到Python路径
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from app import cli, create_app
from config import TestingConfig


@pytest.fixture
def app(tmp_path):
    app = create_app(TestingConfig)
    app.config['MANIFEST_DIR'] = str(tmp_path / 'manifests')
    with app.app_context():
        yield app


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def invoke(runner):
    """runner.invoke 的简写: invoke('exact', '--a', '0,0,1', ...)"""

    def _invoke(*args):
        return runner.invoke(cli, list(args))

    return _invoke


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
