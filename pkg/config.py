import os
import math

from utils.system_info import default_workers


class Config:
    VERSION = '1.0.0'

    # 运行台账数据库，未设置时使用 instance 目录下的 SQLite 文件
    SQLALCHEMY_DATABASE_URI = os.environ.get('TEMPO_BELL_LEDGER')
    LEDGER_FILENAME = 'tempo_bell_ledger.db'
    SQLALCHEMY_TRACK_MODIFICATIONS = False
    LEDGER_ENABLED = True
    LEDGER_MAX_RETRIES = 3
    LEDGER_RETRY_DELAY = 2  # 秒

    LOG_LEVEL = os.environ.get('TEMPO_BELL_LOG_LEVEL') or 'INFO'

    # 随机数种子，可由环境变量 TEMPO_BELL_SEED 覆盖
    SEED = 0

    # 估计值判定违背所需的标准误差倍数
    SIGNIFICANCE_SIGMA = 3.0

    # 模拟配置
    DEFAULT_TRIALS = 100000
    BLOCK_SIZE = 65536       # 每个随机数块的试验数，改变它会改变抽样结果
    WORKERS = default_workers()

    # 优化配置
    OPT_RESTARTS = 20
    OPT_TOL = 1e-8
    OPT_INITIAL_STEP = math.pi / 8
    OPT_MAX_SWEEPS = 100000

    SWEEP_GRID_POINTS = 201

    # simulate 没有给出 --out/--manifest 时清单的存放目录，未设置时为 instance/manifests
    MANIFEST_DIR = None


class DevelopmentConfig(Config):
    DEBUG = True


class TestingConfig(Config):
    TESTING = True
    SQLALCHEMY_DATABASE_URI = 'sqlite://'
    LEDGER_RETRY_DELAY = 0
    WORKERS = 2


config = DevelopmentConfig()
