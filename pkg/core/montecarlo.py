# montecarlo.py
"""
理想实验的模拟

每次试验制备一个粒子，从三个情境对 AB、AC、BC 中选一对，
按时间顺序做两次测量，记录结果乘积；最后按对求样本均值和标准误差。

随机数方案：试验按固定大小 block_size 切块，第 k 块使用
SeedSequence(seed).spawn 的第 k 个子序列(等价于 spawn_key=(k,))。
分片只决定哪些块由哪个线程计算，各块的整数累加量按分片顺序合并，
所以结果与分片数无关，逐位一致。
"""
import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from core.correlators import CorrelationSet, PAIR_LABELS, branch_table, evolved_correlation_set
from core.exceptions import InvalidParameter, InsufficientTrials
from core.lhv_model import STRATEGIES, sample_strategy_indices
from core.optimizer import DirectionTriple, sqrt2_instance
from core.qubit import Outcome, QubitState, SpinRotation, TOLERANCE, evolve, measure

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 65536
SELECTION_SCHEMES = ('random', 'cyclic')
# 情境对 -> (先测情境序号, 后测情境序号)，序号 0,1,2 对应 (t1,a), (t2,b), (t3,c)
PAIR_CONTEXTS = ((0, 1), (0, 2), (1, 2))
_STRATEGY_OUTCOMES = np.array([[int(o) for o in s.outcomes()] for s in STRATEGIES], dtype=np.int64)
_FIRST_CONTEXT = np.array([i for i, _ in PAIR_CONTEXTS])
_SECOND_CONTEXT = np.array([j for _, j in PAIR_CONTEXTS])


@dataclass(frozen=True)
class ExperimentConfig:
    """
    一次模拟实验的全部参数

    shards 只影响执行方式，不影响结果
    """
    directions: DirectionTriple = field(default_factory=sqrt2_instance)
    times: tuple = (0.0, 1.0, 2.0)
    initial_state: QubitState = field(default_factory=QubitState.maximally_mixed)
    rotation: SpinRotation = field(default_factory=SpinRotation.identity)
    trials: int = 100000
    seed: int = 0
    selection: str = 'random'
    block_size: int = DEFAULT_BLOCK_SIZE
    shards: int = 1

    def __post_init__(self):
        t1, t2, t3 = self.times
        if not t1 < t2 < t3:
            raise InvalidParameter(f"times must satisfy t1 < t2 < t3, got {self.times}")
        if self.trials < 1:
            raise InvalidParameter(f"trials must be >= 1, got {self.trials}")
        if self.selection not in SELECTION_SCHEMES:
            raise InvalidParameter(f"selection must be one of {SELECTION_SCHEMES}, got {self.selection!r}")
        if self.block_size < 1 or self.shards < 1:
            raise InvalidParameter("block_size and shards must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidParameter(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def context(self, index):
        """情境序号 -> (时间, 方向)"""
        return self.times[index], tuple(self.directions)[index]

    def to_dict(self):
        return {
            'directions': self.directions.to_dict(),
            'times': list(self.times),
            'initial_state': self.initial_state.to_dict(),
            'rotation': self.rotation.to_dict(),
            'trials': self.trials,
            'seed': self.seed,
            'selection': self.selection,
            'block_size': self.block_size,
        }


@dataclass(frozen=True)
class TrialRecord:
    """一次试验：情境对及按时间顺序的两个结果"""
    pair: str
    first_outcome: Outcome
    second_outcome: Outcome

    def __post_init__(self):
        if self.pair not in PAIR_LABELS:
            raise InvalidParameter(f"pair must be one of {PAIR_LABELS}, got {self.pair!r}")
        object.__setattr__(self, 'first_outcome', Outcome(self.first_outcome))
        object.__setattr__(self, 'second_outcome', Outcome(self.second_outcome))

    @property
    def product(self):
        return int(self.first_outcome) * int(self.second_outcome)


@dataclass(frozen=True)
class EstimatedCorrelations:
    """样本均值估计的关联函数及每个情境对的试验次数"""
    correlations: CorrelationSet
    counts: tuple

    @classmethod
    def from_totals(cls, counts, sums):
        """
        由每对的试验次数和乘积之和构造估计

        Args:
            counts: 三个整数，AB/AC/BC 的试验次数
            sums: 三个整数，对应的乘积之和

        Raises:
            InsufficientTrials: 有情境对没有分到试验
        """
        counts = tuple(int(n) for n in counts)
        missing = [label for label, n in zip(PAIR_LABELS, counts) if n == 0]
        if missing:
            raise InsufficientTrials(missing)
        means, errors = [], []
        for n, total in zip(counts, sums):
            p = int(total) / n
            means.append(p)
            errors.append(math.sqrt(max(0.0, 1.0 - p * p) / n))
        return cls(
            correlations=CorrelationSet(*means, *errors, estimated=True),
            counts=counts,
        )

    def to_dict(self):
        data = self.correlations.to_dict()
        data['counts'] = dict(zip(PAIR_LABELS, self.counts))
        return data


@dataclass(frozen=True)
class _SamplingTable:
    """每个情境对的分支概率，小于容差的分支已被归零"""
    first_up: np.ndarray   # shape (3,)
    second_up: np.ndarray  # shape (3, 2)，第二维按第一次结果 (+1, -1)


def _snap(p):
    if p < TOLERANCE:
        return 0.0
    if p > 1.0 - TOLERANCE:
        return 1.0
    return p


def sampling_table(config):
    """用 qubit-core 精确计算 AB、AC、BC 三对的 Born 分支概率"""
    first_up = np.empty(3)
    second_up = np.empty((3, 2))
    for k, (i, j) in enumerate(PAIR_CONTEXTS):
        t_first, first = config.context(i)
        t_second, second = config.context(j)
        table = branch_table(config.initial_state, first, second, config.rotation, t_second - t_first)
        first_up[k] = _snap(table.p_first_up)
        second_up[k] = [_snap(q) for q in table.p_second_up]
    return _SamplingTable(first_up=first_up, second_up=second_up)


def block_rng(seed, block_index):
    """第 block_index 块的独立随机数流"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block_index,)))


def _block_bounds(trials, block_size):
    n_blocks = -(-trials // block_size)
    return [(k, k * block_size, min((k + 1) * block_size, trials)) for k in range(n_blocks)]


def _select_pairs(rng, selection, start, stop):
    if selection == 'cyclic':
        # 确定性选择：AB, AC, BC 轮流，三对出现频率相同
        return np.arange(start, stop) % 3
    return rng.integers(0, 3, size=stop - start)


def _quantum_block(config, table, block_index, start, stop):
    """返回一块试验的 (情境对序号, 第一次结果, 第二次结果)"""
    rng = block_rng(config.seed, block_index)
    pairs = _select_pairs(rng, config.selection, start, stop)
    u = rng.random((stop - start, 2))
    first_up = u[:, 0] < table.first_up[pairs]
    q = np.where(first_up, table.second_up[pairs, 0], table.second_up[pairs, 1])
    second_up = u[:, 1] < q
    return pairs, np.where(first_up, 1, -1), np.where(second_up, 1, -1)


def _lhv_block(mixture, seed, selection, block_index, start, stop):
    rng = block_rng(seed, block_index)
    pairs = _select_pairs(rng, selection, start, stop)
    strategies = sample_strategy_indices(mixture, rng, stop - start)
    first = _STRATEGY_OUTCOMES[strategies, _FIRST_CONTEXT[pairs]]
    second = _STRATEGY_OUTCOMES[strategies, _SECOND_CONTEXT[pairs]]
    return pairs, first, second


def _accumulate(pairs, first, second):
    counts = np.bincount(pairs, minlength=3).astype(np.int64)
    sums = np.zeros(3, dtype=np.int64)
    np.add.at(sums, pairs, (first * second).astype(np.int64))
    return counts, sums


def _run_sharded(blocks, shards, simulate):
    """
    把块按轮转方式分给各分片，分片内顺序累加，最后按分片序号合并

    累加量都是整数，合并顺序不影响结果
    """
    assignments = [blocks[k::shards] for k in range(shards)]

    def run_shard(shard_blocks):
        counts = np.zeros(3, dtype=np.int64)
        sums = np.zeros(3, dtype=np.int64)
        for block in shard_blocks:
            c, s = _accumulate(*simulate(*block))
            counts += c
            sums += s
        return counts, sums

    if shards > 1:
        with ThreadPoolExecutor(max_workers=shards) as pool:
            partials = list(pool.map(run_shard, assignments))
    else:
        partials = [run_shard(assignments[0])]

    counts = np.zeros(3, dtype=np.int64)
    sums = np.zeros(3, dtype=np.int64)
    for c, s in partials:
        counts += c
        sums += s
    return counts, sums


def run_trial(config, rng, pair=None, index=0):
    """
    逐步执行一次试验

    Args:
        config (ExperimentConfig): 实验参数
        rng (numpy.random.Generator): 随机数流，依次用于选对和两次测量
        pair (str): 可选，强制使用的情境对 'AB'/'AC'/'BC'
        index (int): 试验序号，cyclic 选择方案时决定情境对

    Returns:
        TrialRecord
    """
    if pair is None:
        if config.selection == 'cyclic':
            k = index % 3
        else:
            k = int(rng.integers(0, 3))
    else:
        k = PAIR_LABELS.index(pair)
    i, j = PAIR_CONTEXTS[k]
    t_first, first = config.context(i)
    t_second, second = config.context(j)

    s1, state = measure(config.initial_state, first, rng)
    state = evolve(state, config.rotation, t_second - t_first)
    s2, _ = measure(state, second, rng)
    return TrialRecord(pair=PAIR_LABELS[k], first_outcome=s1, second_outcome=s2)


def iter_trials(config):
    """按试验顺序产生全部 TrialRecord，与 estimate_correlations 使用同一批随机数"""
    table = sampling_table(config)
    for block_index, start, stop in _block_bounds(config.trials, config.block_size):
        pairs, first, second = _quantum_block(config, table, block_index, start, stop)
        for k, s1, s2 in zip(pairs, first, second):
            yield TrialRecord(pair=PAIR_LABELS[int(k)], first_outcome=int(s1), second_outcome=int(s2))


def estimate_correlations(config):
    """
    运行 config.trials 次试验并估计三个关联函数

    Raises:
        InsufficientTrials: 有情境对没有分到试验
    """
    table = sampling_table(config)
    blocks = _block_bounds(config.trials, config.block_size)
    logger.info(f"模拟 {config.trials} 次试验: {len(blocks)} 块, {config.shards} 个分片, seed={config.seed}")

    def simulate(block_index, start, stop):
        return _quantum_block(config, table, block_index, start, stop)

    counts, sums = _run_sharded(blocks, config.shards, simulate)
    return EstimatedCorrelations.from_totals(counts, sums)


def run_lhv_experiment(mixture, trials, seed, selection='random', block_size=DEFAULT_BLOCK_SIZE, shards=1):
    """
    同样的实验流程，但结果来自按混合抽取的确定性策略

    Args:
        mixture (StrategyMixture): 策略混合
        trials (int): 试验次数
        seed (int): 主种子

    Returns:
        EstimatedCorrelations
    """
    mixture.validate()
    if trials < 1:
        raise InvalidParameter(f"trials must be >= 1, got {trials}")
    if selection not in SELECTION_SCHEMES:
        raise InvalidParameter(f"selection must be one of {SELECTION_SCHEMES}, got {selection!r}")
    blocks = _block_bounds(trials, block_size)

    def simulate(block_index, start, stop):
        return _lhv_block(mixture, seed, selection, block_index, start, stop)

    counts, sums = _run_sharded(blocks, shards, simulate)
    return EstimatedCorrelations.from_totals(counts, sums)


def estimate_from_records(records):
    """
    由任意来源的试验记录估计关联函数

    只要求每条记录是二值 ±1 响应，适用于模拟数据，也适用于真实测量数据
    """
    counts = [0, 0, 0]
    sums = [0, 0, 0]
    for record in records:
        k = PAIR_LABELS.index(record.pair)
        counts[k] += 1
        sums[k] += record.product
    return EstimatedCorrelations.from_totals(counts, sums)


def exact_reference(config) -> CorrelationSet:
    """该配置下的精确关联函数，用于和估计值对照"""
    a, b, c = config.directions
    return evolved_correlation_set(a, b, c, config.times, config.rotation, config.initial_state)
