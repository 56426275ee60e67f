# lhv_model.py
"""
确定性隐变量模型

在确定性假设下，每个初始条件 λ 给三个测量情境 (t1,a)、(t2,b)、(t3,c)
各指定一个 ±1 结果，三个关联函数只通过 (S1, S2, S3) ∈ {±1}³ 依赖 λ，
因此任意分布 ρ(λ) 都等价于 8 个确定性策略上的一个混合
"""
import itertools
import logging
from dataclasses import dataclass

import numpy as np

from core.correlators import CorrelationSet
from core.exceptions import InvalidMixture
from core.qubit import Outcome, TOLERANCE

logger = logging.getLogger(__name__)

STRATEGY_COUNT = 8


@dataclass(frozen=True)
class MeasurementContext:
    """测量情境：时间序号与方向标签的固定绑定 1↔A, 2↔B, 3↔C"""
    time_index: int
    direction_label: str

    def __post_init__(self):
        if CONTEXT_BINDING.get(self.time_index) != self.direction_label:
            raise ValueError(f"context (t{self.time_index}, {self.direction_label}) breaks the fixed binding")


CONTEXT_BINDING = {1: 'A', 2: 'B', 3: 'C'}
CONTEXTS = tuple(MeasurementContext(i, label) for i, label in CONTEXT_BINDING.items())


@dataclass(frozen=True)
class DeterministicStrategy:
    """一个 λ 等价类：三个情境上的确定结果"""
    s1: Outcome
    s2: Outcome
    s3: Outcome

    def __post_init__(self):
        for name in ('s1', 's2', 's3'):
            object.__setattr__(self, name, Outcome(getattr(self, name)))

    @classmethod
    def from_label(cls, label):
        """'+-+' 形式的标签"""
        if len(label) != 3 or any(ch not in '+-' for ch in label):
            raise InvalidMixture(f"strategy label must be three of '+'/'-', got {label!r}")
        return cls(*(Outcome.UP if ch == '+' else Outcome.DOWN for ch in label))

    @property
    def label(self):
        return ''.join('+' if s == Outcome.UP else '-' for s in self.outcomes())

    def outcomes(self):
        return self.s1, self.s2, self.s3

    def outcome(self, context):
        return self.outcomes()[context.time_index - 1]

    def products(self):
        """(s1·s2, s1·s3, s2·s3)，整数"""
        s1, s2, s3 = (int(s) for s in self.outcomes())
        return s1 * s2, s1 * s3, s2 * s3


def enumerate_strategies():
    """
    全部 2³ = 8 个确定性策略

    顺序固定：s1 为最高位、s3 为最低位，+1 排在 -1 之前，
    所以第一个是 (+1,+1,+1)，最后一个是 (-1,-1,-1)
    """
    signs = (Outcome.UP, Outcome.DOWN)
    return [DeterministicStrategy(*combo) for combo in itertools.product(signs, repeat=3)]


STRATEGIES = tuple(enumerate_strategies())
_PRODUCTS = np.array([s.products() for s in STRATEGIES], dtype=float)


@dataclass(frozen=True)
class StrategyMixture:
    """
    8 个策略上的概率分布，即离散化的 ρ(λ)

    构造时不做检查，使用它的运算会先调用 validate()
    """
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, 'weights', tuple(float(w) for w in self.weights))

    def validate(self):
        if len(self.weights) != STRATEGY_COUNT:
            raise InvalidMixture(f"InvalidMixture: expected {STRATEGY_COUNT} weights, got {len(self.weights)}")
        w = np.asarray(self.weights)
        if not np.all(np.isfinite(w)):
            raise InvalidMixture("InvalidMixture: weights must be finite")
        if w.min() < -TOLERANCE:
            raise InvalidMixture(f"InvalidMixture: negative weight {w.min():.3g}")
        total = float(w.sum())
        if abs(total - 1.0) > TOLERANCE:
            raise InvalidMixture(f"InvalidMixture: weights sum to {total:.15g}, expected 1")
        return self

    def as_array(self):
        return np.asarray(self.weights)

    @classmethod
    def point_mass(cls, strategy):
        return cls(tuple(1.0 if s == strategy else 0.0 for s in STRATEGIES))

    @classmethod
    def uniform(cls):
        return cls((1.0 / STRATEGY_COUNT,) * STRATEGY_COUNT)

    @classmethod
    def random(cls, rng):
        """平坦 Dirichlet 分布抽取的随机混合"""
        return cls(tuple(rng.dirichlet(np.ones(STRATEGY_COUNT))))

    @classmethod
    def from_dict(cls, data):
        """
        从 JSON 结构读取混合

        支持两种写法：
            {"weights": [w0, ..., w7]}                按 enumerate_strategies 的顺序
            {"strategies": {"+-+": 0.5, "---": 0.5}}  未列出的策略权重为 0
        """
        if not isinstance(data, dict):
            raise InvalidMixture("InvalidMixture: mixture file must contain a JSON object")
        try:
            if 'weights' in data:
                mixture = cls(tuple(data['weights']))
            elif 'strategies' in data:
                by_label = {DeterministicStrategy.from_label(k).label: float(v) for k, v in data['strategies'].items()}
                mixture = cls(tuple(by_label.get(s.label, 0.0) for s in STRATEGIES))
            else:
                raise InvalidMixture("InvalidMixture: mixture file needs a 'weights' list or a 'strategies' mapping")
        except (TypeError, ValueError, AttributeError) as e:
            raise InvalidMixture(f"InvalidMixture: malformed mixture: {e}") from e
        return mixture.validate()

    def to_dict(self):
        return {'strategies': {s.label: w for s, w in zip(STRATEGIES, self.weights)}}


def mixture_correlations(mixture):
    """
    混合下的三个期望值

    p_ab = Σ w·s1·s2, p_ac = Σ w·s1·s3, p_bc = Σ w·s2·s3
    """
    w = mixture.validate().as_array()
    p_ab, p_ac, p_bc = (float(v) for v in w @ _PRODUCTS)
    return CorrelationSet(p_ab=p_ab, p_ac=p_ac, p_bc=p_bc)


def mixture_as_combination(mixture):
    """把混合拆成 (权重, 点质量关联函数) 的凸组合，只保留非零权重"""
    mixture.validate()
    return [
        (w, mixture_correlations(StrategyMixture.point_mass(s)))
        for s, w in zip(STRATEGIES, mixture.weights) if w > 0.0
    ]


@dataclass(frozen=True)
class DerivationReport:
    """
    推导链的数值检查结果

    identity: P(a,b) - P(a,c) 与 Σ w·s1·s2·(1 - s2·s3) 的残差
    absolute_bound: Σ w·(1 - s2·s3) - |P(a,b) - P(a,c)|，非负即成立
    bell: (1 - P(b,c)) - |P(a,b) - P(a,c)|，非负即成立
    """
    identity_ok: bool
    identity_residual: float
    absolute_bound_ok: bool
    absolute_bound_margin: float
    bell_ok: bool
    bell_margin: float

    @property
    def passed(self):
        return self.identity_ok and self.absolute_bound_ok and self.bell_ok

    def to_dict(self):
        return {
            'identity_ok': self.identity_ok,
            'identity_residual': self.identity_residual,
            'absolute_bound_ok': self.absolute_bound_ok,
            'absolute_bound_margin': self.absolute_bound_margin,
            'bell_ok': self.bell_ok,
            'bell_margin': self.bell_margin,
            'passed': self.passed,
        }


def verify_derivation_chain(mixture):
    """
    对给定混合逐步检查 Bell 型不等式的推导

    1. 利用 s2² = 1: P(a,b) - P(a,c) = Σ w·s1·s2·(1 - s2·s3)
    2. 取绝对值:     |P(a,b) - P(a,c)| ≤ Σ w·(1 - s2·s3)
    3. 最终不等式:   |P(a,b) - P(a,c)| ≤ 1 - P(b,c)
    """
    corr = mixture_correlations(mixture)
    w = mixture.as_array()
    s1s2 = _PRODUCTS[:, 0]
    s2s3 = _PRODUCTS[:, 2]

    difference = corr.p_ab - corr.p_ac
    rewritten = float(np.sum(w * s1s2 * (1.0 - s2s3)))
    residual = abs(difference - rewritten)

    absolute_margin = float(np.sum(w * (1.0 - s2s3))) - abs(difference)
    bell_margin = (1.0 - corr.p_bc) - abs(difference)

    return DerivationReport(
        identity_ok=residual <= TOLERANCE,
        identity_residual=residual,
        absolute_bound_ok=absolute_margin >= -TOLERANCE,
        absolute_bound_margin=absolute_margin,
        bell_ok=bell_margin >= -TOLERANCE,
        bell_margin=bell_margin,
    )


def strategy_functional(strategy):
    """单个策略的 Bell 泛函 |s1·s2 - s1·s3| + s2·s3，整数运算"""
    ab, ac, bc = strategy.products()
    return abs(ab - ac) + bc


def classical_max_functional():
    """穷举 8 个策略得到的经典上界，恰为整数 1"""
    return max(strategy_functional(s) for s in STRATEGIES)


def sample_strategy_indices(mixture, rng, size):
    """
    按权重抽取 size 个策略序号

    用累积权重做逆变换抽样，权重为零的策略永远不会被抽中
    """
    cumulative = np.cumsum(mixture.validate().as_array())
    cumulative[-1] = 1.0
    return np.searchsorted(cumulative, rng.random(size), side='right')


def sample_strategy(mixture, rng):
    """从混合中抽取一个策略，给定种子可复现"""
    return STRATEGIES[int(sample_strategy_indices(mixture, rng, 1)[0])]
