# correlators.py
"""
顺序投影测量的两时关联函数

sequential_correlator 通过枚举四个测量分支精确计算 <s1·s2>，
是 montecarlo 抽样结果的对照基准
"""
import logging
from dataclasses import dataclass

from core.exceptions import InvalidParameter
from core.qubit import Outcome, QubitState, SpinRotation, TOLERANCE, born_probability, collapse, evolve

logger = logging.getLogger(__name__)

PAIR_LABELS = ('AB', 'AC', 'BC')


@dataclass(frozen=True)
class CorrelationSet:
    """
    三个关联函数 (P(a,b), P(a,c), P(b,c))

    精确值的标准误差为 0；estimated 标记该组数值来自抽样估计
    """
    p_ab: float
    p_ac: float
    p_bc: float
    se_ab: float = 0.0
    se_ac: float = 0.0
    se_bc: float = 0.0
    estimated: bool = False

    def __post_init__(self):
        for label, value in zip(PAIR_LABELS, self.values()):
            if not -1.0 - TOLERANCE <= value <= 1.0 + TOLERANCE:
                raise InvalidParameter(f"correlator P({label}) = {value!r} outside [-1, 1]")
        for label, se in zip(PAIR_LABELS, self.errors()):
            if se < 0:
                raise InvalidParameter(f"standard error for {label} is negative: {se!r}")

    def values(self):
        return self.p_ab, self.p_ac, self.p_bc

    def errors(self):
        return self.se_ab, self.se_ac, self.se_bc

    def to_dict(self):
        data = {'p_ab': self.p_ab, 'p_ac': self.p_ac, 'p_bc': self.p_bc}
        if self.estimated:
            data.update({'se_ab': self.se_ab, 'se_ac': self.se_ac, 'se_bc': self.se_bc})
        return data


@dataclass(frozen=True)
class BranchTable:
    """
    两次顺序测量的分支概率

    p_first_up: 第一次测量得到 +1 的概率
    p_second_up: 以第一次结果为条件，第二次得到 +1 的概率，按 (+1, -1) 排列；
                 概率为零的第一次分支对应的条件概率无意义，记为 0.5
    """
    p_first_up: float
    p_second_up: tuple

    def first_probability(self, s1):
        return self.p_first_up if s1 == Outcome.UP else 1.0 - self.p_first_up

    def second_probability(self, s1, s2):
        q = self.p_second_up[0 if s1 == Outcome.UP else 1]
        return q if s2 == Outcome.UP else 1.0 - q

    def correlator(self):
        total = 0.0
        for s1 in Outcome:
            p1 = self.first_probability(s1)
            if p1 < TOLERANCE:
                continue
            for s2 in Outcome:
                total += int(s1) * int(s2) * p1 * self.second_probability(s1, s2)
        return total


def branch_table(state, first, second, rotation, dt):
    """
    计算两次顺序测量的全部分支概率

    Args:
        state (QubitState): 第一次测量前的态
        first (BlochVector): 第一次测量方向
        second (BlochVector): 第二次测量方向
        rotation (SpinRotation): 两次测量之间的进动
        dt (float): 两次测量的时间间隔

    Returns:
        BranchTable
    """
    if dt < 0:
        raise InvalidParameter(f"measurement interval must be non-negative, got {dt}")
    p_first_up = born_probability(state, first, Outcome.UP)
    conditional = []
    for s1 in Outcome:
        p1 = p_first_up if s1 == Outcome.UP else 1.0 - p_first_up
        if p1 < TOLERANCE:
            conditional.append(0.5)
            continue
        post = evolve(collapse(state, first, s1), rotation, dt)
        conditional.append(born_probability(post, second, Outcome.UP))
    return BranchTable(p_first_up=p_first_up, p_second_up=tuple(conditional))


def sequential_correlator(state, first, second, rotation=None, dt=0.0):
    """
    顺序测量结果乘积的精确期望值

    对四个分支 (s1, s2) 求和 s1·s2·p(s1)·p(s2|s1)；
    恒等演化下结果等于 first·second，与初态无关
    """
    rotation = rotation or SpinRotation.identity()
    return branch_table(state, first, second, rotation, dt).correlator()


def correlator_between(state, first, second, rotation, t_first, t_second):
    """以绝对时间给出两次测量，只有时间差进入计算"""
    if t_second < t_first:
        raise InvalidParameter(f"second measurement time {t_second} precedes first {t_first}")
    return sequential_correlator(state, first, second, rotation, t_second - t_first)


def quantum_correlation_set(a, b, c):
    """量子力学给出的关联函数 (a·b, a·c, b·c)，标准误差为零"""
    return CorrelationSet(p_ab=a.dot(b), p_ac=a.dot(c), p_bc=b.dot(c))


def evolved_correlation_set(a, b, c, times, rotation=None, state=None):
    """
    含进动时的精确关联函数组

    Args:
        a, b, c (BlochVector): 分别在 t1, t2, t3 测量的方向
        times (tuple): (t1, t2, t3)
        rotation (SpinRotation): 进动，默认恒等
        state (QubitState): 初态，默认完全混合态(结果与初态无关)
    """
    rotation = rotation or SpinRotation.identity()
    state = state or QubitState.maximally_mixed()
    t1, t2, t3 = times
    return CorrelationSet(
        p_ab=correlator_between(state, a, b, rotation, t1, t2),
        p_ac=correlator_between(state, a, c, rotation, t1, t3),
        p_bc=correlator_between(state, b, c, rotation, t2, t3),
    )
