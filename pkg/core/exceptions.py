# exceptions.py
"""领域异常定义，CLI 层负责把它们映射为退出码"""


class TempoBellError(Exception):
    """所有领域异常的基类"""

    exit_code = 2


class ZeroVector(TempoBellError):
    """方向向量模长过小，无法归一化"""


class InvalidState(TempoBellError):
    """密度矩阵不满足厄米、迹为1或半正定条件"""


class ImpossibleOutcome(TempoBellError):
    """对概率为零的测量结果执行坍缩"""


class InvalidMixture(TempoBellError):
    """策略混合的权重为负或者和不为1"""


class InvalidParameter(TempoBellError):
    """优化、扫描或实验参数超出允许范围"""


class InsufficientTrials(TempoBellError):
    """某个测量对没有分到任何试验，无法估计关联函数"""

    exit_code = 3

    def __init__(self, missing_pairs, message=None):
        self.missing_pairs = tuple(missing_pairs)
        super().__init__(message or f"InsufficientTrials: no trials for pair(s) {', '.join(self.missing_pairs)}")


class ConsistencyError(TempoBellError):
    """两种独立计算结果不一致，属于科学检查失败"""

    exit_code = 1
