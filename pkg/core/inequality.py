# inequality.py
"""Bell 泛函、时间型 Bell 不等式及其违背判定"""
import math
import logging
from dataclasses import dataclass
from typing import Optional

from core.correlators import quantum_correlation_set
from core.qubit import TOLERANCE

logger = logging.getLogger(__name__)

CLASSICAL_BOUND = 1.0
DEFAULT_SIGMA = 3.0


@dataclass(frozen=True)
class ViolationReport:
    """
    不等式判定结果

    精确值: margin 超过舍入容差 1e-12 即违背
    估计值: margin > sigma·margin_se 才判为违背
    kink_warning: |p_ab - p_ac| 太接近 0，绝对值处不可导，误差传递不可靠
    """
    functional_value: float
    margin: float
    violated: bool
    classical_bound: float = CLASSICAL_BOUND
    margin_se: Optional[float] = None
    sigma: float = DEFAULT_SIGMA
    kink_warning: bool = False

    @property
    def significance(self):
        """margin 以标准误差为单位的大小，精确值时为 None"""
        if not self.margin_se:
            return None
        return self.margin / self.margin_se

    def to_dict(self):
        data = {
            'functional_value': self.functional_value,
            'classical_bound': self.classical_bound,
            'margin': self.margin,
            'violated': self.violated,
        }
        if self.margin_se is not None:
            data.update({
                'margin_se': self.margin_se,
                'sigma_threshold': self.sigma,
                'significance': self.significance,
                'kink_warning': self.kink_warning,
            })
        return data


def bell_functional(p):
    """|P(a,b) - P(a,c)| + P(b,c)"""
    return abs(p.p_ab - p.p_ac) + p.p_bc


def quantum_functional(a, b, c):
    """|a·b - a·c| + b·c"""
    return bell_functional(quantum_correlation_set(a, b, c))


def check_inequality(p, sigma=DEFAULT_SIGMA):
    """
    判定关联函数组是否违背 |P(a,b) - P(a,c)| + P(b,c) ≤ 1

    Args:
        p (CorrelationSet): 精确或估计的关联函数
        sigma (float): 估计值的显著性阈值(标准误差的倍数)

    Returns:
        ViolationReport
    """
    value = bell_functional(p)
    margin = value - CLASSICAL_BOUND
    if not p.estimated:
        return ViolationReport(functional_value=value, margin=margin, violated=margin > TOLERANCE)

    margin_se = math.sqrt(p.se_ab ** 2 + p.se_ac ** 2 + p.se_bc ** 2)
    kink = abs(p.p_ab - p.p_ac) < 3.0 * (p.se_ab + p.se_ac)
    if kink:
        logger.warning(f"|p_ab - p_ac| = {abs(p.p_ab - p.p_ac):.3g} is within the noise, margin_se is unreliable")
    return ViolationReport(
        functional_value=value,
        margin=margin,
        violated=margin > sigma * margin_se,
        margin_se=margin_se,
        sigma=sigma,
        kink_warning=kink,
    )
