# qubit.py
"""
自旋1/2体系的精确表示
包括测量方向(Bloch向量)、密度矩阵、沿任意方向的Pauli观测量、
带坍缩的投影测量，以及测量之间可选的幺正演化
"""
import math
import logging
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy.linalg import expm

from core.exceptions import ZeroVector, InvalidState, ImpossibleOutcome, InvalidParameter

logger = logging.getLogger(__name__)

TOLERANCE = 1e-12  # 2x2 复矩阵精确运算的容差
ZERO_NORM = 1e-9   # 小于该模长的向量视为零向量

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)


class Outcome(IntEnum):
    """测量结果，取值 +1 或 -1"""
    UP = 1
    DOWN = -1


@dataclass(frozen=True)
class BlochVector:
    """
    单位三维向量，表示一个测量方向

    直接构造时要求已经归一化；需要归一化任意输入请使用 make_direction
    """
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ('x', 'y', 'z'):
            object.__setattr__(self, name, float(getattr(self, name)))
        norm_sq = self.x * self.x + self.y * self.y + self.z * self.z
        if abs(norm_sq - 1.0) > TOLERANCE:
            raise InvalidParameter(f"BlochVector must have unit length, got |v|^2 = {norm_sq!r}")

    def as_array(self):
        return np.array([self.x, self.y, self.z])

    def to_list(self):
        return [self.x, self.y, self.z]

    def dot(self, other):
        return self.x * other.x + self.y * other.y + self.z * other.z

    def __neg__(self):
        return BlochVector(-self.x, -self.y, -self.z)

    def __str__(self):
        return f"({self.x:.9g}, {self.y:.9g}, {self.z:.9g})"


Z_AXIS = BlochVector(0.0, 0.0, 1.0)
X_AXIS = BlochVector(1.0, 0.0, 0.0)


def make_direction(x, y, z):
    """
    把任意非零三维向量归一化为测量方向

    Args:
        x, y, z (float): 向量分量，不要求单位长度

    Returns:
        BlochVector: 归一化后的方向

    Raises:
        ZeroVector: 模长小于 1e-9
    """
    norm = math.sqrt(x * x + y * y + z * z)
    if norm < ZERO_NORM:
        raise ZeroVector(f"ZeroVector: cannot normalize ({x}, {y}, {z}), norm {norm:.3g} < {ZERO_NORM}")
    return BlochVector(x / norm, y / norm, z / norm)


def direction_from_array(values):
    """从长度为3的序列构造方向(会归一化)"""
    x, y, z = (float(v) for v in values)
    return make_direction(x, y, z)


def random_direction(rng):
    """在单位球面上均匀抽取一个方向"""
    while True:
        v = rng.normal(size=3)
        if np.linalg.norm(v) >= ZERO_NORM:
            return direction_from_array(v)


@dataclass(frozen=True, eq=False)
class QubitState:
    """
    自旋1/2体系的密度矩阵

    构造时检查厄米性、迹和半正定性，矩阵本身被设为只读
    """
    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (2, 2):
            raise InvalidState(f"density matrix must be 2x2, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > TOLERANCE:
            raise InvalidState("density matrix is not Hermitian")
        trace = np.trace(rho)
        if abs(trace - 1.0) > TOLERANCE:
            raise InvalidState(f"density matrix trace is {trace.real:.15g}, expected 1")
        eigenvalues = np.linalg.eigvalsh(rho)
        if eigenvalues.min() < -TOLERANCE or eigenvalues.max() > 1.0 + TOLERANCE:
            raise InvalidState(f"density matrix eigenvalues {eigenvalues} outside [0, 1]")
        rho.setflags(write=False)
        object.__setattr__(self, 'rho', rho)

    @classmethod
    def maximally_mixed(cls):
        return cls(IDENTITY / 2)

    @classmethod
    def from_bloch(cls, r):
        """
        由 Bloch 向量 r (|r| <= 1) 构造态 (I + r·σ)/2

        Args:
            r: 三个实数的序列，|r| = 1 为纯态，|r| < 1 为混合态
        """
        r = np.asarray(r, dtype=float)
        if r.shape != (3,):
            raise InvalidState(f"Bloch vector must have 3 components, got {r.shape}")
        length = float(np.linalg.norm(r))
        if length > 1.0 + TOLERANCE:
            raise InvalidState(f"Bloch vector length {length:.6g} exceeds 1")
        if length > 1.0:
            r = r / length
        return cls((IDENTITY + sum(c * s for c, s in zip(r, PAULI))) / 2)

    @classmethod
    def pure(cls, n):
        """沿方向 n 自旋向上的纯态"""
        return cls.from_bloch(n.as_array())

    def bloch_vector(self):
        return np.array([np.trace(self.rho @ s).real for s in PAULI])

    def purity(self):
        return float(np.trace(self.rho @ self.rho).real)

    def to_dict(self):
        return {'bloch': self.bloch_vector().tolist(), 'purity': self.purity()}


def random_state(rng):
    """在 Bloch 球内均匀抽取一个(一般为混合的)态"""
    direction = random_direction(rng)
    radius = rng.random() ** (1.0 / 3.0)
    return QubitState.from_bloch(radius * direction.as_array())


@dataclass(frozen=True, eq=False)
class SpinObservable:
    """沿某个方向的自旋观测量 σ·n，本征值为 ±1"""
    direction: BlochVector
    matrix: np.ndarray


@dataclass(frozen=True)
class SpinRotation:
    """
    测量之间的进动：绕 axis 以 angular_rate (弧度/单位时间) 旋转

    默认 angular_rate = 0，即自由粒子的恒等演化
    """
    axis: BlochVector = Z_AXIS
    angular_rate: float = 0.0

    @classmethod
    def identity(cls):
        return cls()

    def unitary(self, dt):
        """U = exp(-i (angular_rate·dt/2) σ·axis)"""
        theta = self.angular_rate * dt
        return expm(-0.5j * theta * observable(self.axis).matrix)

    def to_dict(self):
        return {'axis': self.axis.to_list(), 'angular_rate': self.angular_rate}


def observable(n):
    """
    构造沿方向 n 的 Pauli 观测量 σ·n

    Args:
        n (BlochVector): 测量方向

    Returns:
        SpinObservable: 矩阵平方为单位阵，本征值 ±1
    """
    matrix = n.x * SIGMA_X + n.y * SIGMA_Y + n.z * SIGMA_Z
    matrix.setflags(write=False)
    return SpinObservable(direction=n, matrix=matrix)


def projector(n, s):
    """结果 s 对应的投影算符 (I + s·σ·n)/2"""
    return (IDENTITY + int(s) * observable(n).matrix) / 2


def born_probability(state, n, s):
    """
    Born 规则: tr(P·rho)，截断到 [0, 1]

    Args:
        state (QubitState): 测量前的态
        n (BlochVector): 测量方向
        s (Outcome): 结果

    Returns:
        float: 得到结果 s 的概率
    """
    p = float(np.trace(projector(n, s) @ state.rho).real)
    return min(1.0, max(0.0, p))


def collapse(state, n, s):
    """
    测量得到结果 s 后的态 P·rho·P / tr(P·rho·P)

    Raises:
        ImpossibleOutcome: 该结果的概率小于 1e-12
    """
    p = born_probability(state, n, s)
    if p < TOLERANCE:
        raise ImpossibleOutcome(f"outcome {int(s):+d} along {n} has probability {p:.3g}")
    # 秩1投影: P·rho·P = tr(P·rho)·P，归一化后恰为 P 本身
    return QubitState(projector(n, s))


def evolve(state, rotation, dt):
    """
    在两次测量之间按 rotation 演化 dt 时间: rho -> U·rho·U†

    Args:
        state (QubitState): 当前态
        rotation (SpinRotation): 进动参数
        dt (float): 时间间隔，必须非负

    Returns:
        QubitState: 演化后的态；恒等演化时直接返回原对象
    """
    if dt < 0:
        raise InvalidParameter(f"evolution interval must be non-negative, got {dt}")
    if rotation.angular_rate * dt == 0.0:
        return state
    u = rotation.unitary(dt)
    rho = u @ state.rho @ u.conj().T
    return QubitState((rho + rho.conj().T) / 2)


def outcome_probabilities(state, n):
    """
    两个结果的概率 (p(+1), p(-1))

    小于容差的分支被置零并把质量归到另一个分支，
    保证抽样永远不会落在无法坍缩的分支上
    """
    p_up = born_probability(state, n, Outcome.UP)
    if p_up < TOLERANCE:
        p_up = 0.0
    elif p_up > 1.0 - TOLERANCE:
        p_up = 1.0
    return p_up, 1.0 - p_up


def measure(state, n, rng):
    """
    按 Born 规则抽样一次测量并坍缩

    Returns:
        tuple: (Outcome, QubitState)
    """
    p_up, _ = outcome_probabilities(state, n)
    s = Outcome.UP if rng.random() < p_up else Outcome.DOWN
    return s, collapse(state, n, s)
