# optimizer.py
"""
在方向三元组 (a, b, c) 上最大化 |a·b - a·c| + b·c

泛函在公共转动下不变，因此固定 a = z 轴、b 在 xz 平面内，
只剩三个角度：b 的极角，c 的极角和方位角
"""
import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import InvalidParameter, ConsistencyError
from core.inequality import quantum_functional
from core.qubit import BlochVector, Z_AXIS, X_AXIS, ZERO_NORM, direction_from_array, make_direction

logger = logging.getLogger(__name__)

INITIAL_STEP = math.pi / 8
MAX_SWEEPS = 100000
SWEEP_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DirectionTriple:
    """三个测量方向，分别绑定到 t1, t2, t3"""
    a: BlochVector
    b: BlochVector
    c: BlochVector

    def __iter__(self):
        return iter((self.a, self.b, self.c))

    def functional(self):
        return quantum_functional(self.a, self.b, self.c)

    def to_dict(self):
        return {'a': self.a.to_list(), 'b': self.b.to_list(), 'c': self.c.to_list()}


@dataclass(frozen=True)
class OptimizationResult:
    """
    搜索结果

    value 总是在 best 上重新计算，不沿用搜索过程中的中间值；
    history 记录每次重启后的全局最优值，单调不减
    """
    best: DirectionTriple
    value: float
    restarts_used: int
    converged: bool
    angles: tuple = ()
    history: tuple = field(default=(), repr=False)

    def to_dict(self):
        return {
            'best': self.best.to_dict(),
            'angles': {'theta_b': self.angles[0], 'theta_c': self.angles[1], 'phi_c': self.angles[2]},
            'value': self.value,
            'restarts_used': self.restarts_used,
            'converged': self.converged,
        }


def sqrt2_instance():
    """b = z, c = x, a = (b - c)/√2，此时 b·c = 0，泛函取 √2"""
    b, c = Z_AXIS, X_AXIS
    return DirectionTriple(a=make_direction(b.x - c.x, b.y - c.y, b.z - c.z), b=b, c=c)


def triple_from_angles(theta_b, theta_c, phi_c):
    """规范坐标系中的三元组：a = z，b 在 xz 平面"""
    b = BlochVector(math.sin(theta_b), 0.0, math.cos(theta_b))
    c = BlochVector(
        math.sin(theta_c) * math.cos(phi_c),
        math.sin(theta_c) * math.sin(phi_c),
        math.cos(theta_c),
    )
    return DirectionTriple(a=Z_AXIS, b=b, c=c)


def reduced_functional(angles):
    """规范坐标下的泛函，纯 math 实现供局部搜索调用"""
    theta_b, theta_c, phi_c = angles
    ab = math.cos(theta_b)
    ac = math.cos(theta_c)
    bc = math.sin(theta_b) * math.sin(theta_c) * math.cos(phi_c) + ab * ac
    return abs(ab - ac) + bc


def _perpendicular_unit(axis, *candidates):
    """取第一个与 axis 不共线的候选向量，去掉平行分量后归一化"""
    for v in candidates:
        perp = v - axis.dot(v) * axis
        norm = np.linalg.norm(perp)
        if norm >= ZERO_NORM:
            return perp / norm
    raise ValueError("no perpendicular candidate")


def canonical_frame(triple):
    """
    把三元组整体转动到规范坐标系

    Args:
        triple (DirectionTriple): 任意三元组

    Returns:
        tuple: (转动后的 DirectionTriple, (theta_b, theta_c, phi_c))
    """
    a, b, c = (v.as_array() for v in triple)
    e1 = _perpendicular_unit(a, b, c, np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    e2 = np.cross(a, e1)
    rotation = np.vstack([e1, e2, a])
    rb = rotation @ b
    rc = rotation @ c
    theta_b = math.atan2(rb[0], rb[2])
    theta_c = math.acos(min(1.0, max(-1.0, rc[2])))
    phi_c = math.atan2(rc[1], rc[0])
    rotated = DirectionTriple(
        a=Z_AXIS,
        b=direction_from_array([rb[0], 0.0, rb[2]]),
        c=direction_from_array(rc),
    )
    return rotated, (theta_b, theta_c, phi_c)


def local_search(start, tol, initial_step=INITIAL_STEP, max_sweeps=MAX_SWEEPS):
    """
    循环坐标上升，步长从 initial_step 减半到 tol

    每个步长下反复扫描三个坐标的正负方向，直到一整轮没有改进再减半；
    接受条件是严格增大，所以返回的 trace 单调递增

    Returns:
        tuple: (最优角度, 最优值, trace, 是否在 max_sweeps 内收敛)
    """
    x = list(start)
    fx = reduced_functional(x)
    trace = [fx]
    step = initial_step
    sweeps = 0
    while step >= tol:
        improved = True
        while improved:
            if sweeps >= max_sweeps:
                logger.warning(f"local search hit max_sweeps={max_sweeps} at step {step:.3g}")
                return tuple(x), fx, trace, False
            sweeps += 1
            improved = False
            for i in range(3):
                for sign in (1.0, -1.0):
                    trial = list(x)
                    trial[i] += sign * step
                    f_trial = reduced_functional(trial)
                    if f_trial > fx:
                        x, fx = trial, f_trial
                        trace.append(fx)
                        improved = True
                        break
        step /= 2
    return tuple(x), fx, trace, True


def _random_start(rng):
    return (rng.uniform(0.0, math.pi), rng.uniform(0.0, math.pi), rng.uniform(0.0, 2 * math.pi))


def optimize_directions(restarts, tol, rng, warm_start=None, initial_step=INITIAL_STEP,
                        max_sweeps=MAX_SWEEPS, workers=1):
    """
    多起点局部搜索，寻找泛函最大值

    起点按顺序从 rng 中抽取(每个起点三个角度)，之后各次重启互不依赖，
    可以并行执行；归约时按重启序号比较，相等取先找到的

    Args:
        restarts (int): 重启次数，>= 1
        tol (float): 最终步长，> 0
        rng (numpy.random.Generator): 已设定种子的随机数流
        warm_start (DirectionTriple): 可选，替换第一个随机起点
        workers (int): 并行线程数

    Returns:
        OptimizationResult
    """
    if restarts < 1:
        raise InvalidParameter(f"restarts must be >= 1, got {restarts}")
    if not tol > 0:
        raise InvalidParameter(f"tol must be > 0, got {tol}")

    starts = [_random_start(rng) for _ in range(restarts)]
    if warm_start is not None:
        starts[0] = canonical_frame(warm_start)[1]

    def run(start):
        return local_search(start, tol, initial_step=initial_step, max_sweeps=max_sweeps)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, starts))
    else:
        outcomes = [run(s) for s in starts]

    best_angles, best_value = None, -math.inf
    history = []
    converged = True
    for index, (angles, value, _, ok) in enumerate(outcomes):
        converged = converged and ok
        if value > best_value:
            best_angles, best_value = angles, value
            logger.debug(f"restart {index}: new incumbent {value:.12f}")
        history.append(best_value)

    best = triple_from_angles(*best_angles)
    value = best.functional()
    logger.info(f"优化完成: {restarts} 次重启, 最优值 {value:.12f}, converged={converged}")
    return OptimizationResult(
        best=best,
        value=value,
        restarts_used=restarts,
        converged=converged,
        angles=tuple(float(t) for t in best_angles),
        history=tuple(history),
    )


def grid_search(resolution_deg=1.0):
    """
    稠密网格上的穷举，作为局部搜索的对照

    theta_b, theta_c 取 [0°, 180°]，phi_c 取 [0°, 360°)，步长 resolution_deg

    Returns:
        tuple: (最大值, (theta_b, theta_c, phi_c) 弧度)
    """
    if not resolution_deg > 0:
        raise InvalidParameter(f"grid resolution must be > 0, got {resolution_deg}")
    polar = np.deg2rad(np.arange(0.0, 180.0 + resolution_deg / 2, resolution_deg))
    azimuth = np.deg2rad(np.arange(0.0, 360.0, resolution_deg))
    theta_c, phi_c = np.meshgrid(polar, azimuth, indexing='ij')
    cos_c, sin_c_cos_phi = np.cos(theta_c), np.sin(theta_c) * np.cos(phi_c)

    best_value, best_angles = -math.inf, None
    for theta_b in polar:
        ab = math.cos(theta_b)
        values = np.abs(ab - cos_c) + math.sin(theta_b) * sin_c_cos_phi + ab * cos_c
        index = np.unravel_index(np.argmax(values), values.shape)
        if values[index] > best_value:
            best_value = float(values[index])
            best_angles = (float(theta_b), float(theta_c[index]), float(phi_c[index]))
    return best_value, best_angles


@dataclass(frozen=True)
class SweepRow:
    """扫描表的一行：u = b·c 以及在显式三元组上算出的泛函值"""
    u: float
    functional: float
    analytic: float
    triple: DirectionTriple

    def to_dict(self):
        return {'u': self.u, 'functional': self.functional}


def sweep_triple(u):
    """
    构造 b·c = u 且 a 平行于 b - c 的共面三元组

    b = (sinθ, 0, cosθ), c = (sinθ, 0, -cosθ)，b·c = -cos2θ，
    b - c 沿 z 轴，所以 a = z，泛函等于 2cosθ + u = √(2-2u) + u
    """
    theta = math.acos(-u) / 2
    b = BlochVector(math.sin(theta), 0.0, math.cos(theta))
    c = BlochVector(math.sin(theta), 0.0, -math.cos(theta))
    return DirectionTriple(a=Z_AXIS, b=b, c=c)


def sweep_functional(grid_points):
    """
    u = b·c 在 [-1, 1] 均匀网格上的 g(u) = √(2-2u) + u

    每个格点都在显式三元组上用 quantum_functional 复核，偏差超过 1e-12 即报错

    Args:
        grid_points (int): 格点数，>= 2

    Returns:
        list[SweepRow]
    """
    if grid_points < 2:
        raise InvalidParameter(f"grid_points must be >= 2, got {grid_points}")
    rows = []
    for k in range(grid_points):
        u = -1.0 + 2.0 * k / (grid_points - 1)
        triple = sweep_triple(u)
        value = triple.functional()
        analytic = math.sqrt(2.0 - 2.0 * u) + u
        if abs(value - analytic) > SWEEP_TOLERANCE:
            raise ConsistencyError(f"sweep row u={u}: functional {value!r} != analytic {analytic!r}")
        rows.append(SweepRow(u=u, functional=value, analytic=analytic, triple=triple))
    return rows
