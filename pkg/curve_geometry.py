"""
曲线几何模块
由紧支撑曲率剖面构造弧长参数化的基曲线，并提供管状坐标映射
Θ(s,t) = γ(s) + t·n(s) 以及度量因子 m(s,t) = 1 − t·κ(s)
"""
import logging
import math
from typing import Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from errors import GeometryError, SolverError

logger = logging.getLogger(__name__)


# ============= 光滑截断函数 =============

def _psi(y: np.ndarray) -> np.ndarray:
    pos = y > 0
    safe = np.where(pos, y, 1.0)
    return np.where(pos, np.exp(-1.0 / safe), 0.0)


def _psi_prime(y: np.ndarray) -> np.ndarray:
    pos = y > 0
    safe = np.where(pos, y, 1.0)
    return np.where(pos, np.exp(-1.0 / safe) / safe ** 2, 0.0)


def smooth_step(y):
    """C^∞ 阶跃：y ≤ 0 时为 0，y ≥ 1 时为 1"""
    y = np.asarray(y, dtype=float)
    a, b = _psi(y), _psi(1.0 - y)
    return a / (a + b)


def smooth_step_prime(y):
    y = np.asarray(y, dtype=float)
    a, b = _psi(y), _psi(1.0 - y)
    da, db = _psi_prime(y), -_psi_prime(1.0 - y)
    return (da * b - a * db) / (a + b) ** 2


def cutoff(x):
    """|x| ≤ 1/2 时为 1，|x| ≥ 1 时恰为 0"""
    x = np.asarray(x, dtype=float)
    return smooth_step(2.0 * (1.0 - np.abs(x)))


def cutoff_prime(x):
    x = np.asarray(x, dtype=float)
    return -2.0 * np.sign(x) * smooth_step_prime(2.0 * (1.0 - np.abs(x)))


# ============= 数据模型 =============

class CurvatureProfile(BaseModel):
    """曲率剖面 κ(s)，在 |s| > L₀ 处恒为零"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["zero", "gaussian_bump", "polynomial"] = Field(
        default="gaussian_bump", description="剖面类型：零曲率 / 带光滑截断的高斯凸包 / 分段多项式")
    amplitude: float = Field(default=0.5, description="曲率幅值（长度倒数）")
    width: float = Field(default=1.0, gt=0, description="高斯凸包宽度 w")
    support: float = Field(default=3.0, gt=0, description="支撑半长 L₀")
    offset: float = Field(default=0.0, description="高斯凸包中心 s_c（截断函数仍以 0 为中心）")

    @field_validator("amplitude")
    @classmethod
    def _finite_amplitude(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("曲率幅值必须是有限数")
        return v

    @model_validator(mode="after")
    def _offset_inside(self) -> "CurvatureProfile":
        if not abs(self.offset) < self.support:
            raise ValueError(f"凸包中心 {self.offset} 不在支撑 (-{self.support}, {self.support}) 内")
        return self

    def kappa(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "zero" or self.amplitude == 0.0:
            return np.zeros_like(s)
        x = s / self.support
        if self.kind == "gaussian_bump":
            return self.amplitude * np.exp(-((s - self.offset) / self.width) ** 2) * cutoff(x)
        inside = np.abs(x) < 1.0
        return np.where(inside, self.amplitude * (1.0 - x ** 2) ** 2, 0.0)

    def kappa_prime(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "zero" or self.amplitude == 0.0:
            return np.zeros_like(s)
        x = s / self.support
        if self.kind == "gaussian_bump":
            g = np.exp(-((s - self.offset) / self.width) ** 2)
            return self.amplitude * g * (-2.0 * (s - self.offset) / self.width ** 2 * cutoff(x)
                                         + cutoff_prime(x) / self.support)
        inside = np.abs(x) < 1.0
        return np.where(inside, -4.0 * self.amplitude * x * (1.0 - x ** 2) / self.support, 0.0)

    def max_abs(self) -> float:
        """max|κ|；中心在 0 时于 s=0 处取到，否则扫描后有界细化"""
        if self.is_zero():
            return 0.0
        if self.kind == "polynomial" or self.offset == 0.0:
            return abs(self.amplitude)
        s = np.linspace(-self.support, self.support, 2001)
        k = int(np.argmax(np.abs(self.kappa(s))))
        lo, hi = s[max(k - 1, 0)], s[min(k + 1, len(s) - 1)]
        res = minimize_scalar(lambda x: -abs(float(self.kappa(x))), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        return max(abs(float(self.kappa(s[k]))), -float(res.fun))

    def is_zero(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0.0

    def is_even(self, tol: float = 1e-14) -> bool:
        """在 [0, L₀] 的采样点上比较 κ(s) 与 κ(−s)"""
        if self.is_zero():
            return True
        s = np.linspace(0.0, self.support, 1001)
        gap = np.max(np.abs(self.kappa(s) - self.kappa(-s)))
        return bool(gap <= tol * max(self.max_abs(), 1.0))

    def total_turning(self) -> float:
        """∫κ ds（自适应求积）"""
        if self.is_zero():
            return 0.0
        value, _ = quad(lambda s: float(self.kappa(s)), -self.support, self.support,
                        limit=400, epsabs=1e-14, epsrel=1e-13)
        return value


# ============= 基曲线 =============

class BaseCurve:
    def __init__(self, profile: CurvatureProfile, s_grid: np.ndarray, theta: np.ndarray,
                 xy: np.ndarray, tol: float):
        """
        弧长参数化曲线，支撑外用精确直线延拓

        Args:
            profile: 曲率剖面
            s_grid: [−L₀, L₀] 上的均匀网格
            theta: 网格上的切角 θ(s)
            xy: 网格上的位置 γ(s)，形状 (n, 2)
            tol: 构造时使用的积分容差
        """
        self.profile = profile
        self.tol = tol
        self.L0 = profile.support
        self.s_grid = s_grid
        self._theta_spline = CubicSpline(s_grid, theta)
        self._x_spline = CubicSpline(s_grid, xy[:, 0])
        self._y_spline = CubicSpline(s_grid, xy[:, 1])
        self.theta_minus, self.theta_plus = float(theta[0]), float(theta[-1])
        self.end_minus = xy[0].copy()
        self.end_plus = xy[-1].copy()

    def kappa(self, s):
        return self.profile.kappa(s)

    def theta(self, s):
        s = np.asarray(s, dtype=float)
        inner = np.clip(s, -self.L0, self.L0)
        out = self._theta_spline(inner)
        out = np.where(s >= self.L0, self.theta_plus, out)
        return np.where(s <= -self.L0, self.theta_minus, out)

    def tangent(self, s):
        th = self.theta(s)
        return np.stack([np.cos(th), np.sin(th)], axis=-1)

    def normal(self, s):
        """n(s) = γ'(s)^⊥，(γ', n) 为正向标准正交标架"""
        th = self.theta(s)
        return np.stack([-np.sin(th), np.cos(th)], axis=-1)

    def gamma(self, s):
        s = np.asarray(s, dtype=float)
        inner = np.clip(s, -self.L0, self.L0)
        pts = np.stack([self._x_spline(inner), self._y_spline(inner)], axis=-1)

        # 支撑外：精确直线
        right = s > self.L0
        left = s < -self.L0
        if np.any(right):
            d = (s - self.L0)[..., None]
            ray = self.end_plus + d * np.array([math.cos(self.theta_plus), math.sin(self.theta_plus)])
            pts = np.where(right[..., None], ray, pts)
        if np.any(left):
            d = (s + self.L0)[..., None]
            ray = self.end_minus + d * np.array([math.cos(self.theta_minus), math.sin(self.theta_minus)])
            pts = np.where(left[..., None], ray, pts)
        return pts


def build_curve(profile: CurvatureProfile, tol: float = 1e-12, ds: float = 0.01) -> BaseCurve:
    """
    由曲率剖面积分出切角与位置

    θ' = κ, γ' = (cos θ, sin θ)，从 s=0（γ(0)=0, θ(0)=0）向两侧自适应积分到 ±L₀。

    Args:
        profile: 曲率剖面
        tol: 相对积分容差
        ds: 制表网格步长

    Returns:
        BaseCurve
    """
    if tol <= 0:
        raise ValueError(f"积分容差必须为正: tol={tol}")

    L0 = profile.support
    n_half = max(int(math.ceil(L0 / ds)), 8)
    s_pos = np.linspace(0.0, L0, n_half + 1)
    s_grid = np.concatenate([-s_pos[:0:-1], s_pos])

    if profile.is_zero():
        theta = np.zeros_like(s_grid)
        xy = np.stack([s_grid, np.zeros_like(s_grid)], axis=-1)
        return BaseCurve(profile, s_grid, theta, xy, tol)

    def rhs(s, y):
        return [float(profile.kappa(s)), math.cos(y[0]), math.sin(y[0])]

    branches = []
    for target in (s_pos, -s_pos):
        sol = solve_ivp(rhs, (0.0, float(target[-1])), [0.0, 0.0, 0.0], method="DOP853",
                        t_eval=target, rtol=max(tol, 2.3e-14), atol=tol * 1e-3)
        if not sol.success:
            raise SolverError(f"基曲线积分在容差 tol={tol:g} 下不收敛: {sol.message}")
        branches.append(sol.y)

    pos, neg = branches
    y_all = np.concatenate([neg[:, :0:-1], pos], axis=1)
    theta = y_all[0]
    xy = np.stack([y_all[1], y_all[2]], axis=-1)
    logger.debug("基曲线: θ(+∞)−θ(−∞)=%.12g", theta[-1] - theta[0])
    return BaseCurve(profile, s_grid, theta, xy, tol)


# ============= 管状映射 =============

class TubularMap:
    def __init__(self, curve: BaseCurve, delta: float):
        self.curve = curve
        self.delta = float(delta)
        self.L0 = curve.L0
        self.non_injectivity_risk = False
        self.min_metric = 1.0 - self.delta * curve.profile.max_abs()
        self._tree = None
        self._tree_st = None

    def kappa(self, s):
        return self.curve.kappa(s)

    def metric(self, s, t):
        """m(s,t) = 1 − t·κ(s)"""
        return 1.0 - np.asarray(t, dtype=float) * self.curve.kappa(s)

    def theta_map(self, s, t):
        """Θ(s,t) = γ(s) + t·n(s)，返回形状 (..., 2)"""
        t = np.asarray(t, dtype=float)
        return self.curve.gamma(s) + t[..., None] * self.curve.normal(s)

    def to_complex(self, s, t):
        p = self.theta_map(s, t)
        return p[..., 0] + 1j * p[..., 1]

    def jacobian(self, s, t):
        """JacΘ 的列：∂_sΘ = m·γ'，∂_tΘ = n"""
        m = self.metric(s, t)
        return m[..., None] * self.curve.tangent(s), self.curve.normal(s)

    def _build_tree(self):
        margin = 4.0 * self.delta + 1.0
        step = min(self.delta / 4.0, 0.05)
        s = np.arange(-self.L0 - margin, self.L0 + margin + step / 2, step)
        t = np.linspace(-self.delta, self.delta, max(int(math.ceil(2 * self.delta / step)), 2) + 1)
        S, T = np.meshgrid(s, t, indexing="ij")
        pts = self.theta_map(S.ravel(), T.ravel())
        self._tree = cKDTree(pts)
        self._tree_st = np.stack([S.ravel(), T.ravel()], axis=-1)
        return step

    def inverse(self, x, y, strict: bool = True, max_iter: int = 50):
        """
        笛卡尔坐标 → 管状坐标 (s,t)，牛顿迭代

        Args:
            x, y: 点的坐标（同形状数组）
            strict: 为 True 时区域外的点抛出 GeometryError

        Returns:
            (s, t)
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = x.shape
        target = np.stack([x.ravel(), y.ravel()], axis=-1)
        if self._tree is None:
            self._build_tree()
        _, idx = self._tree.query(target)
        s = self._tree_st[idx, 0].copy()
        t = self._tree_st[idx, 1].copy()
        for _ in range(max_iter):
            r = target - self.theta_map(s, t)
            tan = self.curve.tangent(s)
            nor = self.curve.normal(s)
            m = self.metric(s, t)
            ds_ = np.sum(r * tan, axis=-1) / m
            dt_ = np.sum(r * nor, axis=-1)
            s += ds_
            t += dt_
            if np.max(np.abs(ds_) + np.abs(dt_), initial=0.0) < 1e-14 * (1.0 + np.max(np.abs(s), initial=0.0)):
                break
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(t))):
            raise GeometryError("逆映射牛顿迭代发散：点可能位于曲率中心附近，不在条带内")
        if strict and np.any(np.abs(t) > self.delta * (1.0 + 1e-12)):
            bad = int(np.argmax(np.abs(t)))
            raise GeometryError(f"点不在条带内: (x,y)=({target[bad, 0]:.6g}, {target[bad, 1]:.6g}), t={t[bad]:.6g}")
        return s.reshape(shape), t.reshape(shape)

    def boundary_distance(self, s0: float, t0: float, span: float = None, n: int = 4001) -> float:
        """点 Θ(s0,t0) 到两条边界曲线 Γ^± 的采样距离"""
        span = span if span is not None else 4.0 * self.delta + 1.0
        s = np.linspace(s0 - span, s0 + span, n)
        p = self.theta_map(np.array(s0), np.array(t0))
        best = np.inf
        for side in (-1.0, 1.0):
            q = self.theta_map(s, np.full_like(s, side * self.delta))
            best = min(best, float(np.min(np.hypot(q[:, 0] - p[0], q[:, 1] - p[1]))))
        return best


def tubular_map(curve: BaseCurve, delta: float) -> TubularMap:
    """
    构造管状映射并检查 m > 0 与采样网格上的单射性

    Args:
        curve: 基曲线
        delta: 半宽 δ

    Returns:
        TubularMap
    """
    if delta <= 0:
        raise GeometryError(f"半宽必须为正: δ={delta}")
    kmax = curve.profile.max_abs()
    if delta * kmax >= 1.0:
        raise GeometryError(f"δ·max|κ| = {delta * kmax:.6g} ≥ 1，度量因子 m 会变为非正")

    tmap = TubularMap(curve, delta)
    if curve.profile.is_zero():
        return tmap

    step = tmap._build_tree()
    pts = tmap._tree.data
    st = tmap._tree_st
    far = 4.0 * step / tmap.min_metric
    risky = overlapping = 0
    for i, j in tmap._tree.query_pairs(r=step):
        if abs(st[i, 0] - st[j, 0]) > far:
            risky += 1
            if np.hypot(*(pts[i] - pts[j])) < 0.5 * step:
                overlapping += 1
    if overlapping:
        raise GeometryError(f"管状映射在采样网格上自交: {overlapping} 对参数远离的采样点重合")
    if risky:
        tmap.non_injectivity_risk = True
        logger.warning("管状映射存在非单射风险: %d 对参数远离的采样点距离小于网格步长", risky)
    return tmap


def sample_frame(curve: BaseCurve, s: np.ndarray) -> Tuple[float, float]:
    """返回采样点上 max|γ'·n| 与 max||n|−1|（标架正交性检查）"""
    tan = curve.tangent(s)
    nor = curve.normal(s)
    return (float(np.max(np.abs(np.sum(tan * nor, axis=-1)))),
            float(np.max(np.abs(np.linalg.norm(nor, axis=-1) - 1.0))))
