"""
参考模型模块
单位磁场下的半直线模型（常数 a₀）、全直线 Landau 能级检验，以及曲率诱导的一维 Schrödinger 束缚态
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, Field
from scipy.integrate import quad
from scipy.linalg import eigh, eigh_tridiagonal
from scipy.optimize import brentq, minimize_scalar

from curve_geometry import CurvatureProfile
from errors import GeometryError, SolverError
from legendre_galerkin import LegendreBasis, constrained_basis

logger = logging.getLogger(__name__)


# ============= 数据模型 =============

class HalflineReport(BaseModel):
    a0: float = Field(..., description="g(λ) = min_ξ ℓ(λ,ξ) 的零点")
    xi_min: float = Field(..., description="λ = a₀ 时内层极小点 ξ̂（理论值 −a₀）")
    tail_mass: float = Field(..., description="u_{a₀,−a₀} 在 t > 8 的质量")
    T: float = Field(..., description="半直线截断长度")
    N: int = Field(..., description="Legendre 基函数个数")


class BoundStateReport(BaseModel):
    delta: float
    lambda_min: float = Field(..., description="两个候选中的较小值")
    lambda_minus: float = Field(..., description="λ₁(D_s² − κ²/(12(1−δκ)²))")
    lambda_plus: float = Field(..., description="λ₁(D_s² − κ²/(12(1+δκ)²))")
    negative: bool = Field(..., description="是否找到负特征值")
    T: float = Field(..., description="实际截断长度")
    warnings: list = Field(default_factory=list)


# ============= 半直线模型 =============

class HalflineForm:
    def __init__(self, T: float = 12.0, N: int = 96):
        """
        Q⁻_{λ,ξ,ℝ₊}(u) = ‖(−∂_t + ξ + t)u‖² + λ|u(0)|² − λ²‖u‖²，[0, T] 上 u(T) = 0

        A(ξ) = A₀ + ξA₁ + ξ²I 预先组装，内层 ξ 极小化不再重复积分。
        """
        if T < 12:
            logger.warning("半直线截断 T=%.3g < 12，高斯尾部可能未衰减", T)
        self.T, self.N = T, N
        basis = LegendreBasis(0.0, T, N)
        self.basis = basis
        self.Z = constrained_basis(basis.vb[None, :])
        V = basis.V @ self.Z
        dV = basis.dV @ self.Z
        w = basis.w
        K0 = -dV + basis.x[:, None] * V
        self.A0 = K0.T @ (w[:, None] * K0)
        cross = K0.T @ (w[:, None] * V)
        self.A1 = cross + cross.T
        self.E = np.outer(basis.va @ self.Z, basis.va @ self.Z)

    def ground_state(self, lam: float, xi: float) -> Tuple[float, np.ndarray]:
        S = self.A0 + xi * self.A1 + (xi * xi - lam * lam) * np.eye(self.A0.shape[0]) + lam * self.E
        S = 0.5 * (S + S.T)
        w, v = eigh(S, subset_by_index=[0, 0])
        return float(w[0]), self.Z @ v[:, 0]

    def ground(self, lam: float, xi: float) -> float:
        return self.ground_state(lam, xi)[0]

    def inner_min(self, lam: float, step: float = 0.25) -> Tuple[float, float]:
        """min_ξ ℓ(λ,ξ)：在 [−T/2, 3] 上扫描，再做有界 Brent"""
        grid = np.arange(-0.5 * self.T, 3.0 + 1e-12, step)
        vals = np.array([self.ground(lam, x) for x in grid])
        i = int(np.argmin(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        res = minimize_scalar(lambda x: self.ground(lam, x), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        if not res.success:
            raise SolverError(f"半直线内层极小化停滞: λ={lam:.6g}")
        if res.fun <= vals[i]:
            return float(res.x), float(res.fun)
        return float(grid[i]), float(vals[i])


def halfline_ground(lam: float, xi: float, T: float = 12.0, N: int = 96) -> Tuple[float, np.ndarray]:
    """
    半直线二次型的最低特征值与特征向量（Legendre 系数）

    Args:
        lam: λ ≥ 0
        xi: ξ
        T: 截断长度
        N: 基函数个数

    Returns:
        (ℓ, 系数向量)
    """
    return HalflineForm(T, N).ground_state(lam, xi)


def halfline_a0(T: float = 12.0, N: int = 96, eps: float = 1e-3) -> HalflineReport:
    """
    a₀：g(λ) = min_ξ ℓ(λ,ξ) 在 (0, √2) 内的零点

    Raises:
        SolverError: (ε, √2−ε) 内没有变号
    """
    form = HalflineForm(T, N)
    g = lambda lam: form.inner_min(lam)[1]
    lo, hi = eps, math.sqrt(2.0) - eps
    g_lo, g_hi = g(lo), g(hi)
    logger.debug("g(%.3g) = %.6g, g(%.6g) = %.6g", lo, g_lo, hi, g_hi)
    if not (g_lo > 0 > g_hi):
        raise SolverError(f"g 在 ({lo:.3g}, {hi:.6g}) 内无变号: g={g_lo:.3e}, {g_hi:.3e}")
    a0 = brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)

    xi_min, _ = form.inner_min(a0)
    _, coef = form.ground_state(a0, xi_min)
    y, wy = leggauss(200)
    x = 8.0 + 0.5 * (T - 8.0) * (y + 1.0)
    u = form.basis.evaluate(x, coef)
    tail = float(np.sum(0.5 * (T - 8.0) * wy * u ** 2) / np.sum(form.basis.w * (form.basis.V @ coef) ** 2))
    logger.info("a₀ = %.12f, ξ̂ = %.10f, 尾部质量 = %.2e", a0, xi_min, tail)
    return HalflineReport(a0=a0, xi_min=xi_min, tail_mass=tail, T=T, N=N)


# ============= 全直线 Landau 能级 =============

def line_ground(lam: float, xi: float, T: float = 12.0, N: int = 160) -> Tuple[float, np.ndarray, LegendreBasis]:
    """‖(−∂_t + ξ + t)u‖² − λ²‖u‖² 在 [−T, T] 上（两端 Dirichlet）的最低特征值"""
    basis = LegendreBasis(-T, T, N)
    Z = constrained_basis(np.vstack([basis.va, basis.vb]))
    Kop = (-basis.dV + (xi + basis.x)[:, None] * basis.V) @ Z
    S = Kop.T @ (basis.w[:, None] * Kop)
    w, v = eigh(0.5 * (S + S.T), subset_by_index=[0, 0])
    return float(w[0] - lam * lam), Z @ v[:, 0], basis


def landau_check(lam: float, xi: float, T: float = 12.0, N: int = 160, mass_tol: float = 1e-12) -> float:
    """
    全直线二次型下确界与 Landau 能级 2 − λ² 的偏差

    Raises:
        SolverError: 截断过小（|t| > T − 2 处的质量超过 mass_tol）
    """
    if lam < 0:
        raise ValueError(f"λ 必须非负: {lam}")
    ell, coef, basis = line_ground(lam, xi, T, N)
    u = basis.V @ coef
    outer = np.abs(basis.x) > T - 2.0
    mass = float(np.sum(basis.w[outer] * u[outer] ** 2) / np.sum(basis.w * u ** 2))
    if mass > mass_tol:
        raise SolverError(f"截断过小: T={T:.3g}, ξ={xi:.3g}, 边界质量 {mass:.2e}")
    return ell - (2.0 - lam * lam)


# ============= 曲率诱导束缚态 =============

def _lowest_schrodinger(potential: np.ndarray, ds: float) -> float:
    d = 2.0 / ds ** 2 + potential
    e = np.full(len(potential) - 1, -1.0 / ds ** 2)
    w = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, 0))
    return float(w[0])


def curvature_bound_state(profile: CurvatureProfile, delta: float, T: float = 100.0,
                          N: Optional[int] = None, ds: float = 0.02) -> BoundStateReport:
    """
    λ = min(λ₁(D_s² − κ²/(12(1−δκ)²)), λ₁(D_s² − κ²/(12(1+δκ)²)))

    截断区间 [−T, T] 两端 Dirichlet。弱势阱的束缚态能量约为 −(∫|V|)²/4，
    衰减长度 1/√|E| 可能远大于 T，此时自动放大 T。

    Args:
        profile: 曲率剖面
        delta: 条带半宽
        T: 最小截断长度
        N: 网格点数（默认由步长 ds 决定）

    Returns:
        BoundStateReport；未找到负特征值时记为警告
    """
    kmax = profile.max_abs()
    if delta * kmax >= 1:
        raise GeometryError(f"δ·max|κ| = {delta * kmax:.4g} ≥ 1")

    L0 = profile.support
    strength, _ = quad(lambda s: float(profile.kappa(s)) ** 2 / 12.0, -L0, L0, points=[0.0], limit=200)
    if strength > 0:
        T = max(T, L0 + 10.0 / (0.5 * strength))
    if N is None:
        N = int(math.ceil(2 * T / ds)) + 1
    s = np.linspace(-T, T, N)[1:-1]
    h = s[1] - s[0]
    kappa = profile.kappa(s)

    lam_minus = _lowest_schrodinger(-kappa ** 2 / (12.0 * (1.0 - delta * kappa) ** 2), h)
    lam_plus = _lowest_schrodinger(-kappa ** 2 / (12.0 * (1.0 + delta * kappa) ** 2), h)
    lam = min(lam_minus, lam_plus)
    warnings = []
    if lam >= 0:
        msg = f"未找到负特征值: λ={lam:.3e}（势阱过弱或截断 T={T:.3g} 不足）"
        logger.warning(msg)
        warnings.append(msg)
    return BoundStateReport(delta=delta, lambda_min=lam, lambda_minus=lam_minus, lambda_plus=lam_plus,
                            negative=lam < 0, T=T, warnings=warnings)
