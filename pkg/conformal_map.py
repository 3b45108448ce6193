"""
共形映射模块
构造双全纯映射 f = α + iβ : Ω → S_δ（β 调和，α 为其调和共轭），
以及复合单位圆盘映射 g : 𝔻 → Ω，g(0) = z_min
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import RectBivariateSpline

from curve_geometry import TubularMap
from errors import GeometryError, SolverError
from magnetic_potential import default_grid, solve_tubular_dirichlet

logger = logging.getLogger(__name__)

LOOP_TOL = 5.0
W0_LIMIT = 1.0 - 1e-8


# ============= 数据模型 =============

class DiskMapData(BaseModel):
    """g = f⁻¹ ∘ S ∘ M ∘ R 的链式法则记录，S(w) = (4δ/π)artanh(w)，M(ζ) = (ζ + w₀)/(1 + w̄₀ζ)"""
    g_prime_abs: float = Field(..., description="|g'(0)|")
    g_prime_re: float
    g_prime_im: float
    s_min: float
    t_min: float
    delta: float
    f_re: float = Field(..., description="Re f(z_min)")
    f_im: float = Field(..., description="Im f(z_min)")
    fprime_re: float = Field(..., description="Re f'(z_min)（Cauchy 积分）")
    fprime_im: float = Field(..., description="Im f'(z_min)（Cauchy 积分）")
    fprime_grad_abs: float = Field(..., description="由 ∇β 得到的 |f'(z_min)|")
    w0_re: float = Field(..., description="Möbius 参数 w₀ = tanh(πf(z_min)/(4δ))")
    w0_im: float
    strip_factor: float = Field(..., description="4δ/π")
    artanh_factor: float = Field(..., description="|1/(1 − w₀²)|")
    mobius_factor: float = Field(..., description="1 − |w₀|²")
    inverse_factor: float = Field(..., description="|(f⁻¹)'(f(z_min))| = 1/|f'(z_min)|")
    rotation: float = Field(0.0, description="圆盘旋转参数 θ")
    dist_boundary: float = Field(..., description="dist(z_min, ∂Ω)")
    koebe_ok: bool = Field(..., description="dist ≤ |g'(0)| ≤ 4·dist")
    window_ok: bool = Field(..., description="dist/2 ≤ |g'(0)| ≤ 2·dist")

    @property
    def w0(self) -> complex:
        return complex(self.w0_re, self.w0_im)

    @property
    def f_zmin(self) -> complex:
        return complex(self.f_re, self.f_im)


class ConformalReport(BaseModel):
    delta: float
    L: float
    N_s: int
    N_t: int
    identity_deviation: float = Field(..., description="‖f̃(s,t) − (s+it)‖_{C¹}")
    beta_deviation: float = Field(..., description="‖β̃ − t‖_∞")
    cr_residual: float = Field(..., description="离散 Cauchy–Riemann 残差")
    loop_residual: float = Field(..., description="内部网格单元环路积分密度的最大值")
    fprime_sup: float = Field(..., description="‖f'‖_∞（含尾部恒等行为）")
    finv_prime_sup: float = Field(..., description="‖(f⁻¹)'‖_∞")
    fprime_min: float = Field(..., description="网格上 min|f'|")
    g_prime_abs: Optional[float] = None


# ============= β 与调和共轭 =============

def solve_beta(tmap: TubularMap, L: Optional[float] = None, N_s: Optional[int] = None,
               N_t: Optional[int] = None, tol: float = 1e-8):
    """
    Δβ = 0，β|_{Γ^±} = ±δ，截断端 β(±L,t) = t

    Returns:
        (L, s, t, β, 残差)
    """
    L, s, t = default_grid(tmap, L, N_s, N_t)
    boundary = np.broadcast_to(t[None, :], (len(s), len(t))).copy()
    beta, residual = solve_tubular_dirichlet(tmap, s, t, 0.0, boundary, tol)
    logger.info("β 求解: L=%.4g, 网格 %dx%d, 残差 %.2e", L, len(s), len(t), residual)
    return L, s, t, beta, residual


def flux_gradient(tmap: TubularMap, s: np.ndarray, t: np.ndarray,
                  beta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    (∂_sβ, ∂_tβ)，其中 m∂_tβ 取自求解所用的面通量 m_{j+½}(β_{j+1} − β_j)/dt

    节点值取相邻两个面通量的平均，侧边界行线性外推。
    """
    dt = t[1] - t[0]
    t_half = 0.5 * (t[1:] + t[:-1])
    flux = tmap.metric(s[:, None], t_half[None, :]) * np.diff(beta, axis=1) / dt
    P = np.empty_like(beta)
    P[:, 1:-1] = 0.5 * (flux[:, 1:] + flux[:, :-1])
    P[:, 0] = 1.5 * flux[:, 0] - 0.5 * flux[:, 1]
    P[:, -1] = 1.5 * flux[:, -1] - 0.5 * flux[:, -2]
    m = tmap.metric(s[:, None], t[None, :])
    b_s = np.gradient(beta, s, axis=0, edge_order=2)
    return b_s, P / m


def harmonic_conjugate(tmap: TubularMap, s: np.ndarray, t: np.ndarray, beta: np.ndarray,
                       loop_tol: float = LOOP_TOL) -> Tuple[np.ndarray, float]:
    """
    沿网格线积分 ∇α = (∇β)^⊥，基点 γ(0)（s = 0, t = 0）处 α = 0

    管状坐标下 ∂_sα = m∂_tβ，∂_tα = −∂_sβ/m。先沿 t = 0 积分，再沿各条 t 方向网格线积分。
    环路残差取内部单元（去掉最外一层）的环路积分密度。

    Args:
        loop_tol: 环路残差密度与网格步长 max(ds, dt) 之比的上限

    Returns:
        (α, 内部单元环路积分密度的最大值)

    Raises:
        SolverError: 环路残差超过 loop_tol·max(ds, dt)（β 不调和）
    """
    i0 = int(np.argmin(np.abs(s)))
    j0 = int(np.argmin(np.abs(t)))
    if abs(s[i0]) > 1e-12 or abs(t[j0]) > 1e-12:
        raise GeometryError("网格不含基点 (0, 0)：N_s 与 N_t 须为奇数")

    m = tmap.metric(s[:, None], t[None, :])
    b_s, b_t = flux_gradient(tmap, s, t, beta)
    P = m * b_t
    Q = -b_s / m

    row = cumulative_trapezoid(P[:, j0], s, initial=0.0)
    row -= row[i0]
    cols = cumulative_trapezoid(Q, t, axis=1, initial=0.0)
    alpha = row[:, None] + cols - cols[:, j0:j0 + 1]

    ds, dt = s[1] - s[0], t[1] - t[0]
    bottom = 0.5 * ds * (P[:-1, :-1] + P[1:, :-1])
    top = 0.5 * ds * (P[:-1, 1:] + P[1:, 1:])
    right = 0.5 * dt * (Q[1:, :-1] + Q[1:, 1:])
    left = 0.5 * dt * (Q[:-1, :-1] + Q[:-1, 1:])
    density = np.abs(bottom + right - top - left) / (ds * dt)
    loop = float(np.max(density[1:-1, 1:-1], initial=0.0))
    step = max(ds, dt)
    logger.debug("环路残差: 内部 %.3e, 含边界单元 %.3e, 步长 %.3g", loop, float(np.max(density)), step)
    if loop > loop_tol * step:
        raise SolverError(f"调和共轭环路残差 {loop:.3e} 超过容差 {loop_tol:.3g}×步长 {step:.3g}")
    return alpha, loop


# ============= 双全纯映射 =============

class Biholomorphism:
    def __init__(self, tmap: TubularMap, L: float, s: np.ndarray, t: np.ndarray,
                 beta: np.ndarray, alpha: np.ndarray, residual: float, loop_residual: float):
        self.tmap = tmap
        self.delta = tmap.delta
        self.L = L
        self.s = s
        self.t = t
        self.beta = beta
        self.alpha = alpha
        self.residual = residual
        self.loop_residual = loop_residual
        self._alpha = RectBivariateSpline(s, t, alpha, kx=3, ky=3, s=0)
        self._beta = RectBivariateSpline(s, t, beta, kx=3, ky=3, s=0)

        m = tmap.metric(s[:, None], t[None, :])
        self._grid_grad = flux_gradient(tmap, s, t, beta)
        b_s, b_t = self._grid_grad
        self._grad_abs = np.hypot(b_s / m, b_t)
        if np.min(self._grad_abs) <= 0:
            raise SolverError("f' 在网格上出现零点")

    # ----- (s,t) 上的求值 -----

    def _tail(self, s, t):
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        return s, np.clip(t, -self.delta, self.delta), np.abs(s) <= self.L

    def ev_alpha(self, s, t, ds: int = 0, dt: int = 0):
        """α 及其偏导；|s| > L 处按 α(±L,t) + (s ∓ L) 延拓"""
        s, t, inside = self._tail(s, t)
        sc = np.clip(s, -self.L, self.L)
        out = self._alpha.ev(sc, t, dx=ds, dy=dt)
        if np.all(inside):
            return out
        if ds == 0:
            tail = out + (s - sc) if dt == 0 else out
        elif ds == 1 and dt == 0:
            tail = np.ones_like(s)
        else:
            tail = np.zeros_like(s)
        return np.where(inside, out, tail)

    def ev_beta(self, s, t, ds: int = 0, dt: int = 0):
        """β 及其偏导；|s| > L 处 β = t"""
        s, t, inside = self._tail(s, t)
        out = self._beta.ev(np.clip(s, -self.L, self.L), t, dx=ds, dy=dt)
        if np.all(inside):
            return out
        if ds == 0 and dt == 0:
            tail = t
        elif ds == 0 and dt == 1:
            tail = np.ones_like(t)
        else:
            tail = np.zeros_like(t)
        return np.where(inside, out, tail)

    def f_st(self, s, t):
        """f(Θ(s,t))"""
        return self.ev_alpha(s, t) + 1j * self.ev_beta(s, t)

    def fprime_st(self, s, t):
        """f' = ∂_yβ + i∂_xβ，∇β = (∂_sβ/m)γ' + ∂_tβ·n"""
        m = self.tmap.metric(s, t)
        b_s = self.ev_beta(s, t, ds=1) / m
        b_t = self.ev_beta(s, t, dt=1)
        tan = self.tmap.curve.tangent(s)
        nor = self.tmap.curve.normal(s)
        gx = b_s * tan[..., 0] + b_t * nor[..., 0]
        gy = b_s * tan[..., 1] + b_t * nor[..., 1]
        return gy + 1j * gx

    # ----- 笛卡尔求值 -----

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        s, t = self.tmap.inverse(z.real, z.imag)
        return self.f_st(s, t)

    def inverse_st(self, w, max_iter: int = 50) -> Tuple[np.ndarray, np.ndarray]:
        """f⁻¹ 的管状坐标，插值函数上的牛顿迭代"""
        w = np.asarray(w, dtype=complex)
        if np.any(np.abs(w.imag) >= self.delta):
            raise GeometryError("w 不在开条带 |Im w| < δ 内")
        s = w.real.astype(float).copy()
        t = w.imag.astype(float).copy()
        for _ in range(max_iter):
            ra = self.ev_alpha(s, t) - w.real
            rb = self.ev_beta(s, t) - w.imag
            a_s, a_t = self.ev_alpha(s, t, ds=1), self.ev_alpha(s, t, dt=1)
            b_s, b_t = self.ev_beta(s, t, ds=1), self.ev_beta(s, t, dt=1)
            det = a_s * b_t - a_t * b_s
            d_s = (b_t * ra - a_t * rb) / det
            d_t = (a_s * rb - b_s * ra) / det
            s = s - d_s
            t = np.clip(t - d_t, -self.delta, self.delta)
            if np.max(np.abs(d_s) + np.abs(d_t), initial=0.0) < 1e-13 * (1.0 + np.max(np.abs(s), initial=0.0)):
                break
        else:
            raise SolverError("f⁻¹ 的牛顿迭代未收敛")
        return s, t

    def inverse(self, w):
        """f⁻¹(w)，返回笛卡尔复坐标"""
        s, t = self.inverse_st(w)
        return self.tmap.to_complex(s, t)

    def taylor(self, s0: float, t0: float, order: int, radius: Optional[float] = None, n: int = 64) -> np.ndarray:
        """
        f(z₀ + ζ) 的 Taylor 系数 c_0..c_order（圆周上的 Cauchy 积分，梯形公式）

        Args:
            s0, t0: z₀ 的管状坐标
            order: 最高阶
            radius: 圆周半径（默认 dist(z₀, ∂Ω)/2）
            n: 圆周采样点数
        """
        z0 = complex(self.tmap.to_complex(np.array(s0), np.array(t0)))
        if radius is None:
            radius = 0.5 * self.tmap.boundary_distance(s0, t0)
        theta = 2 * np.pi * np.arange(n) / n
        z = z0 + radius * np.exp(1j * theta)
        values = self(z)
        coef = np.fft.fft(values) / n
        return coef[:order + 1] / radius ** np.arange(order + 1)

    # ----- 诊断量 -----

    def fprime_sup(self) -> float:
        return max(float(np.max(self._grad_abs)), 1.0)

    def finv_prime_sup(self) -> float:
        return max(float(np.max(1.0 / self._grad_abs)), 1.0)

    def cr_residual(self) -> float:
        """网格上 |∇α − (∇β)^⊥| 的最大值（二阶差分）"""
        m = self.tmap.metric(self.s[:, None], self.t[None, :])
        a_s, a_t = np.gradient(self.alpha, self.s, self.t, edge_order=2)
        b_s, b_t = self._grid_grad
        return float(np.max(np.hypot(a_s / m - b_t, a_t + b_s / m)))

    def beta_deviation(self) -> float:
        return float(np.max(np.abs(self.beta - self.t[None, :])))

    def identity_deviation(self) -> float:
        """‖f̃(s,t) − (s+it)‖_{C¹}：函数值与一阶 (s,t) 偏导偏差的最大值"""
        a_s, a_t = np.gradient(self.alpha, self.s, self.t, edge_order=2)
        b_s, b_t = self._grid_grad
        parts = [self.alpha - self.s[:, None], self.beta - self.t[None, :], a_s - 1.0, a_t, b_s, b_t - 1.0]
        return max(float(np.max(np.abs(p))) for p in parts)

    def distance_check(self, s0: float, t0: float) -> Tuple[float, float]:
        """(dist_Ω(z₀,∂Ω), ‖(f⁻¹)'‖_∞·dist_{S_δ}(f(z₀),∂S_δ))"""
        d_omega = self.tmap.boundary_distance(s0, t0)
        d_strip = self.delta - abs(float(self.ev_beta(s0, t0)))
        return d_omega, self.finv_prime_sup() * d_strip

    def report(self, disk: Optional[DiskMapData] = None) -> ConformalReport:
        return ConformalReport(
            delta=self.delta, L=self.L, N_s=len(self.s), N_t=len(self.t),
            identity_deviation=self.identity_deviation(),
            beta_deviation=self.beta_deviation(),
            cr_residual=self.cr_residual(),
            loop_residual=self.loop_residual,
            fprime_sup=self.fprime_sup(),
            finv_prime_sup=self.finv_prime_sup(),
            fprime_min=float(np.min(self._grad_abs)),
            g_prime_abs=disk.g_prime_abs if disk is not None else None,
        )

    def field_table(self) -> np.ndarray:
        """(s, t, α, β) 四列表格"""
        S, T = np.meshgrid(self.s, self.t, indexing="ij")
        return np.column_stack([S.ravel(), T.ravel(), self.alpha.ravel(), self.beta.ravel()])


def build_biholomorphism(tmap: TubularMap, L: Optional[float] = None, N_s: Optional[int] = None,
                         N_t: Optional[int] = None, tol: float = 1e-8,
                         loop_tol: float = LOOP_TOL) -> Biholomorphism:
    """
    求解 β、积分 α 并组装 f

    Args:
        tmap: 管状映射
        L: 截断半长（默认 L₀ + 6δ）
        N_s, N_t: 网格点数（须为奇数）
        tol: 调和求解残差容差
        loop_tol: 环路残差密度与网格步长之比的上限

    Returns:
        Biholomorphism
    """
    L, s, t, beta, residual = solve_beta(tmap, L, N_s, N_t, tol)
    alpha, loop = harmonic_conjugate(tmap, s, t, beta, loop_tol)
    bih = Biholomorphism(tmap, L, s, t, beta, alpha, residual, loop)
    logger.info("共形映射: 环路残差 %.2e, ‖f'‖_∞ = %.6f, ‖(f⁻¹)'‖_∞ = %.6f",
                loop, bih.fprime_sup(), bih.finv_prime_sup())
    return bih


# ============= 圆盘映射 =============

def disk_derivative(bih: Biholomorphism, s_min: float, t_min: float, rotation: float = 0.0) -> DiskMapData:
    """
    g'(0)，g(ζ) = f⁻¹((4δ/π)·artanh(M(e^{iθ}ζ)))，M 将 0 送到 w₀ = tanh(πf(z_min)/(4δ))

    |g'(0)| = (4δ/π)·|1 − w₀²|⁻¹·(1 − |w₀|²)·|(f⁻¹)'(f(z_min))|

    Raises:
        GeometryError: z_min 不在内部，或 |w₀| 过于接近 1
    """
    delta = bih.delta
    if abs(t_min) >= delta:
        raise GeometryError(f"z_min 不在内部: t = {t_min:.6g}")
    c = bih.taylor(s_min, t_min, 1)
    f0, f1 = complex(c[0]), complex(c[1])
    w0 = complex(np.tanh(math.pi * f0 / (4 * delta)))
    if abs(w0) >= W0_LIMIT:
        raise GeometryError(f"|w₀| = {abs(w0):.12f} 过于接近 1，z_min 离边界太近")

    strip = 4 * delta / math.pi
    artanh = 1.0 / (1.0 - w0 * w0)
    mobius = 1.0 - abs(w0) ** 2
    g_prime = strip * artanh * mobius * np.exp(1j * rotation) / f1
    g_abs = abs(g_prime)
    dist = bih.tmap.boundary_distance(s_min, t_min)
    koebe_ok = dist * (1 - 1e-6) <= g_abs <= 4 * dist * (1 + 1e-6)
    window_ok = 0.5 * dist <= g_abs <= 2 * dist
    if not koebe_ok:
        logger.warning("Koebe 界未通过: |g'(0)| = %.6g, dist = %.6g", g_abs, dist)
    grad = complex(bih.fprime_st(np.array(s_min), np.array(t_min)))
    return DiskMapData(
        g_prime_abs=g_abs, g_prime_re=float(g_prime.real), g_prime_im=float(g_prime.imag),
        s_min=float(s_min), t_min=float(t_min), delta=delta,
        f_re=f0.real, f_im=f0.imag, fprime_re=f1.real, fprime_im=f1.imag,
        fprime_grad_abs=abs(grad), w0_re=w0.real, w0_im=w0.imag,
        strip_factor=strip, artanh_factor=abs(artanh), mobius_factor=mobius,
        inverse_factor=1.0 / abs(f1), rotation=rotation, dist_boundary=dist,
        koebe_ok=bool(koebe_ok), window_ok=bool(window_ok),
    )


def disk_map(bih: Biholomorphism, data: DiskMapData, zeta):
    """g(ζ)，返回笛卡尔复坐标"""
    zeta = np.asarray(zeta, dtype=complex) * np.exp(1j * data.rotation)
    w0 = data.w0
    m = (zeta + w0) / (1 + np.conj(w0) * zeta)
    return bih.inverse(data.strip_factor * np.arctanh(m))
