"""
纤维化 Dirac 算子模块
沿条带方向做部分 Fourier 变换后的一维算子 𝒟_{h,0,ξ} = (ξ+t)σ₁ + σ₂·hD_t，
边界条件 ψ₁(±δ) = ∓ψ₂(±δ)。
提供特征值、二次型 𝒬^± 的最低特征值、两种非线性极小极大求 μ₁^±、色散曲线与本质谱阈值。
"""
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import eigh, eigh_tridiagonal
from scipy.optimize import brentq, minimize_scalar
from scipy.special import erf, erfcx
from tqdm import tqdm

from errors import SolverError
from legendre_galerkin import LegendreBasis, constrained_basis, weighted_basis

logger = logging.getLogger(__name__)

DEFAULT_N = 128
RESIDUAL_TOL = 1e-6
EPS = np.finfo(float).eps


# ============= 数据模型 =============

class FiberSpec(BaseModel):
    """单个纤维问题"""
    model_config = ConfigDict(frozen=True)

    h: float = Field(..., gt=0, description="半经典参数 h")
    delta: float = Field(default=1.0, gt=0, description="条带半宽 δ")
    xi: float = Field(default=0.0, description="对偶变量 ξ")
    N: int = Field(default=DEFAULT_N, ge=16, description="每个分量的基函数个数（fd 时为单元数）")
    discretization: Literal["spectral", "fd"] = Field(default="spectral", description="离散方式")
    field_sign: Literal[1, -1] = Field(default=1, description="磁场方向 b：势项为 ξ + b·t")


class ThresholdReport(BaseModel):
    h: float
    delta: float
    lambda_ess_pos: float = Field(..., description="λ_ess^+(h) = inf_ξ μ₁^+")
    xi_pos: float = Field(..., description="正阈值的极小点 ξ*")
    lambda_ess_neg: float = Field(..., description="λ_ess^−(h) = inf_ξ μ₁^−（取正值）")
    xi_neg: float = Field(..., description="负阈值的极小点 ξ*")
    nu1_0: float = Field(..., description="ν₁(0,h)")
    log_nu1_0: float = Field(..., description="log ν₁(0,h)")
    ratio_pos: float = Field(..., description="λ_ess^+ / ν₁(0,h)")
    log_asymptote_pos: float = Field(..., description="log(2√(h/π)e^{−δ²/h})")
    ratio_pos_asymptote: float = Field(..., description="λ_ess^+ / (2√(h/π)e^{−δ²/h})")
    ratio_neg_sqrt_h: float = Field(..., description="λ_ess^− / √h")
    a0: Optional[float] = Field(default=None, description="半直线常数 a₀")
    ratio_neg_a0: Optional[float] = Field(default=None, description="λ_ess^− / (a₀√h)")


class KernelProjectorReport(BaseModel):
    xi: float
    h: float
    delta: float
    mu1: float = Field(..., description="μ₁^+(ξ,h)")
    residual_h1: float = Field(..., description="‖ψ_ξ − Π_ξψ_ξ‖_{H¹(I)}")
    scaled_residual: float = Field(..., description="h^{3/2}e^{δ²/h}·‖ψ_ξ − Π_ξψ_ξ‖_{H¹}")
    projection_norm: float = Field(..., description="‖Π_ξψ_ξ‖（‖ψ_ξ‖ = 1）")
    orthogonality: float = Field(..., description="|⟨ψ_ξ − Π_ξψ_ξ, 高斯⟩|")


# ============= ν₁ =============

def log_nu1(xi: float, h: float, delta: float = 1.0) -> float:
    """
    log ν₁(ξ,h)，分子用 logaddexp，分母用 erf/erfcx，避免下溢

    ν₁(ξ,h) = h(e^{−(ξ−δ)²/h} + e^{−(ξ+δ)²/h}) / ∫_{−δ}^{δ} e^{−(ξ+t)²/h} dt
    """
    x = abs(float(xi))
    sh = math.sqrt(h)
    num = math.log(h) + float(np.logaddexp(-(x - delta) ** 2 / h, -(x + delta) ** 2 / h))
    a = (x - delta) / sh
    b = (x + delta) / sh
    if a > 0:
        log_den = -a * a + math.log(erfcx(a) - math.exp(a * a - b * b) * erfcx(b))
    else:
        log_den = math.log(erf(b) - erf(a))
    log_den += math.log(0.5 * math.sqrt(math.pi * h))
    return num - log_den


def nu1(xi: float, h: float, delta: float = 1.0) -> float:
    return math.exp(log_nu1(xi, h, delta))


def log_positive_asymptote(h: float, delta: float = 1.0) -> float:
    """log(2√(h/π)e^{−δ²/h})"""
    return math.log(2.0) + 0.5 * math.log(h / math.pi) - delta ** 2 / h


# ============= 二次型 𝒬^± =============

def _secular_root(q00: float, m: np.ndarray, c: np.ndarray) -> float:
    """f(ℓ) = q00 − ℓ − Σ c_i²/(m_i − ℓ) 在 (−∞, min(q00, m_0)) 上的唯一根"""
    c2 = c * c
    total = float(c2.sum())
    if total == 0.0:
        return q00

    def f(ell):
        return q00 - ell - float(np.sum(c2 / (m - ell)))

    lo = q00 - total / (m[0] - q00)
    if f(q00) >= 0.0:
        return q00
    if f(lo) <= 0.0:
        return lo
    width = q00 - lo
    return brentq(f, lo, q00, xtol=max(1e-15 * width, 1e-300), rtol=4 * EPS, maxiter=300)


class FiberForm:
    def __init__(self, xi: float, h: float, delta: float = 1.0, sign: int = 1, N: int = DEFAULT_N):
        """
        𝒬^±_{λ,ξ,h}(ψ) = ‖(±h∂_t + ξ + t)ψ‖² + λh‖ψ‖²_{∂I} − λ²‖ψ‖² 的 Galerkin 组装

        A, E 与 λ 无关，只组装一次；S(λ) = A + λhE − λ²M。
        sign = +1 且 |ξ| ≤ δ 时取 ψ = g·u，g = e^{−(ξ+t)²/2h}，u 在权 W = g² 下展开，
        使基函数 e₀ 恰为高斯试探函数（此时 M = I，A 的 e₀ 行为零，hE₀₀ = ν₁）。
        """
        if sign not in (1, -1):
            raise ValueError(f"sign 必须为 ±1: {sign}")
        if h <= 0 or delta <= 0:
            raise ValueError(f"h, δ 必须为正: h={h}, δ={delta}")
        self.xi, self.h, self.delta, self.sign, self.N = float(xi), float(h), float(delta), sign, N
        basis = LegendreBasis(-delta, delta, N)
        self.basis = basis
        t = basis.x
        self.weighted = sign > 0 and abs(xi) <= delta

        if self.weighted:
            self.log_weight = -((xi + t) ** 2) / h
            C = weighted_basis(basis, self.log_weight)
            ww = basis.w * np.exp(self.log_weight)
            dU = basis.dV @ C
            A = h * h * (dU.T @ (ww[:, None] * dU))
            ua, ub = basis.va @ C, basis.vb @ C
            wa = math.exp(-(xi - delta) ** 2 / h)
            wb = math.exp(-(xi + delta) ** 2 / h)
            E = wa * np.outer(ua, ua) + wb * np.outer(ub, ub)
            self.coef = C
        else:
            self.log_weight = np.zeros_like(t)
            Kop = sign * h * basis.dV + (xi + t)[:, None] * basis.V
            A = Kop.T @ (basis.w[:, None] * Kop)
            E = np.outer(basis.va, basis.va) + np.outer(basis.vb, basis.vb)
            self.coef = np.eye(N)

        self.A = 0.5 * (A + A.T)
        self.E = 0.5 * (E + E.T)
        self.dim = self.A.shape[0]

    def ground_state(self, lam: float) -> Tuple[float, np.ndarray]:
        """ℓ₁(λ) 及对应的系数向量"""
        h = self.h
        if self.weighted:
            Syy = self.A[1:, 1:] + lam * h * self.E[1:, 1:]
            m, Uy = eigh(Syy)
            m = m - lam * lam
            q00 = lam * h * self.E[0, 0] - lam * lam
            c = Uy.T @ (lam * h * self.E[0, 1:])
            if q00 < m[0]:
                ell = _secular_root(q00, m, c)
                y = -Uy @ (c / (m - ell))
                return ell, np.concatenate([[1.0], y])
        S = self.A + lam * h * self.E
        w, v = eigh(S, subset_by_index=[0, 0])
        return float(w[0] - lam * lam), v[:, 0]

    def ground(self, lam: float) -> float:
        return self.ground_state(lam)[0]

    def rho(self, c: np.ndarray) -> float:
        """ρ(ψ) = (hB + √(h²B² + 4NQ)) / (2N)，对 ψ → cψ 不变"""
        c = np.asarray(c, dtype=float)
        n = float(c @ c)
        B = float(c @ self.E @ c)
        Q = max(float(c @ self.A @ c), 0.0)
        hB = self.h * B
        return (hB + math.sqrt(hB * hB + 4.0 * n * Q)) / (2.0 * n)

    def trial_vector(self) -> np.ndarray:
        """加权基下为高斯试探函数 e₀，否则为常数函数"""
        e0 = np.zeros(self.dim)
        e0[0] = 1.0
        return e0


def quad_form_ground(lam: float, xi: float, h: float, sign: int, delta: float = 1.0,
                     N: int = DEFAULT_N) -> float:
    """
    ℓ₁^±(λ,ξ,h)：二次型 𝒬^± 在 H¹(I) 上的最低特征值

    Args:
        lam: λ ≥ 0
        xi, h: 纤维参数
        sign: ±1
        delta: 半宽
        N: 基函数个数

    Returns:
        ℓ₁^±(λ,ξ,h)
    """
    if lam < 0:
        raise ValueError(f"λ 必须非负: {lam}")
    return FiberForm(xi, h, delta, sign, N).ground(lam)


def _positive_root(f, hi: float, label: str) -> float:
    """
    λ ↦ f(λ) 的唯一正根：根以下 f > 0、根以上 f < 0

    从 hi 出发几何放缩得到可信区间 [lo, hi]，再用 brentq 求根。

    Raises:
        SolverError: 区间放缩耗尽
    """
    for _ in range(60):
        if f(hi) <= 0.0:
            break
        hi *= 2.0
    else:
        raise SolverError(f"求根上界放缩耗尽: {label}")

    if f(hi) == 0.0:
        return hi
    lo = hi
    for _ in range(400):
        cand = 0.5 * lo
        if f(cand) > 0.0:
            hi, lo = lo, cand
            break
        lo = cand
    else:
        raise SolverError(f"求根下界放缩耗尽: {label}")

    return brentq(f, lo, hi, xtol=1e-15 * hi, rtol=4 * EPS, maxiter=300)


def mu1_via_root(xi: float, h: float, sign: int, delta: float = 1.0, N: int = DEFAULT_N,
                 form: Optional[FiberForm] = None) -> float:
    """
    μ₁^±(ξ,h) 作为 λ ↦ ℓ₁^±(λ,ξ,h) 的唯一正根

    上界初值：sign = + 时为 ν₁(ξ,h)（高斯试探函数给出 ρ⁺ = ν₁），sign = − 时为 2√h + |ξ| + δ。

    Raises:
        SolverError: 区间放缩耗尽
    """
    form = form or FiberForm(xi, h, delta, sign, N)
    hi = nu1(xi, h, delta) if sign > 0 else 2.0 * math.sqrt(h) + abs(xi) + delta
    return _positive_root(form.ground, hi, f"μ₁: ξ={xi:.6g}, h={h:.6g}, sign={sign:+d}")


def rho_minimizer(form: FiberForm, n_restarts: int = 5, seed: int = 0,
                  max_iter: int = 200) -> Tuple[float, np.ndarray]:
    """
    直接极小化 ρ：λ ← ρ(c)，c ← S(λ) 的最低特征向量

    每一步 ρ 单调不增（S(λ_k) 的最低特征向量在 λ_k 处二次型 ≤ 0）。
    起点为试探函数加 n_restarts 个随机向量，取最小值。

    Returns:
        (μ₁, 系数向量)
    """
    rng = np.random.default_rng(seed)
    starts = [form.trial_vector()] + [rng.standard_normal(form.dim) for _ in range(n_restarts)]
    best_lam, best_c = math.inf, None
    for c in starts:
        lam = form.rho(c)
        for _ in range(max_iter):
            _, c_new = form.ground_state(lam)
            lam_new = form.rho(c_new)
            if lam_new >= lam * (1.0 - 1e-14):
                if lam_new < lam:
                    lam, c = lam_new, c_new
                break
            lam, c = lam_new, c_new
        else:
            raise SolverError(f"ρ 下降迭代未收敛: ξ={form.xi:.6g}, h={form.h:.6g}")
        if lam < best_lam:
            best_lam, best_c = lam, c
    return best_lam, best_c


def mu1_via_rho(xi: float, h: float, sign: int, delta: float = 1.0, N: int = DEFAULT_N,
                n_restarts: int = 5, seed: int = 0) -> float:
    """μ₁^±(ξ,h) = min_ψ ρ^±_{ξ,h}(ψ)"""
    form = FiberForm(xi, h, delta, sign, N)
    return rho_minimizer(form, n_restarts=n_restarts, seed=seed)[0]


# ============= Dirac 纤维特征值 =============

def _residual_filter(mu, p1, p2, d1, d2, z, h, w):
    r1 = z * p2 - h * d2 - mu * p1
    r2 = z * p1 + h * d1 - mu * p2
    rn = np.sqrt(np.sum(w[:, None] * (r1 ** 2 + r2 ** 2), axis=0))
    nrm = np.sqrt(np.sum(w[:, None] * (p1 ** 2 + p2 ** 2), axis=0))
    return rn / nrm


def _spectral_eigs(spec: FiberSpec):
    N, h = spec.N, spec.h
    basis = LegendreBasis(-spec.delta, spec.delta, N)
    t, w = basis.x, basis.w
    z = spec.xi + spec.field_sign * t
    X = basis.V.T @ ((w * z)[:, None] * basis.V)
    Der = basis.V.T @ (w[:, None] * basis.dV)
    zero = np.zeros((N, N))
    Dm = np.block([[zero, X - h * Der], [X + h * Der, zero]])
    C = np.vstack([np.concatenate([basis.vb, basis.vb]),
                   np.concatenate([basis.va, -basis.va])])
    Z = constrained_basis(C)
    K = Z.T @ Dm @ Z
    K = 0.5 * (K + K.T)
    try:
        mu, Y = eigh(K)
    except np.linalg.LinAlgError as e:
        raise SolverError(f"纤维特征值求解失败: ξ={spec.xi:.6g}: {e}") from e
    coef = Z @ Y
    p1, p2 = basis.V @ coef[:N], basis.V @ coef[N:]
    d1, d2 = basis.dV @ coef[:N], basis.dV @ coef[N:]
    rel = _residual_filter(mu, p1, p2, d1, d2, z[:, None], h, w)
    ok = rel <= RESIDUAL_TOL * (1.0 + np.abs(mu))
    return mu, ok, float(np.max(np.abs(mu)))


class LumpedForm:
    def __init__(self, xi: float, h: float, delta: float, sign: int, n: int):
        """
        𝒬^± 的 P1 有限元（集中质量）离散，n 个单元

        A, E, M 都是三对角/对角的，ℓ_k(λ) 由 M^{-1/2}(A + λhE)M^{-1/2} − λ² 的第 k 个特征值给出。
        """
        self.h, self.n = h, n
        t = np.linspace(-delta, delta, n + 1)
        dx = t[1] - t[0]
        gy, gw = leggauss(3)
        tq = 0.5 * (t[1:] + t[:-1])[:, None] + 0.5 * dx * gy[None, :]
        z = xi + tq
        phi = np.stack([(1 - gy) / 2, (1 + gy) / 2])
        dphi = np.array([-1.0, 1.0]) / dx
        k = [sign * h * dphi[i] + z * phi[i][None, :] for i in range(2)]
        w = 0.5 * dx * gw[None, :]
        a00 = np.sum(w * k[0] * k[0], axis=1)
        a11 = np.sum(w * k[1] * k[1], axis=1)
        a01 = np.sum(w * k[0] * k[1], axis=1)

        diag = np.zeros(n + 1)
        diag[:-1] += a00
        diag[1:] += a11
        mass = np.full(n + 1, dx)
        mass[[0, -1]] = 0.5 * dx
        self.diag = diag / mass
        self.off = a01 / np.sqrt(mass[:-1] * mass[1:])
        self.bnd = np.zeros(n + 1)
        self.bnd[[0, -1]] = 1.0 / mass[[0, -1]]

    def eigenvalue(self, lam: float, k: int) -> float:
        """ℓ_k(λ)，k 从 1 开始"""
        w = eigh_tridiagonal(self.diag + lam * self.h * self.bnd, self.off, eigvals_only=True,
                             select="i", select_range=(k - 1, k - 1))
        return float(w[0] - lam * lam)


def _fd_eigs(spec: FiberSpec, K: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    μ_k^± 取为 λ ↦ ℓ_k^±(λ) 的唯一正根（二次型的有限元离散）

    b = −1 的正支等于 b = +1、−ξ 的负支（电荷共轭），负支同理。
    """
    xi = spec.xi if spec.field_sign > 0 else -spec.xi
    out = {}
    for sign in (1, -1):
        form = LumpedForm(xi, spec.h, spec.delta, sign, spec.N)
        roots = []
        for k in range(1, K + 1):
            hi = 2.0 * math.sqrt(k * spec.h) + abs(xi) + spec.delta
            label = f"ξ={spec.xi:.6g}, h={spec.h:.6g}, sign={sign:+d}, k={k}"
            roots.append(_positive_root(lambda lam: form.eigenvalue(lam, k), hi, label))
        out[sign] = np.array(roots)
    if spec.field_sign > 0:
        return out[1], out[-1]
    return out[-1], out[1]


def _polish(spec: FiberSpec, branch: int) -> float:
    # b = −1 的正支等于 b = +1、−ξ 的负支（电荷共轭）
    if spec.field_sign > 0:
        return mu1_via_root(spec.xi, spec.h, branch, spec.delta, spec.N)
    return mu1_via_root(-spec.xi, spec.h, -branch, spec.delta, spec.N)


def dirac_fiber_eigs(spec: FiberSpec, K: int, polish: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """
    纤维 Dirac 算子的 K 个最小正特征值与 K 个绝对值最小的负特征值（取正值存储）

    Args:
        spec: 纤维问题
        K: 每个符号的特征值个数
        polish: 谱方法下，对幅值低于 1e−6·max|μ| 的首个特征值改用 μ₁ 求根

    Returns:
        (pos, neg)，均按升序排列

    Raises:
        SolverError: 特征值求解失败或过滤后不足 K 个
    """
    if K < 1:
        raise ValueError(f"K 必须 ≥ 1: {K}")
    if spec.discretization == "fd":
        return _fd_eigs(spec, K)

    mu, ok, scale = _spectral_eigs(spec)
    # 近零特征值只可能属于 b 同号的一支（μ₁^∓ ≳ √h），舍入误差不得改变其符号
    tiny = np.abs(mu) < 1e-6 * scale
    mu = np.where(tiny, spec.field_sign * np.abs(mu), mu)
    good = mu[ok]
    pos = np.sort(good[good > 0])
    neg = np.sort(-good[good < 0])
    n_bad = int(np.sum(~ok))
    if n_bad:
        logger.debug("残差过滤剔除 %d 个伪模: ξ=%.6g", n_bad, spec.xi)
    if len(pos) < K or len(neg) < K:
        raise SolverError(f"过滤后特征值不足: ξ={spec.xi:.6g}, 正 {len(pos)}, 负 {len(neg)}, 需要 {K}"
                          f"（剔除 {n_bad} 个伪模）")
    pos, neg = pos[:K].copy(), neg[:K].copy()

    if polish:
        for arr, branch in ((pos, 1), (neg, -1)):
            if arr[0] < 1e-6 * scale:
                raw = arr[0]
                arr[0] = _polish(spec, branch)
                logger.info("微小特征值改用非线性求根: ξ=%.6g, h=%.6g, %.6e → %.12e",
                            spec.xi, spec.h, raw, arr[0])
    return pos, neg


# ============= 色散曲线 =============

class DispersionCurve:
    def __init__(self, xi: np.ndarray, pos: np.ndarray, neg: np.ndarray, h: float, delta: float):
        """
        Args:
            xi: ξ 网格
            pos: 形状 (n_ξ, K)，μ_k^+(ξ,h)
            neg: 形状 (n_ξ, K)，μ_k^−(ξ,h)，以正值存储
        """
        self.xi = xi
        self.pos = pos
        self.neg = neg
        self.h = h
        self.delta = delta

    @property
    def K(self) -> int:
        return self.pos.shape[1]

    def header(self) -> List[str]:
        return (["xi"] + [f"mu{k + 1}_neg" for k in range(self.K)]
                + [f"mu{k + 1}_pos" for k in range(self.K)])

    def to_table(self) -> np.ndarray:
        return np.column_stack([self.xi, self.neg, self.pos])

    def evenness_defect(self) -> float:
        """max_k |μ_k(ξ) − μ_k(−ξ)|（对称网格）"""
        return float(max(np.max(np.abs(self.pos - self.pos[::-1])),
                         np.max(np.abs(self.neg - self.neg[::-1]))))


def default_window(h: float, delta: float) -> float:
    """δ + 2√h + 2，覆盖强制性估计给出的区域"""
    return delta + 2.0 * math.sqrt(h) + 2.0


def default_workers() -> int:
    return max(1, int(os.getenv("STRIP_DIRAC_WORKERS", "1")))


def _sweep_task(args):
    xi, h, delta, K, N, discretization = args
    spec = FiberSpec(h=h, delta=delta, xi=xi, N=N, discretization=discretization)
    try:
        return dirac_fiber_eigs(spec, K)
    except SolverError as e:
        raise SolverError(f"ξ={xi:.6g}: {e}") from e


def dispersion_sweep(h: float, delta: float = 1.0, window: Optional[float] = None, K: int = 4,
                     resolution: int = 201, N: int = DEFAULT_N, discretization: str = "spectral",
                     workers: Optional[int] = None, progress: bool = True) -> DispersionCurve:
    """
    在对称 ξ 网格上计算色散曲线

    Args:
        h, delta: 参数
        window: ξ 半窗口（默认 δ + 2√h + 2）
        K: 每个符号的支数
        resolution: ξ 点数（取奇数以包含 ξ = 0）
        workers: 进程数，默认读取 STRIP_DIRAC_WORKERS

    Returns:
        DispersionCurve，结果按 ξ 顺序收集，与调度无关
    """
    if K < 1:
        raise ValueError(f"K 必须 ≥ 1: {K}")
    W = window if window is not None else default_window(h, delta)
    xi = np.linspace(-W, W, resolution)
    tasks = [(float(x), h, delta, K, N, discretization) for x in xi]
    workers = workers if workers is not None else default_workers()

    if workers > 1:
        logger.info("色散曲线并行计算: %d 个 ξ 点, %d 个进程", len(tasks), workers)
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_sweep_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_sweep_task(task) for task in tqdm(tasks, desc=f"色散曲线 h={h:g}", disable=not progress)]

    pos = np.array([r[0] for r in results])
    neg = np.array([r[1] for r in results])
    return DispersionCurve(xi, pos, neg, h, delta)


# ============= 本质谱阈值 =============

def _minimize_branch(fun, W: float, n_scan: int, extra: Sequence[float] = ()) -> Tuple[float, float]:
    """在 [0, W] 上粗扫描后局部精化；extra 为并入扫描网格的种子点"""
    seeds = [x for x in extra if 0.0 < x < W]
    grid = np.unique(np.concatenate([np.linspace(0.0, W, n_scan), seeds]))
    n_scan = len(grid)
    vals = np.array([fun(x) for x in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n_scan - 1)]
    res = minimize_scalar(fun, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    if not res.success:
        raise SolverError(f"阈值极小化停滞: {res.message}")
    if res.fun <= vals[i]:
        return float(res.x), float(res.fun)
    return float(grid[i]), float(vals[i])


def threshold_pos(h: float, delta: float = 1.0, N: int = DEFAULT_N, n_scan: int = 17) -> Tuple[float, float]:
    """
    λ_ess^+(h) = inf_ξ μ₁^+(ξ,h)，利用偶性只在 [0, δ+2√h+2] 上极小化 log μ₁^+

    Returns:
        (λ_ess^+, ξ*)
    """
    fun = lambda x: math.log(mu1_via_root(x, h, 1, delta, N))
    x_star, log_val = _minimize_branch(fun, default_window(h, delta), n_scan)
    return math.exp(log_val), x_star


def threshold_neg(h: float, delta: float = 1.0, a0: Optional[float] = None, N: int = DEFAULT_N,
                  n_scan: int = 17) -> Tuple[float, float]:
    """
    λ_ess^−(h) = inf_ξ μ₁^−(ξ,h)

    Returns:
        (λ_ess^−, ξ*)
    """
    fun = lambda x: mu1_via_root(x, h, -1, delta, N)
    guess = None if a0 is None else delta - math.sqrt(h) * a0
    extra = () if guess is None else (guess,)
    x_star, val = _minimize_branch(fun, default_window(h, delta), n_scan, extra)
    if guess is not None:
        if abs(x_star - guess) > 3 * math.sqrt(h):
            logger.warning("负阈值极小点 ξ*=%.6g 偏离 δ−√h·a₀=%.6g 超过 3√h", x_star, guess)
    return val, x_star


def threshold_report(h: float, delta: float = 1.0, a0: Optional[float] = None,
                     N: int = DEFAULT_N) -> ThresholdReport:
    lam_pos, xi_pos = threshold_pos(h, delta, N)
    lam_neg, xi_neg = threshold_neg(h, delta, a0, N)
    ln0 = log_nu1(0.0, h, delta)
    la = log_positive_asymptote(h, delta)
    return ThresholdReport(
        h=h, delta=delta,
        lambda_ess_pos=lam_pos, xi_pos=xi_pos,
        lambda_ess_neg=lam_neg, xi_neg=xi_neg,
        nu1_0=math.exp(ln0), log_nu1_0=ln0,
        ratio_pos=math.exp(math.log(lam_pos) - ln0),
        log_asymptote_pos=la,
        ratio_pos_asymptote=math.exp(math.log(lam_pos) - la),
        ratio_neg_sqrt_h=lam_neg / math.sqrt(h),
        a0=a0,
        ratio_neg_a0=None if a0 is None else lam_neg / (a0 * math.sqrt(h)),
    )


def coercivity_bound(xi: float, h: float, delta: float = 1.0) -> float:
    """|ξ| − δ − h/(|ξ| − δ)，|ξ| > δ 时 μ₁^+ 的下界"""
    d = abs(xi) - delta
    return d - h / d


# ============= 核投影 =============

def kernel_projector_residual(xi: float, h: float, delta: float = 1.0,
                              N: int = DEFAULT_N) -> KernelProjectorReport:
    """
    ψ_ξ（ρ 的极小元，‖ψ_ξ‖ = 1）与其在高斯 e^{−(ξ+t)²/2h} 上投影之差的 H¹ 范数

    Raises:
        ValueError: ξ 不在 Ξ_h 中（μ₁^+(ξ,h) > 2√h e^{−δ²/h}）
    """
    form = FiberForm(xi, h, delta, 1, N)
    if not form.weighted:
        raise ValueError(f"ξ={xi:.6g} 超出 [−δ, δ]，不在 Ξ_h 中")
    mu, _ = rho_minimizer(form)
    log_bound = math.log(2.0) + 0.5 * math.log(h) - delta ** 2 / h
    if math.log(mu) > log_bound:
        raise ValueError(f"ξ={xi:.6g} 不在 Ξ_h 中: μ₁^+={mu:.6e} > 2√h e^{{−δ²/h}}")

    # ψ_ξ 取 S(μ₁) 的最低特征向量
    _, c = form.ground_state(mu)
    c = c / np.linalg.norm(c)
    basis = form.basis
    weight = basis.w * np.exp(form.log_weight)
    rest = form.coef[:, 1:] @ c[1:]
    r = basis.V @ rest
    dr = basis.dV @ rest
    e0 = basis.V @ form.coef[:, 0]
    z = xi + basis.x

    l2 = float(np.sum(weight * r ** 2))
    grad = float(np.sum(weight * (dr - z * r / h) ** 2))
    res = math.sqrt(l2 + grad)
    scaled = math.exp(1.5 * math.log(h) + delta ** 2 / h + math.log(res)) if res > 0 else 0.0
    return KernelProjectorReport(
        xi=xi, h=h, delta=delta, mu1=mu,
        residual_h1=res, scaled_residual=scaled,
        projection_norm=abs(float(c[0])),
        orthogonality=abs(float(np.sum(weight * r * e0))),
    )
