"""
有效谱模块
Segal–Bargmann 常数 d_B^k、Hardy 常数 d_H^k（闭式与约束极小两条途径）、Hardy–Taylor 投影、
有效特征值 λ_k^eff(h)（广义特征值问题）及其与闭式渐近的比值、谱隙内特征值计数
"""
import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.hermite_e import herme2poly
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, Field
from scipy.linalg import cholesky, eigvalsh, solve_triangular
from tqdm import tqdm

from conformal_map import Biholomorphism, DiskMapData
from errors import AssumptionError, GeometryError, SolverError
from fibered_dirac import ThresholdReport
from magnetic_potential import MinimumReport, PotentialField

logger = logging.getLogger(__name__)

PANEL_POINTS = 8
TAIL_TOL = 1e-12
SINGULAR_TOL = 1e-14


# ============= Segal–Bargmann 常数 =============

def _hessian_frame(hess) -> Tuple[np.ndarray, np.ndarray]:
    hess = np.asarray(hess, dtype=float)
    hess = 0.5 * (hess + hess.T)
    lam, vec = np.linalg.eigh(hess)
    if lam[0] <= 0:
        raise AssumptionError(f"Hessian 非正定: 特征值 {lam[0]:.6g}, {lam[1]:.6g}")
    return lam, vec


def _gauss_rule(hess, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """∫ g(y)e^{−Hess(y,y)}dy 的张量 Gauss–Hermite 规则，返回复节点 z = y₁ + iy₂ 与权重"""
    lam, vec = _hessian_frame(hess)
    x, w = hermgauss(n)
    X1, X2 = np.meshgrid(x / math.sqrt(lam[0]), x / math.sqrt(lam[1]), indexing="ij")
    Y = vec @ np.vstack([X1.ravel(), X2.ravel()])
    W = np.outer(w, w).ravel() / math.sqrt(lam[0] * lam[1])
    return Y[0] + 1j * Y[1], W


class BargmannBasis:
    def __init__(self, hess, M: int, coef: np.ndarray, norms: np.ndarray, n_quad: int):
        """
        𝓑²(ℂ) 中关于 N_B 正交的首一多项式 P_0..P_M

        Args:
            hess: x_min 处 φ 的 Hessian（2×2）
            M: 最高次数
            coef: coef[m, j] 为 P_m 中 z^j 的系数，coef[m, m] = 1
            norms: N_B(P_m)
            n_quad: 每个方向的 Gauss–Hermite 点数
        """
        self.hess = np.asarray(hess, dtype=float)
        lam, vec = _hessian_frame(hess)
        self.a, self.b = 2 * lam[0], 2 * lam[1]
        self.angle = math.atan2(vec[1, 0], vec[0, 0])
        self.M = M
        self.coef = coef
        self.norms = norms
        self.n_quad = n_quad

    @property
    def b_coef(self) -> np.ndarray:
        """P_m = Σ_j b_{m,j} z^j/j! 中的 b_{m,j}"""
        fact = np.array([math.factorial(j) for j in range(self.M + 1)], dtype=float)
        return self.coef * fact[None, :]

    def evaluate(self, m: int, z):
        return np.polynomial.polynomial.polyval(np.asarray(z, dtype=complex), self.coef[m])

    def closed_form(self, m: int, iso_tol: float = 1e-12) -> np.ndarray:
        """
        P_m 的闭式系数：各向同性时 P_m = z^m；
        否则在 Hessian 本征标架中 P_m = He_m(cz')/c^m，c = √|ab/(b−a)|，再旋转回原坐标
        """
        out = np.zeros(self.M + 1, dtype=complex)
        if abs(self.b - self.a) <= iso_tol * (self.a + self.b):
            out[m] = 1.0
            return out
        c = math.sqrt(abs(self.a * self.b / (self.b - self.a)))
        he = herme2poly(np.eye(m + 1)[m])
        for j in range(m + 1):
            out[j] = he[j] * c ** (j - m) * np.exp(1j * (m - j) * self.angle)
        return out

    def norm_closed(self, m: int) -> float:
        """N_B(P_m)² = 2π m!(a+b)^m/(ab)^{m+1/2}"""
        a, b = self.a, self.b
        return math.sqrt(2 * math.pi * math.factorial(m) * (a + b) ** m / (a * b) ** (m + 0.5))

    def orthogonality_defect(self) -> float:
        z, w = _gauss_rule(self.hess, self.n_quad)
        V = np.array([self.evaluate(m, z) for m in range(self.M + 1)])
        G = (V * w[None, :]) @ V.conj().T
        d = np.sqrt(np.real(np.diag(G)))
        off = G / np.outer(d, d) - np.eye(self.M + 1)
        return float(np.max(np.abs(off)))


def bargmann_orthogonalize(hess, M: int = 8, n_quad: Optional[int] = None) -> BargmannBasis:
    """
    单项式族 (z^k) 在 N_B 下的 Gram–Schmidt 正交化

    以 Arnoldi 形式进行：P_{m+1} = zP_m 减去在 P_0..P_m 上的投影（两遍正交化），
    节点上的值与系数同步更新。

    Raises:
        AssumptionError: Hessian 非正定
        SolverError: 求积分辨率不足（N_B(z^M) 随求积点数变化）
    """
    n = n_quad or M + 8
    z, w = _gauss_rule(hess, n)
    z2, w2 = _gauss_rule(hess, n + 4)
    nz = float(np.sum(w * np.abs(z) ** (2 * M)))
    nz2 = float(np.sum(w2 * np.abs(z2) ** (2 * M)))
    if abs(nz - nz2) > 1e-10 * nz2:
        raise SolverError(f"Gauss–Hermite 求积分辨率不足: N_B(z^{M})² 变化 {abs(nz - nz2) / nz2:.2e}")

    values = [np.ones_like(z)]
    coef = np.zeros((M + 1, M + 1), dtype=complex)
    coef[0, 0] = 1.0
    nrm2 = [float(np.sum(w))]
    for m in range(M):
        new = z * values[m]
        c = np.zeros(M + 1, dtype=complex)
        c[1:] = coef[m, :-1]
        for _ in range(2):
            for j in range(m + 1):
                proj = np.sum(w * new * np.conj(values[j])) / nrm2[j]
                new = new - proj * values[j]
                c = c - proj * coef[j]
        values.append(new)
        coef[m + 1] = c
        nrm2.append(float(np.sum(w * np.abs(new) ** 2)))
    basis = BargmannBasis(hess, M, coef, np.sqrt(np.array(nrm2)), n)
    logger.debug("Bargmann 正交化: a=%.6g, b=%.6g, M=%d", basis.a, basis.b, M)
    return basis


def d_B(k: int, hess, B: Optional[float] = None) -> float:
    """
    (d_B^k)² = πB^{k−1}/(2^{k−1}(k−1)!(det Hess)^{k−1/2})，B 默认取 tr Hess = Δφ(x_min)
    """
    if k < 1:
        raise ValueError(f"k 必须 ≥ 1: {k}")
    hess = np.asarray(hess, dtype=float)
    det = float(np.linalg.det(hess))
    if det <= 0:
        raise AssumptionError(f"det Hess = {det:.6g} ≤ 0")
    B = float(np.trace(hess)) if B is None else B
    val = math.pi * B ** (k - 1) / (2 ** (k - 1) * math.factorial(k - 1) * det ** (k - 0.5))
    return math.sqrt(val)


# ============= Hardy 常数 =============

def d_H_closed(k: int, disk: Union[DiskMapData, float]) -> float:
    """d_H^k = √(2π)/(k−1)!·|g'(0)|^{k−1/2}"""
    if k < 1:
        raise ValueError(f"k 必须 ≥ 1: {k}")
    g = disk.g_prime_abs if isinstance(disk, DiskMapData) else float(disk)
    return math.sqrt(2 * math.pi) / math.factorial(k - 1) * g ** (k - 0.5)


def ratio_identity(k: int, g_prime_abs: float, hess) -> float:
    """(d_H^k/d_B^k)² = 2^k|g'(0)|^{2k−1}(det Hess)^{k−1/2}/(k−1)!（B = 1）"""
    det = float(np.linalg.det(np.asarray(hess, dtype=float)))
    return 2 ** k * g_prime_abs ** (2 * k - 1) * det ** (k - 0.5) / math.factorial(k - 1)


# ----- 截断幂级数 -----

def _ps_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)[:len(a)]


def _ps_recip(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[0] = 1.0 / a[0]
    for n in range(1, len(a)):
        out[n] = -np.dot(a[1:n + 1], out[n - 1::-1][:n]) / a[0]
    return out


def _ps_exp(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[0] = np.exp(a[0])
    for n in range(1, len(a)):
        j = np.arange(1, n + 1)
        out[n] = np.sum(j * a[j] * out[n - j]) / n
    return out


def _ps_sqrt(a: np.ndarray, root0: complex) -> np.ndarray:
    out = np.zeros_like(a)
    out[0] = root0
    for n in range(1, len(a)):
        out[n] = (a[n] - np.dot(out[1:n], out[n - 1:0:-1])) / (2 * root0)
    return out


class HardyBasis:
    def __init__(self, bih: Biholomorphism, disk: DiskMapData, M: int, n_extra: int = 4,
                 n_deriv: int = 6, n_circle: int = 256):
        """
        H²(Ω) 的截断基 v_n = Λ(ζ^n/√(2π))，(Λu)(z) = (ψ'(z))^{1/2}u(ψ(z))，ψ = g⁻¹

        ψ = M⁻¹ ∘ tanh(π·/(4δ)) ∘ f，Λ 是边界范数下的等距，故 G_∂ 在圆周上用梯形公式计算。

        Args:
            bih: 双全纯映射
            disk: g 在 z_min 处的链式记录
            M: 主截断阶数
            n_extra: 截断收敛检查使用的额外基函数个数
            n_deriv: D 矩阵的导数阶数（行数）
            n_circle: 圆周梯形公式点数
        """
        self.bih = bih
        self.disk = disk
        self.delta = bih.delta
        self.M = M
        self.M_total = M + n_extra
        self.s_min, self.t_min = disk.s_min, disk.t_min
        self.w0 = disk.w0

        theta = 2 * np.pi * np.arange(n_circle) / n_circle
        E = np.exp(1j * np.outer(np.arange(self.M_total), theta)) / math.sqrt(2 * math.pi)
        self.G_boundary = (E.conj() @ E.T) * (2 * np.pi / n_circle)
        self.G_boundary = 0.5 * (self.G_boundary + self.G_boundary.conj().T)
        self.condition = float(np.linalg.cond(self.G_boundary))

        self.n_deriv = n_deriv
        self.D = self._derivative_matrix(n_deriv)

    def _prefactor(self, f, fprime, theta):
        """(ψ')^{1/2}/√(2π) 与 ψ，√f' 的分支沿切角 θ(s) 连续选取"""
        delta, w0 = self.delta, self.w0
        y = math.pi * f / (4 * delta)
        T = np.tanh(y)
        denom = 1.0 - np.conj(w0) * T
        psi = (T - w0) / denom
        root = np.sqrt(fprime * np.exp(1j * theta)) * np.exp(-0.5j * theta)
        pref = (root / np.cosh(y) * math.sqrt(math.pi / (4 * delta)) * math.sqrt(1 - abs(w0) ** 2)
                / denom / math.sqrt(2 * math.pi))
        return pref, psi

    def values_st(self, s, t, M: Optional[int] = None) -> np.ndarray:
        """基函数在 Θ(s,t) 处的值，形状 (..., M)"""
        M = M or self.M_total
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        f = self.bih.f_st(s, t)
        fp = self.bih.fprime_st(s, t)
        theta = self.bih.tmap.curve.theta(s)
        pref, psi = self._prefactor(f, fp, theta)
        out = np.empty(s.shape + (M,), dtype=complex)
        power = np.ones_like(psi)
        for n in range(M):
            out[..., n] = pref * power
            power = power * psi
        return out

    def _derivative_matrix(self, K: int) -> np.ndarray:
        """D[j, n] = v_n^{(j)}(z_min)，j < K，由 z_min 处的 Taylor 级数链式复合得到"""
        delta, w0 = self.delta, self.w0
        c = self.bih.taylor(self.s_min, self.t_min, K + 1).astype(complex)
        y = math.pi / (4 * delta) * c[:K]
        E = _ps_exp(y)
        Einv = _ps_recip(E)
        tanh = _ps_mul(E - Einv, _ps_recip(E + Einv))
        sech = 2.0 * _ps_recip(E + Einv)
        one = np.zeros(K, dtype=complex)
        one[0] = 1.0
        inv_denom = _ps_recip(one - np.conj(w0) * tanh)
        psi = _ps_mul(tanh - w0 * one, inv_denom)

        dF = np.arange(1, K + 1) * c[1:K + 1]
        theta = float(self.bih.tmap.curve.theta(np.array(self.s_min)))
        root0 = np.sqrt(dF[0] * np.exp(1j * theta)) * np.exp(-0.5j * theta)
        pref = _ps_mul(_ps_mul(_ps_sqrt(dF, root0), sech), inv_denom)
        pref = pref * math.sqrt(math.pi / (4 * delta)) * math.sqrt(1 - abs(w0) ** 2) / math.sqrt(2 * math.pi)

        fact = np.array([math.factorial(j) for j in range(K)], dtype=float)
        D = np.empty((K, self.M_total), dtype=complex)
        series = pref
        for n in range(self.M_total):
            D[:, n] = fact * series
            series = _ps_mul(series, psi)
        return D


def _minimizers(k: int, basis: HardyBasis, M: int) -> np.ndarray:
    """v_0..v_{k−1} 的系数（列），约束 v_l^{(j)}(z_min) = δ_{jl}，j < k"""
    if k > basis.n_deriv:
        raise ValueError(f"k={k} 超过 D 矩阵的导数阶数 {basis.n_deriv}")
    Dk = basis.D[:k, :M]
    sv = np.linalg.svd(Dk, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise SolverError(f"插值约束秩亏: 奇异值比 {sv[-1] / sv[0]:.2e}")
    G = basis.G_boundary[:M, :M]
    GiDh = np.linalg.solve(G, Dk.conj().T)
    S = Dk @ GiDh
    return GiDh @ np.linalg.inv(S)


def d_H_minimized(k: int, basis: HardyBasis, M: Optional[int] = None) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    约束 u^{(j)}(z_min) = δ_{j,k−1}（j ≤ k−1）下边界范数最小的元素

    Returns:
        (d_H^k, v_{k−1} 的系数, 全部 v_l 的系数矩阵（列 l）)
    """
    M = M or basis.M
    if M < k + 8:
        raise ValueError(f"截断阶数 M={M} 须 ≥ k + 8 = {k + 8}")
    C = _minimizers(k, basis, M)
    G = basis.G_boundary[:M, :M]
    v = C[:, k - 1]
    return math.sqrt(float(np.real(v.conj() @ G @ v))), v, C


def hardy_taylor_project(u: np.ndarray, k: int, basis: HardyBasis) -> np.ndarray:
    """Tayl_{H²(Ω)}(u) = Σ_{l<k} u^{(l)}(z_min)·v_l"""
    u = np.asarray(u, dtype=complex)
    M = len(u)
    C = _minimizers(k, basis, M)
    return C @ (basis.D[:k, :M] @ u)


# ============= 数据模型 =============

class EffectiveEntry(BaseModel):
    h: float
    log_offset: float = Field(..., description="2φ_min/h")
    log_scaled: List[float] = Field(..., description="log(以 e^{−2(φ−φ_min)/h} 为权的广义特征值)")
    log_scaled_check: List[float] = Field(..., description="多 n_extra 个基函数时的同一量")
    log_lambda: List[float] = Field(..., description="log λ_k^eff(h)")
    log_asymptote: List[float] = Field(..., description="log[h^{1−k}e^{2φ_min/h}(d_H^k/d_B^k)²]")
    ratio: List[float] = Field(..., description="λ_k^eff 与闭式渐近之比")
    converged: bool = Field(..., description="M 与 M+4 的相对变化低于容差")
    max_rel_change: float
    imag_residual: float = Field(..., description="广义特征值虚部的相对大小")
    tail_fraction: float = Field(..., description="最外层求积面板对 G̃_w[0,0] 的贡献比例")
    laplace_ratio: float = Field(..., description="G̃_w[0,0] 与二维 Laplace 近似之比")


class EffectiveSpectrumReport(BaseModel):
    delta: float
    phi_min: float
    a: float
    b: float
    det_hessian: float
    g_prime_abs: float
    M: int
    k_max: int
    d_B: List[float]
    d_H_closed: List[float]
    d_H_minimized: List[float]
    entries: List[EffectiveEntry]
    warnings: List[str] = Field(default_factory=list)


class GapEntry(BaseModel):
    h: float
    log_lambda_ess_pos: float
    count: int = Field(..., description="λ_k^eff(h) < λ_ess⁺(h) 的 k 的个数")
    margins: List[float] = Field(..., description="log λ_ess⁺ − log λ_k^eff")


class GapReport(BaseModel):
    entries: List[GapEntry]
    nondecreasing: bool = Field(..., description="h 减小时计数不减")


# ============= 加权 Gram 与广义特征值 =============

def _panels(lo: float, hi: float, width: float) -> Tuple[np.ndarray, np.ndarray]:
    n = max(1, int(math.ceil((hi - lo) / width - 1e-9)))
    y, wy = leggauss(PANEL_POINTS)
    bounds = np.linspace(lo, hi, n + 1)
    half = 0.5 * np.diff(bounds)
    mid = 0.5 * (bounds[1:] + bounds[:-1])
    return (mid[:, None] + half[:, None] * y).ravel(), (half[:, None] * wy).ravel()


def _s_nodes(field: PotentialField, report: MinimumReport, sigma_s: float, extent: float):
    """核心区（曲率支撑 ± 2δ 与 x_min 附近 ±12σ_s）细面板，直条带尾部粗面板"""
    delta = field.delta
    core_lo = max(-extent, min(-field.tmap.L0 - 2 * delta, report.s_min - 12 * sigma_s))
    core_hi = min(extent, max(field.tmap.L0 + 2 * delta, report.s_min + 12 * sigma_s))
    fine = min(sigma_s, delta / 4)
    coarse = delta / 2
    parts = [_panels(core_lo, core_hi, fine)]
    if core_lo > -extent:
        parts.insert(0, _panels(-extent, core_lo, coarse))
    if core_hi < extent:
        parts.append(_panels(core_hi, extent, coarse))
    s = np.concatenate([p[0] for p in parts])
    w = np.concatenate([p[1] for p in parts])
    outer = np.zeros(len(s), dtype=bool)
    outer[:PANEL_POINTS] = True
    outer[-PANEL_POINTS:] = True
    return s, w, outer


def weighted_quadrature(field: PotentialField, report: MinimumReport, h: float):
    """
    ∫_Ω e^{−2(φ−φ_min)/h}(·)dx 的张量求积（管状坐标，含 Jacobian m）

    s 方向覆盖 [−S, S]，S = L + 60δ/π（直条带尾部基函数衰减 e^{−30}）；
    t 方向覆盖各截面极小点范围 ±12σ_t。

    Returns:
        (s 节点, t 节点, 权重, 最外层面板掩码)，均已展平
    """
    s0, t0 = report.s_min, report.t_min
    phi_ss = float(field.ev(s0, t0, ds=2))
    phi_tt = float(field.ev(s0, t0, dt=2))
    if phi_ss <= 0 or phi_tt <= 0:
        raise AssumptionError(f"极小点处 ∂²φ 非正: φ_ss={phi_ss:.3e}, φ_tt={phi_tt:.3e}")
    sigma_s = math.sqrt(h / (2 * phi_ss))
    sigma_t = math.sqrt(h / (2 * phi_tt))
    delta = field.delta
    extent = field.L + 60 * delta / math.pi

    s, ws, s_outer = _s_nodes(field, report, sigma_s, extent)
    t_star = field.t[np.argmin(field.values, axis=1)]
    t_lo = max(-delta, min(float(t_star.min()), t0) - 12 * sigma_t)
    t_hi = min(delta, max(float(t_star.max()), t0) + 12 * sigma_t)
    t, wt = _panels(t_lo, t_hi, min(sigma_t, delta / 4))
    t_outer = np.zeros(len(t), dtype=bool)
    if t_lo > -delta:
        t_outer[:PANEL_POINTS] = True
    if t_hi < delta:
        t_outer[-PANEL_POINTS:] = True

    S, T = np.meshgrid(s, t, indexing="ij")
    phi = field.ev(S, T)
    expo = -2.0 * (phi - report.phi_min) / h
    W = np.outer(ws, wt) * field.tmap.metric(S, T) * np.exp(np.minimum(expo, 0.0))
    outer = s_outer[:, None] | t_outer[None, :]
    return S.ravel(), T.ravel(), W.ravel(), outer.ravel()


def _pencil(G_w: np.ndarray, G_b: np.ndarray, h: float, k_max: int) -> Tuple[np.ndarray, float]:
    """
    (h·G_∂, G̃_w) 的最小 k_max 个广义特征值

    转化为 G_∂ 度量下 G̃_w 的最大特征值 ν：λ̃ = h/ν，避免对近奇异的 G̃_w 做 Cholesky。
    """
    L = cholesky(G_b, lower=True)
    X = solve_triangular(L, G_w, lower=True)
    B = solve_triangular(L, X.conj().T, lower=True).conj().T
    B = 0.5 * (B + B.conj().T)
    nu = eigvalsh(B)[::-1]
    if nu[0] <= 0:
        raise SolverError("加权 Gram 矩阵非正")
    if nu[k_max - 1] <= SINGULAR_TOL * nu[0]:
        raise SolverError(f"广义特征值问题数值奇异: ν_{k_max}/ν_1 = {nu[k_max - 1] / nu[0]:.2e}")
    full = np.linalg.eigvals(np.linalg.solve(G_b, G_w))
    imag = float(np.max(np.abs(full.imag)) / np.max(np.abs(full.real)))
    return h / nu[:k_max], imag


def lambda_eff(h: float, k_max: int, basis: HardyBasis, field: PotentialField, report: MinimumReport,
               d_ratio_log: Sequence[float], rel_tol: float = 1e-6) -> EffectiveEntry:
    """
    λ_k^eff(h) = e^{2φ_min/h}·（(h·G_∂, G̃_w) 的第 k 小特征值），k = 1..k_max

    Args:
        h: 半经典参数
        k_max: 计算的特征值个数
        basis: Hardy 基（含 n_extra 个检查用基函数）
        field: 磁势场
        report: 最小值报告
        d_ratio_log: log(d_H^k/d_B^k)²，k = 1..k_max
        rel_tol: M 与 M+4 比较的相对容差

    Raises:
        SolverError: 广义特征值问题奇异或求积未收敛
    """
    S, T, W, outer = weighted_quadrature(field, report, h)
    V = basis.values_st(S, T)
    G = (V.conj().T * W[None, :]) @ V
    G = 0.5 * (G + G.conj().T)

    total = float(np.real(G[0, 0]))
    tail = float(np.sum(W[outer] * np.abs(V[outer, 0]) ** 2)) / total
    if tail > TAIL_TOL:
        raise SolverError(f"求积未收敛: 外层面板贡献 {tail:.2e}（h={h:.4g}）")

    M = basis.M
    lam, imag = _pencil(G[:M, :M], basis.G_boundary[:M, :M], h, k_max)
    lam_check, _ = _pencil(G, basis.G_boundary, h, k_max)
    change = float(np.max(np.abs(lam - lam_check) / lam))
    converged = change <= rel_tol
    if not converged:
        logger.warning("h=%.4g: Hardy 截断未收敛，M→M+%d 相对变化 %.2e", h, basis.M_total - M, change)

    offset = 2 * report.phi_min / h
    log_scaled = [float(math.log(x)) for x in lam]
    log_lambda = [offset + x for x in log_scaled]
    log_asym = [(1 - k) * math.log(h) + offset + d_ratio_log[k - 1] for k in range(1, k_max + 1)]
    ratio = [math.exp(x - y) for x, y in zip(log_lambda, log_asym)]

    det = float(np.linalg.det(np.array(report.hessian)))
    laplace = math.pi * h / math.sqrt(det) * abs(basis.D[0, 0]) ** 2
    logger.debug("h=%.4g: log λ̃ = %s, 比值 = %s", h, log_scaled, ratio)
    return EffectiveEntry(h=h, log_offset=offset, log_scaled=log_scaled,
                          log_scaled_check=[float(math.log(x)) for x in lam_check], log_lambda=log_lambda,
                          log_asymptote=log_asym, ratio=ratio, converged=converged, max_rel_change=change,
                          imag_residual=imag, tail_fraction=tail, laplace_ratio=total / laplace)


def compute_effective(field: PotentialField, report: MinimumReport, bih: Biholomorphism, disk: DiskMapData,
                      h_list: Sequence[float], k_max: int = 2, M: int = 12,
                      rel_tol: float = 1e-6, progress: bool = True) -> EffectiveSpectrumReport:
    """
    在 h 阶梯上计算有效特征值与渐近比值

    Raises:
        AssumptionError: 最小值假设未通过
    """
    report.require_assumption()
    if M < k_max + 8:
        raise ValueError(f"截断阶数 M={M} 须 ≥ k_max + 8 = {k_max + 8}")
    hess = np.array(report.hessian)
    basis = HardyBasis(bih, disk, M, n_deriv=max(k_max, 2))
    dB = [d_B(k, hess) for k in range(1, k_max + 1)]
    dH = [d_H_closed(k, disk) for k in range(1, k_max + 1)]
    dH_min = [d_H_minimized(k, basis)[0] for k in range(1, k_max + 1)]
    d_ratio_log = [2 * (math.log(x) - math.log(y)) for x, y in zip(dH, dB)]

    entries = []
    for h in tqdm(list(h_list), desc="有效谱 h 阶梯", disable=not progress):
        entries.append(lambda_eff(h, k_max, basis, field, report, d_ratio_log, rel_tol))
    warnings = [f"h={e.h:.4g}: Hardy 截断未收敛（相对变化 {e.max_rel_change:.2e}）"
                for e in entries if not e.converged]
    logger.info("有效谱: |g'(0)| = %.8f, d_H/d_B = %s", disk.g_prime_abs,
                [f"{x / y:.6g}" for x, y in zip(dH, dB)])
    return EffectiveSpectrumReport(
        delta=field.delta, phi_min=report.phi_min, a=report.a, b=report.b,
        det_hessian=float(np.linalg.det(hess)), g_prime_abs=disk.g_prime_abs, M=M, k_max=k_max,
        d_B=dB, d_H_closed=dH, d_H_minimized=dH_min, entries=entries, warnings=warnings,
    )


def gap_report(report: EffectiveSpectrumReport, thresholds: Sequence[ThresholdReport]) -> GapReport:
    """统计 λ_k^eff(h) < λ_ess⁺(h) 的个数，对数尺度的余量"""
    out = []
    for entry in report.entries:
        match = [r for r in thresholds if abs(r.h - entry.h) <= 1e-12 * entry.h]
        if not match:
            raise ValueError(f"缺少 h={entry.h:.6g} 的阈值报告")
        lam = match[0].lambda_ess_pos
        if lam <= 0:
            raise SolverError(f"λ_ess⁺ 下溢: h={entry.h:.6g}")
        log_ess = math.log(lam)
        margins = [log_ess - x for x in entry.log_lambda]
        out.append(GapEntry(h=entry.h, log_lambda_ess_pos=log_ess,
                            count=sum(1 for m in margins if m > 0), margins=margins))
    ordered = sorted(out, key=lambda e: -e.h)
    nondecreasing = all(b.count >= a.count for a, b in zip(ordered, ordered[1:]))
    return GapReport(entries=out, nondecreasing=nondecreasing)


# ============= 共轭恒等式 =============

def intertwining_residual(field: PotentialField, v: Callable[[np.ndarray], np.ndarray], h: float,
                          s: np.ndarray, t: np.ndarray, eps: float = 1e-3) -> float:
    """
    d^×_A(e^{−φ/h}v) = (−2ih∂_z̄ − A₁ − iA₂)(e^{−φ/h}v)，A = ∇φ^⊥，∂_z̄ 用中心差分

    Args:
        field: 磁势场
        v: Ω 上的全纯函数（笛卡尔复坐标）
        h: 半经典参数
        s, t: 采样点的管状坐标
        eps: 差分步长

    Returns:
        max|残差| / max|e^{−φ/h}v|

    Raises:
        GeometryError: 差分模板越出区域
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    tmap = field.tmap
    reach = 2 * eps / max(tmap.min_metric, 1e-12)
    if np.any(np.abs(t) + reach >= field.delta):
        raise GeometryError(f"采样点离边界过近，差分模板越出区域（eps={eps:.2e}）")
    z0 = tmap.to_complex(s, t)

    def F(z):
        return np.exp(-field.value_xy(z.real, z.imag) / h) * v(z)

    dx = (F(z0 + eps) - F(z0 - eps)) / (2 * eps)
    dy = (F(z0 + 1j * eps) - F(z0 - 1j * eps)) / (2 * eps)
    dbar = 0.5 * (dx + 1j * dy)
    A = field.vector_potential_st(s, t)
    F0 = F(z0)
    res = -2j * h * dbar - (A[..., 0] + 1j * A[..., 1]) * F0
    return float(np.max(np.abs(res)) / np.max(np.abs(F0)))
