"""
磁势模块
在管状坐标下求解 Δφ = 1（边界 φ = 0），定位 φ 的最小值并检验最小值假设
"""
import logging
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from pydantic import BaseModel, Field
from scipy.interpolate import RectBivariateSpline

from curve_geometry import TubularMap
from errors import AssumptionError, GeometryError, SolverError

logger = logging.getLogger(__name__)


def phi0(t, delta: float):
    """直条带磁势 φ₀(t) = (t² − δ²)/2"""
    t = np.asarray(t, dtype=float)
    return 0.5 * (t ** 2 - delta ** 2)


# ============= 管状坐标拉普拉斯 =============

def solve_tubular_dirichlet(tmap: TubularMap, s: np.ndarray, t: np.ndarray, source: float,
                            boundary: np.ndarray, tol: float = 1e-8) -> Tuple[np.ndarray, float]:
    """
    在 (s,t) 张量网格上求解 Δu = source，边界节点取 boundary 中的值

    拉普拉斯用守恒形式 m⁻¹[∂_s(m⁻¹∂_s u) + ∂_t(m∂_t u)]，面上系数精确取值，
    方程两边乘以 m 后组装五点格式。

    Args:
        tmap: 管状映射
        s, t: 均匀网格（含端点）
        source: 常数右端
        boundary: 形状 (N_s, N_t)，只读取边界行/列
        tol: 内点离散残差上限

    Returns:
        (u, 内点残差 max|Δ_h u − source|)
    """
    ns, nt = len(s), len(t)
    ds, dt = s[1] - s[0], t[1] - t[0]
    m = tmap.metric(s[:, None], t[None, :])
    if np.min(m) <= 0:
        raise GeometryError(f"网格上度量因子非正: min m = {np.min(m):.6g}")

    s_half = 0.5 * (s[1:] + s[:-1])
    t_half = 0.5 * (t[1:] + t[:-1])
    inv_m_s = 1.0 / tmap.metric(s_half[:, None], t[None, :])
    m_t = tmap.metric(s[:, None], t_half[None, :])

    idx = np.arange(ns * nt).reshape(ns, nt)
    centre = idx[1:-1, 1:-1]
    c_e = inv_m_s[1:, 1:-1] / ds ** 2
    c_w = inv_m_s[:-1, 1:-1] / ds ** 2
    c_n = m_t[1:-1, 1:] / dt ** 2
    c_s = m_t[1:-1, :-1] / dt ** 2

    rows = [centre] * 5
    cols = [centre, idx[2:, 1:-1], idx[:-2, 1:-1], idx[1:-1, 2:], idx[1:-1, :-2]]
    data = [-(c_e + c_w + c_n + c_s), c_e, c_w, c_n, c_s]

    edge = np.ones((ns, nt), dtype=bool)
    edge[1:-1, 1:-1] = False
    bidx = idx[edge]

    rows = np.concatenate([r.ravel() for r in rows] + [bidx])
    cols = np.concatenate([c.ravel() for c in cols] + [bidx])
    data = np.concatenate([d.ravel() for d in data] + [np.ones(len(bidx))])
    A = sp.coo_matrix((data, (rows, cols)), shape=(ns * nt, ns * nt)).tocsr()

    rhs = np.zeros((ns, nt))
    rhs[1:-1, 1:-1] = source * m[1:-1, 1:-1]
    rhs[edge] = boundary[edge]
    rhs = rhs.ravel()

    u = spla.spsolve(A, rhs)
    if not np.all(np.isfinite(u)):
        raise SolverError("稀疏线性求解失败：解中含非有限值")

    res = (A @ u - rhs).reshape(ns, nt)[1:-1, 1:-1] / m[1:-1, 1:-1]
    residual = float(np.max(np.abs(res), initial=0.0))
    if residual > tol:
        raise SolverError(f"离散残差 {residual:.3e} 超过容差 {tol:.1e}")
    logger.debug("Dirichlet 求解完成: 网格 %dx%d, 残差 %.2e", ns, nt, residual)
    return u.reshape(ns, nt), residual


def default_grid(tmap: TubularMap, L: Optional[float], N_s: Optional[int], N_t: Optional[int]):
    """截断长度默认 L = L₀ + 6δ，步长默认 δ/10"""
    delta = tmap.delta
    L = float(L) if L is not None else tmap.L0 + 6.0 * delta
    if L <= tmap.L0:
        raise GeometryError(f"截断长度 L={L:.6g} 必须大于曲率支撑 L₀={tmap.L0:.6g}")
    if N_t is None:
        N_t = 21
    if N_s is None:
        N_s = 2 * int(np.ceil(L / (2.0 * delta / (N_t - 1)) - 1e-9)) + 1
    if N_s < 5 or N_t < 5:
        raise ValueError(f"网格过小: N_s={N_s}, N_t={N_t}")
    return L, np.linspace(-L, L, N_s), np.linspace(-delta, delta, N_t)


# ============= 数据模型 =============

class MinimumReport(BaseModel):
    """φ 的最小值及最小值假设的各项标志"""
    s_min: float = Field(..., description="最小点的 s 坐标")
    t_min: float = Field(..., description="最小点的 t 坐标")
    x_min: List[float] = Field(..., description="最小点的笛卡尔坐标")
    phi_min: float = Field(..., description="最小值 φ_min（长度²）")
    hessian: List[List[float]] = Field(..., description="笛卡尔坐标下的 Hess φ(x_min)")
    a: float = Field(..., description="Hessian 较小特征值的 2 倍")
    b: float = Field(..., description="Hessian 较大特征值的 2 倍")
    unique_min: bool = Field(..., description="网格上不存在竞争的局部最小值")
    nondegenerate: bool = Field(..., description="Hessian 正定")
    strictly_below_straight: bool = Field(..., description="φ_min < −δ²/2")
    interior: bool = Field(..., description="最小点不在截断边界或侧边界附近")
    competing_minima: int = Field(default=0, description="φ_min + 1e−6δ² 以下的其他局部最小值个数")

    @property
    def assumption_ok(self) -> bool:
        return self.unique_min and self.nondegenerate and self.strictly_below_straight and self.interior

    def failed_flags(self) -> List[str]:
        names = ["unique_min", "nondegenerate", "strictly_below_straight", "interior"]
        return [n for n in names if not getattr(self, n)]

    def require_assumption(self) -> None:
        """最小值假设不成立时抛出 AssumptionError"""
        failed = self.failed_flags()
        if failed:
            raise AssumptionError(f"磁势最小值假设不成立: {', '.join(failed)} (φ_min={self.phi_min:.10g})")


class BoundaryDerivativeReport(BaseModel):
    min_value: float = Field(..., description="∂_Nφ 在 ∂Ω 上的最小值")
    s_at_min: float = Field(..., description="取到最小值的 s")
    side: int = Field(..., description="边界分支：+1 对应 t=δ，−1 对应 t=−δ")
    tail_value: float = Field(..., description="截断端附近的 ∂_Nφ（与 δ 比较）")


class TruncationReport(BaseModel):
    L: float
    L_doubled: float
    phi_min: float
    phi_min_doubled: float
    change: float = Field(..., description="|Δφ_min|")
    ok: bool = Field(..., description="变化量低于阈值")


# ============= 磁势场 =============

class PotentialField:
    def __init__(self, tmap: TubularMap, L: float, s: np.ndarray, t: np.ndarray,
                 values: np.ndarray, residual: float):
        self.tmap = tmap
        self.delta = tmap.delta
        self.L = L
        self.s = s
        self.t = t
        self.values = values
        self.residual = residual
        self._spline = RectBivariateSpline(s, t, values, kx=3, ky=3, s=0)

    @property
    def ds(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def ev(self, s, t, ds: int = 0, dt: int = 0):
        """φ 及其 (s,t) 偏导；|s| > L 处使用 φ₀"""
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        inside = np.abs(s) <= self.L
        sc = np.clip(s, -self.L, self.L)
        tc = np.clip(t, -self.delta, self.delta)
        out = self._spline.ev(sc, tc, dx=ds, dy=dt)
        if np.all(inside):
            return out
        if ds > 0:
            tail = np.zeros_like(t)
        elif dt == 0:
            tail = phi0(t, self.delta)
        elif dt == 1:
            tail = t.copy()
        elif dt == 2:
            tail = np.ones_like(t)
        else:
            tail = np.zeros_like(t)
        return np.where(inside, out, tail)

    def value(self, s, t):
        return self.ev(s, t)

    def value_xy(self, x, y):
        s, t = self.tmap.inverse(x, y)
        return self.ev(s, t)

    def grad_xy(self, s, t):
        """笛卡尔梯度 ∇φ = (∂_sφ/m)γ' + ∂_tφ·n"""
        m = self.tmap.metric(s, t)
        ps = self.ev(s, t, ds=1)
        pt = self.ev(s, t, dt=1)
        curve = self.tmap.curve
        return (ps / m)[..., None] * curve.tangent(s) + np.asarray(pt)[..., None] * curve.normal(s)

    def laplacian(self, s, t):
        """插值函数的坐标拉普拉斯"""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        kap = self.tmap.kappa(s)
        kp = self.tmap.curve.profile.kappa_prime(s)
        m = 1.0 - t * kap
        return (self.ev(s, t, ds=2) / m ** 2 + t * kp * self.ev(s, t, ds=1) / m ** 3
                + self.ev(s, t, dt=2) - kap * self.ev(s, t, dt=1) / m)

    def vector_potential_st(self, s, t):
        """A = ∇φ^⊥ = (−∂₂φ, ∂₁φ)"""
        g = self.grad_xy(s, t)
        return np.stack([-g[..., 1], g[..., 0]], axis=-1)

    def as_table(self) -> np.ndarray:
        """(s, t, φ) 三列表格，行按 s 优先"""
        S, T = np.meshgrid(self.s, self.t, indexing="ij")
        return np.column_stack([S.ravel(), T.ravel(), self.values.ravel()])


def solve_phi(tmap: TubularMap, L: Optional[float] = None, N_s: Optional[int] = None,
              N_t: Optional[int] = None, tol: float = 1e-8) -> PotentialField:
    """
    求解 Δφ = 1，φ|_{t=±δ} = 0，φ(±L,t) = φ₀(t)

    Args:
        tmap: 管状映射
        L: 截断半长（默认 L₀ + 6δ）
        N_s, N_t: 网格点数（含端点）
        tol: 内点残差容差

    Returns:
        PotentialField
    """
    L, s, t = default_grid(tmap, L, N_s, N_t)
    boundary = np.zeros((len(s), len(t)))
    boundary[0, :] = phi0(t, tmap.delta)
    boundary[-1, :] = phi0(t, tmap.delta)
    values, residual = solve_tubular_dirichlet(tmap, s, t, 1.0, boundary, tol)
    logger.info("磁势求解: L=%.4g, 网格 %dx%d, min φ=%.10g", L, len(s), len(t), values.min())
    return PotentialField(tmap, L, s, t, values, residual)


def _grid_local_minima(values: np.ndarray) -> np.ndarray:
    """内点中不大于 8 个邻点的网格位置"""
    c = values[1:-1, 1:-1]
    ok = np.ones_like(c, dtype=bool)
    ns, nt = values.shape
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            ok &= c <= values[1 + di:ns - 1 + di, 1 + dj:nt - 1 + dj]
    return np.argwhere(ok) + 1


def locate_minimum(field: PotentialField, strict: bool = False, hess_tol: float = 1e-8) -> MinimumReport:
    """
    网格最小值 + 插值函数上的牛顿细化，计算 Hessian 与各项假设标志

    Args:
        field: 磁势场
        strict: 为 True 时最小值位于边界或退化即抛出 AssumptionError
        hess_tol: 判定正定的最小特征值阈值

    Returns:
        MinimumReport
    """
    v = field.values
    ns, nt = v.shape
    inner = v[1:-1, 1:-1]
    i, j = np.unravel_index(int(np.argmin(inner)), inner.shape)
    i, j = i + 1, j + 1
    s0, t0 = float(field.s[i]), float(field.t[j])
    delta = field.delta

    for _ in range(60):
        g = np.array([field.ev(s0, t0, ds=1), field.ev(s0, t0, dt=1)], dtype=float)
        H = np.array([[field.ev(s0, t0, ds=2), field.ev(s0, t0, ds=1, dt=1)],
                      [field.ev(s0, t0, ds=1, dt=1), field.ev(s0, t0, dt=2)]], dtype=float)
        step = np.linalg.lstsq(H, -g, rcond=1e-10)[0]
        scale = max(abs(step[0]) / field.ds, abs(step[1]) / field.dt)
        if scale > 1.0:
            step /= scale
        s0 = float(np.clip(s0 + step[0], -field.L, field.L))
        t0 = float(np.clip(t0 + step[1], -delta, delta))
        if abs(step[0]) + abs(step[1]) < 1e-14:
            break

    phi_min = float(field.ev(s0, t0))
    H_st = np.array([[field.ev(s0, t0, ds=2), field.ev(s0, t0, ds=1, dt=1)],
                     [field.ev(s0, t0, ds=1, dt=1), field.ev(s0, t0, dt=2)]], dtype=float)
    tmap = field.tmap
    m = float(tmap.metric(s0, t0))
    J = np.column_stack([m * tmap.curve.tangent(np.array(s0)), tmap.curve.normal(np.array(s0))])
    J_inv = np.linalg.inv(J)
    H_x = J_inv.T @ H_st @ J_inv
    H_x = 0.5 * (H_x + H_x.T)
    lam = np.linalg.eigvalsh(H_x)

    margin = 1e-6 * delta ** 2
    grid_min = float(inner.min())
    candidates = [(a, b) for a, b in _grid_local_minima(v)
                  if v[a, b] <= grid_min + margin and max(abs(a - i), abs(b - j)) > 2]
    competing = len(candidates)
    if (tmap.curve.profile.is_even() and abs(s0) > 2 * field.ds
            and not any(abs(field.s[a] + s0) <= 2 * field.ds for a, _ in candidates)):
        # 偶剖面：(−s, t) 处的镜像点同为最小值
        competing += 1
    interior = (1 < i < ns - 2) and (1 < j < nt - 2) and abs(s0) < field.L - 2 * field.ds

    report = MinimumReport(
        s_min=s0, t_min=t0,
        x_min=[float(x) for x in tmap.theta_map(np.array(s0), np.array(t0))],
        phi_min=phi_min,
        hessian=H_x.tolist(),
        a=float(2 * lam[0]), b=float(2 * lam[1]),
        unique_min=competing == 0,
        nondegenerate=bool(lam[0] > hess_tol),
        strictly_below_straight=phi_min < -0.5 * delta ** 2 - 1e-12 * delta ** 2,
        interior=bool(interior),
        competing_minima=competing,
    )
    if not report.assumption_ok:
        logger.warning("最小值假设未通过: %s", report.failed_flags())
    if strict and not (report.interior and report.nondegenerate):
        report.require_assumption()
    return report


def boundary_normal_derivative(field: PotentialField) -> BoundaryDerivativeReport:
    """
    两条边界上的外法向导数 ∂_Nφ（单侧二阶差分）

    t = ±δ 处外法向为 ±n，且 ∂_tΘ = n 为单位向量，故 ∂_Nφ = ±∂_tφ。
    """
    v = field.values
    dt = field.dt
    upper = (3 * v[:, -1] - 4 * v[:, -2] + v[:, -3]) / (2 * dt)
    lower = (3 * v[:, 0] - 4 * v[:, 1] + v[:, 2]) / (2 * dt)
    best_side, best_i, best_val = 1, 0, np.inf
    for side, vals in ((1, upper), (-1, lower)):
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_side, best_i, best_val = side, k, float(vals[k])
    # 截断端 s = ±L 上 φ = φ₀，尾部值取最外两列
    tail = float(0.25 * (upper[0] + upper[-1] + lower[0] + lower[-1]))
    return BoundaryDerivativeReport(min_value=best_val, s_at_min=float(field.s[best_i]),
                                    side=best_side, tail_value=tail)


def vector_potential(field: PotentialField, point) -> np.ndarray:
    """
    笛卡尔点处的 A = ∇φ^⊥

    Args:
        field: 磁势场
        point: (x, y)，可为数组

    Returns:
        形状 (..., 2) 的 A
    """
    x, y = np.asarray(point[0], dtype=float), np.asarray(point[1], dtype=float)
    s, t = field.tmap.inverse(x, y, strict=True)
    return field.vector_potential_st(s, t)


def truncation_sensitivity(field: PotentialField, threshold: float = 1e-8) -> TruncationReport:
    """以 2L 重解并比较 φ_min"""
    L2 = 2.0 * field.L
    N_s = 2 * (len(field.s) - 1) + 1
    wide = solve_phi(field.tmap, L=L2, N_s=N_s, N_t=len(field.t), tol=max(field.residual * 10, 1e-8))
    a = float(field.values.min())
    b = float(wide.values.min())
    change = abs(a - b)
    if change >= threshold:
        logger.warning("截断敏感性: |Δφ_min| = %.3e ≥ %.1e", change, threshold)
    return TruncationReport(L=field.L, L_doubled=L2, phi_min=a, phi_min_doubled=b,
                            change=change, ok=change < threshold)
