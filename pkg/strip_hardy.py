"""
直条带 Hardy 空间 H²(S_δ)
通过 Fourier 表示计算迹范数、内部 L² 范数、M(u)、复点求值、伸缩逼近。
Fourier 约定为酉约定 𝓕u(ξ) = (2π)^{−1/2}∫u(x)e^{−ixξ}dx。
"""
import logging
import math
import warnings
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss, legval
from scipy.integrate import IntegrationWarning, quad

from errors import GeometryError, SolverError

logger = logging.getLogger(__name__)

PANEL_WIDTH = 0.25
PANEL_POINTS = 16
DECAY_TOL = 1e-12


def _shc(x: np.ndarray) -> np.ndarray:
    """sinh(x)/x，小参数用级数"""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    safe = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 + x2 / 6.0 + x2 * x2 / 120.0, np.sinh(safe) / safe)


class StripHardyElement:
    def __init__(self, delta: float, spectrum: Callable[[np.ndarray], np.ndarray], edge: float,
                 band_limited: bool = True):
        """
        H²(S_δ) 中的元素，由其在实轴上的 Fourier 变换 û 给出

        Args:
            delta: 条带半宽
            spectrum: ξ ↦ û(ξ)（复值，向量化）
            edge: 求积网格覆盖 [−edge, edge]
            band_limited: û 在网格外恒为零；否则用自适应求积给出网格外的衰减证书
        """
        if delta <= 0 or edge <= 0:
            raise ValueError(f"δ 与 edge 必须为正: δ={delta}, edge={edge}")
        self.delta = float(delta)
        self.spectrum = spectrum
        self.edge = float(edge)
        self.band_limited = band_limited

        n_panels = max(1, int(math.ceil(2 * self.edge / PANEL_WIDTH)))
        y, wy = leggauss(PANEL_POINTS)
        bounds = np.linspace(-self.edge, self.edge, n_panels + 1)
        half = 0.5 * (bounds[1:] - bounds[:-1])
        mid = 0.5 * (bounds[1:] + bounds[:-1])
        self.xi = (mid[:, None] + half[:, None] * y[None, :]).ravel()
        self.w = (half[:, None] * wy[None, :]).ravel()
        self.values = np.asarray(spectrum(self.xi), dtype=complex)
        self._certificate: Optional[float] = None

    # ----- 构造 -----

    def combine(self, other: "StripHardyElement", a: complex = 1.0, b: complex = 1.0) -> "StripHardyElement":
        """a·u + b·v"""
        if other.delta != self.delta:
            raise ValueError("两个元素的 δ 不同")
        f, g = self.spectrum, other.spectrum
        return StripHardyElement(self.delta, lambda x: a * f(x) + b * g(x), max(self.edge, other.edge),
                                 self.band_limited and other.band_limited)

    def __add__(self, other):
        return self.combine(other)

    def __sub__(self, other):
        return self.combine(other, 1.0, -1.0)

    # ----- 衰减证书 -----

    def weighted_mass(self) -> float:
        """∫ e^{2δ|ξ|}|û|² dξ（网格内）"""
        return float(np.sum(self.w * np.exp(2 * self.delta * np.abs(self.xi)) * np.abs(self.values) ** 2))

    def _weighted_density(self, x: float) -> float:
        """e^{2δ|ξ|}|û(ξ)|²，在对数域组合以免 e^{2δ|ξ|} 单独溢出"""
        value = abs(complex(self.spectrum(np.array([x]))[0]))
        if value == 0.0:
            return 0.0
        return math.exp(2 * self.delta * abs(x) + 2 * math.log(value))

    def certificate(self) -> float:
        """网格外 e^{2δ|ξ|}|û|² 的质量"""
        if self._certificate is None:
            if self.band_limited:
                self._certificate = 0.0
            else:
                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", IntegrationWarning)
                        right, _ = quad(self._weighted_density, self.edge, np.inf, limit=200)
                        left, _ = quad(self._weighted_density, -np.inf, -self.edge, limit=200)
                except OverflowError as e:
                    raise SolverError(f"衰减不足: e^{{2δ|ξ|}}|û|² 在网格外溢出（edge={self.edge:.4g}）") from e
                total = float(left + right)
                if not math.isfinite(total):
                    raise SolverError(f"衰减不足: 网格外质量非有限（edge={self.edge:.4g}）")
                self._certificate = total
                logger.debug("衰减证书: edge=%.4g, 网格外质量 %.3e", self.edge, self._certificate)
        return self._certificate

    def _check_decay(self):
        cert = self.certificate()
        mass = self.weighted_mass()
        if cert > DECAY_TOL * max(mass, 1e-300):
            raise SolverError(f"衰减不足: 网格外质量 {cert:.3e}，网格内 {mass:.3e}（edge={self.edge:.4g}）")

    def to_dict(self) -> dict:
        """Fourier 网格数据（JSON 友好）"""
        return {
            "delta": self.delta,
            "edge": self.edge,
            "xi": self.xi.tolist(),
            "weights": self.w.tolist(),
            "re": self.values.real.tolist(),
            "im": self.values.imag.tolist(),
            "certificate": self.certificate(),
        }


def band_limited_element(delta: float, coef: np.ndarray, band: float = 3.0,
                         window: bool = True) -> StripHardyElement:
    """
    û(ξ) = Σ c_n P_n(ξ/Ξ)·(1 − (ξ/Ξ)²)²，|ξ| ≤ Ξ；window=False 时不乘窗函数
    """
    coef = np.asarray(coef, dtype=complex)

    def spectrum(x):
        y = np.asarray(x, dtype=float) / band
        inside = np.abs(y) <= 1.0
        val = legval(np.clip(y, -1.0, 1.0), coef)
        if window:
            val = val * (1.0 - y * y) ** 2
        return np.where(inside, val, 0.0)

    return StripHardyElement(delta, spectrum, band, band_limited=True)


def random_element(delta: float, rng: np.random.Generator, band: float = 3.0, n_modes: int = 8) -> StripHardyElement:
    coef = rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)
    return band_limited_element(delta, coef, band)


# ============= 范数 =============

def trace_norm(u: StripHardyElement) -> float:
    """‖Tu‖_{L²(∂S_δ)} = (∫(e^{2δξ} + e^{−2δξ})|û|²dξ)^{1/2}"""
    u._check_decay()
    kernel = 2.0 * np.cosh(2 * u.delta * u.xi)
    return math.sqrt(float(np.sum(u.w * kernel * np.abs(u.values) ** 2)))


def interior_norm(u: StripHardyElement) -> float:
    """‖u‖_{L²(S_δ)} = (2δ∫ sinh(2δξ)/(2δξ)·|û|²dξ)^{1/2}"""
    u._check_decay()
    kernel = 2 * u.delta * _shc(2 * u.delta * u.xi)
    return math.sqrt(float(np.sum(u.w * kernel * np.abs(u.values) ** 2)))


def line_norm(u: StripHardyElement, y: float) -> float:
    """‖u(· + iy)‖_{L²(ℝ)}，|y| < δ"""
    if abs(y) > u.delta:
        raise GeometryError(f"|y|={abs(y):.4g} 超出条带半宽 δ={u.delta:.4g}")
    return math.sqrt(float(np.sum(u.w * np.exp(-2 * y * u.xi) * np.abs(u.values) ** 2)))


def sup_norm_M(u: StripHardyElement, n_y: int = 41) -> float:
    """M(u) = sup_{|y|<δ} ‖u(· + iy)‖（log‖u(·+iy)‖² 关于 y 凸，上确界在端点取到）"""
    u._check_decay()
    ys = np.linspace(-u.delta, u.delta, n_y)
    return max(line_norm(u, y) for y in ys)


def evaluate(u: StripHardyElement, z0: complex, k: int = 0) -> complex:
    """
    u^{(k)}(z₀) = (2π)^{−1/2}∫(iξ)^k e^{iz₀ξ} û(ξ) dξ

    Raises:
        GeometryError: z₀ 不在开条带内
    """
    z0 = complex(z0)
    if abs(z0.imag) >= u.delta:
        raise GeometryError(f"z₀={z0} 不在开条带 |Im z| < {u.delta:.4g} 内")
    integrand = (1j * u.xi) ** k * np.exp(1j * z0 * u.xi) * u.values
    return complex(np.sum(u.w * integrand) / math.sqrt(2 * math.pi))


def cauchy_bound(u: StripHardyElement, z0: complex, k: int) -> float:
    """√((2k)!/(2^{2k+1}π))·dist(z₀, ∂S_δ)^{−(2k+1)/2}·‖Tu‖"""
    dist = u.delta - abs(complex(z0).imag)
    const = math.sqrt(math.factorial(2 * k) / (2 ** (2 * k + 1) * math.pi))
    return const * dist ** (-(2 * k + 1) / 2) * trace_norm(u)


def dilate(u: StripHardyElement, eps: float) -> StripHardyElement:
    """
    u_ε(x) = u((1−ε)x)，û_ε(ξ) = (1−ε)^{−1}û(ξ/(1−ε))

    带限元素的支撑缩到 (1−ε)·edge，e^{2δ|ξ|} 在支撑边缘的权重随之乘以 e^{−2δε·edge}。
    """
    if not 0 <= eps < 1:
        raise ValueError(f"ε 必须在 [0, 1) 内: {eps}")
    if eps == 0:
        return u
    scale = 1.0 - eps
    f = u.spectrum
    edge = u.edge * scale if u.band_limited else u.edge
    return StripHardyElement(u.delta, lambda x: f(np.asarray(x) / scale) / scale, edge, u.band_limited)
