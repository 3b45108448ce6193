"""
一维 Legendre–Gauss Galerkin 工具
区间上的正交归一 Legendre 基、Gauss 求积、约束消元，以及高斯加权的正交基
"""
import logging
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss, legvander
from scipy.linalg import cholesky, null_space, solve_triangular, svd

logger = logging.getLogger(__name__)


def _derivative_matrix(N: int) -> np.ndarray:
    """P_n' = Σ_{k<n, n−k 奇} (2k+1) P_k"""
    k = np.arange(N)[:, None]
    n = np.arange(N)[None, :]
    return np.where((k < n) & ((n - k) % 2 == 1), 2 * k + 1, 0).astype(float)


class LegendreBasis:
    def __init__(self, a: float, b: float, N: int, n_quad: Optional[int] = None):
        """
        [a, b] 上的正交归一 Legendre 基 p_0..p_{N−1}

        Args:
            a, b: 区间端点
            N: 基函数个数
            n_quad: Gauss 节点数（默认 2N + 200，足以积分多项式乘高斯权）
        """
        if N < 2:
            raise ValueError(f"基函数个数过少: N={N}")
        self.a, self.b, self.N = float(a), float(b), int(N)
        n_quad = n_quad or 2 * N + 200
        y, wy = leggauss(n_quad)
        self.half = 0.5 * (self.b - self.a)
        self.x = self.a + self.half * (y + 1.0)
        self.w = self.half * wy
        self.scale = np.sqrt((2 * np.arange(N) + 1) / (self.b - self.a))
        self._dmat = _derivative_matrix(N)
        P = legvander(y, N - 1)
        self.V = P * self.scale
        self.dV = (P @ self._dmat) * self.scale / self.half
        self.va = self.scale * (-1.0) ** np.arange(N)
        self.vb = self.scale.copy()

    def evaluate(self, x, coef: np.ndarray, derivative: bool = False) -> np.ndarray:
        """在任意点求 Σ coef_n p_n(x)（或其导数）"""
        y = (2.0 * np.asarray(x, dtype=float) - self.a - self.b) / (self.b - self.a)
        P = legvander(y, self.N - 1)
        if derivative:
            return (P @ self._dmat) * self.scale / self.half @ coef
        return (P * self.scale) @ coef

    def l2_norm(self, values: np.ndarray) -> float:
        """节点值的 L² 范数"""
        return float(np.sqrt(np.sum(self.w * np.abs(values) ** 2)))


def constrained_basis(constraints: np.ndarray) -> np.ndarray:
    """
    约束 C·c = 0 的正交归一零空间

    基本身正交归一，故约化后的质量矩阵仍为单位阵。
    """
    return null_space(np.atleast_2d(constraints))


def weighted_basis(basis: LegendreBasis, log_weight: np.ndarray, cutoff: float = 1e-12) -> np.ndarray:
    """
    构造在权 W = exp(log_weight) 下正交归一的多项式基，首列为常数

    常数函数 e₀ 单独保留，其余方向先对 e₀ 投影两次，再对 W^{1/2}T 作 SVD 截断，
    最后用实际 Gram 阵的 Cholesky 因子再正交化一次。

    Args:
        basis: Legendre 基
        log_weight: 求积节点上的 log W（建议最大值归一为 0）
        cutoff: 相对奇异值截断阈值

    Returns:
        Legendre 系数矩阵 C，形状 (N, r)，列 0 为 e₀
    """
    ww = basis.w * np.exp(log_weight)
    T = basis.V
    N = basis.N

    c0 = np.zeros(N)
    c0[0] = 1.0 / np.sqrt(np.sum(ww * T[:, 0] ** 2))
    e0 = T @ c0

    rest = np.eye(N)[:, 1:]
    for _ in range(2):
        proj = (e0 * ww) @ (T @ rest)
        rest = rest - np.outer(c0, proj)

    B = np.sqrt(ww)[:, None] * (T @ rest)
    _, S, Vt = svd(B, full_matrices=False)
    keep = S > cutoff * S[0]
    rest = rest @ (Vt[keep].T / S[keep])

    R = T @ rest
    G = R.T @ (ww[:, None] * R)
    L = cholesky(0.5 * (G + G.T), lower=True)
    rest = solve_triangular(L, rest.T, lower=True).T

    if not np.all(keep):
        logger.debug("加权基截断: 保留 %d / %d 个方向", int(keep.sum()), N - 1)
    return np.column_stack([c0, rest])
