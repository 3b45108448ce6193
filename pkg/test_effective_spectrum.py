#!/usr/bin/env python3
"""
有效谱测试脚本
验证 Bargmann 正交化、d_B/d_H 常数、Hardy–Taylor 投影、有效特征值的渐近比值、谱隙计数与共轭恒等式
"""
import math
from functools import lru_cache

import numpy as np

from check_runner import run_checks
from conformal_map import build_biholomorphism, disk_derivative
from curve_geometry import CurvatureProfile, build_curve, tubular_map
from effective_spectrum import (HardyBasis, bargmann_orthogonalize, compute_effective, d_B, d_H_closed,
                                d_H_minimized, gap_report, hardy_taylor_project, intertwining_residual,
                                ratio_identity)
from errors import AssumptionError, GeometryError, SolverError
from fibered_dirac import threshold_report
from magnetic_potential import locate_minimum, solve_phi

BUMP = CurvatureProfile(kind="gaussian_bump", amplitude=0.85, width=0.7, support=2.0)
ZERO = CurvatureProfile(kind="zero", support=2.0)


def rotated_hessian(a: float, b: float, angle: float) -> np.ndarray:
    R = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    return R @ np.diag([a / 2, b / 2]) @ R.T


@lru_cache(maxsize=None)
def setup(kind="bump", delta=1.0):
    tmap = tubular_map(build_curve(BUMP if kind == "bump" else ZERO), delta)
    field = solve_phi(tmap, N_t=41)
    report = locate_minimum(field)
    bih = build_biholomorphism(tmap, N_t=41)
    if kind == "bump":
        disk = disk_derivative(bih, report.s_min, report.t_min)
    else:
        disk = disk_derivative(bih, 0.0, 0.0)
    return field, report, bih, disk


@lru_cache(maxsize=None)
def hardy(kind="bump", delta=1.0, M=12):
    _, _, bih, disk = setup(kind, delta)
    return HardyBasis(bih, disk, M)


def plateau_gap() -> float:
    """Δ = −δ²/2 − φ_min，直条带尾部权重停在 e^{−2Δ/h}"""
    _, report, _, _ = setup()
    return -0.5 - report.phi_min


@lru_cache(maxsize=None)
def ladder():
    field, report, bih, disk = setup()
    gap = plateau_gap()
    hs = [gap * c for c in (0.5, 0.4, 0.3, 0.2)]
    return compute_effective(field, report, bih, disk, hs, k_max=2, M=12, progress=False)


# ============= Bargmann =============

def test_bargmann_isotropic():
    basis = bargmann_orthogonalize(0.5 * np.eye(2), M=8)
    err = np.max(np.abs(basis.coef - np.eye(9)))
    print(f"各向同性: max|P_n − z^n| 系数误差 = {err:.2e}")
    assert err < 1e-10


def test_bargmann_closed_form():
    hess = rotated_hessian(1.0, 3.0, 0.4)
    basis = bargmann_orthogonalize(hess, M=8)
    assert abs(basis.a - 1.0) < 1e-12 and abs(basis.b - 3.0) < 1e-12
    for m in range(7):
        closed = basis.closed_form(m)
        scale = max(1.0, float(np.max(np.abs(closed))))
        assert np.max(np.abs(basis.coef[m] - closed)) < 1e-8 * scale, m
        assert abs(basis.norms[m] / basis.norm_closed(m) - 1) < 1e-8, m
    assert basis.orthogonality_defect() < 1e-10
    assert np.allclose(np.diag(basis.b_coef), [math.factorial(m) for m in range(9)])


def test_d_B_consistency():
    """d_B^k = N_B(P_{k−1})/(k−1)!（B = tr Hess）"""
    for hess in (rotated_hessian(0.5, 1.5, 0.0), rotated_hessian(0.3, 1.7, 1.1)):
        basis = bargmann_orthogonalize(hess, M=6)
        for k in range(1, 6):
            lhs = d_B(k, hess)
            rhs = basis.norms[k - 1] / math.factorial(k - 1)
            assert abs(lhs / rhs - 1) < 1e-10, (k, lhs, rhs)


def test_bargmann_guards():
    try:
        bargmann_orthogonalize(np.diag([0.5, -0.1]), M=4)
    except AssumptionError as e:
        print(f"✓ 预期异常: {e}")
    else:
        raise AssertionError("非正定 Hessian 未被拒绝")
    try:
        bargmann_orthogonalize(rotated_hessian(1.0, 3.0, 0.2), M=30, n_quad=10)
    except SolverError as e:
        print(f"✓ 预期异常: {e}")
    else:
        raise AssertionError("求积分辨率不足未被检测")


# ============= Hardy =============

def test_d_H_straight():
    basis = hardy("zero")
    disk = basis.disk
    for k in (1, 2, 3):
        closed = d_H_closed(k, disk)
        minimized, _, _ = d_H_minimized(k, basis)
        print(f"k={k}: 闭式 {closed:.10f}, 极小 {minimized:.10f}")
        assert abs(minimized / closed - 1) < 1e-4


def test_d_H_bump():
    basis = hardy("bump")
    for k in (1, 2):
        closed = d_H_closed(k, basis.disk)
        minimized, v, C = d_H_minimized(k, basis)
        assert abs(minimized / closed - 1) < 1e-6
        assert np.max(np.abs(basis.D[:k, :basis.M] @ C - np.eye(k))) < 1e-8
        assert np.allclose(C[:, k - 1], v)


def test_d_H_monotone_in_M():
    basis = hardy("bump", M=16)
    for k in (1, 2, 3):
        coarse = d_H_minimized(k, basis, M=12)[0]
        fine = d_H_minimized(k, basis, M=16)[0]
        assert fine <= coarse * (1 + 1e-12)


def test_d_H_scaling():
    """区域放大 c 倍，d_H^k 乘以 c^{k−1/2}"""
    small, large = hardy("zero", 1.0), hardy("zero", 2.0)
    for k in (1, 2, 3):
        ratio = d_H_closed(k, large.disk) / d_H_closed(k, small.disk)
        assert abs(ratio - 2 ** (k - 0.5)) < 1e-6


def test_basis_branch():
    """全局求值与 z_min 处级数常数项一致"""
    for kind, tol in (("zero", 1e-8), ("bump", 1e-3)):
        basis = hardy(kind)
        vals = basis.values_st(np.array(basis.s_min), np.array(basis.t_min))
        err = np.max(np.abs(vals - basis.D[0]))
        assert err < tol * np.max(np.abs(basis.D[0])), (kind, err)
        assert basis.condition < 1 + 1e-10


def test_taylor_projection():
    basis = hardy("bump")
    rng = np.random.default_rng(17)
    u = rng.standard_normal(basis.M) + 1j * rng.standard_normal(basis.M)
    k = 2
    p = hardy_taylor_project(u, k, basis)
    pp = hardy_taylor_project(p, k, basis)
    Dk = basis.D[:k, :basis.M]
    assert np.max(np.abs(pp - p)) < 1e-8 * np.max(np.abs(p))
    assert np.max(np.abs(Dk @ p - Dk @ u)) < 1e-8 * np.max(np.abs(Dk @ u))

    # G_∂ = I 下投影矩阵自伴
    P = np.column_stack([hardy_taylor_project(e, k, basis) for e in np.eye(basis.M, dtype=complex)])
    assert np.max(np.abs(P - P.conj().T)) < 1e-10
    assert np.max(np.abs(P @ P - P)) < 1e-10


def test_ratio_identity():
    _, report, _, disk = setup()
    hess = np.array(report.hessian)
    for k in (1, 2, 3):
        lhs = (d_H_closed(k, disk) / d_B(k, hess, B=1.0)) ** 2
        rhs = ratio_identity(k, disk.g_prime_abs, hess)
        assert abs(lhs / rhs - 1) < 1e-6, (k, lhs, rhs)


# ============= 有效特征值 =============

def test_effective_ladder():
    rep = ladder()
    print(f"Δ = {plateau_gap():.6f}, |g'(0)| = {rep.g_prime_abs:.6f}")
    for e in rep.entries:
        print(f"h={e.h:.5f}: r₁={e.ratio[0]:.4f}, r₂={e.ratio[1]:.4f}, Laplace={e.laplace_ratio:.4f}, "
              f"ΔM={e.max_rel_change:.2e}, 尾部={e.tail_fraction:.1e}")
        assert e.log_lambda[0] <= e.log_lambda[1]
        assert all(c <= s + 1e-10 for c, s in zip(e.log_scaled_check, e.log_scaled))
        assert all(math.isfinite(r) and r > 0 for r in e.ratio)
        assert e.tail_fraction <= 1e-12
        assert e.imag_residual < 1e-8
    last = rep.entries[-1]
    for k in range(2):
        errors = [abs(e.ratio[k] - 1) for e in rep.entries]
        assert all(b < a for a, b in zip(errors, errors[1:])), (k + 1, errors)
        assert errors[-1] <= 0.2, (k + 1, errors[-1])
    assert abs(last.laplace_ratio - 1) <= 0.1
    assert last.max_rel_change < 1e-4
    for a, b in zip(rep.d_H_closed, rep.d_H_minimized):
        assert abs(a / b - 1) < 1e-6


def test_gap_count():
    """阶梯最小 h 处 λ₁^eff < λ_ess⁺，对数余量随 h 减小而增大"""
    rep = ladder()
    thresholds = [threshold_report(e.h, 1.0) for e in rep.entries]
    gaps = gap_report(rep, thresholds)
    for e in gaps.entries:
        print(f"h={e.h:.5f}: log λ_ess⁺={e.log_lambda_ess_pos:.3f}, 计数 {e.count}, 余量 "
              + ", ".join(f"{m:.3f}" for m in e.margins))
    assert gaps.nondecreasing
    assert gaps.entries[-1].count >= 1
    margins = [e.margins[0] for e in gaps.entries]
    assert all(b >= a for a, b in zip(margins, margins[1:]))


def test_assumption_gate():
    field, report, bih, disk = setup("zero")
    try:
        compute_effective(field, report, bih, disk, [0.1], progress=False)
    except AssumptionError as e:
        print(f"✓ 预期异常: {e}")
    else:
        raise AssertionError("κ ≡ 0 时未拒绝计算有效谱")


# ============= 共轭恒等式 =============

def test_intertwining_straight():
    field = setup("zero")[0]
    s = np.array([-0.5, 0.0, 0.7])
    t = np.array([0.1, -0.2, 0.3])
    res = intertwining_residual(field, lambda z: np.ones_like(z), 0.5, s, t, eps=1e-4)
    print(f"直条带残差 = {res:.2e}")
    assert res < 1e-6


def test_intertwining_order():
    field = setup()[0]
    s = np.array([-0.5, 0.0, 0.7])
    t = np.array([0.1, -0.2, 0.3])
    for v in (lambda z: np.ones_like(z), lambda z: z, lambda z: z * z + 1):
        res = [intertwining_residual(field, v, 0.5, s, t, eps) for eps in (4e-3, 2e-3, 1e-3)]
        orders = [math.log2(res[i] / res[i + 1]) for i in range(2)]
        print("残差: " + ", ".join(f"{r:.3e}" for r in res) + "; 阶: " + ", ".join(f"{o:.2f}" for o in orders))
        assert min(orders) >= 1.8
    base = intertwining_residual(field, lambda z: z, 0.5, s, t, 1e-3)
    scaled = intertwining_residual(field, lambda z: 3j * z, 0.5, s, t, 1e-3)
    assert abs(scaled - base) <= 1e-10 * base


def test_intertwining_boundary():
    field = setup()[0]
    try:
        intertwining_residual(field, lambda z: z, 0.5, np.array([0.0]), np.array([0.99]), eps=1e-2)
    except GeometryError as e:
        print(f"✓ 预期异常: {e}")
    else:
        raise AssertionError("越出区域的差分模板未被拒绝")


def main():
    run_checks("有效谱测试", [
        ("Bargmann 各向同性", test_bargmann_isotropic),
        ("Bargmann 闭式", test_bargmann_closed_form),
        ("d_B 一致性", test_d_B_consistency),
        ("Bargmann 异常", test_bargmann_guards),
        ("d_H（直条带）", test_d_H_straight),
        ("d_H（曲条带）", test_d_H_bump),
        ("d_H 关于 M 单调", test_d_H_monotone_in_M),
        ("d_H 伸缩", test_d_H_scaling),
        ("基函数分支", test_basis_branch),
        ("Hardy–Taylor 投影", test_taylor_projection),
        ("比值恒等式", test_ratio_identity),
        ("有效特征值 h 阶梯", test_effective_ladder),
        ("谱隙计数", test_gap_count),
        ("假设门槛", test_assumption_gate),
        ("共轭恒等式（直条带）", test_intertwining_straight),
        ("共轭恒等式收敛阶", test_intertwining_order),
        ("差分模板越界", test_intertwining_boundary),
    ])


if __name__ == "__main__":
    main()
