#!/usr/bin/env python3
"""
共形映射测试脚本
验证直条带上的恒等映射、β 的极值原理、近恒等估计、离散 Cauchy–Riemann 残差的收敛阶、圆盘映射导数
"""
import math
from functools import lru_cache

import numpy as np

from check_runner import run_checks
from conformal_map import LOOP_TOL, build_biholomorphism, disk_derivative, disk_map, harmonic_conjugate, solve_beta
from curve_geometry import CurvatureProfile, build_curve, tubular_map
from errors import GeometryError, SolverError

BUMP = CurvatureProfile(kind="gaussian_bump", amplitude=1.0, width=1.0, support=3.0)
SHARP = CurvatureProfile(kind="gaussian_bump", amplitude=0.85, width=0.7, support=2.0)


@lru_cache(maxsize=None)
def straight(delta=1.0):
    tmap = tubular_map(build_curve(CurvatureProfile(kind="zero", support=2.0)), delta)
    return build_biholomorphism(tmap)


@lru_cache(maxsize=None)
def bump(delta=0.5, N_t=21):
    tmap = tubular_map(build_curve(BUMP), delta)
    return build_biholomorphism(tmap, N_t=N_t)


def test_straight_identity():
    bih = straight()
    S, T = np.meshgrid(bih.s, bih.t, indexing="ij")
    err = np.max(np.abs(bih.alpha - S)) + np.max(np.abs(bih.beta - T))
    print(f"max|f − id| = {err:.2e}")
    assert err < 1e-10
    assert bih.identity_deviation() < 1e-10
    w = np.array([0.3 + 0.2j, -1.1 - 0.7j])
    assert np.max(np.abs(bih(w) - w)) < 1e-10
    assert np.max(np.abs(bih.inverse(w) - w)) < 1e-10


def test_max_principle():
    for delta in (0.1, 0.5):
        bih = bump(delta)
        assert np.all(np.abs(bih.beta) <= delta * (1 + 1e-12))
        assert np.allclose(bih.beta[:, 0], -delta) and np.allclose(bih.beta[:, -1], delta)


def test_near_identity_scaling():
    """‖β̃ − t‖_∞ 与 ‖f̃ − id‖_{C¹} 随 δ 线性有界"""
    ratios, beta_ratios = [], []
    for delta in (0.05, 0.1, 0.2):
        bih = bump(delta)
        ratios.append(bih.identity_deviation() / delta)
        beta_ratios.append(bih.beta_deviation() / delta)
    print("‖f̃ − id‖_{C¹}/δ: " + ", ".join(f"{r:.4f}" for r in ratios))
    print("‖β̃ − t‖_∞/δ: " + ", ".join(f"{r:.2e}" for r in beta_ratios))
    assert max(ratios) <= 2 * min(ratios)
    assert max(ratios) <= 3 * BUMP.max_abs()
    assert beta_ratios[0] <= 1.5 * beta_ratios[-1]


def test_cr_convergence():
    res = [bump(0.5, n).cr_residual() for n in (11, 21, 41)]
    orders = [math.log2(res[i] / res[i + 1]) for i in range(2)]
    print("CR 残差: " + ", ".join(f"{r:.3e}" for r in res) + "; 阶: " + ", ".join(f"{o:.2f}" for o in orders))
    assert orders[-1] >= 1.7
    assert bump(0.5, 41).loop_residual < bump(0.5, 11).loop_residual


def test_loop_residual_refinement():
    """急弯（内侧 m 约 0.15）：内部环路残差随步长下降，且不超过 LOOP_TOL·步长"""
    tmap = tubular_map(build_curve(SHARP), 1.0)
    loops = []
    for n in (21, 41):
        bih = build_biholomorphism(tmap, N_t=n)
        step = bih.t[1] - bih.t[0]
        loops.append(bih.loop_residual)
        print(f"N_t={n}: 环路残差 {bih.loop_residual:.3e}, 与步长之比 {bih.loop_residual / step:.3f}")
        assert bih.loop_residual <= LOOP_TOL * step
    assert loops[1] < loops[0]


def test_loop_detects_non_harmonic():
    tmap = tubular_map(build_curve(SHARP), 1.0)
    _, s, t, beta, _ = solve_beta(tmap, N_t=21)
    S, T = np.meshgrid(s, t, indexing="ij")
    bent = beta + 3.0 * (1.0 - T ** 2) * np.exp(-S ** 2)
    try:
        harmonic_conjugate(tmap, s, t, bent)
    except SolverError as e:
        print(f"✓ 预期异常: {e}")
    else:
        raise AssertionError("非调和的 β 未被检测")
    alpha, loop = harmonic_conjugate(tmap, s, t, beta)
    assert abs(alpha[np.argmin(np.abs(s)), np.argmin(np.abs(t))]) < 1e-14


def test_inverse_roundtrip():
    bih = bump(0.5)
    s = np.array([-1.0, 0.0, 0.4, 2.5])
    t = np.array([0.2, -0.3, 0.45, 0.0])
    w = bih.f_st(s, t)
    s2, t2 = bih.inverse_st(w)
    assert np.max(np.abs(s2 - s)) < 1e-10 and np.max(np.abs(t2 - t)) < 1e-10
    assert np.min(np.abs(bih.fprime_st(s, t))) > 0


def test_distance_comparison():
    bih = bump(0.5)
    for s0, t0 in ((0.0, 0.0), (0.3, 0.2), (-1.0, -0.35), (1.5, 0.4)):
        d_omega, bound = bih.distance_check(s0, t0)
        assert d_omega <= bound * (1 + 1e-3)


def test_disk_derivative_straight():
    bih = straight()
    data = disk_derivative(bih, 0.0, 0.0)
    print(f"|g'(0)| = {data.g_prime_abs:.12f}, 4/π = {4 / math.pi:.12f}")
    assert abs(data.g_prime_abs - 4 / math.pi) < 1e-8
    assert data.koebe_ok and data.window_ok

    eps = 1e-5
    fd = (disk_map(bih, data, eps) - disk_map(bih, data, -eps)) / (2 * eps)
    assert abs(abs(fd) - data.g_prime_abs) < 1e-6

    rotated = disk_derivative(bih, 0.0, 0.0, rotation=1.3)
    assert abs(rotated.g_prime_abs - data.g_prime_abs) < 1e-14


def test_disk_derivative_bump():
    bih = bump(0.5, 41)
    data = disk_derivative(bih, 0.0, 0.05)
    chain = data.strip_factor * data.artanh_factor * data.mobius_factor * data.inverse_factor
    assert abs(chain - data.g_prime_abs) < 1e-12 * data.g_prime_abs
    assert data.koebe_ok
    assert abs(data.fprime_grad_abs - 1.0 / data.inverse_factor) < 1e-4

    eps = 1e-4
    fd = (disk_map(bih, data, eps) - disk_map(bih, data, -eps)) / (2 * eps)
    print(f"|g'(0)| = {data.g_prime_abs:.8f}, 差分 = {abs(fd):.8f}")
    assert abs(abs(fd) - data.g_prime_abs) < 1e-4 * data.g_prime_abs
    assert abs(disk_map(bih, data, 0.0) - bih.tmap.to_complex(np.array(0.0), np.array(0.05))) < 1e-6


def test_disk_boundary_guard():
    bih = straight()
    try:
        disk_derivative(bih, 0.0, 1.0)
    except GeometryError as e:
        print(f"✓ 预期异常: {e}")
    else:
        raise AssertionError("边界上的 z_min 未被拒绝")


def main():
    run_checks("共形映射测试", [
        ("直条带恒等映射", test_straight_identity),
        ("极值原理", test_max_principle),
        ("近恒等估计", test_near_identity_scaling),
        ("CR 残差收敛阶", test_cr_convergence),
        ("环路残差收敛", test_loop_residual_refinement),
        ("环路残差检测", test_loop_detects_non_harmonic),
        ("逆映射", test_inverse_roundtrip),
        ("距离比较", test_distance_comparison),
        ("圆盘导数（直条带）", test_disk_derivative_straight),
        ("圆盘导数（曲条带）", test_disk_derivative_bump),
        ("边界附近的 z_min", test_disk_boundary_guard),
    ])


if __name__ == "__main__":
    main()
