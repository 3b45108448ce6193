#!/usr/bin/env python3
"""
曲线几何测试脚本
验证基曲线构造、标架、直线延拓与管状映射
"""
import numpy as np
from scipy.integrate import quad

from check_runner import run_checks
from curve_geometry import CurvatureProfile, build_curve, cutoff, sample_frame, tubular_map
from errors import GeometryError

BUMP = CurvatureProfile(kind="gaussian_bump", amplitude=0.5, width=1.0, support=3.0)
ZERO = CurvatureProfile(kind="zero", support=3.0)


def test_profile_support():
    """κ 在 |s| ≥ L₀ 处恒为零，截断函数连续可微"""
    s = np.linspace(3.0, 8.0, 200)
    for prof in (BUMP, CurvatureProfile(kind="polynomial", amplitude=0.7, support=3.0)):
        assert np.all(prof.kappa(s) == 0.0)
        assert np.all(prof.kappa(-s) == 0.0)
        assert np.all(prof.kappa_prime(s) == 0.0)
    assert cutoff(0.3) == 1.0 and cutoff(1.0) == 0.0

    # κ' 与 κ 的中心差分一致
    x = np.linspace(-2.9, 2.9, 301)
    eps = 1e-5
    fd = (BUMP.kappa(x + eps) - BUMP.kappa(x - eps)) / (2 * eps)
    assert np.max(np.abs(fd - BUMP.kappa_prime(x))) < 1e-7


def test_profile_symmetry():
    """偶性由剖面采样判定；偏心凸包不是偶函数"""
    for prof in (BUMP, ZERO, CurvatureProfile(kind="polynomial", amplitude=0.7, support=3.0)):
        assert prof.is_even()

    shifted = CurvatureProfile(kind="gaussian_bump", amplitude=0.5, width=1.0, support=3.0, offset=0.8)
    assert not shifted.is_even()
    # 峰值位于截断函数恒为 1 的区域内
    print(f"偏心凸包 max|κ| = {shifted.max_abs():.12f}")
    assert abs(shifted.max_abs() - 0.5) < 1e-10
    x = np.linspace(-2.9, 2.9, 301)
    eps = 1e-5
    fd = (shifted.kappa(x + eps) - shifted.kappa(x - eps)) / (2 * eps)
    assert np.max(np.abs(fd - shifted.kappa_prime(x))) < 1e-7

    try:
        CurvatureProfile(kind="gaussian_bump", support=3.0, offset=3.5)
    except ValueError as e:
        print(f"✓ 预期异常: {type(e).__name__}")
    else:
        raise AssertionError("支撑外的凸包中心未被拒绝")


def test_straight_curve():
    """κ ≡ 0 → γ(s) = (s, 0), n(s) = (0, 1)"""
    curve = build_curve(ZERO)
    s = np.linspace(-10, 10, 101)
    assert np.allclose(curve.gamma(s), np.stack([s, 0 * s], axis=-1), atol=1e-14)
    assert np.allclose(curve.normal(s), [[0.0, 1.0]] * len(s), atol=1e-15)


def test_unit_speed_and_frame():
    curve = build_curve(BUMP, tol=1e-12)
    s = np.linspace(-6, 6, 241)
    eps = 1e-4
    speed = np.linalg.norm((curve.gamma(s + eps) - curve.gamma(s - eps)) / (2 * eps), axis=-1)
    print(f"max||γ'|−1| = {np.max(np.abs(speed - 1)):.2e}")
    assert np.max(np.abs(speed - 1.0)) < 1e-6

    dot, norm_dev = sample_frame(curve, s)
    assert dot < 1e-12 and norm_dev < 1e-12
    tan, nor = curve.tangent(s), curve.normal(s)
    det = tan[:, 0] * nor[:, 1] - tan[:, 1] * nor[:, 0]
    assert np.allclose(det, 1.0, atol=1e-12)


def test_total_turning():
    """θ(+∞) − θ(−∞) = ∫κ ds（独立自适应求积）"""
    curve = build_curve(BUMP, tol=1e-12)
    turning = float(curve.theta(50.0) - curve.theta(-50.0))
    ref, _ = quad(lambda s: float(BUMP.kappa(s)), -3.0, 3.0, points=[0.0], limit=500,
                  epsabs=1e-14, epsrel=1e-13)
    print(f"转角 = {turning:.12f}, 求积 = {ref:.12f}")
    assert abs(turning - ref) < 1e-9


def test_reconstruction():
    """二阶差分 γ'' 以 O(ε²) 逼近 κ·n"""
    curve = build_curve(BUMP, tol=1e-12)
    s = np.linspace(-2.5, 2.5, 51)
    target = BUMP.kappa(s)[:, None] * curve.normal(s)
    errors = []
    for eps in (0.1, 0.05):
        dd = (curve.gamma(s + eps) - 2 * curve.gamma(s) + curve.gamma(s - eps)) / eps ** 2
        errors.append(float(np.max(np.abs(dd - target))))
    print(f"误差: {errors}")
    assert errors[1] < errors[0]
    assert errors[1] < 5e-3


def test_straight_tails():
    """|s| > L₀ 时 γ 恰在直线延拓上"""
    curve = build_curve(BUMP)
    for sign in (1.0, -1.0):
        s = sign * np.linspace(3.0, 40.0, 50)
        base = curve.gamma(np.array(sign * 3.0))
        tan = curve.tangent(np.array(sign * 3.0))
        d = curve.gamma(s) - base
        cross = d[:, 0] * tan[1] - d[:, 1] * tan[0]
        assert np.max(np.abs(cross)) < 1e-12
        assert np.allclose(np.sum(d * tan, axis=-1), s - sign * 3.0, atol=1e-12)


def test_tubular_straight():
    """κ ≡ 0, δ = 1 → Θ(s,t) = (s,t), m ≡ 1"""
    tmap = tubular_map(build_curve(ZERO), 1.0)
    S, T = np.meshgrid(np.linspace(-5, 5, 21), np.linspace(-1, 1, 9), indexing="ij")
    pts = tmap.theta_map(S, T)
    assert np.allclose(pts[..., 0], S, atol=1e-14)
    assert np.allclose(pts[..., 1], T, atol=1e-14)
    assert np.all(tmap.metric(S, T) == 1.0)


def test_tubular_rejects_vanishing_metric():
    """max|κ| = 2, δ = 0.6 → 拒绝"""
    prof = CurvatureProfile(kind="gaussian_bump", amplitude=2.0, width=1.0, support=3.0)
    try:
        tubular_map(build_curve(prof), 0.6)
    except GeometryError as e:
        print(f"✓ 预期异常: {e}")
    else:
        raise AssertionError("δ·max|κ| ≥ 1 未被拒绝")


def test_min_metric():
    """min m = 1 − δ·max|κ|（网格最小化）"""
    delta = 0.3
    tmap = tubular_map(build_curve(BUMP), delta)
    S, T = np.meshgrid(np.linspace(-4, 4, 801), np.linspace(-delta, delta, 31), indexing="ij")
    grid_min = float(np.min(tmap.metric(S, T)))
    assert abs(grid_min - (1 - delta * 0.5)) < 1e-12
    assert not tmap.non_injectivity_risk


def test_inverse_map():
    tmap = tubular_map(build_curve(BUMP), 0.3)
    rng = np.random.default_rng(7)
    s = rng.uniform(-6, 6, 200)
    t = rng.uniform(-0.29, 0.29, 200)
    p = tmap.theta_map(s, t)
    s2, t2 = tmap.inverse(p[:, 0], p[:, 1])
    assert np.max(np.abs(s2 - s)) < 1e-10
    assert np.max(np.abs(t2 - t)) < 1e-10
    try:
        q = tmap.theta_map(np.array(0.0), np.array(0.0)) + 0.6 * tmap.curve.normal(np.array(0.0))
        tmap.inverse(np.array([q[0]]), np.array([q[1]]))
    except GeometryError:
        pass
    else:
        raise AssertionError("条带外的点未被拒绝")


def test_self_intersection():
    """曲线绕圈使管状区域重叠 → 报告自交"""
    prof = CurvatureProfile(kind="polynomial", amplitude=1.5, support=6.0)
    try:
        tubular_map(build_curve(prof), 0.6)
    except GeometryError as e:
        print(f"✓ 预期异常: {e}")
    else:
        raise AssertionError("自交未被检测")


def main():
    run_checks("曲线几何测试", [
        ("曲率剖面支撑", test_profile_support),
        ("剖面偶性", test_profile_symmetry),
        ("直线基曲线", test_straight_curve),
        ("单位速度与标架", test_unit_speed_and_frame),
        ("总转角", test_total_turning),
        ("曲率重构", test_reconstruction),
        ("直线延拓", test_straight_tails),
        ("直条带管状映射", test_tubular_straight),
        ("度量因子非正", test_tubular_rejects_vanishing_metric),
        ("最小度量因子", test_min_metric),
        ("逆映射", test_inverse_map),
        ("自交检测", test_self_intersection),
    ])


if __name__ == "__main__":
    main()
