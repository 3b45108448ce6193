#!/usr/bin/env python3
"""
纤维 Dirac 算子测试脚本
验证 ν₁ 闭式、二次型 ℓ₁^±、两种 μ₁ 求法、纤维特征值、色散曲线、阈值与核投影
"""
import math

import numpy as np
from scipy.integrate import quad

from check_runner import run_checks
from fibered_dirac import (FiberForm, FiberSpec, coercivity_bound, dirac_fiber_eigs, dispersion_sweep,
                           kernel_projector_residual, log_nu1, mu1_via_rho, mu1_via_root, nu1,
                           quad_form_ground, threshold_neg, threshold_pos, threshold_report)

XI_LATTICE = (0.0, 0.5, 1.0, 1.5, 2.0)
H_LATTICE = (0.2, 0.1, 0.05)


def test_nu1_closed_form():
    h = 0.05
    value = nu1(0.0, h)
    print(f"ν₁(0, 0.05) = {value:.6e}")
    assert abs(value - 5.20e-10) / 5.20e-10 < 1e-3

    # 分母用独立的自适应求积
    den, _ = quad(lambda t: math.exp(-t * t / h), -1.0, 1.0, epsabs=0.0, epsrel=1e-13)
    ref = h * 2.0 * math.exp(-1.0 / h) / den
    assert abs(value - ref) / ref < 1e-10

    for xi in (0.3, 1.0, 2.5):
        assert abs(log_nu1(xi, 0.1) - log_nu1(-xi, 0.1)) < 1e-14

    xs = np.linspace(0.0, 3.0, 61)
    vals = np.array([log_nu1(x, 0.1) for x in xs])
    assert np.all(np.diff(vals) > 0)

    # 远离区间时仍有限
    assert math.isfinite(log_nu1(6.0, 0.02))


def test_quad_form_ground():
    """ℓ₁^±(0) = 0，λ ↦ ℓ₁^± 凹，λ ≫ μ₁ 时为负"""
    xi, h = 0.5, 0.1
    for sign in (1, -1):
        mu = mu1_via_root(xi, h, sign)
        ell0 = quad_form_ground(0.0, xi, h, sign)
        print(f"sign={sign:+d}: μ₁ = {mu:.10f}, ℓ₁(0) = {ell0:.2e}")
        assert abs(ell0) < 1e-8

        lams = np.linspace(0.0, 2.0 * mu, 5)
        ells = np.array([quad_form_ground(lam, xi, h, sign) for lam in lams])
        second = ells[:-2] - 2 * ells[1:-1] + ells[2:]
        assert np.all(second <= 1e-9 * np.max(np.abs(ells)))

        assert quad_form_ground(3.0 * mu, xi, h, sign) < 0
    try:
        quad_form_ground(-0.1, xi, h, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("负 λ 未被拒绝")


def test_root_vs_rho():
    """两种非线性极小极大求法给出同一常数"""
    worst = 0.0
    for h in H_LATTICE:
        for xi in XI_LATTICE:
            for sign in (1, -1):
                a = mu1_via_root(xi, h, sign, N=96)
                b = mu1_via_rho(xi, h, sign, N=96)
                worst = max(worst, abs(a - b) / a)
    print(f"max 相对差 = {worst:.2e}")
    assert worst <= 1e-5


def test_inequality_chain():
    """λ|μ₁ − λ| ≤ |ℓ₁(λ)|"""
    xi, h = 0.5, 0.1
    for sign in (1, -1):
        form = FiberForm(xi, h, 1.0, sign)
        mu = mu1_via_root(xi, h, sign, form=form)
        for lam in np.linspace(0.1, 3.0, 7) * mu:
            assert lam * abs(mu - lam) <= abs(form.ground(lam)) * (1 + 1e-8) + 1e-14


def test_upper_and_coercivity_bounds():
    for h in (0.2, 0.05):
        for xi in (0.0, 0.4, 0.9):
            assert mu1_via_root(xi, h, 1) <= nu1(xi, h) * (1 + 1e-12)
        for xi in (1.5, 2.0, 3.0):
            mu = mu1_via_root(xi, h, 1)
            print(f"h={h}, ξ={xi}: μ₁⁺ = {mu:.6f} ≥ {coercivity_bound(xi, h):.6f}")
            assert mu >= coercivity_bound(xi, h) - 1e-10
        assert mu1_via_root(2.0, h, 1) >= 1 - h


def test_rho_functional():
    """高斯试探函数给出 ρ⁺ = ν₁，ρ 零次齐次"""
    form = FiberForm(0.3, 0.05, 1.0, 1)
    rho = form.rho(form.trial_vector())
    ref = nu1(0.3, 0.05)
    assert abs(rho - ref) / ref < 1e-10

    rng = np.random.default_rng(11)
    for sign in (1, -1):
        form = FiberForm(1.2, 0.1, 1.0, sign, N=64)
        c = rng.standard_normal(form.dim)
        r = form.rho(c)
        assert abs(form.rho(-2.5 * c) - r) <= 1e-13 * r
        assert r >= mu1_via_root(1.2, 0.1, sign, N=64) * (1 - 1e-12)


def test_fiber_eigs_vs_root():
    for xi in (0.0, 0.8, 1.5):
        pos, neg = dirac_fiber_eigs(FiberSpec(h=0.2, xi=xi), K=4)
        assert np.all(pos > 0) and np.all(neg > 0)
        assert np.all(np.diff(pos) >= 0) and np.all(np.diff(neg) >= 0)
        rp = mu1_via_root(xi, 0.2, 1)
        rn = mu1_via_root(xi, 0.2, -1)
        print(f"ξ={xi}: μ₁⁺ {pos[0]:.12f} / {rp:.12f}, μ₁⁻ {neg[0]:.12f} / {rn:.12f}")
        assert abs(pos[0] - rp) / rp < 1e-6
        assert abs(neg[0] - rn) / rn < 1e-6


def test_tiny_eigenvalue():
    """h = 0.05, ξ = 0：μ₁⁺ ≈ ν₁ ~ 5e−10 仍被正确分离"""
    pos, neg = dirac_fiber_eigs(FiberSpec(h=0.05, xi=0.0), K=2)
    print(f"μ₁⁺ = {pos[0]:.6e}, μ₁⁻ = {neg[0]:.6f}")
    assert 0 < pos[0] <= nu1(0.0, 0.05) * (1 + 1e-12)
    assert pos[0] > 0.9 * nu1(0.0, 0.05)
    assert neg[0] > 0.1


def test_evenness_and_conjugation():
    for h, xi in ((0.1, 0.7), (0.2, 1.9)):
        p1, n1 = dirac_fiber_eigs(FiberSpec(h=h, xi=xi), K=4)
        p2, n2 = dirac_fiber_eigs(FiberSpec(h=h, xi=-xi), K=4)
        assert np.max(np.abs(p1 - p2)) < 1e-10
        assert np.max(np.abs(n1 - n2)) < 1e-10

        # 场反向：spec(𝒟_{ξ,+}) = −spec(𝒟_{−ξ,−})
        pc, nc = dirac_fiber_eigs(FiberSpec(h=h, xi=-xi, field_sign=-1), K=4)
        assert np.max(np.abs(pc - n1)) < 1e-10
        assert np.max(np.abs(nc - p1)) < 1e-10

    p, _ = dirac_fiber_eigs(FiberSpec(h=0.05, xi=0.0), K=1)
    _, nc = dirac_fiber_eigs(FiberSpec(h=0.05, xi=0.0, field_sign=-1), K=1)
    assert nc[0] == p[0]


def test_grid_convergence():
    for xi in (0.5, 1.7):
        p64, n64 = dirac_fiber_eigs(FiberSpec(h=0.2, xi=xi, N=64), K=4)
        p128, n128 = dirac_fiber_eigs(FiberSpec(h=0.2, xi=xi, N=128), K=4)
        diff = max(np.max(np.abs(p64 - p128)), np.max(np.abs(n64 - n128)))
        print(f"ξ={xi}: N 加倍的变化 = {diff:.2e}")
        assert diff < 1e-8


def test_fd_cross_check():
    """有限元二阶收敛到谱方法结果"""
    h = 0.2
    ref_neg = dirac_fiber_eigs(FiberSpec(h=h, xi=0.0), K=1)[1][0]
    ref_pos = dirac_fiber_eigs(FiberSpec(h=h, xi=1.5), K=1)[0][0]
    errs = []
    for n in (250, 500):
        neg = dirac_fiber_eigs(FiberSpec(h=h, xi=0.0, N=n, discretization="fd"), K=1)[1][0]
        pos = dirac_fiber_eigs(FiberSpec(h=h, xi=1.5, N=n, discretization="fd"), K=1)[0][0]
        errs.append((abs(neg - ref_neg), abs(pos - ref_pos)))
    print(f"有限元误差: {errs}")
    for k in range(2):
        assert errs[0][k] < 1e-3 and errs[1][k] < 1e-3
        assert errs[0][k] / errs[1][k] > 3.0

    # 场反向同样适用
    p, n = dirac_fiber_eigs(FiberSpec(h=h, xi=0.6, N=250, discretization="fd"), K=2)
    pc, nc = dirac_fiber_eigs(FiberSpec(h=h, xi=-0.6, N=250, discretization="fd", field_sign=-1), K=2)
    assert np.allclose(p, nc, rtol=1e-10) and np.allclose(n, pc, rtol=1e-10)


def test_dispersion_sweep():
    h = 0.2
    curve = dispersion_sweep(h, K=2, resolution=21, N=64, workers=1, progress=False)
    assert curve.to_table().shape == (21, 5)
    assert curve.header() == ["xi", "mu1_neg", "mu2_neg", "mu1_pos", "mu2_pos"]
    assert np.all(curve.pos > 0) and np.all(curve.neg > 0)
    assert np.all(np.diff(curve.pos, axis=1) >= 0) and np.all(np.diff(curve.neg, axis=1) >= 0)
    print(f"偶对称偏差 = {curve.evenness_defect():.2e}")
    assert curve.evenness_defect() < 1e-10

    mid = len(curve.xi) // 2
    assert int(np.argmin(curve.pos[:, 0])) == mid
    i_neg = int(np.argmin(curve.neg[:, 0]))
    assert i_neg != mid
    assert abs(curve.xi[i_neg]) <= 1.0 + 3 * math.sqrt(h)

    # 并行结果按 ξ 顺序收集
    small = dispersion_sweep(h, K=1, resolution=5, N=48, workers=1, progress=False)
    para = dispersion_sweep(h, K=1, resolution=5, N=48, workers=2, progress=False)
    assert np.allclose(small.pos, para.pos, rtol=1e-12) and np.allclose(small.neg, para.neg, rtol=1e-12)


def test_threshold_pos():
    ratios = []
    for h in (0.3, 0.2, 0.1, 0.05):
        lam, x_star = threshold_pos(h, N=96)
        r = lam / nu1(0.0, h)
        ratios.append(r)
        print(f"h={h}: λ_ess⁺ = {lam:.6e}, ξ* = {x_star:.2e}, λ_ess⁺/ν₁(0) = {r:.10f}")
        assert 0 < r <= 1 + 1e-9
        assert abs(x_star) <= 1e-4
    assert all(b >= a - 1e-9 for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] >= 0.9


def test_threshold_neg_seeds():
    """a₀ 种子点只改变扫描网格，不改变极小值"""
    h = 0.1
    lam, x_star = threshold_neg(h, N=48)
    seeded, x_seeded = threshold_neg(h, a0=0.6, N=48)
    print(f"λ_ess⁻ = {lam:.12e} (ξ* = {x_star:.6f}), 种子 {seeded:.12e} (ξ* = {x_seeded:.6f})")
    assert lam > 0 and 0 < x_star < 1.0 + 2 * math.sqrt(h) + 2
    assert abs(seeded - lam) <= 1e-8 * lam

    # 窗口外的种子被忽略
    outside, x_outside = threshold_neg(h, a0=100.0, N=48)
    assert outside == lam and x_outside == x_star

    rep = threshold_report(h, N=48)
    assert rep.a0 is None and rep.ratio_neg_a0 is None
    assert abs(rep.lambda_ess_neg - lam) <= 1e-12 * lam
    assert abs(rep.ratio_neg_sqrt_h - lam / math.sqrt(h)) <= 1e-12
    assert 0 < rep.ratio_pos <= 1 + 1e-9


def test_kernel_projector():
    scaled = []
    for h in H_LATTICE:
        rep = kernel_projector_residual(0.0, h, N=96)
        print(f"h={h}: ‖ψ−Πψ‖_H¹ = {rep.residual_h1:.3e}, 缩放 = {rep.scaled_residual:.3e}")
        assert rep.projection_norm <= 1 + 1e-12
        assert rep.orthogonality <= 1e-12
        assert math.isfinite(rep.scaled_residual)
        scaled.append(rep.scaled_residual)
    assert max(scaled) <= 2 * scaled[0] + 1e-300

    try:
        kernel_projector_residual(1.5, 0.1)
    except ValueError as e:
        print(f"✓ 预期异常: {e}")
    else:
        raise AssertionError("Ξ_h 之外的 ξ 未被拒绝")


def main():
    run_checks("纤维 Dirac 算子测试", [
        ("ν₁ 闭式", test_nu1_closed_form),
        ("二次型最低特征值", test_quad_form_ground),
        ("求根与 ρ 极小一致", test_root_vs_rho),
        ("不等式链", test_inequality_chain),
        ("上界与强制性", test_upper_and_coercivity_bounds),
        ("ρ 泛函", test_rho_functional),
        ("纤维特征值与求根一致", test_fiber_eigs_vs_root),
        ("微小特征值", test_tiny_eigenvalue),
        ("偶性与电荷共轭", test_evenness_and_conjugation),
        ("网格收敛", test_grid_convergence),
        ("有限元交叉验证", test_fd_cross_check),
        ("色散曲线", test_dispersion_sweep),
        ("正阈值", test_threshold_pos),
        ("负阈值与种子点", test_threshold_neg_seeds),
        ("核投影", test_kernel_projector),
    ])


if __name__ == "__main__":
    main()
