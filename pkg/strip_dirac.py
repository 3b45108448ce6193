#!/usr/bin/env python3
"""
曲条带磁 Dirac 算子的批处理命令行工具
读取 JSON 实验配置，调度各计算模块，输出 CSV/JSON 结果与 SVG 图

CSV 列说明:
  dispersion: xi, mu1_neg..muK_neg（负支，以正值存储）, mu1_pos..muK_pos
  potential:  s, t, phi（管状坐标网格）
  conformal:  s, t, alpha, beta（f = α + iβ）
  effective:  h, log_lambda_k, log_asymptote_k, ratio_k（k = 1..k_max，自然对数）
"""
import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from conformal_map import build_biholomorphism, disk_derivative
from curve_geometry import build_curve, tubular_map
from effective_spectrum import EffectiveSpectrumReport, compute_effective, gap_report
from errors import AssumptionError, ConfigError, StripDiracError
from experiment_config import (CommandRecord, ExperimentConfig, RunManifest, env_log_level,
                               load_config, new_manifest)
from fibered_dirac import default_workers, dispersion_sweep, threshold_report
from magnetic_potential import (boundary_normal_derivative, locate_minimum, solve_phi,
                                truncation_sensitivity)
from reference_models import curvature_bound_state, halfline_a0

logger = logging.getLogger("strip_dirac")

matplotlib.rcParams["svg.hashsalt"] = "strip-dirac"

COMMANDS = ("dispersion", "thresholds", "a0", "potential", "conformal", "effective", "report")


# ============= 输出 =============

def write_json(path: Path, payload: dict) -> Path:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2, sort_keys=True)
    return path


def write_csv(path: Path, header: List[str], table: np.ndarray) -> Path:
    np.savetxt(path, table, delimiter=",", header=",".join(header), comments="", fmt="%.15e")
    return path


def save_svg(fig: Figure, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    return path


class Runner:
    def __init__(self, config: ExperimentConfig, out_dir: Path, h_override: Optional[float] = None):
        """
        一次运行的上下文：配置、输出目录、运行清单与中间结果缓存

        Args:
            config: 已校验的实验配置
            out_dir: 输出目录
            h_override: dispersion 命令的 h（--h）
        """
        self.config = config
        self.out_dir = out_dir
        self.h_override = h_override
        self.workers = default_workers()
        self.manifest: RunManifest = new_manifest(config, self.workers)
        self._cache: Dict[str, object] = {}
        out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, suffix: str) -> Path:
        return self.out_dir / f"{self.config.name}_{suffix}"

    # ----- 共享中间结果 -----

    def tmap(self):
        if "tmap" not in self._cache:
            cfg = self.config
            self._cache["tmap"] = tubular_map(build_curve(cfg.curvature), cfg.delta)
        return self._cache["tmap"]

    def field(self):
        if "field" not in self._cache:
            cfg = self.config
            self._cache["field"] = solve_phi(self.tmap(), cfg.truncation.L, cfg.grid.N_s, cfg.grid.N_t,
                                             cfg.tolerance.solver)
        return self._cache["field"]

    def minimum(self):
        if "minimum" not in self._cache:
            report = locate_minimum(self.field())
            self._cache["minimum"] = report
            if not report.assumption_ok:
                self.manifest.add_warnings([f"最小值假设未通过: {', '.join(report.failed_flags())}"])
        return self._cache["minimum"]

    def biholomorphism(self):
        if "bih" not in self._cache:
            cfg = self.config
            self._cache["bih"] = build_biholomorphism(self.tmap(), cfg.truncation.L, cfg.grid.N_s, cfg.grid.N_t,
                                                      cfg.tolerance.solver, cfg.tolerance.loop)
        return self._cache["bih"]

    def a0(self):
        if "a0" not in self._cache:
            self._cache["a0"] = halfline_a0(T=self.config.truncation.T_halfline)
        return self._cache["a0"]

    def thresholds(self, hs: List[float]):
        cfg = self.config
        a0 = self.a0().a0
        key = "thresholds"
        cache = self._cache.setdefault(key, {})
        for h in hs:
            if h not in cache:
                cache[h] = threshold_report(h, cfg.delta, a0, cfg.grid.N_fiber)
        return [cache[h] for h in hs]

    # ----- 各命令 -----

    def cmd_dispersion(self) -> Tuple[List[Path], dict]:
        cfg = self.config
        opts = cfg.dispersion
        h = self.h_override if self.h_override is not None else opts.h
        curve = dispersion_sweep(h, cfg.delta, opts.window, opts.K, cfg.grid.resolution, cfg.grid.N_fiber,
                                 opts.discretization, workers=self.workers)
        thr = threshold_report(h, cfg.delta, N=cfg.grid.N_fiber)
        csv_path = write_csv(self.path(f"dispersion_h{h:g}.csv"), curve.header(), curve.to_table())

        fig = Figure(figsize=(8, 6))
        ax = fig.subplots()
        for k in range(curve.K):
            ax.plot(curve.xi, curve.pos[:, k], color="tab:blue", linewidth=1.0)
            ax.plot(curve.xi, -curve.neg[:, k], color="tab:red", linewidth=1.0)
        ax.axhspan(-thr.lambda_ess_neg, thr.lambda_ess_pos, color="0.85", zorder=0,
                   label=f"谱隙 (−{thr.lambda_ess_neg:.3g}, {thr.lambda_ess_pos:.3g})")
        W = float(np.max(np.abs(curve.xi)))
        ax.set_xlim(-W, W)
        ax.set_xlabel("ξ")
        ax.set_ylabel("μ")
        ax.set_title(f"色散曲线 h={h:g}, δ={cfg.delta:g}")
        ax.legend(loc="upper right")
        ax.grid(True, alpha=0.3)
        svg_path = save_svg(fig, self.path(f"dispersion_h{h:g}.svg"))

        defect = curve.evenness_defect()
        print(f"  支数: 每个符号 {curve.K}，ξ 点数 {len(curve.xi)}")
        print(f"  偶性偏差: {defect:.2e}")
        print(f"  谱隙: (−{thr.lambda_ess_neg:.6e}, {thr.lambda_ess_pos:.6e})")
        return [csv_path, svg_path], {"h": h, "evenness_defect": defect,
                                      "lambda_ess_pos": thr.lambda_ess_pos, "lambda_ess_neg": thr.lambda_ess_neg}

    def cmd_a0(self) -> Tuple[List[Path], dict]:
        report = self.a0()
        print(f"  a₀ = {report.a0:.12f}, ξ̂ = {report.xi_min:.10f}, 尾部质量 = {report.tail_mass:.2e}")
        payload = report.model_dump()
        return [write_json(self.path("a0.json"), payload)], payload

    def cmd_thresholds(self) -> Tuple[List[Path], dict]:
        cfg = self.config
        a0 = self.a0()
        reports = self.thresholds(cfg.h)
        for r in reports:
            print(f"  h={r.h:g}: λ_ess⁺={r.lambda_ess_pos:.6e} (比值 {r.ratio_pos:.6f}), "
                  f"λ_ess⁻/√h={r.ratio_neg_sqrt_h:.6f}")
        payload = {
            "delta": cfg.delta,
            "a0": a0.a0,
            "log_scale": False,
            "log_fields": ["log_nu1_0", "log_asymptote_pos"],
            "thresholds": [r.model_dump() for r in reports],
        }
        return [write_json(self.path("thresholds.json"), payload)], payload

    def cmd_potential(self) -> Tuple[List[Path], dict]:
        cfg = self.config
        field = self.field()
        report = self.minimum()
        normal = boundary_normal_derivative(field)
        trunc = truncation_sensitivity(field, cfg.tolerance.truncation)
        bound = curvature_bound_state(cfg.curvature, cfg.delta, T=cfg.truncation.T_bound_state)
        if not trunc.ok:
            self.manifest.add_warnings([f"截断敏感性: |Δφ_min| = {trunc.change:.3e}"])
        self.manifest.add_warnings(bound.warnings)

        status = "✓" if report.assumption_ok else "⚠"
        print(f"  {status} φ_min = {report.phi_min:.10f} @ (s,t) = ({report.s_min:.6f}, {report.t_min:.6f})")
        print(f"  Hessian 特征值×2: a = {report.a:.6f}, b = {report.b:.6f}")
        print(f"  min ∂_Nφ = {normal.min_value:.6f}, 截断变化 {trunc.change:.2e}")
        payload = {
            "residual": field.residual,
            "minimum": report.model_dump(),
            "boundary_normal_derivative": normal.model_dump(),
            "truncation": trunc.model_dump(),
            "curvature_bound_state": bound.model_dump(),
        }
        csv_path = write_csv(self.path("potential.csv"), ["s", "t", "phi"], field.as_table())
        return [write_json(self.path("potential.json"), payload), csv_path], payload

    def cmd_conformal(self) -> Tuple[List[Path], dict]:
        bih = self.biholomorphism()
        report = self.minimum()
        disk = disk_derivative(bih, report.s_min, report.t_min)
        conformal = bih.report(disk)
        if not disk.koebe_ok:
            self.manifest.add_warnings([f"Koebe 界未通过: |g'(0)| = {disk.g_prime_abs:.6g}"])
        print(f"  |g'(0)| = {disk.g_prime_abs:.10f}, dist(z_min, ∂Ω) = {disk.dist_boundary:.6f}")
        print(f"  CR 残差 {conformal.cr_residual:.2e}, 环路残差 {conformal.loop_residual:.2e}")
        payload = {"report": conformal.model_dump(), "disk": disk.model_dump()}
        csv_path = write_csv(self.path("conformal.csv"), ["s", "t", "alpha", "beta"], bih.field_table())
        return [write_json(self.path("conformal.json"), payload), csv_path], payload

    def effective_ladder(self) -> List[float]:
        """有效谱的 h 阶梯；h_scale 为 plateau_gap 时乘以 Δ"""
        cfg = self.config
        hs = cfg.effective_h
        if cfg.effective.h_scale == "absolute":
            return list(hs)
        gap = -0.5 * cfg.delta ** 2 - self.minimum().phi_min
        if gap <= 0:
            raise AssumptionError(f"Δ = −δ²/2 − φ_min = {gap:.3e} 非正，无法换算 h 阶梯")
        ladder = [c * gap for c in hs]
        logger.info("h 阶梯以 Δ=%.6g 为单位: %s", gap, ", ".join(f"{h:.6g}" for h in ladder))
        return ladder

    def _effective_report(self) -> EffectiveSpectrumReport:
        if "effective" not in self._cache:
            cfg = self.config
            report = self.minimum()
            report.require_assumption()
            bih = self.biholomorphism()
            disk = disk_derivative(bih, report.s_min, report.t_min)
            self._cache["effective"] = compute_effective(
                self.field(), report, bih, disk, self.effective_ladder(), cfg.effective.k_max,
                cfg.grid.M_hardy, cfg.tolerance.convergence)
        return self._cache["effective"]

    def cmd_effective(self) -> Tuple[List[Path], dict]:
        cfg = self.config
        eff = self._effective_report()
        self.manifest.add_warnings(eff.warnings)
        gaps = gap_report(eff, self.thresholds([e.h for e in eff.entries]))
        k_max = eff.k_max

        header = (["h"] + [f"log_lambda_{k}" for k in range(1, k_max + 1)]
                  + [f"log_asymptote_{k}" for k in range(1, k_max + 1)]
                  + [f"ratio_{k}" for k in range(1, k_max + 1)])
        table = np.array([[e.h] + e.log_lambda + e.log_asymptote + e.ratio for e in eff.entries])
        csv_path = write_csv(self.path("effective.csv"), header, table)

        fig = Figure(figsize=(7, 5))
        ax = fig.subplots()
        hs = [e.h for e in eff.entries]
        for k in range(k_max):
            ax.plot(hs, [e.ratio[k] for e in eff.entries], "o-", label=f"r_{k + 1}(h)")
        ax.axhline(1.0, color="k", linestyle="--", linewidth=0.8)
        ax.set_xscale("log")
        ax.set_xlabel("h")
        ax.set_ylabel("λ_k^eff / 渐近式")
        ax.set_title("有效特征值比值趋势")
        ax.legend()
        ax.grid(True, alpha=0.3)
        svg_path = save_svg(fig, self.path("effective_ratio.svg"))

        for e, g in zip(eff.entries, gaps.entries):
            ratios = ", ".join(f"{r:.4f}" for r in e.ratio)
            print(f"  h={e.h:g}: 比值 [{ratios}], 谱隙内 {g.count} 个")
        if not gaps.nondecreasing:
            self.manifest.add_warnings(["谱隙计数随 h 减小而减少"])
        payload = {
            "log_scale": True,
            "log_base": "e",
            "effective": eff.model_dump(),
            "gap": gaps.model_dump(),
        }
        return [write_json(self.path("effective.json"), payload), csv_path, svg_path], payload

    def cmd_report(self) -> Tuple[List[Path], dict]:
        sections = {}
        files = []
        for name, fn in (("potential", self.cmd_potential), ("conformal", self.cmd_conformal),
                         ("thresholds", self.cmd_thresholds), ("effective", self.cmd_effective)):
            print(f"\n[{name}]")
            paths, payload = fn()
            files.extend(paths)
            sections[name] = payload
        bundle = {"config": self.config.model_dump(mode="json"), "config_hash": self.manifest.config_hash,
                  "warnings": list(self.manifest.warnings), **sections}
        files.insert(0, write_json(self.path("report.json"), bundle))
        return files, bundle

    def run(self, command: str) -> int:
        handler: Callable[[], Tuple[List[Path], dict]] = getattr(self, f"cmd_{command}")
        print("=" * 80)
        print(f"命令: {command}  配置: {self.config.name}  哈希: {self.manifest.config_hash[:12]}")
        print("=" * 80)
        start = time.time()
        code = 0
        try:
            paths, _ = handler()
            record = CommandRecord(command=command, wall_time=time.time() - start, outputs=[str(p) for p in paths])
            for p in paths:
                print(f"  ✓ 已保存到: {p}")
        except StripDiracError as e:
            code = e.exit_code
            logger.debug("命令 %s 失败", command, exc_info=True)
            record = CommandRecord(command=command, status="failed", wall_time=time.time() - start, error=str(e))
            print(f"  ✗ {type(e).__name__}: {e}")
        self.manifest.commands.append(record)
        manifest_path = self.path("manifest.json")
        self.manifest.save(manifest_path)
        for w in self.manifest.warnings:
            print(f"  ⚠ {w}")
        print("=" * 80)
        print(f"运行清单: {manifest_path}  退出码: {code}")
        print("=" * 80)
        return code


def setup_logging(verbose: int) -> None:
    if verbose >= 2:
        level = "DEBUG"
    elif verbose == 1:
        level = "INFO"
    else:
        level = env_log_level() or "WARNING"
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s - %(levelname)s - %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="曲条带磁 Dirac 算子谱计算工具",
                                     epilog="CSV 列说明:" + __doc__.split("CSV 列说明:")[1],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="日志详细程度（-v INFO，-vv DEBUG）")
    subparsers = parser.add_subparsers(dest="command", help="子命令")

    helps = {
        "dispersion": "色散曲线 μ_k^±(ξ,h)（CSV + SVG）",
        "thresholds": "本质谱阈值 λ_ess^±(h) 与渐近比值（JSON）",
        "a0": "半直线常数 a₀（JSON）",
        "potential": "磁势 φ、最小值与截断敏感性（JSON + CSV）",
        "conformal": "共形映射 f 与 |g'(0)|（JSON + CSV）",
        "effective": "有效特征值与渐近比值、谱隙计数（JSON + CSV + SVG）",
        "report": "potential、conformal、thresholds、effective 汇总为一个 JSON",
    }
    for name in COMMANDS:
        sub = subparsers.add_parser(name, help=helps[name])
        sub.add_argument("--config", required=True, help="JSON 实验配置文件")
        sub.add_argument("--out", help="输出目录（覆盖配置中的 output_dir）")
        if name == "dispersion":
            sub.add_argument("--h", type=float, help="覆盖配置中的 dispersion.h")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 1
    setup_logging(args.verbose)

    try:
        config = load_config(args.config)
        h = getattr(args, "h", None)
        if h is not None and h <= 0:
            raise ConfigError(f"--h 必须为正: {h}")
    except StripDiracError as e:
        print(f"✗ {type(e).__name__}: {e}")
        return e.exit_code

    out_dir = Path(args.out or config.output_dir)
    return Runner(config, out_dir, h).run(args.command)


if __name__ == "__main__":
    sys.exit(main())
