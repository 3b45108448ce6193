"""
实验配置
JSON 实验配置的 pydantic 模型、运行清单 RunManifest、进程级环境变量
"""
import hashlib
import json
import logging
import os
import platform
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from curve_geometry import CurvatureProfile
from errors import ConfigError

logger = logging.getLogger(__name__)

__version__ = "0.1.0"


# ============= 环境变量 =============

def env_log_level() -> Optional[str]:
    """STRIP_DIRAC_LOG_LEVEL，未设置时返回 None"""
    level = os.getenv("STRIP_DIRAC_LOG_LEVEL")
    return level.upper() if level else None


def _check_h_list(v: List[float]) -> List[float]:
    if not v:
        raise ValueError("h 列表不能为空")
    if any(x <= 0 for x in v):
        raise ValueError(f"h 必须为正: {v}")
    if any(b >= a for a, b in zip(v, v[1:])):
        raise ValueError(f"h 列表必须严格递减: {v}")
    return v


# ============= 数据模型 =============

class GridConfig(BaseModel):
    N_s: Optional[int] = Field(default=None, description="管状网格 s 方向点数（默认使步长与 t 方向一致）")
    N_t: int = Field(default=41, description="管状网格 t 方向点数（奇数）")
    N_fiber: int = Field(default=128, description="纤维问题每个分量的基函数个数")
    M_hardy: int = Field(default=12, description="Hardy 基的截断阶数 M")
    resolution: int = Field(default=201, description="色散曲线的 ξ 点数（奇数）")

    @field_validator("N_t", "resolution")
    @classmethod
    def _odd(cls, v: int) -> int:
        if v < 5 or v % 2 == 0:
            raise ValueError(f"必须为 ≥ 5 的奇数: {v}")
        return v

    @field_validator("N_s")
    @classmethod
    def _odd_or_none(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and (v < 5 or v % 2 == 0):
            raise ValueError(f"N_s 必须为 ≥ 5 的奇数: {v}")
        return v

    @field_validator("N_fiber")
    @classmethod
    def _fiber_size(cls, v: int) -> int:
        if v < 16:
            raise ValueError(f"N_fiber 必须 ≥ 16: {v}")
        return v


class TruncationConfig(BaseModel):
    L: Optional[float] = Field(default=None, gt=0, description="s 方向截断半长（默认 L₀ + 6δ）")
    T_halfline: float = Field(default=12.0, gt=0, description="半直线模型的截断长度")
    T_bound_state: float = Field(default=100.0, gt=0, description="曲率束缚态的最小截断长度")


class ToleranceConfig(BaseModel):
    solver: float = Field(default=1e-8, gt=0, description="Poisson/Laplace 求解的残差容差")
    loop: float = Field(default=5.0, gt=0, description="调和共轭环路残差密度与网格步长之比的上限")
    truncation: float = Field(default=1e-8, gt=0, description="截断敏感性 |Δφ_min| 的警告阈值")
    convergence: float = Field(default=1e-6, gt=0, description="M 与 M+4 之间的相对变化容差")


class DispersionOptions(BaseModel):
    h: float = Field(default=0.05, gt=0, description="色散曲线的 h")
    K: int = Field(default=4, description="每个符号的支数")
    window: Optional[float] = Field(default=None, gt=0, description="ξ 半窗口（默认 δ + 2√h + 2）")
    discretization: Literal["spectral", "fd"] = Field(default="spectral", description="纤维离散方式")

    @field_validator("K")
    @classmethod
    def _positive_k(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"K 必须 ≥ 1: {v}")
        return v


class EffectiveOptions(BaseModel):
    k_max: int = Field(default=2, ge=1, description="计算的有效特征值个数")
    h: Optional[List[float]] = Field(default=None, description="有效谱的 h 阶梯（默认使用顶层 h）")
    h_scale: Literal["absolute", "plateau_gap"] = Field(
        default="absolute", description="h 的单位：绝对值，或以 Δ = −δ²/2 − φ_min 为单位（运行时换算）")

    @field_validator("h")
    @classmethod
    def _descending(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        return v if v is None else _check_h_list(v)


class ExperimentConfig(BaseModel):
    """一次实验的全部参数"""
    name: str = Field(default="experiment", description="实验名称，用作输出文件前缀")
    delta: float = Field(default=1.0, gt=0, description="条带半宽 δ")
    h: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05], description="h 阶梯（严格递减）")
    curvature: CurvatureProfile = Field(default_factory=CurvatureProfile)
    grid: GridConfig = Field(default_factory=GridConfig)
    truncation: TruncationConfig = Field(default_factory=TruncationConfig)
    tolerance: ToleranceConfig = Field(default_factory=ToleranceConfig)
    dispersion: DispersionOptions = Field(default_factory=DispersionOptions)
    effective: EffectiveOptions = Field(default_factory=EffectiveOptions)
    output_dir: str = Field(default="results", description="输出目录")

    @field_validator("h")
    @classmethod
    def _descending(cls, v: List[float]) -> List[float]:
        return _check_h_list(v)

    @model_validator(mode="after")
    def _consistency(self) -> "ExperimentConfig":
        if self.grid.M_hardy < self.effective.k_max + 8:
            raise ValueError(f"M_hardy={self.grid.M_hardy} 必须 ≥ k_max + 8 = {self.effective.k_max + 8}")
        if self.delta * self.curvature.max_abs() >= 1:
            raise ValueError(f"δ·max|κ| = {self.delta * self.curvature.max_abs():.4g} ≥ 1")
        return self

    @property
    def effective_h(self) -> List[float]:
        return self.effective.h if self.effective.h is not None else self.h

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    def config_hash(self) -> str:
        """规范化 JSON（键排序）的 SHA-256"""
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def load_config(path: str) -> ExperimentConfig:
    """
    读取并校验实验配置

    Raises:
        ConfigError: 文件不存在、JSON 解析失败或校验失败
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"配置文件不存在: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        config = ExperimentConfig.model_validate(data)
        logger.info("已加载配置 %s: %s", config.name, path)
        return config
    except json.JSONDecodeError as e:
        raise ConfigError(f"配置文件 JSON 解析失败: {path}: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"配置校验失败: {path}:\n{e}") from e


# ============= 运行清单 =============

class CommandRecord(BaseModel):
    command: str
    status: Literal["ok", "failed"] = "ok"
    wall_time: float = Field(..., description="墙钟时间（秒）")
    outputs: List[str] = Field(default_factory=list, description="写出的文件")
    error: Optional[str] = None


class RunManifest(BaseModel):
    config_name: str
    config_hash: str = Field(..., description="规范化配置 JSON 的 SHA-256")
    versions: Dict[str, str] = Field(default_factory=dict, description="Python 与依赖包版本")
    workers: int = 1
    commands: List[CommandRecord] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list, description="假设标志、收敛标志等软性问题")

    def add_warnings(self, items: List[str]) -> None:
        for w in items:
            if w not in self.warnings:
                self.warnings.append(w)

    def save(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.model_dump_json(indent=2))


def module_versions() -> Dict[str, str]:
    versions = {"strip_dirac": __version__, "python": platform.python_version()}
    for pkg in ("numpy", "scipy", "pydantic", "tqdm", "matplotlib"):
        try:
            versions[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            versions[pkg] = "未安装"
    return versions


def new_manifest(config: ExperimentConfig, workers: int) -> RunManifest:
    return RunManifest(config_name=config.name, config_hash=config.config_hash(),
                       versions=module_versions(), workers=workers)
