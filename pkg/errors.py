"""
异常定义模块
所有计算模块共用的异常类型，CLI 根据类型映射退出码
"""


class StripDiracError(Exception):
    """所有库内异常的基类"""
    exit_code = 1


class GeometryError(StripDiracError, ValueError):
    """几何不合法：m(s,t) 可能为零、管状映射自交、点不在区域内"""
    exit_code = 3


class SolverError(StripDiracError, RuntimeError):
    """数值求解失败：特征值/线性求解、求根区间耗尽、优化停滞、残差或求积不收敛"""
    exit_code = 2


class AssumptionError(StripDiracError):
    """磁势最小值不满足假设（退化、不唯一或位于边界）"""
    exit_code = 4


class ConfigError(StripDiracError, ValueError):
    """实验配置不合法"""
    exit_code = 3
