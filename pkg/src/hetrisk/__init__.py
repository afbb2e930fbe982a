"""Nested industry factor risk models with heterotic cluster weights."""

from .backtest import BacktestConfig, BacktestReport, Holdings, optimize, optimize_bounded, run_backtest
from .errors import HetRiskError
from .facmodel import FactorModel, build_general, build_general_alt, invert_factor_model
from .nested import NestedBuildOptions, NestedModel, build_nested
from .panel import IndustryHierarchy, PricePanel, ReturnsPanel

__all__ = [
    "BacktestConfig", "BacktestReport", "FactorModel", "HetRiskError", "Holdings",
    "IndustryHierarchy", "NestedBuildOptions", "NestedModel", "PricePanel", "ReturnsPanel",
    "build_general", "build_general_alt", "build_nested", "invert_factor_model", "optimize",
    "optimize_bounded", "run_backtest",
]

__version__ = "0.1.0"
