"""Sparse singular-vector fine-tuning: Python bindings for the C++ core."""

from ._core import (
    Adapter,
    BudgetError,
    ChecksumError,
    Error,
    FormatError,
    banded_count,
    load_adapter,
    numerical_rank,
    param_count,
    pattern,
    save_adapter,
    solve_expressivity,
    svd,
    train,
    verify,
)

__all__ = [
    "Adapter",
    "BudgetError",
    "ChecksumError",
    "Error",
    "FormatError",
    "banded_count",
    "load_adapter",
    "numerical_rank",
    "param_count",
    "pattern",
    "save_adapter",
    "solve_expressivity",
    "svd",
    "train",
    "verify",
]
