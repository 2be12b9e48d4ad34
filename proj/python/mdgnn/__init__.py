"""Multi-relational dynamic GNN for stock movement prediction."""

from ._core import (
    daily_ic,
    dataset_summary,
    default_config,
    derive_seed,
    generate_dataset,
    run_backtest,
    run_checks,
)

__all__ = [
    "daily_ic",
    "dataset_summary",
    "default_config",
    "derive_seed",
    "generate_dataset",
    "run_backtest",
    "run_checks",
]
