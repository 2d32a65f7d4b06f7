"""Hierarchical reasoning model for Sudoku.

Grids are strings in row-major order: '.' (or '0') for a blank, then
'1'..'9' and 'A'.. for digits. The box size is inferred from the length.
"""

from ._core import (
    GridError,
    IoError,
    Model,
    NonFiniteError,
    ShapeError,
    Transform,
    default_experiment,
    energy,
    evaluate,
    generate_dataset,
    is_valid_complete,
    mix_dataset,
    run_pipeline,
    solve_count,
    train,
)

__all__ = [
    "GridError",
    "IoError",
    "Model",
    "NonFiniteError",
    "ShapeError",
    "Transform",
    "default_experiment",
    "energy",
    "evaluate",
    "generate_dataset",
    "is_valid_complete",
    "mix_dataset",
    "run_pipeline",
    "solve_count",
    "train",
]
__version__ = "0.1.0"
