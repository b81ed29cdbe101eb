"""Moreau-enhanced sparse and robust estimation."""

from ._core import (
    ConvexityError,
    NumericalError,
    Problem,
    Seed,
    __version__,
    box_support,
    hoyer_sparseness,
    ista,
    l1,
    make_classify,
    make_lad_ridge,
    make_mc,
    make_orr,
    make_pmc,
    make_sorr,
    make_spcp,
    nuclear,
    primal_dual,
    prox_grad,
    run_experiment,
    soft_threshold,
    system_mismatch,
)

__all__ = [
    "ConvexityError",
    "NumericalError",
    "Problem",
    "Seed",
    "__version__",
    "box_support",
    "hoyer_sparseness",
    "ista",
    "l1",
    "make_classify",
    "make_lad_ridge",
    "make_mc",
    "make_orr",
    "make_pmc",
    "make_sorr",
    "make_spcp",
    "nuclear",
    "primal_dual",
    "prox_grad",
    "run_experiment",
    "soft_threshold",
    "system_mismatch",
]
