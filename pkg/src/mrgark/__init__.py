"""Implicit multirate GARK time integrators, stability analysis, and benchmarks."""

from .tableau import (
    CouplingFamily,
    GarkTableau,
    MrGarkScheme,
    RkTableau,
    SchemeKind,
    assemble,
    assemble_compound_fast,
    assemble_standard,
    internal_consistency_residual,
)
from .methods import CATALOG, coupling_entry, make_method, single_rate_scheme
from .order import OrderReport, check_base_order, check_cf_coupling, check_gark_coupling

__all__ = [
    "CATALOG",
    "CouplingFamily",
    "GarkTableau",
    "MrGarkScheme",
    "OrderReport",
    "RkTableau",
    "SchemeKind",
    "assemble",
    "assemble_compound_fast",
    "assemble_standard",
    "check_base_order",
    "check_cf_coupling",
    "check_gark_coupling",
    "coupling_entry",
    "internal_consistency_residual",
    "make_method",
    "single_rate_scheme",
]

__version__ = "0.1.0"
