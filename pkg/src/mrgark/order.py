"""Order-condition verification for base methods, coupling families, and
assembled GARK tableaux.

All checks report signed residuals; a condition counts as satisfied when the
absolute residual is below the tolerance (default 1e-11).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StructureError
from .tableau import GarkTableau, MrGarkScheme, SchemeKind, internal_consistency_residual

DEFAULT_TOL = 1e-11


@dataclass(frozen=True)
class OrderReport:
    """Residual of a single order condition."""

    condition_id: str
    order: int
    residual: float
    satisfied: bool

    @classmethod
    def build(cls, condition_id, order, residual, tol):
        return cls(condition_id, order, float(residual), abs(residual) <= tol)


def check_base_order(t, p: int, tol: float = DEFAULT_TOL) -> list[OrderReport]:
    """Classical Runge-Kutta order conditions through order ``p`` (max 4)."""
    if p not in (1, 2, 3, 4):
        raise ValueError(f"order must be in 1..4, got {p}")
    A, b, c = t.A, t.b, t.c
    conds = [("base-b1", 1, b.sum() - 1.0)]
    if p >= 2:
        conds.append(("base-bTc", 2, b @ c - 1.0 / 2.0))
    if p >= 3:
        conds.append(("base-bTc2", 3, b @ c**2 - 1.0 / 3.0))
        conds.append(("base-bTAc", 3, b @ A @ c - 1.0 / 6.0))
    if p >= 4:
        conds.append(("base-bTc3", 4, b @ c**3 - 1.0 / 4.0))
        conds.append(("base-bcTAc", 4, (b * c) @ A @ c - 1.0 / 8.0))
        conds.append(("base-bTAc2", 4, b @ A @ c**2 - 1.0 / 12.0))
        conds.append(("base-bTAAc", 4, b @ A @ A @ c - 1.0 / 24.0))
    return [OrderReport.build(cid, k, r, tol) for cid, k, r in conds]


def check_cf_coupling(scheme: MrGarkScheme, M: int, p: int,
                      tol: float = DEFAULT_TOL) -> list[OrderReport]:
    """Compound-fast coupling conditions through order ``p``.

    Internal consistency holds order-independently; the remaining sums over
    micro-steps give one order-3 and four order-4 conditions.
    """
    if scheme.kind is not SchemeKind.COMPOUND_FAST:
        raise ValueError(f"{scheme.name} is not compound-fast")
    if p not in (1, 2, 3, 4):
        raise ValueError(f"order must be in 1..4, got {p}")
    scheme.coupling.check(M)
    base = scheme.fast_base
    A, b, c = base.A, base.b, base.c
    blocks = [scheme.coupling.fs(lam, M) for lam in range(1, M + 1)]

    ic = max(
        np.max(np.abs(M * blk @ np.ones(base.s) - (lam - 1.0) - c))
        for lam, blk in zip(range(1, M + 1), blocks)
    )
    out = [OrderReport.build("CS-OC-a", 1, ic, tol)]
    if p >= 3:
        r_b = sum(b @ blk @ c for blk in blocks) - M / 6.0
        out.append(OrderReport.build("CS-OC-b", 3, r_b, tol))
    if p >= 4:
        r_c = (
            sum((lam - 1.0) * (b @ blk @ c) for lam, blk in zip(range(1, M + 1), blocks))
            + sum((b * c) @ blk @ c for blk in blocks)
            - M**2 / 8.0
        )
        r_d = sum(b @ blk @ c**2 for blk in blocks) - M / 12.0
        r_e = (
            sum(b @ A @ blk @ c for blk in blocks)
            + sum((M - lam) * (b @ blk @ c) for lam, blk in zip(range(1, M + 1), blocks))
            - M**2 / 24.0
        )
        r_f = sum(b @ blk @ A @ c for blk in blocks) - M / 24.0
        out += [
            OrderReport.build("CS-OC-c", 4, r_c, tol),
            OrderReport.build("CS-OC-d", 4, r_d, tol),
            OrderReport.build("CS-OC-e", 4, r_e, tol),
            OrderReport.build("CS-OC-f", 4, r_f, tol),
        ]
    return out


#: GARK coupling conditions for internally consistent methods, as
#: (label, order, rhs, evaluator) with cf = Aff 1 and cs = Ass 1
_GARK_CONDITIONS = (
    ("GARK-3a", 3, 1 / 6, lambda g, cf, cs: g.bf @ g.Afs @ cs),
    ("GARK-3b", 3, 1 / 6, lambda g, cf, cs: g.bs @ g.Asf @ cf),
    ("GARK-4a", 4, 1 / 8, lambda g, cf, cs: (g.bf * cf) @ g.Afs @ cs),
    ("GARK-4b", 4, 1 / 8, lambda g, cf, cs: (g.bs * cs) @ g.Asf @ cf),
    ("GARK-4c", 4, 1 / 12, lambda g, cf, cs: g.bf @ g.Afs @ cs**2),
    ("GARK-4d", 4, 1 / 12, lambda g, cf, cs: g.bs @ g.Asf @ cf**2),
    ("GARK-4e", 4, 1 / 24, lambda g, cf, cs: g.bf @ g.Aff @ g.Afs @ cs),
    ("GARK-4f", 4, 1 / 24, lambda g, cf, cs: g.bf @ g.Afs @ g.Asf @ cf),
    ("GARK-4g", 4, 1 / 24, lambda g, cf, cs: g.bf @ g.Afs @ g.Ass @ cs),
    ("GARK-4h", 4, 1 / 24, lambda g, cf, cs: g.bs @ g.Ass @ g.Asf @ cf),
    ("GARK-4i", 4, 1 / 24, lambda g, cf, cs: g.bs @ g.Asf @ g.Afs @ cs),
    ("GARK-4j", 4, 1 / 24, lambda g, cf, cs: g.bs @ g.Asf @ g.Aff @ cf),
)


def check_gark_coupling(g: GarkTableau, p: int, tol: float = DEFAULT_TOL,
                        consistency_tol: float = 1e-10) -> list[OrderReport]:
    """Coupling conditions of an assembled tableau through order ``p``.

    Valid only for internally consistent tableaux; refuses otherwise since
    the conditions assume shared stage abscissae.
    """
    if p not in (1, 2, 3, 4):
        raise ValueError(f"order must be in 1..4, got {p}")
    rf, rs = internal_consistency_residual(g)
    if max(rf, rs) > consistency_tol:
        raise StructureError(
            "tableau is internally inconsistent "
            f"(residuals {rf:.3e}, {rs:.3e}); coupling conditions do not apply"
        )
    cf, cs = g.cf, g.cs
    return [
        OrderReport.build(cid, k, fn(g, cf, cs) - rhs, tol)
        for cid, k, rhs, fn in _GARK_CONDITIONS
        if k <= p
    ]
