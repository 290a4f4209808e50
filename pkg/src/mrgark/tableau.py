"""Runge-Kutta base tableaux, multirate coupling families, and GARK assembly.

A two-partition GARK method is described by four coefficient blocks
(fast-fast, fast-slow, slow-fast, slow-slow) plus a weight vector per
partition.  Multirate schemes are stored compactly as a base method (or a
pair of base methods) together with a coupling family that produces the
per-micro-step coupling blocks as functions of the micro-step index and
the multirate ratio; the full block tableau for a fixed ratio is only
materialized on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import ConstraintError

#: tolerance for structural invariants of coefficient data (roundoff only)
STRUCT_TOL = 1e-13


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class RkTableau:
    """A single Runge-Kutta method (A, b, c) with optional embedded weights."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    b_hat: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "A", _frozen(self.A))
        object.__setattr__(self, "b", _frozen(self.b))
        object.__setattr__(self, "c", _frozen(self.c))
        if self.b_hat is not None:
            object.__setattr__(self, "b_hat", _frozen(self.b_hat))
        s = self.b.size
        if self.A.shape != (s, s) or self.c.shape != (s,):
            raise ValueError("inconsistent tableau dimensions")
        if abs(self.b.sum() - 1.0) > STRUCT_TOL:
            raise ValueError(f"weights of {self.name or 'tableau'} do not sum to 1")
        if np.max(np.abs(self.A.sum(axis=1) - self.c)) > STRUCT_TOL:
            raise ValueError(f"abscissae of {self.name or 'tableau'} are not row sums")

    @property
    def s(self) -> int:
        return self.b.size

    def is_dirk(self) -> bool:
        """True when the stage matrix is lower triangular."""
        return bool(np.all(np.triu(self.A, 1) == 0.0))


@dataclass(frozen=True, eq=False)
class CouplingFamily:
    """Generator of the coupling blocks for every micro-step index.

    ``fs(lam, M)`` returns the block that feeds slow stage values into the
    fast stages of micro-step ``lam``; ``sf(lam, M)`` the reverse direction.
    ``sf`` is ``None`` for compound-fast schemes where the slow-to-fast
    feedback is fixed by the compound step.  ``m_constraint`` is one of
    ``"any"``, ``"odd"`` (hard requirement), ``"even-preferred"`` (odd
    ratios are admissible but lose an accuracy benefit), or
    ``"single-rate"`` (M = 1 embeddings only).
    """

    fs: Callable[[int, int], np.ndarray]
    sf: Optional[Callable[[int, int], np.ndarray]] = None
    m_constraint: str = "any"

    def admissible(self, M: int) -> bool:
        if M < 1:
            return False
        if self.m_constraint == "odd":
            return M % 2 == 1
        if self.m_constraint == "single-rate":
            return M == 1
        return True

    def preferred(self, M: int) -> bool:
        """False when M is admissible but loses a documented accuracy benefit."""
        if self.m_constraint == "even-preferred":
            return M % 2 == 0
        return self.admissible(M)

    def check(self, M: int) -> None:
        if M < 1:
            raise ConstraintError(f"multirate ratio must be >= 1, got {M}")
        if not self.admissible(M):
            raise ConstraintError(
                f"multirate ratio {M} violates '{self.m_constraint}' constraint"
            )


class SchemeKind(Enum):
    STANDARD = "standard"
    COMPOUND_FAST = "compound-fast"


@dataclass(frozen=True, eq=False)
class MrGarkScheme:
    """A multirate GARK scheme: base method(s) plus a coupling family."""

    kind: SchemeKind
    fast_base: RkTableau
    slow_base: RkTableau
    coupling: CouplingFamily
    order: int
    internally_consistent: bool
    name: str
    not_recommended: bool = False

    def __post_init__(self):
        if self.kind is SchemeKind.COMPOUND_FAST and self.fast_base is not self.slow_base:
            raise ValueError("compound-fast schemes must be telescopic")
        if self.order not in (1, 2, 3, 4):
            raise ValueError(f"unsupported nominal order {self.order}")

    @property
    def telescopic(self) -> bool:
        return self.fast_base is self.slow_base


@dataclass(frozen=True, eq=False)
class GarkTableau:
    """Fully assembled two-partition GARK tableau for a fixed multirate ratio."""

    Aff: np.ndarray
    Afs: np.ndarray
    Asf: np.ndarray
    Ass: np.ndarray
    bf: np.ndarray
    bs: np.ndarray
    M: int = 1

    def __post_init__(self):
        for attr in ("Aff", "Afs", "Asf", "Ass", "bf", "bs"):
            object.__setattr__(self, attr, _frozen(getattr(self, attr)))
        nf, ns = self.bf.size, self.bs.size
        if self.Aff.shape != (nf, nf) or self.Afs.shape != (nf, ns):
            raise ValueError("fast block dimensions inconsistent")
        if self.Asf.shape != (ns, nf) or self.Ass.shape != (ns, ns):
            raise ValueError("slow block dimensions inconsistent")
        if abs(self.bf.sum() - 1.0) > STRUCT_TOL or abs(self.bs.sum() - 1.0) > STRUCT_TOL:
            raise ValueError("assembled weights do not sum to 1")

    @property
    def sf_total(self) -> int:
        return self.bf.size

    @property
    def ss_total(self) -> int:
        return self.bs.size

    @property
    def cf(self) -> np.ndarray:
        return self.Aff.sum(axis=1)

    @property
    def cs(self) -> np.ndarray:
        return self.Ass.sum(axis=1)

    def full_a(self) -> np.ndarray:
        return np.block([[self.Aff, self.Afs], [self.Asf, self.Ass]])

    def full_b(self) -> np.ndarray:
        return np.concatenate([self.bf, self.bs])


def assemble_standard(scheme: MrGarkScheme, M: int) -> GarkTableau:
    """Materialize the block tableau of a standard multirate scheme.

    The fast partition holds M copies of the fast base method scaled by 1/M,
    with completed-micro-step fill (1/M) 1 b^T below the block diagonal; the
    coupling blocks are stacked per micro-step.
    """
    if scheme.kind is not SchemeKind.STANDARD:
        raise ValueError(f"{scheme.name} is not a standard multirate scheme")
    scheme.coupling.check(M)

    fb, sb = scheme.fast_base, scheme.slow_base
    sf_, ss_ = fb.s, sb.s
    ones_bt = np.outer(np.ones(sf_), fb.b)

    Aff = np.zeros((M * sf_, M * sf_))
    for mu in range(M):
        r = slice(mu * sf_, (mu + 1) * sf_)
        Aff[r, r] = fb.A / M
        for nu in range(mu):
            Aff[r, nu * sf_:(nu + 1) * sf_] = ones_bt / M

    Afs = np.vstack([scheme.coupling.fs(lam, M) for lam in range(1, M + 1)])
    if Afs.shape != (M * sf_, ss_):
        raise ValueError("fast-slow coupling block has wrong shape")
    Asf = np.hstack([scheme.coupling.sf(lam, M) / M for lam in range(1, M + 1)])
    if Asf.shape != (ss_, M * sf_):
        raise ValueError("slow-fast coupling block has wrong shape")

    bf = np.tile(fb.b / M, M)
    return GarkTableau(Aff=Aff, Afs=Afs, Asf=Asf, Ass=sb.A, bf=bf, bs=sb.b, M=M)


def assemble_compound_fast(scheme: MrGarkScheme, M: int) -> GarkTableau:
    """Materialize the block tableau of a compound-fast multirate scheme.

    The fast partition contains the compound macro-stages followed by M
    micro-step copies of the base method; the compound block also forms the
    slow partition and the first rows of both coupling blocks.  The compound
    stages' fast weights are zero: their fast contribution is discarded and
    recomputed by the micro-steps.
    """
    if scheme.kind is not SchemeKind.COMPOUND_FAST:
        raise ValueError(f"{scheme.name} is not a compound-fast scheme")
    scheme.coupling.check(M)

    base = scheme.fast_base
    s = base.s
    n_fast = (M + 1) * s
    ones_bt = np.outer(np.ones(s), base.b)

    Aff = np.zeros((n_fast, n_fast))
    Aff[:s, :s] = base.A
    for lam in range(1, M + 1):
        r = slice(lam * s, (lam + 1) * s)
        Aff[r, lam * s:(lam + 1) * s] = base.A / M
        for k in range(1, lam):
            Aff[r, k * s:(k + 1) * s] = ones_bt / M

    Afs = np.vstack([base.A] + [scheme.coupling.fs(lam, M) for lam in range(1, M + 1)])
    Asf = np.zeros((s, n_fast))
    Asf[:, :s] = base.A

    bf = np.concatenate([np.zeros(s), np.tile(base.b / M, M)])
    return GarkTableau(Aff=Aff, Afs=Afs, Asf=Asf, Ass=base.A, bf=bf, bs=base.b, M=M)


def assemble(scheme: MrGarkScheme, M: int) -> GarkTableau:
    """Assemble a scheme of either kind."""
    if scheme.kind is SchemeKind.STANDARD:
        return assemble_standard(scheme, M)
    return assemble_compound_fast(scheme, M)


def internal_consistency_residual(g: GarkTableau) -> tuple[float, float]:
    """Max-norm residuals of the consistent-abscissae conditions.

    Returns ``(|Aff 1 - Afs 1|_inf, |Ass 1 - Asf 1|_inf)``; both are zero
    exactly when the fast and slow functions are evaluated at consistent
    times in every stage.
    """
    rf = np.max(np.abs(g.Aff.sum(axis=1) - g.Afs.sum(axis=1)))
    rs = np.max(np.abs(g.Ass.sum(axis=1) - g.Asf.sum(axis=1)))
    return float(rf), float(rs)
