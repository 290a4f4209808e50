"""Single-rate additive (IMEX) Runge-Kutta baselines.

These integrate a partitioned system with the fast part implicit and the
slow part explicit through the same :class:`~mrgark.integrate.PartitionedOde`
interface as the multirate schemes; they serve as reference competitors in
the benchmark harness, not as multirate methods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import CatalogError, ConvergenceError
from .integrate import IntegrationResult, PartitionedOde
from .methods import sdirk3_gamma
from .newton import FactorCache, NewtonConfig, StageSolveStats, _eval_jacobian, solve_dirk_stage


@dataclass(frozen=True, eq=False)
class ImexTableau:
    """Additive pair of tableaux sharing abscissae and weights."""

    a_impl: np.ndarray
    a_expl: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int
    name: str

    def __post_init__(self):
        for attr in ("a_impl", "a_expl", "b", "c"):
            object.__setattr__(self, attr, np.asarray(getattr(self, attr), dtype=float))
        s = self.b.size
        assert self.a_impl.shape == (s, s) and self.a_expl.shape == (s, s)
        assert abs(self.b.sum() - 1.0) < 1e-13

    @property
    def s(self) -> int:
        return self.b.size


@lru_cache(maxsize=None)
def ars232() -> ImexTableau:
    g = 1.0 - 1.0 / math.sqrt(2.0)
    d = -2.0 * math.sqrt(2.0) / 3.0
    return ImexTableau(
        a_impl=[[0.0, 0.0, 0.0], [0.0, g, 0.0], [0.0, 1.0 - g, g]],
        a_expl=[[0.0, 0.0, 0.0], [g, 0.0, 0.0], [d, 1.0 - d, 0.0]],
        b=[0.0, 1.0 - g, g],
        c=[0.0, g, 1.0],
        order=2,
        name="ARS232",
    )


@lru_cache(maxsize=None)
def ars343() -> ImexTableau:
    g = sdirk3_gamma()
    b1 = -1.5 * g * g + 4.0 * g - 0.25
    b2 = 1.5 * g * g - 5.0 * g + 1.25
    a31, a32 = 0.3212788860, 0.3966543747
    a41, a42, a43 = -0.105858296, 0.5529291479, 0.5529291479
    return ImexTableau(
        a_impl=[
            [0.0, 0.0, 0.0, 0.0],
            [0.0, g, 0.0, 0.0],
            [0.0, (1.0 - g) / 2.0, g, 0.0],
            [0.0, b1, b2, g],
        ],
        a_expl=[
            [0.0, 0.0, 0.0, 0.0],
            [g, 0.0, 0.0, 0.0],
            [a31, a32, 0.0, 0.0],
            [a41, a42, a43, 0.0],
        ],
        b=[0.0, b1, b2, g],
        c=[0.0, g, (1.0 + g) / 2.0, 1.0],
        order=3,
        name="ARS343",
    )


@lru_cache(maxsize=None)
def ark436l2sa() -> ImexTableau:
    a_expl = np.zeros((6, 6))
    a_expl[1, 0] = 1.0 / 2.0
    a_expl[2, :2] = [13861.0 / 62500.0, 6889.0 / 62500.0]
    a_expl[3, :3] = [
        -116923316275.0 / 2393684061468.0,
        -2731218467317.0 / 15368042101831.0,
        9408046702089.0 / 11113171139209.0,
    ]
    a_expl[4, :4] = [
        -451086348788.0 / 2902428689909.0,
        -2682348792572.0 / 7519795681897.0,
        12662868775082.0 / 11960479115383.0,
        3355817975965.0 / 11060851509271.0,
    ]
    a_expl[5, :5] = [
        647845179188.0 / 3216320057751.0,
        73281519250.0 / 8382639484533.0,
        552539513391.0 / 3454668386233.0,
        3354512671639.0 / 8306763924573.0,
        4040.0 / 17871.0,
    ]
    a_impl = np.zeros((6, 6))
    a_impl[1, :2] = [1.0 / 4.0, 1.0 / 4.0]
    a_impl[2, :3] = [8611.0 / 62500.0, -1743.0 / 31250.0, 1.0 / 4.0]
    a_impl[3, :4] = [5012029.0 / 34652500.0, -654441.0 / 2922500.0, 174375.0 / 388108.0, 1.0 / 4.0]
    a_impl[4, :5] = [
        15267082809.0 / 155376265600.0,
        -71443401.0 / 120774400.0,
        730878875.0 / 902184768.0,
        2285395.0 / 8070912.0,
        1.0 / 4.0,
    ]
    b = [82889.0 / 524892.0, 0.0, 15625.0 / 83664.0, 69875.0 / 102672.0, -2260.0 / 8211.0, 1.0 / 4.0]
    a_impl[5] = b
    return ImexTableau(
        a_impl=a_impl,
        a_expl=a_expl,
        b=b,
        c=[0.0, 1.0 / 2.0, 83.0 / 250.0, 31.0 / 50.0, 17.0 / 20.0, 1.0],
        order=4,
        name="ARK436L2SA",
    )


IMEX_CATALOG = {"ARS232": ars232, "ARS343": ars343, "ARK436L2SA": ark436l2sa}


def make_imex(name: str) -> ImexTableau:
    try:
        return IMEX_CATALOG[name]()
    except KeyError:
        raise CatalogError(
            f"unknown IMEX method {name!r}; available: {', '.join(IMEX_CATALOG)}"
        ) from None


def imex_step(
    tab: ImexTableau,
    ode: PartitionedOde,
    y_n: np.ndarray,
    H: float,
    cfg: NewtonConfig,
) -> tuple[np.ndarray, StageSolveStats]:
    """One additive step: fast part implicit (DIRK), slow part explicit."""
    stats = StageSolveStats()
    cache = FactorCache(stats)
    y_n = np.asarray(y_n, dtype=float)
    active = ode.fast_indices(y_n)
    jac_frozen = None

    def frozen():
        nonlocal jac_frozen
        if jac_frozen is None:
            jac_frozen = _eval_jacobian(ode.jac_fast, ode.f_fast, y_n, cfg)
        return jac_frozen

    f_i: list = []
    f_e: list = []
    prev = y_n
    for i in range(tab.s):
        known = y_n.copy()
        for j in range(i):
            if tab.a_expl[i, j] != 0.0:
                known += H * tab.a_expl[i, j] * f_e[j]
            if tab.a_impl[i, j] != 0.0:
                known += H * tab.a_impl[i, j] * f_i[j]
        a_ii = tab.a_impl[i, i]
        if a_ii == 0.0 or H == 0.0 or (active is not None and active.size == 0):
            Y = known
        else:
            def build():
                J = frozen()
                if active is not None:
                    J = J[np.ix_(active, active)]
                    return np.eye(active.size) - H * a_ii * J
                return np.eye(ode.dim) - H * a_ii * J

            lu = cache.get(("imex", a_ii, active is not None), build)
            Y, _ = solve_dirk_stage(
                ode.f_fast, ode.jac_fast, a_ii, H, known, prev, cfg,
                lu=lu, active=active, stats=stats,
            )
        f_i.append(np.asarray(ode.f_fast(Y)))
        f_e.append(np.asarray(ode.f_slow(Y)))
        prev = Y

    y_next = y_n.copy()
    for i in range(tab.s):
        if tab.b[i] != 0.0:
            y_next += H * tab.b[i] * (f_i[i] + f_e[i])
    return y_next, stats


def imex_integrate(
    tab: ImexTableau,
    ode: PartitionedOde,
    y_0: np.ndarray,
    t_0: float,
    t_end: float,
    H: float,
    cfg: Optional[NewtonConfig] = None,
    sample_stride: Optional[int] = 1,
) -> IntegrationResult:
    """Fixed-step IMEX integration mirroring :func:`mrgark.integrate.integrate`."""
    cfg = cfg if cfg is not None else NewtonConfig()
    y = np.array(y_0, dtype=float)
    span = t_end - t_0
    n_round = round(span / H)
    if n_round > 0 and abs(n_round * H - span) <= 4 * np.finfo(float).eps * abs(span):
        n_full, h_last = n_round, 0.0
    else:
        n_full = int(span // H)
        h_last = span - n_full * H
    stats = StageSolveStats()
    times = [t_0]
    states = [y.copy()]
    total = n_full + (1 if h_last > 0.0 else 0)
    t = t_0
    for k in range(total):
        hk = H if k < n_full else h_last
        try:
            y, st = imex_step(tab, ode, y, hk, cfg)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"step {k + 1}/{total} at t={t:.6g}: {exc}", exc.stats
            ) from exc
        stats.merge(st)
        t = t_0 + (k + 1) * H if k + 1 <= n_full else t_end
        if sample_stride is not None and ((k + 1) % sample_stride == 0 or k + 1 == total):
            times.append(t)
            states.append(y.copy())
    if sample_stride is None:
        times.append(t)
        states.append(y.copy())
    return IntegrationResult(times=np.array(times), states=np.array(states), stats=stats)
