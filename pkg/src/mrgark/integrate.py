"""Fixed-step multirate time steppers and the trajectory driver.

The standard multirate stepper executes the micro-step recurrence directly
(never materializing the assembled tableau): a stage plan derived once per
(scheme, ratio) pair orders the stage solves topologically, collapsing the
supported cross-partition cycles into either a stage-reducible single solve
or a rank-structured Woodbury pair.  The compound-fast stepper performs the
full-system macro solve, discards its fast part, and re-integrates the fast
partition with micro-steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ConvergenceError, StructureError
from .newton import (
    FactorCache,
    JacobianPolicy,
    NewtonConfig,
    StageSolveStats,
    WoodburyOperator,
    _eval_jacobian,
    _newton_loop,
    solve_compound_step,
    solve_coupled_stage,
    solve_dirk_stage,
)
from .tableau import MrGarkScheme, SchemeKind

_ROW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PartitionedOde:
    """Additively partitioned autonomous system y' = f_fast(y) + f_slow(y).

    ``component_split`` marks component-partitioned problems: a pair of
    index arrays (fast, slow) or a callable ``y -> (fast, slow)`` for
    moving partitions; fast solves are then restricted to the fast block.
    Time-dependent problems are expressed by state augmentation (the last
    component is t with rate 1 in the slow partition) and flagged with
    ``t_dependent``.
    """

    dim: int
    f_fast: Callable[[np.ndarray], np.ndarray]
    f_slow: Callable[[np.ndarray], np.ndarray]
    jac_fast: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jac_slow: Optional[Callable[[np.ndarray], np.ndarray]] = None
    component_split: Union[None, tuple, Callable] = None
    t_dependent: bool = False
    name: str = ""

    def f_full(self, y: np.ndarray) -> np.ndarray:
        return self.f_fast(y) + self.f_slow(y)

    def fast_indices(self, y: np.ndarray) -> Optional[np.ndarray]:
        split = self.component_split
        if split is None:
            return None
        if callable(split):
            split = split(y)
        fast = np.asarray(split[0], dtype=int)
        return fast if fast.size < self.dim else None


@dataclass
class IntegrationResult:
    """Sampled trajectory with accumulated solver counters."""

    times: np.ndarray
    states: np.ndarray
    stats: StageSolveStats
    invariant_drift: Optional[float] = None

    @property
    def y_end(self) -> np.ndarray:
        return self.states[-1]


# ---------------------------------------------------------------------------
# stage plan for standard multirate schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Action:
    kind: str  # "fast" | "slow" | "pair_red" | "pair_wood"
    lam: int = 0  # 1-based micro-step index (fast/pair actions)
    i: int = -1  # fast stage index within the micro-step (0-based)
    j: int = -1  # slow stage index (0-based)
    gamma: float = 0.0  # shared diagonal coefficient of reducible pairs


@dataclass(frozen=True)
class _StagePlan:
    actions: tuple
    fs_blocks: tuple  # per-lam fast-slow coupling blocks
    sf_blocks: tuple  # per-lam slow-fast coupling blocks


def _pair_is_reducible(fb, sb, fs_blocks, sf_blocks, lam, i, j) -> bool:
    """A coupled pair collapses to one unknown when the fast stage's row in
    the assembled tableau equals the slow stage's row."""
    M = len(fs_blocks)
    if not np.allclose(fs_blocks[lam - 1][i], sb.A[j], atol=_ROW_TOL):
        return False
    if not np.allclose(sf_blocks[lam - 1][j], fb.A[i], atol=_ROW_TOL):
        return False
    for k in range(1, M + 1):
        if k < lam and not np.allclose(sf_blocks[k - 1][j], fb.b, atol=_ROW_TOL):
            return False
        if k > lam and not np.allclose(sf_blocks[k - 1][j], 0.0, atol=_ROW_TOL):
            return False
    return True


@lru_cache(maxsize=None)
def _stage_plan(scheme: MrGarkScheme, M: int) -> _StagePlan:
    scheme.coupling.check(M)
    fb, sb = scheme.fast_base, scheme.slow_base
    if not (fb.is_dirk() and sb.is_dirk()):
        raise StructureError("standard multirate stepping requires DIRK base methods")
    fs_blocks = tuple(np.asarray(scheme.coupling.fs(lam, M), float) for lam in range(1, M + 1))
    sf_blocks = tuple(np.asarray(scheme.coupling.sf(lam, M), float) for lam in range(1, M + 1))

    deps: dict = {}
    for lam in range(1, M + 1):
        for i in range(fb.s):
            need = {("F", k, jj) for k in range(1, lam) for jj in range(fb.s)}
            need |= {("F", lam, jj) for jj in range(i)}
            need |= {("S", jj) for jj in np.nonzero(fs_blocks[lam - 1][i])[0]}
            deps[("F", lam, i)] = need
    for j in range(sb.s):
        need = {("S", k) for k in range(j)}
        for lam in range(1, M + 1):
            need |= {("F", lam, int(ii)) for ii in np.nonzero(sf_blocks[lam - 1][j])[0]}
        deps[("S", j)] = need

    actions: list[_Action] = []
    done: set = set()
    remaining = set(deps)
    while remaining:
        ready = sorted(n for n in remaining if deps[n] <= done)
        if ready:
            for node in ready:
                if node[0] == "F":
                    actions.append(_Action("fast", lam=node[1], i=node[2]))
                else:
                    actions.append(_Action("slow", j=node[1]))
                done.add(node)
                remaining.discard(node)
            continue
        pair = None
        for node in sorted(remaining):
            if node[0] != "F":
                continue
            open_deps = deps[node] - done
            if len(open_deps) != 1:
                continue
            (other,) = open_deps
            if other[0] == "S" and deps[other] - done == {node}:
                pair = (node, other)
                break
        if pair is None:
            raise StructureError(
                f"{scheme.name} at M={M}: cyclic stage dependencies beyond "
                "the supported coupled-pair structures"
            )
        (_, lam, i), (_, j) = pair
        gamma_f = fb.A[i, i]
        gamma_s = fs_blocks[lam - 1][i, j]
        if (
            _pair_is_reducible(fb, sb, fs_blocks, sf_blocks, lam, i, j)
            and abs(gamma_f - gamma_s) <= _ROW_TOL
        ):
            actions.append(_Action("pair_red", lam=lam, i=i, j=j, gamma=gamma_f))
        else:
            unit = np.array(
                [
                    [fb.A[i, i], fs_blocks[lam - 1][i, j]],
                    [sf_blocks[lam - 1][j, i], sb.A[j, j]],
                ]
            )
            scale = np.max(np.abs(unit))
            if scale > 0 and abs(np.linalg.det(unit)) > 1e-10 * scale * scale:
                raise StructureError(
                    f"{scheme.name} at M={M}: coupled pair (lam={lam}, stage "
                    f"{i + 1}/{j + 1}) has a full-rank coefficient block"
                )
            actions.append(_Action("pair_wood", lam=lam, i=i, j=j))
        done.update(pair)
        remaining.difference_update(pair)
    return _StagePlan(actions=tuple(actions), fs_blocks=fs_blocks, sf_blocks=sf_blocks)


# ---------------------------------------------------------------------------
# per-macro-step Jacobian bookkeeping
# ---------------------------------------------------------------------------


class _StepWorkspace:
    """Holds frozen Jacobians and LU factorizations for one macro-step."""

    def __init__(self, ode: PartitionedOde, cfg: NewtonConfig, y_n: np.ndarray,
                 stats: StageSolveStats):
        self.ode = ode
        self.cfg = cfg
        self.y_n = y_n
        self.stats = stats
        self.cache = FactorCache(stats)
        self.active = ode.fast_indices(y_n)
        self._jf: dict = {}
        self._js: Optional[np.ndarray] = None

    def fast_jacobian(self, lam: int, point: np.ndarray) -> np.ndarray:
        policy = self.cfg.jacobian_policy
        key = lam if policy is JacobianPolicy.FREEZE_PER_MICRO_STEP else 0
        J = self._jf.get(key)
        if J is None:
            where = point if policy is JacobianPolicy.FREEZE_PER_MICRO_STEP else self.y_n
            J = _eval_jacobian(self.ode.jac_fast, self.ode.f_fast, where, self.cfg)
            self._jf[key] = J
        return J

    def slow_jacobian(self) -> np.ndarray:
        if self._js is None:
            self._js = _eval_jacobian(self.ode.jac_slow, self.ode.f_slow, self.y_n, self.cfg)
        return self._js

    def fast_lu(self, lam: int, coeff: float, point: np.ndarray):
        if self.cfg.jacobian_policy is JacobianPolicy.FRESH_EVERY_STAGE:
            return None
        if self.active is not None and self.active.size == 0:
            return None
        key_lam = lam if self.cfg.jacobian_policy is JacobianPolicy.FREEZE_PER_MICRO_STEP else 0
        reduced = self.active is not None

        def build():
            J = self.fast_jacobian(lam, point)
            if reduced:
                J = J[np.ix_(self.active, self.active)]
                return np.eye(self.active.size) - coeff * J
            return np.eye(self.ode.dim) - coeff * J

        return self.cache.get(("fast", key_lam, coeff, reduced), build)

    def slow_lu(self, coeff: float):
        if self.cfg.jacobian_policy is JacobianPolicy.FRESH_EVERY_STAGE:
            return None
        return self.cache.get(
            ("slow", coeff),
            lambda: np.eye(self.ode.dim) - coeff * self.slow_jacobian(),
        )

    def pair_lu(self, lam: int, h: float, H: float, gamma: float, point: np.ndarray):
        if self.cfg.jacobian_policy is JacobianPolicy.FRESH_EVERY_STAGE:
            return None
        key_lam = lam if self.cfg.jacobian_policy is JacobianPolicy.FREEZE_PER_MICRO_STEP else 0
        return self.cache.get(
            ("pair", key_lam, gamma),
            lambda: np.eye(self.ode.dim)
            - h * gamma * self.fast_jacobian(lam, point)
            - H * gamma * self.slow_jacobian(),
        )


# ---------------------------------------------------------------------------
# standard multirate step
# ---------------------------------------------------------------------------


def step_standard(
    scheme: MrGarkScheme,
    M: int,
    ode: PartitionedOde,
    y_n: np.ndarray,
    t_n: float,
    H: float,
    cfg: Optional[NewtonConfig] = None,
) -> tuple[np.ndarray, StageSolveStats]:
    """One macro-step of a standard multirate scheme via the micro-step
    recurrence, with stage ordering from the cached dependency plan."""
    if scheme.kind is not SchemeKind.STANDARD:
        raise ValueError(f"{scheme.name} is not a standard multirate scheme")
    cfg = cfg if cfg is not None else NewtonConfig()
    plan = _stage_plan(scheme, M)
    fb, sb = scheme.fast_base, scheme.slow_base
    y_n = np.asarray(y_n, dtype=float)
    h = H / M
    stats = StageSolveStats()
    ws = _StepWorkspace(ode, cfg, y_n, stats)

    ff: dict = {}
    fs_vals: list = [None] * sb.s
    Yf: dict = {}
    Ys: list = [None] * sb.s
    ytilde = [y_n]

    def ensure_ytilde(lam_minus_1: int) -> np.ndarray:
        while len(ytilde) <= lam_minus_1:
            k = len(ytilde)
            acc = ytilde[k - 1].copy()
            for idx in range(fb.s):
                if fb.b[idx] != 0.0:
                    acc += h * fb.b[idx] * ff[(k, idx)]
            ytilde.append(acc)
        return ytilde[lam_minus_1]

    def fast_rhs(lam: int, i: int, skip_slow: int = -1) -> np.ndarray:
        rhs = ensure_ytilde(lam - 1).copy()
        for jj in range(i):
            a = fb.A[i, jj]
            if a != 0.0:
                rhs += h * a * ff[(lam, jj)]
        row = plan.fs_blocks[lam - 1][i]
        for jj in np.nonzero(row)[0]:
            if jj != skip_slow:
                rhs += H * row[jj] * fs_vals[jj]
        return rhs

    def slow_rhs(j: int, skip_fast=None) -> np.ndarray:
        rhs = y_n.copy()
        for k in range(j):
            a = sb.A[j, k]
            if a != 0.0:
                rhs += H * a * fs_vals[k]
        for lam in range(1, M + 1):
            row = plan.sf_blocks[lam - 1][j]
            for ii in np.nonzero(row)[0]:
                if skip_fast is not None and (lam, ii) == skip_fast:
                    continue
                rhs += h * row[ii] * ff[(lam, int(ii))]
        return rhs

    for act in plan.actions:
        if act.kind == "fast":
            lam, i = act.lam, act.i
            rhs = fast_rhs(lam, i)
            a_ii = fb.A[i, i]
            guess = Yf.get((lam - 1, i), rhs)
            lu = ws.fast_lu(lam, h * a_ii, ensure_ytilde(lam - 1)) if a_ii != 0.0 else None
            Y, _ = solve_dirk_stage(
                ode.f_fast, ode.jac_fast, a_ii, h, rhs, guess, cfg,
                lu=lu, active=ws.active, stats=stats,
            )
            Yf[(lam, i)] = Y
            ff[(lam, i)] = np.asarray(ode.f_fast(Y))
        elif act.kind == "slow":
            j = act.j
            rhs = slow_rhs(j)
            a_jj = sb.A[j, j]
            guess = Ys[j - 1] if j > 0 and Ys[j - 1] is not None else rhs
            lu = ws.slow_lu(H * a_jj) if a_jj != 0.0 else None
            Y, _ = solve_dirk_stage(
                ode.f_slow, ode.jac_slow, a_jj, H, rhs, guess, cfg,
                lu=lu, stats=stats,
            )
            Ys[j] = Y
            fs_vals[j] = np.asarray(ode.f_slow(Y))
        elif act.kind == "pair_red":
            lam, i, j = act.lam, act.i, act.j
            rhs = fast_rhs(lam, i, skip_slow=j)
            point = ensure_ytilde(lam - 1)
            lu = ws.pair_lu(lam, h, H, act.gamma, point)
            Y, _ = solve_coupled_stage(
                ode.f_fast, ode.f_slow, ode.jac_fast, ode.jac_slow,
                h, H, act.gamma, rhs, point, cfg, lu=lu, stats=stats,
            )
            Yf[(lam, i)] = Y
            Ys[j] = Y
            ff[(lam, i)] = np.asarray(ode.f_fast(Y))
            fs_vals[j] = np.asarray(ode.f_slow(Y))
        else:  # pair_wood
            lam, i, j = act.lam, act.i, act.j
            rhs_f = fast_rhs(lam, i, skip_slow=j)
            rhs_s = slow_rhs(j, skip_fast=(lam, i))
            C = np.array(
                [
                    [h * fb.A[i, i], H * plan.fs_blocks[lam - 1][i, j]],
                    [h * plan.sf_blocks[lam - 1][j, i], H * sb.A[j, j]],
                ]
            )
            point = ensure_ytilde(lam - 1)
            Jf = ws.fast_jacobian(lam, point)
            Js = ws.slow_jacobian()
            op = WoodburyOperator(Jf, Js, C, stats=stats)
            d = ode.dim

            def residual(v):
                yf, ys = v[:d], v[d:]
                ff_v, fs_v = ode.f_fast(yf), ode.f_slow(ys)
                return np.concatenate(
                    [
                        yf - rhs_f - C[0, 0] * ff_v - C[0, 1] * fs_v,
                        ys - rhs_s - C[1, 0] * ff_v - C[1, 1] * fs_v,
                    ]
                )

            start = np.concatenate([rhs_f, rhs_s])
            sol = _newton_loop(residual, op.solve, start, cfg, stats)
            Yf[(lam, i)], Ys[j] = sol[:d], sol[d:]
            ff[(lam, i)] = np.asarray(ode.f_fast(Yf[(lam, i)]))
            fs_vals[j] = np.asarray(ode.f_slow(Ys[j]))

    y_next = ensure_ytilde(M).copy()
    for j in range(sb.s):
        if sb.b[j] != 0.0:
            y_next += H * sb.b[j] * fs_vals[j]
    return y_next, stats


# ---------------------------------------------------------------------------
# compound-fast step
# ---------------------------------------------------------------------------


def _interpolate_stages(theta: float, c: np.ndarray, y_n: np.ndarray,
                        stages: Sequence[np.ndarray]) -> np.ndarray:
    """Piecewise-linear interpolant through (0, y_n) and the compound-step
    stage values at their abscissae; later stages win at duplicated nodes."""
    nodes = {0.0: y_n}
    for ci, Yi in zip(c, stages):
        nodes[float(ci)] = Yi
    xs = sorted(nodes)
    if theta <= xs[0]:
        return nodes[xs[0]].copy()
    for lo, hi in zip(xs, xs[1:]):
        if theta <= hi:
            t = (theta - lo) / (hi - lo)
            return (1.0 - t) * nodes[lo] + t * nodes[hi]
    return nodes[xs[-1]].copy()


def step_compound_fast(
    scheme: MrGarkScheme,
    M: int,
    ode: PartitionedOde,
    y_n: np.ndarray,
    t_n: float,
    H: float,
    cfg: Optional[NewtonConfig] = None,
) -> tuple[np.ndarray, StageSolveStats]:
    """One compound-fast macro-step: full-system compound solve, fast
    re-integration with M micro-steps (the compound step's fast contribution
    is discarded), then the combined update."""
    if scheme.kind is not SchemeKind.COMPOUND_FAST:
        raise ValueError(f"{scheme.name} is not a compound-fast scheme")
    cfg = cfg if cfg is not None else NewtonConfig()
    scheme.coupling.check(M)
    base = scheme.fast_base
    y_n = np.asarray(y_n, dtype=float)
    stats = StageSolveStats()
    ws = _StepWorkspace(ode, cfg, y_n, stats)

    def jac_full(y):
        Jf = _eval_jacobian(ode.jac_fast, ode.f_fast, y, cfg)
        Js = _eval_jacobian(ode.jac_slow, ode.f_slow, y, cfg)
        return Jf + Js

    stages, _ = solve_compound_step(
        ode.f_full, jac_full, base, H, y_n, cfg, cache=ws.cache, stats=stats
    )
    fs_vals = [np.asarray(ode.f_slow(Y)) for Y in stages]

    h = H / M
    ytilde = y_n.copy()
    prev_micro: Optional[list] = None
    for lam in range(1, M + 1):
        fs_block = scheme.coupling.fs(lam, M)
        ff_vals = []
        micro_stages = []
        for i in range(base.s):
            rhs = ytilde.copy()
            for jj in range(i):
                a = base.A[i, jj]
                if a != 0.0:
                    rhs += h * a * ff_vals[jj]
            for jj in range(base.s):
                a = fs_block[i, jj]
                if a != 0.0:
                    rhs += H * a * fs_vals[jj]
            if cfg.interpolate_micro_predictor:
                theta = ((lam - 1) + base.c[i]) / M
                guess = _interpolate_stages(theta, base.c, y_n, stages)
            else:
                guess = prev_micro[i] if prev_micro is not None else rhs
            a_ii = base.A[i, i]
            lu = ws.fast_lu(lam, h * a_ii, ytilde) if a_ii != 0.0 else None
            Y, _ = solve_dirk_stage(
                ode.f_fast, ode.jac_fast, a_ii, h, rhs, guess, cfg,
                lu=lu, active=ws.active, stats=stats,
            )
            micro_stages.append(Y)
            ff_vals.append(np.asarray(ode.f_fast(Y)))
        for i in range(base.s):
            if base.b[i] != 0.0:
                ytilde += h * base.b[i] * ff_vals[i]
        prev_micro = micro_stages

    y_next = ytilde
    for j in range(base.s):
        if base.b[j] != 0.0:
            y_next += H * base.b[j] * fs_vals[j]
    return y_next, stats


def step(scheme, M, ode, y_n, t_n, H, cfg=None):
    """Dispatch one macro-step by scheme kind."""
    if scheme.kind is SchemeKind.STANDARD:
        return step_standard(scheme, M, ode, y_n, t_n, H, cfg)
    return step_compound_fast(scheme, M, ode, y_n, t_n, H, cfg)


# ---------------------------------------------------------------------------
# trajectory driver
# ---------------------------------------------------------------------------


def integrate(
    scheme: MrGarkScheme,
    M: int,
    ode: PartitionedOde,
    y_0: np.ndarray,
    t_0: float,
    t_end: float,
    H: float,
    cfg: Optional[NewtonConfig] = None,
    invariant: Optional[np.ndarray] = None,
    sample_stride: Optional[int] = 1,
) -> IntegrationResult:
    """Fixed-step integration from t_0 to t_end.

    A final partial step is taken when the span is not an integer multiple
    of H (within 1 ulp); ``invariant`` is a functional whose drift
    ``max_n |z . y_n - z . y_0|`` is monitored; ``sample_stride=None``
    stores only the first and last states.
    """
    cfg = cfg if cfg is not None else NewtonConfig()
    y = np.array(y_0, dtype=float)
    span = t_end - t_0
    if span < 0 or H <= 0:
        raise ValueError("require t_end >= t_0 and H > 0")
    n_round = round(span / H) if H > 0 else 0
    if n_round > 0 and abs(n_round * H - span) <= 4 * np.finfo(float).eps * abs(span):
        n_full, h_last = n_round, 0.0
    else:
        n_full = int(span // H)
        h_last = span - n_full * H
        if h_last <= 4 * np.finfo(float).eps * abs(span):
            h_last = 0.0

    stats = StageSolveStats()
    times = [t_0]
    states = [y.copy()]
    drift = 0.0 if invariant is not None else None
    ref = float(np.dot(invariant, y)) if invariant is not None else 0.0

    step_fn = step_standard if scheme.kind is SchemeKind.STANDARD else step_compound_fast
    t = t_0
    total_steps = n_full + (1 if h_last > 0.0 else 0)
    for k in range(total_steps):
        hk = H if k < n_full else h_last
        try:
            y, st = step_fn(scheme, M, ode, y, t, hk, cfg)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"step {k + 1}/{total_steps} at t={t:.6g}: {exc}", exc.stats
            ) from exc
        stats.merge(st)
        t = t_0 + (k + 1) * H if k + 1 <= n_full else t_end
        if invariant is not None:
            drift = max(drift, abs(float(np.dot(invariant, y)) - ref))
        if sample_stride is not None and ((k + 1) % sample_stride == 0 or k + 1 == total_steps):
            times.append(t)
            states.append(y.copy())
    if sample_stride is None:
        times.append(t_end if total_steps else t_0)
        states.append(y.copy())
    return IntegrationResult(
        times=np.array(times),
        states=np.array(states),
        stats=stats,
        invariant_drift=drift,
    )
