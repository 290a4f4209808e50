"""Structured Newton solvers for implicit stage equations.

All solvers use a modified Newton iteration: the iteration matrix is built
from Jacobians frozen at the initial guess (or supplied pre-factored) and
reused across iterations, so each solve costs at most one dense LU
factorization.  Stage structure is exploited throughout: diagonally implicit
stages solve d-dimensional systems, stage-reducible coupled pairs collapse
into a single d-dimensional solve, and rank-deficient coupled pairs are
solved through the Woodbury identity with a d-dimensional core matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ConvergenceError
from .tableau import RkTableau

_SQRT_EPS = math.sqrt(np.finfo(float).eps)


class JacobianPolicy(Enum):
    FRESH_EVERY_STAGE = "fresh-every-stage"
    FREEZE_PER_MICRO_STEP = "freeze-per-micro-step"
    FREEZE_PER_MACRO_STEP = "freeze-per-macro-step"


@dataclass
class NewtonConfig:
    """Tolerances and Jacobian-reuse choices for the stage solvers."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_iters: int = 50
    jacobian_policy: JacobianPolicy = JacobianPolicy.FREEZE_PER_MICRO_STEP
    fd_epsilon: Optional[float] = None
    divergence_factor: float = 1e4
    max_jacobian_refreshes: int = 3
    interpolate_micro_predictor: bool = True

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class StageSolveStats:
    """Accumulated counters for one or more nonlinear stage solves."""

    iterations: int = 0
    final_residual_norm: float = 0.0
    factorizations: int = 0

    def merge(self, other: "StageSolveStats") -> "StageSolveStats":
        self.iterations += other.iterations
        self.final_residual_norm = max(self.final_residual_norm, other.final_residual_norm)
        self.factorizations += other.factorizations
        return self


def fd_jacobian(f: Callable, y: np.ndarray, eps: Optional[float] = None) -> np.ndarray:
    """Forward-difference Jacobian fallback with per-column scaled increments."""
    y = np.asarray(y, dtype=float)
    f0 = np.asarray(f(y))
    J = np.empty((f0.size, y.size))
    for j in range(y.size):
        step = (eps if eps is not None else _SQRT_EPS) * max(1.0, abs(y[j]))
        yp = y.copy()
        yp[j] += step
        J[:, j] = (np.asarray(f(yp)) - f0) / step
    return J


def _eval_jacobian(jac, f, y, cfg) -> np.ndarray:
    if jac is None:
        return fd_jacobian(f, y, cfg.fd_epsilon)
    if callable(jac):
        return np.asarray(jac(y))
    return np.asarray(jac)


class FactorCache:
    """LU factorizations keyed by the caller's tags, with shared counting."""

    def __init__(self, stats: StageSolveStats):
        self.stats = stats
        self._store: dict = {}

    def get(self, key, build: Callable[[], np.ndarray]):
        hit = self._store.get(key)
        if hit is None:
            self.stats.factorizations += 1
            hit = lu_factor(build())
            self._store[key] = hit
        return hit

    def invalidate(self, predicate: Callable[[object], bool]) -> None:
        self._store = {k: v for k, v in self._store.items() if not predicate(k)}

    def clear(self) -> None:
        self._store.clear()


def _newton_loop(residual, solve_delta, y0, cfg, stats, refresh=None) -> np.ndarray:
    """Shared modified-Newton driver; mutates ``stats`` with iteration counts.

    Convergence test is the scaled residual norm.  When the iteration grows
    instead of contracting and ``refresh`` is available, the iterate reverts
    to the best point seen and the iteration matrix is rebuilt there with a
    fresh Jacobian (a bounded number of times); otherwise growth past the
    divergence factor aborts.
    """
    y = np.array(y0, dtype=float)
    r = residual(y)
    rnorm = float(np.linalg.norm(r))
    initial = max(rnorm, cfg.abs_tol)
    best_y, best_r, best_norm = y.copy(), r, rnorm
    refreshes = 0

    def converged():
        return rnorm <= cfg.abs_tol + cfg.rel_tol * np.linalg.norm(y)

    if converged():
        stats.final_residual_norm = max(stats.final_residual_norm, rnorm)
        return y

    for it in range(1, cfg.max_iters + 1):
        y += solve_delta(-r)
        r = residual(y)
        prev = rnorm
        rnorm = float(np.linalg.norm(r))
        if np.isfinite(rnorm) and rnorm < best_norm:
            best_y, best_r, best_norm = y.copy(), r, rnorm
        if converged():
            stats.iterations += it
            stats.final_residual_norm = max(stats.final_residual_norm, rnorm)
            return y
        growing = not np.isfinite(rnorm) or rnorm > prev
        exploded = not np.isfinite(rnorm) or rnorm > cfg.divergence_factor * initial
        if growing:
            if refresh is not None and refreshes < cfg.max_jacobian_refreshes:
                y, r, rnorm = best_y.copy(), best_r, best_norm
                solve_delta = refresh(y)
                refreshes += 1
            elif exploded:
                stats.iterations += it
                stats.final_residual_norm = rnorm
                raise ConvergenceError(
                    f"Newton diverged (residual {rnorm:.3e} from {initial:.3e})", stats
                )
    stats.iterations += cfg.max_iters
    stats.final_residual_norm = rnorm
    raise ConvergenceError(
        f"Newton did not converge in {cfg.max_iters} iterations "
        f"(residual {rnorm:.3e})", stats
    )


def solve_dirk_stage(
    f: Callable,
    jac,
    a_diag: float,
    h: float,
    rhs_known: np.ndarray,
    guess: Optional[np.ndarray],
    cfg: NewtonConfig,
    *,
    lu=None,
    active: Optional[np.ndarray] = None,
    stats: Optional[StageSolveStats] = None,
) -> tuple[np.ndarray, StageSolveStats]:
    """Solve one diagonally implicit stage  Y = rhs_known + h a_diag f(Y).

    ``lu`` may carry a pre-factored iteration matrix (no factorization is
    counted then).  ``active`` restricts the nonlinear unknowns to an index
    subset; rows of ``f`` outside it must vanish identically, as with
    component-partitioned fast functions.
    """
    stats = stats if stats is not None else StageSolveStats()
    rhs_known = np.asarray(rhs_known, dtype=float)
    coeff = h * a_diag
    if coeff == 0.0:
        return rhs_known.copy(), stats

    if active is None:
        start = rhs_known if guess is None else np.asarray(guess, dtype=float)

        def residual(y):
            return y - rhs_known - coeff * f(y)

        def refresh(y_cur):
            J = _eval_jacobian(jac, f, y_cur, cfg)
            stats.factorizations += 1
            lu_new = lu_factor(np.eye(rhs_known.size) - coeff * J)
            return lambda r: lu_solve(lu_new, r)

        if lu is None:
            J = _eval_jacobian(jac, f, start, cfg)
            stats.factorizations += 1
            lu = lu_factor(np.eye(rhs_known.size) - coeff * J)
        y = _newton_loop(residual, lambda r: lu_solve(lu, r), start, cfg, stats,
                         refresh=refresh)
        return y, stats

    active = np.asarray(active)
    if active.size == 0:
        return rhs_known.copy(), stats
    full = rhs_known.copy()
    if guess is not None:
        full[active] = np.asarray(guess, dtype=float)[active]

    def residual(ya):
        full[active] = ya
        return ya - rhs_known[active] - coeff * f(full)[active]

    def refresh(ya_cur):
        full[active] = ya_cur
        J = _eval_jacobian(jac, f, full, cfg)
        stats.factorizations += 1
        lu_new = lu_factor(np.eye(active.size) - coeff * J[np.ix_(active, active)])
        return lambda r: lu_solve(lu_new, r)

    if lu is None:
        J = _eval_jacobian(jac, f, full, cfg)
        stats.factorizations += 1
        lu = lu_factor(np.eye(active.size) - coeff * J[np.ix_(active, active)])
    ya = _newton_loop(residual, lambda r: lu_solve(lu, r), full[active], cfg, stats,
                      refresh=refresh)
    full[active] = ya
    return full, stats


def solve_coupled_stage(
    f_f: Callable,
    f_s: Callable,
    jac_f,
    jac_s,
    h: float,
    H: float,
    gamma: float,
    rhs_known: np.ndarray,
    guess: Optional[np.ndarray],
    cfg: NewtonConfig,
    *,
    lu=None,
    stats: Optional[StageSolveStats] = None,
) -> tuple[np.ndarray, StageSolveStats]:
    """Solve a stage-reducible coupled pair  Y = rhs + h g f_f(Y) + H g f_s(Y).

    One d-dimensional factorization of I - h g J_f - H g J_s per Jacobian
    refresh; both partitions' stage values coincide.
    """
    stats = stats if stats is not None else StageSolveStats()
    rhs_known = np.asarray(rhs_known, dtype=float)
    if gamma == 0.0:
        return rhs_known.copy(), stats
    start = rhs_known if guess is None else np.asarray(guess, dtype=float)

    def residual(y):
        return y - rhs_known - h * gamma * f_f(y) - H * gamma * f_s(y)

    def refresh(y_cur):
        Jf = _eval_jacobian(jac_f, f_f, y_cur, cfg)
        Js = _eval_jacobian(jac_s, f_s, y_cur, cfg)
        stats.factorizations += 1
        lu_new = lu_factor(np.eye(rhs_known.size) - h * gamma * Jf - H * gamma * Js)
        return lambda r: lu_solve(lu_new, r)

    if lu is None:
        Jf = _eval_jacobian(jac_f, f_f, start, cfg)
        Js = _eval_jacobian(jac_s, f_s, start, cfg)
        stats.factorizations += 1
        lu = lu_factor(np.eye(rhs_known.size) - h * gamma * Jf - H * gamma * Js)
    y = _newton_loop(residual, lambda r: lu_solve(lu, r), start, cfg, stats,
                     refresh=refresh)
    return y, stats


def solve_compound_step(
    f_full: Callable,
    jac_full,
    base: RkTableau,
    H: float,
    y_n: np.ndarray,
    cfg: NewtonConfig,
    *,
    cache: Optional[FactorCache] = None,
    stats: Optional[StageSolveStats] = None,
) -> tuple[list[np.ndarray], StageSolveStats]:
    """Solve all stages of one macro-step of a DIRK method on the full
    right-hand side, sequentially with one factorization per distinct
    diagonal entry (a single one for SDIRK structure)."""
    if not base.is_dirk():
        raise ValueError("compound step requires a diagonally implicit base method")
    stats = stats if stats is not None else StageSolveStats()
    y_n = np.asarray(y_n, dtype=float)
    cache = cache if cache is not None else FactorCache(stats)

    jac_value = None

    def frozen_jacobian():
        nonlocal jac_value
        if jac_value is None:
            jac_value = _eval_jacobian(jac_full, f_full, y_n, cfg)
        return jac_value

    stages: list[np.ndarray] = []
    f_vals: list[np.ndarray] = []
    for i in range(base.s):
        known = y_n.copy()
        for j in range(i):
            aij = base.A[i, j]
            if aij != 0.0:
                known += H * aij * f_vals[j]
        a_ii = base.A[i, i]
        if a_ii == 0.0 or H == 0.0:
            Y = known
        else:
            if cfg.jacobian_policy is JacobianPolicy.FRESH_EVERY_STAGE:
                guess = stages[-1] if stages else y_n
                J = _eval_jacobian(jac_full, f_full, guess, cfg)
                stats.factorizations += 1
                lu = lu_factor(np.eye(y_n.size) - H * a_ii * J)
            else:
                lu = cache.get(
                    ("compound", a_ii, H),
                    lambda: np.eye(y_n.size) - H * a_ii * frozen_jacobian(),
                )
            guess = stages[-1] if stages else y_n
            Y, _ = solve_dirk_stage(
                f_full, None, a_ii, H, known, guess, cfg, lu=lu, stats=stats
            )
        stages.append(Y)
        f_vals.append(np.asarray(f_full(Y)))
    return stages, stats


class WoodburyOperator:
    """Linear solver for  I_2d - [[c11 J_f, c12 J_s], [c21 J_f, c22 J_s]]
    when the coefficient matrix [[c11, c12], [c21, c22]] has rank one.

    The block matrix factors as I - (u x I) [w1 J_f, w2 J_s], so its inverse
    needs only the d-dimensional core  I - (u1 w1) J_f - (u2 w2) J_s.
    """

    def __init__(self, J_f: np.ndarray, J_s: np.ndarray, coeff, *,
                 stats: Optional[StageSolveStats] = None):
        coeff = np.asarray(coeff, dtype=float)
        if coeff.shape != (2, 2):
            raise ValueError("coefficient block must be 2x2")
        scale = np.max(np.abs(coeff))
        if scale == 0.0:
            self._identity = True
            return
        if abs(np.linalg.det(coeff)) > 1e-10 * scale * scale:
            raise ValueError("coefficient block is not rank-deficient")
        self._identity = False
        i0 = int(np.argmax(np.abs(coeff).sum(axis=1)))
        j0 = int(np.argmax(np.abs(coeff[i0])))
        w = coeff[i0] / coeff[i0, j0]
        u = coeff[:, j0]
        self.u = u
        self.J_f = np.asarray(J_f, dtype=float)
        self.J_s = np.asarray(J_s, dtype=float)
        self.w = w
        core = (
            np.eye(self.J_f.shape[0])
            - (u[0] * w[0]) * self.J_f
            - (u[1] * w[1]) * self.J_s
        )
        if stats is not None:
            stats.factorizations += 1
        self.core_lu = lu_factor(core)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if self._identity:
            return rhs.copy()
        d = self.J_f.shape[0]
        rf, rs = rhs[:d], rhs[d:]
        v = self.w[0] * (self.J_f @ rf) + self.w[1] * (self.J_s @ rs)
        core_sol = lu_solve(self.core_lu, v)
        out = rhs.copy()
        out[:d] += self.u[0] * core_sol
        out[d:] += self.u[1] * core_sol
        return out


def woodbury_solve(J_f: np.ndarray, J_s: np.ndarray, coeff, rhs: np.ndarray) -> np.ndarray:
    """One-shot rank-structured solve; see :class:`WoodburyOperator`."""
    return WoodburyOperator(J_f, J_s, coeff).solve(rhs)
