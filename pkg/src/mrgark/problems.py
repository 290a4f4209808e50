"""Benchmark problems: the CUSP reaction-diffusion semi-discretization, the
MOSFET inverter chain, a linear-invariant reaction network, and scalar/2x2
linear test problems.

All problems are exposed through :class:`~mrgark.integrate.PartitionedOde`
with analytic Jacobians for both partitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .integrate import PartitionedOde


# ---------------------------------------------------------------------------
# CUSP model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CuspSpec:
    """Reaction-diffusion model on a periodic mesh; reaction is the fast
    partition, diffusion the slow one."""

    n: int = 32
    sigma: float = 1.0 / 144.0
    epsilon: float = 1e-4
    t_end: float = 1.1

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("need at least 3 mesh points")

    @property
    def dim(self) -> int:
        return 3 * self.n


def _periodic_laplacian(n: int) -> np.ndarray:
    lap = -2.0 * np.eye(n)
    idx = np.arange(n)
    lap[idx, (idx + 1) % n] = 1.0
    lap[idx, (idx - 1) % n] = 1.0
    return lap


def cusp_build(spec: CuspSpec = CuspSpec()) -> PartitionedOde:
    """Method-of-lines CUSP system; state layout [y_1..y_N, a_1..a_N, b_1..b_N]."""
    n = spec.n
    inv_eps = 1.0 / spec.epsilon
    dx = 1.0 / n
    lap1 = spec.sigma / dx**2 * _periodic_laplacian(n)
    lap3 = np.zeros((3 * n, 3 * n))
    for k in range(3):
        lap3[k * n:(k + 1) * n, k * n:(k + 1) * n] = lap1

    def split(state):
        return state[:n], state[n:2 * n], state[2 * n:]

    def f_fast(state):
        y, a, b = split(state)
        u = (y - 0.7) * (y - 1.3)
        v = u / (u + 0.1)
        out = np.empty_like(state)
        out[:n] = -inv_eps * (y**3 + a * y + b)
        out[n:2 * n] = b + 0.07 * v
        out[2 * n:] = b * (1.0 - a * a) - a - 0.4 * y + 0.035 * v
        return out

    def jac_fast(state):
        y, a, b = split(state)
        u = (y - 0.7) * (y - 1.3)
        dv = 0.1 / (u + 0.1) ** 2 * (2.0 * y - 2.0)
        J = np.zeros((3 * n, 3 * n))
        i = np.arange(n)
        J[i, i] = -inv_eps * (3.0 * y * y + a)
        J[i, n + i] = -inv_eps * y
        J[i, 2 * n + i] = -inv_eps
        J[n + i, i] = 0.07 * dv
        J[n + i, 2 * n + i] = 1.0
        J[2 * n + i, i] = -0.4 + 0.035 * dv
        J[2 * n + i, n + i] = -2.0 * a * b - 1.0
        J[2 * n + i, 2 * n + i] = 1.0 - a * a
        return J

    def f_slow(state):
        return lap3 @ state

    def jac_slow(state):
        return lap3

    return PartitionedOde(
        dim=3 * n, f_fast=f_fast, f_slow=f_slow,
        jac_fast=jac_fast, jac_slow=jac_slow, name="cusp",
    )


def cusp_initial(spec: CuspSpec = CuspSpec()) -> np.ndarray:
    n = spec.n
    i = np.arange(1, n + 1)
    return np.concatenate(
        [np.zeros(n), -2.0 * np.cos(2.0 * np.pi * i / n), 2.0 * np.sin(2.0 * np.pi * i / n)]
    )


# ---------------------------------------------------------------------------
# inverter chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InverterChainSpec:
    """Chain of MOSFET inverters driven by a trapezoid input pulse.

    The state is time-augmented (last component is t), so the moving fast
    window and the input signal stay autonomous.
    """

    m: int = 500
    gamma: float = 100.0
    u_op: float = 5.0
    u_thresh: float = 1.0
    u_ground: float = 0.0
    t_end: float = 120.0
    window_rate: float = 4.75
    window_head: float = 95.0
    window_tail: float = 15.0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("need at least 2 inverters")

    @property
    def dim(self) -> int:
        return self.m + 1


def inverter_input(t):
    """Trapezoid input pulse feeding the first inverter."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    out = np.where((t >= 5.0) & (t <= 10.0), t - 5.0, out)
    out = np.where((t > 10.0) & (t <= 15.0), 5.0, out)
    out = np.where((t > 15.0) & (t <= 17.0), 2.5 * (17.0 - t), out)
    return out if out.ndim else float(out)


def _input_slope(t: float) -> float:
    if 5.0 < t < 10.0:
        return 1.0
    if 15.0 < t < 17.0:
        return -2.5
    return 0.0


def inverter_window(spec: InverterChainSpec, t: float) -> tuple[int, int]:
    """Inclusive 1-based index range of the fast inverters at time t."""
    lo = min(max(1, math.floor(spec.window_rate * t - spec.window_head)), spec.m + 1)
    hi = min(max(0, math.floor(spec.window_rate * t - spec.window_tail)), spec.m)
    return lo, hi


def inverter_build(spec: InverterChainSpec = InverterChainSpec()) -> PartitionedOde:
    """Inverter chain with the time-dependent fast/slow row split."""
    m = spec.m
    gam, u_op, u_t, u_0 = spec.gamma, spec.u_op, spec.u_thresh, spec.u_ground

    def full_rhs(state):
        u = state[:m]
        t = state[m]
        gate = np.empty(m)
        gate[0] = inverter_input(t)
        gate[1:] = u[:-1]
        g = np.maximum(gate - u_0 - u_t, 0.0) ** 2 - np.maximum(gate - u - u_t, 0.0) ** 2
        out = np.empty(m + 1)
        out[:m] = u_op - u - gam * g
        out[m] = 1.0
        return out

    def full_jac(state):
        u = state[:m]
        t = state[m]
        gate = np.empty(m)
        gate[0] = inverter_input(t)
        gate[1:] = u[:-1]
        drain_clamp = np.maximum(gate - u - u_t, 0.0)
        source_clamp = np.maximum(gate - u_0 - u_t, 0.0)
        J = np.zeros((m + 1, m + 1))
        i = np.arange(m)
        J[i, i] = -1.0 - 2.0 * gam * drain_clamp
        dg_dgate = 2.0 * source_clamp - 2.0 * drain_clamp
        J[i[1:], i[:-1]] = -gam * dg_dgate[1:]
        J[0, m] = -gam * dg_dgate[0] * _input_slope(t)
        return J

    def fast_mask(state):
        lo, hi = inverter_window(spec, state[m])
        mask = np.zeros(m + 1, dtype=bool)
        if lo <= hi:
            mask[lo - 1:hi] = True
        return mask

    def f_fast(state):
        out = full_rhs(state)
        out[~fast_mask(state)] = 0.0
        return out

    def f_slow(state):
        out = full_rhs(state)
        out[fast_mask(state)] = 0.0
        return out

    def jac_fast(state):
        J = full_jac(state)
        J[~fast_mask(state), :] = 0.0
        return J

    def jac_slow(state):
        J = full_jac(state)
        J[fast_mask(state), :] = 0.0
        return J

    def component_split(state):
        mask = fast_mask(state)
        idx = np.arange(m + 1)
        return idx[mask], idx[~mask]

    return PartitionedOde(
        dim=m + 1, f_fast=f_fast, f_slow=f_slow,
        jac_fast=jac_fast, jac_slow=jac_slow,
        component_split=component_split, t_dependent=True, name="inverter",
    )


def inverter_initial(spec: InverterChainSpec = InverterChainSpec(), t_0: float = 0.0) -> np.ndarray:
    u0 = np.where(np.arange(1, spec.m + 1) % 2 == 0, 6.246e-3, 5.0)
    return np.append(u0, t_0)


# ---------------------------------------------------------------------------
# linear-invariant reaction network
# ---------------------------------------------------------------------------


def linear_invariant_build(individually_conserving: bool = True):
    """Three-species mass-conserving reaction network and its invariant.

    With ``individually_conserving`` each partition's stoichiometry columns
    sum to zero, so any GARK method preserves the total mass; otherwise only
    the combined system conserves it and a generic partitioned method will
    drift.
    """
    if individually_conserving:
        S_f = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
        S_s = np.array([[0.0, 0.0], [0.0, -1.0], [0.0, 1.0]])
    else:
        S_f = np.array([[-1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
        S_s = np.array([[0.0, 0.0], [1.0, -1.0], [0.0, 0.0]])

    k1, k2 = 10.0, 1.0

    def rates(y):
        return np.array([k1 * y[0] * y[0], k2 * y[1]])

    def drates(y):
        return np.array([[2.0 * k1 * y[0], 0.0, 0.0], [0.0, k2, 0.0]])

    def f_fast(y):
        return S_f @ rates(y)

    def f_slow(y):
        return S_s @ rates(y)

    ode = PartitionedOde(
        dim=3, f_fast=f_fast, f_slow=f_slow,
        jac_fast=lambda y: S_f @ drates(y), jac_slow=lambda y: S_s @ drates(y),
        name="linear-invariant",
    )
    return ode, np.ones(3)


# ---------------------------------------------------------------------------
# linear test problems
# ---------------------------------------------------------------------------


def dahlquist_build(lambda_fast: float, lambda_slow: float, dim: int = 1) -> PartitionedOde:
    """Scalar (or diagonal) split linear test problem y' = lf y + ls y."""
    lf, ls = float(lambda_fast), float(lambda_slow)
    eye = np.eye(dim)
    return PartitionedOde(
        dim=dim,
        f_fast=lambda y: lf * y, f_slow=lambda y: ls * y,
        jac_fast=lambda y: lf * eye, jac_slow=lambda y: ls * eye,
        name="dahlquist",
    )


def linear_2x2_build(Lambda) -> PartitionedOde:
    """Component-partitioned 2x2 linear system; first row fast, second slow."""
    L = np.asarray(Lambda, dtype=float)
    if L.shape != (2, 2):
        raise ValueError("Lambda must be 2x2")
    P_f = np.array([[1.0, 0.0], [0.0, 0.0]])
    P_s = np.array([[0.0, 0.0], [0.0, 1.0]])
    return PartitionedOde(
        dim=2,
        f_fast=lambda y: P_f @ (L @ y), f_slow=lambda y: P_s @ (L @ y),
        jac_fast=lambda y: P_f @ L, jac_slow=lambda y: P_s @ L,
        component_split=(np.array([0]), np.array([1])),
        name="linear-2x2",
    )


def in_test_matrix_class(Lambda, tol: float = 1e-12) -> bool:
    """Membership test for the exponentially bounded 2x2 test matrices:
    eigenvalue real parts nonpositive, imaginary-axis eigenvalues simple,
    and both diagonal entries in the closed left half-plane."""
    L = np.asarray(Lambda, dtype=complex)
    lam = np.linalg.eigvals(L)
    if np.any(lam.real > tol):
        return False
    if L[0, 0].real > tol or L[1, 1].real > tol:
        return False
    on_axis = np.abs(lam.real) <= tol
    if np.any(on_axis) and abs(lam[0] - lam[1]) <= tol:
        # repeated imaginary-axis eigenvalue must not be defective
        if not np.allclose(L, lam[0] * np.eye(2), atol=tol):
            return False
    return True
