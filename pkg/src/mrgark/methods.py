"""Catalog of the shipped implicit multirate schemes, orders one to four.

Every method is identified by a short name (the same names the CLI accepts)
and built from closed-form coupling coefficients in the micro-step index
``lam`` and the multirate ratio ``M``, so any admissible ratio works
without precomputed tables.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import CatalogError
from .tableau import CouplingFamily, MrGarkScheme, RkTableau, SchemeKind

#: diagonal coefficient of the two-stage L-stable SDIRK method
SDIRK2_GAMMA = 1.0 - 1.0 / math.sqrt(2.0)


@lru_cache(maxsize=1)
def sdirk3_gamma() -> float:
    """Middle root of 6 g^3 - 18 g^2 + 9 g - 1 = 0, by Newton to 1e-15."""
    g = 0.44
    for _ in range(60):
        f = ((6.0 * g - 18.0) * g + 9.0) * g - 1.0
        df = (18.0 * g - 36.0) * g + 9.0
        step = f / df
        g -= step
        if abs(step) < 1e-16:
            break
    assert abs(((6.0 * g - 18.0) * g + 9.0) * g - 1.0) < 1e-14
    assert 0.0 < g < 1.0
    return g


@lru_cache(maxsize=None)
def backward_euler() -> RkTableau:
    return RkTableau(A=[[1.0]], b=[1.0], c=[1.0], name="BE")


@lru_cache(maxsize=None)
def implicit_midpoint() -> RkTableau:
    return RkTableau(A=[[0.5]], b=[1.0], c=[0.5], name="Midpoint")


@lru_cache(maxsize=None)
def sdirk2() -> RkTableau:
    g = SDIRK2_GAMMA
    return RkTableau(
        A=[[g, 0.0], [1.0 - g, g]],
        b=[1.0 - g, g],
        c=[g, 1.0],
        b_hat=[3.0 / 5.0, 2.0 / 5.0],
        name="SDIRK2",
    )


@lru_cache(maxsize=None)
def sdirk3() -> RkTableau:
    g = sdirk3_gamma()
    b1 = -1.5 * g * g + 4.0 * g - 0.25
    b2 = 1.5 * g * g - 5.0 * g + 1.25
    return RkTableau(
        A=[[g, 0.0, 0.0], [(1.0 - g) / 2.0, g, 0.0], [b1, b2, g]],
        b=[b1, b2, g],
        c=[g, (1.0 + g) / 2.0, 1.0],
        b_hat=[-1.5 * g * g + 3.0 * g - 0.25, 1.5 * g * g - 3.0 * g + 1.25, 0.0],
        name="SDIRK3",
    )


@lru_cache(maxsize=None)
def sdirk4() -> RkTableau:
    return RkTableau(
        A=[
            [1.0 / 4.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 4.0, 1.0 / 4.0, 0.0, 0.0, 0.0],
            [69.0 / 400.0, -9.0 / 400.0, 1.0 / 4.0, 0.0, 0.0],
            [103241.0 / 143748.0, -1751.0 / 71874.0, -11050.0 / 35937.0, 1.0 / 4.0, 0.0],
            [400.0 / 459.0, -35.0 / 216.0, -250.0 / 351.0, 1331.0 / 1768.0, 1.0 / 4.0],
        ],
        b=[400.0 / 459.0, -35.0 / 216.0, -250.0 / 351.0, 1331.0 / 1768.0, 1.0 / 4.0],
        c=[1.0 / 4.0, 1.0, 2.0 / 5.0, 7.0 / 11.0, 1.0],
        b_hat=[
            10388.0 / 10557.0,
            -1399.0 / 4968.0,
            -30425.0 / 32292.0,
            73205.0 / 81328.0,
            125.0 / 368.0,
        ],
        name="SDIRK4",
    )


# ---------------------------------------------------------------------------
# coupling families for the standard (non-compound) schemes
# ---------------------------------------------------------------------------


def _be_coupled_fs(lam: int, M: int) -> np.ndarray:
    return np.array([[0.0 if lam < M / 2.0 else 1.0]])


def _be_coupled_sf(lam: int, M: int) -> np.ndarray:
    return np.array([[1.0 if lam <= (M + 1) / 2.0 else 0.0]])


def _be_decoupled_fs(lam: int, M: int) -> np.ndarray:
    return np.array([[0.0 if lam <= M / 2.0 else 1.0]])


def _be_decoupled_sf(lam: int, M: int) -> np.ndarray:
    return np.array([[1.0 if lam <= M / 2.0 else 0.0]])


def _midpoint_coupled_fs(lam: int, M: int) -> np.ndarray:
    half = (M + 1) // 2
    return np.array([[0.0 if lam < half else (0.5 if lam == half else 1.0)]])


def _midpoint_coupled_sf(lam: int, M: int) -> np.ndarray:
    half = (M + 1) // 2
    return np.array([[1.0 if lam < half else (0.5 if lam == half else 0.0)]])


def _sdirk2_stiffacc_fs(lam: int, M: int) -> np.ndarray:
    g = SDIRK2_GAMMA
    if lam == M:
        row2 = [1.0 - g, g]
    else:
        row2 = [lam / M, 0.0]
    return np.array([[(lam - 1.0 + g) / M, 0.0], row2])


def _sdirk2_stiffacc_sf(lam: int, M: int) -> np.ndarray:
    g = SDIRK2_GAMMA
    return np.array([[M * g if lam == 1 else 0.0, 0.0], [1.0 - g, g]])


def _sdirk2_kr_fs(lam: int, M: int) -> np.ndarray:
    g = SDIRK2_GAMMA
    a12 = 0.0 if lam == 1 else (lam - 1.0) * (1.0 - 2.0 * g) / M
    return np.array(
        [
            [g * (2.0 * lam - 1.0) / M, a12],
            [(1.0 - 3.0 * g + 2.0 * g * lam) / M, (3.0 * g - 1.0 + (1.0 - 2.0 * g) * lam) / M],
        ]
    )


def _sdirk2_kr_sf(lam: int, M: int) -> np.ndarray:
    g = SDIRK2_GAMMA
    if lam == 1:
        return M * np.array([[g, 0.0], [1.0 - g, g]])
    return np.zeros((2, 2))


# ---------------------------------------------------------------------------
# compound-fast coupling families
# ---------------------------------------------------------------------------


def _cf_sdirk2_fs(lam: int, M: int) -> np.ndarray:
    g = SDIRK2_GAMMA
    den = M * (g - 1.0)
    return np.array(
        [
            [
                (-g * ((M - 2.0) * g + 3.0) + (2.0 * g - 1.0) * lam + 1.0) / den,
                g * ((M - 1.0) * g - lam + 1.0) / den,
            ],
            [
                (M * g * g - 2.0 * lam * g + lam) / (M - M * g),
                g * (M * g - lam) / den,
            ],
        ]
    )


def _cf_sdirk3_fs(lam: int, M: int) -> np.ndarray:
    g = sdirk3_gamma()
    L = float(lam)
    M = float(M)
    g2, g3 = g * g, g**3
    g4, g5 = g**4, g**5
    den = (g - 1.0) * (6.0 * g2 - 20.0 * g + 5.0) * M * M

    a11 = (
        (6 * g2 - 24 * g + 5) * (2 * g2 + 2 * g * (L - 1) + (L - 1) ** 2)
        - 8 * g3 * M**2
        - (6 * g3 - 30 * g2 - 15 * g + 5) * M * (g + L - 1)
    ) / den
    a12 = (
        -5 * (L - 1) ** 2
        + 12 * g4 * (M - 1)
        + 4 * g3 * (M - 1) * (3 * L + 4 * M - 17)
        + g2 * (-6 * L**2 + 68 * L + (82 - 72 * L) * M - 72)
        + 2 * g * (L - 1) * (14 * L + 5 * M - 19)
    ) / den
    a13 = -4 * g * ((L - 1) ** 2 + 2 * g2 * (M - 1) ** 2 - 2 * g * (L - 1) * (2 * M - 1)) / den

    a21 = -(
        -2 * (6 * g2 - 24 * g + 5) * (g * (L + 1) + (L - 1) * L)
        + 16 * g3 * M**2
        + (6 * g3 - 30 * g2 - 15 * g + 5) * M * (g + 2 * L - 1)
    ) / (2 * den)
    a22 = (
        g * (28 * L**2 - 33 * L + 5 * (2 * L - 1) * M - 5)
        + 2 * g3 * (8 * M**2 - 3 * (L + 1) + 3 * (2 * L - 7) * M)
        + 6 * g4 * M
        - 5 * (L - 1) * L
        + g2 * (-6 * L**2 + 34 * L + (41 - 72 * L) * M + 28)
    ) / den
    a23 = -4 * g * ((L - 1) * L + 2 * g2 * (M - 1) * M + g * (L + (2 - 4 * L) * M + 1)) / den

    a31 = (
        -36 * g5
        + 252 * g4
        + 20 * L**2
        - 4 * g3 * (8 * M**2 + 6 * L * M + 129)
        + 24 * g2 * (L**2 + 5 * L * M + 13)
        + g * (-96 * L**2 + 60 * L * M - 69)
        - 20 * L * M
        + 5
    ) / (4 * den)
    a32 = (
        36 * g5
        - 276 * g4
        - 5 * (4 * L**2 + 1)
        + g3 * (64 * M**2 + 48 * L * M + 588)
        - 12 * g2 * (2 * L**2 + 24 * L * M + 29)
        + g * (112 * L**2 + 40 * L * M + 73)
    ) / (4 * den)
    a33 = g * (6 * g3 - 4 * L**2 - 2 * g2 * (4 * M**2 + 9) + g * (16 * L * M + 9) - 1) / den

    return np.array([[a11, a12, a13], [a21, a22, a23], [a31, a32, a33]])


def _cf_sdirk4_fs(lam: int, M: int) -> np.ndarray:
    L = float(lam)
    M = float(M)
    M2, M3, M4 = M * M, M**3, M**4
    out = np.empty((5, 5))

    p = 64 * L**4 - 192 * L**3 + 240 * L**2 - 148 * L + 37
    q = 64 * L**3 - 144 * L**2 + 120 * L - 37
    r = 8 * L**2 - 12 * L + 5
    s = 4 * L - 3
    out[0, 0] = (-165 * p + 2688 * s * M3 - 3408 * r * M2 + 448 * q * M) / (1836 * M4)
    out[0, 1] = (1110 * p - 1296 * M4 - 2292 * s * M3 + 8781 * r * M2 - 2101 * q * M) / (22464 * M4)
    out[0, 2] = -125 * (-33 * p + 336 * s * M3 - 552 * r * M2 + 83 * q * M) / (22464 * M4)
    out[0, 3] = 1331 * (-5 * p + 32 * s * M3 - 60 * r * M2 + 11 * q * M) / (56576 * M4)
    out[0, 4] = (-85 * p + 192 * M4 + 16 * s * M3 - 648 * r * M2 + 175 * q * M) / (3328 * M4)

    p = 64 * L**4 - 48 * L**2 + 68 * L - 17
    q = 64 * L**3 - 24 * L + 17
    r = 8 * L**2 - 1
    out[1, 0] = (-165 * p + 10752 * L * M3 - 3408 * r * M2 + 448 * q * M) / (1836 * M4)
    out[1, 1] = (1110 * p - 1296 * M4 - 9168 * L * M3 + 8781 * r * M2 - 2101 * q * M) / (22464 * M4)
    out[1, 2] = -125 * (-33 * p + 1344 * L * M3 - 552 * r * M2 + 83 * q * M) / (22464 * M4)
    out[1, 3] = 1331 * (-5 * p + 128 * L * M3 - 60 * r * M2 + 11 * q * M) / (56576 * M4)
    out[1, 4] = (-85 * p + 192 * M4 + 64 * L * M3 - 648 * r * M2 + 175 * q * M) / (3328 * M4)

    p = 32000 * L**4 - 76800 * L**3 + 84720 * L**2 - 56180 * L + 15773
    q = 6400 * L**3 - 11520 * L**2 + 8472 * L - 2809
    r = 800 * L**2 - 960 * L + 353
    s = 5 * L - 3
    out[2, 0] = (-33 * p + 215040 * s * M3 - 3408 * r * M2 + 448 * q * M) / (183600 * M4)
    out[2, 1] = (222 * p - 129600 * M4 - 183360 * s * M3 + 8781 * r * M2 - 2101 * q * M) / (2246400 * M4)
    out[2, 2] = (33 * p - 134400 * s * M3 + 2760 * r * M2 - 415 * q * M) / (89856 * M4)
    out[2, 3] = 1331 * (-p + 2560 * s * M3 - 60 * r * M2 + 11 * q * M) / (5657600 * M4)
    out[2, 4] = (-17 * p + 19200 * M4 + 1280 * s * M3 - 648 * r * M2 + 175 * q * M) / (332800 * M4)

    p = 425920 * L**4 - 619520 * L**3 + 280720 * L**2 - 35660 * L + 2387
    q = 85184 * L**3 - 92928 * L**2 + 28072 * L - 1783
    r = 264 * L**2 - 192 * L + 29
    s = 11 * L - 4
    out[3, 0] = (-33 * p + 1300992 * s * M3 - 137456 * r * M2 + 448 * q * M) / (2443716 * M4)
    out[3, 1] = (222 * p - 1724976 * M4 - 1109328 * s * M3 + 354167 * r * M2 - 2101 * q * M) / (29899584 * M4)
    out[3, 2] = -25 * (-33 * p + 813120 * s * M3 - 111320 * r * M2 + 415 * q * M) / (29899584 * M4)
    out[3, 3] = (-p + 15488 * s * M3 - 2420 * r * M2 + 11 * q * M) / (56576 * M4)
    out[3, 4] = (-17 * p + 255552 * M4 + 7744 * s * M3 - 26136 * r * M2 + 175 * q * M) / (4429568 * M4)

    out[4, 0] = 16 * L * (-165 * L**3 + 168 * M3 - 426 * L * M2 + 448 * L**2 * M) / (459 * M4)
    out[4, 1] = -(-8880 * L**4 + 162 * M4 + 1146 * L * M3 - 8781 * L**2 * M2 + 16808 * L**3 * M) / (2808 * M4)
    out[4, 2] = 125 * L * (33 * L**3 - 21 * M3 + 69 * L * M2 - 83 * L**2 * M) / (351 * M4)
    out[4, 3] = 1331 * L * (-10 * L**3 + 4 * M3 - 15 * L * M2 + 22 * L**2 * M) / (1768 * M4)
    out[4, 4] = (-85 * L**4 + 3 * M4 + L * M3 - 81 * L**2 * M2 + 175 * L**3 * M) / (52 * M4)
    return out


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


def _standard(name, base, fs, sf, order, consistent, constraint="any", not_recommended=False):
    return MrGarkScheme(
        kind=SchemeKind.STANDARD,
        fast_base=base,
        slow_base=base,
        coupling=CouplingFamily(fs=fs, sf=sf, m_constraint=constraint),
        order=order,
        internally_consistent=consistent,
        name=name,
        not_recommended=not_recommended,
    )


def _compound_fast(name, base, fs, order):
    return MrGarkScheme(
        kind=SchemeKind.COMPOUND_FAST,
        fast_base=base,
        slow_base=base,
        coupling=CouplingFamily(fs=fs, sf=None, m_constraint="any"),
        order=order,
        internally_consistent=True,
        name=name,
    )


_FACTORIES = {
    "BE-coupled": lambda: _standard(
        "BE-coupled", backward_euler(), _be_coupled_fs, _be_coupled_sf, 1, False
    ),
    "BE-decoupled": lambda: _standard(
        "BE-decoupled", backward_euler(), _be_decoupled_fs, _be_decoupled_sf, 1, False,
        constraint="even-preferred",
    ),
    "Midpoint-coupled": lambda: _standard(
        "Midpoint-coupled", implicit_midpoint(), _midpoint_coupled_fs, _midpoint_coupled_sf,
        2, False, constraint="odd",
    ),
    "Midpoint-decoupled": lambda: _standard(
        "Midpoint-decoupled", implicit_midpoint(), _be_decoupled_fs, _be_decoupled_sf,
        2, False, constraint="even-preferred",
    ),
    "SDIRK2-stiffacc": lambda: _standard(
        "SDIRK2-stiffacc", sdirk2(), _sdirk2_stiffacc_fs, _sdirk2_stiffacc_sf, 2, True,
        not_recommended=True,
    ),
    "SDIRK2-KR": lambda: _standard(
        "SDIRK2-KR", sdirk2(), _sdirk2_kr_fs, _sdirk2_kr_sf, 2, True, not_recommended=True,
    ),
    "CF-SDIRK2": lambda: _compound_fast("CF-SDIRK2", sdirk2(), _cf_sdirk2_fs, 2),
    "CF-SDIRK3": lambda: _compound_fast("CF-SDIRK3", sdirk3(), _cf_sdirk3_fs, 3),
    "CF-SDIRK4": lambda: _compound_fast("CF-SDIRK4", sdirk4(), _cf_sdirk4_fs, 4),
}

#: names accepted by :func:`make_method`, in catalog order
CATALOG = tuple(_FACTORIES)


@lru_cache(maxsize=None)
def make_method(name: str) -> MrGarkScheme:
    """Build a catalog scheme by name."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise CatalogError(
            f"unknown method {name!r}; available: {', '.join(CATALOG)}"
        ) from None
    return factory()


def coupling_entry(name: str, direction: str, lam: int, M: int, i: int, j: int) -> float:
    """Evaluate one coupling coefficient; ``i``/``j`` are 1-based stage indices."""
    scheme = make_method(name)
    scheme.coupling.check(M)
    if not 1 <= lam <= M:
        raise IndexError(f"micro-step index {lam} outside 1..{M}")
    if direction == "fs":
        block = scheme.coupling.fs(lam, M)
    elif direction == "sf":
        if scheme.coupling.sf is None:
            raise ValueError(f"{name} has no free slow-fast coupling (compound-fast)")
        block = scheme.coupling.sf(lam, M)
    else:
        raise ValueError(f"direction must be 'fs' or 'sf', got {direction!r}")
    if not (1 <= i <= block.shape[0] and 1 <= j <= block.shape[1]):
        raise IndexError(f"entry ({i},{j}) outside {block.shape} block")
    return float(block[i - 1, j - 1])


@lru_cache(maxsize=None)
def single_rate_scheme(base_name: str) -> MrGarkScheme:
    """Embed a base method as an M=1 scheme that integrates f_fast + f_slow.

    Both coupling blocks equal the base stage matrix, so each stage pair
    collapses to the single-rate stage equation on the summed right-hand
    side; used for reference solutions and single-rate baselines.
    """
    base = {
        "BE": backward_euler,
        "Midpoint": implicit_midpoint,
        "SDIRK2": sdirk2,
        "SDIRK3": sdirk3,
        "SDIRK4": sdirk4,
    }.get(base_name)
    if base is None:
        raise CatalogError(f"unknown base method {base_name!r}")
    tab = base()
    return _standard(
        f"{base_name}-singlerate", tab,
        fs=lambda lam, M: tab.A, sf=lambda lam, M: tab.A,
        order={"BE": 1, "Midpoint": 2, "SDIRK2": 2, "SDIRK3": 3, "SDIRK4": 4}[base_name],
        consistent=True, constraint="single-rate",
    )
