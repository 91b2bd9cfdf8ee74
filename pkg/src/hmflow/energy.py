"""Energies, norms, sector classification and concentration monitors.

All integrals are against the measure r dr on the half-line.  The degree m
enters every functional and is passed explicitly (fields do not carry it).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ContractViolation, SectorError
from .grid import RadialField, differentiate

E0_LABEL = "E0"
E1_LABEL = "E1"
OTHER_LABEL = "Other"


@dataclass
class EnergyBreakdown:
    total: float
    dirichlet: float
    potential: float
    window: Optional[Tuple[float, float, float]] = None  # (r1, r2, windowed E)
    exterior: Optional[Tuple[float, float]] = None       # (R, exterior E)


@dataclass
class SectorClass:
    label: str
    delta1: Optional[float] = None  # margin 2 E(Q) - E(u) for E0 data


def _energy_density(field: RadialField, m: int) -> np.ndarray:
    u_r = differentiate(field).values
    sin_u = np.sin(field.values)
    return 0.5 * (u_r**2 + (m * sin_u / field.grid.nodes) ** 2)


def energy(field: RadialField, m: int,
           r1: Optional[float] = None, r2: Optional[float] = None) -> EnergyBreakdown:
    """Energy (u_r^2 + m^2 sin^2 u / r^2)/2 integrated over r dr.

    With r1/r2 given, additionally reports the energy restricted to nodes in
    [r1, r2); windows built from half-open node masks add up exactly.
    """
    g = field.grid
    u_r = differentiate(field).values
    sin_u = np.sin(field.values)
    dir_dens = 0.5 * u_r**2
    pot_dens = 0.5 * (m * sin_u / g.nodes) ** 2
    dirichlet = float(np.dot(g.weights, dir_dens))
    potential = float(np.dot(g.weights, pot_dens))
    out = EnergyBreakdown(dirichlet + potential, dirichlet, potential)
    if r1 is not None or r2 is not None:
        lo = 0.0 if r1 is None else r1
        hi = np.inf if r2 is None else r2
        if not lo < hi:
            raise ContractViolation(f"need r1 < r2, got {lo}, {hi}")
        mask = (g.nodes >= lo) & (g.nodes < hi)
        ew = float(np.dot(g.weights[mask], dir_dens[mask] + pot_dens[mask]))
        out.window = (lo, hi, ew)
    return out


def x2_norm(field: RadialField, m: int) -> float:
    """Energy-space norm: sqrt of  integral (u_r^2 + m^2 u^2/r^2) r dr."""
    g = field.grid
    u_r = differentiate(field).values
    sq = g.integrate(u_r**2 + (m * field.values / g.nodes) ** 2)
    return float(np.sqrt(max(sq, 0.0)))


def xp_norm(field: RadialField, m: int, p: float) -> float:
    """||u_r||_p^p + m^p ||u/r||_p^p to the 1/p (sum of sups at p = inf)."""
    if p < 1:
        raise ContractViolation(f"need p >= 1, got {p}")
    g = field.grid
    u_r = differentiate(field).values
    if np.isinf(p):
        return g.lp_norm(u_r, p) + g.lp_norm(field.values / g.nodes, p)
    return float((g.lp_norm(u_r, p) ** p
                  + m**p * g.lp_norm(field.values / g.nodes, p) ** p) ** (1.0 / p))


def rlp_norm(field: RadialField, p: float) -> float:
    """||u/r||_{L^p(r dr)}."""
    if p < 1:
        raise ContractViolation(f"need p >= 1, got {p}")
    return field.grid.lp_norm(field.values / field.grid.nodes, p)


def classify(field: RadialField, m: int) -> SectorClass:
    """Sector of the field from its boundary labels and energy.

    Thresholds use the exact bubble energy 2m: the below-threshold sector
    requires E < 4m with zero boundary limits; the degree-m sector requires
    2m <= E <= 6m with inner limit pi.
    """
    e = energy(field, m).total
    eq = 2.0 * m
    if field.inner_limit == 0.0 and field.outer_limit == 0.0 and e < 2 * eq:
        return SectorClass(E0_LABEL, delta1=2 * eq - e)
    if field.inner_limit == np.pi and field.outer_limit == 0.0 and eq * (1 - 1e-9) <= e <= 3 * eq:
        return SectorClass(E1_LABEL)
    return SectorClass(OTHER_LABEL)


def g_functional(u, m: int):
    """G(u) = integral of m |sin| from 0 to u: odd, increasing, G(pi) = 2m."""
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    k = np.floor(a / np.pi)
    v = a - k * np.pi
    return np.sign(u) * m * (2.0 * k + 1.0 - np.cos(v))


def g_inverse(y, m: int):
    """Inverse of the monotone functional G, computed from the closed form."""
    y = np.asarray(y, dtype=float)
    a = np.abs(y)
    k = np.floor(a / (2.0 * m))
    rem = a - 2.0 * m * k
    v = np.arccos(np.clip(1.0 - rem / m, -1.0, 1.0))
    return np.sign(y) * (k * np.pi + v)


def pointwise_bound_check(field: RadialField, m: int, delta1: float):
    """Pointwise sup bound that below-threshold data must satisfy.

    For a field in the zero-degree sector with E(u) <= 4m - delta1, returns
    (delta2, ok) where delta2 = pi - G^{-1}(2m - delta1/2) and ok checks
    sup |u| <= pi - delta2 on the nodes.
    """
    if delta1 <= 0:
        raise ContractViolation(f"delta1 must be positive, got {delta1}")
    sector = classify(field, m)
    if sector.label != E0_LABEL:
        raise SectorError(f"pointwise bound applies to {E0_LABEL} data, "
                          f"field classifies as {sector.label}")
    if energy(field, m).total > 4.0 * m - delta1 + 1e-12:
        raise SectorError("field energy exceeds 4m - delta1")
    delta2 = np.pi - float(g_inverse(2.0 * m - 0.5 * delta1, m))
    ok = bool(np.max(np.abs(field.values)) <= np.pi - delta2 + 1e-12)
    return delta2, ok


def topological_bound_gap(field: RadialField, m: int) -> float:
    """E(u) - 2 |degree|, the gap in the topological energy lower bound.

    The degree m (cos u(inf) - cos u(0)) / 2 is computed from the boundary
    labels, which must be multiples of pi.  Equals the Bogomolny integral
    (1/2) integral (u_r +/- (m/r) sin u)^2 r dr up to quadrature error.
    """
    for lim in (field.inner_limit, field.outer_limit):
        if abs(lim / np.pi - round(lim / np.pi)) > 1e-12:
            raise ContractViolation(f"boundary limit {lim} is not a multiple of pi")
    degree = m * (np.cos(field.outer_limit) - np.cos(field.inner_limit)) / 2.0
    gap = energy(field, m).total - 2.0 * abs(degree)
    e_tot = max(energy(field, m).total, 1.0)
    if gap < -1e-6 * e_tot:
        raise ContractViolation(f"topological bound violated: gap = {gap}")
    return gap


def smoothstep(x):
    """Cubic 0 -> 1 transition on [0, 1]."""
    t = np.clip(x, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def exterior_energy(field: RadialField, m: int, R: float) -> float:
    """Energy weighted by the cutoff psi(r/R), psi = 0 below 1 and 1 above 2
    with a cubic smoothstep between; monitors concentration at infinity."""
    g = field.grid
    if not (g.r_min < R < g.r_max):
        raise ContractViolation(f"R = {R} outside ({g.r_min}, {g.r_max})")
    psi = smoothstep(g.nodes / R - 1.0)
    return float(np.dot(g.weights, psi * _energy_density(field, m)))
