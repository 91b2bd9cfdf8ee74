"""Geometric grid on (0, r_max] with the r dr measure, and the radial
finite-difference operators built on it.

The grid is log-uniform: r_i = r_min * (r_max/r_min)^(i/(n-1)).  Quadrature
against the measure r dr (or r^p dr) is trapezoid rule in the log variable,
which is second order in the log spacing.  Derivative and operator stencils
are exact 3-point formulas on the non-uniform nodes (not uniform-grid
formulas applied in log space), closed with geometric ghost nodes at both
ends carrying Dirichlet data.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded

from .errors import ConfigurationError, ContractViolation


class RadialGrid:
    """Immutable geometric node set with r dr quadrature weights.

    Operator bands and matrices are built lazily and cached; the instance
    is safe to share across threads after construction.
    """

    def __init__(self, r_min: float, r_max: float, n: int):
        if r_min <= 0:
            raise ConfigurationError(f"r_min must be positive, got {r_min}")
        if r_max <= r_min:
            raise ConfigurationError(f"need r_min < r_max, got {r_min}, {r_max}")
        if n < 16:
            raise ConfigurationError(f"need at least 16 nodes, got {n}")
        self.r_min = float(r_min)
        self.r_max = float(r_max)
        self.n = int(n)
        x = np.linspace(np.log(r_min), np.log(r_max), n)
        self.log_step = x[1] - x[0]
        self.nodes = np.exp(x)
        self.nodes[0] = r_min
        self.nodes[-1] = r_max
        # trapezoid weights in the log variable
        tw = np.full(n, self.log_step)
        tw[0] = tw[-1] = 0.5 * self.log_step
        self._trapz_log = tw
        # weights for  integral f(r) r dr  =  integral f e^{2x} dx
        self.weights = tw * self.nodes**2
        self.ratio = self.nodes[1] / self.nodes[0]
        self._cache: dict = {}

    def integrate(self, samples: np.ndarray, power: int = 1) -> float:
        """Quadrature of  integral f(r) r^power dr  from nodal samples."""
        if power == 1:
            return float(np.dot(self.weights, samples))
        return float(np.dot(self._trapz_log * self.nodes ** (power + 1), samples))

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """L^2(r dr) inner product of two sample vectors."""
        return float(np.dot(self.weights, a * b))

    def lp_norm(self, samples: np.ndarray, p: float) -> float:
        """L^p(r dr) norm (p = inf gives the sup norm)."""
        if np.isinf(p):
            return float(np.max(np.abs(samples)))
        return self.integrate(np.abs(samples) ** p) ** (1.0 / p)

    # ---- stencil machinery -------------------------------------------

    def _spacings(self):
        """Node spacings including the geometric ghost nodes."""
        try:
            return self._cache["spacings"]
        except KeyError:
            pass
        r = self.nodes
        r_ghost_in = r[0] / self.ratio
        r_ghost_out = r[-1] * self.ratio
        rm = np.concatenate(([r_ghost_in], r[:-1]))
        rp = np.concatenate((r[1:], [r_ghost_out]))
        hm = r - rm
        hp = rp - r
        self._cache["spacings"] = (hm, hp)
        return hm, hp

    def derivative_coeffs(self):
        """Interior 3-point first-derivative coefficients (c_minus, c_0, c_plus)."""
        hm, hp = self._spacings()
        cm = -hp / (hm * (hm + hp))
        c0 = (hp - hm) / (hm * hp)
        cp = hm / (hp * (hm + hp))
        return cm, c0, cp

    def operator_bands(self, advection: float, inv_square: float):
        """Bands (sub, diag, sup) of  d^2/dr^2 + (advection/r) d/dr - inv_square/r^2.

        Row 0's sub entry multiplies the inner ghost value, row n-1's sup
        entry the outer ghost value.  advection = 1, inv_square = m^2 gives
        the singular radial operator of degree m; advection = d-1,
        inv_square = 0 gives the radial Laplacian in d dimensions.
        """
        key = ("bands", advection, inv_square)
        try:
            return self._cache[key]
        except KeyError:
            pass
        hm, hp = self._spacings()
        r = self.nodes
        dm = 2.0 / (hm * (hm + hp))
        d0 = -2.0 / (hm * hp)
        dp = 2.0 / (hp * (hm + hp))
        cm, c0, cp = self.derivative_coeffs()
        sub = dm + advection * cm / r
        diag = d0 + advection * c0 / r - inv_square / r**2
        sup = dp + advection * cp / r
        self._cache[key] = (sub, diag, sup)
        return sub, diag, sup

    def apply_operator(self, values, advection, inv_square,
                       ghost_inner=0.0, ghost_outer=0.0):
        """Apply the 3-point operator with Dirichlet ghost closures."""
        sub, diag, sup = self.operator_bands(advection, inv_square)
        vm = np.concatenate(([ghost_inner], values[:-1]))
        vp = np.concatenate((values[1:], [ghost_outer]))
        return sub * vm + diag * values + sup * vp

    def solve_shifted(self, rhs, alpha, advection, inv_square,
                      ghost_inner=0.0, ghost_outer=0.0):
        """Solve (I - alpha*Op) u = rhs with Dirichlet ghost values.

        For alpha > 0 the system is strictly diagonally dominant (the
        off-diagonal operator entries are positive on a geometric grid with
        log spacing < 2), hence nonsingular.
        """
        sub, diag, sup = self.operator_bands(advection, inv_square)
        n = self.n
        ab = np.zeros((3, n))
        ab[0, 1:] = -alpha * sup[:-1]
        ab[1, :] = 1.0 - alpha * diag
        ab[2, :-1] = -alpha * sub[1:]
        b = np.asarray(rhs, dtype=float).copy()
        if ghost_inner != 0.0:
            b[0] += alpha * sub[0] * ghost_inner
        if ghost_outer != 0.0:
            b[-1] += alpha * sup[-1] * ghost_outer
        return solve_banded((1, 1), ab, b)

    def derivative_matrix(self) -> sp.csr_matrix:
        """Sparse first-derivative matrix: centered interior rows, one-sided
        second-order rows at both ends (no ghost data)."""
        try:
            return self._cache["dmat"]
        except KeyError:
            pass
        n = self.n
        r = self.nodes
        cm, c0, cp = self.derivative_coeffs()
        rows, cols, vals = [], [], []
        for i in range(1, n - 1):
            rows += [i, i, i]
            cols += [i - 1, i, i + 1]
            vals += [cm[i], c0[i], cp[i]]
        # one-sided ends
        h1 = r[1] - r[0]
        h2 = r[2] - r[1]
        rows += [0, 0, 0]
        cols += [0, 1, 2]
        vals += [-(2 * h1 + h2) / (h1 * (h1 + h2)),
                 (h1 + h2) / (h1 * h2),
                 -h1 / (h2 * (h1 + h2))]
        g1 = r[-1] - r[-2]
        g2 = r[-2] - r[-3]
        rows += [n - 1, n - 1, n - 1]
        cols += [n - 1, n - 2, n - 3]
        vals += [(2 * g1 + g2) / (g1 * (g1 + g2)),
                 -(g1 + g2) / (g1 * g2),
                 g1 / (g2 * (g1 + g2))]
        mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        self._cache["dmat"] = mat
        return mat

    def __repr__(self):
        return (f"RadialGrid(r_min={self.r_min:g}, r_max={self.r_max:g}, "
                f"n={self.n})")


@dataclass
class RadialField:
    """Sampled angle u(r_i) with its boundary-sector labels.

    inner_limit is the value of u at the origin (0 or pi); outer_limit is
    fixed to 0 for all fields this toolkit produces.  Linear operators act
    on the offset u - inner_limit, whose inner Dirichlet value is the
    analytic leading behavior 0.
    """

    grid: RadialGrid
    values: np.ndarray
    inner_limit: float = 0.0
    outer_limit: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise ContractViolation(
                f"values shape {self.values.shape} does not match grid n={self.grid.n}")
        if not np.all(np.isfinite(self.values)):
            raise ContractViolation("field values must be finite")
        if self.inner_limit not in (0.0, np.pi):
            raise ContractViolation(
                f"inner_limit must be 0 or pi, got {self.inner_limit}")

    def offset(self) -> np.ndarray:
        """Values measured from the inner limit (the operator variable)."""
        return self.values - self.inner_limit

    def outer_ghost_offset(self) -> float:
        return self.outer_limit - self.inner_limit

    def with_values(self, values, inner_limit=None, outer_limit=None) -> "RadialField":
        return RadialField(
            self.grid, values,
            self.inner_limit if inner_limit is None else inner_limit,
            self.outer_limit if outer_limit is None else outer_limit)

    def copy(self) -> "RadialField":
        return RadialField(self.grid, self.values.copy(),
                           self.inner_limit, self.outer_limit)


def build_grid(r_min: float, r_max: float, n: int) -> RadialGrid:
    """Geometric grid on [r_min, r_max] with r dr quadrature weights."""
    return RadialGrid(r_min, r_max, n)


def same_grid(a: RadialField, b: RadialField) -> None:
    if a.grid is not b.grid and (a.grid.n != b.grid.n
                                 or a.grid.r_min != b.grid.r_min
                                 or a.grid.r_max != b.grid.r_max):
        raise ContractViolation("fields live on different grids")


def differentiate(field: RadialField) -> RadialField:
    """d/dr of the samples: centered interior, one-sided at the ends."""
    if field.grid.n < 3:
        raise ContractViolation("differentiate needs at least 3 nodes")
    du = field.grid.derivative_matrix() @ field.values
    return RadialField(field.grid, du)


def apply_delta_m(field: RadialField, m: int) -> RadialField:
    """The singular operator (d^2/dr^2 + (1/r) d/dr - m^2/r^2) u.

    The stencil acts on the offset u - inner_limit with Dirichlet ghost
    closures (0 inside, outer_limit - inner_limit outside); the exact
    -m^2 * inner_limit / r^2 contribution of the constant is restored
    afterwards, so the returned samples are the true operator values.
    """
    if m < 1 or m != int(m):
        raise ContractViolation(f"degree m must be a positive integer, got {m}")
    g = field.grid
    out = g.apply_operator(field.offset(), 1.0, float(m * m),
                           ghost_inner=0.0,
                           ghost_outer=field.outer_ghost_offset())
    if field.inner_limit != 0.0:
        out = out - m * m * field.inner_limit / g.nodes**2
    return RadialField(g, out)


def solve_helmholtz(rhs: RadialField, m: int, alpha: float) -> RadialField:
    """Solve (I - alpha * Delta_m) u = rhs with zero Dirichlet closures."""
    if alpha <= 0:
        raise ContractViolation(f"alpha must be positive, got {alpha}")
    if m < 1 or m != int(m):
        raise ContractViolation(f"degree m must be a positive integer, got {m}")
    u = rhs.grid.solve_shifted(rhs.values, alpha, 1.0, float(m * m))
    return RadialField(rhs.grid, u)


def origin_exponent(field: RadialField) -> float:
    """Leading exponent p of u - inner_limit ~ r^p near r_min, by log-log fit
    over the first decade of nodes with non-negligible offset."""
    off = np.abs(field.offset())
    scale = np.max(off)
    if scale == 0.0:
        return np.nan
    k = max(int(1.0 / field.grid.log_step), 8)  # about one decade
    r = field.grid.nodes[:k]
    o = off[:k]
    ok = o > 1e-13 * scale
    if np.count_nonzero(ok) < 4:
        return np.nan
    p = np.polyfit(np.log(r[ok]), np.log(o[ok]), 1)
    return float(p[0])
