"""Entropy functional, dissipation, metric norm and flow audits.

The free energy of a density u is

    E(u) = integral( eta(u) + phi * u ),
    eta(r) = integral_0^r g(s) ds,   g(s) = integral_1^s beta'(t) / (t b(t)) dt.

Along the evolution the energy decays with rate given by the dissipation

    Psi(u) = integral |beta'(u) grad(u) / sqrt(b*(u)) - D sqrt(b*(u))|^2,

which coincides with the squared metric norm of the flow velocity: with
the entropy potential y_u = g(u) + phi one has
b*(u) |grad y_u|^2 = |beta'(u) grad u / sqrt(b*(u)) - D sqrt(b*(u))|^2
pointwise, so ``metric_norm_sq(u, y_u) == dissipation(u)`` up to
quadrature.  `gradient_flow_audit` checks dE/dt = -Psi along a recorded
trajectory.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import PchipInterpolator

from .errors import GridMismatchError
from .grid import (
    DensityField,
    ScalarField,
    SpatialGrid,
    _axis_slices,
    _face_drift,
    apply_A,
    phi_at_centers,
)
from .model import ModelSpec, b_star

__all__ = [
    "EtaTable",
    "EnergyReport",
    "eta",
    "eta_table",
    "energy",
    "dissipation",
    "gradient",
    "metric_norm_sq",
    "metric_norm_sq_matched",
    "entropy_potential",
    "flux_face_slopes",
    "gradient_flow_audit",
    "AuditTable",
    "FACE_FLOOR",
]

# faces whose average density is below this contribute nothing to the
# dissipation / metric quadratures (the continuum integrands are 0/0 on
# null-density sets)
FACE_FLOOR = 1e-12


class EtaTable:
    """Tabulated entropy integrand and its antiderivative.

    ``g`` is integrated in the log variable p = log(s), where the
    integrand beta'(e^p)/b(e^p) is smooth and bounded, so the
    logarithmic singularity of g near s = 0 is captured exactly for the
    leading term.  Below ``s_min`` the closed-form log extension
    g(s) = g(s_min) + c0 log(s / s_min), c0 = beta'(0)/b(0), is used;
    its contribution to eta on (0, s_min] is s_min (g(s_min) - c0).
    Interpolation between nodes is monotone cubic (PCHIP).
    """

    def __init__(self, spec: ModelSpec, s_min: float = 1e-14,
                 s_max: float = 1e6, n_nodes: int = 8192):
        p_lo, p_hi = np.log(s_min), np.log(s_max)
        p = np.linspace(p_lo, p_hi, n_nodes)
        # force p = 0 (s = 1) onto the grid so g(1) = 0 exactly
        i1 = int(np.argmin(np.abs(p)))
        p[i1] = 0.0
        s = np.exp(p)
        s[i1] = 1.0

        integrand = spec.beta.deriv(s) / spec.b(s)
        g_cum = cumulative_simpson(integrand, x=p, initial=0.0)
        g = g_cum - g_cum[i1]
        g[i1] = 0.0

        self.c0 = float(spec.beta.deriv(0.0) / spec.b(0.0))
        self.s_min = float(s_min)
        self.s_max = float(s_max)
        tail = s_min * (g[0] - self.c0)
        eta_nodes = tail + cumulative_simpson(g, x=s, initial=0.0)

        self._g_interp = PchipInterpolator(s, g, extrapolate=False)
        self._eta_interp = PchipInterpolator(s, eta_nodes, extrapolate=False)
        self._g0 = float(g[0])

    def g(self, r):
        """Entropy integrand g(r); log extension below ``s_min``."""
        r = np.asarray(r, dtype=float)
        small = r < self.s_min
        safe = np.maximum(r, self.s_min)
        out = self._g_interp(np.minimum(safe, self.s_max))
        if np.any(small):
            rs = np.maximum(r, 1e-300)
            out = np.where(small, self._g0 + self.c0 * np.log(rs / self.s_min), out)
        return out

    def eta(self, r):
        """Convex entropy density eta(r), eta(0) = 0."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("eta: negative argument")
        if np.any(r > self.s_max):
            raise ValueError("eta: argument above table range")
        small = r < self.s_min
        out = self._eta_interp(np.maximum(r, self.s_min))
        if np.any(small):
            out = np.where(small, r * (self.g(r) - self.c0), out)
        return out


@functools.lru_cache(maxsize=16)
def eta_table(spec: ModelSpec) -> EtaTable:
    return EtaTable(spec)


def eta(spec: ModelSpec, r):
    """Entropy density eta(r) for r >= 0."""
    out = eta_table(spec).eta(r)
    return float(out) if np.isscalar(r) or np.ndim(r) == 0 else out


@dataclass
class EnergyReport:
    entropy_part: float
    potential_part: float
    total: float
    dissipation: float
    gradient_metric_norm_sq: float


def energy(spec: ModelSpec, grid: SpatialGrid, u: DensityField) -> EnergyReport:
    """Free energy of ``u`` plus its dissipation diagnostics."""
    vals = np.maximum(u.values, 0.0)
    vol = grid.cell_volume
    ent = float(np.sum(eta_table(spec).eta(vals)) * vol)
    pot = float(np.sum(phi_at_centers(spec, grid) * vals) * vol)
    diss = dissipation(spec, grid, u)
    metric = metric_norm_sq(spec, grid, u, entropy_potential(spec, grid, u))
    return EnergyReport(
        entropy_part=ent,
        potential_part=pot,
        total=ent + pot,
        dissipation=diss,
        gradient_metric_norm_sq=metric,
    )


def flux_face_slopes(spec: ModelSpec, grid: SpatialGrid, u: DensityField):
    """Face-centered flow-potential slopes and metric weights.

    Per axis: ``(weight, slope, mask)`` with weight = b*(u_face),
    slope = beta'(u_face) grad_h(u) / b*(u_face) - D_f and mask marking
    faces above the degeneracy floor.  ``sum(weight * slope^2)`` over
    unmasked faces is exactly the dissipation quadrature.
    """
    vals = u.values
    h = grid.spacing
    drift = _face_drift(spec, grid)
    out = []
    for axis in range(grid.dim):
        sl, sr = _axis_slices(grid.dim, axis)
        ubar = 0.5 * (vals[sl] + vals[sr])
        mask = ubar >= FACE_FLOOR
        weight = b_star(spec, np.maximum(ubar, FACE_FLOOR))
        grad = (vals[sr] - vals[sl]) / h
        slope = spec.beta.deriv(ubar) * grad / weight - drift[axis]
        out.append((weight, slope, mask))
    return out


def dissipation(spec: ModelSpec, grid: SpatialGrid, u: DensityField) -> float:
    """Weighted squared entropy-flux imbalance; zero exactly at equilibrium."""
    return metric_norm_sq_matched(spec, grid, u)


def metric_norm_sq_matched(spec: ModelSpec, grid: SpatialGrid, u: DensityField) -> float:
    """Squared metric norm of the flow velocity on the dissipation stencil."""
    total = 0.0
    for weight, slope, mask in flux_face_slopes(spec, grid, u):
        total += float(np.sum(weight[mask] * slope[mask] ** 2))
    return total * grid.cell_volume


def metric_norm_sq(spec: ModelSpec, grid: SpatialGrid, u: DensityField,
                   y: ScalarField) -> float:
    """Squared tangent-space norm of ``z = -div(b*(u) grad y)``.

    Face-centered quadrature ``sum b*(u_face) |grad_h y|^2``; degenerate
    faces (density below the floor) contribute zero, so the norm of any
    constant potential is 0 and the u = 0 field gives 0 for any y.
    """
    if y.grid != grid or u.grid != grid:
        raise GridMismatchError("metric_norm_sq: fields on different grids")
    vals, yv = u.values, y.values
    h = grid.spacing
    total = 0.0
    for axis in range(grid.dim):
        sl, sr = _axis_slices(grid.dim, axis)
        ubar = 0.5 * (vals[sl] + vals[sr])
        mask = ubar >= FACE_FLOOR
        grad = (yv[sr] - yv[sl]) / h
        total += float(np.sum(b_star(spec, ubar[mask]) * grad[mask] ** 2))
    return total * grid.cell_volume


def entropy_potential(spec: ModelSpec, grid: SpatialGrid, u: DensityField) -> ScalarField:
    """Cell-centered flow potential y_u = g(u) + phi.

    The flow velocity is -div(b*(u) grad y_u); its metric norm equals the
    dissipation up to quadrature differences.
    """
    safe = np.maximum(u.values, 1e-300)
    vals = eta_table(spec).g(safe) + phi_at_centers(spec, grid)
    return ScalarField(grid, vals)


def gradient(spec: ModelSpec, grid: SpatialGrid, u: DensityField) -> ScalarField:
    """Metric gradient of the energy, ``-lap(beta(u)) + div(D b*(u))``.

    Identical to :func:`fpflow.grid.apply_A` cell by cell because
    b*(r) = b(r) r; exposed separately to make the gradient-flow
    identity explicit.
    """
    return apply_A(spec, grid, u)


# ---------------------------------------------------------------------------
# trajectory audit


@dataclass
class AuditTable:
    """Per-record comparison of centered dE/dt against -Psi."""

    times: np.ndarray
    energies: np.ndarray
    dissipations: np.ndarray
    de_dt: np.ndarray
    mismatch_rel: np.ndarray
    below_floor: np.ndarray
    energy_inequality_ok: bool
    energy_inequality_margin: float
    notes: list = field(default_factory=list)

    @property
    def median_mismatch(self) -> float:
        live = self.mismatch_rel[~self.below_floor]
        return float(np.median(live)) if live.size else 0.0

    @property
    def passed(self) -> bool:
        return self.median_mismatch <= 0.05 and self.energy_inequality_ok

    def to_rows(self):
        """Rows ``t, E, Psi, dE_dt, mismatch_rel`` for the interior records."""
        return np.column_stack([
            self.times[1:-1],
            self.energies[1:-1],
            self.dissipations[1:-1],
            self.de_dt,
            self.mismatch_rel,
        ])


def gradient_flow_audit(trajectory, spec: ModelSpec, grid: SpatialGrid,
                        floor: float = 1e-8) -> AuditTable:
    """Audit dE/dt = -Psi and the integrated energy inequality.

    The trajectory must carry at least 3 uniformly spaced records.  For
    each interior record the centered difference of the recorded energy
    is compared with -Psi; records where both sides are below ``floor``
    are flagged instead of scored.  Additionally checks
    E_j + sum_{k<=j} Psi_k dt <= E_0 + 1e-3 (1 + |E_0|).
    """
    t = np.asarray(trajectory.times, dtype=float)
    if t.size < 3:
        raise ValueError("gradient_flow_audit: need at least 3 records")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-8, atol=1e-14):
        raise ValueError("gradient_flow_audit: records are not uniformly spaced")
    e = np.asarray(trajectory.energies, dtype=float)
    psi = np.asarray(trajectory.dissipations, dtype=float)

    de_dt = (e[2:] - e[:-2]) / (2.0 * dt[0])
    rhs = -psi[1:-1]
    below = np.maximum(np.abs(de_dt), np.abs(rhs)) < floor
    mismatch = np.abs(de_dt - rhs) / np.maximum(np.abs(rhs), 1e-12)
    mismatch = np.where(below, 0.0, mismatch)

    budget = e[0] + 1e-3 * (1.0 + abs(e[0]))
    running = e + np.concatenate([[0.0], np.cumsum(psi[1:] * dt)])
    margin = float(np.max(running - budget))
    table = AuditTable(
        times=t,
        energies=e,
        dissipations=psi,
        de_dt=de_dt,
        mismatch_rel=mismatch,
        below_floor=below,
        energy_inequality_ok=margin <= 0.0,
        energy_inequality_margin=margin,
    )
    if below.all():
        table.notes.append("all records below floor (stationary trajectory)")
    return table
