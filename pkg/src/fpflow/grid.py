"""Uniform cell-centered grids, discrete operators and norms.

The computational domain is the box [-L, L]^d (d = 1 or 2) split into N
cells per axis, with zero-flux (homogeneous Neumann) boundaries so the
discrete mass is conserved exactly.  The drift-diffusion operator

    A u = -lap(beta(u)) + div(D b(u) u)

is discretized conservatively: the face flux is

    F = grad_h(beta(u)) - D_f * b*(u_f),   b*(r) = b(r) r,

with a centered two-point difference for the diffusive part and a
Peclet-switched face value u_f for the advected part: the arithmetic
average where the face Peclet number |D_f| h b*'(u) / beta'(u) is below
``PECLET_MAX`` (second-order accurate) and full upwinding on the sign of
D_f elsewhere.  Both branches keep the implicit operator an M-matrix, so
resolvent steps preserve positivity and order.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GridMismatchError, NumericsError
from .model import ModelSpec, b_star, b_star_deriv

__all__ = [
    "SpatialGrid",
    "DensityField",
    "ScalarField",
    "apply_A",
    "operator_jacobian",
    "hminus_norm",
    "helmholtz_solve",
    "laplacian_matrix",
    "l1_distance",
    "discrete_mass",
    "l2_norm",
    "uniform_density",
    "gaussian_density",
    "random_bump_density",
    "save_density_csv",
    "load_density_csv",
    "PECLET_MAX",
]

# centered faces are M-matrix-safe up to Peclet 2; keep a safety margin
PECLET_MAX = 1.8


@dataclass(frozen=True)
class SpatialGrid:
    """Cell-centered truncation of R^d with N cells per axis."""

    dim: int
    half_width: float
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("SpatialGrid: dim must be 1 or 2")
        if self.n < 8:
            raise ValueError("SpatialGrid: need at least 8 cells per axis")
        if not self.half_width > 0:
            raise ValueError("SpatialGrid: half_width must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def axis_centers(self) -> np.ndarray:
        h = self.spacing
        return -self.half_width + (np.arange(self.n) + 0.5) * h

    def centers(self) -> np.ndarray:
        """Cell-center coordinates, shape ``self.shape + (dim,)``."""
        c = self.axis_centers
        if self.dim == 1:
            return c[:, None]
        xx, yy = np.meshgrid(c, c, indexing="ij")
        return np.stack([xx, yy], axis=-1)

    def interior_face_centers(self, axis: int) -> np.ndarray:
        """Coordinates of interior faces normal to ``axis``."""
        h = self.spacing
        f = -self.half_width + np.arange(1, self.n) * h
        c = self.axis_centers
        if self.dim == 1:
            return f[:, None]
        if axis == 0:
            xx, yy = np.meshgrid(f, c, indexing="ij")
        else:
            xx, yy = np.meshgrid(c, f, indexing="ij")
        return np.stack([xx, yy], axis=-1)


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")


@dataclass
class ScalarField:
    """Per-cell scalar values on a grid."""

    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridMismatchError(
                f"field shape {self.values.shape} != grid shape {self.grid.shape}"
            )

    def copy(self):
        return type(self)(self.grid, self.values.copy())


@dataclass
class DensityField(ScalarField):
    """Cell-averaged density; nonnegative with unit discrete mass when it
    represents a probability density (checked by diagnostics, not here)."""

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def min_value(self) -> float:
        return float(self.values.min())


# ---------------------------------------------------------------------------
# face machinery


def _axis_slices(dim: int, axis: int):
    left = [slice(None)] * dim
    right = [slice(None)] * dim
    left[axis] = slice(0, -1)
    right[axis] = slice(1, None)
    return tuple(left), tuple(right)


@functools.lru_cache(maxsize=64)
def _face_drift(spec: ModelSpec, grid: SpatialGrid):
    """Normal drift component at interior faces, one array per axis."""
    out = []
    for axis in range(grid.dim):
        pts = grid.interior_face_centers(axis)
        out.append(np.ascontiguousarray(spec.drift(pts)[..., axis]))
    return out


@functools.lru_cache(maxsize=64)
def _face_indices(grid: SpatialGrid):
    """Flat cell indices on both sides of interior faces, per axis."""
    flat = np.arange(grid.size).reshape(grid.shape)
    out = []
    for axis in range(grid.dim):
        sl, sr = _axis_slices(grid.dim, axis)
        out.append((flat[sl].ravel(), flat[sr].ravel()))
    return out


@functools.lru_cache(maxsize=64)
def phi_at_centers(spec: ModelSpec, grid: SpatialGrid) -> np.ndarray:
    return np.asarray(spec.potential.phi(grid.centers()), dtype=float)


def _face_flux(spec: ModelSpec, grid: SpatialGrid, u: np.ndarray, jacobian: bool):
    """Interior-face fluxes per axis; optionally their linearization.

    Returns a list of ``(F, dF_dL, dF_dR)`` per axis (derivatives are None
    when ``jacobian`` is False).
    """
    h = grid.spacing
    drift = _face_drift(spec, grid)
    out = []
    for axis in range(grid.dim):
        sl, sr = _axis_slices(grid.dim, axis)
        uL, uR = u[sl], u[sr]
        ubar = 0.5 * (uL + uR)
        d_f = drift[axis]

        bp_min = np.minimum(spec.beta.deriv(uL), spec.beta.deriv(uR))
        peclet = np.abs(d_f) * h * b_star_deriv(spec, ubar) / bp_min
        w_right = np.where(
            peclet <= PECLET_MAX, 0.5, np.where(d_f < 0.0, 1.0, 0.0)
        )
        u_face = (1.0 - w_right) * uL + w_right * uR

        flux = (spec.beta(uR) - spec.beta(uL)) / h - d_f * b_star(spec, u_face)
        if jacobian:
            bsd = b_star_deriv(spec, u_face)
            d_left = -spec.beta.deriv(uL) / h - d_f * bsd * (1.0 - w_right)
            d_right = spec.beta.deriv(uR) / h - d_f * bsd * w_right
        else:
            d_left = d_right = None
        out.append((flux, d_left, d_right))
    return out


def apply_A(spec: ModelSpec, grid: SpatialGrid, u: DensityField) -> ScalarField:
    """Conservative discretization of ``-lap(beta(u)) + div(D b(u) u)``.

    Boundary faces carry zero flux, so the output sums to zero exactly up
    to rounding.
    """
    vals = u.values
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))[0]
        raise NumericsError(f"apply_A: non-finite density at cell {tuple(bad)}")
    h = grid.spacing
    out = np.zeros_like(vals)
    for axis, (flux, _, _) in enumerate(_face_flux(spec, grid, vals, False)):
        sl, sr = _axis_slices(grid.dim, axis)
        out[sl] -= flux / h
        out[sr] += flux / h
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))[0]
        raise NumericsError(f"apply_A: non-finite output at cell {tuple(bad)}")
    return ScalarField(grid, out)


def operator_jacobian(spec: ModelSpec, grid: SpatialGrid, u: np.ndarray) -> sp.csc_matrix:
    """Sparse Jacobian of ``u -> A_h(u)`` at the given state."""
    h = grid.spacing
    rows, cols, data = [], [], []
    idx = _face_indices(grid)
    for axis, (_, d_left, d_right) in enumerate(_face_flux(spec, grid, u, True)):
        il, ir = idx[axis]
        dl = d_left.ravel() / h
        dr = d_right.ravel() / h
        # cell left of the face: -(dF)/h ; cell right: +(dF)/h
        rows += [il, il, ir, ir]
        cols += [il, ir, il, ir]
        data += [-dl, -dr, dl, dr]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.concatenate(data)
    return sp.coo_matrix((data, (rows, cols)), shape=(grid.size, grid.size)).tocsc()


# ---------------------------------------------------------------------------
# Laplacian / Helmholtz and norms


@functools.lru_cache(maxsize=32)
def laplacian_matrix(grid: SpatialGrid) -> sp.csc_matrix:
    """Discrete Neumann Laplacian (symmetric, zero row sums)."""
    h2 = grid.spacing**2
    rows, cols, data = [], [], []
    for il, ir in _face_indices(grid):
        one = np.ones_like(il, dtype=float) / h2
        rows += [il, il, ir, ir]
        cols += [il, ir, ir, il]
        data += [-one, one, -one, one]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.concatenate(data)
    return sp.coo_matrix((data, (rows, cols)), shape=(grid.size, grid.size)).tocsc()


@functools.lru_cache(maxsize=32)
def _helmholtz_lu(grid: SpatialGrid):
    mat = sp.identity(grid.size, format="csc") - laplacian_matrix(grid)
    return spla.splu(mat)


def helmholtz_solve(grid: SpatialGrid, v: np.ndarray) -> np.ndarray:
    """Solve ``(I - lap_h) w = v`` with zero-flux boundaries."""
    return _helmholtz_lu(grid).solve(np.asarray(v, dtype=float).ravel()).reshape(grid.shape)


def hminus_norm(grid: SpatialGrid, v: ScalarField) -> float:
    """Discrete H^-1 norm ``sqrt(sum(v * (I - lap_h)^-1 v) * cellvol)``."""
    vals = v.values if isinstance(v, ScalarField) else np.asarray(v, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericsError("hminus_norm: non-finite input")
    w = helmholtz_solve(grid, vals)
    return float(np.sqrt(max(np.sum(vals * w) * grid.cell_volume, 0.0)))


def l1_distance(a: ScalarField, b: ScalarField) -> float:
    _check_same_grid(a, b)
    return float(np.abs(a.values - b.values).sum() * a.grid.cell_volume)


def discrete_mass(u: ScalarField) -> float:
    return float(u.values.sum() * u.grid.cell_volume)


def l2_norm(v: ScalarField) -> float:
    return float(np.sqrt(np.sum(v.values**2) * v.grid.cell_volume))


# ---------------------------------------------------------------------------
# density constructors


def uniform_density(grid: SpatialGrid) -> DensityField:
    vals = np.full(grid.shape, 1.0 / (2.0 * grid.half_width) ** grid.dim)
    return DensityField(grid, vals)


def _axis_cell_averages_gauss(grid: SpatialGrid, mean: float, var: float) -> np.ndarray:
    from scipy.special import ndtr

    sd = np.sqrt(var)
    edges = -grid.half_width + np.arange(grid.n + 1) * grid.spacing
    cdf = ndtr((edges - mean) / sd)
    return np.diff(cdf) / grid.spacing


def gaussian_density(grid: SpatialGrid, mean, var) -> DensityField:
    """Cell-averaged isotropic Gaussian, renormalized to unit mass."""
    mean = np.broadcast_to(np.asarray(mean, dtype=float).ravel(), (grid.dim,))
    vals = _axis_cell_averages_gauss(grid, mean[0], var)
    if grid.dim == 2:
        vals = np.outer(vals, _axis_cell_averages_gauss(grid, mean[1], var))
    vals = vals / (vals.sum() * grid.cell_volume)
    return DensityField(grid, vals)


def random_bump_density(grid: SpatialGrid, rng: np.random.Generator,
                        n_bumps: int = 3) -> DensityField:
    """Random smooth positive density: a mixture of Gaussian bumps kept
    well inside the domain, renormalized to unit mass."""
    L = grid.half_width
    x = grid.centers()
    vals = np.zeros(grid.shape)
    for _ in range(n_bumps):
        c = rng.uniform(-0.4 * L, 0.4 * L, size=grid.dim)
        s2 = rng.uniform(0.15, 0.8) ** 2
        w = rng.uniform(0.2, 1.0)
        r2 = np.sum((x - c) ** 2, axis=-1)
        vals += w * np.exp(-0.5 * r2 / s2)
    vals += 1e-8  # keep faces non-degenerate
    vals /= vals.sum() * grid.cell_volume
    return DensityField(grid, vals)


# ---------------------------------------------------------------------------
# CSV snapshots (shortest round-trip decimal encoding, hence bit-exact)


def save_density_csv(field: ScalarField, path) -> None:
    grid = field.grid
    pts = grid.centers().reshape(-1, grid.dim)
    vals = field.values.ravel()
    header = "x,u" if grid.dim == 1 else "x,y,u"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for p, v in zip(pts, vals):
            coords = ",".join(repr(float(c)) for c in p)
            fh.write(f"{coords},{float(v)!r}\n")


def load_density_csv(path, grid: SpatialGrid | None = None) -> DensityField:
    with open(path) as fh:
        header = fh.readline().strip()
        rows = [line.strip().split(",") for line in fh if line.strip()]
    dim = 1 if header == "x,u" else 2
    data = np.array([[float(c) for c in row] for row in rows])
    vals = data[:, -1]
    if grid is None:
        if dim == 1:
            n = len(vals)
            h = data[1, 0] - data[0, 0]
        else:
            n = int(round(np.sqrt(len(vals))))
            h = data[1, 1] - data[0, 1]  # row-major: y varies fastest
        half_width = (n * h) / 2.0
        grid = SpatialGrid(dim=dim, half_width=half_width, n=n)
    expected = grid.centers().reshape(-1, grid.dim)
    if not np.allclose(expected, data[:, :-1], rtol=0, atol=1e-9 * grid.spacing):
        raise GridMismatchError("snapshot coordinates do not match the grid")
    return DensityField(grid, vals.reshape(grid.shape))
