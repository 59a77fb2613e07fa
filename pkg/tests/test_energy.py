"""Entropy functional, dissipation quadratures and flow audits."""

import numpy as np
import pytest
from scipy.integrate import quad

from fpflow import (
    EvolutionConfig,
    ScalarField,
    SpatialGrid,
    apply_A,
    dissipation,
    energy,
    entropy_potential,
    eta,
    evolve,
    gaussian_density,
    gradient,
    gradient_flow_audit,
    l1_distance,
    metric_norm_sq,
    metric_norm_sq_matched,
    random_bump_density,
    uniform_density,
)
from fpflow.energy import eta_table


def test_eta_trivia(ou_spec):
    assert eta(ou_spec, 0.0) == 0.0
    with pytest.raises(ValueError):
        eta(ou_spec, -0.5)


def test_eta_closed_form_linear(ou_spec):
    # beta = id, b = 1: g(s) = log s, eta(r) = r log r - r
    assert eta(ou_spec, 1.0) == pytest.approx(-1.0, abs=1e-8)
    assert eta(ou_spec, np.e) == pytest.approx(0.0, abs=1e-7)
    assert eta(ou_spec, 2.0) == pytest.approx(2 * np.log(2) - 2, abs=1e-8)


def test_eta_quadrature_oracle(soft_spec):
    # adaptive quadrature of the double integral, independent of the table
    def g(s):
        val, _ = quad(
            lambda t: soft_spec.beta.deriv(t) / (t * soft_spec.b(t)), 1.0, s)
        return val

    for r in (0.3, 1.0, 2.5):
        expected, _ = quad(g, 0.0, r, points=[0.0], limit=200)
        assert eta(soft_spec, r) == pytest.approx(expected, abs=1e-6)


def test_eta_convex_and_g_anchored(preset_spec):
    table = eta_table(preset_spec)
    assert table.g(1.0) == 0.0
    r = np.linspace(1e-6, 50.0, 4001)
    vals = table.eta(r)
    second = np.diff(vals, 2)
    assert np.min(second) >= -1e-10


def test_energy_zero_field(ou_spec, grid_1d):
    from fpflow import DensityField

    rep = energy(ou_spec, grid_1d, DensityField(grid_1d, np.zeros(grid_1d.shape)))
    assert rep.total == 0.0 and rep.entropy_part == 0.0


def test_energy_uniform_entropy_part(preset_spec, grid_1d):
    rep = energy(preset_spec, grid_1d, uniform_density(grid_1d))
    L = grid_1d.half_width
    expected = 2 * L * eta(preset_spec, 1.0 / (2 * L))
    assert rep.entropy_part == pytest.approx(expected, rel=1e-10)
    assert rep.total == rep.entropy_part + rep.potential_part


def test_energy_gaussian_quadrature_oracle(ou_spec):
    # E(N(0,1)) = integral(u log u + x^2/2 u) = -0.5 log(2 pi)
    grid = SpatialGrid(dim=1, half_width=8.0, n=400)
    u = gaussian_density(grid, 0.0, 1.0)
    rep = energy(ou_spec, grid, u)
    assert rep.total == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-3)


def test_dissipation_trivia(ou_spec, grid_1d):
    import dataclasses

    # stationary Gibbs state annihilates the entropy flux
    grid = SpatialGrid(dim=1, half_width=8.0, n=400)
    assert dissipation(ou_spec, grid, gaussian_density(grid, 0.0, 1.0)) <= 1e-4
    # uniform density with no drift: zero gradient, zero drift
    nodrift = dataclasses.replace(ou_spec, drift_override=lambda x: np.zeros_like(x))
    assert dissipation(nodrift, grid_1d, uniform_density(grid_1d)) == 0.0


def test_dissipation_grid_refinement(soft_spec):
    vals = []
    for n in (100, 1000):
        grid = SpatialGrid(dim=1, half_width=6.0, n=n)
        vals.append(dissipation(soft_spec, grid, gaussian_density(grid, 0.0, 1.0)))
    assert vals[0] == pytest.approx(vals[1], rel=0.02)


def test_gradient_equals_operator(preset_spec, grid_1d, rng):
    for _ in range(10):
        u = random_bump_density(grid_1d, rng)
        g = gradient(preset_spec, grid_1d, u)
        a = apply_A(preset_spec, grid_1d, u)
        assert np.max(np.abs(g.values - a.values)) <= 1e-12


def test_gradient_constant_no_drift(ou_spec, grid_1d):
    import dataclasses

    nodrift = dataclasses.replace(ou_spec, drift_override=lambda x: np.zeros_like(x))
    g = gradient(nodrift, grid_1d, uniform_density(grid_1d))
    assert np.max(np.abs(g.values)) == 0.0


def test_gradient_small_at_equilibrium(ou_spec):
    from fpflow import steady_state

    grid = SpatialGrid(dim=1, half_width=8.0, n=200)
    tol = 1e-6
    ss = steady_state(ou_spec, grid, tol=tol)
    g = gradient(ou_spec, grid, ss)
    assert np.abs(g.values).sum() * grid.cell_volume <= 10 * tol


def test_metric_norm_trivia(preset_spec, grid_1d, rng):
    from fpflow import DensityField

    u = random_bump_density(grid_1d, rng)
    const = ScalarField(grid_1d, np.full(grid_1d.shape, 3.7))
    assert metric_norm_sq(preset_spec, grid_1d, u, const) == 0.0
    zero_u = DensityField(grid_1d, np.zeros(grid_1d.shape))
    y = ScalarField(grid_1d, rng.standard_normal(grid_1d.shape))
    assert metric_norm_sq(preset_spec, grid_1d, zero_u, y) == 0.0


def test_metric_matches_dissipation(preset_spec, rng):
    grid = SpatialGrid(dim=1, half_width=8.0, n=400)
    for _ in range(5):
        u = random_bump_density(grid, rng)
        # matched stencil: exact algebraic identity
        assert metric_norm_sq_matched(preset_spec, grid, u) == \
            dissipation(preset_spec, grid, u)
        # independent route through the entropy potential
        y = entropy_potential(preset_spec, grid, u)
        indep = metric_norm_sq(preset_spec, grid, u, y)
        assert indep == pytest.approx(dissipation(preset_spec, grid, u), rel=0.01)


def test_energy_floor_constant(preset_spec):
    # E(u) >= 0.5 * integral(phi u) - C with the documented preset C
    from fpflow.grid import phi_at_centers

    grid = SpatialGrid(dim=1, half_width=8.0, n=400)
    u0 = gaussian_density(grid, 1.0, 0.25)
    traj = evolve(preset_spec, grid, u0,
                  EvolutionConfig(T=2.0, h=5e-3, record_every=50))
    phi = phi_at_centers(preset_spec, grid)
    for state, e in zip(traj.states, traj.energies):
        half_pot = 0.5 * float(np.sum(phi * state.values) * grid.cell_volume)
        assert e >= half_pot - preset_spec.energy_floor_c


def test_audit_needs_enough_records(ou_spec, grid_1d, rng):
    u0 = random_bump_density(grid_1d, rng)
    traj = evolve(ou_spec, grid_1d, u0, EvolutionConfig(T=0.01, h=0.01))
    with pytest.raises(ValueError):
        gradient_flow_audit(traj, ou_spec, grid_1d)


def test_audit_stationary_below_floor(ou_spec):
    grid = SpatialGrid(dim=1, half_width=8.0, n=400)
    u0 = gaussian_density(grid, 0.0, 1.0)
    traj = evolve(ou_spec, grid, u0, EvolutionConfig(T=0.01, h=0.001, record_every=1))
    table = gradient_flow_audit(traj, ou_spec, grid, floor=1e-3)
    assert table.below_floor.all()
    assert table.median_mismatch == 0.0
    assert any("below floor" in n for n in table.notes)


def test_audit_moving_trajectory(ou_spec):
    grid = SpatialGrid(dim=1, half_width=8.0, n=400)
    u0 = gaussian_density(grid, 1.0, 0.25)
    traj = evolve(ou_spec, grid, u0, EvolutionConfig(T=0.2, h=0.001, record_every=10))
    table = gradient_flow_audit(traj, ou_spec, grid)
    assert table.median_mismatch <= 0.05
    assert table.energy_inequality_ok
    assert table.passed
    rows = table.to_rows()
    assert rows.shape == (len(traj.times) - 2, 5)
