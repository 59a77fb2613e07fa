"""Relaxation of the linear Ornstein-Uhlenbeck flow to its Gibbs state.

The "linear-ou" preset (beta = id, b = 1, drift -x) keeps Gaussians
Gaussian, with mean m(t) = m0 exp(-t) and variance
s2(t) = 1 + (s2_0 - 1) exp(-2t).  This script evolves a displaced
Gaussian, tracks the moments against those closed forms, and compares
the long-time state with the stationary density N(0, 1).

Run:  python demos/ou_relaxation.py
"""

import numpy as np

import fpflow as fp


def moments(field):
    x = field.grid.axis_centers
    h = field.grid.cell_volume
    m = float(np.sum(x * field.values) * h)
    v = float(np.sum(x * x * field.values) * h) - m * m
    return m, v


def main():
    spec = fp.get_preset("linear-ou")
    grid = fp.SpatialGrid(dim=1, half_width=8.0, n=400)
    u0 = fp.gaussian_density(grid, 1.0, 0.25)

    cfg = fp.EvolutionConfig(T=2.0, h=2e-3, record_every=100)
    traj = fp.evolve(spec, grid, u0, cfg)

    print("   t     mean (exact)        var (exact)        mass        min")
    for t, state, mass, mn in zip(traj.times, traj.states,
                                  traj.masses, traj.min_values):
        m, v = moments(state)
        me = np.exp(-t)
        ve = 1 + (0.25 - 1) * np.exp(-2 * t)
        print(f"{t:5.2f}  {m:7.4f} ({me:7.4f})  {v:7.4f} ({ve:7.4f})"
              f"  {mass:10.8f}  {mn:8.1e}")

    gibbs = fp.gaussian_density(grid, 0.0, 1.0)
    print(f"\nL1 distance to N(0,1) at t=2: "
          f"{fp.l1_distance(traj.final_state, gibbs):.2e}")

    ss = fp.steady_state(spec, grid)
    print(f"steady_state vs N(0,1):       {fp.l1_distance(ss, gibbs):.2e}")


if __name__ == "__main__":
    main()
