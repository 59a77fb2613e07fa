"""Batch orchestration: config-driven runs, artifacts and regression diffs.

Verbs::

    fpflow run <config.json>        execute the configured tasks
    fpflow validate <config.json>   hypothesis checks only
    fpflow diff <manifest_a> <manifest_b>

A run writes per-task CSV/JSON artifacts plus an SVG energy/dissipation
plot into the output directory and ties them together in a
``manifest.json`` carrying a schema version and a checksum per artifact.
The exit status is 0 only if every task succeeded and every hard
invariant (mass, positivity, contraction) held; config errors exit
with 2.  ``--sequential`` is accepted for interface stability: all
numerical kernels here are already deterministic single-threaded code,
so it is the default and only mode.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .energy import gradient_flow_audit
from .errors import ConfigError, ConvergenceError, NumericsError
from .grid import (
    SpatialGrid,
    gaussian_density,
    l1_distance,
    random_bump_density,
    save_density_csv,
    uniform_density,
)
from .model import PRESETS, get_preset, spec_from_config, validate_hypotheses
from .particles import KdeConfig, simulate_mckean_vlasov
from .resolvent import ResolventConfig, contraction_check
from .semigroup import EvolutionConfig, evolve, exp_formula, steady_state

__all__ = ["main", "run", "diff_runs", "load_config"]

SCHEMA_VERSION = 1
KNOWN_TASKS = ("validate", "evolve", "steady", "audit", "contraction",
               "exp-order", "particles", "compare")

# hard invariant tolerances enforced on every run
MASS_TOL = 1e-8
POSITIVITY_FLOOR = -1e-12
CONTRACTION_SLACK = 1e-8


def load_config(path) -> dict:
    """Parse and validate a run config; raises ConfigError with the field."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config is not valid JSON (line {exc.lineno}, column {exc.colno})"
        ) from exc

    if "preset" in cfg:
        if cfg["preset"] not in PRESETS:
            raise ConfigError(
                f"unknown preset {cfg['preset']!r}; available: {sorted(PRESETS)}",
                field="preset",
            )
    elif "model" not in cfg:
        raise ConfigError("config needs either 'preset' or 'model'", field="preset")

    gridblk = cfg.get("grid", {})
    for key, default in (("dim", 1), ("half_width", 8.0), ("cells", 200)):
        gridblk.setdefault(key, default)
    if gridblk["dim"] not in (1, 2):
        raise ConfigError("grid.dim must be 1 or 2", field="grid.dim")
    cfg["grid"] = gridblk

    tasks = cfg.get("tasks")
    if not tasks:
        raise ConfigError("tasks must be a nonempty list", field="tasks")
    for t in tasks:
        if t not in KNOWN_TASKS:
            raise ConfigError(
                f"unknown task {t!r}; known: {KNOWN_TASKS}", field="tasks"
            )

    cfg.setdefault("seed", 0)
    cfg.setdefault("output_dir", "fpflow-out")
    cfg.setdefault("evolution", {"T": 1.0, "h": 0.01, "record_every": 10})
    return cfg


def _build_spec(cfg):
    if "preset" in cfg:
        return get_preset(cfg["preset"])
    return spec_from_config(cfg["model"])


def _build_grid(cfg):
    g = cfg["grid"]
    return SpatialGrid(dim=int(g["dim"]), half_width=float(g["half_width"]),
                       n=int(g["cells"]))


def _initial_density(cfg, grid, rng):
    blk = cfg.get("initial", {"kind": "gaussian", "mean": 1.0, "var": 0.25})
    kind = blk.get("kind", "gaussian")
    if kind == "gaussian":
        return gaussian_density(grid, blk.get("mean", 1.0), float(blk.get("var", 0.25)))
    if kind == "uniform":
        return uniform_density(grid)
    if kind == "random":
        return random_bump_density(grid, rng, n_bumps=int(blk.get("n_bumps", 3)))
    raise ConfigError(f"unknown initial kind {kind!r}", field="initial.kind")


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


class _RunContext:
    def __init__(self, outdir):
        self.outdir = outdir
        self.tasks = {}
        self.failures = []

    def artifact(self, task, name):
        path = os.path.join(self.outdir, name)
        self.tasks.setdefault(task, {"artifacts": [], "status": "ok", "metrics": {}})
        return path, name

    def register(self, task, name):
        entry = self.tasks[task]
        entry["artifacts"].append(
            {"file": name, "sha256": _sha256(os.path.join(self.outdir, name))}
        )

    def metrics(self, task, **kv):
        self.tasks.setdefault(task, {"artifacts": [], "status": "ok", "metrics": {}})
        self.tasks[task]["metrics"].update(
            {k: (float(v) if isinstance(v, (float, np.floating)) else v)
             for k, v in kv.items()}
        )

    def fail(self, task, message):
        self.tasks.setdefault(task, {"artifacts": [], "status": "ok", "metrics": {}})
        self.tasks[task]["status"] = "failed"
        self.tasks[task]["error"] = message
        self.failures.append(f"{task}: {message}")


def _check_trajectory_invariants(ctx, task, traj):
    mass_err = max(abs(m - 1.0) for m in traj.masses)
    min_val = min(traj.min_values)
    ctx.metrics(task, mass_error=mass_err, min_value=min_val)
    if mass_err > MASS_TOL:
        ctx.fail(task, f"mass invariant violated: |mass-1| = {mass_err:.3e}")
    if min_val < POSITIVITY_FLOOR:
        ctx.fail(task, f"positivity invariant violated: min = {min_val:.3e}")


def _plot_energy(traj, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "fpflow"
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    ax1.plot(traj.times, traj.energies, marker=".")
    ax1.set_ylabel("E")
    ax2.plot(traj.times, traj.dissipations, marker=".")
    ax2.set_ylabel("Psi")
    ax2.set_xlabel("t")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _task_validate(ctx, cfg, spec, grid, rng):
    report = validate_hypotheses(spec, dim=grid.dim,
                                 x_range=(-grid.half_width, grid.half_width))
    path, name = ctx.artifact("validate", "validation_report.json")
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    ctx.register("validate", name)
    ctx.metrics("validate", passed=report.passed)
    if not report.passed:
        ctx.fail("validate", f"{len(report.violations)} hypothesis violations")


def _evolution_cfg(cfg):
    e = cfg["evolution"]
    return EvolutionConfig(T=float(e.get("T", 1.0)), h=float(e.get("h", 0.01)),
                           record_every=int(e.get("record_every", 10)))


def _task_evolve(ctx, cfg, spec, grid, rng, task="evolve"):
    u0 = _initial_density(cfg, grid, rng)
    traj = evolve(spec, grid, u0, _evolution_cfg(cfg))
    _check_trajectory_invariants(ctx, task, traj)

    path, name = ctx.artifact(task, f"{task}_diagnostics.csv")
    traj.write_csv(path)
    ctx.register(task, name)
    snapdir = os.path.join(ctx.outdir, f"{task}_snapshots")
    os.makedirs(snapdir, exist_ok=True)
    for snap in traj.write_snapshots(snapdir, prefix="state"):
        ctx.tasks[task]["artifacts"].append(
            {"file": f"{task}_snapshots/{snap}",
             "sha256": _sha256(os.path.join(snapdir, snap))}
        )
    path, name = ctx.artifact(task, f"{task}_energy.svg")
    _plot_energy(traj, path)
    ctx.register(task, name)
    ctx.metrics(task, final_energy=traj.energies[-1],
                energy_floor_c=spec.energy_floor_c)
    return traj


def _task_steady(ctx, cfg, spec, grid, rng):
    tol = float(cfg.get("steady", {}).get("tol", 1e-6))
    state = steady_state(spec, grid, tol=tol)
    path, name = ctx.artifact("steady", "steady_state.csv")
    save_density_csv(state, path)
    ctx.register("steady", name)
    ctx.metrics("steady", mass=state.mass(), min_value=state.min_value())


def _task_audit(ctx, cfg, spec, grid, rng):
    u0 = _initial_density(cfg, grid, rng)
    traj = evolve(spec, grid, u0, _evolution_cfg(cfg))
    _check_trajectory_invariants(ctx, "audit", traj)
    table = gradient_flow_audit(traj, spec, grid)
    path, name = ctx.artifact("audit", "audit_table.csv")
    with open(path, "w") as fh:
        fh.write("t,E,Psi,dE_dt,mismatch_rel\n")
        for row in table.to_rows():
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    ctx.register("audit", name)
    path, name = ctx.artifact("audit", "audit_energy.svg")
    _plot_energy(traj, path)
    ctx.register("audit", name)
    ctx.metrics("audit", median_mismatch=table.median_mismatch,
                energy_inequality_ok=table.energy_inequality_ok,
                energy_floor_c=spec.energy_floor_c)
    if not table.energy_inequality_ok:
        ctx.fail("audit", "energy inequality violated")


def _task_contraction(ctx, cfg, spec, grid, rng):
    lam = float(cfg.get("contraction", {}).get("lam", 0.01))
    n_pairs = int(cfg.get("contraction", {}).get("pairs", 10))
    rcfg = ResolventConfig(lam=lam)
    worst = -np.inf
    rows = []
    for k in range(n_pairs):
        f1 = random_bump_density(grid, rng)
        f2 = random_bump_density(grid, rng)
        out_d, in_d = contraction_check(spec, grid, f1, f2, rcfg)
        rows.append((k, in_d, out_d))
        worst = max(worst, out_d - in_d)
    path, name = ctx.artifact("contraction", "contraction_pairs.csv")
    with open(path, "w") as fh:
        fh.write("pair,input_l1,output_l1\n")
        for k, a, b in rows:
            fh.write(f"{k},{a!r},{b!r}\n")
    ctx.register("contraction", name)
    ctx.metrics("contraction", worst_excess=worst, lam=lam, pairs=n_pairs)
    if worst > CONTRACTION_SLACK:
        ctx.fail("contraction", f"L1 contraction violated by {worst:.3e}")


def _task_exp_order(ctx, cfg, spec, grid, rng):
    u0 = _initial_density(cfg, grid, rng)
    t = float(cfg.get("exp_order", {}).get("t", 1.0))
    ns = cfg.get("exp_order", {}).get("n_values", [25, 50, 100])
    states = {n: exp_formula(spec, grid, u0, t, int(n)) for n in ns}
    diffs = [l1_distance(states[b], states[a]) for a, b in zip(ns, ns[1:])]
    ratios = [d1 / d2 for d1, d2 in zip(diffs, diffs[1:])] if len(diffs) > 1 else []
    path, name = ctx.artifact("exp-order", "exp_order.csv")
    with open(path, "w") as fh:
        fh.write("n_coarse,n_fine,l1_diff\n")
        for (a, b), d in zip(zip(ns, ns[1:]), diffs):
            fh.write(f"{a},{b},{d!r}\n")
    ctx.register("exp-order", name)
    ctx.metrics("exp-order", ratios=[float(r) for r in ratios])


def _task_particles(ctx, cfg, spec, grid, rng, task="particles"):
    blk = cfg.get("particles", {})
    n_p = int(blk.get("n_particles", 10_000))
    dt = float(blk.get("dt", 1e-3))
    t_end = float(blk.get("T", cfg["evolution"].get("T", 1.0)))
    refresh = int(blk.get("kde_refresh", 10))
    u0 = _initial_density(cfg, grid, rng)
    ens, kde_field = simulate_mckean_vlasov(
        spec, grid, u0, n_p, dt, t_end, seed=int(cfg["seed"]),
        kde=KdeConfig(), kde_refresh=refresh,
    )
    path, name = ctx.artifact(task, "ensemble.csv")
    ens.save_csv(path)
    ctx.register(task, name)
    path, name = ctx.artifact(task, "kde_density.csv")
    save_density_csv(kde_field, path)
    ctx.register(task, name)
    ctx.metrics(task, n_particles=n_p, T=t_end)
    return u0, kde_field, t_end, dt


def _task_compare(ctx, cfg, spec, grid, rng):
    u0, kde_field, t_end, dt = _task_particles(ctx, cfg, spec, grid, rng,
                                               task="compare")
    ecfg = EvolutionConfig(T=t_end, h=float(cfg["evolution"].get("h", dt)),
                           record_every=10**9)
    pde_state = u0 if t_end == 0 else evolve(spec, grid, u0, ecfg).final_state
    path, name = ctx.artifact("compare", "pde_density.csv")
    save_density_csv(pde_state, path)
    ctx.register("compare", name)
    dist = l1_distance(kde_field, pde_state)
    report = {
        "kde_density": "kde_density.csv",
        "pde_density": "pde_density.csv",
        "l1_distance": dist,
    }
    path, name = ctx.artifact("compare", "comparison.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
    ctx.register("compare", name)
    ctx.metrics("compare", l1_distance=dist)


_TASK_RUNNERS = {
    "validate": _task_validate,
    "evolve": _task_evolve,
    "steady": _task_steady,
    "audit": _task_audit,
    "contraction": _task_contraction,
    "exp-order": _task_exp_order,
    "particles": _task_particles,
    "compare": _task_compare,
}


def run(cfg: dict, output_dir=None) -> tuple[int, dict]:
    """Execute a parsed config; returns (exit_status, manifest)."""
    outdir = output_dir or os.environ.get("FPFLOW_OUTPUT_ROOT_OVERRIDE") \
        or cfg["output_dir"]
    os.makedirs(outdir, exist_ok=True)
    spec = _build_spec(cfg)
    grid = _build_grid(cfg)
    ctx = _RunContext(outdir)

    for task in cfg["tasks"]:
        rng = np.random.default_rng(int(cfg["seed"]))  # fresh stream per task
        try:
            _TASK_RUNNERS[task](ctx, cfg, spec, grid, rng)
        except (ConvergenceError, NumericsError, ValueError) as exc:
            ctx.fail(task, str(exc))

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "fpflow_version": __version__,
        "preset": cfg.get("preset", cfg.get("model", {}).get("name", "custom")),
        "grid": cfg["grid"],
        "seed": cfg["seed"],
        "tasks": ctx.tasks,
        "failures": ctx.failures,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return (1 if ctx.failures else 0), manifest


def _read_csv_columns(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.array([[float(c) for c in line.strip().split(",")]
                         for line in fh if line.strip()])
    return header, data


def diff_runs(manifest_a_path, manifest_b_path) -> dict:
    """Tabulate per-diagnostic deltas between two run manifests.

    Purely file-level: compares the metric values and any shared CSV
    artifacts column by column.  Tasks present in one manifest but not
    the other are a usage error.
    """
    reports = []
    manifests = []
    for p in (manifest_a_path, manifest_b_path):
        try:
            with open(p) as fh:
                manifests.append((os.path.dirname(os.path.abspath(p)), json.load(fh)))
        except OSError as exc:
            raise ConfigError(f"cannot read manifest: {exc}") from exc
    (dir_a, man_a), (dir_b, man_b) = manifests

    only_a = set(man_a["tasks"]) - set(man_b["tasks"])
    only_b = set(man_b["tasks"]) - set(man_a["tasks"])
    if only_a or only_b:
        missing = ", ".join(sorted(only_a | only_b))
        raise ConfigError(f"manifests do not cover the same tasks: {missing}")

    for task in sorted(man_a["tasks"]):
        entry = {"task": task, "metric_deltas": {}, "csv_deltas": {}}
        ma = man_a["tasks"][task]["metrics"]
        mb = man_b["tasks"][task]["metrics"]
        for key in sorted(set(ma) & set(mb)):
            va, vb = ma[key], mb[key]
            if isinstance(va, (int, float)) and isinstance(vb, (int, float)):
                entry["metric_deltas"][key] = float(vb) - float(va)
        files_a = {a["file"] for a in man_a["tasks"][task]["artifacts"]}
        files_b = {a["file"] for a in man_b["tasks"][task]["artifacts"]}
        for name in sorted(files_a & files_b):
            if not name.endswith(".csv"):
                continue
            pa, pb = os.path.join(dir_a, name), os.path.join(dir_b, name)
            if not (os.path.exists(pa) and os.path.exists(pb)):
                raise ConfigError(f"artifact {name} missing on disk")
            ha, da = _read_csv_columns(pa)
            hb, db = _read_csv_columns(pb)
            if ha != hb or da.shape != db.shape:
                entry["csv_deltas"][name] = "incomparable (shape or columns differ)"
                continue
            entry["csv_deltas"][name] = {
                col: float(np.max(np.abs(da[:, j] - db[:, j])))
                for j, col in enumerate(ha)
            }
        reports.append(entry)
    return {"schema_version": SCHEMA_VERSION, "tasks": reports}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fpflow",
        description="nonlinear drift-diffusion gradient-flow solver",
    )
    parser.add_argument("--sequential", action="store_true",
                        help="force deterministic sequential mode (the default)")
    sub = parser.add_subparsers(dest="verb", required=True)
    p_run = sub.add_parser("run", help="execute the tasks in a config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_val = sub.add_parser("validate", help="hypothesis checks only")
    p_val.add_argument("config")
    p_diff = sub.add_parser("diff", help="compare two run manifests")
    p_diff.add_argument("manifest_a")
    p_diff.add_argument("manifest_b")
    p_diff.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    try:
        if args.verb == "run":
            cfg = load_config(args.config)
            status, manifest = run(cfg, output_dir=args.output_dir)
            for line in manifest["failures"]:
                print(f"FAIL {line}", file=sys.stderr)
            return status
        if args.verb == "validate":
            cfg = load_config(args.config)
            report = validate_hypotheses(
                _build_spec(cfg), dim=cfg["grid"]["dim"],
                x_range=(-cfg["grid"]["half_width"], cfg["grid"]["half_width"]),
            )
            print(json.dumps(report.to_dict(), indent=2))
            return 0 if report.passed else 1
        if args.verb == "diff":
            report = diff_runs(args.manifest_a, args.manifest_b)
            text = json.dumps(report, indent=2, sort_keys=True)
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text + "\n")
            print(text)
            return 0
    except ConfigError as exc:
        field = f" (field: {exc.field})" if exc.field else ""
        print(f"error: {exc}{field}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
