"""Scenario runner: reproducible experiments from TOML configs.

Scenarios: `fluid` (nonlinear limit-system decay), `hierarchy` (coefficient
construction and its invariants), `kinetic` (finite-epsilon runs with
constraint/conservation monitoring), `limit_sweep` (epsilon-convergence of
kinetic moments to the expansion) and `inequality_audit` (energy-inequality
violations).  Every run directory receives a manifest.json sufficient to
re-run the experiment, CSV time series, rendered figures and snapshots.

Exit codes: 0 success, 1 invalid configuration, 2 invariant-violation
abort, 3 numerical failure.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np
import tomli

from . import diagnostics as diag
from . import expansion as exp
from . import fluid as fl
from . import hermite_fourier as hf
from . import io as vio
from . import kinetic as kin
from . import reporting
from . import spectral as sp
from .errors import (CflViolation, ConfigInvalid, EpsilonTooSmall,
                     IncompatibleSources, NonFiniteState, NonZeroMean,
                     NotMicroscopic, UnknownInitializer, VmblabError)
from .spectral import Grid, SpectralField
from .velocity import CollisionModel, HermiteSpace

SCENARIOS = ("fluid", "hierarchy", "kinetic", "limit_sweep",
             "inequality_audit")
INITIALIZERS = ("shear", "taylor_green_like", "single_mode_sigma",
                "random_small")
_NUMERICAL_ERRORS = (NonFiniteState, CflViolation, EpsilonTooSmall)
_INVARIANT_ERRORS = (NonZeroMean, NotMicroscopic, IncompatibleSources)


@dataclass
class RunConfig:
    """Validated experiment description."""

    scenario: str = "fluid"
    grid_n: int = 16
    hermite_M: int = 4
    nu0: float = 1.0
    frequency_mode: str = "constant"
    epsilon_list: list = field(default_factory=lambda: [0.5])
    dt: float = 1e-2
    t_final: float = 1.0
    N_energy: int = 2
    seed: int = 0
    init: str = "taylor_green_like"
    amplitude: float = 0.01
    output_dir: str = "runs/latest"

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigInvalid(f"scenario must be one of {SCENARIOS}")
        if self.grid_n <= 0 or self.grid_n % 2:
            raise ConfigInvalid("grid_n must be a positive even integer")
        if self.hermite_M < 3:
            raise ConfigInvalid("hermite_M must be at least 3")
        if self.nu0 <= 0:
            raise ConfigInvalid("nu0 must be positive")
        if self.dt <= 0:
            raise ConfigInvalid("dt must be positive")
        if self.t_final <= 0:
            raise ConfigInvalid("t_final must be positive")
        if self.N_energy < 0:
            raise ConfigInvalid("N_energy must be nonnegative")
        if self.amplitude < 0:
            raise ConfigInvalid("amplitude must be nonnegative")
        if self.init not in INITIALIZERS:
            raise ConfigInvalid(f"init must be one of {INITIALIZERS}")
        if self.scenario in ("kinetic", "limit_sweep", "inequality_audit"):
            if not self.epsilon_list:
                raise ConfigInvalid("epsilon_list must be non-empty for "
                                    "kinetic scenarios")
            for eps in self.epsilon_list:
                if not 0.0 < eps <= 1.0:
                    raise ConfigInvalid("epsilon_list entries must lie "
                                        "in (0, 1]")
        if self.amplitude >= 0.1:
            click.echo("warning: amplitude >= 0.1 leaves the small-data "
                       "regime", err=True)


def initializers(name: str, amplitude: float, seed: int, grid: Grid) -> tuple:
    """Named initial data (u, theta, sigma) as SpectralFields."""
    x1, x2, x3 = grid.meshgrid()
    zero = sp.zeros(grid)
    a = amplitude
    if name == "shear":
        u = sp.from_values(grid, np.stack([a * np.sin(x2),
                                           np.zeros_like(x2),
                                           np.zeros_like(x2)]))
        return u, zero, zero
    if name == "taylor_green_like":
        u = sp.from_values(grid, np.stack([
            a * np.sin(x1) * np.cos(x2) * np.cos(x3),
            -a * np.cos(x1) * np.sin(x2) * np.cos(x3),
            np.zeros_like(x1)]))
        theta = sp.from_values(grid, a * np.sin(x3))
        return u, theta, zero
    if name == "single_mode_sigma":
        sigma = sp.from_values(grid, a * np.cos(x1))
        return sp.zeros(grid, "vector"), zero, sigma
    if name == "random_small":
        rng = np.random.default_rng(seed)
        band = sp.k_squared(grid) <= 4.0 + 1e-12

        def _random_scalar():
            f = sp.from_values(grid, rng.standard_normal(grid.shape))
            coeffs = f.coeffs * band
            coeffs[0, 0, 0] = 0.0
            out = SpectralField(grid, coeffs)
            peak = np.max(np.abs(out.values()))
            return out * (a / peak if peak > 0 else 0.0)

        u = sp.leray_project(SpectralField(grid, np.stack(
            [_random_scalar().coeffs for _ in range(3)])))
        return u, _random_scalar(), _random_scalar()
    raise UnknownInitializer(f"no initializer named '{name}'")


def load_config(path=None, **overrides) -> RunConfig:
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomli.load(fh)
        except tomli.TOMLDecodeError as err:
            raise ConfigInvalid(f"config file is not valid TOML: {err}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigInvalid(f"unknown config fields: {sorted(unknown)}")
    config = RunConfig(**data)
    config.validate()
    return config


def _manifest(config: RunConfig, model: CollisionModel, extra: dict,
              wall_time: float) -> dict:
    from . import __version__

    transport = model.transport()
    return {
        "config": asdict(config),
        "transport": {"nu0": model.nu0,
                      "frequency_mode": model.frequency_mode,
                      "eta": transport["eta"], "kappa": transport["kappa"],
                      "alpha": transport["alpha"],
                      "max_degree": config.hermite_M},
        "version": __version__,
        "wall_time_s": wall_time,
        **extra,
    }


def _worker_count() -> int:
    return max(1, int(os.environ.get("VMBLAB_THREADS", "1")))


# -- scenarios ----------------------------------------------------------------

def _fluid_trajectory(config: RunConfig, model: CollisionModel):
    grid = Grid(config.grid_n)
    u0, th0, sg0 = initializers(config.init, config.amplitude, config.seed,
                                grid)
    state, corrections = fl.prepare_state(u0, th0, sg0)
    steps = int(round(config.t_final / config.dt))
    traj = [state]
    for _ in range(steps):
        state = fl.step_nonlinear_vnsf(state, config.dt, model)
        traj.append(state)
    return traj, corrections


def _run_fluid(config: RunConfig, model: CollisionModel, outdir: Path) -> dict:
    traj, corrections = _fluid_trajectory(config, model)
    rows = []
    for s in traj:
        rows.append({
            "t": s.t,
            "u_l2": s.u.norm(), "theta_l2": s.theta.norm(),
            "sigma_l2": s.sigma.norm(),
            "u_h2": sp.sobolev_norm(s.u, 2),
            "theta_h2": sp.sobolev_norm(s.theta, 2),
            "sigma_h2": sp.sobolev_norm(s.sigma, 2),
            "mean_u": float(np.max(np.abs(s.u.mean()))),
            "mean_theta": abs(s.theta.mean()),
            "mean_sigma": abs(s.sigma.mean()),
        })
    vio.write_csv(outdir / "fluid.csv", list(rows[0]), rows)
    reporting.plot_timeseries(outdir / "fluid.png", rows,
                              ["u_h2", "theta_h2", "sigma_h2"],
                              title="limit-system decay")
    summary = {"corrections": corrections}
    totals = [r["u_h2"] + r["theta_h2"] + r["sigma_h2"] for r in rows]
    if len(totals) >= 10 and min(totals) > 0:
        fit = diag.fit_decay([r["t"] for r in rows], totals, "exponential")
        transport = model.transport()
        summary["fitted_rate"] = fit["rate"]
        summary["fit_residual"] = fit["residual"]
        summary["lambda"] = 0.25 * min(transport["eta"], transport["kappa"],
                                       transport["alpha"])
    final = traj[-1]
    vio.write_specf(outdir / "u_final.specf", final.u)
    vio.write_specf(outdir / "theta_final.specf", final.theta)
    vio.write_specf(outdir / "sigma_final.specf", final.sigma)
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def _run_hierarchy(config: RunConfig, model: CollisionModel,
                   outdir: Path) -> dict:
    space = HermiteSpace(config.hermite_M)
    traj, corrections = _fluid_trajectory(config, model)
    sources = exp.assemble_r2_sources(traj, model, config.dt, space)
    order2 = exp.build_full_second_order(traj, sources, model, config.dt,
                                         space)
    transport = model.transport(space)
    rows = []
    for s, o2, src in zip(traj, order2, sources):
        o1 = exp.build_first_order(s, space)
        dth1 = fl.time_derivatives(s, transport)[1]
        incon = sp.divergence(src.u_m_compressible) - dth1
        rows.append({
            "t": s.t,
            "order1_norm": float(np.sqrt(sp.BOX_VOLUME)
                                 * np.linalg.norm(o1.f)),
            "order2_norm": float(np.sqrt(sp.BOX_VOLUME)
                                 * np.linalg.norm(o2.f)),
            "B2_norm": o2.B.norm(),
            "E2_norm": o2.E.norm(),
            "incompressibility_residual": incon.norm(),
        })
    vio.write_csv(outdir / "hierarchy.csv", list(rows[0]), rows)
    reporting.plot_timeseries(outdir / "hierarchy.png", rows,
                              ["order1_norm", "order2_norm", "B2_norm"],
                              title="expansion coefficients")
    final1 = exp.build_first_order(traj[-1], space)
    final2 = order2[-1]
    for tag, rec in (("order1", final1), ("order2", final2)):
        snap = kin.KineticState(space=space, grid=rec.grid, f=rec.f, g=rec.g,
                                E=rec.E, B=rec.B, epsilon=1.0, t=rec.t)
        vio.write_kin(outdir / f"{tag}.kin", snap)
    summary = {
        "corrections": corrections,
        "max_incompressibility_residual":
            max(r["incompressibility_residual"] for r in rows),
        "final_B2_norm": rows[-1]["B2_norm"],
    }
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def balance_initial_state(state: kin.KineticState) -> tuple:
    """Zero the global conservation-law charges by k = 0 corrections.

    Mass of f and g is removed outright; the total momentum and energy
    (including the field contributions) are cancelled by shifting the
    spatially uniform bulk-velocity and temperature entries.
    Returns (balanced state, applied correction magnitudes).
    """
    space = state.space
    f = state.f.copy()
    g = state.g.copy()
    vol = sp.BOX_VOLUME
    i000 = space.index_of[(0, 0, 0)]
    corrections = {"mass_f": abs(f[i000, 0, 0, 0]),
                   "mass_g": abs(g[i000, 0, 0, 0])}
    f[i000, 0, 0, 0] = 0.0
    g[i000, 0, 0, 0] = 0.0
    balanced = kin.KineticState(space=space, grid=state.grid, f=f, g=g,
                                E=state.E, B=state.B,
                                epsilon=state.epsilon, t=state.t)
    conserved = diag.conserved_quantities(balanced)
    iu = [space.index_of[(1, 0, 0)], space.index_of[(0, 1, 0)],
          space.index_of[(0, 0, 1)]]
    for i in range(3):
        f[iu[i], 0, 0, 0] -= conserved["momentum"][i] / vol
    corrections["momentum"] = float(np.linalg.norm(conserved["momentum"])
                                    / vol)
    i2 = [space.index_of[(2, 0, 0)], space.index_of[(0, 2, 0)],
          space.index_of[(0, 0, 2)]]
    shift = conserved["energy"] / (vol * 3.0 * np.sqrt(2.0))
    for i in range(3):
        f[i2[i], 0, 0, 0] -= shift
    corrections["energy"] = abs(shift)
    balanced = kin.KineticState(space=space, grid=state.grid, f=f, g=g,
                                E=state.E, B=state.B,
                                epsilon=state.epsilon, t=state.t)
    return balanced, {k: float(v) for k, v in corrections.items()}


def _kinetic_initial_state(config: RunConfig, model: CollisionModel,
                           space: HermiteSpace, epsilon: float,
                           orders: int = 1):
    grid = Grid(config.grid_n)
    u0, th0, sg0 = initializers(config.init, config.amplitude, config.seed,
                                grid)
    state0, _ = fl.prepare_state(u0, th0, sg0)
    order1 = exp.build_first_order(state0, space)
    eset = exp.expansion_set_at(order1)
    if orders >= 2:
        traj = [state0]
        s = state0
        for _ in range(2):
            s = fl.step_nonlinear_vnsf(s, config.dt, model)
            traj.append(s)
        sources = exp.assemble_r2_sources(traj, model, config.dt, space)
        order2 = exp.build_full_second_order(traj, sources, model, config.dt,
                                             space)[0]
        eset = exp.expansion_set_at(order1, order2)
    lifted = kin.lift_expansion(eset, epsilon)
    return balance_initial_state(lifted)


def _gauss_residuals(state: kin.KineticState) -> tuple:
    sigma = hf.charge_moment(state.space, state.grid, state.g)
    res_e = (sp.divergence(state.E) - sigma).norm()
    res_b = sp.divergence(state.B).norm()
    return res_e, res_b


def _run_kinetic_single(config: RunConfig, model: CollisionModel,
                        space: HermiteSpace, epsilon: float, outdir: Path,
                        dt: float) -> dict:
    state, corrections = _kinetic_initial_state(config, model, space, epsilon)
    base = diag.conserved_quantities(state)
    steps = int(round(config.t_final / dt))
    rows = []
    reports = []
    for i in range(steps + 1):
        res_e, res_b = _gauss_residuals(state)
        report = diag.make_report(state, model, config.N_energy)
        reports.append(report)
        cons = report.conservation
        rows.append({
            "t": state.t, "epsilon": epsilon,
            "E_N": report.E_N, "D_N": report.D_N,
            "gauss_E_residual": res_e, "gauss_B_residual": res_b,
            "mass_drift": abs(cons["mass_f"] - base["mass_f"])
            + abs(cons["mass_g"] - base["mass_g"]),
            "momentum_drift": float(np.linalg.norm(
                cons["momentum"] - base["momentum"])),
            "energy_drift": abs(cons["energy"] - base["energy"]),
        })
        if i < steps:
            state = kin.step_vmb(state, dt, model)
    tag = f"eps_{epsilon:g}".replace("/", "_")
    vio.write_csv(outdir / f"kinetic_{tag}.csv", list(rows[0]), rows)
    reporting.plot_timeseries(outdir / f"kinetic_{tag}.png", rows,
                              ["E_N", "D_N"], title=f"epsilon = {epsilon:g}")
    vio.write_kin(outdir / f"final_{tag}.kin", state)
    violations = diag.energy_inequality_monitor(reports) \
        if len(reports) >= 3 else []
    return {
        "epsilon": epsilon,
        "corrections": corrections,
        "violations": len(violations),
        "sup_E_N": max(r.E_N for r in reports),
        "E_N_initial": reports[0].E_N,
        "max_gauss_E": max(r["gauss_E_residual"] for r in rows),
        "max_gauss_B": max(r["gauss_B_residual"] for r in rows),
        "max_mass_drift": max(r["mass_drift"] for r in rows),
        "max_momentum_drift": max(r["momentum_drift"] for r in rows),
        "max_energy_drift": max(r["energy_drift"] for r in rows),
    }


def _sweep(config: RunConfig, model: CollisionModel, space: HermiteSpace,
           outdir: Path, worker) -> list:
    workers = _worker_count()
    if workers == 1 or len(config.epsilon_list) == 1:
        return [worker(eps) for eps in config.epsilon_list]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, config.epsilon_list))


def _run_kinetic(config: RunConfig, model: CollisionModel,
                 outdir: Path) -> dict:
    space = HermiteSpace(config.hermite_M)

    def worker(eps):
        return _run_kinetic_single(config, model, space, eps, outdir,
                                   config.dt * eps)

    results = _sweep(config, model, space, outdir, worker)
    summary = {"per_epsilon": results}
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def _run_inequality_audit(config: RunConfig, model: CollisionModel,
                          outdir: Path) -> dict:
    summary = _run_kinetic(config, model, outdir)
    summary["total_violations"] = sum(r["violations"]
                                      for r in summary["per_epsilon"])
    summary["energy_bounded"] = all(
        r["sup_E_N"] <= (1.0 + 1e-3) * r["E_N_initial"]
        for r in summary["per_epsilon"] if r["E_N_initial"] > 0)
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def _run_limit_sweep(config: RunConfig, model: CollisionModel,
                     outdir: Path) -> dict:
    space = HermiteSpace(config.hermite_M)
    traj, _ = _fluid_trajectory(config, model)
    sources = exp.assemble_r2_sources(traj, model, config.dt, space)
    order2 = exp.build_full_second_order(traj, sources, model, config.dt,
                                         space)

    def worker(eps):
        state, _ = _kinetic_initial_state(config, model, space, eps,
                                          orders=2)
        dt = config.dt * eps
        steps = int(round(config.t_final / dt))
        for _ in range(steps):
            state = kin.step_vmb(state, dt, model)
        mom = kin.moments(state)
        final = traj[-1]
        o2 = order2[-1]
        err_sq = 0.0
        pairs = [
            (mom["u_f"], final.u, o2.hydro["u"]),
            (mom["theta_f"], final.theta, o2.hydro["theta"]),
            (mom["sigma_g"], final.sigma, o2.hydro["sigma"]),
        ]
        for got, first, second in pairs:
            predicted = eps * first + eps ** 2 * second
            err_sq += (got - predicted).norm() ** 2
        return {"epsilon": eps, "error": float(np.sqrt(err_sq))}

    results = _sweep(config, model, space, outdir, worker)
    results.sort(key=lambda r: -r["epsilon"])
    for i, r in enumerate(results):
        if i == 0:
            r["order"] = float("nan")
        else:
            prev = results[i - 1]
            r["order"] = float(np.log(prev["error"] / r["error"])
                               / np.log(prev["epsilon"] / r["epsilon"]))
    vio.write_csv(outdir / "sweep.csv", ["epsilon", "error", "order"],
                  results)
    reporting.plot_convergence(outdir / "sweep.png",
                               [r["epsilon"] for r in results],
                               [r["error"] for r in results],
                               title="moment error vs epsilon")
    summary = {"table": results}
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


_RUNNERS = {
    "fluid": _run_fluid,
    "hierarchy": _run_hierarchy,
    "kinetic": _run_kinetic,
    "limit_sweep": _run_limit_sweep,
    "inequality_audit": _run_inequality_audit,
}


# -- commands -----------------------------------------------------------------

@click.group()
def main():
    """Spectral solver suite for a kinetic system and its diffusive limit."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="TOML config file; flags override it.")
@click.option("--scenario", type=click.Choice(SCENARIOS), default=None)
@click.option("--epsilon", "epsilons", multiple=True, type=float,
              help="Override epsilon_list (repeatable).")
@click.option("--out", "output_dir", type=click.Path(), default=None)
def run(config_path, scenario, epsilons, output_dir):
    """Execute a scenario and write its artifacts."""
    try:
        config = load_config(config_path, scenario=scenario,
                             epsilon_list=list(epsilons) or None,
                             output_dir=output_dir)
    except ConfigInvalid as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(1)
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    model = CollisionModel(nu0=config.nu0,
                           frequency_mode=config.frequency_mode)
    start = time.monotonic()
    try:
        extra = _RUNNERS[config.scenario](config, model, outdir)
    except _NUMERICAL_ERRORS as err:
        click.echo(f"numerical failure: {err}", err=True)
        sys.exit(3)
    except _INVARIANT_ERRORS as err:
        click.echo(f"invariant violation: {err}", err=True)
        sys.exit(2)
    manifest = _manifest(config, model, {"summary": extra},
                         time.monotonic() - start)
    vio.write_manifest(outdir / "manifest.json", manifest)
    click.echo(f"wrote {outdir}/manifest.json")


@main.command()
@click.argument("run_dir", type=click.Path(exists=True))
def verify(run_dir):
    """Re-check stored snapshots against the state invariants."""
    run_dir = Path(run_dir)
    failures = []
    for path in sorted(run_dir.glob("*.kin")):
        state = vio.read_kin(path)
        res_e, res_b = _gauss_residuals(state)
        scale = max(float(np.linalg.norm(state.g)), 1.0)
        ok = res_e <= 1e-8 * scale and res_b <= 1e-8 * scale
        click.echo(f"{path.name}: gauss_E={res_e:.3e} gauss_B={res_b:.3e} "
                   f"{'ok' if ok else 'FAIL'}")
        if not ok:
            failures.append(path.name)
    for path in sorted(run_dir.glob("u_*.specf")):
        u = vio.read_specf(path)
        res = sp.divergence(u).norm()
        ok = res <= 1e-10 * max(u.norm(), 1.0)
        click.echo(f"{path.name}: div={res:.3e} {'ok' if ok else 'FAIL'}")
        if not ok:
            failures.append(path.name)
    if failures:
        click.echo(f"{len(failures)} snapshot(s) violate invariants",
                   err=True)
        sys.exit(2)
    click.echo("all snapshots pass")


@main.command()
@click.argument("sweep_dir", type=click.Path(exists=True))
def table(sweep_dir):
    """Emit the epsilon-convergence table as CSV and aligned text."""
    sweep_dir = Path(sweep_dir)
    rows = vio.read_csv(sweep_dir / "sweep.csv")
    lines = [f"{'epsilon':>10} {'error':>14} {'order':>8}"]
    for r in rows:
        order = r["order"]
        try:
            order = f"{float(order):8.3f}"
        except (TypeError, ValueError):
            order = f"{'--':>8}"
        lines.append(f"{float(r['epsilon']):10.4f} "
                     f"{float(r['error']):14.6e} {order}")
    text = "\n".join(lines)
    (sweep_dir / "table.txt").write_text(text + "\n")
    vio.write_csv(sweep_dir / "table.csv", ["epsilon", "error", "order"],
                  [{k: float(r[k]) if r[k] not in ("", "nan") else
                    float("nan") for k in ("epsilon", "error", "order")}
                   for r in rows])
    click.echo(text)


if __name__ == "__main__":
    main()
