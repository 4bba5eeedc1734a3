"""Command-line front end.

Commands load a JSON game configuration, run one scenario or diagnostic, and
write delimited output, a JSON report, rendered figures, and a run manifest
into the output directory. Exit codes: 0 success/pass, 1 domain failure
(failed checks or verdicts), 2 input error, 3 numeric error.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import diagnostics, equilibria, mac, meanfield, plotting, population
from .config import config_hash, game_from_config, game_to_config, load_game
from .errors import (ConfigError, MfgEvolveError, NumericalFailure,
                     RateBoundViolated, StepRejected)
from .game import StatePolicyDist, game_policies, validate_game
from .payoff import CONVENTIONS, PAPER_LITERAL
from .protocols import ProtocolSpec, positive_correlation_probe
from .trajectory import (Trajectory, dist_from_jsonable, dist_to_jsonable,
                         write_metadata, write_trajectory_csv)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3

_PROTOCOL = click.option("--protocol", type=click.Choice(["imitative", "bnn", "smith"]),
                         default="imitative", show_default=True)
_KAPPA = click.option("--kappa", type=float, default=1.0, show_default=True,
                      help="Rate scale of the revision protocol.")
_CONVENTION = click.option("--value-convention", type=click.Choice(list(CONVENTIONS)),
                           default=PAPER_LITERAL, show_default=True)
_OUT = click.option("--out", type=click.Path(path_type=Path), required=True,
                    help="Output directory (created if missing).")


def _load(config_path: Path):
    try:
        return load_game(config_path)
    except ConfigError as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)


def _validated(game, protocol=None):
    report = validate_game(game, protocol)
    if not report.all_passed:
        for check in report.failed():
            click.echo(f"validation failed: {check.name}: {check.detail}", err=True)
        sys.exit(EXIT_DOMAIN)
    return report


def _mu0(game, policies, spec: str) -> StatePolicyDist:
    if spec == "uniform":
        return StatePolicyDist.uniform(game, policies)
    try:
        data = json.loads(Path(spec).read_text())
        mu = dist_from_jsonable(data, game)
    except (OSError, ValueError) as exc:
        click.echo(f"input error: cannot read distribution {spec!r}: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    return mu


def _outdir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def _manifest(out: Path, command: str, game, seeds, outputs, started: float) -> None:
    manifest = {
        "command": command,
        "config_hash": config_hash(game_to_config(game)) if game is not None else None,
        "seeds": seeds,
        "tool_version": _version(),
        "outputs": [str(p) for p in outputs],
        "duration_seconds": round(time.monotonic() - started, 3),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _version() -> str:
    from importlib.metadata import PackageNotFoundError, version
    try:
        return version("mfg-evolve")
    except PackageNotFoundError:
        return "unknown"


@click.group()
def main():
    """Simulate evolutionary dynamics of discounted dynamic population games."""


@main.command()
@click.argument("config", type=click.Path(exists=False, path_type=Path))
@_PROTOCOL
@_KAPPA
def validate(config, protocol, kappa):
    """Validate a game configuration; exit 0 iff all checks pass."""
    game = _load(config)
    report = validate_game(game, ProtocolSpec(protocol, kappa))
    for check in report.checks:
        status = "ok" if check.passed else "FAIL"
        click.echo(f"{check.name}: {status} ({check.detail})")
    sys.exit(EXIT_OK if report.all_passed else EXIT_DOMAIN)


@main.command("simulate-mf")
@click.argument("config", type=click.Path(path_type=Path))
@_PROTOCOL
@_KAPPA
@click.option("--t-end", type=float, default=100.0, show_default=True)
@click.option("--dt", type=float, default=0.01, show_default=True)
@click.option("--record-every", type=int, default=10, show_default=True)
@click.option("--mu0", default="uniform", show_default=True,
              help="'uniform' or a path to a distribution JSON file.")
@_CONVENTION
@_OUT
def simulate_mf(config, protocol, kappa, t_end, dt, record_every, mu0,
                value_convention, out):
    """Integrate the mean dynamic and write trajectory CSV + figure."""
    started = time.monotonic()
    game = _load(config)
    proto = ProtocolSpec(protocol, kappa)
    _validated(game)
    policies = game_policies(game)
    start = _mu0(game, policies, mu0)
    outdir = _outdir(out)
    try:
        traj = meanfield.integrate(game, policies, proto, start, t_end, dt,
                                   record_every, value_convention)
    except (StepRejected, NumericalFailure) as exc:
        click.echo(f"numeric error: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)
    residual = meanfield.rest_residual(game, policies, proto, traj.final(),
                                       value_convention)
    csv_path = outdir / "trajectory.csv"
    png_path = outdir / "trajectory.png"
    meta_path = outdir / "metadata.json"
    write_trajectory_csv(traj, game, policies, csv_path)
    plotting.plot_policy_mass(traj, game, policies, png_path,
                              title=f"mean field, {protocol}")
    write_metadata(traj, meta_path)
    _manifest(outdir, "simulate-mf", game, [], [csv_path, png_path, meta_path], started)
    click.echo(f"final rest residual: {residual:.3e}")
    sys.exit(EXIT_OK)


@main.command("simulate-pop")
@click.argument("config", type=click.Path(path_type=Path))
@_PROTOCOL
@_KAPPA
@click.option("--n", type=int, default=1000, show_default=True,
              help="Number of players.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--t-end", type=float, default=100.0, show_default=True)
@click.option("--grid", type=float, default=1.0, show_default=True,
              help="Record-grid spacing.")
@click.option("--payoff-refresh", type=int, default=1, show_default=True)
@click.option("--mu0", default="uniform", show_default=True)
@_CONVENTION
@_OUT
def simulate_pop(config, protocol, kappa, n, seed, t_end, grid, payoff_refresh,
                 mu0, value_convention, out):
    """Simulate the finite-population jump process; deterministic per seed."""
    started = time.monotonic()
    game = _load(config)
    proto = ProtocolSpec(protocol, kappa)
    _validated(game, proto)
    policies = game_policies(game)
    start = _mu0(game, policies, mu0)
    outdir = _outdir(out)
    times = np.round(np.arange(0.0, t_end + grid / 2, grid), 12)
    cfg = population.SimConfig(n_players=n, t_end=t_end, seed=seed,
                               record_times=times, payoff_refresh=payoff_refresh)
    agents = population.init_population(game, policies, start, n)
    try:
        traj = population.simulate(game, policies, proto, agents, cfg,
                                   value_convention)
    except RateBoundViolated as exc:
        click.echo(f"numeric error: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)
    csv_path = outdir / "trajectory.csv"
    png_path = outdir / "trajectory.png"
    meta_path = outdir / "metadata.json"
    write_trajectory_csv(traj, game, policies, csv_path)
    plotting.plot_policy_mass(traj, game, policies, png_path,
                              title=f"N={n}, {protocol}, seed {seed}")
    write_metadata(traj, meta_path)
    _manifest(outdir, "simulate-pop", game, [seed], [csv_path, png_path, meta_path],
              started)
    sys.exit(EXIT_OK)


@main.command()
@click.argument("config", type=click.Path(path_type=Path))
@_PROTOCOL
@_KAPPA
@click.option("--n-list", default="100,400,1600,6400", show_default=True,
              help="Comma-separated population sizes.")
@click.option("--seeds", default="20", show_default=True,
              help="Seed count (an integer) or comma-separated seed list.")
@click.option("--t-end", type=float, default=10.0, show_default=True)
@click.option("--grid", type=float, default=0.5, show_default=True)
@click.option("--dt", type=float, default=0.01, show_default=True)
@click.option("--mu0", default="uniform", show_default=True)
@_CONVENTION
@_OUT
def convergence(config, protocol, kappa, n_list, seeds, t_end, grid, dt, mu0,
                value_convention, out):
    """Compare empirical trajectories to the mean field across sizes."""
    started = time.monotonic()
    game = _load(config)
    proto = ProtocolSpec(protocol, kappa)
    _validated(game, proto)
    policies = game_policies(game)
    start = _mu0(game, policies, mu0)
    try:
        sizes = [int(x) for x in n_list.split(",") if x]
        seed_list = ([int(s) for s in seeds.split(",")] if "," in seeds
                     else list(range(int(seeds))))
    except ValueError as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    outdir = _outdir(out)
    table = population.convergence_experiment(
        game, policies, proto, start, sizes, seed_list, t_end,
        grid_step=grid, dt=dt, value_convention=value_convention)
    csv_path = outdir / "error_table.csv"
    png_path = outdir / "convergence.png"
    summary_path = outdir / "summary.json"
    population.write_error_table(table, csv_path)
    plotting.plot_convergence(table.medians, table.slope, png_path)
    with open(summary_path, "w") as fh:
        json.dump(table.to_jsonable(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _manifest(outdir, "convergence", game, seed_list,
              [csv_path, png_path, summary_path], started)
    click.echo(f"medians: {table.medians}; slope: {table.slope}")
    sys.exit(EXIT_OK)


@main.command("find-msne")
@click.argument("config", type=click.Path(path_type=Path))
@click.option("--restarts", type=int, default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--damping", type=float, default=0.2, show_default=True)
@_CONVENTION
@_OUT
def find_msne(config, restarts, seed, damping, value_convention, out):
    """Search for a stationary equilibrium; exit 0 iff one is certified."""
    started = time.monotonic()
    game = _load(config)
    _validated(game)
    policies = game_policies(game)
    result = equilibria.solve_msne(game, policies, damping=damping,
                                   restarts=restarts, seed=seed,
                                   value_convention=value_convention)
    outdir = _outdir(out)
    report = {
        "candidate": dist_to_jsonable(result.candidate, game),
        "verdict": result.verdict.to_jsonable(),
        "iterations": result.iterations,
        "restarts_used": result.restarts_used,
        "converged": result.converged,
    }
    report_path = outdir / "msne_report.json"
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _manifest(outdir, "find-msne", game, [seed], [report_path], started)
    click.echo("converged" if result.converged else "not converged")
    sys.exit(EXIT_OK if result.converged else EXIT_DOMAIN)


@main.command("check-msne")
@click.argument("config", type=click.Path(path_type=Path))
@click.option("--mu", "mu_path", type=click.Path(path_type=Path), required=True,
              help="Distribution JSON file to check.")
@click.option("--eps-pay", type=float, default=equilibria.EPS_PAY, show_default=True)
@click.option("--eps-stat", type=float, default=equilibria.EPS_STAT, show_default=True)
@click.option("--eps-mass", type=float, default=equilibria.EPS_MASS, show_default=True)
@_CONVENTION
@_OUT
def check_msne_cmd(config, mu_path, eps_pay, eps_stat, eps_mass,
                   value_convention, out):
    """Check a distribution against the equilibrium conditions."""
    started = time.monotonic()
    game = _load(config)
    _validated(game)
    policies = game_policies(game)
    mu = _mu0(game, policies, str(mu_path))
    verdict = equilibria.check_msne(game, policies, mu, eps_pay, eps_stat,
                                    eps_mass, value_convention)
    outdir = _outdir(out)
    report_path = outdir / "msne_report.json"
    with open(report_path, "w") as fh:
        json.dump({"candidate": dist_to_jsonable(mu, game),
                   "verdict": verdict.to_jsonable()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _manifest(outdir, "check-msne", game, [], [report_path], started)
    click.echo("pass" if verdict.passed else "fail")
    sys.exit(EXIT_OK if verdict.passed else EXIT_DOMAIN)


@main.command()
@click.argument("config", type=click.Path(path_type=Path))
@click.argument("probe", type=click.Choice(
    ["poscorr", "ratebound", "growth", "lyapunov", "instability"]))
@_PROTOCOL
@_KAPPA
@click.option("--samples", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--runs", type=int, default=5, show_default=True,
              help="Perturbation runs for the lyapunov probe.")
@_CONVENTION
@_OUT
def diagnose(config, probe, protocol, kappa, samples, seed, runs,
             value_convention, out):
    """Run one diagnostic probe and write its JSON report."""
    started = time.monotonic()
    game = _load(config)
    proto = ProtocolSpec(protocol, kappa)
    _validated(game)
    policies = game_policies(game)
    outdir = _outdir(out)
    outputs = []
    ok = True

    if probe == "poscorr":
        reports = [positive_correlation_probe(proto, len(pset), samples, seed)
                   for pset in policies]
        ok = all(r.passed for r in reports)
        payload = [vars(r) for r in reports]
    elif probe == "ratebound":
        report = validate_game(game, proto)
        bound = [c for c in report.checks if c.name == "rate_bound"][0]
        ok = bound.passed
        payload = {"passed": bound.passed, "detail": bound.detail}
    elif probe == "growth":
        mu = StatePolicyDist.uniform(game, policies)
        table = meanfield.growth_rates(game, policies, ProtocolSpec("imitative", kappa),
                                       mu, value_convention)
        identity = max(float(np.abs((arr * g).sum(axis=1)).max())
                       for arr, g in zip(mu.per_sub, table.per_sub))
        ok = identity <= 1e-10
        payload = {"per_sub": [g.tolist() for g in table.per_sub],
                   "mass_weighted_sum": identity}
    elif probe == "lyapunov":
        mu_star, strict = diagnostics.certified_equilibrium(game, policies,
                                                            value_convention)
        report = diagnostics.stability_report(
            game, policies, proto, mu_star, seeds=range(seed, seed + runs),
            value_convention=value_convention)
        ok = report.all_monotone
        payload = report.to_jsonable()
        png = outdir / "lyapunov.png"
        plotting.plot_lyapunov(report, png)
        outputs.append(png)
    else:
        report = diagnostics.instability_probe(game, policies, kappa,
                                               value_convention=value_convention)
        ok = report.escaped and report.monotone_growth and report.msne_failed
        payload = report.to_jsonable(game)
        png = outdir / "escape.png"
        plotting.plot_escape(report, png)
        outputs.append(png)

    report_path = outdir / "report.json"
    with open(report_path, "w") as fh:
        json.dump({"probe": probe, "passed": ok, "report": payload}, fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append(report_path)
    _manifest(outdir, f"diagnose-{probe}", game, [seed], outputs, started)
    click.echo("pass" if ok else "fail")
    sys.exit(EXIT_OK if ok else EXIT_DOMAIN)


@main.command("mac")
@click.option("--p-l", "P_L", type=float, default=None, help="Low transmit power.")
@click.option("--p-h", "P_H", type=float, default=None, help="High transmit power.")
@click.option("--sigma2", type=float, default=None)
@click.option("--cbar", "Cbar", type=float, default=None)
@click.option("--beta-price", type=float, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--gamma", type=float, default=None)
@click.option("--p-f", "p_F", type=float, default=None)
@click.option("--t-msg", type=float, default=None)
@click.option("--rd", "Rd", type=float, default=None)
@click.option("--rr", "Rr", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Config file path (stdout when omitted).")
def mac_cmd(out, **overrides):
    """Emit the built-in medium-access game config (certified defaults)."""
    base = mac.params_to_jsonable(mac.default_params())
    for key, value in overrides.items():
        if value is not None:
            base[{"t_msg": "T_msg", "beta_price": "beta_price"}.get(key, key)] = value
    try:
        params = mac.MacParams(**base)
        cfg = game_to_config(mac.build_mac(params))
    except MfgEvolveError as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    text = json.dumps(cfg, indent=2, sort_keys=True) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
