"""``dampho`` command line: trajectory and spectrum data as CSV or JSON.

Exit codes: 0 success, 1 failed validation, 2 invalid configuration,
3 integration failure, 4 unstable truncation.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import click
import numpy as np
from click.core import ParameterSource

from . import __version__, dynamics, quantum, validation
from .dynamics import IntegratorConfig
from .errors import StepFailure, TruncationUnstable
from .model import FIGURE_PARAMS, OscillatorParams, PhaseState

SCHEMA_VERSION = 1

EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_STEP = 3
EXIT_TRUNCATION = 4


class ConfigError(click.ClickException):
    exit_code = EXIT_CONFIG


# -- options ---------------------------------------------------------------------

def _physics_options(f):
    f = click.option("--hbar", type=float, default=FIGURE_PARAMS.hbar, show_default=True,
                     help="Reduced Planck constant.")(f)
    f = click.option("--omega-alpha", type=float, default=FIGURE_PARAMS.omega_alpha,
                     show_default=True, help="Damping rate alpha / (2m).")(f)
    f = click.option("--omega", type=float, default=FIGURE_PARAMS.omega, show_default=True,
                     help="Natural angular frequency.")(f)
    f = click.option("--mass", type=float, default=FIGURE_PARAMS.mass, show_default=True,
                     help="Oscillator mass.")(f)
    return f


def _io_options(f):
    f = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                     default=None, help="JSON file of option values; flags take precedence.")(f)
    f = click.option("--out", type=click.Path(dir_okay=False), default=None,
                     help="Output file [default: <command>.<format>].")(f)
    f = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
                     show_default=True, help="Output format.")(f)
    return f


def _apply_config(ctx, kwargs):
    """Fill options left at their defaults from the ``--config`` JSON file."""
    path = kwargs.pop("config_path")
    if path is None:
        return kwargs
    try:
        loaded = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(loaded, dict):
        raise ConfigError("config file must hold a JSON object")
    params = {p.name: p for p in ctx.command.params}
    aliases = {"format": "fmt"}
    for raw_key, value in loaded.items():
        key = aliases.get(raw_key.replace("-", "_"), raw_key.replace("-", "_"))
        if key not in kwargs or key == "config_path":
            raise ConfigError(f"unknown config key {raw_key!r}")
        if ctx.get_parameter_source(key) is not ParameterSource.DEFAULT:
            continue
        try:
            kwargs[key] = params[key].type_cast_value(ctx, value)
        except click.BadParameter as exc:
            raise ConfigError(f"config key {raw_key!r}: {exc.message}") from exc
    return kwargs


def _params(kw):
    try:
        return OscillatorParams(kw["mass"], kw["omega"], kw["omega_alpha"], kw["hbar"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# -- output ----------------------------------------------------------------------

def _scalar(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


def _csv_cell(v):
    v = _scalar(v)
    return str(v) if isinstance(v, int) else format(v, ".17g")


def _write_csv(path, columns, rows):
    lines = [",".join(columns)]
    lines += [",".join(_csv_cell(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def _table(columns, rows):
    return {"columns": list(columns), "rows": [[_scalar(v) for v in row] for row in rows]}


def _emit(path, fmt, command, meta, columns, rows, extra=()):
    """Write the main table plus named side tables.

    In CSV each side table ``name`` goes to a sibling ``<stem>.<name>.csv``;
    in JSON everything lands in one document.
    """
    path = Path(path)
    if fmt == "csv":
        _write_csv(path, columns, rows)
        written = [path]
        for name, cols, side_rows in extra:
            side = path.with_suffix(f".{name}.csv")
            _write_csv(side, cols, side_rows)
            written.append(side)
        return written
    data = _table(columns, rows)
    for name, cols, side_rows in extra:
        data[name] = _table(cols, side_rows)
    doc = {"schema_version": SCHEMA_VERSION, "command": command,
           "params": meta["params"], "config": meta["config"], "data": data}
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return [path]


def _params_dict(p):
    return {"mass": p.mass, "omega": p.omega, "omega_alpha": p.omega_alpha, "hbar": p.hbar}


def _out_path(kw, command):
    return kw["out"] or f"{command}.{kw['fmt']}"


# -- commands --------------------------------------------------------------------

@click.group()
@click.version_option(__version__)
def main():
    """Damped harmonic oscillator: constant of motion, trajectories, spectrum."""


@main.command()
@_physics_options
@click.option("--x0", type=float, default=1.0, show_default=True, help="Initial position.")
@click.option("--v0", type=float, default=0.0, show_default=True, help="Initial velocity.")
@click.option("--t-span", type=(float, float), default=None,
              help="Start and end time [default: 0 to ten periods].")
@click.option("--dt", type=float, default=0.05, show_default=True, help="Output spacing.")
@click.option("--rel-tol", type=float, default=1e-10, show_default=True)
@click.option("--abs-tol", type=float, default=1e-12, show_default=True)
@_io_options
@click.pass_context
def simulate(ctx, **kw):
    """Integrate (x, v) and record K along the trajectory and at v = 0 crossings."""
    kw = _apply_config(ctx, kw)
    params = _params(kw)
    t_span = kw["t_span"] or (0.0, 20.0 * math.pi / params.omega)
    try:
        cfg = IntegratorConfig(rel_tol=kw["rel_tol"], abs_tol=kw["abs_tol"],
                               dense_output_dt=kw["dt"])
        initial = PhaseState(kw["x0"], kw["v0"])
        traj = dynamics.integrate_xv(initial, params, t_span, cfg)
    except StepFailure as exc:
        click.echo(f"integration failed: {exc}", err=True)
        ctx.exit(EXIT_STEP)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    rows = zip(traj.t, traj.y[:, 0], traj.y[:, 1], traj.k, traj.branch)
    crossings = [(c.t_cross, c.side, c.k_before, c.k_after) for c in traj.crossings]
    meta = {"params": _params_dict(params),
            "config": {"x0": kw["x0"], "v0": kw["v0"], "t_span": [float(t) for t in t_span],
                       "dt": kw["dt"], "rel_tol": kw["rel_tol"], "abs_tol": kw["abs_tol"]}}
    written = _emit(_out_path(kw, "simulate"), kw["fmt"], "simulate", meta,
                    ("t", "x", "v", "K_general", "branch_index"), rows,
                    [("crossings", ("t_cross", "side", "k_before", "k_after"), crossings)])
    click.echo(f"{len(traj)} samples, {len(crossings)} crossings -> "
               + ", ".join(str(p) for p in written))


@main.command()
@_physics_options
@click.option("--j-tilde", type=float, default=1.0, show_default=True,
              help="Orbit constant.")
@click.option("--samples", type=click.IntRange(min=2), default=1000, show_default=True,
              help="Number of angles on [0, 2 pi).")
@_io_options
@click.pass_context
def orbit(ctx, **kw):
    """Action J along the orbit as a function of the angle phi."""
    kw = _apply_config(ctx, kw)
    params = _params(kw)
    n = kw["samples"]
    phi = 2.0 * math.pi * np.arange(n) / n
    try:
        j = dynamics.orbit_j_of_phi(phi, kw["j_tilde"], params, "printed")
        j_exact = dynamics.orbit_j_of_phi(phi, kw["j_tilde"], params, "exact")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    j_ref = dynamics.orbit_j_of_phi(phi, kw["j_tilde"], params.replace(omega_alpha=0.0))
    meta = {"params": _params_dict(params),
            "config": {"j_tilde": kw["j_tilde"], "samples": n}}
    written = _emit(_out_path(kw, "orbit"), kw["fmt"], "orbit", meta,
                    ("phi", "J", "J_reference", "J_exact"), zip(phi, j, j_ref, j_exact))
    click.echo(f"{n} samples -> {written[0]}")


@main.command()
@_physics_options
@click.option("--n-max", type=int, default=256, show_default=True,
              help="Fock basis size.")
@click.option("--series-k-max", type=int, default=64, show_default=True,
              help="Terms kept in the phase-operator series.")
@click.option("--levels", type=int, default=10, show_default=True,
              help="Number of lowest levels reported.")
@_io_options
@click.pass_context
def spectrum(ctx, **kw):
    """Perturbative and diagonalized levels of the quantized constant of motion."""
    kw = _apply_config(ctx, kw)
    params = _params(kw)
    try:
        cfg = quantum.FockSpaceConfig(n_max=kw["n_max"], series_k_max=kw["series_k_max"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    code = 0
    try:
        report = quantum.diagonalize_k(cfg, params, levels=kw["levels"])
        elements = quantum.matrix_element_table(cfg, params)
    except TruncationUnstable as exc:
        click.echo(f"truncation unstable: {exc}", err=True)
        report, elements, code = exc.report, [], EXIT_TRUNCATION
    except (ValueError, IndexError, ArithmeticError) as exc:
        raise ConfigError(str(exc)) from exc

    element_rows = [(k, n, cf.real, cf.imag, m.real, m.imag, d, dm)
                    for k, n, cf, m, d, dm in elements]
    meta = {"params": _params_dict(params),
            "config": {"n_max": cfg.n_max, "series_k_max": cfg.series_k_max,
                       "series_tol": cfg.series_tol, "levels": kw["levels"],
                       "trusted_window": cfg.trusted_window,
                       "max_rel_change": report.max_rel_change,
                       "stable": int(report.stable)}}
    written = _emit(_out_path(kw, "spectrum"), kw["fmt"], "spectrum", meta,
                    report.COLUMNS, report.rows(),
                    [("elements", ("k", "n", "closed_re", "closed_im", "matrix_re",
                                   "matrix_im", "abs_diff", "modulus_diff"), element_rows)])
    click.echo(f"{len(report.n)} levels, max change on doubling "
               f"{report.max_rel_change:.3g} -> " + ", ".join(str(p) for p in written))
    ctx.exit(code)


@main.command()
@click.pass_context
def validate(ctx):
    """Run every invariant check and report measured values."""
    checks = validation.run_checks()
    for check in checks:
        click.echo(check.line())
    for note in validation.notes():
        click.echo(note)
    failed = sum(not c.passed for c in checks)
    click.echo(f"{len(checks) - failed}/{len(checks)} checks passed")
    ctx.exit(EXIT_VALIDATION if failed else 0)


if __name__ == "__main__":
    main()
