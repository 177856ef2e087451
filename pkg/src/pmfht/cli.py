"""Command-line entry point: ``pmfht <subcommand> [--config FILE] [overrides]``.

Exit codes: 0 success, 1 invalid input (including usage errors), 2 numeric
failure.  Resolved parameters are echoed to stderr; results go to files and
a short summary to stdout.
"""
from __future__ import annotations

import json
import sys
from dataclasses import replace

import click
import numpy as np

from . import io
from .clutter import CfarPolicy, ClutterSource, FilterProtocol, monte_carlo_detection, run_filter, sweep_alpha
from .config import Config, load_config
from .crypto import EncryptionKey, decrypt, encrypt, relative_error
from .errors import ConfigError, IoError, NumericError, PMFHTError, ValidationError
from .geometry import LboParams, PointCloud, build_lbo, default_params, solve_harmonic_basis
from .models import MODELS
from .sampling import bandlimit, make_plan, optimal_sampling, reconstruct, sigma_min
from .transform import build_transform, forward

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


# --- option plumbing ---------------------------------------------------------------


def _config_options(*keys):
    """Decorator adding ``--config``, ``--set KEY=VALUE`` and one flag per config key."""

    def deco(fn):
        for key in reversed(keys):
            flag = "--" + key.replace("_", "-")
            fn = click.option(flag, key, default=None, help=f"override config key '{key}'")(fn)
        fn = click.option("--set", "sets", multiple=True, metavar="KEY=VALUE", help="override any config key")(fn)
        fn = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)(fn)
        return fn

    return deco


def _resolve(name, config_path, sets, flags, shown) -> Config:
    cfg = load_config(config_path) if config_path else Config()
    extra = {}
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        extra[k.strip()] = _parse_scalar(v)
    cfg = cfg.merged(extra).merged(flags)
    echo = {k: getattr(cfg, k) for k in shown}
    click.echo(f"pmfht {name}: " + json.dumps(echo, sort_keys=True), err=True)
    return cfg


def _parse_scalar(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _require(cfg, *keys):
    missing = [k for k in keys if getattr(cfg, k) is None]
    if missing:
        raise ConfigError("missing required setting(s): " + ", ".join(missing))


def _load_cloud(cfg: Config) -> PointCloud:
    if cfg.input:
        return io.read_cloud(cfg.input, cfg.format)
    return MODELS[cfg.model](cfg.n_points, seed=cfg.seed)


def _lbo_params(cfg: Config, cloud) -> LboParams:
    base = default_params(cloud, k_fallback=cfg.k_fallback)
    changes = {k: getattr(cfg, k) for k in ("t", "r_neighbor", "delta") if getattr(cfg, k) is not None}
    if "r_neighbor" in changes and "delta" not in changes:
        changes["delta"] = max(base.delta, changes["r_neighbor"])
    return replace(base, **changes)


def _transform(cfg: Config, cloud):
    lbo = build_lbo(cloud, _lbo_params(cfg, cloud))
    basis = solve_harmonic_basis(lbo)
    return build_transform(basis, lbo), basis


def _key(cfg: Config) -> EncryptionKey:
    return EncryptionKey(
        alpha_fwd=tuple(cfg.alpha_fwd),
        alpha_inv=tuple(cfg.alpha_inv),
        henon_a=cfg.henon_a,
        henon_b=cfg.henon_b,
        u0=cfg.u0,
        v0=cfg.v0,
        burn_in=cfg.burn_in,
    )


def _protocol(cfg: Config) -> FilterProtocol:
    return FilterProtocol(
        range_cells=cfg.range_cells,
        pulses=cfg.pulses,
        target_cell=cfg.target_cell,
        velocity=cfg.velocity,
        scr_db=cfg.scr_db,
        window=cfg.window,
        train_realizations=cfg.train_realizations,
        seed=cfg.seed,
        method=cfg.method,
    )


def _source(cfg: Config) -> ClutterSource:
    protocol = _protocol(cfg)
    if cfg.radar:
        cube = io.read_radar(cfg.radar)
        if cube.range_cells < protocol.range_cells:
            raise ValidationError(f"radar file has {cube.range_cells} range cells, protocol needs {protocol.range_cells}")
        return ClutterSource(cube=cube.rows(0, protocol.range_cells), protocol=protocol)
    return ClutterSource(protocol=protocol, synthetic={"prf_hz": cfg.prf_hz, "wavelength_m": cfg.wavelength_m})


def _out(cfg: Config):
    _require(cfg, "output")
    io.ensure_parent(cfg.output)
    return cfg.output


GEOMETRY_KEYS = ("input", "format", "model", "n_points", "seed", "t", "r_neighbor", "delta", "k_fallback")
FILTER_KEYS = (
    "radar", "range_cells", "pulses", "target_cell", "velocity", "scr_db", "window",
    "train_realizations", "method", "seed", "prf_hz", "wavelength_m",
)
KEY_KEYS = ("alpha_fwd", "alpha_inv", "henon_a", "henon_b", "u0", "v0", "burn_in")


# --- commands ------------------------------------------------------------------------


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Fractional harmonic transforms on point-cloud manifolds."""


@cli.command()
@_config_options(*GEOMETRY_KEYS, "geometry", "output")
def basis(config_path, sets, **flags):
    """Harmonic basis: eigenvalue curve (index, eigenvalue) and optional geometry token."""
    cfg = _resolve("basis", config_path, sets, flags, GEOMETRY_KEYS + ("geometry", "output"))
    out = _out(cfg)
    cloud = _load_cloud(cfg)
    t, hb = _transform(cfg, cloud)
    io.write_curve(out, np.column_stack([np.arange(hb.eigenvalues.size), hb.eigenvalues]), names=("index", "eigenvalue"))
    if cfg.geometry:
        io.ensure_parent(cfg.geometry)
        io.write_geometry_token(cfg.geometry, t)
    click.echo(f"N={cloud.n} lambda_max={hb.eigenvalues[-1]:.6g}")


@cli.command()
@_config_options(*GEOMETRY_KEYS, "alpha", "output")
def transform(config_path, sets, **flags):
    """Fractional spectrum of the xyz coordinates at order --alpha."""
    cfg = _resolve("transform", config_path, sets, flags, GEOMETRY_KEYS + ("alpha", "output"))
    out = _out(cfg)
    cloud = _load_cloud(cfg)
    t, _ = _transform(cfg, cloud)
    spec = forward(t, cfg.alpha, cloud.points)
    io.write_spectrum(out, spec.coeffs)
    click.echo(f"N={cloud.n} alpha={cfg.alpha:g} energy={float(np.sum(spec.mass_norm)):.17g}")


@cli.command("encrypt")
@_config_options(*GEOMETRY_KEYS, *KEY_KEYS, "geometry", "output")
def encrypt_cmd(config_path, sets, **flags):
    """Encrypt a cloud; writes the ciphertext and the key-side geometry token."""
    cfg = _resolve("encrypt", config_path, sets, flags, GEOMETRY_KEYS + KEY_KEYS + ("geometry", "output"))
    _require(cfg, "geometry")
    out = _out(cfg)
    cloud = _load_cloud(cfg)
    t, _ = _transform(cfg, cloud)
    enc = encrypt(cloud, t, _key(cfg))
    io.write_ciphertext(out, enc)
    io.ensure_parent(cfg.geometry)
    io.write_geometry_token(cfg.geometry, t)
    click.echo(f"N={cloud.n} encrypted")


@cli.command("decrypt")
@_config_options("input", *KEY_KEYS, "geometry", "reference", "format", "output")
def decrypt_cmd(config_path, sets, **flags):
    """Decrypt a ciphertext with its geometry token; --reference reports the round-trip error."""
    shown = ("input",) + KEY_KEYS + ("geometry", "reference", "output")
    cfg = _resolve("decrypt", config_path, sets, flags, shown)
    _require(cfg, "input", "geometry")
    out = _out(cfg)
    enc = io.read_ciphertext(cfg.input)
    t = io.read_geometry_token(cfg.geometry)
    plain = decrypt(enc, t, _key(cfg))
    io.write_cloud(out, plain)
    if cfg.reference:
        err = relative_error(plain, io.read_cloud(cfg.reference, cfg.format))
        click.echo(f"relative_error={err:.3e}")
    else:
        click.echo(f"N={plain.n} decrypted")


@cli.command()
@_config_options(*GEOMETRY_KEYS, "alpha", "bandwidth", "samples", "output")
def sample(config_path, sets, **flags):
    """Greedy sampling set for alpha-bandlimited signals; writes (rank, index)."""
    shown = GEOMETRY_KEYS + ("alpha", "bandwidth", "samples", "output")
    cfg = _resolve("sample", config_path, sets, flags, shown)
    out = _out(cfg)
    cloud = _load_cloud(cfg)
    t, _ = _transform(cfg, cloud)
    idx = optimal_sampling(t, cfg.alpha, cfg.bandwidth, cfg.samples)
    plan = make_plan(t, cfg.alpha, idx, cfg.bandwidth)
    io.write_curve(out, np.column_stack([np.arange(idx.size), idx]), names=("rank", "index"))
    # demo signal: the bandlimited part of the z coordinate
    f = bandlimit(t, cfg.alpha, cloud.points[:, 2], cfg.bandwidth)
    rec = reconstruct(plan, plan.sample(f))
    err = float(np.linalg.norm(rec - f) / max(np.linalg.norm(f), np.finfo(float).tiny))
    click.echo(f"sigma_min={sigma_min(plan.basis[idx]):.6g} reconstruction_error={err:.3e}")


@cli.command("filter")
@_config_options(*FILTER_KEYS, "alpha", "output")
def filter_cmd(config_path, sets, **flags):
    """Optimal fractional filter on the evaluation realization; writes the filtered cloud."""
    cfg = _resolve("filter", config_path, sets, flags, FILTER_KEYS + ("alpha", "output"))
    out = _out(cfg)
    res = run_filter(_source(cfg), cfg.alpha)
    R, M = cfg.range_cells, cfg.pulses
    rr, mm = np.meshgrid(np.linspace(0, 1, R), np.linspace(0, 1, M), indexing="ij")
    io.write_cloud(out, np.column_stack([rr.ravel(), mm.ravel(), res.filtered]))
    click.echo(f"alpha={cfg.alpha:g} nmse={res.nmse:.6g}")


@cli.command()
@_config_options(*FILTER_KEYS, "alpha_grid", "output")
def sweep(config_path, sets, **flags):
    """NMSE versus fractional order; writes (alpha, nmse)."""
    cfg = _resolve("sweep", config_path, sets, flags, FILTER_KEYS + ("alpha_grid", "output"))
    out = _out(cfg)
    res = sweep_alpha(None, _source(cfg), cfg.alpha_grid)
    io.write_curve(out, res.curve, names=("alpha", "nmse"))
    click.echo(f"best_alpha={res.best_alpha:g}")


@cli.command()
@_config_options(*FILTER_KEYS, "alpha", "scr_grid", "trials", "pfa", "calibration_trials", "output")
def detect(config_path, sets, **flags):
    """Monte Carlo detection probability versus SCR; writes (scr_db, pd)."""
    shown = FILTER_KEYS + ("alpha", "scr_grid", "trials", "pfa", "calibration_trials", "output")
    cfg = _resolve("detect", config_path, sets, flags, shown)
    out = _out(cfg)
    policy = CfarPolicy(pfa=cfg.pfa, calibration_trials=cfg.calibration_trials)
    curve = monte_carlo_detection(_source(cfg), cfg.scr_grid, cfg.trials, cfg.alpha, policy)
    io.write_curve(out, curve, names=("scr_db", "pd"))
    click.echo(" ".join(f"{s:g}:{pd:.3f}" for s, pd in curve))


# --- dispatch --------------------------------------------------------------------------


def main(argv=None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    args = sys.argv[1:] if argv is None else list(argv)
    try:
        cli.main(args=args, prog_name="pmfht", standalone_mode=False)
    except click.exceptions.NoArgsIsHelpError as exc:
        click.echo(exc.ctx.get_help() if exc.ctx else str(exc), err=True)
        return EXIT_INVALID
    except click.UsageError as exc:
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_INVALID
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_INVALID
    except (ValidationError, IoError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INVALID
    except NumericError as exc:
        click.echo(f"numeric failure: {type(exc).__name__}: {exc}", err=True)
        return EXIT_NUMERIC
    except PMFHTError as exc:  # pragma: no cover - every subclass is handled above
        click.echo(f"error: {exc}", err=True)
        return EXIT_INVALID
    return EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
