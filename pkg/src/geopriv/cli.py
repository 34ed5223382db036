"""Command-line front end.

One subcommand per reproducible artifact: ``calibrate``, ``sample``,
``tradeoff``, ``experiment decision``, ``experiment gowalla``, ``verify``,
``prior build``. Flags carry explicit units (-m, -inv-km). Every file-writing
run also writes ``<out>.manifest.json`` with the effective configuration,
seed, package version, backend, and input digests. Diagnostics go to stderr;
data goes to files or stdout only.

Exit status: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

import geopriv
from geopriv import _kernels
from geopriv.dataset import (
    SAN_FRANCISCO,
    Region,
    SplitSpec,
    empirical_prior,
    load_checkins,
    read_prior_csv,
    region_grid,
    save_prior,
    split_users,
)
from geopriv.errors import GeoPrivError
from geopriv.experiments import (
    DecisionExperimentConfig,
    GowallaExperimentConfig,
    crossover_distances,
    emit,
    gowalla_remap_experiment,
    render_rows,
    run_decision_experiment,
    tradeoff_table,
)
from geopriv.fileio import atomic_write, sha256_file, write_manifest
from geopriv.geo import Grid, PlanarPoint, ProjectionRef
from geopriv.mechanisms import (
    FAMILIES,
    Laplace,
    RemappedMechanism,
    calibrate_to_qavg,
    params_from_json,
    params_to_json,
    sample_arrays,
    remapped_sample_arrays,
)
from geopriv.metrics import (
    DiscreteMechanism,
    Pmf,
    posterior_bound_holds,
    tightest_epsilon,
)
from geopriv.rng import RandomStream

DEFAULT_SEED = 42
DATA_ENV = "GEOPRIV_DATA"
DEFAULT_CHECKINS_NAME = "loc-gowalla_totalCheckins.txt"


class UsageError(ValueError):
    """Bad flag combination; reported on stderr with exit status 2."""


@dataclass(frozen=True)
class RunConfig:
    """Effective configuration of one CLI invocation (flags over config file
    over defaults). ``scale`` and ``qavg`` are mutually exclusive ways to fix
    the mechanism; the seed is always present."""

    command: str
    family: str | None = None
    scale: float | None = None
    qavg: float | None = None
    distances: tuple[float, ...] = ()
    qavgs: tuple[float, ...] = ()
    trials: int = 20_000
    seed: int = DEFAULT_SEED
    checkins_path: str | None = None
    region: Region = SAN_FRANCISCO
    out: str | None = None
    fmt: str = "csv"

    def __post_init__(self):
        if self.scale is not None and self.qavg is not None:
            raise UsageError("give either a mechanism scale flag or --qavg-m, not both")


def effective_run_config(args: argparse.Namespace) -> RunConfig:
    """Normalize the parsed namespace into the validated run configuration."""
    command = _command_name(args)
    scale = None
    for attr in ("epsilon_inv_km", "sigma_m", "radius_m"):
        value = getattr(args, attr, None)
        if value is not None:
            scale = float(value)
    raw_qavg = getattr(args, "qavg_m", None)
    qavg = None
    qavgs: tuple[float, ...] = ()
    if isinstance(raw_qavg, tuple):
        qavgs = raw_qavg
    elif raw_qavg is not None:
        qavg = float(raw_qavg)
    seed = getattr(args, "seed", None)
    return RunConfig(
        command=command,
        family=getattr(args, "family", None),
        scale=scale,
        qavg=qavg,
        distances=getattr(args, "d_m", None) or (),
        qavgs=qavgs,
        trials=getattr(args, "trials", 20_000),
        seed=DEFAULT_SEED if seed is None else int(seed),
        checkins_path=getattr(args, "checkins", None),
        region=getattr(args, "region", SAN_FRANCISCO),
        out=getattr(args, "out", None),
        fmt=getattr(args, "format", "csv"),
    )


def _validate_usage(args: argparse.Namespace, cfg: RunConfig) -> None:
    if cfg.command == "calibrate" and (not cfg.family or cfg.qavg is None):
        raise UsageError("calibrate needs --family and --qavg-m")
    if cfg.command == "tradeoff" and (not args.epsilons_inv_km or args.r_star_m is None):
        raise UsageError("tradeoff needs --epsilons-inv-km and --r-star-m")
    if cfg.command == "sample":
        if args.n < 1:
            raise UsageError("--n must be at least 1")
        if args.mechanism_json:
            return
        if not cfg.family:
            raise UsageError("sample needs --mechanism-json or --family plus a scale")
        if (cfg.scale is None) == (cfg.qavg is None):
            raise UsageError("give exactly one of the family scale flag or --qavg-m")
    if cfg.command == "experiment decision":
        if not cfg.distances or not cfg.qavgs:
            raise UsageError("experiment decision needs --d-m and --qavg-m")
        if not cfg.out:
            raise UsageError("experiment decision needs --out")
    if cfg.command == "experiment gowalla" and not cfg.out:
        raise UsageError("experiment gowalla needs --out")
    if cfg.command == "prior build" and not cfg.out:
        raise UsageError("prior build needs --out")
    if cfg.command == "verify" and not args.mechanism_csv:
        raise UsageError("verify needs --mechanism-csv")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _region(text: str) -> Region:
    vals = _floats(text)
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("region is min_lat,max_lat,min_lon,max_lon")
    return Region(*vals)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="geopriv", description=__doc__.splitlines()[0])
    top.add_argument("--config", help="JSON file of defaults; keys match flag names with underscores")
    sub = top.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="mechanism parameters for a target average loss")
    cal.add_argument("--family", choices=sorted(FAMILIES))
    cal.add_argument("--qavg-m", type=float)
    cal.add_argument("--out")

    smp = sub.add_parser("sample", help="draw obfuscated locations")
    smp.add_argument("--mechanism-json", help="mechanism file, may include a remap overlay")
    smp.add_argument("--family", choices=sorted(FAMILIES))
    smp.add_argument("--epsilon-inv-km", type=float)
    smp.add_argument("--sigma-m", type=float)
    smp.add_argument("--radius-m", type=float)
    smp.add_argument("--qavg-m", type=float)
    smp.add_argument("--x-m", type=float)
    smp.add_argument("--y-m", type=float)
    smp.add_argument("--n", type=int)
    smp.add_argument("--seed", type=int)
    smp.add_argument("--out")

    trd = sub.add_parser("tradeoff", help="analytic Laplace trade-off table")
    trd.add_argument("--epsilons-inv-km", type=_floats)
    trd.add_argument("--r-star-m", type=float)
    trd.add_argument("--out")
    trd.add_argument("--format", choices=("csv", "json"))

    exp = sub.add_parser("experiment", help="Monte Carlo experiments")
    expsub = exp.add_subparsers(dest="experiment", required=True)

    dec = expsub.add_parser("decision", help="decision-adversary error trials")
    dec.add_argument("--families", type=_names)
    dec.add_argument("--d-m", type=_floats)
    dec.add_argument("--qavg-m", type=_floats)
    dec.add_argument("--trials", type=int)
    dec.add_argument("--seed", type=int)
    dec.add_argument("--threads", type=int)
    dec.add_argument("--histogram-bins", type=int)
    dec.add_argument("--out")
    dec.add_argument("--records-out", help="also write the per-trial records")
    dec.add_argument("--format", choices=("csv", "json"))

    gow = expsub.add_parser("gowalla", help="remapping evaluation on check-in data")
    gow.add_argument("--checkins", help=f"check-in TSV (default ${DATA_ENV}/{DEFAULT_CHECKINS_NAME})")
    gow.add_argument("--region", type=_region)
    gow.add_argument("--cell-m", type=float)
    gow.add_argument("--epsilons-inv-km", type=_floats)
    gow.add_argument("--n-checkins", type=int)
    gow.add_argument("--train-fraction", type=float)
    gow.add_argument("--smoothing", type=float)
    gow.add_argument("--seed", type=int)
    gow.add_argument("--out")
    gow.add_argument("--format", choices=("csv", "json"))

    ver = sub.add_parser("verify", help="audit a discrete mechanism file")
    ver.add_argument("--mechanism-csv")
    ver.add_argument("--prior-csv", help="prior over the inputs (row index,mass); default uniform")
    ver.add_argument("--epsilon-inv-km", type=float, help="budget to audit against (default: tightest)")

    pri = sub.add_parser("prior", help="prior construction")
    prisub = pri.add_subparsers(dest="prior_command", required=True)
    prib = prisub.add_parser("build", help="empirical cell prior from train-user check-ins")
    prib.add_argument("--checkins")
    prib.add_argument("--region", type=_region)
    prib.add_argument("--cell-m", type=float)
    prib.add_argument("--train-fraction", type=float)
    prib.add_argument("--smoothing", type=float)
    prib.add_argument("--seed", type=int)
    prib.add_argument("--out")

    return top


# defaults applied only after the --config merge, so the file can set any
# flag; scoped per command so e.g. the remap experiment's default epsilon grid
# does not leak into the trade-off table
_COMMON_DEFAULTS = {"format": "csv"}
_COMMAND_DEFAULTS = {
    "sample": {"x_m": 0.0, "y_m": 0.0, "n": 1},
    "experiment decision": {
        "families": ("laplace", "gaussian", "circular"),
        "trials": 20_000,
        "threads": 1,
        "histogram_bins": 50,
    },
    "experiment gowalla": {
        "region": SAN_FRANCISCO,
        "cell_m": 100.0,
        "epsilons_inv_km": (6.67, 4.0, 2.0, 1.0),
        "n_checkins": 20_000,
        "train_fraction": 0.8,
        "smoothing": 0.0,
    },
    "prior build": {
        "region": SAN_FRANCISCO,
        "cell_m": 100.0,
        "train_fraction": 0.8,
        "smoothing": 0.0,
    },
}


def _command_name(args: argparse.Namespace) -> str:
    if args.command == "experiment":
        return f"experiment {args.experiment}"
    if args.command == "prior":
        return f"prior {args.prior_command}"
    return args.command


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Fill unset args from the --config JSON file, then apply hard defaults.

    Flags given on the command line always win; config keys match flag names
    with underscores.
    """
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"--config: {exc}")
        if not isinstance(cfg, dict):
            parser.error("--config must hold a JSON object")
        for key, value in cfg.items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                parser.error(f"--config: unknown key {key!r}")
            if getattr(args, attr) is None:
                if attr == "region" and isinstance(value, (list, tuple)):
                    value = Region(*value)
                if attr in ("distances", "d_m", "qavg_m", "epsilons_inv_km", "families") and isinstance(
                    value, (list, tuple)
                ):
                    value = tuple(value)
                setattr(args, attr, value)
    defaults = dict(_COMMON_DEFAULTS)
    defaults.update(_COMMAND_DEFAULTS.get(_command_name(args), {}))
    for attr, default in defaults.items():
        if hasattr(args, attr) and getattr(args, attr) is None:
            setattr(args, attr, default)


def _manifest(command: str, args_payload: dict, out, inputs: dict[str, str] | None = None):
    payload = {
        "tool": "geopriv",
        "version": geopriv.__version__,
        "backend": _kernels.BACKEND,
        "command": command,
        "params": args_payload,
        "inputs": inputs or {},
        "output": os.path.basename(str(out)),
    }
    write_manifest(out, payload)


def _print_or_write(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(out, text)


def _cmd_calibrate(args, cfg: RunConfig) -> int:
    params = calibrate_to_qavg(cfg.family, cfg.qavg)
    text = json.dumps(params_to_json(params), indent=2, sort_keys=True) + "\n"
    _print_or_write(text, cfg.out)
    if cfg.out:
        _manifest("calibrate", {"family": cfg.family, "qavg_m": cfg.qavg}, cfg.out)
    return 0


def _mechanism_from_args(args, cfg: RunConfig):
    """(params or RemappedMechanism, descriptor dict) from sample flags."""
    if args.mechanism_json:
        with open(args.mechanism_json) as fh:
            spec = json.load(fh)
        params = params_from_json(spec)
        desc = dict(spec)
        remap_spec = spec.get("remap")
        if remap_spec is None:
            return params, desc
        g = remap_spec["grid"]
        grid = Grid(
            PlanarPoint(g["origin_x_m"], g["origin_y_m"]), g["cell_size_m"], g["nx"], g["ny"]
        )
        prior = read_prior_csv(remap_spec["prior_path"])
        rm = RemappedMechanism(
            params,
            grid,
            prior,
            remap_spec.get("tolerance_m", 1e-3),
            remap_spec.get("max_iters", 200),
        )
        return rm, desc
    if cfg.qavg is not None:
        params = calibrate_to_qavg(cfg.family, cfg.qavg)
    elif cfg.family == "laplace":
        params = Laplace(cfg.scale / 1000.0)
    else:
        params = FAMILIES[cfg.family](cfg.scale)
    return params, params_to_json(params)


def _cmd_sample(args, cfg: RunConfig) -> int:
    mech, desc = _mechanism_from_args(args, cfg)
    rnd = RandomStream(cfg.seed, 0)
    x = PlanarPoint(args.x_m, args.y_m)
    if isinstance(mech, RemappedMechanism):
        xs, ys = remapped_sample_arrays(mech, x, args.n, rnd)
    else:
        xs, ys = sample_arrays(mech, x, args.n, rnd)
    lines = ["z_x_m,z_y_m"] + [f"{float(a)!r},{float(b)!r}" for a, b in zip(xs, ys)]
    _print_or_write("\n".join(lines) + "\n", cfg.out)
    if cfg.out:
        _manifest(
            "sample",
            {"mechanism": desc, "x_m": args.x_m, "y_m": args.y_m, "n": args.n, "seed": cfg.seed},
            cfg.out,
        )
    return 0


def _cmd_tradeoff(args, cfg: RunConfig) -> int:
    rows = tradeoff_table([e / 1000.0 for e in args.epsilons_inv_km], args.r_star_m)
    text = render_rows(rows, cfg.fmt, kind="tradeoff")
    _print_or_write(text, cfg.out)
    if cfg.out:
        _manifest(
            "tradeoff",
            {"epsilons_inv_km": list(args.epsilons_inv_km), "r_star_m": args.r_star_m},
            cfg.out,
        )
    return 0


def _cmd_experiment_decision(args, cfg: RunConfig) -> int:
    exp = DecisionExperimentConfig(
        distances=cfg.distances,
        qavgs=cfg.qavgs,
        families=args.families,
        trials=cfg.trials,
        seed=cfg.seed,
        histogram_bins=args.histogram_bins,
    )
    summaries, records = run_decision_experiment(
        exp, threads=max(1, args.threads), collect_records=bool(args.records_out)
    )
    emit(summaries, cfg.out, cfg.fmt, kind="summary", histogram_bins=exp.histogram_bins)
    payload = {
        "families": list(exp.families),
        "d_m": list(exp.distances),
        "qavg_m": list(exp.qavgs),
        "trials": exp.trials,
        "seed": cfg.seed,
        "histogram_bins": exp.histogram_bins,
        "threads": args.threads,
        "crossover_avg_d_m": {
            f"{family} qavg={qavg}": d
            for (family, qavg), d in crossover_distances(summaries, "avg_perr").items()
        },
        "crossover_pct_d_m": {
            f"{family} qavg={qavg}": d
            for (family, qavg), d in crossover_distances(summaries, "pct_better").items()
        },
    }
    _manifest("experiment decision", payload, cfg.out)
    if args.records_out:
        emit(records, args.records_out, cfg.fmt, kind="trials")
        _manifest("experiment decision records", payload, args.records_out)
    return 0


def _checkins_path(cfg: RunConfig) -> str:
    if cfg.checkins_path:
        return cfg.checkins_path
    base = os.environ.get(DATA_ENV)
    if not base:
        raise UsageError(f"no --checkins given and ${DATA_ENV} is not set")
    return os.path.join(base, DEFAULT_CHECKINS_NAME)


def _cmd_experiment_gowalla(args, cfg: RunConfig) -> int:
    path = _checkins_path(cfg)
    exp = GowallaExperimentConfig(
        checkins_path=path,
        region=cfg.region,
        cell_size=args.cell_m,
        train_fraction=args.train_fraction,
        epsilons_inv_km=args.epsilons_inv_km,
        n_checkins=args.n_checkins,
        seed=cfg.seed,
        smoothing=args.smoothing,
    )
    rows, info = gowalla_remap_experiment(exp)
    emit(rows, cfg.out, cfg.fmt, kind="gowalla")
    payload = {
        "checkins": path,
        "region": [cfg.region.min_lat, cfg.region.max_lat, cfg.region.min_lon, cfg.region.max_lon],
        "cell_m": exp.cell_size,
        "train_fraction": exp.train_fraction,
        "epsilons_inv_km": list(exp.epsilons_inv_km),
        "n_checkins": exp.n_checkins,
        "smoothing": exp.smoothing,
        "seed": cfg.seed,
        "run_info": info,
    }
    _manifest("experiment gowalla", payload, cfg.out, inputs={path: sha256_file(path)})
    return 0


def _cmd_verify(args, cfg: RunConfig) -> int:
    mech = DiscreteMechanism.from_csv(args.mechanism_csv)
    tight = tightest_epsilon(mech)
    tight_km = tight * 1000.0 if math.isfinite(tight) else math.inf
    print(f"inputs: {len(mech.inputs)}  outputs: {len(mech.outputs)}")
    print(f"tightest_epsilon_inv_km: {tight_km!r}")
    if args.prior_csv:
        prior_pmf = read_prior_csv(args.prior_csv)
        prior = Pmf(tuple(mech.inputs[k] for k in prior_pmf.support), prior_pmf.masses)
    else:
        prior = Pmf.uniform(mech.inputs)
    eps = tight if args.epsilon_inv_km is None else args.epsilon_inv_km / 1000.0
    if not math.isfinite(eps):
        print("posterior_bound: SKIP (mechanism has a one-sided zero; no finite budget)")
        return 0
    report = posterior_bound_holds(prior, mech, eps)
    verdict = "PASS" if report.holds else "FAIL"
    print(
        f"posterior_bound: {verdict} epsilon_inv_km={eps * 1000.0!r} "
        f"prior_diameter_m={report.prior_diameter!r} worst_output={report.worst_output} "
        f"worst_margin={report.worst_margin!r} checked={report.checked} skipped={report.skipped}"
    )
    return 0


def _cmd_prior_build(args, cfg: RunConfig) -> int:
    path = _checkins_path(cfg)
    checkins, stats = load_checkins(path, cfg.region)
    train, _test = split_users(checkins, SplitSpec(args.train_fraction, cfg.seed))
    ref = ProjectionRef(cfg.region.center)
    grid = region_grid(cfg.region, ref, args.cell_m)
    prior = empirical_prior(train, grid, ref, args.smoothing)
    save_prior(
        cfg.out,
        prior,
        grid,
        ref,
        extra={
            "checkins": os.path.basename(path),
            "train_fraction": args.train_fraction,
            "seed": cfg.seed,
            "smoothing": args.smoothing,
            "load": {
                "lines": stats.lines,
                "parsed": stats.parsed,
                "malformed": stats.malformed,
                "in_region": stats.in_region,
            },
        },
    )
    _manifest(
        "prior build",
        {
            "checkins": path,
            "region": [cfg.region.min_lat, cfg.region.max_lat, cfg.region.min_lon, cfg.region.max_lon],
            "cell_m": args.cell_m,
            "train_fraction": args.train_fraction,
            "smoothing": args.smoothing,
            "seed": cfg.seed,
        },
        cfg.out,
        inputs={path: sha256_file(path)},
    )
    return 0


_DISPATCH = {
    "calibrate": _cmd_calibrate,
    "sample": _cmd_sample,
    "tradeoff": _cmd_tradeoff,
    "verify": _cmd_verify,
    "experiment decision": _cmd_experiment_decision,
    "experiment gowalla": _cmd_experiment_gowalla,
    "prior build": _cmd_prior_build,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config(args, parser)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        cfg = effective_run_config(args)
        _validate_usage(args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    try:
        return _DISPATCH[cfg.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (GeoPrivError, OSError, ValueError, KeyError, IndexError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
