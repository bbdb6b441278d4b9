"""Command-line interface: ``lgcpfusion {simulate,fit,experiment,predict,report}``.

Exit codes: 0 on success, 1 on a runtime error, 2 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import io
from .experiment import ExperimentConfig, load_results, run_experiment, write_report
from .landscape import load_landscape, save_landscape
from .observation import load_replicate, save_replicate, simulate_replicate


class CliError(Exception):
    """A user-facing failure; reported without a traceback."""


def _config(path) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    if not p.is_file():
        raise CliError(f"config file not found: {p}")
    try:
        return ExperimentConfig.load(p)
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        raise CliError(f"invalid config {p}: {exc}") from exc


def _apply_globals(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        cfg.master_seed = int(args.seed)
    if args.threads is not None:
        cfg.threads = int(args.threads)
    return cfg


def _landscape_from_dir(path: Path):
    spec_path = path / "landscape.json"
    if not spec_path.is_file():
        raise CliError(f"no landscape.json in {path}")
    return load_landscape(json.loads(spec_path.read_text()), path)


def _find_landscape_dir(start: Path, explicit) -> Path:
    if explicit is not None:
        return Path(explicit)
    for d in (start, *start.parents):
        if (d / "landscape" / "landscape.json").is_file():
            return d / "landscape"
        if (d / "landscape.json").is_file() and d.name == "landscape":
            return d
    raise CliError(f"cannot find a landscape directory above {start}; pass --landscape")


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg = _apply_globals(_config(args.config), args)
    out = Path(args.out)
    land = cfg.build_landscape()
    spec = save_landscape(land, out / "landscape")
    (out / "landscape" / "landscape.json").write_text(json.dumps(spec, indent=1, sort_keys=True))
    index = {"master_seed": cfg.master_seed, "replicates": []}
    for s in cfg.scenarios:
        sspec = cfg.scenario_spec(s)
        for r in range(cfg.n_replicates):
            rep = simulate_replicate(sspec, land, r, cfg.master_seed)
            d = out / f"s{s}_r{r}"
            save_replicate(rep, d, land.grid)
            (d / "scenario.json").write_text(json.dumps(sspec.to_dict(), indent=1, sort_keys=True))
            index["replicates"].append(d.name)
    (out / "simulate.json").write_text(json.dumps(index, indent=1, sort_keys=True))
    print(f"wrote {len(index['replicates'])} replicates to {out}")
    return 0


def cmd_fit(args) -> int:
    from .inference.data import fit_data_from_replicate
    from .inference.posterior import Posterior
    from .inference.sampler import fit

    cfg = _apply_globals(_config(args.config), args)
    data_dir = Path(args.data)
    if not (data_dir / "replicate.json").is_file():
        raise CliError(f"{data_dir} is not a replicate directory (no replicate.json)")
    land_dir = _find_landscape_dir(data_dir, args.landscape)
    land = _landscape_from_dir(land_dir)
    rep = load_replicate(data_dir, land.grid)
    model = cfg.model_spec(args.model)
    post = Posterior(model, fit_data_from_replicate(land, model, rep), cfg.prior_spec(land))
    sampler = cfg.sampler_config()
    if not args.no_fields:
        from dataclasses import replace
        sampler = replace(sampler, store_fields=True)
    seed = (cfg.master_seed, 1, rep.scenario, rep.replicate, args.model)
    res = fit(post, sampler, seed=seed)
    out = Path(args.out)
    res.save(out)
    (out / "model.json").write_text(json.dumps(asdict(model), indent=1, sort_keys=True))
    (out / "landscape.json").write_text(json.dumps({"path": str(land_dir.resolve())}, indent=1))
    (out / "truth.json").write_text(json.dumps(rep.truth, indent=1, sort_keys=True))
    print(res.summary())
    return 0


def cmd_experiment(args) -> int:
    cfg = _apply_globals(_config(args.config), args)
    if args.out is not None:
        cfg.output_dir = args.out
    def progress(rec):
        if args.verbose:
            print(f"{rec['scenario']}/{rec['replicate']}/{rec['model']}: {rec['status']}", flush=True)

    table = run_experiment(cfg, resume=bool(args.resume), progress=progress)
    n_failed = sum(r["status"] != "ok" for r in load_results(cfg.output_dir))
    print(table.to_text(), end="")
    print(f"run directory: {cfg.output_dir}; failed fits: {n_failed}")
    return 0


def cmd_predict(args) -> int:
    from .inference.models import ModelSpec
    from .inference.predict import predict_risk
    from .inference.sampler import FitResult
    from .plotting import render_heatmap

    fdir = Path(args.fit)
    if not (fdir / "chains.csv").is_file():
        raise CliError(f"{fdir} is not a fit directory (no chains.csv)")
    res = FitResult.load(fdir)
    mspec = json.loads((fdir / "model.json").read_text())
    model = ModelSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in mspec.items()})
    if args.landscape is not None:
        land_dir = Path(args.landscape)
    else:
        land_dir = Path(json.loads((fdir / "landscape.json").read_text())["path"])
    land = _landscape_from_dir(land_dir)
    mode = {"fixed": "fixed_effects_only", "field": "with_field"}[args.mode]
    if mode == "with_field" and "omega1" not in res.fields:
        raise CliError("the fit stores no field draws; refit without --no-fields")
    pred = predict_risk(res, model, land.covariates, land.grid, mode, args.cell_area)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("median", "sd", "width"):
        values = getattr(pred, name)
        io.write_raster_csv(out / f"risk_{name}.csv", land.grid, values)
        render_heatmap(values, land.grid, out / f"risk_{name}.{args.format}",
                       palette="magma" if name == "median" else "viridis",
                       title=f"model {model.model_id} risk {name} ({args.mode})")
    print(f"mean risk median {pred.median.mean():.4g}, mean 95% width {pred.mean_width:.4g}")
    return 0


def cmd_report(args) -> int:
    from .plotting import render_heatmap

    run = Path(args.run)
    if not (run / "config.json").is_file():
        raise CliError(f"{run} is not a run directory (no config.json)")
    table = write_report(run)
    # comparison maps: prediction RMSE of each model minus that of the reference model
    cfg = ExperimentConfig.from_dict(json.loads((run / "config.json").read_text()))
    grid = cfg.build_landscape().grid
    ref = args.reference
    for s in cfg.scenarios:
        ref_path = run / "maps" / f"s{s}_m{ref}_rmse.csv"
        if not ref_path.is_file():
            continue
        base = io.read_raster_csv(ref_path, grid).values
        for m in cfg.models_for(s):
            p = run / "maps" / f"s{s}_m{m}_rmse.csv"
            if m == ref or not p.is_file():
                continue
            diff = io.read_raster_csv(p, grid).values - base
            io.write_raster_csv(run / "maps" / f"s{s}_m{m}_rmse_minus_m{ref}.csv", grid, diff)
            render_heatmap(diff, grid, run / "maps" / f"s{s}_m{m}_rmse_minus_m{ref}.svg",
                           palette="RdBu_r", title=f"scenario {s}: RMSE model {m} - model {ref}")
    print(table.to_text(), end="")
    print((run / "tables" / "prediction.csv").read_text(), end="")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    glob = argparse.ArgumentParser(add_help=False)
    glob.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    glob.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker processes")
    glob.add_argument("--resume", action="store_true", default=argparse.SUPPRESS,
                      help="skip fits already recorded in the run manifest")

    p = argparse.ArgumentParser(prog="lgcpfusion", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--threads", type=int, default=None, help="worker processes")
    p.add_argument("--resume", action="store_true", default=False,
                   help="skip fits already recorded in the run manifest")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[glob], help="simulate scenario replicates")
    s.add_argument("--config", help="experiment config JSON (defaults if omitted)")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", parents=[glob], help="fit one model to one replicate")
    f.add_argument("--model", type=int, required=True, choices=range(1, 9), metavar="K")
    f.add_argument("--data", required=True, help="replicate directory written by simulate")
    f.add_argument("--out", required=True, help="fit output directory")
    f.add_argument("--config", help="experiment config JSON for sampler and prior settings")
    f.add_argument("--landscape", help="landscape directory (found automatically otherwise)")
    f.add_argument("--no-fields", action="store_true", help="do not store field draws")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("experiment", parents=[glob], help="run the simulation study")
    e.add_argument("--config", help="experiment config JSON (defaults if omitted)")
    e.add_argument("--out", help="run directory (overrides output_dir)")
    e.add_argument("-v", "--verbose", action="store_true")
    e.set_defaults(func=cmd_experiment)

    r = sub.add_parser("predict", parents=[glob], help="risk rasters and heatmaps from a fit")
    r.add_argument("--fit", required=True, help="fit directory")
    r.add_argument("--mode", choices=("fixed", "field"), default="fixed")
    r.add_argument("--out", required=True)
    r.add_argument("--cell-area", type=float, default=None, help="risk cell area (default: grid cell)")
    r.add_argument("--landscape", help="landscape directory (default: the one used by the fit)")
    r.add_argument("--format", choices=("svg", "png"), default="svg")
    r.set_defaults(func=cmd_predict)

    t = sub.add_parser("report", parents=[glob], help="tables and comparison maps of a run")
    t.add_argument("--run", required=True, help="run directory")
    t.add_argument("--reference", type=int, default=1, help="reference model of the comparison maps")
    t.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args) or 0)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
