"""Command-line entry point wiring all modules together.

Subcommands: synth, agreement, grids, sample, loop, eval, serve.
Report-producing paths write a figure next to every delimited output.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation, grids as grids_mod, loop as loop_mod, plots, world as world_mod
from .ensemble import EnsembleSpec
from .rasters import overlay_votes, read_ascii_grid, write_ascii_grid
from .samples import LandCoverClass, stratified_sample

log = logging.getLogger("consensus_labeler")

DEFAULT_SEED = 20200501


def _seed_default() -> int:
    env = os.environ.get("CONSENSUS_LABELER_SEED")
    return int(env) if env else DEFAULT_SEED


def _load_config(path) -> dict:
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_string(fh.read())
    flat = {}
    for section in parser.sections():
        for key, val in parser.items(section):
            flat[key] = val
    return flat


def _echo_config(out_dir: Path, values: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config_used.cfg", "w", encoding="utf-8") as fh:
        fh.write("[run]\n")
        for key in sorted(values):
            fh.write(f"{key} = {values[key]}\n")


def _write_world(world, out_dir: Path, n_samples: int, sample_seed: int):
    out_dir.mkdir(parents=True, exist_ok=True)
    write_ascii_grid(world.truth, out_dir / "truth.asc")
    for i, product in enumerate(world.products):
        write_ascii_grid(product, out_dir / f"product_{i}.asc")
    write_ascii_grid(world.agreement, out_dir / "agreement.asc")
    for name, band in world.bands.items():
        write_ascii_grid(band, out_dir / f"band_{name}.asc")
    write_ascii_grid(world.dem, out_dir / "dem.asc")
    write_ascii_grid(world.ecoregions, out_dir / "ecoregions.asc")
    write_ascii_grid(world.ndvi, out_dir / "ndvi.asc")
    store, truth_classes = world_mod.build_store(world, n_samples=n_samples,
                                                 seed=sample_seed)
    store.save(out_dir / "samples.jsonl")
    with open(out_dir / "truth_classes.json", "w", encoding="utf-8") as fh:
        json.dump({k: v.value for k, v in truth_classes.items()}, fh,
                  sort_keys=True)
    return store, truth_classes


def cmd_synth(args) -> int:
    cfg = world_mod.WorldConfig(seed=args.seed, ncols=args.size,
                                nrows=args.size)
    world = world_mod.generate(cfg)
    out = Path(args.out)
    _write_world(world, out, args.n_samples, args.seed)
    _echo_config(out, {"seed": args.seed, "size": args.size,
                       "n_samples": args.n_samples})
    log.info("synthetic world written to %s", out)
    return 0


def cmd_agreement(args) -> int:
    products = [read_ascii_grid(p) for p in args.products]
    agreement = overlay_votes(products)
    write_ascii_grid(agreement, args.out)
    fig = Path(args.out).with_suffix(".png")
    plots.plot_agreement(agreement, fig)
    log.info("agreement raster -> %s, figure -> %s", args.out, fig)
    return 0


def cmd_grids(args) -> int:
    agreement = read_ascii_grid(args.agreement)
    from .rasters import AgreementRaster
    agreement = AgreementRaster(values=agreement.values,
                                x_origin=agreement.x_origin,
                                y_origin=agreement.y_origin,
                                cellsize=agreement.cellsize,
                                nodata=agreement.nodata,
                                n_products=args.n_products)
    spec = grids_mod.GridSpec(args.cell)
    labels = grids_mod.classify_grids(agreement, spec,
                                      threshold=args.threshold,
                                      min_valid_fraction=args.min_valid_fraction)
    grids_mod.write_grid_report(labels, args.out)
    fig = Path(args.out).with_suffix(".png")
    plots.plot_grid_labels(labels, spec, fig)
    log.info("grid report -> %s, figure -> %s", args.out, fig)
    return 0


def cmd_sample(args) -> int:
    ndvi = read_ascii_grid(args.ndvi)
    picked, shortfall = stratified_sample(ndvi, strata=args.strata,
                                          per_stratum=args.per_stratum,
                                          seed=args.seed)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("row,col,lon,lat,ndvi\n")
        for r, c, lon, lat, v in picked:
            fh.write(f"{r},{c},{lon:.6f},{lat:.6f},{v:.6f}\n")
    for stratum, missing in sorted(shortfall.items()):
        log.warning("stratum %d short by %d points", stratum, missing)
    log.info("%d sample locations -> %s", len(picked), args.out)
    return 0


def _loop_from_config(flat: dict, args):
    seed = int(flat.get("seed", args.seed))
    cfg = world_mod.WorldConfig(seed=seed)
    world = world_mod.generate(cfg)
    store, truth_classes = world_mod.build_store(
        world, n_samples=int(flat.get("n_samples", 5000)), seed=seed)
    spec = EnsembleSpec(K=int(flat.get("k", 8)),
                        n_architectures=int(flat.get("n_architectures", 2)),
                        M=int(flat.get("m", 8)),
                        n_products=int(flat.get("n_products", 5)))
    loop_cfg = loop_mod.LoopConfig(
        batch_size=int(flat.get("batch_size", 10000)),
        lam=float(flat.get("lambda", 0.9)),
        spec=spec,
        max_iterations=int(flat.get("max_iterations", 20)),
        seed=seed,
        train_cap=int(flat["train_cap"]) if "train_cap" in flat else 2000,
        patch_params={"n_trees": 8, "max_depth": 6},
        tabular_params={"n_trees": 10, "max_depth": 8})
    from .features import patch_features
    labeling = loop_mod.LabelingLoop(
        store, loop_cfg,
        patch_row_fn=lambda s: patch_features(
            world_mod.patch_for_sample(world, s.id)))
    return world, store, truth_classes, labeling


def cmd_loop(args) -> int:
    flat = _load_config(args.config) if args.config else {}
    if args.error_rate is not None:
        flat["error_rate"] = str(args.error_rate)
    world, store, truth_classes, labeling = _loop_from_config(flat, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mode = args.annotator or flat.get("annotator", "oracle")
    if mode != "oracle":
        log.error("loop subcommand drives the oracle annotator; "
                  "use `serve` for the service mode")
        return 2
    error_rate = float(flat.get("error_rate", 0.0))
    annotator = loop_mod.simulated_annotator(
        lambda sid: truth_classes[sid], error_rate,
        seed=int(flat.get("seed", args.seed)) + 1)
    ledger = labeling.run_until_complete(annotator)
    ledger.export_csv(out / "ledger.csv")
    plots.plot_ledger(ledger, out / "ledger.png")
    store.save(out / "samples_final.jsonl")
    report = ledger.report()
    with open(out / "labor_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    _echo_config(out, flat)
    log.info("loop complete: %s", report)
    return 0


def cmd_eval(args) -> int:
    cfg = world_mod.WorldConfig(seed=args.seed)
    world = world_mod.generate(cfg)
    store, truth_classes = world_mod.build_store(world, n_samples=args.n_samples,
                                                 seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.mode == "composition":
        certain, labeled, eval_set = world_mod.composition_sets(
            store, truth_classes, world, seed=args.seed)
        rows = []
        for mode in ("CSRF", "USRF", "CUSRF"):
            report = evaluation.composition_experiment(
                certain, labeled, mode, eval_set, seed=args.seed)
            rows.append((mode, report.pooled, report.sample_counts["eval"]))
            log.info("%s: OA=%.4f kappa=%.4f", mode, report.pooled.oa,
                     report.pooled.kappa)
        name = f"composition_seed{args.seed}"
    else:
        world_mod.oracle_label_all(store, truth_classes)
        samples = list(store)
        target = args.grid or samples[0].grid_id
        rows = []
        strategies = [args.strategy] if args.strategy else [1, 2, 3, 4, 5]
        for strategy in strategies:
            report = evaluation.strategy_experiment(strategy, target,
                                                    samples, seed=args.seed)
            rows.append((f"strategy-{strategy}", report.pooled,
                         report.sample_counts["eval"]))
            log.info("strategy %d on %s: OA=%.4f", strategy, target,
                     report.pooled.oa)
        name = f"strategy_{target}_seed{args.seed}"
    evaluation.write_metrics_report(rows, out / f"{name}.csv")
    plots.plot_metrics(rows, out / f"{name}.png", title=name)
    _echo_config(out, {"mode": args.mode, "seed": args.seed,
                       "n_samples": args.n_samples})
    return 0


def cmd_serve(args) -> int:
    flat = _load_config(args.config) if args.config else {}
    world, store, truth_classes, labeling = _loop_from_config(flat, args)
    from .service import AnnotationService, Session, create_app
    tokens = {}
    for i, token in enumerate(args.token or ["annotator-token"]):
        tokens[token] = Session(annotator_id=f"annotator-{i}")
    tokens[args.admin_token] = Session(annotator_id="admin",
                                       capabilities=("annotate", "admin"))
    service = AnnotationService(
        labeling, tokens,
        patch_fn=lambda sid: world_mod.patch_for_sample(world, sid))
    labeling.run_iteration()
    static = args.static if args.static and Path(args.static).is_dir() else None
    app = create_app(service, static_dir=static)
    import uvicorn
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consensus-labeler",
        description="Consensus labeling toolkit: product agreement, "
                    "iterative sample labeling, accuracy assessment")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker parallelism bound (advisory)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic world")
    p.add_argument("--seed", type=int, default=_seed_default())
    p.add_argument("--size", type=int, default=160)
    p.add_argument("--n-samples", type=int, default=5000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("agreement", help="overlay binary product rasters")
    p.add_argument("--products", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("grids", help="classify grid certainty")
    p.add_argument("--agreement", required=True)
    p.add_argument("--cell", type=float, default=5.0)
    p.add_argument("--threshold", type=float, default=0.3)
    p.add_argument("--min-valid-fraction", type=float, default=0.10)
    p.add_argument("--n-products", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grids)

    p = sub.add_parser("sample", help="NDVI-stratified sampling")
    p.add_argument("--ndvi", required=True)
    p.add_argument("--strata", type=int, default=10)
    p.add_argument("--per-stratum", type=int, default=500)
    p.add_argument("--seed", type=int, default=_seed_default())
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("loop", help="run the labeling loop to completion")
    p.add_argument("--config")
    p.add_argument("--annotator", choices=["oracle"], default="oracle")
    p.add_argument("--error-rate", type=float, default=None)
    p.add_argument("--seed", type=int, default=_seed_default())
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_loop)

    p = sub.add_parser("eval", help="experiment harnesses")
    p.add_argument("--mode", choices=["composition", "strategy"],
                   required=True)
    p.add_argument("--strategy", type=int, choices=[1, 2, 3, 4, 5])
    p.add_argument("--grid")
    p.add_argument("--seed", type=int, default=_seed_default())
    p.add_argument("--n-samples", type=int, default=8000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--config")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--seed", type=int, default=_seed_default())
    p.add_argument("--token", action="append",
                   help="annotator bearer token (repeatable)")
    p.add_argument("--admin-token", default="admin-token")
    p.add_argument("--static", help="directory of UI assets to serve")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
