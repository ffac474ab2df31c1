"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .metrics import macro_iou, precision_recall_ap
from .ontology import builtin_ontology, load_ontology
from .render import PaletteError, RenderSpec, default_palette, render_pgm, render_svg
from .scenario import PRESETS, generate_scenario, load_scenario, save_scenario
from .trial import (
    ConfigError,
    batch_csv,
    config_from_dict,
    grid_from_csv,
    load_config,
    run_batch,
    run_trial,
    sweep,
    write_outputs,
)


class RuntimeFailure(Exception):
    pass


def _common(top: bool) -> argparse.ArgumentParser:
    # subcommands suppress defaults so a flag given before the subcommand survives
    kw = {} if top else {"default": argparse.SUPPRESS}
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="trial config (JSON)", **kw)
    p.add_argument("--seed", type=int, help="master seed override", **kw)
    p.add_argument("--out", type=Path, help="output file or directory", **kw)
    p.add_argument("--no-render", action="store_true", help="skip image outputs", **kw)
    return p


def _parse_density(text: str):
    try:
        return float(text)
    except ValueError:
        pass
    try:
        d = json.loads(text)
    except json.JSONDecodeError:
        raise argparse.ArgumentTypeError(f"density must be a number or JSON object: {text!r}")
    if not isinstance(d, dict):
        raise argparse.ArgumentTypeError("density JSON must map zone labels to values")
    return {str(k): float(v) for k, v in d.items()}


def build_parser() -> argparse.ArgumentParser:
    common = _common(False)
    parser = argparse.ArgumentParser(prog="semslam", parents=[_common(True)],
                                     description="Multi-agent semantic mapping simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-scenario", parents=[common], help="generate a scenario file")
    g.add_argument("--preset", required=True, choices=sorted(PRESETS))
    g.add_argument("--density", type=_parse_density, help="features per km² (number or JSON map)")
    g.add_argument("--agents", type=int, default=3)
    g.add_argument("--ontology", help="built-in ontology name or path")

    r = sub.add_parser("run", parents=[common], help="run one trial")
    r.add_argument("--preset", choices=sorted(PRESETS), help="run a preset instead of --config")
    r.add_argument("--density", type=_parse_density)

    rd = sub.add_parser("render", parents=[common], help="render grids or a map")
    rd.add_argument("--truth", type=Path, help="truth grid CSV")
    rd.add_argument("--pred", type=Path, help="predicted grid CSV")
    rd.add_argument("--scenario", type=Path, help="scenario file (SVG map render)")
    rd.add_argument("--map", type=Path, help="collective_map.json for the SVG render")
    rd.add_argument("--format", choices=("pgm", "svg"), default="pgm")
    rd.add_argument("--palette", type=Path, help="JSON {label: gray level}")
    rd.add_argument("--px", type=int, default=10, help="pixels per grid cell")
    rd.add_argument("--scale", type=float, default=200.0, help="SVG pixels per km")

    m = sub.add_parser("metrics", parents=[common], help="score a predicted grid against truth")
    m.add_argument("--pred", type=Path, required=True)
    m.add_argument("--truth", type=Path, required=True)

    b = sub.add_parser("batch", parents=[common], help="run a parameter sweep")
    b.add_argument("--configs", type=Path, nargs="+", help="explicit config files")
    b.add_argument("--sweep", action="append", default=[], metavar="KEY=V1,V2",
                   help="dotted config key and JSON values, e.g. scenario.density=5,20,80")
    b.add_argument("--workers", type=int, default=1)
    return parser


def _load_palette(path: Path | None, labels) -> dict[str, int]:
    if path is None:
        envs = list(builtin_ontology("canberra").environments)
        return default_palette(envs + sorted(set(labels) - set(envs)))
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise RuntimeFailure(f"cannot read palette: {exc}")
    return {str(k): int(v) for k, v in data.items()}


def cmd_gen_scenario(args) -> int:
    onto = None
    if args.ontology:
        try:
            onto = builtin_ontology(args.ontology)
        except FileNotFoundError:
            onto = load_ontology(args.ontology)
    spec = generate_scenario(args.preset, args.density, args.seed or 0, onto, args.agents)
    out = args.out or Path(f"{spec.name}.json")
    if out.is_dir():
        out = out / f"{spec.name}.json"
    save_scenario(spec, out)
    print(f"{out}: {len(spec.features)} features, area {spec.area:.4f} km²")
    return 0


def _run_config(args):
    if args.config is not None:
        cfg = load_config(args.config)
        if args.preset:
            raise RuntimeFailure("give either --config or --preset, not both")
    elif args.preset:
        sc = {"preset": args.preset, "seed": args.seed or 0}
        if args.density is not None:
            sc["density"] = args.density
        cfg = config_from_dict({"scenario": sc})
    else:
        return None
    if args.seed is not None:
        d = cfg.to_dict()
        d["seed"] = args.seed
        cfg = config_from_dict(d, cfg.base_dir)
    return cfg


def cmd_run(args) -> int:
    cfg = _run_config(args)
    if cfg is None:
        raise _Usage("run needs --config or --preset")
    result = run_trial(cfg)
    out = args.out or Path("out")
    write_outputs(result, out, render=not args.no_render)
    rep = result.report
    print(f"{rep.scenario}: {rep.discovered}/{rep.feature_count} features in {rep.steps} s; "
          f"grid IoU {rep.grid_iou:.3f} AP {rep.grid_ap:.3f}; "
          f"branch IoU {rep.branch_iou:.3f} AP {rep.branch_ap:.3f}")
    print(f"outputs in {out}")
    return 0 if rep.terminated else 1


def cmd_render(args) -> int:
    spec = RenderSpec(px_per_cell=args.px, scale=args.scale)
    if args.format == "svg":
        if args.scenario is None:
            raise _Usage("svg render needs --scenario")
        scen = load_scenario(args.scenario)
        lms = []
        if args.map is not None:
            from .landmarks import LandmarkMap

            lms = list(LandmarkMap.loads(args.map.read_text()))
        pal = _load_palette(args.palette, [z.label for z in scen.zones])
        text = render_svg(scen, lms, palette=pal, spec=spec)
        out = args.out or Path("map.svg")
        out.write_text(text)
    else:
        if args.truth is None:
            raise _Usage("pgm render needs --truth")
        truth, _ = grid_from_csv(args.truth.read_text())
        pred = grid_from_csv(args.pred.read_text())[0] if args.pred else None
        labels = {str(v) for v in truth.ravel()}
        if pred is not None:
            labels |= {str(v) for v in pred.ravel()}
        pal = _load_palette(args.palette, labels)
        data = render_pgm(truth, pred, pal, spec)
        out = args.out or Path("render.pgm")
        out.write_bytes(data)
    print(out)
    return 0


def metrics_table(pred, conf, truth) -> tuple[str, str]:
    """Printed table and CSV of per-class IoU/AP plus macro rows."""
    m_iou, per_iou = macro_iou(pred, truth)
    pr = precision_recall_ap(pred, conf, truth)
    rows = [("class", "iou", "ap", "precision", "recall")]
    for c, v in pr["per_class"].items():
        rows.append((c, repr(per_iou[c]), repr(v["ap"]), repr(v["precision"]), repr(v["recall"])))
    rows.append(("macro", repr(m_iou), repr(pr["mAP"]), "", ""))
    rows.append(("micro", "", repr(pr["micro_ap"]), "", ""))
    csv_text = "\n".join(",".join(r) for r in rows) + "\n"
    width = max(len(r[0]) for r in rows)
    lines = []
    for r in rows:
        cells = [r[0].ljust(width)] + [(x if r is rows[0] or x == "" else f"{float(x):.4f}").rjust(9)
                                       for x in r[1:]]
        lines.append("  ".join(cells))
    return "\n".join(lines) + "\n", csv_text


def cmd_metrics(args) -> int:
    pred, conf = grid_from_csv(args.pred.read_text())
    truth, _ = grid_from_csv(args.truth.read_text())
    table, csv_text = metrics_table(pred, conf, truth)
    sys.stdout.write(table)
    if args.out:
        args.out.write_text(csv_text)
    return 0


def cmd_batch(args) -> int:
    configs = []
    if args.configs:
        configs = [load_config(p) for p in args.configs]
    if args.config is not None:
        base = load_config(args.config)
        values = {}
        for item in args.sweep:
            if "=" not in item:
                raise _Usage(f"bad --sweep {item!r}, expected KEY=V1,V2")
            key, raw = item.split("=", 1)
            try:
                values[key] = [json.loads(v) for v in raw.split(",")]
            except json.JSONDecodeError as exc:
                raise _Usage(f"bad --sweep value in {item!r}: {exc}")
        configs += sweep(base, values)
    if not configs:
        raise _Usage("batch needs --config (with optional --sweep) or --configs")
    if args.seed is not None:
        configs = [config_from_dict(dict(c.to_dict(), seed=args.seed), c.base_dir) for c in configs]
    reports = run_batch(configs, args.workers)
    text = batch_csv(reports)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "batch.csv").write_text(text)
    sys.stdout.write(text)
    return 0 if all(not r.error for r in reports) else 1


class _Usage(Exception):
    pass


COMMANDS = {"gen-scenario": cmd_gen_scenario, "run": cmd_run, "render": cmd_render,
            "metrics": cmd_metrics, "batch": cmd_batch}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except _Usage as exc:
        parser.print_usage(sys.stderr)
        print(f"semslam: error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeFailure, ConfigError, PaletteError, OSError, ValueError, KeyError) as exc:
        print(f"semslam: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
