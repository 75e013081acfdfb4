"""Command-line front end.

    equicone geodesic --m 3 --n 3 --from-axis u --a 1 --out out/
    equicone analyze  --m 1 --n 5
    equicone sweep    --max 6
    equicone foliate  --m 3 --n 3 --window 0.5,2,0.1,1.5 --refine 2
    equicone field    tension --input f.json

Options may also come from ``--config FILE`` (flat ``key = value`` lines, keys
named like the long options with dashes or underscores); flags win.

Exit codes: 0 success, 2 argument error, 3 numerical failure, 4 undetermined verdict.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classify import SWEEP_COLUMNS, Minimality, minimality_verdict, sweep, sweep_rows
from .fields import (
    CoverageError,
    EmptyResultError,
    GridField,
    MaskedCellsError,
    coarea_check,
    cone_band,
    foliation_function,
    mse_residual,
    observed_order,
    one_tension,
    residual_report,
    tension_bound_check,
    tv_isotropic,
    tv_l1,
    weighted_one_tension,
)
from .geodesic import Event, GeodesicIntegrationError, IntegratorControls, integrate_from_axis
from .orbit import DomainError, OrbitParams

log = logging.getLogger("equicone")

EXIT_OK, EXIT_ARGS, EXIT_NUMERIC, EXIT_UNDETERMINED = 0, 2, 3, 4


class ArgumentError(Exception):
    pass


@dataclass
class RunConfig:
    out: Path = Path("out")
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = 1.0
    max_radius: float = 1e4
    stop_radius: float = 1e3
    gap_threshold: float = 1e-3
    nodes: int = 64
    grid_h: float = 0.02
    refine: int = 2
    levels: int = 256
    m_max: int = 6
    n_max: int = 6
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("rtol", "atol", "max_step", "max_radius", "stop_radius", "gap_threshold", "grid_h"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"{name} must be positive")

    def controls(self) -> IntegratorControls:
        return IntegratorControls(
            atol=self.atol, rtol=self.rtol, max_step=self.max_step, max_radius=self.max_radius
        )

    def output_dir(self) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ArgumentError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return val


def _window(text):
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("window is u0,u1,v0,v1")
    return tuple(parts)


def _add_common(p):
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--config", type=Path, help="key = value defaults file")
    p.add_argument("--rtol", type=float, default=1e-10)
    p.add_argument("--atol", type=float, default=1e-12)
    p.add_argument("--max-step", type=float, default=1.0)
    p.add_argument("--max-radius", type=float, default=1e4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="equicone", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("geodesic", help="integrate an axis-orthogonal geodesic")
    _add_common(g)
    g.add_argument("--m", type=_positive_int, required=True)
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--from-axis", choices=("u", "v"), default="u")
    g.add_argument("--a", type=float, default=1.0, help="axis foot")
    g.add_argument("--stop-radius", type=float, default=1e3)
    g.add_argument("--contacts", action="store_true", help="also record self-scaling contacts")

    a = sub.add_parser("analyze", help="classify the cone over S^m x S^n")
    _add_common(a)
    a.add_argument("--m", type=_positive_int, required=True)
    a.add_argument("--n", type=_positive_int, required=True)
    a.add_argument("--a", type=float, default=1.0)
    a.add_argument("--stop-radius", type=float, default=1e3)
    a.add_argument("--gap-threshold", type=float, default=1e-3)
    a.add_argument("--nodes", type=_positive_int, default=64)
    a.add_argument("--no-timestamp", action="store_true", help="omit the metadata timestamp")

    s = sub.add_parser("sweep", help="verdict table over 1 <= m, n <= max")
    _add_common(s)
    s.add_argument("--max", dest="m_max", type=_positive_int, default=6)
    s.add_argument("--n-max", type=_positive_int)
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--stop-radius", type=float, default=1e3)
    s.add_argument("--compete", action="store_true", help="also run the two-point competitor search")

    f = sub.add_parser("foliate", help="foliation function of the homothetic geodesics")
    _add_common(f)
    f.add_argument("--m", type=_positive_int, required=True)
    f.add_argument("--n", type=_positive_int, required=True)
    f.add_argument("--window", type=_window, required=True)
    f.add_argument("--h", dest="grid_h", type=float, default=0.04)
    f.add_argument("--refine", type=int, default=0, help="number of grid halvings for the residual study")
    f.add_argument("--cone-band", type=float, default=0.1, help="angular band around the cone ray left out of the residual")
    f.add_argument("--leaf-step", type=float, default=0.02, help="max arclength step along the leaves")
    f.add_argument("--leaf-radius", type=float, default=50.0)

    fl = sub.add_parser("field", help="grid operators on a GridField file")
    _add_common(fl)
    fl.add_argument("op", choices=("tension", "weighted-tension", "mse", "tv", "coarea", "bound"))
    fl.add_argument("--input", type=Path, required=True)
    fl.add_argument("--eps", type=float)
    fl.add_argument("--m", type=_positive_int)
    fl.add_argument("--n", type=_positive_int)
    fl.add_argument("--levels", type=int, default=256)
    fl.add_argument("--center", type=lambda t: tuple(float(x) for x in t.split(",")))
    fl.add_argument("--radius", type=float)
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return parser.parse_args(argv)
    values = read_config(known.config)
    args = parser.parse_args(argv)
    dests = {}
    for act in parser._actions:
        if isinstance(act, argparse._SubParsersAction):
            for sp in act.choices.values():
                dests.update({opt: a.dest for a in sp._actions for opt in a.option_strings})
    explicit = {dests.get(a.split("=", 1)[0], "") for a in argv if a.startswith("--")}
    for key, raw in values.items():
        key = dests.get("--" + key.replace("_", "-"), key)
        if key in explicit or not hasattr(args, key):
            continue
        current = getattr(args, key)
        if isinstance(current, bool):
            val = raw.lower() in ("1", "true", "yes", "on")
        elif isinstance(current, Path) or key in ("out", "input"):
            val = Path(raw)
        elif isinstance(current, int):
            val = int(raw)
        elif isinstance(current, float) or current is None:
            try:
                val = float(raw)
            except ValueError:
                val = raw
        else:
            val = raw
        setattr(args, key, val)
    return args


def _config_from(args) -> RunConfig:
    return RunConfig(
        out=Path(args.out),
        rtol=args.rtol,
        atol=args.atol,
        max_step=args.max_step,
        max_radius=args.max_radius,
        stop_radius=getattr(args, "stop_radius", 1e3),
        gap_threshold=getattr(args, "gap_threshold", 1e-3),
        nodes=getattr(args, "nodes", 64),
        grid_h=getattr(args, "grid_h", 0.02),
        refine=getattr(args, "refine", 0),
        levels=getattr(args, "levels", 256),
    )


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _fmt(x):
    return "n/a" if x is None else f"{x:.10g}"


def cmd_geodesic(args, cfg: RunConfig) -> int:
    p = OrbitParams(args.m, args.n)
    events = {Event.RAY_CROSSING, Event.AXIS_APPROACH}
    if args.contacts:
        events.add(Event.SELF_SCALING_CONTACT)
    T = integrate_from_axis(p, args.from_axis, args.a, args.stop_radius, cfg.controls(), events)
    out = cfg.output_dir()
    stem = f"geodesic_m{p.m}_n{p.n}_{args.from_axis}"
    T.to_csv(out / f"{stem}.csv")
    (out / f"{stem}_events.json").write_text(T.events_json() + "\n")
    crossings = len(T.events_of(Event.RAY_CROSSING))
    print(f"{stem}: {len(T)} samples, status={T.status}, ray crossings={crossings}, final r={T.r[-1]:.6g}")
    return EXIT_OK


def cmd_analyze(args, cfg: RunConfig) -> int:
    p = OrbitParams(args.m, args.n)
    v = minimality_verdict(
        p,
        a=args.a,
        stop_radius=cfg.stop_radius,
        ctrl=cfg.controls(),
        gap_threshold=cfg.gap_threshold,
        compete_nodes=cfg.nodes,
    )
    meta = {"version": __version__}
    if not args.no_timestamp:
        meta["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    out = cfg.output_dir()
    path = out / f"verdict_m{p.m}_n{p.n}.json"
    path.write_text(v.to_json(meta) + "\n")
    print(
        f"C(S^{p.m} x S^{p.n}): {v.minimality.value}, {v.stability.value}; "
        f"crossings={v.crossings}, foliation_ok={v.foliation_ok}, "
        f"ray_length={_fmt(v.ray_length)}, competitor_length={_fmt(v.competitor_length)}"
    )
    for loc in v.crossing_locations:
        print(f"  crossing from {loc['axis']}-axis at r={loc['r']:.6g}, cone defect {loc['cone_defect']:.3e}")
    return EXIT_UNDETERMINED if v.minimality is Minimality.UNDETERMINED else EXIT_OK


def cmd_sweep(args, cfg: RunConfig) -> int:
    verdicts = sweep(
        args.m_max,
        args.n_max or args.m_max,
        workers=args.workers,
        stop_radius=cfg.stop_radius,
        ctrl=cfg.controls(),
        compete_radii=(1.0, 2.0) if args.compete else None,
    )
    rows = sweep_rows(verdicts)
    out = cfg.output_dir()
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        print(f"m={r['m']} n={r['n']}: {r['minimality']}, {r['stability']}, crossings={r['crossings']}")
    return EXIT_OK


def cmd_foliate(args, cfg: RunConfig) -> int:
    p = OrbitParams(args.m, args.n)
    ctrl = IntegratorControls(atol=cfg.atol, rtol=cfg.rtol, max_step=args.leaf_step, max_radius=cfg.max_radius)
    leaves = [integrate_from_axis(p, axis, 1.0, args.leaf_radius, ctrl) for axis in ("u", "v")]
    out = cfg.output_dir()
    levels = []
    h = cfg.grid_h
    g0 = None
    for i in range(args.refine + 1):
        g = foliation_function(p, leaves, args.window, h)
        res = weighted_one_tension(p, g)
        where = cone_band(p, g, args.cone_band)
        levels.append({"h": h, **residual_report(res, where=where)})
        if i == 0:
            g0 = g
        h /= 2.0
    errs = [lv["max_residual"] for lv in levels]
    order = observed_order(errs)
    report = {
        "m": p.m,
        "n": p.n,
        "window": list(args.window),
        "cone_band": args.cone_band,
        "max_residual": errs[0],
        "masked_fraction": levels[0]["masked_fraction"],
        "order_estimate": order[-1] if order else None,
        "levels": levels,
        "decreasing": all(b < a for a, b in zip(errs, errs[1:])),
    }
    g0.save(out / "foliation.json")
    _write_json(out / "foliation_residual.json", report)
    print(f"foliation m={p.m} n={p.n}: max residual by level {', '.join(f'{e:.3e}' for e in errs)}")
    return EXIT_OK


def cmd_field(args, cfg: RunConfig) -> int:
    f = GridField.load(args.input)
    out = cfg.output_dir()
    stem = args.op.replace("-", "_")
    if args.op in ("tension", "weighted-tension", "mse"):
        if args.op == "tension":
            res = one_tension(f, args.eps)
        elif args.op == "mse":
            res = mse_residual(f)
        else:
            if args.m is None or args.n is None:
                raise ArgumentError("weighted-tension needs --m and --n")
            res = weighted_one_tension(OrbitParams(args.m, args.n), f, args.eps)
        res.save(out / f"{stem}.json")
        report = residual_report(res)
    elif args.op == "tv":
        report = {"tv_l1": tv_l1(f), "tv_isotropic": tv_isotropic(f)}
    elif args.op == "coarea":
        edges = np.linspace(float(f.values.min()), float(f.values.max()), args.levels)
        report = coarea_check(f, edges).record()
    else:
        if args.center is None or args.radius is None:
            raise ArgumentError("bound needs --center and --radius")
        report = tension_bound_check(f, args.center, args.radius, args.eps).record()
    _write_json(out / f"{stem}_report.json", report)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "geodesic": cmd_geodesic,
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "foliate": cmd_foliate,
    "field": cmd_field,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ArgumentError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        cfg = _config_from(args)
        log.debug("config: %s", asdict(cfg))
        return COMMANDS[args.command](args, cfg)
    except (ArgumentError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (GeodesicIntegrationError, EmptyResultError, MaskedCellsError, CoverageError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
