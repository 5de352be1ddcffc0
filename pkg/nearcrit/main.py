"""Command-line entry point."""
import argparse
import asyncio
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from nearcrit import config as settings
from nearcrit import messages
from nearcrit.arms import ArmSpec
from nearcrit.errors import NearcritError
from nearcrit.estimators import estimate_arm, estimate_crossing, estimate_L, estimate_theta
from nearcrit.experiments import SUITES, ExperimentConfig, run
from nearcrit.forestfire import FireOptions, FireTimeline, YResult, simulate_ffwor, simulate_Y
from nearcrit.frozen import simulate_frozen
from nearcrit.impurities import HoleConfig, HoleParams, apply_holes, describe_domain, sample_holes
from nearcrit.lattice import Window
from nearcrit.models import EstimateKind
from nearcrit.percolation import SiteConfig, sample
from nearcrit.render import Colormap, RenderSpec, render
from nearcrit.scales import exceptional_sequence
from nearcrit.scheduler import set_threads
from nearcrit.services.cache import load_backend, save_estimates
from nearcrit.services.export import read_csv_header, reproducibility_header, write_csv, write_json

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

WINDOW_SIZES = {
    "ball": 1,
    "box": 1,
    "annulus": 2,
    "rectangle": 4,
    "parallelogram": 4,
}

# Options that describe the invocation rather than the sampled object.
NON_CONFIG_KEYS = {
    "handler", "config", "log_level", "out", "threads", "render", "image", "store",
    "xlsx", "list_suites", "cell", "colormap", "time", "timeline",
}


# =============================================================================
# CONFIG FILE
# =============================================================================

def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw.strip().strip("\"'")


def load_config_file(path: str) -> Dict[str, Any]:
    """
    Option values from a JSON object or ``key = value`` lines.

    Keys may use dashes or underscores. A JSON object may nest values under a
    subcommand name; those apply to that subcommand only.
    """
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        data = json.loads(text)
    else:
        data = {}
        for number, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{number}: expected 'key = value'")
            key, raw = line.split("=", 1)
            data[key.strip()] = _parse_value(raw.strip())
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def _dests(parser: argparse.ArgumentParser) -> set:
    return {action.dest for action in parser._actions if action.dest != argparse.SUPPRESS}


def apply_config_defaults(
    parser: argparse.ArgumentParser,
    subparsers: Dict[str, argparse.ArgumentParser],
    command: Optional[str],
    values: Dict[str, Any],
) -> None:
    """File values become parser defaults, so explicit flags still win."""
    scoped = {k: v for k, v in values.items() if not isinstance(v, dict)}
    if command:
        section = values.get(command.replace("-", "_")) or values.get(command)
        if isinstance(section, dict):
            scoped.update({str(k).replace("-", "_"): v for k, v in section.items()})
    known = _dests(parser)
    targets = [parser]
    if command and command in subparsers:
        targets.append(subparsers[command])
        known |= _dests(subparsers[command])
        for sub in subparsers[command]._actions:
            if isinstance(sub, argparse._SubParsersAction):
                for child in sub.choices.values():
                    known |= _dests(child)
                    targets.append(child)
    unknown = sorted(set(scoped) - known)
    if unknown:
        parser.error(f"unknown keys in config file: {', '.join(unknown)}")
    for target in targets:
        own = _dests(target)
        target.set_defaults(**{k: v for k, v in scoped.items() if k in own})


# =============================================================================
# SHARED BUILDERS
# =============================================================================

def make_window(kind: str, size: Sequence[float]) -> Window:
    size = [float(s) for s in size]
    expected = WINDOW_SIZES.get(kind)
    if expected is None:
        raise ValueError(f"Unknown window kind '{kind}'")
    if len(size) != expected:
        raise ValueError(f"Window '{kind}' takes {expected} size values, got {len(size)}")
    if kind == "ball":
        return Window.ball(size[0])
    if kind == "box":
        return Window.box(size[0])
    if kind == "annulus":
        return Window.annulus(*size)
    if kind == "rectangle":
        return Window.rectangle(*size)
    return Window.parallelogram(*(int(s) for s in size))


def _window_from(cfg: Dict[str, Any]) -> Window:
    return make_window(cfg["window"], cfg["size"])


def build_percolation(cfg: Dict[str, Any], seed: int) -> SiteConfig:
    return sample(_window_from(cfg), cfg["p"], seed)


def hole_params_from(cfg: Dict[str, Any]) -> HoleParams:
    return HoleParams(m=cfg["m"], alpha=cfg["alpha"], beta=cfg["beta"], c1=cfg["c1"], c2=cfg["c2"], c3=cfg["c3"])


def build_holes(cfg: Dict[str, Any], seed: int) -> Tuple[HoleConfig, Optional[SiteConfig]]:
    window = _window_from(cfg)
    holes = sample_holes(window, hole_params_from(cfg), seed, pad=cfg.get("pad"))
    base = None
    if cfg.get("p") is not None:
        base = sample(window, cfg["p"], seed + 1)
    return holes, base


def fire_options_from(cfg: Dict[str, Any]) -> FireOptions:
    return FireOptions(
        zeta=cfg["zeta"],
        t_end=math.inf if cfg["until_all_burnt"] else cfg["t_end"],
        region=Window.box(cfg["n"]),
        stop_ignitions_at=cfg.get("stop_ignitions_at"),
        burn_boundary=cfg["burn_boundary"],
        recovery=cfg["recovery"],
        until_all_burnt=cfg["until_all_burnt"],
    )


def build_fire(cfg: Dict[str, Any], seed: int) -> FireTimeline:
    return simulate_ffwor(fire_options_from(cfg), seed)


def _run_y(cfg: Dict[str, Any], seed: int) -> YResult:
    backend = load_backend(cfg.get("backend", "analytic"))
    return simulate_Y(_window_from(cfg), cfg["zeta"], cfg["t"], seed, pad_cap=cfg["pad_cap"], backend=backend)


def build_y(cfg: Dict[str, Any], seed: int) -> SiteConfig:
    return _run_y(cfg, seed).config


def build_frozen(cfg: Dict[str, Any], seed: int) -> SiteConfig:
    return simulate_frozen(_window_from(cfg), cfg["threshold"], seed).config


def _source_for(command: str, cfg: Dict[str, Any], seed: int) -> Tuple[Any, Optional[SiteConfig]]:
    if command == "sample-perc":
        return build_percolation(cfg, seed), None
    if command == "sample-holes":
        return build_holes(cfg, seed)
    if command == "fire":
        return build_fire(cfg, seed), None
    if command == "y-process":
        return build_y(cfg, seed), None
    if command == "frozen":
        return build_frozen(cfg, seed), None
    raise ValueError(f"Outputs of '{command}' cannot be rendered")


# =============================================================================
# OUTPUT
# =============================================================================

def effective_config(args: argparse.Namespace) -> Dict[str, Any]:
    cfg = {k: v for k, v in vars(args).items() if k not in NON_CONFIG_KEYS}
    return cfg


def _out_path(args: argparse.Namespace, name: str) -> Path:
    return Path(args.out) / name


def _stem(cfg: Dict[str, Any], header: Dict[str, Any]) -> str:
    return f"{cfg['command']}-{header['config_hash']}"


def _emit(path: Path) -> None:
    logger.info(messages.OUTPUT_WRITTEN.format(path=path))
    print(path)


def _maybe_render(args: argparse.Namespace, source: Any, header: Dict[str, Any], base: Optional[SiteConfig] = None) -> None:
    if not getattr(args, "render", None):
        return
    colormap = getattr(args, "colormap", None) or (Colormap.HOLES_OVERLAY if isinstance(source, HoleConfig) else Colormap.TRI_STATE)
    spec = RenderSpec(
        source=source,
        colormap=colormap,
        cell=args.cell,
        base=base,
        time=getattr(args, "time", None),
        header=json.dumps(header, sort_keys=True),
    )
    _emit(render(spec, args.render))


# =============================================================================
# COMMANDS
# =============================================================================

def cmd_sample_perc(args: argparse.Namespace) -> None:
    cfg = effective_config(args)
    config = build_percolation(cfg, args.seed)
    header = reproducibility_header(cfg, args.seed)
    rows = [{"x": v.x, "y": v.y, "state": s} for v, s in config.iter_states()]
    _emit(write_csv(_out_path(args, _stem(cfg, header) + ".csv"), rows, header=header, fieldnames=["x", "y", "state"]))
    logger.info(f"Occupied fraction {config.occupied_fraction():.4f} over {config.n_sites} sites")
    _maybe_render(args, config, header)


def cmd_sample_holes(args: argparse.Namespace) -> None:
    cfg = effective_config(args)
    params = hole_params_from(cfg)
    print(describe_domain(params.alpha, params.beta))
    holes, base = build_holes(cfg, args.seed)
    header = reproducibility_header(cfg, args.seed)
    data = {**header, "domain": describe_domain(params.alpha, params.beta), "holes": holes.to_dict()}
    _emit(write_json(_out_path(args, _stem(cfg, header) + ".json"), data))
    if base is not None:
        logger.info(f"Occupied fraction with holes {apply_holes(base, holes).occupied_fraction():.4f}")
    _maybe_render(args, holes, header, base)


def cmd_fire(args: argparse.Namespace) -> None:
    cfg = effective_config(args)
    timeline = build_fire(cfg, args.seed)
    header = reproducibility_header(cfg, args.seed)
    stem = _stem(cfg, header)
    _emit(write_csv(_out_path(args, stem + "-burns.csv"), timeline.burn_rows(), header=header, fieldnames=["time", "x", "y", "size"]))
    summary = {
        **header,
        "end_time": timeline.end_time,
        "burns": len(timeline.burns),
        "ignitions": int(timeline.ignition_times.size),
        "rebirths": timeline.rebirths,
        "occupied_fraction": timeline.final.occupied_fraction(),
        "stats": timeline.stats,
    }
    _emit(write_json(_out_path(args, stem + ".json"), summary))
    if args.timeline:
        path = _out_path(args, stem + "-timeline.json")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({**header, "timeline": timeline.to_dict()}, sort_keys=True), encoding="utf-8")
        _emit(path)
    _maybe_render(args, timeline, header)


def cmd_frozen(args: argparse.Namespace) -> None:
    cfg = effective_config(args)
    result = simulate_frozen(_window_from(cfg), cfg["threshold"], args.seed)
    header = reproducibility_header(cfg, args.seed)
    stem = _stem(cfg, header)
    _emit(write_csv(
        _out_path(args, stem + "-merges.csv"), result.merge_rows(), header=header,
        fieldnames=["time", "x", "y", "parts", "size", "froze"],
    ))
    summary = {
        **header,
        "frozen_sizes": result.frozen_sizes(),
        "max_cluster_size": result.max_cluster_size(),
        "size_cap": result.size_cap,
        "blocked": result.blocked,
        "occupied_fraction": result.config.occupied_fraction(),
    }
    _emit(write_json(_out_path(args, stem + ".json"), summary))
    _maybe_render(args, result.config, header)


def cmd_y_process(args: argparse.Namespace) -> None:
    cfg = effective_config(args)
    result = _run_y(cfg, args.seed)
    header = reproducibility_header(cfg, args.seed)
    summary = {
        **header,
        "marks": result.marks,
        "removed_clusters": result.removed_clusters,
        "clipped": result.clipped,
        "occupied_fraction": result.config.occupied_fraction(),
    }
    _emit(write_json(_out_path(args, _stem(cfg, header) + ".json"), summary))
    _maybe_render(args, result.config, header)


def cmd_estimate(args: argparse.Namespace) -> None:
    cfg = effective_config(args)
    header = reproducibility_header(cfg, args.seed)
    what = args.what
    if what == "L":
        value = estimate_L(args.p, args.mc_budget, args.seed, args.threads)
        print(messages.L_RESULT.format(p=args.p, value=value))
        row = {"p": args.p, "estimate": value, "std_err": 0.0, "n_samples": args.mc_budget, "seed": args.seed}
    else:
        if what == "arm":
            est = estimate_arm(ArmSpec.parse(args.sigma), args.n1, args.n2, args.p, args.samples, args.seed, args.threads)
        elif what == "crossing":
            est = estimate_crossing(
                _window_from(cfg), args.p, args.samples, args.seed,
                orientation=args.orientation, color=args.color, threads=args.threads,
            )
        else:
            est = estimate_theta(args.p, args.n, args.samples, args.seed, args.threads)
        print(messages.ESTIMATE_RESULT.format(name=what, **est.to_row()))
        row = {"p": args.p, "estimate": est.p_hat, "std_err": est.std_err, "n_samples": est.n_samples, "seed": args.seed}
        if what == "theta":
            row["n"] = args.n
    _emit(write_csv(_out_path(args, _stem(cfg, header) + ".csv"), [row], header=header))
    if args.store:
        asyncio.run(save_estimates(EstimateKind(what), [{**row, "metadata": cfg}]))


def cmd_scales(args: argparse.Namespace) -> None:
    cfg = effective_config(args)
    backend = load_backend(args.backend)
    table = exceptional_sequence(args.zeta, args.k_max, backend)
    cfg["backend_spec"] = backend.to_dict()
    header = reproducibility_header(cfg, args.seed)
    rows = table.to_rows()
    _emit(write_csv(_out_path(args, _stem(cfg, header) + ".csv"), rows, header=header))
    logger.info(f"t_inf({args.zeta}) = {table.t_inf:.10g}")


def _param_pairs(pairs: List[str]) -> Dict[str, Any]:
    params = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ValueError(f"--param expects key=value, got '{pair}'")
        key, raw = pair.split("=", 1)
        params[key.strip().replace("-", "_")] = _parse_value(raw)
    return params


def cmd_experiment(args: argparse.Namespace) -> None:
    if args.list_suites or not args.name:
        for name in sorted(SUITES):
            print(f"{name:<32} {SUITES[name].description}")
        return
    cfg = ExperimentConfig(
        name=args.name,
        params=_param_pairs(args.param),
        seed=args.seed,
        out=Path(args.out),
        budget=args.budget,
        xlsx=args.xlsx,
    )
    outcome = run(cfg, threads=args.threads)
    _emit(outcome.csv_path)
    _emit(outcome.summary_path)
    print(f"{outcome.name}: {outcome.status.value}")


def _read_header(path: Path) -> Dict[str, Any]:
    if path.suffix.lower() == ".csv":
        header = read_csv_header(path)
    else:
        header = json.loads(path.read_text(encoding="utf-8"))
    if not header or "config" not in header:
        raise ValueError(f"{path} carries no reproducibility header")
    return header


def cmd_render(args: argparse.Namespace) -> None:
    header = _read_header(Path(args.input))
    cfg = dict(header["config"])
    seed = int(header["seed"])
    source, base = _source_for(cfg["command"], cfg, seed)
    colormap = args.colormap or (Colormap.HOLES_OVERLAY if isinstance(source, HoleConfig) else Colormap.TRI_STATE)
    spec = RenderSpec(
        source=source, colormap=colormap, cell=args.cell, base=base, time=args.time,
        header=json.dumps(header, sort_keys=True),
    )
    _emit(render(spec, args.image))


# =============================================================================
# PARSER
# =============================================================================

def _float_or_none(value: str) -> Optional[float]:
    return None if value.lower() in ("none", "") else float(value)


def _threshold(value: str) -> Optional[int]:
    return None if value.lower() in ("inf", "none", "infinity") else int(value)


def _add_window(p: argparse.ArgumentParser, kind: str = "ball", size: Sequence[float] = (32.0,)) -> None:
    p.add_argument("--window", choices=sorted(WINDOW_SIZES), default=kind)
    p.add_argument("--size", type=float, nargs="+", default=list(size), help="ball: n, box: side, annulus: n1 n2, rectangle: x1 x2 y1 y2, parallelogram: x0 x1 y0 y1")


def _add_render(p: argparse.ArgumentParser, time_option: bool = False) -> None:
    p.add_argument("--render", metavar="IMAGE", help="also render to IMAGE (.ppm, .png or .svg)")
    p.add_argument("--colormap", choices=[c.value for c in Colormap])
    p.add_argument("--cell", type=int, default=4)
    if time_option:
        p.add_argument("--time", type=float)


def build_parser() -> Tuple[argparse.ArgumentParser, Dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="nearcrit", description=messages.CLI_DESCRIPTION, epilog=messages.CLI_EPILOG)
    parser.add_argument("--seed", type=lambda s: int(s, 0), default=settings.DEFAULT_SEED)
    parser.add_argument("--out", default=settings.OUTPUT_DIR)
    parser.add_argument("--threads", type=int, default=settings.THREADS)
    parser.add_argument("--config", metavar="FILE")
    parser.add_argument(
        "--log-level", type=str.upper, default=settings.LOG_LEVEL,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers: Dict[str, argparse.ArgumentParser] = {}

    def add(name: str, handler: Callable[[argparse.Namespace], None], help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        subparsers[name] = p
        return p

    p = add("sample-perc", cmd_sample_perc, "sample site percolation")
    _add_window(p)
    p.add_argument("--p", type=float, default=0.5)
    _add_render(p)

    p = add("sample-holes", cmd_sample_holes, "sample heavy-tailed holes")
    _add_window(p)
    p.add_argument("--m", type=float, default=16.0)
    p.add_argument("--alpha", type=float, default=55.0 / 48.0 + 0.02)
    p.add_argument("--beta", type=float, default=55.0 / 48.0 + 0.08)
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--c3", type=float, default=1.0)
    p.add_argument("--pad", type=_float_or_none, default=None)
    p.add_argument("--p", type=_float_or_none, default=None, help="also sample a base configuration at p")
    _add_render(p)

    p = add("fire", cmd_fire, "forest fire without recovery")
    p.add_argument("--zeta", type=float, default=0.01)
    p.add_argument("--n", type=float, default=64.0, help="box side")
    p.add_argument("--t-end", type=float, default=2.0)
    p.add_argument("--until-all-burnt", action="store_true")
    p.add_argument("--burn-boundary", action="store_true")
    p.add_argument("--recovery", action="store_true")
    p.add_argument("--stop-ignitions-at", type=_float_or_none, default=None)
    p.add_argument("--timeline", action="store_true", help="also write the full timeline as JSON")
    _add_render(p, time_option=True)

    p = add("frozen", cmd_frozen, "frozen percolation")
    _add_window(p)
    p.add_argument("--threshold", type=_threshold, default=16, help="freezing size N, or 'inf'")
    _add_render(p)

    p = add("y-process", cmd_y_process, "Y-process with independent removed clusters")
    _add_window(p, "box", (64.0,))
    p.add_argument("--zeta", type=float, default=0.01)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--pad-cap", type=float, default=256.0)
    p.add_argument("--backend", choices=["analytic", "empirical"], default="analytic")
    _add_render(p)

    p = add("estimate", cmd_estimate, "Monte Carlo estimates")
    p.add_argument("what", choices=["arm", "crossing", "L", "theta"])
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--mc-budget", type=int, default=40000)
    p.add_argument("--sigma", default="ovov")
    p.add_argument("--n1", type=float, default=1.0)
    p.add_argument("--n2", type=float, default=16.0)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--orientation", choices=["horizontal", "vertical"], default="horizontal")
    p.add_argument("--color", choices=["occupied", "vacant"], default="occupied")
    p.add_argument("--store", action="store_true", help="store the estimate in the cache")
    _add_window(p, "rectangle", (0.0, 32.0, 0.0, 16.0))

    p = add("scales", cmd_scales, "exceptional scale table")
    p.add_argument("--zeta", type=float, default=1e-4)
    p.add_argument("--k-max", type=int, default=4)
    p.add_argument("--backend", choices=["analytic", "empirical"], default="analytic")

    p = add("experiment", cmd_experiment, "run an experiment suite")
    p.add_argument("name", nargs="?")
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--budget", type=float)
    p.add_argument("--xlsx", action="store_true")
    p.add_argument("--list", dest="list_suites", action="store_true")

    p = add("render", cmd_render, "render a saved output from its reproducibility header")
    p.add_argument("input", help="CSV or JSON written by another subcommand")
    p.add_argument("image", help="output image (.ppm, .png or .svg)")
    p.add_argument("--colormap", choices=[c.value for c in Colormap])
    p.add_argument("--cell", type=int, default=4)
    p.add_argument("--time", type=float)

    return parser, subparsers


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse ``argv``; values from --config sit between built-in defaults and flags."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            values = load_config_file(known.config)
        except (OSError, ValueError) as e:
            parser.error(f"cannot read config file {known.config}: {e}")
        command = next((a for a in argv if a in subparsers), None)
        apply_config_defaults(parser, subparsers, command, values)
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI; returns 2 on bad arguments, 1 on runtime failure, 0 on success."""
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(format=LOG_FORMAT, level=args.log_level)
    if args.threads < 1:
        logger.error("--threads must be at least 1")
        return 2
    set_threads(args.threads)

    command = args.command
    logger.info(messages.RUN_STARTED.format(command=command, seed=args.seed))
    started = time.monotonic()
    try:
        args.handler(args)
    except (NearcritError, ValueError, OSError) as e:
        logger.error(messages.RUN_FAILED.format(command=command, error=e))
        print(str(e), file=sys.stderr)
        return 1
    logger.info(messages.RUN_FINISHED.format(command=command, seconds=time.monotonic() - started))
    return 0


if __name__ == "__main__":
    sys.exit(main())
