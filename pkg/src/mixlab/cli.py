"""Command-line front end: reproducible experiments with file outputs.

Every command resolves its parameters into a JSON-serializable config,
embeds that config in the output directory (config.json, also inlined into
JSON artifacts), and derives all randomness from one explicit 64-bit seed.
Re-running a command from its embedded config reproduces every artifact
byte for byte (`mixlab replay`).

Exit codes: 0 success, 2 validation error, 3 capability error (window cap
exceeded, unsupported oracle request).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from . import __version__, svg as svgmod
from .algebraic import (
    AlgebraicSystem,
    BernoulliOracle,
    CylinderConstraint,
    LedrappierOracle,
    RelationPattern,
    TorusMonteCarloOracle,
    UnsupportedPatternError,
    WindowCapError,
    cylinder_measure,
    default_torus_for,
    grid_to_json,
    grid_to_pbm,
    ledrappier_system,
    mc_cylinder_measure,
    sample_configuration,
    torus_kernel,
)
from .correlations import (
    OracleCapabilityError,
    dev_heatmap_svg,
    dev_scan,
    dyadic_family,
    mix_defect_scan,
    mix_rows_to_csv,
    random_separated_shifts,
    scan_rows_to_csv,
)
from .joinings import (
    JoiningTensor,
    Partition,
    chain_check,
    classify,
    compose_P3,
    limit_joining,
    lower_order,
    markov_from_joining,
    raise_order,
    uniform_partition,
)
from .measure import format_fraction
from .percolation import clusters, percolation_sweep, sweep_to_csv
from .rankone import (
    PRESETS,
    RankOneSpec,
    WordOracle,
    full_level_set,
    generate_word,
    preset_spec,
    tower_heights,
)
from .rng import mix


class ValidationError(ValueError):
    pass


def _write_text(outdir: str, name: str, text: str) -> str:
    path = os.path.join(outdir, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _write_json(outdir: str, name: str, obj: dict) -> str:
    return _write_text(outdir, name, json.dumps(obj, sort_keys=True, indent=2,
                                                ensure_ascii=False) + "\n")


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"malformed JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        )


def _load_constellation(path: str) -> CylinderConstraint:
    try:
        return CylinderConstraint.from_json(_load_json(path))
    except ValueError as exc:
        raise ValidationError(f"bad constellation file {path}: {exc}")


def _load_events(path: str, expected: Optional[int] = None) -> list[CylinderConstraint]:
    obj = _load_json(path)
    if not isinstance(obj, dict) or "events" not in obj:
        raise ValidationError(f"{path}: events file needs an 'events' array")
    try:
        events = [CylinderConstraint.from_json(e) for e in obj["events"]]
    except ValueError as exc:
        raise ValidationError(f"bad event in {path}: {exc}")
    if expected is not None and len(events) != expected:
        raise ValidationError(f"{path}: expected {expected} events, found {len(events)}")
    return events


def _make_system(params: dict) -> AlgebraicSystem:
    pattern_file = params.get("pattern")
    if not pattern_file:
        return ledrappier_system()
    obj = _load_json(pattern_file)
    if "support" not in obj:
        raise ValidationError(f"{pattern_file}: pattern file needs 'support'")
    support = frozenset((int(p[0]), int(p[1])) for p in obj["support"])
    return AlgebraicSystem(RelationPattern(support))


def _prepare_outdir(params: dict) -> str:
    outdir = params.get("out")
    if not outdir:
        raise ValidationError("--out DIR is required")
    os.makedirs(outdir, exist_ok=True)
    return outdir


def _emit_config(outdir: str, command: str, params: dict) -> dict:
    config = {"command": command, "params": params, "version": __version__}
    _write_json(outdir, "config.json", config)
    return config


# ---------------------------------------------------------------------------
# Commands (each takes a resolved JSON-serializable params dict)

def cmd_measure(params: dict) -> int:
    outdir = _prepare_outdir(params)
    config = _emit_config(outdir, "measure", params)
    system_name = params.get("system", "ledrappier")
    constraint = _load_constellation(params["constellation"])
    if system_name == "bernoulli":
        from .algebraic import bernoulli_cylinder_measure
        result = bernoulli_cylinder_measure(constraint)
    elif system_name == "ledrappier":
        system = _make_system(params)
        if params.get("mc"):
            kernel = (torus_kernel(system, params["torus"], params["torus"])
                      if params.get("torus") else default_torus_for(system, constraint))
            result = mc_cylinder_measure(kernel, constraint,
                                         params.get("samples", 100000),
                                         params.get("seed", 0))
        else:
            result = cylinder_measure(system, constraint)
    else:
        raise ValidationError(f"unknown system {system_name!r}")
    _write_json(outdir, "measure.json", {"config": config, "result": result.to_json()})
    return 0


def cmd_scan_dev(params: dict) -> int:
    outdir = _prepare_outdir(params)
    config = _emit_config(outdir, "scan-dev", params)
    epsilon = params["epsilon"]
    h = params["h"]
    system = params.get("system", "bernoulli")
    if system == "bernoulli":
        oracle = BernoulliOracle()
        if params.get("events"):
            a, b, c = _load_events(params["events"], 3)
        else:
            a = b = c = CylinderConstraint((0,), (0,))
    elif system == "rankone":
        spec = _resolve_rankone_spec(params)
        word = generate_word(spec, params.get("stage", 1),
                             params.get("word_length", max(100 * h, 10000)))
        oracle = WordOracle(word, seed=params.get("seed", 0))
        a = b = c = frozenset({0})
    else:
        raise ValidationError(f"dev scan does not support system {system!r}")
    result = dev_scan(oracle, a, b, c, epsilon, h)
    _write_text(outdir, "dev.csv", scan_rows_to_csv(result.rows))
    _write_json(outdir, "dev.json", {"config": config, "result": result.to_json()})
    _write_text(outdir, "dev_heatmap.svg", dev_heatmap_svg(result))
    return 0


def cmd_scan_mix(params: dict) -> int:
    outdir = _prepare_outdir(params)
    config = _emit_config(outdir, "scan-mix", params)
    k = params["order"]
    system = params.get("system", "ledrappier")
    seed = params.get("seed", 0)
    budget = params.get("budget", 100)
    if system == "ledrappier":
        oracle = LedrappierOracle(_make_system(params))
        default_event = CylinderConstraint(((0, 0),), (0,))
        dim = 2
    elif system == "bernoulli":
        oracle = BernoulliOracle()
        default_event = CylinderConstraint((0,), (0,))
        dim = 1
    else:
        raise ValidationError(f"mix scan does not support system {system!r}")
    if params.get("events"):
        events = _load_events(params["events"], k + 1)
    else:
        events = [default_event] * (k + 1)
    family_name = params.get("family", "dyadic")
    if family_name == "dyadic":
        lo, hi = params.get("scales", [1, 8])
        if dim != 2 or k != 4:
            raise ValidationError("the dyadic family is the 5-point Z^2 family (order 4)")
        family = dyadic_family(range(lo, hi))
    elif family_name == "random":
        family = random_separated_shifts(seed, budget, k,
                                         params.get("min_gap", 8),
                                         params.get("box", 128), dim=dim,
                                         forbid_dyadic=params.get("non_dyadic", True))
    else:
        raise ValidationError(f"unknown shift family {family_name!r}")
    result = mix_defect_scan(oracle, k, events, family, budget)
    _write_text(outdir, "mix.csv", mix_rows_to_csv(result))
    summary = {
        "config": config,
        "order": result.order,
        "scanned": result.scanned,
        "max_abs_defect": format_fraction(result.max_abs_defect)
        if isinstance(result.max_abs_defect, Fraction) else result.max_abs_defect,
        "argmax": result.argmax.to_json() if result.argmax else None,
        "certificate": result.certificate,
    }
    _write_json(outdir, "mix.json", summary)
    return 0


def cmd_joining(params: dict) -> int:
    outdir = _prepare_outdir(params)
    config = _emit_config(outdir, "joining", params)
    if params.get("tensor"):
        tensor = JoiningTensor.from_json(_load_json(params["tensor"]))
    else:
        # Parity pipeline: limiting tensor of the 5-point dyadic family for
        # the 2-cell partition by the origin coordinate.
        oracle = LedrappierOracle(_make_system(params))
        lo, hi = params.get("scales", [1, 6])
        cells = [CylinderConstraint(((0, 0),), (b,)) for b in (0, 1)]
        tensor = limit_joining(oracle, uniform_partition(2), cells,
                               dyadic_family(range(lo, hi)),
                               order=params.get("order", 5))
    cls = classify(tensor)
    artifacts = {"config": config, "tensor": tensor.to_json(),
                 "classification": cls.to_json()}
    if params.get("chain") or params.get("raise_order") or params.get("lower_order"):
        if params.get("lower_order"):
            lowered, report = lower_order(tensor)
            artifacts["lowered"] = lowered.to_json()
            artifacts["lowered_report"] = report
        if params.get("chain") or params.get("raise_order"):
            from .joinings import parity_tensor
            base = parity_tensor(3) if tensor.dims == 2 else None
            if base is None:
                raise ValidationError("chain/raise need a 2-cell parity pipeline")
            p2 = markov_from_joining(base)
            if params.get("raise_order"):
                raised, report = raise_order(compose_P3(p2))
                artifacts["raised"] = raised.to_json()
                artifacts["raised_report"] = report
            if params.get("chain"):
                artifacts["chain"] = chain_check(p2).to_json()
    _write_json(outdir, "joining.json", artifacts)
    _write_json(outdir, "tensor.json", tensor.to_json())
    _write_json(outdir, "classification.json", cls.to_json())
    return 0


def cmd_percolate(params: dict) -> int:
    outdir = _prepare_outdir(params)
    config = _emit_config(outdir, "percolate", params)
    system = _make_system(params)
    rows = percolation_sweep(system, params["sizes"], params.get("samples", 20),
                             params.get("connectivity", 4), params.get("seed", 0),
                             workers=params.get("workers", 1))
    _write_text(outdir, "percolation.csv", sweep_to_csv(rows))
    _write_json(outdir, "percolation.json", {
        "config": config,
        "rows": [r.__dict__ for r in rows],
    })
    return 0


def cmd_render(params: dict) -> int:
    outdir = _prepare_outdir(params)
    config = _emit_config(outdir, "render", params)
    system = _make_system(params)
    size = params.get("size", 32)
    seed = params.get("seed", 0)
    kernel = torus_kernel(system, size, size)
    grid = sample_configuration(kernel, seed)
    fmt = params.get("format", "svg")
    formats = fmt.split(",") if isinstance(fmt, str) else list(fmt)
    for f in formats:
        if f == "svg":
            if params.get("clusters"):
                rep = clusters(grid, params.get("connectivity", 4),
                               params.get("bit", 0), seed=seed)
                _write_text(outdir, "grid.svg",
                            svgmod.cluster_svg(grid.tolist(), rep.labels.tolist(),
                                               rep.target_bit,
                                               title=f"clusters size={size} seed={seed}"))
            else:
                _write_text(outdir, "grid.svg",
                            svgmod.grid_svg(grid.tolist(), title=f"size={size} seed={seed}"))
        elif f == "pbm":
            _write_text(outdir, "grid.pbm", grid_to_pbm(grid))
        elif f == "json":
            _write_json(outdir, "grid.json", {"config": config, **grid_to_json(grid)})
        else:
            raise ValidationError(f"unknown render format {f!r}")
    return 0


def _resolve_rankone_spec(params: dict) -> RankOneSpec:
    name = params.get("spec", "staircase")
    stages = params.get("stages", 10)
    if name in PRESETS:
        return preset_spec(name, stages)
    obj = _load_json(name)
    try:
        return RankOneSpec.from_json(obj)
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"bad rank-one spec {name}: {exc}")


def cmd_rankone(params: dict) -> int:
    outdir = _prepare_outdir(params)
    config = _emit_config(outdir, "rankone", params)
    spec = _resolve_rankone_spec(params)
    artifacts: dict = {"config": config, "spec": spec.to_json(),
                       "heights": tower_heights(spec)}
    if params.get("word_length"):
        word = generate_word(spec, params.get("stage", 1), params["word_length"])
        _write_json(outdir, "word.json", word.to_rle_json())
        artifacts["word_length"] = word.length
    _write_json(outdir, "rankone.json", artifacts)
    return 0


def cmd_replay(params: dict) -> int:
    config = _load_json(params["config"])
    if "command" not in config or "params" not in config:
        raise ValidationError("config file lacks 'command'/'params'")
    replay_params = dict(config["params"])
    if params.get("out"):
        replay_params["out"] = params["out"]
    runner = _DISPATCH.get(config["command"])
    if runner is None:
        raise ValidationError(f"unknown command {config['command']!r} in config")
    return runner(replay_params)


_DISPATCH: dict[str, Callable[[dict], int]] = {
    "measure": cmd_measure,
    "scan-dev": cmd_scan_dev,
    "scan-mix": cmd_scan_mix,
    "joining": cmd_joining,
    "percolate": cmd_percolate,
    "render": cmd_render,
    "rankone": cmd_rankone,
}


# ---------------------------------------------------------------------------
# Argument parsing

def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}")


def _scale_range(text: str) -> list[int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected LO:HI")
    return [int(parts[0]), int(parts[1])]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixlab",
        description="Computational laboratory for multiple-mixing phenomena",
    )
    parser.add_argument("--version", action="version", version=f"mixlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out_required: bool = True):
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="64-bit experiment seed")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--pattern", help="JSON file with a custom relation pattern")

    p = sub.add_parser("measure", help="exact or Monte-Carlo cylinder measure")
    common(p)
    p.add_argument("--system", choices=["ledrappier", "bernoulli"], default="ledrappier")
    p.add_argument("--constellation", required=True, help="JSON constellation file")
    p.add_argument("--mc", action="store_true", help="force the Monte-Carlo estimator")
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--torus", type=int, help="torus size for the estimator")

    p = sub.add_parser("scan", help="deviation and mixing-defect scans")
    scan_sub = p.add_subparsers(dest="scan_kind", required=True)

    pd = scan_sub.add_parser("dev", help="dev(h) statistics over the (z,w) grid")
    common(pd)
    pd.add_argument("--system", choices=["bernoulli", "rankone"], default="bernoulli")
    pd.add_argument("--epsilon", type=float, required=True)
    pd.add_argument("--h", type=int, required=True, dest="h")
    pd.add_argument("--events", help="JSON file with the three events")
    pd.add_argument("--spec", default="staircase", help="rank-one preset or spec file")
    pd.add_argument("--stage", type=int, default=1)
    pd.add_argument("--stages", type=int, default=10)
    pd.add_argument("--word-length", type=int, dest="word_length")

    pm = scan_sub.add_parser("mix", help="k-fold mixing defect over shift families")
    common(pm)
    pm.add_argument("--system", choices=["ledrappier", "bernoulli"], default="ledrappier")
    pm.add_argument("--order", type=int, required=True)
    pm.add_argument("--family", choices=["dyadic", "random"], default="random")
    pm.add_argument("--budget", type=int, default=100)
    pm.add_argument("--min-gap", type=int, default=8, dest="min_gap")
    pm.add_argument("--box", type=int, default=128)
    pm.add_argument("--scales", type=_scale_range, default=[1, 8])
    pm.add_argument("--events", help="JSON file with k+1 events")

    p = sub.add_parser("joining", help="limiting joining tensor and operator calculus")
    common(p)
    p.add_argument("--tensor", help="load a tensor JSON instead of the parity pipeline")
    p.add_argument("--order", type=int, default=5)
    p.add_argument("--scales", type=_scale_range, default=[1, 6])
    p.add_argument("--chain", action="store_true", help="run the mean-zero norm chain")
    p.add_argument("--raise", action="store_true", dest="raise_order")
    p.add_argument("--lower", action="store_true", dest="lower_order")

    p = sub.add_parser("percolate", help="cluster/wrap sweep over lattice sizes")
    common(p)
    p.add_argument("--sizes", type=_int_list, required=True)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--connectivity", type=int, choices=[4, 8], default=4)

    p = sub.add_parser("render", help="sample a configuration and render it")
    common(p)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--format", default="svg", help="comma list of svg,pbm,json")
    p.add_argument("--clusters", action="store_true", help="tint clusters in the SVG")
    p.add_argument("--connectivity", type=int, choices=[4, 8], default=4)
    p.add_argument("--bit", type=int, choices=[0, 1], default=0)

    p = sub.add_parser("rankone", help="tower heights and symbolic words")
    common(p)
    p.add_argument("--spec", default="staircase")
    p.add_argument("--stages", type=int, default=10)
    p.add_argument("--stage", type=int, default=1)
    p.add_argument("--word-length", type=int, dest="word_length")

    p = sub.add_parser("replay", help="re-run a command from an embedded config")
    p.add_argument("config", help="path to a config.json")
    p.add_argument("--out", help="override the output directory")

    return parser


def _params_from_args(args: argparse.Namespace) -> tuple[str, dict]:
    ns = vars(args).copy()
    command = ns.pop("command")
    if command == "scan":
        command = f"scan-{ns.pop('scan_kind')}"
    ns.pop("version", None)
    params = {k: v for k, v in ns.items() if v is not None and v is not False}
    return command, params


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command, params = _params_from_args(args)
    runner = _DISPATCH.get(command) if command != "replay" else cmd_replay
    try:
        return runner(params)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (WindowCapError, OracleCapabilityError, UnsupportedPatternError) as exc:
        print(f"capability error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
