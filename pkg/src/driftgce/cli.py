"""Command line interface.

Subcommands mirror the pipeline stages: generate windows, train a
classifier, explain a window, analyze two explained windows into a
report, run the whole chain, and route a single point through a saved
explanation. Options resolve in three layers: built-in defaults, then
the optional TOML config file (one table per subcommand), then explicit
flags.

Exit codes: 0 on success, 2 for command line usage errors (argparse),
1 for runtime failures. Runtime failures remove any output files the
failing invocation had already written, so a crashed run never leaves
half a result behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

from . import __version__
from .analysis import ReportParams, build_report, load_report, save_report
from .classifier import TrainConfig, load_model, train
from .errors import InvalidArgumentError
from .grouping import explain_window, load_gce, save_gce
from .render import render_report
from .scenario import (
    apply_drift,
    build_case,
    read_scenario_file,
    read_window_csv,
    sample_window,
    write_scenario_file,
    write_window_csv,
)

DEFAULTS = {
    "generate": {"n": 1000, "seed": 0},
    "train": {
        "architecture": "mlp",
        "hidden": 16,
        "learning_rate": 0.5,
        "epochs": 800,
        "batch_size": 64,
        "l2": 3e-4,
        "seed": 0,
        "tag": "",
    },
    "explain": {"k_neighbors": 10, "bandwidth": None, "k_max": 6, "seed": 0, "tag": ""},
    "analyze": {
        "mode": "probability",
        "dmae_threshold": 0.05,
        "inversion_threshold": -0.5,
        "shift_threshold": 0.1,
        "swap_tolerance": 0.1,
    },
    "run": {
        "n": 1000,
        "seed": 0,
        "architecture": "mlp",
        "hidden": 16,
        "learning_rate": 0.5,
        "epochs": 800,
        "batch_size": 64,
        "l2": 3e-4,
        "k_neighbors": 10,
        "bandwidth": None,
        "k_max": 6,
        "mode": "probability",
        "dmae_threshold": 0.05,
        "inversion_threshold": -0.5,
        "shift_threshold": 0.1,
        "swap_tolerance": 0.1,
    },
    "explain-instance": {},
}


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise InvalidArgumentError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise InvalidArgumentError(f"config file {path} is not valid TOML: {exc}")


def _options(args, config: dict) -> dict:
    """defaults <- config section <- explicit flags, in rising priority."""
    stage = args.stage
    merged = dict(DEFAULTS.get(stage, {}))
    section = config.get(stage, {})
    for key, value in section.items():
        if key not in merged:
            raise InvalidArgumentError(f"config key [{stage}] {key} is not a known option")
        merged[key] = value
    for key in merged:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    return merged


def _out(tracker: list, path):
    tracker.append(str(path))
    return path


def _emit(payload: dict, as_json: bool):
    if as_json:
        print(json.dumps(payload, sort_keys=True))
    else:
        for key, value in payload.items():
            if isinstance(value, (dict, list)):
                value = json.dumps(value, sort_keys=True)
            print(f"{key}: {value}")


# ---------------------------------------------------------------------------
# stage handlers


def _load_scenario(args):
    if getattr(args, "case", None) is not None:
        scenario, drift = build_case(args.case, getattr(args, "n_hint", 1000) or 1000)
        return scenario, drift
    scenario, drift = read_scenario_file(args.scenario)
    return scenario, drift


def cmd_generate(args, config, tracker):
    opts = _options(args, config)
    scenario, drift = _load_scenario(args)
    n, seed = int(opts["n"]), int(opts["seed"])
    pre = sample_window(scenario, n, seed=seed, tag="pre")
    post_scenario = apply_drift(scenario, drift) if drift is not None else scenario
    post = sample_window(post_scenario, n, seed=seed + 1, tag="post")
    write_window_csv(pre, _out(tracker, args.out_pre))
    write_window_csv(post, _out(tracker, args.out_post))
    if args.scenario_out:
        write_scenario_file(_out(tracker, args.scenario_out), scenario, drift)
    _emit(
        {"out_pre": args.out_pre, "out_post": args.out_post, "n": n, "seed": seed},
        args.json,
    )


def cmd_train(args, config, tracker):
    opts = _options(args, config)
    window = read_window_csv(args.window)
    cfg = TrainConfig(
        architecture=opts["architecture"],
        hidden=int(opts["hidden"]),
        learning_rate=float(opts["learning_rate"]),
        epochs=int(opts["epochs"]),
        batch_size=int(opts["batch_size"]),
        l2=float(opts["l2"]),
        seed=int(opts["seed"]),
    )
    model = train(window.features, window.labels, cfg)
    model.save(_out(tracker, args.out))
    acc = float((model.predict(window.features) == window.labels).mean())
    _emit({"out": args.out, "model_hash": model.model_hash, "train_accuracy": acc}, args.json)


def cmd_explain(args, config, tracker):
    opts = _options(args, config)
    window = read_window_csv(args.window, tag=opts["tag"])
    model = load_model(args.model)
    gce = explain_window(
        window.features,
        model,
        window_tag=opts["tag"],
        k_neighbors=int(opts["k_neighbors"]),
        bandwidth=None if opts["bandwidth"] is None else float(opts["bandwidth"]),
        k_max=int(opts["k_max"]),
        seed=int(opts["seed"]),
    )
    save_gce(gce, _out(tracker, args.out))
    _emit(
        {
            "out": args.out,
            "groups": len(gce.groups),
            "k_per_class": {str(k): v for k, v in gce.k_per_class.items()},
            "valid_fraction": gce.method_counts["valid"] / gce.n_window,
        },
        args.json,
    )


def _report_params(opts) -> ReportParams:
    return ReportParams(
        disagreement_mode=opts["mode"],
        dmae_threshold=float(opts["dmae_threshold"]),
        inversion_threshold=float(opts["inversion_threshold"]),
        shift_threshold=float(opts["shift_threshold"]),
        swap_tolerance=float(opts["swap_tolerance"]),
    )


def cmd_analyze(args, config, tracker):
    opts = _options(args, config)
    pre = read_window_csv(args.pre_window, tag="pre")
    post = read_window_csv(args.post_window, tag="post")
    model_pre = load_model(args.pre_model)
    model_post = load_model(args.post_model)
    gce_pre = load_gce(args.pre_gce, model_pre)
    gce_post = load_gce(args.post_gce, model_post)
    report = build_report(pre, post, model_pre, model_post, gce_pre, gce_post, _report_params(opts))
    save_report(report, _out(tracker, args.out))
    if args.svg:
        render_report(report, _out(tracker, args.svg), include_timestamp=args.timestamp)
    if args.json:
        print(json.dumps(report, sort_keys=True))
    else:
        _emit(
            {
                "out": args.out,
                "decision": report["headline"]["decision"],
                "global_dmae": report["headline"]["global_dmae"],
            },
            False,
        )


def cmd_run(args, config, tracker):
    opts = _options(args, config)
    outdir = args.outdir
    os.makedirs(outdir, exist_ok=True)
    n, seed = int(opts["n"]), int(opts["seed"])
    args.n_hint = n
    scenario, drift = _load_scenario(args)
    pre = sample_window(scenario, n, seed=seed, tag="pre")
    post_scenario = apply_drift(scenario, drift) if drift is not None else scenario
    post = sample_window(post_scenario, n, seed=seed + 1, tag="post")

    cfg = TrainConfig(
        architecture=opts["architecture"],
        hidden=int(opts["hidden"]),
        learning_rate=float(opts["learning_rate"]),
        epochs=int(opts["epochs"]),
        batch_size=int(opts["batch_size"]),
        l2=float(opts["l2"]),
        seed=seed,
    )
    model_pre = train(pre.features, pre.labels, cfg)
    model_post = train(post.features, post.labels, cfg)

    explain_kwargs = dict(
        k_neighbors=int(opts["k_neighbors"]),
        bandwidth=None if opts["bandwidth"] is None else float(opts["bandwidth"]),
        k_max=int(opts["k_max"]),
        seed=seed,
    )
    gce_pre = explain_window(pre.features, model_pre, window_tag="pre", **explain_kwargs)
    gce_post = explain_window(post.features, model_post, window_tag="post", **explain_kwargs)

    report = build_report(pre, post, model_pre, model_post, gce_pre, gce_post, _report_params(opts))

    paths = {name: os.path.join(outdir, name) for name in (
        "pre.csv", "post.csv", "model_pre.json", "model_post.json",
        "gce_pre.json", "gce_post.json", "report.json", "report.svg",
    )}
    write_window_csv(pre, _out(tracker, paths["pre.csv"]))
    write_window_csv(post, _out(tracker, paths["post.csv"]))
    model_pre.save(_out(tracker, paths["model_pre.json"]))
    model_post.save(_out(tracker, paths["model_post.json"]))
    save_gce(gce_pre, _out(tracker, paths["gce_pre.json"]))
    save_gce(gce_post, _out(tracker, paths["gce_post.json"]))
    save_report(report, _out(tracker, paths["report.json"]))
    if not args.no_svg:
        render_report(report, _out(tracker, paths["report.svg"]), include_timestamp=args.timestamp)
    _emit(
        {
            "outdir": outdir,
            "decision": report["headline"]["decision"],
            "global_dmae": report["headline"]["global_dmae"],
            "disappeared": len(report["explanation_layer"]["disappeared"]),
            "appeared": len(report["explanation_layer"]["appeared"]),
        },
        args.json,
    )


def cmd_explain_instance(args, config, tracker):
    model = load_model(args.model)
    gce = load_gce(args.gce, model)
    try:
        point = np.array([float(t) for t in args.point.split(",")], dtype=np.float64)
    except ValueError:
        raise InvalidArgumentError(f"--point must be comma-separated floats, got {args.point!r}")
    group, cfav = gce.assign_cfav(point)
    _emit(
        {
            "group": group.key,
            "cfav": cfav.tolist(),
            "proximity": group.proximity,
            "predicted_class": group.class_label,
            "counterfactual": (point + cfav).tolist(),
        },
        args.json,
    )


# ---------------------------------------------------------------------------
# parser


def _add_scenario_source(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--case", type=int, choices=(1, 2, 3), help="built-in case study")
    g.add_argument("--scenario", help="scenario TOML file")


def _add_train_flags(p):
    p.add_argument("--architecture", choices=("logistic", "mlp"))
    p.add_argument("--hidden", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--l2", type=float)


def _add_explain_flags(p):
    p.add_argument("--k-neighbors", type=int, dest="k_neighbors")
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--k-max", type=int, dest="k_max")


def _add_report_flags(p):
    p.add_argument("--mode", choices=("probability", "label"))
    p.add_argument("--dmae-threshold", type=float, dest="dmae_threshold")
    p.add_argument("--inversion-threshold", type=float, dest="inversion_threshold")
    p.add_argument("--shift-threshold", type=float, dest="shift_threshold")
    p.add_argument("--swap-tolerance", type=float, dest="swap_tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftgce",
        description="Explain binary classifier drift through group counterfactuals.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="TOML config file with per-subcommand option tables")
    sub = parser.add_subparsers(dest="stage", required=True)

    p = sub.add_parser("generate", help="sample a pre/post window pair")
    _add_scenario_source(p)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-pre", required=True, dest="out_pre")
    p.add_argument("--out-post", required=True, dest="out_post")
    p.add_argument("--scenario-out", dest="scenario_out", help="also dump the scenario TOML")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a classifier on a window CSV")
    p.add_argument("--window", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    _add_train_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", help="build the group explanation of a window")
    p.add_argument("--window", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--tag")
    _add_explain_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("analyze", help="compare two explained windows into a report")
    p.add_argument("--pre-window", required=True, dest="pre_window")
    p.add_argument("--post-window", required=True, dest="post_window")
    p.add_argument("--pre-model", required=True, dest="pre_model")
    p.add_argument("--post-model", required=True, dest="post_model")
    p.add_argument("--pre-gce", required=True, dest="pre_gce")
    p.add_argument("--post-gce", required=True, dest="post_gce")
    p.add_argument("--out", required=True)
    p.add_argument("--svg", help="also render the report figure")
    p.add_argument("--timestamp", action="store_true", help="embed a timestamp comment in the SVG")
    _add_report_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="full pipeline: generate, train, explain, analyze")
    _add_scenario_source(p)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--outdir", required=True)
    _add_train_flags(p)
    _add_explain_flags(p)
    _add_report_flags(p)
    p.add_argument("--no-svg", action="store_true", dest="no_svg")
    p.add_argument("--timestamp", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser(
        "explain-instance", help="route one point through a saved explanation"
    )
    p.add_argument("--gce", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--point", required=True, help="comma-separated feature values")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_explain_instance)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    tracker: list[str] = []
    try:
        config = _load_config(args.config)
        args.func(args, config, tracker)
        return 0
    except (KeyboardInterrupt, SystemExit):
        raise
    except Exception as exc:
        for path in tracker:
            try:
                os.unlink(path)
            except OSError:
                pass
        print(f"driftgce {args.stage}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
