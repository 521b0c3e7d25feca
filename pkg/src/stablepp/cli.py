"""Command-line front end.

Subcommands: sample, estimate, test {stability|maxlaw|support|tail}, extract,
transform. Every command reads a fail-closed JSON config (versioned schema
field, unknown keys rejected), writes its outputs through a single writer at
the end, and drops a `<out>.manifest.json` next to each output capturing
everything needed to reproduce the bytes: config echo, spec hashes, master
seed, replica counts, truncation values, tool version, and the output
inventory. Repeated runs with the same config and seed are byte-identical,
regardless of --threads.

Exit codes: 0 success or statistical pass, 1 usage/config/IO error,
2 statistical rejection or acceptance starvation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

from . import __version__
from .characterization import (
    SubCheck,
    TestReport,
    maxmod_law_test,
    scale_unique_support_test,
    stability_test,
    tail_index_estimate,
)
from .errors import ConfigError, DomainError, StableppError, StarvationError
from .extraction import ExtractionConfig, extract_decoration
from .functionals import (
    battery_estimates,
    default_battery,
    default_u_grid,
    default_y_grid,
    predict_scaled_laplace,
    predict_shift_laplace,
    required_window,
    shift_battery,
)
from .point_measure import (
    PointMeasure,
    ShiftPointMeasure,
    ShiftTestFunction,
    TestFunction,
    indicator_approx,
    maxmod_indicator,
    shift_indicator_approx,
    shift_tent,
    tent,
)
from .sampler import (
    _MEAN_CAP,
    _check_keys,
    ProcessSource,
    maxmod_samples,
    process_spec_from_config,
    resolve_threads,
    run_campaign,
)
from .transform import exp_transform, log_transform, map_process_spec, normalization_shift

_SCHEMA = "stablepp/v1"
_ROLE_CLI_TAIL = (40,)

_DEFAULT_REPS = {
    "sample": 100,
    "estimate": 100_000,
    "stability": 100_000,
    "maxlaw": 10_000,
    "support": 100_000,
    "tail": 100_000,
}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; 2 is reserved for statistical rejection."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- config plumbing ---------------------------------------------------------------


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}")
    if not isinstance(doc, dict):
        raise ConfigError("the config must be a JSON object")
    if doc.get("schema") != _SCHEMA:
        raise ConfigError(f'the config must declare "schema": "{_SCHEMA}"')
    return doc


def _function_from_config(doc, carrier: str):
    """One battery entry {id, kind, ...} -> (id, test function)."""
    if not isinstance(doc, dict):
        raise ConfigError("each battery entry must be a JSON object")
    fid = doc.get("id")
    if not isinstance(fid, str) or not fid or not all(
            ch.isalnum() or ch in "_.-" for ch in fid):
        raise ConfigError("battery entries need an id of letters, digits, _ . -")
    kind = doc.get("kind")
    scale_kinds = {"tent", "indicator", "maxmod_indicator", "knots"}
    shift_kinds = {"shift_tent", "shift_indicator", "shift_knots"}
    if kind not in scale_kinds | shift_kinds:
        raise ConfigError(f"unknown battery function kind: {kind!r}")
    if carrier == "scale" and kind in shift_kinds:
        raise ConfigError(f"{fid}: {kind} functions do not apply to a scale family")
    if carrier == "shift" and kind in scale_kinds:
        raise ConfigError(f"{fid}: {kind} functions do not apply to a shift family")
    try:
        if kind == "tent":
            _check_keys(doc, {"id", "kind", "left", "peak", "right"}, {"height"}, "tent")
            return fid, tent(doc["left"], doc["peak"], doc["right"],
                             doc.get("height", 1.0))
        if kind == "indicator":
            _check_keys(doc, {"id", "kind", "level", "edge"},
                        {"outer", "ramp", "symmetric"}, "indicator")
            return fid, indicator_approx(doc["level"], doc["edge"],
                                         doc.get("outer", 1e8),
                                         doc.get("ramp", 1e-7),
                                         bool(doc.get("symmetric", False)))
        if kind == "maxmod_indicator":
            _check_keys(doc, {"id", "kind", "plateau"}, {"edge", "outer", "ramp"},
                        "maxmod_indicator")
            return fid, maxmod_indicator(doc["plateau"], doc.get("edge", 1.0),
                                         doc.get("outer", 1e8), doc.get("ramp", 1e-7))
        if kind == "knots":
            _check_keys(doc, {"id", "kind", "knots"}, set(), "knots")
            return fid, TestFunction([(float(x), float(v)) for x, v in doc["knots"]])
        if kind == "shift_tent":
            _check_keys(doc, {"id", "kind", "left", "peak", "right"}, {"height"},
                        "shift_tent")
            return fid, shift_tent(doc["left"], doc["peak"], doc["right"],
                                   doc.get("height", 1.0))
        if kind == "shift_indicator":
            _check_keys(doc, {"id", "kind", "level", "edge", "outer"}, {"ramp"},
                        "shift_indicator")
            return fid, shift_indicator_approx(doc["level"], doc["edge"],
                                               doc["outer"], doc.get("ramp", 1e-6))
        _check_keys(doc, {"id", "kind", "knots"}, set(), "shift_knots")
        return fid, ShiftTestFunction([(float(x), float(v)) for x, v in doc["knots"]])
    except (TypeError, KeyError, ValueError) as e:
        raise ConfigError(f"battery entry {fid}: {e}")


def _battery_from_config(doc: dict, carrier: str) -> dict:
    """The config's battery (or the default one) as {id: function}."""
    raw = doc.get("battery")
    if raw is None or raw == "default":
        return default_battery() if carrier == "scale" else shift_battery()
    if not isinstance(raw, list) or not raw:
        raise ConfigError("the battery must be a non-empty list of function objects")
    out = {}
    for entry in raw:
        fid, f = _function_from_config(entry, carrier)
        if fid in out:
            raise ConfigError(f"duplicate battery id: {fid}")
        out[fid] = f
    return out


def _points_from_config(doc: dict, carrier: str, key: str = "points"):
    raw = doc.get(key)
    if raw is None:
        return list(default_y_grid if carrier == "scale" else default_u_grid)
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{key} must be a non-empty list of numbers")
    try:
        return [float(p) for p in raw]
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must contain numbers only")


# -- output plumbing ---------------------------------------------------------------


def _write_text(path: str, text: str) -> int:
    """Write text, return its line count."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text.count("\n")


def _write_manifest(out_path: str, command: str, config: dict, *, seed, reps,
                    spec_hashes, outputs: dict, status: str = "ok", extra=None):
    doc = {
        "schema": _SCHEMA,
        "command": command,
        "tool_version": __version__,
        "config": config,
        "master_seed": seed,
        "replica_counts": reps,
        "spec_hashes": spec_hashes,
        "truncation": {"poisson_mean_cap": _MEAN_CAP},
        "outputs": outputs,
        "status": status,
    }
    if extra:
        doc.update(extra)
    _write_text(out_path + ".manifest.json",
                json.dumps(doc, sort_keys=True, indent=2) + "\n")


# -- commands ----------------------------------------------------------------------


def cmd_sample(args) -> int:
    doc = _load_config(args.config)
    _check_keys(doc, {"schema", "process"}, set(), "sample config")
    spec = process_spec_from_config(doc["process"])
    reps = args.reps if args.reps is not None else _DEFAULT_REPS["sample"]
    threads = resolve_threads(args.threads)
    campaign = run_campaign(ProcessSource(spec), args.seed, reps, threads)
    lines = "".join(campaign.replica_measure(i).to_json_line() + "\n"
                    for i in range(reps))
    n = _write_text(args.out, lines)
    _write_manifest(args.out, "sample", doc, seed=args.seed, reps=reps,
                    spec_hashes=[spec.spec_hash()],
                    outputs={args.out: {"lines": n}},
                    extra={"window": spec.window, "carrier": spec.carrier})
    return 0


def cmd_estimate(args) -> int:
    doc = _load_config(args.config)
    _check_keys(doc, {"schema", "process"}, {"battery", "points"}, "estimate config")
    spec = process_spec_from_config(doc["process"])
    functions = _battery_from_config(doc, spec.carrier)
    points = _points_from_config(doc, spec.carrier)
    reps = args.reps if args.reps is not None else _DEFAULT_REPS["estimate"]
    threads = resolve_threads(args.threads)
    estimates = battery_estimates(spec, functions, points, reps, args.seed,
                                  threads=threads)
    predict = (predict_scaled_laplace if spec.is_scale_family
               else predict_shift_laplace)
    rows = ["f_id,point,value,std_error,predicted,predicted_error"]
    for fid in sorted(functions):
        for p in points:
            est = estimates[(fid, p)]
            try:
                pred = predict(spec, functions[fid], p)
                ptxt, etxt = repr(pred.value), repr(pred.error_bound)
            except (DomainError, NotImplementedError):
                ptxt = etxt = ""
            rows.append(f"{fid},{p!r},{est.value!r},{est.std_error!r},{ptxt},{etxt}")
    n = _write_text(args.out, "\n".join(rows) + "\n")
    _write_manifest(args.out, "estimate", doc, seed=args.seed, reps=reps,
                    spec_hashes=[spec.spec_hash()],
                    outputs={args.out: {"lines": n}},
                    extra={"window": required_window(spec, functions.values(), points),
                           "battery_ids": sorted(functions), "points": points})
    return 0


def cmd_test(args) -> int:
    doc = _load_config(args.config)
    kind = args.kind
    level = args.level
    threads = resolve_threads(args.threads)
    reps = args.reps if args.reps is not None else _DEFAULT_REPS[kind]

    if kind == "stability":
        _check_keys(doc, {"schema", "process", "b1", "b2"},
                    {"rhs_scale_factor", "battery", "points"}, "stability config")
        spec = process_spec_from_config(doc["process"])
        battery = None
        if "battery" in doc or "points" in doc:
            functions = _battery_from_config(doc, spec.carrier)
            points = _points_from_config(doc, spec.carrier)
            battery = [(f, y) for f in functions.values() for y in points]
        report = stability_test(
            spec, float(doc["b1"]), float(doc["b2"]), battery=battery,
            n_reps=reps, level=level, seed=args.seed,
            rhs_scale_factor=float(doc.get("rhs_scale_factor", 1.0)),
            threads=threads)
    elif kind == "maxlaw":
        _check_keys(doc, {"schema", "process"}, {"censor_mass"}, "maxlaw config")
        spec = process_spec_from_config(doc["process"])
        report = maxmod_law_test(spec, n_reps=reps, seed=args.seed, level=level,
                                 censor_mass=float(doc.get("censor_mass", 1e-6)),
                                 threads=threads)
    elif kind == "support":
        _check_keys(doc, {"schema", "process"}, {"battery", "y_grid"}, "support config")
        spec = process_spec_from_config(doc["process"])
        battery = None
        if "battery" in doc:
            battery = list(_battery_from_config(doc, spec.carrier).values())
        y_grid = doc.get("y_grid")
        if y_grid is not None:
            y_grid = _points_from_config(doc, spec.carrier, "y_grid")
        report = scale_unique_support_test(spec, battery=battery, y_grid=y_grid,
                                           n_reps=reps, seed=args.seed,
                                           threads=threads)
    else:
        _check_keys(doc, {"schema", "process"}, {"k"}, "tail config")
        spec = process_spec_from_config(doc["process"])
        mm = maxmod_samples(spec, reps, args.seed, threads=threads,
                            role=_ROLE_CLI_TAIL)
        positive = mm[mm > 0.0]
        est = tail_index_estimate(positive, doc.get("k"))
        covered = est.covers(spec.alpha)
        sub = SubCheck(
            "ci_covers_alpha",
            "the maxmod upper tail is regularly varying with the spec's index",
            est.alpha_hat, None, covered,
            f"k = {est.k}, 95% half width {est.ci_half_width:.6g}")
        report = TestReport("tail_index", covered, level, reps, args.seed, (sub,),
                            params={"spec": spec.to_config_dict(),
                                    "alpha": spec.alpha,
                                    "n_positive": int(positive.size)})

    text = report.to_json() + "\n"
    _write_text(args.out, text)
    _write_manifest(args.out, f"test {kind}", doc, seed=args.seed, reps=reps,
                    spec_hashes=[spec.spec_hash()],
                    outputs={args.out: {"lines": 1}},
                    status="ok" if report.passed else "rejected")
    sys.stdout.write(text)
    return 0 if report.passed else 2


def cmd_extract(args) -> int:
    doc = _load_config(args.config)
    _check_keys(doc, {"schema", "process", "threshold", "inner_radius"},
                {"n_accepted", "max_attempts"}, "extract config")
    spec = process_spec_from_config(doc["process"])
    try:
        cfg = ExtractionConfig(
            float(doc["threshold"]), float(doc["inner_radius"]),
            int(doc.get("n_accepted", 500)), int(doc.get("max_attempts", 500_000)))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"extract config: {e}")
    threads = resolve_threads(args.threads)
    try:
        report = extract_decoration(spec, cfg, seed=args.seed, threads=threads)
    except StarvationError as e:
        _write_manifest(args.out, "extract", doc, seed=args.seed,
                        reps=cfg.max_attempts, spec_hashes=[spec.spec_hash()],
                        outputs={}, status="starved", extra={"error": str(e)})
        print(f"error: {e}", file=sys.stderr)
        return 2
    sidecar = args.out + ".decorations.jsonl"
    n_rep = _write_text(args.out,
                        json.dumps(report.to_json_dict(), sort_keys=True) + "\n")
    n_dec = _write_text(sidecar, "".join(l + "\n" for l in report.decoration_lines()))
    _write_manifest(args.out, "extract", doc, seed=args.seed, reps=report.attempts,
                    spec_hashes=[spec.spec_hash()],
                    outputs={args.out: {"lines": n_rep}, sidecar: {"lines": n_dec}},
                    extra={"window": report.params["window"],
                           "acceptance_rate": report.acceptance_rate})
    return 0


def cmd_transform(args) -> int:
    doc = _load_config(args.config)
    _check_keys(doc, {"schema", "direction"}, {"input", "process"}, "transform config")
    direction = doc.get("direction")
    if direction not in ("log", "exp"):
        raise ConfigError('direction must be "log" or "exp"')
    if ("input" in doc) == ("process" in doc):
        raise ConfigError('provide exactly one of "input" (measure lines) or "process"')

    if "input" in doc:
        src_cls = PointMeasure if direction == "log" else ShiftPointMeasure
        op = log_transform if direction == "log" else exp_transform
        try:
            with open(doc["input"], "r", encoding="utf-8") as fh:
                raw = fh.read().splitlines()
        except OSError as e:
            raise ConfigError(f"cannot read input: {e}")
        out_lines = []
        for i, line in enumerate(raw):
            if not line.strip():
                continue
            try:
                out_lines.append(op(src_cls.from_json_line(line)).to_json_line())
            except (StableppError, ValueError) as e:
                raise ConfigError(f"input line {i + 1}: {e}")
        n = _write_text(args.out, "".join(l + "\n" for l in out_lines))
        _write_manifest(args.out, "transform", doc, seed=args.seed, reps=n,
                        spec_hashes=[], outputs={args.out: {"lines": n}},
                        extra={"direction": direction})
        return 0

    spec = process_spec_from_config(doc["process"])
    if direction == "log" and not spec.is_scale_family:
        raise ConfigError("direction log applies to scale families")
    if direction == "exp" and spec.is_scale_family:
        raise ConfigError("direction exp applies to shift families")
    mapped = map_process_spec(spec)
    rate = mapped.alpha if direction == "log" else spec.alpha
    out_doc = {"schema": _SCHEMA, "process": mapped.to_config_dict()}
    _write_text(args.out, json.dumps(out_doc, sort_keys=True, indent=2) + "\n")
    _write_manifest(args.out, "transform", doc, seed=args.seed, reps=0,
                    spec_hashes=[spec.spec_hash(), mapped.spec_hash()],
                    outputs={args.out: {"lines": 1}},
                    extra={"direction": direction,
                           "normalization_shift": normalization_shift(rate)})
    return 0


# -- entry point -------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stablepp",
                     description="Simulation and verification of scale- and "
                                 "shift-decorated Poisson point processes.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_reps_hint):
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", required=True, help="output path")
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        p.add_argument("--reps", type=int, default=None,
                       help=f"replica count (default {default_reps_hint})")
        p.add_argument("--level", type=float, default=0.01,
                       help="test level (default 0.01)")
        p.add_argument("--threads", type=int, default=None,
                       help="parallel width; default STABLEPP_THREADS or 1; "
                            "outputs are identical across values")

    p = sub.add_parser("sample", help="draw replicas, write point-measure lines")
    common(p, _DEFAULT_REPS["sample"])
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("estimate", help="Laplace-functional battery to CSV")
    common(p, _DEFAULT_REPS["estimate"])
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("test", help="statistical verification, JSON report")
    p.add_argument("kind", choices=["stability", "maxlaw", "support", "tail"])
    common(p, "per kind")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("extract", help="conditional decoration extraction")
    common(p, "driven by config")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("transform", help="carry measures or a spec across carriers")
    common(p, "not used")
    p.set_defaults(func=cmd_transform)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    t0 = time.monotonic()
    try:
        code = args.func(args)
    except StarvationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (StableppError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"[stablepp] {args.command} finished in {time.monotonic() - t0:.1f}s",
          file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
