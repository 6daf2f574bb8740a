"""Experiment runner.

Usage::

    gptt-audit --experiment violation_curve --seed 1 --out curve.csv
    gptt-audit --config run.ini --format json

The config file is INI with one ``[experiment]`` section; keys are listed in
``SCHEMA`` (lists are comma separated). Flags override the file, and
``--param key=value`` overrides any single key.

Exit codes: 0 success, 2 bad config, 3 I/O error, 4 internal assertion.
"""

from __future__ import annotations

import argparse
import configparser
import io
import math
import sys
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__
from .attack import attack_threshold, reconstruct, reconstruction_theorem_check
from .audit import CounterexampleSpec, audit, exact_output_probability_hard, log_ratio
from .datagen import (
    DatasetError,
    compute_meta,
    read_histogram_csv,
    staircase_histogram,
    zipfian_histogram,
)
from .histogram import Count, Histogram
from .mechanisms import (
    GpttParams,
    SvtParams,
    gptt,
    gptt_amplified,
    gptt_batch,
    gptt_instantiation,
    svt,
)
from .noise import Rng

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4

EXPERIMENTS = (
    "violation_curve",
    "hard_violation",
    "reconstruction_table",
    "theorem_check",
    "mechanism_demo",
)


class ConfigError(ValueError):
    pass


def _float_list(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v.strip()]


def _int_list(s: str) -> list[int]:
    return [int(v) for v in s.split(",") if v.strip()]


def _epsilon2(s: str) -> float:
    return math.inf if s.strip().lower() in ("inf", "infinity") else float(s)


# key -> (parser, default); None means "derived" or "optional"
SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "violation_curve": {
        "instantiation": (str, "chen"),
        "epsilon": (float, 1.0),
        "epsilon1": (float, None),
        "epsilon2": (_epsilon2, None),
        "t_max": (int, 64),
        "t_grid": (_int_list, None),
        "n_trials": (int, 100_000),
    },
    "hard_violation": {
        "epsilon1_grid": (_float_list, [0.25, 0.5, 1.0]),
        "n_trials": (int, 1_000_000),
    },
    "reconstruction_table": {
        "epsilons": (_float_list, [1.0, 0.5, 0.1]),
        "n_trials": (int, 10),
        "delta": (float, 0.05),
        "split_fraction": (float, 0.5),
        "dataset": (str, "zipf"),
        "dataset_csv": (str, None),
        "domain_size": (int, 4096),
        "total": (int, 20_000),
        "exponent": (float, 1.0),
        "dataset_seed": (int, None),
    },
    "theorem_check": {
        "dataset": (str, "staircase"),
        "dataset_csv": (str, None),
        "staircase_k": (int, 30),
        "extra_cells": (int, 50),
        "domain_size": (int, 4096),
        "total": (int, 20_000),
        "exponent": (float, 1.0),
        "dataset_seed": (int, None),
        "k": (int, None),
        "epsilon": (float, 1.0),
        "delta": (float, 0.05),
        "n_trials": (int, 500),
    },
    "mechanism_demo": {
        "counts": (_int_list, [0, 1, 2, 5, 5, 9]),
        "threshold": (float, 3.0),
        "cutoff": (int, 2),
        "epsilon": (float, 1.0),
        "instantiation": (str, "chen"),
        "copies": (int, 101),
    },
}
COMMON = {
    "experiment": (str, None),
    "seed": (int, 0),
    "output_path": (str, "-"),
    "output_format": (str, None),
}


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    output_path: str
    output_format: str
    params: dict[str, Any] = field(default_factory=dict)


def _parse_value(key: str, raw: str, parser) -> Any:
    try:
        return parser(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None


def build_config(raw: dict[str, str]) -> ExperimentConfig:
    """Parse and validate raw string settings into an ExperimentConfig."""
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}; got {exp!r}")
    schema = SCHEMA[exp]
    unknown = set(raw) - set(schema) - set(COMMON)
    if unknown:
        raise ConfigError(f"unknown keys for {exp}: {', '.join(sorted(unknown))}")
    values = {}
    for key, (parser, default) in {**COMMON, **schema}.items():
        values[key] = _parse_value(key, raw[key], parser) if key in raw else default
    fmt = values["output_format"]
    if fmt is None:
        fmt = "json" if values["output_path"].endswith(".json") else "csv"
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output_format must be csv or json; got {fmt!r}")
    if not 0 <= values["seed"] < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    params = {k: values[k] for k in schema}
    cfg = ExperimentConfig(exp, values["seed"], values["output_path"], fmt, params)
    _VALIDATORS[exp](cfg.params)
    return cfg


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _positive(p, *keys):
    for k in keys:
        _require(p[k] is not None and p[k] > 0, f"{k} must be positive")


def _validate_violation(p):
    _positive(p, "epsilon", "t_max", "n_trials")
    if p["epsilon1"] is None or p["epsilon2"] is None:
        try:
            e1, e2 = gptt_instantiation(p["instantiation"], p["epsilon"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        p["epsilon1"] = e1 if p["epsilon1"] is None else p["epsilon1"]
        p["epsilon2"] = e2 if p["epsilon2"] is None else p["epsilon2"]
    _positive(p, "epsilon1", "epsilon2")
    _require(math.isfinite(p["epsilon1"]), "epsilon1 must be finite")
    _require(math.isfinite(p["epsilon2"]), "violation_curve needs a finite epsilon2")
    if p["t_grid"] is None:
        p["t_grid"] = [2**i for i in range(int(math.log2(p["t_max"])) + 1)]
    _require(len(p["t_grid"]) > 0 and all(t >= 1 for t in p["t_grid"]), "t_grid needs t >= 1")


def _validate_hard(p):
    _positive(p, "n_trials")
    _require(len(p["epsilon1_grid"]) > 0, "epsilon1_grid is empty")
    _require(all(0 < e < math.inf for e in p["epsilon1_grid"]), "epsilon1 values must be positive")


def _validate_dataset(p):
    _require(p["dataset"] in ("zipf", "csv", "staircase"), "dataset must be zipf, csv or staircase")
    if p["dataset"] == "csv":
        _require(bool(p["dataset_csv"]), "dataset = csv needs dataset_csv")
    if p["dataset"] == "zipf":
        _positive(p, "domain_size", "total", "exponent")


def _validate_recon(p):
    _require(p["dataset"] in ("zipf", "csv"), "reconstruction_table needs dataset zipf or csv")
    _validate_dataset(p)
    _positive(p, "n_trials")
    _require(len(p["epsilons"]) > 0 and all(e > 0 for e in p["epsilons"]), "epsilons must be positive")
    _require(0 < p["delta"] < 1, "delta must lie in (0, 1)")
    _require(0 < p["split_fraction"] < 1, "split_fraction must lie in (0, 1)")


def _validate_theorem(p):
    _validate_dataset(p)
    _positive(p, "epsilon", "n_trials")
    _require(0 < p["delta"] < 1, "delta must lie in (0, 1)")
    if p["dataset"] == "staircase":
        _require(p["staircase_k"] >= 0 and p["extra_cells"] >= 0, "staircase sizes must be >= 0")
        if p["k"] is not None:
            _require(p["k"] <= p["staircase_k"], "k exceeds the staircase support")
    if p["k"] is not None:
        alpha = attack_threshold(p["epsilon"], p["delta"])
        _require(p["k"] > 2 * alpha, f"k = {p['k']} must exceed 2*alpha = {2 * alpha}")


def _validate_demo(p):
    _require(len(p["counts"]) > 0 and all(c >= 0 for c in p["counts"]), "counts must be >= 0")
    _positive(p, "cutoff", "epsilon", "copies")
    _require(p["copies"] % 2 == 1, "copies must be odd")
    try:
        gptt_instantiation(p["instantiation"], p["epsilon"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


_VALIDATORS = {
    "violation_curve": _validate_violation,
    "hard_violation": _validate_hard,
    "reconstruction_table": _validate_recon,
    "theorem_check": _validate_theorem,
    "mechanism_demo": _validate_demo,
}


def _load_dataset(p, seed: int) -> tuple[Histogram, str]:
    kind = p["dataset"]
    if kind == "csv":
        db, meta = read_histogram_csv(p["dataset_csv"])
        return db, meta.name
    if kind == "staircase":
        return staircase_histogram(p["staircase_k"], p["extra_cells"]), "staircase"
    ds_seed = seed if p["dataset_seed"] is None else p["dataset_seed"]
    db = zipfian_histogram(p["domain_size"], p["total"], p["exponent"], Rng(ds_seed))
    return db, "zipf"


def run_violation_curve(cfg: ExperimentConfig) -> list[dict]:
    p = cfg.params
    e1, e2 = p["epsilon1"], p["epsilon2"]
    rows = []
    for t, rng in zip(p["t_grid"], Rng(cfg.seed).spawn(len(p["t_grid"]))):
        spec = CounterexampleSpec(t, e1, e2)
        mc = audit(spec, "monte_carlo", p["n_trials"], rng)
        rows.append(
            {
                "t": t,
                "log_ratio_quadrature": log_ratio(spec),
                "log_ratio_mc": mc.log_ratio,
                "mc_std_error": mc.std_error,
                "claimed_bound": 2 * e1,
            }
        )
    return rows


def run_hard_violation(cfg: ExperimentConfig) -> list[dict]:
    p = cfg.params
    n = p["n_trials"]
    rows = []
    grid = p["epsilon1_grid"]
    for e1, rng in zip(grid, Rng(cfg.seed).spawn(len(grid))):
        spec = CounterexampleSpec(1, e1, math.inf)
        pair, queries = spec.realization()
        params = spec.gptt_params
        target = np.array([False, True])
        rng_d, rng_dp = rng.spawn(2)
        freq = []
        for db, r in ((pair.left, rng_d), (pair.right, rng_dp)):
            hits = (gptt_batch(db, queries, params, n, r) == target).all(axis=1)
            f = float(hits.mean())
            freq.append((f, math.sqrt(f * (1 - f) / n)))
        prob_d, prob_dp = exact_output_probability_hard(e1)
        rows.append(
            {
                "epsilon1": e1,
                "prob_D": prob_d,
                "prob_Dprime": prob_dp,
                "mc_freq_D": freq[0][0],
                "mc_std_error_D": freq[0][1],
                "mc_freq_Dprime": freq[1][0],
                "mc_std_error_Dprime": freq[1][1],
                "n_trials": n,
            }
        )
    return rows


def run_reconstruction_table(cfg: ExperimentConfig) -> list[dict]:
    p = cfg.params
    db, name = _load_dataset(p, cfg.seed)
    meta = compute_meta(db, name)
    rows = []
    eps_grid = p["epsilons"]
    for eps, rng in zip(eps_grid, Rng(cfg.seed).spawn(len(eps_grid))):
        reports = [
            reconstruct(db, eps, r, delta=p["delta"], split_fraction=p["split_fraction"])
            for r in rng.spawn(p["n_trials"])
        ]
        small = [r.small_count_accuracy for r in reports if r.small_count_accuracy is not None]
        rows.append(
            {
                "dataset": meta.name,
                "domain": meta.domain_size,
                "scale": meta.scale,
                "support_k": meta.support_k,
                "epsilon": eps,
                "overall_accuracy": float(np.mean([r.overall_accuracy for r in reports])),
                "small_count_accuracy": float(np.mean(small)) if small else None,
            }
        )
    return rows


def run_theorem_check(cfg: ExperimentConfig) -> list[dict]:
    p = cfg.params
    db, name = _load_dataset(p, cfg.seed)
    meta = compute_meta(db, name)
    k = meta.support_k if p["k"] is None else p["k"]
    alpha = attack_threshold(p["epsilon"], p["delta"])
    if k <= 2 * alpha:
        raise ConfigError(f"dataset support k = {k} must exceed 2*alpha = {2 * alpha}")
    if k > meta.support_k:
        raise ConfigError(f"dataset lacks support up to k = {k} (has {meta.support_k})")
    frac = reconstruction_theorem_check(
        db, k, p["epsilon"], p["delta"], p["n_trials"], Rng(cfg.seed)
    )
    return [
        {
            "dataset": meta.name,
            "k": k,
            "alpha": alpha,
            "m": k - 2 * alpha,
            "epsilon": p["epsilon"],
            "delta": p["delta"],
            "n_trials": p["n_trials"],
            "fraction_exact": frac,
            "target": 1 - p["delta"],
        }
    ]


def run_mechanism_demo(cfg: ExperimentConfig) -> list[dict]:
    p = cfg.params
    db = Histogram(p["counts"])
    queries = [Count(i) for i in range(db.domain_size)]
    r_svt, r_gptt, r_amp = Rng(cfg.seed).spawn(3)
    e1, e2 = gptt_instantiation(p["instantiation"], p["epsilon"])
    gparams = GpttParams(p["threshold"], e1, e2)
    runs = {
        "svt": svt(db, queries, SvtParams(p["threshold"], p["cutoff"], p["epsilon"]), r_svt).answers,
        "gptt": gptt(db, queries, gparams, r_gptt).answers.answers,
        "gptt_amplified": gptt_amplified(db, queries, gparams, p["copies"], r_amp).answers,
    }
    rows = []
    for mech, answers in runs.items():
        for i, q in enumerate(queries):
            rows.append(
                {
                    "mechanism": mech,
                    "query": i,
                    "true_value": db[q.index],
                    "answer": repr(answers[i]) if i < len(answers) else "",
                }
            )
    return rows


RUNNERS = {
    "violation_curve": run_violation_curve,
    "hard_violation": run_hard_violation,
    "reconstruction_table": run_reconstruction_table,
    "theorem_check": run_theorem_check,
    "mechanism_demo": run_mechanism_demo,
}


def run(cfg: ExperimentConfig) -> list[dict]:
    return RUNNERS[cfg.experiment](cfg)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def _json_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    if isinstance(v, (float, np.floating)) and not math.isfinite(v):
        return f'"{_fmt(v)}"'
    if isinstance(v, (bool, int, float, np.integer, np.floating)):
        return _fmt(v)
    s = str(v).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{s}"'


def render(cfg: ExperimentConfig, rows: list[dict]) -> str:
    """Serialize rows; floats use 17 significant digits so reruns diff cleanly."""
    if cfg.output_format == "csv":
        buf = io.StringIO()
        cols = list(rows[0]) if rows else []
        buf.write(",".join(cols) + "\n")
        for row in rows:
            buf.write(",".join(_fmt(row[c]) for c in cols) + "\n")
        return buf.getvalue()
    lines = [
        "{",
        f'  "experiment": {_json_value(cfg.experiment)},',
        f'  "seed": {cfg.seed},',
        '  "params": {'
        + ", ".join(f'"{k}": {_json_value(v)}' for k, v in cfg.params.items())
        + "},",
        '  "rows": [',
    ]
    body = [
        "    {" + ", ".join(f'"{k}": {_json_value(v)}' for k, v in row.items()) + "}"
        for row in rows
    ]
    lines.append(",\n".join(body))
    lines += ["  ]", "}"]
    return "\n".join(lines) + "\n"


def _read_config_file(path: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if not parser.has_section("experiment"):
        raise ConfigError(f"config {path} has no [experiment] section")
    return dict(parser.items("experiment"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gptt-audit", description="Threshold-testing privacy experiments."
    )
    ap.add_argument("--experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="INI file with an [experiment] section")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output path ('-' for stdout)")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument(
        "--param", action="append", default=[], metavar="KEY=VALUE", help="override one key"
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = _read_config_file(args.config) if args.config else {}
        for item in args.param:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
            raw[key.strip()] = value.strip()
        for key, value in (
            ("experiment", args.experiment),
            ("seed", args.seed),
            ("output_path", args.out),
            ("output_format", args.format),
        ):
            if value is not None:
                raw[key] = str(value)
        cfg = build_config(raw)
        rows = run(cfg)
        text = render(cfg, rows)
        if cfg.output_path == "-":
            sys.stdout.write(text)
        else:
            with open(cfg.output_path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, DatasetError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AssertionError as exc:
        print(f"internal assertion failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
