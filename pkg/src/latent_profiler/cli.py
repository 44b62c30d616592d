"""``profiler`` command line.

Every subcommand turns its arguments into a plain config dict and hands it to
``run_pipeline``. The config is embedded in every report, so
``profiler run report.json`` re-executes a run and reproduces its output.

Exit codes: 0 success, 1 a measure or computation was undefined, 2 usage or
input error. Errors are written to stderr as ``{"error": {"code", "message"}}``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from . import __version__
from ._parallel import blas_single_thread, set_threads
from .analysis import ObservationTable, aggregate_replicates, evaluate, fit_linear, pearson
from .corpus import (
    compare_profiles,
    frequency_profile,
    read_token_lines,
    sample_sequences,
    shuffled_token_baseline,
)
from .errors import (
    InputNotFoundError,
    InsufficientDataError,
    ProfilerError,
    UndefinedMeasureError,
)
from .pipeline import SCHEMA_VERSION, measure_cloud, parse_kinds, parse_measure_list, spread_measures
from .pointcloud import (
    RNG_NAME,
    MixtureSpec,
    generate_mixture,
    generate_uniform,
    interpolate_noise,
    load_matrix,
    random_mixture_spec,
    save_matrix,
)
from .qmeasures import UNDEFINED
from .quantizer import QuantizationModel, train

EXIT_OK = 0
EXIT_UNDEFINED = 1
EXIT_USAGE = 2


class UsageError(ProfilerError):
    code = "usage_error"


# -- helpers ------------------------------------------------------------------


def _require_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputNotFoundError(f"input file not found: {path}")
    return p


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _envelope(cfg: dict, body: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "config": cfg,
        **body,
    }


def _write_csv(path, header, rows) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


# -- commands -----------------------------------------------------------------


def cmd_gen_uniform(cfg: dict) -> int:
    cloud = generate_uniform(cfg["n"], cfg["d"], cfg["low"], cfg["high"], cfg["seed"])
    save_matrix(cloud, cfg["out"], cfg.get("format"))
    _emit(_dumps(_envelope(cfg, {"n": cloud.n, "d": cloud.d, "seeds": {"rng": RNG_NAME, "seed": cfg["seed"]}})), None)
    return EXIT_OK


def cmd_gen_mixture(cfg: dict) -> int:
    if cfg.get("spec") is not None:
        spec = MixtureSpec.from_dict(cfg["spec"])
    else:
        weights = cfg.get("weights")
        spec = random_mixture_spec(cfg["components"], cfg["d"], cfg["n"], cfg["scale"],
                                   cfg["separation"], cfg["seed"], weights)
    cloud = generate_mixture(spec)
    save_matrix(cloud, cfg["out"], cfg.get("format"))
    _emit(_dumps(_envelope(cfg, {"n": cloud.n, "d": cloud.d, "seeds": {"rng": RNG_NAME, "seed": spec.seed}})), None)
    return EXIT_OK


def cmd_interpolate(cfg: dict) -> int:
    base = load_matrix(_require_file(cfg["input"]))
    out = interpolate_noise(base, cfg["alpha"], cfg["seed"])
    save_matrix(out, cfg["out"], cfg.get("format"))
    _emit(_dumps(_envelope(cfg, {"n": out.n, "d": out.d, "seeds": {"rng": RNG_NAME, "seed": cfg["seed"]}})), None)
    return EXIT_OK


def cmd_quantize(cfg: dict) -> int:
    cloud = load_matrix(_require_file(cfg["input"]))
    model = train(cloud, cfg["kind"], m=cfg["m"], k=cfg["k"], iters=cfg.get("iters"),
                  icm_sweeps=cfg.get("icm_sweeps", 2), seed=cfg["seed"], permute=cfg.get("permute", False))
    model.save(cfg["out"])
    _emit(_dumps(_envelope(cfg, {"training": model.train_info})), None)
    return EXIT_OK


def _measure_config(cfg: dict) -> dict:
    out = dict(cfg)
    out["measures"] = parse_measure_list(",".join(cfg["measures"]) if cfg.get("measures") else None)
    parse_kinds(cfg.get("kind", "aq"))
    return out


def cmd_measure(cfg: dict) -> int:
    cloud = load_matrix(_require_file(cfg["input"]))
    cfg = _measure_config(cfg)
    models = None
    if cfg.get("quantizer"):
        models = [QuantizationModel.load(_require_file(cfg["quantizer"]))]
    report = measure_cloud(cloud, cfg, models)
    _emit(report.to_json(), cfg.get("out"))
    return EXIT_UNDEFINED if report.any_undefined() else EXIT_OK


def cmd_spread(cfg: dict) -> int:
    cloud = load_matrix(_require_file(cfg["input"]))
    values = spread_measures(cloud, vrm_window=cfg.get("vrm_window"))
    body = {name: mv.value for name, mv in values.items()}
    body["statuses"] = {name: mv.status for name, mv in values.items()}
    body["details"] = {name: mv.detail for name, mv in values.items() if mv.detail}
    _emit(_dumps(_envelope(cfg, body)), cfg.get("out"))
    return EXIT_UNDEFINED if any(mv.status == UNDEFINED for mv in values.values()) else EXIT_OK


def cmd_sample_corpus(cfg: dict) -> int:
    paths = [_require_file(p) for p in cfg["inputs"]]
    sample = sample_sequences(read_token_lines(paths), cfg["count"], cfg["min"], cfg["max"], cfg["seed"])
    Path(cfg["out"]).parent.mkdir(parents=True, exist_ok=True)
    with open(cfg["out"], "w", encoding="utf-8") as fh:
        for seq in sample.sequences:
            fh.write(" ".join(seq) + "\n")
    body = {"count": len(sample.sequences), "eligible": sample.eligible,
            "source_hash": sample.source_hash, "seeds": {"rng": RNG_NAME, "seed": sample.seed}}
    _emit(_dumps(_envelope(cfg, body)), None)
    return EXIT_OK


def cmd_profile(cfg: dict) -> int:
    sample_seqs = list(read_token_lines([_require_file(cfg["sample"])]))
    full_seqs = list(read_token_lines([_require_file(p) for p in cfg["against"]]))
    sample_seqs = [s for s in sample_seqs if s]
    full_seqs = [s for s in full_seqs if s]
    full = frequency_profile(full_seqs)
    comparison = compare_profiles(frequency_profile(sample_seqs), full)
    body = comparison.summary()
    if cfg.get("baseline_seed") is not None:
        base = compare_profiles(frequency_profile(shuffled_token_baseline(sample_seqs, cfg["baseline_seed"])), full)
        body["baseline"] = base.summary()
    tables_dir = cfg.get("tables_dir")
    if tables_dir:
        for name, rows in comparison.tables.items():
            keyed = [(r[0], " ".join(r[1]) if isinstance(r[1], tuple) else r[1], r[2], r[3]) for r in rows]
            _write_csv(Path(tables_dir) / f"{name}_rank_frequency.csv",
                       ["rank", "key", "full_frequency", "sample_frequency"], keyed)
        body["tables"] = sorted(f"{name}_rank_frequency.csv" for name in comparison.tables)
    _emit(_dumps(_envelope(cfg, body)), cfg.get("out"))
    return EXIT_OK


def cmd_analyze(cfg: dict) -> int:
    table = ObservationTable.from_csv(_require_file(cfg["observations"]))
    if cfg.get("aggregate_median"):
        table = aggregate_replicates(table)
    fit = fit_linear(table, cfg["features"], cfg.get("architecture", False))
    body = {"fit": fit.to_dict()}
    correlations = {}
    for f in cfg["features"]:
        try:
            correlations[f] = pearson(table.column(f), table.column("target"))
        except (UndefinedMeasureError, ProfilerError):
            correlations[f] = None
    body["pearson"] = correlations
    if cfg.get("holdout"):
        holdout = ObservationTable.from_csv(_require_file(cfg["holdout"]))
        if cfg.get("aggregate_median"):
            holdout = aggregate_replicates(holdout)
        fit.holdout_mse = evaluate(fit, holdout)
        body["fit"]["holdout_mse"] = fit.holdout_mse
        body["holdout_predictions"] = {
            row.model_id: float(p) for row, p in zip(holdout.rows, fit.predict(holdout))
        }
    if cfg.get("residuals_out"):
        _write_csv(cfg["residuals_out"], ["model_id", "fitted", "residual"],
                   [(mid, float(f), float(r)) for mid, f, r in zip(fit.model_ids, fit.fitted, fit.residuals)])
    _emit(_dumps(_envelope(cfg, body)), cfg.get("out"))
    return EXIT_OK


def _alpha_tag(alpha: float) -> str:
    return repr(float(alpha)).replace(".", "p").replace("-", "m")


def cmd_sweep(cfg: dict) -> int:
    base = load_matrix(_require_file(cfg["input"]))
    mcfg = _measure_config({k: v for k, v in cfg.items() if k not in ("alphas", "out_dir")})
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    undefined = False
    index = []
    for alpha in cfg["alphas"]:
        cloud = interpolate_noise(base, alpha, cfg["noise_seed"])
        run_cfg = dict(mcfg, alpha=float(alpha))
        report = measure_cloud(cloud, run_cfg)
        name = f"report_alpha_{_alpha_tag(alpha)}.json"
        (out_dir / name).write_text(report.to_json(), encoding="utf-8")
        index.append({"alpha": float(alpha), "report": name})
        undefined |= report.any_undefined()
        for mname, mv in report.measures.items():
            rows.append((float(alpha), mname, mv.value if mv.value is not None else "", mv.status))
    _write_csv(out_dir / "sweep.csv", ["alpha", "measure", "value", "status"], rows)
    _emit(_dumps(_envelope(cfg, {"reports": index, "table": "sweep.csv"})), None)
    return EXIT_UNDEFINED if undefined else EXIT_OK


COMMANDS: Dict[str, Callable[[dict], int]] = {
    "gen-uniform": cmd_gen_uniform,
    "gen-mixture": cmd_gen_mixture,
    "interpolate": cmd_interpolate,
    "quantize": cmd_quantize,
    "measure": cmd_measure,
    "spread": cmd_spread,
    "sample-corpus": cmd_sample_corpus,
    "profile": cmd_profile,
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
}


def run_pipeline(config: dict) -> int:
    """Execute one serialized run config; returns the exit code."""
    command = config.get("command")
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r} in config")
    return COMMANDS[command](config)


# -- argument parsing -----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _report_error(UsageError(message))
        sys.exit(EXIT_USAGE)


def _floats(text: str) -> List[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text: str) -> List[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_quantizer_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", default="aq", help="pq, aq, or both (default aq)")
    p.add_argument("--m", type=int, default=4, help="subspaces / codebooks (default 4)")
    p.add_argument("--k", type=int, default=256, help="centroids per codebook (default 256)")
    p.add_argument("--iters", type=int, default=None,
                   help="k-means iterations (pq, default 25) or outer iterations (aq, default 8)")
    p.add_argument("--icm-sweeps", type=int, default=2, help="ICM sweeps per aq iteration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--permute", action="store_true", help="randomly permute dimensions before pq split")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="profiler", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (falls back to PROFILER_THREADS, then 1)")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-uniform", help="write a uniform random cloud")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--low", type=float, default=0.0)
    p.add_argument("--high", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["binary", "csv"])

    p = sub.add_parser("gen-mixture", help="write a Gaussian-mixture cloud")
    p.add_argument("--spec", help="JSON mixture spec {components: [{weight, mean, scale}], n, seed}")
    p.add_argument("--components", type=int, default=3)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--separation", type=float, default=5.0)
    p.add_argument("--weights", type=_floats)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["binary", "csv"])

    p = sub.add_parser("interpolate", help="mix standard-normal noise into a matrix")
    p.add_argument("input")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["binary", "csv"])

    p = sub.add_parser("quantize", help="train a quantizer and save it")
    p.add_argument("input")
    _add_quantizer_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("measure", help="run the measure suite and write a JSON report")
    p.add_argument("input")
    p.add_argument("--quantizer", help="pre-trained model file instead of training")
    _add_quantizer_args(p)
    p.add_argument("--measures", type=_names, help="comma-separated subset (default all)")
    p.add_argument("--vrm-window", type=int)
    p.add_argument("--min-cluster", type=int)
    p.add_argument("--out")

    p = sub.add_parser("spread", help="EEE, VRM and IsoScore only")
    p.add_argument("input")
    p.add_argument("--vrm-window", type=int)
    p.add_argument("--out")

    p = sub.add_parser("sample-corpus", help="sample unique sequences from text files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--count", type=int, default=5000)
    p.add_argument("--min", type=int, default=3)
    p.add_argument("--max", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("profile", help="compare a sample's n-gram profile against the full corpus")
    p.add_argument("sample")
    p.add_argument("--against", nargs="+", required=True)
    p.add_argument("--tables-dir", help="write rank-frequency CSV tables here")
    p.add_argument("--baseline-seed", type=int, help="also score a shuffled-token baseline")
    p.add_argument("--out")

    p = sub.add_parser("analyze", help="regress a target score on measures")
    p.add_argument("observations")
    p.add_argument("--feature", dest="features", action="append", required=True,
                   help="measure column (repeat or comma-separate)")
    p.add_argument("--architecture", action="store_true", help="add one-hot architecture terms")
    p.add_argument("--holdout", help="observation CSV to evaluate MSE on")
    p.add_argument("--aggregate-median", action="store_true", help="median over rows sharing a group")
    p.add_argument("--residuals-out", help="CSV of model_id, fitted, residual")
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="measure a cloud at several noise levels")
    p.add_argument("input")
    p.add_argument("--alphas", type=_floats, required=True)
    p.add_argument("--noise-seed", type=int, default=0)
    _add_quantizer_args(p)
    p.add_argument("--measures", type=_names)
    p.add_argument("--vrm-window", type=int)
    p.add_argument("--min-cluster", type=int)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("run", help="re-run a serialized config (or the config inside a report)")
    p.add_argument("config")
    p.add_argument("--out", help="override the config's output path")
    return parser


def args_to_config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("threads",)}
    if args.command == "gen-mixture" and cfg.get("spec"):
        cfg["spec"] = json.loads(Path(_require_file(cfg["spec"])).read_text(encoding="utf-8"))
    if args.command == "analyze":
        cfg["features"] = [n for f in cfg["features"] for n in _names(f)]
    return cfg


def _report_error(exc: BaseException) -> None:
    code = getattr(exc, "code", None) or "error"
    if isinstance(exc, FileNotFoundError) and not isinstance(exc, ProfilerError):
        code = "input_not_found"
    sys.stderr.write(json.dumps({"error": {"code": code, "message": str(exc)}}, sort_keys=True) + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        set_threads(args.threads)
        if args.command == "run":
            data = json.loads(_require_file(args.config).read_text(encoding="utf-8"))
            cfg = dict(data.get("config", data))
            cfg.pop("conventions", None)
            if args.out:
                cfg["out"] = args.out
        else:
            cfg = args_to_config(args)
        with blas_single_thread():
            return run_pipeline(cfg)
    except (UndefinedMeasureError, InsufficientDataError) as exc:
        _report_error(exc)
        return EXIT_UNDEFINED
    except (ProfilerError, FileNotFoundError, json.JSONDecodeError, KeyError, ValueError) as exc:
        _report_error(exc)
        return EXIT_USAGE
    finally:
        set_threads(None)


if __name__ == "__main__":
    sys.exit(main())
