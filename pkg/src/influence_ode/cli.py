"""Command-line pipeline: synthesize, simulate, fit, report.

    influence-ode <synth|simulate|fit|report> --config <json> --out <dir>
                  [--seed N] [--series f.csv] [--network f.json] [--weights f.json]

The only module with process-level side effects.  Exit codes are fixed for
scriptability: 0 success, 2 parse/usage error, 3 cross-reference failure,
4 numeric failure.  All outputs are deterministic functions of their inputs
and seed, so reruns are byte-identical; every output records the manifest
that produced it (embedded ``meta`` for JSON, ``<file>.meta.json`` sidecar
for CSV, which cannot carry metadata without breaking its format).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import __version__, dynamics, identify, kernelize, synth
from .dynamics import InfluenceNetwork, InfluenceWeights

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_XREF = 3
EXIT_NUMERIC = 4


class CrossReferenceError(Exception):
    """Inputs parse individually but do not reference each other consistently."""


@dataclass(frozen=True)
class RunManifest:
    """Record of one CLI invocation, embedded into every output it writes."""

    command: str
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    version: str = __version__
    seed: int | None = None

    def to_meta(self) -> dict:
        return asdict(self)


def write_weights_json(
    path: str, weights: Mapping[str, InfluenceWeights], meta: dict | None = None
) -> None:
    doc: dict = {
        "weights": [
            {
                "recipient": rid,
                "self_weight": float(weights[rid].self_weight),
                "influence_weights": {
                    j: float(w) for j, w in weights[rid].influence_weights.items()
                },
            }
            for rid in sorted(weights)
        ]
    }
    if meta is not None:
        doc["meta"] = meta
    _dump_json(path, doc)


def read_weights_json(path: str) -> dict[str, InfluenceWeights]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from None
    try:
        out = {}
        for entry in doc["weights"]:
            out[str(entry["recipient"])] = InfluenceWeights(
                str(entry["recipient"]),
                float(entry["self_weight"]),
                {str(j): float(w) for j, w in entry["influence_weights"].items()},
            )
        return out
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: malformed weights file: {exc}") from None


def _dump_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from None


def _json_float(x: float) -> float | None:
    """JSON has no Infinity/NaN; undefined statistics serialize as null."""
    return float(x) if math.isfinite(x) else None


def _fit_to_dict(fit: identify.FitDiagnostics) -> dict:
    return {
        "recipient": fit.recipient_id,
        "column_ids": list(fit.column_ids),
        "betas": [float(b) for b in fit.betas],
        "rank": fit.rank,
        "n_observations": fit.n_observations,
        "n_predictors": fit.n_predictors,
        "r_squared": fit.r_squared,
        "adj_r_squared": fit.adj_r_squared,
        "f_statistic": _json_float(fit.f_statistic),
        "prob_f": fit.prob_f,
        "residuals": [float(r) for r in fit.residuals],
        "bound_violations": [[uid, float(w)] for uid, w in fit.bound_violations],
        "saturated": fit.saturated,
        "zero_response": fit.zero_response,
    }


def _summary_to_dict(summary: identify.CohortSummary) -> dict:
    return {
        "n_models": summary.n_models,
        "n_observations": summary.n_observations,
        "adj_r_squared_mean": _json_float(summary.adj_r_squared_mean),
        "adj_r_squared_var": _json_float(summary.adj_r_squared_var),
        "prob_f_mean": _json_float(summary.prob_f_mean),
        "prob_f_var": _json_float(summary.prob_f_var),
        "influencer_count_mean": _json_float(summary.influencer_count_mean),
        "influencer_count_var": _json_float(summary.influencer_count_var),
    }


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join(f"--{n}" for n in missing)
        raise ValueError(f"{args.command}: missing required option(s) {flags}")


def _outdir(args: argparse.Namespace) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_synth(args: argparse.Namespace) -> int:
    _require(args, "config", "out")
    out = _outdir(args)
    config_doc = _load_json(args.config)
    config = synth.SynthConfig.from_dict(config_doc)
    if args.seed is not None:
        config = config.with_seed(args.seed)

    dataset = synth.gen_dataset(config)
    manifest = RunManifest(
        command="synth",
        inputs={"config": args.config},
        outputs=["series.csv", "network.json", "true_weights.json", "manifest.json"],
        config=asdict(config),
        seed=config.seed,
    )
    meta = manifest.to_meta()
    kernelize.write_series_csv(os.path.join(out, "series.csv"), dataset.series, meta=meta)
    kernelize.write_network_json(os.path.join(out, "network.json"), dataset.network, meta=meta)
    write_weights_json(os.path.join(out, "true_weights.json"), dataset.true_weights, meta=meta)
    _dump_json(os.path.join(out, "manifest.json"), {"meta": meta})
    print(
        f"synth: {len(dataset.network.recipients)} recipients, "
        f"{len(dataset.series)} users, {config.n_kernels} kernels -> {out}"
    )
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    _require(args, "config", "out", "network", "weights")
    out = _outdir(args)
    config = _load_json(args.config)
    network = kernelize.read_network_json(args.network)
    weights = read_weights_json(args.weights)
    try:
        steps = int(config["steps"])
        noise_sigma = float(config.get("noise_sigma", 0.0))
        initial = {str(u): float(x) for u, x in config["initial"].items()}
        scripted = {
            str(u): [float(x) for x in traj]
            for u, traj in config.get("scripted", {}).items()
        }
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{args.config}: malformed simulate config: {exc}") from None
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))

    series = dynamics.simulate(
        network, weights, initial, steps=steps,
        noise_sigma=noise_sigma, seed=seed, scripted=scripted or None,
    )
    manifest = RunManifest(
        command="simulate",
        inputs={"config": args.config, "network": args.network, "weights": args.weights},
        outputs=["series.csv", "manifest.json"],
        config=config,
        seed=seed,
    )
    meta = manifest.to_meta()
    kernelize.write_series_csv(os.path.join(out, "series.csv"), series, meta=meta)
    _dump_json(os.path.join(out, "manifest.json"), {"meta": meta})
    print(f"simulate: {len(series)} users x {steps + 1} kernels -> {out}")
    return EXIT_OK


def _load_filled_series(
    series_path: str, config: dict
) -> dict[str, dynamics.OpinionSeries]:
    num_kernels = config.get("num_kernels")
    series, warnings = kernelize.read_series_csv(series_path, num_kernels)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    leading = config.get("leading", "backfill")
    return {uid: kernelize.forward_fill(s, leading=leading) for uid, s in series.items()}


def cmd_fit(args: argparse.Namespace) -> int:
    _require(args, "series", "network", "out")
    out = _outdir(args)
    config = _load_json(args.config) if args.config else {}
    network = kernelize.read_network_json(args.network)
    series = _load_filled_series(args.series, config)

    for uid in network.all_user_ids():
        if uid not in series:
            raise CrossReferenceError(
                f"network user {uid!r} has no series in {args.series}"
            )
    lengths = {len(series[uid]) for uid in network.all_user_ids()}
    if len(lengths) > 1:
        raise CrossReferenceError(f"series lengths differ: {sorted(lengths)}")
    for rid in network.recipients_without_influencers():
        print(f"note: recipient {rid!r} has no influencers (self-only model)",
              file=sys.stderr)

    result = identify.fit_cohort(network, series)
    for rid, message in result.failures:
        print(f"fit failure for {rid!r}: {message}", file=sys.stderr)
    if not result.fits:
        raise ArithmeticError("no recipient could be fit")

    manifest = RunManifest(
        command="fit",
        inputs={"series": args.series, "network": args.network,
                "config": args.config or ""},
        outputs=["report.json", "fitted_weights.json"],
        config=config,
    )
    meta = manifest.to_meta()
    report = {
        "meta": meta,
        "models": [_fit_to_dict(f) for f in result.fits],
        "failures": [{"recipient": rid, "error": msg} for rid, msg in result.failures],
        "summary": _summary_to_dict(result.summary),
    }
    _dump_json(os.path.join(out, "report.json"), report)
    fitted = {f.recipient_id: f.weights() for f in result.fits}
    write_weights_json(os.path.join(out, "fitted_weights.json"), fitted, meta=meta)
    print(
        f"fit: {result.summary.n_models} models, "
        f"adj R^2 mean {result.summary.adj_r_squared_mean:.6f} -> {out}"
    )
    return EXIT_OK


def _recompute_aggregates(models: Sequence[dict]) -> dict:
    """Cohort aggregates recomputed from per-recipient report entries."""
    adj = np.array([m["adj_r_squared"] for m in models], dtype=float)
    pf = np.array([m["prob_f"] for m in models], dtype=float)
    counts = np.array([m["n_predictors"] - 1 for m in models], dtype=float)
    n_obs = {m["n_observations"] for m in models}
    return {
        "n_models": len(models),
        "n_observations": n_obs.pop() if len(n_obs) == 1 else None,
        "adj_r_squared_mean": float(adj.mean()),
        "adj_r_squared_var": float(adj.var()),
        "prob_f_mean": float(pf.mean()),
        "prob_f_var": float(pf.var()),
        "influencer_count_mean": float(counts.mean()),
        "influencer_count_var": float(counts.var()),
    }


def cmd_report(args: argparse.Namespace) -> int:
    _require(args, "series", "out")
    out = _outdir(args)
    config = _load_json(args.config) if args.config else {}
    series, warnings = kernelize.read_series_csv(args.series, config.get("num_kernels"))
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)

    outputs = ["summary.csv", "cohort.json", "manifest.json"]
    manifest = RunManifest(
        command="report",
        inputs={"series": args.series, "config": args.config or "",
                "weights": args.weights or ""},
        outputs=outputs,
        config=config,
    )
    meta = manifest.to_meta()

    # Plot-ready opinion-per-kernel rows.
    rows = []
    for uid in sorted(series):
        s = series[uid]
        for k in range(len(s)):
            if s.observed[k]:
                rows.append((k, uid, float(s.values[k])))
    rows.sort()
    summary_path = os.path.join(out, "summary.csv")
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kernel", "user", "opinion"])
        for k, uid, x in rows:
            writer.writerow([k, uid, repr(x)])
    kernelize._write_meta_sidecar(summary_path, meta)

    observed_values = np.array([x for _, _, x in rows], dtype=float)
    cohort: dict = {
        "meta": meta,
        "series_stats": {
            "n_users": len(series),
            "n_kernels": max((len(s) for s in series.values()), default=0),
            "n_observed_rows": len(rows),
            "opinion_mean": float(observed_values.mean()) if rows else None,
            "opinion_var": float(observed_values.var()) if rows else None,
        },
    }

    if config.get("fit_report"):
        report = _load_json(config["fit_report"])
        try:
            cohort["aggregates"] = _recompute_aggregates(report["models"])
        except (KeyError, TypeError) as exc:
            raise ValueError(
                f"{config['fit_report']}: malformed fit report: {exc}"
            ) from None

    if args.weights and config.get("fitted_weights"):
        true_w = read_weights_json(args.weights)
        fitted_w = read_weights_json(config["fitted_weights"])
        try:
            recovery = synth.evaluate_recovery(true_w, fitted_w)
        except ValueError as exc:
            raise CrossReferenceError(str(exc)) from None
        cohort["recovery"] = {
            "max_abs_error": recovery.max_abs_error,
            "rmse": recovery.rmse,
            "per_recipient": recovery.per_recipient,
        }

    if config.get("events") and config.get("kernel_spec"):
        events = kernelize.read_events_csv(config["events"])
        spec = kernelize.read_kernel_spec_json(config["kernel_spec"])
        per_kernel = [0] * spec.num_kernels
        for counts in kernelize.kernel_post_counts(events, spec).values():
            for k, c in counts.items():
                per_kernel[k] += c
        posts_path = os.path.join(out, "posts_per_kernel.csv")
        with open(posts_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["kernel", "posts"])
            for k, c in enumerate(per_kernel):
                writer.writerow([k, c])
        kernelize._write_meta_sidecar(posts_path, meta)
        outputs.append("posts_per_kernel.csv")

    _dump_json(os.path.join(out, "cohort.json"), cohort)
    _dump_json(os.path.join(out, "manifest.json"), {"meta": meta})
    print(f"report: {len(series)} users, {len(rows)} observations -> {out}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="influence-ode",
        description="Simulate the social-influence update and identify "
                    "influence weights from opinion series.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("synth", "generate a synthetic cohort (series, network, true weights)"),
        ("simulate", "simulate trajectories from a network and weights"),
        ("fit", "fit per-recipient OLS models and write the report"),
        ("report", "aggregate a fit report into plot-ready CSV and cohort JSON"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--series", help="series CSV (user_id,kernel,opinion)")
        p.add_argument("--network", help="network JSON")
        p.add_argument("--weights", help="weights JSON")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (CrossReferenceError, dynamics.MissingUserError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_XREF
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
