"""Batch command line: synth | estimate | simulate | forecast | evaluate.

Progress and summaries go to standard error; data goes to files.  Exit
codes: 0 ok, 2 usage, 3 data error, 4 model error.  Every output is a
deterministic function of (inputs, seed, version).
"""

import argparse
import datetime as dt
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from . import artifacts as art_mod
from . import data as data_mod
from . import evaluate as eval_mod
from . import simulate as sim_mod
from .errors import DataError, ModelError

EXIT_DATA = 3
EXIT_MODEL = 4


def _log(msg: str):
    print(msg, file=sys.stderr)


def cmd_synth(args) -> int:
    spec = data_mod.market_spec(args.seed, group_target=args.group_target)
    ds = data_mod.generate_synthetic(spec, args.days)
    model = {
        "graph": art_mod.graph_to_payload(spec.graph()),
        "planned_sources": {pl.name: pl.source for pl in spec.planned},
        "group_target": spec.group_target,
    }
    manifest = data_mod.save_dataset(ds, args.out)
    payload = json.loads(manifest.read_text())
    payload["model"] = model
    manifest.write_text(json.dumps(payload, indent=2, sort_keys=True))
    neg = float((ds.prices.values < 0).mean())
    _log(f"synthetic market: {args.days} days, seed {args.seed}, "
         f"{100 * neg:.2f}% negative-price hours -> {manifest}")
    return 0


def cmd_estimate(args) -> int:
    ds = data_mod.ingest(args.manifest)
    manifest = json.loads(Path(args.manifest).read_text())
    model_cfg = manifest.get("model")
    if not model_cfg:
        raise DataError(f"{args.manifest}: no 'model' section (graph and planned_sources)")
    graph = art_mod.graph_from_payload(model_cfg["graph"])
    system = sim_mod.estimate_system(
        ds, graph, model_cfg["planned_sources"],
        group_target=model_cfg.get("group_target"),
        continue_on_error=True,
    )
    path = art_mod.save_system(system, args.out)

    for name, eq in system.physical.equations.items():
        _log(f"physical {name}: {eq.n_active()} active, bic {eq.bic:.1f}")
    for model, label in ((system.planned, "planned"), (system.bids, "bids")):
        active = [len(model.equations[(t, h)].terms) for t in model.targets
                  for h in range(model.n_hours)]
        _log(f"{label}: {len(model.targets)} series x {model.n_hours} h, "
             f"mean active terms {np.mean(active):.1f}")
    failures = dict(system.physical.failed)
    failures.update(system.planned.failed)
    failures.update(system.bids.failed)
    if failures:
        for key, msg in failures.items():
            _log(f"estimation failed for {key}: {msg}")
        raise ModelError(f"{len(failures)} equations failed to estimate")
    _log(f"artifacts -> {path.parent}")
    return 0


def _sim_config(args) -> sim_mod.SimulationConfig:
    growth = {}
    if args.growth_wind is not None:
        growth["wind"] = args.growth_wind
    if args.growth_solar is not None:
        growth["solar"] = args.growth_solar
    return sim_mod.SimulationConfig(
        n_paths=args.paths, horizon_days=args.horizon_days, seed=args.seed,
        growth=growth, failure_policy=args.failure_policy, parallel=args.parallel,
    )


def cmd_simulate(args) -> int:
    system = art_mod.load_system(args.artifacts)
    cfg = _sim_config(args)
    ens = sim_mod.run_ensemble(system, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(
        out / "ensemble.npz", price_ticks=ens.price_ticks, status=ens.status,
        clamp_counts=ens.clamp_counts,
    )
    meta = {
        "seed": cfg.seed, "n_paths": cfg.n_paths, "horizon_days": cfg.horizon_days,
        "origin": ens.origin.isoformat(), "version": __version__,
        "failed_paths": int((~ens.ok).sum()),
    }
    (out / "ensemble_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    _log(f"{cfg.n_paths} paths x {cfg.horizon_days} days -> {out / 'ensemble.npz'} "
         f"({meta['failed_paths']} failed)")
    return 0


def _dates_hours(origin: dt.date, horizon: int):
    dates = [(origin + dt.timedelta(days=d)).isoformat() for d in range(horizon)]
    return np.repeat(dates, 24), np.tile(np.arange(24), horizon)


def cmd_forecast(args) -> int:
    system = art_mod.load_system(args.artifacts)
    cfg = _sim_config(args)
    ens = sim_mod.run_ensemble(system, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stamp = {"seed": cfg.seed, "horizon_days": cfg.horizon_days, "n_paths": cfg.n_paths,
             "origin": ens.origin.isoformat(), "version": __version__}

    probs = np.arange(1, 100) / 100.0
    panel = sim_mod.quantile_panel(ens, probs)
    date_col, hour_col = _dates_hours(ens.origin, cfg.horizon_days)
    frames = []
    for qi, p in enumerate(probs):
        frames.append(pd.DataFrame({
            "date": date_col, "hour": hour_col,
            "quantile": int(round(100 * p)),
            "price": panel[qi].reshape(-1),
        }))
    pd.concat(frames, ignore_index=True).to_csv(out / "quantiles.csv", index=False)

    observed_panel, history = None, None
    if args.observed:
        observed_panel, history = _read_observed(args.observed, ens.origin, cfg.horizon_days)

    reports = []
    frames = []
    for c in range(1, args.run_length + 1):
        rep = eval_mod.event_probabilities(
            ens, c, observed=observed_panel, history=history, inclusive=args.inclusive
        )
        reports.append(rep)
        frames.append(pd.DataFrame({
            "c": c, "date": date_col, "hour": hour_col,
            "probability": rep.probabilities.reshape(-1),
        }))
    pd.concat(frames, ignore_index=True).to_csv(out / "events.csv", index=False)

    rows = eval_mod.event_summary(reports)
    pd.DataFrame(rows).to_csv(out / "event_summary.csv", index=False)
    table = eval_mod.format_event_table(rows)
    header = (f"ch-price<{'=' if args.inclusive else ''}0 events, percent; "
              f"seed {cfg.seed}, horizon {cfg.horizon_days} days, {cfg.n_paths} paths")
    (out / "event_summary.txt").write_text(header + "\n" + table + "\n")
    (out / "forecast_meta.json").write_text(json.dumps(stamp, indent=2, sort_keys=True))
    _log(header)
    _log(table)
    return 0


def _read_observed(path, origin: dt.date, horizon: int):
    """Observed prices split into the forecast window panel and pre-origin history."""
    frame = data_mod.read_price_csv(path)
    day = np.array([(dt.date.fromisoformat(s) - origin).days for s in frame["date"]])
    hour = frame["hour"].to_numpy()
    price = frame["price"].to_numpy(dtype=np.float64)
    inside = (day >= 0) & (day < horizon)
    panel = np.full((horizon, 24), np.nan)
    panel[day[inside], hour[inside]] = price[inside]
    days_covered = int(np.flatnonzero(~np.isnan(panel).any(axis=1)).size)
    if days_covered == 0:
        raise DataError(f"{path}: no overlap with the forecast window")
    # truncate at the first incomplete day
    complete = ~np.isnan(panel).any(axis=1)
    n_full = int(np.argmax(~complete)) if not complete.all() else horizon
    if n_full == 0:
        raise DataError(f"{path}: forecast-window coverage starts with gaps")
    before = day < 0
    history = None
    if before.any():
        order = np.lexsort((hour[before], day[before]))
        history = price[before][order]
    return panel[:n_full], history


def cmd_evaluate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fdir = Path(args.forecast)
    meta = json.loads((fdir / "forecast_meta.json").read_text())
    origin = dt.date.fromisoformat(meta["origin"])
    horizon = int(meta["horizon_days"])

    observed_panel, history = _read_observed(args.observed, origin, horizon)
    n_days = observed_panel.shape[0]

    qf = pd.read_csv(fdir / "quantiles.csv")
    quantiles = np.empty((99, horizon, 24))
    for qi in range(99):
        sel = qf[qf["quantile"] == qi + 1]
        quantiles[qi] = sel["price"].to_numpy().reshape(horizon, 24)
    cov = eval_mod.coverage(quantiles[:, :n_days], observed_panel)
    pd.DataFrame({
        "cell": np.arange(100), "count": cov.counts, "ratio": cov.ratios,
    }).to_csv(out / "coverage.csv", index=False)

    ef = pd.read_csv(fdir / "events.csv")
    sel = ef[ef["c"] == args.run_length]
    if not len(sel):
        raise DataError(f"events.csv has no run length c={args.run_length}")
    probs = sel["probability"].to_numpy().reshape(horizon, 24)[:n_days]
    realized = eval_mod.detect_runs(
        observed_panel.reshape(-1), args.run_length, history=history,
        inclusive=args.inclusive,
    ).reshape(-1, 24)
    report = eval_mod.EventReport(
        c=args.run_length, probabilities=probs,
        realized=realized.astype(np.float64), inclusive=args.inclusive,
    )
    rel = eval_mod.reliability(report)
    pd.DataFrame({
        "bin_lo": rel.bin_edges[:-1], "bin_hi": rel.bin_edges[1:],
        "count": rel.counts, "mean_forecast": rel.mean_forecast,
        "observed_freq": rel.observed_freq,
    }).to_csv(out / "reliability.csv", index=False)
    summary = {
        "slope": rel.slope, "intercept": rel.intercept, "r_squared": rel.r_squared,
        "run_length": args.run_length, "n_days_evaluated": n_days,
        "coverage_obs": cov.n_obs, "version": __version__,
    }
    (out / "evaluate_meta.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    _log(f"reliability slope {rel.slope:.3f}, intercept {rel.intercept:.3f}, "
         f"R^2 {rel.r_squared:.3f} over {n_days} days")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="damsim",
        description="Probabilistic long-horizon day-ahead electricity market simulator",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic market dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--days", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--group-target", type=float, default=1000.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="fit all models from a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    for name, fn in (("simulate", cmd_simulate), ("forecast", cmd_forecast)):
        p = sub.add_parser(name, help=f"{name} from saved artifacts")
        p.add_argument("--artifacts", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--paths", type=int, default=1000)
        p.add_argument("--horizon-days", type=int, default=30)
        p.add_argument("--growth-wind", type=float, default=3.25)
        p.add_argument("--growth-solar", type=float, default=3.0)
        p.add_argument("--failure-policy", choices=["drop", "median"], default="drop")
        p.add_argument("--parallel", action="store_true")
        if name == "forecast":
            p.add_argument("--run-length", type=int, default=6)
            p.add_argument("--observed", default=None)
            p.add_argument("--inclusive", action="store_true",
                           help="count price == 0 as negative")
        p.set_defaults(func=fn)

    p = sub.add_parser("evaluate", help="reliability and coverage against observed prices")
    p.add_argument("--forecast", required=True, help="directory written by forecast")
    p.add_argument("--observed", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--run-length", type=int, default=1)
    p.add_argument("--inclusive", action="store_true")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        _log(f"data error: {exc}")
        return EXIT_DATA
    except ModelError as exc:
        _log(f"model error: {exc}")
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
