"""Versioned on-disk form of a fitted system: one JSON file plus one npz.

Scalars, names and sparse term lists live in system.json (keys sorted, so
re-estimation on identical inputs reproduces identical bytes); dense arrays
(residual archives, state tails, group profiles, coefficient stacks) live in
arrays.npz.
"""

import datetime as dt
import json
from pathlib import Path

import numpy as np

from . import curves as curves_mod
from . import expectations as exp_mod
from . import physical as phys_mod
from . import timebase
from .errors import DataError
from .simulate import FittedSystem

FORMAT_VERSION = 1


def graph_to_payload(graph: phys_mod.ProcessGraph) -> dict:
    return {
        "processes": [
            [p.name, p.klass, bool(p.nonnegative), p.capacity_source]
            for p in graph.processes
        ],
        "edges": sorted([i, j, kind] for (i, j), kind in graph.edges.items()),
    }


def graph_from_payload(payload: dict) -> phys_mod.ProcessGraph:
    procs = [
        phys_mod.ProcessSpec(name, klass, nonnegative=nn, capacity_source=cap)
        for name, klass, nn, cap in payload["processes"]
    ]
    edges = {(i, j): kind for i, j, kind in payload["edges"]}
    return phys_mod.ProcessGraph(processes=procs, edges=edges)


def calendar_to_payload(cal: timebase.HolidayCalendar) -> dict:
    return {
        "fixed": [[m, d, name] for m, d, name in cal.fixed],
        "varying": [[date.isoformat(), name] for date, name in cal.varying],
    }


def calendar_from_payload(payload: dict) -> timebase.HolidayCalendar:
    return timebase.HolidayCalendar(
        fixed=tuple((m, d, name) for m, d, name in payload["fixed"]),
        varying=tuple((dt.date.fromisoformat(s), name) for s, name in payload["varying"]),
    )


def _expectation_payload(model: exp_mod.ExpectationModel, arrays: dict, tag: str) -> dict:
    n_t, n_h = len(model.targets), model.n_hours
    wd = np.zeros((n_t, n_h, 7))
    eqs = {}
    for ti, tname in enumerate(model.targets):
        for h in range(n_h):
            eq = model.equations[(tname, h)]
            wd[ti, h] = eq.wd_coefs
            eqs[f"{tname}|{h}"] = {
                "intercept": eq.intercept,
                "lam": eq.lam,
                "bic": eq.bic,
                "terms": [[k, s, l, g, c] for k, s, l, g, c in eq.terms],
            }
    arrays[f"{tag}_wd"] = wd
    arrays[f"{tag}_archive"] = model.residual_archive
    return {
        "kind": model.kind,
        "targets": list(model.targets),
        "causal_sources": list(model.causal_sources),
        "n_hours": model.n_hours,
        "clamp_negative": model.clamp_negative,
        "archive_day0": model.archive_day0,
        "origin": model.origin.isoformat(),
        "equations": eqs,
    }


def _expectation_from_payload(payload: dict, arrays, tag: str) -> exp_mod.ExpectationModel:
    wd = arrays[f"{tag}_wd"]
    equations = {}
    for ti, tname in enumerate(payload["targets"]):
        for h in range(payload["n_hours"]):
            raw = payload["equations"][f"{tname}|{h}"]
            equations[(tname, h)] = exp_mod.DayHourEquation(
                target=tname, hour=h, intercept=raw["intercept"],
                wd_coefs=wd[ti, h].copy(),
                terms=[(k, s, l, g, c) for k, s, l, g, c in raw["terms"]],
                lam=raw["lam"], bic=raw["bic"],
            )
    return exp_mod.ExpectationModel(
        kind=payload["kind"], targets=list(payload["targets"]),
        causal_sources=list(payload["causal_sources"]), equations=equations,
        residual_archive=arrays[f"{tag}_archive"].copy(),
        archive_day0=payload["archive_day0"],
        origin=dt.date.fromisoformat(payload["origin"]),
        n_hours=payload["n_hours"], clamp_negative=payload["clamp_negative"],
    )


def save_system(system: FittedSystem, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arrays = {}

    phys = system.physical
    phys_eqs = {}
    for name, eq in phys.equations.items():
        phys_eqs[name] = {
            "intercept": eq.intercept,
            "lam": eq.lam,
            "bic": eq.bic,
            "dummy_names": eq.dummy_names,
            "lag_terms": [[p, k, c] for p, k, c in eq.lag_terms],
        }
        arrays[f"phys_dc_{name}"] = eq.dummy_coefs
    arrays["phys_archive"] = phys.residual_archive
    arrays["phys_tail"] = system.phys_tail
    arrays["y_tail"] = system.y_tail
    arrays["z_tail"] = system.z_tail
    arrays["b_tail"] = system.b_tail
    arrays["sup_prof"] = system.profiles["supply"].cum
    arrays["dem_prof"] = system.profiles["demand"].cum
    for side in ("supply", "demand"):
        arrays[f"{side}_starts"] = system.schemes[side].starts
        arrays[f"{side}_ends"] = system.schemes[side].ends

    capacity = {
        source: [[d.isoformat(), float(v)] for d, v in zip(dates, values)]
        for source, (dates, values) in system.capacity.knots.items()
    }
    payload = {
        "format_version": FORMAT_VERSION,
        "graph": graph_to_payload(phys.graph),
        "calendar": calendar_to_payload(phys.calendar),
        "origin": system.origin.isoformat(),
        "n_days": system.n_days,
        "planned_sources": system.planned_sources,
        "physical": {
            "origin": phys.origin.isoformat(),
            "n_days": phys.n_days,
            "archive_day0": phys.archive_day0,
            "equations": phys_eqs,
        },
        "planned": _expectation_payload(system.planned, arrays, "planned"),
        "bids": _expectation_payload(system.bids, arrays, "bids"),
        "schemes": {
            side: {"target": system.schemes[side].target} for side in ("supply", "demand")
        },
        "capacity": capacity,
    }
    (out / "system.json").write_text(json.dumps(payload, indent=1, sort_keys=True))
    np.savez(out / "arrays.npz", **{k: arrays[k] for k in sorted(arrays)})
    return out / "system.json"


def load_system(art_dir) -> FittedSystem:
    art = Path(art_dir)
    try:
        payload = json.loads((art / "system.json").read_text())
        arrays = np.load(art / "arrays.npz")
    except OSError as exc:
        raise DataError(f"cannot read artifacts in {art}: {exc}") from exc
    if payload.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported artifact version {payload.get('format_version')}")

    graph = graph_from_payload(payload["graph"])
    cal = calendar_from_payload(payload["calendar"])
    raw_phys = payload["physical"]
    equations = {}
    for name, raw in raw_phys["equations"].items():
        equations[name] = phys_mod.FittedEquation(
            name=name, intercept=raw["intercept"], dummy_names=list(raw["dummy_names"]),
            dummy_coefs=arrays[f"phys_dc_{name}"].copy(),
            lag_terms=[(p, k, c) for p, k, c in raw["lag_terms"]],
            lam=raw["lam"], bic=raw["bic"],
        )
    physical = phys_mod.PhysicalModel(
        graph=graph, calendar=cal,
        origin=dt.datetime.fromisoformat(raw_phys["origin"]),
        n_days=raw_phys["n_days"], equations=equations,
        residual_archive=arrays["phys_archive"].copy(),
        archive_day0=raw_phys["archive_day0"],
    )
    schemes, profiles = {}, {}
    for side, tag in (("supply", "sup_prof"), ("demand", "dem_prof")):
        schemes[side] = curves_mod.GroupScheme(
            side=side, starts=arrays[f"{side}_starts"].copy(),
            ends=arrays[f"{side}_ends"].copy(),
            target=payload["schemes"][side]["target"],
        )
        profiles[side] = curves_mod.GroupProfiles(side=side, cum=arrays[tag].copy())
    capacity = phys_mod.CapacitySchedule(knots={
        source: ([dt.date.fromisoformat(d) for d, _ in rows],
                 np.array([v for _, v in rows]))
        for source, rows in payload["capacity"].items()
    })
    return FittedSystem(
        physical=physical,
        planned=_expectation_from_payload(payload["planned"], arrays, "planned"),
        bids=_expectation_from_payload(payload["bids"], arrays, "bids"),
        schemes=schemes, profiles=profiles, capacity=capacity,
        origin=dt.date.fromisoformat(payload["origin"]), n_days=payload["n_days"],
        planned_sources=dict(payload["planned_sources"]),
        phys_tail=arrays["phys_tail"].copy(), y_tail=arrays["y_tail"].copy(),
        z_tail=arrays["z_tail"].copy(), b_tail=arrays["b_tail"].copy(),
    )
