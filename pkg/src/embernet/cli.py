"""Command-line pipeline orchestration.

Subcommands: ingest, slices, metrics, communities, powerlaw, transition,
synth, report. ``--config`` loads defaults from a JSON or TOML file; explicit
flags win. Exit codes: 0 success, 1 I/O failure, 2 argument error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import community as comm_mod
from . import metrics, powerlaw, report, slicing, synth, transition
from .ingest import (Kind, build_underlying_graph, deduplicate, filter_window,
                     load_osf_interactions, parse_contacts, parse_iso_utc,
                     read_events_binary, write_csv, write_events_binary,
                     write_jsonl)

EXIT_OK = 0
EXIT_IO = 1
EXIT_ARGS = 2


def _load_config_file(path: str) -> dict:
    p = Path(path)
    data = p.read_bytes()
    if p.suffix.lower() == ".toml":
        import tomllib

        return tomllib.loads(data.decode("utf-8"))
    return json.loads(data)


def _parse_when(value) -> int:
    if value is None:
        return None
    try:
        return int(value)
    except (TypeError, ValueError):
        return parse_iso_utc(value)


def _load_events(args) -> tuple:
    """Load canonical events plus the analysis window from CLI args."""
    path = args.events
    t0 = _parse_when(getattr(args, "t_from", None))
    horizon = _parse_when(getattr(args, "t_to", None))
    fmt = getattr(args, "format", "auto")
    if fmt == "auto":
        with open(path, "rb") as fh:
            magic = fh.read(8)
        if magic == b"EMBREVT1":
            fmt = "bin"
        elif str(path).endswith((".jsonl", ".jsonl.gz", ".ndjson")):
            fmt = "jsonl"
        else:
            fmt = "csv"
    if fmt == "bin":
        events, file_t0, file_hz = read_events_binary(path)
        t0 = file_t0 if t0 is None else t0
        horizon = file_hz if horizon is None else horizon
    else:
        if fmt == "osf":
            events, _ = load_osf_interactions(path, _column_map(args))
        else:
            events, _ = parse_contacts(path, fmt)
        events = deduplicate(events)
    if t0 is not None and horizon is not None:
        events = filter_window(events, t0, horizon)
    g = build_underlying_graph(events, t0, horizon)
    return g


def _column_map(args) -> dict:
    cmap = {}
    for canonical in ("source", "target", "timestamp", "kind", "status_id"):
        val = getattr(args, f"col_{canonical}", None)
        if val:
            cmap[canonical] = val
    return cmap


def _add_events_args(p: argparse.ArgumentParser, required: bool = True):
    p.add_argument("--events", required=required, help="event file (csv/jsonl/bin)")
    p.add_argument("--format", default="auto",
                   choices=["auto", "csv", "jsonl", "osf", "bin"])
    p.add_argument("--from", dest="t_from", default=None,
                   help="window start (ISO-8601 or epoch seconds)")
    p.add_argument("--to", dest="t_to", default=None,
                   help="window end (ISO-8601 or epoch seconds)")


def _spec_from_args(args, g) -> slicing.SliceSpec:
    return slicing.SliceSpec(args.mode, args.delta, g.t0, g.horizon)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    if args.format == "osf":
        events, stats = load_osf_interactions(args.infile, _column_map(args))
    else:
        fmt = args.format
        if fmt == "auto":
            fmt = "jsonl" if str(args.infile).endswith(
                (".jsonl", ".jsonl.gz", ".ndjson")) else "csv"
        events, stats = parse_contacts(args.infile, fmt)
    n_raw = len(events)
    events = deduplicate(events)
    duplicates = n_raw - len(events)
    t0 = _parse_when(args.t_from)
    horizon = _parse_when(args.t_to)
    if t0 is not None and horizon is not None:
        events = filter_window(events, t0, horizon)
    g = build_underlying_graph(events, t0, horizon)
    out = args.out
    if out.endswith(".csv"):
        write_csv(g.table, out)
    elif out.endswith((".jsonl", ".ndjson")):
        write_jsonl(g.table, out)
    else:
        write_events_binary(out, g.table, g.t0, g.horizon)
    summary = stats.to_dict() | {
        "duplicates_removed": duplicates,
        "events_written": g.n_events,
        "n_users": g.n_vertices,
        "t0": g.t0,
        "horizon": g.horizon,
        "out": str(out),
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_slices(args) -> int:
    g = _load_events(args)
    spec = _spec_from_args(args, g)
    slices = slicing.slices_for(g, spec)
    rows = slicing.slice_summaries(slices)
    import csv as _csv

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = _csv.writer(fh)
        w.writerow(["index", "t_start", "t_end", "n_events",
                    "n_active_vertices", "n_simple_edges"])
        for r in rows:
            w.writerow([r["index"], r["t_start"], r["t_end"], r["n_events"],
                        r["n_active_vertices"], r["n_simple_edges"]])
    print(json.dumps({"slices": spec.n_slices, "out": args.out}))
    return EXIT_OK


def cmd_metrics(args) -> int:
    g = _load_events(args)
    spec = _spec_from_args(args, g)
    slices = slicing.slices_for(g, spec)
    contacts, users = metrics.contact_user_series(slices)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    report._write_csv(outdir / "series.csv",
                      ["slice", "contacts", "users"],
                      zip(contacts.index, contacts.values.astype(np.int64),
                          users.values.astype(np.int64)))
    percents = [float(p) for p in args.percents.split(",")] if args.percents else []
    if percents:
        def rows():
            for s, view in zip(slices, slicing.iter_views(slices)):
                if view.n_events == 0:
                    continue
                shares = metrics.top_active_fraction(view, percents, users=g.users)
                for p in percents:
                    yield (s.index, p, shares[p])

        report._write_csv(outdir / "topk.csv", ["slice", "percent", "share"],
                          rows())
    hist = metrics.degree_distribution(g.view(), args.degree_mode)
    report._write_csv(outdir / "degree_hist.csv", ["degree", "count"],
                      sorted(hist.items()))
    print(json.dumps({"out": str(outdir), "slices": len(slices)}))
    return EXIT_OK


def cmd_communities(args) -> int:
    g = _load_events(args)
    spec = _spec_from_args(args, g)
    slices = slicing.slices_for(g, spec)
    parts = comm_mod.partition_slices(slices, resolution=args.resolution,
                                      seed=args.seed, objective=args.objective,
                                      weighted=args.weighted,
                                      threads=args.threads)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    report._write_csv(outdir / "communities.csv",
                      ["slice", "community_id", "size"],
                      ((p.slice_index, cid, int(sz))
                       for p in parts for cid, sz in enumerate(p.sizes)))
    report._write_csv(outdir / "cluster_hist.csv", ["size", "mean_count"],
                      sorted(comm_mod.cluster_size_distribution(parts).items()))
    largest = comm_mod.largest_cluster_series(parts)
    decile = comm_mod.top_decile_cluster_fraction(parts, args.top_decile_mode)
    if spec.mode == slicing.ACCUMULATIVE:
        tracks = comm_mod.track_largest_cluster(parts, spec)
        report._write_csv(
            outdir / "largest.csv",
            ["slice", "rel_size", "top_decile_frac", "jaccard_prev"],
            ((int(i), float(r), float(d), t.jaccard_prev)
             for i, r, d, t in zip(largest.index, largest.values,
                                   decile.values, tracks)))
    else:
        report._write_csv(outdir / "largest.csv",
                          ["slice", "rel_size", "top_decile_frac"],
                          ((int(i), float(r), float(d)) for i, r, d in
                           zip(largest.index, largest.values, decile.values)))
    print(json.dumps({"out": str(outdir), "slices": len(parts)}))
    return EXIT_OK


def cmd_powerlaw(args) -> int:
    g = _load_events(args)
    if args.what in ("degree_contacts", "degree_unique"):
        mode = (metrics.CONTACTS if args.what == "degree_contacts"
                else metrics.UNIQUE_NEIGHBORS)
        hist = metrics.degree_distribution(g.view(), mode)
        samples = np.repeat(list(hist.keys()), list(hist.values()))
    else:
        spec = _spec_from_args(args, g)
        slices = slicing.slices_for(g, spec)
        parts = comm_mod.partition_slices(slices, seed=args.seed,
                                          threads=args.threads)
        samples = np.concatenate([p.sizes for p in parts])
    fit = powerlaw.fit_power_law(samples)
    entry = fit.to_dict() | {"seed": args.seed}
    if args.gof > 0:
        entry["p_value"] = powerlaw.goodness_of_fit(fit, samples, args.gof,
                                                    seed=args.seed)
        entry["n_resamples"] = args.gof
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(entry, fh, sort_keys=True, indent=1)
        fh.write("\n")
    print(json.dumps(entry, sort_keys=True))
    return EXIT_OK


def cmd_transition(args) -> int:
    g = _load_events(args)
    spec = _spec_from_args(args, g)
    slices = slicing.slices_for(g, spec)
    contacts, users = metrics.contact_user_series(slices)
    series = contacts if args.series == "contacts" else users
    cfg = transition.TransitionConfig(args.baseline_window, args.ramp_factor,
                                      args.sustain, args.decay)
    pcfg = transition.PrecursorConfig(args.spike_z, args.local_window)
    rep = transition.detect_transition(series, cfg, pcfg)
    payload = {
        "report": rep.to_dict(),
        "windows": {k: list(v)
                    for k, v in transition.phase_windows(rep, spec).items()},
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    print(json.dumps(payload["report"], sort_keys=True))
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.config_json:
        cfg = synth.SynthConfig.from_dict(json.loads(Path(args.config_json).read_text()))
    else:
        communities = []
        if args.communities:
            for part in args.communities.split(","):
                bits = part.split(":")
                size = int(bits[0])
                mt = float(bits[1]) if len(bits) > 1 else math.inf
                communities.append(synth.CommunitySpec(size, mt))
        cfg = synth.SynthConfig(
            n_users=args.users,
            duration=args.duration,
            ramp=synth.RampConfig(args.ramp_center, args.ramp_floor,
                                  args.ramp_ceiling, args.ramp_width),
            pa_strength=args.pa,
            base_rate=args.rate,
            communities=communities,
            seed=args.seed,
            n_events=args.n_events,
            t_start=_parse_when(args.start) or 0,
        )
    events, ledger = synth.generate(cfg)
    if args.out.endswith(".csv"):
        write_csv(events, args.out)
    elif args.out.endswith((".jsonl", ".ndjson")):
        write_jsonl(events, args.out)
    else:
        write_events_binary(args.out, events, cfg.t_start,
                            cfg.t_start + cfg.duration)
    if args.ledger:
        ledger.to_json(args.ledger)
    print(json.dumps({"n_events": ledger.n_events, "out": args.out,
                      "ledger": args.ledger}))
    return EXIT_OK


def cmd_report(args) -> int:
    g = _load_events(args)
    tcfg = transition.TransitionConfig(args.baseline_window, args.ramp_factor,
                                       args.sustain, args.decay)
    pcfg = transition.PrecursorConfig(args.spike_z, args.local_window)
    cfg = report.RunConfig(
        t0=g.t0, horizon=g.horizon,
        temporal_delta=args.temporal_delta,
        accumulative_delta=args.accumulative_delta,
        resolution=args.resolution, objective=args.objective,
        seed=args.seed, weighted=args.weighted,
        percents=tuple(float(p) for p in args.percents.split(",")),
        top_decile_mode=args.top_decile_mode,
        transition_cfg=tcfg, precursor_cfg=pcfg,
        transition_series=args.series,
        gof_resamples=args.gof, threads=args.threads)
    manifest = report.run_report(g, args.out, cfg)
    print(json.dumps({"out": str(args.out), "complete": manifest["complete"],
                      "config_hash": manifest["config_hash"],
                      "tables": len(manifest["outputs"])}))
    return EXIT_OK if manifest["complete"] else EXIT_IO


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="embernet",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=None,
                    help="JSON/TOML file with default argument values")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, dedup, window, and cache events")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", default="auto",
                   choices=["auto", "csv", "jsonl", "osf"])
    p.add_argument("--from", dest="t_from", default=None)
    p.add_argument("--to", dest="t_to", default=None)
    for c in ("source", "target", "timestamp", "kind", "status-id"):
        p.add_argument(f"--col-{c}", dest=f"col_{c.replace('-', '_')}",
                       default=None, help=f"override the {c} column name")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("slices", help="export per-slice summaries")
    _add_events_args(p)
    p.add_argument("--mode", default=slicing.TEMPORAL,
                   choices=[slicing.TEMPORAL, slicing.ACCUMULATIVE])
    p.add_argument("--delta", type=int, default=4 * 3600)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_slices)

    p = sub.add_parser("metrics", help="series, top-k shares, degree histogram")
    _add_events_args(p)
    p.add_argument("--mode", default=slicing.TEMPORAL,
                   choices=[slicing.TEMPORAL, slicing.ACCUMULATIVE])
    p.add_argument("--delta", type=int, default=4 * 3600)
    p.add_argument("--percents", default="0.02,0.05,0.1,0.2")
    p.add_argument("--degree-mode", dest="degree_mode", default=metrics.CONTACTS,
                   choices=[metrics.CONTACTS, metrics.UNIQUE_NEIGHBORS])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("communities", help="per-slice community detection")
    _add_events_args(p)
    p.add_argument("--mode", default=slicing.ACCUMULATIVE,
                   choices=[slicing.TEMPORAL, slicing.ACCUMULATIVE])
    p.add_argument("--delta", type=int, default=24 * 3600)
    p.add_argument("--resolution", type=float, default=1.0)
    p.add_argument("--objective", default=comm_mod.MODULARITY,
                   choices=[comm_mod.MODULARITY, comm_mod.CPM])
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--top-decile-mode", dest="top_decile_mode", default="count",
                   choices=["count", "size_percentile"])
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_communities)

    p = sub.add_parser("powerlaw", help="fit a discrete power law")
    _add_events_args(p)
    p.add_argument("--what", default="degree_contacts",
                   choices=["degree_contacts", "degree_unique", "cluster_sizes"])
    p.add_argument("--mode", default=slicing.ACCUMULATIVE,
                   choices=[slicing.TEMPORAL, slicing.ACCUMULATIVE])
    p.add_argument("--delta", type=int, default=24 * 3600)
    p.add_argument("--gof", type=int, default=0,
                   help="bootstrap resamples for the p-value (0 = skip)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_powerlaw)

    p = sub.add_parser("transition", help="detect the phase transition")
    _add_events_args(p)
    p.add_argument("--mode", default=slicing.TEMPORAL,
                   choices=[slicing.TEMPORAL, slicing.ACCUMULATIVE])
    p.add_argument("--delta", type=int, default=4 * 3600)
    p.add_argument("--series", default="contacts", choices=["contacts", "users"])
    p.add_argument("--baseline-window", dest="baseline_window", type=int, default=42)
    p.add_argument("--ramp-factor", dest="ramp_factor", type=float, default=3.0)
    p.add_argument("--sustain", type=int, default=6)
    p.add_argument("--decay", type=float, default=0.02)
    p.add_argument("--spike-z", dest="spike_z", type=float, default=4.0)
    p.add_argument("--local-window", dest="local_window", type=int, default=21)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transition)

    p = sub.add_parser("synth", help="generate a synthetic contact stream")
    p.add_argument("--out", required=True)
    p.add_argument("--ledger", default=None)
    p.add_argument("--config-json", dest="config_json", default=None,
                   help="full SynthConfig as JSON (overrides other flags)")
    p.add_argument("--users", type=int, default=1000)
    p.add_argument("--duration", type=int, default=100 * 86400)
    p.add_argument("--n-events", dest="n_events", type=int, default=None)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--pa", type=float, default=1.0)
    p.add_argument("--ramp-center", dest="ramp_center", type=float,
                   default=60 * 86400)
    p.add_argument("--ramp-floor", dest="ramp_floor", type=float, default=1.0)
    p.add_argument("--ramp-ceiling", dest="ramp_ceiling", type=float,
                   default=100.0)
    p.add_argument("--ramp-width", dest="ramp_width", type=float,
                   default=5 * 86400)
    p.add_argument("--communities", default=None,
                   help="comma list of size[:merge_time_seconds]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", default=None,
                   help="absolute start time (ISO or epoch); default 0")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="write every figure-grade table")
    _add_events_args(p)
    p.add_argument("--out", default=os.environ.get("EMBERNET_OUTDIR", "report_out"))
    p.add_argument("--temporal-delta", dest="temporal_delta", type=int,
                   default=4 * 3600)
    p.add_argument("--accumulative-delta", dest="accumulative_delta", type=int,
                   default=24 * 3600)
    p.add_argument("--resolution", type=float, default=1.0)
    p.add_argument("--objective", default=comm_mod.MODULARITY,
                   choices=[comm_mod.MODULARITY, comm_mod.CPM])
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--percents", default="0.02,0.05,0.1,0.2")
    p.add_argument("--top-decile-mode", dest="top_decile_mode", default="count",
                   choices=["count", "size_percentile"])
    p.add_argument("--series", default="contacts", choices=["contacts", "users"])
    p.add_argument("--baseline-window", dest="baseline_window", type=int, default=42)
    p.add_argument("--ramp-factor", dest="ramp_factor", type=float, default=3.0)
    p.add_argument("--sustain", type=int, default=6)
    p.add_argument("--decay", type=float, default=0.02)
    p.add_argument("--spike-z", dest="spike_z", type=float, default=4.0)
    p.add_argument("--local-window", dest="local_window", type=int, default=21)
    p.add_argument("--gof", type=int, default=100)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_report)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    # --config may appear before the subcommand; peel it off first
    argv = list(sys.argv[1:] if argv is None else argv)
    ns, _ = ap.parse_known_args(argv)
    if ns.config:
        defaults = _load_config_file(ns.config)
        section = defaults.get(ns.command, defaults)
        for sub_action in ap._subparsers._group_actions:  # noqa: SLF001
            if ns.command in getattr(sub_action, "choices", {}):
                sub_action.choices[ns.command].set_defaults(
                    **{k.replace("-", "_"): v for k, v in section.items()})
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError, OSError) as exc:
        print(f"embernet: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"embernet: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
