"""One-shot report: every figure-grade data table from a canonical event file.

Given the underlying graph and two slice specs (temporal and accumulative),
emits contact/user series, degree and cluster-size histograms, ANND curves per
phase, largest-cluster evolution, top-active-user contact shares, transition
reports, and power-law fits, plus a manifest keyed by a config hash. Reruns
with identical input and config produce byte-identical directories.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import community as comm_mod
from . import metrics, powerlaw, slicing, transition
from .ingest import TemporalGraph, parse_iso_utc

PAPER_T0 = parse_iso_utc("2020-02-01")
PAPER_HORIZON = parse_iso_utc("2020-05-11")
DEFAULT_PERCENTS = (0.02, 0.05, 0.10, 0.20)


@dataclass
class RunConfig:
    t0: int = PAPER_T0
    horizon: int = PAPER_HORIZON
    temporal_delta: int = 4 * 3600
    accumulative_delta: int = 24 * 3600
    resolution: float = 1.0
    objective: str = comm_mod.MODULARITY
    seed: int = 42
    weighted: bool = False
    percents: tuple = DEFAULT_PERCENTS
    top_decile_mode: str = "count"
    transition_cfg: transition.TransitionConfig = field(
        default_factory=transition.TransitionConfig)
    precursor_cfg: transition.PrecursorConfig = field(
        default_factory=transition.PrecursorConfig)
    transition_series: str = "contacts"
    gof_resamples: int = 100
    threads: int = 1

    def semantic_dict(self) -> dict:
        """Fields that affect outputs; the basis for the config hash."""
        return {
            "t0": self.t0,
            "horizon": self.horizon,
            "temporal_delta": self.temporal_delta,
            "accumulative_delta": self.accumulative_delta,
            "resolution": self.resolution,
            "objective": self.objective,
            "seed": self.seed,
            "weighted": self.weighted,
            "percents": list(self.percents),
            "top_decile_mode": self.top_decile_mode,
            "transition": self.transition_cfg.to_dict(),
            "precursors": self.precursor_cfg.to_dict(),
            "transition_series": self.transition_series,
            "gof_resamples": self.gof_resamples,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _write_csv(path: Path, header: list[str], rows) -> int:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        n = 0
        for row in rows:
            w.writerow([_fmt(x) for x in row])
            n += 1
    return n


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_report(g: TemporalGraph, out_dir, cfg: RunConfig) -> dict:
    """Write all tables; returns the manifest dict (also written to disk)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, int] = {}
    failures: dict[str, str] = {}

    spec_t = slicing.SliceSpec(slicing.TEMPORAL, cfg.temporal_delta,
                               cfg.t0, cfg.horizon)
    spec_a = slicing.SliceSpec(slicing.ACCUMULATIVE, cfg.accumulative_delta,
                               cfg.t0, cfg.horizon)
    slices_t = slicing.slices_for(g, spec_t)
    slices_a = slicing.slices_for(g, spec_a)

    def table(name: str, fn):
        try:
            outputs[name] = fn()
        except Exception as exc:  # noqa: BLE001 - recorded in the manifest
            failures[name] = f"{type(exc).__name__}: {exc}"

    # --- global degree distributions (fig 3 left) ---
    gview = g.view()
    hists = {}
    for mode in (metrics.CONTACTS, metrics.UNIQUE_NEIGHBORS):
        short = "contacts" if mode == metrics.CONTACTS else "unique"
        hist = metrics.degree_distribution(gview, mode)
        hists[mode] = hist
        table(f"fig3_degree_hist_{short}.csv", lambda h=hist, s=short: _write_csv(
            out / f"fig3_degree_hist_{s}.csv", ["degree", "count"],
            sorted(h.items())))
        table(f"fig3_degree_hist_{short}_logbin.csv",
              lambda h=hist, s=short: _write_csv(
                  out / f"fig3_degree_hist_{s}_logbin.csv",
                  ["bin_lo", "bin_hi", "mean_count"],
                  metrics.log_binned_histogram(h)))

    # --- series (fig 4) and top-k shares (fig 7) ---
    series = {}
    for label, slices in (("temporal", slices_t), ("accumulative", slices_a)):
        contacts, users = metrics.contact_user_series(slices)
        series[label] = {"contacts": contacts, "users": users}
        table(f"fig4_series_{label}.csv", lambda sl=slices, c=contacts, u=users,
              la=label: _write_csv(
                  out / f"fig4_series_{la}.csv",
                  ["slice", "t_start", "t_end", "contacts", "users"],
                  ((s.index, s.t_start, s.t_end, int(cv), int(uv))
                   for s, cv, uv in zip(sl, c.values, u.values))))

        def topk_rows(sl=slices):
            for s, view in zip(sl, slicing.iter_views(sl)):
                if view.n_events == 0:
                    continue
                shares = metrics.top_active_fraction(view, cfg.percents,
                                                     users=g.users)
                for p in cfg.percents:
                    yield (s.index, p, shares[p])

        table(f"fig7_topk_{label}.csv", lambda rows=topk_rows, la=label:
              _write_csv(out / f"fig7_topk_{la}.csv",
                         ["slice", "percent", "share"], rows()))

    # --- communities (fig 3 middle/right, fig 6) ---
    partitions = {}
    for label, slices in (("temporal", slices_t), ("accumulative", slices_a)):
        parts = comm_mod.partition_slices(
            slices, resolution=cfg.resolution, seed=cfg.seed,
            objective=cfg.objective, weighted=cfg.weighted, threads=cfg.threads)
        partitions[label] = parts
        table(f"fig3_cluster_hist_{label}.csv", lambda p=parts, la=label:
              _write_csv(out / f"fig3_cluster_hist_{la}.csv",
                         ["size", "mean_count"],
                         sorted(comm_mod.cluster_size_distribution(p).items())))
        table(f"communities_{label}.csv", lambda p=parts, la=label: _write_csv(
            out / f"communities_{la}.csv", ["slice", "community_id", "size"],
            ((part.slice_index, cid, int(sz))
             for part in p for cid, sz in enumerate(part.sizes))))

    largest_a = comm_mod.largest_cluster_series(partitions["accumulative"])
    decile_a = comm_mod.top_decile_cluster_fraction(partitions["accumulative"],
                                                    cfg.top_decile_mode)
    tracks = comm_mod.track_largest_cluster(partitions["accumulative"], spec_a)
    table("fig6_clusters_accumulative.csv", lambda: _write_csv(
        out / "fig6_clusters_accumulative.csv",
        ["slice", "rel_largest", "top_decile_frac", "jaccard_prev", "changed"],
        ((int(i), float(r), float(d), t.jaccard_prev, int(t.changed))
         for i, r, d, t in zip(largest_a.index, largest_a.values,
                               decile_a.values, tracks))))

    largest_t = comm_mod.largest_cluster_series(partitions["temporal"])
    decile_t = comm_mod.top_decile_cluster_fraction(partitions["temporal"],
                                                    cfg.top_decile_mode)
    table("fig6_clusters_temporal.csv", lambda: _write_csv(
        out / "fig6_clusters_temporal.csv",
        ["slice", "rel_largest", "top_decile_frac"],
        ((int(i), float(r), float(d))
         for i, r, d in zip(largest_t.index, largest_t.values, decile_t.values))))

    # --- transition detection (fig 4 annotations) and ANND by phase (fig 5) ---
    # a series too short for the configured windows is recorded, not fatal
    reports = {}
    report_objs = {}
    for label, spec in (("temporal", spec_t), ("accumulative", spec_a)):
        s = series[label][cfg.transition_series]
        try:
            rep = transition.detect_transition(s, cfg.transition_cfg,
                                               cfg.precursor_cfg)
        except ValueError as exc:
            reports[label] = {"error": str(exc)}
            continue
        report_objs[label] = rep
        reports[label] = {
            "report": rep.to_dict(),
            "windows": {k: list(v) for k, v in
                        transition.phase_windows(rep, spec).items()},
        }
    table("transition.json", lambda: _write_json(
        out / "transition.json", reports))

    if "temporal" in report_objs:
        curves = transition.annd_by_phase(g, report_objs["temporal"], spec_t)
        for phase in transition.PHASES:
            if phase not in curves:
                continue
            curve = curves[phase]
            table(f"fig5_annd_{phase}.csv", lambda c=curve, ph=phase:
                  _write_csv(out / f"fig5_annd_{ph}.csv",
                             ["k", "mean_knn", "count"],
                             zip(c.k, c.mean_knn, c.count)))
    else:
        failures["fig5_annd"] = ("no phase curves: transition detection "
                                 "failed on the temporal series")

    # --- power-law fits ---
    def fits():
        fit_specs = {
            "degree_contacts": np.repeat(
                list(hists[metrics.CONTACTS].keys()),
                list(hists[metrics.CONTACTS].values())),
            "degree_unique": np.repeat(
                list(hists[metrics.UNIQUE_NEIGHBORS].keys()),
                list(hists[metrics.UNIQUE_NEIGHBORS].values())),
            "cluster_sizes_accumulative": np.concatenate(
                [p.sizes for p in partitions["accumulative"]]
                or [np.empty(0, np.int64)]),
            "cluster_sizes_temporal": np.concatenate(
                [p.sizes for p in partitions["temporal"]]
                or [np.empty(0, np.int64)]),
        }
        result = {}
        for name, samples in fit_specs.items():
            samples = np.asarray(samples, dtype=np.int64)
            try:
                fit = powerlaw.fit_power_law(samples)
                entry = fit.to_dict()
                if cfg.gof_resamples > 0:
                    entry["p_value"] = powerlaw.goodness_of_fit(
                        fit, samples, cfg.gof_resamples, seed=cfg.seed,
                        threads=cfg.threads)
                    entry["n_resamples"] = cfg.gof_resamples
                entry["seed"] = cfg.seed
                result[name] = entry
            except (powerlaw.InsufficientDataError,
                    powerlaw.DegenerateDataError) as exc:
                result[name] = {"error": str(exc)}
        return _write_json(out / "fits.json", result)

    table("fits.json", fits)

    manifest = {
        "config": cfg.semantic_dict(),
        "config_hash": cfg.config_hash(),
        "n_events": g.n_events,
        "n_vertices": g.n_vertices,
        "outputs": [{"name": k, "rows": v} for k, v in sorted(outputs.items())],
        "missing": dict(sorted(failures.items())),
        "complete": not failures,
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


def _write_json(path: Path, obj) -> int:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return 1
