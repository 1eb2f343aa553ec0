"""Command-line entry point exposing every pipeline stage.

Outputs are plot-ready CSV/JSON artifacts with fixed column orders, UTF-8
and LF line endings.  Every subcommand is idempotent given identical inputs
and seed.  A ``--config FILE`` (JSON keyed by option name) can stand in for
any flag; explicit flags win over config values, which win over defaults.
"""

from __future__ import annotations

import json
import pickle
import sys
from datetime import date
from typing import Optional

import click
import numpy as np

from . import ecdf as ecdf_mod
from . import forest as forest_mod
from . import synth as synth_mod
from .events import ingest_events, write_events_csv
from .panel import build_panel, export_panel_csv, read_panel_csv, rolling_features
from .rcmm import DEFAULT_MISSED_METRICS, NoChurnDefinitionError, find_churn_definition, rcmm_curve
from .report import build_report_cards, compare_churn_definitions
from .score import ScoreSpec, score_series
from .survival import kaplan_meier, median_survival

MODEL_NAMES = {"csf": "csf", "ltrc-cif": "ltrc_cif", "ltrc-rrf": "ltrc_rrf"}


def _apply_config(ctx: click.Context, config_path: Optional[str]) -> None:
    """Fill params still at their defaults from the JSON config file."""
    if not config_path:
        return
    with open(config_path) as fh:
        config = json.load(fh)
    for name, value in config.items():
        key = name.replace("-", "_")
        if key not in ctx.params:
            continue
        source = ctx.get_parameter_source(key)
        if source == click.core.ParameterSource.DEFAULT:
            ctx.params[key] = value


def _load_panel(path: str):
    with open(path, newline="") as fh:
        return read_panel_csv(fh)


def _dump_json(obj, out: Optional[str]):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_lines(lines, out: Optional[str]):
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


config_option = click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="JSON file mirroring the flags.")


@click.group()
def main():
    """Engagement and churn analytics over app-usage event logs."""


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True), default=None, help="Cohort spec JSON; a canned two-group cohort is used when omitted.")
@click.option("--seed", type=int, default=None, help="Overrides the spec seed.")
@click.option("--out", required=True, type=click.Path(), help="Events CSV output.")
@click.option("--truth", "truth_path", type=click.Path(), default=None, help="Ground-truth JSON output.")
@click.option("--workers", type=int, default=1)
@config_option
@click.pass_context
def simulate(ctx, spec_path, seed, out, truth_path, workers, config_path):
    """Generate a synthetic cohort event log with known ground truth."""
    _apply_config(ctx, config_path)
    p = ctx.params
    if p["spec_path"]:
        with open(p["spec_path"]) as fh:
            spec = synth_mod.spec_from_json(fh.read())
    else:
        spec = synth_mod.two_group_spec(n_users=500)
    if p["seed"] is not None:
        spec = synth_mod.CohortSpec(
            n_users=spec.n_users, classes=spec.classes, start=spec.start,
            n_days=spec.n_days, seed=p["seed"], first_login_spread=spec.first_login_spread,
        )
    events, truth = synth_mod.generate(spec, n_jobs=p["workers"])
    with open(p["out"], "w", newline="") as fh:
        write_events_csv(events, fh)
    if p["truth_path"]:
        with open(p["truth_path"], "w", newline="") as fh:
            fh.write(synth_mod.truth_to_json(truth) + "\n")
    click.echo(f"wrote {len(events)} events for {spec.n_users} users to {p['out']}")


@main.command()
@click.option("--events", "events_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["csv", "jsonl"]), default="csv")
@click.option("--out", type=click.Path(), default=None, help="Canonical CSV output.")
@click.option("--rejects", "rejects_path", type=click.Path(), default=None)
@config_option
@click.pass_context
def ingest(ctx, events_path, fmt, out, rejects_path, config_path):
    """Validate, dedupe and canonicalize a raw event log."""
    _apply_config(ctx, config_path)
    p = ctx.params
    with open(p["events_path"], "rb") as fh:
        result = ingest_events(fh, p["fmt"])
    if p["out"]:
        with open(p["out"], "w", newline="") as fh:
            write_events_csv(result.records, fh)
    if p["rejects_path"]:
        rows = [{"line_no": r.line_no, "reason": r.reason, "raw": r.raw} for r in result.rejected]
        _dump_json(rows, p["rejects_path"])
    click.echo(
        f"{len(result.records)} records, {result.n_rejected} rejected, "
        f"{result.duplicates_dropped} duplicates dropped"
    )


@main.command()
@click.option("--events", "events_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["csv", "jsonl"]), default="csv")
@click.option("--end", "end_text", default=None, help="Panel end date YYYY-MM-DD (defaults to the last event day).")
@click.option("--windows", default="3,7,15", help="Rolling windows (comma-separated days).")
@click.option("--out", required=True, type=click.Path())
@config_option
@click.pass_context
def panel(ctx, events_path, fmt, end_text, windows, out, config_path):
    """Build the per-user daily metric panel (with rolling features)."""
    _apply_config(ctx, config_path)
    p = ctx.params
    with open(p["events_path"], "rb") as fh:
        result = ingest_events(fh, p["fmt"])
    end = date.fromisoformat(p["end_text"]) if p["end_text"] else max(r.timestamp.date() for r in result.records)
    pan = build_panel(result.records, end)
    win = [int(w) for w in str(p["windows"]).split(",") if w]
    pan = rolling_features(pan, win)
    with open(p["out"], "w", newline="") as fh:
        export_panel_csv(pan, fh)
    click.echo(f"panel: {len(pan.users)} users through {end.isoformat()} -> {p['out']}")
    for w in pan.warnings:
        click.echo(f"warning: {w}", err=True)


@main.command("churn-def")
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--returning-max", type=float, default=0.30)
@click.option("--missed-max", type=float, default=0.10)
@click.option("--metrics", default=",".join(DEFAULT_MISSED_METRICS))
@click.option("--k-max", type=int, default=120)
@click.option("--group-by", "group_by", default=None, help="Set to 'country' for per-group definitions.")
@click.option("--out", type=click.Path(), default=None, help="Definition report JSON.")
@click.option("--curve-out", "curve_out", type=click.Path(), default=None, help="Curve CSV for plotting.")
@config_option
@click.pass_context
def churn_def(ctx, panel_path, returning_max, missed_max, metrics, k_max, group_by, out, curve_out, config_path):
    """RCMM churn definition: smallest horizon k meeting the thresholds."""
    _apply_config(ctx, config_path)
    p = ctx.params
    pan = _load_panel(p["panel_path"])
    metric_list = [m for m in str(p["metrics"]).split(",") if m]
    k_grid = list(range(1, p["k_max"] + 1))
    groups = sorted(set(pan.groups.values())) if p["group_by"] else [None]
    payload = {}
    curve_lines = []
    for g in groups:
        curve = rcmm_curve(pan, k_grid, metric_list, group=g)
        name = g or "all"
        try:
            definition = find_churn_definition(curve, p["returning_max"], p["missed_max"])
            payload[name] = {
                "k_days": definition.k_days,
                "method": "rcmm",
                "returning_max": p["returning_max"],
                "missed_max": p["missed_max"],
            }
        except NoChurnDefinitionError as exc:
            payload[name] = {
                "k_days": None,
                "best_returning": exc.best_returning,
                "best_missed": exc.best_missed,
            }
        if p["curve_out"]:
            if not curve_lines:
                curve_lines.append("group,k,returning_fraction," + ",".join(f"missed_{m}" for m in metric_list))
            for i, k in enumerate(curve.k_grid):
                missed = ",".join(_fmt(curve.missed_fraction[m][i]) for m in metric_list)
                curve_lines.append(f"{name},{k},{_fmt(curve.returning_fraction[i])},{missed}")
    _dump_json(payload, p["out"])
    if p["curve_out"]:
        _write_lines(curve_lines, p["curve_out"])


@main.command()
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--metric", default=ecdf_mod.GAP_METRIC)
@click.option("--mode", type=click.Choice(["endo", "exo", "snp"]), default="endo")
@click.option("--day", "day_text", default=None, help="Evaluation day (defaults to panel end).")
@click.option("--q", type=float, default=0.9)
@click.option("--cutoff", type=float, default=ecdf_mod.DEFAULT_GAP_CUTOFF)
@click.option("--out", type=click.Path(), default=None, help="Indicator CSV (user_id,day,metric,mode,value,flag).")
@click.option("--dist-out", "dist_out", type=click.Path(), default=None, help="Distribution CSV (value,F) export.")
@config_option
@click.pass_context
def ecdf(ctx, panel_path, metric, mode, day_text, q, cutoff, out, dist_out, config_path):
    """ECDF indicators for every user on one day."""
    _apply_config(ctx, config_path)
    p = ctx.params
    pan = _load_panel(p["panel_path"])
    day = date.fromisoformat(p["day_text"]) if p["day_text"] else pan.panel_end
    lines = ["user_id,day,metric,mode,value,flag"]
    for uid in pan.users:
        try:
            ind = ecdf_mod.indicator(pan, uid, day, p["metric"], p["mode"], p["cutoff"])
        except ecdf_mod.InsufficientHistoryError:
            continue
        flag = ecdf_mod.churn_risk_flag(ind.value, "high_is_bad", p["q"])
        lines.append(f"{uid},{day.isoformat()},{p['metric']},{p['mode']},{_fmt(ind.value)},{int(flag)}")
    _write_lines(lines, p["out"])
    if p["dist_out"]:
        ref_user = pan.users[0]
        samples = ecdf_mod.reference_samples(pan, ref_user, day, p["metric"], p["mode"], p["cutoff"])
        dist = ecdf_mod.build_ecdf(samples, provenance=p["mode"])
        values, probs = dist.steps()
        dlines = ["value,cdf"] + [f"{_fmt(v)},{_fmt(c)}" for v, c in zip(values, probs)]
        _write_lines(dlines, p["dist_out"])


@main.command()
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--components", default=",".join(ScoreSpec().components))
@click.option("--mode", type=click.Choice(["endo", "exo", "snp"]), default="endo")
@click.option("--users", "users_text", default=None, help="Comma-separated subset (default: all).")
@click.option("--out", type=click.Path(), default=None)
@config_option
@click.pass_context
def score(ctx, panel_path, components, mode, users_text, out, config_path):
    """Daily harmonic-mean engagement score series."""
    _apply_config(ctx, config_path)
    p = ctx.params
    pan = _load_panel(p["panel_path"])
    comps = [c for c in str(p["components"]).split(",") if c]
    spec = ScoreSpec(components=tuple(comps), scaling_mode=p["mode"])
    users = p["users_text"].split(",") if p["users_text"] else pan.users
    lines = ["user_id,day,score," + ",".join(comps)]
    for uid in users:
        for s in score_series(pan, spec, uid):
            scaled = ",".join(_fmt(v) for v in s.component_scaled_values)
            lines.append(f"{uid},{s.day.isoformat()},{_fmt(s.value)},{scaled}")
    _write_lines(lines, p["out"])


@main.command()
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--churn-k", type=int, default=31)
@click.option("--group-by", "group_by", default=None)
@click.option("--out", type=click.Path(), default=None, help="Curve CSV (group,t,survival,lower,upper).")
@config_option
@click.pass_context
def km(ctx, panel_path, churn_k, group_by, out, config_path):
    """Kaplan-Meier curves of time-to-churn with Greenwood bands."""
    _apply_config(ctx, config_path)
    p = ctx.params
    pan = _load_panel(p["panel_path"])
    labels, warnings = forest_mod.label_churn(pan, p["churn_k"])
    groups = sorted(set(pan.groups.values())) if p["group_by"] else [None]
    lines = ["group,t,survival,lower,upper"]
    for g in groups:
        obs = [o for u, o in sorted(labels.items()) if g is None or pan.groups.get(u) == g]
        curve = kaplan_meier(obs)
        name = g or "all"
        for t, s, lo, hi in zip(curve.times, curve.survival, curve.lower, curve.upper):
            lines.append(f"{name},{int(t)},{_fmt(s)},{_fmt(lo)},{_fmt(hi)}")
        med = median_survival(curve)
        click.echo(f"{name}: n={len(obs)} median={'undefined' if med is None else med}", err=True)
    _write_lines(lines, p["out"])
    for w in warnings:
        click.echo(f"warning: {w}", err=True)


def _dataset_for(pan, model_name: str, churn_k: int, interval: str):
    if model_name == "csf":
        return forest_mod.build_static_dataset(pan, churn_k)
    return forest_mod.build_pseudo_dataset(pan, churn_k, interval)


@main.command("survival-fit")
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_name", type=click.Choice(sorted(MODEL_NAMES)), default="csf")
@click.option("--churn-k", type=int, default=31)
@click.option("--interval", type=click.Choice(["day", "week", "month"]), default="week")
@click.option("--ntree", type=int, default=100)
@click.option("--seed", type=int, default=0)
@click.option("--workers", type=int, default=1)
@click.option("--out", required=True, type=click.Path(), help="Model binary container.")
@config_option
@click.pass_context
def survival_fit(ctx, panel_path, model_name, churn_k, interval, ntree, seed, workers, out, config_path):
    """Fit a survival forest and store it as a versioned binary container."""
    _apply_config(ctx, config_path)
    p = ctx.params
    pan = _load_panel(p["panel_path"])
    algorithm = MODEL_NAMES[p["model_name"]]
    ds = _dataset_for(pan, p["model_name"], p["churn_k"], p["interval"])
    hyper = forest_mod.Hyperparams(ntree=p["ntree"])
    model = forest_mod.fit_forest(ds, hyper, p["seed"], algorithm, n_jobs=p["workers"])
    container = {
        "format_version": 1,
        "model": model,
        "churn_k": p["churn_k"],
        "interval": p["interval"],
        "model_name": p["model_name"],
    }
    with open(p["out"], "wb") as fh:
        pickle.dump(container, fh, protocol=4)
    click.echo(f"fitted {algorithm} on {ds.n_subjects} subjects ({ds.n_rows} rows) -> {p['out']}")


@main.command("survival-eval")
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_name", type=click.Choice(sorted(MODEL_NAMES)), default="csf")
@click.option("--churn-k", type=int, default=31)
@click.option("--interval", type=click.Choice(["day", "week", "month"]), default="week")
@click.option("--bootstrap", "b", type=int, default=25)
@click.option("--split", type=float, default=0.75)
@click.option("--ntree", type=int, default=100)
@click.option("--seed", type=int, default=0)
@click.option("--top", type=int, default=30)
@click.option("--no-importance", is_flag=True, default=False)
@click.option("--workers", type=int, default=1)
@click.option("--out", type=click.Path(), default=None, help="Evaluation report JSON.")
@config_option
@click.pass_context
def survival_eval(ctx, panel_path, model_name, churn_k, interval, b, split, ntree, seed, top, no_importance, workers, out, config_path):
    """Bootstrap-evaluate a survival forest (per-round IBS, importances, top features)."""
    _apply_config(ctx, config_path)
    p = ctx.params
    pan = _load_panel(p["panel_path"])
    algorithm = MODEL_NAMES[p["model_name"]]
    ds = _dataset_for(pan, p["model_name"], p["churn_k"], p["interval"])
    hyper = forest_mod.Hyperparams(ntree=p["ntree"])
    report = forest_mod.bootstrap_evaluate(
        ds, algorithm, hyper, b=p["b"], split=p["split"], seed=p["seed"],
        compute_importance=not p["no_importance"], n_jobs=p["workers"],
    )
    payload = {
        "model": p["model_name"],
        "churn_k": p["churn_k"],
        "bootstrap_rounds": p["b"],
        "split": p["split"],
        "seed": p["seed"],
        "per_round_ibs": report.per_round_ibs,
        "ibs_boot_avg": report.ibs_boot_avg,
        "skipped_rounds": report.skipped_rounds,
        "importances": {n: float(v) for n, v in zip(report.feature_names, report.importances)},
        "top_features": forest_mod.select_top_features(report, min(p["top"], ds.n_features)),
    }
    _dump_json(payload, p["out"])


@main.command()
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--users", "users_text", default=None)
@click.option("--as-of", "as_of_text", default=None)
@click.option("--model", "model_path", type=click.Path(exists=True), default=None, help="Fitted model container for survival probabilities.")
@click.option("--q", type=float, default=0.9)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="json")
@click.option("--out", type=click.Path(), default=None)
@config_option
@click.pass_context
def report(ctx, panel_path, users_text, as_of_text, model_path, q, fmt, out, config_path):
    """Per-user engagement report cards."""
    _apply_config(ctx, config_path)
    p = ctx.params
    pan = _load_panel(p["panel_path"])
    as_of = date.fromisoformat(p["as_of_text"]) if p["as_of_text"] else pan.panel_end
    users = p["users_text"].split(",") if p["users_text"] else None
    surp = None
    if p["model_path"]:
        with open(p["model_path"], "rb") as fh:
            container = pickle.load(fh)
        model = container["model"]
        ds = _dataset_for(pan, container["model_name"], container["churn_k"], container["interval"])
        curves = forest_mod.predict_curves(model, ds)
        surp = {}
        for code, uid in enumerate(ds.subject_ids):
            lifetime = (as_of - pan.first_login_day(uid)).days
            surp[uid] = float(curves[code].evaluate(lifetime))
    cards = build_report_cards(pan, users, as_of, q=p["q"], survival_probabilities=surp)
    rows = [c.to_row() for c in cards]
    if p["fmt"] == "json":
        _dump_json(rows, p["out"])
    else:
        cols = list(rows[0].keys()) if rows else []
        lines = [",".join(cols)] + [",".join(_fmt(r[c]) for c in cols) for r in rows]
        _write_lines(lines, p["out"])


@main.command()
@click.option("--panel", "panel_path", required=True, type=click.Path(exists=True))
@click.option("--as-of", "as_of_text", default=None)
@click.option("--returning-max", type=float, default=0.30)
@click.option("--missed-max", type=float, default=0.10)
@click.option("--k", "k_rcmm", type=int, default=None, help="Fixed RCMM horizon (skips threshold search).")
@click.option("--q", type=float, default=0.9)
@click.option("--group-by", "group_by", default=None)
@click.option("--out", type=click.Path(), default=None)
@config_option
@click.pass_context
def compare(ctx, panel_path, as_of_text, returning_max, missed_max, k_rcmm, q, group_by, out, config_path):
    """Confusion matrices and per-method churn horizons (RCMM vs ECDF)."""
    _apply_config(ctx, config_path)
    p = ctx.params
    pan = _load_panel(p["panel_path"])
    as_of = date.fromisoformat(p["as_of_text"]) if p["as_of_text"] else pan.panel_end
    groups = sorted(set(pan.groups.values())) if p["group_by"] else [None]
    payload = {}
    for g in groups:
        cmp_ = compare_churn_definitions(
            pan, as_of, p["returning_max"], p["missed_max"], p["k_rcmm"], p["q"], group=g
        )
        payload[g or "all"] = {
            "as_of": cmp_.as_of.isoformat(),
            "k_rcmm": cmp_.k_rcmm,
            "k_ecdf_exo": cmp_.k_exo,
            "k_ecdf_snp": cmp_.k_snp,
            "k_ecdf_endo_avg": cmp_.k_endo_avg,
            "confusion": cmp_.confusion,
            "n_users": cmp_.n_users,
            "n_endo_undefined": cmp_.n_endo_undefined,
        }
    _dump_json(payload, p["out"])


if __name__ == "__main__":
    main()
