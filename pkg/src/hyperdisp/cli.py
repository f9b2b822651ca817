"""Command line: analyze, simulate, verify and corpus.

    hyperdisp analyze  --config job.json [--out dir] [--strict] [--seed N]
    hyperdisp simulate --config job.json [--out dir] [--seed N]
    hyperdisp verify   --config job.json [--out dir] [--strict] [--seed N]
    hyperdisp corpus list | show NAME

With --strict the exit status is 0 when every entry matches, 2 on any
mismatch and 3 when there are abstentions but no mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import corpus, report
from .classify import ZoneReport, build_zone_report
from .config import ConfigError, JobConfig, load_config
from .predict import INF, AbstainError, as_exponent, fp_prediction, interpolation_holds, predict, strichartz_pair
from .propagate import AliasingError, PropagatorOverflow, fit_series, run_decay_experiment
from .roots import track_field
from .symbols import dump_symbol

EXIT_OK, EXIT_ERROR, EXIT_MISMATCH, EXIT_ABSTAINED = 0, 1, 2, 3


# -- pipelines -----------------------------------------------------------------

def zone_report(job: JobConfig) -> ZoneReport:
    S = job.symbol
    field = track_field(S, job.analysis.grid(S.dimension))
    region = job.analysis.region(field.xi)
    return build_zone_report(S, field, region=region, far=job.analysis.far)


def _pq_family(job):
    seen = []
    for e in job.sweep:
        pq = (str(e.p), str(e.q))
        if pq not in seen:
            seen.append(pq)
    for pq in (("1", "inf"), ("2", "2")):
        if pq not in seen:
            seen.append(pq)
    return seen


def analyze(job: JobConfig, zr: ZoneReport | None = None):
    """Zone report plus table predictions; returns the report document."""
    zr = zr or zone_report(job)
    S = job.symbol
    doc = {"kind": "analysis", "name": job.name,
           "symbol": {"name": S.name, "dimension": S.dimension, "order": S.order, "provenance": S.provenance,
                      "definition": S.to_dict()},
           "zone_report": zr.to_dict(), "predictions": [], "abstained": None, "fp_prediction": None,
           "interpolation_identity": None}
    try:
        for p, q in _pq_family(job):
            pred = predict(zr, p, q)
            d = pred.to_dict()
            d["strichartz"] = strichartz_pair(pred.kappa).to_dict()
            doc["predictions"].append(d)
        doc["interpolation_identity"] = interpolation_holds(zr, Fraction(4, 3))
    except AbstainError as exc:
        doc["predictions"] = []
        doc["abstained"] = str(exc)
    try:
        doc["fp_prediction"] = fp_prediction(zr).to_dict()
    except AbstainError as exc:
        doc["fp_abstained"] = str(exc)
    return report.validate(report.jsonable(doc), "analysis")


def simulate(job: JobConfig, r=0, alpha=0, seed=None):
    """One decay experiment; returns (PropagatorRun, sidecar document)."""
    S = job.symbol
    sim = job.simulation
    alpha_vec = (alpha,) + (0,) * (S.dimension - 1)
    run = run_decay_experiment(S, sim.cauchy_data(job.seed if seed is None else seed), sim.grid(S.dimension),
                               sim.times(), r=r, alpha=alpha_vec, kernel=sim.which == "kernel",
                               tol=job.tol("aliasing"))
    fits = {}
    for which in run.norms:
        for q in ("inf", "2"):
            try:
                fits[f"{which}/{q}"] = fit_series(run.times, run.series(which, q), sim.fit_window).to_dict()
            except ValueError as exc:
                fits[f"{which}/{q}"] = {"error": str(exc)}
    side = {"kind": "simulation", "name": job.name, "symbol": S.name, "grid": run.grid.to_dict(),
            "data": run.data, "r": r, "alpha": list(alpha_vec), "times": list(run.times),
            "norms": run.norms, "max_edge_energy": max(run.aliasing), "fits": fits}
    return run, report.validate(report.jsonable(side), "simulation")


@dataclass
class Verdict:
    key: str
    predicted: object
    measured: float | None
    halfwidth: float | None
    verdict: str
    provenance: str

    def to_dict(self):
        return {"key": self.key, "predicted": None if self.predicted is None else str(self.predicted),
                "measured": self.measured, "halfwidth": self.halfwidth, "verdict": self.verdict,
                "provenance": self.provenance}


def is_match(predicted, measured, halfwidth, floor=0.15):
    return abs(float(predicted) - measured) <= max(floor, 2 * halfwidth)


def verify(job: JobConfig, seed=None, zr: ZoneReport | None = None):
    zr = zr or zone_report(job)
    S = job.symbol
    entries = []
    note = None
    if not zr.stability.passed:
        note = (f"stability fails (min Im tau = {zr.stability.min_im:.4g} at root {zr.stability.label}): "
                "no decay expected")
        entries = [Verdict(e.key(), None, None, None, "abstained", note) for e in job.sweep]
    else:
        runs = {}
        for e in job.sweep:
            if not (as_exponent(e.p) == 1 and as_exponent(e.q) == INF):
                entries.append(Verdict(e.key(), None, None, None, "abstained",
                                       "only the L1->Linf decay is measured by the experiment"))
                continue
            try:
                pred = predict(zr, e.p, e.q)
            except AbstainError as exc:
                entries.append(Verdict(e.key(), None, None, None, "abstained", str(exc)))
                continue
            expo = pred.exponent(e.r, e.alpha)
            if (e.r, e.alpha) not in runs:
                runs[(e.r, e.alpha)] = simulate(job, e.r, e.alpha, seed)[0]
            run = runs[(e.r, e.alpha)]
            values = run.series(job.simulation.which, "inf")
            if expo == INF:
                fit = fit_series(run.times, values, job.simulation.fit_window, mode="exponential")
                target = pred.K.delta
                prov = f"{pred.K.row} in {pred.K.zone} (exponential rate)"
            else:
                fit = fit_series(run.times, values, job.simulation.fit_window)
                target = expo
                gains = " + derivative gains" if (e.r or e.alpha) and pred.improvements else ""
                prov = f"{pred.K.row} in {pred.K.zone}{gains}"
            ok = is_match(target, fit.exponent, fit.halfwidth, job.tol("match_floor"))
            pv = target if expo != INF else f"exp rate {target:.4g}"
            entries.append(Verdict(e.key(), pv, fit.exponent, fit.halfwidth, "match" if ok else "mismatch", prov))
    summary = {k: sum(v.verdict == k for v in entries) for k in ("match", "mismatch", "abstained")}
    doc = {"kind": "verify", "name": job.name, "symbol": S.name, "entries": [v.to_dict() for v in entries],
           "summary": summary, "note": note}
    return report.validate(report.jsonable(doc), "verify")


def strict_status(summary):
    if summary["mismatch"]:
        return EXIT_MISMATCH
    if summary["abstained"]:
        return EXIT_ABSTAINED
    return EXIT_OK


# -- command line ----------------------------------------------------------------

def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_analyze(args):
    job = load_config(args.config)
    if args.seed is not None:
        job.seed = args.seed
    doc = analyze(job)
    out = _out_dir(args)
    report.write_json(doc, out / f"{job.name}.analysis.json")
    text = report.analysis_text(doc)
    (out / f"{job.name}.analysis.txt").write_text(text)
    sys.stdout.write(text)
    if args.strict and doc["abstained"]:
        return EXIT_ABSTAINED
    return EXIT_OK


def _cmd_simulate(args):
    job = load_config(args.config)
    seed = args.seed if args.seed is not None else job.seed
    out = _out_dir(args)
    pairs = sorted({(e.r, e.alpha) for e in job.sweep}) or [(0, 0)]
    for r, a in pairs:
        run, side = simulate(job, r, a, seed)
        stem = f"{job.name}.r{r}a{a}"
        run.to_csv(out / f"{stem}.csv", job.simulation.which)
        report.write_json(side, out / f"{stem}.json")
        fit = side["fits"].get(f"{job.simulation.which}/inf", {})
        sys.stdout.write(f"{stem}: {len(run.times)} times, fitted exponent "
                         f"{fit.get('exponent', float('nan')):.4f} +/- {fit.get('halfwidth', float('nan')):.4f}\n")
    return EXIT_OK


def _cmd_verify(args):
    job = load_config(args.config)
    doc = verify(job, args.seed)
    out = _out_dir(args)
    report.write_json(doc, out / f"{job.name}.verify.json")
    text = report.verify_text(doc)
    (out / f"{job.name}.verify.txt").write_text(text)
    sys.stdout.write(text)
    return strict_status(doc["summary"]) if args.strict else EXIT_OK


def _cmd_corpus(args):
    if args.action == "list":
        for name in corpus.names():
            S = corpus.get(name)
            sys.stdout.write(f"{name:22s} n={S.dimension} m={S.order}  {S.provenance}\n")
        return EXIT_OK
    if not args.name:
        raise ConfigError("corpus show: give a symbol name")
    try:
        S = corpus.get(args.name)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    d = json.loads(dump_symbol(S))
    sys.stdout.write(f"{S.name}: degree-{S.order} symbol in {S.dimension}D\n{S.provenance}\n")
    sys.stdout.write(json.dumps(d, indent=2) + "\n")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="hyperdisp", description="Dispersive decay rates of hyperbolic symbols")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in (("analyze", _cmd_analyze), ("simulate", _cmd_simulate), ("verify", _cmd_verify)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=".")
        p.add_argument("--strict", action="store_true")
        p.add_argument("--seed", type=int, default=None)
        p.set_defaults(func=fn)
    p = sub.add_parser("corpus")
    p.add_argument("action", choices=["list", "show"])
    p.add_argument("name", nargs="?")
    p.set_defaults(func=_cmd_corpus)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
    except (AliasingError, PropagatorOverflow) as exc:
        sys.stderr.write(f"simulation error: {exc}\n")
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
