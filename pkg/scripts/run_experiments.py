"""Run analyze and verify for every job config and print a one-line summary per job.

    python3 scripts/run_experiments.py [configs/*.json] [--out results]
"""

import argparse
import time
from pathlib import Path

from hyperdisp import report
from hyperdisp.cli import analyze, strict_status, verify, zone_report
from hyperdisp.config import load_config

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", type=Path)
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    args = ap.parse_args()
    paths = args.configs or sorted((ROOT / "configs").glob("*.json"))
    args.out.mkdir(parents=True, exist_ok=True)
    worst = 0
    for path in paths:
        job = load_config(path)
        t0 = time.perf_counter()
        zr = zone_report(job)
        ana = analyze(job, zr)
        ver = verify(job, zr=zr)
        secs = time.perf_counter() - t0
        report.write_json(ana, args.out / f"{job.name}.analysis.json")
        report.write_json(ver, args.out / f"{job.name}.verify.json")
        (args.out / f"{job.name}.verify.txt").write_text(report.verify_text(ver))
        kappa = ana["predictions"][0]["kappa"] if ana["predictions"] else "abstained"
        measured = ", ".join(f"{e['measured']:.3f}" for e in ver["entries"] if e["measured"] is not None) or "-"
        s = ver["summary"]
        print(f"{job.name:22s} kappa={kappa:6s} measured=[{measured}] match={s['match']} "
              f"mismatch={s['mismatch']} abstained={s['abstained']}  {secs:6.1f}s")
        worst = max(worst, strict_status(s))
    return worst


if __name__ == "__main__":
    raise SystemExit(main())
