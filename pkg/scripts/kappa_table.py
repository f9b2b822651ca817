"""Predicted decay rates kappa_{p,q} for every corpus symbol, with the deciding table row.

    python3 scripts/kappa_table.py [--pairs 1,inf 4/3,4 2,2]
"""

import argparse

import numpy as np

from hyperdisp import corpus
from hyperdisp.classify import build_zone_report
from hyperdisp.predict import AbstainError, predict, strichartz_pair
from hyperdisp.roots import FrequencyGrid, track_field

GRIDS = {1: (4.0, 401), 2: (4.0, 41), 3: (3.0, 15)}
REGIONS = {"negative_mass_1d": 1.0}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", nargs="*", default=["1,inf", "4/3,4", "2,2"])
    args = ap.parse_args()
    pairs = [tuple(p.split(",")) for p in args.pairs]
    print(f"{'symbol':22s} " + " ".join(f"k({p},{q})".ljust(10) for p, q in pairs) + " row / Strichartz")
    for name in corpus.names():
        S = corpus.get(name)
        R, c = GRIDS[S.dimension]
        field = track_field(S, FrequencyGrid.cube(S.dimension, R, c))
        region = None
        if name in REGIONS:
            region = np.linalg.norm(field.xi, axis=-1) >= REGIONS[name] - 1e-12
        rep = build_zone_report(S, field, region=region)
        try:
            preds = [predict(rep, p, q) for p, q in pairs]
        except AbstainError as exc:
            print(f"{name:22s} abstained: {exc}")
            continue
        sp = strichartz_pair(preds[0].kappa)
        pair = f"({sp.q}, {sp.q_conj})" if sp.admissible else sp.note
        print(f"{name:22s} " + " ".join(str(pr.kappa).ljust(10) for pr in preds) + f" {preds[0].K.row} / {pair}")


if __name__ == "__main__":
    main()
