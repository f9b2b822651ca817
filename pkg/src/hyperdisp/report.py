"""Report files: JSON with a published schema plus a plain-text decay table."""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from .predict import ROWS

_num_or_str = {"type": ["number", "string"]}

PREDICTION_ROW = {
    "type": "object",
    "required": ["row", "zone", "rho", "lam", "delta", "kappa", "text"],
    "properties": {
        "row": {"type": "string", "enum": sorted(ROWS) + ["strongly_stable.polynomial"]},
        "zone": {"type": "string"},
        "rho": {"type": "string"},
        "lam": {"type": "integer", "minimum": 0},
        "delta": {"type": "number", "minimum": 0},
        "kappa": {"type": "string"},
        "root": {"type": "integer"},
        "qualifier": {"type": "string"},
        "text": {"type": "string"},
    },
}

ANALYSIS_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "hyperdisp analysis report",
    "type": "object",
    "required": ["kind", "name", "symbol", "zone_report", "predictions", "abstained"],
    "properties": {
        "kind": {"const": "analysis"},
        "name": {"type": "string"},
        "symbol": {"type": "object", "required": ["name", "dimension", "order", "definition"]},
        "zone_report": {
            "type": "object",
            "required": ["symbol", "dimension", "order", "grid", "stability", "zones", "multiplicities"],
            "properties": {
                "stability": {"type": "object", "required": ["passed", "min_im"]},
                "zones": {"type": "array", "items": {
                    "type": "object", "required": ["id", "kind", "cells", "roots"],
                    "properties": {"kind": {"enum": ["large", "bounded", "multiplicity", "contact",
                                                     "excluded"]}}}},
            },
        },
        "predictions": {"type": "array", "items": {
            "type": "object",
            "required": ["p", "q", "K", "kappa", "rows", "improvements", "strichartz"],
            "properties": {"K": PREDICTION_ROW, "rows": {"type": "array", "items": PREDICTION_ROW},
                           "kappa": {"type": "string"}},
        }},
        "abstained": {"type": ["string", "null"]},
        "fp_prediction": {"type": ["object", "null"]},
        "interpolation_identity": {"type": ["boolean", "null"]},
    },
}

VERIFY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "hyperdisp verify report",
    "type": "object",
    "required": ["kind", "name", "symbol", "entries", "summary"],
    "properties": {
        "kind": {"const": "verify"},
        "entries": {"type": "array", "items": {
            "type": "object",
            "required": ["key", "predicted", "measured", "halfwidth", "verdict", "provenance"],
            "properties": {
                "verdict": {"enum": ["match", "mismatch", "abstained"]},
                "predicted": {"type": ["string", "null"]},
                "measured": {"type": ["number", "null"]},
                "halfwidth": {"type": ["number", "null"]},
            },
        }},
        "summary": {"type": "object", "required": ["match", "mismatch", "abstained"]},
    },
}

SIMULATION_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "hyperdisp simulation sidecar",
    "type": "object",
    "required": ["kind", "name", "grid", "times", "fits"],
    "properties": {"kind": {"const": "simulation"}, "times": {"type": "array", "items": {"type": "number"}}},
}

SCHEMAS = {"analysis": ANALYSIS_SCHEMA, "verify": VERIFY_SCHEMA, "simulation": SIMULATION_SCHEMA}


def jsonable(obj):
    """Recursively convert numpy scalars, Fractions and infinities to JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def validate(doc, kind=None):
    kind = kind or doc.get("kind")
    jsonschema.validate(doc, SCHEMAS[kind])
    return doc


def dumps(doc):
    return json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n"


def write_json(doc, path):
    doc = jsonable(doc)
    validate(doc)
    Path(path).write_text(dumps(doc))
    return doc


def read_json(path):
    doc = json.loads(Path(path).read_text())
    return validate(doc)


def _table(header, rows):
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    line = "  ".join(h.ljust(w) for h, w in zip(header, widths))
    out = [line, "-" * len(line)]
    out += ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(out)


def _param(axis):
    kind = axis.get("kind")
    if kind == "separated":
        return f"delta={axis['delta']:.4g}"
    if kind == "meets":
        return f"s={axis.get('s')} s1={axis.get('s1')} ell={axis.get('ell')}"
    return kind


def analysis_text(doc):
    """Human-readable layout: large-frequency rows, then bounded-frequency rows."""
    zr = doc["zone_report"]
    out = [f"symbol {doc['symbol']['name']}  (n={zr['dimension']}, m={zr['order']})",
           f"stability: {'pass' if zr['stability']['passed'] else 'FAIL'} "
           f"(min Im tau = {zr['stability']['min_im']:.4g})", ""]
    for part, kinds in (("Large frequencies", ("large",)),
                        ("Bounded frequencies", ("bounded", "multiplicity", "contact"))):
        rows = []
        for z in zr["zones"]:
            if z["kind"] not in kinds:
                continue
            for r in z["roots"]:
                ax = r["axis"]
                h = r.get("hessian") or {}
                c = r.get("contact") or {}
                rows.append([z["id"], r["k"], ax["kind"], _param(ax), h.get("kind", "-"),
                             c.get("gamma", "-"), c.get("gamma0", "-")])
            ms = z.get("multiplicity")
            if ms:
                rows.append([z["id"], ",".join(map(str, ms["labels"])), f"L={ms['L']}", f"ell={ms['ell']}",
                             "axis" if ms["contains_axis"] else "off-axis", "-", "-"])
        if rows:
            out.append(part)
            out.append(_table(["zone", "root", "behaviour", "parameters", "hessian", "gamma", "gamma0"], rows))
            out.append("")
    if doc.get("abstained"):
        out.append(f"prediction abstained: {doc['abstained']}")
    for pr in doc.get("predictions", []):
        K = pr["K"]
        out.append(f"(p,q)=({pr['p']},{pr['q']}): K(t) = {K['text']}  [{K['row']} in {K['zone']}]  "
                   f"kappa = {pr['kappa']}")
        for imp in pr["improvements"]:
            out.append(f"    derivative gains in {imp['zone']}: r * {imp['per_r']}, |alpha| * {imp['per_alpha']}")
        st = pr["strichartz"]
        if st["admissible"]:
            out.append(f"    Strichartz pair (q, q') = ({st['q']}, {st['q_conj']})")
        for note in pr["notes"]:
            out.append(f"    note: {note}")
    fp = doc.get("fp_prediction")
    if fp:
        out.append(f"strongly stable: {fp['text']}")
    return "\n".join(out) + "\n"


def verify_text(doc):
    rows = [[e["key"], e["predicted"] if e["predicted"] is not None else "-",
             "-" if e["measured"] is None else f"{e['measured']:.3f}",
             "-" if e["halfwidth"] is None else f"{e['halfwidth']:.3f}", e["verdict"], e["provenance"]]
            for e in doc["entries"]]
    s = doc["summary"]
    head = f"verify {doc['name']} ({doc['symbol']})"
    if doc.get("note"):
        head += f": {doc['note']}"
    return (head + "\n" + _table(["entry", "predicted", "measured", "+/-", "verdict", "provenance"], rows)
            + f"\nmatch {s['match']}  mismatch {s['mismatch']}  abstained {s['abstained']}\n")
