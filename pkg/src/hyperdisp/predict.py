"""Decay-rate table: zone classifications to K(t), kappa_{p,q} and Strichartz pairs.

K(t) is a product <t>^(rho + lam) e^(-delta t) with rho <= 0 the decay part
and lam >= 0 the polynomial growth from resolving multiplicities.  Exponents
are exact Fractions; exponential-only predictions use kappa = +inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .classify import SEP_THRESHOLD, RootZoneInfo, Zone, ZoneReport

INF = math.inf
SHRINKING = "L1->Linf only, shrinking neighbourhood of the multiplicity set"


class AbstainError(ValueError):
    """The table has no certified row for this input."""


def as_exponent(p):
    """Lebesgue exponent as a Fraction, or math.inf."""
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "oo", "∞"):
            return INF
        return Fraction(p)
    if p == INF:
        return INF
    return Fraction(p).limit_denominator(10 ** 6)


def recip(p):
    p = as_exponent(p)
    return Fraction(0) if p == INF else 1 / p


def lp_factor(p, q):
    """1/p - 1/q as a Fraction."""
    return recip(p) - recip(q)


def conjugate(p):
    r = 1 - recip(p)
    return INF if r == 0 else 1 / r


def _fmt(v):
    if v == INF:
        return "inf"
    return str(v)


@dataclass(frozen=True)
class KFactor:
    rho: Fraction              # power of <t> from decay (<= 0)
    lam: int = 0               # power of <t> from multiplicity growth
    delta: float = 0.0         # exponential rate
    row: str = ""
    zone: str = ""
    root: int | None = None
    qualifier: str | None = None

    @property
    def shrinking(self):
        return self.qualifier == SHRINKING

    def slowness(self):
        """Sort key: larger is slower decay (smaller delta, then larger rho + lam)."""
        return (-self.delta, self.rho + self.lam, self.row, self.zone, -1 if self.root is None else self.root)

    def kappa(self):
        return INF if self.delta > 0 else -(self.rho + self.lam)

    def __str__(self):
        parts = []
        power = self.rho + self.lam
        if power != 0 or self.delta == 0:
            parts.append(f"<t>^({power})")
        if self.delta > 0:
            parts.append(f"exp(-{self.delta:.6g} t)")
        return " ".join(parts)

    def to_dict(self):
        d = {"row": self.row, "zone": self.zone, "rho": str(self.rho), "lam": self.lam, "delta": self.delta,
             "kappa": _fmt(self.kappa()), "text": str(self)}
        if self.root is not None:
            d["root"] = self.root
        if self.qualifier:
            d["qualifier"] = self.qualifier
        return d


def slowest(rows):
    if not rows:
        raise ValueError("no rows to combine")
    return max(rows, key=KFactor.slowness)


# Row inventory of the decay table: row id -> envelope.
ROWS = {
    "large.away_from_axis": "exp(-delta t)",
    "large.nondegenerate": "<t>^(-(n/2)(1/p-1/q))",
    "large.rank_n_minus_1": "<t>^(-((n-1)/2)(1/p-1/q))",
    "large.convex": "<t>^(-((n-1)/gamma)(1/p-1/q))",
    "large.nonconvex": "<t>^(-(1/gamma0)(1/p-1/q))",
    "bounded.away_from_axis": "exp(-delta t)",
    "bounded.away_from_axis_multiple": "<t>^L exp(-delta t)",
    "bounded.on_axis_nondegenerate": "<t>^(-(n/2)(1/p-1/q))",
    "bounded.on_axis_convex": "<t>^(-((n-1)/gamma)(1/p-1/q))",
    "bounded.on_axis_nonconvex": "<t>^(-(1/gamma0)(1/p-1/q))",
    "bounded.on_axis_multiple": "<t>^(L-1-ell)",
    "bounded.meets_axis": "<t>^(L-1-(ell/s)(1/p-1/q))",
}


def _row_away(ctx, delta):
    return KFactor(Fraction(0), 0, float(delta), ctx["row"], ctx["zone"], ctx.get("root"))


def _row_power(ctx, rate):
    return KFactor(-rate * ctx["f"], 0, 0.0, ctx["row"], ctx["zone"], ctx.get("root"))


ROW_IMPL = {
    "large.away_from_axis": lambda c: _row_away(c, c["delta"]),
    "large.nondegenerate": lambda c: _row_power(c, Fraction(c["n"], 2)),
    "large.rank_n_minus_1": lambda c: _row_power(c, Fraction(c["n"] - 1, 2)),
    "large.convex": lambda c: _row_power(c, Fraction(c["n"] - 1) / c["gamma"]),
    "large.nonconvex": lambda c: _row_power(c, Fraction(1) / c["gamma0"]),
    "bounded.away_from_axis": lambda c: _row_away(c, c["delta"]),
    "bounded.away_from_axis_multiple": lambda c: KFactor(Fraction(0), c["L"], float(c["delta"]), c["row"],
                                                         c["zone"]),
    "bounded.on_axis_nondegenerate": lambda c: _row_power(c, Fraction(c["n"], 2)),
    "bounded.on_axis_convex": lambda c: _row_power(c, Fraction(c["n"] - 1) / c["gamma"]),
    "bounded.on_axis_nonconvex": lambda c: _row_power(c, Fraction(1) / c["gamma0"]),
    "bounded.on_axis_multiple": lambda c: KFactor(Fraction(-c["ell"]), c["L"] - 1, 0.0, c["row"], c["zone"],
                                                  qualifier=SHRINKING),
    "bounded.meets_axis": lambda c: KFactor(-Fraction(c["ell"], c["s"]) * c["f"], c["L"] - 1, 0.0, c["row"],
                                            c["zone"], c.get("root")),
}


def _emit(row, **ctx):
    ctx["row"] = row
    return ROW_IMPL[row](ctx)


def _finite_index(v):
    return v is not None and v != INF and not (isinstance(v, float) and math.isinf(v))


def _strongest(cands):
    """Among rows certified for one root, the fastest decay (see the ledger)."""
    return min(cands, key=KFactor.slowness)


def row_large_freq(info: RootZoneInfo, n, p, q, zone_id="large") -> KFactor:
    """Large-frequency row for one root."""
    f = lp_factor(p, q)
    base = {"zone": zone_id, "root": info.k, "n": n, "f": f}
    ax = info.axis
    if ax.kind == "separated":
        return _emit("large.away_from_axis", delta=ax.delta, **base)
    if ax.kind == "unstable":
        raise AbstainError(f"root {info.k} has Im tau < 0 in zone {zone_id}: no decay expected")
    if ax.kind != "on_axis":
        raise AbstainError(f"root {info.k} in zone {zone_id} approaches the real axis ({ax.kind}) at large "
                           "frequencies: no table row covers this")
    cands = []
    h = info.hessian
    if h is not None and h.kind == "nondegenerate":
        cands.append(_emit("large.nondegenerate", **base))
    if h is not None and h.kind == "rank_deficient" and h.rank == n - 1:
        cands.append(_emit("large.rank_n_minus_1", **base))
    c = info.contact
    if c is not None:
        if c.all_convex and _finite_index(c.gamma):
            cands.append(_emit("large.convex", gamma=Fraction(c.gamma), **base))
        if _finite_index(c.gamma0):
            cands.append(_emit("large.nonconvex", gamma0=Fraction(c.gamma0), **base))
    if not cands:
        raise AbstainError(f"root {info.k} in zone {zone_id}: on the axis but no Hessian or convexity "
                           "condition is certified")
    return _strongest(cands)


def _bounded_single(info: RootZoneInfo, n, f, zone_id):
    base = {"zone": zone_id, "root": info.k, "n": n, "f": f}
    ax = info.axis
    if ax.kind == "separated":
        return _emit("bounded.away_from_axis", delta=ax.delta, **base)
    if ax.kind == "unstable":
        raise AbstainError(f"root {info.k} has Im tau < 0 in zone {zone_id}: no decay expected")
    if ax.kind == "meets":
        if ax.ell is None or ax.s is None:
            raise AbstainError(f"root {info.k} in zone {zone_id}: contact order or codimension not certified")
        return _emit("bounded.meets_axis", L=1, ell=ax.ell, s=ax.s, **base)
    if ax.kind == "on_axis":
        if info.regular is False:
            raise AbstainError(f"root {info.k} in zone {zone_id}: radial regularity |d tau/d rho| >= C0 fails")
        cands = []
        h = info.hessian
        if h is not None and h.kind == "nondegenerate":
            cands.append(_emit("bounded.on_axis_nondegenerate", **base))
        c = info.contact
        if info.regular and c is not None:
            if c.all_convex and _finite_index(c.gamma):
                cands.append(_emit("bounded.on_axis_convex", gamma=Fraction(c.gamma), **base))
            if _finite_index(c.gamma0):
                cands.append(_emit("bounded.on_axis_nonconvex", gamma0=Fraction(c.gamma0), **base))
        if not cands:
            raise AbstainError(f"root {info.k} in zone {zone_id}: on the axis without a certified row")
        return _strongest(cands)
    raise AbstainError(f"root {info.k} in zone {zone_id}: behaviour {ax.kind} is not covered by the table")


def row_bounded_freq(zone: Zone, n, p, q) -> list:
    """Bounded-frequency rows of one zone (multiplicity, contact or bounded)."""
    f = lp_factor(p, q)
    rows = []
    ms = zone.multiplicity
    part = set(ms.labels) if ms is not None else set()
    for info in zone.roots:
        if info.k in part:
            continue
        rows.append(_bounded_single(info, n, f, zone.id))
    if ms is not None:
        infos = [i for i in zone.roots if i.k in part]
        kinds = {i.axis.kind for i in infos}
        base = {"zone": zone.id, "n": n, "f": f, "L": ms.L}
        if "unstable" in kinds:
            raise AbstainError(f"zone {zone.id}: multiple root with Im tau < 0")
        if ms.ell is None:
            raise AbstainError(f"zone {zone.id}: codimension of the multiplicity set not certified")
        if kinds == {"separated"}:
            delta = min(i.axis.delta for i in infos)
            rows.append(_emit("bounded.away_from_axis_multiple", delta=delta, **base))
        elif ms.min_im > SEP_THRESHOLD:
            # the coincidence itself is off the axis; participants touching the
            # axis elsewhere in the zone get their own single-root rows
            sep = [i.axis.delta for i in infos if i.axis.kind == "separated"]
            rows.append(_emit("bounded.away_from_axis_multiple", delta=min(sep, default=ms.min_im), **base))
            rows.extend(_bounded_single(i, n, f, zone.id) for i in infos if i.axis.kind != "separated")
        elif ms.contains_axis and kinds == {"on_axis"}:
            rows.append(_emit("bounded.on_axis_multiple", ell=ms.ell, **base))
        elif "meets" in kinds and kinds <= {"meets", "separated"}:
            s = max(i.axis.s for i in infos if i.axis.kind == "meets")
            rows.append(_emit("bounded.meets_axis", ell=ms.ell, s=s, **base))
        else:
            raise AbstainError(f"zone {zone.id}: multiplicity with axis behaviour {sorted(kinds)} "
                               "is not covered by the table")
    return rows


@dataclass
class Improvement:
    """Extra decay per derivative: r * per_r (time) and |alpha| * per_alpha (space)."""
    zone: str
    per_r: Fraction | None
    per_alpha: Fraction | None
    notes: tuple = ()

    def to_dict(self):
        return {"zone": self.zone, "per_r": None if self.per_r is None else str(self.per_r),
                "per_alpha": None if self.per_alpha is None else str(self.per_alpha), "notes": list(self.notes)}


@dataclass
class DecayPrediction:
    K: KFactor
    kappa: Fraction | float
    p: object
    q: object
    rows: list
    improvements: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    sobolev: str = ("N_p: derivative loss of the large-frequency estimate, proportional to (1/p - 1/q); "
                    "reported as a formula, not verified")

    def exponent(self, r=0, alpha=0):
        """Predicted decay exponent for d_t^r d_x^alpha (|alpha| = alpha); inf if exponential."""
        rates = []
        for row in self.rows:
            if row.delta > 0 or row.shrinking:
                continue
            gain = Fraction(0)
            for imp in self.improvements:
                if imp.zone == row.zone and row.row == "bounded.meets_axis":
                    if r and imp.per_r is not None:
                        gain += r * imp.per_r
                    if alpha and imp.per_alpha is not None:
                        gain += alpha * imp.per_alpha
            rates.append(row.kappa() + gain)
        return min(rates) if rates else INF

    def to_dict(self):
        return {"p": _fmt(as_exponent(self.p)), "q": _fmt(as_exponent(self.q)), "K": self.K.to_dict(),
                "kappa": _fmt(self.kappa), "rows": [r.to_dict() for r in self.rows],
                "improvements": [i.to_dict() for i in self.improvements], "notes": list(self.notes),
                "sobolev": self.sobolev}


def improvements_for(report: ZoneReport) -> list:
    """Derivative gains certified on axis-contact zones."""
    out = []
    for z in report.zones:
        for info in z.roots:
            ax = info.axis
            if ax.kind != "meets" or not ax.s:
                continue
            per_alpha = per_r = None
            notes = []
            if ax.isolated and ax.xi0 is not None and max(abs(v) for v in ax.xi0) <= report.step:
                per_alpha = Fraction(1, ax.s)
                notes.append("contact point at the origin")
            if ax.s1 is not None:
                per_r = Fraction(ax.s1, ax.s)
                notes.append(f"|tau| <= c1 |xi - xi0|^{ax.s1} at the contact point")
            if per_alpha is not None or per_r is not None:
                out.append(Improvement(z.id, per_r, per_alpha, tuple(notes)))
    return out


def combine(rows, p, q, improvements=()) -> DecayPrediction:
    """K = slowest row (shrinking-region rows reported but kept out of kappa)."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to combine")
    regular = [r for r in rows if not r.shrinking]
    notes = []
    if regular:
        K = slowest(regular)
        shr = [r for r in rows if r.shrinking and r.slowness() > K.slowness()]
        if shr:
            notes.append(f"shrinking-region row {shr[0].row} in {shr[0].zone} is slower ({shr[0]}) "
                         "but only covers L1->Linf near the multiplicity set")
    else:
        K = slowest(rows)
        notes.append("only shrinking-region rows: kappa taken from them")
    return DecayPrediction(K, K.kappa(), p, q, rows, list(improvements), notes)


def predict(report: ZoneReport, p=1, q="inf") -> DecayPrediction:
    """Full table lookup for a zone report."""
    if not report.stability.passed:
        raise AbstainError(f"stability fails (min Im tau = {report.stability.min_im:.4g}): no decay expected")
    n = report.dimension
    rows = []
    for z in report.zones:
        if z.kind == "excluded":
            continue
        if z.kind == "large":
            rows.extend(row_large_freq(info, n, p, q, z.id) for info in z.roots)
        else:
            rows.extend(row_bounded_freq(z, n, p, q))
    return combine(rows, p, q, improvements_for(report))


def kappa_sweep(report: ZoneReport, pairs):
    return {(str(p), str(q)): predict(report, p, q).kappa for p, q in pairs}


def interpolation_holds(report: ZoneReport, p) -> bool:
    """kappa_{p,p'} == kappa_{2,2} (2/p') + kappa_{1,inf} (1/p - 1/p')."""
    pc = conjugate(p)
    k_pp = predict(report, p, pc).kappa
    k_22 = predict(report, 2, 2).kappa
    k_1i = predict(report, 1, INF).kappa
    if INF in (k_pp, k_22, k_1i):
        return k_pp == INF and (k_22 == INF or k_1i == INF)
    return k_pp == k_22 * 2 * recip(pc) + k_1i * (recip(p) - recip(pc))


@dataclass(frozen=True)
class StrichartzExponents:
    kappa: object
    q: Fraction | None
    q_conj: object
    admissible: bool
    note: str = ""

    def to_dict(self):
        return {"kappa": _fmt(self.kappa), "q": None if self.q is None else str(self.q),
                "q_conj": None if self.q_conj is None else _fmt(self.q_conj), "admissible": self.admissible,
                "note": self.note}


def strichartz_pair(kappa) -> StrichartzExponents:
    """(q, q') with 1/q - 1/q' = 1 - kappa and q' the conjugate of q."""
    if kappa == INF:
        return StrichartzExponents(kappa, None, None, False, "exponential decay: no Strichartz pair needed")
    k = Fraction(kappa)
    if not 0 < k < 1:
        return StrichartzExponents(k, None, None, False, "kappa outside (0, 1)")
    q = 2 / (2 - k)
    return StrichartzExponents(k, q, conjugate(q), True)


@dataclass
class FPPrediction:
    polynomial: KFactor
    epsilon: float
    n: int
    certificate: dict
    table: DecayPrediction | None = None

    def __str__(self):
        return f"<t>^({self.polynomial.rho}) + exp(-{self.epsilon:.4g} t)"

    def to_dict(self):
        return {"polynomial": self.polynomial.to_dict(), "epsilon": self.epsilon, "text": str(self),
                "certificate": self.certificate,
                "table": None if self.table is None else self.table.to_dict()}


def fp_prediction(report: ZoneReport) -> FPPrediction:
    """Two-term prediction <t>^(-n/2) + e^(-eps t) for a strongly stable symbol."""
    cert = {"stable": report.stability.passed}
    if not report.stability.passed:
        raise AbstainError("strong stability: stability condition fails")
    contacts = report.contacts
    cert["contact_roots"] = sorted(contacts)
    if len(contacts) != 1:
        raise AbstainError(f"strong stability: expected one root meeting the axis, found {len(contacts)}")
    (k, ax), = contacts.items()
    if not ax.isolated or ax.xi0 is None or max(abs(v) for v in ax.xi0) > report.step:
        raise AbstainError("strong stability: the axis contact is not a single point at xi = 0")
    on_axis = [(z.id, i.k) for z in report.zones for i in z.roots if i.axis.kind == "on_axis"]
    if on_axis:
        raise AbstainError(f"strong stability: roots on the real axis in {on_axis}")
    eps = report.edge_min_im
    cert["edge_min_im"] = eps
    if not eps > SEP_THRESHOLD:
        raise AbstainError("strong stability: Im tau is not bounded below at the grid edge")
    n = report.dimension
    poly = KFactor(Fraction(-n, 2), 0, 0.0, "strongly_stable.polynomial", "contact")
    try:
        table = predict(report, 1, INF)
    except AbstainError:
        table = None
    return FPPrediction(poly, float(eps), n, cert, table)
