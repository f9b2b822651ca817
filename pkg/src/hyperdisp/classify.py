"""Geometric classification of characteristic roots over frequency zones.

Turns a tracked RootField into the facts the decay table consumes: axis
behaviour (separation delta, contact order s and s1), multiplicity sets
(L roots on a set of codimension ell), Hessian class, and the convexity
indices gamma and gamma_0 of the level sets {tau = lambda}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize
from scipy.spatial import cKDTree

from .roots import RootField, continue_root, polish_roots, root_jets, solve_roots_batch
from .symbols import SymbolSpec

AXIS_TOL = 1e-9
SEP_THRESHOLD = 1e-3


class ClassificationError(RuntimeError):
    pass


# -- stability ----------------------------------------------------------------

@dataclass
class StabilityScan:
    passed: bool
    min_im: float
    argmin: tuple
    label: int

    def to_dict(self):
        return {"passed": self.passed, "min_im": self.min_im, "argmin": list(self.argmin), "label": self.label}


def stability_scan(field: RootField, tol=AXIS_TOL, region=None) -> StabilityScan:
    im = field.roots.imag
    allowed = -tol * (1 + np.abs(field.roots))
    if region is not None:
        im = np.where(region[..., None], im, np.inf)
        allowed = np.where(region[..., None], allowed, -np.inf)
    idx = np.unravel_index(np.argmin(im), im.shape)
    passed = bool(np.all(im >= allowed))
    return StabilityScan(passed, float(im[idx]), tuple(float(v) for v in field.xi[idx[:-1]]), int(idx[-1]))


# -- axis behaviour -------------------------------------------------------------

@dataclass
class AxisBehavior:
    kind: str                      # separated | on_axis | meets | unstable | unclassified
    min_im: float
    delta: float | None = None
    s: int | None = None
    s_raw: float | None = None
    c0: float | None = None
    s1: int | None = None
    s1_raw: float | None = None
    c1: float | None = None
    contact: np.ndarray | None = None   # points of Z_k
    isolated: bool = False
    xi0: tuple | None = None
    on_boundary: bool = False
    ell: int | None = None
    low_confidence: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self):
        d = {"kind": self.kind, "min_im": self.min_im}
        for key in ("delta", "s", "s_raw", "c0", "s1", "s1_raw", "c1", "ell"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        if self.kind == "meets":
            d["isolated"] = self.isolated
            d["on_boundary"] = self.on_boundary
            d["contact_points"] = int(len(self.contact)) if self.contact is not None else 0
            if self.xi0 is not None:
                d["xi0"] = list(self.xi0)
        d["low_confidence"] = self.low_confidence
        if self.notes:
            d["notes"] = list(self.notes)
        return d


def _boundary_mask(region):
    inner = ndimage.binary_erosion(region, structure=np.ones((3,) * region.ndim), border_value=1)
    return region & ~inner


def _refined_min_im_on_boundary(field, k, region, factor=4):
    """Min of Im tau_k at points between boundary nodes and their neighbours."""
    bnd = np.argwhere(_boundary_mask(region))
    if bnd.size == 0:
        return np.inf
    steps = field.grid.steps()
    pts, seeds = [], []
    for idx in bnd:
        base = field.xi[tuple(idx)]
        tau = field.roots[tuple(idx)][k]
        for d in range(field.xi.shape[-1]):
            for sgn in (-1, 1):
                for f in range(1, factor):
                    p = base.copy()
                    p[d] += sgn * steps[d] * f / factor
                    pts.append(p)
                    seeds.append(tau)
    pts = np.array(pts)
    seeds = np.array(seeds)
    roots, _ = solve_roots_batch(field.symbol.coefficients(pts))
    pick = roots[np.arange(len(pts)), np.argmin(np.abs(roots - seeds[:, None]), axis=1)]
    return float(pick.imag.min())


def _loglog_fit(x, y):
    sel = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if sel.sum() < 3:
        return None
    lx, ly = np.log(x[sel]), np.log(y[sel])
    A = np.stack([np.ones_like(lx), lx], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    return float(coef[1]), float(coef[0]), float(np.sqrt(np.mean(resid ** 2))), int(sel.sum())


def _refine_minimum(S, xi_start, tau_start, scale):
    """Local minimisation of Im tau along the branch through (xi_start, tau_start)."""
    state = {"tau": complex(tau_start)}

    def f(x):
        roots, _ = solve_roots_batch(S.coefficients(x))
        tau = roots[np.argmin(np.abs(roots - state["tau"]))]
        state["tau"] = tau
        return tau.imag

    res = optimize.minimize(f, np.asarray(xi_start, dtype=float), method="Nelder-Mead",
                            options={"xatol": 1e-10 * scale, "fatol": 1e-16, "maxiter": 400})
    return res.x, float(res.fun), state["tau"]


def _ray_directions(n, count=16):
    if n == 1:
        return np.array([[-1.0], [1.0]])
    if n == 2:
        th = np.linspace(0, 2 * np.pi, count, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    kk = np.arange(2 * count) + 0.5
    z = 1 - kk / count
    ph = np.pi * (1 + 5 ** 0.5) * kk
    return np.stack([np.sqrt(1 - z ** 2) * np.cos(ph), np.sqrt(1 - z ** 2) * np.sin(ph), z], axis=1)


def _ray_contact_samples(S, x0, t0, hi, count=12, span=64.0):
    """Root through (x0, t0) followed along rays out to radius hi by direct solves.

    Returns the radii, the lower envelope of Im tau and the upper envelope of
    |tau - t0| over directions.  Resolves contact orders below the grid step.
    """
    radii = np.geomspace(hi / span, hi, count)
    dirs = _ray_directions(S.dimension)
    prev = np.full(len(dirs), complex(t0))
    im_env, abs_env, sep = [], [], np.inf
    rows = np.arange(len(dirs))
    for r in radii:
        roots, _ = solve_roots_batch(S.coefficients(x0 + r * dirs))
        d = np.abs(roots - prev[:, None])
        pick = np.argmin(d, axis=1)
        prev = roots[rows, pick]
        d_other = np.abs(roots - prev[:, None])
        d_other[rows, pick] = np.inf
        sep = min(sep, float(d_other.min()))
        im_env.append(prev.imag.min())
        abs_env.append(np.abs(prev - t0).max())
    return radii, np.array(im_env), np.array(abs_env), sep


def _components(points, link):
    """Single-linkage clusters of points with linking distance `link`."""
    if len(points) == 0:
        return []
    tree = cKDTree(points)
    pairs = tree.query_pairs(link, output_type="ndarray")
    parent = np.arange(len(points))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    roots = np.array([find(i) for i in range(len(points))])
    return [np.flatnonzero(roots == r) for r in np.unique(roots)]


def axis_behavior(field: RootField, k: int, region=None, axis_tol=AXIS_TOL, sep=SEP_THRESHOLD,
                  fit_window=(2.0, 20.0), refine=True) -> AxisBehavior:
    """Separated / on-axis / meets-the-axis classification of root k over a region."""
    S = field.symbol
    region = np.ones(field.shape, dtype=bool) if region is None else region
    if not region.any():
        raise ClassificationError("empty region")
    tau = field.roots[..., k]
    im = tau.imag
    imr = im[region]
    min_im = float(imr.min())
    tol = axis_tol * (1 + np.abs(tau))
    if min_im > sep:
        delta = min_im
        notes = []
        if refine:
            rmin = _refined_min_im_on_boundary(field, k, region)
            if rmin < delta:
                notes.append(f"boundary refinement lowered inf Im from {delta:.4g} to {rmin:.4g}")
                delta = rmin
        if delta > sep:
            return AxisBehavior("separated", min_im, delta=delta, notes=notes)
    if np.any(im[region] < -tol[region]):
        return AxisBehavior("unstable", min_im, notes=["Im tau < 0 in the region: no decay expected"])
    if np.all(im[region] < tol[region]):
        return AxisBehavior("on_axis", min_im)
    # locate the contact set
    h = field.grid.step
    zmask = region & (im < tol)
    zpts = field.xi[zmask]
    notes = []
    if zpts.shape[0] == 0:
        # interior minima between nodes: refine the lowest nodes
        flat = np.flatnonzero(region.reshape(-1))
        order = flat[np.argsort(im.reshape(-1)[flat])[:8]]
        found = []
        scale = max(1.0, float(np.max(field.norms())))
        for i in order:
            idx = np.unravel_index(i, field.shape)
            x, val, _ = _refine_minimum(S, field.xi[idx], tau[idx], scale)
            if val < 1e3 * axis_tol * (1 + abs(tau[idx])) and np.linalg.norm(x - field.xi[idx]) < 2 * h:
                found.append(x)
        if not found:
            return AxisBehavior("separated", min_im, delta=min_im, low_confidence=True,
                                notes=["inf Im tau below the separation threshold but no axis contact found"])
        zpts = np.array(found)
        zpts = zpts[[c[0] for c in _components(zpts, 0.5 * h)]]
    comps = _components(zpts, 1.5 * h * math.sqrt(S.dimension) + 1e-12)
    isolated = all(np.ptp(zpts[c], axis=0).max(initial=0) <= 2 * h for c in comps)
    bmask = _boundary_mask(region) if not region.all() else np.zeros_like(region)
    on_boundary = False
    if bmask.any():
        btree = cKDTree(field.xi[bmask])
        dists, _ = btree.query(zpts)
        on_boundary = bool(np.all(dists <= 1.5 * h))
    tree = cKDTree(zpts)
    xr = field.xi[region]
    dist, nearest = tree.query(xr)
    lo, hi = fit_window[0] * h, fit_window[1] * h
    win = (dist >= lo) & (dist <= hi)
    fit = _loglog_fit(dist[win], imr[win])
    if fit is None:
        return AxisBehavior("unclassified", min_im, contact=zpts, low_confidence=True,
                            notes=["too few samples to fit the contact order"])
    s_raw, logc, rms, cnt = fit
    low = rms > 0.1
    if isolated and not on_boundary:
        s = max(2, 2 * int(round(s_raw / 2)))
        if abs(s_raw - s) > 0.5:
            notes.append(f"raw contact order {s_raw:.3f} rounded to even {s}")
            low = True
    else:
        s = max(1, int(round(s_raw)))
    ratio = imr[win] / dist[win] ** s
    c0 = float(ratio.min()) if ratio.size else None
    beh = AxisBehavior("meets", min_im, s=s, s_raw=s_raw, c0=c0, contact=zpts, isolated=isolated,
                       on_boundary=on_boundary, low_confidence=low, notes=notes)
    if isolated and len(comps) == 1:
        x0 = zpts[comps[0]].mean(axis=0)
        beh.xi0 = tuple(float(v) for v in x0)
        t0 = tau[zmask][0] if zmask.any() else None
        if t0 is None:
            roots, _ = solve_roots_batch(S.coefficients(x0))
            t0 = roots[np.argmin(roots.imag)]
        rscale = max(1.0, float(np.max(np.abs(field.roots[region]))))
        ray = None
        at_x0 = solve_roots_batch(S.coefficients(x0))[0]
        others = np.delete(at_x0, np.argmin(np.abs(at_x0 - t0)))
        gap0 = float(np.abs(others - t0).min()) if others.size else np.inf
        if not on_boundary and gap0 > 0:
            # shrink the rays until root k stays clear of the other roots
            hi_r = h
            for _ in range(8):
                ray = _ray_contact_samples(S, x0, t0, hi_r)
                if ray[3] > 0.5 * gap0:
                    break
                hi_r /= 2
                ray = None
            if ray is not None:
                rf = _loglog_fit(ray[0], ray[1])
                if rf is not None and rf[2] < 0.05:
                    beh.s_raw = rf[0]
                    beh.s = max(2, 2 * int(round(rf[0] / 2)))
                    beh.c0 = float(np.min(ray[1] / ray[0] ** beh.s))
                    beh.low_confidence = abs(rf[0] - beh.s) > 0.5
                    beh.notes.append("contact order from root solves along rays below the grid step")
        if abs(t0) < 1e-6 * rscale and ray is not None:
            f1 = _loglog_fit(ray[0], ray[2])
            if f1 is not None and f1[2] < 0.05:
                beh.s1_raw = f1[0]
                beh.s1 = max(1, int(round(f1[0])))
                beh.c1 = float(np.max(ray[2] / ray[0] ** beh.s1))
        elif abs(t0) < 1e-6 * rscale:
            d0 = np.linalg.norm(xr - x0, axis=1)
            w2 = (d0 >= lo) & (d0 <= hi)
            f1 = _loglog_fit(d0[w2], np.abs(tau[region][w2]))
            if f1 is not None:
                beh.s1_raw = f1[0]
                beh.s1 = max(1, int(round(f1[0])))
                beh.c1 = float(np.max(np.abs(tau[region][w2]) / d0[w2] ** beh.s1))
    return beh


# -- multiplicities ---------------------------------------------------------------

@dataclass
class MultiplicitySet:
    labels: tuple            # union of clustered labels over the set (labels may swap inside it)
    L: int
    cells: np.ndarray        # node indices (K, ndim)
    points: np.ndarray       # xi at member nodes
    ell: int | None = None
    ell_fit: dict = field(default_factory=dict)
    contains_axis: bool = False
    min_im: float = 0.0
    centre_value: complex = 0j

    def radius_range(self):
        r = np.linalg.norm(self.points, axis=1)
        return float(r.min()), float(r.max())

    def to_dict(self):
        rlo, rhi = self.radius_range()
        return {"labels": [int(v) for v in self.labels], "L": self.L, "cells": int(len(self.cells)),
                "ell": self.ell, "ell_fit": self.ell_fit, "contains_axis": self.contains_axis,
                "min_im": self.min_im, "radius_range": [rlo, rhi],
                "value": [self.centre_value.real, self.centre_value.imag]}


def _participants(roots, rel=1.5):
    """Clustered root labels at each flagged node, with the cluster centre and gap.

    The cluster is the closest pair plus every root within rel times that
    pair's gap of either member.
    """
    m = roots.shape[-1]
    eye = np.eye(m, dtype=bool)
    parts, centres, gaps = [], [], []
    for tau in roots:
        g = np.abs(tau[:, None] - tau[None, :]) + np.where(eye, np.inf, 0)
        k, l = np.unravel_index(np.argmin(g), g.shape)
        extra = np.flatnonzero(np.minimum(g[k], g[l]) <= rel * g[k, l])
        members = sorted({int(k), int(l)} | {int(j) for j in extra})
        parts.append(tuple(members))
        centres.append(tau[members].mean())
        gaps.append(g[k, l])
    return parts, np.array(centres), np.array(gaps)


def detect_multiplicities(field: RootField, axis_tol=AXIS_TOL, region=None) -> list:
    """Multiplicity sets: flagged nodes linked to flagged neighbours with a nearby cluster value.

    Labels are not continuous through a multiplicity, so cells are grouped by
    where the clustered roots sit in the complex plane, not by label.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    flags = field.flags if region is None else field.flags & region
    if field.grid.polar is not None:
        raise ClassificationError("multiplicity detection needs a cartesian grid")
    idx = np.argwhere(flags)
    if idx.size == 0:
        return []
    parts, centres, gaps = _participants(field.roots[flags])
    disp = field.displacement[flags]
    pos = -np.ones(field.shape, dtype=np.int64)
    pos[flags] = np.arange(len(idx))
    rows, cols = [], []
    ndim = flags.ndim
    for off in np.ndindex(*(3,) * ndim):
        off = np.array(off) - 1
        if not off.any():
            continue
        nb = idx + off
        inside = np.all((nb >= 0) & (nb < np.array(field.shape)), axis=1)
        a = np.flatnonzero(inside)
        b = pos[tuple(nb[inside].T)]
        keep = b >= 0
        a, b = a[keep], b[keep]
        tol = 2 * np.maximum(disp[a], disp[b]) + np.maximum(gaps[a], gaps[b])
        close = np.abs(centres[a] - centres[b]) <= tol
        rows.append(a[close])
        cols.append(b[close])
    rows = np.concatenate(rows) if rows else np.zeros(0, int)
    cols = np.concatenate(cols) if cols else np.zeros(0, int)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(idx), len(idx)))
    count, comp = connected_components(graph, directed=False)
    out = []
    for c in range(count):
        sel = np.flatnonzero(comp == c)
        sizes = [len(parts[i]) for i in sel]
        L = int(np.bincount(sizes).argmax())
        labels = tuple(sorted({k for i in sel for k in parts[i]}))
        best = sel[int(np.argmin(gaps[sel]))]
        cluster = [field.roots[tuple(idx[i])][list(parts[i])] for i in sel]
        min_im = float(min(v.imag.min() for v in cluster))
        contains_axis = any(bool(np.all(np.abs(v.imag) < axis_tol * (1 + np.abs(v)))) for v in cluster)
        out.append(MultiplicitySet(labels, L, idx[sel], field.xi[tuple(idx[sel].T)],
                                   contains_axis=contains_axis, min_im=min_im,
                                   centre_value=complex(centres[best])))
    out.sort(key=lambda ms: (float(np.linalg.norm(ms.points, axis=1).min()), ms.labels))
    return out


def multiplicity_core(field: RootField, ms: MultiplicitySet):
    """Cells of the set where the root gap is a local minimum along every axis.

    The flagged band around a multiplicity is several cells thick; its core
    traces the set itself and is what the codimension estimate measures.
    """
    gap = np.full(field.shape, np.inf)
    cells = tuple(ms.cells.T)
    gap[cells] = field.gap[cells]
    core = np.ones(len(ms.cells), dtype=bool)
    for ax in range(gap.ndim):
        for sgn in (-1, 1):
            nb = ms.cells.copy()
            nb[:, ax] += sgn
            inside = (nb[:, ax] >= 0) & (nb[:, ax] < field.shape[ax])
            other = np.full(len(nb), np.inf)
            other[inside] = gap[tuple(nb[inside].T)]
            core &= gap[cells] <= other * (1 + 1e-12)
    if not core.any():
        return ms.points
    return ms.points[core]


def estimate_codimension(points, grid, region=None, eps_range=(2.0, 20.0), samples=8, n=None):
    """Codimension from the slope of log meas(M^eps) against log eps.

    The measure is counted on a lattice of half the grid step covering the
    eps-neighbourhood of the point set.  Returns (ell, diagnostics).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[1] if n is None else n
    h = grid.step
    lo_b = np.array([a for a, _, _ in grid.axes])
    hi_b = np.array([b for _, b, _ in grid.axes])
    edge = float(np.min(np.minimum(points.min(axis=0) - lo_b, hi_b - points.max(axis=0))))
    eps_hi = min(eps_range[1] * h, edge)
    eps_lo = eps_range[0] * h
    if eps_hi <= eps_lo:
        raise ClassificationError("set too close to the grid edge to measure its codimension")
    eps = np.geomspace(eps_lo, eps_hi, samples)
    if np.sum(eps >= eps_lo) < 4 or eps_hi / eps_lo < 3:
        raise ClassificationError("fewer than 4 usable eps values for the codimension fit")
    hh = h / 2
    lo = points.min(axis=0) - eps_hi - hh
    hi = points.max(axis=0) + eps_hi + hh
    axes = [np.arange(a, b + hh, hh) for a, b in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    if region is not None:
        keep = region(mesh)
        mesh = mesh[keep]
    dist, _ = cKDTree(points).query(mesh, distance_upper_bound=eps_hi * 1.0001)
    meas = np.array([np.sum(dist <= e) for e in eps], dtype=float) * hh ** n
    ok = meas > 0
    if ok.sum() < 4:
        raise ClassificationError("fewer than 4 usable eps values for the codimension fit")
    # meas(M^eps) ~ eps^(n - dim M): the codimension is the slope
    A = np.stack([np.ones(ok.sum()), np.log(eps[ok])], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(meas[ok]), rcond=None)
    slope = float(coef[1])
    ell = int(min(max(round(slope), 1), n))
    return ell, {"slope": slope, "eps": [float(e) for e in eps[ok]], "measure": [float(v) for v in meas[ok]]}


# -- Hessian class ----------------------------------------------------------------

@dataclass
class HessianClass:
    kind: str                  # nondegenerate | rank_deficient | degenerate
    rank: int
    M: float | None = None
    C0: float | None = None
    evidence: dict = field(default_factory=dict)

    def to_dict(self):
        d = {"kind": self.kind, "rank": self.rank}
        if self.M is not None:
            d["M"] = self.M
            d["C0"] = self.C0
        d["evidence"] = self.evidence
        return d


def _rank_tolerance(tau, xi):
    r = np.linalg.norm(xi, axis=-1)
    return 1e-8 * (1 + np.abs(tau)) / (1 + r) ** 2


def _far_samples(S, field, k, region, radii_factor=(10.0, 1000.0), count=24, ndir=None):
    """Follow root k along rays from the outermost region nodes to large radii."""
    n = S.dimension
    r = field.norms()
    sel = region & (r > 0)
    xi = field.xi[sel]
    tau = field.roots[..., k][sel]
    rr = r[sel]
    R0 = max(1.0, float(rr.max()))
    if n == 1:
        dirs = np.array([[-1.0], [1.0]])
    elif n == 2:
        th = np.linspace(0, 2 * np.pi, ndir or 16, endpoint=False)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        q = ndir or 32
        kk = np.arange(q) + 0.5
        z = 1 - 2 * kk / q
        ph = np.pi * (1 + 5 ** 0.5) * kk
        dirs = np.stack([np.sqrt(1 - z ** 2) * np.cos(ph), np.sqrt(1 - z ** 2) * np.sin(ph), z], axis=1)
    radii = np.geomspace(radii_factor[0] * R0, radii_factor[1] * R0, count)
    pts, vals = [], []
    for w in dirs:
        align = xi @ w / np.maximum(rr, 1e-300)
        score = np.where(align > 0.98, rr, -1)
        if score.max() <= 0:
            continue
        i = int(np.argmax(score))
        start = xi[i]
        path = np.concatenate([start[None, :], radii[:, None] * w[None, :]])
        vals_w = continue_root(S, path, tau[i], substeps=6)
        pts.append(path[1:])
        vals.append(vals_w[1:])
    return np.array(pts), np.array(vals), radii


def hessian_class(S: SymbolSpec, field: RootField, k: int, region=None, far=False,
                  max_samples=4000, seed=0) -> HessianClass:
    """Nondegenerate (with decay exponent M of |det Hess|) or rank-deficient.

    Jets are evaluated at region nodes; with ``far`` the lower envelope of
    |det Hess tau_k| is also sampled along rays out to large radii and M is
    the fitted power of (1 + |xi|)^-M.
    """
    region = np.ones(field.shape, dtype=bool) if region is None else region
    xi = field.xi[region]
    tau = field.roots[..., k][region]
    if xi.shape[0] > max_samples:
        pick = np.random.default_rng(seed).choice(xi.shape[0], max_samples, replace=False)
        xi, tau = xi[pick], tau[pick]
    tau_p = polish_roots(S, xi, tau)
    _, grad, hess, ok, _ = root_jets(S, xi, tau_p)
    if not np.any(ok):
        raise ClassificationError("no simple-root samples for the Hessian")
    xi, tau_p, hess = xi[ok], tau_p[ok], hess[ok]
    n = S.dimension
    sv = np.linalg.svd(hess, compute_uv=False)
    tol = _rank_tolerance(tau_p, xi)
    ranks = np.sum(sv > tol[:, None], axis=1)
    det = np.abs(np.linalg.det(hess))
    evidence = {"samples": int(len(xi)), "min_rank": int(ranks.min()), "max_rank": int(ranks.max()),
                "min_abs_det": float(det.min()), "skipped_nonsimple": int((~ok).sum())}
    if ranks.min() == n:
        M, C0 = 0.0, float(det.min())
        if far:
            pts, vals, radii = _far_samples(S, field, k, region)
            if pts.size:
                P = pts.reshape(-1, n)
                V = vals.reshape(-1)
                V = polish_roots(S, P, V)
                _, _, hf, okf, _ = root_jets(S, P, V)
                df = np.abs(np.linalg.det(hf)).reshape(pts.shape[:2])
                if not np.all(okf):
                    raise ClassificationError("non-simple root on the far rays")
                env = df.min(axis=0)
                fit = _loglog_fit(1 + radii, env)
                if fit is None or np.any(env <= 0):
                    return HessianClass("degenerate", int(ranks.min()), evidence=evidence)
                M = -fit[0]
                allr = np.concatenate([np.linalg.norm(xi, axis=1), radii])
                alld = np.concatenate([det, env])
                C0 = float(np.min(alld * (1 + allr) ** M))
                evidence["far_radii"] = [float(radii[0]), float(radii[-1])]
                evidence["far_fit_rms"] = fit[2]
        return HessianClass("nondegenerate", n, M=float(M), C0=C0, evidence=evidence)
    rank = int(ranks.min())
    if rank == ranks.max():
        return HessianClass("rank_deficient", rank, evidence=evidence)
    return HessianClass("degenerate", rank, evidence=evidence)


def critical_points(S: SymbolSpec, k_seed_fn, xs, seeds, tol=1e-12, maxiter=50):
    """Solve grad tau(xi) + x = 0 by Newton for each x in xs.

    k_seed_fn(xi) -> complex root to follow; seeds: starting xi per x.
    Returns (points, converged, hessian definiteness flags).
    """
    pts, conv, definite = [], [], []
    for x, s in zip(np.atleast_2d(xs), np.atleast_2d(seeds)):
        xi = np.array(s, dtype=float)
        ok = False
        for _ in range(maxiter):
            tau = polish_roots(S, xi, np.array(k_seed_fn(xi)))
            _, g, H, good, _ = root_jets(S, xi, tau)
            if not good:
                break
            F = g.real + x
            if np.linalg.norm(F) < tol:
                ok = True
                break
            try:
                xi = xi - np.linalg.solve(H.real, F)
            except np.linalg.LinAlgError:
                break
        pts.append(xi)
        conv.append(ok)
        ev = np.linalg.eigvalsh(0.5 * (H.real + H.real.T)) if ok else np.array([0.0])
        definite.append(bool(np.all(ev > 0) or np.all(ev < 0)))
    return np.array(pts), np.array(conv), np.array(definite)


# -- level sets and convexity ----------------------------------------------------------

class RealBranch:
    """tau as a real function: the index-th real root in ascending order."""

    def __init__(self, S: SymbolSpec, index: int, tol=1e-7):
        self.S = S
        self.index = index
        self.tol = tol

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        roots, _ = solve_roots_batch(self.S.coefficients(xi))
        scale = 1 + np.abs(roots)
        real = np.where(np.abs(roots.imag) < self.tol * scale, roots.real, np.nan)
        real = np.sort(real, axis=-1)  # NaN last
        cnt = np.sum(np.isfinite(real), axis=-1)
        idx = np.broadcast_to(self.index if self.index >= 0 else cnt + self.index, cnt.shape)
        valid = (idx >= 0) & (idx < cnt)
        out = np.take_along_axis(real, np.clip(idx, 0, real.shape[-1] - 1)[..., None], axis=-1)[..., 0]
        return np.where(valid, out, np.nan)

    def gradient(self, xi):
        xi = np.asarray(xi, dtype=float)
        tau = self(xi)
        _, g, _, ok, _ = root_jets(self.S, xi, np.asarray(tau, dtype=complex))
        return g.real


def branch_index_for(field: RootField, k, region):
    """Position of root k among the real roots (from the top), read off the field."""
    roots = field.roots[region]
    tk = roots[:, k]
    real = np.abs(roots.imag) < 1e-7 * (1 + np.abs(roots))
    if not np.all(real[:, k]):
        raise ClassificationError(f"root {k} is not real on the region")
    above = np.sum(real & (roots.real > tk.real[:, None] + 1e-12 * (1 + np.abs(tk[:, None]))), axis=1)
    vals, counts = np.unique(above, return_counts=True)
    return -1 - int(vals[np.argmax(counts)])


@dataclass
class CurveSamples:
    lam: float
    points: np.ndarray
    s: np.ndarray | None = None
    h: np.ndarray | None = None
    sigma: np.ndarray | None = None
    normal: np.ndarray | None = None
    tangent: np.ndarray | None = None
    skipped: int = 0
    notes: list = field(default_factory=list)


def _bisect(f, lo, hi, iters=64):
    """Vectorised bisection for f(x) = 0 with sign change on [lo, hi]; NaN where none."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = f(lo)
    fhi = f(hi)
    ok = np.isfinite(flo) & np.isfinite(fhi) & (np.sign(flo) != np.sign(fhi))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return np.where(ok, 0.5 * (lo + hi), np.nan)


def _ray_radii(branch, dirs, lam, rmax=1e6):
    """rho with tau(rho w) = lam for each direction w (NaN when not bracketed)."""
    dirs = np.atleast_2d(dirs)
    f0 = branch(np.zeros_like(dirs)) - lam
    hi = np.full(len(dirs), np.nan)
    r = 1.0
    while r <= rmax and np.any(np.isnan(hi)):
        fr = branch(r * dirs) - lam
        hit = np.isnan(hi) & np.isfinite(fr) & np.isfinite(f0) & (np.sign(fr) != np.sign(f0))
        hi[hit] = r
        r *= 2
    lo = np.where(np.isnan(hi), 0.0, hi / 2)
    lo[hi == 1.0] = 0.0
    hi_f = np.where(np.isnan(hi), 1.0, hi)
    rho = _bisect(lambda x: branch(x[:, None] * dirs) - lam, lo, hi_f)
    return np.where(np.isnan(hi), np.nan, rho)


def _graph(branch, lam, sigma, nu, v, s):
    """h(s) with tau(sigma + s v + h nu) = lam, vectorised over s."""
    base = sigma + s[:, None] * v
    H = np.full(len(s), 0.5 * np.max(np.abs(s)))
    hs = np.full(len(s), np.nan)
    for _ in range(6):
        todo = np.isnan(hs)
        if not todo.any():
            break
        b = base[todo]
        f = lambda h, b=b: branch(b + h[:, None] * nu) - lam
        hs[todo] = _bisect(f, -H[todo], H[todo])
        H *= 2
    return hs


def level_set_trace(S: SymbolSpec, branch, lam, plane=None, sigma=None, count=64, half_width=None,
                    tangent=None):
    """Samples of Sigma_lambda = {tau = lam}.

    Without sigma: radial trace in the plane spanned by the two orthonormal
    vectors in ``plane`` (default the xi1-xi2 plane): for each direction w,
    solve tau(rho w) = lam by bracketed root finding in rho.
    With sigma (a point of Sigma_lambda): local graph h(s) of the curve
    Sigma_lambda in the plane spanned by the normal at sigma and ``tangent``,
    i.e. tau(sigma + s v + h(s) nu) = lam, on 2*count+1 symmetric samples.
    """
    if not callable(branch):
        branch = RealBranch(S, int(branch))
    n = S.dimension
    if sigma is None:
        if n >= 2:
            e1, e2 = (np.eye(n)[:2] if plane is None else np.asarray(plane, dtype=float))
            th = np.linspace(0, 2 * np.pi, count, endpoint=False)
            dirs = np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2
        else:
            dirs = np.array([[-1.0], [1.0]])
        rho = _ray_radii(branch, dirs, lam)
        bad = np.isnan(rho)
        notes = [f"no bracket along direction {np.round(w, 4).tolist()}" for w in dirs[bad]]
        return CurveSamples(lam, rho[~bad, None] * dirs[~bad], skipped=int(bad.sum()), notes=notes)
    sigma = np.asarray(sigma, dtype=float)
    g = branch.gradient(sigma)
    gn = np.linalg.norm(g)
    if not gn > 0:
        raise ClassificationError("gradient vanishes at sigma: Sigma_lambda is not a smooth surface there")
    nu = g / gn
    if tangent is None:
        if n != 2:
            raise ClassificationError("a tangent direction is required for n != 2")
        tangent = np.array([-nu[1], nu[0]])
    v = np.asarray(tangent, dtype=float)
    v = v - (v @ nu) * nu
    v = v / np.linalg.norm(v)
    w = half_width if half_width is not None else 0.2 * max(np.linalg.norm(sigma), 1e-3)
    s = np.linspace(-w, w, 2 * count + 1)
    hs = _graph(branch, lam, sigma, nu, v, s)
    good = np.isfinite(hs)
    pts = sigma + s[good, None] * v + hs[good, None] * nu
    return CurveSamples(lam, pts, s[good], hs[good], sigma, nu, v, int((~good).sum()))


@dataclass
class ContactOrder:
    order: int | None          # None = beyond cap (Infinite flag)
    infinite: bool
    coefficients: list
    low_confidence: bool = False


def contact_order(samples: CurveSamples, sigma=None, cap_order=8, rel_floor=1e-6) -> ContactOrder:
    """Least k >= 2 with a non-negligible k-th Taylor coefficient of h(s)."""
    if samples.s is None or len(samples.s) < 9:
        raise ClassificationError("need >= 9 graph samples around sigma")
    s, h = samples.s, samples.h
    w = np.max(np.abs(s))
    u = s / w
    deg = min(cap_order + 2, len(u) - 1)
    coef = np.polynomial.polynomial.polyfit(u, h, deg)
    resid = h - np.polynomial.polynomial.polyval(u, coef)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    floor = max(rel_floor * w * 1e-2, 10 * rms, 1e-13 * w)
    for k in range(2, cap_order + 1):
        if abs(coef[k]) > floor:
            return ContactOrder(k, False, [float(c) for c in coef[:cap_order + 1]], rms > 1e-8 * w)
    return ContactOrder(None, True, [float(c) for c in coef[:cap_order + 1]], False)


@dataclass
class ContactIndex:
    convex: dict               # lam -> bool
    gamma: float               # max contact order (inf if any infinite)
    gamma0: float
    gamma0_bracket: tuple
    orders: list               # (lam, sigma, plane id, order)
    n: int

    def to_dict(self):
        return {"convex": {f"{k:g}": v for k, v in self.convex.items()}, "gamma": _num(self.gamma),
                "gamma0": _num(self.gamma0), "gamma0_bracket": [_num(v) for v in self.gamma0_bracket],
                "samples": len(self.orders)}

    @property
    def all_convex(self):
        return all(self.convex.values())


def _num(v):
    return "inf" if v == math.inf else v


def _tangent_planes(nu, n, rng, extra=8):
    if n == 2:
        return [np.array([-nu[1], nu[0]])]
    vs = []
    for e in np.eye(n):
        v = e - (e @ nu) * nu
        if np.linalg.norm(v) > 1e-6:
            vs.append(v / np.linalg.norm(v))
    for _ in range(extra):
        v = rng.normal(size=n)
        v = v - (v @ nu) * nu
        vs.append(v / np.linalg.norm(v))
    return vs


def convexity_indices(S: SymbolSpec, branch, lambdas, sigma_count=16, cap_order=8, seed=0,
                      half_width_rel=0.2, graph_count=16, extra_planes=8) -> ContactIndex:
    """Convexity verdict per level set and the indices gamma, gamma_0."""
    if not callable(branch):
        branch = RealBranch(S, int(branch))
    n = S.dimension
    if n < 2:
        raise ClassificationError("convexity indices need n >= 2")
    rng = np.random.default_rng(seed)
    convex, orders = {}, []
    gamma, gamma0 = 2, 2
    for lam in lambdas:
        if n == 2:
            th = np.linspace(0, 2 * np.pi, sigma_count, endpoint=False)
            dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        else:
            kk = np.arange(sigma_count) + 0.5
            z = 1 - 2 * kk / sigma_count
            ph = np.pi * (1 + 5 ** 0.5) * kk
            dirs = np.stack([np.sqrt(1 - z ** 2) * np.cos(ph), np.sqrt(1 - z ** 2) * np.sin(ph), z], axis=1)
            dirs = np.concatenate([np.eye(n), dirs])
        signs = []
        radii = _ray_radii(branch, dirs, lam)
        for w, rho in zip(dirs, radii):
            if np.isnan(rho):
                continue
            sigma = rho * w
            nu = branch.gradient(sigma)
            nu = nu / np.linalg.norm(nu)
            per_plane = []
            for pid, v in enumerate(_tangent_planes(nu, n, rng, extra_planes)):
                cs = level_set_trace(S, branch, lam, sigma=sigma, tangent=v, count=graph_count,
                                     half_width=half_width_rel * np.linalg.norm(sigma))
                co = contact_order(cs, cap_order=cap_order)
                k = math.inf if co.infinite else co.order
                per_plane.append(k)
                orders.append((float(lam), sigma.tolist(), pid, k))
                hmax = np.max(np.abs(cs.h))
                tol = 1e-9 * max(1.0, hmax)
                if np.all(cs.h <= tol):
                    signs.append(-1)
                elif np.all(cs.h >= -tol):
                    signs.append(1)
                else:
                    signs.append(0)
            gamma = max(gamma, max(per_plane))
            gamma0 = max(gamma0, min(per_plane))
        convex[float(lam)] = bool(signs) and (all(sg == -1 for sg in signs) or all(sg == 1 for sg in signs))
    if n == 2 and gamma0 != gamma:
        raise ClassificationError(f"n=2 requires gamma0 == gamma, got {gamma0} and {gamma}")
    bracket = (gamma0, gamma0 if n == 2 else cap_order)
    return ContactIndex(convex, gamma, gamma0, bracket, orders, n)


def radial_derivative_min(S: SymbolSpec, field: RootField, k, region):
    """min |d tau_k / d rho| over region nodes (regularity along rays)."""
    xi = field.xi[region]
    tau = field.roots[..., k][region]
    r = np.linalg.norm(xi, axis=1)
    sel = r > 0
    if not np.any(sel):
        return 0.0
    _, g, _, ok, _ = root_jets(S, xi[sel], tau[sel])
    d = np.abs(np.sum(g * xi[sel], axis=1) / r[sel])
    return float(d[ok].min()) if np.any(ok) else 0.0


# -- zone report ----------------------------------------------------------------

@dataclass
class RootZoneInfo:
    k: int
    axis: AxisBehavior
    hessian: HessianClass | None = None
    contact: ContactIndex | None = None
    regular: bool | None = None
    radial_derivative_min: float | None = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        d = {"k": self.k, "axis": self.axis.to_dict()}
        if self.hessian is not None:
            d["hessian"] = self.hessian.to_dict()
        if self.contact is not None:
            d["contact"] = self.contact.to_dict()
        if self.regular is not None:
            d["regular"] = self.regular
            d["radial_derivative_min"] = self.radial_derivative_min
        if self.notes:
            d["notes"] = list(self.notes)
        return d


@dataclass
class Zone:
    id: str
    kind: str               # large | bounded | multiplicity | contact | excluded
    mask: np.ndarray
    roots: list             # RootZoneInfo per label
    multiplicity: MultiplicitySet | None = None
    radius: tuple = ()
    centre: tuple | None = None

    def to_dict(self):
        r = self.radius
        d = {"id": self.id, "kind": self.kind, "cells": int(self.mask.sum()),
             "radius_range": list(r)}
        if self.centre is not None:
            d["centre"] = list(self.centre)
        if self.multiplicity is not None:
            d["multiplicity"] = self.multiplicity.to_dict()
        d["roots"] = [ri.to_dict() for ri in self.roots]
        return d


@dataclass
class ZoneReport:
    symbol: str
    dimension: int
    order: int
    zones: list
    multiplicities: list
    stability: StabilityScan
    shell_radius: float
    grid: dict
    notes: list = field(default_factory=list)
    contacts: dict = field(default_factory=dict)   # label -> region-wide AxisBehavior (meets)
    edge_min_im: float = math.nan                  # min Im tau over the outer tenth of the grid
    step: float = math.nan

    def zone(self, kind):
        return [z for z in self.zones if z.kind == kind]

    def coverage(self):
        total = sum(z.mask.astype(int) for z in self.zones)
        return total

    def to_dict(self):
        return {"symbol": self.symbol, "dimension": self.dimension, "order": self.order,
                "grid": self.grid, "stability": self.stability.to_dict(),
                "shell_radius": self.shell_radius,
                "multiplicities": [mm.to_dict() for mm in self.multiplicities],
                "contacts": {str(k): b.to_dict() for k, b in self.contacts.items()},
                "edge_min_im": self.edge_min_im,
                "zones": [z.to_dict() for z in self.zones], "notes": list(self.notes)}


def _neighbourhood(field, points, eps):
    dist, _ = cKDTree(points).query(field.xi.reshape(-1, field.xi.shape[-1]))
    return (dist <= eps).reshape(field.shape)


def _set_distance(a, b):
    d, _ = cKDTree(a).query(b)
    return float(d.min())


def _merge_contact(local, glob, field, mask):
    """Use the region-wide contact fit when the zone holds part of its contact set."""
    if glob is None or glob.kind != "meets" or local.kind not in ("meets", "unclassified"):
        return local
    inside, _ = cKDTree(field.xi[mask]).query(glob.contact)
    if not np.any(inside <= field.grid.step):
        return local
    merged = AxisBehavior("meets", local.min_im, s=glob.s, s_raw=glob.s_raw, c0=glob.c0, s1=glob.s1,
                          s1_raw=glob.s1_raw, c1=glob.c1, contact=glob.contact, isolated=glob.isolated,
                          xi0=glob.xi0, on_boundary=glob.on_boundary, ell=glob.ell,
                          low_confidence=glob.low_confidence,
                          notes=list(glob.notes) + ["contact order fitted over the whole region"])
    return merged


def _classify_root(S, field, k, mask, zone_kind, lambdas_fn, far, glob=None):
    beh = _merge_contact(axis_behavior(field, k, mask), glob, field, mask)
    info = RootZoneInfo(k, beh)
    if beh.kind == "on_axis":
        try:
            info.hessian = hessian_class(S, field, k, mask, far=far)
        except ClassificationError as exc:
            info.notes.append(str(exc))
        need_convex = info.hessian is not None and info.hessian.kind != "nondegenerate" and S.dimension >= 2
        if need_convex:
            try:
                idx = branch_index_for(field, k, mask)
                info.contact = convexity_indices(S, RealBranch(S, idx), lambdas_fn(field, k, mask),
                                                 sigma_count=8, graph_count=8, extra_planes=4)
            except (ClassificationError, ValueError) as exc:
                info.notes.append(f"convexity: {exc}")
        if zone_kind == "bounded" and S.dimension >= 1:
            dmin = radial_derivative_min(S, field, k, mask)
            info.radial_derivative_min = dmin
            info.regular = dmin >= 1e-3
    return info


def _default_lambdas(field, k, mask):
    vals = field.roots[..., k][mask].real
    sign = 1.0 if np.median(vals) >= 0 else -1.0
    vals = np.abs(vals[sign * vals > 0])
    if vals.size == 0:
        return [sign]
    lo, hi = np.quantile(vals, [0.5, 0.9])
    return sorted({sign * float(np.round(lo, 6)), sign * float(np.round(hi, 6))})


def build_zone_report(S: SymbolSpec, field: RootField, region=None, far=True, eps_cap=0.25,
                      lambdas_fn=None) -> ZoneReport:
    """Partition the grid into zones and classify every root in each zone.

    Zones are claimed in order: multiplicity neighbourhoods, axis-contact
    neighbourhoods, the outer shell |xi| >= M (M just beyond every special
    set; 0 when there are none) and the bounded remainder.  Nodes outside
    ``region`` form an excluded zone.
    """
    lambdas_fn = lambdas_fn or _default_lambdas
    region = np.ones(field.shape, dtype=bool) if region is None else region
    h = field.grid.step
    n = S.dimension
    notes = []
    stab = stability_scan(field, region=region)
    msets = detect_multiplicities(field, region=region)
    for ms in msets:
        try:
            ms.ell, ms.ell_fit = estimate_codimension(multiplicity_core(field, ms), field.grid)
        except ClassificationError as exc:
            ms.ell = None
            ms.ell_fit = {"error": str(exc)}
    # axis contact sets per root over the whole region
    glob = {k: axis_behavior(field, k, region, refine=False) for k in range(field.order)}
    contacts = [(k, beh) for k, beh in glob.items() if beh.kind == "meets" and beh.contact is not None]
    inside = None
    if not region.all():
        keep = field.xi[region]
        tree = cKDTree(keep)
        inside = lambda pts: tree.query(pts)[0] <= 0.5 * h * math.sqrt(n)
    for k, beh in contacts:
        try:
            beh.ell, fit = estimate_codimension(beh.contact, field.grid, region=inside)
        except ClassificationError as exc:
            beh.notes.append(f"codimension: {exc}")
    special = [("multiplicity", ms.points, ms) for ms in msets]
    special += [("contact", beh.contact, (k, beh)) for k, beh in contacts]
    eps = []
    for i, (_, pts, _) in enumerate(special):
        others = [p for j, (_, p, _) in enumerate(special) if j != i]
        e = eps_cap
        for p in others:
            d = _set_distance(pts, p)
            if d > 0:
                e = min(e, 0.45 * d)
        eps.append(max(e, 3 * h))
    claimed = ~region
    zones = []
    if (~region).any():
        zones.append(Zone("excluded", "excluded", ~region, [], radius=()))
    r = field.norms()
    shell = 0.0
    counter = {"multiplicity": 0, "contact": 0}
    for (kind, pts, obj), e in zip(special, eps):
        mask = _neighbourhood(field, pts, e) & ~claimed
        # contact sets are grouped by their point set: merge identical ones
        if not mask.any():
            continue
        claimed |= mask
        shell = max(shell, float(np.linalg.norm(pts, axis=1).max()) + e)
        counter[kind] += 1
        zid = f"{kind}-{counter[kind]}"
        centre = tuple(float(v) for v in np.mean(pts, axis=0)) if len(pts) else None
        infos = [_classify_root(S, field, k, mask, "bounded", lambdas_fn, False, glob[k]) for k in range(field.order)]
        zones.append(Zone(zid, kind, mask, infos, multiplicity=obj if kind == "multiplicity" else None,
                          radius=(float(r[mask].min()), float(r[mask].max())), centre=centre))
    large = region & ~claimed & (r >= shell)
    if large.any():
        claimed |= large
        infos = [_classify_root(S, field, k, large, "large", lambdas_fn, far, glob[k]) for k in range(field.order)]
        zones.append(Zone("large-1", "large", large, infos, radius=(float(r[large].min()), float(r[large].max()))))
    rest = region & ~claimed
    if rest.any():
        infos = [_classify_root(S, field, k, rest, "bounded", lambdas_fn, False, glob[k]) for k in range(field.order)]
        zones.append(Zone("bounded-1", "bounded", rest, infos, radius=(float(r[rest].min()), float(r[rest].max()))))
        claimed |= rest
    rmax = float(r[region].max())
    edge = region & (r >= 0.9 * rmax)
    edge_min_im = float(field.roots[edge].imag.min())
    rep = ZoneReport(S.name, n, S.order, zones, msets, stab, shell,
                     field.grid.to_dict(), notes, contacts={k: beh for k, beh in contacts},
                     edge_min_im=edge_min_im, step=h)
    cov = rep.coverage()
    if not np.all(cov == 1):
        raise ClassificationError("zone cover violated: some cells are in zero or several zones")
    return rep
