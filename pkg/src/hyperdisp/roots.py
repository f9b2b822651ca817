"""Characteristic roots: solving, tracking over frequency grids, pairing, jets."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .symbols import SymbolSpec, TauPolynomial, discriminant_threshold, sylvester_discriminant

EPS = np.finfo(float).eps


class RootSolveError(RuntimeError):
    def __init__(self, msg, roots=None, residuals=None):
        super().__init__(msg)
        self.roots = roots
        self.residuals = residuals


class JetError(ValueError):
    pass


# -- polynomial root solving -------------------------------------------------

def _horner(coeffs, z):
    """p(z) and p'(z) for batched coefficients (B, m+1) and points (B, k)."""
    p = np.ones_like(z)
    dp = np.zeros_like(z)
    for j in range(1, coeffs.shape[-1]):
        dp = dp * z + p
        p = p * z + coeffs[:, j:j + 1]
    return p, dp


def root_bound(coeffs):
    """2 max(1, max_j |c_j|^(1/j)): every root lies in this disc."""
    coeffs = np.asarray(coeffs, dtype=complex)
    m = coeffs.shape[-1] - 1
    j = np.arange(1, m + 1)
    return 2.0 * np.maximum(1.0, np.max(np.abs(coeffs[..., 1:]) ** (1.0 / j), axis=-1))


def residual_scale(coeffs, roots):
    """1 + sum_j |c_j| |rho|^(m-j): the natural size of L(rho)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    m = coeffs.shape[-1] - 1
    r = np.abs(roots)[..., None]
    powers = r ** np.arange(m, -1, -1)
    return 1.0 + np.sum(np.abs(coeffs)[..., None, :] * powers, axis=-1)


def _aberth(coeffs, z, maxiter):
    B, m = z.shape
    active = np.ones(B, dtype=bool)
    eye = np.eye(m, dtype=bool)
    for _ in range(maxiter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        za = z[idx]
        p, dp = _horner(coeffs[idx], za)
        diff = za[:, :, None] - za[:, None, :]
        diff[:, eye] = 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / diff
            inv[:, eye] = 0.0
            s = inv.sum(axis=2)
            w = p / dp
            step = w / (1.0 - w * s)
        bad = ~np.isfinite(step)
        step[bad] = 0.0
        za = za - step
        z[idx] = za
        done = np.all(np.abs(step) <= 4 * EPS * np.maximum(np.abs(za), 1e-300), axis=1) | np.all(p == 0, axis=1)
        active[idx[done]] = False
    return z, active


def _separation(z):
    """Distance from each root to its nearest neighbour, (B, m)."""
    d = np.abs(z[:, :, None] - z[:, None, :])
    d[:, np.arange(z.shape[1]), np.arange(z.shape[1])] = np.inf
    return d.min(axis=2)


def _newton_polish(coeffs, z, steps=2):
    for _ in range(steps):
        p, dp = _horner(coeffs, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = p / dp
        ok = np.isfinite(step) & (np.abs(step) < 1e-3 * (1 + np.abs(z)))
        # Newton on one member of a cluster moves it alone and spoils the cluster mean
        ok &= _separation(z) > 1e-3 * (1 + np.abs(z))
        z = np.where(ok, z - np.where(ok, step, 0), z)
    return z


def solve_roots_batch(coeffs, warm=None, maxiter=200, tol=1e-9, strict=False):
    """Roots of monic polynomials with coefficients (..., m+1).

    Aberth simultaneous iteration from a circle inside the root bound, or
    from ``warm``, followed by Newton polishing.  Nodes that fail to
    converge within ``maxiter`` are re-seeded from companion eigenvalues.
    Returns (roots, residuals) with residuals relative to ``residual_scale``.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    shape = coeffs.shape[:-1]
    m = coeffs.shape[-1] - 1
    c = coeffs.reshape(-1, m + 1)
    if not np.all(c[:, 0] == 1):
        raise ValueError("polynomials must be monic")
    B = c.shape[0]
    if m == 1:
        roots = -c[:, 1:2]
        return roots.reshape(shape + (1,)), np.zeros(shape)
    if warm is not None:
        z = np.array(np.broadcast_to(np.asarray(warm, dtype=complex), shape + (m,))).reshape(B, m)
        z = z + 1e-14 * (1 + np.abs(z)) * np.exp(1j * (0.7 + np.arange(m)))
    else:
        centre = -c[:, 1] / m
        rad = 0.5 * root_bound(c) + np.abs(centre)
        ang = 2 * np.pi * np.arange(m) / m + 0.4
        z = centre[:, None] + rad[:, None] * np.exp(1j * ang)[None, :]
    z, active = _aberth(c, z, maxiter)
    if np.any(active):
        idx = np.flatnonzero(active)
        comp = np.zeros((idx.size, m, m), dtype=complex)
        comp[:, 0, :] = -c[idx, 1:]
        comp[:, 1:, :-1] = np.eye(m - 1)
        z0 = np.linalg.eigvals(comp)
        z1, still = _aberth(c[idx], z0.copy(), 20)
        # near multiple roots Aberth can stall; the eigenvalues keep the cluster means exact
        z[idx] = np.where(still[:, None], z0, z1)
    z = _newton_polish(c, z)
    p, _ = _horner(c, z)
    res = np.max(np.abs(p) / residual_scale(c, z), axis=1)
    if warm is not None:
        z = _match_to(z, np.array(np.broadcast_to(warm, shape + (m,))).reshape(B, m))
    if strict and np.any(res > tol):
        raise RootSolveError("root solve did not converge", z.reshape(shape + (m,)), res.reshape(shape))
    return z.reshape(shape + (m,)), res.reshape(shape)


def solve_roots(p, warm=None, maxiter=200, tol=1e-9):
    """Roots of a single monic polynomial (TauPolynomial or coefficient vector)."""
    c = p.coefficients if isinstance(p, TauPolynomial) else np.asarray(p, dtype=complex)
    if c.ndim != 1:
        raise ValueError("solve_roots takes a single polynomial")
    z, res = solve_roots_batch(c, warm=warm, maxiter=maxiter)
    if res > tol:
        raise RootSolveError(f"root solve residual {float(res):.3g} above {tol:g}", z, res)
    return z


# -- labeling ----------------------------------------------------------------

@lru_cache(maxsize=None)
def _perms(m):
    return np.array(list(itertools.permutations(range(m))), dtype=int)


def _match_to(cand, ref):
    """Reorder cand (B, m) to minimise sum |cand[perm] - ref| per row.

    Exhaustive over permutations for m <= 6 (ties go to the first
    permutation in lexicographic order), Hungarian assignment above.
    """
    B, m = cand.shape
    if m == 1 or B == 0:
        return cand.copy()
    if m <= 6:
        perms = _perms(m)
        out = np.empty_like(cand)
        chunk = max(1, 2_000_000 // (len(perms) * m))
        for s in range(0, B, chunk):
            cb, rb = cand[s:s + chunk], ref[s:s + chunk]
            dist = np.abs(cb[:, None, :] - rb[:, :, None])  # [b, ref k, cand l]
            cost = dist[:, np.arange(m)[None, :], perms].sum(axis=2)  # [b, perm]
            best = perms[np.argmin(cost, axis=1)]
            out[s:s + chunk] = np.take_along_axis(cb, best, axis=1)
        return out
    out = np.empty_like(cand)
    for b in range(B):
        cost = np.abs(ref[b][:, None] - cand[b][None, :])
        _, col = linear_sum_assignment(cost)
        out[b] = cand[b][col]
    return out


def sort_roots(roots):
    """Deterministic order: ascending real part, then imaginary part."""
    roots = np.asarray(roots)
    key = np.round(roots.real, 12) * 1.0
    order = np.lexsort((roots.imag, key), axis=-1)
    return np.take_along_axis(roots, order, axis=-1)


# -- grids -------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyGrid:
    """Cartesian grid of frequencies, or polar (radius x direction) samples."""

    axes: tuple = ()
    polar: tuple | None = None  # (rmin, rmax, nr, ndir, dimension)

    def __post_init__(self):
        if self.polar is None:
            if not self.axes:
                raise ValueError("grid needs at least one axis")
            axes = tuple((float(a), float(b), int(c)) for a, b, c in self.axes)
            for a, b, c in axes:
                if c < 2 or not b > a:
                    raise ValueError(f"bad axis ({a}, {b}, {c}): need count >= 2 and max > min")
            object.__setattr__(self, "axes", axes)
        else:
            rmin, rmax, nr, ndir, n = self.polar
            if nr < 2 or ndir < 1 or not rmax > rmin or rmin < 0:
                raise ValueError("bad polar grid")

    @classmethod
    def cube(cls, n, radius, count):
        return cls(tuple((-radius, radius, count) for _ in range(n)))

    @classmethod
    def radial(cls, n, rmin, rmax, nr, ndir):
        return cls(polar=(float(rmin), float(rmax), int(nr), int(ndir), int(n)))

    @classmethod
    def from_dict(cls, d):
        if "polar" in d:
            p = d["polar"]
            return cls.radial(p["dimension"], p["rmin"], p["rmax"], p["nr"], p["ndir"])
        return cls(tuple(tuple(a) for a in d["axes"]))

    def to_dict(self):
        if self.polar is not None:
            rmin, rmax, nr, ndir, n = self.polar
            return {"polar": {"rmin": rmin, "rmax": rmax, "nr": nr, "ndir": ndir, "dimension": n}}
        return {"axes": [list(a) for a in self.axes]}

    @property
    def dimension(self):
        return self.polar[4] if self.polar is not None else len(self.axes)

    @property
    def shape(self):
        if self.polar is not None:
            return (self.polar[2], len(self.directions()))
        return tuple(c for _, _, c in self.axes)

    @property
    def step(self):
        if self.polar is not None:
            rmin, rmax, nr = self.polar[:3]
            return (rmax - rmin) / (nr - 1)
        return min((b - a) / (c - 1) for a, b, c in self.axes)

    def steps(self):
        if self.polar is not None:
            return np.array([self.step])
        return np.array([(b - a) / (c - 1) for a, b, c in self.axes])

    def coordinates(self):
        return [np.linspace(a, b, c) for a, b, c in self.axes]

    def directions(self):
        rmin, rmax, nr, ndir, n = self.polar
        if n == 1:
            return np.array([[-1.0], [1.0]])
        if n == 2:
            th = 2 * np.pi * np.arange(ndir) / ndir
            return np.stack([np.cos(th), np.sin(th)], axis=-1)
        k = np.arange(ndir) + 0.5
        z = 1 - 2 * k / ndir
        phi = np.pi * (1 + 5 ** 0.5) * k
        rr = np.sqrt(1 - z ** 2)
        return np.stack([rr * np.cos(phi), rr * np.sin(phi), z], axis=-1)

    def points(self):
        """Array of shape self.shape + (n,)."""
        if self.polar is not None:
            rmin, rmax, nr = self.polar[:3]
            r = np.linspace(rmin, rmax, nr)
            return r[:, None, None] * self.directions()[None, :, :]
        mesh = np.meshgrid(*self.coordinates(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def cell_volume(self):
        return float(np.prod(self.steps()))


# -- tracking ----------------------------------------------------------------

@dataclass
class RootField:
    grid: FrequencyGrid
    xi: np.ndarray          # shape + (n,)
    roots: np.ndarray       # shape + (m,), consistently labeled
    disc: np.ndarray        # shape, |discriminant|
    disc_threshold: np.ndarray
    residuals: np.ndarray   # shape
    flags: np.ndarray       # shape, bool: near a multiplicity
    gap: np.ndarray         # shape, min pairwise root distance
    displacement: np.ndarray  # shape, max over roots of the distance to the nearest neighbour root
    root_displacement: np.ndarray | None = None  # shape + (m,)
    symbol: SymbolSpec | None = None
    pairing: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def order(self):
        return self.roots.shape[-1]

    @property
    def shape(self):
        return self.roots.shape[:-1]

    def norms(self):
        return np.linalg.norm(self.xi, axis=-1)

    def sorted_roots(self):
        return sort_roots(self.roots)

    def to_csv(self, path):
        n = self.xi.shape[-1]
        xi = self.xi.reshape(-1, n)
        roots = self.roots.reshape(-1, self.order)
        disc = self.disc.reshape(-1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node"] + [f"xi{d + 1}" for d in range(n)] + ["k", "re_tau", "im_tau", "abs_disc"])
            for i in range(xi.shape[0]):
                for k in range(self.order):
                    w.writerow([i] + [f"{v:.17g}" for v in xi[i]] + [k + 1, f"{roots[i, k].real:.17g}",
                               f"{roots[i, k].imag:.17g}", f"{disc[i]:.17g}"])


def _min_gap(roots):
    m = roots.shape[-1]
    if m < 2:
        return np.full(roots.shape[:-1], np.inf)
    d = np.abs(roots[..., :, None] - roots[..., None, :])
    d = d + np.where(np.eye(m, dtype=bool), np.inf, 0.0)
    return d.min(axis=(-1, -2))


def _sweep(cand, axis, start, flags):
    """Label cand in place along `axis`, outward from index `start`.

    Other axes are handled in parallel (slab-wise).
    """
    cand = np.moveaxis(cand, axis, 0)
    fl = np.moveaxis(flags, axis, 0)
    N = cand.shape[0]
    m = cand.shape[-1]
    for direction in (1, -1):
        prev2 = None
        i = start + direction
        prev = cand[start]
        while 0 <= i < N:
            ref = prev
            if prev2 is not None:
                ok = ~(fl[i - direction] | fl[i - 2 * direction])
                ref = np.where(ok[..., None], 2 * prev - prev2, prev)
            flat = cand[i].reshape(-1, m)
            cand[i] = _match_to(flat, ref.reshape(-1, m)).reshape(cand[i].shape)
            prev2, prev = prev, cand[i]
            i += direction
    return np.moveaxis(cand, 0, axis)


def track_field(S: SymbolSpec, g: FrequencyGrid, axis_order=None, gap_factor=2.0,
                disc_rel=1e-10, tol=1e-9) -> RootField:
    """Solve at every node and label the roots continuously across the grid.

    Roots are computed cold at each node (so the root multiset does not
    depend on the sweep) and sorted; labels are then propagated along
    ``axis_order[0]`` from the middle of the grid (seed sweep) and extended
    slab-wise along the remaining axes.
    """
    if g.dimension != S.dimension:
        raise ValueError("grid and symbol dimensions differ")
    xi = g.points()
    coeffs = S.coefficients(xi)
    roots, res = solve_roots_batch(coeffs)
    if np.any(res > tol):
        bad = int(np.sum(res > tol))
        raise RootSolveError(f"{bad} nodes failed residual certification", roots, res)
    roots = sort_roots(roots)
    disc = np.abs(sylvester_discriminant(coeffs))
    thr = discriminant_threshold(S, xi, disc_rel)
    gap = _min_gap(roots)
    shape = roots.shape[:-1]
    m = roots.shape[-1]
    # per-root displacement: distance from tau_k to the nearest root at each neighbour
    rdisp = np.zeros(roots.shape)
    for ax in range(len(shape)):
        a = np.take(roots, np.arange(1, shape[ax]), axis=ax)
        b = np.take(roots, np.arange(0, shape[ax] - 1), axis=ax)
        d = np.abs(a[..., :, None] - b[..., None, :])
        pad_lo = [(0, 0)] * (len(shape) + 1)
        pad_hi = [(0, 0)] * (len(shape) + 1)
        pad_lo[ax] = (1, 0)
        pad_hi[ax] = (0, 1)
        rdisp = np.maximum(rdisp, np.pad(d.min(axis=-1), pad_lo))
        rdisp = np.maximum(rdisp, np.pad(d.min(axis=-2), pad_hi))
    disp = rdisp.max(axis=-1)
    # a pair is unresolved when its gap is below gap_factor times the larger of its displacements
    pair_gap = np.abs(roots[..., :, None] - roots[..., None, :]) + np.where(np.eye(m, dtype=bool), np.inf, 0.0)
    pair_disp = np.maximum(rdisp[..., :, None], rdisp[..., None, :])
    flags = (disc < thr) | np.any(pair_gap < gap_factor * pair_disp, axis=(-1, -2))
    if g.polar is not None:
        # label along the radius for each direction
        roots = _sweep(roots.copy(), 0, 0, flags)
    else:
        axis_order = list(axis_order) if axis_order is not None else list(range(len(shape)))
        labeled = roots.copy()
        # seed line along axis_order[0] with the other axes at their middle
        mids = [s // 2 for s in shape]
        sl = [slice(None)] * len(shape)
        done_axes = []
        for step, ax in enumerate(axis_order):
            done_axes.append(ax)
            sl = tuple(slice(None) if a in done_axes else mids[a] for a in range(len(shape)))
            sub = labeled[sl]
            subflags = flags[sl]
            pos = sorted(done_axes).index(ax)
            labeled[sl] = _sweep(sub.copy(), pos, mids[ax], subflags)
        roots = labeled
    return RootField(grid=g, xi=xi, roots=roots, disc=disc, disc_threshold=thr, residuals=res,
                     flags=flags, gap=gap, displacement=disp, root_displacement=rdisp, symbol=S)


# -- pairing with principal roots ---------------------------------------------

class PairingError(RuntimeError):
    pass


@dataclass
class PairingReport:
    table: tuple | None        # label k -> principal label, if uniform over the outer region
    per_node: np.ndarray       # outer nodes x m
    sup_deviation: float
    deviation_by_radius: list  # (radius, max deviation) over the outer band
    bounded: bool


def pair_principal(field: RootField, S: SymbolSpec, outer_fraction=0.5, growth_tol=0.1) -> PairingReport:
    """Pair each tracked root with a principal root on the large-|xi| nodes.

    Principal roots are sorted by (Re, Im); the pairing minimises the total
    distance at each node.  Boundedness is checked by comparing the maximal
    deviation on the outer 20% radial band against the band's inner part.
    """
    r = field.norms()
    rmax = r.max()
    outer = r >= (1 - outer_fraction) * rmax
    outer &= r > 0
    xi = field.xi[outer]
    tau = field.roots[outer]
    phi, _ = solve_roots_batch(S.principal_coefficients(xi))
    phi = sort_roots(phi)
    matched = _match_to(phi, tau)  # matched[:, k] is the principal root paired with tau_k
    dev = np.abs(tau - matched).max(axis=-1)
    # recover principal labels
    lab = np.argmin(np.abs(matched[:, :, None] - phi[:, None, :]), axis=-1)
    uniq = np.unique(lab, axis=0)
    table = tuple(int(v) for v in uniq[0]) if uniq.shape[0] == 1 else None
    band = r[outer] >= 0.8 * rmax
    edges = np.linspace(0.8 * rmax, rmax, 6)
    prof = []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = band & (r[outer] >= a) & (r[outer] <= b)
        if np.any(sel):
            prof.append((float(0.5 * (a + b)), float(dev[sel].max())))
    bounded = True
    if len(prof) >= 2:
        first, last = prof[0][1], prof[-1][1]
        bounded = last <= first * (1 + growth_tol) + 1e-9
    if not bounded:
        raise PairingError("deviation |tau_k - phi_k| grows over the outer band: "
                           "bounded pairing with principal roots fails")
    return PairingReport(table, lab, float(dev.max()), prof, bounded)


# -- jets --------------------------------------------------------------------

@dataclass(frozen=True)
class RootJet:
    value: complex
    gradient: np.ndarray
    hessian: np.ndarray
    dtau_L: complex = 0j


def _tau_powers(tau, m):
    k = np.arange(m, -1, -1)  # exponent of tau for coefficient j
    t = tau[..., None]
    p0 = np.where(k >= 0, t ** np.maximum(k, 0), 0)
    p1 = np.where(k >= 1, k * t ** np.maximum(k - 1, 0), 0)
    p2 = np.where(k >= 2, k * (k - 1) * t ** np.maximum(k - 2, 0), 0)
    return p0, p1, p2


def polish_roots(S: SymbolSpec, xi, tau, steps=3):
    """Newton steps on L(., xi) from tau (batched)."""
    c = S.coefficients(xi)
    shape = np.shape(tau)
    cc = c.reshape(-1, c.shape[-1])
    z = np.asarray(tau, dtype=complex).reshape(-1, 1)
    z = _newton_polish(cc, z, steps)
    return z.reshape(shape)


def root_jets(S: SymbolSpec, xi, tau, rel_threshold=1e-8):
    """Batched value/gradient/Hessian of the implicit root through (xi, tau).

    Returns (tau, grad (..., n), hess (..., n, n), ok) where ok marks simple
    roots with |dL/dtau| above rel_threshold times its natural scale.
    """
    xi = S._points(xi)
    tau = np.asarray(tau, dtype=complex)
    m = S.order
    c = S.coefficients(xi)
    g = S.coefficient_gradients(xi)
    h = S.coefficient_hessians(xi)
    p0, p1, p2 = _tau_powers(tau, m)
    Lt = np.sum(c * p1, axis=-1)
    Ltt = np.sum(c * p2, axis=-1)
    Lx = np.einsum("...jd,...j->...d", g, p0)
    Lxt = np.einsum("...jd,...j->...d", g, p1)
    Lxx = np.einsum("...jab,...j->...ab", h, p0)
    rho = np.maximum(1.0, np.abs(tau))[..., None]
    k = np.arange(m, -1, -1)
    scale = np.sum(np.abs(c) * np.maximum(k, 0) * rho ** np.maximum(k - 1, 0), axis=-1)
    ok = np.abs(Lt) >= rel_threshold * scale
    Lt_safe = np.where(ok, Lt, 1.0)
    grad = -Lx / Lt_safe[..., None]
    cross = Lxt[..., :, None] * grad[..., None, :]
    hess = -(Lxx + cross + np.swapaxes(cross, -1, -2)
             + Ltt[..., None, None] * grad[..., :, None] * grad[..., None, :]) / Lt_safe[..., None, None]
    return tau, grad, hess, ok, Lt


def root_jet(S: SymbolSpec, xi, k=None, seed=None) -> RootJet:
    """Jet of the root nearest ``seed`` at the point xi (after Newton polishing)."""
    xi = S._points(xi)
    if xi.ndim != 1:
        raise ValueError("root_jet takes a single point")
    if seed is None:
        roots, _ = solve_roots_batch(S.coefficients(xi))
        if k is None:
            raise ValueError("need a seed or a label")
        seed = sort_roots(roots)[k]
    tau = complex(polish_roots(S, xi, np.array(seed)))
    tau_arr, grad, hess, ok, Lt = root_jets(S, xi, np.array(tau))
    if not bool(ok):
        raise JetError(f"root {tau:.6g} is not simple at xi={xi}: |dL/dtau| = {abs(complex(Lt)):.3g}")
    return RootJet(tau, np.asarray(grad), np.asarray(hess), complex(Lt))


def continue_root(S: SymbolSpec, path, seed, substeps=4):
    """Follow one root along a polyline of points, starting from ``seed``.

    Returns the root values at the path points.  Each step picks the root
    nearest the linearly extrapolated value.
    """
    path = S._points(path)
    out = np.empty(path.shape[0], dtype=complex)
    cur = complex(seed)
    prev = None
    last = path[0]
    c0 = S.coefficients(last)
    roots, _ = solve_roots_batch(c0)
    cur = roots[np.argmin(np.abs(roots - cur))]
    out[0] = cur
    for i in range(1, path.shape[0]):
        for s in range(1, substeps + 1):
            pt = last + (path[i] - last) * s / substeps
            roots, _ = solve_roots_batch(S.coefficients(pt))
            guess = cur if prev is None else 2 * cur - prev
            nxt = roots[np.argmin(np.abs(roots - guess))]
            prev, cur = cur, nxt
        out[i] = cur
        last = path[i]
    return out
