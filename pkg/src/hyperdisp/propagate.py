"""Fourier-side propagators, kernel synthesis, and decay-exponent fits.

The state vector is X = (u^, D_t u^, ..., D_t^(m-1) u^) with D_t = -i d/dt,
so D_t X = C(xi) X for the companion matrix C and X(t) = exp(i t C) X(0).
The propagator E_j with d_t^l E_j(0) = delta_lj is i^(-j) Phi_(0,j).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from scipy import stats

from .expm import expm_batch
from .symbols import SymbolSpec


class PropagatorOverflow(FloatingPointError):
    pass


class AliasingError(RuntimeError):
    pass


def worker_count():
    value = os.environ.get("HYPERDISP_THREADS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            pass
    return os.cpu_count() or 1


def companion(S: SymbolSpec, xi):
    """Companion matrix C(xi), shape (..., m, m); spectrum = roots of L(., xi)."""
    c = S.coefficients(xi)
    return companion_from_coefficients(c)


def companion_from_coefficients(c):
    c = np.asarray(c, dtype=complex)
    m = c.shape[-1] - 1
    C = np.zeros(c.shape[:-1] + (m, m), dtype=complex)
    for i in range(m - 1):
        C[..., i, i + 1] = 1.0
    # last row: -(coefficient of tau^l), l = 0..m-1; coefficient of tau^l sits at index m-l
    C[..., m - 1, :] = -c[..., ::-1][..., :m]
    return C


def _balance_scale(c):
    m = c.shape[-1] - 1
    j = np.arange(1, m + 1)
    return np.maximum(1.0, np.max(np.abs(c[..., 1:]) ** (1.0 / j), axis=-1))


def propagator_from_coefficients(c, t, overflow=1e150):
    """exp(i t C) for batched coefficients, using the balanced companion.

    With D = diag(1, rho, ..., rho^(m-1)) the matrix D^-1 C D has entries of
    size O(rho), which keeps the Pade scaling well conditioned at large xi.
    """
    c = np.asarray(c, dtype=complex)
    m = c.shape[-1] - 1
    if t == 0:
        return np.broadcast_to(np.eye(m, dtype=complex), c.shape[:-1] + (m, m)).copy()
    rho = _balance_scale(c)
    powers = rho[..., None] ** np.arange(m)
    C = companion_from_coefficients(c)
    Cb = C * powers[..., None, :] / powers[..., :, None]
    with np.errstate(over="raise", invalid="raise"):
        try:
            Eb = expm_batch(1j * t * Cb)
        except FloatingPointError as exc:
            raise PropagatorOverflow("matrix exponential overflowed: the symbol violates the "
                                     "stability condition (see stability_scan)") from exc
    Phi = Eb * powers[..., :, None] / powers[..., None, :]
    if not np.all(np.isfinite(Phi)) or np.max(np.abs(Phi), initial=0) > overflow:
        raise PropagatorOverflow("propagator overflow: the symbol violates the stability condition "
                                 "(see stability_scan)")
    return Phi


def propagator(S: SymbolSpec, xi, t):
    """Phi(t, xi) = exp(i t C(xi)), shape (..., m, m)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return propagator_from_coefficients(S.coefficients(xi), float(t))


def kernel_multiplier(S: SymbolSpec, xi, t, j):
    """E_j(t, xi) with d_t^l E_j(0) = delta_lj."""
    return (1j) ** (-j) * propagator(S, xi, t)[..., 0, j]


def elementary_symmetric(values, k):
    """e_k of the last axis."""
    values = np.asarray(values)
    e = [np.ones(values.shape[:-1], dtype=values.dtype)] + [np.zeros(values.shape[:-1], dtype=values.dtype)] * k
    for i in range(values.shape[-1]):
        v = values[..., i]
        for d in range(min(k, i + 1), 0, -1):
            e[d] = e[d] + v * e[d - 1]
    return e[k]


def vandermonde_amplitudes(roots, j, gap_rel=1e-10):
    """A_j^k with sum_k A_j^k tau_k^l = delta_lj, batched over leading axes.

    A_j^k = (-1)^j e_(m-j-1)(roots without k) / prod_(l != k)(tau_l - tau_k).
    """
    roots = np.asarray(roots, dtype=complex)
    m = roots.shape[-1]
    if not 0 <= j < m:
        raise ValueError(f"j must be in 0..{m - 1}")
    diff = roots[..., None, :] - roots[..., :, None]  # [k, l] = tau_l - tau_k
    eye = np.eye(m, dtype=bool)
    scale = np.maximum(1.0, np.max(np.abs(roots), axis=-1))
    gap = np.min(np.where(eye, np.inf, np.abs(diff)), axis=(-1, -2)) if m > 1 else np.full(roots.shape[:-1], np.inf)
    if np.any(gap < gap_rel * scale):
        raise ValueError("roots are (nearly) multiple: Vandermonde amplitudes are singular; "
                         "use the matrix propagator")
    denom = np.prod(np.where(eye, 1.0, diff), axis=-1)
    out = np.empty_like(roots)
    for k in range(m):
        others = np.delete(roots, k, axis=-1)
        out[..., k] = (-1) ** j * elementary_symmetric(others, m - j - 1) / denom[..., k]
    return out


def vandermonde_sum(roots, j, t):
    """sum_k A_j^k exp(i tau_k t) (the D_t-normalised row entry Phi_(0,j))."""
    A = vandermonde_amplitudes(roots, j)
    return np.sum(A * np.exp(1j * np.asarray(roots) * t), axis=-1)


# -- spectral grids and data -------------------------------------------------

@dataclass(frozen=True)
class SpectralGrid:
    """Periodic FFT grid: N nodes per axis, xi_k = (k - N/2) dxi on [-R, R)."""

    dimension: int
    nodes: int
    radius: float

    def __post_init__(self):
        if self.nodes < 4 or self.nodes % 2:
            raise ValueError("nodes must be even and >= 4")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def dxi(self):
        return 2 * self.radius / self.nodes

    @property
    def dx(self):
        return 2 * np.pi / (self.nodes * self.dxi)

    def axis(self):
        return (np.arange(self.nodes) - self.nodes // 2) * self.dxi

    def space_axis(self):
        return (np.arange(self.nodes) - self.nodes // 2) * self.dx

    def xi(self):
        ax = [self.axis()] * self.dimension
        return np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1)

    def radius_field(self):
        ax = self.axis()
        r2 = np.zeros((self.nodes,) * self.dimension)
        for d in range(self.dimension):
            sh = [1] * self.dimension
            sh[d] = -1
            r2 = r2 + (ax ** 2).reshape(sh)
        return np.sqrt(r2)

    def to_dict(self):
        return {"dimension": self.dimension, "nodes": self.nodes, "radius": self.radius}


def bump(r, R):
    """C-infinity bump exp(1 - 1/(1 - (r/R)^2)) on |r| < R, 1 at r = 0."""
    r = np.asarray(r, dtype=float)
    u = (r / R) ** 2
    out = np.zeros_like(u)
    inside = u < 1
    out[inside] = np.exp(1 - 1 / (1 - u[inside]))
    return out


def _profile(spec, grid: SpectralGrid, rng):
    kind = spec.get("kind", "gaussian")
    r = grid.radius_field()
    if kind == "gaussian":
        sigma = float(spec.get("sigma", 1.0))
        prof = np.exp(-0.5 * (sigma * r) ** 2).astype(complex)
    elif kind == "unit":
        prof = np.ones_like(r, dtype=complex)
    elif kind == "indicator_band":
        lo, hi = float(spec.get("rmin", 0.0)), float(spec["rmax"])
        prof = ((r >= lo) & (r <= hi)).astype(complex)
    elif kind == "ring_band":
        r0, w = float(spec["r0"]), float(spec["width"])
        prof = bump(r - r0, w).astype(complex)
    elif kind == "random_gaussian":
        sigma = float(spec.get("sigma", 1.0))
        noise = rng.normal(size=r.shape) + 1j * rng.normal(size=r.shape)
        prof = np.exp(-0.5 * (sigma * r) ** 2) * (1 + 0.1 * noise)
    else:
        raise ValueError(f"unknown data profile {kind!r}")
    return prof


@dataclass
class CauchyData:
    """Frequency-side Cauchy data: d_t^l u(0)^ = profile_l * window * cutoff.

    profiles: {l: preset dict}, e.g. {1: {"kind": "gaussian", "sigma": 1}}.
    window: optional smooth radial bump radius.  exclude_ball: optional
    radius; data is removed inside the ball with a cell-averaged sharp edge.
    """

    profiles: dict
    window: float | None = None
    exclude_ball: float | None = None
    seed: int = 0

    @classmethod
    def from_dict(cls, d):
        profiles = {int(k): v for k, v in d.get("profiles", {"1": {"kind": "gaussian"}}).items()}
        return cls(profiles, d.get("window"), d.get("exclude_ball"), int(d.get("seed", 0)))

    def to_dict(self):
        return {"profiles": {str(k): v for k, v in self.profiles.items()}, "window": self.window,
                "exclude_ball": self.exclude_ball, "seed": self.seed}

    def weight(self, grid: SpectralGrid):
        w = np.ones((grid.nodes,) * grid.dimension)
        r = grid.radius_field()
        if self.window is not None:
            w = w * bump(r, self.window)
        if self.exclude_ball is not None:
            w = w * np.clip((r - self.exclude_ball) / grid.dxi + 0.5, 0.0, 1.0)
        return w

    def evaluate(self, grid: SpectralGrid, m):
        rng = np.random.default_rng(self.seed)
        w = self.weight(grid)
        out = {}
        for l, spec in sorted(self.profiles.items()):
            if not 0 <= l < m:
                raise ValueError(f"data index {l} outside 0..{m - 1}")
            prof = _profile(spec, grid, rng) * w
            if not np.all(np.isfinite(prof)):
                raise ValueError("data profile is not finite")
            out[l] = prof
        return out


def inverse_transform(uhat, grid: SpectralGrid):
    """u(x) = (2 pi)^-n sum e^(i x xi) u^(xi) dxi^n on the dual grid."""
    n = grid.dimension
    factor = (grid.dxi * grid.nodes / (2 * np.pi)) ** n
    axes = tuple(range(n))
    out = scipy.fft.ifftn(scipy.fft.ifftshift(uhat, axes=axes), axes=axes, workers=worker_count())
    return factor * scipy.fft.fftshift(out, axes=axes)


def edge_energy_fraction(u, cells=2):
    e = np.abs(u) ** 2
    total = e.sum()
    if total == 0:
        return 0.0
    mask = np.zeros(u.shape, dtype=bool)
    for d in range(u.ndim):
        idx = [slice(None)] * u.ndim
        idx[d] = slice(0, cells)
        mask[tuple(idx)] = True
        idx[d] = slice(u.shape[d] - cells, None)
        mask[tuple(idx)] = True
    return float(e[mask].sum() / total)


def _multiplier_state(S, grid, t, x0, support, r):
    """(C^r Phi(t) X0)_0 on the support nodes; zero elsewhere."""
    xi = grid.xi()[support]
    c = S.coefficients(xi)
    Phi = propagator_from_coefficients(c, t)
    X = np.einsum("...ab,...b->...a", Phi, x0)
    if r:
        C = companion_from_coefficients(c)
        for _ in range(r):
            X = np.einsum("...ab,...b->...a", C, X)
    out = np.zeros((grid.nodes,) * grid.dimension, dtype=complex)
    out[support] = X[..., 0]
    return out


def _state_from_data(data_hat, m, shape):
    x0 = np.zeros(shape + (m,), dtype=complex)
    for l, prof in data_hat.items():
        x0[..., l] = (-1j) ** l * prof
    return x0


def synthesize(S: SymbolSpec, j, t, grid: SpectralGrid, data=None, window=None, r=0, alpha=None,
               check_aliasing=True, tol=1e-6):
    """Spatial samples of E_j(t) applied to data (or the raw kernel).

    data: frequency-side profile array (None = unit data); window: radial
    bump radius (None = no window).  r, alpha: time and space derivatives
    applied as multipliers.
    """
    m = S.order
    shape = (grid.nodes,) * grid.dimension
    prof = np.ones(shape, dtype=complex) if data is None else np.asarray(data, dtype=complex)
    if window is not None:
        prof = prof * bump(grid.radius_field(), window)
    x0 = np.zeros(shape + (m,), dtype=complex)
    x0[..., j] = (-1j) ** j * prof
    support = prof != 0
    uhat = _multiplier_state(S, grid, t, x0[support], support, r) * (1j) ** r
    if alpha is not None:
        uhat = uhat * _space_multiplier(grid, alpha)
    u = inverse_transform(uhat, grid)
    if check_aliasing:
        frac = edge_energy_fraction(u)
        if frac > tol:
            raise AliasingError(f"{frac:.2e} of the energy sits within 2 cells of the grid edge at t={t:g}")
    return u


def _space_multiplier(grid, alpha):
    xi = grid.xi()
    out = np.ones(xi.shape[:-1], dtype=complex)
    for d, a in enumerate(alpha):
        out = out * (1j * xi[..., d]) ** a
    return out


def parseval_norms(u, uhat, grid):
    """(space-side L2, frequency-side L2) under the transform convention."""
    n = grid.dimension
    space = math.sqrt(float(np.sum(np.abs(u) ** 2)) * grid.dx ** n)
    freq = math.sqrt(float(np.sum(np.abs(uhat) ** 2)) * grid.dxi ** n / (2 * np.pi) ** n)
    return space, freq


@dataclass
class PropagatorRun:
    symbol: str
    grid: SpectralGrid
    times: np.ndarray
    r: int
    alpha: tuple
    norms: dict            # {"solution": {"inf": [...], "2": [...]}, "kernel": {...}}
    data: dict = field(default_factory=dict)
    aliasing: list = field(default_factory=list)

    def series(self, which="solution", q="inf"):
        return np.asarray(self.norms[which][q], dtype=float)

    def to_csv(self, path, which="solution"):
        lines = ["t,q,r,abs_alpha,norm"]
        for q in ("2", "inf"):
            for t, v in zip(self.times, self.norms[which][q]):
                lines.append(f"{t:.10g},{q},{self.r},{sum(self.alpha)},{v:.12e}")
        text = "\n".join(lines) + "\n"
        with open(path, "w") as fh:
            fh.write(text)
        return text


def time_ladder(t0=1.0, t1=400.0, count=24):
    if count == 1:
        return np.array([float(t0)])
    return np.geomspace(t0, t1, count)


def run_decay_experiment(S: SymbolSpec, data: CauchyData, grid: SpectralGrid, times, r=0, alpha=None,
                         kernel=True, check_aliasing=True, tol=1e-6):
    """Norms of the solution (and the raw kernel E_(m-1) * window) over times."""
    m = S.order
    alpha = tuple(alpha) if alpha is not None else (0,) * S.dimension
    if len(alpha) != S.dimension:
        raise ValueError("alpha has the wrong length")
    shape = (grid.nodes,) * grid.dimension
    dhat = data.evaluate(grid, m)
    x0 = _state_from_data(dhat, m, shape)
    support = np.any(x0 != 0, axis=-1)
    space_mult = _space_multiplier(grid, alpha) if any(alpha) else None
    if kernel:
        w = data.weight(grid)
        kx0 = np.zeros(shape + (m,), dtype=complex)
        kx0[..., m - 1] = (-1j) ** (m - 1) * w
        ksupport = w != 0
    norms = {"solution": {"inf": [], "2": []}}
    if kernel:
        norms["kernel"] = {"inf": [], "2": []}
    alias = []
    n = grid.dimension
    for t in np.asarray(times, dtype=float):
        jobs = [("solution", x0[support], support)]
        if kernel:
            jobs.append(("kernel", kx0[ksupport], ksupport))
        for name, state, sup in jobs:
            uhat = _multiplier_state(S, grid, t, state, sup, r) * (1j) ** r
            if space_mult is not None:
                uhat = uhat * space_mult
            u = inverse_transform(uhat, grid)
            frac = edge_energy_fraction(u)
            if name == "solution":
                alias.append(frac)
            if check_aliasing and frac > tol:
                raise AliasingError(f"{name}: {frac:.2e} of the energy within 2 cells of the edge at t={t:g}")
            norms[name]["inf"].append(float(np.max(np.abs(u))))
            norms[name]["2"].append(math.sqrt(float(np.sum(np.abs(u) ** 2)) * grid.dx ** n))
    return PropagatorRun(S.name, grid, np.asarray(times, dtype=float), r, alpha, norms,
                         data.to_dict(), alias)


@dataclass
class DecayFit:
    mode: str
    exponent: float          # decay exponent rho (norm ~ t^-rho) or rate delta (norm ~ e^-delta t)
    window: tuple
    residual_rms: float
    halfwidth: float
    count: int
    low_confidence: bool = False
    notes: tuple = ()

    def to_dict(self):
        return {"mode": self.mode, "exponent": self.exponent, "window": list(self.window),
                "residual_rms": self.residual_rms, "halfwidth": self.halfwidth, "count": self.count,
                "low_confidence": self.low_confidence, "notes": list(self.notes)}


def fit_series(times, values, window=(20.0, 400.0), mode="power", confidence=0.95, tail_tol=0.05):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    sel = (times >= window[0] * (1 - 1e-12)) & (times <= window[1] * (1 + 1e-12)) & (values > 0)
    if sel.sum() < 6:
        raise ValueError(f"need >= 6 positive samples in the window {window}, got {int(sel.sum())}")
    t, v = times[sel], np.log(values[sel])
    x = np.log(t) if mode == "power" else t
    if mode not in ("power", "exponential"):
        raise ValueError("mode must be 'power' or 'exponential'")
    X = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(X, v, rcond=None)
    resid = v - X @ coef
    dof = len(v) - 2
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    half = float(stats.t.ppf(0.5 + confidence / 2, dof) * math.sqrt(cov[1, 1]))
    notes = []
    rising = np.diff(v) > tail_tol
    low = bool(np.any(rising))
    if low:
        notes.append("norm increases inside the fit window")
    return DecayFit(mode, float(-coef[1]), (float(t[0]), float(t[-1])), float(math.sqrt(np.mean(resid ** 2))),
                    half, int(len(v)), low, tuple(notes))


def fit_exponent(run: PropagatorRun, window=(20.0, 400.0), mode="power", which="solution", q="inf"):
    return fit_series(run.times, run.series(which, q), window, mode)
