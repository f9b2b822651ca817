"""Full symbols L(tau, xi) of constant-coefficient hyperbolic operators.

The symbol is

    L(tau, xi) = tau^m + sum_j P_j(xi) tau^(m-j) + sum c_{alpha,r} xi^alpha tau^r

with P_j homogeneous of degree j and |alpha| + r <= m - 1.  Characteristic
roots with Im tau >= 0 are the stable ones; a Fourier mode evolves like
exp(i tau t).  An equation written with d/dt maps onto this form through
d/dt = i D_t.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

PRUNE = 1e-300


def _as_alpha(alpha, n):
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != n:
        raise ValueError(f"multi-index {alpha} has length {len(alpha)}, expected {n}")
    if any(a < 0 for a in alpha):
        raise ValueError(f"multi-index {alpha} has a negative entry")
    return alpha


class MonomialPoly:
    """Sparse polynomial with complex coefficients, keyed by multi-index."""

    __slots__ = ("dimension", "_terms")

    def __init__(self, dimension: int, terms: Mapping[Sequence[int], complex] | None = None):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = int(dimension)
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = _as_alpha(alpha, self.dimension)
            c = complex(c)
            if abs(c) > PRUNE:
                clean[alpha] = clean.get(alpha, 0j) + c
        self._terms = {a: c for a, c in clean.items() if abs(c) > PRUNE}

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    @classmethod
    def constant(cls, dimension, c):
        return cls(dimension, {(0,) * dimension: c})

    @classmethod
    def variable(cls, dimension, i, c=1.0):
        alpha = [0] * dimension
        alpha[i] = 1
        return cls(dimension, {tuple(alpha): c})

    @classmethod
    def zero(cls, dimension):
        return cls(dimension, {})

    def is_zero(self):
        return not self._terms

    def degree(self):
        if not self._terms:
            return -1
        return max(sum(a) for a in self._terms)

    def is_homogeneous(self, degree):
        return all(sum(a) == degree for a in self._terms)

    def homogeneous_part(self, degree):
        return MonomialPoly(self.dimension, {a: c for a, c in self._terms.items() if sum(a) == degree})

    def _coerce(self, other):
        if isinstance(other, MonomialPoly):
            if other.dimension != self.dimension:
                raise ValueError("dimension mismatch")
            return other
        return MonomialPoly.constant(self.dimension, other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self._terms)
        for a, c in other._terms.items():
            out[a] = out.get(a, 0j) + c
        return MonomialPoly(self.dimension, out)

    __radd__ = __add__

    def __neg__(self):
        return MonomialPoly(self.dimension, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, MonomialPoly):
            c = complex(other)
            return MonomialPoly(self.dimension, {a: v * c for a, v in self._terms.items()})
        other = self._coerce(other)
        out = {}
        for a, ca in self._terms.items():
            for b, cb in other._terms.items():
                k = tuple(x + y for x, y in zip(a, b))
                out[k] = out.get(k, 0j) + ca * cb
        return MonomialPoly(self.dimension, out)

    __rmul__ = __mul__

    def __pow__(self, k):
        out = MonomialPoly.constant(self.dimension, 1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, MonomialPoly):
            return NotImplemented
        return self.dimension == other.dimension and self._terms == other._terms

    def __hash__(self):
        return hash((self.dimension, tuple(sorted(self._terms.items(), key=lambda t: t[0]))))

    def allclose(self, other, tol=1e-12):
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(k, 0j) - other._terms.get(k, 0j)) <= tol for k in keys)

    def derivative(self, i):
        out = {}
        for a, c in self._terms.items():
            if a[i] > 0:
                b = list(a)
                b[i] -= 1
                out[tuple(b)] = c * a[i]
        return MonomialPoly(self.dimension, out)

    def __call__(self, x):
        """Evaluate at points x of shape (..., dimension)."""
        x = np.asarray(x, dtype=complex)
        if x.shape[-1] != self.dimension:
            raise ValueError("dimension mismatch")
        out = np.zeros(x.shape[:-1], dtype=complex)
        for a, c in self._terms.items():
            out = out + c * np.prod(x ** np.array(a), axis=-1)
        return out

    def __repr__(self):
        if not self._terms:
            return "MonomialPoly(0)"
        parts = [f"{c:.6g}*x^{a}" for a, c in sorted(self._terms.items())]
        return "MonomialPoly(" + " + ".join(parts) + ")"


@dataclass(frozen=True)
class LowerTerm:
    alpha: tuple
    r: int
    c: complex


@dataclass(frozen=True)
class TauPolynomial:
    """Monic polynomial in tau; ``coefficients[j]`` multiplies tau^(m-j)."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex).reshape(-1)
        if c.size < 2:
            raise ValueError("need degree >= 1")
        if c[0] != 1:
            raise ValueError("polynomial must be monic")
        object.__setattr__(self, "coefficients", c)

    @property
    def order(self):
        return self.coefficients.size - 1

    def __call__(self, tau):
        return np.polyval(self.coefficients, tau)


class SymbolSpec:
    """Full symbol of an m-th order operator in n space dimensions."""

    def __init__(self, order: int, dimension: int, principal: Sequence[MonomialPoly],
                 lower: Iterable = (), name: str = "", provenance: str = ""):
        m, n = int(order), int(dimension)
        if m < 1 or n < 1:
            raise ValueError("order and dimension must be positive")
        principal = list(principal)
        if len(principal) != m:
            raise ValueError(f"expected {m} principal polynomials, got {len(principal)}")
        for j, p in enumerate(principal, start=1):
            if p.dimension != n:
                raise ValueError(f"P_{j} has dimension {p.dimension}, expected {n}")
            if not p.is_homogeneous(j):
                raise ValueError(f"P_{j} is not homogeneous of degree {j}")
        merged = {}
        for t in lower:
            if not isinstance(t, LowerTerm):
                t = LowerTerm(*t)
            alpha = _as_alpha(t.alpha, n)
            r = int(t.r)
            if r < 0 or sum(alpha) + r > m - 1:
                raise ValueError(f"lower term {alpha}, r={r} violates |alpha|+r <= m-1")
            merged[(alpha, r)] = merged.get((alpha, r), 0j) + complex(t.c)
        self.order = m
        self.dimension = n
        self.principal = tuple(principal)
        self.lower = tuple(LowerTerm(a, r, c) for (a, r), c in sorted(merged.items()) if abs(c) > PRUNE)
        self.name = name
        self.provenance = provenance

    def __repr__(self):
        return f"SymbolSpec(name={self.name!r}, m={self.order}, n={self.dimension})"

    @cached_property
    def coefficient_polys(self):
        """a_0..a_m with a_0 = 1; a_j multiplies tau^(m-j)."""
        m, n = self.order, self.dimension
        polys = [MonomialPoly.constant(n, 1.0)] + list(self.principal)
        for t in self.lower:
            j = m - t.r
            polys[j] = polys[j] + MonomialPoly(n, {t.alpha: t.c})
        return tuple(polys)

    @cached_property
    def _compiled(self):
        return _compile(self.coefficient_polys, self.dimension)

    @cached_property
    def _compiled_principal(self):
        polys = [MonomialPoly.constant(self.dimension, 1.0)] + list(self.principal)
        return _compile(polys, self.dimension)

    @cached_property
    def _compiled_grad(self):
        return [_compile([p.derivative(d) for p in self.coefficient_polys], self.dimension)
                for d in range(self.dimension)]

    @cached_property
    def _compiled_hess(self):
        n = self.dimension
        return [[_compile([p.derivative(a).derivative(b) for p in self.coefficient_polys], n)
                 for b in range(n)] for a in range(n)]

    def _points(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.dimension == 1 and (xi.ndim == 0 or xi.shape[-1] != 1):
            xi = xi[..., None]
        if xi.shape[-1] != self.dimension:
            raise ValueError(f"xi has dimension {xi.shape[-1]}, symbol has {self.dimension}")
        if not np.all(np.isfinite(xi)):
            raise ValueError("xi must be finite")
        return xi

    def coefficients(self, xi):
        """Batched coefficients, shape (..., m+1), index j multiplies tau^(m-j)."""
        return _apply(self._compiled, self._points(xi))

    def principal_coefficients(self, xi):
        return _apply(self._compiled_principal, self._points(xi))

    def coefficient_gradients(self, xi):
        """Shape (..., m+1, n)."""
        xi = self._points(xi)
        return np.stack([_apply(c, xi) for c in self._compiled_grad], axis=-1)

    def coefficient_hessians(self, xi):
        """Shape (..., m+1, n, n)."""
        xi = self._points(xi)
        rows = [np.stack([_apply(c, xi) for c in row], axis=-1) for row in self._compiled_hess]
        return np.stack(rows, axis=-2)

    def coefficient_scale(self, xi):
        """max(1, max_j |a_j|^(1/j)): the scale of the roots at xi."""
        c = np.abs(self.coefficients(xi))
        j = np.arange(1, self.order + 1)
        return np.maximum(1.0, np.max(c[..., 1:] ** (1.0 / j), axis=-1))

    def is_homogeneous(self):
        return not self.lower

    def lower_coefficient(self, alpha, r):
        alpha = _as_alpha(alpha, self.dimension)
        for t in self.lower:
            if t.alpha == alpha and t.r == r:
                return t.c
        return 0j

    def to_tau_xi(self):
        """The symbol as a MonomialPoly in (tau, xi_1..xi_n), tau first."""
        m, n = self.order, self.dimension
        out = {(m,) + (0,) * n: 1.0}
        for j, p in enumerate(self.principal, start=1):
            for a, c in p.terms.items():
                out[(m - j,) + a] = out.get((m - j,) + a, 0j) + c
        for t in self.lower:
            out[(t.r,) + t.alpha] = out.get((t.r,) + t.alpha, 0j) + t.c
        return MonomialPoly(n + 1, out)

    @classmethod
    def from_tau_xi(cls, poly: MonomialPoly, name="", provenance=""):
        """Split a monic polynomial in (tau, xi) into principal and lower parts."""
        n = poly.dimension - 1
        terms = poly.terms
        m = max((a[0] for a in terms), default=0)
        if m < 1:
            raise ValueError("polynomial has no tau dependence")
        lead = {a: c for a, c in terms.items() if a[0] == m}
        if set(lead) != {(m,) + (0,) * n} or abs(lead[(m,) + (0,) * n] - 1) > 1e-12:
            raise ValueError("polynomial is not monic in tau")
        principal = [dict() for _ in range(m)]
        lower = []
        for a, c in terms.items():
            r, alpha = a[0], a[1:]
            if r == m:
                continue
            deg = r + sum(alpha)
            if deg == m:
                principal[m - r - 1][alpha] = c
            elif deg < m:
                lower.append(LowerTerm(alpha, r, c))
            else:
                raise ValueError(f"term tau^{r} xi^{alpha} has degree {deg} > order {m}")
        return cls(m, n, [MonomialPoly(n, p) for p in principal], lower, name=name,
                   provenance=provenance)

    def to_dict(self):
        def num(c):
            return {"re": float(c.real), "im": float(c.imag)}
        return {
            "dimension": self.dimension,
            "order": self.order,
            "principal": [
                {"degree": j,
                 "terms": [{"alpha": list(a), **num(c)} for a, c in sorted(p.terms.items())]}
                for j, p in enumerate(self.principal, start=1)
            ],
            "lower": [{"alpha": list(t.alpha), "r": t.r, **num(t.c)} for t in self.lower],
        }

    @classmethod
    def from_dict(cls, d, name="", provenance=""):
        try:
            n, m = int(d["dimension"]), int(d["order"])
            principal = [MonomialPoly.zero(n) for _ in range(m)]
            for block in d.get("principal", []):
                j = int(block["degree"])
                if not 1 <= j <= m:
                    raise ValueError(f"principal degree {j} outside 1..{m}")
                terms = {tuple(t["alpha"]): complex(t.get("re", 0.0), t.get("im", 0.0))
                         for t in block.get("terms", [])}
                principal[j - 1] = principal[j - 1] + MonomialPoly(n, terms)
            lower = [LowerTerm(tuple(t["alpha"]), int(t["r"]),
                               complex(t.get("re", 0.0), t.get("im", 0.0)))
                     for t in d.get("lower", [])]
        except KeyError as exc:
            raise ValueError(f"symbol definition is missing field {exc}") from None
        return cls(m, n, principal, lower, name=d.get("name", name),
                   provenance=d.get("provenance", provenance))

    def allclose(self, other, tol=1e-12):
        return (self.order == other.order and self.dimension == other.dimension
                and self.to_tau_xi().allclose(other.to_tau_xi(), tol))


def _compile(polys, n):
    alphas = sorted({a for p in polys for a in p.terms} | {(0,) * n})
    index = {a: i for i, a in enumerate(alphas)}
    cmat = np.zeros((len(polys), len(alphas)), dtype=complex)
    for j, p in enumerate(polys):
        for a, c in p.terms.items():
            cmat[j, index[a]] = c
    return np.array(alphas, dtype=int).reshape(len(alphas), n), cmat


def _apply(compiled, xi):
    alphas, cmat = compiled
    mono = np.ones(xi.shape[:-1] + (alphas.shape[0],), dtype=float)
    for d in range(alphas.shape[1]):
        mono = mono * xi[..., d:d + 1] ** alphas[:, d]
    return mono @ cmat.T


def load_symbol(source, name=""):
    """Load a symbol from a dict, a JSON string, or a path to a JSON file."""
    if isinstance(source, SymbolSpec):
        return source
    if isinstance(source, (str, Path)) and Path(str(source)).is_file():
        with open(source) as fh:
            return SymbolSpec.from_dict(json.load(fh), name=name or Path(source).stem)
    if isinstance(source, str):
        return SymbolSpec.from_dict(json.loads(source), name=name)
    return SymbolSpec.from_dict(source, name=name)


def dump_symbol(S: SymbolSpec, path=None):
    text = json.dumps(S.to_dict(), indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


# -- evaluation ------------------------------------------------------------

def evaluate_symbol(S: SymbolSpec, xi) -> TauPolynomial:
    c = S.coefficients(xi)
    if c.ndim != 1:
        raise ValueError("evaluate_symbol takes a single point; use S.coefficients for batches")
    return TauPolynomial(c)


def principal_polynomial(S: SymbolSpec, xi) -> TauPolynomial:
    c = S.principal_coefficients(xi)
    if c.ndim != 1:
        raise ValueError("principal_polynomial takes a single point")
    return TauPolynomial(c)


def sylvester_discriminant(coeffs):
    """Discriminant of monic polynomials with batched coefficients (..., m+1).

    Returns (-1)^(m(m-1)/2) Res(p, p'), which equals b^2 - 4c for
    tau^2 + b tau + c and prod_{i<j} (r_i - r_j)^2 in general.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    m = coeffs.shape[-1] - 1
    if m == 1:
        return np.ones(coeffs.shape[:-1], dtype=complex)
    deriv = coeffs[..., :-1] * np.arange(m, 0, -1)
    size = 2 * m - 1
    syl = np.zeros(coeffs.shape[:-1] + (size, size), dtype=complex)
    for i in range(m - 1):
        syl[..., i, i:i + m + 1] = coeffs
    for i in range(m):
        syl[..., m - 1 + i, i:i + m] = deriv
    sign = -1.0 if (m * (m - 1) // 2) % 2 else 1.0
    return sign * np.linalg.det(syl)


def discriminant_at(S: SymbolSpec, xi):
    """Discriminant of L(., xi); batched over leading axes of xi."""
    d = sylvester_discriminant(S.coefficients(xi))
    return d[()] if d.ndim == 0 else d


def discriminant_threshold(S: SymbolSpec, xi, rel=1e-10):
    """Scale-aware threshold below which the discriminant counts as zero."""
    scale = S.coefficient_scale(xi)
    return rel * scale ** (2 * S.order - 2)


@dataclass(frozen=True)
class StabilityVerdict:
    passed: bool
    im_coefficient: float
    note: str = ""


def necessary_stability_check(S: SymbolSpec) -> StabilityVerdict:
    """Sign test on Im c_{0,m-1}, the constant part of the tau^(m-1) coefficient."""
    c = S.lower_coefficient((0,) * S.dimension, S.order - 1)
    im = float(c.imag)
    if im > 0:
        return StabilityVerdict(False, im, f"Im c_(0,m-1) = {im:g} > 0: some root has Im tau < 0")
    if im == 0:
        return StabilityVerdict(True, 0.0, "Im c_(0,m-1) = 0: stability forces all roots to be real")
    return StabilityVerdict(True, im, "")


# -- matrix symbols --------------------------------------------------------

@dataclass(frozen=True)
class MatrixSymbol:
    """Square matrix A(xi) whose entries are polynomials of degree <= 1 in xi."""

    entries: tuple
    dimension: int
    labels: tuple = field(default=())

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.entries)
        m = len(rows)
        if m == 0 or any(len(r) != m for r in rows):
            raise ValueError("matrix symbol must be square")
        for r in rows:
            for e in r:
                if not isinstance(e, MonomialPoly) or e.dimension != self.dimension:
                    raise ValueError("entries must be MonomialPoly in xi of the matrix dimension")
                if e.degree() > 1:
                    raise ValueError("matrix entries must have degree <= 1 in xi")
        object.__setattr__(self, "entries", rows)

    @property
    def size(self):
        return len(self.entries)

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.dimension == 1 and (xi.ndim == 0 or xi.shape[-1] != 1):
            xi = xi[..., None]
        m = self.size
        out = np.zeros(xi.shape[:-1] + (m, m), dtype=complex)
        for i in range(m):
            for j in range(m):
                e = self.entries[i][j]
                if not e.is_zero():
                    out[..., i, j] = e(xi)
        return out


def _poly_det(mat):
    """Exact expansion of det(mat) for a matrix of MonomialPoly entries.

    Dynamic programming over the set of used columns, row by row; zero
    entries are skipped so sparse matrices stay cheap.
    """
    m = len(mat)
    dim = mat[0][0].dimension
    states = {0: MonomialPoly.constant(dim, 1.0)}
    for i in range(m):
        nxt = {}
        for mask, acc in states.items():
            for c in range(m):
                if mask >> c & 1 or mat[i][c].is_zero():
                    continue
                # parity of used columns to the right of c
                sign = -1.0 if bin(mask >> (c + 1)).count("1") % 2 else 1.0
                term = acc * mat[i][c] * sign
                key = mask | (1 << c)
                nxt[key] = nxt[key] + term if key in nxt else term
        states = nxt
        if not states:
            return MonomialPoly.zero(dim)
    return states.get((1 << m) - 1, MonomialPoly.zero(dim))


MAX_SYSTEM_SIZE = 16


def system_dispersion(A: MatrixSymbol, name="", provenance="") -> SymbolSpec:
    """SymbolSpec of det(tau I - A(xi))."""
    if not isinstance(A, MatrixSymbol):
        raise ValueError("expected a MatrixSymbol")
    m, n = A.size, A.dimension
    if m > MAX_SYSTEM_SIZE:
        raise ValueError(f"system size {m} exceeds supported maximum {MAX_SYSTEM_SIZE}")
    tau = MonomialPoly.variable(n + 1, 0)
    mat = []
    for i in range(m):
        row = []
        for j in range(m):
            lifted = MonomialPoly(n + 1, {(0,) + a: c for a, c in A.entries[i][j].terms.items()})
            row.append((tau if i == j else MonomialPoly.zero(n + 1)) - lifted)
        mat.append(row)
    return SymbolSpec.from_tau_xi(_poly_det(mat), name=name, provenance=provenance)


def graded_lex_indices(N, n):
    """Multi-indices 0 <= |alpha| <= N in graded lexicographic order."""
    out = []
    for deg in range(N + 1):
        level = [a for a in itertools.product(range(deg, -1, -1), repeat=n) if sum(a) == deg]
        out.extend(sorted(level, reverse=True))
    return out


def fokker_planck_symbol(N: int, n: int):
    """Galerkin moment system of the kinetic Fokker-Planck equation.

    Returns (A, S) with A(xi) = iB - sum_j A_j xi_j and S the symbol of
    det(tau I - A(xi)) = det(tau I + sum_j A_j xi_j - iB).
    """
    if n not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    idx = graded_lex_indices(N, n) if N >= 1 else []
    if N < 1 or len(idx) > MAX_SYSTEM_SIZE:
        raise ValueError(f"level N={N} unsupported for n={n} (system size limit {MAX_SYSTEM_SIZE})")
    pos = {a: i for i, a in enumerate(idx)}
    size = len(idx)
    entries = [[MonomialPoly.zero(n) for _ in range(size)] for _ in range(size)]
    for col, alpha in enumerate(idx):
        deg = sum(alpha)
        if deg:
            entries[col][col] = entries[col][col] + MonomialPoly.constant(n, 1j * deg)
        for j in range(n):
            e = [0] * n
            e[j] = 1
            down = tuple(a - b for a, b in zip(alpha, e))
            up = tuple(a + b for a, b in zip(alpha, e))
            if alpha[j] > 0 and down in pos:
                entries[pos[down]][col] = entries[pos[down]][col] - MonomialPoly.variable(n, j, alpha[j])
            if up in pos:
                entries[pos[up]][col] = entries[pos[up]][col] - MonomialPoly.variable(n, j, 1.0)
    A = MatrixSymbol(tuple(tuple(r) for r in entries), n, tuple(idx))
    S = system_dispersion(A, name=f"fp_{N}_{n}",
                          provenance=f"Fokker-Planck moment system, level N={N}, n={n}")
    return A, S


def fokker_planck_origin_multiplicities(N, n):
    """gamma_j: multiplicity of the root j*i of the FP symbol at xi = 0."""
    return {j: math.comb(j + n - 1, n - 1) for j in range(N + 1)}


# -- hyperbolic pairs and triples ------------------------------------------

def interlacing_check(roots_p, roots_q, strict=False, tol=0.0):
    """True iff p_1 <= q_1 <= p_2 <= ... <= q_(m-1) <= p_m."""
    p = np.asarray(roots_p, dtype=float).reshape(-1)
    q = np.asarray(roots_q, dtype=float).reshape(-1)
    if q.size != p.size - 1:
        raise ValueError(f"interlacing needs lengths m and m-1, got {p.size} and {q.size}")
    if np.any(np.diff(p) < 0) or np.any(np.diff(q) < 0):
        raise ValueError("roots must be sorted ascending")
    if strict:
        return bool(np.all(p[:-1] < q - tol) and np.all(q < p[1:] - tol))
    return bool(np.all(p[:-1] <= q + tol) and np.all(q <= p[1:] + tol))


@dataclass(frozen=True)
class TripleVerdict:
    passed: bool
    pair_top: bool | None
    pair_bottom: bool | None
    min_im: float
    notes: tuple = ()


def _tau_coeffs(poly: MonomialPoly, xi):
    """Coefficients in tau (highest first) of a (tau, xi) polynomial at xi."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    deg = max((a[0] for a in poly.terms), default=0)
    c = np.zeros(deg + 1, dtype=complex)
    for a, v in poly.terms.items():
        c[deg - a[0]] += v * np.prod(xi ** np.array(a[1:]))
    return c


def _real_roots(c, tol):
    from .roots import solve_roots
    nz = np.flatnonzero(np.abs(c) > PRUNE)
    if nz.size == 0:
        return None
    c = c[nz[0]:]
    if c.size == 1:
        return np.zeros(0)
    r = solve_roots(c / c[0])
    if np.any(np.abs(r.imag) > tol * (1 + np.abs(r))):
        return None
    return np.sort(r.real)


def hermite_triple_check(Lm: MonomialPoly, Lm1: MonomialPoly, Lm2: MonomialPoly, xi,
                         tol=1e-9) -> TripleVerdict:
    """Check (L_m, L_{m-1}, L_{m-2}) at xi for interlacing and the Hermite condition.

    Polynomials are in (tau, xi), tau first.  The combined symbol is
    L_m - i L_{m-1} - L_{m-2}, whose roots must satisfy Im tau >= 0.
    """
    notes = []
    rm = _real_roots(_tau_coeffs(Lm, xi), tol)
    pair_top = pair_bottom = None
    if rm is None:
        notes.append("L_m has non-real roots")
    if Lm1.is_zero():
        notes.append("L_(m-1) vanishes identically; pair checks skipped")
    else:
        r1 = _real_roots(_tau_coeffs(Lm1, xi), tol)
        if rm is not None and r1 is not None and r1.size == rm.size - 1:
            pair_top = interlacing_check(rm, r1, tol=tol)
        else:
            pair_top = False
            notes.append("(L_m, L_(m-1)) is not a real-rooted pair of degrees m, m-1")
        if not Lm2.is_zero() and r1 is not None:
            r2 = _real_roots(_tau_coeffs(Lm2, xi), tol)
            if r2 is not None and r2.size == r1.size - 1:
                pair_bottom = interlacing_check(r1, r2, tol=tol)
            elif r2 is not None and r2.size == 0 and r1.size == 0:
                pair_bottom = True
            else:
                pair_bottom = False
                notes.append("(L_(m-1), L_(m-2)) is not a real-rooted pair")
    full = Lm - Lm1 * 1j - Lm2
    c = _tau_coeffs(full, xi)
    from .roots import solve_roots
    roots = solve_roots(c / c[0])
    min_im = float(np.min(roots.imag))
    scale = max(1.0, float(np.max(np.abs(roots))))
    herm = min_im >= -tol * scale
    if not herm:
        notes.append(f"combined symbol has a root with Im tau = {min_im:.3g} < 0")
    passed = herm and rm is not None and pair_top is not False and pair_bottom is not False
    return TripleVerdict(bool(passed), pair_top, pair_bottom, min_im, tuple(notes))
