"""Built-in symbols used by the examples, experiments and tests."""

from __future__ import annotations

from fractions import Fraction as Fr
from math import comb

from .symbols import MonomialPoly, SymbolSpec, fokker_planck_symbol

# Grad 13-moment dispersion relation in 2D, written in omega = tau/|xi| and
# q = alpha*beta with alpha = xi1^2/|xi|^2, beta = xi2^2/|xi|^2.  Each Q_j is
# |xi|^j times a polynomial in (omega, q) stored as {(power of omega, power of q): coefficient}.
GRAD13_Q = {
    9: {(9, 0): Fr(1), (7, 0): Fr(-103, 25), (5, 0): Fr(21, 5), (5, 1): -Fr(21, 5) * Fr(912, 2625),
        (3, 0): Fr(-27, 25), (3, 1): Fr(27, 25) * Fr(432, 675)},
    8: {(8, 0): Fr(13, 3), (6, 0): Fr(-1094, 75), (4, 0): Fr(1381, 125),
        (4, 1): -Fr(1381, 125) * Fr(2032, 6905), (2, 0): Fr(-264, 125), (2, 1): Fr(264, 125) * Fr(143, 330)},
    7: {(7, 0): Fr(67, 9), (5, 0): Fr(-497, 25), (3, 0): Fr(3943, 375),
        (3, 1): -Fr(3943, 375) * Fr(832, 3943), (1, 0): Fr(-159, 125), (1, 1): Fr(159, 125) * Fr(48, 159)},
    6: {(6, 0): Fr(19, 3), (4, 0): Fr(-2908, 225), (2, 0): Fr(13, 3), (2, 1): -Fr(13, 3) * Fr(32, 325),
        (0, 0): Fr(-6, 25)},
    5: {(5, 0): Fr(8, 3), (3, 0): Fr(-178, 45), (1, 0): Fr(2, 3)},
    4: {(4, 0): Fr(4, 9), (2, 0): Fr(-4, 9)},
}
# P = Q9 - i Q8 - Q7 + i Q6 + Q5 - i Q4
GRAD13_WEIGHTS = {9: 1, 8: -1j, 7: -1, 6: 1j, 5: 1, 4: -1j}


def grad13_tau_xi_exact():
    """Rehomogenised Grad-13 polynomial: {(tau power, xi1 power, xi2 power): (weight, Fraction)}.

    omega^a q^e |xi|^j = tau^a xi1^(2e) xi2^(2e) |xi|^(j-a-4e), and the
    remaining even power of |xi| is expanded binomially.
    """
    out = {}
    for j, q in GRAD13_Q.items():
        for (a, e), coef in q.items():
            rest = j - a - 4 * e
            if rest < 0 or rest % 2:
                raise ValueError(f"Q_{j} term omega^{a} q^{e} is not polynomial after rehomogenisation")
            k = rest // 2
            for i in range(k + 1):
                key = (a, 2 * e + 2 * i, 2 * e + 2 * (k - i))
                w = GRAD13_WEIGHTS[j]
                prev = out.get(key, {})
                prev[w] = prev.get(w, Fr(0)) + coef * comb(k, i)
                out[key] = prev
    return out


def grad13():
    exact = grad13_tau_xi_exact()
    terms = {}
    for key, parts in exact.items():
        val = sum(complex(w) * float(c) for w, c in parts.items() if c != 0)
        if val != 0:
            terms[key] = val
    return SymbolSpec.from_tau_xi(MonomialPoly(3, terms), name="grad13",
                                  provenance="linearised Grad 13-moment system of rarefied gas dynamics "
                                             "in 2D: dispersion determinant Q9 - iQ8 - Q7 + iQ6 + Q5 - iQ4")


def _neg_laplacian(n, c2=1.0):
    return MonomialPoly(n, {tuple(2 if d == i else 0 for d in range(n)): -c2 for i in range(n)})


def wave(n):
    return SymbolSpec(2, n, [MonomialPoly.zero(n), _neg_laplacian(n)], name=f"wave_{n}d",
                      provenance=f"wave equation u_tt - Laplacian u = 0 in {n}D: tau^2 - |xi|^2")


def klein_gordon(n, mu=1.0):
    return SymbolSpec(2, n, [MonomialPoly.zero(n), _neg_laplacian(n)], [((0,) * n, 0, -mu ** 2)],
                      name=f"kg_{n}d",
                      provenance=f"Klein-Gordon u_tt - Laplacian u + mu^2 u = 0 in {n}D, mu={mu:g}: "
                                 "tau^2 - |xi|^2 - mu^2")


def damped_wave(n, c=1.0, delta=1.0, mu=0.0, name=None):
    """u_tt - c^2 Laplacian u + delta u_t + mu u = 0, i.e. tau^2 - i delta tau - c^2|xi|^2 - mu."""
    lower = []
    if delta:
        lower.append(((0,) * n, 1, -1j * delta))
    if mu:
        lower.append(((0,) * n, 0, -mu))
    return SymbolSpec(2, n, [MonomialPoly.zero(n), _neg_laplacian(n, c ** 2)], lower,
                      name=name or f"damped_wave_{n}d",
                      provenance=f"u_tt - {c ** 2:g} Laplacian u + {delta:g} u_t + {mu:g} u = 0 in {n}D")


def quartic_2d():
    return SymbolSpec(4, 2, [MonomialPoly.zero(2)] * 3 + [MonomialPoly(2, {(4, 0): -1, (0, 4): -1})],
                      name="quartic_2d",
                      provenance="tau^4 - xi1^4 - xi2^4; its real branch (xi1^4+xi2^4)^(1/4) has "
                                 "level curves with flat points on the axes (geometry test case, "
                                 "not hyperbolic)")


def fp(N, n):
    A, S = fokker_planck_symbol(N, n)
    S.provenance = (f"kinetic Fokker-Planck equation, Hermite moment truncation at level N={N} in {n}D: "
                    "det(tau I + sum A_j xi_j - i B)")
    return S


CORPUS = {
    "wave_1d": lambda: wave(1),
    "wave_2d": lambda: wave(2),
    "wave_3d": lambda: wave(3),
    "kg_1d": lambda: klein_gordon(1),
    "kg_2d": lambda: klein_gordon(2),
    "dissipative_wave_1d": lambda: damped_wave(1, name="dissipative_wave_1d"),
    "dissipative_wave_2d": lambda: damped_wave(2, name="dissipative_wave_2d"),
    "anti_dissipative_1d": lambda: damped_wave(1, delta=-1.0, name="anti_dissipative_1d"),
    "negative_mass_1d": lambda: damped_wave(1, c=1.0, delta=1.0, mu=-1.0, name="negative_mass_1d"),
    "fp_1_1": lambda: fp(1, 1),
    "fp_2_1": lambda: fp(2, 1),
    "fp_1_2": lambda: fp(1, 2),
    "grad13": grad13,
    "quartic_2d": quartic_2d,
}

# Symbols whose principal part is strictly hyperbolic (real, distinct principal
# roots off the origin); the others are kept for geometry or algebra tests.
HYPERBOLIC = ("wave_1d", "wave_2d", "wave_3d", "kg_1d", "kg_2d", "dissipative_wave_1d",
              "dissipative_wave_2d", "anti_dissipative_1d", "negative_mass_1d", "fp_1_1",
              "fp_2_1", "fp_1_2")


def names():
    return sorted(CORPUS)


def get(name):
    try:
        S = CORPUS[name]()
    except KeyError:
        raise KeyError(f"unknown corpus symbol {name!r}; known: {', '.join(names())}") from None
    S.name = name
    return S
