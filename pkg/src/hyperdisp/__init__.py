"""Dispersive decay rates of constant-coefficient hyperbolic operators."""

from .symbols import (MatrixSymbol, MonomialPoly, SymbolSpec, TauPolynomial, discriminant_at,
                      evaluate_symbol, fokker_planck_symbol, hermite_triple_check,
                      interlacing_check, load_symbol, necessary_stability_check,
                      principal_polynomial, system_dispersion)
from .roots import FrequencyGrid, RootField, pair_principal, root_jet, solve_roots, track_field
from .classify import build_zone_report
from .predict import AbstainError, combine, fp_prediction, predict, strichartz_pair

__all__ = ["MatrixSymbol", "MonomialPoly", "SymbolSpec", "TauPolynomial", "discriminant_at", "evaluate_symbol",
           "fokker_planck_symbol", "hermite_triple_check", "interlacing_check", "load_symbol",
           "necessary_stability_check", "principal_polynomial", "system_dispersion", "FrequencyGrid",
           "RootField", "pair_principal", "root_jet", "solve_roots", "track_field", "build_zone_report",
           "AbstainError", "combine", "fp_prediction", "predict", "strichartz_pair"]

__version__ = "0.1.0"
