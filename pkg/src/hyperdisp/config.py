"""Job configuration: one JSON file drives analyze, simulate and verify."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import corpus
from .classify import AXIS_TOL, SEP_THRESHOLD
from .predict import as_exponent
from .propagate import CauchyData, SpectralGrid, time_ladder
from .roots import FrequencyGrid
from .symbols import MatrixSymbol, MonomialPoly, SymbolSpec, fokker_planck_symbol, load_symbol, system_dispersion


class ConfigError(ValueError):
    """Invalid job configuration; the message starts with the offending path."""


# Documented sane ranges for tolerance overrides: name -> (default, lo, hi).
TOLERANCES = {
    "axis_tol": (AXIS_TOL, 1e-14, 1e-4),
    "separation": (SEP_THRESHOLD, 1e-8, 1e-1),
    "aliasing": (1e-6, 1e-12, 1e-2),
    "match_floor": (0.15, 0.0, 1.0),
}


def _req(d, key, path):
    if not isinstance(d, dict) or key not in d:
        raise ConfigError(f"{path}: missing required field {key!r}")
    return d[key]


def _matrix_symbol(spec, path):
    n = int(_req(spec, "dimension", path))
    rows = _req(spec, "matrix", path)
    entries = []
    for i, row in enumerate(rows):
        out = []
        for j, terms in enumerate(row):
            try:
                out.append(MonomialPoly(n, {tuple(t["alpha"]): complex(t.get("re", 0.0), t.get("im", 0.0))
                                            for t in terms}))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"{path}.matrix[{i}][{j}]: {exc}") from None
        entries.append(tuple(out))
    try:
        return system_dispersion(MatrixSymbol(tuple(entries), n), name=spec.get("name", "system"),
                                 provenance="det(tau I - A(xi)) of a user-supplied first-order system")
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def resolve_symbol(spec, base=None) -> SymbolSpec:
    """Symbol from one of: corpus, inline, file, system, fokker_planck."""
    path = "symbol"
    if not isinstance(spec, dict) or len(spec) == 0:
        raise ConfigError(f"{path}: expected an object with one source key")
    keys = set(spec) & {"corpus", "inline", "file", "system", "fokker_planck"}
    if len(keys) != 1:
        raise ConfigError(f"{path}: give exactly one of corpus/inline/file/system/fokker_planck, got {sorted(keys)}")
    key = keys.pop()
    try:
        if key == "corpus":
            name = spec["corpus"]
            if name not in corpus.CORPUS:
                raise ConfigError(f"{path}.corpus: unknown corpus symbol {name!r}; known: "
                                  f"{', '.join(corpus.names())}")
            return corpus.get(name)
        if key == "inline":
            return load_symbol(spec["inline"], name=spec.get("name", "inline"))
        if key == "file":
            p = Path(spec["file"])
            if base is not None and not p.is_absolute():
                p = Path(base) / p
            if not p.is_file():
                raise ConfigError(f"{path}.file: no such file {str(p)!r}")
            return load_symbol(p)
        if key == "system":
            return _matrix_symbol(spec["system"], f"{path}.system")
        fp = spec["fokker_planck"]
        return fokker_planck_symbol(int(_req(fp, "N", f"{path}.fokker_planck")),
                                    int(_req(fp, "n", f"{path}.fokker_planck")))[1]
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}.{key}: {exc}") from None


@dataclass
class AnalysisConfig:
    radius: float = 4.0
    count: int = 201
    min_radius: float | None = None     # analyse only |xi| >= min_radius
    max_radius: float | None = None     # analyse only |xi| <= max_radius
    far: bool = True

    def grid(self, n) -> FrequencyGrid:
        return FrequencyGrid.cube(n, self.radius, self.count)

    def region(self, xi):
        r = np.linalg.norm(xi, axis=-1)
        mask = np.ones(r.shape, dtype=bool)
        if self.min_radius is not None:
            mask &= r >= self.min_radius - 1e-12
        if self.max_radius is not None:
            mask &= r <= self.max_radius + 1e-12
        return mask


@dataclass
class SimulationConfig:
    nodes: int = 2 ** 12
    radius: float = 16.0
    data: dict = field(default_factory=lambda: {"profiles": {"1": {"kind": "gaussian"}}})
    t0: float = 1.0
    t1: float = 400.0
    count: int = 24
    fit_window: tuple = (20.0, 400.0)
    which: str = "solution"             # "solution" or "kernel"

    def grid(self, n) -> SpectralGrid:
        return SpectralGrid(n, self.nodes, self.radius)

    def cauchy_data(self, seed=None) -> CauchyData:
        d = copy.deepcopy(self.data)
        if seed is not None:
            d["seed"] = int(seed)
        return CauchyData.from_dict(d)

    def times(self):
        return time_ladder(self.t0, self.t1, self.count)


@dataclass(frozen=True)
class SweepEntry:
    p: object
    q: object
    r: int = 0
    alpha: int = 0

    def key(self):
        return f"p={self.p},q={self.q},r={self.r},alpha={self.alpha}"

    def to_dict(self):
        return {"p": str(self.p), "q": str(self.q), "r": self.r, "alpha": self.alpha}


@dataclass
class JobConfig:
    name: str
    symbol: SymbolSpec
    analysis: AnalysisConfig
    simulation: SimulationConfig
    sweep: list
    tolerances: dict
    seed: int = 0
    raw: dict = field(default_factory=dict)

    def tol(self, name):
        return self.tolerances[name]


def _section(cls, d, path):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    known = set(cls.__dataclass_fields__)
    extra = set(d) - known
    if extra:
        raise ConfigError(f"{path}: unknown field(s) {sorted(extra)}; allowed {sorted(known)}")
    try:
        obj = cls(**d)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return obj


def parse_config(d, base=None) -> JobConfig:
    if not isinstance(d, dict):
        raise ConfigError("<root>: expected a JSON object")
    allowed = {"name", "symbol", "analysis", "simulation", "sweep", "tolerances", "seed"}
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"<root>: unknown field(s) {sorted(extra)}")
    S = resolve_symbol(_req(d, "symbol", "<root>"), base)
    ana = _section(AnalysisConfig, d.get("analysis"), "analysis")
    if ana.count < 5 or ana.radius <= 0:
        raise ConfigError("analysis: need radius > 0 and count >= 5")
    sim = _section(SimulationConfig, d.get("simulation"), "simulation")
    sim.fit_window = tuple(float(v) for v in sim.fit_window)
    if sim.which not in ("solution", "kernel"):
        raise ConfigError("simulation.which: must be 'solution' or 'kernel'")
    try:
        sim.grid(S.dimension)
    except ValueError as exc:
        raise ConfigError(f"simulation: {exc}") from None
    sweep = []
    for i, e in enumerate(d.get("sweep", [{"p": 1, "q": "inf"}])):
        try:
            p, q = as_exponent(_req(e, "p", f"sweep[{i}]")), as_exponent(_req(e, "q", f"sweep[{i}]"))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"sweep[{i}]: {exc}") from None
        if not (p != float("inf") and 1 <= p <= 2 and (q == float("inf") or q >= 2)):
            raise ConfigError(f"sweep[{i}]: need 1 <= p <= 2 <= q")
        r, a = int(e.get("r", 0)), int(e.get("alpha", 0))
        if r < 0 or a < 0:
            raise ConfigError(f"sweep[{i}]: derivative orders must be nonnegative")
        sweep.append(SweepEntry(e["p"], e["q"], r, a))
    tols = {k: v[0] for k, v in TOLERANCES.items()}
    for k, v in (d.get("tolerances") or {}).items():
        if k not in TOLERANCES:
            raise ConfigError(f"tolerances.{k}: unknown tolerance; allowed {sorted(TOLERANCES)}")
        lo, hi = TOLERANCES[k][1:]
        if not lo <= float(v) <= hi:
            raise ConfigError(f"tolerances.{k}: {v} outside the sane range [{lo}, {hi}]")
        tols[k] = float(v)
    return JobConfig(str(d.get("name", S.name or "job")), S, ana, sim, sweep, tols, int(d.get("seed", 0)),
                     copy.deepcopy(d))


def load_config(path) -> JobConfig:
    p = Path(path)
    try:
        d = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(d, base=p.parent)
