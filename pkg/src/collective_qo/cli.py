"""Command-line scenario runner: declarative configs, sweeps, figure presets, CSV and SVG output.

Usage::

    collective-qo run CONFIG [--out DIR] [--seed N] [--tol-override NAME=VALUE ...]
    collective-qo sweep CONFIG --workers N --out DIR
    collective-qo figure PRESET [--out DIR] [--workers N]

Exit codes: 0 on success, 2 for invalid input, 3 for numerical failure.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import io
import itertools
import json
import logging
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from . import dynamics as _dyn
from . import liouville as _liou
from . import metrology as _met
from .correlators import (FilterSpec, SensorSpec, cascaded_attach, cascaded_two_sensors, emission_spectrum,
                          ringdown, sensor_correlations, two_mode_capture)
from .dynamics import mcwf, propagate
from .entanglement import concurrence, fidelity_and_herald, log_negativity
from .errors import CollectiveQOError, NumericalError, ValidationError
from .hilbert import StateMatrix, expectation, partial_trace
from .liouville import assemble, steady_state, steady_state_derivative
from .metrology import counting_fisher, joint_frequency_fisher, spectrum_fisher_sum
from .models import (CavityParams, DickeParams, DimerParams, FreeSpaceGeometry, LambdaParams, TlsParams,
                     build_dicke_cavity, build_dimer_cavity, build_driven_dimer, build_lambda, build_tls,
                     free_space_couplings, w_state)
from .reductions import mechanism_analytics, mechanism_classifier

log = logging.getLogger("collective_qo")

MAX_GRID = 10_000
UNITS = {"gamma": None, "Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
OUTPUTS = ("steady_state", "dynamics", "spectrum", "g2_map", "concurrence", "negativity_map", "fisher",
           "ringdown", "mechanism_report")
CURVE_OUTPUTS = {"dynamics", "spectrum", "g2_map"}
# analytic estimates outside their domain are reported as NaN with a false validity flag
NAN_OK = {"mechanism_report"}

# Per-kind parameter blocks with defaults (rates in gamma units).
_COMMON = {"t_min": 0.0, "t_max": 10.0, "n_t": 201, "log_time": False, "dynamics_method": "propagate",
           "n_traj": 200, "omega_max": 10.0, "n_omega": 801, "Gamma_filter": 0.1, "emit_op": "",
           "map_min": -5.0, "map_max": 5.0, "map_n": 11, "Gamma_xi": 1.0, "fisher_param": "Omega"}
_DIMER = {"gamma": 1.0, "gamma12": 0.0, "J": 0.0, "delta": 0.0, "Delta": 0.0, "Omega": 0.0, "P": 0.0,
          "kr12": 0.0, "orientation": "H"}
_TLS = {"gamma": 1.0, "Delta": 0.0, "Omega": 1.0}
KINDS: dict[str, dict] = {
    "tls": dict(_TLS),
    "lambda": {"Delta1": 0.0, "Delta2": 0.0, "DeltaV": 1.0, "Omega": 0.01, "Gamma": 1e-5, "GammaV": 0.0},
    "dimer_free_space": dict(_DIMER),
    "dimer_cavity": {**_DIMER, "g": 0.0, "kappa": 1.0, "Delta_a": 0.0, "n_trunc": 3},
    "dicke_cavity": {"N": 2, "J": 0.0, "gamma": 1.0, "gamma_col": 0.0, "P": 0.0, "g": 0.0, "kappa": 1.0,
                     "Delta_a": 0.0, "n_trunc": 2},
    "cascaded_sensors": {**_TLS, "Delta_xi1": 0.0, "Gamma_xi1": 1.0, "Delta_xi2": 0.0, "Gamma_xi2": 0.0,
                         "eta": 1.0, "n_levels": 2},
    "two_mode_capture": {**_TLS, "Delta1": 0.0, "Delta2": 0.0, "T": 5.0, "t0": 0.0, "t0_2": -1.0,
                         "splitting": "digital", "n_levels": 3},
}
SUPPORTED = {
    "tls": {"steady_state", "dynamics", "spectrum", "g2_map", "fisher"},
    "lambda": {"steady_state", "dynamics", "spectrum", "mechanism_report"},
    "dimer_free_space": {"steady_state", "dynamics", "spectrum", "g2_map", "concurrence", "fisher",
                         "mechanism_report"},
    "dimer_cavity": {"steady_state", "dynamics", "spectrum", "concurrence", "ringdown", "mechanism_report"},
    "dicke_cavity": {"steady_state", "dynamics", "ringdown"},
    "cascaded_sensors": {"steady_state", "dynamics", "fisher"},
    "two_mode_capture": {"negativity_map"},
}
# Keys that are not frequencies: left untouched by unit normalization.
DIMENSIONLESS = {"N", "n_trunc", "n_levels", "eta", "kr12", "orientation", "splitting", "emit_op", "n_t",
                 "n_omega", "map_n", "log_time", "dynamics_method", "n_traj", "fisher_param"}
TIMES = {"t_min", "t_max", "T", "t0", "t0_2"}
TOLERANCES = {
    "zero_tol": (_liou, "ZERO_TOL"),
    "metastable_ratio": (_liou, "METASTABLE_RATIO"),
    "p_floor": (_met, "P_FLOOR"),
    "ode_rtol": (_dyn, "RTOL"),
    "ode_atol": (_dyn, "ATOL"),
}


class ConfigError(ValidationError):
    """Malformed or inconsistent scenario configuration."""


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ScenarioConfig:
    """Declarative scenario.

    ``unit`` is ``"gamma"`` (all rates in units of the emitter decay rate)
    or a physical frequency unit; in that case ``gamma_value`` gives the
    decay rate in the same unit, ``cyclic`` marks values given as
    ``omega/2pi`` and times are in seconds.
    """

    kind: str
    params: Mapping[str, object] = field(default_factory=dict)
    outputs: tuple = ("steady_state",)
    sweep: Mapping[str, tuple] = field(default_factory=dict)
    seed: int = 0
    tolerances: Mapping[str, float] = field(default_factory=dict)
    unit: str = "gamma"
    gamma_value: float = 1.0
    cyclic: bool = False
    plots: bool = True

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "sweep", {k: tuple(float(x) for x in v) for k, v in self.sweep.items()})
        object.__setattr__(self, "params", dict(self.params))
        object.__setattr__(self, "tolerances", {k: float(v) for k, v in self.tolerances.items()})

    # -- (de)serialization

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScenarioConfig":
        d = dict(d)
        known = {"kind", "params", "outputs", "sweep", "seed", "tolerances", "unit", "gamma_value", "cyclic", "plots"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
        if "kind" not in d:
            raise ConfigError("config must declare a scenario kind")
        sweep = {}
        for k, v in dict(d.get("sweep", {})).items():
            if isinstance(v, Mapping):
                try:
                    v = np.linspace(float(v["start"]), float(v["stop"]), int(v["num"]))
                except KeyError as exc:
                    raise ConfigError(f"sweep {k!r} needs start, stop and num") from exc
            sweep[k] = tuple(float(x) for x in v)
        cfg = cls(kind=str(d["kind"]), params=dict(d.get("params", {})), outputs=tuple(d.get("outputs", ("steady_state",))),
                  sweep=sweep, seed=int(d.get("seed", 0)), tolerances=dict(d.get("tolerances", {})),
                  unit=str(d.get("unit", "gamma")), gamma_value=float(d.get("gamma_value", 1.0)),
                  cyclic=bool(d.get("cyclic", False)), plots=bool(d.get("plots", True)))
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {"kind": self.kind, "unit": self.unit, "gamma_value": self.gamma_value, "cyclic": self.cyclic,
                "seed": self.seed, "plots": self.plots, "outputs": list(self.outputs),
                "params": dict(sorted(self.params.items())),
                "sweep": {k: list(v) for k, v in self.sweep.items()},
                "tolerances": dict(sorted(self.tolerances.items()))}

    @classmethod
    def from_toml(cls, text: str) -> "ScenarioConfig":
        try:
            return cls.from_dict(tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config is not valid TOML: {exc}") from exc

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_toml().encode()).hexdigest()[:16]

    # -- validation

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}; expected one of {sorted(KINDS)}")
        block = KINDS[self.kind]
        allowed = set(block) | set(_COMMON)
        bad = set(self.params) - allowed
        if bad:
            raise ConfigError(f"unknown parameters for {self.kind}: {sorted(bad)}")
        for o in self.outputs:
            if o not in OUTPUTS:
                raise ConfigError(f"unknown output {o!r}")
            if o not in SUPPORTED[self.kind]:
                raise ConfigError(f"output {o!r} is not available for scenario {self.kind!r}")
        if not self.outputs:
            raise ConfigError("no outputs requested")
        if len(self.sweep) > 2:
            raise ConfigError("at most two parameters can be swept")
        for k, v in self.sweep.items():
            if k not in self.params:
                raise ConfigError(f"swept parameter {k!r} is not in the parameter block")
            if not v:
                raise ConfigError(f"sweep grid for {k!r} is empty")
        if int(np.prod([len(v) for v in self.sweep.values()])) > MAX_GRID:
            raise ConfigError(f"sweep grid exceeds {MAX_GRID} points")
        if self.unit not in UNITS:
            raise ConfigError(f"unknown unit {self.unit!r}; expected one of {sorted(UNITS)}")
        if not self.gamma_value > 0:
            raise ConfigError("gamma_value must be positive")
        for k in self.tolerances:
            if k not in TOLERANCES:
                raise ConfigError(f"unknown tolerance {k!r}; expected one of {sorted(TOLERANCES)}")

    # -- points

    def grid(self) -> list[dict]:
        names = list(self.sweep)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.sweep[n] for n in names))]

    def normalized(self, overrides: Mapping[str, float] | None = None) -> dict:
        """Full parameter set of one point in gamma units."""
        defaults = {**_COMMON, **KINDS[self.kind]}
        scale = UNITS[self.unit]
        if scale is not None and "gamma" in defaults:
            defaults["gamma"] = self.gamma_value     # default decay rate is the unit rate
        p = {**defaults, **self.params, **(overrides or {})}
        if scale is None:
            return p
        w = 2 * np.pi if self.cyclic else 1.0
        gamma_phys = self.gamma_value * scale * w      # rad/s
        out = {}
        for k, v in p.items():
            if k in DIMENSIONLESS or isinstance(v, (str, bool)):
                out[k] = v
            elif k in TIMES:
                out[k] = float(v) * gamma_phys if float(v) >= 0 else float(v)
            else:
                out[k] = float(v) / self.gamma_value
        return out

    def normalization_note(self) -> str:
        if UNITS[self.unit] is None:
            return "rates in units of gamma"
        c = "2pi x " if self.cyclic else ""
        return f"frequencies divided by gamma = {c}{self.gamma_value} {self.unit}; times in s multiplied by gamma"


@contextlib.contextmanager
def tolerance_overrides(tols: Mapping[str, float]):
    saved = []
    try:
        for k, v in tols.items():
            mod, attr = TOLERANCES[k]
            saved.append((mod, attr, getattr(mod, attr)))
            setattr(mod, attr, v)
        yield
    finally:
        for mod, attr, v in reversed(saved):
            setattr(mod, attr, v)


# ---------------------------------------------------------------------------
# scenario construction

def _dimer_params(p: dict) -> DimerParams:
    J, g12 = float(p["J"]), float(p["gamma12"])
    if float(p["kr12"]) > 0:
        J, g12 = free_space_couplings(FreeSpaceGeometry(float(p["kr12"]), 1.0, p["orientation"]), p["gamma"], p["gamma"])
    return DimerParams(float(p["gamma"]), g12, J, float(p["delta"]), float(p["Delta"]), float(p["Omega"]), float(p["P"]))


def _tls(p: dict):
    return build_tls(TlsParams(float(p["Delta"]), float(p["Omega"]), float(p["gamma"])))


def build_model(kind: str, p: dict):
    """System model of a scenario point (parameters in gamma units)."""
    if kind == "tls":
        return _tls(p)
    if kind == "lambda":
        return build_lambda(LambdaParams(*(float(p[k]) for k in ("Delta1", "Delta2", "DeltaV", "Omega", "Gamma", "GammaV"))))
    if kind == "dimer_free_space":
        return build_driven_dimer(_dimer_params(p))
    if kind == "dimer_cavity":
        return build_dimer_cavity(_dimer_params(p), _cavity(p))
    if kind == "dicke_cavity":
        return build_dicke_cavity(DickeParams(int(p["N"]), float(p["J"]), _cavity(p), float(p["gamma"]),
                                              float(p["gamma_col"]), float(p["P"])))
    if kind == "cascaded_sensors":
        src = _tls(p)
        n = int(p["n_levels"])
        s1 = SensorSpec(float(p["Delta_xi1"]), float(p["Gamma_xi1"]), float(p["eta"]))
        if float(p["Gamma_xi2"]) > 0:
            s2 = SensorSpec(float(p["Delta_xi2"]), float(p["Gamma_xi2"]), float(p["eta"]))
            return cascaded_two_sensors(src, [s1, s2], n_levels=n)
        return cascaded_attach(src, s1, n_levels=n)
    if kind == "two_mode_capture":
        return _tls(p)
    raise ConfigError(f"unknown scenario kind {kind!r}")


def _cavity(p: dict) -> CavityParams:
    return CavityParams(float(p["g"]), float(p["kappa"]), float(p["Delta_a"]), int(p["n_trunc"]))


def _emitter_sites(kind: str, model) -> list[int]:
    n = model.space.n_sites
    return list(range(n - 1)) if kind in ("dimer_cavity", "dicke_cavity") else list(range(n))


def _emit_op(kind: str, p: dict) -> str:
    if p.get("emit_op"):
        return str(p["emit_op"])
    return {"tls": "sigma", "lambda": "sigma12"}.get(kind, "sigma_total")


def _diag_columns(rho: StateMatrix, kind: str, model) -> dict:
    sites = _emitter_sites(kind, model)
    red = rho if len(sites) == model.space.n_sites else partial_trace(rho, sites)
    dims = [model.space.subsystem_dims[s] for s in sites]
    labels = ["".join(str(i) for i in idx) for idx in itertools.product(*(range(d) for d in dims))]
    return {f"p_{lab}": float(v) for lab, v in zip(labels, np.diag(red.matrix).real)}


# ---------------------------------------------------------------------------
# outputs

def _out_steady(kind, p, model, ctx):
    rho = ctx.rho()
    cols = _diag_columns(rho, kind, model)
    if kind in ("dimer_free_space", "dimer_cavity", "dicke_cavity"):
        X = sum(v.matrix for k, v in model.labels.items() if k.startswith("sigma") and k[5:].isdigit())
        cols["intensity"] = float(expectation(rho, X.conj().T @ X).real)
    if kind == "dicke_cavity":
        F, FH = fidelity_and_herald(rho, w_state(int(p["N"])), herald=model.labels["a"],
                                    keep=_emitter_sites(kind, model))
        cols["F_W"], cols["F_H"] = F, FH
    return cols


def _time_grid(p):
    n = int(p["n_t"])
    if p["log_time"]:
        lo = float(p["t_min"]) if float(p["t_min"]) > 0 else float(p["t_max"]) * 1e-6
        return np.concatenate([[0.0], np.geomspace(lo, float(p["t_max"]), n - 1)])
    return np.linspace(float(p["t_min"]), float(p["t_max"]), n)


def _out_dynamics(kind, p, model, ctx):
    t = _time_grid(p)
    d = model.dim
    if p["dynamics_method"] == "mcwf":
        psi0 = np.zeros(d, dtype=complex)
        psi0[0] = 1
        ev, _ = mcwf(model, psi0, t, int(p["n_traj"]), seed=ctx.seed)
    else:
        r0 = np.zeros((d, d), dtype=complex)
        r0[0, 0] = 1
        ev = propagate(ctx.L(), r0, t)
    rows = []
    for ti, s in zip(ev.times, ev.states):
        cols = _diag_columns(StateMatrix(model.space, s, check=False), kind, model)
        rows.append({"t": float(ti), **cols})
    return rows


def _out_spectrum(kind, p, model, ctx):
    om = np.linspace(-float(p["omega_max"]), float(p["omega_max"]), int(p["n_omega"]))
    sc = emission_spectrum(model, _emit_op(kind, p), om, float(p["Gamma_filter"]), L=ctx.L())
    return [{"omega": float(w), "S_inelastic": float(s), "S_elastic_weight": sc.elastic_weight}
            for w, s in zip(om, sc.inelastic_density)]


def _out_g2_map(kind, p, model, ctx):
    grid = np.linspace(float(p["map_min"]), float(p["map_max"]), int(p["map_n"]))
    G = float(p["Gamma_xi"])
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for w1 in grid:
            for w2 in grid:
                r = sensor_correlations(model, _emit_op(kind, p), [SensorSpec(w1, G), SensorSpec(w2, G)],
                                        check_halving=False)
                rows.append({"Delta_xi1": float(w1), "Delta_xi2": float(w2), "g2": float(r.g2)})
    return rows


def _out_concurrence(kind, p, model, ctx):
    rho = ctx.rho()
    red = partial_trace(rho, [0, 1]) if kind == "dimer_cavity" else rho
    return {"concurrence": concurrence(red)}


def _out_negativity(kind, p, model, ctx):
    T, t0 = float(p["T"]), float(p["t0"])
    t02 = float(p["t0_2"]) if float(p["t0_2"]) >= 0 else t0
    filters = [FilterSpec(T, t0, float(p["Delta1"])), FilterSpec(T, t02, float(p["Delta2"]))]
    res = two_mode_capture(model, filters, splitting=str(p["splitting"]), n_levels=int(p["n_levels"]))
    N, EN = log_negativity(res.state)
    return {"E_N": EN, "negativity": N, "overlap_abs": abs(res.overlap), "top_population": res.top_population}


def _out_fisher(kind, p, model, ctx):
    name = str(p["fisher_param"])
    if name not in p or isinstance(p[name], str):
        raise ConfigError(f"fisher_param {name!r} is not a numeric parameter")
    theta = float(p[name])

    def model_at(x):
        return build_model(kind, {**p, name: x})

    if kind == "cascaded_sensors":
        rho = steady_state(assemble(model_at(theta)))
        drho = steady_state_derivative(lambda x: assemble(model_at(x)), theta)
        if float(p["Gamma_xi2"]) > 0:
            r = joint_frequency_fisher(rho, drho, theta=name)
            return {"F_joint": r.F_joint, "F_1": r.F_marginals[0], "F_2": r.F_marginals[1]}
        r = counting_fisher(rho, drho, sites=[-1], theta=name)
        return {"F": r.F, "F0": r.F0, "F_P": r.F_P}
    om = np.linspace(-float(p["omega_max"]), float(p["omega_max"]), int(p["n_omega"]))

    def S(w, x):
        return emission_spectrum(model_at(x), _emit_op(kind, p), w, float(p["Gamma_filter"])).counts

    return {"F_spectrum": spectrum_fisher_sum(S, om, theta)}


def _out_ringdown(kind, p, model, ctx):
    off = build_model(kind, {**p, "Omega": 0.0})
    r = ringdown(off, ctx.rho())
    return {"n_T": r.n_T, "g_T2": r.g_T2, "divergent": int(r.divergent)}


def _out_mechanism(kind, p, model, ctx):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if kind == "lambda":
            dp = DimerParams(1.0, 0.0, 1.0, 0.0, 0.0, 0.0)
            rep = mechanism_analytics(dp, lambda_params=model.meta["params"])
            rep = {k: v for k, v in rep.as_dict().items() if k.startswith("Gamma_c")}
            labels = None
        else:
            dp = _dimer_params(p)
            cav = _cavity(p) if kind == "dimer_cavity" else None
            rep = mechanism_analytics(dp, cav).as_dict()
            labels = mechanism_classifier(dp, cav).labels
    cols = {}
    for k in sorted(rep):
        v, ok = rep[k]
        cols[k] = v
        cols[f"{k}_valid"] = int(ok)
    if labels is not None:
        cols["mechanisms"] = "+".join(sorted(labels)) or "none"
    return cols


HANDLERS = {"steady_state": _out_steady, "dynamics": _out_dynamics, "spectrum": _out_spectrum,
            "g2_map": _out_g2_map, "concurrence": _out_concurrence, "negativity_map": _out_negativity,
            "fisher": _out_fisher, "ringdown": _out_ringdown, "mechanism_report": _out_mechanism}


class _Context:
    """Lazily shared Liouvillian and steady state of one point."""

    def __init__(self, model, seed):
        self.model, self.seed = model, seed
        self._L = self._rho = None

    def L(self):
        if self._L is None:
            self._L = assemble(self.model)
        return self._L

    def rho(self):
        if self._rho is None:
            self._rho = steady_state(self.L())
        return self._rho


def point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def evaluate_point(cfg: ScenarioConfig, index: int, overrides: Mapping[str, float]) -> dict:
    """All requested outputs of one sweep point."""
    with tolerance_overrides(cfg.tolerances):
        p = cfg.normalized(overrides)
        model = build_model(cfg.kind, p)
        ctx = _Context(model, point_seed(cfg.seed, index))
        return {o: HANDLERS[o](cfg.kind, p, model, ctx) for o in cfg.outputs}


def _evaluate_star(args):
    return evaluate_point(*args)


# ---------------------------------------------------------------------------
# tables and files

@dataclass(frozen=True)
class ResultTable:
    """Rectangular table with units and a provenance header."""

    columns: tuple
    units: tuple
    rows: tuple
    provenance: Mapping[str, str]

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.columns):
                raise NumericalError("result table is not rectangular")
            for c, v in zip(self.columns, r):
                if isinstance(v, float) and np.isnan(v) and self.provenance.get("output") not in NAN_OK and c != "g2":
                    raise NumericalError(f"NaN in column {c!r}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in self.provenance.items():
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.columns)
        w.writerow(self.units)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def _unit_of(col: str, cfg: ScenarioConfig) -> str:
    freq = "gamma"
    if col in ("t",):
        return "1/gamma"
    if col in ("omega", "Delta_xi1", "Delta_xi2") or col in cfg.sweep and col not in DIMENSIONLESS:
        return "s" if col in TIMES and UNITS[cfg.unit] else (cfg.unit if col in cfg.sweep and UNITS[cfg.unit] else freq)
    return "1"


def _provenance(cfg: ScenarioConfig, output: str) -> dict:
    return {"output": output, "config_sha256": cfg.digest, "library": f"collective_qo {__version__}",
            "seed": str(cfg.seed), "normalization": cfg.normalization_note()}


def _cell(v):
    if isinstance(v, (complex, np.complexfloating)):
        return float(np.real(v))
    if v is None:
        return float("nan")
    return v


def assemble_tables(cfg: ScenarioConfig, points: list[dict], results: list[dict]) -> dict[str, ResultTable]:
    tables = {}
    sweep_cols = list(cfg.sweep)
    for o in cfg.outputs:
        rows, cols = [], None
        for pt, res in zip(points, results):
            block = res[o]
            recs = block if isinstance(block, list) else [block]
            for rec in recs:
                if cols is None:
                    cols = sweep_cols + list(rec)
                rows.append(tuple([pt[c] for c in sweep_cols] + [_cell(rec.get(c)) for c in cols[len(sweep_cols):]]))
        tables[o] = ResultTable(tuple(cols), tuple(_unit_of(c, cfg) for c in cols), tuple(rows), _provenance(cfg, o))
    return tables


def heatmaps(cfg: ScenarioConfig, tables: Mapping[str, ResultTable]) -> dict[str, ResultTable]:
    """Matrix layout (first swept parameter down, second across) of every scalar column of a 2-D sweep."""
    if len(cfg.sweep) != 2:
        return {}
    a, b = list(cfg.sweep)
    va, vb = cfg.sweep[a], cfg.sweep[b]
    out = {}
    for o, t in tables.items():
        if o in CURVE_OUTPUTS:
            continue
        for j, c in enumerate(t.columns[2:], start=2):
            if c.endswith("_valid") or not all(isinstance(r[j], (int, float, np.floating, np.integer)) for r in t.rows):
                continue
            M = np.array([r[j] for r in t.rows], dtype=float).reshape(len(va), len(vb))
            rows = tuple((x, *M[i]) for i, x in enumerate(va))
            cols = (f"{a}\\{b}",) + tuple(_fmt(y) for y in vb)
            out[f"{o}_{c}_heatmap"] = ResultTable(cols, (_unit_of(a, cfg),) + (c,) * len(vb), rows,
                                                  {**t.provenance, "layout": f"rows {a}, columns {b}"})
    return out


def _svg(tables: Mapping[str, ResultTable], cfg: ScenarioConfig, out: Path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "collective_qo"
    for name, t in tables.items():
        fig, ax = plt.subplots(figsize=(5, 3.6))
        try:
            if name.endswith("_heatmap"):
                M = np.array([r[1:] for r in t.rows], dtype=float)
                xs = [float(x) for x in t.columns[1:]]
                ys = [float(r[0]) for r in t.rows]
                im = ax.pcolormesh(xs, ys, M, shading="nearest")
                fig.colorbar(im, ax=ax, label=t.units[1])
                a, b = t.columns[0].split("\\")
                ax.set_xlabel(b)
                ax.set_ylabel(a)
            else:
                num = [j for j, _ in enumerate(t.columns)
                       if all(isinstance(r[j], (int, float, np.floating, np.integer)) for r in t.rows)]
                if not num or len(t.rows) < 2:
                    continue
                x = 0 if t.columns[0] in cfg.sweep or t.columns[0] in ("t", "omega", "Delta_xi1") else None
                if x is None:
                    continue
                xs = np.array([r[x] for r in t.rows], dtype=float)
                for j in [j for j in num if j != x and not t.columns[j].endswith("_valid")][:6]:
                    ax.plot(xs, np.array([r[j] for r in t.rows], dtype=float), label=t.columns[j])
                ax.set_xlabel(t.columns[x])
                if t.columns[x] == "t" and np.all(xs[1:] > 0) and xs[-1] / max(xs[1], 1e-300) > 1e3:
                    ax.set_xscale("log")
                ax.legend(fontsize=7)
            fig.tight_layout()
            fig.savefig(out / f"{name}.svg", metadata={"Date": None})
        finally:
            plt.close(fig)


def run_config(cfg: ScenarioConfig, out: Path, workers: int = 1) -> dict[str, ResultTable]:
    """Evaluate every sweep point and write CSV (and SVG) files into ``out``."""
    cfg.validate()
    out.mkdir(parents=True, exist_ok=True)
    points = cfg.grid()
    # fail early on parameter-level invariants
    build_model(cfg.kind, cfg.normalized(points[0]))
    t0 = time.perf_counter()
    args = [(cfg, i, pt) for i, pt in enumerate(points)]
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_evaluate_star, args, chunksize=max(1, len(args) // (4 * workers))))
    else:
        results = [_evaluate_star(a) for a in args]
    tables = assemble_tables(cfg, points, results)
    tables.update(heatmaps(cfg, tables))
    for name, t in tables.items():
        (out / f"{name}.csv").write_text(t.to_csv(), newline="")
    if cfg.plots:
        _svg(tables, cfg, out)
    (out / "config.toml").write_text(cfg.to_toml())
    manifest = {"config_sha256": cfg.digest, "library": __version__, "workers": workers,
                "points": len(points), "wall_time_s": round(time.perf_counter() - t0, 3),
                "files": sorted(f"{n}.csv" for n in tables)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    log.info("wrote %d tables to %s", len(tables), out)
    return tables


# ---------------------------------------------------------------------------
# figure presets

def _preset_configs() -> dict[str, ScenarioConfig]:
    J, d = 9.18e4, 9.18e2
    R = float(np.hypot(J, d))
    mol = {"gamma": 1.0, "g": 19.25, "kappa": 58.0, "delta": 7.65, "Omega": 9.25, "n_trunc": 4}
    r = 1000.0
    return {
        "intensity_vs_delta": ScenarioConfig(
            "dimer_free_space", {"gamma": 1.0, "gamma12": 0.999, "J": r * np.cos(np.pi / 4), "delta": r * np.sin(np.pi / 4),
                                 "Omega": 10.0, "Delta": 0.0},
            ("steady_state",), {"Delta": tuple(np.linspace(-1.5 * r, 1.5 * r, 301))}),
        "spectrum_13_sidebands": ScenarioConfig(
            "dimer_free_space", {"gamma": 1.0, "gamma12": 0.0, "J": 100 * np.cos(np.pi / 4), "delta": 100 * np.sin(np.pi / 4),
                                 "Omega": 100.0, "Gamma_filter": 0.1, "omega_max": 600.0, "n_omega": 6001},
            ("spectrum",)),
        "lambda_metastability": ScenarioConfig(
            "lambda", {"DeltaV": 1.0, "Omega": 0.01, "Gamma": 1e-5, "t_min": 1e-2, "t_max": 1e10, "n_t": 241,
                       "log_time": True},
            ("dynamics", "mechanism_report")),
        "concurrence_mechanism_I": ScenarioConfig(
            "dimer_cavity", {"gamma": 1.0, "gamma12": 0.999, "J": J, "delta": d, "Omega": 1e4, "g": 1e3,
                             "kappa": 1e4, "Delta_a": 0.0, "n_trunc": 3},
            ("concurrence", "mechanism_report"), {"Delta_a": tuple(np.linspace(-1.2 * R, 1.2 * R, 49)) + (-R, 0.0, R)}),
        "concurrence_mechanism_II": ScenarioConfig(
            "dimer_cavity", mol, ("concurrence", "mechanism_report"), {"Omega": tuple(np.linspace(1.0, 30.0, 30))}),
        "wstate_fidelity_N5": ScenarioConfig(
            "dicke_cavity", {"N": 5, "J": 1e5, "gamma": 1.0, "gamma_col": 0.999, "P": 132.3, "g": 1242.1,
                             "kappa": 12421.0, "Delta_a": -3e5, "n_trunc": 1},
            ("steady_state",)),
        "mollow_triplet": ScenarioConfig(
            "tls", {"Omega": 10.0, "Gamma_filter": 0.01, "omega_max": 40.0, "n_omega": 2001}, ("spectrum",)),
        "EN_frequency_map": ScenarioConfig(
            # drive amplitude is half the Rabi frequency; capture starts once the source is stationary
            "two_mode_capture", {"Omega": 16.165, "Delta1": -32.33, "Delta2": 32.33, "T": 100e-9, "t0": 200e-9},
            ("negativity_map",), {"Delta1": (-48.5, -32.33, -16.17), "Delta2": (16.17, 32.33, 48.5)},
            unit="MHz", gamma_value=8.0, cyclic=True),
        "fisher_distance": ScenarioConfig(
            "dimer_free_space", {"gamma": 1.0, "kr12": 0.17, "delta": 50.0, "Omega": 5.0, "Gamma_filter": 1.0,
                                 "omega_max": 400.0, "n_omega": 1601, "fisher_param": "kr12"},
            ("fisher",), {"Omega": tuple(np.geomspace(1.0, 40.0, 16))}),
        "joint_fisher_map": ScenarioConfig(
            "cascaded_sensors", {"Omega": 2.0, "Delta_xi1": -4.0, "Gamma_xi1": 0.5, "Delta_xi2": 4.0, "Gamma_xi2": 0.5,
                                 "eta": 1.0, "fisher_param": "Omega"},
            ("fisher",), {"Delta_xi1": tuple(np.linspace(-6, 6, 7)), "Delta_xi2": tuple(np.linspace(-6, 6, 7))}),
    }


PRESETS = tuple(sorted(_preset_configs()))


def preset(name: str) -> ScenarioConfig:
    cfgs = _preset_configs()
    if name not in cfgs:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(cfgs)}")
    return cfgs[name]


# ---------------------------------------------------------------------------
# entry point

def _parse_tol(items) -> dict:
    out = {}
    for it in items or ():
        if "=" not in it:
            raise ConfigError(f"--tol-override expects NAME=VALUE, got {it!r}")
        k, v = it.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError as exc:
            raise ConfigError(f"tolerance {k!r} must be numeric") from exc
    return out


def _load(path: str) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return ScenarioConfig.from_toml(text)


def _apply_cli(cfg: ScenarioConfig, args) -> ScenarioConfig:
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=int(args.seed))
    tol = _parse_tol(getattr(args, "tol_override", None))
    if tol:
        cfg = replace(cfg, tolerances={**cfg.tolerances, **tol})
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="collective-qo", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--tol-override", action="append", metavar="NAME=VALUE",
                        help=f"numerical tolerance override ({', '.join(sorted(TOLERANCES))})")
    common.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
    r = sub.add_parser("run", parents=[common], help="run a scenario config")
    r.add_argument("config")
    s = sub.add_parser("sweep", parents=[common], help="run the sweep block of a config in parallel")
    s.add_argument("config")
    f = sub.add_parser("figure", parents=[common], help="reproduce a figure preset")
    f.add_argument("preset", help=", ".join(PRESETS))
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = Path(args.out)
    try:
        if args.command == "figure":
            cfg = _apply_cli(preset(args.preset), args)
            out = out / args.preset if args.out == "results" else out
        else:
            cfg = _apply_cli(_load(args.config), args)
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        run_config(cfg, out, workers=args.workers)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        msg = f"numerical failure: {type(exc).__name__}: {exc}"
        print(msg, file=sys.stderr)
        with contextlib.suppress(OSError):
            out.mkdir(parents=True, exist_ok=True)
            (out / "diagnostic.log").write_text(msg + "\n")
        return 3
    except CollectiveQOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
