"""
Scenario files: one plain-text file describes a full experiment.

The format is INI-style key/value sections (diffable, hashable):

    [problem]      dimension, points, steps, horizon
    [cost.F]       kind = running-static | running | none; c1, c2, ... are
                   grammar expressions (t allowed for running costs), or
                   builtin = <name>
    [cost.G]       kind = terminal | none; c1, c2, ...
    [cost.H]       type = quadratic, or type = series with entries
                   c[b1,...,bn] = expression and order = <int>
    [initial]      m0 = expression
    [solver]       max_iters, relaxation, tolerance, smallness_delta, dealias
    [probes]       probeN = constant | plane:k1[,k2[,k3]][:cos|sin|complex]
    [recovery]     cutoff, time_basis, lambda, epsilon, source, floor
    [linearize]    order, epsilon, method
    [output]       seed

Unknown keys and malformed values are reported with the offending
section/key named; configparser supplies line numbers for syntax errors.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costs import HamiltonianSeries, TaylorCost, quadratic_hamiltonian
from .expressions import parse_expression
from .forward import MFGConfig, PicardParams
from .grids import ScalarField, SpatialGrid, TimeGrid, ValidationError
from .linearize import ProbeSpec
from .recovery import ProbePlan

__all__ = ["Scenario", "load_scenario", "parse_scenario_text", "BUILTIN_EXPRESSIONS"]

# closed-form builtins; the counterexample pairs are non-periodic and are
# rejected as solver costs, but stay addressable by name for reports and
# window evaluation.
BUILTIN_EXPRESSIONS = {
    "prop41-F": "-sin(x1) + (exp(t)-1)**2*cos(x1)**2/4",
    "prop41-G1": "(exp(1)-1)*sin(x1)",
    "prop41-G2": "(1-exp(1))*sin(x1)",
    "prop42-F1": "-x1*(2*t-1) + t**2*(t-1)**2/2",
    "prop42-F2": "-2*x1*(2*t-1) + 2*t**2*(t-1)**2",
}

_KNOWN_KEYS = {
    "problem": {"dimension", "points", "steps", "horizon"},
    "cost.f": {"kind", "builtin", "radius"},
    "cost.g": {"kind", "builtin", "radius"},
    "cost.h": {"type", "order", "builtin"},
    "initial": {"m0"},
    "solver": {"max_iters", "relaxation", "tolerance", "smallness_delta", "dealias"},
    "recovery": {"cutoff", "time_basis", "lambda", "epsilon", "source", "floor"},
    "linearize": {"order", "epsilon", "method"},
    "output": {"seed"},
}


@dataclass(frozen=True)
class Scenario:
    grid: SpatialGrid
    time: TimeGrid
    config: MFGConfig
    m0: ScalarField
    probes: tuple[ProbeSpec, ...]
    recovery_cutoff: int = 4
    recovery_time_basis: int = 1
    recovery_lambda: float = 0.0
    recovery_epsilon: float = 1e-3
    recovery_source: str = "synthetic"
    recovery_floor: float = 1e-8
    linearize_order: int = 1
    linearize_epsilon: float = 1e-3
    linearize_method: str = "both"
    seed: int = 0
    text_hash: str = ""
    raw: dict = field(default_factory=dict)

    def probe_plan(self) -> ProbePlan:
        return ProbePlan(
            probes=self.probes,
            cutoff=self.recovery_cutoff,
            time_basis_size=self.recovery_time_basis,
            tikhonov=self.recovery_lambda,
            division_floor=self.recovery_floor,
        )


def _get(parser, section, key, conv, default=None, required=False):
    if not parser.has_section(section) or not parser.has_option(section, key):
        if required:
            raise ValidationError(f"missing required key [{section}] {key}")
        return default
    raw = parser.get(section, key)
    try:
        if conv is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return conv(raw)
    except ValueError as exc:
        raise ValidationError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from exc


def _check_known_keys(parser):
    for section in parser.sections():
        low = section.lower()
        if low in _KNOWN_KEYS:
            allowed = _KNOWN_KEYS[low]
            for key in parser.options(section):
                if key in allowed or key.startswith("c"):
                    continue
                raise ValidationError(f"unknown key {key!r} in section [{section}]")
        elif low not in ("probes",):
            raise ValidationError(f"unknown section [{section}]")


def _parse_cost(parser, section, kind_default, grid, time):
    sec = None
    for s in parser.sections():
        if s.lower() == section:
            sec = s
            break
    if sec is None:
        return None
    kind = _get(parser, sec, "kind", str, kind_default).strip()
    if kind == "none":
        return None
    if parser.has_option(sec, "builtin"):
        name = parser.get(sec, "builtin").strip()
        if name in BUILTIN_EXPRESSIONS:
            raise ValidationError(
                f"builtin {name!r} is a non-periodic counterexample closed form; "
                "it cannot be used as a solver cost "
                "(run `verify-counterexample` instead)"
            )
        raise ValidationError(f"unknown cost builtin {name!r}")
    if kind not in ("running", "running-static", "terminal"):
        raise ValidationError(f"bad kind {kind!r} in [{sec}]")
    coeffs = []
    k = 1
    while parser.has_option(sec, f"c{k}"):
        text = parser.get(sec, f"c{k}")
        expr = parse_expression(text, grid.dim, allow_time=(kind == "running"))
        if kind == "running":
            nodes = time.nodes()
            arr = np.stack([expr.evaluate(grid, t).values for t in nodes])
        else:
            arr = expr.evaluate(grid, 0.0).values
        coeffs.append(arr)
        k += 1
    if not coeffs:
        raise ValidationError(f"[{sec}] defines no coefficients (c1, c2, ...)")
    radius = _get(parser, sec, "radius", float, 1.0)
    return TaylorCost(
        kind,
        grid,
        tuple(coeffs),
        time if kind == "running" else None,
        convergence_radius_hint=radius,
    )


def _parse_hamiltonian(parser, grid) -> HamiltonianSeries:
    sec = None
    for s in parser.sections():
        if s.lower() == "cost.h":
            sec = s
            break
    if sec is None:
        return quadratic_hamiltonian(grid)
    if parser.has_option(sec, "builtin"):
        name = parser.get(sec, "builtin").strip()
        if name == "quadratic-H":
            return quadratic_hamiltonian(grid)
        raise ValidationError(f"unknown Hamiltonian builtin {name!r}")
    htype = _get(parser, sec, "type", str, "quadratic").strip()
    if htype == "quadratic":
        return quadratic_hamiltonian(grid)
    if htype != "series":
        raise ValidationError(f"bad Hamiltonian type {htype!r}")
    order = _get(parser, sec, "order", int, 2)
    coeffs = {}
    for key in parser.options(sec):
        if not (key.startswith("c[") and key.endswith("]")):
            continue
        beta = tuple(int(b) for b in key[2:-1].split(","))
        expr = parse_expression(parser.get(sec, key), grid.dim, allow_time=False)
        coeffs[beta] = expr.evaluate(grid, 0.0).values
    if not coeffs:
        raise ValidationError(f"[{sec}] series Hamiltonian has no c[...] entries")
    return HamiltonianSeries(grid, order, coeffs)


def _parse_probe(text: str, dim: int) -> ProbeSpec:
    text = text.strip()
    if text == "constant":
        return ProbeSpec(mode="constant", zeta=(0,) * dim)
    if text.startswith("plane:"):
        parts = text.split(":")
        zeta = tuple(int(v) for v in parts[1].split(","))
        if len(zeta) != dim:
            raise ValidationError(
                f"probe {text!r}: frequency has {len(zeta)} components, expected {dim}"
            )
        phase = parts[2] if len(parts) > 2 else "complex"
        return ProbeSpec(mode="plane", zeta=zeta, phase=phase)
    raise ValidationError(f"cannot parse probe {text!r}")


def parse_scenario_text(text: str) -> Scenario:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"scenario parse error: {exc}") from exc
    _check_known_keys(parser)

    dim = _get(parser, "problem", "dimension", int, required=True)
    N = _get(parser, "problem", "points", int, required=True)
    M = _get(parser, "problem", "steps", int, required=True)
    T = _get(parser, "problem", "horizon", float, required=True)
    if T <= 0:
        raise ValidationError(f"bad value for [problem] horizon: {T} (must be positive)")
    grid = SpatialGrid(dim, N)
    time = TimeGrid(T, M)

    F = _parse_cost(parser, "cost.f", "running-static", grid, time)
    G = _parse_cost(parser, "cost.g", "terminal", grid, time)
    H = _parse_hamiltonian(parser, grid)

    picard = PicardParams(
        max_iters=_get(parser, "solver", "max_iters", int, 80),
        relaxation=_get(parser, "solver", "relaxation", float, 0.5),
        tolerance=_get(parser, "solver", "tolerance", float, 1e-10),
    )
    cfg = MFGConfig(
        grid,
        time,
        H,
        F=F,
        G=G,
        picard=picard,
        smallness_delta=_get(parser, "solver", "smallness_delta", float, 0.05),
        dealias=_get(parser, "solver", "dealias", bool, True),
    )

    m0_text = _get(parser, "initial", "m0", str, "0")
    m0 = parse_expression(m0_text, dim, allow_time=False).evaluate(grid, 0.0)

    probes = []
    if parser.has_section("probes"):
        for key in sorted(parser.options("probes")):
            probes.append(_parse_probe(parser.get("probes", key), dim))
    if not probes:
        probes = [ProbeSpec(mode="constant", zeta=(0,) * dim)]

    scen = Scenario(
        grid=grid,
        time=time,
        config=cfg,
        m0=m0,
        probes=tuple(probes),
        recovery_cutoff=_get(parser, "recovery", "cutoff", int, 4),
        recovery_time_basis=_get(parser, "recovery", "time_basis", int, 1),
        recovery_lambda=_get(parser, "recovery", "lambda", float, 0.0),
        recovery_epsilon=_get(parser, "recovery", "epsilon", float, 1e-3),
        recovery_source=_get(parser, "recovery", "source", str, "synthetic"),
        recovery_floor=_get(parser, "recovery", "floor", float, 1e-8),
        linearize_order=_get(parser, "linearize", "order", int, 1),
        linearize_epsilon=_get(parser, "linearize", "epsilon", float, 1e-3),
        linearize_method=_get(parser, "linearize", "method", str, "both"),
        seed=_get(parser, "output", "seed", int, 0),
        text_hash=hashlib.sha256(text.encode()).hexdigest(),
    )
    if scen.recovery_source not in ("synthetic", "pipeline"):
        raise ValidationError(
            f"bad value for [recovery] source: {scen.recovery_source!r}"
        )
    if scen.recovery_cutoff >= N // 2:
        raise ValidationError(
            f"bad value for [recovery] cutoff: {scen.recovery_cutoff} "
            f"(must stay below Nyquist {N // 2})"
        )
    return scen


def load_scenario(path) -> Scenario:
    return parse_scenario_text(Path(path).read_text())
