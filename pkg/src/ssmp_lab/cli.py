"""Reproducible experiment runner.

``ssmp-lab <scenario> --config <path> --seed <u64> [--threads N]
[--out DIR]`` parses a TOML experiment config, dispatches to the
library operation behind the scenario, and writes report files into
the output directory.  The exit status is 0 exactly when every
*declared* tolerance verdict passes (a scenario with no declared
targets passes vacuously); any failed check is listed on stderr.

Config layout
-------------

Every config carries a ``[model]`` table and a ``[params]`` table.
Models come in two kinds::

    [model]
    kind = "stable"
    alpha = 1.5
    rho = 0.5

or, for a modulated model, the sectioned form whose field names are
part of the package's external contract and round-trip losslessly
through :func:`model_to_toml` / :func:`model_from_obj`::

    [model]
    kind = "map"

    [model.chain]
    rates = [[-1.0, 1.0], [1.0, -1.0]]

    [model.component.0]
    drift = 1.0                     # gaussian_sd, cp_rate optional
    cp_rate = 0.5
    jumps = [{ weight = 1.0, kind = "exp", mean = 2.0, sign = -1 }]

    [model.switch.0.1]              # jump law fired on the 0 -> 1 switch
    jumps = [{ weight = 1.0, kind = "point", value = 0.25 }]

``seed`` may sit in ``[params]`` or come from ``--seed`` (the flag
wins); there is *no* wall-clock default.  All scenario parameters are
read from ``[params]`` and documented per runner below.

Report contract
---------------

Every scenario writes ``<scenario>_report.json`` embedding the
artifact name and version, the SHA-256 hash of the config file bytes,
the seed, the thread count, and one record per check with the
``EstimateReport`` schema (name, value, stderr, n, seed, target,
tolerance, verdict).  Scenarios with tabular series additionally write
``estimates.csv`` (columns ``name,value,stderr,n,seed,verdict``),
``paths.csv`` (modulated: ``replica,event_index,t,xi,state,event_type``;
stable: ``replica,t,x``), or ``renewal_bins.csv``
(``i,j,bin_lo,bin_hi,mass,stderr``).  Numeric report fields are a pure
function of (config, seed, threads): rerunning the same triple
reproduces every file byte for byte.  Non-finite values are serialised
as strings in JSON (``"nan"``) and bare literals in CSV.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

try:  # pragma: no cover - version-dependent stdlib import
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import __version__
from .conditioning import (
    condition,
    event_positive,
    event_whole_space,
    tau0_tail_check,
    verify_absorb_limit,
    verify_avoid_limit,
    verify_time_limit,
)
from .map_core import (
    JumpLaw,
    LevyComponent,
    MapSpec,
    esscher_spec,
    find_cramer_bracket,
    matrix_exponent,
    mean_drift,
    mu_theta_candidates,
    spectral_data,
)
from .numerics import DomainError
from .renewal import DeclaredIntegrand, poissonize, renewal_limit_check, renewal_measure
from .simulate import EstimateReport, StopRule, passage_prob_is, simulate_map
from .stable_model import (
    StableParams,
    exit_interval_value,
    hit_interval_value,
    hit_probability_mc,
    rbz_F,
    simulate_stable_path,
    stable_F,
    stable_spectral,
)

__all__ = [
    "SCENARIOS",
    "ConfigError",
    "load_config",
    "model_from_obj",
    "model_to_obj",
    "model_to_toml",
    "toml_dumps",
    "run",
    "main",
]


class ConfigError(ValueError):
    """The experiment config is missing, malformed, or incomplete."""


# ---------------------------------------------------------------------------
# TOML writing (the reader is tomllib); deterministic, subset sufficient
# for configs and model files
# ---------------------------------------------------------------------------

_BARE_KEY = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-")


def _toml_key(key: str) -> str:
    if key and all(c in _BARE_KEY for c in key):
        return key
    return json.dumps(key)


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        text = repr(value)
        return text if any(c in text for c in ".eE") else text + ".0"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    if isinstance(value, dict):
        inner = ", ".join(f"{_toml_key(k)} = {_toml_value(v)}" for k, v in value.items())
        return "{ " + inner + " }"
    raise ConfigError(f"cannot serialise {type(value).__name__} to TOML")


def toml_dumps(mapping: dict, _prefix: str = "") -> str:
    """Serialise a nested dict to TOML text.

    Scalars, arrays, and inline tables inside arrays are written on
    key lines; nested dicts become ``[dotted.sections]`` in insertion
    order.  The output parses back to an equal structure and is
    deterministic, which the byte-identical rerun contract relies on.
    """
    lines: list[str] = []
    sections: list[tuple[str, dict]] = []
    for key, value in mapping.items():
        if isinstance(value, dict):
            sections.append((key, value))
        else:
            lines.append(f"{_toml_key(key)} = {_toml_value(value)}")
    out = "\n".join(lines)
    for key, sub in sections:
        path = f"{_prefix}{_toml_key(key)}"
        body = toml_dumps(sub, _prefix=path + ".")
        header = f"[{path}]"
        block = header + ("\n" + body if body else "")
        out = (out + "\n\n" if out else "") + block
    return out


# ---------------------------------------------------------------------------
# model serialisation
# ---------------------------------------------------------------------------


def _law_to_obj(law: JumpLaw) -> list[dict]:
    rows = []
    for w, atom in zip(law.weights, law.atoms):
        if atom[0] == "point":
            rows.append({"weight": w, "kind": "point", "value": atom[1]})
        else:
            rows.append({"weight": w, "kind": "exp", "mean": atom[1], "sign": atom[2]})
    return rows


def _law_from_obj(rows) -> JumpLaw:
    if not rows:
        return JumpLaw.zero()
    weights, atoms = [], []
    for row in rows:
        try:
            weights.append(float(row["weight"]))
            kind = row["kind"]
            if kind == "point":
                atoms.append(("point", float(row["value"])))
            elif kind == "exp":
                atoms.append(("exp", float(row["mean"]), int(row["sign"])))
            else:
                raise ConfigError(f"unknown jump kind {kind!r}")
        except KeyError as exc:
            raise ConfigError(f"jump row {row!r} is missing field {exc}") from exc
    return JumpLaw(tuple(weights), tuple(atoms))


def model_to_obj(model) -> dict:
    """The ``[model]`` table for a model, as a plain dict."""
    if isinstance(model, StableParams):
        return {"kind": "stable", "alpha": model.alpha, "rho": model.rho}
    if not isinstance(model, MapSpec):
        raise ConfigError(f"cannot serialise model of type {type(model).__name__}")
    obj: dict = {"kind": "map", "chain": {"rates": [list(row) for row in model.q_matrix]}}
    components: dict = {}
    for i, comp in enumerate(model.components):
        entry: dict = {"drift": comp.drift}
        if comp.gaussian_sd:
            entry["gaussian_sd"] = comp.gaussian_sd
        if comp.cp_rate:
            entry["cp_rate"] = comp.cp_rate
            entry["jumps"] = _law_to_obj(comp.cp_jump_law)
        components[str(i)] = entry
    obj["component"] = components
    switches: dict = {}
    q = model.q
    for i in range(model.n_states):
        for j in range(model.n_states):
            if i != j and q[i, j] > 0.0 and not model.switch_jumps[i][j].is_zero:
                switches.setdefault(str(i), {})[str(j)] = {
                    "jumps": _law_to_obj(model.switch_jumps[i][j])
                }
    if switches:
        obj["switch"] = switches
    return obj


def model_from_obj(obj: dict):
    """Rebuild a model from its ``[model]`` table."""
    try:
        kind = obj["kind"]
    except KeyError:
        raise ConfigError("[model] needs a 'kind' field ('map' or 'stable')") from None
    if kind == "stable":
        try:
            return StableParams(float(obj["alpha"]), float(obj["rho"]))
        except KeyError as exc:
            raise ConfigError(f"stable model needs field {exc}") from exc
    if kind != "map":
        raise ConfigError(f"unknown model kind {kind!r}")
    try:
        rates = obj["chain"]["rates"]
    except KeyError:
        raise ConfigError("map model needs [model.chain] with 'rates'") from None
    comp_table = obj.get("component", {})
    n = len(rates)
    components = []
    for i in range(n):
        entry = comp_table.get(str(i))
        if entry is None:
            raise ConfigError(f"map model is missing [model.component.{i}]")
        components.append(
            LevyComponent(
                drift=float(entry.get("drift", 0.0)),
                gaussian_sd=float(entry.get("gaussian_sd", 0.0)),
                cp_rate=float(entry.get("cp_rate", 0.0)),
                cp_jump_law=_law_from_obj(entry.get("jumps", ())),
            )
        )
    switch = {}
    for i_key, row in obj.get("switch", {}).items():
        for j_key, entry in row.items():
            switch[(int(i_key), int(j_key))] = _law_from_obj(entry.get("jumps", ()))
    return MapSpec.build(rates, components, switch)


def model_to_toml(model) -> str:
    """A complete TOML document holding one ``[model]`` table."""
    return toml_dumps({"model": model_to_obj(model)}) + "\n"


# ---------------------------------------------------------------------------
# config loading
# ---------------------------------------------------------------------------


def load_config(path: str | Path) -> tuple[dict, str]:
    """Parse a config file; returns (config dict, hex config hash)."""
    raw = Path(path).read_bytes()
    try:
        cfg = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg, hashlib.sha256(raw).hexdigest()


def _require(params: dict, field: str, scenario: str):
    if field not in params:
        raise ConfigError(f"scenario {scenario!r} needs [params] field {field!r}")
    return params[field]


def _float_list(value, field: str) -> tuple[float, ...]:
    try:
        out = tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[params] {field} must be a list of numbers") from exc
    if not out:
        raise ConfigError(f"[params] {field} must not be empty")
    return out


_EVENTS = {"whole_space": event_whole_space, "positive": event_positive}


def _event_from(params: dict) -> tuple[str, object]:
    name = params.get("event", "whole_space")
    if name not in _EVENTS:
        raise ConfigError(f"unknown event {name!r}; use one of {sorted(_EVENTS)}")
    return name, _EVENTS[name]


def _spectral_for(model):
    if isinstance(model, StableParams):
        return stable_spectral(model)
    return spectral_data(model, find_cramer_bracket(model))


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------


def _json_safe(x):
    if x is None or isinstance(x, (bool, int, str)):
        return x
    x = float(x)
    if math.isfinite(x):
        return x
    return repr(x)


def _est_obj(est: EstimateReport) -> dict:
    return {
        "name": est.name,
        "value": _json_safe(est.value),
        "stderr": _json_safe(est.stderr),
        "n": est.n,
        "seed": est.seed,
        "target": _json_safe(est.target),
        "tolerance": _json_safe(est.tolerance),
        "verdict": est.verdict,
    }


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: tuple[str, ...], rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_csv_cell(cell) for cell in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _write_estimates(out: Path, estimates: list[EstimateReport]) -> None:
    _write_csv(
        out / "estimates.csv",
        ("name", "value", "stderr", "n", "seed", "verdict"),
        ((e.name, e.value, e.stderr, e.n, e.seed, e.verdict) for e in estimates),
    )


# ---------------------------------------------------------------------------
# scenario runners; each returns (estimates, extras)
# ---------------------------------------------------------------------------


def _run_spectrum(model, params, seed, threads, out):
    tol = float(params.get("tol", 1e-8))
    sd = _spectral_for(model)
    estimates = [
        EstimateReport("theta", sd.theta, 0.0, 1, seed),
        EstimateReport(
            "chi_at_theta", abs(sd.chi_at(sd.theta)), 0.0, 1, seed, target=0.0, tolerance=tol
        ),
    ]
    extras = {
        "theta": _json_safe(sd.theta),
        "v_theta": [_json_safe(v) for v in sd.v_theta],
        "pi": [_json_safe(p) for p in sd.pi],
        "pi_theta": [_json_safe(p) for p in sd.pi_theta],
        "chi_prime_0": _json_safe(sd.chi_prime_0),
        "chi_prime_theta": _json_safe(sd.chi_prime_theta),
    }
    if isinstance(model, MapSpec):
        mu_primary, mu_alt = mu_theta_candidates(sd)
        extras["mean_drift"] = _json_safe(mean_drift(model))
        extras["mu_theta_candidates"] = [_json_safe(mu_primary), _json_safe(mu_alt)]
    return estimates, extras


def _run_tilt(model, params, seed, threads, out):
    if not isinstance(model, MapSpec):
        raise ConfigError("scenario 'tilt' needs a map model")
    tol = float(params.get("tol", 1e-9))
    sd = _spectral_for(model)
    gamma = float(params.get("gamma", sd.theta))
    z_grid = _float_list(params.get("z_grid", [-0.5 * gamma, -0.25 * gamma, 0.25 * gamma, 0.5 * gamma]), "z_grid")
    tilted, residual = esscher_spec(model, gamma)
    chi_gamma = sd.chi_at(gamma)
    v_gamma = sd.v_at(gamma)
    d = np.diag(v_gamma)
    d_inv = np.diag(1.0 / v_gamma)
    cocycle = 0.0
    conjugation = 0.0
    for z in z_grid:
        lhs = matrix_exponent(tilted, z)
        rhs = d_inv @ matrix_exponent(model, z + gamma) @ d - chi_gamma * np.eye(model.n_states)
        conjugation = max(conjugation, float(np.abs(lhs - rhs).max()))
        cocycle = max(cocycle, abs(_chi_of(tilted, z) - (sd.chi_at(z + gamma) - chi_gamma)))
    estimates = [
        EstimateReport("esscher_cocycle", cocycle, 0.0, len(z_grid), seed, target=0.0, tolerance=tol),
        EstimateReport("tilt_conjugation", conjugation, 0.0, len(z_grid), seed, target=0.0, tolerance=tol),
        EstimateReport("tilt_residual", residual, 0.0, 1, seed),
    ]
    (out / "tilted_model.toml").write_text(model_to_toml(tilted))
    extras = {
        "gamma": _json_safe(gamma),
        "chi_at_gamma": _json_safe(chi_gamma),
        "mean_drift_base": _json_safe(mean_drift(model)),
        "mean_drift_tilted": _json_safe(mean_drift(tilted)),
        "files": ["tilted_model.toml"],
    }
    return estimates, extras


def _chi_of(spec: MapSpec, z: float) -> float:
    from .map_core import leading_eigen, stationary_distribution

    q = matrix_exponent(spec, 0.0)
    return leading_eigen(matrix_exponent(spec, z), stationary_distribution(q))[0]


def _run_simulate(model, params, seed, threads, out):
    n = int(_require(params, "n", "simulate"))
    if isinstance(model, StableParams):
        x0 = float(params.get("x0", 1.0))
        step = float(_require(params, "step", "simulate"))
        horizon = float(_require(params, "horizon", "simulate"))
        rows = []
        for r in range(n):
            path = simulate_stable_path(model, x0, step, horizon, np.random.default_rng((seed, r)))
            rows.extend((r, float(t), float(x)) for t, x in zip(path.times, path.values))
        _write_csv(out / "paths.csv", ("replica", "t", "x"), rows)
        return [], {"files": ["paths.csv"], "n": n}
    x0 = float(params.get("x0", 0.0))
    i0 = int(params.get("i0", 0))
    horizon = float(_require(params, "horizon", "simulate"))
    rows = []
    for r in range(n):
        path = simulate_map(model, x0, i0, StopRule.fixed_horizon(horizon), np.random.default_rng((seed, r)))
        rows.append((r, 0, 0.0, x0, i0, "start"))
        for k, ev in enumerate(path.events, start=1):
            rows.append((r, k, ev.time, path.xi_at(ev.time), ev.state_after, ev.kind))
        rows.append((r, len(path.events) + 1, path.t_end, path.xi_end, path.state_end, path.reason))
    _write_csv(
        out / "paths.csv",
        ("replica", "event_index", "t", "xi", "state", "event_type"),
        rows,
    )
    return [], {"files": ["paths.csv"], "n": n}


def _run_passage(model, params, seed, threads, out):
    if not isinstance(model, MapSpec):
        raise ConfigError("scenario 'passage' needs a map model")
    y_grid = _float_list(_require(params, "y_grid", "passage"), "y_grid")
    n = int(_require(params, "n", "passage"))
    i0 = int(params.get("i0", 0))
    targets = params.get("targets")
    if targets is not None and len(targets) != len(y_grid):
        raise ConfigError("[params] targets must align with y_grid")
    sd = _spectral_for(model)
    estimates = []
    scaled = []
    for k, y in enumerate(y_grid):
        rep = passage_prob_is(model, sd, y, i0, n, seed + 16 * k, threads=threads)
        if targets is not None:
            rep = dataclasses.replace(
                rep, name=f"passage_prob[y={y:g}]", target=float(targets[k])
            )
        else:
            rep = dataclasses.replace(rep, name=f"passage_prob[y={y:g}]")
        estimates.append(rep)
        scaled.append((math.exp(sd.theta * y) * rep.value, math.exp(sd.theta * y) * rep.stderr))
    for k in range(1, len(scaled)):
        (v0, s0), (vk, sk) = scaled[0], scaled[k]
        se = math.hypot(s0, sk)
        estimates.append(
            EstimateReport(
                f"scaled_gap[y={y_grid[k]:g}]", vk - v0, se, n, seed,
                target=0.0, tolerance=3.0 * se,
            )
        )
    extras = {
        "theta": _json_safe(sd.theta),
        "scaled": [[_json_safe(v), _json_safe(s)] for v, s in scaled],
    }
    return estimates, extras


def _run_stable_prob(model, params, seed, threads, out):
    if not isinstance(model, StableParams):
        raise ConfigError("scenario 'stable-prob' needs a stable model")
    kind = params.get("kind", "hit")
    if kind not in ("hit", "exit"):
        raise ConfigError("[params] kind must be 'hit' or 'exit'")
    x_grid = _float_list(_require(params, "x_grid", "stable-prob"), "x_grid")
    closed = hit_interval_value if kind == "hit" else exit_interval_value
    estimates = [
        EstimateReport(f"{kind}_value[x={x:g}]", closed(model, x), 0.0, 1, seed)
        for x in x_grid
    ]
    mc_n = int(params.get("mc_n", 0))
    if mc_n:
        if kind != "hit":
            raise ConfigError("mc_n applies to the 'hit' kind only")
        for k, x in enumerate(x_grid):
            est = hit_probability_mc(model, x0=x, n_paths=mc_n, rng=seed + 16 * k)
            estimates.append(
                EstimateReport(
                    f"hit_prob_mc[x={x:g}]", est.value, est.stderr, mc_n, seed + 16 * k,
                    target=closed(model, x), tolerance=3.0 * est.stderr + est.margin,
                )
            )
    return estimates, {"kind": kind}


_RBZ_DEFAULT_PAIRS = ((1.2, 0.4), (1.2, 0.5), (1.5, 0.5), (1.5, 0.4), (1.8, 0.55), (0.9, 0.6))


def _run_rbz_check(model, params, seed, threads, out):
    tol = float(params.get("tol", 1e-10))
    pairs = params.get("pairs")
    if pairs is None:
        pairs = _RBZ_DEFAULT_PAIRS
    estimates = []
    for alpha, rho in pairs:
        p = StableParams(float(alpha), float(rho))
        sd = stable_spectral(p)
        d = np.diag(sd.v_theta)
        d_inv = np.diag(1.0 / sd.v_theta)
        z_lo = -p.alpha * (1.0 - p.rho)
        z_hi = p.alpha * p.rho
        z_grid = params.get("z_grid")
        if z_grid is None:
            z_grid = [z_lo + f * (z_hi - z_lo) for f in (0.2, 0.35, 0.5, 0.65, 0.8)]
        worst = 0.0
        for z in z_grid:
            lhs = rbz_F(p, float(z))
            rhs = d_inv @ stable_F(p, float(z) + p.alpha - 1.0) @ d
            worst = max(worst, float(np.abs(lhs - rhs).max()))
        estimates.append(
            EstimateReport(
                f"rbz_residual[alpha={p.alpha:g},rho={p.rho:g}]",
                worst, 0.0, len(z_grid), seed, target=0.0, tolerance=tol,
            )
        )
    return estimates, {"pairs": [[float(a), float(r)] for a, r in pairs]}


def _run_renewal_check(model, params, seed, threads, out):
    if not isinstance(model, MapSpec):
        raise ConfigError("scenario 'renewal-check' needs a map model")
    windows = _require(params, "windows", "renewal-check")
    if len(windows) != model.n_states:
        raise ConfigError("[params] windows needs one [lo, hi] pair per state")
    g = [DeclaredIntegrand.indicator(float(lo), float(hi)) for lo, hi in windows]
    t_grid = _float_list(_require(params, "t_grid", "renewal-check"), "t_grid")
    n_paths = int(_require(params, "n_paths", "renewal-check"))
    margin = float(params.get("margin", 0.0))
    sampler = poissonize(model)
    rep = renewal_limit_check(
        sampler, g, t_grid, n_paths, seed, i0=int(params.get("i0", 0)), margin=margin
    )
    estimates = [rep]
    extras: dict = {"t_grid": [float(t) for t in t_grid]}
    edges = params.get("bin_edges")
    if edges:
        measure = renewal_measure(
            sampler,
            _float_list(edges, "bin_edges"),
            n_paths,
            int(params.get("n_steps", 64)),
            seed + 16,
            i0=int(params.get("i0", 0)),
        )
        _write_csv(
            out / "renewal_bins.csv",
            ("i", "j", "bin_lo", "bin_hi", "mass", "stderr"),
            measure.rows(),
        )
        extras["files"] = ["renewal_bins.csv"]
    return estimates, extras


def _conditioned_model(model, params):
    if isinstance(model, StableParams):
        return condition(model)
    sd = _spectral_for(model)
    return condition(model, sd, alpha=float(params.get("alpha", 1.0)))


def _limit_check_obj(theorem: str, cfg_hash: str, grid, estimates, target, passed) -> dict:
    return {
        "theorem": theorem,
        "spec_id": cfg_hash[:16],
        "grid": [float(a) for a in grid],
        "estimates": [_est_obj(e) for e in estimates],
        "target": None if target is None else _est_obj(target),
        "tolerance": _json_safe(estimates[-1].tolerance if estimates else None),
        "pass": passed,
    }


def _run_conditioned(model, params, seed, threads, out, cfg_hash):
    cm = _conditioned_model(model, params)
    event_name, event = _event_from(params)
    x = float(_require(params, "x", "conditioned"))
    t = float(params.get("t", 1.0))
    n = int(_require(params, "n", "conditioned"))
    a_grid = _float_list(_require(params, "a_grid", "conditioned"), "a_grid")
    if cm.mode == "avoid":
        rep = verify_avoid_limit(cm, x, t, event, a_grid, n, seed, threads=threads)
        theorem = "avoid_limit"
    else:
        rep = verify_absorb_limit(cm, x, t, event, a_grid, n, seed, threads=threads)
        theorem = "absorb_limit"
    estimates = list(rep.points) + list(rep.exits)
    declared = [e.verdict for e in estimates if e.verdict is not None]
    passed = all(declared) if declared else True
    check = _limit_check_obj(theorem, cfg_hash, rep.grid, estimates, rep.target, passed)
    extras = {
        "mode": cm.mode,
        "theta": _json_safe(cm.theta),
        "event": event_name,
        "check": check,
    }
    if rep.target is not None:
        estimates.append(rep.target)
    return estimates, extras


def _run_tails(model, params, seed, threads, out, cfg_hash):
    if not isinstance(model, MapSpec):
        raise ConfigError("scenario 'tails' needs a map model")
    cm = _conditioned_model(model, params)
    x_list = _float_list(_require(params, "x_list", "tails"), "x_list")
    n = int(_require(params, "n", "tails"))
    exponent_tol = float(params.get("exponent_tol", 0.05))
    rep = tau0_tail_check(cm, x_list, n, seed, threads=threads)
    estimates = []
    for p in rep.points:
        estimates.append(
            EstimateReport(
                f"tail_exponent[x={p.x:g}]", p.exponent, 0.0, n, seed,
                target=rep.exponent_target, tolerance=exponent_tol,
            )
        )
        estimates.append(p.amplitude)
        estimates.append(p.cesaro)
    estimates.extend(rep.ratios)
    estimates.extend(rep.fractional_moments)
    declared = [e.verdict for e in estimates if e.verdict is not None]
    check = _limit_check_obj(
        "tau0_tail", cfg_hash, [p.x for p in rep.points], estimates, None,
        all(declared) if declared else True,
    )
    extras = {
        "mode": cm.mode,
        "theta": _json_safe(cm.theta),
        "alpha": _json_safe(cm.alpha),
        "exponent_target": _json_safe(rep.exponent_target),
        "constant_primary": _json_safe(rep.constant_primary),
        "constant_alternative": _json_safe(rep.constant_alternative),
        "trunc_bound": _json_safe(rep.trunc_bound),
        "check": check,
    }
    return estimates, extras


def _run_time_limit(model, params, seed, threads, out, cfg_hash):
    if not isinstance(model, MapSpec):
        raise ConfigError("scenario 'time-limit' needs a map model")
    cm = _conditioned_model(model, params)
    event_name, event = _event_from(params)
    x = float(_require(params, "x", "time-limit"))
    t = float(params.get("t", 1.0))
    n = int(_require(params, "n", "time-limit"))
    s_grid = _float_list(_require(params, "s_grid", "time-limit"), "s_grid")
    rep = verify_time_limit(cm, x, t, event, s_grid, n, seed, threads=threads)
    estimates = list(rep.points) + list(rep.exits)
    declared = [e.verdict for e in estimates if e.verdict is not None]
    passed = all(declared) if declared else True
    check = _limit_check_obj("time_limit", cfg_hash, rep.grid, estimates, rep.target, passed)
    extras = {
        "mode": cm.mode,
        "theta": _json_safe(cm.theta),
        "event": event_name,
        "check": check,
    }
    estimates.append(rep.target)
    return estimates, extras


SCENARIOS = (
    "spectrum",
    "tilt",
    "simulate",
    "passage",
    "stable-prob",
    "rbz-check",
    "renewal-check",
    "conditioned",
    "tails",
    "time-limit",
)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


def run(scenario: str, config_path: str | Path, *, seed: int | None = None,
        threads: int = 1, out_dir: str | Path | None = None) -> int:
    """Execute one scenario; returns the process exit status.

    Writes ``<scenario>_report.json`` plus any tabular files into the
    output directory (CLI flag, else ``[params] out``, else the current
    directory).  Exit status 0 means every declared verdict passed.
    """
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; use one of {', '.join(SCENARIOS)}")
    cfg, cfg_hash = load_config(config_path)
    if "model" not in cfg:
        raise ConfigError(f"{config_path}: missing [model] table")
    model = model_from_obj(cfg["model"])
    params = cfg.get("params", {})
    if seed is None:
        seed = params.get("seed")
    if seed is None:
        raise ConfigError("a seed is required (--seed or [params] seed); there is no default")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must fit in 64 bits")
    out = Path(out_dir if out_dir is not None else params.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)

    report = {
        "artifact": {"name": "ssmp-lab", "version": __version__},
        "scenario": scenario,
        "config_hash": cfg_hash,
        "seed": seed,
        "threads": threads,
    }
    simple = {
        "spectrum": _run_spectrum,
        "tilt": _run_tilt,
        "simulate": _run_simulate,
        "passage": _run_passage,
        "stable-prob": _run_stable_prob,
        "rbz-check": _run_rbz_check,
        "renewal-check": _run_renewal_check,
    }
    if scenario in simple:
        estimates, extras = simple[scenario](model, params, seed, threads, out)
    elif scenario == "conditioned":
        estimates, extras = _run_conditioned(model, params, seed, threads, out, cfg_hash)
    elif scenario == "tails":
        estimates, extras = _run_tails(model, params, seed, threads, out, cfg_hash)
    else:
        estimates, extras = _run_time_limit(model, params, seed, threads, out, cfg_hash)

    report.update(extras)
    report["checks"] = [_est_obj(e) for e in estimates]
    declared = [e for e in estimates if e.verdict is not None]
    passed = all(e.verdict for e in declared)
    report["passed"] = passed
    (out / f"{scenario}_report.json").write_text(json.dumps(report, indent=2) + "\n")
    if estimates:
        _write_estimates(out, estimates)
    for e in declared:
        if not e.verdict:
            print(
                f"FAIL {e.name}: value={e.value!r} target={e.target!r} tolerance={e.tolerance!r}",
                file=sys.stderr,
            )
    return 0 if passed else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ssmp-lab",
        description="run a reproducible experiment scenario from a TOML config",
    )
    parser.add_argument("scenario", choices=SCENARIOS)
    parser.add_argument("--config", required=True, help="path to the TOML experiment config")
    parser.add_argument("--seed", type=int, default=None, help="64-bit master seed (overrides [params] seed)")
    parser.add_argument("--threads", type=int, default=1, help="replica-level worker threads")
    parser.add_argument("--out", default=None, help="output directory (default: [params] out or '.')")
    args = parser.parse_args(argv)
    try:
        return run(
            args.scenario, args.config, seed=args.seed, threads=args.threads, out_dir=args.out
        )
    except (ConfigError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
