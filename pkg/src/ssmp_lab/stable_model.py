"""Strictly stable processes as two-state self-similar Markov models.

A strictly stable process with two-sided jumps is, through the
Lamperti--Kiu representation, a real self-similar Markov process whose
modulating chain has two states: the sign of the current position.
This module provides the closed-form 2x2 matrix exponent of that MAP,
its Perron--Frobenius data (the Cramér number equals ``alpha - 1``),
the h-function of the origin conditionings, closed-form interval
passage values, the matrix exponent of the spatially inverted process
(the Riesz--Bogdan--Zak transform), and a direct trigonometric path
sampler used as an independent Monte Carlo oracle throughout the test
suite.

Conventions frozen here (they are otherwise a free choice):

* state/row/column order is ``(+1, -1)``;
* the eigenvector ``v(alpha - 1)`` is normalised against the
  stationary law ``pi`` of the modulating chain so that ``pi @ v = 1``;
* ``alpha = 1`` is a degenerate branch: :func:`stable_h` returns the
  constant function 1 and every other operation rejects it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .map_core import ConvergenceError, SpectralData, leading_eigen, spectral_from_exponent
from .numerics import DomainError, QuadratureSpec, integrate_singular, log_gamma

__all__ = [
    "StableParams",
    "stable_F",
    "rbz_F",
    "stable_spectral",
    "stable_h",
    "exit_interval_value",
    "hit_interval_value",
    "sample_stable_increment",
    "sample_stable_increments",
    "PassageRecord",
    "StablePath",
    "simulate_stable_path",
    "HitProbabilityEstimate",
    "default_hit_phases",
    "hit_probability_mc",
    "ExitDirectionReport",
    "resolve_exit_direction",
]

_HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class StableParams:
    """Index and positivity parameter of a strictly stable process.

    ``alpha`` is the stability index and ``rho = P_0(X_1 > 0)`` the
    positivity parameter.  Both ``alpha * rho`` and
    ``alpha * rho_hat`` must lie in (0, 1), i.e. the process has jumps
    of both signs (no spectrally one-sided cases).
    """

    alpha: float
    rho: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 2.0:
            raise DomainError(f"alpha must lie in (0, 2), got {self.alpha!r}")
        if not 0.0 < self.alpha * self.rho < 1.0:
            raise DomainError(
                f"alpha * rho must lie in (0, 1), got {self.alpha * self.rho!r}"
            )
        if not 0.0 < self.alpha * self.rho_hat < 1.0:
            raise DomainError(
                f"alpha * (1 - rho) must lie in (0, 1), got {self.alpha * self.rho_hat!r}"
            )

    @property
    def rho_hat(self) -> float:
        return 1.0 - self.rho

    @property
    def theta(self) -> float:
        """The Cramér number of the underlying MAP, ``alpha - 1``."""
        return self.alpha - 1.0


def _require_nondegenerate(params: StableParams, operation: str) -> None:
    if params.alpha == 1.0:
        raise DomainError(
            f"{operation} is undefined at alpha = 1 where the Cramér number vanishes; "
            "only stable_h admits alpha = 1 (and is constant there)"
        )


def _log_front(params: StableParams, z: float) -> float:
    """log of the common factor Gamma(alpha - z) * Gamma(1 + z)."""
    return log_gamma(params.alpha - z) + log_gamma(1.0 + z)


def stable_F(params: StableParams, z: float) -> np.ndarray:
    """Matrix exponent of the MAP underlying the stable process.

    Valid for ``z`` in (-1, alpha).  Row/column order is ``(+1, -1)``.
    The reciprocal gamma pairs in the diagonal denominators are
    evaluated through the reflection formula, which removes the
    spurious poles of the individual gamma factors inside the strip.
    """
    _require_nondegenerate(params, "stable_F")
    if not -1.0 < z < params.alpha:
        raise DomainError(
            f"stable_F requires z in (-1, alpha) = (-1, {params.alpha!r}), got {z!r}"
        )
    a, r, rh = params.alpha, params.rho, params.rho_hat
    front = math.exp(_log_front(params, z))
    return np.array(
        [
            [
                -front * math.sin(math.pi * (a * rh - z)) / math.pi,
                front * math.sin(math.pi * a * rh) / math.pi,
            ],
            [
                front * math.sin(math.pi * a * r) / math.pi,
                -front * math.sin(math.pi * (a * r - z)) / math.pi,
            ],
        ]
    )


def rbz_F(params: StableParams, z: float) -> np.ndarray:
    """Matrix exponent of the spatially inverted (Riesz--Bogdan--Zak) process.

    Valid for ``z`` in (-alpha, 1); same state order ``(+1, -1)``.  It
    is the Esscher tilt of :func:`stable_F` at the Cramér number:
    ``rbz_F(z) = diag(v)^-1 stable_F(z + alpha - 1) diag(v)``.
    """
    _require_nondegenerate(params, "rbz_F")
    if not -params.alpha < z < 1.0:
        raise DomainError(
            f"rbz_F requires z in (-alpha, 1) = ({-params.alpha!r}, 1), got {z!r}"
        )
    a, r, rh = params.alpha, params.rho, params.rho_hat
    front = math.exp(log_gamma(1.0 - z) + log_gamma(a + z))
    return np.array(
        [
            [
                -front * math.sin(math.pi * (a * r + z)) / math.pi,
                front * math.sin(math.pi * a * r) / math.pi,
            ],
            [
                front * math.sin(math.pi * a * rh) / math.pi,
                -front * math.sin(math.pi * (a * rh + z)) / math.pi,
            ],
        ]
    )


def _sine_eigenvector(params: StableParams) -> np.ndarray:
    """Closed-form v(alpha - 1), normalised so that pi @ v = 1."""
    sr = math.sin(math.pi * params.alpha * params.rho)
    srh = math.sin(math.pi * params.alpha * params.rho_hat)
    scale = (sr + srh) / (2.0 * sr * srh)
    return np.array([scale * srh, scale * sr])


def _stationary_sines(params: StableParams) -> np.ndarray:
    """Closed-form stationary law of the modulating chain."""
    sr = math.sin(math.pi * params.alpha * params.rho)
    srh = math.sin(math.pi * params.alpha * params.rho_hat)
    return np.array([sr, srh]) / (sr + srh)


def stable_spectral(params: StableParams) -> SpectralData:
    """Perron--Frobenius data of :func:`stable_F`.

    The Cramér number is ``theta = alpha - 1`` with eigenvector
    proportional to ``(sin(pi alpha rho_hat), sin(pi alpha rho))``.
    The data is computed by the generic eigen machinery and
    cross-validated against those closed forms before returning.
    """
    if params.alpha == 1.0:
        raise DomainError(
            "stable_spectral is undefined at alpha = 1 (theta = 0); "
            "the h-transform degenerates -- use stable_h, which returns 1"
        )
    theta = params.theta
    half_width = 0.5 * min(abs(theta), params.alpha if theta < 0 else 1.0)
    sd = spectral_from_exponent(
        lambda z: stable_F(params, z), (theta - half_width, theta + half_width)
    )
    if abs(sd.theta - theta) > 1e-9:
        raise ConvergenceError(
            f"located Cramér number {sd.theta!r} differs from alpha - 1 = {theta!r}"
        )
    sine = _sine_eigenvector(params)
    v = sd.v_theta
    cross = abs(v[0] * sine[1] - v[1] * sine[0]) / (
        math.hypot(*v) * math.hypot(*sine)
    )
    if cross > 1e-8:
        raise ConvergenceError(
            f"eigenvector {v!r} is not parallel to the sine closed form {sine!r}"
        )
    return sd


def stable_h(params: StableParams, x: float) -> float:
    """The h-function ``v_sign(x)(alpha - 1) |x|^(alpha - 1)``.

    For ``alpha = 1`` the associated change of measure is trivial and
    the function is identically 1.
    """
    if x == 0.0:
        raise DomainError("stable_h is undefined at x = 0")
    if params.alpha == 1.0:
        return 1.0
    v = _sine_eigenvector(params)
    return float(v[0 if x > 0 else 1] * abs(x) ** params.theta)


def exit_interval_value(params: StableParams, x: float) -> float:
    """Closed-form interval-exit expression for ``alpha`` in (1, 2).

    Evaluates ``(alpha-1) x^(alpha-1) * integral_1^(1/x)
    (t-1)^(alpha rho - 1) (t+1)^(alpha rho_hat - 1) dt`` for
    ``x`` in (0, 1).  The printed expression's direction (exit before
    hitting the origin versus its complement) is checked empirically
    by :func:`resolve_exit_direction`; this function evaluates it
    verbatim.
    """
    if not 1.0 < params.alpha < 2.0:
        raise DomainError(
            f"exit_interval_value requires alpha in (1, 2), got {params.alpha!r}"
        )
    if not 0.0 < x < 1.0:
        raise DomainError(f"exit_interval_value requires x in (0, 1), got {x!r}")
    a, r, rh = params.alpha, params.rho, params.rho_hat
    spec = QuadratureSpec(1.0, 1.0 / x, left_exponent=a * r - 1.0)
    integral = integrate_singular(lambda t: (t + 1.0) ** (a * rh - 1.0), spec)
    return (a - 1.0) * x ** (a - 1.0) * integral


def hit_interval_value(params: StableParams, x: float) -> float:
    """Probability of ever hitting (-1, 1) from ``x > 1``, ``alpha`` in (0, 1).

    Evaluates ``Gamma(1 - alpha rho) / (Gamma(alpha rho_hat)
    Gamma(1 - alpha)) * integral_((x-1)/(x+1))^1 t^(alpha rho_hat - 1)
    (1-t)^(-alpha) dt``.
    """
    if not 0.0 < params.alpha < 1.0:
        raise DomainError(
            f"hit_interval_value requires alpha in (0, 1), got {params.alpha!r}"
        )
    if not x > 1.0:
        raise DomainError(f"hit_interval_value requires x > 1, got {x!r}")
    a, r, rh = params.alpha, params.rho, params.rho_hat
    lower = (x - 1.0) / (x + 1.0)
    spec = QuadratureSpec(lower, 1.0, right_exponent=-a)
    integral = integrate_singular(lambda t: t ** (a * rh - 1.0), spec)
    prefactor = math.exp(
        log_gamma(1.0 - a * r) - log_gamma(a * rh) - log_gamma(1.0 - a)
    )
    return prefactor * integral


# ---------------------------------------------------------------------------
# Direct path simulation (Monte Carlo oracle)
# ---------------------------------------------------------------------------


def sample_stable_increments(
    params: StableParams, dt: float, rng: np.random.Generator, size: int
) -> np.ndarray:
    """Vector of independent increments of the stable process over ``dt``.

    Uses the trigonometric (Chambers--Mallows--Stuck-type)
    construction expressed directly in terms of ``(alpha, rho)``: with
    ``xi = pi (rho - 1/2)``, ``U`` uniform on (-pi/2, pi/2) and ``W``
    unit exponential,

        ``X = sin(alpha (U + xi)) / cos(U)^(1/alpha)
              * (cos(U - alpha (U + xi)) / W)^((1 - alpha)/alpha)``

    is a unit-time increment with ``P(X > 0) = rho`` exactly, and the
    increment over ``dt`` is ``dt^(1/alpha) X`` by self-similarity.
    Two draws (one uniform, one exponential) are consumed per sample.
    """
    _require_nondegenerate(params, "sample_stable_increments")
    if dt <= 0.0:
        raise DomainError(f"dt must be positive, got {dt!r}")
    a = params.alpha
    xi = math.pi * (params.rho - 0.5)
    u = rng.uniform(-_HALF_PI, _HALF_PI, size)
    w = rng.standard_exponential(size)
    au = a * (u + xi)
    unit = (
        np.sin(au)
        / np.cos(u) ** (1.0 / a)
        * (np.cos(u - au) / w) ** ((1.0 - a) / a)
    )
    return dt ** (1.0 / a) * unit


def sample_stable_increment(
    params: StableParams, dt: float, rng: np.random.Generator
) -> float:
    """One increment of the stable process over ``dt``."""
    return float(sample_stable_increments(params, dt, rng, 1)[0])


@dataclass(frozen=True)
class PassageRecord:
    """First grid entries into and exits from a symmetric interval.

    ``entry_*`` refer to the first skeleton index/time with
    ``|x| < radius`` and ``exit_*`` to the first with
    ``|x| >= radius``; either is None when the event never happens on
    the simulated grid.  Index 0 counts: a path starting inside the
    interval has ``entry_index == 0``.
    """

    radius: float
    entry_index: int | None
    entry_time: float | None
    exit_index: int | None
    exit_time: float | None


@dataclass(frozen=True)
class StablePath:
    """Uniform-grid skeleton of one simulated stable path."""

    times: np.ndarray
    values: np.ndarray
    records: dict[float, PassageRecord] = field(default_factory=dict)


def simulate_stable_path(
    params: StableParams,
    x0: float,
    step: float,
    horizon: float,
    rng: np.random.Generator,
    radii: tuple[float, ...] = (),
) -> StablePath:
    """Euler skeleton of the stable process on a uniform grid.

    The grid is ``t_k = k * step`` for ``k = 0 .. floor(horizon/step)``
    and the skeleton is exact in law at the grid times (increments are
    sampled from the true stable law, not approximated).  For each
    requested radius the first grid entry into and exit from
    ``(-a, a)`` is recorded.  Hitting of single points (in particular
    the origin) is invisible to any discrete skeleton and is *not*
    reported; callers use shrinking-interval proxies instead.
    """
    _require_nondegenerate(params, "simulate_stable_path")
    if x0 == 0.0:
        raise DomainError("simulate_stable_path requires x0 != 0")
    if step <= 0.0:
        raise DomainError(f"step must be positive, got {step!r}")
    if horizon <= step:
        raise DomainError(
            f"horizon must exceed the step, got horizon={horizon!r}, step={step!r}"
        )
    n_steps = int(math.floor(horizon / step + 1e-12))
    values = np.empty(n_steps + 1)
    values[0] = x0
    values[1:] = x0 + np.cumsum(sample_stable_increments(params, step, rng, n_steps))
    times = step * np.arange(n_steps + 1)
    records = {}
    for radius in radii:
        if radius <= 0.0:
            raise DomainError(f"radii must be positive, got {radius!r}")
        inside = np.abs(values) < radius
        entry = int(np.argmax(inside)) if inside.any() else None
        outside = ~inside
        exit_ = int(np.argmax(outside)) if outside.any() else None
        records[radius] = PassageRecord(
            radius=radius,
            entry_index=entry,
            entry_time=None if entry is None else float(times[entry]),
            exit_index=exit_,
            exit_time=None if exit_ is None else float(times[exit_]),
        )
    return StablePath(times=times, values=values, records=records)


@dataclass(frozen=True)
class HitProbabilityEstimate:
    """Monte Carlo estimate of an interval-hitting probability.

    Two systematic errors of a skeleton estimator are quantified:

    * ``horizon_margin`` bounds the mass of hits after the simulated
      horizon: for each surviving path the chance of ever reaching
      ``(-radius, radius)`` from its final position ``x`` is at most
      ``v_sign(x) |x/radius|^(alpha-1) / min(v)`` (the h-function is a
      nonnegative supermartingale), so the average of those bounds,
      capped at 1 each, bounds the frequency still missing.
    * ``grid_correction`` estimates the mass of paths that dip into
      the interval strictly between grid points.  Every phase is
      simulated at half its nominal step and the hit frequency is read
      off the nested dyadic grids (4dt, 2dt, dt, dt/2) of the *same*
      paths, so the per-level gaps are coupled (their Monte Carlo
      error is far below the gaps themselves).  Each halving shrinks
      the gap by a roughly constant factor -- the miss mass is a power
      law in the step -- so the bias remaining below the finest grid
      is estimated by the geometric tail of the measured gaps and
      added to the finest-grid frequency.

    ``value`` includes the grid correction; ``margin`` (the total
    non-statistical allowance) is ``horizon_margin`` plus the grid
    correction itself, since the extrapolation is an estimate of the
    same order as the quantity it removes.
    """

    value: float
    stderr: float
    horizon_margin: float
    grid_correction: float
    level_freqs: tuple[float, ...]
    n_paths: int
    horizon: float

    @property
    def margin(self) -> float:
        return self.horizon_margin + self.grid_correction


def default_hit_phases(
    params: StableParams, x0: float, radius: float
) -> tuple[tuple[float, float], ...]:
    """Step/end-time schedule for :func:`hit_probability_mc`.

    Early phases use a fine step (hits mostly happen while the path is
    still near the interval); later phases stretch the horizon far
    enough that the supermartingale tail bound drops below 1e-3 while
    the step grows geometrically.
    """
    scale = max(abs(x0), radius) ** params.alpha
    template = (
        (0.0015, 1.8),
        (0.0075, 9.0),
        (0.0375, 45.0),
        (0.1875, 225.0),
        (0.9375, 1125.0),
        (4.6875, 5625.0),
        (23.4375, 28125.0),
    )
    return tuple((dt * scale, end * scale) for dt, end in template)


def hit_probability_mc(
    params: StableParams,
    x0: float,
    n_paths: int,
    rng: np.random.Generator | int,
    radius: float = 1.0,
    phases: tuple[tuple[float, float], ...] | None = None,
    ladder_levels: int = 3,
) -> HitProbabilityEstimate:
    """Frequency of grid entry into ``(-radius, radius)`` from ``x0``.

    The ensemble is advanced through ``phases``: pairs
    ``(step, end_time)`` with increasing steps.  Every phase is
    actually simulated at half its nominal step, and a hit is recorded
    separately on each dyadic grid from ``2**(ladder_levels-1) * step``
    down to ``step/2`` (the coarser grids are subsets of the finest,
    so one set of paths yields perfectly coupled frequencies per
    level).  Designed for ``alpha < 1`` (transient interval hitting)
    where the h-function supermartingale yields the reported
    ``horizon_margin``; see :class:`HitProbabilityEstimate`.
    """
    _require_nondegenerate(params, "hit_probability_mc")
    if abs(x0) <= radius:
        raise DomainError(
            f"hit_probability_mc starts outside the interval: |x0| > radius "
            f"required, got x0={x0!r}, radius={radius!r}"
        )
    rng = np.random.default_rng(rng)
    if phases is None:
        phases = default_hit_phases(params, x0, radius)
    n_levels = ladder_levels + 1
    coarsest = 1 << ladder_levels
    x = np.full(n_paths, float(x0))
    index = np.arange(n_paths)
    # hit[j, i]: path i has visited the interval on the level-j grid
    # (level ladder_levels = the simulated half-step grid, level 0 =
    # the grid 2**(ladder_levels-1) times coarser than the nominal).
    hit = np.zeros((n_levels, n_paths), dtype=bool)
    t = 0.0
    for dt, t_end in phases:
        # simulate at dt/2; level j checks every 2**(ladder_levels-j)-th point
        n_iter = 2 * max(0, int(round((t_end - t) / dt)))
        dt_fine = dt / 2.0
        for it in range(1, n_iter + 1):
            if x.size == 0:
                break
            x += sample_stable_increments(params, dt_fine, rng, x.size)
            inside = np.abs(x) < radius
            if inside.any():
                ids = index[inside]
                for j in range(n_levels):
                    if it % (1 << (ladder_levels - j)) == 0:
                        hit[j, ids] = True
                # retire once the coarsest grid has seen the hit (the
                # finer levels are then set as well, by nesting)
                if it % coarsest == 0:
                    retire = hit[0, index]
                    if retire.any():
                        keep = ~retire
                        x = x[keep]
                        index = index[keep]
        t = t_end
    level_freqs = hit.mean(axis=1)
    deltas = np.diff(level_freqs)
    correction = 0.0
    if ladder_levels >= 2 and deltas[-2] > 0:
        ratio = min(0.9, max(0.1, float(deltas[-1] / deltas[-2])))
        correction = float(deltas[-1]) * ratio / (1.0 - ratio)
    finest = float(level_freqs[-1])
    value = finest + correction
    stderr = math.sqrt(max(finest * (1.0 - finest), 1.0 / n_paths) / n_paths)
    v = _sine_eigenvector(params)
    if x.size:
        v_end = np.where(x > 0, v[0], v[1])
        bound = v_end * np.abs(x / radius) ** params.theta / v.min()
        horizon_margin = float(np.minimum(1.0, bound).sum()) / n_paths
    else:
        horizon_margin = 0.0
    return HitProbabilityEstimate(
        value=value,
        stderr=stderr,
        horizon_margin=horizon_margin,
        grid_correction=correction,
        level_freqs=tuple(float(f) for f in level_freqs),
        n_paths=n_paths,
        horizon=t,
    )


@dataclass(frozen=True)
class ExitDirectionReport:
    """Outcome of the exit-versus-origin direction experiment.

    ``ball_freqs[k]`` estimates the probability of visiting the ball
    of radius ``ball_radii[k]`` around the origin before leaving
    ``(-1, 1)``; extrapolating those frequencies in
    ``radius^(alpha-1)`` to radius 0 estimates the probability of
    hitting the origin itself before exiting.  ``matched`` reports
    which of the closed form (``"formula"``) or its complement
    (``"complement"``) agrees with the *exit-first* probability
    ``1 - extrapolated``, within ``tolerance``.
    """

    x0: float
    ball_radii: tuple[float, ...]
    ball_freqs: tuple[float, ...]
    unresolved: float
    extrapolated: float
    stderr: float
    formula_value: float
    matched: str
    tolerance: float


def resolve_exit_direction(
    params: StableParams,
    x0: float,
    n_paths: int,
    rng: np.random.Generator | int,
    ball_radii: tuple[float, ...] = (0.08, 0.04, 0.02, 0.01),
    phases: tuple[tuple[float, float], ...] = ((1e-4, 2.0), (1e-3, 40.0)),
) -> ExitDirectionReport:
    """Decide empirically which event the exit expression evaluates.

    For ``alpha`` in (1, 2) the origin is hit in finite time with
    positive probability from inside (-1, 1).  A discrete skeleton
    cannot see the origin itself, so the experiment records, for a
    decreasing family of ball radii, whether each path visits the ball
    before its first skeleton point outside (-1, 1), and extrapolates
    the resulting frequencies linearly in ``radius^(alpha-1)`` (the
    small-ball scaling of the hitting probability) to radius zero.
    The extrapolated value estimates ``P(hit origin before exiting)``
    and is matched against :func:`exit_interval_value` and its
    complement.
    """
    if not 1.0 < params.alpha < 2.0:
        raise DomainError(
            f"resolve_exit_direction requires alpha in (1, 2), got {params.alpha!r}"
        )
    if not 0.0 < abs(x0) < 1.0 or abs(x0) <= max(ball_radii):
        raise DomainError(
            "resolve_exit_direction requires 0 < |x0| < 1 with x0 outside every ball"
        )
    rng = np.random.default_rng(rng)
    radii = np.asarray(sorted(ball_radii, reverse=True))
    n_balls = radii.size
    x = np.full(n_paths, float(x0))
    index = np.arange(n_paths)
    entered = np.zeros((n_paths, n_balls), dtype=bool)
    t = 0.0
    for dt, t_end in phases:
        n_iter = max(0, int(round((t_end - t) / dt)))
        for _ in range(n_iter):
            if x.size == 0:
                break
            x += sample_stable_increments(params, dt, rng, x.size)
            absx = np.abs(x)
            for k in range(n_balls):
                inside = absx < radii[k]
                if inside.any():
                    entered[index[inside], k] = True
            retire = (absx >= 1.0) | (absx < radii[-1])
            if retire.any():
                keep = ~retire
                x = x[keep]
                index = index[keep]
        t = t_end
    unresolved = x.size / n_paths
    freqs = entered.mean(axis=0)
    design = radii ** params.theta
    slope, intercept = np.polyfit(design, freqs, 1)
    m = float(n_balls)
    se_bin = float(np.sqrt(np.max(freqs * (1.0 - freqs)) / n_paths))
    szz = float(np.sum((design - design.mean()) ** 2))
    se0 = se_bin * math.sqrt(1.0 / m + design.mean() ** 2 / szz)
    formula = exit_interval_value(params, abs(x0))
    exit_first = 1.0 - float(intercept)
    tolerance = 3.0 * se0 + unresolved + 0.02
    if abs(exit_first - formula) <= tolerance:
        matched = "formula"
    elif abs(exit_first - (1.0 - formula)) <= tolerance:
        matched = "complement"
    else:
        matched = "inconclusive"
    return ExitDirectionReport(
        x0=x0,
        ball_radii=tuple(float(r) for r in radii),
        ball_freqs=tuple(float(f) for f in freqs),
        unresolved=float(unresolved),
        extrapolated=float(intercept),
        stderr=se0,
        formula_value=formula,
        matched=matched,
        tolerance=tolerance,
    )
