"""Exact path simulation and the Monte Carlo estimators built on it.

Between events the modulated process moves along straight lines, so
paths are generated without discretisation error: the switch and
compound-Poisson clocks compete as exponential draws, level crossings
are located exactly on segments, and creep terminals pin the position
to the level.  :func:`simulate_map` records full paths for inspection;
the heavy estimators (:func:`passage_prob_is`, :func:`wald_mean`,
:func:`exp_functional_batch`) run the same event loop through
:mod:`ssmp_lab.kernel` and only keep terminal records.

:func:`lamperti_kiu` turns a recorded path into the associated
self-similar process ``X(t) = sign(J(phi(t))) exp(xi(phi(t)))`` by
inverting the clock ``A(s) = int_0^s exp(alpha xi(u)) du`` in closed
form per segment, so round trips through the time change are exact to
rounding.
"""

from __future__ import annotations

import bisect
import dataclasses
import math
from functools import cached_property

import numpy as np

from . import _kernel_py
from ._kernel_py import (
    REASON_EVENT_CAP,
    REASON_LEVEL_DOWN,
    REASON_LEVEL_UP,
    clock_crossing_time,
    sample_destination,
    sample_law,
    segment_exp_integral,
)
from .kernel import build_tables, run_replicas
from .map_core import (
    MapSpec,
    SpectralData,
    esscher_spec,
    find_cramer_bracket,
    leading_eigen,
    matrix_exponent,
    mean_drift,
    spectral_data,
)
from .numerics import BracketError, DomainError

__all__ = [
    "EstimateReport",
    "TruncationError",
    "ClockExhaustedError",
    "StopRule",
    "PathSegment",
    "PathEvent",
    "CrossingRecord",
    "MapPath",
    "simulate_map",
    "LampertiKiu",
    "lamperti_kiu",
    "passage_prob_is",
    "wald_mean",
    "exp_functional",
    "exp_functional_batch",
    "moment_recursion",
]


class TruncationError(RuntimeError):
    """A run hit its event cap before the stop rule fired.

    ``path`` carries the partial :class:`MapPath` when the failing run
    was recorded (``None`` for kernel batches, which only keep terminal
    rows).
    """

    def __init__(self, message: str, path: "MapPath | None" = None):
        super().__init__(message)
        self.path = path


class ClockExhaustedError(DomainError):
    """A time-changed path was queried beyond the clock it accumulated.

    ``clock_end`` is the total clock ``A(t_end)`` available on the
    recorded path; queries at or below it succeed.
    """

    def __init__(self, message: str, clock_end: float):
        super().__init__(message)
        self.clock_end = clock_end


@dataclasses.dataclass(frozen=True)
class EstimateReport:
    """A Monte Carlo estimate with the metadata needed to reproduce it.

    ``verdict`` is ``None`` when no target is declared; otherwise it is
    the pass/fail of ``|value - target| <= tolerance`` with the
    tolerance defaulting to three standard errors.
    """

    name: str
    value: float
    stderr: float
    n: int
    seed: int
    target: float | None = None
    tolerance: float | None = None

    @property
    def verdict(self) -> bool | None:
        if self.target is None:
            return None
        tol = 3.0 * self.stderr if self.tolerance is None else self.tolerance
        return bool(abs(self.value - self.target) <= tol)


_STOP_KINDS = ("fixed_horizon", "level_up", "level_down", "xi_below")


@dataclasses.dataclass(frozen=True)
class StopRule:
    """When a recorded run ends.

    Use the constructors: :meth:`fixed_horizon` stops at a deterministic
    time, :meth:`level_up` / :meth:`level_down` stop at the exact first
    passage across a level (recording creep versus jump), and
    :meth:`xi_below` is the downward passage used as a truncation depth.
    """

    kind: str
    value: float

    def __post_init__(self) -> None:
        if self.kind not in _STOP_KINDS:
            raise DomainError(f"unknown stop rule {self.kind!r}; use one of {_STOP_KINDS}")
        value = float(self.value)
        if not math.isfinite(value):
            raise DomainError("stop rule needs a finite threshold")
        if self.kind == "fixed_horizon" and value <= 0.0:
            raise DomainError("fixed_horizon needs a positive time")
        object.__setattr__(self, "value", value)

    @classmethod
    def fixed_horizon(cls, t: float) -> "StopRule":
        return cls("fixed_horizon", t)

    @classmethod
    def level_up(cls, y: float) -> "StopRule":
        return cls("level_up", y)

    @classmethod
    def level_down(cls, y: float) -> "StopRule":
        return cls("level_down", y)

    @classmethod
    def xi_below(cls, level: float) -> "StopRule":
        return cls("xi_below", level)


@dataclasses.dataclass(frozen=True)
class PathSegment:
    """One linear piece: ``xi(t_start + u) = xi_start + drift * u``."""

    t_start: float
    xi_start: float
    state: int
    drift: float
    duration: float


@dataclasses.dataclass(frozen=True)
class PathEvent:
    """A jump instant: a modulator switch or a compound-Poisson arrival."""

    time: float
    kind: str  # "switch" | "cp"
    state_before: int
    state_after: int
    jump: float


@dataclasses.dataclass(frozen=True)
class CrossingRecord:
    """How a level was crossed: by creep or by which kind of jump."""

    time: float
    xi_before: float
    xi_after: float
    kind: str  # "creep" | "cp_jump" | "switch_jump"


@dataclasses.dataclass(frozen=True)
class MapPath:
    """A recorded sample path, piecewise linear between jumps.

    ``segments`` tile ``[0, t_end]``; ``events`` sit at interior segment
    boundaries.  ``xi_at``/``state_at`` evaluate the right-continuous
    path; the terminal record ``(t_end, xi_end, state_end, reason)``
    states why the run stopped, and ``crossing`` describes the level
    passage when the reason is a level rule.
    """

    spec: MapSpec
    segments: tuple[PathSegment, ...]
    events: tuple[PathEvent, ...]
    t_end: float
    xi_end: float
    state_end: int
    reason: str
    crossing: CrossingRecord | None

    @cached_property
    def _t_starts(self) -> list[float]:
        return [seg.t_start for seg in self.segments]

    def _segment_index(self, t: float) -> int:
        if t < 0.0 or t > self.t_end:
            raise DomainError(f"t={t!r} outside the recorded range [0, {self.t_end!r}]")
        return bisect.bisect_right(self._t_starts, t) - 1

    def xi_at(self, t: float) -> float:
        """Level at time ``t`` (right-continuous; exact at ``t_end``)."""
        if t == self.t_end:
            return self.xi_end
        k = self._segment_index(t)
        seg = self.segments[k]
        return seg.xi_start + seg.drift * (t - seg.t_start)

    def state_at(self, t: float) -> int:
        """Modulator state at time ``t`` (right-continuous)."""
        if t == self.t_end:
            return self.state_end
        return self.segments[self._segment_index(t)].state


def simulate_map(
    spec: MapSpec,
    x0: float,
    i0: int,
    stop: StopRule,
    rng: np.random.Generator,
    event_cap: int = 10**8,
) -> MapPath:
    """Record one exact path of the modulated process until ``stop`` fires.

    Draw-for-draw identical to the batch kernel: per event the switch
    clock is drawn first, then the compound-Poisson clock when the state
    has one, ties go to the switch, and each jump law consumes its
    documented draws.  Level passages are located exactly: creep pins
    ``xi_end`` to the level, jumps record the position on both sides.
    Raises :class:`TruncationError` carrying the partial path when
    ``event_cap`` events pass without the stop rule firing.
    """
    tab = build_tables(spec)
    x0 = float(x0)
    i0 = int(i0)
    if not 0 <= i0 < spec.n_states:
        raise DomainError(f"start state {i0} outside range(0, {spec.n_states})")
    if not math.isfinite(x0):
        raise DomainError("start position must be finite")
    if event_cap < 1:
        raise DomainError("event_cap must be at least 1")

    horizon = math.inf
    up = math.inf
    down = -math.inf
    if stop.kind == "fixed_horizon":
        horizon = stop.value
    elif stop.kind == "level_up":
        up = stop.value
        if x0 >= up:
            raise DomainError("level_up needs a start strictly below the level")
    else:  # level_down | xi_below
        down = stop.value
        if x0 <= down:
            raise DomainError(f"{stop.kind} needs a start strictly above the level")

    t = 0.0
    xi = x0
    state = i0
    segments: list[PathSegment] = []
    events: list[PathEvent] = []

    def finish(reason: str, crossing: CrossingRecord | None) -> MapPath:
        return MapPath(
            spec=spec,
            segments=tuple(segments),
            events=tuple(events),
            t_end=t,
            xi_end=xi,
            state_end=state,
            reason=reason,
            crossing=crossing,
        )

    while True:
        drift = float(tab.drift[state])
        sw_rate = tab.switch_rate[state]
        cp_rate = tab.cp_rate[state]
        e_sw = rng.standard_exponential() / sw_rate if sw_rate > 0.0 else math.inf
        e_cp = rng.standard_exponential() / cp_rate if cp_rate > 0.0 else math.inf
        use_switch = e_sw <= e_cp
        dt = e_sw if use_switch else e_cp

        cut = dt
        reason: str | None = None
        if t + cut >= horizon:
            cut = horizon - t
            reason = "fixed_horizon"
        if drift > 0.0 and xi <= up:
            s_star = (up - xi) / drift
            if s_star <= cut:
                cut = s_star
                reason = stop.kind
        if drift < 0.0 and xi >= down:
            s_star = (down - xi) / drift
            if s_star <= cut:
                cut = s_star
                reason = stop.kind

        if reason is not None:
            segments.append(PathSegment(t, xi, state, drift, cut))
            t += cut
            if reason == "fixed_horizon":
                xi += drift * cut
                return finish(reason, None)
            xi = stop.value
            return finish(reason, CrossingRecord(t, xi, xi, "creep"))

        segments.append(PathSegment(t, xi, state, drift, dt))
        t += dt
        xi += drift * dt
        xi_pre = xi
        if use_switch:
            j = sample_destination(tab, state, rng)
            jump = sample_law(tab, int(tab.switch_law[state, j]), rng)
            events.append(PathEvent(t, "switch", state, j, jump))
            kind = "switch_jump"
            state = j
        else:
            jump = sample_law(tab, int(tab.cp_law[state]), rng)
            events.append(PathEvent(t, "cp", state, state, jump))
            kind = "cp_jump"
        xi += jump
        if jump != 0.0:
            if xi > up:
                return finish(stop.kind, CrossingRecord(t, xi_pre, xi, kind))
            if xi < down:
                return finish(stop.kind, CrossingRecord(t, xi_pre, xi, kind))
        if len(events) >= event_cap:
            raise TruncationError(
                f"event cap {event_cap} reached before the stop rule fired",
                finish("event_cap", None),
            )


class LampertiKiu:
    """Self-similar view of a recorded path through the exact time change.

    ``x_at(t) = sign(J(phi(t))) exp(xi(phi(t)))`` where ``phi`` inverts
    the clock ``A(s) = int_0^s exp(alpha xi(u)) du``.  Both the clock
    and its inverse use the closed form per linear segment, so
    ``phi(clock_at(s)) == s`` holds to rounding.  The starting position
    enters through the recorded path (``xi(0) = log|x0|``) and its sign
    through ``x0_sign``; the modulator must have two states, the
    starting state carrying ``x0_sign`` and the other the opposite sign.
    Queries past :attr:`clock_end` raise :class:`ClockExhaustedError`.
    """

    def __init__(self, path: MapPath, alpha: float, x0_sign: int = 1):
        if alpha <= 0.0:
            raise DomainError("the time change needs alpha > 0")
        if x0_sign not in (1, -1):
            raise DomainError("x0_sign must be +1 or -1")
        if path.spec.n_states != 2:
            raise DomainError("the sign alternation is defined for two-state modulators")
        if not path.segments:
            raise DomainError("cannot time-change an empty path")
        self.path = path
        self.alpha = float(alpha)
        i0 = path.segments[0].state
        self._signs = (x0_sign, -x0_sign) if i0 == 0 else (-x0_sign, x0_sign)
        cum = [0.0]
        running = 0.0
        for seg in path.segments:
            running += segment_exp_integral(seg.xi_start, seg.drift, seg.duration, alpha)
            cum.append(running)
        self._cum = cum

    @property
    def clock_end(self) -> float:
        """Total clock ``A(t_end)`` accumulated by the recorded path."""
        return self._cum[-1]

    def clock_at(self, s: float) -> float:
        """``A(s)``, the clock accumulated by original time ``s``."""
        if s == self.path.t_end:
            return self._cum[-1]
        k = self.path._segment_index(s)
        seg = self.path.segments[k]
        return self._cum[k] + segment_exp_integral(
            seg.xi_start, seg.drift, s - seg.t_start, self.alpha
        )

    def phi(self, t: float) -> float:
        """Original time at clock time ``t``: the inverse of ``clock_at``."""
        if t < 0.0:
            raise DomainError("clock time must be nonnegative")
        if t > self._cum[-1]:
            raise ClockExhaustedError(
                f"clock time {t!r} beyond the recorded clock {self._cum[-1]!r}",
                self._cum[-1],
            )
        if t == self._cum[-1]:
            return self.path.t_end
        k = bisect.bisect_right(self._cum, t) - 1
        seg = self.path.segments[k]
        s_in = clock_crossing_time(seg.xi_start, seg.drift, self.alpha, t - self._cum[k])
        return seg.t_start + s_in

    def x_at(self, t: float) -> float:
        """The self-similar process at clock time ``t``."""
        s = self.phi(t)
        return self._signs[self.path.state_at(s)] * math.exp(self.path.xi_at(s))


def lamperti_kiu(path: MapPath, alpha: float, x0_sign: int = 1) -> LampertiKiu:
    """Time-change a recorded path into its self-similar counterpart."""
    return LampertiKiu(path, alpha, x0_sign)


def _mean_stderr(w: np.ndarray) -> tuple[float, float]:
    """Compensated sample mean and standard error of the mean."""
    n = w.size
    mean = math.fsum(w) / n
    if n < 2:
        return mean, math.nan
    sq = math.fsum((w - mean) ** 2)
    return mean, math.sqrt(sq / (n * (n - 1)))


def _ratio_mean_stderr(x: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    """Weighted mean ``sum w x / sum w`` with a linearised standard error.

    The residuals ``w (x - r)`` sum to zero by construction, so their
    raw second moment is already the centred variance of the ratio
    numerator around the estimate.
    """
    n = x.size
    denom = math.fsum(w) / n
    if denom == 0.0 or n < 2:
        return math.nan, math.nan
    r = math.fsum(w * x) / (n * denom)
    a = w * (x - r)
    return r, math.sqrt(math.fsum(a * a) / (n - 1)) / (math.sqrt(n) * denom)


def _require_all_stopped(reason: np.ndarray, expected: int, what: str) -> None:
    bad = int(np.sum(reason != expected))
    if bad:
        raise TruncationError(f"{bad} of {reason.size} runs hit the event cap before {what}")


def passage_prob_is(
    spec: MapSpec,
    sd: SpectralData,
    y: float,
    i0: int,
    n: int,
    seed: int,
    *,
    threads: int = 1,
) -> EstimateReport:
    """Estimate ``P(T_y^+ < infinity)`` from the origin by tilting.

    Runs the exact kernel under the Esscher tilt at the Cramér number
    ``theta`` (where the passage is certain) and reweights each run by
    the Wald factor ``v_i0 e^{-theta xi(T_y)} / v_{J(T_y)}``, which is
    unbiased for the untilted passage probability because ``chi`` of the
    tilt vanishes at ``theta``.
    """
    if sd.theta <= 0.0:
        raise DomainError("importance sampling needs a positive Cramér number")
    if y <= 0.0:
        raise DomainError("the passage level must be positive")
    tilted, _resid = esscher_spec(spec, sd.theta)
    batch = run_replicas(tilted, n=n, seed=seed, x0=0.0, i0=i0, up_level=y, threads=threads)
    _require_all_stopped(batch.reason, REASON_LEVEL_UP, "the passage level")
    v = sd.v_theta
    w = v[i0] * np.exp(-sd.theta * batch.xi_end) / v[batch.state_end]
    value, err = _mean_stderr(w)
    return EstimateReport("passage_prob_is", value, err, n, seed)


def wald_mean(
    spec: MapSpec,
    sd: SpectralData,
    gamma: float,
    t: float,
    i0: int,
    n: int,
    seed: int,
    *,
    threads: int = 1,
) -> EstimateReport:
    """Sample mean of the Wald martingale at a fixed horizon (target 1).

    ``e^{gamma xi(t) - chi(gamma) t} v_{J(t)}(gamma) / v_{i0}(gamma)``
    has expectation exactly one for every admissible ``gamma``, which
    makes it a sharp end-to-end check of the path generator.
    """
    if t <= 0.0:
        raise DomainError("the horizon must be positive")
    chi_g = sd.chi_at(gamma)
    v = sd.v_at(gamma)
    batch = run_replicas(spec, n=n, seed=seed, x0=0.0, i0=i0, horizon=t, threads=threads)
    w = np.exp(gamma * batch.xi_end - chi_g * t) * v[batch.state_end] / v[i0]
    value, err = _mean_stderr(w)
    return EstimateReport("wald_mean", value, err, n, seed, target=1.0)


def _tail_amplitude_bound(spec: MapSpec, trunc_level: float, sd: SpectralData | None) -> float:
    """Relative tail-amplitude bound ``e^{-theta L}`` of the dropped residual.

    After first passage below ``x0 - L`` the remaining clock is an
    independent copy scaled by ``e^{alpha xi}``, so its contribution to
    the tail ``P(I > t)`` is the full amplitude damped by
    ``e^{-theta L}``.  Without a Cramér number there is no such
    guarantee and the bound is reported as ``nan``.
    """
    try:
        theta = sd.theta if sd is not None else spectral_data(spec, find_cramer_bracket(spec)).theta
    except BracketError:
        return math.nan
    return math.exp(-theta * trunc_level)


def _validate_exp_functional(spec: MapSpec, alpha: float, trunc_level: float) -> None:
    if alpha <= 0.0:
        raise DomainError("the exponential functional needs alpha > 0")
    if not 0.0 < trunc_level < math.inf:
        raise DomainError("trunc_level must be positive and finite")
    if mean_drift(spec) >= 0.0:
        raise DomainError("the exponential functional needs negative mean drift")


def exp_functional(
    spec: MapSpec,
    x0: float,
    i0: int,
    alpha: float,
    trunc_level: float,
    rng: np.random.Generator,
    *,
    sd: SpectralData | None = None,
    event_cap: int = 10**8,
) -> tuple[float, float]:
    """One draw of ``I = int_0^inf e^{alpha xi(u)} du``, truncated in depth.

    The run stops at the exact first passage below ``x0 - trunc_level``
    and returns the clock accumulated so far together with the relative
    tail-amplitude bound ``e^{-theta trunc_level}`` on what the dropped
    residual can contribute (``nan`` when no Cramér number exists).
    """
    _validate_exp_functional(spec, alpha, trunc_level)
    tab = build_tables(spec)
    out = _kernel_py.run_one(
        tab,
        float(x0),
        int(i0),
        math.inf,
        math.inf,
        float(x0) - trunc_level,
        math.inf,
        alpha,
        0.0,
        0.0,
        event_cap,
        rng,
        None,
    )
    reason = int(out[3])
    if reason == REASON_EVENT_CAP:
        raise TruncationError(f"event cap {event_cap} reached before the truncation depth")
    return float(out[7]), _tail_amplitude_bound(spec, trunc_level, sd)


def exp_functional_batch(
    spec: MapSpec,
    i0: "int | np.ndarray",
    alpha: float,
    trunc_level: float,
    n: int,
    seed: int,
    *,
    x0: float = 0.0,
    sd: SpectralData | None = None,
    threads: int = 1,
    event_cap: int = 10**8,
) -> tuple[np.ndarray, float]:
    """Replica draws of the truncated exponential functional.

    Same contract as :func:`exp_functional` but run through the batch
    kernel: replica ``r`` owns the stream ``(seed, r)`` and the returned
    array preserves replica order.  ``x0`` is a single starting level
    (``i0`` may vary per replica); the second element is the shared
    tail-amplitude bound.
    """
    _validate_exp_functional(spec, alpha, trunc_level)
    if np.ndim(x0) != 0:
        raise DomainError("batch truncation uses a single starting level")
    batch = run_replicas(
        spec,
        n=n,
        seed=seed,
        x0=float(x0),
        i0=i0,
        down_level=float(x0) - trunc_level,
        alpha=alpha,
        threads=threads,
        event_cap=event_cap,
    )
    _require_all_stopped(batch.reason, REASON_LEVEL_DOWN, "the truncation depth")
    return batch.exp_integral, _tail_amplitude_bound(spec, trunc_level, sd)


def moment_recursion(spec: MapSpec, alpha: float, k_max: int) -> np.ndarray:
    """Exact moments of the exponential functional, one order at a time.

    Row ``k`` of the returned ``(k_max + 1, n_states)`` array is the
    vector ``M(k)_i = E_i[I^k]`` obtained from the recursion
    ``M(k) = k (-F(alpha k))^{-1} M(k-1)`` with ``M(0) = 1``.  Order
    ``k`` exists only while ``chi(alpha k) < 0``; past that point the
    moment is infinite and a :class:`~ssmp_lab.numerics.DomainError` is
    raised.
    """
    if alpha <= 0.0:
        raise DomainError("the moment recursion needs alpha > 0")
    if k_max < 1:
        raise DomainError("k_max must be at least 1")
    out = np.empty((k_max + 1, spec.n_states))
    out[0] = 1.0
    for k in range(1, k_max + 1):
        z = alpha * k
        try:
            f_z = matrix_exponent(spec, z)
        except DomainError as exc:
            raise DomainError(f"moment of order {k} does not exist: {exc}") from exc
        chi, _v = leading_eigen(f_z, spec.pi)
        if chi >= 0.0:
            raise DomainError(
                f"moment of order {k} does not exist: chi({z:g}) = {chi:g} is not negative"
            )
        out[k] = k * np.linalg.solve(-f_z, out[k - 1])
    return out
