"""Conditioning the self-similar process on avoiding or hitting zero.

A modulated Lévy process with Cramér number ``theta`` induces, through
the Lamperti--Kiu time change, a self-similar Markov process ``X`` that
either hits the origin in finite time (negative mean drift) or escapes
to infinity (positive mean drift).  The harmonic function

    h(x) = v_sign(x)(theta) |x|^theta

turns the transient behaviour around: for ``theta > 0`` the h-transform
conditions ``X`` to avoid the origin, for ``theta < 0`` it conditions
``X`` to be absorbed there.  Concretely the transformed process is
again self-similar, driven by the Esscher tilt of the base MAP at
``theta`` -- so the conditioned process is *simulated exactly* by
running the tilted MAP through the same time change, never by
rejection.

:func:`condition` packages a base model (a :class:`~ssmp_lab.map_core.MapSpec`
or a :class:`~ssmp_lab.stable_model.StableParams`) into a
:class:`ConditionedModel`.  The remaining operations are Monte Carlo
verifiers for the three ways the conditioning arises as a limit, plus
the polynomial tail of the absorption time:

* :func:`verify_avoid_limit` -- condition on exiting ``(-a, a)`` before
  hitting zero and let ``a`` grow;
* :func:`verify_absorb_limit` -- condition on ever entering ``(-a, a)``
  and let ``a`` shrink;
* :func:`verify_time_limit` -- condition on surviving beyond ``t + s``
  and let ``s`` grow;
* :func:`tau0_tail_check` -- fit ``P_x(tau0 > t) ~ h(x) C t^(-theta/alpha)``
  and assemble the constant ``C`` from first principles.

Every hitting-time quantity is evaluated through the clock identity
``tau0 = |x|^alpha I`` (with ``I`` the exponential functional of the
MAP), never by waiting for a simulated path to hit a point.  Events are
restricted to functionals of the path skeleton at the fixed clock time
-- position, sign, running extrema -- delivered to event callables as a
:class:`PathFrame`.

Classifying a replica as "clock exhausted before ``t``" requires care:
a path stopped deep below its start still owns an (unsimulated) residual
clock.  :func:`_clock_section` resolves this exactly-in-law by restarting
deep paths in rescaled coordinates -- the clock is scale-invariant, so
a remaining target ``m`` at level ``xi`` equals a unit target at level
``xi - log(m)/alpha`` -- until each replica either reaches the clock or
falls below a resolution threshold whose survival probability is
exponentially negligible; the threshold mass is declared, not ignored.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Sequence

import numpy as np

from ._kernel_py import REASON_CLOCK, REASON_EVENT_CAP, REASON_LEVEL_DOWN, REASON_LEVEL_UP
from .kernel import run_replicas
from .map_core import (
    MapSpec,
    SpectralData,
    esscher_spec,
    find_cramer_bracket,
    mean_drift,
    mu_theta_candidates,
    spectral_data,
)
from .numerics import BracketError, DomainError, power_tail_fit
from .simulate import (
    EstimateReport,
    TruncationError,
    _mean_stderr,
    _ratio_mean_stderr,
    exp_functional_batch,
)
from .stable_model import StableParams, hit_probability_mc, stable_spectral

__all__ = [
    "ConditionedModel",
    "condition",
    "PathFrame",
    "event_whole_space",
    "event_positive",
    "conditioned_event_prob",
    "h_weighted_event_prob",
    "ConditionTestReport",
    "verify_avoid_limit",
    "verify_absorb_limit",
    "verify_time_limit",
    "TailPoint",
    "TailCheckReport",
    "tau0_tail_check",
]

# Seeds are consumed in blocks: every logical sub-job (a kernel stage, a
# residual batch, a target run) starts _SEED_BLOCK above the previous
# one, and no sub-job uses more than _SEED_BLOCK consecutive seeds.
_SEED_BLOCK = 16


# ---------------------------------------------------------------------------
# the conditioned model
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ConditionedModel:
    """A base model together with its Cramér h-transform.

    ``mode`` is ``"avoid"`` for ``theta > 0`` (the transform conditions
    the self-similar process to avoid zero) and ``"absorb"`` for
    ``theta < 0`` (it conditions on absorption).  ``tilted`` is the
    Esscher tilt of the base MAP at ``theta`` -- the exact driver of
    the conditioned process -- and is ``None`` for a stable base, whose
    modulated form is not a finite-activity MAP.  ``alpha`` is the
    self-similarity index of the time change; ``v`` is the
    Perron--Frobenius eigenvector at ``theta``, fixed only up to a
    positive multiple, which is why every estimator in this module uses
    it through ratios alone.
    """

    base: "MapSpec | StableParams"
    alpha: float
    theta: float
    mode: str
    v: np.ndarray
    sd: SpectralData
    tilted: MapSpec | None
    tilt_residual: float

    @property
    def v_ratio(self) -> float:
        """``max(v)/min(v)``: the constant in crossing-probability bounds."""
        return float(np.max(self.v) / np.min(self.v))

    def h(self, x, state=None):
        """The harmonic function ``v_sign(x)(theta) |x|^theta``.

        With two modulating states the sign of ``x`` determines the
        state (positive <-> 0, negative <-> 1); larger modulations need
        ``state`` passed explicitly.  Defined up to the normalisation
        of ``v``: only ratios ``h(y)/h(x)`` are normalisation-free.
        """
        xa = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(xa)) or np.any(xa == 0.0):
            raise DomainError("h needs finite non-zero positions")
        if state is None:
            if len(self.v) != 2:
                raise DomainError(
                    "the sign of x determines the modulating state only for "
                    "two states; pass state= explicitly"
                )
            idx = np.where(xa > 0.0, 0, 1)
        else:
            idx = np.asarray(state, dtype=int)
        out = self.v[idx] * np.abs(xa) ** self.theta
        return float(out) if np.ndim(x) == 0 else out

    def depth_bias_bound(self, depth: float) -> float:
        """Crossing bound ``v_ratio * exp(-|theta| depth)``.

        The optional-stopping bound on the probability that a path ever
        travels ``depth`` against the decay direction of ``e^{theta xi}``;
        used to declare the misclassification allowance of every depth
        proxy in this module.
        """
        return self.v_ratio * math.exp(-abs(self.theta) * depth)


def condition(
    spec_or_params: "MapSpec | StableParams",
    sd: SpectralData | None = None,
    *,
    alpha: float | None = None,
) -> ConditionedModel:
    """Package a base model with its h-transform data.

    For a :class:`~ssmp_lab.map_core.MapSpec` the Cramér number is
    located on the spectral curve (pass ``sd`` to reuse one already
    computed) and ``alpha`` is the index of the intended time change
    (default 1.0).  For a :class:`~ssmp_lab.stable_model.StableParams`
    the number is ``alpha - 1`` in closed form and the index is the
    stable index itself.  Raises
    :class:`~ssmp_lab.numerics.BracketError` when no non-zero Cramér
    root exists (zero mean drift, or the exponent's domain ends before
    the curve returns to zero).
    """
    if isinstance(spec_or_params, StableParams):
        params = spec_or_params
        if alpha is not None and alpha != params.alpha:
            raise DomainError(
                f"a stable base fixes the self-similarity index alpha = "
                f"{params.alpha!r}; got alpha = {alpha!r}"
            )
        if sd is None:
            sd = stable_spectral(params)
        theta = sd.theta
        return ConditionedModel(
            base=params,
            alpha=params.alpha,
            theta=theta,
            mode="avoid" if theta > 0.0 else "absorb",
            v=sd.v_theta,
            sd=sd,
            tilted=None,
            tilt_residual=0.0,
        )
    spec = spec_or_params
    if alpha is None:
        alpha = 1.0
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise DomainError(f"the self-similarity index must be positive, got {alpha!r}")
    if sd is None:
        try:
            sd = spectral_data(spec, find_cramer_bracket(spec))
        except BracketError as exc:
            raise BracketError(f"conditioning needs a non-zero Cramér root: {exc}") from exc
    theta = sd.theta
    tilted, residual = esscher_spec(spec, theta)
    if mean_drift(spec) * mean_drift(tilted) >= 0.0:
        raise DomainError(
            "the tilt did not flip the mean drift; the spectral data does "
            "not belong to this spec"
        )
    return ConditionedModel(
        base=spec,
        alpha=float(alpha),
        theta=theta,
        mode="avoid" if theta > 0.0 else "absorb",
        v=sd.v_theta,
        sd=sd,
        tilted=tilted,
        tilt_residual=residual,
    )


# ---------------------------------------------------------------------------
# path-skeleton events
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class PathFrame:
    """Skeleton of the self-similar process at a fixed clock time.

    ``x`` is the signed position (positive <-> modulating state 0),
    ``sup_abs``/``inf_abs`` are the running extrema of ``|X|`` over the
    elapsed clock window, and ``state`` is the modulating state.  Event
    callables receive one frame and must return a boolean array of the
    same length.
    """

    x: np.ndarray
    sup_abs: np.ndarray
    inf_abs: np.ndarray
    state: np.ndarray


def event_whole_space(frame: PathFrame) -> np.ndarray:
    """The trivial event: every path qualifies."""
    return np.ones(frame.x.size, dtype=bool)


def event_positive(frame: PathFrame) -> np.ndarray:
    """The event that the process sits on the positive half-line."""
    return frame.x > 0.0


def _frame_from(xi: np.ndarray, state: np.ndarray, max_xi: np.ndarray, min_xi: np.ndarray) -> PathFrame:
    signs = np.where(state == 0, 1.0, -1.0)
    return PathFrame(
        x=signs * np.exp(xi),
        sup_abs=np.exp(max_xi),
        inf_abs=np.exp(min_xi),
        state=state.astype(np.int64),
    )


def _apply_event(event: Callable[[PathFrame], np.ndarray], frame: PathFrame) -> np.ndarray:
    out = np.asarray(event(frame))
    if out.shape != frame.x.shape or out.dtype != np.bool_:
        raise DomainError(
            f"an event must map a PathFrame to a boolean array of shape "
            f"{frame.x.shape}, got dtype {out.dtype!r} and shape {out.shape!r}"
        )
    return out


def _start_coords(model: ConditionedModel, x: float) -> tuple[float, int]:
    if not (math.isfinite(x) and x != 0.0):
        raise DomainError(f"the start must be finite and non-zero, got {x!r}")
    return math.log(abs(x)), 0 if x > 0.0 else 1


def _require_map_model(model: ConditionedModel, what: str) -> None:
    if model.tilted is None:
        raise DomainError(
            f"{what} needs a finite-modulation base; a stable base only "
            "supports the interval-hitting diagnostic of verify_absorb_limit"
        )
    if model.base.n_states != 2:
        raise DomainError(
            "signed-position events identify states with signs, which needs "
            f"exactly two modulating states; got {model.base.n_states}"
        )


# ---------------------------------------------------------------------------
# exact sectioning of replicas at a fixed clock time
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class _ClockSection:
    """Replica classification of :func:`_clock_section`.

    ``xi``/``state``/``max_xi``/``min_xi`` are meaningful on survivors
    only (``xi = nan``, ``state = -1`` elsewhere).  ``bias_bound`` is
    the declared allowance for replicas resolved by the depth rule or
    left unresolved at the round cap, as a fraction of all replicas.
    """

    survived: np.ndarray
    xi: np.ndarray
    state: np.ndarray
    max_xi: np.ndarray
    min_xi: np.ndarray
    bias_bound: float
    rounds: int


def _clock_section(
    spec: MapSpec,
    xi0: float,
    j0: int,
    t: float,
    alpha: float,
    kappa: float,
    v_ratio: float,
    n: int,
    seed: int,
    *,
    threads: int = 1,
    event_cap: int = 10**8,
    resolve_depth: float = 28.0,
    run_slack: float = 6.0,
    max_rounds: int = 8,
) -> _ClockSection:
    """Where each replica stands when its clock reaches ``t`` -- if it does.

    Runs in shifted coordinates where the remaining clock target is
    always 1 (see the module docstring).  A replica restarting at
    shifted level ``y`` survives with probability about
    ``e^{kappa y}`` (``kappa`` is the positive Cramér exponent of the
    relevant crossing direction), so once ``y <= -resolve_depth/kappa``
    it is resolved as exhausted and the bound ``v_ratio e^{kappa y}``
    is added to the declared bias.  The running floor sits
    ``run_slack/kappa`` below the resolve threshold so that paths
    diving with most of their target left resolve on first touch.

    Consumes seeds ``seed .. seed + max_rounds - 1``.
    """
    if not (math.isfinite(t) and t > 0.0):
        raise DomainError(f"the clock time must be positive and finite, got {t!r}")
    if max_rounds < 1 or max_rounds > _SEED_BLOCK:
        raise DomainError(f"max_rounds must lie in [1, {_SEED_BLOCK}]")
    resolve_level = -resolve_depth / kappa
    floor = resolve_level - run_slack / kappa

    survived = np.zeros(n, dtype=bool)
    xi = np.full(n, math.nan)
    state = np.full(n, -1, dtype=np.int64)
    max_xi = np.full(n, -math.inf)
    min_xi = np.full(n, math.inf)
    bias_sum = 0.0

    idx = np.arange(n)
    shift = np.full(n, math.log(t) / alpha)
    x0s = np.full(n, xi0) - shift
    i0s = np.full(n, j0, dtype=np.int64)

    rounds = 0
    for r in range(max_rounds):
        # resolve replicas whose survival bound is already negligible
        lost = x0s <= resolve_level
        if lost.any():
            bias_sum += float(np.minimum(1.0, v_ratio * np.exp(kappa * x0s[lost])).sum())
            keep = ~lost
            idx, shift, x0s, i0s = idx[keep], shift[keep], x0s[keep], i0s[keep]
        if idx.size == 0:
            break
        rounds = r + 1
        batch = run_replicas(
            spec,
            n=idx.size,
            seed=seed + r,
            x0=x0s,
            i0=i0s,
            down_level=floor,
            clock_target=1.0,
            alpha=alpha,
            threads=threads,
            event_cap=event_cap,
        )
        if np.any(batch.reason == REASON_EVENT_CAP):
            raise TruncationError(
                f"event cap {event_cap} reached while sectioning at the clock time"
            )
        max_xi[idx] = np.maximum(max_xi[idx], batch.max_xi + shift)
        min_xi[idx] = np.minimum(min_xi[idx], batch.min_xi + shift)

        remaining = 1.0 - batch.exp_integral
        done = (batch.reason == REASON_CLOCK) | (remaining <= 0.0)
        if done.any():
            rows = idx[done]
            survived[rows] = True
            xi[rows] = batch.xi_end[done] + shift[done]
            state[rows] = batch.state_end[done]
        cont = ~done
        lift = -np.log(remaining[cont]) / alpha
        idx = idx[cont]
        shift = shift[cont] - lift
        x0s = batch.xi_end[cont] + lift
        i0s = batch.state_end[cont]

    if idx.size:
        bias_sum += float(idx.size)  # unresolved at the round cap: declared in full
    return _ClockSection(
        survived=survived,
        xi=xi,
        state=state,
        max_xi=max_xi,
        min_xi=min_xi,
        bias_bound=bias_sum / n,
        rounds=rounds,
    )


def _section_frame(sec: _ClockSection) -> PathFrame:
    m = sec.survived
    return _frame_from(sec.xi[m], sec.state[m], sec.max_xi[m], sec.min_xi[m])


# ---------------------------------------------------------------------------
# the two estimator routes for conditioned event probabilities
# ---------------------------------------------------------------------------


def _tilted_event_prob(
    model: ConditionedModel,
    x: float,
    t: float,
    event: Callable[[PathFrame], np.ndarray],
    n: int,
    seed: int,
    *,
    threads: int = 1,
    event_cap: int = 10**8,
    resolve_depth: float = 28.0,
) -> tuple[EstimateReport, float]:
    xi0, j0 = _start_coords(model, x)
    sec = _clock_section(
        model.tilted,
        xi0,
        j0,
        t,
        model.alpha,
        abs(model.theta),
        model.v_ratio,
        n,
        seed,
        threads=threads,
        event_cap=event_cap,
        resolve_depth=resolve_depth,
    )
    ind = np.zeros(n)
    if sec.survived.any():
        ind[sec.survived] = _apply_event(event, _section_frame(sec)).astype(float)
    value, err = _mean_stderr(ind)
    return EstimateReport("conditioned_event_prob", value, err, n, seed), sec.bias_bound


def conditioned_event_prob(
    model: ConditionedModel,
    x: float,
    t: float,
    event: Callable[[PathFrame], np.ndarray],
    n: int,
    seed: int,
    *,
    threads: int = 1,
    event_cap: int = 10**8,
) -> EstimateReport:
    """``P°_x(event, t < tau0)`` by simulating the tilted MAP exactly.

    In avoid mode the conditioned process never dies, so this is simply
    the conditioned event probability at clock time ``t``; in absorb
    mode paths absorbed before ``t`` contribute zero and the value is
    the sub-probability mass still alive at ``t``.  The depth-resolution
    allowance of the sectioning is of order ``e^{-28}`` -- far below
    any statistical error -- and is surfaced explicitly by the
    verification operations that build on this route.
    """
    _require_map_model(model, "conditioned_event_prob")
    report, _bias = _tilted_event_prob(
        model, x, t, event, n, seed, threads=threads, event_cap=event_cap
    )
    return report


def h_weighted_event_prob(
    model: ConditionedModel,
    x: float,
    t: float,
    event: Callable[[PathFrame], np.ndarray],
    n: int,
    seed: int,
    *,
    threads: int = 1,
    event_cap: int = 10**8,
) -> EstimateReport:
    """``E_x[h(X_t)/h(x); event, t < tau0]`` from unconditioned paths.

    The independent route to the same quantity as
    :func:`conditioned_event_prob`: run the *base* MAP, classify
    survival through the clock identity, and weight each surviving path
    by ``e^{theta (xi_t - xi_0)} v_{J_t} / v_{J_0}``.  Agreement of the
    two routes within Monte Carlo error is the change-of-measure
    consistency check used by the verification operations.
    """
    _require_map_model(model, "h_weighted_event_prob")
    xi0, j0 = _start_coords(model, x)
    sec = _clock_section(
        model.base,
        xi0,
        j0,
        t,
        model.alpha,
        abs(model.theta),
        model.v_ratio,
        n,
        seed,
        threads=threads,
        event_cap=event_cap,
    )
    w = np.zeros(n)
    if sec.survived.any():
        frame = _section_frame(sec)
        ev = _apply_event(event, frame)
        xi_t = sec.xi[sec.survived]
        j_t = sec.state[sec.survived]
        w[sec.survived] = ev * np.exp(model.theta * (xi_t - xi0)) * (model.v[j_t] / model.v[j0])
    value, err = _mean_stderr(w)
    return EstimateReport("h_weighted_event_prob", value, err, n, seed)


# ---------------------------------------------------------------------------
# limit verification reports
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ConditionTestReport:
    """Outcome of one limit-verification experiment.

    ``points`` hold the conditional estimates along the grid, each
    carrying the h-transform ``target`` and a tolerance of three
    combined standard errors plus the declared proxy allowances;
    ``exits`` hold the unconditional probabilities of the conditioning
    events (exit, hit, or late survival), which the scaling diagnostics
    are built from.  The headline ``verdict`` is the point at the far
    end of the grid, where the limit claim applies.
    """

    mode: str
    grid: tuple[float, ...]
    points: tuple[EstimateReport, ...]
    exits: tuple[EstimateReport, ...]
    target: EstimateReport | None

    @property
    def verdict(self) -> bool | None:
        return self.points[-1].verdict if self.points else None


def _validate_grid(grid: Sequence[float], what: str, increasing: bool) -> tuple[float, ...]:
    vals = tuple(float(g) for g in grid)
    if not vals:
        raise DomainError(f"{what} must not be empty")
    if not all(math.isfinite(g) and g > 0.0 for g in vals):
        raise DomainError(f"{what} must be positive and finite")
    diffs = np.diff(vals)
    if increasing and not np.all(diffs > 0.0):
        raise DomainError(f"{what} must be strictly increasing")
    if not increasing and not np.all(diffs < 0.0):
        raise DomainError(f"{what} must be strictly decreasing")
    return vals


def _two_stage_conditional(
    model: ConditionedModel,
    xi0: float,
    j0: int,
    t: float,
    event: Callable[[PathFrame], np.ndarray],
    up: float,
    down: float,
    stop_reason: int,
    n: int,
    seed1: int,
    seed2: int,
    threads: int,
    event_cap: int,
) -> tuple[float, float, float, float]:
    """Shared engine of the avoid/absorb conditionals.

    Stage one runs the base MAP to the first of {clock ``t``, level
    ``up``, level ``down``}; stage two continues the clock-stopped
    replicas to the remaining levels.  ``stop_reason`` names the level
    whose crossing is the conditioning event.  Returns the conditional
    estimate, its standard error, and the unconditional crossing
    frequency with its standard error.
    """
    b1 = run_replicas(
        model.base,
        n=n,
        seed=seed1,
        x0=xi0,
        i0=j0,
        up_level=up,
        down_level=down,
        clock_target=t,
        alpha=model.alpha,
        threads=threads,
        event_cap=event_cap,
    )
    if np.any(b1.reason == REASON_EVENT_CAP):
        raise TruncationError(f"event cap {event_cap} reached before any stop rule")
    at_clock = b1.reason == REASON_CLOCK
    den = (b1.reason == stop_reason).astype(float)
    num = np.zeros(n)
    # clock-stopped rows pinned exactly onto a level are crossings *at*
    # the clock time: the conditioning event happened, but not after t
    if stop_reason == REASON_LEVEL_UP:
        edge = at_clock & (b1.xi_end >= up)
    else:
        edge = at_clock & (b1.xi_end <= down)
    den[edge] = 1.0
    inside = at_clock & (b1.xi_end > down) & (b1.xi_end < up)
    m = int(inside.sum())
    if m:
        b2 = run_replicas(
            model.base,
            n=m,
            seed=seed2,
            x0=b1.xi_end[inside],
            i0=b1.state_end[inside],
            up_level=up,
            down_level=down,
            threads=threads,
            event_cap=event_cap,
        )
        if np.any(b2.reason == REASON_EVENT_CAP):
            raise TruncationError(f"event cap {event_cap} reached in the continuation stage")
        crossed = (b2.reason == stop_reason).astype(float)
        den[inside] = crossed
        frame = _frame_from(
            b1.xi_end[inside], b1.state_end[inside], b1.max_xi[inside], b1.min_xi[inside]
        )
        num[inside] = _apply_event(event, frame) * crossed
    cond, cond_se = _ratio_mean_stderr(num, den)
    freq, freq_se = _mean_stderr(den)
    return cond, cond_se, freq, freq_se


def verify_avoid_limit(
    model: ConditionedModel,
    x: float,
    t: float,
    event: Callable[[PathFrame], np.ndarray],
    a_grid: Sequence[float],
    n: int,
    seed: int,
    *,
    threads: int = 1,
    depth: float | None = None,
    event_cap: int = 10**8,
) -> ConditionTestReport:
    """Exit-conditioning converging to the h-transform as ``a`` grows.

    For each level ``a`` the conditional probability

        P_x(event, t < tau_exit | tau_exit < tau0),
        tau_exit = first time |X| leaves (-a, a),

    is estimated by a two-stage run and compared against the tilted
    route's ``P°_x(event at t)``.  Absorption (``tau0`` first) is
    proxied by the path falling ``depth`` below its start -- a path
    that deep exits first with probability at most
    ``v_ratio e^{-theta depth}`` (optional stopping at the Cramér
    root), declared inside each point's tolerance.  The ``exits``
    reports are the unconditional probabilities of exiting before
    absorption; ``a^theta * exits`` stabilising along the grid is the
    scaling diagnostic of the avoid limit.

    Consumes seeds ``seed .. seed + (2 len(a_grid) + 1) * 16``.
    """
    _require_map_model(model, "verify_avoid_limit")
    if model.mode != "avoid":
        raise DomainError(f"verify_avoid_limit needs an avoid-mode model, got {model.mode!r}")
    grid = _validate_grid(a_grid, "a_grid", increasing=True)
    xi0, j0 = _start_coords(model, x)
    if grid[0] <= abs(x):
        raise DomainError("every exit level must exceed the starting radius")
    theta = model.theta
    if depth is None:
        depth = 30.0 / theta
    misclass = model.depth_bias_bound(depth)
    target, target_bias = _tilted_event_prob(
        model,
        x,
        t,
        event,
        n,
        seed + 2 * len(grid) * _SEED_BLOCK,
        threads=threads,
        event_cap=event_cap,
    )
    points = []
    exits = []
    for k, a in enumerate(grid):
        s1 = seed + 2 * k * _SEED_BLOCK
        s2 = s1 + _SEED_BLOCK
        cond, cond_se, freq, freq_se = _two_stage_conditional(
            model, xi0, j0, t, event, math.log(a), xi0 - depth,
            REASON_LEVEL_UP, n, s1, s2, threads, event_cap,
        )
        margin = 2.0 * misclass / max(freq, 1e-12) + target_bias
        tol = 3.0 * math.hypot(cond_se, target.stderr) + margin
        points.append(
            EstimateReport(
                f"avoid_limit[a={a:g}]", cond, cond_se, n, s1,
                target=target.value, tolerance=tol,
            )
        )
        exits.append(EstimateReport(f"exit_prob[a={a:g}]", freq, freq_se, n, s1))
    return ConditionTestReport("avoid", grid, tuple(points), tuple(exits), target)


def verify_absorb_limit(
    model: ConditionedModel,
    x: float,
    t: float,
    event: Callable[[PathFrame], np.ndarray],
    a_grid: Sequence[float],
    n: int,
    seed: int,
    *,
    threads: int = 1,
    depth: float | None = None,
    event_cap: int = 10**8,
) -> ConditionTestReport:
    """Hit-conditioning converging to the h-transform as ``a`` shrinks.

    Mirror image of :func:`verify_avoid_limit` for ``theta < 0``: the
    conditioning event is ever entering ``(-a, a)``, escape is proxied
    by the path rising ``depth`` above its start, and the ``exits``
    reports estimate ``P_x(tau_(-a,a) < infinity)`` -- whose
    ``a^theta``-scaled stabilisation is the hit-limit diagnostic.

    A stable base runs only that unconditional diagnostic, through the
    dyadic-grid skeleton sampler: ``points`` is then empty, ``target``
    is ``None``, and each exit report's tolerance carries the sampler's
    full non-statistical allowance on top of three standard errors.
    """
    if model.mode != "absorb":
        raise DomainError(f"verify_absorb_limit needs an absorb-mode model, got {model.mode!r}")
    grid = _validate_grid(a_grid, "a_grid", increasing=False)
    if grid[0] >= abs(x):
        raise DomainError("every hit radius must lie below the starting radius")
    if isinstance(model.base, StableParams):
        exits = []
        for k, a in enumerate(grid):
            s = seed + k * _SEED_BLOCK
            est = hit_probability_mc(model.base, x0=x, n_paths=n, rng=s, radius=a)
            exits.append(
                EstimateReport(
                    f"hit_prob[a={a:g}]", est.value, est.stderr, n, s,
                    tolerance=3.0 * est.stderr + est.margin,
                )
            )
        return ConditionTestReport("absorb", grid, (), tuple(exits), None)
    _require_map_model(model, "verify_absorb_limit")
    xi0, j0 = _start_coords(model, x)
    kappa = abs(model.theta)
    if depth is None:
        depth = 30.0 / kappa
    misclass = model.depth_bias_bound(depth)
    target, target_bias = _tilted_event_prob(
        model,
        x,
        t,
        event,
        n,
        seed + 2 * len(grid) * _SEED_BLOCK,
        threads=threads,
        event_cap=event_cap,
    )
    points = []
    exits = []
    for k, a in enumerate(grid):
        s1 = seed + 2 * k * _SEED_BLOCK
        s2 = s1 + _SEED_BLOCK
        cond, cond_se, freq, freq_se = _two_stage_conditional(
            model, xi0, j0, t, event, xi0 + depth, math.log(a),
            REASON_LEVEL_DOWN, n, s1, s2, threads, event_cap,
        )
        margin = 2.0 * misclass / max(freq, 1e-12) + target_bias
        tol = 3.0 * math.hypot(cond_se, target.stderr) + margin
        points.append(
            EstimateReport(
                f"absorb_limit[a={a:g}]", cond, cond_se, n, s1,
                target=target.value, tolerance=tol,
            )
        )
        exits.append(EstimateReport(f"hit_prob[a={a:g}]", freq, freq_se, n, s1))
    return ConditionTestReport("absorb", grid, tuple(points), tuple(exits), target)


def verify_time_limit(
    model: ConditionedModel,
    x: float,
    t: float,
    event: Callable[[PathFrame], np.ndarray],
    s_grid: Sequence[float],
    n: int,
    seed: int,
    *,
    threads: int = 1,
    trunc_level: float | None = None,
    event_cap: int = 10**8,
) -> ConditionTestReport:
    """Late-survival conditioning converging to the h-transform.

    Estimates ``P_x(event | tau0 > t + s)`` along ``s_grid`` by the
    Markov splitting of the clock identity: run the base MAP to clock
    time ``t``, then hand each surviving replica a *fresh* residual
    ``e^{alpha xi_t} I`` with ``I`` drawn by
    :func:`~ssmp_lab.simulate.exp_functional_batch` from its terminal
    state -- by spatial homogeneity that residual is exactly the
    remaining life of the path, so no thinning of event times is
    involved.  The same residual draws serve every ``s`` (points along
    the grid are correlated, each unbiased).  ``exits`` report the
    unconditional late-survival probabilities ``P_x(tau0 > t + s)``,
    whose ratios between starting points converge to h-ratios.

    Consumes seeds ``seed .. seed + 3 * 16``.
    """
    _require_map_model(model, "verify_time_limit")
    if model.mode != "avoid":
        raise DomainError(f"verify_time_limit needs an avoid-mode model, got {model.mode!r}")
    grid = _validate_grid(s_grid, "s_grid", increasing=True)
    xi0, j0 = _start_coords(model, x)
    theta = model.theta
    if trunc_level is None:
        trunc_level = 30.0 / theta
    sec = _clock_section(
        model.base,
        xi0,
        j0,
        t,
        model.alpha,
        theta,
        model.v_ratio,
        n,
        seed,
        threads=threads,
        event_cap=event_cap,
    )
    m = int(sec.survived.sum())
    residual = np.zeros(n)
    ev = np.zeros(n, dtype=bool)
    trunc_bound = model.depth_bias_bound(trunc_level) / model.v_ratio  # e^{-theta L}
    if m:
        draws, trunc_bound = exp_functional_batch(
            model.base,
            sec.state[sec.survived],
            model.alpha,
            trunc_level,
            m,
            seed + _SEED_BLOCK,
            x0=0.0,
            sd=model.sd,
            threads=threads,
            event_cap=event_cap,
        )
        residual[sec.survived] = np.exp(model.alpha * sec.xi[sec.survived]) * draws
        ev[sec.survived] = _apply_event(event, _section_frame(sec))
    target, target_bias = _tilted_event_prob(
        model, x, t, event, n, seed + 2 * _SEED_BLOCK, threads=threads, event_cap=event_cap
    )
    points = []
    exits = []
    for s in grid:
        den = (residual > s).astype(float)
        num = den * ev
        cond, cond_se = _ratio_mean_stderr(num, den)
        surv, surv_se = _mean_stderr(den)
        margin = 2.0 * trunc_bound + (sec.bias_bound + target_bias) / max(surv, 1e-12)
        tol = 3.0 * math.hypot(cond_se, target.stderr) + margin
        points.append(
            EstimateReport(
                f"time_limit[s={s:g}]", cond, cond_se, n, seed,
                target=target.value, tolerance=tol,
            )
        )
        exits.append(EstimateReport(f"survival[s={s:g}]", surv, surv_se, n, seed))
    return ConditionTestReport("avoid", grid, tuple(points), tuple(exits), target)


# ---------------------------------------------------------------------------
# the polynomial tail of the absorption time
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class TailPoint:
    """Tail fit of ``P_x(tau0 > t)`` for one starting point.

    ``exponent`` is the log-log slope over ``grid``.  ``amplitude`` is
    the grid-averaged estimate of ``t^{theta/alpha} P_x(tau0 > t)``
    with a per-replica standard error, targeting ``h(x) C`` with ``C``
    the assembled raw-tail constant; at the survival levels a plain
    sampler can reach it sits mildly below its limit, which is why the
    tolerance carries an explicit regime allowance.  ``cesaro`` is the
    integrated-tail form ``u^{theta/alpha - 1} E[min(tau0, u)]`` at the
    shallow end of the grid -- it converges much faster (Cesaro
    averaging) and targets ``h(x) C alpha / |alpha - theta|``.
    """

    x: float
    exponent: float
    amplitude: EstimateReport
    cesaro: EstimateReport
    grid: tuple[float, ...]


@dataclasses.dataclass(frozen=True)
class TailCheckReport:
    """Assembled tail law ``P_x(tau0 > t) ~ h(x) C t^{-theta/alpha}``.

    The raw-tail constant is

    ``C = sum_j pi^theta_j E_{0,j}[I^{theta/alpha - 1}] / (alpha mu_theta v_j(theta))``

    -- by Karamata's theorem it is ``|1 - theta/alpha|`` times the
    integrated-tail constant, which carries ``|alpha - theta|`` in
    place of ``alpha`` (both forms are checked: ``amplitude`` against
    the former, ``cesaro`` against the latter).  ``constant_primary``
    uses the tilted stationary drift ``chi'(theta)`` for ``mu_theta``;
    ``constant_alternative`` uses the corrected candidate from
    :func:`~ssmp_lab.map_core.mu_theta_candidates` so the two stay
    visible side by side.  ``fractional_moments`` are the per-state
    ingredients ``E_{0,j}[I^{theta/alpha - 1}]``.  ``ratios`` compare
    consecutive starting points' amplitudes against h-ratios -- the
    normalisation-free form of the constant, immune to the common
    pre-asymptotic factor.  When ``theta = alpha`` the constants
    degenerate to ``nan`` and only exponents and ratios are checked.
    """

    exponent_target: float
    points: tuple[TailPoint, ...]
    ratios: tuple[EstimateReport, ...]
    constant_primary: float
    constant_alternative: float
    fractional_moments: tuple[EstimateReport, ...]
    trunc_bound: float


def tau0_tail_check(
    model: ConditionedModel,
    x_list: Sequence[float],
    n: int,
    seed: int,
    *,
    trunc_level: float | None = None,
    n_grid: int = 8,
    tail_span: tuple[float, float] = (0.02, 0.002),
    regime_margin: float = 0.15,
    threads: int = 1,
    event_cap: int = 10**8,
) -> TailCheckReport:
    """Fit the absorption-time tail and reassemble its constant.

    Each starting point draws ``n`` absorption times directly through
    the clock identity (``tau0`` is the truncated exponential
    functional started from ``log|x|``).  The fit grid is placed by
    empirical quantiles spanning ``tail_span`` -- a rank-based rule
    that keeps every survival count bounded away from zero, so the
    log-log fit cannot be destabilised by an empty tail bin.  The
    amplitude and Cesaro reports' tolerances combine both Monte Carlo
    errors with ``regime_margin`` times the target, the declared
    allowance for the pre-asymptotic range of the fit window; the
    amplitude *ratios* between consecutive starting points shed that
    common factor and are held to three combined standard errors.

    Consumes seeds ``seed + 16 k`` for the ``len(x_list) + 2`` batches.
    """
    _require_map_model(model, "tau0_tail_check")
    if model.mode != "avoid":
        raise DomainError(f"tau0_tail_check needs an avoid-mode model, got {model.mode!r}")
    if not x_list:
        raise DomainError("x_list must not be empty")
    if n_grid < 3:
        raise DomainError("the fit grid needs at least 3 points")
    hi, lo = tail_span
    if not 0.0 < lo < hi < 1.0:
        raise DomainError("tail_span must satisfy 0 < span[1] < span[0] < 1")
    theta, alpha = model.theta, model.alpha
    if trunc_level is None:
        trunc_level = 30.0 / theta
    exponent_target = theta / alpha
    degenerate = abs(alpha - theta) < 1e-12

    moments = []
    weights = np.zeros(2)
    weight_ses = np.zeros(2)
    trunc_bound = math.nan
    for j in (0, 1):
        s = seed + (len(x_list) + j) * _SEED_BLOCK
        draws, trunc_bound = exp_functional_batch(
            model.base, j, alpha, trunc_level, n, s,
            x0=0.0, sd=model.sd, threads=threads, event_cap=event_cap,
        )
        frac = draws ** (exponent_target - 1.0)
        mo, mo_se = _mean_stderr(frac)
        moments.append(
            EstimateReport(f"fractional_moment[state={j}]", mo, mo_se, n, s)
        )
        weights[j], weight_ses[j] = mo, mo_se

    if degenerate:
        c_primary = c_alt = c_se = cesaro_factor = math.nan
    else:
        pi_t, v = model.sd.pi_theta, model.v
        mu_primary, mu_alt = mu_theta_candidates(model.sd)
        base_sum = float(np.sum(pi_t * weights / v)) / alpha
        c_primary = base_sum / mu_primary
        c_alt = base_sum / mu_alt
        c_se = float(np.sqrt(np.sum((pi_t * weight_ses / v) ** 2))) / (alpha * mu_primary)
        cesaro_factor = alpha / abs(alpha - theta)

    qs = np.geomspace(hi, lo, n_grid)
    points = []
    for k, x in enumerate(x_list):
        xi0, j0 = _start_coords(model, x)
        s = seed + k * _SEED_BLOCK
        draws, _ = exp_functional_batch(
            model.base, j0, alpha, trunc_level, n, s,
            x0=xi0, sd=model.sd, threads=threads, event_cap=event_cap,
        )
        t_grid = np.quantile(draws, 1.0 - qs)
        if np.any(np.diff(t_grid) <= 0.0):
            raise DomainError(
                f"degenerate tail grid from x = {x!r}: raise n or widen tail_span"
            )
        surv = draws[:, None] > t_grid[None, :]
        p_hat = surv.mean(axis=0)
        exponent, _amp = power_tail_fit(list(zip(t_grid.tolist(), p_hat.tolist())))
        per_replica = (surv * t_grid**exponent_target).mean(axis=1)
        amp, amp_se = _mean_stderr(per_replica)
        u = float(t_grid[0])
        ces_sample = np.minimum(draws, u) * u ** (exponent_target - 1.0)
        ces, ces_se = _mean_stderr(ces_sample)
        if degenerate:
            target = tol = ces_target = ces_tol = None
        else:
            target = model.h(x) * c_primary
            tol = 3.0 * math.hypot(amp_se, model.h(x) * c_se) + regime_margin * abs(target)
            ces_target = target * cesaro_factor
            ces_tol = (
                3.0 * math.hypot(ces_se, model.h(x) * c_se * cesaro_factor)
                + regime_margin * abs(ces_target)
            )
        points.append(
            TailPoint(
                x=float(x),
                exponent=exponent,
                amplitude=EstimateReport(
                    f"tail_amplitude[x={x:g}]", amp, amp_se, n, s,
                    target=target, tolerance=tol,
                ),
                cesaro=EstimateReport(
                    f"tail_cesaro[x={x:g}]", ces, ces_se, n, s,
                    target=ces_target, tolerance=ces_tol,
                ),
                grid=tuple(float(t) for t in t_grid),
            )
        )
    ratios = []
    for p, q in zip(points, points[1:]):
        a, b = p.amplitude, q.amplitude
        r = a.value / b.value
        r_se = abs(r) * math.hypot(a.stderr / a.value, b.stderr / b.value)
        ratios.append(
            EstimateReport(
                f"amplitude_ratio[x={p.x:g}/{q.x:g}]", r, r_se, n, a.seed,
                target=model.h(p.x) / model.h(q.x), tolerance=3.0 * r_se,
            )
        )
    return TailCheckReport(
        exponent_target=exponent_target,
        points=tuple(points),
        ratios=tuple(ratios),
        constant_primary=c_primary,
        constant_alternative=c_alt,
        fractional_moments=tuple(moments),
        trunc_bound=trunc_bound,
    )
