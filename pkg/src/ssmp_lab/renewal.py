"""Markov additive random walks and their renewal-theoretic estimators.

Watching a modulated process only at the marks of an independent
unit-rate exponential clock turns it into a Markov additive random
walk: the pairs ``(Delta_n, M_n)`` of increments between marks and the
chain state at each mark.  :class:`MarwSpec` describes such a walk
directly through transition kernels (point-mass and exponential
mixtures); :func:`poissonize` builds the embedded walk of a
continuous-time model without any closed form, by simulating between
marks.  Both expose the same one-step sampler interface, so the
estimators do not care where the walk came from.

The estimators are deliberately simulation-only: :func:`renewal_measure`
bins occupation counts of the walk, and :func:`renewal_limit_check`
compares path averages of ``sum_n g(t - Xi_n)`` against the key-renewal
limit ``sum_j pi_j int g_j / sum_j pi_j eta_j``.  Test functions enter
as :class:`DeclaredIntegrand` values whose integrability is declared by
the caller rather than verified automatically.  :func:`creep_overshoot`
classifies first-passage crossings (continuous versus by a jump) under
the exponential change of measure, reweighting back with the same Wald
factor as the passage estimator.
"""

from __future__ import annotations

import dataclasses
import math
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import _kernel_py
from ._kernel_py import CROSS_CREEP, REASON_HORIZON, REASON_LEVEL_UP
from .kernel import build_tables, run_replicas
from .map_core import (
    _EXP,
    _POINT,
    JumpLaw,
    MapSpec,
    SpectralData,
    _strongly_connected,
    esscher_spec,
    mean_drift,
    stationary_distribution,
)
from .numerics import DomainError
from .simulate import (
    EstimateReport,
    TruncationError,
    _mean_stderr,
    _ratio_mean_stderr,
    _require_all_stopped,
)

__all__ = [
    "DeclaredIntegrand",
    "MarwSpec",
    "MarwSampler",
    "PoissonizedSampler",
    "poissonize",
    "RenewalMeasure",
    "renewal_measure",
    "renewal_limit_check",
    "CreepOvershootReport",
    "creep_overshoot",
]


# ---------------------------------------------------------------------------
# declared test functions
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class DeclaredIntegrand:
    """A test function with caller-declared support and integral.

    The renewal-limit check needs ``g >= 0``, piecewise monotone and
    directly Riemann integrable; none of that is verified here — the
    caller declares a compact ``support`` and the exact ``integral``
    over it, and the estimators trust the declaration.  Evaluation
    outside the support is clamped to zero, so ``fn`` is only ever
    called on points inside it.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]
    integral: float

    def __post_init__(self):
        lo, hi = self.support
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise DomainError(f"support must be a finite interval, got {self.support!r}")
        if not (math.isfinite(self.integral) and self.integral >= 0.0):
            raise DomainError(f"declared integral must be finite and >= 0, got {self.integral!r}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        lo, hi = self.support
        inside = (x >= lo) & (x <= hi)
        if np.any(inside):
            out[inside] = np.asarray(self.fn(x[inside]), dtype=float)
        return out

    @staticmethod
    def indicator(lo: float, hi: float) -> "DeclaredIntegrand":
        """The indicator of ``[lo, hi]`` with its exact integral."""
        return DeclaredIntegrand(lambda x: np.ones(x.shape), (float(lo), float(hi)), float(hi) - float(lo))

    def scaled(self, c: float) -> "DeclaredIntegrand":
        """The same function multiplied by ``c > 0``."""
        if not c > 0.0:
            raise DomainError("scale factor must be positive")
        fn = self.fn
        return DeclaredIntegrand(lambda x: c * np.asarray(fn(x), dtype=float), self.support, c * self.integral)


# ---------------------------------------------------------------------------
# walk specifications
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class MarwSpec:
    """A Markov additive random walk given by explicit transition kernels.

    ``transition[i][j]`` is the embedded-chain probability of moving to
    state ``j`` and ``increments[i][j]`` the law of the additive step
    made on that transition, so the kernel ``P_ij(dx)`` is the product
    of the two.  Rows of ``transition`` must sum to one and the chain
    must be irreducible; pairs with zero probability must carry the
    zero jump.  A single state is allowed and recovers the classical
    renewal random walk.
    """

    transition: tuple[tuple[float, ...], ...]
    increments: tuple[tuple[JumpLaw, ...], ...]

    def __post_init__(self):
        n = len(self.transition)
        if n == 0:
            raise DomainError("the walk needs at least one state")
        for row in self.transition:
            if len(row) != n:
                raise DomainError("transition matrix must be square")
            if any(p < 0.0 for p in row):
                raise DomainError(f"transition probabilities must be >= 0, got {row!r}")
            if abs(sum(row) - 1.0) > 1e-12:
                raise DomainError(f"transition rows must sum to 1, got {sum(row)!r}")
        if len(self.increments) != n or any(len(row) != n for row in self.increments):
            raise DomainError("increments must be an n x n grid of jump laws")
        for i in range(n):
            for j in range(n):
                law = self.increments[i][j]
                if not isinstance(law, JumpLaw):
                    raise DomainError(f"increments[{i}][{j}] is not a jump law")
                if self.transition[i][j] == 0.0 and not law.is_zero:
                    raise DomainError(
                        f"transition ({i}, {j}) has probability zero and must carry the zero jump"
                    )
        if not _strongly_connected(self.p):
            raise DomainError("the embedded chain must be irreducible")

    @staticmethod
    def build(transition, increments) -> "MarwSpec":
        """Normalise nested sequences into the frozen tuple form."""
        trans = tuple(tuple(float(p) for p in row) for row in transition)
        incs = tuple(tuple(row) for row in increments)
        return MarwSpec(trans, incs)

    @staticmethod
    def single_state(law: JumpLaw) -> "MarwSpec":
        """The classical renewal walk with i.i.d. increments ``law``."""
        return MarwSpec(((1.0,),), ((law,),))

    @cached_property
    def p(self) -> np.ndarray:
        return np.array(self.transition, dtype=float)

    @property
    def n_states(self) -> int:
        return len(self.transition)

    @cached_property
    def pi(self) -> np.ndarray:
        """Stationary law of the embedded chain."""
        return stationary_distribution(self.p - np.eye(self.n_states))

    @cached_property
    def eta(self) -> np.ndarray:
        """Per-state mean increment ``eta_i = sum_j p_ij E[Delta | i -> j]``."""
        return np.array(
            [
                sum(p * law.mean() for p, law in zip(row, laws))
                for row, laws in zip(self.transition, self.increments)
            ]
        )

    @property
    def mean_step(self) -> float:
        """Stationary mean increment ``sum_j pi_j eta_j``."""
        return float(self.pi @ self.eta)

    def sampler(self, rng: np.random.Generator | None = None) -> "MarwSampler":
        return MarwSampler(self, rng)


def _sample_law_array(law: JumpLaw, size: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorised draws from a jump law.

    The batch stream layout (one uniform block for atom selection when
    the mixture has several atoms, then one exponential block per
    exponential atom in declaration order) differs from the scalar
    per-draw order of the simulation kernels; it is deterministic for a
    given generator state, which is all the walk samplers promise.
    """
    atoms = law.atoms
    if len(atoms) == 1:
        which = np.zeros(size, dtype=np.intp)
    else:
        edges = np.cumsum(law.weights)
        which = np.searchsorted(edges, rng.random(size), side="right")
        which = np.minimum(which, len(atoms) - 1)
    out = np.empty(size)
    for k, atom in enumerate(atoms):
        mask = which == k
        m = int(np.count_nonzero(mask))
        if m == 0:
            continue
        if atom[0] == _POINT:
            out[mask] = atom[1]
        else:
            out[mask] = atom[2] * atom[1] * rng.standard_exponential(m)
    return out


class _WalkSampler:
    """Shared one-step interface of the two walk samplers.

    ``step`` advances every path by one mark and returns the pair of
    arrays ``(increments, next_states)``; ``walk`` stacks ``n_steps``
    of them into position and state panels (column ``k`` is mark
    ``k + 1``; the start at zero is not a mark).  Metadata used by the
    renewal limit — ``pi``, ``eta``, ``mean_step`` — is exposed on the
    sampler so estimators never need the underlying specification.
    """

    n_states: int
    pi: np.ndarray
    eta: np.ndarray
    mean_step: float

    def __init__(self, rng: np.random.Generator | None):
        self.rng = rng

    def _resolve(self, rng: np.random.Generator | None) -> np.random.Generator:
        gen = rng if rng is not None else self.rng
        if gen is None:
            raise DomainError("no generator: pass rng= or bind one at construction")
        return gen

    def _states(self, i0, n_paths: int) -> np.ndarray:
        states = np.broadcast_to(np.asarray(i0, dtype=np.int64), (n_paths,)).copy()
        if states.size and (states.min() < 0 or states.max() >= self.n_states):
            raise DomainError(f"start states must lie in [0, {self.n_states})")
        return states

    def step(self, states: np.ndarray, rng: np.random.Generator | None = None):
        raise NotImplementedError

    def stationary_states(self, n_paths: int, rng: np.random.Generator | None = None) -> np.ndarray:
        """Draw start states from the embedded stationary law."""
        gen = self._resolve(rng)
        return gen.choice(self.n_states, size=n_paths, p=self.pi).astype(np.int64)

    def walk(self, i0, n_steps: int, n_paths: int, rng: np.random.Generator | None = None):
        """Positions and states at marks ``1 .. n_steps`` for ``n_paths`` paths."""
        if n_steps <= 0 or n_paths <= 0:
            raise DomainError("need n_steps >= 1 and n_paths >= 1")
        gen = self._resolve(rng)
        states = self._states(i0, n_paths)
        xi = np.zeros(n_paths)
        positions = np.empty((n_paths, n_steps))
        panel = np.empty((n_paths, n_steps), dtype=np.int64)
        for k in range(n_steps):
            deltas, states = self.step(states, gen)
            xi += deltas
            positions[:, k] = xi
            panel[:, k] = states
        return positions, panel


class MarwSampler(_WalkSampler):
    """Vectorised stepping of a walk with explicit kernels."""

    def __init__(self, spec: MarwSpec, rng: np.random.Generator | None = None):
        super().__init__(rng)
        self.spec = spec
        self.n_states = spec.n_states
        self.pi = spec.pi
        self.eta = spec.eta
        self.mean_step = spec.mean_step
        self._cum = np.cumsum(spec.p, axis=1)

    def step(self, states, rng=None):
        gen = self._resolve(rng)
        states = np.asarray(states, dtype=np.int64)
        u = gen.random(states.size)
        nxt = (u[:, None] >= self._cum[states]).sum(axis=1)
        nxt = np.minimum(nxt, self.n_states - 1)
        deltas = np.empty(states.size)
        for i in range(self.n_states):
            for j in range(self.n_states):
                mask = (states == i) & (nxt == j)
                m = int(np.count_nonzero(mask))
                if m:
                    deltas[mask] = _sample_law_array(self.spec.increments[i][j], m, gen)
        return deltas, nxt


class PoissonizedSampler(_WalkSampler):
    """The walk embedded at unit-exponential marks of a modulated path.

    Each step draws a fresh unit-exponential horizon and runs the exact
    event kernel from the current state; redrawing the switch and jump
    clocks at every mark is justified by their memorylessness.  There
    is no closed-form kernel: only the sampler interface is available.
    The embedded chain inherits the stationary law ``pi`` of the
    modulating chain, and the per-state mean increments solve
    ``(I - Q) eta = d`` with ``d`` the per-state mean drift rates, so
    ``sum_j pi_j eta_j`` equals the long-run drift of the model.
    """

    def __init__(self, spec: MapSpec, rng: np.random.Generator | None = None, *, event_cap: int = 10**8):
        super().__init__(rng)
        self.spec = spec
        self.event_cap = int(event_cap)
        self._tab = build_tables(spec)
        n = spec.n_states
        self.n_states = n
        self.pi = spec.pi
        d = np.empty(n)
        for i, comp in enumerate(spec.components):
            rate = comp.mean_increment()
            for j in range(n):
                if i != j and spec.q[i, j] > 0.0:
                    rate += spec.q[i, j] * spec.switch_jumps[i][j].mean()
            d[i] = rate
        self.eta = np.linalg.solve(np.eye(n) - spec.q, d)
        self.mean_step = float(self.pi @ self.eta)

    def step(self, states, rng=None):
        gen = self._resolve(rng)
        states = np.asarray(states, dtype=np.int64)
        n = states.size
        deltas = np.empty(n)
        nxt = np.empty(n, dtype=np.int64)
        for r in range(n):
            horizon = gen.standard_exponential()
            out = _kernel_py.run_one(
                self._tab,
                0.0,
                int(states[r]),
                horizon,
                math.inf,
                -math.inf,
                math.inf,
                0.0,
                0.0,
                0.0,
                self.event_cap,
                gen,
                None,
            )
            if int(out[3]) != REASON_HORIZON:
                raise TruncationError(f"event cap {self.event_cap} reached inside one mark")
            deltas[r] = out[1]
            nxt[r] = int(out[2])
        return deltas, nxt


def poissonize(spec: MapSpec, rng: np.random.Generator | None = None) -> PoissonizedSampler:
    """Embed a modulated model at independent unit-exponential marks.

    Requires an exactly simulable model (``gaussian_sd = 0``).  The
    optional generator becomes the sampler's default stream; estimators
    that take integer seeds pass their own generator per call instead.
    """
    return PoissonizedSampler(spec, rng)


# ---------------------------------------------------------------------------
# renewal measure
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class RenewalMeasure:
    """Binned occupation estimate of the Markov renewal measure.

    ``mass[j, b]`` estimates the expected number of marks ``n >= 1``
    with ``Xi_n`` in the half-open bin ``[edges[b], edges[b+1])`` and
    ``M_n = j``, starting from ``i0``; ``stderr`` holds matching
    standard errors over paths.  Only the first ``n_steps`` marks are
    counted — the truncation is part of the estimate's meaning, and on
    a transient walk it is exact once the bins lie below the range the
    walk has left for good.
    """

    i0: int
    bin_edges: np.ndarray
    mass: np.ndarray
    stderr: np.ndarray
    n_paths: int
    n_steps: int
    seed: int

    def rows(self):
        """Flat ``(i, j, bin_lo, bin_hi, mass, stderr)`` records."""
        out = []
        for j in range(self.mass.shape[0]):
            for b in range(self.mass.shape[1]):
                out.append(
                    (
                        self.i0,
                        j,
                        float(self.bin_edges[b]),
                        float(self.bin_edges[b + 1]),
                        float(self.mass[j, b]),
                        float(self.stderr[j, b]),
                    )
                )
        return out


def renewal_measure(
    sampler: _WalkSampler,
    bin_edges: Sequence[float],
    n_paths: int,
    n_steps: int,
    seed: int,
    *,
    i0: int = 0,
) -> RenewalMeasure:
    """Estimate the renewal measure by binned occupation counts.

    Runs ``n_paths`` independent walks for ``n_steps`` marks each and
    averages, per target state and bin, the number of marks falling in
    the bin.  Memory grows as ``n_paths * n_states * n_bins`` int64
    counts (per-path counts are kept to report standard errors).
    """
    edges = np.asarray(bin_edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or not np.all(np.diff(edges) > 0.0) or not np.all(np.isfinite(edges)):
        raise DomainError("bin_edges must be a finite, strictly increasing 1-D grid")
    if n_paths < 2:
        raise DomainError("need n_paths >= 2 to report standard errors")
    if n_steps <= 0:
        raise DomainError("need n_steps >= 1")
    rng = np.random.default_rng(seed)
    n_bins = edges.size - 1
    ns = sampler.n_states
    states = sampler._states(i0, n_paths)
    xi = np.zeros(n_paths)
    counts = np.zeros(n_paths * ns * n_bins, dtype=np.int64)
    path_base = np.arange(n_paths) * (ns * n_bins)
    for _ in range(n_steps):
        deltas, states = sampler.step(states, rng)
        xi += deltas
        b = np.searchsorted(edges, xi, side="right") - 1
        ok = (b >= 0) & (b < n_bins)
        if np.any(ok):
            idx = path_base[ok] + states[ok] * n_bins + b[ok]
            np.add.at(counts, idx, 1)
    counts = counts.reshape(n_paths, ns, n_bins).astype(float)
    mass = counts.mean(axis=0)
    stderr = counts.std(axis=0, ddof=1) / math.sqrt(n_paths)
    return RenewalMeasure(
        i0=int(i0),
        bin_edges=edges,
        mass=mass,
        stderr=stderr,
        n_paths=int(n_paths),
        n_steps=int(n_steps),
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# key-renewal limit
# ---------------------------------------------------------------------------


def renewal_limit_check(
    sampler: _WalkSampler,
    g: Sequence[DeclaredIntegrand],
    t_grid: Sequence[float],
    n_paths: int,
    seed: int,
    *,
    i0: int = 0,
    margin: float = 0.0,
    n_steps: int | None = None,
) -> EstimateReport:
    """Compare ``E sum_n g_{M_n}(t - Xi_n)`` with its renewal limit.

    For each ``t`` in the grid the path average of
    ``sum_{n>=1} g_{M_n}(t - Xi_n)`` estimates the convolution of ``g``
    with the renewal measure; as ``t`` grows it converges to
    ``sum_j pi_j int g_j / sum_j pi_j eta_j``.  The report carries the
    estimate with the worst deviation from that limit over the top half
    of the grid, with tolerance ``3 SE + margin`` — the margin is the
    caller's allowance for truncation and pre-limit bias at finite
    ``t``.  The walk must drift upward (``mean_step > 0``); the default
    number of marks covers four times the span the largest ``t`` needs.
    """
    if len(g) != sampler.n_states:
        raise DomainError(f"need one declared integrand per state ({sampler.n_states})")
    for gj in g:
        if not isinstance(gj, DeclaredIntegrand):
            raise DomainError("test functions must be DeclaredIntegrand values")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or not np.all(np.isfinite(t)) or not np.all(np.diff(t) > 0.0):
        raise DomainError("t_grid must be a finite, strictly increasing 1-D grid")
    if margin < 0.0:
        raise DomainError("margin must be >= 0")
    if n_paths < 2:
        raise DomainError("need n_paths >= 2")
    if not sampler.mean_step > 0.0:
        raise DomainError("the renewal limit needs an upward-transient walk (mean_step > 0)")
    lo_min = min(gj.support[0] for gj in g)
    if n_steps is None:
        span = float(t[-1]) - min(lo_min, 0.0)
        n_steps = int(math.ceil(4.0 * span / sampler.mean_step)) + 64
    if n_steps <= 0:
        raise DomainError("need n_steps >= 1")
    rng = np.random.default_rng(seed)
    states = sampler._states(i0, n_paths)
    xi = np.zeros(n_paths)
    z = np.zeros((n_paths, t.size))
    for _ in range(n_steps):
        deltas, states = sampler.step(states, rng)
        xi += deltas
        for k in range(t.size):
            arg = t[k] - xi
            for j in range(sampler.n_states):
                sel = states == j
                if np.any(sel):
                    z[sel, k] += g[j](arg[sel])
    limit = float(sum(sampler.pi[j] * g[j].integral for j in range(sampler.n_states)))
    limit /= sampler.mean_step
    value = err = 0.0
    worst_dev = -1.0
    for k in range(t.size // 2, t.size):
        m, s = _mean_stderr(z[:, k])
        if abs(m - limit) > worst_dev:
            worst_dev, value, err = abs(m - limit), m, s
    return EstimateReport(
        "renewal_limit_check",
        value,
        err,
        int(n_paths),
        int(seed),
        target=limit,
        tolerance=3.0 * err + margin,
    )


# ---------------------------------------------------------------------------
# creep and overshoot at first passage
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class CreepOvershootReport:
    """First-passage crossing statistics at one level.

    ``creep`` estimates ``P(T_y < inf, crossing continuous)`` and
    ``jump_cross`` the complementary jump-crossing mass, both under the
    original measure (importance weights undo the tilt); they decay
    with the level like the passage probability itself.  The quantity
    that stabilises as the level grows is ``creep_given_cross``, the
    conditional probability that the crossing is continuous given that
    it happens.  The overshoot summaries describe ``xi(T_y) - y``
    conditional on a jump crossing; ``jump_fraction`` is the unweighted
    fraction of simulated runs that crossed by a jump.
    """

    y: float
    creep: EstimateReport
    jump_cross: EstimateReport
    creep_given_cross: EstimateReport
    overshoot_mean: float
    overshoot_stderr: float
    jump_fraction: float


def creep_overshoot(
    spec: MapSpec,
    sd: SpectralData | None,
    y_grid: Sequence[float],
    n: int,
    seed: int,
    *,
    i0: int = 0,
    threads: int = 1,
    event_cap: int = 10**8,
) -> tuple[CreepOvershootReport, ...]:
    """Classify first-passage crossings at each level in ``y_grid``.

    With spectral data the runs use the exponential change of measure
    at the Cramér number (passage is then certain) and are reweighted
    by the Wald factor, so creep and jump masses sum to the passage
    probability.  Without spectral data the model itself must drift
    upward and the weights are one.  Level ``k`` uses master seed
    ``seed + k``.
    """
    if sd is None:
        if not mean_drift(spec) > 0.0:
            raise DomainError("untilted crossing runs need positive mean drift")
        run_spec, v, theta = spec, None, 0.0
    else:
        if sd.theta <= 0.0:
            raise DomainError("importance sampling needs a positive Cramér number")
        run_spec, _resid = esscher_spec(spec, sd.theta)
        v, theta = sd.v_theta, sd.theta
    tab = build_tables(run_spec)
    reports = []
    for k, y in enumerate(y_grid):
        y = float(y)
        if y <= 0.0:
            raise DomainError("passage levels must be positive")
        batch = run_replicas(
            tab, n=n, seed=seed + k, i0=i0, up_level=y, threads=threads, event_cap=event_cap
        )
        _require_all_stopped(batch.reason, REASON_LEVEL_UP, "the passage level")
        if v is None:
            w = np.ones(n)
        else:
            w = v[i0] * np.exp(-theta * batch.xi_end) / v[batch.state_end]
        crept = batch.cross_kind == CROSS_CREEP
        creep_val, creep_err = _mean_stderr(np.where(crept, w, 0.0))
        jump_val, jump_err = _mean_stderr(np.where(crept, 0.0, w))
        cond_val, cond_err = _ratio_mean_stderr(crept.astype(float), w)
        if np.all(crept):
            over_mean, over_err = math.nan, math.nan
        else:
            overshoot = batch.xi_end - y
            over_mean, over_err = _ratio_mean_stderr(overshoot[~crept], w[~crept])
        reports.append(
            CreepOvershootReport(
                y=y,
                creep=EstimateReport("creep_prob", creep_val, creep_err, n, seed + k),
                jump_cross=EstimateReport("jump_cross_prob", jump_val, jump_err, n, seed + k),
                creep_given_cross=EstimateReport(
                    "creep_given_cross", cond_val, cond_err, n, seed + k
                ),
                overshoot_mean=over_mean,
                overshoot_stderr=over_err,
                jump_fraction=float(np.count_nonzero(~crept) / n),
            )
        )
    return tuple(reports)
