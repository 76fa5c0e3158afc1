"""Pure-Python replica kernel: the reference event loop.

One replica = one exact event-driven run of a drift + compound-Poisson
MAP encoded as flat tables (see :func:`ssmp_lab.kernel.build_tables`),
with optional level / horizon / additive-clock stops, exponential-
functional accumulation and occupation-window timing.

The compiled kernel (``_kernel_cy``) mirrors this module draw for draw
and operation for operation: both consume their bit stream through the
same scalar calls (``standard_exponential`` / ``random``) in the same
order, so replicas are reproducible bit for bit across kernels.  The
draw order per event is a frozen contract:

1. one standard exponential for the switch clock iff the switch rate
   is positive (it always is for an irreducible chain);
2. one standard exponential for the compound-Poisson clock iff the
   CP rate of the current state is positive;
3. if the switch clock wins (ties go to the switch): one uniform for
   the destination state, then the switch jump-law draws;
4. if the CP clock wins: the CP jump-law draws;
5. jump-law draws: one uniform for atom selection iff the mixture has
   more than one atom, then one standard exponential iff the selected
   atom is exponential (point atoms consume nothing).
"""

from __future__ import annotations

import math

import numpy as np

REASON_HORIZON = 0
REASON_LEVEL_UP = 1
REASON_LEVEL_DOWN = 2
REASON_CLOCK = 3
REASON_EVENT_CAP = 4

REASON_NAMES = ("fixed_horizon", "level_up", "level_down", "clock", "event_cap")

CROSS_NONE = -1
CROSS_CREEP = 0
CROSS_CP_JUMP = 1
CROSS_SWITCH_JUMP = 2

CROSS_NAMES = {-1: "none", 0: "creep", 1: "cp_jump", 2: "switch_jump"}

N_FIELDS = 10  # t, xi, state, reason, n_events, xi_pre, cross_kind, exp_integral, max, min


def sample_law(tab, law_id: int, g) -> float:
    """Draw one jump from pooled law ``law_id`` (contract order above)."""
    lo = tab.law_offset[law_id]
    hi = tab.law_offset[law_id + 1]
    k = lo
    if hi - lo > 1:
        u = g.random()
        while k < hi - 1 and u >= tab.atom_wcum[k]:
            k += 1
    if tab.atom_kind[k] == 0:
        return float(tab.atom_param[k])
    return float(tab.atom_sign[k] * tab.atom_param[k] * g.standard_exponential())


def sample_destination(tab, state: int, g) -> int:
    """Draw the switch destination; always consumes exactly one uniform."""
    u = g.random()
    k = 0
    last = tab.n_states - 2
    while k < last and u >= tab.dest_cum[state, k]:
        k += 1
    return int(tab.dest_idx[state, k])


def _exp(x: float) -> float:
    """``exp`` with C library saturation: overflow yields ``inf``, not an error."""
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _expm1(x: float) -> float:
    try:
        return math.expm1(x)
    except OverflowError:
        return math.inf


def segment_exp_integral(a: float, b: float, s: float, alpha: float) -> float:
    """Closed form of the clock increment over one linear segment.

    ``integral_0^s exp(alpha (a + b u)) du`` — the only quantity the
    exponential functional and the self-similar time change need.
    """
    if s <= 0.0:
        return 0.0
    ea = _exp(alpha * a)
    if b == 0.0:
        return ea * s
    return ea * _expm1(alpha * b * s) / (alpha * b)


def clock_crossing_time(a: float, b: float, alpha: float, remaining: float) -> float:
    """Segment time at which the clock integral reaches ``remaining``.

    Inverts :func:`segment_exp_integral`; returns ``inf`` when a
    downhill segment saturates below the target.
    """
    if remaining <= 0.0:
        return 0.0
    if b == 0.0:
        return remaining / _exp(alpha * a)
    x = remaining * alpha * b * _exp(-alpha * a)
    if b < 0.0 and x <= -1.0:
        return math.inf
    if x > 1e300:
        return (math.log(remaining * alpha * b) - alpha * a) / (alpha * b)
    return math.log1p(x) / (alpha * b)


def occupancy(a: float, b: float, s: float, lo: float, hi: float) -> float:
    """Time ``u`` in [0, s] with ``a + b u`` inside [lo, hi]."""
    if s <= 0.0:
        return 0.0
    if b == 0.0:
        return s if lo <= a <= hi else 0.0
    u1 = (lo - a) / b
    u2 = (hi - a) / b
    if u2 < u1:
        u1, u2 = u2, u1
    lo_cut = u1 if u1 > 0.0 else 0.0
    hi_cut = u2 if u2 < s else s
    return hi_cut - lo_cut if hi_cut > lo_cut else 0.0


def run_one(
    tab,
    x0: float,
    i0: int,
    horizon: float,
    up_level: float,
    down_level: float,
    clock_target: float,
    alpha: float,
    occ_lo: float,
    occ_hi: float,
    event_cap: int,
    g,
    occ_row=None,
):
    """One exact replica; returns the 10-field terminal record.

    Fields: ``(t_end, xi_end, state_end, reason, n_events, xi_pre,
    cross_kind, exp_integral, max_xi, min_xi)``.  Level crossings are
    located exactly on linear segments (creep) or at jump instants;
    creep terminals pin ``xi_end`` to the level and clock terminals pin
    the integral to the target, so downstream identities are exact.
    """
    t = 0.0
    xi = float(x0)
    state = int(i0)
    exp_int = 0.0
    max_xi = xi
    min_xi = xi
    n_events = 0
    track_clock = alpha > 0.0
    track_occ = occ_row is not None
    while True:
        drift = float(tab.drift[state])
        sw_rate = tab.switch_rate[state]
        cp_rate = tab.cp_rate[state]
        e_sw = g.standard_exponential() / sw_rate if sw_rate > 0.0 else math.inf
        e_cp = g.standard_exponential() / cp_rate if cp_rate > 0.0 else math.inf
        use_switch = e_sw <= e_cp
        dt = e_sw if use_switch else e_cp

        # earliest stop triggered within the segment wins over the event
        cut = dt
        reason = -1
        if t + cut >= horizon:
            cut = horizon - t
            reason = REASON_HORIZON
        if drift > 0.0 and xi <= up_level:
            s_star = (up_level - xi) / drift
            if s_star <= cut:
                cut = s_star
                reason = REASON_LEVEL_UP
        if drift < 0.0 and xi >= down_level:
            s_star = (down_level - xi) / drift
            if s_star <= cut:
                cut = s_star
                reason = REASON_LEVEL_DOWN
        if track_clock and clock_target < math.inf:
            if exp_int + segment_exp_integral(xi, drift, cut, alpha) >= clock_target:
                s_star = clock_crossing_time(xi, drift, alpha, clock_target - exp_int)
                if s_star <= cut:
                    cut = s_star
                    reason = REASON_CLOCK

        if reason >= 0:
            if track_clock:
                exp_int += segment_exp_integral(xi, drift, cut, alpha)
            if track_occ:
                occ_row[state] += occupancy(xi, drift, cut, occ_lo, occ_hi)
            t += cut
            if reason == REASON_LEVEL_UP:
                xi = up_level
            elif reason == REASON_LEVEL_DOWN:
                xi = down_level
            else:
                xi += drift * cut
                if reason == REASON_CLOCK:
                    exp_int = clock_target
            if xi > max_xi:
                max_xi = xi
            if xi < min_xi:
                min_xi = xi
            kind = (
                CROSS_CREEP
                if reason in (REASON_LEVEL_UP, REASON_LEVEL_DOWN)
                else CROSS_NONE
            )
            return (t, xi, state, reason, n_events, xi, kind, exp_int, max_xi, min_xi)

        # no stop: the winning clock fires an event at the segment end
        if track_clock:
            exp_int += segment_exp_integral(xi, drift, dt, alpha)
        if track_occ:
            occ_row[state] += occupancy(xi, drift, dt, occ_lo, occ_hi)
        t += dt
        xi += drift * dt
        if xi > max_xi:
            max_xi = xi
        if xi < min_xi:
            min_xi = xi
        xi_pre = xi
        if use_switch:
            j = sample_destination(tab, state, g)
            jump = sample_law(tab, int(tab.switch_law[state, j]), g)
            kind = CROSS_SWITCH_JUMP
            state = j
        else:
            jump = sample_law(tab, int(tab.cp_law[state]), g)
            kind = CROSS_CP_JUMP
        xi += jump
        if xi > max_xi:
            max_xi = xi
        if xi < min_xi:
            min_xi = xi
        n_events += 1
        if jump != 0.0:
            if xi > up_level:
                return (t, xi, state, REASON_LEVEL_UP, n_events, xi_pre, kind, exp_int, max_xi, min_xi)
            if xi < down_level:
                return (t, xi, state, REASON_LEVEL_DOWN, n_events, xi_pre, kind, exp_int, max_xi, min_xi)
        if n_events >= event_cap:
            return (t, xi, state, REASON_EVENT_CAP, n_events, xi, CROSS_NONE, exp_int, max_xi, min_xi)


def run_batch(tab, x0, i0, stop, alpha, occ_lo, occ_hi, event_cap, seed, r0, r1, out, occ):
    """Run replicas ``r0 <= r < r1`` into rows of ``out`` (and ``occ``).

    Replica ``r`` owns the stream ``PCG64(SeedSequence((seed, r)))``;
    rows are written independently, so disjoint ranges may run on
    different threads.
    """
    horizon, up_level, down_level, clock_target = stop
    for r in range(r0, r1):
        g = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, r))))
        occ_row = occ[r] if occ is not None else None
        out[r, :] = run_one(
            tab,
            x0[r],
            i0[r],
            horizon,
            up_level,
            down_level,
            clock_target,
            alpha,
            occ_lo,
            occ_hi,
            event_cap,
            g,
            occ_row,
        )
