# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled replica kernel: the bit-exact twin of ``_kernel_py``.

Same tables, same stop semantics, same draw order, same floating-point
expressions — replica ``r`` of a batch produces identical bits under
either kernel.  See ``_kernel_py`` for the draw-order contract; keep
the two event loops in lockstep when changing either.
"""

import numpy as np

from numpy.random import PCG64, SeedSequence

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport INFINITY, exp, expm1, log, log1p
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_exponential,
    random_standard_uniform,
)

DEF REASON_HORIZON = 0
DEF REASON_LEVEL_UP = 1
DEF REASON_LEVEL_DOWN = 2
DEF REASON_CLOCK = 3
DEF REASON_EVENT_CAP = 4

DEF CROSS_NONE = -1
DEF CROSS_CREEP = 0
DEF CROSS_CP_JUMP = 1
DEF CROSS_SWITCH_JUMP = 2


cdef struct KTab:
    Py_ssize_t n_states
    const double *drift
    const double *switch_rate
    const double *cp_rate
    const cnp.int64_t *cp_law
    const double *dest_cum          # (n, n-1) row-major
    const cnp.int64_t *dest_idx     # (n, n-1) row-major
    const cnp.int64_t *switch_law   # (n, n) row-major
    const cnp.int64_t *law_offset
    const cnp.int8_t *atom_kind
    const double *atom_param
    const cnp.int8_t *atom_sign
    const double *atom_wcum


cdef inline double _sample_law(const KTab *tab, cnp.int64_t law_id, bitgen_t *bg) noexcept nogil:
    cdef cnp.int64_t lo = tab.law_offset[law_id]
    cdef cnp.int64_t hi = tab.law_offset[law_id + 1]
    cdef cnp.int64_t k = lo
    cdef double u
    if hi - lo > 1:
        u = random_standard_uniform(bg)
        while k < hi - 1 and u >= tab.atom_wcum[k]:
            k += 1
    if tab.atom_kind[k] == 0:
        return tab.atom_param[k]
    return (<double> tab.atom_sign[k]) * tab.atom_param[k] * random_standard_exponential(bg)


cdef inline cnp.int64_t _sample_destination(const KTab *tab, Py_ssize_t state, bitgen_t *bg) noexcept nogil:
    cdef double u = random_standard_uniform(bg)
    cdef Py_ssize_t k = 0
    cdef Py_ssize_t last = tab.n_states - 2
    cdef Py_ssize_t row = state * (tab.n_states - 1)
    while k < last and u >= tab.dest_cum[row + k]:
        k += 1
    return tab.dest_idx[row + k]


cdef inline double _segment_exp_integral(double a, double b, double s, double alpha) noexcept nogil:
    cdef double ea
    if s <= 0.0:
        return 0.0
    ea = exp(alpha * a)
    if b == 0.0:
        return ea * s
    return ea * expm1(alpha * b * s) / (alpha * b)


cdef inline double _clock_crossing_time(double a, double b, double alpha, double remaining) noexcept nogil:
    cdef double x
    if remaining <= 0.0:
        return 0.0
    if b == 0.0:
        return remaining / exp(alpha * a)
    x = remaining * alpha * b * exp(-alpha * a)
    if b < 0.0 and x <= -1.0:
        return INFINITY
    if x > 1e300:
        return (log(remaining * alpha * b) - alpha * a) / (alpha * b)
    return log1p(x) / (alpha * b)


cdef inline double _occupancy(double a, double b, double s, double lo, double hi) noexcept nogil:
    cdef double u1, u2, tmp, lo_cut, hi_cut
    if s <= 0.0:
        return 0.0
    if b == 0.0:
        return s if lo <= a <= hi else 0.0
    u1 = (lo - a) / b
    u2 = (hi - a) / b
    if u2 < u1:
        tmp = u1
        u1 = u2
        u2 = tmp
    lo_cut = u1 if u1 > 0.0 else 0.0
    hi_cut = u2 if u2 < s else s
    return hi_cut - lo_cut if hi_cut > lo_cut else 0.0


cdef void _run_one(const KTab *tab, bitgen_t *bg, double x0, cnp.int64_t i0,
                   double horizon, double up_level, double down_level,
                   double clock_target, double alpha,
                   double occ_lo, double occ_hi, cnp.int64_t event_cap,
                   bint track_occ, double *out_row, double *occ_row) noexcept nogil:
    cdef double t = 0.0
    cdef double xi = x0
    cdef Py_ssize_t state = <Py_ssize_t> i0
    cdef double exp_int = 0.0
    cdef double max_xi = xi
    cdef double min_xi = xi
    cdef cnp.int64_t n_events = 0
    cdef bint track_clock = alpha > 0.0
    cdef double drift, sw_rate, cp_rate, e_sw, e_cp, dt, cut, s_star, xi_pre, jump
    cdef bint use_switch
    cdef int reason, kind
    cdef cnp.int64_t j

    while True:
        drift = tab.drift[state]
        sw_rate = tab.switch_rate[state]
        cp_rate = tab.cp_rate[state]
        e_sw = random_standard_exponential(bg) / sw_rate if sw_rate > 0.0 else INFINITY
        e_cp = random_standard_exponential(bg) / cp_rate if cp_rate > 0.0 else INFINITY
        use_switch = e_sw <= e_cp
        dt = e_sw if use_switch else e_cp

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
        if track_clock and clock_target < INFINITY:
            if exp_int + _segment_exp_integral(xi, drift, cut, alpha) >= clock_target:
                s_star = _clock_crossing_time(xi, drift, alpha, clock_target - exp_int)
                if s_star <= cut:
                    cut = s_star
                    reason = REASON_CLOCK

        if reason >= 0:
            if track_clock:
                exp_int += _segment_exp_integral(xi, drift, cut, alpha)
            if track_occ:
                occ_row[state] += _occupancy(xi, drift, cut, occ_lo, occ_hi)
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
            kind = CROSS_CREEP if (reason == REASON_LEVEL_UP or reason == REASON_LEVEL_DOWN) else CROSS_NONE
            out_row[0] = t
            out_row[1] = xi
            out_row[2] = <double> state
            out_row[3] = <double> reason
            out_row[4] = <double> n_events
            out_row[5] = xi
            out_row[6] = <double> kind
            out_row[7] = exp_int
            out_row[8] = max_xi
            out_row[9] = min_xi
            return

        if track_clock:
            exp_int += _segment_exp_integral(xi, drift, dt, alpha)
        if track_occ:
            occ_row[state] += _occupancy(xi, drift, dt, occ_lo, occ_hi)
        t += dt
        xi += drift * dt
        if xi > max_xi:
            max_xi = xi
        if xi < min_xi:
            min_xi = xi
        xi_pre = xi
        if use_switch:
            j = _sample_destination(tab, state, bg)
            jump = _sample_law(tab, tab.switch_law[state * tab.n_states + j], bg)
            kind = CROSS_SWITCH_JUMP
            state = <Py_ssize_t> j
        else:
            jump = _sample_law(tab, tab.cp_law[state], bg)
            kind = CROSS_CP_JUMP
        xi += jump
        if xi > max_xi:
            max_xi = xi
        if xi < min_xi:
            min_xi = xi
        n_events += 1
        if jump != 0.0:
            if xi > up_level or xi < down_level:
                out_row[0] = t
                out_row[1] = xi
                out_row[2] = <double> state
                out_row[3] = <double> (REASON_LEVEL_UP if xi > up_level else REASON_LEVEL_DOWN)
                out_row[4] = <double> n_events
                out_row[5] = xi_pre
                out_row[6] = <double> kind
                out_row[7] = exp_int
                out_row[8] = max_xi
                out_row[9] = min_xi
                return
        if n_events >= event_cap:
            out_row[0] = t
            out_row[1] = xi
            out_row[2] = <double> state
            out_row[3] = REASON_EVENT_CAP
            out_row[4] = <double> n_events
            out_row[5] = xi
            out_row[6] = CROSS_NONE
            out_row[7] = exp_int
            out_row[8] = max_xi
            out_row[9] = min_xi
            return


def run_batch(tab, x0, i0, stop, double alpha, double occ_lo, double occ_hi,
              event_cap, seed, Py_ssize_t r0, Py_ssize_t r1, out, occ):
    """Replicas ``r0 <= r < r1`` into ``out`` rows; see ``_kernel_py``."""
    cdef const double[::1] drift = tab.drift
    cdef const double[::1] switch_rate = tab.switch_rate
    cdef const double[::1] cp_rate = tab.cp_rate
    cdef const cnp.int64_t[::1] cp_law = tab.cp_law
    cdef const double[:, ::1] dest_cum = tab.dest_cum
    cdef const cnp.int64_t[:, ::1] dest_idx = tab.dest_idx
    cdef const cnp.int64_t[:, ::1] switch_law = tab.switch_law
    cdef const cnp.int64_t[::1] law_offset = tab.law_offset
    cdef const cnp.int8_t[::1] atom_kind = tab.atom_kind
    cdef const double[::1] atom_param = tab.atom_param
    cdef const cnp.int8_t[::1] atom_sign = tab.atom_sign
    cdef const double[::1] atom_wcum = tab.atom_wcum

    cdef KTab ktab
    ktab.n_states = <Py_ssize_t> tab.n_states
    ktab.drift = &drift[0]
    ktab.switch_rate = &switch_rate[0]
    ktab.cp_rate = &cp_rate[0]
    ktab.cp_law = &cp_law[0]
    ktab.dest_cum = &dest_cum[0, 0]
    ktab.dest_idx = &dest_idx[0, 0]
    ktab.switch_law = &switch_law[0, 0]
    ktab.law_offset = &law_offset[0]
    ktab.atom_kind = &atom_kind[0]
    ktab.atom_param = &atom_param[0]
    ktab.atom_sign = &atom_sign[0]
    ktab.atom_wcum = &atom_wcum[0]

    cdef const double[::1] x0_mv = x0
    cdef const cnp.int64_t[::1] i0_mv = i0
    cdef double[:, ::1] out_mv = out
    cdef double[:, ::1] occ_mv
    cdef bint track_occ = occ is not None
    if track_occ:
        occ_mv = occ

    cdef double horizon = stop[0]
    cdef double up_level = stop[1]
    cdef double down_level = stop[2]
    cdef double clock_target = stop[3]
    cdef cnp.int64_t cap = event_cap

    cdef Py_ssize_t r
    cdef bitgen_t *bg
    cdef double *occ_row
    for r in range(r0, r1):
        bg_obj = PCG64(SeedSequence((seed, r)))
        capsule = bg_obj.capsule
        bg = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")
        occ_row = &occ_mv[r, 0] if track_occ else NULL
        with nogil:
            _run_one(&ktab, bg, x0_mv[r], i0_mv[r], horizon, up_level, down_level,
                     clock_target, alpha, occ_lo, occ_hi, cap, track_occ,
                     &out_mv[r, 0], occ_row)
