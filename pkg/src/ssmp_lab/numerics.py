"""Shared scalar numerics.

Log-gamma, quadrature against integrands with integrable endpoint
singularities, bracketed root finding, and least-squares power-law tail
fits.  Everything here is a pure function of its inputs and safe to call
from multiple threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class BracketError(ValueError):
    """The supplied bracket does not contain a sign change."""


class QuadratureError(RuntimeError):
    """Quadrature failed to converge.

    Carries the best available estimate and an error bound so callers can
    decide whether the partial result is still usable.
    """

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(f"{message} (best estimate {estimate!r}, error bound {error_bound!r})")
        self.estimate = estimate
        self.error_bound = error_bound


def log_gamma(x: float) -> float:
    """Return ln Gamma(x) for x > 0 with ~1e-15 relative accuracy.

    Backed by the C library's Lanczos-grade implementation; the wrapper
    adds the strict positive-domain contract used throughout the
    hypergeometric-ratio formulas.
    """
    if not x > 0.0:
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def gamma_signed(x: float) -> tuple[float, float]:
    """Return (log |Gamma(x)|, sign of Gamma(x)) for non-pole real x.

    Negative non-integer arguments arise in ratio formulas whose
    parameters wander left of zero; poles (0, -1, -2, ...) are rejected.
    """
    if x > 0.0:
        return math.lgamma(x), 1.0
    if x == math.floor(x):
        raise DomainError(f"Gamma pole at {x!r}")
    # reflection: Gamma(x) = pi / (sin(pi x) * Gamma(1 - x))
    s = math.sin(math.pi * x)
    return math.log(math.pi / abs(s)) - math.lgamma(1.0 - x), math.copysign(1.0, s)


def gamma_ratio(numer: tuple[float, ...], denom: tuple[float, ...]) -> float:
    """Evaluate prod Gamma(numer_i) / prod Gamma(denom_j) stably in log space."""
    log_total = 0.0
    sign = 1.0
    for a in numer:
        lg, s = gamma_signed(a)
        log_total += lg
        sign *= s
    for b in denom:
        lg, s = gamma_signed(b)
        log_total -= lg
        sign *= s
    return sign * math.exp(log_total)


@dataclass(frozen=True)
class QuadratureSpec:
    """Interval plus declared endpoint behaviour of the full integrand.

    The integrand behaves like ``(t - lower)**left_exponent`` near
    ``lower`` and ``(upper - t)**right_exponent`` near ``upper``; both
    exponents must exceed -1 for integrability.  The singular factors
    are supplied here and *absorbed by the quadrature weight*, so the
    function handed to :func:`integrate_singular` is the smooth factor
    only.
    """

    lower: float
    upper: float
    left_exponent: float = 0.0
    right_exponent: float = 0.0
    rel_tol: float = 1e-10

    def __post_init__(self):
        if not self.lower < self.upper:
            raise DomainError(f"need lower < upper, got [{self.lower}, {self.upper}]")
        if not (self.left_exponent > -1.0 and self.right_exponent > -1.0):
            raise DomainError(
                f"endpoint exponents must exceed -1, got "
                f"({self.left_exponent}, {self.right_exponent})"
            )
        if not self.rel_tol > 0.0:
            raise DomainError("rel_tol must be positive")


_QUAD_LIMIT = 200


def integrate_singular(f: Callable[[float], float], spec: QuadratureSpec) -> float:
    """Integrate ``f(t) * (t-lower)^la * (upper-t)^ra`` over [lower, upper].

    ``f`` is the smooth factor; the declared endpoint exponents are
    absorbed into a Jacobi-type quadrature weight, with adaptive
    Gauss-Kronrod refinement of the interior.  Non-convergence raises
    :class:`QuadratureError` carrying the best estimate and its bound.
    """
    la, ra = spec.left_exponent, spec.right_exponent
    if la == 0.0 and ra == 0.0:
        out = integrate.quad(
            f, spec.lower, spec.upper,
            epsabs=0.0, epsrel=spec.rel_tol, limit=_QUAD_LIMIT, full_output=True,
        )
    else:
        out = integrate.quad(
            f, spec.lower, spec.upper,
            weight="alg", wvar=(la, ra),
            epsabs=0.0, epsrel=spec.rel_tol, limit=_QUAD_LIMIT, full_output=True,
        )
    value, err = out[0], out[1]
    if len(out) > 3:  # (value, err, infodict, message) on trouble
        # Tolerate the benign "roundoff prevents requested tolerance"
        # outcome only when the achieved bound is close to the request.
        if not err <= 10.0 * spec.rel_tol * max(1.0, abs(value)):
            raise QuadratureError(str(out[3]), estimate=value, error_bound=err)
    return value


def find_root(g: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Locate the root of ``g`` inside a sign-changing bracket [lo, hi].

    Hybrid bracketing (Brent) with guaranteed convergence; raises
    :class:`BracketError` when the bracket carries no sign change, which
    is distinct from any numerical failure inside the solver.
    """
    if not lo < hi:
        raise DomainError(f"need lo < hi, got [{lo}, {hi}]")
    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if g_lo * g_hi > 0.0:
        raise BracketError(f"no root in bracket [{lo}, {hi}]: g has no sign change")
    return float(optimize.brentq(g, lo, hi, xtol=tol, rtol=8.881784197001252e-16))


def power_tail_fit(points: list[tuple[float, float]]) -> tuple[float, float]:
    """Fit ``p = amplitude * t**(-exponent)`` by least squares on logs.

    ``points`` are (t, p) pairs with t strictly increasing and p > 0.
    Returns ``(exponent, amplitude)``.
    """
    if len(points) < 3:
        raise DomainError("power_tail_fit needs at least 3 points")
    t = np.asarray([p[0] for p in points], dtype=float)
    p = np.asarray([p[1] for p in points], dtype=float)
    if np.any(t <= 0.0) or np.any(p <= 0.0):
        raise DomainError("power_tail_fit needs strictly positive t and p")
    if np.any(np.diff(t) <= 0.0):
        raise DomainError("power_tail_fit needs strictly increasing t")
    log_t, log_p = np.log(t), np.log(p)
    slope, intercept = np.polyfit(log_t, log_p, 1)
    return float(-slope), float(math.exp(intercept))
