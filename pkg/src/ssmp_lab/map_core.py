"""Markov additive process (MAP) model and its spectral toolkit.

A MAP ``(xi, J)`` couples a finite-state Markov chain ``J`` (generator
``Q``) with one Lévy component per state and an extra jump at every
switch of ``J``.  The matrix Laplace exponent

    F(z) = diag(psi_1(z), ..., psi_N(z)) + Q . G(z)      (entrywise product)

characterises the process through E[e^{z xi(t)}; J(t)=j] = (e^{F(z) t})_{ij}.
This module builds ``F``, extracts its Perron–Frobenius eigenvalue
``chi(z)`` and positive eigenvector ``v(z)`` (normalised ``pi . v = 1``
against the stationary law ``pi`` of ``Q``), locates the Cramér number
``theta`` (the non-zero root of ``chi``), and constructs the Esscher
(exponential) change of measure concretely as another MAP.

Jump laws are restricted to a transform-closed family — point masses,
one-sided exponentials, and finite mixtures — so tilting and exact
event-driven simulation both stay closed-form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .numerics import DomainError, find_root

__all__ = [
    "JumpLaw",
    "LevyComponent",
    "MapSpec",
    "SpectralData",
    "TiltError",
    "ConvergenceError",
    "matrix_exponent",
    "leading_eigen",
    "spectral_data",
    "spectral_from_exponent",
    "find_cramer_bracket",
    "mean_drift",
    "esscher_spec",
    "wald_weight",
    "stationary_distribution",
    "mu_theta_candidates",
]


class TiltError(ValueError):
    """The exponential tilt leaves the closed jump-law family."""


class ConvergenceError(RuntimeError):
    """An iterative solve failed to converge."""


# ---------------------------------------------------------------------------
# jump laws
# ---------------------------------------------------------------------------

_POINT = "point"
_EXP = "exp"


@dataclass(frozen=True)
class JumpLaw:
    """Distribution of a single jump, closed under exponential tilting.

    A finite mixture of atoms, each either a point mass at ``a`` or a
    one-sided exponential with the given mean on the positive
    (``sign=+1``) or negative (``sign=-1``) axis.  The transform
    ``G(z) = E[e^{z Delta}]`` is finite on an open interval returned by
    :meth:`domain`.
    """

    weights: tuple[float, ...]
    atoms: tuple[tuple, ...]  # ("point", a) or ("exp", mean, sign)

    def __post_init__(self):
        if len(self.weights) != len(self.atoms) or not self.atoms:
            raise DomainError("JumpLaw needs matching, non-empty weights and atoms")
        if any(w <= 0.0 for w in self.weights):
            raise DomainError("mixture weights must be positive")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise DomainError(f"mixture weights must sum to 1, got {sum(self.weights)!r}")
        for atom in self.atoms:
            if atom[0] == _POINT:
                if len(atom) != 2:
                    raise DomainError(f"malformed point atom {atom!r}")
            elif atom[0] == _EXP:
                if len(atom) != 3 or not atom[1] > 0.0 or atom[2] not in (-1, 1):
                    raise DomainError(f"malformed exponential atom {atom!r}")
            else:
                raise DomainError(f"unknown atom kind {atom[0]!r}")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def point_mass(a: float) -> "JumpLaw":
        return JumpLaw((1.0,), ((_POINT, float(a)),))

    @staticmethod
    def exponential(mean: float, sign: int = 1) -> "JumpLaw":
        return JumpLaw((1.0,), ((_EXP, float(mean), int(sign)),))

    @staticmethod
    def mixture(weights, laws) -> "JumpLaw":
        """Mix existing laws; nested mixtures are flattened."""
        ws: list[float] = []
        atoms: list[tuple] = []
        for w, law in zip(weights, laws, strict=True):
            for wi, atom in zip(law.weights, law.atoms):
                ws.append(float(w) * wi)
                atoms.append(atom)
        return JumpLaw(tuple(ws), tuple(atoms))

    @staticmethod
    def zero() -> "JumpLaw":
        return JumpLaw.point_mass(0.0)

    @property
    def is_zero(self) -> bool:
        return all(a[0] == _POINT and a[1] == 0.0 for a in self.atoms)

    # -- analytics ---------------------------------------------------------

    def domain(self) -> tuple[float, float]:
        """Open interval of real z where the transform is finite."""
        lo, hi = -math.inf, math.inf
        for atom in self.atoms:
            if atom[0] == _EXP:
                rate = 1.0 / atom[1]
                if atom[2] > 0:
                    hi = min(hi, rate)
                else:
                    lo = max(lo, -rate)
        return lo, hi

    def transform(self, z: float) -> float:
        """G(z) = E[e^{z Delta}]; raises DomainError outside the open domain."""
        lo, hi = self.domain()
        if not lo < z < hi:
            raise DomainError(f"transform argument {z!r} outside open domain ({lo}, {hi})")
        total = 0.0
        for w, atom in zip(self.weights, self.atoms):
            if atom[0] == _POINT:
                total += w * math.exp(z * atom[1])
            else:
                mean, sign = atom[1], atom[2]
                total += w / (1.0 - sign * z * mean)
        return total

    def mean(self) -> float:
        total = 0.0
        for w, atom in zip(self.weights, self.atoms):
            if atom[0] == _POINT:
                total += w * atom[1]
            else:
                total += w * atom[2] * atom[1]
        return total

    def tilt(self, gamma: float) -> "JumpLaw":
        """Law of the jump under the density e^{gamma x} / G(gamma).

        Point masses are unchanged; an exponential atom with rate ``r``
        keeps its side with the rate shifted to ``r - sign*gamma``; the
        mixture weights are re-scaled by each atom's transform.  Fails
        when ``gamma`` reaches an exponential rate (the tilted law would
        leave the family).
        """
        lo, hi = self.domain()
        if not lo < gamma < hi:
            raise TiltError(
                f"tilt parameter {gamma!r} outside the open transform domain ({lo}, {hi})"
            )
        g_total = self.transform(gamma)
        ws: list[float] = []
        atoms: list[tuple] = []
        for w, atom in zip(self.weights, self.atoms):
            if atom[0] == _POINT:
                g_atom = math.exp(gamma * atom[1])
                ws.append(w * g_atom / g_total)
                atoms.append(atom)
            else:
                mean, sign = atom[1], atom[2]
                g_atom = 1.0 / (1.0 - sign * gamma * mean)
                new_rate = 1.0 / mean - sign * gamma
                ws.append(w * g_atom / g_total)
                atoms.append((_EXP, 1.0 / new_rate, sign))
        return JumpLaw(tuple(ws), tuple(atoms))

    # -- sampling ----------------------------------------------------------

    def sample(self, rng: np.random.Generator) -> float:
        """Draw one jump.

        Draw order is part of the simulation contract (the compiled and
        pure kernels must consume the stream identically): one uniform
        for atom selection iff the mixture has several atoms, then one
        standard exponential iff the chosen atom is exponential.
        """
        if len(self.atoms) > 1:
            u = rng.random()
            k = 0
            acc = self.weights[0]
            while u >= acc and k + 1 < len(self.atoms):
                k += 1
                acc += self.weights[k]
        else:
            k = 0
        atom = self.atoms[k]
        if atom[0] == _POINT:
            return atom[1]
        return atom[2] * atom[1] * rng.standard_exponential()


# ---------------------------------------------------------------------------
# per-state Lévy component
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevyComponent:
    """Lévy dynamics while the chain sits in one state.

    ``psi(z) = drift z + gaussian_sd^2 z^2 / 2 + cp_rate (G(z) - 1)``.
    A non-zero ``gaussian_sd`` is allowed for spectral work only; exact
    event-driven simulation requires ``gaussian_sd = 0``.
    """

    drift: float
    gaussian_sd: float = 0.0
    cp_rate: float = 0.0
    cp_jump_law: JumpLaw = field(default_factory=JumpLaw.zero)

    def __post_init__(self):
        if self.gaussian_sd < 0.0:
            raise DomainError("gaussian_sd must be >= 0")
        if self.cp_rate < 0.0:
            raise DomainError("cp_rate must be >= 0")

    def domain(self) -> tuple[float, float]:
        if self.cp_rate > 0.0:
            return self.cp_jump_law.domain()
        return -math.inf, math.inf

    def psi(self, z: float) -> float:
        value = self.drift * z + 0.5 * self.gaussian_sd**2 * z * z
        if self.cp_rate > 0.0:
            value += self.cp_rate * (self.cp_jump_law.transform(z) - 1.0)
        return value

    def mean_increment(self) -> float:
        """E[xi_i(1)] = drift + cp_rate * E[jump]."""
        value = self.drift
        if self.cp_rate > 0.0:
            value += self.cp_rate * self.cp_jump_law.mean()
        return value

    def tilt(self, gamma: float) -> "LevyComponent":
        """Component whose exponent is psi(. + gamma) - psi(gamma)."""
        drift = self.drift + self.gaussian_sd**2 * gamma
        if self.cp_rate > 0.0:
            scale = self.cp_jump_law.transform(gamma)
            return LevyComponent(
                drift, self.gaussian_sd, self.cp_rate * scale, self.cp_jump_law.tilt(gamma)
            )
        return LevyComponent(drift, self.gaussian_sd, 0.0, self.cp_jump_law)


# ---------------------------------------------------------------------------
# the MAP itself
# ---------------------------------------------------------------------------


def _as_matrix_tuple(q) -> tuple[tuple[float, ...], ...]:
    arr = np.asarray(q, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DomainError(f"rate matrix must be square, got shape {arr.shape}")
    return tuple(tuple(float(x) for x in row) for row in arr)


def _strongly_connected(q: np.ndarray) -> bool:
    n = q.shape[0]

    def reachable(adj):
        seen = {0}
        stack = [0]
        while stack:
            i = stack.pop()
            for j in range(n):
                if j not in seen and adj[i, j] > 0.0:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == n

    return reachable(q) and reachable(q.T)


@dataclass(frozen=True)
class MapSpec:
    """Full parametric description of a MAP.

    ``q_matrix`` is the chain generator (rows sum to zero, irreducible),
    ``components`` the per-state Lévy dynamics, and ``switch_jumps`` an
    N x N table of jump laws applied at switches — the (i, j) law fires
    when ``J`` jumps from i to j.  Pairs with ``q_ij = 0`` must carry
    the zero jump (diagonal entries are ignored).
    """

    q_matrix: tuple[tuple[float, ...], ...]
    components: tuple[LevyComponent, ...]
    switch_jumps: tuple[tuple[JumpLaw, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "q_matrix", _as_matrix_tuple(self.q_matrix))
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "switch_jumps", tuple(tuple(row) for row in self.switch_jumps))
        n = len(self.q_matrix)
        if n < 2:
            raise DomainError("MapSpec needs at least 2 states")
        if len(self.components) != n or len(self.switch_jumps) != n:
            raise DomainError("components and switch_jumps must match n_states")
        q = self.q
        scale = max(1.0, float(np.abs(q).max()))
        for i in range(n):
            if len(self.switch_jumps[i]) != n:
                raise DomainError("switch_jumps must be an N x N table")
            if abs(q[i].sum()) > 1e-12 * scale:
                raise DomainError(f"row {i} of q_matrix does not sum to 0")
            for j in range(n):
                if i == j:
                    continue
                if q[i, j] < 0.0:
                    raise DomainError(f"negative switch rate q[{i},{j}]")
                if q[i, j] == 0.0 and not self.switch_jumps[i][j].is_zero:
                    raise DomainError(
                        f"switch jump ({i},{j}) must be the zero law when q[{i},{j}] = 0"
                    )
        if not _strongly_connected(q):
            raise DomainError("the modulating chain must be irreducible")

    @staticmethod
    def build(q_matrix, components, switch_jumps=None) -> "MapSpec":
        """Convenience constructor; ``switch_jumps`` may be a dict {(i,j): law}."""
        n = len(components)
        table = [[JumpLaw.zero() for _ in range(n)] for _ in range(n)]
        if switch_jumps:
            for (i, j), law in switch_jumps.items():
                table[i][j] = law
        return MapSpec(q_matrix, tuple(components), tuple(tuple(row) for row in table))

    @property
    def n_states(self) -> int:
        return len(self.components)

    @cached_property
    def q(self) -> np.ndarray:
        arr = np.asarray(self.q_matrix, dtype=float)
        arr.setflags(write=False)
        return arr

    def domain(self) -> tuple[float, float]:
        """Open interval where every entry of F is finite."""
        lo, hi = -math.inf, math.inf
        q = self.q
        for i, comp in enumerate(self.components):
            clo, chi_ = comp.domain()
            lo, hi = max(lo, clo), min(hi, chi_)
            for j in range(self.n_states):
                if i != j and q[i, j] > 0.0:
                    jlo, jhi = self.switch_jumps[i][j].domain()
                    lo, hi = max(lo, jlo), min(hi, jhi)
        return lo, hi

    @cached_property
    def pi(self) -> np.ndarray:
        return stationary_distribution(self.q)


def stationary_distribution(q: np.ndarray) -> np.ndarray:
    """Stationary law of a conservative generator: pi Q = 0, pi . 1 = 1."""
    n = q.shape[0]
    a = np.vstack([q.T, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    if np.any(pi <= 0.0):
        raise ConvergenceError(f"stationary distribution not strictly positive: {pi}")
    return pi / pi.sum()


# ---------------------------------------------------------------------------
# matrix exponent and Perron–Frobenius data
# ---------------------------------------------------------------------------


def matrix_exponent(spec: MapSpec, z: float) -> np.ndarray:
    """Evaluate F(z) = diag(psi_i(z)) + Q . G(z) with G_ii = 1."""
    n = spec.n_states
    q = spec.q
    out = np.zeros((n, n))
    for i, comp in enumerate(spec.components):
        lo, hi = comp.domain()
        if not lo < z < hi:
            raise DomainError(f"z={z!r} outside domain ({lo}, {hi}) of component {i}")
        out[i, i] = comp.psi(z) + q[i, i]
        for j in range(n):
            if i == j or q[i, j] == 0.0:
                continue
            law = spec.switch_jumps[i][j]
            jlo, jhi = law.domain()
            if not jlo < z < jhi:
                raise DomainError(
                    f"z={z!r} outside domain ({jlo}, {jhi}) of switch jump ({i},{j})"
                )
            out[i, j] = q[i, j] * law.transform(z)
    return out


def leading_eigen(matrix: np.ndarray, pi: np.ndarray) -> tuple[float, np.ndarray]:
    """Perron–Frobenius eigenvalue and eigenvector of an evaluated F(z).

    Returns ``(chi, v)`` with ``chi`` the (real, simple) eigenvalue of
    maximal real part and ``v > 0`` normalised so that ``pi . v = 1``.
    Uses the closed-form quadratic solve for N=2 and shifted power
    iteration for larger N.
    """
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    if n == 2:
        a, b = m[0, 0], m[0, 1]
        c, d = m[1, 0], m[1, 1]
        disc = (a - d) * (a - d) + 4.0 * b * c
        if disc < 0.0:
            raise ConvergenceError("complex leading eigenvalue: matrix is not of F-form")
        chi = 0.5 * ((a + d) + math.sqrt(disc))
        if b > 0.0:
            v = np.array([b, chi - a])
        elif c > 0.0:
            v = np.array([chi - d, c])
        else:
            raise ConvergenceError("2-state matrix is reducible (no positive off-diagonal)")
    else:
        shift = max(0.0, -float(m.diagonal().min())) + 1.0
        shifted = m + shift * np.eye(n)
        v = np.ones(n)
        for _ in range(200_000):
            w = shifted @ v
            top = float(np.max(np.abs(w)))
            if top == 0.0:
                raise ConvergenceError("power iteration collapsed to zero vector")
            w = w / top
            if float(np.max(np.abs(w - v))) < 1e-14:
                v = w
                break
            v = w
        else:
            raise ConvergenceError("power iteration did not converge to 1e-12")
        if np.any(v <= 0.0):
            raise ConvergenceError(f"leading eigenvector not strictly positive: {v}")
        # for the converged direction the componentwise ratios all equal chi
        chi = float(np.mean((m @ v) / v))
    if np.any(v <= 0.0):
        raise ConvergenceError(f"leading eigenvector not strictly positive: {v}")
    v = v / float(pi @ v)
    return float(chi), v


# ---------------------------------------------------------------------------
# spectral data: Cramér number, derivatives, tilted stationary law
# ---------------------------------------------------------------------------


def _derivative(f: Callable[[float], float], x: float, h: float = 1e-5) -> float:
    """Fourth-order central difference (Richardson-extrapolated 3-point)."""
    return (f(x - 2 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2 * h)) / (12.0 * h)


@dataclass(frozen=True)
class SpectralData:
    """Perron–Frobenius data of a MAP around its Cramér number.

    ``chi_at``/``v_at`` evaluate the leading eigenvalue and its
    normalised positive eigenvector anywhere in the domain; ``theta``
    is the non-zero root of ``chi``; ``pi``/``pi_theta`` are the
    stationary laws of the chain under the original and tilted dynamics.
    """

    theta: float
    chi_at: Callable[[float], float]
    v_at: Callable[[float], np.ndarray]
    pi: np.ndarray
    pi_theta: np.ndarray
    chi_prime_0: float
    chi_prime_theta: float
    q_theta: np.ndarray

    @cached_property
    def v_theta(self) -> np.ndarray:
        return self.v_at(self.theta)

    def v_prime(self, z: float, h: float = 1e-5) -> np.ndarray:
        """Finite-difference derivative of the normalised eigenvector."""
        return (
            self.v_at(z - 2 * h)
            - 8.0 * self.v_at(z - h)
            + 8.0 * self.v_at(z + h)
            - self.v_at(z + 2 * h)
        ) / (12.0 * h)


def spectral_from_exponent(
    f_at: Callable[[float], np.ndarray], bracket: tuple[float, float]
) -> SpectralData:
    """Spectral data from any matrix-exponent callable.

    ``bracket`` must enclose the non-zero root of ``chi`` and exclude a
    neighbourhood of 0 (``chi(0) = 0`` always — the trivial root).
    """
    lo, hi = bracket
    if lo <= 0.0 <= hi:
        raise DomainError("the Cramér bracket must exclude a neighbourhood of 0")
    q = f_at(0.0)
    pi = stationary_distribution(q)

    def chi_at(z: float) -> float:
        return leading_eigen(f_at(z), pi)[0]

    def v_at(z: float) -> np.ndarray:
        return leading_eigen(f_at(z), pi)[1]

    theta = find_root(chi_at, lo, hi, tol=1e-13)
    chi_prime_0 = _derivative(chi_at, 0.0)
    try:
        chi_prime_theta = _derivative(chi_at, theta)
    except DomainError as exc:
        raise DomainError(
            f"chi'(theta) not computable at theta={theta!r}: domain boundary reached ({exc})"
        ) from exc
    v_theta = v_at(theta)
    d = np.diag(v_theta)
    d_inv = np.diag(1.0 / v_theta)
    q_theta = d_inv @ f_at(theta) @ d - chi_at(theta) * np.eye(len(pi))
    pi_theta = stationary_distribution(q_theta)
    return SpectralData(
        theta=theta,
        chi_at=chi_at,
        v_at=v_at,
        pi=pi,
        pi_theta=pi_theta,
        chi_prime_0=chi_prime_0,
        chi_prime_theta=chi_prime_theta,
        q_theta=q_theta,
    )


def spectral_data(spec: MapSpec, bracket: tuple[float, float]) -> SpectralData:
    """Cramér number and spectral curves of a MapSpec (see module doc)."""
    return spectral_from_exponent(lambda z: matrix_exponent(spec, z), bracket)


def find_cramer_bracket(
    spec: MapSpec, n_grid: int = 128, edge_fraction: float = 0.999
) -> tuple[float, float]:
    """Scan chi on log-spaced grids for a sign change away from zero.

    The positive axis is scanned when ``chi'(0) < 0`` (so the non-zero
    root is positive), the negative axis otherwise.  Raises
    :class:`~ssmp_lab.numerics.BracketError` if no sign change is found
    inside the domain of F.
    """
    from .numerics import BracketError

    dom_lo, dom_hi = spec.domain()
    pi = spec.pi

    def chi(z: float) -> float:
        return leading_eigen(matrix_exponent(spec, z), pi)[0]

    drift = mean_drift(spec)
    if drift == 0.0:
        raise BracketError("chi'(0) = 0: no non-zero Cramér root exists")
    if drift < 0.0:
        edge = dom_hi if math.isfinite(dom_hi) else 64.0
        zs = np.geomspace(1e-4 * edge, edge_fraction * edge, n_grid)
    else:
        edge = -dom_lo if math.isfinite(dom_lo) else 64.0
        zs = -np.geomspace(1e-4 * edge, edge_fraction * edge, n_grid)
    prev_z, prev_chi = None, None
    for z in zs:
        try:
            c = chi(float(z))
        except (DomainError, ConvergenceError, OverflowError):
            break
        if prev_z is not None and prev_chi < 0.0 < c:
            return (prev_z, float(z)) if z > 0 else (float(z), prev_z)
        # chi starts negative moving away from 0 (drift pushes it down);
        # record the last grid point before the sign change.
        prev_z, prev_chi = float(z), c
    raise BracketError("no sign change of chi found inside the domain of F")


# ---------------------------------------------------------------------------
# drift, tilt, martingale weight
# ---------------------------------------------------------------------------


def mean_drift(spec: MapSpec) -> float:
    """Long-run drift lim xi(t)/t = chi'(0), via the stationary-mean formula."""
    pi = spec.pi
    q = spec.q
    total = 0.0
    for i, comp in enumerate(spec.components):
        total += pi[i] * comp.mean_increment()
        for j in range(spec.n_states):
            if i != j and q[i, j] > 0.0:
                total += pi[i] * q[i, j] * spec.switch_jumps[i][j].mean()
    return total


def esscher_spec(spec: MapSpec, gamma: float) -> tuple[MapSpec, float]:
    """Exponential change of measure as a concrete MAP.

    Component ``i`` becomes the tilt of its Lévy dynamics, switch rates
    become ``q_ij G_ij(gamma) v_j(gamma) / v_i(gamma)`` with the switch
    law tilted by ``e^{gamma x}/G_ij(gamma)``, and the generator
    diagonal is reset so rows sum to zero.  Returns the tilted spec and
    the max entrywise residual of the conjugation identity

        F_tilted(z) = D_v^{-1} F(z + gamma) D_v - chi(gamma) I

    over a grid of admissible z.
    """
    n = spec.n_states
    q = spec.q
    try:
        f_gamma = matrix_exponent(spec, gamma)
    except DomainError as exc:
        raise TiltError(f"tilt parameter {gamma!r} leaves the jump-law family: {exc}") from exc
    chi_g, v_g = leading_eigen(f_gamma, spec.pi)
    components = tuple(comp.tilt(gamma) for comp in spec.components)
    q_new = np.zeros((n, n))
    jumps = [[JumpLaw.zero() for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j or q[i, j] == 0.0:
                continue
            law = spec.switch_jumps[i][j]
            try:
                g_ij = law.transform(gamma)
            except DomainError as exc:
                raise TiltError(f"switch jump ({i},{j}) cannot be tilted by {gamma!r}") from exc
            q_new[i, j] = q[i, j] * g_ij * v_g[j] / v_g[i]
            jumps[i][j] = law.tilt(gamma)
        q_new[i, i] = -q_new[i].sum() + q_new[i, i]
    tilted = MapSpec(q_new, components, tuple(tuple(row) for row in jumps))

    # residual of the conjugation identity over a z-grid in the overlap domain
    lo, hi = spec.domain()
    t_lo, t_hi = tilted.domain()
    window = max(4.0, 2.0 * abs(gamma))
    zlo = max(t_lo, lo - gamma, -window)
    zhi = min(t_hi, hi - gamma, window)
    d = np.diag(v_g)
    d_inv = np.diag(1.0 / v_g)
    check = 0.0
    for frac in (0.15, 0.35, 0.5, 0.65, 0.85):
        z = zlo + frac * (zhi - zlo)
        if not (zlo < z < zhi and math.isfinite(z)):
            continue
        lhs = matrix_exponent(tilted, z)
        rhs = d_inv @ matrix_exponent(spec, z + gamma) @ d - chi_g * np.eye(n)
        check = max(check, float(np.abs(lhs - rhs).max()))
    return tilted, check


def wald_weight(
    x0: float, i0: int, xt: float, jt: int, t: float, gamma: float, sd: SpectralData
) -> float:
    """Wald martingale weight e^{gamma(xt-x0) - chi(gamma) t} v_jt / v_i0."""
    if t < 0.0:
        raise DomainError("wald_weight needs t >= 0")
    chi_g = sd.chi_at(gamma)
    v = sd.v_at(gamma)
    return math.exp(gamma * (xt - x0) - chi_g * t) * v[jt] / v[i0]


def mu_theta_candidates(sd: SpectralData) -> tuple[float, float]:
    """Two candidate values for the tilted stationary drift mu_theta.

    Primary: ``chi'(theta)`` (the stationary mean drift under the
    tilt).  The alternative adds eigenvector-derivative correction
    terms ``pi_theta . k - pi_theta (Q_theta - I)^{-1} k`` with
    ``k = v'(theta)``; both are reported so downstream consumers can
    see the discrepancy, but the primary value is the one used in the
    tail-constant assembly.
    """
    primary = sd.chi_prime_theta
    k = sd.v_prime(sd.theta)
    n = len(sd.pi)
    correction = float(sd.pi_theta @ k) - float(
        sd.pi_theta @ np.linalg.solve(sd.q_theta - np.eye(n), k)
    )
    return primary, primary + correction
