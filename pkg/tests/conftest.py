"""Shared synthetic model specs with known analytic spectral data."""

import numpy as np
import pytest

from ssmp_lab.map_core import JumpLaw, LevyComponent, MapSpec


def asym_drift_spec() -> MapSpec:
    """Drift-only two-state MAP with exact Cramér data.

    Drifts (+1, -3), symmetric unit switching, no jumps:
    chi(z) = -(z+1) + sqrt(4 z^2 + 1), theta = 2/3, chi'(0) = -1,
    chi'(theta) = 3/5, v(theta) = (3/2, 1/2).
    """
    return MapSpec.build(
        [[-1.0, 1.0], [1.0, -1.0]],
        (LevyComponent(drift=1.0), LevyComponent(drift=-3.0)),
    )


def mirror_drift_spec() -> MapSpec:
    """Sign-mirrored version of asym_drift_spec: theta = -2/3."""
    return MapSpec.build(
        [[-1.0, 1.0], [1.0, -1.0]],
        (LevyComponent(drift=-1.0), LevyComponent(drift=3.0)),
    )


def cp_oracle_spec() -> MapSpec:
    """Both states run the classic risk process: drift -1, unit-rate
    compound Poisson with Exp(mean 1/2) positive jumps.

    Scalar exponent psi(z) = -z + z/(2-z); theta = 1; the level-passage
    probability has the closed form 0.5 * exp(-y) (Cramér–Lundberg).
    """
    comp = LevyComponent(drift=-1.0, cp_rate=1.0, cp_jump_law=JumpLaw.exponential(0.5, +1))
    return MapSpec.build([[-1.0, 1.0], [1.0, -1.0]], (comp, comp))


def jumpy_spec() -> MapSpec:
    """Two-state MAP exercising every jump-law feature at once."""
    comp0 = LevyComponent(drift=-1.0, cp_rate=1.0, cp_jump_law=JumpLaw.exponential(0.5, +1))
    comp1 = LevyComponent(
        drift=0.5,
        cp_rate=0.5,
        cp_jump_law=JumpLaw.mixture(
            (0.6, 0.4), (JumpLaw.exponential(0.4, -1), JumpLaw.point_mass(0.3))
        ),
    )
    return MapSpec.build(
        [[-2.0, 2.0], [1.5, -1.5]],
        (comp0, comp1),
        {(0, 1): JumpLaw.point_mass(0.2), (1, 0): JumpLaw.exponential(0.3, -1)},
    )


def brownian_like_spec() -> MapSpec:
    """Both states identical drift -1, unit Gaussian part: theta = 2.

    Spectral computations only (gaussian_sd > 0 cannot be simulated).
    """
    comp = LevyComponent(drift=-1.0, gaussian_sd=1.0)
    return MapSpec.build([[-1.0, 1.0], [1.0, -1.0]], (comp, comp))


def three_state_spec() -> MapSpec:
    """Three-state MAP for exercising the power-iteration eigen path."""
    comps = (
        LevyComponent(drift=1.0, cp_rate=0.5, cp_jump_law=JumpLaw.exponential(0.3, -1)),
        LevyComponent(drift=-2.0),
        LevyComponent(drift=-1.0, cp_rate=1.0, cp_jump_law=JumpLaw.point_mass(0.25)),
    )
    q = [[-2.0, 1.5, 0.5], [1.0, -1.5, 0.5], [0.5, 1.0, -1.5]]
    return MapSpec.build(
        q,
        comps,
        {(0, 1): JumpLaw.point_mass(-0.1), (2, 0): JumpLaw.exponential(0.2, +1)},
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
