import dataclasses
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvdepth.core import (
    DEFAULT_CONSTANTS,
    MAGIC_ANGLE,
    PROTON_GAMMA,
    NuclearSample,
    NvCenter,
    PhysicalConstants,
    PulseSequence,
    SemiInfinite,
    Slab,
    StaticField,
    gauss_to_tesla,
    larmor_frequency,
    m_to_nm,
    nm_to_m,
    tesla_to_gauss,
)


def test_gamma_e_close_to_nominal():
    assert abs(DEFAULT_CONSTANTS.gamma_e / 1.76e11 - 1) < 5e-3


def test_constants_are_read_only():
    with pytest.raises(dataclasses.FrozenInstanceError):
        DEFAULT_CONSTANTS.gamma_e = 1.0


def test_constants_reject_wrong_gamma_e():
    with pytest.raises(ValueError):
        PhysicalConstants(gamma_e=2.68e8)


def test_magic_angle_value():
    assert math.degrees(MAGIC_ANGLE) == pytest.approx(54.7356, abs=1e-4)
    assert math.tan(MAGIC_ANGLE) ** 2 == pytest.approx(2.0, rel=1e-15)


@pytest.mark.parametrize("depth", [0.0, -1e-9, math.inf, math.nan])
def test_nv_rejects_bad_depth(depth):
    with pytest.raises(ValueError):
        NvCenter(depth)


@pytest.mark.parametrize("alpha", [-0.1, math.pi / 2 + 1e-9])
def test_nv_rejects_bad_alpha(alpha):
    with pytest.raises(ValueError):
        NvCenter(1e-8, alpha)


def test_nv_frame_is_orthonormal_with_axis_as_z():
    nv = NvCenter.from_nm(7.0, alpha_deg=33.0)
    f = nv.frame()
    np.testing.assert_allclose(f @ f.T, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(f[2], nv.axis(), atol=1e-15)
    assert nv.depth_nm == pytest.approx(7.0, rel=1e-15)


def test_slab_validation():
    Slab(0.0, 1e-9)
    Slab(0.0, math.inf)
    for z1, z2 in [(1e-9, 1e-9), (2e-9, 1e-9), (-1e-9, 1e-9), (0.0, math.nan)]:
        with pytest.raises(ValueError):
            Slab(z1, z2)


def test_sample_invariants():
    s = NuclearSample()
    assert s.infinite_t2n and isinstance(s.geometry, SemiInfinite)
    assert NuclearSample(rho=0.0).rho == 0.0
    with pytest.raises(ValueError):
        NuclearSample(rho=-1.0)
    with pytest.raises(ValueError):
        NuclearSample(spin_I=1.0)
    with pytest.raises(ValueError):
        NuclearSample(t2n_star=0.0)
    assert NuclearSample.immersion_oil().rho == pytest.approx(68e27)


def test_static_field():
    with pytest.raises(ValueError):
        StaticField(0.0)
    assert StaticField.from_gauss(197).b0 == pytest.approx(0.0197)
    assert StaticField(0.0197).gauss == pytest.approx(197)


def test_pulse_sequence_validation():
    seq = PulseSequence("XY8", 64, [1e-7, 2e-7, 3e-7])
    assert not seq.tau_grid.flags.writeable
    np.testing.assert_allclose(seq.duration, 64 * seq.tau_grid)
    with pytest.raises(ValueError):
        PulseSequence("XY8", 12, [1e-7])
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        PulseSequence("XY8", 12, [1e-7], strict=False)
    assert any("multiple of 8" in str(x.message) for x in w)
    PulseSequence("CPMG", 12, [1e-7])
    for bad in ([2e-7, 1e-7], [0.0, 1e-7], [1e-7, 1e-7], []):
        with pytest.raises(ValueError):
            PulseSequence("CPMG", 8, bad)
    with pytest.raises(ValueError):
        PulseSequence("CPMG", 0, [1e-7])


def test_larmor_zero_field():
    assert larmor_frequency(NuclearSample(), 0.0) == 0.0


def test_larmor_examples():
    s = NuclearSample(gamma_n=2.68e8)
    assert larmor_frequency(s, StaticField.from_gauss(197)) == pytest.approx(5.2796e6, rel=1e-12)
    assert larmor_frequency(s, StaticField(0.1609)) == pytest.approx(4.31212e7, rel=1e-12)
    assert math.pi / larmor_frequency(s, 0.0197) == pytest.approx(595e-9, rel=2e-3)
    with pytest.raises(ValueError):
        larmor_frequency(s, -1.0)


def test_default_gamma_n_is_proton_value():
    assert NuclearSample().gamma_n == PROTON_GAMMA == 2.68e8


@given(st.floats(min_value=1e-3, max_value=1e6, allow_nan=False))
def test_nm_round_trip_within_one_ulp(x):
    assert abs(m_to_nm(nm_to_m(x)) - x) <= np.spacing(x)


@given(st.floats(min_value=1e-3, max_value=1e5, allow_nan=False))
def test_gauss_round_trip_within_one_ulp(x):
    assert abs(tesla_to_gauss(gauss_to_tesla(x)) - x) <= np.spacing(x)


@given(st.floats(min_value=0.0, max_value=20.0, allow_nan=False))
def test_larmor_linear_in_field(b0):
    s = NuclearSample()
    assert larmor_frequency(s, 2.0 * b0) == 2.0 * larmor_frequency(s, b0)
