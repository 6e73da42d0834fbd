import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from risloc.array import UpaConfig
from risloc.channel import ArraySet, build_channels, cascade, complex_gain, default_arrays

from conftest import reference_scenario

LAM = 0.01


def _second_ratio(M):
    sv = np.linalg.svd(np.atleast_2d(M), compute_uv=False)
    return sv[1] / sv[0] if sv.size > 1 else 0.0


def test_scalar_arrays(scenario):
    one = UpaConfig.half_wavelength(1, 1, LAM)
    ch = build_channels(scenario, ArraySet(UpaConfig.half_wavelength(1, 1, LAM, "yz"), one, one))
    d2 = math.sqrt(34)
    assert ch.h2.shape == (1,)
    assert ch.h2[0] == pytest.approx(np.exp(-2j * math.pi * d2 / LAM) / d2, rel=1e-12)
    assert abs(ch.h2[0]) == pytest.approx(1 / d2, rel=1e-14)


def test_reference_magnitudes(channels):
    assert np.allclose(np.abs(channels.h4), 1 / math.sqrt(38), rtol=1e-13)
    assert 1 / math.sqrt(38) == pytest.approx(0.16222, abs=1e-5)
    assert np.linalg.norm(channels.H1) == pytest.approx(math.sqrt(36 * 64 / 0.5), rel=1e-12)
    assert np.linalg.norm(channels.H1) == pytest.approx(67.8823, abs=1e-4)


def test_vector_channel_norms(channels, arrays):
    d = channels.distances
    assert np.linalg.norm(channels.h2) == pytest.approx(math.sqrt(arrays.bs.size) / d[2], rel=1e-12)
    assert np.linalg.norm(channels.h3) == pytest.approx(math.sqrt(arrays.ris.size) / d[3], rel=1e-12)
    assert np.linalg.norm(channels.h4) == pytest.approx(math.sqrt(arrays.ue.size) / d[4], rel=1e-12)


def test_rank_one(channels, scenario):
    pair = cascade(scenario, channels)
    for M in (channels.H1, channels.H5, pair.H_tilde, pair.H_hat):
        assert _second_ratio(M) < 1e-10


def test_cascade_gains(scenario, channels, arrays):
    pair = cascade(scenario, channels)
    assert abs(pair.eps_hat) == pytest.approx(1 / (math.sqrt(38) * math.sqrt(34)), rel=1e-12)
    assert abs(pair.eps_hat) == pytest.approx(0.0278207, abs=1e-7)
    expected = 64 / (math.sqrt(0.5) * math.sqrt(38) * math.sqrt(35.5))
    assert abs(pair.eps_tilde) == pytest.approx(expected, rel=1e-12)
    assert abs(pair.eps_tilde) == pytest.approx(2.464274, abs=1e-6)
    assert np.linalg.norm(pair.H_tilde) == pytest.approx(abs(pair.eps_tilde) * math.sqrt(16 * 36), rel=1e-12)
    assert np.linalg.norm(pair.H_hat) == pytest.approx(abs(pair.eps_hat) * math.sqrt(16 * 64), rel=1e-12)


def test_gains_recoverable_from_cascades(scenario, channels, arrays):
    # strip the steering structure off H_hat and H_tilde to recover the gains
    from risloc.array import steering

    pair = cascade(scenario, channels)
    ang = channels.angles
    aU = steering(arrays.ue, LAM, *ang["r4"])
    aB = steering(arrays.bs, LAM, *ang["t2"])
    aR = steering(arrays.ris, LAM, *ang["t3"])
    eh = aU.conj() @ pair.H_hat @ aB / (arrays.ue.size * arrays.bs.size)
    et = aU.conj() @ pair.H_tilde @ aR / (arrays.ue.size * arrays.ris.size)
    assert eh == pytest.approx(pair.eps_hat, rel=1e-12)
    assert et == pytest.approx(pair.eps_tilde, rel=1e-12)


def test_zero_rcs(arrays):
    s = reference_scenario(zeta=0.0)
    pair = cascade(s, build_channels(s, arrays))
    assert pair.eps_hat == 0 and pair.eps_tilde == 0
    assert not np.any(pair.H_hat) and not np.any(pair.H_tilde)


@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3))
def test_rcs_scaling(c):
    arrays = default_arrays(LAM)
    base = reference_scenario(zeta=1 + 0.5j)
    scaled = reference_scenario(zeta=c * (1 + 0.5j))
    p0 = cascade(base, build_channels(base, arrays))
    p1 = cascade(scaled, build_channels(scaled, arrays))
    assert p1.eps_hat == pytest.approx(c * p0.eps_hat, rel=1e-12)
    assert p1.eps_tilde == pytest.approx(c * p0.eps_tilde, rel=1e-12)
    assert np.allclose(p1.H_hat, c * p0.H_hat, rtol=1e-12, atol=0)
    assert np.allclose(p1.H_tilde, c * p0.H_tilde, rtol=1e-12, atol=0)


@settings(deadline=None)
@given(st.floats(-math.pi, math.pi))
def test_eps_hat_phase(phase):
    s = reference_scenario(zeta=np.exp(1j * phase))
    ch = build_channels(s, default_arrays(LAM))
    pair = cascade(s, ch)
    want = -2 * math.pi * (ch.distances[2] + ch.distances[4]) / LAM + phase
    assert abs(np.angle(pair.eps_hat * np.exp(-1j * want))) < 1e-10


def test_complex_gain(scenario):
    g = complex_gain(2.0, scenario)
    assert abs(g) == pytest.approx(0.5)
    assert np.angle(g) == pytest.approx(np.angle(np.exp(-2j * math.pi * 2.0 / LAM)), abs=1e-9)
