import math

import numpy as np
import pytest

from risloc.channel import build_channels, cascade
from risloc.errors import ConfigError, UnidentifiableGeometryError
from risloc.fisher import (
    NO_RIS_INDEX, ParamVector, fim, fisher_information, mean_derivatives, mean_signal, peb,
    phi_matrices, position_bound, true_params,
)
from risloc.geometry import jacobian_T
from risloc.sounding import design_frames

from conftest import fd_columns, random_scenario, reference_scenario

LAM = 0.01


@pytest.fixture
def frames(scenario, arrays):
    return design_frames(scenario, arrays, 60).with_power(1e-12)


def test_param_vector_round_trip():
    eta = ParamVector(1 + 2j, -3 + 0.5j, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
    assert ParamVector.from_array(eta.as_array()) == eta
    with pytest.raises(ConfigError):
        ParamVector.from_array(np.zeros(9))


def test_zero_gains_zero_mean(scenario, arrays, frames):
    eta = true_params(scenario, arrays, frames)
    z = ParamVector(0j, 0j, *eta.as_array()[4:])
    assert not np.any(mean_signal(z, frames, arrays, LAM))


def test_vec_identity(scenario, arrays, frames):
    eta = true_params(scenario, arrays, frames)
    mu = mean_signal(eta, frames, arrays, LAM)
    ch = build_channels(scenario, arrays)
    pair = cascade(scenario, ch)
    Y = frames.s0 * (pair.H_tilde @ frames.Omega_plain + pair.H_hat @ frames.F_bar)
    assert np.allclose(mu, Y.ravel(order="F"), rtol=0, atol=1e-10 * np.abs(Y).max())


def test_linearity_in_eps_tilde(scenario, arrays, frames):
    eta = true_params(scenario, arrays, frames)
    a = ParamVector(eta.eps_tilde, 0j, *eta.as_array()[4:])
    b = ParamVector(2 * eta.eps_tilde, 0j, *eta.as_array()[4:])
    assert np.allclose(mean_signal(b, frames, arrays, LAM), 2 * mean_signal(a, frames, arrays, LAM))


def test_gain_columns(scenario, arrays, frames):
    d = mean_derivatives(true_params(scenario, arrays, frames), frames, arrays, LAM)
    assert np.array_equal(d[:, 1], 1j * d[:, 0])
    assert np.array_equal(d[:, 3], 1j * d[:, 2])


def test_phi_structure(scenario, arrays, frames):
    eta = true_params(scenario, arrays, frames)
    phi = phi_matrices(eta, arrays, LAM)
    sizes = {1: 8, 2: 8, 3: 8, 4: 6, 5: 6, 6: 6, 7: 6, 8: 4, 9: 4, 10: 4, 11: 4}
    for n, diag in phi.items():
        assert diag.shape == (sizes[n],)
        assert not np.any(diag.real)
    flat = ParamVector(eta.eps_tilde, eta.eps_hat, eta.az_bd, 0.0, *eta.as_array()[6:])
    assert not np.any(phi_matrices(flat, arrays, LAM)[1])


@pytest.mark.parametrize("seed", range(5))
def test_derivatives_match_fd(seed, arrays):
    rng = np.random.default_rng(seed)
    s = random_scenario(rng)
    fr = design_frames(s, arrays, 12, seed=seed)
    eta = true_params(s, arrays, fr)
    d = mean_derivatives(eta, fr, arrays, LAM)
    num = fd_columns(lambda x: mean_signal(ParamVector.from_array(x), fr, arrays, LAM), eta.as_array())
    err = np.linalg.norm(d - num, axis=0) / np.linalg.norm(num, axis=0)
    assert err.max() < 1e-6


def test_fim_properties(scenario, arrays, frames):
    res = fisher_information(scenario, arrays, frames, 1.0)
    J = res.J
    assert np.array_equal(J, J.T)
    w = np.linalg.eigvalsh(J)
    assert w.min() >= -1e-8 * np.trace(J)
    assert J[0, 0] == pytest.approx(J[1, 1], rel=1e-12)
    assert J[2, 2] == pytest.approx(J[3, 3], rel=1e-12)
    assert np.allclose(fim(res.dmu, 100.0), J / 100.0, rtol=1e-14)


def test_peb_power_scaling(scenario, arrays, frames):
    base = position_bound(scenario, arrays, frames)
    assert position_bound(scenario, arrays, frames.with_power(2e-12)) == pytest.approx(base / math.sqrt(2), rel=1e-9)
    assert position_bound(scenario, arrays, frames.with_power(1e-10)) == pytest.approx(base / 10, rel=1e-9)


def test_ris_helps(scenario, arrays, frames):
    with_ris = position_bound(scenario, arrays, frames)
    without = position_bound(scenario, arrays, frames.without_ris())
    assert with_ris < without


def test_no_ris_model_is_reduced(scenario, arrays, frames):
    res = fisher_information(scenario, arrays, frames.without_ris(), 1.0)
    keep = np.zeros(10, bool)
    keep[NO_RIS_INDEX] = True
    # RIS columns carry no information once the RIS is removed
    assert not np.any(res.dmu[:, ~keep])


def test_peb_monotone_in_K(scenario, arrays):
    long = design_frames(scenario, arrays, 60).with_power(1e-12)
    vals = [position_bound(scenario, arrays, long.prefix(K)) for K in (12, 20, 40, 60)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_peb_invariant_to_rcs_phase(arrays):
    vals = []
    for ph in (0.0, 1.0, -2.5):
        s = reference_scenario(zeta=np.exp(1j * ph))
        vals.append(position_bound(s, arrays, design_frames(s, arrays, 60).with_power(1e-12)))
    assert np.allclose(vals, vals[0], rtol=1e-9)


def test_efim_is_not_smaller(scenario, arrays, frames):
    J = fisher_information(scenario, arrays, frames).J
    T = jacobian_T(scenario)
    assert peb(J, T, "efim") >= peb(J, T) * (1 - 1e-12)
    with pytest.raises(ConfigError):
        peb(J, T, "other")


def test_singular_geometry():
    T = np.zeros((3, 10))
    T[0, 4] = 1.0
    with pytest.raises(UnidentifiableGeometryError) as info:
        peb(np.eye(10), T)
    assert info.value.condition_number > 1e15
    with pytest.raises(UnidentifiableGeometryError):
        peb(np.zeros((10, 10)), np.ones((3, 10)))


def test_dimension_mismatch(scenario, arrays, frames):
    from risloc.channel import default_arrays
    from risloc.array import UpaConfig

    other = default_arrays(LAM)._replace(ris=UpaConfig.half_wavelength(5, 5, LAM))
    with pytest.raises(ConfigError):
        mean_signal(true_params(scenario, arrays, frames), frames, other, LAM)
