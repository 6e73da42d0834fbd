import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from risloc.array import UpaConfig, steering
from risloc.channel import ArraySet, build_channels, link_angles
from risloc.errors import ConfigError, DegenerateInputError, GeometryError
from risloc.estimator import (
    CgdConfig, SearchGrid, angle_search_2d, cgd_estimate, cgd_estimate_batch, gradients,
    gradients_kron, localize, localize_batch, objective, triangulate_ls, truth_channels,
)
from risloc.geometry import DirectionAngles, Scenario, direction_angles
from risloc.rxsignal import snr_to_power, synthesize
from risloc.sounding import design_frames

from conftest import P_BS, P_DRONE, P_RIS, P_UE, reference_scenario

LAM = 0.01
SMALL = ArraySet(UpaConfig.half_wavelength(2, 2, LAM, "yz"), UpaConfig.half_wavelength(2, 2, LAM),
                 UpaConfig.half_wavelength(2, 2, LAM))


def _cplx(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def _small_instance(seed):
    # 2x2 arrays leave no room for three orthogonal BS beams, so build frames by hand
    rng = np.random.default_rng(seed)
    s = reference_scenario()
    fr = design_frames(s, ArraySet(UpaConfig.half_wavelength(3, 3, LAM, "yz"), SMALL.ris, SMALL.ue), 6)
    from dataclasses import replace

    fr = replace(fr, F_bar=_cplx(rng, (4, 6)), Omega_bar=_cplx(rng, (4, 6)), power_w=1.7)
    Y = _cplx(rng, (4, 6))
    return Y, fr, _cplx(rng, 4), _cplx(rng, 4), _cplx(rng, 4)


def _fd_wirtinger(fun, x, h=1e-6):
    """2 df/dx* from central differences over the real and imaginary parts."""
    out = np.zeros(x.size, complex)
    for i in range(x.size):
        e = np.zeros(x.size, complex)
        e[i] = h
        dr = (fun(x + e) - fun(x - e)) / (2 * h)
        di = (fun(x + 1j * e) - fun(x - 1j * e)) / (2 * h)
        out[i] = dr + 1j * di
    return out


@pytest.mark.parametrize("seed", range(3))
def test_gradients_match_fd(seed):
    Y, fr, h2, h3, h4 = _small_instance(seed)
    g4, g2, g3 = gradients(Y, fr, h2, h3, h4)
    num = (
        _fd_wirtinger(lambda v: objective(Y, fr, h2, h3, v), h4),
        _fd_wirtinger(lambda v: objective(Y, fr, v, h3, h4), h2),
        _fd_wirtinger(lambda v: objective(Y, fr, h2, v, h4), h3),
    )
    for g, n in zip((g4, g2, g3), num):
        assert np.linalg.norm(2 * g - n) / np.linalg.norm(n) < 1e-6


def test_kron_gradients_equal_fast(seed=4):
    Y, fr, h2, h3, h4 = _small_instance(seed)
    for a, b in zip(gradients(Y, fr, h2, h3, h4), gradients_kron(Y, fr, h2, h3, h4)):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_scale_ambiguity():
    Y, fr, h2, h3, h4 = _small_instance(5)
    c = 0.3 - 1.7j
    assert objective(Y, fr, c * h2, c * h3, h4 / c) == pytest.approx(objective(Y, fr, h2, h3, h4), rel=1e-12)


def test_truth_is_stationary(scenario, arrays, channels):
    fr = design_frames(scenario, arrays, 60).with_power(1e-10)
    Y = synthesize(scenario, channels, fr, noise=False).cleaned()
    t = truth_channels(scenario, arrays)
    yn = np.linalg.norm(Y)
    assert objective(Y, fr, t["h2"], t["h3"], t["h4"]) < 1e-16 * yn ** 2
    for g in gradients(Y, fr, t["h2"], t["h3"], t["h4"]):
        assert np.linalg.norm(g) < 1e-8 * yn


def _block(scenario, arrays, snr_db, K=60, seed=0, noise=True):
    fr = design_frames(scenario, arrays, K)
    fr = fr.with_power(snr_to_power(snr_db, scenario.noise_power_w))
    ch = build_channels(scenario, arrays)
    return synthesize(scenario, ch, fr, seed=seed, noise=noise), fr


def test_objective_monotone(scenario, arrays):
    blk, fr = _block(scenario, arrays, 0.0, seed=3)
    est = cgd_estimate(blk.cleaned(), fr, CgdConfig(restarts=2, max_iters=200), seed=3)
    tr = np.asarray(est.objective_trace)
    assert np.all(np.diff(tr) <= 1e-12 * tr[0])
    assert est.objective == pytest.approx(objective(blk.cleaned(), fr, est.h2_hat, est.h3_hat, est.h4_hat), rel=1e-9)


def test_fixed_step_policy_runs(scenario, arrays):
    blk, fr = _block(scenario, arrays, 10.0)
    est = cgd_estimate(blk.cleaned(), fr, CgdConfig(step_policy="fixed", restarts=1, max_iters=20))
    assert np.isfinite(est.objective)


def test_batch_matches_single(scenario, arrays):
    cfg = CgdConfig(restarts=3, max_iters=100)
    blocks = [_block(scenario, arrays, 5.0, seed=k)[0] for k in range(3)]
    _, fr = _block(scenario, arrays, 5.0)
    many = cgd_estimate_batch(np.stack([b.cleaned() for b in blocks]), fr, cfg, seeds=[10, 11, 12])
    one = cgd_estimate(blocks[1].cleaned(), fr, cfg, seed=11)
    assert np.allclose(many[1].h4_hat, one.h4_hat, rtol=1e-10, atol=1e-20)
    assert many[1].iterations == one.iterations


def test_localize_noise_free(scenario, arrays):
    blk, fr = _block(scenario, arrays, 10.0, noise=False)
    res = localize(blk, fr, scenario, arrays, CgdConfig(init_policy="truth-perturbed"))
    assert res.error_m < 0.1
    assert set(res.angles) == {"bs-drone", "ris-drone", "ue-drone"}
    ang = link_angles(scenario)
    for link, key in (("bs-drone", "t2"), ("ris-drone", "t3"), ("ue-drone", "r4")):
        assert np.degrees(np.abs(np.subtract(res.angles[link], ang[key]))).max() < 0.05


def test_localize_deterministic(scenario, arrays):
    blk, fr = _block(scenario, arrays, 5.0, seed=8)
    cfg = CgdConfig(restarts=2, max_iters=100)
    a = localize(blk, fr, scenario, arrays, cfg, seed=8)
    b = localize(blk, fr, scenario, arrays, cfg, seed=8)
    assert np.array_equal(a.p_hat, b.p_hat)
    c = localize_batch([blk], fr, scenario, arrays, cfg, seeds=[8])[0]
    assert np.allclose(a.p_hat, c.p_hat, rtol=0, atol=1e-9)


def test_no_target_is_degenerate(arrays):
    s = reference_scenario(zeta=0.0)
    blk, fr = _block(s, arrays, 10.0, noise=False)
    with pytest.raises(DegenerateInputError):
        localize(blk, fr, s, arrays)


def test_config_validation():
    for kw in (dict(max_iters=0), dict(initial_step=0), dict(tol=0), dict(restarts=0),
               dict(step_policy="x"), dict(init_policy="x")):
        with pytest.raises(ConfigError):
            CgdConfig(**kw)


# -- angle search ---------------------------------------------------------------

UE = UpaConfig.half_wavelength(4, 4, LAM)
BS = UpaConfig.half_wavelength(8, 8, LAM, "yz")


def _ue_channel(az, el, c=1.0):
    # column channel: the response itself (estimator matches h^H a)
    return c * steering(UE, LAM, math.radians(az), math.radians(el))


def test_grid_point_exact():
    got = angle_search_2d(_ue_channel(37.0, 52.0), "ue-drone", UE, LAM)
    assert np.degrees(got) == pytest.approx((37.0, 52.0), abs=1e-9)
    h2 = steering(BS, LAM, math.radians(-20.0), math.radians(40.0)).conj()
    got = angle_search_2d(h2, "bs-drone", BS, LAM)
    assert np.degrees(got) == pytest.approx((-20.0, 40.0), abs=1e-9)


@settings(deadline=None, max_examples=30)
@given(st.floats(-179, 179), st.floats(5, 85), st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3))
def test_scale_invariance(az, el, c):
    h = _ue_channel(az, el)
    a = angle_search_2d(h, "ue-drone", UE, LAM)
    b = angle_search_2d(c * h, "ue-drone", UE, LAM)
    assert a == b


def _exhaustive(h, lo_az, lo_el, n, step):
    az = lo_az + step * np.arange(n)
    el = lo_el + step * np.arange(n)
    A, E = np.meshgrid(az, el, indexing="ij")
    S = steering(UE, LAM, np.radians(A.ravel()), np.radians(E.ravel()))
    j = int(np.argmax(np.abs(S @ h.conj())))
    return A.ravel()[j], E.ravel()[j]


@settings(deadline=None, max_examples=10)
@given(st.floats(-170, 170), st.floats(10, 80))
def test_off_grid_matches_exhaustive(az, el):
    h = _ue_channel(az, el)
    got = np.degrees(angle_search_2d(h, "ue-drone", UE, LAM))
    # fine lattice over +-1.5 deg around the truth at the same 0.01 deg pitch
    ref = _exhaustive(h, round(az) - 1.5, round(el) - 1.5, 301, 0.01)
    assert abs(got[0] - az) <= 0.01 + 1e-9 and abs(got[1] - el) <= 0.01 + 1e-9
    assert abs(got[0] - ref[0]) <= 0.01 + 1e-9 and abs(got[1] - ref[1]) <= 0.01 + 1e-9


def test_angle_search_errors():
    with pytest.raises(DegenerateInputError):
        angle_search_2d(np.zeros(16), "ue-drone", UE, LAM)
    with pytest.raises(ConfigError):
        angle_search_2d(np.ones(16), "sat-drone", UE, LAM)
    with pytest.raises(ConfigError):
        angle_search_2d(np.ones(9), "ue-drone", UE, LAM)


def test_custom_sector():
    grid = SearchGrid(azimuth=(0.0, 90.0), elevation=(30.0, 60.0))
    got = angle_search_2d(_ue_channel(45.0, 45.0), "ue-drone", UE, LAM, grid)
    assert np.degrees(got) == pytest.approx((45.0, 45.0), abs=1e-9)


# -- triangulation ----------------------------------------------------------------

ANCHORS = [np.array(P_BS), np.array(P_RIS), np.array(P_UE)]


def _normal_equations(angles, anchors, weights):
    # generic weighted LS: stack sqrt(w) (I - xi xi^T) rows and solve with lstsq
    rows, rhs = [], []
    for (az, el), p, w in zip(angles, anchors, weights):
        xi = np.array([math.cos(az) * math.cos(el), math.sin(az) * math.cos(el), math.sin(el)])
        P = np.eye(3) - np.outer(xi, xi)
        rows.append(math.sqrt(w) * P)
        rhs.append(math.sqrt(w) * P @ p)
    return np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)[0]


def test_exact_angles_reproduce_drone():
    ang = [direction_angles(a, P_DRONE) for a in ANCHORS]
    assert np.allclose(triangulate_ls(ang, ANCHORS), P_DRONE, rtol=0, atol=1e-9)


def test_duplicate_anchor_equals_weighting():
    ang = [direction_angles(a, P_DRONE) for a in ANCHORS]
    ang[0] = DirectionAngles(ang[0][0] + 0.01, ang[0][1])
    dup = triangulate_ls([ang[0]] + ang, [ANCHORS[0]] + ANCHORS)
    weighted = triangulate_ls(ang, ANCHORS, weights=[2, 1, 1])
    assert np.allclose(dup, weighted, rtol=0, atol=1e-9)
    assert np.allclose(weighted, _normal_equations(ang, ANCHORS, [2, 1, 1]), rtol=0, atol=1e-9)


def test_perturbed_angle_matches_lstsq():
    ang = [direction_angles(a, P_DRONE) for a in ANCHORS]
    ang[1] = DirectionAngles(ang[1][0] + math.radians(0.5), ang[1][1])
    got = triangulate_ls(ang, ANCHORS)
    assert np.allclose(got, _normal_equations(ang, ANCHORS, [1, 1, 1]), rtol=0, atol=1e-9)
    assert 0 < np.linalg.norm(got - P_DRONE) < 1.0


def test_parallel_rays_rejected():
    ang = [DirectionAngles(0.3, 0.4)] * 3
    with pytest.raises(GeometryError):
        triangulate_ls(ang, [np.zeros(3), np.array([1.0, 0, 0]), np.array([0, 1.0, 0])])
    with pytest.raises(GeometryError):
        triangulate_ls(ang[:1], ANCHORS[:1])


def test_triangulation_fixed_point_1000():
    rng = np.random.default_rng(2024)
    worst = 0.0
    n = 0
    while n < 1000:
        anchors = list(rng.uniform(-20, 20, (3, 3)))
        p = rng.uniform(-20, 20, 3)
        d = [p - a for a in anchors]
        # skip near-collinear geometries
        u = [v / np.linalg.norm(v) for v in d]
        if min(np.linalg.norm(d, axis=1)) < 1.0 or abs(np.linalg.det(np.stack(u))) < 0.05:
            continue
        ang = [direction_angles(a, p) for a in anchors]
        worst = max(worst, np.linalg.norm(triangulate_ls(ang, anchors) - p))
        n += 1
    assert worst < 1e-8
