import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rotirs.channel import (ChannelSet, ChannelSynthesizer, LosSignature, RicianParams,
                            complex_gaussian, far_field_distances, los_matrix,
                            los_signature_decomposition, mix_rician, planar_user_channel,
                            rician_channel, single_los_signature, spawn_rng, synthesize_channels)
from rotirs.experiment import default_geometry
from rotirs.geometry import (Orientation, bs_antenna_positions, irs_element_positions,
                             single_irs_geometry)

O1 = Orientation(-1.5, -0.05)
O2 = Orientation(-1.45, -0.15)


def _positions(g, o1=O1, o2=O2):
    return (bs_antenna_positions(g),
            irs_element_positions(g.irs1_origin, g.irs1_layout, o1, "irs1"),
            irs_element_positions(g.irs2_origin, g.irs2_layout, o2, "irs2"))


def test_far_field_distances_reference_anchors():
    t11, d11, r1 = far_field_distances(default_geometry())
    assert_allclose(t11, math.sqrt(1674), rtol=1e-15)
    assert_allclose(d11, math.sqrt(25 + 45 ** 2 + 25), rtol=1e-15)
    assert_allclose(r1, math.sqrt(100 + 1600 + 100), rtol=1e-15)


def test_los_matrix_entries_against_loops():
    g = default_geometry(2, 4, 4)
    bs, p1, _ = _positions(g)
    t11 = far_field_distances(g)[0]
    G = los_matrix(bs, p1, 1e-4, g.wavelength, t11)
    assert G.shape == (4, 2)
    for n in range(4):
        for m in range(2):
            d = math.dist(p1[n], bs[m])
            want = 0.01 / t11 * complex(math.cos(-2 * math.pi * d / g.wavelength),
                                        math.sin(-2 * math.pi * d / g.wavelength))
            assert abs(G[n, m] - want) < 1e-12 * abs(want)
    assert_allclose(np.abs(G), 0.01 / t11)


def test_los_matrix_rejects_bad_amplitude():
    with pytest.raises(ValueError):
        los_matrix(np.zeros((1, 3)), np.ones((1, 3)), 1.0, 0.1, 0.0)


def test_spherical_matrix_nearly_rank_one():
    g = default_geometry()
    _, p1, p2 = _positions(g)
    S = los_matrix(p1, p2, 1.0, g.wavelength, far_field_distances(g)[1])
    s = np.linalg.svd(S, compute_uv=False)
    assert s[0] ** 2 / np.sum(s ** 2) >= 0.99


def test_signature_reconstructs_planar_matrices_exactly():
    g = default_geometry()
    sig = los_signature_decomposition(g, O1, O2, beta=1e-4)
    synth = ChannelSynthesizer(g, RicianParams(beta=1e-4), los_model="planar")
    ch = synth(O1, O2)
    assert np.linalg.norm(sig.G() - ch.G) <= 1e-10 * np.linalg.norm(ch.G)
    assert np.linalg.norm(sig.S() - ch.S) <= 1e-10 * np.linalg.norm(ch.S)
    assert_allclose(planar_user_channel(g, O2, 1e-4), ch.f, rtol=1e-10)
    assert_allclose(np.abs(sig.g1), 1.0)
    assert_allclose(np.abs(sig.s1), 1.0)


def test_signature_close_to_best_rank_one_for_small_arrays():
    g = default_geometry(4, 9, 9)
    _, p1, p2 = _positions(g)
    d11 = far_field_distances(g)[1]
    S = los_matrix(p1, p2, 1.0, g.wavelength, d11)
    u, s, vh = np.linalg.svd(S)
    best = s[0] * np.outer(u[:, 0], vh[0])
    sig = los_signature_decomposition(g, O1, O2)
    assert np.linalg.norm(sig.S() - best) <= 0.01 * np.linalg.norm(best)


def test_signature_discrepancy_grows_with_aperture():
    errs = []
    for n in (4, 16, 64):
        g = default_geometry(4, n, n)
        _, p1, p2 = _positions(g)
        S = los_matrix(p1, p2, 1.0, g.wavelength, far_field_distances(g)[1])
        sig = los_signature_decomposition(g, O1, O2)
        errs.append(np.linalg.norm(sig.S() - S) / np.linalg.norm(S))
    assert errs[0] < errs[1] < errs[2] < 0.1


def test_signature_warns_in_near_field():
    g = default_geometry(4, 16, 16).with_sizes(n1=4096)
    with pytest.warns(RuntimeWarning, match="planar approximation"):
        los_signature_decomposition(g, O1, O2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        los_signature_decomposition(default_geometry(), O1, O2)


def test_single_signature_matches_planar_synthesis():
    single = single_irs_geometry(default_geometry())
    o = Orientation(-1.0, -0.3)
    sig = single_los_signature(single, o, beta=1e-4)
    assert sig.s1 is None and sig.S() is None
    ch = ChannelSynthesizer(single, RicianParams(beta=1e-4), los_model="planar")(o)
    assert ch.single
    assert_allclose(sig.G(), ch.G, rtol=1e-10, atol=0)
    assert_allclose(planar_user_channel(single, o, 1e-4), ch.f, rtol=1e-10)


def test_spawn_rng_streams():
    a = spawn_rng(5, "nlos", 2).standard_normal(4)
    b = spawn_rng(5, "nlos", 2).standard_normal(4)
    c = spawn_rng(5, "nlos", 3).standard_normal(4)
    d = spawn_rng(6, "nlos", 2).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_complex_gaussian_moments():
    z = complex_gaussian(spawn_rng(0), 200_000)
    assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.01
    assert abs(np.var(z.real) - 0.5) < 0.01
    assert abs(np.mean(z)) < 0.01


def test_rician_entry_power():
    los = np.full(100_000, 0.01 / 40 * np.exp(0.7j))
    h = rician_channel(los, 1.0, 1e-4, 40.0, 3)
    assert abs(np.mean(np.abs(h) ** 2) / (1e-4 / 40 ** 2) - 1.0) < 0.02
    assert rician_channel(los, math.inf, 1e-4, 40.0, 3) is los


def test_mix_rician_limits():
    los = np.array([1 + 1j, 2.0])
    nlos = np.array([5.0, -3j])
    assert_allclose(mix_rician(los, nlos, 0.0), nlos)
    assert mix_rician(los, nlos, math.inf) is los
    assert_allclose(mix_rician(los, nlos, 1.0), (los + nlos) / math.sqrt(2))


def test_synthesis_deterministic():
    g = default_geometry(4, 16, 16)
    p = RicianParams.uniform(1.0, 1e-4)
    a = synthesize_channels(g, O1, O2, p, seed=11)
    b = synthesize_channels(g, O1, O2, p, seed=11)
    c = synthesize_channels(g, O1, O2, p, seed=12)
    for x, y in ((a.G, b.G), (a.S, b.S), (a.f, b.f)):
        assert x.tobytes() == y.tobytes()
    assert not np.array_equal(a.G, c.G)


def test_synthesis_shapes_and_los_limit():
    g = default_geometry(4, 8, 16)
    ch = synthesize_channels(g, O1, O2, RicianParams(beta=1e-4))
    assert ch.G.shape == (8, 4) and ch.S.shape == (16, 8) and ch.f.shape == (16,)
    bs, p1, p2 = _positions(g)
    t11, d11, r1 = far_field_distances(g)
    assert_allclose(ch.G, los_matrix(bs, p1, 1e-4, g.wavelength, t11), rtol=1e-12)
    assert_allclose(ch.S, los_matrix(p1, p2, 1e-4, g.wavelength, d11), rtol=1e-12)
    f = los_matrix(p2, g.user_pos[None], 1e-4, g.wavelength, r1)[0]
    assert_allclose(ch.f, f, rtol=1e-12)


def test_synthesis_matches_manual_rician_mix():
    g = default_geometry(4, 8, 8)
    p = RicianParams(2.0, 3.0, 4.0, 1e-4)
    synth = ChannelSynthesizer(g, p, seed=9)
    ch = synth(O1, O2)
    bs, p1, p2 = _positions(g)
    t11, d11, r1 = far_field_distances(g)
    nlos = synth._nlos
    G = mix_rician(los_matrix(bs, p1, 1e-4, g.wavelength, t11), 0.01 / t11 * nlos[0], 2.0)
    assert_allclose(ch.G, G, rtol=1e-9, atol=1e-18)
    S = mix_rician(los_matrix(p1, p2, 1e-4, g.wavelength, d11), 0.01 / d11 * nlos[1], 3.0)
    assert_allclose(ch.S, S, rtol=1e-9, atol=1e-18)


def test_orient1_changes_only_g_and_s():
    g = default_geometry(4, 8, 8)
    synth = ChannelSynthesizer(g, RicianParams.uniform(1.0, 1e-4), seed=1)
    a = synth(O1, O2)
    b = synth(Orientation(-1.2, 0.1), O2)
    assert np.array_equal(a.f, b.f)
    assert not np.allclose(a.G, b.G)
    assert not np.allclose(a.S, b.S)
    # the change matches the LoS recomputed at the new element positions
    bs, p1, _ = _positions(g, Orientation(-1.2, 0.1))
    t11 = far_field_distances(g)[0]
    los_shift = (b.G - a.G) / math.sqrt(0.5)
    bs, p1_old, _ = _positions(g)
    want = los_matrix(bs, p1, 1e-4, g.wavelength, t11) - los_matrix(bs, p1_old, 1e-4,
                                                                      g.wavelength, t11)
    assert_allclose(los_shift, want, atol=1e-14)


def test_batched_synthesis_matches_loop():
    g = default_geometry(4, 8, 8)
    synth = ChannelSynthesizer(g, RicianParams.uniform(3.0, 1e-4), seed=2)
    th = np.array([-1.5, -1.0, 0.3])
    o1 = Orientation(th, np.array([0.0, -0.2, 0.4]))
    o2 = Orientation(-th, np.array([0.1, 0.2, -0.3]))
    batch = synth(o1, o2)
    assert batch.S.shape == (3, 8, 8)
    for i in range(3):
        one = synth(Orientation(o1.theta[i], o1.phi[i]), Orientation(o2.theta[i], o2.phi[i]))
        assert_allclose(batch.G[i], one.G, rtol=1e-13)
        assert_allclose(batch.S[i], one.S, rtol=1e-13)
        assert_allclose(batch.f[i], one.f, rtol=1e-13)


def test_fresh_draws_with_rng():
    g = default_geometry(4, 8, 8)
    synth = ChannelSynthesizer(g, RicianParams.uniform(1.0, 1e-4), seed=2)
    a = synth(O1, O2, rng=np.random.default_rng(0))
    b = synth(O1, O2)
    assert not np.allclose(a.G, b.G)


def test_element_amplitude_option():
    g = default_geometry(4, 8, 8)
    p = RicianParams.uniform(0.0, 1e-4)  # NLoS only
    a = ChannelSynthesizer(g, p, seed=4, nlos_amplitude="element")(O1, O2)
    b = ChannelSynthesizer(g, p, seed=4)(O1, O2)
    bs, p1, _ = _positions(g)
    d = np.linalg.norm(p1[:, None] - bs[None], axis=-1)
    assert_allclose(a.G * d, b.G * far_field_distances(g)[0], rtol=1e-12)


def test_bad_options():
    g = default_geometry(4, 4, 4)
    with pytest.raises(ValueError):
        ChannelSynthesizer(g, RicianParams(), los_model="conic")
    with pytest.raises(ValueError):
        ChannelSynthesizer(g, RicianParams(), nlos_amplitude="none")
    with pytest.raises(ValueError):
        ChannelSynthesizer(g, RicianParams())(O1)
    with pytest.raises(ValueError):
        RicianParams(beta=0.0)
    with pytest.raises(ValueError):
        RicianParams(kappa_g=-1.0)


def test_rician_params_helpers():
    p = RicianParams.from_db(10.0, -40.0)
    assert_allclose([p.kappa_g, p.kappa_s, p.kappa_f, p.beta], [10.0, 10.0, 10.0, 1e-4])
    assert RicianParams.from_db(math.inf, -40.0).is_los
    assert not p.is_los


def test_channel_set_rotation():
    ch = ChannelSet(np.ones((2, 1), complex), np.ones((2, 2), complex), np.ones(2, complex))
    r = ch.rotated(0.1, 0.2, 0.3)
    assert_allclose(r.G, np.exp(0.1j))
    assert_allclose(r.S, np.exp(0.2j))
    assert_allclose(r.f, np.exp(0.3j))
    sig = LosSignature(np.ones(3), np.arange(2.0))
    assert sig.G().shape == (2, 3)
