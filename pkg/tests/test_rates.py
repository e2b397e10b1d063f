import numpy as np
import pytest

from relayalloc.netmodel import NetworkDims, gen_iid_channels, snr_config_from_db
from relayalloc.rates import (
    Allocation,
    block_rate_finite,
    hessian_check_f,
    hessian_check_g,
    lifted_objective,
    perspective,
    rate_sd,
    rate_sr,
    rate_srd,
    shannon,
    subcarrier_rate_finite,
)


def test_shannon_values():
    assert shannon(0.0) == 0.0
    assert shannon(1.0) == pytest.approx(1.0)
    assert shannon(3.0) == pytest.approx(2.0)


def test_rate_sr_values():
    assert rate_sr(1.0, 1.0, 1.0) == pytest.approx(0.5)
    assert rate_sr(7.0, 0.0, 3.0) == 0.0
    assert rate_sr(10.0, 0.5, 0.6) == pytest.approx(1.0)


def test_rate_srd_values():
    assert rate_srd(1.0, 0.5, 1.0, 2.0, 0.25, 1.0) == pytest.approx(0.5)
    # zero relay power degenerates to the half-slot direct term
    assert rate_srd(4.0, 0.5, 1.0, 9.0, 0.0, 1.0) == pytest.approx(
        0.5 * np.log2(1 + 4.0 * 0.5)
    )
    r1 = rate_srd(1.0, 0.5, 1.0, 2.0, 0.2, 1.5)
    r2 = rate_srd(1.0, 0.5, 1.0, 2.0, 0.3, 1.5)
    assert r2 > r1


def test_rate_sd_values():
    assert rate_sd(1.0, 1.0, 1.0) == pytest.approx(1.0)
    assert rate_sd(1.0, 1.0, 3.0) == pytest.approx(2.0)


def test_half_duplex_bookkeeping():
    # the cooperative expression with silent relay is exactly half the
    # full-slot direct rate at identical SNR and power
    for snr, a, g in [(3.0, 0.7, 1.1), (20.0, 0.2, 0.4)]:
        assert 2.0 * rate_srd(snr, a, g, 5.0, 0.0, 2.0) == pytest.approx(
            rate_sd(snr, a, g)
        )


def _random_instance(k, j, n, seed, sd=5.0, sr=10.0, rd=10.0):
    dims = NetworkDims(k, j, n)
    ch = gen_iid_channels(dims, seed)
    snrs = snr_config_from_db(dims, sd, sr, rd)
    return ch, snrs


def _uniform_alloc(k, j, n, rng):
    a_src = rng.dirichlet(np.ones(n), size=k)
    a_rel = rng.dirichlet(np.ones(k * n), size=j).reshape(j, k, n)
    return Allocation(alpha_src=a_src, alpha_relay=a_rel)


def test_subcarrier_rate_matches_enumeration():
    ch, snrs = _random_instance(1, 2, 1, 21)
    rng = np.random.default_rng(0)
    alloc = _uniform_alloc(1, 2, 1, rng)
    rate, chosen = subcarrier_rate_finite(0, 0, ch, snrs, alloc)
    cands = [rate_sd(snrs.snr_sd[0], alloc.alpha_src[0, 0], ch.g_sd[0, 0])]
    for j in range(2):
        sr = rate_sr(snrs.snr_sr[0, j], alloc.alpha_src[0, 0], ch.g_sr[0, j, 0])
        srd = rate_srd(
            snrs.snr_sd[0],
            alloc.alpha_src[0, 0],
            ch.g_sd[0, 0],
            snrs.snr_rd[j, 0],
            alloc.alpha_relay[j, 0, 0],
            ch.g_rd[j, 0, 0],
        )
        cands.append(min(sr, srd))
    assert rate == pytest.approx(max(cands))
    assert chosen == int(np.argmax(cands))


def test_subcarrier_rate_zero_sr_gains_choose_direct():
    ch, snrs = _random_instance(2, 2, 3, 5)
    ch = type(ch)(g_sd=ch.g_sd, g_sr=np.zeros_like(ch.g_sr), g_rd=ch.g_rd)
    alloc = _uniform_alloc(2, 2, 3, np.random.default_rng(1))
    for k in range(2):
        for n in range(3):
            _, chosen = subcarrier_rate_finite(k, n, ch, snrs, alloc)
            assert chosen == 0


def test_subcarrier_rate_tie_breaks_toward_direct():
    dims = NetworkDims(1, 2, 1)
    ch = gen_iid_channels(dims, 3)
    snrs = snr_config_from_db(dims, 5.0, 10.0, 10.0)
    alloc = Allocation(
        alpha_src=np.zeros((1, 1)), alpha_relay=np.zeros((2, 1, 1))
    )
    rate, chosen = subcarrier_rate_finite(0, 0, ch, snrs, alloc)
    assert rate == 0.0 and chosen == 0


def test_block_rate_reduces_to_subcarrier_at_n1():
    ch, snrs = _random_instance(2, 2, 1, 9)
    alloc = _uniform_alloc(2, 2, 1, np.random.default_rng(2))
    for k in range(2):
        rb, cb = block_rate_finite(k, ch, snrs, alloc)
        rs, cs = subcarrier_rate_finite(k, 0, ch, snrs, alloc)
        assert rb == pytest.approx(rs) and cb == cs


def test_block_rate_matches_enumeration():
    ch, snrs = _random_instance(1, 2, 2, 33)
    alloc = _uniform_alloc(1, 2, 2, np.random.default_rng(4))
    rate, chosen = block_rate_finite(0, ch, snrs, alloc)
    a0 = alloc.alpha_src[0]
    cands = [rate_sd(snrs.snr_sd[0], a0, ch.g_sd[0]).sum()]
    for j in range(2):
        sr = rate_sr(snrs.snr_sr[0, j], a0, ch.g_sr[0, j]).sum()
        srd = rate_srd(
            snrs.snr_sd[0], a0, ch.g_sd[0],
            snrs.snr_rd[j, 0], alloc.alpha_relay[j, 0], ch.g_rd[j, 0],
        ).sum()
        cands.append(min(sr, srd))
    assert rate == pytest.approx(max(cands))
    assert chosen == int(np.argmax(cands))


def test_block_rate_zero_relay_gains():
    ch, snrs = _random_instance(2, 2, 4, 11)
    ch = type(ch)(g_sd=ch.g_sd, g_sr=ch.g_sr, g_rd=np.zeros_like(ch.g_rd))
    ch = type(ch)(g_sd=ch.g_sd, g_sr=np.zeros_like(ch.g_sr), g_rd=ch.g_rd)
    alloc = _uniform_alloc(2, 2, 4, np.random.default_rng(5))
    for k in range(2):
        _, chosen = block_rate_finite(k, ch, snrs, alloc)
        assert chosen == 0


def _lifted_alloc(k_n, j_n, n_n, rng):
    rho = rng.dirichlet(np.ones(j_n + 1), size=(k_n, n_n)).transpose(2, 0, 1)
    r = rho * rng.uniform(0.0, 1.0, size=rho.shape)
    p = rho[1:] * rng.uniform(0.0, 1.0, size=rho[1:].shape)
    return Allocation(
        alpha_src=r.sum(axis=0),
        alpha_relay=p,
        rho=rho,
        r_lift=r,
        p_lift=p,
    )


def test_lifted_one_hot_consistency():
    # one-hot time shares with r = rho*alpha, p = rho*alpha reproduce the
    # unrelaxed rate of the selected strategy
    ch, snrs = _random_instance(2, 2, 3, 44)
    rng = np.random.default_rng(6)
    sel = rng.integers(0, 3, size=(2, 3))
    a_src = rng.dirichlet(np.ones(3), size=2)
    a_rel = rng.uniform(0.1, 0.3, size=(2, 2, 3))
    rho = np.zeros((3, 2, 3))
    np.put_along_axis(rho, sel[None, :, :], 1.0, axis=0)
    alloc = Allocation(
        alpha_src=a_src,
        alpha_relay=a_rel,
        rho=rho,
        r_lift=rho * a_src[None, :, :],
        p_lift=rho[1:] * a_rel,
    )
    for k in range(2):
        expect = 0.0
        for n in range(3):
            j = sel[k, n]
            if j == 0:
                expect += rate_sd(snrs.snr_sd[k], a_src[k, n], ch.g_sd[k, n])
            else:
                sr = rate_sr(snrs.snr_sr[k, j - 1], a_src[k, n], ch.g_sr[k, j - 1, n])
                srd = rate_srd(
                    snrs.snr_sd[k], a_src[k, n], ch.g_sd[k, n],
                    snrs.snr_rd[j - 1, k], a_rel[j - 1, k, n], ch.g_rd[j - 1, k, n],
                )
                expect += min(sr, srd)
        assert lifted_objective(k, ch, snrs, alloc) == pytest.approx(expect)


def test_lifted_direct_only_corner():
    ch, snrs = _random_instance(2, 2, 4, 55)
    rng = np.random.default_rng(7)
    a_src = rng.dirichlet(np.ones(4), size=2)
    rho = np.zeros((3, 2, 4))
    rho[0] = 1.0
    alloc = Allocation(
        alpha_src=a_src,
        alpha_relay=np.zeros((2, 2, 4)),
        rho=rho,
        r_lift=rho * a_src[None, :, :],
        p_lift=np.zeros((2, 2, 4)),
    )
    for k in range(2):
        expect = rate_sd(snrs.snr_sd[k], a_src[k], ch.g_sd[k]).sum()
        assert lifted_objective(k, ch, snrs, alloc) == pytest.approx(expect)


def test_lifted_matches_hand_expansion():
    # K=J=N=1: R = rho0*C(s0*r0*g0/rho0) + rho1*min(C(ssr*r1*gsr/rho1),
    # C((s0*r1*g0 + srd*p1*grd)/rho1))/2, expanded by hand
    ch, snrs = _random_instance(1, 1, 1, 66)
    rho = np.array([0.4, 0.6]).reshape(2, 1, 1)
    r = np.array([0.3, 0.5]).reshape(2, 1, 1)
    p = np.array([0.45]).reshape(1, 1, 1)
    alloc = Allocation(
        alpha_src=r.sum(axis=0), alpha_relay=p, rho=rho, r_lift=r, p_lift=p
    )
    g0, gsr, grd = ch.g_sd[0, 0], ch.g_sr[0, 0, 0], ch.g_rd[0, 0, 0]
    s0, ssr, srd = snrs.snr_sd[0], snrs.snr_sr[0, 0], snrs.snr_rd[0, 0]
    direct = 0.4 * np.log2(1 + s0 * 0.3 * g0 / 0.4)
    sr = 0.5 * 0.6 * np.log2(1 + ssr * 0.5 * gsr / 0.6)
    srd_v = 0.5 * 0.6 * np.log2(1 + (s0 * 0.5 * g0 + srd * 0.45 * grd) / 0.6)
    assert lifted_objective(0, ch, snrs, alloc) == pytest.approx(
        direct + min(sr, srd_v)
    )


def test_lifted_concavity_along_segments():
    ch, snrs = _random_instance(2, 2, 3, 77)
    rng = np.random.default_rng(8)
    for _ in range(200):
        a = _lifted_alloc(2, 2, 3, rng)
        b = _lifted_alloc(2, 2, 3, rng)
        for lam in (0.25, 0.5, 0.75):
            mid = Allocation(
                alpha_src=lam * a.alpha_src + (1 - lam) * b.alpha_src,
                alpha_relay=lam * a.alpha_relay + (1 - lam) * b.alpha_relay,
                rho=lam * a.rho + (1 - lam) * b.rho,
                r_lift=lam * a.r_lift + (1 - lam) * b.r_lift,
                p_lift=lam * a.p_lift + (1 - lam) * b.p_lift,
            )
            for k in range(2):
                fa = lifted_objective(k, ch, snrs, a)
                fb = lifted_objective(k, ch, snrs, b)
                fm = lifted_objective(k, ch, snrs, mid)
                assert fm >= lam * fa + (1 - lam) * fb - 1e-9


def test_perspective_continuity_at_zero():
    assert perspective(0.0, 0.0) == 0.0
    vals = [perspective(t, 0.5 * t) for t in (1e-3, 1e-6, 1e-9, 1e-12)]
    assert all(abs(v) < 1e-2 for v in vals)
    assert abs(vals[-1]) < 1e-11


def test_hessian_f_claims():
    # trace negative, determinant zero: largest eigenvalue is exactly zero
    top = hessian_check_f(1.0, 1.0)
    assert top <= 1e-10
    h = np.array([[-1.0, 1.0], [1.0, -1.0]]) / 4.0
    assert abs(np.linalg.det(h)) < 1e-10


def test_hessian_g_claims():
    assert hessian_check_g(2.0, 3.0, 5.0) <= 1e-10
    # rank one: two vanishing singular values
    from relayalloc.rates import _hessian_g

    s = np.linalg.svd(_hessian_g(2.0, 3.0, 5.0), compute_uv=False)
    assert s[1] <= 1e-10 * s[0] and s[2] <= 1e-10 * s[0]


def test_hessian_random_sweep():
    rng = np.random.default_rng(9)
    for _ in range(300):
        x, y, z = rng.uniform(1e-3, 10.0, size=3)
        assert hessian_check_f(x, y) <= 1e-8
        assert hessian_check_g(x, y, z) <= 1e-8


def test_hessian_domain_error():
    with pytest.raises(ValueError):
        hessian_check_f(0.0, 1.0)
    with pytest.raises(ValueError):
        hessian_check_g(-1.0, 1.0, 1.0)


def test_hessian_matches_finite_differences():
    # independent check of the closed forms against central differences
    from relayalloc.rates import _hessian_f, _hessian_g

    def f(x, y):
        return x * np.log(1 + y / x)

    def g(x, y, z):
        return x * np.log(1 + y / x + z / x)

    h = 1e-5
    for x0, y0 in [(1.3, 0.8), (0.5, 2.0)]:
        num = np.zeros((2, 2))
        pts = [x0, y0]
        for i in range(2):
            for j in range(2):
                def ev(di, dj):
                    q = list(pts)
                    q[i] += di
                    q[j] += dj
                    return f(*q)
                num[i, j] = (ev(h, h) - ev(h, -h) - ev(-h, h) + ev(-h, -h)) / (4 * h * h)
        assert np.allclose(num, _hessian_f(x0, y0), atol=1e-5)
    x0, y0, z0 = 1.1, 0.7, 1.9
    num = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            def ev(di, dj):
                q = [x0, y0, z0]
                q[i] += di
                q[j] += dj
                return g(*q)
            num[i, j] = (ev(h, h) - ev(h, -h) - ev(-h, h) + ev(-h, -h)) / (4 * h * h)
    assert np.allclose(num, _hessian_g(x0, y0, z0), atol=1e-5)


def test_rate_report_invariants():
    from relayalloc.rates import build_rate_report

    ch, snrs = _random_instance(2, 2, 3, 88)
    alloc = _uniform_alloc(2, 2, 3, np.random.default_rng(11))
    rep = build_rate_report(ch, snrs, alloc)
    assert np.allclose(rep.per_source, rep.per_subcarrier.sum(axis=1))
    assert rep.min_rate == pytest.approx(rep.per_source.min())
    assert rep.chosen_node.shape == (2, 3)
    assert np.all((rep.chosen_node >= 0) & (rep.chosen_node <= 2))


def test_allocation_validate():
    rng = np.random.default_rng(10)
    alloc = _uniform_alloc(2, 2, 3, rng)
    alloc.validate()
    bad = Allocation(
        alpha_src=np.full((2, 3), 0.5), alpha_relay=np.zeros((2, 2, 3))
    )
    with pytest.raises(ValueError):
        bad.validate()
