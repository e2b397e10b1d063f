import numpy as np
import pytest

from relayalloc.netmodel import ChannelSet, NetworkDims, gen_iid_channels, snr_config_from_db
from relayalloc.oracle import (
    enumerate_block_assignments,
    grid_oracle_block,
    grid_oracle_ideal,
    grid_oracle_subcarrier,
)


def test_assignment_counts():
    count, it = enumerate_block_assignments(3, 2)
    assert count == 8 and len(list(it)) == 8
    count, it = enumerate_block_assignments(2, 2, allow_direct=True)
    assert count == 9 and len(list(it)) == 9
    count, it = enumerate_block_assignments(1, 5)
    assert count == 5
    assert sorted(list(it)) == [(1,), (2,), (3,), (4,), (5,)]


def test_assignment_guard():
    with pytest.raises(ValueError):
        enumerate_block_assignments(30, 4)


def test_oracle_guards():
    dims = NetworkDims(3, 2, 4)
    ch = gen_iid_channels(dims, 0)
    snrs = snr_config_from_db(dims, 5.0, 10.0, 10.0)
    with pytest.raises(ValueError):
        grid_oracle_subcarrier(ch, snrs)      # K*N = 12 > 4
    with pytest.raises(ValueError):
        grid_oracle_block(ch, snrs)           # K*N = 12 > 8
    dims2 = NetworkDims(2, 2, 2)
    ch2 = gen_iid_channels(dims2, 0)
    snrs2 = snr_config_from_db(dims2, 5.0, 10.0, 10.0)
    with pytest.raises(ValueError):
        grid_oracle_subcarrier(ch2, snrs2, levels=99)


def test_k1j1n1_matches_analytic():
    dims = NetworkDims(1, 1, 1)
    ch = gen_iid_channels(dims, 3)
    snrs = snr_config_from_db(dims, 5.0, 10.0, 10.0)
    direct = np.log2(1 + snrs.snr_sd[0] * ch.g_sd[0, 0])
    sr = 0.5 * np.log2(1 + snrs.snr_sr[0, 0] * ch.g_sr[0, 0, 0])
    srd = 0.5 * np.log2(
        1 + snrs.snr_sd[0] * ch.g_sd[0, 0] + snrs.snr_rd[0, 0] * ch.g_rd[0, 0, 0]
    )
    expect = max(direct, min(sr, srd))
    assert grid_oracle_subcarrier(ch, snrs) == pytest.approx(expect, abs=1e-9)
    assert grid_oracle_block(ch, snrs) == pytest.approx(expect, abs=1e-9)


def test_degenerate_direct_only_instance():
    # all relay links dead: oracle must equal waterfilled direct transmission
    dims = NetworkDims(2, 1, 2)
    ch0 = gen_iid_channels(dims, 8)
    ch = ChannelSet(
        g_sd=ch0.g_sd, g_sr=np.zeros_like(ch0.g_sr), g_rd=np.zeros_like(ch0.g_rd)
    )
    snrs = snr_config_from_db(dims, 5.0, 10.0, 10.0)
    from relayalloc.alloc_finite import direct_only

    expect = direct_only(ch, snrs).min_rate
    assert grid_oracle_subcarrier(ch, snrs) == pytest.approx(expect, abs=1e-7)
    assert grid_oracle_block(ch, snrs) == pytest.approx(expect, abs=1e-7)


def test_grid_refinement_monotone_in_levels():
    # without local refinement the 21-level grid is a superset of the
    # 11-level grid, so the value cannot decrease
    dims = NetworkDims(2, 2, 2)
    ch = gen_iid_channels(dims, 12)
    snrs = snr_config_from_db(dims, 5.0, 10.0, 10.0)
    v11 = grid_oracle_subcarrier(ch, snrs, levels=11, refine_rounds=0)
    v21 = grid_oracle_subcarrier(ch, snrs, levels=21, refine_rounds=0)
    assert v21 >= v11
    b11 = grid_oracle_block(ch, snrs, levels=11, refine_rounds=0)
    b21 = grid_oracle_block(ch, snrs, levels=21, refine_rounds=0)
    assert b21 >= b11


def test_oracle_sandwich_smoke():
    from relayalloc.alloc_finite import lbsb_finite, ubsb_finite

    dims = NetworkDims(2, 2, 2)
    ch = gen_iid_channels(dims, 42)
    snrs = snr_config_from_db(dims, 5.0, 10.0, 10.0)
    ub = ubsb_finite(ch, snrs, solver_options={"gap_tol": 1e-11})
    lb = lbsb_finite(ub, ch, snrs)
    orc = grid_oracle_subcarrier(ch, snrs)
    assert lb.min_rate - 1e-9 <= orc <= ub.min_rate + 1e-9


def test_ideal_oracle_tracks_relaxation():
    from relayalloc.alloc_ideal import ubsb_ideal

    dims = NetworkDims(2, 2, 2)
    ch = gen_iid_channels(dims, 21)
    snrs = snr_config_from_db(dims, 5.0, 10.0, 10.0)
    ub = ubsb_ideal(ch, snrs, solver_options={"gap_tol": 1e-11})
    orc = grid_oracle_ideal(ch, snrs)
    assert orc <= ub.min_rate + 1e-9
    assert abs(ub.min_rate - orc) < 1e-3
