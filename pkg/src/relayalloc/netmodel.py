"""Network instance generation: dimensions, SNR configuration, channel gains.

Two scenarios are supported.  In the i.i.d. scenario every link gain is an
independent unit-mean exponential draw (Rayleigh magnitude squared) and the
per-link SNRs are given directly in dB.  In the geometric scenario nodes are
placed in a square service area, average link SNRs follow the COST-231
Walfisch-Ikegami NLOS path-loss model with log-normal shadowing, and
per-subcarrier small-scale fading multiplies the average link gain.

All generators are pure functions of their inputs and a seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NetworkDims",
    "SnrConfig",
    "ChannelSet",
    "Cost231Params",
    "NodeLayout",
    "NetworkInstance",
    "gen_iid_channels",
    "snr_config_from_db",
    "cost231_path_loss_db",
    "gen_geometric_instance",
    "two_relay_layout",
]

# Model validity floor for the COST-231 path loss; shorter links are clamped.
MIN_PATH_LOSS_DISTANCE_M = 10.0


@dataclass(frozen=True)
class NetworkDims:
    """Problem dimensions: K sources, J relays, N subcarriers per source.

    The network carries K*N orthogonal subcarriers in total, so simultaneous
    transmissions never interfere.
    """

    num_sources: int
    num_relays: int
    num_subcarriers: int

    def __post_init__(self):
        for name in ("num_sources", "num_relays", "num_subcarriers"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    @property
    def k(self) -> int:
        return self.num_sources

    @property
    def j(self) -> int:
        return self.num_relays

    @property
    def n(self) -> int:
        return self.num_subcarriers


@dataclass(frozen=True)
class SnrConfig:
    """Linear per-link SNRs: total transmit power over noise power.

    ``snr_sd[k]`` is the source-to-destination SNR of source k, ``snr_sr[k, j]``
    the source-k-to-relay-j SNR, and ``snr_rd[j, k]`` the relay-j-to-
    destination-k SNR.  Transmit power and noise never appear separately
    anywhere else in the library; they are absorbed here.
    """

    snr_sd: np.ndarray
    snr_sr: np.ndarray
    snr_rd: np.ndarray

    def __post_init__(self):
        sd = np.asarray(self.snr_sd, dtype=float)
        sr = np.asarray(self.snr_sr, dtype=float)
        rd = np.asarray(self.snr_rd, dtype=float)
        if sd.ndim != 1 or sr.ndim != 2 or rd.ndim != 2:
            raise ValueError("snr_sd must be (K,), snr_sr (K,J), snr_rd (J,K)")
        k = sd.shape[0]
        j = sr.shape[1]
        if sr.shape != (k, j) or rd.shape != (j, k):
            raise ValueError(
                f"inconsistent SNR shapes: sd {sd.shape}, sr {sr.shape}, rd {rd.shape}"
            )
        for name, a in (("snr_sd", sd), ("snr_sr", sr), ("snr_rd", rd)):
            if not np.all(np.isfinite(a)) or np.any(a <= 0):
                raise ValueError(f"{name} entries must be finite and > 0")
        for a in (sd, sr, rd):
            a.setflags(write=False)
        object.__setattr__(self, "snr_sd", sd)
        object.__setattr__(self, "snr_sr", sr)
        object.__setattr__(self, "snr_rd", rd)


@dataclass(frozen=True)
class ChannelSet:
    """Squared channel magnitudes per subcarrier.

    ``g_sd[k, n]``, ``g_sr[k, j, n]`` and ``g_rd[j, k, n]`` hold |h|^2 for the
    S-D, S-R and R-D links respectively.
    """

    g_sd: np.ndarray
    g_sr: np.ndarray
    g_rd: np.ndarray

    def __post_init__(self):
        sd = np.asarray(self.g_sd, dtype=float)
        sr = np.asarray(self.g_sr, dtype=float)
        rd = np.asarray(self.g_rd, dtype=float)
        if sd.ndim != 2 or sr.ndim != 3 or rd.ndim != 3:
            raise ValueError("g_sd must be (K,N), g_sr (K,J,N), g_rd (J,K,N)")
        k, n = sd.shape
        j = sr.shape[1]
        if sr.shape != (k, j, n) or rd.shape != (j, k, n):
            raise ValueError(
                f"inconsistent gain shapes: sd {sd.shape}, sr {sr.shape}, rd {rd.shape}"
            )
        for name, a in (("g_sd", sd), ("g_sr", sr), ("g_rd", rd)):
            if not np.all(np.isfinite(a)) or np.any(a < 0):
                raise ValueError(f"{name} entries must be finite and >= 0")
        for a in (sd, sr, rd):
            a.setflags(write=False)
        object.__setattr__(self, "g_sd", sd)
        object.__setattr__(self, "g_sr", sr)
        object.__setattr__(self, "g_rd", rd)

    @property
    def dims(self) -> NetworkDims:
        k, n = self.g_sd.shape
        return NetworkDims(k, self.g_sr.shape[1], n)


@dataclass(frozen=True)
class Cost231Params:
    """COST-231 Walfisch-Ikegami inputs plus shadowing and noise settings.

    Defaults are the standard urban-deployment values for a 3.5 GHz mesh of
    access points in a 200 m x 200 m area.
    """

    ap_height_m: float = 15.0
    frequency_ghz: float = 3.5
    building_spacing_m: float = 50.0
    rooftop_height_m: float = 30.0
    dest_height_m: float = 15.0
    road_orientation_deg: float = 90.0
    street_width_m: float = 12.0
    noise_psd_dbm_hz: float = -174.0
    shadowing_sigma_db: float = 10.6
    area_side_m: float = 200.0


@dataclass(frozen=True)
class NodeLayout:
    """Node positions in meters; sources/destinations on the area boundary,
    relays strictly inside.  ``clamped_links`` counts links shorter than the
    path-loss validity floor that were clamped during generation."""

    source_pos: np.ndarray
    dest_pos: np.ndarray
    relay_pos: np.ndarray
    clamped_links: int = 0


@dataclass(frozen=True)
class NetworkInstance:
    """A channel realization paired with its SNR configuration."""

    channels: ChannelSet
    snrs: SnrConfig
    layout: NodeLayout | None = None

    @property
    def dims(self) -> NetworkDims:
        return self.channels.dims


def gen_iid_channels(dims: NetworkDims, seed: int) -> ChannelSet:
    """Draw all squared channel gains i.i.d. Exponential(1).

    Magnitudes-squared of unit-variance circularly-symmetric complex Gaussian
    channels are exponential with unit mean.  Deterministic given ``seed``.
    """
    rng = np.random.default_rng(seed)
    k, j, n = dims.k, dims.j, dims.n
    return ChannelSet(
        g_sd=rng.exponential(1.0, size=(k, n)),
        g_sr=rng.exponential(1.0, size=(k, j, n)),
        g_rd=rng.exponential(1.0, size=(j, k, n)),
    )


def snr_config_from_db(dims: NetworkDims, sd_db: float, sr_db: float, rd_db: float) -> SnrConfig:
    """Uniform link-class SNRs in dB -> linear SnrConfig."""
    k, j = dims.k, dims.j
    return SnrConfig(
        snr_sd=np.full(k, 10.0 ** (sd_db / 10.0)),
        snr_sr=np.full((k, j), 10.0 ** (sr_db / 10.0)),
        snr_rd=np.full((j, k), 10.0 ** (rd_db / 10.0)),
    )


def cost231_path_loss_db(distance_m, p: Cost231Params = Cost231Params()):
    """COST-231 Walfisch-Ikegami NLOS path loss in dB.

    Accepts a scalar or array of distances; distances below the 10 m model
    floor are clamped to 10 m.  Monotone nondecreasing in distance.
    """
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance_m must be > 0")
    d_km = np.maximum(d, MIN_PATH_LOSS_DISTANCE_M) / 1000.0
    f_mhz = p.frequency_ghz * 1000.0

    # Free-space term.
    l0 = 32.4 + 20.0 * np.log10(d_km) + 20.0 * np.log10(f_mhz)

    # Rooftop-to-street diffraction, with street-orientation correction.
    phi = p.road_orientation_deg
    if phi < 35.0:
        l_ori = -10.0 + 0.354 * phi
    elif phi < 55.0:
        l_ori = 2.5 + 0.075 * (phi - 35.0)
    else:
        l_ori = 4.0 - 0.114 * (phi - 55.0)
    dh_dest = p.rooftop_height_m - p.dest_height_m
    l_rts = (
        -16.9
        - 10.0 * np.log10(p.street_width_m)
        + 10.0 * np.log10(f_mhz)
        + 20.0 * np.log10(dh_dest)
        + l_ori
    )
    l_rts = np.maximum(l_rts, 0.0)

    # Multi-screen diffraction along the rooftops.
    dh_base = p.ap_height_m - p.rooftop_height_m
    if dh_base > 0:
        l_bsh = -18.0 * np.log10(1.0 + dh_base)
        ka = 54.0
        kd = 18.0
    else:
        l_bsh = 0.0
        ka = np.where(d_km >= 0.5, 54.0 - 0.8 * dh_base, 54.0 - 0.8 * dh_base * d_km / 0.5)
        kd = 18.0 - 15.0 * dh_base / p.rooftop_height_m
    kf = -4.0 + 0.7 * (f_mhz / 925.0 - 1.0)
    l_msd = (
        l_bsh
        + ka
        + kd * np.log10(d_km)
        + kf * np.log10(f_mhz)
        - 9.0 * np.log10(p.building_spacing_m)
    )
    l_msd = np.maximum(l_msd, 0.0)

    total = l0 + l_rts + l_msd
    return float(total) if np.isscalar(distance_m) else total


def _pairwise_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance matrix between rows of a (m,2) and rows of b (n,2)."""
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)


def gen_geometric_instance(
    dims: NetworkDims,
    p: Cost231Params,
    tx_power_dbm: float,
    bandwidth_hz_per_subcarrier: float,
    seed: int,
    layout: NodeLayout | None = None,
) -> tuple[ChannelSet, SnrConfig, NodeLayout]:
    """Generate a geometric instance: layout, average SNRs, fast fading.

    Sources are placed uniformly on the left edge of the square area,
    destinations on the right edge, relays uniformly in the interior, unless
    an explicit ``layout`` is supplied.  Each link's average SNR in dB is

        tx_power - path_loss - shadowing - noise,

    with shadowing ~ Normal(0, sigma) per link and noise equal to the noise
    PSD integrated over the N-subcarrier block bandwidth.  Per-subcarrier
    gains are then independent Exponential(1) draws around the average.
    Deterministic given ``seed``.
    """
    rng = np.random.default_rng(seed)
    k, j, n = dims.k, dims.j, dims.n
    side = p.area_side_m

    if layout is None:
        src = np.column_stack([np.zeros(k), rng.uniform(0.0, side, size=k)])
        dst = np.column_stack([np.full(k, side), rng.uniform(0.0, side, size=k)])
        rel = rng.uniform(0.0, side, size=(j, 2))
        layout = NodeLayout(source_pos=src, dest_pos=dst, relay_pos=rel)
    else:
        src, dst, rel = layout.source_pos, layout.dest_pos, layout.relay_pos

    d_sd = np.linalg.norm(src - dst, axis=1)            # (K,)
    d_sr = _pairwise_dist(src, rel)                     # (K,J)
    d_rd = _pairwise_dist(rel, dst)                     # (J,K)
    clamped = int(
        np.sum(d_sd < MIN_PATH_LOSS_DISTANCE_M)
        + np.sum(d_sr < MIN_PATH_LOSS_DISTANCE_M)
        + np.sum(d_rd < MIN_PATH_LOSS_DISTANCE_M)
    )

    pl_sd = cost231_path_loss_db(d_sd, p)
    pl_sr = cost231_path_loss_db(d_sr, p)
    pl_rd = cost231_path_loss_db(d_rd, p)

    sigma = p.shadowing_sigma_db
    sh_sd = rng.normal(0.0, sigma, size=d_sd.shape) if sigma > 0 else np.zeros(d_sd.shape)
    sh_sr = rng.normal(0.0, sigma, size=d_sr.shape) if sigma > 0 else np.zeros(d_sr.shape)
    sh_rd = rng.normal(0.0, sigma, size=d_rd.shape) if sigma > 0 else np.zeros(d_rd.shape)

    noise_dbm = p.noise_psd_dbm_hz + 10.0 * np.log10(n * bandwidth_hz_per_subcarrier)
    snrs = SnrConfig(
        snr_sd=10.0 ** ((tx_power_dbm - pl_sd - sh_sd - noise_dbm) / 10.0),
        snr_sr=10.0 ** ((tx_power_dbm - pl_sr - sh_sr - noise_dbm) / 10.0),
        snr_rd=10.0 ** ((tx_power_dbm - pl_rd - sh_rd - noise_dbm) / 10.0),
    )
    channels = ChannelSet(
        g_sd=rng.exponential(1.0, size=(k, n)),
        g_sr=rng.exponential(1.0, size=(k, j, n)),
        g_rd=rng.exponential(1.0, size=(j, k, n)),
    )
    layout = NodeLayout(src, dst, rel, clamped_links=clamped)
    return channels, snrs, layout


def two_relay_layout(
    position_frac: float,
    perp_offset_m: float = 30.0,
    area_side_m: float = 200.0,
) -> NodeLayout:
    """Single source-destination pair across the area diagonal, two relays.

    The source sits at one corner and the destination at the opposite corner,
    so the S-D distance is sqrt(2) times the area side.  The relays straddle
    the S-D path at fraction ``position_frac`` along it, offset by
    ``perp_offset_m`` on either side, clipped to stay inside the area.
    """
    if not 0.0 < position_frac < 1.0:
        raise ValueError("position_frac must be in (0, 1)")
    side = area_side_m
    src = np.array([[0.0, 0.0]])
    dst = np.array([[side, side]])
    base = src[0] + position_frac * (dst[0] - src[0])
    perp = np.array([1.0, -1.0]) / np.sqrt(2.0)
    lo, hi = 1.0, side - 1.0
    r1 = np.clip(base + perp_offset_m * perp, lo, hi)
    r2 = np.clip(base - perp_offset_m * perp, lo, hi)
    return NodeLayout(source_pos=src, dest_pos=dst, relay_pos=np.vstack([r1, r2]))
