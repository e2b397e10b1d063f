"""Input validation helpers shared by the estimator API and the CLI."""

from __future__ import annotations

from .netmodel import ChannelSet, NetworkInstance, SnrConfig

__all__ = ["check_instance", "as_instance"]


def check_instance(instance: NetworkInstance) -> NetworkInstance:
    """Validate that channels and SNRs describe the same network."""
    ch, snrs = instance.channels, instance.snrs
    k, n = ch.g_sd.shape
    j = ch.g_sr.shape[1]
    if snrs.snr_sd.shape != (k,) or snrs.snr_sr.shape != (k, j) or snrs.snr_rd.shape != (j, k):
        raise ValueError(
            f"SNR config shaped for (K={snrs.snr_sd.shape[0]}, J={snrs.snr_sr.shape[1]}) "
            f"does not match channels with (K={k}, J={j})"
        )
    return instance


def as_instance(x) -> NetworkInstance:
    """Accept a NetworkInstance or a (ChannelSet, SnrConfig) pair."""
    if isinstance(x, NetworkInstance):
        return x
    if isinstance(x, (tuple, list)) and len(x) >= 2:
        ch, snrs = x[0], x[1]
        if isinstance(ch, ChannelSet) and isinstance(snrs, SnrConfig):
            return NetworkInstance(channels=ch, snrs=snrs)
    raise TypeError(
        "expected a NetworkInstance or a (ChannelSet, SnrConfig) pair, "
        f"got {type(x).__name__}"
    )
