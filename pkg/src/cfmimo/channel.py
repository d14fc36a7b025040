"""Block-fading channel draws.

Each coherent block gets an independent realization g_k = Lambda_k^{1/2} h_k
per user, with h_k i.i.d. CN(0, 1) entries, so g_k ~ CN(0, Lambda_k). Streams
derived from (master_seed, block_index) make block generation parallelizable
with results independent of scheduling order.
"""

from dataclasses import dataclass

import numpy as np

from .streams import CHANNEL_DOMAIN, complex_normal, derive_rng


@dataclass(frozen=True)
class ChannelRealization:
    """One block's channel matrix; column k is user k's MN-vector."""

    matrix: np.ndarray  # (MN, K) complex
    block_index: int


def block_rng(master_seed, block_index):
    """Stream for one coherent block, fresh per (master_seed, block_index)."""
    return derive_rng(master_seed, CHANNEL_DOMAIN, block_index)


def draw_channel(profile, block_index, rng):
    """Draw all users' channels for one coherent block.

    Column k is sqrt(Lambda_k diagonal) times an i.i.d. CN(0,1) vector.
    """
    sqrt_lam = np.sqrt(profile.lam_all()).T  # (MN, K)
    g = sqrt_lam * complex_normal(rng, sqrt_lam.shape)
    return ChannelRealization(matrix=g, block_index=block_index)
