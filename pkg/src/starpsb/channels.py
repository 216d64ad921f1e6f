"""Geometry-driven Rician channels and the cascade matrices built from them.

Both arrays are half-wavelength uniform linear arrays: the BS array runs along
the x-axis and the STAR-RIS elements along the y-axis. The LoS component of a
vector link is the STAR-RIS steering vector toward the node; the LoS component
of the BS→STAR-RIS matrix is the outer product of the STAR-RIS steering vector
toward the BS and the conjugated BS steering vector toward the STAR-RIS.
"""

from __future__ import annotations

import hashlib
import itertools
import logging

import numpy as np

from starpsb.core.errors import ChannelError
from starpsb.core.models import CascadeSet, ChannelSet, NetworkConfig

logger = logging.getLogger(__name__)

BS_AXIS = np.array([1.0, 0.0, 0.0])
RIS_AXIS = np.array([0.0, 1.0, 0.0])

_NODES = ("BS", "RIS", "IU", "OU", "E1", "E2")


def steering_vector(size: int, axis: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Half-wavelength ULA response exp(jπ·n·cos φ) toward `direction`."""
    unit = direction / np.linalg.norm(direction)
    cos_phi = float(unit @ axis)
    return np.exp(1j * np.pi * np.arange(size) * cos_phi)


def _check_distances(config: NetworkConfig) -> None:
    for a, b in itertools.combinations(_NODES, 2):
        pa = np.asarray(getattr(config, f"pos_{a}"), dtype=float)
        pb = np.asarray(getattr(config, f"pos_{b}"), dtype=float)
        if np.linalg.norm(pa - pb) == 0.0:
            raise ChannelError(f"Zero distance between {a} and {b}: path loss undefined")


def _path_gain(config: NetworkConfig, d: float, alpha: float) -> float:
    return float(np.sqrt(config.L0 * d ** (-alpha)))


def _nlos(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """i.i.d. CN(0, 1) entries."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def generate_channels(config: NetworkConfig) -> ChannelSet:
    """Draw one Rician channel realization for the scene.

    NLoS blocks are drawn from ``np.random.default_rng(config.rng_seed)`` in the
    order G, h_I, h_O, h_E1, h_E2, so a seed fully determines the realization.

    Raises:
        ChannelError: If any two nodes coincide.
    """
    _check_distances(config)
    rng = np.random.default_rng(config.rng_seed)
    los_w = np.sqrt(config.kappa / (1.0 + config.kappa))
    nlos_w = np.sqrt(1.0 / (1.0 + config.kappa))

    bs = np.asarray(config.pos_BS, dtype=float)
    ris = np.asarray(config.pos_RIS, dtype=float)

    d_bs = float(np.linalg.norm(ris - bs))
    g_los = np.outer(
        steering_vector(config.N, RIS_AXIS, bs - ris),
        steering_vector(config.M, BS_AXIS, ris - bs).conj(),
    )
    G = _path_gain(config, d_bs, config.alpha_BS) * (
        los_w * g_los + nlos_w * _nlos(rng, (config.N, config.M))
    )

    links: dict[str, np.ndarray] = {}
    for node in ("IU", "OU", "E1", "E2"):
        pos = np.asarray(getattr(config, f"pos_{node}"), dtype=float)
        d = float(np.linalg.norm(pos - ris))
        h_los = steering_vector(config.N, RIS_AXIS, pos - ris)
        links[node] = _path_gain(config, d, getattr(config, f"alpha_{node}")) * (
            los_w * h_los + nlos_w * _nlos(rng, (config.N,))
        )

    logger.debug(
        "Generated channels M=%d N=%d seed=%d (d_BS=%.2f m)",
        config.M,
        config.N,
        config.rng_seed,
        d_bs,
    )
    return ChannelSet(G=G, h_I=links["IU"], h_O=links["OU"], h_E1=links["E1"], h_E2=links["E2"])


def cascade(G: np.ndarray, h: np.ndarray) -> np.ndarray:
    """V = Gᴴ·diag(h), computed entrywise as conj(G[n, m])·h[n]."""
    return G.conj().T * h[np.newaxis, :]


def build_cascades(channels: ChannelSet) -> CascadeSet:
    """Cascade matrices for both users and both eavesdroppers."""
    return CascadeSet(
        V_I=cascade(channels.G, channels.h_I),
        V_O=cascade(channels.G, channels.h_O),
        V_E1=cascade(channels.G, channels.h_E1),
        V_E2=cascade(channels.G, channels.h_E2),
    )


def channel_digest(channels: ChannelSet) -> str:
    """sha256 over every channel block, for matched-seed comparisons."""
    digest = hashlib.sha256()
    for block in (channels.G, channels.h_I, channels.h_O, channels.h_E1, channels.h_E2):
        arr = np.ascontiguousarray(block, dtype=np.complex128)
        digest.update(str(arr.shape).encode())
        digest.update(arr.tobytes())
    return digest.hexdigest()
