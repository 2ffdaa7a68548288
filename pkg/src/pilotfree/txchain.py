"""
Transmitter: QPSK mapping, wideband SVD precoding, repetition insertion and
propagation of the per-layer grids through the channel.

Per resource element the received vector is::

    y = H (sum_l sqrt(alpha_l) f_l x_l) + w
"""

from dataclasses import dataclass

import numpy as np

from .channel import add_noise
from .errors import ConfigurationError, PatternInfeasibleError
from .grid import re_position
from .la_core import svd

__all__ = [
    "QPSK_POINTS",
    "qpsk_map",
    "qpsk_demap",
    "qpsk_decide",
    "random_qpsk",
    "Precoders",
    "wideband_precoders",
    "default_alpha",
    "assemble_grid",
    "effective_channels",
    "transmit",
]

_A = 1 / np.sqrt(2)
# Gray labels: first bit -> sign of I, second bit -> sign of Q
QPSK_POINTS = np.array([_A + 1j * _A, _A - 1j * _A, -_A + 1j * _A, -_A - 1j * _A])


def qpsk_map(bits):
    """Map a bit stream (even length) onto unit-energy Gray QPSK symbols."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % 2:
        raise ValueError("QPSK mapping needs an even number of bits")
    pairs = bits.reshape(-1, 2)
    return QPSK_POINTS[2 * pairs[:, 0] + pairs[:, 1]]


def qpsk_demap(symbols):
    """Hard-decision demapping (nearest point) back to bits."""
    s = np.asarray(symbols).ravel()
    out = np.empty((s.size, 2), dtype=np.int8)
    out[:, 0] = s.real < 0
    out[:, 1] = s.imag < 0
    return out.ravel()


def qpsk_decide(soft):
    """Nearest QPSK point for each soft symbol, shape preserved; NaN stays NaN."""
    soft = np.asarray(soft)
    out = (np.where(soft.real < 0, -_A, _A) + 1j * np.where(soft.imag < 0, -_A, _A))
    return np.where(np.isnan(soft), np.nan, out)


def random_qpsk(rng, shape):
    return QPSK_POINTS[rng.integers(0, 4, size=shape)]


@dataclass(frozen=True, eq=False)
class Precoders:
    """Wideband precoders, one unit-norm column of ``F`` per layer."""

    F: np.ndarray
    singular_values: np.ndarray

    @property
    def n_layers(self):
        return self.F.shape[1]

    def vector(self, layer):
        return self.F[:, layer]


def wideband_precoders(realization, n_layers, rank_tol=1e-10):
    """Leading right singular vectors of the grid-averaged channel matrix."""
    Hbar = realization.mean_matrix()
    n_r, n_t = Hbar.shape
    if n_layers > min(n_t, n_r):
        raise ConfigurationError(
            f"{n_layers} layers exceed min(n_t={n_t}, n_r={n_r})"
        )
    _, s, V = svd(Hbar)
    if s[n_layers - 1] <= rank_tol * s[0]:
        raise np.linalg.LinAlgError(
            f"averaged channel has rank < {n_layers} (singular values {s})"
        )
    return Precoders(V[:, :n_layers].copy(), s.copy())


def default_alpha(n_layers, power_norm="paper"):
    """Per-layer power allocation.

    ``"paper"`` gives every layer ``1/sqrt(L)``; ``"unit-total"`` gives
    ``1/L`` so the allocations sum to one.
    """
    if power_norm == "paper":
        return np.full(n_layers, 1.0 / np.sqrt(n_layers))
    if power_norm == "unit-total":
        return np.full(n_layers, 1.0 / n_layers)
    raise ConfigurationError(f"unknown power_norm {power_norm!r}")


def assemble_grid(dims, patterns, rng, ref_symbol=None):
    """Fill per-layer grids with QPSK data and insert the repetitions.

    Parameters
    ----------
    dims : GridDims
    patterns : sequence of CcaPattern or None
        Entry ``l`` is the pattern of layer ``l``; ``None`` leaves the layer
        as plain data (e.g. an interferer).
    rng : numpy Generator
    ref_symbol : complex, optional
        If given, the first source RE of every sub-grid carries this known
        symbol (the phase reference).

    Returns
    -------
    ndarray, shape ``(L, n_subcarriers, n_symbols)``
    """
    if len(patterns) != dims.n_layers:
        raise ConfigurationError(
            f"got {len(patterns)} patterns for {dims.n_layers} layers"
        )
    X = random_qpsk(rng, (dims.n_layers,) + dims.shape)
    for layer, p in enumerate(patterns):
        if p is None:
            continue
        if p.n_rb != dims.n_rb or p.n_symbols != dims.n_symbols:
            raise PatternInfeasibleError(f"pattern of layer {layer} does not match the grid")
        ms, ns = re_position(p.source, dims.n_rb)
        md, nd = re_position(p.dest, dims.n_rb)
        if ref_symbol is not None:
            X[layer, ms[:, 0], ns[:, 0]] = ref_symbol
        X[layer, md, nd] = X[layer, ms, ns]
    return X


def effective_channels(realization, precoders, alpha):
    """``sqrt(alpha_l) H f_l`` for every RE, shape ``(n_sc, n_sym, n_r, L)``."""
    G = precoders.F * np.sqrt(np.asarray(alpha, dtype=float))[None, :]
    return realization.H @ G


def transmit(grids, precoders, realization, alpha, noise_var=0.0, seed=None):
    """Propagate per-layer grids to the receive antennas.

    Returns the received tensor ``Y[subcarrier, symbol, antenna]``. Noise is
    drawn from ``seed`` so two transmissions with the same seed see the same
    noise realisation.
    """
    grids = np.asarray(grids)
    alpha = np.asarray(alpha, dtype=float)
    if grids.shape[0] != precoders.n_layers or alpha.size != precoders.n_layers:
        raise ConfigurationError("grids, precoders and alpha disagree on the layer count")
    Heff = effective_channels(realization, precoders, alpha)
    Y = np.einsum("mnrl,lmn->mnr", Heff, grids)
    return add_noise(Y, noise_var, seed)
