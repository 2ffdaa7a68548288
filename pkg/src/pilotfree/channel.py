"""
Tapped-delay-line MIMO fading channel at resource-element resolution.

Each tap carries an ``n_r x n_t`` matrix of independent complex Gaussian
gains whose time evolution follows a sum-of-sinusoids (Jakes) process: every
entry is a sum of ``N_OSC`` complex Gaussian weights rotated at Doppler
frequencies ``f_D cos(theta_k)`` with uniform arrival angles ``theta_k``. For
any fixed time the entry is exactly CN(0, tap power); the autocorrelation
approaches ``J0(2 pi f_D tau)`` as the oscillator count grows.

The frequency response on subcarrier ``n`` at OFDM symbol ``t`` is::

    H[n, t] = sum_p A_p(t) exp(-j 2 pi n scs tau_p)

OFDM symbols last ``1 / scs`` (cyclic prefix ignored). SNR convention: with
unit-power constellations and unit average channel gain, the per-receive-
antenna symbol SNR is ``1 / noise_var``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import SPEED_OF_LIGHT

__all__ = [
    "N_OSC",
    "ChannelParams",
    "ChannelRealization",
    "exponential_pdp",
    "rms_delay_spread",
    "realize",
    "add_noise",
    "flat_realization",
]

N_OSC = 16
PDP_SPAN_DB = 20.0


def rms_delay_spread(pdp, tap_delays):
    pdp = np.asarray(pdp, dtype=float)
    tau = np.asarray(tap_delays, dtype=float)
    p = pdp / pdp.sum()
    mean = np.dot(p, tau)
    return float(np.sqrt(max(np.dot(p, tau**2) - mean**2, 0.0)))


def exponential_pdp(delay_spread, n_taps):
    """Exponential power-delay profile on a uniform delay lattice.

    Powers fall off by 20 dB from the first to the last tap; the lattice
    spacing is then scaled so the rms delay spread equals ``delay_spread``.

    Returns
    -------
    pdp, tap_delays : ndarray
        Normalised linear powers and delays in seconds.
    """
    if n_taps < 1:
        raise ValueError("n_taps must be >= 1")
    if n_taps == 1 or delay_spread == 0:
        pdp = np.zeros(n_taps)
        pdp[0] = 1.0
        return pdp, np.zeros(n_taps)
    decay = math.log(10 ** (PDP_SPAN_DB / 10)) / (n_taps - 1)
    lattice = np.arange(n_taps, dtype=float)
    pdp = np.exp(-decay * lattice)
    pdp /= pdp.sum()
    spacing = delay_spread / rms_delay_spread(pdp, lattice)
    return pdp, lattice * spacing


@dataclass(frozen=True)
class ChannelParams:
    """Physical channel configuration.

    ``pdp``/``tap_delays`` default to :func:`exponential_pdp` of
    ``delay_spread`` and ``n_taps``. ``speed`` is in m/s.
    """

    n_t: int
    n_r: int
    delay_spread: float = 30e-9
    speed: float = 0.0
    carrier: float = 4e9
    scs: float = 30e3
    n_taps: int = 8
    seed: object = 0
    pdp: np.ndarray = field(default=None, repr=False)
    tap_delays: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.n_t < 1 or self.n_r < 1:
            raise ValueError("need at least one antenna per side")
        if self.pdp is None or self.tap_delays is None:
            pdp, delays = exponential_pdp(self.delay_spread, self.n_taps)
            object.__setattr__(self, "pdp", pdp)
            object.__setattr__(self, "tap_delays", delays)
        pdp = np.asarray(self.pdp, dtype=float)
        delays = np.asarray(self.tap_delays, dtype=float)
        if pdp.shape != delays.shape or pdp.ndim != 1:
            raise ValueError("pdp and tap_delays must be 1-D of equal length")
        if abs(pdp.sum() - 1.0) > 1e-12 or np.any(pdp < 0):
            raise ValueError("pdp must be nonnegative and sum to 1")
        if np.any(np.diff(delays) < 0):
            raise ValueError("tap delays must be nondecreasing")
        object.__setattr__(self, "pdp", pdp)
        object.__setattr__(self, "tap_delays", delays)
        object.__setattr__(self, "n_taps", pdp.size)

    @property
    def doppler(self):
        return self.speed * self.carrier / SPEED_OF_LIGHT

    @property
    def symbol_duration(self):
        return 1.0 / self.scs


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Per-RE channel matrices ``H[subcarrier, symbol] in C^{n_r x n_t}``."""

    H: np.ndarray
    noise_var: float = 0.0

    @property
    def n_r(self):
        return self.H.shape[2]

    @property
    def n_t(self):
        return self.H.shape[3]

    def mean_matrix(self):
        """Average of all channel matrices over the grid."""
        return self.H.mean(axis=(0, 1))


def realize(params, dims, t0=0.0, noise_var=0.0):
    """Draw the channel over one slot starting at time ``t0`` seconds.

    The random state is fully determined by ``params.seed``; ``t0`` only
    moves the observation window along the same fading process, so slots of
    one seed are time samples of one channel.
    """
    rng = np.random.default_rng(params.seed)
    P, n_r, n_t = params.n_taps, params.n_r, params.n_t
    shape = (P, n_r, n_t, N_OSC)
    scale = np.sqrt(params.pdp / N_OSC)[:, None, None, None]
    weights = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    theta = rng.uniform(0.0, 2 * np.pi, size=shape)
    t = t0 + np.arange(dims.n_symbols) * params.symbol_duration
    omega = 2 * np.pi * params.doppler * np.cos(theta)
    # A[p, t, r, s] = sum_k w_k exp(j omega_k t)
    A = np.einsum("prsk,prskt->ptrs", weights, np.exp(1j * omega[..., None] * t))
    f = np.arange(dims.n_subcarriers) * params.scs
    E = np.exp(-2j * np.pi * np.outer(f, params.tap_delays))
    H = np.einsum("fp,ptrs->ftrs", E, A)
    return ChannelRealization(H, float(noise_var))


def flat_realization(matrix, dims, noise_var=0.0):
    """Realization whose channel equals ``matrix`` on every RE."""
    matrix = np.asarray(matrix, dtype=complex)
    H = np.broadcast_to(matrix, dims.shape + matrix.shape).copy()
    return ChannelRealization(H, float(noise_var))


def add_noise(Y, noise_var, seed=None):
    """Add circularly-symmetric complex Gaussian noise of variance ``noise_var``.

    ``seed`` may be anything :func:`numpy.random.default_rng` accepts,
    including a ``Generator``.
    """
    if noise_var < 0:
        raise ValueError("noise variance must be nonnegative")
    Y = np.asarray(Y, dtype=complex)
    if noise_var == 0:
        return Y.copy()
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(Y.shape + (2,))
    return Y + np.sqrt(noise_var / 2) * (w[..., 0] + 1j * w[..., 1])
