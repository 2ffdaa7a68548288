"""
Comparison receivers: a pilot-lattice (DM-RS-like) receiver and the
perfect-channel (PCHAN) bound.

The pilot receiver estimates each layer's effective channel by least squares
on its own comb of pilot REs, interpolates bilinearly over the grid and
applies a per-RE linear MMSE equalizer. Every RE on a pilot symbol is kept
free of data on all scheduled layers; an unknown interferer is not bound by
that and may transmit everywhere.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .txchain import effective_channels, random_qpsk

__all__ = [
    "PilotConfig",
    "PilotEstimates",
    "MmseOutput",
    "pilot_grid",
    "ls_estimate",
    "interpolate",
    "mmse_equalize",
    "pchan_equalize",
    "pilot_receive",
]


@dataclass(frozen=True)
class PilotConfig:
    """Pilot lattice.

    Defaults: pilots on OFDM symbols 2 and 11, every second subcarrier, layer
    ``l`` on comb offset ``l``. Pilot values are a fixed pseudo-random QPSK
    sequence per layer drawn from ``sequence_seed``.
    """

    symbols: tuple = (2, 11)
    stride: int = 2
    offsets: tuple = None
    sequence_seed: int = 0x5EED

    def offset(self, layer):
        if self.offsets is None:
            return layer % self.stride
        return self.offsets[layer]

    def validate(self, dims, n_pilot_layers):
        if not self.symbols:
            raise ConfigurationError("pilot configuration has no pilot symbols")
        if any(s < 0 or s >= dims.n_symbols for s in self.symbols):
            raise ConfigurationError(f"pilot symbols {self.symbols} outside the slot")
        if self.stride < 1 or self.stride > dims.n_subcarriers:
            raise ConfigurationError(f"bad pilot stride {self.stride}")
        offs = [self.offset(layer) for layer in range(n_pilot_layers)]
        if len(set(offs)) != len(offs) or any(o < 0 or o >= self.stride for o in offs):
            raise ConfigurationError(
                f"pilot combs {offs} must be distinct offsets below stride {self.stride}"
            )

    def subcarriers(self, dims, layer):
        return np.arange(self.offset(layer), dims.n_subcarriers, self.stride)

    def values(self, dims, layer):
        """Pilot symbols, shape ``(len(symbols), n_pilot_subcarriers)``."""
        rng = np.random.default_rng([self.sequence_seed, layer])
        return random_qpsk(rng, (len(self.symbols), self.subcarriers(dims, layer).size))

    def data_mask(self, dims):
        """REs that carry data on scheduled layers (everything off the pilot symbols)."""
        mask = np.ones(dims.shape, dtype=bool)
        mask[:, list(self.symbols)] = False
        return mask


def pilot_grid(dims, cfg, rng, pilot_layers):
    """Per-layer transmit grids for the pilot-based format.

    Layers in ``pilot_layers`` get data off the pilot symbols and their own
    pilot comb on them (other combs muted). Remaining layers are unknown
    interferers with data on every RE.
    """
    cfg.validate(dims, len(pilot_layers))
    X = random_qpsk(rng, (dims.n_layers,) + dims.shape)
    syms = list(cfg.symbols)
    for layer in pilot_layers:
        X[layer][:, syms] = 0
        sc = cfg.subcarriers(dims, layer)
        X[layer][np.ix_(sc, syms)] = cfg.values(dims, layer).T
    return X


@dataclass(frozen=True, eq=False)
class PilotEstimates:
    """LS estimates on a regular pilot lattice, ``values[s, k, r]``."""

    layer: int
    symbols: np.ndarray
    subcarriers: np.ndarray
    values: np.ndarray


def ls_estimate(Y, cfg, dims, layer):
    """Least-squares effective-channel estimate at the layer's pilot REs.

    Pilots are unit modulus, so the estimate is ``y * conj(p)``.
    """
    sc = cfg.subcarriers(dims, layer)
    syms = np.asarray(cfg.symbols)
    p = cfg.values(dims, layer)
    y = Y[np.ix_(sc, syms)]  # (n_sc_p, n_sym_p, n_r)
    h = y.transpose(1, 0, 2) * np.conj(p)[..., None]
    return PilotEstimates(layer, syms, sc, h)


def _lerp_axis(x_known, values, x_target, axis):
    """Piecewise-linear interpolation along ``axis``, clamped at the edges."""
    x_known = np.asarray(x_known, dtype=float)
    x_target = np.asarray(x_target, dtype=float)
    values = np.moveaxis(values, axis, 0)
    if x_known.size == 1:
        out = np.repeat(values[:1], x_target.size, axis=0)
        return np.moveaxis(out, 0, axis)
    hi = np.clip(np.searchsorted(x_known, x_target, side="right"), 1, x_known.size - 1)
    lo = hi - 1
    t = (x_target - x_known[lo]) / (x_known[hi] - x_known[lo])
    t = np.clip(t, 0.0, 1.0)
    shape = (-1,) + (1,) * (values.ndim - 1)
    out = values[lo] * (1 - t).reshape(shape) + values[hi] * t.reshape(shape)
    return np.moveaxis(out, 0, axis)


def interpolate(est, dims):
    """Bilinear interpolation of pilot estimates over the whole grid.

    Linear between pilots along subcarriers then along symbols; outside the
    pilot span the nearest pilot value is held.

    Returns
    -------
    ndarray ``(n_subcarriers, n_symbols, n_r)``
    """
    if est.values.size == 0:
        raise ConfigurationError("no pilots to interpolate from")
    order = np.argsort(est.symbols)
    vals = est.values[order]
    f = _lerp_axis(est.subcarriers, vals, np.arange(dims.n_subcarriers), axis=1)
    full = _lerp_axis(est.symbols[order], f, np.arange(dims.n_symbols), axis=0)
    return full.transpose(1, 0, 2)


@dataclass(frozen=True, eq=False)
class MmseOutput:
    soft: np.ndarray
    fallbacks: int = 0


def mmse_equalize(Y, Hhat, noise_var, rcond=1e-12):
    """Per-RE linear MMSE equalizer.

    ``soft_l = h_l^H (H H^H + s2 I)^-1 y``, evaluated in the equivalent
    ``L x L`` form ``(H^H H + s2 I)^-1 H^H y`` which stays defined at zero
    noise. REs where that matrix is numerically singular fall back to the
    matched filter ``h_l^H y / ||h_l||^2``.

    Parameters
    ----------
    Y : ndarray ``(n_sc, n_sym, n_r)``
    Hhat : ndarray ``(n_sc, n_sym, n_r, L)``
    noise_var : float

    Returns
    -------
    MmseOutput
        ``soft`` has shape ``(L, n_sc, n_sym)``.
    """
    L = Hhat.shape[-1]
    Hh = np.conj(np.swapaxes(Hhat, -1, -2))
    G = Hh @ Hhat + noise_var * np.eye(L)
    rhs = (Hh @ Y[..., None])[..., 0]
    s = np.linalg.svd(G, compute_uv=False)
    bad = ~(s[..., -1] > rcond * np.maximum(s[..., 0], np.finfo(float).tiny))
    soft = np.empty(Y.shape[:2] + (L,), dtype=complex)
    good = ~bad
    if np.any(good):
        soft[good] = np.linalg.solve(G[good], rhs[good][..., None])[..., 0]
    if np.any(bad):
        norms = np.sum(np.abs(Hhat[bad]) ** 2, axis=-2)
        with np.errstate(divide="ignore", invalid="ignore"):
            soft[bad] = np.where(norms > 0, rhs[bad] / norms, np.nan)
    return MmseOutput(np.moveaxis(soft, -1, 0), int(np.count_nonzero(bad)))


def pchan_equalize(Y, realization, precoders, alpha, noise_var, layers=None):
    """MMSE equalization with the true effective channels of ``layers``."""
    Heff = effective_channels(realization, precoders, alpha)
    if layers is not None:
        Heff = Heff[..., list(layers)]
    return mmse_equalize(Y, Heff, noise_var)


def pilot_receive(Y, cfg, dims, layers, noise_var):
    """LS + bilinear interpolation + MMSE over the known ``layers``."""
    Hhat = np.stack([interpolate(ls_estimate(Y, cfg, dims, layer), dims) for layer in layers], axis=-1)
    return mmse_equalize(Y, Hhat, noise_var)
