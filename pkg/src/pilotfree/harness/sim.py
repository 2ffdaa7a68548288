"""
Seeded Monte-Carlo evaluation of the CCA, pilot-based and PCHAN receivers.

Random streams are derived with ``numpy.random.SeedSequence`` from the master
seed and a key that names what they drive::

    (seed,)              channel process of one channel seed
    (seed, frame, 1)     CCA-format data
    (seed, frame, 2)     pilot-format data
    (seed, frame, 3)     noise (shared by both formats)

None of the keys mention the sweep point or the receiver set, so every sweep
point sees the same channels and noise (paired comparisons) and disabling a
receiver leaves the others bit-identical. Work is split per
``(point, seed)``; partial counts are merged in a fixed order, so results do
not depend on the number of workers.

SER convention: for the CCA receiver every RE of a decoded layer counts
except that layer's destination copies and the known phase-reference RE of
each sub-grid (source REs count once). For the pilot-based receiver and PCHAN
every RE off the pilot symbols counts. Symbols of erased CCA blocks count as
errors and as erasures.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..channel import ChannelParams, realize
from ..grid import GridDims, make_layer_patterns, partition_subgrids, re_position, vicinity_partition
from ..rx_baseline import PilotConfig, pchan_equalize, pilot_grid, pilot_receive
from ..rx_cca import cca_receive
from ..txchain import QPSK_POINTS, assemble_grid, qpsk_decide, transmit, wideband_precoders
from .config import format_point

__all__ = ["REF_SYMBOL", "Row", "SimResult", "run_point", "per_seed_ser", "sweep", "SER_CONVENTION"]

REF_SYMBOL = QPSK_POINTS[0]
SER_CONVENTION = (
    "cca: all REs of a decoded layer minus its destination copies and one phase-reference "
    "RE per sub-grid; pilot/pchan: all REs off the pilot symbols; erased symbols count as errors"
)

_CHANNEL, _CCA_DATA, _PILOT_DATA, _NOISE = 0, 1, 2, 3


def _seq(master, *key):
    return np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))


@dataclass
class _Tally:
    err: int = 0
    count: int = 0
    rho_sum: float = 0.0
    rho_n: int = 0
    erasures: int = 0
    fallbacks: int = 0

    def add(self, other):
        self.err += other.err
        self.count += other.count
        self.rho_sum += other.rho_sum
        self.rho_n += other.rho_n
        self.erasures += other.erasures
        self.fallbacks += other.fallbacks


@dataclass(frozen=True)
class Row:
    sweep_axis: str
    point: object
    receiver: str
    layer: int
    err_count: int
    re_count: int
    mean_rho: float = None
    erasures: int = 0
    seconds: float = None

    @property
    def ser(self):
        return self.err_count / self.re_count if self.re_count else 0.0


@dataclass
class SimResult:
    rows: list
    meta: dict = field(default_factory=dict)

    def get(self, point, receiver, layer=0):
        for r in self.rows:
            if r.point == point and r.receiver == receiver and r.layer == layer:
                return r
        raise KeyError((point, receiver, layer))


class _PointSetup:
    """Geometry shared by every frame of one sweep point."""

    def __init__(self, cfg, pt):
        self.cfg = cfg
        self.pt = pt
        self.dims = GridDims(cfg.n_rb, cfg.n_symbols, cfg.layers)
        self.decoded = cfg.decoded_layers
        self.params = dict(
            n_t=cfg.n_t, n_r=cfg.n_r, delay_spread=cfg.delay_spread, speed=cfg.speed,
            carrier=cfg.carrier, scs=cfg.scs, n_taps=cfg.n_taps,
        )
        self.want_cca = "cca" in cfg.receivers
        self.want_pilot_fmt = bool({"pilot", "pchan"} & set(cfg.receivers))
        if self.want_cca:
            self.layout = partition_subgrids(self.dims, pt.n_bsg)
            sub_dims = GridDims(cfg.n_rb, cfg.n_symbols, len(self.decoded))
            self.patterns = make_layer_patterns(sub_dims, self.layout, pt.kind, cfg.n_per_rb)
            self.vmaps = [vicinity_partition(self.dims, self.layout, p) for p in self.patterns]
            self.tx_patterns = [None] * cfg.layers
            for p in self.patterns:
                self.tx_patterns[p.layer] = p
            self.cca_masks = []
            for p in self.patterns:
                mask = np.ones(self.dims.shape, dtype=bool)
                md, nd = re_position(p.dest, cfg.n_rb)
                mask[md, nd] = False
                ms, ns = re_position(p.source[:, 0], cfg.n_rb)
                mask[ms, ns] = False
                self.cca_masks.append(mask)
        if self.want_pilot_fmt:
            self.pilots = PilotConfig(tuple(cfg.pilot_symbols), cfg.pilot_stride)
            self.pilot_mask = self.pilots.data_mask(self.dims)


def _count(decided, sent, mask):
    wrong = (decided != sent) | np.isnan(decided)
    return int(np.count_nonzero(wrong & mask)), int(np.count_nonzero(mask))


def _run_seed(cfg, setup, seed_idx):
    """Tallies for every (receiver, layer) over all frames of one channel seed."""
    pt = setup.pt
    tallies = {}
    params = ChannelParams(seed=_seq(cfg.master_seed, seed_idx), **setup.params)
    for frame in range(cfg.frames_per_seed):
        realization = realize(params, setup.dims, t0=frame * cfg.frame_period)
        prec = wideband_precoders(realization, cfg.layers)
        noise_seed = _seq(cfg.master_seed, seed_idx, frame, _NOISE)
        if setup.want_cca:
            rng = np.random.default_rng(_seq(cfg.master_seed, seed_idx, frame, _CCA_DATA))
            X = assemble_grid(setup.dims, setup.tx_patterns, rng, ref_symbol=REF_SYMBOL)
            Y = transmit(X, prec, realization, pt.alpha, pt.noise_var, noise_seed)
            genie = None
            if cfg.phase_ref == "genie":
                genie = {}
                for p in setup.patterns:
                    ms, ns = re_position(p.source, cfg.n_rb)
                    for j in range(setup.layout.subgrid_count):
                        genie[(p.layer, j)] = X[p.layer, ms[j], ns[j]]
            rec = cca_receive(Y, setup.patterns, setup.vmaps, setup.layout, REF_SYMBOL,
                              eps=cfg.eps, genie_blocks=genie)
            for li, p in enumerate(setup.patterns):
                t = tallies.setdefault(("cca", p.layer), _Tally())
                decided = qpsk_decide(rec.soft[li])
                e, c = _count(decided, X[p.layer], setup.cca_masks[li])
                t.err += e
                t.count += c
                ok = ~rec.erased[li]
                t.rho_sum += float(np.sum(rec.rho[li][ok]))
                t.rho_n += int(np.count_nonzero(ok))
                t.erasures += int(np.count_nonzero(np.isnan(rec.soft[li]) & setup.cca_masks[li]))
        if setup.want_pilot_fmt:
            rng = np.random.default_rng(_seq(cfg.master_seed, seed_idx, frame, _PILOT_DATA))
            Xp = pilot_grid(setup.dims, setup.pilots, rng, setup.decoded)
            Yp = transmit(Xp, prec, realization, pt.alpha, pt.noise_var, noise_seed)
            outs = {}
            if "pilot" in cfg.receivers:
                outs["pilot"] = pilot_receive(Yp, setup.pilots, setup.dims, setup.decoded, pt.noise_var)
            if "pchan" in cfg.receivers:
                outs["pchan"] = pchan_equalize(Yp, realization, prec, pt.alpha, pt.noise_var,
                                               layers=setup.decoded)
            for name, out in outs.items():
                for li, layer in enumerate(setup.decoded):
                    t = tallies.setdefault((name, layer), _Tally())
                    e, c = _count(qpsk_decide(out.soft[li]), Xp[layer], setup.pilot_mask)
                    t.err += e
                    t.count += c
                t.fallbacks += out.fallbacks
    return tallies


def _task(args):
    cfg, point_index, seed_idx = args
    pt = cfg.points()[point_index]
    t0 = time.perf_counter()
    tallies = _run_seed(cfg, _PointSetup(cfg, pt), seed_idx)
    return tallies, time.perf_counter() - t0


def _rows_for_point(cfg, pt, per_seed, seconds):
    merged = {}
    for tallies in per_seed:
        for key in sorted(tallies):
            merged.setdefault(key, _Tally()).add(tallies[key])
    rows = []
    for (rx, layer) in sorted(merged):
        t = merged[(rx, layer)]
        rows.append(Row(
            sweep_axis=cfg.sweep_axis,
            point=pt.value if not hasattr(pt.value, "value") else pt.value.value,
            receiver=rx,
            layer=layer,
            err_count=t.err,
            re_count=t.count,
            mean_rho=(t.rho_sum / t.rho_n if t.rho_n else float("nan")) if rx == "cca" else None,
            erasures=t.erasures,
            seconds=seconds if cfg.timing else None,
        ))
    return rows, merged


def run_point(cfg, point_index=0):
    """Rows of one sweep point, run serially."""
    pt = cfg.points()[point_index]
    setup = _PointSetup(cfg, pt)
    t0 = time.perf_counter()
    per_seed = [_run_seed(cfg, setup, s) for s in range(cfg.seeds)]
    rows, _ = _rows_for_point(cfg, pt, per_seed, time.perf_counter() - t0)
    return rows


def per_seed_ser(cfg, point_index=0, receiver="cca", layer=0):
    """SER of one receiver and layer for every channel seed of a sweep point.

    Seeds share channels and noise across sweep points, so arrays from two
    points of the same config form matched pairs.
    """
    setup = _PointSetup(cfg, cfg.points()[point_index])
    out = np.empty(cfg.seeds)
    for s in range(cfg.seeds):
        t = _run_seed(cfg, setup, s)[(receiver, layer)]
        out[s] = t.err / t.count if t.count else 0.0
    return out


def sweep(cfg, workers=None):
    """Run every sweep point and return a :class:`SimResult`.

    ``workers`` overrides ``cfg.workers``; values above one use a process
    pool. Output does not depend on the worker count.
    """
    workers = cfg.workers if workers is None else workers
    points = cfg.points()
    tasks = [(cfg, pt.index, s) for pt in points for s in range(cfg.seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        outputs = [_task(t) for t in tasks]
    rows = []
    fallbacks = {}
    for pt in points:
        chunk = outputs[pt.index * cfg.seeds:(pt.index + 1) * cfg.seeds]
        per_seed = [c[0] for c in chunk]
        seconds = sum(c[1] for c in chunk)
        pr, merged = _rows_for_point(cfg, pt, per_seed, seconds)
        rows.extend(pr)
        for (rx, layer), t in merged.items():
            if rx in ("pilot", "pchan"):
                fallbacks[f"{format_point(pr[0].point)}/{rx}"] = fallbacks.get(
                    f"{format_point(pr[0].point)}/{rx}", 0) + t.fallbacks
    meta = {
        "config_hash": cfg.config_hash(),
        "master_seed": cfg.master_seed,
        "seeds": list(range(cfg.seeds)),
        "frames_per_seed": cfg.frames_per_seed,
        "seed_keys": "SeedSequence(master_seed, spawn_key=(seed[, frame, stream]))",
        "ser_convention": SER_CONVENTION,
        "overhead": _overhead(cfg),
        "mmse_fallbacks": fallbacks,
    }
    return SimResult(rows, meta)


def _overhead(cfg):
    """Fraction of each decoded layer's REs not carrying new user data."""
    dims = GridDims(cfg.n_rb, cfg.n_symbols, cfg.layers)
    out = {}
    if "cca" in cfg.receivers:
        for pt in cfg.points():
            layout = partition_subgrids(dims, pt.n_bsg)
            nbar = cfg.n_per_rb * pt.n_bsg
            S = layout.subgrid_count
            out[f"cca@{pt.label}"] = {
                "repeat_only": nbar * S / dims.n_re,
                "repeat_and_source": 2 * nbar * S / dims.n_re,
                "phase_reference": S / dims.n_re,
            }
    if {"pilot", "pchan"} & set(cfg.receivers):
        out["pilot"] = len(cfg.pilot_symbols) / cfg.n_symbols
    return out
